import fracnet
from fracnet.version import VERSION


def test_version():
    assert fracnet.__version__ == VERSION


def test_public_api():
    assert set(fracnet.__all__) == {'build_geometry', 'default_network',
                                    'ExperimentConfig', 'run_example'}
    geometry = fracnet.build_geometry(2, 2, 2)
    assert geometry.n == 4
    assert len(fracnet.default_network()) == 3
