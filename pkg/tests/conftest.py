import os
import json

import numpy as np
import pytest

from fracnet.mesh import (Fracture, FractureNetwork, build_geometry,
                          default_network)
from fracnet.nlmc import build_basis_set, CoarseSystem
from fracnet.datagen import ConstantMobility, BlockWellSource


def get_abspath(relativePath):
    """ return abs file path relative to this file"""
    return os.path.join(os.path.dirname(__file__), relativePath)


@pytest.fixture
def restore_cwd(request):
    """restore cwd to its initial value after test finishes."""
    previous = os.getcwd()
    def restore_cwd():
        os.chdir(previous)
    request.addfinalizer(restore_cwd)


# 4x4 blocks of 4x4 cells, one horizontal fracture crossing blocks 5 and 6
def one_fracture_network(permeability=1000.0, aperture=0.01):
    return FractureNetwork((
        Fracture(0.25, 0.375, 0.75, 0.375, aperture, permeability),))


@pytest.fixture
def plain_geometry():
    """3x3 blocks, no fractures"""
    return build_geometry(3, 3, 4)


@pytest.fixture
def small_geometry():
    return build_geometry(4, 4, 4, one_fracture_network())


@pytest.fixture
def coarse_default_geometry():
    """default fracture network on a 10x10 grid with 2x2 cells per block"""
    return build_geometry(10, 10, 2, default_network())


@pytest.fixture
def small_system(small_geometry):
    mobility = ConstantMobility(1.0)
    basis = build_basis_set(small_geometry, mobility, layers=1)
    return CoarseSystem(small_geometry, basis, mobility, dt=0.001)


@pytest.fixture
def two_wells(small_geometry):
    return BlockWellSource(small_geometry.grid, 0, 15, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_experiment_config(tmp_path, **values):
    """JSON experiment config small enough for unit tests"""
    config = {
        'nx': 10, 'ny': 10, 's': 2,
        'n_steps': 3, 'final_time': 0.003, 'steps': [1, 2],
        'source_count': 6, 'train_count': 4, 'test_count': 2,
        'inputs': ['full'],
        'training': {'epochs': 3, 'batch_size': 4, 'hidden': [8]},
        'out': str(tmp_path / 'out'),
    }
    config.update(values)
    path = tmp_path / 'experiment.json'
    path.write_text(json.dumps(config))
    return str(path)


@pytest.fixture
def experiment_file(tmp_path):
    return write_experiment_config(tmp_path)
