import os

import numpy as np
import pytest

from fracnet.exceptions import (SnapshotMismatch, InvalidGeometry,
                                DimensionMismatch)
from fracnet.mesh import (Fracture, FractureNetwork, build_geometry,
                          default_network, oversample)
from fracnet.fine_solver import averaging_matrix
from fracnet.nlmc import (CONSTRAINT_TOL, mobility_key, take_snapshot,
                          build_basis, build_basis_set,
                          assemble_transmissibility,
                          assemble_coarse_mass_and_load, CoarseSystem,
                          coarse_step, solve_coarse, region_of_influence,
                          upscaling_error, export_coarse_system,
                          write_coarse_trajectory)
from fracnet.datagen import (ConstantMobility, FrontMobility, BlockWellSource,
                             TwoWellSampler)
from fracnet.runner import get_runner
from fracnet.storage import read_coo, load_json, read_csv


class TestBuildBasis(object):
    def test_constraints(self, small_geometry):
        mobility = ConstantMobility(1.0)
        snapshot = take_snapshot(small_geometry, mobility)
        region = oversample(small_geometry, 5, 1)
        local = build_basis(small_geometry, region, snapshot)
        assert local.dofs == (5, 16)
        assert local.residual <= CONSTRAINT_TOL
        R = averaging_matrix(small_geometry)
        full = np.zeros((small_geometry.mesh.n_vertices, 2))
        full[local.nodes] = local.values
        averages = R @ full
        # average 1 on its own continuum, 0 on every other one in the region
        assert averages[5, 0] == pytest.approx(1.0)
        assert averages[16, 0] == pytest.approx(0.0, abs=1e-9)
        assert averages[16, 1] == pytest.approx(1.0)
        assert averages[0, 1] == pytest.approx(0.0, abs=1e-9)

    def test_multipliers_shape(self, small_geometry):
        snapshot = take_snapshot(small_geometry, ConstantMobility(1.0))
        region = oversample(small_geometry, 0, 1)
        local = build_basis(small_geometry, region, snapshot)
        assert local.multipliers.shape == (len(local.constraint_dofs), 1)

    def test_dense_saddle_point(self, small_geometry):
        # full fine space, clamped nodes pinned by their own multipliers
        snapshot = take_snapshot(small_geometry, ConstantMobility(1.0))
        region = oversample(small_geometry, 5, 1)
        local = build_basis(small_geometry, region, snapshot)
        index = small_geometry.index
        cons = [d for b in region.blocks for d in index.block_dofs(b)]
        assert local.constraint_dofs == tuple(cons)
        n_v = small_geometry.mesh.n_vertices
        pinned = np.setdiff1d(np.arange(n_v), region.free_nodes())
        A = snapshot.stiffness.toarray()
        B = np.eye(n_v)[pinned]
        C = averaging_matrix(small_geometry).toarray()[cons]
        n_b, n_c = len(pinned), len(cons)
        kkt = np.block([[A, B.T, C.T],
                        [B, np.zeros((n_b, n_b)), np.zeros((n_b, n_c))],
                        [C, np.zeros((n_c, n_b)), np.zeros((n_c, n_c))]])
        for col, dof in enumerate(local.dofs):
            rhs = np.zeros(n_v + n_b + n_c)
            rhs[n_v + n_b + cons.index(dof)] = 1.0
            sol = np.linalg.solve(kkt, rhs)
            assert np.abs(sol[pinned]).max() <= 1e-12
            assert np.abs(local.values[:, col] - sol[local.nodes]).max() \
                <= 1e-9
            lam = sol[n_v + n_b:]
            assert np.abs(local.multipliers[:, col] - lam).max() <= \
                1e-8 * np.abs(lam).max()

    def test_continuum_without_free_node(self):
        # fracture on the block boundary, clamped when no layer is added
        network = FractureNetwork((Fracture(0.0, 0.5, 1.0, 0.5),))
        geometry = build_geometry(2, 2, 2, network)
        with pytest.raises(InvalidGeometry) as exc_info:
            build_basis_set(geometry, ConstantMobility(1.0), layers=0)
        assert 'no free node' in str(exc_info.value)


class TestBasisSet(object):
    def test_psi(self, small_geometry):
        basis = build_basis_set(small_geometry, ConstantMobility(1.0), 1)
        assert basis.n == 18
        assert basis.psi.shape == (small_geometry.mesh.n_vertices, 18)
        assert basis.residual <= CONSTRAINT_TOL
        assert basis.geometry_hash == small_geometry.hash
        assert basis.mobility_key == ('constant', 1.0)
        assert set(basis.multipliers) == set(range(18))

    def test_support_in_region(self, small_geometry):
        basis = build_basis_set(small_geometry, ConstantMobility(1.0), 1)
        region = oversample(small_geometry, 0, 1)
        support = basis.psi[:, 0].nonzero()[0]
        assert set(support) <= set(region.nodes)

    def test_clamped(self, small_geometry):
        basis = build_basis_set(small_geometry, ConstantMobility(1.0), 1,
                                clamp_domain_boundary=True)
        assert basis.clamp_domain_boundary
        assert basis.residual <= CONSTRAINT_TOL
        region = oversample(small_geometry, 0, 1)
        support = set(basis.psi[:, 0].nonzero()[0])
        assert not support & set(region.domain_boundary)

    def test_parallel_same_result(self, small_geometry):
        mobility = ConstantMobility(1.0)
        serial = build_basis_set(small_geometry, mobility, 1)
        threads = build_basis_set(small_geometry, mobility, 1,
                                  runner=get_runner(2, 'thread'))
        assert abs(serial.psi - threads.psi).max() == 0


class TestTransmissibility(object):
    def test_structure(self, small_system):
        T, A_T = small_system.T, small_system.A_T
        assert np.all(T.diagonal() == 0)
        assert abs(T - T.T).max() < 1e-12
        assert np.allclose(A_T @ np.ones(18), 0.0, atol=1e-9)

    def test_decay(self, small_system):
        # blocks 0 and 15 are 3 > 2 * layers blocks apart
        assert small_system.T[0, 15] == 0
        assert small_system.T[0, 1] != 0

    def test_fracture_matrix_coupling(self, small_system):
        T = small_system.T
        assert T[5, 16] < 0
        assert abs(T[16, 17]) > abs(T[5, 6])

    def test_grid_symmetry(self):
        geometry = build_geometry(5, 5, 4)
        mobility = ConstantMobility(1.0)
        basis = build_basis_set(geometry, mobility, 1)
        T, _ = assemble_transmissibility(geometry, basis, mobility)
        assert T[0, 1] < 0
        # reflection about the diagonal and rotation by 180 degrees
        assert T[0, 1] == pytest.approx(T[0, 5], rel=1e-8)
        assert T[0, 1] == pytest.approx(T[24, 23], rel=1e-8)
        assert T[12, 13] == pytest.approx(T[12, 11], rel=1e-8)

    def test_other_geometry(self, small_system, plain_geometry):
        pytest.raises(SnapshotMismatch, assemble_transmissibility,
                      plain_geometry, small_system.basis)

    def test_other_mobility(self, small_system):
        with pytest.raises(SnapshotMismatch) as exc_info:
            assemble_transmissibility(small_system.geometry,
                                      small_system.basis,
                                      ConstantMobility(2.0))
        assert "('constant', 2.0)" in str(exc_info.value)

    def test_mobility_key(self):
        assert mobility_key(FrontMobility(50, 0.1)) == \
            ('front', 50.0, 0.1, 0.05, 0.05)


class TestCoarseMassLoad(object):
    def test_two_wells(self):
        geometry = build_geometry(10, 10, 2)
        source = BlockWellSource(geometry.grid, 3, 77, 2.0)
        M_T, b_T = assemble_coarse_mass_and_load(geometry, source, 0.0)
        assert np.allclose(M_T.diagonal(), 0.01)
        assert b_T[3] == pytest.approx(2.0 * 0.01)
        assert b_T[77] == pytest.approx(-2.0 * 0.01)
        assert np.count_nonzero(b_T) == 2

    def test_no_load_on_fractures(self, small_geometry):
        source = BlockWellSource(small_geometry.grid, 5, 6, 1.0)
        _, b_T = assemble_coarse_mass_and_load(small_geometry, source, 0.0)
        assert b_T[16] == 0 and b_T[17] == 0
        assert b_T[5] == pytest.approx(1.0 / 16)

    def test_no_source(self, small_geometry):
        _, b_T = assemble_coarse_mass_and_load(small_geometry, None, 0.0)
        assert not np.any(b_T)


class TestCoarseSystem(object):
    def test_static_factor_shared(self, small_system):
        assert small_system.factor(1) is small_system.factor(7)
        assert small_system.stiffness(3) is small_system.A_T

    def test_time_dependent_stiffness(self, small_geometry):
        mobility = FrontMobility(50.0, 0.1)
        basis = build_basis_set(small_geometry, mobility, 1)
        system = CoarseSystem(small_geometry, basis, mobility)
        assert not system.static
        A1, A2 = system.stiffness(1), system.stiffness(2)
        assert abs(A1 - A2).max() > 0
        assert system.stiffness(1) is A1
        assert system.factor(1) is not system.factor(2)

    def test_pickle_drops_factors(self, small_system):
        small_system.factor(1)
        state = small_system.__getstate__()
        assert state['_factors'] == {}
        assert small_system._factors

    def test_step_shape(self, small_system):
        pytest.raises(DimensionMismatch, coarse_step, small_system,
                      np.zeros(4), 1)

    def test_solve_zero_source(self, small_system):
        states, loads = solve_coarse(small_system, None, n_steps=3)
        assert states.shape == (4, 18)
        assert loads.shape == (3, 18)
        assert not np.any(states)

    def test_solve_conserves_mass(self, small_system, two_wells):
        states, loads = solve_coarse(small_system, two_wells, n_steps=5)
        measures = small_system.measures
        assert np.dot(measures, states[-1]) == pytest.approx(0, abs=1e-12)
        assert states[-1][0] > 0 > states[-1][15]
        assert np.allclose(loads[0], loads[4])

    def test_initial_state(self, small_system):
        u1 = np.ones(18)
        states, _ = solve_coarse(small_system, None, u1, n_steps=2)
        # constants are steady states without source
        assert np.allclose(states[-1], 1.0)


class TestRegionOfInfluence(object):
    def test_radius(self, small_system):
        assert list(region_of_influence(small_system, 0, 0)) == [0]
        assert list(region_of_influence(small_system, 0, 1)) == \
            [0, 1, 4, 5, 16]
        assert len(region_of_influence(small_system, 0, 3)) == 18

    def test_geometry_accepted(self, small_geometry):
        assert list(region_of_influence(small_geometry, 16, 0)) == [5, 16]

    def test_negative(self, small_system):
        pytest.raises(InvalidGeometry, region_of_influence, small_system,
                      0, -1)


class TestUpscalingError(object):
    def test_zero_source(self, small_system):
        assert upscaling_error(small_system, None, n_steps=2) == 0.0

    def test_two_wells(self, small_system, two_wells):
        error = upscaling_error(small_system, two_wells, n_steps=3)
        assert 0 < error < 100


@pytest.fixture(scope='module')
def example_geometry():
    """10x10 blocks of 10x10 cells with the default fracture network"""
    return build_geometry(10, 10, 10, default_network())


class TestExampleAccuracy(object):
    def mean_error(self, geometry, layers, sources):
        mobility = ConstantMobility(1.0)
        basis = build_basis_set(geometry, mobility, layers)
        system = CoarseSystem(geometry, basis, mobility, dt=0.001)
        return np.mean([upscaling_error(system, source, n_steps=10)
                        for source in sources])

    def test_layers_reduce_error(self, example_geometry):
        sources = TwoWellSampler(example_geometry.grid).sample(4, 0)
        errors = [self.mean_error(example_geometry, layers, sources)
                  for layers in (1, 2, 3)]
        # two oversampling layers bring the coarse model within 5 %
        assert errors[1] < 5.0
        assert errors[0] >= errors[1] >= errors[2]


class TestExport(object):
    def test_files(self, tmp_path, small_system):
        dirname = str(tmp_path / 'coarse')
        export_coarse_system(small_system, dirname)
        T = read_coo(os.path.join(dirname, 'T.txt'))
        assert abs(T.tocsr() - small_system.T).max() == 0
        M_T = read_coo(os.path.join(dirname, 'M_T.txt'))
        assert np.allclose(M_T.diagonal(), small_system.measures)
        meta = load_json(os.path.join(dirname, 'coarse.json'))
        assert meta['n'] == 18
        assert meta['layers'] == 1
        assert meta['geometry_hash'] == small_system.geometry.hash
        assert meta['dofs'][16] == {'dof': 16, 'block': 5, 'continuum': 1,
                                    'fracture': 0, 'piece': 0}

    def test_trajectory(self, tmp_path, small_system, two_wells):
        states, _ = solve_coarse(small_system, two_wells, n_steps=2)
        path = str(tmp_path / 'coarse.csv')
        write_coarse_trajectory(path, states)
        header, data = read_csv(path)
        assert header[:2] == ['u0', 'u1']
        assert np.array_equal(data, states)
