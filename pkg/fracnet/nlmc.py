"""Non-local multi-continuum upscaling

Basis functions are local energy minimizers on oversampled regions subject
to continuum average constraints. Coarse unknowns are continuum averages,
so the coarse mass is the diagonal of continuum measures and the coarse
load is the integral of the source over each continuum.
"""

import os
import functools
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .exceptions import (SnapshotMismatch, SolverError, InvalidGeometry,
                         DimensionMismatch)
from .mesh import oversample
from .fine_solver import (assemble_stiffness, averaging_matrix, factorize,
                          solve_checked, solve_fine, continuum_averages)
from .runner import Runner
from .storage import write_coo, write_csv, dump_json


# max |C psi - e| accepted for a basis function
CONSTRAINT_TOL = 1e-9


def mobility_key(mobility):
    """hashable description of a mobility field"""
    return getattr(mobility, 'key', repr(mobility))


@dataclass(frozen=True, eq=False)
class Snapshot:
    """fine stiffness of a geometry for one mobility field at time t"""
    geometry_hash: str
    mobility_key: tuple
    t: float
    stiffness: sparse.csr_matrix


def take_snapshot(geometry, mobility, t=0.0):
    return Snapshot(geometry.hash, mobility_key(mobility), t,
                    assemble_stiffness(geometry, mobility, t))


@dataclass(frozen=True, eq=False)
class LocalBasis:
    """basis functions of all continua of one block"""
    region: object          # OversampleRegion
    dofs: tuple             # target DOFs (continua of the center block)
    nodes: np.ndarray       # free fine nodes of the region
    values: np.ndarray      # (len(nodes), len(dofs))
    constraint_dofs: tuple  # DOFs whose averages were constrained
    multipliers: np.ndarray  # (len(constraint_dofs), len(dofs))
    residual: float         # max constraint violation


def build_basis(geometry, region, snapshot, clamp_domain_boundary=False,
                averages=None):
    """solve the constrained minimization for each continuum of the region
    center block

    :param averages: averaging matrix, computed if not given
    """
    index = geometry.index
    R = averages if averages is not None else averaging_matrix(geometry)
    free = region.free_nodes(clamp_domain_boundary)
    targets = index.block_dofs(region.center)

    cons = np.array([d for b in region.blocks for d in index.block_dofs(b)],
                    dtype=np.int64)
    C = R[cons][:, free].tocsr()
    # continua lying only on clamped nodes carry no constraint
    empty = np.asarray(abs(C).sum(axis=1)).ravel() == 0
    for dof in targets:
        if empty[np.flatnonzero(cons == dof)[0]]:
            raise InvalidGeometry(
                f'continuum {dof} of block {region.center} has no free node '
                f'in its oversampling region (layers={region.layers})')
    cons = cons[~empty]
    C = C[~empty]

    rank = np.linalg.matrix_rank(C.toarray())
    if rank < len(cons):
        raise InvalidGeometry(
            f'oversampling region of block {region.center} '
            f'(layers={region.layers}) has rank deficient constraints: '
            f'rank {rank} < {len(cons)} continua')

    A = snapshot.stiffness[free][:, free]
    # balance the saddle point blocks before factorization
    sigma = abs(A).max() / abs(C).max()
    kkt = sparse.bmat([[A, sigma * C.T], [sigma * C, None]], format='csc')
    lu = factorize(kkt, f'basis of block {region.center}')

    n_free, n_cons = len(free), len(cons)
    position = {int(d): k for k, d in enumerate(cons)}
    values = np.empty((n_free, len(targets)))
    mults = np.empty((n_cons, len(targets)))
    target = np.zeros((n_cons, len(targets)))
    for col, dof in enumerate(targets):
        rhs = np.zeros(n_free + n_cons)
        rhs[n_free + position[dof]] = sigma
        target[position[dof], col] = 1.0
        sol = lu.solve(rhs)
        sol = sol + lu.solve(rhs - kkt @ sol)
        values[:, col] = sol[:n_free]
        mults[:, col] = sigma * sol[n_free:]

    residual = float(np.max(np.abs(C @ values - target)))
    if not residual <= CONSTRAINT_TOL:
        raise SolverError(
            f'basis of block {region.center}: constraint residual '
            f'{residual:.3e} above {CONSTRAINT_TOL:.0e}')
    return LocalBasis(region, tuple(targets), free, values,
                      tuple(int(d) for d in cons), mults, residual)


def _block_basis(geometry, snapshot, layers, clamp, averages, block):
    region = oversample(geometry, block, layers)
    return build_basis(geometry, region, snapshot, clamp, averages)


@dataclass(frozen=True, eq=False)
class BasisSet:
    geometry_hash: str
    mobility_key: tuple
    t: float
    layers: int
    clamp_domain_boundary: bool
    psi: sparse.csc_matrix     # (n_vertices, n)
    snapshot: Snapshot
    multipliers: dict          # DOF -> multipliers of its local problem
    residual: float            # worst constraint violation

    @property
    def n(self):
        return self.psi.shape[1]


def build_basis_set(geometry, mobility, layers=2, t=0.0,
                    clamp_domain_boundary=False, runner=None):
    """basis functions of every continuum, built against one snapshot"""
    snapshot = take_snapshot(geometry, mobility, t)
    averages = averaging_matrix(geometry)
    job = functools.partial(_block_basis, geometry, snapshot, layers,
                            clamp_domain_boundary, averages)
    runner = runner if runner is not None else Runner()
    local_list = runner.map(job, range(geometry.grid.n_blocks))

    rows, cols, data = [], [], []
    multipliers = {}
    for local in local_list:
        for col, dof in enumerate(local.dofs):
            rows.append(local.nodes)
            cols.append(np.full(len(local.nodes), dof, dtype=np.int64))
            data.append(local.values[:, col])
            multipliers[dof] = local.multipliers[:, col]
    psi = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(geometry.mesh.n_vertices, geometry.n)).tocsc()
    return BasisSet(geometry.hash, snapshot.mobility_key, t, layers,
                    clamp_domain_boundary, psi, snapshot, multipliers,
                    max(local.residual for local in local_list))


def assemble_transmissibility(geometry, basis, mobility=None, t=None):
    """transmissibility T (off diagonal Galerkin entries) and A_T

    A_T has the entries of T off the diagonal and minus the row sums of T
    on the diagonal. With `t` different from the snapshot time the fine
    stiffness is reassembled at `t` and the frozen basis is reused.
    """
    if basis.geometry_hash != geometry.hash:
        raise SnapshotMismatch(
            f'basis built for geometry {basis.geometry_hash}, '
            f'got geometry {geometry.hash}')
    if mobility is not None and mobility_key(mobility) != basis.mobility_key:
        raise SnapshotMismatch(
            f'basis built for mobility {basis.mobility_key!r}, '
            f'got {mobility_key(mobility)!r}')
    if t is None or t == basis.t:
        stiffness = basis.snapshot.stiffness
    else:
        if mobility is None:
            raise SnapshotMismatch(
                'mobility is required to reassemble at t=%r' % t)
        stiffness = assemble_stiffness(geometry, mobility, t)

    psi = basis.psi
    G = (psi.T @ (stiffness @ psi)).tocsr()
    G = ((G + G.T) * 0.5).tocsr()
    T = (G - sparse.diags(G.diagonal())).tocsr()
    T.eliminate_zeros()
    row_sum = np.asarray(T.sum(axis=1)).ravel()
    A_T = (T - sparse.diags(row_sum)).tocsr()
    return T, A_T


def assemble_coarse_mass_and_load(geometry, source, t, step=1):
    """M_T (diagonal of continuum measures) and b_T at time t

    The load integrates the source by midpoint quadrature over the fine
    cells (and fracture edges, for sources acting on fractures) of each
    continuum.
    """
    mesh, index = geometry.mesh, geometry.index
    M_T = sparse.diags(index.measures).tocsr()
    if source is None:
        return M_T, np.zeros(index.n)
    vals = np.asarray(source(step, t, mesh.centroids()), dtype=float)
    b_T = np.bincount(index.matrix_dof[mesh.triangle_block],
                      weights=mesh.areas() * vals, minlength=index.n)
    if source.on_fractures and mesh.n_edges:
        g_e = np.asarray(source(step, t, mesh.edge_midpoints()), dtype=float)
        b_T += np.bincount(index.edge_dof,
                           weights=mesh.aperture * mesh.edge_lengths() * g_e,
                           minlength=index.n)
    return M_T, b_T


class CoarseSystem(object):
    """upscaled operators of one geometry with one mobility field

    A_T is rebuilt at every new time level for time dependent mobility
    (frozen basis). Factorizations are cached by step and shared by all
    sources stepped with this system.
    """

    def __init__(self, geometry, basis, mobility, dt=0.001):
        if not dt > 0:
            raise SolverError(f'time step must be positive, got {dt!r}')
        self.geometry = geometry
        self.basis = basis
        self.mobility = mobility
        self.dt = dt
        self.T, self.A_T = assemble_transmissibility(geometry, basis, mobility)
        self.measures = geometry.index.measures
        self.M_T = sparse.diags(self.measures).tocsr()
        self.static = not getattr(mobility, 'time_dependent', True)
        self._stiffness = {}
        self._factors = {}

    def __getstate__(self):
        # SuperLU objects can not be pickled, sub-processes rebuild them
        state = self.__dict__.copy()
        state['_factors'] = {}
        return state

    @property
    def n(self):
        return self.geometry.n

    def time(self, n):
        return (n - 1) * self.dt

    def stiffness(self, n):
        """A_T at t^{n+1}"""
        if self.static:
            return self.A_T
        if n not in self._stiffness:
            self._stiffness[n] = assemble_transmissibility(
                self.geometry, self.basis, self.mobility, self.time(n + 1))[1]
        return self._stiffness[n]

    def load(self, source, n):
        """b_T for step n (source parameters of step n at t^{n+1})"""
        return assemble_coarse_mass_and_load(
            self.geometry, source, self.time(n + 1), n)[1]

    def factor(self, n):
        key = 0 if self.static else n
        if key not in self._factors:
            matrix = (self.M_T + self.dt * self.stiffness(n)).tocsr()
            self._factors[key] = (matrix, factorize(matrix, 'coarse system'))
        return self._factors[key]


def coarse_step(system, u, n, source=None, load=None):
    """advance coarse state u^n to u^{n+1}

    :param load: precomputed b_T for this step
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (system.n,):
        raise DimensionMismatch(
            f'coarse state has shape {u.shape}, expected ({system.n},)')
    if load is None:
        load = system.load(source, n)
    matrix, lu = system.factor(n)
    rhs = system.dt * load + system.M_T @ u
    return solve_checked(lu, matrix, rhs, f'coarse step {n}')


def solve_coarse(system, source, u1=None, n_steps=10):
    """@return (states (n_steps+1, n), loads (n_steps, n))"""
    u = np.zeros(system.n) if u1 is None else np.array(u1, dtype=float)
    states = np.empty((n_steps + 1, system.n))
    loads = np.empty((n_steps, system.n))
    states[0] = u
    for n in range(1, n_steps + 1):
        loads[n - 1] = system.load(source, n)
        u = coarse_step(system, u, n, load=loads[n - 1])
        states[n] = u
    return states, loads


def region_of_influence(system, dof, radius):
    """DOFs whose home block is within `radius` blocks of `dof` home block

    :param system: CoarseSystem or FracturedGeometry
    """
    geometry = getattr(system, 'geometry', system)
    if radius < 0:
        raise InvalidGeometry(f'radius must be >= 0, got {radius!r}')
    blocks = geometry.index.dof_block
    dist = geometry.grid.chebyshev(blocks, blocks[dof])
    return np.flatnonzero(dist <= radius)


def upscaling_error(system, source, n_steps=10, u1_fine=None):
    """relative l2 discrepancy (%) between coarse final state and the
    continuum averages of the fine final state"""
    geometry = system.geometry
    fine = solve_fine(geometry, system.mobility, source, u1_fine, n_steps,
                      system.dt)
    u1 = continuum_averages(geometry, fine[0])
    states, _ = solve_coarse(system, source, u1, n_steps)
    ref = continuum_averages(geometry, fine[-1])
    norm = np.linalg.norm(ref)
    if norm == 0:
        return 0.0 if np.linalg.norm(states[-1]) == 0 else float('inf')
    return 100.0 * np.linalg.norm(states[-1] - ref) / norm


def export_coarse_system(system, dirname):
    """T, A_T, M_T as coordinate text files plus coarse.json"""
    os.makedirs(dirname, exist_ok=True)
    write_coo(os.path.join(dirname, 'T.txt'), system.T)
    write_coo(os.path.join(dirname, 'A_T.txt'), system.A_T)
    write_coo(os.path.join(dirname, 'M_T.txt'), system.M_T)
    meta = system.geometry.index.to_dict()
    meta.update({
        'layers': system.basis.layers,
        'geometry_hash': system.geometry.hash,
        'mobility': system.basis.mobility_key,
        'dt': system.dt,
        'measures': system.measures,
    })
    dump_json(os.path.join(dirname, 'coarse.json'), meta)


def write_coarse_trajectory(path, states):
    """CSV, one row per time level, one column per DOF"""
    states = np.atleast_2d(states)
    write_csv(path, states, ['u%d' % p for p in range(states.shape[1])])
