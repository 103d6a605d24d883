"""Fine scale P1 finite element system and backward Euler stepping

Matrix cells use P1 triangles, fractures add 1-D P1 elements on fine edges
(aperture * permeability * mobility). Mass is lumped. Mobility and source
are sampled at element/edge midpoints and at the new time level.
"""

import os

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .exceptions import SolverError, InvalidField, DimensionMismatch
from .storage import dump_json, write_csv


# accepted residual of a direct solve, relative to the right-hand side norm
RESIDUAL_TOL = 1e-10


def _gradient_terms(pts):
    """b, c coefficients of the P1 shape function gradients and the area

    :param pts: (n_triangles, 3, 2)
    """
    x, y = pts[..., 0], pts[..., 1]
    b = np.stack((y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]),
                 axis=1)
    c = np.stack((x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]),
                 axis=1)
    area = 0.5 * np.abs((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) -
                        (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    return b, c, area


def local_stiffness(points, coef=1.0):
    """3x3 stiffness of one triangle, `coef` is kappa * mobility"""
    b, c, area = _gradient_terms(np.asarray(points, dtype=float)[None])
    return (coef * (np.outer(b[0], b[0]) + np.outer(c[0], c[0])) /
            (4.0 * area[0]))


def local_edge_stiffness(length, aperture, permeability, mobility=1.0):
    """2x2 stiffness of one fracture edge"""
    coef = aperture * permeability * mobility / length
    return coef * np.array([[1.0, -1.0], [-1.0, 1.0]])


def sample_field(field, t, points, what='mobility'):
    """evaluate `field(t, points)` and check values are finite and positive"""
    values = np.broadcast_to(
        np.asarray(field(t, points), dtype=float), (len(points),))
    bad = ~np.isfinite(values) | (values <= 0)
    if np.any(bad):
        pos = points[np.argmax(bad)]
        raise InvalidField(
            f'{what} must be positive, got {values[bad][0]!r} '
            f'at t={t!r}, x=({pos[0]!r}, {pos[1]!r})')
    return values


def assemble_stiffness(geometry, mobility, t):
    """global stiffness matrix A_f(t) (CSR, exactly symmetric)"""
    mesh = geometry.mesh
    tri = mesh.triangles
    n_tri = len(tri)
    b, c, area = _gradient_terms(mesh.vertices[tri])
    coef = mesh.kappa_m * sample_field(mobility, t, mesh.centroids())
    local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :])
    local *= (coef / (4.0 * area))[:, None, None]
    rows = np.broadcast_to(tri[:, :, None], (n_tri, 3, 3)).ravel()
    cols = np.broadcast_to(tri[:, None, :], (n_tri, 3, 3)).ravel()
    data = local.ravel()

    if mesh.n_edges:
        lam = sample_field(mobility, t, mesh.edge_midpoints())
        ce = mesh.aperture * mesh.permeability * lam / mesh.edge_lengths()
        va, vb = mesh.edges[:, 0], mesh.edges[:, 1]
        rows = np.concatenate((rows, va, va, vb, vb))
        cols = np.concatenate((cols, va, vb, va, vb))
        data = np.concatenate((data, ce, -ce, -ce, ce))

    n_v = mesh.n_vertices
    A = sparse.coo_matrix((data, (rows, cols)), shape=(n_v, n_v)).tocsr()
    return ((A + A.T) * 0.5).tocsr()


def lumped_mass(geometry):
    """diagonal of the lumped mass matrix"""
    mesh = geometry.mesh
    n_v = mesh.n_vertices
    diag = np.bincount(mesh.triangles.ravel(),
                       weights=np.repeat(mesh.areas() / 3.0, 3),
                       minlength=n_v)
    if mesh.n_edges:
        line = mesh.aperture * mesh.edge_lengths() / 2.0
        diag += np.bincount(mesh.edges.ravel(), weights=np.repeat(line, 2),
                            minlength=n_v)
    return diag


def assemble_mass(geometry):
    return sparse.diags(lumped_mass(geometry)).tocsr()


def assemble_load(geometry, source, step, t):
    """fine load vector b_f for source parameters of `step` at time `t`"""
    mesh = geometry.mesh
    n_v = mesh.n_vertices
    if source is None:
        return np.zeros(n_v)
    vals = np.asarray(source(step, t, mesh.centroids()), dtype=float)
    load = np.bincount(mesh.triangles.ravel(),
                       weights=np.repeat(mesh.areas() * vals / 3.0, 3),
                       minlength=n_v)
    if source.on_fractures and mesh.n_edges:
        g_e = np.asarray(source(step, t, mesh.edge_midpoints()), dtype=float)
        line = mesh.aperture * mesh.edge_lengths() * g_e / 2.0
        load += np.bincount(mesh.edges.ravel(), weights=np.repeat(line, 2),
                            minlength=n_v)
    return load


def averaging_matrix(geometry):
    """sparse R (n x n_vertices) with R @ u_f = continuum averages of u_f

    Uses the lumped quadrature, exact for P1 functions.
    """
    mesh, index = geometry.mesh, geometry.index
    rows = [np.repeat(index.matrix_dof[mesh.triangle_block], 3)]
    cols = [mesh.triangles.ravel()]
    data = [np.repeat(mesh.areas() / 3.0, 3)]
    if mesh.n_edges:
        rows.append(np.repeat(index.edge_dof, 2))
        cols.append(mesh.edges.ravel())
        data.append(np.repeat(mesh.aperture * mesh.edge_lengths() / 2.0, 2))
    R = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(index.n, mesh.n_vertices)).tocsr()
    return (sparse.diags(1.0 / index.measures) @ R).tocsr()


def continuum_averages(geometry, u_fine):
    u_fine = np.asarray(u_fine, dtype=float)
    if u_fine.shape[-1] != geometry.mesh.n_vertices:
        raise DimensionMismatch(
            f'fine state has {u_fine.shape[-1]} entries, mesh has '
            f'{geometry.mesh.n_vertices} vertices')
    return (averaging_matrix(geometry) @ u_fine.T).T


def factorize(matrix, what='system'):
    """sparse LU with fill reducing ordering"""
    try:
        return splu(sparse.csc_matrix(matrix))
    except RuntimeError as error:
        raise SolverError(f'{what}: factorization failed ({error})')


def solve_checked(lu, matrix, rhs, what='system'):
    """solve with a factorization, refine once, check relative residual"""
    u = lu.solve(rhs)
    scale = np.linalg.norm(rhs)
    residual = np.linalg.norm(matrix @ u - rhs)
    if residual > RESIDUAL_TOL * scale:
        u = u + lu.solve(rhs - matrix @ u)
        residual = np.linalg.norm(matrix @ u - rhs)
    if not np.isfinite(residual) or residual > RESIDUAL_TOL * scale:
        raise SolverError(
            f'{what}: relative residual {residual / scale:.3e} above '
            f'{RESIDUAL_TOL:.0e}')
    return u


class FineSystem(object):
    """fine operators of one problem (geometry + mobility + source)

    Time level n is at t^n = (n - 1) * dt, step n produces u^{n+1}.
    The factorization of M_f + dt A_f is built once when the mobility does
    not depend on time.
    """

    def __init__(self, geometry, mobility, source=None, dt=0.001):
        if not dt > 0:
            raise SolverError(f'time step must be positive, got {dt!r}')
        self.geometry = geometry
        self.mobility = mobility
        self.source = source
        self.dt = dt
        self.mass = assemble_mass(geometry)
        self.static = not getattr(mobility, 'time_dependent', True)
        self._cached = None   # (matrix, lu) for static mobility

    def time(self, n):
        return (n - 1) * self.dt

    def stiffness(self, n):
        """A_f at t^{n+1}"""
        return assemble_stiffness(self.geometry, self.mobility,
                                  self.time(n + 1))

    def load(self, n):
        return assemble_load(self.geometry, self.source, n, self.time(n + 1))

    def factor(self, n):
        """(M_f + dt A_f^{n+1}, LU)"""
        if self.static and self._cached is not None:
            return self._cached
        matrix = (self.mass + self.dt * self.stiffness(n)).tocsr()
        result = (matrix, factorize(matrix, 'fine system'))
        if self.static:
            self._cached = result
        return result


def step_fine(system, u, n):
    """advance u^n to u^{n+1}"""
    u = np.asarray(u, dtype=float)
    if u.shape != (system.geometry.mesh.n_vertices,):
        raise DimensionMismatch(
            f'fine state has shape {u.shape}, expected '
            f'({system.geometry.mesh.n_vertices},)')
    matrix, lu = system.factor(n)
    rhs = system.dt * system.load(n) + system.mass @ u
    return solve_checked(lu, matrix, rhs, f'fine step {n}')


def solve_fine(geometry, mobility, source, u1=None, n_steps=10, dt=0.001):
    """@return list of fine states u^1 .. u^{n_steps+1}"""
    if n_steps < 1:
        raise SolverError(f'n_steps must be >= 1, got {n_steps!r}')
    system = FineSystem(geometry, mobility, source, dt)
    u = np.zeros(geometry.mesh.n_vertices) if u1 is None else np.array(u1, float)
    states = [u]
    for n in range(1, n_steps + 1):
        u = step_fine(system, u, n)
        states.append(u)
    return states


def dump_fine_trajectory(dirname, states, geometry, dt, source=None,
                         fmt='npy'):
    """nodal values per step (rows = time levels) plus a JSON sidecar"""
    os.makedirs(dirname, exist_ok=True)
    data = np.vstack(states)
    if fmt == 'npy':
        np.save(os.path.join(dirname, 'states.npy'), data)
    elif fmt == 'csv':
        header = ['v%d' % i for i in range(data.shape[1])]
        write_csv(os.path.join(dirname, 'states.csv'), data, header)
    else:
        raise ValueError(f'unknown trajectory format {fmt!r}')
    dump_json(os.path.join(dirname, 'trajectory.json'), {
        'dt': dt,
        'n_steps': len(states) - 1,
        'geometry_hash': geometry.hash,
        'format': fmt,
        'source': source.params() if source is not None else None,
    })
