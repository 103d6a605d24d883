"""Coarse grid, fracture conforming fine triangulation and continuum numbering

The fine mesh is a structured grid of square cells, each split into two
right triangles. Fractures are axis aligned segments lying on fine grid
lines, so every fracture is covered exactly by a chain of fine edges.

Numbering conventions (all 0-based):
  - vertex (i, j) -> j * (NX + 1) + i
  - cell (i, j) -> triangles 2 * (j * NX + i) and 2 * (j * NX + i) + 1
  - block (row, col) -> row * nx + col
  - coarse DOFs: per block, the matrix continuum first, then one continuum
    per fracture piece ordered by fracture id.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidGeometry, DimensionMismatch
from .storage import JSONCodec, get_md5, dump_json, load_json


# distance (domain units) within which a fracture end snaps to a grid line
GRID_TOL = 1e-10


@dataclass(frozen=True)
class Fracture:
    """straight axis aligned fracture segment"""
    x0: float
    y0: float
    x1: float
    y1: float
    aperture: float = 0.01
    permeability: float = 1000.0

    @property
    def length(self):
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def horizontal(self):
        return abs(self.y1 - self.y0) <= GRID_TOL

    @property
    def vertical(self):
        return abs(self.x1 - self.x0) <= GRID_TOL

    def to_dict(self):
        return {'x0': self.x0, 'y0': self.y0, 'x1': self.x1, 'y1': self.y1,
                'aperture': self.aperture,
                'permeability': self.permeability}


@dataclass(frozen=True)
class FractureNetwork:
    """immutable sequence of fractures, the list position is the fracture id"""
    fractures: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'fractures', tuple(self.fractures))
        for idx, frac in enumerate(self.fractures):
            if not frac.aperture > 0:
                raise InvalidGeometry(
                    f'fracture {idx}: aperture must be positive, '
                    f'got {frac.aperture!r}')
            if not frac.permeability > 0:
                raise InvalidGeometry(
                    f'fracture {idx}: permeability must be positive, '
                    f'got {frac.permeability!r}')

    def __len__(self):
        return len(self.fractures)

    def __iter__(self):
        return iter(self.fractures)

    def __getitem__(self, idx):
        return self.fractures[idx]

    @classmethod
    def from_dicts(cls, items):
        try:
            return cls(tuple(Fracture(**item) for item in items))
        except TypeError as error:
            raise InvalidGeometry(f'invalid fracture entry: {error}')

    def to_dicts(self):
        return [frac.to_dict() for frac in self.fractures]

    def with_permeability(self, permeability, segments=None):
        """copy of network with fracture permeability replaced

        :param segments: fracture ids to change, all if None
        """
        ids = range(len(self)) if segments is None else set(segments)
        fracs = []
        for idx, frac in enumerate(self.fractures):
            if idx in ids:
                frac = Fracture(frac.x0, frac.y0, frac.x1, frac.y1,
                                frac.aperture, permeability)
            fracs.append(frac)
        return FractureNetwork(tuple(fracs))


def shift_fracture(network, segment, offset, block_size, axis='y',
                   domain=(1.0, 1.0)):
    """translate one fracture by `offset` coarse blocks

    :param axis: 'y' moves the fracture up/down, 'x' left/right
    :param domain: (width, height) the shifted fracture must stay inside
    """
    if not 0 <= segment < len(network):
        raise InvalidGeometry(f'fracture {segment} does not exist '
                              f'(network has {len(network)})')
    if axis not in ('x', 'y'):
        raise InvalidGeometry(f"shift axis must be 'x' or 'y', got {axis!r}")
    if offset == 0:
        return network
    frac = network[segment]
    delta = offset * block_size
    if axis == 'y':
        moved = Fracture(frac.x0, frac.y0 + delta, frac.x1, frac.y1 + delta,
                         frac.aperture, frac.permeability)
        low, high, limit = min(moved.y0, moved.y1), max(moved.y0, moved.y1), domain[1]
    else:
        moved = Fracture(frac.x0 + delta, frac.y0, frac.x1 + delta, frac.y1,
                         frac.aperture, frac.permeability)
        low, high, limit = min(moved.x0, moved.x1), max(moved.x0, moved.x1), domain[0]
    if low < -GRID_TOL or high > limit + GRID_TOL:
        raise InvalidGeometry(
            f'fracture {segment} shifted by {offset} block(s) along {axis} '
            f'leaves the domain')
    fracs = list(network.fractures)
    fracs[segment] = moved
    return FractureNetwork(tuple(fracs))


def default_network(shift=0, permeability=1000.0, aperture=0.01):
    """fracture network used by the bundled experiments on the unit square

    Fracture 0 is the horizontal fracture that the observation geometry
    moves by one block (`shift=1`).
    """
    network = FractureNetwork((
        Fracture(0.1, 0.45, 0.9, 0.45, aperture, permeability),
        Fracture(0.25, 0.15, 0.25, 0.75, aperture, permeability),
        Fracture(0.75, 0.25, 0.75, 0.85, aperture, permeability),
    ))
    return shift_fracture(network, 0, shift, 0.1)


@dataclass(frozen=True)
class CoarseGrid:
    nx: int
    ny: int
    H: float
    width: float = 1.0
    height: float = 1.0

    @property
    def n_blocks(self):
        return self.nx * self.ny

    def row_col(self, block):
        return divmod(block, self.nx)

    def chebyshev(self, block_a, block_b):
        """grid distance (in blocks) between two blocks, arrays accepted"""
        row_a, col_a = np.divmod(block_a, self.nx)
        row_b, col_b = np.divmod(block_b, self.nx)
        return np.maximum(np.abs(row_a - row_b), np.abs(col_a - col_b))

    def block_centers(self):
        rows, cols = np.divmod(np.arange(self.n_blocks), self.nx)
        return np.column_stack(((cols + 0.5) * self.H, (rows + 0.5) * self.H))

    def locate(self, points):
        """block id containing each point (points on block lines go up/right)"""
        points = np.atleast_2d(points)
        cols = np.clip(np.floor(points[:, 0] / self.H), 0, self.nx - 1)
        rows = np.clip(np.floor(points[:, 1] / self.H), 0, self.ny - 1)
        return (rows * self.nx + cols).astype(np.int64)


@dataclass(frozen=True, eq=False)
class FineMesh:
    s: int
    h: float
    NX: int
    NY: int
    vertices: np.ndarray       # (n_vertices, 2)
    triangles: np.ndarray      # (n_triangles, 3) vertex ids
    triangle_block: np.ndarray
    kappa_m: np.ndarray        # per triangle
    edges: np.ndarray          # (n_edges, 2) fracture edges, vertex ids
    edge_segment: np.ndarray
    edge_block: np.ndarray
    aperture: np.ndarray       # per fracture edge
    permeability: np.ndarray   # per fracture edge

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def areas(self):
        pts = self.vertices[self.triangles]
        d1 = pts[:, 1] - pts[:, 0]
        d2 = pts[:, 2] - pts[:, 0]
        return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def edge_lengths(self):
        delta = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(delta[:, 0], delta[:, 1])

    def edge_midpoints(self):
        return 0.5 * (self.vertices[self.edges[:, 0]] +
                      self.vertices[self.edges[:, 1]])


@dataclass(frozen=True, eq=False)
class ContinuumIndex:
    matrix_dof: np.ndarray     # per block
    fracture_dofs: tuple       # per block, tuple of DOF ids
    dof_block: np.ndarray      # home block of each DOF
    dof_segment: np.ndarray    # fracture id of each DOF, -1 for matrix
    dof_local: np.ndarray      # 0 for matrix, k for the k-th piece of a block
    dof_piece: np.ndarray      # order along its fracture, -1 for matrix
    edge_dof: np.ndarray       # per fracture edge
    measures: np.ndarray       # |K_i| or d * |f ∩ K_i|

    @property
    def n(self):
        return len(self.dof_block)

    def block_dofs(self, block):
        return (int(self.matrix_dof[block]),) + self.fracture_dofs[block]

    def n_pieces(self, block):
        """L_i"""
        return len(self.fracture_dofs[block])

    def is_fracture(self):
        return self.dof_segment >= 0

    def to_dict(self):
        return {'n': self.n,
                'dofs': [{'dof': p, 'block': int(self.dof_block[p]),
                          'continuum': int(self.dof_local[p]),
                          'fracture': int(self.dof_segment[p]),
                          'piece': int(self.dof_piece[p])}
                         for p in range(self.n)]}


@dataclass(frozen=True, eq=False)
class FracturedGeometry:
    grid: CoarseGrid
    mesh: FineMesh
    index: ContinuumIndex
    network: FractureNetwork
    kappa_m: float = 1.0

    @property
    def n(self):
        return self.index.n

    def spec(self):
        """plain dict, the content of a geometry file"""
        return {
            'domain': {'width': self.grid.width, 'height': self.grid.height},
            'nx': self.grid.nx, 'ny': self.grid.ny, 's': self.mesh.s,
            'matrix_permeability': self.kappa_m,
            'fractures': self.network.to_dicts(),
        }

    @property
    def hash(self):
        return geometry_hash(self.spec())


@dataclass(frozen=True, eq=False)
class OversampleRegion:
    center: int
    layers: int
    blocks: np.ndarray         # member block ids, sorted
    rows: tuple                # (first, last) block row
    cols: tuple                # (first, last) block column
    nodes: np.ndarray          # fine vertex ids inside the closed rectangle
    elements: np.ndarray       # triangle ids inside member blocks
    edges: np.ndarray          # fracture edge ids inside member blocks
    interior_boundary: np.ndarray  # nodes on the rectangle side inside D
    domain_boundary: np.ndarray    # nodes of the rectangle lying on ∂D

    def dirichlet_nodes(self, clamp_domain_boundary=False):
        if clamp_domain_boundary:
            return np.union1d(self.interior_boundary, self.domain_boundary)
        return self.interior_boundary

    def free_nodes(self, clamp_domain_boundary=False):
        return np.setdiff1d(self.nodes,
                            self.dirichlet_nodes(clamp_domain_boundary),
                            assume_unique=True)


def _on_line(value, h):
    """grid line index of `value` or None if not on a fine grid line"""
    idx = round(value / h)
    if abs(idx * h - value) > GRID_TOL:
        return None
    return int(idx)


def _fracture_edges(seg_id, frac, grid, s, h, NX, NY):
    """fine edges covering one fracture: (vertex pairs, block ids)"""
    x_lo, x_hi = sorted((frac.x0, frac.x1))
    y_lo, y_hi = sorted((frac.y0, frac.y1))
    if (x_lo < -GRID_TOL or y_lo < -GRID_TOL or
            x_hi > grid.width + GRID_TOL or y_hi > grid.height + GRID_TOL):
        raise InvalidGeometry(
            f'fracture {seg_id} ({frac.x0}, {frac.y0})-({frac.x1}, {frac.y1}) '
            f'is outside the domain')
    if frac.length <= GRID_TOL:
        raise InvalidGeometry(f'fracture {seg_id} has zero length')
    if not (frac.horizontal or frac.vertical):
        raise InvalidGeometry(
            f'fracture {seg_id} ({frac.x0}, {frac.y0})-({frac.x1}, {frac.y1}) '
            f'is not axis aligned')
    ends = [_on_line(v, h) for v in (x_lo, x_hi, y_lo, y_hi)]
    if any(e is None for e in ends):
        raise InvalidGeometry(
            f'fracture {seg_id} ({frac.x0}, {frac.y0})-({frac.x1}, {frac.y1}) '
            f'is not aligned with fine grid lines (h={h!r})')
    i_lo, i_hi, j_lo, j_hi = ends
    if frac.horizontal:
        i = np.arange(i_lo, i_hi)
        j = j_lo
        start = j * (NX + 1) + i
        pairs = np.column_stack((start, start + 1))
        # on a coarse line the piece belongs to the block below
        row = max(j - 1, 0) // s
        blocks = row * grid.nx + i // s
    else:
        j = np.arange(j_lo, j_hi)
        i = i_lo
        start = j * (NX + 1) + i
        pairs = np.column_stack((start, start + NX + 1))
        # on a coarse line the piece belongs to the block on the left
        col = max(i - 1, 0) // s
        blocks = (j // s) * grid.nx + col
    return pairs, np.asarray(blocks, dtype=np.int64)


def _build_index(grid, mesh):
    n_blocks = grid.n_blocks
    matrix_dof = np.arange(n_blocks, dtype=np.int64)
    dof_block = list(range(n_blocks))
    dof_segment = [-1] * n_blocks
    dof_piece = [-1] * n_blocks
    # edges come fracture by fracture, each walked from its low end, so
    # first sight of a (block, fracture) pair gives the piece order
    piece_dof = {}
    count = {}
    for block, seg in zip(mesh.edge_block.tolist(),
                          mesh.edge_segment.tolist()):
        if (block, seg) in piece_dof:
            continue
        piece_dof[(block, seg)] = len(dof_block)
        dof_block.append(block)
        dof_segment.append(seg)
        dof_piece.append(count.get(seg, 0))
        count[seg] = count.get(seg, 0) + 1

    fracture_dofs = []
    dof_local = np.zeros(len(dof_block), dtype=np.int64)
    by_block = [[] for _ in range(n_blocks)]
    for (block, seg), dof in piece_dof.items():
        by_block[block].append((seg, dof))
    for block in range(n_blocks):
        dofs = tuple(dof for _, dof in sorted(by_block[block]))
        for local, dof in enumerate(dofs, start=1):
            dof_local[dof] = local
        fracture_dofs.append(dofs)

    n = len(dof_block)
    edge_dof = np.array([piece_dof[(b, g)] for b, g in
                         zip(mesh.edge_block.tolist(),
                             mesh.edge_segment.tolist())], dtype=np.int64)
    measures = np.bincount(matrix_dof[mesh.triangle_block],
                           weights=mesh.areas(), minlength=n)
    if mesh.n_edges:
        measures += np.bincount(edge_dof,
                                weights=mesh.aperture * mesh.edge_lengths(),
                                minlength=n)
    return ContinuumIndex(
        matrix_dof=matrix_dof,
        fracture_dofs=tuple(fracture_dofs),
        dof_block=np.array(dof_block, dtype=np.int64),
        dof_segment=np.array(dof_segment, dtype=np.int64),
        dof_local=dof_local,
        dof_piece=np.array(dof_piece, dtype=np.int64),
        edge_dof=edge_dof,
        measures=measures)


def check_layout(sim, obs):
    """raise DimensionMismatch unless DOF p is the same continuum in both

    Matrix DOFs must sit on the same block and fracture DOFs on the same
    piece of the same fracture. Blocks of fracture pieces may differ,
    a translated fracture keeps its DOFs.
    """
    a, b = sim.index, obs.index
    if a.n != b.n:
        raise DimensionMismatch(
            f'simulation geometry has {a.n} continua, '
            f'observation geometry {b.n}')
    bad = np.flatnonzero((a.dof_segment != b.dof_segment) |
                         (a.dof_piece != b.dof_piece) |
                         ((a.dof_segment < 0) &
                          (a.dof_block != b.dof_block)))
    if len(bad):
        p = int(bad[0])
        raise DimensionMismatch(
            f'continuum layouts differ at DOF {p}: fracture '
            f'{a.dof_segment[p]} piece {a.dof_piece[p]} block '
            f'{a.dof_block[p]} against fracture {b.dof_segment[p]} piece '
            f'{b.dof_piece[p]} block {b.dof_block[p]} '
            f'({len(bad)} DOFs differ)')


def build_geometry(nx, ny, s, network=None, width=1.0, height=1.0,
                   kappa_m=1.0):
    """build coarse grid, fine mesh and continuum index

    :param s: fine cells per block side
    :param network: FractureNetwork, no fractures if None
    """
    for name, val in (('nx', nx), ('ny', ny), ('s', s)):
        if int(val) != val or val < 1:
            raise InvalidGeometry(f'{name} must be an integer >= 1, got {val!r}')
    nx, ny, s = int(nx), int(ny), int(s)
    if not kappa_m > 0:
        raise InvalidGeometry(f'matrix permeability must be positive, '
                              f'got {kappa_m!r}')
    H = width / nx
    if abs(height / ny - H) > GRID_TOL:
        raise InvalidGeometry(
            f'coarse blocks must be square: {width}/{nx} != {height}/{ny}')
    network = network if network is not None else FractureNetwork()
    grid = CoarseGrid(nx, ny, H, width, height)

    NX, NY = nx * s, ny * s
    h = H / s
    xs = np.linspace(0.0, width, NX + 1)
    ys = np.linspace(0.0, height, NY + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack((X.ravel(), Y.ravel()))

    ii, jj = np.meshgrid(np.arange(NX, dtype=np.int64),
                         np.arange(NY, dtype=np.int64))
    ii, jj = ii.ravel(), jj.ravel()
    v00 = jj * (NX + 1) + ii
    v10 = v00 + 1
    v01 = v00 + NX + 1
    v11 = v01 + 1
    triangles = np.empty((2 * len(v00), 3), dtype=np.int64)
    triangles[0::2] = np.column_stack((v00, v10, v11))
    triangles[1::2] = np.column_stack((v00, v11, v01))
    triangle_block = np.repeat((jj // s) * nx + ii // s, 2)

    edge_list, seg_list, block_list = [], [], []
    aperture, permeability = [], []
    for seg_id, frac in enumerate(network):
        pairs, blocks = _fracture_edges(seg_id, frac, grid, s, h, NX, NY)
        edge_list.append(pairs)
        block_list.append(blocks)
        seg_list.append(np.full(len(pairs), seg_id, dtype=np.int64))
        aperture.append(np.full(len(pairs), frac.aperture))
        permeability.append(np.full(len(pairs), frac.permeability))

    def _cat(items, dtype, shape=(0,)):
        return np.concatenate(items) if items else np.zeros(shape, dtype=dtype)

    mesh = FineMesh(
        s=s, h=h, NX=NX, NY=NY,
        vertices=vertices,
        triangles=triangles,
        triangle_block=triangle_block,
        kappa_m=np.full(len(triangles), float(kappa_m)),
        edges=_cat(edge_list, np.int64, (0, 2)),
        edge_segment=_cat(seg_list, np.int64),
        edge_block=_cat(block_list, np.int64),
        aperture=_cat(aperture, float),
        permeability=_cat(permeability, float))
    index = _build_index(grid, mesh)
    return FracturedGeometry(grid, mesh, index, network, float(kappa_m))


def oversample(geometry, block, layers):
    """region made of all blocks within `layers` grid layers of `block`"""
    grid, mesh = geometry.grid, geometry.mesh
    if int(block) != block or not 0 <= block < grid.n_blocks:
        raise InvalidGeometry(f'block {block!r} is not in the coarse grid '
                              f'({grid.n_blocks} blocks)')
    if int(layers) != layers or layers < 0:
        raise InvalidGeometry(f'oversampling layers must be an integer >= 0, '
                              f'got {layers!r}')
    block, layers = int(block), int(layers)
    row, col = grid.row_col(block)
    r0, r1 = max(row - layers, 0), min(row + layers, grid.ny - 1)
    c0, c1 = max(col - layers, 0), min(col + layers, grid.nx - 1)
    rr, cc = np.meshgrid(np.arange(r0, r1 + 1), np.arange(c0, c1 + 1),
                         indexing='ij')
    blocks = np.sort((rr * grid.nx + cc).ravel()).astype(np.int64)

    s = mesh.s
    i_lo, i_hi = c0 * s, (c1 + 1) * s
    j_lo, j_hi = r0 * s, (r1 + 1) * s
    ii, jj = np.meshgrid(np.arange(i_lo, i_hi + 1), np.arange(j_lo, j_hi + 1))
    ii, jj = ii.ravel(), jj.ravel()
    nodes = (jj * (mesh.NX + 1) + ii).astype(np.int64)
    inner = (((ii == i_lo) & (i_lo > 0)) | ((ii == i_hi) & (i_hi < mesh.NX)) |
             ((jj == j_lo) & (j_lo > 0)) | ((jj == j_hi) & (j_hi < mesh.NY)))
    outer = (ii == 0) | (ii == mesh.NX) | (jj == 0) | (jj == mesh.NY)

    return OversampleRegion(
        center=block, layers=layers, blocks=blocks,
        rows=(r0, r1), cols=(c0, c1), nodes=nodes,
        elements=np.flatnonzero(np.isin(mesh.triangle_block, blocks)),
        edges=np.flatnonzero(np.isin(mesh.edge_block, blocks)),
        interior_boundary=np.sort(nodes[inner]),
        domain_boundary=np.sort(nodes[outer & ~inner]))


def geometry_hash(spec):
    """md5 of the canonical JSON form of a geometry spec"""
    return get_md5(JSONCodec(indent=None).encode(spec))


def geometry_from_spec(spec):
    try:
        domain = spec.get('domain', {})
        return build_geometry(
            spec['nx'], spec['ny'], spec['s'],
            FractureNetwork.from_dicts(spec.get('fractures', [])),
            width=domain.get('width', 1.0), height=domain.get('height', 1.0),
            kappa_m=spec.get('matrix_permeability', 1.0))
    except KeyError as error:
        raise InvalidGeometry(f'geometry spec is missing {error}')


def dump_geometry(geometry, path):
    dump_json(path, geometry.spec())


def load_geometry(path):
    return geometry_from_spec(load_json(path))
