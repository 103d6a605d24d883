"""Sources, mobility model, trajectory datasets and training pairs

A source is a callable `source(step, t, points)` returning g at `points`
with the parameters drawn for time step `step` (1-based). A mobility is a
callable `mobility(t, points)`.
"""

import os
import math
import functools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (InvalidConfig, InvalidField, DatasetMismatch,
                         SolverError, DimensionMismatch)
from .nlmc import solve_coarse
from .runner import Runner
from .storage import dump_json, load_json, write_csv, read_csv


############# mobility

class ConstantMobility(object):
    """time independent mobility, lambda = value everywhere"""
    time_dependent = False

    def __init__(self, value=1.0):
        if not value > 0:
            raise InvalidField(f'mobility must be positive, got {value!r}')
        self.value = float(value)
        self.key = ('constant', self.value)

    def __call__(self, t, points):
        return np.full(len(points), self.value)

    def params(self):
        return {'kind': 'constant', 'value': self.value}


class FrontMobility(object):
    """expanding front: lambda = 1 + clip(1 - |x - c| / (r0 + v t), 0, 1)"""

    def __init__(self, speed, radius, center=(0.05, 0.05)):
        if not speed >= 0:
            raise InvalidField(f'front speed must be >= 0, got {speed!r}')
        if not radius > 0:
            raise InvalidField(f'front radius must be > 0, got {radius!r}')
        self.speed = float(speed)
        self.radius = float(radius)
        self.center = (float(center[0]), float(center[1]))
        self.time_dependent = self.speed > 0
        self.key = ('front', self.speed, self.radius) + self.center

    def __call__(self, t, points):
        points = np.atleast_2d(points)
        dist = np.hypot(points[:, 0] - self.center[0],
                        points[:, 1] - self.center[1])
        front = self.radius + self.speed * t
        return 1.0 + np.clip(1.0 - dist / front, 0.0, 1.0)

    def params(self):
        return {'kind': 'front', 'speed': self.speed, 'radius': self.radius,
                'center': list(self.center)}


def make_mobility(speed, radius, center=(0.05, 0.05)):
    return FrontMobility(speed, radius, center)


def mobility_from_params(params):
    """inverse of `params()` of the mobility classes"""
    params = dict(params)
    kind = params.pop('kind', None)
    try:
        if kind == 'constant':
            return ConstantMobility(**params)
        if kind == 'front':
            return FrontMobility(**params)
    except TypeError as error:
        raise InvalidConfig(f'invalid mobility parameters: {error}')
    raise InvalidConfig(f'unknown mobility kind {kind!r} '
                        f"(choices: 'constant', 'front')")


############# sources

class ZeroSource(object):
    on_fractures = False
    time_dependent = False

    def __call__(self, step, t, points):
        return np.zeros(len(points))

    def params(self):
        return {'kind': 'zero'}


class BlockWellSource(object):
    """+c on the injection block, -c on the production block

    Acts on the matrix continuum only.
    """
    on_fractures = False
    time_dependent = False

    def __init__(self, grid, injection, production, magnitude):
        if injection == production:
            raise InvalidConfig(f'wells must be in distinct blocks, '
                                f'both are in block {injection}')
        self.grid = grid
        self.injection = int(injection)
        self.production = int(production)
        self.magnitude = float(magnitude)

    def __call__(self, step, t, points):
        blocks = self.grid.locate(points)
        values = np.zeros(len(blocks))
        values[blocks == self.injection] = self.magnitude
        values[blocks == self.production] = -self.magnitude
        return values

    def params(self):
        return {'kind': 'block-well', 'injection': self.injection,
                'production': self.production, 'magnitude': self.magnitude}


class CornerWellSource(object):
    """injection square at the lower-left corner, production at the
    upper-right one, rates redrawn at every time step

    g = +-amplitude * (sin(alpha_n x)**2 + sin(beta_n y)**2) on the wells.
    """
    on_fractures = True
    time_dependent = True

    def __init__(self, alphas, betas, amplitude=10.0, size=0.1,
                 width=1.0, height=1.0):
        self.alphas = np.asarray(alphas, dtype=float)
        self.betas = np.asarray(betas, dtype=float)
        if self.alphas.shape != self.betas.shape:
            raise DimensionMismatch(
                f'{len(self.alphas)} alpha values, {len(self.betas)} betas')
        self.amplitude = float(amplitude)
        self.size = float(size)
        self.width = float(width)
        self.height = float(height)

    def __call__(self, step, t, points):
        if not 1 <= step <= len(self.alphas):
            raise InvalidConfig(f'source has rates for steps '
                                f'1..{len(self.alphas)}, got step {step}')
        points = np.atleast_2d(points)
        x, y = points[:, 0], points[:, 1]
        alpha, beta = self.alphas[step - 1], self.betas[step - 1]
        rate = self.amplitude * (np.sin(alpha * x) ** 2 + np.sin(beta * y) ** 2)
        inject = (x <= self.size) & (y <= self.size)
        produce = (x >= self.width - self.size) & (y >= self.height - self.size)
        return np.where(inject, rate, 0.0) - np.where(produce, rate, 0.0)

    def params(self):
        return {'kind': 'corner-well', 'alphas': self.alphas.tolist(),
                'betas': self.betas.tolist(), 'amplitude': self.amplitude,
                'size': self.size}


class SourceSampler(object):
    """base for source samplers, subclasses are registered by `name`"""
    name = None

    @classmethod
    def for_geometry(cls, geometry, n_steps, **options):
        """sampler for an experiment on `geometry` with `n_steps` steps"""
        return cls(**options)

    def sample(self, count, seed):
        raise NotImplementedError()


class TwoWellSampler(SourceSampler):
    """two wells (+c, -c) in distinct uniformly random blocks"""
    name = 'two-well-random-location'

    def __init__(self, grid, magnitude=1.0):
        if grid.n_blocks < 2:
            raise InvalidConfig('two-well sources need at least 2 blocks')
        self.grid = grid
        self.magnitude = magnitude

    @classmethod
    def for_geometry(cls, geometry, n_steps, **options):
        return cls(geometry.grid, **options)

    def sample(self, count, seed):
        rng = np.random.default_rng(seed)
        sources = []
        for _ in range(count):
            inj, prod = rng.choice(self.grid.n_blocks, 2, replace=False)
            sources.append(
                BlockWellSource(self.grid, inj, prod, self.magnitude))
        return sources


class CornerWellSampler(SourceSampler):
    """corner wells with rates drawn uniformly in [0, rate_max] per step"""
    name = 'fixed-location-random-rate'

    def __init__(self, n_steps=10, amplitude=10.0, rate_max=10 * math.pi,
                 size=0.1, width=1.0, height=1.0):
        self.n_steps = n_steps
        self.amplitude = amplitude
        self.rate_max = rate_max
        self.size = size
        self.width = width
        self.height = height

    @classmethod
    def for_geometry(cls, geometry, n_steps, **options):
        return cls(n_steps, width=geometry.grid.width,
                   height=geometry.grid.height, **options)

    def sample(self, count, seed):
        rng = np.random.default_rng(seed)
        sources = []
        for _ in range(count):
            alphas = rng.uniform(0.0, self.rate_max, self.n_steps)
            betas = rng.uniform(0.0, self.rate_max, self.n_steps)
            sources.append(CornerWellSource(
                alphas, betas, self.amplitude, self.size,
                self.width, self.height))
        return sources


SAMPLERS = {cls.name: cls for cls in (TwoWellSampler, CornerWellSampler)}


def get_sampler(name, **kwargs):
    try:
        sampler_cls = SAMPLERS[name]
    except KeyError:
        raise InvalidConfig(f'unknown source sampler {name!r} '
                            f'(choices: {", ".join(sorted(SAMPLERS))})')
    return sampler_cls(**kwargs)


def sample_sources_ex1(count, magnitude, seed, grid):
    if count < 1:
        raise InvalidConfig(f'source count must be >= 1, got {count!r}')
    return TwoWellSampler(grid, magnitude).sample(count, seed)


def sample_sources_ex2(count, seed, n_steps=10, width=1.0, height=1.0):
    if count < 1:
        raise InvalidConfig(f'source count must be >= 1, got {count!r}')
    return CornerWellSampler(n_steps, width=width,
                             height=height).sample(count, seed)


############# trajectories

LABELS = ('simulation', 'observation')


@dataclass(eq=False)
class TrajectoryDataset:
    label: str
    geometry_hash: str
    dt: float
    n_steps: int
    states: np.ndarray       # (m, n_steps + 1, n) u^1 .. u^{n_steps+1}
    loads: np.ndarray        # (m, n_steps, n) b_T of each step
    dof_block: np.ndarray    # home block of each DOF
    dof_segment: np.ndarray  # fracture id of each DOF, -1 for matrix
    sources: list = field(default_factory=list)   # source parameters
    meta: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.states.shape[0]

    @property
    def n(self):
        return self.states.shape[2]


def _simulate(system, n_steps, u1, item):
    idx, source = item
    try:
        return solve_coarse(system, source, u1, n_steps)
    except SolverError as error:
        raise SolverError(f'sample {idx} ({source.params()}): {error}')


def generate_dataset(system, sources, label, n_steps=10, u1=None,
                     runner=None, meta=None):
    """run the coarse model for every source

    :param system: nlmc.CoarseSystem of the labelled geometry
    :param u1: initial coarse state, zero if None
    """
    if label not in LABELS:
        raise InvalidConfig(f'dataset label must be one of {LABELS}, '
                            f'got {label!r}')
    if not sources:
        raise InvalidConfig('no sources to simulate')
    runner = runner if runner is not None else Runner()
    job = functools.partial(_simulate, system, n_steps, u1)
    results = runner.map(job, list(enumerate(sources)))
    return TrajectoryDataset(
        label=label,
        geometry_hash=system.geometry.hash,
        dt=system.dt,
        n_steps=n_steps,
        states=np.stack([states for states, _ in results]),
        loads=np.stack([loads for _, loads in results]),
        dof_block=system.geometry.index.dof_block.copy(),
        dof_segment=system.geometry.index.dof_segment.copy(),
        sources=[source.params() for source in sources],
        meta=dict(meta or {}))


def save_dataset(dataset, dirname):
    """metadata.json + states.npy + loads.npy + DOF layout"""
    os.makedirs(dirname, exist_ok=True)
    np.save(os.path.join(dirname, 'states.npy'), dataset.states)
    np.save(os.path.join(dirname, 'loads.npy'), dataset.loads)
    np.save(os.path.join(dirname, 'dof_block.npy'), dataset.dof_block)
    np.save(os.path.join(dirname, 'dof_segment.npy'), dataset.dof_segment)
    dump_json(os.path.join(dirname, 'metadata.json'), {
        'label': dataset.label,
        'geometry_hash': dataset.geometry_hash,
        'dt': dataset.dt,
        'n_steps': dataset.n_steps,
        'n': dataset.n,
        'm': dataset.m,
        'sources': dataset.sources,
        'meta': dataset.meta,
    })


def load_dataset(dirname):
    meta = load_json(os.path.join(dirname, 'metadata.json'))
    states = np.load(os.path.join(dirname, 'states.npy'))
    loads = np.load(os.path.join(dirname, 'loads.npy'))
    if states.shape != (meta['m'], meta['n_steps'] + 1, meta['n']):
        raise DatasetMismatch(
            f'{dirname}: states have shape {states.shape}, metadata says '
            f'({meta["m"]}, {meta["n_steps"] + 1}, {meta["n"]})')
    return TrajectoryDataset(
        label=meta['label'], geometry_hash=meta['geometry_hash'],
        dt=meta['dt'], n_steps=meta['n_steps'], states=states, loads=loads,
        dof_block=np.load(os.path.join(dirname, 'dof_block.npy')),
        dof_segment=np.load(os.path.join(dirname, 'dof_segment.npy')),
        sources=meta['sources'], meta=meta.get('meta', {}))


############# training pairs

@dataclass(eq=False)
class PairSet:
    """training pairs, row j is x = [u^n | b^n] -> y = u^{n+1}

    :ivar obs_mask: True where the target entry comes from observation data
    :ivar targets: record of where targets come from (label, hashes, policy)
    """
    x: np.ndarray
    y: np.ndarray
    sample: np.ndarray
    step: np.ndarray
    obs_mask: np.ndarray
    targets: dict

    def __len__(self):
        return len(self.x)

    @property
    def n(self):
        return self.y.shape[1]

    def subset(self, rows):
        rows = np.asarray(rows)
        return PairSet(self.x[rows], self.y[rows], self.sample[rows],
                       self.step[rows], self.obs_mask[rows],
                       dict(self.targets))


def _check_aligned(a, b, what):
    if a.states.shape[:2] != b.states.shape[:2] or a.n != b.n:
        raise DatasetMismatch(
            f'{what}: datasets have shapes {a.states.shape} and '
            f'{b.states.shape}')
    if a.sources != b.sources:
        raise DatasetMismatch(f'{what}: datasets use different sources')
    matrix = a.dof_segment < 0
    if (not np.array_equal(a.dof_segment, b.dof_segment) or
            not np.array_equal(a.dof_block[matrix], b.dof_block[matrix])):
        raise DatasetMismatch(f'{what}: datasets number their continua '
                              f'differently')


def make_pairs(dataset, steps=(1, 9), inputs=None, samples=None):
    """cut (input, target) pairs from trajectories

    :param steps: (first, last) transition, inclusive
    :param inputs: dataset providing x (simulation data), `dataset` if None
    :param samples: sample ids to use, all if None
    """
    inputs = inputs if inputs is not None else dataset
    if inputs is not dataset:
        _check_aligned(inputs, dataset, 'make_pairs')
    first, last = steps
    if not 1 <= first <= last <= dataset.n_steps:
        raise InvalidConfig(f'step range {first}..{last} outside '
                            f'1..{dataset.n_steps}')
    samples = (np.arange(dataset.m) if samples is None
               else np.asarray(samples, dtype=np.int64))
    step_ids = np.arange(first, last + 1)
    sample_col = np.repeat(samples, len(step_ids))
    step_col = np.tile(step_ids, len(samples))
    x = np.concatenate((inputs.states[sample_col, step_col - 1],
                        inputs.loads[sample_col, step_col - 1]), axis=1)
    y = dataset.states[sample_col, step_col].copy()
    obs = dataset.label == 'observation'
    return PairSet(x, y, sample_col, step_col,
                   np.full(y.shape, obs),
                   {'label': dataset.label,
                    'geometry_hash': dataset.geometry_hash})


@dataclass(frozen=True)
class MixPolicy:
    """by-sample: a `fraction` of sources take observation targets
    by-region: target DOFs whose home block lies in `half` of the domain
    take observation values
    """
    kind: str = 'by-sample'
    fraction: float = 0.5
    half: str = 'right'

    def __post_init__(self):
        if self.kind not in ('by-sample', 'by-region'):
            raise InvalidConfig(f"mixing policy must be 'by-sample' or "
                                f"'by-region', got {self.kind!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise InvalidConfig(f'mixing fraction must be in [0, 1], '
                                f'got {self.fraction!r}')
        if self.half not in ('left', 'right', 'bottom', 'top'):
            raise InvalidConfig(f'unknown half {self.half!r}')


def region_dofs(geometry, half='right'):
    """bool per DOF, True when its home block center is in `half`"""
    centers = geometry.grid.block_centers()[geometry.index.dof_block]
    if half in ('left', 'right'):
        inside = centers[:, 0] >= geometry.grid.width / 2.0
    else:
        inside = centers[:, 1] >= geometry.grid.height / 2.0
    return inside if half in ('right', 'top') else ~inside


def mix_datasets(sim_pairs, obs_pairs, policy, seed=None, geometry=None):
    """targets mixed from simulation and observation pairs

    :param geometry: observation geometry, needed by the by-region policy
    """
    if (sim_pairs.x.shape != obs_pairs.x.shape or
            sim_pairs.y.shape != obs_pairs.y.shape or
            not np.array_equal(sim_pairs.sample, obs_pairs.sample) or
            not np.array_equal(sim_pairs.step, obs_pairs.step)):
        raise DatasetMismatch(
            'simulation and observation pairs do not cover the same '
            'sources and steps')
    if not np.array_equal(sim_pairs.x, obs_pairs.x):
        raise DatasetMismatch(
            'simulation and observation pairs have different inputs')

    record = {'label': 'mixed', 'policy': policy.kind,
              'simulation': sim_pairs.targets.get('geometry_hash'),
              'observation': obs_pairs.targets.get('geometry_hash')}
    if policy.kind == 'by-sample':
        samples = np.unique(sim_pairs.sample)
        n_obs = int(math.floor(policy.fraction * len(samples) + 0.5))
        chosen = np.random.default_rng(seed).permutation(samples)[:n_obs]
        rows = np.isin(sim_pairs.sample, chosen)
        mask = np.broadcast_to(rows[:, None], sim_pairs.y.shape).copy()
        record.update({'fraction': policy.fraction,
                       'observation_samples': np.sort(chosen)})
    else:
        if geometry is None:
            raise InvalidConfig('by-region mixing needs the observation '
                                'geometry')
        if geometry.n != sim_pairs.n:
            raise DatasetMismatch(
                f'geometry has {geometry.n} continua, pairs have '
                f'{sim_pairs.n}')
        dofs = region_dofs(geometry, policy.half)
        mask = np.broadcast_to(dofs[None, :], sim_pairs.y.shape).copy()
        record['half'] = policy.half
    y = np.where(mask, obs_pairs.y, sim_pairs.y)
    return PairSet(sim_pairs.x.copy(), y, sim_pairs.sample.copy(),
                   sim_pairs.step.copy(), mask, record)


def pair_columns(n):
    """column names of the pair matrix file"""
    return (['x%d' % k for k in range(2 * n)] +
            ['y%d' % k for k in range(n)] + ['sample', 'step'])


def save_pairs(pairs, dirname, fmt='npy'):
    """pair matrix (rows = pairs, columns = [x | y | sample | step])

    `fmt` is 'npy' (float64 binary) or 'csv'. The observation mask and the
    target record are saved next to it.
    """
    os.makedirs(dirname, exist_ok=True)
    matrix = np.column_stack((pairs.x, pairs.y, pairs.sample, pairs.step))
    if fmt == 'npy':
        np.save(os.path.join(dirname, 'pairs.npy'), matrix)
    elif fmt == 'csv':
        write_csv(os.path.join(dirname, 'pairs.csv'), matrix,
                  pair_columns(pairs.n))
    else:
        raise InvalidConfig(f"pair format must be 'npy' or 'csv', "
                            f"got {fmt!r}")
    np.save(os.path.join(dirname, 'obs_mask.npy'), pairs.obs_mask)
    dump_json(os.path.join(dirname, 'pairs.json'), {
        'n': pairs.n, 'count': len(pairs), 'format': fmt,
        'columns': pair_columns(pairs.n), 'targets': pairs.targets})


def load_pairs(dirname):
    meta = load_json(os.path.join(dirname, 'pairs.json'))
    if meta['format'] == 'npy':
        matrix = np.load(os.path.join(dirname, 'pairs.npy'))
    else:
        header, matrix = read_csv(os.path.join(dirname, 'pairs.csv'))
        if header != meta['columns']:
            raise DatasetMismatch(f'{dirname}: unexpected pair columns')
    n = meta['n']
    return PairSet(matrix[:, :2 * n], matrix[:, 2 * n:3 * n],
                   matrix[:, 3 * n].astype(np.int64),
                   matrix[:, 3 * n + 1].astype(np.int64),
                   np.load(os.path.join(dirname, 'obs_mask.npy')),
                   meta['targets'])
