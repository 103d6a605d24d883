"""Experiment pipelines: config, stages, error reports

An experiment compares three surrogates of one coarse time step, all fed
with simulation states u_s^n:
  - N_o trained on observation targets
  - N_m trained on a mixture of observation and simulation targets
  - N_s trained on simulation targets
and measures their one-step (and optionally multi-step) errors against
observation data on a held-out set of sources.

Artifacts of every stage are written to the output directory, later stages
load them when run from a separate command.
"""

import os
import sys
import csv
import functools
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (InvalidConfig, ZeroReference, DimensionMismatch,
                         FracnetError)
from .storage import (StorageError, Manifest, get_md5, dump_json, load_json,
                      write_csv)
from .mesh import (build_geometry, default_network, load_geometry,
                   dump_geometry, check_layout)
from .nlmc import (build_basis_set, CoarseSystem, export_coarse_system,
                   upscaling_error)
from .datagen import (SAMPLERS, MixPolicy, mobility_from_params,
                      generate_dataset, save_dataset, load_dataset,
                      make_pairs, mix_datasets, save_pairs, load_pairs)
from .surrogate import (TrainConfig, train, train_per_step,
                        build_influence_mask, rollout, save_model, load_model)
from .runner import Stage, StageRunner, SUCCESS, get_runner
from .reporter import ZeroReporter
from .plugin import PluginDict


NETWORKS = ('o', 'm', 's')

STAGES = ('geometry', 'basis', 'sources', 'upscaling-check', 'simulate',
          'pairs', 'train', 'evaluate', 'report')

# geometry key -> dataset label
LABELS = {'sim': 'simulation', 'obs': 'observation'}

_CORNER_WELLS = {
    'sampler': 'fixed-location-random-rate',
    'sampler_options': {},
    'mobility': {'kind': 'front', 'speed': 50.0, 'radius': 0.1,
                 'center': [0.05, 0.05]},
}

# values that differ from the ExperimentConfig defaults (Example 1)
EXAMPLE_DEFAULTS = {
    1: {},
    2: dict(_CORNER_WELLS, source_count=500, train_count=490, test_count=10,
            mix={'kind': 'by-region', 'half': 'right'}, rollout_warmup=8,
            inputs=['full']),
    3: dict(_CORNER_WELLS, source_count=200, train_count=190, test_count=10,
            fracture_shift=0, fracture_permeability_sim=10.0,
            fracture_permeability_obs=1000.0, inputs=['full']),
}


def sub_seed(master, purpose):
    """deterministic seed for one `purpose` derived from the master seed"""
    key = int(get_md5(purpose)[:8], 16)
    seq = np.random.SeedSequence(entropy=master, spawn_key=(key,))
    return int(seq.generate_state(1)[0])


def relative_error(pred, ref):
    """100 * |pred - ref| / |ref| (l2 norms)"""
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if pred.shape != ref.shape:
        raise DimensionMismatch(f'prediction has shape {pred.shape}, '
                                f'reference {ref.shape}')
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise ZeroReference('relative error against a zero reference')
    return 100.0 * float(np.linalg.norm(pred - ref)) / float(norm)


def mode_name(entry):
    """output directory / report key of an input mode"""
    return 'full' if entry == 'full' else 'radius-%d' % entry


@dataclass
class ExperimentConfig:
    example: int = 1
    seed: int = 0
    out: str = 'fracnet-out'
    num_process: int = 0
    par_type: str = 'process'
    # geometry
    nx: int = 10
    ny: int = 10
    s: int = 10
    matrix_permeability: float = 1.0
    aperture: float = 0.01
    geometry_sim: str = None
    geometry_obs: str = None
    fracture_shift: int = 1
    fracture_permeability_sim: float = 1000.0
    fracture_permeability_obs: float = 1000.0
    # time stepping / upscaling
    final_time: float = 0.01
    n_steps: int = 10
    layers: int = 2
    clamp_domain_boundary: bool = False
    mobility: dict = field(
        default_factory=lambda: {'kind': 'constant', 'value': 1.0})
    # sources and data
    sampler: str = 'two-well-random-location'
    sampler_options: dict = field(default_factory=lambda: {'magnitude': 1.0})
    source_count: int = 300
    train_count: int = 290
    test_count: int = 10
    steps: list = field(default_factory=lambda: [1, 9])
    mix: dict = field(
        default_factory=lambda: {'kind': 'by-sample', 'fraction': 0.5})
    pair_format: str = 'npy'
    upscaling_check: bool = False
    upscaling_check_samples: int = 2
    # networks
    inputs: list = field(default_factory=lambda: ['full', 1])
    training: dict = field(default_factory=dict)
    training_o: dict = field(default_factory=dict)
    training_m: dict = field(default_factory=lambda: {'weighted': True})
    training_s: dict = field(default_factory=dict)
    per_step: bool = False
    rollout_warmup: int = 0
    slack: float = 1.1

    @property
    def dt(self):
        return self.final_time / self.n_steps

    @classmethod
    def from_dict(cls, data):
        names = [f.name for f in dataclasses.fields(cls)]
        for key in data:
            if key not in names:
                raise InvalidConfig(f'unknown experiment option {key!r}')
        return cls(**data).validate()

    def to_dict(self):
        return dataclasses.asdict(self)

    def train_config(self, net, mode='full'):
        """TrainConfig of network `net` ('o', 'm' or 's')"""
        data = dict(self.training)
        data.update(getattr(self, 'training_' + net))
        data.setdefault('seed', sub_seed(self.seed, f'train-{net}-{mode}'))
        return TrainConfig.from_dict(data)

    def validate(self):
        if self.example not in EXAMPLE_DEFAULTS:
            raise InvalidConfig(f'example must be 1, 2 or 3, '
                                f'got {self.example!r}')
        for name in ('source_count', 'train_count', 'test_count', 'n_steps'):
            if int(getattr(self, name)) != getattr(self, name) or \
                    getattr(self, name) < 1:
                raise InvalidConfig(f'{name} must be an integer >= 1, '
                                    f'got {getattr(self, name)!r}')
        if self.train_count + self.test_count != self.source_count:
            raise InvalidConfig(
                f'train_count + test_count ({self.train_count} + '
                f'{self.test_count}) must equal source_count '
                f'({self.source_count})')
        if not self.final_time > 0:
            raise InvalidConfig(f'final_time must be positive, '
                                f'got {self.final_time!r}')
        if len(self.steps) != 2 or \
                not 1 <= self.steps[0] <= self.steps[1] <= self.n_steps:
            raise InvalidConfig(f'steps must be [first, last] within '
                                f'1..{self.n_steps}, got {self.steps!r}')
        if self.rollout_warmup < 0 or \
                self.steps[0] + self.rollout_warmup > self.steps[1]:
            raise InvalidConfig(
                f'rollout_warmup {self.rollout_warmup} does not fit in steps '
                f'{self.steps[0]}..{self.steps[1]}')
        if not self.inputs:
            raise InvalidConfig('inputs must list at least one input mode')
        for entry in self.inputs:
            if entry != 'full' and (isinstance(entry, bool) or
                                    not isinstance(entry, int) or entry < 0):
                raise InvalidConfig(f"input mode must be 'full' or a mask "
                                    f"radius >= 0, got {entry!r}")
        if len({mode_name(e) for e in self.inputs}) != len(self.inputs):
            raise InvalidConfig(f'duplicated input modes {self.inputs!r}')
        if self.pair_format not in ('npy', 'csv'):
            raise InvalidConfig(f"pair_format must be 'npy' or 'csv', "
                                f"got {self.pair_format!r}")
        if self.par_type not in ('process', 'thread'):
            raise InvalidConfig(f"par_type must be 'process' or 'thread', "
                                f"got {self.par_type!r}")
        if not self.slack >= 1:
            raise InvalidConfig(f'slack must be >= 1, got {self.slack!r}')
        for key in ('geometry_sim', 'geometry_obs'):
            path = getattr(self, key)
            if path is not None and not os.path.exists(path):
                raise InvalidConfig(f'{key}: file {path!r} does not exist')
        mobility_from_params(self.mobility)
        MixPolicy(**self.mix)
        for net in NETWORKS:
            self.train_config(net)
        return self


def load_config(path=None, overrides=None):
    """experiment config from a JSON file on top of the example defaults

    :param overrides: values taking priority over the file, None ignored
    """
    data = {}
    if path is not None:
        try:
            data = load_json(path)
        except FileNotFoundError:
            raise InvalidConfig(f'config file {path!r} not found')
        except StorageError as error:
            raise InvalidConfig(str(error))
        if not isinstance(data, dict):
            raise InvalidConfig(f'{path}: config must be a JSON object')
        base = os.path.dirname(os.path.abspath(path))
        for key in ('geometry_sim', 'geometry_obs'):
            if data.get(key) is not None and not os.path.isabs(data[key]):
                data[key] = os.path.join(base, data[key])
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    example = overrides.get('example', data.get('example', 1))
    if example not in EXAMPLE_DEFAULTS:
        raise InvalidConfig(f'example must be 1, 2 or 3, got {example!r}')
    merged = dict(EXAMPLE_DEFAULTS[example])
    merged.update(data)
    merged.update(overrides)
    merged['example'] = example
    return ExperimentConfig.from_dict(merged)


############# error report

def compare_networks(means, slack=1.1):
    """check mean(N_o) <= mean(N_m) <= mean(N_s) up to a `slack` factor

    :param means: ErrorReport mode means, dict net -> mean error
    """
    return {'o<=m': bool(means['o'] <= slack * means['m']),
            'm<=s': bool(means['m'] <= slack * means['s'])}


@dataclass
class ErrorReport:
    """relative errors (%) against observation targets

    :ivar one_step: mode -> net -> list of (sample, step, error)
    :ivar rollout: mode -> net -> list of (sample, error)
    """
    example: int
    one_step: dict = field(default_factory=dict)
    rollout: dict = field(default_factory=dict)

    @property
    def modes(self):
        return list(self.one_step)

    def means(self, mode, kind='one_step'):
        table = getattr(self, kind)[mode]
        return {net: float(np.mean([entry[-1] for entry in table[net]]))
                for net in table}

    def to_dict(self, slack=1.1):
        modes = {}
        for mode in self.modes:
            means = self.means(mode)
            doc = {'mean': means,
                   'ordering': compare_networks(means, slack),
                   'errors': {net: [list(e) for e in entries]
                              for net, entries in self.one_step[mode].items()}}
            if self.rollout.get(mode):
                doc['rollout'] = {
                    'mean': self.means(mode, 'rollout'),
                    'errors': {net: [list(e) for e in entries]
                               for net, entries in self.rollout[mode].items()}}
            modes[mode] = doc
        return {'example': self.example, 'slack': slack, 'modes': modes}

    def rows(self):
        """(mode, network, kind, sample, step, error) rows"""
        for mode in self.modes:
            for net, entries in self.one_step[mode].items():
                for sample, step, error in entries:
                    yield mode, net, 'one-step', sample, step, error
            for net, entries in self.rollout.get(mode, {}).items():
                for sample, error in entries:
                    yield mode, net, 'rollout', sample, -1, error


def write_error_csv(path, report):
    with open(path, 'w', newline='', encoding='utf-8') as fp:
        writer = csv.writer(fp)
        writer.writerow(['mode', 'network', 'kind', 'sample', 'step',
                         'error'])
        for mode, net, kind, sample, step, error in report.rows():
            writer.writerow([mode, net, kind, sample, step, repr(error)])


############# pipeline

class Experiment(object):
    """pipeline stages of one experiment, sharing in-memory artifacts"""

    def __init__(self, config, reporter=None, runner=None, plugins=None):
        """
        :param plugins: config sections holding plugin locations (SAMPLER)
        """
        self.config = config
        self.reporter = (reporter if reporter is not None
                         else ZeroReporter(sys.stdout, {}))
        self.runner = (runner if runner is not None
                       else get_runner(config.num_process, config.par_type))
        self.plugins = plugins if plugins else {}
        self.out = config.out
        self.report = None
        self.failure = None
        self._stage = None
        self._geometry = {}
        self._system = {}
        self._sources = None
        self._datasets = {}
        self._pairs = {}
        self._models = {}

    def path(self, *parts):
        return os.path.join(self.out, *parts)

    def progress(self, msg):
        self.reporter.progress(self._stage, msg)

    ###### artifacts (built in this run or loaded from the output dir)

    def mobility(self):
        return mobility_from_params(self.config.mobility)

    def geometry(self, key):
        if key not in self._geometry:
            path = self.path(f'geometry_{key}.json')
            if not os.path.exists(path):
                raise InvalidConfig(f'missing {path}, run gen-geometry first')
            self._geometry[key] = load_geometry(path)
        return self._geometry[key]

    def system(self, key):
        if key not in self._system:
            c = self.config
            geometry = self.geometry(key)
            mobility = self.mobility()
            basis = build_basis_set(geometry, mobility, c.layers,
                                    clamp_domain_boundary=c.clamp_domain_boundary,
                                    runner=self.runner)
            self._system[key] = CoarseSystem(geometry, basis, mobility, c.dt)
        return self._system[key]

    def sampler(self):
        samplers = PluginDict(SAMPLERS)
        samplers.add_plugins(self.plugins, 'SAMPLER')
        if self.config.sampler not in samplers:
            raise InvalidConfig(
                f'unknown source sampler {self.config.sampler!r} '
                f'(choices: {", ".join(sorted(samplers))})')
        sampler_cls = samplers.get_plugin(self.config.sampler)
        try:
            return sampler_cls.for_geometry(self.geometry('sim'),
                                            self.config.n_steps,
                                            **self.config.sampler_options)
        except TypeError as error:
            raise InvalidConfig(f'sampler {self.config.sampler!r}: {error}')

    def sources(self):
        """(sources, train ids, test ids)"""
        if self._sources is None:
            c = self.config
            sources = self.sampler().sample(c.source_count,
                                            sub_seed(c.seed, 'sources'))
            order = np.random.default_rng(
                sub_seed(c.seed, 'split')).permutation(c.source_count)
            self._sources = (sources, np.sort(order[:c.train_count]),
                             np.sort(order[c.train_count:]))
        return self._sources

    def dataset(self, key):
        if key not in self._datasets:
            self._datasets[key] = load_dataset(self.path(f'data_{key}'))
        return self._datasets[key]

    def pairs(self, name):
        if name not in self._pairs:
            path = self.path('pairs', name)
            if not os.path.exists(os.path.join(path, 'pairs.json')):
                raise InvalidConfig(f'missing {path}, run gen-data first')
            self._pairs[name] = load_pairs(path)
        return self._pairs[name]

    def model(self, mode, net):
        """Surrogate, or dict step -> Surrogate for per-step training"""
        if (mode, net) not in self._models:
            base = self.path(mode, f'model_{net}')
            first, last = self.config.steps
            check = f'{base}_step{first}' if self.config.per_step else base
            if not os.path.exists(check + '.json'):
                raise InvalidConfig(f'missing {check}.json, run train first')
            if self.config.per_step:
                model = {step: load_model(f'{base}_step{step}')
                         for step in range(first, last + 1)}
            else:
                model = load_model(base)
            self._models[(mode, net)] = model
        return self._models[(mode, net)]

    ###### stages

    def stage_geometry(self):
        c = self.config
        os.makedirs(self.out, exist_ok=True)
        for key in ('sim', 'obs'):
            path = getattr(c, f'geometry_{key}')
            if path is not None:
                geometry = load_geometry(path)
            else:
                shift = c.fracture_shift if key == 'obs' else 0
                network = default_network(
                    shift, getattr(c, f'fracture_permeability_{key}'),
                    c.aperture)
                geometry = build_geometry(c.nx, c.ny, c.s, network,
                                          kappa_m=c.matrix_permeability)
            dump_geometry(geometry, self.path(f'geometry_{key}.json'))
            self._geometry[key] = geometry
            self.progress(f'{key}: {geometry.n} continua, '
                          f'geometry {geometry.hash}')
        check_layout(self._geometry['sim'], self._geometry['obs'])

    def stage_basis(self):
        for key in ('sim', 'obs'):
            system = self.system(key)
            export_coarse_system(system, self.path(f'coarse_{key}'))
            self.progress(f'{key}: {system.n} basis functions, constraint '
                          f'residual {system.basis.residual:.1e}')

    def stage_sources(self):
        c = self.config
        sources, train_ids, test_ids = self.sources()
        dump_json(self.path('sources.json'), {
            'sampler': c.sampler, 'seed': sub_seed(c.seed, 'sources'),
            'sources': [source.params() for source in sources],
            'train': train_ids, 'test': test_ids})
        self.progress(f'{len(sources)} sources, {len(train_ids)} train / '
                      f'{len(test_ids)} test')

    def stage_upscaling_check(self):
        sources = self.sources()[0]
        system = self.system('sim')
        errors = []
        for idx in range(min(self.config.upscaling_check_samples,
                             len(sources))):
            errors.append(upscaling_error(system, sources[idx],
                                          self.config.n_steps))
            self.progress(f'source {idx}: coarse vs fine {errors[-1]:.2f}%')
        dump_json(self.path('upscaling_check.json'),
                  {'errors': errors, 'mean': float(np.mean(errors))})

    def stage_simulate(self):
        c = self.config
        sources, train_ids, test_ids = self.sources()
        for key, label in LABELS.items():
            dataset = generate_dataset(
                self.system(key), sources, label, c.n_steps,
                runner=self.runner,
                meta={'seed': c.seed, 'train': train_ids, 'test': test_ids})
            save_dataset(dataset, self.path(f'data_{key}'))
            self._datasets[key] = dataset
            self.progress(f'{label}: {dataset.m} trajectories of '
                          f'{dataset.n_steps + 1} states')

    def stage_pairs(self):
        c = self.config
        sim, obs = self.dataset('sim'), self.dataset('obs')
        train_ids = np.asarray(sim.meta['train'], dtype=np.int64)
        test_ids = np.asarray(sim.meta['test'], dtype=np.int64)
        steps = tuple(c.steps)
        sim_train = make_pairs(sim, steps, samples=train_ids)
        obs_train = make_pairs(obs, steps, inputs=sim, samples=train_ids)
        mixed = mix_datasets(sim_train, obs_train, MixPolicy(**c.mix),
                             seed=sub_seed(c.seed, 'mix'),
                             geometry=self.geometry('obs'))
        test = make_pairs(obs, steps, inputs=sim, samples=test_ids)
        for name, pairs in (('train_o', obs_train), ('train_m', mixed),
                            ('train_s', sim_train), ('test', test)):
            save_pairs(pairs, self.path('pairs', name), c.pair_format)
            self._pairs[name] = pairs
        self.progress(f'{len(sim_train)} training pairs, {len(test)} test '
                      f'pairs')

    def stage_train(self):
        c = self.config
        for entry in c.inputs:
            mode = mode_name(entry)
            for net in NETWORKS:
                tconf = c.train_config(net, mode)
                mask = None
                if entry != 'full':
                    # outputs follow the geometry the targets come from
                    target = 'sim' if net == 's' else 'obs'
                    mask = build_influence_mask(self.geometry('sim'), entry,
                                                tconf.hidden,
                                                self.geometry(target))
                pairs = self.pairs(f'train_{net}')
                base = self.path(mode, f'model_{net}')
                history_path = self.path(mode, f'loss_history_{net}.csv')
                if c.per_step:
                    trained = train_per_step(pairs, tconf, mask)
                    for step, (model, history) in trained.items():
                        save_model(model, f'{base}_step{step}')
                    steps = sorted(trained)
                    histories = [trained[step][1] for step in steps]
                    write_csv(history_path, np.column_stack(
                        [np.arange(len(histories[0]))] + histories),
                        ['epoch'] + ['step%d' % step for step in steps])
                    self._models[(mode, net)] = {
                        step: trained[step][0] for step in steps}
                    first, final = histories[0][0], histories[-1][-1]
                else:
                    model, history = train(pairs, tconf, mask)
                    save_model(model, base)
                    write_csv(history_path, np.column_stack(
                        (np.arange(len(history)), history)),
                        ['epoch', 'loss'])
                    self._models[(mode, net)] = model
                    first, final = history[0], history[-1]
                self.progress(f'{mode} N_{net}: loss {first:.3e} -> '
                              f'{final:.3e}')

    @staticmethod
    def _at_step(model, step):
        return model[step] if isinstance(model, dict) else model

    def predict(self, model, pairs):
        """predictions for every pair (rows follow the pair rows)"""
        if not isinstance(model, dict):
            return model.predict(pairs.x)
        pred = np.empty_like(pairs.y)
        for step in np.unique(pairs.step):
            rows = pairs.step == step
            pred[rows] = model[int(step)].predict(pairs.x[rows])
        return pred

    def rollout_predictions(self, mode, net):
        """apply N_s for the warmup steps, then `net` for one step

        @return (test ids, final states, observation references)
        """
        c = self.config
        sim, obs = self.dataset('sim'), self.dataset('obs')
        test_ids = np.asarray(sim.meta['test'], dtype=np.int64)
        first, warmup = c.steps[0], c.rollout_warmup
        warm = self.model(mode, 's')
        final = self.model(mode, net)
        nets = ([self._at_step(warm, first + k) for k in range(warmup)] +
                [self._at_step(final, first + warmup)])
        finals = np.stack([
            rollout(nets, sim.states[sample, first - 1],
                    sim.loads[sample, first - 1:first + warmup])
            for sample in test_ids])
        refs = obs.states[test_ids, first + warmup]
        return test_ids, finals, refs

    def stage_evaluate(self):
        c = self.config
        test = self.pairs('test')
        report = ErrorReport(c.example)
        for entry in c.inputs:
            mode = mode_name(entry)
            report.one_step[mode] = {}
            for net in NETWORKS:
                pred = self.predict(self.model(mode, net), test)
                np.save(self.path(mode, f'predictions_{net}.npy'), pred)
                report.one_step[mode][net] = [
                    (int(sample), int(step), relative_error(p, y))
                    for sample, step, p, y in zip(test.sample, test.step,
                                                  pred, test.y)]
                if c.rollout_warmup:
                    ids, finals, refs = self.rollout_predictions(mode, net)
                    np.save(self.path(mode, f'rollout_{net}.npy'), finals)
                    report.rollout.setdefault(mode, {})[net] = [
                        (int(sample), relative_error(p, y))
                        for sample, p, y in zip(ids, finals, refs)]
            means = report.means(mode)
            self.progress(f'{mode}: mean errors ' + ' / '.join(
                f'N_{net} {means[net]:.2f}%' for net in NETWORKS))
        self.report = report

    def stage_report(self):
        if self.report is None:
            raise InvalidConfig('no evaluation results, run evaluate first')
        c = self.config
        doc = self.report.to_dict(c.slack)
        doc['geometry'] = {key: self.geometry(key).hash for key in LABELS}
        doc['config'] = c.to_dict()
        dump_json(self.path('report.json'), doc)
        write_error_csv(self.path('errors_per_sample.csv'), self.report)
        for mode, mode_doc in doc['modes'].items():
            self.progress(f'{mode}: ordering {mode_doc["ordering"]}')

    ######

    def _run_stage(self, name):
        self._stage = name
        getattr(self, 'stage_' + name.replace('-', '_'))()

    def run(self, names=STAGES):
        """run stages `names` (in pipeline order) with a StageRunner

        @return SUCCESS, FAILURE or ERROR
        """
        unknown = [name for name in names if name not in STAGES]
        if unknown:
            raise InvalidConfig(f'unknown stage(s): {", ".join(unknown)}')
        os.makedirs(self.out, exist_ok=True)
        stages = [
            Stage(name, functools.partial(self._run_stage, name),
                  enabled=(name != 'upscaling-check' or
                           self.config.upscaling_check))
            for name in STAGES if name in names]
        stage_runner = StageRunner(self.reporter, Manifest(self.out))
        result = stage_runner.run_all(stages)
        self.failure = stage_runner.failure
        return result


def run_example(config, reporter=None, runner=None):
    """run the whole pipeline of one experiment

    @return ErrorReport
    """
    experiment = Experiment(config, reporter, runner)
    if experiment.run() != SUCCESS:
        raise FracnetError(experiment.failure.message)
    return experiment.report
