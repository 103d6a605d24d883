"""Masked multi-layer perceptron surrogates of the coarse time step

Networks map x = [u^n | b^n] to u^{n+1}. Hidden layers use leaky ReLU,
the output layer is affine. Weights are stored as (out, in) matrices so an
optional 0/1 mask has the same shape as its weight matrix.
"""

import os
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, InvalidConfig, TrainingDiverged
from .storage import dump_json, load_json, write_csv


# lower bound of the AdaMax infinity norm
ADAMAX_EPS = 1e-12


def leaky_relu(z, slope):
    return np.where(z > 0, z, slope * z)


class SurrogateNet(object):
    """fully connected network with optional per-layer connection masks"""

    def __init__(self, weights, biases, slope=0.01, masks=None):
        if len(weights) != len(biases):
            raise DimensionMismatch(
                f'{len(weights)} weight matrices, {len(biases)} bias vectors')
        for k in range(len(weights)):
            if weights[k].shape[0] != biases[k].shape[0]:
                raise DimensionMismatch(
                    f'layer {k + 1}: weight rows {weights[k].shape[0]} != '
                    f'bias length {biases[k].shape[0]}')
            if k and weights[k].shape[1] != weights[k - 1].shape[0]:
                raise DimensionMismatch(
                    f'layer {k + 1} expects {weights[k].shape[1]} inputs, '
                    f'layer {k} gives {weights[k - 1].shape[0]}')
        if masks is not None:
            if len(masks) != len(weights):
                raise DimensionMismatch(
                    f'{len(masks)} masks for {len(weights)} layers')
            masks = [np.asarray(mask, dtype=bool) for mask in masks]
            for k, (W, mask) in enumerate(zip(weights, masks)):
                if mask.shape != W.shape:
                    raise DimensionMismatch(
                        f'layer {k + 1}: mask shape {mask.shape} != '
                        f'weight shape {W.shape}')
                W[~mask] = 0.0
        self.weights = weights
        self.biases = biases
        self.slope = slope
        self.masks = masks

    @classmethod
    def init(cls, dims, rng, slope=0.01, masks=None):
        """He initialization scaled by the unmasked fan-in"""
        weights, biases = [], []
        for k in range(len(dims) - 1):
            shape = (dims[k + 1], dims[k])
            if masks is not None:
                fan_in = np.maximum(np.sum(masks[k], axis=1), 1)[:, None]
            else:
                fan_in = dims[k]
            weights.append(rng.standard_normal(shape) * np.sqrt(2.0 / fan_in))
            biases.append(np.zeros(dims[k + 1]))
        return cls(weights, biases, slope, masks)

    @property
    def dims(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    def parameters(self):
        """[W1, b1, W2, b2, ...]"""
        params = []
        for W, b in zip(self.weights, self.biases):
            params.extend((W, b))
        return params

    def copy(self):
        return SurrogateNet([W.copy() for W in self.weights],
                            [b.copy() for b in self.biases], self.slope,
                            self.masks)

    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dims[0]:
            raise DimensionMismatch(f'network expects {self.dims[0]} inputs, '
                                    f'got {x.shape[-1]}')
        return x

    def forward(self, x):
        """x of shape (d_in,) or (batch, d_in)"""
        x = self._check_input(x)
        a = np.atleast_2d(x)
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ W.T + b
            if k != last:
                a = leaky_relu(a, self.slope)
        return a[0] if x.ndim == 1 else a

    def _forward_trace(self, X):
        """pre-activations and activations of every layer"""
        acts, pres = [X], []
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W.T + b
            pres.append(z)
            acts.append(z if k == last else leaky_relu(z, self.slope))
        return pres, acts


def forward(net, x):
    return net.forward(x)


def squared_loss(net, X, Y, W):
    """sum of w * (y - N(x))**2 over all pairs and components"""
    r = Y - net.forward(X)
    return float(np.sum(W * r * r))


def loss_and_gradient(net, X, Y, W):
    """@return (loss, [dW1, db1, dW2, db2, ...])"""
    X = net._check_input(X)
    X = np.atleast_2d(X)
    pres, acts = net._forward_trace(X)
    r = Y - acts[-1]
    value = float(np.sum(W * r * r))
    delta = -2.0 * W * r
    grads = [None] * (2 * len(net.weights))
    for k in range(len(net.weights) - 1, -1, -1):
        gW = delta.T @ acts[k]
        if net.masks is not None:
            gW = gW * net.masks[k]
        grads[2 * k] = gW
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            deriv = np.where(pres[k - 1] > 0, 1.0, net.slope)
            delta = (delta @ net.weights[k]) * deriv
    return value, grads


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    weighted: bool = False
    w1: float = None   # observation weight, 2/N if None
    w2: float = None   # simulation weight, 1/N if None
    seed: int = 0
    slope: float = 0.01
    hidden: list = field(default_factory=lambda: [256] * 6)
    normalize: bool = True

    def validate(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise InvalidConfig(f'epochs must be an integer >= 1, '
                                f'got {self.epochs!r}')
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise InvalidConfig(f'batch_size must be an integer >= 1, '
                                f'got {self.batch_size!r}')
        if not self.learning_rate > 0:
            raise InvalidConfig(f'learning_rate must be positive, '
                                f'got {self.learning_rate!r}')
        for name in ('beta1', 'beta2'):
            if not 0 <= getattr(self, name) < 1:
                raise InvalidConfig(f'{name} must be in [0, 1), '
                                    f'got {getattr(self, name)!r}')
        if not self.slope >= 0:
            raise InvalidConfig(f'slope must be >= 0, got {self.slope!r}')
        if not self.hidden or any(int(h) != h or h < 1 for h in self.hidden):
            raise InvalidConfig(f'hidden widths must be integers >= 1, '
                                f'got {self.hidden!r}')
        if self.weighted and self.w1 is not None and self.w2 is not None:
            if not self.w1 > self.w2 > 0:
                raise InvalidConfig(f'weighted loss needs w1 > w2 > 0, got '
                                    f'w1={self.w1!r}, w2={self.w2!r}')
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise InvalidConfig(f'unknown training option(s): '
                                f'{", ".join(unknown)}')
        return cls(**data).validate()


def loss_weights(obs_mask, config, n_pairs=None):
    """per-component loss weights

    standard: 1/N everywhere. weighted: w1 on observation entries and w2 on
    simulation entries (defaults 2/N and 1/N).
    """
    n_pairs = len(obs_mask) if n_pairs is None else n_pairs
    if not config.weighted:
        return np.full(obs_mask.shape, 1.0 / n_pairs)
    w1 = config.w1 if config.w1 is not None else 2.0 / n_pairs
    w2 = config.w2 if config.w2 is not None else 1.0 / n_pairs
    return np.where(obs_mask, w1, w2)


def loss(net, pairs, config):
    """configured loss of `net` over a PairSet"""
    if not len(pairs):
        raise DimensionMismatch('empty pair set')
    return squared_loss(net, pairs.x, pairs.y,
                        loss_weights(pairs.obs_mask, config))


def backward(net, pairs, config):
    """gradient of the configured loss, same layout as net.parameters()"""
    if not len(pairs):
        raise DimensionMismatch('empty pair set')
    return loss_and_gradient(net, pairs.x, pairs.y,
                             loss_weights(pairs.obs_mask, config))[1]


class AdamaxState(object):
    """first moment and infinity norm of every parameter"""
    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.u = [np.zeros_like(p) for p in params]
        self.t = 0


def adamax_step(state, params, grads, config, t, masks=None):
    """one AdaMax update, in place on `params`

    :param masks: weight masks, applied to params[0::2]
    @return (params, state)
    """
    if t < 1:
        raise InvalidConfig(f'AdaMax step counter starts at 1, got {t!r}')
    b1, b2 = config.beta1, config.beta2
    step = config.learning_rate / (1.0 - b1 ** t)
    for k, (p, g) in enumerate(zip(params, grads)):
        m = state.m[k]
        u = state.u[k]
        m *= b1
        m += (1.0 - b1) * g
        np.maximum(b2 * u, np.abs(g), out=u)
        p -= step * m / np.maximum(u, ADAMAX_EPS)
        if masks is not None and k % 2 == 0:
            p[~masks[k // 2]] = 0.0
    state.t = t
    return params, state


class Normalizer(object):
    """per-column affine standardization of inputs and targets"""

    def __init__(self, x_mean, x_std, y_mean, y_std):
        self.x_mean = np.asarray(x_mean, dtype=float)
        self.x_std = np.asarray(x_std, dtype=float)
        self.y_mean = np.asarray(y_mean, dtype=float)
        self.y_std = np.asarray(y_std, dtype=float)

    @staticmethod
    def _stats(data):
        mean = data.mean(axis=0)
        std = data.std(axis=0)
        std[std < 1e-12] = 1.0
        return mean, std

    @classmethod
    def fit(cls, x, y):
        return cls(*cls._stats(x), *cls._stats(y))

    @classmethod
    def identity(cls, d_in, d_out):
        return cls(np.zeros(d_in), np.ones(d_in), np.zeros(d_out),
                   np.ones(d_out))

    def transform_x(self, x):
        return (x - self.x_mean) / self.x_std

    def transform_y(self, y):
        return (y - self.y_mean) / self.y_std

    def inverse_y(self, y):
        return y * self.y_std + self.y_mean

    def to_dict(self):
        return {'x_mean': self.x_mean, 'x_std': self.x_std,
                'y_mean': self.y_mean, 'y_std': self.y_std}


class Surrogate(object):
    """trained network with its normalization, predicts in physical units"""

    def __init__(self, net, normalizer, config=None, mask=None):
        self.net = net
        self.normalizer = normalizer
        self.config = config
        self.mask = mask

    @property
    def d_in(self):
        return self.net.dims[0]

    @property
    def d_out(self):
        return self.net.dims[-1]

    def predict(self, x):
        norm = self.normalizer
        return norm.inverse_y(self.net.forward(norm.transform_x(x)))


def train(pairs, config, mask=None):
    """mini-batch AdaMax training

    :param mask: InfluenceMask or None for a fully connected network
    @return (Surrogate, loss history: initial loss then one value per epoch)
    """
    config.validate()
    if not len(pairs):
        raise DimensionMismatch('cannot train on an empty pair set')
    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    init_rng = np.random.default_rng(init_seq)
    shuffle_rng = np.random.default_rng(shuffle_seq)

    if config.normalize:
        normalizer = Normalizer.fit(pairs.x, pairs.y)
    else:
        normalizer = Normalizer.identity(pairs.x.shape[1], pairs.y.shape[1])
    X = normalizer.transform_x(pairs.x)
    Y = normalizer.transform_y(pairs.y)
    dims = [X.shape[1]] + list(config.hidden) + [Y.shape[1]]
    masks = None
    if mask is not None:
        masks = mask.masks
        expected = [(dims[k + 1], dims[k]) for k in range(len(dims) - 1)]
        if [m.shape for m in masks] != expected:
            raise DimensionMismatch(
                f'mask shapes {[m.shape for m in masks]} do not match '
                f'network {expected}')
    net = SurrogateNet.init(dims, init_rng, config.slope, masks)

    n_pairs = len(pairs)
    weights = loss_weights(pairs.obs_mask, config, n_pairs)
    params = net.parameters()
    state = AdamaxState(params)
    history = [squared_loss(net, X, Y, weights)]
    t = 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n_pairs)
        for start in range(0, n_pairs, config.batch_size):
            rows = order[start:start + config.batch_size]
            scale = n_pairs / len(rows)
            _, grads = loss_and_gradient(net, X[rows], Y[rows],
                                         weights[rows] * scale)
            t += 1
            adamax_step(state, params, grads, config, t, masks)
        value = squared_loss(net, X, Y, weights)
        if not np.isfinite(value):
            raise TrainingDiverged(f'training loss is {value} at epoch '
                                   f'{epoch} (learning_rate='
                                   f'{config.learning_rate})')
        history.append(value)
    return Surrogate(net, normalizer, config, mask), np.array(history)


def train_per_step(pairs, config, mask=None):
    """one network per transition step

    @return dict step -> (Surrogate, history)
    """
    result = {}
    for step in np.unique(pairs.step):
        seed = int(np.random.SeedSequence(
            config.seed, spawn_key=(int(step),)).generate_state(1)[0])
        step_config = dataclasses.replace(config, seed=seed)
        result[int(step)] = train(pairs.subset(pairs.step == step),
                                  step_config, mask)
    return result


############# region of influence masks

@dataclass(frozen=True, eq=False)
class InfluenceMask:
    radius: int
    masks: list            # bool (out, in) per layer
    hidden_blocks: list    # block id of every hidden neuron, per layer

    def density(self, layer=0):
        return float(np.mean(self.masks[layer]))

    def descriptor(self):
        return {'radius': self.radius,
                'shapes': [list(m.shape) for m in self.masks]}


def build_influence_mask(system, radius, hidden, targets=None):
    """connect neurons whose blocks are within `radius` blocks

    Inputs u^n and b^n sit on their DOF home block, outputs too. Hidden
    neurons are assigned to blocks round-robin.

    :param system: CoarseSystem or FracturedGeometry of the inputs
    :param targets: geometry of the outputs, a translated fracture moves
        the home blocks of its pieces
    """
    geometry = getattr(system, 'geometry', system)
    out_geometry = getattr(targets, 'geometry', targets) or geometry
    if out_geometry.grid != geometry.grid:
        raise DimensionMismatch('input and output geometries use different '
                                'coarse grids')
    grid = geometry.grid
    if int(radius) != radius or radius < 0:
        raise InvalidConfig(f'mask radius must be an integer >= 0, '
                            f'got {radius!r}')
    for width in hidden:
        if width < grid.n_blocks:
            raise InvalidConfig(
                f'hidden width {width} is smaller than the number of coarse '
                f'blocks ({grid.n_blocks})')
    dof_block = geometry.index.dof_block
    layers = ([np.concatenate((dof_block, dof_block))] +
              [np.arange(width) % grid.n_blocks for width in hidden] +
              [out_geometry.index.dof_block])
    masks = [grid.chebyshev(layers[k + 1][:, None], layers[k][None, :])
             <= radius for k in range(len(layers) - 1)]
    return InfluenceMask(int(radius), masks, layers[1:-1])


############# rollout

def rollout(nets, u1, encodings):
    """apply nets in sequence, each fed with the previous output and the
    source encoding of its step

    @return final state
    """
    if len(nets) != len(encodings):
        raise DimensionMismatch(f'{len(nets)} networks for '
                                f'{len(encodings)} source encodings')
    u = np.asarray(u1, dtype=float)
    for k, (net, enc) in enumerate(zip(nets, encodings)):
        enc = np.asarray(enc, dtype=float)
        width = u.shape[-1] + enc.shape[-1]
        if net.d_in != width:
            raise DimensionMismatch(
                f'rollout step {k + 1}: network expects {net.d_in} inputs, '
                f'state and source give {width}')
        u = net.predict(np.concatenate((u, enc), axis=-1))
    return u


############# model files

def save_model(surrogate, path, history=None):
    """`path`.json header + `path`.bin weights (+ `path`.mask.bin)

    The weight blob holds little-endian float64 values in the order
    W1 (row-major, out x in), b1, W2, b2, ...
    """
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    net = surrogate.net
    blob = np.concatenate([p.ravel() for p in net.parameters()])
    blob.astype('<f8').tofile(path + '.bin')
    header = {
        'dims': net.dims,
        'slope': net.slope,
        'normalizer': surrogate.normalizer.to_dict(),
        'config': (surrogate.config.to_dict()
                   if surrogate.config is not None else None),
        'mask': None,
    }
    if net.masks is not None:
        bits = np.packbits(np.concatenate([m.ravel() for m in net.masks]))
        bits.tofile(path + '.mask.bin')
        header['mask'] = (surrogate.mask.descriptor() if surrogate.mask
                          else {'radius': None,
                                'shapes': [list(m.shape)
                                           for m in net.masks]})
    dump_json(path + '.json', header)
    if history is not None:
        write_csv(path + '.loss.csv',
                  np.column_stack((np.arange(len(history)), history)),
                  ['epoch', 'loss'])


def load_model(path):
    header = load_json(path + '.json')
    dims = header['dims']
    blob = np.fromfile(path + '.bin', dtype='<f8')
    expected = sum(dims[k + 1] * dims[k] + dims[k + 1]
                   for k in range(len(dims) - 1))
    if len(blob) != expected:
        raise DimensionMismatch(f'{path}.bin has {len(blob)} values, '
                                f'dims {dims} need {expected}')
    weights, biases, pos = [], [], 0
    for k in range(len(dims) - 1):
        size = dims[k + 1] * dims[k]
        weights.append(blob[pos:pos + size].reshape(dims[k + 1], dims[k]))
        pos += size
        biases.append(blob[pos:pos + dims[k + 1]].copy())
        pos += dims[k + 1]
    masks = None
    if header['mask'] is not None:
        shapes = [tuple(s) for s in header['mask']['shapes']]
        total = sum(r * c for r, c in shapes)
        bits = np.unpackbits(np.fromfile(path + '.mask.bin', dtype=np.uint8),
                             count=total).astype(bool)
        masks, pos = [], 0
        for rows, cols in shapes:
            masks.append(bits[pos:pos + rows * cols].reshape(rows, cols))
            pos += rows * cols
    net = SurrogateNet([W.copy() for W in weights], biases, header['slope'],
                       masks)
    config = (TrainConfig(**header['config']) if header['config'] is not None
              else None)
    norm = header['normalizer']
    return Surrogate(net, Normalizer(norm['x_mean'], norm['x_std'],
                                     norm['y_mean'], norm['y_std']), config)
