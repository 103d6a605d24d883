"""Save/load fracnet artifacts: hashes, JSON documents, arrays and manifests."""

import os
import hashlib
import json

import numpy as np
from scipy import sparse


class StorageError(Exception):
    """Exception class for corrupted or unreadable artifact files"""
    pass


def get_md5(input_data):
    """return md5 from string or unicode"""
    byte_data = input_data.encode("utf-8")
    return hashlib.md5(byte_data).hexdigest()


def _to_builtin(obj):
    """`default` hook for json: convert numpy values to python ones"""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError('Object of type %s is not JSON serializable' %
                    obj.__class__.__name__)


class JSONCodec():
    """codec used for every JSON document written by fracnet

    Keys are sorted so that equal content gives byte-identical files.
    Floats are written with `repr`, which round-trips exactly.
    """
    def __init__(self, indent=2):
        self.encoder = json.JSONEncoder(sort_keys=True, indent=indent,
                                        default=_to_builtin)
        self.decoder = json.JSONDecoder()

    def encode(self, data):
        return self.encoder.encode(data)

    def decode(self, data):
        return self.decoder.decode(data)


def dump_json(path, data, codec=None):
    codec = codec if codec else JSONCodec()
    with open(path, 'w', encoding='utf-8') as fp:
        fp.write(codec.encode(data))
        fp.write('\n')


def load_json(path, codec=None):
    codec = codec if codec else JSONCodec()
    with open(path, 'r', encoding='utf-8') as fp:
        text = fp.read()
    try:
        return codec.decode(text)
    except ValueError as error:
        fname = os.path.abspath(path)
        msg = f"{error.args[0]}\nInvalid JSON data in {fname}\n"
        raise StorageError(msg)


def write_csv(path, matrix, header, fmt='%.17g'):
    """write 2-D numeric data, one row per line, with a header line"""
    data = np.atleast_2d(np.asarray(matrix, dtype=float))
    np.savetxt(path, data, fmt=fmt, delimiter=',', header=','.join(header),
               comments='')


def read_csv(path):
    """@return (header, 2-D array)"""
    with open(path, 'r', encoding='utf-8') as fp:
        header = fp.readline().strip().split(',')
    data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    return header, data


def write_coo(path, matrix):
    """sparse matrix as text, first line `rows cols nnz`, then `i j value`"""
    coo = sparse.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, 'w', encoding='utf-8') as fp:
        fp.write('%d %d %d\n' % (coo.shape[0], coo.shape[1], coo.nnz))
        for k in order:
            fp.write('%d %d %r\n' % (coo.row[k], coo.col[k],
                                     float(coo.data[k])))


def read_coo(path):
    with open(path, 'r', encoding='utf-8') as fp:
        n_rows, n_cols, nnz = (int(v) for v in fp.readline().split())
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        for k, line in enumerate(fp):
            i, j, val = line.split()
            rows[k], cols[k], vals[k] = int(i), int(j), float(val)
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))


class Manifest(object):
    """JSON record of pipeline stages saved in an output directory

    While any stage is missing or failed the manifest says
    `"complete": false`, so partial artifacts are never mistaken for a
    finished run.
    """
    FILENAME = 'manifest.json'

    def __init__(self, dirname, codec=None):
        self.name = os.path.join(dirname, self.FILENAME)
        self.codec = codec if codec else JSONCodec()
        if os.path.exists(self.name):
            self._db = load_json(self.name, self.codec)
        else:
            self._db = {'complete': False, 'stages': {}}

    @property
    def complete(self):
        return self._db['complete']

    def start(self, stages):
        """register stages to be executed, other stages keep their status"""
        self._db['complete'] = False
        for name in stages:
            self._db['stages'][name] = 'pending'
        self.dump()

    def set(self, stage, status):
        self._db['stages'][stage] = status

    def get(self, stage):
        """@return: (string) or (None) if stage not registered"""
        return self._db['stages'].get(stage, None)

    def finish(self, success):
        """complete only if this run succeeded and no stage is left behind"""
        done = all(status in ('success', 'skipped')
                   for status in self._db['stages'].values())
        self._db['complete'] = bool(success) and done
        self.dump()

    def dump(self):
        """save manifest content in file"""
        dirname = os.path.dirname(self.name)
        if dirname:
            os.makedirs(dirname, exist_ok=True)
        dump_json(self.name, self._db, self.codec)
