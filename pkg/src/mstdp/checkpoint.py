#!/usr/bin/env python
#
# mstdp
# Copyright (C) 2022 the mstdp developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>

"""
Checkpoint persistence.

Binary layout, little-endian throughout:

    [offset]  [type]        [description]
    0         char[8]       magic "MSTDP001" (last three digits are the format version)
    8         u32           n_visible
    12        u32           n_hidden
    16        u64           presentation counter
    24        f64[n*n]      W, row-major (n = n_visible + n_hidden)
    ...       f64[n]        b
    ...       f64[n]        s
    ...       f64[n]        v
    ...       u32           length of the config echo
    ...       u8[]          config echo, UTF-8 JSON

Each checkpoint written by a training run is also recorded in a TinyDB ledger
next to it so the latest one can be found from the output directory alone.
"""

# System imports
import json
import logging
import os
import struct
from dataclasses import dataclass, field

# Pip installed imports
import numpy as np
from tinydb import TinyDB, Query

# Local imports
from .config import ExperimentConfig
from .mnist import FormatError, TruncatedError
from .network import NetworkState, NetworkTopology, Parameters

FORMAT_VERSION = 1
MAGIC_PREFIX = b"MSTDP"
MAGIC = MAGIC_PREFIX + b"%03d" % FORMAT_VERSION
HEADER = struct.Struct("<8sIIQ")
LENGTH = struct.Struct("<I")
FLOAT = np.dtype("<f8")

LEDGER_NAME = "mstdp.json"


class VersionError(FormatError):
    pass


@dataclass
class Checkpoint:
    topology: NetworkTopology
    params: Parameters
    state: NetworkState
    presentation: int = 0
    config: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def experiment(self):
        try:
            return ExperimentConfig.from_dict(self.config)
        except (AttributeError, TypeError) as e:
            raise FormatError("checkpoint configuration does not describe an experiment: %s" % e) from e

    def copy(self):
        return Checkpoint(
            self.topology,
            self.params.copy(),
            self.state.copy(),
            self.presentation,
            json.loads(json.dumps(self.config)),
            self.version,
        )


def to_bytes(ckpt):
    topo = ckpt.topology
    ckpt.params.check(topo)
    ckpt.state.check(topo)
    echo = json.dumps(ckpt.config, sort_keys=True).encode("utf-8")
    return b"".join((
        HEADER.pack(MAGIC, topo.n_visible, topo.n_hidden, ckpt.presentation),
        np.ascontiguousarray(ckpt.params.W, dtype=FLOAT).tobytes(),
        np.ascontiguousarray(ckpt.params.b, dtype=FLOAT).tobytes(),
        np.ascontiguousarray(ckpt.state.s, dtype=FLOAT).tobytes(),
        np.ascontiguousarray(ckpt.state.v, dtype=FLOAT).tobytes(),
        LENGTH.pack(len(echo)),
        echo,
    ))


def from_bytes(raw, source="<bytes>"):
    if len(raw) < HEADER.size:
        raise TruncatedError("%s is too short to hold a checkpoint header" % source)

    magic, n_visible, n_hidden, presentation = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        if magic.startswith(MAGIC_PREFIX):
            raise VersionError("%s has checkpoint format %r, expected %r" % (source, magic, MAGIC))
        raise FormatError("%s is not a checkpoint (magic %r)" % (source, magic))

    n = n_visible + n_hidden
    offset = HEADER.size
    arrays_size = (n * n + 3 * n) * FLOAT.itemsize
    if len(raw) < offset + arrays_size + LENGTH.size:
        raise TruncatedError(
            "%s holds %s bytes, dims %sx%s need at least %s" % (source, len(raw), n_visible, n_hidden, offset + arrays_size + LENGTH.size)
        )

    def take(count):
        nonlocal offset
        values = np.frombuffer(raw, dtype=FLOAT, count=count, offset=offset).astype(np.float64)
        offset += count * FLOAT.itemsize
        return values

    W = take(n * n).reshape(n, n)
    b = take(n)
    s = take(n)
    v = take(n)

    echo_length, = LENGTH.unpack_from(raw, offset)
    offset += LENGTH.size
    if len(raw) != offset + echo_length:
        raise TruncatedError(
            "%s size mismatch: config echo of %s bytes announced, %s present" % (source, echo_length, len(raw) - offset)
        )
    config = json.loads(raw[offset:].decode("utf-8")) if echo_length else {}

    topo = NetworkTopology(n_visible, n_hidden, deterministic=config.get("deterministic", False))
    if np.any(W[~topo.mask] != 0.0):
        raise FormatError("%s has weights on unconnected pairs" % source)
    return Checkpoint(topo, Parameters(W, b), NetworkState(s, v), presentation, config)


def save_checkpoint(ckpt, path):
    with open(path, "wb") as f:
        f.write(to_bytes(ckpt))
    logging.info("saved checkpoint %s at presentation %s", path, ckpt.presentation)


def load_checkpoint(path):
    with open(path, "rb") as f:
        raw = f.read()
    ckpt = from_bytes(raw, source=path)
    logging.info("loaded checkpoint %s at presentation %s", path, ckpt.presentation)
    return ckpt


def record_checkpoint(output_dir, path, presentation, metrics=None):
    """
    Insert or update the ledger entry for a checkpoint file.
    """
    record = {
        'type': 'checkpoint',
        'path': os.path.abspath(path),
        'presentation': int(presentation),
    }
    for key, value in (metrics or {}).items():
        record[key] = float(value)

    db = TinyDB(os.path.join(output_dir, LEDGER_NAME))
    try:
        Q = Query()
        if db.search((Q.type == "checkpoint") & (Q.path == record['path'])):
            logging.debug("Updating ledger record %s", record['path'])
            db.update(record, (Q.type == "checkpoint") & (Q.path == record['path']))
        else:
            logging.debug("Inserting ledger record %s", record['path'])
            db.insert(record)
    finally:
        db.close()


def latest_checkpoint(output_dir):
    ledger = os.path.join(output_dir, LEDGER_NAME)
    if not os.path.exists(ledger):
        raise FileNotFoundError("no checkpoint ledger in %s" % output_dir)

    db = TinyDB(ledger)
    try:
        Q = Query()
        result = db.search(Q.type == "checkpoint")
    finally:
        db.close()
    if not result:
        raise FileNotFoundError("checkpoint ledger in %s is empty" % output_dir)
    return max(result, key=lambda x: (x['presentation'], x.doc_id))['path']


def resolve_checkpoint(path):
    """
    A checkpoint file, or a training output directory holding a ledger.
    """
    path = os.path.expanduser(path)
    if os.path.isdir(path):
        return latest_checkpoint(path)
    return path
