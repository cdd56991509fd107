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

# System imports
import logging
import re

# Pip installed imports
import numpy as np
import pandas as pd

# Local imports
from .mnist import FormatError, TruncatedError, decode_image, encode_sample
from .network import (
    TINY,
    Activation,
    DataSample,
    NetworkState,
    TraceRecord,
    clamp_cost,
    energy,
    max_residual,
    stepper,
)
from .plasticity import present_sample

TRACE_COLUMNS = ("step", "energy", "cost", "residual")


def asymmetry_metric(params):
    """
    ||W - W^T||_F / (2 ||W||_F), 0 for symmetric W and 1 for antisymmetric W.
    """
    W = params.W
    norm = max(float(np.linalg.norm(W)), TINY)
    return float(np.linalg.norm(W - W.T)) / (2.0 * norm)


def fixed_point_residual(state, params, topo, act):
    return max_residual(state, params, topo, act)


def step_response_trace(params, topo, act, neuron_index, clamp_on_steps, clamp_off_steps, cfg, target=1.0, state=None):
    """
    Pull one visible neuron towards `target` for clamp_on_steps, then release
    it for clamp_off_steps, recording its state after every step.
    """
    if not 0 <= neuron_index < topo.n_visible:
        raise ValueError("step response needs a visible neuron, got %s" % neuron_index)
    if state is None:
        state = NetworkState(np.zeros(topo.n_total), np.zeros(topo.n_total))

    targets = np.zeros(topo.n_visible)
    targets[neuron_index] = target
    clamp_mask = np.zeros(topo.n_visible, dtype=bool)
    clamp_mask[neuron_index] = True
    sample = DataSample(targets, clamp_mask)

    step = stepper(cfg)
    watch = np.array([neuron_index])
    trace = []
    for ii in range(clamp_on_steps + clamp_off_steps):
        current = sample if ii < clamp_on_steps else None
        state = step(state, params, topo, act, current, cfg)
        trace.append(TraceRecord(
            step=ii + 1,
            energy=energy(params, state, topo, act),
            cost=clamp_cost(current, state, cfg.beta),
            residual=max_residual(state, params, topo, act),
            neurons=watch,
            s=state.s[watch].copy(),
        ))
    return trace


def overshoot(values):
    """
    How far the peak of a trajectory lies above where it ends up.
    """
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        return 0.0
    return float(np.max(values) - values[-1])


def detect_non_convergence(trace, window=16, tolerance=1e-10):
    """
    True when the residual has not decreased over the last `window` records
    and is still above tolerance.
    """
    if len(trace) <= window:
        return False
    first = trace[-window - 1].residual
    last = trace[-1].residual
    return last > tolerance and last >= first


def phase_snapshots(ckpt, image, label=None, phases=2, cfg=None):
    """
    The visible pixel state of one presentation: where the network starts,
    then the end of every clamped and free phase.  Runs on a copy, nothing in
    ckpt is changed.
    """
    work = ckpt.copy()
    if cfg is None:
        cfg = work.experiment()
    learn = cfg.learn.frozen(phases)
    sample = encode_sample(image, label)

    snapshots = [("start", 0, decode_image(work.state.s))]

    def on_phase(kind, t, state):
        snapshots.append((kind, t, decode_image(state.s)))

    present_sample(work.state, work.params, work.topology, Activation(cfg.activation), sample, learn, on_phase=on_phase)
    return snapshots


def emit_csv(traces, path, columns=None):
    records = [t.as_dict() if isinstance(t, TraceRecord) else dict(t) for t in traces]
    if columns is None:
        columns = list(records[0].keys()) if records else list(TRACE_COLUMNS)
    pd.DataFrame.from_records(records, columns=columns).to_csv(path, index=False)
    logging.info("wrote %s records to %s", len(records), path)


def emit_pgm(image, path):
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM images must be 2-D, got shape %s" % (image.shape,))
    if np.any(image < 0) or np.any(image > 255):
        raise ValueError("PGM pixel values must lie in 0-255")
    height, width = image.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (width, height))
        f.write(image.astype(np.uint8).tobytes())


_PGM_HEADER = re.compile(rb"P5(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)\s")


def read_pgm(path):
    with open(path, "rb") as f:
        raw = f.read()
    match = _PGM_HEADER.match(raw)
    if match is None:
        raise FormatError("%s is not a binary PGM (P5) file" % path)
    width, height, maxval = (int(x) for x in match.groups())
    if maxval != 255:
        raise FormatError("%s has maxval %s, only 255 is supported" % (path, maxval))
    payload = raw[match.end():]
    if len(payload) < width * height:
        raise TruncatedError("%s holds %s pixels, header announces %s" % (path, len(payload), width * height))
    return np.frombuffer(payload, dtype=np.uint8, count=width * height).reshape(height, width).copy()
