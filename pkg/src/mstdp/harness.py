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
MNIST experiments: training, classification, conditional generation and
evaluation of a single network whose visible neurons hold both the pixels
and the one-hot label.
"""

# System imports
import logging
import os
import time

# Pip installed imports
import numpy as np

# Local imports
from . import checkpoint as ckpt_io
from .checkpoint import Checkpoint
from .diagnostics import emit_csv
from .mnist import N_PIXELS, N_VISIBLE, decode_image, encode_sample, label_sample
from .network import (
    Activation,
    NetworkTopology,
    clamp_cost,
    energy,
    max_residual,
    random_parameters,
    random_state,
)
from .plasticity import present_sample, run_free_phase

METRIC_COLUMNS = ("presentation_index", "clamp_cost", "energy", "residual", "elapsed")


def initialize(cfg, rng):
    topo = NetworkTopology(N_VISIBLE, cfg.n_hidden, deterministic=cfg.deterministic)
    params = random_parameters(topo, cfg.init_range, rng)
    state = random_state(topo, rng)
    return Checkpoint(topo, params, state, 0, cfg.to_dict())


def _metrics(ckpt, act, sample, beta, presentation, elapsed):
    return {
        "presentation_index": presentation,
        "clamp_cost": clamp_cost(sample, ckpt.state, beta),
        "energy": energy(ckpt.params, ckpt.state, ckpt.topology, act),
        "residual": max_residual(ckpt.state, ckpt.params, ckpt.topology, act),
        "elapsed": elapsed,
    }


def _write_checkpoint(ckpt, output_dir, name, metrics):
    path = os.path.join(output_dir, name)
    ckpt_io.save_checkpoint(ckpt, path)
    ckpt_io.record_checkpoint(output_dir, path, ckpt.presentation, {
        k: v for k, v in (metrics or {}).items() if k in ("clamp_cost", "energy", "residual")
    })
    return path


def train(cfg, data, output_dir=None, config_echo=None):
    """
    Initialize a network and present `cfg.presentations` samples drawn from
    the first `cfg.train_count` items of data.  The network state carries
    over from one sample to the next.
    """
    cfg.validate()
    if len(data) == 0:
        raise ValueError("no training data")

    rng = np.random.default_rng(cfg.seed)
    ckpt = initialize(cfg, rng)
    if config_echo is not None:
        ckpt.config = dict(config_echo)
    act = Activation(cfg.activation)
    learn = cfg.learn
    count = min(cfg.train_count, len(data))
    if count < cfg.train_count:
        logging.warning("only %s training samples available, %s requested", count, cfg.train_count)

    if output_dir is not None:
        if not os.path.exists(output_dir):
            logging.info("Creating output directory %s", output_dir)
            os.makedirs(output_dir)

    logging.info(
        "training %s hidden neurons on %s samples for %s presentations",
        cfg.n_hidden, count, cfg.presentations
    )
    metrics = []
    last_metrics = None
    start = time.time()
    for n in range(cfg.presentations):
        if cfg.order == "cyclic":
            k = n % count
        else:
            k = int(rng.integers(count))
        sample = encode_sample(data.images[k], int(data.labels[k]))

        try:
            ckpt.state, ckpt.params = present_sample(ckpt.state, ckpt.params, ckpt.topology, act, sample, learn)
        except FloatingPointError as e:
            raise FloatingPointError("%s at presentation %s" % (e, n)) from e
        ckpt.presentation = n + 1

        if cfg.metrics_interval and ckpt.presentation % cfg.metrics_interval == 0:
            last_metrics = _metrics(ckpt, act, sample, learn.clamped_phase.beta, ckpt.presentation, time.time() - start)
            metrics.append(last_metrics)
            logging.info(
                "presentation %s: clamp cost %.5f energy %.5f residual %.3g",
                ckpt.presentation, last_metrics["clamp_cost"], last_metrics["energy"], last_metrics["residual"]
            )

        if output_dir is not None and cfg.checkpoint_interval and ckpt.presentation % cfg.checkpoint_interval == 0:
            _write_checkpoint(ckpt, output_dir, "ckpt_%08d.bin" % ckpt.presentation, last_metrics)

    logging.info("training finished after %s presentations in %.1f seconds", ckpt.presentation, time.time() - start)

    if output_dir is not None:
        _write_checkpoint(ckpt, output_dir, "final.bin", last_metrics)
        emit_csv(metrics, os.path.join(output_dir, "metrics.csv"), columns=list(METRIC_COLUMNS))

    return ckpt


def _check_topology(ckpt):
    if ckpt.topology.n_visible != N_VISIBLE:
        raise ValueError(
            "checkpoint has %s visible neurons, the MNIST encoding needs %s" % (ckpt.topology.n_visible, N_VISIBLE)
        )


def classify(ckpt, image, cfg=None):
    """
    Clamp the pixels only, run the test schedule (the training schedule with
    learning switched off) and read the label neurons.  The checkpoint state
    is carried forward like in training.  cfg replaces the checkpoint's own
    experiment settings when given.
    """
    _check_topology(ckpt)
    if cfg is None:
        cfg = ckpt.experiment()
    act = Activation(cfg.activation)
    sample = encode_sample(image, None)

    ckpt.state, ckpt.params = present_sample(
        ckpt.state, ckpt.params, ckpt.topology, act, sample, cfg.learn.frozen(cfg.test_phases)
    )

    labels = ckpt.state.s[N_PIXELS:N_VISIBLE].copy()
    if cfg.readout == "rho":
        labels = act.rho(labels)
    # argmax picks the lowest index on ties
    return int(np.argmax(labels)), labels


def generate(ckpt, digit=None, seed=0, cfg=None):
    """
    Start from a random state, clamp the one-hot label of `digit` and read
    the pixel neurons after a few clamped and free phases.  Without a digit
    the network only relaxes freely from the random state.
    """
    _check_topology(ckpt)
    if cfg is None:
        cfg = ckpt.experiment()
    act = Activation(cfg.activation)
    rng = np.random.default_rng(seed)
    state = random_state(ckpt.topology, rng)
    learn = cfg.learn.frozen(cfg.generate_phases)

    if digit is None:
        for t in range(learn.T):
            state, _ = run_free_phase(state, ckpt.params, ckpt.topology, act, learn)
    else:
        state, _ = present_sample(state, ckpt.params, ckpt.topology, act, label_sample(digit), learn)

    return decode_image(state.s)


def evaluate(ckpt, data, limit, cfg=None):
    if limit < 1:
        raise ValueError("limit must be at least 1, got %s" % limit)
    if limit > len(data):
        raise ValueError("limit %s exceeds the %s available samples" % (limit, len(data)))

    hits = 0
    for ii in range(limit):
        digit, _ = classify(ckpt, data.images[ii], cfg=cfg)
        if digit == int(data.labels[ii]):
            hits += 1
        if (ii + 1) % 100 == 0:
            logging.info("evaluated %s/%s, accuracy so far %.4f", ii + 1, limit, hits / (ii + 1))
    return hits / limit
