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
Local learning rules and the clamped/free phase schedule.

Learning happens at every iteration of a clamped phase: the change of a
neuron's rate between two consecutive iterations, times the rate of the
neuron on the other end of the synapse, is the weight update.
"""

# System imports
import dataclasses
import logging
from dataclasses import dataclass, field

# Pip installed imports
import numpy as np

# Local imports
from .network import NetworkState, PhaseConfig, stepper

STDP_RULES = ("delta-source", "delta-target")


def default_clamped_phase():
    return PhaseConfig(epsilon=0.2, beta=0.8, momentum=0.4, iterations=32, step_mode="momentum")

def default_free_phase():
    return PhaseConfig(epsilon=0.2, beta=0.0, momentum=0.0, iterations=32, step_mode="plain")


@dataclass
class LearnConfig:
    alpha: float = 0.001
    T: int = 10
    clamped_phase: PhaseConfig = field(default_factory=default_clamped_phase)
    free_phase: PhaseConfig = field(default_factory=default_free_phase)
    smoothing_alpha: float = 0.0
    learn_in_free_phase: bool = False
    stdp_rule: str = "delta-source"

    def validate(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative, got %s" % self.alpha)
        if self.T < 1:
            raise ValueError("T must be at least 1, got %s" % self.T)
        if self.smoothing_alpha < 0:
            raise ValueError("smoothing_alpha must be non-negative, got %s" % self.smoothing_alpha)
        if self.stdp_rule not in STDP_RULES:
            raise ValueError("unknown stdp rule %s (expected one of %s)" % (self.stdp_rule, ", ".join(STDP_RULES)))
        self.clamped_phase.validate()
        # a free phase of zero iterations is allowed and does nothing
        if self.free_phase.iterations != 0:
            self.free_phase.validate()
        return self

    def frozen(self, phases):
        """
        The test-time schedule: same dynamics, no learning, `phases` repetitions.
        """
        return dataclasses.replace(
            self,
            alpha=0.0,
            smoothing_alpha=0.0,
            learn_in_free_phase=False,
            T=phases,
        )

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("clamped_phase", "free_phase"):
            if isinstance(d.get(key), dict):
                d[key] = PhaseConfig(**d[key])
        return cls(**d)


def stdp_update(params, topo, rho_prev, rho_curr, alpha, rule="delta-source"):
    """
    dW[i][j] = alpha * (rho_curr_i - rho_prev_i) * rho_curr_j on connected
    pairs, db[i] = alpha * (rho_curr_i - rho_prev_i).  The delta-target rule
    puts the change on j instead: dW[i][j] = alpha * rho_curr_i * delta_j.
    """
    n = topo.n_total
    if rho_prev.shape != (n,) or rho_curr.shape != (n,):
        raise ValueError("rate vectors must have %s entries" % n)
    if alpha < 0:
        raise ValueError("alpha must be non-negative, got %s" % alpha)
    if alpha == 0:
        return params

    delta = rho_curr - rho_prev
    if rule == "delta-source":
        dW = np.outer(delta, rho_curr)
    elif rule == "delta-target":
        dW = np.outer(rho_curr, delta)
    else:
        raise ValueError("unknown stdp rule %s" % rule)

    dW *= topo.mask
    params.W += alpha * dW
    params.b += alpha * delta
    return params


def chl_expansion_check(rho_c_i, rho_c_j, rho_f_i, rho_f_j):
    """
    Both sides of
        rho_c_i rho_c_j - rho_f_i rho_f_j
            = rho_f_i d_j + rho_f_j d_i + d_i d_j,   d = rho_c - rho_f
    and their difference.
    """
    d_i = rho_c_i - rho_f_i
    d_j = rho_c_j - rho_f_j
    lhs = rho_c_i * rho_c_j - rho_f_i * rho_f_j
    rhs = rho_f_i * d_j + rho_f_j * d_i + d_i * d_j
    return lhs, rhs, lhs - rhs


def smoothing_update(params, topo, state, act, smoothing_alpha):
    """
    One gradient descent step on 0.5 * ||ds||^2 with respect to W and b, where
    ds = R(s) - s.  Flattens the path between fixed points.
    """
    if smoothing_alpha < 0:
        raise ValueError("smoothing_alpha must be non-negative, got %s" % smoothing_alpha)
    if smoothing_alpha == 0:
        return params

    r = act.rho(state.s)
    rp = act.rho_prime(state.s)
    ds = rp * (topo.field(params.W, r) + params.b) - state.s
    g = ds * rp

    # d(ds_i)/dW[j][i] = rho'(s_i) rho(s_j), so row j column i of the gradient
    dW = np.outer(r, g)
    dW *= topo.mask
    params.W -= smoothing_alpha * dW
    params.b -= smoothing_alpha * g
    return params


def _check_params_finite(params):
    if not (np.all(np.isfinite(params.W)) and np.all(np.isfinite(params.b))):
        raise FloatingPointError("non-finite parameters after learning update")


def _learning_steps(state, params, topo, act, sample, cfg, learn_cfg):
    step = stepper(cfg)
    rho_prev = act.rho(state.s)
    for ii in range(cfg.iterations):
        state = step(state, params, topo, act, sample, cfg)
        rho_curr = act.rho(state.s)
        stdp_update(params, topo, rho_prev, rho_curr, learn_cfg.alpha, learn_cfg.stdp_rule)
        smoothing_update(params, topo, state, act, learn_cfg.smoothing_alpha)
        rho_prev = rho_curr
    _check_params_finite(params)
    return state, params


def run_clamped_phase(state, params, topo, act, sample, learn_cfg):
    if sample is None or not sample.clamped:
        raise ValueError("a clamped phase needs a sample with at least one clamped neuron")
    cfg = learn_cfg.clamped_phase
    cfg.validate()
    if learn_cfg.alpha == 0 and learn_cfg.smoothing_alpha == 0:
        step = stepper(cfg)
        for ii in range(cfg.iterations):
            state = step(state, params, topo, act, sample, cfg)
        return state, params
    return _learning_steps(state, params, topo, act, sample, cfg, learn_cfg)


def run_free_phase(state, params, topo, act, learn_cfg):
    cfg = learn_cfg.free_phase
    if cfg.iterations == 0:
        return state, params
    cfg.validate()

    if cfg.momentum == 0:
        # a velocity would otherwise keep coasting with nothing to update it
        state = NetworkState(state.s, np.zeros_like(state.v))

    if learn_cfg.learn_in_free_phase and learn_cfg.alpha > 0:
        return _learning_steps(state, params, topo, act, None, cfg, dataclasses.replace(learn_cfg, smoothing_alpha=0.0))

    step = stepper(cfg)
    for ii in range(cfg.iterations):
        state = step(state, params, topo, act, None, cfg)
    return state, params


def present_sample(state, params, topo, act, sample, learn_cfg, on_phase=None):
    """
    T repetitions of a clamped phase followed by a free phase on one sample.
    The state is carried in and out, it is never reinitialized.  on_phase, if
    given, is called as on_phase(kind, t, state) after every phase.
    """
    learn_cfg.validate()
    for t in range(learn_cfg.T):
        state, params = run_clamped_phase(state, params, topo, act, sample, learn_cfg)
        if on_phase is not None:
            on_phase("clamped", t + 1, state)
        state, params = run_free_phase(state, params, topo, act, learn_cfg)
        if on_phase is not None:
            on_phase("free", t + 1, state)
    logging.debug("presented sample, T=%s", learn_cfg.T)
    return state, params
