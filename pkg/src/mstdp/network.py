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
Network representation and relaxation dynamics.

Every neuron i carries an internal state s_i and a velocity v_i.  The pressure
on neuron i from the rest of the network is

    R_i(s) = rho'(s_i) * (sum_{j != i} W[j][i] * rho(s_j) + b_i)

and the network relaxes by explicit Euler steps of the leaky integrator
ds/dt = eps * (R(s) - s), optionally through a momentum velocity, while
clamped visible neurons feel an additional pull beta * (target - s).
"""

# System imports
import logging
from dataclasses import dataclass
from typing import Optional

# Pip installed imports
import numpy as np
from scipy.special import expit

STEP_MODES = ("momentum", "plain")
CLAMP_MODES = ("through_velocity", "direct")

# Floor used wherever a norm ends up in a denominator
TINY = 1e-300


def _sigmoid4(x):
    return expit(4.0 * x)

def _sigmoid4_prime(x):
    r = expit(4.0 * x)
    return 4.0 * r * (1.0 - r)

def _sigmoid(x):
    return expit(x)

def _sigmoid_prime(x):
    r = expit(x)
    return r * (1.0 - r)

def _tanh_prime(x):
    return 1.0 - np.tanh(x) ** 2

ACTIVATIONS = {
    "sigmoid4": (_sigmoid4, _sigmoid4_prime),
    "sigmoid": (_sigmoid, _sigmoid_prime),
    "tanh": (np.tanh, _tanh_prime),
}


class Activation:
    """
    The neuron nonlinearity rho together with its exact derivative.
    """
    def __init__(self, name="sigmoid4"):
        if name not in ACTIVATIONS:
            raise ValueError("unknown activation %s (expected one of %s)" % (name, ", ".join(ACTIVATIONS)))
        self.name = name
        self.rho, self.rho_prime = ACTIVATIONS[name]

    def __repr__(self):
        return "Activation(%r)" % self.name


def activation_eval(x, act):
    return float(act.rho(x)), float(act.rho_prime(x))


class NetworkTopology:
    """
    Visible/hidden partition and connectivity mask.

    Visible neurons come first.  Visible neurons are not connected to each
    other, no neuron is connected to itself, every other pair is connected
    in both directions (with independent weights).
    """
    def __init__(self, n_visible, n_hidden, deterministic=False):
        if n_visible < 0 or n_hidden < 0:
            raise ValueError("neuron counts must be non-negative")
        if n_visible + n_hidden == 0:
            raise ValueError("network must have at least one neuron")
        self.n_visible = int(n_visible)
        self.n_hidden = int(n_hidden)
        self.deterministic = bool(deterministic)

        mask = np.ones((self.n_total, self.n_total), dtype=bool)
        mask[:self.n_visible, :self.n_visible] = False
        np.fill_diagonal(mask, False)
        self.mask = mask

    @property
    def n_total(self):
        return self.n_visible + self.n_hidden

    def field(self, W, r):
        """
        Incoming drive sum_j W[j][i] * r_j for every neuron i.
        """
        if self.deterministic:
            # numpy's own loop, fixed summation order regardless of BLAS threading
            return np.einsum("ji,j->i", W, r, optimize=False)
        return W.T @ r

    def __eq__(self, other):
        return (
            isinstance(other, NetworkTopology)
            and self.n_visible == other.n_visible
            and self.n_hidden == other.n_hidden
        )

    def __repr__(self):
        return "NetworkTopology(n_visible=%s, n_hidden=%s)" % (self.n_visible, self.n_hidden)


@dataclass
class Parameters:
    W: np.ndarray
    b: np.ndarray

    def copy(self):
        return Parameters(self.W.copy(), self.b.copy())

    def check(self, topo):
        n = topo.n_total
        if self.W.shape != (n, n) or self.b.shape != (n,):
            raise ValueError(
                "parameter shapes W%s b%s don't match topology with %s neurons" % (self.W.shape, self.b.shape, n)
            )

    def apply_mask(self, topo):
        self.W[~topo.mask] = 0.0
        return self


@dataclass
class NetworkState:
    s: np.ndarray
    v: np.ndarray

    def copy(self):
        return NetworkState(self.s.copy(), self.v.copy())

    def check(self, topo):
        n = topo.n_total
        if self.s.shape != (n,) or self.v.shape != (n,):
            raise ValueError(
                "state shapes s%s v%s don't match topology with %s neurons" % (self.s.shape, self.v.shape, n)
            )


@dataclass
class DataSample:
    """
    Clamp targets over the visible neurons and the mask of neurons that feel them.
    """
    targets: np.ndarray
    clamp_mask: np.ndarray

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.clamp_mask = np.asarray(self.clamp_mask, dtype=bool)
        if self.targets.shape != self.clamp_mask.shape or self.targets.ndim != 1:
            raise ValueError("targets and clamp_mask must be vectors of the same length")
        if np.any(self.targets < 0.0) or np.any(self.targets > 1.0):
            raise ValueError("clamp targets must lie in [0, 1]")

    @property
    def clamped(self):
        return bool(self.clamp_mask.any())


@dataclass
class PhaseConfig:
    epsilon: float = 0.2
    beta: float = 0.0
    momentum: float = 0.0
    iterations: int = 32
    step_mode: str = "momentum"
    clamp_mode: str = "through_velocity"

    def validate(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive, got %s" % self.epsilon)
        if self.beta < 0:
            raise ValueError("beta must be non-negative, got %s" % self.beta)
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError("momentum must lie in [0, 1], got %s" % self.momentum)
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1, got %s" % self.iterations)
        if self.step_mode not in STEP_MODES:
            raise ValueError("unknown step mode %s" % self.step_mode)
        if self.clamp_mode not in CLAMP_MODES:
            raise ValueError("unknown clamp mode %s" % self.clamp_mode)
        return self


@dataclass
class TraceRecord:
    step: int
    energy: float
    cost: float
    residual: float
    neurons: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None

    def as_dict(self):
        record = {
            "step": self.step,
            "energy": self.energy,
            "cost": self.cost,
            "residual": self.residual,
        }
        if self.s is not None:
            for idx, value in zip(self.neurons, self.s):
                record[f"s_{idx}"] = float(value)
        return record


def random_parameters(topo, init_range, rng):
    """
    Uniform U(-init_range, init_range) weights on connected pairs and biases.
    """
    if not init_range > 0:
        raise ValueError("init_range must be positive, got %s" % init_range)
    n = topo.n_total
    W = rng.uniform(-init_range, init_range, size=(n, n))
    W[~topo.mask] = 0.0
    b = rng.uniform(-init_range, init_range, size=n)
    return Parameters(W, b)


def random_state(topo, rng):
    return NetworkState(rng.uniform(0.0, 1.0, size=topo.n_total), np.zeros(topo.n_total))


def _check(state, params, topo):
    state.check(topo)
    params.check(topo)


def _check_finite(state, what="step"):
    if not (np.all(np.isfinite(state.s)) and np.all(np.isfinite(state.v))):
        raise FloatingPointError("non-finite network state after %s" % what)


def clamp_pull(state, sample, topo):
    """
    Per-neuron (target - s) on clamped visible neurons, zero elsewhere.
    Returns None when nothing is clamped.
    """
    if sample is None or not sample.clamped:
        return None
    if sample.targets.shape != (topo.n_visible,):
        raise ValueError(
            "sample covers %s neurons but the network has %s visible neurons" % (sample.targets.shape[0], topo.n_visible)
        )
    pull = np.zeros(topo.n_total)
    visible = state.s[:topo.n_visible]
    pull[:topo.n_visible] = np.where(sample.clamp_mask, sample.targets - visible, 0.0)
    return pull


def pressure(state, params, topo, act):
    _check(state, params, topo)
    r = act.rho(state.s)
    return act.rho_prime(state.s) * (topo.field(params.W, r) + params.b)


def max_residual(state, params, topo, act):
    return float(np.max(np.abs(pressure(state, params, topo, act) - state.s)))


def energy(params, state, topo, act):
    _check(state, params, topo)
    r = act.rho(state.s)
    return float(
        0.5 * state.s @ state.s
        - 0.5 * r @ topo.field(params.W, r)
        - params.b @ r
    )


def clamp_cost(sample, state, beta):
    if beta < 0:
        raise ValueError("beta must be non-negative, got %s" % beta)
    if sample is None or not sample.clamped or beta == 0:
        return 0.0
    n_visible = sample.targets.shape[0]
    diff = (sample.targets - state.s[:n_visible])[sample.clamp_mask]
    return float(0.5 * beta * diff @ diff)


def total_energy(params, state, topo, act, sample, beta):
    return energy(params, state, topo, act) + clamp_cost(sample, state, beta)


def drive(state, params, topo, act, sample, cfg):
    """
    The per-neuron drive R(s) - s, plus the clamp pull when it goes through
    the velocity.  The pull is scaled by beta/eps so that eps * drive moves a
    clamped neuron by beta * (target - s), which is what a plain step does.
    """
    d = pressure(state, params, topo, act) - state.s
    if cfg.clamp_mode == "through_velocity" and cfg.beta > 0:
        pull = clamp_pull(state, sample, topo)
        if pull is not None:
            d = d + (cfg.beta / cfg.epsilon) * pull
    return d


def _direct_pull(state, sample, topo, cfg):
    if cfg.clamp_mode != "direct" or cfg.beta == 0:
        return None
    return clamp_pull(state, sample, topo)


def plain_step(state, params, topo, act, sample, cfg):
    """
    One Euler step of the leaky integrator; the velocity is left alone.
    """
    cfg.validate()
    pull = _direct_pull(state, sample, topo, cfg)
    s = state.s + cfg.epsilon * drive(state, params, topo, act, sample, cfg)
    if pull is not None:
        s = s + cfg.beta * pull
    new_state = NetworkState(s, state.v.copy())
    _check_finite(new_state, "plain step")
    return new_state


def momentum_step(state, params, topo, act, sample, cfg):
    """
    v <- m * drive + (1 - m) * v, then s <- s + eps * v.
    """
    cfg.validate()
    pull = _direct_pull(state, sample, topo, cfg)
    m = cfg.momentum
    v = m * drive(state, params, topo, act, sample, cfg) + (1.0 - m) * state.v
    s = state.s + cfg.epsilon * v
    if pull is not None:
        s = s + cfg.beta * pull
    new_state = NetworkState(s, v)
    _check_finite(new_state, "momentum step")
    return new_state


def stepper(cfg):
    if cfg.step_mode == "plain":
        return plain_step
    return momentum_step


def relax(state, params, topo, act, sample, cfg, record=True, watch=None):
    """
    Run cfg.iterations steps without reinitializing s or v.  When record is
    set every step appends a TraceRecord with the energy, clamp cost and max
    residual of the new state; watch selects neurons whose s is recorded too.
    """
    cfg.validate()
    step = stepper(cfg)
    if watch is not None:
        watch = np.atleast_1d(np.asarray(watch, dtype=int))

    trace = []
    for ii in range(cfg.iterations):
        try:
            state = step(state, params, topo, act, sample, cfg)
        except FloatingPointError as e:
            raise FloatingPointError("%s (iteration %s)" % (e, ii + 1)) from e
        if record:
            trace.append(TraceRecord(
                step=ii + 1,
                energy=energy(params, state, topo, act),
                cost=clamp_cost(sample, state, cfg.beta),
                residual=max_residual(state, params, topo, act),
                neurons=watch,
                s=None if watch is None else state.s[watch].copy(),
            ))
    return state, trace


def energy_gradient(params, state, topo, act):
    """
    dE/ds with the weights symmetrized, the exact gradient of energy().
    """
    _check(state, params, topo)
    r = act.rho(state.s)
    W_sym = 0.5 * (params.W + params.W.T)
    return state.s - act.rho_prime(state.s) * (topo.field(W_sym, r) + params.b)


def _relative_error(analytic, numeric):
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), TINY)
    return float(np.max(np.abs(analytic - numeric))) / scale


def finite_difference_gradient(params, state, topo, act, h):
    n = topo.n_total
    grad = np.zeros(n)
    for i in range(n):
        s = state.s.copy()

        s[i] = state.s[i] + h
        fplus = energy(params, NetworkState(s, state.v), topo, act)

        s[i] = state.s[i] - h
        fminus = energy(params, NetworkState(s, state.v), topo, act)

        # Centered differences
        grad[i] = (fplus - fminus) / (2 * h)
    return grad


def energy_gradient_check(params, topo, act, state, h=1e-5):
    """
    Max relative error between the analytic symmetrized gradient and central
    finite differences of energy() at step h.
    """
    if not h > 0:
        raise ValueError("finite difference step must be positive, got %s" % h)
    if topo.n_total > 20:
        logging.debug("gradient check on %s neurons will be slow", topo.n_total)

    analytic = energy_gradient(params, state, topo, act)
    error = _relative_error(analytic, finite_difference_gradient(params, state, topo, act, h))
    coarse_error = _relative_error(analytic, finite_difference_gradient(params, state, topo, act, 10 * h))
    if error > coarse_error:
        logging.warning(
            "finite difference error grows as h shrinks (%s at h=%s, %s at h=%s), step is cancellation dominated",
            error, h, coarse_error, 10 * h
        )
    return error
