# System imports
import logging

# Pip installed imports
import numpy as np
import pytest

# Local imports
from mstdp.network import (
    Activation,
    DataSample,
    NetworkState,
    NetworkTopology,
    PhaseConfig,
    activation_eval,
    clamp_cost,
    drive,
    energy,
    energy_gradient,
    energy_gradient_check,
    finite_difference_gradient,
    max_residual,
    momentum_step,
    plain_step,
    pressure,
    relax,
    total_energy,
)

from conftest import small_network, zero_network

SIGMOID4 = Activation("sigmoid4")


def test_activation_at_zero():
    rho, rho_prime = activation_eval(0.0, SIGMOID4)
    assert rho == pytest.approx(0.5)
    assert rho_prime == pytest.approx(1.0)


def test_activation_saturates():
    rho, rho_prime = activation_eval(50.0, SIGMOID4)
    assert rho == pytest.approx(1.0)
    assert rho_prime == pytest.approx(0.0, abs=1e-12)
    # no overflow warnings far out either
    assert activation_eval(-1e6, SIGMOID4) == (0.0, 0.0)


def test_activation_closed_form():
    rho, rho_prime = activation_eval(0.25, SIGMOID4)
    assert rho == pytest.approx(0.731059, abs=1e-6)
    assert rho_prime == pytest.approx(0.786448, abs=1e-6)


@pytest.mark.parametrize("name", ["sigmoid4", "sigmoid", "tanh"])
def test_activation_derivative_matches_finite_differences(name):
    act = Activation(name)
    x = np.linspace(-3.0, 3.0, 61)
    h = 1e-5
    numeric = (act.rho(x + h) - act.rho(x - h)) / (2 * h)
    np.testing.assert_allclose(act.rho_prime(x), numeric, atol=1e-8)
    assert np.all(np.diff(act.rho(x)) > 0)
    assert np.all(act.rho_prime(x) > 0)


def test_unknown_activation():
    with pytest.raises(ValueError):
        Activation("relu")


def test_topology_mask():
    topo = NetworkTopology(3, 4)
    mask = topo.mask
    assert mask.shape == (7, 7)
    assert not mask.diagonal().any()
    assert not mask[:3, :3].any()
    assert mask[:3, 3:].all() and mask[3:, :3].all()
    hidden = mask[3:, 3:]
    assert hidden.sum() == 4 * 3
    np.testing.assert_array_equal(mask, mask.T)


def test_topology_without_hidden_neurons():
    topo = NetworkTopology(5, 0)
    assert not topo.mask.any()


def test_pressure_zero_weights(rng):
    topo, params, state = zero_network(2, 3)
    state.s[:] = rng.uniform(-1, 1, size=5)
    np.testing.assert_array_equal(pressure(state, params, topo, SIGMOID4), 0.0)


def test_pressure_uses_incoming_weights():
    topo, params, state = zero_network(0, 2)
    params.W[1][0] = 1.0
    R = pressure(state, params, topo, SIGMOID4)
    np.testing.assert_allclose(R, [0.5, 0.0])


def test_pressure_bias_only():
    topo, params, state = zero_network(1, 2)
    params.b[2] = 0.3
    assert pressure(state, params, topo, SIGMOID4)[2] == pytest.approx(0.3)


def test_pressure_dimension_mismatch():
    topo, params, state = zero_network(1, 2)
    with pytest.raises(ValueError):
        pressure(NetworkState(np.zeros(4), np.zeros(4)), params, topo, SIGMOID4)


def test_energy_examples(rng):
    topo, params, state = zero_network(0, 2)
    assert energy(params, state, topo, SIGMOID4) == 0.0

    state.s[:] = rng.uniform(-1, 1, size=2)
    assert energy(params, state, topo, SIGMOID4) == pytest.approx(0.5 * state.s @ state.s)

    state.s[:] = 0.0
    params.W[0][1] = params.W[1][0] = 1.0
    assert energy(params, state, topo, SIGMOID4) == pytest.approx(-0.25)


def single_clamp(target, n_visible=1):
    targets = np.zeros(n_visible)
    targets[0] = target
    mask = np.zeros(n_visible, dtype=bool)
    mask[0] = True
    return DataSample(targets, mask)


def test_clamp_cost_examples():
    state = NetworkState(np.array([0.5, 0.0, 0.0]), np.zeros(3))
    sample = single_clamp(1.0)
    assert clamp_cost(sample, state, 1.0) == pytest.approx(0.125)
    assert clamp_cost(sample, state, 0.0) == 0.0
    assert clamp_cost(single_clamp(0.5), state, 1.0) == 0.0
    with pytest.raises(ValueError):
        clamp_cost(sample, state, -1.0)


def test_total_energy_combines_terms():
    topo, params, state = zero_network(1, 1)
    params.W[0][1] = params.W[1][0] = 1.0
    # rho(0) * rho(0) coupling at s = 0 then a clamp cost of 0.125 on s_0 = 0
    sample = single_clamp(0.5)
    assert total_energy(params, state, topo, SIGMOID4, sample, 1.0) == pytest.approx(-0.25 + 0.125)
    assert total_energy(params, state, topo, SIGMOID4, sample, 0.0) == pytest.approx(-0.25)


def test_data_sample_rejects_targets_outside_unit_interval():
    with pytest.raises(ValueError):
        DataSample(np.array([1.5]), np.array([True]))


@pytest.mark.parametrize("kwargs", [
    {"epsilon": 0.0},
    {"beta": -0.1},
    {"momentum": 1.5},
    {"iterations": 0},
    {"step_mode": "leapfrog"},
    {"clamp_mode": "sideways"},
])
def test_phase_config_validation(kwargs):
    with pytest.raises(ValueError):
        PhaseConfig(**kwargs).validate()


def test_plain_step_at_fixed_point_is_identity():
    topo, params, state = zero_network(1, 2)
    new = plain_step(state, params, topo, SIGMOID4, None, PhaseConfig(step_mode="plain"))
    np.testing.assert_array_equal(new.s, state.s)


def test_plain_step_full_step_jumps_to_pressure(rng):
    topo, params, state = small_network(rng, 2, 3)
    cfg = PhaseConfig(epsilon=1.0, step_mode="plain")
    new = plain_step(state, params, topo, SIGMOID4, None, cfg)
    np.testing.assert_allclose(new.s, pressure(state, params, topo, SIGMOID4))


def test_plain_step_single_neuron():
    # R = rho'(0) * b = 0.5 at s = 0
    topo, params, state = zero_network(0, 1)
    params.b[0] = 0.5
    new = plain_step(state, params, topo, SIGMOID4, None, PhaseConfig(epsilon=0.2))
    assert new.s[0] == pytest.approx(0.1)


def test_plain_step_leaves_velocity_alone(rng):
    topo, params, state = small_network(rng, 2, 3)
    state.v[:] = rng.uniform(-1, 1, size=5)
    new = plain_step(state, params, topo, SIGMOID4, None, PhaseConfig())
    np.testing.assert_array_equal(new.v, state.v)


def test_momentum_step_coasting(rng):
    topo, params, state = small_network(rng, 2, 3)
    state.v[:] = rng.uniform(-1, 1, size=5)
    cfg = PhaseConfig(epsilon=0.2, momentum=0.0)
    new = momentum_step(state, params, topo, SIGMOID4, None, cfg)
    np.testing.assert_array_equal(new.v, state.v)
    np.testing.assert_allclose(new.s, state.s + 0.2 * state.v)


def test_momentum_step_example():
    topo, params, state = zero_network(0, 1)
    params.b[0] = 0.5
    new = momentum_step(state, params, topo, SIGMOID4, None, PhaseConfig(epsilon=0.2, momentum=0.4))
    assert new.v[0] == pytest.approx(0.2)
    assert new.s[0] == pytest.approx(0.04)


@pytest.mark.parametrize("clamp_mode", ["through_velocity", "direct"])
def test_momentum_degeneracy(clamp_mode):
    gen = np.random.default_rng(7)
    for _ in range(1000):
        n_visible = int(gen.integers(1, 4))
        topo, params, state = small_network(gen, n_visible, int(gen.integers(0, 4)), scale=1.0)
        state.v[:] = gen.uniform(-1, 1, size=topo.n_total)
        sample = DataSample(gen.uniform(0, 1, size=n_visible), gen.uniform(size=n_visible) < 0.7)
        eps = gen.uniform(0.01, 1.0)
        beta = gen.uniform(0.0, 1.0)

        plain = plain_step(state, params, topo, SIGMOID4, sample, PhaseConfig(eps, beta, 0.0, 1, "plain", clamp_mode))
        moving = momentum_step(state, params, topo, SIGMOID4, sample, PhaseConfig(eps, beta, 1.0, 1, "momentum", clamp_mode))
        np.testing.assert_array_max_ulp(moving.s, plain.s, maxulp=1)


def test_clamp_pull_reduces_distance_to_target():
    topo, params, state = zero_network(3, 0)
    state.s[:] = [0.0, 1.0, 0.3]
    sample = DataSample(np.array([1.0, 0.0, 0.3]), np.array([True, True, False]))
    cfg = PhaseConfig(epsilon=0.2, beta=0.5, step_mode="plain")
    new = plain_step(state, params, topo, SIGMOID4, sample, cfg)
    before = np.abs(sample.targets - state.s)[sample.clamp_mask]
    after = np.abs(sample.targets - new.s)[sample.clamp_mask]
    assert np.all(after < before)
    # plain step moves a clamped neuron with R = 0 by eps * (R - s) + beta * (t - s)
    np.testing.assert_allclose(new.s, [0.5, 0.3, 0.24])


def test_drive_ignores_empty_clamp(rng):
    topo, params, state = small_network(rng, 2, 2)
    sample = DataSample(np.ones(2), np.zeros(2, dtype=bool))
    cfg = PhaseConfig(beta=0.8)
    np.testing.assert_array_equal(
        drive(state, params, topo, SIGMOID4, sample, cfg),
        drive(state, params, topo, SIGMOID4, None, cfg),
    )


def test_sample_size_must_match_visible_layer(rng):
    topo, params, state = small_network(rng, 2, 2)
    sample = DataSample(np.ones(3), np.ones(3, dtype=bool))
    with pytest.raises(ValueError):
        plain_step(state, params, topo, SIGMOID4, sample, PhaseConfig(beta=0.5))


def test_non_finite_step_raises(rng):
    topo, params, state = small_network(rng, 1, 2)
    state.v[0] = np.inf
    with pytest.raises(FloatingPointError):
        momentum_step(state, params, topo, SIGMOID4, None, PhaseConfig(momentum=0.0))


def test_relax_single_iteration_matches_step(rng):
    topo, params, state = small_network(rng, 2, 3)
    cfg = PhaseConfig(momentum=0.4, iterations=1)
    relaxed, trace = relax(state.copy(), params, topo, SIGMOID4, None, cfg)
    stepped = momentum_step(state, params, topo, SIGMOID4, None, cfg)
    np.testing.assert_array_equal(relaxed.s, stepped.s)
    np.testing.assert_array_equal(relaxed.v, stepped.v)
    assert [t.step for t in trace] == [1]


def test_relax_does_not_reinitialize(rng):
    topo, params, state = small_network(rng, 2, 3)
    cfg = PhaseConfig(momentum=0.4, iterations=4)
    once, _ = relax(state.copy(), params, topo, SIGMOID4, None, cfg)
    twice, _ = relax(once, params, topo, SIGMOID4, None, cfg)
    direct, _ = relax(state.copy(), params, topo, SIGMOID4, None, PhaseConfig(momentum=0.4, iterations=8))
    np.testing.assert_array_equal(twice.s, direct.s)


def test_relax_trace_watch(rng):
    topo, params, state = small_network(rng, 2, 3)
    _, trace = relax(state, params, topo, SIGMOID4, None, PhaseConfig(iterations=5), watch=[0, 3])
    assert [t.step for t in trace] == [1, 2, 3, 4, 5]
    assert set(trace[0].as_dict()) == {"step", "energy", "cost", "residual", "s_0", "s_3"}
    _, silent = relax(state, params, topo, SIGMOID4, None, PhaseConfig(iterations=5), record=False)
    assert silent == []


def test_fixed_point_stays_fixed(rng):
    topo, params, state = small_network(rng, 2, 4, symmetric=True)
    state, _ = relax(state, params, topo, SIGMOID4, None, PhaseConfig(step_mode="plain", iterations=400), record=False)
    assert max_residual(state, params, topo, SIGMOID4) < 1e-10

    cfg = PhaseConfig(epsilon=0.2, step_mode="plain", iterations=50)
    after, trace = relax(state.copy(), params, topo, SIGMOID4, None, cfg)
    assert np.max(np.abs(after.s - state.s)) < 50 * 0.2 * 1e-10
    assert all(t.residual < 1e-10 for t in trace)


def test_energy_descent_symmetric_plain_relaxation():
    gen = np.random.default_rng(11)
    cfg = PhaseConfig(epsilon=0.2, beta=0.0, iterations=32, step_mode="plain")
    for _ in range(100):
        topo, params, state = small_network(gen, 5, 15, symmetric=True)
        start = energy(params, state, topo, SIGMOID4)
        _, trace = relax(state, params, topo, SIGMOID4, None, cfg)
        energies = np.array([start] + [t.energy for t in trace])
        assert np.all(np.diff(energies) <= 1e-9)


def test_gradient_check_random_asymmetric_networks():
    gen = np.random.default_rng(3)
    for _ in range(20):
        topo, params, state = small_network(gen, 4, 6, scale=1.0)
        assert energy_gradient_check(params, topo, SIGMOID4, state, h=1e-5) < 1e-5


def test_gradient_zero_weights_is_exact(rng):
    topo, params, state = zero_network(2, 2)
    params.b[:] = [0.1, -0.2, 0.3, 0.0]
    state.s[:] = rng.uniform(-1, 1, size=4)
    expected = state.s - SIGMOID4.rho_prime(state.s) * params.b
    np.testing.assert_array_equal(energy_gradient(params, state, topo, SIGMOID4), expected)


def test_drive_is_negative_gradient_only_for_symmetric_weights(rng):
    topo, params, state = small_network(rng, 4, 6, scale=1.0, symmetric=True)
    numeric = finite_difference_gradient(params, state, topo, SIGMOID4, 1e-5)
    free = drive(state, params, topo, SIGMOID4, None, PhaseConfig())
    np.testing.assert_allclose(free, -numeric, rtol=1e-6, atol=1e-8)

    topo, params, state = small_network(rng, 4, 6, scale=1.0)
    numeric = finite_difference_gradient(params, state, topo, SIGMOID4, 1e-5)
    free = drive(state, params, topo, SIGMOID4, None, PhaseConfig())
    assert np.max(np.abs(free + numeric)) > 1e-3


def test_gradient_check_rejects_bad_step(rng):
    topo, params, state = small_network(rng, 2, 2)
    with pytest.raises(ValueError):
        energy_gradient_check(params, topo, SIGMOID4, state, h=0.0)


def test_gradient_check_warns_when_step_is_too_small(caplog):
    topo, params, state = small_network(np.random.default_rng(3), 4, 6, scale=1.0)
    with caplog.at_level(logging.WARNING):
        energy_gradient_check(params, topo, SIGMOID4, state, h=1e-5)
    assert "grows as h shrinks" not in caplog.text

    with caplog.at_level(logging.WARNING):
        error = energy_gradient_check(params, topo, SIGMOID4, state, h=1e-13)
    assert "grows as h shrinks" in caplog.text
    assert error > 1e-5


def test_deterministic_field_matches_blas(rng):
    topo, params, state = small_network(rng, 3, 5)
    exact = NetworkTopology(3, 5, deterministic=True)
    r = SIGMOID4.rho(state.s)
    np.testing.assert_allclose(exact.field(params.W, r), topo.field(params.W, r), rtol=1e-14)
