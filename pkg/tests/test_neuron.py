import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal

from fitsneuron.analysis import DTResponse, dt_transfer
from fitsneuron.errors import ConfigurationError, NumericOverflowError
from fitsneuron.neuron import (FSParams, LayerParams, NeuronState, TSParams, fire_and_reset, fits_step,
                               fs_step, layer_forward, relaxed_spike, simulate_neuron, synaptic_currents,
                               ts_step)


def _random_layer(rng, n, order, f_hi=60.0):
    fs = [FSParams.from_target(0.04, 0.2, 0.004, rng.uniform(1.0, f_hi)) for _ in range(n)]
    ts = [TSParams.from_constrained(rng.uniform(-0.9, 0.9, order), rng.uniform(0.0, 1.0, order))
          for _ in range(n)]
    return fs, ts


def test_fs_step_hand_values():
    p = FSParams(0.04, 0.2, 0.004, eta=3.0, gamma=2.0)
    v0, a1 = fs_step(p, 0.5, 0.25, 0.1)
    assert v0 == pytest.approx(0.9 * 0.5 - 0.012 * 0.25 + 0.1, abs=1e-15)
    assert a1 == pytest.approx(0.98 * 0.25 + 0.008 * v0, abs=1e-15)


def test_zero_coupling_is_leaky_integrator():
    p = FSParams(0.04, 0.2, 0.004)
    v, a = 0.0, 0.0
    for _ in range(5):
        v, a = fs_step(p, v, a, 1.0)
    assert a == 0.0
    assert v == pytest.approx(sum(0.9**k for k in range(5)))


def test_order_zero_passes_fs_voltage_through():
    new, mixed = ts_step(TSParams(), [0.3], 0.7)
    assert new == [0.7] and mixed == 0.7


def test_ts_step_length_mismatch():
    with pytest.raises(ConfigurationError):
        ts_step(TSParams.identity(2), [0.0, 0.0], 1.0)


def test_identity_ts_matches_fs_only():
    # beta = 0, lambda = 0 leaves the FS output untouched
    ts = TSParams.identity(3)
    assert np.all(ts.lam == 0)
    new, mixed = ts_step(ts, [0.1, 0.2, 0.3, 0.4], 0.9)
    assert mixed == 0.9


def test_pure_delay_stage():
    # beta = 0, lambda = 1: the output is the previous FS voltage, and that
    # output is what the membrane carries into the next step
    ts = TSParams.from_constrained([0.0], [1.0])
    st_ = NeuronState.zeros(1)
    p = FSParams(0.04, 0.2, 0.004)
    outs = []
    for i in (1.0, 0.0, 0.0, 0.0):
        st_, out = fits_step(p, ts, st_, i, v_th=10.0)
        outs.append(out.pre_reset_v)
    assert outs[:3] == [0.0, 1.0, 0.0]
    assert outs[3] == pytest.approx(0.9)


def test_threshold_equality_fires_and_resets_subtractively():
    out = fire_and_reset(1.0, 1.0)
    assert out.s == 1 and out.v_next == 0.0
    out = fire_and_reset(2.5, 1.0)
    assert out.s == 1 and out.v_next == 1.5
    out = fire_and_reset(0.999, 1.0)
    assert out.s == 0 and out.v_next == 0.999


def test_spike_does_not_reset_adaptation_or_stages():
    p = FSParams.from_target(0.04, 0.2, 0.004, 20.0)
    ts = TSParams.from_constrained([0.5], [0.3])
    st0 = NeuronState(0.2, 0.1, (0.2, 0.05))
    st1, out = fits_step(p, ts, st0, 5.0, v_th=1.0)
    assert out.s == 1
    v0, a1 = fs_step(p, 0.2, 0.1, 5.0)
    assert st1.a == a1
    assert st1.stage_v[0] == v0
    assert st1.v == out.pre_reset_v - 1.0


def test_strict_params_reject_unstable_coupling():
    with pytest.raises(ConfigurationError, match="stability bound"):
        FSParams.from_kappa(0.04, 0.2, 0.004, 3e5)
    assert FSParams.from_kappa(0.04, 0.2, 0.004, 3e5, strict=False).kappa == pytest.approx(3e5)


@pytest.mark.parametrize("kw", [dict(tau_m=0.0), dict(tau_a=-1.0), dict(dt=0.05), dict(dt=0.0)])
def test_invalid_time_constants(kw):
    args = dict(tau_m=0.04, tau_a=0.2, dt=0.004)
    args.update(kw)
    with pytest.raises(ConfigurationError):
        FSParams(**args)


def test_impulse_response_matches_difference_equation():
    # oracle: the subthreshold map I -> V_0 is z H_d(z); run it through lfilter
    p = FSParams.from_target(0.04, 0.2, 0.004, 25.0)
    n = 400
    currents = np.zeros(n)
    currents[0] = 1.0
    _, pre, _ = simulate_neuron(p, TSParams(), currents, v_th=1e9)
    b = [1.0, -p.rho_bar]
    a = [1.0, -(p.mu_bar + p.rho_bar - p.kappa_bar), p.mu_bar * p.rho_bar]
    ref = signal.lfilter(b, a, currents)
    np.testing.assert_allclose(pre, ref, rtol=1e-12, atol=1e-15)


def test_impulse_spectrum_matches_transfer_function():
    # the DFT of a long, decayed impulse response samples |H_d| on the FFT grid
    p = FSParams.from_target(0.04, 0.2, 0.004, 25.0)
    n = 8192
    currents = np.zeros(n)
    currents[0] = 1.0
    _, pre, _ = simulate_neuron(p, TSParams(), currents, v_th=1e9)
    spec = np.abs(np.fft.rfft(pre))
    w = 2 * np.pi * np.arange(len(spec)) / n
    d = DTResponse.from_params(p)
    np.testing.assert_allclose(spec[1:-1], np.abs(dt_transfer(d, w[1:-1])), rtol=1e-9)


def test_simulate_neuron_flags_overflow():
    p = FSParams.from_kappa(0.04, 0.2, 0.004, 1e7, strict=False)
    with pytest.raises(NumericOverflowError) as exc:
        simulate_neuron(p, TSParams(), np.r_[1.0, np.zeros(5000)], v_th=1e300, neuron=7)
    assert exc.value.neuron == 7 and exc.value.step is not None


def test_layer_forward_overflow_reports_step():
    fs = [FSParams.from_kappa(0.04, 0.2, 0.004, 1e7, strict=False)]
    prm = LayerParams.from_neurons(fs, [TSParams()])
    x = np.zeros((5000, 1))
    x[0] = 1.0
    with pytest.raises(NumericOverflowError):
        layer_forward(np.ones((1, 1)), prm, x, v_th=1e300)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), order=st.integers(0, 3), n=st.integers(1, 6), steps=st.integers(1, 60))
def test_layer_forward_bit_exact_against_scalar_reference(seed, order, n, steps):
    rng = np.random.default_rng(seed)
    fs, ts = _random_layer(rng, n, order)
    n_in = int(rng.integers(1, 8))
    w = rng.normal(0.0, 1.5, (n, n_in))
    x = (rng.random((steps, n_in)) < 0.3).astype(float)
    v_th = float(rng.uniform(0.2, 2.0))
    tr = layer_forward(w, LayerParams.from_neurons(fs, ts), x, v_th)
    cur = synaptic_currents(w, x)
    for j in range(n):
        s, pre, _ = simulate_neuron(fs[j], ts[j], cur[:, j], v_th)
        assert np.array_equal(tr.spikes[:, j], s)
        assert np.array_equal(tr.pre_reset[:, j], pre)


def test_layer_forward_batch_axes_are_independent():
    rng = np.random.default_rng(3)
    fs, ts = _random_layer(rng, 4, 2)
    prm = LayerParams.from_neurons(fs, ts)
    w = rng.normal(0, 1, (4, 5))
    x = (rng.random((3, 40, 5)) < 0.4).astype(float)
    batched = layer_forward(w, prm, x).pre_reset
    for b in range(3):
        assert np.array_equal(batched[b], layer_forward(w, prm, x[b]).pre_reset)


def test_float32_layer_runs_in_float32():
    rng = np.random.default_rng(0)
    fs, ts = _random_layer(rng, 3, 1)
    tr = layer_forward(rng.normal(size=(3, 2)), LayerParams.from_neurons(fs, ts),
                       np.ones((10, 2)), dtype=np.float32)
    assert tr.pre_reset.dtype == np.float32


def test_layer_rejects_bad_shapes():
    fs, ts = _random_layer(np.random.default_rng(0), 2, 0)
    prm = LayerParams.from_neurons(fs, ts)
    with pytest.raises(ConfigurationError):
        layer_forward(np.ones((3, 2)), prm, np.ones((4, 2)))
    with pytest.raises(ConfigurationError):
        layer_forward(np.ones((2, 2)), prm, np.ones((4, 3)))
    with pytest.raises(ConfigurationError):
        layer_forward(np.ones((2, 2)), prm, np.ones((4, 2)), spike_fn="sigmoid")


def test_mixed_layer_orders_rejected():
    fs, _ = _random_layer(np.random.default_rng(0), 2, 0)
    with pytest.raises(ConfigurationError):
        LayerParams.from_neurons(fs, [TSParams.identity(1), TSParams.identity(2)])


@given(d=st.floats(-3, 3), w=st.floats(0.1, 2.0))
def test_relaxed_spike_is_monotone_ramp(d, w):
    y = float(relaxed_spike(d, w))
    assert 0.0 <= y <= 1.0
    assert float(relaxed_spike(d + 1e-3, w)) >= y


def test_relaxed_spike_derivative_is_triangle():
    w = 0.7
    d = np.linspace(-1.5, 1.5, 301)
    h = 1e-6
    num = (relaxed_spike(d + h, w) - relaxed_spike(d - h, w)) / (2 * h)
    tri = np.maximum(0, 1 - np.abs(d) / w) / w
    np.testing.assert_allclose(num, tri, atol=1e-6)


def test_linear_mode_has_no_reset():
    fs, ts = _random_layer(np.random.default_rng(1), 2, 1)
    tr = layer_forward(np.full((2, 1), 5.0), LayerParams.from_neurons(fs, ts), np.ones((20, 1)),
                       spike_fn="linear")
    assert np.array_equal(tr.spikes, tr.pre_reset)
    assert tr.pre_reset.max() > 1.0


def test_ts_params_round_trip():
    ts = TSParams.from_constrained([0.3, -0.6], [0.2, 0.9])
    np.testing.assert_allclose(ts.beta, [0.3, -0.6], atol=1e-15)
    np.testing.assert_allclose(ts.lam, [0.2, 0.9], atol=1e-15)
    assert ts.order == 2
    with pytest.raises(ConfigurationError):
        TSParams.from_constrained([1.0], [0.5])


def test_from_target_uses_equal_split():
    p = FSParams.from_target(0.04, 0.2, 0.004, 12.0)
    assert p.eta_equals_gamma
    assert math.isclose(p.eta * p.gamma, p.kappa)
