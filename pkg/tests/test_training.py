import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from fitsneuron.data import generate_synthetic
from fitsneuron.errors import ConfigurationError, DivergedTrainingError
from fitsneuron.stability import max_stable_target_frequency, semi_implicit_kappa_bound
from fitsneuron.training import (NetworkConfig, OptimState, cosine_lr, decode_frequency, encode_frequency,
                                 evaluate, forward_backward, init_parameters, layer_params, load_checkpoint,
                                 optimizer_step, perturb_target_frequencies, save_checkpoint,
                                 surrogate_grad, train)
from fitsneuron.training.checkpoint import checkpoint_from_json, checkpoint_to_json
from fitsneuron.training.config import energy_variant
from fitsneuron.training.params import LAMBDA_HAT_INIT, log_spaced_targets


def _net(**kw):
    args = dict(n_inputs=5, n_classes=3, hidden=(4, 4), order=1)
    args.update(kw)
    return NetworkConfig(**args)


def _batch(seed=0, b=3, t=10, n=5, c=3):
    rng = np.random.default_rng(seed)
    return (rng.random((b, t, n)) < 0.4).astype(float), np.arange(b) % c


def _jitter(params, seed, scale=0.3, gain=3.0):
    rng = np.random.default_rng(seed)
    for a in params.all_arrays().values():
        a += rng.normal(0, scale, a.shape)
    params.weights = [w * gain for w in params.weights]
    return params


def fd_relative_error(params, cfg, x, y, spike_fn, h=1e-6):
    """Largest array-wise relative error between BPTT and central differences."""
    grads = forward_backward(params, cfg, x, y, spike_fn=spike_fn)["grads"]
    worst = 0.0
    for name, arr in params.all_arrays().items():
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            step = h * max(1.0, abs(old))
            arr[idx] = old + step
            lp = forward_backward(params, cfg, x, y, spike_fn=spike_fn)["loss"]
            arr[idx] = old - step
            lm = forward_backward(params, cfg, x, y, spike_fn=spike_fn)["loss"]
            arr[idx] = old
            num[idx] = (lp - lm) / (2 * step)
        denom = max(np.linalg.norm(num), np.linalg.norm(grads[name]), 1e-12)
        worst = max(worst, np.linalg.norm(grads[name] - num) / denom)
    return worst


def test_log_spaced_init_grid():
    assert np.allclose(log_spaced_targets(3, 1.0, 100.0), [1.0, 10.0, 100.0])
    cfg = NetworkConfig(n_inputs=2, n_classes=2, hidden=(3,), dt=0.0005, f_min=1.0, f_max=100.0)
    p = init_parameters(cfg)
    np.testing.assert_allclose(p.target_frequencies(0), [1.0, 10.0, 100.0], rtol=1e-7)


def test_init_constants_and_determinism():
    cfg = _net(order=2, seed=5)
    a, b = init_parameters(cfg), init_parameters(cfg)
    assert np.all(a.lambda_hat[0] == LAMBDA_HAT_INIT) and np.all(a.beta_hat[0] == 0)
    assert a.lam(0)[0, 0] == pytest.approx(0.04743, abs=1e-5)
    for k, v in a.all_arrays().items():
        assert np.array_equal(v, b.all_arrays()[k])
    c = init_parameters(_net(order=2, seed=6))
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_frequency_cap_enforced_with_value_in_message():
    cap = 0.95 * max_stable_target_frequency(_net().fs_constants(0)).hz
    with pytest.raises(ConfigurationError, match=f"{cap:.4f}"):
        _net(f_max=80.0)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        _net(variant="izh")
    with pytest.raises(ConfigurationError):
        _net(order=(1, 2, 3))
    with pytest.raises(ConfigurationError):
        NetworkConfig.from_dict({"n_inputs": 2, "n_classes": 2, "colour": 1})
    cfg = _net(order=(0, 2), tau_m=[0.03, 0.05])
    assert NetworkConfig.from_dict(cfg.to_dict()) == cfg


def test_energy_variant_mapping():
    assert energy_variant(_net(variant="lif", order=0)) == ("plainLIF", 0)
    assert energy_variant(_net(variant="fs", order=0)) == ("FS", 0)
    assert energy_variant(_net(variant="fs", order=2)) == ("FS+TS", 2)


@settings(max_examples=200)
@given(u=st.floats(-40, 40), bh=st.floats(-20, 20), lh=st.floats(-30, 30))
def test_constrained_decode_stays_in_range(u, bh, lh):
    f = float(decode_frequency(u, 1.0, 73.3))
    assert 1.0 <= f <= 73.3
    if abs(u) < 30:
        assert 1.0 < f < 73.3
    assert -1 <= math.tanh(bh) <= 1
    lam = 1 / (1 + math.exp(-lh))
    assert 0 <= lam <= 1


@given(f=st.floats(1.01, 73.0))
def test_frequency_encoding_round_trip(f):
    assert float(decode_frequency(encode_frequency(f, 1.0, 73.3), 1.0, 73.3)) == pytest.approx(f, rel=1e-9)


def test_decoded_coefficients_respect_stability_cap():
    cfg = _net(hidden=(6,))
    p = init_parameters(cfg)
    p.freq_u[0][:] = 25.0  # saturate the sigmoid
    prm, _ = layer_params(p, cfg, 0)
    kappa = (prm.eta_dt / cfg.dt) ** 2
    assert np.all(kappa < semi_implicit_kappa_bound(25.0, 5.0, 0.004))


def test_surrogate_shape_and_integral():
    assert surrogate_grad(1.0, 1.0, 0.5) == pytest.approx(2.0)
    assert surrogate_grad(1.6, 1.0, 0.5) == 0.0 and surrogate_grad(0.5, 1.0, 0.5) == 0.0
    v = np.linspace(-2, 4, 600001)
    assert abs(trapezoid(surrogate_grad(v, 1.0, 0.7), v) - 1.0) < 1e-6


def test_zero_weights_give_uniform_loss():
    cfg = _net(n_classes=4)
    p = init_parameters(cfg)
    p.weights = [np.zeros_like(w) for w in p.weights]
    x, y = _batch(b=4, c=4)
    assert forward_backward(p, cfg, x, y)["loss"] == pytest.approx(math.log(4), abs=1e-12)


def test_gradient_check_subthreshold_linear():
    cfg = _net()
    p = _jitter(init_parameters(cfg), 1)
    x, y = _batch()
    assert fd_relative_error(p, cfg, x, y, "linear") < 1e-6


def test_gradient_check_relaxed_spikes():
    cfg = _net(v_th=0.3, surrogate_width=0.5)
    p = _jitter(init_parameters(cfg), 2)
    x, y = _batch(1)
    res = forward_backward(p, cfg, x, y, spike_fn="relaxed")
    assert 0.05 < np.mean([r.mean() for r in res["spike_rates"]]) < 0.95
    assert fd_relative_error(p, cfg, x, y, "relaxed") < 1e-4


@pytest.mark.parametrize("variant,order", [("lif", 0), ("fs-frozen", 2), ("fs", 0)])
def test_gradient_check_variants(variant, order):
    cfg = _net(variant=variant, order=order, hidden=(3,))
    p = _jitter(init_parameters(cfg), 3)
    x, y = _batch(2)
    assert fd_relative_error(p, cfg, x, y, "linear") < 1e-6
    g = forward_backward(p, cfg, x, y)["grads"]
    if variant == "lif":
        assert np.all(g["u0"] == 0)


def test_raised_threshold_silences_everything():
    cfg = _net(v_th=1e6)
    p = init_parameters(cfg)
    x, y = _batch()
    res = forward_backward(p, cfg, x, y)
    assert all(np.all(g == 0) for g in res["grads"].values())
    assert res["loss"] == pytest.approx(math.log(3))


def test_detach_reset_changes_gradient():
    x, y = _batch(4)
    a = _jitter(init_parameters(_net()), 4, gain=4.0)
    g1 = forward_backward(a, _net(), x, y)["grads"]["w0"]
    g2 = forward_backward(a, _net(detach_reset=True), x, y)["grads"]["w0"]
    assert not np.allclose(g1, g2)


def test_non_finite_loss_raises_with_step():
    cfg = _net()
    p = init_parameters(cfg)
    p.weights[-1][:] = np.nan
    x, y = _batch()
    with pytest.raises(DivergedTrainingError) as exc:
        forward_backward(p, cfg, x, y, step=17)
    assert exc.value.step == 17


def test_adam_zero_gradient_leaves_params():
    arr = {"w": np.array([1.0, -2.0])}
    opt = OptimState(lr=0.1, horizon=10)
    optimizer_step(opt, arr, {"w": np.zeros(2)})
    assert np.array_equal(arr["w"], [1.0, -2.0])


def test_adam_first_step_moves_by_lr():
    arr = {"w": np.array([0.5])}
    opt = OptimState(lr=0.01, horizon=1000)
    optimizer_step(opt, arr, {"w": np.array([3.0])})
    # m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    assert arr["w"][0] == pytest.approx(0.5 - 0.01 * 3.0 / (3.0 + 1e-8), abs=1e-15)


def test_cosine_schedule_endpoints():
    assert cosine_lr(1e-3, 0, 100) == 1e-3
    assert cosine_lr(1e-3, 50, 100) == pytest.approx(5e-4)
    assert cosine_lr(1e-3, 100, 100) < 1e-8 * 1e-3
    arr = {"w": np.array([1.0])}
    opt = OptimState(lr=0.1, horizon=3, step=3)
    optimizer_step(opt, arr, {"w": np.array([1.0])})
    assert arr["w"][0] == pytest.approx(1.0, abs=1e-16)


def test_loss_halves_when_overfitting_a_tiny_batch():
    ds = generate_synthetic([4.0, 16.0], 8, 60, 0.004, 0.15, 1.0, seed=0, split_counts=(4, 0, 0))
    cfg = NetworkConfig(n_inputs=8, n_classes=2, hidden=(16,), lr=2e-3)
    p = init_parameters(cfg)
    x, y = ds.split("train")
    arrays = p.named(cfg)
    opt = OptimState(cfg.lr, 50)
    first = None
    for step in range(50):
        res = forward_backward(p, cfg, x.astype(float), y)
        first = res["loss"] if first is None else first
        optimizer_step(opt, arrays, res["grads"])
    final = forward_backward(p, cfg, x.astype(float), y)["loss"]
    assert final <= 0.5 * first


def _tiny_task():
    return generate_synthetic([4.0, 16.0], 6, 40, 0.004, 0.15, 1.0, seed=1, split_counts=(4, 2, 2))


def test_train_smoke_and_history():
    ds = _tiny_task()
    cfg = NetworkConfig(n_inputs=6, n_classes=2, hidden=(8,), epochs=1, batch_size=4)
    out = train(cfg, ds)
    assert len(out["history"]) == 1
    assert math.isfinite(out["history"][0][1])


def test_train_is_bitwise_deterministic():
    ds = _tiny_task()
    cfg = NetworkConfig(n_inputs=6, n_classes=2, hidden=(8,), epochs=3, batch_size=3, dropout=0.2, order=1)
    a, b = train(cfg, ds), train(cfg, ds)
    assert a["history"] == b["history"]
    for k, v in a["params"].all_arrays().items():
        assert np.array_equal(v, b["params"].all_arrays()[k])


def test_train_requires_matching_inputs():
    with pytest.raises(ConfigurationError):
        train(NetworkConfig(n_inputs=7, n_classes=2, hidden=(4,), epochs=1), _tiny_task())


def test_frozen_variants_do_not_move_frequencies():
    ds = _tiny_task()
    cfg = NetworkConfig(n_inputs=6, n_classes=2, hidden=(8,), epochs=2, variant="fs-frozen", batch_size=4)
    out = train(cfg, ds)
    assert np.array_equal(out["params"].freq_u[0], out["params"].init_freq_u[0])
    cfg = NetworkConfig(n_inputs=6, n_classes=2, hidden=(8,), epochs=2, variant="fs", batch_size=4)
    out = train(cfg, ds)
    assert not np.array_equal(out["params"].freq_u[0], out["params"].init_freq_u[0])


def test_perturbations():
    cfg = _net(hidden=(6, 5))
    p = _jitter(init_parameters(cfg), 7)
    same = perturb_target_frequencies(p, "shuffle", permutations=[np.arange(6), np.arange(5)])
    for k, v in p.all_arrays().items():
        assert np.array_equal(v, same.all_arrays()[k])
    sh = perturb_target_frequencies(p, "shuffle", seed=3)
    for i in range(2):
        assert np.array_equal(np.sort(sh.target_frequencies(i)), np.sort(p.target_frequencies(i)))
    assert np.array_equal(sh.weights[0], p.weights[0])
    rs = perturb_target_frequencies(p, "reset")
    assert np.array_equal(rs.freq_u[0], p.init_freq_u[0])
    assert np.array_equal(rs.beta_hat[0], p.beta_hat[0])
    with pytest.raises(ConfigurationError):
        perturb_target_frequencies(p, "shuffle", permutations=[np.zeros(6, int), np.arange(5)])
    with pytest.raises(ConfigurationError):
        perturb_target_frequencies(p, "scramble")
    p.init_freq_u = None
    with pytest.raises(ConfigurationError):
        perturb_target_frequencies(p, "reset")


def test_checkpoint_round_trip_is_exact(tmp_path):
    cfg = _net(order=(1, 0), dropout=0.1)
    p = _jitter(init_parameters(cfg), 8)
    hist = [(0, 1.2345678901234567, 0.5)]
    save_checkpoint(tmp_path / "c.json", cfg, p, hist)
    cfg2, p2, hist2 = load_checkpoint(tmp_path / "c.json")
    assert cfg2 == cfg and hist2 == hist
    for k, v in p.all_arrays().items():
        assert v.tobytes() == p2.all_arrays()[k].tobytes()
    assert checkpoint_to_json(cfg2, p2, hist2) == checkpoint_to_json(cfg, p, hist)
    with pytest.raises(ConfigurationError):
        checkpoint_from_json('{"format": "other"}')


def test_evaluate_reports_rates_per_linear_layer():
    cfg = _net()
    p = init_parameters(cfg)
    x, y = _batch(b=5)
    res = evaluate(p, cfg, x, y, batch_size=2)
    assert 0 <= res["accuracy"] <= 1
    assert len(res["firing_rates"]) == 3
    assert res["firing_rates"][0] == pytest.approx(x.mean())
