"""Command-line driver: ``fits <subcommand> [--config c.json] [--out dir] [--seed n] [--threads n]``.

Every subcommand reads one strict JSON config (unknown or missing keys are
all reported together before any work starts) and writes CSV/JSON files to
``--out``. JSON summaries carry a ``metadata`` block; its ``timestamp`` is the
only field that changes between identical runs.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (CTResponse, DTResponse, analysis_grid, ct_target_frequency, dt_stationary_candidates,
                       group_delay_numeric, realized_dt_target_sweep, ts_chain_response)
from .data import bin_channels, generate_synthetic, load_dataset, save_dataset, SpikeRaster
from .energy import count_operations, estimate_energy, instrumented_run
from .errors import (ConfigurationError, DivergedTrainingError, DomainError, FitsError,
                     InternalConsistencyError, NearPoleError, NumericOverflowError, RasterParseError,
                     RefineGridError, SingularMixtureError)
from .neuron import FSParams, TSParams
from .stability import (build_state_matrix, jury_assess, kappa_stability_bounds, max_stable_target_frequency,
                        write_trajectory_csv, zero_input_trajectory)
from .training import (NetworkConfig, energy_variant, evaluate, layer_params, load_checkpoint,
                       perturb_target_frequencies, save_checkpoint, train)

__all__ = ["main", "SCHEMAS", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERIC"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
_REQUIRED = object()
_NEURON = dict(tau_m=0.04, tau_a=0.2, dt=0.004)

# subcommand -> {key: default}; _REQUIRED marks mandatory keys
SCHEMAS = {
    "analyze": dict(neurons=None, checkpoint=None, grid_size=4096, sweep_resolution_hz=1e-4),
    "ctdt": dict(**_NEURON, f_min=1.0, f_max=50.0, points=256, sweep_resolution_hz=1e-4),
    "stability": dict(**_NEURON, kappa=None, f_star=None, v0=1.0, a0=0.0, steps=500),
    "gen-data": dict(classes=[4.0, 8.0, 12.0, 16.0, 20.0, 24.0], channels=16, t_bins=100, dt=0.004,
                     base_rate=0.1, depth=1.0, split_counts=[48, 16, 32], bin_group=None,
                     bin_reduction="or"),
    "train": dict(data=_REQUIRED, network={}),
    "eval": dict(checkpoint=_REQUIRED, data=_REQUIRED, split="test"),
    "perturb": dict(checkpoint=_REQUIRED, data=_REQUIRED, split="test", mode=_REQUIRED),
    "energy": dict(checkpoint=None, data=None, split="test", layer_sizes=None, variant=None, order=0,
                   firing_rates=None, steps=None, instrumented=False),
    "dump-params": dict(checkpoint=_REQUIRED),
}
_NEURON_KEYS = {"tau_m", "tau_a", "dt", "f_star", "kappa", "beta", "lam"}


# -- config and output helpers ---------------------------------------------

def load_config(path, command):
    """Parse and validate a config against the subcommand schema."""
    schema = SCHEMAS[command]
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a JSON object")
    unknown = sorted(set(raw) - set(schema))
    missing = sorted(k for k, v in schema.items() if v is _REQUIRED and k not in raw)
    problems = []
    if unknown:
        problems.append(f"unknown keys: {', '.join(unknown)}")
    if missing:
        problems.append(f"missing keys: {', '.join(missing)}")
    if problems:
        raise ConfigurationError(f"{command} config: " + "; ".join(problems))
    return {k: raw.get(k, v) for k, v in schema.items()}


def _num(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, doc, command, seed):
    doc = dict(doc)
    doc["metadata"] = {
        "subcommand": command,
        "seed": seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


# -- neuron specs for analyze -----------------------------------------------

def _check_stable(p: FSParams, label):
    rep = jury_assess(build_state_matrix(p, "semi-implicit"))
    if not rep.stable:
        raise ConfigurationError(
            f"{label}: unstable semi-implicit update, violated Jury margin(s) {', '.join(rep.violated())} "
            f"(kappa={p.kappa!r}, bound={kappa_stability_bounds(p).semi_implicit!r})")


def _neuron_from_spec(spec, idx):
    if not isinstance(spec, dict):
        raise ConfigurationError(f"neurons[{idx}] must be an object")
    unknown = sorted(set(spec) - _NEURON_KEYS)
    if unknown:
        raise ConfigurationError(f"neurons[{idx}]: unknown keys: {', '.join(unknown)}")
    tau_m, tau_a, dt = (float(spec.get(k, _NEURON[k])) for k in ("tau_m", "tau_a", "dt"))
    if ("f_star" in spec) == ("kappa" in spec):
        raise ConfigurationError(f"neurons[{idx}]: give exactly one of f_star, kappa")
    if "f_star" in spec:
        p = FSParams.from_target(tau_m, tau_a, dt, float(spec["f_star"]), strict=False)
    else:
        p = FSParams.from_kappa(tau_m, tau_a, dt, float(spec["kappa"]), strict=False)
    _check_stable(p, f"neurons[{idx}]")
    beta, lam = spec.get("beta", []), spec.get("lam", [])
    if len(beta) != len(lam):
        raise ConfigurationError(f"neurons[{idx}]: beta and lam need equal lengths")
    return p, TSParams.from_constrained(beta, lam)


def _neurons_from_checkpoint(path):
    cfg, params, _ = load_checkpoint(path)
    out = []
    for layer in range(len(cfg.hidden)):
        prm, _ = layer_params(params, cfg, layer)
        fsc = cfg.fs_constants(layer)
        for j in range(prm.size):
            kappa = (prm.eta_dt[j] / cfg.dt) ** 2
            p = FSParams.from_kappa(fsc.tau_m, fsc.tau_a, cfg.dt, kappa, strict=False)
            _check_stable(p, f"layer {layer} neuron {j}")
            ts = TSParams(params.beta_hat[layer][j].copy(), params.lambda_hat[layer][j].copy())
            out.append((layer, p, ts))
    return out


# -- subcommands -------------------------------------------------------------

def cmd_analyze(c, out, seed):
    if (c["neurons"] is None) == (c["checkpoint"] is None):
        raise ConfigurationError("analyze: give exactly one of neurons, checkpoint")
    if c["checkpoint"] is not None:
        neurons = _neurons_from_checkpoint(c["checkpoint"])
    else:
        if not isinstance(c["neurons"], list) or not c["neurons"]:
            raise ConfigurationError("analyze: neurons must be a non-empty list")
        neurons = [(0, *_neuron_from_spec(s, i)) for i, s in enumerate(c["neurons"])]
    grid = analysis_grid(int(c["grid_size"]))
    mag_rows, delay_rows, target_rows = [], [], []
    for idx, (layer, p, ts) in enumerate(neurons):
        d = DTResponse.from_params(p)

        def full(w, d=d, ts=ts):
            return d(w) * ts_chain_response(ts, w)

        mag = np.abs(full(grid))
        delay = group_delay_numeric(full, grid).delay
        mag_rows.extend((idx, _num(w), _num(m)) for w, m in zip(grid, mag))
        delay_rows.extend((idx, _num(w), _num(t)) for w, t in zip(grid, delay))
        omega_ct = ct_target_frequency(CTResponse.from_params(p)) if p.kappa > 0 else None
        f_ct = 0.0 if omega_ct is None else omega_ct / (2 * math.pi)
        f_closed = dt_stationary_candidates(d).f_star(p.dt)
        sweep = realized_dt_target_sweep(d, resolution=float(c["sweep_resolution_hz"]))
        lowpass = int(omega_ct is None or sweep.lowpass)
        target_rows.append((idx, layer, _num(p.kappa), _num(f_ct), _num(f_closed), _num(sweep.f_star), lowpass))
    _write_csv(out / "magnitude.csv", ["neuron", "omega", "magnitude"], mag_rows)
    _write_csv(out / "delay.csv", ["neuron", "omega", "delay_samples"], delay_rows)
    _write_csv(out / "targets.csv", ["neuron", "layer", "kappa", "f_ct_hz", "f_dt_closed_hz", "f_dt_sweep_hz",
                                     "lowpass"], target_rows)
    _write_json(out / "analyze.json", {"neurons": len(neurons), "grid_size": len(grid)}, "analyze", seed)


def ctdt_errors(tau_m, tau_a, dt, f_min, f_max, points, resolution):
    """Per-frequency CT, closed-form DT and swept DT targets over a log grid."""
    f_ct = np.geomspace(f_min, f_max, points)
    rows = []
    for f in f_ct:
        d = DTResponse.from_target(tau_m, tau_a, dt, float(f))
        rows.append((float(f), dt_stationary_candidates(d).f_star(dt),
                     realized_dt_target_sweep(d, resolution=resolution).f_star))
    return np.array(rows)


def cmd_ctdt(c, out, seed):
    if not (0 < c["f_min"] <= c["f_max"]) or int(c["points"]) < 1:
        raise ConfigurationError("ctdt: need 0 < f_min <= f_max and points >= 1")
    tab = ctdt_errors(c["tau_m"], c["tau_a"], c["dt"], c["f_min"], c["f_max"], int(c["points"]),
                      float(c["sweep_resolution_hz"]))
    ct_err = np.abs(tab[:, 0] - tab[:, 2])
    cf_err = np.abs(tab[:, 1] - tab[:, 2])
    _write_csv(out / "ctdt.csv", ["f_ct_hz", "f_dt_closed_hz", "f_dt_sweep_hz"],
               [tuple(_num(v) for v in r) for r in tab])
    doc = {
        "config": _jsonable(c),
        "ct_vs_dt": {"mae_hz": float(ct_err.mean()), "max_hz": float(ct_err.max())},
        "closed_form_vs_dt": {"mae_hz": float(cf_err.mean()), "max_hz": float(cf_err.max())},
    }
    _write_json(out / "ctdt.json", doc, "ctdt", seed)


def cmd_stability(c, out, seed):
    p = FSParams(c["tau_m"], c["tau_a"], c["dt"])
    ex = max_stable_target_frequency(p, "explicit")
    si = max_stable_target_frequency(p, "semi-implicit")
    doc = {
        "config": _jsonable(c),
        "kappa_bound_explicit": ex.kappa_bound,
        "kappa_bound_semi_implicit": si.kappa_bound,
        "explicit_limit_hz": ex.hz,
        "semi_implicit_limit_hz": si.hz,
        "explicit_lowpass_only": ex.lowpass,
        "semi_implicit_lowpass_only": si.lowpass,
    }
    if c["kappa"] is not None and c["f_star"] is not None:
        raise ConfigurationError("stability: give at most one of kappa, f_star")
    if c["kappa"] is not None or c["f_star"] is not None:
        if c["kappa"] is not None:
            q = FSParams.from_kappa(c["tau_m"], c["tau_a"], c["dt"], float(c["kappa"]), strict=False)
        else:
            q = FSParams.from_target(c["tau_m"], c["tau_a"], c["dt"], float(c["f_star"]), strict=False)
        doc["kappa"] = q.kappa
        doc["schemes"] = {}
        for scheme in ("explicit", "semi-implicit"):
            rep = jury_assess(build_state_matrix(q, scheme))
            traj = zero_input_trajectory(q, scheme, c["v0"], c["a0"], int(c["steps"]))
            write_trajectory_csv(traj, out / f"trajectory_{scheme}.csv")
            doc["schemes"][scheme] = {
                "jury_1mTpD": rep.jury_1mTpD, "jury_1pTpD": rep.jury_1pTpD, "jury_1mD": rep.jury_1mD,
                "stable": rep.stable, "violated": rep.violated(), "spectral_radius": rep.spectral_radius,
                "trajectory_diverged": traj.diverged,
            }
    _write_json(out / "stability.json", doc, "stability", seed)


def cmd_gen_data(c, out, seed):
    ds = generate_synthetic(c["classes"], int(c["channels"]), int(c["t_bins"]), float(c["dt"]),
                            float(c["base_rate"]), float(c["depth"]), seed,
                            split_counts=tuple(int(n) for n in c["split_counts"]))
    if c["bin_group"] is not None:
        binned = [bin_channels(SpikeRaster(x, ds.dt), int(c["bin_group"]), c["bin_reduction"]).spikes
                  for x in ds.x]
        ds.x = np.stack(binned) if binned else ds.x[:, :, :0]
        ds.generator["bin_group"] = int(c["bin_group"])
        ds.generator["bin_reduction"] = c["bin_reduction"]
    save_dataset(ds, out)
    _write_json(out / "gen-data.json", {"manifest": ds.manifest()}, "gen-data", seed)


def _network_config(net, ds, seed):
    if not isinstance(net, dict):
        raise ConfigurationError("network must be an object")
    net = dict(net)
    for k in ("n_inputs", "n_classes", "seed"):
        if k in net:
            raise ConfigurationError(f"network.{k} is derived from the data / --seed and must not be set")
    net.update(n_inputs=int(ds.x.shape[2]), n_classes=ds.n_classes, seed=seed, dt=ds.dt)
    return NetworkConfig.from_dict(net)


def cmd_train(c, out, seed):
    ds = load_dataset(c["data"])
    cfg = _network_config(c["network"], ds, seed)
    res = train(cfg, ds)
    save_checkpoint(out / "checkpoint.json", cfg, res["params"], res["history"])
    _write_csv(out / "history.csv", ["epoch", "train_loss", "val_accuracy"],
               [(e, _num(l), _num(a)) for e, l, a in res["history"]])
    best = max(res["history"], key=lambda h: h[2]) if res["history"] else None
    doc = {"config": cfg.to_dict(), "epochs": len(res["history"]),
           "best_val_accuracy": best[2] if best else None, "best_epoch": best[0] if best else None}
    _write_json(out / "train.json", doc, "train", seed)


def _split(ds, name):
    if name not in ds.splits:
        raise ConfigurationError(f"dataset has no split {name!r}; available: {sorted(ds.splits)}")
    return ds.split(name)


def cmd_eval(c, out, seed):
    cfg, params, _ = load_checkpoint(c["checkpoint"])
    x, y = _split(load_dataset(c["data"]), c["split"])
    res = evaluate(params, cfg, x, y)
    _write_json(out / "eval.json", {"split": c["split"], "samples": int(len(y)), **res}, "eval", seed)


def cmd_perturb(c, out, seed):
    if c["mode"] not in ("reset", "shuffle"):
        raise ConfigurationError(f"perturb: mode must be reset or shuffle, got {c['mode']!r}")
    cfg, params, history = load_checkpoint(c["checkpoint"])
    x, y = _split(load_dataset(c["data"]), c["split"])
    pert = perturb_target_frequencies(params, c["mode"], seed=seed)
    save_checkpoint(out / "checkpoint.json", cfg, pert, history)
    doc = {
        "mode": c["mode"],
        "split": c["split"],
        "unperturbed_accuracy": evaluate(params, cfg, x, y)["accuracy"],
        "perturbed_accuracy": evaluate(pert, cfg, x, y)["accuracy"],
        "target_frequencies_hz": [pert.target_frequencies(i).tolist() for i in range(len(cfg.hidden))],
    }
    _write_json(out / "perturb.json", doc, "perturb", seed)


def cmd_energy(c, out, seed):
    if c["checkpoint"] is not None:
        if c["data"] is None:
            raise ConfigurationError("energy: checkpoint mode needs data")
        cfg, params, _ = load_checkpoint(c["checkpoint"])
        x, y = _split(load_dataset(c["data"]), c["split"])
        variant, order = energy_variant(cfg)
        if c["variant"] is not None:
            variant = c["variant"]
        # input rate of every linear layer; the readout sees the last hidden layer
        rates = evaluate(params, cfg, x, y)["firing_rates"]
        sizes, steps = cfg.layer_sizes, int(x.shape[1])
        extra = {"source": "checkpoint", "split": c["split"], "samples_per_inference": 1}
        if c["instrumented"]:
            layers = [layer_params(params, cfg, i)[0] for i in range(len(cfg.hidden))]
            counts, _, _ = instrumented_run(params.weights, layers, x[0], variant, cfg.v_th)
            extra["instrumented_first_sample"] = {"acs": int(counts.acs), "macs": int(counts.macs)}
    else:
        for k in ("layer_sizes", "variant", "firing_rates", "steps"):
            if c[k] is None:
                raise ConfigurationError(f"energy: {k} is required without a checkpoint")
        sizes, variant, order, rates, steps = (c["layer_sizes"], c["variant"], int(c["order"]),
                                               c["firing_rates"], int(c["steps"]))
        extra = {"source": "config"}
    counts = count_operations(sizes, variant, rates, steps, order)
    rep = estimate_energy(counts)
    doc = json.loads(rep.to_json())
    doc.update(variant=variant, order=order, layer_sizes=list(sizes), steps=steps,
               firing_rates=[float(r) for r in rates], acs=float(counts.acs), macs=float(counts.macs), **extra)
    _write_json(out / "energy.json", doc, "energy", seed)


def cmd_dump_params(c, out, seed):
    cfg, params, _ = load_checkpoint(c["checkpoint"])
    rows, summary = [], []
    m_max = max(cfg.order)
    for layer in range(len(cfg.hidden)):
        prm, _ = layer_params(params, cfg, layer)
        f = params.target_frequencies(layer) if cfg.uses_frequency else np.zeros(prm.size)
        kappa = (prm.eta_dt / cfg.dt) ** 2
        for j in range(prm.size):
            beta = [_num(b) for b in prm.beta[j]] + [""] * (m_max - prm.order)
            lam = [_num(v) for v in prm.lam[j]] + [""] * (m_max - prm.order)
            rows.append((layer, j, _num(f[j]), _num(kappa[j]), *beta, *lam))
        summary.append({
            "layer": layer,
            "f_star_hz": {"min": float(f.min()), "median": float(np.median(f)), "max": float(f.max())},
            "beta_mean": prm.beta.mean(axis=0).tolist(),
            "lambda_mean": prm.lam.mean(axis=0).tolist(),
        })
    header = (["layer", "neuron", "f_star_hz", "kappa"] + [f"beta_{m + 1}" for m in range(m_max)]
              + [f"lambda_{m + 1}" for m in range(m_max)])
    _write_csv(out / "params.csv", header, rows)
    _write_json(out / "params.json", {"variant": cfg.variant, "layers": summary}, "dump-params", seed)


COMMANDS = {
    "analyze": cmd_analyze,
    "ctdt": cmd_ctdt,
    "stability": cmd_stability,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "perturb": cmd_perturb,
    "energy": cmd_energy,
    "dump-params": cmd_dump_params,
}

_CONFIG_ERRORS = (ConfigurationError, DomainError, RasterParseError, RefineGridError, FileNotFoundError,
                  KeyError, TypeError, ValueError)
_NUMERIC_ERRORS = (NumericOverflowError, DivergedTrainingError, NearPoleError, SingularMixtureError,
                   InternalConsistencyError, ArithmeticError)


def build_parser():
    ap = argparse.ArgumentParser(prog="fits", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config for the subcommand")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    ap.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
    ap.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if not 0 <= args.seed < 2**64:
            raise ConfigurationError("--seed must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        cfg = load_config(args.config, args.command)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args.seed)
    except _NUMERIC_ERRORS as exc:
        print(f"fits {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _CONFIG_ERRORS as exc:
        print(f"fits {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitsError as exc:
        print(f"fits {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
