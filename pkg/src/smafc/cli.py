"""Reproducible pipelines tying simulation, reconstruction and certification together.

Every run writes its artifacts plus ``manifest.json`` (inputs hash, seed,
library versions, artifact hashes) into the output directory. All
randomness is derived from the single ``seed`` through named sub-streams,
so an identical configuration reproduces identical bytes.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import platform
import re
import sys
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__, certify, presets, raqm
from . import io as sio
from . import tomography as tomo
from .afc import CombConfig, StarkControl, TimeBinState, phase_sigma_for_visibility
from .array import (ChannelConfig, CrosstalkModel, PathState, apply_phase_noise, default_array,
                    optical_crosstalk_db, simulate_counts, store_and_retrieve)
from .quantum import (ProcessMatrix, depolarizing_chi, fidelity, identity_chi, chi_from_unitary, ket_to_dm,
                      random_unitary)

SCENARIOS = ("multiplex", "raqm", "qst", "qpt", "bounds", "capacity")
EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_OPTIMIZER = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def substream(seed: int, name: str) -> int:
    """Independent 32-bit seed for the module or stage called ``name``."""
    return int(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    scenario: str
    seed: int = 0
    trials: int = 100_000
    out: str = "out"
    array: str | None = None
    params: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not isinstance(self.trials, int) or isinstance(self.trials, bool) or self.trials <= 0:
            raise ConfigError("trials must be a positive integer")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be a mapping")
        for path in self.referenced_files():
            if not Path(path).is_file():
                raise ConfigError(f"referenced file {path} does not exist")
        return self

    def referenced_files(self) -> list[str]:
        files = [self.array] if self.array else []
        if isinstance(self.params.get("chi"), str):
            files.append(self.params["chi"])
        return files

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "seed": self.seed, "trials": self.trials, "out": self.out,
                "array": self.array, "params": self.params}

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "ExperimentConfig":
        unknown = set(d) - {"scenario", "seed", "trials", "out", "array", "params"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "scenario" not in d:
            raise ConfigError("config needs a scenario")
        params = copy.deepcopy(d.get("params", {}))
        array = d.get("array")
        if base is not None:
            if array:
                array = str((base / array).resolve()) if not Path(array).is_absolute() else array
            if isinstance(params.get("chi"), str) and not Path(params["chi"]).is_absolute():
                params["chi"] = str((base / params["chi"]).resolve())
        return cls(d["scenario"], d.get("seed", 0), d.get("trials", 100_000), d.get("out", "out"), array, params)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = sio.read_json(path)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, path.parent)


def bundled_configs() -> dict:
    root = resources.files("smafc") / "configs"
    return {p.name[:-5]: p for p in root.iterdir() if p.name.endswith(".json")}


def load_bundled(name: str) -> ExperimentConfig:
    configs = bundled_configs()
    if name not in configs:
        raise ConfigError(f"no bundled demo {name!r}; available: {', '.join(sorted(configs))}")
    return ExperimentConfig.from_dict(json.loads(configs[name].read_text()))


# ---------------------------------------------------------------------------
# shared helpers

def _param(p: dict, key: str, default, kind=None):
    v = p.get(key, default)
    if kind is not None and v is not None:
        try:
            v = kind(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"parameter {key!r} has invalid value {v!r}") from exc
    return v


def _load_array(cfg: ExperimentConfig, comb: CombConfig, stark: StarkControl):
    """Channel configs and crosstalk model, from the array file or the device defaults."""
    if cfg.array is None:
        return default_array(comb, stark), CrosstalkModel.uniform()
    data = sio.read_json(cfg.array)
    try:
        chans = [ChannelConfig.from_dict(c) for c in data["channels"]]
        xt = CrosstalkModel.from_dict(data["crosstalk"]) if "crosstalk" in data else CrosstalkModel.uniform()
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed array file {cfg.array}: {exc}") from exc
    return chans, xt


_TERM = re.compile(r"^\s*([+-]?)\s*(i?)\s*C(\d+)\s*$")


def path_state(expr, channels) -> PathState:
    """Path state from amplitudes or an expression such as ``C5+iC8`` or ``psi1``."""
    channels = list(channels)
    if isinstance(expr, (list, tuple)):
        amps = [complex(a) if not isinstance(a, (list, tuple)) else complex(a[0], a[1]) for a in expr]
        return PathState.from_amplitudes(amps, channels)
    if expr in ("psi1", "psi2"):
        amps = np.ones(len(channels), dtype=complex)
        if expr == "psi2":
            amps[2] = 1j
        return PathState.from_amplitudes(amps, channels)
    amps = np.zeros(len(channels), dtype=complex)
    for term in re.findall(r"[+-]?[^+-]+", str(expr).replace(" ", "")):
        m = _TERM.match(term)
        if not m or int(m.group(3)) not in channels:
            raise ConfigError(f"cannot parse state term {term!r} in {expr!r} for channels {channels}")
        amps[channels.index(int(m.group(3)))] += (-1 if m.group(1) == "-" else 1) * (1j if m.group(2) else 1)
    if not np.any(amps):
        raise ConfigError(f"state {expr!r} is empty")
    return PathState.from_amplitudes(amps, channels)


def _recall_controls(array, channels, n: int) -> dict:
    ctrls = {}
    for c in array:
        if c.index in channels:
            ctrls[c.index] = c.stark.with_pulses(raqm.recall_pulses(c.comb, c.stark, n))
    return ctrls


def _synthetic_channel(spec, d: int, seed: int) -> ProcessMatrix:
    if isinstance(spec, str) and spec.endswith(".json"):
        return sio.load_process_matrix(spec)
    spec = {"kind": spec} if isinstance(spec, str) else dict(spec)
    kind = spec.get("kind", "identity")
    if kind == "identity":
        return identity_chi(d)
    if kind == "depolarizing":
        return depolarizing_chi(d, float(spec.get("p", 0.028)))
    if kind == "unitary":
        return chi_from_unitary(random_unitary(d, np.random.default_rng(substream(seed, "channel"))))
    raise ConfigError(f"unknown channel kind {kind!r}")


# ---------------------------------------------------------------------------
# scenarios; each returns (artifacts, report)

def scenario_multiplex(cfg: ExperimentConfig):
    p = cfg.params
    comb = CombConfig.from_dict(p["comb"]) if "comb" in p else presets.COMB_2MHZ
    array, xt = _load_array(cfg, comb, presets.STARK_1V56)
    mu = _param(p, "mu", presets.MU_MULTIPLEX, float)
    n = _param(p, "echo_order", 2, int)
    channels = _param(p, "channels", [c.index for c in array], list)
    records, eff_rows, xt_rows = [], [], []
    for ch in channels:
        res = store_and_retrieve(PathState.single(ch), array, xt, _recall_controls(array, [ch], n))
        probs = res.channel_probabilities()
        for det in res.channels:
            rec = simulate_counts([probs[det]], cfg.trials, mu, substream(cfg.seed, f"multiplex/C{ch}/C{det}"),
                                  time_bins=((res.retrieval_time, comb.period / 2),),
                                  setting_id=f"C{det}", input_id=f"C{ch}")
            records.append(rec)
        on = next(r.total for r in records if r.input_id == f"C{ch}" and r.setting_id == f"C{ch}")
        eff_rows.append([ch, res.efficiencies[ch], on / (cfg.trials * mu), res.retrieval_time])
        for r in records:
            if r.input_id == f"C{ch}" and r.setting_id != f"C{ch}":
                xt_rows.append([ch, int(r.setting_id[1:]), r.total, on,
                                optical_crosstalk_db(r.total, on) if on > 0 else float("nan")])
    measured = [r[4] for r in xt_rows if np.isfinite(r[4])]
    # pooled over all pairs; far less noisy than the single worst pair
    off = sum(r[2] for r in xt_rows) / max(len(xt_rows), 1)
    on = sum(r[3] for r in xt_rows) / max(len(xt_rows), 1)
    report = {
        "mean_efficiency": float(np.mean([r[1] for r in eff_rows])),
        "mean_measured_efficiency": float(np.mean([r[2] for r in eff_rows])),
        "max_crosstalk_db": max(measured) if measured else None,
        "pooled_crosstalk_db": optical_crosstalk_db(off, on) if on > 0 and off > 0 else None,
        "echo_order": n,
    }
    arts = {
        "counts.json": sio.dumps(sio.counts_to_json(records)),
        "efficiency.csv": sio.rows_to_csv(["channel", "model_efficiency", "measured_efficiency", "recall_time"],
                                          eff_rows),
        "crosstalk.csv": sio.rows_to_csv(["written", "read", "counts", "on_channel_counts", "crosstalk_db"],
                                         xt_rows),
    }
    return arts, report


def scenario_raqm(cfg: ExperimentConfig):
    p = cfg.params
    delta = _param(p, "delta", presets.COMB_200KHZ.delta, float)
    comb = CombConfig(delta, presets.COMB_200KHZ.finesse, presets.COMB_200KHZ.peak_depth,
                      presets.COMB_200KHZ.gamma_tilde)
    comb = CombConfig.from_dict(p["comb"]) if "comb" in p else comb
    stark = presets.STARK_1V56
    array, xt = _load_array(cfg, comb, stark)
    order = _param(p, "order", [2, 1, 3], list)
    channels = _param(p, "channels", [5, 6, 7], list)
    phases = _param(p, "phases", [-math.pi / 2, math.pi / 2, 3 * math.pi / 4], list)
    if len(phases) != len(channels):
        raise ConfigError("one qubit phase per channel required")
    rise = _param(p, "rise_time", presets.AOD_RISE_TIME, float)
    mu = _param(p, "mu", presets.MU_TIMEBIN, float)
    vis = _param(p, "visibility", None, float)
    sigma = phase_sigma_for_visibility(vis) if vis is not None else _param(p, "phase_sigma", 0.0, float)
    noise = raqm.NoiseParams(sigma, _param(p, "background", 0.0, float))
    qubits = [(TimeBinState.from_phase(float(ph)), ch) for ph, ch in zip(phases, channels)]
    sched = raqm.build_schedule(qubits, order, comb, stark, rise, _param(p, "n_max", 10, int))
    violations = raqm.validate_schedule(sched, comb)
    results = raqm.run_schedule(sched, array, noise=noise, seed=substream(cfg.seed, "raqm"),
                                trials=cfg.trials, mu=mu, xtalk=xt if p.get("electrical_crosstalk") else None)
    rows = [r.row() for r in results]
    worst_eta = min(r.efficiency for r in results)
    bound = certify.classical_bound(2, mu, worst_eta)
    report = {
        "order": sched.read_order,
        "violations": [v.message for v in violations],
        "echo_orders": {str(r.qubit): r.echo_order for r in results},
        "F_T": {str(r.qubit): r.f_total for r in results},
        "classical_bound": bound,
        "all_above_bound": all(r.f_total > bound for r in results),
        "phase_sigma": sigma,
    }
    arts = {
        "schedule.json": sio.dumps(sched.to_dict()),
        "timeline.csv": sched.timeline_csv(),
        "fidelity.csv": sio.dicts_to_csv(rows),
        "counts.json": sio.dumps(sio.counts_to_json([rec for r in results for rec in r.records])),
    }
    return arts, report


def scenario_qst(cfg: ExperimentConfig):
    p = cfg.params
    d = _param(p, "dim", 4, int)
    channels = _param(p, "channels", list(range(5, 5 + d)), list)
    if len(channels) != d:
        raise ConfigError("one channel per dimension required")
    comb = CombConfig.from_dict(p["comb"]) if "comb" in p else presets.COMB_2MHZ
    array, xt = _load_array(cfg, comb, presets.STARK_1V56)
    target = path_state(p.get("state", f"C{channels[0]}+C{channels[-1]}"), channels)
    ctrls = _recall_controls(array, channels, _param(p, "echo_order", 2, int))
    res = store_and_retrieve(target, array, xt, ctrls)
    if p.get("precompensate", True):
        # pre-distort the write amplitudes so unequal channel efficiencies cancel
        w = np.array([res.efficiencies[c] for c in channels])
        res = store_and_retrieve(PathState.from_amplitudes(target.ket() / np.sqrt(w), channels), array, xt, ctrls)
    idx = [res.channels.index(c) for c in channels]
    out = apply_phase_noise(res.output[np.ix_(idx, idx)], _param(p, "phase_sigma", 0.0, float))
    meas = tomo.paper_settings(d, channels)
    probs = np.clip(meas.probabilities(out), 0.0, 1.0)
    mu = _param(p, "mu", presets.MU_QPT, float)
    dark = _param(p, "dark_counts", 0.0, float)
    records = [simulate_counts([pr], cfg.trials, mu, substream(cfg.seed, f"qst/{lab}"), dark_counts=dark,
                               setting_id=lab) for pr, lab in zip(probs, meas.labels)]
    fit = tomo.qst_mle(records, meas, seed=substream(cfg.seed, "qst/mle"),
                       restarts=_param(p, "restarts", tomo.DEFAULT_RESTARTS, int))
    truth = ket_to_dm(target.ket())
    report = {
        "dim": d,
        "channels": channels,
        "fidelity": fidelity(fit.estimate, truth),
        "objective": fit.objective,
        "count_scale": fit.scale,
        "efficiency": float(np.trace(out).real),
        "classical_bound": certify.classical_bound(d, mu, min(1.0, float(np.trace(out).real))),
        "restarts": fit.restarts,
    }
    arts = {
        "counts.json": sio.dumps(sio.counts_to_json(records)),
        "rho.json": sio.dumps(sio.matrix_to_dict(fit.estimate)),
        "rho.csv": tomo.matrix_csv(fit.estimate),
    }
    return arts, report


def scenario_qpt(cfg: ExperimentConfig):
    p = cfg.params
    d = _param(p, "dim", 4, int)
    chi_true = _synthetic_channel(p.get("channel", {"kind": "depolarizing", "p": 0.028}), d, cfg.seed)
    if chi_true.dim != d:
        raise ConfigError("channel dimension does not match dim")
    sets = tomo.paper_settings(d)
    mu = _param(p, "mu", presets.MU_QPT, float)
    eff = _param(p, "efficiency", 0.3, float)
    records = tomo.simulate_process_counts(chi_true, sets, sets, cfg.trials, mu, substream(cfg.seed, "qpt/counts"),
                                           efficiency=eff)
    c = tomo.counts_matrix(records, sets, sets)
    chi, fit = tomo.qpt_mle(c, sets, sets, penalty=_param(p, "penalty", None, float),
                            seed=substream(cfg.seed, "qpt/mle"),
                            restarts=_param(p, "restarts", tomo.DEFAULT_RESTARTS, int))
    report = {
        "dim": d,
        "process_fidelity": chi.process_fidelity(),
        "true_process_fidelity": chi_true.process_fidelity(),
        "tp_residual": chi.tp_residual(),
        "objective": fit.objective,
        "count_scale": fit.scale,
        "restarts": fit.restarts,
    }
    arts = {
        "counts.json": sio.dumps(sio.counts_to_json(records)),
        "chi.json": sio.dumps(sio.matrix_to_dict(chi.chi)),
        "chi.csv": tomo.matrix_csv(chi.chi),
    }
    return arts, report


def scenario_bounds(cfg: ExperimentConfig):
    p = cfg.params
    dims = [int(x) for x in _param(p, "dims", [2, 3, 4, 5], list)]
    mus = [float(x) for x in _param(p, "mus", [presets.MU_PATH, presets.MU_TIMEBIN], list)]
    etas = np.linspace(*_param(p, "eta_range", [0.01, 1.0], list), _param(p, "points", 100, int))
    rows_eta = [[d, mu, e, f] for d in dims for mu in mus for e, f in certify.classical_bound_curve(d, mu, etas)]
    eta_fixed = _param(p, "eta", 0.3, float)
    mu_grid = np.linspace(*_param(p, "mu_range", [0.05, 2.0], list), _param(p, "points", 100, int))
    rows_mu = [[d, float(mu), eta_fixed, certify.classical_bound(d, float(mu), eta_fixed)]
               for d in dims for mu in mu_grid]
    point = _param(p, "point", {"d": 5, "mu": presets.MU_PATH, "eta": eta_fixed}, dict)
    det = certify.classical_bound_details(int(point["d"]), float(point["mu"]), float(point["eta"]))
    report = {"point": point, "fidelity": det.fidelity, "n_min": det.n_min, "gamma": det.gamma,
              "unit_efficiency": certify.classical_bound_unit_efficiency(int(point["d"]), float(point["mu"]))}
    arts = {
        "bounds_eta.csv": sio.rows_to_csv(["d", "mu", "eta", "fidelity"], rows_eta),
        "bounds_mu.csv": sio.rows_to_csv(["d", "mu", "eta", "fidelity"], rows_mu),
    }
    return arts, report


def scenario_capacity(cfg: ExperimentConfig):
    p = cfg.params
    d = _param(p, "dim", 4, int)
    chi = _synthetic_channel(p.get("chi", {"kind": "depolarizing", "p": 0.028}), d, cfg.seed)
    restarts = _param(p, "restarts", 5, int)
    c1 = certify.c1_lower_bound(chi, _param(p, "k", None, int), restarts, substream(cfg.seed, "capacity/c1"))
    report = {"dim": chi.dim, "c1": c1.c1, "c1_converged": c1.converged, "c1_iterations": c1.iterations}
    if p.get("q1", chi.dim <= certify.MAX_Q1_DIM):
        q1 = certify.q1_lower_bound(chi, restarts, substream(cfg.seed, "capacity/q1"))
        report.update({"q1": q1.q1, "q1_raw": q1.raw, "q1_converged": q1.converged})
    cert = certify.schmidt_certificate(chi)
    report.update({"entangled_fidelity": cert.fidelity, "schmidt_number": cert.dimension})
    ens = {"probabilities": c1.probabilities, "states": [sio.matrix_to_dict(np.outer(s, s.conj())) for s in c1.states],
           "povm": [sio.matrix_to_dict(e) for e in c1.povm]}
    return {"ensemble.json": sio.dumps(ens)}, report


SCENARIO_FUNCS = {
    "multiplex": scenario_multiplex,
    "raqm": scenario_raqm,
    "qst": scenario_qst,
    "qpt": scenario_qpt,
    "bounds": scenario_bounds,
    "capacity": scenario_capacity,
}


# ---------------------------------------------------------------------------
# pipeline

def versions() -> dict:
    return {"smafc": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def inputs_hash(cfg: ExperimentConfig) -> str:
    blob = sio.dumps({k: v for k, v in cfg.to_dict().items() if k != "out"}).encode()
    for path in cfg.referenced_files():
        blob += Path(path).read_bytes()
    return sio.sha256_bytes(blob)


def _error_payload(exc: BaseException, code: int) -> dict:
    return {"error": type(exc).__name__, "message": str(exc), "exit_code": code}


def classify_error(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, tomo.OptimizationError):
        return EXIT_OPTIMIZER
    if isinstance(exc, (ValueError, ArithmeticError)):
        return EXIT_MODEL
    raise exc


def run_pipeline(cfg: ExperimentConfig) -> tuple[int, dict]:
    """Run one scenario, writing artifacts and a manifest; returns ``(exit code, report)``."""
    out = Path(cfg.out)
    try:
        cfg.validate()
        arts, report = SCENARIO_FUNCS[cfg.scenario](cfg)
    except Exception as exc:  # mapped to exit codes; anything unexpected re-raises
        code = classify_error(exc)
        payload = _error_payload(exc, code)
        sio.write_json(out / "error.json", payload)
        return code, payload
    report = {"scenario": cfg.scenario, "seed": cfg.seed, "trials": cfg.trials, **report}
    arts["report.json"] = sio.dumps(report)
    written = {}
    for name, text in sorted(arts.items()):
        sio.atomic_write_text(out / name, text)
        written[name] = sio.sha256_bytes(text.encode())
    manifest = {
        "config": {k: v for k, v in cfg.to_dict().items() if k != "out"},
        "inputs_sha256": inputs_hash(cfg),
        "seed": cfg.seed,
        "versions": versions(),
        "artifacts": written,
    }
    sio.write_json(out / "manifest.json", manifest)
    stale = out / "error.json"
    if stale.exists():
        stale.unlink()
    return EXIT_OK, report


# ---------------------------------------------------------------------------
# argument parsing

COMMAND_SCENARIO = {"simulate": "multiplex", "plan": "raqm", "tomo": "qst", "qpt": "qpt",
                    "bound": "bounds", "capacity": "capacity"}


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", type=str, default=default, help="experiment config JSON")
    parser.add_argument("--seed", type=int, default=default, help="master seed")
    parser.add_argument("--out", type=str, default=default, help="output directory")
    parser.add_argument("--trials", type=int, default=default, help="trials per setting")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser(prog: str = "smafc") -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=prog, description="Multichannel Stark-modulated AFC memory toolkit")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        _global_flags(sp, suppress=True)
        return sp

    sp = add("simulate", "multiplexed storage across the channel array")
    sp.add_argument("--mu", type=float)
    sp.add_argument("--echo-order", type=int, dest="echo_order")
    sp = add("plan", "random-access schedule and end-to-end time-bin run")
    sp.add_argument("--order", type=_int_list)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--rise", type=float, dest="rise_time")
    sp.add_argument("--channels", type=_int_list)
    sp.add_argument("--visibility", type=float)
    sp = add("tomo", "path-qudit state tomography")
    sp.add_argument("--dim", type=int)
    sp.add_argument("--state", type=str)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--phase-sigma", type=float, dest="phase_sigma")
    sp = add("qpt", "process tomography of a synthetic channel")
    sp.add_argument("--dim", type=int)
    sp.add_argument("--depolarizing", type=float, help="depolarizing weight of the synthetic channel")
    sp.add_argument("--penalty", type=float)
    sp = add("bound", "classical fidelity bound")
    sp.add_argument("--d", type=int)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--eta", type=float)
    sp = add("capacity", "capacity lower bounds and Schmidt certificate")
    sp.add_argument("--chi", type=str, help="process matrix JSON")
    sp.add_argument("--k", type=int)
    sp.add_argument("--restarts", type=int)
    sp = add("demo", "run a bundled demo config")
    sp.add_argument("name", nargs="?", default=None)
    sp.add_argument("--list", action="store_true")
    return parser


def config_from_args(args) -> ExperimentConfig:
    if args.command == "demo":
        if args.name is None:
            raise ConfigError("demo needs a name; use --list to see the bundled demos")
        cfg = load_bundled(args.name)
    elif args.config:
        cfg = ExperimentConfig.load(args.config)
        if cfg.scenario != COMMAND_SCENARIO[args.command] and args.command != "simulate":
            raise ConfigError(f"config scenario {cfg.scenario!r} does not match command {args.command!r}")
    else:
        cfg = ExperimentConfig(COMMAND_SCENARIO[args.command])
    for key in ("seed", "trials", "out"):
        if getattr(args, key, None) is not None:
            setattr(cfg, key, getattr(args, key))
    p = cfg.params
    simple = ("mu", "echo_order", "order", "delta", "rise_time", "channels", "visibility", "dim", "state",
              "phase_sigma", "penalty", "k", "restarts")
    for key in simple:
        if getattr(args, key, None) is not None:
            p[key] = getattr(args, key)
    if args.command == "qpt" and args.depolarizing is not None:
        p["channel"] = {"kind": "depolarizing", "p": args.depolarizing}
    if args.command == "bound" and any(getattr(args, k) is not None for k in ("d", "mu", "eta")):
        point = dict(p.get("point", {"d": 5, "mu": presets.MU_PATH, "eta": 0.3}))
        for k in ("d", "mu", "eta"):
            if getattr(args, k) is not None:
                point[k] = getattr(args, k)
        p["point"] = point
        p.pop("mu", None)
    if args.command == "capacity" and args.chi is not None:
        if not Path(args.chi).is_file():
            raise ConfigError(f"process matrix file {args.chi} does not exist")
        p["chi"] = str(Path(args.chi).resolve())
    return cfg


def main(argv=None, prog: str = "smafc") -> int:
    parser = build_parser(prog)
    args = parser.parse_args(argv)
    if args.command == "demo" and args.list:
        print("\n".join(sorted(bundled_configs())))
        return EXIT_OK
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        payload = _error_payload(exc, EXIT_CONFIG)
        print(sio.dumps(payload), end="", file=sys.stderr)
        return EXIT_CONFIG
    code, report = run_pipeline(cfg)
    stream = sys.stdout if code == EXIT_OK else sys.stderr
    print(sio.dumps(report), end="", file=stream)
    return code


def raqm_main(argv=None) -> int:
    return main(argv, prog="raqm")


def certify_main(argv=None) -> int:
    return main(argv, prog="certify")


if __name__ == "__main__":
    sys.exit(main())
