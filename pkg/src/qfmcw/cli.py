"""Command-line front end: ``qfmcw {fisher-sweep,simulate,fig3,invert}``.

A run is described by one JSON document (see ``schema/run_config.schema.json``)
merged over built-in defaults; command-line flags override both. The merged
configuration is echoed, with its SHA-256, into every output header.

Exit codes: 0 success, 2 configuration error, 3 estimator abort,
4 physicality or self-audit violation.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .bench import BASELINE, SweepSpec, fisher_sweep
from .estimation import EstimatorAbort, estimate_target, simulate_two_segment
from .fmcw import SPEED_OF_LIGHT, DiscreteGrid, ModulationProfile, TargetTruth
from .fisher import NonPhysicalStateError
from .gaussian import check_physicality
from .protocols import (
    ChannelModel,
    SfgParams,
    SourceParams,
    SviParams,
    apply_sfg,
    apply_svi,
    build_coherent_scenario,
    build_tmsv_qhd_scenario,
)

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_PHYSICALITY = 0, 2, 3, 4

DEFAULT_CONFIG = {
    "modulation": {"omega0": 2 * np.pi * 10e9, "delta_omega": 2 * np.pi * 1e6, "T_m": 1e-3, "j_B": 2048},
    "channel": {"eps": 1e-3, "n_th": 1.0},
    "source": {"kind": "coherent", "n_mean": 1e-3},
    "scenario": "coherent",
    "sfg": {"eps_s": 10.0, "exact_cov": False},
    "svi": {"r_prime": float(np.log(100.0))},
    "sweep": {"axis": "n_th", "start": 1e-3, "stop": 1e3, "num": 25},
    "target": {"d": 1200.0, "v": 30.0},
    "trials": 200,
    "noiseless": False,
    "seed": 20240601,
    "baseline": BASELINE,
    "output": {"path": None, "format": "csv"},
}


# simulate needs a record SNR well above the estimator threshold
SIMULATE_DEFAULTS = {"channel": {"eps": 1.0, "n_th": 0.0}, "source": {"kind": "coherent", "n_mean": 10.0}}

# fig3: two SFG strengths, SVI on the weak one with e^{r'} = 100, 61-point noise grid
FIG3_DEFAULTS = {
    "channel": {"eps": 1e-3, "n_th": 1.0},
    "source": {"kind": "tmsv", "n_mean": 1e-3},
    "scenario": "sfg",
    "svi": {"r_prime": float(np.log(100.0)), "eps_s": 0.1},
    "sweep": {"axis": "n_th", "start": 1e-3, "stop": 1e3, "num": 61, "eps_s": [0.1, 10.0]},
}


class ConfigError(ValueError):
    pass


class AuditError(RuntimeError):
    pass


def load_schema() -> dict:
    text = resources.files("qfmcw").joinpath("schema/run_config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key == "channel" and isinstance(value, dict) and ("T_th" in value or "omega" in value):
            out["channel"].pop("n_th", None)
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def build_config(file_config: dict | None, args: argparse.Namespace, defaults: dict | None = None) -> dict:
    cfg = _merge(DEFAULT_CONFIG if defaults is None else defaults, file_config or {})
    if getattr(args, "eps", None) is not None:
        cfg["channel"]["eps"] = args.eps
    if getattr(args, "nth", None) is not None:
        cfg["channel"] = {"eps": cfg["channel"]["eps"], "n_th": args.nth}
    if getattr(args, "nsv", None) is not None:
        cfg["source"]["n_mean"] = args.nsv
    if getattr(args, "eps_s", None) is not None:
        cfg["sfg"]["eps_s"] = args.eps_s
        cfg["sweep"]["eps_s"] = [args.eps_s]
    if getattr(args, "r_prime", None) is not None:
        cfg["svi"]["r_prime"] = args.r_prime
    if getattr(args, "trials", None) is not None:
        cfg["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "scenario", None) is not None:
        cfg["scenario"] = args.scenario
    if getattr(args, "noiseless", False):
        cfg["noiseless"] = True
    if getattr(args, "baseline", None) is not None:
        cfg["baseline"] = args.baseline
    if getattr(args, "out", None) is not None:
        cfg["output"]["path"] = args.out
    if getattr(args, "format", None) is not None:
        cfg["output"]["format"] = args.format
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid configuration at {'/'.join(map(str, exc.absolute_path)) or '<root>'}: {exc.message}")
    return cfg


def provenance(cfg: dict) -> dict:
    """The configuration as echoed and hashed; output routing is not part of the run."""
    return {k: v for k, v in cfg.items() if k != "output"}


def canonical_json(cfg: dict) -> str:
    return json.dumps(provenance(cfg), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def channel_from(cfg: dict) -> ChannelModel:
    ch = cfg["channel"]
    if "n_th" in ch:
        return ChannelModel(ch["eps"], ch["n_th"])
    return ChannelModel.from_temperature(ch["eps"], ch["omega"], ch["T_th"])


def profile_from(cfg: dict) -> tuple[ModulationProfile, DiscreteGrid]:
    m = cfg["modulation"]
    profile = ModulationProfile(m["omega0"], m["delta_omega"], m["T_m"], m.get("t_center", 0.0))
    grid = DiscreteGrid(m["j_B"], m["T_m"])
    return profile, grid


def family_from(cfg: dict):
    """Scenario family named by ``cfg['scenario']``; SFG/SVI/TMSV force a TMSV source."""
    ch = channel_from(cfg)
    kind = cfg["scenario"]
    n = cfg["source"]["n_mean"]
    if kind == "coherent":
        return build_coherent_scenario(SourceParams("coherent", n), ch)
    src = SourceParams("tmsv", n)
    if kind == "tmsv":
        return build_tmsv_qhd_scenario(src, ch)
    sfg = cfg["sfg"]
    if kind == "sfg":
        return apply_sfg(src, ch, SfgParams(sfg["eps_s"], sfg.get("exact_cov", False)))
    eps_s = cfg["svi"].get("eps_s", sfg["eps_s"])
    base = apply_sfg(src, ch, SfgParams(eps_s, sfg.get("exact_cov", False)))
    return apply_svi(base, SviParams(cfg["svi"]["r_prime"]))


def sweep_spec_from(cfg: dict) -> SweepSpec:
    sw = cfg["sweep"]
    eps_s = tuple(sw.get("eps_s", [cfg["sfg"]["eps_s"]]))
    ch = channel_from(cfg)
    return SweepSpec(
        eps=ch.eps,
        n=cfg["source"]["n_mean"],
        n_th=tuple(np.logspace(np.log10(sw["start"]), np.log10(sw["stop"]), sw["num"])),
        eps_s=eps_s,
        svi_eps_s=cfg["svi"].get("eps_s", eps_s[0]),
        r_prime=cfg["svi"]["r_prime"],
        exact_cov=cfg["sfg"].get("exact_cov", False),
    )


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def render_csv(command: str, cfg: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# qfmcw {__version__} {command}\n")
    buf.write(f"# config_sha256={config_hash(cfg)}\n")
    buf.write(f"# seed={cfg['seed']}\n")
    buf.write(f"# config={canonical_json(cfg)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def render_json(command: str, cfg: dict, payload: dict) -> str:
    doc = {
        "command": command,
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "seed": cfg["seed"],
        "config": provenance(cfg),
        **payload,
    }
    return json.dumps(doc, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _table_output(command: str, cfg: dict, columns, rows) -> str:
    if cfg["output"]["format"] == "json":
        return render_json(command, cfg, {"columns": list(columns), "rows": np.asarray(rows).tolist()})
    return render_csv(command, cfg, columns, rows)


def _run_sweep(command: str, cfg: dict, spec: SweepSpec, db_only: bool = False) -> int:
    table = fisher_sweep(spec, cfg["baseline"])
    if table.audit_failures:
        raise AuditError("self-audit failed:\n  " + "\n  ".join(table.audit_failures))
    columns, rows = list(table.columns), table.rows
    if db_only:
        keep = [0] + [i for i, c in enumerate(columns) if c.startswith("db_")]
        columns, rows = [columns[i] for i in keep], rows[:, keep]
    _emit(_table_output(command, cfg, columns, rows), cfg["output"]["path"])
    return EXIT_OK


def cmd_fisher_sweep(cfg: dict) -> int:
    return _run_sweep("fisher-sweep", cfg, sweep_spec_from(cfg))


def cmd_fig3(cfg: dict) -> int:
    return _run_sweep("fig3", cfg, sweep_spec_from(cfg), db_only=True)


TRIAL_COLUMNS = ("trial", "omega_b1_hat", "omega_b2_hat", "tau_hat", "v_hat", "flagged", "ambiguous")


def cmd_simulate(cfg: dict) -> int:
    profile, grid = profile_from(cfg)
    family = family_from(cfg)
    truth = TargetTruth(cfg["target"]["d"], cfg["target"]["v"])
    for p in np.linspace(0, 2 * np.pi, 9):
        report = check_physicality(family.state(0.0, p, 0.0, "ideal")) if family.ideal_is_state else True
        if not report:
            raise AuditError(f"{family.label}: non-physical state at phase {p:.3f}")
    result = simulate_two_segment(family, profile, grid, truth, cfg["trials"], cfg["seed"], cfg["noiseless"])
    rows = [[getattr(tr, c) for c in TRIAL_COLUMNS] for tr in result.trials]
    tau_err, v_err = result.max_relative_error()
    summary = {
        "tau_true": result.tau_true,
        "v_true": result.v_true,
        "omega_rising": result.omega_rising,
        "omega_falling": result.omega_falling,
        "max_relative_error_tau": tau_err,
        "max_relative_error_v": v_err,
        "rising": result.rising.to_dict(),
        "falling": result.falling.to_dict(),
    }
    path = cfg["output"]["path"]
    if cfg["output"]["format"] == "json":
        payload = {"report": summary, "columns": list(TRIAL_COLUMNS), "trials": rows}
        _emit(render_json("simulate", cfg, payload), path)
    elif path is None:
        _emit(render_json("simulate", cfg, {"report": summary}), None)
    else:
        _emit(render_csv("simulate", cfg, TRIAL_COLUMNS, rows), path)
        _emit(render_json("simulate", cfg, {"report": summary}), _report_path(path))
    return EXIT_OK


def _report_path(path: str) -> str:
    stem = path[:-4] if path.endswith(".csv") else path
    return stem + ".report.json"


def cmd_invert(cfg: dict, wb1: float, wb2: float, signed: bool = False) -> int:
    profile, _ = profile_from(cfg)
    est = estimate_target(wb1, wb2, profile, signed=signed)
    payload = {
        "tau": est.tau,
        "omega_d": est.omega_d,
        "range": est.tau * SPEED_OF_LIGHT / 2,
        "velocity": est.v,
        "ambiguous": est.ambiguous,
    }
    _emit(render_json("invert", cfg, payload), cfg["output"]["path"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="64-bit master seed")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--eps", type=float, help="target reflectivity")
    common.add_argument("--nth", type=float, help="background photons per mode")
    common.add_argument("--nsv", type=float, help="signal photons per mode")
    common.add_argument("--eps-s", dest="eps_s", type=float, help="SFG strength")
    common.add_argument("--r-prime", dest="r_prime", type=float, help="image-band squeezing")
    common.add_argument("--trials", type=int)

    parser = argparse.ArgumentParser(prog="qfmcw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qfmcw {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sweep = sub.add_parser("fisher-sweep", parents=[common], help="Fisher information against n_th")
    sweep.add_argument("--baseline", help=f"column used as the dB reference (default {BASELINE})")
    fig3 = sub.add_parser("fig3", parents=[common], help="built-in noise sweep, dB against coherent QHD")
    fig3.add_argument("--baseline")
    sim = sub.add_parser("simulate", parents=[common], help="two-segment Monte Carlo ranging run")
    sim.add_argument("--scenario", choices=("coherent", "tmsv", "sfg", "svi"))
    sim.add_argument("--noiseless", action="store_true")
    inv = sub.add_parser("invert", parents=[common], help="beat tones to delay and velocity")
    inv.add_argument("--wb1", type=float, required=True, help="rising-edge beat magnitude (rad/s)")
    inv.add_argument("--wb2", type=float, required=True, help="falling-edge beat (rad/s)")
    inv.add_argument("--signed", action="store_true", help="treat --wb2 as the signed falling beat")
    inv.add_argument("--omega0", type=float)
    inv.add_argument("--delta-omega", dest="delta_omega", type=float)
    inv.add_argument("--T-m", dest="T_m", type=float)
    return parser


def _read_config(path: str | None) -> dict | None:
    if path is None:
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_cfg = _read_config(args.config)
        if args.command == "invert":
            file_cfg = copy.deepcopy(file_cfg) if file_cfg else {}
            mod = file_cfg.setdefault("modulation", copy.deepcopy(DEFAULT_CONFIG["modulation"]))
            for key in ("omega0", "delta_omega", "T_m"):
                if getattr(args, key) is not None:
                    mod[key] = getattr(args, key)
        layer = {"simulate": SIMULATE_DEFAULTS, "fig3": FIG3_DEFAULTS}.get(args.command, {})
        defaults = _merge(DEFAULT_CONFIG, layer)
        cfg = build_config(file_cfg, args, defaults)
        if args.command == "fisher-sweep":
            return cmd_fisher_sweep(cfg)
        if args.command == "fig3":
            return cmd_fig3(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_invert(cfg, args.wb1, args.wb2, args.signed)
    except ConfigError as exc:
        print(f"qfmcw: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EstimatorAbort as exc:
        print(f"qfmcw: estimator abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except AuditError as exc:
        print(f"qfmcw: {exc}", file=sys.stderr)
        return EXIT_PHYSICALITY
    except NonPhysicalStateError as exc:
        print(f"qfmcw: physicality violation: {exc}", file=sys.stderr)
        return EXIT_PHYSICALITY
    except ValueError as exc:
        # parameter validation inside the library surfaces as a configuration error
        print(f"qfmcw: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
