"""``raqm`` command-line entry point.

Configuration comes from defaults, then an optional key=value file, then the
RAQM_SEED environment variable, then command-line flags (last wins). Exit
status is 0 on success, 2 for configuration errors and 3 for runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__, bellharness as bh, chaos, raqm, sphgeom
from .emit import AtomicBatch, csv_text, dumps_json, fmt_decimal, rational_obj
from .exactmath import RationalAngle, format_rational, is_prime, parse_rational

COMMANDS = ("chsh", "bell1964", "mi-report", "audit", "triangle", "chsh-cert",
            "qubit", "singlet", "butterfly", "lorenz", "convergence")


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _int(text: str) -> int:
    return int(float(text)) if "e" in str(text).lower() else int(text)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    help: str


KEYS: dict[str, Key] = {
    "seed": Key(_int, 42, "master seed"),
    "p": Key(_int, 10007, "grid prime"),
    "epsilon": Key(float, None, "disk radius in radians (default 10/p)"),
    "runs": Key(_int, 100_000, "number of runs"),
    "mode": Key(str, "sampled", "exact | sampled"),
    "experiment": Key(str, None, "chsh | bell1964 (for mi-report, audit, convergence)"),
    "angles": Key(_floats, None, "comma-separated setting angles in degrees"),
    "polarizer": Key(_bool, None, "treat angles as polariser orientations (spin angle doubled)"),
    "workers": Key(_int, 1, "worker processes"),
    "certify": Key(_bool, True, "build counterfactual tables"),
    "out": Key(str, "raqm-out", "output directory"),
    "bins": Key(float, None, "coarse bin width for mi-report (default epsilon)"),
    "m": Key(_int, None, "grid index for singlet"),
    "m1": Key(_int, None, "amplitude index for qubit"),
    "n1": Key(_int, 0, "phase index for qubit"),
    "delta_theta1": Key(float, None, "override the first-collision deflection"),
    "target": Key(float, 1.0, "butterfly target deflection"),
    "steps": Key(_int, 1_000_000, "Lorenz steps"),
    "dt": Key(float, 1e-3, "Lorenz step"),
    "initial": Key(_floats, (1.0, 1.0, 1.0), "Lorenz initial state x,y,z"),
    "coarse_epsilon": Key(float, 0.5, "Lorenz coarse-graining radius"),
    "lyapunov_steps": Key(_int, 200_000, "steps for the Lyapunov estimate (dt 0.01)"),
    "primes": Key(_ints, (101, 1009, 10007), "primes for the convergence scan"),
}

REQUIRED = {"qubit": ("m1",), "singlet": ("m",)}
NEEDS_PRIME = {"chsh", "bell1964", "mi-report", "audit", "qubit", "singlet"}


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="raqm", description="Rational-Hilbert-space Bell lab")
    ap.add_argument("--version", action="version", version=f"raqm {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    for name, key in KEYS.items():
        common.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=key.help)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, parents=[common])
        if cmd == "triangle":
            sp.add_argument("cos_xy", help="rational cos XY, e.g. 3/5")
            sp.add_argument("cos_yz", help="rational cos YZ")
            sp.add_argument("vertex", help="vertex angle in turns (1/7) or degrees (30deg)")
        elif cmd == "chsh-cert":
            sp.add_argument("cosines", nargs=4, metavar="COS",
                            help="cos X0Y0, X1Y0, X0Y1, X1Y1")
            for a in ("alpha", "beta", "gamma", "delta"):
                sp.add_argument("--" + a, help=f"vertex angle {a} (turns or NNdeg)")
            sp.add_argument("--realized", default="X0Y0")
    return ap


def resolve(command: str, flags: dict[str, Any], env: Optional[dict] = None) -> dict[str, Any]:
    """Merge defaults, file, RAQM_SEED and flags into a typed config dict."""
    env = os.environ if env is None else env
    raw: dict[str, Any] = {}
    if flags.get("config"):
        raw.update(read_config_file(flags["config"]))
    if env.get("RAQM_SEED"):
        raw["seed"] = env["RAQM_SEED"]
    for k in KEYS:
        if flags.get(k) is not None:
            raw[k] = flags[k]
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    cfg = {}
    for k, key in KEYS.items():
        if k in raw:
            try:
                cfg[k] = key.parse(raw[k])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k}: {raw[k]!r} ({exc})") from exc
        else:
            cfg[k] = key.default
    for k in REQUIRED.get(command, ()):
        if cfg[k] is None:
            raise ConfigError(f"missing required key {k} for {command}")
    if command in NEEDS_PRIME and not (cfg["p"] >= 3 and is_prime(cfg["p"])):
        raise ConfigError(f"p must be prime (and >= 3), got {cfg['p']}")
    if cfg["runs"] < 1:
        raise ConfigError("runs must be >= 1")
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if cfg["mode"] not in ("exact", "sampled"):
        raise ConfigError(f"mode must be exact or sampled, got {cfg['mode']!r}")
    if command in ("chsh", "bell1964"):
        if cfg["experiment"] not in (None, command):
            raise ConfigError(f"experiment={cfg['experiment']} conflicts with command {command}")
        cfg["experiment"] = command
    elif cfg["experiment"] is None:
        cfg["experiment"] = "chsh"
    if cfg["experiment"] not in bh.DEFAULT_ANGLES:
        raise ConfigError(f"experiment must be chsh or bell1964, got {cfg['experiment']!r}")
    if cfg["epsilon"] is None:
        cfg["epsilon"] = 10.0 / cfg["p"]
    if not cfg["epsilon"] > 0:
        raise ConfigError("epsilon must be positive")
    return cfg


def experiment_config(cfg: dict) -> bh.ExperimentConfig:
    try:
        return bh.ExperimentConfig(
            experiment=cfg["experiment"], seed=cfg["seed"], p=cfg["p"], epsilon=cfg["epsilon"],
            runs=cfg["runs"], mode=cfg["mode"], angles=cfg["angles"], polarizer=cfg["polarizer"],
            workers=cfg["workers"], certify=cfg["certify"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _header(command: str, config: dict) -> dict:
    return {"tool": "raqmlab", "version": __version__, "command": command, "config": config}


def _cell_key(xy: tuple[int, int], experiment: str) -> str:
    if experiment == "bell1964":
        return f"x{xy[0] + 1},x{xy[1] + 1}"
    return f"{xy[0]},{xy[1]}"


# -- run log ----------------------------------------------------------------------

def runlog_csv(log: bh.RunLog) -> str:
    bell = log.config.experiment == "bell1964"
    flags = bh.BELL_FLAGS if bell else bh.CHSH_FLAGS
    header = ("run_id", "x", "y", "m", "cos_exact", "outcome_a", "outcome_b") + flags
    nominal = log.nominal + (1 if bell else 0)
    cos_text: dict[int, str] = {}
    rows = []
    p = log.config.p
    for i in range(len(log)):
        m = int(log.m[i])
        c = cos_text.get(m)
        if c is None:
            c = cos_text[m] = format_rational(Fraction(m, p) - 1)
        d = ("",) * len(flags) if log.defined is None else tuple(int(v) for v in log.defined[i])
        rows.append((int(log.run[i]), int(nominal[i, 0]), int(nominal[i, 1]), m, c,
                     int(log.a[i]), int(log.b[i])) + d)
    return csv_text(header, rows)


def _mi_obj(rep: bh.MIReport) -> dict:
    return {
        "coarse_chi2": fmt_decimal(rep.coarse_chi2),
        "coarse_dof": rep.coarse_dof,
        "coarse_p": fmt_decimal(rep.coarse_p),
        "coarse_bin_width": fmt_decimal(rep.coarse_bin_width),
        "exact_product_zero_rate": None if rep.product_zero_rate is None
        else fmt_decimal(rep.product_zero_rate),
        "exact_all_defined_rate": None if rep.all_defined_rate is None
        else fmt_decimal(rep.all_defined_rate),
    }


def experiment_summary(command: str, res: bh.ExperimentResult, rep: Optional[bh.MIReport],
                       audit: Optional[bh.CausalityAudit]) -> dict:
    cfg = res.config
    out = _header(command, cfg.as_dict())
    if res.s_value is not None:
        out["S"] = rational_obj(res.s_value)
    else:
        out["bell1964"] = {"lhs": rational_obj(res.bell_lhs), "rhs": rational_obj(res.bell_rhs)}
    out["violated"] = res.violated
    out["correlations"] = {_cell_key(xy, cfg.experiment): rational_obj(c)
                           for xy, c in res.correlations.items()}
    if res.grid_m:
        out["grid_m"] = {_cell_key(xy, cfg.experiment): m for xy, m in res.grid_m.items()}
    out["mi"] = None if rep is None else _mi_obj(rep)
    out["lc1_violations"] = None if audit is None else audit.lc1_violations
    out["lc2_undefined"] = None if audit is None else audit.lc2_undefined
    return out


# -- commands ----------------------------------------------------------------------

def cmd_experiment(command: str, cfg: dict, args) -> int:
    ec = experiment_config(cfg)
    res = bh.run_experiment(ec)
    rep = bh.mi_report(res.log) if len(set(res.log.cell.tolist())) >= 2 else None
    audit = bh.causality_audit(res.log) if ec.certify else None
    summary = experiment_summary(command, res, rep, audit)
    out = Path(cfg["out"])
    with AtomicBatch() as batch:
        batch.write(out / f"{command}_runs.csv", runlog_csv(res.log))
        batch.write(out / f"{command}_summary.json", dumps_json(summary))
    head = f"S = {summary['S']['decimal']}" if "S" in summary else \
        f"LHS = {summary['bell1964']['lhs']['decimal']}, RHS = {summary['bell1964']['rhs']['decimal']}"
    print(f"{command}: {head}, violated={res.violated}; wrote {out}/{command}_summary.json")
    return 0


def cmd_mi_report(cfg: dict, args) -> int:
    ec = experiment_config(cfg)
    log = bh.simulate_runs(ec)
    rep = bh.mi_report(log, cfg["bins"])
    obj = _header("mi-report", ec.as_dict())
    obj["mi"] = _mi_obj(rep)
    obj["cell_counts"] = {_cell_key(k, ec.experiment): v for k, v in rep.cell_counts.items()}
    if rep.support is not None:
        obj["support"] = {_cell_key(k, ec.experiment): [fmt_decimal(x) for x in v]
                          for k, v in rep.support.items()}
        obj["single_flip_undefined_rate"] = None if rep.single_flip_undefined_rate is None \
            else fmt_decimal(rep.single_flip_undefined_rate)
    obj["exact_histograms"] = {_cell_key(k, ec.experiment): {str(m): n for m, n in v.items()}
                               for k, v in rep.exact_histograms.items()}
    cells = list(rep.coarse_histograms)
    nb = len(next(iter(rep.coarse_histograms.values())))
    rows = [(b,) + tuple(rep.coarse_histograms[c][b] for c in cells) for b in range(nb)]
    out = Path(cfg["out"])
    with AtomicBatch() as batch:
        batch.write(out / "mi_report.json", dumps_json(obj))
        batch.write(out / "mi_coarse.csv",
                    csv_text(("bin",) + tuple("cell_" + _cell_key(c, ec.experiment) for c in cells), rows))
    print(dumps_json(obj["mi"]), end="")
    return 0


def cmd_audit(cfg: dict, args) -> int:
    ec = experiment_config(cfg)
    if not ec.certify:
        raise ConfigError("audit needs certify=true")
    log = bh.simulate_runs(ec)
    a = bh.causality_audit(log)
    obj = _header("audit", ec.as_dict())
    obj.update(lc1_violations=a.lc1_violations, lc2_undefined=a.lc2_undefined,
               defined_checked=a.defined_checked, by_kind=a.by_kind)
    with AtomicBatch() as batch:
        batch.write(Path(cfg["out"]) / "audit.json", dumps_json(obj))
    print(dumps_json(obj), end="")
    return 0


def _angle(text: str) -> RationalAngle:
    t = text.strip()
    try:
        if t.endswith("deg"):
            return RationalAngle.from_degrees(parse_rational(t[:-3]))
        return RationalAngle.parse(t)
    except ValueError as exc:
        raise ConfigError(f"bad angle {text!r}: {exc}") from exc


def _rat(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_triangle(cfg: dict, args) -> int:
    try:
        spec = sphgeom.TriangleSpec(_rat(args.cos_xy), _rat(args.cos_yz), _angle(args.vertex))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    v = sphgeom.impossible_triangle(spec)
    obj = {"tool": "raqmlab", "version": __version__, "command": "triangle",
           "input": {"cos_xy": format_rational(spec.cos_xy), "cos_yz": format_rational(spec.cos_yz),
                     "vertex_angle": str(spec.vertex_angle)},
           "certificate": v.to_record("XZ")}
    print(dumps_json(obj), end="")
    return 0


def cmd_chsh_cert(cfg: dict, args) -> int:
    c = [_rat(t) for t in args.cosines]
    angles = {a: _angle(getattr(args, a)) for a in ("alpha", "beta", "gamma", "delta")
              if getattr(args, a) is not None}
    try:
        quad = sphgeom.QuadSpec(cos_x0y0=c[0], cos_x1y0=c[1], cos_x0y1=c[2], cos_x1y1=c[3], **angles)
        cert = sphgeom.chsh_certify(quad, args.realized)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    obj = {"tool": "raqmlab", "version": __version__, "command": "chsh-cert",
           "certificate": cert.to_json_obj()}
    print(dumps_json(obj), end="")
    return 0


def cmd_qubit(cfg: dict, args) -> int:
    try:
        q = raqm.make_qubit(cfg["p"], cfg["m1"], cfg["n1"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    st = raqm.uncertainty_stats(q)
    obj = _header("qubit", {"p": q.p, "m1": q.m1, "n1": q.n1})
    obj.update(
        born_frequency=rational_obj(raqm.born_frequency(q)),
        cos_theta=rational_obj(q.cos_theta),
        phase_turns=format_rational(q.phase_turns),
        uncertainty={"mean_z": rational_obj(st.mean_z), "mean_x": rational_obj(st.mean_x),
                     "mean_y": rational_obj(st.mean_y), "std_x": fmt_decimal(st.std_x),
                     "std_y": fmt_decimal(st.std_y), "lhs": fmt_decimal(st.product_lhs),
                     "rhs": rational_obj(st.bound_rhs), "holds": st.holds},
    )
    with AtomicBatch() as batch:
        batch.write(Path(cfg["out"]) / "qubit_bits.csv", raqm.bits_to_csv(q.bits))
    print(dumps_json(obj), end="")
    return 0


def cmd_singlet(cfg: dict, args) -> int:
    try:
        ens = raqm.singlet_ensemble(cfg["p"], cfg["m"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    a, b = ens.alice_bits, ens.bob_bits
    obj = _header("singlet", {"p": ens.p, "m": ens.m})
    obj.update(cos_theta=rational_obj(ens.cos_theta), correlation=rational_obj(ens.correlation()))
    with AtomicBatch() as batch:
        batch.write(Path(cfg["out"]) / "singlet.csv",
                    csv_text(("index", "outcome_a", "outcome_b"),
                             ((i, int(a[i]), int(b[i])) for i in range(len(a)))))
    print(dumps_json(obj), end="")
    return 0


def cmd_butterfly(cfg: dict, args) -> int:
    params = chaos.ButterflyParams()
    pert = chaos.grav_perturbation(params)
    dt1 = pert.delta_theta1 if cfg["delta_theta1"] is None else cfg["delta_theta1"]
    table = chaos.butterfly_table(params, dt1, cfg["target"])
    rows = [(M, fmt_decimal(lg), fmt_decimal(10.0 ** lg)) for M, lg in table]
    obj = _header("butterfly", {"delta_theta1": fmt_decimal(dt1), "target": fmt_decimal(cfg["target"])})
    obj.update(delta_a=fmt_decimal(pert.delta_a), delta_theta1=fmt_decimal(dt1),
               collisions=table[-1][0], final_log10_delta_theta=fmt_decimal(table[-1][1]))
    with AtomicBatch() as batch:
        batch.write(Path(cfg["out"]) / "butterfly.csv",
                    csv_text(("M", "log10_delta_theta", "delta_theta"), rows))
    print(dumps_json(obj), end="")
    return 0


def cmd_lorenz(cfg: dict, args) -> int:
    init = cfg["initial"]
    if len(init) != 3:
        raise ConfigError("initial must have three components")
    traj = chaos.lorenz_integrate(init, chaos.LorenzParams(dt=cfg["dt"], steps=cfg["steps"]))
    lyap = chaos.lyapunov_exponent(init, chaos.LorenzParams(dt=0.01, steps=cfg["lyapunov_steps"]))
    eps = cfg["coarse_epsilon"]
    coarse = chaos.coarse_grain_stats(traj, chaos.CoarseGrainSpec(eps))
    half = chaos.coarse_grain_stats(traj, chaos.CoarseGrainSpec(eps / 2))
    obj = _header("lorenz", {"initial": list(init), "dt": cfg["dt"], "steps": cfg["steps"],
                             "lyapunov_steps": cfg["lyapunov_steps"], "coarse_epsilon": eps})
    obj.update(
        lyapunov=fmt_decimal(lyap),
        coarse={"occupied_bins": len(coarse.counts),
                "mean": [fmt_decimal(v) for v in coarse.global_mean]},
        coarse_half={"occupied_bins": len(half.counts),
                     "mean": [fmt_decimal(v) for v in half.global_mean]},
        fine_mean=[fmt_decimal(v) for v in traj.mean(axis=0)],
    )
    stride = max(1, len(traj) // 100_000)
    t = np.arange(0, len(traj), stride)
    rows = ((fmt_decimal(i * cfg["dt"]),) + tuple(fmt_decimal(v) for v in traj[i]) for i in t)
    with AtomicBatch() as batch:
        batch.write(Path(cfg["out"]) / "lorenz_summary.json", dumps_json(obj))
        batch.write(Path(cfg["out"]) / "lorenz_trajectory.csv", csv_text(("t", "x", "y", "z"), rows))
    print(dumps_json(obj), end="")
    return 0


def cmd_convergence(cfg: dict, args) -> int:
    for p in cfg["primes"]:
        if p < 3 or not is_prime(p):
            raise ConfigError(f"p must be prime (and >= 3), got {p}")
    ec = experiment_config(dict(cfg, p=cfg["primes"][0], epsilon=10.0 / cfg["primes"][0]))
    rows = bh.convergence_scan(ec, cfg["primes"])
    obj = _header("convergence", {"experiment": ec.experiment, "angles": list(ec.angles),
                                  "polarizer": ec.polarizer, "primes": list(cfg["primes"])})
    recs = []
    if ec.experiment == "chsh":
        header = ("p", "S", "S_decimal", "deviation", "bound_4_over_p")
        lines = []
        for r in rows:
            recs.append({"p": r["p"], "S": rational_obj(r["S"]),
                         "deviation": fmt_decimal(r["deviation"]), "bound": fmt_decimal(r["bound"])})
            lines.append((r["p"], format_rational(r["S"]), fmt_decimal(r["S"]),
                          fmt_decimal(r["deviation"]), fmt_decimal(r["bound"])))
    else:
        header = ("p", "lhs", "rhs", "lhs_decimal", "rhs_decimal")
        lines = []
        for r in rows:
            recs.append({"p": r["p"], "lhs": rational_obj(r["lhs"]), "rhs": rational_obj(r["rhs"])})
            lines.append((r["p"], format_rational(r["lhs"]), format_rational(r["rhs"]),
                          fmt_decimal(r["lhs"]), fmt_decimal(r["rhs"])))
    obj["scan"] = recs
    with AtomicBatch() as batch:
        batch.write(Path(cfg["out"]) / "convergence.csv", csv_text(header, lines))
        batch.write(Path(cfg["out"]) / "convergence.json", dumps_json(obj))
    print(csv_text(header, lines), end="")
    return 0


DISPATCH = {
    "mi-report": cmd_mi_report, "audit": cmd_audit, "triangle": cmd_triangle,
    "chsh-cert": cmd_chsh_cert, "qubit": cmd_qubit, "singlet": cmd_singlet,
    "butterfly": cmd_butterfly, "lorenz": cmd_lorenz, "convergence": cmd_convergence,
}


_NEG_VALUE = re.compile(r"^-\d+(/\d+|\.\d*)?(e-?\d+)?(deg)?$")


def _protect_negatives(argv: list[str]) -> list[str]:
    # argparse reads "-1/3" as an option; a leading space keeps it positional
    return [" " + a if _NEG_VALUE.match(a) else a for a in argv]


def main(argv: Optional[list[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_protect_negatives(argv))
    try:
        cfg = resolve(args.command, vars(args))
        if args.command in ("chsh", "bell1964"):
            return cmd_experiment(args.command, cfg, args)
        return DISPATCH[args.command](cfg, args)
    except ConfigError as exc:
        print(f"raqm: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surfaced with context, exit 3
        print(f"raqm {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
