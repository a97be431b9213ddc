"""Command-line front end.

Each command reads one JSON config file and writes one artifact, as JSON or
CSV. Output bytes depend only on the config and flags.

Exit codes: 0 success, 1 usage or config error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Any

import numpy as np

from .aps_oracle import aps_iterate, hausdorff_cells, scan_fixed_points
from .contracts import Offer, PayoffProfile, compute_thresholds, phi
from .equilibrium_sets import equilibrium_descriptor, eps_collar, welfare_sets
from .errors import ConfigError, PersuadedSearchError
from .game_engine import (
    BrokerDeviation,
    Mode,
    StrategyAutomaton,
    analytic_payoffs,
    expected_duration,
    mc_estimate,
    simulate_episode,
    verify_supported,
)
from .prior import Prior
from .search_core import surplus_bounds
from .signals import Signal

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2
LOOSEST_TOLERANCE = 1e-4

COMMANDS = ("thresholds", "payoff-set", "simulate", "verify", "minimax", "aps", "sweep")

# key -> commands that accept it (None = all)
ALLOWED_KEYS: dict[str, tuple | None] = {
    "prior": None,
    "k": ("payoff-set", "simulate", "verify", "minimax", "aps"),
    "k_grid": ("sweep",),
    "n": ("payoff-set", "simulate", "verify", "sweep"),
    "y": ("simulate", "verify"),
    "eps": ("payoff-set",),
    "trials": ("simulate",),
    "seed": ("simulate",),
    "mode": ("simulate", "verify"),
    "nu": ("simulate", "verify"),
    "deviations": ("simulate",),
    "agent_threshold_shift": ("simulate",),
    "grid_size": ("thresholds", "minimax"),
    "x_grid_size": ("verify", "aps"),
    "price_grid_size": ("verify", "aps"),
    "resolution": ("aps",),
    "max_rounds": ("aps",),
    "tolerance": ("thresholds", "verify", "aps"),
}

REQUIRED: dict[str, tuple] = {
    "thresholds": ("prior",),
    "payoff-set": ("prior", "k", "n"),
    "simulate": ("prior", "k", "y"),
    "verify": ("prior", "k", "y"),
    "minimax": ("prior", "k"),
    "aps": ("prior", "k"),
    "sweep": ("prior", "k_grid"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="persuaded-search", description="Equilibrium computations for search markets with information brokers.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="path to the JSON config")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
    p.add_argument("--trace", action="store_true", help="simulate: also export the first episode as JSON lines")
    return p


def load_config(path: str, command: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return validate_config(cfg, command)


def validate_config(cfg: Any, command: str) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key in cfg:
        if key not in ALLOWED_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        cmds = ALLOWED_KEYS[key]
        if cmds is not None and command not in cmds:
            raise ConfigError(f"config key {key!r} is not used by {command}")
    missing = [key for key in REQUIRED[command] if key not in cfg]
    if missing:
        raise ConfigError(f"{command} needs config keys {missing}")
    tol = cfg.get("tolerance")
    if tol is not None and not 0 < tol <= LOOSEST_TOLERANCE:
        raise ConfigError(f"tolerance {tol} refused: must lie in (0, {LOOSEST_TOLERANCE}]")
    return cfg


def _prior(cfg) -> Prior:
    try:
        return Prior.from_dict(cfg["prior"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad prior spec: {exc}") from exc


def _profile(cfg) -> PayoffProfile:
    try:
        return PayoffProfile.from_dict(cfg["y"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad payoff profile: {exc}") from exc


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# -- commands -----------------------------------------------------------------------


def cmd_thresholds(cfg, fmt, **_):
    prior = _prior(cfg)
    th = compute_thresholds(prior, cfg.get("grid_size", 2000), cfg.get("tolerance", 1e-12))
    d = th.to_dict()
    if fmt == "csv":
        return _dump_csv(["name", "value"], [(key, d[key]) for key in ("k_star", "K", "epsilon", "k_double_star", "bracket_width")]), EXIT_OK
    return _dump_json(d), EXIT_OK


def cmd_payoff_set(cfg, fmt, **_):
    prior = _prior(cfg)
    k, n = cfg["k"], cfg["n"]
    desc = equilibrium_descriptor(prior, k, n)
    if "eps" in cfg:
        collar = eps_collar(prior, k, n, cfg["eps"])
        extra = {"eps_collar": collar.to_dict()}
    else:
        extra = {}
    ws = welfare_sets(desc)
    if fmt == "csv":
        rows = []
        sets = [("outer", desc.certified_outer)] + [(f"inner_{j}", el) for j, el in enumerate(desc.certified_inner)]
        for name, el in sets:
            verts = el.named_vertices if hasattr(el, "named_vertices") else (("point", el),)
            for label, p in verts:
                rows.append([name, label] + list(p.as_array()))
        header = ["set", "vertex"] + [f"y{i + 1}" for i in range(n)] + ["agent"]
        return _dump_csv(header, rows), EXIT_OK
    return _dump_json({"descriptor": desc.to_dict(), "welfare": ws.to_dict(), **extra}), EXIT_OK


def _automaton(cfg, y):
    return StrategyAutomaton(y, Mode(cfg.get("mode", "competitive")), cfg.get("nu", 0.0))


def cmd_simulate(cfg, fmt, seed=None, trace=False, trace_sink=None, **_):
    prior = _prior(cfg)
    k, y = cfg["k"], _profile(cfg)
    if "n" in cfg and cfg["n"] != y.n:
        raise ConfigError(f"n={cfg['n']} but y has {y.n} brokers")
    seed = cfg.get("seed", 0) if seed is None else seed
    trials = cfg.get("trials", 100_000)
    devs = [
        BrokerDeviation(d["broker"] - 1, Offer(d["price"], Signal.from_dict(d["signal"])), d["period"])
        for d in cfg.get("deviations", [])
    ]
    aut = _automaton(cfg, y)
    kw = {"deviations": devs, "agent_threshold_shift": cfg.get("agent_threshold_shift", 0.0)}
    est = mc_estimate(aut, prior, k, trials, seed, **kw)
    if trace:
        ep = simulate_episode(aut, prior, k, seed, 0, trace=True, **kw)
        trace_sink("".join(json.dumps(rec, sort_keys=True) + "\n" for rec in ep.transcript))
    rows = est.rows()
    if fmt == "csv":
        return _dump_csv(["component", "mean", "se", "trials", "seed"], [[r[c] for c in ("component", "mean", "se", "trials", "seed")] for r in rows]), EXIT_OK
    analytic = analytic_payoffs(prior, k, y)
    return _dump_json({
        "estimates": rows,
        "analytic": {**analytic.to_dict(), "expected_duration": expected_duration(prior, k, y)},
    }), EXIT_OK


def cmd_verify(cfg, fmt, **_):
    prior = _prior(cfg)
    k, y = cfg["k"], _profile(cfg)
    n = cfg.get("n", y.n)
    xg = np.linspace(0.0, 1.0, cfg.get("x_grid_size", 401))[1:-1]
    pg = np.linspace(0.0, surplus_bounds(prior, k).mccall, cfg["price_grid_size"]) if "price_grid_size" in cfg else None
    rep = verify_supported(y, prior, k, n, cfg.get("mode", "competitive"), cfg.get("nu", 0.0), xg, pg, cfg.get("tolerance", 1e-8))
    code = EXIT_OK if rep.ok else EXIT_VERIFY
    if fmt == "csv":
        d = rep.to_dict()
        return _dump_csv(["check", "passed"], [(key, d[key]) for key in ("generated", "broker_ic", "agent_sr", "continuations_in_set")]), code
    return _dump_json(rep.to_dict()), code


def cmd_minimax(cfg, fmt, **_):
    rep = scan_fixed_points(_prior(cfg), cfg["k"], cfg.get("grid_size", 200))
    if fmt == "csv":
        return _dump_csv(["y1", "lower_bound"], zip(rep.y1_grid, rep.lower_bound_curve)), EXIT_OK
    return _dump_json(rep.to_dict()), EXIT_OK


def cmd_aps(cfg, fmt, **_):
    prior = _prior(cfg)
    k = cfg["k"]
    sb = surplus_bounds(prior, k)
    xg = np.linspace(0.0, 1.0, cfg.get("x_grid_size", 801))[1:-1]
    pg = np.linspace(0.0, sb.mccall, cfg.get("price_grid_size", 4001))
    res = aps_iterate(prior, k, cfg.get("resolution", 100), xg, pg, cfg.get("max_rounds", 500), cfg.get("tolerance", 1e-9))
    if fmt == "csv":
        return res.occupancy_csv(), EXIT_OK
    return _dump_json({
        "k": k,
        "y1_grid": res.y1_grid.tolist(),
        "y2_grid": res.y2_grid.tolist(),
        "occupancy": res.occupancy.astype(int).tolist(),
        "rounds": res.rounds,
        "sizes": res.sizes,
        "monotone": res.monotone,
        "min_broker_payoff": res.min_broker_payoff,
        "hausdorff_cells": hausdorff_cells(res, prior, k),
    }), EXIT_OK


def _fmt_intervals(ivs) -> str:
    return " U ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in ivs)


def cmd_sweep(cfg, fmt, **_):
    prior = _prior(cfg)
    n = cfg.get("n", 1)
    rows = []
    for k in cfg["k_grid"]:
        sb = surplus_bounds(prior, k)
        desc = equilibrium_descriptor(prior, k, n)
        ws = welfare_sets(desc)
        rows.append({
            "k": k,
            "autarky": sb.autarky,
            "mccall": sb.mccall,
            "phi": phi(prior, k),
            "regime": desc.regime.value,
            "surplus_inner": [list(iv) for iv in ws.surplus_inner],
            "agent_inner": [list(iv) for iv in ws.agent_inner],
        })
    if fmt == "csv":
        return _dump_csv(
            ["k", "autarky", "mccall", "phi", "regime", "surplus_inner", "agent_inner"],
            [[r["k"], r["autarky"], r["mccall"], r["phi"], r["regime"], _fmt_intervals(r["surplus_inner"]), _fmt_intervals(r["agent_inner"])] for r in rows],
        ), EXIT_OK
    return _dump_json({"n": n, "rows": rows}), EXIT_OK


HANDLERS = {
    "thresholds": cmd_thresholds,
    "payoff-set": cmd_payoff_set,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "minimax": cmd_minimax,
    "aps": cmd_aps,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    trace_path = f"{args.out}.trace.jsonl" if args.out else None

    def trace_sink(text):
        if trace_path:
            with open(trace_path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stderr.write(text)

    try:
        cfg = load_config(args.config, args.command)
        text, code = HANDLERS[args.command](cfg, args.format, seed=args.seed, trace=args.trace, trace_sink=trace_sink)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PersuadedSearchError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
