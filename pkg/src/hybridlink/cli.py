"""Command-line reproduction harness: JSON scenarios in, deterministic CSV tables out.

    hybridlink <command> [--scenario file.json] [--out file.csv] [--param key=value ...]

``--param`` values are parsed as JSON when possible (so ``--param
alpha_grid=[0.1,1.0,10]`` works) and override the scenario file.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version as _pkg_version
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import HybridLinkError, NoSolutionError, ScenarioError, ScenarioParseError
from .keyrate import (
    channel_fidelity,
    channel_fidelity_exact,
    channel_fidelity_oracle,
    key_rate,
    max_distance,
    optimize_alpha,
)
from .fock import log_negativity
from .channels import pure_loss
from .states import HEStateSpec, lossy_he_logneg, make_he_state
from .swap import ProtocolParams, analytic_final_state, oracle_final_state, shared_logneg, sweep_entanglement

SCENARIO_VERSION = 1
THREADS_ENV = "HYBRIDLINK_THREADS"
ORACLE_FAILURE = "oracle-mismatch"


def library_version() -> str:
    try:
        return _pkg_version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


# --------------------------------------------------------------------------
# scenario schema
# --------------------------------------------------------------------------

# field kinds: "float", "int", "grid" (start, stop, count), "floats" (list)
PROTOCOL_FIELDS = {
    "eta_h": ("float", 0.55),
    "eta_o": ("float", 0.8),
    "eta_d": ("float", 1.0),
    "p": ("float", math.pi / 2),
    "l": ("float", 0.2),
}

SCHEMAS: dict[str, dict[str, tuple[str, Any]]] = {
    "fig2": {
        "alpha_grid": ("grid", [0.0, 2.0, 201]),
        "R_values": ("floats", [0.0, 0.25, 0.5, 0.75, 0.9]),
    },
    "alpha-sweep": {
        **PROTOCOL_FIELDS,
        "alpha_grid": ("grid", [0.01, 1.5, 150]),
        "distances": ("floats", [50.0, 100.0, 150.0, 200.0]),
    },
    "distance-sweep": {
        **PROTOCOL_FIELDS,
        "L_grid": ("grid", [0.0, 400.0, 81]),
        "alphas": ("floats", [0.5, 0.6, 0.8]),
    },
    "fig5": {
        **PROTOCOL_FIELDS,
        "alpha_grid": ("grid", [0.1, 1.0, 91]),
        "r_targets": ("floats", [1e-6, 1e-8, 1e-10]),
    },
    "fig6": {
        **PROTOCOL_FIELDS,
        "alpha": ("float", 0.5),
        "L_grid": ("grid", [0.0, 400.0, 81]),
        "eta_d_values": ("floats", [0.97, 0.95, 0.90]),
    },
    "fidelity": {
        "alpha": ("float", 0.5),
        "T_grid": ("grid", [0.0, 1.0, 101]),
        "n_bar_values": ("floats", [0.001, 0.005, 0.01]),
    },
    "point": {
        **PROTOCOL_FIELDS,
        "alpha": ("float", 0.6),
        "L": ("float", 100.0),
    },
    "oracle-check": {
        **{k: v for k, v in PROTOCOL_FIELDS.items() if k in ("p",)},
        "cv_dim": ("int", 24),
        "swap_alphas": ("floats", [0.3, 0.5, 0.8]),
        "swap_T": ("floats", [0.05, 0.1, 0.5]),
        "swap_eta_o": ("floats", [0.8, 1.0]),
        "swap_eta_h": ("floats", [0.55, 1.0]),
        "lossy_alphas": ("floats", [0.1, 0.3, 0.5, 0.7, 0.9]),
        "lossy_R": ("floats", [0.0, 0.25, 0.5, 0.75, 0.9]),
        "fidelity_alpha": ("float", 0.5),
        "fidelity_T": ("floats", [0.1, 0.5, 0.9]),
        "fidelity_n_bar": ("floats", [0.001, 0.005, 0.01]),
        "tolerance": ("float", 1e-6),
    },
}
ALIASES = {"fig3": "alpha-sweep", "fig4": "distance-sweep"}
COMMANDS = ["fig2", "fig3", "alpha-sweep", "fig4", "distance-sweep", "fig5", "fig6", "fidelity", "point", "oracle-check"]


def _coerce(name: str, kind: str, value: Any) -> Any:
    def num(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"field {name!r}: expected a number, got {v!r}")
        if not math.isfinite(v):
            raise ScenarioError(f"field {name!r}: value {v!r} is not finite")
        return float(v)

    if kind == "float":
        return num(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ScenarioError(f"field {name!r}: expected a positive integer, got {value!r}")
        return int(value)
    if kind == "grid":
        if not isinstance(value, (list, tuple)) or len(value) != 3:
            raise ScenarioError(f"field {name!r}: expected [start, stop, count], got {value!r}")
        start, stop = num(value[0]), num(value[1])
        count = value[2]
        if isinstance(count, bool) or not isinstance(count, int) or count < 1:
            raise ScenarioError(f"field {name!r}: count must be a positive integer, got {count!r}")
        if count > 1 and start == stop:
            raise ScenarioError(f"field {name!r}: start and stop coincide")
        return [start, stop, int(count)]
    if kind == "floats":
        if not isinstance(value, (list, tuple)) or not value:
            raise ScenarioError(f"field {name!r}: expected a non-empty list of numbers, got {value!r}")
        return [num(v) for v in value]
    raise AssertionError(kind)


def load_scenario_text(text: str, source: str = "<scenario>") -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be a JSON object")
    if data.get("version") != SCENARIO_VERSION:
        raise ScenarioError(f"{source}: field 'version' must be {SCENARIO_VERSION}, got {data.get('version')!r}")
    return data


def _parse_param(item: str) -> tuple[str, Any]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ScenarioError(f"--param expects key=value, got {item!r}")
    try:
        return key.strip(), json.loads(raw)
    except json.JSONDecodeError:
        return key.strip(), raw


def resolve_scenario(command: str, scenario: dict | None = None, overrides: dict | None = None) -> dict:
    """Merge defaults, scenario file and overrides; reject unknown keys."""
    command = ALIASES.get(command, command)
    schema = SCHEMAS[command]
    merged: dict[str, Any] = {}
    for src in (scenario or {}, overrides or {}):
        for key, value in src.items():
            if key in ("version", "command", "out"):
                continue
            if key not in schema:
                raise ScenarioError(f"unknown field {key!r} for command {command!r}; allowed: {sorted(schema)}")
            merged[key] = value
    out = {}
    for key, (kind, default) in schema.items():
        out[key] = _coerce(key, kind, merged.get(key, default))
    return out


def grid_values(grid: Sequence[float]) -> np.ndarray:
    start, stop, count = grid
    return np.linspace(start, stop, int(count))


# --------------------------------------------------------------------------
# result tables
# --------------------------------------------------------------------------

def fmt(v: Any) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.8e}"


@dataclass
class ResultTable:
    command: str
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    ok: bool = True

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# hybridlink {library_version()}\n")
        buf.write(f"# command: {self.command}\n")
        for key in sorted(self.inputs):
            buf.write(f"# param {key} = {json.dumps(self.inputs[key])}\n")
        for note in self.notes:
            buf.write(f"# {note}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(fmt(v) for v in row) + "\n")
        return buf.getvalue()


def thread_count() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ScenarioError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ScenarioError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def parallel_map(fn: Callable, items: Iterable) -> list:
    """Ordered map over grid points, capped by HYBRIDLINK_THREADS."""
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _label(v: float) -> str:
    return f"{v:g}"


def _protocol(sc: dict, **kw) -> ProtocolParams:
    base = {k: sc[k] for k in PROTOCOL_FIELDS if k in sc}
    base.update(kw)
    return ProtocolParams(**base)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_fig2(sc: dict) -> ResultTable:
    alphas = grid_values(sc["alpha_grid"])
    Rs = sc["R_values"]
    rows = parallel_map(lambda a: [a] + [lossy_he_logneg(abs(a), R) for R in Rs], alphas)
    cols = ["alpha"] + [f"E_N[R={_label(R)}]" for R in Rs]
    return ResultTable("fig2", cols, rows, sc)


def cmd_alpha_sweep(sc: dict) -> ResultTable:
    alphas = grid_values(sc["alpha_grid"])
    dists = sc["distances"]
    base = _protocol(sc, alpha=0.5, T=1.0)

    def row(a):
        return [a] + [sweep_entanglement("alpha", [a], base.with_distance(L))[0].effective_logneg for L in dists]

    rows = parallel_map(row, alphas)
    cols = ["alpha"] + [f"effective_logneg[L={_label(L)}]" for L in dists]
    return ResultTable("alpha-sweep", cols, rows, sc)


def cmd_distance_sweep(sc: dict) -> ResultTable:
    Ls = grid_values(sc["L_grid"])
    alphas = sc["alphas"]
    base = _protocol(sc, alpha=0.5, T=1.0)
    per_alpha = parallel_map(lambda a: sweep_entanglement("distance", Ls, base.with_(alpha=a)), alphas)
    rows = [[L] + [per_alpha[j][i].effective_logneg for j in range(len(alphas))] for i, L in enumerate(Ls)]
    cols = ["L_km"] + [f"effective_logneg[alpha={_label(a)}]" for a in alphas]
    return ResultTable("distance-sweep", cols, rows, sc)


def cmd_fig5(sc: dict) -> ResultTable:
    alphas = grid_values(sc["alpha_grid"])
    targets = sc["r_targets"]
    base = _protocol(sc, alpha=0.5, T=1.0)

    def reach(a, r):
        try:
            return max_distance(r, a, base)
        except NoSolutionError:
            return float("nan")

    rows = parallel_map(lambda a: [a] + [reach(a, r) for r in targets], alphas)
    notes = []
    lo, hi = float(min(alphas)), float(max(alphas))
    if lo > 0 and hi - lo >= 1e-4:
        for r in targets:
            opt = optimize_alpha("max_distance", base, (lo, min(hi, 2.0)), r_target=r)
            notes.append(f"optimum r_target={_label(r)}: alpha_star={fmt(opt.alpha)} L_max={fmt(opt.value)}")
    cols = ["alpha"] + [f"L_max_km[r={_label(r)}]" for r in targets]
    return ResultTable("fig5", cols, rows, sc, notes)


def cmd_fig6(sc: dict) -> ResultTable:
    Ls = grid_values(sc["L_grid"])
    etas = sc["eta_d_values"]
    base = _protocol(sc, alpha=sc["alpha"], T=1.0)
    rows = parallel_map(lambda L: [L] + [key_rate(base.with_(eta_d=e).with_distance(L)).r for e in etas], Ls)
    cols = ["L_km"] + [f"r[eta_d={_label(e)}]" for e in etas]
    return ResultTable("fig6", cols, rows, sc)


def cmd_fidelity(sc: dict) -> ResultTable:
    Ts = grid_values(sc["T_grid"])
    nbs = sc["n_bar_values"]
    a = sc["alpha"]
    rows = [[T] + [channel_fidelity(T, nb, a) for nb in nbs] for T in Ts]
    cols = ["T"] + [f"F[n_bar={_label(nb)}]" for nb in nbs]
    return ResultTable("fidelity", cols, rows, sc)


def cmd_point(sc: dict) -> ResultTable:
    params = _protocol(sc, alpha=sc["alpha"], T=1.0).with_distance(sc["L"])
    res = analytic_final_state(params)
    kr = key_rate(params)
    en = shared_logneg(res.h)
    cols = ["alpha", "L_km", "T", "h", "P0", "E_N", "effective_logneg", "I_AB", "chi_AE", "chi_raw", "r_raw", "r"]
    row = [params.alpha, sc["L"], params.T, res.h, res.P0, en, res.P0 * en, kr.I_AB, kr.chi_AE, kr.chi_raw, kr.r_raw, kr.r]
    return ResultTable("point", cols, [row], sc)


def cmd_oracle_check(sc: dict) -> ResultTable:
    tol = sc["tolerance"]
    D = sc["cv_dim"]
    suites = []

    swap_pts = [
        (a, T, eo, eh)
        for a in sc["swap_alphas"]
        for T in sc["swap_T"]
        for eo in sc["swap_eta_o"]
        for eh in sc["swap_eta_h"]
    ]

    def swap_dev(pt):
        a, T, eo, eh = pt
        params = ProtocolParams(alpha=a, T=T, eta_o=eo, eta_h=eh, p=sc["p"])
        ref = analytic_final_state(params)
        orc = oracle_final_state(params, D)
        return max(float(np.max(np.abs(orc.rho - ref.rho_shared))), abs(orc.P0 - ref.P0))

    suites.append(("swap_state_and_P0", len(swap_pts), max(parallel_map(swap_dev, swap_pts)), tol))

    lossy_pts = [(a, R) for a in sc["lossy_alphas"] for R in sc["lossy_R"]]

    def lossy_dev(pt):
        a, R = pt
        rho = pure_loss(make_he_state(HEStateSpec(a, D)).dm(), "b", 1.0 - R)
        return abs(log_negativity(rho, ["b"]) - lossy_he_logneg(a, R))

    suites.append(("lossy_he_logneg", len(lossy_pts), max(parallel_map(lossy_dev, lossy_pts)), min(tol, 1e-8)))

    fa = sc["fidelity_alpha"]
    fid_pts = [(T, nb) for T in sc["fidelity_T"] for nb in sc["fidelity_n_bar"]]

    def fid_dev(pt):
        T, nb = pt
        return abs(channel_fidelity_oracle(T, nb, fa, D).coherence_restored_overlap - channel_fidelity(T, nb, fa))

    def fid_exact_dev(pt):
        T, nb = pt
        return abs(channel_fidelity_oracle(T, nb, fa, D).coherence_restored_overlap - channel_fidelity_exact(T, nb, fa))

    suites.append(("channel_fidelity", len(fid_pts), max(parallel_map(fid_dev, fid_pts)), tol))
    suites.append(("channel_fidelity_exact", len(fid_pts), max(parallel_map(fid_exact_dev, fid_pts)), 1e-9))

    rows = [[name, n, dev, t, dev < t] for name, n, dev, t in suites]
    table = ResultTable("oracle-check", ["suite", "cases", "max_deviation", "tolerance", "pass"], rows, sc)
    table.ok = all(r[-1] for r in rows)
    return table


HANDLERS: dict[str, Callable[[dict], ResultTable]] = {
    "fig2": cmd_fig2,
    "alpha-sweep": cmd_alpha_sweep,
    "distance-sweep": cmd_distance_sweep,
    "fig5": cmd_fig5,
    "fig6": cmd_fig6,
    "fidelity": cmd_fidelity,
    "point": cmd_point,
    "oracle-check": cmd_oracle_check,
}


def run(command: str, scenario: dict | None = None, overrides: dict | None = None) -> ResultTable:
    name = ALIASES.get(command, command)
    if name not in HANDLERS:
        raise ScenarioError(f"unknown command {command!r}")
    sc = resolve_scenario(name, scenario, overrides)
    try:
        return HANDLERS[name](sc)
    except HybridLinkError:
        raise
    except (ValueError, TypeError) as exc:
        raise ScenarioError(str(exc)) from exc


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridlink", description="Hybrid DV/CV entanglement-swapping calculator.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--scenario", help="JSON scenario file (must contain \"version\": 1)")
    ap.add_argument("--out", help="write the CSV here instead of stdout")
    ap.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="override a scenario field")
    ap.add_argument("--version", action="version", version=f"hybridlink {library_version()}")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = None
        out_path = args.out
        if args.scenario:
            try:
                with open(args.scenario, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ScenarioError(f"cannot read scenario: {exc}") from None
            scenario = load_scenario_text(text, args.scenario)
            out_path = out_path or scenario.get("out")
        overrides = dict(_parse_param(p) for p in args.param)
        table = run(args.command, scenario, overrides)
        text = table.to_csv()
        if out_path:
            with open(out_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if not table.ok:
            print(f"hybridlink: error [{ORACLE_FAILURE}]: one or more suites exceeded tolerance", file=sys.stderr)
            return 3
    except HybridLinkError as exc:
        print(f"hybridlink: error [{exc.category}]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
