"""badapprox command line.

Every command except ``replay`` stores a run record (config, timestamps,
payload, artifact hashes) under the run cache: ``--cache``, else the
``cache`` key of ``--config``, else $BADAPPROX_CACHE, else ./badapprox-runs.

Exit status: 0 success, 2 usage or precondition failure, 3 numeric or
search failure.

Config files are flat ``key = value`` lines (``#`` comments). Keys are the
long flag names with dashes or underscores; flags given on the command line
win over the file.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .cantor import (
    cantor_build,
    cantor_census,
    child_count_bound,
    codim_rate,
    lower_bound_dim,
    md_constant,
    unit_cube_ball,
)
from .diophantine import (
    BoundCurveParams,
    ConsistentUpTo,
    MatrixSystem,
    approx_constant_truncated,
    bound_curves,
    hensley_dim,
    is_bad_truncated,
    p_exponent,
    transference_exponent,
)
from .dimension import (
    EkOracle,
    box_count_dim,
    covering_upper_bound,
    ek_cylinder_dim,
    levels_csv,
)
from .errors import (
    DegenerateInput,
    NoLegalMove,
    PrecisionExhausted,
    SearchBoundTooSmall,
    SimplexViolation,
)
from .haw import (
    Ball,
    alice_fallback,
    alice_simplex_strategy,
    badd_constant,
    bob_random,
    bob_shrink,
    bob_steer,
    play,
)
from .lattice import (
    DEFAULT_B,
    DEFAULT_SEARCH_BOUND,
    EntersCuspAt,
    dani_check,
    dani_epsilon,
    orbit_min_profile,
)
from .runs import (
    SCHEMA_VERSION,
    RunConfig,
    RunRecord,
    cache_dir,
    canonical_json,
    now,
    read_record,
    sha256,
    validate,
    write_record,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _frac(s) -> Fraction:
    try:
        return Fraction(str(s).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}") from exc


def _pos_int(s) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


# ---------------------------------------------------------------------------
# commands: each takes the parameter dict and returns (result, artifacts, text)


def run_approx(p: dict):
    A = MatrixSystem.parse(p["entries"])
    quality, w = approx_constant_truncated(A, p["Q"])
    res = {
        "m": A.m,
        "n": A.n,
        "quality": float(quality),
        "quality_exact": str(quality),
        "q": list(w.q),
        "p": list(w.p),
    }
    lines = [f"quality  {float(quality):.12g}  ({quality})", f"witness  q={w.q} p={w.p}"]
    if p.get("c") is not None:
        v = is_bad_truncated(A, p["c"], p["Q"])
        res["verdict"] = str(v)
        if not isinstance(v, ConsistentUpTo):
            res["violation"] = {"q": list(v.witness.q), "p": list(v.witness.p), "quality": float(v.witness.quality)}
        lines.append(f"verdict  {v}")
    return res, {}, "\n".join(lines)


def run_orbit(p: dict):
    A = MatrixSystem.parse(p["entries"])
    prof = orbit_min_profile(A, p["tmax"], p["dt"], p["search_bound"])
    csv = prof.to_csv()
    i = int(np.argmin(prof.deltas))
    res = {
        "rows": len(prof),
        "min_delta": float(prof.deltas[i]),
        "argmin_t": float(prof.times[i]),
        "certified_lower": prof.certified_lower(),
        "csv_sha256": sha256(csv),
    }
    return res, {"orbit.csv": csv}, csv.rstrip("\n")


def run_dani(p: dict):
    A = MatrixSystem.parse(p["entries"])
    v = dani_check(A, p["c"], p["tmax"], p["dt"], p["search_bound"])
    res = {"verdict": str(v), "eps": dani_epsilon(p["c"], A.m, A.n)}
    if isinstance(v, EntersCuspAt):
        res.update({"t": v.t, "delta": v.delta, "witness": list(v.witness)})
    else:
        res.update({"t_max": v.t_max, "boundary": v.boundary, "min_delta": v.min_delta})
    return res, {}, f"eps      {res['eps']:.12g}\nverdict  {v}"


def run_game(p: dict):
    m = p["m"]
    beta = p["beta"]
    center = [_frac(x) for x in p["center"].split(",")] if p.get("center") else [Fraction(1, 3)] * m
    if len(center) != m:
        raise UsageError(f"--center needs {m} coordinates")
    initial = Ball(tuple(center), p["radius"])
    alice = (lambda s: alice_simplex_strategy(s, m)) if p["alice"] == "simplex" else alice_fallback
    if p["bob"] == "random":
        bob = bob_random(p["seed"])
    elif p["bob"] == "shrink":
        bob = bob_shrink
    else:
        target = [_frac(x) for x in p["target"].split(",")] if p.get("target") else [Fraction(1, 2)] * m
        bob = bob_steer(tuple(target))
    state = play(alice, bob, beta, initial, p["rounds"])
    x, err = state.limit_point()
    game = state.to_dict()
    validate(game, "game.schema.json")
    const = badd_constant(beta, m)
    res = {
        "game": game,
        "limit_point": [float(v) for v in x],
        "limit_point_exact": [str(v) for v in x],
        "radius": float(err),
        "constant": float(const),
        "constant_exact": str(const),
    }
    text = [f"limit    {[float(v) for v in x]}  (+- {float(err):.3g})", f"constant {float(const):.6g}"]
    if p["Q"]:
        c = const * (1 - Fraction(1, 10**6))
        A = MatrixSystem.from_rows([[v] for v in x])
        v = is_bad_truncated(A, c, p["Q"])
        res["check"] = {"Q": p["Q"], "c": float(c), "verdict": str(v)}
        text.append(f"check    {v}")
    return res, {"game.json": canonical_json(game)}, "\n".join(text)


def run_cantor(p: dict):
    d, beta, depth = p["d"], p["beta"], p["depth"]
    bound = child_count_bound(d, beta)
    if p["mode"] == "census":
        tree = cantor_census(beta, d, depth)
    else:
        tree = cantor_build(lambda s: alice_simplex_strategy(s, d), beta, unit_cube_ball(d), depth)
    doc = tree.to_dict()
    res = {
        "mode": p["mode"],
        "min_kept": tree.min_kept,
        "bound": bound,
        "M_d": md_constant(d),
        "lower_bound_dim": lower_bound_dim(d, beta),
        "codim_rate": codim_rate(d, beta),
        "tree": doc,
    }
    text = (
        f"min kept {tree.min_kept}\nbound    {bound}\n"
        f"M_d      {md_constant(d):.12g}\ndim >=   {res['lower_bound_dim']:.10g}"
    )
    return res, {}, text


class _Segment:
    """Horizontal unit segment y = 1/2 in the unit square, thickened by the scale."""

    def __call__(self, pts):
        return pts[:, 1] == 0.5

    def at_scale(self, pts, s):
        return np.abs(pts[:, 1] - 0.5) <= s / 2


def run_boxdim(p: dict):
    ests = {}
    smax = p["smax"] or (16 if p["set"] == "ek" else 10)
    scales = [2.0**-j for j in range(p["smin"], smax + 1)]
    if p["set"] == "ek":
        if p["method"] in ("cylinder", "both"):
            ests["cylinder"] = ek_cylinder_dim(p["k"], p["max_depth"]).to_dict()
        if p["method"] in ("box", "both"):
            ests["box"] = box_count_dim(EkOracle(p["k"]), [(0, 1)], scales, p["samples"], p["seed"]).to_dict()
        if p["k"] >= 2:
            ests["hensley"] = {"value": hensley_dim(p["k"]), "method": "formula", "params": {"k": p["k"]}, "stderr": 0.0}
    elif p["set"] == "square":
        ests["box"] = box_count_dim(lambda x: np.ones(len(x), bool), [(0, 1), (0, 1)], scales, p["samples"], p["seed"]).to_dict()
    else:
        ests["box"] = box_count_dim(_Segment(), [(0, 1), (0, 1)], scales, p["samples"], p["seed"]).to_dict()
    text = "\n".join(f"{k:9s}{e['value']:.6f} +- {e['stderr']:.2g}" for k, e in ests.items())
    return {"estimates": ests}, {}, text


def run_cover(p: dict):
    m, n = p["m"], p["n"]
    A0 = MatrixSystem.parse(p["A0"]) if p.get("A0") else MatrixSystem.zeros(m, n)
    est = covering_upper_bound(m, n, p["c"], p["t"], p["depth"], A0, p["b"], p["search_bound"])
    csv = levels_csv(est)
    text = csv + f"value {est.value:.6f}  (N = {est.params['N']}, certificate {est.params['worst_kill_certificate']:.4f})"
    return {"estimate": est.to_dict()}, {"levels.csv": csv}, text


def run_bounds(p: dict):
    m, n = p["m"], p["n"]
    res = {"p_exponent": str(p_exponent(m, n)), "transference_exponent": str(transference_exponent(m, n))}
    lines = [f"p(m,n)   {res['p_exponent']}"]
    if p.get("c") is not None:
        pe = p["p"] if p.get("p") is not None else p_exponent(m, n)
        lo, hi = bound_curves(m, n, p["c"], BoundCurveParams(p["k1"], p["k2"], pe))
        res.update({"lower": lo, "upper": hi, "p_used": float(pe)})
        lines += [f"lower    {lo:.10g}", f"upper    {hi:.10g}", f"p used   {float(pe):g}"]
    if p.get("beta") is not None:
        d = p.get("d") or m
        res.update({"d": d, "M_d": md_constant(d), "lower_bound_dim": lower_bound_dim(d, p["beta"]),
                    "codim_rate": codim_rate(d, p["beta"]), "child_count_bound": child_count_bound(d, p["beta"])})
        lines.append(f"dim >=   {res['lower_bound_dim']:.10g}")
    if p.get("k") is not None:
        res["hensley"] = hensley_dim(p["k"])
        lines.append(f"hensley  {res['hensley']:.10g}")
    return res, {}, "\n".join(lines)


RUNNERS = {
    "approx": run_approx,
    "orbit": run_orbit,
    "dani": run_dani,
    "game": run_game,
    "cantor": run_cantor,
    "boxdim": run_boxdim,
    "cover": run_cover,
    "bounds": run_bounds,
}

# built-in defaults; argparse defaults are None so config files can fill gaps
DEFAULTS = {
    "approx": {"Q": 10_000, "c": None},
    "orbit": {"tmax": 5.0, "dt": 1e-3, "search_bound": DEFAULT_SEARCH_BOUND},
    "dani": {"tmax": 20.0, "dt": 1e-3, "search_bound": DEFAULT_SEARCH_BOUND},
    "game": {"m": 1, "beta": Fraction(1, 10), "rounds": 40, "radius": Fraction(1), "center": None,
             "alice": "simplex", "bob": "random", "target": None, "Q": 1000},
    "cantor": {"d": 1, "beta": Fraction(1, 50), "depth": 3, "mode": "census"},
    "boxdim": {"set": "ek", "k": 2, "max_depth": 12, "method": "both", "smin": 6, "smax": None, "samples": 4},
    "cover": {"m": 1, "n": 1, "c": 0.05, "t": math.log(10), "depth": 3, "A0": None, "b": DEFAULT_B,
              "search_bound": DEFAULT_SEARCH_BOUND},
    "bounds": {"m": 1, "n": 1, "c": None, "k1": 1.0, "k2": 1.0, "p": None, "d": None, "beta": None, "k": None},
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="badapprox", description="Badly approximable systems of linear forms.")
    ap.add_argument("--version", action="version", version=f"badapprox {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, entries=False):
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--cache", help="run cache directory")
        sp.add_argument("--no-record", action="store_true", help="do not write a run record")
        sp.add_argument("--out", help="also write the payload JSON here")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=_pos_int, default=None, help="cap on worker threads")
        if entries:
            sp.add_argument("--entries", default=None, help="matrix literal: phi, sqrt2, e, 1/2; rows split by ';'")

    sp = sub.add_parser("approx", help="approximation constant up to Q, optional Bad(c) verdict")
    common(sp, True)
    sp.add_argument("--Q", type=_pos_int)
    sp.add_argument("--c", type=_frac)

    for name, hlp in (("orbit", "shortest-vector profile along g_t u_A Z^{m+n}"), ("dani", "cusp excursion check")):
        sp = sub.add_parser(name, help=hlp)
        common(sp, True)
        sp.add_argument("--tmax", type=float)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--search-bound", type=_pos_int)
        if name == "dani":
            sp.add_argument("--c", type=_frac)

    sp = sub.add_parser("game", help="play the hyperplane game with Alice's simplex strategy")
    common(sp)
    sp.add_argument("--m", type=_pos_int)
    sp.add_argument("--beta", type=_frac)
    sp.add_argument("--rounds", type=_pos_int)
    sp.add_argument("--radius", type=_frac)
    sp.add_argument("--center")
    sp.add_argument("--alice", choices=["simplex", "fallback"])
    sp.add_argument("--bob", choices=["random", "shrink", "steer"])
    sp.add_argument("--target")
    sp.add_argument("--Q", type=int, help="check the limit point up to Q (0 skips)")

    sp = sub.add_parser("cantor", help="kept-child counts of the Cantor construction")
    common(sp)
    sp.add_argument("--d", type=_pos_int)
    sp.add_argument("--beta", type=_frac)
    sp.add_argument("--depth", type=_pos_int)
    sp.add_argument("--mode", choices=["census", "build"])

    sp = sub.add_parser("boxdim", help="dimension estimates (E_k cylinders, box counting)")
    common(sp)
    sp.add_argument("--set", choices=["ek", "square", "segment"])
    sp.add_argument("--k", type=_pos_int)
    sp.add_argument("--max-depth", type=_pos_int)
    sp.add_argument("--method", choices=["cylinder", "box", "both"])
    sp.add_argument("--smin", type=_pos_int, help="coarsest scale 2^-smin")
    sp.add_argument("--smax", type=_pos_int, help="finest scale 2^-smax (default 16 on E_k, 10 in the plane)")
    sp.add_argument("--samples", type=_pos_int)

    sp = sub.add_parser("cover", help="covering upper estimate for dim Bad_{m,n}(c)")
    common(sp)
    sp.add_argument("--m", type=_pos_int)
    sp.add_argument("--n", type=_pos_int)
    sp.add_argument("--c", type=float)
    sp.add_argument("--t", type=float)
    sp.add_argument("--depth", type=_pos_int)
    sp.add_argument("--A0")
    sp.add_argument("--b", type=float)
    sp.add_argument("--search-bound", type=_pos_int)

    sp = sub.add_parser("bounds", help="closed-form dimension bounds and exponents")
    common(sp)
    sp.add_argument("--m", type=_pos_int)
    sp.add_argument("--n", type=_pos_int)
    sp.add_argument("--c", type=float)
    sp.add_argument("--k1", type=float)
    sp.add_argument("--k2", type=float)
    sp.add_argument("--p", type=_frac, help="override p(m,n)")
    sp.add_argument("--d", type=_pos_int)
    sp.add_argument("--beta", type=_frac)
    sp.add_argument("--k", type=_pos_int, help="also evaluate the E_k asymptotic")

    sp = sub.add_parser("replay", help="rerun a stored record and compare its payload byte for byte")
    sp.add_argument("record", help="run directory or its record.json")
    return ap


_META = {"config", "cache", "no_record", "out", "threads", "command"}


def _read_config(path: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        text = Path(path).read_text(encoding="utf-8")
        cp.read_string("[run]\n" + text)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in cp["run"].items()}


def resolve_parameters(ns: argparse.Namespace, sub: argparse.ArgumentParser) -> tuple[dict, dict]:
    """Merge built-in defaults, config file and flags; returns (params, meta)."""
    cmd = ns.command
    params = dict(DEFAULTS[cmd])
    if cmd in ("approx", "orbit", "dani"):
        params.setdefault("entries", None)
    if cmd == "dani":
        params.setdefault("c", None)
    params["seed"] = 0
    meta = {"cache": None, "threads": None}
    if getattr(ns, "config", None):
        actions = {a.dest: a for a in sub._actions}
        for k, v in _read_config(ns.config).items():
            if k in ("cache", "threads"):
                meta[k] = v if k == "cache" else int(v)
                continue
            if k not in actions or k in _META:
                raise UsageError(f"unknown config key {k!r} for {cmd}")
            a = actions[k]
            try:
                params[k] = a.type(v) if a.type else v
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {k}: {exc}") from exc
    for k, v in vars(ns).items():
        if k in _META or v is None:
            continue
        params[k] = v
    if ns.cache:
        meta["cache"] = ns.cache
    if ns.threads:
        meta["threads"] = ns.threads
    if cmd in ("approx", "orbit", "dani") and not params.get("entries"):
        raise UsageError("--entries is required")
    if cmd == "dani" and params.get("c") is None:
        raise UsageError("--c is required")
    return params, meta


def execute(command: str, params: dict):
    result, artifacts, text = RUNNERS[command](params)
    payload = {"version": SCHEMA_VERSION, "kind": command, "parameters": params, "result": result}
    payload = json.loads(canonical_json(payload))
    validate(payload, "payload.schema.json")
    return payload, artifacts, text


def _replay(path: str) -> int:
    doc, stored, arts = read_record(path)
    cfg = doc["config"]
    cmd = cfg["command"]
    ap = build_parser()
    sub = ap._subparsers._group_actions[0].choices[cmd]
    params = dict(cfg["parameters"])
    # parameters were stored as JSON; rebuild the typed values through the parsers
    actions = {a.dest: a for a in sub._actions}
    for k, v in params.items():
        a = actions.get(k)
        if v is not None and a is not None and a.type is not None and isinstance(v, str):
            params[k] = a.type(v)
        elif k in DEFAULTS[cmd] and isinstance(DEFAULTS[cmd][k], Fraction) and isinstance(v, str):
            params[k] = Fraction(v)
    payload, artifacts, _ = execute(cmd, params)
    fresh = canonical_json(payload)
    ok = fresh == stored and all(arts.get(k) == v for k, v in artifacts.items())
    print(f"payload  {'identical' if fresh == stored else 'DIFFERS'}")
    for k, v in artifacts.items():
        print(f"{k:9s}  {'identical' if arts.get(k) == v else 'DIFFERS'}")
    return EXIT_OK if ok else EXIT_NUMERIC


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if ns.command == "replay":
            return _replay(ns.record)
        sub = ap._subparsers._group_actions[0].choices[ns.command]
        params, meta = resolve_parameters(ns, sub)
        if meta["threads"]:
            import numba

            numba.set_num_threads(min(meta["threads"], numba.config.NUMBA_NUM_THREADS))
        started = now()
        payload, artifacts, text = execute(ns.command, params)
        finished = now()
        print(text)
        if ns.out:
            Path(ns.out).write_text(canonical_json(payload), encoding="utf-8")
        if not ns.no_record:
            rec = RunRecord(RunConfig(ns.command, payload["parameters"]), started, finished, payload, artifacts)
            d = write_record(rec, cache_dir(meta["cache"]))
            print(f"record   {d}", file=sys.stderr)
        return EXIT_OK
    except (PrecisionExhausted, SimplexViolation, NoLegalMove) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SearchBoundTooSmall as exc:
        print(f"error: {exc} (try --search-bound {max(2 * exc.needed, 1)})", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DegenerateInput, ValueError, ZeroDivisionError, argparse.ArgumentTypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
