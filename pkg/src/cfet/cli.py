"""Command-line front end.

Subcommands: ``propagate`` (trajectory CSV), ``bench`` (error-effort
sweeps), ``verify`` (symbolic self-checks), ``stability`` (Floquet chart
CSV), ``schemes`` (registry listing / document dump).  Configuration is a
JSON document, one file per run; every CSV is schema-stable with
round-trip-safe 17-significant-digit numbers.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys
import time

import numpy as np

from . import models
from .expm import (
    ChebyshevBackend,
    DenseBackend,
    ExpmError,
    KrylovBackend,
    SU2Backend,
    TaylorBackend,
)
from .liealg import HallBasis, filter_relevant, tree_str
from .magnus import magnus_expand, order_residuals
from .schemes import SchemeError, dump_scheme, scheme_lookup, scheme_names
from .stepper import StepPlan, StepperError, propagate

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_VERIFICATION = 3

_FMT = "%.17g"


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return _FMT % float(x)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} line {exc.lineno}: {exc.msg}") from exc


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return cfg[key]


# ---------------------------------------------------------------------------
# config -> objects


def _build_model(cfg: dict):
    mid = _require(cfg, "id", "model")
    params = {k: v for k, v in cfg.items() if k != "id"}
    try:
        if mid == "two_level":
            p = models.TwoLevelParams(**params)
            return models.two_level_generator(p), p
        if mid == "quantum_oscillator":
            p = models.OscillatorParams(**params)
            return models.quantum_oscillator(p), p
        if mid == "mathieu":
            p = models.OscillatorParams(**params)
            return models.mathieu_classical(p), p
        if mid == "spin_chain":
            if "centers" in params:
                params["centers"] = tuple(params["centers"])
            p = models.SpinChainParams(**params)
            return models.spin_chain(p), p
        if mid == "hydrogen":
            if "levels" in params:
                params["levels"] = tuple(tuple(x) for x in params["levels"])
            p = models.HydrogenParams(**params)
            return models.hydrogen(p), p
    except (TypeError, models.ModelError) as exc:
        raise ConfigError(f"model {mid!r}: {exc}") from exc
    raise ConfigError(f"unknown model id {mid!r}")


def _build_backend(cfg: dict, gen=None):
    kind = _require(cfg, "type", "backend")
    try:
        if kind == "dense":
            return DenseBackend()
        if kind == "su2":
            return SU2Backend()
        if kind == "krylov":
            return KrylovBackend(int(_require(cfg, "K", "backend")))
        if kind == "taylor":
            return TaylorBackend(int(_require(cfg, "terms", "backend")))
        if kind == "chebyshev":
            if "lmin" in cfg and "lmax" in cfg:
                lo, hi = float(cfg["lmin"]), float(cfg["lmax"])
            elif gen is not None:
                lo, hi = gen.spectral_bounds()
                # bounds are for H(t); stage exponents carry a dt factor
                scale = float(cfg.get("dt_scale", 1.0))
                lo, hi = scale * lo, scale * hi
            else:
                raise ConfigError("chebyshev backend needs lmin/lmax")
            return ChebyshevBackend(lo, hi, cfg.get("terms"))
    except ExpmError as exc:
        raise ConfigError(f"backend: {exc}") from exc
    raise ConfigError(f"unknown backend type {kind!r}")


def _build_plan(cfg: dict) -> StepPlan:
    try:
        return StepPlan(
            t0=float(_require(cfg, "t0", "plan")),
            T=float(_require(cfg, "T", "plan")),
            dt=float(cfg["dt"]) if "dt" in cfg else None,
            target=float(cfg["target"]) if "target" in cfg else None,
            record_stride=int(cfg.get("record_stride", 1)),
        )
    except StepperError as exc:
        raise ConfigError(f"plan: {exc}") from exc


def _initial_state(cfg, gen, params, seed):
    spec = cfg.get("initial", "ground")
    if isinstance(spec, list):
        v = np.asarray([complex(x[0], x[1]) if isinstance(x, list) else complex(x)
                        for x in spec])
        if v.shape[0] != gen.dim:
            raise ConfigError("initial state dimension mismatch")
        return v
    if isinstance(spec, dict) and "coherent" in spec:
        c = spec["coherent"]
        return models.coherent_state(float(c["q"]), float(c["p"]), params)
    if spec == "ground":
        v = np.zeros(gen.dim, dtype=complex)
        v[0] = 1.0
        return v
    if spec == "all_down":
        return models.all_down_state(int(round(math.log2(gen.dim))))
    if spec == "random":
        rng = np.random.default_rng(seed)
        v = rng.normal(size=gen.dim) + 1j * rng.normal(size=gen.dim)
        return v / np.linalg.norm(v)
    raise ConfigError(f"unknown initial state {spec!r}")


def _observable(name: str, gen):
    if name == "norm":
        return lambda t, v: float(np.linalg.norm(v))
    if name.startswith("prob:"):
        i = int(name.split(":", 1)[1])
        if not 0 <= i < gen.dim:
            raise ConfigError(f"observable {name!r} index out of range")
        return lambda t, v: float(abs(v[i]) ** 2)
    if name == "sigma_z_bar":
        return lambda t, v: models.sigma_z_bar(v)
    if name.startswith("p_n:"):
        n = int(name.split(":", 1)[1])
        basis = getattr(gen, "basis", None)
        if basis is None:
            raise ConfigError("p_n observables need the hydrogen model")
        idx = [i for i, (nn, _) in enumerate(basis) if nn == n]
        return lambda t, v: float(np.sum(np.abs(v[idx]) ** 2))
    if name == "q_mean":
        n = np.arange(gen.dim)
        raising = np.zeros((gen.dim, gen.dim))
        raising[n[1:], n[1:] - 1] = np.sqrt(n[1:])
        q = (raising + raising.T) / math.sqrt(2 * gen.p.omega0)
        return lambda t, v: float(np.real(np.vdot(v, q @ v)))
    raise ConfigError(f"unknown observable {name!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_propagate(args) -> int:
    cfg = _load_config(args.config)
    gen, params = _build_model(_require(cfg, "model", "config"))
    scheme = scheme_lookup(str(_require(cfg, "scheme", "config")))
    backend = _build_backend(_require(cfg, "backend", "config"), gen)
    plan = _build_plan(_require(cfg, "plan", "config"))
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    v0 = _initial_state(cfg, gen, params, seed)
    names = list(cfg.get("observables", []))
    obs = [(nm, _observable(nm, gen)) for nm in names]

    rec = propagate(gen, scheme, backend, plan, v0)

    header = ["t"] + names + ["norm", "cumulative_matvecs"]
    rows = []
    for t, v, n in zip(rec.times, rec.states, rec.matvecs):
        rows.append([t] + [f(t, v) for _, f in obs] + [np.linalg.norm(v), int(n)])
    _write_csv(args.out, header, rows)
    if args.figure:
        from .report import render_propagate_figure

        render_propagate_figure(args.figure, rec.times, names,
                                [[f(t, v) for _, f in obs]
                                 for t, v in zip(rec.times, rec.states)])
    return EXIT_OK


def _bench_error(base, gen, params, scheme, backend, plan, v0, reference):
    rec = propagate(gen, scheme, backend, plan, v0)
    if reference == "oracle":
        if base["model"]["id"] != "two_level":
            raise ConfigError("oracle reference is only available for two_level")
        err = 0.0
        for t, v in zip(rec.times, rec.states):
            exact = models.two_level_exact(params, t) @ v0
            err = max(err, float(np.linalg.norm(v - exact)))
        return err, rec.total_matvecs
    # Richardson: highest-order registered scheme at dt/4
    ref_scheme = scheme_lookup("CF8:11")
    ref_plan = StepPlan(plan.t0, plan.T, dt=plan.dt / 4,
                        record_stride=4 * plan.record_stride)
    ref = propagate(gen, ref_scheme, backend, ref_plan, v0)
    m = min(len(rec.times), len(ref.times))
    err = float(
        max(
            np.linalg.norm(a - b)
            for a, b in zip(rec.states[:m], ref.states[:m])
        )
    )
    return err, rec.total_matvecs


def cmd_bench(args) -> int:
    cfg = _load_config(args.config)
    base = _require(cfg, "base", "bench config")
    axes = _require(cfg, "axes", "bench config")
    reference = cfg.get("reference")
    if reference not in ("oracle", "richardson"):
        raise ConfigError("bench config must set reference to 'oracle' or 'richardson'")
    schemes = [str(s) for s in axes.get("scheme", [base.get("scheme")])]
    dts = [float(d) for d in axes.get("dt", [base["plan"].get("dt")])]
    ks = axes.get("K", [None])
    if not schemes or not dts:
        raise ConfigError("bench grid is empty")

    points = [(s, d, k) for s in schemes for d in dts for k in ks]
    if any(s is None or d is None for s, d, _ in points):
        raise ConfigError("bench grid is missing scheme or dt values")

    def run(point):
        sname, dt, k = point
        gen, params = _build_model(base["model"])
        scheme = scheme_lookup(sname)
        bcfg = dict(base["backend"])
        if k is not None:
            bcfg["K"] = k
        backend = _build_backend(bcfg, gen)
        plan_cfg = dict(base["plan"])
        plan_cfg["dt"] = dt
        plan = _build_plan(plan_cfg)
        seed = args.seed if args.seed is not None else base.get("seed", 0)
        v0 = _initial_state(base, gen, params, seed)
        t_start = time.perf_counter_ns()
        err, matvecs = _bench_error(
            base, gen, params, scheme, backend, plan, v0, reference
        )
        wall = time.perf_counter_ns() - t_start
        return [sname, base["backend"]["type"], dt,
                int(k) if k is not None else "", err, matvecs, wall]

    if args.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(args.workers) as pool:
            rows = list(pool.map(run, points))
    else:
        rows = [run(pt) for pt in points]
    header = ["scheme", "backend", "dt", "K", "error", "matvecs", "wallclock_ns"]
    _write_csv(args.out, header, rows)
    if args.figure:
        from .report import render_bench_figure

        render_bench_figure(args.figure, header, rows)
    return EXIT_OK


# regression values for the collected eighth-order expansion
_EXPANSION_CHECKS = {
    "A1": "1",
    "[A1,A2]": "-1/6",
    "[A2,[A1,A2]]": "-1/60",
    "[A3,A4]": "-1/70",
}
_HALL_COUNTS = {2: 2, 4: 7, 6: 22, 8: 70, 10: 225}
_RELEVANT_COUNTS = {2: 1, 4: 2, 6: 7, 8: 22, 10: 73}


def verify_report(registry_names=None):
    """(ok, lines) for the symbolic self-checks the verify subcommand prints."""
    from fractions import Fraction

    ok = True
    lines = []

    collected = magnus_expand(8).at_end()
    shown = {tree_str(t): c for t, c in collected.terms.items()}
    for key, want in _EXPANSION_CHECKS.items():
        got = shown.get(key)
        good = got == Fraction(want)
        ok &= good
        lines.append(f"expansion {key} = {got} (want {want}) "
                     f"{'ok' if good else 'FAIL'}")
    # restrict to the collected order-8 expression (higher gradings in the
    # series are remainder terms beyond it)
    from .liealg import legendre_degree

    nonzero_brackets = sum(
        1 for t, c in collected.terms.items()
        if c and t != 1 and legendre_degree(t) <= 8
    )
    good = nonzero_brackets == 19
    ok &= good
    lines.append(f"expansion nonzero bracket terms: {nonzero_brackets} (want 19) "
                 f"{'ok' if good else 'FAIL'}")

    for order, want in _HALL_COUNTS.items():
        basis = HallBasis(order, order)
        good = len(basis) == want
        ok &= good
        lines.append(f"hall elements @ order {order}: {len(basis)} (want {want}) "
                     f"{'ok' if good else 'FAIL'}")
    for order, want in _RELEVANT_COUNTS.items():
        basis = HallBasis(order // 2, max(order - 1, 1))
        got = len(filter_relevant(basis, order))
        good = got == want
        ok &= good
        lines.append(f"relevant elements @ order {order}: {got} (want {want}) "
                     f"{'ok' if good else 'FAIL'}")

    names = registry_names if registry_names is not None else scheme_names()
    for name in names:
        scheme = scheme_lookup(name)
        res = order_residuals(scheme, scheme.order)
        worst = max((abs(float(v)) for v in res.values()), default=0.0)
        tol = 1e-10 if scheme.order >= 8 else (0.0 if scheme.is_rational else 1e-11)
        good = worst <= tol
        ok &= good
        lines.append(
            f"residuals {name}: {len(res)} conditions, max {worst:.3e} "
            f"{'ok' if good else 'FAIL'}"
        )
    return ok, lines


def cmd_verify(args) -> int:
    ok, lines = verify_report()
    text = "\n".join(lines) + "\n" + ("all checks passed\n" if ok else "FAILURES\n")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_stability(args) -> int:
    cfg = _load_config(args.config)
    xs = _axis(_require(cfg, "x", "stability config"))  # (omega0/Omega)^2
    ys = _axis(_require(cfg, "y", "stability config"))  # xi/Omega^2
    scheme = scheme_lookup(str(cfg.get("scheme", "CF6:5Opt")))
    steps = int(cfg.get("steps", 64))
    omega_d = float(cfg.get("omega_d", 1.0))

    def run(point):
        x, y = point
        p = models.OscillatorParams(
            omega0=math.sqrt(max(x, 1e-300)) * omega_d,
            xi=y * omega_d**2,
            omega_d=omega_d,
        )
        r = models.floquet_stability(p, scheme, steps=steps)
        return [x, y, float(np.abs(r.multipliers).max()), bool(r.stable)]

    points = [(x, y) for x in xs for y in ys]
    if args.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(args.workers) as pool:
            rows = list(pool.map(run, points))
    else:
        rows = [run(pt) for pt in points]
    header = ["x", "y", "max_multiplier", "stable"]
    _write_csv(args.out, header, rows)
    if args.figure:
        from .report import render_stability_figure

        render_stability_figure(args.figure, rows)
    return EXIT_OK


def _axis(spec):
    if isinstance(spec, list) and len(spec) == 3 and isinstance(spec[2], int):
        lo, hi, n = spec
        if n < 1:
            raise ConfigError("axis needs at least one point")
        return list(np.linspace(float(lo), float(hi), n))
    if isinstance(spec, list) and spec:
        return [float(x) for x in spec]
    raise ConfigError("axis must be [lo, hi, n] or a non-empty list of values")


def cmd_schemes(args) -> int:
    if args.dump:
        doc = dump_scheme(scheme_lookup(args.dump))
        text = json.dumps(doc, indent=2) + "\n"
    else:
        rows = []
        for name in scheme_names():
            s = scheme_lookup(name)
            rows.append(f"{name}\torder {s.order}\tstages {s.stages}")
        text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cfet", description="Exponential time-propagation toolkit"
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--figure", default=None,
                       help="also render a summary figure to this path")

    common(sub.add_parser("propagate", help="run one trajectory, write CSV"))
    common(sub.add_parser("bench", help="error-effort sweep, write CSV"))
    p = sub.add_parser("verify", help="symbolic self-checks")
    common(p, config=False)
    common(sub.add_parser("stability", help="Floquet stability chart CSV"))
    p = sub.add_parser("schemes", help="list or dump the scheme registry")
    p.add_argument("--dump", default=None, metavar="NAME")
    common(p, config=False)
    return ap


_DISPATCH = {
    "propagate": cmd_propagate,
    "bench": cmd_bench,
    "verify": cmd_verify,
    "stability": cmd_stability,
    "schemes": cmd_schemes,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (ConfigError, SchemeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StepperError, ExpmError, models.ModelError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
