"""Command-line interface: solve, verify, and sweep over YAML problem configs.

Reports are written as JSON or CSV with every number at 17 significant
digits, so parsed values are bit-identical to the in-memory results.
Identical configs produce byte-identical reports except for the single
timestamp line, which also carries the wall time.

Exit codes: 0 success, 1 config error, 2 solver diagnostics,
3 verification threshold exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from datetime import datetime, timezone

import numpy as np
import yaml

from . import __version__
from .errors import (
    ConfigError,
    ConvergenceError,
    InfeasibleTargetError,
    RelentError,
)
from .geometry import (
    GeometryReport,
    bisect_scalar,
    line_family,
    triangle_residual,
    verify_classical_pythagoras,
    verify_nonextensive_pythagoras_normalized,
    verify_nonextensive_pythagoras_q,
)
from .measures import (
    ConstraintKind,
    Density,
    FeatureSet,
    FiniteSpace,
    MomentSpec,
    constraint_moments,
    shannon_relative_entropy,
    tsallis_relative_entropy,
)
from .projection import SolveResult, solve
from .qalgebra import QIndex

DEFAULT_VERIFY_TOL = 1e-8


# -- deterministic serialization -------------------------------------------------


def format_number(x) -> str:
    """17-significant-digit text for a float; ints pass through unchanged."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xv = float(x)
    if math.isnan(xv):
        return "nan"
    if math.isinf(xv):
        return "inf" if xv > 0 else "-inf"
    return format(xv, ".17g")


def _json_scalar(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xv = float(x)
    if not math.isfinite(xv):
        return json.dumps(format_number(xv))
    return format(xv, ".17g")


def dumps_report(obj, indent: int = 0) -> str:
    """JSON text with deterministic key order and 17-digit floats."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f"{inner}{json.dumps(str(k))}: {dumps_report(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + f"\n{pad}" + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if any(isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            rows = [f"{inner}{dumps_report(v, indent + 1)}" for v in items]
            return "[\n" + ",\n".join(rows) + f"\n{pad}" + "]"
        return "[" + ", ".join(_json_scalar(v) for v in items) + "]"
    return _json_scalar(obj)


def _csv_lines(header, rows, timestamp) -> str:
    out = [f"# {timestamp}"]
    out.append(",".join(header))
    for row in rows:
        out.append(",".join("" if v is None else (v if isinstance(v, str) else format_number(v)) for v in row))
    return "\n".join(out) + "\n"


# -- config loading ---------------------------------------------------------------


class ProblemConfig:
    """Validated problem description built from one YAML document."""

    def __init__(self, raw: dict, raw_bytes: bytes):
        if not isinstance(raw, dict):
            raise ConfigError("top level: expected a mapping of sections")
        self.sha256 = hashlib.sha256(raw_bytes).hexdigest()
        known = {
            "space",
            "prior",
            "features",
            "constraints",
            "solver",
            "test_distribution",
            "test_family",
            "sweep",
            "verify",
        }
        for key in raw:
            if key not in known:
                raise ConfigError(f"{key}: unknown section")

        space_cfg = raw.get("space")
        if not isinstance(space_cfg, dict) or "mu" not in space_cfg:
            raise ConfigError("space.mu: required list of positive weights")
        mu = self._floats(space_cfg["mu"], "space.mu")
        points = space_cfg.get("points")
        if points is None:
            points = [f"x{i}" for i in range(len(mu))]
        if not isinstance(points, list) or len(points) != len(mu):
            raise ConfigError("space.points: must list one label per mu weight")
        try:
            self.space = FiniteSpace(points, mu)
        except (ValueError, RelentError) as e:
            raise ConfigError(f"space: {e}") from e

        prior = raw.get("prior")
        if prior is None:
            raise ConfigError("prior: required list of density values")
        try:
            self.prior = Density(self.space, self._floats(prior, "prior"))
        except (ValueError, RelentError) as e:
            raise ConfigError(f"prior: {e}") from e

        feats = raw.get("features", [])
        if feats in (None, []):
            self.features = None
        else:
            if not isinstance(feats, list):
                raise ConfigError("features: expected a list of {name, values} entries")
            names, tables = [], []
            for i, entry in enumerate(feats):
                if not isinstance(entry, dict) or "values" not in entry:
                    raise ConfigError(f"features[{i}]: expected a mapping with 'values'")
                names.append(str(entry.get("name", f"u{i + 1}")))
                tables.append(self._floats(entry["values"], f"features[{i}].values"))
            try:
                self.features = FeatureSet(self.space, np.array(tables), names)
            except (ValueError, RelentError) as e:
                raise ConfigError(f"features: {e}") from e

        cons = raw.get("constraints") or {}
        if not isinstance(cons, dict):
            raise ConfigError("constraints: expected a mapping")
        kind_str = cons.get("kind", "classical")
        try:
            self.kind = ConstraintKind(kind_str)
        except ValueError:
            raise ConfigError(
                f"constraints.kind: {kind_str!r} is not one of "
                f"{[k.value for k in ConstraintKind]}"
            ) from None
        q_raw = cons.get("q", 1.0)
        try:
            self.q = QIndex(float(q_raw))
        except (TypeError, ValueError, RelentError) as e:
            raise ConfigError(f"constraints.q: {e}") from e
        targets = cons.get("targets", [])
        if self.features is None:
            if targets:
                raise ConfigError("constraints.targets: given without any features")
            self.spec = None
        else:
            tvec = self._floats(targets, "constraints.targets")
            if len(tvec) != self.features.count:
                raise ConfigError(
                    f"constraints.targets: expected {self.features.count} values "
                    f"(one per feature), got {len(tvec)}"
                )
            try:
                self.spec = MomentSpec(self.kind, np.asarray(tvec), self.q)
                self.spec.validate_against(self.features)
            except InfeasibleTargetError as e:
                raise ConfigError(f"constraints.targets: {e}") from e
            except (ValueError, RelentError) as e:
                raise ConfigError(f"constraints: {e}") from e

        solver = raw.get("solver") or {}
        if not isinstance(solver, dict):
            raise ConfigError("solver: expected a mapping")
        self.solver_options = {}
        if "tolerance" in solver:
            self.solver_options["tol"] = self._float(solver["tolerance"], "solver.tolerance")
        if "max_iter" in solver:
            try:
                self.solver_options["max_iter"] = int(solver["max_iter"])
            except (TypeError, ValueError):
                raise ConfigError("solver.max_iter: expected an integer") from None

        l_raw = raw.get("test_distribution")
        if l_raw is None:
            self.test_distribution = None
        else:
            try:
                self.test_distribution = Density(self.space, self._floats(l_raw, "test_distribution"))
            except (ValueError, RelentError) as e:
                raise ConfigError(f"test_distribution: {e}") from e

        fam = raw.get("test_family")
        if fam is None:
            self.test_family = None
        else:
            if not isinstance(fam, dict) or "a" not in fam or "b" not in fam:
                raise ConfigError("test_family: expected a mapping with endpoints 'a' and 'b'")
            try:
                a = Density(self.space, self._floats(fam["a"], "test_family.a"))
                b = Density(self.space, self._floats(fam["b"], "test_family.b"))
            except (ValueError, RelentError) as e:
                raise ConfigError(f"test_family: {e}") from e
            self.test_family = (a, b)

        sweep = raw.get("sweep")
        self.sweep_q = None
        self.sweep_targets = None
        if sweep is not None:
            if not isinstance(sweep, dict):
                raise ConfigError("sweep: expected a mapping")
            if "q_values" in sweep:
                qs = self._floats(sweep["q_values"], "sweep.q_values")
                if not qs:
                    raise ConfigError("sweep.q_values: must be nonempty")
                if self.kind is ConstraintKind.CLASSICAL:
                    raise ConfigError(
                        "sweep.q_values: requires a q-expectation or "
                        "normalized-q-expectation constraint kind"
                    )
                self.sweep_q = qs
            elif "target_grid" in sweep:
                tg = sweep["target_grid"]
                if not isinstance(tg, dict):
                    raise ConfigError("sweep.target_grid: expected a mapping")
                if self.features is None:
                    raise ConfigError("sweep.target_grid: requires features")
                fname = tg.get("feature", self.features.names[0])
                if fname not in self.features.names:
                    raise ConfigError(f"sweep.target_grid.feature: unknown feature {fname!r}")
                self.sweep_feature = self.features.names.index(fname)
                if "values" in tg:
                    vals = self._floats(tg["values"], "sweep.target_grid.values")
                else:
                    try:
                        start = float(tg["start"])
                        stop = float(tg["stop"])
                        step = float(tg["step"])
                    except (KeyError, TypeError, ValueError):
                        raise ConfigError(
                            "sweep.target_grid: expected start/stop/step or values"
                        ) from None
                    if step <= 0:
                        raise ConfigError("sweep.target_grid.step: must be positive")
                    count = int(round((stop - start) / step)) + 1
                    vals = [start + i * step for i in range(count)]
                if not vals:
                    raise ConfigError("sweep.target_grid: produced an empty grid")
                self.sweep_targets = vals
            else:
                raise ConfigError("sweep: needs either q_values or target_grid")

        verify = raw.get("verify") or {}
        if not isinstance(verify, dict):
            raise ConfigError("verify: expected a mapping")
        self.verify_tol = self._float(verify.get("tolerance", DEFAULT_VERIFY_TOL), "verify.tolerance")

    @staticmethod
    def _floats(value, field: str) -> list:
        if not isinstance(value, list):
            raise ConfigError(f"{field}: expected a list of numbers")
        out = []
        for i, v in enumerate(value):
            try:
                out.append(float(v))
            except (TypeError, ValueError):
                raise ConfigError(f"{field}[{i}]: {v!r} is not a number") from None
        return out

    @staticmethod
    def _float(value, field: str) -> float:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{field}: {value!r} is not a number") from None


def load_config(path: str) -> ProblemConfig:
    try:
        with open(path, "rb") as fh:
            raw_bytes = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e}") from e
    try:
        raw = yaml.safe_load(raw_bytes)
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}") from e
    return ProblemConfig(raw, raw_bytes)


# -- report assembly --------------------------------------------------------------


def _trivial_result(cfg: ProblemConfig) -> SolveResult:
    # no features: the prior already minimizes the divergence
    return SolveResult(
        posterior=cfg.prior,
        beta=np.zeros(0),
        partition=1.0,
        divergence=0.0,
        residuals=np.zeros(0),
        iterations=0,
        converged=True,
        kind=cfg.kind,
        q=float(cfg.q),
        targets=np.zeros(0),
        diagnostics={},
    )


def _solve_section(result: SolveResult, names) -> dict:
    return {
        "kind": result.kind.value,
        "q": result.q,
        "converged": result.converged,
        "iterations": result.iterations,
        "beta": {n: float(b) for n, b in zip(names, result.beta)},
        "partition": result.partition,
        "lnq_partition": result.lnq_partition,
        "divergence": result.divergence,
        "residuals": {n: float(x) for n, x in zip(names, result.residuals)},
        "targets": {n: float(t) for n, t in zip(names, result.targets)},
        "posterior": list(result.posterior.values),
    }


def _geometry_section(report: GeometryReport, names, passed: bool, tol: float, extra=None) -> dict:
    out = {
        "regime": report.regime.value,
        "q": report.q,
        "I_lr": report.I_lr,
        "I_lp": report.I_lp,
        "I_pr": report.I_pr,
        "triangle_residual": report.triangle_residual,
        "cross_term": report.cross_term,
        "inequality": report.inequality,
        "matching_residuals": {n: float(x) for n, x in zip(names, report.matching_residuals)},
        "flags": list(report.flags),
        "passed": passed,
        "tolerance": tol,
    }
    if extra:
        out.update(extra)
    return out


def _timestamp(wall: float, seed) -> str:
    now = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    tail = f" seed={seed}" if seed is not None else ""
    return f"{now} wall_time_s={wall:.6f}{tail}"


def _write(path: str | None, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _report_shell(cfg: ProblemConfig, command: str, wall: float, seed) -> dict:
    return {
        "timestamp": _timestamp(wall, seed),
        "tool": f"relent {__version__}",
        "command": command,
        "config_sha256": cfg.sha256,
    }


# -- commands ---------------------------------------------------------------------


def _run_solve(cfg: ProblemConfig) -> SolveResult:
    if cfg.features is None:
        return _trivial_result(cfg)
    return solve(cfg.prior, cfg.features, cfg.spec, **cfg.solver_options)


def cmd_solve(cfg: ProblemConfig, output, fmt, seed) -> int:
    t0 = time.perf_counter()
    names = cfg.features.names if cfg.features is not None else ()
    error = None
    try:
        result = _run_solve(cfg)
    except ConvergenceError as e:
        result, error = e.result, str(e)
    except RelentError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - t0
    report = _report_shell(cfg, "solve", wall, seed)
    report["solve"] = _solve_section(result, names)
    if error:
        report["error"] = error
    if fmt == "json":
        _write(output, dumps_report(report) + "\n")
    else:
        header = ["kind", "q", "converged", "iterations", "partition", "divergence"]
        row = [
            result.kind.value,
            result.q,
            result.converged,
            result.iterations,
            result.partition,
            result.divergence,
        ]
        for n, b in zip(names, result.beta):
            header.append(f"beta:{n}")
            row.append(float(b))
        for n, x in zip(names, result.residuals):
            header.append(f"residual:{n}")
            row.append(float(x))
        for pt, v in zip(result.posterior.space.points, result.posterior.values):
            header.append(f"posterior:{pt}")
            row.append(float(v))
        _write(output, _csv_lines(header, [row], report["timestamp"]))
    if error:
        print(f"solver error: {error}", file=sys.stderr)
        return 2
    return 0


def _bisect_family(cfg: ProblemConfig, result: SolveResult):
    """Find the family parameter where the regime's matching condition holds."""
    from .geometry import matching_residuals_q

    if cfg.features.count != 1:
        raise ConfigError("test_family: bisection supports exactly one feature")
    family = line_family(*cfg.test_family)
    kind, qv = cfg.kind, float(cfg.q)
    t = cfg.spec.targets

    if kind is ConstraintKind.Q_EXPECTATION and not cfg.q.is_classical:
        resfn = lambda s: float(matching_residuals_q(result, cfg.features, family(s))[0])
    else:
        resfn = lambda s: float(
            constraint_moments(cfg.features, family(s), kind, qv)[0] - t[0]
        )
    ts = np.linspace(0.0, 1.0, 33)
    vals = [resfn(s) for s in ts]
    for i in range(len(ts) - 1):
        if math.copysign(1.0, vals[i]) != math.copysign(1.0, vals[i + 1]):
            root, _ = bisect_scalar(resfn, float(ts[i]), float(ts[i + 1]), residual_tol=1e-10)
            return root, family(root)
    raise RelentError("test_family: matching condition has no sign change along the family")


def cmd_verify(cfg: ProblemConfig, output, fmt, seed) -> int:
    if cfg.features is None or cfg.spec is None:
        print("config error: verify requires features and targets", file=sys.stderr)
        return 1
    if cfg.test_distribution is None and cfg.test_family is None:
        print("config error: verify requires test_distribution or test_family", file=sys.stderr)
        return 1
    t0 = time.perf_counter()
    names = cfg.features.names
    extra = {}
    try:
        result = _run_solve(cfg)
        if cfg.test_distribution is not None:
            l = cfg.test_distribution
        else:
            param, l = _bisect_family(cfg, result)
            extra["family_parameter"] = param
        kind, qv = cfg.kind, float(cfg.q)
        kwargs = dict(cfg.solver_options)
        if kind is ConstraintKind.CLASSICAL or cfg.q.is_classical:
            geo = verify_classical_pythagoras(
                cfg.prior, cfg.features, cfg.spec.targets, l,
                enforce_preconditions=False, **kwargs,
            )
        elif kind is ConstraintKind.Q_EXPECTATION:
            geo = verify_nonextensive_pythagoras_q(
                cfg.prior, cfg.features, cfg.spec.targets, l, cfg.q, **kwargs
            )
        else:
            geo = verify_nonextensive_pythagoras_normalized(
                cfg.prior, cfg.features, cfg.spec.targets, l, cfg.q,
                enforce_preconditions=False, **kwargs,
            )
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except RelentError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - t0

    scale = max(1.0, abs(geo.I_lr))
    passed = (
        abs(geo.triangle_residual) <= cfg.verify_tol * scale
        and float(np.max(np.abs(geo.matching_residuals))) <= cfg.verify_tol * scale
    )
    extra["test_distribution"] = list(l.values)
    report = _report_shell(cfg, "verify", wall, seed)
    report["solve"] = _solve_section(geo.solve, names)
    report["geometry"] = _geometry_section(geo, names, passed, cfg.verify_tol, extra)
    if fmt == "json":
        _write(output, dumps_report(report) + "\n")
    else:
        header = [
            "regime", "q", "I_lr", "I_lp", "I_pr",
            "triangle_residual", "cross_term", "inequality", "passed",
        ]
        row = [
            geo.regime.value, geo.q, geo.I_lr, geo.I_lp, geo.I_pr,
            geo.triangle_residual, geo.cross_term, geo.inequality, passed,
        ]
        for n, x in zip(names, geo.matching_residuals):
            header.append(f"matching_residual:{n}")
            row.append(float(x))
        _write(output, _csv_lines(header, [row], report["timestamp"]))
    return 0 if passed else 3


def _triangle_columns(result: SolveResult, cfg: ProblemConfig):
    l = cfg.test_distribution
    qv = result.q
    if abs(qv - 1.0) < 1e-8:
        I_lr = shannon_relative_entropy(l, cfg.prior)
        I_lp = shannon_relative_entropy(l, result.posterior)
    else:
        I_lr = tsallis_relative_entropy(l, cfg.prior, qv)
        I_lp = tsallis_relative_entropy(l, result.posterior, qv)
    resid, _ = triangle_residual(I_lr, I_lp, result.divergence, qv)
    return I_lr, I_lp, result.divergence, resid


def cmd_sweep(cfg: ProblemConfig, output, fmt, seed) -> int:
    if cfg.sweep_q is None and cfg.sweep_targets is None:
        print("config error: sweep: needs either q_values or target_grid", file=sys.stderr)
        return 1
    if cfg.features is None:
        print("config error: sweep requires features", file=sys.stderr)
        return 1
    t0 = time.perf_counter()
    names = cfg.features.names
    with_l = cfg.test_distribution is not None

    rows = []
    ok = 0
    if cfg.sweep_q is not None:
        points = [("q", qv) for qv in cfg.sweep_q]
    else:
        points = [("target", tv) for tv in cfg.sweep_targets]
    for key, value in points:
        entry = {"sweep_key": value}
        try:
            if key == "q":
                spec = MomentSpec(cfg.kind, cfg.spec.targets, QIndex(value))
            else:
                targets = cfg.spec.targets.copy()
                targets[cfg.sweep_feature] = value
                spec = MomentSpec(cfg.kind, targets, cfg.q)
            result = solve(cfg.prior, cfg.features, spec, **cfg.solver_options)
            entry["beta"] = {n: float(b) for n, b in zip(names, result.beta)}
            entry["partition"] = result.partition
            entry["divergence"] = result.divergence
            entry["converged"] = result.converged
            if with_l:
                I_lr, I_lp, I_pr, resid = _triangle_columns(result, cfg)
                entry["I_lr"], entry["I_lp"], entry["I_pr"] = I_lr, I_lp, I_pr
                entry["triangle_residual"] = resid
            entry["error"] = None
            ok += 1
        except RelentError as e:
            entry["error"] = str(e)
        rows.append(entry)
    wall = time.perf_counter() - t0

    report = _report_shell(cfg, "sweep", wall, seed)
    report["sweep"] = rows
    if fmt == "json":
        _write(output, dumps_report(report) + "\n")
    else:
        header = ["sweep_key"]
        header += [f"beta:{n}" for n in names]
        header += ["partition", "divergence"]
        if with_l:
            header += ["I_lr", "I_lp", "I_pr", "triangle_residual"]
        header += ["converged", "error"]
        csv_rows = []
        for entry in rows:
            row = [entry["sweep_key"]]
            if entry["error"] is None:
                row += [entry["beta"][n] for n in names]
                row += [entry["partition"], entry["divergence"]]
                if with_l:
                    row += [entry["I_lr"], entry["I_lp"], entry["I_pr"], entry["triangle_residual"]]
                row += [entry["converged"], ""]
            else:
                row += [None] * (len(names) + 2 + (4 if with_l else 0))
                row += [False, entry["error"].replace(",", ";")]
            csv_rows.append(row)
        _write(output, _csv_lines(header, csv_rows, report["timestamp"]))
    return 0 if ok >= 1 else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="relent",
        description="Minimum relative-entropy projections (classical and Tsallis) "
        "with triangle-equality verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "solve one projection problem"),
        ("verify", "solve and check the triangle equality for a test distribution"),
        ("sweep", "solve across a q list or target grid, one report row per point"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML problem description")
        p.add_argument("--output", default="-", help="report path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--tolerance", type=float, help="override solver tolerance")
        p.add_argument("--max-iter", type=int, help="override solver iteration budget")
        p.add_argument("--seed", type=int, help="echoed into the report for test drivers")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    if args.tolerance is not None:
        cfg.solver_options["tol"] = args.tolerance
    if args.max_iter is not None:
        cfg.solver_options["max_iter"] = args.max_iter

    handler = {"solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep}[args.command]
    return handler(cfg, args.output, args.format, args.seed)


if __name__ == "__main__":
    sys.exit(main())
