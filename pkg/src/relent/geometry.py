"""Numerical certification of the projection geometry.

Checks the triangle equality I(l||r) = I(l||p) + I(p||r) of the classical
projection, its nonextensive generalization with the pseudo-additive cross
term (q-1) I(l||p) I(p||r), the moment-matching conditions under which
each holds, and the thermodynamic derivative identities tying partitions,
multipliers and minimum values together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .measures import (
    ConstraintKind,
    Density,
    FeatureSet,
    MomentSpec,
    constraint_moments,
    has_support_violation,
    shannon_relative_entropy,
    tsallis_relative_entropy,
)
from .projection import (
    SolveResult,
    partition_classical,
    partition_normalized,
    partition_q,
    solve,
    solve_classical,
    solve_tsallis_normalized,
    solve_tsallis_q,
)
from .qalgebra import QIndex, q_log


@dataclass(frozen=True)
class GeometryReport:
    """The three divergences of a projection triangle and their residuals.

    ``triangle_residual`` is I_lr - [I_lp + I_pr + (q-1) I_lp I_pr]; the
    classical regime evaluates it at q = 1, where the cross term is zero.
    ``matching_residuals`` quantify how far l is from the regime's
    matching condition; the triangle residual is only guaranteed small
    when they vanish.
    """

    I_lr: float
    I_lp: float
    I_pr: float
    triangle_residual: float
    matching_residuals: np.ndarray
    q: float
    regime: ConstraintKind
    cross_term: float
    inequality: str
    flags: tuple[str, ...]
    solve: SolveResult


def triangle_residual(I_lr: float, I_lp: float, I_pr: float, q: float) -> tuple[float, float]:
    """Residual of the (non)extensive triangle equality and its cross term."""
    cross = (q - 1.0) * I_lp * I_pr
    return I_lr - (I_lp + I_pr + cross), cross


def _inequality_direction(q: float) -> str:
    if abs(q - 1.0) < 1e-12:
        return "="
    return "<=" if q < 1.0 else ">="


def _support_flags(l: Density, p: Density, r: Density, q: float) -> tuple[str, ...]:
    flags = []
    if q < 1.0:
        for a, b, label in ((l, p, "l||p"), (l, r, "l||r"), (p, r, "p||r")):
            if has_support_violation(a, b):
                flags.append(
                    f"support violation in I({label}) with q < 1: +inf by convention, "
                    "finite value would exist"
                )
    return tuple(flags)


def verify_classical_pythagoras(
    r: Density,
    u: FeatureSet,
    targets,
    l: Density,
    *,
    precondition_tol: float = 1e-8,
    enforce_preconditions: bool = True,
    **solver_kwargs,
) -> GeometryReport:
    """Solve the classical projection and check the triangle equality for l.

    Requires l to satisfy the same moment constraints as the solve; the
    equality has no content otherwise.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    l.space.require_same(r.space, "test distribution and prior")
    l_moments = constraint_moments(u, l, ConstraintKind.CLASSICAL, 1.0)
    mismatch = np.abs(l_moments - targets)
    if enforce_preconditions and np.max(mismatch) > precondition_tol:
        worst = int(np.argmax(mismatch))
        raise PreconditionError(
            f"test distribution violates constraint {u.names[worst]!r}: "
            f"moment {l_moments[worst]!r} vs target {targets[worst]!r} "
            f"(|residual| = {mismatch[worst]:.3e})"
        )
    result = solve_classical(r, u, MomentSpec.classical(targets), **solver_kwargs)
    p = result.posterior
    I_lr = shannon_relative_entropy(l, r)
    I_lp = shannon_relative_entropy(l, p)
    I_pr = result.divergence
    resid, cross = triangle_residual(I_lr, I_lp, I_pr, 1.0)
    return GeometryReport(
        I_lr=I_lr,
        I_lp=I_lp,
        I_pr=I_pr,
        triangle_residual=resid,
        matching_residuals=l_moments - targets,
        q=1.0,
        regime=ConstraintKind.CLASSICAL,
        cross_term=cross,
        inequality="=",
        flags=(),
        solve=result,
    )


@dataclass(frozen=True)
class MatchingScanEntry:
    targets: tuple[float, ...]
    I_lp: float
    converged: bool


@dataclass(frozen=True)
class MatchingScan:
    """I(l||p) over a grid of constraint targets, for the matching property."""

    entries: tuple[MatchingScanEntry, ...]
    l_moments: np.ndarray
    argmin_index: int
    closest_index: int

    @property
    def argmin_targets(self) -> tuple[float, ...]:
        return self.entries[self.argmin_index].targets


def scan_expectation_matching_classical(
    r: Density,
    u: FeatureSet,
    l: Density,
    target_grid,
    **solver_kwargs,
) -> MatchingScan:
    """Solve across a target grid and locate where I(l||p) is smallest.

    The matching property predicts the argmin at l's own moments, so the
    grid must cover them.  Infeasible grid points are skipped and flagged
    with converged=False and an infinite I(l||p).
    """
    grid = [np.atleast_1d(np.asarray(t, dtype=float)) for t in target_grid]
    if not grid:
        raise ValueError("target grid must be nonempty")
    l_moments = constraint_moments(u, l, ConstraintKind.CLASSICAL, 1.0)
    stacked = np.stack(grid)
    if np.any(l_moments < stacked.min(axis=0) - 1e-12) or np.any(
        l_moments > stacked.max(axis=0) + 1e-12
    ):
        raise PreconditionError(
            f"target grid does not cover the test distribution's moments {l_moments!r}"
        )
    entries = []
    for t in grid:
        try:
            res = solve_classical(r, u, MomentSpec.classical(t), **solver_kwargs)
            entries.append(
                MatchingScanEntry(
                    tuple(float(x) for x in t),
                    shannon_relative_entropy(l, res.posterior),
                    True,
                )
            )
        except Exception:
            entries.append(MatchingScanEntry(tuple(float(x) for x in t), math.inf, False))
    values = [e.I_lp for e in entries]
    argmin = int(np.argmin(values))
    closest = int(
        np.argmin([np.max(np.abs(np.asarray(e.targets) - l_moments)) for e in entries])
    )
    return MatchingScan(tuple(entries), l_moments, argmin, closest)


def matching_residuals_q(result: SolveResult, u: FeatureSet, l: Density) -> np.ndarray:
    """Residuals of the q-expectation matching condition for a test density.

    The condition couples the solve's q-moments to those of l through
    I_q(l||p):  <u>_q = <w>_q / (1 - (1-q) I_q(l||p)).
    """
    qv = result.q
    p_moments = constraint_moments(u, result.posterior, ConstraintKind.Q_EXPECTATION, qv)
    l_moments = constraint_moments(u, l, ConstraintKind.Q_EXPECTATION, qv)
    I_lp = tsallis_relative_entropy(l, result.posterior, qv)
    return p_moments - l_moments / (1.0 - (1.0 - qv) * I_lp)


def verify_nonextensive_pythagoras_q(
    r: Density,
    u: FeatureSet,
    targets_q,
    l: Density,
    q,
    **solver_kwargs,
) -> GeometryReport:
    """Solve the q-expectation projection and report the triangle identity for l.

    No precondition is imposed on l: the matching residuals in the report
    say whether the triangle residual is expected to vanish.  The
    inequality field classifies the cross-term regime (<= for 0 < q <= 1,
    >= for q > 1).
    """
    qi = q if isinstance(q, QIndex) else QIndex(q)
    if qi.is_classical:
        raise ValueError("q-expectation verification requires q != 1")
    targets_q = np.atleast_1d(np.asarray(targets_q, dtype=float))
    l.space.require_same(r.space, "test distribution and prior")
    result = solve_tsallis_q(r, u, MomentSpec.q_expectation(targets_q, qi), **solver_kwargs)
    p = result.posterior
    qv = qi.q
    I_lr = tsallis_relative_entropy(l, r, qv)
    I_lp = tsallis_relative_entropy(l, p, qv)
    I_pr = result.divergence
    resid, cross = triangle_residual(I_lr, I_lp, I_pr, qv)
    return GeometryReport(
        I_lr=I_lr,
        I_lp=I_lp,
        I_pr=I_pr,
        triangle_residual=resid,
        matching_residuals=matching_residuals_q(result, u, l),
        q=qv,
        regime=ConstraintKind.Q_EXPECTATION,
        cross_term=cross,
        inequality=_inequality_direction(qv),
        flags=_support_flags(l, p, r, qv),
        solve=result,
    )


def verify_nonextensive_pythagoras_normalized(
    r: Density,
    u: FeatureSet,
    targets,
    l: Density,
    q,
    *,
    precondition_tol: float = 1e-8,
    enforce_preconditions: bool = True,
    **solver_kwargs,
) -> GeometryReport:
    """Solve the normalized-q projection and check the triangle equality for l.

    The matching condition in this regime is plain moment equality:
    l's normalized q-moments must equal the solve targets.
    """
    qi = q if isinstance(q, QIndex) else QIndex(q)
    if qi.is_classical:
        raise ValueError("normalized-q verification requires q != 1")
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    l.space.require_same(r.space, "test distribution and prior")
    qv = qi.q
    l_moments = constraint_moments(u, l, ConstraintKind.NORMALIZED_Q, qv)
    mismatch = np.abs(l_moments - targets)
    if enforce_preconditions and np.max(mismatch) > precondition_tol:
        worst = int(np.argmax(mismatch))
        raise PreconditionError(
            f"test distribution's normalized q-moment for {u.names[worst]!r} is "
            f"{l_moments[worst]!r}, target {targets[worst]!r} "
            f"(|residual| = {mismatch[worst]:.3e})"
        )
    result = solve_tsallis_normalized(
        r, u, MomentSpec.normalized_q(targets, qi), **solver_kwargs
    )
    p = result.posterior
    I_lr = tsallis_relative_entropy(l, r, qv)
    I_lp = tsallis_relative_entropy(l, p, qv)
    I_pr = result.divergence
    resid, cross = triangle_residual(I_lr, I_lp, I_pr, qv)
    return GeometryReport(
        I_lr=I_lr,
        I_lp=I_lp,
        I_pr=I_pr,
        triangle_residual=resid,
        matching_residuals=l_moments - targets,
        q=qv,
        regime=ConstraintKind.NORMALIZED_Q,
        cross_term=cross,
        inequality=_inequality_direction(qv),
        flags=_support_flags(l, p, r, qv),
        solve=result,
    )


def bisect_scalar(f, lo: float, hi: float, *, residual_tol: float = 1e-10, max_iter: int = 400):
    """Bisection for a sign-changing scalar function; returns (root, residual).

    Used to construct test densities along one-parameter families whose
    matching-condition residual crosses zero.
    """
    flo, fhi = f(lo), f(hi)
    if abs(flo) <= residual_tol:
        return lo, flo
    if abs(fhi) <= residual_tol:
        return hi, fhi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise ValueError(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")
    mid, fm = lo, flo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= residual_tol:
            return mid, fm
        if math.copysign(1.0, fm) == math.copysign(1.0, flo):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return mid, fm


def line_family(a: Density, b: Density):
    """Density family t -> (1-t) a + t b; stays normalized for t in [0, 1]."""
    a.space.require_same(b.space, "family endpoints")

    def family(t: float) -> Density:
        return Density(a.space, (1.0 - t) * a.values + t * b.values)

    return family


def check_thermodynamic_identities(
    r: Density,
    u: FeatureSet,
    spec: MomentSpec,
    result: SolveResult | None = None,
    *,
    h: float = 1e-5,
    **solver_kwargs,
) -> dict[str, float]:
    """Finite-difference check of the thermodynamic derivative identities.

    Central differences confirm that the regime's log-partition has
    derivative -<u_m> in beta_m (constraints released, partitions evaluated
    directly) and that the minimum divergence has derivative -beta_m in the
    m-th target (targets perturbed, problem re-solved).  The normalized
    regime freezes the achieved targets and s inside its bracket, and
    additionally reports the residual of the relation
    ln_q Z_q = ln_q Zbar_q - sum(beta <<u>>_q) evaluated with achieved
    moments versus targets.  Values are relative residuals.
    """
    if result is None:
        result = solve(r, u, spec, **solver_kwargs)
    beta = result.beta
    t = result.targets
    qv = result.q
    kind = result.kind
    M = len(beta)

    if kind is ConstraintKind.CLASSICAL:
        ln_part = lambda b: math.log(partition_classical(r, u, b))
    elif kind is ConstraintKind.Q_EXPECTATION:
        ln_part = lambda b: q_log(partition_q(r, u, b, qv), qv)
    else:
        s = float(np.power(result.posterior.values, qv) @ r.space.mu)
        ln_part = lambda b: q_log(
            partition_normalized(r, u, b, qv, t, s), qv
        ) - float(b @ t)

    achieved = constraint_moments(u, result.posterior, kind, qv)
    out = {}
    worst = 0.0
    for m in range(M):
        e = np.zeros(M)
        e[m] = h
        fd = (ln_part(beta + e) - ln_part(beta - e)) / (2.0 * h)
        worst = max(worst, abs(fd + achieved[m]) / max(1.0, abs(achieved[m])))
    out["dlnZ_dbeta"] = worst

    worst = 0.0
    for m in range(M):
        dt = np.zeros(M)
        dt[m] = h
        hi = solve(r, u, MomentSpec(kind, t + dt, QIndex(qv)), **solver_kwargs)
        lo = solve(r, u, MomentSpec(kind, t - dt, QIndex(qv)), **solver_kwargs)
        fd = (hi.divergence - lo.divergence) / (2.0 * h)
        worst = max(worst, abs(fd + beta[m]) / max(1.0, abs(beta[m])))
    out["dI_dmoment"] = worst

    if kind is ConstraintKind.NORMALIZED_Q:
        lnq_zbar = q_log(result.partition, qv)
        out["lnq_partition_relation"] = abs(
            (lnq_zbar - float(beta @ achieved)) - (lnq_zbar - float(beta @ t))
        )
    return out
