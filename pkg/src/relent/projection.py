"""Solvers for the minimum relative-entropy density in each constraint regime.

Three dual solvers (classical expectations, q-expectations, normalized
q-expectations) plus an exhaustive primal oracle over a simplex grid that
exists only to validate them.  The q-regime posteriors use the bracket
form [r^(1-q) - (1-q) sum(beta u)]^(1/(1-q)) with the cut-off convention:
a nonpositive bracket carries exactly zero mass.  Brackets and powers are
evaluated in expm1/log1p form so the solvers remain stable arbitrarily
close to q = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    ConvergenceError,
    DegenerateSolutionError,
    EmptyFeasibleSetError,
    InfeasibleTargetError,
)
from .measures import (
    ConstraintKind,
    Density,
    FeatureSet,
    MomentSpec,
    constraint_moments,
    shannon_relative_entropy,
    tsallis_relative_entropy,
)
from .qalgebra import QIndex, q_log

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
OUTER_TOL = 1e-9
MAX_OUTER_ITER = 500
OUTER_RELAXATION = 0.5


@dataclass(frozen=True)
class SolveResult:
    """Converged (or last-iterate) state of a projection solve.

    ``partition`` is the regime's normalizer: Z-hat, Z_q-hat, or the
    normalized-regime Z-bar-hat.  ``divergence`` is recomputed directly
    from the posterior, never from the closed form, so the closed-form
    identities stay falsifiable.
    """

    posterior: Density
    beta: np.ndarray
    partition: float
    divergence: float
    residuals: np.ndarray
    iterations: int
    converged: bool
    kind: ConstraintKind
    q: float
    targets: np.ndarray
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def lnq_partition(self) -> float:
        """ln(partition) in the classical regime, ln_q(partition) otherwise."""
        if self.kind is ConstraintKind.CLASSICAL:
            return math.log(self.partition)
        return q_log(self.partition, self.q)

    @property
    def beta_q(self) -> np.ndarray:
        """Effective multipliers beta / sum(p^q mu) of the normalized regime."""
        pq_mass = float(
            np.sum(np.power(self.posterior.values, self.q) * self.posterior.space.mu)
        )
        return self.beta / pq_mass


def _sup_norm(x: np.ndarray) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def _check_strict_interior(U_sup: np.ndarray, targets: np.ndarray, names):
    """Targets must be strictly inside the hull of feature columns on the support.

    For a full-dimensional hull, membership of targets +- eps e_m for every
    axis m is equivalent to strict interiority, so 2M small LPs suffice.
    """
    from scipy.optimize import linprog

    M, n = U_sup.shape
    A_eq = np.vstack([U_sup, np.ones((1, n))])
    for m in range(M):
        eps = 1e-7 * max(1.0, float(np.ptp(U_sup[m])))
        for sign in (-1.0, 1.0):
            t = targets.astype(float).copy()
            t[m] += sign * eps
            res = linprog(
                c=np.zeros(n),
                A_eq=A_eq,
                b_eq=np.append(t, 1.0),
                bounds=[(0.0, None)] * n,
                method="highs",
                options={
                    "primal_feasibility_tolerance": 1e-10,
                    "dual_feasibility_tolerance": 1e-10,
                },
            )
            if not res.success:
                raise InfeasibleTargetError(
                    f"target {targets[m]} for feature {names[m]!r} is not strictly "
                    "inside the convex hull of feature values on the prior's support"
                )


def _require_kind(spec: MomentSpec, kind: ConstraintKind, solver: str):
    if spec.kind is not kind:
        raise ValueError(f"{solver} expects {kind.value!r} constraints, got {spec.kind.value!r}")


def solve_classical(
    r: Density,
    u: FeatureSet,
    spec: MomentSpec,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SolveResult:
    """Minimize KL divergence from the prior r under classical moment constraints.

    The posterior is r exp(-sum(beta u))/Z-hat; beta is found by Newton
    descent on the strictly convex dual ln Z-hat(beta) + beta . targets,
    whose gradient is targets minus the current posterior moments.
    """
    _require_kind(spec, ConstraintKind.CLASSICAL, "solve_classical")
    u.space.require_same(r.space, "features and prior")
    spec.validate_against(u)
    t = spec.targets

    mu = r.space.mu
    sup = r.values > 0.0
    U_sup = u.values[:, sup]
    _check_strict_interior(U_sup, t, u.names)
    log_w0 = np.log(r.values[sup]) + np.log(mu[sup])

    M = u.count
    beta = np.zeros(M)

    def state(b):
        expo = log_w0 - U_sup.T @ b
        ln_z = float(logsumexp(expo))
        pi = np.exp(expo - ln_z)  # probabilities on the support
        return ln_z, pi, U_sup @ pi

    history = []
    ln_z, pi, moments = state(beta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = t - moments
        history.append(_sup_norm(grad))
        if _sup_norm(grad) <= tol:
            converged = True
            it -= 1
            break
        hess = (U_sup * pi) @ U_sup.T - np.outer(moments, moments)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        dual = ln_z + float(beta @ t)
        slope = float(grad @ step)
        alpha = 1.0
        accepted = False
        while alpha > 2.0**-50:
            cand = beta + alpha * step
            ln_z_c, pi_c, m_c = state(cand)
            # near the optimum the dual decrease drops below double precision;
            # a shrinking gradient norm is then the usable acceptance signal
            if ln_z_c + float(cand @ t) <= dual + 1e-4 * alpha * slope or _sup_norm(
                t - m_c
            ) <= 0.9 * _sup_norm(grad):
                beta, ln_z, pi, moments = cand, ln_z_c, pi_c, m_c
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break

    values = np.zeros(r.space.size)
    values[sup] = pi / mu[sup]
    values /= float(values @ mu)
    posterior = Density(r.space, values)
    result = SolveResult(
        posterior=posterior,
        beta=beta.copy(),
        partition=math.exp(ln_z),
        divergence=shannon_relative_entropy(posterior, r),
        residuals=moments - t,
        iterations=it,
        converged=converged,
        kind=ConstraintKind.CLASSICAL,
        q=1.0,
        targets=t.copy(),
        diagnostics={"residual_history": history},
    )
    if not converged:
        raise ConvergenceError(
            f"classical solve stalled after {it} iterations "
            f"(residual {_sup_norm(moments - t):.3e}); targets may sit on the "
            "feasibility boundary",
            result=result,
        )
    return result


# -- shared q-regime machinery -------------------------------------------------


def _bracket_minus_one(r_values: np.ndarray, S: np.ndarray, one_minus_q: float) -> np.ndarray:
    # r^(1-q) - (1-q) S - 1, exact near q = 1; r = 0 handled through the log
    with np.errstate(divide="ignore"):
        log_r = np.log(r_values)
    return np.expm1(one_minus_q * log_r) - one_minus_q * S


def _power_cutoff(bm1: np.ndarray, one_minus_q: float) -> np.ndarray:
    # [1 + bm1]_+^(1/(1-q)); zero wherever the bracket is nonpositive
    out = np.zeros_like(bm1)
    pos = bm1 > -1.0
    with np.errstate(over="ignore"):
        out[pos] = np.exp(np.log1p(bm1[pos]) / one_minus_q)
    # +inf bracket (r = 0 with q > 1) maps to exp(-inf) = 0 for q > 1
    out[~np.isfinite(out)] = np.inf
    return out


class _QState:
    __slots__ = ("y", "Z", "p", "G")

    def __init__(self, y, Z, p, G):
        self.y, self.Z, self.p, self.G = y, Z, p, G


def _q_state(r_values, mu, U, beta, targets, qv):
    """Posterior candidate and moment residuals for a given multiplier vector.

    Returns None when the cut-off removes the entire support (no usable
    density at this beta).
    """
    one_minus_q = 1.0 - qv
    S = U.T @ beta
    y = _power_cutoff(_bracket_minus_one(r_values, S, one_minus_q), one_minus_q)
    if not np.all(np.isfinite(y)):
        return None
    Z = float(y @ mu)
    if not (np.isfinite(Z) and Z > 0.0):
        return None
    p = y / Z
    G = U @ (np.power(p, qv) * mu) - targets
    return _QState(y, Z, p, G)


def _q_moment_newton(r_values, mu, U, targets, qv, beta0, tol, max_iter):
    """Damped Newton with a central finite-difference Jacobian.

    Solves the q-moment equations sum(u p_beta^q mu) = targets.  Steps are
    halved until the residual norm decreases, which also backs the iterate
    away from brackets collapsing to zero.
    """
    beta = np.asarray(beta0, dtype=float).copy()
    M = len(beta)
    st = _q_state(r_values, mu, U, beta, targets, qv)
    if st is None:
        raise DegenerateSolutionError(
            "cut-off bracket is nonpositive on the entire support at the "
            "starting multipliers"
        )
    history = [_sup_norm(st.G)]
    converged = _sup_norm(st.G) <= tol
    it = 0
    while not converged and it < max_iter:
        it += 1
        J = np.empty((M, M))
        for k in range(M):
            h = 1e-6 * max(1.0, abs(beta[k]))
            col = None
            for _ in range(5):
                e = np.zeros(M)
                e[k] = h
                sp = _q_state(r_values, mu, U, beta + e, targets, qv)
                sm = _q_state(r_values, mu, U, beta - e, targets, qv)
                if sp is not None and sm is not None:
                    col = (sp.G - sm.G) / (2.0 * h)
                    break
                h *= 0.1
            if col is None:
                break
            J[:, k] = col
        if col is None:
            break
        try:
            step = np.linalg.solve(J, -st.G)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -st.G, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        norm0 = _sup_norm(st.G)
        alpha = 1.0
        accepted = False
        while alpha > 2.0**-40:
            cand = beta + alpha * step
            st_c = _q_state(r_values, mu, U, cand, targets, qv)
            if st_c is not None and _sup_norm(st_c.G) <= (1.0 - 1e-4 * alpha) * norm0:
                beta, st = cand, st_c
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        history.append(_sup_norm(st.G))
        converged = _sup_norm(st.G) <= tol
    return beta, st, it, converged, history


def _suspicious_cutoff(p: np.ndarray, r_values: np.ndarray) -> bool:
    # the cut-off zeroed a point the prior supports: possibly a spurious branch
    return bool(np.any((p == 0.0) & (r_values > 0.0)))


def _target_continuation(attempt, t_start: np.ndarray, t_final: np.ndarray, warm0, acceptable=None):
    """Walk the targets from t_start (trivially solvable) to t_final.

    ``attempt(T, warm)`` returns (warm_out, state, iterations, converged).
    ``acceptable(state, at_min_step)`` can veto a converged node (used to
    refuse jumps onto a cut-off branch until the step cannot shrink
    further, so the branch connected to the prior is tracked).  Returns
    (final state or None, total iterations spent).
    """
    min_step = 2.0**-7
    lam, step = 0.0, 1.0
    warm = warm0
    best = None
    total = 0
    while lam < 1.0:
        node = min(1.0, lam + step)
        T = (1.0 - node) * t_start + node * t_final
        warm_out, state, iters, conv = attempt(T, warm)
        total += iters
        at_min = step <= min_step
        if conv and (acceptable is None or acceptable(state, at_min)):
            warm, best, lam = warm_out, state, node
            if lam < 1.0:
                step = min(2.0 * step, 1.0 - lam)
        else:
            if at_min:
                return None, total
            step *= 0.5
    return best, total


def _divergence_of(p_raw: np.ndarray, r: Density, qv: float) -> float:
    values = p_raw / float(p_raw @ r.space.mu)
    return tsallis_relative_entropy(Density(r.space, values), r, qv)


def solve_tsallis_q(
    r: Density,
    u: FeatureSet,
    spec: MomentSpec,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SolveResult:
    """Minimize the Tsallis divergence from r under q-expectation constraints.

    The posterior is the cut-off bracket density normalized by Z_q-hat;
    the multipliers solve the nonlinear moment equations
    sum(u p^q mu) = targets by damped Newton from beta = 0.  The moment
    equations are not convex and can carry several roots, so whenever the
    direct solve fails or lands on a branch that cut off part of the
    prior's support, the targets are re-walked by continuation from the
    prior's own q-moments (where beta = 0 is exact) and the
    lower-divergence root is reported.  Indices within the classical
    switch dispatch to solve_classical.
    """
    _require_kind(spec, ConstraintKind.Q_EXPECTATION, "solve_tsallis_q")
    u.space.require_same(r.space, "features and prior")
    spec.validate_against(u)
    if spec.q.is_classical:
        return solve_classical(
            r, u, MomentSpec.classical(spec.targets), tol=tol, max_iter=max_iter
        )
    qv = spec.q.q
    t = spec.targets
    mu = r.space.mu

    beta, st, iterations, converged, history = _q_moment_newton(
        r.values, mu, u.values, t, qv, np.zeros(u.count), tol, max_iter
    )
    used_continuation = False
    if not converged or _suspicious_cutoff(st.p, r.values):

        def attempt(T, warm):
            b, s, its, conv, _ = _q_moment_newton(
                r.values, mu, u.values, T, qv, warm, tol, max_iter
            )
            return b, (b, s), its, conv

        prior_t = u.values @ (np.power(r.values, qv) * mu)
        cont, extra = _target_continuation(
            attempt,
            prior_t,
            t,
            np.zeros(u.count),
            acceptable=lambda state, at_min: at_min
            or not _suspicious_cutoff(state[1].p, r.values),
        )
        iterations += extra
        if cont is not None:
            c_beta, c_st = cont
            if not converged or _divergence_of(c_st.p, r, qv) <= _divergence_of(
                st.p, r, qv
            ):
                beta, st, converged, used_continuation = c_beta, c_st, True, True

    values = st.p / float(st.p @ mu)
    posterior = Density(r.space, values)
    result = SolveResult(
        posterior=posterior,
        beta=beta.copy(),
        partition=st.Z,
        divergence=tsallis_relative_entropy(posterior, r, qv),
        residuals=st.G.copy(),
        iterations=iterations,
        converged=converged,
        kind=ConstraintKind.Q_EXPECTATION,
        q=qv,
        targets=t.copy(),
        diagnostics={"residual_history": history, "continuation": used_continuation},
    )
    if not converged:
        raise ConvergenceError(
            f"q-expectation solve stalled after {iterations} iterations "
            f"(residual {_sup_norm(st.G):.3e}); the targets may be unreachable "
            "for this prior and q",
            result=result,
        )
    return result


def solve_tsallis_normalized(
    r: Density,
    u: FeatureSet,
    spec: MomentSpec,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    outer_tol: float = OUTER_TOL,
    max_outer: int = MAX_OUTER_ITER,
    relaxation: float = OUTER_RELAXATION,
) -> SolveResult:
    """Minimize the Tsallis divergence under normalized q-expectation constraints.

    The self-referential posterior couples the bracket to s = sum(p^q mu),
    so an outer fixed-point iteration relaxes s while an inner Newton solve
    (the q-moment machinery on the target-shifted features, divided by the
    current s) enforces the normalized constraints.  The returned beta is
    rescaled to the converged s, making the reported triple (posterior,
    beta, s) self-consistent to machine precision.
    """
    _require_kind(spec, ConstraintKind.NORMALIZED_Q, "solve_tsallis_normalized")
    u.space.require_same(r.space, "features and prior")
    spec.validate_against(u)
    if spec.q.is_classical:
        return solve_classical(
            r, u, MomentSpec.classical(spec.targets), tol=tol, max_iter=max_iter
        )
    qv = spec.q.q
    t = spec.targets
    mu = r.space.mu
    zero = np.zeros(u.count)
    s_prior = float(np.power(r.values, qv) @ mu)

    def outer(T, gamma0, s0):
        """One full solve at targets T: fixed point on s around the inner Newton."""
        shifted = u.values - T[:, None]
        s = s0
        beta = gamma0 * s0
        s_used = s
        s_history = [s]
        inner_iters = 0
        inner_conv = False
        outer_conv = False
        st = None
        for _ in range(max_outer):
            s_used = s
            beta, st, its, inner_conv, _ = _q_moment_newton(
                r.values, mu, shifted / s_used, zero, qv, beta, tol, max_iter
            )
            inner_iters += its
            if not inner_conv:
                break
            s_hat = float(np.power(st.p / float(st.p @ mu), qv) @ mu)
            s_history.append(s_hat)
            if abs(s_hat - s) <= outer_tol * max(1.0, abs(s)):
                s = s_hat
                outer_conv = True
                break
            s = s + relaxation * (s_hat - s)
        return beta / s_used, s_used, st, inner_iters, s_history, inner_conv and outer_conv

    gamma, s_used, st, iterations, s_history, converged = outer(t, zero, s_prior)
    used_continuation = False
    if not converged or _suspicious_cutoff(st.p, r.values):

        def attempt(T, warm):
            g, su, state, its, hist, conv = outer(T, warm[0], warm[1])
            return (g, su), (g, su, state, hist), its, conv

        prior_t = u.values @ (np.power(r.values, qv) * mu) / s_prior
        cont, extra = _target_continuation(
            attempt,
            prior_t,
            t,
            (zero, s_prior),
            acceptable=lambda state, at_min: at_min
            or not _suspicious_cutoff(state[2].p, r.values),
        )
        iterations += extra
        if cont is not None:
            c_gamma, c_su, c_st, c_hist = cont
            if not converged or _divergence_of(c_st.p, r, qv) <= _divergence_of(
                st.p, r, qv
            ):
                gamma, s_used, st, s_history = c_gamma, c_su, c_st, c_hist
                converged, used_continuation = True, True

    values = st.p / float(st.p @ mu)
    posterior = Density(r.space, values)
    # snap beta to the achieved s so the reported bracket reproduces p exactly
    s_final = float(np.power(values, qv) @ mu)
    beta_final = gamma * s_final
    residuals = constraint_moments(u, posterior, ConstraintKind.NORMALIZED_Q, qv) - t
    result = SolveResult(
        posterior=posterior,
        beta=beta_final,
        partition=st.Z,
        divergence=tsallis_relative_entropy(posterior, r, qv),
        residuals=residuals,
        iterations=iterations,
        converged=converged,
        kind=ConstraintKind.NORMALIZED_Q,
        q=qv,
        targets=t.copy(),
        diagnostics={
            "outer_iterations": len(s_history) - 1,
            "s_history": s_history,
            "continuation": used_continuation,
        },
    )
    if not converged:
        raise ConvergenceError(
            "normalized-q solve did not reach a fixed point "
            f"({len(s_history) - 1} outer iterations, s history tail "
            f"{s_history[-3:]})",
            result=result,
        )
    return result


def solve(r: Density, u: FeatureSet, spec: MomentSpec, **kwargs) -> SolveResult:
    """Dispatch to the regime-appropriate solver based on spec.kind."""
    if spec.kind is ConstraintKind.CLASSICAL:
        kwargs.pop("outer_tol", None)
        kwargs.pop("max_outer", None)
        kwargs.pop("relaxation", None)
        return solve_classical(r, u, spec, **kwargs)
    if spec.kind is ConstraintKind.Q_EXPECTATION:
        kwargs.pop("outer_tol", None)
        kwargs.pop("max_outer", None)
        kwargs.pop("relaxation", None)
        return solve_tsallis_q(r, u, spec, **kwargs)
    return solve_tsallis_normalized(r, u, spec, **kwargs)


# -- released-constraint partition evaluations (finite-difference probes) ------


def partition_classical(r: Density, u: FeatureSet, beta) -> float:
    """Z-hat(beta) = sum(r exp(-sum(beta u)) mu) for arbitrary multipliers."""
    u.space.require_same(r.space, "features and prior")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    sup = r.values > 0.0
    expo = (
        np.log(r.values[sup])
        + np.log(r.space.mu[sup])
        - u.values[:, sup].T @ beta
    )
    return float(np.exp(logsumexp(expo)))


def partition_q(r: Density, u: FeatureSet, beta, q) -> float:
    """Z_q-hat(beta): mu-sum of the cut-off bracket density, constraints released."""
    u.space.require_same(r.space, "features and prior")
    qv = float(QIndex(float(q)))
    if abs(qv - 1.0) < 1e-8:
        return partition_classical(r, u, beta)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    one_minus_q = 1.0 - qv
    S = u.values.T @ beta
    y = _power_cutoff(_bracket_minus_one(r.values, S, one_minus_q), one_minus_q)
    Z = float(y @ r.space.mu)
    if not (np.isfinite(Z) and Z > 0.0):
        raise DegenerateSolutionError(
            "cut-off bracket is nonpositive on the entire support at these multipliers"
        )
    return Z


def partition_normalized(r: Density, u: FeatureSet, beta, q, targets, s) -> float:
    """Z-bar_q-hat(beta) with the normalized-regime bracket, holding targets and s frozen."""
    u.space.require_same(r.space, "features and prior")
    qv = float(QIndex(float(q)))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    shifted = (u.values - targets[:, None]) / float(s)
    one_minus_q = 1.0 - qv
    S = shifted.T @ beta
    y = _power_cutoff(_bracket_minus_one(r.values, S, one_minus_q), one_minus_q)
    Z = float(y @ r.space.mu)
    if not (np.isfinite(Z) and Z > 0.0):
        raise DegenerateSolutionError(
            "cut-off bracket is nonpositive on the entire support at these multipliers"
        )
    return Z


# -- exhaustive primal oracle ---------------------------------------------------


def _compositions(parts: int, total: int) -> np.ndarray:
    """All length-`parts` nonnegative integer tuples summing to `total`."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    if parts == 2:
        j = np.arange(total + 1, dtype=np.int64)
        return np.column_stack([total - j, j])
    blocks = []
    for lead in range(total + 1):
        rest = _compositions(parts - 1, total - lead)
        blocks.append(
            np.column_stack([np.full(len(rest), lead, dtype=np.int64), rest])
        )
    return np.vstack(blocks)


_GRID_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _simplex_grid(parts: int, total: int) -> np.ndarray:
    key = (parts, total)
    if key not in _GRID_CACHE:
        grid = _compositions(parts, total).astype(float) / total
        grid.setflags(write=False)
        if len(_GRID_CACHE) > 8:
            _GRID_CACHE.clear()
        _GRID_CACHE[key] = grid
    return _GRID_CACHE[key]


def _grid_divergence(P: np.ndarray, r: Density, kind: ConstraintKind, qv: float) -> np.ndarray:
    """Divergence of each probability row in P from the prior (vectorized)."""
    mu = r.space.mu
    r_probs = r.probabilities
    if kind is ConstraintKind.CLASSICAL or abs(qv - 1.0) < 1e-8:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = P * (np.log(P) - np.log(r_probs)[None, :])
        terms[P == 0.0] = 0.0
        return terms.sum(axis=1)
    vals = P / mu[None, :]
    w = np.power(r.values, 1.0 - qv) * mu
    return (1.0 - np.power(vals, qv) @ w) / (1.0 - qv)


def brute_force_primal(
    r: Density,
    u: FeatureSet | None,
    spec: MomentSpec | None,
    *,
    grid: float = 1e-3,
    refine: bool = True,
) -> Density:
    """Exhaustive constrained minimizer over a probability-simplex grid.

    Independent validation path for the dual solvers: enumerate the grid,
    keep points satisfying the constraints within a slack band proportional
    to the grid spacing, take the divergence argmin, then (optionally)
    polish with an SLSQP descent under the exact constraints.  Exponential
    in the number of points, hence the hard cap at 4.

    With ``u=None`` the problem is unconstrained and the argmin is the
    prior itself.  Points where the prior vanishes are pinned to zero, in
    line with the +inf support-violation convention of the divergences.
    """
    n = r.space.size
    if n > 4:
        raise ValueError(f"oracle supports at most 4 points, got {n}")
    kind = spec.kind if spec is not None else ConstraintKind.CLASSICAL
    qv = float(spec.q) if spec is not None else 1.0
    if u is not None and spec is not None:
        u.space.require_same(r.space, "features and prior")
        spec.validate_against(u)

    K = int(round(1.0 / grid))
    P = _simplex_grid(n, K)

    feasible = ~np.any((P > 0.0) & (r.values == 0.0)[None, :], axis=1)
    if u is not None and spec is not None:
        mu = r.space.mu
        U = u.values
        t = spec.targets

        def residual_matrix(Pm):
            if kind is ConstraintKind.CLASSICAL:
                return Pm @ U.T - t[None, :]
            vals_q = np.power(Pm / mu[None, :], qv)
            raw = (vals_q * mu[None, :]) @ U.T
            if kind is ConstraintKind.Q_EXPECTATION:
                return raw - t[None, :]
            return raw / (vals_q @ mu)[:, None] - t[None, :]

        R = np.abs(residual_matrix(P))
        slack = 2.0 * grid * np.maximum(1.0, np.ptp(U, axis=1))
        mask = feasible & np.all(R <= slack[None, :], axis=1)
        widen = 0
        while not np.any(mask):
            widen += 1
            if widen > 3:  # beyond ~16 grid steps the targets are just unreachable
                raise EmptyFeasibleSetError(
                    "no simplex grid point satisfies the constraints within the slack band"
                )
            slack *= 2.0
            mask = feasible & np.all(R <= slack[None, :], axis=1)
    else:
        mask = feasible

    div = np.where(mask, _grid_divergence(P, r, kind, qv), np.inf)
    best = P[int(np.argmin(div))]

    if refine:
        polished = _polish_primal(best, r, u, spec, kind, qv)
        if polished is not None:
            best = polished
    return Density.from_probabilities(r.space, best / best.sum())


def _polish_primal(x0, r, u, spec, kind, qv):
    from scipy.optimize import minimize

    mu = r.space.mu

    def objective(pi):
        d = _grid_divergence(pi[None, :], r, kind, qv)[0]
        return d if np.isfinite(d) else 1e300

    constraints = [{"type": "eq", "fun": lambda pi: pi.sum() - 1.0}]
    if u is not None and spec is not None:
        U = u.values
        t = spec.targets

        def moment_residual(pi):
            if kind is ConstraintKind.CLASSICAL:
                return U @ pi - t
            vals_q = np.power(np.maximum(pi, 0.0) / mu, qv)
            raw = U @ (vals_q * mu)
            if kind is ConstraintKind.Q_EXPECTATION:
                return raw - t
            return raw / float(vals_q @ mu) - t

        constraints.append({"type": "eq", "fun": moment_residual})
    bounds = [(0.0, 0.0) if r.values[i] == 0.0 else (0.0, 1.0) for i in range(len(x0))]
    try:
        res = minimize(
            objective,
            x0,
            method="SLSQP",
            bounds=bounds,
            constraints=constraints,
            options={"ftol": 1e-13, "maxiter": 300},
        )
    except (ValueError, FloatingPointError):
        return None
    # accept on feasibility of the returned point, not on res.success: SLSQP
    # often parks on the constrained minimum yet reports its iteration limit
    if not np.all(np.isfinite(res.x)) or np.any(res.x < -1e-12):
        return None
    pi = np.clip(res.x, 0.0, None)
    viol = max(
        (float(np.max(np.abs(c["fun"](pi)))) for c in constraints),
        default=0.0,
    )
    if viol > 1e-9 or not np.isfinite(objective(pi)):
        return None
    return pi
