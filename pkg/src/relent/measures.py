"""Finite discrete probability spaces and the divergence functionals on them.

A FiniteSpace carries per-point reference weights mu.  Densities store
values with respect to mu, so point probabilities are ``values * mu``;
this keeps nonuniform reference measures first-class.  All functionals
are mu-weighted sums, and all objects are immutable after construction.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateFeatureError,
    InfeasibleTargetError,
    QDomainError,
    SpaceMismatchError,
)
from .qalgebra import CLASSICAL_EPS, QIndex, as_q

NORMALIZATION_TOL = 1e-10


class ConstraintKind(str, enum.Enum):
    """The three constraint semantics a moment specification can use."""

    CLASSICAL = "classical"
    Q_EXPECTATION = "q-expectation"
    NORMALIZED_Q = "normalized-q-expectation"


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {values!r}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FiniteSpace:
    """Sample space: ordered point labels plus positive reference weights mu."""

    points: tuple[str, ...]
    mu: np.ndarray

    def __init__(self, points, mu):
        pts = tuple(str(p) for p in points)
        if len(pts) < 2:
            raise ValueError(f"a space needs at least 2 points, got {len(pts)}")
        if len(set(pts)) != len(pts):
            raise ValueError("point labels must be unique")
        arr = _frozen_array(mu, "mu")
        if arr.ndim != 1 or arr.shape[0] != len(pts):
            raise ValueError(f"mu must have one weight per point, got shape {arr.shape}")
        if not np.all(arr > 0.0):
            raise ValueError("all mu weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "mu", arr)

    @property
    def size(self) -> int:
        return len(self.points)

    def __eq__(self, other):
        return (
            isinstance(other, FiniteSpace)
            and self.points == other.points
            and np.array_equal(self.mu, other.mu)
        )

    def __hash__(self):
        return hash((self.points, self.mu.tobytes()))

    def require_same(self, other: "FiniteSpace", what: str = "operands"):
        if self != other:
            raise SpaceMismatchError(f"{what} live on different spaces")


@dataclass(frozen=True, eq=False)
class Density:
    """Nonnegative function on a FiniteSpace, normalized against mu."""

    space: FiniteSpace
    values: np.ndarray

    def __init__(self, space: FiniteSpace, values):
        arr = _frozen_array(values, "density values")
        if arr.shape != (space.size,):
            raise ValueError(f"expected {space.size} values, got shape {arr.shape}")
        if np.any(arr < 0.0):
            raise ValueError("density values must be nonnegative")
        total = float(arr @ space.mu)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(
                f"density not normalized: sum(values * mu) = {total!r} "
                f"(tolerance {NORMALIZATION_TOL})"
            )
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "values", arr)

    @property
    def probabilities(self) -> np.ndarray:
        return self.values * self.space.mu

    @classmethod
    def from_probabilities(cls, space: FiniteSpace, probs) -> "Density":
        probs = np.asarray(probs, dtype=float)
        return cls(space, probs / space.mu)

    @classmethod
    def uniform(cls, space: FiniteSpace) -> "Density":
        total = float(space.mu.sum())
        return cls(space, np.full(space.size, 1.0 / total))

    def __eq__(self, other):
        return (
            isinstance(other, Density)
            and self.space == other.space
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.space, self.values.tobytes()))


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """M real-valued per-point tables, the functions whose moments get constrained.

    Constant features are rejected: they can never pin down a Lagrange
    multiplier and make every solver Jacobian singular.
    """

    space: FiniteSpace
    values: np.ndarray  # shape (M, n_points)
    names: tuple[str, ...]

    def __init__(self, space: FiniteSpace, values, names=None):
        arr = _frozen_array(values, "feature values")
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
            arr.setflags(write=False)
        if arr.ndim != 2 or arr.shape[1] != space.size:
            raise ValueError(
                f"feature table must be (M, {space.size}), got shape {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise ValueError("need at least one feature")
        if names is None:
            names = tuple(f"u{m + 1}" for m in range(arr.shape[0]))
        else:
            names = tuple(str(n) for n in names)
            if len(names) != arr.shape[0]:
                raise ValueError("one name per feature required")
        for m in range(arr.shape[0]):
            lo, hi = float(arr[m].min()), float(arr[m].max())
            if hi - lo <= 1e-12 * max(1.0, abs(hi), abs(lo)):
                raise DegenerateFeatureError(
                    f"feature {names[m]!r} is constant on the space"
                )
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "names", names)

    @property
    def count(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MomentSpec:
    """Constraint targets under one of the three semantics, plus the q index."""

    kind: ConstraintKind
    targets: np.ndarray
    q: QIndex = field(default_factory=QIndex)

    def __post_init__(self):
        kind = ConstraintKind(self.kind)
        targets = _frozen_array(self.targets, "targets")
        if targets.ndim != 1 or targets.shape[0] < 1:
            raise ValueError("targets must be a nonempty 1-D vector")
        q = self.q if isinstance(self.q, QIndex) else QIndex(self.q)
        if kind is ConstraintKind.CLASSICAL and not q.is_classical:
            raise ValueError("classical constraints require q = 1")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "q", q)

    @classmethod
    def classical(cls, targets) -> "MomentSpec":
        return cls(ConstraintKind.CLASSICAL, np.atleast_1d(np.asarray(targets, float)))

    @classmethod
    def q_expectation(cls, targets, q) -> "MomentSpec":
        return cls(
            ConstraintKind.Q_EXPECTATION,
            np.atleast_1d(np.asarray(targets, float)),
            q if isinstance(q, QIndex) else QIndex(q),
        )

    @classmethod
    def normalized_q(cls, targets, q) -> "MomentSpec":
        return cls(
            ConstraintKind.NORMALIZED_Q,
            np.atleast_1d(np.asarray(targets, float)),
            q if isinstance(q, QIndex) else QIndex(q),
        )

    def validate_against(self, features: FeatureSet):
        """Check target count and ranges against a feature set.

        A classical target outside the closed range of its feature is
        infeasible outright and raises; in the q regimes the feature range
        is not the reachable set, so an out-of-range target only warns.
        """
        if self.targets.shape[0] != features.count:
            raise ValueError(
                f"expected {features.count} targets (one per feature), "
                f"got {self.targets.shape[0]}"
            )
        for m in range(features.count):
            lo = float(features.values[m].min())
            hi = float(features.values[m].max())
            t = float(self.targets[m])
            if lo <= t <= hi:
                continue
            msg = (
                f"target {t} for feature {features.names[m]!r} lies outside "
                f"the feature range [{lo}, {hi}]"
            )
            if self.kind is ConstraintKind.CLASSICAL:
                raise InfeasibleTargetError(msg)
            warnings.warn(msg, stacklevel=2)


def _require_q_positive(q) -> float:
    qv = as_q(q)
    if qv <= 0.0:
        raise QDomainError(f"divergence functionals require q > 0, got {qv}")
    return qv


def _qlog_ratio_sum(p: np.ndarray, num: np.ndarray, mu: np.ndarray, qv: float) -> float:
    # sum of p * ln_q(num / p) * mu over the support of p, expm1-stable near q = 1
    sup = p > 0.0
    pn, nn, mn = p[sup], num[sup], mu[sup]
    one_minus_q = 1.0 - qv
    lnq = np.expm1(one_minus_q * (np.log(nn) - np.log(pn))) / one_minus_q
    return float(np.sum(pn * lnq * mn))


def has_support_violation(p: Density, r: Density) -> bool:
    """True when p puts mass where r has none (absolute continuity fails)."""
    p.space.require_same(r.space, "densities")
    return bool(np.any((p.values > 0.0) & (r.values == 0.0)))


def shannon_entropy(p: Density) -> float:
    mu = p.space.mu
    sup = p.values > 0.0
    v = p.values[sup]
    return float(-np.sum(v * np.log(v) * mu[sup]))


def shannon_relative_entropy(p: Density, r: Density) -> float:
    """KL divergence sum(p ln(p/r) mu), +inf on an absolute-continuity failure."""
    p.space.require_same(r.space, "densities")
    if has_support_violation(p, r):
        return math.inf
    mu = p.space.mu
    sup = p.values > 0.0
    pv, rv = p.values[sup], r.values[sup]
    return float(np.sum(pv * (np.log(pv) - np.log(rv)) * mu[sup]))


def tsallis_entropy(p: Density, q) -> float:
    """Nonextensive entropy (1 - sum(p^q mu))/(q - 1); Shannon at q = 1."""
    qv = _require_q_positive(q)
    if abs(qv - 1.0) < CLASSICAL_EPS:
        return shannon_entropy(p)
    mu = p.space.mu
    sup = p.values > 0.0
    v = p.values[sup]
    # (1 - sum p^q mu)/(q-1) via p^q - p = p expm1((q-1) ln p), exact as q -> 1
    one_minus_q = 1.0 - qv
    return float(np.sum(v * np.expm1(-one_minus_q * np.log(v)) * mu[sup]) / one_minus_q)


def tsallis_relative_entropy(p: Density, r: Density, q) -> float:
    """Deformed divergence -sum(p ln_q(r/p) mu); KL at q = 1.

    Returns +inf whenever p carries mass off r's support, for every q > 0.
    (For q < 1 the integrand itself would stay finite; callers that care
    can detect the situation with has_support_violation and flag it.)
    """
    qv = _require_q_positive(q)
    p.space.require_same(r.space, "densities")
    if abs(qv - 1.0) < CLASSICAL_EPS:
        return shannon_relative_entropy(p, r)
    if has_support_violation(p, r):
        return math.inf
    return -_qlog_ratio_sum(p.values, r.values, p.space.mu, qv)


def q_expectation(u, p: Density, q) -> float:
    """Unnormalized q-moment sum(u p^q mu)."""
    qv = _require_q_positive(q)
    u = np.asarray(u, dtype=float)
    if u.shape != p.values.shape:
        raise ValueError(f"feature table shape {u.shape} does not match the space")
    return float(np.sum(u * np.power(p.values, qv) * p.space.mu))


def normalized_q_expectation(u, p: Density, q) -> float:
    """q-moment normalized by sum(p^q mu)."""
    qv = _require_q_positive(q)
    u = np.asarray(u, dtype=float)
    if u.shape != p.values.shape:
        raise ValueError(f"feature table shape {u.shape} does not match the space")
    pq = np.power(p.values, qv)
    return float(np.sum(u * pq * p.space.mu) / np.sum(pq * p.space.mu))


def constraint_moments(features: FeatureSet, p: Density, kind: ConstraintKind, q) -> np.ndarray:
    """Vector of feature moments of p under the given constraint semantics."""
    features.space.require_same(p.space, "features and density")
    kind = ConstraintKind(kind)
    qv = _require_q_positive(q)
    mu = p.space.mu
    if kind is ConstraintKind.CLASSICAL:
        return features.values @ p.probabilities
    pq = np.power(p.values, qv)
    raw = features.values @ (pq * mu)
    if kind is ConstraintKind.Q_EXPECTATION:
        return raw
    return raw / float(np.sum(pq * mu))


def product_density(pX: Density, pY: Density) -> Density:
    """Independent product on the product space; weights multiply pointwise."""
    labels = tuple(
        f"({a},{b})" for a in pX.space.points for b in pY.space.points
    )
    mu = np.outer(pX.space.mu, pY.space.mu).ravel()
    values = np.outer(pX.values, pY.values).ravel()
    return Density(FiniteSpace(labels, mu), values)
