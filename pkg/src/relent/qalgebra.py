"""Scalar kernel for the q-deformed algebra: logarithm, exponential, product.

The deformed pair is ln_q(x) = (x^(1-q) - 1)/(1-q) and
e_q(x) = [1 + (1-q)x]^(1/(1-q)), with the cut-off convention that a
nonpositive base collapses to 0 when q < 1.  Everything here is written in
expm1/log1p form so the functions stay accurate arbitrarily close to the
classical index q = 1, where they switch to ln/exp/ordinary product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import QDomainError

# |q - 1| below this dispatches to the classical branch.
CLASSICAL_EPS = 1e-8


@dataclass(frozen=True)
class QIndex:
    """Entropic index for the deformed operations.

    Enforces q > 0, the condition under which the constrained minimizers
    downstream can be minima at all.  The raw kernels below also accept
    plain floats (including q <= 0) for algebra experiments; QIndex is the
    validated currency used by densities, solvers and the CLI.
    """

    q: float = 1.0

    def __post_init__(self):
        qv = float(self.q)
        if not math.isfinite(qv):
            raise QDomainError(f"entropic index must be finite, got {self.q!r}")
        if qv <= 0.0:
            raise QDomainError(f"entropic index must be positive, got {qv}")
        object.__setattr__(self, "q", qv)

    @property
    def is_classical(self) -> bool:
        return abs(self.q - 1.0) < CLASSICAL_EPS

    def __float__(self) -> float:
        return self.q


def as_q(q) -> float:
    """Coerce a QIndex or plain number to a finite float entropic index."""
    qv = float(q)
    if not math.isfinite(qv):
        raise QDomainError(f"entropic index must be finite, got {q!r}")
    return qv


def is_classical(q) -> bool:
    return abs(as_q(q) - 1.0) < CLASSICAL_EPS


def _exp_or_inf(arg: float) -> float:
    try:
        return math.exp(arg)
    except OverflowError:
        return math.inf


def q_log(x, q) -> float:
    """Deformed logarithm; strictly increasing, ln_q(1) = 0, ln at q = 1."""
    qv = as_q(q)
    xv = float(x)
    if not xv > 0.0 or not math.isfinite(xv):
        raise QDomainError(f"q_log requires finite x > 0, got {x!r}")
    if abs(qv - 1.0) < CLASSICAL_EPS:
        return math.log(xv)
    one_minus_q = 1.0 - qv
    arg = one_minus_q * math.log(xv)
    if arg > 700.0:
        return math.inf
    return math.expm1(arg) / one_minus_q


def q_exp(x, q) -> float:
    """Deformed exponential, the inverse of q_log on its domain.

    Returns 0 on a nonpositive base when q < 1 (cut-off); a nonpositive
    base with q > 1 means the expression diverges and raises QDomainError
    so solvers never see an infinity.
    """
    qv = as_q(q)
    xv = float(x)
    if not math.isfinite(xv):
        raise QDomainError(f"q_exp requires finite x, got {x!r}")
    if abs(qv - 1.0) < CLASSICAL_EPS:
        return _exp_or_inf(xv)
    one_minus_q = 1.0 - qv
    base_m1 = one_minus_q * xv
    if base_m1 <= -1.0:
        if qv < 1.0:
            return 0.0
        raise QDomainError(
            f"q_exp({xv}) diverges for q={qv}: 1 + (1-q)x = {1.0 + base_m1} <= 0"
        )
    return _exp_or_inf(math.log1p(base_m1) / one_minus_q)


def q_product(x, y, q) -> float:
    """Deformed product: (x^(1-q) + y^(1-q) - 1)^(1/(1-q)), else 0.

    The 0 branch absorbs every degenerate input: a zero factor or a
    nonpositive bracket.  Recovers x*y at the classical index.
    """
    qv = as_q(q)
    xv, yv = float(x), float(y)
    if xv < 0.0 or yv < 0.0:
        raise QDomainError(f"q_product requires x, y >= 0, got {x!r}, {y!r}")
    if abs(qv - 1.0) < CLASSICAL_EPS:
        return xv * yv
    if xv == 0.0 or yv == 0.0:
        return 0.0
    one_minus_q = 1.0 - qv
    # bracket - 1, kept exact near q = 1
    t = math.expm1(one_minus_q * math.log(xv)) + math.expm1(one_minus_q * math.log(yv))
    if t <= -1.0:
        return 0.0
    return _exp_or_inf(math.log1p(t) / one_minus_q)


def q_product_q_exp(x, a, q) -> float:
    """x (q-producted with) e_q(a), in closed form (x^(1-q) + (1-q)a)^(1/(1-q)).

    Equivalent to q_product(x, q_exp(a, q), q) wherever the e_q factor is a
    positive real, but also well-defined where e_q alone overflows the
    reals (q > 1 with nonpositive base), which is exactly how the
    composite appears inside the minimum-entropy densities.
    """
    qv = as_q(q)
    xv, av = float(x), float(a)
    if xv < 0.0:
        raise QDomainError(f"q_product_q_exp requires x >= 0, got {x!r}")
    if abs(qv - 1.0) < CLASSICAL_EPS:
        return xv * _exp_or_inf(av)
    if xv == 0.0:
        return 0.0
    one_minus_q = 1.0 - qv
    t = math.expm1(one_minus_q * math.log(xv)) + one_minus_q * av
    if t <= -1.0:
        return 0.0
    return _exp_or_inf(math.log1p(t) / one_minus_q)


def q_power_n(x, n, q) -> float:
    """n-fold q-product of x with itself: (n x^(1-q) - (n-1))^(1/(1-q)), cut off at 0."""
    qv = as_q(q)
    xv = float(x)
    if not xv > 0.0 or not math.isfinite(xv):
        raise QDomainError(f"q_power_n requires finite x > 0, got {x!r}")
    if not (isinstance(n, int) and n >= 1):
        raise QDomainError(f"q_power_n requires an integer n >= 1, got {n!r}")
    if abs(qv - 1.0) < CLASSICAL_EPS:
        return xv**n
    one_minus_q = 1.0 - qv
    t = n * math.expm1(one_minus_q * math.log(xv))
    if t <= -1.0:
        return 0.0
    return _exp_or_inf(math.log1p(t) / one_minus_q)


def q_exp_by_limit(x, n, q) -> float:
    """Compound-interest approximation of q_exp: (1 + x/n) q-powered n times."""
    qv = as_q(q)
    xv = float(x)
    if not (isinstance(n, int) and n >= 1):
        raise QDomainError(f"q_exp_by_limit requires an integer n >= 1, got {n!r}")
    base = 1.0 + xv / n
    if base <= 0.0:
        return 0.0
    return q_power_n(base, n, qv)
