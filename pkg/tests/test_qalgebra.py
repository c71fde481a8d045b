import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relent import (
    CLASSICAL_EPS,
    QDomainError,
    QIndex,
    q_exp,
    q_exp_by_limit,
    q_log,
    q_power_n,
    q_product,
    q_product_q_exp,
)

positive_x = st.floats(min_value=0.01, max_value=10.0)
q_range = st.floats(min_value=0.05, max_value=3.0)


class TestQIndex:
    def test_validates_positive(self):
        with pytest.raises(QDomainError):
            QIndex(0.0)
        with pytest.raises(QDomainError):
            QIndex(-1.5)
        with pytest.raises(QDomainError):
            QIndex(float("nan"))

    def test_classical_flag(self):
        assert QIndex(1.0).is_classical
        assert QIndex(1.0 + 0.4 * CLASSICAL_EPS).is_classical
        assert not QIndex(1.0 + 1e-6).is_classical
        assert float(QIndex(2.0)) == 2.0


class TestQLog:
    def test_unit_argument_is_zero_for_all_q(self):
        for q in (0.2, 0.5, 1.0, 2.0, 3.0):
            assert q_log(1.0, q) == 0.0

    def test_hand_value_q2(self):
        # (2^(-1) - 1)/(-1)
        assert q_log(2.0, 2.0) == pytest.approx(0.5, abs=1e-15)

    def test_classical_limit(self):
        assert q_log(math.e, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_strictly_increasing(self):
        for q in (0.3, 0.9999, 1.7):
            xs = np.linspace(0.05, 5.0, 40)
            vals = [q_log(x, q) for x in xs]
            assert np.all(np.diff(vals) > 0)

    def test_domain(self):
        with pytest.raises(QDomainError):
            q_log(0.0, 2.0)
        with pytest.raises(QDomainError):
            q_log(-1.0, 0.5)


class TestQExp:
    def test_zero_is_one(self):
        for q in (0.5, 1.0, 2.5):
            assert q_exp(0.0, q) == 1.0

    def test_hand_value_q2(self):
        # (1 - 0.5)^(-1)
        assert q_exp(0.5, 2.0) == pytest.approx(2.0, abs=1e-15)

    def test_cutoff_below_q1(self):
        # 1 + 0.5*(-3) <= 0
        assert q_exp(-3.0, 0.5) == 0.0

    def test_divergent_branch_raises_above_q1(self):
        with pytest.raises(QDomainError):
            q_exp(2.0, 2.0)

    def test_inverse_pair(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            q = rng.uniform(0.1, 3.0)
            x = rng.uniform(0.05, 8.0)
            assert q_exp(q_log(x, q), q) == pytest.approx(x, rel=1e-12)
            y = rng.uniform(-0.5, 2.0)
            if 1.0 + (1.0 - q) * y > 1e-9:
                assert q_log(q_exp(y, q), q) == pytest.approx(y, rel=1e-10, abs=1e-12)


class TestQProduct:
    def test_identity_element(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = rng.uniform(0.05, 9.0)
            q = rng.uniform(0.1, 3.0)
            assert q_product(x, 1.0, q) == pytest.approx(x, rel=1e-12)

    def test_zero_branch_absorbs_negative_bracket(self):
        # 0.2 + 0.2 - 1 < 0 at q = 0
        assert q_product(0.2, 0.2, 0.0) == 0.0

    def test_zero_factor(self):
        assert q_product(0.0, 3.0, 0.5) == 0.0

    def test_hand_value(self):
        # (2 sqrt(2) - 1)^2
        expected = (2.0 * math.sqrt(2.0) - 1.0) ** 2
        assert q_product(2.0, 2.0, 0.5) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(3.3431, abs=5e-5)

    def test_negative_inputs_rejected(self):
        with pytest.raises(QDomainError):
            q_product(-1.0, 2.0, 0.5)

    def test_distributive_law_fails(self):
        a, x, y, q = 2.0, 2.0, 2.0, 0.5
        assert abs(a * q_product(x, y, q) - q_product(a * x, y, q)) > 0.1


class TestQPowerN:
    def test_single_factor(self):
        assert q_power_n(1.7, 1, 0.5) == pytest.approx(1.7, rel=1e-15)

    def test_classical_is_plain_power(self):
        assert q_power_n(2.0, 5, 1.0) == 32.0

    def test_fold_agrees_with_closed_form(self):
        # oracle: fold the binary q-product explicitly
        for x, n, q in ((2.0, 3, 0.5), (1.5, 4, 2.0), (0.7, 6, 0.3)):
            acc = x
            for _ in range(n - 1):
                acc = q_product(acc, x, q)
            assert q_power_n(x, n, q) == pytest.approx(acc, rel=1e-12, abs=1e-12)

    def test_frozen_fold_value(self):
        # 2 (x)q 2 (x)q 2 at q = 0.5: (3 sqrt(2) - 2)^2
        assert q_power_n(2.0, 3, 0.5) == pytest.approx(5.029437251522861, rel=1e-12)

    def test_cutoff_above_q1(self):
        # 3 * 2^(-1) - 2 < 0: the whole n-fold product collapses
        assert q_power_n(2.0, 3, 2.0) == 0.0
        assert q_product(q_product(2.0, 2.0, 2.0), 2.0, 2.0) == 0.0


class TestQExpByLimit:
    def test_exact_at_zero(self):
        for q in (0.5, 1.0, 2.0):
            assert q_exp_by_limit(0.0, 10, q) == 1.0

    def test_converges_to_q_exp(self):
        for q in (0.5, 1.0, 2.0):
            for x in (-0.5, -0.2, 0.1, 0.5):
                assert abs(q_exp_by_limit(x, 10**4, q) - q_exp(x, q)) < 1e-3

    def test_classical_compound_interest(self):
        assert abs(q_exp_by_limit(1.0, 10**4, 1.0) - math.e) < 1e-3

    def test_improves_with_n(self):
        errs = [abs(q_exp_by_limit(0.4, n, 2.0) - q_exp(0.4, 2.0)) for n in (10, 100, 1000)]
        assert errs[0] > errs[1] > errs[2]


# An absolute 1e-12 check is only meaningful while |ln_q| stays moderate:
# at |ln_q| ~ 1e3 a double already carries ~1e-13 of representation error,
# so corners like q -> 3 with x -> 0 are excluded from the sweeps.
def _moderate(*vals):
    return all(abs(v) < 1e3 for v in vals)


@settings(max_examples=300, deadline=None)
@given(x=positive_x, y=positive_x, q=q_range)
def test_qlog_turns_qproduct_into_sum(x, y, q):
    prod = q_product(x, y, q)
    if prod <= 0.0:
        return  # outside the positive-base regime
    lx, ly = q_log(x, q), q_log(y, q)
    if not _moderate(lx, ly):
        return
    assert q_log(prod, q) == pytest.approx(lx + ly, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(
    x=st.floats(min_value=-1.5, max_value=1.5),
    y=st.floats(min_value=-1.5, max_value=1.5),
    q=q_range,
)
def test_qexp_sum_rule(x, y, q):
    one_minus_q = 1.0 - q
    if min(1.0 + one_minus_q * x, 1.0 + one_minus_q * y, 1.0 + one_minus_q * (x + y)) <= 1e-9:
        return
    lhs = q_product(q_exp(x, q), q_exp(y, q), q)
    assert lhs == pytest.approx(q_exp(x + y, q), abs=1e-12, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(x=positive_x, y=positive_x, q=q_range)
def test_qlog_of_ratio(x, y, q):
    lx, ly = q_log(x, q), q_log(y, q)
    lhs = q_log(x / y, q)
    if not _moderate(lx, ly, lhs):
        return
    assert lhs == pytest.approx(y ** (q - 1.0) * (lx - ly), abs=1e-12, rel=1e-10)


@settings(max_examples=300, deadline=None)
@given(x=positive_x, y=positive_x, q=q_range)
def test_qlog_of_product_expansion(x, y, q):
    lhs = q_log(x * y, q)
    lx, ly = q_log(x, q), q_log(y, q)
    if not _moderate(lx, ly, lhs):
        return
    assert lhs == pytest.approx(lx + ly + (1.0 - q) * lx * ly, abs=1e-11, rel=1e-10)


class TestClassicalSwitch:
    """All operations must cross q = 1 without a jump."""

    def test_inside_switch_uses_classical_branch(self):
        q_in = 1.0 + 0.4 * CLASSICAL_EPS
        assert q_log(2.5, q_in) == math.log(2.5)
        assert q_exp(0.3, q_in) == math.exp(0.3)
        assert q_product(1.3, 2.1, q_in) == 1.3 * 2.1

    @pytest.mark.parametrize("q_off", [1.0 - 2e-8, 1.0 + 2e-8])
    def test_continuity_across_switch(self, q_off):
        assert abs(q_log(2.5, q_off) - math.log(2.5)) < 1e-6
        assert abs(q_exp(0.3, q_off) - math.exp(0.3)) < 1e-6
        assert abs(q_product(1.3, 2.1, q_off) - 1.3 * 2.1) < 1e-6
        assert abs(q_power_n(1.4, 3, q_off) - 1.4**3) < 1e-6
        assert abs(q_product_q_exp(1.3, 0.2, q_off) - 1.3 * math.exp(0.2)) < 1e-6


class TestQProductQExpComposite:
    def test_matches_two_step_evaluation_in_domain(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            q = rng.uniform(0.2, 2.5)
            x = rng.uniform(0.1, 3.0)
            a = rng.uniform(-0.4, 0.8)
            if 1.0 + (1.0 - q) * a <= 1e-9:
                continue
            assert q_product_q_exp(x, a, q) == pytest.approx(
                q_product(x, q_exp(a, q), q), rel=1e-12, abs=1e-12
            )

    def test_defined_where_qexp_alone_diverges(self):
        # q = 2, a = 8/7: e_q diverges but x^(1-q) + (1-q)a stays positive
        q, a, x = 2.0, 8.0 / 7.0, 0.5
        with pytest.raises(QDomainError):
            q_exp(a, q)
        expected = (x ** (1.0 - q) + (1.0 - q) * a) ** (1.0 / (1.0 - q))
        assert q_product_q_exp(x, a, q) == pytest.approx(expected, rel=1e-14)
