import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from plhmm import (BasisConfig, DiscreteDuration, DomainError, EmissionParams, Model, Series,
                   basis_eval, emission_log_density, left_to_right, segment_log_likelihood,
                   validate)
from plhmm.model import HERMITE, MONOMIAL, SEGMENT_OFFSET, design_matrix

# psi_1(-1), psi_2(-1) of the orthonormal Hermite functions, from mpmath at 40 digits
PSI1_AT_MINUS1 = -0.64428836511347518151
PSI2_AT_MINUS1 = 0.32214418255673759076


class TestBasisEval:
    def test_monomial_center_of_singleton(self):
        b = BasisConfig(MONOMIAL, 2, 1.0)
        np.testing.assert_array_equal(basis_eval(b, 2, 0, 1), [1.0, 0.0, 0.0])

    def test_hermite_odd_function_vanishes_at_origin(self):
        b = BasisConfig(HERMITE, 1, 2.5)
        np.testing.assert_allclose(basis_eval(b, 1, 0, 1), [1.0, 0.0], atol=0)

    def test_hermite_against_high_precision_values(self):
        b = BasisConfig(HERMITE, 2, 1.0)
        phi = basis_eval(b, 2, 0, 3)
        np.testing.assert_allclose(phi, [1.0, PSI1_AT_MINUS1, PSI2_AT_MINUS1], rtol=1e-14)

    def test_hermite_recurrence_matches_mpmath_at_high_order(self):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 40
        b = BasisConfig(HERMITE, 8, 3.0)
        d = 11
        for k in range(d):
            x = mp.mpf(3.0) * (-1 + mp.mpf(2 * k) / (d - 1))
            phi = basis_eval(b, 8, k, d)
            for n in range(1, 9):
                ref = mp.hermite(n, x) * mp.e ** (-x * x / 2) / mp.sqrt(2 ** n * mp.factorial(n) * mp.sqrt(mp.pi))
                assert abs(phi[n] - float(ref)) < 1e-13

    def test_offset_convention_uses_raw_index(self):
        b = BasisConfig(MONOMIAL, 2, 0.5, SEGMENT_OFFSET)
        np.testing.assert_allclose(basis_eval(b, 2, 4, 10), [1.0, 2.0, 4.0])

    @pytest.mark.parametrize("k,d", [(3, 3), (-1, 3), (0, 0)])
    def test_domain_errors(self, k, d):
        with pytest.raises(DomainError):
            basis_eval(BasisConfig(), 2, k, d)

    @given(d=st.integers(2, 60), order=st.integers(1, 8), scale=st.floats(0.1, 5.0))
    def test_parity_symmetry(self, d, order, scale):
        b = BasisConfig(HERMITE, order, scale)
        phi = design_matrix(b, order, d)
        for j in range(1, order + 1):
            np.testing.assert_allclose(phi[:, j], (-1) ** j * phi[::-1, j], atol=1e-12)

    def test_design_matrix_rows_match_basis_eval(self):
        b = BasisConfig(HERMITE, 4, 2.0)
        phi = design_matrix(b, 4, 7)
        for k in range(7):
            np.testing.assert_array_equal(phi[k], basis_eval(b, 4, k, 7))
        assert not phi.flags.writeable


class TestEmission:
    def test_zero_residual_unit_precision(self):
        em = EmissionParams([1.0, -2.0], 1.0)
        phi = np.array([1.0, 0.5])
        assert emission_log_density(em, phi, 0.0) == pytest.approx(-0.9189385332046727, abs=1e-15)

    def test_closed_form_precision_four(self):
        em = EmissionParams([0.3], 4.0)
        assert emission_log_density(em, [1.0], 0.3) == pytest.approx(0.5 * math.log(4 / (2 * math.pi)), abs=1e-15)
        assert emission_log_density(em, [1.0], 0.3) == pytest.approx(-0.2258, abs=5e-5)

    def test_density_integrates_to_one(self, rng):
        for _ in range(10):
            em = EmissionParams(rng.normal(size=3), rng.uniform(0.1, 20))
            phi = rng.normal(size=3)
            mu = float(em.weights @ phi)
            sigma = em.precision ** -0.5
            v = np.linspace(mu - 8 * sigma, mu + 8 * sigma, 40001)
            dens = np.exp([emission_log_density(em, phi, x) for x in v])
            assert abs(trapezoid(dens, v) - 1.0) < 1e-6

    def test_maximized_at_mean(self, rng):
        em = EmissionParams(rng.normal(size=2), 3.0)
        phi = rng.normal(size=2)
        mu = float(em.weights @ phi)
        top = emission_log_density(em, phi, mu)
        for dv in (-1.0, -1e-3, 1e-3, 2.0):
            assert emission_log_density(em, phi, mu + dv) < top

    def test_rejects_non_finite(self):
        em = EmissionParams([0.0], 1.0)
        with pytest.raises(DomainError):
            emission_log_density(em, [1.0], float("nan"))
        with pytest.raises(DomainError):
            emission_log_density(em, [1.0, 0.0], 0.0)


class TestSegmentLikelihood:
    def test_three_zero_residuals(self):
        em = EmissionParams([0.0], 1.0)
        ll = segment_log_likelihood(em, BasisConfig(max_order=0), [0.0, 0.0, 0.0], 3)
        assert ll == pytest.approx(-2.7568156, abs=1e-7)

    def test_singleton_equals_one_density(self, rng):
        b = BasisConfig(HERMITE, 3, 2.0)
        em = EmissionParams(rng.normal(size=4), 2.2)
        v = 0.7
        assert segment_log_likelihood(em, b, [v], 1) == pytest.approx(
            emission_log_density(em, basis_eval(b, 3, 0, 1), v), abs=1e-15)

    def test_matches_naive_loop(self, rng):
        for fam in (HERMITE, MONOMIAL):
            b = BasisConfig(fam, 4, 1.5)
            em = EmissionParams(rng.normal(size=5), rng.uniform(0.5, 5))
            for d in (1, 2, 5, 17):
                x = rng.normal(size=d)
                naive = 0.0
                for k in range(d):
                    phi = basis_eval(b, 4, k, d)
                    r = x[k] - sum(w * p for w, p in zip(em.weights, phi))
                    naive += 0.5 * math.log(em.precision / (2 * math.pi)) - 0.5 * em.precision * r * r
                assert segment_log_likelihood(em, b, x, d) == pytest.approx(naive, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            segment_log_likelihood(EmissionParams([0.0], 1.0), BasisConfig(), [0.0, 1.0], 3)


def _ltr3():
    durs = [DiscreteDuration.uniform(1, 3)] * 3
    ems = [EmissionParams([0.0, 1.0], 1.0)] * 3
    return left_to_right(durs, ems, BasisConfig(max_order=1))


class TestValidate:
    def test_left_to_right_ok(self):
        m = _ltr3()
        np.testing.assert_array_equal(m.pi, [1, 0, 0])
        assert m.trans[0, 1] == 1 and m.trans[1, 2] == 1
        assert validate(m).ok

    def test_self_transition(self):
        m = _ltr3()
        trans = m.trans.copy()
        trans[0, 0] = 0.5
        report = validate(m.replace(trans=trans))
        assert "self-transition nonzero at state 1" in [v.message for v in report.violations]

    def test_row_sum(self):
        m = _ltr3()
        trans = m.trans.copy()
        trans[0, 1] = 0.8
        report = validate(m.replace(trans=trans))
        assert report.kinds() == {"row-sum"}
        assert "row 1" in str(report)

    def _mutations(self, m):
        trans = m.trans.copy()
        trans[0, 0], trans[0, 1] = 0.5, 0.5
        yield "self-transition", m.replace(trans=trans)
        trans = m.trans.copy()
        trans[0, 1], trans[0, 2] = 0.5, 0.5
        yield "masked-transition", m.replace(trans=trans)
        trans = m.trans.copy()
        trans[1, 2] = 0.7
        yield "row-sum", m.replace(trans=trans)
        trans = m.trans.copy()
        trans[0, 1], trans[0, 2] = 1.5, -0.5
        mask = m.topology_mask.copy()
        mask[0, 2] = True
        yield "trans-negative", m.replace(trans=trans, topology_mask=mask)
        yield "pi-sum", m.replace(pi=[0.5, 0.0, 0.0])
        yield "pi-negative", m.replace(pi=[1.5, -0.5, 0.0])
        trans = m.trans.copy()
        trans[2, 0] = 1.0
        yield "masked-transition", m.replace(trans=trans)
        ems = list(m.emissions)
        ems[1] = EmissionParams([0.0, 1.0], -1.0)
        yield "emission", m.replace(emissions=ems)
        ems[1] = EmissionParams([0.0, np.inf], 1.0)
        yield "emission", m.replace(emissions=ems)

    def test_single_mutation_single_violation_class(self):
        m = _ltr3()
        for kind, bad in self._mutations(m):
            report = validate(bad)
            assert report.kinds() == {kind}, (kind, str(report))

    def test_constructor_checks_shapes(self):
        m = _ltr3()
        with pytest.raises(DomainError):
            Model(m.pi, m.trans[:2], m.topology_mask, m.durations, m.emissions)
        with pytest.raises(DomainError):
            Model(m.pi, m.trans, m.topology_mask, m.durations[:2], m.emissions)


class TestSeries:
    def test_rejects_empty_and_nan(self):
        with pytest.raises(DomainError):
            Series([])
        with pytest.raises(DomainError):
            Series([0.0, float("nan")])

    def test_immutable(self):
        s = Series([1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 3.0
