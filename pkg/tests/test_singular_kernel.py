from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracflow.config import random_field
from fracflow.errors import GridTooCoarse, InvalidOrder, NonFinite
from fracflow.singular_kernel import (
    Domain,
    HeightField,
    correction_coefficients,
    inner,
    kernel_weights,
    l2_stats,
    lattice_sum,
    offset_weights,
    riesz_apply,
    riesz_spectrum,
    seminorm_sq,
)
from fracflow.spectral import eigenvalue_closed_form, line_eigenvalue

import oracles


def cos_field(domain, N, k=1):
    w = 1.0 if Domain(domain) is Domain.CIRCLE else 2 * np.pi
    return HeightField.from_function(domain, N, lambda x: np.cos(k * w * x))


class TestHeightField:
    @pytest.mark.parametrize("N", [0, 4, 6, 9, 255])
    def test_rejects_small_or_odd_grids(self, N):
        with pytest.raises(GridTooCoarse):
            HeightField(Domain.CIRCLE, np.zeros(N))

    def test_rejects_nan(self):
        vals = np.zeros(16)
        vals[3] = np.nan
        with pytest.raises(NonFinite):
            HeightField(Domain.LINE, vals)

    def test_values_are_read_only_copy(self):
        src = np.arange(8.0)
        u = HeightField(Domain.CIRCLE, src)
        src[0] = 100.0
        assert u.values[0] == 0.0
        with pytest.raises(ValueError):
            u.values[0] = 1.0

    def test_geometry(self):
        u = HeightField(Domain.CIRCLE, np.zeros(64))
        assert u.h == pytest.approx(2 * np.pi / 64)
        assert HeightField(Domain.LINE, np.zeros(64)).cell_length == 1.0


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5, float("nan"), "abc"])
def test_invalid_order(s):
    with pytest.raises(InvalidOrder):
        seminorm_sq(HeightField(Domain.CIRCLE, np.zeros(16)), s)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_correction_coefficients_fit_zeta_moments(s):
    # the corrected rule integrates |x|^{-s} x^{2m} exactly in the zeta-regularised sense
    from scipy.special import zeta

    g = np.array(correction_coefficients(s, 3))
    j = np.arange(1, 4)
    for m in range(3):
        assert np.dot(g, j ** (2 * m - s)) == pytest.approx(-zeta(s - 2 * m), rel=1e-10, abs=1e-12)


def test_offset_weights_symmetric():
    c = offset_weights(64, 0.5)
    np.testing.assert_array_equal(c, c[::-1])
    assert np.all(c[4:-4] == 1.0)


def test_lattice_sum_matches_brute_force():
    delta = np.array([-0.3, 0.1, 0.45])
    M = 20000
    brute = sum(np.abs(delta + m) ** -2.5 for m in range(-M, M + 1) if m != 0)
    brute += 2 * (M + 0.5) ** -1.5 / 1.5  # midpoint estimate of the two truncated tails
    np.testing.assert_allclose(lattice_sum(delta, 2.5), brute, rtol=1e-9)


@pytest.mark.parametrize("domain", [Domain.CIRCLE, Domain.LINE])
@pytest.mark.parametrize("c", [0.0, 3.0, -1.7])
def test_constant_in_kernel(domain, c):
    u = HeightField(domain, np.full(64, c))
    np.testing.assert_allclose(riesz_apply(u, 0.5).values, 0.0, atol=1e-10)
    assert seminorm_sq(u, 0.5) == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_cos_is_eigenfunction_on_circle(s):
    u = cos_field(Domain.CIRCLE, 256)
    v = riesz_apply(u, s).values
    lam = oracles.circle_eigenvalue(1, s)
    np.testing.assert_allclose(v, lam * u.values, atol=1e-9 * lam)


def test_line_symbol_against_oracle():
    u = cos_field(Domain.LINE, 256)
    mu = oracles.line_symbol(1, 0.5)
    assert mu == pytest.approx(105.27578027828459, rel=1e-12)
    np.testing.assert_allclose(riesz_apply(u, 0.5).values, mu * u.values, atol=1e-8 * mu)
    assert line_eigenvalue(1, 0.5) == pytest.approx(mu, rel=1e-12)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_seminorm_of_cos(s):
    u = cos_field(Domain.CIRCLE, 256)
    assert seminorm_sq(u, s) == pytest.approx(np.pi * oracles.circle_eigenvalue(1, s), rel=1e-10)


def _exact(domain, k, s):
    return eigenvalue_closed_form(k, s) if domain is Domain.CIRCLE else line_eigenvalue(k, s)


@pytest.mark.parametrize("domain", [Domain.CIRCLE, Domain.LINE])
def test_spectrum_matches_closed_form(domain):
    lam = riesz_spectrum(128, 0.5, domain)
    for k in (1, 2, 5):
        assert lam[k] == pytest.approx(_exact(domain, k, 0.5), rel=1e-6)
    assert lam[0] == pytest.approx(0.0, abs=1e-9)
    assert np.all(lam[1:] > 0)


@pytest.mark.parametrize("domain", [Domain.CIRCLE, Domain.LINE])
def test_spectrum_refinement_order(domain):
    # error at a fixed mode falls like h^(7 - s) for the order-3 corrected rule
    errs = [abs(riesz_spectrum(N, 0.5, domain)[16] / _exact(domain, 16, 0.5) - 1) for N in (128, 256)]
    assert np.log2(errs[0] / errs[1]) > 6.0


def test_kernel_weights_cached_and_frozen():
    W = kernel_weights(64, 0.5, Domain.CIRCLE)
    assert W is kernel_weights(64, 0.5, Domain.CIRCLE)
    assert not W.flags.writeable


class TestL2Stats:
    @pytest.mark.parametrize("domain,cell", [(Domain.CIRCLE, 2 * np.pi), (Domain.LINE, 1.0)])
    def test_constant(self, domain, cell):
        mean, l2, grad = l2_stats(HeightField(domain, np.full(32, 3.0)))
        assert (mean, grad) == (3.0, 0.0)
        assert l2 == pytest.approx(9 * cell)

    def test_cos(self):
        mean, l2, _ = l2_stats(cos_field(Domain.CIRCLE, 128))
        assert mean == pytest.approx(0.0, abs=1e-15)
        assert l2 == pytest.approx(np.pi)

    def test_sup_grad_sin(self):
        u = HeightField.from_function(Domain.LINE, 256, lambda x: np.sin(2 * np.pi * x))
        assert abs(l2_stats(u)[2] - 2 * np.pi) <= 1e-3


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), s=st.floats(0.05, 0.95), line=st.booleans())
def test_fract_identity(seed, s, line):
    domain = Domain.LINE if line else Domain.CIRCLE
    cell = 1.0 if line else 2 * np.pi
    u = HeightField(domain, random_field(128, cell, seed, 0.5))
    sem = seminorm_sq(u, s)
    assert abs(sem - inner(u, riesz_apply(u, s))) <= 1e-12 * sem


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linearity(seed, a, b):
    u = HeightField(Domain.CIRCLE, random_field(64, 2 * np.pi, seed, 1.0))
    v = HeightField(Domain.CIRCLE, random_field(64, 2 * np.pi, seed + 1, 1.0))
    lhs = riesz_apply(u.with_values(a * u.values + b * v.values), 0.4).values
    rhs = a * riesz_apply(u, 0.4).values + b * riesz_apply(v, 0.4).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), shift=st.integers(0, 63))
def test_shift_equivariance(seed, shift):
    vals = random_field(64, 1.0, seed, 1.0)
    u = HeightField(Domain.LINE, vals)
    a = np.roll(riesz_apply(u, 0.6).values, shift)
    b = riesz_apply(u.with_values(np.roll(vals, shift)), 0.6).values
    np.testing.assert_allclose(a, b, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_seminorm_nonnegative(seed):
    u = HeightField(Domain.CIRCLE, random_field(64, 2 * np.pi, seed, 1.0))
    assert seminorm_sq(u, 0.5) >= 0.0
