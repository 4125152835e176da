import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tamedspde.errors import ConfigurationError
from tamedspde.spectral import (
    DualField,
    Domain,
    SpectralField,
    embed,
    galerkin_constant,
    make_basis,
    norm,
    project,
    to_physical,
    to_spectral,
    unit,
    zeros,
)

LINE = Domain(1, (math.pi,), "dirichlet")
SQUARE = Domain(2, (math.pi,), "dirichlet")
ROD = Domain(1, (1.0,), "neumann")

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def direct_sum(basis, c):
    """O(N^2) evaluation of a 1D sine or cosine expansion at the grid nodes."""
    (x,) = basis.nodes
    L = basis.domain.lengths[0]
    out = np.zeros_like(x)
    for j, (n,) in enumerate(basis.modes):
        if basis.domain.bc[0] == "dirichlet":
            out += c[j] * math.sqrt(2 / L) * np.sin(n * math.pi * x / L)
        else:
            amp = math.sqrt(1 / L) if n == 0 else math.sqrt(2 / L)
            out += c[j] * amp * np.cos(n * math.pi * x / L)
    return out


def test_mode_sets():
    assert make_basis(LINE, 3).modes.ravel().tolist() == [1, 2, 3]
    assert make_basis(SQUARE, 2).modes.tolist() == [[1, 1], [1, 2], [2, 1], [2, 2]]
    assert make_basis(ROD, 2).modes.ravel().tolist() == [0, 1, 2]


def test_neumann_constant_mode():
    b = make_basis(ROD, 2)
    np.testing.assert_allclose(to_physical(unit(b, 0)), 1.0, atol=1e-15)


def test_prefix_nesting_2d():
    coarse, fine = make_basis(SQUARE, 3), make_basis(SQUARE, 5)
    assert fine.modes[: coarse.size].tolist() == coarse.modes.tolist()


@pytest.mark.parametrize("m, p", [(0, 2.0), (-1, 2.0), (3, 1.5)])
def test_invalid_basis(m, p):
    with pytest.raises(ConfigurationError):
        make_basis(LINE, m, p)


def test_orthonormality():
    for dom in (LINE, SQUARE, ROD):
        b = make_basis(dom, 6, 4.0)
        g = b.synthesize(np.eye(b.size))
        gram = b.analyze(g)
        np.testing.assert_allclose(gram, np.eye(b.size), atol=1e-13)


def test_zero_and_single_mode():
    b = make_basis(LINE, 1)
    assert not np.any(to_physical(zeros(b)))
    (x,) = b.nodes
    np.testing.assert_allclose(to_physical(unit(b, 0)), math.sqrt(2 / math.pi) * np.sin(x), atol=1e-15)
    assert not np.any(to_spectral(np.zeros(b.grid_shape), b).coeffs)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 9, elements=finite))
def test_round_trip_against_direct_sum(c):
    for b in (make_basis(LINE, 9, 3.0), make_basis(ROD, 8, 3.0)):
        g = to_physical(SpectralField(b, c))
        np.testing.assert_allclose(g, direct_sum(b, c), atol=1e-12)
        np.testing.assert_allclose(to_spectral(g, b).coeffs, c, atol=1e-12)


def test_analyze_unit_grid():
    b = make_basis(LINE, 4)
    e2 = to_spectral(to_physical(unit(b, 1)), b).coeffs
    np.testing.assert_allclose(e2, [0, 1, 0, 0], atol=1e-12)


def test_analyze_sin_cubed():
    b = make_basis(LINE, 5)
    (x,) = b.nodes
    c = to_spectral(np.sin(x) ** 3, b).coeffs
    s = math.sqrt(math.pi / 2)
    np.testing.assert_allclose(c, [0.75 * s, 0, -0.25 * s, 0, 0], atol=1e-12)


def test_to_spectral_rejects_wrong_grid():
    b = make_basis(LINE, 4)
    with pytest.raises(ConfigurationError):
        to_spectral(np.zeros(b.grid_shape[0] + 1), b)


def test_project_keeps_coarse_fields():
    coarse, fine = make_basis(SQUARE, 3), make_basis(SQUARE, 6)
    f = SpectralField(coarse, np.random.default_rng(1).normal(size=coarse.size))
    np.testing.assert_array_equal(project(embed(f, fine), 3).coeffs, f.coeffs)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 36, elements=finite), arrays(float, 9, elements=finite))
def test_project_contraction_and_duality(h, g):
    fine = make_basis(SQUARE, 6)
    ph = project(SpectralField(fine, h), 3)
    assert np.linalg.norm(ph.coeffs) <= np.linalg.norm(h) + 1e-12
    # (Pi_m f, g) = <f, g> for g in V_m, with f given as a dual element
    f = DualField(fine, h)
    gg = embed(SpectralField(ph.basis, g), fine).coeffs
    assert abs(project(f, 3).coeffs @ g - h @ gg) <= 1e-12 * (1 + np.abs(h) @ np.abs(gg))


def test_project_refuses_finer_cutoff():
    with pytest.raises(ConfigurationError):
        project(zeros(make_basis(LINE, 3)), 4)


def test_norms_of_lowest_square_mode():
    b = make_basis(SQUARE, 2, 4.0)
    phi = unit(b, 0)
    assert norm(zeros(b), "V") == 0
    assert norm(phi, "H") == pytest.approx(1.0, abs=1e-14)
    grad = sum(b.integrate(b.synthesize(phi.coeffs, deriv=a) ** 2) for a in range(2))
    assert grad == pytest.approx(2.0, abs=1e-12)
    assert norm(phi, "V1") == pytest.approx(math.sqrt(3), abs=1e-12)
    assert norm(phi, "V2", p=4) == pytest.approx((9 / (4 * math.pi**2)) ** 0.25, abs=1e-12)


def test_galerkin_constant_square_m1():
    exact, closed = galerkin_constant(make_basis(SQUARE, 1, 2.0))
    assert closed == pytest.approx(4.0, abs=1e-12)
    assert exact == pytest.approx((math.sqrt(3) + 1) ** 2, abs=1e-12)


def galerkin_oracle_line(m, p=4.0):
    # int_0^pi |sin|^p = sqrt(pi) Gamma((p+1)/2) / Gamma(p/2 + 1)
    lp = math.sqrt(2 / math.pi) * (
        math.sqrt(math.pi) * math.gamma((p + 1) / 2) / math.gamma(p / 2 + 1)
    ) ** (1 / p)
    return sum((math.sqrt(1 + j * j) + lp) ** 2 for j in range(1, m + 1))


def galerkin_oracle_square(m):
    return sum(
        (math.sqrt(1 + a * a + b * b) + 1) ** 2
        for a in range(1, m + 1)
        for b in range(1, m + 1)
    )


@pytest.mark.parametrize("m", [1, 2, 5, 8, 16, 32])
def test_galerkin_constant_partial_sums(m):
    exact, _ = galerkin_constant(make_basis(LINE, m, 4.0))
    assert exact == pytest.approx(galerkin_oracle_line(m), rel=1e-8)
    exact2, _ = galerkin_constant(make_basis(SQUARE, m, 2.0))
    assert exact2 == pytest.approx(galerkin_oracle_square(m), rel=1e-8)


def test_galerkin_constant_quartic_growth_in_2d():
    c16 = galerkin_constant(make_basis(SQUARE, 16, 2.0))[0]
    c32 = galerkin_constant(make_basis(SQUARE, 32, 2.0))[0]
    assert 14 < c32 / c16 < 17
