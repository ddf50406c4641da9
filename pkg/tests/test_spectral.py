"""Tests for the pseudo-spectral core.

Oracles used here are independent of the FFT code path: literal DFT sums,
closed-form single-mode arithmetic, the periodized Gaussian heat kernel, and
golden-section maximization for the multiplier constants.
"""

import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from fracflow.errors import ConfigurationError, NumericError, ResolutionError
from fracflow import spectral as sp


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(grid.shape)


# ---------------------------------------------------------------- grids

def test_grid_validation():
    with pytest.raises(ConfigurationError):
        sp.Grid(3, 64, 1.0)
    with pytest.raises(ConfigurationError):
        sp.Grid(1, 6, 1.0)
    with pytest.raises(ConfigurationError):
        sp.Grid(1, 63, 1.0)
    with pytest.raises(ConfigurationError):
        sp.Grid(1, 64, 0.0)
    with pytest.raises(ConfigurationError):
        sp.Grid(1, 64, math.inf)


def test_dual_grid_symmetric_except_nyquist():
    g = sp.Grid(1, 16, 4.0)
    k = g.axis_wavenumbers
    # every mode except Nyquist has its negative present
    for j, kj in enumerate(k):
        if j == g.n // 2:
            continue
        assert np.any(np.isclose(k, -kj))
    # Nyquist is zeroed in derivative components
    assert g.deriv_components[0].ravel()[g.n // 2] == 0.0
    assert g.k_components[0].ravel()[g.n // 2] != 0.0


# ----------------------------------------------------- transforms

@pytest.mark.parametrize("d,n", [(1, 16), (2, 8)])
def test_forward_matches_literal_dft(d, n):
    g = sp.Grid(d, n, 2.5)
    u = random_field(g, seed=1)
    uh = sp.forward_transform(g, u)
    x = g.axis_points()
    k = g.axis_wavenumbers
    if d == 1:
        direct = np.array([np.sum(u * np.exp(-1j * kj * x)) * g.dx for kj in k])
    else:
        direct = np.zeros((n, n), dtype=complex)
        for a, ka in enumerate(k):
            for b, kb in enumerate(k):
                phase = np.exp(-1j * (ka * x[:, None] + kb * x[None, :]))
                direct[a, b] = np.sum(u * phase) * g.dx**2
    npt.assert_allclose(uh, direct, atol=1e-12 * np.max(np.abs(direct)))


@pytest.mark.parametrize("d,n", [(1, 64), (2, 16)])
def test_roundtrip_and_parseval(d, n):
    g = sp.Grid(d, n, 7.0)
    u = random_field(g, seed=2)
    uh = sp.forward_transform(g, u)
    back = sp.inverse_transform(g, uh)
    npt.assert_allclose(back.real, u, atol=1e-13)
    assert np.max(np.abs(back.imag)) < 1e-13
    lhs = np.sum(u**2) * g.cell_volume
    rhs = np.sum(np.abs(uh) ** 2) / g.len**g.d
    npt.assert_allclose(lhs, rhs, rtol=1e-12)


def test_apply_multiplier_linearity():
    g = sp.Grid(1, 64, 4.0)
    op = sp.semigroup_multiplier(g, 0.75, 0.4)
    u, v = random_field(g, 3), random_field(g, 4)
    a, b = 1.7, -0.3
    combo = sp.apply_multiplier(sp.FieldRealization(g, a * u + b * v), op).values
    parts = (a * sp.apply_multiplier(sp.FieldRealization(g, u), op).values
             + b * sp.apply_multiplier(sp.FieldRealization(g, v), op).values)
    npt.assert_allclose(combo, parts, atol=1e-12 * np.max(np.abs(parts)))


def test_multiplier_must_be_hermitian():
    g = sp.Grid(1, 16, 1.0)
    vals = np.zeros(16, dtype=complex)
    vals[1] = 1.0  # no conjugate partner at -k
    with pytest.raises(ConfigurationError):
        sp.MultiplierOp(g, vals)
    # odd multiplier with nonzero Nyquist entry is equally bad
    k = g.k_components[0].copy()
    with pytest.raises(ConfigurationError):
        sp.MultiplierOp(g, 1j * k)
    # zeroing the Nyquist entry repairs it
    sp.MultiplierOp(g, 1j * g.deriv_components[0])


def test_imag_residue_guard():
    vals = np.ones(8) + 1j * 1e-3
    with pytest.raises(NumericError):
        sp.to_real(vals)
    npt.assert_allclose(sp.to_real(np.ones(8) + 1j * 1e-14), np.ones(8))


def test_field_realization_validation():
    g = sp.Grid(1, 16, 1.0)
    with pytest.raises(ConfigurationError):
        sp.FieldRealization(g, np.zeros(8))
    bad = np.zeros(16)
    bad[3] = np.nan
    with pytest.raises(NumericError):
        sp.FieldRealization(g, bad)


# ----------------------------------------------------- operators

def test_derivative_single_mode():
    # contract example: op = i*k applied to cos(2 pi x / len) is -k sin(k x)
    g = sp.Grid(1, 64, 5.0)
    x = g.axis_points()
    k1 = 2 * np.pi / g.len
    f = sp.FieldRealization(g, np.cos(k1 * x))
    out = sp.apply_multiplier(f, sp.directional_derivative_multiplier(g, 1.0))
    assert np.max(np.abs(out.values - (-k1 * np.sin(k1 * x)))) < 1e-10
    # reversed direction flips the sign
    out2 = sp.apply_multiplier(f, sp.directional_derivative_multiplier(g, -1.0))
    npt.assert_allclose(out2.values, -out.values, atol=1e-13)


@pytest.mark.parametrize("s", [0.6, 0.75, 1.0])
def test_fractional_laplacian_single_modes(s):
    g = sp.Grid(1, 64, 8.0)
    x = g.axis_points()
    for j in (1, 3, 7):
        k = 2 * np.pi * j / g.len
        f = sp.FieldRealization(g, np.sin(k * x))
        out = sp.fractional_laplacian(f, s)
        npt.assert_allclose(out.values, k ** (2 * s) * np.sin(k * x), atol=1e-11 * k**2)


def test_fractional_laplacian_s1_is_minus_laplace():
    g = sp.Grid(1, 64, 8.0)
    x = g.axis_points()
    k = 2 * np.pi * 3 / g.len
    out = sp.fractional_laplacian(sp.FieldRealization(g, np.cos(k * x)), 1.0)
    npt.assert_allclose(out.values, k**2 * np.cos(k * x), atol=1e-10)


def test_fractional_laplacian_kills_constants():
    g = sp.Grid(2, 16, 3.0)
    out = sp.fractional_laplacian(sp.FieldRealization(g, np.full(g.shape, 4.2)), 0.8)
    assert np.max(np.abs(out.values)) < 1e-13


def test_invalid_s_rejected():
    g = sp.Grid(1, 16, 1.0)
    f = sp.FieldRealization(g, np.zeros(16))
    for s in (0.0, -0.3, 1.2):
        with pytest.raises(ConfigurationError):
            sp.fractional_laplacian(f, s)


# ----------------------------------------------------- semigroup

def test_semigroup_single_mode_decay():
    g = sp.Grid(1, 64, 8.0)
    x = g.axis_points()
    k = 2 * np.pi * 2 / g.len
    for s, t in [(0.6, 0.5), (1.0, 1.3)]:
        out = sp.semigroup_apply(sp.FieldRealization(g, np.cos(k * x)), s, t)
        npt.assert_allclose(out.values, math.exp(-t * k ** (2 * s)) * np.cos(k * x),
                            atol=1e-13)


def test_semigroup_law_and_identity():
    g = sp.Grid(1, 128, 10.0)
    u = random_field(g, 5)
    f = sp.FieldRealization(g, u)
    s = 0.75
    for t1, t2 in [(0.1, 0.2), (0.5, 1.5), (1e-3, 2.0)]:
        two = sp.semigroup_apply(sp.semigroup_apply(f, s, t1), s, t2)
        one = sp.semigroup_apply(f, s, t1 + t2)
        assert np.max(np.abs(two.values - one.values)) <= 1e-12 * np.max(np.abs(u))
    ident = sp.semigroup_apply(f, s, 0.0)
    npt.assert_allclose(ident.values, u, atol=1e-13)
    with pytest.raises(ConfigurationError):
        sp.semigroup_apply(f, s, -0.1)


def test_semigroup_l2_contraction_exact():
    g = sp.Grid(1, 128, 10.0)
    f = sp.FieldRealization(g, random_field(g, 6))
    norms = [sp.l2_norm(g, sp.semigroup_apply(f, 0.6, t).values)
             for t in np.linspace(0.0, 2.0, 20)]
    diffs = np.diff(norms)
    assert np.all(diffs <= 0.0)  # exact, no tolerance


def test_semigroup_mean_preserved():
    g = sp.Grid(1, 64, 4.0)
    u = random_field(g, 7) + 2.5
    out = sp.semigroup_apply(sp.FieldRealization(g, u), 0.9, 1.7)
    assert abs(out.spatial_mean() - np.mean(u)) < 1e-12 * (1 + abs(np.mean(u)))


def test_semigroup_strong_continuity():
    # ||P_t u - u||_2 -> 0 as t -> 0+, monotonically in t
    g = sp.Grid(1, 128, 10.0)
    u = random_field(g, 8)
    f = sp.FieldRealization(g, u)
    errs = [sp.l2_norm(g, sp.semigroup_apply(f, 0.75, t).values - u)
            for t in [0.1, 0.01, 0.001, 1e-4]]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.05 * sp.l2_norm(g, u)


# ----------------------------------------------------- gradient semigroup

def test_grad_semigroup_bound_log_spaced():
    g = sp.Grid(1, 512, 64.0)
    u = random_field(g, 9)
    f = sp.FieldRealization(g, u)
    base = sp.l2_norm(g, u)
    for s in (0.6, 0.75, 1.0):
        cs = sp.gradient_constant(s)
        for t in np.geomspace(1e-3, 10.0, 25):
            out = sp.grad_semigroup_apply(f, s, t, 1.0)
            amp = sp.l2_norm(g, out.values) / base
            assert amp <= cs * t ** (-1.0 / (2 * s))


def test_grad_semigroup_operator_norm_matches_symbol():
    g = sp.Grid(1, 64, 8.0)
    s, t = 0.75, 0.37
    op = sp.grad_semigroup_multiplier(g, s, t, 1.0)
    k = np.abs(g.deriv_components[0].ravel())
    expected = np.max(k * np.exp(-t * g.k_abs ** (2 * s)))
    npt.assert_allclose(op.operator_norm(), expected, rtol=1e-12)
    assert op.operator_norm() <= sp.gradient_constant(s) * t ** (-1 / (2 * s))


def test_grad_semigroup_requires_positive_time():
    g = sp.Grid(1, 16, 1.0)
    f = sp.FieldRealization(g, np.zeros(16))
    with pytest.raises(ConfigurationError):
        sp.grad_semigroup_apply(f, 0.75, 0.0, 1.0)


def test_grad_semigroup_zero_mean_output():
    g = sp.Grid(1, 64, 4.0)
    f = sp.FieldRealization(g, random_field(g, 10) + 3.0)
    out = sp.grad_semigroup_apply(f, 0.75, 0.5, 1.0)
    assert abs(out.spatial_mean()) < 1e-12


def test_direction_validation():
    g = sp.Grid(2, 16, 1.0)
    with pytest.raises(ConfigurationError):
        sp.normalize_direction(g, (0.0, 0.0))
    with pytest.raises(ConfigurationError):
        sp.normalize_direction(g, (1.0,))
    z = sp.normalize_direction(g, (3.0, 4.0))
    npt.assert_allclose(z, [0.6, 0.8])


# ----------------------------------------------------- kernel

def test_kernel_mass_positivity_symmetry():
    for d in (1, 2):
        g = sp.Grid(d, 64 if d == 1 else 32, 20.0)
        ker = sp.kernel_values(g, 0.75, 1.0)
        mass = np.sum(ker.values) * g.cell_volume
        assert abs(mass - 1.0) <= 1e-8
        assert np.min(ker.values) >= 0.0
        # reflection symmetry on the grid
        flipped = sp._reverse_modes(ker.values, d)
        npt.assert_allclose(ker.values, flipped, atol=1e-12 * np.max(ker.values))
        if d == 2:
            npt.assert_allclose(ker.values, ker.values.T,
                                atol=1e-12 * np.max(ker.values))


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_kernel_scaling_identity(t):
    # p_t(x) = t^{-d/2s} p_1(t^{-1/2s} x) checked on matched grids
    s = 0.75
    g = sp.Grid(1, 128, 24.0)
    ker_t = sp.kernel_values(g, s, t)
    lam = t ** (-1.0 / (2 * s))
    g1 = sp.Grid(1, 128, 24.0 * lam)
    ker_1 = sp.kernel_values(g1, s, 1.0)
    rel = np.max(np.abs(ker_t.values - lam * ker_1.values)) / np.max(ker_t.values)
    assert rel <= 1e-6


@pytest.mark.parametrize("t", [0.25, 1.0])
def test_kernel_matches_gaussian_at_s1(t):
    # len >= 20 sqrt(t) so periodization images are below 1e-8
    g = sp.Grid(1, 256, 20.0 * math.sqrt(t))
    ker = sp.kernel_values(g, 1.0, t)
    x = g.axis_points()
    xc = np.where(x > g.len / 2, x - g.len, x)
    gauss = np.zeros_like(xc)
    for j in range(-4, 5):
        y = xc + j * g.len
        gauss += np.exp(-y**2 / (4 * t)) / math.sqrt(4 * math.pi * t)
    assert np.max(np.abs(ker.values - gauss)) <= 1e-8


def test_kernel_resolution_error():
    g = sp.Grid(1, 64, 8.0)
    with pytest.raises(ResolutionError):
        sp.kernel_values(g, 1.0, 1e-5)
    with pytest.raises(ConfigurationError):
        sp.kernel_values(g, 1.0, 0.0)


# ----------------------------------------------------- constants

def golden_max(fn, hi=60.0):
    res = minimize_scalar(lambda r: -fn(r), bounds=(0.0, hi), method="bounded",
                          options={"xatol": 1e-13})
    # compare against the boundary r = 0 as well (alpha = 0 peaks there)
    return max(-res.fun, fn(0.0))


def test_smoothing_constant_frozen_values():
    # sup_r e^{-r^{2s}} = 1 at alpha = 0
    assert sp.smoothing_constant(1.0, 0.0) == 1.0
    assert sp.smoothing_constant(0.6, 0.0) == 1.0
    # alpha = s: sup r^{2s} e^{-r^{2s}} = 1/e, c = e^{-1/2} 2^{-1/2}
    npt.assert_allclose(sp.smoothing_constant(1.0, 1.0), 0.42888194248035344,
                        rtol=1e-12)
    npt.assert_allclose(sp.smoothing_constant(0.75, 0.75),
                        math.exp(-0.5) * 2**-0.5, rtol=1e-12)


def test_smoothing_constant_golden_section_oracle():
    for s in (0.55, 0.6, 0.75, 0.9, 1.0):
        for alpha in (0.1, 0.3, s / 2, s):
            sup = golden_max(lambda r: r ** (2 * alpha) * math.exp(-(r ** (2 * s))))
            oracle = 2 ** (-alpha / (2 * s)) * math.sqrt(sup)
            npt.assert_allclose(sp.smoothing_constant(s, alpha), oracle, rtol=1e-9)


def test_gradient_constant_values():
    npt.assert_allclose(sp.gradient_constant(1.0), (2 * math.e) ** -0.5, rtol=1e-12)
    for s in (0.6, 0.75, 1.0):
        sup = golden_max(lambda r: r * math.exp(-(r ** (2 * s))))
        npt.assert_allclose(sp.gradient_constant(s), sup, rtol=1e-9)


def test_constant_validation():
    with pytest.raises(ConfigurationError):
        sp.smoothing_constant(1.2, 0.5)
    with pytest.raises(ConfigurationError):
        sp.smoothing_constant(0.75, -0.1)
    with pytest.raises(ConfigurationError):
        sp.gradient_constant(0.0)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(0.51, 1.0), alpha=st.floats(0.0, 1.0))
def test_smoothing_constant_matches_oracle_property(s, alpha):
    sup = golden_max(lambda r: r ** (2 * alpha) * math.exp(-(r ** (2 * s))))
    oracle = 2 ** (-alpha / (2 * s)) * math.sqrt(sup)
    npt.assert_allclose(sp.smoothing_constant(s, alpha), oracle, rtol=1e-7)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.sampled_from([1, 2]))
def test_roundtrip_property(seed, d):
    g = sp.Grid(d, 16, 3.0)
    u = np.random.default_rng(seed).standard_normal(g.shape)
    back = sp.inverse_transform(g, sp.forward_transform(g, u))
    npt.assert_allclose(back.real, u, atol=1e-12)
