import math

import numpy as np
import pytest

from conftest import random_state
from lrwalk.operators import CoinParams, Op, WalkModel, evolve
from lrwalk.spectral import (KGrid, apply_U0_hat, apply_V0, apply_X, band_decompose, band_vector,
                             commutator_identity_check, fourier, grid_inner, inverse_fourier,
                             required_grid, spectral_derivative, spectrum_arcs, velocity_distribution,
                             velocity_fd_gap)
from lrwalk.state import NormalizationError, make_delta_state, make_gaussian_state

DIAG = CoinParams(1.0, 0.0, 0.0, 0.0, 0.0)
COINS = [CoinParams.hadamard(), CoinParams.from_a(0.9, delta=0.0), CoinParams(0.6, 0.8, 0.3, -1.1, 2.0),
         CoinParams(1.0, 0.0, 0.4, 0.0, 0.7), DIAG]


def trig_poly(rng, grid, degree):
    k = grid.nodes
    f = np.zeros((grid.n, 2), dtype=complex)
    for m in range(-degree, degree + 1):
        f += np.exp(1j * m * k)[:, None] * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    return f


# fourier

def test_fourier_of_origin_delta_is_constant():
    g = KGrid(64)
    f = fourier(make_delta_state(0, (1, 0)), g)
    assert np.allclose(f, [[1, 0]] * 64, atol=1e-15)


def test_fourier_of_shifted_delta_is_phase():
    g = KGrid(64)
    f = fourier(make_delta_state(1, (1, 0)), g)
    assert np.max(np.abs(f[:, 0] - np.exp(-1j * g.nodes))) < 1e-14
    assert np.max(np.abs(f[:, 1])) == 0


def test_fourier_matches_direct_summation_and_parseval(rng):
    psi = random_state(rng, 100)
    g = KGrid(256)
    f = fourier(psi, g)
    k = g.nodes
    direct = np.exp(-1j * np.outer(k, psi.positions)) @ psi.amplitudes
    assert np.max(np.abs(f - direct)) < 1e-12
    parseval = np.sum(np.abs(f) ** 2) / g.n
    assert abs(parseval - psi.norm_squared()) / psi.norm_squared() <= 1e-12


def test_fourier_grid_too_small_names_required_size(rng):
    psi = random_state(rng, 100)
    with pytest.raises(ValueError, match="n >= 256"):
        fourier(psi, KGrid(128))


def test_inverse_fourier_recovers_state(rng):
    psi = random_state(rng, 40, offset=-17)
    g = KGrid(128)
    back = inverse_fourier(fourier(psi, g), g, psi.offset, psi.width)
    assert np.max(np.abs(back.amplitudes - psi.amplitudes)) < 1e-14


def test_grid_validation():
    for n in (32, 100):
        with pytest.raises(ValueError):
            KGrid(n)
    assert required_grid(100).n == 256
    assert required_grid(10).n == 64


def test_symbol_matches_one_step_of_free_walk(rng):
    coin = CoinParams(0.6, 0.8, 0.3, -1.1, 2.0)
    psi = random_state(rng, 30)
    g = KGrid(128)
    after = evolve(WalkModel(coin), psi, 1, Op.U0)
    assert np.max(np.abs(fourier(after, g) - apply_U0_hat(coin, g, fourier(psi, g)))) < 1e-13
    back = apply_U0_hat(coin, g, apply_U0_hat(coin, g, fourier(psi, g)), inverse=True)
    assert np.max(np.abs(back - fourier(psi, g))) < 1e-13


# bands

def test_diagonal_coin_bands():
    bd = band_decompose(DIAG, KGrid(256))
    k = bd.grid.nodes
    assert np.max(np.abs(bd.lam[:, 0] - np.exp(1j * k))) < 1e-15
    assert np.max(np.abs(bd.lam[:, 1] - np.exp(-1j * k))) < 1e-15
    # band 1 is spin 1, which the shift carries left
    assert np.all(bd.velocity[:, 0] == -1.0)
    assert np.all(bd.velocity[:, 1] == 1.0)


def test_hadamard_eigenvalues_at_zero_momentum():
    bd = band_decompose(CoinParams.hadamard(), KGrid(64))
    assert sorted(np.round(bd.lam[0].real, 14).tolist()) == [-1.0, 1.0]
    assert np.max(np.abs(bd.lam[0].imag)) < 1e-15


def test_hadamard_max_velocity():
    bd = band_decompose(CoinParams.hadamard(), KGrid(1 << 16))
    assert abs(np.max(np.abs(bd.velocity)) - 1 / math.sqrt(2)) <= 1e-6


@pytest.mark.parametrize("coin", COINS[:4])
def test_band_invariants(coin, rng):
    bd = band_decompose(coin, KGrid(512))
    sym = bd.symbol()
    assert np.max(np.abs(np.abs(bd.lam) - 1)) < 1e-14
    for j in range(2):
        u = bd.vecs[:, j]
        res = np.einsum("mab,mb->ma", sym, u) - bd.lam[:, j, None] * u
        assert np.max(np.abs(res)) < 1e-13
        assert np.max(np.abs(np.sum(np.abs(u) ** 2, axis=1) - 1)) < 1e-14
    overlap = np.einsum("mc,mc->m", bd.vecs[:, 0].conj(), bd.vecs[:, 1])
    assert np.max(np.abs(overlap)) < 1e-14
    assert np.max(np.abs(bd.velocity)) <= coin.a + 1e-12
    # analytic eigenvector derivatives agree with spectral ones
    assert np.max(np.abs(spectral_derivative(bd.vecs) - bd.dvecs)) < 1e-9
    # completeness
    f = rng.standard_normal((512, 2)) + 1j * rng.standard_normal((512, 2))
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    c = bd.components(f)
    assert np.max(np.abs(np.sum(np.abs(c) ** 2, axis=1) - 1)) < 1e-12
    assert np.max(np.abs(bd.synthesize(c) - f)) < 1e-13


@pytest.mark.parametrize("coin", COINS[:3])
def test_eigenvalues_match_direct_solve(coin):
    bd = band_decompose(coin, KGrid(4096))
    direct = np.linalg.eigvals(bd.symbol())
    gap = np.max(np.min(np.abs(direct[:, :, None] - bd.lam[:, None, :]), axis=1))
    assert gap <= 1e-10


@pytest.mark.parametrize("coin", COINS)
def test_velocity_matches_finite_differences(coin):
    assert velocity_fd_gap(band_decompose(coin, KGrid(4096))) <= 1e-6


def test_velocity_sign_matches_dynamics():
    """The mean of X_T / T approaches the spectral mean velocity."""
    coin = CoinParams.hadamard()
    psi = make_delta_state(0, (1, 0))
    T = 400
    out = evolve(WalkModel(coin), psi, T)
    mean = float(np.sum(out.probabilities() * out.positions)) / T
    bd = band_decompose(coin, KGrid(4096))
    F = velocity_distribution(bd, psi)
    spectral = float(np.sum(F.values * F.weights))
    assert abs(spectral) > 0.2
    assert abs(mean - spectral) < 5e-3


def test_zero_a_rejected():
    with pytest.raises(ValueError):
        band_decompose(CoinParams(0.0, 1.0, 0.0, 0.0, 0.0), KGrid(64))


@pytest.mark.parametrize("coin", COINS)
@pytest.mark.parametrize("band", (1, 2))
def test_band_vector_is_eigenvector(coin, band):
    k = 0.731
    u = band_vector(coin, k, band)
    sym = np.diag([np.exp(1j * k), np.exp(-1j * k)]) @ coin.matrix()
    lam = np.vdot(u, sym @ u)
    assert abs(np.linalg.norm(u) - 1) < 1e-15
    assert np.max(np.abs(sym @ u - lam * u)) < 1e-14


def test_band_vector_matches_decomposition():
    coin = CoinParams.hadamard()
    bd = band_decompose(coin, KGrid(64))
    for m in (0, 5, 33):
        for j in (1, 2):
            assert np.max(np.abs(band_vector(coin, bd.grid.nodes[m], j) - bd.vecs[m, j - 1])) < 1e-14
    with pytest.raises(ValueError):
        band_vector(coin, 0.0, 3)


# arcs

def test_hadamard_arcs_and_thresholds():
    arcs = spectrum_arcs(CoinParams.hadamard())
    want = [(3 * math.pi / 4, 5 * math.pi / 4), (7 * math.pi / 4, 9 * math.pi / 4)]
    for (s, e), (ws, we) in zip(arcs.arcs, want):
        assert abs(s - ws) <= 1e-12 and abs(e - we) <= 1e-12
    assert sorted(arcs.thresholds) == pytest.approx(sorted([3 * math.pi / 4, 5 * math.pi / 4,
                                                           7 * math.pi / 4, math.pi / 4]), abs=1e-12)


def test_diagonal_arcs_cover_circle():
    arcs = spectrum_arcs(DIAG)
    assert arcs.total_length == pytest.approx(2 * math.pi)
    assert arcs.thresholds == ()


def test_arc_length_shrinks_with_a():
    arcs = spectrum_arcs(CoinParams.from_a(0.99))
    assert arcs.total_length == pytest.approx(2 * math.pi - 4 * math.acos(0.99), abs=1e-12)
    assert spectrum_arcs(CoinParams.from_a(0.999)).total_length > arcs.total_length


@pytest.mark.parametrize("coin", COINS)
def test_arcs_contain_all_eigenvalues(coin):
    bd = band_decompose(coin, KGrid(4096))
    arcs = spectrum_arcs(coin)
    assert np.max(arcs.distance(bd.lam.ravel())) <= 1e-10
    # endpoints are attained to grid resolution
    for t in arcs.thresholds:
        d = np.min(np.abs(np.angle(bd.lam.ravel() * np.exp(-1j * t))))
        assert d < 2 * math.pi / 4096


def test_arc_distance_outside():
    arcs = spectrum_arcs(CoinParams.hadamard())
    assert arcs.distance(np.array([1.0]))[0] == 0.0
    assert arcs.distance(np.array([1j]))[0] == pytest.approx(math.pi / 4)
    assert arcs.distance(np.array([-2j]))[0] == pytest.approx(math.pi / 4 + 1)


# velocity distribution

def test_velocity_distribution_diagonal_is_point_mass():
    F = velocity_distribution(band_decompose(DIAG, KGrid(64)), make_delta_state(0, (1, 0)))
    assert F.values[0] == -1.0 and F.weights[0] == pytest.approx(1.0, abs=1e-15)
    assert F.total - F.weights[0] == 0.0


def test_velocity_distribution_hadamard_support():
    F = velocity_distribution(band_decompose(CoinParams.hadamard(), KGrid(4096)), make_delta_state(0, (1, 0)))
    r = 1 / math.sqrt(2)
    assert F(-r - 0.01) <= 1e-8
    assert F(r + 0.01) >= 1 - 1e-8
    assert F(-1.0 - 1e-12) == 0.0
    assert abs(F.total - 1) <= 1e-8
    assert np.all(np.diff(F.cumulative) >= 0)


def test_velocity_distribution_equal_band_split():
    coin = CoinParams.hadamard()
    g = KGrid(128)
    bd = band_decompose(coin, g)
    psi = make_delta_state(0, band_vector(coin, 0.0, 1) + band_vector(coin, 0.0, 2))
    psi = psi * (1 / math.sqrt(psi.norm_squared()))
    F = velocity_distribution(bd, psi)
    assert abs(F.total - 1) < 1e-12
    low, high = F(0.0), F.total - F(0.0)
    assert low > 0 and high > 0


def test_velocity_distribution_global_phase_invariant(rng):
    bd = band_decompose(CoinParams(0.6, 0.8, 0.3, -1.1, 2.0), KGrid(256))
    psi = random_state(rng, 30)
    F, G = velocity_distribution(bd, psi), velocity_distribution(bd, psi * np.exp(0.77j))
    assert np.array_equal(F.values, G.values)
    assert np.max(np.abs(F.weights - G.weights)) < 1e-15


def test_velocity_distribution_requires_normalized_state():
    bd = band_decompose(CoinParams.hadamard(), KGrid(64))
    with pytest.raises(NormalizationError):
        velocity_distribution(bd, make_delta_state(0, (2, 0)))


def test_velocity_distribution_refines_with_grid():
    psi = make_gaussian_state(0, 4, (1, 1j))
    coin = CoinParams.hadamard()
    v = np.linspace(-0.7, 0.7, 15)
    coarse = velocity_distribution(band_decompose(coin, KGrid(256)), psi)(v)
    mid = velocity_distribution(band_decompose(coin, KGrid(1024)), psi)(v)
    fine = velocity_distribution(band_decompose(coin, KGrid(8192)), psi)(v)
    assert np.max(np.abs(mid - fine)) < np.max(np.abs(coarse - fine))


# V0 and X

def test_V0_diagonal_is_sign_multiplier(rng):
    g = KGrid(64)
    bd = band_decompose(DIAG, g)
    f = rng.standard_normal((64, 2)) + 0j
    out = apply_V0(bd, f)
    assert np.array_equal(out[:, 0], -f[:, 0]) and np.array_equal(out[:, 1], f[:, 1])


def test_V0_eigen_action():
    bd = band_decompose(CoinParams.hadamard(), KGrid(64))
    f = np.zeros((64, 2), dtype=complex)
    f[9] = bd.vecs[9, 0]
    out = apply_V0(bd, f)
    assert np.max(np.abs(out[9] - bd.velocity[9, 0] * f[9])) < 1e-15
    assert np.max(np.abs(np.delete(out, 9, axis=0))) == 0


@pytest.mark.parametrize("coin", COINS[:3])
def test_V0_bounded_and_self_adjoint(coin, rng):
    g = KGrid(128)
    bd = band_decompose(coin, g)
    for _ in range(100):
        f = rng.standard_normal((128, 2)) + 1j * rng.standard_normal((128, 2))
        h = rng.standard_normal((128, 2)) + 1j * rng.standard_normal((128, 2))
        vf = apply_V0(bd, f)
        assert np.sqrt(grid_inner(vf, vf).real) <= coin.a * np.sqrt(grid_inner(f, f).real) * (1 + 1e-12)
        assert abs(grid_inner(h, vf) - grid_inner(apply_V0(bd, h), f)) <= 1e-10


def test_X_diagonal_on_plane_wave():
    g = KGrid(64)
    bd = band_decompose(DIAG, g)
    f = np.zeros((64, 2), dtype=complex)
    f[:, 0] = np.exp(1j * g.nodes)
    assert np.max(np.abs(apply_X(bd, f) + f)) < 1e-13


def test_X_on_constant_uses_eigenvector_derivatives():
    bd = band_decompose(CoinParams.hadamard(), KGrid(128))
    f = np.tile(np.array([0.3 + 0.1j, -0.5]), (128, 1))
    want = 1j * np.einsum("mjc,mj->mc", bd.vecs, np.einsum("mjc,mc->mj", bd.dvecs.conj(), f))
    assert np.max(np.abs(apply_X(bd, f) - want)) < 1e-12


@pytest.mark.parametrize("coin", COINS[:4])
def test_X_symmetric_on_trig_polynomials(coin, rng):
    g = KGrid(256)
    bd = band_decompose(coin, g)
    for _ in range(5):
        f, h = trig_poly(rng, g, 8), trig_poly(rng, g, 8)
        assert abs(grid_inner(f, apply_X(bd, h)) - grid_inner(apply_X(bd, f), h)) <= 1e-8


def test_X_rejects_aliased_input(rng):
    g = KGrid(64)
    bd = band_decompose(CoinParams.hadamard(), g)
    with pytest.raises(ValueError, match="resolved"):
        apply_X(bd, rng.standard_normal((64, 2)) + 0j)


def test_spectral_derivative_exact_on_trig_polynomials():
    g = KGrid(128)
    k = g.nodes
    f = np.stack([np.exp(3j * k) + 2 * np.cos(5 * k), np.sin(k)], axis=1)
    df = np.stack([3j * np.exp(3j * k) - 10 * np.sin(5 * k), np.cos(k)], axis=1)
    assert np.max(np.abs(spectral_derivative(f) - df)) < 1e-12


# commutator identity

def test_commutator_identity_diagonal_exact():
    rep = commutator_identity_check(band_decompose(DIAG, KGrid(1024)), 16)
    assert rep.max_residual <= 1e-10 and rep.passed


@pytest.mark.slow
def test_commutator_identity_hadamard():
    r1 = commutator_identity_check(band_decompose(CoinParams.hadamard(), KGrid(1024)), 16).max_residual
    r2 = commutator_identity_check(band_decompose(CoinParams.hadamard(), KGrid(2048)), 16).max_residual
    assert r1 <= 1e-6
    assert r2 <= r1 or r2 <= 1e-6


def test_commutator_identity_generic_coin_small():
    rep = commutator_identity_check(band_decompose(CoinParams(0.6, 0.8, 0.3, -1.1, 2.0), KGrid(256)), 4)
    assert rep.residuals.shape == (18,)
    assert rep.max_residual <= 1e-6


def test_commutator_degree_limit():
    with pytest.raises(ValueError, match="n/8"):
        commutator_identity_check(band_decompose(CoinParams.hadamard(), KGrid(64)), 9)


def test_band_rows_layout():
    rows = band_decompose(CoinParams.hadamard(), KGrid(64)).to_rows()
    assert len(rows) == 64 and len(rows[0]) == 7
    assert rows[0][0] == 0.0
