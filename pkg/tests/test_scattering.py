import numpy as np
import pytest

from conftest import all_models, random_state
from lrwalk.distributions import kolmogorov_distance
from lrwalk.operators import CoinParams, Op, PhaseProfile, WalkModel, apply_modifier, step
from lrwalk.scattering import (Direction, apply_waveop, apply_waveop_adjoint, convergence_study, duality_defect,
                               intertwining_check)
from lrwalk.spectral import KGrid, band_decompose, velocity_distribution
from lrwalk.state import inner, make_gaussian_state, norm

MODELS = all_models()
PERTURBED = [m for m in MODELS if not m.homogeneous]
DIRECTIONS = (Direction.PLUS, Direction.MINUS)


def probe():
    return make_gaussian_state(0, 10, (1, 1j))


@pytest.mark.parametrize("direction", DIRECTIONS)
def test_homogeneous_waveop_is_identity(free_model, rng, direction):
    psi = random_state(rng)
    for T in (0, 1, 37):
        assert apply_waveop(free_model, T, psi, direction) is psi
        assert apply_waveop_adjoint(free_model, T, psi, direction) is psi


@pytest.mark.parametrize("model", PERTURBED)
def test_waveop_at_zero_is_modifier(model, rng):
    psi = random_state(rng)
    for d in DIRECTIONS:
        assert norm(apply_waveop(model, 0, psi, d) - apply_modifier(model, psi)) == 0
        assert norm(apply_waveop_adjoint(model, 0, psi, d) - apply_modifier(model, psi, inverse=True)) == 0


def test_negative_time_rejected(log_model, rng):
    with pytest.raises(ValueError):
        apply_waveop(log_model, -1, random_state(rng))
    with pytest.raises(ValueError):
        apply_waveop_adjoint(log_model, -1, random_state(rng))


def test_direction_parsing():
    assert Direction.parse("+") is Direction.PLUS
    assert Direction.parse(Direction.MINUS) is Direction.MINUS
    with pytest.raises(ValueError):
        Direction.parse("up")


@pytest.mark.parametrize("direction", DIRECTIONS)
def test_waveop_isometry_long_time(log_model, rng, direction):
    psi = random_state(rng)
    out = apply_waveop(log_model, 1000, psi, direction)
    assert abs(norm(out) - norm(psi)) <= 1e-12


def test_waveop_matches_explicit_products(power_model, rng):
    psi = random_state(rng, 10)
    T = 7
    phi = psi
    for _ in range(T):
        phi = step(power_model, phi, Op.U0)
    phi = apply_modifier(power_model, phi)
    for _ in range(T):
        phi = step(power_model, phi, Op.U, inverse=True)
    assert norm(apply_waveop(power_model, T, psi) - phi) < 1e-14


@pytest.mark.parametrize("model", PERTURBED)
@pytest.mark.parametrize("direction", DIRECTIONS)
def test_duality_and_inverse(model, direction, rng):
    phi, psi = random_state(rng), random_state(rng)
    T = 40
    assert duality_defect(model, T, phi, psi, direction) <= 1e-12
    back = apply_waveop_adjoint(model, T, apply_waveop(model, T, psi, direction), direction)
    assert norm(back - psi) <= 1e-12


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("direction", DIRECTIONS)
def test_intertwining_exact(model, direction, rng):
    psi = random_state(rng)
    assert intertwining_check(model, 0, psi, direction) <= 1e-14
    assert intertwining_check(model, 10, psi, direction) <= 1e-12


def test_finite_identities_random_trials(rng):
    worst = 0.0
    for _ in range(100):
        model = PERTURBED[int(rng.integers(len(PERTURBED)))]
        T = int(rng.integers(0, 101))
        d = DIRECTIONS[int(rng.integers(2))]
        phi, psi = random_state(rng, 12), random_state(rng, 12)
        worst = max(worst,
                    abs(norm(apply_waveop(model, T, psi, d)) - 1.0),
                    duality_defect(model, T, phi, psi, d),
                    intertwining_check(model, T, psi, d))
    assert worst <= 1e-11


def test_convergence_free_walk_is_identically_zero(free_model):
    tel = convergence_study(free_model, probe())
    assert np.all(tel.increments == 0.0)
    assert np.all(tel.tail_proxy == 0.0)
    assert tel.passed and tel.decreasing


def test_convergence_log_profile(log_model):
    tel = convergence_study(log_model, probe())
    assert tel.decreasing
    assert tel.final_increment <= 0.01
    assert tel.isometry_defect <= 1e-12
    assert np.all(np.diff(tel.tail_proxy) < 0)
    assert tel.summary()["pass"] is True
    assert [r[0] for r in tel.rows()] == [100, 200, 400, 800]


def test_convergence_minus_direction(log_model):
    tel = convergence_study(log_model, probe(), direction="-")
    assert tel.direction == "-"
    assert tel.decreasing and tel.final_increment <= 0.01


def test_convergence_checkpoint_validation(log_model):
    with pytest.raises(ValueError):
        convergence_study(log_model, probe(), checkpoints=())
    with pytest.raises(ValueError):
        convergence_study(log_model, probe(), checkpoints=(100, 50))


def test_convergence_tolerance_declared(log_model):
    tel = convergence_study(log_model, probe(), tolerance=1e-6)
    assert tel.decreasing and not tel.passed


@pytest.mark.slow
def test_faster_decay_converges_faster():
    coin = CoinParams.hadamard()
    finals = [convergence_study(WalkModel(coin, prof), probe()).final_increment
              for prof in (PhaseProfile.power(0.25), PhaseProfile.power(0.5), PhaseProfile.log())]
    assert finals[0] > finals[1] > finals[2]


@pytest.mark.slow
def test_velocity_distribution_of_pulled_back_state_stabilizes(log_model):
    psi = probe()
    cps = (100, 200, 400, 800)
    tel = convergence_study(log_model, psi, checkpoints=cps)
    grid = KGrid(8192)
    band = band_decompose(log_model.coin, grid)
    laws = [velocity_distribution(band, apply_waveop_adjoint(log_model, t, psi)) for t in cps]
    dists = [kolmogorov_distance(f, g) for f, g in zip(laws, laws[1:])]
    # |F_phi - F_psi| <= ||phi - psi|| (||phi|| + ||psi||) for spectral CDFs
    adj = [norm(apply_waveop_adjoint(log_model, b, psi) - apply_waveop_adjoint(log_model, a, psi))
           for a, b in zip(cps, cps[1:])]
    for k, d in zip(dists, adj):
        assert k <= 2 * d + 1e-12
    assert dists[-1] <= tel.final_increment


def test_inner_is_preserved(log_model, rng):
    phi, psi = random_state(rng), random_state(rng)
    a = inner(apply_waveop(log_model, 25, phi), apply_waveop(log_model, 25, psi))
    assert abs(a - inner(phi, psi)) <= 1e-13
