"""Momentum-space analysis of the free walk ``U0 = S C0``.

Conventions
-----------
The transform is ``psi_hat(k) = sum_x psi(x) e^{-ikx}`` sampled on the uniform
grid ``k_m = 2 pi m / n``; grid inner products carry the weight ``1/n`` so
that Parseval reads ``(1/n) sum_m |psi_hat(k_m)|^2 = ||psi||^2``.  In this
convention the symbol is ``U0_hat(k) = diag(e^{ik}, e^{-ik}) C0`` and the
position operator acts as ``i d/dk``.  The asymptotic velocity of band ``j``
is therefore ``v_j = i lambda_j' / lambda_j = -d arg(lambda_j) / dk``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import StepCDF
from .operators import CoinParams
from .state import LatticeState, NORM_TOL, NormalizationError

__all__ = [
    "band_vector",
    "KGrid",
    "BandDecomposition",
    "SpectrumArcs",
    "CommutatorReport",
    "fourier",
    "inverse_fourier",
    "band_decompose",
    "spectrum_arcs",
    "velocity_distribution",
    "velocity_fd_gap",
    "apply_U0_hat",
    "apply_V0",
    "apply_X",
    "spectral_derivative",
    "commutator_identity_check",
    "grid_inner",
    "required_grid",
]

COMMUTATOR_TOL = 1e-6
CHOP = 16.0


@dataclass(frozen=True)
class KGrid:
    """Uniform momentum grid of ``n`` nodes on ``[0, 2 pi)``."""

    n: int

    def __post_init__(self):
        n = int(self.n)
        if n < 64 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 64, got {self.n}")

    @property
    def nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n) / self.n

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n


def required_grid(width: int, minimum: int = 64) -> KGrid:
    """Smallest admissible grid with ``n >= 2 * width``."""
    n = max(minimum, 64)
    while n < 2 * width:
        n *= 2
    return KGrid(n)


def fourier(psi: LatticeState, grid: KGrid) -> np.ndarray:
    """Samples of ``psi_hat`` on the grid, shape ``(n, 2)``."""
    n = grid.n
    if n < 2 * psi.width:
        need = required_grid(psi.width).n
        raise ValueError(f"grid too small for support of width {psi.width}: need n >= {need}")
    buf = np.zeros((n, 2), dtype=np.complex128)
    buf[:psi.width] = psi.amplitudes
    phase = np.exp(-1j * grid.nodes * psi.offset)
    return np.fft.fft(buf, axis=0) * phase[:, None]


def inverse_fourier(samples: np.ndarray, grid: KGrid, offset: int, width: int) -> LatticeState:
    """Recover the lattice state on ``[offset, offset + width)`` from grid samples."""
    if width > grid.n:
        raise ValueError("window wider than the grid")
    phase = np.exp(1j * grid.nodes * offset)
    buf = np.fft.ifft(samples * phase[:, None], axis=0)
    return LatticeState(offset, buf[:width])


def grid_inner(f: np.ndarray, g: np.ndarray) -> complex:
    """``(1/n) sum_m <f(k_m), g(k_m)>``."""
    return complex(np.vdot(f, g) / f.shape[0])


def spectral_derivative(f: np.ndarray) -> np.ndarray:
    """``d/dk`` of periodic samples along axis 0, exact on resolved trig polynomials.

    Modes below ``CHOP * eps`` of the largest one are rounding noise and are
    dropped before differentiation.  When few modes survive, the derivative
    is summed directly at the nodes instead of through an inverse FFT, so its
    rounding error does not grow with ``n``.
    """
    n = f.shape[0]
    m = np.fft.fftfreq(n, d=1.0 / n)
    m[n // 2] = 0.0
    c = np.fft.fft(f, axis=0) / n
    mag = np.abs(c)
    c[mag < CHOP * np.finfo(np.float64).eps * np.max(mag, axis=0, keepdims=True)] = 0.0
    dc = 1j * m.reshape((n,) + (1,) * (f.ndim - 1)) * c
    rows = np.flatnonzero(np.any(dc != 0, axis=tuple(range(1, f.ndim))))
    if rows.size > n // 8:
        return np.fft.ifft(dc * n, axis=0)
    k = 2.0 * np.pi * np.arange(n) / n
    out = np.zeros(f.shape, dtype=np.complex128)
    for r in rows:
        out += np.multiply.outer(np.exp(1j * m[r] * k), dc[r])
    return out


@dataclass(frozen=True, eq=False)
class BandDecomposition:
    """Eigen-data of ``U0_hat(k)`` on a grid.

    Arrays are indexed ``[node, band]`` (and ``[node, band, component]`` for
    vectors).  Band 1 (index 0) is the ``+i eta`` branch.
    """

    grid: KGrid
    coin: CoinParams
    lam: np.ndarray
    vecs: np.ndarray
    dvecs: np.ndarray
    velocity: np.ndarray

    def components(self, f: np.ndarray) -> np.ndarray:
        """Band coordinates ``<u_j(k), f(k)>``, shape ``(n, 2)``."""
        return np.einsum("mjc,mc->mj", self.vecs.conj(), f)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """``sum_j coeffs_j(k) u_j(k)``."""
        return np.einsum("mj,mjc->mc", coeffs, self.vecs)

    def symbol(self) -> np.ndarray:
        """``U0_hat(k_m)`` as an ``(n, 2, 2)`` array."""
        k = self.grid.nodes
        d = np.stack([np.exp(1j * k), np.exp(-1j * k)], axis=1)
        return d[:, :, None] * self.coin.matrix()[None, :, :]

    def to_rows(self):
        k = self.grid.nodes
        return [(float(k[m]), self.lam[m, 0].real, self.lam[m, 0].imag, float(self.velocity[m, 0]),
                 self.lam[m, 1].real, self.lam[m, 1].imag, float(self.velocity[m, 1]))
                for m in range(self.grid.n)]


def _eigvals_closed(coin: CoinParams, k: np.ndarray) -> np.ndarray:
    a, al, de = coin.a, coin.alpha, coin.delta
    if coin.b == 0.0:
        return np.stack([np.exp(1j * (k + al)), np.exp(-1j * (k + al - de))], axis=-1)
    tau = a * np.cos(k + al - de / 2)
    eta = np.sqrt(1.0 - tau ** 2)
    rot = np.exp(1j * de / 2)
    return np.stack([rot * (tau + 1j * eta), rot * (tau - 1j * eta)], axis=-1)


def band_decompose(coin: CoinParams, grid: KGrid) -> BandDecomposition:
    """Closed-form bands, eigenvectors, their k-derivatives and group velocities.

    For ``b > 0`` the eigenvector of ``lambda`` is proportional to
    ``(b, e^{-i(k+beta)} lambda - a e^{i(alpha-beta)})``, which is smooth and
    periodic in ``k`` with a real positive first component.  For ``a = 1``
    the symbol is diagonal and the bands are the coordinate axes.
    """
    if not coin.a > 0.0:
        raise ValueError("a = 0 (off-diagonal coin) has flat bands and is excluded")
    k = grid.nodes
    n = grid.n
    a, b, al, be, de = coin.a, coin.b, coin.alpha, coin.beta, coin.delta
    lam = _eigvals_closed(coin, k)
    vecs = np.zeros((n, 2, 2), dtype=np.complex128)
    dvecs = np.zeros((n, 2, 2), dtype=np.complex128)
    if b == 0.0:
        vecs[:, 0, 0] = 1.0
        vecs[:, 1, 1] = 1.0
        vel = np.stack([-np.ones(n), np.ones(n)], axis=1)
    else:
        phi = k + al - de / 2
        tau = a * np.cos(phi)
        eta = np.sqrt(1.0 - tau ** 2)
        assert np.all(eta >= b - 1e-12), "bands touch; impossible for 0 < a < 1"
        dtau = -a * np.sin(phi)
        deta = -tau * dtau / eta
        rot = np.exp(1j * de / 2)
        vel = np.empty((n, 2))
        for j, s in enumerate((1.0, -1.0)):
            lj = lam[:, j]
            dlj = rot * (dtau + 1j * s * deta)
            w = np.exp(-1j * (k + be)) * lj - a * np.exp(1j * (al - be))
            dw = np.exp(-1j * (k + be)) * (dlj - 1j * lj)
            nrm = np.sqrt(b * b + np.abs(w) ** 2)
            dnrm = np.real(np.conj(w) * dw) / nrm
            vecs[:, j, 0] = b / nrm
            vecs[:, j, 1] = w / nrm
            dvecs[:, j, 0] = -b * dnrm / nrm ** 2
            dvecs[:, j, 1] = dw / nrm - w * dnrm / nrm ** 2
            vel[:, j] = s * dtau / eta
    for arr in (lam, vecs, dvecs, vel):
        arr.flags.writeable = False
    return BandDecomposition(grid, coin, lam, vecs, dvecs, vel)


def band_vector(coin: CoinParams, k: float, band: int) -> np.ndarray:
    """Unit eigenvector ``u_band(k)`` of ``U0_hat(k)`` for a single momentum ``k``."""
    if band not in (1, 2):
        raise ValueError("band must be 1 or 2")
    if coin.b == 0.0:
        return np.eye(2, dtype=np.complex128)[band - 1]
    lam = _eigvals_closed(coin, np.array([float(k)]))[0, band - 1]
    w = np.exp(-1j * (k + coin.beta)) * lam - coin.a * np.exp(1j * (coin.alpha - coin.beta))
    v = np.array([coin.b, w], dtype=np.complex128)
    return v / np.linalg.norm(v)


def velocity_fd_gap(band: BandDecomposition, h: float = 1e-5, eta_guard: float = 1e-6) -> float:
    """Max gap between closed-form velocities and ``-d arg(lambda)/dk`` by central differences."""
    k = band.grid.nodes
    lp = _eigvals_closed(band.coin, k + h)
    lm = _eigvals_closed(band.coin, k - h)
    fd = -np.angle(lp / lm) / (2.0 * h)
    mask = np.ones(k.shape, dtype=bool)
    if band.coin.b > 0.0:
        tau = band.coin.a * np.cos(k + band.coin.alpha - band.coin.delta / 2)
        mask = np.sqrt(1.0 - tau ** 2) >= eta_guard
    return float(np.max(np.abs(fd - band.velocity)[mask]))


@dataclass(frozen=True)
class SpectrumArcs:
    """Closed arcs ``{e^{it} : start <= t <= stop}`` and the threshold angles."""

    arcs: tuple
    thresholds: tuple

    @property
    def total_length(self) -> float:
        return float(sum(stop - start for start, stop in self.arcs))

    def distance(self, z) -> np.ndarray:
        """Distance from points of the unit circle to the union of arcs (angle plus radial defect)."""
        z = np.asarray(z, dtype=np.complex128)
        ang = np.angle(z)
        best = np.full(z.shape, np.inf)
        for start, stop in self.arcs:
            length = stop - start
            if length >= 2 * np.pi:
                best = np.zeros(z.shape)
                continue
            t = np.mod(ang - start, 2 * np.pi)
            d = np.where(t <= length, 0.0, np.minimum(t - length, 2 * np.pi - t))
            best = np.minimum(best, d)
        return best + np.abs(np.abs(z) - 1.0)

    def to_dict(self) -> dict:
        return {"arcs": [list(a) for a in self.arcs],
                "thresholds": list(self.thresholds)}


def spectrum_arcs(coin: CoinParams) -> SpectrumArcs:
    """Spectrum of ``U0`` (equal to the essential spectrum of the perturbed walk).

    For ``0 < a < 1`` two arcs separated by gaps of half-width ``arccos(a)``
    about ``delta/2`` and ``pi + delta/2``; for ``a = 1`` the whole circle.
    Thresholds are the arc endpoints reduced to ``[0, 2 pi)``.
    """
    if not coin.a > 0.0:
        raise ValueError("a = 0 is excluded")
    if coin.b == 0.0:
        return SpectrumArcs(((0.0, 2 * math.pi),), ())
    zeta = math.acos(coin.a)
    h = coin.delta / 2
    arcs = ((h + zeta, math.pi + h - zeta), (math.pi + h + zeta, 2 * math.pi + h - zeta))
    ends = [e for arc in arcs for e in arc]
    return SpectrumArcs(arcs, tuple(e % (2 * math.pi) for e in ends))


def velocity_distribution(band: BandDecomposition, psi: LatticeState, normalized: bool = True) -> StepCDF:
    """Spectral measure of the asymptotic velocity in the state ``psi``.

    Each node contributes the atoms ``v_j(k_m)`` with masses
    ``|<u_j(k_m), psi_hat(k_m)>|^2 / n``.  With ``normalized`` the state must
    have unit norm.
    """
    if normalized:
        nrm = np.sqrt(psi.norm_squared())
        if abs(nrm - 1.0) > NORM_TOL:
            raise NormalizationError(f"state must be normalized, got norm {nrm!r}")
    c = band.components(fourier(psi, band.grid))
    w = (np.abs(c) ** 2) / band.grid.n
    return StepCDF.from_atoms(band.velocity.ravel(), w.ravel())


def apply_U0_hat(coin: CoinParams, grid: KGrid, f: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Pointwise ``U0_hat(k) f(k)`` (or its inverse)."""
    k = grid.nodes
    c = coin.matrix()
    if not inverse:
        g = f @ c.T
        return np.stack([np.exp(1j * k) * g[:, 0], np.exp(-1j * k) * g[:, 1]], axis=1)
    g = np.stack([np.exp(-1j * k) * f[:, 0], np.exp(1j * k) * f[:, 1]], axis=1)
    return g @ c.conj()


def apply_V0(band: BandDecomposition, fhat: np.ndarray) -> np.ndarray:
    """Multiply the band-``j`` component of ``fhat`` by ``v_j(k)``."""
    return band.synthesize(band.velocity * band.components(fhat))


def _check_resolved(f: np.ndarray, tol: float = 1e-10) -> None:
    n = f.shape[0]
    c = np.abs(np.fft.fft(f, axis=0))
    m = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    high = c[m > n // 4]
    top = np.max(c) if c.size else 0.0
    if high.size and top > 0 and np.max(high) > tol * top:
        raise ValueError("input is not resolved on the grid (modes above n/4 present)")


def apply_X(band: BandDecomposition, f: np.ndarray, check: bool = True) -> np.ndarray:
    """``X f = -sum_j (<u_j, P f> u_j - i <u_j', f> u_j)`` with ``P = -i d/dk``.

    ``P`` is realized by spectral differentiation and ``u_j'`` analytically.
    In band coordinates this is ``i d/dk`` applied to ``<u_j, f>``.  With
    ``check`` the input must be a trig polynomial of degree at most ``n/4``.
    """
    if check:
        _check_resolved(f)
    pf = -1j * spectral_derivative(f)
    first = band.synthesize(band.components(pf))
    second = band.synthesize(np.einsum("mjc,mc->mj", band.dvecs.conj(), f))
    return -(first - 1j * second)


def _apply_A0(band: BandDecomposition, f: np.ndarray) -> np.ndarray:
    return 0.5 * (apply_X(band, apply_V0(band, f), check=False) + apply_V0(band, apply_X(band, f, check=False)))


@dataclass
class CommutatorReport:
    """Residuals ``||U0^-1 [A0, U0] f - V0^2 f|| / ||f||`` over the test basis."""

    n: int
    degree: int
    residuals: np.ndarray = field(repr=False)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))

    @property
    def passed(self) -> bool:
        return self.max_residual <= COMMUTATOR_TOL


def commutator_identity_check(band: BandDecomposition, degree: int) -> CommutatorReport:
    """Check ``U0^-1 (A0 U0 - U0 A0) = V0^2`` with ``A0 = (X V0 + V0 X) / 2``.

    The test basis is ``e^{-ikx} e_s`` for ``|x| <= degree`` and both spin
    components, i.e. the Fourier images of single-site states.
    """
    grid = band.grid
    if degree > grid.n // 8:
        raise ValueError(f"degree {degree} exceeds n/8 = {grid.n // 8}")
    k = grid.nodes
    coin = band.coin
    res = []
    for x in range(-degree, degree + 1):
        for s in (0, 1):
            f = np.zeros((grid.n, 2), dtype=np.complex128)
            f[:, s] = np.exp(-1j * k * x)
            uf = apply_U0_hat(coin, grid, f)
            comm = _apply_A0(band, uf) - apply_U0_hat(coin, grid, _apply_A0(band, f))
            lhs = apply_U0_hat(coin, grid, comm, inverse=True)
            rhs = apply_V0(band, apply_V0(band, f))
            r = np.sqrt(grid_inner(lhs - rhs, lhs - rhs).real / grid_inner(f, f).real)
            res.append(r)
    return CommutatorReport(grid.n, degree, np.array(res))
