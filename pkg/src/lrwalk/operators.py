"""Shift, coin, modifier and one-step evolutions of the long-range walk.

The walk is ``U = S C`` with ``C(x) = diag(e^{-i xi(x)}, e^{i xi(x)}) C0``,
the free walk is ``U0 = S C0`` and the conjugated free walk is
``U0~ = J U0 J^-1 = S C0~(x)`` with the modifier ``J(x) = e^{i theta(x)}``.

All evolutions are exact on finitely supported states: the stored window
grows by one site on each side per step and nothing is ever truncated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .state import LatticeState

__all__ = [
    "CoinParams",
    "PhaseProfile",
    "WalkModel",
    "Op",
    "apply_shift",
    "apply_shift_inverse",
    "apply_coin",
    "apply_modifier",
    "coin_matrix",
    "modified_coin",
    "step",
    "evolve",
    "evolve_observed",
    "verify_assumption",
    "AssumptionReport",
    "coin_gap_tail",
]

UNITARY_TOL = 1e-12


class Op(enum.Enum):
    """Which one-step unitary to apply."""

    U = "U"
    U0 = "U0"
    U0_TILDE = "U0~"


@dataclass(frozen=True)
class CoinParams:
    """Parameters of ``C0 = [[a e^{ia}, b e^{ib}], [-b e^{-ib+id}, a e^{-ia+id}]]``.

    Angles are radians and are never reduced internally.
    """

    a: float
    b: float
    alpha: float = 0.0
    beta: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0 and 0.0 <= self.b <= 1.0):
            raise ValueError(f"a, b must lie in [0, 1], got a={self.a}, b={self.b}")
        if abs(self.a ** 2 + self.b ** 2 - 1.0) > UNITARY_TOL:
            raise ValueError(f"a^2 + b^2 must equal 1, got {self.a ** 2 + self.b ** 2!r}")

    @classmethod
    def from_a(cls, a: float, alpha: float = 0.0, beta: float = 0.0, delta: float = math.pi) -> "CoinParams":
        b = math.sqrt(max(0.0, 1.0 - a * a))
        return cls(a, b, alpha, beta, delta)

    @classmethod
    def hadamard(cls) -> "CoinParams":
        s = 1.0 / math.sqrt(2.0)
        return cls(s, s, 0.0, 0.0, math.pi)

    def matrix(self) -> np.ndarray:
        a, b, al, be, de = self.a, self.b, self.alpha, self.beta, self.delta
        return np.array([
            [a * np.exp(1j * al), b * np.exp(1j * be)],
            [-b * np.exp(-1j * be + 1j * de), a * np.exp(-1j * al + 1j * de)],
        ], dtype=np.complex128)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "alpha": self.alpha, "beta": self.beta, "delta": self.delta}


# -- phase profiles -----------------------------------------------------------

def _power_xi(p: float) -> Callable[[np.ndarray], np.ndarray]:
    def xi(x):
        return (1.0 + np.abs(np.asarray(x, dtype=np.float64))) ** (-p)
    return xi


def _log_theta(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, np.log1p(np.abs(x)), -np.log1p(np.abs(x)))


def _power_theta(p: float):
    q = 1.0 - p

    def theta(x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x >= 0, 1.0, -1.0) * (1.0 + np.abs(x)) ** q / q
    return theta


def _cumsum_theta(xi: Callable[[np.ndarray], np.ndarray]):
    # theta(x) = sum_{y=0}^{x-1} xi(y) for x > 0, -sum_{y=x}^{-1} xi(y) for x < 0,
    # so that theta(x+1) - theta(x) = xi(x) for every x.
    def theta(x):
        x = np.asarray(x, dtype=np.int64)
        m = int(np.max(np.abs(x))) if x.size else 0
        pos = np.concatenate(([0.0], np.cumsum(xi(np.arange(0, m)))))
        neg = np.concatenate(([0.0], np.cumsum(xi(-np.arange(1, m + 1)))))
        return np.where(x >= 0, pos[np.abs(x)], -neg[np.abs(x)])
    return theta


@dataclass(frozen=True)
class PhaseProfile:
    """Coin phase ``xi`` together with a modifier phase ``theta``.

    ``kappa`` is the user-declared decay constant (``None`` when not declared);
    ``eps0`` is the decay exponent excess.  Both callables take and return
    numpy arrays of lattice positions.
    """

    xi: Callable[[np.ndarray], np.ndarray]
    theta: Callable[[np.ndarray], np.ndarray]
    eps0: float
    kappa: Optional[float] = None
    kind: str = "custom"
    p: Optional[float] = None

    def __post_init__(self):
        if self.eps0 <= 0:
            raise ValueError("eps0 must be positive")
        if self.kappa is not None and self.kappa <= 0:
            raise ValueError("kappa must be positive")

    @classmethod
    def log(cls, kappa: Optional[float] = None) -> "PhaseProfile":
        """``xi = (1+|x|)^-1`` with ``theta = +-log(1 +- x)``."""
        return cls(_power_xi(1.0), _log_theta, eps0=1.0, kappa=kappa, kind="log", p=1.0)

    @classmethod
    def power(cls, p: float, kappa: Optional[float] = None, eps0: Optional[float] = None) -> "PhaseProfile":
        """``xi = (1+|x|)^-p`` for ``0 < p < 1`` with ``theta = +-(1 +- x)^(1-p) / (1-p)``."""
        if not 0.0 < p < 1.0:
            raise ValueError(f"power profile needs 0 < p < 1, got {p}")
        return cls(_power_xi(p), _power_theta(p), eps0=p if eps0 is None else eps0,
                   kappa=kappa, kind="power", p=p)

    @classmethod
    def cumsum(cls, p: float, kappa: Optional[float] = None, eps0: Optional[float] = None) -> "PhaseProfile":
        """``xi = (1+|x|)^-p`` with theta the cumulative sum of xi."""
        if p <= 0:
            raise ValueError("p must be positive")
        xi = _power_xi(p)
        return cls(xi, _cumsum_theta(xi), eps0=p if eps0 is None else eps0,
                   kappa=kappa, kind="cumsum", p=p)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p, "kappa": self.kappa, "eps0": self.eps0}


@dataclass(frozen=True)
class WalkModel:
    """Coin parameters plus an optional phase profile (absent means homogeneous)."""

    coin: CoinParams
    profile: Optional[PhaseProfile] = None
    _c0: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.coin.a > 0.0:
            raise ValueError("a must lie in (0, 1]; a = 0 is the excluded off-diagonal coin")
        c0 = self.coin.matrix()
        c0.flags.writeable = False
        object.__setattr__(self, "_c0", c0)

    @property
    def c0(self) -> np.ndarray:
        return self._c0

    @property
    def homogeneous(self) -> bool:
        return self.profile is None

    def xi(self, x: np.ndarray) -> np.ndarray:
        if self.profile is None:
            return np.zeros(np.shape(x))
        return np.asarray(self.profile.xi(x), dtype=np.float64)

    def theta(self, x: np.ndarray) -> np.ndarray:
        if self.profile is None:
            return np.zeros(np.shape(x))
        return np.asarray(self.profile.theta(x), dtype=np.float64)

    def coin_entries(self, xs: np.ndarray, op: Op) -> tuple:
        """Per-site entries ``(m00, m01, m10, m11)`` of the coin used by ``op``.

        The left/right diagonal phases multiply rows of ``C0``.
        """
        c = self._c0
        if op is Op.U0 or self.profile is None:
            if op is Op.U0_TILDE and self.profile is None:
                raise ValueError("U0~ requires a phase profile")
            return c[0, 0], c[0, 1], c[1, 0], c[1, 1]
        xs = np.asarray(xs, dtype=np.int64)
        if op is Op.U:
            xi = self.xi(xs)
            top, bot = np.exp(-1j * xi), np.exp(1j * xi)
        else:
            th = self.theta(np.concatenate(([xs[0] - 1], xs, [xs[-1] + 1])))
            top = np.exp(-1j * (th[1:-1] - th[:-2]))
            bot = np.exp(1j * (th[2:] - th[1:-1]))
        return top * c[0, 0], top * c[0, 1], bot * c[1, 0], bot * c[1, 1]


def coin_matrix(model: WalkModel, x: int) -> np.ndarray:
    """``C(x)`` of the perturbed walk."""
    m = model.coin_entries(np.array([x]), Op.U)
    return np.array([[m[0], m[1]], [m[2], m[3]]], dtype=np.complex128).reshape(2, 2)


def modified_coin(model: WalkModel, x: int) -> np.ndarray:
    """``C0~(x) = diag(e^{-i(theta(x)-theta(x-1))}, e^{i(theta(x+1)-theta(x))}) C0``."""
    if model.profile is None:
        raise ValueError("modified coin requires a phase profile")
    m = model.coin_entries(np.array([x]), Op.U0_TILDE)
    return np.array([[m[0], m[1]], [m[2], m[3]]], dtype=np.complex128).reshape(2, 2)


# -- single operators on LatticeState ------------------------------------------

def apply_shift(psi: LatticeState) -> LatticeState:
    """``(S psi)(x) = (psi1(x+1), psi2(x-1))``; the window grows by one per side."""
    n = psi.width
    out = np.zeros((n + 2, 2), dtype=np.complex128)
    out[0:n, 0] = psi.amplitudes[:, 0]
    out[2:n + 2, 1] = psi.amplitudes[:, 1]
    return LatticeState(psi.offset - 1, out)


def apply_shift_inverse(psi: LatticeState) -> LatticeState:
    """``(S^-1 psi)(x) = (psi1(x-1), psi2(x+1))``."""
    n = psi.width
    out = np.zeros((n + 2, 2), dtype=np.complex128)
    out[2:n + 2, 0] = psi.amplitudes[:, 0]
    out[0:n, 1] = psi.amplitudes[:, 1]
    return LatticeState(psi.offset - 1, out)


def apply_coin(model: WalkModel, psi: LatticeState, op: Op = Op.U, inverse: bool = False) -> LatticeState:
    """Pointwise coin multiplication; ``op`` selects ``C``, ``C0`` or ``C0~``."""
    m00, m01, m10, m11 = model.coin_entries(psi.positions, op)
    if inverse:
        m00, m01, m10, m11 = np.conj(m00), np.conj(m10), np.conj(m01), np.conj(m11)
    buf = np.array(psi.amplitudes)
    n = psi.width
    o1, o2, tmp = (np.empty(n, dtype=np.complex128) for _ in range(3))
    _coin_kernel(buf[:, 0], buf[:, 1], m00, m01, m10, m11, o1, o2, tmp)
    buf[:, 0] = o1
    buf[:, 1] = o2
    return LatticeState(psi.offset, buf)


def _coin_kernel(a, b, m00, m01, m10, m11, o1, o2, tmp) -> None:
    # (o1, o2) = M (a, b) with per-site or scalar entries; shared by every coin
    # application so that all code paths round identically
    np.multiply(a, m00, out=o1)
    np.multiply(b, m01, out=tmp)
    o1 += tmp
    np.multiply(a, m10, out=o2)
    np.multiply(b, m11, out=tmp)
    o2 += tmp


def apply_modifier(model: WalkModel, psi: LatticeState, inverse: bool = False) -> LatticeState:
    """Multiply by ``e^{+i theta(x)}`` (or ``e^{-i theta(x)}`` when ``inverse``)."""
    if model.profile is None:
        raise ValueError("modifier requires a phase profile")
    sign = -1.0 if inverse else 1.0
    ph = np.exp(sign * 1j * model.theta(psi.positions))
    return LatticeState(psi.offset, psi.amplitudes * ph[:, None])


# -- evolution engine -----------------------------------------------------------

def evolve_observed(model: WalkModel, psi: LatticeState, steps: int, op: Op = Op.U,
                    inverse: bool = False, observe=None) -> LatticeState:
    """Apply ``op`` (or its inverse) ``steps`` times.

    The state lives in a preallocated buffer covering the final window, so
    coin entries are evaluated once.  ``observe(t, offset, amps)`` is called
    after every step with a read-only view of the current window.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if op is Op.U0_TILDE and model.profile is None:
        raise ValueError("U0~ requires a phase profile")
    if steps == 0:
        return psi
    n0 = psi.width
    size = n0 + 2 * steps
    base = psi.offset - steps
    m00, m01, m10, m11 = model.coin_entries(np.arange(base, base + size), op)
    scalar = np.ndim(m00) == 0
    if inverse:
        m00, m01, m10, m11 = np.conj(m00), np.conj(m10), np.conj(m01), np.conj(m11)

    buf = np.zeros((size, 2), dtype=np.complex128)
    p1 = buf[:, 0]
    p2 = buf[:, 1]
    lo, hi = steps, steps + n0
    buf[lo:hi] = psi.amplitudes

    t1 = np.empty(size, dtype=np.complex128)
    t2 = np.empty(size, dtype=np.complex128)
    t3 = np.empty(size, dtype=np.complex128)

    def coin(lo, hi):
        # writes the coin output for the window into t1 (top) and t2 (bottom)
        o1, o2, tmp = t1[:hi - lo], t2[:hi - lo], t3[:hi - lo]
        if scalar:
            _coin_kernel(p1[lo:hi], p2[lo:hi], m00, m01, m10, m11, o1, o2, tmp)
        else:
            _coin_kernel(p1[lo:hi], p2[lo:hi], m00[lo:hi], m01[lo:hi], m10[lo:hi], m11[lo:hi], o1, o2, tmp)
        return o1, o2

    for t in range(1, steps + 1):
        if not inverse:
            c1, c2 = coin(lo, hi)
            p1[lo - 1:hi - 1] = c1
            p1[hi - 1] = 0.0
            p2[lo + 1:hi + 1] = c2
            p2[lo] = 0.0
            lo -= 1
            hi += 1
        else:
            w = hi - lo
            t1[:w] = p1[lo:hi]
            p1[lo + 1:hi + 1] = t1[:w]
            p1[lo] = 0.0
            t1[:w] = p2[lo:hi]
            p2[lo - 1:hi - 1] = t1[:w]
            p2[hi - 1] = 0.0
            lo -= 1
            hi += 1
            c1, c2 = coin(lo, hi)
            p1[lo:hi] = c1
            p2[lo:hi] = c2
        if observe is not None:
            view = buf[lo:hi]
            view.flags.writeable = False
            observe(t, base + lo, view)
            view.flags.writeable = True
    return LatticeState(base + lo, buf[lo:hi])


def evolve(model: WalkModel, psi: LatticeState, steps: int, op: Op = Op.U,
           inverse: bool = False) -> LatticeState:
    """``op^steps psi`` (``op^-steps psi`` when ``inverse``), exactly."""
    return evolve_observed(model, psi, steps, op, inverse)


def step(model: WalkModel, psi: LatticeState, op: Op = Op.U, inverse: bool = False) -> LatticeState:
    """One application of ``U``, ``U0`` or ``U0~``; ``inverse`` applies ``C* S^-1``."""
    return evolve_observed(model, psi, 1, op, inverse)


# -- decay assumption -------------------------------------------------------------

@dataclass
class AssumptionReport:
    """Residuals of the two difference bounds on ``|x| <= radius``.

    ``kappa_min`` is the smallest constant making both bounds hold on the
    range; ``kappa_min_doubled`` is the same on twice the range.
    """

    radius: int
    eps0: float
    xs: np.ndarray
    residual_fwd: np.ndarray
    residual_bwd: np.ndarray
    coin_gap: np.ndarray
    kappa_min: float
    kappa_min_doubled: float
    kappa_declared: Optional[float]
    xi_decays: bool

    @property
    def kappa_used(self) -> float:
        return self.kappa_declared if self.kappa_declared is not None else self.kappa_min

    @property
    def weight(self) -> np.ndarray:
        return (1.0 + np.abs(self.xs)) ** (-1.0 - self.eps0)

    @property
    def bound(self) -> np.ndarray:
        return self.kappa_used * self.weight

    @property
    def kappa_stable(self) -> bool:
        if not np.isfinite(self.kappa_min) or self.kappa_min == 0.0:
            return self.kappa_min == self.kappa_min_doubled
        return abs(self.kappa_min_doubled - self.kappa_min) <= 0.01 * self.kappa_min

    @property
    def coin_bound_ok(self) -> bool:
        return bool(np.all(self.coin_gap <= 2.0 * self.kappa_used * self.weight * (1 + 1e-12)))

    @property
    def passed(self) -> bool:
        if self.kappa_declared is not None:
            ok = self.kappa_min <= self.kappa_declared
        else:
            ok = bool(np.isfinite(self.kappa_min)) and self.kappa_stable
        return bool(ok and self.coin_bound_ok and self.xi_decays)

    def summary(self) -> dict:
        return {
            "radius": self.radius,
            "eps0": self.eps0,
            "kappa_min": self.kappa_min,
            "kappa_min_doubled": self.kappa_min_doubled,
            "kappa_declared": self.kappa_declared,
            "kappa_stable": self.kappa_stable,
            "coin_bound_ok": self.coin_bound_ok,
            "xi_decays": self.xi_decays,
            "residual_at_0": [float(self.residual_fwd[self.radius]), float(self.residual_bwd[self.radius])],
            "pass": self.passed,
        }


def _residuals(profile: PhaseProfile, xs: np.ndarray):
    ext = np.concatenate(([xs[0] - 1], xs, [xs[-1] + 1]))
    th = np.asarray(profile.theta(ext), dtype=np.float64)
    xi = np.asarray(profile.xi(xs), dtype=np.float64)
    fwd = xi - (th[2:] - th[1:-1])
    bwd = xi - (th[1:-1] - th[:-2])
    return fwd, bwd


def _kappa_min(profile: PhaseProfile, radius: int) -> float:
    xs = np.arange(-radius, radius + 1)
    fwd, bwd = _residuals(profile, xs)
    w = (1.0 + np.abs(xs)) ** (1.0 + profile.eps0)
    return float(max(np.max(np.abs(fwd) * w), np.max(np.abs(bwd) * w)))


def verify_assumption(profile: PhaseProfile, radius: int, coin: Optional[CoinParams] = None) -> AssumptionReport:
    """Check the forward/backward difference bounds and the coin-gap bound.

    The coin gap ``||C(x) - C0~(x)||`` is an operator norm of 2x2 matrices
    and does not depend on ``C0`` beyond unitarity; ``coin`` defaults to
    the Hadamard coin.
    """
    if radius < 1:
        raise ValueError("radius must be at least 1")
    xs = np.arange(-radius, radius + 1)
    fwd, bwd = _residuals(profile, xs)
    w = (1.0 + np.abs(xs)) ** (1.0 + profile.eps0)
    kmin = float(max(np.max(np.abs(fwd) * w), np.max(np.abs(bwd) * w)))

    model = WalkModel(coin or CoinParams.hadamard(), profile)
    c = model.coin_entries(xs, Op.U)
    ct = model.coin_entries(xs, Op.U0_TILDE)
    diff = np.stack([np.stack([c[0] - ct[0], c[1] - ct[1]], -1),
                     np.stack([c[2] - ct[2], c[3] - ct[3]], -1)], -2)
    gap = np.linalg.norm(diff, ord=2, axis=(-2, -1))

    far = np.abs(profile.xi(np.array([-10 ** 6, 10 ** 6])))
    near = np.abs(profile.xi(np.array([-10, 10])))
    decays = bool(np.all(far < near))
    return AssumptionReport(
        radius=radius, eps0=profile.eps0, xs=xs, residual_fwd=fwd, residual_bwd=bwd,
        coin_gap=gap, kappa_min=kmin, kappa_min_doubled=_kappa_min(profile, 2 * radius),
        kappa_declared=profile.kappa, xi_decays=decays,
    )


def coin_gap_tail(profile: PhaseProfile, start: int, stop: Optional[int] = None) -> float:
    """``sum_{start < |x| <= stop} ||C(x) - C0~(x)||`` with a kappa-tail remainder.

    The sum is evaluated explicitly up to ``stop`` (default ``max(10**6, 100*start)``);
    the remainder uses the decay constant measured on ``[stop/2, stop]``.
    """
    start = max(int(start), 0)
    stop = int(stop if stop is not None else max(10 ** 6, 100 * start))
    total = 0.0
    for sgn in (1, -1):
        xs = sgn * np.arange(start + 1, stop + 1)
        fwd, bwd = _residuals(profile, xs if sgn > 0 else xs[::-1])
        gap = np.maximum(np.abs(2 * np.sin(fwd / 2)), np.abs(2 * np.sin(bwd / 2)))
        total += float(np.sum(gap))
    # remainder: sum_{|x| > stop} 2 kappa_far (1+|x|)^(-1-eps0) <= 4 kappa_far (1+stop)^-eps0 / eps0
    far = np.arange(stop // 2, stop + 1)
    fwd, bwd = _residuals(profile, far)
    w = (1.0 + far) ** (1.0 + profile.eps0)
    kappa_far = float(max(np.max(np.abs(fwd) * w), np.max(np.abs(bwd) * w)))
    total += 4.0 * kappa_far * (1.0 + stop) ** (-profile.eps0) / profile.eps0
    return total
