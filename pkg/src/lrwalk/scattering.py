"""Finite-time approximants of the modified wave operators.

``W_T = U^{-T} J U0^{T}`` (direction ``+``) and ``U^{T} J U0^{-T}``
(direction ``-``).  The absolutely continuous projection of ``U0`` is the
identity for ``a`` in ``(0, 1]``, so no projection is applied.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import Op, WalkModel, apply_modifier, coin_gap_tail, evolve, step
from .state import LatticeState, inner, norm

__all__ = [
    "Direction",
    "apply_waveop",
    "apply_waveop_adjoint",
    "convergence_study",
    "ConvergenceTelemetry",
    "intertwining_check",
    "duality_defect",
    "DEFAULT_CHECKPOINTS",
]

DEFAULT_CHECKPOINTS = (50, 100, 200, 400, 800)
DEFAULT_TOLERANCE = 0.01


class Direction(enum.Enum):
    PLUS = "+"
    MINUS = "-"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, cls):
            return value
        return cls(str(value))


def _modifier(model: WalkModel, psi: LatticeState, inverse: bool) -> LatticeState:
    if model.profile is None:
        return psi
    return apply_modifier(model, psi, inverse=inverse)


def apply_waveop(model: WalkModel, T: int, psi: LatticeState, direction=Direction.PLUS) -> LatticeState:
    """``U^{-T} J U0^{T} psi`` for ``+``, ``U^{T} J U0^{-T} psi`` for ``-``."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    plus = Direction.parse(direction) is Direction.PLUS
    if model.homogeneous:
        return psi  # U = U0 and J = I
    phi = evolve(model, psi, T, Op.U0, inverse=not plus)
    phi = _modifier(model, phi, inverse=False)
    return evolve(model, phi, T, Op.U, inverse=plus)


def apply_waveop_adjoint(model: WalkModel, T: int, psi: LatticeState, direction=Direction.PLUS) -> LatticeState:
    """``U0^{-T} J^-1 U^{T} psi`` for ``+``, ``U0^{T} J^-1 U^{-T} psi`` for ``-``."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    plus = Direction.parse(direction) is Direction.PLUS
    if model.homogeneous:
        return psi
    phi = evolve(model, psi, T, Op.U, inverse=not plus)
    phi = _modifier(model, phi, inverse=True)
    return evolve(model, phi, T, Op.U0, inverse=plus)


def _distance(a: LatticeState, b: LatticeState) -> float:
    return norm(a - b)


@dataclass
class ConvergenceTelemetry:
    """Increments ``d = ||W_{t'} psi - W_t psi||`` between consecutive checkpoints.

    ``times[i]`` is the later checkpoint of increment ``increments[i]``.
    """

    checkpoints: tuple
    times: np.ndarray
    increments: np.ndarray
    tail_proxy: np.ndarray
    tolerance: float
    direction: str = "+"
    isometry_defect: float = 0.0

    @property
    def final_increment(self) -> float:
        return float(self.increments[-1]) if self.increments.size else 0.0

    @property
    def decreasing(self) -> bool:
        d = self.increments
        if d.size < 2:
            return True
        if np.all(d == 0.0):
            return True
        return bool(np.all(np.diff(d) < 0))

    @property
    def passed(self) -> bool:
        return self.decreasing and self.final_increment <= self.tolerance

    def rows(self):
        return [(int(t), float(d), float(p)) for t, d, p in zip(self.times, self.increments, self.tail_proxy)]

    def summary(self) -> dict:
        return {
            "checkpoints": list(self.checkpoints),
            "increments": [float(d) for d in self.increments],
            "final_increment": self.final_increment,
            "tolerance": self.tolerance,
            "decreasing": self.decreasing,
            "isometry_defect": self.isometry_defect,
            "pass": self.passed,
        }


def convergence_study(model: WalkModel, psi: LatticeState, checkpoints: Sequence[int] = DEFAULT_CHECKPOINTS,
                      tolerance: float = DEFAULT_TOLERANCE, direction=Direction.PLUS,
                      escape_radius: int = 0) -> ConvergenceTelemetry:
    """Cauchy study of ``W_t psi`` along increasing checkpoints.

    Alongside the increments, the tail of ``sum ||C(x) - C0~(x)||`` over
    ``|x| > a t - escape_radius`` is recorded as a proxy for the remaining
    interaction at time ``t``.
    """
    cps = tuple(int(t) for t in checkpoints)
    if not cps:
        raise ValueError("checkpoints must be nonempty")
    if any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 0:
        raise ValueError("checkpoints must be strictly increasing and nonnegative")
    states = [apply_waveop(model, t, psi, direction) for t in cps]
    defect = max(abs(norm(s) - norm(psi)) for s in states)
    incs = np.array([_distance(b, a) for a, b in zip(states, states[1:])])
    tails = []
    for t in cps[1:]:
        if model.profile is None:
            tails.append(0.0)
        else:
            start = max(0, int(model.coin.a * t) - escape_radius)
            tails.append(coin_gap_tail(model.profile, start))
    return ConvergenceTelemetry(cps, np.array(cps[1:]), incs, np.array(tails), float(tolerance),
                                Direction.parse(direction).value, defect)


def intertwining_check(model: WalkModel, T: int, psi: LatticeState, direction=Direction.PLUS) -> float:
    """``||W_T (U0 psi) - U (W_{T+1} psi)||``, an exact identity at finite ``T``."""
    d = Direction.parse(direction)
    if d is Direction.PLUS:
        left = apply_waveop(model, T, step(model, psi, Op.U0), d)
        right = step(model, apply_waveop(model, T + 1, psi, d), Op.U)
    else:
        left = apply_waveop(model, T, step(model, psi, Op.U0, inverse=True), d)
        right = step(model, apply_waveop(model, T + 1, psi, d), Op.U, inverse=True)
    return _distance(left, right)


def duality_defect(model: WalkModel, T: int, phi: LatticeState, psi: LatticeState, direction=Direction.PLUS) -> float:
    """``|<W_T phi, psi> - <phi, W_T^* psi>|``."""
    return abs(inner(apply_waveop(model, T, phi, direction), psi)
               - inner(phi, apply_waveop_adjoint(model, T, psi, direction)))
