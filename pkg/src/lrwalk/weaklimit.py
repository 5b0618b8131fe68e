"""Weak limit of ``X_t / t``: exact position laws versus the predicted limit law.

The predicted law has a point mass at zero (bound states) plus the velocity
distribution of ``W_+^* Psi0`` for the absolutely continuous part.  All
position laws are computed exactly from the evolved wavefunction; nothing is
sampled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .distributions import StepCDF, cf_gap, kolmogorov_distance
from .operators import Op, WalkModel, evolve_observed, step
from .scattering import apply_waveop_adjoint
from .spectral import KGrid, band_decompose, required_grid, velocity_distribution
from .state import LatticeState, NORM_TOL, NormalizationError, norm

__all__ = [
    "EmpiricalScaledLaw",
    "LimitLaw",
    "PointMassEstimate",
    "WeakLimitReport",
    "evolve_distribution",
    "evolve_distributions",
    "characteristic_function",
    "estimate_point_mass",
    "localized_component",
    "predicted_limit_law",
    "weak_limit_comparison",
    "compare_laws",
    "DEFAULT_XI_GRID",
    "POINT_MASS_THRESHOLD",
]

DEFAULT_XI_GRID = np.linspace(-5.0, 5.0, 21)
POINT_MASS_THRESHOLD = 0.02


class ConvergenceWarning(UserWarning):
    """The wave-operator approximant behind a limit law was not certified."""


@dataclass(frozen=True, eq=False)
class EmpiricalScaledLaw:
    """Exact law of ``X_T`` and the CDF of ``X_T / T``."""

    T: int
    xs: np.ndarray
    probs: np.ndarray

    @property
    def samples(self) -> dict:
        return dict(zip(self.xs.tolist(), self.probs.tolist()))

    @property
    def cdf_of_v(self) -> StepCDF:
        return StepCDF.from_atoms(self.xs / self.T, self.probs)

    def cdf(self) -> StepCDF:
        return self.cdf_of_v

    @property
    def total(self) -> float:
        return float(np.sum(self.probs))

    def mass_outside(self, speed: float) -> float:
        """Mass of ``|X_T / T| > speed``."""
        return float(np.sum(self.probs[np.abs(self.xs) > speed * self.T]))


@dataclass(frozen=True, eq=False)
class LimitLaw:
    """Point mass at ``v = 0`` plus an atomic sample of the continuous part."""

    point_mass: float
    ac: StepCDF
    diagnostics: dict = field(default_factory=dict)
    warning: Optional[str] = None

    @property
    def total(self) -> float:
        return self.point_mass + self.ac.total

    def cdf(self) -> StepCDF:
        if self.point_mass == 0.0:
            return self.ac
        return self.ac.merged(StepCDF(np.array([0.0]), np.array([self.point_mass])))

    @classmethod
    def point(cls, v: float = 0.0) -> "LimitLaw":
        if v == 0.0:
            return cls(1.0, StepCDF(np.zeros(0), np.zeros(0)))
        return cls(0.0, StepCDF(np.array([float(v)]), np.array([1.0])))


def _check_normalized(psi: LatticeState) -> None:
    n = norm(psi)
    if abs(n - 1.0) > NORM_TOL:
        raise NormalizationError(f"initial state must be normalized, got norm {n!r}")


def evolve_distributions(model: WalkModel, psi0: LatticeState, times: Sequence[int]) -> list:
    """Exact laws of ``X_T`` for every ``T`` in ``times`` from one evolution."""
    _check_normalized(psi0)
    times = [int(t) for t in times]
    if not times or min(times) < 1:
        raise ValueError("times must be positive")
    wanted = set(times)
    laws = {}

    def grab(t, offset, amps):
        if t in wanted:
            p = np.sum(amps.real ** 2 + amps.imag ** 2, axis=1)
            laws[t] = EmpiricalScaledLaw(t, np.arange(offset, offset + len(p)), p)

    evolve_observed(model, psi0, max(times), Op.U, observe=grab)
    return [laws[t] for t in times]


def evolve_distribution(model: WalkModel, psi0: LatticeState, T: int) -> EmpiricalScaledLaw:
    """Exact law of ``X_T`` for the walk ``U`` started at ``psi0``."""
    return evolve_distributions(model, psi0, [T])[0]


def characteristic_function(law, xi) -> complex:
    """``E[exp(i xi V)]`` for an empirical law (``V = X_T / T``) or a limit law."""
    if isinstance(law, LimitLaw):
        return complex(law.point_mass + law.ac.characteristic([xi])[0])
    return complex(law.cdf().characteristic([xi])[0])


@dataclass(frozen=True)
class PointMassEstimate:
    """Time-averaged probability of staying within ``|x| <= R``.

    ``value`` uses ``(R, T_avg)``; ``value_doubled`` uses ``(2R, 2 T_avg)``
    as a stabilization diagnostic.
    """

    value: float
    value_doubled: float
    R: int
    T_avg: int

    def __float__(self) -> float:
        return self.value

    @property
    def drift(self) -> float:
        return abs(self.value_doubled - self.value)


def estimate_point_mass(model: WalkModel, psi0: LatticeState, R: int, T_avg: int) -> PointMassEstimate:
    """``(1/T) sum_{t=1}^{T} sum_{|x|<=R} ||(U^t psi0)(x)||^2`` at ``(R, T)`` and ``(2R, 2T)``."""
    if R < 1 or T_avg < 1:
        raise ValueError("R and T_avg must be at least 1")
    acc = np.zeros(2)

    def window_mass(t, offset, amps):
        p = np.sum(amps.real ** 2 + amps.imag ** 2, axis=1)
        xs = np.arange(offset, offset + len(p))
        if t <= T_avg:
            acc[0] += np.sum(p[np.abs(xs) <= R])
        acc[1] += np.sum(p[np.abs(xs) <= 2 * R])

    evolve_observed(model, psi0, 2 * T_avg, Op.U, observe=window_mass)
    return PointMassEstimate(float(acc[0] / T_avg), float(acc[1] / (2 * T_avg)), int(R), int(T_avg))


def localized_component(model: WalkModel, psi0: LatticeState, R: int, T_avg: int) -> LatticeState:
    """``(1/T) sum_{t=1}^{T} U^{-t} chi_R U^t psi0``, the time-averaged localized part.

    Accumulated backwards in Horner form, so the cost is that of ``2T`` steps.
    """
    if R < 1 or T_avg < 1:
        raise ValueError("R and T_avg must be at least 1")
    pieces = {}

    def cut(t, offset, amps):
        lo, hi = max(offset, -R), min(offset + len(amps), R + 1)
        if hi > lo:
            pieces[t] = LatticeState(lo, amps[lo - offset:hi - offset])

    evolve_observed(model, psi0, T_avg, Op.U, observe=cut)
    zero = LatticeState(0, np.zeros((1, 2)))
    acc = pieces.get(T_avg, zero)
    for t in range(T_avg - 1, 0, -1):
        acc = pieces.get(t, zero) + step(model, acc, Op.U, inverse=True)
    return (1.0 / T_avg) * step(model, acc, Op.U, inverse=True)


def predicted_limit_law(model: WalkModel, psi0: LatticeState, T_wave: int, grid: KGrid,
                        R: int = 20, T_avg: int = 2000, certified: Optional[bool] = None) -> LimitLaw:
    """Limit law of ``X_t / t`` predicted from the wave-operator approximant at ``T_wave``.

    The point mass comes from :func:`estimate_point_mass`.  For a homogeneous
    walk it is exactly zero (purely absolutely continuous spectrum) and the
    continuous part is the velocity distribution of ``psi0`` itself.  When the
    estimate stays below ``POINT_MASS_THRESHOLD`` the state is treated as
    absolutely continuous; above it, the localized time average is removed
    first and its mass is placed at zero.

    ``grid`` is enlarged automatically when the approximant's support needs it.
    """
    _check_normalized(psi0)
    diagnostics: dict = {"T_wave": int(T_wave)}
    if model.homogeneous:
        point_mass = 0.0
        phi = psi0
    else:
        est = estimate_point_mass(model, psi0, R, T_avg)
        diagnostics.update(point_mass_estimate=est.value, point_mass_doubled=est.value_doubled,
                           R=est.R, T_avg=est.T_avg)
        if est.value > POINT_MASS_THRESHOLD:
            point_mass = est.value
            psi_ac = psi0 - localized_component(model, psi0, R, T_avg)
        else:
            point_mass = 0.0
            psi_ac = psi0
        phi = apply_waveop_adjoint(model, T_wave, psi_ac)
    if grid.n < 2 * phi.width:
        grid = required_grid(phi.width, grid.n)
    diagnostics["kgrid"] = grid.n
    band = band_decompose(model.coin, grid)
    ac = velocity_distribution(band, phi, normalized=False)
    mass = ac.total
    if mass > 0:
        ac = ac.scaled((1.0 - point_mass) / mass)
    diagnostics["ac_raw_mass"] = mass
    msg = None
    if certified is False:
        msg = f"wave-operator approximant at T={T_wave} is not certified"
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
    return LimitLaw(point_mass, ac, diagnostics, msg)


def compare_laws(f, g, xi_grid=DEFAULT_XI_GRID) -> tuple:
    """Kolmogorov distance and characteristic-function gap between two laws."""
    fc, gc = f.cdf(), g.cdf()
    return kolmogorov_distance(fc, gc), cf_gap(fc, gc, xi_grid)


@dataclass
class WeakLimitReport:
    """Distances between the law of ``X_T / T`` and a limit law along ``T``."""

    times: np.ndarray
    kolmogorov: np.ndarray
    cf_gap: np.ndarray
    empirical_total: np.ndarray
    law_total: float
    point_mass: float
    tol_kolmogorov: float
    tol_cf: float
    laws: list = field(default_factory=list, repr=False)

    @property
    def kolmogorov_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.kolmogorov) < 0))

    @property
    def cf_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.cf_gap) < 0))

    @property
    def passed(self) -> bool:
        return (self.kolmogorov_decreasing and self.cf_decreasing
                and self.kolmogorov[-1] <= self.tol_kolmogorov and self.cf_gap[-1] <= self.tol_cf)

    def rows(self) -> list:
        return [{"T": int(t), "kolmogorov": float(k), "cf_gap_max": float(c),
                 "point_mass": self.point_mass, "empirical_total": float(m)}
                for t, k, c, m in zip(self.times, self.kolmogorov, self.cf_gap, self.empirical_total)]


def weak_limit_comparison(model: WalkModel, psi0: LatticeState, T_list: Sequence[int], law: LimitLaw,
                          xi_grid=DEFAULT_XI_GRID, tol_kolmogorov: float = 0.05,
                          tol_cf: float = 0.05) -> WeakLimitReport:
    """Kolmogorov distance and max CF gap on ``xi_grid`` for each ``T`` in ``T_list``."""
    T_list = [int(t) for t in T_list]
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must be increasing")
    laws = evolve_distributions(model, psi0, T_list)
    target = law.cdf()
    ks, cfs = [], []
    for emp in laws:
        c = emp.cdf_of_v
        ks.append(kolmogorov_distance(c, target))
        cfs.append(cf_gap(c, target, xi_grid))
    return WeakLimitReport(np.array(T_list), np.array(ks), np.array(cfs),
                           np.array([e.total for e in laws]), law.total, law.point_mass,
                           float(tol_kolmogorov), float(tol_cf), laws)
