"""Discrete step CDFs on the real line and distances between them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["StepCDF", "kolmogorov_distance", "cf_gap"]


@dataclass(frozen=True, eq=False)
class StepCDF:
    """Right-continuous CDF of a finite atomic measure.

    ``values`` are sorted, unique atom locations and ``weights`` their
    nonnegative masses.  The total mass need not be one.
    """

    values: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_atoms(cls, values, weights) -> "StepCDF":
        values = np.asarray(values, dtype=np.float64).ravel()
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if values.shape != weights.shape:
            raise ValueError("values and weights must have the same length")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        order = np.argsort(values, kind="stable")
        v, w = values[order], weights[order]
        uniq, start = np.unique(v, return_index=True)
        merged = np.add.reduceat(w, start) if w.size else w
        return cls(uniq, merged)

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.weights)

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    def __call__(self, v) -> np.ndarray:
        idx = np.searchsorted(self.values, v, side="right")
        c = np.concatenate(([0.0], self.cumulative))
        return c[idx]

    def left_limit(self, v) -> np.ndarray:
        idx = np.searchsorted(self.values, v, side="left")
        c = np.concatenate(([0.0], self.cumulative))
        return c[idx]

    def scaled(self, factor: float) -> "StepCDF":
        return StepCDF(self.values, self.weights * factor)

    def merged(self, other: "StepCDF") -> "StepCDF":
        return StepCDF.from_atoms(np.concatenate((self.values, other.values)),
                                  np.concatenate((self.weights, other.weights)))

    def mass_outside(self, lo: float, hi: float) -> float:
        mask = (self.values < lo) | (self.values > hi)
        return float(np.sum(self.weights[mask]))

    def characteristic(self, xi) -> np.ndarray:
        """``sum_v w_v exp(i xi v)`` for each entry of ``xi``."""
        xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
        return np.exp(1j * np.outer(xi, self.values)) @ self.weights


def kolmogorov_distance(f: StepCDF, g: StepCDF) -> float:
    """``sup_v |F(v) - G(v)|`` for two step CDFs, exact.

    Both functions are constant between the union of their atoms, so the
    supremum is attained at an atom or as a left limit at one.
    """
    pts = np.union1d(f.values, g.values)
    if pts.size == 0:
        return 0.0
    right = np.abs(f(pts) - g(pts))
    left = np.abs(f.left_limit(pts) - g.left_limit(pts))
    return float(max(np.max(right), np.max(left)))


def cf_gap(f: StepCDF, g: StepCDF, xi_grid) -> float:
    """``max_xi |phi_f(xi) - phi_g(xi)|`` over a finite grid."""
    return float(np.max(np.abs(f.characteristic(xi_grid) - g.characteristic(xi_grid))))
