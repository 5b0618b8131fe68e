"""Finitely supported two-component wavefunctions on the integer lattice.

A :class:`LatticeState` stores only a contiguous window of sites; everything
outside ``[offset, offset + width)`` is implicitly zero.  States are treated
as immutable values: the amplitude array is flagged read-only on construction.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "LatticeState",
    "make_delta_state",
    "make_gaussian_state",
    "inner",
    "norm",
    "position_distribution",
    "NormalizationError",
]

NORM_TOL = 1e-10
# edge amplitudes below this are subnormal noise and may be trimmed
TRIM_THRESHOLD = 1e-300


class NormalizationError(ValueError):
    """Raised when an operation requires a unit-norm state."""


@dataclass(frozen=True, eq=False)
class LatticeState:
    """Wavefunction ``x -> (psi1(x), psi2(x))`` with finite contiguous support.

    Parameters
    ----------
    offset : int
        Lattice index of the first stored site.
    amplitudes : array_like, shape (width, 2)
        Complex amplitudes; row ``i`` holds the spinor at ``offset + i``.
    """

    offset: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128, copy=True)
        if amps.ndim == 1 and amps.size == 2:
            amps = amps.reshape(1, 2)
        if amps.ndim != 2 or amps.shape[1] != 2:
            raise ValueError(f"amplitudes must have shape (width, 2), got {amps.shape}")
        amps.flags.writeable = False
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "amplitudes", amps)

    @property
    def width(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.width, dtype=np.int64)

    @property
    def stop(self) -> int:
        return self.offset + self.width

    def __call__(self, x: int) -> np.ndarray:
        i = x - self.offset
        if 0 <= i < self.width:
            return self.amplitudes[i].copy()
        return np.zeros(2, dtype=np.complex128)

    def probabilities(self) -> np.ndarray:
        a = self.amplitudes
        return a.real[:, 0] ** 2 + a.imag[:, 0] ** 2 + a.real[:, 1] ** 2 + a.imag[:, 1] ** 2

    def norm_squared(self) -> float:
        return float(np.sum(self.probabilities()))

    def window(self, start: int, stop: int) -> "LatticeState":
        """Restate the same vector on the window ``[start, stop)``.

        The new window must contain every nonzero stored amplitude.
        """
        if stop < start:
            raise ValueError("empty window")
        out = np.zeros((stop - start, 2), dtype=np.complex128)
        lo = max(start, self.offset)
        hi = min(stop, self.stop)
        if hi > lo:
            out[lo - start:hi - start] = self.amplitudes[lo - self.offset:hi - self.offset]
        inside = (self.positions >= start) & (self.positions < stop)
        if np.any(self.amplitudes[~inside] != 0):
            raise ValueError("window would drop nonzero amplitudes")
        return LatticeState(start, out)

    def trimmed(self) -> "LatticeState":
        """Drop edge sites whose amplitudes are below the subnormal threshold.

        Interior values are never touched.  A state that is entirely zero is
        reduced to a single zero site at its offset.
        """
        mag = np.max(np.abs(self.amplitudes), axis=1)
        keep = np.nonzero(mag >= TRIM_THRESHOLD)[0]
        if keep.size == 0:
            return LatticeState(self.offset, np.zeros((1, 2)))
        lo, hi = int(keep[0]), int(keep[-1]) + 1
        return LatticeState(self.offset + lo, self.amplitudes[lo:hi])

    def __add__(self, other: "LatticeState") -> "LatticeState":
        if not isinstance(other, LatticeState):
            return NotImplemented
        start = min(self.offset, other.offset)
        stop = max(self.stop, other.stop)
        a = self.window(start, stop).amplitudes + other.window(start, stop).amplitudes
        return LatticeState(start, a)

    def __sub__(self, other: "LatticeState") -> "LatticeState":
        return self + (-1.0) * other

    def __mul__(self, c: complex) -> "LatticeState":
        return LatticeState(self.offset, complex(c) * self.amplitudes)

    __rmul__ = __mul__

    def __neg__(self) -> "LatticeState":
        return (-1.0) * self

    def __repr__(self) -> str:
        return f"LatticeState(offset={self.offset}, width={self.width}, norm={norm(self):.6g})"

    # -- serialization -------------------------------------------------------

    def to_rows(self) -> list[tuple[int, float, float, float, float]]:
        a = self.amplitudes
        return [
            (int(x), float(a[i, 0].real), float(a[i, 0].imag), float(a[i, 1].real), float(a[i, 1].imag))
            for i, x in enumerate(self.positions)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "re_psi1", "im_psi1", "re_psi2", "im_psi2"])
        for x, *vals in self.to_rows():
            w.writerow([x] + ["%.17g" % v for v in vals])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LatticeState":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        if rows and rows[0][0] == "x":
            rows = rows[1:]
        return cls._from_rows([(int(r[0]), *map(float, r[1:5])) for r in rows])

    def to_json(self) -> str:
        return json.dumps({"offset": self.offset,
                           "sites": [list(r) for r in self.to_rows()]})

    @classmethod
    def from_json(cls, text: str) -> "LatticeState":
        data = json.loads(text)
        return cls._from_rows([tuple(r) for r in data["sites"]])

    @classmethod
    def _from_rows(cls, rows: Sequence[Sequence[float]]) -> "LatticeState":
        if not rows:
            raise ValueError("no sites")
        xs = [int(r[0]) for r in rows]
        start = min(xs)
        out = np.zeros((max(xs) - start + 1, 2), dtype=np.complex128)
        for x, r1, i1, r2, i2 in rows:
            out[int(x) - start] = (complex(r1, i1), complex(r2, i2))
        return cls(start, out)


def make_delta_state(x0: int, spin: Sequence[complex]) -> LatticeState:
    """State supported on the single site ``x0`` with spinor ``spin``."""
    spin = np.asarray(spin, dtype=np.complex128).reshape(2)
    if not np.any(spin != 0):
        raise ValueError("spin vector must be nonzero")
    return LatticeState(int(x0), spin.reshape(1, 2))


def make_gaussian_state(center: float, width: float, spin: Sequence[complex] = (1.0, 0.0),
                        momentum: float = 0.0, cutoff: float = 8.0) -> LatticeState:
    """Normalized Gaussian wave packet ``exp(-(x-c)^2 / (2 w^2) + i k0 x) * spin``.

    Sites farther than ``cutoff * width`` from the center are dropped (their
    envelope is below ``exp(-cutoff**2 / 2)``).
    """
    if width <= 0:
        raise ValueError("width must be positive")
    spin = np.asarray(spin, dtype=np.complex128).reshape(2)
    sn = np.linalg.norm(spin)
    if sn == 0:
        raise ValueError("spin vector must be nonzero")
    half = int(np.ceil(cutoff * width))
    lo = int(np.floor(center)) - half
    xs = np.arange(lo, int(np.ceil(center)) + half + 1)
    env = np.exp(-((xs - center) ** 2) / (2.0 * width ** 2) + 1j * momentum * xs)
    amps = env[:, None] * (spin / sn)[None, :]
    amps /= np.sqrt(np.sum(np.abs(amps) ** 2))
    return LatticeState(lo, amps)


def inner(phi: LatticeState, psi: LatticeState) -> complex:
    """``sum_x <phi(x), psi(x)>``, conjugate-linear in ``phi``."""
    lo = max(phi.offset, psi.offset)
    hi = min(phi.stop, psi.stop)
    if hi <= lo:
        return 0j
    a = phi.amplitudes[lo - phi.offset:hi - phi.offset]
    b = psi.amplitudes[lo - psi.offset:hi - psi.offset]
    return complex(np.vdot(a, b))


def norm(psi: LatticeState) -> float:
    return float(np.sqrt(psi.norm_squared()))


def position_distribution(psi: LatticeState) -> Mapping[int, float]:
    """Probability of each site of the support, ``x -> ||psi(x)||^2``.

    Raises
    ------
    NormalizationError
        If the state is not normalized to within 1e-10.
    """
    n = norm(psi)
    if abs(n - 1.0) > NORM_TOL:
        raise NormalizationError(f"state must be normalized, got norm {n!r}")
    return dict(zip(psi.positions.tolist(), psi.probabilities().tolist()))
