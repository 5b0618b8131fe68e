"""Independent reference implementations used only by the tests.

Nothing here imports the evolution code: coins are rebuilt from their
defining formula with ``cmath`` and walks are run either by summing over
paths or by multiplying explicit dense matrices.
"""

import cmath
import itertools
import math

import numpy as np


def coin_c0(a, b, alpha=0.0, beta=0.0, delta=0.0):
    e = cmath.exp
    return [[a * e(1j * alpha), b * e(1j * beta)],
            [-b * e(-1j * beta + 1j * delta), a * e(-1j * alpha + 1j * delta)]]


def coin_at(c0, xi):
    """``diag(e^{-i xi}, e^{i xi}) C0`` as nested lists."""
    top, bot = cmath.exp(-1j * xi), cmath.exp(1j * xi)
    return [[top * c0[0][0], top * c0[0][1]], [bot * c0[1][0], bot * c0[1][1]]]


def path_sum(c0, xi, x0, spin, T):
    """Amplitudes after ``T`` steps of ``U = S C`` by summing over all ``2^T`` spin paths.

    Spin 0 moves one site left after the coin, spin 1 one site right.
    ``xi`` maps a site to its coin phase.  Returns ``{x: [amp0, amp1]}``.
    """
    out = {}
    for start in (0, 1):
        if spin[start] == 0:
            continue
        for path in itertools.product((0, 1), repeat=T):
            amp = complex(spin[start])
            x, prev = x0, start
            for s in path:
                c = coin_at(c0, xi(x))
                amp *= c[s][prev]
                x += -1 if s == 0 else 1
                prev = s
            cell = out.setdefault(x, [0j, 0j])
            cell[prev] += amp
    return out


def path_sum_distribution(c0, xi, x0, spin, T):
    amps = path_sum(c0, xi, x0, spin, T)
    return {x: abs(a[0]) ** 2 + abs(a[1]) ** 2 for x, a in amps.items()}


def dense_walk_matrix(c0, xi, lo, hi):
    """Dense ``S C`` on sites ``lo..hi`` (index ``2*(x-lo) + s``); edges leak, so keep states inside."""
    n = hi - lo + 1
    c0 = np.array(c0, dtype=complex)
    U = np.zeros((2 * n, 2 * n), dtype=complex)
    for i in range(n):
        x = lo + i
        c = np.array(coin_at(c0.tolist(), xi(x)))
        for s_out in (0, 1):
            target = i - 1 if s_out == 0 else i + 1
            if not 0 <= target < n:
                continue
            for s_in in (0, 1):
                U[2 * target + s_out, 2 * i + s_in] += c[s_out, s_in]
    return U


def hadamard_c0():
    r = 1 / math.sqrt(2)
    return coin_c0(r, r, 0.0, 0.0, math.pi)
