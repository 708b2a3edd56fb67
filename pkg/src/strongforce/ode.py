"""Embedded Dormand-Prince 5(4) stepper with continuous extension.

The stepper is deliberately small: callers own the loop so that they can
monitor invariants, locate events on the dense output and decide what a
step-size collapse means for their problem.
"""

from __future__ import annotations

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array(A[6] + [0.0])
A = [np.array(row) for row in A]
# fifth-order minus embedded fourth-order weights
E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Shampine's interpolation polynomial coefficients, columns multiply theta**1..4
P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class DenseStep:
    """Quartic interpolant valid on ``[t0, t0 + h]``."""

    __slots__ = ("t0", "h", "y0", "q")

    def __init__(self, t0, h, y0, k):
        self.t0 = t0
        self.h = h
        self.y0 = y0
        self.q = k.T @ P

    @property
    def t1(self):
        return self.t0 + self.h

    def __call__(self, t):
        theta = (t - self.t0) / self.h
        powers = np.array([theta, theta**2, theta**3, theta**4])
        return self.y0 + self.h * (self.q @ powers)


class DormandPrince:
    """Adaptive integrator for ``y' = f(t, y)`` advanced one step at a time.

    Parameters
    ----------
    fun : callable
        ``fun(t, y) -> ndarray``.
    t0 : float
    y0 : array_like
    rtol, atol : float
        Local error is held below ``atol + rtol * max(|y_old|, |y_new|)`` in
        the RMS norm.
    h_init : float, optional
        First trial step; estimated from the derivative when omitted.
    h_max : float
    """

    def __init__(self, fun, t0, y0, rtol=1e-10, atol=1e-12, h_init=None, h_max=np.inf):
        self.fun = fun
        self.t = float(t0)
        self.y = np.array(y0, dtype=float)
        self.rtol = rtol
        self.atol = atol
        self.h_max = h_max
        self.f = np.asarray(fun(self.t, self.y), dtype=float)
        self.h = h_init if h_init is not None else self._initial_step()
        self.nfev = 1
        self.naccept = 0
        self.nreject = 0

    def _initial_step(self):
        scale = self.atol + self.rtol * np.abs(self.y)
        d0 = np.sqrt(np.mean((self.y / scale) ** 2))
        d1 = np.sqrt(np.mean((self.f / scale) ** 2))
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        return min(h, self.h_max)

    def _attempt(self, h):
        y, f, t = self.y, self.f, self.t
        k = np.empty((7, y.size))
        k[0] = f
        for s in range(1, 7):
            dy = h * (A[s] @ k[:s])
            k[s] = self.fun(t + C[s] * h, y + dy)
        y_new = y + h * (B[:6] @ k[:6])
        k[6] = self.fun(t + h, y_new)
        self.nfev += 6
        err = h * (E @ k)
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return y_new, k, float(np.sqrt(np.mean((err / scale) ** 2)))

    def step(self, h_floor=0.0):
        """Take one accepted step.

        Returns the :class:`DenseStep` of the accepted step, or ``None`` when
        the controller asks for a step shorter than ``h_floor``.
        """
        h = min(self.h, self.h_max)
        while True:
            if h < h_floor:
                self.h = h
                return None
            y_new, k, err = self._attempt(h)
            if err <= 1.0 and np.all(np.isfinite(y_new)):
                break
            self.nreject += 1
            factor = SAFETY * err ** (-0.2) if np.isfinite(err) and err > 0 else MIN_FACTOR
            h *= max(MIN_FACTOR, min(factor, 0.9))
        dense = DenseStep(self.t, h, self.y, k)
        self.t += h
        self.y = y_new
        self.f = k[6]
        self.naccept += 1
        factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** (-0.2))
        self.h = min(h * max(factor, MIN_FACTOR), self.h_max)
        return dense


def bisect_event(g, dense, lo, hi, g_lo, tol=1e-10, maxiter=200):
    """Locate a sign change of ``g(t, y)`` on one dense step by bisection."""
    for _ in range(maxiter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        g_mid = g(mid, dense(mid))
        if (g_mid < 0) == (g_lo < 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return hi
