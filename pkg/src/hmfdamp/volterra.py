"""Linear Volterra equation ``y = K * y + F`` for the density modes.

Two independent solvers: a product-integration rule in time, and division by
``1 - Khat`` in frequency on a zero-padded axis.  ``linear_prediction`` builds
the equation the splitting scheme satisfies when the quadratic terms are
dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft as sfft

from .dynamics import SchemeSpec, StationaryState, shift_time
from .penrose import KernelSpec, kernel_K, penrose_check, tail_cutoff, transform_on_fft_grid
from .spectral import MixedField, fourier_coefficient


class VolterraError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class VolterraProblem:
    """``y(t) = int_0^t K(s(t) - s(sigma)) y(sigma) dsigma + F(t)`` on ``[0, T]``.

    ``forcing`` is a callable of t or an array of node values.  ``shift``
    optionally holds node values of a time map ``s`` (identity when absent).
    """

    kernel: Callable
    forcing: Callable | np.ndarray
    T: float
    dt: float
    shift: np.ndarray | None = None

    def __post_init__(self):
        if not (self.T > 0 and self.dt > 0):
            raise ValueError("T and dt must be positive")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-8 * max(1.0, n):
            raise ValueError(f"dt={self.dt} does not divide T={self.T}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def forcing_values(self) -> np.ndarray:
        if callable(self.forcing):
            return np.asarray(self.forcing(self.times), dtype=complex)
        vals = np.asarray(self.forcing, dtype=complex)
        if vals.shape != (self.n_steps + 1,):
            raise ValueError(f"forcing must have {self.n_steps + 1} node values")
        return vals


@dataclass
class VolterraSolution:
    t: np.ndarray
    y: np.ndarray
    method: str
    dt: float
    causality_residual: float = 0.0


def solve_time_domain(p: VolterraProblem, rule: str = "trapezoid") -> VolterraSolution:
    """Product-integration solve.

    ``rule="trapezoid"`` is the second-order rule with an implicit diagonal
    term; ``rule="rectangle"`` uses left endpoints only, which is exact when
    the kernel argument and the solution are constant on each ``[t_j, t_{j+1})``.
    """
    N = p.n_steps
    dt = p.dt
    F = p.forcing_values()
    y = np.zeros(N + 1, dtype=complex)
    if p.shift is None:
        lags = np.asarray(p.kernel(p.times), dtype=complex)
        row = lambda n: lags[n::-1]  # K(t_n - t_j), j = 0..n
    else:
        s = np.asarray(p.shift, dtype=float)
        if s.shape != (N + 1,):
            raise ValueError("shift must hold one value per node")
        row = lambda n: np.asarray(p.kernel(s[n] - s[: n + 1]), dtype=complex)

    if rule == "trapezoid":
        k0 = row(0)[0]
        diag = 1.0 - dt * k0 / 2
        if abs(diag) < 1e-12:
            raise VolterraError("1 - dt K(0)/2 vanishes: discretization is ill-posed")
        y[0] = F[0]
        for n in range(1, N + 1):
            kr = row(n)
            acc = 0.5 * kr[0] * y[0] + np.dot(kr[1:n], y[1:n])
            y[n] = (F[n] + dt * acc) / diag
    elif rule == "rectangle":
        y[0] = F[0]
        for n in range(1, N + 1):
            kr = row(n)
            y[n] = F[n] + dt * np.dot(kr[:n], y[:n])
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return VolterraSolution(p.times, y, f"time-{rule}", dt)


def solve_fourier_domain(
    p: VolterraProblem,
    kernel_spec: KernelSpec | None = None,
    kappa0: float = 0.1,
    pad: int = 4,
) -> VolterraSolution:
    """Solve via ``yhat = Fhat / (1 - Khat)`` on a zero-padded periodic axis.

    The padded axis covers ``[-pad T / 2, pad T / 2)`` (at least ``pad T`` long);
    the negative-time half should come back empty, which is reported as the
    causality residual.  ``Khat`` is the half-line transform of the kernel,
    taken from ``kernel_spec`` when given.
    """
    if p.shift is not None:
        raise ValueError("the Fourier solver needs a convolution kernel (no time map)")
    N = p.n_steps
    dt = p.dt
    F = p.forcing_values()
    M = sfft.next_fast_len(pad * (N + 1), real=False)
    if M % 2:
        M += 1
    kern = (lambda t: kernel_K(kernel_spec, t)) if kernel_spec is not None else p.kernel
    t_limit = kernel_spec.t_limit if kernel_spec is not None else np.inf
    t_cut = tail_cutoff(lambda t: np.asarray(kern(t), dtype=complex), t_limit=t_limit)
    khat = transform_on_fft_grid(lambda t: np.asarray(kern(t), dtype=complex), M, dt, t_cut)
    denom = 1.0 - khat
    if np.min(np.abs(denom)) < kappa0:
        raise VolterraError(f"|1 - Khat| drops below {kappa0} on the transform grid")

    samples = np.zeros(M, dtype=complex)
    samples[: N + 1] = F
    # F is cut off at 0 and T; trapezoid weights at the jumps
    samples[0] *= 0.5
    samples[N] *= 0.5
    yfull = np.fft.ifft(np.fft.fft(samples) / denom)
    y = yfull[: N + 1].copy()
    # nodal values at jumps come back as the mean of the one-sided limits
    y[0] = F[0]
    y[N] += F[N] / 2
    causal = float(np.max(np.abs(yfull[M // 2 :]))) if M // 2 < M else 0.0
    return VolterraSolution(p.times, y, "fourier", dt, causal)


@dataclass
class LinearPrediction:
    """Linearized scheme: ``Z`` is the kick-time mode, ``zeta`` the density mode at ``n h``."""

    t: np.ndarray
    Z: np.ndarray
    zeta: np.ndarray
    shift: np.ndarray


def linear_prediction(
    eta: StationaryState,
    g0: MixedField,
    scheme: SchemeSpec,
    T: float,
    n: int = 1,
    check_stability: bool = True,
) -> LinearPrediction:
    """Mode ``n`` of the splitting scheme with quadratic terms dropped.

    The kick of step m acts with the field frozen at ``Z_m = g_n(m h, n s_m)``
    for the whole step, so the linear recursion is the left-rectangle Volterra
    sum ``Z_N = F(s_N) + h sum_{m<N} K(n, s_N - s_m) Z_m`` with forcing
    ``F(xi) = g0_n(n xi)``.  The density mode follows from the same sum with
    ``s_N`` replaced by ``N h``.
    """
    if scheme.variant == "strang_ptp":
        raise ValueError("linear prediction is defined for single-kick schemes")
    if check_stability and not penrose_check(eta).passed:
        raise VolterraError("stationary state fails the Penrose check")
    spec = KernelSpec(n, eta)
    h = scheme.h
    N = int(round(T / h))
    if abs(N * h - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"h={h} does not divide T={T}")
    s = np.array([shift_time(scheme, m) for m in range(N + 1)])
    forcing = fourier_coefficient(g0, n, n * s)
    kern = lambda t: kernel_K(spec, t)
    prob = VolterraProblem(kern, forcing, N * h, h, shift=s)
    Z = solve_time_domain(prob, rule="rectangle").y
    t = np.arange(N + 1) * h
    zeta = np.asarray(fourier_coefficient(g0, n, n * t), dtype=complex)
    for j in range(1, N + 1):
        zeta[j] += h * np.dot(np.asarray(kern(t[j] - s[:j]), dtype=complex), Z[:j])
    return LinearPrediction(t, Z, zeta, s)


def continuous_prediction(eta: StationaryState, g0: MixedField, T: float, dt: float, n: int = 1) -> VolterraSolution:
    """Continuous-time linear mode (``s(t) = t``) by the trapezoid rule."""
    spec = KernelSpec(n, eta)
    forcing = lambda t: fourier_coefficient(g0, n, n * np.asarray(t))
    prob = VolterraProblem(lambda t: kernel_K(spec, t), forcing, T, dt)
    return solve_time_domain(prob)
