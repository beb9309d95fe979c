"""Memory kernel of the linearized mode equation, its half-line transform,
the Penrose stability check and Landau-root finding."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import StationaryState

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
# nodes and weights on [0, 1]
_GL_X = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


class PenroseError(RuntimeError):
    """Contour resolution failure or root-finding failure."""


def fourier_weight(n: int) -> float:
    """Fourier coefficients of ``P = cos``: 1/2 on k = +-1, zero elsewhere."""
    return 0.5 if abs(n) == 1 else 0.0


@dataclass(frozen=True, eq=False)
class KernelSpec:
    n: int
    eta: StationaryState
    eta_hat: Callable | None = None

    def hat(self, xi):
        if self.eta_hat is not None:
            return self.eta_hat(np.asarray(xi, dtype=float))
        return self.eta.hat(xi)

    @property
    def has_closed_form(self) -> bool:
        return self.eta_hat is not None or self.eta.closed_form_hat is not None

    @property
    def t_limit(self) -> float:
        # quadrature transforms of sampled profiles recur at 2 pi / dv
        return np.inf if self.has_closed_form else np.pi / self.eta.grid.dv


def kernel_K(spec: KernelSpec, t):
    """``K(n, t) = -n^2 p_n t eta_0(n t)`` (real for even profiles)."""
    n = spec.n
    t_arr = np.asarray(t, dtype=float)
    pn = fourier_weight(n)
    if pn == 0.0:
        out = np.zeros_like(t_arr, dtype=complex)
    else:
        out = -(n**2) * pn * t_arr * spec.hat(n * t_arr)
    out = np.asarray(out, dtype=complex)
    if np.all(np.abs(out.imag) <= 1e-15 * (1 + np.abs(out.real))):
        out = out.real
    return out.item() if t_arr.ndim == 0 else out


def tail_cutoff(kernel: Callable, growth: float = 0.0, tol: float = 1e-10, t_limit: float = np.inf) -> float:
    """Truncation time for ``int_0^inf exp(growth t) K(t) dt``.

    Uses the envelope ``|K(t)| <= C <t>^-4``: ``C`` is estimated on
    ``[T, max(4T, 100)]`` and the tail ``C / (3 T^3)`` must fall below ``tol``.
    """
    T = 8.0
    while True:
        hi = max(4 * T, 100.0)
        if hi > t_limit:
            hi = t_limit
        if T >= hi:
            return float(t_limit)
        ts = np.linspace(T, hi, 4001)
        env = np.abs(kernel(ts)) * np.exp(growth * ts) * (1 + ts**2) ** 2
        if np.max(env) / (3 * T**3) < tol:
            return T
        T *= 2
        if T > 1e5:
            raise PenroseError("kernel tail does not decay; cannot truncate transform")


def _quad_half_line(kvals_fn: Callable, tau: np.ndarray, t_cut: float, width: float) -> np.ndarray:
    n_panels = max(1, int(np.ceil(t_cut / width)))
    w = t_cut / n_panels
    starts = np.arange(n_panels) * w
    nodes = (starts[:, None] + w * _GL_X[None, :]).ravel()
    weights = np.tile(w * _GL_W, n_panels) * kvals_fn(nodes)
    out = np.empty(tau.shape, dtype=complex)
    chunk = max(1, int(2_000_000 // nodes.size))
    for lo in range(0, tau.size, chunk):
        tc = tau[lo : lo + chunk]
        out[lo : lo + chunk] = np.exp(-1j * np.multiply.outer(tc, nodes)) @ weights
    return out


def half_line_transform(kernel: Callable, tau, t_cut: float, rtol: float = 1e-8) -> np.ndarray:
    """``int_0^t_cut exp(-i tau t) K(t) dt`` by composite Gauss-Legendre with panel halving."""
    tau = np.atleast_1d(np.asarray(tau, dtype=complex))
    width = min(0.5, 1.5 / max(1.0, float(np.max(np.abs(tau.real)))))
    prev = _quad_half_line(kernel, tau, t_cut, width)
    for _ in range(8):
        width /= 2
        cur = _quad_half_line(kernel, tau, t_cut, width)
        scale = np.maximum(np.abs(cur), 1e-6)
        if np.all(np.abs(cur - prev) <= rtol * scale):
            return cur
        prev = cur
    raise PenroseError("half-line quadrature did not reach the requested tolerance")


def khat1(spec: KernelSpec, tau, rtol: float = 1e-8):
    """``K1hat(n, tau) = int_0^inf exp(-i tau t) K(n, t) dt`` for ``Im tau <= 0``."""
    tau_arr = np.asarray(tau, dtype=complex)
    if np.any(tau_arr.imag > 0):
        raise ValueError("khat1 is defined on the closed lower half-plane only (Im tau <= 0)")
    return _khat(spec, tau_arr, rtol)


def khat1_continued(spec: KernelSpec, tau, rtol: float = 1e-8):
    """Analytic continuation into ``Im tau > 0``; needs a closed-form ``eta_0``.

    With a profile transform decaying faster than any exponential the
    defining integral converges for every complex ``tau``.
    """
    if not spec.has_closed_form:
        raise ValueError("continuation past the real axis needs a closed-form eta_0")
    return _khat(spec, np.asarray(tau, dtype=complex), rtol)


def _khat(spec: KernelSpec, tau_arr: np.ndarray, rtol: float):
    kern = lambda t: kernel_K(spec, t)
    growth = max(0.0, float(np.max(tau_arr.imag))) if tau_arr.size else 0.0
    t_cut = tail_cutoff(kern, growth, t_limit=spec.t_limit)
    out = half_line_transform(kern, tau_arr.ravel(), t_cut, rtol).reshape(tau_arr.shape)
    return complex(out) if tau_arr.ndim == 0 else out


def transform_on_fft_grid(kernel: Callable, n_points: int, dt: float, t_cut: float, rtol: float = 1e-8) -> np.ndarray:
    """Half-line transform at ``tau_m = 2 pi fftfreq(n_points, dt)``.

    Composite Gauss-Legendre panels whose starts are aligned with the period
    ``n_points * dt``; the sum over panels is then a DFT for each node offset,
    evaluated by FFT.  Panels past one period fold back exactly.
    """
    period = n_points * dt
    tau = 2 * np.pi * np.fft.fftfreq(n_points, dt)
    m = np.rint(tau * period / (2 * np.pi)).astype(np.int64)

    def evaluate(n_fft: int) -> np.ndarray:
        w = period / n_fft
        n_panels = int(np.ceil(t_cut / w))
        p = np.arange(n_panels)
        out = np.zeros(n_points, dtype=complex)
        for xq, wq in zip(_GL_X, _GL_W):
            acc = np.zeros(n_fft, dtype=complex)
            np.add.at(acc, p % n_fft, kernel(p * w + xq * w))
            A = np.fft.fft(acc)
            out += w * wq * np.exp(-1j * tau * w * xq) * A[m % n_fft]
        return out

    n_fft = int(2 ** np.ceil(np.log2(max(16.0, period * (np.pi / dt) / 1.5))))
    prev = evaluate(n_fft)
    for _ in range(6):
        n_fft *= 2
        cur = evaluate(n_fft)
        if np.all(np.abs(cur - prev) <= rtol * np.maximum(np.abs(cur), 1e-6)):
            return cur
        prev = cur
    raise PenroseError("grid transform did not converge")


def khat1_on_fft_grid(spec: KernelSpec, n_points: int, dt: float, rtol: float = 1e-8) -> np.ndarray:
    kern = lambda t: kernel_K(spec, t)
    t_cut = tail_cutoff(kern, t_limit=spec.t_limit)
    return transform_on_fft_grid(kern, n_points, dt, t_cut, rtol)


@dataclass
class PenroseReport:
    kappa: float
    zero_count: int
    passed: bool
    threshold: float
    tau: np.ndarray
    values: dict = field(default_factory=dict)
    winding: dict = field(default_factory=dict)
    note: str = (
        "inf over Im tau <= 0 reduced to the real-axis minimum plus a zero count: "
        "a holomorphic nonvanishing function tending to 1 at infinity attains its "
        "infimum over the closed lower half-plane on the real axis"
    )


def _contour(radius: float, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    n_seg = n_samples // 2
    seg = np.linspace(-radius, radius, n_seg)
    theta = np.linspace(0.0, np.pi, n_samples - n_seg + 1)[1:]
    arc = radius * np.exp(-1j * theta)
    return seg, arc


def winding_number(loop: np.ndarray) -> float:
    """Winding of a closed sampled curve about 0, with a resolution check.

    The phase is accumulated from the increments ``Im(2 df / (f_next + f))``,
    which match the exact phase steps to third order in the step.  On an
    under-resolved contour the sum drifts away from an integer, and the
    unwrapped (always integer) count disagrees with it.
    """
    a, b = loop[:-1], loop[1:]
    inc = float(np.sum(np.imag(2.0 * (b - a) / (b + a)))) / (2 * np.pi)
    exact = float(np.sum(np.angle(b / a))) / (2 * np.pi)
    if abs(inc - round(exact)) > 0.1:
        raise PenroseError(f"winding number {inc:.3f} is not an integer; refine the contour")
    return inc


def penrose_check(
    eta: StationaryState,
    threshold: float = 0.1,
    tau_max: float = 50.0,
    radius: float = 50.0,
    n_samples: int = 4096,
) -> PenroseReport:
    """Real-axis minimum of ``|1 - K1hat|`` and zero count in the lower half-plane.

    The contour runs along ``[-R, R]`` and back over the lower semicircle
    (clockwise), so each enclosed zero contributes a winding of -1.
    """
    seg, arc = _contour(radius, n_samples)
    real_tau = np.linspace(-tau_max, tau_max, n_samples // 2) if tau_max != radius else seg
    values, winding = {}, {}
    kappa = np.inf
    zeros = 0
    for n in (1, -1):
        spec = KernelSpec(n, eta)
        d_seg = 1.0 - khat1(spec, seg.astype(complex))
        d_arc = 1.0 - khat1(spec, arc)
        d_real = d_seg if real_tau is seg else 1.0 - khat1(spec, real_tau.astype(complex))
        loop = np.concatenate([d_seg, d_arc, d_seg[:1]])
        w = winding_number(loop)
        values[n] = d_real
        winding[n] = w
        kappa = min(kappa, float(np.min(np.abs(d_real))))
        zeros += -int(round(w))
    passed = zeros == 0 and kappa >= threshold
    return PenroseReport(kappa, zeros, passed, threshold, real_tau, values, winding)


def _secant(func: Callable, z0: complex, z1: complex, max_iter: int) -> complex | None:
    f0, f1 = func(z0), func(z1)
    for _ in range(max_iter):
        denom = f1 - f0
        if denom == 0:
            return z1 if abs(f1) < 1e-12 else None
        z2 = z1 - f1 * (z1 - z0) / denom
        if not np.isfinite(z2) or abs(z2) > 1e3:
            return None
        z0, f0 = z1, f1
        z1, f1 = z2, func(z2)
        if abs(z1 - z0) <= 1e-13 * max(1.0, abs(z1)):
            return z1 if abs(f1) < 1e-8 else None
    return None


def landau_root(
    target: StationaryState | KernelSpec,
    n: int = 1,
    guess: complex | None = None,
    max_iter: int = 100,
    penrose: PenroseReport | None = None,
) -> complex:
    """Least-damped zero of ``1 - K1hat(n, .)`` continued into ``Im tau > 0``.

    ``zeta_n(t)`` then behaves like ``exp(i tau t)``: decay rate ``Im tau``,
    frequency ``Re tau``.  For ``n = 1`` the root with ``Re tau >= 0`` is
    returned, for ``n = -1`` the mirror one.
    """
    spec = target if isinstance(target, KernelSpec) else KernelSpec(n, target)
    n = spec.n
    func = lambda z: complex(1.0 - khat1_continued(spec, complex(z)))
    sign = 1.0 if n > 0 else -1.0
    if guess is not None:
        starts = [complex(guess)]
    else:
        re = sign * np.linspace(0.0, 6.0, 25)
        im = np.linspace(-2.0, 4.0, 25)
        grid = re[:, None] + 1j * im[None, :]
        mag = np.abs(1.0 - khat1_continued(spec, grid))
        starts = []
        for i in range(1, grid.shape[0] - 1):
            for j in range(1, grid.shape[1] - 1):
                if mag[i, j] <= mag[i - 1 : i + 2, j - 1 : j + 2].min():
                    starts.append(grid[i, j])
        starts.sort(key=lambda z: abs(z.imag))
    roots = []
    for z in starts:
        r = _secant(func, z, z + 1e-3 * (1 + 1j), max_iter)
        if r is not None and sign * r.real >= -1e-10:
            roots.append(r)
    if not roots:
        raise PenroseError("no root of 1 - K1hat found (secant did not converge)")
    root = min(roots, key=lambda z: z.imag)
    if penrose is not None and penrose.passed and root.imag <= 0:
        raise PenroseError(f"root {root} has Im <= 0 although the Penrose check passed")
    return complex(root)
