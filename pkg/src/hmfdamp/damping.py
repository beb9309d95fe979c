"""Post-processing of trajectories: mode series, damping fits, weighted norms, limits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import StationaryState
from .spectral import MixedField, WeightedNormSpec, fourier_coefficient, sobolev_norm


@dataclass
class ModeSeries:
    times: np.ndarray
    zeta: dict
    Z: dict
    s_times: np.ndarray
    norms: dict

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        self.times = t


def extract_modes(trajectory) -> ModeSeries:
    if trajectory is None or len(trajectory.times) == 0:
        raise ValueError("empty trajectory")
    return ModeSeries(
        trajectory.times,
        {k: np.asarray(v) for k, v in trajectory.zeta.items()},
        {k: np.asarray(v) for k, v in trajectory.Z.items()},
        np.asarray(trajectory.s_times),
        dict(trajectory.norms),
    )


@dataclass(frozen=True)
class DampingFit:
    model: str
    window: tuple
    rate: float
    frequency: float
    r_squared: float
    n_points: int


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def envelope_maxima(t: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Three-point local maxima of ``a``, refined by a parabola through ``log a``."""
    idx = np.nonzero((a[1:-1] >= a[:-2]) & (a[1:-1] >= a[2:]))[0] + 1
    tp, ap = [], []
    for i in idx:
        if min(a[i - 1], a[i], a[i + 1]) <= 0:
            tp.append(t[i])
            ap.append(a[i])
            continue
        y0, y1, y2 = np.log(a[i - 1 : i + 2])
        denom = y0 - 2 * y1 + y2
        if denom >= 0:
            tp.append(t[i])
            ap.append(a[i])
            continue
        d = 0.5 * (y0 - y2) / denom
        dt = 0.5 * (t[i + 1] - t[i - 1])
        tp.append(t[i] + d * dt)
        ap.append(np.exp(y1 - 0.25 * (y0 - y2) * d))
    return np.array(tp), np.array(ap)


def oscillation_frequency(t: np.ndarray, z: np.ndarray, peaks: np.ndarray | None = None) -> float:
    """Angular frequency from zero crossings of ``Re z`` (spacing ``pi / omega``).

    Falls back to the spacing of envelope peaks when ``Re z`` has fewer than
    two sign changes (for example when only ``|z|`` is supplied).
    """
    x = np.real(z)
    sgn = np.sign(x)
    cross = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    if cross.size >= 2:
        tc = t[cross] - x[cross] * (t[cross + 1] - t[cross]) / (x[cross + 1] - x[cross])
        return float(np.pi * (tc.size - 1) / (tc[-1] - tc[0]))
    if peaks is not None and peaks.size >= 2 and peaks[-1] > peaks[0]:
        return float(np.pi * (peaks.size - 1) / (peaks[-1] - peaks[0]))
    return 0.0


def fit_damping(series, window: tuple[float, float], model: str = "exponential", k: int = 1) -> DampingFit:
    """Fit the decay of ``zeta_k`` on ``window``.

    ``series`` is a ModeSeries or a pair ``(t, z)``.  The exponential model
    returns the rate ``gamma`` in ``|zeta| ~ exp(-gamma t)`` from the local
    maxima; the algebraic model returns the exponent ``p`` in
    ``|zeta| ~ <t>^p`` from all samples.
    """
    if isinstance(series, ModeSeries):
        t, z = series.times, series.zeta[k]
    else:
        t, z = series
    t = np.asarray(t, dtype=float)
    z = np.asarray(z)
    t0, t1 = window
    sel = (t >= t0) & (t <= t1)
    tw, zw = t[sel], z[sel]
    a = np.abs(zw)
    if model == "exponential":
        tp, ap = envelope_maxima(tw, a)
        if tp.size < 10:
            raise ValueError(f"window {window} holds {tp.size} envelope maxima; at least 10 needed")
        if np.any(ap <= 0):
            raise ValueError("nonpositive envelope values in window")
        slope, _, r2 = _linfit(tp, np.log(ap))
        freq = oscillation_frequency(tw, zw, tp)
        return DampingFit(model, (t0, t1), -slope, freq, r2, int(tp.size))
    if model == "algebraic":
        if tw.size < 10:
            raise ValueError(f"window {window} holds {tw.size} samples; at least 10 needed")
        if np.any(a <= 0):
            raise ValueError("nonpositive values in window")
        slope, _, r2 = _linfit(0.5 * np.log1p(tw**2), np.log(a))
        freq = oscillation_frequency(tw, zw)
        return DampingFit(model, (t0, t1), slope, freq, r2, int(tw.size))
    raise ValueError(f"unknown model {model!r}")


@dataclass
class NormSeries:
    times: np.ndarray
    N: np.ndarray
    M: np.ndarray
    Q: np.ndarray

    @property
    def final_Q(self) -> float:
        return float(self.Q[-1])

    def at(self, T: float) -> float:
        """``Q`` at the last recorded time not after ``T``."""
        i = int(np.searchsorted(self.times, T + 1e-9 * max(1.0, T), side="right")) - 1
        if i < 0:
            raise ValueError(f"no sample at or before T={T}")
        return float(self.Q[i])


def weighted_norm_series(trajectory, s: int, nu: float) -> NormSeries:
    """Running suprema ``N_{T,s,nu}``, ``M_{T,s-1}`` and ``Q_{T,s,nu}`` over the step grid."""
    try:
        hs = np.asarray(trajectory.norms[(s, nu)])
        hs4 = np.asarray(trajectory.norms[(max(s - 4, 0), nu)])
    except KeyError as exc:
        raise KeyError(f"trajectory lacks the norm {exc.args[0]}; record it with norm_specs") from None
    t = np.asarray(trajectory.times)
    jt = np.sqrt(1.0 + t**2)
    zmax = np.maximum(np.abs(trajectory.Z[1]), np.abs(trajectory.Z[-1]))
    N = np.maximum.accumulate(hs / jt**3)
    M = np.maximum.accumulate(jt ** (s - 1) * zmax)
    Q = N + M + np.maximum.accumulate(hs4)
    return NormSeries(t, N, M, Q)


def weak_limit_eta(g_inf: MixedField, epsilon: float, eta: StationaryState) -> np.ndarray:
    """``eta + eps * (x-average of g_inf)`` sampled on the grid."""
    return np.asarray(eta.profile) + epsilon * np.real(g_inf.mode(0))


def weak_residual(g: MixedField, g_inf: MixedField, epsilon: float, xi) -> np.ndarray:
    """``|f0^n(xi) - eta_inf(xi)|``; only the k = 0 mode enters, which transport leaves alone."""
    return epsilon * np.abs(fourier_coefficient(g, 0, xi) - fourier_coefficient(g_inf, 0, xi))


@dataclass
class ScatterReport:
    g_inf: MixedField
    checkpoints: np.ndarray
    cauchy_errors: np.ndarray
    successive: np.ndarray
    fitted_decay_exponent: float
    eta_inf: np.ndarray
    weak_residuals: np.ndarray
    norm: WeightedNormSpec


def scattering_limit(trajectory, r: int = 1, nu: float = 1.0, checkpoints=None, xi=(0.5, 1.0, 2.0)) -> ScatterReport:
    """Estimate the scattering state from the snapshots at ``checkpoints``.

    ``g_inf`` is the last checkpoint field.  ``cauchy_errors[i]`` is
    ``||g(t_i) - g_inf||`` and ``successive[i]`` is ``||g(t_i) - g(t_{i+1})||``,
    the latter fitted against ``t_i`` on log-log axes.  ``weak_residuals``
    has one row per checkpoint and one column per ``xi``.
    """
    snaps = trajectory.snapshots
    times = sorted(snaps) if checkpoints is None else [float(t) for t in checkpoints]
    if len(times) < 3:
        raise ValueError(f"scattering limit needs at least 3 checkpoints, got {len(times)}")
    missing = [t for t in times if t not in snaps]
    if missing:
        raise KeyError(f"no snapshots at {missing}")
    spec = WeightedNormSpec(r, nu)
    fields = [snaps[t] for t in times]
    g_inf = fields[-1]
    cauchy = np.array([sobolev_norm(g - g_inf, spec) for g in fields[:-1]])
    succ = np.array([sobolev_norm(a - b, spec) for a, b in zip(fields[:-1], fields[1:])])
    tt = np.array(times)
    if np.all(succ > 0):
        slope, _, _ = _linfit(np.log(tt[:-1]), np.log(succ))
    else:
        slope = float("nan")
    xi_arr = np.asarray(xi, dtype=float)
    weak = np.array([weak_residual(g, g_inf, trajectory.epsilon, xi_arr) for g in fields])
    eta_inf = weak_limit_eta(g_inf, trajectory.epsilon, trajectory.eta)
    return ScatterReport(g_inf, tt, cauchy, succ, slope, eta_inf, weak, spec)
