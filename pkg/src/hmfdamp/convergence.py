"""Order ladders against a refined Strang reference.

The reference is stepped once and its ``f`` is stored on the coarsest step
grid of the ladder; every ladder run is compared there, so no temporal
interpolation is needed.  Ladder runs are independent and run on a thread
pool capped by ``HMFDAMP_THREADS``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .damping import scattering_limit
from .dynamics import SchemeSpec, SimState, StationaryState, free_transport, step
from .spectral import MixedField, WeightedNormSpec, sobolev_norm


class LadderError(ValueError):
    pass


def max_workers() -> int:
    raw = os.environ.get("HMFDAMP_THREADS", "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"HMFDAMP_THREADS must be an integer, got {raw!r}") from None
        return max(1, n)
    return max(1, min(4, os.cpu_count() or 1))


def _ratio(a: float, b: float, what: str) -> int:
    """Integer ``a / b`` or an error (exact rational check with a float tolerance)."""
    q = a / b
    n = int(round(q))
    if n < 1 or abs(q - n) > 1e-9 * max(1.0, q):
        raise LadderError(f"{what}: {a!r} is not an integer multiple of {b!r}")
    return n


@dataclass(frozen=True, eq=False)
class LadderSpec:
    """A step-size ladder sharing grid, eps, eta and r0."""

    h_values: tuple
    T: float
    variant: str
    eta: StationaryState
    r0: MixedField
    epsilon: float
    error_norm: WeightedNormSpec = WeightedNormSpec(1, 1.0)
    ref_refinement: int = 16
    checkpoints: tuple = (5.0, 10.0, 20.0, 40.0)

    def __post_init__(self):
        hs = tuple(float(h) for h in self.h_values)
        if len(hs) < 3:
            raise LadderError(f"ladder needs at least 3 step sizes, got {len(hs)}")
        if any(h <= 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
            raise LadderError("ladder step sizes must be positive and strictly decreasing")
        if self.T <= 0:
            raise LadderError("T must be positive")
        for h in hs:
            _ratio(self.T, h, "T")
        if self.ref_refinement < 1:
            raise LadderError("ref_refinement must be >= 1")
        object.__setattr__(self, "h_values", hs)
        SchemeSpec(self.variant, hs[0])  # validates the variant name

    @property
    def h_ref(self) -> float:
        return self.h_values[-1] / self.ref_refinement

    @property
    def coarse_times(self) -> np.ndarray:
        """Multiples of the largest step in ``(0, T]``."""
        n = _ratio(self.T, self.h_values[0], "T")
        return np.arange(1, n + 1) * self.h_values[0]


@dataclass
class OrderReport:
    h: np.ndarray
    errors: np.ndarray
    slope: float
    r_squared: float
    reference: str
    inconclusive: bool = False
    note: str = ""
    extra: dict = field(default_factory=dict)


def fit_slope(h, err) -> tuple[float, float]:
    x = np.log(np.asarray(h, dtype=float))
    y = np.log(np.asarray(err, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    return float(slope), (1.0 - float(np.sum(resid**2)) / ss) if ss > 0 else 1.0


def _report(h, errors, reference: str, extra=None) -> OrderReport:
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    extra = extra or {}
    if np.all(errors <= 1e-12):
        return OrderReport(h, errors, float("nan"), float("nan"), reference, False, "errors at rounding level", extra)
    if np.any(errors <= 0) or not np.all(np.diff(errors) < 0):
        slope, r2 = fit_slope(h, np.maximum(errors, np.finfo(float).tiny))
        return OrderReport(h, errors, slope, r2, reference, True, "errors not monotone in h; slope not trustworthy", extra)
    slope, r2 = fit_slope(h, errors)
    return OrderReport(h, errors, slope, r2, reference, False, "", extra)


@dataclass
class ReferenceSolution:
    """Refined-Strang ``f`` stored at the coarse times (and at t = 0)."""

    scheme: SchemeSpec
    times: np.ndarray
    f: list

    def at(self, t: float) -> MixedField:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, t):
            raise KeyError(f"reference not stored at t={t}")
        return self.f[i]

    def describe(self) -> str:
        return f"strang h_ref={self.scheme.h:.6g}"


def _initial(spec_eta: StationaryState, r0: MixedField, eps: float, scheme: SchemeSpec) -> SimState:
    return SimState(spec_eta.field + r0 * eps, 0, eps, spec_eta, scheme)


def _march(state: SimState, n_each: int, count: int, visit) -> SimState:
    """Take ``count`` blocks of ``n_each`` steps, calling ``visit(block, state)`` after each."""
    for b in range(1, count + 1):
        for _ in range(n_each):
            state = step(state)
        visit(b, state)
    return state


def reference_solution(spec: LadderSpec, h_ref: float | None = None, T: float | None = None) -> ReferenceSolution:
    h_ref = spec.h_ref if h_ref is None else h_ref
    T = spec.T if T is None else T
    scheme = SchemeSpec("strang", h_ref)
    coarse = spec.h_values[0]
    per = _ratio(coarse, h_ref, "coarse step")
    count = _ratio(T, coarse, "T")
    state = _initial(spec.eta, spec.r0, spec.epsilon, scheme)
    stored = [state.f]
    _march(state, per, count, lambda b, s: stored.append(s.f))
    return ReferenceSolution(scheme, np.arange(count + 1) * coarse, stored)


def _frame_difference(fa: MixedField, fb: MixedField, t: float, eps: float) -> MixedField:
    """Streaming-frame difference ``g_a - g_b`` (raw f-difference pulled back when eps = 0)."""
    d = free_transport(fa - fb, -t)
    return d / eps if eps != 0 else d


def _ladder_runs(spec: LadderSpec, ref: ReferenceSolution, T: float, measure) -> list:
    """Run every ladder entry to ``T``; ``measure(h, t, f_h, f_ref)`` is called at each coarse time."""
    coarse = spec.h_values[0]
    count = _ratio(T, coarse, "T")

    def one(h):
        scheme = SchemeSpec(spec.variant, h)
        per = _ratio(coarse, h, "coarse step")
        state = _initial(spec.eta, spec.r0, spec.epsilon, scheme)
        out = []
        _march(state, per, count, lambda b, s: out.append(measure(h, b * coarse, s.f, ref.at(b * coarse))))
        return out

    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        return list(pool.map(one, spec.h_values))


def order_study(spec: LadderSpec, reference: ReferenceSolution | None = None) -> OrderReport:
    """``sup_t ||g_h(t) - g_ref(t)||`` over the coarse times, per ladder entry."""
    ref = reference or reference_solution(spec)
    norm = spec.error_norm

    def measure(h, t, fh, fr):
        return sobolev_norm(_frame_difference(fh, fr, t, spec.epsilon), norm)

    runs = _ladder_runs(spec, ref, spec.T, measure)
    errors = [max(r) for r in runs]
    return _report(spec.h_values, errors, ref.describe(), {"norm": (norm.s, norm.nu), "T": spec.T})


@dataclass
class _SnapshotView:
    snapshots: dict
    epsilon: float
    eta: StationaryState


def _limit(spec: LadderSpec, fields: dict) -> MixedField:
    view = _SnapshotView(fields, spec.epsilon, spec.eta)
    return scattering_limit(view, spec.error_norm.s, spec.error_norm.nu, checkpoints=sorted(fields)).g_inf


def limit_state_study(spec: LadderSpec, reference: ReferenceSolution | None = None) -> OrderReport:
    """``||g_h^inf - g_ref^inf||`` with limits taken at the last checkpoint (``T``)."""
    ref = reference or reference_solution(spec)
    cps = [t for t in spec.checkpoints if t <= spec.T + 1e-9]
    if len(cps) < 3:
        raise LadderError("limit-state study needs at least 3 checkpoints up to T")
    for t in cps:
        _ratio(t, spec.h_values[0], "checkpoint")

    def g_of(f, t):
        return _frame_difference(f, spec.eta.field, t, spec.epsilon) if spec.epsilon != 0 else free_transport(f - f, -t)

    def is_cp(t):
        return any(abs(t - c) <= 1e-9 * max(1.0, c) for c in cps)

    def measure(h, t, fh, fr):
        return (t, g_of(fh, t)) if is_cp(t) else None

    runs = _ladder_runs(spec, ref, spec.T, measure)
    ref_fields = {float(t): g_of(ref.at(t), t) for t in cps}
    g_ref = _limit(spec, ref_fields)
    errors = []
    for r in runs:
        fields = {}
        for item in r:
            if item is not None:
                t, g = item
                fields[min(cps, key=lambda c: abs(c - t))] = g
        errors.append(sobolev_norm(_limit(spec, fields) - g_ref, spec.error_norm))
    return _report(spec.h_values, errors, ref.describe(), {"norm": (spec.error_norm.s, spec.error_norm.nu), "T": spec.T})


@dataclass
class GrowthReport:
    h: np.ndarray
    T_values: np.ndarray
    sup_errors: np.ndarray  # shape (len(h), len(T_values))
    exponents: np.ndarray
    sigma: int
    reference: str

    def ratio(self, i: int = 0) -> float:
        """``err(T_last) / err(T_first)`` for ladder entry ``i``."""
        return float(self.sup_errors[i, -1] / self.sup_errors[i, 0]) if self.sup_errors[i, 0] > 0 else float("nan")


def growth_study(
    spec: LadderSpec,
    sigma: int,
    T_values=(5.0, 10.0, 20.0, 40.0),
    reference: ReferenceSolution | None = None,
) -> GrowthReport:
    """Running ``sup ||f_h - f_ref||_{H^sigma}`` (f frame) at each ``T`` in ``T_values``.

    The supremum runs over the coarse step grid.  Exponents are log-log
    slopes of the running supremum against ``T``.
    """
    if sigma < 0:
        raise LadderError("sigma must be nonnegative")
    T_values = np.asarray(sorted(float(t) for t in T_values))
    T_max = float(T_values[-1])
    for t in T_values:
        _ratio(t, spec.h_values[0], "growth time")
    ref = reference or reference_solution(spec, T=T_max)
    norm = WeightedNormSpec(sigma, 0.0)

    def measure(h, t, fh, fr):
        return sobolev_norm(fh - fr, norm)

    runs = _ladder_runs(spec, ref, T_max, measure)
    coarse_t = np.arange(1, len(runs[0]) + 1) * spec.h_values[0]
    sups = np.zeros((len(runs), len(T_values)))
    for i, r in enumerate(runs):
        run_sup = np.maximum.accumulate(np.asarray(r))
        for j, T in enumerate(T_values):
            sups[i, j] = run_sup[int(np.argmin(np.abs(coarse_t - T)))]
    exps = np.array(
        [fit_slope(T_values, row)[0] if np.all(row > 0) else float("nan") for row in sups]
    )
    return GrowthReport(np.asarray(spec.h_values), T_values, sups, exps, sigma, ref.describe())
