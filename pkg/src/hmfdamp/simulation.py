"""Time-stepping driver: initial data, diagnostics per step, snapshots."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    SchemeSpec,
    SimState,
    StationaryState,
    free_transport,
    kick_schedule,
    maxwellian,
    profile_from_file,
    step,
    two_bump,
)
from .spectral import MixedField, PhaseGrid, WeightedNormSpec, fourier_coefficient, make_grid, sobolev_norm


class RecurrenceWarning(UserWarning):
    pass


class BlowUpError(RuntimeError):
    def __init__(self, n: int, t: float, norm: float, ceiling: float):
        super().__init__(f"blow-up at step {n} (t={t:.6g}): norm {norm:.6g} exceeds ceiling {ceiling:.6g}")
        self.n = n
        self.t = t
        self.norm = norm
        self.ceiling = ceiling


def single_mode(eta: StationaryState) -> MixedField:
    """``r0 = cos(x) eta(v) / ||eta||``."""
    g = eta.grid
    phys = np.cos(g.x)[:, None] * eta.profile[None, :] / eta.field.l2_norm()
    return MixedField.from_physical(g, phys)


def multi_mode(eta: StationaryState, seed: int = 0, k_max: int = 3) -> MixedField:
    """Seeded smooth perturbation with modes ``|k| <= k_max`` and polynomial v-profiles.

    Every term carries the factor ``eta(v)`` so the data is as localized in v
    as the stationary state.  The k = 0 part has zero mass.
    """
    rng = np.random.default_rng(seed)
    g = eta.grid
    v = g.v
    vs = v / max(1.0, np.sqrt(np.sum(v**2 * eta.profile) / np.sum(eta.profile)))
    phys = np.zeros((g.n_x, g.n_v))
    for k in range(0, k_max + 1):
        a, b, c = rng.normal(size=3)
        vprof = 1.0 + 0.5 * b * vs + 0.25 * c * (vs**2 - 1.0)
        if k == 0:
            phys += 0.3 * a * (vs**2 - 1.0)[None, :]
        else:
            phase = rng.uniform(0, 2 * np.pi)
            phys += (a / k) * np.cos(k * g.x + phase)[:, None] * vprof[None, :]
    phys *= eta.profile[None, :]
    r0 = MixedField.from_physical(g, phys)
    return r0 / r0.l2_norm()


@dataclass
class Trajectory:
    """Per-step diagnostics of one run.

    ``zeta`` holds the density modes of ``f`` (k = +-1); ``Z`` holds
    ``g_k(k s_n)`` evaluated on the streaming-frame field (zero when eps = 0).
    ``norms`` is keyed by ``(s, nu)`` and measured on ``g``.
    """

    grid: PhaseGrid
    eta: StationaryState
    scheme: SchemeSpec
    epsilon: float
    r0: MixedField
    times: np.ndarray
    zeta: dict
    Z: dict
    s_times: np.ndarray
    mass: np.ndarray
    l2: np.ndarray
    norms: dict
    snapshots: dict = field(default_factory=dict)
    final: SimState | None = None

    def __len__(self) -> int:
        return len(self.times)


def _steps_for(t: float, h: float, what: str) -> int:
    n = int(round(t / h))
    if abs(n * h - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"{what}={t!r} is not a multiple of h={h!r}")
    return n


def simulate(
    eta: StationaryState,
    r0: MixedField,
    scheme: SchemeSpec,
    epsilon: float,
    T: float,
    snapshot_times=(),
    norm_specs=(),
    recurrence_safety: float = 0.5,
    blowup_factor: float = 1e6,
    record_every: int = 1,
) -> Trajectory:
    """Step ``f0 = eta + eps r0`` to ``T`` and record diagnostics.

    Snapshots store the streaming-frame field ``g`` (or ``r0`` transported
    back when ``eps = 0``, which is then identically zero).
    """
    grid = eta.grid
    h = scheme.h
    n_steps = _steps_for(T, h, "T")
    snap_steps = {_steps_for(t, h, "snapshot time"): float(t) for t in snapshot_times}
    if any(n > n_steps for n in snap_steps):
        raise ValueError("snapshot time beyond final time")
    if T > recurrence_safety * grid.recurrence_time():
        warnings.warn(
            f"T={T:g} exceeds {recurrence_safety:g} x recurrence time {grid.recurrence_time():.4g}",
            RecurrenceWarning,
            stacklevel=2,
        )
    specs = [s if isinstance(s, WeightedNormSpec) else WeightedNormSpec(*s) for s in norm_specs]

    state = SimState(eta.field + r0 * epsilon, 0, epsilon, eta, scheme)
    zero = MixedField.zeros(grid)
    ceiling = blowup_factor * max(r0.l2_norm(), np.finfo(float).tiny)
    rec = list(range(0, n_steps + 1, record_every))
    if rec[-1] != n_steps:
        rec.append(n_steps)
    m = len(rec)
    zeta = {1: np.zeros(m, complex), -1: np.zeros(m, complex)}
    Z = {1: np.zeros(m, complex), -1: np.zeros(m, complex)}
    s_times = np.zeros(m)
    mass = np.zeros(m)
    l2 = np.zeros(m)
    norms = {(s.s, s.nu): np.zeros(m) for s in specs}
    snapshots = {}
    j = 0
    n = 0
    while True:
        if n == rec[j]:
            f = state.f
            s_n = kick_schedule(scheme, n)[0][0]
            if epsilon == 0:
                g = zero
            else:
                g = free_transport((f - eta.field) / epsilon, -n * h)
            for k in (1, -1):
                zeta[k][j] = f.density_mode(k)
                Z[k][j] = fourier_coefficient(g, k, k * s_n)
            s_times[j] = s_n
            mass[j] = f.mass()
            l2[j] = f.l2_norm()
            g_l2 = g.l2_norm()
            if not np.isfinite(l2[j]) or not np.isfinite(g_l2) or g_l2 > ceiling:
                raise BlowUpError(n, n * h, g_l2, ceiling)
            for s in specs:
                norms[(s.s, s.nu)][j] = sobolev_norm(g, s)
            if n in snap_steps:
                snapshots[snap_steps[n]] = g
            j += 1
        elif n in snap_steps:
            snapshots[snap_steps[n]] = zero if epsilon == 0 else free_transport((state.f - eta.field) / epsilon, -n * h)
        if n == n_steps:
            break
        state = step(state)
        n += 1
    times = np.array(rec, dtype=float) * h
    return Trajectory(grid, eta, scheme, epsilon, r0, times, zeta, Z, s_times, mass, l2, norms, snapshots, state)


def build_eta(config) -> StationaryState:
    grid = make_grid(config["grid.n_x"], config["grid.n_v"], config["grid.L"])
    kind = config["eta.kind"]
    if kind == "maxwellian":
        return maxwellian(grid, config["eta.temperature"])
    if kind == "two_bump":
        return two_bump(grid, config["eta.separation"], config["eta.temperature"])
    if not config["eta.file"]:
        raise ValueError("eta.kind = file needs eta.file")
    return profile_from_file(grid, config["eta.file"])


def build_r0(config, eta: StationaryState) -> MixedField:
    if config["sim.perturbation"] == "multi":
        return multi_mode(eta, config["seed"])
    return single_mode(eta)


def norm_specs(config) -> list[WeightedNormSpec]:
    s = config["analysis.norm_s"]
    nu = config["analysis.norm_nu"]
    out = [WeightedNormSpec(1, nu), WeightedNormSpec(s, nu), WeightedNormSpec(max(s - 4, 0), nu)]
    uniq = []
    for sp in out:
        if sp not in uniq:
            uniq.append(sp)
    return uniq


def run(config, T: float | None = None, scheme: SchemeSpec | None = None) -> Trajectory:
    """Run the configured simulation (``T`` and ``scheme`` may be overridden)."""
    eta = build_eta(config)
    r0 = build_r0(config, eta)
    if scheme is None:
        scheme = SchemeSpec(config["scheme.variant"], config["scheme.h"], config["sim.interaction"])
    T = config["sim.T"] if T is None else T
    return simulate(
        eta,
        r0,
        scheme,
        config["sim.epsilon"],
        T,
        snapshot_times=[t for t in config["sim.snapshot_times"] if t <= T + 1e-12],
        norm_specs=norm_specs(config),
        recurrence_safety=config["sim.recurrence_safety"],
        blowup_factor=config["sim.blowup_factor"],
    )
