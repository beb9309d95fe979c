"""Exact split flows of the Vlasov-HMF equation and the splitting schemes.

Free transport ``f(x - t v, v)`` and the kick ``f(x, v + t E(x))`` are both
applied as exact phase multiplications (in x-Fourier and v-Fourier space
respectively), so every step is unitary on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .spectral import MixedField, PhaseGrid

VARIANTS = ("lie_tp", "lie_pt", "strang", "strang_ptp")
_ALIASES = {
    "lietp": "lie_tp",
    "lie_tp": "lie_tp",
    "liept": "lie_pt",
    "lie_pt": "lie_pt",
    "strang": "strang",
    "strang_tpt": "strang",
    "strangptp": "strang_ptp",
    "strang_ptp": "strang_ptp",
}


def normalize_variant(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in _ALIASES:
        raise ValueError(f"unknown splitting variant {name!r}; expected one of {VARIANTS}")
    return _ALIASES[key]


@dataclass(frozen=True, eq=False)
class StationaryState:
    """Homogeneous profile ``eta(v)`` on a grid, with optional closed-form transform."""

    grid: PhaseGrid
    profile: np.ndarray
    closed_form_hat: Callable | None = None
    label: str = "custom"

    def __post_init__(self):
        p = np.array(self.profile, dtype=float)
        if p.shape != (self.grid.n_v,):
            raise ValueError(f"profile must have {self.grid.n_v} samples, got {p.shape}")
        if not np.sum(p) * self.grid.dv > 0:
            raise ValueError("stationary state must have positive mass")
        p.setflags(write=False)
        object.__setattr__(self, "profile", p)

    @cached_property
    def field(self) -> MixedField:
        return MixedField.homogeneous(self.grid, self.profile)

    def hat(self, xi):
        """``eta_0(xi) = int eta(v) exp(-i xi v) dv`` (closed form when known)."""
        if self.closed_form_hat is not None:
            return self.closed_form_hat(np.asarray(xi, dtype=float))
        xi_arr = np.asarray(xi, dtype=float)
        out = np.exp(-1j * np.multiply.outer(xi_arr, self.grid.v)) @ self.profile * self.grid.dv
        return out

    def reflected(self) -> "StationaryState":
        """The state ``eta(-v)``, sampled on the same grid."""
        # v_j -> -v_j maps node j to n_v - j; node 0 (v = -L) is its own periodic image
        idx = (-np.arange(self.grid.n_v)) % self.grid.n_v
        hat = self.closed_form_hat
        flipped_hat = None if hat is None else (lambda xi: hat(-np.asarray(xi, dtype=float)))
        return StationaryState(self.grid, self.profile[idx], flipped_hat, self.label + "-reflected")


def maxwellian(grid: PhaseGrid, temperature: float = 1.0, shift: float = 0.0) -> StationaryState:
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    v = grid.v
    profile = np.exp(-((v - shift) ** 2) / (2 * temperature)) / np.sqrt(2 * np.pi * temperature)

    def hat(xi):
        return np.exp(-temperature * xi**2 / 2) * np.exp(-1j * xi * shift)

    return StationaryState(grid, profile, hat, f"maxwellian(T={temperature:g})")


def two_bump(grid: PhaseGrid, separation: float = 2.0, temperature: float = 1.0) -> StationaryState:
    """``(M(v - a) + M(v + a)) / 2`` with Maxwellian bumps of the given temperature."""
    a = separation
    v = grid.v
    m = lambda c: np.exp(-((v - c) ** 2) / (2 * temperature)) / np.sqrt(2 * np.pi * temperature)
    profile = 0.5 * (m(a) + m(-a))

    def hat(xi):
        return np.exp(-temperature * xi**2 / 2) * np.cos(a * xi)

    return StationaryState(grid, profile, hat, f"two_bump(a={a:g},T={temperature:g})")


def profile_from_file(grid: PhaseGrid, path) -> StationaryState:
    """Two-column text file ``v eta``; linearly interpolated onto the grid, zero outside."""
    data = np.loadtxt(Path(path), ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (v, eta)")
    order = np.argsort(data[:, 0])
    profile = np.interp(grid.v, data[order, 0], data[order, 1], left=0.0, right=0.0)
    return StationaryState(grid, profile, None, f"file({Path(path).name})")


@dataclass(frozen=True)
class SchemeSpec:
    variant: str
    h: float
    interaction: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        if not self.h > 0:
            raise ValueError(f"time step must be positive, got {self.h!r}")


@dataclass(frozen=True)
class SimState:
    f: MixedField
    n: int
    epsilon: float
    eta: StationaryState
    scheme: SchemeSpec

    @property
    def time(self) -> float:
        return self.n * self.scheme.h


def field_coefficients(f: MixedField) -> tuple[float, float]:
    """``C = int int cos(y) f``, ``S = int int sin(y) f`` from the k = +-1 modes."""
    rho_p = f.density_mode(1)
    rho_m = f.density_mode(-1)
    C = np.pi * (rho_p + rho_m)
    S = 1j * np.pi * (rho_p - rho_m)
    return float(C.real), float(S.real)


def electric_field(C: float, S: float, x):
    """Field of the cosine interaction under the normalized torus measure ``dy / 2 pi``."""
    return (-C * np.sin(x) + S * np.cos(x)) / (2.0 * np.pi)


@lru_cache(maxsize=64)
def _transport_phase(grid: PhaseGrid, t: float) -> np.ndarray:
    ph = np.exp(-1j * t * np.multiply.outer(grid.k.astype(float), grid.v))
    ph.setflags(write=False)
    return ph


def free_transport(f: MixedField, t: float) -> MixedField:
    """``f(x - t v, v)``: multiply ``f_k(v_j)`` by ``exp(-i k t v_j)``."""
    if t == 0:
        return f
    return MixedField(f.grid, f.coeffs * _transport_phase(f.grid, float(t)))


def _kick_coeffs(grid: PhaseGrid, coeffs: np.ndarray, t: float, C: float, S: float) -> np.ndarray:
    shift = t * electric_field(C, S, grid.x)
    phys = np.fft.ifft(np.fft.ifftshift(coeffs, axes=0), axis=0)
    spec = np.fft.fft(phys, axis=1)
    spec *= np.exp(1j * np.multiply.outer(shift, grid.xi_fft))
    phys = np.fft.ifft(spec, axis=1)
    return np.fft.fftshift(np.fft.fft(phys, axis=0), axes=0)


def kick(f: MixedField, t: float) -> MixedField:
    """``f(x, v + t E(f, x))`` with the field frozen at its initial value."""
    C, S = field_coefficients(f)
    if C == 0.0 and S == 0.0 or t == 0:
        return f
    return MixedField(f.grid, _kick_coeffs(f.grid, f.coeffs, t, C, S))


def kick_schedule(scheme: SchemeSpec, n: int) -> list[tuple[float, float]]:
    """Kicks of step ``n -> n+1`` as ``(frame time, duration)`` pairs.

    The frame time is the free-streaming time at which the kick acts, which is
    the shift function value on ``[nh, (n+1)h)``.
    """
    h = scheme.h
    if scheme.variant == "strang_ptp":
        return [(n * h, h / 2), ((n + 1) * h, h / 2)]
    return [(shift_time(scheme, n), h)]


def shift_time(scheme: SchemeSpec, n: int, t_local: float = 0.0) -> float:
    """Piecewise-constant time argument at ``t = n h + t_local``."""
    h = scheme.h
    if not 0.0 <= t_local < h:
        raise ValueError(f"t_local={t_local!r} outside [0, {h})")
    if scheme.variant == "lie_tp":
        return n * h + h
    if scheme.variant == "lie_pt":
        return n * h
    if scheme.variant == "strang":
        return n * h + h / 2
    raise ValueError("strang_ptp uses two half kicks per step; see kick_schedule")


def step(state: SimState) -> SimState:
    """Advance one step of the configured splitting."""
    h = state.scheme.h
    f = state.f
    kicks = state.scheme.interaction
    variant = state.scheme.variant
    if variant == "lie_tp":
        f = free_transport(f, h)
        if kicks:
            f = kick(f, h)
    elif variant == "lie_pt":
        if kicks:
            f = kick(f, h)
        f = free_transport(f, h)
    elif variant == "strang":
        f = free_transport(f, h / 2)
        if kicks:
            f = kick(f, h)
        f = free_transport(f, h / 2)
    else:
        if kicks:
            f = kick(f, h / 2)
        f = free_transport(f, h)
        if kicks:
            f = kick(f, h / 2)
    return replace(state, f=f, n=state.n + 1)


def perturbation(state: SimState) -> MixedField:
    """``r = (f - eta) / epsilon``."""
    if state.epsilon == 0:
        raise ValueError("perturbation undefined for epsilon = 0")
    return (state.f - state.eta.field) / state.epsilon


def streaming_frame(state: SimState) -> MixedField:
    """``g^n(x, v) = r^n(x + n h v, v)``."""
    return free_transport(perturbation(state), -state.n * state.scheme.h)


def _frame_field(state: SimState) -> MixedField:
    # eta + eps g^n, which equals phi_T^{-nh}(f^n)
    if state.epsilon == 0:
        return free_transport(state.f, -state.n * state.scheme.h)
    return state.eta.field + streaming_frame(state) * state.epsilon


def prop31_identity_residual(prev: SimState, nxt: SimState) -> float:
    """L2 distance between ``eta + eps g^n`` and the conjugated kick of ``eta + eps g^{n-1}``.

    The right-hand side is ``phi_T^{-S} o phi_P^h o phi_T^{S}`` applied to the
    previous streaming-frame state, with ``S`` the shift function of the step.
    """
    if nxt.n < 1:
        raise ValueError("identity needs n >= 1")
    if nxt.n != prev.n + 1:
        raise ValueError("states must be consecutive")
    rhs = _frame_field(prev)
    if nxt.scheme.interaction:
        for frame_time, duration in kick_schedule(prev.scheme, prev.n):
            rhs = free_transport(kick(free_transport(rhs, frame_time), duration), -frame_time)
    return (_frame_field(nxt) - rhs).l2_norm()
