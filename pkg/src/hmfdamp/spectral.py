"""Phase-space grids, mixed Fourier representation and weighted Sobolev norms.

The canonical state is a :class:`MixedField`: x-Fourier coefficients
``f_k(v_j)`` sampled at physical velocity nodes.  Transforms follow the
convention

    f_k(xi) = 1/(2 pi) * int_T int_R f(x, v) exp(-i k x - i xi v) dx dv,

so the x-coefficients carry the ``1/n_x`` (i.e. ``1/(2 pi)`` times ``dx``)
factor and the v-transform is the quadrature ``sum_j (.) exp(-i xi v_j) dv``.
Frequencies are stored in signed order (``-n/2 .. n/2-1``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate

MAX_DERIVATIVE_ORDER = 8
SNAPSHOT_MAGIC = b"HMF1"


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform grid on ``[0, 2 pi) x [-L, L)``."""

    n_x: int
    n_v: int
    L: float

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.n_x

    @property
    def dv(self) -> float:
        return 2.0 * self.L / self.n_v

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * self.dx

    @cached_property
    def v(self) -> np.ndarray:
        return -self.L + np.arange(self.n_v) * self.dv

    @cached_property
    def k(self) -> np.ndarray:
        """Signed x-wavenumbers in storage order."""
        return np.arange(-(self.n_x // 2), self.n_x // 2)

    @cached_property
    def xi(self) -> np.ndarray:
        """Signed v-frequencies ``(pi / L) m`` in storage order."""
        return np.pi / self.L * np.arange(-(self.n_v // 2), self.n_v // 2)

    @cached_property
    def xi_fft(self) -> np.ndarray:
        # numpy FFT order, used by internal kernels
        return 2.0 * np.pi * np.fft.fftfreq(self.n_v, d=self.dv)

    def recurrence_time(self) -> float:
        return 2.0 * np.pi / self.dv

    def k_index(self, k: int) -> int:
        if not -(self.n_x // 2) <= k < self.n_x // 2:
            raise ValueError(f"wavenumber {k} outside [-{self.n_x // 2}, {self.n_x // 2})")
        return k + self.n_x // 2


def make_grid(n_x: int, n_v: int, L: float) -> PhaseGrid:
    for name, n in (("n_x", n_x), ("n_v", n_v)):
        if int(n) != n or n < 4 or n % 2:
            raise ValueError(f"{name} must be an even integer >= 4, got {n!r}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L!r}")
    return PhaseGrid(int(n_x), int(n_v), float(L))


@dataclass(frozen=True, eq=False)
class MixedField:
    """x-Fourier coefficients at physical velocity nodes, shape ``(n_x, n_v)``.

    Row ``i`` holds wavenumber ``grid.k[i]``.  The coefficient array is
    read-only; operations return new fields.
    """

    grid: PhaseGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n_x, self.grid.n_v):
            raise ValueError(f"coefficient shape {c.shape} does not match grid")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_physical(cls, grid: PhaseGrid, values) -> "MixedField":
        values = np.asarray(values)
        coeffs = np.fft.fftshift(np.fft.fft(values, axis=0), axes=0) / grid.n_x
        return cls(grid, coeffs)

    @classmethod
    def from_function(cls, grid: PhaseGrid, func) -> "MixedField":
        X, V = np.meshgrid(grid.x, grid.v, indexing="ij")
        return cls.from_physical(grid, func(X, V))

    @classmethod
    def homogeneous(cls, grid: PhaseGrid, profile) -> "MixedField":
        coeffs = np.zeros((grid.n_x, grid.n_v), dtype=complex)
        coeffs[grid.k_index(0)] = profile
        return cls(grid, coeffs)

    @classmethod
    def from_spectral(cls, grid: PhaseGrid, spectrum) -> "MixedField":
        return cls(grid, _spectral_to_mixed(grid, np.asarray(spectrum, dtype=complex)))

    @classmethod
    def zeros(cls, grid: PhaseGrid) -> "MixedField":
        return cls(grid, np.zeros((grid.n_x, grid.n_v), dtype=complex))

    def physical(self) -> np.ndarray:
        """Complex values ``f(x_i, v_j)``; real up to rounding for real fields."""
        return np.fft.ifft(np.fft.ifftshift(self.coeffs, axes=0), axis=0) * self.grid.n_x

    def spectral(self) -> np.ndarray:
        """Fully spectral array ``f_k(xi_m)`` (signed order in both axes)."""
        return _mixed_to_spectral(self.grid, self.coeffs)

    def mode(self, k: int) -> np.ndarray:
        return self.coeffs[self.grid.k_index(k)]

    def l2_norm(self) -> float:
        g = self.grid
        return float(np.sqrt(2.0 * np.pi * g.dv * np.sum(np.abs(self.coeffs) ** 2)))

    def mass(self) -> float:
        return float((2.0 * np.pi * self.grid.dv * np.sum(self.mode(0))).real)

    def density_mode(self, k: int) -> complex:
        """x-Fourier coefficient of the density ``rho = int f dv``."""
        return complex(np.sum(self.mode(k)) * self.grid.dv)

    def _check(self, other: "MixedField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: "MixedField") -> "MixedField":
        self._check(other)
        return MixedField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "MixedField") -> "MixedField":
        self._check(other)
        return MixedField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "MixedField":
        return MixedField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "MixedField":
        return MixedField(self.grid, self.coeffs / scalar)


def _mixed_to_spectral(grid: PhaseGrid, coeffs: np.ndarray) -> np.ndarray:
    # exp(-i xi_m v_j) = (-1)^m exp(-2 pi i m j / n_v) since v_0 = -L
    m = np.arange(-(grid.n_v // 2), grid.n_v // 2)
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    spec = np.fft.fftshift(np.fft.fft(coeffs, axis=1), axes=1)
    return spec * sign * grid.dv


def _spectral_to_mixed(grid: PhaseGrid, spectrum: np.ndarray) -> np.ndarray:
    m = np.arange(-(grid.n_v // 2), grid.n_v // 2)
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    return np.fft.ifft(np.fft.ifftshift(spectrum * sign, axes=1), axis=1) / grid.dv


def fourier_coefficient(f: MixedField, k: int, xi):
    """``f_k(xi)`` by direct velocity quadrature, for any real ``xi`` (scalar or array)."""
    row = f.mode(k)
    xi_arr = np.asarray(xi, dtype=float)
    phase = np.exp(-1j * np.multiply.outer(xi_arr, f.grid.v))
    out = phase @ row * f.grid.dv
    return complex(out) if xi_arr.ndim == 0 else out


@dataclass(frozen=True)
class WeightedNormSpec:
    s: int
    nu: float = 0.0

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 0:
            raise ValueError(f"derivative order must be a nonnegative integer, got {self.s!r}")
        if self.s > MAX_DERIVATIVE_ORDER:
            raise ValueError(f"derivative order {self.s} exceeds cap {MAX_DERIVATIVE_ORDER}")
        if self.nu < 0:
            raise ValueError(f"weight exponent must be nonnegative, got {self.nu!r}")


def v_derivatives(f: MixedField, q_max: int) -> list[np.ndarray]:
    """Spectral v-derivatives ``d_v^q f`` for ``q = 0..q_max`` as mixed arrays.

    The Nyquist mode is dropped for odd orders so real fields stay real.
    """
    g = f.grid
    out = [np.asarray(f.coeffs)]
    if q_max == 0:
        return out
    spec = np.fft.fft(f.coeffs, axis=1)
    ik = 1j * g.xi_fft
    nyq = g.n_v // 2
    for q in range(1, q_max + 1):
        mult = ik**q
        if q % 2:
            mult = mult.copy()
            mult[nyq] = 0.0
        out.append(np.fft.ifft(spec * mult, axis=1))
    return out


def sobolev_norm(f: MixedField, spec: WeightedNormSpec) -> float:
    """Weighted norm ``sum_{p+q<=s} int (1+v^2)^nu |d_x^p d_v^q f|^2``, square-rooted.

    x-derivatives enter through Parseval (factor ``k^{2p}``); the weight is
    applied in physical v after differentiation.
    """
    g = f.grid
    weight = (1.0 + g.v**2) ** spec.nu
    k2 = g.k.astype(float) ** 2
    total = 0.0
    for q, dq in enumerate(v_derivatives(f, spec.s)):
        # sum_{p <= s-q} k^{2p}
        kfac = np.zeros_like(k2)
        for p in range(spec.s - q + 1):
            kfac += k2**p
        total += float(np.sum(kfac[:, None] * weight[None, :] * np.abs(dq) ** 2))
    return float(np.sqrt(2.0 * np.pi * g.dv * total))


def weight_constant(nu: float) -> float:
    """``C(nu) = (int_R (1+v^2)^(-nu) dv / (2 pi))^(1/2)`` from Cauchy-Schwarz."""
    if nu <= 0.5:
        raise ValueError(f"nu must exceed 1/2, got {nu!r}")
    val, _ = integrate.quad(lambda v: (1.0 + v * v) ** (-nu), -np.inf, np.inf, epsabs=0, epsrel=1e-12)
    return float(np.sqrt(val / (2.0 * np.pi)))


@dataclass(frozen=True)
class DecayBoundReport:
    max_ratio: float
    bound: float
    passed: bool


def decay_bound_check(f: MixedField, s: int, nu: float) -> DecayBoundReport:
    """Scan ``|f_k(xi)| <k>^a <xi>^b / ||f||_{H^s_nu}`` over grid frequencies, ``a + b = s``."""
    norm = sobolev_norm(f, WeightedNormSpec(s, nu))
    if norm == 0.0:
        raise ValueError("zero field: decay ratio undefined")
    g = f.grid
    mag = np.abs(f.spectral())
    jk = np.sqrt(1.0 + g.k.astype(float) ** 2)[:, None]
    jxi = np.sqrt(1.0 + g.xi**2)[None, :]
    ratio = 0.0
    for a in range(s + 1):
        ratio = max(ratio, float(np.max(mag * jk**a * jxi ** (s - a))))
    ratio /= norm
    bound = 2.0 ** (s / 2.0) * weight_constant(nu)
    return DecayBoundReport(ratio, bound, ratio <= bound)


def save_field(path, f: MixedField) -> None:
    """Write the ``HMF1`` snapshot format (little-endian, row-major)."""
    g = f.grid
    header = SNAPSHOT_MAGIC + struct.pack("<qqd", g.n_x, g.n_v, g.L)
    body = np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes()
    Path(path).write_bytes(header + body)


def load_field(path) -> MixedField:
    raw = Path(path).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not an HMF1 snapshot")
    n_x, n_v, L = struct.unpack("<qqd", raw[4:28])
    grid = make_grid(n_x, n_v, L)
    expected = 28 + 16 * n_x * n_v
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    coeffs = np.frombuffer(raw[28:], dtype="<c16").reshape(n_x, n_v)
    return MixedField(grid, coeffs)
