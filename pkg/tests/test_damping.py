import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import _shared
from hmfdamp.damping import (
    ModeSeries,
    envelope_maxima,
    extract_modes,
    fit_damping,
    scattering_limit,
    weak_limit_eta,
    weighted_norm_series,
)
from hmfdamp.dynamics import SchemeSpec
from hmfdamp.simulation import simulate
from hmfdamp.spectral import MixedField, WeightedNormSpec

T_SYN = np.linspace(0.0, 40.0, 4001)
SYN = np.exp(-0.3 * T_SYN) * np.abs(np.cos(1.4 * T_SYN))


# --- fitting ---------------------------------------------------------------


def test_synthetic_exponential_fit():
    fit = fit_damping((T_SYN, SYN), (0.0, 40.0))
    assert fit.rate == pytest.approx(0.300, abs=0.003)
    assert fit.frequency == pytest.approx(1.40, abs=0.02)
    assert fit.r_squared > 0.999


def test_synthetic_complex_signal_frequency_from_crossings():
    z = np.exp((-0.3 + 1.4j) * T_SYN)
    fit = fit_damping((T_SYN, z.real + 0j), (0.0, 40.0))
    assert fit.frequency == pytest.approx(1.40, abs=0.02)
    assert fit.rate == pytest.approx(0.300, abs=0.003)


def test_constant_series_has_zero_rate():
    t = np.linspace(0, 20, 2001)
    z = np.full(t.shape, 0.7 + 0.2j)
    assert abs(fit_damping((t, z), (0.0, 20.0)).rate) <= 1e-6


def test_algebraic_fit():
    t = np.linspace(0, 40, 801)
    fit = fit_damping((t, (1 + t**2) ** -2.0), (1.0, 40.0), model="algebraic")
    assert fit.rate == pytest.approx(-4.00, abs=0.05)


def test_fit_errors():
    t = np.linspace(0, 5, 501)
    with pytest.raises(ValueError, match="maxima"):
        fit_damping((t, np.exp(-0.3 * t) * np.abs(np.cos(1.4 * t))), (0.0, 5.0))
    with pytest.raises(ValueError, match="samples"):
        fit_damping((t, np.ones_like(t)), (0.0, 0.05), model="algebraic")
    with pytest.raises(ValueError, match="nonpositive"):
        fit_damping((t, np.where(t > 2, 0.0, 1.0)), (0.0, 5.0), model="algebraic")
    with pytest.raises(ValueError, match="model"):
        fit_damping((T_SYN, SYN), (0.0, 40.0), model="spline")


def test_envelope_zeros_rejected():
    t = np.linspace(0, 40, 4001)
    a = np.abs(np.cos(1.4 * t)) * np.exp(-0.3 * t)
    a[(t > 20) & (t < 21)] = 0.0
    a[np.argmin(np.abs(t - 20.5))] = 0.0
    with pytest.raises(ValueError, match="nonpositive"):
        fit_damping((t, np.where((t > 20) & (t < 21), 0.0, a)), (0.0, 40.0))


def test_envelope_refinement_locates_peak():
    t = np.linspace(0, 10, 101)
    a = np.exp(-((t - 5.03) ** 2))
    tp, ap = envelope_maxima(t, a)
    assert tp.size == 1
    assert tp[0] == pytest.approx(5.03, abs=1e-12)
    assert ap[0] == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(min_value=1e-6, max_value=1e6))
def test_fit_rescale_invariance(c):
    base = fit_damping((T_SYN, SYN), (0.0, 40.0))
    scaled = fit_damping((T_SYN, c * SYN), (0.0, 40.0))
    assert abs(scaled.rate - base.rate) <= 1e-10
    assert abs(scaled.frequency - base.frequency) <= 1e-10


def test_mode_series_fit_uses_k():
    t = T_SYN
    ms = ModeSeries(t, {1: SYN + 0j, -1: np.exp(-0.5 * t) * np.abs(np.cos(1.4 * t)) + 0j}, {}, t, {})
    assert fit_damping(ms, (0.0, 40.0)).rate == pytest.approx(0.3, abs=0.003)
    assert fit_damping(ms, (0.0, 40.0), k=-1).rate == pytest.approx(0.5, abs=0.005)


def test_mode_series_requires_increasing_times():
    with pytest.raises(ValueError):
        ModeSeries(np.array([0.0, 1.0, 1.0]), {}, {}, np.zeros(3), {})


# --- mode extraction -------------------------------------------------------


def test_extract_modes_zero_epsilon(eta, r0):
    ms = extract_modes(simulate(eta, r0, SchemeSpec("strang", 0.1), 0.0, 2.0))
    assert np.all(ms.zeta[1] == 0) and np.all(ms.zeta[-1] == 0)


def test_extract_modes_free_transport_gaussian(eta, r0):
    tr = simulate(eta, r0, SchemeSpec("strang", 0.05, interaction=False), 0.01, 8.0)
    ms = extract_modes(tr)
    expect = ms.zeta[1][0] * np.exp(-ms.times**2 / 2)
    assert np.max(np.abs(ms.zeta[1] - expect)) <= 1e-8 * abs(ms.zeta[1][0])


def test_extract_modes_conjugate_symmetry(eta):
    from hmfdamp.simulation import multi_mode

    tr = simulate(eta, multi_mode(eta, 2), SchemeSpec("lie_pt", 0.1), 0.01, 5.0)
    ms = extract_modes(tr)
    assert np.max(np.abs(ms.zeta[-1] - np.conj(ms.zeta[1]))) <= 1e-12
    assert np.max(np.abs(ms.Z[-1] - np.conj(ms.Z[1]))) <= 1e-12


def test_extract_modes_empty():
    with pytest.raises(ValueError):
        extract_modes(None)


# --- weighted norms ----------------------------------------------------------


def _norm_run(eps, T=20.0):
    return simulate(
        _shared.eta(),
        _shared.r0(),
        SchemeSpec("strang", 0.05),
        eps,
        T,
        norm_specs=[WeightedNormSpec(5, 1.0), WeightedNormSpec(1, 1.0)],
    )


def test_norm_series_zero_epsilon(eta, r0):
    from hmfdamp.spectral import sobolev_norm

    tr = simulate(eta, r0, SchemeSpec("strang", 0.1), 0.0, 3.0, norm_specs=[(5, 1.0), (1, 1.0)])
    ns = weighted_norm_series(tr, 5, 1.0)
    assert np.all(ns.M == 0)
    assert np.all(ns.N == ns.N[0]) and np.all(ns.Q == ns.Q[0])
    assert ns.N[0] == sobolev_norm(MixedField.zeros(eta.grid), WeightedNormSpec(5, 1.0))


def test_norm_series_is_nondecreasing():
    ns = weighted_norm_series(_shared.strang_run(), 5, 1.0)
    for arr in (ns.N, ns.M, ns.Q):
        assert np.all(np.diff(arr) >= 0)


def test_norm_series_plateau():
    ns = weighted_norm_series(_shared.strang_run(), 5, 1.0)
    for T in (20.0, 40.0):
        assert ns.at(T) - ns.at(T / 2) <= 0.05 * ns.at(T)


def test_norm_series_epsilon_doubling():
    q1 = weighted_norm_series(_norm_run(0.005), 5, 1.0).final_Q
    q2 = weighted_norm_series(_norm_run(0.01), 5, 1.0).final_Q
    assert abs(q2 - q1) <= 0.25 * q1


def test_norm_series_missing_norm(eta, r0):
    tr = simulate(eta, r0, SchemeSpec("strang", 0.1), 0.01, 1.0)
    with pytest.raises(KeyError):
        weighted_norm_series(tr, 5, 1.0)


def test_norm_series_at_before_start():
    ns = weighted_norm_series(_shared.strang_run(), 5, 1.0)
    with pytest.raises(ValueError):
        ns.at(-1.0)


# --- scattering and weak limits --------------------------------------------------


def test_scattering_zero_epsilon(eta, r0):
    tr = simulate(eta, r0, SchemeSpec("strang", 0.5), 0.0, 4.0, snapshot_times=[1.0, 2.0, 4.0])
    rep = scattering_limit(tr)
    assert np.all(rep.cauchy_errors == 0) and np.all(rep.successive == 0)
    assert np.isnan(rep.fitted_decay_exponent)
    assert np.array_equal(rep.eta_inf, eta.profile)


def test_scattering_successive_differences_decrease():
    rep = scattering_limit(_shared.strang_run(), 1, 1.0)
    assert np.all(np.diff(rep.successive) < 0)
    assert rep.fitted_decay_exponent < 0


def test_scattering_cauchy_tail_nonincreasing():
    rep = scattering_limit(_shared.strang_run(), 1, 1.0)
    tail = rep.cauchy_errors[len(rep.cauchy_errors) // 2 :]
    assert np.all(np.diff(tail) <= 0)


def test_scattering_truncated_checkpoints():
    full = scattering_limit(_shared.strang_run(), 1, 1.0)
    part = scattering_limit(_shared.strang_run(), 1, 1.0, checkpoints=[5.0, 10.0, 20.0])
    from hmfdamp.spectral import sobolev_norm

    gap = sobolev_norm(part.g_inf - full.g_inf, full.norm)
    assert gap <= part.cauchy_errors[-1]


def test_scattering_checkpoint_errors():
    tr = _shared.strang_run()
    with pytest.raises(ValueError):
        scattering_limit(tr, checkpoints=[10.0, 20.0])
    with pytest.raises(KeyError):
        scattering_limit(tr, checkpoints=[5.0, 10.0, 30.0])


def test_weak_limit_eta_zero_epsilon(grid, eta):
    g = _shared.smooth_field(grid, 3)
    assert np.array_equal(weak_limit_eta(g, 0.0, eta), eta.profile)


def test_weak_limit_eta_ignores_oscillating_part(grid, eta):
    g = MixedField.from_physical(grid, np.cos(grid.x)[:, None] * np.exp(-grid.v**2)[None, :])
    assert np.max(np.abs(weak_limit_eta(g, 0.3, eta) - eta.profile)) <= 1e-15


def test_weak_limit_eta_adds_average(grid, eta):
    w = np.exp(-grid.v**2)
    g = MixedField.from_physical(grid, (2.0 + np.cos(grid.x))[:, None] * w[None, :])
    assert np.max(np.abs(weak_limit_eta(g, 0.1, eta) - (eta.profile + 0.2 * w))) <= 1e-14


def test_weak_residual_decreases():
    rep = scattering_limit(_shared.strang_run(), 1, 1.0)
    w = rep.weak_residuals
    assert np.all(w[-1] == 0)
    assert np.all(np.diff(w[:-1], axis=0) < 0)
