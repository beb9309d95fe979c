import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _shared import smooth_field
from hmfdamp.dynamics import (
    VARIANTS,
    SchemeSpec,
    SimState,
    electric_field,
    field_coefficients,
    free_transport,
    kick,
    kick_schedule,
    maxwellian,
    normalize_variant,
    profile_from_file,
    prop31_identity_residual,
    shift_time,
    step,
    streaming_frame,
    two_bump,
)
from hmfdamp.simulation import multi_mode
from hmfdamp.spectral import MixedField, make_grid

SMALL = make_grid(16, 64, 8.0)


def gaussian_w(v):
    return np.exp(-(v**2) / 2) / np.sqrt(2 * np.pi)


def state(f, eps, eta, variant="strang", h=0.1):
    return SimState(f, 0, eps, eta, SchemeSpec(variant, h))


# --- field_coefficients ----------------------------------------------------


def test_field_coefficients_cos(grid, eta):
    eps = 0.01
    f = eta.field + MixedField.from_function(grid, lambda X, V: eps * np.cos(X) * gaussian_w(V))
    C, S = field_coefficients(f)
    assert C == pytest.approx(eps * np.pi, rel=1e-13)
    assert abs(S) < 1e-16


def test_field_coefficients_sin(grid):
    eps = 0.02
    f = MixedField.from_function(grid, lambda X, V: eps * np.sin(X) * gaussian_w(V))
    C, S = field_coefficients(f)
    assert abs(C) < 1e-16
    assert S == pytest.approx(eps * np.pi, rel=1e-13)


def test_field_coefficients_homogeneous(eta, grid):
    assert field_coefficients(eta.field) == (0.0, 0.0)
    assert np.all(electric_field(0.0, 0.0, grid.x) == 0)


def test_field_coefficients_match_direct_quadrature(grid):
    f = smooth_field(grid, 7)
    X, _ = np.meshgrid(grid.x, grid.v, indexing="ij")
    phys = f.physical()
    C = np.sum(np.cos(X) * phys) * grid.dx * grid.dv
    S = np.sum(np.sin(X) * phys) * grid.dx * grid.dv
    Cf, Sf = field_coefficients(f)
    assert Cf == pytest.approx(C, rel=1e-12, abs=1e-14)
    assert Sf == pytest.approx(S, rel=1e-12, abs=1e-14)


# --- free transport --------------------------------------------------------


def test_free_transport_identity(grid):
    f = smooth_field(grid, 1)
    assert free_transport(f, 0.0) is f


def test_free_transport_group(grid):
    f = smooth_field(grid, 2)
    a = free_transport(free_transport(f, 0.37), 1.21)
    b = free_transport(f, 1.58)
    assert (a - b).l2_norm() <= 1e-13 * f.l2_norm()


def test_free_transport_gaussian_decay(grid):
    f = MixedField.from_function(grid, lambda X, V: np.cos(X) * np.exp(-(V**2) / 2))
    rho0 = abs(f.density_mode(1))
    t = np.linspace(0, grid.recurrence_time() / 2, 301)
    ratio = np.array([abs(free_transport(f, s).density_mode(1)) / rho0 for s in t])
    assert np.max(np.abs(ratio - np.exp(-(t**2) / 2))) <= 1e-8


def test_free_transport_matches_physical_shift():
    # band-limited in x: shifting x by t v is exact for cos(x)
    g = SMALL
    f = MixedField.from_function(g, lambda X, V: np.cos(X) * np.exp(-(V**2)))
    t = 0.8
    expected = MixedField.from_function(g, lambda X, V: np.cos(X - t * V) * np.exp(-(V**2)))
    assert (free_transport(f, t) - expected).l2_norm() < 1e-13


# --- kick ------------------------------------------------------------------


def test_kick_homogeneous_identity(eta):
    assert kick(eta.field, 0.3) is eta.field


def test_kick_group(grid, eta):
    f = eta.field + smooth_field(grid, 3) * 0.05
    a = kick(kick(f, 0.2), 0.35)
    b = kick(f, 0.55)
    assert (a - b).l2_norm() <= 1e-12 * f.l2_norm()


def test_kick_preserves_column_mass(grid, eta):
    f = eta.field + smooth_field(grid, 4) * 0.05
    before = np.sum(f.physical(), axis=1) * grid.dv
    after = np.sum(kick(f, 0.7).physical(), axis=1) * grid.dv
    assert np.max(np.abs(after - before)) <= 1e-13


def test_kick_matches_physical_shift():
    # a v-band-limited profile shifts exactly by t E(x)
    g = make_grid(16, 64, np.pi)
    f = MixedField.from_function(g, lambda X, V: 2.0 + 0.5 * np.cos(X) * np.cos(V) + 0.2 * np.sin(X) * np.sin(2 * V))
    C, S = field_coefficients(f)
    t = 0.9
    E = electric_field(C, S, g.x)
    expected = MixedField.from_function(
        g,
        lambda X, V: 2.0
        + 0.5 * np.cos(X) * np.cos(V + t * E[:, None])
        + 0.2 * np.sin(X) * np.sin(2 * (V + t * E[:, None])),
    )
    assert (kick(f, t) - expected).l2_norm() < 1e-12


def test_field_invariant_under_kick(grid, eta):
    f = eta.field + smooth_field(grid, 5) * 0.05
    before = np.array(field_coefficients(f))
    after = np.array(field_coefficients(kick(f, 0.4)))
    assert np.max(np.abs(after - before)) <= 1e-12


# --- step ------------------------------------------------------------------


@pytest.mark.parametrize("variant", VARIANTS)
def test_stationary_state_is_invariant(eta, variant):
    s = SimState(eta.field, 0, 0.0, eta, SchemeSpec(variant, 0.1))
    for _ in range(20):
        s = step(s)
    assert s.n == 20
    assert (s.f - eta.field).l2_norm() <= 1e-13


def test_strang_homogeneous_is_pure_transport():
    g = SMALL
    w = MixedField.homogeneous(g, np.exp(-g.v**2))
    s = step(SimState(w, 0, 0.0, maxwellian(g), SchemeSpec("strang", 0.1)))
    assert (s.f - free_transport(w, 0.1)).l2_norm() == 0.0


def test_strang_local_error_is_third_order(grid, eta):
    f0 = eta.field + smooth_field(grid, 6) * 0.1

    def advance(h, n):
        s = SimState(f0, 0, 0.1, eta, SchemeSpec("strang", h))
        for _ in range(n):
            s = step(s)
        return s.f

    hs = np.array([0.2, 0.1, 0.05])
    errs = np.array([(advance(h, 1) - advance(h / 64, 64)).l2_norm() for h in hs])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 2.7 <= slope <= 3.3, (errs, slope)


def test_time_is_integer_step_count(eta):
    s = SimState(eta.field, 0, 0.0, eta, SchemeSpec("lie_tp", 0.1))
    for _ in range(7):
        s = step(s)
    assert s.n == 7
    assert s.time == 7 * 0.1


def test_lie_variants_are_adjoint(grid, eta):
    f = eta.field + smooth_field(grid, 8) * 0.05
    h = 0.13
    # LieTP with step -h applied to f, then LiePT with step h must return f
    back = kick(free_transport(f, -h), -h)
    s = step(SimState(back, 0, 0.05, eta, SchemeSpec("lie_pt", h)))
    assert (s.f - f).l2_norm() <= 1e-12


def test_density_mode_equals_streaming_frame_trace(grid, eta):
    eps = 0.01
    s = SimState(eta.field + multi_mode(eta, 3) * eps, 0, eps, eta, SchemeSpec("strang", 0.05))
    for _ in range(40):
        s = step(s)
    g = streaming_frame(s)
    from hmfdamp.spectral import fourier_coefficient

    for k in (1, -1, 2):
        lhs = s.f.density_mode(k)
        rhs = eps * fourier_coefficient(g, k, k * s.time)
        assert abs(lhs - rhs) <= 1e-12


@pytest.mark.parametrize("variant", VARIANTS)
def test_conservation_short(variant):
    g = SMALL
    eta = maxwellian(g)
    s = SimState(eta.field + smooth_field(g, 9) * 0.05, 0, 0.05, eta, SchemeSpec(variant, 0.1))
    m0, l0 = s.f.mass(), s.f.l2_norm()
    for _ in range(2000):
        s = step(s)
    assert abs(s.f.mass() - m0) <= 1e-12 * abs(m0)
    assert abs(s.f.l2_norm() - l0) <= 1e-12 * l0


# --- shift_time ------------------------------------------------------------


def test_shift_time_examples():
    assert shift_time(SchemeSpec("strang", 0.1), 3, 0.07) == pytest.approx(0.35, abs=1e-15)
    assert shift_time(SchemeSpec("lie_tp", 0.1), 3, 0.07) == pytest.approx(0.40, abs=1e-15)
    assert shift_time(SchemeSpec("lie_pt", 0.1), 3, 0.07) == pytest.approx(0.30, abs=1e-15)


@pytest.mark.parametrize("t_local", [-1e-12, 0.1, 0.25])
def test_shift_time_rejects_out_of_step(t_local):
    with pytest.raises(ValueError):
        shift_time(SchemeSpec("strang", 0.1), 2, t_local)


def _midpoint_defect(scheme, n):
    h = scheme.h
    x, w = np.polynomial.legendre.leggauss(4)
    tl = 0.5 * h * (x + 1)
    sig = n * h + tl
    s = np.array([shift_time(scheme, n, t) for t in tl])
    return float(0.5 * h * np.sum(w * (sig - s)))


@settings(max_examples=50, deadline=None)
@given(h=st.floats(1e-3, 0.5), n=st.integers(0, 10_000))
def test_midpoint_cancellation(h, n):
    assert abs(_midpoint_defect(SchemeSpec("strang", h), n)) <= 1e-14 * max(1.0, n * h)
    assert _midpoint_defect(SchemeSpec("lie_tp", h), n) == pytest.approx(-(h**2) / 2, rel=1e-9, abs=1e-14 * max(1.0, n * h))
    assert _midpoint_defect(SchemeSpec("lie_pt", h), n) == pytest.approx(h**2 / 2, rel=1e-9, abs=1e-14 * max(1.0, n * h))


def test_ptp_schedule_has_two_half_kicks():
    sch = SchemeSpec("strang_ptp", 0.2)
    assert kick_schedule(sch, 3) == [(pytest.approx(0.6), 0.1), (pytest.approx(0.8), 0.1)]
    with pytest.raises(ValueError):
        shift_time(sch, 3)


# --- streaming frame -------------------------------------------------------


def test_streaming_frame_at_zero(grid, eta):
    r = smooth_field(grid, 10)
    s = SimState(eta.field + r * 0.01, 0, 0.01, eta, SchemeSpec("strang", 0.1))
    assert (streaming_frame(s) - r).l2_norm() <= 1e-13 * r.l2_norm()


def test_streaming_frame_norm_and_inverse(grid, eta):
    eps = 0.01
    s = SimState(eta.field + smooth_field(grid, 11) * eps, 0, eps, eta, SchemeSpec("strang", 0.1))
    for _ in range(15):
        s = step(s)
    r = (s.f - eta.field) / eps
    g = streaming_frame(s)
    assert abs(g.l2_norm() - r.l2_norm()) <= 1e-13 * r.l2_norm()
    assert (free_transport(g, s.time) - r).l2_norm() <= 1e-13 * r.l2_norm()


def test_streaming_frame_needs_epsilon(eta):
    with pytest.raises(ValueError):
        streaming_frame(SimState(eta.field, 0, 0.0, eta, SchemeSpec("strang", 0.1)))


# --- one-step frame identity -------------------------------------------------


def _residuals(eta, r0, eps, variant, checkpoints=(1, 5, 50), h=0.1):
    s = SimState(eta.field + r0 * eps, 0, eps, eta, SchemeSpec(variant, h))
    out = {}
    for n in range(1, max(checkpoints) + 1):
        nxt = step(s)
        if n in checkpoints:
            out[n] = prop31_identity_residual(s, nxt)
        s = nxt
    return out


@pytest.mark.parametrize("variant", VARIANTS)
def test_prop31_identity(grid, eta, variant):
    res = _residuals(eta, multi_mode(eta, 21), 0.01, variant)
    assert max(res.values()) <= 1e-11, res


def test_prop31_zero_epsilon(eta):
    res = _residuals(eta, MixedField.zeros(eta.grid), 0.0, "strang", (1, 5))
    assert max(res.values()) <= 1e-14


def test_prop31_scaling_in_epsilon(eta):
    r0 = multi_mode(eta, 4)
    a = _residuals(eta, r0, 1e-2, "strang", (5,))[5]
    b = _residuals(eta, r0, 1e-3, "strang", (5,))[5]
    floor = 1e-15
    assert max(a, floor) / max(b, floor) <= 10 and max(b, floor) / max(a, floor) <= 10


def test_lie_pairing_is_discriminating(eta):
    """Swapping the shift functions of the two Lie variants breaks the identity."""
    eps = 0.05
    s = SimState(eta.field + multi_mode(eta, 2) * eps, 0, eps, eta, SchemeSpec("lie_tp", 0.1))
    for _ in range(5):
        s = step(s)
    nxt = step(s)

    def frame(st):
        return free_transport(st.f, -st.time)

    wrong = s.n * 0.1  # the LiePT frame time applied to a LieTP step
    rhs = free_transport(kick(free_transport(frame(s), wrong), 0.1), -wrong)
    assert (frame(nxt) - rhs).l2_norm() > 1e-6
    assert prop31_identity_residual(s, nxt) <= 1e-11


def test_prop31_requires_consecutive_states(eta):
    s0 = SimState(eta.field, 0, 0.0, eta, SchemeSpec("strang", 0.1))
    with pytest.raises(ValueError):
        prop31_identity_residual(s0, s0)


# --- stationary states ----------------------------------------------------


def test_stationary_states_are_homogeneous(grid):
    for eta in (maxwellian(grid), maxwellian(grid, 0.1), two_bump(grid, 2.0)):
        c = eta.field.coeffs
        k0 = grid.k_index(0)
        assert np.all(np.delete(c, k0, axis=0) == 0)
        assert eta.field.mass() > 0


def test_closed_form_hats_match_quadrature(grid):
    xi = np.linspace(-4, 4, 17)
    for eta in (maxwellian(grid, 0.7, 0.3), two_bump(grid, 2.0, 1.0)):
        quad = np.exp(-1j * np.outer(xi, grid.v)) @ eta.profile * grid.dv
        # the only error source is the truncated tail beyond |v| = L
        leak = eta.profile[0] * 2 * grid.dv / (1 - np.exp(-grid.dv))
        assert np.max(np.abs(eta.hat(xi) - quad)) < max(1e-12, leak)


def test_reflected_state(grid):
    eta = maxwellian(grid, 1.0, 0.5)
    ref = eta.reflected()
    assert np.allclose(ref.profile[1:], eta.profile[1:][::-1])
    assert np.allclose(ref.hat(np.array([0.3])), np.conj(eta.hat(np.array([0.3]))))


def test_profile_from_file(tmp_path, grid):
    v = np.linspace(-8, 8, 2001)
    path = tmp_path / "eta.txt"
    np.savetxt(path, np.column_stack([v, gaussian_w(v)]))
    eta = profile_from_file(grid, path)
    assert eta.closed_form_hat is None
    assert np.max(np.abs(eta.profile - gaussian_w(grid.v))) < 1e-5
    assert eta.hat(0.0) == pytest.approx(1.0, abs=1e-5)


def test_invalid_states_and_schemes(grid):
    with pytest.raises(ValueError):
        maxwellian(grid, -1.0)
    with pytest.raises(ValueError):
        SchemeSpec("strang", 0.0)
    with pytest.raises(ValueError):
        normalize_variant("euler")
    assert normalize_variant("LieTP") == "lie_tp"
    assert normalize_variant("Strang") == "strang"
