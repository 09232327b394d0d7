import math

import numpy as np
import pytest

from polsqueeze.meanfield import (
    ClassicalState,
    MeanField,
    NotStationaryError,
    SWEEP_COLUMNS,
    bright_exists,
    existence_boundaries,
    goldstone_overlap,
    opo_threshold,
    stability,
    steady_states,
    sweep,
    threshold_interval,
    to_quadratures,
)
from polsqueeze.models import Chi3Params, OpoParams, chi3_model, opo_model


def chi3_intensity(p):
    """Closed-form |α±|² on the symmetric bright branch (two roots).

    With |α+| = |α−| = √I the stationarity condition reduces to
    γ² + Δ² = κ², κ = (3g/2)ρ²(1+B), Δ = δ + (3g/2)[2I + ρ²(3−B)].
    """
    k = 1.5 * p.g * p.rho2 * (1 + p.B)
    if k * k < p.gamma_s**2:
        return []
    roots = []
    for s in (1, -1):
        delta_eff = s * math.sqrt(k * k - p.gamma_s**2)
        roots.append((delta_eff - p.delta - 1.5 * p.g * p.rho2 * (3 - p.B)) / (3 * p.g))
    return sorted(r for r in roots if r > 0)


def test_trivial_state_always_stationary():
    for rho2 in (0.0, 0.7, 3.0):
        m = chi3_model(Chi3Params(delta=2, g=-1, rho2=rho2))
        st = MeanField(m).trivial_state()
        assert MeanField(m).residual_norm(st.amplitudes) == 0


def test_opo_pump_relaxes_below_threshold():
    p = OpoParams(pump=0.6, chi=1.0, gamma_p=2.0, gamma_s=1.0)
    states = steady_states(opo_model(p))
    assert len(states) == 1
    assert states[0]["pump_b"] == pytest.approx(0.3)


def test_opo_above_threshold_solution():
    p = OpoParams(pump=3.0, chi=0.5, gamma_p=1.0, gamma_s=1.0)
    states = steady_states(opo_model(p))
    assert len(states) == 2
    bright = states[1]
    assert abs(bright["pump_b"]) == pytest.approx(p.gamma_s / p.chi, rel=1e-10)
    intensity = (p.pump - opo_threshold(p)) / p.chi
    assert abs(bright["sig_x"]) ** 2 == pytest.approx(intensity, rel=1e-10)
    assert abs(bright["sig_y"]) ** 2 == pytest.approx(intensity, rel=1e-10)


@pytest.mark.parametrize(
    "params",
    [
        Chi3Params(delta=2, g=-1, rho2=0.7),
        Chi3Params(delta=3, g=-0.5, rho2=1.5, gamma_s=0.8),
        Chi3Params.with_B(0.6, delta=4, g=-1, rho2=0.9),
    ],
)
def test_chi3_bright_intensity_matches_closed_form(params):
    states = steady_states(chi3_model(params))
    found = sorted(abs(s["sig_plus"]) ** 2 for s in states[1:])
    expect = chi3_intensity(params)
    assert len(found) == len(expect) > 0
    assert np.allclose(found, expect, rtol=1e-9)
    for s in states[1:]:
        assert abs(s["sig_plus"]) == pytest.approx(abs(s["sig_minus"]), rel=1e-10)


def test_no_bright_state_below_sqrt3():
    for delta in (0.5, 1.0, 1.7):
        for rho2 in (0.4, 0.8, 1.5, 3.0):
            ok, _ = bright_exists(Chi3Params(delta=delta, g=-1, rho2=rho2))
            assert not ok


def test_symmetry_orbit_of_steady_states():
    p = Chi3Params(delta=3, g=-1, rho2=1.0)
    m = chi3_model(p)
    bright = steady_states(m)[1]
    mf = MeanField(m)
    for theta in (0.3, 1.1, 2.9):
        assert mf.residual_norm(bright.rotated(m, theta).amplitudes) < 1e-12


def test_goldstone_mode_and_dark_damping():
    p = Chi3Params(delta=2, g=-1, rho2=0.7)
    m = chi3_model(p)
    bright = steady_states(m)[1]
    rep = stability(m, bright)
    assert rep.stable
    assert rep.zero_count == 1
    assert goldstone_overlap(m, bright, rep) > 1 - 1e-9
    # the dark/Goldstone pair: eigenvalues 0 and -2γs, the most damped one
    assert np.min(rep.eigenvalues.real) == pytest.approx(-2 * p.gamma_s, abs=1e-9)


def test_opo_goldstone():
    p = OpoParams(pump=1.5, chi=1.0, gamma_p=1.0, gamma_s=1.0)
    m = opo_model(p)
    bright = steady_states(m)[1]
    rep = stability(m, bright)
    assert rep.stable and rep.zero_count == 1
    assert goldstone_overlap(m, bright, rep) > 1 - 1e-9


def test_trivial_state_unstable_above_lower_threshold():
    p = Chi3Params(delta=3, g=-1, rho2=0.8)
    m = chi3_model(p)
    assert not stability(m, steady_states(m)[0]).stable
    p2 = Chi3Params(delta=3, g=-1, rho2=0.3)
    m2 = chi3_model(p2)
    assert stability(m2, steady_states(m2)[0]).stable


def test_stability_rejects_non_stationary_state():
    m = chi3_model(Chi3Params(delta=2, g=-1, rho2=0.7))
    with pytest.raises(NotStationaryError):
        stability(m, ClassicalState(m.modes, np.array([0.3, 0.3], complex)))


def test_threshold_interval_spot_value():
    iv = threshold_interval(Chi3Params(delta=2, g=-1, rho2=1))
    assert iv.exists
    assert iv.lower == pytest.approx(0.5)
    assert iv.upper == pytest.approx(5 / 6)
    assert not threshold_interval(Chi3Params(delta=1.7, g=-1, rho2=1)).exists
    # the opposite sign of g mirrors the detuning
    assert not threshold_interval(Chi3Params(delta=2, g=1, rho2=1)).exists
    assert threshold_interval(Chi3Params(delta=-2, g=1, rho2=1)).exists


def test_existence_boundaries_band_between_sqrt3_and_2():
    # for √3γs < δ < 2γs the branch starts at the inner root of the upper curve
    p = Chi3Params(delta=1.9, g=-1, rho2=0.5)
    iv = threshold_interval(p)
    grid = np.linspace(0.45, 0.8, 8)
    found = existence_boundaries(p, grid)
    kinds = [k for _, k in found]
    assert kinds == ["onset", "offset"]
    assert found[0][0] == pytest.approx(iv.branch_lower, abs=1e-8)
    assert found[1][0] == pytest.approx(iv.upper, abs=1e-8)
    assert iv.branch_lower > iv.lower


def test_sweep_columns_and_rows():
    p = Chi3Params(delta=3, g=-1, rho2=1)
    rows = sweep(p, [0.3, 1.0, 1.6])
    assert tuple(rows[0]) == SWEEP_COLUMNS["chi3"]
    assert [r["bright_exists"] for r in rows] == [False, True, False]
    assert rows[1]["bright_stable"]
    assert rows[0]["abs_alpha_plus"] == 0
    rows = sweep(OpoParams(pump=1, chi=1, gamma_p=1, gamma_s=1), [0.5, 2.0])
    assert tuple(rows[0]) == SWEEP_COLUMNS["opo"]
    assert rows[1]["abs_alpha_x"] == pytest.approx(1.0)


def energy_gradient_fd(poly, alpha, h=1e-6):
    """∂⟨H⟩/∂α* by central differences in the real and imaginary parts."""
    out = np.empty(len(alpha), complex)
    for m in range(len(alpha)):
        e = np.zeros(len(alpha), complex)
        e[m] = h
        dx = (poly.value(alpha + e) - poly.value(alpha - e)) / (2 * h)
        dy = (poly.value(alpha + 1j * e) - poly.value(alpha - 1j * e)) / (2 * h)
        out[m] = 0.5 * (dx + 1j * dy)
    return out


@pytest.mark.parametrize(
    "model",
    [
        chi3_model(Chi3Params.with_B(0.2, delta=2.5, g=-0.9, rho2=1.1)),
        opo_model(OpoParams(pump=1.4, chi=0.8, gamma_p=1.5, gamma_s=1.0)),
    ],
)
def test_vector_field_matches_finite_difference_gradient(model):
    mf = MeanField(model)
    rng = np.random.default_rng(5)
    for _ in range(50):
        alpha = rng.normal(size=mf.n) + 1j * rng.normal(size=mf.n)
        expect = -mf.gamma * alpha - 1j * energy_gradient_fd(mf.poly, alpha)
        got = mf.vector_field(alpha)
        assert np.linalg.norm(got - expect) <= 1e-6 * np.linalg.norm(got)


def test_kleinman_vector_field_closed_form():
    p = Chi3Params(delta=1.3, g=-0.7, rho2=0.6)
    mf = MeanField(chi3_model(p))
    ap, am = 0.4 - 0.2j, -0.1 + 0.5j
    expect = -(p.gamma_s + 1j * p.delta) * ap - 1j * 0.75 * p.g * (
        4 / 3 * abs(ap) ** 2 * ap
        + 8 / 3 * abs(am) ** 2 * ap
        + 16 / 3 * p.rho2 * ap
        + 8 / 3 * p.rho2 * np.conj(am)
    )
    assert mf.vector_field([ap, am])[0] == pytest.approx(expect, rel=1e-13)


def test_goldstone_vector_matches_numerical_orbit_tangent():
    p = Chi3Params(delta=2.5, g=-1, rho2=0.8)
    m = chi3_model(p)
    bright = steady_states(m)[1]
    rep = stability(m, bright)
    h = 1e-6
    fwd = to_quadratures(bright.rotated(m, h).amplitudes)
    back = to_quadratures(bright.rotated(m, -h).amplitudes)
    tangent = (fwd - back) / (2 * h)
    v = rep.goldstone_vector
    overlap = abs(np.vdot(v, tangent)) / (np.linalg.norm(v) * np.linalg.norm(tangent))
    assert overlap > 1 - 1e-6


def test_empty_cavity_eigenvalues():
    p = Chi3Params(delta=1.7, g=-1, rho2=0.0, gamma_s=0.6)
    m = chi3_model(p)
    rep = stability(m, steady_states(m)[0])
    expect = np.array([-0.6 - 1.7j, -0.6 - 1.7j, -0.6 + 1.7j, -0.6 + 1.7j])
    assert np.allclose(np.sort_complex(rep.eigenvalues), expect, atol=1e-12)
    assert rep.goldstone_index is None


def test_only_trivial_state_outside_interval():
    p = Chi3Params(delta=3, g=-1, rho2=1)
    iv = threshold_interval(p)
    for rho2 in (0.5 * iv.lower, 1.2 * iv.upper, 3 * iv.upper):
        assert len(steady_states(chi3_model(Chi3Params(delta=3, g=-1, rho2=rho2)))) == 1


def test_opo_threshold_unit_rates_and_continuous_onset():
    p = OpoParams(pump=1.0, chi=1.0, gamma_p=1.0, gamma_s=1.0)
    assert opo_threshold(p) == 1
    pumps = 1 + np.array([0.0, 1e-4, 1e-3, 1e-2, 0.1])
    rows = sweep(p, pumps)
    power = np.array([r["abs_alpha_x"] ** 2 for r in rows])
    assert power[0] == pytest.approx(0, abs=1e-12)
    assert np.all(np.diff(power) > 0)
    # signal power rises linearly from zero at threshold
    assert np.allclose(power[1:], pumps[1:] - 1, rtol=1e-8)
