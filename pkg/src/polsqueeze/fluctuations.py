"""Linearized quantum fluctuations and output squeezing spectra.

Conventions: quadratures ``X = a + a†`` and ``Y = -i(a - a†)``, vacuum
variance 1. Fluctuations ``q = (x_1, y_1, ...)`` obey ``dq/dt = A q + noise``
with ``A`` the mean-field Jacobian. ``D`` is the normally ordered diffusion
matrix, i.e. the noise in excess of vacuum; it is assembled from the
quadratic part ``H_2 = ½ qᵀ S q`` of the Hamiltonian as ``D = 2(ΩS - SΩ)``
and vanishes for passive (number-conserving) dynamics.

Output spectra are shot-noise normalized,

    V(ω) = 1 + vᵀ √(2Γ) G(ω) D G(ω)† √(2Γ) v,   G(ω) = (A + iω)⁻¹,

so ``V = 1`` is vacuum and ``V = 0`` perfect squeezing. A Goldstone zero of
``A`` is removed at ω = 0 through the group inverse; quadratures that see the
diffusing direction get ``V(0) = inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .meanfield import (
    GOLDSTONE_TOL,
    STABILITY_MARGIN,
    ClassicalState,
    MeanField,
    NotStationaryError,
    stability,
    steady_states,
)
from .models import CavityModel, OpoParams, chi3_model, opo_model
from .polarization import JonesVector, orthogonal, to_circular


class UnstableError(ValueError):
    """Drift is not Hurwitz on the non-Goldstone subspace."""


def symplectic_form(n_modes):
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass
class DriftDiffusion:
    drift: np.ndarray
    diffusion: np.ndarray
    damping: np.ndarray  # per mode
    model: CavityModel = field(repr=False)
    state: ClassicalState = field(repr=False)
    goldstone_right: np.ndarray | None = None
    goldstone_left: np.ndarray | None = None

    @property
    def gamma_quadratures(self):
        return np.repeat(self.damping, 2)

    @property
    def total_diffusion(self):
        """Symmetrically ordered diffusion; equals 2Γ for Hamiltonian drift."""
        return self.diffusion - self.drift - self.drift.T

    def group_inverse(self):
        """Drift inverse with the Goldstone direction removed."""
        if self.goldstone_right is None:
            return np.linalg.inv(self.drift)
        r, l = self.goldstone_right, self.goldstone_left
        proj = np.outer(r, l)
        return np.linalg.inv(self.drift + proj) - proj


def _goldstone_vectors(drift, scale):
    vals, right = np.linalg.eig(drift)
    zero = np.flatnonzero(np.abs(vals) < GOLDSTONE_TOL * scale)
    if len(zero) == 0:
        return None, None
    if len(zero) > 1:
        raise UnstableError(f"{len(zero)} zero eigenvalues; degenerate point")
    r = np.real_if_close(right[:, zero[0]], tol=1e6).real
    lvals, left = np.linalg.eig(drift.T)
    l = left[:, np.argmin(np.abs(lvals))].real
    r = r / np.linalg.norm(r)
    return r, l / (l @ r)


def linearize(model: CavityModel, state: ClassicalState) -> DriftDiffusion:
    mf = MeanField(model)
    res = mf.residual_norm(state.amplitudes)
    if res > 1e-8 * mf.rate_scale:
        raise NotStationaryError(f"state residual {res:.3e} exceeds 1e-8")
    a = mf.jacobian(state.amplitudes)
    s = mf.hessian(state.amplitudes)
    omega = symplectic_form(mf.n)
    d = 2 * (omega @ s - s @ omega)
    r, l = _goldstone_vectors(a, mf.rate_scale)
    return DriftDiffusion(a, d, mf.gamma.copy(), model, state, r, l)


def covariance_lyapunov(dd: DriftDiffusion):
    """Symmetrised covariance Σ of the fluctuations (vacuum = identity).

    Solves ``AΣ + ΣAᵀ + D_total = 0``; with a Goldstone mode the equation is
    solved on the complementary invariant subspace.
    """
    a, q = dd.drift, dd.total_diffusion
    if dd.goldstone_right is None:
        basis = np.eye(a.shape[0])
        proj = basis
    else:
        proj = np.eye(a.shape[0]) - np.outer(dd.goldstone_right, dd.goldstone_left)
        basis = sla.orth(proj)
    a_red = basis.T @ a @ basis
    q_red = basis.T @ proj @ q @ proj.T @ basis
    worst = np.max(np.linalg.eigvals(a_red).real)
    if worst > -STABILITY_MARGIN:
        raise UnstableError(f"reduced drift has eigenvalue with Re = {worst:.3e}")
    sigma_red = sla.solve_continuous_lyapunov(a_red, -q_red)
    sigma = basis @ sigma_red @ basis.T
    return 0.5 * (sigma + sigma.T)


# mode selection ---------------------------------------------------------------


def mode_coefficients(model: CavityModel, mode) -> np.ndarray:
    """Coefficients ``c_m`` with ``a_mode = Σ c_m* a_m`` over the signal modes."""
    if isinstance(mode, JonesVector):
        u = mode.normalized()
        if model.signal_basis == "circular":
            return np.array(to_circular(u), dtype=complex)
        return u.as_array()
    c = np.asarray(mode, dtype=complex)
    return c / np.linalg.norm(c)


def quadrature_vector(model: CavityModel, mode, phi: float) -> np.ndarray:
    """Real vector ``v`` with ``X_φ(mode) = vᵀ q``."""
    c = mode_coefficients(model, mode)
    v = np.zeros(2 * len(model.modes))
    w = np.conj(c) * np.exp(-1j * phi)
    for k, m in enumerate(model.signal_indices()):
        v[2 * m] = w[k].real
        v[2 * m + 1] = -w[k].imag
    return v


def _quadrature_noise(dd: DriftDiffusion, vs, omega, goldstone_tol=1e-9):
    """Normally ordered output noise matrix ``vᵢᵀ B G D G† B vⱼ`` at ``omega``."""
    b = np.sqrt(2 * dd.gamma_quadratures)
    bv = b[:, None] * np.column_stack(vs)
    if omega == 0 and dd.goldstone_right is not None:
        coupling = bv.T @ dd.goldstone_right
        if np.any(np.abs(coupling) > goldstone_tol * np.linalg.norm(bv, axis=0)):
            return None, coupling
        g = dd.group_inverse()
    else:
        g = np.linalg.inv(dd.drift + 1j * omega * np.eye(dd.drift.shape[0]))
    left = bv.T @ g
    return (left @ dd.diffusion @ left.conj().T).real, None


ROUNDOFF = 1e-12


def _physical(v):
    """Map round-off negatives (|v| < 1e-12) of a variance to zero."""
    return 0.0 if -ROUNDOFF < v < 0 else float(v)


@dataclass
class NoiseSpectrum:
    phi: float
    mode: object
    omega: np.ndarray
    V: np.ndarray

    def rows(self, gamma_s=1.0):
        return [
            {"omega_over_gamma_s": w / gamma_s, "V": v} for w, v in zip(self.omega, self.V)
        ]


def default_omega_grid(gamma_s=1.0, points=401):
    return np.concatenate([[0.0], np.logspace(-3, 3, points) * gamma_s])


def output_spectrum(dd: DriftDiffusion, mode, phi: float, omegas) -> NoiseSpectrum:
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size == 0:
        raise ValueError("empty frequency grid")
    v = quadrature_vector(dd.model, mode, phi)
    out = np.empty(len(omegas))
    for i, w in enumerate(omegas):
        noise, _ = _quadrature_noise(dd, [v], w)
        out[i] = math.inf if noise is None else _physical(1.0 + noise[0, 0])
    return NoiseSpectrum(phi, mode, omegas, out)


def optimal_quadrature(dd: DriftDiffusion, mode, omega=0.0):
    """Return ``(phi_opt, V_min)`` over quadrature angles of ``mode``.

    At ω = 0 only the quadrature orthogonal to the Goldstone direction is
    finite when the mode sees the diffusing phase; that one is returned.
    """
    v0 = quadrature_vector(dd.model, mode, 0.0)
    v1 = quadrature_vector(dd.model, mode, math.pi / 2)
    noise, coupling = _quadrature_noise(dd, [v0, v1], omega)
    if noise is None:
        phi = math.atan2(-coupling[0], coupling[1]) % math.pi
        v = quadrature_vector(dd.model, mode, phi)
        n, _ = _quadrature_noise(dd, [v], omega)
        if n is None:
            return phi, math.inf
        return phi, _physical(1.0 + n[0, 0])
    vals, vecs = np.linalg.eigh(np.eye(2) + noise)
    phi = math.atan2(vecs[1, 0], vecs[0, 0]) % math.pi
    return phi, _physical(vals[0])


# model-level reports ------------------------------------------------------------


def bright_state(model: CavityModel, require_stable=True):
    """Largest stable bright state of ``model`` or ``None``."""
    for st in steady_states(model)[1:]:
        if not require_stable or stability(model, st).stable:
            return st
    return None


def dark_mode_of(model: CavityModel, state: ClassicalState) -> JonesVector:
    return orthogonal(state.polarization(model))


SQUEEZE_COLUMNS = ("delta", "rho2", "g", "gamma_s", "V_min_at_0", "phi_opt")


def dark_mode_squeezing(points):
    """Best dark-mode squeezing at ω = 0 for each χ(3) parameter set.

    Rates are reported in units of γs (the ``gamma_s`` column keeps the
    absolute unit). Points without a stable bright state give NaN entries.
    """
    rows = []
    for p in points:
        model = chi3_model(p)
        row = {
            "delta": p.delta / p.gamma_s,
            "rho2": p.rho2,
            "g": p.g / p.gamma_s,
            "gamma_s": p.gamma_s,
            "V_min_at_0": math.nan,
            "phi_opt": math.nan,
        }
        st = bright_state(model)
        if st is not None:
            dd = linearize(model, st)
            phi, vmin = optimal_quadrature(dd, dark_mode_of(model, st))
            row["V_min_at_0"], row["phi_opt"] = vmin, phi
        rows.append(row)
    return rows


def twin_beam_intensity_spectrum(p: OpoParams, omegas) -> NoiseSpectrum:
    """Shot-noise normalized spectrum of the x/y intensity difference."""
    model = opo_model(p)
    st = bright_state(model)
    if st is None:
        raise ValueError("no stable above-threshold state: no twin beams")
    dd = linearize(model, st)
    phase = float(np.angle(st["sig_x"]))
    diff_mode = np.array([1.0, -1.0]) / math.sqrt(2)
    return output_spectrum(dd, diff_mode, phase, omegas)
