"""Cavity Hamiltonians and parameter sets for the two symmetry-breaking models.

ħ = 1 throughout, so every Hamiltonian coefficient is a rate. Constant
(operator-independent) terms are dropped; they only shift the energy origin.

Sign of ``g``: it follows the microscopic formula in :func:`g_from_physical`
and is negative for a positive ``chi_xxxx``. The pitchfork region of the
χ(3) cavity only exists when ``g * delta < 0``; see
:func:`polsqueeze.meanfield.threshold_interval`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.constants as const

from .operators import (
    CIRCULAR_LABELS,
    LINEAR_LABELS,
    OperatorPolynomial,
    substitute,
)

SQRT2 = math.sqrt(2.0)

OPO_MODES = ("sig_x", "sig_y", "pump_b")
OPO_SIGNAL_MODES = ("sig_x", "sig_y")
CHI3_LINEAR_MODES = LINEAR_LABELS
CHI3_CIRCULAR_MODES = CIRCULAR_LABELS

OPO_CHARGES = {"sig_x": 1, "sig_y": -1, "pump_b": 0}
CHI3_CHARGES = {"sig_plus": 1, "sig_minus": -1}


class ParameterError(ValueError):
    """Parameter set violates its invariants."""


@dataclass(frozen=True)
class OpoParams:
    """Type-II frequency-degenerate OPO; all entries are rates."""

    pump: float  # ℰp
    chi: float
    gamma_p: float
    gamma_s: float

    def __post_init__(self):
        if self.gamma_p <= 0 or self.gamma_s <= 0:
            raise ParameterError("damping rates must be positive")
        if self.pump < 0 or self.chi < 0:
            raise ParameterError("pump amplitude and coupling must be non-negative")

    @property
    def threshold(self):
        return self.gamma_p * self.gamma_s / self.chi


@dataclass(frozen=True)
class Chi3Params:
    """Isotropic χ(3) cavity pumped by two counter-rotating circular fields.

    ``rho2`` is the pump intensity ρ², ``A`` and ``B`` the susceptibility
    ratios χxxyy/χxxxx and χxyyx/χxxxx (Kleinman symmetry gives 1/3 each).
    """

    delta: float
    g: float
    rho2: float
    gamma_s: float = 1.0
    A: float = 1.0 / 3.0
    B: float = 1.0 / 3.0

    def __post_init__(self):
        if abs(2 * self.A + self.B - 1) >= 1e-12:
            raise ParameterError(f"2A + B = {2 * self.A + self.B!r}, must equal 1")
        if self.gamma_s <= 0:
            raise ParameterError("gamma_s must be positive")
        if self.rho2 < 0:
            raise ParameterError("rho2 must be non-negative")

    @classmethod
    def with_B(cls, B, **kwargs):
        """Parameters with ``A`` fixed by ``2A + B = 1``."""
        return cls(A=(1.0 - B) / 2.0, B=B, **kwargs)


@dataclass(frozen=True)
class PhysicalParams:
    """Microscopic cavity data in SI units."""

    n: float
    L: float
    l: float
    w: float
    omega_s: float
    chi_xxxx: float
    eps0: float = const.epsilon_0
    hbar: float = const.hbar
    c: float = const.c

    def __post_init__(self):
        for name in ("n", "L", "l", "w", "omega_s", "eps0", "hbar", "c"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")

    @property
    def rayleigh_length(self):
        wavelength = 2 * math.pi * self.c / self.omega_s
        return math.pi * self.w**2 * self.n / wavelength


def g_from_physical(p: PhysicalParams):
    """Return ``(g, F2)``: the χ(3) coupling rate and the field normalization ℱ².

    ℱ² = ħωs / (2 ε0 n L) and g = -8 ε0 l χxxxx ℱ⁴ / (ħ π w²).
    """
    if p.l >= p.rayleigh_length:
        warnings.warn(
            f"medium length {p.l} m is not shorter than the Rayleigh length "
            f"{p.rayleigh_length:.3g} m",
            stacklevel=2,
        )
    F2 = p.hbar * p.omega_s / (2 * p.eps0 * p.n * p.L)
    g = -8 * p.eps0 * p.l * p.chi_xxxx * F2**2 / (p.hbar * math.pi * p.w**2)
    return g, F2


# Hamiltonians ---------------------------------------------------------------


def _op(modes):
    a = {m: OperatorPolynomial.annihilation(modes, m) for m in modes}
    ad = {m: OperatorPolynomial.creation(modes, m) for m in modes}
    return a, ad


def build_opo_hamiltonian(p: OpoParams) -> OperatorPolynomial:
    """i(ℰp b† + χ b ax† ay†) + H.c. on modes (sig_x, sig_y, pump_b)."""
    a, ad = _op(OPO_MODES)
    h = 1j * (p.pump * ad["pump_b"] + p.chi * a["pump_b"] * ad["sig_x"] * ad["sig_y"])
    return h + h.adjoint()


def build_opo_signal_hamiltonian(p: OpoParams, beta=None) -> OperatorPolynomial:
    """Signal-only OPO Hamiltonian with the pump replaced by its amplitude.

    Defaults to the below-threshold pump ``beta = pump / gamma_p``.
    """
    if beta is None:
        beta = p.pump / p.gamma_p
    a, ad = _op(OPO_SIGNAL_MODES)
    h = 1j * p.chi * beta * ad["sig_x"] * ad["sig_y"]
    return h + h.adjoint()


def circular_pump_config(rho: float):
    """Pump amplitudes ``(α1x, α1y, α2x, α2y)`` of two orthogonal circular pumps."""
    r = rho / SQRT2
    return (complex(r), 1j * r, complex(r), -1j * r)


def chi3_linear_parts(p: Chi3Params, pumps=None):
    """Return ``(H0, H_spm, H_cpm, H_fwm)`` in the (sig_x, sig_y) basis."""
    if pumps is None:
        pumps = circular_pump_config(math.sqrt(p.rho2))
    a1x, a1y, a2x, a2y = (complex(z) for z in pumps)
    A, B = p.A, p.B
    a, ad = _op(CHI3_LINEAR_MODES)
    ax, ay, axd, ayd = a["sig_x"], a["sig_y"], ad["sig_x"], ad["sig_y"]
    nx, ny = axd * ax, ayd * ay

    h0 = p.delta * (nx + ny)
    spm = axd * axd * ax * ax + ayd * ayd * ay * ay
    cpm = (
        sum(4 * (abs(ajx) ** 2 + A * abs(ajy) ** 2) for ajx, ajy in ((a1x, a1y), (a2x, a2y))) * nx
        + sum(4 * (abs(ajy) ** 2 + A * abs(ajx) ** 2) for ajx, ajy in ((a1x, a1y), (a2x, a2y))) * ny
        + 4 * A * nx * ny
    )
    cross = sum(
        4 * (B * np.conj(ajx) * ajy + A * ajx * np.conj(ajy))
        for ajx, ajy in ((a1x, a1y), (a2x, a2y))
    )
    fwm = (
        B * axd * axd * ay * ay
        + 2 * (a1x * a2x + B * a1y * a2y) * axd * axd
        + 2 * (a1y * a2y + B * a1x * a2x) * ayd * ayd
        + cross * axd * ay
        + 4 * A * (a1x * a2y + a1y * a2x) * axd * ayd
    )
    fwm = fwm + fwm.adjoint()
    return h0, spm, cpm, fwm


def build_chi3_linear(p: Chi3Params, pumps=None) -> OperatorPolynomial:
    h0, spm, cpm, fwm = chi3_linear_parts(p, pumps)
    return h0 + 0.75 * p.g * (spm + cpm + fwm)


def build_chi3_circular(p: Chi3Params) -> OperatorPolynomial:
    """χ(3) Hamiltonian in the circular (sig_plus, sig_minus) basis."""
    a, ad = _op(CHI3_CIRCULAR_MODES)
    ap, am = a["sig_plus"], a["sig_minus"]
    apd, amd = ad["sig_plus"], ad["sig_minus"]
    npl, nmi = apd * ap, amd * am
    B, rho2 = p.B, p.rho2

    h0 = p.delta * (npl + nmi)
    spm = (1 - B) * (apd * apd * ap * ap + amd * amd * am * am)
    cpm = 2 * (1 + B) * npl * nmi + 2 * rho2 * (3 - B) * (npl + nmi)
    fwm = 2 * rho2 * (1 + B) * (ap * am + apd * amd)
    return h0 + 0.75 * p.g * (spm + cpm + fwm)


# a_x = (a+ + a-)/√2, a_y = i(a+ - a-)/√2
LINEAR_TO_CIRCULAR = {
    "sig_x": {"sig_plus": 1 / SQRT2, "sig_minus": 1 / SQRT2},
    "sig_y": {"sig_plus": 1j / SQRT2, "sig_minus": -1j / SQRT2},
}


def linear_to_circular(h: OperatorPolynomial) -> OperatorPolynomial:
    return substitute(h, CHI3_CIRCULAR_MODES, LINEAR_TO_CIRCULAR)


def verify_basis_equivalence(p: Chi3Params) -> float:
    """Largest coefficient mismatch between the two χ(3) Hamiltonian forms."""
    pumps = circular_pump_config(math.sqrt(p.rho2))
    converted = linear_to_circular(build_chi3_linear(p, pumps))
    diff = (converted - build_chi3_circular(p)).without_constant()
    return diff.norm()


def number_difference(modes, charges) -> OperatorPolynomial:
    """Conserved charge ``sum_m q_m n_m`` of a phase symmetry."""
    out = OperatorPolynomial.zero(modes)
    for label in modes:
        q = charges.get(label, 0)
        if q:
            out = out + q * OperatorPolynomial.number(modes, label)
    return out


def symmetry_residual(h: OperatorPolynomial, charges, theta: float) -> float:
    from .operators import phase_rotate

    return (h - phase_rotate(h, theta, charges)).norm()


def charge_commutator(h: OperatorPolynomial, charges) -> OperatorPolynomial:
    """``[Q, h]`` for ``Q = Σ q_m n_m``, computed monomial by monomial.

    Each normally ordered monomial is an eigen-operator of ``[Q, ·]`` with
    integer eigenvalue ``Σ q_m (c_m - a_m)``, so the result is exact and
    free of the round-off a generic product would accumulate.
    """
    q = [charges.get(label, 0) for label in h.modes]
    terms = {}
    for key, coeff in h.terms.items():
        net = sum(qm * (c - a) for qm, (c, a) in zip(q, key))
        if net:
            terms[key] = net * coeff
    return OperatorPolynomial(h.modes, terms)


def conservation_residual(h: OperatorPolynomial, charges) -> float:
    return charge_commutator(h, charges).norm()


# Cavity bundles consumed by the dynamics modules -----------------------------


@dataclass(frozen=True)
class CavityModel:
    """A Hamiltonian with per-mode damping and its symmetry data.

    ``gauge_pairs`` lists ``(kept, tied)`` mode pairs set equal when solving
    for symmetry-broken steady states; ``amplitude_scale`` sets the seed grid.
    """

    name: str
    hamiltonian: OperatorPolynomial
    damping: tuple
    charges: dict
    signal_modes: tuple
    gauge_pairs: tuple = ()
    amplitude_scale: float = 1.0
    params: object = field(default=None, compare=False)

    @property
    def modes(self):
        return self.hamiltonian.modes

    @property
    def gamma_s(self):
        return self.damping[self.modes.index(self.signal_modes[0])]

    @property
    def signal_basis(self):
        return "circular" if self.signal_modes == CHI3_CIRCULAR_MODES else "linear"

    def charge_vector(self):
        return np.array([self.charges.get(m, 0) for m in self.modes], dtype=int)

    def signal_indices(self):
        return [self.modes.index(m) for m in self.signal_modes]


def chi3_model(p: Chi3Params) -> CavityModel:
    scale = math.sqrt(max(p.gamma_s, abs(p.delta)) / abs(p.g)) if p.g else 1.0
    return CavityModel(
        name="chi3",
        hamiltonian=build_chi3_circular(p),
        damping=(p.gamma_s, p.gamma_s),
        charges=dict(CHI3_CHARGES),
        signal_modes=CHI3_CIRCULAR_MODES,
        gauge_pairs=(("sig_plus", "sig_minus"),),
        amplitude_scale=scale,
        params=p,
    )


def opo_model(p: OpoParams) -> CavityModel:
    """Three-mode OPO (signal x, signal y, pump)."""
    scale = math.sqrt(max(p.pump, p.gamma_s) / p.chi) if p.chi else 1.0
    return CavityModel(
        name="opo",
        hamiltonian=build_opo_hamiltonian(p),
        damping=(p.gamma_s, p.gamma_s, p.gamma_p),
        charges=dict(OPO_CHARGES),
        signal_modes=OPO_SIGNAL_MODES,
        gauge_pairs=(("sig_x", "sig_y"),),
        amplitude_scale=scale,
        params=p,
    )


def opo_reduced_model(p: OpoParams, beta=None) -> CavityModel:
    """Signal-only OPO with the pump held at a classical amplitude."""
    return CavityModel(
        name="opo_reduced",
        hamiltonian=build_opo_signal_hamiltonian(p, beta),
        damping=(p.gamma_s, p.gamma_s),
        charges={"sig_x": 1, "sig_y": -1},
        signal_modes=OPO_SIGNAL_MODES,
        gauge_pairs=(("sig_x", "sig_y"),),
        amplitude_scale=1.0,
        params=p,
    )
