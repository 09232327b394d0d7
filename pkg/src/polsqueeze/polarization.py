"""Jones-vector geometry of the signal polarization modes.

Conventions, fixed here and used everywhere else:

* circular amplitudes ``c± = (cx ∓ i cy)/√2`` (the same map as the mode
  operators ``a± = (ax ∓ i ay)/√2``);
* circular unit vectors ``e± = (ex ± i ey)/√2``, so that
  ``cx ex + cy ey = c+ e+ + c- e-``;
* ``e+`` has Stokes ``s3 > 0`` and is reported as right handed.

Polarization states are rays: comparisons ignore a global phase.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


class Model(str, enum.Enum):
    OPO = "opo"
    CHI3 = "chi3"


@dataclass(frozen=True)
class JonesVector:
    """Complex amplitudes on ``e_x`` and ``e_y``."""

    cx: complex
    cy: complex

    def __post_init__(self):
        object.__setattr__(self, "cx", complex(self.cx))
        object.__setattr__(self, "cy", complex(self.cy))
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValueError("Jones vector components must be finite")

    @classmethod
    def from_array(cls, v):
        v = np.asarray(v, dtype=complex)
        return cls(v[0], v[1])

    def as_array(self):
        return np.array([self.cx, self.cy], dtype=complex)

    @property
    def norm2(self):
        return abs(self.cx) ** 2 + abs(self.cy) ** 2

    @property
    def is_normalized(self):
        return abs(self.norm2 - 1.0) < 1e-12

    def normalized(self):
        n = math.sqrt(self.norm2)
        if n == 0:
            raise ValueError("zero Jones vector has no polarization")
        return JonesVector(self.cx / n, self.cy / n)

    def inner(self, other: "JonesVector") -> complex:
        """Hermitian product ``<self|other>``."""
        return np.conj(self.cx) * other.cx + np.conj(self.cy) * other.cy

    def same_ray(self, other: "JonesVector", tol=1e-12) -> bool:
        """True if the two vectors differ by a complex factor only."""
        n = math.sqrt(self.norm2 * other.norm2)
        return abs(abs(self.inner(other)) - n) <= tol * max(n, 1.0)


@dataclass(frozen=True)
class PolarizationEllipse:
    orientation: float
    ellipticity: float
    handedness: str
    degenerate: bool = False  # orientation undefined (circular light)


@dataclass(frozen=True)
class StokesVector:
    s0: float
    s1: float
    s2: float
    s3: float

    def as_array(self):
        return np.array([self.s0, self.s1, self.s2, self.s3])


def to_circular(v: JonesVector) -> tuple[complex, complex]:
    return (v.cx - 1j * v.cy) / SQRT2, (v.cx + 1j * v.cy) / SQRT2


def to_linear(c_plus: complex, c_minus: complex) -> JonesVector:
    return JonesVector((c_plus + c_minus) / SQRT2, 1j * (c_plus - c_minus) / SQRT2)


E_X = JonesVector(1, 0)
E_Y = JonesVector(0, 1)
E_PLUS = JonesVector(1 / SQRT2, 1j / SQRT2)
E_MINUS = JonesVector(1 / SQRT2, -1j / SQRT2)


def linear_mode(angle: float) -> JonesVector:
    """Linear polarization along ``angle`` measured from ``e_x``."""
    return JonesVector(math.cos(angle), math.sin(angle))


def bright_mode(model, theta: float) -> JonesVector:
    model = Model(model)
    if model is Model.OPO:
        # (ex e^{-iθ} + ey e^{iθ})/√2
        return JonesVector(np.exp(-1j * theta) / SQRT2, np.exp(1j * theta) / SQRT2)
    # (e+ e^{-iθ} + e- e^{iθ})/√2 written on ex, ey
    return to_linear(np.exp(-1j * theta) / SQRT2, np.exp(1j * theta) / SQRT2)


def dark_mode(model, theta: float) -> JonesVector:
    model = Model(model)
    if model is Model.OPO:
        return JonesVector(
            1j * np.exp(-1j * theta) / SQRT2, -1j * np.exp(1j * theta) / SQRT2
        )
    return to_linear(-1j * np.exp(-1j * theta) / SQRT2, 1j * np.exp(1j * theta) / SQRT2)


def orthogonal(v: JonesVector) -> JonesVector:
    """Unit vector orthogonal to ``v``."""
    v = v.normalized()
    return JonesVector(-np.conj(v.cy), np.conj(v.cx))


def stokes(v: JonesVector) -> StokesVector:
    if v.norm2 == 0:
        raise ValueError("Stokes parameters of the zero vector are undefined")
    cross = np.conj(v.cx) * v.cy
    return StokesVector(
        v.norm2,
        abs(v.cx) ** 2 - abs(v.cy) ** 2,
        2 * cross.real,
        2 * cross.imag,
    )


def ellipse_params(v: JonesVector, tol=1e-12) -> PolarizationEllipse:
    s = stokes(v)
    ratio = max(-1.0, min(1.0, s.s3 / s.s0))
    if abs(ratio) <= tol:
        chi_e, hand = 0.0, "linear"
    else:
        chi_e = 0.5 * math.asin(ratio)
        hand = "right" if ratio > 0 else "left"
    lin = math.hypot(s.s1, s.s2)
    degenerate = lin <= tol * s.s0
    if degenerate:
        psi = 0.0
    else:
        psi = (0.5 * math.atan2(s.s2, s.s1)) % math.pi
    return PolarizationEllipse(psi, chi_e, hand, degenerate)


def rotation(angle: float):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def qwp_matrix(fast_axis: float):
    """Quarter-wave retarder with its fast axis at ``fast_axis`` from ``e_x``."""
    r = rotation(fast_axis)
    return r @ np.diag([1.0, 1j]) @ r.T


def qwp(v: JonesVector, fast_axis: float) -> JonesVector:
    return JonesVector.from_array(qwp_matrix(fast_axis) @ v.as_array())
