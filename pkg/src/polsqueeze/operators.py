"""Normally ordered polynomials in bosonic mode operators.

A monomial is stored as one ``(creation_power, annihilation_power)`` pair per
mode, with every creation operator standing to the left of every annihilation
operator. Operators of different modes commute, so a multi-mode monomial is the
product of its single-mode normally ordered factors and multiplication reduces
to the single-mode rule

    a^q (a†)^r = sum_k C(q, k) C(r, k) k! (a†)^(r-k) a^(q-k).

The matrix realisation in a truncated Fock space orders the tensor product by
mode index (mode 0 is the most significant factor).
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

MODE_LABELS = ("sig_x", "sig_y", "sig_plus", "sig_minus", "pump_b")
LINEAR_LABELS = ("sig_x", "sig_y")
CIRCULAR_LABELS = ("sig_plus", "sig_minus")


class BasisMismatchError(ValueError):
    """Raised when polynomials over different mode sets are combined."""


class TruncationError(ValueError):
    """Raised when a Fock cutoff cannot represent a polynomial."""


def _check_modes(modes):
    modes = tuple(modes)
    for label in modes:
        if label not in MODE_LABELS:
            raise ValueError(f"unknown mode label {label!r}")
    if len(set(modes)) != len(modes):
        raise ValueError(f"duplicate mode labels in {modes}")
    if set(modes) & set(LINEAR_LABELS) and set(modes) & set(CIRCULAR_LABELS):
        raise BasisMismatchError(
            "linear and circular signal modes cannot share one polynomial"
        )
    return modes


def _single_mode_product(p1, q1, p2, q2):
    """Normal-order a†^p1 a^q1 a†^p2 a^q2; yields ((p, q), weight)."""
    for k in range(min(q1, p2) + 1):
        weight = math.comb(q1, k) * math.comb(p2, k) * math.factorial(k)
        yield (p1 + p2 - k, q1 + q2 - k), weight


class OperatorPolynomial:
    """Finite sum of normally ordered monomials with complex coefficients.

    Parameters
    ----------
    modes : sequence of str
        Mode labels; the position of a label is its mode index.
    terms : mapping, optional
        ``{key: coefficient}`` where ``key`` is a tuple holding one
        ``(creation_power, annihilation_power)`` pair per mode.
    """

    __slots__ = ("modes", "terms")

    def __init__(self, modes, terms=None):
        self.modes = _check_modes(modes)
        clean = {}
        for key, coeff in (terms or {}).items():
            key = tuple((int(c), int(a)) for c, a in key)
            if len(key) != len(self.modes):
                raise ValueError("monomial key length does not match modes")
            if any(c < 0 or a < 0 for c, a in key):
                raise ValueError("negative operator power")
            coeff = complex(coeff)
            if coeff != 0:
                clean[key] = clean.get(key, 0) + coeff
        self.terms = {k: v for k, v in clean.items() if v != 0}

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, modes):
        return cls(modes)

    @classmethod
    def identity(cls, modes, coeff=1.0):
        modes = tuple(modes)
        return cls(modes, {((0, 0),) * len(modes): coeff})

    @classmethod
    def monomial(cls, modes, powers: Mapping[str, tuple[int, int]], coeff=1.0):
        """Build ``coeff * prod_m a_m†^c a_m^a`` from ``{label: (c, a)}``."""
        modes = tuple(modes)
        key = tuple(tuple(powers.get(label, (0, 0))) for label in modes)
        unknown = set(powers) - set(modes)
        if unknown:
            raise ValueError(f"labels {sorted(unknown)} not among {modes}")
        return cls(modes, {key: coeff})

    @classmethod
    def annihilation(cls, modes, label):
        return cls.monomial(modes, {label: (0, 1)})

    @classmethod
    def creation(cls, modes, label):
        return cls.monomial(modes, {label: (1, 0)})

    @classmethod
    def number(cls, modes, label):
        return cls.monomial(modes, {label: (1, 1)})

    # ring operations ----------------------------------------------------

    def _same_basis(self, other):
        if self.modes != other.modes:
            raise BasisMismatchError(
                f"mode sets differ: {self.modes} vs {other.modes}"
            )

    def _coerce(self, other):
        if isinstance(other, OperatorPolynomial):
            self._same_basis(other)
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return OperatorPolynomial.identity(self.modes, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0) + v
        return OperatorPolynomial(self.modes, terms)

    __radd__ = __add__

    def __neg__(self):
        return OperatorPolynomial(self.modes, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return OperatorPolynomial(
                self.modes, {k: v * other for k, v in self.terms.items()}
            )
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        self._same_basis(other)
        out: dict = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                factors = [
                    list(_single_mode_product(p1, q1, p2, q2))
                    for (p1, q1), (p2, q2) in zip(k1, k2)
                ]
                for combo in itertools.product(*factors):
                    key = tuple(pq for pq, _ in combo)
                    weight = math.prod(w for _, w in combo)
                    out[key] = out.get(key, 0) + c1 * c2 * weight
        return OperatorPolynomial(self.modes, out)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __pow__(self, n: int):
        result = OperatorPolynomial.identity(self.modes)
        for _ in range(int(n)):
            result = result * self
        return result

    def __eq__(self, other):
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        return self.modes == other.modes and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return f"OperatorPolynomial({self.modes}, 0)"
        parts = []
        for key, c in sorted(self.terms.items()):
            ops = []
            for label, (cr, an) in zip(self.modes, key):
                ops += [f"{label}†^{cr}"] if cr else []
            for label, (cr, an) in zip(self.modes, key):
                ops += [f"{label}^{an}"] if an else []
            parts.append(f"({c:.6g})" + ("·" + " ".join(ops) if ops else ""))
        return " + ".join(parts)

    # structure ------------------------------------------------------------

    def adjoint(self):
        return OperatorPolynomial(
            self.modes,
            {tuple((a, c) for c, a in k): np.conj(v) for k, v in self.terms.items()},
        )

    @property
    def dag(self):
        return self.adjoint()

    def is_hermitian(self, tol=1e-14):
        diff = self - self.adjoint()
        return diff.norm() <= tol * max(1.0, self.norm())

    def norm(self):
        """Largest coefficient magnitude (0 for the zero polynomial)."""
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def degree(self):
        return max((sum(c + a for c, a in k) for k in self.terms), default=0)

    def max_powers(self):
        """Largest creation or annihilation power of each mode."""
        out = [0] * len(self.modes)
        for key in self.terms:
            for i, (c, a) in enumerate(key):
                out[i] = max(out[i], c, a)
        return tuple(out)

    def constant(self):
        return self.terms.get(((0, 0),) * len(self.modes), 0j)

    def without_constant(self):
        terms = dict(self.terms)
        terms.pop(((0, 0),) * len(self.modes), None)
        return OperatorPolynomial(self.modes, terms)

    def chop(self, tol=1e-14):
        return OperatorPolynomial(
            self.modes, {k: v for k, v in self.terms.items() if abs(v) > tol}
        )

    def coefficient(self, powers: Mapping[str, tuple[int, int]]):
        key = tuple(tuple(powers.get(label, (0, 0))) for label in self.modes)
        return self.terms.get(key, 0j)

    def arrays(self):
        """Return ``(coeffs, creation_powers, annihilation_powers)`` arrays."""
        keys = list(self.terms)
        coeffs = np.array([self.terms[k] for k in keys], dtype=complex)
        cre = np.array([[c for c, _ in k] for k in keys], dtype=int).reshape(
            len(keys), len(self.modes)
        )
        ann = np.array([[a for _, a in k] for k in keys], dtype=int).reshape(
            len(keys), len(self.modes)
        )
        return coeffs, cre, ann


def commutator(p: OperatorPolynomial, q: OperatorPolynomial) -> OperatorPolynomial:
    return p * q - q * p


def _charges_vector(modes, charges):
    if isinstance(charges, Mapping):
        return np.array([charges.get(label, 0) for label in modes], dtype=int)
    charges = np.asarray(charges, dtype=int)
    if charges.shape != (len(modes),):
        raise ValueError("one charge per mode is required")
    return charges


def phase_rotate(p: OperatorPolynomial, theta: float, charges) -> OperatorPolynomial:
    """Apply ``a_m -> a_m exp(i q_m theta)`` to every monomial of ``p``.

    ``charges`` is either a per-mode sequence or a ``{label: charge}`` map
    (missing labels carry charge zero).
    """
    q = _charges_vector(p.modes, charges)
    terms = {}
    for key, coeff in p.terms.items():
        net = sum(qm * (a - c) for qm, (c, a) in zip(q, key))
        terms[key] = coeff * np.exp(1j * theta * net) if net else coeff
    return OperatorPolynomial(p.modes, terms)


def substitute(
    p: OperatorPolynomial,
    new_modes: Sequence[str],
    transform: Mapping[str, Mapping[str, complex]],
) -> OperatorPolynomial:
    """Rewrite ``p`` with every old annihilator a linear combination of new ones.

    ``transform[old][new]`` is the coefficient of ``a_new`` in ``a_old``;
    creators follow by conjugation. Old modes missing from ``transform`` must
    also appear in ``new_modes`` and are carried over unchanged.
    """
    new_modes = _check_modes(new_modes)
    ann = {}
    for old in p.modes:
        if old in transform:
            poly = OperatorPolynomial.zero(new_modes)
            for new, c in transform[old].items():
                poly = poly + c * OperatorPolynomial.annihilation(new_modes, new)
        else:
            poly = OperatorPolynomial.annihilation(new_modes, old)
        ann[old] = poly
    cre = {old: poly.adjoint() for old, poly in ann.items()}

    out = OperatorPolynomial.zero(new_modes)
    for key, coeff in p.terms.items():
        term = OperatorPolynomial.identity(new_modes, coeff)
        for old, (c, _) in zip(p.modes, key):
            if c:
                term = term * cre[old] ** c
        for old, (_, a) in zip(p.modes, key):
            if a:
                term = term * ann[old] ** a
        out = out + term
    return out


def ladder_matrices(cutoff: int):
    """Single-mode ``(a, a†)`` on Fock states 0..cutoff, as dense arrays."""
    a = np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1)
    return a, a.T.copy()


def to_matrix(p: OperatorPolynomial, cutoffs, sparse=False):
    """Fock-space matrix of ``p`` with per-mode photon-number ``cutoffs``.

    Normally ordered monomials are represented exactly at any cutoff that
    covers their powers; ``TruncationError`` is raised otherwise.
    """
    cutoffs = tuple(int(n) for n in cutoffs)
    if len(cutoffs) != len(p.modes):
        raise ValueError("one cutoff per mode is required")
    for label, n, need in zip(p.modes, cutoffs, p.max_powers()):
        if n < 1 or n < need:
            raise TruncationError(
                f"cutoff {n} for {label} cannot hold power {need}"
            )
    dim = math.prod(n + 1 for n in cutoffs)
    cache: dict = {}

    def factor(i, c, a):
        # <n-a+c| a†^c a^a |n> = sqrt(n!/(n-a)! * (n-a+c)!/(n-a)!), one sqrt
        # of an exact integer so integer-valued entries come out exact
        if (i, c, a) not in cache:
            top = cutoffs[i]
            n = np.arange(a, min(top, top + a - c) + 1)
            vals = [math.sqrt(math.perm(k, a) * math.perm(k - a + c, c)) for k in n]
            cache[i, c, a] = sp.csr_matrix(
                (vals, (n - a + c, n)), shape=(top + 1, top + 1)
            )
        return cache[i, c, a]

    out = sp.csr_matrix((dim, dim), dtype=complex)
    for key, coeff in p.terms.items():
        m = sp.csr_matrix(np.ones((1, 1)))
        for i, (c, a) in enumerate(key):
            m = sp.kron(m, factor(i, c, a), format="csr")
        out = out + coeff * m
    out = out.tocsr()
    return out if sparse else out.toarray()


def photon_number_diagonal(cutoffs):
    """Total photon number of every basis state, in tensor order."""
    grids = np.meshgrid(*[np.arange(n + 1) for n in cutoffs], indexing="ij")
    return sum(g.ravel() for g in grids)
