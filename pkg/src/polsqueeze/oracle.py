"""Exact steady states of the cavity master equation in truncated Fock space.

The density matrix is vectorized row-major, ``vec(ρ)[i*d + j] = ρ[i, j]``,
so ``vec(A ρ B) = (A ⊗ Bᵀ) vec(ρ)``. Damping follows the convention of the
mean-field equations: ``γ(2aρa† − a†aρ − ρa†a)`` drains the amplitude at
rate ``γ``.

When the Hamiltonian commutes with a charge ``Q = Σ q_m n_m`` the
Liouvillian does not mix coherences ``|i⟩⟨j|`` of different ``Q_i − Q_j``.
The steady state lives in the ``Q_i = Q_j`` block, and solving there keeps
problems like two modes at cutoff 24 small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fluctuations import covariance_lyapunov, linearize
from .meanfield import MeanField
from .models import CavityModel, number_difference
from .operators import OperatorPolynomial, TruncationError, commutator, to_matrix

DIMENSION_CAP = 4096
DENSE_LIMIT = 400  # largest block solved by dense SVD
NULL_TOL = 1e-9

COMPARISON_COLUMNS = ("point", "moment", "oracle", "linearized", "rel_dev")


class DimensionError(ValueError):
    pass


class SteadyStateError(RuntimeError):
    """Raised when the Liouvillian null space is not one dimensional."""

    def __init__(self, msg, null_dim=None):
        super().__init__(msg)
        self.null_dim = null_dim


@dataclass(frozen=True)
class TruncatedSpace:
    modes: tuple
    cutoffs: tuple
    cap: int = DIMENSION_CAP

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "cutoffs", tuple(int(n) for n in self.cutoffs))
        if len(self.modes) != len(self.cutoffs):
            raise ValueError("one cutoff per mode is required")
        if any(n < 1 for n in self.cutoffs):
            raise ValueError("cutoffs must be at least 1")
        if self.dim > self.cap:
            raise DimensionError(f"dimension {self.dim} exceeds cap {self.cap}")

    @property
    def dim(self):
        return math.prod(n + 1 for n in self.cutoffs)

    def occupations(self):
        """Photon number of each mode for every basis state, shape (dim, M)."""
        grids = np.meshgrid(*[np.arange(n + 1) for n in self.cutoffs], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def charge(self, charges):
        q = np.array([charges.get(m, 0) for m in self.modes])
        return self.occupations() @ q

    def matrix(self, op: OperatorPolynomial, sparse=False):
        if tuple(op.modes) != self.modes:
            raise DimensionError(f"operator modes {op.modes} differ from {self.modes}")
        return to_matrix(op, self.cutoffs, sparse=sparse)

    def doubled(self):
        return TruncatedSpace(self.modes, tuple(2 * n for n in self.cutoffs), self.cap)


@dataclass
class DensityMatrix:
    matrix: np.ndarray
    space: TruncatedSpace

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionError("density matrix shape does not match its space")
        if np.abs(m - m.conj().T).max() > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > 1e-8:
            raise ValueError(f"trace {np.trace(m).real:.3e} differs from 1")
        if np.linalg.eigvalsh(m).min() < -1e-8:
            raise ValueError("density matrix has a negative eigenvalue")
        self.matrix = m


def liouvillian(h: OperatorPolynomial, damping, space: TruncatedSpace):
    """Sparse superoperator acting on row-major ``vec(ρ)``."""
    if len(damping) != len(space.modes):
        raise ValueError("one damping rate per mode is required")
    hm = space.matrix(h, sparse=True)
    eye = sp.identity(space.dim, format="csr")
    out = -1j * (sp.kron(hm, eye) - sp.kron(eye, hm.T))
    for label, gamma in zip(space.modes, damping):
        if gamma == 0:
            continue
        a = space.matrix(OperatorPolynomial.annihilation(space.modes, label), sparse=True)
        n = space.matrix(OperatorPolynomial.number(space.modes, label), sparse=True)
        out = out + gamma * (2 * sp.kron(a, a.conj()) - sp.kron(n, eye) - sp.kron(eye, n.T))
    return out.tocsr()


def trace_functional(space: TruncatedSpace):
    return np.eye(space.dim).ravel()


def trace_preservation_residual(lv, space):
    return float(np.abs(lv.T @ trace_functional(space)).max())


def _sector(space, charges):
    if charges is None:
        return None
    q = space.charge(charges)
    keep = (q[:, None] == q[None, :]).ravel()
    return np.flatnonzero(keep)


def _symmetric(h, charges):
    return charges is not None and commutator(number_difference(h.modes, charges), h).norm() < 1e-12


def _null_vector_dense(lmat, tol):
    _, s, vh = sla.svd(lmat)
    null_dim = int(np.sum(s <= tol * max(s[0], 1.0)))
    if null_dim != 1:
        raise SteadyStateError(f"null space has dimension {null_dim}", null_dim)
    return vh[-1].conj()


def _null_vector_sparse(lmat, tol):
    """Null vector by shift-invert Arnoldi on a single LU factorization.

    The two eigenvalues of ``L`` closest to a tiny shift are computed; the
    closest one must vanish and the next must not.
    """
    n = lmat.shape[0]
    scale = max(1.0, spla.norm(lmat, 1))
    shift = 1e-7 * scale
    lu = spla.splu((lmat - shift * sp.identity(n, format="csc")).tocsc(), permc_spec="MMD_AT_PLUS_A")
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
    mu, vecs = spla.eigs(op, k=2, which="LM", v0=np.ones(n, dtype=complex))
    lam = shift + 1.0 / mu
    order = np.argsort(np.abs(lam))
    lam, vecs = lam[order], vecs[:, order]
    if abs(lam[0]) > tol * scale:
        raise SteadyStateError(f"no stationary state: smallest |eigenvalue| {abs(lam[0]):.3e}", 0)
    if abs(lam[1]) <= tol * scale:
        raise SteadyStateError("null space has dimension at least 2", 2)
    return vecs[:, 0]


def steady_state(h: OperatorPolynomial, damping, space: TruncatedSpace, charges=None, tol=NULL_TOL):
    """Unique stationary density matrix of the master equation.

    ``charges`` enables the block reduction when ``h`` conserves the
    corresponding number difference (checked; ignored otherwise).
    """
    lv = liouvillian(h, damping, space)
    keep = _sector(space, charges) if _symmetric(h, charges) else None
    trace = trace_functional(space)
    if keep is not None:
        lmat = lv[keep][:, keep]
        trace_row = trace[keep]
    else:
        lmat, trace_row = lv, trace
    if lmat.shape[0] <= DENSE_LIMIT:
        vec = _null_vector_dense(lmat.toarray(), tol)
    else:
        vec = _null_vector_sparse(lmat, tol)
    vec = vec / (trace_row @ vec)
    full = np.zeros(space.dim**2, dtype=complex)
    if keep is not None:
        full[keep] = vec
    else:
        full = vec
    resid = np.abs(lv @ full).max()
    if resid > 1e-9 * max(1.0, spla.norm(lv, np.inf)):
        raise SteadyStateError(f"steady-state residual {resid:.3e}")
    rho = full.reshape(space.dim, space.dim)
    return DensityMatrix(0.5 * (rho + rho.conj().T), space)


def moments(rho: DensityMatrix, obs: OperatorPolynomial) -> complex:
    return complex(np.trace(rho.matrix @ rho.space.matrix(obs)))


def symmetry_deviation(rho: DensityMatrix, charges, theta: float) -> float:
    """``‖U ρ U† − ρ‖`` for the phase rotation generated by ``charges``."""
    phase = np.exp(1j * theta * rho.space.charge(charges))
    rotated = phase[:, None] * rho.matrix * phase.conj()[None, :]
    return float(np.linalg.norm(rotated - rho.matrix))


def conservation_check(h: OperatorPolynomial, cutoffs, charges) -> float:
    """Frobenius norm of ``[Q, H]`` on states with total photons ≤ cutoff − deg H."""
    space = TruncatedSpace(h.modes, cutoffs, cap=10**6)
    q = space.matrix(number_difference(h.modes, charges))
    hm = space.matrix(h)
    comm = q @ hm - hm @ q
    safe = np.flatnonzero(space.occupations().sum(axis=1) <= min(space.cutoffs) - h.degree())
    return float(np.linalg.norm(comm[np.ix_(safe, safe)]))


def quadrature_operators(modes):
    """``[(x_1, y_1), ...]`` with ``x = a + a†`` and ``y = −i(a − a†)``."""
    out = []
    for m in modes:
        a = OperatorPolynomial.annihilation(modes, m)
        ad = a.adjoint()
        out.append((a + ad, -1j * (a - ad)))
    return out


def quadrature_covariance(rho: DensityMatrix):
    """Symmetrised quadrature covariance, same ordering as the linearisation."""
    qs = [q for pair in quadrature_operators(rho.space.modes) for q in pair]
    mean = np.array([moments(rho, q).real for q in qs])
    n = len(qs)
    sigma = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            sym = 0.5 * (qs[i] * qs[j] + qs[j] * qs[i])
            sigma[i, j] = sigma[j, i] = moments(rho, sym).real - mean[i] * mean[j]
    return sigma, mean


def oracle_moments(rho: DensityMatrix):
    """Named second moments: photon numbers and covariance entries."""
    sigma, _ = quadrature_covariance(rho)
    return _named(sigma, rho.space.modes)


def _named(sigma, modes):
    labels = [f"{q}_{m}" for m in modes for q in ("x", "y")]
    out = {}
    for k, m in enumerate(modes):
        out[f"n_{m}"] = (sigma[2 * k, 2 * k] + sigma[2 * k + 1, 2 * k + 1] - 2) / 4
    for i in range(len(labels)):
        for j in range(i, len(labels)):
            out[f"cov({labels[i]},{labels[j]})"] = sigma[i, j]
    return out


def _scale(name, sigma_named):
    """Reference magnitude for the relative deviation of a named moment.

    Covariance entries are measured against the geometric mean of the two
    variances involved (their Cauchy-Schwarz bound), so entries that vanish
    in the linearized theory still get a meaningful relative figure.
    """
    if name.startswith("n_"):
        return abs(sigma_named[name])
    a, b = name[4:-1].split(",")
    return math.sqrt(sigma_named[f"cov({a},{a})"] * sigma_named[f"cov({b},{b})"])


def relative_deviations(values, reference):
    return {k: abs(values[k] - reference[k]) / max(_scale(k, reference), 1e-300) for k in reference}


def linearized_moments(model: CavityModel):
    """Lyapunov moments around the trivial state of ``model``."""
    state = MeanField(model).trivial_state()
    sigma = covariance_lyapunov(linearize(model, state))
    return _named(sigma, model.modes)


def solve_model(model: CavityModel, cutoffs, cap=DIMENSION_CAP) -> DensityMatrix:
    space = TruncatedSpace(model.modes, cutoffs, cap)
    return steady_state(model.hamiltonian, model.damping, space, model.charges)


def compare(model: CavityModel, cutoffs, point="point"):
    """Oracle against linearized moments; rows keyed by ``COMPARISON_COLUMNS``."""
    lin = linearized_moments(model)
    orc = oracle_moments(solve_model(model, cutoffs))
    dev = relative_deviations(orc, lin)
    return [
        {"point": point, "moment": k, "oracle": orc[k], "linearized": lin[k], "rel_dev": dev[k]}
        for k in lin
    ]


def cutoff_drift(model: CavityModel, cutoffs):
    """Largest relative change of any moment when every cutoff is doubled."""
    base = oracle_moments(solve_model(model, cutoffs))
    fine = oracle_moments(solve_model(model, tuple(2 * n for n in cutoffs)))
    return max(relative_deviations(base, fine).values())


__all__ = [
    "COMPARISON_COLUMNS",
    "DIMENSION_CAP",
    "DensityMatrix",
    "DimensionError",
    "SteadyStateError",
    "TruncatedSpace",
    "TruncationError",
    "compare",
    "conservation_check",
    "cutoff_drift",
    "linearized_moments",
    "liouvillian",
    "moments",
    "oracle_moments",
    "quadrature_covariance",
    "solve_model",
    "steady_state",
    "symmetry_deviation",
    "trace_preservation_residual",
]
