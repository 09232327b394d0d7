"""Classical mean-field dynamics of the damped cavity models.

Each mode obeys ``dα_m/dt = -γ_m α_m - i ∂H/∂α_m*`` where ``H(α, α*)`` is
the normally ordered Hamiltonian with operators replaced by amplitudes.
Linearized dynamics are written in the quadrature coordinates
``x = α + α* = 2 Re α``, ``y = -i(α - α*) = 2 Im α``, ordered
``(x_1, y_1, x_2, y_2, ...)``.

Symmetry-broken states are solved in a fixed gauge (paired modes set equal)
by Newton iteration with deflation, so that the trivial state and already
found roots repel the iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .models import Chi3Params, CavityModel, OpoParams, chi3_model, opo_model
from .operators import OperatorPolynomial
from .polarization import JonesVector, to_linear

STATIONARY_TOL = 1e-10
GOLDSTONE_TOL = 1e-8
STABILITY_MARGIN = 1e-9


class NotStationaryError(ValueError):
    """The supplied state does not satisfy the steady-state equations."""


# polynomial calculus ---------------------------------------------------------


def _falling(n, d):
    out = np.ones_like(n, dtype=float)
    for j in range(d):
        out = out * (n - j)
    return out


class CompiledPolynomial:
    """Fast evaluation of a polynomial and its Wirtinger derivatives.

    Every derivative needed by the dynamics (gradient and the three Hessian
    blocks) is tabulated once, so one stacked array product evaluates them
    all at a given amplitude vector.
    """

    def __init__(self, poly: OperatorPolynomial):
        self.modes = poly.modes
        self.coeffs, self.cre, self.ann = poly.arrays()
        self.size = n = len(poly.modes)
        specs = [((k,), ()) for k in range(n)]
        specs += [((k,), (l,)) for k in range(n) for l in range(n)]
        specs += [((k, l), ()) for k in range(n) for l in range(n)]
        specs += [((), (k, l)) for k in range(n) for l in range(n)]
        tables = [self._table(dc, dl) for dc, dl in specs]
        self._weights = np.array([w for w, _, _ in tables])
        self._p = np.array([p for _, p, _ in tables])
        self._q = np.array([q for _, _, q in tables])

    def _table(self, d_conj, d_lin):
        dc = np.bincount(np.asarray(d_conj, dtype=int), minlength=self.size)
        dl = np.bincount(np.asarray(d_lin, dtype=int), minlength=self.size)
        fac = np.ones(len(self.coeffs))
        for m in range(self.size):
            fac = fac * _falling(self.cre[:, m], dc[m]) * _falling(self.ann[:, m], dl[m])
        p = np.clip(self.cre - dc, 0, None)
        q = np.clip(self.ann - dl, 0, None)
        return self.coeffs * fac, p, q

    def derivative(self, alpha, d_conj=(), d_lin=()):
        """``∂^k H / ∂α*_{d_conj} ∂α_{d_lin}``; index lists may repeat."""
        alpha = np.asarray(alpha, dtype=complex)
        w, p, q = self._table(d_conj, d_lin)
        return np.sum(w * np.prod(np.conj(alpha) ** p * alpha**q, axis=1))

    def value(self, alpha):
        return self.derivative(alpha)

    def _all(self, alpha):
        alpha = np.asarray(alpha, dtype=complex)
        mono = np.prod(np.conj(alpha) ** self._p * alpha**self._q, axis=2)
        return np.sum(self._weights * mono, axis=1)

    def grad_conj(self, alpha):
        alpha = np.asarray(alpha, dtype=complex)
        w, p, q = self._weights[: self.size], self._p[: self.size], self._q[: self.size]
        return np.sum(w * np.prod(np.conj(alpha) ** p * alpha**q, axis=2), axis=1)

    def hessians(self, alpha):
        """Return ``(H_cl, H_cc, H_ll)`` with ``H_cl[k, l] = ∂²H/∂α*_k ∂α_l``."""
        n = self.size
        vals = self._all(alpha)[n:].reshape(3, n, n)
        return vals[0], vals[1], vals[2]


def complex_to_real_jacobian(a, b):
    """Real matrix of ``dz_k = a_kl z_l + b_kl z_l*`` in (Re, Im) pairs."""
    n = a.shape[0]
    out = np.empty((2 * n, 2 * n))
    s, d = a + b, a - b
    out[0::2, 0::2] = s.real
    out[0::2, 1::2] = -d.imag
    out[1::2, 0::2] = s.imag
    out[1::2, 1::2] = d.real
    return out


def to_quadratures(alpha):
    alpha = np.asarray(alpha, dtype=complex)
    out = np.empty(2 * len(alpha))
    out[0::2] = 2 * alpha.real
    out[1::2] = 2 * alpha.imag
    return out


# classical states --------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalState:
    modes: tuple
    amplitudes: np.ndarray = field(compare=False)

    def __getitem__(self, label):
        return self.amplitudes[self.modes.index(label)]

    def signal(self, model: CavityModel):
        return self.amplitudes[model.signal_indices()]

    def is_trivial(self, model: CavityModel, tol=1e-9):
        return np.linalg.norm(self.signal(model)) <= tol * model.amplitude_scale

    def polarization(self, model: CavityModel) -> JonesVector:
        """Jones vector of the mean signal field (unnormalized)."""
        s = self.signal(model)
        if model.signal_basis == "circular":
            return to_linear(s[0], s[1])
        return JonesVector(s[0], s[1])

    def rotated(self, model: CavityModel, theta):
        q = model.charge_vector()
        return ClassicalState(self.modes, self.amplitudes * np.exp(1j * q * theta))


class MeanField:
    """Vector field, Jacobians and steady-state search for one cavity model."""

    def __init__(self, model: CavityModel):
        self.model = model
        self.poly = CompiledPolynomial(model.hamiltonian)
        self.gamma = np.asarray(model.damping, dtype=float)
        self.n = len(model.modes)
        sig = set(model.signal_indices())
        tied = {model.modes.index(t) for _, t in model.gauge_pairs}
        self.tie = {model.modes.index(t): model.modes.index(k) for k, t in model.gauge_pairs}
        self.unknown = [m for m in range(self.n) if m not in tied]
        self.unknown_signal = np.array([m in sig for m in self.unknown])
        self.nonsignal = [m for m in range(self.n) if m not in sig]
        h2 = model.hamiltonian
        quad = max(
            (abs(c) for k, c in h2.terms.items() if sum(x + y for x, y in k) <= 2),
            default=0.0,
        )
        self.rate_scale = max(float(self.gamma.max()), quad)

    # dynamics ----------------------------------------------------------------

    def vector_field(self, alpha):
        alpha = np.asarray(alpha, dtype=complex)
        return -self.gamma * alpha - 1j * self.poly.grad_conj(alpha)

    def complex_jacobian(self, alpha):
        h_cl, h_cc, _ = self.poly.hessians(alpha)
        a = -np.diag(self.gamma).astype(complex) - 1j * h_cl
        b = -1j * h_cc
        return a, b

    def jacobian(self, alpha):
        """Real Jacobian in quadrature order (x_1, y_1, x_2, y_2, ...)."""
        return complex_to_real_jacobian(*self.complex_jacobian(alpha))

    def hessian(self, alpha):
        """Real Hessian of ``H`` with respect to quadrature fluctuations."""
        h_cl, h_cc, h_ll = self.poly.hessians(alpha)
        n = self.n
        s = np.empty((2 * n, 2 * n))
        lc = h_cl.T  # lc[n, m] = ∂_n ∂̄_m
        s[0::2, 0::2] = (0.25 * (h_ll + lc + h_cl + h_cc)).real
        s[0::2, 1::2] = (0.25j * (h_ll - lc + h_cl - h_cc)).real
        s[1::2, 1::2] = (-0.25 * (h_ll - lc - h_cl + h_cc)).real
        s[1::2, 0::2] = s[0::2, 1::2].T
        return s

    def residual_norm(self, alpha):
        return float(np.linalg.norm(self.vector_field(alpha)))

    # gauge-reduced problem ---------------------------------------------------

    def expand(self, u):
        z = u[0::2] + 1j * u[1::2]
        alpha = np.zeros(self.n, complex)
        alpha[self.unknown] = z
        for t, k in self.tie.items():
            alpha[t] = alpha[k]
        return alpha

    def reduce(self, alpha):
        return to_quadratures(np.asarray(alpha)[self.unknown]) / 2

    def _reduced(self, u, want_jac=True):
        alpha = self.expand(u)
        f = self.vector_field(alpha)[self.unknown]
        r = np.empty(2 * len(f))
        r[0::2], r[1::2] = f.real, f.imag
        if not want_jac:
            return r, None
        jac = self.jacobian(alpha)
        cols = jac.copy()
        for t, k in self.tie.items():
            cols[:, 2 * k : 2 * k + 2] += jac[:, 2 * t : 2 * t + 2]
        idx = np.concatenate([[2 * m, 2 * m + 1] for m in self.unknown])
        return r, cols[np.ix_(idx, idx)]

    def _deflated(self, u, known, want_jac=True):
        """Residual scaled by 1/|signal| and the deflation factors of ``known``."""
        r, j = self._reduced(u, want_jac)
        sig_rows = np.repeat(self.unknown_signal, 2)
        zsig = np.where(sig_rows, u, 0.0)
        nz = np.linalg.norm(zsig)
        if nz == 0:
            return None, None
        w = np.where(sig_rows, 1.0 / nz, 1.0)
        wr = w * r
        m, grad_m = 1.0, np.zeros_like(u)
        for uk in known:
            d = u - uk
            d2 = d @ d
            fac = 1.0 / d2 + 1.0
            m *= fac
            grad_m += (-2 * d / d2**2) / fac
        if not want_jac:
            return m * wr, None
        jw = w[:, None] * j + np.outer(np.where(sig_rows, r, 0.0), -zsig / nz**3)
        return m * wr, m * jw + np.outer(wr, m * grad_m)

    def _newton(self, u, known, maxiter=60, tol=None):
        tol = 1e-12 * self.rate_scale if tol is None else tol
        s, j = self._deflated(u, known)
        if s is None:
            return None
        norm = np.linalg.norm(s)
        for _ in range(maxiter):
            if norm < tol:
                return u
            try:
                step = np.linalg.solve(j, -s)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(j, -s, rcond=None)[0]
            lam = 1.0
            while lam > 1e-4:
                trial = u + lam * step
                s_t, _ = self._deflated(trial, known, want_jac=False)
                if s_t is not None and np.linalg.norm(s_t) < (1 - 1e-4 * lam) * norm:
                    break
                lam *= 0.5
            else:
                return None
            u = trial
            s, j = self._deflated(u, known)
            norm = np.linalg.norm(s)
        return u if norm < tol else None

    # public search -----------------------------------------------------------

    def trivial_state(self):
        alpha = np.zeros(self.n, complex)
        if self.nonsignal:
            idx = self.nonsignal
            rows = np.concatenate([[2 * m, 2 * m + 1] for m in idx])
            for _ in range(50):
                f = self.vector_field(alpha)[idx]
                if np.linalg.norm(f) < 1e-14 * self.rate_scale:
                    break
                r = np.empty(2 * len(idx))
                r[0::2], r[1::2] = f.real, f.imag
                j = self.jacobian(alpha)[np.ix_(rows, rows)]
                step = np.linalg.solve(j, -r)
                alpha[idx] += step[0::2] + 1j * step[1::2]
        return ClassicalState(self.model.modes, alpha)

    def canonical(self, alpha):
        """Pick the representative of ``alpha`` and its π-rotated partner."""
        q = self.model.charge_vector()
        partner = alpha * np.exp(1j * np.pi * q)
        s = alpha[self.model.signal_indices()[0]]
        if s.real < -1e-12 * abs(s) or (abs(s.real) <= 1e-12 * abs(s) and s.imag < 0):
            return partner
        return alpha

    def default_seeds(self):
        base = self.trivial_state().amplitudes
        scale = self.model.amplitude_scale
        seeds = []
        for mag in (0.05, 0.2, 0.5, 1.0, 1.6, 2.5, 4.0):
            for phase in np.linspace(0, 2 * np.pi, 6, endpoint=False) + 0.3:
                alpha = base.copy()
                for m in self.model.signal_indices():
                    alpha[m] = scale * mag * np.exp(1j * phase)
                seeds.append(alpha)
        return seeds

    def bright_states(self, seeds=None, max_roots=None):
        """Distinct symmetry-broken steady states, largest signal first."""
        seeds = self.default_seeds() if seeds is None else seeds
        known_u, found = [], []
        for seed in seeds:
            u = self._newton(self.reduce(seed), known_u)
            if u is None:
                continue
            alpha = self.canonical(self.expand(u))
            if self.residual_norm(alpha) > STATIONARY_TOL * self.rate_scale:
                alpha = self._polish(alpha)
                if alpha is None:
                    continue
            sig = np.linalg.norm(alpha[self.model.signal_indices()])
            if sig <= 1e-12 * self.model.amplitude_scale:
                continue
            partner = alpha * np.exp(1j * np.pi * self.model.charge_vector())
            known_u += [self.reduce(alpha), self.reduce(partner)]
            found.append(alpha)
            if max_roots is not None and len(found) >= max_roots:
                break
        found.sort(key=lambda a: -np.linalg.norm(a[self.model.signal_indices()]))
        return [ClassicalState(self.model.modes, a) for a in found]

    def _polish(self, alpha):
        u = self.reduce(alpha)
        for _ in range(5):
            r, j = self._reduced(u)
            try:
                u = u - np.linalg.solve(j, r)
            except np.linalg.LinAlgError:
                return None
        alpha = self.canonical(self.expand(u))
        ok = self.residual_norm(alpha) <= STATIONARY_TOL * self.rate_scale
        return alpha if ok else None


# operations --------------------------------------------------------------------


def classical_eom(model: CavityModel):
    """Return the mean-field vector field ``F(α)`` of ``model``."""
    return MeanField(model).vector_field


def steady_states(model: CavityModel, seeds=None):
    """Trivial state followed by the bright-branch representatives."""
    mf = MeanField(model)
    return [mf.trivial_state()] + mf.bright_states(seeds)


@dataclass
class StabilityReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    goldstone_index: int | None
    stable: bool
    zero_count: int = 0

    @property
    def goldstone_vector(self):
        if self.goldstone_index is None:
            return None
        return self.eigenvectors[:, self.goldstone_index]

    @property
    def max_real_excluding_goldstone(self):
        mask = np.ones(len(self.eigenvalues), bool)
        if self.goldstone_index is not None:
            mask[self.goldstone_index] = False
        return float(np.max(self.eigenvalues[mask].real)) if mask.any() else -np.inf


def orbit_tangent(model: CavityModel, state: ClassicalState):
    """Quadrature vector of ``d/dθ`` of the symmetry orbit through ``state``."""
    q = model.charge_vector()
    return to_quadratures(1j * q * state.amplitudes)


def stability(model: CavityModel, state: ClassicalState) -> StabilityReport:
    mf = MeanField(model)
    res = mf.residual_norm(state.amplitudes)
    if res > 1e-8 * mf.rate_scale:
        raise NotStationaryError(f"state residual {res:.3e} exceeds 1e-8")
    vals, vecs = np.linalg.eig(mf.jacobian(state.amplitudes))
    order = np.lexsort((vals.imag, vals.real))
    vals, vecs = vals[order], vecs[:, order]
    zeros = np.flatnonzero(np.abs(vals) < GOLDSTONE_TOL * mf.rate_scale)
    gidx = int(zeros[np.argmin(np.abs(vals[zeros]))]) if len(zeros) else None
    mask = np.ones(len(vals), bool)
    if gidx is not None:
        mask[gidx] = False
    stable = bool(np.all(vals[mask].real <= STABILITY_MARGIN * mf.rate_scale))
    return StabilityReport(vals, vecs, gidx, stable, len(zeros))


def goldstone_overlap(model, state, report: StabilityReport | None = None):
    """|cos| of the angle between the zero mode and the orbit tangent."""
    report = stability(model, state) if report is None else report
    v = report.goldstone_vector
    if v is None:
        return 0.0
    t = orbit_tangent(model, state)
    return float(abs(np.vdot(v, t)) / (np.linalg.norm(v) * np.linalg.norm(t)))


# thresholds ----------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdInterval:
    """Pump-intensity window of the χ(3) bright branch.

    ``lower`` and ``upper`` are the closed-form curves ρ² = γs/2|g| and
    ρ² = (2δ' + √(δ'² - 3γs²))/6|g| with δ' = -sign(g) δ. For
    √3γs < δ' < 2γs the bright branch starts at the other root
    (2δ' - √(δ'² - 3γs²))/6|g| instead, reported as ``branch_lower``.
    """

    lower: float
    upper: float
    exists: bool
    branch_lower: float = math.nan

    def contains(self, rho2):
        return self.exists and self.branch_lower <= rho2 < self.upper


def effective_detuning(p: Chi3Params):
    return -math.copysign(1.0, p.g) * p.delta


def threshold_interval(p: Chi3Params) -> ThresholdInterval:
    if p.g == 0:
        return ThresholdInterval(math.nan, math.nan, False)
    g, d, gs = abs(p.g), effective_detuning(p), p.gamma_s
    lower = gs / (2 * g)
    if d <= math.sqrt(3) * gs:
        return ThresholdInterval(lower, math.nan, False)
    root = math.sqrt(d * d - 3 * gs * gs)
    upper = (2 * d + root) / (6 * g)
    inner = (2 * d - root) / (6 * g)
    exists = lower < upper
    return ThresholdInterval(lower, upper, exists, lower if d >= 2 * gs else inner)


def opo_threshold(p: OpoParams) -> float:
    return p.gamma_p * p.gamma_s / p.chi


# existence scans --------------------------------------------------------------------


def _model_for(params):
    if isinstance(params, Chi3Params):
        return chi3_model(params)
    if isinstance(params, OpoParams):
        return opo_model(params)
    raise TypeError(f"unsupported parameter set {type(params).__name__}")


def control_variable(params):
    return "rho2" if isinstance(params, Chi3Params) else "pump"


def bright_exists(params, hint=None):
    """Whether a bright state exists; returns ``(flag, state_or_None)``.

    Without ``hint`` the full seed grid is searched. With ``hint`` (a bright
    amplitude vector at a nearby control value) only continuation seeds
    around it are tried, which is what bisection needs.
    """
    mf = MeanField(_model_for(params))
    if hint is not None:
        sig = mf.model.signal_indices()
        seeds = []
        for f in (1.0, 0.5, 1.5, 0.1):
            seed = np.array(hint, dtype=complex)
            seed[sig] *= f
            seeds.append(seed)
        found = mf.bright_states(seeds=seeds, max_roots=1)
        return (True, found[0]) if found else (False, None)
    found = mf.bright_states(max_roots=1)
    return (True, found[0]) if found else (False, None)


def existence_boundaries(params, values, tol=1e-10):
    """Bisection-refined control values where the bright branch appears/ends.

    ``values`` is a monotone grid of the control variable (ρ² or ℰp). Returns
    a list of ``(value, kind)`` with kind ``"onset"`` or ``"offset"``.
    """
    var = control_variable(params)
    flags, hints = [], []
    for v in values:
        ok, st = bright_exists(replace(params, **{var: float(v)}))
        flags.append(ok)
        hints.append(None if st is None else st.amplitudes)
    out = []
    for i in range(len(values) - 1):
        if flags[i] == flags[i + 1]:
            continue
        lo, hi = float(values[i]), float(values[i + 1])
        inside_lo = flags[i]
        hint = hints[i] if inside_lo else hints[i + 1]
        while hi - lo > tol * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            ok, st = bright_exists(replace(params, **{var: mid}), hint)
            if ok:
                hint = st.amplitudes
            if ok == inside_lo:
                lo = mid
            else:
                hi = mid
        out.append((0.5 * (lo + hi), "offset" if inside_lo else "onset"))
    return out


SWEEP_COLUMNS = {
    "chi3": ("control", "abs_alpha_plus", "abs_alpha_minus", "max_re_lambda",
             "bright_exists", "bright_stable", "trivial_stable"),
    "opo": ("control", "abs_alpha_x", "abs_alpha_y", "max_re_lambda",
            "bright_exists", "bright_stable", "trivial_stable"),
}


def sweep(params, values):
    """Bifurcation table over a monotone grid of the control variable.

    Each row reports the largest bright state found (zeros when none) and the
    largest real eigenvalue of that state excluding the Goldstone zero.
    """
    var = control_variable(params)
    name = "chi3" if var == "rho2" else "opo"
    rows = []
    for v in values:
        p = replace(params, **{var: float(v)})
        model = _model_for(p)
        states = steady_states(model)
        triv = stability(model, states[0])
        row = {"control": float(v)}
        if len(states) > 1:
            bright = states[1]
            rep = stability(model, bright)
            amps = np.abs(bright.signal(model))
            max_re, b_exists, b_stable = rep.max_real_excluding_goldstone, True, rep.stable
        else:
            amps = np.zeros(2)
            max_re, b_exists, b_stable = triv.max_real_excluding_goldstone, False, False
        cols = SWEEP_COLUMNS[name]
        row[cols[1]], row[cols[2]] = float(amps[0]), float(amps[1])
        row["max_re_lambda"] = max_re
        row["bright_exists"] = b_exists
        row["bright_stable"] = b_stable
        row["trivial_stable"] = triv.stable
        rows.append(row)
    return rows
