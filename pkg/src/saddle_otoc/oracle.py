"""Brute-force verifiers for the analytic pieces of the package.

Nothing here is used by the trace assembly itself.  Each routine recomputes a
quantity the slow, obvious way so the fast path can be checked against it:

* RK4 integration of Hamilton's equations together with the variational
  equations, giving the full monodromy matrix;
* central finite differences of the Hamiltonian and of the bath frequencies;
* the closed-form Fresnel value of the cut-off reaction trace;
* a split-step grid simulation of the one-dimensional inverted oscillator,
  whose OTOC must grow at twice the Lyapunov rate.
"""
from __future__ import annotations

import cmath
import decimal
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.special import fresnel

from .errors import GridTooSmall, IntegratorDiverged
from .normal_form import (
    ActionPoint,
    ActionPolynomial,
    bath_frequencies,
    eval_hamiltonian,
    frequency_jacobian,
    lyapunov_exponent,
)
from .reaction_trace import chirp_rate, kreac_prefactor
from .stability import symplectic_defect

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Hamilton's equations and the variational flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseState:
    """A point ``(q_u, p_u, theta, J)`` of the normal-form phase space.

    The reaction action is ``I = (p_u**2 - q_u**2) / 2``.
    """

    q_u: float
    p_u: float
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    J: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        J = np.array(self.J, dtype=float).reshape(-1)
        if theta.shape != J.shape:
            raise ValueError("theta and J must have the same length")
        theta.setflags(write=False)
        J.setflags(write=False)
        object.__setattr__(self, "q_u", float(self.q_u))
        object.__setattr__(self, "p_u", float(self.p_u))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "J", J)

    @property
    def f(self):
        return self.J.size

    @property
    def I(self):
        return 0.5 * (self.p_u**2 - self.q_u**2)

    def action_point(self):
        return ActionPoint(self.I, self.J)

    def as_vector(self):
        return np.concatenate(([self.q_u, self.p_u], self.theta, self.J))

    @classmethod
    def from_vector(cls, z, f):
        z = np.asarray(z, dtype=float)
        return cls(z[0], z[1], z[2 : 2 + f], z[2 + f : 2 + 2 * f])

    @classmethod
    def on_nhim(cls, J, theta=None):
        J = np.asarray(J, dtype=float)
        return cls(0.0, 0.0, np.zeros_like(J) if theta is None else theta, J)


def canonical_pairs(f: int):
    """Index pairs ``(coordinate, momentum)`` for the ordering ``(q, p, theta, J)``."""
    return [(0, 1)] + [(2 + k, 2 + f + k) for k in range(f)]


def _vector_field(poly, z, f):
    """Return ``dz/dt`` and its Jacobian ``A = d(dz/dt)/dz``."""
    q, p = z[0], z[1]
    J = z[2 + f :]
    _, grad, hess = poly.jet(ActionPoint(0.5 * (p * p - q * q), J))
    lam, omega = grad[0], grad[1:]
    dlam_dI, dlam_dJ = hess[0, 0], hess[0, 1:]
    C = hess[1:, 1:]
    dI = np.array([-q, p])  # dI/dq, dI/dp

    zdot = np.zeros_like(z)
    zdot[0] = lam * p
    zdot[1] = lam * q
    zdot[2 : 2 + f] = omega

    n = z.size
    A = np.zeros((n, n))
    A[0, 0:2] = p * dlam_dI * dI
    A[0, 1] += lam
    A[0, 2 + f :] = p * dlam_dJ
    A[1, 0:2] = q * dlam_dI * dI
    A[1, 0] += lam
    A[1, 2 + f :] = q * dlam_dJ
    A[2 : 2 + f, 0:2] = np.outer(dlam_dJ, dI)  # dOmega/dI == dLambda/dJ
    A[2 : 2 + f, 2 + f :] = C
    return zdot, A


def _rk4(poly, z0, t, nsteps, f):
    z = z0.copy()
    M = np.eye(z.size)
    h = t / nsteps
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(nsteps):
            z, M = _rk4_step(poly, z, M, h, f)
            if not (np.all(np.isfinite(z)) and np.all(np.isfinite(M))):
                raise IntegratorDiverged("non-finite state during RK4 integration")
    return z, M


def _rk4_step(poly, z, M, h, f):
    k1, A1 = _vector_field(poly, z, f)
    K1 = A1 @ M
    k2, A2 = _vector_field(poly, z + 0.5 * h * k1, f)
    K2 = A2 @ (M + 0.5 * h * K1)
    k3, A3 = _vector_field(poly, z + 0.5 * h * k2, f)
    K3 = A3 @ (M + 0.5 * h * K2)
    k4, A4 = _vector_field(poly, z + h * k3, f)
    K4 = A4 @ (M + h * K3)
    z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    M = M + (h / 6.0) * (K1 + 2 * K2 + 2 * K3 + K4)
    return z, M


def integrate_flow_and_variations(
    poly: ActionPolynomial,
    z0: PhaseState,
    t: float,
    dt: float,
    rtol: float = 1e-10,
    max_halvings: int = 6,
):
    """Integrate the flow and its monodromy with fixed-step RK4.

    The run is repeated with the step halved until state and monodromy agree
    with the previous run to ``rtol`` (relative to their max-norm); the finer
    result is returned.

    Parameters
    ----------
    poly : ActionPolynomial
        Normal-form Hamiltonian ``H(I, J)``.
    z0 : PhaseState
        Initial condition.
    t : float
        Integration time; ``t = 0`` returns the identity.
    dt : float
        Initial step size.

    Returns
    -------
    (PhaseState, ndarray)
        Final state and the ``(2 + 2f) x (2 + 2f)`` monodromy matrix, ordered
        ``(q_u, p_u, theta_1..f, J_1..f)``.

    Raises
    ------
    IntegratorDiverged
        If the halving check does not settle or the state blows up.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    f = poly.f
    if z0.f != f:
        raise ValueError(f"state has f={z0.f}, polynomial has f={f}")
    z = z0.as_vector()
    if t == 0:
        return z0, np.eye(z.size)
    nsteps = max(1, int(math.ceil(abs(t) / dt)))
    prev = _rk4(poly, z, t, nsteps, f)
    for _ in range(max_halvings):
        nsteps *= 2
        cur = _rk4(poly, z, t, nsteps, f)
        dz = np.max(np.abs(cur[0] - prev[0])) / max(1.0, np.max(np.abs(cur[0])))
        dM = np.max(np.abs(cur[1] - prev[1])) / max(1.0, np.max(np.abs(cur[1])))
        if dz <= rtol and dM <= rtol:
            return PhaseState.from_vector(cur[0], f), cur[1]
        prev = cur
    raise IntegratorDiverged(f"step halving did not converge (last step {t / nsteps:.3g})")


def monodromy_blocks(M, f: int):
    """Split a monodromy in ``(q, p, theta, J)`` order into reaction, bath and cross blocks."""
    M = np.asarray(M)
    reac = M[:2, :2]
    bath = M[2:, 2:]
    cross = np.concatenate((M[:2, 2:].ravel(), M[2:, :2].ravel()))
    return reac, bath, cross


def monodromy_symplectic_defect(M, f: int) -> float:
    return symplectic_defect(M, pairs=canonical_pairs(f))


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteDifferenceReport:
    """Max relative errors of the analytic derivatives at one point.

    Each error is ``max|numeric - analytic| / max|analytic|`` over the
    components of the quantity (absolute when the analytic value vanishes).
    """

    h: float
    lambda_error: float
    omega_error: float
    jacobian_error: float

    @property
    def max_error(self):
        return max(self.lambda_error, self.omega_error, self.jacobian_error)


def _rel_err(num, ana):
    num = np.atleast_1d(np.asarray(num, dtype=float))
    ana = np.atleast_1d(np.asarray(ana, dtype=float))
    scale = float(np.max(np.abs(ana)))
    diff = float(np.max(np.abs(num - ana))) if num.size else 0.0
    return diff / scale if scale > 0 else diff


def finite_difference_check(poly: ActionPolynomial, pt: ActionPoint, h: float) -> FiniteDifferenceReport:
    """Compare ``Lambda``, ``Omega`` and ``dOmega/dJ`` with central differences of step ``h``."""
    if not h > 0:
        raise ValueError("h must be positive")
    f = poly.f
    I, J = pt.I, pt.J

    lam_num = (eval_hamiltonian(poly, ActionPoint(I + h, J)) - eval_hamiltonian(poly, ActionPoint(I - h, J))) / (2 * h)
    om_num = np.empty(f)
    jac_num = np.empty((f, f))
    for k in range(f):
        e = np.zeros(f)
        e[k] = h
        hp = eval_hamiltonian(poly, ActionPoint(I, J + e))
        hm = eval_hamiltonian(poly, ActionPoint(I, J - e))
        om_num[k] = (hp - hm) / (2 * h)
        jac_num[:, k] = (bath_frequencies(poly, ActionPoint(I, J + e)) - bath_frequencies(poly, ActionPoint(I, J - e))) / (2 * h)

    return FiniteDifferenceReport(
        h=h,
        lambda_error=_rel_err(lam_num, lyapunov_exponent(poly, pt)),
        omega_error=_rel_err(om_num, bath_frequencies(poly, pt)),
        jacobian_error=_rel_err(jac_num, frequency_jacobian(poly, pt)),
    )


# ---------------------------------------------------------------------------
# Direct determinants
# ---------------------------------------------------------------------------


def reaction_floquet_determinant_direct(lam: float, tau: float, digits: int = 40) -> float:
    """``|det(M_reac(tau) - 1)|`` from the 2x2 cofactor formula in decimal arithmetic.

    The matrix ``[[cosh - 1, sinh], [sinh, cosh - 1]]`` is built from
    ``exp(+-lam tau)`` at ``digits`` significant digits.  In double precision
    the cofactor difference cancels to a relative error of about
    ``eps * exp(lam tau) / 4``, which is why the extra digits are needed
    for large ``lam * tau``.
    """
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        x = decimal.Decimal(float(lam)) * decimal.Decimal(float(tau))
        ep, em = x.exp(), (-x).exp()
        ch, sh = (ep + em) / 2, (ep - em) / 2
        a, b = ch - 1, sh
        return float(abs(a * a - b * b))


# ---------------------------------------------------------------------------
# Reaction trace in closed form
# ---------------------------------------------------------------------------


def reaction_trace_fresnel(lam: float, tau: float, hbar: float, q_max: float) -> complex:
    """Exact hard-cutoff trace ``int_{-q_max}^{q_max} K_reac(q, q, tau) dq``.

    Uses ``int_0^a exp(i k u^2) du = sqrt(pi / 2k) (C(z) + i S(z))`` with
    ``z = a sqrt(2k / pi)``.
    """
    pre = kreac_prefactor(lam, tau, hbar)
    k = chirp_rate(lam, tau, hbar)
    z = q_max * math.sqrt(2.0 * k / math.pi)
    S, C = fresnel(z)
    return complex(pre * 2.0 * math.sqrt(math.pi / (2.0 * k)) * complex(C, S))


def reaction_trace_full_line(lam: float, tau: float, hbar: float) -> complex:
    """The ``q_max -> infinity`` limit; its modulus is ``1 / (2 sinh(lam tau / 2))``."""
    pre = kreac_prefactor(lam, tau, hbar)
    k = chirp_rate(lam, tau, hbar)
    return complex(pre * cmath.sqrt(1j * math.pi / k))


# ---------------------------------------------------------------------------
# Grid OTOC for the one-dimensional inverted oscillator
# ---------------------------------------------------------------------------


def ehrenfest_time(lam: float, hbar: float, L: float) -> float:
    """``t_E = ln(L / hbar) / lam``."""
    if not (lam > 0 and hbar > 0 and L > hbar):
        raise ValueError("need lam > 0, hbar > 0 and L > hbar")
    return math.log(L / hbar) / lam


@dataclass(frozen=True)
class QuantumGridConfig:
    """Grid simulation of ``H = p^2/2 - lam^2 q^2/2``.

    ``L`` is the physical length scale entering the Ehrenfest time.  The
    periodic grid spans ``[-box_half_length, box_half_length)``; it has to be
    wider than ``L`` because the packet spreads like ``e^{lam t}`` and reaches
    ``|q| ~ L`` well before ``t_E``.  ``t_grid`` defaults to ``n_times``
    points on ``[1/lam, 0.8 t_E]``.
    """

    L: float = 20.0
    n_points: int = 2**17
    lam: float = 0.7350
    hbar: float = 0.05
    t_grid: tuple | None = None
    box_half_length: float = 100.0
    dt: float = 0.05
    n_times: int = 7
    edge_fraction: float = 0.1
    leak_tol: float = 1e-6

    def __post_init__(self):
        n = self.n_points
        if n < 256 or n & (n - 1):
            raise ValueError("n_points must be a power of two >= 256")
        if not (self.lam > 0 and self.hbar > 0 and self.dt > 0 and self.box_half_length > 0):
            raise ValueError("lam, hbar, dt and box_half_length must be positive")
        tE = self.t_ehrenfest
        if self.t_grid is not None:
            tg = tuple(float(t) for t in self.t_grid)
            if any(t < 0 for t in tg):
                raise ValueError("t_grid must be non-negative")
            if tg and max(tg) >= tE:
                raise ValueError(f"t_grid reaches {max(tg):.3g} >= t_E = {tE:.3g}")
            object.__setattr__(self, "t_grid", tg)

    @property
    def t_ehrenfest(self):
        return ehrenfest_time(self.lam, self.hbar, self.L)

    @property
    def fit_window(self):
        return 1.0 / self.lam, 0.8 * self.t_ehrenfest

    def times(self):
        if self.t_grid is not None:
            return np.array(self.t_grid)
        a, b = self.fit_window
        return np.linspace(a, b, self.n_times)


@dataclass(frozen=True, eq=False)
class QuantumOTOCResult:
    t: np.ndarray
    C: np.ndarray
    norm_drift: float  # max | ||U psi|| - 1 |
    leak: float  # largest probability found in the outer grid band (position or momentum)


class _SplitStep:
    def __init__(self, cfg: QuantumGridConfig):
        self.cfg = cfg
        n, Lb = cfg.n_points, cfg.box_half_length
        self.x = np.linspace(-Lb, Lb, n, endpoint=False)
        self.dx = self.x[1] - self.x[0]
        self.p = cfg.hbar * 2.0 * np.pi * sfft.fftfreq(n, self.dx)
        self.V = -0.5 * cfg.lam**2 * self.x**2
        self.outer_x = np.abs(self.x) > (1.0 - cfg.edge_fraction) * Lb
        self.outer_p = np.abs(self.p) > (1.0 - cfg.edge_fraction) * np.max(np.abs(self.p))

    def ground(self):
        cfg = self.cfg
        psi = np.exp(-cfg.lam * self.x**2 / (2.0 * cfg.hbar)).astype(complex)
        return psi / math.sqrt(self.norm2(psi))

    def norm2(self, psi):
        return float(np.sum(np.abs(psi) ** 2) * self.dx)

    def apply_p(self, psi):
        return sfft.ifft(self.p * sfft.fft(psi, axis=-1), axis=-1)

    def evolve(self, psi, T):
        """Strang splitting ``e^{-iV h/2} e^{-iK h} e^{-iV h/2}`` over time ``T``; ``T`` may be negative."""
        if T == 0:
            return psi
        nsteps = max(1, int(math.ceil(abs(T) / self.cfg.dt)))
        h = T / nsteps
        hb = self.cfg.hbar
        half_v = np.exp(-0.5j * self.V * h / hb)
        kin = np.exp(-0.5j * self.p**2 * h / hb)
        for _ in range(nsteps):
            psi = half_v * sfft.ifft(kin * sfft.fft(half_v * psi, axis=-1), axis=-1)
        return psi

    def leak(self, psi):
        psi = np.atleast_2d(psi)
        out = np.sum(np.abs(psi[:, self.outer_x]) ** 2, axis=1) * self.dx
        spec = np.abs(sfft.fft(psi, axis=-1)) ** 2
        pfrac = np.sum(spec[:, self.outer_p], axis=1) / np.sum(spec, axis=1)
        return float(max(np.max(out), np.max(pfrac)))


def quantum_otoc_run(cfg: QuantumGridConfig = QuantumGridConfig()) -> QuantumOTOCResult:
    """``C(t) = || [q(t), p] psi ||^2`` with ``psi`` the saddle-centred Gaussian.

    ``[q(t), p] psi = U^+ q U (p psi) - p U^+ q U psi`` is evaluated by forward
    propagation of both ``psi`` and ``p psi``, multiplication by ``q`` and
    backward propagation.

    Raises
    ------
    GridTooSmall
        If more than ``cfg.leak_tol`` of either propagated state sits in the
        outer ``edge_fraction`` of the position or momentum grid.
    """
    g = _SplitStep(cfg)
    psi = g.ground()
    times = cfg.times()
    order = np.argsort(times, kind="stable")
    C = np.empty(times.size)
    state = np.stack([g.apply_p(psi), psi])
    t_now, drift, worst = 0.0, 0.0, 0.0
    for i in order:
        t = float(times[i])
        state = g.evolve(state, t - t_now)
        t_now = t
        drift = max(drift, abs(math.sqrt(g.norm2(state[1])) - 1.0))
        leak = g.leak(state)
        worst = max(worst, leak)
        if leak > cfg.leak_tol:
            raise GridTooSmall(f"{leak:.3g} of the probability reached the grid edge at t={t:.3g}")
        back = g.evolve(g.x * state, -t)
        chi = back[0] - g.apply_p(back[1])
        C[i] = g.norm2(chi)
        log.debug("quantum OTOC t=%.4f C=%.6e leak=%.2e", t, C[i], leak)
    return QuantumOTOCResult(times, C, drift, worst)


def quantum_otoc_inverted_oscillator(cfg: QuantumGridConfig = QuantumGridConfig()) -> np.ndarray:
    """Sampled OTOC ``C(t)`` on ``cfg.times()``; see :func:`quantum_otoc_run`."""
    return quantum_otoc_run(cfg).C


def fit_log_slope(t, values, window=None) -> float:
    """Least-squares slope of ``log(values)`` against ``t`` inside ``window``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = np.ones(t.size, bool) if window is None else (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    if np.count_nonzero(sel) < 2:
        raise ValueError("need at least two points in the window")
    return float(np.polyfit(t[sel], np.log(v[sel]), 1)[0])


# ---------------------------------------------------------------------------
# Suite used by the ``check`` command
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleCheck:
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.measured) and self.measured <= self.tolerance)


def random_symmetric(rng, f, lo=0.5, hi=2.0):
    """Random symmetric matrix with eigenvalue magnitudes in ``[lo, hi]`` and random signs."""
    Q, _ = np.linalg.qr(rng.normal(size=(f, f)))
    d = rng.uniform(lo, hi, f) * rng.choice([-1.0, 1.0], f)
    return (Q * d) @ Q.T


def run_oracle_suite(poly: ActionPolynomial, seed: int = 0, quantum: bool = False, n_monodromy: int = 5) -> list[OracleCheck]:
    """Run every brute-force check against ``poly`` and the generic identities.

    The quantum grid check takes tens of seconds and only runs when asked.
    """
    from .amplitude import bordered_hessian_from
    from .reaction_trace import ReactionTraceConfig, reaction_trace_quadrature
    from .stability import bath_monodromy, gutzwiller_stability_factor, reaction_monodromy

    rng = np.random.default_rng(seed)
    f = poly.f
    out = []

    fd = [finite_difference_check(poly, ActionPoint(x[0], x[1:]), 1e-5) for x in rng.uniform(0.0, 2.0, (100, f + 1))]
    out.append(OracleCheck("finite differences: Lambda", max(r.lambda_error for r in fd), 1e-6))
    out.append(OracleCheck("finite differences: Omega", max(r.omega_error for r in fd), 1e-6))
    out.append(OracleCheck("finite differences: dOmega/dJ", max(r.jacobian_error for r in fd), 1e-6))

    reac = bath = cross = sym = 0.0
    for _ in range(n_monodromy):
        J = rng.uniform(0.0, 2.0, f)
        t = float(rng.uniform(0.5, 6.0))
        _, M = integrate_flow_and_variations(poly, PhaseState.on_nhim(J, rng.uniform(0, 2 * np.pi, f)), t, 0.01)
        r, b, c = monodromy_blocks(M, f)
        pt = ActionPoint.on_nhim(J)
        reac = max(reac, float(np.max(np.abs(r - reaction_monodromy(lyapunov_exponent(poly, pt), t)))))
        bath = max(bath, float(np.max(np.abs(b - bath_monodromy(frequency_jacobian(poly, pt), t)))))
        cross = max(cross, float(np.max(np.abs(c))) if c.size else 0.0)
        sym = max(sym, monodromy_symplectic_defect(M, f))
    out.append(OracleCheck("monodromy: reaction block", reac, 1e-6))
    out.append(OracleCheck("monodromy: bath block", bath, 1e-6))
    out.append(OracleCheck("monodromy: cross entries", cross, 1e-8))
    out.append(OracleCheck("monodromy: symplectic defect", sym, 1e-8))

    worst = 0.0
    for x in np.linspace(0.1, 20.0, 200):
        ref = gutzwiller_stability_factor(1.0, x) ** -2
        worst = max(worst, abs(reaction_floquet_determinant_direct(1.0, x) - ref) / ref)
    out.append(OracleCheck("det(M_reac - 1) = 4 sinh^2", worst, 1e-10))

    worst = 0.0
    for _ in range(300):
        k = int(rng.integers(1, 4))
        hess = bordered_hessian_from(random_symmetric(rng, k), rng.uniform(0.5, 2.0, k), float(rng.uniform(0.5, 6.0)))
        worst = max(worst, abs(abs(hess.det_schur) - abs(hess.det_direct)) / abs(hess.det_direct))
    out.append(OracleCheck("bordered Hessian: Schur vs direct det", worst, 1e-10))

    worst = 0.0
    cfg = ReactionTraceConfig()
    for tau in np.linspace(4.0, 6.0, 5):
        q = reaction_trace_quadrature(0.7350, tau, cfg)
        ref = reaction_trace_fresnel(0.7350, tau, cfg.hbar, cfg.q_max)
        worst = max(worst, abs(q - ref) / abs(ref))
    out.append(OracleCheck("reaction trace: quadrature vs Fresnel", worst, 1e-7))

    if quantum:
        qcfg = QuantumGridConfig()
        res = quantum_otoc_run(qcfg)
        slope = fit_log_slope(res.t, res.C, qcfg.fit_window)
        out.append(OracleCheck("quantum OTOC: slope vs 2 lambda (rel)", abs(slope / (2 * qcfg.lam) - 1), 0.15))
        c0 = quantum_otoc_run(QuantumGridConfig(t_grid=(0.0,))).C[0]
        out.append(OracleCheck("quantum OTOC: C(0) vs hbar^2 (rel)", abs(c0 / qcfg.hbar**2 - 1), 1e-8))
        out.append(OracleCheck("quantum OTOC: norm drift", res.norm_drift, 1e-10))
    return out
