"""Resonant tori: winding-vector enumeration and damped Newton root finding.

Two sets of stationary conditions are supported.  At fixed observation time
``t`` the torus satisfies ``Omega(0, J) = 2 pi m / t``.  On a fixed energy
shell the unknowns are ``(J, tau)`` with ``H(0, J) = E`` and
``Omega(0, J) tau = 2 pi m``.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BelowSaddle, NoRoot, SingularJacobian
from .normal_form import ActionPoint, ActionPolynomial, eval_hamiltonian

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
SINGULAR_DET = 1e-14
DEFAULT_LADDER = (0.1, 1.0, 2.5)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 50
    damping: float = 0.5
    initial_guesses: tuple | None = None
    j_floor: float = -0.5
    j_cap: float = 50.0
    tol_neg: float = 1e-9
    dedup_tol: float = 1e-6
    max_backtracks: int = 40

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        if not self.j_floor < 0 < self.j_cap:
            raise ValueError("need j_floor < 0 < j_cap")
        if self.initial_guesses is not None:
            guesses = tuple(tuple(float(v) for v in g) for g in self.initial_guesses)
            object.__setattr__(self, "initial_guesses", guesses)


@dataclass(frozen=True, eq=False)
class ResonantTorus:
    """A solved stationary torus on the NHIM (``I = 0``).

    ``mode`` is ``"time"`` for tori solved at fixed observation time (then
    ``tau`` equals that time) and ``"energy"`` for energy-shell tori.
    """

    m: tuple
    J: np.ndarray
    tau: float
    lambda_val: float
    omega_val: np.ndarray
    jacobian: np.ndarray
    iterations: int
    residual_norm: float
    mode: str = "time"
    energy: float | None = None
    hamiltonian: float = field(default=float("nan"))

    @property
    def depth(self):
        return sum(abs(k) for k in self.m)


def enumerate_windings(f: int, m_max: int) -> list[tuple[int, ...]]:
    """All non-zero integer vectors of length ``f`` with L1 norm <= ``m_max``, lexicographic."""
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    if f < 1:
        raise ValueError("f must be >= 1")
    rng = range(-m_max, m_max + 1)
    return [m for m in itertools.product(rng, repeat=f) if 0 < sum(abs(k) for k in m) <= m_max]


def _bath_derivs(poly, J):
    pt = ActionPoint(0.0, J)
    _, g, h = poly.jet(pt)
    return pt, g[0], g[1:], h[1:, 1:]


class _JetCache:
    """Remembers the last NHIM jet so residual and Jacobian share one evaluation."""

    def __init__(self, poly):
        self.poly = poly
        self.key = None
        self.value = None

    def __call__(self, J):
        key = J.tobytes()
        if key != self.key:
            self.value = self.poly.jet(ActionPoint(0.0, J))
            self.key = key
        return self.value


def _finish(poly, m, J, tau, iterations, residual, mode, energy):
    pt, lam, omega, jac = _bath_derivs(poly, J)
    J = J.copy()
    J.setflags(write=False)
    return ResonantTorus(
        m=tuple(int(k) for k in m),
        J=J,
        tau=float(tau),
        lambda_val=float(lam),
        omega_val=omega,
        jacobian=jac,
        iterations=iterations,
        residual_norm=float(residual),
        mode=mode,
        energy=energy,
        hamiltonian=eval_hamiltonian(poly, pt),
    )


class _Outcome:
    CONVERGED, NEGATIVE, SINGULAR, FAILED = range(4)


def _damped_newton(residual, jacobian, x0, lower, upper, cfg, n_actions):
    """Backtracking Newton inside the box ``[lower, upper]``.

    Returns ``(outcome, x, iterations, residual_norm)``.
    """
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    F = residual(x)
    norm = float(np.max(np.abs(F)))
    for it in range(cfg.max_iter + 1):
        if not np.all(np.isfinite(F)):
            return _Outcome.FAILED, x, it, math.inf
        if norm <= cfg.tol:
            return _Outcome.CONVERGED, x, it, norm
        if it == cfg.max_iter:
            break
        Jm = jacobian(x)
        if abs(np.linalg.det(Jm)) < SINGULAR_DET:
            return _Outcome.SINGULAR, x, it, norm
        step = np.linalg.solve(Jm, -F)
        # already on a box face and Newton still points outward: the root is
        # outside the trust region
        at_floor = (x[:n_actions] <= lower[:n_actions] + 1e-12) & (step[:n_actions] < 0)
        if np.any(at_floor):
            return _Outcome.NEGATIVE, x, it, norm
        if np.any((x >= upper - 1e-12) & (step > 0)):
            return _Outcome.FAILED, x, it, norm
        alpha = 1.0
        for _ in range(cfg.max_backtracks):
            trial = np.clip(x + alpha * step, lower, upper)
            Ft = residual(trial)
            nt = float(np.max(np.abs(Ft)))
            if np.all(np.isfinite(Ft)) and nt < norm:
                break
            alpha *= cfg.damping
        else:
            # no decrease along the clipped Newton direction: stalled
            pinned_low = (x <= lower + 1e-12) & (step < 0)
            if np.any(pinned_low[:n_actions]):
                return _Outcome.NEGATIVE, x, it, norm
            return _Outcome.FAILED, x, it, norm
        x, F, norm = trial, Ft, nt
    if np.any(x[:n_actions] <= lower[:n_actions] + 1e-12):
        return _Outcome.NEGATIVE, x, cfg.max_iter, norm
    return _Outcome.FAILED, x, cfg.max_iter, norm


def _collect(results, poly, m, mode, scalar, cfg, what):
    """Turn per-start outcomes into validated, deduplicated tori.

    ``scalar`` is ``t`` for mode ``"time"`` and ``E`` for mode ``"energy"``.
    """
    tori = []
    saw_negative = saw_singular = False
    f = poly.f
    for outcome, x, it, res in results:
        if outcome == _Outcome.SINGULAR:
            saw_singular = True
            continue
        if outcome == _Outcome.FAILED:
            continue
        J = x[:f].copy()
        if outcome == _Outcome.NEGATIVE or np.any(J < -cfg.tol_neg):
            saw_negative = True
            continue
        J[J < 0] = 0.0
        tau = x[f] if mode == "energy" else scalar
        if mode == "energy":
            key = np.concatenate((J, [tau]))
        else:
            key = J
        if any(np.max(np.abs(key - k)) < cfg.dedup_tol for k, _ in tori):
            continue
        tori.append((key, (J, tau, it, res)))
    if tori:
        out = []
        for _, (J, tau, it, res) in tori:
            torus = _finish(poly, m, J, tau, it, res, mode, scalar if mode == "energy" else None)
            out.append(torus)
        return out
    if saw_negative:
        return []
    if saw_singular:
        raise SingularJacobian(f"{what}: |det dOmega/dJ| < {SINGULAR_DET} at an iterate")
    raise NoRoot(f"{what}: no start converged")


def _default_time_guesses(poly, m, t):
    f = poly.f
    guesses = [tuple(g) for g in itertools.product(DEFAULT_LADDER, repeat=f)]
    _, _, omega0, C0 = _bath_derivs(poly, np.zeros(f))
    if abs(np.linalg.det(C0)) > SINGULAR_DET:
        lin = np.linalg.solve(C0, TWO_PI * np.asarray(m, float) / t - omega0)
        guesses.append(tuple(lin))
    return guesses


def resonant_tori_fixed_time(poly: ActionPolynomial, m, t: float, cfg: SolverConfig = SolverConfig()) -> list[ResonantTorus]:
    """Every distinct valid root of ``Omega(0, J) = 2 pi m / t``.

    An empty list means the equations do have a root but it lies at negative
    actions.  :class:`NoRoot` / :class:`SingularJacobian` are raised when no
    start converges at all.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    m = np.asarray(m, dtype=float)
    f = poly.f
    if m.shape != (f,):
        raise ValueError(f"winding vector must have length {f}")
    target = TWO_PI * m / t

    jet = _JetCache(poly)

    def residual(J):
        return jet(J)[1][1:] - target

    def jacobian(J):
        return jet(J)[2][1:, 1:]

    lower = np.full(f, cfg.j_floor)
    upper = np.full(f, cfg.j_cap)
    starts = cfg.initial_guesses if cfg.initial_guesses is not None else _default_time_guesses(poly, m, t)
    results = [_damped_newton(residual, jacobian, np.asarray(s, float), lower, upper, cfg, f) for s in starts]
    return _collect(results, poly, tuple(int(k) for k in m), "time", float(t), cfg, f"m={tuple(int(k) for k in m)}, t={t:g}")


def solve_resonance_fixed_time(poly, m, t, cfg: SolverConfig = SolverConfig()) -> ResonantTorus | None:
    """First valid resonant torus at observation time ``t``, or ``None``."""
    tori = resonant_tori_fixed_time(poly, m, t, cfg)
    return tori[0] if tori else None


def _energy_guesses(poly, m, E):
    """Ladder starts plus the roots of the quadratic model ``E0 + w.J + 1/2 J.C.J``."""
    f = poly.f
    _, _, omega0, C0 = _bath_derivs(poly, np.zeros(f))
    E0 = poly.saddle_energy
    guesses = []
    m = np.asarray(m, float)
    if abs(np.linalg.det(C0)) > SINGULAR_DET:
        # Omega = omega0 + C0 J = 2 pi m u  (u = 1/tau)  ->  J = u a - b
        a = np.linalg.solve(C0, TWO_PI * m)
        b = np.linalg.solve(C0, omega0)
        # E0 + w.(u a - b) + 1/2 (u a - b).C0.(u a - b) = E, quadratic in u
        qa = 0.5 * a @ C0 @ a
        qb = omega0 @ a - a @ C0 @ b
        qc = E0 - omega0 @ b + 0.5 * b @ C0 @ b - E
        roots = np.roots([qa, qb, qc]) if abs(qa) > 0 else (np.array([-qc / qb]) if qb else np.array([]))
        for u in roots:
            if abs(u.imag) < 1e-12 and u.real > 0:
                guesses.append((u.real * a - b, 1.0 / u.real))
    for g in itertools.product(DEFAULT_LADDER, repeat=f):
        guesses.append((np.array(g), None))
    return guesses


def resonant_tori_fixed_energy(poly: ActionPolynomial, m, E: float, cfg: SolverConfig = SolverConfig()) -> list[ResonantTorus]:
    """Every distinct valid root ``(J, tau)`` of the energy-shell stationary conditions."""
    E0 = poly.saddle_energy
    if not E > E0:
        raise BelowSaddle(f"E = {E} is not above the saddle energy {E0}")
    f = poly.f
    m = np.asarray(m, dtype=float)
    if m.shape != (f,):
        raise ValueError(f"winding vector must have length {f}")
    two_pi_m = TWO_PI * m

    jet = _JetCache(poly)

    def residual(x):
        H, g, _ = jet(x[:f])
        return np.concatenate(([H - E], g[1:] * x[f] - two_pi_m))

    def jacobian(x):
        _, g, h = jet(x[:f])
        out = np.zeros((f + 1, f + 1))
        out[0, :f] = g[1:]
        out[1:, :f] = h[1:, 1:] * x[f]
        out[1:, f] = g[1:]
        return out

    lower = np.concatenate((np.full(f, cfg.j_floor), [1e-12]))
    upper = np.concatenate((np.full(f, cfg.j_cap), [np.inf]))
    if cfg.initial_guesses is not None:
        raw = [(np.asarray(g, float), None) for g in cfg.initial_guesses]
    else:
        raw = _energy_guesses(poly, m, E)
    starts = []
    for J0, tau0 in raw:
        if tau0 is None:
            omega = poly.gradient(ActionPoint(0.0, np.clip(J0, 0, None)))[1:]
            denom = omega @ omega
            tau0 = (two_pi_m @ omega) / denom if denom > 0 else 1.0
            if not tau0 > 0:
                continue
        starts.append(np.concatenate((J0, [tau0])))
    results = [_damped_newton(residual, jacobian, s, lower, upper, cfg, f) for s in starts]
    if not results:
        return []
    return _collect(results, poly, tuple(int(k) for k in m), "energy", float(E), cfg, f"m={tuple(int(k) for k in m)}, E={E:g}")


def solve_resonance_fixed_energy(poly, m, E, cfg: SolverConfig = SolverConfig()) -> ResonantTorus | None:
    tori = resonant_tori_fixed_energy(poly, m, E, cfg)
    return tori[0] if tori else None


def torus_residual(poly: ActionPolynomial, torus: ResonantTorus) -> float:
    """Re-evaluate a torus' defining equations from scratch (inf-norm)."""
    pt = ActionPoint(0.0, torus.J)
    omega = poly.gradient(pt)[1:]
    m = np.asarray(torus.m, float)
    if torus.mode == "energy":
        r = np.concatenate(([eval_hamiltonian(poly, pt) - torus.energy], omega * torus.tau - TWO_PI * m))
    else:
        r = omega - TWO_PI * m / torus.tau
    return float(np.max(np.abs(r)))
