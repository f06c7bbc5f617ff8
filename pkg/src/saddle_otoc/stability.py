"""Analytic monodromy blocks on the NHIM and the factors built from them."""
from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateOrbit, DimensionMismatch, InfOverflow

# exp(x) overflows a double just above this
LOG_DOUBLE_MAX = math.log(np.finfo(float).max)
OVERFLOW_GUARD = 700.0
DEGENERATE_LAMBDA_TAU = 1e-8


def reaction_monodromy(lam: float, t: float) -> np.ndarray:
    """``[[cosh, sinh], [sinh, cosh]](lam * t)`` acting on ``(q_u, p_u)``."""
    x = lam * t
    if not math.isfinite(x):
        raise ValueError("lam * t must be finite")
    if abs(x) > OVERFLOW_GUARD:
        raise InfOverflow(f"|lambda t| = {abs(x):.6g} exceeds {OVERFLOW_GUARD}")
    c, s = math.cosh(x), math.sinh(x)
    return np.array([[c, s], [s, c]])


def bath_monodromy(dOmega_dJ, t: float) -> np.ndarray:
    """Shear matrix ``[[1, dOmega/dJ t], [0, 1]]`` acting on ``(theta, J)``."""
    C = np.asarray(dOmega_dJ, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionMismatch(f"dOmega/dJ must be square, got shape {C.shape}")
    f = C.shape[0]
    M = np.eye(2 * f)
    M[:f, f:] = C * t
    return M


def _check_lambda_tau(lam, tau):
    x = lam * tau
    if not x >= DEGENERATE_LAMBDA_TAU:
        raise DegenerateOrbit(f"lambda * tau = {x:.3g} < {DEGENERATE_LAMBDA_TAU}")
    return x


def gutzwiller_stability_factor(lam: float, tau: float) -> float:
    """``1 / (2 sinh(lam tau / 2)) = |det(M_reac(tau) - 1)|**-1/2``."""
    x = _check_lambda_tau(lam, tau)
    if x > 2 * OVERFLOW_GUARD:
        return math.exp(-0.5 * x) / -math.expm1(-x)
    return 0.5 / math.sinh(0.5 * x)


def log_gutzwiller_stability_factor(lam: float, tau: float) -> float:
    x = _check_lambda_tau(lam, tau)
    # 2 sinh(x/2) = e^{x/2} (1 - e^{-x})
    return -0.5 * x - math.log(-math.expm1(-x))


def log_butterfly_weight(lam: float, t_otoc: float, hbar: float, exact: bool = True):
    """Natural log of :func:`butterfly_weight` and its sign (always +1)."""
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    x = abs(lam * t_otoc)
    if exact:
        # cosh(x) = e^x (1 + e^{-2x}) / 2
        log_cosh = x + math.log1p(math.exp(-2 * x)) - math.log(2.0)
        return 2 * math.log(hbar) + 2 * log_cosh, 1.0
    return 2 * math.log(hbar) - math.log(4.0) + 2 * lam * t_otoc, 1.0


def butterfly_weight(lam: float, t_otoc: float, hbar: float, exact: bool = True) -> float:
    """Quantum butterfly factor ``hbar^2 |M_qq(t)|^2``.

    ``exact=True`` gives ``hbar^2 cosh^2(lam t)``; otherwise the large-time
    form ``hbar^2 / 4 exp(2 lam t)``.
    """
    logw, sign = log_butterfly_weight(lam, t_otoc, hbar, exact)
    if logw > LOG_DOUBLE_MAX:
        raise InfOverflow(f"butterfly weight exp({logw:.6g}) overflows")
    if exact:
        return hbar**2 * math.cosh(lam * t_otoc) ** 2
    return sign * math.exp(logw)


def symplectic_form(n: int) -> np.ndarray:
    """Standard ``[[0, 1], [-1, 0]]`` block form for ``n`` canonical pairs."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def symplectic_defect(M, pairs=None) -> float:
    """``max |M^T Omega M - Omega|`` for a matrix ordered ``(q..., p...)``.

    ``pairs`` optionally lists ``(q_index, p_index)`` to use another ordering.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0] // 2
    if pairs is None:
        W = symplectic_form(n)
    else:
        W = np.zeros_like(M)
        for q, p in pairs:
            W[q, p] = 1.0
            W[p, q] = -1.0
    return float(np.max(np.abs(M.T @ W @ M - W)))
