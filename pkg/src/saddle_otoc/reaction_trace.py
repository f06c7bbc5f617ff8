"""Inverted-oscillator return propagator and its cut-off trace."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import DegenerateOrbit, QuadratureNotConverged
from .stability import DEGENERATE_LAMBDA_TAU, gutzwiller_stability_factor


@dataclass(frozen=True)
class ReactionTraceConfig:
    """Quadrature settings for the trace over ``q_u in [-q_max, q_max]``.

    ``apodize`` replaces the hard cutoff by a raised-cosine taper over the
    outer ``taper`` fraction of the interval.
    """

    hbar: float = 0.05
    q_max: float = 1.5
    quadrature_points: int = 20001
    apodize: bool = False
    taper: float = 0.05
    rtol: float = 1e-8
    max_doublings: int = 6

    def __post_init__(self):
        if not self.q_max > 0:
            raise ValueError("q_max must be positive")
        if self.quadrature_points < 3 or self.quadrature_points % 2 == 0:
            raise ValueError("quadrature_points must be odd and >= 3")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if not 0 < self.taper < 1:
            raise ValueError("taper must lie in (0, 1)")


def _check(lam, tau, hbar):
    if not lam * tau >= DEGENERATE_LAMBDA_TAU:
        raise DegenerateOrbit(f"lambda * tau = {lam * tau:.3g}")
    if not hbar > 0:
        raise ValueError("hbar must be positive")


def chirp_rate(lam: float, tau: float, hbar: float) -> float:
    """Coefficient ``k`` of the diagonal phase ``exp(i k q^2)``."""
    x = lam * tau
    # (cosh x - 1) / sinh x == tanh(x / 2)
    return lam * math.tanh(0.5 * x) / hbar


def kreac_prefactor(lam: float, tau: float, hbar: float) -> complex:
    """``sqrt(lam / (2 pi i hbar sinh(lam tau)))``, principal branch."""
    _check(lam, tau, hbar)
    return cmath.sqrt(lam / (2j * math.pi * hbar * math.sinh(lam * tau)))


def kreac_diagonal(q_u, tau: float, lam: float, hbar: float):
    """Diagonal element ``K_reac(q_u, q_u, tau)``; vectorised over ``q_u``."""
    pre = kreac_prefactor(lam, tau, hbar)
    q = np.asarray(q_u, dtype=float)
    return pre * np.exp(1j * chirp_rate(lam, tau, hbar) * q**2)


def _window(q, q_max, taper):
    w = np.ones_like(q)
    edge = (1.0 - taper) * q_max
    outer = np.abs(q) > edge
    u = (np.abs(q[outer]) - edge) / (q_max - edge)
    w[outer] = np.cos(0.5 * math.pi * u) ** 2
    return w


def _simpson_trace(lam, tau, cfg, n):
    q = np.linspace(-cfg.q_max, cfg.q_max, n)
    f = kreac_diagonal(q, tau, lam, cfg.hbar)
    if cfg.apodize:
        f = f * _window(q, cfg.q_max, cfg.taper)
    return complex(simpson(f, x=q))


def reaction_trace_quadrature(lam: float, tau: float, cfg: ReactionTraceConfig = ReactionTraceConfig()) -> complex:
    """Composite Simpson trace with Richardson doubling.

    The interval count is doubled until successive Richardson estimates agree
    to ``cfg.rtol`` (relative).
    """
    _check(lam, tau, cfg.hbar)
    n = cfg.quadrature_points
    coarse = _simpson_trace(lam, tau, cfg, n)
    prev = None
    for _ in range(cfg.max_doublings):
        n = 2 * n - 1
        fine = _simpson_trace(lam, tau, cfg, n)
        rich = fine + (fine - coarse) / 15.0
        if prev is not None and abs(rich - prev) <= cfg.rtol * max(abs(rich), 1e-300):
            return rich
        if abs(fine - coarse) <= cfg.rtol * max(abs(fine), 1e-300):
            return rich
        prev, coarse = rich, fine
    raise QuadratureNotConverged(f"no convergence after {cfg.max_doublings} doublings (n={n})")


def reaction_trace_analytic(lam: float, tau: float, asymptotic: bool = False) -> float:
    """Leading-order trace magnitude ``1 / (2 sinh(lam tau / 2))`` or ``exp(-lam tau / 2)``."""
    if asymptotic:
        if not lam * tau >= DEGENERATE_LAMBDA_TAU:
            raise DegenerateOrbit(f"lambda * tau = {lam * tau:.3g}")
        return math.exp(-0.5 * lam * tau)
    return gutzwiller_stability_factor(lam, tau)
