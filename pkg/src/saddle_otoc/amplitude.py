"""Per-orbit ingredients: action, Maslov index, bordered Hessian, Berry-Tabor amplitude."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateHessian, SingularJacobian
from .normal_form import ActionPoint, ActionPolynomial, eval_hamiltonian
from .resonance import SINGULAR_DET, TWO_PI, ResonantTorus
from .stability import gutzwiller_stability_factor

DEGENERATE_DET = 1e-14


@dataclass(frozen=True, eq=False)
class BorderedHessian:
    """Second derivatives of the bath phase in ``(J, tau)``.

    ``det_schur`` is ``(-tau)^(f-1) det(C) Omega^T C^-1 Omega`` with
    ``C = dOmega/dJ``; it equals ``-det_direct`` (the block identity picks up
    one more sign), so only magnitudes should be compared.
    """

    matrix: np.ndarray
    det_direct: float
    det_schur: float
    signature: int
    curvature: float  # Omega^T C^-1 Omega
    jacobian_det: float  # det C


@dataclass(frozen=True, eq=False)
class OrbitContribution:
    torus: ResonantTorus
    action: float
    maslov: int
    amplitude: float
    stability_factor: float
    phase: float
    signature: int
    gaussian_phase: float  # pi (sigma_H - f) / 4, logged only

    @property
    def m(self):
        return self.torus.m


def classical_action(torus: ResonantTorus, poly: ActionPolynomial) -> float:
    """``S = J . 2 pi m - H(0, J) tau``."""
    H = eval_hamiltonian(poly, ActionPoint(0.0, torus.J))
    return float(TWO_PI * np.dot(torus.J, np.asarray(torus.m, float)) - H * torus.tau)


def maslov_index(m) -> int:
    """Two caustics per libration of each bath mode."""
    return 2 * int(sum(int(k) for k in m))


def hessian_signature(matrix) -> int:
    ev = np.linalg.eigvalsh(np.asarray(matrix, dtype=float))
    scale = max(1.0, float(np.max(np.abs(ev))))
    return int(np.sum(ev > 1e-12 * scale) - np.sum(ev < -1e-12 * scale))


def bordered_hessian_from(jacobian, omega, tau: float) -> BorderedHessian:
    """Assemble ``[[-tau C, -Omega], [-Omega^T, 0]]`` and both determinants."""
    C = np.asarray(jacobian, dtype=float)
    w = np.asarray(omega, dtype=float)
    f = w.size
    detC = float(np.linalg.det(C))
    if abs(detC) < SINGULAR_DET:
        raise SingularJacobian(f"|det dOmega/dJ| = {abs(detC):.3g}")
    H = np.zeros((f + 1, f + 1))
    H[:f, :f] = -tau * C
    H[:f, f] = -w
    H[f, :f] = -w
    det_direct = float(np.linalg.det(H))
    if abs(det_direct) < DEGENERATE_DET:
        raise DegenerateHessian(f"|det H| = {abs(det_direct):.3g} (bifurcation point)")
    curvature = float(w @ np.linalg.solve(C, w))
    det_schur = (-tau) ** (f - 1) * detC * curvature
    return BorderedHessian(H, det_direct, det_schur, hessian_signature(H), curvature, detC)


def bordered_hessian(torus: ResonantTorus) -> BorderedHessian:
    return bordered_hessian_from(torus.jacobian, torus.omega_val, torus.tau)


def berry_tabor_amplitude(hess: BorderedHessian, torus: ResonantTorus, hbar: float) -> float:
    """``sqrt(2 pi hbar) |det C|^1/2 / |det H|^1/2`` (magnitude only)."""
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    if abs(hess.det_direct) < DEGENERATE_DET:
        raise DegenerateHessian("bordered Hessian is singular")
    return math.sqrt(TWO_PI * hbar) * math.sqrt(abs(hess.jacobian_det) / abs(hess.det_direct))


def berry_tabor_amplitude_reduced(hess: BorderedHessian, torus: ResonantTorus, hbar: float) -> float:
    """Same amplitude from ``tau^((f-1)/2) |Omega^T C^-1 Omega|^1/2``."""
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    f = len(torus.omega_val)
    denom = torus.tau ** (0.5 * (f - 1)) * math.sqrt(abs(hess.curvature))
    if denom == 0.0:
        raise DegenerateHessian("zero bordered curvature")
    return math.sqrt(TWO_PI * hbar) / denom


def orbit_contribution(poly: ActionPolynomial, torus: ResonantTorus, hbar: float) -> OrbitContribution:
    """Everything the orbit sum needs for one torus."""
    hess = bordered_hessian(torus)
    S = classical_action(torus, poly)
    mu = maslov_index(torus.m)
    A = berry_tabor_amplitude(hess, torus, hbar)
    f = len(torus.m)
    return OrbitContribution(
        torus=torus,
        action=S,
        maslov=mu,
        amplitude=A,
        stability_factor=gutzwiller_stability_factor(torus.lambda_val, torus.tau),
        phase=S / hbar - 0.5 * math.pi * mu,
        signature=hess.signature,
        gaussian_phase=0.25 * math.pi * (hess.signature - f),
    )
