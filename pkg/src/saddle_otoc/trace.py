"""Coherent orbit sum for the microcanonical OTOC ``C_E(t)``.

Two modes are supported.  ``"resonant"`` re-solves ``Omega(J) = 2 pi m / t``
at every observation time and weights each torus with ``exp(1.5 Lambda t)``.
``"general"`` solves the energy-shell conditions once per winding vector and
weights each torus with ``exp(2 Lambda t) / (2 sinh(Lambda tau / 2))``.
Sums run in a fixed order through :func:`math.fsum`, so results do not depend
on the number of worker threads.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .amplitude import OrbitContribution, orbit_contribution
from .errors import (
    DepthOutOfRange,
    EmptySumWarning,
    InfOverflow,
    InsufficientData,
    ModeMismatch,
    SaddleOTOCError,
)
from .normal_form import ActionPolynomial
from .resonance import SolverConfig, enumerate_windings, resonant_tori_fixed_energy, resonant_tori_fixed_time
from .stability import LOG_DOUBLE_MAX, gutzwiller_stability_factor, log_gutzwiller_stability_factor

logger = logging.getLogger(__name__)

MODES = ("resonant", "general")
RESONANT_EXPONENT = 1.5


@dataclass(frozen=True)
class TraceConfig:
    E: float = -0.5
    hbar: float = 0.05
    m_max: int = 5
    t_grid: tuple = tuple(np.round(np.linspace(2.0, 6.0, 81), 12))
    mode: str = "resonant"
    log_space: bool = False
    exact_butterfly: bool = False

    def __post_init__(self):
        t = tuple(float(v) for v in self.t_grid)
        object.__setattr__(self, "t_grid", t)
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if self.m_max < 0:
            raise ValueError("m_max must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not t:
            raise ValueError("t_grid is empty")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("t_grid must be strictly increasing")


@dataclass(frozen=True, eq=False)
class OrbitRecord:
    """One orbit's weight at one observation time (unscaled, no hbar^2/4)."""

    t_index: int
    t: float
    contribution: OrbitContribution
    weight: float
    log_abs_weight: float
    sign: float


@dataclass(frozen=True)
class SkipRecord:
    t: float | None
    m: tuple
    reason: str


@dataclass(eq=False)
class TraceSeries:
    t: np.ndarray
    C_E: np.ndarray
    partials: np.ndarray  # row k-1 holds C^(k), k = 1..m_max
    residuals: np.ndarray  # row k-1 holds |C^(k) - C^(k-1)|
    orbit_count: int
    contributions: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    empty_times: list = field(default_factory=list)
    hbar: float = 0.05
    mode: str = "resonant"
    log_abs: np.ndarray | None = None

    @property
    def m_max(self):
        return self.partials.shape[0]


def _cos_phase(c: OrbitContribution, hbar):
    return math.cos(c.action / hbar - 0.5 * math.pi * c.maslov)


def _signed(logabs, cosv, extra_sign=1.0):
    if cosv == 0.0:
        return -math.inf, 0.0
    return logabs + math.log(abs(cosv)), math.copysign(1.0, cosv) * extra_sign


def _check_resonant(c, t):
    if abs(c.torus.tau - t) > 1e-9 * max(1.0, abs(t)):
        raise ModeMismatch(f"torus period {c.torus.tau} differs from t = {t}")


def log_orbit_weight_resonant(c: OrbitContribution, t: float, hbar: float):
    """``(log|W|, sign W)`` for :func:`orbit_weight_resonant`."""
    _check_resonant(c, t)
    base = math.log(c.amplitude) + RESONANT_EXPONENT * c.torus.lambda_val * t
    return _signed(base, _cos_phase(c, hbar))


def orbit_weight_resonant(c: OrbitContribution, t: float, hbar: float) -> float:
    """``A exp(1.5 Lambda t) cos(S / hbar - pi mu / 2)``; requires ``tau == t``.

    Uses the bath-only amplitude: the reaction damping is already inside the
    1.5 exponent.
    """
    logw, sign = log_orbit_weight_resonant(c, t, hbar)
    if logw > LOG_DOUBLE_MAX:
        raise InfOverflow(f"resonant weight exp({logw:.6g}) overflows")
    return sign * math.exp(logw) if sign else 0.0


def _log_growth(lam, t, exact):
    if exact:
        # 4 cosh^2(x) = e^{2x} (1 + e^{-2x})^2
        x = abs(lam * t)
        return 2 * x + 2 * math.log1p(math.exp(-2 * x))
    return 2 * lam * t


def log_orbit_weight_general(c: OrbitContribution, t_otoc: float, hbar: float, exact_butterfly: bool = False):
    if c.torus.mode != "energy":
        raise ModeMismatch("general-mode weight needs an energy-shell torus")
    lam, tau = c.torus.lambda_val, c.torus.tau
    base = _log_growth(lam, t_otoc, exact_butterfly) + log_gutzwiller_stability_factor(lam, tau) + math.log(c.amplitude)
    return _signed(base, _cos_phase(c, hbar))


def orbit_weight_general(c: OrbitContribution, t_otoc: float, hbar: float, exact_butterfly: bool = False) -> float:
    """``exp(2 Lambda t) / (2 sinh(Lambda tau / 2)) A cos(S / hbar - pi mu / 2)``.

    ``t_otoc`` and the orbit period ``tau`` are independent.  With
    ``exact_butterfly`` the growth factor is ``4 cosh^2(Lambda t)``.
    """
    if c.torus.mode != "energy":
        raise ModeMismatch("general-mode weight needs an energy-shell torus")
    lam, tau = c.torus.lambda_val, c.torus.tau
    stab = gutzwiller_stability_factor(lam, tau)
    logg = _log_growth(lam, t_otoc, exact_butterfly)
    if logg + math.log(max(stab * c.amplitude, 1e-300)) > LOG_DOUBLE_MAX:
        raise InfOverflow("general weight overflows")
    growth = 4 * math.cosh(lam * t_otoc) ** 2 if exact_butterfly else math.exp(logg)
    return growth * stab * c.amplitude * _cos_phase(c, hbar)


# ------------------------------------------------------------------ assembly

def _solve_resonant(poly, m, t, hbar, solver_cfg):
    """Contributions for one (t, m) work item, or a skip reason."""
    try:
        tori = resonant_tori_fixed_time(poly, m, t, solver_cfg)
    except SaddleOTOCError as exc:
        return [], [SkipRecord(t, m, f"{type(exc).__name__}: {exc}")]
    return _contribute(poly, tori, hbar, t, m)


def _solve_general(poly, m, E, hbar, solver_cfg):
    try:
        tori = resonant_tori_fixed_energy(poly, m, E, solver_cfg)
    except SaddleOTOCError as exc:
        return [], [SkipRecord(None, m, f"{type(exc).__name__}: {exc}")]
    return _contribute(poly, tori, hbar, None, m)


def _contribute(poly, tori, hbar, t, m):
    out, skips = [], []
    if not tori:
        skips.append(SkipRecord(t, m, "negative actions"))
    for torus in tori:
        try:
            out.append(orbit_contribution(poly, torus, hbar))
        except SaddleOTOCError as exc:
            skips.append(SkipRecord(t, m, f"{type(exc).__name__}: {exc}"))
    return out, skips


def _run(fn, items, workers):
    if workers <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def _reduce(weights, hbar, log_space):
    """``hbar^2/4 * sum(weights)`` in fixed order; returns ``(value, log|value|)``."""
    scale = 0.25 * hbar * hbar
    if not weights:
        return 0.0, -math.inf
    if not log_space:
        s = scale * math.fsum(w for w, _, _ in weights)
        return s, (math.log(abs(s)) if s else -math.inf)
    finite = [(l, sg) for _, l, sg in weights if sg != 0.0]
    if not finite:
        return 0.0, -math.inf
    M = max(l for l, _ in finite)
    s = math.fsum(sg * math.exp(l - M) for l, sg in finite)
    if s == 0.0:
        return 0.0, -math.inf
    logabs = math.log(scale) + M + math.log(abs(s))
    value = math.copysign(math.exp(logabs), s) if logabs <= LOG_DOUBLE_MAX else math.copysign(math.inf, s)
    return value, logabs


def assemble_trace(
    poly: ActionPolynomial,
    cfg: TraceConfig,
    solver_cfg: SolverConfig = SolverConfig(),
    workers: int = 1,
    windings=None,
) -> TraceSeries:
    """Evaluate ``C_E`` on ``cfg.t_grid`` together with per-depth partial sums.

    Failed or unphysical roots are skipped and recorded in ``series.skipped``;
    the sweep never aborts on them.  ``windings`` overrides the enumerated
    winding vectors (duplicates are dropped, order kept).
    """
    if windings is None:
        windings = enumerate_windings(poly.f, cfg.m_max)
    windings = [w for w in dict.fromkeys(tuple(int(k) for k in m) for m in windings) if 0 < sum(map(abs, w)) <= cfg.m_max]
    t_grid = np.asarray(cfg.t_grid, dtype=float)
    nt = len(t_grid)
    hbar = cfg.hbar

    skipped: list[SkipRecord] = []
    per_t: list[list[OrbitContribution]] = [[] for _ in range(nt)]
    if cfg.mode == "resonant":
        items = [(poly, m, float(t), hbar, solver_cfg) for t in t_grid for m in windings]
        results = _run(_solve_resonant, items, workers)
        k = 0
        for i in range(nt):
            for _ in windings:
                contribs, skips = results[k]
                per_t[i].extend(contribs)
                skipped.extend(skips)
                k += 1
    else:
        items = [(poly, m, cfg.E, hbar, solver_cfg) for m in windings]
        results = _run(_solve_general, items, workers)
        shared = []
        for contribs, skips in results:
            shared.extend(contribs)
            skipped.extend(skips)
        for i in range(nt):
            per_t[i] = list(shared)

    records: list[OrbitRecord] = []
    C = np.zeros(nt)
    log_abs = np.full(nt, -np.inf)
    partials = np.zeros((cfg.m_max, nt))
    empty = []
    for i, t in enumerate(t_grid):
        weights = []  # (W, log|W|, sign, depth)
        for c in per_t[i]:
            try:
                if cfg.mode == "resonant":
                    logw, sign = log_orbit_weight_resonant(c, t, hbar)
                    w = orbit_weight_resonant(c, t, hbar) if not cfg.log_space else sign * math.exp(min(logw, LOG_DOUBLE_MAX))
                else:
                    logw, sign = log_orbit_weight_general(c, t, hbar, cfg.exact_butterfly)
                    w = orbit_weight_general(c, t, hbar, cfg.exact_butterfly) if not cfg.log_space else sign * math.exp(min(logw, LOG_DOUBLE_MAX))
            except SaddleOTOCError as exc:
                skipped.append(SkipRecord(float(t), c.m, f"{type(exc).__name__}: {exc}"))
                continue
            weights.append((w, logw, sign, c.torus.depth))
            records.append(OrbitRecord(i, float(t), c, w, logw, sign))
        if not weights:
            empty.append(float(t))
        C[i], log_abs[i] = _reduce([(w, l, s) for w, l, s, _ in weights], hbar, cfg.log_space)
        for k in range(1, cfg.m_max + 1):
            partials[k - 1, i] = _reduce([(w, l, s) for w, l, s, d in weights if d <= k], hbar, cfg.log_space)[0]

    residuals = np.abs(np.diff(np.vstack([np.zeros((1, nt)), partials]), axis=0))
    if empty:
        warnings.warn(f"no orbit contributed at {len(empty)} of {nt} observation times", EmptySumWarning, stacklevel=2)
    for s in skipped:
        logger.debug("skipped m=%s t=%s: %s", s.m, s.t, s.reason)
    return TraceSeries(
        t=t_grid,
        C_E=C,
        partials=partials,
        residuals=residuals,
        orbit_count=len({(r.contribution.m, tuple(r.contribution.torus.J), r.contribution.torus.tau) for r in records}),
        contributions=records,
        skipped=skipped,
        empty_times=empty,
        hbar=hbar,
        mode=cfg.mode,
        log_abs=log_abs if cfg.log_space else None,
    )


def convergence_residual(series: TraceSeries, k: int) -> np.ndarray:
    """``|C^(k) - C^(k-1)|`` pointwise, with ``C^(0) = 0``."""
    if not 1 <= k <= series.m_max:
        raise DepthOutOfRange(f"k = {k} outside 1..{series.m_max}")
    prev = series.partials[k - 2] if k > 1 else np.zeros_like(series.t)
    return np.abs(series.partials[k - 1] - prev)


# --------------------------------------------------------------- growth fits

@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    method: str  # "direct" or "envelope"
    n_points: int
    window: tuple


def local_maxima(values) -> np.ndarray:
    """Indices of interior samples not smaller than either neighbour."""
    a = np.asarray(values, dtype=float)
    if a.size < 3:
        return np.array([], dtype=int)
    mid = a[1:-1]
    return np.nonzero((mid >= a[:-2]) & (mid >= a[2:]) & (mid > 0))[0] + 1


def fit_growth_exponent(series, window=(2.0, 6.0), values=None, method: str = "auto", min_points: int = 8) -> GrowthFit:
    """Least-squares slope of ``ln|C|`` against ``t`` over ``window``.

    ``series`` is a :class:`TraceSeries` or a time array (then pass
    ``values``).  With ``method="auto"`` a sign change or zero inside the
    window switches to a fit through the local maxima of ``|C|``.
    """
    if isinstance(series, TraceSeries):
        t, y = series.t, series.C_E
    else:
        t, y = np.asarray(series, float), np.asarray(values, float)
    lo, hi = window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    t, y = t[sel], y[sel]
    if t.size < min_points:
        raise InsufficientData(f"{t.size} points in window {window}, need {min_points}")
    if method not in ("auto", "direct", "envelope"):
        raise ValueError("method must be auto, direct or envelope")
    crosses = np.any(y == 0) or (np.any(y > 0) and np.any(y < 0))
    if method == "direct" or (method == "auto" and not crosses):
        if np.any(y == 0):
            raise InsufficientData("zero value inside the window")
        slope, icpt = np.polyfit(t, np.log(np.abs(y)), 1)
        return GrowthFit(float(slope), float(icpt), "direct", int(t.size), tuple(window))
    if crosses and method == "auto":
        logger.info("sign change in window %s, fitting the envelope instead", window)
    idx = local_maxima(np.abs(y))
    if idx.size < 2:
        raise InsufficientData("fewer than two local maxima for the envelope fit")
    slope, icpt = np.polyfit(t[idx], np.log(np.abs(y[idx])), 1)
    return GrowthFit(float(slope), float(icpt), "envelope", int(idx.size), tuple(window))


def orbit_envelope(records, m) -> tuple[np.ndarray, np.ndarray]:
    """``(t, |W| / |cos|)`` for the records of winding vector ``m``.

    For resonant weights this is ``A exp(1.5 Lambda t)``; for general weights
    the growth times stability times amplitude.
    """
    ts, env = [], []
    for r in records:
        if r.contribution.m != tuple(m):
            continue
        c = r.contribution
        lam = c.torus.lambda_val
        if c.torus.mode == "energy":
            val = math.exp(2 * lam * r.t) * c.stability_factor * c.amplitude
        else:
            val = c.amplitude * math.exp(RESONANT_EXPONENT * lam * r.t)
        ts.append(r.t)
        env.append(val)
    return np.array(ts), np.array(env)


@dataclass(frozen=True, eq=False)
class DominantOrbitFit:
    """Log-envelope fit of the single largest winding vector."""

    m: tuple
    fit: GrowthFit
    t: np.ndarray
    envelope: np.ndarray
    lambdas: np.ndarray  # Lambda(J(t)) at each sample

    @property
    def reference_slope(self):
        """``1.5 * mean Lambda(J)`` over the orbit's samples."""
        return RESONANT_EXPONENT * float(np.mean(self.lambdas))


def dominant_orbit(records) -> tuple:
    """Winding vector with the largest summed envelope ``sum_t |W| / |cos|``.

    Ties are broken by enumeration order (first seen wins).
    """
    totals: dict = {}
    for m in dict.fromkeys(r.contribution.m for r in records):
        totals[m] = math.fsum(orbit_envelope(records, m)[1])
    if not totals:
        raise InsufficientData("no orbit records")
    return max(totals, key=lambda m: totals[m])


def dominant_orbit_fit(series: TraceSeries, window=(2.0, 6.0), min_points: int = 8) -> DominantOrbitFit:
    """Fit ``ln(A e^{1.5 Lambda t})`` of the dominant orbit against ``t``.

    When a winding vector has several roots at one time the largest
    envelope is kept.
    """
    m = dominant_orbit(series.contributions)
    best: dict = {}
    for r in series.contributions:
        if r.contribution.m != m:
            continue
        env = orbit_envelope([r], m)[1][0]
        if r.t not in best or env > best[r.t][0]:
            best[r.t] = (env, r.contribution.torus.lambda_val)
    ts = np.array(sorted(best))
    env = np.array([best[t][0] for t in ts])
    lam = np.array([best[t][1] for t in ts])
    lo, hi = window
    sel = (ts >= lo - 1e-12) & (ts <= hi + 1e-12)
    if np.count_nonzero(sel) < min_points:
        raise InsufficientData(f"dominant orbit {m} has {np.count_nonzero(sel)} samples in {window}")
    slope, icpt = np.polyfit(ts[sel], np.log(env[sel]), 1)
    fit = GrowthFit(float(slope), float(icpt), "envelope", int(np.count_nonzero(sel)), tuple(window))
    return DominantOrbitFit(m, fit, ts[sel], env[sel], lam[sel])
