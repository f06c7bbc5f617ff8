"""Command-line front end.

Subcommands
-----------
convert    complex monomial table (``.nf``) -> action polynomial (``.ap``)
eval       C_E(t) series plus per-orbit audit file
residuals  per-depth convergence residuals
slope      growth-exponent fits
check      oracle suite with a pass/fail table

Settings come from built-in defaults, then ``--preset``, then a flat
``key = value`` file given with ``--config``, then command-line flags; later
sources win.  Every output file opens with a ``#`` block echoing the resolved
settings and the package version.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EmptySumWarning, SaddleOTOCError
from .normal_form import (
    SYNTHETIC_BATH_CURVATURE,
    ActionPolynomial,
    add_bath_curvature,
    convert_to_action_polynomial,
    eckart_morse_polynomial,
    format_action_polynomial,
    parse_action_polynomial,
    parse_coefficient_table,
)
from .reaction_trace import ReactionTraceConfig
from .resonance import SolverConfig
from .trace import TraceConfig, TraceSeries, assemble_trace, dominant_orbit_fit, fit_growth_exponent

log = logging.getLogger("saddle_otoc.cli")

EXIT_OK, EXIT_IO, EXIT_EMPTY, EXIT_ORACLE = 0, 1, 2, 3
COMMANDS = ("convert", "eval", "residuals", "slope", "check")


def _bool(text):
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    text = str(text).strip()
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip()) if text else ()


def _opt_str(text):
    return None if text is None or str(text).strip().lower() in ("", "none") else str(text).strip()


# key -> (parser, default, help).  Keys are snake_case; flags are kebab-case.
SETTINGS = {
    "input": (_opt_str, None, "coefficient table (.nf) or action polynomial (.ap)"),
    "output": (str, "saddle_otoc", "output file (convert) or output prefix"),
    "preset": (_opt_str, None, "named parameter set: eckart-morse"),
    "bath_curvature": (_floats, (), "diagonal dOmega/dJ added as 1/2 c_k J_k^2, comma separated"),
    "conversion_tol": (float, 1e-10, "imaginary-residue tolerance for convert"),
    # trace
    "e": (float, -0.5, "energy E (general mode)"),
    "hbar": (float, 0.05, "Planck constant"),
    "m_max": (int, 5, "winding depth"),
    "t_min": (float, 2.0, "first observation time"),
    "t_max": (float, 6.0, "last observation time"),
    "t_points": (int, 81, "number of observation times"),
    "mode": (str, "resonant", "resonant or general"),
    "log_space": (_bool, False, "accumulate in log space"),
    "exact_butterfly": (_bool, False, "use hbar^2 cosh^2 instead of the asymptotic growth"),
    # solver
    "tol": (float, 1e-10, "Newton residual tolerance"),
    "max_iter": (int, 50, "Newton iteration cap"),
    "damping": (float, 0.5, "backtracking factor"),
    "j_floor": (float, -0.5, "lower box for Newton iterates"),
    "j_cap": (float, 50.0, "upper box for Newton iterates"),
    "tol_neg": (float, 1e-9, "negative actions above -tol_neg are clamped to zero"),
    "dedup_tol": (float, 1e-6, "root de-duplication distance"),
    "max_backtracks": (int, 40, "line-search cap"),
    # reaction trace
    "q_max": (float, 1.5, "reaction-coordinate cutoff"),
    "quadrature_points": (int, 20001, "initial Simpson points (odd)"),
    "apodize": (_bool, False, "raised-cosine taper instead of a hard cutoff"),
    "taper": (float, 0.05, "taper fraction"),
    # analysis
    "window_min": (float, 2.0, "slope-fit window start"),
    "window_max": (float, 6.0, "slope-fit window end"),
    "slope_method": (str, "auto", "auto, direct or envelope"),
    "quantum": (_bool, False, "include the grid quantum OTOC in check"),
    "seed": (int, 0, "random seed for check"),
}

# not echoed: they do not change any number in the outputs
_NOT_ECHOED = ("output", "workers")

PRESETS = {
    "eckart-morse": {
        "e": -0.5,
        "hbar": 0.05,
        "m_max": 5,
        "t_min": 2.0,
        "t_max": 6.0,
        "t_points": 81,
        "q_max": 1.5,
        "mode": "resonant",
        "bath_curvature": SYNTHETIC_BATH_CURVATURE,
    },
}


class UsageError(Exception):
    pass


def _norm_key(key):
    return key.strip().lower().replace("-", "_")


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _norm_key(key)
        if key not in SETTINGS:
            raise UsageError(f"config line {n}: unknown key {key!r}")
        out[key] = value
    return out


def resolve_settings(flags: dict, config_text: str | None = None) -> dict:
    """Merge defaults < preset < config file < flags and coerce types."""
    file_vals = parse_config_text(config_text) if config_text else {}
    preset = flags.get("preset") or file_vals.get("preset")
    preset = _opt_str(preset)
    raw = {k: v[1] for k, v in SETTINGS.items()}
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}; known: {', '.join(PRESETS)}")
        raw.update(PRESETS[preset])
    raw.update(file_vals)
    raw.update({k: v for k, v in flags.items() if v is not None and k in SETTINGS})
    out = {}
    for key, value in raw.items():
        try:
            out[key] = SETTINGS[key][0](value) if value is not None else None
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key}: {value!r} ({exc})") from None
    out["preset"] = preset
    return out


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return "none" if v is None else str(v)


def config_echo(command: str, settings: dict) -> str:
    lines = [f"saddle-otoc {__version__}", f"command = {command}"]
    lines += [f"{k} = {_fmt(settings[k])}" for k in sorted(settings) if k not in _NOT_ECHOED]
    return "\n".join(lines)


def _comment_block(echo):
    return "".join(f"# {line}\n" for line in echo.splitlines())


def trace_config(s) -> TraceConfig:
    t = tuple(np.round(np.linspace(s["t_min"], s["t_max"], s["t_points"]), 12))
    return TraceConfig(E=s["e"], hbar=s["hbar"], m_max=s["m_max"], t_grid=t, mode=s["mode"],
                       log_space=s["log_space"], exact_butterfly=s["exact_butterfly"])


def solver_config(s) -> SolverConfig:
    return SolverConfig(tol=s["tol"], max_iter=s["max_iter"], damping=s["damping"], j_floor=s["j_floor"],
                        j_cap=s["j_cap"], tol_neg=s["tol_neg"], dedup_tol=s["dedup_tol"],
                        max_backtracks=s["max_backtracks"])


def reaction_config(s) -> ReactionTraceConfig:
    return ReactionTraceConfig(hbar=s["hbar"], q_max=s["q_max"], quadrature_points=s["quadrature_points"],
                               apodize=s["apodize"], taper=s["taper"])


def load_polynomial(s) -> ActionPolynomial:
    """Polynomial from ``input`` (by suffix), else the Eckart-Morse preset terms."""
    path = s["input"]
    if path is None:
        poly = eckart_morse_polynomial(curvature=None)
    else:
        text = Path(path).read_text(encoding="utf-8")
        if Path(path).suffix == ".nf":
            poly = convert_to_action_polynomial(parse_coefficient_table(text), tol=s["conversion_tol"])
        else:
            poly = parse_action_polynomial(text)
    if s["bath_curvature"]:
        poly = add_bath_curvature(poly, s["bath_curvature"])
    return poly


# ------------------------------------------------------------------- writers

def _num(x):
    return format(float(x), ".17g")


def _vec(v, conv=_num):
    return ";".join(conv(x) for x in v)


def series_csv(series: TraceSeries, echo: str) -> str:
    k = series.m_max
    rows = [",".join(["t", "C_E"] + [f"residual_{j}" for j in range(1, k + 1)])]
    for i, t in enumerate(series.t):
        rows.append(",".join([_num(t), _num(series.C_E[i])] + [_num(series.residuals[j, i]) for j in range(k)]))
    return _comment_block(echo) + "\n".join(rows) + "\n"


AUDIT_COLUMNS = ("t", "m", "J", "tau", "Lambda", "S", "mu", "sigma_H", "A", "stability_factor", "weight")


def orbits_csv(series: TraceSeries, echo: str) -> str:
    rows = [",".join(AUDIT_COLUMNS)]
    for r in series.contributions:
        c = r.contribution
        rows.append(",".join([
            _num(r.t), _vec(c.m, str), _vec(c.torus.J), _num(c.torus.tau), _num(c.torus.lambda_val),
            _num(c.action), str(c.maslov), str(c.signature), _num(c.amplitude), _num(c.stability_factor),
            _num(r.weight),
        ]))
    return _comment_block(echo) + "\n".join(rows) + "\n"


def residuals_csv(series: TraceSeries, echo: str) -> str:
    k = series.m_max
    rows = [",".join(["t"] + [f"delta_{j}" for j in range(1, k + 1)])]
    for i, t in enumerate(series.t):
        rows.append(",".join([_num(t)] + [_num(series.residuals[j, i]) for j in range(k)]))
    return _comment_block(echo) + "\n".join(rows) + "\n"


def slope_csv(series: TraceSeries, s: dict, echo: str) -> str:
    window = (s["window_min"], s["window_max"])
    rows = ["quantity,method,slope,intercept,n_points,window_min,window_max,reference_slope"]
    fit = fit_growth_exponent(series, window, method=s["slope_method"])
    rows.append(",".join(["C_E", fit.method, _num(fit.slope), _num(fit.intercept), str(fit.n_points),
                          _num(window[0]), _num(window[1]), ""]))
    if series.mode == "resonant" and series.contributions:
        dom = dominant_orbit_fit(series, window)
        rows.append(",".join([f"orbit m={_vec(dom.m, str)}", dom.fit.method, _num(dom.fit.slope),
                              _num(dom.fit.intercept), str(dom.fit.n_points), _num(window[0]), _num(window[1]),
                              _num(dom.reference_slope)]))
    return _comment_block(echo) + "\n".join(rows) + "\n"


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="\n")
    log.info("wrote %s", path)


# ------------------------------------------------------------------ commands

def _evaluate(s, workers):
    poly = load_polynomial(s)
    cfg = trace_config(s)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EmptySumWarning)
        series = assemble_trace(poly, cfg, solver_config(s), workers=workers)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    all_empty = len(series.empty_times) == len(series.t)
    return series, all_empty


def cmd_convert(s, echo, workers):
    if s["input"] is None:
        raise UsageError("convert needs --input")
    text = Path(s["input"]).read_text(encoding="utf-8")
    poly = convert_to_action_polynomial(parse_coefficient_table(text), tol=s["conversion_tol"])
    out = s["output"] if Path(s["output"]).suffix else s["output"] + ".ap"
    _write(out, format_action_polynomial(poly, header=echo))
    print(f"{len(poly.terms)} terms -> {out}")
    return EXIT_OK


def cmd_eval(s, echo, workers):
    series, empty = _evaluate(s, workers)
    prefix = s["output"]
    _write(f"{prefix}_series.csv", series_csv(series, echo))
    _write(f"{prefix}_orbits.csv", orbits_csv(series, echo))
    print(f"{len(series.t)} times, {series.orbit_count} orbits, {len(series.skipped)} skipped")
    if empty:
        print("error: no orbit contributed at any observation time", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_residuals(s, echo, workers):
    series, empty = _evaluate(s, workers)
    _write(f"{s['output']}_residuals.csv", residuals_csv(series, echo))
    if empty:
        print("error: no orbit contributed at any observation time", file=sys.stderr)
        return EXIT_EMPTY
    for k in range(series.m_max):
        print(f"depth {k + 1}: max residual {np.max(series.residuals[k]):.6e}")
    return EXIT_OK


def cmd_slope(s, echo, workers):
    series, empty = _evaluate(s, workers)
    if empty:
        print("error: no orbit contributed at any observation time", file=sys.stderr)
        return EXIT_EMPTY
    text = slope_csv(series, s, echo)
    _write(f"{s['output']}_slope.csv", text)
    print("\n".join(line for line in text.splitlines() if not line.startswith("#")))
    return EXIT_OK


def cmd_check(s, echo, workers):
    from .oracle import run_oracle_suite

    checks = run_oracle_suite(load_polynomial(s), seed=s["seed"], quantum=s["quantum"])
    width = max(len(c.name) for c in checks)
    print(f"{'oracle':<{width}}  {'measured':>12}  {'tolerance':>10}  result")
    for c in checks:
        print(f"{c.name:<{width}}  {c.measured:>12.3e}  {c.tolerance:>10.1e}  {'PASS' if c.passed else 'FAIL'}")
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"error: {len(failed)} oracle check(s) failed", file=sys.stderr)
        return EXIT_ORACLE
    return EXIT_OK


HANDLERS = {"convert": cmd_convert, "eval": cmd_eval, "residuals": cmd_residuals, "slope": cmd_slope, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--workers", type=int, default=1, help="threads for the orbit solves")
    common.add_argument("-v", "--verbose", action="count", default=0)
    for key, (conv, default, helptext) in SETTINGS.items():
        flag = "--" + key.replace("_", "-")
        if conv is _bool:
            common.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None, help=helptext)
        else:
            common.add_argument(flag, dest=key, default=None, help=f"{helptext} (default: {_fmt(default)})")
    parser = argparse.ArgumentParser(prog="saddle-otoc", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__name__[4:])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        config_text = Path(args.config).read_text(encoding="utf-8") if args.config else None
        flags = {k: getattr(args, k) for k in SETTINGS}
        s = resolve_settings(flags, config_text)
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        echo = config_echo(args.command, s)
        return HANDLERS[args.command](s, echo, args.workers)
    except (OSError, UsageError, ValueError, SaddleOTOCError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
