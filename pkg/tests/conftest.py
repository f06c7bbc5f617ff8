import numpy as np
import pytest

from saddle_otoc.normal_form import ActionPolynomial, eckart_morse_polynomial
from saddle_otoc.trace import TraceConfig, assemble_trace


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def em_poly():
    return eckart_morse_polynomial()


@pytest.fixture(scope="session")
def preset_series(em_poly):
    """Resonant-mode Eckart-Morse preset on the default 81-point grid."""
    return assemble_trace(em_poly, TraceConfig())


def random_polynomial(rng, f=2, degree=4, n_terms=12, scale=0.3):
    """Random dense-ish polynomial in (I, J) with O(1) low-order terms."""
    terms = {(0,) * (f + 1): -1.0, (1,) + (0,) * f: 0.7}
    for k in range(f):
        e = [0] * (f + 1)
        e[k + 1] = 1
        terms[tuple(e)] = 1.0 + 0.5 * k
    while len(terms) < n_terms + f + 2:
        e = tuple(int(v) for v in rng.multinomial(int(rng.integers(2, degree + 1)), np.ones(f + 1) / (f + 1)))
        terms.setdefault(e, float(rng.normal(scale=scale)))
    return ActionPolynomial(terms, f=f)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
