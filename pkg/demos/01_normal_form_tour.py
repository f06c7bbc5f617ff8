"""
A tour of the saddle normal form
================================

Convert the quoted Eckart-Morse coefficient table into a real action
polynomial, evaluate the saddle exponent and bath frequencies, and check
the analytic derivatives against central finite differences.
"""
import numpy as np

from saddle_otoc.normal_form import (
    ActionPoint,
    convert_to_action_polynomial,
    eckart_morse_polynomial,
    eckart_morse_table,
    bath_frequencies,
    eval_hamiltonian,
    frequency_jacobian,
    lyapunov_exponent,
)
from saddle_otoc.oracle import finite_difference_check

# The table lists complex coefficients h of products x^a xi^b.  Each
# bath monomial picks up a factor (-i)^N on conversion, so purely
# imaginary entries become real frequencies and couplings.
table = eckart_morse_table()
quoted = convert_to_action_polynomial(table)
print("converted action polynomial H(I, J):")
for exps, coeff in sorted(quoted.terms.items()):
    print(f"  {exps}: {coeff:+.6f}")

# The quoted subset is linear in the bath actions.  The library preset adds
# a small diagonal bath curvature so that resonance conditions have
# isolated solutions.
poly = eckart_morse_polynomial()
for J in ([0.0, 0.0], [1.0, 0.0], [1.0, 1.0]):
    pt = ActionPoint.on_nhim(np.array(J))
    print(f"J = {J}:  H = {eval_hamiltonian(poly, pt):+.4f}  Lambda = {lyapunov_exponent(poly, pt):.4f}  "
          f"Omega = {np.round(bath_frequencies(poly, pt), 4)}")
print("dOmega/dJ on the NHIM:\n", frequency_jacobian(poly, ActionPoint.on_nhim(np.zeros(2))))

rng = np.random.default_rng(0)
worst = max(finite_difference_check(poly, ActionPoint(x[0], x[1:]), 1e-5).max_error
            for x in rng.uniform(0, 2, (100, 3)))
print(f"largest finite-difference mismatch over 100 random points: {worst:.2e}")
