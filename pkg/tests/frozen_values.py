"""Reference numbers fixed once from independent sources.

Quoted constants are the published Eckart-Morse normal-form values.  The
reaction-trace values were computed once with 30-digit Fresnel integrals
(mpmath ``fresnelc``/``fresnels``), independently of both the Simpson
quadrature and the scipy-based closed form in the package.
"""

# raw complex coefficients of the normal form as published
H_1100 = -0.012334j
H_0010 = 1.267290j
H_2000 = 0.118039

# derived constants as published, to 4 decimals
B2_4DP = -0.0123
OMEGA3_4DP = 1.2673
A_4DP = 0.2361

E0 = -0.9875
LAMBDA = 0.7350
OMEGA2 = 1.8225
B3 = 0.0053

# E0 + omega_2 (term-by-term sum of the quoted coefficients at J = (1, 0))
H_AT_J10 = 0.8350
# lambda + b2 at J = (1, 0), with b2 rounded as published
LAMBDA_AT_J10_4DP = 0.7227

# int_{-q}^{q} K_reac(q, q, tau) dq for Lambda = 0.7350, hbar = 0.05
REACTION_TRACE = {
    (4.0, 1.5): complex(0.22703944390559509, 0.019557054916983744),
    (4.0, 3.0): complex(0.23126960624157161, -0.005059053543513322),
    (5.0, 1.5): complex(0.15183163324413917, -0.011705790310312308),
    (5.0, 3.0): complex(0.15809501223173537, -0.006313533475132927),
    (6.0, 1.5): complex(0.11231355486778275, -0.011053576642944146),
    (6.0, 3.0): complex(0.11412752358698503, 0.004934771680752165),
}
