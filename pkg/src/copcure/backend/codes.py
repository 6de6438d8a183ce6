"""Integer family codes shared by both kernel backends.

The kernels dispatch on plain integers so the hot loops stay branchy but
allocation-free under numba.  The string names are the canonical spellings
used by the CLI and scenario files.
"""

MARG_WEIBULL = 0
MARG_LOGNORMAL = 1
MARG_LOGLOGISTIC = 2
MARG_GAMMA = 3

COP_INDEPENDENCE = 0
COP_FRANK = 1
COP_GUMBEL = 2
COP_JOE = 3
COP_CLAYTON90 = 4
COP_CLAYTON180 = 5
COP_CLAYTON270 = 6
COP_GAUSSIAN = 7

MARGINAL_NAMES = {
    "weibull": MARG_WEIBULL,
    "lognormal": MARG_LOGNORMAL,
    "loglogistic": MARG_LOGLOGISTIC,
    "gamma": MARG_GAMMA,
}

COPULA_NAMES = {
    "independence": COP_INDEPENDENCE,
    "frank": COP_FRANK,
    "gumbel": COP_GUMBEL,
    "joe": COP_JOE,
    "clayton90": COP_CLAYTON90,
    "clayton180": COP_CLAYTON180,
    "clayton270": COP_CLAYTON270,
    "gaussian": COP_GAUSSIAN,
}

# u, v are clamped into this closed interval before any log/power is taken;
# likelihood evaluation routinely hits F = 0 or 1 exactly.
UV_EPS = 1e-15

# Density terms below this value are treated as underflow and floored.
DENSITY_FLOOR = 1e-300

# Frank association below this magnitude is indistinguishable from
# independence (the Frank formulas are 0/0 at theta = 0).
FRANK_INDEP_TOL = 1e-8
