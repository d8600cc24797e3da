"""
Measured orders and the two error regimes
=========================================

A splitting of order (p1, p2) has local error of size eps h^(p1+1) plus
eps^2 h^(p2+1).  Lifting the problem to a block-nilpotent matrix separates the
two terms exactly, so both exponents can be read off a log-log fit.
"""
import numpy as np

from splitexpm.bench import empirical_order, gen_example2x2, relative_error
from splitexpm.splitcat import UNVERIFIED, catalog, get_scheme, run_scheme

# the measured pair against the declared label, for every catalog entry
for scheme in catalog():
    est = empirical_order(scheme)
    flag = "" if est.matches() else "   <- " + UNVERIFIED.get(scheme.id, "mismatch")
    print(f"{scheme.id:14s} declared {str(scheme.order):10s} measured ({est.p1:5.2f}, {est.p2:5.2f}){flag}")

# Strang with r2 on the 2x2 example, repeated 2^s times: the error first
# follows eps, then the accumulated eps^2 terms take over
strang = get_scheme("strang")
print("\n  s   eps=1e-1   eps=1e-3   log10 ratio")
for s in (0, 5, 10, 15, 20, 25):
    errs = []
    for eps in (1e-1, 1e-3):
        P, exact = gen_example2x2(eps)
        errs.append(relative_error(run_scheme(P, strang, 1.0, s, inner=2), exact(s)))
    print(f"{s:3d}   {errs[0]:.2e}   {errs[1]:.2e}   {np.log10(errs[0] / errs[1]):6.2f}")
