"""
Exponentiating a perturbed rotation
===================================

A = D + eps B with D diagonal and purely imaginary, B dense and of the same
norm as D.  For small eps a splitting that never forms a dense product with D
can beat the best Pade plan, and the error polynomials say by how much.
"""
import numpy as np

from splitexpm.bench import BUILTINS, reference_expm, relative_error
from splitexpm.errmodel import commutator_norm_table, pade_plan, plan_for_scheme, run_plan
from splitexpm.matrixcore import CostTally

# the 101x101 rotation problem at three sizes of the perturbation
for eps in (1e-1, 1e-2, 1e-3):
    P = BUILTINS["rotation"](eps)
    ref = reference_expm(P.dense())
    norms = commutator_norm_table(P)
    print(f"eps={eps:g}  |[D,B]|={norms.nDB:.3g}  |ad^6 B|={norms.nD6B:.3g}")

    # the Pade baseline: r_{2m} of A/2^s followed by s squarings
    base = pade_plan(P, 1e-6)
    t = CostTally()
    err = relative_error(run_plan(P, base, t), ref)
    print(f"  {base.method:5s} s={base.s:2d} cost {str(t.dense_products):>5s} error {err:.1e}")

    # the commutator-modified splittings, squarings chosen from their bounds
    for sid in ("Yt0", "Yt1", "Yt2"):
        plan = plan_for_scheme(P, sid, 1e-6)
        t = CostTally()
        err = relative_error(run_plan(P, plan, t), ref)
        print(f"  {sid:5s} s={plan.s:2d} cost {str(t.dense_products):>5s} error {err:.1e}"
              f"  (predicted {plan.predicted_error:.1e})")

# costs are exact rationals: an inverse-multiply counts as 4/3 of a product
