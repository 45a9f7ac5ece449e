import time

import gmpy2

from hopfzero.fields import bundled_field
from hopfzero.manifolds import find_equilibria, manifold_2d_section
from hopfzero.normalform import blow_up, reduce_to_normal_form
from hopfzero.precision import to_decimal, working_precision

nfcache = {}

for digits, grid in ((45, 16), (45, 32), (45, 64), (60, 64), (60, 96)):
    with working_precision(digits):
        t0 = time.time()
        nf = nfcache.get(digits)
        if nf is None:
            nf = nfcache[digits] = reduce_to_normal_form(bundled_field("standard"))
        sys = blow_up(nf, "0.1", "-0.003")
        north, south = find_equilibria(sys)
        cu = manifold_2d_section(sys, south, grid, validate=True)
        print(f"d={digits} g={grid} order={cu.order} "
              f"resid={to_decimal(cu.fit_residual, 3)} "
              f"tail={to_decimal(cu.tail, 3)} drift={to_decimal(cu.drift, 3)} "
              f"est={to_decimal(cu.est_error, 3)} [{time.time()-t0:.0f}s]")
        ak = [to_decimal(abs(c), 3) for c in cu.coeffs[: min(9, len(cu.coeffs))]]
        print("   |c_k|:", " ".join(ak))
