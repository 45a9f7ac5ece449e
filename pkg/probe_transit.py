import time

import gmpy2

from hopfzero.fields import bundled_field
from hopfzero.normalform import blow_up, reduce_to_normal_form
from hopfzero.precision import digits_for_transit, to_decimal, working_precision
from hopfzero.shilnikov import second_crossing

# sigma on the measured mean-zero curve per epsilon (node solves)
NODES = {
    "0.2": "-0.00600473597898",
    "0.14142136": "-0.0042443799015",
    "0.1": "-0.00300062427787",
}

nf_by_digits = {}
for eps, sig in NODES.items():
    need = digits_for_transit(float(eps), 1.0) + 4
    with working_precision(need):
        t0 = time.time()
        nf = nf_by_digits.get(need)
        if nf is None:
            nf = nf_by_digits[need] = reduce_to_normal_form(bundled_field("standard"))
        sys = blow_up(nf, eps, sig)
        sc = second_crossing(sys, theta_grid=96, validate=False, track=True)
        e = sc.epsilon
        norm = sc.dist_cu * gmpy2.exp(gmpy2.const_pi() / e)
        print(f"eps={eps} digits={need} tau={to_decimal(sc.tau, 6)} "
              f"theta0*e2={to_decimal(sc.theta0 * e * e, 8)}")
        print(f"  dist_cu={to_decimal(sc.dist_cu, 6)} norm={to_decimal(norm, 8)} "
              f"offset={to_decimal(sc.signed_offset, 6)} "
              f"budget={to_decimal(sc.offset_budget, 3)} "
              f"minr={to_decimal(sc.min_radius, 4)} [{time.time()-t0:.0f}s]")
