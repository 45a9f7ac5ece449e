import time

from hopfzero.errors import ConditionFailure
from hopfzero.fields import bundled_field
from hopfzero.normalform import blow_up, reduce_to_normal_form, straighten_south
from hopfzero.precision import digits_for_transit, to_decimal, working_precision
from hopfzero.shilnikov import (
    geometry_diagnostics,
    homoclinic_bisect,
    second_crossing,
)

t0 = time.time()

# unperturbed: exact connection, no second crossing
with working_precision(40):
    nf0 = reduce_to_normal_form(bundled_field("unfolding"))
    sys0 = blow_up(nf0, "0.1", 0)
    try:
        second_crossing(sys0, check_precision=False)
        print("FAIL: unperturbed second crossing did not raise")
    except ConditionFailure as e:
        print("unpert raises:", str(e)[:80])
print("[%.0fs]" % (time.time() - t0))

# synthetic bisect
with working_precision(30):
    nf0 = reduce_to_normal_form(bundled_field("unfolding"))
    res = homoclinic_bisect(nf0, "0.1", -1, 2, offset_fn=lambda s: s - 0.3125)
    print("synthetic root:", to_decimal(res.sigma_s, 12), "evals", len(res.evaluations))

# perturbed transit at eps=0.1 on the measured mean-zero curve
eps = "0.1"
sig = "-0.00300062427787"
need = digits_for_transit(0.1, 1.0)
print("transit digits:", need)
with working_precision(need + 4):
    nf = reduce_to_normal_form(bundled_field("standard"))
    sys = blow_up(nf, eps, sig)
    t1 = time.time()
    sc = second_crossing(sys, theta_grid=16, validate=False)
    print("transit time: %.0fs" % (time.time() - t1))
    print("tau:", to_decimal(sc.tau, 8))
    print("theta0:", to_decimal(sc.theta0, 10), "theta0*eps^2:",
          to_decimal(sc.theta0 * sc.epsilon ** 2, 8))
    print("dist_cu:", to_decimal(sc.dist_cu, 6))
    import gmpy2
    norm = sc.dist_cu * gmpy2.exp(gmpy2.const_pi() / sc.epsilon)
    print("dist_cu * e^{pi/eps}:", to_decimal(norm, 8))
    print("signed_offset:", to_decimal(sc.signed_offset, 6),
          "budget:", to_decimal(sc.offset_budget, 4))
    print("s1:", to_decimal(sc.s1_value, 6), "min_radius:", to_decimal(sc.min_radius, 6))
    print("q0:", [to_decimal(c, 4) for c in sc.q0])
    print("Q0:", [to_decimal(c, 4) for c in sc.Q0])
print("[%.0fs]" % (time.time() - t0))

# diagnostics on the straightened unperturbed system at eps=0.05
with working_precision(24):
    nf0 = reduce_to_normal_form(bundled_field("unfolding"))
    s5 = blow_up(nf0, "0.05", 0)
    st5 = straighten_south(s5)
    gd = geometry_diagnostics(st5, grid=(16, 16), n_orbits=4)
    print("cyl min flux:", to_decimal(gd.cyl_min_flux, 8),
          "expected:", to_decimal(gd.cyl_expected, 8))
    print("ell min margin:", to_decimal(gd.ell_min_margin, 8),
          "expected:", to_decimal(gd.ell_expected, 8))
    print("K fit:", to_decimal(gd.h_growth_k, 4), "orbits:", gd.h_orbits)
    print("C fit:", to_decimal(gd.gronwall_c, 6),
          "L:", to_decimal(gd.gronwall_lipschitz, 6), "ok:", gd.gronwall_ok)
print("smoke_shilnikov done [%.0fs]" % (time.time() - t0))
