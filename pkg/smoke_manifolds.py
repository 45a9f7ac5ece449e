import time

import gmpy2

from hopfzero.fields import truncated_unfolding, bundled_field
from hopfzero.jets import parse_jet_text
from hopfzero.normalform import reduce_to_normal_form, blow_up
from hopfzero.manifolds import (
    find_equilibria, shilnikov_eigenvalue_check, manifold_1d,
    manifold_2d_section, graph_deviation, backward_invariance_check,
)
from hopfzero.precision import working_precision, mpf, to_decimal


def D(x, n=8):
    return to_decimal(x, n)


def build(a=1, b=1, eps="0.1", sigma="0", name="unfolding", digits=40, **kw):
    with working_precision(digits):
        uj = bundled_field(name, a=a, b=b, **kw) if name != "unfolding" else truncated_unfolding(a=a, b=b)
        nf = reduce_to_normal_form(uj)
        return blow_up(nf, mpf(eps), mpf(sigma))


t0 = time.time()
with working_precision(40):
    sys1 = build()
    north, south = find_equilibria(sys1)
    print("north:", [D(c) for c in north.point], "lam", D(north.lam), "pair", D(north.eigen.rho), D(north.omega))
    print("south:", [D(c) for c in south.point], "lam", D(south.lam), "pair", D(south.eigen.rho), D(south.omega))
    assert abs(north.point[2] - 1) < mpf("1e-30"), "north z"
    assert abs(north.lam - 2) < mpf("1e-10") and abs(north.eigen.rho + 1) < mpf("1e-10") and abs(north.omega - 10) < mpf("1e-10")
    assert abs(south.lam + 2) < mpf("1e-10") and abs(south.eigen.rho - 1) < mpf("1e-10") and abs(south.omega - 10) < mpf("1e-10")
    print("shilnikov a=1:", shilnikov_eigenvalue_check(north), shilnikov_eigenvalue_check(south))
    assert shilnikov_eigenvalue_check(north) and shilnikov_eigenvalue_check(south)
print("equilibria ok", f"{time.time()-t0:.2f}s")

# a=3 and a=2 checks
for aa, expect in ((3, False), (2, False)):
    with working_precision(40):
        s = build(a=aa)
        n2, s2 = find_equilibria(s)
        got = shilnikov_eigenvalue_check(n2)
        print(f"shilnikov a={aa}:", got)
        assert got == expect

# 1D manifolds, unperturbed: crossing at origin
t0 = time.time()
with working_precision(40):
    bn = manifold_1d(sys1, north)
    bs = manifold_1d(sys1, south)
    qn, qs = bn.section_point, bs.section_point
    print("north 1d crossing:", [D(c) for c in qn], "drift", D(bn.drift, 4))
    print("south 1d crossing:", [D(c) for c in qs], "drift", D(bs.drift, 4))
    assert max(abs(qn[0]), abs(qn[1])) < mpf("1e-25")
    assert max(abs(qs[0]), abs(qs[1])) < mpf("1e-25")
print("1d ok", f"{time.time()-t0:.2f}s")

# 2D sections, unperturbed: r(theta) == (a+1)/(2b)
t0 = time.time()
with working_precision(40):
    cu = manifold_2d_section(sys1, south, theta_grid_size=48)
    cs = manifold_2d_section(sys1, north, theta_grid_size=48)
    print("Cu mean:", D(cu.mean, 20), "est_err", D(cu.est_error, 4), "order", cu.order)
    print("Cs mean:", D(cs.mean, 20), "est_err", D(cs.est_error, 4), "order", cs.order)
    assert cu.which == "Cu" and cs.which == "Cs"
    assert abs(cu.mean - 1) < mpf("1e-8"), "Cu mean"
    assert abs(cs.mean - 1) < mpf("1e-8"), "Cs mean"
    assert abs(cu.first_harmonic) < mpf("1e-12")
print("2d unperturbed ok", f"{time.time()-t0:.2f}s")

t0 = time.time()
with working_precision(40):
    sys2 = build(a=2, b="0.5")
    n3, s3 = find_equilibria(sys2)
    cu2 = manifold_2d_section(sys2, s3, theta_grid_size=48)
    print("Cu mean a=2 b=0.5:", D(cu2.mean, 20), "est_err", D(cu2.est_error, 4))
    assert abs(cu2.mean - 3) < mpf("1e-7")
print("2d (a=2,b=0.5) ok", f"{time.time()-t0:.2f}s")

# graph deviation + backward invariance on the unperturbed system
t0 = time.time()
with working_precision(40):
    gd = graph_deviation(sys1, south, n_orbits=4)
    print("graph max_psi (unperturbed):", D(gd["max_psi"], 6), "samples", gd["samples"])
    assert gd["max_psi"] < mpf("1e-6")
    bi = backward_invariance_check(sys1, south, cu, n_points=3)
    print("backward invariance:", bi["within_cone"], D(bi["max_axial_ratio"], 4))
    assert bi["within_cone"]
print("diagnostics ok", f"{time.time()-t0:.2f}s")

# perturbed: standard test field at eps=0.1 -- equilibria near (0,0,±1), Cu curve sane
t0 = time.time()
with working_precision(60):
    sysp = build(name="standard", eps="0.1", digits=60)
    np_, sp_ = find_equilibria(sysp)
    print("pert north:", [D(c, 10) for c in np_.point], "res", D(np_.residual, 4))
    cup = manifold_2d_section(sysp, sp_, theta_grid_size=48)
    print("pert Cu mean:", D(cup.mean, 20), "first harm:", D(abs(cup.first_harmonic), 8), "est_err", D(cup.est_error, 4))
    gdp = graph_deviation(sysp, sp_, n_orbits=4)
    print("pert graph max_psi:", D(gdp["max_psi"], 6))
print("perturbed ok", f"{time.time()-t0:.2f}s")
