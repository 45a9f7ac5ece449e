import time

import gmpy2

from hopfzero.errors import ConditionFailure
from hopfzero.fields import bundled_field
from hopfzero.normalform import reduce_to_normal_form
from hopfzero.precision import mpf, working_precision
from hopfzero.splitting import (
    default_eps_grid,
    fit_s1,
    fit_s2,
    gamma_curve,
    heteroclinic_angles,
    synthetic_s1_samples,
    synthetic_s2_samples,
    S2Sample,
)

with working_precision(40):
    grid = default_eps_grid("0.02", "0.1")
    print("grid:", [str(e)[:8] for e in grid])

    # fit_s1 oracle: exact law, corr=0 -> C* within 1e-6
    samples = synthetic_s1_samples(grid, a=1, c0="0.5", cstar="2.0")
    rep = fit_s1(samples, a=1, c0="0.5")
    print("s1 exact: C* err", abs(rep.stokes - 2), "rate", rep.rate, "power", rep.power)
    assert abs(rep.stokes - 2) < mpf("1e-6")

    # corr=1 -> C* within 5%
    samples = synthetic_s1_samples(grid, a=1, c0="0.5", cstar="2.0", corr=1)
    rep = fit_s1(samples, a=1, c0="0.5")
    print("s1 corr=1: C*", rep.stokes, "rel err", abs(rep.stokes - 2) / 2)
    assert abs(rep.stokes - 2) / 2 < mpf("0.05")

    # all-zero -> error
    zero = [s for s in synthetic_s1_samples(grid, a=1, c0=0, cstar=0)]
    try:
        fit_s1(zero, a=1, c0=0)
        raise AssertionError("should have raised")
    except ConditionFailure as exc:
        print("s1 all-zero raises:", exc)

    # fit_s2 oracle: (1.5, -0.5, 0.3) at a=1 -> within 5%
    samples = synthetic_s2_samples(grid, a=1, c1star="1.5", c2star="-0.5", l0="0.3")
    rep = fit_s2(samples, a=1)
    print("s2: c1*", rep.c1star, "c2*", rep.c2star, "L0", rep.phase_drift)
    for got, want in ((rep.c1star, mpf("1.5")), (rep.c2star, mpf("-0.5")),
                      (rep.phase_drift, mpf("0.3"))):
        assert abs(got - want) / abs(want) < mpf("0.05"), (got, want)

    # degenerate
    samples = synthetic_s2_samples(grid, a=1, c1star=0, c2star=0, l0=0)
    rep = fit_s2(samples, a=1)
    print("s2 degenerate:", rep.degenerate)
    assert rep.degenerate

    # phase unwrap affine: larger L0 wraps several times
    samples = synthetic_s2_samples(grid, a=1, c1star=1, c2star=0, l0="2.5")
    rep = fit_s2(samples, a=1)
    print("s2 unwrap: L0", rep.phase_drift, "res", rep.phase_residual)
    assert abs(rep.phase_drift - mpf("2.5")) < mpf("0.01")

    # gamma synthetic: mean = sigma*I + eps*J with I=1, J=0.25
    nf = reduce_to_normal_form(bundled_field("standard"))
    scale = gmpy2.sqrt((nf.a + 1) / nf.b)

    def proxy(eps, sig):
        return sig * 1 + eps * mpf("0.25"), mpf(0)

    curve = gamma_curve(nf, ["0.05", "0.1", "0.2"], proxy_fn=proxy)
    for n in curve.nodes:
        want = -mpf("0.25") * n.epsilon
        print("gamma node", n.epsilon, n.sigma, "want", want, "evals", n.evaluations)
        assert abs(n.sigma - want) < mpf("1e-20")
    print("gamma I", curve.I, "J", curve.J, "intercept", curve.intercept)
    assert abs(curve.I - 1) < mpf("1e-15")
    assert abs(curve.J - mpf("0.25")) < mpf("1e-15")

    # opposite-c1 targets straddle
    cp = gamma_curve(nf, ["0.1"], rho=("0.5", 0, 1), proxy_fn=proxy)
    cm = gamma_curve(nf, ["0.1"], rho=("-0.5", 0, 1), proxy_fn=proxy)
    print("straddle:", cp.nodes[0].sigma, curve.sigma_at("0.1"), cm.nodes[0].sigma)
    assert cm.nodes[0].sigma < curve.sigma_at("0.1") < cp.nodes[0].sigma

    # heteroclinic angles: pure first harmonic -> pi apart
    prof = S2Sample(epsilon=mpf("0.1"), sigma=mpf(0),
                    coeffs=(mpf(0), gmpy2.mpc(mpf("0.3"), mpf("0.1"))),
                    est_error=mpf(0), digits=40)
    roots = heteroclinic_angles(prof)
    assert len(roots) == 2
    gap = abs(roots[1].theta - roots[0].theta)
    print("angles gap:", gap, "pi:", gmpy2.const_pi())
    assert abs(gap - gmpy2.const_pi()) < mpf("1e-25")
    assert all(r.transverse for r in roots)

    # mean = 0.5 * amplitude -> separation 2pi/3
    amp = 2 * abs(gmpy2.mpc(mpf("0.3"), mpf("0.1")))
    prof2 = S2Sample(epsilon=mpf("0.1"), sigma=mpf(0),
                     coeffs=(mpf("0.5") * amp, gmpy2.mpc(mpf("0.3"), mpf("0.1"))),
                     est_error=mpf(0), digits=40)
    roots2 = heteroclinic_angles(prof2)
    gap2 = abs(roots2[1].theta - roots2[0].theta)
    gap2 = min(gap2, 2 * gmpy2.const_pi() - gap2)
    print("angles gap2:", gap2, "2pi/3:", 2 * gmpy2.const_pi() / 3)
    assert abs(gap2 - 2 * gmpy2.const_pi() / 3) < mpf("1e-25")

    # mean = 2 * amplitude -> no intersection
    prof3 = S2Sample(epsilon=mpf("0.1"), sigma=mpf(0),
                     coeffs=(2 * amp, gmpy2.mpc(mpf("0.3"), mpf("0.1"))),
                     est_error=mpf(0), digits=40)
    try:
        heteroclinic_angles(prof3)
        raise AssertionError("should have raised")
    except ConditionFailure as exc:
        print("no-intersection raises:", exc)

print("synthetic oracles all pass")
