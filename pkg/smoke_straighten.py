import time

import gmpy2

from hopfzero.fields import bundled_field
from hopfzero.flow import integrate
from hopfzero.manifolds import find_equilibria, manifold_1d
from hopfzero.normalform import blow_up, reduce_to_normal_form, straighten_south
from hopfzero.precision import mpf, to_decimal, working_precision

t0 = time.time()
with working_precision(40):
    # unperturbed: identity
    nf0 = reduce_to_normal_form(bundled_field("unfolding"))
    sys0 = blow_up(nf0, "0.1", 0)
    st0 = straighten_south(sys0)
    d = st0.straighten
    print("unpert shift:", to_decimal(d.shift, 5),
          "tilt:", [to_decimal(t, 5) for t in d.tilt],
          "shear max:", to_decimal(max(abs(c) for c in d.shear_x + d.shear_y), 5),
          "fit res:", to_decimal(d.fit_residual, 5))
    assert d.shift == 0 and all(c == 0 for c in d.shear_x + d.shear_y)

    # perturbed standard field
    nf = reduce_to_normal_form(bundled_field("standard"))
    sys = blow_up(nf, "0.1", "0.02")
    st = straighten_south(sys)
    d = st.straighten
    print("pert shift:", to_decimal(d.shift, 8),
          "tilt:", [to_decimal(t, 8) for t in d.tilt])
    print("fit residual:", to_decimal(d.fit_residual, 5),
          "eq residual:", to_decimal(d.eq_residual, 5),
          "samples:", d.orbit_samples, "field degree:", st.field.degree())

    # the straightened field at (0,0,-1) vanishes to eq_residual
    v = st.field.eval((0, 0, -1))
    print("field at (0,0,-1):", [to_decimal(c, 4) for c in v])

    # h2 gradient at (0,0,-1) ~ 0
    h1, h2 = st.h_split
    def h2_at(p):
        x, y, z = (mpf(c) for c in p)
        acc = mpf(0)
        for (i, j, k), c in h2.items():
            acc += c * x**i * y**j * z**k
        return acc
    hh = mpf("1e-12")
    base = (mpf(0), mpf(0), mpf(-1))
    grads = []
    for axis in range(3):
        p_hi = list(base); p_hi[axis] += hh
        p_lo = list(base); p_lo[axis] -= hh
        grads.append((h2_at(p_hi) - h2_at(p_lo)) / (2 * hh))
    print("h2 value:", to_decimal(h2_at(base), 4),
          "grad:", [to_decimal(g, 4) for g in grads])

    # h1 bounded on [-1.5, 0]
    h1v = [abs(sum(c * mpf(z)**k for k, c in enumerate(h1)))
           for z in ("-1.5", "-1.0", "-0.5", "0.0")]
    print("h1 samples:", [to_decimal(v, 4) for v in h1v])

    # transformed stable orbit stays on the axis to ~fit residual:
    # re-integrate in straightened coordinates from a converted seed
    _, south = find_equilibria(sys)
    tow = manifold_1d(sys, south, validate=False)
    seed_s = d.from_original(tow.seed)
    print("converted seed:", [to_decimal(c, 4) for c in seed_s])
    traj = integrate(st.field, seed_s, tow.trajectory.t_end, backward=True,
                     tol=mpf(10) ** -30)
    worst = mpf(0)
    for _, p in traj.sample(60):
        worst = max(worst, abs(p[0]), abs(p[1]))
    print("max |x|,|y| along straightened stable orbit:", to_decimal(worst, 5))
    assert worst < 100 * d.fit_residual, (worst, d.fit_residual)

    # round trip maps
    p = (mpf("0.3"), mpf("-0.2"), mpf("-0.7"))
    rt = d.from_original(d.to_original(p))
    err = max(abs(rt[i] - p[i]) for i in range(3))
    print("round trip error:", to_decimal(err, 4))
    assert err < mpf(10) ** -35

print("straighten smoke ok", round(time.time() - t0, 1), "s")
