import time

import gmpy2

from hopfzero.fields import bundled_field
from hopfzero.normalform import reduce_to_normal_form
from hopfzero.precision import mpf, to_decimal, working_precision
from hopfzero.splitting import (
    collect_s2,
    default_eps_grid,
    envelope_fit_s2,
    fit_s2,
    gamma_curve,
)

t0 = time.time()
with working_precision(48):
    nf = reduce_to_normal_form(bundled_field("standard"))

grid = default_eps_grid("0.059", "0.2")
print("grid:", [to_decimal(e, 6) for e in grid], flush=True)

curve = gamma_curve(
    nf, grid, theta_grid=48, validate=False,
    progress=lambda n: print(
        "  node eps", to_decimal(n.epsilon, 6), "sigma", to_decimal(n.sigma, 10),
        "resid", to_decimal(n.proxy_residual, 3), "tol", to_decimal(n.tolerance, 3),
        "slope", to_decimal(n.slope, 6), "evals", n.evaluations,
        f"[{round(time.time()-t0)}s]", flush=True))
print("gamma: I", to_decimal(curve.I, 8), "J", to_decimal(curve.J, 8),
      "intercept", to_decimal(curve.intercept, 4),
      "-J/I", to_decimal(-curve.J / curve.I, 8),
      "sigma_err", to_decimal(curve.sigma_error, 3), flush=True)

samples = collect_s2(
    nf, grid, sigma=curve, theta_grid=64, validate=True,
    progress=lambda s: print(
        "  s2 eps", to_decimal(s.epsilon, 6),
        "mean", to_decimal(s.mean, 4),
        "amp", to_decimal(s.harmonic_amplitude, 8),
        "err", to_decimal(s.est_error, 3),
        "sig", s.harmonic_significant,
        f"[{round(time.time()-t0)}s]", flush=True))

rep = fit_s2(samples, a=nf.a)
pi = gmpy2.const_pi()
print("fit2: rate", to_decimal(rep.rate, 10),
      "rel", to_decimal(rep.rate_rel_error, 6))
print("      power", to_decimal(rep.power, 8), "(target -4)")
print("      modulus", to_decimal(rep.stokes, 10),
      "corr", to_decimal(rep.corr, 8),
      "res", to_decimal(rep.residual_max, 4))
print("      c1*", to_decimal(rep.c1star, 8), "c2*", to_decimal(rep.c2star, 8))
print("      L0", to_decimal(rep.phase_drift, 8),
      "phase res", to_decimal(rep.phase_residual, 6))
drift_total = abs(rep.phase_drift / nf.a) * abs(
    gmpy2.log(mpf("0.2")) - gmpy2.log(mpf("0.0595")))
print("      total drift", to_decimal(drift_total, 6),
      "res/drift", to_decimal(rep.phase_residual / drift_total, 6))

# envelope stability across halves
c_full, _, _ = envelope_fit_s2(samples, a=nf.a)
upper = [s for s in samples if s.epsilon >= mpf("0.1")]
c_up, _, _ = envelope_fit_s2(upper, a=nf.a)
print("      modulus full", to_decimal(c_full, 8), "upper", to_decimal(c_up, 8),
      "rel", to_decimal(abs(c_up - c_full) / c_full, 6))
print("total", round(time.time() - t0), "s")
