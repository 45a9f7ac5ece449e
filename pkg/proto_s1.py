import time

from hopfzero.fields import bundled_field
from hopfzero.normalform import compute_c0, reduce_to_normal_form
from hopfzero.precision import mpf, to_decimal, working_precision
from hopfzero.splitting import collect_s1, default_eps_grid, fit_s1

t0 = time.time()
with working_precision(48):
    nf = reduce_to_normal_form(bundled_field("standard"))
    c0 = compute_c0(nf)
    print("reduced c0 =", to_decimal(c0, 20))

grid = default_eps_grid("0.05", "0.2")
print("grid:", [to_decimal(e, 6) for e in grid])
samples = collect_s1(nf, grid, progress=lambda s: print(
    "  eps", to_decimal(s.epsilon, 6), "S1", to_decimal(s.value, 12),
    "budget", to_decimal(s.error_budget, 3), "digits", s.digits, flush=True))
rep = fit_s1(samples, a=nf.a, c0=c0)
print("fit: rate", to_decimal(rep.rate, 12), "rel", to_decimal(rep.rate_rel_error, 6))
print("     power", to_decimal(rep.power, 8))
print("     C*", to_decimal(rep.stokes, 12), "corr", to_decimal(rep.corr, 8),
      "res", to_decimal(rep.residual_max, 6))

# window-stability: refit on the upper half of the window
upper = [s for s in samples if s.epsilon >= mpf("0.1") * (1 - mpf("1e-12"))]
rep_u = fit_s1(upper, a=nf.a, c0=c0)
rel = abs(rep_u.stokes - rep.stokes) / abs(rep.stokes)
print("upper-half C*", to_decimal(rep_u.stokes, 12), "rel diff", to_decimal(rel, 6))
print("total", round(time.time() - t0, 1), "s")
