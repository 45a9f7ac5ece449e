"""Scratch: per-channel power AND phase of the two-dim first harmonic.

Single-channel variants, sigma = 0, full working grid:
  z3f   px += 0.4 z^3            breaks axis too (1D power ~ a-3: unusable)
  xz2h  pz += 0.4 xz^2           harmonic-1 forcing of z', axis untouched
  z2mu  px += 0.5 z^2 mu         parameter-carrying axis breaker
Per channel: free-rate fit of amp, affine fit of phase vs log eps.
Also: measure_s1 on xz2h at eps=0.1 (expect exactly zero, axis invariant).
"""

import time

import gmpy2

from hopfzero.fields import truncated_unfolding, _jet, _XZ2, _Z3, _Z2MU
from hopfzero.jets import UnfoldingJet, DEFAULT_CAP
from hopfzero.normalform import reduce_to_normal_form, blow_up
from hopfzero.splitting import (
    collect_s2, measure_s1, _free_rate_fit, _affine_fit, default_eps_grid,
)
from hopfzero.precision import mpf, working_precision, digits_for_one_dim


def variant(name, cap=DEFAULT_CAP):
    base = truncated_unfolding(1, 1, cap=cap)
    px, py, pz = base.px, base.py, base.pz
    if name == "z3f":
        px = px + _jet({_Z3: "0.4"}, cap)
    elif name == "xz2h":
        pz = pz + _jet({_XZ2: "0.4"}, cap)
    elif name == "z2mu":
        px = px + _jet({_Z2MU: "0.5"}, cap)
    else:
        raise ValueError(name)
    return UnfoldingJet(px=px, py=py, pz=pz, cap=cap)


GRID = default_eps_grid("0.059", "0.2")

nf_h = None
for name in ("xz2h", "z3f", "z2mu"):
    field = variant(name)
    nf = reduce_to_normal_form(field)
    if name == "xz2h":
        nf_h = nf
    print(f"== {name} ==", flush=True)
    t0 = time.time()
    samples = collect_s2(
        nf, GRID, sigma=0, theta_grid=48, validate=False,
        progress=lambda s: print(
            f"  eps={float(s.epsilon):.6f} amp={float(s.harmonic_amplitude):.6e}"
            f" arg={float(gmpy2.atan2(s.first_harmonic.imag, s.first_harmonic.real)):+.6f}"
            f" mean={float(s.mean):.4e} err={float(s.est_error):.2e}", flush=True),
    )
    with working_precision(40):
        eps_list = [s.epsilon for s in samples]
        logs = [gmpy2.log(s.harmonic_amplitude) for s in samples]
        const, power, rate, corr = _free_rate_fit(eps_list, logs)
        print(f"  rate={float(rate):.8f}  power={float(power):.6f}"
              f"  const={float(const):.4f}  corr={float(corr):.4f}", flush=True)
        # unwrapped phase, affine in log eps
        phases = []
        prev = None
        for s in samples:
            ph = gmpy2.atan2(s.first_harmonic.imag, s.first_harmonic.real)
            if prev is not None:
                two_pi = 2 * gmpy2.const_pi()
                while ph - prev > gmpy2.const_pi():
                    ph -= two_pi
                while prev - ph > gmpy2.const_pi():
                    ph += two_pi
            phases.append(ph)
            prev = ph
        ls = [gmpy2.log(e) for e in eps_list]
        icpt, slope, res = _affine_fit(ls, phases)
        drift = abs(slope) * (ls[-1] - ls[0])
        print(f"  phase slope={float(slope):+.6f} res={float(res):.6f}"
              f" drift={float(abs(drift)):.6f}"
              f" res/drift={float(res/abs(drift)) if drift else float('nan'):.4f}"
              f"  ({time.time()-t0:.0f}s)", flush=True)

# axis invariance of the h-channel: 1D gap must vanish identically
eps = mpf("0.1")
with working_precision(digits_for_one_dim(eps)):
    sys = blow_up(nf_h, eps, 0)
    s1 = measure_s1(sys)
    print(f"xz2h S1 at eps=0.1: {float(s1.value):.3e}"
          f" budget {float(s1.error_budget):.1e}", flush=True)
