"""Which cubic term of the singularity produces the log-eps phase drift?

Fixes one harmonic source (x z^2 in the z-equation) and adds one candidate
cubic at a time, then tracks arg(d1) across epsilon.  A genuine drift is
affine in log eps; channel competition would show as a nonlinear arc.
"""
import sys
import time

import gmpy2

from hopfzero.jets import MultiJet, UnfoldingJet, DEFAULT_CAP
from hopfzero.normalform import reduce_to_normal_form
from hopfzero.precision import working_precision, mpf
from hopfzero.fields import truncated_unfolding
from hopfzero.splitting import (
    collect_s2, default_eps_grid, _affine_fit, _unwrap,
)

_XZ2 = (1, 0, 2, 0, 0)
_YZ2 = (0, 1, 2, 0, 0)
_Z3 = (0, 0, 3, 0, 0)
_X2Z = (2, 0, 1, 0, 0)
_Y2Z = (0, 2, 1, 0, 0)

KAPPA = "0.4"

VARIANTS = {
    "kappa": ({}, {}, {_XZ2: KAPPA}),
    "er":    ({_YZ2: "0.8"}, {_XZ2: "-0.8"}, {_XZ2: KAPPA}),
    "es":    ({_XZ2: "0.6"}, {_YZ2: "-0.6"}, {_XZ2: KAPPA}),
    "c0":    ({}, {}, {_XZ2: KAPPA, _Z3: "0.8"}),
    "r2z":   ({}, {}, {_XZ2: KAPPA, _X2Z: "0.7", _Y2Z: "0.7"}),
}

GRID = default_eps_grid("0.06", "0.2")


def build(ex, ey, ez):
    cap = DEFAULT_CAP
    base = truncated_unfolding(1, 1, cap=cap)
    px = base.px + MultiJet({k: mpf(v) for k, v in ex.items()}, cap)
    py = base.py + MultiJet({k: mpf(v) for k, v in ey.items()}, cap)
    pz = base.pz + MultiJet({k: mpf(v) for k, v in ez.items()}, cap)
    return UnfoldingJet(px=px, py=py, pz=pz, cap=cap)


def main():
    names = sys.argv[1:] or list(VARIANTS)
    for name in names:
        ex, ey, ez = VARIANTS[name]
        with working_precision(48):
            nf = reduce_to_normal_form(build(ex, ey, ez))
        t0 = time.time()
        samples = collect_s2(nf, GRID, sigma=0, theta_grid=48, validate=False)
        phases, eps_used = [], []
        for s in samples:
            if not s.harmonic_significant:
                print(f"  eps={float(s.epsilon):.6f} amp below significance")
                continue
            ph = gmpy2.atan2(mpf(s.first_harmonic.imag),
                             mpf(s.first_harmonic.real))
            phases.append(ph)
            eps_used.append(s.epsilon)
            print(f"  eps={float(s.epsilon):.6f} "
                  f"amp={float(s.harmonic_amplitude):.6e} "
                  f"arg={float(ph):+.8f}")
        if len(phases) >= 3:
            ls = [gmpy2.log(e) for e in eps_used]
            un = _unwrap(phases)
            a0, a1, res = _affine_fit(ls, un)
            drift = abs(a1) * abs(ls[0] - ls[-1])
            ratio = float(res / drift) if drift > 0 else float("nan")
            print(f"== {name}: slope={float(a1):+.6f} res={float(res):.2e} "
                  f"drift={float(drift):.4f} res/drift={ratio:.4f} "
                  f"({time.time()-t0:.0f}s)", flush=True)
        else:
            print(f"== {name}: not enough significant samples", flush=True)


if __name__ == "__main__":
    main()
