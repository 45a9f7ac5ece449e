"""Command-line pipeline.

Each subcommand runs one stage of the chain

    check -> normalform -> (gamma) -> manifolds / splitting -> fits
          -> homoclinic -> verify

plus the side stages (equilibria, diagnostics) and the plot-data emitter.
Stages read a JSON run configuration, pull prerequisite artifacts from an
on-disk cache keyed by the content hash of the config fields they depend
on, and write JSON reports (numbers as decimal strings) plus CSV tables.
Two runs with the same config produce byte-identical artifacts; thread
count never changes values, only wall time.

Exit codes: 0 success, 2 condition-gate failure, 3 numerical failure,
4 parse or I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import gmpy2

from . import __version__
from .errors import ConditionFailure, HopfZeroError, JetParseError, NumericalFailure
from .fields import BUNDLED_FIELDS, bundled_field
from .jets import (
    check_generic_unfolding,
    check_linear_part,
    check_open_conditions,
    load_jet_file,
)
from .manifolds import find_equilibria, manifold_1d, manifold_2d_section
from .normalform import blow_up, compute_c0, reduce_to_normal_form
from .precision import (
    clamp_digits,
    digits_for_one_dim,
    digits_for_transit,
    digits_for_two_dim,
    mpf,
    to_decimal,
    working_precision,
)
from .shilnikov import (
    geometry_diagnostics,
    homoclinic_bisect,
    verify_hypotheses,
)
from .splitting import (
    S1Sample,
    S2Sample,
    collect_s1,
    collect_s2,
    default_eps_grid,
    fit_s1,
    fit_s2,
    gamma_curve,
)

ENV_PRECISION = "HOPFZERO_PRECISION"

EXIT_OK = 0
EXIT_CONDITION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

REPORT_DIGITS = 24


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    """Resolved run configuration shared by every stage.

    `jet` is either a path to a jet file or "bundled:<name>".  `eps_grid`
    holds decimal strings, largest first not required.  `sigma_rule` is one
    of {"kind": "fixed", "value": v}, {"kind": "gamma0"} or
    {"kind": "gamma_rho", "rho": [c1, c2, c3]} (c2 null means -2 - 2/a).
    `precision` of None defers to the per-stage digit rules; an explicit
    value is a floor, raised with a warning when a stage needs more.
    """

    jet: str = "bundled:standard"
    mode: str | None = None
    precision: int | None = None
    eps_grid: list = field(default_factory=lambda: ["0.2", "0.1"])
    sigma_rule: dict = field(default_factory=lambda: {"kind": "fixed", "value": "0"})
    theta_grid: int = 48
    tolerances: dict = field(default_factory=dict)
    out_dir: str = "runs"
    threads: int = 1
    epsilon: str | None = None        # single-point stages; default max(grid)
    nu1: str = "0.1"                  # diagnostics ellipsoid level
    diag_grid: int = 64               # diagnostics flux grid (per side)
    rng_seed: int = 7
    homoclinic_rho: list = field(default_factory=lambda: ["0.5", None, "1"])

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def point_epsilon(self) -> str:
        if self.epsilon is not None:
            return self.epsilon
        return max(self.eps_grid, key=lambda e: mpf(e))

    def validate(self) -> list:
        warnings = []
        if not self.eps_grid:
            raise JetParseError("eps_grid must contain at least one epsilon")
        for e in self.eps_grid:
            if mpf(e) <= 0:
                raise JetParseError(f"eps_grid entries must be positive, got {e}")
        kind = self.sigma_rule.get("kind")
        if kind not in ("fixed", "gamma0", "gamma_rho"):
            raise JetParseError(f"unknown sigma rule kind {kind!r}")
        if kind == "gamma_rho" and len(self.sigma_rule.get("rho", ())) != 3:
            raise JetParseError("sigma rule gamma_rho needs rho = [c1, c2, c3]")
        if self.theta_grid < 12:
            raise JetParseError("theta_grid must be at least 12")
        for name, value in self.tolerances.items():
            if value is not None and mpf(value) <= 0:
                raise JetParseError(f"tolerance {name} must be positive")
        if self.threads < 1:
            raise JetParseError("threads must be >= 1")
        if self.precision is not None:
            eps_min = min(mpf(e) for e in self.eps_grid)
            need = digits_for_one_dim(eps_min)
            if self.precision < need:
                warnings.append(
                    f"precision {self.precision} is below the rule-of-thumb "
                    f"{need} digits for epsilon = {to_decimal(eps_min, 6)}; "
                    "stages will raise their own working precision"
                )
        return warnings


def _resolve_grid(spec) -> list:
    if spec is None:
        return [to_decimal(e, 12) for e in default_eps_grid()]
    if isinstance(spec, dict):
        return [to_decimal(e, 12) for e in default_eps_grid(spec.get("lo"), spec.get("hi"))]
    if isinstance(spec, str):
        if ":" in spec:
            lo, hi = spec.split(":", 1)
            return [to_decimal(e, 12) for e in default_eps_grid(lo, hi)]
        return [s.strip() for s in spec.split(",") if s.strip()]
    return [str(e) for e in spec]


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            raw = Path(path).read_text()
        except OSError as exc:
            raise JetParseError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise JetParseError(
                f"config {path} is not valid JSON: {exc.msg}",
                line=exc.lineno, column=exc.colno,
            ) from exc
        if not isinstance(data, dict):
            raise JetParseError(f"config {path} must hold a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known - {"eps_grid"})
    if unknown:
        raise JetParseError(f"unknown config keys: {', '.join(unknown)}")
    if "eps_grid" in data:
        data["eps_grid"] = _resolve_grid(data["eps_grid"])
    env_prec = os.environ.get(ENV_PRECISION)
    if env_prec is not None and "precision" not in data:
        try:
            data["precision"] = int(env_prec)
        except ValueError:
            raise JetParseError(f"{ENV_PRECISION} must be an integer, got {env_prec!r}")
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    cfg = RunConfig(**data)
    return cfg


# ---------------------------------------------------------------------------
# artifact store


class ArtifactStore:
    """Stage outputs on disk, keyed by config-subset content hashes."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.root = Path(cfg.out_dir)
        self.cache = self.root / "cache"

    def key(self, stage: str, subset: dict) -> str:
        payload = json.dumps(
            {"stage": stage, "version": __version__, "config": subset},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def load(self, stage: str, key: str) -> dict | None:
        path = self.cache / f"{stage}-{key}.json"
        if path.exists():
            return json.loads(path.read_text())
        return None

    def save(self, stage: str, key: str, report: dict) -> Path:
        self.cache.mkdir(parents=True, exist_ok=True)
        path = self.cache / f"{stage}-{key}.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return path

    def publish(self, stage: str, report: dict) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / f"{stage}.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return path

    def write_csv(self, name: str, header: list, rows: list) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / name
        lines = [",".join(header)]
        lines += [",".join(str(c) for c in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
        return path


def _report(stage: str, cfg: RunConfig, body: dict) -> dict:
    return {
        "stage": stage,
        "version": __version__,
        "config": cfg.as_dict(),
        **body,
    }


# ---------------------------------------------------------------------------
# shared stage plumbing


def _load_unfolding(cfg: RunConfig):
    spec = cfg.jet
    if spec.startswith("bundled:"):
        name = spec.split(":", 1)[1]
        if name not in BUNDLED_FIELDS:
            raise JetParseError(
                f"unknown bundled field {name!r}; choices: {sorted(BUNDLED_FIELDS)}"
            )
        return bundled_field(name)
    jf = load_jet_file(spec)
    uj = jf.to_unfolding()
    if cfg.mode is not None and cfg.mode != uj.mode:
        uj = dataclasses.replace(uj, mode=cfg.mode)
    return uj


def _stage_digits(cfg: RunConfig, need: int) -> int:
    if cfg.precision is None:
        return clamp_digits(need)
    return clamp_digits(max(cfg.precision, need))


def _sigma_subset(cfg: RunConfig) -> dict:
    return {"jet": cfg.jet, "mode": cfg.mode, "sigma_rule": cfg.sigma_rule,
            "eps_grid": cfg.eps_grid, "theta_grid": cfg.theta_grid,
            "precision": cfg.precision}


def _get_nf(cfg: RunConfig):
    digits = _stage_digits(cfg, 48)
    with working_precision(digits):
        uj = _load_unfolding(cfg)
        gate = check_open_conditions(uj)
        if not (gate.hz_star and gate.a_less_2):
            raise ConditionFailure(
                "open-condition gate failed: "
                f"bracket witnesses ({to_decimal(gate.bracket_zz_rr)}, "
                f"{to_decimal(gate.bracket_zz_xz)}), shear ratio "
                f"{to_decimal(gate.ratio_shear)}"
            )
        return reduce_to_normal_form(uj, mode=cfg.mode)


def _gamma_for(cfg: RunConfig, store: ArtifactStore, nf, rho=None):
    """Gamma curve artifact (solve or reuse)."""
    subset = _sigma_subset(cfg) | {"rho": None if rho is None else [str(c) for c in rho]}
    key = store.key("gamma", subset)
    cached = store.load("gamma", key)
    if cached is not None:
        nodes = cached["curve"]["nodes"]
        from .splitting import GammaCurve, GammaNode
        curve = GammaCurve(
            rho=None if cached["curve"]["rho"] is None else tuple(mpf(c) for c in cached["curve"]["rho"]),
            nodes=tuple(
                GammaNode(
                    epsilon=mpf(n["epsilon"]), sigma=mpf(n["sigma"]),
                    target=mpf(n["target"]), proxy_residual=mpf(n["proxy_residual"]),
                    tolerance=mpf(n["tolerance"]), slope=mpf(n["slope"]),
                    evaluations=n["evaluations"],
                ) for n in nodes
            ),
            I=mpf(cached["curve"]["I"]), J=mpf(cached["curve"]["J"]),
            intercept=mpf(cached["curve"]["intercept"]),
            fit_residual=mpf(cached["curve"]["fit_residual"]),
        )
        return curve, cached
    curve = gamma_curve(
        nf, cfg.eps_grid, rho=rho, theta_grid=cfg.theta_grid,
        threads=cfg.threads, validate=False,
    )
    report = _report("gamma", cfg, {
        "rho": None if rho is None else [str(c) for c in rho],
        "curve": curve.as_dict(REPORT_DIGITS),
    })
    store.save("gamma", key, report)
    return curve, report


def _sigma_rule_object(cfg: RunConfig, store: ArtifactStore, nf):
    """Translate the config sigma rule into what collectors accept."""
    rule = cfg.sigma_rule
    if rule["kind"] == "fixed":
        return mpf(rule.get("value", "0")), None
    rho = None
    if rule["kind"] == "gamma_rho":
        c1, c2, c3 = rule["rho"]
        if c2 is None:
            c2 = to_decimal(-2 - 2 / nf.a, REPORT_DIGITS)
        rho = (mpf(c1), mpf(c2), mpf(c3))
    curve, gamma_report = _gamma_for(cfg, store, nf, rho=rho)
    return curve, gamma_report


def _rebuild_s1(entries: list) -> list:
    out = []
    for e in entries:
        out.append(S1Sample(
            epsilon=mpf(e["epsilon"]), sigma=mpf(e["sigma"]),
            value=mpf(e["value"]), error_budget=mpf(e["error_budget"]),
            point_u=tuple(mpf(c) for c in e["point_u"]),
            point_s=tuple(mpf(c) for c in e["point_s"]),
            digits=e["digits"],
        ))
    return out


def _rebuild_s2(entries: list) -> list:
    out = []
    for e in entries:
        c1 = gmpy2.mpc(mpf(e["first_harmonic"][0]), mpf(e["first_harmonic"][1]))
        out.append(S2Sample(
            epsilon=mpf(e["epsilon"]), sigma=mpf(e["sigma"]),
            coeffs=(gmpy2.mpc(mpf(e["mean"])), c1),
            est_error=mpf(e["est_error"]), digits=e["digits"],
        ))
    return out


# ---------------------------------------------------------------------------
# stages


def stage_check(cfg: RunConfig, store: ArtifactStore) -> dict:
    uj = _load_unfolding(cfg)
    alpha = check_linear_part(uj)
    gate = check_open_conditions(uj)
    # Genericity concerns the parameter directions; a bare singularity jet
    # (no mu/nu terms anywhere) has nothing to check there.
    has_params = any(
        idx[3] + idx[4] > 0
        for comp in uj.components()
        for idx in comp.terms
    )
    generic = check_generic_unfolding(uj, mode=cfg.mode) if has_params else None
    report = _report("check", cfg, {
        "alpha_star": to_decimal(alpha, REPORT_DIGITS),
        "conditions": gate.as_dict(),
        "generic": None if generic is None else generic.as_dict(),
    })
    store.publish("check", report)
    generic_ok = generic.ok if generic is not None else True
    if not (gate.hz_star and gate.a_less_2 and generic_ok):
        raise ConditionFailure(
            "condition gate failed; see check.json for the witnesses"
        )
    return report


def stage_normalform(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    report = _report("normalform", cfg, {"normalform": nf.summary()})
    store.publish("normalform", report)
    return report


def stage_equilibria(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    eps = mpf(cfg.point_epsilon())
    sigma, _ = _point_sigma(cfg, store, nf, eps)
    digits = _stage_digits(cfg, digits_for_one_dim(eps))
    with working_precision(digits):
        sys = blow_up(nf, eps, sigma)
        north, south = find_equilibria(sys)
    report = _report("equilibria", cfg, {
        "epsilon": to_decimal(eps, REPORT_DIGITS),
        "sigma": to_decimal(sigma, REPORT_DIGITS),
        "north": north.as_dict(REPORT_DIGITS),
        "south": south.as_dict(REPORT_DIGITS),
    })
    store.publish("equilibria", report)
    return report


def _point_sigma(cfg: RunConfig, store: ArtifactStore, nf, eps):
    rule, gamma_report = _sigma_rule_object(cfg, store, nf)
    if callable(getattr(rule, "sigma_at", None)):
        return rule.sigma_at(eps), gamma_report
    return mpf(rule), gamma_report


def stage_manifold1d(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    eps = mpf(cfg.point_epsilon())
    sigma, _ = _point_sigma(cfg, store, nf, eps)
    digits = _stage_digits(cfg, digits_for_one_dim(eps))
    with working_precision(digits):
        sys = blow_up(nf, eps, sigma)
        north, south = find_equilibria(sys)
        cross_u = manifold_1d(sys, north)
        cross_s = manifold_1d(sys, south)
    report = _report("manifold1d", cfg, {
        "epsilon": to_decimal(eps, REPORT_DIGITS),
        "sigma": to_decimal(sigma, REPORT_DIGITS),
        "unstable_from_north": cross_u.as_dict(REPORT_DIGITS),
        "stable_from_south": cross_s.as_dict(REPORT_DIGITS),
    })
    store.publish("manifold1d", report)
    return report


def stage_manifold2d(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    eps = mpf(cfg.point_epsilon())
    sigma, _ = _point_sigma(cfg, store, nf, eps)
    digits = _stage_digits(cfg, digits_for_two_dim(eps, nf.a))
    with working_precision(digits):
        sys = blow_up(nf, eps, sigma)
        north, south = find_equilibria(sys)
        cu = manifold_2d_section(sys, south, cfg.theta_grid, threads=cfg.threads)
        cs = manifold_2d_section(sys, north, cfg.theta_grid, threads=cfg.threads)
    report = _report("manifold2d", cfg, {
        "epsilon": to_decimal(eps, REPORT_DIGITS),
        "sigma": to_decimal(sigma, REPORT_DIGITS),
        "curve_u": cu.as_dict(REPORT_DIGITS),
        "curve_s": cs.as_dict(REPORT_DIGITS),
    })
    store.publish("manifold2d", report)
    rows = []
    n = 256
    with working_precision(digits):
        two_pi = 2 * gmpy2.const_pi()
        for curve, label in ((cu, "Cu"), (cs, "Cs")):
            for k in range(n + 1):
                th = two_pi * k / n
                rows.append((to_decimal(th, 17), to_decimal(curve.r_at(th), 17), label))
    store.write_csv("section_curves.csv", ["theta", "r", "curve"], rows)
    return report


def stage_split1d(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    rule, _ = _sigma_rule_object(cfg, store, nf)
    subset = _sigma_subset(cfg)
    key = store.key("split1d", subset)
    cached = store.load("split1d", key)
    if cached is None:
        samples = collect_s1(nf, cfg.eps_grid, sigma=rule, threads=cfg.threads)
        cached = _report("split1d", cfg, {
            "samples": [s.as_dict(REPORT_DIGITS) for s in samples],
        })
        store.save("split1d", key, cached)
    store.publish("split1d", cached)
    rows = [
        (e["epsilon"], e["sigma"], e["value"], e["error_budget"], e["significant"])
        for e in cached["samples"]
    ]
    store.write_csv(
        "split1d_samples.csv",
        ["epsilon", "sigma", "value", "error_budget", "significant"], rows,
    )
    return cached


def stage_split2d(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    rule, _ = _sigma_rule_object(cfg, store, nf)
    subset = _sigma_subset(cfg)
    key = store.key("split2d", subset)
    cached = store.load("split2d", key)
    if cached is None:
        samples = collect_s2(
            nf, cfg.eps_grid, sigma=rule, theta_grid=cfg.theta_grid,
            threads=cfg.threads,
        )
        cached = _report("split2d", cfg, {
            "samples": [s.as_dict(REPORT_DIGITS) for s in samples],
        })
        store.save("split2d", key, cached)
    store.publish("split2d", cached)
    rows = [
        (e["epsilon"], e["sigma"], e["mean"], e["harmonic_amplitude"],
         e["est_error"], e["harmonic_significant"])
        for e in cached["samples"]
    ]
    store.write_csv(
        "split2d_samples.csv",
        ["epsilon", "sigma", "mean", "harmonic_amplitude", "est_error",
         "significant"], rows,
    )
    return cached


def stage_fit(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    s1_report = stage_split1d(cfg, store)
    s2_report = stage_split2d(cfg, store)
    digits = _stage_digits(cfg, 48)
    with working_precision(digits):
        c0 = compute_c0(nf)
        s1 = fit_s1(_rebuild_s1(s1_report["samples"]), a=nf.a, c0=c0)
        s2 = fit_s2(_rebuild_s2(s2_report["samples"]), a=nf.a)
    report = _report("fit", cfg, {
        "one_dim": s1.as_dict(REPORT_DIGITS),
        "two_dim": s2.as_dict(REPORT_DIGITS),
    })
    store.publish("fit", report)
    return report


def stage_gamma(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    rho = None
    if cfg.sigma_rule.get("kind") == "gamma_rho":
        c1, c2, c3 = cfg.sigma_rule["rho"]
        if c2 is None:
            c2 = to_decimal(-2 - 2 / nf.a, REPORT_DIGITS)
        rho = (mpf(c1), mpf(c2), mpf(c3))
    curve, report = _gamma_for(cfg, store, nf, rho=rho)
    store.publish("gamma", report)
    curve_id = "gamma0" if rho is None else "gamma_rho"
    rows = [
        (n["epsilon"], n["sigma"], curve_id)
        for n in report["curve"]["nodes"]
    ]
    store.write_csv("gamma_nodes.csv", ["epsilon", "sigma", "curve_id"], rows)
    return report


def stage_homoclinic(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    c1, c2, c3 = cfg.homoclinic_rho
    if c2 is None:
        c2 = to_decimal(-2 - 2 / nf.a, REPORT_DIGITS)
    rho_plus = (mpf(c1), mpf(c2), mpf(c3))
    rho_minus = (-mpf(c1), mpf(c2), mpf(c3))
    lower, _ = _gamma_for(cfg, store, nf, rho=rho_minus)
    upper, _ = _gamma_for(cfg, store, nf, rho=rho_plus)
    tol = cfg.tolerances.get("offset")
    results = []
    for eps in sorted(cfg.eps_grid, key=lambda e: mpf(e), reverse=True):
        e = mpf(eps)
        lo, hi = lower.sigma_at(e), upper.sigma_at(e)
        if lo > hi:
            lo, hi = hi, lo
        res = homoclinic_bisect(
            nf, e, lo, hi, tol=tol, theta_grid=cfg.theta_grid,
        )
        results.append(res.as_dict(REPORT_DIGITS))
    report = _report("homoclinic", cfg, {"results": results})
    store.publish("homoclinic", report)
    rows = [
        (r["epsilon"], r["sigma_s"], r["offset"], r["tolerance"], r["verdict"])
        for r in results
    ]
    store.write_csv(
        "homoclinic.csv",
        ["epsilon", "sigma_s", "offset", "tolerance", "verdict"], rows,
    )
    return report


def stage_verify(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    rule, _ = _sigma_rule_object(cfg, store, nf)
    report_obj = verify_hypotheses(
        nf, rule, cfg.eps_grid, theta_grid=cfg.theta_grid,
    )
    report = _report("verify-shilnikov", cfg, {
        "hypotheses": report_obj.as_dict(REPORT_DIGITS),
    })
    store.publish("verify-shilnikov", report)
    return report


def stage_diagnostics(cfg: RunConfig, store: ArtifactStore) -> dict:
    nf = _get_nf(cfg)
    eps = mpf(cfg.point_epsilon())
    sigma, _ = _point_sigma(cfg, store, nf, eps)
    digits = _stage_digits(cfg, digits_for_one_dim(eps))
    with working_precision(digits):
        sys = blow_up(nf, eps, sigma)
        diag = geometry_diagnostics(
            sys, nu1=cfg.nu1, grid=(cfg.diag_grid, cfg.diag_grid),
            rng_seed=cfg.rng_seed, raise_on_violation=False,
        )
    report = _report("diagnostics", cfg, {"diagnostics": diag.as_dict(REPORT_DIGITS)})
    store.publish("diagnostics", report)
    if not diag.ok:
        raise ConditionFailure(
            "geometry diagnostics found an outward-flux violation; "
            "see diagnostics.json"
        )
    return report


# ---------------------------------------------------------------------------
# plot data emission


def _emit_split_plot(store: ArtifactStore, stage: str, out_name: str, value_key: str):
    path = store.root / f"{stage}.json"
    if not path.exists():
        return None
    data = json.loads(path.read_text())
    rows = []
    with working_precision(40):
        for e in data["samples"]:
            v = mpf(e[value_key])
            if v <= 0:
                continue
            inv = 1 / mpf(e["epsilon"])
            rows.append((to_decimal(inv, 17), to_decimal(gmpy2.log(v), 17)))
    return store.write_csv(out_name, ["inv_epsilon", "log_value"], rows)


def emit_plotdata(cfg: RunConfig, store: ArtifactStore) -> dict:
    produced = []
    p = _emit_split_plot(store, "split1d", "plot_split1d.csv", "value")
    if p:
        produced.append(p.name)
    p = _emit_split_plot(store, "split2d", "plot_split2d.csv", "harmonic_amplitude")
    if p:
        produced.append(p.name)

    gamma_path = store.root / "gamma.json"
    if gamma_path.exists():
        data = json.loads(gamma_path.read_text())
        curve_id = "gamma0" if data.get("rho") is None else "gamma_rho"
        rows = [(n["epsilon"], n["sigma"], curve_id) for n in data["curve"]["nodes"]]
        produced.append(store.write_csv(
            "plot_gamma.csv", ["epsilon", "sigma", "curve_id"], rows).name)

    m2_path = store.root / "manifold2d.json"
    if m2_path.exists():
        data = json.loads(m2_path.read_text())
        rows = []
        with working_precision(40):
            two_pi = 2 * gmpy2.const_pi()
            n = 256
            for key, label in (("curve_u", "Cu"), ("curve_s", "Cs")):
                coeffs = data[key]["coefficients"]
                for k in range(n + 1):
                    th = two_pi * k / n
                    acc = mpf(coeffs[0][0])
                    for j in range(1, len(coeffs)):
                        cr, ci = mpf(coeffs[j][0]), mpf(coeffs[j][1])
                        acc += 2 * (cr * gmpy2.cos(j * th) - ci * gmpy2.sin(j * th))
                    rows.append((to_decimal(th, 17), to_decimal(acc, 17), label))
        produced.append(store.write_csv(
            "plot_curves.csv", ["theta", "r", "curve"], rows).name)

    homo_path = store.root / "homoclinic.json"
    if homo_path.exists():
        data = json.loads(homo_path.read_text())
        rows = []
        for r in data["results"]:
            for t, x, y, z in r.get("orbit") or []:
                rows.append((r["epsilon"], t, x, y, z))
        if rows:
            produced.append(store.write_csv(
                "plot_orbit.csv", ["epsilon", "t", "x", "y", "z"], rows).name)

    if not produced:
        raise JetParseError(
            f"no stage reports found under {store.root}; run stages first"
        )
    report = _report("plotdata", cfg, {"files": sorted(produced)})
    store.publish("plotdata", report)
    return report


# ---------------------------------------------------------------------------
# entry point

STAGES = {
    "check": stage_check,
    "normalform": stage_normalform,
    "equilibria": stage_equilibria,
    "manifold1d": stage_manifold1d,
    "manifold2d": stage_manifold2d,
    "split1d": stage_split1d,
    "split2d": stage_split2d,
    "fit": stage_fit,
    "gamma": stage_gamma,
    "homoclinic": stage_homoclinic,
    "verify-shilnikov": stage_verify,
    "diagnostics": stage_diagnostics,
    "plotdata": emit_plotdata,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hopfzero",
        description="Hopf-zero unfolding pipeline: normal form, manifolds, "
                    "splitting laws, homoclinic location.",
    )
    parser.add_argument("--version", action="version", version=f"hopfzero {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--precision", type=int, help="working precision floor (digits)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="global thread budget")
        p.add_argument("--jet", help="jet file path or bundled:<name>")
        p.add_argument("--epsilon", help="epsilon for single-point stages")
        p.add_argument("--grid", help="epsilon grid: comma list or lo:hi")
        p.add_argument("--sigma", help="fixed sigma value (overrides rule)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    stage = args.command
    try:
        overrides = {
            "precision": args.precision,
            "out_dir": args.out,
            "threads": args.threads,
            "jet": args.jet,
            "epsilon": args.epsilon,
        }
        if args.grid is not None:
            overrides["eps_grid"] = _resolve_grid(args.grid)
        if args.sigma is not None:
            overrides["sigma_rule"] = {"kind": "fixed", "value": args.sigma}
        cfg = load_config(args.config, overrides)
        for warning in cfg.validate():
            print(f"warning: {warning}", file=sys.stderr)
        store = ArtifactStore(cfg)
        report = STAGES[stage](cfg, store)
    except JetParseError as exc:
        _fail(stage, exc)
        return EXIT_IO
    except ConditionFailure as exc:
        _fail(stage, exc)
        return EXIT_CONDITION
    except NumericalFailure as exc:
        _fail(stage, exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        _fail(stage, exc)
        return EXIT_IO
    summary = {k: v for k, v in report.items() if k not in ("config",)}
    print(json.dumps({"stage": stage, "ok": True,
                      "keys": sorted(summary)}, sort_keys=True))
    return EXIT_OK


def _fail(stage: str, exc: Exception) -> None:
    payload = {
        "stage": stage,
        "ok": False,
        "error": type(exc).__name__,
        "message": str(exc),
    }
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
