"""Batch front end: ``diagorbit --config experiment.json --out results/``.

Exit status: 0 when every executed check passed, 1 when a theorem-backed
check failed, 2 on a configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys as _sys
import time
from pathlib import Path

from . import __version__
from .coboundary import (
    Status,
    circle_partial_solver,
    constant_per_orbit,
    komlos_construct,
    reverse_direction,
    solve_orbit,
    verify_certificate,
)
from .config import STAGES, ConfigError, ExperimentConfig, load_config, parse_p
from .export import jsonable, write_certificate, write_sums, write_support
from .measures import build_nu_support, check_nonsingularity
from .sums import ergodic_sums, shifted_sum_condition, sup_norm_diagnostic, tabulate

log = logging.getLogger("diagorbit")

PASSED, FAILED, SKIPPED = "passed", "failed", "skipped"


class Pipeline:
    """Runs the configured stages in dependency order and collects results."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.sys = cfg.system
        self.obs = cfg.observable
        self.p = cfg.params
        self.out = cfg.out_dir
        self.support = None
        self.certificate = None
        self.results = []

    def run(self) -> dict:
        self.out.mkdir(parents=True, exist_ok=True)
        if self.sys.is_finite:
            self.support = build_nu_support(self.sys)
        for name in self.cfg.stages:
            started = time.perf_counter()
            status, reason, result = getattr(self, f"stage_{name}")()
            self.results.append(
                {
                    "stage": name,
                    "status": status,
                    "reason": reason,
                    "result": jsonable(result),
                    "seconds": round(time.perf_counter() - started, 6),
                }
            )
            log.info("stage %s: %s %s", name, status, reason or "")
        failed = [r["stage"] for r in self.results if r["status"] == FAILED]
        report = {
            "tool": "diagorbit",
            "version": __version__,
            "verdict": "failed" if failed else "passed",
            "failed_stages": failed,
            "observable_is_tensor": self.cfg.tensor,
            "stages": self.results,
            "config": self.cfg.raw,
            "parameters": jsonable(vars(self.p)),
        }
        (self.out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return report

    def _finite_only(self):
        return SKIPPED, "needs a finite system; the support of nu on the circle is only sampled", None

    def stage_support(self):
        if not self.sys.is_finite:
            return self._finite_only()
        total = self.support.total()
        write_support(self.out / "support.csv", self.support)
        ok = total == 1 if self.support.exact else abs(total - 1) <= 1e-12
        result = {"atoms": len(self.support), "periods": list(self.support.periods), "total_mass": total}
        return (PASSED, None, result) if ok else (FAILED, "nu mass differs from 1", result)

    def stage_nonsingularity(self):
        if not self.sys.is_finite:
            return self._finite_only()
        rep = check_nonsingularity(self.sys, self.p.trials, self.p.seed, support=self.support)
        result = {
            "subsets": rep.trials,
            "min_ratio": rep.min_ratio,
            "max_ratio": rep.max_ratio,
            "violations": rep.violations[:5],
            "shift_mismatches": rep.shift_mismatches[:5],
        }
        return (PASSED, None, result) if rep.ok else (FAILED, "nonsingularity bound violated", result)

    def _start(self):
        if self.p.start is not None:
            return self.p.start
        if self.sys.is_finite:
            return self.support.points[self.support.diagonal[0]]
        return self.sys.diagonal(0.0)

    def stage_sums(self):
        z = self._start()
        series = ergodic_sums(self.sys, self.obs, z, self.p.N_max)
        diag = sup_norm_diagnostic(
            self.sys, self.obs, self.p.N_max, self.p.p, support=self.support, seed=self.p.seed, count=self.p.samples
        )
        write_sums(self.out / "sums.csv", series, diag.norms)
        result = {
            "start": z,
            "sup_pointwise": series.sup,
            "p": diag.p,
            "sup_norm": diag.sup,
            "slope": diag.slope,
            "bounded_looking": diag.bounded_looking,
            "decided_bounded": diag.decided_bounded,
        }
        return PASSED, None, result

    def stage_shifted_sums(self):
        if not self.sys.is_finite:
            return self._finite_only()
        rep = shifted_sum_condition(self.sys, self.obs, self.p.N_max, self.p.M_max, self.p.p, support=self.support)
        result = {
            "pair_sup": rep.pair_sup,
            "single_sup": rep.single_sup,
            "single_sup_forward": rep.single_sup_forward,
            "pair_argmax": rep.pair_argmax,
            "consistent": rep.consistent,
        }
        return (PASSED, None, result) if rep.consistent else (FAILED, "pair sup exceeds twice the single sup", result)

    def stage_solve(self):
        if not self.sys.is_finite:
            win = circle_partial_solver(self.sys, self.obs, self._start(), self.p.horizon)
            write_certificate(self.out / "certificate.csv", win.points.tolist(), win.V.tolist(), self.sys.H, win.shifts)
            result = {
                "status": win.status,
                "window_sup": win.window_sup,
                "growth_slope": win.growth_slope,
                "horizon": self.p.horizon,
            }
            return PASSED, None, result
        constants = [self.p.orbit_constant] * len(self.support.cycles)
        cert = solve_orbit(self.sys, self.obs, support=self.support, constants=constants, tol=self.p.tolerance)
        self.certificate = cert
        result = {
            "status": cert.status,
            "residual_sup": cert.residual_sup,
            "v_sup": cert.v_sup,
            "v_l1": cert.v_l1,
            "per_orbit_constants": cert.per_orbit_constants,
            "witness": cert.witness,
        }
        if cert.V is not None:
            write_certificate(self.out / "certificate.csv", self.support.points, cert.V.tolist(), self.sys.H)
        return PASSED, None, result

    def stage_komlos(self):
        if not self.sys.is_finite:
            return self._finite_only()
        cert, trace = komlos_construct(
            self.sys, self.obs, self.p.K, self.p.subsequence, support=self.support, tol=self.p.tolerance
        )
        result = {
            "status": cert.status,
            "subsequence": trace.subsequence,
            "residual_sup": cert.residual_sup,
            "v_sup": cert.v_sup,
            "increments": trace.increments,
            "note": cert.note,
        }
        orbit = self.certificate
        if cert.V is not None and orbit is not None and orbit.V is not None:
            agrees = constant_per_orbit(self.support, cert.V - orbit.V, self.p.tolerance or 0)
            result["agrees_with_orbit_solver"] = agrees
            if not agrees:
                return FAILED, "averaged V differs from the orbit solution by a non-constant", result
        return PASSED, None, result

    def stage_verify(self):
        cert = self.certificate
        if cert is None:
            return SKIPPED, "no orbit certificate (the solve stage did not run on a finite system)", None
        if cert.status != Status.COBOUNDARY:
            return SKIPPED, f"certificate status is {cert.status.value}", None
        rep = verify_certificate(self.sys, self.obs, cert, self.p.N_max, tol=self.p.tolerance)
        result = {
            "residual_ok": rep.residual_ok,
            "telescoping_ok": rep.telescoping_ok,
            "bound_ok": rep.bound_ok,
            "diagonal_ok": rep.diagonal_ok,
            "N_max": rep.N_max,
            "max_sum_norm": rep.max_sum_norm,
            "v_sup": rep.v_sup,
            "failures": rep.failures[:5],
        }
        return (PASSED, None, result) if rep.ok else (FAILED, "certificate verification failed", result)

    def stage_reverse(self):
        if not self.sys.is_finite:
            return self._finite_only()
        V = self.cfg.planted_V
        if V is None and self.certificate is not None:
            V = self.certificate.V
        if V is None:
            return SKIPPED, "no bounded V available (plant one or solve first)", None
        rep = reverse_direction(self.sys, V, self.p.N_max, support=self.support, tol=self.p.tolerance)
        result = {"sup_sum_norm": rep.sup_sum_norm, "v_sup": rep.v_sup, "N_max": rep.N_max}
        return (PASSED, None, result) if rep.ok else (FAILED, "sum norm exceeds twice the sup of V", result)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diagorbit", description="Coboundary laboratory for diagonal-orbit systems.")
    parser.add_argument("--config", required=True, help="experiment JSON file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--n-max", dest="N_max", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--p", help="1, 2, ... or inf")
    parser.add_argument("--tolerance", type=float)
    parser.add_argument("--stages", help=f"comma list from {','.join(STAGES)}")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(config_path, overrides: dict | None = None) -> tuple[int, dict | None]:
    try:
        cfg = load_config(config_path, overrides)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2, None
    report = Pipeline(cfg).run()
    return (1 if report["verdict"] == "failed" else 0), report


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {
        "out": args.out,
        "seed": args.seed,
        "N_max": args.N_max,
        "horizon": args.horizon,
        "tolerance": args.tolerance,
    }
    if args.p is not None:
        try:
            overrides["p"] = parse_p(args.p)
        except ConfigError as exc:
            log.error("%s", exc)
            return 2
    if args.stages:
        overrides["stages"] = [s.strip() for s in args.stages.split(",") if s.strip()]
    code, _ = run(args.config, overrides)
    return code


if __name__ == "__main__":
    _sys.exit(main())
