"""Command line entry point: ``negdef <subcommand> --config FILE``.

Subcommands run growing prefixes of one pipeline::

    growth     balls.csv, growth.csv
    construct  + ell.csv
    verify     + verify.json
    spectral   + spectral.csv (no verify step)
    report     everything

Each run also writes summary.json. Report files are byte-identical for equal
config and seed; wall-clock data goes to meta.json only.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .ball_enum import cached_tables, write_balls_csv
from .config import load_config, validate
from .construct import (
    ConstructionParams,
    build_context,
    combination_contexts,
    combined_ell,
    evaluation_rows,
    properness_threshold,
    select_parameters,
    write_ell_csv,
)
from .errors import ConfigError, HorizonError, InsufficientCertifiedPoints, NegdefError
from .group_core import format_element, make_group
from .growth import alpha_sequence, classify_indices, density_report, fit_growth_exponent, write_growth_csv
from .rng import derive_seed, stream, zero_sum_vector
from .spectral import counting_by_rank, spectral_report, write_spectral_csv
from .verify import (
    check_lemma_bounds,
    check_negative_definite_ell,
    check_positive_definite_omega,
    fit_sublevel_exponent,
    properness_scan,
    spectrum_grid,
    sublevel_counts,
)

log = logging.getLogger("negdef")

STEPS = {
    "growth": ("growth",),
    "construct": ("growth", "construct"),
    "verify": ("growth", "construct", "verify"),
    "spectral": ("growth", "construct", "spectral"),
    "report": ("growth", "construct", "verify", "spectral"),
}

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


def _verdict(ok):
    return PASS if ok else FAIL


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _sample(table, radius, size, rng):
    """``size`` distinct elements of the ball of radius ``radius``."""
    pool = table.mu[radius]
    picks = rng.sample_indices(pool, size)
    return [tuple(int(v) for v in table.elements[i]) for i in picks]


class Pipeline:
    def __init__(self, cfg):
        self.cfg = cfg
        self.group = make_group(cfg.group_spec())
        self.summary = {"group": None, "mu": None, "d_hat": None, "params": None,
                        "properness": None, "verdicts": {}, "d_s_estimate": None}
        self.timings = {}

    # -- steps ---------------------------------------------------------

    def growth(self, out):
        cfg = self.cfg
        self.table = cached_tables(self.group, cfg.radius, cfg.cache_dir, cfg.budget, cfg.threads)
        self.fit = fit_growth_exponent(self.table, cfg.window)
        if cfg.beta is not None:
            beta, gamma = cfg.beta, cfg.gamma
        else:
            beta, gamma = select_parameters(cfg.d_target, self.fit)
        self.params = ConstructionParams(beta, gamma, cfg.depth, cfg.d_target)
        self.alpha = alpha_sequence(self.table)
        flags_E, flags_F = classify_indices(self.alpha, beta, gamma, cfg.depth)
        write_balls_csv(self.table, out / "balls.csv")
        write_growth_csv(self.table, self.alpha, flags_E, flags_F, out / "growth.csv")
        fit = self.fit
        self.summary.update(
            group={
                "spec": self.group.spec.to_dict(),
                "generators": [format_element(g) for g in self.group.generators],
                "hash": self.group.group_hash,
                "ball_hash": self.table.content_hash,
            },
            mu=self.table.mu,
            d_hat=fit.d_hat,
            growth={"c": fit.c, "d": fit.d, "d_prime": fit.d_prime, "window": list(fit.window),
                    "residual": fit.residual},
            params={"beta": beta, "gamma": gamma, "N": cfg.depth, "d_target": cfg.d_target,
                    "derived": cfg.beta is None},
        )

    def construct(self, out):
        cfg = self.cfg
        self.ctx = ctx = build_context(self.table, self.params)
        radius, bound = properness_threshold(ctx)
        self.summary["params"].update(
            k={str(n): k for n, k in sorted(ctx.k_sel.items())},
            skipped_in_F=ctx.skipped,
            n_terms=ctx.n_terms,
        )
        self.summary["properness"] = {"radius": radius, "bound": bound,
                                      "certified": self.table.radius >= radius}
        rows = evaluation_rows(self.table, cfg.p_max, cfg.ell_extra, stream(cfg.seed, "ell_rows"))
        write_ell_csv(ctx, rows, out / "ell.csv")

    def verify(self, out):
        cfg, ctx, table = self.cfg, self.ctx, self.table
        verdicts = {}
        checks = {}
        s_rad = cfg.sample_radius or max(1, min(cfg.p_max, table.radius // 2))
        if 2 * s_rad > table.radius:
            raise HorizonError(f"sample radius {s_rad} needs pairwise products in the table", 2 * s_rad)

        density = density_report(ctx.flags_E, self.fit, self.params.beta)
        bad = [(n, str(e), b) for n, e, b, ok in density if not ok]
        checks["density"] = {"checked": len(density), "violations": bad[:10], "beta": self.params.beta}
        verdicts["density"] = _verdict(not bad)

        p_max = min(cfg.p_max, table.radius)
        lemma = check_lemma_bounds(ctx, p_max, stream(cfg.seed, "lemma"), cfg.sphere_cap)
        checks["lemma_bounds"] = {**lemma.to_dict(), "p_max": p_max,
                                  "seed": derive_seed(cfg.seed, "lemma")}
        verdicts["lemma_bounds"] = _verdict(lemma.passed)

        rng = stream(cfg.seed, "psd")
        worst = None
        n_psd = 0
        ok = True
        for _ in range(cfg.psd_sets):
            sample = _sample(table, s_rad, cfg.cnd_size, rng)
            for n in sorted(ctx.k_sel):
                rep = check_positive_definite_omega(ctx, n, sample)
                n_psd += 1
                ok &= rep.passed
                if worst is None or rep.min_eigenvalue < worst.min_eigenvalue:
                    worst = rep
        checks["psd_omega"] = {"matrices": n_psd, "worst": worst.to_dict() if worst else None,
                               "seed": derive_seed(cfg.seed, "psd")}
        verdicts["psd_omega"] = _verdict(ok)

        rng = stream(cfg.seed, "cnd")
        reports = []
        for _ in range(cfg.cnd_sets):
            sample = _sample(table, s_rad, cfg.cnd_size, rng)
            reports.append(check_negative_definite_ell(ctx, sample, cfg.t_grid, cfg.cnd_trials, rng))
        forms = [q for r in reports for q in r.exact_forms]
        checks["cnd"] = {
            "samples": len(reports),
            "vectors": len(forms),
            "max_exact_form": str(max(forms, default=Fraction(0))),
            "min_matrix_eigenvalue": min((r.matrix.min_eigenvalue for r in reports), default=None),
            "min_schoenberg_eigenvalue": min(
                (s.min_eigenvalue for r in reports for s in r.schoenberg.values()), default=None
            ),
            "t_grid": list(cfg.t_grid),
            "seed": derive_seed(cfg.seed, "cnd"),
        }
        verdicts["cnd"] = _verdict(all(r.passed for r in reports))

        radius, bound = properness_threshold(ctx)
        if table.radius >= radius:
            scan = properness_scan(ctx)
            checks["properness"] = {**scan, "violations": len(scan["violations"])}
            verdicts["properness"] = _verdict(not scan["violations"])
        else:
            checks["properness"] = {"radius": radius, "bound": bound, "horizon": table.radius}
            verdicts["properness"] = INCONCLUSIVE

        limit = self.params.gamma * (self.fit.d + 0.5)
        sub = {"limit": limit}
        if table.radius >= radius:
            counts = sublevel_counts(ctx, spectrum_grid(ctx))
            sub["certified_points"] = sum(1 for _, _, c in counts if c)
            try:
                slope = fit_sublevel_exponent(counts)
                sub["exponent"] = slope
                verdicts["sublevel_growth"] = _verdict(slope <= limit)
            except InsufficientCertifiedPoints as exc:
                sub["exponent"] = None
                sub["reason"] = str(exc)
                verdicts["sublevel_growth"] = INCONCLUSIVE
        else:
            verdicts["sublevel_growth"] = INCONCLUSIVE
        checks["sublevel_growth"] = sub
        self.summary["sublevel_exponent"] = sub.get("exponent")

        combo = combination_contexts(table, self.fit, cfg.depth, cfg.combination_contexts)
        if combo:
            sample = _sample(table, s_rad, cfg.cnd_size, stream(cfg.seed, "combination"))
            vals = {}
            for a in sample:
                for b in sample:
                    s = self.group.multiply(self.group.inverse(a), b)
                    if s not in vals:
                        vals[s] = combined_ell(combo, s)
            crng = stream(cfg.seed, "combination_vectors")
            forms = []
            for _ in range(cfg.cnd_trials):
                c = zero_sum_vector(crng, len(sample))
                q = Fraction(0)
                for i, a in enumerate(sample):
                    for j, b in enumerate(sample):
                        q += c[i] * c[j] * vals[self.group.multiply(self.group.inverse(a), b)]
                forms.append(q)
            checks["combination"] = {
                "contexts": [{"beta": x.params.beta, "gamma": x.params.gamma, "N": x.params.N,
                              "d_target": x.params.d_target, "n_terms": x.n_terms} for x in combo],
                "max_exact_form": str(max(forms)),
                "seed": derive_seed(cfg.seed, "combination"),
            }
            verdicts["combination_cnd"] = _verdict(all(q <= 0 for q in forms))
        else:
            checks["combination"] = {"contexts": []}
            verdicts["combination_cnd"] = INCONCLUSIVE

        params = {"beta": self.params.beta, "gamma": self.params.gamma, "N": self.params.N,
                  "sample_radius": s_rad, "seed": cfg.seed}
        _dump({"params": params, "checks": checks, "verdicts": verdicts}, out / "verify.json")
        self.summary["verdicts"].update(verdicts)

    def spectral(self, out):
        cfg, ctx = self.cfg, self.ctx
        radius, _ = properness_threshold(ctx)
        if self.table.radius < radius:
            raise HorizonError("spectral counting needs the properness ball", radius)
        grid = spectrum_grid(ctx)
        rep = spectral_report(ctx, self.fit, cfg.heat_t, grid)
        write_spectral_csv(rep.counting, out / "spectral.csv")
        oracle = counting_by_rank(ctx, grid)
        agree = oracle == [n for _, n, _ in rep.counting]
        limit = cfg.d_target + 0.5 if cfg.d_target is not None else self.params.gamma * (self.fit.d + 0.5)
        v = self.summary["verdicts"]
        v["spectral_rank_oracle"] = _verdict(agree)
        if rep.d_s_estimate is None:
            v["spectral_dimension"] = INCONCLUSIVE
        else:
            v["spectral_dimension"] = _verdict(rep.d_s_estimate <= limit)
        self.summary["d_s_estimate"] = rep.d_s_estimate
        self.summary["spectral"] = {**rep.to_dict(), "limit": limit}

    # ------------------------------------------------------------------

    def run(self, command, out):
        out.mkdir(parents=True, exist_ok=True)
        for step in STEPS[command]:
            t0 = time.perf_counter()
            getattr(self, step)(out)
            self.timings[step] = time.perf_counter() - t0
        _dump(self.summary, out / "summary.json")
        _dump(
            {
                "finished": datetime.now(timezone.utc).isoformat(),
                "seconds": self.timings,
                "backend": BACKEND,
                "python": platform.python_version(),
                "version": __version__,
                "command": command,
            },
            out / "meta.json",
        )
        return 1 if FAIL in self.summary["verdicts"].values() else 0


def run_pipeline(cfg, command="report", out=None):
    """Run ``command`` for ``cfg``; returns (exit status, summary dict)."""
    out = Path(out or cfg.output_dir)
    pipe = Pipeline(cfg)
    status = pipe.run(command, out)
    return status, pipe.summary


def build_parser():
    p = argparse.ArgumentParser(prog="negdef", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(STEPS))
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    p.add_argument("--cache", metavar="DIR", help="ball cache directory (overrides cache_dir)")
    p.add_argument("--threads", type=int, metavar="N")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(
            output_dir=args.out, cache_dir=args.cache, threads=args.threads, seed=args.seed
        )
        validate(cfg)
        status, summary = run_pipeline(cfg, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except HorizonError as exc:
        print(f"horizon error: {exc}", file=sys.stderr)
        return 3
    except NegdefError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for name, verdict in sorted(summary["verdicts"].items()):
        print(f"{name:22s} {verdict}")
    return status


if __name__ == "__main__":
    sys.exit(main())
