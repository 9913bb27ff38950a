"""Seeded multi-trial experiments: ratio estimates, parameter sweeps, verification suites."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .generators import generate
from .harness import (
    Instance,
    InvariantViolation,
    availability_probe,
    check_trace,
    martingale_probe,
    recompute_cost,
    replay,
    run,
)
from .hst import build_hst
from .metric import normalize
from .oracle import (
    CAP_LIMIT,
    UNCAP_LIMIT,
    OfflineInstance,
    opt_bounds,
    opt_cap,
    opt_uncap,
)
from .policies import CAPACITATED, PolicyConfig, UnsupportedEvent

RATIO_TOL = 1e-9


def trial_seed(master: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(master), int(trial)]).generate_state(1, np.uint32)[0])


def _one(args):
    config, inst, seed = args
    report, _ = run(config, inst, seed, trace="counters")
    return report


def run_trials(config: PolicyConfig, inst: Instance, master: int, trials: int, jobs: int = 1):
    """CostReports for trials 0..trials-1, in trial order."""
    seeds = [trial_seed(master, t) for t in range(trials)]
    work = [(config, inst, s) for s in seeds]
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(jobs) as pool:
            reports = list(pool.map(_one, work, chunksize=max(1, trials // (4 * jobs))))
    else:
        reports = [_one(w) for w in work]
    return seeds, reports


def mean_se(values) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if len(x) == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(x.mean()), se


def log_log_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    if len(xs) < 2:
        raise ValueError("a slope needs at least two grid points")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def offline_opt(inst: Instance, upsilon: int | None, mode: str = "auto") -> dict:
    """{"opt": v} when known exactly, else {"lower": l, "upper": u}.

    ``mode`` is "exact" (raise OracleLimitError when too large), "bounds", or
    "auto" (exact within the limits, bounds otherwise).  Bounds that meet are
    reported as exact.
    """
    if mode not in ("auto", "exact", "bounds"):
        raise ValueError("oracle mode must be auto, exact or bounds")
    off = OfflineInstance.from_instance(inst, upsilon)
    if off.n == 0:
        return {"opt": 0.0}
    limit = CAP_LIMIT if upsilon is not None else UNCAP_LIMIT
    if mode == "exact" or (mode == "auto" and off.n <= limit):
        sol = opt_cap(off, upsilon) if upsilon is not None else opt_uncap(off)
        return {"opt": sol.cost}
    lower, upper = opt_bounds(off, upsilon)
    if abs(upper - lower) <= RATIO_TOL:
        return {"opt": lower}
    return {"lower": lower, "upper": upper}


def ratio_fields(mean: float, opt: dict) -> dict:
    if "opt" in opt:
        if opt["opt"] == 0:
            return {"opt": 0.0, "ratio": 1.0 if mean == 0 else math.inf}
        return {"opt": opt["opt"], "ratio": mean / opt["opt"]}
    return {"opt_lower": opt["lower"], "opt_upper": opt["upper"],
            "ratio_low": mean / opt["upper"], "ratio_high": mean / opt["lower"]}


@dataclass
class Estimate:
    policy: str
    trials: int
    mean: float
    se: float
    ratio: dict
    error: str | None = None

    def as_dict(self) -> dict:
        if self.error:
            return {"policy": self.policy, "error": self.error}
        return {"policy": self.policy, "trials": self.trials, "mean": self.mean,
                "se": self.se, **self.ratio}


def config_for(policy: str, inst: Instance, upsilon: int | None, q: int | None,
               reassign: str | None) -> PolicyConfig:
    order = reassign or inst.reassign or "fifo"
    if policy in CAPACITATED:
        return PolicyConfig(policy, upsilon=upsilon, q=q, reassign=order)
    return PolicyConfig(policy, q=q, reassign=order)


def estimate_policies(inst: Instance, policies, *, trials: int, master: int,
                      upsilon: int | None = None, q: int | None = None,
                      reassign: str | None = None, oracle: str = "auto", jobs: int = 1):
    """Per-policy estimates plus per-trial rows (policy, trial, seed, report)."""
    rows = []
    estimates = []
    opts: dict = {}
    for name in policies:
        try:
            config = config_for(name, inst, upsilon, q, reassign)
            seeds, reports = run_trials(config, inst, master, trials, jobs)
        except (UnsupportedEvent, ValueError) as exc:
            estimates.append(Estimate(name, 0, math.nan, math.nan, {}, error=str(exc)))
            continue
        cap = upsilon if name in CAPACITATED else None
        if cap not in opts:
            opts[cap] = offline_opt(inst, cap, oracle)
        totals = [r.total for r in reports]
        mean, se = mean_se(totals)
        estimates.append(Estimate(name, trials, mean, se, ratio_fields(mean, opts[cap])))
        rows.extend((name, t, s, r) for t, (s, r) in enumerate(zip(seeds, reports)))
    return estimates, rows


def sweep(kind: str, params: dict, param: str, values, policies, *, trials: int,
          master: int, upsilon: int | None = None, q: int | None = None,
          reassign: str | None = None, oracle: str = "auto", jobs: int = 1):
    """One estimate per grid value and policy, plus each policy's log-log slope."""
    values = list(values)
    if not values:
        raise ValueError("empty parameter grid")
    rows = []
    for v in values:
        inst = generate(kind, {**params, param: v})
        cap = upsilon
        if cap is None and param == "upsilon":
            cap = v
        ests, _ = estimate_policies(inst, policies, trials=trials, master=master, upsilon=cap,
                                    q=q, reassign=reassign, oracle=oracle, jobs=jobs)
        for e in ests:
            rows.append({"param": param, "value": v, **e.as_dict()})
    slopes = {}
    for name in policies:
        pts = [(r["value"], r["mean"]) for r in rows
               if r["policy"] == name and "error" not in r and r["mean"] > 0]
        if len(pts) >= 2:
            slopes[name] = log_log_slope(*zip(*pts))
    return rows, slopes


# -- verification suite --------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    stats: dict

    def as_dict(self) -> dict:
        return {"check": self.name, "pass": self.passed, **self.stats}


def verify_invariants(inst: Instance, config: PolicyConfig, seeds) -> Check:
    """Per-event state invariants, cost consistency, trace checks, replay and determinism."""
    failures = []
    for seed in seeds:
        try:
            report, trace = run(config, inst, seed, check=True)
        except InvariantViolation as exc:
            failures.append(f"seed {seed}: {exc}")
            continue
        total = recompute_cost(trace.policy)
        if abs(total - report.total) > 1e-7 * max(1.0, total):
            failures.append(f"seed {seed}: cost {report.total} != recomputed {total}")
        if replay(trace) != {k: trace.final[k] for k in ("facilities", "assigned", "residual", "caps")}:
            failures.append(f"seed {seed}: replay does not reproduce the final state")
        failures += [f"seed {seed}: {m}" for m in check_trace(trace)]
        _, again = run(config, inst, seed)
        if again.fingerprint() != trace.fingerprint():
            failures.append(f"seed {seed}: rerun produced a different trace")
    return Check(f"invariants[{config.algorithm}]", not failures,
                 {"runs": len(list(seeds)), "failures": failures[:10], "n_failures": len(failures)})


def location_clusters(inst: Instance) -> dict[str, set[int]]:
    out: dict[str, set[int]] = {"all": set()}
    for ev in inst.stream.events:
        if ev.kind == "ins":
            out["all"].add(ev.client)
            out.setdefault(f"at:{ev.location}", set()).add(ev.client)
    return out


def verify_martingale(inst: Instance, config: PolicyConfig, seeds, clusters: dict) -> Check:
    sums = {name: [] for name in clusters}
    for seed in seeds:
        _, trace = run(config, inst, seed)
        for name, members in clusters.items():
            sums[name].append(martingale_probe(trace, members))
    stats = {}
    ok = True
    for name, vals in sums.items():
        mean, se = mean_se(vals)
        good = mean <= 1.0 + 3.0 * se + 1e-12
        ok &= good
        stats[name] = {"mean": mean, "se": se, "pass": bool(good)}
    worst = max(stats, key=lambda k: stats[k]["mean"] - 1.0 - 3.0 * stats[k]["se"])
    return Check(f"martingale[{config.algorithm}]", bool(ok),
                 {"trials": len(seeds), "clusters": len(clusters), "worst": {worst: stats[worst]}})


def verify_availability(inst: Instance, config: PolicyConfig, seeds, limit: float = 0.01) -> Check:
    probed = violations = 0
    for seed in seeds:
        _, trace = run(config, inst, seed)
        got = availability_probe(trace)
        probed += got.probed
        violations += len(got.violations)
    rate = violations / probed if probed else 0.0
    return Check("availability", rate <= limit,
                 {"runs": len(seeds), "probed": probed, "violations": violations, "rate": rate})


def verify_hst(inst: Instance, upsilon: int, seeds, exhaustive_limit: int = 64) -> Check:
    """Dominance and the bucket ultrametric inequality on trees built over the metric."""
    norm = normalize(inst.metric, upsilon)
    n = norm.n
    d = norm.base.matrix() if n <= exhaustive_limit else None
    bad_dom = bad_ultra = 0
    for seed in seeds:
        tree = build_hst(norm, seed)
        if d is None:
            continue
        depth = np.array([[tree.lca_depth(u, v) if u != v else tree.h for v in range(n)]
                          for u in range(n)])
        dt = np.array(tree.level_dist)[depth]
        bad_dom += int((dt + 1e-9 < d).sum())
        for v in range(n):
            # depth(u,w) >= min(depth(u,v), depth(v,w)) for all u, w
            lower = np.minimum(depth[:, v][:, None], depth[v][None, :])
            bad_ultra += int((depth < lower).sum())
    return Check("hst", bad_dom == 0 and bad_ultra == 0,
                 {"trees": len(seeds), "points": n, "exhaustive": d is not None,
                  "dominance_violations": bad_dom, "bucket_violations": bad_ultra})


def verify_suite(inst: Instance, policies, *, trials: int, master: int,
                 upsilon: int | None = None, q: int | None = None,
                 reassign: str | None = None) -> list[Check]:
    seeds = [trial_seed(master, t) for t in range(trials)]
    checks = []
    for name in policies:
        config = config_for(name, inst, upsilon, q, reassign)
        if inst.stream.has_deletions and name in ("m", "capm"):
            checks.append(Check(f"invariants[{name}]", True,
                                {"skipped": "insertion-only policy on a stream with deletions"}))
            continue
        checks.append(verify_invariants(inst, config, seeds[: min(trials, 20)]))
        if name in ("alg1", "alg2", "naive", "mstar", "m"):
            checks.append(verify_martingale(inst, config, seeds, location_clusters(inst)))
        if name == "alg2":
            checks.append(verify_availability(inst, config, seeds[: min(trials, 100)]))
    if upsilon is not None and upsilon >= 2:
        checks.append(verify_hst(inst, upsilon, seeds[: min(trials, 20)]))
    return checks
