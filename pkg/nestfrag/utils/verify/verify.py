import itertools
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

import nestfrag.globals as globals
from nestfrag.errors import NestFragError
from nestfrag.utils.mass_partitions.mass_partitions import MassPartition, binary_project
from nestfrag.utils.paintbox.paintbox import (
    RngHandle,
    empirical_frequencies,
    frequency_gap,
    labels_to_partition,
    sample_inner,
    sample_univariate,
    univariate_labels,
)
from nestfrag.utils.partitions.partitions import (
    NestedPartition,
    apply_injection,
    enumerate_nested,
    enumerate_partitions,
    format_nested,
    format_partition,
    nested_leq,
    restrict,
)
from nestfrag.utils.rates.rates import binary_rate, exact_split_probability_univariate, generator_row
from nestfrag.utils.simulator.simulator import branching_violations, coupled_run, run

logger = logging.getLogger(__name__)

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"
SKIPPED = "SKIPPED"

# reports keep at most this many offending transitions
MAX_DELTAS = 50


@dataclass
class GeneratorMatrix:
    """Exact rates of the restricted chain; rows[state][target] is a positive rate."""

    n: int
    states: list
    rows: dict

    def rate(self, source, target):
        return self.rows.get(source, {}).get(target, 0.0)

    def transitions(self):
        for source in self.states:
            for target, rate in self.rows[source].items():
                yield source, target, rate

    def to_dict(self):
        return {
            "n": self.n,
            "rows": [
                {"from": format_nested(s), "jumps": [{"to": format_nested(t), "rate": r}
                                                     for t, r in self.rows[s].items()]}
                for s in self.states
            ],
        }


@dataclass
class VerdictReport:
    check: str
    status: str
    deltas: list = field(default_factory=list)
    p_values: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status != FAIL

    def to_dict(self):
        return {
            "check": self.check,
            "status": self.status,
            "deltas": self.deltas,
            "p_values": self.p_values,
            "details": self.details,
        }


def _report(check, status, **kwargs):
    report = VerdictReport(check, status, **kwargs)
    logger.info("%s: %s", check, status)
    return report


# ---Oracle---
def brute_force_generator(params, n, cap=None):
    """
    Exact generator of the chain on [n], one generator row per nested partition.

    Returns:
        GeneratorMatrix
    """
    cap = globals.CONFIG['brute_force_cap'] if cap is None else cap
    if n > cap:
        raise NestFragError("TOO_LARGE", f"brute-force generator on [{n}] exceeds cap {cap}")
    states = enumerate_nested(n, cap=max(n, globals.CONFIG['nested_cap']))
    rows = {}
    for state in states:
        rows[state] = {jump.target: jump.rate for jump in generator_row(state, params, cap=max(n, cap))}
    return GeneratorMatrix(n, states, rows)


def check_exchangeability(gm, tolerance=None):
    """Rates must be invariant under relabeling the elements by any permutation."""
    tolerance = globals.CONFIG['rate_tolerance'] if tolerance is None else tolerance
    deltas = []
    worst = 0.0
    for sigma in itertools.permutations(range(1, gm.n + 1)):
        for source, target, rate in gm.transitions():
            moved = gm.rate(apply_injection(source, sigma), apply_injection(target, sigma))
            gap = abs(moved - rate)
            worst = max(worst, gap)
            if gap > tolerance and len(deltas) < MAX_DELTAS:
                deltas.append({"sigma": list(sigma), "from": format_nested(source),
                               "to": format_nested(target), "rate": rate, "permuted_rate": moved})
    return _report("exchangeability", FAIL if deltas else PASS, deltas=deltas,
                   details={"n": gm.n, "worst_gap": worst, "tolerance": tolerance})


def check_projective_consistency(params, n, m, tolerance=None, params_n=None):
    """
    Rates on [n] must equal the summed rates on [m] over all targets restricting to them.

    params_n replaces params at level n (negative controls).
    """
    tolerance = globals.CONFIG['consistency_tolerance'] if tolerance is None else tolerance
    cap = globals.CONFIG['brute_force_cap']
    if not 1 <= n < m:
        raise NestFragError("BAD_RANGE", f"need 1 <= n < m, got n={n}, m={m}")
    if m > cap:
        raise NestFragError("TOO_LARGE", f"consistency check on [{m}] exceeds cap {cap}")
    params_n = params if params_n is None else params_n

    lower_rows = {}
    deltas = []
    worst = 0.0
    for state in enumerate_nested(m, cap=max(m, globals.CONFIG['nested_cap'])):
        below = restrict(state, n)
        if below not in lower_rows:
            lower_rows[below] = {j.target: j.rate for j in generator_row(below, params_n)}
        summed = defaultdict(float)
        for jump in generator_row(state, params):
            image = restrict(jump.target, n)
            if image != below:
                summed[image] += jump.rate
        expected = lower_rows[below]
        for target in set(summed) | set(expected):
            gap = abs(summed.get(target, 0.0) - expected.get(target, 0.0))
            worst = max(worst, gap)
            if gap > tolerance and len(deltas) < MAX_DELTAS:
                deltas.append({"state": format_nested(state), "to": format_nested(target),
                               "summed": summed.get(target, 0.0), "direct": expected.get(target, 0.0)})
    return _report("consistency", FAIL if deltas else PASS, deltas=deltas,
                   details={"n": n, "m": m, "worst_gap": worst, "tolerance": tolerance})


def check_empirical(params, n, jumps, seed, horizon=None):
    """
    Simulated jump intensities against the exact generator.

    Replicas run on streams 0, 1, ... from the coarsest state until `jumps`
    transitions are seen. For each transition, the observed count at a state is
    compared with rate times the holding time spent there.
    """
    if n > 4:
        raise NestFragError("TOO_LARGE", f"empirical check on [{n}] exceeds 4 elements")
    if params.is_zero():
        return _report("empirical", PASS, details={"n": n, "jumps": 0, "replicas": 0})
    horizon = globals.CONFIG['empirical_horizon'] if horizon is None else horizon
    z_bound = globals.CONFIG['z_bound']
    min_expected = globals.CONFIG['min_expected']
    gm = brute_force_generator(params, n)

    exposure = defaultdict(float)
    counts = Counter()
    observed = 0
    replica = 0
    while observed < jumps:
        trajectory = run(params, n, horizon=horizon, seed=seed, stream=replica)
        replica += 1
        last, state = 0.0, trajectory.initial
        for t, before, after in trajectory.jumps():
            exposure[before] += t - last
            counts[(before, after)] += 1
            last, state = t, after
        exposure[state] += trajectory.end_time - last
        observed += len(trajectory.events)
        # a chain that never jumps cannot reach the quota
        if replica == 1 and not trajectory.events and not any(gm.rows[trajectory.initial].values()):
            break

    deltas = []
    worst = 0.0
    hard_fail = False
    for (source, target), count in counts.items():
        if gm.rate(source, target) == 0.0:
            hard_fail = True
            deltas.append({"from": format_nested(source), "to": format_nested(target),
                           "observed": count, "expected": 0.0, "z": None})
    for source, time in exposure.items():
        for target, rate in gm.rows[source].items():
            expected = rate * time
            if expected < min_expected:
                continue
            z = (counts[(source, target)] - expected) / math.sqrt(expected)
            worst = max(worst, abs(z))
            if abs(z) > z_bound and len(deltas) < MAX_DELTAS:
                deltas.append({"from": format_nested(source), "to": format_nested(target),
                               "observed": counts[(source, target)], "expected": expected, "z": z})

    if hard_fail or worst > z_bound:
        status = FAIL
    elif observed < globals.CONFIG['min_jumps']:
        status = INCONCLUSIVE
    else:
        status = PASS
    return _report("empirical", status, deltas=deltas,
                   details={"n": n, "jumps": observed, "replicas": replica, "worst_z": worst,
                            "z_bound": z_bound})


def check_binary_agreement(params, n):
    """
    Closed-form binary rates against the exact generator, transition by transition.

    States where several erosion atoms give the same outcome are reported under
    "flagged" with both values and do not decide the verdict.
    """
    measures = binary_project(params)
    tolerance = globals.CONFIG['rate_tolerance']
    gm = brute_force_generator(params, n)

    deltas, flagged = [], []
    agreed = both_orientations = 0
    for source in gm.states:
        for target in gm.states:
            if target == source or not nested_leq(target, source):
                continue
            closed = binary_rate(source, target, measures, params.c_out, params.c_in1, params.c_in2)
            exact = gm.rate(source, target)
            entry = {"from": format_nested(source), "to": format_nested(target),
                     "formula": closed.rate, "oracle": exact}
            if closed.status == "ambiguous":
                flagged.append(dict(entry, flags=list(closed.flags)))
            elif abs(closed.rate - exact) > tolerance:
                if len(deltas) < MAX_DELTAS:
                    deltas.append(dict(entry, status=closed.status))
            else:
                agreed += 1
                if "in3_both_orientations" in closed.flags and exact > 0.0:
                    both_orientations += 1
    return _report("binary", FAIL if deltas else PASS, deltas=deltas,
                   details={"n": n, "agreed": agreed, "flagged": flagged,
                            "in3_both_orientations": both_orientations})


def check_paintbox_lln(p, n, seed):
    """Frequencies of one large paintbox sample against p, within lln_sigmas * 0.5/sqrt(n)."""
    if n < 1000:
        raise NestFragError("BAD_RANGE", f"law of large numbers check needs n >= 1000, got {n}")
    rng = RngHandle(seed).generator()
    if isinstance(p, MassPartition):
        estimate = empirical_frequencies(sample_univariate(p, n, rng))
    else:
        estimate = empirical_frequencies(sample_inner(p, range(1, n + 1), rng).outcome)
    tolerance = globals.CONFIG['lln_sigmas'] * 0.5 / math.sqrt(n)
    gap = frequency_gap(estimate, p)
    details = {"n": n, "gap": gap, "tolerance": tolerance}
    details["estimate"] = estimate.to_list() if isinstance(p, MassPartition) else estimate.to_dict()
    return _report("lln", PASS if gap <= tolerance else FAIL, details=details)


# ---Sampler laws---
def _chi_square(observed, probabilities, samples):
    """p-value of observed outcome counts against exact probabilities, small cells pooled."""
    min_expected = globals.CONFIG['min_expected']
    f_obs, f_exp = [], []
    pooled_obs = pooled_exp = 0.0
    for outcome, prob in probabilities.items():
        expected = prob * samples
        if expected < min_expected:
            pooled_obs += observed.get(outcome, 0)
            pooled_exp += expected
        else:
            f_obs.append(observed.get(outcome, 0))
            f_exp.append(expected)
    if pooled_exp > 0.0:
        f_obs.append(pooled_obs)
        f_exp.append(pooled_exp)
    if len(f_obs) < 2:
        return 1.0
    f_exp = np.asarray(f_exp) * (sum(f_obs) / sum(f_exp))
    return float(stats.chisquare(f_obs, f_exp).pvalue)


def check_paintbox_law(s, n, samples, seed):
    """
    Law of sample_univariate on [n] against the exact partition probabilities.

    Three samples are tested: direct, relabeled by the reversal permutation, and
    restricted from [n+1]. The level is Bonferroni-adjusted over the three.
    """
    exact = {}
    for partition in enumerate_partitions(n):
        prob = exact_split_probability_univariate(s, [len(b) for b in partition.blocks])
        if prob > 0.0:
            exact[partition] = prob

    rng = RngHandle(seed).generator()
    reversal = list(range(n, 0, -1))
    direct = Counter(labels_to_partition(row) for row in univariate_labels(s, rng.random((samples, n))))
    permuted = Counter(apply_injection(labels_to_partition(row), reversal)
                       for row in univariate_labels(s, rng.random((samples, n))))
    restricted = Counter(restrict(labels_to_partition(row), n)
                         for row in univariate_labels(s, rng.random((samples, n + 1))))

    alpha = globals.CONFIG['chi2_alpha'] / 3
    p_values, deltas = [], []
    for name, observed in (("direct", direct), ("permuted", permuted), ("restricted", restricted)):
        impossible = [format_partition(o) for o in observed if o not in exact]
        if impossible:
            deltas.append({"sample": name, "impossible": impossible})
        p_values.append(_chi_square(observed, exact, samples))
    failed = deltas or any(p <= alpha for p in p_values)
    return _report("paintbox_law", FAIL if failed else PASS, deltas=deltas, p_values=p_values,
                   details={"n": n, "samples": samples, "alpha": alpha})


# ---Path audits---
def check_branching(trajectory):
    """Count jumps that break monotonicity or either branching property."""
    violations = Counter()
    deltas = []
    for t, before, after in trajectory.jumps():
        for name in branching_violations(before, after):
            violations[name] += 1
            if len(deltas) < MAX_DELTAS:
                deltas.append({"t": t, "violation": name, "from": format_nested(before),
                               "to": format_nested(after)})
    return _report("branching", FAIL if violations else PASS, deltas=deltas,
                   details={"events": len(trajectory.events), "violations": dict(violations)})


def check_coupling(params, m, n, replicas, seed, horizon=None, max_events=None):
    """Coupled runs on [m] and [n] must agree after restriction at every event time."""
    horizon = globals.CONFIG['empirical_horizon'] if horizon is None else horizon
    deltas = []
    mismatches = 0
    for replica in range(replicas):
        upper, lower = coupled_run(params, m, n, horizon=horizon, max_events=max_events,
                                   seed=seed, stream=replica)
        times = {event.time for event in upper.events}
        for t in [0.0] + sorted(times):
            if restrict(upper.state_at(t), n) != lower.state_at(t):
                mismatches += 1
                if len(deltas) < MAX_DELTAS:
                    deltas.append({"replica": replica, "t": t})
        for event in lower.events:
            if event.time not in times:
                mismatches += 1
                if len(deltas) < MAX_DELTAS:
                    deltas.append({"replica": replica, "t": event.time, "orphan": True})
    return _report("coupling", FAIL if mismatches else PASS, deltas=deltas,
                   details={"m": m, "n": n, "replicas": replicas, "mismatches": mismatches})


def run_checks(params, n, seed, checks, jumps=10000, m=None):
    """
    Run the named checks for the verify command.

    Returns:
        list: VerdictReport per check, binary checks SKIPPED for non-binary params
    """
    reports = []
    if "exchangeability" in checks:
        reports.append(check_exchangeability(brute_force_generator(params, n)))
    if "consistency" in checks:
        upper = m if m is not None else min(n + 1, globals.CONFIG['brute_force_cap'])
        if upper > n:
            reports.append(check_projective_consistency(params, n, upper))
        else:
            reports.append(_report("consistency", SKIPPED, details={"n": n}))
    if "empirical" in checks:
        reports.append(check_empirical(params, n, jumps, seed))
    if "binary" in checks:
        try:
            reports.append(check_binary_agreement(params, n))
        except NestFragError as e:
            if e.code != "NOT_BINARY":
                raise
            reports.append(_report("binary", SKIPPED, details=e.to_dict()))
    if "lln" in checks:
        atoms = [a.s for a in params.nu_out] + [a.p for a in params.nu_in]
        for index, p in enumerate(atoms):
            report = check_paintbox_lln(p, 10000, seed + index)
            report.details["atom"] = index
            reports.append(report)
    return reports
