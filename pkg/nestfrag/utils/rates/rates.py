import logging
from dataclasses import dataclass
from functools import lru_cache

import nestfrag.globals as globals
from nestfrag.errors import NestFragError
from nestfrag.utils.partitions.partitions import (
    enumerate_distinguished,
    enumerate_partitions,
    erode_inner,
    erode_outer,
    format_nested,
    graft_inner_split,
    graft_outer_split,
    nested_leq,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JumpTarget:
    source: object
    target: object
    rate: float

    def to_dict(self):
        return {"to": format_nested(self.target), "rate": self.rate}


def merge_jumps(source, pairs):
    """
    Sum the rates of identical targets, dropping the identity and zero rates.

    Args:
        source (NestedPartition): State the jumps leave from
        pairs (iterable): (target, rate) pairs

    Returns:
        list: JumpTarget entries in first-seen order
    """
    totals = {}
    for target, rate in pairs:
        if target == source or rate <= 0.0:
            continue
        totals[target] = totals.get(target, 0.0) + rate
    return [JumpTarget(source, target, rate) for target, rate in totals.items()]


# ---Index-vector sums---
def _injective_sum(weights, dust):
    """
    Sum over injective slot assignments of the product of weights.

    weights[j][i] is the weight of item j placed in slot i, dust[j] the weight of
    item j sent to the non-injective dust slot.
    """
    memo = {}

    def walk(j, used):
        if j == len(weights):
            return 1.0
        key = (j, used)
        if key in memo:
            return memo[key]
        total = 0.0
        if dust[j] > 0.0:
            total += dust[j] * walk(j + 1, used)
        for i, w in enumerate(weights[j]):
            if w > 0.0 and not used >> i & 1:
                total += w * walk(j + 1, used | 1 << i)
        memo[key] = total
        return total

    return walk(0, 0)


def index_vector_sum(values, sizes, dust):
    # children of size 1 may fall in the dust
    weights = [[v ** size for v in values] for size in sizes]
    return _injective_sum(weights, [dust if size == 1 else 0.0 for size in sizes])


def exact_split_probability_univariate(s, child_sizes):
    """Probability that rho_s puts children of the given sizes in distinct blocks."""
    if sum(child_sizes) < 1:
        raise NestFragError("BAD_RANGE", "child sizes must cover at least one element")
    return index_vector_sum(s.s, child_sizes, s.dust)


def univariate_rate(c, atoms, child_sizes):
    """
    Rate at which a block fragments into children of the given sizes, for a
    univariate fragmentation with erosion c and (rate, MassPartition) atoms.
    """
    rate = 0.0
    if len(child_sizes) == 2 and 1 in child_sizes:
        rate += c
    for weight, s in atoms:
        rate += weight * exact_split_probability_univariate(s, child_sizes)
    return rate


def exact_inner_split_probability(p, outcome):
    """
    Probability that the bivariate paintbox of p induces the given distinguished
    nested partition on m positions.
    """
    state = outcome.inner
    mother = 1.0
    items = []
    for index, inner in enumerate(state.inner_of_outer):
        sizes = [len(state.zeta.blocks[i]) for i in inner]
        if index == outcome.star_xi_block:
            mother = index_vector_sum(p.u, sizes, p.mother_dust)
        else:
            items.append(sizes)
    if mother == 0.0:
        return 0.0
    weights = [[index_vector_sum(row, sizes, p.row_dust(k)) for k, row in enumerate(p.s_rows)]
               for sizes in items]
    dust = [p.isolated_mass if sizes == [1] else 0.0 for sizes in items]
    return mother * _injective_sum(weights, dust)


@lru_cache(maxsize=None)
def outer_outcome_table(s, k):
    """(grouping of k inner blocks, probability) pairs under rho_s, zero terms dropped."""
    table = []
    for grouping in enumerate_partitions(k, cap=k):
        prob = exact_split_probability_univariate(s, [len(b) for b in grouping.blocks])
        if prob > 0.0:
            table.append((grouping, prob))
    return tuple(table)


def inner_outcome_table(p, m):
    cap = globals.CONFIG['inner_block_cap']
    if m > cap:
        raise NestFragError("TOO_LARGE", f"inner block of size {m} exceeds cap {cap}")
    return _inner_table(p, m)


# the cap is checked on every call, outside the cache
@lru_cache(maxsize=None)
def _inner_table(p, m):
    table = []
    for outcome in enumerate_distinguished(m, cap=m):
        prob = exact_inner_split_probability(p, outcome)
        if prob > 0.0:
            table.append((outcome, prob))
    return tuple(table)


# ---Jump enumeration---
def erosion_jumps(pi, params):
    pairs = []
    if params.c_out > 0:
        pairs += [(erode_outer(pi, i), params.c_out) for i in range(pi.zeta.num_blocks)]
    if params.c_in1 > 0:
        pairs += [(erode_inner(pi, e, False), params.c_in1) for e in range(1, pi.n + 1)]
    if params.c_in2 > 0:
        pairs += [(erode_inner(pi, e, True), params.c_in2) for e in range(1, pi.n + 1)]
    return merge_jumps(pi, pairs)


def exact_outer_dislocation_jumps(pi, params):
    pairs = []
    for outer, inner in enumerate(pi.inner_of_outer):
        # a single inner block cannot be regrouped
        if len(inner) < 2:
            continue
        for atom in params.nu_out:
            for grouping, prob in outer_outcome_table(atom.s, len(inner)):
                pairs.append((graft_outer_split(pi, outer, grouping), atom.rate * prob))
    return merge_jumps(pi, pairs)


def exact_inner_dislocation_jumps(pi, params):
    pairs = []
    for index, block in enumerate(pi.zeta.blocks):
        for atom in params.nu_in:
            for outcome, prob in inner_outcome_table(atom.p, len(block)):
                pairs.append((graft_inner_split(pi, index, outcome), atom.rate * prob))
    return merge_jumps(pi, pairs)


def generator_row(pi, params, cap=None):
    """
    Complete rate row of the restricted chain at pi.

    Returns:
        list: JumpTarget entries, one per reachable target, rates summed over mechanisms
    """
    cap = globals.CONFIG['oracle_cap'] if cap is None else cap
    if pi.n > cap:
        raise NestFragError("TOO_LARGE", f"generator rows on [{pi.n}] exceed oracle cap {cap}")
    jumps = erosion_jumps(pi, params) + exact_outer_dislocation_jumps(pi, params) \
        + exact_inner_dislocation_jumps(pi, params)
    return merge_jumps(pi, ((j.target, j.rate) for j in jumps))


def row_to_dict(pi, row):
    return {"from": format_nested(pi), "jumps": [j.to_dict() for j in row]}


# ---Binary branching closed form---
@dataclass(frozen=True)
class BinaryRate:
    """Closed-form rate with a diagnostic status.

    status is "ok", "identity", "not_binary_jump", or "ambiguous" when several
    erosion atoms give the same restricted outcome (see flags).
    """

    rate: float
    status: str = "ok"
    flags: tuple = ()


def _split_block(old, new):
    # the single block of old that new splits, as (block, children), None if unchanged
    kept = set(new.blocks)
    removed = [b for b in old.blocks if b not in kept]
    if not removed:
        return None
    if len(removed) > 1:
        return False
    block = frozenset(removed[0])
    children = sorted((b for b in new.blocks if block.issuperset(b)), key=min)
    if len(children) != 2:
        return False
    return block, [frozenset(c) for c in children]


def _inner_count(pi, block):
    return sum(1 for b in pi.zeta.blocks if block.issuperset(b))


def binary_rate(pi, pi_prime, binary_measures, c_out, c_in1, c_in2):
    """
    Transition rate of a binary simple nested fragmentation by the closed form.

    B splits into B_1, B_2 and C into C_1, C_2 with B_1 inside C_1; a side that
    does not split is empty. When zeta is unchanged, B is the single inner block
    forming one side of the split of C.
    """
    if pi_prime == pi:
        return BinaryRate(0.0, "identity")
    if not nested_leq(pi_prime, pi):
        return BinaryRate(0.0, "not_binary_jump")
    zeta_split = _split_block(pi.zeta, pi_prime.zeta)
    xi_split = _split_block(pi.xi, pi_prime.xi)
    if zeta_split is False or xi_split is False:
        return BinaryRate(0.0, "not_binary_jump")

    empty = frozenset()
    if zeta_split is not None:
        b, (b1, b2) = zeta_split
        if xi_split is None:
            c1, c2 = frozenset(pi.xi.block_of(min(b))), empty
        else:
            c, (d, e) = xi_split
            if not b <= c:
                return BinaryRate(0.0)
            c1, c2 = (d, e) if b1 <= d else (e, d)
    else:
        c, (d, e) = xi_split
        if _inner_count(pi_prime, d) == 1:
            b1, c1, c2 = d, d, e
        elif _inner_count(pi_prime, e) == 1:
            b1, c1, c2 = e, e, d
        else:
            b1, c1, c2 = empty, d, e
        b2 = empty

    zeta_same = zeta_split is None
    xi_same = xi_split is None
    x1, x2 = len(b1), len(b2)
    y1, y2 = _inner_count(pi_prime, c1), _inner_count(pi_prime, c2)
    iso1 = x1 == 1 and b1 == c1
    iso2 = x2 == 1 and b2 == c2

    rate = 0.0
    if zeta_same and min(y1, y2) == 1:
        rate += c_out
    if xi_same and min(x1, x2) == 1:
        rate += c_in1
    if iso1 or iso2:
        rate += c_in2
    if zeta_same:
        rate += sum(w * x ** y1 * (1 - x) ** y2 for w, x in binary_measures.out)
    if xi_same:
        rate += sum(w * x ** x1 * (1 - x) ** x2 for w, x in binary_measures.in1)
    if b1 and (b1 | b2) == c1:
        rate += sum(w * x ** x1 * (1 - x) ** x2 for w, x in binary_measures.in2)
    if zeta_same or not b2 <= c1:
        for w, x in binary_measures.in3:
            if b2 == c2:
                rate += w * x ** x1 * (1 - x) ** x2
            if b1 == c1:
                rate += w * x ** x2 * (1 - x) ** x1

    flags = []
    if zeta_same and y1 == y2 == 1:
        flags.append("symmetric_outer_erosion")
    if xi_same and x1 == x2 == 1:
        flags.append("symmetric_inner_erosion")
    if not zeta_same and not xi_same and iso1 and iso2:
        flags.append("symmetric_isolation")
    if flags:
        return BinaryRate(rate, "ambiguous", tuple(flags))
    if not zeta_same and not xi_same and b1 == c1 and b2 == c2:
        return BinaryRate(rate, "ok", ("in3_both_orientations",))
    return BinaryRate(rate)
