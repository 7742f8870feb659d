import enum
import math
from dataclasses import dataclass

import numpy as np

from nestfrag.utils.mass_partitions.mass_partitions import (
    BivariateMassPartition,
    MassPartition,
    canonicalize_bivariate,
    validate_mass,
)
from nestfrag.utils.partitions.partitions import (
    DistinguishedNestedPartition,
    NestedPartition,
    Partition,
)


@dataclass(frozen=True)
class RngHandle:
    """Independent random stream for a (seed, stream) pair.

    Streams are Philox generators keyed through SeedSequence spawn keys, so any
    stream can be replayed without drawing the ones before it.
    """

    seed: int
    stream: int = 0

    def generator(self):
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, stream):
        return RngHandle(self.seed, stream)


class LabelKind(enum.Enum):
    MOTHER_BLOCK = "MOTHER_BLOCK"
    MOTHER_DUST = "MOTHER_DUST"
    NEW = "NEW"
    NEW_DUST = "NEW_DUST"
    ISOLATED = "ISOLATED"


@dataclass(frozen=True)
class SplitLabel:
    kind: LabelKind
    k: int = 0
    l: int = 0

    def __str__(self):
        if self.kind is LabelKind.MOTHER_BLOCK:
            return f"MOTHER_BLOCK({self.l})"
        if self.kind is LabelKind.NEW:
            return f"NEW({self.k},{self.l})"
        if self.kind is LabelKind.NEW_DUST:
            return f"NEW_DUST({self.k})"
        return self.kind.value


@dataclass(frozen=True)
class InnerSplitOutcome:
    block: tuple
    labels: tuple
    outcome: DistinguishedNestedPartition


# ---Interval layouts---
def univariate_labels(s, uniforms):
    """
    Paintbox interval of each uniform: 0..len(s)-1 for [t_{k}, t_{k+1}), -1 for dust.
    """
    ends = np.cumsum(np.asarray(s.s, dtype=float))
    index = np.searchsorted(ends, np.asarray(uniforms, dtype=float), side='right')
    return np.where(index < len(s.s), index, -1)


def labels_to_partition(labels):
    # dust elements are their own blocks
    keyed = [(int(label),) if label >= 0 else ('dust', i) for i, label in enumerate(labels)]
    return Partition.from_labels(keyed)


def inner_labels(p, uniforms):
    """Map uniforms to the bivariate paintbox layout of p.

    [0, u_bar) is the mother outer block, cut into the u_l intervals then mother
    dust; [t_{k-1}, t_k) is new outer block k, cut into its row then row dust; the
    remainder up to 1 isolates.
    """
    u_ends = np.cumsum(np.asarray(p.u, dtype=float))
    bar_ends = p.u_bar + np.cumsum(np.asarray(p.s_bar, dtype=float))
    row_ends = [np.cumsum(np.asarray(row, dtype=float)) for row in p.s_rows]

    labels = []
    for x in np.asarray(uniforms, dtype=float):
        if x < p.u_bar:
            l = int(np.searchsorted(u_ends, x, side='right'))
            labels.append(SplitLabel(LabelKind.MOTHER_BLOCK, 0, l + 1) if l < len(p.u)
                          else SplitLabel(LabelKind.MOTHER_DUST))
            continue
        k = int(np.searchsorted(bar_ends, x, side='right'))
        if k >= len(p.s_bar):
            labels.append(SplitLabel(LabelKind.ISOLATED))
            continue
        start = p.u_bar if k == 0 else bar_ends[k - 1]
        l = int(np.searchsorted(row_ends[k], x - start, side='right'))
        labels.append(SplitLabel(LabelKind.NEW, k + 1, l + 1) if l < len(p.s_rows[k])
                      else SplitLabel(LabelKind.NEW_DUST, k + 1))
    return tuple(labels)


def labels_to_outcome(labels):
    """Distinguished nested partition of positions 1..m induced by split labels."""
    inner_keys = []
    outer_keys = []
    for j, label in enumerate(labels):
        kind = label.kind
        if kind is LabelKind.MOTHER_BLOCK:
            inner_keys.append(('star', label.l))
            outer_keys.append('star')
        elif kind is LabelKind.MOTHER_DUST:
            inner_keys.append(('dust', j))
            outer_keys.append('star')
        elif kind is LabelKind.NEW:
            inner_keys.append((label.k, label.l))
            outer_keys.append(label.k)
        elif kind is LabelKind.NEW_DUST:
            inner_keys.append(('dust', j))
            outer_keys.append(label.k)
        else:
            inner_keys.append(('dust', j))
            outer_keys.append(('isolated', j))

    xi = Partition.from_labels(outer_keys)
    star = None
    if 'star' in outer_keys:
        star = xi.assignment[outer_keys.index('star')]
    return DistinguishedNestedPartition(NestedPartition(Partition.from_labels(inner_keys), xi), star)


# ---Samplers---
def sample_univariate(s, n, rng):
    """
    Sample rho_s restricted to [n].

    Args:
        s (MassPartition): Paintbox frequencies
        n (int): Number of elements
        rng (numpy.random.Generator): Source of the uniforms U_1..U_n

    Returns:
        Partition
    """
    return labels_to_partition(univariate_labels(s, rng.random(n)))


def sample_outer(s, k_inner, rng):
    # inner blocks are the paintbox items; dust inner blocks form their own outer block
    return labels_to_partition(univariate_labels(s, rng.random(k_inner)))


def sample_inner(p, block, rng):
    block = tuple(sorted(block))
    labels = inner_labels(p, rng.random(len(block)))
    return InnerSplitOutcome(block, labels, labels_to_outcome(labels))


# ---Asymptotic frequencies---
def _frequencies(sizes, n):
    return [size / n for size in sizes if size > 1]


def empirical_frequencies(pi):
    """
    Block frequencies #B/n of a finite sample, singletons counted as dust.

    A Partition gives a MassPartition. A NestedPartition or DistinguishedNestedPartition
    gives a BivariateMassPartition whose mother outer block is the star block (none for
    a plain NestedPartition).
    """
    if isinstance(pi, Partition):
        return validate_mass(_frequencies([len(b) for b in pi.blocks], pi.n))

    star = None
    if isinstance(pi, DistinguishedNestedPartition):
        star = pi.star_xi_block
        pi = pi.inner
    n = pi.n
    u, u_bar, s_bar, s_rows = [], 0.0, [], []
    for index, inner in enumerate(pi.inner_of_outer):
        sizes = [len(pi.zeta.blocks[i]) for i in inner]
        size = sum(sizes)
        if index == star:
            u_bar = size / n
            u = _frequencies(sizes, n)
        elif size > 1:
            s_bar.append(size / n)
            s_rows.append(_frequencies(sizes, n))
    return canonicalize_bivariate(u, s_rows, u_bar, s_bar)


def padded(values, length):
    values = list(values)
    return values + [0.0] * (length - len(values))


def frequency_gap(estimate, target):
    """Largest entrywise difference between two mass partitions of the same kind."""
    if isinstance(target, MassPartition):
        size = max(len(estimate.s), len(target.s))
        return max((abs(a - b) for a, b in zip(padded(estimate.s, size), padded(target.s, size))),
                   default=0.0)
    gaps = [abs(estimate.u_bar - target.u_bar)]
    size = max(len(estimate.u), len(target.u))
    gaps += [abs(a - b) for a, b in zip(padded(estimate.u, size), padded(target.u, size))]
    rows = max(len(estimate.s_bar), len(target.s_bar))
    gaps += [abs(a - b) for a, b in zip(padded(estimate.s_bar, rows), padded(target.s_bar, rows))]
    for k in range(rows):
        a = estimate.s_rows[k] if k < len(estimate.s_rows) else ()
        b = target.s_rows[k] if k < len(target.s_rows) else ()
        size = max(len(a), len(b))
        gaps += [abs(x - y) for x, y in zip(padded(a, size), padded(b, size))]
    return max(gaps)
