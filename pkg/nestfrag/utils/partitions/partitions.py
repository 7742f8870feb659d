import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import nestfrag.globals as globals
from nestfrag.errors import NestFragError


# Relabel blocks by order of least element
def canonicalize(labels):
    seen = {}
    out = []
    for label in labels:
        if label not in seen:
            seen[label] = len(seen)
        out.append(seen[label])
    return tuple(out)


@dataclass(frozen=True)
class Partition:
    """Set partition of [n] stored as a canonical assignment vector.

    assignment[i] is the index of the block holding element i+1; blocks are
    indexed 0..k-1 in order of their least element.
    """

    assignment: tuple

    def __post_init__(self):
        assignment = tuple(int(a) for a in self.assignment)
        if not assignment:
            raise NestFragError("BAD_RANGE", "a partition needs n >= 1")
        if canonicalize(assignment) != assignment:
            raise NestFragError("PARSE", f"assignment {list(assignment)} is not canonical")
        object.__setattr__(self, 'assignment', assignment)

    @classmethod
    def from_labels(cls, labels):
        return cls(canonicalize(labels))

    @classmethod
    def finest(cls, n):
        return cls(tuple(range(n)))

    @classmethod
    def coarsest(cls, n):
        return cls((0,) * n)

    @property
    def n(self):
        return len(self.assignment)

    @cached_property
    def blocks(self):
        grouped = [[] for _ in range(max(self.assignment) + 1)]
        for i, label in enumerate(self.assignment):
            grouped[label].append(i + 1)
        return tuple(tuple(b) for b in grouped)

    @property
    def num_blocks(self):
        return max(self.assignment) + 1

    def block_of(self, element):
        return self.blocks[self.assignment[element - 1]]

    def __str__(self):
        return format_partition(self)


@dataclass(frozen=True)
class NestedPartition:
    """Pair (zeta, xi) of partitions of [n] with zeta finer than xi."""

    zeta: Partition
    xi: Partition

    def __post_init__(self):
        if self.zeta.n != self.xi.n:
            raise NestFragError("SIZE_MISMATCH", f"zeta on [{self.zeta.n}] but xi on [{self.xi.n}]")
        if not is_finer(self.zeta, self.xi):
            raise NestFragError("NOT_NESTED", f"{self.zeta} is not finer than {self.xi}")

    @classmethod
    def finest(cls, n):
        return cls(Partition.finest(n), Partition.finest(n))

    @classmethod
    def coarsest(cls, n):
        return cls(Partition.coarsest(n), Partition.coarsest(n))

    @property
    def n(self):
        return self.zeta.n

    @cached_property
    def outer_of_inner(self):
        # xi-block index of every zeta-block
        return tuple(self.xi.assignment[block[0] - 1] for block in self.zeta.blocks)

    @cached_property
    def inner_of_outer(self):
        grouped = [[] for _ in range(self.xi.num_blocks)]
        for inner, outer in enumerate(self.outer_of_inner):
            grouped[outer].append(inner)
        return tuple(tuple(g) for g in grouped)

    def __str__(self):
        return format_nested(self)


@dataclass(frozen=True)
class DistinguishedNestedPartition:
    """Nested partition of [n] plus the out-of-band symbol star.

    star_xi_block is the index of the xi-block joined with star, or None when the
    xi-block of star is {star} alone. Star is always a singleton of zeta.
    """

    inner: NestedPartition
    star_xi_block: object = None

    def __post_init__(self):
        star = self.star_xi_block
        if star is not None and not 0 <= star < self.inner.xi.num_blocks:
            raise NestFragError("RANGE", f"star block {star} out of range")

    @property
    def n(self):
        return self.inner.n


# ---Construction---
def make_partition(blocks, n=None):
    """
    Build a canonical Partition from a collection of element sets.

    Args:
        blocks (iterable): Disjoint non-empty collections of elements of [n]
        n (int): Ground-set size; the largest element when omitted

    Returns:
        Partition: Canonical partition, blocks relabeled by least element
    """
    blocks = [list(b) for b in blocks]
    if any(len(b) == 0 for b in blocks):
        raise NestFragError("EMPTY_BLOCK", "blocks must be non-empty")
    if n is None:
        n = max((max(b) for b in blocks), default=0)
    if n < 1:
        raise NestFragError("BAD_RANGE", "a partition needs n >= 1")

    labels = [None] * n
    for index, block in enumerate(blocks):
        for element in block:
            if not isinstance(element, int) or not 1 <= element <= n:
                raise NestFragError("MISSING_ELEMENT", f"element {element!r} is not in [{n}]")
            if labels[element - 1] is not None:
                raise NestFragError("OVERLAP", f"element {element} appears in two blocks")
            labels[element - 1] = index
    missing = [i + 1 for i, label in enumerate(labels) if label is None]
    if missing:
        raise NestFragError("MISSING_ELEMENT", f"elements {missing} are not covered")
    return Partition.from_labels(labels)


def make_nested(zeta_blocks, xi_blocks, n=None):
    zeta = make_partition(zeta_blocks, n)
    return NestedPartition(zeta, make_partition(xi_blocks, zeta.n))


# ---Restriction and injection---
def restrict(p, m):
    if not 1 <= m <= p.n:
        raise NestFragError("BAD_RANGE", f"cannot restrict [{p.n}] to [{m}]")
    if isinstance(p, NestedPartition):
        return NestedPartition(restrict(p.zeta, m), restrict(p.xi, m))
    if m == p.n:
        return p
    # a prefix of a canonical vector is canonical
    return Partition(p.assignment[:m])


def apply_injection(p, sigma):
    """
    Pull a partition back along an injection sigma: [k] -> [n].

    Args:
        p (Partition | NestedPartition): Partition of [n]
        sigma (sequence): sigma[i] is the image of i+1, an element of [n]

    Returns:
        Same kind as p, on [k]
    """
    sigma = [int(x) for x in sigma]
    if not sigma:
        raise NestFragError("BAD_RANGE", "sigma must map a non-empty [k]")
    if any(not 1 <= x <= p.n for x in sigma):
        raise NestFragError("RANGE", f"sigma leaves [{p.n}]")
    if len(set(sigma)) != len(sigma):
        raise NestFragError("NOT_INJECTIVE", f"sigma {sigma} is not injective")
    if isinstance(p, NestedPartition):
        return NestedPartition(apply_injection(p.zeta, sigma), apply_injection(p.xi, sigma))
    return Partition.from_labels(p.assignment[x - 1] for x in sigma)


# ---Order---
def is_finer(a, b):
    if a.n != b.n:
        raise NestFragError("SIZE_MISMATCH", f"[{a.n}] vs [{b.n}]")
    image = {}
    for label_a, label_b in zip(a.assignment, b.assignment):
        if image.setdefault(label_a, label_b) != label_b:
            return False
    return True


def nested_leq(a, b):
    return is_finer(a.zeta, b.zeta) and is_finer(a.xi, b.xi)


def distance(a, b):
    """Agreement-depth distance 1/sup{k : a|k = b|k}, 0 on full agreement."""
    if a.n != b.n:
        raise NestFragError("SIZE_MISMATCH", f"[{a.n}] vs [{b.n}]")
    if a == b:
        return Fraction(0)
    depth = 1
    while depth < a.n and restrict(a, depth + 1) == restrict(b, depth + 1):
        depth += 1
    return Fraction(1, depth)


# ---Enumeration---
def _restricted_growth_strings(n):
    if n == 0:
        yield ()
        return
    for prefix in _restricted_growth_strings(n - 1):
        top = max(prefix, default=-1) + 1
        for label in range(top + 1):
            yield prefix + (label,)


def enumerate_partitions(n, cap=None):
    cap = globals.CONFIG['partition_cap'] if cap is None else cap
    if n < 1:
        raise NestFragError("BAD_RANGE", "n must be positive")
    if n > cap:
        raise NestFragError("TOO_LARGE", f"enumerating partitions of [{n}] exceeds cap {cap}")
    return [Partition(rgs) for rgs in _restricted_growth_strings(n)]


def enumerate_nested(n, cap=None):
    """
    List every nested partition of [n], xi-major, each xi refined block by block.
    """
    cap = globals.CONFIG['nested_cap'] if cap is None else cap
    if n > cap:
        raise NestFragError("TOO_LARGE", f"enumerating nested partitions of [{n}] exceeds cap {cap}")
    states = []
    for xi in enumerate_partitions(n, cap=max(cap, n)):
        refinements = [_restricted_growth_strings(len(block)) for block in xi.blocks]
        for choice in itertools.product(*[list(r) for r in refinements]):
            labels = [None] * n
            for index, (block, rgs) in enumerate(zip(xi.blocks, choice)):
                for element, label in zip(block, rgs):
                    labels[element - 1] = (index, label)
            states.append(NestedPartition(Partition.from_labels(labels), xi))
    return states


def enumerate_distinguished(m, cap=None):
    out = []
    for state in enumerate_nested(m, cap):
        out.append(DistinguishedNestedPartition(state, None))
        for star in range(state.xi.num_blocks):
            out.append(DistinguishedNestedPartition(state, star))
    return out


def bell_number(n):
    # Bell triangle recurrence
    row = [1]
    for _ in range(n - 1):
        nxt = [row[-1]]
        for value in row:
            nxt.append(nxt[-1] + value)
        row = nxt
    return row[-1]


# ---Text encoding---
def format_partition(p):
    return "|".join(",".join(str(e) for e in block) for block in p.blocks)


def format_nested(pi):
    return f"{format_partition(pi.zeta)} ; {format_partition(pi.xi)}"


def parse_partition(text, n=None):
    text = text.strip()
    if not text:
        raise NestFragError("PARSE", "empty partition text")
    blocks = []
    for chunk in text.split("|"):
        try:
            blocks.append([int(tok) for tok in chunk.split(",") if tok.strip()])
        except ValueError:
            raise NestFragError("PARSE", f"bad block {chunk!r}")
    return make_partition(blocks, n)


def parse_nested(text):
    parts = text.split(";")
    if len(parts) != 2:
        raise NestFragError("PARSE", f"expected 'zeta ; xi', got {text!r}")
    zeta = parse_partition(parts[0])
    return NestedPartition(zeta, parse_partition(parts[1], zeta.n))


# ---Block surgery (single source for simulator and rate oracle)---
def _split_labels(labels, groups):
    # give each group a fresh label
    labels = list(labels)
    fresh = max(labels) + 1
    for group in groups:
        for element in group:
            labels[element - 1] = fresh
        fresh += 1
    return labels


def erode_outer(pi, inner_index):
    """Inner block leaves its outer block and forms a new outer block on its own."""
    block = pi.zeta.blocks[inner_index]
    xi = Partition.from_labels(_split_labels(pi.xi.assignment, [block]))
    return NestedPartition(pi.zeta, xi)


def erode_inner(pi, element, isolate):
    """Element becomes a singleton inner block; with isolate, also a singleton outer block."""
    zeta = Partition.from_labels(_split_labels(pi.zeta.assignment, [[element]]))
    xi = pi.xi
    if isolate:
        xi = Partition.from_labels(_split_labels(pi.xi.assignment, [[element]]))
    return NestedPartition(zeta, xi)


def graft_outer_split(pi, outer_index, grouping):
    """
    Regroup the inner blocks of one outer block.

    Args:
        pi (NestedPartition): Current state
        outer_index (int): Index of the xi-block that dislocates
        grouping (Partition): Partition of [k] over its k inner blocks, in canonical order

    Returns:
        NestedPartition: zeta unchanged, the outer block split along the grouping
    """
    rows = pi.inner_of_outer[outer_index]
    if grouping.n != len(rows):
        raise NestFragError("SIZE_MISMATCH", f"grouping on [{grouping.n}] for {len(rows)} inner blocks")
    groups = []
    for part in grouping.blocks:
        groups.append([e for r in part for e in pi.zeta.blocks[rows[r - 1]]])
    xi = Partition.from_labels(_split_labels(pi.xi.assignment, groups))
    return NestedPartition(pi.zeta, xi)


def graft_inner_split(pi, inner_index, outcome):
    """
    Replace one inner block by a distinguished nested partition of its elements.

    Position j of the outcome is the j-th smallest element of the block. The
    outer block marked by star stays with the mother outer block, which keeps
    every inner block that does not fragment.
    """
    block = pi.zeta.blocks[inner_index]
    if outcome.n != len(block):
        raise NestFragError("SIZE_MISMATCH", f"outcome on [{outcome.n}] for a block of {len(block)}")

    def to_elements(positions):
        return [block[j - 1] for j in positions]

    zeta = Partition.from_labels(
        _split_labels(pi.zeta.assignment, [to_elements(b) for b in outcome.inner.zeta.blocks]))

    mother_label = pi.xi.assignment[block[0] - 1]
    new_groups = []
    mother = []
    for index, b in enumerate(outcome.inner.xi.blocks):
        if index == outcome.star_xi_block:
            mother = to_elements(b)
        else:
            new_groups.append(to_elements(b))
    labels = _split_labels(pi.xi.assignment, new_groups)
    for element in mother:
        labels[element - 1] = mother_label
    return NestedPartition(zeta, Partition.from_labels(labels))
