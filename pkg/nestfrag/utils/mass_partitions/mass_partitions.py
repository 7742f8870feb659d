import json
import math
from dataclasses import dataclass

import nestfrag.globals as globals
from nestfrag.errors import NestFragError


def _tol():
    return globals.CONFIG['tolerance']


def _positive_sorted(values, what):
    values = [float(v) for v in values]
    for v in values:
        if math.isnan(v) or v < -_tol():
            raise NestFragError("NEGATIVE", f"{what} has a negative entry {v}")
    return tuple(sorted((v for v in values if v > 0.0), reverse=True))


@dataclass(frozen=True)
class MassPartition:
    """Nonincreasing frequencies s_1 >= s_2 >= ... > 0 with sum at most 1."""

    s: tuple = ()

    @property
    def dust(self):
        return max(0.0, 1.0 - math.fsum(self.s))

    def is_identity(self):
        return bool(self.s) and self.s[0] >= 1.0 - _tol()

    def to_list(self):
        return list(self.s)


@dataclass(frozen=True)
class BivariateMassPartition:
    """Frequencies (u, s_rows, u_bar, s_bar) of a fragmenting inner block.

    u are the inner frequencies kept in the mother outer block of frequency u_bar;
    row k of s_rows holds the inner frequencies of the k-th new outer block, whose
    frequency is s_bar[k].
    """

    u: tuple = ()
    s_rows: tuple = ()
    u_bar: float = 0.0
    s_bar: tuple = ()

    @property
    def mother_dust(self):
        return max(0.0, self.u_bar - math.fsum(self.u))

    def row_dust(self, k):
        return max(0.0, self.s_bar[k] - math.fsum(self.s_rows[k]))

    @property
    def isolated_mass(self):
        return max(0.0, 1.0 - self.u_bar - math.fsum(self.s_bar))

    def is_identity(self):
        return self.u_bar >= 1.0 - _tol() and bool(self.u) and self.u[0] >= 1.0 - _tol()

    def to_dict(self):
        return {
            "u": list(self.u),
            "u_bar": self.u_bar,
            "s_bar": list(self.s_bar),
            "s_rows": [list(row) for row in self.s_rows],
        }


# Canonical univariate mass partition
def validate_mass(raw):
    s = _positive_sorted(raw, "mass partition")
    total = math.fsum(s)
    if total > 1.0 + _tol():
        raise NestFragError("SUM_EXCEEDS_ONE", f"frequencies sum to {total}")
    if total > 1.0:
        s = tuple(v / total for v in s)
    return MassPartition(s)


def canonicalize_bivariate(u, s_rows, u_bar, s_bar):
    """
    Sort and validate raw bivariate frequencies.

    Rows are sorted internally, then reordered by decreasing s_bar with ties broken
    by lexicographically decreasing rows. New outer blocks of zero frequency are dropped.

    Returns:
        BivariateMassPartition
    """
    tol = _tol()
    u = _positive_sorted(u, "u")
    u_bar = float(u_bar)
    if math.isnan(u_bar) or u_bar < -tol:
        raise NestFragError("NEGATIVE", f"u_bar = {u_bar}")
    u_bar = max(u_bar, 0.0)
    if len(s_rows) != len(s_bar):
        raise NestFragError("SHAPE_MISMATCH", f"{len(s_rows)} rows for {len(s_bar)} outer frequencies")
    if math.fsum(u) > u_bar + tol:
        raise NestFragError("ROW_SUM_EXCEEDS_BAR", f"sum of u {math.fsum(u)} exceeds u_bar {u_bar}")

    pairs = []
    for bar, row in zip(s_bar, s_rows):
        bar = float(bar)
        if math.isnan(bar) or bar < -tol:
            raise NestFragError("NEGATIVE", f"s_bar entry {bar}")
        row = _positive_sorted(row, "s row")
        if math.fsum(row) > bar + tol:
            raise NestFragError("ROW_SUM_EXCEEDS_BAR", f"row {list(row)} exceeds its outer frequency {bar}")
        if bar > 0.0:
            pairs.append((bar, row))
    pairs.sort(reverse=True)

    total = u_bar + math.fsum(bar for bar, _ in pairs)
    if total > 1.0 + tol:
        raise NestFragError("TOTAL_EXCEEDS_ONE", f"u_bar + sum(s_bar) = {total}")
    return BivariateMassPartition(
        u=u,
        s_rows=tuple(row for _, row in pairs),
        u_bar=u_bar,
        s_bar=tuple(bar for bar, _ in pairs),
    )


# ---Parameters---
@dataclass(frozen=True)
class OuterAtom:
    rate: float
    s: MassPartition


@dataclass(frozen=True)
class InnerAtom:
    rate: float
    p: BivariateMassPartition


@dataclass(frozen=True)
class FragmentationParams:
    """Erosion coefficients plus finite-atom outer and inner dislocation measures."""

    c_out: float = 0.0
    c_in1: float = 0.0
    c_in2: float = 0.0
    nu_out: tuple = ()
    nu_in: tuple = ()

    def __post_init__(self):
        for name in ("c_out", "c_in1", "c_in2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise NestFragError("BAD_PARAMS", f"{name} must be a nonnegative rate, got {value}")
        for atom in self.nu_out + self.nu_in:
            if not math.isfinite(atom.rate) or atom.rate <= 0:
                raise NestFragError("BAD_PARAMS", f"atom rates must be positive, got {atom.rate}")
        if any(atom.s.is_identity() for atom in self.nu_out):
            raise NestFragError("BAD_PARAMS", "nu_out may not charge the trivial mass partition (1)")
        if any(atom.p.is_identity() for atom in self.nu_in):
            raise NestFragError("BAD_PARAMS", "nu_in may not charge the element 1")

    def is_zero(self):
        return self.c_out == self.c_in1 == self.c_in2 == 0 and not self.nu_out and not self.nu_in

    @classmethod
    def from_dict(cls, data):
        try:
            nu_out = tuple(
                OuterAtom(float(a["rate"]), validate_mass(a.get("s", [])))
                for a in data.get("nu_out", []))
            nu_in = tuple(
                InnerAtom(float(a["rate"]), canonicalize_bivariate(
                    a.get("u", []), a.get("s_rows", []), a.get("u_bar", 0.0), a.get("s_bar", [])))
                for a in data.get("nu_in", []))
            return cls(
                c_out=float(data.get("c_out", 0.0)),
                c_in1=float(data.get("c_in1", 0.0)),
                c_in2=float(data.get("c_in2", 0.0)),
                nu_out=nu_out,
                nu_in=nu_in,
            )
        except NestFragError:
            raise
        except (KeyError, TypeError, AttributeError, ValueError) as e:
            raise NestFragError("BAD_PARAMS", f"malformed parameters: {e}")

    def to_dict(self):
        return {
            "c_out": self.c_out,
            "c_in1": self.c_in1,
            "c_in2": self.c_in2,
            "nu_out": [{"rate": a.rate, "s": a.s.to_list()} for a in self.nu_out],
            "nu_in": [dict(rate=a.rate, **a.p.to_dict()) for a in self.nu_in],
        }


def load_params(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise NestFragError("IO", f"cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise NestFragError("BAD_PARAMS", f"{path} is not valid JSON: {e}")
    return FragmentationParams.from_dict(data)


# ---Binary branching---
@dataclass(frozen=True)
class BinaryMeasures:
    """Finite measures on [0,1] as tuples of (rate, x) atoms."""

    out: tuple = ()
    in1: tuple = ()
    in2: tuple = ()
    in3: tuple = ()


def _is_pair(values):
    tol = _tol()
    return len(values) == 2 and values[1] > tol and abs(values[0] + values[1] - 1.0) <= tol


def binary_shape(p):
    """Which binary inner shape p has: 1, 2, 3, or None."""
    tol = _tol()
    if _is_pair(p.u) and abs(p.u_bar - 1.0) <= tol and not p.s_bar:
        return 1
    if not p.u and p.u_bar <= tol and len(p.s_bar) == 1 and abs(p.s_bar[0] - 1.0) <= tol \
            and _is_pair(p.s_rows[0]):
        return 2
    if len(p.u) == 1 and 0.0 < p.u[0] < 1.0 - tol and abs(p.u_bar - p.u[0]) <= tol \
            and len(p.s_bar) == 1 and abs(p.s_bar[0] - (1.0 - p.u[0])) <= tol \
            and len(p.s_rows[0]) == 1 and abs(p.s_rows[0][0] - p.s_bar[0]) <= tol:
        return 3
    return None


def binary_project(params):
    out = []
    for atom in params.nu_out:
        if not _is_pair(atom.s.s):
            raise NestFragError("NOT_BINARY", f"outer atom {atom.s.to_list()} is not a binary split")
        x = atom.s.s[0]
        out += [(atom.rate, x), (atom.rate, 1.0 - x)]

    in1, in2, in3 = [], [], []
    for atom in params.nu_in:
        shape = binary_shape(atom.p)
        if shape == 1:
            x = atom.p.u[0]
            in1 += [(atom.rate, x), (atom.rate, 1.0 - x)]
        elif shape == 2:
            x = atom.p.s_rows[0][0]
            in2 += [(atom.rate, x), (atom.rate, 1.0 - x)]
        elif shape == 3:
            in3.append((atom.rate, atom.p.u[0]))
        else:
            raise NestFragError("NOT_BINARY", f"inner atom {atom.p.to_dict()} matches no binary shape")
    return BinaryMeasures(tuple(out), tuple(in1), tuple(in2), tuple(in3))
