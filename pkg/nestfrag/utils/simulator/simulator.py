import enum
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

import nestfrag
import nestfrag.globals as globals
from nestfrag.errors import NestFragError
from nestfrag.utils.mass_partitions.mass_partitions import FragmentationParams
from nestfrag.utils.paintbox.paintbox import (
    RngHandle,
    inner_labels,
    labels_to_outcome,
    labels_to_partition,
    univariate_labels,
)
from nestfrag.utils.partitions.partitions import (
    NestedPartition,
    erode_inner,
    erode_outer,
    format_nested,
    graft_inner_split,
    graft_outer_split,
    nested_leq,
    parse_nested,
    restrict,
)

logger = logging.getLogger(__name__)


class Mechanism(enum.Enum):
    E_OUT = "E_OUT"
    E_IN1 = "E_IN1"
    E_IN2 = "E_IN2"
    D_OUT = "D_OUT"
    D_IN = "D_IN"


@dataclass(frozen=True)
class TrajectoryEvent:
    time: float
    mechanism: Mechanism
    atom: object
    target_block: tuple
    state_after: NestedPartition

    @property
    def mech(self):
        if self.atom is None:
            return self.mechanism.value
        return f"{self.mechanism.value}:{self.atom}"

    def to_dict(self):
        return {
            "t": self.time,
            "mech": self.mech,
            "block": list(self.target_block),
            "zeta": str(self.state_after.zeta),
            "xi": str(self.state_after.xi),
        }

    @classmethod
    def from_dict(cls, data):
        name, _, atom = data["mech"].partition(":")
        zeta_xi = f"{data['zeta']} ; {data['xi']}"
        return cls(
            time=float(data["t"]),
            mechanism=Mechanism(name),
            atom=int(atom) if atom else None,
            target_block=tuple(data["block"]),
            state_after=parse_nested(zeta_xi),
        )


@dataclass(frozen=True)
class Trajectory:
    """Recorded path of the restricted chain: jump events only, in time order."""

    n: int
    params: FragmentationParams
    seed: int
    initial: NestedPartition
    events: tuple
    end_time: float
    stream: int = 0
    run_config: dict = field(default_factory=dict, compare=False)

    @property
    def final_state(self):
        return self.events[-1].state_after if self.events else self.initial

    def state_at(self, t):
        state = self.initial
        for event in self.events:
            if event.time > t:
                break
            state = event.state_after
        return state

    def jumps(self):
        """(time, before, after) for every recorded event."""
        out = []
        state = self.initial
        for event in self.events:
            out.append((event.time, state, event.state_after))
            state = event.state_after
        return out

    def header(self):
        return {
            "version": nestfrag.__version__,
            "run_config": self.run_config,
            "n": self.n,
            "seed": self.seed,
            "stream": self.stream,
            "initial": format_nested(self.initial),
            "end_time": self.end_time,
            "params": self.params.to_dict(),
        }

    def write_jsonl(self, path):
        folder = os.path.dirname(path)
        try:
            if folder:
                os.makedirs(folder, exist_ok=True)
            with open(path, "w") as f:
                f.write(json.dumps({"header": self.header()}) + "\n")
                for event in self.events:
                    f.write(json.dumps(event.to_dict()) + "\n")
        except OSError as e:
            raise NestFragError("IO", f"cannot write {path}: {e}")

    @classmethod
    def read_jsonl(cls, path):
        try:
            with open(path) as f:
                lines = [json.loads(line) for line in f if line.strip()]
        except OSError as e:
            raise NestFragError("IO", f"cannot read {path}: {e}")
        except json.JSONDecodeError as e:
            raise NestFragError("PARSE", f"{path} is not JSONL: {e}")
        if not lines or "header" not in lines[0]:
            raise NestFragError("PARSE", f"{path} has no header line")
        header = lines[0]["header"]
        try:
            return cls(
                n=int(header["n"]),
                params=FragmentationParams.from_dict(header["params"]),
                seed=header["seed"],
                initial=parse_nested(header["initial"]),
                events=tuple(TrajectoryEvent.from_dict(line) for line in lines[1:]),
                end_time=float(header["end_time"]),
                stream=int(header.get("stream", 0)),
                run_config=header.get("run_config", {}),
            )
        except NestFragError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise NestFragError("PARSE", f"malformed trajectory {path}: {e}")


# ---Event race---
@dataclass(frozen=True)
class _Clock:
    mechanism: Mechanism
    atom: object
    rate: float
    anchors: tuple


def _clocks(state, params):
    """
    Exponential clocks of the race, one class per mechanism (and atom).

    Targets are named by an anchor: the element itself for inner erosions, the
    least element of the block otherwise. Targets whose every outcome is the
    identity at any level are left out.
    """
    zeta, xi = state.zeta, state.xi
    outer_sizes = [len(b) for b in xi.blocks]
    siblings = [len(state.inner_of_outer[o]) for o in state.outer_of_inner]

    elements = range(1, state.n + 1)
    in1 = tuple(e for e in elements if len(zeta.block_of(e)) > 1)
    in2 = tuple(e for e in elements if outer_sizes[xi.assignment[e - 1]] > 1)
    e_out = tuple(b[0] for i, b in enumerate(zeta.blocks) if siblings[i] > 1)
    d_out = tuple(c[0] for o, c in enumerate(xi.blocks) if len(state.inner_of_outer[o]) > 1)
    d_in = tuple(b[0] for i, b in enumerate(zeta.blocks)
                 if len(b) > 1 or siblings[i] > 1)

    clocks = [
        _Clock(Mechanism.E_OUT, None, params.c_out, e_out),
        _Clock(Mechanism.E_IN1, None, params.c_in1, in1),
        _Clock(Mechanism.E_IN2, None, params.c_in2, in2),
    ]
    clocks += [_Clock(Mechanism.D_OUT, a, atom.rate, d_out) for a, atom in enumerate(params.nu_out)]
    clocks += [_Clock(Mechanism.D_IN, a, atom.rate, d_in) for a, atom in enumerate(params.nu_in)]
    return [c for c in clocks if c.rate > 0 and c.anchors]


def _draw_uniforms(state, mechanism, anchor, rng):
    # one uniform per element (inner dislocation) or per inner block (outer dislocation)
    if mechanism is Mechanism.D_IN:
        return rng.random(len(state.zeta.block_of(anchor)))
    if mechanism is Mechanism.D_OUT:
        return rng.random(len(state.inner_of_outer[state.xi.assignment[anchor - 1]]))
    return None


def _target_block(state, mechanism, anchor):
    if mechanism in (Mechanism.E_IN1, Mechanism.E_IN2):
        return (anchor,)
    if mechanism is Mechanism.D_OUT:
        return state.xi.block_of(anchor)
    return state.zeta.block_of(anchor)


def apply_event(state, params, mechanism, atom, anchor, uniforms):
    """
    Resolve one clock ring on a state of any level.

    The uniforms are those drawn at the leading level; a lower level sees the
    prefix belonging to its own elements (or inner blocks), which come first in
    canonical order. Returns None when the target lies outside [n].
    """
    if anchor > state.n:
        return None
    if mechanism is Mechanism.E_OUT:
        return erode_outer(state, state.zeta.assignment[anchor - 1])
    if mechanism is Mechanism.E_IN1:
        return erode_inner(state, anchor, False)
    if mechanism is Mechanism.E_IN2:
        return erode_inner(state, anchor, True)
    if mechanism is Mechanism.D_OUT:
        outer = state.xi.assignment[anchor - 1]
        k = len(state.inner_of_outer[outer])
        grouping = labels_to_partition(univariate_labels(params.nu_out[atom].s, uniforms[:k]))
        return graft_outer_split(state, outer, grouping)
    inner = state.zeta.assignment[anchor - 1]
    m = len(state.zeta.blocks[inner])
    outcome = labels_to_outcome(inner_labels(params.nu_in[atom].p, uniforms[:m]))
    return graft_inner_split(state, inner, outcome)


def _check_run_args(params, n, initial, horizon, max_events):
    if not isinstance(params, FragmentationParams):
        raise NestFragError("BAD_PARAMS", "params must be FragmentationParams")
    if n < 1:
        raise NestFragError("BAD_RANGE", "n must be positive")
    if horizon is not None and not horizon > 0:
        raise NestFragError("HORIZON_NONPOSITIVE", f"horizon must be positive, got {horizon}")
    if horizon is None and max_events is None:
        max_events = globals.CONFIG['default_max_events']
    if max_events is not None and max_events < 0:
        raise NestFragError("BAD_RANGE", "max_events must be nonnegative")
    initial = NestedPartition.coarsest(n) if initial is None else initial
    if initial.n != n:
        raise NestFragError("SIZE_MISMATCH", f"initial state on [{initial.n}] for n = {n}")
    return initial, max_events


def _simulate(params, m, levels, initial, horizon, max_events, seed, stream, log_null_events):
    """
    Run the race at level m and replay every ring on the lower levels.

    max_events bounds clock rings, null rings included.

    Returns:
        tuple: (events per level, end time)
    """
    rng = RngHandle(seed, stream).generator()
    leader = initial
    states = [restrict(initial, n) for n in levels]
    events = [[] for _ in levels]
    t = 0.0
    rings = 0
    limit = math.inf if horizon is None else horizon

    while max_events is None or rings < max_events:
        clocks = _clocks(leader, params)
        weights = np.array([c.rate * len(c.anchors) for c in clocks], dtype=float)
        total = weights.sum()
        if total <= 0.0:
            break
        dt = rng.exponential(1.0 / total)
        if t + dt > limit:
            break
        t += dt
        rings += 1

        index = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side='right'))
        clock = clocks[min(index, len(clocks) - 1)]
        anchor = clock.anchors[int(rng.integers(len(clock.anchors)))]
        uniforms = _draw_uniforms(leader, clock.mechanism, anchor, rng)
        block = _target_block(leader, clock.mechanism, anchor)

        after = apply_event(leader, params, clock.mechanism, clock.atom, anchor, uniforms)
        if after == leader:
            if log_null_events:
                logger.debug("null event %s on %s at t=%.6g", clock.mechanism.value, list(block), t)
            continue
        leader = after

        for j, n in enumerate(levels):
            moved = apply_event(states[j], params, clock.mechanism, clock.atom, anchor, uniforms)
            if moved is None or moved == states[j]:
                continue
            states[j] = moved
            events[j].append(TrajectoryEvent(
                t, clock.mechanism, clock.atom, tuple(e for e in block if e <= n), moved))

    end_time = horizon if horizon is not None else t
    return events, end_time


def run(params, n, initial=None, horizon=None, max_events=None, seed=0, stream=0,
        log_null_events=False, run_config=None):
    """
    Simulate the restricted chain on [n] by a race of exponential clocks.

    Args:
        params (FragmentationParams): Erosion coefficients and finite dislocation atoms
        n (int): Number of elements
        initial (NestedPartition): Starting state, the coarsest state when omitted
        horizon (float): Time horizon; None runs until max_events rings or absorption
        max_events (int): Bound on clock rings
        seed (int): RNG seed
        stream (int): RNG stream, one per replica

    Returns:
        Trajectory
    """
    initial, max_events = _check_run_args(params, n, initial, horizon, max_events)
    logger.info("simulating n=%d horizon=%s seed=%s stream=%d", n, horizon, seed, stream)
    events, end_time = _simulate(params, n, [n], initial, horizon, max_events, seed, stream,
                                 log_null_events)
    logger.info("finished with %d events, end time %.6g", len(events[0]), end_time)
    return Trajectory(n, params, seed, initial, tuple(events[0]), end_time, stream,
                      dict(run_config or {}))


def coupled_run(params, m, n, initial=None, horizon=None, max_events=None, seed=0, stream=0):
    """
    Simulate on [m] and [n] from one event stream.

    The [n] path replays every ring of the [m] race on its own state, so that
    restrict(state_m(t), n) == state_n(t) at all times.

    Returns:
        tuple: (Trajectory on [m], Trajectory on [n])
    """
    if not 1 <= n <= m:
        raise NestFragError("BAD_RANGE", f"need 1 <= n <= m, got n={n}, m={m}")
    initial, max_events = _check_run_args(params, m, initial, horizon, max_events)
    events, end_time = _simulate(params, m, [m, n], initial, horizon, max_events, seed, stream, False)
    return (
        Trajectory(m, params, seed, initial, tuple(events[0]), end_time, stream),
        Trajectory(n, params, seed, restrict(initial, n), tuple(events[1]), end_time, stream),
    )


# ---Path properties---
def branching_violations(before, after):
    """
    Names of the path properties a single jump breaks.

    "monotone": after is not below before. "outer_branching": the change touches
    more than one outer block of before. "inner_branching": more than one inner
    block of before fragments.
    """
    found = []
    if not nested_leq(after, before):
        return ["monotone"]
    zeta_kept = set(after.zeta.blocks)
    xi_kept = set(after.xi.blocks)
    changed_inner = [i for i, b in enumerate(before.zeta.blocks) if b not in zeta_kept]
    changed_outer = {before.outer_of_inner[i] for i in changed_inner}
    changed_outer |= {o for o, c in enumerate(before.xi.blocks) if c not in xi_kept}
    if len(changed_outer) > 1:
        found.append("outer_branching")
    if len(changed_inner) > 1:
        found.append("inner_branching")
    return found
