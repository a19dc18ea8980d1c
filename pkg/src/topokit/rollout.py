"""Graph-growing rollout engine with on-the-fly expert labels.

An episode grows one boundary chain vertex by vertex. At each step the
learner policy proposes a vertex, an expert produces the training label, and
the trajectory advances by the rounded convex combination
``v = round(beta * expert + (1 - beta) * learner)`` with beta fixed per
episode and decaying across patches. Two expert variants are provided:

* ``closest``: label = the gt chain pixel nearest the learner's proposal
  (not unique in general, and it never advances on its own);
* ``orientation``: label = the first chain pixel ahead whose orientation-map
  radian differs from the previous one by more than a threshold, falling
  back to a fixed chain stride. This label is a deterministic function of
  the state, which yields evenly spaced vertices on straight runs.

No learning happens here: policies are oracles (expert, noisy expert,
frozen offset, replay) so the mechanics can be exercised and traced. Traces
export as JSON-lines for downstream consumers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .geometry import (
    BoundaryGraph,
    BoundaryInstance,
    Vertex,
    circular_difference,
    densify,
)
from .ingest import Patch, round_half_away
from .labels import Raster, orientation_map
from .rng import PortableRng, derive_seed

EXPERT_KINDS = ("closest", "orientation")
TERMINAL_REACHED_END = "reached-end"
TERMINAL_MAX_STEPS = "max-steps"
TERMINAL_OFF_TRACK = "off-track"


class OffTrackError(ValueError):
    pass


@dataclass(frozen=True)
class RolloutConfig:
    theta: float = math.radians(15.0)  # orientation-change threshold
    d_max: int = 30  # max expert step, chain pixels
    beta0: float = 1.0
    beta_min: float = 0.0
    decay: float = 0.05  # beta decay rate per patch
    max_steps: int = 2000
    rounds: int = 3
    init_noise_sigma: float = 3.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.beta_min <= self.beta0 <= 1.0):
            raise ValueError("need 0 <= beta_min <= beta0 <= 1")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.d_max < 1:
            raise ValueError("d_max must be at least 1")


@dataclass(frozen=True)
class RolloutStep:
    learner: Vertex
    expert: Vertex
    vertex: Vertex
    beta: float
    radian_prev: float


@dataclass
class RolloutTrace:
    instance_id: int
    round_index: int
    steps: list[RolloutStep] = field(default_factory=list)
    terminal: str = TERMINAL_MAX_STEPS


@dataclass
class RolloutState:
    """What a policy gets to see when proposing the next vertex."""

    current: Vertex
    radian_prev: float
    step_index: int
    chain: tuple[Vertex, ...]
    chain_pos: int
    bounds: tuple[int, int]
    expert_action: Vertex | None
    rng: PortableRng


class LearnerPolicy(Protocol):
    def propose(self, state: RolloutState) -> Vertex: ...


def _clamp(v: Vertex, bounds: tuple[int, int]) -> Vertex:
    return Vertex(min(max(v.row, 0), bounds[0] - 1), min(max(v.col, 0), bounds[1] - 1))


class ExpertPolicy:
    """Proposes the expert's own action; pure imitation."""

    def propose(self, state: RolloutState) -> Vertex:
        if state.expert_action is None:
            raise RuntimeError("no expert action available in this state")
        return state.expert_action


class NoisyExpertPolicy:
    """Expert action plus a rounded Gaussian offset; one rng per episode."""

    def __init__(self, sigma: float) -> None:
        self.sigma = sigma

    def propose(self, state: RolloutState) -> Vertex:
        if state.expert_action is None:
            raise RuntimeError("no expert action available in this state")
        base = state.expert_action
        dr = round_half_away(state.rng.normal(0.0, self.sigma))
        dc = round_half_away(state.rng.normal(0.0, self.sigma))
        return _clamp(Vertex(base.row + dr, base.col + dc), state.bounds)


class FrozenOffsetPolicy:
    """Always proposes the current vertex shifted by a fixed offset."""

    def __init__(self, d_row: int, d_col: int) -> None:
        self.offset = (d_row, d_col)

    def propose(self, state: RolloutState) -> Vertex:
        v = Vertex(state.current.row + self.offset[0], state.current.col + self.offset[1])
        return _clamp(v, state.bounds)


class ReplayPolicy:
    """Replays a recorded proposal sequence; episode-exclusive."""

    def __init__(self, vertices: list[Vertex]) -> None:
        if not vertices:
            raise ValueError("replay policy needs at least one vertex")
        self.vertices = list(vertices)

    def propose(self, state: RolloutState) -> Vertex:
        idx = min(state.step_index, len(self.vertices) - 1)
        return _clamp(self.vertices[idx], state.bounds)


def expert_closest_pixel(vertex: Vertex, gt: BoundaryInstance) -> Vertex:
    """The gt chain pixel nearest to ``vertex``; ties go to the earlier
    position along the chain."""
    chain = densify(gt).vertices
    pos = _closest_chain_position(vertex, chain)
    return chain[pos]


def _closest_chain_position(vertex: Vertex, chain: tuple[Vertex, ...]) -> int:
    pts = np.asarray(chain, dtype=np.int64)
    d = pts - np.array([vertex.row, vertex.col], dtype=np.int64)
    dsq = (d * d).sum(axis=1)
    return int(np.argmin(dsq))  # argmin takes the first minimum: earlier chain index


def _chain_radians(chain: tuple[Vertex, ...], orientation: Raster) -> np.ndarray:
    values = orientation.data
    if values.ndim == 3:
        values = values[..., 0]
    return np.array([values[v.row, v.col] for v in chain], dtype=np.float64)


def _orientation_scan(
    pos: int, radian_prev: float, radians: np.ndarray, cfg: RolloutConfig
) -> int:
    """Next expert chain position: first orientation change beyond theta,
    else d_max pixels ahead (or the chain end if that is nearer)."""
    last = len(radians) - 1
    stop = min(pos + cfg.d_max, last)
    for k in range(pos + 1, stop + 1):
        if circular_difference(float(radians[k]), radian_prev) > cfg.theta:
            return k
    return stop


def expert_orientation(
    v_prev: Vertex,
    r_prev: float,
    gt: BoundaryInstance,
    orientation: Raster,
    cfg: RolloutConfig,
) -> Vertex:
    """Orientation-change expert label as a standalone operation.

    Raises OffTrackError when v_prev is farther than d_max from the chain.
    """
    chain = densify(gt).vertices
    pos = _attach_to_chain(v_prev, chain, cfg)
    radians = _chain_radians(chain, orientation)
    return chain[_orientation_scan(pos, r_prev, radians, cfg)]


def _attach_to_chain(vertex: Vertex, chain: tuple[Vertex, ...], cfg: RolloutConfig) -> int:
    pos = _closest_chain_position(vertex, chain)
    v = chain[pos]
    dsq = (v.row - vertex.row) ** 2 + (v.col - vertex.col) ** 2
    if dsq > cfg.d_max * cfg.d_max:
        raise OffTrackError(f"vertex {vertex} is {math.sqrt(dsq):.1f} px from the chain")
    return pos


def beta_schedule(patch_index: int, cfg: RolloutConfig) -> float:
    """Exponential decay with a floor: beta_i = max(beta_min, beta0 * e^(-decay*i))."""
    if patch_index < 0:
        raise ValueError("patch index must be non-negative")
    return max(cfg.beta_min, cfg.beta0 * math.exp(-cfg.decay * patch_index))


def interpolate_step(
    learner: Vertex, expert: Vertex, beta: float, bounds: tuple[int, int]
) -> Vertex:
    """Rounded convex combination of expert and learner, clamped in bounds."""
    row = round_half_away(beta * expert.row + (1.0 - beta) * learner.row)
    col = round_half_away(beta * expert.col + (1.0 - beta) * learner.col)
    return _clamp(Vertex(row, col), bounds)


def orient_for_rollout(graph: BoundaryGraph) -> BoundaryGraph:
    """Order every instance to start at its lexicographically smaller endpoint,
    matching the orientation map's default start choice."""
    out = []
    for inst in graph.instances:
        out.append(inst.reversed() if inst.vertices[-1] < inst.vertices[0] else inst)
    return BoundaryGraph(tuple(out))


def run_episode(
    patch: Patch,
    init_vertex: Vertex,
    policy: LearnerPolicy,
    expert_kind: str,
    cfg: RolloutConfig,
    *,
    beta: float | None = None,
    patch_index: int = 0,
    instance: BoundaryInstance | None = None,
    orientation: Raster | None = None,
    rng: PortableRng | None = None,
    round_index: int = 0,
) -> tuple[BoundaryInstance | None, RolloutTrace]:
    """Grow one chain from ``init_vertex`` along its nearest gt instance.

    Runs policy -> expert label -> interpolation until the expert reaches the
    instance end or ``cfg.max_steps`` elapses. Going off track (farther than
    d_max from the chain) terminates the episode and is recorded in the
    trace, not raised. Returns the generated instance (None if it collapsed
    to a single vertex) and the full trace.
    """
    if expert_kind not in EXPERT_KINDS:
        raise ValueError(f"expert_kind must be one of {EXPERT_KINDS}")
    bounds = patch.size
    if instance is None:
        graph = orient_for_rollout(patch.boundaries)
        instance = _nearest_instance_by_start(graph, init_vertex, cfg)
    dense = densify(instance)
    chain = dense.vertices
    if orientation is None:
        orientation, _ = orientation_map(BoundaryGraph((instance,)), bounds)
    radians = _chain_radians(chain, orientation)
    if beta is None:
        beta = beta_schedule(patch_index, cfg)
    if rng is None:
        rng = PortableRng(0)

    trace = RolloutTrace(instance_id=instance.id, round_index=round_index)
    pos = _attach_to_chain(init_vertex, chain, cfg)
    current = init_vertex
    radian_prev = float(radians[pos])
    last = len(chain) - 1
    generated: list[Vertex] = [init_vertex]

    for t in range(cfg.max_steps):
        if expert_kind == "orientation":
            star_pos = _orientation_scan(pos, radian_prev, radians, cfg)
            expert_action = chain[star_pos]
            state = RolloutState(
                current, radian_prev, t, chain, pos, bounds, expert_action, rng
            )
            learner_action = policy.propose(state)
        else:
            preview = chain[min(pos + 1, last)]  # chain successor, so oracle policies advance
            state = RolloutState(current, radian_prev, t, chain, pos, bounds, preview, rng)
            learner_action = policy.propose(state)
            star_pos = _closest_chain_position(learner_action, chain)
            expert_action = chain[star_pos]
        vertex = interpolate_step(learner_action, expert_action, beta, bounds)
        trace.steps.append(RolloutStep(learner_action, expert_action, vertex, beta, radian_prev))
        generated.append(vertex)
        current = vertex
        if star_pos == last:
            trace.terminal = TERMINAL_REACHED_END
            break
        try:
            pos = _attach_to_chain(current, chain, cfg)
        except OffTrackError:
            trace.terminal = TERMINAL_OFF_TRACK
            break
        radian_prev = float(radians[pos])
    else:
        trace.terminal = TERMINAL_MAX_STEPS

    deduped: list[Vertex] = [generated[0]]
    for v in generated[1:]:
        if v != deduped[-1]:
            deduped.append(v)
    produced = (
        BoundaryInstance(instance.id, tuple(deduped)) if len(deduped) >= 2 else None
    )
    return produced, trace


def _nearest_instance_by_start(
    graph: BoundaryGraph, init_vertex: Vertex, cfg: RolloutConfig
) -> BoundaryInstance:
    if len(graph) == 0:
        raise ValueError("patch has no gt instances to roll out")
    best = None
    for inst in graph.instances:
        s = inst.vertices[0]
        dsq = (s.row - init_vertex.row) ** 2 + (s.col - init_vertex.col) ** 2
        if best is None or (dsq, inst.id) < best[:2]:
            best = (dsq, inst.id, inst)
    if best[0] > cfg.d_max * cfg.d_max:
        raise OffTrackError(f"init vertex {init_vertex} is not near any instance start")
    return best[2]


def run_patch_rollout(
    patch: Patch,
    policy_factory,
    expert_kind: str,
    cfg: RolloutConfig,
    seed: int,
    patch_index: int = 0,
) -> tuple[BoundaryGraph, list[RolloutTrace]]:
    """Run cfg.rounds episodes per gt instance with noisy initial vertices.

    ``policy_factory()`` builds a fresh policy per episode, keeping policies
    episode-exclusive. Episodes are independent given the (immutable) patch,
    so this loop is trivially parallelizable; it is kept sequential here for
    deterministic trace ordering.
    """
    graph = orient_for_rollout(patch.boundaries)
    orientation, _ = orientation_map(graph, patch.size)
    beta = beta_schedule(patch_index, cfg)
    produced: list[BoundaryInstance] = []
    traces: list[RolloutTrace] = []
    next_id = 1
    for round_index in range(cfg.rounds):
        for inst in sorted(graph.instances, key=lambda i: i.id):
            rng = PortableRng(derive_seed(seed, "episode", round_index, inst.id))
            start = inst.vertices[0]
            init = _clamp(
                Vertex(
                    start.row + round_half_away(rng.normal(0.0, cfg.init_noise_sigma)),
                    start.col + round_half_away(rng.normal(0.0, cfg.init_noise_sigma)),
                ),
                patch.size,
            )
            instance, trace = run_episode(
                patch,
                init,
                policy_factory(),
                expert_kind,
                cfg,
                beta=beta,
                instance=inst,
                orientation=orientation,
                rng=rng,
                round_index=round_index,
            )
            traces.append(trace)
            if instance is not None:
                produced.append(BoundaryInstance(next_id, instance.vertices))
                next_id += 1
    return BoundaryGraph(tuple(produced)), traces
