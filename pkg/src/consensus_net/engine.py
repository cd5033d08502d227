"""Synchronous discrete-time block propagation and mining.

One call to :func:`step` runs, in order:

1. in-flight messages advance by one step,
2. messages that have arrived are delivered and the adoption rules applied
   (:func:`deliver_and_adopt`),
3. scheduled seed blocks and due miners create blocks (:func:`mine_phase`),
4. the step counter advances.

In-flight messages are kept in a calendar keyed by arrival step, so
phase 1 costs nothing; ``InFlight.remaining`` is derived from the calendar.
Mining countdowns are likewise stored as the step at which the node will
mine.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import IntegrityError, ParameterError
from .graph import Graph
from .seeds import final_coin, tie_draw

GENESIS = 0


@dataclass(frozen=True)
class Block:
    id: int
    parent_id: int | None
    height: int
    origin: int
    minted_step: int


@dataclass
class NodeState:
    node: int
    tip: int = GENESIS
    height: int = 0
    # step during which the node mines; None means EXHAUSTED (mining off)
    due: int | None = None
    power: float = 1.0


@dataclass(frozen=True)
class InFlight:
    block: int
    sender: int
    receiver: int
    remaining: int


@dataclass(frozen=True)
class MiningConfig:
    rate: float
    powers: tuple[float, ...] | None = None
    target_system_time: float | None = None

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterError(f"mining rate must be positive, got {self.rate}")
        if self.powers is not None and any(not c > 0 for c in self.powers):
            raise ParameterError("computational powers must be positive")

    @classmethod
    def calibrated(cls, n: int, target_system_time: float, powers: Sequence[float] | None = None):
        return cls(calibrate_lambda(n, target_system_time), tuple(powers) if powers else None,
                   target_system_time)

    def node_rate(self, i: int) -> float:
        return self.rate * (self.powers[i] if self.powers is not None else 1.0)


@dataclass(frozen=True)
class EngineConfig:
    mining: MiningConfig | None = None
    echo_to_sender: bool = False
    relay_ignored: bool = False
    check_invariants: bool = False
    record_deliveries: bool = False

    @property
    def mining_enabled(self) -> bool:
        return self.mining is not None


def sample_mining_countdown(rate: float, rng: np.random.Generator) -> int:
    """``ceil(X)`` with ``X ~ Exponential(rate)``; always at least 1."""
    x = rng.exponential(1.0 / rate)
    return max(1, math.ceil(x))


def calibrate_lambda(n: int, target_system_time: float) -> float:
    """Per-miner rate giving an expected minimum mining time of ``target_system_time``.

    Continuous-time calibration ``1 / (n * T)``.  With integer countdowns the
    realised mean is slightly larger; that bias is left uncorrected.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not target_system_time > 0:
        raise ParameterError(f"target time must be positive, got {target_system_time}")
    return 1.0 / (n * target_system_time)


class SimState:
    def __init__(self, graph: Graph, config: EngineConfig | None = None, seed: int = 0,
                 tie_seed: int | None = None):
        self.graph = graph
        self.config = config or EngineConfig()
        self.seed = seed
        self.tie_seed = seed if tie_seed is None else tie_seed
        self.rng = np.random.default_rng(seed)
        self.step = 0
        self.blocks: list[Block] = [Block(GENESIS, None, 0, -1, 0)]
        n = graph.node_count
        powers = self.config.mining.powers if self.config.mining else None
        if powers is not None and len(powers) != n:
            raise ParameterError(f"{len(powers)} powers given for {n} nodes")
        self.nodes = [NodeState(i, power=powers[i] if powers else 1.0) for i in range(n)]
        self._adj = graph.adjacency
        self.tip_counts: dict[int, int] = {GENESIS: n}
        self._calendar: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
        self._sent_at: dict[tuple[int, int, int], int] = {}
        self._due: dict[int, set[int]] = defaultdict(set)
        self.scheduled: dict[int, list[int]] = defaultdict(list)
        self.seen: list[set[int]] | None = [set() for _ in range(n)] if self.config.relay_ignored else None
        self.last_new_blocks = 0
        self.last_delivered = 0
        self.deliveries: list[tuple[int, int, int, int, int]] = []
        if self.config.mining_enabled:
            # initial countdowns count down from step 0 onwards
            for node in self.nodes:
                k = sample_mining_countdown(self.config.mining.node_rate(node.node), self.rng)
                self._set_due(node, k - 1)

    # -- inspection -----------------------------------------------------------

    @property
    def inflight(self) -> list[InFlight]:
        out = []
        for arrive, msgs in sorted(self._calendar.items()):
            for b, frm, to in msgs:
                out.append(InFlight(b, frm, to, arrive - self.step + 1))
        return out

    def countdown(self, i: int) -> int | None:
        """Mining countdown as seen at the start of the current step."""
        due = self.nodes[i].due
        return None if due is None else due - self.step + 1

    def tips(self) -> np.ndarray:
        return np.fromiter((nd.tip for nd in self.nodes), dtype=np.int64, count=len(self.nodes))

    def heights(self) -> np.ndarray:
        return np.fromiter((nd.height for nd in self.nodes), dtype=np.int64, count=len(self.nodes))

    def is_ancestor(self, anc: int, block: int) -> bool:
        """True if ``anc`` is ``block`` or lies on its parent chain."""
        target = self.blocks[anc].height
        b = self.blocks[block]
        while b.height > target:
            b = self.blocks[b.parent_id]
        return b.id == anc

    # -- mutation helpers -----------------------------------------------------

    def _set_due(self, node: NodeState, due: int | None) -> None:
        if node.due is not None:
            bucket = self._due.get(node.due)
            if bucket is not None:
                bucket.discard(node.node)
                if not bucket:
                    del self._due[node.due]
        node.due = due
        if due is not None:
            self._due[due].add(node.node)

    def _resample(self, node: NodeState) -> None:
        if self.config.mining_enabled:
            k = sample_mining_countdown(self.config.mining.node_rate(node.node), self.rng)
            self._set_due(node, self.step + k)

    def _broadcast(self, i: int, block: int, exclude: set[int] = frozenset()) -> None:
        for k, t in self._adj[i]:
            if k in exclude:
                continue
            arrive = self.step + t
            self._calendar[arrive].append((block, i, k))
            if self.config.record_deliveries:
                self._sent_at[(block, i, k)] = self.step

    def _new_block(self, parent: int, origin: int) -> int:
        if parent >= len(self.blocks):
            raise IntegrityError(f"unknown parent block {parent}")
        bid = len(self.blocks)
        self.blocks.append(Block(bid, parent, self.blocks[parent].height + 1, origin, self.step))
        return bid

    def schedule_seed(self, node: int, at_step: int) -> None:
        """Have ``node`` create a block on genesis during ``at_step``'s mine phase.

        Skipped if the node has moved off genesis by then.
        """
        if at_step < self.step:
            raise ParameterError("cannot schedule a seed in the past")
        self.scheduled[at_step].append(node)

    def add_block(self, parent: int, origin: int) -> int:
        """Create a block without adopting or broadcasting it."""
        return self._new_block(parent, origin)

    def set_tip(self, i: int, block: int) -> None:
        """Place node ``i`` on ``block`` directly (test fixtures, warm starts)."""
        nd = self.nodes[i]
        tc = self.tip_counts
        tc[nd.tip] -= 1
        if not tc[nd.tip]:
            del tc[nd.tip]
        tc[block] = tc.get(block, 0) + 1
        nd.tip = block
        nd.height = self.blocks[block].height

    def send(self, block: int, sender: int, receiver: int, delay: int = 1) -> None:
        """Queue a message arriving ``delay`` steps from now."""
        if delay < 1:
            raise ParameterError("delay must be >= 1")
        self._calendar[self.step + delay - 1].append((block, sender, receiver))
        if self.config.record_deliveries:
            self._sent_at[(block, sender, receiver)] = self.step - 1

    def has_pending(self) -> bool:
        return any(k >= self.step for k, v in self._calendar.items() if v) or any(
            k >= self.step for k in self.scheduled
        )


def _adopt(s: SimState, i: int, block: int) -> None:
    nd = s.nodes[i]
    b = s.blocks[block]
    if b.height <= nd.height:
        raise IntegrityError(f"node {i} adopting block {block} at height {b.height} <= {nd.height}")
    tc = s.tip_counts
    tc[nd.tip] -= 1
    if not tc[nd.tip]:
        del tc[nd.tip]
    tc[block] = tc.get(block, 0) + 1
    nd.tip = block
    nd.height = b.height
    if s.seen is not None:
        s.seen[i].add(block)


def deliver_and_adopt(s: SimState) -> SimState:
    msgs = s._calendar.pop(s.step, [])
    s.last_delivered = len(msgs)
    if not msgs:
        return s
    snapshot = s.tips()
    by_receiver: dict[int, dict[int, list[int]]] = defaultdict(lambda: defaultdict(list))
    for block, frm, to in msgs:
        if block >= len(s.blocks):
            raise IntegrityError(f"delivered unknown block {block}")
        parent = s.blocks[block].parent_id
        if parent is None or parent >= len(s.blocks):
            raise IntegrityError(f"block {block} references unknown parent {parent}")
        by_receiver[to][block].append(frm)
        if s.config.record_deliveries:
            s.deliveries.append((block, frm, to, s._sent_at.pop((block, frm, to)), s.step))

    adoptions: list[tuple[int, int, list[int]]] = []
    relays: list[tuple[int, int, list[int]]] = []
    for i in sorted(by_receiver):
        arrived = by_receiver[i]
        h = s.nodes[i].height
        cands = sorted(b for b in arrived if s.blocks[b].height > h)
        if s.seen is not None:
            for b in sorted(arrived):
                if b not in cands and b not in s.seen[i]:
                    s.seen[i].add(b)
                    relays.append((i, b, arrived[b]))
        if not cands:
            continue
        if len(cands) == 1:
            choice = cands[0]
        else:
            nbrs = [k for k, _ in s._adj[i]]
            counts = [sum(1 for v in nbrs if s.is_ancestor(c, int(snapshot[v]))) for c in cands]
            best = max(counts)
            tied = [c for c, k in zip(cands, counts) if k == best]
            choice = tied[tie_draw(s.tie_seed, s.step, i) % len(tied)] if len(tied) > 1 else tied[0]
        adoptions.append((i, choice, arrived[choice]))

    for i, block, senders in adoptions:
        _adopt(s, i, block)
        s._resample(s.nodes[i])
        s._broadcast(i, block, set() if s.config.echo_to_sender else set(senders))
    for i, block, senders in relays:
        s._broadcast(i, block, set() if s.config.echo_to_sender else set(senders))
    return s


def mine_phase(s: SimState) -> SimState:
    created = 0
    seeded = set()
    for i in s.scheduled.pop(s.step, []):
        nd = s.nodes[i]
        if nd.tip != GENESIS:
            continue
        bid = s._new_block(GENESIS, i)
        _adopt(s, i, bid)
        s._resample(nd)
        s._broadcast(i, bid)
        seeded.add(i)
        created += 1
    if s.config.mining_enabled:
        for i in sorted(s._due.pop(s.step, ())):
            nd = s.nodes[i]
            nd.due = None
            if i in seeded:
                s._resample(nd)
                continue
            bid = s._new_block(nd.tip, i)
            _adopt(s, i, bid)
            s._resample(nd)
            s._broadcast(i, bid)
            created += 1
    s.last_new_blocks = created
    return s


def check_invariants(s: SimState, prev_heights: np.ndarray | None = None) -> None:
    for nd in s.nodes:
        b = s.blocks[nd.tip]
        if b.height != nd.height:
            raise IntegrityError(f"node {nd.node}: height {nd.height} != tip height {b.height}")
        while b.parent_id is not None:
            p = s.blocks[b.parent_id]
            if p.height != b.height - 1:
                raise IntegrityError(f"block {b.id}: non-consecutive heights")
            b = p
        if b.id != GENESIS:
            raise IntegrityError(f"node {nd.node}: chain does not reach genesis")
    if prev_heights is not None and np.any(s.heights() < prev_heights):
        raise IntegrityError("a node's height decreased")


def step(s: SimState) -> SimState:
    prev = s.heights() if s.config.check_invariants else None
    deliver_and_adopt(s)
    mine_phase(s)
    if prev is not None:
        check_invariants(s, prev)
    s.step += 1
    return s


# -- stopping rules and outcomes ----------------------------------------------


@dataclass(frozen=True)
class ConsensusOnFork:
    a: int
    b: int


@dataclass(frozen=True)
class AllCommitted:
    a: int
    b: int


@dataclass(frozen=True)
class MaxSteps:
    steps: int


StopRule = ConsensusOnFork | AllCommitted | MaxSteps


@dataclass(frozen=True)
class RunOutcome:
    winner: str
    steps: int
    stop_reason: str
    seed: int
    mode: str
    winner_block: int | None = None

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in
                       (("winner", self.winner), ("steps", self.steps),
                        ("stop_reason", self.stop_reason), ("seed", self.seed), ("mode", self.mode)))


def fork_counts(s: SimState, a: int, b: int | None) -> tuple[int, int]:
    na = nb = 0
    for nd in s.nodes:
        if nd.tip == GENESIS:
            continue
        if s.is_ancestor(a, nd.tip):
            na += 1
        elif b is not None and s.is_ancestor(b, nd.tip):
            nb += 1
    return na, nb


def _decide(s: SimState, rule) -> tuple[str | None, int | None]:
    if isinstance(rule, MaxSteps):
        return None, None
    n = len(s.nodes)
    na, nb = fork_counts(s, rule.a, rule.b)
    if isinstance(rule, ConsensusOnFork):
        if na == n:
            return "A", rule.a
        if nb == n:
            return "B", rule.b
        return None, None
    if na + nb < n:
        return None, None
    if na == nb:
        return ("A", rule.a) if final_coin(s.tie_seed) == 0 else ("B", rule.b)
    return ("A", rule.a) if na > nb else ("B", rule.b)


def run_until(s: SimState, stop, max_steps: int = 100_000,
              on_step: Callable[[SimState], None] | None = None) -> RunOutcome:
    """Step until ``stop`` decides, ``max_steps`` is hit, or nothing can change."""
    mode = "full" if s.config.mining_enabled else "propagation"
    limit = min(max_steps, stop.steps) if isinstance(stop, MaxSteps) else max_steps
    while True:
        label, block = _decide(s, stop)
        if label is not None:
            return RunOutcome(label, s.step, "decided", s.seed, mode, block)
        if s.step >= limit:
            reason = "max_steps" if isinstance(stop, MaxSteps) else "undecided"
            return RunOutcome("undecided", s.step, reason, s.seed, mode)
        if not s.config.mining_enabled and not s.has_pending():
            return RunOutcome("undecided", s.step, "stalled", s.seed, mode)
        step(s)
        if on_step is not None:
            on_step(s)


# -- logged free-running simulation ------------------------------------------

TRAJECTORY_COLUMNS = ("step", "committed_A", "committed_B", "uncommitted", "new_blocks", "delivered")


def next_event_step(s: SimState) -> int | None:
    """Earliest step ``>= s.step`` at which anything can happen."""
    keys = [k for k, v in s._calendar.items() if v]
    keys += [k for k, v in s._due.items() if v]
    keys += [k for k, v in s.scheduled.items() if v]
    keys = [k for k in keys if k >= s.step]
    return min(keys) if keys else None


def tip_split(s: SimState) -> tuple[int, int, int]:
    """Node counts on the most and second-most common tip, and the rest."""
    counts = sorted(s.tip_counts.values(), reverse=True)
    a = counts[0]
    b = counts[1] if len(counts) > 1 else 0
    return a, b, len(s.nodes) - a - b


def has_fork(s: SimState) -> bool:
    """True when the tips do not all lie on one chain."""
    tips = list(s.tip_counts)
    if len(tips) == 1:
        return False
    top = max(tips, key=lambda b: (s.blocks[b].height, -b))
    return any(not s.is_ancestor(t, top) for t in tips)


@dataclass
class SimulationSummary:
    steps: int
    blocks_mined: int
    simultaneous_steps: int
    fork_episodes: int
    fork_lifetimes: list[int]
    trajectory_hash: str
    competing_blocks: int = 0

    @property
    def competing_rate_per_block(self) -> float:
        """Blocks mined at an already-occupied height, per block mined."""
        return self.competing_blocks / self.blocks_mined if self.blocks_mined else float("nan")

    @property
    def fork_rate_per_block(self) -> float:
        return self.fork_episodes / self.blocks_mined if self.blocks_mined else float("nan")

    def to_text(self) -> str:
        life = self.fork_lifetimes
        items = [
            ("steps", self.steps),
            ("blocks_mined", self.blocks_mined),
            ("simultaneous_block_steps", self.simultaneous_steps),
            ("fork_episodes", self.fork_episodes),
            ("fork_rate_per_block", f"{self.fork_rate_per_block:.6f}"),
            ("competing_blocks", self.competing_blocks),
            ("competing_rate_per_block", f"{self.competing_rate_per_block:.6f}"),
            ("mean_fork_lifetime", f"{np.mean(life):.6f}" if life else "nan"),
            ("max_fork_lifetime", max(life) if life else 0),
            ("trajectory_hash", self.trajectory_hash),
        ]
        return "".join(f"{k}={v}\n" for k, v in items)


def simulate(s: SimState, steps: int, out=None) -> SimulationSummary:
    """Run ``steps`` steps, writing one trajectory CSV row per step to ``out``.

    Columns A/B are the most and second-most common tips after each step.
    Steps where nothing can happen are filled in without running the phases.
    """
    import hashlib

    h = hashlib.blake2b(digest_size=16)
    end = s.step + steps
    first_block = len(s.blocks)
    mined = simultaneous = episodes = 0
    lifetimes: list[int] = []
    current = 0
    split = tip_split(s)
    forked = has_fork(s)

    def emit(row: str):
        h.update(row.encode())
        if out is not None:
            out.write(row)

    while s.step < end:
        nxt = next_event_step(s)
        quiet_until = end if nxt is None else min(nxt, end)
        a, b, u = split
        while s.step < quiet_until:
            emit(f"{s.step},{a},{b},{u},0,0\n")
            if forked:
                current += 1
            s.step += 1
        if s.step >= end:
            break
        this = s.step
        step(s)
        mined += s.last_new_blocks
        simultaneous += s.last_new_blocks >= 2
        split = tip_split(s)
        a, b, u = split
        emit(f"{this},{a},{b},{u},{s.last_new_blocks},{s.last_delivered}\n")
        now = has_fork(s)
        if now:
            if not forked:
                episodes += 1
                current = 0
            current += 1
        elif forked:
            lifetimes.append(current)
        forked = now
    if forked:
        lifetimes.append(current)
    heights = [b.height for b in s.blocks[1:]]
    occupied = set(b.height for b in s.blocks[1:first_block])
    competing = 0
    for ht in heights[first_block - 1:]:
        if ht in occupied:
            competing += 1
        occupied.add(ht)
    return SimulationSummary(steps, mined, simultaneous, episodes, lifetimes, h.hexdigest(), competing)
