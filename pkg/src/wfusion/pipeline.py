"""Resource accounting for building a target W state by repeated fusion.

The inventory policy is greedy: the largest held piece is fused with the
largest partners that keep the product at or below the target size, and
fresh Bell pairs (W_2) fill any missing input. Each fresh Bell pair costs
one unit; size-1 remnants are worthless and dropped.

The policy is deterministic, so the process is an absorbing Markov chain
over inventories. :func:`expected_cost` solves it exactly and
:func:`simulate_pipeline` samples it.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .cavity import magic_time
from .protocols import TWO, OutcomeClass, fuse, normalize_protocol

RNG_ALGORITHM = "numpy.random.PCG64"
BELL = 2


@dataclass(frozen=True)
class StrategyConfig:
    target_size: int
    primitive: str = TWO
    recycle: bool = False
    max_rounds: int | None = None
    lambda_t: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "primitive", normalize_protocol(self.primitive))
        if int(self.target_size) != self.target_size or self.target_size < 2:
            raise ValueError(f"target size {self.target_size} is unreachable; need >= 2")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1 (or None for unbounded)")

    @property
    def arity(self) -> int:
        return 2 if self.primitive == TWO else 3


def choose_inputs(inventory: tuple, strategy: StrategyConfig):
    """Greedy input selection; returns (input sizes, remaining inventory, fresh pairs)."""
    n = strategy.target_size
    pool = sorted(inventory, reverse=True)
    fresh = 0

    def take(limit):
        nonlocal fresh
        for i, size in enumerate(pool):
            if size <= limit:
                return pool.pop(i)
        fresh += 1
        return BELL

    lead = pool.pop(0) if pool else None
    if lead is None:
        fresh += 1
        lead = BELL
    inputs = [lead]
    if strategy.arity == 2:
        inputs.append(take(n - lead + 1))
    else:
        second = take(n - lead + 1)
        inputs += [second, take(n - lead - second + 3)]
    return tuple(inputs), tuple(sorted(pool, reverse=True)), fresh


@dataclass
class Chain:
    """Transient states and per-state transition tables of the greedy process."""

    states: list
    inputs: list
    cost: np.ndarray
    ancilla: np.ndarray
    outcomes: list  # per state: list of (label, class, probability, next index or -1)

    def tables(self):
        K = max(len(o) for o in self.outcomes)
        S = len(self.states)
        cum = np.ones((S, K))
        nxt = np.full((S, K), -1, dtype=np.int64)
        for s, outs in enumerate(self.outcomes):
            probs = np.array([p for _, _, p, _ in outs])
            c = np.cumsum(probs)
            c[np.flatnonzero(probs > 0)[-1]:] = 1.0
            cum[s, : len(outs)] = c
            nxt[s, : len(outs)] = [j for _, _, _, j in outs]
            nxt[s, len(outs):] = nxt[s, len(outs) - 1]
        return cum, nxt


def _products(cls, branch_sizes, recycle):
    if cls is OutcomeClass.SUCCESS:
        return list(branch_sizes)
    if recycle and cls in (OutcomeClass.BYPRODUCT, OutcomeClass.RECYCLABLE):
        return [s for s in branch_sizes if s >= BELL]
    return []


def build_chain(strategy: StrategyConfig) -> Chain:
    """Enumerate inventories reachable from empty under the greedy policy."""
    if strategy.target_size == BELL:
        raise ValueError("target 2 needs no fusion")
    n = strategy.target_size
    lt = magic_time() if strategy.lambda_t is None else strategy.lambda_t
    reports = {}
    index = {(): 0}
    states, queue = [()], deque([()])
    inputs, cost, anc, outcomes = {}, {}, {}, {}
    while queue:
        inv = queue.popleft()
        s = index[inv]
        ins, rest, fresh = choose_inputs(inv, strategy)
        if ins not in reports:
            reports[ins] = fuse(strategy.primitive, ins, lambda_t=lt)
        rep = reports[ins]
        inputs[s], cost[s] = ins, fresh
        anc[s] = 1 if strategy.primitive == TWO else 0
        outs = []
        for b in rep.branches:
            new = list(rest) + _products(b.classification, b.residual_sizes, strategy.recycle)
            if n in new:
                j = -1
            else:
                if any(x > n for x in new):
                    raise ValueError(f"policy produced a piece larger than the target: {new}")
                key = tuple(sorted(new, reverse=True))
                if key not in index:
                    index[key] = len(states)
                    states.append(key)
                    queue.append(key)
                j = index[key]
            outs.append((b.outcome, b.classification, b.probability, j))
        outcomes[s] = outs
    S = len(states)
    return Chain(
        states=states,
        inputs=[inputs[s] for s in range(S)],
        cost=np.array([cost[s] for s in range(S)], dtype=np.int64),
        ancilla=np.array([anc[s] for s in range(S)], dtype=np.int64),
        outcomes=[outcomes[s] for s in range(S)],
    )


def _absorbing_system(chain: Chain, max_rounds):
    """Transient-to-transient matrix Q and exit vector, with round-limited restarts."""
    S = len(chain.states)
    R = 1 if max_rounds is None else max_rounds
    dim = S * R
    Q = np.zeros((dim, dim))
    exit_p = np.zeros(dim)
    cost = np.zeros(dim)
    anc = np.zeros(dim)
    for r in range(R):
        for s in range(S):
            i = r * S + s
            cost[i], anc[i] = chain.cost[s], chain.ancilla[s]
            for _, _, p, j in chain.outcomes[s]:
                if j < 0:
                    exit_p[i] += p
                elif max_rounds is not None and r + 1 >= max_rounds:
                    Q[i, 0] += p
                else:
                    Q[i, (r + 1 if max_rounds is not None else 0) * S + j] += p
    return Q, exit_p, cost, anc


def _check_progress(Q, exit_p):
    """Every transient state must reach the target with positive probability."""
    good = exit_p > 0
    changed = True
    while changed:
        new = good | ((Q > 0) & good[None, :]).any(axis=1)
        changed = bool((new != good).any())
        good = new
    if not good.all():
        raise ValueError("strategy never terminates: some inventories cannot reach the target")


def exact_costs(strategy: StrategyConfig) -> dict:
    """Expected Bell pairs and ancilla atoms per produced target state."""
    if strategy.target_size == BELL:
        return {"expected_bell_pairs": 1.0, "ancilla_atoms": 0.0, "states": 1}
    chain = build_chain(strategy)
    Q, exit_p, cost, anc = _absorbing_system(chain, strategy.max_rounds)
    _check_progress(Q, exit_p)
    A = np.eye(len(exit_p)) - Q
    sol = np.linalg.solve(A, np.column_stack([cost, anc, exit_p]))
    if not np.all(np.isfinite(sol)):
        raise ValueError("strategy never terminates: singular transition system")
    return {
        "expected_bell_pairs": float(sol[0, 0]),
        "ancilla_atoms": float(sol[0, 1]),
        "absorption": float(sol[0, 2]),
        "states": len(chain.states),
    }


def expected_cost(strategy: StrategyConfig) -> float:
    """Mean number of Bell pairs consumed per target W state produced."""
    return exact_costs(strategy)["expected_bell_pairs"]


@dataclass
class YieldStats:
    expected_bell_pairs: float
    stderr: float
    ancilla_atoms: float
    outcome_histogram: dict
    trials: int
    seed: int
    rng: str = RNG_ALGORITHM
    workers: int = 1
    attempts: int = 0
    branch_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _run_worker(chain, strategy, trials, seed, chunk, jit):
    cum, nxt = chain.tables()
    rng = np.random.Generator(np.random.PCG64(seed))
    state = np.zeros(trials, dtype=np.int64)
    rounds = np.zeros(trials, dtype=np.int64)
    total_cost = np.zeros(trials, dtype=np.int64)
    total_anc = np.zeros(trials, dtype=np.int64)
    first = np.full(trials, -1, dtype=np.int64)
    done = np.zeros(trials, dtype=bool)
    counts = np.zeros(cum.shape, dtype=np.int64)
    max_rounds = strategy.max_rounds or 0
    while not done.all():
        idx = np.flatnonzero(~done)
        u = rng.random((idx.size, chunk))
        sub = [a[idx].copy() for a in (state, rounds, total_cost, total_anc, first, done)]
        kernels.walk_chunk(u, cum, nxt, chain.cost, chain.ancilla, 0, max_rounds, *sub, counts, jit=jit)
        for a, b in zip((state, rounds, total_cost, total_anc, first, done), sub):
            a[idx] = b
    return total_cost, total_anc, first, counts


def simulate_pipeline(strategy: StrategyConfig, trials: int, seed: int, workers: int = 1,
                      chunk: int = 16, jit=None) -> YieldStats:
    """Monte Carlo estimate of the cost per produced target state.

    Each trial runs the greedy process from an empty inventory until the
    target exists. Trials are split over ``workers`` contiguous shares and
    worker ``k`` draws from ``PCG64(seed + k)``. ``outcome_histogram``
    counts the class of each trial's first fusion attempt.
    """
    if int(trials) != trials or trials < 1:
        raise ValueError("trials must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    trials, seed = int(trials), int(seed)
    if strategy.target_size == BELL:
        return YieldStats(1.0, 0.0, 0.0, {"none": trials}, trials, seed, workers=workers)
    exact_costs(strategy)  # reachability and termination checks
    chain = build_chain(strategy)
    shares = [trials // workers + (1 if k < trials % workers else 0) for k in range(workers)]
    costs, ancs, firsts = [], [], []
    counts = None
    for k, share in enumerate(shares):
        if share == 0:
            continue
        c, a, f, n = _run_worker(chain, strategy, share, seed + k, chunk, jit)
        costs.append(c)
        ancs.append(a)
        firsts.append(f)
        counts = n if counts is None else counts + n
    cost = np.concatenate(costs).astype(float)
    first = np.concatenate(firsts)
    root = chain.outcomes[0]
    hist: dict = {}
    for o, cnt in zip(*np.unique(first, return_counts=True)):
        cls = root[o][1].value
        hist[cls] = hist.get(cls, 0) + int(cnt)
    branch_counts: dict = {}
    for s, outs in enumerate(chain.outcomes):
        key = "x".join(map(str, chain.inputs[s]))
        per = branch_counts.setdefault(key, {})
        for o, (label, _, _, _) in enumerate(outs):
            per[label] = per.get(label, 0) + int(counts[s, o])
    stderr = float(cost.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return YieldStats(
        expected_bell_pairs=float(cost.mean()),
        stderr=stderr,
        ancilla_atoms=float(np.concatenate(ancs).mean()),
        outcome_histogram=dict(sorted(hist.items())),
        trials=trials,
        seed=seed,
        workers=workers,
        attempts=int(counts.sum()),
        branch_counts=branch_counts,
    )


# ---------------------------------------------------------------------------
# feasibility
# ---------------------------------------------------------------------------

DEFAULT_G = 2 * math.pi * 24e3
DEFAULT_DELTA_OVER_G = 10.0
DEFAULT_DECAY = 3e-2
REFERENCE_OPERATION_TIME = 1e-4


@dataclass
class FeasibilityReport:
    g: float
    delta: float
    lam: float
    lambda_t: float
    interaction_time: float
    atomic_decay_time: float
    cavity_decay_time: float
    time_margin_atomic: float
    time_margin_cavity: float
    reference_operation_time: float = REFERENCE_OPERATION_TIME

    def to_dict(self) -> dict:
        return asdict(self)


def feasibility_report(g: float = DEFAULT_G, delta: float | None = None,
                       atomic_decay: float = DEFAULT_DECAY, cavity_decay: float = DEFAULT_DECAY) -> FeasibilityReport:
    """Interaction time at the magic point and how it compares with decay times."""
    if delta is None:
        delta = DEFAULT_DELTA_OVER_G * g
    for name, v in (("g", g), ("delta", delta), ("atomic_decay", atomic_decay), ("cavity_decay", cavity_decay)):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive, got {v}")
    lam = g * g / delta
    lt = magic_time()
    t = lt / lam
    return FeasibilityReport(
        g=g, delta=delta, lam=lam, lambda_t=lt, interaction_time=t,
        atomic_decay_time=atomic_decay, cavity_decay_time=cavity_decay,
        time_margin_atomic=atomic_decay / t, time_margin_cavity=cavity_decay / t,
    )
