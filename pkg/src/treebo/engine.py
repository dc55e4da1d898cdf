"""The optimisation loop: random-tree UCB and its baseline strategies.

Every strategy follows the same skeleton: an initial design of uniform
random queries, then one black-box evaluation per round chosen by the
strategy.  All randomness is drawn from per-round generators derived
from the master seed and a stream tag, so a run is a pure function of
its configuration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import decomposition as dc
from .acquisition import AcquisitionSpec, beta, constant_schedule
from .benchmarks import Benchmark, external_benchmark, get_benchmark
from .errors import InvalidParameterError
from .gp import Dataset, FitOptions, fit, log_marginal_likelihood, standardize
from .optimizer import DEFAULT_MEMORY_CAP_MB, DomainSpec, maximize_additive

STRATEGIES = ("rducb", "random-search", "fixed-tree", "ml-tree")

# Independent random streams per (seed, stream, round).
STREAM_INIT = 0
STREAM_TREE = 1
STREAM_FIT = 2
STREAM_LEARN = 3

ML_TREE_INTERVAL = 15
ML_TREE_PROPOSALS = 100


def round_rng(seed: int, stream: int, round_index: int) -> np.random.Generator:
    """Generator for one (stream, round) cell of a run's randomness."""
    return np.random.default_rng((int(seed), int(stream), int(round_index)))


def default_edges(d: int) -> int:
    """Default random-tree size ``max(floor(d / 5), 1)``."""
    return max(d // 5, 1)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one optimisation run."""

    benchmark: str
    dimension: int | None = None
    strategy: str = "rducb"
    budget: int = 100
    initial_budget: int = 10
    edges: int | None = None
    beta_override: float | None = None
    acquisition: str = "add-ucb"
    grid_size: int = 100
    refine: bool = False
    memory_cap_mb: float = DEFAULT_MEMORY_CAP_MB
    seed: int = 0
    init_box: tuple | None = None
    external_command: str | None = None
    external_domain: tuple | None = None
    external_timeout: float = 60.0
    name: str | None = None

    def validated(self, d: int) -> "RunConfig":
        if self.strategy not in STRATEGIES:
            raise InvalidParameterError(f"unknown strategy {self.strategy!r}")
        if self.acquisition not in ("add-ucb", "add-ei"):
            raise InvalidParameterError(f"unknown acquisition {self.acquisition!r}")
        if not self.budget >= self.initial_budget >= 1:
            raise InvalidParameterError(
                f"need budget >= initial_budget >= 1, got {self.budget}, {self.initial_budget}"
            )
        edges = self.edges if self.edges is not None else default_edges(d)
        if not 0 <= edges <= d - 1:
            raise InvalidParameterError(f"edges must be in [0, {d - 1}], got {edges}")
        if self.grid_size < 2:
            raise InvalidParameterError("grid_size must be >= 2")
        if self.init_box is not None and len(self.init_box) != d:
            raise InvalidParameterError(
                f"init_box lists {len(self.init_box)} dims, expected {d}"
            )
        return replace(self, dimension=d, edges=edges)


@dataclass(frozen=True)
class RoundRecord:
    """One row of a regret trace."""

    round: int
    phase: str  # "init" or "bo"
    decomposition: str  # ';'-joined components, empty when none used
    x: np.ndarray  # raw domain coordinates
    y: float
    best_y: float
    inst_regret: float
    best_regret: float
    wall_ms: float


@dataclass
class RegretTrace:
    seed: int
    benchmark: str
    sense: str
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def best_regrets(self) -> np.ndarray:
        return np.array([r.best_regret for r in self.records])

    @property
    def final_best_regret(self) -> float:
        return self.records[-1].best_regret


def _make_benchmark(config: RunConfig):
    if config.benchmark == "external":
        if not config.external_command:
            raise InvalidParameterError("external benchmark needs external_command")
        if config.dimension is None:
            raise InvalidParameterError("external benchmark needs an explicit dimension")
        return external_benchmark(
            config.external_command,
            config.dimension,
            config.external_domain,
            config.external_timeout,
        )
    return get_benchmark(config.benchmark, config.dimension), None


class _Run:
    """Mutable state of one optimisation run."""

    def __init__(self, config: RunConfig, bench: Benchmark):
        self.config = config.validated(bench.d)
        self.bench = bench
        self.lo = np.array([b[0] for b in bench.domain])
        self.hi = np.array([b[1] for b in bench.domain])
        self.trace = RegretTrace(config.seed, bench.name, bench.sense)
        self.us: list[np.ndarray] = []  # normalised queried inputs
        self.ys: list[float] = []  # raw observations
        self.visited: set[tuple] = set()
        self.prev_params = None
        self.cached_tree = None
        if self.config.beta_override is not None:
            schedule = constant_schedule(self.config.beta_override)
        else:
            schedule = beta
        self.schedule = schedule
        self.domain_spec = DomainSpec.unit_box(bench.d, self.config.grid_size)

    # -- coordinate transforms -------------------------------------------

    def to_raw(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (x - self.lo) / (self.hi - self.lo)

    def internal(self, y: float) -> float:
        return y if self.bench.sense == "max" else -y

    # -- bookkeeping -------------------------------------------------------

    def observe(self, t: int, phase: str, g_text: str, u: np.ndarray, started: float):
        x = self.to_raw(u)
        y = self.bench(x)
        self.us.append(u)
        self.ys.append(y)
        self.visited.add(tuple(x))
        if self.bench.sense == "max":
            best_y = max(self.ys)
            inst = (self.bench.known_optimum - y) if self.bench.known_optimum is not None else float("nan")
        else:
            best_y = min(self.ys)
            inst = (y - self.bench.known_optimum) if self.bench.known_optimum is not None else float("nan")
        prev_best = self.trace.records[-1].best_regret if self.trace.records else float("inf")
        best_regret = inst if np.isnan(prev_best) or prev_best == float("inf") else min(prev_best, inst)
        if np.isnan(inst):
            best_regret = float("nan")
        wall_ms = (time.perf_counter() - started) * 1e3
        self.trace.records.append(
            RoundRecord(t, phase, g_text, x, y, best_y, inst, best_regret, wall_ms)
        )

    def initial_round(self, t: int):
        started = time.perf_counter()
        rng = round_rng(self.config.seed, STREAM_INIT, t)
        u = rng.uniform(size=self.bench.d)
        if self.config.init_box is not None:
            raw = np.array(
                [lo + (hi - lo) * u[i] for i, (lo, hi) in enumerate(self.config.init_box)]
            )
            u = self.to_unit(raw)
        self.observe(t, "init", "", u, started)

    # -- decomposition policies ---------------------------------------------

    def choose_tree(self, t: int) -> dc.Decomposition:
        config = self.config
        if config.strategy == "rducb":
            return dc.sample_random_tree(
                self.bench.d, config.edges, round_rng(config.seed, STREAM_TREE, t)
            )
        if config.strategy == "fixed-tree":
            if self.cached_tree is None:
                self.cached_tree = dc.sample_random_tree(
                    self.bench.d, config.edges, round_rng(config.seed, STREAM_TREE, t)
                )
            return self.cached_tree
        # ml-tree: re-learn on a fixed interval, reuse in between.
        first_bo = config.initial_budget + 1
        if self.cached_tree is None or (t - first_bo) % ML_TREE_INTERVAL == 0:
            self.cached_tree = self.learn_tree(t)
        return self.cached_tree

    def learn_tree(self, t: int) -> dc.Decomposition:
        """Greedy stochastic edge-toggle search over the marginal likelihood.

        Hyperparameters are fitted once under the all-singleton
        decomposition, then held fixed while candidate edge sets are
        scored; a toggle is kept whenever it increases the likelihood.
        """
        dataset = self.standardized_dataset()
        d = self.bench.d
        rng = round_rng(self.config.seed, STREAM_LEARN, t)
        singletons = dc.from_edges(d, [])
        model = fit(
            dataset,
            singletons,
            FitOptions(warm_start=self.prev_params, rng=rng),
        )
        params = model.params
        edges: set[tuple[int, int]] = set()
        score, _ = log_marginal_likelihood(dataset, singletons, params)
        for _ in range(ML_TREE_PROPOSALS):
            i = int(rng.integers(1, d + 1))
            j = int(rng.integers(1, d))
            if j >= i:
                j += 1
            pair = (i, j) if i < j else (j, i)
            if pair in edges:
                candidate = edges - {pair}
            else:
                candidate = edges | {pair}
                if len(candidate) > d - 1 or _has_cycle(d, candidate):
                    continue
            g = dc.from_edges(d, candidate)
            cand_score, _ = log_marginal_likelihood(dataset, g, params)
            if cand_score > score:
                edges, score = candidate, cand_score
        return dc.from_edges(d, edges)

    # -- model round ---------------------------------------------------------

    def standardized_dataset(self) -> Dataset:
        y_int = np.array([self.internal(v) for v in self.ys])
        y_std, _, _ = standardize(y_int)
        return Dataset(np.array(self.us), y_std)

    def bo_round(self, t: int):
        started = time.perf_counter()
        if self.config.strategy == "random-search":
            u = round_rng(self.config.seed, STREAM_INIT, t).uniform(size=self.bench.d)
            self.observe(t, "bo", "", u, started)
            return
        g = self.choose_tree(t)
        dataset = self.standardized_dataset()
        model = fit(
            dataset,
            g,
            FitOptions(
                warm_start=self.prev_params,
                rng=round_rng(self.config.seed, STREAM_FIT, t),
            ),
        )
        self.prev_params = model.params
        incumbent = None
        if self.config.acquisition == "add-ei":
            y_int = [self.internal(v) for v in self.ys]
            incumbent = self.us[int(np.argmax(y_int))]
        spec = AcquisitionSpec(self.config.acquisition, self.schedule, incumbent)
        u, _ = maximize_additive(
            model,
            spec,
            t,
            self.domain_spec,
            memory_cap_mb=self.config.memory_cap_mb,
            refine=self.config.refine,
        )
        u = self.dedupe(u)
        self.observe(t, "bo", dc.serialize(g, sep=";"), u, started)

    def dedupe(self, u: np.ndarray) -> np.ndarray:
        """Deterministically move an already-queried grid point to the
        nearest unvisited cell (one coordinate stepped at a time, lower
        index first)."""
        if tuple(self.to_raw(u)) not in self.visited:
            return u
        grids = self.domain_spec.grids()
        idx = [int(np.argmin(np.abs(grid - u[i]))) for i, grid in enumerate(grids)]
        for radius in range(1, max(g.size for g in grids)):
            for i, grid in enumerate(grids):
                for delta in (-radius, radius):
                    k = idx[i] + delta
                    if not 0 <= k < grid.size:
                        continue
                    candidate = u.copy()
                    candidate[i] = grid[k]
                    if tuple(self.to_raw(candidate)) not in self.visited:
                        return candidate
        return u

    def run(self) -> RegretTrace:
        for t in range(1, self.config.initial_budget + 1):
            self.initial_round(t)
        for t in range(self.config.initial_budget + 1, self.config.budget + 1):
            self.bo_round(t)
        return self.trace


def _has_cycle(d: int, edges) -> bool:
    parent = list(range(d + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return True
        parent[rb] = ra
    return False


def run_strategy(config: RunConfig) -> RegretTrace:
    """Execute one run of whatever strategy the config names."""
    bench, blackbox = _make_benchmark(config)
    try:
        return _Run(config, bench).run()
    finally:
        if blackbox is not None:
            blackbox.close()


def rducb(config: RunConfig) -> RegretTrace:
    """One run of the random-tree UCB loop."""
    if config.strategy != "rducb":
        config = replace(config, strategy="rducb")
    return run_strategy(config)


def baseline(config: RunConfig) -> RegretTrace:
    """One run of a comparison strategy (random search or a tree control)."""
    if config.strategy not in ("random-search", "fixed-tree", "ml-tree"):
        raise InvalidParameterError(
            f"baseline strategy must be one of the controls, got {config.strategy!r}"
        )
    return run_strategy(config)


def aggregate(traces) -> list[tuple[int, float, float, int]]:
    """Per-round mean and standard error of the best regret across seeds.

    Returns rows ``(round, mean, stderr, n_seeds)``; the standard error
    is the sample standard deviation over seeds divided by ``sqrt(n)``,
    zero for a single trace.
    """
    traces = list(traces)
    if not traces:
        raise InvalidParameterError("need at least one trace")
    length = len(traces[0])
    if any(len(tr) != length for tr in traces):
        raise InvalidParameterError("traces must all have the same length")
    matrix = np.vstack([tr.best_regrets for tr in traces])
    rows = []
    n = matrix.shape[0]
    for r in range(length):
        column = matrix[:, r]
        mean = float(np.mean(column))
        stderr = float(np.std(column, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        rows.append((traces[0].records[r].round, mean, stderr, n))
    return rows
