"""Model selection over classes of feature maps.

Candidates are scored with a chosen criterion and the minimum total wins;
ties break toward fewer states and then the canonical map order, so the
result does not depend on how the candidate list was arranged. Experiment
harnesses re-score growing prefixes of sampled data and record when the
choice stops changing. The countable-class search walks maps in canonical
order (ascending state count) and skips any map whose penalty alone already
exceeds the best total seen, which is lossless because data costs are
nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .estimation import CostBreakdown, PenaltyScheme, cost, icost, ml_cost, ocost
from .fmaps import FeatureMap, enumerate_closed_suffix_maps, memory_bound, trivial_map
from .sequences import Alphabet, PairedSequence
from .sources import FsmxSource, induced_hmm, is_ergodic_chain, sample_fsmx

CRITERIA = ("cost", "icost", "ocost", "ml")


@dataclass(eq=False)
class SelectionResult:
    chosen_map_id: str
    costs: list[CostBreakdown]
    tie_broken: bool

    def total_of(self, map_id: str) -> float:
        for breakdown in self.costs:
            if breakdown.map_id == map_id:
                return breakdown.total
        raise KeyError(map_id)


@dataclass(eq=False)
class SelectionTrajectory:
    seed: int
    n_grid: np.ndarray
    chosen_ids: list[str]
    costs_per_n: list[list[CostBreakdown]]
    stabilization_index: int

    @property
    def final_choice(self) -> str:
        return self.chosen_ids[-1]


def score_map(fmap: FeatureMap, data, criterion: str, scheme: PenaltyScheme,
              smoothing: float = 0.0) -> CostBreakdown:
    """One candidate's cost under the requested criterion.

    Plain sequences admit ``cost`` and ``ml``; the side-information criteria
    accept them too by treating the side channel as degenerate, which makes
    all three coincide. On paired data ``cost`` and ``ml`` code the joint
    pair sequence.
    """
    if criterion not in CRITERIA:
        raise InputError(f"unknown criterion {criterion!r} (expected one of {CRITERIA})")
    if isinstance(data, PairedSequence):
        if criterion == "icost":
            return icost(fmap, data, scheme, smoothing)
        if criterion == "ocost":
            return ocost(fmap, data, scheme, smoothing)
        joint = data.joint_sequence()
        if criterion == "cost":
            return cost(fmap, joint, scheme, smoothing)
        return ml_cost(fmap, joint, smoothing)
    if criterion == "cost":
        return cost(fmap, data, scheme, smoothing)
    if criterion == "ml":
        return ml_cost(fmap, data, smoothing)
    degenerate = PairedSequence(Alphabet(1), data.alphabet,
                                np.zeros(len(data), dtype=np.int64), data.items)
    if criterion == "icost":
        return icost(fmap, degenerate, scheme, smoothing)
    return ocost(fmap, degenerate, scheme, smoothing)


def _check_unique_ids(maps):
    seen = set()
    for fmap in maps:
        if fmap.map_id in seen:
            raise InputError(f"duplicate map id {fmap.map_id!r} in candidate class")
        seen.add(fmap.map_id)


def select(maps: list[FeatureMap], data, criterion: str,
           scheme: PenaltyScheme, smoothing: float = 0.0) -> SelectionResult:
    """Score every candidate and return the minimizer.

    Candidates with infinite data cost rank last rather than erroring. The
    chosen map is invariant under permutations of ``maps``.
    """
    if not maps:
        raise InputError("candidate class must be non-empty")
    if len(data) < 1:
        raise InputError("data must be non-empty")
    _check_unique_ids(maps)
    ordered = sorted(maps, key=lambda m: m.canonical_key)
    scored = [(score_map(m, data, criterion, scheme, smoothing), m) for m in ordered]
    best, _ = min(scored, key=lambda pair: (pair[0].total, pair[1].state_count,
                                            pair[1].canonical_key))
    ties = sum(1 for breakdown, _ in scored if breakdown.total == best.total)
    return SelectionResult(chosen_map_id=best.map_id,
                           costs=[breakdown for breakdown, _ in scored],
                           tie_broken=ties > 1)


def with_baseline(maps: list[FeatureMap], alphabet_size: int,
                  include_baseline: bool = True) -> list[FeatureMap]:
    """Candidate class with the single-state map injected unless present."""
    result = list(maps)
    if include_baseline and not any(m.state_count == 1 for m in result):
        result.append(trivial_map(alphabet_size))
    return result


def _stabilization_index(chosen_ids: list[str]) -> int:
    idx = len(chosen_ids) - 1
    while idx > 0 and chosen_ids[idx - 1] == chosen_ids[-1]:
        idx -= 1
    return idx


def consistency_run(source: FsmxSource, maps: list[FeatureMap], criterion: str,
                    scheme: PenaltyScheme, n_grid, seeds,
                    include_baseline: bool = True,
                    smoothing: float = 0.0) -> list[SelectionTrajectory]:
    """Sample the source once per seed and re-select on each prefix length.

    Refuses sources whose induced state chain is not ergodic and candidate
    maps without bounded memory. Each trajectory records the chosen map and
    all candidate costs per grid point, plus the first grid index from which
    the choice never changes again.
    """
    n_grid = np.asarray(n_grid, dtype=np.int64)
    if n_grid.size == 0 or np.any(np.diff(n_grid) <= 0) or n_grid[0] < 1:
        raise InputError("n_grid must be non-empty and strictly increasing")
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise InputError("seeds must be distinct")

    if not is_ergodic_chain(induced_hmm(source).transition):
        raise InputError(
            "source state chain is not ergodic (some state cannot reach some "
            "other); consistency experiments need an ergodic source")
    candidates = with_baseline(maps, source.fmap.alphabet_size, include_baseline)
    for fmap in candidates:
        if not memory_bound(fmap).bounded:
            raise InputError(f"candidate map {fmap.map_id!r} does not have bounded memory")

    trajectories = []
    for seed in seeds:
        sample = sample_fsmx(source, int(n_grid[-1]), seed)
        chosen_ids = []
        costs_per_n = []
        for n in n_grid:
            result = select(candidates, sample.prefix(int(n)), criterion, scheme, smoothing)
            chosen_ids.append(result.chosen_map_id)
            costs_per_n.append(result.costs)
        trajectories.append(SelectionTrajectory(
            seed=seed,
            n_grid=n_grid.copy(),
            chosen_ids=chosen_ids,
            costs_per_n=costs_per_n,
            stabilization_index=_stabilization_index(chosen_ids),
        ))
    return trajectories


@dataclass(eq=False)
class PruningLogEntry:
    map_id: str
    state_count: int
    penalty: float
    best_total: float


def countable_search(alphabet: Alphabet, data, criterion: str, scheme: PenaltyScheme,
                     state_budget: int, depth_budget: int,
                     smoothing: float = 0.0,
                     include_baseline: bool = True) -> tuple[SelectionResult, list[PruningLogEntry]]:
    """Best-first scan of the suffix-map class in canonical order with
    penalty-based pruning.

    A candidate whose penalty alone exceeds the best total so far cannot win
    (its data cost is nonnegative), so it is logged and skipped; the outcome
    matches exhaustive selection over the same budget-limited class.
    """
    if state_budget < 1 or depth_budget < 1:
        raise InputError("state and depth budgets must be >= 1")
    candidates = enumerate_closed_suffix_maps(alphabet, depth_budget)
    candidates = [m for m in candidates if m.state_count <= state_budget]
    if include_baseline:
        candidates = with_baseline(candidates, alphabet.size)
    candidates.sort(key=lambda m: m.canonical_key)
    if not candidates:
        raise InputError("budgets exclude every candidate map")
    _check_unique_ids(candidates)

    n = len(data)
    if n < 1:
        raise InputError("data must be non-empty")
    best: CostBreakdown | None = None
    best_map: FeatureMap | None = None
    scored: list[CostBreakdown] = []
    pruned: list[PruningLogEntry] = []
    ties = 1
    for fmap in candidates:
        pen = 0.0 if criterion == "ml" else scheme.value(n, fmap.state_count)
        if best is not None and pen > best.total:
            pruned.append(PruningLogEntry(map_id=fmap.map_id,
                                          state_count=fmap.state_count,
                                          penalty=pen, best_total=best.total))
            continue
        breakdown = score_map(fmap, data, criterion, scheme, smoothing)
        scored.append(breakdown)
        if best is None or breakdown.total < best.total:
            best, best_map = breakdown, fmap
            ties = 1
        elif breakdown.total == best.total:
            ties += 1
    if best is None:
        raise InputError("no candidate map could be scored within the budgets")
    return SelectionResult(chosen_map_id=best.map_id, costs=scored,
                           tie_broken=ties > 1), pruned
