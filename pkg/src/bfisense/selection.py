"""Greedy feedback-element selection over a region of interest.

Scores every element at every discretized position, records which element is
best per position, then greedily picks the elements that are best at the most
not-yet-covered positions.  A brute-force subset enumeration is kept as the
reference optimum for small tables.
"""

import json
import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .bfi import bfi_element_count
from .channel import derive_seed
from .crb import CrbConfig, PositionParams, element_scores
from .errors import CombinatorialBudgetError, InvalidInputError

TARGETS = ("location", "aod", "aoa", "distance")
_BRUTE_BUDGET = 1_000_000


@dataclass(frozen=True)
class RoiGrid:
    """Discretized region of interest and the parameters being sensed."""

    positions: tuple
    target: str
    d_range: tuple = (5.0, 10.0)

    def __post_init__(self):
        if self.target not in TARGETS:
            raise InvalidInputError(f"target must be one of {TARGETS}, got {self.target!r}")
        if not self.positions:
            raise InvalidInputError("region of interest needs at least one position")
        lo, hi = self.d_range
        for p in self.positions:
            named = dict(zip(p.names, p.values))
            if "x" in named and "y" in named:
                dist = math.hypot(named["x"], named["y"])
                if not lo - 1e-9 <= dist <= hi + 1e-9:
                    raise InvalidInputError(
                        f"position at distance {dist:.3f} m outside the {lo}-{hi} m annulus")
            elif "distance" in named:
                if not lo - 1e-9 <= named["distance"] <= hi + 1e-9:
                    raise InvalidInputError(
                        f"distance {named['distance']:.3f} m outside the {lo}-{hi} m annulus")

    @property
    def size(self) -> int:
        return len(self.positions)


def annulus_roi(r: int = 1000, d_range=(5.0, 10.0), angle_range=(-math.pi / 2, math.pi / 2),
                seed: int = 0) -> RoiGrid:
    """Uniform random 2-D positions over the annulus, for location sensing."""
    rng = np.random.default_rng(seed)
    angles = rng.uniform(angle_range[0], angle_range[1], size=r)
    dists = rng.uniform(d_range[0], d_range[1], size=r)
    positions = tuple(
        PositionParams((d * math.cos(a), d * math.sin(a)), ("x", "y"))
        for a, d in zip(angles, dists)
    )
    return RoiGrid(positions=positions, target="location", d_range=tuple(d_range))


def parameter_roi(target: str, r: int = 1000, value_range=None, seed: int = 0,
                  d_range=(5.0, 10.0)) -> RoiGrid:
    """Uniform random single-parameter positions (aod, aoa or distance)."""
    if target not in ("aod", "aoa", "distance"):
        raise InvalidInputError(f"parameter_roi target must be aod/aoa/distance, got {target!r}")
    if value_range is None:
        value_range = d_range if target == "distance" else (-math.pi / 2 * 0.95, math.pi / 2 * 0.95)
    rng = np.random.default_rng(seed)
    vals = rng.uniform(value_range[0], value_range[1], size=r)
    positions = tuple(PositionParams((v,), (target,)) for v in vals)
    return RoiGrid(positions=positions, target=target, d_range=tuple(d_range))


@dataclass(eq=False)
class SelectionResult:
    """Selected element sets per subcarrier plus the per-position best-element maps.

    Element indices are 0-based in memory; the JSON form is 1-based.
    """

    per_subcarrier: list
    eta: list
    coverage: list
    mode: str
    n_sel: int
    n_bfi: int

    def feature_map(self) -> list:
        """Flat list of (subcarrier k, element index) pairs in canonical order."""
        out = []
        for k_idx, chosen in enumerate(self.per_subcarrier, start=1):
            out.extend((k_idx, int(j)) for j in sorted(chosen))
        return out


def selection_to_json(sel: SelectionResult) -> dict:
    multi = len(sel.per_subcarrier) > 1
    eta = [list(map(int, e + 1)) for e in sel.eta]
    cov = [list(map(int, c)) for c in sel.coverage]
    return {
        "mode": sel.mode,
        "n_sel": sel.n_sel,
        "n_bfi": sel.n_bfi,
        "per_subcarrier": [sorted(int(j) + 1 for j in b) for b in sel.per_subcarrier],
        "eta": eta if multi else eta[0],
        "coverage": cov if multi else cov[0],
    }


def selection_from_json(record: dict) -> SelectionResult:
    try:
        per_sc = [np.array([j - 1 for j in b], dtype=int) for b in record["per_subcarrier"]]
        eta = record["eta"]
        cov = record["coverage"]
        if eta and not isinstance(eta[0], list):
            eta, cov = [eta], [cov]
        return SelectionResult(
            per_subcarrier=per_sc,
            eta=[np.array(e, dtype=int) - 1 for e in eta],
            coverage=[np.array(c, dtype=int) for c in cov],
            mode=record["mode"],
            n_sel=int(record["n_sel"]),
            n_bfi=int(record["n_bfi"]),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed selection record: {exc}") from exc


def best_element_map(scores: np.ndarray, mode: str = "information") -> np.ndarray:
    """Index of the best element per position; ties break to the lowest index.

    "information" reads scores as informativeness (argmax); "literal" reads
    them as bounds and takes the argmin.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.size == 0:
        raise InvalidInputError(f"scores must be a nonempty R x N matrix, got shape {scores.shape}")
    if np.any(np.isnan(scores)):
        raise InvalidInputError("scores must be finite or infinite sentinels, not NaN")
    if mode == "information":
        return np.argmax(scores, axis=1)
    if mode == "literal":
        return np.argmin(scores, axis=1)
    raise InvalidInputError(f"mode must be 'information' or 'literal', got {mode!r}")


def greedy_select(eta: np.ndarray, n_sel: int, n_bfi: int) -> np.ndarray:
    """Pick n_sel elements by repeated best-at-most-remaining-positions counts.

    After each pick the positions it covers are removed.  Ties break to the
    lowest element index; once every remaining count is zero the set is
    filled with the lowest-index unchosen elements.
    """
    eta = np.asarray(eta, dtype=int)
    if not 1 <= n_sel <= n_bfi:
        raise InvalidInputError(f"n_sel must be in 1..{n_bfi}, got {n_sel}")
    if eta.size and (eta.min() < 0 or eta.max() >= n_bfi):
        raise InvalidInputError("best-element indices outside 0..n_bfi-1")
    remaining = np.ones(eta.shape[0], dtype=bool)
    chosen = []
    for _ in range(n_sel):
        counts = np.bincount(eta[remaining], minlength=n_bfi)
        counts[chosen] = -1
        if counts.max() <= 0:
            filler = next(j for j in range(n_bfi) if j not in chosen)
            chosen.append(filler)
            continue
        pick = int(np.argmax(counts))
        chosen.append(pick)
        remaining &= eta != pick
    return np.array(chosen, dtype=int)


def coverage_counts(eta: np.ndarray, n_bfi: int) -> np.ndarray:
    """How many positions each element wins."""
    return np.bincount(np.asarray(eta, dtype=int), minlength=n_bfi)


def brute_force_select(scores: np.ndarray, n_sel: int) -> np.ndarray:
    """Exhaustive best subset under the summed per-position minimum of scores.

    Scores are read as bounds (lower is better).  Ties resolve to the
    lexicographically first subset.  Refuses tables where the number of
    subsets exceeds the budget.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.size == 0:
        raise InvalidInputError(f"scores must be a nonempty R x N matrix, got shape {scores.shape}")
    n_bfi = scores.shape[1]
    if not 1 <= n_sel <= n_bfi:
        raise InvalidInputError(f"n_sel must be in 1..{n_bfi}, got {n_sel}")
    if math.comb(n_bfi, n_sel) > _BRUTE_BUDGET:
        raise CombinatorialBudgetError(
            f"C({n_bfi}, {n_sel}) = {math.comb(n_bfi, n_sel)} subsets exceed the "
            f"{_BRUTE_BUDGET} enumeration budget")
    best_subset = None
    best_value = np.inf
    for subset in combinations(range(n_bfi), n_sel):
        value = float(np.sum(np.min(scores[:, subset], axis=1)))
        if value < best_value:
            best_value = value
            best_subset = subset
    return np.array(best_subset, dtype=int)


def select_features(roi: RoiGrid, scenario, cfg: CrbConfig, n_sel: int,
                    mode: str = "information") -> SelectionResult:
    """Run the per-position scoring and greedy pick for every subcarrier.

    Positions get derived seeds (base XOR task index, task = (k-1)*R + r), so
    the result is independent of evaluation order.
    """
    n_bfi = bfi_element_count(scenario.geometry.n_rx, scenario.geometry.n_tx)
    if not 1 <= n_sel <= n_bfi:
        raise InvalidInputError(f"n_sel must be in 1..{n_bfi}, got {n_sel}")
    n_sc = scenario.grid.n_subcarriers
    r_total = roi.size
    per_subcarrier, etas, coverages = [], [], []
    for k in range(1, n_sc + 1):
        scores = np.empty((r_total, n_bfi))
        for r, x in enumerate(roi.positions):
            local = replace(cfg, seed=derive_seed(cfg.seed, (k - 1) * r_total + r))
            scores[r] = element_scores(x, scenario, local, k)
        eta = best_element_map(scores, mode)
        per_subcarrier.append(greedy_select(eta, n_sel, n_bfi))
        etas.append(eta)
        coverages.append(coverage_counts(eta, n_bfi))
    return SelectionResult(per_subcarrier=per_subcarrier, eta=etas, coverage=coverages,
                           mode=mode, n_sel=n_sel, n_bfi=n_bfi)


def dump_selection(sel: SelectionResult, path):
    with open(path, "w") as f:
        json.dump(selection_to_json(sel), f, indent=2, sort_keys=True)
        f.write("\n")


def load_selection(path) -> SelectionResult:
    with open(path) as f:
        return selection_from_json(json.load(f))
