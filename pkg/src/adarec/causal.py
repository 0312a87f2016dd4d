"""Constraint-based causal structure learning on the retrieval reference set.

The skeleton search is PC-style with removals applied at level boundaries
(so a parallel scan over pairs would match the sequential result), followed
by the Possible-D-SEP refinement. Orientation initializes all endpoints to
circles, orients unshielded colliders from sepsets, then applies rules
R1-R4 to a fixed point. All iteration orders are by variable name, so the
output is deterministic for identical inputs.

Conditional independence uses Fisher-z on partial correlations when every
variable involved is numeric, and a stratified G-squared contingency test
otherwise (numeric variables discretized to 4 equal-frequency bins for the
test; zero-margin rows/columns dropped from each stratum).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special

from .dataset import BRAND_SET, CATEGORICAL, NUMERIC, Dataset, Label
from .errors import InsufficientSamples, TargetNotInGraph
from .importance import MIScore, discretize

CIRCLE = "circle"
ARROW = "arrow"
TAIL = "tail"

CI_BINS = 4


@dataclass(frozen=True)
class CITestResult:
    i: int
    j: int
    conditioning: tuple[int, ...]
    p_value: float
    independent: bool
    diagnostic: str | None = None


@dataclass(frozen=True)
class Skeleton:
    names: tuple[str, ...]
    edges: frozenset[tuple[int, int]]  # canonical (i, j) with i < j

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {v: set() for v in range(len(self.names))}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj


CITester = Callable[[int, int, tuple[int, ...]], CITestResult]


# --- data encoding -----------------------------------------------------------


def encode_dataset(
    dataset: Dataset,
    labels: Mapping[str, Label] | None = None,
    include_target: bool = True,
) -> tuple[np.ndarray, tuple[str, ...], tuple[str, ...]]:
    """Encode records for CI testing: z-scored numerics, integer-coded categoricals.

    Missing numerics impute to the column mean (0 after z-scoring); missing
    categoricals get their own code. With ``include_target`` the label is
    appended as a final categorical column (brand sets are coded by their
    sorted token tuple). Returns (matrix, kinds, names).
    """
    n = len(dataset.records)
    columns: list[np.ndarray] = []
    kinds: list[str] = []
    names: list[str] = []
    for idx, feat in enumerate(dataset.schema.features):
        raw = [rec.values[idx] for rec in dataset.records]
        if feat.kind == NUMERIC:
            vals = np.array([np.nan if v is None else float(v) for v in raw])
            present = vals[~np.isnan(vals)]
            mean = float(present.mean()) if present.size else 0.0
            std = float(present.std()) if present.size else 0.0
            if std > 0:
                vals = (vals - mean) / std
            else:
                vals = vals - mean
            vals[np.isnan(vals)] = 0.0
            columns.append(vals)
        else:
            tokens = sorted({v for v in raw if v is not None})
            code = {t: k for k, t in enumerate(tokens)}
            missing_code = len(tokens)
            columns.append(
                np.array([missing_code if v is None else code[v] for v in raw], dtype=float)
            )
        kinds.append(feat.kind)
        names.append(feat.name)

    if include_target:
        if labels is None:
            labels = dataset.labels()
        ordered = [labels[rec.user_id] for rec in dataset.records]
        if dataset.schema.target_kind == BRAND_SET:
            keys = sorted({tuple(sorted(s)) for s in ordered})
            code = {k: i for i, k in enumerate(keys)}
            col = np.array([code[tuple(sorted(s))] for s in ordered], dtype=float)
        else:
            col = np.array([int(v) for v in ordered], dtype=float)
        columns.append(col)
        kinds.append(CATEGORICAL)
        names.append(dataset.schema.target_name)

    return np.column_stack(columns), tuple(kinds), tuple(names)


# --- conditional-independence tests ------------------------------------------


class MixedCITester:
    """Fisher-z / G-squared hybrid over a pre-encoded matrix."""

    def __init__(
        self,
        data: np.ndarray,
        kinds: Sequence[str],
        alpha: float,
        n_bins: int = CI_BINS,
    ):
        self.data = np.asarray(data, dtype=float)
        self.kinds = tuple(kinds)
        self.alpha = alpha
        self.n = self.data.shape[0]
        d = self.data.shape[1]
        if len(self.kinds) != d:
            raise ValueError("kinds must cover every column")

        numeric_cols = [c for c in range(d) if self.kinds[c] == NUMERIC]
        self._numeric_pos = {c: k for k, c in enumerate(numeric_cols)}
        if numeric_cols:
            with np.errstate(invalid="ignore", divide="ignore"):
                self._corr = np.corrcoef(self.data[:, numeric_cols], rowvar=False)
            self._corr = np.atleast_2d(self._corr)
        else:
            self._corr = np.zeros((0, 0))

        # discrete codes for the G-squared path
        self._codes: list[np.ndarray] = []
        self._levels: list[int] = []
        for c in range(d):
            col = self.data[:, c]
            if self.kinds[c] == NUMERIC:
                codes = np.asarray(discretize(col.tolist(), n_bins), dtype=np.int64)
            else:
                codes = col.astype(np.int64)
            uniq, remapped = np.unique(codes, return_inverse=True)
            self._codes.append(remapped)
            self._levels.append(max(1, len(uniq)))

    def __call__(self, i: int, j: int, conditioning: tuple[int, ...]) -> CITestResult:
        return self.test(i, j, conditioning)

    def test(self, i: int, j: int, conditioning: Sequence[int]) -> CITestResult:
        cond = tuple(conditioning)
        if i == j or i in cond or j in cond:
            raise ValueError("i, j, and the conditioning set must be disjoint")
        if self.n < len(cond) + 3:
            raise InsufficientSamples(self.n, len(cond))

        involved = (i, j, *cond)
        if all(self.kinds[c] == NUMERIC for c in involved):
            p, diag = self._fisher_z(i, j, cond)
        else:
            p, diag = self._g_squared(i, j, cond)
        if diag == "singular_correlation":
            return CITestResult(i, j, cond, 0.0, False, diag)
        p = float(p)
        return CITestResult(i, j, cond, p, bool(p > self.alpha), diag)

    def _fisher_z(self, i: int, j: int, cond: tuple[int, ...]) -> tuple[float, str | None]:
        idx = [self._numeric_pos[c] for c in (i, j, *cond)]
        sub = self._corr[idx][:, idx]
        if not np.all(np.isfinite(sub)):
            return 0.0, "singular_correlation"
        try:
            prec = np.linalg.inv(sub)
        except np.linalg.LinAlgError:
            return 0.0, "singular_correlation"
        denom = prec[0, 0] * prec[1, 1]
        if denom <= 0 or not np.isfinite(denom):
            return 0.0, "singular_correlation"
        r = float(np.clip(-prec[0, 1] / math.sqrt(denom), -1.0, 1.0))
        dof = self.n - len(cond) - 3
        if abs(r) >= 1.0 - 1e-12:
            return 0.0, None
        if dof <= 0:
            return 1.0, None
        stat = math.sqrt(dof) * abs(math.atanh(r))
        # two-sided normal tail: 2 * sf(stat)
        return float(special.erfc(stat / math.sqrt(2.0))), None

    def _g_squared(self, i: int, j: int, cond: tuple[int, ...]) -> tuple[float, str | None]:
        xi, xj = self._codes[i], self._codes[j]
        li, lj = self._levels[i], self._levels[j]
        if cond:
            stratum = np.zeros(self.n, dtype=np.int64)
            for c in cond:
                stratum = stratum * self._levels[c] + self._codes[c]
            n_strata = 1
            for c in cond:
                n_strata *= self._levels[c]
        else:
            stratum = np.zeros(self.n, dtype=np.int64)
            n_strata = 1

        joint = (stratum * li + xi) * lj + xj
        counts = np.bincount(joint, minlength=n_strata * li * lj).reshape(n_strata, li, lj)
        counts = counts.astype(float)

        row_sums = counts.sum(axis=2)  # (strata, li)
        col_sums = counts.sum(axis=1)  # (strata, lj)
        totals = row_sums.sum(axis=1)  # (strata,)
        # zero-margin rows/columns contribute no observed cells and no dof
        r_eff = (row_sums > 0).sum(axis=1)
        c_eff = (col_sums > 0).sum(axis=1)
        dof = int((np.maximum(r_eff - 1, 0) * np.maximum(c_eff - 1, 0)).sum())
        if dof == 0:
            return 1.0, "degenerate_table"

        safe_totals = np.where(totals > 0, totals, 1.0)
        expected = (
            row_sums[:, :, None] * col_sums[:, None, :] / safe_totals[:, None, None]
        )
        observed_mask = counts > 0
        ratio = np.ones_like(counts)
        np.divide(counts, expected, out=ratio, where=observed_mask)
        g2 = 2.0 * float(np.sum(counts[observed_mask] * np.log(ratio[observed_mask])))
        return float(special.chdtrc(dof, g2)), None


def ci_test(
    data: np.ndarray,
    kinds: Sequence[str],
    i: int,
    j: int,
    conditioning: Sequence[int],
    alpha: float,
) -> CITestResult:
    """One-off conditional independence test over a pre-encoded matrix."""
    return MixedCITester(data, kinds, alpha).test(i, j, tuple(conditioning))


# --- skeleton search ----------------------------------------------------------


def _canonical_pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


def fci_skeleton(
    data: np.ndarray | None,
    alpha: float = 0.1,
    max_depth: int = 3,
    *,
    kinds: Sequence[str] | None = None,
    names: Sequence[str] | None = None,
    ci: CITester | None = None,
    n_bins: int = CI_BINS,
) -> tuple[Skeleton, dict[tuple[int, int], tuple[int, ...]]]:
    """Adjacency search plus Possible-D-SEP refinement.

    Either pass an encoded ``data`` matrix (with ``kinds``), or supply a
    custom ``ci`` callable together with ``names`` (used by oracle-driven
    tests). Returns the skeleton and the sepset store keyed by canonical
    node pair.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if ci is None:
        if data is None or kinds is None:
            raise ValueError("need data+kinds or an explicit ci tester")
        ci = MixedCITester(data, kinds, alpha, n_bins)
        n_nodes = data.shape[1]
    else:
        if names is None:
            raise ValueError("names are required with a custom ci tester")
        n_nodes = len(names)
    if names is None:
        names = tuple(f"x{v:03d}" for v in range(n_nodes))
    names = tuple(names)
    by_name = sorted(range(n_nodes), key=lambda v: names[v])
    rank = {v: k for k, v in enumerate(by_name)}

    cache: dict[tuple[int, int, tuple[int, ...]], CITestResult] = {}

    def tested(i: int, j: int, subset: tuple[int, ...]) -> CITestResult:
        a, b = _canonical_pair(i, j)
        key = (a, b, tuple(sorted(subset)))
        hit = cache.get(key)
        if hit is None:
            hit = ci(a, b, key[2])
            cache[key] = hit
        return hit

    adj: dict[int, set[int]] = {v: set(range(n_nodes)) - {v} for v in range(n_nodes)}
    edges = {
        _canonical_pair(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)
    }
    sepsets: dict[tuple[int, int], tuple[int, ...]] = {}

    def ordered_pairs() -> list[tuple[int, int]]:
        return sorted(edges, key=lambda e: (rank[e[0]], rank[e[1]]))

    for depth in range(max_depth + 1):
        snapshot = {v: sorted(adj[v], key=lambda u: rank[u]) for v in range(n_nodes)}
        any_candidates = False
        removals: list[tuple[int, int, tuple[int, ...]]] = []
        for i, j in ordered_pairs():
            found = None
            seen_subsets: set[tuple[int, ...]] = set()
            for base_node, other in ((i, j), (j, i)):
                base = [u for u in snapshot[base_node] if u != other]
                if len(base) < depth:
                    continue
                any_candidates = True
                for subset in combinations(base, depth):
                    key = tuple(sorted(subset))
                    if key in seen_subsets:
                        continue
                    seen_subsets.add(key)
                    result = tested(i, j, subset)
                    if result.independent:
                        found = key
                        break
                if found is not None:
                    break
            if found is not None:
                removals.append((i, j, found))
        for i, j, subset in removals:
            edges.discard((i, j))
            adj[i].discard(j)
            adj[j].discard(i)
            sepsets[(i, j)] = subset
        if not any_candidates:
            break

    # Possible-D-SEP refinement
    pdsep = _possible_dsep(n_nodes, adj, sepsets, rank)
    removals = []
    for i, j in ordered_pairs():
        found = None
        seen_subsets = set()
        for endpoint, other in ((i, j), (j, i)):
            base = sorted(pdsep[endpoint] - {i, j}, key=lambda u: rank[u])
            for size in range(1, max_depth + 1):
                if size > len(base):
                    break
                for subset in combinations(base, size):
                    key = tuple(sorted(subset))
                    if key in seen_subsets:
                        continue
                    seen_subsets.add(key)
                    result = tested(i, j, subset)
                    if result.independent:
                        found = key
                        break
                if found is not None:
                    break
            if found is not None:
                break
        if found is not None:
            removals.append((i, j, found))
    for i, j, subset in removals:
        edges.discard((i, j))
        adj[i].discard(j)
        adj[j].discard(i)
        sepsets[(i, j)] = subset

    return Skeleton(names, frozenset(edges)), sepsets


def _collider_arrows(
    n_nodes: int,
    adj: Mapping[int, set[int]],
    sepsets: Mapping[tuple[int, int], tuple[int, ...]],
    rank: Mapping[int, int],
) -> set[tuple[int, int]]:
    """Arrowheads (a, k) implied by unshielded triples a-k-b with k not in sepset."""
    arrows: set[tuple[int, int]] = set()
    for k in sorted(range(n_nodes), key=lambda v: rank[v]):
        nbrs = sorted(adj[k], key=lambda v: rank[v])
        for a, b in combinations(nbrs, 2):
            if b in adj[a]:
                continue
            sep = sepsets.get(_canonical_pair(a, b), ())
            if k not in sep:
                arrows.add((a, k))
                arrows.add((b, k))
    return arrows


def _possible_dsep(
    n_nodes: int,
    adj: Mapping[int, set[int]],
    sepsets: Mapping[tuple[int, int], tuple[int, ...]],
    rank: Mapping[int, int],
) -> dict[int, set[int]]:
    """Possible-D-SEP sets via pair-reachability.

    A walk step a-b-c is legal when b is a collider (arrowheads at b from
    both sides, per the temporary v-structure orientation) or when a and c
    are adjacent (triangle). Every node reachable from v by legal walks is
    in Possible-D-SEP(v).
    """
    arrows = _collider_arrows(n_nodes, adj, sepsets, rank)
    pdsep: dict[int, set[int]] = {}
    for v in range(n_nodes):
        reached = set(adj[v])
        frontier = [(v, n) for n in sorted(adj[v], key=lambda u: rank[u])]
        visited = set(frontier)
        while frontier:
            a, b = frontier.pop(0)
            for c in sorted(adj[b], key=lambda u: rank[u]):
                if c == a or c == v:
                    continue
                legal = ((a, b) in arrows and (c, b) in arrows) or (c in adj[a])
                if not legal:
                    continue
                reached.add(c)
                if (b, c) not in visited:
                    visited.add((b, c))
                    frontier.append((b, c))
        pdsep[v] = reached
    return pdsep


# --- PAG orientation ----------------------------------------------------------


@dataclass
class PartialAncestralGraph:
    nodes: tuple[str, ...]
    # marks[(i, j)] is the mark at j's end of edge i-j; both directions present
    marks: dict[tuple[int, int], str] = field(default_factory=dict)
    sepsets: dict[tuple[int, int], tuple[int, ...]] = field(default_factory=dict)

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.marks

    def mark(self, i: int, j: int) -> str | None:
        """Mark at j's end of the i-j edge, or None if not adjacent."""
        return self.marks.get((i, j))

    def set_mark(self, i: int, j: int, mark: str) -> bool:
        """Rewrite the mark at j's end; circles only (hard marks are kept)."""
        current = self.marks.get((i, j))
        if current is None or current == mark or current != CIRCLE:
            return False
        self.marks[(i, j)] = mark
        return True

    def adjacent(self, v: int) -> list[int]:
        return sorted(
            (j for (i, j) in self.marks if i == v), key=lambda u: self.nodes[u]
        )

    def edges(self) -> list[tuple[int, int]]:
        return sorted(
            ((i, j) for (i, j) in self.marks if i < j),
            key=lambda e: (self.nodes[e[0]], self.nodes[e[1]]),
        )

    def index_of(self, name: str) -> int:
        try:
            return self.nodes.index(name)
        except ValueError:
            raise TargetNotInGraph(name) from None

    def is_directed(self, i: int, j: int) -> bool:
        """True for i -> j (tail at i, arrowhead at j)."""
        return self.marks.get((j, i)) == TAIL and self.marks.get((i, j)) == ARROW

    def to_json(self) -> dict:
        edges = [
            {
                "a": self.nodes[i],
                "b": self.nodes[j],
                "mark_at_a": self.marks[(j, i)],
                "mark_at_b": self.marks[(i, j)],
            }
            for i, j in self.edges()
        ]
        seps = {
            "|".join(sorted((self.nodes[i], self.nodes[j]))): sorted(
                self.nodes[s] for s in sep
            )
            for (i, j), sep in self.sepsets.items()
        }
        return {
            "nodes": list(self.nodes),
            "edges": edges,
            "sepsets": {k: seps[k] for k in sorted(seps)},
        }


def orient_pag(
    skeleton: Skeleton, sepsets: Mapping[tuple[int, int], tuple[int, ...]]
) -> PartialAncestralGraph:
    """Orient the skeleton: colliders from sepsets, then rules R1-R4."""
    names = skeleton.names
    n_nodes = len(names)
    rank = {v: k for k, v in enumerate(sorted(range(n_nodes), key=lambda u: names[u]))}
    pag = PartialAncestralGraph(names, sepsets=dict(sepsets))
    for i, j in skeleton.edges:
        pag.marks[(i, j)] = CIRCLE
        pag.marks[(j, i)] = CIRCLE
    adj = skeleton.adjacency()

    # v-structures: i *-> k <-* j for unshielded triples with k outside sepset(i, j)
    for i, k in _collider_arrows(n_nodes, adj, sepsets, rank):
        pag.set_mark(i, k, ARROW)

    order = sorted(range(n_nodes), key=lambda v: rank[v])

    def rule_1() -> bool:
        changed = False
        for b in order:
            for a in pag.adjacent(b):
                if pag.mark(a, b) != ARROW:
                    continue
                for c in pag.adjacent(b):
                    if c == a or pag.has_edge(a, c):
                        continue
                    if pag.mark(c, b) == CIRCLE:
                        changed |= pag.set_mark(c, b, TAIL)
                        changed |= pag.set_mark(b, c, ARROW)
        return changed

    def rule_2() -> bool:
        changed = False
        for a in order:
            for c in pag.adjacent(a):
                if pag.mark(a, c) != CIRCLE:
                    continue
                for b in pag.adjacent(a):
                    if b == c or not pag.has_edge(b, c):
                        continue
                    chain_one = pag.is_directed(a, b) and pag.mark(b, c) == ARROW
                    chain_two = pag.mark(a, b) == ARROW and pag.is_directed(b, c)
                    if chain_one or chain_two:
                        changed |= pag.set_mark(a, c, ARROW)
                        break
        return changed

    def rule_3() -> bool:
        changed = False
        for b in order:
            nbrs = pag.adjacent(b)
            for a, c in combinations(nbrs, 2):
                if pag.has_edge(a, c):
                    continue
                if pag.mark(a, b) != ARROW or pag.mark(c, b) != ARROW:
                    continue
                for d in order:
                    if d in (a, b, c):
                        continue
                    if not (pag.has_edge(a, d) and pag.has_edge(c, d) and pag.has_edge(d, b)):
                        continue
                    if pag.mark(a, d) == CIRCLE and pag.mark(c, d) == CIRCLE:
                        if pag.mark(d, b) == CIRCLE:
                            changed |= pag.set_mark(d, b, ARROW)
        return changed

    def _discriminating_theta(b: int, c: int) -> tuple[int, int] | None:
        """Find (theta, alpha) of a discriminating path <theta, ..., alpha, b, c>.

        Searches backwards from b. Every vertex strictly between theta and b
        must be a collider on the path and a parent of c; theta is any node
        not adjacent to c. Deterministic: neighbors visited in name order.
        """
        parents = {v for v in pag.adjacent(c) if pag.is_directed(v, c) and v != b}
        stack: list[list[int]] = [[b, a] for a in reversed(pag.adjacent(b)) if a != c]
        while stack:
            path = stack.pop()
            tail_node = path[-1]
            prev = path[-2]
            # tail_node must qualify as an interior vertex before extending
            if tail_node not in parents or pag.mark(prev, tail_node) != ARROW:
                continue
            for nxt in reversed(pag.adjacent(tail_node)):
                if nxt in path or nxt == c:
                    continue
                if pag.mark(nxt, tail_node) != ARROW:
                    continue
                if not pag.has_edge(nxt, c):
                    return nxt, path[1]
                stack.append(path + [nxt])
        return None

    def rule_4() -> bool:
        changed = False
        for b in order:
            for c in pag.adjacent(b):
                if pag.mark(c, b) != CIRCLE:
                    continue
                found = _discriminating_theta(b, c)
                if found is None:
                    continue
                theta, alpha = found
                sep = pag.sepsets.get(_canonical_pair(theta, c), ())
                if b in sep:
                    changed |= pag.set_mark(c, b, TAIL)
                    changed |= pag.set_mark(b, c, ARROW)
                else:
                    changed |= pag.set_mark(alpha, b, ARROW)
                    changed |= pag.set_mark(b, alpha, ARROW)
                    changed |= pag.set_mark(b, c, ARROW)
                    changed |= pag.set_mark(c, b, ARROW)
        return changed

    while True:
        changed = rule_1()
        changed |= rule_2()
        changed |= rule_3()
        changed |= rule_4()
        if not changed:
            break
    return pag


# --- causal feature set --------------------------------------------------------


@dataclass(frozen=True)
class CausalFeatureSet:
    entries: tuple[tuple[str, float, str], ...]  # (feature, mi score, mark at target)
    p_used: int

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _, _ in self.entries)

    def to_json(self) -> dict:
        return {
            "p": self.p_used,
            "features": [
                {"feature": name, "mi": score, "mark_at_target": mark}
                for name, score, mark in self.entries
            ],
        }


def causal_features(
    pag: PartialAncestralGraph,
    target: str,
    mi: Sequence[MIScore] | Mapping[str, float],
    p: int,
) -> CausalFeatureSet:
    """Top-p features adjacent to the target, ranked by mutual information."""
    if p < 1:
        raise ValueError("p must be >= 1")
    y = pag.index_of(target)
    if isinstance(mi, Mapping):
        scores = dict(mi)
    else:
        scores = {s.feature_name: s.score for s in mi}
    # mark recorded is the endpoint mark at the target end of each edge
    adjacent = [
        (pag.nodes[v], scores[pag.nodes[v]], pag.marks[(v, y)]) for v in pag.adjacent(y)
    ]
    adjacent.sort(key=lambda e: (-e[1], e[0]))
    return CausalFeatureSet(tuple(adjacent[:p]), p)


def pag_to_json_str(pag: PartialAncestralGraph) -> str:
    return json.dumps(pag.to_json(), indent=2, sort_keys=False)
