"""Minimum (post-)dominator sets by vertex min-cut, a brute-force oracle,
and Grigoriev-flow evaluation for matrix multiplication.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .cdag import Cdag, SubCdagFamily

DOMINATOR, POST_DOMINATOR = "dominator", "post-dominator"


class QueryError(ValueError):
    pass


class SearchExhausted(Exception):
    def __init__(self, max_size: int):
        self.max_size = max_size
        super().__init__(f"exhausted({max_size})")


class LemmaViolation(AssertionError):
    pass


@dataclass(frozen=True)
class DominatorQuery:
    """Dominator query (sources = graph inputs) or post-dominator query (explicit sources).

    Vertex arguments are graph indices.
    """

    graph: Cdag
    targets: tuple[int, ...]
    sources: tuple[int, ...] | None = None
    mode: str = DOMINATOR

    def __post_init__(self):
        g = self.graph
        if not self.targets:
            raise QueryError("targets must be nonempty")
        if self.mode not in (DOMINATOR, POST_DOMINATOR):
            raise QueryError(f"unknown mode {self.mode!r}")
        if any(not 0 <= v < len(g) for v in self.all_vertices()):
            raise QueryError("query vertex not in graph")
        if self.mode == POST_DOMINATOR:
            if not self.sources:
                raise QueryError("post-dominator query needs sources")
            if any(g.is_output(v) for v in self.sources):
                raise QueryError("post-dominator sources must exclude outputs")

    def all_vertices(self):
        return tuple(self.targets) + tuple(self.sources or ())

    @property
    def source_set(self) -> tuple[int, ...]:
        return self.graph.inputs if self.mode == DOMINATOR else tuple(self.sources)

    @classmethod
    def dominator(cls, g: Cdag, targets: Iterable[int]) -> "DominatorQuery":
        return cls(g, tuple(sorted(set(targets))))

    @classmethod
    def post_dominator(cls, g: Cdag, sources: Iterable[int], outputs: Iterable[int]) -> "DominatorQuery":
        return cls(g, tuple(sorted(set(outputs))), tuple(sorted(set(sources))), POST_DOMINATOR)


@dataclass(frozen=True)
class DominatorResult:
    size: int
    witness: frozenset[int]
    method: str


def separates(g: Cdag, sources: Iterable[int], targets: Iterable[int], cut: Iterable[int]) -> bool:
    """True when every source-to-target path meets ``cut`` (paths of length 0 included)."""
    cut = set(cut)
    reach = g.descendants(sources, blocked=cut)
    return reach.isdisjoint(targets)


def _relevant(g: Cdag, sources, targets) -> set[int]:
    return g.descendants(sources) & g.ancestors(targets)


def vertex_cut(g: Cdag, sources: Iterable[int], targets: Iterable[int]) -> tuple[int, frozenset[int]]:
    """Maximum number of vertex-disjoint source->target paths and a minimum vertex cut.

    Every vertex (sources and targets included) has capacity 1.  Augmenting
    paths are found by BFS with neighbours visited in topological order, and
    the returned cut is the one closest to the sources, so results are
    reproducible.
    """
    sources = sorted(set(sources), key=g.topo_pos.__getitem__)
    target_set = set(targets)
    rel = _relevant(g, sources, target_set)
    if not rel:
        return 0, frozenset()
    preds, succs = g.preds, g.succs
    through = {}          # vertex -> 1 when its in->out arc is saturated
    edge_flow = {}        # (u, w) -> units on original edge
    src_order = [s for s in sources if s in rel]
    flow = 0
    # residual nodes are (v, side) with side 0 = in, 1 = out; -1/-2 = super source/sink
    while True:
        parent = {}
        queue = deque()
        for s in src_order:
            node = (s, 0)
            if node not in parent:
                parent[node] = None
                queue.append(node)
        hit = None
        while queue:
            node = queue.popleft()
            v, side = node
            if side == 0:
                if not through.get(v):
                    nxt = (v, 1)
                    if nxt not in parent:
                        parent[nxt] = node
                        queue.append(nxt)
                for u in preds[v]:
                    if edge_flow.get((u, v)):
                        nxt = (u, 1)
                        if nxt not in parent:
                            parent[nxt] = node
                            queue.append(nxt)
            else:
                if v in target_set and not through.get(("t", v)):
                    hit = node
                    break
                for w in succs[v]:
                    if w in rel:
                        nxt = (w, 0)
                        if nxt not in parent:
                            parent[nxt] = node
                            queue.append(nxt)
                if through.get(v):
                    nxt = (v, 0)
                    if nxt not in parent:
                        parent[nxt] = node
                        queue.append(nxt)
        if hit is None:
            break
        flow += 1
        through[("t", hit[0])] = 1
        node = hit
        while parent[node] is not None:
            prev = parent[node]
            (a, sa), (b, sb) = prev, node
            if a == b:
                through[a] = 1 if sa == 0 else 0
            elif sa == 1:
                edge_flow[(a, b)] = edge_flow.get((a, b), 0) + 1
            else:
                edge_flow[(b, a)] -= 1
            node = prev
    # source side of the final residual graph: the parent map of the last BFS
    reach_in = {v for (v, side) in parent if side == 0}
    reach_out = {v for (v, side) in parent if side == 1}
    cut = frozenset(v for v in reach_in if v not in reach_out)
    return flow, cut


def _solve(q: DominatorQuery) -> DominatorResult:
    g = q.graph
    size, cut = vertex_cut(g, q.source_set, q.targets)
    if len(cut) != size or not separates(g, q.source_set, q.targets, cut):
        raise AssertionError(f"min-cut witness failed re-verification: size {size}, cut {sorted(cut)}")
    return DominatorResult(size, cut, "mincut")


def min_dominator(q: DominatorQuery) -> DominatorResult:
    """Minimum dominator of ``q.targets`` w.r.t. the graph inputs (targets may belong to it)."""
    if q.mode != DOMINATOR:
        raise QueryError("use min_postdominator for post-dominator queries")
    return _solve(q)


def min_postdominator(q: DominatorQuery) -> DominatorResult:
    if q.mode != POST_DOMINATOR:
        raise QueryError("use min_dominator for dominator queries")
    return _solve(q)


def brute_force_min_dominator(q: DominatorQuery, max_size: int) -> DominatorResult:
    """Smallest separating vertex set by enumeration in increasing cardinality."""
    g = q.graph
    if len(g) > 40 and max_size > 4:
        raise QueryError("brute force limited to graphs of <= 40 vertices or max_size <= 4")
    sources = q.source_set
    rel = sorted(_relevant(g, sources, q.targets), key=g.topo_pos.__getitem__)
    if not rel:
        return DominatorResult(0, frozenset(), "brute")
    bit = {v: 1 << i for i, v in enumerate(rel)}
    src_mask = sum(bit[s] for s in sources if s in bit)
    tgt_mask = sum(bit[t] for t in q.targets if t in bit)
    pred_masks = [(bit[v], sum(bit[u] for u in g.preds[v] if u in bit)) for v in rel]

    def leaks(cut_mask: int) -> bool:
        reach = 0
        for b, pm in pred_masks:
            if b & cut_mask:
                continue
            if b & src_mask or reach & pm:
                reach |= b
        return bool(reach & tgt_mask)

    for k in range(0, min(max_size, len(rel)) + 1):
        for combo in itertools.combinations(range(len(rel)), k):
            mask = 0
            for i in combo:
                mask |= 1 << i
            if not leaks(mask):
                cut = frozenset(rel[i] for i in combo)
                assert separates(g, sources, q.targets, cut)
                return DominatorResult(k, cut, "brute")
    raise SearchExhausted(max_size)


# --------------------------------------------------------------------------
# Grigoriev flow


@dataclass(frozen=True)
class FlowQuery:
    u: int
    v: int
    n: int
    ring_size: int = 2

    def __post_init__(self):
        if not (0 <= self.u <= 2 * self.n ** 2 and 0 <= self.v <= self.n ** 2):
            raise QueryError(f"need 0 <= u <= {2 * self.n ** 2} and 0 <= v <= {self.n ** 2}")

    @property
    def bound(self) -> Fraction:
        return flow_lower_bound(self.u, self.v, self.n)


def flow_lower_bound(u: int, v: int, n: int) -> Fraction:
    """max(0, (v - (2n^2 - u)^2 / (4n^2)) / 2) for the n x n product."""
    if not (0 <= u <= 2 * n * n and 0 <= v <= n * n):
        raise QueryError(f"need 0 <= u <= {2 * n * n} and 0 <= v <= {n * n}")
    w = Fraction(1, 2) * (v - Fraction((2 * n * n - u) ** 2, 4 * n * n))
    return max(w, Fraction(0))


ENUMERATION_CAP = 2 ** 30


def _all_products(n: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Every input vector in F_p^{2n^2} (A row-major, then B) and its product, row-major."""
    k = 2 * n * n
    total = p ** k
    if total > ENUMERATION_CAP:
        raise QueryError(f"instance too large: {p}^{k} assignments exceed 2^30")
    digits = np.arange(total, dtype=np.int64)[:, None] // (p ** np.arange(k - 1, -1, -1, dtype=np.int64)) % p
    A = digits[:, : n * n].reshape(-1, n, n)
    B = digits[:, n * n:].reshape(-1, n, n)
    C = np.einsum("tik,tkj->tij", A, B) % p
    return digits, C.reshape(total, n * n)


_PRODUCTS: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def empirical_flow(n: int, p: int, X1: Sequence[int], Y1: Sequence[int]) -> int:
    """Largest image size on outputs ``Y1`` over all sub-functions freeing inputs ``X1``.

    Inputs are indexed 0..2n^2-1 (A row-major, then B), outputs 0..n^2-1.
    """
    if n > 2 or p > 3 or len(X1) > 8:
        raise QueryError("empirical flow limited to n <= 2, p <= 3, |X1| <= 8")
    if any(not 0 <= x < 2 * n * n for x in X1) or any(not 0 <= y < n * n for y in Y1):
        raise QueryError("subset index out of range")
    key = (n, p)
    if key not in _PRODUCTS:
        _PRODUCTS[key] = _all_products(n, p)
    digits, C = _PRODUCTS[key]
    fixed = [i for i in range(2 * n * n) if i not in set(X1)]
    group = np.zeros(len(digits), dtype=np.int64)
    for i in fixed:
        group = group * p + digits[:, i]
    image = np.zeros(len(digits), dtype=np.int64)
    for y in Y1:
        image = image * p + C[:, y]
    pairs = np.unique(group * (p ** len(Y1)) + image)
    counts = np.bincount(pairs // (p ** len(Y1)))
    return int(counts.max())


def inputs_reaching(g: Cdag, targets: Iterable[int], inputs: Iterable[int], blocked: Iterable[int] = ()) -> set[int]:
    """Members of ``inputs`` with a path to ``targets`` that avoids ``blocked``.

    Inputs are terminal: a path may start at one but never pass through one.
    """
    inputs, blocked = set(inputs), set(blocked)
    core = g.ancestors(targets, blocked=blocked | inputs)
    hit = {u for v in core for u in g.preds[v] if u in inputs and u not in blocked}
    return hit | (inputs.intersection(targets) - blocked)


def check_internal_flow_bound(g: Cdag, family: SubCdagFamily, outputs: Iterable[int],
                              gamma: Iterable[int]) -> int:
    """Count family inputs with a Gamma-avoiding path to ``outputs`` and check it against 2n sqrt(|O'|-2|Gamma|)."""
    from .bounds import internal_flow_inputs

    inside = set()
    for m in family.members:
        inside |= set(g.indices(m))
    ins = {v for names in family.inputs for v in g.indices(names)}
    gamma = set(gamma)
    outputs = set(outputs)
    if gamma & ins:
        raise QueryError("Gamma must not contain input vertices")
    if not gamma <= inside:
        raise QueryError("Gamma must consist of internal vertices of the family")
    if len(gamma) > 2 * len(outputs):
        raise QueryError("need |Gamma| <= 2|O'|")
    blocked = gamma | (set(range(len(g))) - inside)
    reaching = inputs_reaching(g, outputs, ins, blocked)
    need = internal_flow_inputs(family.size, len(outputs), len(gamma))
    if need is not None and len(reaching) < need - 1e-9:
        raise LemmaViolation(f"|I'| = {len(reaching)} < {need:.4f}")
    return len(reaching)


def ceil_pow(p: int, w: Fraction) -> int:
    return p ** math.ceil(w)
