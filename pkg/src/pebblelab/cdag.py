"""Immutable computational DAG (CDAG) with validation and serialization.

Vertices are addressed by string ids.  Builders render ids from
:class:`VertexId` (recursion path, role, index) so that ids are stable
across runs and carry the recursive structure of the construction.
Internally a sealed :class:`Cdag` uses dense integer indices in
insertion order; all adjacency lists are sorted by topological position.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import jsonschema

ROLES = (
    "input-A",
    "input-B",
    "enc-A-out",
    "enc-B-out",
    "product",
    "sum",
    "dec-out",
    "generic",
)
_ROLE_RANK = {r: i for i, r in enumerate(ROLES)}

# vertex operation kinds
INPUT, MUL, LIN = "in", "mul", "lin"


class CdagError(ValueError):
    """Raised when a draft graph or a serialized document is invalid."""


@dataclass(frozen=True)
class VertexId:
    """Hierarchical vertex name: recursion path, role and a small index."""

    path: tuple[int, ...]
    role: str
    index: tuple[int, ...] = ()

    def __post_init__(self):
        if self.role not in _ROLE_RANK:
            raise CdagError(f"unknown role {self.role!r}")

    def __str__(self) -> str:
        path = "r" + "".join(f".{d}" for d in self.path)
        return f"{path}|{self.role}|{','.join(map(str, self.index))}"

    def sort_key(self):
        return (self.path, _ROLE_RANK[self.role], self.index)

    def __lt__(self, other: "VertexId") -> bool:
        return self.sort_key() < other.sort_key()

    @classmethod
    def parse(cls, text: str) -> "VertexId":
        try:
            path, role, index = text.split("|")
            if not path.startswith("r"):
                raise ValueError(text)
            digits = tuple(int(d) for d in path[1:].split(".")[1:])
            idx = tuple(int(i) for i in index.split(",")) if index else ()
        except ValueError as exc:
            raise CdagError(f"malformed vertex id {text!r}") from exc
        return cls(digits, role, idx)


class CdagDraft:
    """Mutable, single-owner graph under construction.

    ``kind`` of a vertex is ``"mul"`` for a product of its two operands and
    ``"lin"`` for a linear combination with per-edge coefficients; declared
    inputs are turned into ``"in"`` at seal time.
    """

    def __init__(self, builder: str = "manual", params: dict | None = None):
        self.meta = {"builder": builder, "params": dict(params or {})}
        self._names: list[str] = []
        self._roles: list[str] = []
        self._kinds: list[str] = []
        self._index: dict[str, int] = {}
        self._edges: list[tuple[str, str, Fraction | int]] = []
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self._duplicates: list[str] = []

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def add_vertex(self, name: str, role: str = "generic", kind: str = LIN) -> str:
        if role not in _ROLE_RANK:
            raise CdagError(f"unknown role {role!r}")
        if name in self._index:
            self._duplicates.append(name)
            return name
        self._index[name] = len(self._names)
        self._names.append(name)
        self._roles.append(role)
        self._kinds.append(kind)
        return name

    def add_edge(self, u: str, v: str, coeff: Fraction | int = 1) -> None:
        self._edges.append((u, v, coeff))

    def seal(self) -> "Cdag":
        if self._duplicates:
            raise CdagError(f"duplicate vertex id {self._duplicates[0]!r}")
        idx = self._index
        nv = len(self._names)
        preds: list[list[int]] = [[] for _ in range(nv)]
        coeffs: list[list] = [[] for _ in range(nv)]
        for u, v, c in self._edges:
            if u not in idx or v not in idx:
                missing = u if u not in idx else v
                raise CdagError(f"dangling edge endpoint {missing!r} in edge {u!r}->{v!r}")
            preds[idx[v]].append(idx[u])
            coeffs[idx[v]].append(c)
        inputs = [self._resolve(x) for x in self.inputs]
        outputs = [self._resolve(x) for x in self.outputs]
        if len(set(inputs)) != len(inputs) or len(set(outputs)) != len(outputs):
            raise CdagError("inputs/outputs must not repeat")
        kinds = list(self._kinds)
        input_set = set(inputs)
        for i in range(nv):
            if i in input_set:
                if preds[i]:
                    raise CdagError(f"input {self._names[i]!r} has nonzero in-degree")
                kinds[i] = INPUT
            elif not preds[i]:
                raise CdagError(f"non-input vertex {self._names[i]!r} has in-degree 0")
        return Cdag._from_parts(
            self._names, self._roles, kinds, preds, coeffs, inputs, outputs, self.meta
        )

    def _resolve(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise CdagError(f"declared input/output {name!r} is not a vertex") from None


class Cdag:
    """Sealed, immutable CDAG.  Safe to share between concurrent readers."""

    __slots__ = (
        "ids", "roles", "kinds", "preds", "succs", "coeffs", "inputs", "outputs",
        "topo", "topo_pos", "meta", "families", "_index", "_output_set",
    )

    @classmethod
    def _from_parts(cls, names, roles, kinds, preds, coeffs, inputs, outputs, meta):
        g = cls.__new__(cls)
        nv = len(names)
        g.ids = tuple(names)
        g._index = {name: i for i, name in enumerate(names)}
        g.roles = tuple(roles)
        g.kinds = tuple(kinds)
        g.inputs = tuple(inputs)
        g.outputs = tuple(outputs)
        g._output_set = frozenset(outputs)
        g.meta = meta
        g.families = {}
        g.topo = _topological_order(preds, nv)
        pos = [0] * nv
        for p, v in enumerate(g.topo):
            pos[v] = p
        g.topo_pos = tuple(pos)
        succs: list[list[int]] = [[] for _ in range(nv)]
        order_p, order_c = [], []
        for v in range(nv):
            pairs = sorted(zip(preds[v], coeffs[v]), key=lambda t: pos[t[0]])
            order_p.append(tuple(p for p, _ in pairs))
            order_c.append(tuple(c for _, c in pairs))
            for u, _ in pairs:
                succs[u].append(v)
        g.preds = tuple(order_p)
        g.coeffs = tuple(order_c)
        g.succs = tuple(tuple(sorted(s, key=pos.__getitem__)) for s in succs)
        return g

    # -- lookup -------------------------------------------------------------
    def __len__(self) -> int:
        return len(self.ids)

    @property
    def num_edges(self) -> int:
        return sum(len(p) for p in self.preds)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"vertex {name!r} not in graph") from None

    def indices(self, names: Iterable[str]) -> list[int]:
        return [self.index(n) for n in names]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def is_output(self, v: int) -> bool:
        return v in self._output_set

    def edges(self) -> Iterator[tuple[str, str]]:
        for v, ps in enumerate(self.preds):
            for u in ps:
                yield self.ids[u], self.ids[v]

    def edge_set(self) -> set[tuple[str, str]]:
        return set(self.edges())

    def vertices_with_role(self, role: str) -> list[int]:
        return [i for i, r in enumerate(self.roles) if r == role]

    def max_fan_in(self) -> int:
        return max((len(p) for p in self.preds), default=0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cdag):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.roles == other.roles
            and self.inputs == other.inputs
            and self.outputs == other.outputs
            and all(
                dict(zip(a, ca)) == dict(zip(b, cb))
                for a, ca, b, cb in zip(self.preds, self.coeffs, other.preds, other.coeffs)
            )
        )

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"Cdag({self.meta.get('builder')!r}, vertices={len(self)}, "
            f"edges={self.num_edges}, inputs={len(self.inputs)}, outputs={len(self.outputs)})"
        )

    # -- reachability helpers used by the analyses ---------------------------
    def ancestors(self, targets: Iterable[int], blocked: frozenset | set = frozenset()) -> set[int]:
        """Vertices with a path to ``targets`` (targets included), not passing ``blocked``."""
        seen = {t for t in targets if t not in blocked}
        stack = list(seen)
        preds = self.preds
        while stack:
            v = stack.pop()
            for u in preds[v]:
                if u not in seen and u not in blocked:
                    seen.add(u)
                    stack.append(u)
        return seen

    def descendants(self, sources: Iterable[int], blocked: frozenset | set = frozenset()) -> set[int]:
        seen = {s for s in sources if s not in blocked}
        stack = list(seen)
        succs = self.succs
        while stack:
            v = stack.pop()
            for w in succs[v]:
                if w not in seen and w not in blocked:
                    seen.add(w)
                    stack.append(w)
        return seen


def _topological_order(preds: Sequence[Sequence[int]], nv: int) -> tuple[int, ...]:
    # builders emit vertices in a topological order; then insertion order is
    # exactly what the min-index Kahn traversal below would produce
    if all(p < v for v in range(nv) for p in preds[v]):
        return tuple(range(nv))
    indeg = [len(p) for p in preds]
    succs: list[list[int]] = [[] for _ in range(nv)]
    for v in range(nv):
        for u in preds[v]:
            succs[u].append(v)
    heap = [v for v in range(nv) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for w in succs[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, w)
    if len(order) != nv:
        raise CdagError("cycle detected")
    return tuple(order)


# --------------------------------------------------------------------------
# sub-CDAGs and families


@dataclass
class SubCdagFamily:
    """Vertex sets of same-size sub-CDAGs at one recursion level.

    ``inputs``/``outputs`` keep each member's ordered input and output ids
    (A then B, row-major) so members can be compared to fresh builds.
    """

    level: int
    size: int
    members: list[frozenset[str]]
    claimed_count: int
    inputs: list[tuple[str, ...]] = field(default_factory=list)
    outputs: list[tuple[str, ...]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    def overlapping_pairs(self) -> list[tuple[int, int]]:
        """Pairs of members sharing a vertex (empty for a valid family)."""
        owner: dict[str, int] = {}
        bad = set()
        for j, m in enumerate(self.members):
            for v in m:
                i = owner.setdefault(v, j)
                if i != j:
                    bad.add((i, j))
        return sorted(bad)

    def is_disjoint(self) -> bool:
        union = set().union(*self.members) if self.members else set()
        return len(union) == sum(len(m) for m in self.members)


def induced_sub_cdag(g: Cdag, members: Iterable[str]) -> Cdag:
    """Sub-CDAG induced by ``members``.

    Inputs are members without an in-edge from another member; outputs are
    declared outputs of ``g`` plus non-input members feeding a vertex
    outside the set.
    """
    keep = set()
    for name in members:
        if name not in g:
            raise CdagError(f"member {name!r} not in graph")
        keep.add(g.index(name))
    order = sorted(keep)
    draft = CdagDraft(builder=f"induced({g.meta.get('builder')})", params={})
    for v in order:
        draft.add_vertex(g.ids[v], g.roles[v], g.kinds[v] if g.kinds[v] != INPUT else LIN)
    for v in order:
        for u, c in zip(g.preds[v], g.coeffs[v]):
            if u in keep:
                draft.add_edge(g.ids[u], g.ids[v], c)
    inside_pred = {v for v in order if any(u in keep for u in g.preds[v])}
    draft.inputs = [g.ids[v] for v in order if v not in inside_pred]
    draft.outputs = [
        g.ids[v] for v in order
        if g.is_output(v) or (v in inside_pred and any(w not in keep for w in g.succs[v]))
    ]
    return draft.seal()


def disjoint_union(graphs: Sequence[Cdag], builder: str = "union") -> Cdag:
    """Place copies of ``graphs`` side by side; ids get a ``g<k>:`` prefix."""
    draft = CdagDraft(builder=builder, params={"parts": [g.meta for g in graphs]})
    for k, g in enumerate(graphs):
        pre = f"g{k}:"
        for v in g.topo:
            draft.add_vertex(pre + g.ids[v], g.roles[v], g.kinds[v] if g.kinds[v] != INPUT else LIN)
            for u, c in zip(g.preds[v], g.coeffs[v]):
                draft.add_edge(pre + g.ids[u], pre + g.ids[v], c)
        draft.inputs += [pre + g.ids[v] for v in g.inputs]
        draft.outputs += [pre + g.ids[v] for v in g.outputs]
    return draft.seal()


def binarize(g: Cdag) -> Cdag:
    """Split every linear vertex of fan-in k > 2 into a left fold of k-1 binary adds."""
    draft = CdagDraft(builder=f"binarized({g.meta.get('builder')})", params=dict(g.meta.get("params", {})))
    for v in g.topo:
        name, ps, cs = g.ids[v], g.preds[v], g.coeffs[v]
        if g.kinds[v] != LIN or len(ps) <= 2:
            draft.add_vertex(name, g.roles[v], g.kinds[v] if g.kinds[v] != INPUT else LIN)
            for u, c in zip(ps, cs):
                draft.add_edge(g.ids[u], name, c)
            continue
        acc = None
        for j in range(1, len(ps)):
            tmp = name if j == len(ps) - 1 else f"{name}#{j}"
            draft.add_vertex(tmp, g.roles[v] if tmp == name else "sum", LIN)
            if acc is None:
                draft.add_edge(g.ids[ps[0]], tmp, cs[0])
            else:
                draft.add_edge(acc, tmp, 1)
            draft.add_edge(g.ids[ps[j]], tmp, cs[j])
            acc = tmp
    draft.inputs = [g.ids[v] for v in g.inputs]
    draft.outputs = [g.ids[v] for v in g.outputs]
    return draft.seal()


# --------------------------------------------------------------------------
# evaluation


def evaluate(g: Cdag, input_values: Sequence[int], modulus: int) -> list[int]:
    """Evaluate ``g`` over the integers mod ``modulus``; returns output values in order."""
    if len(input_values) != len(g.inputs):
        raise ValueError(f"expected {len(g.inputs)} input values, got {len(input_values)}")
    val = [0] * len(g)
    for v, x in zip(g.inputs, input_values):
        val[v] = x % modulus
    for v in g.topo:
        kind = g.kinds[v]
        if kind == INPUT:
            continue
        ps = g.preds[v]
        if kind == MUL:
            acc = 1
            for u in ps:
                acc = acc * val[u] % modulus
        else:
            acc = 0
            for u, c in zip(ps, g.coeffs[v]):
                acc += _mod_coeff(c, modulus) * val[u]
            acc %= modulus
        val[v] = acc
    return [val[v] for v in g.outputs]


def _mod_coeff(c, modulus: int) -> int:
    if isinstance(c, Fraction):
        return c.numerator * pow(c.denominator, -1, modulus) % modulus
    return c % modulus


# --------------------------------------------------------------------------
# structural comparison


def canonical_labels(g: Cdag, inputs: Sequence[str] | None = None,
                     table: dict | None = None) -> list[int]:
    """Label every vertex by the expression it computes from the ordered inputs.

    Two graphs whose label multisets match and whose labels are unique are
    isomorphic via the label correspondence (checked by :func:`isomorphic`).
    Vertices not reachable from ``inputs`` get label -1.
    """
    table = {} if table is None else table
    order = g.indices(inputs) if inputs is not None else list(g.inputs)
    lab = [-1] * len(g)
    for pos, v in enumerate(order):
        lab[v] = table.setdefault(("in", pos), len(table))
    start = set(order)
    for v in g.topo:
        if v in start:
            continue
        ps = g.preds[v]
        if not ps or any(lab[u] < 0 for u in ps):
            continue
        key = (g.kinds[v], tuple(sorted((lab[u], str(c)) for u, c in zip(ps, g.coeffs[v]))))
        lab[v] = table.setdefault(key, len(table))
    return lab


def isomorphic(g1: Cdag, g2: Cdag, inputs1: Sequence[str] | None = None,
               inputs2: Sequence[str] | None = None) -> bool:
    """Input-order-anchored isomorphism test with an explicit, verified bijection."""
    if len(g1) != len(g2) or g1.num_edges != g2.num_edges:
        return False
    table: dict = {}
    l1 = canonical_labels(g1, inputs1, table)
    l2 = canonical_labels(g2, inputs2, table)
    if -1 in l1 or -1 in l2 or len(set(l1)) != len(l1) or len(set(l2)) != len(l2):
        return False
    where2 = {lab: v for v, lab in enumerate(l2)}
    try:
        phi = [where2[lab] for lab in l1]
    except KeyError:
        return False
    for v in range(len(g1)):
        w = phi[v]
        if g1.kinds[v] != g2.kinds[w]:
            return False
        e1 = {(phi[u], str(c)) for u, c in zip(g1.preds[v], g1.coeffs[v])}
        e2 = {(u, str(c)) for u, c in zip(g2.preds[w], g2.coeffs[w])}
        if e1 != e2:
            return False
    outs1 = sorted(phi[v] for v in g1.outputs)
    return outs1 == sorted(g2.outputs)


# --------------------------------------------------------------------------
# serialization

SCHEMA_ID = "cdag/1"

CDAG_SCHEMA = {
    "type": "object",
    "required": ["schema", "meta", "vertices", "edges", "inputs", "outputs"],
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "meta": {
            "type": "object",
            "required": ["builder", "params"],
            "properties": {"builder": {"type": "string"}, "params": {"type": "object"}},
        },
        "vertices": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "role"],
                "properties": {
                    "id": {"type": "string"},
                    "role": {"enum": list(ROLES)},
                    "op": {"enum": [MUL, LIN]},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "array",
                "minItems": 2,
                "maxItems": 3,
                "prefixItems": [{"type": "string"}, {"type": "string"},
                                {"type": ["integer", "string"]}],
            },
        },
        "inputs": {"type": "array", "items": {"type": "string"}},
        "outputs": {"type": "array", "items": {"type": "string"}},
    },
}


def _coeff_to_json(c):
    if isinstance(c, Fraction):
        return c.numerator if c.denominator == 1 else str(c)
    return c


def to_json(g: Cdag) -> dict:
    """Serialize to the ``cdag/1`` document.  Edge coefficients other than 1 ride as a third item."""
    vertices = []
    for v in range(len(g)):
        entry = {"id": g.ids[v], "role": g.roles[v]}
        if g.kinds[v] != INPUT:
            entry["op"] = g.kinds[v]
        vertices.append(entry)
    edges = []
    for v in range(len(g)):
        for u, c in zip(g.preds[v], g.coeffs[v]):
            edges.append([g.ids[u], g.ids[v]] if c == 1 else [g.ids[u], g.ids[v], _coeff_to_json(c)])
    return {
        "schema": SCHEMA_ID,
        "meta": {"builder": g.meta.get("builder", ""), "params": g.meta.get("params", {})},
        "vertices": vertices,
        "edges": edges,
        "inputs": [g.ids[v] for v in g.inputs],
        "outputs": [g.ids[v] for v in g.outputs],
    }


def from_json(doc: dict) -> Cdag:
    try:
        jsonschema.validate(doc, CDAG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise CdagError(f"schema violation: {exc.message}") from None
    draft = CdagDraft(doc["meta"]["builder"], doc["meta"]["params"])
    for entry in doc["vertices"]:
        draft.add_vertex(entry["id"], entry["role"], entry.get("op", LIN))
    for e in doc["edges"]:
        c = e[2] if len(e) == 3 else 1
        draft.add_edge(e[0], e[1], Fraction(c) if isinstance(c, str) else c)
    draft.inputs = list(doc["inputs"])
    draft.outputs = list(doc["outputs"])
    return draft.seal()


def dump(g: Cdag, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json(g), fh, separators=(",", ":"))


def load(path) -> Cdag:
    with open(path) as fh:
        return from_json(json.load(fh))


def to_dot(g: Cdag) -> str:
    """Graphviz text; one cluster per level-1 sub-CDAG when families are attached."""
    lines = ["digraph cdag {", "  rankdir=BT;", "  node [shape=circle, label=\"\", width=0.15];"]
    clustered = set()
    fam = g.families.get(1)
    if fam is not None:
        for k, member in enumerate(fam.members):
            lines.append(f"  subgraph cluster_{k} {{")
            lines.append(f"    label=\"sub-CDAG {k + 1}\";")
            for name in sorted(member, key=g.index):
                lines.append(f"    \"{name}\";")
            lines.append("  }")
            clustered.update(member)
    for v in range(len(g)):
        if g.ids[v] in clustered:
            continue
        shape = "box" if v in g.inputs or g.is_output(v) else "circle"
        lines.append(f"  \"{g.ids[v]}\" [shape={shape}];")
    for u, v in g.edges():
        lines.append(f"  \"{u}\" -> \"{v}\";")
    lines.append("}")
    return "\n".join(lines) + "\n"
