"""Red-blue pebble game: schedules, replay/validation and schedule generators.

Rules enforced by :func:`validate_schedule` (all counts per move):

* initially every input is blue and nothing is red;
* ``load v`` needs v blue, makes it red (1 I/O);
* ``store v`` needs v red, makes it blue (1 I/O);
* ``compute v`` needs v non-input with all predecessors red, makes v red;
* ``evict v`` removes a red pebble for free;
* the red set never exceeds the cache size, and every output ends blue.
"""
from __future__ import annotations

import heapq
import json
import math
from array import array
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence

from .builders import build_naive, build_strassen
from .cdag import INPUT, Cdag, VertexId

LOAD, STORE, COMPUTE, EVICT = 0, 1, 2, 3
OP_NAMES = ("load", "store", "compute", "evict")
_OP_CODE = {name: i for i, name in enumerate(OP_NAMES)}

FREE, NO_RECOMPUTE = "free", "no-recompute"


class ScheduleError(Exception):
    """Invalid move; ``index`` is the 0-based move position (None for end-of-run checks)."""

    kind = "invalid"

    def __init__(self, message: str, index: int | None = None, vertex: str | None = None):
        self.index = index
        self.vertex = vertex
        where = f"move {index}: " if index is not None else ""
        super().__init__(where + message)


class CacheOverflow(ScheduleError):
    kind = "cache-overflow"


class MissingOperand(ScheduleError):
    kind = "missing-operand"


class NotBlue(ScheduleError):
    kind = "load-of-non-blue"


class NotRed(ScheduleError):
    kind = "not-red"


class InputCompute(ScheduleError):
    kind = "compute-of-input"


class Recomputation(ScheduleError):
    kind = "recomputation"


class OutputNotBlue(ScheduleError):
    kind = "output-not-blue"


class BadMove(ScheduleError):
    kind = "bad-move"


class CacheTooSmall(ValueError):
    pass


class Move(NamedTuple):
    op: str
    vertex: str


@dataclass
class Schedule:
    """Move list bound to one CDAG; vertices are stored as graph indices."""

    ops: array
    verts: array
    cache: int
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return zip(self.ops, self.verts)

    @classmethod
    def empty(cls, cache: int, **meta) -> "Schedule":
        return cls(array("b"), array("l"), cache, dict(meta))

    @classmethod
    def from_moves(cls, g: Cdag, moves: Iterable[Move | tuple[str, str]], cache: int) -> "Schedule":
        s = cls.empty(cache)
        for i, (op, v) in enumerate(moves):
            if op not in _OP_CODE:
                raise BadMove(f"unknown op {op!r}", i)
            if v not in g:
                raise BadMove(f"unknown vertex {v!r}", i)
            s.ops.append(_OP_CODE[op])
            s.verts.append(g.index(v))
        return s

    def moves(self, g: Cdag) -> list[Move]:
        return [Move(OP_NAMES[o], g.ids[v]) for o, v in self]


@dataclass
class PebbleState:
    red: set[int]
    blue: set[int]
    loads: int = 0
    stores: int = 0
    computed: dict[int, int] = field(default_factory=dict)

    @property
    def io(self) -> int:
        return self.loads + self.stores


@dataclass(frozen=True)
class IoStats:
    io_total: int
    loads: int
    stores: int
    computes: int
    peak_red: int
    recomputed_vertices: int

    def to_dict(self) -> dict:
        return asdict(self)


def validate_schedule(g: Cdag, s: Schedule, M: int | None = None, mode: str = FREE) -> IoStats:
    """Replay ``s`` on ``g`` with a cache of ``M`` words (default: ``s.cache``)."""
    M = s.cache if M is None else M
    if M < 1:
        raise ValueError("cache size must be >= 1")
    if mode not in (FREE, NO_RECOMPUTE):
        raise ValueError(f"unknown mode {mode!r}")
    strict = mode == NO_RECOMPUTE
    nv = len(g)
    kinds, preds, ids = g.kinds, g.preds, g.ids
    red = bytearray(nv)
    blue = bytearray(nv)
    for v in g.inputs:
        blue[v] = 1
    computed = {}
    nred = peak = loads = stores = computes = 0
    for i, (op, v) in enumerate(zip(s.ops, s.verts)):
        if not 0 <= v < nv:
            raise BadMove(f"vertex index {v} out of range", i)
        if op == COMPUTE:
            if kinds[v] == INPUT:
                raise InputCompute(f"cannot compute input {ids[v]}", i, ids[v])
            for u in preds[v]:
                if not red[u]:
                    raise MissingOperand(f"operand {ids[u]} of {ids[v]} is not in cache", i, ids[v])
            c = computed.get(v, 0) + 1
            if strict and c > 1:
                raise Recomputation(f"{ids[v]} computed twice in no-recompute mode", i, ids[v])
            computed[v] = c
            computes += 1
            if not red[v]:
                red[v] = 1
                nred += 1
        elif op == LOAD:
            if not blue[v]:
                raise NotBlue(f"load of {ids[v]} which is not in slow memory", i, ids[v])
            loads += 1
            if not red[v]:
                red[v] = 1
                nred += 1
        elif op == STORE:
            if not red[v]:
                raise NotRed(f"store of {ids[v]} which is not in cache", i, ids[v])
            stores += 1
            blue[v] = 1
        elif op == EVICT:
            if not red[v]:
                raise NotRed(f"evict of {ids[v]} which is not in cache", i, ids[v])
            red[v] = 0
            nred -= 1
        else:
            raise BadMove(f"unknown op code {op}", i)
        if nred > M:
            raise CacheOverflow(f"{nred} red pebbles exceed cache size {M}", i, ids[v])
        if nred > peak:
            peak = nred
    for v in g.outputs:
        if not blue[v]:
            raise OutputNotBlue(f"output {ids[v]} not in slow memory at end", None, ids[v])
    return IoStats(
        io_total=loads + stores, loads=loads, stores=stores, computes=computes,
        peak_red=peak, recomputed_vertices=sum(1 for c in computed.values() if c > 1),
    )


# --------------------------------------------------------------------------
# cache management for a fixed evaluation order


def min_cache(g: Cdag) -> int:
    """Smallest cache admitting any schedule: the widest compute plus its result."""
    return g.max_fan_in() + 1


def schedule_order(g: Cdag, order: Sequence[int], M: int, **meta) -> Schedule:
    """No-recompute schedule computing ``order`` (each non-input vertex once).

    Loads operands on demand and evicts the red value whose next use is
    furthest away, storing it first when it is still needed and not yet
    blue.  Dead values leave the cache right after their last use and
    outputs are stored as soon as they are computed.
    """
    need = min_cache(g)
    if M < need:
        raise CacheTooSmall(f"cache {M} below minimum {need} (max fan-in {need - 1} + result)")
    nv = len(g)
    preds = g.preds
    INF = len(order) + 1
    uses: list[list[int]] = [[] for _ in range(nv)]
    for t, v in enumerate(order):
        for u in preds[v]:
            uses[u].append(t)
    ptr = [0] * nv
    red = bytearray(nv)
    blue = bytearray(nv)
    for v in g.inputs:
        blue[v] = 1
    is_out = bytearray(nv)
    for v in g.outputs:
        is_out[v] = 1
    heap: list[tuple[int, int]] = []  # (-next_use, v), lazily invalidated
    ops, verts = array("b"), array("l")
    nred = 0

    def next_use(u):
        p = ptr[u]
        lst = uses[u]
        return lst[p] if p < len(lst) else INF

    def make_room():
        nonlocal nred
        while True:
            neg, u = heapq.heappop(heap)
            if red[u] and -neg == next_use(u):
                break
        if not blue[u]:
            ops.append(STORE)
            verts.append(u)
            blue[u] = 1
        ops.append(EVICT)
        verts.append(u)
        red[u] = 0
        nred -= 1

    for t, v in enumerate(order):
        for u in preds[v]:
            if red[u]:
                continue
            if not blue[u]:
                raise RuntimeError(f"operand {g.ids[u]} lost before use")
            if nred >= M:
                make_room()
            ops.append(LOAD)
            verts.append(u)
            red[u] = 1
            nred += 1
            heapq.heappush(heap, (-t, u))
        if nred >= M:
            make_room()
        ops.append(COMPUTE)
        verts.append(v)
        red[v] = 1
        nred += 1
        for u in preds[v]:
            ptr[u] += 1
            nu = next_use(u)
            if nu == INF:
                if is_out[u] and not blue[u]:
                    ops.append(STORE)
                    verts.append(u)
                    blue[u] = 1
                ops.append(EVICT)
                verts.append(u)
                red[u] = 0
                nred -= 1
            else:
                heapq.heappush(heap, (-nu, u))
        if is_out[v]:
            ops.append(STORE)
            verts.append(v)
            blue[v] = 1
        nu = next_use(v)
        if nu == INF:
            ops.append(EVICT)
            verts.append(v)
            red[v] = 0
            nred -= 1
        else:
            heapq.heappush(heap, (-nu, v))
    return Schedule(ops, verts, M, dict(meta))


def peak_demand(g: Cdag, order: Sequence[int] | None = None) -> int:
    """Peak red pebbles of an in-cache run (no cache limit, dead values dropped at once)."""
    order = [v for v in g.topo if g.kinds[v] != INPUT] if order is None else order
    s = schedule_order(g, order, M=len(g) + 1)
    return validate_schedule(g, s, mode=NO_RECOMPUTE).peak_red


_WORKING_SET: dict[int, int] = {}


def working_set(s: int) -> int:
    """Peak red demand of evaluating H^{s x s} entirely in cache."""
    if s not in _WORKING_SET:
        g, _ = build_strassen(s)
        _WORKING_SET[s] = peak_demand(g)
    return _WORKING_SET[s]


def blocked_block_size(n: int, M: int) -> int:
    """Largest power-of-two block s <= n whose in-cache evaluation fits in M words (0 if none)."""
    s, best = 1, 0
    while s <= n and working_set(s) <= M:
        best = s
        s *= 2
    return best


def blocked_order(g: Cdag, n: int, block: int) -> list[int]:
    """Evaluation order of the blocked schedule over ``build_strassen(n)``.

    Sub-problems of size ``block`` or less keep the depth-first build
    order, which is what :func:`working_set` measures.  Larger ones:

    * encoder combinations are computed lazily, child by child, one level
      above the in-cache blocks, and otherwise all at once, one block
      position at a time so each quadrant element is loaded once;
    * the decoder of the last child is interleaved with the parent's
      decoder, so its results are consumed without a round trip to slow
      memory.
    """
    enc: dict[tuple, list] = {}
    dec: dict[tuple, list] = {}
    prod: dict[tuple, int] = {}
    for v in g.topo:
        if g.kinds[v] == INPUT:
            continue
        vid = VertexId.parse(g.ids[v])
        if vid.role == "product":
            prod[vid.path] = v
        elif vid.role == "dec-out":
            dec.setdefault(vid.path, []).append((vid.index, v))
        else:
            enc.setdefault(vid.path, []).append((vid.index, vid.role, v))
    index_of = {v: idx for lst in dec.values() for idx, v in lst}
    owner = {v: path for path, lst in dec.items() for _, v in lst}
    owner.update((v, path) for path, v in prod.items())
    at = {path: dict(lst) for path, lst in dec.items()}

    def body(path, size, out):
        if size == 1:
            return
        h = size // 2
        children = [path + (k,) for k in range(1, 8)]
        if size <= block:
            for c in children:
                out.extend(v for *_, v in enc.get(c, ()))
                body(c, h, out)
                out.extend(stream(c, h))
            return
        lazy = size <= 2 * block
        if not lazy:
            pending = [(idx, role, k, v) for k, c in enumerate(children) for idx, role, v in enc.get(c, ())]
            out.extend(v for *_, v in sorted(pending))
        for c in children:
            if lazy:
                out.extend(v for *_, v in enc.get(c, ()))
            body(c, h, out)
            if c != children[-1]:
                out.extend(stream(c, h))

    def stream(path, size):
        if size == 1:
            return [prod[path]]
        if size <= block:
            return [v for _, v in dec[path]]
        h = size // 2
        last = path + (7,)
        mine = at[path]
        out = []
        for v in stream(last, h):
            out.append(v)
            if owner[v] != last:
                continue
            if h == 1:
                r = c = 0
            else:
                r, c = index_of[v]
            out.extend(mine[(br * h + r, bc * h + c)] for br in range(2) for bc in range(2))
        return out

    order: list[int] = []
    body((), n, order)
    order.extend(stream((), n))
    return order


def generate_blocked_schedule(n: int, M: int, graph: Cdag | None = None) -> Schedule:
    """Recursive schedule for ``build_strassen(n)``.

    Blocks of size :func:`blocked_block_size` run entirely in cache; above
    that, encoder combinations are streamed through cache and spilled, and
    the cache itself is managed by :func:`schedule_order`.
    """
    g = graph if graph is not None else build_strassen(n)[0]
    block = blocked_block_size(n, M)
    return schedule_order(g, blocked_order(g, n, block), M, strategy="blocked", n=n, block=block)


def naive_tile(M: int) -> int:
    """Tile width b with b*b partial sums, a row of B, one A value and two temporaries in cache."""
    b = max(1, math.isqrt(M))
    while b > 1 and b * b + b + 3 > M:
        b -= 1
    return b


def naive_order(g: Cdag, n: int, b: int) -> list[int]:
    """Tiled i-j-k order over the definition-based CDAG: each C tile accumulates across all k."""
    prod, acc = {}, {}
    for v in range(len(g)):
        role = g.roles[v]
        if role in ("product", "sum", "dec-out"):
            vid = VertexId.parse(g.ids[v])
            (prod if role == "product" else acc)[vid.index] = v
    order = []
    for i0 in range(0, n, b):
        for j0 in range(0, n, b):
            for k in range(n):
                for i in range(i0, min(i0 + b, n)):
                    for j in range(j0, min(j0 + b, n)):
                        order.append(prod[(i, j, k)])
                        if k:
                            order.append(acc[(i, j, k)])
    return order


def generate_naive_schedule(n: int, M: int, graph: Cdag | None = None) -> Schedule:
    g = graph if graph is not None else build_naive(n)
    b = naive_tile(M)
    return schedule_order(g, naive_order(g, n, b), M, strategy="naive", n=n, tile=b)


# --------------------------------------------------------------------------
# comparison with a bound


@dataclass(frozen=True)
class IoComparison:
    measured_io: int
    bound_value: float
    ratio: float
    violation: bool

    def to_dict(self) -> dict:
        return asdict(self)


def io_lower_report(g: Cdag, s: Schedule, M: int, bound, mode: str = FREE) -> IoComparison:
    """Replay ``s`` and compare its I/O with ``bound`` (a number or an object with ``.value``)."""
    stats = validate_schedule(g, s, M, mode)
    value = getattr(bound, "value", bound)
    return IoComparison(
        measured_io=stats.io_total,
        bound_value=float(value),
        ratio=stats.io_total / max(float(value), 1.0),
        violation=stats.io_total < value,
    )


# --------------------------------------------------------------------------
# trace files (JSON Lines)


def write_trace(g: Cdag, s: Schedule, path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"schema": "sched/1", "cache": s.cache}) + "\n")
        for o, v in s:
            fh.write(json.dumps({"op": OP_NAMES[o], "v": g.ids[v]}) + "\n")


class TraceError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


def read_trace(g: Cdag, path) -> Schedule:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TraceError("empty trace", 1)
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceError(f"bad header: {exc.msg}", 1) from None
    if not isinstance(head, dict) or head.get("schema") != "sched/1" or not isinstance(head.get("cache"), int):
        raise TraceError("header must be {\"schema\": \"sched/1\", \"cache\": int}", 1)
    s = Schedule.empty(head["cache"])
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            op, v = rec["op"], rec["v"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise TraceError("malformed move record", no) from None
        if op not in _OP_CODE:
            raise TraceError(f"unknown op {op!r}", no)
        if v not in g:
            raise TraceError(f"unknown vertex {v!r}", no)
        s.ops.append(_OP_CODE[op])
        s.verts.append(g.index(v))
        s.meta.setdefault("lines", []).append(no)
    return s


def trace_line(s: Schedule, index: int | None) -> int | None:
    """Map a move index back to its line number in the trace it was read from."""
    if index is None:
        return None
    lines = s.meta.get("lines")
    return lines[index] if lines else index + 2
