"""CDAG builders: Strassen, definition-based, and (n0, m0)-Strassen-like schemes."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Sequence

from .cdag import LIN, MUL, Cdag, CdagDraft, SubCdagFamily, VertexId

# Encoder/decoder tables, keyed by sub-problem number 1..7.  Block
# positions are (row, col) with 0-based indices: (0, 0) is the 1,1 block.
ENC_A: dict[int, dict[tuple[int, int], int]] = {
    1: {(0, 0): 1, (1, 1): 1},
    2: {(1, 0): 1, (1, 1): 1},
    3: {(0, 0): 1},
    4: {(1, 1): 1},
    5: {(0, 0): 1, (0, 1): 1},
    6: {(1, 0): 1, (0, 0): -1},
    7: {(0, 1): 1, (1, 1): -1},
}
ENC_B: dict[int, dict[tuple[int, int], int]] = {
    1: {(0, 0): 1, (1, 1): 1},
    2: {(0, 0): 1},
    3: {(0, 1): 1, (1, 1): -1},
    4: {(1, 0): 1, (0, 0): -1},
    5: {(1, 1): 1},
    6: {(0, 0): 1, (0, 1): 1},
    7: {(1, 0): 1, (1, 1): 1},
}
DEC: dict[tuple[int, int], dict[int, int]] = {
    (0, 0): {1: 1, 4: 1, 5: -1, 7: 1},
    (0, 1): {3: 1, 5: 1},
    (1, 0): {2: 1, 4: 1},
    (1, 1): {1: 1, 2: -1, 3: 1, 6: 1},
}

PRIME_31 = 2**31 - 1


class BuildError(ValueError):
    pass


def _is_power(n: int, base: int) -> bool:
    if n < 1 or base < 2:
        return False
    while n % base == 0:
        n //= base
    return n == 1


def _vid(path, role, index=()) -> str:
    return str(VertexId(tuple(path), role, tuple(index)))


# --------------------------------------------------------------------------
# building blocks


def _encoder_block(side: str) -> Cdag:
    table = ENC_A if side == "A" else ENC_B
    in_role, out_role = f"input-{side}", f"enc-{side}-out"
    d = CdagDraft(builder=f"encoder-{side}", params={})
    ins = {pos: d.add_vertex(_vid((), in_role, pos), in_role) for pos in [(0, 0), (0, 1), (1, 0), (1, 1)]}
    outs = []
    for k in range(1, 8):
        terms = table[k]
        if _pass_through(terms):
            outs.append(ins[next(iter(terms))])
            continue
        v = d.add_vertex(_vid((k,), out_role), out_role, LIN)
        for pos, c in terms.items():
            d.add_edge(ins[pos], v, c)
        outs.append(v)
    d.inputs = list(ins.values())
    d.outputs = outs
    return d.seal()


def build_encoder(side: str) -> Cdag:
    """Enc_A or Enc_B: 4 inputs, 7 outputs; pass-through outputs are the input vertex itself."""
    if side not in ("A", "B"):
        raise BuildError(f"side must be 'A' or 'B', got {side!r}")
    return _encoder_block(side)


def build_decoder() -> Cdag:
    d = CdagDraft(builder="decoder", params={})
    ms = [d.add_vertex(_vid((k,), "product"), "product") for k in range(1, 8)]
    outs = []
    for pos, terms in DEC.items():
        v = d.add_vertex(_vid((), "dec-out", pos), "dec-out", LIN)
        for k, c in terms.items():
            d.add_edge(ms[k - 1], v, c)
        outs.append(v)
    d.inputs = ms
    d.outputs = outs
    return d.seal()


def _pass_through(terms) -> bool:
    return len(terms) == 1 and next(iter(terms.values())) == 1


# --------------------------------------------------------------------------
# recursive construction


@dataclass
class _Call:
    path: tuple[int, ...]
    size: int
    inputs: tuple[str, ...]
    outputs: tuple[str, ...] = ()
    start: int = 0
    end: int = 0


@dataclass
class BuildReport:
    vertex_count: int
    edge_count: int
    input_count: int
    output_count: int
    base: int
    branches: int
    calls: dict[tuple[int, ...], _Call] = field(repr=False, default_factory=dict)
    names: Sequence[str] = field(repr=False, default=())
    _families: dict[int, SubCdagFamily] = field(repr=False, default_factory=dict)
    _family_rule: object = field(repr=False, default=None)

    @property
    def depth(self) -> int:
        return max((len(p) for p in self.calls), default=0)

    def member(self, path: tuple[int, ...]) -> frozenset[str]:
        c = self.calls[path]
        return frozenset(c.inputs) | frozenset(self.names[c.start:c.end])

    def family(self, level: int) -> SubCdagFamily:
        if level not in self._families:
            if not 0 <= level <= self.depth:
                raise BuildError(f"level {level} outside 0..{self.depth}")
            paths, claimed = self._family_rule(self, level)
            self._families[level] = SubCdagFamily(
                level=level,
                size=self.calls[paths[0]].size,
                members=[self.member(p) for p in paths],
                claimed_count=claimed,
                inputs=[self.calls[p].inputs for p in paths],
                outputs=[self.calls[p].outputs for p in paths],
            )
        return self._families[level]

    @property
    def families(self) -> list[SubCdagFamily]:
        return [self.family(i) for i in range(self.depth + 1)]


class _Recursion:
    """Shared recursion for Strassen and Strassen-like builders.

    ``enc_a``/``enc_b`` map branch -> {(block row, block col): coeff};
    ``dec`` maps output block -> {branch: coeff}.  Encoder outputs for
    branch k are created just before recursing into k, so insertion order
    is a depth-first evaluation order.
    """

    def __init__(self, draft: CdagDraft, n0: int, enc_a, enc_b, dec):
        self.d = draft
        self.n0 = n0
        self.enc = {"A": enc_a, "B": enc_b}
        self.dec = dec
        self.branches = sorted(enc_a)
        self.calls: dict[tuple[int, ...], _Call] = {}

    def run(self, path, A, B):
        n = len(A)
        call = _Call(path, n, tuple(x for row in A for x in row) + tuple(x for row in B for x in row))
        self.calls[path] = call
        call.start = len(self.d._names)
        d = self.d
        if n == 1:
            v = d.add_vertex(_vid(path, "product"), "product", MUL)
            d.add_edge(A[0][0], v)
            d.add_edge(B[0][0], v)
            C = [[v]]
        else:
            h = n // self.n0
            sub = {}
            for k in self.branches:
                child = path + (k,)
                Ak = self._encode("A", k, child, A, h)
                Bk = self._encode("B", k, child, B, h)
                sub[k] = self.run(child, Ak, Bk)
            C = [[None] * n for _ in range(n)]
            for (br, bc), terms in self.dec.items():
                for r in range(h):
                    for c in range(h):
                        pos = (br * h + r, bc * h + c)
                        v = d.add_vertex(_vid(path, "dec-out", pos), "dec-out", LIN)
                        for k, coeff in terms.items():
                            d.add_edge(sub[k][r][c], v, coeff)
                        C[pos[0]][pos[1]] = v
        call.end = len(d._names)
        call.outputs = tuple(x for row in C for x in row)
        return C

    def _encode(self, side, k, child, X, h):
        terms = self.enc[side][k]
        role = f"enc-{side}-out"
        if _pass_through(terms):
            (br, bc), = terms
            return [[X[br * h + r][bc * h + c] for c in range(h)] for r in range(h)]
        out = []
        for r in range(h):
            row = []
            for c in range(h):
                v = self.d.add_vertex(_vid(child, role, (r, c)), role, LIN)
                for (br, bc), coeff in terms.items():
                    self.d.add_edge(X[br * h + r][bc * h + c], v, coeff)
                row.append(v)
            out.append(row)
        return out


def _inputs(d: CdagDraft, n: int):
    A = [[d.add_vertex(_vid((), "input-A", (r, c)), "input-A") for c in range(n)] for r in range(n)]
    B = [[d.add_vertex(_vid((), "input-B", (r, c)), "input-B") for c in range(n)] for r in range(n)]
    return A, B


def _assemble(d: CdagDraft, rec: _Recursion, n: int, base: int, rule) -> tuple[Cdag, BuildReport]:
    A, B = _inputs(d, n)
    C = rec.run((), A, B)
    d.inputs = [x for row in A for x in row] + [x for row in B for x in row]
    d.outputs = [x for row in C for x in row]
    g = d.seal()
    report = BuildReport(
        vertex_count=len(g), edge_count=g.num_edges,
        input_count=len(g.inputs), output_count=len(g.outputs),
        base=base, branches=len(rec.branches), calls=rec.calls, names=g.ids,
        _family_rule=rule,
    )
    if report.depth >= 1:
        g.families[1] = report.family(1)
    return g, report


def _strassen_rule(report: BuildReport, level: int):
    paths = sorted(p for p in report.calls if len(p) == level)
    return paths, report.branches ** level


def build_strassen(n: int) -> tuple[Cdag, BuildReport]:
    """Strassen's CDAG H^{n x n} with merged pass-through encoder outputs."""
    if not _is_power(n, 2):
        raise BuildError(f"n must be a power of 2, got {n}")
    d = CdagDraft(builder="strassen", params={"n": n})
    rec = _Recursion(d, 2, ENC_A, ENC_B, DEC)
    return _assemble(d, rec, n, 2, _strassen_rule)


def build_naive(n: int) -> Cdag:
    """Definition-based product: n^3 products, left-fold sums per output."""
    if n < 1:
        raise BuildError(f"n must be >= 1, got {n}")
    d = CdagDraft(builder="naive", params={"n": n})
    A, B = _inputs(d, n)
    outs = []
    for i in range(n):
        for j in range(n):
            acc = None
            for k in range(n):
                p = d.add_vertex(_vid((), "product", (i, j, k)), "product", MUL)
                d.add_edge(A[i][k], p)
                d.add_edge(B[k][j], p)
                if acc is None:
                    acc = p
                    continue
                role = "dec-out" if k == n - 1 else "sum"
                s = d.add_vertex(_vid((), role, (i, j, k)), role, LIN)
                d.add_edge(acc, s)
                d.add_edge(p, s)
                acc = s
            outs.append(acc)
    d.inputs = [x for row in A for x in row] + [x for row in B for x in row]
    d.outputs = outs
    return d.seal()


# --------------------------------------------------------------------------
# Strassen-like schemes


@dataclass(frozen=True)
class StrassenLikeSpec:
    """Bilinear base case: ``dec @ ((encA @ vec A) * (encB @ vec B)) == vec(A @ B)``.

    ``vec`` is row-major over the n0 x n0 block grid.
    """

    n0: int
    m0: int
    encA: tuple[tuple[Fraction, ...], ...]
    encB: tuple[tuple[Fraction, ...], ...]
    dec: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        validate_spec(self)

    @classmethod
    def from_lists(cls, n0, m0, encA, encB, dec) -> "StrassenLikeSpec":
        conv = lambda M: tuple(tuple(_frac(x) for x in row) for row in M)  # noqa: E731
        return cls(int(n0), int(m0), conv(encA), conv(encB), conv(dec))

    @classmethod
    def from_json(cls, doc: dict) -> "StrassenLikeSpec":
        if doc.get("schema") != "mmspec/1":
            raise BuildError("spec document must have schema 'mmspec/1'")
        try:
            return cls.from_lists(doc["n0"], doc["m0"], doc["encA"], doc["encB"], doc["dec"])
        except KeyError as exc:
            raise BuildError(f"spec document missing key {exc}") from None

    def to_json(self) -> dict:
        conv = lambda M: [[int(x) if x.denominator == 1 else str(x) for x in row] for row in M]  # noqa: E731
        return {"schema": "mmspec/1", "n0": self.n0, "m0": self.m0,
                "encA": conv(self.encA), "encB": conv(self.encB), "dec": conv(self.dec)}

    def terms(self, side: str) -> dict[int, dict[tuple[int, int], Fraction]]:
        M = self.encA if side == "A" else self.encB
        n0 = self.n0
        return {k + 1: {divmod(j, n0): c for j, c in enumerate(row) if c != 0} for k, row in enumerate(M)}

    def dec_terms(self) -> dict[tuple[int, int], dict[int, Fraction]]:
        return {divmod(j, self.n0): {k + 1: c for k, c in enumerate(row) if c != 0}
                for j, row in enumerate(self.dec)}

    def nontrivial(self, side: str) -> list[int]:
        """Branches whose operand on ``side`` combines two or more blocks."""
        return [k for k, t in self.terms(side).items() if len(t) >= 2]


def _frac(x) -> Fraction:
    if isinstance(x, float) and not x.is_integer():
        raise BuildError(f"non-exact coefficient {x!r}; use an integer or 'p/q' string")
    return Fraction(x) if not isinstance(x, float) else Fraction(int(x))


def validate_spec(spec: StrassenLikeSpec, trials: int = 8, modulus: int = PRIME_31, seed: int = 0) -> None:
    n0, m0 = spec.n0, spec.m0
    if n0 < 2 or m0 < 1:
        raise BuildError("need n0 >= 2 and m0 >= 1")
    for name, M, rows, cols in (("encA", spec.encA, m0, n0 * n0), ("encB", spec.encB, m0, n0 * n0),
                                ("dec", spec.dec, n0 * n0, m0)):
        if len(M) != rows or any(len(r) != cols for r in M):
            raise BuildError(f"{name} must be {rows} x {cols}")
    for side, M in (("A", spec.encA), ("B", spec.encB)):
        seen = set()
        for k, row in enumerate(M, 1):
            nz = tuple((j, c) for j, c in enumerate(row) if c != 0)
            if not nz:
                raise BuildError(f"enc{side} row {k} is zero")
            if len(nz) >= 2:
                if nz in seen:
                    raise BuildError(f"enc{side} row {k} repeats a linear combination used by another product")
                seen.add(nz)
        if not seen:
            raise BuildError(f"enc{side} forms no linear combination; not a Strassen-like scheme")
    rng = random.Random(seed)
    red = lambda c: c.numerator * pow(c.denominator, -1, modulus) % modulus  # noqa: E731
    for _ in range(trials):
        a = [rng.randrange(modulus) for _ in range(n0 * n0)]
        b = [rng.randrange(modulus) for _ in range(n0 * n0)]
        prods = []
        for k in range(m0):
            x = sum(red(c) * a[j] for j, c in enumerate(spec.encA[k])) % modulus
            y = sum(red(c) * b[j] for j, c in enumerate(spec.encB[k])) % modulus
            prods.append(x * y % modulus)
        for j in range(n0 * n0):
            r, c = divmod(j, n0)
            want = sum(a[r * n0 + t] * b[t * n0 + c] for t in range(n0)) % modulus
            got = sum(red(spec.dec[j][k]) * prods[k] for k in range(m0)) % modulus
            if got != want:
                raise BuildError("spec does not compute the matrix product")


def strassen_spec() -> StrassenLikeSpec:
    """Bundled Strassen coefficients (n0=2, m0=7)."""
    text = resources.files("pebblelab.data").joinpath("strassen_2_7.json").read_text()
    return StrassenLikeSpec.from_json(json.loads(text))


def load_spec(path) -> StrassenLikeSpec:
    with open(path) as fh:
        return StrassenLikeSpec.from_json(json.load(fh))


def _like_rule(spec: StrassenLikeSpec):
    nt_a, nt_b = spec.nontrivial("A"), spec.nontrivial("B")

    def rule(report: BuildReport, level: int):
        if level >= 2:
            # descend from every level-(i-2) sub-problem: first child with a
            # combined A operand, then its first child with a combined B operand
            paths = []
            for p in sorted(q for q in report.calls if len(q) == level - 2):
                paths.append(p + (nt_a[0], nt_b[0]))
            return paths, spec.m0 ** (level - 2)
        chosen, used = [], set()
        for p in sorted(q for q in report.calls if len(q) == level):
            m = report.member(p)
            if used.isdisjoint(m):
                chosen.append(p)
                used |= m
        return chosen, 1

    return rule


def build_strassen_like(spec: StrassenLikeSpec, n: int) -> tuple[Cdag, BuildReport]:
    if not _is_power(n, spec.n0):
        raise BuildError(f"n must be a power of n0={spec.n0}, got {n}")
    d = CdagDraft(builder="strassen-like", params={"n": n, "n0": spec.n0, "m0": spec.m0})
    rec = _Recursion(d, spec.n0, spec.terms("A"), spec.terms("B"), spec.dec_terms())
    return _assemble(d, rec, n, spec.n0, _like_rule(spec))
