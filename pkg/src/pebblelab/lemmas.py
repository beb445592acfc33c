"""Desk-scale verifiers for the combinatorial lemmas behind the I/O bounds.

Every verifier returns a :class:`LemmaVerdict`; nothing is raised for a
violated inequality, so a sweep always runs to completion.
"""
from __future__ import annotations

import csv
import itertools
import math
import random
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Iterable, Sequence

from . import bounds
from .builders import ENC_A, ENC_B, StrassenLikeSpec, build_strassen, build_strassen_like
from .cdag import Cdag, disjoint_union, induced_sub_cdag, isomorphic
from .domflow import (DominatorQuery, empirical_flow, flow_lower_bound, inputs_reaching, min_dominator,
                      vertex_cut)

DEFAULT_SEED = 42
EXHAUSTIVE_CUTOFF = 10**6
SAMPLES = 10**4

POSITIONS = [(0, 0), (0, 1), (1, 0), (1, 1)]


@dataclass
class LemmaVerdict:
    lemma_id: str
    instances_checked: int = 0
    violations: list = field(default_factory=list)
    runtime: float = 0.0
    seed: int | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.lemma_id}: {status} ({self.instances_checked} checked, {len(self.violations)} violations)"


class _Timer:
    def __init__(self, verdict: LemmaVerdict):
        self.v = verdict

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self.v

    def __exit__(self, *exc):
        self.v.runtime = time.perf_counter() - self.t0
        return False


# --------------------------------------------------------------------------
# encoder connectivity


@dataclass(frozen=True)
class EncoderSubsetCode:
    """Output subset of an encoder; bit y_i has weight 2**(7 - i)."""

    code: int

    def __post_init__(self):
        if not 0 <= self.code < 128:
            raise ValueError(f"code must be in 0..127, got {self.code}")

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.code >> (7 - i)) & 1 for i in range(1, 8))

    @property
    def outputs(self) -> list[int]:
        return [i for i, y in enumerate(self.bits, 1) if y]

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "EncoderSubsetCode":
        if len(bits) != 7 or any(b not in (0, 1) for b in bits):
            raise ValueError("need seven 0/1 bits")
        return cls(sum(b << (7 - i) for i, b in enumerate(bits, 1)))


def encoder_neighbours(side: str) -> dict[int, list[int]]:
    """Output i -> encoder input positions (0..3, row-major) it depends on."""
    table = ENC_A if side == "A" else ENC_B
    return {k: sorted(POSITIONS.index(pos) for pos in table[k]) for k in range(1, 8)}


def max_matching(adj: dict[int, Sequence[int]]) -> int:
    """Size of a maximum matching of a bipartite graph given as left -> right lists."""
    match: dict[int, int] = {}

    def augment(u, seen):
        for w in adj[u]:
            if w in seen:
                continue
            seen.add(w)
            if w not in match or augment(match[w], seen):
                match[w] = u
                return True
        return False

    return sum(augment(u, set()) for u in adj)


def encoder_max_disjoint(side: str, code: EncoderSubsetCode | int) -> int:
    """Largest set of encoder inputs joined to distinct outputs of the subset."""
    if not isinstance(code, EncoderSubsetCode):
        code = EncoderSubsetCode(code)
    nb = encoder_neighbours(side)
    return max_matching({i: nb[i] for i in code.outputs})


def sandwich(y: int) -> tuple[int, int]:
    return min(y, 1 + -(-(y - 1) // 2)), y


@dataclass(frozen=True)
class GoldenRow:
    code: int
    size: int
    bits: tuple[int, ...]
    X: int


def load_table1(path=None) -> list[GoldenRow]:
    if path is None:
        text = resources.files("pebblelab.data").joinpath("table1_encA.csv").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        rows.append(GoldenRow(int(rec["code"]), int(rec["size"]),
                              tuple(int(rec[f"y{i}"]) for i in range(1, 8)), int(rec["X"])))
    return rows


def encoder_isomorphism() -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(input permutation, output permutation) carrying Enc_A onto Enc_B.

    Output ``i`` of A corresponds to output ``sigma[i-1]`` of B and input
    position ``p`` to ``pi[p]``; the lexicographically first pair is returned.
    """
    na, nb = encoder_neighbours("A"), encoder_neighbours("B")
    b_index = {frozenset(v): k for k, v in nb.items()}
    for pi in itertools.permutations(range(4)):
        sigma = []
        for k in range(1, 8):
            image = frozenset(pi[p] for p in na[k])
            if image not in b_index:
                break
            sigma.append(b_index[image])
        if len(sigma) == 7 and len(set(sigma)) == 7:
            return tuple(pi), tuple(sigma)
    raise AssertionError("encoders are not isomorphic")


def verify_table1(golden_path=None) -> LemmaVerdict:
    """Recompute every encoder subset and compare side A with the golden table."""
    v = LemmaVerdict("table1")
    with _Timer(v):
        golden = {row.code: row for row in load_table1(golden_path)}
        missing = sorted(set(range(128)) - set(golden))
        for c in missing:
            v.violations.append({"code": c, "problem": "row missing from golden table"})
        matched = 0
        for c in range(128):
            code = EncoderSubsetCode(c)
            got = encoder_max_disjoint("A", code)
            row = golden.get(c)
            if row is not None:
                if row.X == got:
                    matched += 1
                else:
                    v.violations.append({"code": c, "side": "A", "computed": got, "table": row.X})
                if row.bits != code.bits or row.size != sum(row.bits):
                    v.details.setdefault("golden_inconsistencies", []).append(
                        {"code": c, "bits": "".join(map(str, row.bits)), "size": row.size,
                         "bits_encode": EncoderSubsetCode.from_bits(row.bits).code})
            v.instances_checked += 1
        pi, sigma = encoder_isomorphism()
        sandwich_ok = 0
        for side in ("A", "B"):
            for c in range(128):
                code = EncoderSubsetCode(c)
                x = encoder_max_disjoint(side, code)
                lo, hi = sandwich(len(code.outputs))
                if lo <= x <= hi:
                    sandwich_ok += 1
                else:
                    v.violations.append({"code": c, "side": side, "computed": x, "sandwich": [lo, hi]})
                v.instances_checked += 1
        iso_ok = 0
        for c in range(128):
            outs = EncoderSubsetCode(c).outputs
            mapped = EncoderSubsetCode.from_bits([int(i in {sigma[o - 1] for o in outs}) for i in range(1, 8)])
            if encoder_max_disjoint("A", c) == encoder_max_disjoint("B", mapped):
                iso_ok += 1
            else:
                v.violations.append({"code": c, "side": "B", "problem": "differs from A under isomorphism"})
        v.details.update(matched=matched, rows=128, sandwich_ok=sandwich_ok, isomorphic_ok=iso_ok,
                         input_permutation=list(pi), output_permutation=list(sigma))
    return v


# --------------------------------------------------------------------------
# dominator-size statements


def verify_corollary_half(g: Cdag) -> LemmaVerdict:
    """Every nonempty output subset needs a dominator of at least half its size."""
    if len(g.outputs) > 16:
        raise ValueError("exhaustive sweep limited to 16 outputs")
    v = LemmaVerdict("corollary-half")
    with _Timer(v):
        outs = list(g.outputs)
        for r in range(1, len(outs) + 1):
            need = bounds.corollary_half(r)
            for sub in itertools.combinations(outs, r):
                res = min_dominator(DominatorQuery.dominator(g, sub))
                v.instances_checked += 1
                if res.size < need:
                    v.violations.append({"outputs": [g.ids[o] for o in sub], "size": res.size, "need": need})
    return v


def two_disjoint_h2() -> Cdag:
    h2 = build_strassen(2)[0]
    return disjoint_union([h2, h2])


def family_outputs(g: Cdag, report, level: int) -> list[int]:
    fam = report.family(level)
    return [g.index(o) for outs in fam.outputs for o in outs]


def _subsets(pool: Sequence[int], k: int, rng: random.Random, cutoff: int, samples: int):
    total = math.comb(len(pool), k)
    if total <= cutoff:
        return "exhaustive", itertools.combinations(pool, k)
    return "sampled", (tuple(sorted(rng.sample(pool, k))) for _ in range(samples))


def verify_dominator_2M(n: int, M: int, seed: int = DEFAULT_SEED, cutoff: int = EXHAUSTIVE_CUTOFF,
                        samples: int = SAMPLES) -> LemmaVerdict:
    """Every 4M outputs of the side-2sqrt(M) sub-problems need a dominator of size >= 2M."""
    level = bounds.sub_cdag_level(n, M)
    v = LemmaVerdict("dominator-2m", seed=seed)
    with _Timer(v):
        g, report = build_strassen(n)
        Z = family_outputs(g, report, level)
        expected = bounds.count_Z(bounds.BoundParams(n, M))
        if len(Z) != expected:
            v.violations.append({"problem": "|Z| mismatch", "built": len(Z), "formula": expected})
        need = bounds.dominator_2M(M)
        k = 4 * M
        rng = random.Random(seed)
        mode, subsets = _subsets(Z, k, rng, cutoff, samples)
        # the special case of one whole sub-problem's outputs is always included
        first = tuple(g.index(o) for o in report.family(level).outputs[0][:k])
        for sub in itertools.chain([first], subsets):
            res = min_dominator(DominatorQuery.dominator(g, sub))
            v.instances_checked += 1
            if res.size < need:
                v.violations.append({"Z": [g.ids[z] for z in sub], "size": res.size, "need": need})
        v.details.update(n=n, M=M, level=level, Z=len(Z), mode=mode, bound=need)
    return v


def _internal(g: Cdag, report, level: int) -> list[int]:
    fam = report.family(level)
    out = []
    for member, ins in zip(fam.members, fam.inputs):
        ins = set(ins)
        out.extend(g.index(x) for x in sorted(member) if x not in ins)
    return sorted(out)


def disjoint_path_count(g: Cdag, report, level: int, Z: Iterable[int], gamma: Iterable[int]) -> tuple[int, int]:
    """(|Y'|, max number of vertex-disjoint input paths into Y').

    Y' holds the sub-problem inputs with a Gamma-avoiding path to Z.
    """
    fam = report.family(level)
    member_inputs = {g.index(x) for ins in fam.inputs for x in ins}
    Y = sorted(inputs_reaching(g, Z, member_inputs, gamma))
    if not Y:
        return 0, 0
    count, _ = vertex_cut(g, g.inputs, Y)
    return len(Y), count


def verify_disjoint_paths(n: int, M: int, samples: int = 500, seed: int = DEFAULT_SEED) -> LemmaVerdict:
    """Inputs reaching Z around Gamma are fed by >= 4 sqrt(M(|Z| - 2|Gamma|)) disjoint input paths."""
    level = bounds.sub_cdag_level(n, M)
    v = LemmaVerdict("disjoint-paths", seed=seed)
    with _Timer(v):
        g, report = build_strassen(n)
        Z_all = family_outputs(g, report, level)
        internal = _internal(g, report, level)
        rng = random.Random(seed)
        cases = [(tuple(g.index(o) for o in report.family(level).outputs[0]), ())]
        while len(cases) < samples:
            z = rng.randint(1, len(Z_all))
            Z = tuple(sorted(rng.sample(Z_all, z)))
            top = (z - 1) // 2 if rng.random() < 0.5 else 2 * z
            gam = tuple(sorted(rng.sample(internal, min(rng.randint(0, top), len(internal)))))
            cases.append((Z, gam))
        vacuous = 0
        for Z, gam in cases:
            need = bounds.disjoint_paths(M, len(Z), len(gam))
            _, count = disjoint_path_count(g, report, level, Z, gam)
            v.instances_checked += 1
            if need is None:
                vacuous += 1
            elif count < need - 1e-9:
                v.violations.append({"Z": [g.ids[z] for z in Z], "Gamma": [g.ids[x] for x in gam],
                                     "count": count, "need": need})
        v.details.update(n=n, M=M, level=level, vacuous=vacuous)
    return v


# --------------------------------------------------------------------------
# sub-CDAG families


def verify_family_disjointness(n: int, level: int, spec: StrassenLikeSpec | None = None,
                               check_isomorphism: bool = True) -> LemmaVerdict:
    """Members are pairwise disjoint, as many as claimed, and (Strassen) copies of H^{s x s}."""
    v = LemmaVerdict("families")
    with _Timer(v):
        g, report = build_strassen(n) if spec is None else build_strassen_like(spec, n)
        fam = report.family(level)
        seen: dict[str, int] = {}
        for i, member in enumerate(fam.members):
            for name in member:
                if name in seen:
                    v.violations.append({"problem": "overlap", "members": [seen[name], i], "vertex": name})
                    break
                seen[name] = i
        count = len(fam.members)
        if spec is None:
            ok = count == fam.claimed_count
        else:
            ok = count >= fam.claimed_count
        if not ok:
            v.violations.append({"problem": "count", "members": count, "claimed": fam.claimed_count})
        iso = 0
        if check_isomorphism and spec is None:
            ref = build_strassen(fam.size)[0]
            for member, ins in zip(fam.members, fam.inputs):
                sub = induced_sub_cdag(g, member)
                if isomorphic(sub, ref, inputs1=list(ins)):
                    iso += 1
                else:
                    v.violations.append({"problem": "not isomorphic", "inputs": list(ins[:2])})
        v.instances_checked = count
        v.details.update(n=n, level=level, members=count, claimed=fam.claimed_count, size=fam.size,
                         isomorphic=iso)
    return v


# --------------------------------------------------------------------------
# information flow


def verify_flow(n: int = 2, p: int = 2, y_sizes=(2, 4), x_sizes=(4, 6, 8)) -> LemmaVerdict:
    """Exhaustive check that the best sub-function image has >= p^ceil(w) points."""
    v = LemmaVerdict("flow")
    with _Timer(v):
        worst = None
        for ys in y_sizes:
            if ys > n * n:
                continue
            for Y1 in itertools.combinations(range(n * n), ys):
                for xs in x_sizes:
                    if xs > 2 * n * n:
                        continue
                    for X1 in itertools.combinations(range(2 * n * n), xs):
                        w = flow_lower_bound(xs, ys, n)
                        need = p ** math.ceil(w)
                        got = empirical_flow(n, p, X1, Y1)
                        v.instances_checked += 1
                        slack = got / need
                        if worst is None or slack < worst[0]:
                            worst = (slack, list(X1), list(Y1), got, need)
                        if got < need:
                            v.violations.append({"X1": list(X1), "Y1": list(Y1), "count": got, "need": need})
        v.details.update(n=n, p=p, tightest=None if worst is None else
                         {"X1": worst[1], "Y1": worst[2], "count": worst[3], "need": worst[4]})
    return v


# --------------------------------------------------------------------------
# builders and the dominator oracle


def verify_cdag_product(sizes=(1, 2, 4, 8, 16), trials: int = 8, seed: int = DEFAULT_SEED) -> LemmaVerdict:
    """Strassen and Strassen-like CDAGs evaluate to A @ B modulo a 31-bit prime."""
    from .builders import PRIME_31, strassen_spec
    from .cdag import evaluate

    v = LemmaVerdict("cdag-product", seed=seed)
    with _Timer(v):
        rng = random.Random(seed)
        spec = strassen_spec()
        for n in sizes:
            graphs = {"strassen": build_strassen(n)[0], "like": build_strassen_like(spec, n)[0]}
            for _ in range(trials):
                A = [[rng.randrange(PRIME_31) for _ in range(n)] for _ in range(n)]
                B = [[rng.randrange(PRIME_31) for _ in range(n)] for _ in range(n)]
                want = [sum(A[i][k] * B[k][j] for k in range(n)) % PRIME_31 for i in range(n) for j in range(n)]
                flat = [x for row in A for x in row] + [x for row in B for x in row]
                for name, g in graphs.items():
                    v.instances_checked += 1
                    if evaluate(g, flat, PRIME_31) != want:
                        v.violations.append({"builder": name, "n": n})
    return v


def random_dag(rng: random.Random, max_vertices: int = 40) -> Cdag:
    from .cdag import CdagDraft

    nv = rng.randint(4, max_vertices)
    k = rng.randint(1, min(4, nv - 1))
    d = CdagDraft(builder="random", params={})
    names = [f"v{i}" for i in range(nv)]
    has_succ = set()
    for i, name in enumerate(names):
        d.add_vertex(name)
        if i >= k:
            for u in rng.sample(range(i), rng.randint(1, min(3, i))):
                d.add_edge(names[u], name)
                has_succ.add(names[u])
    d.inputs = names[:k]
    d.outputs = [x for x in names[k:] if x not in has_succ] or [names[-1]]
    return d.seal()


def random_query(rng: random.Random, g: Cdag) -> DominatorQuery:
    outs = list(g.outputs)
    if rng.random() < 0.5:
        pool = [x for x in range(len(g)) if x not in set(g.inputs)]
        return DominatorQuery.dominator(g, rng.sample(pool, rng.randint(1, min(3, len(pool)))))
    pool = [x for x in range(len(g)) if not g.is_output(x)]
    sources = rng.sample(pool, rng.randint(1, min(3, len(pool))))
    return DominatorQuery.post_dominator(g, sources, rng.sample(outs, rng.randint(1, min(3, len(outs)))))


def verify_oracle_equivalence(queries: int = 200, seed: int = DEFAULT_SEED) -> LemmaVerdict:
    """Min-cut sizes agree with exhaustive search on small random graphs."""
    from .domflow import POST_DOMINATOR, brute_force_min_dominator, min_postdominator, separates

    v = LemmaVerdict("oracle-equivalence", seed=seed)
    with _Timer(v):
        rng = random.Random(seed)
        for _ in range(queries):
            g = random_dag(rng)
            q = random_query(rng, g)
            fast = (min_postdominator if q.mode == POST_DOMINATOR else min_dominator)(q)
            slow = brute_force_min_dominator(q, len(g))
            v.instances_checked += 1
            ok = fast.size == slow.size and separates(g, q.source_set, q.targets, fast.witness)
            if not ok:
                v.violations.append({"vertices": len(g), "mode": q.mode, "mincut": fast.size, "brute": slow.size})
    return v
