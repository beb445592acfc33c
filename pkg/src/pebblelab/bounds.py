"""Closed-form I/O lower bounds for Strassen and Strassen-like multiplication.

Values are exact :class:`~fractions.Fraction` objects whenever the ratio
``n / sqrt(M)`` is a power of two (so ``(n/sqrt M)^{log2 7}`` is a power of
7); otherwise they are floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

LOG2_7 = math.log2(7)
REL_TOL = 1e-9


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class BoundParams:
    n: int
    M: int
    P: int = 1
    n0: int = 2
    m0: int = 7
    q: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.M < 1 or self.P < 1:
            raise BoundError("need n >= 1, M >= 1, P >= 1")
        if self.q is not None and self.q < 0:
            raise BoundError("q must be >= 0")

    def check_parallel(self) -> None:
        if self.M * self.P < 2 * self.n * self.n:
            raise BoundError(f"M*P = {self.M * self.P} < 2n^2 = {2 * self.n * self.n}: inputs do not fit")


@dataclass(frozen=True)
class BoundValue:
    value: Real
    formula_id: str
    regime: str = "main"

    def __float__(self) -> float:
        return float(self.value)

    def to_dict(self, params: BoundParams | None = None) -> dict:
        value = self.value
        if isinstance(value, Fraction) and value.denominator == 1:
            value = int(value)
        out = {"formula_id": self.formula_id, "value": value if isinstance(value, int) else float(value),
               "regime": self.regime}
        if isinstance(self.value, Fraction):
            out["exact"] = str(self.value)
        if params is not None:
            out["params"] = {k: v for k, v in vars(params).items() if v is not None}
        return out


def _is_pow2(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


def exact_ratio_log(n: int, M: int) -> int | None:
    """k with n / sqrt(M) == 2**k when that holds exactly, else None."""
    r = math.isqrt(M)
    if r * r != M or n % r or not _is_pow2(n // r):
        return None
    return (n // r).bit_length() - 1


def strassen_power(n: int, M: int) -> Real:
    """(n / sqrt M) ** log2(7), exact when possible."""
    k = exact_ratio_log(n, M)
    if k is not None:
        return Fraction(7) ** k
    return (n / math.sqrt(M)) ** LOG2_7


def trivial_io(n: int) -> int:
    """Reading 2n^2 inputs and writing n^2 outputs."""
    return 3 * n * n


def strassen_seq_bound(p: BoundParams) -> BoundValue:
    if not _is_pow2(p.n):
        raise BoundError(f"n must be a power of 2, got {p.n}")
    if p.n * p.n < 4 * p.M:
        return BoundValue(trivial_io(p.n), "strassen-seq:3n^2", "trivial-fallback")
    value = Fraction(1, 7) * strassen_power(p.n, p.M) * p.M
    return BoundValue(value, "strassen-seq:(1/7)(n/sqrtM)^log2(7)*M")


def strassen_par_bound(p: BoundParams) -> BoundValue:
    p.check_parallel()
    seq = strassen_seq_bound(p)
    return BoundValue(seq.value / p.P if isinstance(seq.value, float) else Fraction(seq.value) / p.P,
                      seq.formula_id.replace("strassen-seq", "strassen-par") + "/P", seq.regime)


def generic_qM_bound(p: BoundParams) -> BoundValue:
    q = 0 if p.q is None else p.q
    return BoundValue(q * p.M, "generic:qM")


def generic_qM_par(p: BoundParams) -> BoundValue:
    p.check_parallel()
    q = 0 if p.q is None else p.q
    return BoundValue(Fraction(q * p.M, p.P), "generic:qM/P")


def strassen_like_bound(p: BoundParams) -> BoundValue:
    """(1/m0^2) (n / (2 sqrt M))^{log_n0 m0} M, from m0^{i-2} disjoint sub-problems of side 2 sqrt M."""
    if p.n0 < 2 or p.m0 < 1:
        raise BoundError("need n0 >= 2 and m0 >= 1")
    x = p.n / (2 * math.sqrt(p.M))
    levels = math.log(x, p.n0) if x > 0 else -math.inf
    if levels < 2 - REL_TOL:
        return BoundValue(trivial_io(p.n), "strassen-like:3n^2", "trivial-fallback")
    k = exact_ratio_log(p.n, p.M)
    if p.n0 == 2 and k is not None:
        value = Fraction(p.m0) ** (k - 1) * p.M / p.m0 ** 2
    else:
        value = x ** math.log(p.m0, p.n0) * p.M / p.m0 ** 2
    return BoundValue(value, "strassen-like:(1/m0^2)(n/(2sqrtM))^log_n0(m0)*M")


def strassen_like_par_bound(p: BoundParams) -> BoundValue:
    p.check_parallel()
    seq = strassen_like_bound(p)
    v = seq.value / p.P if isinstance(seq.value, float) else Fraction(seq.value) / p.P
    return BoundValue(v, seq.formula_id + "/P", seq.regime)


def count_Z(p: BoundParams) -> int:
    """Number of outputs of the sub-CDAGs of side 2 sqrt(M): 4M (n / (2 sqrt M))^{log2 7}."""
    k = exact_ratio_log(p.n, p.M)
    if k is None or k < 1:
        raise BoundError("count_Z needs n, sqrt(M) powers of 2 with n >= 2 sqrt(M)")
    return 4 * p.M * 7 ** (k - 1)


def sub_cdag_level(n: int, M: int) -> int:
    """Recursion level whose sub-CDAGs have side 2 sqrt(M)."""
    k = exact_ratio_log(n, M)
    if k is None or k < 1:
        raise BoundError("need n, sqrt(M) powers of 2 with n >= 2 sqrt(M)")
    return k - 1


# -- per-lemma thresholds used by the verifiers ------------------------------

def corollary_half(size: int) -> int:
    """Minimum dominator size of any ``size`` outputs of vertex-disjoint products."""
    return -(-size // 2)


def dominator_2M(M: int) -> int:
    return 2 * M


def internal_flow_inputs(n: int, outputs: int, gamma: int) -> float | None:
    """2n sqrt(|O'| - 2|Gamma|): inputs not post-dominated by Gamma; None when vacuous."""
    rad = outputs - 2 * gamma
    return 2 * n * math.sqrt(rad) if rad > 0 else None


def disjoint_paths(M: int, z: int, gamma: int) -> float | None:
    """4 sqrt(M (|Z| - 2|Gamma|)); None when vacuous."""
    rad = z - 2 * gamma
    return 4 * math.sqrt(M * rad) if rad > 0 else None


FORMULAS = {
    "strassen-seq": strassen_seq_bound,
    "strassen-par": strassen_par_bound,
    "generic-qm": generic_qM_bound,
    "generic-qm-par": generic_qM_par,
    "strassen-like": strassen_like_bound,
    "strassen-like-par": strassen_like_par_bound,
}
