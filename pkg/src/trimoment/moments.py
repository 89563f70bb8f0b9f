"""Limit moments of tridiagonal and band ensembles as sums over paths.

All functions share one evaluation scheme: the path family is collapsed into
an exact integer-weighted set of monomials in the prescribed entry moments,
and the monomials are then evaluated in rational arithmetic from the float
inputs and rounded once.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

from .paths import (
    _stats_cached,
    colored_stats,
    enumerate_gamma,
    enumerate_gamma_2flat,
    enumerate_gamma_band,
)

__all__ = [
    "MomentSequence",
    "DeviationInput",
    "MultiMomentTable",
    "path_monomials",
    "limit_moment",
    "limit_moments",
    "forward_system",
    "invert_system",
    "first_order_deviation",
    "band_monomials",
    "band_limit_moment",
    "mixed_monomials",
    "mixed_moment",
    "mixed_path_sum",
]

_TOL = 1e-12


@dataclass(frozen=True)
class MomentSequence:
    """Limits ``m_k`` of ``E[(b_n / n**alpha)**k]`` for ``k = 0..K``."""

    values: tuple[float, ...]
    alpha: float = 0.5

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ValueError("moment sequence is empty")
        if vals[0] != 1.0:
            raise ValueError(f"m_0 must be 1, got {vals[0]}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")

    @classmethod
    def ones(cls, K: int, alpha: float = 0.5) -> "MomentSequence":
        """``m_k = 1`` for all ``k``: ``b_n / n**alpha -> 1``."""
        return cls((1.0,) * (K + 1), alpha)

    @classmethod
    def bernoulli(cls, theta: float, K: int, alpha: float = 0.5) -> "MomentSequence":
        """Moments of a Bernoulli(theta) limit: ``m_k = theta`` for ``k >= 1``."""
        return cls((1.0,) + (float(theta),) * K, alpha)

    @property
    def K(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, k: int) -> float:
        return self.values[k]

    def require(self, K: int) -> None:
        if self.K < K:
            raise ValueError(f"moment sequence covers k <= {self.K}, formula needs k <= {K}")


@dataclass(frozen=True)
class DeviationInput:
    """First-order data: ``n**upsilon * (E[(b_n/n**alpha)**k] - m_k) -> xi[k]``."""

    upsilon: float
    xi: tuple[float, ...]
    sigma_d_sq: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(x) for x in self.xi))
        if self.xi and self.xi[0] != 0.0:
            # the level sum runs over infinitely many empty levels
            raise ValueError("xi_0 must be 0")
        if self.sigma_d_sq < 0:
            raise ValueError("sigma_d_sq must be nonnegative")


@dataclass(frozen=True)
class MultiMomentTable:
    """Per-color moments ``m[u][k]`` (odd ``k`` included) and exponents ``alphas[u]``.

    Colors are numbered ``1..r``; ``moments[u - 1]`` belongs to color ``u``.
    """

    moments: tuple[tuple[float, ...], ...]
    alphas: tuple[float, ...]

    def __post_init__(self):
        moms = tuple(tuple(float(v) for v in row) for row in self.moments)
        object.__setattr__(self, "moments", moms)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if len(moms) != len(self.alphas):
            raise ValueError("one alpha per color is required")
        for u, row in enumerate(moms, start=1):
            if not row or row[0] != 1.0:
                raise ValueError(f"m_{{{u},0}} must be 1")
        if any(not a > 0 for a in self.alphas):
            raise ValueError("all alphas must be > 0")

    @property
    def r(self) -> int:
        return len(self.alphas)


# ---------------------------------------------------------------------------
# monomial bookkeeping
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def path_monomials(k: int) -> dict[tuple[int, ...], int]:
    """Exact integer expansion of ``sum over Gamma_k of prod_i m_{l_i}``.

    Keys are sorted tuples of nonzero crossing counts, values are the number
    of paths sharing that monomial.

    >>> path_monomials(4)
    {(2, 2): 4, (4,): 2}
    """
    acc: Counter[tuple[int, ...]] = Counter()
    if k >= 2 and k % 2 == 0:
        for g in enumerate_gamma(k):
            acc[tuple(sorted(_stats_cached(g).crossings.values()))] += 1
    return dict(sorted(acc.items()))


def _eval(monomials: Mapping[tuple, int], factor) -> float:
    """Evaluate an integer-weighted monomial set, rounding only once at the end."""
    cache: dict = {}

    def f(e):
        if e not in cache:
            cache[e] = factor(e)
        return cache[e]

    vals = {e: f(e) for key in monomials for e in key}
    if not all(math.isfinite(v) for v in vals.values()):
        return math.fsum(c * math.prod(vals[e] for e in key) for key, c in monomials.items())
    exact = {e: Fraction(v) for e, v in vals.items()}
    return float(sum(c * math.prod((exact[e] for e in key), start=Fraction(1)) for key, c in monomials.items()))


def _path_sum(k: int, ms: MomentSequence) -> float:
    ms.require(k)
    return _eval(path_monomials(k), lambda e: ms.values[e])


def limit_moment(k: int, ms: MomentSequence) -> float:
    """Limit of ``E[tr_n(X_n**k)]`` for ``X_n = A_n / n**alpha``.

    Zero for odd ``k``; for even ``k`` the Gamma_k path sum divided by
    ``alpha*k + 1``.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 1.0
    if k % 2:
        return 0.0
    return _path_sum(k, ms) / (ms.alpha * k + 1.0)


def limit_moments(k_max: int, ms: MomentSequence) -> dict[int, float]:
    return {k: limit_moment(k, ms) for k in range(k_max + 1)}


def forward_system(ms: MomentSequence, k_max: int) -> dict[int, float]:
    """``M_k = (alpha*k + 1) L_k`` for even ``k <= k_max``."""
    if k_max % 2:
        raise ValueError("k_max must be even")
    return {k: (1.0 if k == 0 else _path_sum(k, ms)) for k in range(0, k_max + 1, 2)}


def invert_system(M: Mapping[int, float] | Sequence[float], k_max: int, alpha: float = 0.5) -> MomentSequence:
    """Recover the even moments ``m_k`` from ``M_k = (alpha*k + 1) L_k``.

    ``M`` is either a mapping ``k -> M_k`` over even ``k`` or a full sequence
    indexed by ``k``.  The system is triangular with leading coefficient 2
    (the two single-level paths), so each ``m_k`` is peeled off in turn.
    Odd moments are not determined by the system and are returned as 0.
    """
    if k_max % 2:
        raise ValueError("k_max must be even")
    Mk = dict(M) if isinstance(M, Mapping) else {k: float(v) for k, v in enumerate(M)}
    if Mk.get(0, 1.0) != 1.0:
        raise ValueError("M_0 must be 1")
    # peel in exact arithmetic so only the input rounding of M_k propagates
    m = [Fraction(0)] * (k_max + 1)
    m[0] = Fraction(1)
    for k in range(2, k_max + 1, 2):
        if k not in Mk:
            raise ValueError(f"M_{k} missing")
        if not math.isfinite(Mk[k]):
            raise ValueError(f"M_{k} is not finite")
        rest = sum(
            c * math.prod((m[e] for e in key), start=Fraction(1))
            for key, c in path_monomials(k).items() if key != (k,)
        )
        m[k] = (Fraction(Mk[k]) - rest) / path_monomials(k)[(k,)]
    return MomentSequence(tuple(float(v) for v in m), alpha)


# ---------------------------------------------------------------------------
# first-order deviation
# ---------------------------------------------------------------------------


def _deviation_pieces(k: int, ms: MomentSequence, xi: Sequence[float]):
    """Return (plain, xi_part, area_part) sums over Gamma_k."""
    plain, xi_terms, area_terms = [], [], []
    for g in enumerate_gamma(k):
        cr = sorted(_stats_cached(g).crossings.items())
        vals = [ms.values[c] for _, c in cr]
        prod = math.prod(vals)
        plain.append(prod)
        area_terms.append(sum(i * c for i, c in cr) * prod)
        for j, (_, c) in enumerate(cr):
            xi_terms.append(xi[c] * math.prod(vals[:j] + vals[j + 1:]))
    return math.fsum(plain), math.fsum(xi_terms), math.fsum(area_terms)


def _two_flat_sum(k: int, ms: MomentSequence) -> float:
    return math.fsum(
        math.prod(ms.values[c] for _, c in sorted(_stats_cached(g).crossings.items()))
        for g in enumerate_gamma_2flat(k)
    )


def deviation_regime(alpha: float, upsilon: float) -> str:
    """Name of the case selected by ``upsilon`` versus ``min(1, 2*alpha)``."""
    cap = min(1.0, 2.0 * alpha)
    if not (0 < upsilon <= cap + _TOL):
        raise ValueError(f"upsilon={upsilon} outside (0, min(1, 2*alpha)] = (0, {cap}]")
    at_one = math.isclose(upsilon, 1.0, abs_tol=_TOL)
    at_two_alpha = math.isclose(upsilon, 2.0 * alpha, abs_tol=_TOL)
    if at_one and at_two_alpha:
        return "upsilon=1=2alpha"
    if at_one:
        return "upsilon=1<2alpha"
    if at_two_alpha:
        return "upsilon=2alpha<1"
    return "upsilon<min(1,2alpha)"


def first_order_deviation(k: int, ms: MomentSequence, dev: DeviationInput) -> float:
    """Limit of ``n**upsilon * (E[tr_n(X_n**k)] - L_k)``.

    The four even-``k`` cases are distinguished by how ``upsilon`` compares
    with 1 and with ``2*alpha``; the ``sigma_d_sq`` term enters only when
    ``upsilon == 2*alpha`` (two diagonal entries at one level), and the
    discrete-sum correction and level-area term only when ``upsilon == 1``.
    """
    alpha = ms.alpha
    regime = deviation_regime(alpha, dev.upsilon)
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0 or k % 2:
        return 0.0
    ms.require(k)
    if len(dev.xi) <= k:
        raise ValueError(f"xi covers k <= {len(dev.xi) - 1}, need k <= {k}")
    plain, xi_part, area = _deviation_pieces(k, ms, dev.xi)
    ups = dev.upsilon
    if regime == "upsilon<min(1,2alpha)":
        return xi_part / (alpha * k - ups + 1.0)
    if regime == "upsilon=2alpha<1":
        return (dev.sigma_d_sq * _two_flat_sum(k, ms) + xi_part) / (alpha * k - ups + 1.0)
    L = plain / (alpha * k + 1.0)
    if regime == "upsilon=1<2alpha":
        return (alpha * k + 1.0) / 2.0 * L + area / k + xi_part / (alpha * k)
    return (
        (k + 2.0) / 4.0 * L
        + area / k
        + 2.0 / k * dev.sigma_d_sq * _two_flat_sum(k, ms)
        + 2.0 / k * xi_part
    )


# ---------------------------------------------------------------------------
# band matrices
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def band_monomials(k: int, w: int) -> dict[tuple[tuple[int, int], ...], int]:
    """Exact expansion over Gamma_{k,w}; keys are sorted ``(offset, count)`` tuples."""
    acc: Counter[tuple[tuple[int, int], ...]] = Counter()
    for g in enumerate_gamma_band(k, w):
        banded = sorted(_stats_cached(g).banded.items())
        acc[tuple(sorted((j - i, c) for (i, j), c in banded))] += 1
    return dict(acc)


def band_limit_moment(k: int, w: int, per_diagonal: Sequence[tuple[float, Sequence[float]]]) -> float:
    """Limit moment of a band matrix of width ``w``.

    ``per_diagonal[v] = (alpha_v, m_v)`` for offsets ``v = 0..w`` (``v = 0``
    is the main diagonal).  Offsets whose exponent is below the maximum
    contribute only through empty levels: their moment factor is 1 for a
    zero count and 0 otherwise.
    """
    if not per_diagonal:
        raise ValueError("per-diagonal specification is empty")
    if len(per_diagonal) != w + 1:
        raise ValueError(f"need w + 1 = {w + 1} diagonal specs (offsets 0..w), got {len(per_diagonal)}")
    alphas = [float(a) for a, _ in per_diagonal]
    alpha = max(alphas)
    if not alpha > 0:
        raise ValueError("maximal exponent must be > 0")
    if k == 0:
        return 1.0
    moms = [tuple(float(x) for x in m) for _, m in per_diagonal]
    for v, (a, m) in enumerate(zip(alphas, moms)):
        if a == alpha and (not m or m[0] != 1.0):
            raise ValueError(f"m_{{{v},0}} must be 1")

    def factor(e: tuple[int, int]) -> float:
        v, c = e
        if alphas[v] < alpha:
            return 0.0
        if c >= len(moms[v]):
            raise ValueError(f"moments of offset {v} cover k <= {len(moms[v]) - 1}, need {c}")
        return moms[v][c]

    return _eval(band_monomials(k, w), factor) / (alpha * k + 1.0)


# ---------------------------------------------------------------------------
# several matrices
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def mixed_monomials(word: tuple[int, ...]) -> dict[tuple[tuple[int, int], ...], int]:
    """Exact expansion over colored paths; keys are sorted ``(color, count)`` tuples."""
    acc: Counter[tuple[tuple[int, int], ...]] = Counter()
    k = len(word)
    if k % 2 == 0:
        for g in enumerate_gamma(k):
            st = colored_stats(g, word)
            acc[tuple(sorted((u, c) for (_, u), c in st.colored.items()))] += 1
    return dict(sorted(acc.items()))


def mixed_moment(word: Sequence[int], table: MultiMomentTable) -> float:
    """Limit of ``E[tr_n(X_{i_1} X_{i_2} ... X_{i_k})]`` for independent matrices.

    ``word`` lists colors in ``1..table.r``.  The path sum is divided by
    ``alpha_{i_1} + ... + alpha_{i_k} + 1``.
    """
    word = _check_word(word, table)
    if len(word) % 2:
        return 0.0
    norm = math.fsum(table.alphas[c - 1] for c in word) + 1.0
    return mixed_path_sum(word, table) / norm


def _check_word(word: Sequence[int], table: MultiMomentTable) -> tuple[int, ...]:
    word = tuple(int(c) for c in word)
    if not word:
        raise ValueError("word must be nonempty")
    bad = [c for c in word if not 1 <= c <= table.r]
    if bad:
        raise ValueError(f"colors {bad} outside palette 1..{table.r}")
    return word


def mixed_path_sum(word: Sequence[int], table: MultiMomentTable) -> float:
    """Colored path sum before normalization (the rescaled joint functional)."""
    word = _check_word(word, table)
    if len(word) % 2:
        return 0.0

    def factor(e: tuple[int, int]) -> float:
        u, c = e
        row = table.moments[u - 1]
        if c >= len(row):
            raise ValueError(f"moments of color {u} cover k <= {len(row) - 1}, need {c}")
        return row[c]

    return _eval(mixed_monomials(word), factor)
