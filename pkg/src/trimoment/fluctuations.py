"""Limiting covariances of traces of powers.

The object computed is

    D(k, l) = lim n**(2*eps - 1) * Cov(Tr X_n**k, Tr X_n**l),   X_n = A_n / n**alpha,

where the off-diagonal entries fluctuate on the scale ``n**-eps`` around
their mean profile.  ``eps = 0`` is the order-one regime, ``0 < eps <= alpha``
the perturbative one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .moments import MomentSequence
from .paths import _stats_cached, enumerate_gamma_pairs

__all__ = [
    "FluctuationModel",
    "perturbative_model",
    "cov_entry_perturbative",
    "pair_kernel",
    "cov_trace",
    "cov_matrix",
    "sigma_poly",
    "corollary_D",
]

CovFn = Callable[[int, int], float]


@dataclass(frozen=True)
class FluctuationModel:
    """Inputs of the covariance formula.

    Parameters
    ----------
    moments
        Limit moments ``m_k`` and exponent ``alpha``.  Must cover ``k + l``.
    epsilon
        Fluctuation exponent, ``0 <= epsilon <= alpha``.
    C
        ``C(a, b) = lim n**(2*eps) Cov((b_n/n**alpha)**a, (b_n/n**alpha)**b)``
        (the entries' own fluctuation scale).
        Required for ``epsilon > 0``; for ``epsilon = 0`` it defaults to
        ``m_{a+b} - m_a m_b`` and, if given, must agree with it.
    sigma_d_sq
        ``lim n**(2*eps) Var(d_n / n**alpha)``; used only when ``epsilon == alpha``.
    """

    moments: MomentSequence
    epsilon: float
    C: CovFn | None = None
    sigma_d_sq: float = 0.0

    def __post_init__(self):
        a, e = self.moments.alpha, self.epsilon
        if not 0 <= e <= a + 1e-12:
            raise ValueError(f"epsilon must lie in [0, alpha] = [0, {a}], got {e}")
        if self.sigma_d_sq < 0:
            raise ValueError("sigma_d_sq must be nonnegative")
        if e > 0:
            if self.C is None:
                raise ValueError("epsilon > 0 requires the covariance function C")
            m = self.moments.values
            for k in range(2, len(m), 2):
                if not math.isclose(m[k], m[2] ** (k // 2), rel_tol=1e-9, abs_tol=1e-12):
                    raise ValueError(
                        f"epsilon > 0 needs a deterministic limit (m_k = m_2**(k/2)); m_{k} = {m[k]}"
                    )

    @property
    def alpha(self) -> float:
        return self.moments.alpha

    @property
    def regime(self) -> str:
        if self.epsilon == 0:
            return "eps=0"
        if math.isclose(self.epsilon, self.alpha, abs_tol=1e-12):
            return "eps=alpha"
        return "0<eps<alpha"

    def cov(self) -> CovFn:
        m = self.moments.values
        if self.C is not None:
            return self.C
        return lambda a, b: m[a + b] - m[a] * m[b]


def cov_entry_perturbative(k: int, l: int, sigma_z_sq: float) -> float:
    """``C(k, l) = k l sigma_z_sq`` for ``b_n = n**alpha (1 + Z_n / n**eps)``."""
    if k < 0 or l < 0:
        raise ValueError("k and l must be >= 0")
    return k * l * float(sigma_z_sq)


def perturbative_model(
    alpha: float, epsilon: float, sigma_z_sq: float, sigma_d_sq: float = 0.0, K: int = 64
) -> FluctuationModel:
    """Model ``b_n = n**alpha (1 + Z_n / n**eps)`` with ``Var Z_n -> sigma_z_sq``.

    Here ``m_k = 1`` and ``C(a, b) = a * b * sigma_z_sq``.
    """
    if epsilon <= 0:
        raise ValueError("the perturbative model needs epsilon > 0")
    s = float(sigma_z_sq)
    return FluctuationModel(
        MomentSequence.ones(K, alpha), epsilon, lambda a, b: cov_entry_perturbative(a, b, s), sigma_d_sq
    )


def pair_kernel(g1: Sequence[int], g2: Sequence[int], m: Sequence[float], C: CovFn) -> float:
    """Level-by-level kernel of a pair of paths.

    Sums, over levels ``i`` crossed by both paths, the joint moments below
    ``i`` times ``C(l_i, l'_i)`` times the product of separate moments above.
    """
    c1 = _stats_cached(tuple(g1)).crossings
    c2 = _stats_cached(tuple(g2)).crossings
    levels = sorted(set(c1) | set(c2))
    a = [c1.get(i, 0) for i in levels]
    b = [c2.get(i, 0) for i in levels]
    n = len(levels)
    suffix = [1.0] * (n + 1)
    for j in range(n - 1, -1, -1):
        suffix[j] = suffix[j + 1] * m[a[j]] * m[b[j]]
    total, prefix = [], 1.0
    for j in range(n):
        if a[j] and b[j]:
            total.append(prefix * C(a[j], b[j]) * suffix[j + 1])
        prefix *= m[a[j] + b[j]]
    return math.fsum(total)


def _check_order_one(k: int, l: int, model: FluctuationModel) -> None:
    m = model.moments.values
    for a in range(2, k + 1, 2):
        for b in range(2, l + 1, 2):
            want = m[a + b] - m[a] * m[b]
            got = model.C(a, b)
            if not math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError(
                    f"eps = 0 forces C({a},{b}) = m_{a+b} - m_{a} m_{b} = {want}; got {got}"
                )


def cov_trace(k: int, l: int, model: FluctuationModel) -> float:
    """``D(k, l)``: the limiting scaled covariance of ``Tr X**k`` and ``Tr X**l``."""
    if k < 0 or l < 0:
        raise ValueError("k and l must be >= 0")
    if k == 0 or l == 0 or (k + l) % 2:
        return 0.0
    model.moments.require(k + l)
    m = model.moments.values
    alpha, eps = model.alpha, model.epsilon
    norm = alpha * (k + l) + 1.0 - 2.0 * eps
    regime = model.regime
    if k % 2:
        if regime != "eps=alpha" or model.sigma_d_sq == 0:
            return 0.0
        terms = []
        for g1, g2 in enumerate_gamma_pairs(k, l):
            c1 = _stats_cached(g1).crossings
            c2 = _stats_cached(g2).crossings
            terms.append(math.prod(m[c] for c in c1.values()) * math.prod(m[c] for c in c2.values()))
        return model.sigma_d_sq * math.fsum(terms) / norm
    pairs = enumerate_gamma_pairs(k, l)
    if regime == "eps=0":
        if model.C is not None:
            _check_order_one(k, l, model)
        terms = []
        for g1, g2 in pairs:
            c1 = _stats_cached(g1).crossings
            c2 = _stats_cached(g2).crossings
            joint = math.prod(m[c1.get(i, 0) + c2.get(i, 0)] for i in set(c1) | set(c2))
            split = math.prod(m[c] for c in c1.values()) * math.prod(m[c] for c in c2.values())
            terms.append(joint - split)
        return math.fsum(terms) / norm
    C = model.cov()
    return math.fsum(pair_kernel(g1, g2, m, C) for g1, g2 in pairs) / norm


def cov_matrix(ks: Sequence[int], model: FluctuationModel) -> np.ndarray:
    """Matrix ``[D(k, l)]`` over the given powers."""
    ks = [int(k) for k in ks]
    out = np.zeros((len(ks), len(ks)))
    for a, k in enumerate(ks):
        for b in range(a, len(ks)):
            out[a, b] = out[b, a] = cov_trace(k, ks[b], model)
    return out


def sigma_poly(coeffs: Sequence[float], model: FluctuationModel) -> float:
    """Limiting scaled variance of ``Tr P(X)`` for ``P(x) = sum_j coeffs[j] x**j``.

    ``coeffs[0]`` is the constant term and does not contribute.
    """
    w = np.asarray(coeffs, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("coefficients must be a nonempty 1-D sequence")
    ks = [j for j in range(1, w.size) if w[j] != 0]
    if not ks:
        return 0.0
    D = cov_matrix(ks, model)
    v = w[ks]
    return float(v @ D @ v)


def corollary_D(
    k: int,
    l: int,
    alpha: float,
    epsilon: float,
    sigma_z_sq: float = 1.0,
    sigma_d_sq: float = 0.0,
) -> float:
    """Closed form of ``D(k, l)`` in the perturbative model.

    Even ``k, l``: ``k l C(k, k/2) C(l, l/2) sigma_z_sq / (alpha(k+l) + 1 - 2 eps)``.
    Odd ``k, l`` (only at ``eps == alpha``): the same with the central
    binomials of ``k - 1, l - 1`` and ``sigma_d_sq`` in place of ``sigma_z_sq``.
    The default ``sigma_z_sq = 1`` gives the value per unit variance.
    """
    if k <= 0 or l <= 0 or (k + l) % 2:
        return 0.0
    norm = alpha * (k + l) + 1.0 - 2.0 * epsilon
    if k % 2 == 0:
        return k * l * math.comb(k, k // 2) * math.comb(l, l // 2) * sigma_z_sq / norm
    if not math.isclose(epsilon, alpha, abs_tol=1e-12):
        return 0.0
    return k * l * math.comb(k - 1, k // 2) * math.comb(l - 1, l // 2) * sigma_d_sq / norm
