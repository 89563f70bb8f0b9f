"""Finite tridiagonal and band ensembles, spectra, trace powers and Monte Carlo.

Storage follows the level convention used throughout the package:
``diag[i - 1] = d_i`` and ``offdiag[i - 1] = b_i``, where ``b_i`` couples
levels ``i`` and ``i + 1`` and scales like ``i**alpha``.  The display layout
places ``d_1`` and ``b_1`` at the lower-right corner; ``to_dense`` uses
that layout, and spectra do not depend on it.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .moments import DeviationInput, MomentSequence
from .paths import _all_unit_max0, _stats_cached

__all__ = [
    "TridiagonalMatrix",
    "BandMatrix",
    "EnsembleSpec",
    "BandDiagonalSpec",
    "Budget",
    "sample",
    "sample_band",
    "eigenvalues",
    "band_eigenvalues",
    "trace_power",
    "trace_powers",
    "band_trace_powers",
    "expected_trace_power",
    "limit_moments_of",
    "deviation_input_of",
    "fluctuation_model_of",
    "MCResult",
    "FluctResult",
    "mc_moments",
    "mc_fluctuations",
    "mc_band_moments",
    "max_threads",
]


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TridiagonalMatrix:
    """Symmetric tridiagonal matrix with ``d_1..d_n`` and ``b_1..b_{n-1}``."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float).copy()
        b = np.asarray(self.offdiag, dtype=float).copy()
        if d.ndim != 1 or b.ndim != 1 or d.size < 1:
            raise ValueError("diag and offdiag must be 1-D and diag nonempty")
        if b.size != d.size - 1:
            raise ValueError(f"offdiag has length {b.size}, expected {d.size - 1}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(b))):
            raise ValueError("entries must be finite")
        d.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", b)

    @property
    def n(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        """Dense matrix in display layout (``d_n`` top-left, ``d_1`` bottom-right)."""
        return np.diag(self.diag[::-1]) + np.diag(self.offdiag[::-1], 1) + np.diag(self.offdiag[::-1], -1)

    def to_json(self) -> str:
        return json.dumps({"diag": self.diag.tolist(), "offdiag": self.offdiag.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "TridiagonalMatrix":
        obj = json.loads(text)
        return cls(np.array(obj["diag"], dtype=float), np.array(obj["offdiag"], dtype=float))

    def gershgorin_radius(self) -> float:
        r = np.abs(self.diag).copy()
        r[:-1] += np.abs(self.offdiag)
        r[1:] += np.abs(self.offdiag)
        return float(r.max())


@dataclass(frozen=True)
class BandMatrix:
    """Symmetric band matrix; ``bands[v][i - 1] = b_{v,i} = a_{i, i+v}``, ``v = 0..w``."""

    bands: tuple[np.ndarray, ...]

    def __post_init__(self):
        bands = tuple(np.asarray(b, dtype=float).copy() for b in self.bands)
        if not bands:
            raise ValueError("at least the main diagonal is required")
        n = bands[0].size
        for v, b in enumerate(bands):
            if b.shape != (n - v,):
                raise ValueError(f"band {v} has shape {b.shape}, expected ({n - v},)")
            if not np.all(np.isfinite(b)):
                raise ValueError("entries must be finite")
            b.flags.writeable = False
        object.__setattr__(self, "bands", bands)

    @property
    def n(self) -> int:
        return self.bands[0].size

    @property
    def w(self) -> int:
        return len(self.bands) - 1

    def to_dense(self) -> np.ndarray:
        A = np.diag(self.bands[0])
        for v in range(1, self.w + 1):
            A = A + np.diag(self.bands[v], v) + np.diag(self.bands[v], -v)
        return A


# ---------------------------------------------------------------------------
# ensemble specifications
# ---------------------------------------------------------------------------

_OFFDIAG = ("beta_hermite", "power_perturbed", "bernoulli_scaled", "custom")
_DIAG = ("auto", "normal", "zero")
_Z = ("normal", "rademacher", "zero")


@dataclass(frozen=True)
class EnsembleSpec:
    """Generative description of ``b_n`` and ``d_n``.

    Families
    --------
    ``beta_hermite``
        ``b_k = chi_{k beta} / sqrt(beta)``, ``d_k ~ N(0, 2) / sqrt(beta)``; ``alpha = 1/2``.
    ``power_perturbed``
        ``b_k = k**alpha * (1 + Z_k / k**epsilon)`` with ``Z_k`` iid of
        standard deviation ``sigma_z``.  This is our concrete instance of an
        entry converging like ``1 + Z / n**epsilon``.
    ``bernoulli_scaled``
        ``b_k = k**alpha * Bernoulli(theta)``.
    ``custom``
        ``b_k = custom(k, rng)`` (vectorized over the index array ``k``).

    ``diag_family='auto'`` means ``N(0, 2/beta)`` for beta-Hermite and
    ``N(0, diag_scale**2)`` otherwise.
    """

    offdiag_family: str = "beta_hermite"
    alpha: float = 0.5
    beta: float = 2.0
    epsilon: float = 0.5
    theta: float = 1.0
    z_dist: str = "normal"
    sigma_z: float = 1.0
    diag_family: str = "auto"
    diag_scale: float = 1.0
    custom: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.offdiag_family not in _OFFDIAG:
            raise ValueError(f"unknown off-diagonal family {self.offdiag_family!r}; choose from {_OFFDIAG}")
        if self.diag_family not in _DIAG:
            raise ValueError(f"unknown diagonal family {self.diag_family!r}; choose from {_DIAG}")
        if self.z_dist not in _Z:
            raise ValueError(f"unknown Z distribution {self.z_dist!r}; choose from {_Z}")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not 0 <= self.epsilon <= self.alpha:
            raise ValueError("epsilon must lie in [0, alpha]")
        if not 0 <= self.theta <= 1:
            raise ValueError("theta must lie in [0, 1]")
        if self.sigma_z < 0 or self.diag_scale < 0:
            raise ValueError("scales must be nonnegative")
        if self.offdiag_family == "beta_hermite" and self.alpha != 0.5:
            raise ValueError("the beta-Hermite family has alpha = 1/2")
        if self.offdiag_family == "custom" and self.custom is None:
            raise ValueError("custom family needs a sampler")

    @classmethod
    def beta_hermite(cls, beta: float) -> "EnsembleSpec":
        return cls("beta_hermite", 0.5, beta=float(beta))

    @classmethod
    def power_perturbed(cls, alpha: float, epsilon: float, z_dist: str = "normal", sigma_z: float = 1.0,
                        diag_scale: float = 1.0) -> "EnsembleSpec":
        return cls("power_perturbed", alpha, epsilon=epsilon, z_dist=z_dist, sigma_z=sigma_z, diag_scale=diag_scale)

    @classmethod
    def bernoulli_scaled(cls, alpha: float, theta: float, diag_scale: float = 1.0) -> "EnsembleSpec":
        return cls("bernoulli_scaled", alpha, epsilon=0.0, theta=theta, diag_scale=diag_scale)

    @property
    def diag_variance(self) -> float:
        if self.diag_family == "zero":
            return 0.0
        if self.diag_family == "auto" and self.offdiag_family == "beta_hermite":
            return 2.0 / self.beta
        return self.diag_scale ** 2

    # exact entry moments, used by the finite-n expectation oracle
    def offdiag_moment(self, k: np.ndarray, p: int) -> np.ndarray:
        """``E[b_k**p]`` for an array of indices ``k``."""
        k = np.asarray(k, dtype=float)
        if p == 0:
            return np.ones_like(k)
        fam = self.offdiag_family
        if fam == "beta_hermite":
            r = k * self.beta
            return np.exp(p / 2 * math.log(2.0 / self.beta) + special.gammaln((r + p) / 2) - special.gammaln(r / 2))
        if fam == "bernoulli_scaled":
            return self.theta * k ** (self.alpha * p)
        if fam == "power_perturbed":
            zm = [_z_moment(self.z_dist, self.sigma_z, j) for j in range(p + 1)]
            scale = k ** (-self.epsilon)
            s = sum(math.comb(p, j) * zm[j] * scale ** j for j in range(p + 1))
            return k ** (self.alpha * p) * s
        raise ValueError("exact moments are unavailable for custom entries")

    def diag_moment(self, p: int) -> float:
        if p == 0:
            return 1.0
        return _z_moment("normal", math.sqrt(self.diag_variance), p)


def _z_moment(dist: str, sigma: float, j: int) -> float:
    if j == 0:
        return 1.0
    if dist == "zero" or j % 2:
        return 0.0
    if dist == "rademacher":
        return sigma ** j
    return sigma ** j * float(np.prod(np.arange(j - 1, 0, -2))) if j > 1 else 0.0


@dataclass(frozen=True)
class BandDiagonalSpec:
    """Entries of one diagonal offset of a band matrix.

    ``chi``: ``i**alpha * chi_{i beta} / sqrt(i beta)`` (limit moments all 1);
    ``const``: ``i**alpha``; ``normal``: ``i**alpha * N(0, 1)``; ``zero``.
    """

    alpha: float = 0.5
    family: str = "chi"
    beta: float = 2.0

    def __post_init__(self):
        if self.family not in ("chi", "const", "normal", "zero"):
            raise ValueError(f"unknown band entry family {self.family!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")

    def limit_moments(self, K: int) -> tuple[float, ...]:
        """Moments of the limit of ``b_{v,i} / i**alpha``."""
        if self.family in ("chi", "const"):
            return (1.0,) * (K + 1)
        if self.family == "zero":
            return (1.0,) + (0.0,) * K
        return tuple(_z_moment("normal", 1.0, j) for j in range(K + 1))

    def draw(self, i: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        i = np.asarray(i, dtype=float)
        scale = i ** self.alpha
        if self.family == "zero":
            return np.zeros_like(i)
        if self.family == "const":
            return scale
        if self.family == "normal":
            return scale * rng.standard_normal(i.size)
        r = i * self.beta
        return scale * np.sqrt(rng.gamma(r / 2.0, 2.0) / r)


@dataclass(frozen=True)
class Budget:
    """Desk-scale limits; raise them explicitly for larger runs."""

    max_n: int = 4096
    max_reps: int = 5000
    max_k: int = 12
    path_sum_kn: int = 200_000

    def check(self, n: int | None = None, reps: int | None = None, k: int | None = None) -> None:
        if n is not None and n > self.max_n:
            raise ValueError(f"budget exceeded: n={n} > max_n={self.max_n}")
        if reps is not None and reps > self.max_reps:
            raise ValueError(f"budget exceeded: reps={reps} > max_reps={self.max_reps}")
        if k is not None and k > self.max_k:
            raise ValueError(f"budget exceeded: k={k} > max_k={self.max_k}")


DEFAULT_BUDGET = Budget()


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample(spec: EnsembleSpec, n: int, rng: np.random.Generator) -> TridiagonalMatrix:
    """Draw one matrix.  Off-diagonal entries are drawn first, then the diagonal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(1, n, dtype=float)
    fam = spec.offdiag_family
    if fam == "beta_hermite":
        b = np.sqrt(rng.gamma(k * spec.beta / 2.0, 2.0)) / math.sqrt(spec.beta)
    elif fam == "power_perturbed":
        if spec.z_dist == "normal":
            z = spec.sigma_z * rng.standard_normal(n - 1)
        elif spec.z_dist == "rademacher":
            z = spec.sigma_z * (2.0 * rng.integers(0, 2, n - 1) - 1.0)
        else:
            z = np.zeros(n - 1)
        b = k ** spec.alpha * (1.0 + z / k ** spec.epsilon)
    elif fam == "bernoulli_scaled":
        b = k ** spec.alpha * (rng.random(n - 1) < spec.theta)
    else:
        b = np.asarray(spec.custom(k, rng), dtype=float)
    sd = math.sqrt(spec.diag_variance)
    d = sd * rng.standard_normal(n) if sd > 0 else np.zeros(n)
    return TridiagonalMatrix(d, b)


def sample_band(per_diagonal: Sequence[BandDiagonalSpec], n: int, w: int, rng: np.random.Generator) -> BandMatrix:
    """Draw a band matrix with ``b_{v,i}`` distributed per ``per_diagonal[v]``."""
    if len(per_diagonal) != w + 1:
        raise ValueError(f"need w + 1 = {w + 1} diagonal specs, got {len(per_diagonal)}")
    if not 1 <= w < n:
        raise ValueError(f"band width must satisfy 1 <= w < n, got w={w}, n={n}")
    bands = tuple(per_diagonal[v].draw(np.arange(1, n - v + 1), rng) for v in range(w + 1))
    return BandMatrix(bands)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


def _sturm_counts(d: np.ndarray, b2: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Number of eigenvalues strictly below each entry of ``x``."""
    tiny = np.finfo(float).tiny
    # a zero pivot is treated as -tiny, i.e. x moved up by a negligible amount
    q = d[0] - x
    q = np.where(q == 0.0, -tiny, q)
    count = (q < 0).astype(np.int64)
    for i in range(1, d.size):
        q = (d[i] - x) - b2[i - 1] / q
        q = np.where(q == 0.0, -tiny, q)
        count += q < 0
    return count


def eigenvalues(T: TridiagonalMatrix, tol: float | None = None) -> np.ndarray:
    """All eigenvalues by Sturm-sequence bisection, ascending.

    Each eigenvalue is bracketed to width ``tol`` (default
    ``1e-12`` times the Gershgorin radius).
    """
    R = T.gershgorin_radius()
    if R == 0.0:
        return np.zeros(T.n)
    if tol is None:
        tol = 1e-12 * R
    if not tol > 0:
        raise ValueError("tol must be > 0")
    d, b2 = T.diag, T.offdiag ** 2
    n = T.n
    lo = np.full(n, -R * (1 + 1e-15) - tol)
    hi = np.full(n, R * (1 + 1e-15) + tol)
    idx = np.arange(n)
    steps = int(math.ceil(math.log2((hi[0] - lo[0]) / tol))) + 1
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = _sturm_counts(d, b2, mid) > idx
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    return 0.5 * (lo + hi)


def band_eigenvalues(B: BandMatrix) -> np.ndarray:
    """Eigenvalues of a band matrix via LAPACK's banded symmetric solver."""
    from scipy.linalg import eig_banded

    ab = np.zeros((B.w + 1, B.n))
    for v in range(B.w + 1):
        ab[v, : B.n - v] = B.bands[v]  # lower form: ab[v, j] = A[j + v, j]
    return np.sort(eig_banded(ab, lower=True, eigvals_only=True))


# ---------------------------------------------------------------------------
# trace powers
# ---------------------------------------------------------------------------


def _as_bands(T: TridiagonalMatrix | BandMatrix) -> tuple[np.ndarray, ...]:
    if isinstance(T, TridiagonalMatrix):
        return (T.diag, T.offdiag)
    return T.bands


def _band_power_step(P: np.ndarray, h: int, bands: Sequence[np.ndarray]) -> tuple[np.ndarray, int]:
    """Multiply a symmetric band matrix (``P[h + s, i] = M[i, i + s]``) by ``A``."""
    n = P.shape[1]
    w = len(bands) - 1
    full = np.zeros((2 * w + 1, n))
    for v, b in enumerate(bands):
        full[w + v, : n - v] = b  # A[i, i + v]
        if v:
            full[w - v, v:] = b  # A[i, i - v]
    H = h + w
    Q = np.zeros((2 * H + 1, n))
    for s in range(-h, h + 1):
        row = P[h + s]
        for r in range(-w, w + 1):
            # Q[i, i+s+r] += M[i, i+s] * A[i+s, i+s+r]
            j0, j1 = max(0, -s), min(n, n - s)
            if j0 >= j1:
                continue
            Q[H + s + r, j0:j1] += row[j0:j1] * full[w + r, j0 + s: j1 + s]
    return Q, H


def _exact_traces(bands: Sequence[np.ndarray], k_max: int) -> np.ndarray:
    """``Tr A**k`` for ``k = 0..k_max`` from band powers, ``Tr A**(a+b) = <A**a, A**b>``."""
    n = bands[0].size
    half = (k_max + 1) // 2
    powers = [(np.ones((1, n)), 0)]
    for _ in range(half):
        P, h = powers[-1]
        powers.append(_band_power_step(P, h, bands))
    out = np.empty(k_max + 1)
    for k in range(k_max + 1):
        a, b = k // 2, k - k // 2
        Pa, ha = powers[a]
        Pb, hb = powers[b]
        out[k] = float(np.sum(Pa * Pb[hb - ha: hb + ha + 1])) if k else float(n)
    return out


def _path_sum_trace(T: TridiagonalMatrix, k: int, budget: Budget) -> float:
    n = T.n
    if k * n > budget.path_sum_kn:
        raise ValueError(f"budget exceeded: path_sum needs k*n={k * n} > {budget.path_sum_kn}")
    if k == 0:
        return float(n)
    d, b = T.diag, T.offdiag
    total = []
    for shape in _all_unit_max0(k):
        st = _stats_cached(shape)
        low = min(shape)
        # levels j + p must lie in 1..n
        p = np.arange(1 - low, n + 1)
        term = np.ones(p.size)
        for j, f in st.flats.items():
            term *= d[j + p - 1] ** f
        for i, c in st.crossings.items():
            term *= b[i + p - 1] ** c
        total.append(float(np.sum(term)))
    return math.fsum(total)


def trace_power(T: TridiagonalMatrix, k: int, method: str = "eigen", budget: Budget = DEFAULT_BUDGET) -> float:
    """``Tr(A**k)``.

    ``eigen`` sums powers of the Sturm eigenvalues; ``path_sum`` sums the
    entry products over all closed index paths (shape times shift);
    ``banded`` forms exact band powers.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if method == "eigen":
        return float(np.sum(eigenvalues(T) ** k))
    if method == "path_sum":
        return _path_sum_trace(T, k, budget)
    if method == "banded":
        return float(_exact_traces(_as_bands(T), k)[k])
    raise ValueError(f"unknown method {method!r}")


def trace_powers(T: TridiagonalMatrix | BandMatrix, k_max: int) -> np.ndarray:
    """``Tr(A**k)`` for ``k = 0..k_max`` by band powers."""
    return _exact_traces(_as_bands(T), k_max)


band_trace_powers = trace_powers


# ---------------------------------------------------------------------------
# exact finite-n expectation and limit inputs
# ---------------------------------------------------------------------------


def expected_trace_power(spec: EnsembleSpec, n: int, k: int) -> float:
    """Exact ``E[Tr A_n**k]`` from the path expansion and independent entry moments."""
    if k == 0:
        return float(n)
    total = []
    for shape in _all_unit_max0(k):
        st = _stats_cached(shape)
        p = np.arange(1 - min(shape), n + 1)
        term = np.full(p.size, math.prod(spec.diag_moment(f) for f in st.flats.values()))
        for i, c in st.crossings.items():
            term = term * spec.offdiag_moment(i + p, c)
        total.append(float(np.sum(term)))
    return math.fsum(total)


def limit_moments_of(spec: EnsembleSpec, K: int) -> MomentSequence:
    """Limits ``m_k`` of ``E[(b_n / n**alpha)**k]`` for the built-in families."""
    fam = spec.offdiag_family
    if fam in ("beta_hermite", "power_perturbed"):
        return MomentSequence.ones(K, spec.alpha)
    if fam == "bernoulli_scaled":
        return MomentSequence.bernoulli(spec.theta, K, spec.alpha)
    raise ValueError("limit moments of custom entries must be supplied by the caller")


def deviation_input_of(spec: EnsembleSpec, K: int) -> DeviationInput:
    """First-order entry data of the beta-Hermite family.

    ``n (E[(chi_{n beta}/sqrt(n beta))**k] - 1) -> k (k - 2) / (4 beta)`` and
    ``Var d = 2 / beta``.
    """
    if spec.offdiag_family != "beta_hermite":
        raise ValueError("deviation data are tabulated for the beta-Hermite family only")
    xi = tuple(k * (k - 2) / (4.0 * spec.beta) for k in range(K + 1))
    return DeviationInput(1.0, xi, 2.0 / spec.beta)


def fluctuation_model_of(spec: EnsembleSpec, K: int = 64):
    """Covariance-formula inputs of the built-in families."""
    from .fluctuations import FluctuationModel, perturbative_model

    fam = spec.offdiag_family
    if fam == "beta_hermite":
        # chi_r - sqrt(r) -> N(0, 1/2): b_n / sqrt(n) = 1 + Z / sqrt(n), Var Z = 1/(2 beta)
        return perturbative_model(0.5, 0.5, 1.0 / (2.0 * spec.beta), 2.0 / spec.beta, K)
    if fam == "power_perturbed":
        sd2 = spec.diag_variance if math.isclose(spec.epsilon, spec.alpha) else 0.0
        zvar = 0.0 if spec.z_dist == "zero" else spec.sigma_z ** 2
        return perturbative_model(spec.alpha, spec.epsilon, zvar, sd2, K)
    if fam == "bernoulli_scaled":
        return FluctuationModel(MomentSequence.bernoulli(spec.theta, K, spec.alpha), 0.0)
    raise ValueError("fluctuation inputs of custom entries must be supplied by the caller")


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def max_threads() -> int:
    """Worker count: CPU count, capped by ``TRIMOMENT_THREADS`` when set."""
    n = os.cpu_count() or 1
    env = os.environ.get("TRIMOMENT_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"TRIMOMENT_THREADS must be an integer, got {env!r}") from None
        n = min(n, max(cap, 1))
    return n


def _replicates(fn: Callable[[np.random.Generator], np.ndarray], reps: int, seed: int,
                threads: int | None) -> np.ndarray:
    """Run ``fn`` on ``reps`` seed-derived streams; rows come back in replicate order."""
    children = np.random.SeedSequence(seed).spawn(reps)
    work = lambda ss: fn(np.random.default_rng(ss))  # noqa: E731
    threads = max_threads() if threads is None else max(1, int(threads))
    if threads == 1:
        rows = [work(ss) for ss in children]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(work, children))
    return np.vstack(rows)


@dataclass(frozen=True)
class MCResult:
    ks: tuple[int, ...]
    mean: np.ndarray
    stderr: np.ndarray
    samples: np.ndarray = field(repr=False)
    n: int = 0
    reps: int = 0
    seed: int = 0


@dataclass(frozen=True)
class FluctResult:
    ks: tuple[int, ...]
    cov: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    samples: np.ndarray = field(repr=False)
    n: int = 0
    reps: int = 0
    seed: int = 0


def _normalized_traces(spec_alpha: float, n: int, traces: np.ndarray) -> np.ndarray:
    k = np.arange(traces.size)
    return traces / n ** (spec_alpha * k + 1.0)


def mc_moments(spec: EnsembleSpec, n: int, k_max: int, reps: int, seed: int,
               threads: int | None = None, budget: Budget = DEFAULT_BUDGET) -> MCResult:
    """Sample mean and standard error of ``tr_n(X_n**k)`` for ``k = 1..k_max``."""
    if reps < 2:
        raise ValueError("reps must be >= 2")
    budget.check(n=n, reps=reps, k=k_max)

    def one(rng):
        T = sample(spec, n, rng)
        return _normalized_traces(spec.alpha, n, _exact_traces((T.diag, T.offdiag), k_max))[1:]

    S = _replicates(one, reps, seed, threads)
    return MCResult(tuple(range(1, k_max + 1)), S.mean(axis=0), S.std(axis=0, ddof=1) / math.sqrt(reps),
                    S, n, reps, seed)


def mc_fluctuations(spec: EnsembleSpec, n: int, k_list: Sequence[int], reps: int, seed: int,
                    threads: int | None = None, budget: Budget = DEFAULT_BUDGET) -> FluctResult:
    """Empirical covariance of ``n**(eps + 1/2) * (tr_n X**k - mean)`` over ``k_list``."""
    if reps < 100:
        raise ValueError("reps must be >= 100")
    ks = tuple(int(k) for k in k_list)
    k_max = max(ks)
    budget.check(n=n, reps=reps, k=k_max)
    scale = n ** (spec.epsilon + 0.5)

    def one(rng):
        T = sample(spec, n, rng)
        tr = _normalized_traces(spec.alpha, n, _exact_traces((T.diag, T.offdiag), k_max))
        return scale * tr[list(ks)]

    S = _replicates(one, reps, seed, threads)
    C = S - S.mean(axis=0)
    cov = C.T @ C / (reps - 1)
    m2 = np.mean(C ** 2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        skew = np.mean(C ** 3, axis=0) / m2 ** 1.5
        kurt = np.mean(C ** 4, axis=0) / m2 ** 2 - 3.0
    return FluctResult(ks, cov, skew, kurt, S, n, reps, seed)


def mc_band_moments(per_diagonal: Sequence[BandDiagonalSpec], n: int, w: int, k_max: int, reps: int,
                    seed: int, threads: int | None = None, budget: Budget = DEFAULT_BUDGET) -> MCResult:
    """``tr_n(X**k)`` statistics for band matrices, with ``alpha = max_v alpha_v``."""
    if reps < 2:
        raise ValueError("reps must be >= 2")
    budget.check(n=n, reps=reps, k=k_max)
    alpha = max(s.alpha for s in per_diagonal)

    def one(rng):
        B = sample_band(per_diagonal, n, w, rng)
        return _normalized_traces(alpha, n, _exact_traces(B.bands, k_max))[1:]

    S = _replicates(one, reps, seed, threads)
    return MCResult(tuple(range(1, k_max + 1)), S.mean(axis=0), S.std(axis=0, ddof=1) / math.sqrt(reps),
                    S, n, reps, seed)
