"""Limiting spectral laws: Ullman densities and the Bernoulli mixtures.

Ullman's law ``nu_alpha`` is the law of ``T**alpha * W`` with ``T`` uniform on
``[0, 1]`` and ``W`` arcsine on ``[-2, 2]``.  Conditioning on ``W = w`` gives

    h_alpha(x) = |x|**(1/a - 1) / (a pi 2**(1/a)) * int_{|x|}^{2} t**(1/a - 1) / sqrt(t**2 - x**2) dt,

which after ``t = |x| cosh(u)`` is the smooth integral used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "SpectralMeasure",
    "ullman_pdf",
    "ullman_pdf_integral",
    "ullman_sample",
    "ullman_measure",
    "arcsine_pdf",
    "chebyshev_block_eigenvalues",
    "bernoulli_measure",
    "default_n_max",
    "measure_moment",
]

_QUAD = dict(epsabs=0.0, epsrel=1e-13, limit=200)
# above this many jump points the Bernoulli blocks are rebuilt per evaluation
_MAX_STORED = 2_000_000


@dataclass(frozen=True)
class SpectralMeasure:
    """Atoms plus an absolutely continuous part on a closed interval.

    ``density`` is vectorized.  ``breakpoints`` lists points in the support
    where the density jumps or is singular, for quadrature.  ``singular_power``
    is the exponent ``p`` in ``density(x) ~ |x|**p`` near 0 (``None`` when the
    density is bounded and smooth there).
    """

    atoms: tuple[tuple[float, float], ...]
    density: Callable[[np.ndarray], np.ndarray] | None
    support: tuple[float, float] = (-2.0, 2.0)
    breakpoints: tuple[float, ...] = ()
    truncation_error: float = 0.0
    singular_power: float | None = None
    label: str = ""
    info: dict = field(default_factory=dict)

    @property
    def atom_mass(self) -> float:
        return math.fsum(w for _, w in self.atoms)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.density is None:
            return np.zeros_like(x)
        return self.density(x)


# ---------------------------------------------------------------------------
# Ullman
# ---------------------------------------------------------------------------


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be a positive real, got {alpha}")
    return alpha


def _ullman_scalar(ax: float, alpha: float) -> float:
    p = 1.0 / alpha - 1.0
    if ax >= 2.0:
        return 0.0
    if ax == 0.0:
        return 1.0 / (2.0 * math.pi * (1.0 - alpha)) if alpha < 1 else math.inf
    U = math.acosh(2.0 / ax)
    # int_0^U (|x| cosh u)**p du; the integrand stays below 2**p
    val, _ = integrate.quad(lambda u: (ax * math.cosh(u)) ** p, 0.0, U, **_QUAD)
    return val / (alpha * math.pi * 2.0 ** (1.0 / alpha))


def ullman_pdf_integral(x, alpha: float):
    """Ullman density by adaptive quadrature, for every ``alpha > 0``."""
    alpha = _check_alpha(alpha)
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.array([_ullman_scalar(float(v), alpha) for v in ax.ravel()]).reshape(ax.shape)
    return out if out.ndim else float(out)


def _closed_form(ax: np.ndarray, alpha: float) -> np.ndarray | None:
    inside = ax < 2.0
    s = np.sqrt(np.where(inside, 4.0 - ax * ax, 0.0))
    if alpha == 0.25:
        return np.where(inside, (2.0 + ax * ax) * s / (6.0 * math.pi), 0.0)
    if alpha == 0.5:
        return np.where(inside, s / (2.0 * math.pi), 0.0)
    if alpha == 1.0:
        with np.errstate(divide="ignore"):
            val = np.log((2.0 + s) / ax) / (2.0 * math.pi)
        return np.where(inside, val, 0.0)
    return None


def ullman_pdf(x, alpha: float):
    """Density ``h_alpha`` of Ullman's law.

    Closed forms are used for ``alpha`` in ``{1/4, 1/2, 1}`` and adaptive
    quadrature otherwise.  Zero outside ``[-2, 2]``.  For ``alpha >= 1`` the
    density diverges at 0 and ``inf`` is returned there.
    """
    alpha = _check_alpha(alpha)
    ax = np.abs(np.asarray(x, dtype=float))
    out = _closed_form(ax, alpha)
    if out is None:
        return ullman_pdf_integral(x, alpha)
    return out if out.ndim else float(out)


def arcsine_pdf(x):
    """Arcsine density ``1 / (pi sqrt(4 - x**2))`` on ``(-2, 2)``."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 1.0 / (math.pi * np.sqrt(4.0 - x * x))
    return np.where(inside, val, 0.0)


def ullman_sample(alpha: float, rng: np.random.Generator, size=None):
    """Draw ``T**alpha * W`` with ``T ~ U[0, 1]`` and ``W`` arcsine on ``[-2, 2]``."""
    alpha = _check_alpha(alpha)
    t = rng.random(size)
    w = 2.0 * np.cos(math.pi * rng.random(size))
    return t ** alpha * w


def ullman_measure(alpha: float) -> SpectralMeasure:
    alpha = _check_alpha(alpha)
    return SpectralMeasure(
        atoms=(),
        density=lambda x: np.asarray(ullman_pdf(x, alpha), dtype=float),
        breakpoints=(0.0,),
        singular_power=1.0 / alpha - 1.0,
        label=f"ullman(alpha={alpha})",
    )


# ---------------------------------------------------------------------------
# Bernoulli mixture
# ---------------------------------------------------------------------------


def chebyshev_block_eigenvalues(N: int) -> np.ndarray:
    """Eigenvalues ``2 cos(u pi / (N + 2))``, ``u = 1..N+1``, of the 0/1 block of size ``N + 1``.

    Returned in descending order.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    u = np.arange(1, N + 2)
    vals = 2.0 * np.cos(u * math.pi / (N + 2))
    if (N + 2) % 2 == 0:
        vals[(N + 2) // 2 - 1] = 0.0
    return vals


def default_n_max(theta: float) -> int:
    """Smallest ``N`` with ``theta**N < 1e-10``, capped at ``10**4``."""
    if theta <= 0:
        return 1
    if theta >= 1:
        return 10_000
    n = math.floor(math.log(1e-10) / math.log(theta)) + 1
    while theta ** (n - 1) < 1e-10 and n > 1:
        n -= 1
    return int(min(max(n, 1), 10_000))


def _tail_mass(theta: float, K: int) -> float:
    """Density mass of the blocks ``N >= K`` (zero eigenvalues excluded)."""
    q = 1.0 - theta
    all_terms = theta ** K * ((K + 1) * q + theta)
    K_even = K + (K % 2)
    zeros = q * q * theta ** K_even / (1.0 - theta * theta)
    return all_terms - zeros


def bernoulli_measure(
    theta: float, alpha: float, N_max: int | None = None, tail_closure: bool = False
) -> SpectralMeasure:
    """Limit law when ``b_n / n**alpha`` tends to a Bernoulli(theta) variable.

    For ``0 < theta < 1``: an atom ``(1 - theta)/(1 + theta)`` at 0 plus the
    density ``(1 - theta)**2 * sum_{N=1}^{N_max} theta**N g_{N+2}(x)``.  The
    dropped blocks carry the mass reported in ``truncation_error``.

    ``tail_closure`` adds that dropped mass back as ``mass * h_alpha``; this is
    the large-block limit of ``g_M / (M - 1)`` and is needed when
    ``theta`` is so close to 1 that no feasible ``N_max`` makes the tail small.
    """
    theta = float(theta)
    alpha = _check_alpha(alpha)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if theta == 0.0:
        return SpectralMeasure(atoms=((0.0, 1.0),), density=None, label="delta_0")
    if theta == 1.0:
        return ullman_measure(alpha)
    if N_max is None:
        N_max = default_n_max(theta)
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    inv = 1.0 / alpha
    q = 1.0 - theta

    def block(N: int):
        M = N + 2
        u = np.arange(1, (M + 1) // 2)  # positive eigenvalues only
        c = np.cos(u * math.pi / M)
        weights = np.cumsum(1.0 / (alpha * (2.0 * c) ** inv))
        return q * q * theta ** N, -2.0 * c, np.concatenate(([0.0], weights))

    n_thresholds = sum((N + 3) // 2 - 1 for N in range(1, N_max + 1))
    if n_thresholds <= _MAX_STORED:
        # merge all blocks into one decreasing step function of |x|
        parts = [block(N) for N in range(1, N_max + 1)]
        thr = np.concatenate([-nt for _, nt, _ in parts])
        inc = np.concatenate([coef * np.diff(cum) for coef, _, cum in parts])
        order = np.argsort(-thr, kind="stable")
        merged = (1.0, -thr[order], np.concatenate(([0.0], np.cumsum(inc[order]))))
        cached = [merged]
    else:
        cached = None

    def blocks():
        return cached if cached is not None else (block(N) for N in range(1, N_max + 1))

    tail = _tail_mass(theta, N_max + 1)

    def density(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        inside = ax < 2.0
        acc = np.zeros(ax.shape)
        for coef, neg_thr, cum in blocks():
            # number of u with 2 cos(u pi / M) > |x|; right-continuous in |x|
            j = np.searchsorted(neg_thr, -ax, side="left")
            acc += coef * cum[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            powx = ax ** (inv - 1.0)
        out = np.where(inside & (acc > 0), powx * acc, 0.0)
        if tail_closure:
            out = out + tail * np.asarray(ullman_pdf(ax, alpha), dtype=float)
        return out

    if cached is not None:
        pos = np.unique(thr)
        bps = tuple(np.concatenate((-pos[::-1], [0.0], pos)).tolist())
    else:
        bps = ()
    return SpectralMeasure(
        atoms=((0.0, q / (1.0 + theta)),),
        density=density,
        breakpoints=bps,
        truncation_error=0.0 if tail_closure else tail,
        singular_power=inv - 1.0,
        label=f"bernoulli(theta={theta}, alpha={alpha})",
        info={"N_max": N_max, "tail_mass": tail, "tail_closure": tail_closure,
              "breakpoints_omitted": cached is None},
    )


# ---------------------------------------------------------------------------
# moments of a measure
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _gl_panels(f, edges: np.ndarray) -> float:
    """Gauss-Legendre over consecutive panels ``[edges[i], edges[i+1]]``."""
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = f(x)
    return float(np.sum(half * (vals @ _GL_W)))


def _half_line_integral(g, bps: Sequence[float], p: float | None) -> float:
    """``int_0^2 g(x) dx`` for a density with jumps at ``bps`` and ``|x|**p`` behaviour at 0."""
    pts = np.array(sorted({b for b in bps if 0.0 < b < 2.0}))
    if len(pts) <= 50:
        edges = np.concatenate(([0.0], pts, [2.0]))
        total = []
        for a, b in zip(edges[:-1], edges[1:]):
            if a == 0.0 and p is not None and p < 0:
                # x = y**(1/(1+p)) turns |x|**p dx into a bounded integrand
                s = 1.0 / (1.0 + p)
                val, _ = integrate.quad(
                    lambda y: float(g(np.array(y ** s))) * s * y ** (s - 1.0),
                    0.0, b ** (1.0 + p), epsabs=1e-14, epsrel=1e-12, limit=400,
                )
            else:
                val, _ = integrate.quad(lambda y: float(g(np.array(y))), a, b,
                                        epsabs=1e-14, epsrel=1e-12, limit=400)
            total.append(val)
        return math.fsum(total)
    # many jumps: fixed-order rule on each smooth panel, graded near 0
    first = pts[0]
    edges = np.concatenate((pts, [2.0]))
    body = _gl_panels(lambda x: g(x), edges)
    grade = first * np.geomspace(1e-12, 1.0, 60)
    head = _gl_panels(lambda x: g(x), np.concatenate(([0.0], grade)))
    return body + head


def measure_moment(mu: SpectralMeasure, k: int) -> float:
    """``int x**k mu(dx)``: atoms plus quadrature of the density."""
    if k < 0:
        raise ValueError("k must be >= 0")
    atoms = math.fsum(w * (loc ** k if k else 1.0) for loc, w in mu.atoms)
    if mu.density is None:
        return atoms
    lo, hi = mu.support
    if (lo, hi) != (-2.0, 2.0):
        raise ValueError("measure_moment expects support [-2, 2]")
    p = mu.singular_power
    if p is not None and p <= -1.0:
        raise ValueError("density is not integrable at 0")

    def right(x):
        x = np.asarray(x, dtype=float)
        return x ** k * mu.density(x)

    def left(x):
        x = np.asarray(x, dtype=float)
        return (-x) ** k * mu.density(-x)

    if mu.info.get("breakpoints_omitted"):
        raise ValueError("too many jump points for quadrature; use a smaller N_max")
    pos = _half_line_integral(right, mu.breakpoints, p)
    if not math.isfinite(pos):
        raise FloatingPointError("density quadrature did not converge")
    neg = _half_line_integral(left, [-b for b in mu.breakpoints], p)
    return atoms + pos + neg
