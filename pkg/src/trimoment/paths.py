"""Closed lattice paths and their level statistics.

A path is a tuple of integer levels ``(j_1, ..., j_{k+1})`` with
``j_1 == j_{k+1}``.  Every limit formula in this package is a finite sum over
one of the path families enumerated here, so the enumerators are exact,
deterministic (lexicographic order) and cached.

Level conventions
-----------------
``crossings[i]`` counts the steps that cross the horizontal line ``y = i + 1/2``
(for a unit step this is the step between levels ``i`` and ``i + 1``).
``flats[i]`` counts flat steps at level ``i``.  ``banded[(i, j)]`` with
``i <= j`` counts the steps whose endpoints are exactly ``{i, j}``; flats
appear there as ``(i, i)``.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

Path = tuple[int, ...]
ColorWord = tuple[int, ...]

__all__ = [
    "Path",
    "ColorWord",
    "LevelStats",
    "validate_path",
    "level_stats",
    "colored_stats",
    "enumerate_gamma",
    "enumerate_gamma_minus",
    "enumerate_gamma_2flat",
    "enumerate_gamma_band",
    "enumerate_gamma_pairs",
    "share_a_level",
    "brute_force_closed_paths",
    "paths_to_json",
]


@dataclass(frozen=True)
class LevelStats:
    """Per-level counts extracted from one path.

    Only nonzero counts are stored; missing keys mean zero.
    """

    crossings: dict[int, int] = field(default_factory=dict)
    flats: dict[int, int] = field(default_factory=dict)
    banded: dict[tuple[int, int], int] = field(default_factory=dict)
    colored: dict[tuple[int, int], int] = field(default_factory=dict)
    colored_flats: dict[tuple[int, int], int] = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return sum(self.banded.values())

    @property
    def n_flats(self) -> int:
        return sum(self.flats.values())

    def shifted(self, p: int) -> "LevelStats":
        """Statistics of ``path + p``."""
        return LevelStats(
            crossings={i + p: c for i, c in self.crossings.items()},
            flats={i + p: c for i, c in self.flats.items()},
            banded={(i + p, j + p): c for (i, j), c in self.banded.items()},
            colored={(i + p, u): c for (i, u), c in self.colored.items()},
            colored_flats={(i + p, u): c for (i, u), c in self.colored_flats.items()},
        )


def validate_path(p: Sequence[int], w: int | None = None) -> Path:
    """Return ``p`` as a tuple after checking it is closed (and ``w``-bounded)."""
    path = tuple(int(j) for j in p)
    if len(path) < 2:
        raise ValueError("a path needs at least one step")
    if path[0] != path[-1]:
        raise ValueError(f"path is not closed: starts at {path[0]}, ends at {path[-1]}")
    if w is not None:
        for a, b in zip(path, path[1:]):
            if abs(a - b) > w:
                raise ValueError(f"step {a}->{b} exceeds step bound {w}")
    return path


def _stats(path: Path) -> LevelStats:
    crossings: Counter[int] = Counter()
    flats: Counter[int] = Counter()
    banded: Counter[tuple[int, int]] = Counter()
    for a, b in zip(path, path[1:]):
        lo, hi = (a, b) if a <= b else (b, a)
        banded[(lo, hi)] += 1
        if lo == hi:
            flats[lo] += 1
        for i in range(lo, hi):
            crossings[i] += 1
    return LevelStats(dict(crossings), dict(flats), dict(banded))


@lru_cache(maxsize=1 << 16)
def _stats_cached(path: Path) -> LevelStats:
    return _stats(path)


def level_stats(p: Sequence[int]) -> LevelStats:
    """Crossing, flat and banded counts of a closed path.

    Examples
    --------
    >>> s = level_stats((0, -1, 0, -1, 0))
    >>> s.crossings
    {-1: 4}
    """
    return _stats_cached(validate_path(p))


def colored_stats(p: Sequence[int], word: Sequence[int], palette: int | None = None) -> LevelStats:
    """Level statistics split by the color of each step.

    Step ``u`` (from ``p[u]`` to ``p[u+1]``) carries color ``word[u]``.
    ``colored[(i, c)]`` is the number of color-``c`` steps crossing
    ``y = i + 1/2`` and ``colored_flats[(i, c)]`` the number of color-``c``
    flat steps at level ``i``.
    """
    path = validate_path(p)
    word = tuple(int(c) for c in word)
    if len(word) != len(path) - 1:
        raise ValueError(f"color word has length {len(word)}, path has {len(path) - 1} steps")
    if palette is not None:
        bad = [c for c in word if not 1 <= c <= palette]
        if bad:
            raise ValueError(f"colors {bad} outside palette 1..{palette}")
    base = _stats_cached(path)
    colored: Counter[tuple[int, int]] = Counter()
    colored_flats: Counter[tuple[int, int]] = Counter()
    for a, b, c in zip(path, path[1:], word):
        lo, hi = min(a, b), max(a, b)
        if lo == hi:
            colored_flats[(lo, c)] += 1
        for i in range(lo, hi):
            colored[(i, c)] += 1
    return LevelStats(base.crossings, base.flats, base.banded, dict(colored), dict(colored_flats))


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def _closed_paths_max0(k: int, steps: tuple[int, ...], lowest: int) -> tuple[Path, ...]:
    """All closed paths of length ``k`` with max level exactly 0.

    Levels are confined to ``[lowest, 0]`` during the search, and the
    requirement to touch 0 is pruned on the fly: from level ``cur`` with
    ``r`` steps left, a path starting at ``s`` that has not yet touched 0
    must still be able to climb to 0 and return to ``s``.  Steps are tried
    in ascending order, so output is lexicographic.
    """
    w = max(abs(s) for s in steps)
    out: list[Path] = []
    buf = [0] * (k + 1)

    def need(cur: int, start: int, touched: bool) -> int:
        # minimal number of steps to finish at ``start`` (touching 0 if needed)
        if touched:
            return -(-abs(cur - start) // w)
        return -(-(-cur) // w) + -(-(-start) // w)

    def rec(u: int, cur: int, start: int, touched: bool) -> None:
        if u == k:
            if cur == start and touched:
                out.append(tuple(buf))
            return
        remaining = k - u - 1
        for s in steps:
            nxt = cur + s
            if nxt > 0 or nxt < lowest:
                continue
            t = touched or nxt == 0
            if need(nxt, start, t) > remaining:
                continue
            buf[u + 1] = nxt
            rec(u + 1, nxt, start, t)

    for start in range(lowest, 1):
        buf[0] = start
        if need(start, start, start == 0) > k:
            continue
        rec(0, start, start, start == 0)
    return tuple(out)


@lru_cache(maxsize=None)
def enumerate_gamma(k: int) -> tuple[Path, ...]:
    """Closed ±1-step paths of length ``k`` whose maximum level is 0.

    Empty for odd ``k``.  There are ``C(k, k/2)`` of them for even ``k``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k % 2:
        return ()
    return _closed_paths_max0(k, (-1, 1), -(k // 2))


@lru_cache(maxsize=None)
def _all_unit_max0(k: int) -> tuple[Path, ...]:
    return _closed_paths_max0(k, (-1, 0, 1), -(k // 2))


@lru_cache(maxsize=None)
def enumerate_gamma_minus(k: int, max_flats: int | None = None) -> tuple[Path, ...]:
    """Closed paths with steps in {-1, 0, 1}, max level 0 and at least one flat.

    ``max_flats`` keeps only paths with at most that many flat steps.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    out = []
    for p in _all_unit_max0(k):
        nf = _stats_cached(p).n_flats
        if nf >= 1 and (max_flats is None or nf <= max_flats):
            out.append(p)
    return tuple(out)


@lru_cache(maxsize=None)
def enumerate_gamma_2flat(k: int) -> tuple[Path, ...]:
    """Paths of the minus family with exactly two flat steps at one common level."""
    out = []
    for p in enumerate_gamma_minus(k, max_flats=2):
        flats = _stats_cached(p).flats
        if len(flats) == 1 and next(iter(flats.values())) == 2:
            out.append(p)
    return tuple(out)


@lru_cache(maxsize=None)
def enumerate_gamma_band(k: int, w: int) -> tuple[Path, ...]:
    """Closed paths of length ``k`` with steps of size at most ``w`` and max 0."""
    if k < 1 or w < 1:
        raise ValueError("k and w must be >= 1")
    steps = tuple(range(-w, w + 1))
    # a closed path of length k with max 0 cannot descend below -w*floor(k/2)
    return _closed_paths_max0(k, steps, -w * (k // 2))


def share_a_level(s1: LevelStats, s2: LevelStats) -> bool:
    """True when two paths both cross some line, or both have flats at some level."""
    if any(i in s2.crossings for i in s1.crossings):
        return True
    return any(i in s2.flats for i in s1.flats)


@lru_cache(maxsize=None)
def enumerate_gamma_pairs(k: int, l: int) -> tuple[tuple[Path, Path], ...]:
    """Pairs of paths sharing a level, with joint maximum 0.

    Both even: both paths flat-free.  Both odd: each path has exactly one flat
    step and the two flats sit at the same level.  Mixed parity: empty.

    Realized by anchoring one path at maximum 0 and sliding the other one
    below it by integer shifts, and symmetrically; the pair is kept when the
    predicate holds.  Output is sorted lexicographically.
    """
    if k < 1 or l < 1:
        raise ValueError("k and l must be >= 1")
    if (k + l) % 2:
        return ()
    if k % 2 == 0:
        fam1, fam2 = enumerate_gamma(k), enumerate_gamma(l)

        def ok(a: Path, b: Path) -> bool:
            return share_a_level(_stats_cached(a), _stats_cached(b))

    else:
        fam1 = enumerate_gamma_minus(k, max_flats=1)
        fam2 = enumerate_gamma_minus(l, max_flats=1)

        def ok(a: Path, b: Path) -> bool:
            return _stats_cached(a).flats.keys() == _stats_cached(b).flats.keys()

    pairs: set[tuple[Path, Path]] = set()
    # anchor the first path at max 0, slide the second one to max <= 0
    for g1 in fam1:
        for z in fam2:
            for q in range(min(g1) - max(z) - 1, 1):
                g2 = tuple(j + q for j in z)
                if max(g2) <= 0 and ok(g1, g2):
                    pairs.add((g1, g2))
    # anchor the second path, slide the first one strictly below max 0
    for g2 in fam2:
        for z in fam1:
            for q in range(min(g2) - max(z) - 1, 0):
                g1 = tuple(j + q for j in z)
                if max(g1) < 0 and ok(g1, g2):
                    pairs.add((g1, g2))
    return tuple(sorted(pairs))


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def brute_force_closed_paths(
    k: int, lo: int, hi: int = 0, w: int = 1
) -> tuple[Path, ...]:
    """Every closed path in ``{lo..hi}^(k+1)`` with steps bounded by ``w``.

    Exhaustive product scan, used only as an independent oracle for the
    structured enumerators.  Output is lexicographic.
    """
    out = []
    for head in itertools.product(range(lo, hi + 1), repeat=k):
        p = head + (head[0],)
        if all(abs(a - b) <= w for a, b in zip(p, p[1:])):
            out.append(p)
    return tuple(out)


def paths_to_json(paths: Iterable) -> str:
    """Serialize paths (or pairs of paths) as nested JSON integer arrays."""
    return json.dumps([list(p) if isinstance(p[0], int) else [list(q) for q in p] for p in paths])
