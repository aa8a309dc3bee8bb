"""
Enumeration of words over ``{1, ..., N}`` and their matrix products.

Words of length ``n`` are ranked lexicographically, ``rank = sum_j (i_j - 1) N^(n-j)``.
Work is split into shards by fixed-length prefixes: with prefix length
``p = ceil(log_N shards)`` the prefix of rank ``r`` belongs to shard
``r * shards // N^p``, so every shard owns a contiguous rank range at every
level. Inside a shard the tree is walked depth first over block roots and each
root's subtree is expanded breadth first in one batched multiply per level,
so every tree edge costs exactly one matrix product.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .errors import BudgetError, DomainError
from .maps import as_tuple

DEFAULT_BUDGET = 10**8
DEFAULT_CHUNK = 1 << 16

Word = tuple


class WordProductVisit(NamedTuple):
    word: Word  # 1-based symbols
    product: np.ndarray
    shard: int


class Block(NamedTuple):
    """Products of the words of one level with ranks ``start .. start + len(products) - 1``."""

    shard: int
    level: int
    start: int
    products: np.ndarray


class VisitSummary(NamedTuple):
    visits: int
    shards: int
    prefix_length: int
    per_shard: tuple


def check_budget(count: int, n: int, budget: int = DEFAULT_BUDGET) -> int:
    """Raise :class:`BudgetError` when ``count**n`` exceeds ``budget``; return ``count**n``."""
    total = count**n
    if total > budget:
        raise BudgetError(
            f"level {n} has {count}^{n} = {total} words, above the budget of {budget}; raise it with --budget"
        )
    return total


def prefix_length(count: int, shards: int) -> int:
    p = 0
    while count**p < shards:
        p += 1
    return p


def parse_word(word) -> Word:
    """Accept ``"12"``, ``[1, 2]`` or ``(1, 2)``; return a tuple of 1-based symbols."""
    if isinstance(word, str):
        return tuple(int(c) for c in word)
    return tuple(int(c) for c in word)


def word_product(maps, word) -> np.ndarray:
    """``A_{i_1} A_{i_2} ... A_{i_n}`` for a non-empty word of 1-based symbols."""
    t = as_tuple(maps)
    w = parse_word(word)
    if not w:
        raise DomainError("word must be non-empty")
    for sym in w:
        if not 1 <= sym <= t.count:
            raise DomainError(f"symbol {sym} outside 1..{t.count}")
    out = t.maps[w[0] - 1].copy()
    for sym in w[1:]:
        out = out @ t.maps[sym - 1]
    return out


def word_digits(start: int, count: int, length: int, n_symbols: int) -> np.ndarray:
    """0-based symbols of the words with ranks ``start .. start+count-1`` as an ``(count, length)`` array."""
    ranks = start + np.arange(count, dtype=np.int64)
    powers = n_symbols ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (ranks[:, None] // powers[None, :]) % n_symbols


def word_from_rank(rank: int, length: int, n_symbols: int) -> Word:
    return tuple(int(x) + 1 for x in word_digits(rank, 1, length, n_symbols)[0])


def shard_range(level: int, shard: int, shards: int, n_symbols: int) -> tuple:
    """Rank range ``[lo, hi)`` of the words of ``level`` owned by ``shard``."""
    p = prefix_length(n_symbols, shards)
    top = n_symbols**p
    lo = -(-shard * top // shards)
    hi = -(-(shard + 1) * top // shards)
    scale = n_symbols**level
    return -(-lo * scale // top), -(-hi * scale // top)


def _expand(products: np.ndarray, maps: np.ndarray) -> np.ndarray:
    """Children ``P A_i`` of every parent ``P``, in lexicographic order."""
    d = maps.shape[-1]
    return np.matmul(products[:, None], maps[None]).reshape(-1, d, d)


def _range_products(maps: np.ndarray, level: int, lo: int, hi: int, cache: dict) -> np.ndarray:
    key = (level, lo, hi)
    if key in cache:
        return cache[key]
    n_sym = maps.shape[0]
    if level == 1:
        out = maps[lo:hi]
    else:
        plo, phi = lo // n_sym, (hi - 1) // n_sym + 1
        parents = _range_products(maps, level - 1, plo, phi, cache)
        out = _expand(parents, maps)[lo - plo * n_sym : hi - plo * n_sym]
    cache[key] = out
    return out


def iter_shard_blocks(
    maps,
    n: int,
    shard: int = 0,
    shards: int = 1,
    levels: Optional[Sequence[int]] = None,
    chunk: int = DEFAULT_CHUNK,
) -> Iterator[Block]:
    """Blocks of products for one shard, covering every requested level in ``1..n``.

    Blocks of a given level arrive in increasing rank order.
    """
    a = as_tuple(maps).maps
    n_sym = a.shape[0]
    if n < 1:
        raise DomainError(f"level must be >= 1, got {n}")
    wanted = set(range(1, n + 1)) if levels is None else set(levels)
    p = prefix_length(n_sym, shards)
    # block roots sit at depth b; below them subtrees of <= chunk leaves
    b = n
    while b > p and n_sym ** (n - b + 1) <= chunk:
        b -= 1
    b = max(b, min(p, n), 1)
    cache: dict = {}
    for level in range(1, b + 1):
        lo, hi = shard_range(level, shard, shards, n_sym)
        if hi <= lo:
            continue
        prods = _range_products(a, level, lo, hi, cache)
        if level in wanted:
            yield Block(shard, level, lo, prods)
    if b == n:
        return
    lo, hi = shard_range(b, shard, shards, n_sym)
    if hi <= lo:
        return
    roots = _range_products(a, b, lo, hi, cache)
    cache.clear()
    group = max(1, chunk // n_sym ** (n - b))
    for g0 in range(0, hi - lo, group):
        prods = roots[g0 : g0 + group]
        first = lo + g0
        for level in range(b + 1, n + 1):
            prods = _expand(prods, a)
            first *= n_sym
            if level in wanted:
                yield Block(shard, level, first, prods)


def map_shards(fn: Callable[[int], object], shards: int, workers: int = 1) -> list:
    """Evaluate ``fn(shard)`` for every shard; results are returned in ascending shard order."""
    if workers <= 1 or shards <= 1:
        return [fn(s) for s in range(shards)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(shards)))


def visit_level(
    maps,
    n: int,
    visitor: Callable[[WordProductVisit], None],
    shards: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> VisitSummary:
    """Call ``visitor`` once for every word of length ``n``.

    Shards are processed in ascending order and words within a shard in
    lexicographic order, so the call sequence is reproducible.
    """
    t = as_tuple(maps)
    if n < 1:
        raise DomainError(f"level must be >= 1, got {n}")
    if shards < 1:
        raise DomainError("shards must be >= 1")
    check_budget(t.count, n, budget)
    per_shard = []
    for shard in range(shards):
        visits = 0
        for blk in iter_shard_blocks(t, n, shard, shards, levels=(n,)):
            digits = word_digits(blk.start, len(blk.products), n, t.count) + 1
            for w, prod in zip(digits, blk.products):
                visitor(WordProductVisit(tuple(int(x) for x in w), prod, shard))
            visits += len(blk.products)
        per_shard.append(visits)
    return VisitSummary(sum(per_shard), shards, min(prefix_length(t.count, shards), n), tuple(per_shard))
