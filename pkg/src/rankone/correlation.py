"""Exact finite-depth lag statistics on cutting-and-stacking words.

Two engines produce identical integer pair counts
C(n)[a][b] = #{p : W[p] = a, W[p+n] = b}:

* a one-pass streaming counter (``lag_counts_naive``) that scans the word in
  chunks holding only a max-lag ring window, and
* a hierarchical counter (``PairCounter`` / ``lag_counts_block``) that never
  builds the word. It evaluates Phi(m, c) = counts of pairs (u, u+m) with
  u < c read against the inductive-limit word (stage words are prefixes of
  one another). Decomposing the source range at the coarsest stage d with
  l_d <= c turns every fully covered block into complete lower-stage tables
  (a length-l_d window overlapping a length-l_d block always induces a full,
  possibly transposed, pair range) plus small spacer histogram edge terms;
  the one block straddling c recurses with strictly smaller c.

Normalized matrices D(n) = C(n)/l_J estimate mu(level_a  T^{-n} level_b)
with boundary error |n|/l_J; negative lags are transposes.
"""

from __future__ import annotations

from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .construction import RealizedSchedule, heights
from .errors import DepthOverBudget, LagOutOfRange, MissingLag
from .words import (
    DEFAULT_BUDGET,
    DTYPE,
    alphabet_size,
    base_word,
    expand_once,
    spacer_symbol,
    stream_word,
)

__all__ = [
    "PairCounter",
    "lag_counts_naive",
    "lag_counts_block",
    "CorrMatrix",
    "corr_matrix",
    "CorrSequence",
    "corr_sequence",
    "LAG_CAP_DIVISOR",
]

#: Reported correlation matrices require |n| <= l_J / LAG_CAP_DIVISOR.
LAG_CAP_DIVISOR = 4

_COUNT_LIMIT = 1 << 62


# ---------------------------------------------------------------------------
# streaming counter

def _count_into(tables, hist, tail, chunk, g, lags, S):
    """Add pairs whose target position falls inside this chunk."""
    hist += np.bincount(chunk, minlength=S)
    if not lags:
        return
    ext = np.concatenate([tail, chunk]) if len(tail) else chunk
    tail_len = len(tail)
    end = g + len(chunk)
    for n in lags:
        lo = max(0, g - n)  # first source position with target in this chunk
        cnt = end - n - lo
        if cnt <= 0:
            continue
        a0 = lo - (g - tail_len)
        b0 = lo + n - (g - tail_len)
        a = ext[a0 : a0 + cnt].astype(np.int64)
        b = ext[b0 : b0 + cnt].astype(np.int64)
        tables[n] += np.bincount(a * S + b, minlength=S * S).reshape(S, S)


def lag_counts_naive(
    realized: RealizedSchedule,
    J: int,
    j0: int,
    lags: Iterable[int],
    chunk_size: int = 1 << 22,
    budget: int = DEFAULT_BUDGET,
    parallel: bool = False,
    workers: int = 4,
) -> Dict[int, np.ndarray]:
    """One-pass pair counts for a set of lags; |lag| bounded by the window.

    Chunks are processed independently given the preceding max-lag window,
    so the parallel path (a thread pool over chunk waves) produces integer
    counts identical to the sequential one.
    """
    lag_list = list(dict.fromkeys(int(n) for n in lags))
    S = alphabet_size(realized, j0)
    lJ = int(heights(realized, J)[J - 1])
    for n in lag_list:
        if abs(n) >= lJ:
            raise LagOutOfRange(f"|lag| {n} >= word length {lJ}")
    pos = sorted({abs(n) for n in lag_list if n != 0})
    maxlag = pos[-1] if pos else 0
    tables = {n: np.zeros((S, S), dtype=np.int64) for n in pos}
    hist = np.zeros(S, dtype=np.int64)
    tail = np.empty(0, dtype=DTYPE)
    g = 0
    stream = stream_word(realized, J, j0, chunk_size=chunk_size, budget=budget)
    if not parallel:
        for chunk in stream:
            _count_into(tables, hist, tail, chunk, g, pos, S)
            g += len(chunk)
            if maxlag:
                joined = np.concatenate([tail, chunk]) if len(tail) else chunk
                tail = joined[-maxlag:].copy()
    else:
        def job(args):
            t, ch, off = args
            part = {n: np.zeros((S, S), dtype=np.int64) for n in pos}
            h = np.zeros(S, dtype=np.int64)
            _count_into(part, h, t, ch, off, pos, S)
            return part, h

        with ThreadPoolExecutor(max_workers=workers) as ex:
            wave = []
            for chunk in stream:
                wave.append((tail, chunk, g))
                g += len(chunk)
                if maxlag:
                    joined = np.concatenate([tail, chunk]) if len(tail) else chunk
                    tail = joined[-maxlag:].copy()
                if len(wave) >= workers:
                    for part, h in ex.map(job, wave):
                        hist += h
                        for n in pos:
                            tables[n] += part[n]
                    wave = []
            for part, h in ex.map(job, wave):
                hist += h
                for n in pos:
                    tables[n] += part[n]

    out = {}
    for n in lag_list:
        if n == 0:
            out[0] = np.diag(hist)
        elif n > 0:
            out[n] = tables[n]
        else:
            out[n] = tables[-n].T.copy()
    return out


# ---------------------------------------------------------------------------
# hierarchical counter

class PairCounter:
    """Exact pair counts for one realized schedule at depth J, base j0.

    materialize_cutoff bounds the word prefix kept in memory (the recursion
    bottoms out on it); enum_cutoff switches tiny residual ranges to direct
    random-access enumeration. Both only trade speed; counts are exact.
    """

    def __init__(
        self,
        realized: RealizedSchedule,
        J: int,
        j0: int,
        materialize_cutoff: int = 1 << 16,
        enum_cutoff: int = 1 << 10,
    ):
        self.realized = realized
        self.J = J
        self.j0 = j0
        self.lengths = [int(x) for x in heights(realized, J)]
        self.lJ = self.lengths[J - 1]
        if self.lJ >= _COUNT_LIMIT:
            raise DepthOverBudget(f"word length {self.lJ} too large for exact counting")
        self.S = alphabet_size(realized, j0)
        self.star = self.S - 1
        self.enum_cutoff = enum_cutoff
        w = base_word(realized, j0)
        target = min(self.lJ, materialize_cutoff)
        j = j0
        while len(w) < target:
            r, vec = realized.stage(j)
            w = expand_once(w, r, vec, self.star)
            j += 1
        self.prefix = w[:target]
        self._layouts: Dict[int, tuple] = {}
        self._memo: Dict[tuple, np.ndarray] = {}
        self._wcounts: Dict[int, np.ndarray] = {}

    # -- layout helpers ----------------------------------------------------

    def _layout(self, g: int):
        """Segments of W_g as (starts, kinds, lens); kind 0 block, 1 gap."""
        lay = self._layouts.get(g)
        if lay is None:
            r, vec = self.realized.stage(g - 1)
            lb = self.lengths[g - 2] if g - 2 >= 0 else None
            assert g - 2 >= 0
            starts, kinds, lens = [], [], []
            pos = 0
            for i in range(r):
                starts.append(pos)
                kinds.append(0)
                lens.append(lb)
                pos += lb
                s = int(vec[i])
                if s:
                    starts.append(pos)
                    kinds.append(1)
                    lens.append(s)
                    pos += s
            lay = (starts, kinds, lens)
            self._layouts[g] = lay
        return lay

    def _segments(self, d: int, t0: int, t1: int) -> List[tuple]:
        """Granularity-d tiling of [t0, t1): ('b', start) blocks, ('g', start, len) gaps."""
        out: List[tuple] = []
        if t0 >= t1:
            return out
        g = d
        while self.lengths[g - 1] < t1:
            g += 1
        self._walk(g, d, 0, t0, t1, out)
        return out

    def _walk(self, g, d, base, lo, hi, out):
        if g == d:
            out.append(("b", base))
            return
        starts, kinds, lens = self._layout(g)
        rel_lo, rel_hi = lo - base, hi - base
        i = bisect_right(starts, rel_lo) - 1
        if i < 0:
            i = 0
        while i < len(starts) and starts[i] < rel_hi:
            s0 = starts[i]
            if s0 + lens[i] > rel_lo:
                if kinds[i]:
                    out.append(("g", base + s0, lens[i]))
                else:
                    self._walk(
                        g - 1,
                        d,
                        base + s0,
                        max(lo, base + s0),
                        min(hi, base + s0 + lens[i]),
                        out,
                    )
            i += 1

    # -- word access -------------------------------------------------------

    def access(self, x: int) -> int:
        """Symbol at position x of the depth-J word."""
        prefix = self.prefix
        lengths = self.lengths
        lb = lengths[self.j0 - 1]
        if x >= len(prefix):
            g = bisect_right(lengths, x) + 1  # smallest stage with length > x
            while True:
                if x < len(prefix):
                    break
                if x < lb:
                    return int(x)  # base word lists its levels in order
                starts, kinds, _lens = self._layout(g)
                i = bisect_right(starts, x) - 1
                if kinds[i]:
                    return self.star
                x -= starts[i]
                g -= 1
        return int(prefix[x])

    def _hist(self, lo: int, hi: int) -> np.ndarray:
        """Histogram of W[lo:hi) (small windows; spacer-run sized)."""
        h = np.zeros(self.S, dtype=np.int64)
        if hi <= len(self.prefix):
            h += np.bincount(self.prefix[lo:hi], minlength=self.S)
            return h
        for x in range(lo, hi):
            h[self.access(x)] += 1
        return h

    def _word_counts(self, j: int) -> np.ndarray:
        """Occurrences of each symbol in W_j (analytic)."""
        wc = self._wcounts.get(j)
        if wc is None:
            copies = 1
            for k in range(self.j0, j):
                copies *= self.realized.stage(k)[0]
            wc = np.full(self.S, copies, dtype=np.int64)
            l0 = self.lengths[self.j0 - 1]
            wc[self.star] = self.lengths[j - 1] - l0 * copies
            self._wcounts[j] = wc
        return wc

    def _prefix_hist(self, x: int) -> np.ndarray:
        """Histogram of W[0:x)."""
        h = np.zeros(self.S, dtype=np.int64)
        lb = self.lengths[self.j0 - 1]
        while x > 0:
            if x <= len(self.prefix):
                h += np.bincount(self.prefix[:x], minlength=self.S)
                return h
            if x <= lb:
                h[:x] += 1  # base word prefix hits each low level once
                return h
            g = bisect_right(self.lengths, x - 1) + 1  # smallest stage with length >= x
            if self.lengths[g - 1] == x:
                h += self._word_counts(g)
                return h
            starts, kinds, lens = self._layout(g)
            i = 0
            while i < len(starts) and starts[i] < x:
                if starts[i] + lens[i] <= x:
                    if kinds[i]:
                        h[self.star] += lens[i]
                    else:
                        h += self._word_counts(g - 1)
                    i += 1
                else:
                    if kinds[i]:
                        h[self.star] += x - starts[i]
                        return h
                    x -= starts[i]  # descend into the straddling block
                    break
            else:
                return h
        return h

    # -- the recursion -----------------------------------------------------

    def _phi(self, m: int, c: int) -> np.ndarray:
        """Counts of pairs (W[u], W[u+m]) for u in [0, c); m >= 1."""
        S = self.S
        if c <= 0:
            return np.zeros((S, S), dtype=np.int64)
        key = (m, c)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        if c + m <= len(self.prefix):
            a = self.prefix[:c].astype(np.int64)
            b = self.prefix[m : m + c].astype(np.int64)
            tab = np.bincount(a * S + b, minlength=S * S).reshape(S, S)
        elif c <= self.enum_cutoff or c < self.lengths[self.j0 - 1]:
            tab = np.zeros((S, S), dtype=np.int64)
            for u in range(c):
                tab[self.access(u), self.access(u + m)] += 1
        else:
            tab = np.zeros((S, S), dtype=np.int64)
            d = bisect_right(self.lengths, c)  # largest stage with length <= c
            ld = self.lengths[d - 1]
            for seg in self._segments(d, 0, c):
                if seg[0] == "g":
                    lo, hi = seg[1], min(seg[1] + seg[2], c)
                    if lo < hi:
                        tab[self.star, :] += self._hist(lo + m, hi + m)
                else:
                    A = seg[1]
                    span = min(c - A, ld)
                    self._add_block(tab, A, m, span, d, ld)
        self._memo[key] = tab
        return tab

    def _add_block(self, tab, A, m, span, d, ld):
        """Pairs with source in W_d-copy at A, offsets [0, span)."""
        star = self.star
        for seg in self._segments(d, A + m, A + m + span):
            if seg[0] == "g":
                v0 = max(seg[1] - A - m, 0)
                v1 = min(seg[1] + seg[2] - A - m, span)
                if v0 < v1:
                    tab[:, star] += self._hist(v0, v1)
            else:
                mp = m + A - seg[1]
                if mp == 0:
                    h = (
                        self._word_counts(d)
                        if span == ld
                        else self._prefix_hist(span)
                    )
                    tab[np.arange(self.S), np.arange(self.S)] += h
                elif mp > 0:
                    tab += self._phi(mp, min(span, ld - mp))
                else:
                    sub = self._phi(-mp, span + mp)  # span-(-mp), sources shifted
                    tab += sub.T

    # -- public ------------------------------------------------------------

    def counts(self, n: int) -> np.ndarray:
        """Exact C(n); negative lags via the transpose identity."""
        if n == 0:
            return np.diag(self._word_counts(self.J))
        if abs(n) >= self.lJ:
            raise LagOutOfRange(f"|lag| {n} >= word length {self.lJ}")
        if n > 0:
            return self._phi(n, self.lJ - n).copy()
        return self._phi(-n, self.lJ + n).T.copy()


def lag_counts_block(
    realized: RealizedSchedule,
    J: int,
    j0: int,
    lags: Iterable[int],
    **cutoffs,
) -> Dict[int, np.ndarray]:
    """Hierarchical pair counts for a set of lags (shared recursion cache)."""
    pc = PairCounter(realized, J, j0, **cutoffs)
    return {int(n): pc.counts(int(n)) for n in dict.fromkeys(lags)}


# ---------------------------------------------------------------------------
# normalized matrices

@dataclass(frozen=True)
class CorrMatrix:
    """D(n) = C(n)/l_J plus its boundary error bound |n|/l_J."""

    lag: int
    matrix: np.ndarray
    boundary_error: float
    word_length: int


def corr_matrix(
    realized: RealizedSchedule,
    J: int,
    j0: int,
    n: int,
    engine: str = "auto",
    counter: Optional[PairCounter] = None,
) -> CorrMatrix:
    """Normalized correlation matrix at one lag.

    Any |n| < l_J is accepted; boundary_error = |n|/l_J tells the caller how
    much of the window was lost to truncation.  Experiment configs apply the
    stricter l_J/LAG_CAP_DIVISOR cap before ever reaching this function.
    """
    lJ = int(heights(realized, J)[J - 1])
    if abs(n) >= lJ:
        raise LagOutOfRange(f"|lag| {n} >= word length {lJ}")
    if counter is not None:
        c = counter.counts(n)
    elif engine == "naive" or (engine == "auto" and lJ <= 1 << 22):
        c = lag_counts_naive(realized, J, j0, [n])[n]
    else:
        c = lag_counts_block(realized, J, j0, [n])[n]
    return CorrMatrix(
        lag=n,
        matrix=c.astype(np.float64) / lJ,
        boundary_error=abs(n) / lJ,
        word_length=lJ,
    )


class CorrSequence:
    """Correlation matrices for a family of lags, queried by lag."""

    def __init__(self, word_length: int):
        self.word_length = word_length
        self._by_lag: Dict[int, CorrMatrix] = {}

    def add(self, cm: CorrMatrix) -> None:
        self._by_lag[cm.lag] = cm

    @property
    def lags(self) -> List[int]:
        return list(self._by_lag)

    def matrix(self, lag: int) -> CorrMatrix:
        try:
            return self._by_lag[lag]
        except KeyError:
            raise MissingLag(f"lag {lag} was not computed") from None

    def __contains__(self, lag: int) -> bool:
        return lag in self._by_lag

    def __iter__(self):
        return iter(self._by_lag.values())


def corr_sequence(
    realized: RealizedSchedule,
    J: int,
    j0: int,
    lags: Sequence[int],
    engine: str = "auto",
) -> CorrSequence:
    """Correlation matrices for each distinct lag, order-preserving.

    auto picks one streaming pass when the word is small enough to scan
    quickly, otherwise the hierarchical counter with a shared cache.
    """
    lag_list = list(dict.fromkeys(int(n) for n in lags))
    lJ = int(heights(realized, J)[J - 1])
    for n in lag_list:
        if abs(n) >= lJ:
            raise LagOutOfRange(f"|lag| {n} >= word length {lJ}")
    seq = CorrSequence(lJ)
    if engine == "naive" or (engine == "auto" and lJ <= 1 << 22):
        tables = lag_counts_naive(realized, J, j0, lag_list)
        for n in lag_list:
            seq.add(
                CorrMatrix(
                    lag=n,
                    matrix=tables[n].astype(np.float64) / lJ,
                    boundary_error=abs(n) / lJ,
                    word_length=lJ,
                )
            )
    else:
        pc = PairCounter(realized, J, j0)
        for n in lag_list:
            seq.add(corr_matrix(realized, J, j0, n, counter=pc))
    return seq
