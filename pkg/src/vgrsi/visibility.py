"""Backward visibility sets of a price series.

Point ``i < j`` is visible from ``j`` when every intermediate price lies
strictly below the segment joining ``(i, p_i)`` and ``(j, p_j)``. Candidates
are restricted to ``max(0, j - W_V) <= i <= j - 1``.

Two implementations are kept: :func:`visible_oracle` checks the inequality
for every intermediate point, :func:`visible_fast` scans slopes once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._validation import as_price_array, check_index, check_positive_int


@dataclass(frozen=True)
class VisibleSet:
    j: int
    visible: tuple[int, ...]
    capped: bool = False

    def __len__(self) -> int:
        return len(self.visible)

    def __contains__(self, i) -> bool:
        return i in self.visible


def visible_oracle(series, j: int, window_visibility: int) -> VisibleSet:
    """Uncapped visible set of ``j`` by direct evaluation of the inequality.

    O(W_V^2) per index; use it as a reference, not in loops.
    """
    p = as_price_array(series)
    j = check_index(j, len(p))
    wv = check_positive_int(window_visibility, "window_visibility")
    out = []
    for i in range(j - 1, max(0, j - wv) - 1, -1):
        ok = True
        for k in range(i + 1, j):
            if not p[k] < p[j] + (p[i] - p[j]) / (i - j) * (k - j):
                ok = False
                break
        if ok:
            out.append(i)
    return VisibleSet(j, tuple(out), capped=False)


def visible_fast(series, j: int, window_visibility: int, window_size: int) -> VisibleSet:
    """Nearest-first visible set of ``j``, truncated to ``window_size`` entries.

    Walks ``i`` backwards keeping the smallest slope seen so far; ``i`` is
    visible iff its slope to ``j`` is strictly below that minimum.
    """
    p = as_price_array(series)
    j = check_index(j, len(p))
    wv = check_positive_int(window_visibility, "window_visibility")
    ws = check_positive_int(window_size, "window_size")
    lo = max(0, j - wv)
    out = []
    m_min = np.inf
    pj = p[j]
    for i in range(j - 1, lo - 1, -1):
        m = (p[i] - pj) / (i - j)
        if m < m_min:
            m_min = m
            out.append(i)
            if len(out) == ws:
                return VisibleSet(j, tuple(out), capped=i > lo)
    return VisibleSet(j, tuple(out), capped=False)


def visible_sets(series, window_visibility: int, window_size: int | None = None) -> list[VisibleSet]:
    """Visible set of every index; ``window_size=None`` disables the cap."""
    p = as_price_array(series)
    cap = len(p) + 1 if window_size is None else window_size
    return [visible_fast(p, j, window_visibility, cap) for j in range(len(p))]


@njit(cache=True)
def _per_index_contributions(p, ws, wv):
    # Per source index j: sums/counts of increments over its capped visible set,
    # accumulated nearest-first exactly like the pure-Python path.
    n = p.shape[0]
    s_plus = np.zeros(n)
    s_minus = np.zeros(n)
    n_plus = np.zeros(n, dtype=np.int64)
    n_minus = np.zeros(n, dtype=np.int64)
    for j in range(1, n):
        lo = max(0, j - wv)
        pj = p[j]
        m_min = np.inf
        found = 0
        sp = 0.0
        sm = 0.0
        cp = 0
        cm = 0
        for i in range(j - 1, lo - 1, -1):
            m = (p[i] - pj) / (i - j)
            if m < m_min:
                m_min = m
                found += 1
                if i >= 1:
                    d = p[i] - p[i - 1]
                    if d > 0:
                        sp += d
                        cp += 1
                    elif d < 0:
                        sm += -d
                        cm += 1
                if found == ws:
                    break
        s_plus[j] = sp
        s_minus[j] = sm
        n_plus[j] = cp
        n_minus[j] = cm
    return s_plus, s_minus, n_plus, n_minus


@njit(cache=True)
def _window_totals(s_plus, s_minus, n_plus, n_minus, ws):
    # Totals over j in [t - ws + 1, t] for every t >= ws, summed in ascending j.
    n = s_plus.shape[0]
    tp = np.full(n, np.nan)
    tm = np.full(n, np.nan)
    cp = np.full(n, -1, dtype=np.int64)
    cm = np.full(n, -1, dtype=np.int64)
    for t in range(ws, n):
        a = 0.0
        b = 0.0
        c = 0
        d = 0
        for j in range(t - ws + 1, t + 1):
            a += s_plus[j]
            b += s_minus[j]
            c += n_plus[j]
            d += n_minus[j]
        tp[t] = a
        tm[t] = b
        cp[t] = c
        cm[t] = d
    return tp, tm, cp, cm
