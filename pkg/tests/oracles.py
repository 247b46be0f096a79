"""Reference computations written straight from the definitions.

Deliberately slow and free of any import from the package under test.
"""

import math


def brute_visible(p, j, wv):
    """Indices i in [max(0, j-wv), j-1] whose segment to j clears every p_k, nearest first."""
    out = []
    for i in range(j - 1, max(0, j - wv) - 1, -1):
        if all(p[k] < p[j] + (p[i] - p[j]) / (i - j) * (k - j) for k in range(i + 1, j)):
            out.append(i)
    return out


def brute_components(p, t, ws, wv):
    """(S+, S-, N+, N-) by enumerating every (j, i, k) triple."""
    s_plus = s_minus = 0.0
    n_plus = n_minus = 0
    for j in range(t - ws + 1, t + 1):
        for i in brute_visible(p, j, wv)[:ws]:
            if i < 1:
                continue
            d = p[i] - p[i - 1]
            if d > 0:
                s_plus += d
                n_plus += 1
            elif d < 0:
                s_minus -= d
                n_minus += 1
    return s_plus, s_minus, n_plus, n_minus


def brute_value(p, t, ws, wv, variant):
    """Indicator value with the degenerate-denominator rules spelled out; None if undefined."""
    sp, sm, np_, nm = brute_components(p, t, ws, wv)

    def ratio(a, b):
        if b > 0:
            return a / b
        return math.inf if a > 0 else None

    rs, rn = ratio(sp, sm), ratio(np_, nm)
    if rs is None or rn is None:
        return None
    if variant == "A0":
        ra = 0.5 * (rs + rn)
    else:
        if math.isinf(rs) and math.isinf(rn):
            return None
        if rn == 0:
            return None
        ra = 0.0 if math.isinf(rn) else rs / rn
    if math.isinf(ra):
        return 100.0
    return 100.0 - 100.0 / (1.0 + ra)
