"""Independent reference implementations used as test oracles.

These deliberately avoid the library's own code paths: plain-int loops
instead of numpy, Fraction arithmetic instead of scaled integer sums,
subset enumeration instead of greedy grouping.
"""

import math
from fractions import Fraction
from itertools import combinations

from lockstepsim.replica import RELU


def infer_reference(weights, input_tensor):
    """Arbitrary-precision integer evaluation of the network, mirroring the
    stated arithmetic rules with plain Python loops."""
    x = list(input_tensor.data)
    for layer in weights.layers:
        out_w, in_w = layer.out_width, layer.in_width
        w = layer.weights.data
        b = layer.bias.data
        y = []
        for j in range(out_w):
            acc = sum(w[j * in_w + i] * x[i] for i in range(in_w)) + (b[j] << 8)
            q, r = divmod(acc, 256)
            if r > 128 or (r == 128 and (q & 1)):
                q += 1
            q = max(-32768, min(32767, q))
            if layer.activation == RELU and q < 0:
                q = 0
            y.append(q)
        x = y
    return x


def stats_reference(samples):
    """Exact-rational moment statistics; floats only at the very end."""
    n = len(samples)
    mean = Fraction(sum(samples), n)
    devs = [Fraction(x) - mean for x in samples]
    m2 = sum(d * d for d in devs) / n
    m3 = sum(d**3 for d in devs) / n
    m4 = sum(d**4 for d in devs) / n
    out = {
        "n": n,
        "mean": float(mean),
        "sample_std": math.sqrt(float(sum(d * d for d in devs) / (n - 1))) if n > 1 else 0.0,
        "min": min(samples),
        "max": max(samples),
        "p50": _nearest_rank_ref(samples, Fraction(1, 2)),
        "p95": _nearest_rank_ref(samples, Fraction(19, 20)),
        "p99": _nearest_rank_ref(samples, Fraction(99, 100)),
        "skewness": None,
        "excess_kurtosis": None,
        "bimodality": None,
    }
    if n >= 4 and m2 > 0:
        g1 = float(m3) / float(m2) ** 1.5
        g2 = float(m4) / float(m2) ** 2 - 3.0
        corr = Fraction(3 * (n - 1) ** 2, (n - 2) * (n - 3))
        out["skewness"] = g1
        out["excess_kurtosis"] = g2
        out["bimodality"] = (g1 * g1 + 1.0) / (g2 + float(corr))
    return out


def _nearest_rank_ref(samples, p: Fraction):
    xs = sorted(samples)
    rank = math.ceil(p * len(xs))
    return xs[max(rank, 1) - 1]


def ks_reference(a, b):
    """Supremum ECDF gap by brute force over every observed value."""
    na, nb = len(a), len(b)
    best = Fraction(0)
    for v in sorted(set(a) | set(b)):
        fa = Fraction(sum(1 for x in a if x <= v), na)
        fb = Fraction(sum(1 for x in b if x <= v), nb)
        gap = abs(fa - fb)
        if gap > best:
            best = gap
    return float(best)


def required_agreement_ref(m, n):
    return m if n == 1 else max(m, 2)


def vote_oracle_exact(labels, m, n):
    """Brute-force verdict over labelled outputs (exact agreement).

    Enumerates every subset, keeps the mutually-agreeing ones, picks the
    largest (ties by lowest contained replica id). Returns
    ('pass', agreeing_ids) or ('mismatch', frozenset of id-groups).
    """
    ids = list(range(len(labels)))
    best = None
    for size in range(len(ids), 0, -1):
        candidates = []
        for subset in combinations(ids, size):
            if all(labels[i] == labels[j] for i in subset for j in subset):
                candidates.append(subset)
        if candidates:
            best = min(candidates, key=lambda s: min(s))
            break
    required = required_agreement_ref(m, n)
    if best is not None and len(best) >= required:
        return ("pass", tuple(best))
    groups = {}
    for i in ids:
        groups.setdefault(labels[i], []).append(i)
    return ("mismatch", frozenset(tuple(g) for g in groups.values()))


def tolerance_cliques(values, raw_eps):
    """All maximal within-eps cliques, for documenting the gap between the
    greedy pivot rule and the clique view of non-transitive agreement."""
    ids = list(range(len(values)))
    cliques = []
    for size in range(len(ids), 0, -1):
        for subset in combinations(ids, size):
            if all(abs(values[i] - values[j]) <= raw_eps for i in subset for j in subset):
                if not any(set(subset) <= set(c) for c in cliques):
                    cliques.append(subset)
    return cliques
