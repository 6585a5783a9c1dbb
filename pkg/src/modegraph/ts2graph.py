"""Transform a real-valued sequence into natural-visibility, horizontal-
visibility, and recurrence graphs, including embedding-parameter estimation.

Visibility criteria (strict inequalities; an intermediate sample exactly on
the sight line blocks visibility):

    natural      y_k < y_i + (y_j - y_i) * (k - i) / (j - i)   for all i < k < j
    horizontal   y_k < min(y_i, y_j)                           for all i < k < j

Recurrence graphs join delay-embedded states within Euclidean distance
epsilon, with epsilon derived from a percentile of the pairwise-distance
distribution unless supplied.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

__all__ = [
    "Graph",
    "EmbeddingParams",
    "FnnResult",
    "nvg",
    "hvg",
    "ami",
    "select_delay",
    "fnn",
    "delay_embed",
    "recurrence_graph",
]

# Kennel false-nearest-neighbor tolerances
RTOL = 15.0
ATOL = 2.0


def _as_float_array(s) -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a one-dimensional sequence")
    return arr


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with per-node features.

    Edges are stored as a lexicographically sorted (m, 2) integer array with
    i < j on every row; construction normalizes pair order and removes
    duplicates, and rejects self-loops and out-of-range endpoints.
    """

    n: int
    edges: np.ndarray
    node_features: np.ndarray
    kind: str
    provenance: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("nvg", "hvg", "recurrence"):
            raise ValueError("unknown graph kind %r" % self.kind)
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range [0, %d)" % self.n)
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)  # sorts lexicographically as a side effect
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)
        f = np.asarray(self.node_features, dtype=float)
        if f.size != self.n:
            raise ValueError("node_features length %d != n %d" % (f.size, self.n))
        f.setflags(write=False)
        object.__setattr__(self, "node_features", f)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def edge_set(self) -> set:
        return {(int(i), int(j)) for i, j in self.edges}

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n).astype(np.int64)

    def neighbors(self) -> list:
        """Adjacency lists as sorted int arrays, index by node."""
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[int(i)].append(int(j))
            adj[int(j)].append(int(i))
        return [np.array(sorted(a), dtype=np.int64) for a in adj]

    # -- exports --------------------------------------------------------

    def edges_csv(self) -> str:
        lines = ["src,dst"]
        lines.extend("%d,%d" % (i, j) for i, j in self.edges)
        return "\n".join(lines) + "\n"

    def features_csv(self) -> str:
        lines = ["node,feature"]
        lines.extend("%d,%s" % (i, repr(float(x))) for i, x in enumerate(self.node_features))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "params": self.params,
            "n": self.n,
            "edges": [[int(i), int(j)] for i, j in self.edges],
            "features": [float(x) for x in self.node_features],
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        doc = json.loads(text)
        return cls(
            n=int(doc["n"]),
            edges=np.asarray(doc["edges"], dtype=np.int64).reshape(-1, 2),
            node_features=np.asarray(doc["features"], dtype=float),
            kind=doc["kind"],
            provenance=doc.get("provenance", ""),
            params=doc.get("params", {}),
        )


@dataclass(frozen=True)
class EmbeddingParams:
    """Delay-embedding parameters governing recurrence-graph construction."""

    tau: int
    dim: int
    epsilon: float
    percentile: float = 10.0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be a positive integer")
        if self.dim < 2:
            raise ValueError("dim must be an integer >= 2")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.percentile <= 100:
            raise ValueError("percentile must lie in (0, 100]")


# ----------------------------------------------------------------------
# Visibility graphs
# ----------------------------------------------------------------------


def nvg(s, provenance: str = "") -> Graph:
    """Natural visibility graph via divide and conquer on the maximum.

    Within a segment no visible pair straddles the segment maximum (the sight
    line at any interior index is at most the larger endpoint value, which the
    maximum matches or exceeds), so connecting the maximum to everything it
    sees and recursing on the two open sub-segments enumerates every edge
    exactly once. Expected O(n log n) on noisy data, O(n^2) worst case.
    """
    y = _as_float_array(s)
    n = y.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    if not np.all(np.isfinite(y)):
        raise ValueError("values must be finite")
    chunks = []
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi <= lo:
            continue
        m = lo + int(np.argmax(y[lo : hi + 1]))
        if m + 1 <= hi:
            # j is visible from m iff its slope beats every intermediate slope
            offs = np.arange(1, hi - m + 1)
            slopes = (y[m + 1 : hi + 1] - y[m]) / offs
            run = np.maximum.accumulate(slopes)
            vis = np.empty(slopes.size, dtype=bool)
            vis[0] = True
            vis[1:] = slopes[1:] > run[:-1]
            js = m + offs[vis]
            chunks.append(np.column_stack([np.full(js.size, m), js]))
            stack.append((m + 1, hi))
        if lo <= m - 1:
            offs = np.arange(1, m - lo + 1)
            slopes = (y[m - 1 :: -1][: m - lo] - y[m]) / offs
            run = np.maximum.accumulate(slopes)
            vis = np.empty(slopes.size, dtype=bool)
            vis[0] = True
            vis[1:] = slopes[1:] > run[:-1]
            js = m - offs[vis]
            chunks.append(np.column_stack([js, np.full(js.size, m)]))
            stack.append((lo, m - 1))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return Graph(n=n, edges=edges, node_features=y, kind="nvg", provenance=provenance)


def hvg(s, provenance: str = "") -> Graph:
    """Horizontal visibility graph via a monotonic stack, O(n + m).

    The stack holds indices with strictly decreasing values. A new sample
    connects to every popped smaller value, and to the first value >= its
    own; an equal value is connected and popped (it can see nothing past an
    equal sample under the strict criterion), and the scan stops there.
    """
    y = _as_float_array(s)
    n = y.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    if not np.all(np.isfinite(y)):
        raise ValueError("values must be finite")
    edges = []
    stk = []
    for j in range(n):
        yj = y[j]
        while stk and y[stk[-1]] < yj:
            edges.append((stk.pop(), j))
        if stk:
            edges.append((stk[-1], j))
            if y[stk[-1]] == yj:
                stk.pop()
        stk.append(j)
    arr = np.asarray(edges, dtype=np.int64) if edges else np.empty((0, 2), dtype=np.int64)
    return Graph(n=n, edges=arr, node_features=y, kind="hvg", provenance=provenance)


# ----------------------------------------------------------------------
# Delay embedding
# ----------------------------------------------------------------------


def default_ami_lags(n: int) -> int:
    return min(100, n // 10)


def default_ami_bins(n: int) -> int:
    # coarse histograms keep the first-minimum location governed by the
    # actual dependence structure; fine ones resolve every distinct value
    # of short-cycle inputs and flatten the curve into estimator noise
    return min(10, math.ceil(math.sqrt(n / 5)))


def ami(s, max_lag: Optional[int] = None, bins: Optional[int] = None) -> np.ndarray:
    """Average mutual information (nats) against the lagged series.

    Parameters
    ----------
    s : sequence of float
    max_lag : int, optional
        Largest lag evaluated; defaults to min(100, n // 10).
    bins : int, optional
        Equal-width histogram bins per axis over the global value range;
        defaults to ceil(sqrt(n / 5)) capped at 10.

    Returns
    -------
    ndarray
        MI estimates for lags 1..max_lag (index L-1 holds lag L).
    """
    v = _as_float_array(s)
    n = v.size
    if max_lag is None:
        max_lag = default_ami_lags(n)
    if bins is None:
        bins = default_ami_bins(n)
    if max_lag < 1 or bins < 1:
        raise ValueError("max_lag and bins must be positive")
    if not n > max_lag + bins:
        raise ValueError("series too short: need n > max_lag + bins")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        raise ValueError("zero-variance input")
    grid = np.linspace(lo, hi, bins + 1)
    out = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        joint, _, _ = np.histogram2d(v[:-lag], v[lag:], bins=(grid, grid))
        total = joint.sum()
        p = joint / total
        px = p.sum(axis=1)
        py = p.sum(axis=0)
        denom = np.outer(px, py)
        mask = p > 0
        out[lag - 1] = float(np.sum(p[mask] * np.log(p[mask] / denom[mask])))
    return out


def select_delay(ami_curve) -> int:
    """First strict local minimum of an AMI curve, as a 1-based lag.

    A flat valley resolves to its first index; with no interior local
    minimum the (first) argmin is returned.
    """
    c = _as_float_array(ami_curve)
    if c.size == 0:
        raise ValueError("empty curve")
    for i in range(1, c.size):
        if c[i] > c[i - 1]:
            j = i - 1
            while j > 0 and c[j - 1] == c[j]:
                j -= 1
            if j > 0 and c[j - 1] > c[j]:
                return j + 1  # lags are 1-based
    return int(np.argmin(c)) + 1


class FnnResult(NamedTuple):
    dim: int
    saturated: bool
    fractions: Tuple[float, ...]

    def __int__(self) -> int:
        return self.dim


def fnn(s, tau: int, max_dim: int = 10, threshold: float = 0.1) -> FnnResult:
    """Minimal embedding dimension by the false-nearest-neighbor criterion.

    For each d the nearest neighbor of every point (self excluded) in the
    d-dimensional embedding is re-examined in d+1 dimensions; a neighbor is
    false when the extra-coordinate distance is large relative to the
    d-dimensional distance (ratio > 15) or to the attractor size (> 2 sample
    stds). Returns the smallest d whose false fraction drops below
    `threshold`; when none does, max_dim with ``saturated=True``.

    Neighbors closer than 1e-8 of the attractor size are revisits of the
    same state (commensurately sampled cycles produce them in bulk) and are
    skipped in the search; the distance ratio against such a point measures
    rounding noise, not geometry.
    """
    v = _as_float_array(s)
    if tau < 1:
        raise ValueError("tau must be positive")
    if max_dim < 1:
        raise ValueError("max_dim must be positive")
    attractor = float(v.std())
    if attractor == 0.0:
        raise ValueError("constant series: distances are degenerate")
    floor = 1e-8 * attractor
    fractions = []
    for d in range(1, max_dim + 1):
        n_keep = v.size - d * tau  # points that still exist in dimension d+1
        if n_keep < 2:
            break
        X = delay_embed(v, tau, d)[:n_keep]
        tree = cKDTree(X)
        dist, idx = tree.query(X, k=2)
        nn_dist = dist[:, 1].copy()
        nn_idx = idx[:, 1].copy()
        pending = nn_dist <= floor
        k = 2
        while np.any(pending):
            if k >= n_keep:
                nn_idx[pending] = -1  # every other point is a duplicate
                break
            k = min(2 * k, n_keep)
            d_more, i_more = tree.query(X[pending], k=k)
            beyond = d_more > floor
            found = beyond.any(axis=1)
            first = beyond.argmax(axis=1)
            rows = np.flatnonzero(pending)[found]
            nn_dist[rows] = d_more[found, first[found]]
            nn_idx[rows] = i_more[found, first[found]]
            pending[rows] = False
        valid = nn_idx >= 0
        tail = np.arange(n_keep) + d * tau
        extra = np.zeros(n_keep)
        extra[valid] = np.abs(v[tail[valid]] - v[nn_idx[valid] + d * tau])
        ratio = np.zeros(n_keep)
        ratio[valid] = extra[valid] / nn_dist[valid]
        false = valid & (
            (ratio > RTOL) | (np.hypot(nn_dist, extra) / attractor > ATOL)
        )
        frac = float(np.mean(false))
        fractions.append(frac)
        if frac < threshold:
            return FnnResult(dim=d, saturated=False, fractions=tuple(fractions))
    return FnnResult(dim=max_dim, saturated=True, fractions=tuple(fractions))


def delay_embed(s, tau: int, dim: int) -> np.ndarray:
    """Delay-coordinate embedding: row i is [s[i], s[i+tau], ..., s[i+(dim-1)tau]].

    Returns an (n_e, dim) array with n_e = n - (dim-1)*tau.
    """
    v = _as_float_array(s)
    if tau < 1 or dim < 1:
        raise ValueError("tau and dim must be positive")
    n_e = v.size - (dim - 1) * tau
    if n_e < 1:
        raise ValueError(
            "series of length %d too short for dim=%d, tau=%d" % (v.size, dim, tau)
        )
    window = (dim - 1) * tau + 1
    return np.lib.stride_tricks.sliding_window_view(v, window)[:, ::tau].copy()


def recurrence_graph(
    s,
    params: Optional[EmbeddingParams] = None,
    percentile: float = 10.0,
    theiler: int = 0,
    max_dim: int = 10,
    fnn_threshold: float = 0.1,
    provenance: str = "",
) -> Tuple[Graph, EmbeddingParams]:
    """Build a recurrence graph over delay-embedded states.

    When `params` is omitted, tau comes from the first AMI minimum, dim from
    the FNN criterion (floored at 2), and epsilon from `percentile` of the
    pairwise Euclidean distances (self-pairs excluded). Edges join states at
    distance <= epsilon, inclusive. `theiler` > 0 additionally excludes pairs
    with |i - j| <= theiler from both the percentile pool and the edge set.

    Returns the graph together with the resolved parameters (realized
    epsilon included). Node features are the first embedding component.
    """
    v = _as_float_array(s)
    if params is None:
        tau = select_delay(ami(v))
        est = fnn(v, tau, max_dim=max_dim, threshold=fnn_threshold)
        dim = max(2, est.dim)  # EmbeddingParams requires dim >= 2
        eps = None
        pct = float(percentile)
    else:
        tau, dim, eps, pct = params.tau, params.dim, params.epsilon, params.percentile
    X = delay_embed(v, tau, dim)
    n_e = X.shape[0]
    if n_e < dim + 1:
        raise ValueError("embedded point count %d < dim + 1 = %d" % (n_e, dim + 1))
    dists = pdist(X)
    ii, jj = np.triu_indices(n_e, k=1)
    if theiler > 0:
        keep = (jj - ii) > theiler
        dists, ii, jj = dists[keep], ii[keep], jj[keep]
        if dists.size == 0:
            raise ValueError("theiler window %d leaves no admissible pairs" % theiler)
    if float(dists.max(initial=0.0)) == 0.0:
        raise ValueError("constant series: all pairwise distances are zero")
    if eps is None:
        eps = float(np.percentile(dists, pct))
        if eps <= 0.0:
            raise ValueError(
                "percentile %g of the distance distribution is zero; "
                "raise the percentile or supply epsilon" % pct
            )
    mask = dists <= eps
    edges = np.column_stack([ii[mask], jj[mask]])
    resolved = EmbeddingParams(tau=int(tau), dim=int(dim), epsilon=float(eps), percentile=pct)
    graph = Graph(
        n=n_e,
        edges=edges,
        node_features=X[:, 0],
        kind="recurrence",
        provenance=provenance,
        params={
            "tau": resolved.tau,
            "dim": resolved.dim,
            "epsilon": resolved.epsilon,
            "percentile": resolved.percentile,
            "theiler": int(theiler),
        },
    )
    return graph, resolved
