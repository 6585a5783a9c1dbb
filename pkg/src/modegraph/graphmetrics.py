"""Topological property suite for undirected graphs.

Connectivity, exact BFS distance statistics, local clustering, and the
three standard centralities (betweenness, closeness, eigenvector), with
aggregation into a single serializable report per graph.

Distance statistics are computed on the largest connected component;
betweenness keeps the full-graph normalization 2/((n-1)(n-2)) and
closeness uses the Wasserman-Faust component-size correction, so all
three remain meaningful on fragmented graphs.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import shortest_path

from .ts2graph import Graph

__all__ = [
    "TopologyReport",
    "components",
    "distance_stats",
    "clustering_stats",
    "betweenness",
    "closeness",
    "eigenvector_centrality",
    "topology_report",
]


# -- adjacency in CSR form ------------------------------------------------


def _csr(g: Graph):
    """Return (indptr, indices) with neighbor lists sorted per node."""
    deg = g.degrees()
    indptr = np.zeros(g.n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    if g.m == 0:
        return indptr, np.empty(0, dtype=np.int64)
    src = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    dst = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    order = np.lexsort((dst, src))
    return indptr, dst[order]


def _gather(indptr, indices, nodes):
    """All (source, neighbor) pairs for the given nodes, vectorized."""
    starts = indptr[nodes]
    counts = indptr[nodes + 1] - starts
    total = int(counts.sum())
    if total == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    src = np.repeat(nodes, counts)
    cum = np.cumsum(counts)
    within = np.arange(total) - np.repeat(cum - counts, counts)
    return src, indices[np.repeat(starts, counts) + within]


def _adjacency_matrix(g: Graph):
    data = np.ones(2 * g.m)
    src = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    dst = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    return sparse.csr_matrix((data, (src, dst)), shape=(g.n, g.n))


def _unit_distances(mat, sources):
    """Unit-weight shortest-path rows for the given source nodes."""
    return shortest_path(
        mat, method="D", directed=False, unweighted=True, indices=sources
    )


# -- operations ------------------------------------------------------------


def components(g: Graph):
    """Connected components of a graph.

    Parameters
    ----------
    g : Graph
        Undirected simple graph.

    Returns
    -------
    count : int
        Number of connected components.
    labels : ndarray of int
        Component label per node, in [0, count); labels are assigned in
        order of first appearance by node index.
    """
    indptr, indices = _csr(g)
    labels = np.full(g.n, -1, dtype=np.int64)
    count = 0
    for start in range(g.n):
        if labels[start] != -1:
            continue
        frontier = np.array([start], dtype=np.int64)
        labels[start] = count
        while frontier.size:
            _, nbr = _gather(indptr, indices, frontier)
            frontier = np.unique(nbr[labels[nbr] == -1])
            labels[frontier] = count
        count += 1
    return count, labels


def _largest_component(g: Graph):
    count, labels = components(g)
    sizes = np.bincount(labels, minlength=count)
    return np.flatnonzero(labels == int(np.argmax(sizes)))


def distance_stats(g: Graph):
    """Exact BFS distance statistics on the largest component.

    Parameters
    ----------
    g : Graph
        Undirected simple graph.

    Returns
    -------
    diameter : int
        Maximum eccentricity over the largest component; 0 when that
        component is a single node.
    avg_eccentricity : float
        Mean eccentricity over the largest component's nodes.
    eccentricities : ndarray of int
        Per-node eccentricity; nodes outside the largest component get -1.
    """
    member = _largest_component(g)
    ecc = np.full(g.n, -1, dtype=np.int64)
    if member.size <= 1:
        ecc[member] = 0
        return 0, 0.0, ecc
    dist = _unit_distances(_adjacency_matrix(g), member)
    inside = dist[:, member].max(axis=1).astype(np.int64)
    ecc[member] = inside
    return int(inside.max()), float(inside.mean()), ecc


def clustering_stats(g: Graph):
    """Local clustering coefficients, aggregated over all nodes.

    C_v = 2 T_v / (k_v (k_v - 1)) with C_v = 0 for degree < 2, where T_v
    counts triangles through v.

    Parameters
    ----------
    g : Graph
        Undirected simple graph.

    Returns
    -------
    mean, median, std : float
        Aggregates over every node of the graph (population std).
    coefficients : ndarray of float
        Per-node local clustering coefficient.
    """
    n = g.n
    deg = g.degrees().astype(float)
    tri = np.zeros(n)
    if g.m > 0:
        if n <= 5000 and g.m / n > 32:
            # dense graphs: diag(A^3)/2 via one BLAS product; entries are
            # integer counts < 2**24 so float32 arithmetic is exact
            a = np.zeros((n, n), dtype=np.float32)
            a[g.edges[:, 0], g.edges[:, 1]] = 1.0
            a[g.edges[:, 1], g.edges[:, 0]] = 1.0
            tri = ((a @ a) * a).sum(axis=1).astype(float) / 2.0
        else:
            adj = g.neighbors()
            per_edge = np.array(
                [
                    np.intersect1d(adj[i], adj[j], assume_unique=True).size
                    for i, j in g.edges
                ],
                dtype=float,
            )
            np.add.at(tri, g.edges[:, 0], per_edge)
            np.add.at(tri, g.edges[:, 1], per_edge)
            tri /= 2.0
    coeff = np.zeros(n)
    eligible = deg >= 2
    denom = deg * (deg - 1.0)
    coeff[eligible] = 2.0 * tri[eligible] / denom[eligible]
    return (
        float(coeff.mean()),
        float(np.median(coeff)),
        float(coeff.std()),
        coeff,
    )


def betweenness(g: Graph, sample=None, seed=0):
    """Shortest-path betweenness centrality, normalized.

    Brandes accumulation over all-pairs shortest paths, normalized by
    2/((n-1)(n-2)) with n the full node count even on disconnected graphs.

    Parameters
    ----------
    g : Graph
        Undirected simple graph.
    sample : int, optional
        If given, estimate from this many uniformly sampled source nodes
        (without replacement) instead of all n; contributions are scaled
        by n/sample. Exact computation is the default.
    seed : int
        Seed for the source sampler. Ignored for exact computation.

    Returns
    -------
    ndarray of float
        Per-node betweenness in [0, 1].
    """
    n = g.n
    bc = np.zeros(n)
    if n < 3 or g.m == 0:
        return bc
    indptr, indices = _csr(g)
    if sample is not None and sample < n:
        if sample < 1:
            raise ValueError("sample must be at least 1")
        sources = np.sort(np.random.default_rng(seed).choice(n, sample, False))
        scale = n / sample
    else:
        sources = np.arange(n)
        scale = 1.0
    for s in sources:
        dist = np.full(n, -1, dtype=np.int64)
        sigma = np.zeros(n)
        dist[s] = 0
        sigma[s] = 1.0
        frontier = np.array([s], dtype=np.int64)
        levels = [frontier]
        d = 0
        while frontier.size:
            src, nbr = _gather(indptr, indices, frontier)
            fresh = np.unique(nbr[dist[nbr] == -1])
            d += 1
            dist[fresh] = d
            into = dist[nbr] == d
            np.add.at(sigma, nbr[into], sigma[src[into]])
            frontier = fresh
            levels.append(frontier)
        delta = np.zeros(n)
        for level in reversed(levels[1:]):
            src, nbr = _gather(indptr, indices, level)
            back = dist[nbr] == dist[src] - 1
            w, p = src[back], nbr[back]
            np.add.at(delta, p, sigma[p] / sigma[w] * (1.0 + delta[w]))
        delta[s] = 0.0
        bc += delta
    # per-source passes visit each ordered pair once, so the raw tally is
    # twice the pair count; fold the 1/2 into the normalization
    return bc * (scale / ((n - 1.0) * (n - 2.0)))


def closeness(g: Graph):
    """Closeness centrality with the Wasserman-Faust size correction.

    c_v = ((r-1)/(n-1)) * ((r-1)/sum of distances) with r the size of
    v's component; isolated nodes get 0.

    Parameters
    ----------
    g : Graph
        Undirected simple graph.

    Returns
    -------
    ndarray of float
        Per-node closeness in [0, 1].
    """
    n = g.n
    cl = np.zeros(n)
    if n < 2 or g.m == 0:
        return cl
    mat = _adjacency_matrix(g)
    for start in range(0, n, 1024):  # chunked to bound the n x n matrix
        idx = np.arange(start, min(start + 1024, n))
        dist = _unit_distances(mat, idx)
        finite = np.isfinite(dist)
        r = finite.sum(axis=1).astype(float)  # includes the source itself
        total = np.where(finite, dist, 0.0).sum(axis=1)
        ok = (r > 1.0) & (total > 0.0)
        cl[idx[ok]] = (r[ok] - 1.0) / (n - 1.0) * ((r[ok] - 1.0) / total[ok])
    return cl


def eigenvector_centrality(g: Graph, max_iter=1000, tol=1e-8):
    """Eigenvector centrality by damped power iteration.

    Each step mixes x <- 0.5 x + 0.5 A x / ||A x|| and renormalizes to
    unit L2 norm; the damping step suppresses the period-2 oscillation of
    plain power iteration on bipartite graphs. On disconnected graphs the
    iteration converges toward the dominant component's eigenvector.

    Parameters
    ----------
    g : Graph
        Undirected simple graph with at least one edge.
    max_iter : int
        Iteration cap (default 1000).
    tol : float
        Convergence threshold on the max absolute change between
        successive iterates (default 1e-8).

    Returns
    -------
    values : ndarray of float
        Per-node centrality, unit L2 norm, entries in [0, 1].
    converged : bool
        False when max_iter was exhausted before the tolerance was met.
    """
    if g.m < 1:
        raise ValueError("eigenvector centrality needs at least one edge")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = g.n
    src = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    dst = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(max_iter):
        ax = np.bincount(src, weights=x[dst], minlength=n)
        norm = float(np.linalg.norm(ax))
        if norm == 0.0:
            break
        y = 0.5 * x + 0.5 * ax / norm
        y /= np.linalg.norm(y)
        change = float(np.abs(y - x).max())
        x = y
        if change < tol:
            return x, True
    return x, False


@dataclass(frozen=True)
class TopologyReport:
    """Structural property summary of one graph."""

    n: int
    m: int
    density: float
    avg_degree: float
    components: int
    largest_component_size: int
    diameter: int
    avg_eccentricity: float
    clustering: tuple  # (mean, median, std)
    betweenness: tuple  # (mean, max)
    closeness: tuple  # (mean, max)
    eigenvector: tuple  # (mean, max)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "density": self.density,
            "avg_degree": self.avg_degree,
            "components": self.components,
            "largest_component_size": self.largest_component_size,
            "diameter": self.diameter,
            "avg_eccentricity": self.avg_eccentricity,
            "clustering": list(self.clustering),
            "betweenness": list(self.betweenness),
            "closeness": list(self.closeness),
            "eigenvector": list(self.eigenvector),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        """One header row plus one value row, for concatenation."""
        scalars = [
            ("n", self.n),
            ("m", self.m),
            ("density", self.density),
            ("avg_degree", self.avg_degree),
            ("components", self.components),
            ("largest_component_size", self.largest_component_size),
            ("diameter", self.diameter),
            ("avg_eccentricity", self.avg_eccentricity),
            ("clustering_mean", self.clustering[0]),
            ("clustering_median", self.clustering[1]),
            ("clustering_std", self.clustering[2]),
            ("betweenness_mean", self.betweenness[0]),
            ("betweenness_max", self.betweenness[1]),
            ("closeness_mean", self.closeness[0]),
            ("closeness_max", self.closeness[1]),
            ("eigenvector_mean", self.eigenvector[0]),
            ("eigenvector_max", self.eigenvector[1]),
        ]
        header = ",".join(name for name, _ in scalars)
        row = ",".join(
            "%d" % value if isinstance(value, int) else repr(float(value))
            for _, value in scalars
        )
        return header + "\n" + row + "\n"


def topology_report(g: Graph, betweenness_sample=None, seed=0) -> TopologyReport:
    """Compute the full structural summary of a graph.

    Parameters
    ----------
    g : Graph
        Undirected simple graph with at least one node.
    betweenness_sample : int, optional
        Source-sampling size forwarded to `betweenness`; exact by default.
    seed : int
        Sampler seed, ignored for exact computation.

    Returns
    -------
    TopologyReport
        Every field filled; deterministic for a given graph.
    """
    if g.n < 1:
        raise ValueError("graph must have at least one node")
    n, m = g.n, g.m
    count, labels = components(g)
    largest = int(np.bincount(labels, minlength=count).max())
    diameter, avg_ecc, _ = distance_stats(g)
    c_mean, c_median, c_std, _ = clustering_stats(g)
    bc = betweenness(g, sample=betweenness_sample, seed=seed)
    cl = closeness(g)
    if m > 0:
        ev, _ = eigenvector_centrality(g)
    else:
        ev = np.zeros(n)  # edgeless graphs have no dominant eigenpair
    return TopologyReport(
        n=n,
        m=m,
        density=2.0 * m / (n * (n - 1.0)) if n >= 2 else 0.0,
        avg_degree=2.0 * m / n,
        components=count,
        largest_component_size=largest,
        diameter=diameter,
        avg_eccentricity=avg_ecc,
        clustering=(c_mean, c_median, c_std),
        betweenness=(float(bc.mean()), float(bc.max())),
        closeness=(float(cl.mean()), float(cl.max())),
        eigenvector=(float(ev.mean()), float(ev.max())),
    )
