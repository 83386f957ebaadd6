"""Minimum-weight perfect matching decoding on a matching graph.

Defect pairing costs are exact shortest-path distances (Dijkstra over
the graph including the merged boundary vertex); the pairing itself is
the exact blossom matching over defects plus per-defect boundary copies.
Predictions XOR the observable effects of the cheapest edges along the
chosen paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .blossom import min_weight_perfect_matching
from .circuit import CircuitError
from .graph import MatchingGraph


@dataclass
class MatchResult:
    pairs: list[tuple[int, int]]  # matched defect pairs (local detector ids)
    boundary_matched: list[int]
    observables: np.ndarray
    total_weight: float


def solve_mwpm(
    graph: MatchingGraph,
    defects,
    weights: np.ndarray | None = None,
) -> MatchResult:
    """Exact MWPM of ``defects`` (local detector indices) on ``graph``."""
    defects = sorted(set(int(d) for d in defects))
    nobs = max(1, len(graph.circuit.observables))
    if not defects:
        return MatchResult([], [], np.zeros(nobs, dtype=np.uint8), 0.0)
    adj = graph.adjacency(weights)
    idx = np.array(defects + [graph.boundary])
    dist, pred = dijkstra(adj, indices=idx, return_predecessors=True)
    D = len(defects)
    if not np.all(np.isfinite(dist[:D][:, idx[:D]])) and D > 1:
        pass  # disconnected pairs handled below via boundary fallback
    bdist = dist[:, graph.boundary]
    if not np.all(np.isfinite(bdist[:D])):
        raise CircuitError("defect disconnected from partners and boundary")

    # Derived complete graph: defects 0..D-1, shadows D..2D-1.
    n = 2 * D
    big = float(np.nanmax(dist[np.isfinite(dist)])) * 4 + 1
    W = np.zeros((n, n))
    for i in range(D):
        for j in range(i + 1, D):
            dij = dist[i, idx[j]]
            W[i, j] = W[j, i] = dij if np.isfinite(dij) else big * 2
        W[i, D + i] = W[D + i, i] = bdist[i]
        for j in range(D):
            if j != i:
                W[i, D + j] = W[D + j, i] = big * 4
    # shadow-shadow edges are free
    mate = min_weight_perfect_matching(W)

    obs = 0
    total = 0.0
    pairs = []
    boundary = []

    def path_obs(src_pos: int, target_vertex: int) -> int:
        acc = 0
        v = target_vertex
        pr = pred[src_pos]
        while pr[v] >= 0:
            u = pr[v]
            acc ^= graph.edges[graph.min_edge_id(u, v, weights)].observables
            v = u
        return acc

    for i in range(D):
        m = mate[i]
        if m >= D:
            boundary.append(defects[i])
            total += bdist[i]
            obs ^= path_obs(i, graph.boundary)
        elif m > i:
            pairs.append((defects[i], defects[m]))
            total += dist[i, idx[m]]
            obs ^= path_obs(i, idx[m])
    ob = np.array([(obs >> k) & 1 for k in range(nobs)], dtype=np.uint8)
    return MatchResult(pairs, boundary, ob, total)


def matching_via_ip(W: np.ndarray, boundary_costs: np.ndarray):
    """Exact matching-with-boundary via the integer-program engine.

    ``W[i, j]``: pairing costs; ``boundary_costs[i]``: match-to-boundary
    cost.  Returns (total cost, mate array with -1 for boundary).
    Independent oracle for :func:`solve_mwpm`.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    import scipy.sparse as sp

    D = len(boundary_costs)
    pairs = [(i, j) for i in range(D) for j in range(i + 1, D)]
    nv = len(pairs) + D
    c = np.array([W[i, j] for i, j in pairs] + list(boundary_costs))
    rows, cols = [], []
    for k, (i, j) in enumerate(pairs):
        rows += [i, j]
        cols += [k, k]
    for i in range(D):
        rows.append(i)
        cols.append(len(pairs) + i)
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(D, nv))
    res = milp(
        c=c,
        constraints=[LinearConstraint(A, np.ones(D), np.ones(D))],
        integrality=np.ones(nv),
        bounds=Bounds(np.zeros(nv), np.ones(nv)),
    )
    if res.status != 0:
        raise CircuitError(f"matching IP failed: status {res.status}")
    x = np.round(res.x).astype(int)
    mate = np.full(D, -1)
    for k, (i, j) in enumerate(pairs):
        if x[k]:
            mate[i] = j
            mate[j] = i
    return float(res.fun), mate
