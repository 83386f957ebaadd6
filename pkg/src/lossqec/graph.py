"""Decoding matching graph built from a Pauli detector error model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .circuit import Circuit, CircuitError
from .sim import PauliDEM


class HyperedgeError(CircuitError):
    """A mechanism flips more than two basis-relevant detectors."""


@dataclass(frozen=True)
class Edge:
    u: int  # local detector index
    v: int  # local detector index, or boundary (== num_detectors)
    weight: float
    probability: float
    observables: int  # bitmask over observable indices
    kind: str  # "space" | "time"
    source: str = ""


class MatchingGraph:
    """Vertices are basis-relevant detectors plus one merged boundary.

    An edge is time-like when both endpoint detectors compare the same
    stabilizer's measurements across rounds (same plaquette position),
    space-like otherwise; boundary edges are space-like.
    """

    def __init__(self, circuit: Circuit, basis: str, relevant: list[int], edges: list[Edge]):
        self.circuit = circuit
        self.basis = basis
        self.relevant = relevant  # global detector index per local vertex
        self.global_to_local = {g: i for i, g in enumerate(relevant)}
        self.edges = edges
        self.num_detectors = len(relevant)
        self.boundary = len(relevant)
        self._adj = None

    @property
    def num_vertices(self) -> int:
        return self.num_detectors + 1

    def mean_weight(self) -> float:
        return float(np.mean([e.weight for e in self.edges])) if self.edges else 0.0

    def weights_vector(self) -> np.ndarray:
        return np.array([e.weight for e in self.edges])

    def _prep(self):
        if self._adj is not None:
            return self._adj
        eu = np.array([min(e.u, e.v) for e in self.edges])
        ev = np.array([max(e.u, e.v) for e in self.edges])
        order = np.lexsort((ev, eu))
        seu, sev = eu[order], ev[order]
        starts = np.concatenate(
            [[0], np.nonzero((np.diff(seu) != 0) | (np.diff(sev) != 0))[0] + 1]
        ) if len(order) else np.zeros(0, dtype=int)
        group_of_pair = {
            (int(seu[s]), int(sev[s])): i for i, s in enumerate(starts)
        }
        self._adj = (order, starts, seu[starts], sev[starts], group_of_pair)
        return self._adj

    def adjacency(self, weights: np.ndarray | None = None) -> sp.csr_matrix:
        """Sparse vertex adjacency with minimum parallel-edge weights."""
        w = self.weights_vector() if weights is None else weights
        order, starts, gu, gv, _ = self._prep()
        n = self.num_vertices
        if len(order) == 0:
            return sp.csr_matrix((n, n))
        data = np.minimum.reduceat(w[order], starts)
        rows = np.concatenate([gu, gv])
        cols = np.concatenate([gv, gu])
        return sp.csr_matrix(
            (np.concatenate([data, data]), (rows, cols)), shape=(n, n)
        )

    def min_edge_id(self, u: int, v: int, weights: np.ndarray | None = None) -> int:
        """Edge index of the cheapest parallel edge between two vertices."""
        w = self.weights_vector() if weights is None else weights
        order, starts, gu, gv, group_of = self._prep()
        g = group_of[(min(u, v), max(u, v))]
        end = starts[g + 1] if g + 1 < len(starts) else len(order)
        ids = order[starts[g] : end]
        return int(ids[np.argmin(w[ids])])


def detector_kinds(circuit: Circuit):
    info = circuit.meta.get("detector_info")
    if info is None:
        raise CircuitError("circuit carries no detector metadata; use a builder")
    return info


def build_matching_graph(circuit: Circuit, dem: PauliDEM, basis: str) -> MatchingGraph:
    """Project the DEM onto ``basis``-type detectors and assemble edges.

    Mechanisms flipping one relevant detector become boundary edges;
    parallel edges with equal observable effect merge by probability
    combination; a mechanism flipping three or more relevant detectors
    raises :class:`HyperedgeError`.
    """
    info = detector_kinds(circuit)
    relevant = [i for i, d in enumerate(info) if d[0] == basis]
    g2l = {g: i for i, g in enumerate(relevant)}
    boundary = len(relevant)
    merged: dict[tuple[int, int, int], tuple[float, str]] = {}
    for mech in dem.mechanisms:
        dets = [g2l[d] for d in mech.detectors if d in g2l]
        obs = 0
        for o in mech.observables:
            obs ^= 1 << o
        if len(dets) == 0:
            continue
        if len(dets) == 1:
            u, v = dets[0], boundary
        elif len(dets) == 2:
            u, v = sorted(dets)
        else:
            raise HyperedgeError(
                f"mechanism {mech.source or mech.detectors} flips "
                f"{len(dets)} {basis}-detectors; circuit unsuitable for matching"
            )
        key = (u, v, obs)
        if key in merged:
            q, src = merged[key]
            merged[key] = (q * (1 - mech.probability) + mech.probability * (1 - q), src)
        else:
            merged[key] = (mech.probability, mech.source)
    edges = []
    for (u, v, obs), (p, src) in sorted(merged.items()):
        if p <= 0.0:
            continue
        w = float(-np.log(p / (1 - p)))
        kind = "space"
        if v != boundary:
            pu, pv = info[relevant[u]], info[relevant[v]]
            if pu[1] == pv[1]:
                kind = "time"
        edges.append(Edge(u, v, w, p, obs, kind, src))
    return MatchingGraph(circuit, basis, relevant, edges)
