"""Exact binary-program engine for most-likely-error decoding.

Parity rows are linearized with one bounded integer slack per detector
(sum = syndrome + 2k), so the solver core is plain branch-and-bound over
binaries and bounded integers (HiGHS via scipy).  A brute-force
enumerator provides the independent oracle for small instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .circuit import CircuitError


@dataclass
class XGroup:
    """Loss-pattern variables of one readout (or readout pair)."""

    key: tuple
    det_cols: list[tuple[int, ...]]  # detector indices per pattern
    obs_cols: list[int]  # observable bitmask per pattern
    exclusivity: str = "eq"  # "eq": sum == r; "le": sum <= 1 (penalized)
    rhs: int = 1
    penalty: float = 0.0
    count_in_objective: bool = False  # correlated variant: loss-count term


@dataclass
class DecodingProblem:
    """min  sum w_i y_i (+ penalties/count terms)  s.t. parity + exclusivity."""

    num_detectors: int
    num_observables: int
    y_weights: np.ndarray
    y_det_cols: list[tuple[int, ...]]
    y_obs: list[int]
    groups: list[XGroup] = field(default_factory=list)
    syndrome: np.ndarray | None = None
    pauli_scale: float = 1.0  # epsilon multiplier on the Pauli term

    def __post_init__(self):
        w = np.asarray(self.y_weights, dtype=float)
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise CircuitError("Pauli weights must be finite and non-negative")
        self.y_weights = w

    @property
    def num_x(self) -> int:
        return sum(len(g.det_cols) for g in self.groups)


@dataclass
class DecodeResult:
    status: str  # "optimal" | "timeout" | "infeasible"
    objective: float
    y_selected: np.ndarray
    x_selected: list[tuple[tuple, int]]  # (group key, pattern index)
    observables: np.ndarray

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class ProblemTemplate:
    """Immutable constraint-matrix template shared across shots."""

    def __init__(self, problem: DecodingProblem):
        self.problem = problem
        ny = len(problem.y_weights)
        nx = problem.num_x
        nd = problem.num_detectors
        ng = len(problem.groups)

        rows, cols, data = [], [], []
        for j, dets in enumerate(problem.y_det_cols):
            for d in dets:
                rows.append(d)
                cols.append(j)
                data.append(1.0)
        xoff = ny
        self.x_meta = []
        gx = []
        for gi, g in enumerate(problem.groups):
            for pj, dets in enumerate(g.det_cols):
                for d in dets:
                    rows.append(d)
                    cols.append(xoff)
                    data.append(1.0)
                gx.append((gi, xoff))
                self.x_meta.append((gi, pj))
                xoff += 1
        nvar = ny + nx + nd  # slacks at the end
        for d in range(nd):
            rows.append(d)
            cols.append(ny + nx + d)
            data.append(-2.0)
        A_par = sp.csr_matrix((data, (rows, cols)), shape=(nd, nvar))
        # row incidence bounds the slack
        inc = np.zeros(nd)
        for j, dets in enumerate(problem.y_det_cols):
            for d in dets:
                inc[d] += 1
        for g in problem.groups:
            for dets in g.det_cols:
                for d in dets:
                    inc[d] += 1
        self.slack_ub = np.floor(inc / 2)

        grows, gcols, gdata = [], [], []
        for gi, xcol in gx:
            grows.append(gi)
            gcols.append(xcol)
            gdata.append(1.0)
        self.A_grp = (
            sp.csr_matrix((gdata, (grows, gcols)), shape=(ng, nvar))
            if ng
            else sp.csr_matrix((0, nvar))
        )
        self.A_par = A_par
        self.ny, self.nx, self.nd, self.ng = ny, nx, nd, ng

        c = np.zeros(nvar)
        c[:ny] = problem.y_weights * problem.pauli_scale
        k = ny
        for g in problem.groups:
            for _ in g.det_cols:
                c[k] = g.penalty + (1.0 if g.count_in_objective else 0.0)
                k += 1
        self.c = c
        self.integrality = np.concatenate(
            [np.ones(ny + nx), np.ones(nd)]
        )  # all integer
        lb = np.zeros(nvar)
        ub = np.concatenate([np.ones(ny + nx), self.slack_ub])
        self.bounds = Bounds(lb, ub)

    def solve(self, syndrome, group_rhs, time_budget: float | None = 60.0) -> DecodeResult:
        p = self.problem
        cons = [LinearConstraint(self.A_par, syndrome.astype(float), syndrome.astype(float))]
        if self.ng:
            lo = np.zeros(self.ng)
            hi = np.zeros(self.ng)
            for gi, g in enumerate(p.groups):
                r = group_rhs[gi]
                if g.exclusivity == "eq":
                    lo[gi] = hi[gi] = r
                else:
                    lo[gi] = 0
                    hi[gi] = 1
            cons.append(LinearConstraint(self.A_grp, lo, hi))
        options = {}
        if time_budget is not None:
            options["time_limit"] = float(time_budget)
        res = milp(
            c=self.c,
            constraints=cons,
            integrality=self.integrality,
            bounds=self.bounds,
            options=options,
        )
        if res.status == 2 or (res.status not in (0, 1)):
            return DecodeResult("infeasible", float("inf"), np.zeros(self.ny), [], np.zeros(p.num_observables, np.uint8))
        status = "optimal" if res.status == 0 else "timeout"
        x = np.round(res.x).astype(np.int64)
        y_sel = x[: self.ny]
        obs = 0
        for j in np.nonzero(y_sel)[0]:
            obs ^= p.y_obs[j]
        x_sel = []
        for k2, (gi, pj) in enumerate(self.x_meta):
            if x[self.ny + k2]:
                x_sel.append((p.groups[gi].key, pj))
                obs ^= p.groups[gi].obs_cols[pj]
        # verify parity by re-substitution
        if status == "optimal":
            resid = (self.A_par @ res.x) - syndrome
            if np.max(np.abs(resid)) > 1e-6:
                raise CircuitError("solver returned a parity-violating solution")
        ob = np.array(
            [(obs >> i) & 1 for i in range(p.num_observables)], dtype=np.uint8
        )
        return DecodeResult(status, float(res.fun), y_sel, x_sel, ob)


def solve_ip(
    problem: DecodingProblem,
    syndrome: np.ndarray | None = None,
    group_rhs: list[int] | None = None,
    time_budget: float | None = 60.0,
) -> DecodeResult:
    """Exact optimum of a decoding problem (branch-and-bound over binaries).

    Deterministic for fixed inputs; ``timeout`` status returns the best
    incumbent flagged non-optimal.
    """
    syndrome = problem.syndrome if syndrome is None else syndrome
    if syndrome is None:
        raise CircuitError("no syndrome provided")
    if group_rhs is None:
        group_rhs = [g.rhs for g in problem.groups]
    return ProblemTemplate(problem).solve(np.asarray(syndrome), group_rhs, time_budget)


def brute_force(
    problem: DecodingProblem,
    syndrome: np.ndarray,
    group_rhs: list[int] | None = None,
    max_vars: int = 22,
) -> tuple[float, np.ndarray | None]:
    """Exhaustive oracle: minimal objective over all feasible assignments."""
    ny = len(problem.y_weights)
    nx = problem.num_x
    if ny + nx > max_vars:
        raise CircuitError(f"{ny + nx} variables exceed brute-force limit")
    if group_rhs is None:
        group_rhs = [g.rhs for g in problem.groups]
    cols = [(problem.y_weights[j] * problem.pauli_scale, problem.y_det_cols[j], None)
            for j in range(ny)]
    for gi, g in enumerate(problem.groups):
        for pj, dets in enumerate(g.det_cols):
            cost = g.penalty + (1.0 if g.count_in_objective else 0.0)
            cols.append((cost, dets, gi))
    best = float("inf")
    best_assign = None
    nvar = len(cols)
    target = np.asarray(syndrome, dtype=np.int64)
    for mask in range(1 << nvar):
        par = np.zeros(problem.num_detectors, dtype=np.int64)
        cost = 0.0
        gsum = [0] * len(problem.groups)
        mm = mask
        j = 0
        while mm:
            if mm & 1:
                w, dets, gi = cols[j]
                cost += w
                for d in dets:
                    par[d] ^= 1
                if gi is not None:
                    gsum[gi] += 1
            mm >>= 1
            j += 1
        if cost >= best:
            continue
        ok = np.array_equal(par % 2, target % 2)
        if ok:
            for gi, g in enumerate(problem.groups):
                r = group_rhs[gi]
                if g.exclusivity == "eq" and gsum[gi] != r:
                    ok = False
                    break
                if g.exclusivity == "le" and gsum[gi] > 1:
                    ok = False
                    break
        if ok and cost < best:
            best = cost
            best_assign = mask
    if best_assign is None:
        return float("inf"), None
    assign = np.array([(best_assign >> j) & 1 for j in range(nvar)], dtype=np.int64)
    return best, assign
