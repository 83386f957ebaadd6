"""Loss-aware decoders.

MILP family: the envelope most-likely-error decoder selects exactly one
detector pattern per flagged loss readout (exclusivity) alongside
weighted Pauli mechanisms; variants relax exclusivity for noisy
readouts, extend to correlated pair losses, or drop exclusivity
entirely (the averaging baseline).

Matching family: minimum-weight perfect matching on the basis graph,
with loss-envelope edges rescaled by constant factors (envelope
matching), set to marginal-probability weights (marginal matching), or
ignored (vanilla).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, CircuitError
from .envelope import LossPatternTable, pattern_table
from .graph import MatchingGraph
from .ip import DecodeResult, DecodingProblem, ProblemTemplate, XGroup
from .mwpm import MatchResult, solve_mwpm
from .noise import Shot
from .sim import PauliDEM


def dem_weights(dem: PauliDEM):
    """Mechanism weight vector and detector/observable columns."""
    ws, det_cols, obs = [], [], []
    for m in dem.mechanisms:
        p = min(max(m.probability, 1e-300), 0.5 - 1e-12)
        ws.append(-np.log(p / (1 - p)))
        det_cols.append(m.detectors)
        mask = 0
        for o in m.observables:
            mask ^= 1 << o
        obs.append(mask)
    return np.array(ws), det_cols, obs


@dataclass
class MLEDecoder:
    """Shared machinery for the MILP decoders.

    variant:
      "envelope"  exclusivity sum == r_m per flagged readout
      "noisy"     flagged groups == 1; unflagged groups <= 1 with penalty
      "average"   flagged patterns as free weighted binaries (baseline)
      "correlated" joint exclusivity over single and pair losses,
                   minimizing loss count first
    """

    circuit: Circuit
    dem: PauliDEM
    table: LossPatternTable
    variant: str = "envelope"
    time_budget: float | None = 60.0
    pair_table: dict | None = None  # (m, n) -> pattern list, for "correlated"

    def __post_init__(self):
        if self.variant not in ("envelope", "noisy", "average", "correlated"):
            raise CircuitError(f"unknown MLE variant {self.variant}")
        self.y_weights, self.y_det_cols, self.y_obs = dem_weights(self.dem)
        self.mean_weight = float(np.mean(self.y_weights)) if len(self.y_weights) else 1.0
        self._pattern_cols = []
        for m in range(len(self.table)):
            cols = [(p.detectors, _obs_mask(p.observables)) for p in self.table[m]]
            self._pattern_cols.append(cols)

    def _problem(self, readout: np.ndarray) -> tuple[DecodingProblem, list[int]]:
        flagged = [m for m in range(len(readout)) if readout[m]]
        groups: list[XGroup] = []
        rhs: list[int] = []
        if self.variant in ("envelope", "noisy"):
            for m in flagged:
                cols = self._pattern_cols[m]
                groups.append(
                    XGroup(
                        key=("loss", m),
                        det_cols=[c[0] for c in cols],
                        obs_cols=[c[1] for c in cols],
                        exclusivity="eq",
                        rhs=1,
                    )
                )
                rhs.append(1)
            if self.variant == "noisy":
                for m in range(len(readout)):
                    if readout[m]:
                        continue
                    cols = self._pattern_cols[m]
                    groups.append(
                        XGroup(
                            key=("loss", m),
                            det_cols=[c[0] for c in cols],
                            obs_cols=[c[1] for c in cols],
                            exclusivity="le",
                            rhs=0,
                            penalty=self.mean_weight,
                        )
                    )
                    rhs.append(0)
            scale = 1.0
        elif self.variant == "average":
            for m in flagged:
                cols = self._pattern_cols[m]
                K = max(len(cols), 2)
                q = 1.0 / K
                w = -np.log(q / (1 - q))
                for j, (dets, ob) in enumerate(cols):
                    groups.append(
                        XGroup(
                            key=("loss", m, j),
                            det_cols=[dets],
                            obs_cols=[ob],
                            exclusivity="le",
                            rhs=0,
                            penalty=w,
                        )
                    )
                    rhs.append(0)
            scale = 1.0
        else:  # correlated
            pair_table = self.pair_table or {}
            member_rows = {m: i for i, m in enumerate(flagged)}
            eq_groups: dict[tuple, XGroup] = {}
            for m in flagged:
                cols = self._pattern_cols[m]
                groups.append(
                    XGroup(
                        key=("loss", m),
                        det_cols=[c[0] for c in cols],
                        obs_cols=[c[1] for c in cols],
                        exclusivity="eq",
                        rhs=1,
                        count_in_objective=True,
                    )
                )
                rhs.append(1)
            scale = 1.0 / (1.0 + float(np.sum(self.y_weights)))
        problem = DecodingProblem(
            num_detectors=len(self.circuit.detectors),
            num_observables=max(1, len(self.circuit.observables)),
            y_weights=self.y_weights,
            y_det_cols=self.y_det_cols,
            y_obs=self.y_obs,
            groups=groups,
            pauli_scale=scale,
        )
        return problem, rhs

    def decode(self, shot: Shot) -> DecodeResult:
        if self.variant == "correlated":
            return self._decode_correlated(shot)
        problem, rhs = self._problem(shot.readout)
        tpl = ProblemTemplate(problem)
        return tpl.solve(shot.detectors.astype(float), rhs, self.time_budget)

    # -- correlated extension ---------------------------------------------------

    def _decode_correlated(self, shot: Shot) -> DecodeResult:
        """Joint single/pair exclusivity, minimizing loss count first.

        Variables: y (Pauli mechanisms, weight eps*w_i), x (single-loss
        patterns, weight 1), xp (pair-loss patterns, weight 1), parity
        slacks.  Per flagged readout m: sum of m's single patterns plus
        every pair pattern involving m equals 1.
        """
        import scipy.sparse as sp
        from scipy.optimize import Bounds, LinearConstraint, milp

        readout = shot.readout
        flagged = [m for m in range(len(readout)) if readout[m]]
        row_of = {m: i for i, m in enumerate(flagged)}
        nrow = len(flagged)
        eps = 1.0 / (1.0 + float(np.sum(self.y_weights)))

        cols_det: list[tuple[int, ...]] = []
        cols_obs: list[int] = []
        cols_rows: list[tuple[int, ...]] = []
        cols_key: list[tuple] = []
        for m in flagged:
            for pj, (dets, ob) in enumerate(self._pattern_cols[m]):
                cols_det.append(dets)
                cols_obs.append(ob)
                cols_rows.append((row_of[m],))
                cols_key.append(("loss", m, pj))
        if self.pair_table:
            fset = set(flagged)
            for (m, n), pcols in sorted(self.pair_table.items()):
                if m in fset and n in fset:
                    for pj, (dets, ob) in enumerate(pcols):
                        cols_det.append(dets)
                        cols_obs.append(ob)
                        cols_rows.append((row_of[m], row_of[n]))
                        cols_key.append(("pair", m, n, pj))

        ny = len(self.y_weights)
        nx = len(cols_det)
        nd = len(self.circuit.detectors)
        nvar = ny + nx + nd
        rows, cidx, data = [], [], []
        inc = np.zeros(nd)
        for j, dets in enumerate(self.y_det_cols):
            for d in dets:
                rows.append(d)
                cidx.append(j)
                data.append(1.0)
                inc[d] += 1
        for k, dets in enumerate(cols_det):
            for d in dets:
                rows.append(d)
                cidx.append(ny + k)
                data.append(1.0)
                inc[d] += 1
        for d in range(nd):
            rows.append(d)
            cidx.append(ny + nx + d)
            data.append(-2.0)
        A_par = sp.csr_matrix((data, (rows, cidx)), shape=(nd, nvar))
        grows, gcols, gdata = [], [], []
        for k, rws in enumerate(cols_rows):
            for r in rws:
                grows.append(r)
                gcols.append(ny + k)
                gdata.append(1.0)
        A_grp = sp.csr_matrix((gdata, (grows, gcols)), shape=(nrow, nvar))
        c = np.concatenate([self.y_weights * eps, np.ones(nx), np.zeros(nd)])
        syn = shot.detectors.astype(float)
        ones = np.ones(nrow)
        cons = [LinearConstraint(A_par, syn, syn)]
        if nrow:
            cons.append(LinearConstraint(A_grp, ones, ones))
        bounds = Bounds(
            np.zeros(nvar),
            np.concatenate([np.ones(ny + nx), np.floor(inc / 2)]),
        )
        options = {"time_limit": float(self.time_budget)} if self.time_budget else {}
        res = milp(
            c=c,
            constraints=cons,
            integrality=np.ones(nvar),
            bounds=bounds,
            options=options,
        )
        nobs = max(1, len(self.circuit.observables))
        if res.status == 2 or res.status not in (0, 1):
            return DecodeResult(
                "infeasible", float("inf"), np.zeros(ny), [], np.zeros(nobs, np.uint8)
            )
        status = "optimal" if res.status == 0 else "timeout"
        x = np.round(res.x).astype(np.int64)
        obs = 0
        for j in np.nonzero(x[:ny])[0]:
            obs ^= self.y_obs[j]
        x_sel = []
        for k in range(nx):
            if x[ny + k]:
                obs ^= cols_obs[k]
                x_sel.append((cols_key[k], k))
        ob = np.array([(obs >> i) & 1 for i in range(nobs)], dtype=np.uint8)
        return DecodeResult(status, float(res.fun), x[:ny], x_sel, ob)


def _obs_mask(obs_tuple) -> int:
    mask = 0
    for o in obs_tuple:
        mask ^= 1 << o
    return mask


def decode_envelope_mle(circuit, dem, table, shot, time_budget=60.0) -> DecodeResult:
    return MLEDecoder(circuit, dem, table, "envelope", time_budget).decode(shot)


def decode_envelope_mle_noisy_readout(circuit, dem, table, shot, time_budget=60.0):
    return MLEDecoder(circuit, dem, table, "noisy", time_budget).decode(shot)


def decode_average_mle(circuit, dem, table, shot, time_budget=60.0) -> DecodeResult:
    return MLEDecoder(circuit, dem, table, "average", time_budget).decode(shot)


def decode_correlated_mle(circuit, dem, table, shot, pair_table, time_budget=60.0):
    return MLEDecoder(
        circuit, dem, table, "correlated", time_budget, pair_table=pair_table
    ).decode(shot)


# ---------------------------------------------------------------------------
# Matching decoders.
# ---------------------------------------------------------------------------


class MatchingDecoder:
    """MWPM decoding with per-shot loss-edge reweighting.

    mode "vanilla" ignores the loss readout, "envelope" rescales the
    edges an envelope can trigger to alpha_s/alpha_t times the mean edge
    weight, "marginal" sets them to weights from uniform per-pattern
    marginal probabilities.
    """

    def __init__(
        self,
        graph: MatchingGraph,
        table: LossPatternTable | None = None,
        mode: str = "vanilla",
        alpha_s: float = 0.5,
        alpha_t: float = 0.25,
    ):
        if mode not in ("vanilla", "envelope", "marginal"):
            raise CircuitError(f"unknown matching mode {mode}")
        self.graph = graph
        self.mode = mode
        self.alpha_s = alpha_s
        self.alpha_t = alpha_t
        self.base_weights = graph.weights_vector()
        self.mean_w = graph.mean_weight()
        if mode != "vanilla":
            if table is None:
                raise CircuitError("loss-aware matching needs a pattern table")
            self._prepare_affected(table)

    def _prepare_affected(self, table: LossPatternTable):
        g = self.graph
        pair_groups = g._prep()[4]
        self.affected: list[list[tuple[int, float]]] = []
        edge_kind_time = np.array([e.kind == "time" for e in g.edges])
        for m in range(len(table)):
            hits: dict[int, int] = {}  # edge id -> patterns covering it
            K = max(len(table[m]), 1)
            for pat in table[m]:
                local = sorted(
                    g.global_to_local[d] for d in pat.detectors if d in g.global_to_local
                )
                for i in range(len(local)):
                    for j in range(i + 1, len(local)):
                        key = (local[i], local[j])
                        if key in pair_groups:
                            eid = g.min_edge_id(*key)
                            hits[eid] = hits.get(eid, 0) + 1
                if len(local) == 1:
                    key = (local[0], g.boundary)
                    if key in pair_groups:
                        eid = g.min_edge_id(*key)
                        hits[eid] = hits.get(eid, 0) + 1
            entries = []
            for eid, cnt in hits.items():
                if self.mode == "envelope":
                    alpha = self.alpha_t if edge_kind_time[eid] else self.alpha_s
                    entries.append((eid, alpha * self.mean_w))
                else:
                    q = min(cnt / K, 0.5 - 1e-9)
                    entries.append((eid, float(-np.log(q / (1 - q)))))
            self.affected.append(entries)

    def decode(self, shot: Shot) -> MatchResult:
        g = self.graph
        defects = [
            g.global_to_local[d]
            for d in np.nonzero(shot.detectors)[0]
            if d in g.global_to_local
        ]
        weights = None
        if self.mode != "vanilla" and shot.readout.any():
            weights = self.base_weights.copy()
            for m in np.nonzero(shot.readout)[0]:
                for eid, w in self.affected[m]:
                    weights[eid] = w
        return solve_mwpm(g, defects, weights)


def decode_vanilla_matching(graph, shot) -> MatchResult:
    return MatchingDecoder(graph, mode="vanilla").decode(shot)


def decode_envelope_matching(graph, table, shot, alpha_s=0.5, alpha_t=0.25):
    return MatchingDecoder(graph, table, "envelope", alpha_s, alpha_t).decode(shot)


def decode_marginal_matching(graph, table, shot) -> MatchResult:
    return MatchingDecoder(graph, table, "marginal").decode(shot)


# ---------------------------------------------------------------------------
# Correlated pair tables.
# ---------------------------------------------------------------------------


def build_pair_table(circuit: Circuit, max_slots: int = 16) -> dict:
    """Envelope patterns of correlated pair losses at each entangling gate.

    A correlated event loses both atoms right after one CZ/CNOT, so the
    loss locations are known exactly; the joint envelope is the branch
    composition of the two single-location envelopes, keyed by the two
    readout indices.
    """
    from .envelope import czh_form, enumerate_patterns, envelope_of_single_loss
    from .circuit import map_location_to_czh
    from .pauli import SpacetimeLocation

    compiled = czh_form(circuit)
    out: dict[tuple[int, int], list] = {}
    for t, layer in enumerate(circuit.ticks):
        for ins in layer:
            if ins.gate not in ("CZ", "CNOT"):
                continue
            locs = [SpacetimeLocation(q, t) for q in ins.targets]
            readouts = []
            ok = True
            for loc in locs:
                lt = circuit.lifetime_at(loc)
                if lt.measurement is None:
                    ok = False
                    break
                meas = circuit.measurements[lt.measurement]
                if not meas.loss_resolving:
                    ok = False
                    break
                readouts.append(meas.readout_index)
            if not ok:
                continue
            envs = [
                envelope_of_single_loss(
                    compiled,
                    map_location_to_czh(compiled, loc)
                    if "source_tick_end" in compiled.meta
                    else loc,
                )
                for loc in locs
            ]
            env = envs[0].compose(envs[1])
            pats = enumerate_patterns(circuit, env, max_slots)
            key = tuple(sorted(readouts))
            cols = [(p.detectors, _obs_mask(p.observables)) for p in pats]
            if key in out:
                seen = set(map(tuple, (tuple(c[0]) + (c[1],) for c in out[key])))
                for c in cols:
                    sig = tuple(c[0]) + (c[1],)
                    if sig not in seen:
                        out[key].append(c)
                        seen.add(sig)
            else:
                out[key] = cols
    return out
