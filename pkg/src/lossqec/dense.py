"""Exact statevector test oracle.

Enumerates every measurement-randomness branch of a (possibly
loss-pruned) circuit and returns all reachable detector/observable pairs
with their probabilities.  Intended for small circuits; the qubit guard
keeps accidental misuse from exploding.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .circuit import Circuit, LossConfiguration, LossPlan, MEASUREMENT_GATES
from .pauli import PauliConfiguration, SpacetimeLocation

_ATOL = 1e-9

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
_S = np.array([[1, 0], [0, 1j]], dtype=np.complex128)
_PAULI_MATS = {
    1: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    2: np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    3: np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


class DenseOracleError(ValueError):
    pass


@lru_cache(maxsize=None)
def _indices(n: int) -> np.ndarray:
    return np.arange(2**n)


@lru_cache(maxsize=None)
def _cnot_perm(n: int, c: int, t: int) -> np.ndarray:
    idx = _indices(n)
    return np.where((idx >> c) & 1 == 1, idx ^ (1 << t), idx)


@lru_cache(maxsize=None)
def _swap_perm(n: int, a: int, b: int) -> np.ndarray:
    idx = _indices(n)
    d = ((idx >> a) ^ (idx >> b)) & 1
    return idx ^ (d << a) ^ (d << b)


@lru_cache(maxsize=None)
def _cz_sign(n: int, a: int, b: int) -> np.ndarray:
    idx = _indices(n)
    both = ((idx >> a) & (idx >> b)) & 1
    return np.where(both == 1, -1.0, 1.0)


def _apply_1q(state: np.ndarray, mat: np.ndarray, q: int, n: int) -> np.ndarray:
    t = state.reshape((2 ** (n - q - 1), 2, 2**q))
    return np.einsum("ab,ibj->iaj", mat, t).reshape(-1)


def _prob_one(state: np.ndarray, q: int, n: int) -> float:
    t = state.reshape((2 ** (n - q - 1), 2, 2**q))
    return float(np.sum(np.abs(t[:, 1, :]) ** 2))


def _collapse(state: np.ndarray, q: int, n: int, outcome: int, prob: float) -> np.ndarray:
    t = state.reshape((2 ** (n - q - 1), 2, 2**q)).copy()
    t[:, 1 - outcome, :] = 0
    return (t.reshape(-1) / np.sqrt(prob)).astype(np.complex128)


def _branch_outcomes(circuit: Circuit, pauli, plan: LossPlan, max_branches: int):
    """All (measurement bits, probability) leaves of the branching tree."""
    n = circuit.num_qubits
    injections: dict[int, list[tuple[int, int]]] = {}
    for loc, p in pauli.items():
        if not plan.injection_dropped(loc):
            injections.setdefault(loc.tick, []).append((loc.qubit, p))

    state0 = np.zeros(2**n, dtype=np.complex128)
    state0[0] = 1.0
    results: list[tuple[list[int], float]] = []
    stack: list[tuple[np.ndarray, int, list[int], float]] = [(state0, 0, [], 1.0)]
    meas_counter_at_tick = _measurement_layout(circuit)

    while stack:
        state, t, bits, prob = stack.pop()
        if t == circuit.num_ticks:
            results.append((bits, prob))
            if len(results) > max_branches:
                raise DenseOracleError("too many randomness branches")
            continue
        queue = [(state, bits, prob)]
        for ins in circuit.ticks[t]:
            g = ins.gate
            if plan.gate_removed(ins, t):
                continue
            if g == "H" or g == "S":
                (q,) = ins.targets
                mat = _H if g == "H" else _S
                queue = [(_apply_1q(s, mat, q, n), b, pr) for s, b, pr in queue]
            elif g == "CZ":
                a, bq = ins.targets
                sign = _cz_sign(n, a, bq)
                queue = [(s * sign, b, pr) for s, b, pr in queue]
            elif g == "CNOT":
                perm = _cnot_perm(n, *ins.targets)
                queue = [(s[perm], b, pr) for s, b, pr in queue]
            elif g == "SWAP":
                perm = _swap_perm(n, *ins.targets)
                queue = [(s[perm], b, pr) for s, b, pr in queue]
            else:
                (q,) = ins.targets
                is_meas = g in MEASUREMENT_GATES
                midx = meas_counter_at_tick.get((t, q))
                if is_meas and midx in plan.lost_measurements:
                    queue = [(s, b + [0], pr) for s, b, pr in queue]
                    continue
                next_queue = []
                for s, b, pr in queue:
                    if g in ("RX", "MX"):
                        s = _apply_1q(s, _H, q, n)
                    p1 = _prob_one(s, q, n)
                    outs = []
                    if p1 < 1 - _ATOL:
                        outs.append((0, 1 - p1))
                    if p1 > _ATOL:
                        outs.append((1, p1))
                    for o, pb in outs:
                        s2 = _collapse(s, q, n, o, pb)
                        if g in ("R", "RX"):
                            if o:
                                s2 = _apply_1q(s2, _PAULI_MATS[1], q, n)
                            if g == "RX":
                                s2 = _apply_1q(s2, _H, q, n)
                            next_queue.append((s2, list(b), pr * pb))
                        else:
                            if g == "MX":
                                s2 = _apply_1q(s2, _H, q, n)
                            next_queue.append((s2, b + [o], pr * pb))
                queue = next_queue
        for s, b, pr in queue:
            for q, p in injections.get(t, ()):
                s = _apply_1q(s, _PAULI_MATS[p], q, n)
            stack.append((s, t + 1, b, pr))
    return results


def _measurement_layout(circuit: Circuit) -> dict[tuple[int, int], int]:
    return {(m.tick, m.qubit): m.index for m in circuit.measurements}


def dense_reference(circuit: Circuit, max_branches: int = 1 << 14):
    """Reference detector/observable constants; raises on nondeterminism."""
    branches = _branch_outcomes(
        circuit, PauliConfiguration(), LossPlan(circuit, None), max_branches
    )
    det_vals = [set() for _ in circuit.detectors]
    obs_vals = [set() for _ in circuit.observables]
    for bits, prob in branches:
        if prob < _ATOL:
            continue
        for i, d in enumerate(circuit.detectors):
            det_vals[i].add(sum(bits[m] for m in d) & 1)
        for i, o in enumerate(circuit.observables):
            obs_vals[i].add(sum(bits[m] for m in o) & 1)
    for i, vals in enumerate(det_vals):
        if len(vals) != 1:
            raise DenseOracleError(f"detector {i} nondeterministic in reference")
    for i, vals in enumerate(obs_vals):
        if len(vals) != 1:
            raise DenseOracleError(f"observable {i} nondeterministic in reference")
    return [v.pop() for v in det_vals], [v.pop() for v in obs_vals]


def dense_oracle(
    circuit: Circuit,
    pauli: PauliConfiguration | None = None,
    loss: LossConfiguration | None = None,
    max_qubits: int = 12,
    max_branches: int = 1 << 14,
) -> dict[tuple[tuple[int, ...], tuple[int, ...]], float]:
    """Reachable (flipped detectors, flipped observables) pairs with probabilities.

    Keys are sorted index tuples; values sum to 1.  The no-error reference
    is recomputed here so the oracle is self-contained.
    """
    if circuit.num_qubits > max_qubits:
        raise DenseOracleError(
            f"{circuit.num_qubits} qubits exceeds dense oracle limit {max_qubits}"
        )
    ref_det, ref_obs = dense_reference(circuit, max_branches)
    plan = LossPlan(circuit, loss)
    branches = _branch_outcomes(
        circuit, pauli or PauliConfiguration(), plan, max_branches
    )
    out: dict[tuple[tuple[int, ...], tuple[int, ...]], float] = {}
    for bits, prob in branches:
        if prob < _ATOL:
            continue
        dets = tuple(
            i
            for i, d in enumerate(circuit.detectors)
            if (sum(bits[m] for m in d) & 1) != ref_det[i]
        )
        obs = tuple(
            i
            for i, o in enumerate(circuit.observables)
            if (sum(bits[m] for m in o) & 1) != ref_obs[i]
        )
        key = (dets, obs)
        out[key] = out.get(key, 0.0) + prob
    return out


def outcome_set(result: dict) -> frozenset:
    """Just the reachable pairs from a :func:`dense_oracle` result."""
    return frozenset(result.keys())
