"""Compiled per-shot stabilizer kernel for the Monte Carlo sampler.

A circuit is flattened into opcode arrays once; each shot runs the whole
loss-pruned execution inside one njit call with pre-drawn random bits.
Algorithmically this is the same destabilizer/stabilizer simulation as
:mod:`lossqec.tableau` in concrete mode, with identical random-bit
consumption order, which the tests exploit for bit-exact comparison.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .circuit import Circuit, MEASUREMENT_GATES

OP_H, OP_S, OP_CZ, OP_CNOT, OP_SWAP, OP_R, OP_RX, OP_M, OP_MX = range(9)

_OPCODE = {
    "H": OP_H,
    "S": OP_S,
    "CZ": OP_CZ,
    "CNOT": OP_CNOT,
    "SWAP": OP_SWAP,
    "R": OP_R,
    "RX": OP_RX,
    "M": OP_M,
    "MX": OP_MX,
}

# Phase-exponent contributions g(x_i, z_i, x_h, z_h) for row-mult, mod 4.
_G_TABLE = np.zeros(16, dtype=np.int8)
for _xi in (0, 1):
    for _zi in (0, 1):
        for _xh in (0, 1):
            for _zh in (0, 1):
                if _xi == 0 and _zi == 0:
                    g = 0
                elif _xi == 1 and _zi == 1:
                    g = _zh - _xh
                elif _xi == 1:
                    g = _zh * (2 * _xh - 1)
                else:
                    g = _xh * (1 - 2 * _zh)
                _G_TABLE[(_xi << 3) | (_zi << 2) | (_xh << 1) | _zh] = g


class ShotCompiler:
    """Flattened opcode view of a circuit plus loss bookkeeping tables."""

    def __init__(self, circuit: Circuit):
        self.circuit = circuit
        ops, opa, opb = [], [], []
        tick_of = []
        meas_of = []  # measurement index per op or -1
        mcount = 0
        for t, layer in enumerate(circuit.ticks):
            for ins in layer:
                ops.append(_OPCODE[ins.gate])
                opa.append(ins.targets[0])
                opb.append(ins.targets[1] if len(ins.targets) == 2 else 0)
                tick_of.append(t)
                if ins.gate in MEASUREMENT_GATES:
                    meas_of.append(mcount)
                    mcount += 1
                else:
                    meas_of.append(-1)
        self.ops = np.array(ops, dtype=np.int8)
        self.opa = np.array(opa, dtype=np.int32)
        self.opb = np.array(opb, dtype=np.int32)
        self.tick_of = np.array(tick_of, dtype=np.int32)
        self.meas_of = np.array(meas_of, dtype=np.int32)
        self.num_measurements = mcount
        self.n = circuit.num_qubits

        # Per lifetime: op ids ordered with the location order, so a loss
        # at location order k removes ops whose order index > k.
        loc_order: dict[tuple[int, int], int] = {}
        self.lifetime_of_loc: dict[tuple[int, int], tuple[int, int]] = {}
        for lt in circuit.atom_lifetimes:
            for i, loc in enumerate(lt.locations()):
                loc_order[(loc.qubit, loc.tick)] = i
                self.lifetime_of_loc[(loc.qubit, loc.tick)] = (lt.index, i)
        self.lifetime_ops: dict[int, list[tuple[int, int]]] = {
            lt.index: [] for lt in circuit.atom_lifetimes
        }
        self.lifetime_meas: dict[int, int | None] = {
            lt.index: lt.measurement for lt in circuit.atom_lifetimes
        }
        for oid in range(len(ops)):
            g = self.ops[oid]
            t = int(self.tick_of[oid])
            if g in (OP_R, OP_RX, OP_M, OP_MX):
                continue  # resets never removed; measurements handled via lost flags
            targets = [int(self.opa[oid])] + (
                [int(self.opb[oid])] if g in (OP_CZ, OP_CNOT) else []
            )
            if g == OP_SWAP:
                continue  # shuttling is retained under loss
            for q in targets:
                key = (q, t)
                hit = self.lifetime_of_loc.get(key)
                if hit is None:
                    continue
                lt_idx, order = hit
                self.lifetime_ops[lt_idx].append((order, oid))
        for v in self.lifetime_ops.values():
            v.sort()

        # Measurement parity structures.
        import scipy.sparse as sp

        rows, cols = [], []
        for i, d in enumerate(circuit.detectors):
            for m in d:
                rows.append(i)
                cols.append(m)
        self.det_mat = sp.csr_matrix(
            (np.ones(len(rows), np.uint8), (rows, cols)),
            shape=(len(circuit.detectors), mcount),
        )
        rows, cols = [], []
        for i, o in enumerate(circuit.observables):
            for m in o:
                rows.append(i)
                cols.append(m)
        self.obs_mat = sp.csr_matrix(
            (np.ones(len(rows), np.uint8), (rows, cols)),
            shape=(len(circuit.observables), mcount),
        )

    def removed_ops(self, loss_by_lifetime: dict[int, int]) -> np.ndarray:
        """Op-removal mask for losses given as {lifetime index: loc order}."""
        removed = np.zeros(len(self.ops), dtype=np.uint8)
        for lt_idx, order in loss_by_lifetime.items():
            for o, oid in self.lifetime_ops[lt_idx]:
                if o > order:
                    removed[oid] = 1
        return removed


def compile_shots(circuit: Circuit) -> ShotCompiler:
    if "shot_compiler" not in circuit._cache:
        circuit._cache["shot_compiler"] = ShotCompiler(circuit)
    return circuit._cache["shot_compiler"]


@njit(cache=True)
def _measure_z(X, Z, S, n, q, outcome_bit):
    """CHP Z-measurement; outcome_bit is used only for the random branch.

    Returns (outcome, was_random).
    """
    pivot = -1
    for i in range(n, 2 * n):
        if X[i, q]:
            pivot = i
            break
    if pivot >= 0:
        for h in range(2 * n):
            if h != pivot and X[h, q]:
                # row h *= row pivot (phases matter only for stabilizer rows)
                if h >= n:
                    G = 0
                    for j in range(X.shape[1]):
                        G += _G_TABLE[
                            (X[pivot, j] << 3)
                            | (Z[pivot, j] << 2)
                            | (X[h, j] << 1)
                            | Z[h, j]
                        ]
                    S[h - n] = (S[h - n] + S[pivot - n] + ((G % 4) // 2)) & 1
                for j in range(X.shape[1]):
                    X[h, j] ^= X[pivot, j]
                    Z[h, j] ^= Z[pivot, j]
        d = pivot - n
        for j in range(X.shape[1]):
            X[d, j] = X[pivot, j]
            Z[d, j] = Z[pivot, j]
            X[pivot, j] = 0
            Z[pivot, j] = 0
        Z[pivot, q] = 1
        S[pivot - n] = outcome_bit
        return outcome_bit, True
    # Deterministic: product of stabilizers over destabilizer hits.
    acc_x = np.zeros(X.shape[1], dtype=np.uint8)
    acc_z = np.zeros(X.shape[1], dtype=np.uint8)
    phase = 0
    sign = 0
    for i in range(n):
        if X[i, q]:
            row = n + i
            for j in range(X.shape[1]):
                phase += _G_TABLE[
                    (X[row, j] << 3) | (Z[row, j] << 2) | (acc_x[j] << 1) | acc_z[j]
                ]
                acc_x[j] ^= X[row, j]
                acc_z[j] ^= Z[row, j]
            sign ^= S[i]
    sign ^= (phase % 4) // 2
    return sign, False


@njit(cache=True)
def _apply_h(X, Z, S, n, q):
    for r in range(2 * n):
        x = X[r, q]
        z = Z[r, q]
        if r >= n and x and z:
            S[r - n] ^= 1
        X[r, q] = z
        Z[r, q] = x


@njit(cache=True)
def _reset_z(X, Z, S, n, q, outcome_bit):
    out, was_random = _measure_z(X, Z, S, n, q, outcome_bit)
    if out:
        for k in range(n):
            if Z[n + k, q]:
                S[k] ^= 1
    return was_random


@njit(cache=True)
def run_shot(
    ops,
    opa,
    opb,
    tick_of,
    meas_of,
    removed,
    lost_meas,
    inj_tick,
    inj_wire,
    inj_px,
    inj_pz,
    n,
    rand_bits,
    bits_out,
):
    X = np.zeros((2 * n, n), dtype=np.uint8)
    Z = np.zeros((2 * n, n), dtype=np.uint8)
    S = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        X[i, i] = 1
        Z[n + i, i] = 1
    rb = 0
    ninj = inj_tick.shape[0]
    inj_ptr = 0
    cur_tick = 0
    for oid in range(ops.shape[0]):
        t = tick_of[oid]
        while cur_tick < t:
            # apply injections located after cur_tick
            while inj_ptr < ninj and inj_tick[inj_ptr] == cur_tick:
                q = inj_wire[inj_ptr]
                px = inj_px[inj_ptr]
                pz = inj_pz[inj_ptr]
                for k in range(n):
                    f = 0
                    if px:
                        f ^= Z[n + k, q]
                    if pz:
                        f ^= X[n + k, q]
                    S[k] ^= f
                inj_ptr += 1
            cur_tick += 1
        if removed[oid]:
            continue
        g = ops[oid]
        a = opa[oid]
        b = opb[oid]
        if g == OP_H:
            _apply_h(X, Z, S, n, a)
        elif g == OP_S:
            for r in range(2 * n):
                x = X[r, a]
                if x:
                    if r >= n and Z[r, a]:
                        S[r - n] ^= 1
                    Z[r, a] ^= 1
        elif g == OP_CNOT:
            for r in range(2 * n):
                xc = X[r, a]
                zt = Z[r, b]
                if r >= n and xc and zt and (X[r, b] ^ Z[r, a] ^ 1):
                    S[r - n] ^= 1
                X[r, b] ^= xc
                Z[r, a] ^= zt
        elif g == OP_CZ:
            _apply_h(X, Z, S, n, b)
            for r in range(2 * n):
                xc = X[r, a]
                zt = Z[r, b]
                if r >= n and xc and zt and (X[r, b] ^ Z[r, a] ^ 1):
                    S[r - n] ^= 1
                X[r, b] ^= xc
                Z[r, a] ^= zt
            _apply_h(X, Z, S, n, b)
        elif g == OP_SWAP:
            for r in range(2 * n):
                xa = X[r, a]
                X[r, a] = X[r, b]
                X[r, b] = xa
                za = Z[r, a]
                Z[r, a] = Z[r, b]
                Z[r, b] = za
        elif g == OP_R:
            if _reset_z(X, Z, S, n, a, rand_bits[rb]):
                rb += 1
        elif g == OP_RX:
            if _reset_z(X, Z, S, n, a, rand_bits[rb]):
                rb += 1
            _apply_h(X, Z, S, n, a)
        elif g == OP_M:
            m = meas_of[oid]
            if lost_meas[m]:
                bits_out[m] = 0
            else:
                out, was_random = _measure_z(X, Z, S, n, a, rand_bits[rb])
                if was_random:
                    rb += 1
                bits_out[m] = out
        else:  # OP_MX
            m = meas_of[oid]
            if lost_meas[m]:
                bits_out[m] = 0
            else:
                _apply_h(X, Z, S, n, a)
                out, was_random = _measure_z(X, Z, S, n, a, rand_bits[rb])
                if was_random:
                    rb += 1
                bits_out[m] = out
                _apply_h(X, Z, S, n, a)
    return rb
