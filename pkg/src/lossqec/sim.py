"""Reference circuit semantics.

Everything downstream compares against this module: seeded stabilizer
evaluation of loss-pruned circuits, fast Pauli-frame propagation, exact
outcome-set enumeration, and Pauli detector-error-model extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import (
    Circuit,
    CircuitError,
    LossConfiguration,
    LossPlan,
    MEASUREMENT_GATES,
    RESET_GATES,
)
from .pauli import PAULI_XZ, PauliConfiguration, SpacetimeLocation
from .tableau import AffineOutcome, TableauSimulator


@dataclass(frozen=True)
class DetectorOutcomePair:
    """Flipped detector / observable indices for one execution."""

    detectors: tuple[int, ...]
    observables: tuple[int, ...]

    def as_bits(self, circuit: Circuit) -> tuple[np.ndarray, np.ndarray]:
        d = np.zeros(len(circuit.detectors), dtype=np.uint8)
        o = np.zeros(len(circuit.observables), dtype=np.uint8)
        d[list(self.detectors)] = 1
        o[list(self.observables)] = 1
        return d, o


class NondeterministicDetectorError(CircuitError):
    pass


# ---------------------------------------------------------------------------
# Reference run: determinism check + constants.
# ---------------------------------------------------------------------------


@dataclass
class ReferenceInfo:
    det_const: tuple[int, ...]
    obs_const: tuple[int, ...]
    meas_affine: list[AffineOutcome]


def _run_symbolic(circuit: Circuit, pauli: PauliConfiguration, plan: LossPlan):
    sim = TableauSimulator(
        circuit.num_qubits,
        mode="symbolic",
        max_symbols=2 * (circuit.num_measurements + 1) + 2 * circuit.num_qubits,
    )
    outcomes: list[AffineOutcome] = []
    injections: dict[int, list[tuple[int, int]]] = {}
    for loc, p in pauli.items():
        if not plan.injection_dropped(loc):
            injections.setdefault(loc.tick, []).append((loc.qubit, p))
    for t, layer in enumerate(circuit.ticks):
        for ins in layer:
            if plan.gate_removed(ins, t):
                continue
            g = ins.gate
            if g in MEASUREMENT_GATES:
                midx = len(outcomes)
                if midx in plan.lost_measurements:
                    outcomes.append(AffineOutcome(np.zeros(1, dtype=np.uint64)))
                else:
                    basis = "Z" if g == "M" else "X"
                    outcomes.append(sim.measure(ins.targets[0], basis))
            elif g in RESET_GATES:
                sim.reset(ins.targets[0], "Z" if g == "R" else "X")
            else:
                sim.apply_gate(g, ins.targets)
        for q, p in injections.get(t, ()):
            sim.apply_pauli(q, p)
    return outcomes


def _xor_affine(outcomes: list[AffineOutcome], idxs) -> AffineOutcome:
    width = max(o.vec.shape[0] for o in outcomes) if outcomes else 1
    acc = np.zeros(width, dtype=np.uint64)
    for i in idxs:
        v = outcomes[i].vec
        acc[: v.shape[0]] ^= v
    return AffineOutcome(acc)


def reference_info(circuit: Circuit) -> ReferenceInfo:
    """No-error reference constants; raises if a detector is nondeterministic."""
    if "reference_info" in circuit._cache:
        return circuit._cache["reference_info"]
    outcomes = _run_symbolic(circuit, PauliConfiguration(), LossPlan(circuit, None))
    det_const = []
    for i, d in enumerate(circuit.detectors):
        a = _xor_affine(outcomes, d)
        if not a.is_deterministic():
            raise NondeterministicDetectorError(
                f"detector {i} is nondeterministic under noiseless execution"
            )
        det_const.append(a.constant)
    obs_const = []
    for i, o in enumerate(circuit.observables):
        a = _xor_affine(outcomes, o)
        if not a.is_deterministic():
            raise NondeterministicDetectorError(
                f"observable {i} is nondeterministic under noiseless execution"
            )
        obs_const.append(a.constant)
    info = ReferenceInfo(tuple(det_const), tuple(obs_const), outcomes)
    circuit._cache["reference_info"] = info
    return info


# ---------------------------------------------------------------------------
# Seeded concrete evaluation (the operational semantics of a noisy shot).
# ---------------------------------------------------------------------------


def evaluate_bits(
    circuit: Circuit,
    pauli: PauliConfiguration,
    loss: LossConfiguration | None,
    rng: np.random.Generator,
) -> np.ndarray:
    """Raw measurement bits of one seeded execution of the pruned circuit."""
    plan = LossPlan(circuit, loss)
    sim = TableauSimulator(circuit.num_qubits, mode="concrete", rng=rng)
    bits = np.zeros(circuit.num_measurements, dtype=np.uint8)
    injections: dict[int, list[tuple[int, int]]] = {}
    for loc, p in pauli.items():
        if not plan.injection_dropped(loc):
            injections.setdefault(loc.tick, []).append((loc.qubit, p))
    midx = 0
    for t, layer in enumerate(circuit.ticks):
        for ins in layer:
            if plan.gate_removed(ins, t):
                if ins.gate in MEASUREMENT_GATES:
                    midx += 1
                continue
            g = ins.gate
            if g in MEASUREMENT_GATES:
                if midx in plan.lost_measurements:
                    bits[midx] = 0
                else:
                    out = sim.measure(ins.targets[0], "Z" if g == "M" else "X")
                    bits[midx] = out.constant
                midx += 1
            elif g in RESET_GATES:
                sim.reset(ins.targets[0], "Z" if g == "R" else "X")
            else:
                sim.apply_gate(g, ins.targets)
        for q, p in injections.get(t, ()):
            sim.apply_pauli(q, p)
    return bits


def pair_from_bits(circuit: Circuit, bits) -> DetectorOutcomePair:
    info = reference_info(circuit)
    dets = tuple(
        i
        for i, d in enumerate(circuit.detectors)
        if (int(sum(bits[m] for m in d)) & 1) != info.det_const[i]
    )
    obs = tuple(
        i
        for i, o in enumerate(circuit.observables)
        if (int(sum(bits[m] for m in o)) & 1) != info.obs_const[i]
    )
    return DetectorOutcomePair(dets, obs)


def evaluate(
    circuit: Circuit,
    pauli: PauliConfiguration = PauliConfiguration(),
    loss: LossConfiguration | None = None,
    seed: int = 0,
) -> DetectorOutcomePair:
    """Stabilizer-simulate the loss-pruned circuit with ``pauli`` injected.

    Measurement randomness is fixed by ``seed``; lost-atom measurements
    read the convention bit 0.
    """
    reference_info(circuit)  # validates detector determinism up front
    rng = np.random.Generator(np.random.Philox(key=seed))
    bits = evaluate_bits(circuit, pauli, loss, rng)
    return pair_from_bits(circuit, bits)


# ---------------------------------------------------------------------------
# Exact outcome sets via the affine symbol structure.
# ---------------------------------------------------------------------------


def outcome_coset(
    circuit: Circuit,
    pauli: PauliConfiguration = PauliConfiguration(),
    loss: LossConfiguration | None = None,
    max_rank: int = 20,
) -> dict[DetectorOutcomePair, float]:
    """The exact set S(p, l) with probabilities (uniform over a coset).

    Works at any circuit size; cost is one symbolic tableau run plus
    2**rank enumeration of the reachable affine subspace.
    """
    info = reference_info(circuit)
    plan = LossPlan(circuit, loss)
    outcomes = _run_symbolic(circuit, pauli, plan)
    nd, no = len(circuit.detectors), len(circuit.observables)
    det_aff = [_xor_affine(outcomes, d) for d in circuit.detectors]
    obs_aff = [_xor_affine(outcomes, o) for o in circuit.observables]

    base_d = tuple(
        i for i in range(nd) if det_aff[i].constant != info.det_const[i]
    )
    base_o = tuple(
        i for i in range(no) if obs_aff[i].constant != info.obs_const[i]
    )
    # Column for each symbol: which detectors/observables it toggles.
    sym_cols: dict[int, tuple[frozenset, frozenset]] = {}
    for i, a in enumerate(det_aff):
        for s in a.symbols():
            d, o = sym_cols.setdefault(s, (frozenset(), frozenset()))
            sym_cols[s] = (d ^ {i}, o)
    for i, a in enumerate(obs_aff):
        for s in a.symbols():
            d, o = sym_cols.setdefault(s, (frozenset(), frozenset()))
            sym_cols[s] = (d, o ^ {i})
    # Reduce the columns to an independent basis over GF(2).
    basis: list[tuple[frozenset, frozenset]] = []
    for col in sym_cols.values():
        cur = col
        for b in basis:
            pivot = _pivot(b)
            if pivot is not None and pivot in _as_union(cur):
                cur = (cur[0] ^ b[0], cur[1] ^ b[1])
        if cur[0] or cur[1]:
            basis.append(cur)
            basis.sort(key=_basis_key)
    if len(basis) > max_rank:
        raise CircuitError(f"outcome coset rank {len(basis)} exceeds {max_rank}")
    out: dict[DetectorOutcomePair, float] = {}
    prob = 1.0 / (1 << len(basis))
    for mask in range(1 << len(basis)):
        d = set(base_d)
        o = set(base_o)
        for j, b in enumerate(basis):
            if (mask >> j) & 1:
                d ^= b[0]
                o ^= b[1]
        pair = DetectorOutcomePair(tuple(sorted(d)), tuple(sorted(o)))
        out[pair] = out.get(pair, 0.0) + prob
    return out


def _as_union(col):
    return {("d", i) for i in col[0]} | {("o", i) for i in col[1]}


def _pivot(col):
    u = _as_union(col)
    return min(u) if u else None


def _basis_key(col):
    return sorted(_as_union(col))


# ---------------------------------------------------------------------------
# Pauli-frame propagation.
# ---------------------------------------------------------------------------


def propagate_frame(circuit: Circuit, pauli: PauliConfiguration) -> DetectorOutcomePair:
    """Fast linear propagation; equals evaluate(circuit, pauli, no-loss)."""
    n = circuit.num_qubits
    fx = np.zeros(n, dtype=np.uint8)
    fz = np.zeros(n, dtype=np.uint8)
    flips = np.zeros(circuit.num_measurements, dtype=np.uint8)
    injections: dict[int, list[tuple[int, int]]] = {}
    for loc, p in pauli.items():
        injections.setdefault(loc.tick, []).append((loc.qubit, p))
    midx = 0
    for t, layer in enumerate(circuit.ticks):
        for ins in layer:
            g = ins.gate
            if g == "H":
                (q,) = ins.targets
                fx[q], fz[q] = fz[q], fx[q]
            elif g == "S":
                (q,) = ins.targets
                fz[q] ^= fx[q]
            elif g == "CNOT":
                c, tq = ins.targets
                fx[tq] ^= fx[c]
                fz[c] ^= fz[tq]
            elif g == "CZ":
                a, b = ins.targets
                fz[b] ^= fx[a]
                fz[a] ^= fx[b]
            elif g == "SWAP":
                a, b = ins.targets
                fx[a], fx[b] = fx[b], fx[a]
                fz[a], fz[b] = fz[b], fz[a]
            elif g in RESET_GATES:
                (q,) = ins.targets
                fx[q] = fz[q] = 0
            else:  # M / MX
                (q,) = ins.targets
                flips[midx] = fx[q] if g == "M" else fz[q]
                midx += 1
        for q, p in injections.get(t, ()):
            px, pz = PAULI_XZ[p]
            fx[q] ^= px
            fz[q] ^= pz
    dets = tuple(
        i
        for i, d in enumerate(circuit.detectors)
        if int(sum(flips[m] for m in d)) & 1
    )
    obs = tuple(
        i
        for i, o in enumerate(circuit.observables)
        if int(sum(flips[m] for m in o)) & 1
    )
    return DetectorOutcomePair(dets, obs)


class FrameIndex:
    """Measurement-sensitivity index for constant-time fault signatures.

    Back-propagates each measurement operator until its support dies at
    resets, then exposes, per spacetime location, bitmasks over the
    measurement indices flipped by an X / Z injection there.  Pauli
    signatures compose by XOR, which makes detector-error-model
    extraction and envelope-pattern enumeration cheap.
    """

    def __init__(self, circuit: Circuit):
        self.circuit = circuit
        n = circuit.num_qubits
        # masks[(q, t)] = (flip mask for X injection, for Z injection)
        masks: dict[tuple[int, int], list[int]] = {}
        for m in circuit.measurements:
            # Operator support as dict wire -> (x, z); start just before
            # the measurement's tick.
            if m.basis == "Z":
                support = {m.qubit: (0, 1)}
            else:
                support = {m.qubit: (1, 0)}
            bit = 1 << m.index
            for t in range(m.tick - 1, -1, -1):
                if not support:
                    break
                # Record sensitivity at boundary "after tick t".
                for q, (ox, oz) in support.items():
                    ent = masks.setdefault((q, t), [0, 0])
                    # X injection flips m iff it anticommutes with (ox, oz).
                    if oz:
                        ent[0] ^= bit
                    if ox:
                        ent[1] ^= bit
                # Pull back through tick t's gates.
                for ins in circuit.ticks[t]:
                    g = ins.gate
                    if g == "H":
                        (q,) = ins.targets
                        if q in support:
                            x, z = support[q]
                            support[q] = (z, x)
                    elif g == "S":
                        # S and S^-1 share the symplectic action X->Y.
                        (q,) = ins.targets
                        if q in support:
                            x, z = support[q]
                            support[q] = (x, z ^ x)
                    elif g == "CNOT":
                        c, tq = ins.targets
                        xc, zc = support.get(c, (0, 0))
                        xt, zt = support.get(tq, (0, 0))
                        nc = (xc, zc ^ zt)
                        nt = (xt ^ xc, zt)
                        _setsup(support, c, nc)
                        _setsup(support, tq, nt)
                    elif g == "CZ":
                        a, b = ins.targets
                        xa, za = support.get(a, (0, 0))
                        xb, zb = support.get(b, (0, 0))
                        _setsup(support, a, (xa, za ^ xb))
                        _setsup(support, b, (xb, zb ^ xa))
                    elif g == "SWAP":
                        a, b = ins.targets
                        sa = support.pop(a, None)
                        sb = support.pop(b, None)
                        if sa is not None:
                            support[b] = sa
                        if sb is not None:
                            support[a] = sb
                    elif g in RESET_GATES:
                        (q,) = ins.targets
                        support.pop(q, None)
                    elif g in MEASUREMENT_GATES:
                        (q,) = ins.targets
                        if q in support:
                            raise CircuitError(
                                "measurement sensitivity crosses another "
                                "measurement; circuit outside supported form"
                            )
        self._masks = {k: tuple(v) for k, v in masks.items()}
        self.det_mask_of_meas = [0] * circuit.num_measurements
        self.obs_mask_of_meas = [0] * circuit.num_measurements
        for i, d in enumerate(circuit.detectors):
            for mm in d:
                self.det_mask_of_meas[mm] ^= 1 << i
        for i, o in enumerate(circuit.observables):
            for mm in o:
                self.obs_mask_of_meas[mm] ^= 1 << i

    def meas_mask(self, loc: SpacetimeLocation, pauli: int) -> int:
        ent = self._masks.get((loc.qubit, loc.tick))
        if ent is None:
            return 0
        if pauli == 1:
            return ent[0]
        if pauli == 3:
            return ent[1]
        if pauli == 2:
            return ent[0] ^ ent[1]
        return 0

    def config_meas_mask(self, pauli: PauliConfiguration) -> int:
        acc = 0
        for loc, p in pauli.items():
            acc ^= self.meas_mask(loc, p)
        return acc

    def signature(self, meas_mask: int) -> tuple[int, int]:
        """(detector flip mask, observable flip mask) of a measurement-flip set."""
        dm = om = 0
        while meas_mask:
            b = meas_mask & -meas_mask
            i = b.bit_length() - 1
            dm ^= self.det_mask_of_meas[i]
            om ^= self.obs_mask_of_meas[i]
            meas_mask ^= b
        return dm, om

    def pair(self, pauli: PauliConfiguration) -> DetectorOutcomePair:
        dm, om = self.signature(self.config_meas_mask(pauli))
        return DetectorOutcomePair(_bits_of(dm), _bits_of(om))


def _setsup(support: dict, q: int, val: tuple[int, int]):
    if val == (0, 0):
        support.pop(q, None)
    else:
        support[q] = val


def _bits_of(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        b = mask & -mask
        out.append(b.bit_length() - 1)
        mask ^= b
    return tuple(out)


def frame_index(circuit: Circuit) -> FrameIndex:
    if "frame_index" not in circuit._cache:
        circuit._cache["frame_index"] = FrameIndex(circuit)
    return circuit._cache["frame_index"]


# ---------------------------------------------------------------------------
# Pauli detector error model.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DemMechanism:
    probability: float
    detectors: tuple[int, ...]
    observables: tuple[int, ...]
    source: str = ""


@dataclass
class PauliDEM:
    mechanisms: list[DemMechanism] = field(default_factory=list)

    def serialize(self) -> str:
        lines = []
        for m in self.mechanisms:
            parts = [f"error({m.probability:.12g})"]
            parts += [f"D{i}" for i in m.detectors]
            parts += [f"L{i}" for i in m.observables]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "PauliDEM":
        mechanisms = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head, *toks = line.split()
            if not head.startswith("error(") or not head.endswith(")"):
                raise ValueError(f"bad DEM line: {line!r}")
            p = float(head[len("error(") : -1])
            dets = tuple(int(t[1:]) for t in toks if t.startswith("D"))
            obs = tuple(int(t[1:]) for t in toks if t.startswith("L"))
            mechanisms.append(DemMechanism(p, dets, obs))
        return cls(mechanisms)


def merge_mechanisms(raw: list[tuple[float, tuple[int, ...], tuple[int, ...], str]]) -> PauliDEM:
    """Combine mechanisms with identical signatures: p' = p1(1-p2) + p2(1-p1)."""
    merged: dict[tuple, list] = {}
    for p, dets, obs, src in raw:
        key = (dets, obs)
        if key in merged:
            q = merged[key][0]
            merged[key][0] = q * (1 - p) + p * (1 - q)
        else:
            merged[key] = [p, src]
    mechanisms = [
        DemMechanism(v[0], k[0], k[1], v[1])
        for k, v in merged.items()
        if v[0] > 0.0
    ]
    mechanisms.sort(key=lambda m: (m.detectors, m.observables))
    return PauliDEM(mechanisms)


def extract_pauli_dem(circuit: Circuit, noise) -> PauliDEM:
    """One merged mechanism per independent Pauli fault of the noise model.

    ``noise`` must provide ``pauli_fault_sites(circuit)`` yielding
    ``(probability, [(location, pauli), ...], label)`` triples.
    """
    reference_info(circuit)
    idx = frame_index(circuit)
    raw = []
    for p, components, label in noise.pauli_fault_sites(circuit):
        mask = 0
        for loc, pl in components:
            mask ^= idx.meas_mask(loc, pl)
        dm, om = idx.signature(mask)
        raw.append((p, _bits_of(dm), _bits_of(om), label))
    return merge_mechanisms(raw)
