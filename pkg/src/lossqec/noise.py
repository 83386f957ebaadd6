"""Circuit-level noise: depolarizing Pauli faults, per-operation atom
loss, and loss-readout errors, with a seedable shot sampler.

Shots are independently derivable from ``(seed, shot index)`` via
counter-based bit generators, so workers may sample disjoint index
ranges with no coordination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import (
    Circuit,
    CircuitError,
    LossConfiguration,
    MEASUREMENT_GATES,
    RESET_GATES,
)
from .pauli import PAULI_XZ, PauliConfiguration, SpacetimeLocation
from .sim import PauliDEM, extract_pauli_dem, frame_index, reference_info
from .tableau_fast import compile_shots, run_shot

PAULI_FLOOR = 1e-9

_TWO_QUBIT_PAULIS = [(a, b) for a in range(4) for b in range(4) if (a, b) != (0, 0)]


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing + loss + loss-readout noise strengths.

    ``p_pauli`` drives one-qubit depolarizing after 1q operations and
    resets, before measurements, on idling wires (when enabled), and
    two-qubit depolarizing after CZ/CNOT.  Loss strikes after each
    operation: rate ``p_loss`` on 1q operations and resets, ``p_loss/2``
    per atom on two-qubit gates and shuttles.  Loss-resolving readouts
    misreport with probability ``p_readout/2`` in each direction.
    """

    p_pauli: float
    p_loss: float = 0.0
    p_readout: float = 0.0
    idle: bool = True
    reset_scale: float = 1.0
    meas_scale: float = 1.0
    correlated_loss_eta: float = 0.0

    def __post_init__(self):
        for name in ("p_pauli", "p_loss", "p_readout", "correlated_loss_eta"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0) and not (name == "correlated_loss_eta" and v == 1.0):
                raise CircuitError(f"{name}={v} outside [0, 1)")

    @classmethod
    def from_total(cls, p: float, eta: float, **kwargs) -> "NoiseModel":
        """The total-rate parameterization p_loss = p_readout = p*eta."""
        if not 0.0 <= eta <= 1.0:
            raise CircuitError("eta must be in [0, 1]")
        return cls(
            p_pauli=max(p * (1.0 - eta), PAULI_FLOOR),
            p_loss=p * eta,
            p_readout=p * eta,
            **kwargs,
        )

    # -- site enumeration ------------------------------------------------------

    def pauli_fault_sites(self, circuit: Circuit):
        """Independent Pauli mechanisms: (prob, [(loc, pauli), ...], label)."""
        out = []
        for q, t, scale, label in self._pauli_1q_sites(circuit):
            p = self.p_pauli * scale
            if p <= 0:
                continue
            for pl in (1, 2, 3):
                out.append((p / 3, [(SpacetimeLocation(q, t), pl)], label))
        for a, b, t in self._pauli_2q_sites(circuit):
            if self.p_pauli <= 0:
                continue
            for pa, pb in _TWO_QUBIT_PAULIS:
                comps = []
                if pa:
                    comps.append((SpacetimeLocation(a, t), pa))
                if pb:
                    comps.append((SpacetimeLocation(b, t), pb))
                out.append((self.p_pauli / 15, comps, f"2q@({a},{b},{t})"))
        return out

    def _pauli_1q_sites(self, circuit: Circuit):
        sites = []
        for t, layer in enumerate(circuit.ticks):
            touched = set()
            for ins in layer:
                touched.update(ins.targets)
                g = ins.gate
                if g in ("H", "S"):
                    sites.append((ins.targets[0], t, 1.0, f"1q@({ins.targets[0]},{t})"))
                elif g in RESET_GATES:
                    sites.append(
                        (ins.targets[0], t, self.reset_scale, f"reset@({ins.targets[0]},{t})")
                    )
                elif g in MEASUREMENT_GATES and t > 0:
                    sites.append(
                        (ins.targets[0], t - 1, self.meas_scale, f"meas@({ins.targets[0]},{t})")
                    )
            if self.idle:
                for q in circuit.live_wires_at_tick(t) - touched:
                    sites.append((q, t, 1.0, f"idle@({q},{t})"))
        return sites

    def _pauli_2q_sites(self, circuit: Circuit):
        sites = []
        for t, layer in enumerate(circuit.ticks):
            for ins in layer:
                if ins.gate in ("CZ", "CNOT"):
                    sites.append((ins.targets[0], ins.targets[1], t))
        return sites

    def loss_sites(self, circuit: Circuit):
        """(location, probability) of independent loss draws."""
        sites = []
        for t, layer in enumerate(circuit.ticks):
            for ins in layer:
                g = ins.gate
                if g in RESET_GATES or g in ("H", "S"):
                    sites.append((SpacetimeLocation(ins.targets[0], t), self.p_loss))
                elif g in ("CZ", "CNOT", "SWAP"):
                    for q in ins.targets:
                        sites.append((SpacetimeLocation(q, t), self.p_loss / 2))
        return sites

    def gate_loss_sites(self, circuit: Circuit):
        """Per CZ/CNOT gate, the two post-gate atom locations (for the
        correlated-loss model, which attaches loss only to entangling gates)."""
        out = []
        for t, layer in enumerate(circuit.ticks):
            for ins in layer:
                if ins.gate in ("CZ", "CNOT"):
                    a, b = ins.targets
                    out.append((SpacetimeLocation(a, t), SpacetimeLocation(b, t)))
        return out


@dataclass
class Shot:
    """One sampled experiment outcome, plus the injected ground truth."""

    detectors: np.ndarray
    readout: np.ndarray
    observables: np.ndarray
    n_loss: int = 0
    n_pauli: int = 0
    n_pair_loss: int = 0

    def to_line(self) -> str:
        d = _bits_to_hex(self.detectors)
        l = _bits_to_hex(self.readout)
        o = "".join(str(int(b)) for b in self.observables)
        return f"DETS {d} LOSS {l} OBS {o} NL {self.n_loss} NP {self.n_pauli}"

    @classmethod
    def from_line(cls, line: str, n_det: int, n_read: int) -> "Shot":
        toks = line.split()
        fields = {toks[i]: toks[i + 1] for i in range(0, len(toks) - 1, 2)}
        return cls(
            detectors=_hex_to_bits(fields["DETS"], n_det),
            readout=_hex_to_bits(fields["LOSS"], n_read),
            observables=np.array([int(b) for b in fields["OBS"]], dtype=np.uint8),
            n_loss=int(fields.get("NL", 0)),
            n_pauli=int(fields.get("NP", 0)),
        )


def _bits_to_hex(bits: np.ndarray) -> str:
    if len(bits) == 0:
        return "0"
    val = 0
    for i, b in enumerate(bits):
        if b:
            val |= 1 << i
    return format(val, "x")


def _hex_to_bits(h: str, n: int) -> np.ndarray:
    val = int(h, 16)
    return np.array([(val >> i) & 1 for i in range(n)], dtype=np.uint8)


class ShotSampler:
    """Seedable sampler producing (detectors, loss readout, truth) shots."""

    def __init__(self, circuit: Circuit, model: NoiseModel, correlated: bool = False):
        self.circuit = circuit
        self.model = model
        self.correlated = correlated
        self.info = reference_info(circuit)
        self.compiler = compile_shots(circuit)
        self.index = frame_index(circuit)
        if correlated:
            pairs = model.gate_loss_sites(circuit)
            self.pair_locs = pairs
        else:
            sites = model.loss_sites(circuit)
            self.loss_locs = [s[0] for s in sites]
            self.loss_probs = np.array([s[1] for s in sites])
        self.pauli_sites = []
        for p, comps, _ in model.pauli_fault_sites(circuit):
            self.pauli_sites.append((p, comps))
        self.pauli_probs = np.array([p for p, _ in self.pauli_sites])
        # readout bookkeeping
        self.readout_meas = np.array(
            [m.index for m in circuit.loss_resolving_measurements], dtype=np.int64
        )
        self.lifetime_readout = {}
        for lt in circuit.atom_lifetimes:
            if lt.measurement is not None:
                m = circuit.measurements[lt.measurement]
                if m.loss_resolving:
                    self.lifetime_readout[lt.index] = m.readout_index
        self.det_const = np.array(self.info.det_const, dtype=np.uint8)
        self.obs_const = np.array(self.info.obs_const, dtype=np.uint8)
        # Canonical reference sample: every random outcome drawn as 0.
        self.ref_bits = np.array(
            [o.constant for o in self.info.meas_affine], dtype=np.uint8
        )
        self._n_rand_bits = self.compiler.num_measurements + sum(
            1 for t in circuit.ticks for i in t if i.gate in RESET_GATES
        )

    def rng_for(self, seed: int, index: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[seed, index]))

    def sample(self, seed: int, index: int) -> Shot:
        rng = self.rng_for(seed, index)
        # 1. losses
        n_pair = 0
        if self.correlated:
            locs = []
            m = self.model
            for la, lb in self.pair_locs:
                u = rng.random()
                if u < m.p_loss * m.correlated_loss_eta / 2:
                    locs.extend((la, lb))
                    n_pair += 1
                else:
                    if rng.random() < m.p_loss * (1 - m.correlated_loss_eta) / 2:
                        locs.append(la)
                    if rng.random() < m.p_loss * (1 - m.correlated_loss_eta) / 2:
                        locs.append(lb)
        else:
            if self.model.p_loss > 0:
                draw = rng.random(len(self.loss_probs)) < self.loss_probs
                locs = [self.loss_locs[i] for i in np.nonzero(draw)[0]]
            else:
                locs = []
        # 2. Pauli faults
        fault_comps = []
        if self.model.p_pauli > 0 and len(self.pauli_probs):
            draw = np.nonzero(rng.random(len(self.pauli_probs)) < self.pauli_probs)[0]
            for i in draw:
                fault_comps.append(self.pauli_sites[i][1])

        loss = LossConfiguration(self.circuit, locs) if locs else None
        lost_lifetimes = loss.lifetimes(self.circuit) if loss else {}
        bits = self._run(lost_lifetimes, fault_comps, rng)

        # 3. readout: true flags then corruption
        readout = np.zeros(self.circuit.num_readouts, dtype=np.uint8)
        for lt_idx in lost_lifetimes:
            ri = self.lifetime_readout.get(lt_idx)
            if ri is not None:
                readout[ri] = 1
        if self.model.p_readout > 0 and len(readout):
            u = rng.random(len(readout))
            flip_fp = (readout == 0) & (u < self.model.p_readout / 2)
            flip_fn = (readout == 1) & (u < self.model.p_readout / 2)
            for ri in np.nonzero(flip_fp)[0]:
                readout[ri] = 1
                bits[self.readout_meas[ri]] = 0  # convention bit replaces the reading
            for ri in np.nonzero(flip_fn)[0]:
                readout[ri] = 0
                bits[self.readout_meas[ri]] = rng.integers(0, 2)

        dets = (self.compiler.det_mat @ bits) % 2 ^ self.det_const
        obs = (self.compiler.obs_mat @ bits) % 2 ^ self.obs_const
        return Shot(
            dets.astype(np.uint8),
            readout,
            obs.astype(np.uint8),
            n_loss=len(lost_lifetimes),
            n_pauli=len(fault_comps),
            n_pair_loss=n_pair,
        )

    def _run(self, lost_lifetimes, fault_comps, rng) -> np.ndarray:
        comp = self.compiler
        circuit = self.circuit
        loss_orders = {}
        for lt_idx, loc in lost_lifetimes.items():
            lt = circuit.atom_lifetimes[lt_idx]
            loss_orders[lt_idx] = lt.locations().index(loc)
        injections = []
        for comps in fault_comps:
            for loc, pl in comps:
                hit = comp.lifetime_of_loc.get((loc.qubit, loc.tick))
                if hit is not None and hit[0] in loss_orders:
                    if loss_orders[hit[0]] <= hit[1]:
                        continue  # injection on an already-lost atom
                injections.append((loc.tick, loc.qubit, pl))
        if not lost_lifetimes and not injections:
            return self.ref_bits.copy()
        if not lost_lifetimes:
            # Pure-Pauli fast path: flips XORed onto the canonical reference.
            mask = 0
            for t, q, pl in injections:
                mask ^= self.index.meas_mask(SpacetimeLocation(q, t), pl)
            bits = self.ref_bits.copy()
            while mask:
                low = mask & -mask
                bits[low.bit_length() - 1] ^= 1
                mask ^= low
            return bits
        removed = comp.removed_ops(loss_orders)
        lost_meas = np.zeros(comp.num_measurements, dtype=np.uint8)
        for lt_idx in lost_lifetimes:
            mi = comp.lifetime_meas[lt_idx]
            if mi is not None:
                lost_meas[mi] = 1
        injections.sort()
        inj_tick = np.array([i[0] for i in injections], dtype=np.int32)
        inj_wire = np.array([i[1] for i in injections], dtype=np.int32)
        inj_px = np.array([PAULI_XZ[i[2]][0] for i in injections], dtype=np.uint8)
        inj_pz = np.array([PAULI_XZ[i[2]][1] for i in injections], dtype=np.uint8)
        rand_bits = rng.integers(0, 2, size=self._n_rand_bits).astype(np.uint8)
        bits = np.zeros(comp.num_measurements, dtype=np.uint8)
        run_shot(
            comp.ops,
            comp.opa,
            comp.opb,
            comp.tick_of,
            comp.meas_of,
            removed,
            lost_meas,
            inj_tick,
            inj_wire,
            inj_px,
            inj_pz,
            comp.n,
            rand_bits,
            bits,
        )
        return bits


def sample_shots(circuit: Circuit, model: NoiseModel, n: int, seed: int):
    """Iterate ``n`` noise shots; deterministic in (circuit, model, n, seed)."""
    sampler = ShotSampler(circuit, model)
    for i in range(n):
        yield sampler.sample(seed, i)


def sample_correlated(circuit: Circuit, model: NoiseModel, n: int, seed: int):
    """Entangling-gate-site loss sampling with correlated pair losses."""
    sampler = ShotSampler(circuit, model, correlated=True)
    for i in range(n):
        yield sampler.sample(seed, i)


def apply_noise_model(circuit: Circuit, model: NoiseModel):
    """Fault-location census plus the merged Pauli detector error model."""
    dem = extract_pauli_dem(circuit, model)
    census = {
        "pauli_1q": len(model._pauli_1q_sites(circuit)),
        "pauli_2q": len(model._pauli_2q_sites(circuit)),
        "loss": len(model.loss_sites(circuit)),
    }
    return census, dem
