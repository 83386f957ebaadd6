"""Shared randomized-circuit machinery for the test suite."""

from __future__ import annotations

import numpy as np

from lossqec.circuit import Circuit, Instruction, LossPlan
from lossqec.pauli import PauliConfiguration
from lossqec.sim import _run_symbolic, _xor_affine


def random_circuit(
    rng: np.random.Generator,
    nq: int = 4,
    nticks: int = 8,
    gate_set: tuple[str, ...] = ("H", "S", "CZ", "CNOT", "SWAP"),
    p_meas: float = 0.1,
    p_revive: float = 0.5,
) -> Circuit:
    """A random well-formed circuit over the given gate set.

    Every wire starts with a reset; mid-circuit measurements kill wires
    which may be revived by later resets; everything still alive gets a
    final loss-resolving measurement.
    """
    one_q = [g for g in gate_set if g in ("H", "S")]
    two_q = [g for g in gate_set if g in ("CZ", "CNOT", "SWAP")]
    ticks = [[Instruction(str(rng.choice(["R", "RX"])), (q,)) for q in range(nq)]]
    live = [True] * nq
    for _ in range(nticks):
        layer = []
        used: set[int] = set()
        for q in range(nq):
            if q in used or not live[q]:
                continue
            r = rng.random()
            if r < 0.3 and one_q:
                layer.append(Instruction(str(rng.choice(one_q)), (q,)))
                used.add(q)
            elif r < 0.55 and two_q:
                partners = [p for p in range(nq) if p != q and p not in used and live[p]]
                if partners:
                    p = int(rng.choice(partners))
                    layer.append(Instruction(str(rng.choice(two_q)), (q, p)))
                    used.update((q, p))
            elif r < 0.55 + p_meas:
                layer.append(
                    Instruction(str(rng.choice(["M", "MX"])), (q,), loss_resolving=True)
                )
                used.add(q)
                live[q] = False
        for q in range(nq):
            if not live[q] and q not in used and rng.random() < p_revive:
                layer.append(Instruction(str(rng.choice(["R", "RX"])), (q,)))
                used.add(q)
                live[q] = True
        if layer:
            ticks.append(layer)
    ticks.append(
        [Instruction("M", (q,), loss_resolving=True) for q in range(nq) if live[q]]
    )
    return Circuit(ticks)


def with_deterministic_annotations(
    circuit: Circuit,
    rng: np.random.Generator,
    max_detectors: int = 4,
    max_observables: int = 1,
    tries: int = 60,
) -> Circuit:
    """Attach deterministic measurement parities as detectors/observables."""
    outs = _run_symbolic(circuit, PauliConfiguration(), LossPlan(circuit, None))
    nm = len(outs)
    dets: list[tuple[int, ...]] = []
    obs: list[tuple[int, ...]] = []
    if nm == 0:
        return circuit
    for _ in range(tries):
        k = int(rng.integers(1, min(4, nm) + 1))
        sel = tuple(sorted(rng.choice(nm, size=k, replace=False).tolist()))
        if not _xor_affine(outs, sel).is_deterministic():
            continue
        if len(dets) < max_detectors and sel not in dets:
            dets.append(sel)
        elif len(obs) < max_observables and sel not in obs and sel not in dets:
            obs.append(sel)
    return Circuit(circuit.ticks, dets, obs)


def random_loss_locations(circuit: Circuit, rng: np.random.Generator, k: int):
    locs = [l for lt in circuit.atom_lifetimes for l in lt.locations()]
    if not locs or k == 0:
        return []
    sel = rng.choice(len(locs), size=min(k, len(locs)), replace=False)
    return [locs[i] for i in np.atleast_1d(sel)]


def random_pauli_config(circuit: Circuit, rng: np.random.Generator, k: int):
    locs = [l for lt in circuit.atom_lifetimes for l in lt.locations()]
    cfg = PauliConfiguration()
    for _ in range(k):
        if not locs:
            break
        l = locs[int(rng.integers(len(locs)))]
        cfg = cfg.compose(
            PauliConfiguration.single(l.qubit, l.tick, int(rng.integers(1, 4)))
        )
    return cfg
