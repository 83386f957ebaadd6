"""Tick-structured Clifford circuit IR with atom-lifetime tracking.

Wires carry circuit *roles*; the atoms occupying them are tracked
separately.  A SWAP instruction models tweezer shuttling: the two wire
states exchange and the two atoms exchange wires, so an atom lifetime is
a chain of per-wire segments threaded through the SWAPs it rides.

Loss convention: a loss (or injected Pauli) at location ``(q, t)`` acts
after the gates of tick ``t``.  A loss right after an atom's reset is
located at the reset's tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .pauli import SpacetimeLocation

GATE_1Q = frozenset({"H", "S", "R", "RX", "M", "MX"})
GATE_2Q = frozenset({"CZ", "CNOT", "SWAP"})
UNITARY_GATES = frozenset({"H", "S", "CZ", "CNOT", "SWAP"})
RESET_GATES = frozenset({"R", "RX"})
MEASUREMENT_GATES = frozenset({"M", "MX"})
ALL_GATES = GATE_1Q | GATE_2Q


class CircuitError(ValueError):
    """Semantic validation failure when building or parsing a circuit."""


@dataclass(frozen=True)
class Instruction:
    gate: str
    targets: tuple[int, ...]
    loss_resolving: bool = False

    def __post_init__(self):
        if self.gate not in ALL_GATES:
            raise CircuitError(f"unknown gate {self.gate!r}")
        want = 2 if self.gate in GATE_2Q else 1
        if len(self.targets) != want:
            raise CircuitError(
                f"{self.gate} expects {want} target(s), got {len(self.targets)}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise CircuitError(f"{self.gate} has duplicate target in {self.targets}")
        if any(t < 0 for t in self.targets):
            raise CircuitError("negative qubit index")
        if self.loss_resolving and self.gate not in MEASUREMENT_GATES:
            raise CircuitError("loss_resolving flag is only valid on M/MX")


@dataclass(frozen=True)
class Measurement:
    """One measurement event, in circuit order."""

    index: int
    tick: int
    qubit: int
    basis: str  # "Z" for M, "X" for MX
    loss_resolving: bool
    readout_index: int | None  # index among loss-resolving measurements


@dataclass(frozen=True)
class AtomLifetime:
    """One atom's reset-to-measurement life, as wire segments.

    Each segment ``(qubit, start, end)`` means the atom occupies that
    wire for loss locations with ``start <= tick < end``.  ``end`` of the
    final segment is the measurement tick (or one past the last tick if
    the atom is never measured).
    """

    index: int
    segments: tuple[tuple[int, int, int], ...]
    measurement: int | None  # measurement index, None if unterminated

    @property
    def birth(self) -> tuple[int, int]:
        q, s, _ = self.segments[0]
        return q, s

    def contains(self, loc: SpacetimeLocation) -> bool:
        return any(q == loc.qubit and s <= loc.tick < e for q, s, e in self.segments)

    def locations(self) -> list[SpacetimeLocation]:
        """All candidate loss locations on this lifetime, in time order."""
        out = []
        for q, s, e in self.segments:
            out.extend(SpacetimeLocation(q, t) for t in range(s, e))
        return out

    def wire_at(self, tick: int) -> int | None:
        """Wire the atom occupies just after ``tick``, or None if dead."""
        for q, s, e in self.segments:
            if s <= tick < e:
                return q
        return None


class Circuit:
    """Validated, immutable-after-construction circuit.

    Parameters
    ----------
    ticks : nested instruction layers; within a tick all targets are disjoint.
    detectors : measurement-index sets whose parities are deterministic
        under noiseless execution (checked lazily by the simulator).
    observables : measurement-index sets defining the protected logical bits.
    meta : free-form builder metadata (coordinates, schedules, ...), not
        part of equality.
    """

    def __init__(
        self,
        ticks: Sequence[Sequence[Instruction]],
        detectors: Sequence[Iterable[int]] = (),
        observables: Sequence[Iterable[int]] = (),
        meta: dict | None = None,
    ):
        self.ticks: tuple[tuple[Instruction, ...], ...] = tuple(
            tuple(sorted(layer, key=lambda ins: ins.targets)) for layer in ticks
        )
        self.meta = dict(meta or {})
        self._validate_ticks()
        self._build_measurements()
        self._build_lifetimes()

        self.detectors: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(set(d))) for d in detectors
        )
        self.detectors = tuple(
            sorted(self.detectors, key=lambda d: (max(d), d) if d else (-1,))
        )
        obs = [tuple(sorted(set(o))) for o in observables]
        self.observables: tuple[tuple[int, ...], ...] = tuple(obs)
        nmeas = len(self.measurements)
        for d in self.detectors:
            if not d:
                raise CircuitError("empty detector")
            if d[-1] >= nmeas:
                raise CircuitError(f"detector references measurement {d[-1]} of {nmeas}")
        for o in self.observables:
            if o and o[-1] >= nmeas:
                raise CircuitError(f"observable references measurement {o[-1]} of {nmeas}")
        self._cache: dict = {}

    # -- construction helpers -------------------------------------------------

    def _validate_ticks(self):
        self.num_qubits = 0
        for t, layer in enumerate(self.ticks):
            seen: set[int] = set()
            for ins in layer:
                for q in ins.targets:
                    if q in seen:
                        raise CircuitError(f"qubit {q} used twice in tick {t}")
                    seen.add(q)
                    self.num_qubits = max(self.num_qubits, q + 1)

    def _build_measurements(self):
        meas: list[Measurement] = []
        readout = 0
        for t, layer in enumerate(self.ticks):
            for ins in layer:
                if ins.gate in MEASUREMENT_GATES:
                    ridx = readout if ins.loss_resolving else None
                    if ins.loss_resolving:
                        readout += 1
                    meas.append(
                        Measurement(
                            index=len(meas),
                            tick=t,
                            qubit=ins.targets[0],
                            basis="Z" if ins.gate == "M" else "X",
                            loss_resolving=ins.loss_resolving,
                            readout_index=ridx,
                        )
                    )
        self.measurements: tuple[Measurement, ...] = tuple(meas)
        self.num_measurements = len(meas)
        self.loss_resolving_measurements: tuple[Measurement, ...] = tuple(
            m for m in meas if m.loss_resolving
        )
        self.num_readouts = readout

    def _build_lifetimes(self):
        n = self.num_qubits
        # Per wire: index of the lifetime currently occupying it, or -1.
        live = [-1] * n
        seg_start = [0] * n
        lifetimes: list[list] = []  # [segments, measurement_index]
        meas_iter = iter(self.measurements)
        next_meas = next(meas_iter, None)

        def close_segment(q: int, end: int):
            lid = live[q]
            if lid >= 0 and end > seg_start[q]:
                lifetimes[lid][0].append((q, seg_start[q], end))

        for t, layer in enumerate(self.ticks):
            for ins in layer:
                g = ins.gate
                if g in RESET_GATES:
                    (q,) = ins.targets
                    if live[q] >= 0:
                        raise CircuitError(
                            f"reset on live atom at wire {q}, tick {t}"
                        )
                    live[q] = len(lifetimes)
                    seg_start[q] = t
                    lifetimes.append([[], None])
                elif g in MEASUREMENT_GATES:
                    (q,) = ins.targets
                    if live[q] < 0:
                        raise CircuitError(
                            f"measurement without live atom at wire {q}, tick {t}"
                        )
                    while next_meas is not None and (
                        next_meas.tick < t
                        or (next_meas.tick == t and next_meas.qubit != q)
                    ):
                        next_meas = next(meas_iter, None)
                    assert next_meas is not None and next_meas.qubit == q
                    close_segment(q, t)
                    lifetimes[live[q]][1] = next_meas.index
                    next_meas = next(meas_iter, None)
                    live[q] = -1
                elif g == "SWAP":
                    a, b = ins.targets
                    # Atoms exchange wires after this tick.
                    close_segment(a, t)
                    close_segment(b, t)
                    live[a], live[b] = live[b], live[a]
                    seg_start[a] = seg_start[b] = t
                else:
                    for q in ins.targets:
                        if live[q] < 0:
                            raise CircuitError(
                                f"{g} on dead wire {q} at tick {t}"
                            )
        for q in range(n):
            close_segment(q, len(self.ticks))

        self.atom_lifetimes: tuple[AtomLifetime, ...] = tuple(
            AtomLifetime(i, tuple(segs), m)
            for i, (segs, m) in enumerate(lifetimes)
            if segs
        )
        # Location (q, t) -> lifetime index, and measurement -> lifetime.
        self._loc_to_lifetime: dict[tuple[int, int], int] = {}
        self._meas_to_lifetime: dict[int, int] = {}
        for lt in self.atom_lifetimes:
            for q, s, e in lt.segments:
                for t in range(s, e):
                    self._loc_to_lifetime[(q, t)] = lt.index
            if lt.measurement is not None:
                self._meas_to_lifetime[lt.measurement] = lt.index

    # -- queries ---------------------------------------------------------------

    @property
    def num_ticks(self) -> int:
        return len(self.ticks)

    def lifetime_at(self, loc: SpacetimeLocation) -> AtomLifetime:
        try:
            return self.atom_lifetimes[self._loc_to_lifetime[(loc.qubit, loc.tick)]]
        except KeyError:
            raise CircuitError(f"no atom lifetime covers {loc}") from None

    def lifetime_of_measurement(self, meas_index: int) -> AtomLifetime:
        return self.atom_lifetimes[self._meas_to_lifetime[meas_index]]

    def live_wires_at_tick(self, t: int) -> set[int]:
        """Wires that carry a live atom just after tick ``t`` executes."""
        out = set()
        for lt in self.atom_lifetimes:
            for q, s, e in lt.segments:
                if s <= t < e:
                    out.add(q)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Circuit):
            return NotImplemented
        return (
            self.ticks == other.ticks
            and self.detectors == other.detectors
            and self.observables == other.observables
        )

    def __repr__(self) -> str:
        return (
            f"Circuit(qubits={self.num_qubits}, ticks={self.num_ticks}, "
            f"measurements={self.num_measurements}, detectors={len(self.detectors)}, "
            f"observables={len(self.observables)})"
        )


# -- loss bookkeeping -----------------------------------------------------------


class LossConfiguration:
    """A set of loss locations, normalized to one loss per atom lifetime.

    Normalization keeps the earliest loss on each lifetime; later losses
    of an already-lost atom are ignored.
    """

    __slots__ = ("locations",)

    def __init__(self, circuit: Circuit, locations: Iterable[SpacetimeLocation]):
        per_lifetime: dict[int, SpacetimeLocation] = {}
        order = {}
        for lt in circuit.atom_lifetimes:
            for i, loc in enumerate(lt.locations()):
                order[loc] = i
        for loc in locations:
            loc = SpacetimeLocation(*loc)
            lt = circuit.lifetime_at(loc)  # raises if outside every lifetime
            cur = per_lifetime.get(lt.index)
            if cur is None or order[loc] < order[cur]:
                per_lifetime[lt.index] = loc
        self.locations: frozenset[SpacetimeLocation] = frozenset(per_lifetime.values())

    def lifetimes(self, circuit: Circuit) -> dict[int, SpacetimeLocation]:
        return {circuit.lifetime_at(loc).index: loc for loc in self.locations}

    def __len__(self) -> int:
        return len(self.locations)

    def __bool__(self) -> bool:
        return bool(self.locations)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LossConfiguration):
            return NotImplemented
        return self.locations == other.locations

    def __hash__(self) -> int:
        return hash(self.locations)

    def __repr__(self) -> str:
        locs = ", ".join(f"(q{l.qubit},t{l.tick})" for l in sorted(self.locations))
        return f"LossConfiguration({locs})"


@dataclass(frozen=True)
class LossReadout:
    """One bit per loss-resolving measurement; 1 means reported lost."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise CircuitError("loss readout bits must be 0/1")

    @classmethod
    def of(cls, circuit: Circuit, loss: LossConfiguration) -> "LossReadout":
        """The noiseless readout function: flags lifetimes containing a loss."""
        bits = [0] * circuit.num_readouts
        for loc in loss.locations:
            lt = circuit.lifetime_at(loc)
            if lt.measurement is not None:
                m = circuit.measurements[lt.measurement]
                if m.loss_resolving:
                    bits[m.readout_index] = 1
        return cls(tuple(bits))

    def flagged(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)


class LossPlan:
    """Concrete gate-removal consequences of a loss configuration.

    A gate at tick ``t`` whose post-gate location ``(q, t)`` lies strictly
    after an atom's loss location is removed; two-qubit gates are removed
    entirely.  SWAP is retained: shuttling relocates atoms (including an
    absent one) rather than acting on them.  The lost atom's terminating
    measurement reads the convention bit 0 and reports "lost".
    """

    __slots__ = ("removed_locations", "lost_measurements", "_drop")

    def __init__(self, circuit: Circuit, loss: LossConfiguration | None):
        removed: set[tuple[int, int]] = set()  # (qubit, tick) with gates removed
        lost_meas: set[int] = set()
        drop: set[tuple[int, int]] = set()  # injection locations to drop
        if loss is not None:
            for lt_idx, loc in loss.lifetimes(circuit).items():
                lt = circuit.atom_lifetimes[lt_idx]
                locs = lt.locations()
                k = locs.index(loc)
                removed.update((q, t) for q, t in locs[k + 1 :])
                drop.update((q, t) for q, t in locs[k:])
                if lt.measurement is not None:
                    lost_meas.add(lt.measurement)
        self.removed_locations = removed
        self.lost_measurements = frozenset(lost_meas)
        self._drop = drop

    def gate_removed(self, ins: Instruction, tick: int) -> bool:
        if ins.gate == "SWAP":
            return False
        if ins.gate in MEASUREMENT_GATES:
            return False  # handled via lost_measurements
        return any((q, tick) in self.removed_locations for q in ins.targets)

    def injection_dropped(self, loc: SpacetimeLocation) -> bool:
        return (loc.qubit, loc.tick) in self._drop


def run_reference(circuit: Circuit, loss: LossConfiguration) -> Circuit:
    """The loss-pruned circuit, with lost measurements marked in meta.

    Monotone: adding losses only ever removes more gates.
    """
    plan = LossPlan(circuit, loss)
    new_ticks = []
    for t, layer in enumerate(circuit.ticks):
        new_ticks.append([ins for ins in layer if not plan.gate_removed(ins, t)])
    meta = dict(circuit.meta)
    meta["lost_measurements"] = tuple(sorted(plan.lost_measurements))
    return Circuit(new_ticks, circuit.detectors, circuit.observables, meta=meta)


# -- CNOT -> CZ/H compilation -----------------------------------------------------


def compile_to_czh(circuit: Circuit) -> Circuit:
    """Expand every CNOT(a, b) into H(b); CZ(a, b); H(b) on adjacent ticks.

    SWAP is retained (shuttling, not a gate product).  Stacked CNOT
    expansions are emitted verbatim; no H cancellation is applied.  The
    returned circuit's ``meta["source_tick_end"][t]`` gives the compiled
    tick holding the *last* sub-tick of source tick ``t``, which is where
    an error located after source tick ``t`` lands.
    """
    new_ticks: list[list[Instruction]] = []
    tick_end: list[int] = []
    for layer in circuit.ticks:
        cnots = [ins for ins in layer if ins.gate == "CNOT"]
        rest = [ins for ins in layer if ins.gate != "CNOT"]
        if not cnots:
            new_ticks.append(list(layer))
            tick_end.append(len(new_ticks) - 1)
            continue
        hs = [Instruction("H", (ins.targets[1],)) for ins in cnots]
        czs = [Instruction("CZ", ins.targets) for ins in cnots]
        new_ticks.append(hs)
        new_ticks.append(czs + rest)
        new_ticks.append([Instruction("H", (ins.targets[1],)) for ins in cnots])
        tick_end.append(len(new_ticks) - 1)
    meta = dict(circuit.meta)
    meta["source_tick_end"] = tick_end
    return Circuit(new_ticks, circuit.detectors, circuit.observables, meta=meta)


def map_location_to_czh(compiled: Circuit, loc: SpacetimeLocation) -> SpacetimeLocation:
    """Map an error location on the source circuit onto the compiled one."""
    tick_end = compiled.meta["source_tick_end"]
    return SpacetimeLocation(loc.qubit, tick_end[loc.tick])
