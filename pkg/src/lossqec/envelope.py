"""Pauli envelopes for atom loss.

A lost atom's effect on detectors is bounded by a set of Pauli
configurations built from full single-qubit Pauli freedom at a few slots:
the loss location, right after each later Hadamard on that atom, and just
before its terminating measurement.  A readout that only reveals *that*
an atom was lost (not when) gets the union over candidate loss positions;
independent losses compose branchwise.

Slots live on the CZ/H compiled form of the circuit, which is also where
the role-change bookkeeping for CNOT circuits comes from.
"""

from __future__ import annotations

from dataclasses import dataclass

from .circuit import Circuit, CircuitError, compile_to_czh, map_location_to_czh
from .pauli import PauliConfiguration, SpacetimeLocation
from .sim import DetectorOutcomePair, frame_index, _bits_of

PAULI_CHOICES = (1, 2, 3)  # X, Y, Z; identity handled implicitly


@dataclass(frozen=True)
class EnvelopeBranch:
    """One composable product of full-Pauli slots."""

    slots: tuple[SpacetimeLocation, ...]

    @classmethod
    def of(cls, slots) -> "EnvelopeBranch":
        return cls(tuple(sorted(set(slots))))


@dataclass(frozen=True)
class Envelope:
    """A union of branches; the empty envelope has one empty branch."""

    branches: tuple[EnvelopeBranch, ...]
    sources: frozenset[int]  # lifetime indices this envelope accounts for

    @classmethod
    def empty(cls) -> "Envelope":
        return cls((EnvelopeBranch(()),), frozenset())

    @classmethod
    def union(cls, envelopes) -> "Envelope":
        branches: list[EnvelopeBranch] = []
        sources: frozenset[int] = frozenset()
        for e in envelopes:
            sources |= e.sources
            for b in e.branches:
                if b not in branches:
                    branches.append(b)
        return cls(tuple(branches), sources)

    def compose(self, other: "Envelope") -> "Envelope":
        if self.sources & other.sources:
            raise CircuitError(
                f"envelopes share source atoms {sorted(self.sources & other.sources)}"
            )
        branches = []
        for a in self.branches:
            for b in other.branches:
                nb = EnvelopeBranch.of(a.slots + b.slots)
                if nb not in branches:
                    branches.append(nb)
        return Envelope(tuple(branches), self.sources | other.sources)


def compose_envelopes(a: Envelope, b: Envelope) -> Envelope:
    return a.compose(b)


def czh_form(circuit: Circuit) -> Circuit:
    """Cached CZ/H compiled companion of a circuit."""
    if "czh" not in circuit._cache:
        circuit._cache["czh"] = (
            circuit
            if not any(i.gate == "CNOT" for t in circuit.ticks for i in t)
            and "source_tick_end" in circuit.meta
            else compile_to_czh(circuit)
        )
    return circuit._cache["czh"]


def envelope_of_single_loss(
    circuit: Circuit, loss_location: SpacetimeLocation
) -> Envelope:
    """Construction slots for one loss at a known location.

    ``circuit`` must be in CZ/H/S form (SWAP allowed; it is shuttling,
    not a gate on the atom).  Walking the atom's remaining gates, a reset
    pin of the absent atom is only needed where a CZ or S is about to act
    while the pinned state has picked up an odd number of Hadamards, and
    once more at the end for the measurement, so those positions (plus
    the loss location itself) carry the full-Pauli slots.  Consecutive
    Hadamard pairs with nothing between them contribute none, which keeps
    the slot count at the role-change level.
    """
    if any(i.gate == "CNOT" for t in circuit.ticks for i in t):
        raise CircuitError("envelope construction requires the CZ/H compiled form")
    lt = circuit.lifetime_at(loss_location)
    locs = lt.locations()
    k = locs.index(SpacetimeLocation(*loss_location))
    slots = [locs[k]]
    parity = 0
    for q, t in locs[k + 1 :]:
        for ins in circuit.ticks[t]:
            if q not in ins.targets:
                continue
            g = ins.gate
            if g == "H":
                parity ^= 1
            elif g in ("CZ", "S") and parity:
                slots.append(SpacetimeLocation(q, t - 1))
                parity = 0
    # The pre-measurement pin, at the atom's last location.
    slots.append(locs[-1])
    return Envelope((EnvelopeBranch.of(slots),), frozenset({lt.index}))


def envelope_of_readout(circuit: Circuit, readout_index: int) -> Envelope:
    """Union over candidate loss positions of one flagged loss readout.

    ``circuit`` is the source circuit (CNOT form allowed); slots land on
    its compiled companion ``czh_form(circuit)``.
    """
    if readout_index < 0 or readout_index >= circuit.num_readouts:
        raise CircuitError(f"readout index {readout_index} out of range")
    meas = circuit.loss_resolving_measurements[readout_index]
    lt = circuit.lifetime_of_measurement(meas.index)
    compiled = czh_form(circuit)
    parts = []
    seen = set()
    for loc in lt.locations():
        cloc = (
            map_location_to_czh(compiled, loc)
            if "source_tick_end" in compiled.meta
            else loc
        )
        if cloc in seen:
            continue
        seen.add(cloc)
        parts.append(envelope_of_single_loss(compiled, cloc))
    env = Envelope.union(parts)
    # All parts share the same atom; keep the source lifetime id of the
    # *source* circuit for exclusivity bookkeeping.
    return Envelope(env.branches, frozenset({lt.index}))


@dataclass(frozen=True)
class LossPattern:
    """One reachable (detector, observable) flip pair of an envelope."""

    detectors: tuple[int, ...]
    observables: tuple[int, ...]
    branch: int
    assignment: tuple[tuple[SpacetimeLocation, int], ...]

    @property
    def pair(self) -> DetectorOutcomePair:
        return DetectorOutcomePair(self.detectors, self.observables)


def enumerate_patterns(
    circuit: Circuit, env: Envelope, max_slots: int = 16, max_rank: int = 16
) -> list[LossPattern]:
    """Deduplicated (detector, observable) pairs reachable from ``env``.

    Because Y composes from X and Z and the frame map is linear, each
    branch's reachable pattern set is the GF(2) span of its slots' X and
    Z signatures, so enumeration costs 2**rank rather than 4**slots.
    """
    compiled = czh_form(circuit)
    idx = frame_index(compiled)
    patterns: list[LossPattern] = []
    seen: set[tuple] = set()
    for bi, branch in enumerate(env.branches):
        k = len(branch.slots)
        if k > max_slots:
            raise CircuitError(
                f"envelope branch has {k} slots, over the enumeration guard "
                f"({max_slots}); raise max_slots explicitly if intended"
            )
        # Independent generators over the (detector, observable) signature.
        gens: list[tuple[int, int, tuple]] = []  # (dmask, omask, (slot, pauli))
        basis: list[tuple[int, int, tuple[tuple, ...]]] = []
        for s in branch.slots:
            for pauli in (1, 3):
                dm, om = idx.signature(idx.meas_mask(s, pauli))
                cur_d, cur_o, prov = dm, om, ((s, pauli),)
                for bd, bo, bp in basis:
                    pivot = _lowest_bit(bd, bo)
                    if pivot is not None and _has_bit(cur_d, cur_o, pivot):
                        cur_d ^= bd
                        cur_o ^= bo
                        prov = _xor_prov(prov, bp)
                if cur_d or cur_o:
                    basis.append((cur_d, cur_o, prov))
                    basis.sort(key=lambda b: _lowest_bit(b[0], b[1]))
        if len(basis) > max_rank:
            raise CircuitError(
                f"envelope branch signature rank {len(basis)} exceeds {max_rank}"
            )
        for code in range(1 << len(basis)):
            dm = om = 0
            prov: tuple = ()
            for j in range(len(basis)):
                if (code >> j) & 1:
                    dm ^= basis[j][0]
                    om ^= basis[j][1]
                    prov = _xor_prov(prov, basis[j][2])
            key = (dm, om)
            if key in seen:
                continue
            seen.add(key)
            patterns.append(LossPattern(_bits_of(dm), _bits_of(om), bi, prov))
    patterns.sort(key=lambda p: (len(p.detectors), p.detectors, p.observables))
    return patterns


def _lowest_bit(dmask: int, omask: int):
    if dmask:
        return (0, (dmask & -dmask).bit_length())
    if omask:
        return (1, (omask & -omask).bit_length())
    return None


def _has_bit(dmask: int, omask: int, pivot) -> bool:
    kind, pos = pivot
    mask = dmask if kind == 0 else omask
    return bool(mask >> (pos - 1) & 1)


def _xor_prov(a: tuple, b: tuple) -> tuple:
    """Symmetric difference of (slot, pauli) factors, composing Paulis."""
    acc: dict = {}
    for s, p in a + b:
        q = acc.get(s, 0)
        acc[s] = _PAULI_MUL[q][p]
    return tuple(sorted((s, p) for s, p in acc.items() if p))


_PAULI_MUL = [
    [0, 1, 2, 3],
    [1, 0, 3, 2],
    [2, 3, 0, 1],
    [3, 2, 1, 0],
]


class LossPatternTable:
    """Per loss-readout enumerated envelope patterns for one circuit."""

    def __init__(self, circuit: Circuit, max_slots: int = 16):
        self.circuit = circuit
        self.by_readout: list[list[LossPattern]] = []
        self.envelopes: list[Envelope] = []
        for m in range(circuit.num_readouts):
            env = envelope_of_readout(circuit, m)
            self.envelopes.append(env)
            self.by_readout.append(enumerate_patterns(circuit, env, max_slots))

    def __getitem__(self, m: int) -> list[LossPattern]:
        return self.by_readout[m]

    def __len__(self) -> int:
        return len(self.by_readout)

    def serialize(self) -> str:
        lines = []
        for m, pats in enumerate(self.by_readout):
            for j, p in enumerate(pats):
                d = " ".join(f"D{i}" for i in p.detectors)
                l = " ".join(f"L{i}" for i in p.observables)
                lines.append(f"loss {m} {j} : {d} | {l}".replace("  ", " "))
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse_lines(text: str) -> dict[int, list[tuple[tuple[int, ...], tuple[int, ...]]]]:
        out: dict[int, list] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            head, rest = line.split(":", 1)
            _, m, j = head.split()
            dpart, lpart = rest.split("|")
            dets = tuple(int(t[1:]) for t in dpart.split())
            obs = tuple(int(t[1:]) for t in lpart.split())
            out.setdefault(int(m), []).append((dets, obs))
        return out


def pattern_table(circuit: Circuit, max_slots: int = 16) -> LossPatternTable:
    key = ("pattern_table", max_slots)
    if key not in circuit._cache:
        circuit._cache[key] = LossPatternTable(circuit, max_slots)
    return circuit._cache[key]


def envelope_pairs(
    circuit: Circuit, env: Envelope, base: PauliConfiguration | None = None,
    max_slots: int = 16,
) -> set[DetectorOutcomePair]:
    """S(p + E, no-loss) as frame-propagated pairs on the compiled form."""
    compiled = czh_form(circuit)
    idx = frame_index(compiled)
    base_mask = 0
    if base:
        mapped = PauliConfiguration(
            {
                (
                    map_location_to_czh(compiled, loc)
                    if "source_tick_end" in compiled.meta
                    else loc
                ): p
                for loc, p in base.items()
            }
        )
        base_mask = idx.config_meas_mask(mapped)
    out = set()
    for pat in enumerate_patterns(circuit, env, max_slots):
        mask = base_mask
        for loc, p in pat.assignment:
            mask ^= idx.meas_mask(loc, p)
        dm, om = idx.signature(mask)
        out.add(DetectorOutcomePair(_bits_of(dm), _bits_of(om)))
    return out
