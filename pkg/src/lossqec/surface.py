"""Surface-code syndrome-extraction circuit builders.

Rotated layout: data qubits at odd-odd coordinates ``(2i+1, 2j+1)``,
ancillas at even-even ``(2i, 2j)`` with X-plaquettes on the ``i+j`` even
checkerboard.  Weight-2 Z-halves sit on the left/right boundaries and
X-halves on top/bottom, so the Z logical runs horizontally and the X
logical vertically.

Schedules: within-plaquette CNOT orders alternate between two fixed
direction sequences on even/odd rounds so that every data qubit is an
atom-exchange partner at least once per round pair (full replenishment).
Per tick the Z and X direction are equal or antipodal, which keeps the
layers conflict-free, and both hook pairs are oriented harmlessly
(Z-plaquette hooks vertical, X-plaquette hooks horizontal).

The SWAP extraction's classically-controlled Pauli after each shuttle is
folded into detector/observable definitions exactly, by propagating
raw-measurement-bit masks through the correction cascade.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .circuit import Circuit, CircuitError, Instruction
from .pauli import SpacetimeLocation
from .sim import FrameIndex, _bits_of

DIRS = {"NE": (1, 1), "NW": (-1, 1), "SE": (1, -1), "SW": (-1, -1)}

Z_ORDERS = (("NW", "SW", "NE", "SE"), ("SE", "NE", "SW", "NW"))
X_ORDERS = (("NW", "NE", "SW", "SE"), ("SE", "SW", "NE", "NW"))


@dataclass(frozen=True)
class SurfaceCodeLayout:
    distance: int
    rounds: int
    basis: str = "X"

    def __post_init__(self):
        if self.distance < 3 or self.distance % 2 == 0:
            raise CircuitError("distance must be an odd integer >= 3")
        if self.rounds < 1:
            raise CircuitError("rounds must be >= 1")
        if self.basis not in ("Z", "X"):
            raise CircuitError("basis must be Z or X")


@dataclass(frozen=True)
class Plaquette:
    pos: tuple[int, int]
    kind: str  # "X" or "Z"
    wire: int
    neighbors: tuple[tuple[str, int], ...]  # (direction, data wire), NESW order

    def data_in(self, direction: str) -> int | None:
        for d, w in self.neighbors:
            if d == direction:
                return w
        return None


def _geometry(d: int):
    data_coords = sorted(
        (x, y) for x in range(1, 2 * d, 2) for y in range(1, 2 * d, 2)
    )
    data_wire = {c: i for i, c in enumerate(data_coords)}
    plaqs: list[Plaquette] = []
    coords = []
    for i in range(d + 1):
        for j in range(d + 1):
            x, y = 2 * i, 2 * j
            kind = "X" if (i + j) % 2 == 0 else "Z"
            if kind == "X" and i in (0, d):
                continue
            if kind == "Z" and j in (0, d):
                continue
            nbrs = []
            for name, (dx, dy) in DIRS.items():
                c = (x + dx, y + dy)
                if c in data_wire:
                    nbrs.append((name, data_wire[c]))
            if len(nbrs) < 2:
                continue
            coords.append(((x, y), kind, tuple(nbrs)))
    coords.sort()
    for k, (pos, kind, nbrs) in enumerate(coords):
        plaqs.append(Plaquette(pos, kind, len(data_coords) + k, nbrs))
    return data_coords, data_wire, plaqs


@dataclass
class _Builder:
    """Accumulates ticks, measurements and deferred classical corrections."""

    ticks: list[list[Instruction]] = field(default_factory=list)
    meas_info: list[tuple] = field(default_factory=list)  # metadata per index
    corrections: list[tuple[int, int, int, int]] = field(default_factory=list)
    # (control measurement index, wire, pauli code, tick)

    def tick(self, instructions: list[Instruction]) -> int:
        if not instructions:
            return -1
        self.ticks.append(list(instructions))
        return len(self.ticks) - 1

    def measure(self, layer: list[tuple[Instruction, tuple]]) -> list[int]:
        out = []
        instrs = []
        for ins, info in sorted(layer, key=lambda it: it[0].targets):
            instrs.append(ins)
            out.append(len(self.meas_info))
            self.meas_info.append(info)
        self.ticks.append(instrs)
        return out


def _correction_flips(circuit: Circuit, corrections):
    """Measurement flips of each correction's mismatch Pauli.

    The mismatch frame is propagated forward from its shuttle, and is
    absorbed wherever a *later* correction's shuttle re-measures the
    value it rides on: the raw control bit there already carries the
    accumulated history, so the frame's matching component on that
    partner wire is zeroed after the swap.
    """
    by_tick: list[dict[int, Instruction]] = []
    meas_index: dict[tuple[int, int], int] = {}
    mcount = 0
    for t, layer in enumerate(circuit.ticks):
        ent: dict[int, Instruction] = {}
        for ins in layer:
            for q in ins.targets:
                ent[q] = ins
            if ins.gate in ("M", "MX"):
                meas_index[(t, ins.targets[0])] = mcount
                mcount += 1
        by_tick.append(ent)
    absorb: dict[int, list[tuple[int, int, str]]] = {}
    for ctrl, wire, pauli, tick, anc in corrections:
        absorb.setdefault(tick, []).append((wire, anc, "x" if pauli == 1 else "z"))

    out = []
    for ctrl, wire, pauli, tick, anc in corrections:
        fx: dict[int, int] = {}
        fz: dict[int, int] = {}
        if pauli in (1, 2):
            fx[wire] = 1
        if pauli in (2, 3):
            fz[wire] = 1
        flips = 0
        for t in range(tick + 1, circuit.num_ticks):
            layer = by_tick[t]
            done: set[int] = set()
            for q in list(fx) + list(fz):
                if q in done or q not in layer:
                    continue
                ins = layer[q]
                done.update(ins.targets)
                g = ins.gate
                if g == "H":
                    fx[q], fz[q] = fz.get(q, 0), fx.get(q, 0)
                elif g == "S":
                    fz[q] = fz.get(q, 0) ^ fx.get(q, 0)
                elif g == "CNOT":
                    c, tq = ins.targets
                    fx[tq] = fx.get(tq, 0) ^ fx.get(c, 0)
                    fz[c] = fz.get(c, 0) ^ fz.get(tq, 0)
                elif g == "CZ":
                    a, b2 = ins.targets
                    fz[b2] = fz.get(b2, 0) ^ fx.get(a, 0)
                    fz[a] = fz.get(a, 0) ^ fx.get(b2, 0)
                elif g == "SWAP":
                    a, b2 = ins.targets
                    fx[a], fx[b2] = fx.get(b2, 0), fx.get(a, 0)
                    fz[a], fz[b2] = fz.get(b2, 0), fz.get(a, 0)
                elif g in RESET_GATES_SET:
                    fx[q] = fz[q] = 0
                else:  # M / MX
                    bit = fx.get(q, 0) if g == "M" else fz.get(q, 0)
                    if bit:
                        flips |= 1 << meas_index[(t, q)]
            for w, a, comp in absorb.get(t, ()):
                # After the value-copying shuttle, the raw control bit
                # re-expresses the measured mismatch; the partner keeps
                # only the data-side residual deviation.
                f = fx if comp == "x" else fz
                f[w] = f.get(w, 0) ^ f.get(a, 0)
            fx = {q: v for q, v in fx.items() if v}
            fz = {q: v for q, v in fz.items() if v}
        out.append((ctrl, flips))
    return out


RESET_GATES_SET = frozenset({"R", "RX"})


def _fold_corrections(circuit: Circuit, corrections, detectors, observables):
    """Absorb classically-controlled Paulis into detector/observable sets.

    Corrected measurement values are raw bits XORed with raw control bits
    weighted by the absorbed correction frames.
    """
    if not corrections:
        return detectors, observables
    masks = [1 << m for m in range(circuit.num_measurements)]
    for ctrl, flips in _correction_flips(circuit, corrections):
        for m in _bits_of(flips):
            masks[m] ^= 1 << ctrl
    def expand(core):
        acc = 0
        for m in core:
            acc ^= masks[m]
        return _bits_of(acc)
    return [expand(d) for d in detectors], [expand(o) for o in observables]


def _assemble(builder, detectors_core, det_info, observables_core, meta):
    raw = Circuit([t for t in builder.ticks if t])
    # Dropping empty ticks changes no indices because builder never made any
    # measurement in an empty tick; recompute nothing.
    dets, obs = _fold_corrections(
        raw, builder.corrections, detectors_core, observables_core
    )
    keyed = sorted(zip(dets, det_info), key=lambda p: (max(p[0]), tuple(sorted(p[0]))))
    meta = dict(meta)
    meta["detector_info"] = [info for _, info in keyed]
    meta["measurement_info"] = builder.meas_info
    circ = Circuit(raw.ticks, [d for d, _ in keyed], obs, meta=meta)
    return circ


def _extraction_rounds(
    builder: _Builder,
    plaqs: list[Plaquette],
    layout: SurfaceCodeLayout,
    style: str,
):
    """Emit all syndrome-extraction rounds; returns ancilla meas indices."""
    meas_by_round: list[dict[tuple[int, int], int]] = []
    for r in range(layout.rounds):
        z_order = Z_ORDERS[r % 2]
        x_order = X_ORDERS[r % 2]
        order_of = lambda p: z_order if p.kind == "Z" else x_order

        builder.tick(
            [
                Instruction("RX" if p.kind == "X" else "R", (p.wire,))
                for p in plaqs
            ]
        )
        slots = {
            p.wire: [
                (k, p.data_in(order_of(p)[k]))
                for k in range(4)
                if p.data_in(order_of(p)[k]) is not None
            ]
            for p in plaqs
        }
        pending_corrections = []  # (plaq pos, partner wire, pauli, swap tick)
        for k in range(4):
            cnots = []
            swaps = []
            for p in plaqs:
                present = slots[p.wire]
                at_k = [dw for kk, dw in present if kk == k]
                if not at_k:
                    continue
                (dw,) = at_k
                first = present[0][0] == k
                last = present[-1][0] == k
                if p.kind == "Z":
                    ctrl, tgt = dw, p.wire
                else:
                    ctrl, tgt = p.wire, dw
                if style == "swap" and last:
                    cnots.append(Instruction("CNOT", (tgt, ctrl)))
                    swaps.append((p, dw))
                else:
                    cnots.append(Instruction("CNOT", (ctrl, tgt)))
                    if style == "midswap" and first:
                        swaps.append((p, dw))
            builder.tick(cnots)
            if swaps:
                ts = builder.tick(
                    [Instruction("SWAP", (p.wire, dw)) for p, dw in swaps]
                )
                if style == "swap":
                    for p, dw in swaps:
                        pauli = 1 if p.kind == "Z" else 3
                        pending_corrections.append((p.pos, dw, pauli, ts, p.wire))
        mlayer = []
        for p in plaqs:
            gate = "MX" if p.kind == "X" else "M"
            mlayer.append(
                (
                    Instruction(gate, (p.wire,), loss_resolving=style != "standard"),
                    ("ancilla", p.kind, p.pos, r),
                )
            )
        idxs = builder.measure(mlayer)
        meas_by_round.append(
            {
                info[2]: m
                for m, info in zip(
                    idxs,
                    [i for _, i in sorted(mlayer, key=lambda it: it[0].targets)],
                )
            }
        )
        for pos, partner, pauli, ts, anc in pending_corrections:
            builder.corrections.append(
                (meas_by_round[r][pos], partner, pauli, ts, anc)
            )
    return meas_by_round


def _build(layout: SurfaceCodeLayout, style: str) -> Circuit:
    d = layout.distance
    data_coords, data_wire, plaqs = _geometry(d)
    builder = _Builder()
    basis = layout.basis
    reset = "R" if basis == "Z" else "RX"
    builder.tick([Instruction(reset, (w,)) for w in data_wire.values()])
    meas_by_round = _extraction_rounds(builder, plaqs, layout, style)
    final_gate = "M" if basis == "Z" else "MX"
    flayer = [
        (
            Instruction(final_gate, (w,), loss_resolving=style != "standard"),
            ("data_final", basis, c, layout.rounds),
        )
        for c, w in data_wire.items()
    ]
    fidx = builder.measure(flayer)
    final_of = {
        info[2]: m
        for m, info in zip(
            fidx, [i for _, i in sorted(flayer, key=lambda it: it[0].targets)]
        )
    }

    detectors: list[tuple[int, ...]] = []
    det_info: list[tuple] = []
    for p in plaqs:
        matched = p.kind == basis
        for r in range(layout.rounds):
            m = meas_by_round[r][p.pos]
            if r == 0:
                if matched:
                    detectors.append((m,))
                    det_info.append((p.kind, p.pos, 0))
            else:
                prev = meas_by_round[r - 1][p.pos]
                detectors.append((prev, m))
                det_info.append((p.kind, p.pos, r))
        if matched:
            core = [meas_by_round[layout.rounds - 1][p.pos]]
            core += [final_of[c] for c in _neighbor_coords(p)]
            detectors.append(tuple(core))
            det_info.append((p.kind, p.pos, layout.rounds))

    if basis == "Z":
        line = [c for c in data_coords if c[1] == 1]  # horizontal Z logical
    else:
        line = [c for c in data_coords if c[0] == 1]  # vertical X logical
    observables = [tuple(final_of[c] for c in line)]

    meta = {
        "family": style,
        "distance": d,
        "rounds": layout.rounds,
        "basis": basis,
        "data_coords": data_coords,
        "data_wire": data_wire,
        "plaquettes": [(p.pos, p.kind, p.wire) for p in plaqs],
        "observable_coords": line,
    }
    return _assemble(builder, detectors, det_info, observables, meta)


def _neighbor_coords(p: Plaquette):
    x, y = p.pos
    return [
        (x + dx, y + dy)
        for name, (dx, dy) in DIRS.items()
        if p.data_in(name) is not None
    ]


def build_standard(layout: SurfaceCodeLayout) -> Circuit:
    """Conventional 4-CNOT extraction; no replenishment, plain readout."""
    return _build(layout, "standard")


def build_swap(layout: SurfaceCodeLayout) -> Circuit:
    """End-of-round atom exchange: final CNOT reversed, then shuttling.

    The software Pauli correction conditioned on each syndrome readout is
    folded into the detector and observable definitions.
    """
    return _build(layout, "swap")


def build_mid_swap(layout: SurfaceCodeLayout) -> Circuit:
    """Atom exchange right after each plaquette's first CNOT of the round."""
    return _build(layout, "midswap")


# ---------------------------------------------------------------------------
# Generalized CSS mid-swap builder.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CSSCodeSpec:
    """Stabilizer supports with distinguished first qubits.

    Each data qubit must appear as the first qubit of exactly one
    stabilizer, and the stabilizer counts must satisfy n_x + n_z = n.
    """

    num_qubits: int
    x_stabilizers: tuple[tuple[int, ...], ...]
    z_stabilizers: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = self.num_qubits
        if len(self.x_stabilizers) + len(self.z_stabilizers) != n:
            raise CircuitError("need n_x + n_z = n data qubits")
        firsts = [s[0] for s in self.x_stabilizers + self.z_stabilizers]
        if sorted(firsts) != list(range(n)):
            raise CircuitError(
                "each data qubit must be the first qubit of exactly one stabilizer"
            )
        for s in self.x_stabilizers + self.z_stabilizers:
            if len(set(s)) != len(s):
                raise CircuitError("repeated qubit inside a stabilizer support")
            if any(q < 0 or q >= n for q in s):
                raise CircuitError("stabilizer touches unknown data qubit")

    @classmethod
    def rotated_surface(cls, d: int) -> "CSSCodeSpec":
        """The rotated surface code in this structure (first = NW neighbor)."""
        data_coords, data_wire, plaqs = _geometry(d)
        xs, zs = [], []
        for p in plaqs:
            order = X_ORDERS[0] if p.kind == "X" else Z_ORDERS[0]
            sup = [p.data_in(dname) for dname in order if p.data_in(dname) is not None]
            (xs if p.kind == "X" else zs).append(tuple(sup))
        return cls(len(data_coords), tuple(xs), tuple(zs))


def build_css_mid_swap(spec: CSSCodeSpec, rounds: int, basis: str = "X") -> Circuit:
    """Appendix-style generic mid-swap extraction: X phase then Z phase.

    Within each phase, the k-th chain step of all stabilizers is emitted
    in greedily conflict-packed ticks; the atom exchange with the first
    data qubit follows each stabilizer's first CNOT.
    """
    n = spec.num_qubits
    if basis not in ("X", "Z"):
        raise CircuitError("basis must be Z or X")
    if rounds < 1:
        raise CircuitError("rounds must be >= 1")
    stabs = [("X", i, s) for i, s in enumerate(spec.x_stabilizers)]
    stabs += [("Z", i, s) for i, s in enumerate(spec.z_stabilizers)]
    anc_wire = {("X", i): n + i for i, _ in enumerate(spec.x_stabilizers)}
    for i, _ in enumerate(spec.z_stabilizers):
        anc_wire[("Z", i)] = n + len(spec.x_stabilizers) + i

    builder = _Builder()
    builder.tick([Instruction("R" if basis == "Z" else "RX", (q,)) for q in range(n)])
    meas_by_round: list[dict[tuple, int]] = []
    for r in range(rounds):
        builder.tick(
            [
                Instruction("RX" if kind == "X" else "R", (anc_wire[(kind, i)],))
                for kind, i, _ in stabs
            ]
        )
        for phase in ("X", "Z"):
            group = [(kind, i, s) for kind, i, s in stabs if kind == phase]
            if not group:
                continue
            max_len = max(len(s) for _, _, s in group)
            for k in range(max_len):
                pending = []
                for kind, i, s in group:
                    if k >= len(s):
                        continue
                    a = anc_wire[(kind, i)]
                    dq = s[k]
                    pair = (a, dq) if kind == "X" else (dq, a)
                    pending.append((pair, (a, dq) if k == 0 else None))
                # conflict-free packing of this chain step
                while pending:
                    used: set[int] = set()
                    layer, swaps, rest = [], [], []
                    for pair, sw in pending:
                        if pair[0] in used or pair[1] in used:
                            rest.append((pair, sw))
                            continue
                        used.update(pair)
                        layer.append(Instruction("CNOT", pair))
                        if sw:
                            swaps.append(sw)
                    builder.tick(layer)
                    if swaps:
                        builder.tick([Instruction("SWAP", s) for s in swaps])
                    pending = rest
        mlayer = [
            (
                Instruction(
                    "MX" if kind == "X" else "M",
                    (anc_wire[(kind, i)],),
                    loss_resolving=True,
                ),
                ("ancilla", kind, (kind, i), r),
            )
            for kind, i, _ in stabs
        ]
        idxs = builder.measure(mlayer)
        meas_by_round.append(
            {
                info[2]: m
                for m, info in zip(
                    idxs,
                    [inf for _, inf in sorted(mlayer, key=lambda it: it[0].targets)],
                )
            }
        )
    flayer = [
        (
            Instruction("M" if basis == "Z" else "MX", (q,), loss_resolving=True),
            ("data_final", basis, ("data", q), rounds),
        )
        for q in range(n)
    ]
    fidx = builder.measure(flayer)
    final_of = {
        info[2][1]: m
        for m, info in zip(
            fidx, [inf for _, inf in sorted(flayer, key=lambda it: it[0].targets)]
        )
    }

    detectors, det_info = [], []
    for kind, i, s in stabs:
        key = (kind, i)
        matched = kind == basis
        for r in range(rounds):
            m = meas_by_round[r][key]
            if r == 0:
                if matched:
                    detectors.append((m,))
                    det_info.append((kind, key, 0))
            else:
                detectors.append((meas_by_round[r - 1][key], m))
                det_info.append((kind, key, r))
        if matched:
            core = [meas_by_round[rounds - 1][key]] + [final_of[q] for q in s]
            detectors.append(tuple(core))
            det_info.append((kind, key, rounds))

    meta = {
        "family": "css_midswap",
        "rounds": rounds,
        "basis": basis,
        "css_spec": spec,
        "plaquettes": [(key, kind, anc_wire[key]) for kind, i, _ in stabs for key in [(kind, i)]],
    }
    return _assemble(builder, detectors, det_info, [], meta)
