"""Line-oriented circuit text format.

One instruction per line; ``TICK`` separates layers; ``#`` starts a
comment.  ``M!``/``MX!`` mark loss-resolving measurements.  DETECTOR and
OBSERVABLE lines reference measurements by negative offsets from the most
recent measurement (``rec[-1]`` is the latest) and are resolved at parse
time::

    R 0 1
    CNOT 0 1
    TICK
    M! 0 1
    DETECTOR rec[-2] rec[-1]
    OBSERVABLE 0 rec[-1]

Single-qubit mnemonics broadcast over their targets; two-qubit mnemonics
consume targets pairwise (``CZ 0 1 2 3`` is two gates).  Consecutive
instruction lines share a tick when their targets are disjoint; a line
that reuses a wire already acted on in the current tick starts a new tick
implicitly.
"""

from __future__ import annotations

import re

from .circuit import (
    ALL_GATES,
    GATE_2Q,
    Circuit,
    CircuitError,
    Instruction,
    MEASUREMENT_GATES,
)

_REC_RE = re.compile(r"^rec\[(-\d+)\]$")


class ParseError(CircuitError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_circuit(text: str) -> Circuit:
    ticks: list[list[Instruction]] = [[]]
    tick_used: set[int] = set()
    detectors: list[tuple[int, ...]] = []
    observables: dict[int, list[int]] = {}
    meas_count = 0

    def flush_tick():
        nonlocal tick_used
        if ticks[-1]:
            ticks.append([])
            tick_used = set()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        word = parts[0].upper()

        if word == "TICK":
            if len(parts) != 1:
                raise ParseError(line_no, "TICK takes no arguments")
            flush_tick()
            continue

        if word == "DETECTOR":
            try:
                idxs = _parse_recs(parts[1:], meas_count)
            except ValueError as e:
                raise ParseError(line_no, str(e)) from None
            if not idxs:
                raise ParseError(line_no, "DETECTOR needs at least one rec[]")
            detectors.append(tuple(idxs))
            continue

        if word == "OBSERVABLE":
            if len(parts) < 2:
                raise ParseError(line_no, "OBSERVABLE needs an index")
            try:
                obs_id = int(parts[1])
            except ValueError:
                raise ParseError(line_no, f"bad observable index {parts[1]!r}") from None
            if obs_id < 0:
                raise ParseError(line_no, "observable index must be non-negative")
            try:
                idxs = _parse_recs(parts[2:], meas_count)
            except ValueError as e:
                raise ParseError(line_no, str(e)) from None
            observables.setdefault(obs_id, []).extend(idxs)
            continue

        loss_resolving = word.endswith("!")
        gate = word[:-1] if loss_resolving else word
        if gate not in ALL_GATES:
            raise ParseError(line_no, f"unknown instruction {parts[0]!r}")
        if loss_resolving and gate not in MEASUREMENT_GATES:
            raise ParseError(line_no, f"'!' is only valid on M/MX, not {gate}")
        try:
            targets = [int(p) for p in parts[1:]]
        except ValueError:
            raise ParseError(line_no, f"bad qubit index in {line!r}") from None
        if not targets:
            raise ParseError(line_no, f"{gate} needs targets")
        if any(t < 0 for t in targets):
            raise ParseError(line_no, "negative qubit index")

        if gate in GATE_2Q:
            if len(targets) % 2:
                raise ParseError(line_no, f"{gate} needs an even number of targets")
            groups = [tuple(targets[i : i + 2]) for i in range(0, len(targets), 2)]
        else:
            groups = [(t,) for t in targets]

        for tg in groups:
            if len(set(tg)) != len(tg):
                raise ParseError(line_no, f"duplicate qubit in {gate} {tg}")
            if any(t in tick_used for t in tg):
                flush_tick()
            try:
                ins = Instruction(gate, tg, loss_resolving=loss_resolving)
            except CircuitError as e:
                raise ParseError(line_no, str(e)) from None
            ticks[-1].append(ins)
            tick_used.update(tg)
            meas_count += 1 if gate in MEASUREMENT_GATES else 0

    if not ticks[-1]:
        ticks.pop()
    obs_list = [tuple(observables.get(i, ())) for i in range(len(observables))]
    if set(observables) != set(range(len(observables))):
        raise CircuitError(
            f"observable indices must be 0..k-1, got {sorted(observables)}"
        )
    try:
        return Circuit(ticks, detectors, obs_list)
    except CircuitError as e:
        raise CircuitError(f"invalid circuit: {e}") from None


def _parse_recs(tokens: list[str], meas_count: int) -> list[int]:
    out = []
    for tok in tokens:
        m = _REC_RE.match(tok)
        if not m:
            raise ValueError(f"expected rec[-k], got {tok!r}")
        k = -int(m.group(1))
        if k < 1:
            raise ValueError(f"rec offset must be negative, got {tok!r}")
        if k > meas_count:
            raise ValueError(
                f"dangling measurement reference rec[-{k}] with only "
                f"{meas_count} measurement(s) so far"
            )
        out.append(meas_count - k)
    return out


def serialize_circuit(circuit: Circuit) -> str:
    """Inverse of :func:`parse_circuit`; parse(serialize(c)) == c."""
    meas_at_tick: dict[int, int] = {}  # tick -> measurements seen through it
    count = 0
    lines: list[str] = []
    det_by_tick: dict[int, list[tuple[int, ...]]] = {}
    for d in circuit.detectors:
        last_tick = circuit.measurements[max(d)].tick
        det_by_tick.setdefault(last_tick, []).append(d)

    for t, layer in enumerate(circuit.ticks):
        if t > 0:
            lines.append("TICK")
        for ins in layer:
            name = ins.gate + ("!" if ins.loss_resolving else "")
            lines.append(name + " " + " ".join(str(q) for q in ins.targets))
            if ins.gate in MEASUREMENT_GATES:
                count += 1
        meas_at_tick[t] = count
        for d in det_by_tick.get(t, ()):
            recs = " ".join(f"rec[{i - count}]" for i in d)
            lines.append(f"DETECTOR {recs}")
    for obs_id, o in enumerate(circuit.observables):
        recs = " ".join(f"rec[{i - count}]" for i in o)
        lines.append(f"OBSERVABLE {obs_id} {recs}".rstrip())
    return "\n".join(lines) + "\n"
