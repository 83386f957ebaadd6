"""Single-qubit Pauli algebra and spacetime-pinned Pauli configurations.

Phases are discarded everywhere: detectors and logical observables only
depend on measurement bit flips, so the group law used here is the Pauli
group modulo its center.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping, NamedTuple

PAULI_CHARS = "IXYZ"

I, X, Y, Z = 0, 1, 2, 3

# Symplectic representation (x bit, z bit) indexed by Pauli code.
PAULI_XZ = ((0, 0), (1, 0), (1, 1), (0, 1))

_XZ_TO_PAULI = {(0, 0): I, (1, 0): X, (1, 1): Y, (0, 1): Z}


def pauli_mul(a: int, b: int) -> int:
    """Phaseless product of two Paulis given as codes in {I, X, Y, Z}."""
    ax, az = PAULI_XZ[a]
    bx, bz = PAULI_XZ[b]
    return _XZ_TO_PAULI[(ax ^ bx, az ^ bz)]


def pauli_from_char(c: str) -> int:
    try:
        return PAULI_CHARS.index(c)
    except ValueError:
        raise ValueError(f"not a Pauli: {c!r}") from None


def pauli_to_char(p: int) -> str:
    return PAULI_CHARS[p]


class SpacetimeLocation(NamedTuple):
    """A (qubit wire, tick) position.

    By convention an error or loss at tick t acts *after* the gates of
    tick t and before those of tick t + 1.
    """

    qubit: int
    tick: int


class PauliConfiguration:
    """An immutable map from spacetime locations to non-identity Paulis.

    Supports the abelian composition used throughout: entries at the same
    location multiply (phaselessly) and identity results are dropped, so
    every configuration is its own inverse.
    """

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries: Mapping[SpacetimeLocation, int] | Iterable[tuple[SpacetimeLocation, int]] = ()):
        items = dict(entries)
        self._entries: dict[SpacetimeLocation, int] = {
            SpacetimeLocation(*loc): p for loc, p in items.items() if p != I
        }
        self._hash: int | None = None

    @classmethod
    def single(cls, qubit: int, tick: int, pauli: int | str) -> "PauliConfiguration":
        if isinstance(pauli, str):
            pauli = pauli_from_char(pauli)
        return cls({SpacetimeLocation(qubit, tick): pauli})

    def compose(self, other: "PauliConfiguration") -> "PauliConfiguration":
        """Pointwise phaseless product; identity entries are dropped."""
        merged = dict(self._entries)
        for loc, p in other._entries.items():
            q = pauli_mul(merged.get(loc, I), p)
            if q == I:
                merged.pop(loc, None)
            else:
                merged[loc] = q
        out = PauliConfiguration.__new__(PauliConfiguration)
        out._entries = merged
        out._hash = None
        return out

    __xor__ = compose

    @property
    def weight(self) -> int:
        return len(self._entries)

    def items(self) -> Iterator[tuple[SpacetimeLocation, int]]:
        return iter(sorted(self._entries.items()))

    def get(self, loc: SpacetimeLocation) -> int:
        return self._entries.get(loc, I)

    def restricted(self, keep) -> "PauliConfiguration":
        """Configuration with only the entries for which keep(loc) is true."""
        return PauliConfiguration({loc: p for loc, p in self._entries.items() if keep(loc)})

    def __len__(self) -> int:
        return len(self._entries)

    def __bool__(self) -> bool:
        return bool(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliConfiguration):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._entries.items()))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(
            f"{pauli_to_char(p)}@(q{loc.qubit},t{loc.tick})" for loc, p in self.items()
        )
        return f"PauliConfiguration({body})"


EMPTY_CONFIG = PauliConfiguration()
