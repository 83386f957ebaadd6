"""Stabilizer-tableau simulator with symbolic measurement randomness.

The tableau is the usual destabilizer/stabilizer pair.  Row signs are
tracked as GF(2) vectors over ``(1, r_1, ..., r_K)`` where each ``r_k``
is an independent uniformly random bit minted by a random-outcome
measurement.  Sign propagation is affine in these bits, so every
measurement outcome is an affine form; a circuit's reachable outcome
tuples form a coset of a GF(2) linear code, which makes exact outcome-set
enumeration and determinism checks cheap.

In ``concrete`` mode fresh bits are drawn from a seeded generator instead
of minting symbols, which samples one execution.

Destabilizer row signs are never consulted, so they are not tracked.
"""

from __future__ import annotations

import numpy as np

_WORD = 64


class AffineOutcome:
    """A measurement outcome ``c ^ (r . mask)`` over the symbol bits."""

    __slots__ = ("vec",)

    def __init__(self, vec: np.ndarray):
        self.vec = vec  # uint64 (W,), bit 0 = constant term

    @property
    def constant(self) -> int:
        return int(self.vec[0] & 1)

    def is_deterministic(self) -> bool:
        v = self.vec.copy()
        v[0] &= ~np.uint64(1)
        return not v.any()

    def symbols(self) -> list[int]:
        out = []
        for w, word in enumerate(self.vec):
            word = int(word)
            if w == 0:
                word &= ~1
            while word:
                b = word & -word
                out.append(w * _WORD + b.bit_length() - 1)
                word ^= b
        return out

    def __xor__(self, other: "AffineOutcome") -> "AffineOutcome":
        return AffineOutcome(self.vec ^ other.vec)


class TableauSimulator:
    def __init__(
        self,
        num_qubits: int,
        mode: str = "symbolic",
        rng: np.random.Generator | None = None,
        max_symbols: int = 64,
    ):
        if mode not in ("symbolic", "concrete"):
            raise ValueError(mode)
        self.n = n = num_qubits
        self.mode = mode
        self.rng = rng
        if mode == "concrete" and rng is None:
            raise ValueError("concrete mode needs an rng")
        # Rows 0..n-1 destabilizers (X_i), rows n..2n-1 stabilizers (Z_i).
        self.X = np.zeros((2 * n, n), dtype=np.uint8)
        self.Z = np.zeros((2 * n, n), dtype=np.uint8)
        self.X[np.arange(n), np.arange(n)] = 1
        self.Z[n + np.arange(n), np.arange(n)] = 1
        self.num_symbols = 0
        self._words = max(1, (max_symbols + 1 + _WORD - 1) // _WORD) if mode == "symbolic" else 1
        # Signs only for stabilizer rows, as packed symbol vectors.
        self.signs = np.zeros((n, self._words), dtype=np.uint64)

    # -- symbol plumbing -------------------------------------------------------

    def _grow(self):
        self._words *= 2
        self.signs = np.pad(self.signs, ((0, 0), (0, self._words - self.signs.shape[1])))

    def _fresh_outcome(self) -> np.ndarray:
        """Vector for a fresh uniform random bit."""
        vec = np.zeros(self._words, dtype=np.uint64)
        if self.mode == "concrete":
            vec[0] = np.uint64(self.rng.integers(0, 2))
            return vec
        self.num_symbols += 1
        bit = self.num_symbols  # bit 0 is the constant
        if bit >= self._words * _WORD:
            self._grow()
            vec = np.zeros(self._words, dtype=np.uint64)
        vec[bit // _WORD] = np.uint64(1) << np.uint64(bit % _WORD)
        return vec

    def _const_vec(self, bit: int) -> np.ndarray:
        vec = np.zeros(self._words, dtype=np.uint64)
        vec[0] = np.uint64(bit & 1)
        return vec

    # -- gates -----------------------------------------------------------------

    def apply_gate(self, gate: str, targets: tuple[int, ...]):
        if gate == "H":
            self._h(targets[0])
        elif gate == "S":
            self._s(targets[0])
        elif gate == "CNOT":
            self._cnot(*targets)
        elif gate == "CZ":
            b = targets[1]
            self._h(b)
            self._cnot(targets[0], b)
            self._h(b)
        elif gate == "SWAP":
            a, b = targets
            self.X[:, [a, b]] = self.X[:, [b, a]]
            self.Z[:, [a, b]] = self.Z[:, [b, a]]
        else:
            raise ValueError(f"not a unitary gate: {gate}")

    def _flip_signs(self, rows_mask: np.ndarray):
        """XOR constant 1 into stabilizer sign rows selected by a 0/1 mask."""
        self.signs[:, 0] ^= rows_mask.astype(np.uint64)

    def _flip_signs_vec(self, rows_mask: np.ndarray, vec: np.ndarray):
        self.signs ^= rows_mask.astype(np.uint64)[:, None] * vec[None, :]

    def _h(self, q: int):
        n = self.n
        x, z = self.X[:, q], self.Z[:, q]
        self._flip_signs(x[n:] & z[n:])
        x_old = x.copy()
        self.X[:, q] = z
        self.Z[:, q] = x_old

    def _s(self, q: int):
        n = self.n
        x, z = self.X[:, q], self.Z[:, q]
        self._flip_signs(x[n:] & z[n:])
        self.Z[:, q] = z ^ x

    def _cnot(self, c: int, t: int):
        n = self.n
        xc, zc = self.X[:, c], self.Z[:, c]
        xt, zt = self.X[:, t], self.Z[:, t]
        self._flip_signs(xc[n:] & zt[n:] & (xt[n:] ^ zc[n:] ^ 1))
        self.X[:, t] = xt ^ xc
        self.Z[:, c] = zc ^ zt

    def apply_pauli(self, q: int, pauli: int):
        """Inject I/X/Y/Z (codes 0..3); flips signs of anticommuting rows."""
        n = self.n
        if pauli == 0:
            return
        x, z = self.X[n:, q], self.Z[n:, q]
        if pauli == 1:  # X anticommutes with Z,Y
            self._flip_signs(z)
        elif pauli == 3:  # Z anticommutes with X,Y
            self._flip_signs(x)
        else:  # Y anticommutes with X,Z
            self._flip_signs(x ^ z)

    # -- measurement -----------------------------------------------------------

    @staticmethod
    def _g(xi, zi, xh, zh):
        """CHP phase exponent contributions for multiplying row i into row h."""
        xi = xi.astype(np.int16)
        zi = zi.astype(np.int16)
        xh = xh.astype(np.int16)
        zh = zh.astype(np.int16)
        return (
            (xi & zi) * (zh - xh)
            + (xi & (1 - zi)) * (zh * (2 * xh - 1))
            + ((1 - xi) & zi) * (xh * (1 - 2 * zh))
        )

    def measure(self, q: int, basis: str = "Z") -> AffineOutcome:
        if basis == "X":
            self._h(q)
            out = self._measure_z(q)
            self._h(q)
            return out
        return self._measure_z(q)

    def _measure_z(self, q: int) -> AffineOutcome:
        n = self.n
        stab_x = self.X[n:, q]
        anti = np.nonzero(stab_x)[0]
        if anti.size:
            p = int(anti[0])  # stabilizer row index (0-based within stabs)
            prow = n + p
            outcome = self._fresh_outcome()
            # Multiply pivot into every other row that anticommutes with Z_q.
            rows = np.nonzero(self.X[:, q])[0]
            rows = rows[rows != prow]
            if rows.size:
                G = self._g(
                    self.X[prow][None, :], self.Z[prow][None, :],
                    self.X[rows], self.Z[rows],
                ).sum(axis=1)
                stab_sel = rows >= n
                srows = rows[stab_sel] - n
                if srows.size:
                    const = ((G[stab_sel] & 3) >> 1).astype(np.uint64)
                    self.signs[srows] ^= self.signs[p]
                    self.signs[srows, 0] ^= const
                self.X[rows] ^= self.X[prow]
                self.Z[rows] ^= self.Z[prow]
            # Old stabilizer becomes the destabilizer; new stabilizer is +/-Z_q.
            self.X[p] = self.X[prow]
            self.Z[p] = self.Z[prow]
            self.X[prow] = 0
            self.Z[prow] = 0
            self.Z[prow, q] = 1
            self.signs[p] = outcome
            return AffineOutcome(outcome.copy())
        # Deterministic: accumulate product of stabilizers whose destabilizer
        # partner anticommutes with Z_q.
        hits = np.nonzero(self.X[:n, q])[0]
        acc_x = np.zeros(n, dtype=np.uint8)
        acc_z = np.zeros(n, dtype=np.uint8)
        vec = self._const_vec(0)
        phase = 0
        for i in hits:
            row = n + i
            phase += int(self._g(self.X[row], self.Z[row], acc_x, acc_z).sum())
            acc_x ^= self.X[row]
            acc_z ^= self.Z[row]
            vec = vec ^ self.signs[i]
        phase &= 3
        assert phase in (0, 2), "anticommuting stabilizer product"
        out = vec.copy()
        out[0] ^= np.uint64(phase >> 1)
        return AffineOutcome(out)

    def reset(self, q: int, basis: str = "Z"):
        # Reset to |0>, then rotate for |+>; matches the compiled kernel's
        # bit-consumption order exactly.
        out = self._measure_z(q)
        n = self.n
        mask = self.Z[n:, q].astype(np.uint64)
        self.signs ^= mask[:, None] * out.vec[None, :]
        if basis == "X":
            self._h(q)
