"""Two-dimensional Hubbard model in the plane-wave (momentum) basis.

Orbitals are the L*L crystal momenta k = 2 pi (n1, n2) / L, numbered
``n1 * L + n2``.  A determinant is a pair of bitmasks (up, down) over these
orbitals; its dense index is ``rank(up) * C(N_orb, n_down) + rank(down)``
where ``rank`` is the colexicographic rank of a fixed-popcount bitmask.

Matrix elements::

    H(d, d)  = sum of eps(k) over occupied spin-orbitals + U n_up n_down / N_orb
    H(d', d) = +-U / N_orb for d' = d with p(up) -> p-q and k(down) -> k+q, q != 0

The fermionic sign uses the ordering "all up orbitals, then all down
orbitals, each by ascending orbital index": each single hop contributes
(-1) ** (occupied orbitals of that spin strictly between source and target).
"""

from __future__ import annotations

from math import comb

import numpy as np

from .hamiltonian import ColumnOracle, _pick_uniform

# candidate-move arrays are built in chunks of this many determinants
_CHUNK = 4096
# build a mask -> rank lookup table up to this many orbitals
_TABLE_ORBITALS = 22


def hubbard_dispersion(L: int, k_index: int) -> float:
    """eps(k) = -2 (cos k1 + cos k2) with k_i = 2 pi n_i / L."""
    if not 0 <= k_index < L * L:
        raise IndexError(f"momentum index {k_index} out of range for L={L}")
    n1, n2 = divmod(k_index, L)
    return float(-2.0 * (np.cos(2 * np.pi * n1 / L) + np.cos(2 * np.pi * n2 / L)))


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x.astype(np.uint64)).astype(np.int64)


class _Combinatorics:
    """Colex ranking/unranking of n-subsets of {0..N-1} stored as bitmasks."""

    def __init__(self, n_orb: int, n: int):
        self.n_orb = n_orb
        self.n = n
        self.count = comb(n_orb, n)
        # binom[c, j] = C(c, j)
        self.binom = np.array([[comb(c, j) for j in range(n + 1)] for c in range(n_orb + 1)], dtype=np.int64)
        self.table = None
        if n_orb <= _TABLE_ORBITALS and n > 0:
            masks = self.unrank_masks(np.arange(self.count, dtype=np.int64))
            self.table = np.full(1 << n_orb, -1, dtype=np.int64)
            self.table[masks] = np.arange(self.count, dtype=np.int64)

    def unrank_positions(self, r: np.ndarray) -> np.ndarray:
        """(B, n) ascending occupied positions for ranks ``r``."""
        r = np.array(r, dtype=np.int64, copy=True)
        out = np.empty((r.size, self.n), dtype=np.int64)
        for j in range(self.n, 0, -1):
            col = self.binom[:, j]
            c = np.searchsorted(col, r, side="right") - 1
            out[:, j - 1] = c
            r -= col[c]
        return out

    def unrank_masks(self, r: np.ndarray) -> np.ndarray:
        pos = self.unrank_positions(r)
        return np.bitwise_or.reduce(np.left_shift(np.int64(1), pos), axis=1) if self.n else np.zeros(len(r), np.int64)

    def rank_masks(self, masks: np.ndarray) -> np.ndarray:
        masks = np.asarray(masks, dtype=np.int64)
        if self.table is not None:
            return self.table[masks]
        rank = np.zeros(masks.shape, dtype=np.int64)
        seen = np.zeros(masks.shape, dtype=np.int64)
        for b in range(self.n_orb):
            bit = (masks >> b) & 1
            seen += bit
            rank += np.where(bit == 1, self.binom[b, np.minimum(seen, self.n)], 0)
        return rank


class HubbardMomentum(ColumnOracle):
    """Momentum-space Hubbard Hamiltonian with fixed (n_up, n_down).

    ``sampler`` selects how :meth:`sample_offdiag_batch` proposes spawning
    targets: ``"uniform"`` enumerates the column and picks uniformly among
    its nonzeros; ``"rejection"`` picks (p, k, q) uniformly from all
    n_up * n_down * (N_orb - 1) moves and returns no target when the move
    lands on an occupied orbital.
    """

    def __init__(self, L: int, n_up: int, n_down: int, U: float, sampler: str = "uniform"):
        if L < 1:
            raise ValueError("L must be positive")
        n_orb = L * L
        if n_orb > 62:
            raise ValueError("at most 62 orbitals fit the 64-bit determinant encoding")
        if not (0 <= n_up <= n_orb and 0 <= n_down <= n_orb):
            raise ValueError("electron counts must lie in [0, L*L]")
        if sampler not in ("uniform", "rejection"):
            raise ValueError(f"unknown sampler {sampler!r}")
        self.L = L
        self.n_orb = n_orb
        self.n_up = n_up
        self.n_down = n_down
        self.U = float(U)
        self.sampler = sampler
        self._up = _Combinatorics(n_orb, n_up)
        self._dn = _Combinatorics(n_orb, n_down)
        self.dim = self._up.count * self._dn.count

        n1, n2 = np.divmod(np.arange(n_orb), L)
        self.eps = -2.0 * (np.cos(2 * np.pi * n1 / L) + np.cos(2 * np.pi * n2 / L))
        self.momentum = np.stack([n1, n2], axis=1)
        # add[k, q] = k + q, sub[p, q] = p - q (componentwise mod L)
        self._add = (((n1[:, None] + n1[None, :]) % L) * L + (n2[:, None] + n2[None, :]) % L).astype(np.int64)
        self._sub = (((n1[:, None] - n1[None, :]) % L) * L + (n2[:, None] - n2[None, :]) % L).astype(np.int64)
        self._qs = np.arange(1, n_orb, dtype=np.int64)
        self.offdiag_magnitude = self.U / n_orb
        self._const = self.U * n_up * n_down / n_orb

    # -- determinants ---------------------------------------------------

    def encode(self, up_mask, down_mask):
        ru = self._up.rank_masks(np.asarray(up_mask, dtype=np.int64))
        rd = self._dn.rank_masks(np.asarray(down_mask, dtype=np.int64))
        out = ru * self._dn.count + rd
        return int(out) if np.ndim(out) == 0 else out

    def decode(self, index):
        idx = np.asarray(index, dtype=np.int64)
        scalar = idx.ndim == 0
        idx = np.atleast_1d(idx)
        up = self._up.unrank_masks(idx // self._dn.count)
        dn = self._dn.unrank_masks(idx % self._dn.count)
        if scalar:
            return int(up[0]), int(dn[0])
        return up, dn

    def hartree_fock(self) -> int:
        """Index of the determinant filling the lowest-eps orbitals of each spin.

        Ties in eps are broken by ascending orbital index.
        """
        order = np.lexsort((np.arange(self.n_orb), self.eps))
        up = int(np.bitwise_or.reduce(1 << order[: self.n_up])) if self.n_up else 0
        dn = int(np.bitwise_or.reduce(1 << order[: self.n_down])) if self.n_down else 0
        return self.encode(up, dn)

    def total_momentum(self, index) -> tuple[int, int] | np.ndarray:
        """Total (n1, n2) of all electrons, mod L."""
        up, dn = self.decode(np.atleast_1d(index))
        tot = np.zeros((up.size, 2), dtype=np.int64)
        for b in range(self.n_orb):
            occ = ((up >> b) & 1) + ((dn >> b) & 1)
            tot += occ[:, None] * self.momentum[b]
        tot %= self.L
        if np.ndim(index) == 0:
            return int(tot[0, 0]), int(tot[0, 1])
        return tot

    def sector_dimension(self, momentum: tuple[int, int] | None = None) -> int:
        """Number of determinants with the given total momentum (HF's by default)."""
        if momentum is None:
            momentum = self.total_momentum(self.hartree_fock())
        L = self.L

        def histogram(comb_: _Combinatorics) -> np.ndarray:
            h = np.zeros((L, L), dtype=np.int64)
            for start in range(0, comb_.count, 1 << 16):
                r = np.arange(start, min(comb_.count, start + (1 << 16)), dtype=np.int64)
                pos = comb_.unrank_positions(r)
                mom = self.momentum[pos].sum(axis=1) % L if comb_.n else np.zeros((r.size, 2), np.int64)
                np.add.at(h, (mom[:, 0], mom[:, 1]), 1)
            return h

        hu, hd = histogram(self._up), histogram(self._dn)
        total = 0
        for a in range(L):
            for b in range(L):
                total += int(hu[a, b]) * int(hd[(momentum[0] - a) % L, (momentum[1] - b) % L])
        return total

    # -- matrix elements ------------------------------------------------

    def _kinetic(self, masks: np.ndarray) -> np.ndarray:
        out = np.zeros(masks.shape)
        for b in range(self.n_orb):
            out += ((masks >> b) & 1) * self.eps[b]
        return out

    def diagonals(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        up, dn = self.decode(ks.reshape(-1))
        return (self._kinetic(up) + self._kinetic(dn) + self._const).reshape(ks.shape)

    def diagonal(self, k: int) -> float:
        return float(self.diagonals(np.array([k]))[0])

    def offdiag_columns(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        ptr = np.zeros(ks.size + 1, dtype=np.int64)
        if ks.size == 0 or self.U == 0 or self.n_up == 0 or self.n_down == 0 or self.n_orb < 2:
            return ptr, np.empty(0, np.int64), np.empty(0)
        rows_parts, vals_parts, counts = [], [], []
        for start in range(0, ks.size, _CHUNK):
            r, v, c = self._columns_chunk(ks[start : start + _CHUNK])
            rows_parts.append(r)
            vals_parts.append(v)
            counts.append(c)
        np.cumsum(np.concatenate(counts), out=ptr[1:])
        return ptr, np.concatenate(rows_parts), np.concatenate(vals_parts)

    def _columns_chunk(self, ks):
        B = ks.size
        ru, rd = ks // self._dn.count, ks % self._dn.count
        up_pos = self._up.unrank_positions(ru)
        dn_pos = self._dn.unrank_positions(rd)
        up = np.bitwise_or.reduce(np.left_shift(np.int64(1), up_pos), axis=1)
        dn = np.bitwise_or.reduce(np.left_shift(np.int64(1), dn_pos), axis=1)

        p = up_pos[:, :, None, None]
        k = dn_pos[:, None, :, None]
        q = self._qs[None, None, None, :]
        tu = self._sub[p, q]
        td = self._add[k, q]
        upb = up[:, None, None, None]
        dnb = dn[:, None, None, None]
        free = (((upb >> tu) & 1) == 0) & (((dnb >> td) & 1) == 0)
        b, ip, ik, iq = np.nonzero(free)
        src_p = up_pos[b, ip]
        src_k = dn_pos[b, ik]
        dst_p = tu[b, ip, 0, iq]
        dst_k = td[b, 0, ik, iq]

        one = np.int64(1)
        up_b = up[b]
        dn_b = dn[b]
        new_up = (up_b ^ (one << src_p)) | (one << dst_p)
        new_dn = (dn_b ^ (one << src_k)) | (one << dst_k)
        sgn = _hop_parity(up_b, src_p, dst_p) ^ _hop_parity(dn_b, src_k, dst_k)
        vals = np.where(sgn == 1, -self.offdiag_magnitude, self.offdiag_magnitude)
        rows = self._up.rank_masks(new_up) * self._dn.count + self._dn.rank_masks(new_dn)
        counts = np.bincount(b, minlength=B).astype(np.int64)
        return rows, vals, counts

    def offdiag_column(self, k: int):
        ptr, rows, vals = self.offdiag_columns(np.array([k]))
        order = np.argsort(rows, kind="stable")
        return rows[order], vals[order]

    def offdiag_count(self, k: int) -> int:
        ptr, _, _ = self.offdiag_columns(np.array([k]))
        return int(ptr[1])

    # -- spawning --------------------------------------------------------

    @property
    def n_moves(self) -> int:
        return self.n_up * self.n_down * (self.n_orb - 1)

    def sample_offdiag_batch(self, ks, u):
        ks = np.asarray(ks, dtype=np.int64)
        u = np.asarray(u, dtype=np.float64)
        if self.sampler == "uniform":
            uniq, inv = np.unique(ks, return_inverse=True)
            ptr, rows, vals = self.offdiag_columns(uniq)
            return _pick_uniform(ptr, rows, vals, inv, u)
        return self._sample_rejection(ks, u)

    def _sample_rejection(self, ks, u):
        n = ks.size
        out_rows = np.full(n, -1, dtype=np.int64)
        out_vals = np.zeros(n)
        nm = self.n_moves
        out_prob = np.full(n, 1.0 / nm if nm else 1.0)
        if n == 0 or nm == 0 or self.U == 0:
            return out_rows, out_vals, out_prob
        c = np.minimum((u * nm).astype(np.int64), nm - 1)
        c, iq = np.divmod(c, self.n_orb - 1)
        ip, ik = np.divmod(c, self.n_down)
        ru, rd = ks // self._dn.count, ks % self._dn.count
        up_pos = self._up.unrank_positions(ru)
        dn_pos = self._dn.unrank_positions(rd)
        one = np.int64(1)
        up = np.bitwise_or.reduce(one << up_pos, axis=1)
        dn = np.bitwise_or.reduce(one << dn_pos, axis=1)
        src_p = up_pos[np.arange(n), ip]
        src_k = dn_pos[np.arange(n), ik]
        q = self._qs[iq]
        dst_p = self._sub[src_p, q]
        dst_k = self._add[src_k, q]
        ok = (((up >> dst_p) & 1) == 0) & (((dn >> dst_k) & 1) == 0)
        if ok.any():
            up_o, dn_o = up[ok], dn[ok]
            sp, dp, sk, dk = src_p[ok], dst_p[ok], src_k[ok], dst_k[ok]
            new_up = (up_o ^ (one << sp)) | (one << dp)
            new_dn = (dn_o ^ (one << sk)) | (one << dk)
            sgn = _hop_parity(up_o, sp, dp) ^ _hop_parity(dn_o, sk, dk)
            out_rows[ok] = self._up.rank_masks(new_up) * self._dn.count + self._dn.rank_masks(new_dn)
            out_vals[ok] = np.where(sgn == 1, -self.offdiag_magnitude, self.offdiag_magnitude)
        return out_rows, out_vals, out_prob

    def __repr__(self) -> str:
        return f"HubbardMomentum(L={self.L}, n_up={self.n_up}, n_down={self.n_down}, U={self.U}, dim={self.dim})"


def _hop_parity(mask, a, b):
    """Parity (0/1) of set bits of ``mask`` strictly between positions a and b."""
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    one = np.int64(1)
    between = ((one << hi) - 1) & ~((one << (lo + 1)) - 1)
    return _popcount(mask & between) & 1


def hubbard_diagonal(H: HubbardMomentum, d: int) -> float:
    return H.diagonal(d)


def hubbard_offdiag_column(H: HubbardMomentum, d: int) -> list[tuple[int, float]]:
    rows, vals = H.offdiag_column(d)
    return list(zip(rows.tolist(), vals.tolist()))
