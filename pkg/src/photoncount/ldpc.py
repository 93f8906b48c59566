"""Systematic LDPC codes: random construction, encoding and sum-product decoding.

LLRs follow the package-wide convention ``log P(obs | 1) / P(obs | 0)`` in
natural log, so a positive value favors bit 1.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionFailed, LengthMismatch

DEFAULT_MAX_ITERS = 50
LLR_CLAMP = 30.0
_TANH_LIMIT = np.tanh(LLR_CLAMP / 2)


@dataclass(frozen=True)
class CodeSpec:
    info_len: int
    parity_len: int

    def __post_init__(self):
        if self.info_len < 1 or self.parity_len < 1:
            raise ValueError(f"info_len and parity_len must be >= 1, got {self}")

    @property
    def length(self) -> int:
        return self.info_len + self.parity_len

    @property
    def rate(self) -> float:
        return self.info_len / self.length


# The three operating points simulated in the coded experiments; 252/408 is
# labeled 0.61 there.
CODE_SPECS = {
    0.5: CodeSpec(500, 500),
    0.61: CodeSpec(252, 156),
    0.75: CodeSpec(750, 250),
}


def spec_for_rate(rate: float) -> CodeSpec:
    for label, spec in CODE_SPECS.items():
        if abs(label - rate) < 1e-9:
            return spec
    supported = ", ".join(f"{k:g} (L={s.info_len}, r={s.parity_len})" for k, s in CODE_SPECS.items())
    raise KeyError(f"no code for rate {rate!r}; supported: {supported}")


@dataclass
class DecodeResult:
    decided_bits: np.ndarray
    converged: bool
    iterations_used: int


@dataclass
class LdpcCode:
    """Sparse parity-check matrix in systematic column order plus encoder data.

    ``check_vars[i]`` lists the columns checked by row ``i``; ``var_checks[j]``
    lists the rows touching column ``j``.  ``parity_map`` is the dense
    ``r x L`` GF(2) matrix sending information bits to parity bits, so a
    codeword is ``[info, parity_map @ info mod 2]``.  ``column_order[j]`` is the
    column of the originally placed matrix now sitting at position ``j``.
    """

    info_len: int
    check_vars: list
    parity_map: np.ndarray
    column_order: np.ndarray
    var_checks: list = field(init=False)

    def __post_init__(self):
        cols = [[] for _ in range(self.length)]
        for row, members in enumerate(self.check_vars):
            for col in members:
                cols[col].append(row)
        self.var_checks = [np.array(c, dtype=np.int64) for c in cols]
        self._graph = None

    @property
    def parity_len(self) -> int:
        return len(self.check_vars)

    @property
    def length(self) -> int:
        return self.info_len + self.parity_len

    @property
    def rate(self) -> float:
        return self.info_len / self.length

    @property
    def spec(self) -> CodeSpec:
        return CodeSpec(self.info_len, self.parity_len)

    def dense(self) -> np.ndarray:
        H = np.zeros((self.parity_len, self.length), dtype=np.uint8)
        for row, members in enumerate(self.check_vars):
            H[row, members] = 1
        return H

    def column_weights(self) -> np.ndarray:
        return np.array([len(c) for c in self.var_checks])

    def row_weights(self) -> np.ndarray:
        return np.array([len(r) for r in self.check_vars])

    @property
    def graph(self) -> "_TannerGraph":
        if self._graph is None:
            self._graph = _TannerGraph(self)
        return self._graph

    @classmethod
    def from_parity_check(cls, H) -> "LdpcCode":
        """Build a systematic code from any full-rank binary ``r x n`` matrix.

        Columns are reordered so the last ``r`` are pivot columns; the reorder
        is kept in ``column_order``.
        """
        H = np.asarray(H, dtype=np.uint8) & 1
        r, n = H.shape
        if n <= r:
            raise ConstructionFailed(f"need more columns than rows, got {r}x{n}")
        reduced, pivots = _row_reduce(H)
        if len(pivots) < r:
            raise ConstructionFailed(f"parity-check matrix has rank {len(pivots)} < {r}")
        pivots.sort(key=lambda p: p[1])
        pivot_cols = [col for _, col in pivots]
        pivot_set = set(pivot_cols)
        info_cols = [j for j in range(n) if j not in pivot_set]
        order = np.array(info_cols + pivot_cols, dtype=np.int64)
        parity_map = reduced[[row for row, _ in pivots]][:, info_cols]
        permuted = H[:, order]
        check_vars = [np.flatnonzero(row) for row in permuted]
        return cls(n - r, check_vars, np.ascontiguousarray(parity_map, dtype=np.uint8), order)


def _row_reduce(H: np.ndarray):
    """Reduced row echelon form over GF(2), pivoting from the rightmost column.

    Returns the reduced matrix and a list of ``(row, column)`` pivots.
    """
    A = H.astype(bool)
    r, n = A.shape
    pivots = []
    row = 0
    for col in range(n - 1, -1, -1):
        if row == r:
            break
        hits = np.flatnonzero(A[row:, col])
        if hits.size == 0:
            continue
        pivot = row + hits[0]
        if pivot != row:
            A[[row, pivot]] = A[[pivot, row]]
        others = np.flatnonzero(A[:, col])
        others = others[others != row]
        A[others] ^= A[row]
        pivots.append((row, col))
        row += 1
    return A.astype(np.uint8), pivots


def _place_columns(r: int, n: int, column_weight: int, rng: np.random.Generator):
    """Random column-weight placement that never lets two columns share two rows."""
    weights = np.zeros(r, dtype=np.int64)
    paired = np.zeros((r, r), dtype=bool)
    np.fill_diagonal(paired, True)
    rows = []
    for _ in range(n):
        chosen = []
        allowed = np.ones(r, dtype=bool)
        for _ in range(column_weight):
            if not allowed.any():
                return None
            lightest = weights[allowed].min()
            pool = np.flatnonzero(allowed & (weights == lightest))
            pick = int(rng.choice(pool))
            chosen.append(pick)
            allowed &= ~paired[pick]
        for a in chosen:
            for b in chosen:
                paired[a, b] = True
        weights[chosen] += 1
        rows.append(sorted(chosen))
    return rows


def construct_code(spec: CodeSpec, seed: int, column_weight: int = 3, max_attempts: int = 20) -> LdpcCode:
    """Random column-weight-3 code of the given dimensions with girth at least 6.

    Deterministic for a given ``seed``.  Raises ``ConstructionFailed`` if no
    4-cycle-free full-rank matrix is found in ``max_attempts`` tries.
    """
    r, n = spec.parity_len, spec.length
    if column_weight > r:
        raise ConstructionFailed(f"column weight {column_weight} needs at least that many rows, got r={r}")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        placed = _place_columns(r, n, column_weight, rng)
        if placed is None:
            continue
        H = np.zeros((r, n), dtype=np.uint8)
        for col, rows in enumerate(placed):
            H[rows, col] = 1
        try:
            return LdpcCode.from_parity_check(H)
        except ConstructionFailed:
            continue
    raise ConstructionFailed(f"no valid {r}x{n} code after {max_attempts} attempts (seed={seed})")


def encode(code: LdpcCode, info_bits) -> np.ndarray:
    """Systematic encoding; also accepts a ``(frames, L)`` batch."""
    info = np.asarray(info_bits, dtype=np.uint8)
    if info.shape[-1] != code.info_len:
        raise LengthMismatch(f"expected {code.info_len} information bits, got {info.shape[-1]}")
    parity = (info.astype(np.int64) @ code.parity_map.T.astype(np.int64)) & 1
    return np.concatenate([info, parity.astype(np.uint8)], axis=-1)


def syndrome(code: LdpcCode, bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] != code.length:
        raise LengthMismatch(f"expected {code.length} bits, got {bits.shape[-1]}")
    return code.graph.syndrome(bits)


class _TannerGraph:
    """Edge-indexed view of the code used by the vectorized decoder.

    Edges are numbered row by row.  ``slots`` is an ``r x dc_max`` table of
    edge ids padded with the dummy id ``E``; ``var_edges`` is an ``n x dv_max``
    table padded the same way.
    """

    def __init__(self, code: LdpcCode):
        self.edge_var = np.concatenate(code.check_vars).astype(np.int64)
        self.n_edges = E = self.edge_var.size
        dc = max(len(m) for m in code.check_vars)
        self.slots = np.full((code.parity_len, dc), E, dtype=np.int64)
        self.slot_of_edge = np.empty(E, dtype=np.int64)
        edge = 0
        for row, members in enumerate(code.check_vars):
            k = len(members)
            self.slots[row, :k] = np.arange(edge, edge + k)
            self.slot_of_edge[edge : edge + k] = row * dc + np.arange(k)
            edge += k
        dv = max(len(c) for c in code.var_checks)
        self.var_edges = np.full((code.length, dv), E, dtype=np.int64)
        fill = np.zeros(code.length, dtype=np.int64)
        for e, var in enumerate(self.edge_var):
            self.var_edges[var, fill[var]] = e
            fill[var] += 1

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        padded = np.concatenate([bits[..., self.edge_var], np.zeros(bits.shape[:-1] + (1,), np.uint8)], axis=-1)
        return (padded[..., self.slots].sum(axis=-1) & 1).astype(np.uint8)

    def check_update(self, v2c: np.ndarray) -> np.ndarray:
        """Tanh-rule check messages, each excluding its own incoming edge."""
        frames = v2c.shape[0]
        # the rule is stated for ln(p0/p1); our LLRs are ln(p1/p0), so negate in and out
        t = np.tanh(-0.5 * np.clip(v2c, -LLR_CLAMP, LLR_CLAMP))
        t = np.concatenate([t, np.ones((frames, 1))], axis=1)[:, self.slots]
        before = np.cumprod(t, axis=-1)
        after = np.cumprod(t[..., ::-1], axis=-1)[..., ::-1]
        excl = np.ones_like(t)
        excl[..., 1:] = before[..., :-1]
        excl[..., :-1] *= after[..., 1:]
        excl = excl.reshape(frames, -1)[:, self.slot_of_edge]
        np.clip(excl, -_TANH_LIMIT, _TANH_LIMIT, out=excl)
        return -2.0 * np.arctanh(excl)

    def gather_vars(self, c2v: np.ndarray) -> np.ndarray:
        padded = np.concatenate([c2v, np.zeros((c2v.shape[0], 1))], axis=1)
        return padded[:, self.var_edges].sum(axis=-1)


def decode_batch(code: LdpcCode, llrs, max_iters: int = DEFAULT_MAX_ITERS):
    """Flooding sum-product decoding of a ``(frames, n)`` block of channel LLRs.

    Frames stop individually as soon as their hard decision satisfies every
    check with no posterior exactly at zero.  Returns ``(decided_bits, converged, iterations_used)`` arrays.
    """
    llrs = np.atleast_2d(np.asarray(llrs, dtype=float))
    if llrs.shape[-1] != code.length:
        raise LengthMismatch(f"expected {code.length} LLRs, got {llrs.shape[-1]}")
    g = code.graph
    frames = llrs.shape[0]
    decided = (llrs > 0).astype(np.uint8)
    converged = ~g.syndrome(decided).any(axis=1) & (llrs != 0).all(axis=1)
    iterations = np.zeros(frames, dtype=np.int64)

    active = np.flatnonzero(~converged)
    channel = llrs[active]
    c2v = np.zeros((active.size, g.n_edges))
    posterior = channel.copy()
    for it in range(1, max_iters + 1):
        if active.size == 0:
            break
        v2c = posterior[:, g.edge_var] - c2v
        c2v = g.check_update(v2c)
        posterior = channel + g.gather_vars(c2v)
        hard = (posterior > 0).astype(np.uint8)
        # a zero posterior is undecided: it maps to 0 but never counts as converged
        done = ~g.syndrome(hard).any(axis=1) & (posterior != 0).all(axis=1)
        decided[active] = hard
        iterations[active] = it
        converged[active[done]] = True
        keep = ~done
        active, channel, c2v, posterior = active[keep], channel[keep], c2v[keep], posterior[keep]
    return decided, converged, iterations


def decode(code: LdpcCode, llrs, max_iters: int = DEFAULT_MAX_ITERS) -> DecodeResult:
    llrs = np.asarray(llrs, dtype=float)
    if llrs.ndim != 1 or llrs.size != code.length:
        raise LengthMismatch(f"expected {code.length} LLRs, got shape {llrs.shape}")
    decided, converged, iterations = decode_batch(code, llrs[None, :], max_iters)
    return DecodeResult(decided[0], bool(converged[0]), int(iterations[0]))


def has_four_cycle(code: LdpcCode) -> bool:
    """Exhaustive check: do any two columns share two or more rows?"""
    H = code.dense().astype(np.int64)
    overlap = H.T @ H
    np.fill_diagonal(overlap, 0)
    return bool((overlap >= 2).any())


def write_alist(code: LdpcCode, target) -> None:
    """Write the parity-check matrix in MacKay's alist format (1-based indices)."""
    cols, rows = code.var_checks, code.check_vars
    dv = max(len(c) for c in cols)
    dc = max(len(r) for r in rows)

    def line(values, width):
        padded = [int(v) + 1 for v in values] + [0] * (width - len(values))
        return " ".join(str(v) for v in padded)

    out = [
        f"{code.length} {code.parity_len}",
        f"{dv} {dc}",
        " ".join(str(len(c)) for c in cols),
        " ".join(str(len(r)) for r in rows),
    ]
    out += [line(c, dv) for c in cols]
    out += [line(r, dc) for r in rows]
    text = "\n".join(out) + "\n"
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w") as fh:
            fh.write(text)
    else:
        target.write(text)


def read_alist(source) -> np.ndarray:
    """Parse an alist file (path or open text stream) into a dense ``r x n`` uint8 matrix."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
    else:
        text = source.read()
    lines = [ln.split() for ln in text.strip().splitlines()]
    n, m = int(lines[0][0]), int(lines[0][1])
    H = np.zeros((m, n), dtype=np.uint8)
    for col in range(n):
        for idx in lines[4 + col]:
            if int(idx):
                H[int(idx) - 1, col] = 1
    for row in range(m):
        members = {int(idx) - 1 for idx in lines[4 + n + row] if int(idx)}
        if members != set(np.flatnonzero(H[row])):
            raise ValueError(f"alist row {row + 1} disagrees with the column lists")
    return H
