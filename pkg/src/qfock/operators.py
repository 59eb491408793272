"""Operators on the truncated deformed Fock space.

An operator is stored as a dict of level blocks ``(n_out, n_in) -> matrix``
acting on normalized-frame coefficients.  Because the space is truncated
at level n_max, a product of creation operators is only faithful to the
untruncated operator on low enough input levels; every operator therefore
carries a ``safe_top``: for inputs supported on levels <= safe_top its
action (and hence norms of differences of such operators) agrees with the
untruncated model.  Composing operators shrinks safe_top by the up-shift
of the factor applied first; all identity checks and norms restrict to
the safe window, optionally tightened further with ``in_top``.

Operator norms are taken with respect to the deformed inner product: with
the level Cholesky factors P_n = L_n L_n^T, the congruence
``L_out^T B L_in^{-T}`` turns each block into its Euclidean counterpart,
and the norm is the largest singular value of the transformed operator
(per level for single-shift operators, assembled or via power iteration
otherwise).
"""

from __future__ import annotations

import weakref
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .fock import FockSpace, FockVector, gram_cholesky, gram_fast
from .oneparticle import apply_antilinear
from .qcomb import shuffle_subsets

# largest assembled dimension for a dense singular value computation
OP_NORM_DENSE_MAX = 3000

POWER_ITERATION_TOL = 1e-10
POWER_ITERATION_MAX_STEPS = 10000


def _same_space(a: FockSpace, b: FockSpace) -> None:
    if a.q != b.q or a.d != b.d or a.n_max != b.n_max:
        raise ValueError("operators live on different Fock spaces")


class FockOperator:
    """Level-block operator on a truncated deformed Fock space."""

    def __init__(
        self,
        fock: FockSpace,
        blocks: Dict[Tuple[int, int], np.ndarray],
        safe_top: Optional[int] = None,
    ):
        self.fock = fock
        self.blocks = {}
        for (m, n), mat in blocks.items():
            if not (0 <= m <= fock.n_max and 0 <= n <= fock.n_max):
                raise ValueError(f"block ({m}, {n}) outside the truncation")
            mat = np.asarray(mat)
            if mat.shape != (fock.d**m, fock.d**n):
                raise ValueError(f"block ({m}, {n}) has shape {mat.shape}")
            self.blocks[(m, n)] = mat
        self.safe_top = fock.n_max if safe_top is None else min(safe_top, fock.n_max)

    # ---- structure
    @property
    def up_shift(self) -> int:
        """Largest level raise among the stored blocks."""
        return max((m - n for m, n in self.blocks), default=0)

    def shifts(self) -> List[int]:
        return sorted({m - n for m, n in self.blocks})

    def block(self, m: int, n: int) -> np.ndarray:
        got = self.blocks.get((m, n))
        if got is not None:
            return got
        return np.zeros((self.fock.d**m, self.fock.d**n))

    def restricted(self, in_top: int) -> "FockOperator":
        """Drop blocks whose input level exceeds in_top."""
        return FockOperator(
            self.fock,
            {k: v for k, v in self.blocks.items() if k[1] <= in_top},
            safe_top=min(self.safe_top, in_top),
        )

    def copy(self) -> "FockOperator":
        return FockOperator(
            self.fock, {k: v.copy() for k, v in self.blocks.items()}, self.safe_top
        )

    # ---- linear algebra
    def __add__(self, other: "FockOperator") -> "FockOperator":
        _same_space(self.fock, other.fock)
        out = {k: v.copy() for k, v in self.blocks.items()}
        for k, v in other.blocks.items():
            out[k] = out[k] + v if k in out else v.copy()
        return FockOperator(
            self.fock, out, safe_top=min(self.safe_top, other.safe_top)
        )

    def __neg__(self) -> "FockOperator":
        return (-1.0) * self

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        return self + (-other)

    def __rmul__(self, scalar) -> "FockOperator":
        return FockOperator(
            self.fock,
            {k: scalar * v for k, v in self.blocks.items()},
            safe_top=self.safe_top,
        )

    def __mul__(self, scalar) -> "FockOperator":
        return self.__rmul__(scalar)

    def compose(
        self, other: "FockOperator", in_top: Optional[int] = None
    ) -> "FockOperator":
        """self applied after other, keeping only input levels <= in_top."""
        _same_space(self.fock, other.fock)
        if in_top is None:
            in_top = self.fock.n_max
        blocks: Dict[Tuple[int, int], np.ndarray] = {}
        mine_by_in: Dict[int, List[Tuple[int, np.ndarray]]] = {}
        for (am, an), mat in self.blocks.items():
            mine_by_in.setdefault(an, []).append((am, mat))
        for (bm, bn), bmat in other.blocks.items():
            if bn > in_top:
                continue
            for am, amat in mine_by_in.get(bm, ()):
                key = (am, bn)
                prod = amat @ bmat
                if key in blocks:
                    blocks[key] = blocks[key] + prod
                else:
                    blocks[key] = prod
        safe = min(other.safe_top, self.safe_top - other.up_shift, in_top)
        return FockOperator(self.fock, blocks, safe_top=safe)

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        return self.compose(other)

    def apply(self, vec: FockVector) -> FockVector:
        out: Dict[int, np.ndarray] = {}
        for (m, n), mat in self.blocks.items():
            x = vec.blocks.get(n)
            if x is None:
                continue
            y = mat @ x
            out[m] = out[m] + y if m in out else y
        return FockVector(out)

    # ---- the deformed-metric adjoint
    def adjoint(self) -> "FockOperator":
        """Adjoint with respect to the deformed inner product:
        S_(n,m) = P_n^-1 (T_(m,n))^H P_m."""
        q, d = self.fock.q, self.fock.d
        blocks = {}
        for (m, n), mat in self.blocks.items():
            rhs = mat.conj().T @ gram_fast(q, d, m)
            ell = gram_cholesky(q, d, n)
            blocks[(n, m)] = scipy.linalg.cho_solve((ell, True), rhs)
        # exactness of the adjoint block (n, m) needs n <= safe_top; the
        # input level of that block is m = n + shift
        down = min((m - n for m, n in self.blocks), default=0)
        safe = min(self.fock.n_max, self.safe_top + down)
        return FockOperator(self.fock, blocks, safe_top=safe)

    # ---- norms
    def _hat_block(self, m: int, n: int, mat: np.ndarray) -> np.ndarray:
        """Congruence transform L_m^T B L_n^{-T} of one block."""
        q, d = self.fock.q, self.fock.d
        ell_out = gram_cholesky(q, d, m)
        ell_in = gram_cholesky(q, d, n)
        # compute via Z^T = L_n^{-1} (L_m^T B)^T ; singular values are
        # transpose-invariant so Z itself is never formed
        top = ell_out.T @ mat
        return scipy.linalg.solve_triangular(ell_in, top.T, lower=True).T

    def op_norm(
        self, in_top: Optional[int] = None, method: str = "auto"
    ) -> float:
        """Operator norm in the deformed metric, over inputs supported on
        levels <= in_top (default: the safe window)."""
        if in_top is None:
            in_top = self.safe_top
        in_top = min(in_top, self.fock.n_max)
        if in_top < 0:
            return 0.0
        hats: Dict[Tuple[int, int], np.ndarray] = {}
        for (m, n), mat in self.blocks.items():
            if n > in_top:
                continue
            hats[(m, n)] = self._hat_block(m, n, mat)
        if not hats:
            return 0.0
        shifts = {m - n for m, n in hats}
        if method not in ("auto", "dense", "power"):
            raise ValueError(f"unknown method {method!r}")
        if len(shifts) == 1 and method != "power":
            return max(
                float(scipy.linalg.svdvals(mat).max()) for mat in hats.values()
            )
        in_levels = sorted({n for _, n in hats})
        out_levels = sorted({m for m, _ in hats})
        d = self.fock.d
        in_dim = sum(d**n for n in in_levels)
        out_dim = sum(d**m for m in out_levels)
        use_dense = method == "dense" or (
            method == "auto" and max(in_dim, out_dim) <= OP_NORM_DENSE_MAX
        )
        if use_dense:
            in_off = _offsets(in_levels, d)
            out_off = _offsets(out_levels, d)
            big = np.zeros(
                (out_dim, in_dim),
                dtype=complex
                if any(np.iscomplexobj(v) for v in hats.values())
                else float,
            )
            for (m, n), mat in hats.items():
                big[
                    out_off[m] : out_off[m] + d**m, in_off[n] : in_off[n] + d**n
                ] = mat
            return float(scipy.linalg.svdvals(big).max())
        return _power_iteration_norm(hats, in_levels, d)


def _offsets(levels: Sequence[int], d: int) -> Dict[int, int]:
    out = {}
    pos = 0
    for n in levels:
        out[n] = pos
        pos += d**n
    return out


def _power_iteration_norm(
    hats: Dict[Tuple[int, int], np.ndarray], in_levels: Sequence[int], d: int
) -> float:
    """Largest singular value of the block operator by power iteration on
    B* B, with a fixed-seed start for reproducibility."""
    rng = np.random.default_rng(2024)
    vec = {
        n: rng.normal(size=d**n) + 1j * rng.normal(size=d**n) for n in in_levels
    }
    norm = np.sqrt(sum(np.vdot(v, v).real for v in vec.values()))
    vec = {n: v / norm for n, v in vec.items()}
    sigma = 0.0
    for _ in range(POWER_ITERATION_MAX_STEPS):
        mid: Dict[int, np.ndarray] = {}
        for (m, n), mat in hats.items():
            y = mat @ vec[n]
            mid[m] = mid[m] + y if m in mid else y
        back: Dict[int, np.ndarray] = {n: np.zeros(d**n, dtype=complex) for n in in_levels}
        for (m, n), mat in hats.items():
            if m in mid:
                back[n] = back[n] + mat.conj().T @ mid[m]
        new_sigma = np.sqrt(sum(np.vdot(v, v).real for v in mid.values()))
        norm = np.sqrt(sum(np.vdot(v, v).real for v in back.values()))
        if norm == 0.0:
            return 0.0
        vec = {n: v / norm for n, v in back.items()}
        if abs(new_sigma - sigma) <= POWER_ITERATION_TOL * max(new_sigma, 1e-300):
            return float(new_sigma)
        sigma = new_sigma
    return float(sigma)


# ---------------------------------------------------------------------------
# primitive operators


def zero_operator(fock: FockSpace) -> FockOperator:
    return FockOperator(fock, {})


def identity_operator(fock: FockSpace) -> FockOperator:
    return FockOperator(
        fock, {(n, n): np.eye(fock.d**n) for n in range(fock.n_max + 1)}
    )


def proj_level(fock: FockSpace, n: int) -> FockOperator:
    """Orthogonal projection onto level n (levels are orthogonal)."""
    if not (0 <= n <= fock.n_max):
        raise ValueError(f"level {n} outside the truncation")
    return FockOperator(fock, {(n, n): np.eye(fock.d**n)})


def proj_up_to(fock: FockSpace, n: int) -> FockOperator:
    return FockOperator(
        fock, {(k, k): np.eye(fock.d**k) for k in range(min(n, fock.n_max) + 1)}
    )


def q_operator(fock: FockSpace, exponent: int = 1) -> FockOperator:
    """The diagonal operator acting as q^(exponent * n) on level n."""
    return FockOperator(
        fock,
        {
            (n, n): float(fock.q) ** (exponent * n) * np.eye(fock.d**n)
            for n in range(fock.n_max + 1)
        },
    )


def _as_normalized(fock: FockSpace, xi, frame: str) -> np.ndarray:
    xi = np.asarray(xi, dtype=complex)
    if xi.shape != (fock.d,):
        raise ValueError("one-particle vector has wrong dimension")
    if frame == "external":
        return fock.one_particle.to_normalized(xi)
    if frame == "normalized":
        return xi
    raise ValueError(f"unknown frame {frame!r}")


# built ladder operators are immutable in practice (every algebraic
# operation allocates new blocks), so each space keeps the four families
# per letter; the cache dies with the space
_LADDER_CACHE: "weakref.WeakKeyDictionary[FockSpace, dict]" = (
    weakref.WeakKeyDictionary()
)


def _cached_ladder(fock: FockSpace, kind: str, x: np.ndarray, build) -> FockOperator:
    per_space = _LADDER_CACHE.get(fock)
    if per_space is None:
        per_space = {}
        _LADDER_CACHE[fock] = per_space
    key = (kind, x.tobytes())
    op = per_space.get(key)
    if op is None:
        op = build()
        per_space[key] = op
    return op


def create_left(fock: FockSpace, xi, frame: str = "normalized") -> FockOperator:
    """Left creation: prepends xi, mapping level n to n+1."""
    x = _as_normalized(fock, xi, frame)

    def build() -> FockOperator:
        col = x.reshape(-1, 1)
        blocks = {
            (n + 1, n): np.kron(col, np.eye(fock.d**n)) for n in range(fock.n_max)
        }
        return FockOperator(fock, blocks, safe_top=fock.n_max - 1)

    return _cached_ladder(fock, "create_left", x, build)


def create_right(fock: FockSpace, xi, frame: str = "normalized") -> FockOperator:
    """Right creation: appends xi, mapping level n to n+1."""
    x = _as_normalized(fock, xi, frame)

    def build() -> FockOperator:
        col = x.reshape(-1, 1)
        blocks = {
            (n + 1, n): np.kron(np.eye(fock.d**n), col) for n in range(fock.n_max)
        }
        return FockOperator(fock, blocks, safe_top=fock.n_max - 1)

    return _cached_ladder(fock, "create_right", x, build)


def annihilate_left(fock: FockSpace, xi, frame: str = "normalized") -> FockOperator:
    """Left annihilation, the deformed-metric adjoint of create_left:
    removes one letter with weight q^(slot-1) <xi, letter>_U."""
    x = _as_normalized(fock, xi, frame)

    def build() -> FockOperator:
        row = x.conj().reshape(1, -1)
        d = fock.d
        blocks = {}
        for n in range(fock.n_max):  # output level n, input n+1
            total = np.zeros((d**n, d ** (n + 1)), dtype=complex)
            for i in range(1, n + 2):
                total += float(fock.q) ** (i - 1) * np.kron(
                    np.kron(np.eye(d ** (i - 1)), row), np.eye(d ** (n + 1 - i))
                )
            blocks[(n, n + 1)] = total
        return FockOperator(fock, blocks, safe_top=fock.n_max)

    return _cached_ladder(fock, "annihilate_left", x, build)


def annihilate_right(fock: FockSpace, xi, frame: str = "normalized") -> FockOperator:
    """Right annihilation, the deformed-metric adjoint of create_right:
    removes one letter with weight q^(n+1-slot) <xi, letter>_U."""
    x = _as_normalized(fock, xi, frame)

    def build() -> FockOperator:
        row = x.conj().reshape(1, -1)
        d = fock.d
        blocks = {}
        for n in range(fock.n_max):
            total = np.zeros((d**n, d ** (n + 1)), dtype=complex)
            for i in range(1, n + 2):
                total += float(fock.q) ** (n + 1 - i) * np.kron(
                    np.kron(np.eye(d ** (i - 1)), row), np.eye(d ** (n + 1 - i))
                )
            blocks[(n, n + 1)] = total
        return FockOperator(fock, blocks, safe_top=fock.n_max)

    return _cached_ladder(fock, "annihilate_right", x, build)


def op_power(op: FockOperator, k: int, in_top: Optional[int] = None) -> FockOperator:
    """k-fold composition of op with itself, input-restricted throughout."""
    if k < 0:
        raise ValueError("power must be >= 0")
    out = identity_operator(op.fock)
    if in_top is not None:
        out = out.restricted(in_top)
    for _ in range(k):
        out = op.compose(out, in_top=in_top)
    return out


def commutator(
    a: FockOperator, b: FockOperator, in_top: Optional[int] = None
) -> FockOperator:
    return a.compose(b, in_top=in_top) - b.compose(a, in_top=in_top)


def vacuum_expectation(op: FockOperator) -> complex:
    """<vacuum, op vacuum> in the deformed inner product."""
    blk = op.blocks.get((0, 0))
    return complex(blk[0, 0]) if blk is not None else 0.0 + 0.0j


# ---------------------------------------------------------------------------
# Wick products


def _compose_chain(
    factors: List[FockOperator], fock: FockSpace, in_top: Optional[int]
) -> FockOperator:
    if not factors:
        out = identity_operator(fock)
        return out if in_top is None else out.restricted(in_top)
    acc = factors[-1]
    if in_top is not None:
        acc = acc.restricted(in_top)
    for f in reversed(factors[:-1]):
        acc = f.compose(acc, in_top=in_top)
    return acc


def wick_left(
    fock: FockSpace,
    vectors: Sequence[np.ndarray],
    frame: str = "normalized",
    in_top: Optional[int] = None,
) -> FockOperator:
    """Left Wick product of the tensor word built from the given
    one-particle vectors: the sum over splits of {1..n} into an increasing
    creator part and an increasing annihilator part, weighted by
    q^(split inversions), with annihilators taking the conjugated letters.

    Applied to the vacuum it reproduces the word itself.
    """
    vecs = [_as_normalized(fock, v, frame) for v in vectors]
    n = len(vecs)
    if n > fock.n_max:
        raise ValueError("word longer than the truncation")
    kbar = fock.one_particle.conj_matrix("normalized")
    out = zero_operator(fock)
    for i in range(n + 1):
        for subset, inv_count in shuffle_subsets(n, i):
            comp = [b for b in range(1, n + 1) if b not in subset]
            factors = [create_left(fock, vecs[a - 1]) for a in subset]
            factors += [
                annihilate_left(fock, apply_antilinear(kbar, vecs[b - 1]))
                for b in comp
            ]
            term = _compose_chain(factors, fock, in_top)
            out = out + float(fock.q) ** inv_count * term
    return out


def wick_right(
    fock: FockSpace,
    vectors: Sequence[np.ndarray],
    frame: str = "normalized",
    in_top: Optional[int] = None,
) -> FockOperator:
    """Right Wick product of the tensor word: the mirror of wick_left using
    right creation/annihilation, the reversed word, and the right
    conjugation in place of the canonical one.

    Applied to the vacuum it reproduces the word itself.
    """
    vecs = [_as_normalized(fock, v, frame) for v in vectors]
    n = len(vecs)
    if n > fock.n_max:
        raise ValueError("word longer than the truncation")
    kr = fock.one_particle.r_conj_matrix("normalized")
    rev = vecs[::-1]
    out = zero_operator(fock)
    for i in range(n + 1):
        for subset, inv_count in shuffle_subsets(n, i):
            comp = [b for b in range(1, n + 1) if b not in subset]
            factors = [create_right(fock, rev[a - 1]) for a in subset]
            factors += [
                annihilate_right(fock, apply_antilinear(kr, rev[b - 1]))
                for b in comp
            ]
            term = _compose_chain(factors, fock, in_top)
            out = out + float(fock.q) ** inv_count * term
    return out
