"""Truncated deformed Fock space over a twisted one-particle space.

Levels 0..n_max are kept; level n is the full n-fold tensor power of the
one-particle space (dimension d^n).  The deformed level-n inner product is

    <x1 (x) ... (x) xn, y1 (x) ... (x) yn>_q
        = sum over permutations p of q^inv(p) * prod_i <x_i, y_p(i)>_U,

linear in the second argument.  Working in the normalized one-particle
frame (U-orthonormal basis) the level-n Gram matrix is the q-symmetrizer

    P_n = sum_p q^inv(p) V_p,

a real symmetric positive definite matrix that depends only on (q, d, n).
P_n is built by the level recursion

    P_n = (I_d (x) P_{n-1}) R_n,
    R_n = I + q T_1 + q^2 T_1 T_2 + ... + q^(n-1) T_1 ... T_{n-1},

where T_j is the permutation matrix swapping tensor slots j and j+1;
right multiplication by permutation matrices is realized as column
gathers.  The recursion is validated against the direct sum over
permutations (gram_bruteforce) in the tests.

Word indexing is row major: the first letter is the most significant
digit, matching numpy.kron with the first factor on the left.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .oneparticle import OneParticleSpace
from .qcomb import inversions

# permutation-sum Gram assembly is refused above this level (n! growth)
GRAM_BRUTEFORCE_MAX_LEVEL = 8

_GRAM_CACHE: Dict[tuple, np.ndarray] = {}
_CHOL_CACHE: Dict[tuple, np.ndarray] = {}


def swap_slot_index_array(d: int, n: int, j: int) -> np.ndarray:
    """Index array for the transposition of tensor slots j and j+1 (1-based)
    acting on level-n words: out[index(w)] = index(w with slots swapped)."""
    if not (1 <= j <= n - 1):
        raise ValueError(f"slot {j} out of range for level {n}")
    arr = np.arange(d**n).reshape([d] * n)
    return np.swapaxes(arr, j - 1, j).reshape(-1)


def permutation_index_array(d: int, perm: Sequence[int]) -> np.ndarray:
    """Index array of the slot permutation sending slot i to slot perm[i]
    (1-based images): out[index(w)] = index(w'), w'_perm(i) = w_i."""
    n = len(perm)
    if sorted(perm) != list(range(1, n + 1)):
        raise ValueError(f"not a permutation of 1..{n}: {perm}")
    arr = np.arange(d**n).reshape([d] * n)
    # out[w] = arr[w'] with w'_{perm(i)} = w_i; np.transpose with axes=perm-1
    # reads entry [w_0..w_{n-1}] from position [w'_0..w'_{n-1}]
    return np.transpose(arr, [p - 1 for p in perm]).reshape(-1)


def gram_bruteforce(q: float, d: int, n: int) -> np.ndarray:
    """Level-n Gram in the normalized frame as the literal sum over all n!
    permutations of q^inversions times the slot-permutation matrix."""
    if n > GRAM_BRUTEFORCE_MAX_LEVEL:
        raise ValueError(
            f"bruteforce Gram is capped at level {GRAM_BRUTEFORCE_MAX_LEVEL}"
        )
    dim = d**n
    out = np.zeros((dim, dim))
    if n == 0:
        return np.ones((1, 1))
    rows = np.arange(dim)
    for perm in itertools.permutations(range(1, n + 1)):
        arr = permutation_index_array(d, perm)
        out[rows, arr] += q ** inversions(perm)
    return out


def gram_fast(q: float, d: int, n: int) -> np.ndarray:
    """Level-n Gram in the normalized frame via the level recursion; cached
    per (q, d, n)."""
    key = (float(q), d, n)
    cached = _GRAM_CACHE.get(key)
    if cached is not None:
        return cached
    if n == 0:
        out = np.ones((1, 1))
    elif n == 1:
        out = np.eye(d)
    else:
        prev = gram_fast(q, d, n - 1)
        base = np.kron(np.eye(d), prev)
        out = base.copy()
        cols = np.arange(d**n)
        power = 1.0
        for j in range(1, n):
            cols = cols[swap_slot_index_array(d, n, j)]
            power *= q
            out += power * base[:, cols]
    out.setflags(write=False)
    _GRAM_CACHE[key] = out
    return out


def gram_cholesky(q: float, d: int, n: int) -> np.ndarray:
    """Lower Cholesky factor of the normalized level-n Gram; cached."""
    key = (float(q), d, n)
    cached = _CHOL_CACHE.get(key)
    if cached is not None:
        return cached
    out = np.linalg.cholesky(gram_fast(q, d, n))
    out.setflags(write=False)
    _CHOL_CACHE[key] = out
    return out


# ---------------------------------------------------------------------------
# vectors


@dataclass
class FockVector:
    """Finitely supported vector, stored per level in the normalized frame."""

    blocks: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.blocks = {
            n: np.asarray(b, dtype=complex) for n, b in self.blocks.items() if n >= 0
        }

    def levels(self) -> List[int]:
        return sorted(self.blocks)

    @property
    def max_level(self) -> int:
        return max(self.blocks, default=-1)

    def block(self, n: int, d: int) -> np.ndarray:
        got = self.blocks.get(n)
        if got is not None:
            return got
        return np.zeros(d**n, dtype=complex)

    def copy(self) -> "FockVector":
        return FockVector({n: b.copy() for n, b in self.blocks.items()})

    def __add__(self, other: "FockVector") -> "FockVector":
        out = {n: b.copy() for n, b in self.blocks.items()}
        for n, b in other.blocks.items():
            out[n] = out[n] + b if n in out else b.copy()
        return FockVector(out)

    def __sub__(self, other: "FockVector") -> "FockVector":
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "FockVector":
        return FockVector({n: scalar * b for n, b in self.blocks.items()})

    def __mul__(self, scalar) -> "FockVector":
        return self.__rmul__(scalar)


# ---------------------------------------------------------------------------
# the truncated space


class FockSpace:
    """Truncated deformed Fock space with levels 0..n_max."""

    def __init__(self, q: float, one_particle: OneParticleSpace, n_max: int):
        if not (-1.0 < q < 1.0):
            raise ValueError(f"q must lie in (-1, 1), got {q}")
        if n_max < 0:
            raise ValueError("n_max must be >= 0")
        self.q = float(q)
        self.one_particle = one_particle
        self.n_max = int(n_max)

    @property
    def d(self) -> int:
        return self.one_particle.dim

    @property
    def level_dims(self) -> List[int]:
        return [self.d**n for n in range(self.n_max + 1)]

    @property
    def total_dim(self) -> int:
        return sum(self.level_dims)

    def __repr__(self) -> str:
        return (
            f"FockSpace(q={self.q}, d={self.d}, n_max={self.n_max}, "
            f"total_dim={self.total_dim})"
        )

    # ---- grams
    def gram(self, n: int, frame: str = "normalized") -> np.ndarray:
        """Level-n Gram matrix of the word basis in the requested frame."""
        self._check_level(n)
        core = gram_fast(self.q, self.d, n)
        if frame == "normalized":
            return core
        if frame == "external":
            scale = self.word_scales(n)
            return scale[:, None] * core * scale[None, :]
        raise ValueError(f"unknown frame {frame!r}")

    def gram_cholesky(self, n: int) -> np.ndarray:
        self._check_level(n)
        return gram_cholesky(self.q, self.d, n)

    def word_scales(self, n: int) -> np.ndarray:
        """U-norms of the external word basis vectors: the level-n Kronecker
        power of the one-particle scales."""
        out = np.ones(1)
        for _ in range(n):
            out = np.kron(out, self.one_particle.scales)
        return out

    def _check_level(self, n: int) -> None:
        if not (0 <= n <= self.n_max):
            raise ValueError(f"level {n} outside 0..{self.n_max}")

    # ---- words and embeddings
    def word_index(self, letters: Sequence[int]) -> int:
        idx = 0
        for letter in letters:
            if not (0 <= letter < self.d):
                raise ValueError(f"letter {letter} out of range")
            idx = idx * self.d + letter
        return idx

    def vacuum(self) -> FockVector:
        return FockVector({0: np.ones(1, dtype=complex)})

    def word_vector(
        self, letters: Sequence[int], frame: str = "normalized"
    ) -> FockVector:
        """Basis word as a FockVector.

        frame="normalized": the U-unit word (unit coefficient vector).
        frame="external": the unnormalized word built from the external
        basis vectors; its normalized coefficient is the word's U-norm.
        """
        n = len(letters)
        self._check_level(n)
        idx = self.word_index(letters)
        coeff = np.zeros(self.d**n, dtype=complex)
        if frame == "normalized":
            coeff[idx] = 1.0
        elif frame == "external":
            coeff[idx] = self.word_scales(n)[idx]
        else:
            raise ValueError(f"unknown frame {frame!r}")
        return FockVector({n: coeff})

    def embed_tensor(
        self, vectors: Sequence[np.ndarray], frame: str = "normalized"
    ) -> FockVector:
        """Tensor product of one-particle coefficient vectors as a level-n
        FockVector.  Inputs in the external frame are converted."""
        n = len(vectors)
        self._check_level(n)
        coeff = np.ones(1, dtype=complex)
        for v in vectors:
            v = np.asarray(v, dtype=complex)
            if v.shape != (self.d,):
                raise ValueError("one-particle vector has wrong dimension")
            if frame == "external":
                v = self.one_particle.to_normalized(v)
            elif frame != "normalized":
                raise ValueError(f"unknown frame {frame!r}")
            coeff = np.kron(coeff, v)
        return FockVector({n: coeff})

    # ---- inner products
    def inner(self, x: FockVector, y: FockVector) -> complex:
        """Deformed inner product, linear in the second argument."""
        total = 0.0 + 0.0j
        for n in x.blocks.keys() & y.blocks.keys():
            self._check_level(n)
            total += np.vdot(x.blocks[n], gram_fast(self.q, self.d, n) @ y.blocks[n])
        return complex(total)

    def norm(self, x: FockVector) -> float:
        return float(np.sqrt(max(self.inner(x, x).real, 0.0)))

    def random_vector(
        self, rng: np.random.Generator, max_level: Optional[int] = None
    ) -> FockVector:
        max_level = self.n_max if max_level is None else max_level
        self._check_level(max_level)
        return FockVector(
            {
                n: rng.normal(size=self.d**n) + 1j * rng.normal(size=self.d**n)
                for n in range(max_level + 1)
            }
        )


# ---------------------------------------------------------------------------
# gram dumps


def gram_csv(space: FockSpace, levels: Iterable[int], frame: str = "external") -> str:
    """Deterministic CSV dump of level Gram matrices.

    For each level: a header line ``level,n_rows,n_cols``, its values, then
    the matrix rows, each emitted as a ``re,...`` line followed by an
    ``im,...`` line, all values with 17 significant digits.
    """
    lines = []
    for n in levels:
        g = space.gram(n, frame=frame)
        g = np.asarray(g, dtype=complex)
        lines.append("level,n_rows,n_cols")
        lines.append(f"{n},{g.shape[0]},{g.shape[1]}")
        for row in g:
            lines.append("re," + ",".join(f"{v.real:.17g}" for v in row))
            lines.append("im," + ",".join(f"{v.imag:.17g}" for v in row))
    return "\n".join(lines) + "\n"
