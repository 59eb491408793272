"""The twisted one-particle space.

The space is a direct sum of doubled directions.  Each doubled direction
carries a parameter ``lam`` in (0, 1) and a distinguished pair of vectors
(e, ebar) that are exchanged by the canonical conjugation and satisfy

    <e, e>_U = lam**-0.5,   <ebar, ebar>_U = lam**0.5,   <e, ebar>_U = 0,

where <.,.>_U is the twisted inner product (linear in the second slot).
Optionally a number of fixed directions can be appended; these are
untwisted (U-norm one) and invariant under both conjugations.

Two frames are supported for coefficients:

* ``external``: coordinates with respect to (e, ebar, ...) themselves;
  the Gram matrix is the diagonal of lam powers above.
* ``normalized``: coordinates with respect to the U-unit rescalings of
  the same vectors; the Gram matrix is the identity.  All heavy numerics
  run in this frame, external data is recovered through the diagonal
  scale matrix.

``make_block`` builds an explicit 2x2 matrix model of one doubled
direction (the positive operator A with eigenvalues 1/lam and lam, and
U = 2 (1 + A^-1)^-1) and is used by the tests to certify that the
diagonal Gram above is the honest twisted inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np


def _validate_lam(lam: float) -> None:
    if not (0.0 < lam < 1.0):
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")


# ---------------------------------------------------------------------------
# explicit ambient model of a single doubled direction


@dataclass(frozen=True)
class AmbientBlock:
    """Concrete 2x2 model of one doubled direction on C^2.

    A is positive with eigenvalues (1/lam, lam); e spans the 1/lam
    eigenspace, its entrywise conjugate ebar the lam eigenspace, and the
    twisted inner product is <xi, zeta>_U = <U xi, zeta> with
    U = 2 (1 + A^-1)^-1.
    """

    lam: float
    a_matrix: np.ndarray = field(repr=False)
    u_matrix: np.ndarray = field(repr=False)
    e: np.ndarray = field(repr=False)
    ebar: np.ndarray = field(repr=False)

    def inner_u(self, xi: np.ndarray, zeta: np.ndarray) -> complex:
        """Twisted inner product of ambient vectors, linear in ``zeta``."""
        return complex(np.vdot(self.u_matrix @ np.asarray(xi), np.asarray(zeta)))

    def inner_ambient(self, xi: np.ndarray, zeta: np.ndarray) -> complex:
        return complex(np.vdot(np.asarray(xi), np.asarray(zeta)))

    def r_conj(self, xi: np.ndarray) -> np.ndarray:
        """The antilinear involution with e |-> ebar/lam, ebar |-> lam e."""
        xi = np.asarray(xi, dtype=complex)
        # decompose along the A-eigenbasis, then swap with lam weights
        denom = self.inner_ambient(self.e, self.e)
        a = self.inner_ambient(self.e, xi) / denom
        b = self.inner_ambient(self.ebar, xi) / denom
        return np.conj(a) / self.lam * self.ebar + np.conj(b) * self.lam * self.e


def make_block(lam: float) -> AmbientBlock:
    """Explicit matrix model of one doubled direction with parameter lam."""
    _validate_lam(lam)
    # unitary diagonalizer: columns span the (1/lam, lam) eigenspaces
    f = np.array([[1.0, 1.0], [1.0j, -1.0j]], dtype=complex) / np.sqrt(2.0)
    a_matrix = f @ np.diag([1.0 / lam, lam]) @ f.conj().T
    u_matrix = f @ np.diag([2.0 / (1.0 + lam), 2.0 * lam / (1.0 + lam)]) @ f.conj().T
    alpha = np.sqrt(1.0 + lam) / (2.0 * lam**0.25)
    e = alpha * np.array([1.0, 1.0j])
    return AmbientBlock(
        lam=lam, a_matrix=a_matrix, u_matrix=u_matrix, e=e, ebar=e.conj()
    )


# ---------------------------------------------------------------------------
# the abstract direct-sum space


def apply_antilinear(k_matrix: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Apply an antilinear map stored as ``coeffs -> K conj(coeffs)``."""
    return np.asarray(k_matrix) @ np.conj(np.asarray(coeffs))


@dataclass(frozen=True)
class OneParticleSpace:
    """Direct sum of doubled directions plus optional fixed directions.

    Basis order: (e_0, ebar_0, e_1, ebar_1, ..., f_0, f_1, ...).
    """

    lams: Tuple[float, ...]
    n_fixed: int = 0

    def __post_init__(self):
        if len(self.lams) == 0 and self.n_fixed == 0:
            raise ValueError("space must have at least one direction")
        for lam in self.lams:
            _validate_lam(lam)
        if self.n_fixed < 0:
            raise ValueError("n_fixed must be >= 0")

    @property
    def dim(self) -> int:
        return 2 * len(self.lams) + self.n_fixed

    @property
    def n_blocks(self) -> int:
        return len(self.lams)

    # ---- index bookkeeping
    def e_index(self, block: int = 0) -> int:
        self._check_block(block)
        return 2 * block

    def ebar_index(self, block: int = 0) -> int:
        self._check_block(block)
        return 2 * block + 1

    def fixed_index(self, i: int) -> int:
        if not (0 <= i < self.n_fixed):
            raise ValueError(f"fixed index {i} out of range")
        return 2 * len(self.lams) + i

    def _check_block(self, block: int) -> None:
        if not (0 <= block < len(self.lams)):
            raise ValueError(f"block {block} out of range")

    # ---- gram data
    @property
    def u_gram_diag(self) -> np.ndarray:
        """Diagonal of the twisted Gram matrix in the external basis."""
        out = np.empty(self.dim)
        for j, lam in enumerate(self.lams):
            out[2 * j] = lam**-0.5
            out[2 * j + 1] = lam**0.5
        out[2 * len(self.lams) :] = 1.0
        return out

    @property
    def scales(self) -> np.ndarray:
        """U-norms of the external basis vectors (sqrt of the Gram diagonal);
        external coefficients = normalized coefficients / scales."""
        return np.sqrt(self.u_gram_diag)

    # ---- conjugations, stored per frame as coeffs -> K conj(coeffs)
    def conj_matrix(self, frame: str = "normalized") -> np.ndarray:
        """Canonical conjugation: e_j <-> ebar_j, fixed directions fixed."""
        k = np.zeros((self.dim, self.dim))
        for j, lam in enumerate(self.lams):
            if frame == "external":
                k[2 * j, 2 * j + 1] = 1.0
                k[2 * j + 1, 2 * j] = 1.0
            elif frame == "normalized":
                k[2 * j, 2 * j + 1] = lam**-0.5
                k[2 * j + 1, 2 * j] = lam**0.5
            else:
                raise ValueError(f"unknown frame {frame!r}")
        for i in range(self.n_fixed):
            idx = 2 * len(self.lams) + i
            k[idx, idx] = 1.0
        return k

    def r_conj_matrix(self, frame: str = "normalized") -> np.ndarray:
        """Right conjugation: e_j -> ebar_j / lam_j, ebar_j -> lam_j e_j."""
        k = np.zeros((self.dim, self.dim))
        for j, lam in enumerate(self.lams):
            if frame == "external":
                k[2 * j, 2 * j + 1] = lam
                k[2 * j + 1, 2 * j] = 1.0 / lam
            elif frame == "normalized":
                k[2 * j, 2 * j + 1] = lam**0.5
                k[2 * j + 1, 2 * j] = lam**-0.5
            else:
                raise ValueError(f"unknown frame {frame!r}")
        for i in range(self.n_fixed):
            idx = 2 * len(self.lams) + i
            k[idx, idx] = 1.0
        return k

    # ---- coordinates and inner products
    def to_normalized(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs) * self.scales

    def to_external(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs) / self.scales

    def basis_vector(self, index: int, frame: str = "normalized") -> np.ndarray:
        """Coefficients of the external basis vector with this index."""
        out = np.zeros(self.dim, dtype=complex)
        out[index] = 1.0
        if frame == "normalized":
            return self.to_normalized(out)
        if frame == "external":
            return out
        raise ValueError(f"unknown frame {frame!r}")

    def inner_u(
        self, xi: np.ndarray, zeta: np.ndarray, frame: str = "normalized"
    ) -> complex:
        """Twisted inner product, linear in ``zeta``."""
        xi = np.asarray(xi)
        zeta = np.asarray(zeta)
        if frame == "normalized":
            return complex(np.vdot(xi, zeta))
        if frame == "external":
            return complex(np.vdot(xi, self.u_gram_diag * zeta))
        raise ValueError(f"unknown frame {frame!r}")

    def norm_u(self, xi: np.ndarray, frame: str = "normalized") -> float:
        val = self.inner_u(xi, xi, frame=frame)
        return float(np.sqrt(max(val.real, 0.0)))


def make_space(lams, n_fixed: int = 0) -> OneParticleSpace:
    """Direct sum of doubled directions with the given parameters, plus
    ``n_fixed`` untwisted directions."""
    return OneParticleSpace(lams=tuple(float(v) for v in lams), n_fixed=n_fixed)
