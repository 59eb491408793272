"""Scalar q-combinatorics: inversions, q-integers, Gaussian binomials,
subset crossing statistics and the scalar sequences used by the
convergence checks.

All functions accept a deformation parameter ``q`` that is either a float
in (-1, 1) or a ``fractions.Fraction`` (exact mode).  Finite combinatorial
quantities (q-integers, q-binomials, crossing-weighted subset sums) stay
exact under Fraction input; infinite products are float only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence, Tuple

import numpy as np

# enumeration cap for the subset-pair sums; larger n is refused, not approximated
Q_COEFF_MAX_N = 10

# cap for the finite scan inside b_bound
_B_BOUND_M_CAP = 200


def _validate_q(q) -> None:
    if isinstance(q, Fraction):
        if not (Fraction(-1) < q < Fraction(1)):
            raise ValueError(f"q must lie in (-1, 1), got {q}")
    else:
        if not (-1.0 < float(q) < 1.0):
            raise ValueError(f"q must lie in (-1, 1), got {q}")


# ---------------------------------------------------------------------------
# permutations and inversions


@dataclass(frozen=True)
class Permutation:
    """A permutation stored as its image tuple (1-based values)."""

    image: Tuple[int, ...]

    def __post_init__(self):
        n = len(self.image)
        if sorted(self.image) != list(range(1, n + 1)):
            raise ValueError(f"not a permutation of 1..{n}: {self.image}")

    def __len__(self) -> int:
        return len(self.image)

    @property
    def inversions(self) -> int:
        return inversions(self.image)


def inversions(seq: Sequence[int]) -> int:
    """Number of pairs i < j with seq[i] > seq[j]."""
    return sum(
        seq[i] > seq[j] for i, j in itertools.combinations(range(len(seq)), 2)
    )


def subset_inversions(subset: Iterable[int], n: int) -> int:
    """Inversions of the word that lists ``subset`` increasingly and then its
    complement in {1..n} increasingly.

    Equals the number of pairs (a, b) with a in the subset, b outside,
    a > b.
    """
    s = set(subset)
    if not s <= set(range(1, n + 1)):
        raise ValueError(f"subset {sorted(s)} not contained in 1..{n}")
    return sum(1 for a in s for b in range(1, a) if b not in s)


def shuffle_subsets(n: int, i: int) -> Iterator[Tuple[Tuple[int, ...], int]]:
    """Enumerate the shuffles of {1..n} that are increasing on the first i
    slots and on the remaining n - i slots.

    Each shuffle is determined by the image of the first block; yields
    (image_subset, inversion_count).
    """
    for subset in itertools.combinations(range(1, n + 1), i):
        yield subset, subset_inversions(subset, n)


# ---------------------------------------------------------------------------
# q-integers, q-factorials, Gaussian binomials


def q_int(n: int, q):
    """[n]_q = 1 + q + ... + q^(n-1)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    total = q - q  # zero of the right type
    power = 1 + (q - q)
    for _ in range(n):
        total += power
        power *= q
    return total


def q_factorial(n: int, q):
    """[n]_q! = [1]_q [2]_q ... [n]_q, with [0]_q! = 1."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = 1 + (q - q)
    for j in range(1, n + 1):
        out *= q_int(j, q)
    return out


def q_binomial(n: int, k: int, q):
    """Gaussian binomial coefficient [n choose k]_q."""
    if k < 0 or k > n:
        raise ValueError(f"k must satisfy 0 <= k <= n, got k={k}, n={n}")
    # numerator and denominator kept separate so Fraction input stays exact
    num = 1 + (q - q)
    den = 1 + (q - q)
    for j in range(1, k + 1):
        num *= q_int(n - k + j, q)
        den *= q_int(j, q)
    return num / den


def d_seq(n: int, q):
    """The partial products d_j = prod_{i<=j} (1 - q^i) for j = 0..n."""
    _validate_q(q)
    out = [1 + (q - q)]
    power = 1 + (q - q)
    for j in range(1, n + 1):
        power *= q
        out.append(out[-1] * (1 - power))
    return out


@lru_cache(maxsize=None)
def d_infty(q: float, tol: float = 1e-15) -> float:
    """Infinite product prod_{j>=1} (1 - q^j).

    Truncated once the remaining factors are provably within ``tol`` of 1
    on a log scale: |log prod_{j>J}| <= |q|^(J+1) / (1-|q|)^2.
    """
    _validate_q(q)
    q = float(q)
    if q == 0.0:
        return 1.0
    a = abs(q)
    out = 1.0
    power = 1.0
    apow = 1.0
    j = 0
    while apow * a / (1.0 - a) ** 2 > tol:
        j += 1
        power *= q
        apow *= a
        out *= 1.0 - power
        if j > 100000:  # pragma: no cover - unreachable for |q| < 1
            raise RuntimeError("d_infty failed to converge")
    return out


@lru_cache(maxsize=None)
def c_q(q: float, tol: float = 1e-15) -> float:
    """The constant prod_{j>=1} 1 / (1 - |q|^j), with the same tail control
    as d_infty."""
    _validate_q(q)
    return 1.0 / d_infty(abs(float(q)), tol)


def d_abs_infty(q: float) -> float:
    """prod_{j>=1} (1 - |q|^j); equals d_infty(q) for q >= 0."""
    return d_infty(abs(float(q)))


# ---------------------------------------------------------------------------
# crossing statistics on split subsets


def crossings(subset: Iterable[int], universe: int) -> int:
    """Crossing number of a subset J of {1..universe}: the count of pairs
    (a, b) with a in J, b outside J and a > b.

    This is the literal pair count; it agrees with the inversion number of
    the shuffle that lists J first (see subset_inversions).
    """
    return subset_inversions(subset, universe)


@dataclass(frozen=True)
class CrossingSubset:
    """A split subset of {1..2n}: a part j1 inside {1..n} and a part j2
    inside {n+1..2n}."""

    n: int
    j1: Tuple[int, ...]
    j2: Tuple[int, ...]

    def __post_init__(self):
        if not set(self.j1) <= set(range(1, self.n + 1)):
            raise ValueError(f"j1 {self.j1} not contained in 1..{self.n}")
        if not set(self.j2) <= set(range(self.n + 1, 2 * self.n + 1)):
            raise ValueError(
                f"j2 {self.j2} not contained in {self.n + 1}..{2 * self.n}"
            )
        if len(set(self.j1)) != len(self.j1) or len(set(self.j2)) != len(self.j2):
            raise ValueError("subset parts must not contain duplicates")

    @property
    def union(self) -> Tuple[int, ...]:
        return tuple(sorted(self.j1 + self.j2))

    def crossings(self) -> int:
        return crossings(self.union, 2 * self.n)


def q_coeff(n: int, k: int, l: int, q):
    """Brute-force subset-pair sum sum_{J1, J2} q^crossings(J1 u J2) over all
    J1 in {1..n} with |J1| = k and J2 in {n+1..2n} with |J2| = l.

    Exact for Fraction q.  Enumeration only; n beyond the cap is refused.
    """
    if n < 0 or not (0 <= k <= n) or not (0 <= l <= n):
        raise ValueError(f"need 0 <= k, l <= n, got n={n}, k={k}, l={l}")
    if n > Q_COEFF_MAX_N:
        raise ValueError(
            f"q_coeff enumeration is capped at n <= {Q_COEFF_MAX_N}, got n={n}"
        )
    _validate_q(q)
    size = k + l
    internal_pairs = size * (size - 1) // 2
    total = q - q
    for j1 in itertools.combinations(range(1, n + 1), k):
        base = sum(j1)
        for j2 in itertools.combinations(range(n + 1, 2 * n + 1), l):
            # crossings of the union: sum of (a-1) over members, minus the
            # number of pairs inside the union (identity tested against the
            # literal pair count)
            cross = base + sum(j2) - size - internal_pairs
            total += q**cross
    return total


def q_coeff_product(n: int, k: int, l: int, q):
    """Closed product form q^((n-k) l) [n,k]_q [n,l]_q of the subset-pair sum;
    used as an independent cross-check of q_coeff."""
    if not (0 <= k <= n) or not (0 <= l <= n):
        raise ValueError(f"need 0 <= k, l <= n, got n={n}, k={k}, l={l}")
    return q ** ((n - k) * l) * q_binomial(n, k, q) * q_binomial(n, l, q)


def q_coeff_bound(n: int, k: int, l: int, q: float) -> float:
    """Decay bound C_q^2 |q|^((n-k) l) for the subset-pair sum."""
    return c_q(float(q)) ** 2 * abs(float(q)) ** ((n - k) * l)


# ---------------------------------------------------------------------------
# the scalar Cesaro sequence


def s_seq_bruteforce(n_max: int, q: float, lam: float) -> np.ndarray:
    """Literal triple sum for s_n, n = 1..n_max.  O(n^4); test oracle only."""
    _validate_params(q, lam)
    t = np.zeros(n_max + 1)
    for m in range(1, n_max + 1):
        acc = 0.0
        for l in range(1, m + 1):
            for k in range(m):
                acc += q ** ((m - k) * l) * lam ** ((k - l) / 2.0)
        t[m] = acc
    return np.cumsum(t[1:]) / np.arange(1, n_max + 1)


def _validate_params(q: float, lam: float) -> None:
    _validate_q(q)
    if not (0.0 < lam < 1.0):
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")


def s_seq(n_max: int, q: float, lam: float) -> np.ndarray:
    """Cesaro averages s_n = (1/n) sum_{m<=n} t_m of the double sums

        t_m = sum_{l=1}^m sum_{k=0}^{m-1} q^((m-k) l) lam^((k-l)/2),

    for n = 1..n_max.  The inner geometric sum over l is collapsed in
    closed form (an exact rewrite, not an approximation), with powers
    evaluated on a log scale so that no intermediate over- or underflows.
    """
    _validate_params(q, lam)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if q == 0.0:
        return np.zeros(n_max)
    log_q = math.log(abs(q))
    log_lam = math.log(lam)
    sign_q = 1.0 if q > 0 else -1.0
    # columns with |rho_i| = |q|^i/sqrt(lam) <= 1e-30 contribute at most
    # ~1e-21 to any t_m (the first l-term is <= |rho_i| sqrt(lam) and the
    # one-past-the-end term is <= |rho_i|^(i+1), against the 1e-8 floor
    # kept on the denominators), so the i-range can stop there
    i_cap = int(math.ceil((-30.0 * math.log(10.0) + 0.5 * log_lam) / log_q))
    i_top = max(1, min(n_max, i_cap))
    # per-column data, i = m - k; rho is the ratio of consecutive l-terms
    i_all = np.arange(1, i_top + 1, dtype=float)
    sign_rho = np.where((i_all % 2 == 0) | (sign_q > 0), 1.0, -1.0)
    rho = sign_rho * np.exp(i_all * log_q - 0.5 * log_lam)
    denom = 1.0 - rho
    safe = np.abs(denom) > 1e-8
    denom_safe = np.where(safe, denom, 1.0)
    t = np.zeros(n_max + 1)
    # the (m, i) triangle in row chunks; everything stays on a log scale
    chunk = 256
    for lo in range(1, n_max + 1, chunk):
        hi = min(lo + chunk - 1, n_max)
        cols = min(hi, i_top)
        m = np.arange(lo, hi + 1, dtype=float)[:, None]
        i = i_all[None, :cols]
        keep = (i <= m) & safe[None, :cols]
        # first l-term and the one-past-the-end term; exponents below
        # -700 underflow to irrelevance, so clamp them clear of the
        # subnormal range instead of paying its arithmetic penalty
        log_a1 = np.maximum(i * log_q + 0.5 * (m - i - 1.0) * log_lam, -700.0)
        log_end = np.maximum(i * (m + 1.0) * log_q - 0.5 * (i + 1.0) * log_lam, -700.0)
        sign_end = np.where((i * (m + 1.0) % 2 == 0) | (sign_q > 0), 1.0, -1.0)
        num = sign_rho[None, :cols] * np.exp(log_a1) - sign_end * np.exp(log_end)
        t[lo : hi + 1] = np.where(keep, num / denom_safe[None, :cols], 0.0).sum(axis=1)
        # near-degenerate ratios: sum the l-terms directly for those i
        for idx in np.nonzero(~safe[:cols])[0]:
            ii = idx + 1.0
            for mm in range(max(lo, idx + 1), hi + 1):
                ll = np.arange(1, mm + 1, dtype=float)
                logs = ii * ll * log_q + 0.5 * (mm - ii - ll) * log_lam
                signs = np.where((ii * ll % 2 == 0) | (sign_q > 0), 1.0, -1.0)
                t[mm] += float(np.sum(signs * np.exp(logs)))
    return np.cumsum(t[1:]) / np.arange(1, n_max + 1)


def b_bound(q: float, lam: float, m_cap: int = _B_BOUND_M_CAP) -> float:
    """Uniform bound on sum_{k,l=0}^m |q|^((m-k) l) lam^((k-l)/2) over all m:
    the maximum of the finite scan m <= m_cap together with an analytic
    estimate valid for every larger m."""
    _validate_params(q, lam)
    a = abs(q)
    log_lam = math.log(lam)
    finite = 0.0
    for m in range(1, m_cap + 1):
        k = np.arange(m + 1, dtype=float)[:, None]
        l = np.arange(m + 1, dtype=float)[None, :]
        pw = (m - k) * l
        if a == 0.0:
            qpart = np.where(pw == 0, 0.0, -np.inf)
        else:
            qpart = pw * math.log(a)
        total = float(np.sum(np.exp(qpart + 0.5 * (k - l) * log_lam)))
        finite = max(finite, total)
    # every m > m_cap: geometric-tail estimate
    sqrt_lam = math.sqrt(lam)
    tail = 1.0 / ((1.0 - a) * (1.0 - sqrt_lam))
    r = a**m_cap / sqrt_lam
    if r < 1.0:
        tail += (m_cap + 1) * r / (1.0 - r)
    else:  # pragma: no cover - not reachable for the supported grids
        tail = math.inf
    return max(finite, tail)


# ---------------------------------------------------------------------------
# parameter container with cached constants


@dataclass(frozen=True)
class QParams:
    """Deformation parameter with its cached derived constants."""

    q: float

    def __post_init__(self):
        _validate_q(self.q)

    @property
    def c_q(self) -> float:
        return c_q(self.q)

    @property
    def d_infty(self) -> float:
        return d_infty(self.q)

    @property
    def d_abs_infty(self) -> float:
        """prod (1 - |q|^j) = 1/C_q; coincides with d_infty for q >= 0."""
        return d_abs_infty(self.q)

    def d(self, n: int) -> float:
        return float(d_seq(n, self.q)[n])

    def q_int(self, n: int) -> float:
        return float(q_int(n, self.q))

    def q_factorial(self, n: int) -> float:
        return float(q_factorial(n, self.q))

    def q_binomial(self, n: int, k: int) -> float:
        return float(q_binomial(n, k, self.q))

    # constants appearing in the remainder and Cesaro bounds
    @property
    def a_prime(self) -> float:
        """C_q^6 / (1 - |q|): remainder bound for the orthogonal-letter case."""
        return self.c_q**6 / (1.0 - abs(self.q))

    @property
    def a_uniform(self) -> float:
        """C_q^3 + C_q^7 / (1 - |q|): index-independent remainder constant."""
        return self.c_q**3 + self.c_q**7 / (1.0 - abs(self.q))

    def a_overshoot(self, m: int, n: int, l: int) -> float:
        """|q|^((m-n-1) l) C_q^3 + C_q^7 / (1 - |q|): remainder constant for
        the overshooting case m > n (with 0^0 = 1 at q = 0)."""
        if m <= n:
            raise ValueError("overshoot constant requires m > n")
        head = abs(self.q) ** ((m - n - 1) * l) if (m - n - 1) * l > 0 else 1.0
        if self.q == 0.0 and (m - n - 1) * l > 0:
            head = 0.0
        return head * self.c_q**3 + self.c_q**7 / (1.0 - abs(self.q))

    @property
    def invertibility_threshold(self) -> float:
        """(1 + C_q^4)^(-2): series comparisons below this lambda certify an
        invertible limit."""
        return (1.0 + self.c_q**4) ** -2

    def b_bound(self, lam: float) -> float:
        return b_bound(self.q, lam)
