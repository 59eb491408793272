"""Tests for the truncated deformed Fock space.

The defining permutation-sum formula for the deformed inner product is
implemented here as a literal triple loop and used as the oracle for both
Gram assembly paths (permutation sum and level recursion).
"""

import itertools

import numpy as np
import pytest

from qfock.fock import (
    FockSpace,
    FockVector,
    gram_bruteforce,
    gram_cholesky,
    gram_csv,
    gram_fast,
    permutation_index_array,
    swap_slot_index_array,
)
from qfock.oneparticle import make_space
from qfock.qcomb import q_factorial


def inv(p):
    return sum(p[i] > p[j] for i in range(len(p)) for j in range(i + 1, len(p)))


def gram_literal(q, d, n, one_gram=None):
    """Literal triple loop over word pairs and permutations; one_gram is the
    one-particle Gram (identity when omitted)."""
    if one_gram is None:
        one_gram = np.eye(d)
    words = list(itertools.product(range(d), repeat=n))
    out = np.zeros((d**n, d**n), dtype=complex)
    for a, v in enumerate(words):
        for b, w in enumerate(words):
            total = 0.0
            for p in itertools.permutations(range(n)):
                prod = q ** inv(p)
                for i in range(n):
                    prod *= one_gram[v[i], w[p[i]]]
                total += prod
            out[a, b] = total
    return out


def q_inner_oracle(q, xis, zetas):
    """Permutation-sum inner product of tensor words of normalized-frame
    one-particle vectors (linear in the second family)."""
    n = len(xis)
    total = 0.0 + 0.0j
    for p in itertools.permutations(range(n)):
        prod = complex(q ** inv(p))
        for i in range(n):
            prod *= np.vdot(xis[i], zetas[p[i]])
        total += prod
    return total


# ---------------------------------------------------------------------------
# index arrays


def test_swap_slot_index_array():
    d, n = 2, 3
    arr = swap_slot_index_array(d, n, 1)
    # word (1,0,0) -> (0,1,0): index 4 -> 2
    assert arr[4] == 2 and arr[2] == 4
    assert np.all(arr[arr] == np.arange(d**n))
    with pytest.raises(ValueError):
        swap_slot_index_array(d, n, 3)


def test_permutation_index_array_moves_letters():
    d = 3
    perm = (2, 3, 1)  # slot i goes to perm[i]
    arr = permutation_index_array(d, perm)
    for word in itertools.product(range(d), repeat=3):
        idx = word[0] * 9 + word[1] * 3 + word[2]
        moved = [0, 0, 0]
        for i, target in enumerate(perm):
            moved[target - 1] = word[i]
        assert arr[idx] == moved[0] * 9 + moved[1] * 3 + moved[2]


# ---------------------------------------------------------------------------
# gram matrices


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("q", [0.0, 0.3, -0.7])
def test_gram_fast_matches_literal(d, q):
    for n in range(4):
        np.testing.assert_allclose(
            gram_fast(q, d, n), gram_literal(q, d, n).real, atol=1e-13
        )


@pytest.mark.parametrize("q", [0.7, -0.7])
def test_gram_fast_matches_bruteforce_deeper(q):
    for n in range(7):
        np.testing.assert_allclose(
            gram_fast(q, 2, n), gram_bruteforce(q, 2, n), atol=1e-12
        )


def test_gram_bruteforce_cap():
    with pytest.raises(ValueError):
        gram_bruteforce(0.5, 2, 9)


def test_gram_level_two_explicit():
    q = -0.4
    expected = np.array(
        [
            [1 + q, 0, 0, 0],
            [0, 1, q, 0],
            [0, q, 1, 0],
            [0, 0, 0, 1 + q],
        ]
    )
    np.testing.assert_allclose(gram_fast(q, 2, 2), expected, atol=1e-15)


def test_gram_one_dimensional_is_q_factorial():
    for q in [0.3, -0.6]:
        for n in range(7):
            assert gram_fast(q, 1, n)[0, 0] == pytest.approx(
                float(q_factorial(n, q)), rel=1e-13
            )


def test_gram_zero_q_is_identity():
    for n in range(5):
        np.testing.assert_allclose(gram_fast(0.0, 2, n), np.eye(2**n), atol=0)


@pytest.mark.parametrize("q", [0.7, -0.7, 0.3])
def test_gram_positive_definite_and_cholesky(q):
    for n in range(8):
        g = gram_fast(q, 2, n)
        np.testing.assert_allclose(g, g.T, atol=1e-14)
        assert np.linalg.eigvalsh(g).min() > 0
        ell = gram_cholesky(q, 2, n)
        np.testing.assert_allclose(ell @ ell.T, g, atol=1e-12)


def test_gram_external_frame_matches_literal():
    lam = 0.25
    sp = make_space([lam])
    fock = FockSpace(-0.3, sp, 3)
    one_gram = np.diag(sp.u_gram_diag)
    for n in range(4):
        np.testing.assert_allclose(
            fock.gram(n, frame="external"),
            gram_literal(-0.3, 2, n, one_gram).real,
            rtol=1e-12,
            atol=1e-13,
        )


def test_word_scales():
    lam = 0.04
    fock = FockSpace(0.3, make_space([lam]), 3)
    np.testing.assert_allclose(
        fock.word_scales(2),
        [lam**-0.5, 1.0, 1.0, lam**0.5],
        rtol=1e-12,
    )


# ---------------------------------------------------------------------------
# the space and its vectors


def fixture_space(q=0.5, lam=0.25, n_max=4):
    return FockSpace(q, make_space([lam]), n_max)


def test_space_shape():
    fock = fixture_space()
    assert fock.d == 2
    assert fock.level_dims == [1, 2, 4, 8, 16]
    assert fock.total_dim == 31
    with pytest.raises(ValueError):
        fock.gram(5)
    with pytest.raises(ValueError):
        FockSpace(1.0, make_space([0.25]), 2)
    with pytest.raises(ValueError):
        FockSpace(0.5, make_space([0.25]), -1)


def test_vacuum_and_word_vectors():
    fock = fixture_space()
    assert fock.norm(fock.vacuum()) == pytest.approx(1.0)
    w = fock.word_vector([0, 1])
    assert w.levels() == [2]
    assert w.blocks[2][fock.word_index([0, 1])] == 1.0
    w_ext = fock.word_vector([0, 0], frame="external")
    # external word (e, e) has U-norm lam^(-1/2) at this level's diagonal
    expected = fock.word_scales(2)[0]
    assert w_ext.blocks[2][0] == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        fock.word_index([2])


def test_inner_matches_permutation_oracle():
    rng = np.random.default_rng(21)
    fock = fixture_space(q=-0.6)
    for n in [1, 2, 3]:
        xis = [rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(n)]
        zetas = [rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(n)]
        got = fock.inner(fock.embed_tensor(xis), fock.embed_tensor(zetas))
        expected = q_inner_oracle(-0.6, xis, zetas)
        assert got == pytest.approx(expected, rel=1e-11, abs=1e-12)


def test_inner_sesquilinearity_and_symmetry():
    rng = np.random.default_rng(5)
    fock = fixture_space(q=0.3)
    x = fock.random_vector(rng)
    y = fock.random_vector(rng)
    z = fock.random_vector(rng)
    a = 0.7 - 0.2j
    lhs = fock.inner(x, a * y + z)
    assert lhs == pytest.approx(a * fock.inner(x, y) + fock.inner(x, z), rel=1e-12)
    assert fock.inner(a * x, y) == pytest.approx(
        np.conj(a) * fock.inner(x, y), rel=1e-12
    )
    assert fock.inner(x, y) == pytest.approx(np.conj(fock.inner(y, x)), rel=1e-12)


def test_norm_via_cholesky():
    rng = np.random.default_rng(17)
    fock = fixture_space(q=-0.45)
    x = fock.random_vector(rng)
    total = 0.0
    for n in x.levels():
        ell = fock.gram_cholesky(n)
        total += np.sum(np.abs(ell.T @ x.blocks[n]) ** 2)
    assert fock.norm(x) == pytest.approx(np.sqrt(total), rel=1e-12)


def test_embed_tensor_frames():
    lam = 0.04
    fock = FockSpace(0.2, make_space([lam]), 3)
    ext = fock.embed_tensor([[1.0, 0.0], [0.0, 1.0]], frame="external")
    np.testing.assert_allclose(
        ext.blocks[2],
        fock.word_vector([0, 1], frame="external").blocks[2],
        atol=1e-14,
    )
    with pytest.raises(ValueError):
        fock.embed_tensor([[1.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        fock.embed_tensor([[1.0, 0.0]], frame="bogus")


def test_fock_vector_algebra():
    x = FockVector({0: [1.0], 2: [1.0, 0.0, 0.0, 2.0]})
    y = FockVector({2: [0.0, 1.0, 0.0, 0.0], 3: np.zeros(8)})
    z = x + 2.0 * y
    assert z.levels() == [0, 2, 3]
    np.testing.assert_allclose(z.blocks[2], [1.0, 2.0, 0.0, 2.0])
    w = z - x
    np.testing.assert_allclose(w.blocks[2], [0.0, 2.0, 0.0, 0.0])
    assert z.max_level == 3
    assert FockVector({}).max_level == -1
    np.testing.assert_allclose(x.block(1, 2), np.zeros(2))
    c = x.copy()
    c.blocks[0][0] = 5.0
    assert x.blocks[0][0] == 1.0


def test_gram_csv_round_trip_and_determinism():
    fock = fixture_space(q=0.3, lam=0.25, n_max=2)
    text = gram_csv(fock, levels=[0, 1, 2], frame="external")
    assert text == gram_csv(fock, levels=[0, 1, 2], frame="external")
    lines = text.strip().split("\n")
    assert lines[0] == "level,n_rows,n_cols"
    assert lines[1] == "0,1,1"
    # parse level 2 back and compare exactly (17 significant digits round-trip)
    idx = lines.index("2,4,4")
    rows = []
    for i in range(4):
        re_line = lines[idx + 1 + 2 * i].split(",")
        im_line = lines[idx + 2 + 2 * i].split(",")
        assert re_line[0] == "re" and im_line[0] == "im"
        rows.append(
            [float(a) + 1j * float(b) for a, b in zip(re_line[1:], im_line[1:])]
        )
    np.testing.assert_array_equal(np.array(rows), fock.gram(2, frame="external"))
    assert text.endswith("\n") and "\r" not in text
