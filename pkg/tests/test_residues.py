"""Scalar matrix arithmetic: worked examples plus randomized identities."""

import random

import pytest

from gl2lab.residues import (
    Mat,
    MatrixParseError,
    ModulusMismatchError,
    NonInvertibleError,
    UnsupportedModulusError,
    crt_lift,
    euler_phi,
    format_matrix,
    identity,
    is_invertible,
    is_supported_modulus,
    mat,
    mat_det,
    mat_inv,
    mat_mul,
    mat_order,
    mat_pow,
    minus_identity,
    modulus_parts,
    pack,
    parse_generators,
    parse_matrix,
    transpose,
    unit_order,
    unpack,
)


def test_modulus_grid():
    assert modulus_parts(1) == (0, 1)
    assert modulus_parts(32) == (5, 1)
    assert modulus_parts(104) == (3, 13)
    assert modulus_parts(1024) == (10, 1)  # lifting headroom for r = 5
    assert modulus_parts(3200) == (7, 25)
    for bad in (0, -4, 11, 2 * 11, 27, 49, 2**11, 2**11 * 3):
        assert not is_supported_modulus(bad)
        with pytest.raises(UnsupportedModulusError):
            modulus_parts(bad)


def test_mul_worked_example():
    # [[3,3],[0,1]] * [[0,1],[3,1]] mod 4 == [[1,2],[3,1]]
    x = mat(4, [[3, 3], [0, 1]])
    y = mat(4, [[0, 1], [3, 1]])
    assert mat_mul(x, y) == mat(4, [[1, 2], [3, 1]])


def test_mul_modulus_mismatch():
    with pytest.raises(ModulusMismatchError):
        mat_mul(identity(4), identity(8))


def test_inverse_and_det():
    x = mat(8, [[3, 6], [0, 1]])
    xi = mat_inv(x)
    assert mat_mul(x, xi) == identity(8)
    assert mat_mul(xi, x) == identity(8)
    assert mat_det(x) == 3
    singular = mat(8, [[2, 0], [0, 1]])
    assert not is_invertible(singular)
    with pytest.raises(NonInvertibleError):
        mat_inv(singular)


def test_inverse_randomized():
    rng = random.Random(0xC0FFEE)
    for n in (2, 4, 8, 32, 3, 25, 12, 104):
        count = 0
        while count < 200:
            x = mat(n, [rng.randrange(n) for _ in range(4)])
            if not is_invertible(x):
                continue
            count += 1
            assert mat_mul(x, mat_inv(x)) == identity(n)
            y = mat(n, [rng.randrange(n) for _ in range(4)])
            # det is multiplicative even when y is singular
            assert mat_det(mat_mul(x, y)) == (mat_det(x) * mat_det(y)) % n


def test_unit_orders():
    # ord(3) = ord(5) = 2^(s-2) mod 2^s for s >= 3
    for s in range(3, 8):
        assert unit_order(3, 1 << s) == 1 << (s - 2)
        assert unit_order(5, 1 << s) == 1 << (s - 2)
    assert unit_order(3, 4) == 2
    assert unit_order(1, 1) == 1
    assert unit_order(2, 13) == 12
    with pytest.raises(NonInvertibleError):
        unit_order(2, 8)


def test_unit_order_matches_brute_force():
    rng = random.Random(7)
    for n in (8, 16, 64, 9, 13, 25, 40):
        for _ in range(30):
            u = rng.randrange(1, n)
            if u % 2 == 0 and n % 2 == 0:
                continue
            from math import gcd

            if gcd(u, n) != 1:
                continue
            k = unit_order(u, n)
            assert pow(u, k, n) == 1
            assert all(pow(u, j, n) != 1 for j in range(1, k))


def test_crt_lift_examples():
    # ([[1,2],[0,1]] mod 4) x ([[1,1],[0,1]] mod 3) -> [[1,10],[0,1]] mod 12
    got = crt_lift(mat(4, [[1, 2], [0, 1]]), mat(3, [[1, 1], [0, 1]]))
    assert got == mat(12, [[1, 10], [0, 1]])
    # ([[3,0],[0,1]] mod 8) x (identity mod 3) -> [[19,0],[0,1]] mod 24
    got = crt_lift(mat(8, [[3, 0], [0, 1]]), identity(3))
    assert got == mat(24, [[19, 0], [0, 1]])


def test_crt_lift_reduces_to_inputs():
    rng = random.Random(17)
    for _ in range(100):
        n2 = 1 << rng.randrange(0, 6)
        q = rng.choice((1, 3, 5, 9, 13, 25))
        x2 = mat(n2, [rng.randrange(n2) for _ in range(4)]) if n2 > 1 else identity(1)
        xq = mat(q, [rng.randrange(q) for _ in range(4)]) if q > 1 else identity(1)
        z = crt_lift(x2, xq)
        assert z.n == n2 * q
        for ze, e2, eq in zip(z[1:], x2[1:], xq[1:]):
            assert ze % n2 == e2
            assert ze % q == eq


def test_crt_lift_rejects_wrong_shapes():
    with pytest.raises(ModulusMismatchError):
        crt_lift(mat(3, [[1, 0], [0, 1]]), mat(3, [[1, 0], [0, 1]]))
    with pytest.raises(ModulusMismatchError):
        crt_lift(mat(8, [[1, 0], [0, 1]]), mat(6, [[1, 0], [0, 1]]))


def test_pack_unpack_roundtrip():
    rng = random.Random(99)
    for n in (2, 32, 104, 3200):
        for _ in range(50):
            x = mat(n, [rng.randrange(n) for _ in range(4)])
            key = pack(x)
            assert 0 <= key < n**4
            assert unpack(key, n) == x
    assert 25600**4 < 2**63  # the packing fits an int64 for every modulus


def test_parse_and_format():
    x = parse_matrix("[[3,6],[0,1]] mod 8")
    assert x == mat(8, [[3, 6], [0, 1]])
    assert format_matrix(x) == "[[3,6],[0,1]] mod 8"
    assert format_matrix(x, with_modulus=False) == "[[3,6],[0,1]]"
    assert parse_matrix("[[1, -1], [0, 1]]", 4) == mat(4, [[1, 3], [0, 1]])
    with pytest.raises(MatrixParseError):
        parse_matrix("[[1,2],[3]]", 4)
    with pytest.raises(MatrixParseError):
        parse_matrix("[[1,2],[3,4]]")  # no modulus anywhere
    with pytest.raises(ModulusMismatchError):
        parse_matrix("[[1,2],[3,4]] mod 8", 4)


def test_parse_generator_lists():
    gens = parse_generators("[[3,3],[0,1]]; [[0,1],[3,1]] mod 4")
    assert gens == (mat(4, [[3, 3], [0, 1]]), mat(4, [[0, 1], [3, 1]]))
    gens = parse_generators("[[1,0],[2,1]] [[3,0],[0,1]] [[5,0],[0,1]]", 8)
    assert len(gens) == 3 and all(g.n == 8 for g in gens)


def test_misc_helpers():
    assert minus_identity(4) == mat(4, [[3, 0], [0, 3]])
    assert minus_identity(2) == identity(2)
    assert transpose(mat(8, [[1, 2], [3, 4]])) == mat(8, [[1, 3], [2, 4]])
    assert mat_pow(mat(32, [[1, 1], [0, 1]]), 32) == identity(32)
    assert mat_order(mat(32, [[1, 1], [0, 1]])) == 32
    # [[0,1],[-1,0]] squares to -Id: the standard rigidity witness
    w = mat(32, [[0, 1], [-1, 0]])
    assert mat_pow(w, 2) == minus_identity(32)
    assert euler_phi(104) == 48
    assert euler_phi(1) == 1
