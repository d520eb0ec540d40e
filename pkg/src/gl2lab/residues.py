"""Exact arithmetic for 2x2 matrices over Z/nZ.

Every modulus used anywhere in this package has the form n = 2^a * q with
0 <= a <= 10 and q in {1, 3, 5, 7, 9, 13, 25}.  The 2-part headroom (up to
2^10 = 1024) is what the degree-2^r isogeny transforms need for their
lifting step (they pass through 2^(5+r) with r <= 5); the odd parts are the
levels that actually occur in the rational classification tables.

Convention
----------
A matrix with rows [[a, b], [c, d]] acts on column vectors: for v = (x, y),

    M(v) = (a*x + b*y, c*x + d*y)  (mod n).

In basis terms, if sigma sends P to a*P + c*Q and Q to b*P + d*Q, then the
matrix of sigma with respect to {P, Q} is [[a, b], [c, d]].  Text I/O is
row-major throughout: "[[a,b],[c,d]] mod n".

Packing
-------
A matrix packs into a single integer key

    key = ((a*n + b)*n + c)*n + d,

which is < n^4 <= 25600^4 < 2^63, so whole groups live in sorted int64
arrays.  The layout (row-major, most-significant entry first) is stable and
other modules rely on it.
"""

from __future__ import annotations

import re
from functools import lru_cache
from math import gcd
from typing import NamedTuple, Sequence, Union


SUPPORTED_ODD_PARTS = (1, 3, 5, 7, 9, 13, 25)
MAX_TWO_EXPONENT = 10

# Euler phi for the supported odd parts (all tiny; saves a factorization).
_PHI_ODD = {1: 1, 3: 2, 5: 4, 7: 6, 9: 6, 13: 12, 25: 20}


class UnsupportedModulusError(ValueError):
    """Modulus outside the supported 2^a * q range."""


class ModulusMismatchError(ValueError):
    """Two matrices (or groups) with different moduli were combined."""


class NonInvertibleError(ValueError):
    """A matrix or unit inverse was requested where none exists."""


class MatrixParseError(ValueError):
    """Text did not parse as a 2x2 matrix."""


@lru_cache(maxsize=None)
def modulus_parts(n: int) -> tuple[int, int]:
    """Split a supported modulus into (two_exponent, odd_part).

    Raises UnsupportedModulusError for anything outside the 2^a * q grid.
    """
    if not isinstance(n, int) or n < 1:
        raise UnsupportedModulusError("modulus must be a positive integer, got %r" % (n,))
    a, rest = 0, n
    while rest % 2 == 0:
        a += 1
        rest //= 2
    if a > MAX_TWO_EXPONENT or rest not in SUPPORTED_ODD_PARTS:
        raise UnsupportedModulusError(
            "modulus %d is not of the form 2^a*q with a <= %d and q in %s"
            % (n, MAX_TWO_EXPONENT, list(SUPPORTED_ODD_PARTS))
        )
    return a, rest


def is_supported_modulus(n: int) -> bool:
    try:
        modulus_parts(n)
    except UnsupportedModulusError:
        return False
    return True


def euler_phi(n: int) -> int:
    """phi(n) for a supported modulus."""
    a, q = modulus_parts(n)
    return (1 if a == 0 else 1 << (a - 1)) * _PHI_ODD[q]


class Mat(NamedTuple):
    """A 2x2 matrix over Z/nZ, rows [[a, b], [c, d]]."""

    n: int
    a: int
    b: int
    c: int
    d: int

    def rows(self) -> list[list[int]]:
        return [[self.a, self.b], [self.c, self.d]]

    def __str__(self) -> str:  # pragma: no cover - convenience only
        return format_matrix(self)


def mat(n: int, entries) -> Mat:
    """Build a Mat from nested rows [[a,b],[c,d]] or a flat (a,b,c,d)."""
    modulus_parts(n)
    if len(entries) == 2:
        (a, b), (c, d) = entries
    elif len(entries) == 4:
        a, b, c, d = entries
    else:
        raise MatrixParseError("expected [[a,b],[c,d]] rows or 4 flat entries")
    return Mat(n, int(a) % n, int(b) % n, int(c) % n, int(d) % n)


def identity(n: int) -> Mat:
    return mat(n, (1, 0, 0, 1))


def minus_identity(n: int) -> Mat:
    return mat(n, (-1, 0, 0, -1))


def mat_det(x: Mat) -> int:
    return (x.a * x.d - x.b * x.c) % x.n


def is_invertible(x: Mat) -> bool:
    return gcd(mat_det(x), x.n) == 1


def mat_mul(x: Mat, y: Mat) -> Mat:
    """Matrix product x*y; both factors must share a modulus."""
    if x.n != y.n:
        raise ModulusMismatchError("cannot multiply mod %d by mod %d" % (x.n, y.n))
    n = x.n
    return Mat(
        n,
        (x.a * y.a + x.b * y.c) % n,
        (x.a * y.b + x.b * y.d) % n,
        (x.c * y.a + x.d * y.c) % n,
        (x.c * y.b + x.d * y.d) % n,
    )


def mat_inv(x: Mat) -> Mat:
    """Inverse of an invertible matrix (adjugate over det)."""
    n = x.n
    det = mat_det(x)
    if gcd(det, n) != 1:
        raise NonInvertibleError("matrix %s has determinant %d, not a unit mod %d"
                                 % (format_matrix(x, with_modulus=False), det, n))
    dinv = pow(det, -1, n) if n > 1 else 0
    return Mat(n, (x.d * dinv) % n, (-x.b * dinv) % n, (-x.c * dinv) % n, (x.a * dinv) % n)


def mat_pow(x: Mat, e: int) -> Mat:
    if e < 0:
        return mat_pow(mat_inv(x), -e)
    out = identity(x.n)
    base = x
    while e:
        if e & 1:
            out = mat_mul(out, base)
        base = mat_mul(base, base)
        e >>= 1
    return out


def mat_order(x: Mat) -> int:
    """Multiplicative order of an invertible matrix."""
    if not is_invertible(x):
        raise NonInvertibleError("order is defined for invertible matrices only")
    ident = identity(x.n)
    power = x
    k = 1
    while power != ident:
        power = mat_mul(power, x)
        k += 1
    return k


def transpose(x: Mat) -> Mat:
    return Mat(x.n, x.a, x.c, x.b, x.d)


def apply_to_vector(x: Mat, v: tuple[int, int]) -> tuple[int, int]:
    """Column-vector action (x, y) -> (a*x + b*y, c*x + d*y)."""
    return ((x.a * v[0] + x.b * v[1]) % x.n, (x.c * v[0] + x.d * v[1]) % x.n)


def unit_order(u: int, n: int) -> int:
    """Multiplicative order of the unit u modulo n."""
    modulus_parts(n)
    u %= n
    if gcd(u, n) != 1:
        raise NonInvertibleError("%d is not a unit mod %d" % (u, n))
    if n == 1:
        return 1
    k, acc = 1, u
    while acc != 1:
        acc = acc * u % n
        k += 1
    return k


def crt_lift(x2: Mat, xq: Mat) -> Mat:
    """Entrywise CRT combination of a 2-power-modulus matrix with an odd one.

    x2 lives mod 2^a (a >= 0) and xq mod an odd q; the result lives mod
    2^a * q and reduces to each input.
    """
    a2, q2 = modulus_parts(x2.n)
    aq, qq = modulus_parts(xq.n)
    if q2 != 1:
        raise ModulusMismatchError("first argument must have a 2-power modulus, got %d" % x2.n)
    if aq != 0:
        raise ModulusMismatchError("second argument must have an odd modulus, got %d" % xq.n)
    n = x2.n * xq.n
    modulus_parts(n)  # reject anything outside the supported grid
    if x2.n == 1:
        return Mat(n, xq.a, xq.b, xq.c, xq.d)
    if xq.n == 1:
        return Mat(n, x2.a, x2.b, x2.c, x2.d)
    # v == e2 mod 2^a and eq mod q:  v = e2 + 2^a * ((eq - e2) * inv(2^a) mod q)
    inv2a = pow(x2.n, -1, xq.n)

    def combine(e2: int, eq: int) -> int:
        return (e2 + x2.n * (((eq - e2) * inv2a) % xq.n)) % n

    return Mat(n, combine(x2.a, xq.a), combine(x2.b, xq.b),
               combine(x2.c, xq.c), combine(x2.d, xq.d))


def pack(x: Mat) -> int:
    """Stable int64 key: ((a*n + b)*n + c)*n + d."""
    n = x.n
    return ((x.a * n + x.b) * n + x.c) * n + x.d


def unpack(key: int, n: int) -> Mat:
    d = key % n
    key //= n
    c = key % n
    key //= n
    b = key % n
    a = key // n
    return Mat(n, a % n, b, c, d)


_MATRIX_RE = re.compile(
    r"""^\s*\[\s*\[\s*(-?\d+)\s*,\s*(-?\d+)\s*\]\s*,\s*
        \[\s*(-?\d+)\s*,\s*(-?\d+)\s*\]\s*\]\s*
        (?:mod\s+(\d+)\s*)?$""",
    re.VERBOSE,
)


def parse_matrix(text: str, n: Union[int, None] = None) -> Mat:
    """Parse "[[a,b],[c,d]]" with an optional " mod n" suffix.

    If the suffix is absent, n must be supplied; if both are present they
    must agree.
    """
    m = _MATRIX_RE.match(text)
    if not m:
        raise MatrixParseError("cannot parse %r as [[a,b],[c,d]] mod n" % (text,))
    a, b, c, d = (int(m.group(i)) for i in range(1, 5))
    suffix = m.group(5)
    if suffix is not None:
        n_text = int(suffix)
        if n is not None and n != n_text:
            raise ModulusMismatchError(
                "matrix text says mod %d but mod %d was requested" % (n_text, n))
        n = n_text
    if n is None:
        raise MatrixParseError("no modulus in %r and none supplied" % (text,))
    return mat(n, (a, b, c, d))


def format_matrix(x: Mat, with_modulus: bool = True) -> str:
    body = "[[%d,%d],[%d,%d]]" % (x.a, x.b, x.c, x.d)
    return "%s mod %d" % (body, x.n) if with_modulus else body


def parse_generators(text: str, n: Union[int, None] = None) -> tuple[Mat, ...]:
    """Parse one or more matrices from text.

    Matrices may be separated by semicolons or whitespace; a trailing
    " mod n" applies to the whole list.
    """
    text = text.strip()
    tail = re.search(r"mod\s+(\d+)\s*$", text)
    if tail:
        n_text = int(tail.group(1))
        if n is not None and n != n_text:
            raise ModulusMismatchError(
                "generator text says mod %d but mod %d was requested" % (n_text, n))
        n = n_text
        text = text[: tail.start()].strip()
    if n is None:
        raise MatrixParseError("no modulus given for generator list")
    chunks = [c for c in re.split(r"[;\s]+(?=\[\[)", text) if c.strip()]
    if not chunks:
        raise MatrixParseError("no matrices found in %r" % (text,))
    return tuple(parse_matrix(chunk, n) for chunk in chunks)
