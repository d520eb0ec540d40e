"""Subgroups of GL(2, Z/nZ) as concrete element sets.

A group is represented by a GroupClosure: the sorted int64 array of its
packed elements (see residues for the packing) together with the generators
it was built from.  Everything downstream — lifts, conjugacy, twists,
isogeny transforms, modular-curve invariants — runs on these arrays, so the
hot paths here are all vectorized numpy.

The exhaustive flavour is deliberate: within the supported moduli the
ambient groups top out at |GL(2, Z/32)| = 393216 elements for conjugacy
scans and the element cap (2^26 by default) bounds every closure.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gcd
from typing import Iterable, Optional, Sequence

import numpy as np

from .residues import (
    Mat,
    ModulusMismatchError,
    NonInvertibleError,
    UnsupportedModulusError,
    euler_phi,
    identity,
    is_invertible,
    mat,
    minus_identity,
    modulus_parts,
    pack,
    unpack,
)

DEFAULT_ELEMENT_CAP = 1 << 26

# Largest prime-power factors for which is_conjugate will enumerate the
# ambient group.  Covers every modulus the rest of the package produces.
_MAX_AMBIENT_TWO = 32
_MAX_AMBIENT_ODD = 25

# Frontier*generators products are processed in chunks of at most this many
# rows to bound transient memory during closures.
_CHUNK_ROWS = 1 << 21


class ClosureCapError(RuntimeError):
    """A closure grew past the element cap.

    Carries the number of elements seen so far in .seen.
    """

    def __init__(self, seen: int, cap: int):
        super().__init__(
            "group closure exceeded the element cap (%d seen, cap %d)" % (seen, cap))
        self.seen = seen
        self.cap = cap


# ---------------------------------------------------------------- bulk ops


def _rows_of(gens: Iterable[Mat], n: int) -> np.ndarray:
    data = [(g.a % n, g.b % n, g.c % n, g.d % n) for g in gens]
    if not data:
        return np.zeros((0, 4), dtype=np.int64)
    return np.array(data, dtype=np.int64)


def _mul(x: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    """Matrix product over trailing axis of length 4; broadcasts like numpy."""
    a = (x[..., 0] * y[..., 0] + x[..., 1] * y[..., 2]) % n
    b = (x[..., 0] * y[..., 1] + x[..., 1] * y[..., 3]) % n
    c = (x[..., 2] * y[..., 0] + x[..., 3] * y[..., 2]) % n
    d = (x[..., 2] * y[..., 1] + x[..., 3] * y[..., 3]) % n
    return np.stack((a, b, c, d), axis=-1)


def _det(x: np.ndarray, n: int) -> np.ndarray:
    return (x[..., 0] * x[..., 3] - x[..., 1] * x[..., 2]) % n


def _pow_units(v: np.ndarray, e: int, n: int) -> np.ndarray:
    """v**e mod n elementwise (square and multiply; entries stay < n^2)."""
    out = np.ones_like(v)
    base = v % n
    while e:
        if e & 1:
            out = out * base % n
        base = base * base % n
        e >>= 1
    return out


def _inv_units(v: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros_like(v)
    return _pow_units(v, euler_phi(n) - 1, n)


def _inv(x: np.ndarray, n: int) -> np.ndarray:
    """Elementwise matrix inverse; inputs must all be invertible."""
    det = _det(x, n)
    if n > 1 and not np.all(np.gcd(det, n) == 1):
        raise NonInvertibleError("bulk inverse of a singular matrix")
    dinv = _inv_units(det, n)
    a = x[..., 3] * dinv % n
    b = -x[..., 1] * dinv % n
    c = -x[..., 2] * dinv % n
    d = x[..., 0] * dinv % n
    return np.stack((a, b, c, d), axis=-1)


def _pack_rows(x: np.ndarray, n: int) -> np.ndarray:
    return ((x[..., 0] * n + x[..., 1]) * n + x[..., 2]) * n + x[..., 3]


def _unpack_keys(keys: np.ndarray, n: int) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    d = keys % n
    rest = keys // n
    c = rest % n
    rest //= n
    b = rest % n
    a = rest // n % n
    return np.stack((a, b, c, d), axis=-1)


def _member(sorted_keys: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Boolean membership of keys in a sorted key array."""
    if len(sorted_keys) == 0:
        return np.zeros(np.shape(keys), dtype=bool)
    idx = np.searchsorted(sorted_keys, keys)
    idx_clip = np.minimum(idx, len(sorted_keys) - 1)
    return sorted_keys[idx_clip] == keys


def _closure_keys(gen_rows: np.ndarray, n: int, cap: int) -> np.ndarray:
    """Sorted packed keys of the subgroup generated by gen_rows."""
    ident = _pack_rows(_rows_of([identity(n)], n), n)
    if gen_rows.shape[0] == 0:
        return ident
    gen_keys = np.unique(_pack_rows(gen_rows, n))
    gens = _unpack_keys(gen_keys, n)
    elements = np.union1d(ident, gen_keys)
    frontier = _unpack_keys(np.setdiff1d(gen_keys, ident, assume_unique=True), n)
    k = gens.shape[0]
    while frontier.shape[0]:
        new_chunks = []
        step = max(1, _CHUNK_ROWS // max(k, 1))
        for start in range(0, frontier.shape[0], step):
            block = frontier[start:start + step]
            prods = _mul(block[:, None, :], gens[None, :, :], n).reshape(-1, 4)
            keys = _pack_rows(prods, n)
            keys = np.unique(keys)
            fresh = keys[~_member(elements, keys)]
            if fresh.size:
                new_chunks.append(fresh)
        if not new_chunks:
            break
        new_keys = np.unique(np.concatenate(new_chunks))
        new_keys = new_keys[~_member(elements, new_keys)]
        if new_keys.size == 0:
            break
        if elements.size + new_keys.size > cap:
            raise ClosureCapError(elements.size + new_keys.size, cap)
        elements = np.union1d(elements, new_keys)
        frontier = _unpack_keys(new_keys, n)
    return elements


# ------------------------------------------------------------ group types


@dataclass(frozen=True)
class SubgroupSpec:
    """A modulus and a finite list of invertible generators."""

    n: int
    gens: tuple[Mat, ...]

    def __post_init__(self):
        modulus_parts(self.n)
        for g in self.gens:
            if g.n != self.n:
                raise ModulusMismatchError(
                    "generator mod %d in a spec mod %d" % (g.n, self.n))
            if not is_invertible(g):
                raise NonInvertibleError(
                    "generator %s is not invertible mod %d" % (g.rows(), self.n))


def subgroup_spec(n: int, gens) -> SubgroupSpec:
    """Convenience constructor accepting nested-row generator data."""
    return SubgroupSpec(n, tuple(g if isinstance(g, Mat) else mat(n, g) for g in gens))


class GroupClosure:
    """A fully enumerated subgroup of GL(2, Z/nZ)."""

    def __init__(self, n: int, gens: Sequence[Mat], keys: np.ndarray):
        self.n = int(n)
        self.gens = tuple(gens)
        self.keys = keys  # sorted int64 packed elements
        self._cache: dict = {}

    @property
    def order(self) -> int:
        return int(self.keys.size)

    def contains(self, m: Mat) -> bool:
        if m.n != self.n:
            raise ModulusMismatchError("membership test across moduli")
        return bool(_member(self.keys, np.array([pack(m)], dtype=np.int64))[0])

    def element_rows(self) -> np.ndarray:
        rows = self._cache.get("rows")
        if rows is None:
            rows = _unpack_keys(self.keys, self.n)
            self._cache["rows"] = rows
        return rows

    def elements(self) -> list[Mat]:
        return [unpack(int(k), self.n) for k in self.keys]

    # -- cached structural facts -------------------------------------

    @property
    def contains_minus_id(self) -> bool:
        val = self._cache.get("minus_id")
        if val is None:
            val = self.contains(minus_identity(self.n))
            self._cache["minus_id"] = val
        return val

    @property
    def det_image(self) -> frozenset:
        val = self._cache.get("det_image")
        if val is None:
            val = frozenset(np.unique(_det(self.element_rows(), self.n)).tolist())
            self._cache["det_image"] = val
        return val

    @property
    def det_surjective(self) -> bool:
        return len(self.det_image) == euler_phi(self.n)

    def element_order_histogram(self) -> dict[int, int]:
        """order -> multiplicity over all elements (cached)."""
        val = self._cache.get("orders")
        if val is None:
            rows = self.element_rows()
            n = self.n
            ident = _pack_rows(_rows_of([identity(n)], n), n)[0]
            power = rows.copy()
            orders = np.zeros(rows.shape[0], dtype=np.int64)
            alive = np.ones(rows.shape[0], dtype=bool)
            k = 1
            # element orders divide the group exponent; cap generously
            limit = 4 * n * n + 8
            while alive.any():
                done = alive & (_pack_rows(power, n) == ident)
                orders[done] = k
                alive &= ~done
                if not alive.any():
                    break
                power[alive] = _mul(power[alive], rows[alive], n)
                k += 1
                if k > limit:  # pragma: no cover - defensive
                    raise RuntimeError("element order computation ran away")
            uniq, counts = np.unique(orders, return_counts=True)
            val = dict(zip(uniq.tolist(), counts.tolist()))
            self._cache["orders"] = val
        return val

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return "<GroupClosure mod %d, order %d, %d gens>" % (
            self.n, self.order, len(self.gens))


def closure(spec: SubgroupSpec, cap: int = DEFAULT_ELEMENT_CAP) -> GroupClosure:
    """Enumerate the subgroup generated by spec.gens.

    Deterministic: the element array is sorted by packed key, and the BFS
    order has no effect on the result.
    """
    rows = _rows_of(spec.gens, spec.n)
    keys = _closure_keys(rows, spec.n, cap)
    return GroupClosure(spec.n, spec.gens, keys)


def closure_of(n: int, gens, cap: int = DEFAULT_ELEMENT_CAP) -> GroupClosure:
    return closure(subgroup_spec(n, gens), cap)


def _from_keys(n: int, gens: Sequence[Mat], keys: np.ndarray) -> GroupClosure:
    """Internal: wrap an already-closed, sorted key set."""
    return GroupClosure(n, tuple(gens), keys)


def generators_from_keys(keys: np.ndarray, n: int) -> tuple[Mat, ...]:
    """Deterministic small generating set for an element-set subgroup."""
    gens: list[Mat] = []
    current = _closure_keys(np.zeros((0, 4), dtype=np.int64), n, DEFAULT_ELEMENT_CAP)
    remaining = keys
    while True:
        remaining = remaining[~_member(current, remaining)]
        if remaining.size == 0:
            return tuple(gens)
        gens.append(unpack(int(remaining[0]), n))
        current = _closure_keys(_rows_of(gens, n), n, DEFAULT_ELEMENT_CAP)


# ------------------------------------------------------- ambient / lifts


def ambient_order(n: int) -> int:
    """|GL(2, Z/nZ)| for a supported modulus."""
    a, q = modulus_parts(n)
    total = 1
    if a > 0:
        total *= 6 * (1 << (4 * (a - 1)))
    for p, k in _factor_odd(q):
        total *= (p * p - 1) * (p * p - p) * p ** (4 * (k - 1))
    return total


def sl2_order(n: int) -> int:
    """|SL(2, Z/nZ)|: the determinant maps GL2 onto the units."""
    return ambient_order(n) // euler_phi(n)


def _factor_odd(q: int) -> list[tuple[int, int]]:
    out = []
    for p in (3, 5, 7, 13):
        k = 0
        while q % p == 0:
            q //= p
            k += 1
        if k:
            out.append((p, k))
    return out


def _gl2_generators(n: int) -> tuple[Mat, ...]:
    """A generating set for GL(2, Z/nZ) at a supported prime power.

    Elementary matrices generate SL2; diagonal units extend to GL2.  For
    2-powers the units are <3, 5>; odd prime powers have a primitive root.
    """
    a, q = modulus_parts(n)
    if n == 1:
        return (identity(1),)
    if a and q > 1:
        raise UnsupportedModulusError("prime-power modulus required, got %d" % n)
    gens = [mat(n, [[1, 1], [0, 1]]), mat(n, [[1, 0], [1, 1]])]
    if a:  # 2-power
        gens += [mat(n, [[3, 0], [0, 1]]), mat(n, [[5, 0], [0, 1]])]
    else:
        root = {3: 2, 5: 2, 7: 3, 9: 2, 13: 2, 25: 2}[q]
        gens += [mat(n, [[root, 0], [0, 1]])]
    seen, out = set(), []
    for g in gens:
        if g != identity(n) and g not in seen:
            seen.add(g)
            out.append(g)
    return tuple(out)


def kernel_generators(m: int, n: int) -> SubgroupSpec:
    """Generators of Ker(GL(2, Z/2^m) -> GL(2, Z/2^n)), as a spec mod 2^m.

    n = 0 yields the whole ambient group; n = 1 needs six generators (the
    diagonal units together with the even elementaries); n >= 2 needs four.
    The kernel has order 2^(4(m-n)) for n >= 1.
    """
    if not (0 <= n <= m):
        raise ValueError("need 0 <= n <= m, got m=%d n=%d" % (m, n))
    if m > MAX_LIFT_EXPONENT:
        raise UnsupportedModulusError(
            "lift target 2^%d exceeds the supported 2^%d" % (m, MAX_LIFT_EXPONENT))
    N = 1 << m
    if n == 0:
        return SubgroupSpec(N, _gl2_generators(N))
    if n == 1:
        raw = [[[3, 0], [0, 1]], [[5, 0], [0, 1]], [[1, 0], [0, 3]],
               [[1, 0], [0, 5]], [[1, 2], [0, 1]], [[1, 0], [2, 1]]]
    else:
        t = 1 << n
        raw = [[[1 + t, 0], [0, 1]], [[1, 0], [0, 1 + t]],
               [[1, t], [0, 1]], [[1, 0], [t, 1]]]
    ident = identity(N)
    gens = []
    for rows in raw:
        g = mat(N, rows)
        if g != ident and g not in gens:
            gens.append(g)
    return SubgroupSpec(N, tuple(gens))


MAX_LIFT_EXPONENT = 10  # 2^10 = 1024: enough headroom for r = m = 5 lifts


def full_lift(g: GroupClosure, m: int, cap: int = DEFAULT_ELEMENT_CAP) -> GroupClosure:
    """Full preimage of g under GL(2, Z/2^m) -> GL(2, Z/2^k), k = v2(g.n).

    g must live at a 2-power modulus.  Generated by the entrywise lifts of
    g's generators together with the lifting-kernel generators.
    """
    k, q = modulus_parts(g.n)
    if q != 1:
        raise UnsupportedModulusError("full_lift needs a 2-power modulus, got %d" % g.n)
    if m < k:
        raise ValueError("lift target 2^%d below the current modulus 2^%d" % (m, k))
    N = 1 << m
    lifted = [mat(N, (x.a, x.b, x.c, x.d)) for x in g.gens]
    spec = SubgroupSpec(N, tuple(dict.fromkeys(lifted + list(kernel_generators(m, k).gens))))
    return closure(spec, cap)


def reduce(g: GroupClosure, m: int, cap: int = DEFAULT_ELEMENT_CAP) -> GroupClosure:
    """Image of g under entrywise reduction to a divisor modulus m.

    The image of a group under a homomorphism is generated by the images of
    its generators, so this closes the reduced generators; it never touches
    g's (possibly huge) element set.
    """
    modulus_parts(m)
    if g.n % m != 0:
        raise ModulusMismatchError("%d does not divide %d" % (m, g.n))
    if m == g.n:
        return g
    gens = tuple(dict.fromkeys(
        mat(m, (x.a, x.b, x.c, x.d)) for x in g.gens))
    gens = tuple(x for x in gens if x != identity(m)) or ()
    return closure(SubgroupSpec(m, gens), cap)


def level(g: GroupClosure) -> int:
    """Least 2-power modulus 2^m with g equal to the full lift of g mod 2^m.

    Uses the order test: g is the full preimage of its mod-2^m reduction
    exactly when |g| = |g mod 2^m| * |ker(GL2(2^k) -> GL2(2^m))|.
    """
    k, q = modulus_parts(g.n)
    if q != 1:
        raise UnsupportedModulusError("level is defined at 2-power moduli, got %d" % g.n)
    amb = ambient_order(g.n)
    for m in range(0, k + 1):
        nm = 1 << m
        reduced = reduce(g, nm)
        if g.order * ambient_order(nm) == reduced.order * amb:
            return nm
    return g.n  # pragma: no cover - m = k always satisfies the test


def transpose_group(g: GroupClosure, cap: int = DEFAULT_ELEMENT_CAP) -> GroupClosure:
    from .residues import transpose as _t

    return closure(SubgroupSpec(g.n, tuple(_t(x) for x in g.gens)), cap)


# ------------------------------------------------------------- conjugacy


@lru_cache(maxsize=8)
def _ambient_rows(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(rows, inverse_rows) for all of GL(2, Z/nZ), n a small prime power."""
    a, q = modulus_parts(n)
    if a and q > 1:
        raise UnsupportedModulusError("ambient enumeration wants a prime power, got %d" % n)
    if (a and n > _MAX_AMBIENT_TWO) or (not a and n > _MAX_AMBIENT_ODD):
        raise UnsupportedModulusError(
            "exhaustive conjugacy is capped at 2-part <= %d and odd part <= %d (got %d)"
            % (_MAX_AMBIENT_TWO, _MAX_AMBIENT_ODD, n))
    idx = np.arange(n ** 4, dtype=np.int64)
    rows = _unpack_keys(idx, n)
    det = _det(rows, n)
    unit = np.gcd(det, n) == 1 if n > 1 else np.ones(1, dtype=bool)
    rows = rows[unit]
    return rows, _inv(rows, n)


def _transporter_rows(g: GroupClosure, h: GroupClosure) -> np.ndarray:
    """All T in the ambient group with T^-1 * G * T = H (same prime power)."""
    rows, invs = _ambient_rows(g.n)
    alive = np.arange(rows.shape[0])
    for gen in dict.fromkeys(g.gens):
        if gen == identity(g.n):
            continue
        grow = _rows_of([gen], g.n)[0]
        conj = _mul(_mul(invs[alive], grow, g.n), rows[alive], g.n)
        keep = _member(h.keys, _pack_rows(conj, g.n))
        alive = alive[keep]
        if alive.size == 0:
            return rows[:0]
    return rows[alive]


def is_conjugate(g: GroupClosure, h: GroupClosure) -> Optional[Mat]:
    """A conjugator T with T^-1 * g * T = h, or None.

    Exhaustive over the ambient group, factored through CRT at composite
    moduli.  Because the scan maps generators of g into h and the orders
    match, any surviving T conjugates all of g onto all of h.
    """
    if g.n != h.n:
        raise ModulusMismatchError("conjugacy across moduli (%d vs %d)" % (g.n, h.n))
    n = g.n
    if g.order != h.order or g.det_image != h.det_image:
        return None
    if g.contains_minus_id != h.contains_minus_id:
        return None
    if g.order <= (1 << 13) and g.element_order_histogram() != h.element_order_histogram():
        return None
    a, q = modulus_parts(n)
    if n == 1:
        return identity(1)
    if q == 1 or a == 0:
        cands = _transporter_rows(g, h)
        if cands.shape[0] == 0:
            return None
        r = cands[0]
        return Mat(n, int(r[0]), int(r[1]), int(r[2]), int(r[3]))

    # Composite: per-factor transporter candidates, then joint CRT test.
    n2, nq = 1 << a, q
    g2, h2 = reduce(g, n2), reduce(h, n2)
    gq, hq = reduce(g, nq), reduce(h, nq)
    if g2.order != h2.order or gq.order != hq.order:
        return None
    t2 = _transporter_rows(g2, h2)
    if t2.shape[0] == 0:
        return None
    tq = _transporter_rows(gq, hq)
    if tq.shape[0] == 0:
        return None
    # CRT coefficients: x = x2*u + xq*v with u = 1 mod n2, 0 mod q etc.
    u = (nq * pow(nq, -1, n2)) % n
    v = (n2 * pow(n2, -1, nq)) % n
    gens = [x for x in dict.fromkeys(g.gens) if x != identity(n)]
    g_rows = _rows_of(gens, n)
    tq_inv = _inv(tq, nq)
    conj_q = []  # per generator: conjugates under every odd candidate
    for i in range(len(gens)):
        grow_q = g_rows[i] % nq
        conj_q.append(_mul(_mul(tq_inv, grow_q, nq), tq, nq))
    t2_inv = _inv(t2, n2)
    for j in range(t2.shape[0]):
        ok = np.ones(tq.shape[0], dtype=bool)
        for i in range(len(gens)):
            grow_2 = g_rows[i] % n2
            c2 = _mul(_mul(t2_inv[j], grow_2, n2), t2[j], n2)
            combined = (c2 * u + conj_q[i] * v) % n
            ok &= _member(h.keys, _pack_rows(combined, n))
            if not ok.any():
                break
        if ok.any():
            kq = int(np.flatnonzero(ok)[0])
            r = (t2[j] * u + tq[kq] * v) % n
            return Mat(n, int(r[0]), int(r[1]), int(r[2]), int(r[3]))
    return None


# ---------------------------------------------------------------- flags


@dataclass(frozen=True)
class GroupFlags:
    contains_minus_id: bool
    det_surjective: bool
    has_complex_conjugation: bool


_CC_MODELS = (((1, 1), (0, -1)), ((1, 0), (0, -1)))


@lru_cache(maxsize=32)
def _cc_class_keys(n: int, model_idx: int) -> np.ndarray:
    """Sorted keys of the conjugacy class of a complex-conjugation model
    in GL(2, Z/nZ), n a supported prime power."""
    model = mat(n, _CC_MODELS[model_idx])
    gens = _gl2_generators(n)
    gen_rows = _rows_of(gens, n)
    gen_invs = _inv(gen_rows, n)
    orbit = np.array([pack(model)], dtype=np.int64)
    frontier = orbit
    while frontier.size:
        rows = _unpack_keys(frontier, n)
        new = []
        for i in range(gen_rows.shape[0]):
            conj = _mul(_mul(gen_invs[i], rows, n), gen_rows[i], n)
            new.append(_pack_rows(conj, n))
        keys = np.unique(np.concatenate(new))
        fresh = keys[~_member(orbit, keys)]
        if fresh.size == 0:
            break
        orbit = np.union1d(orbit, fresh)
        frontier = fresh
    return orbit


def has_complex_conjugation(g: GroupClosure) -> bool:
    """Whether g contains an element conjugate (mod n) to [[1,1],[0,-1]] or
    [[1,0],[0,-1]].

    Conjugacy in GL(2, Z/n) is componentwise across the prime-power factors
    of n, and over an odd factor the two models fall into the same class
    (both diagonalize to diag(1,-1)), so only the 2-part distinguishes them.
    """
    n = g.n
    a, q = modulus_parts(n)
    rows = g.element_rows()
    mask = np.ones(rows.shape[0], dtype=bool)
    if a:
        n2 = 1 << a
        keys2 = _pack_rows(rows % n2, n2)
        class2 = np.union1d(_cc_class_keys(n2, 0), _cc_class_keys(n2, 1))
        mask &= _member(class2, keys2)
    if q > 1:
        keysq = _pack_rows(rows % q, q)
        classq = np.union1d(_cc_class_keys(q, 0), _cc_class_keys(q, 1))
        mask &= _member(classq, keysq)
    if n == 1:
        return True
    return bool(mask.any())


def group_flags(g: GroupClosure) -> GroupFlags:
    return GroupFlags(
        contains_minus_id=g.contains_minus_id,
        det_surjective=g.det_surjective,
        has_complex_conjugation=has_complex_conjugation(g),
    )


# ------------------------------------------------------------- products


def fiber_product(a: GroupClosure, b: GroupClosure,
                  cap: int = DEFAULT_ELEMENT_CAP) -> GroupClosure:
    """All CRT combinations of an odd-modulus group with a 2-power one.

    The result is the full direct product inside GL(2, Z/(q*2^M)): order
    |a| * |b|, generated by the two coordinate embeddings.
    """
    a2, aq = modulus_parts(a.n)
    b2, bq = modulus_parts(b.n)
    if a2 != 0:
        raise ModulusMismatchError("first factor must have odd modulus, got %d" % a.n)
    if bq != 1:
        raise ModulusMismatchError("second factor must have 2-power modulus, got %d" % b.n)
    n = a.n * b.n
    modulus_parts(n)
    if a.order * b.order > cap:
        raise ClosureCapError(a.order * b.order, cap)
    if a.n == 1:
        return b
    if b.n == 1:
        return a
    u = (a.n * pow(a.n, -1, b.n)) % n   # 1 mod 2^M, 0 mod q
    v = (b.n * pow(b.n, -1, a.n)) % n   # 1 mod q, 0 mod 2^M
    rows2 = b.element_rows()
    rowsq = a.element_rows()
    step = max(1, _CHUNK_ROWS // max(rowsq.shape[0], 1))
    parts = []
    for start in range(0, rows2.shape[0], step):
        block = rows2[start:start + step]
        combined = (block[:, None, :] * u + rowsq[None, :, :] * v) % n
        parts.append(_pack_rows(combined.reshape(-1, 4), n))
    keys = np.sort(np.concatenate(parts))
    from .residues import crt_lift

    id2, idq = identity(b.n), identity(a.n)
    gens = tuple(dict.fromkeys(
        [crt_lift(gb, idq) for gb in b.gens] + [crt_lift(id2, ga) for ga in a.gens]))
    return _from_keys(n, gens, keys)


# ------------------------------------------------- stable cyclic kernels


def stable_cyclic_subgroups(g: GroupClosure, r: int) -> list[tuple[int, int]]:
    """Generators of the cyclic order-2^r subgroups of (Z/2^r)^2 stable
    under g, one canonical vector per subgroup.

    r = 0 returns the trivial subgroup's generator (0, 0).  Canonical form:
    (1, t) when the first coordinate is odd, else (2s, 1).  A subgroup is
    stable iff every generator of g maps the vector into its span (the
    stabilizer of a subgroup is itself a group, so generators suffice).
    """
    k, q = modulus_parts(g.n)
    if q != 1:
        raise UnsupportedModulusError("kernel vectors live at 2-power moduli, got %d" % g.n)
    if r < 0 or r > k:
        raise ValueError("need 0 <= r <= %d, got %d" % (k, r))
    if r == 0:
        return [(0, 0)]
    t = 1 << r
    gens = [x for x in dict.fromkeys(mat(t, (m.a, m.b, m.c, m.d)) for m in g.gens)]
    out = []
    candidates = [(1, y) for y in range(t)] + [(2 * s, 1) for s in range(t >> 1)]
    for v in candidates:
        span = {(v[0] * j % t, v[1] * j % t) for j in range(t)}
        ok = True
        for m in gens:
            image = ((m.a * v[0] + m.b * v[1]) % t, (m.c * v[0] + m.d * v[1]) % t)
            if image not in span:
                ok = False
                break
        if ok:
            out.append(v)
    return out
