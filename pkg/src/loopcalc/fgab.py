"""Exact linear algebra over the integers.

Smith normal form, finitely generated abelian groups in canonical form,
homology of two composable maps with representative tracking, tensor/Tor,
universal-coefficient assembly, Hom sets and mod-p dimensions.

Everything here works with arbitrary-precision Python ints; no floats
appear anywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd


class CompositionNotZero(Exception):
    """Raised when homology is requested for maps with d_out . d_in != 0."""


class NotPrime(Exception):
    pass


# ---------------------------------------------------------------------------
# Integer matrices.
#
# A matrix is a list of rows, each row a list of ints.  Helpers below never
# mutate their arguments unless the name says so.
# ---------------------------------------------------------------------------

def zeros(rows, cols):
    return [[0] * cols for _ in range(rows)]


def identity(n):
    m = zeros(n, n)
    for i in range(n):
        m[i][i] = 1
    return m


def mat_copy(m):
    return [row[:] for row in m]


def mat_mul(a, b):
    if not a:
        return []
    n, k = len(a), len(a[0])
    if len(b) != k:
        raise ValueError("shape mismatch in mat_mul")
    l = len(b[0]) if b else 0
    out = zeros(n, l)
    for i in range(n):
        ai = a[i]
        oi = out[i]
        for t in range(k):
            c = ai[t]
            if c:
                bt = b[t]
                for j in range(l):
                    oi[j] += c * bt[j]
    return out


def mat_vec(a, v):
    return [sum(c * x for c, x in zip(row, v)) for row in a]


def transpose(m):
    if not m:
        return []
    return [list(col) for col in zip(*m)]


@dataclass(frozen=True)
class IntMatrix:
    """Dense integer matrix in row-major order (spec carrier type)."""

    rows: int
    cols: int
    entries: tuple

    def __post_init__(self):
        if len(self.entries) != self.rows * self.cols:
            raise ValueError("entry count must equal rows*cols")

    @classmethod
    def from_rows(cls, rows):
        r = len(rows)
        c = len(rows[0]) if r else 0
        flat = []
        for row in rows:
            if len(row) != c:
                raise ValueError("ragged rows")
            flat.extend(int(x) for x in row)
        return cls(r, c, tuple(flat))

    def to_rows(self):
        e = self.entries
        c = self.cols
        return [list(e[i * c:(i + 1) * c]) for i in range(self.rows)]


def smith_normal_form(m):
    """Return (u, d, v) with d = u*m*v, u and v unimodular, d diagonal
    with nonnegative entries satisfying d[i] | d[i+1].

    Accepts and returns plain list-of-rows matrices.  Pivot selection is
    the minimal nonzero absolute value, which keeps entries small for the
    sizes used here.
    """
    u, d, v, _, _ = smith_normal_form_full(m)
    return u, d, v


def smith_normal_form_full(m):
    """Like smith_normal_form but also returns (u_inv, v_inv)."""
    a = mat_copy(m)
    rows = len(a)
    cols = len(a[0]) if rows else 0
    u = identity(rows)
    u_inv = identity(rows)
    v = identity(cols)
    v_inv = identity(cols)

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]
        for r in u_inv:
            r[i], r[j] = r[j], r[i]

    def swap_cols(i, j):
        for r in a:
            r[i], r[j] = r[j], r[i]
        for r in v:
            r[i], r[j] = r[j], r[i]
        v_inv[i], v_inv[j] = v_inv[j], v_inv[i]

    def add_row(src, dst, c):
        # row[dst] += c*row[src]
        a[dst] = [x + c * y for x, y in zip(a[dst], a[src])]
        u[dst] = [x + c * y for x, y in zip(u[dst], u[src])]
        for r in u_inv:
            r[src] -= c * r[dst]

    def add_col(src, dst, c):
        for r in a:
            r[dst] += c * r[src]
        for r in v:
            r[dst] += c * r[src]
        v_inv[src] = [x - c * y for x, y in zip(v_inv[src], v_inv[dst])]

    def negate_row(i):
        a[i] = [-x for x in a[i]]
        u[i] = [-x for x in u[i]]
        for r in u_inv:
            r[i] = -r[i]

    t = 0
    while True:
        # locate minimal nonzero |entry| in the remaining block
        piv = None
        for i in range(t, rows):
            for j in range(t, cols):
                if a[i][j] and (piv is None or abs(a[i][j]) < abs(a[piv[0]][piv[1]])):
                    piv = (i, j)
        if piv is None:
            break
        i, j = piv
        if i != t:
            swap_rows(t, i)
        if j != t:
            swap_cols(t, j)
        if a[t][t] < 0:
            negate_row(t)
        clean = True
        for i in range(t + 1, rows):
            q = a[i][t] // a[t][t]
            if q:
                add_row(t, i, -q)
            if a[i][t]:
                clean = False
        for j in range(t + 1, cols):
            q = a[t][j] // a[t][t]
            if q:
                add_col(t, j, -q)
            if a[t][j]:
                clean = False
        if not clean:
            continue
        # enforce divisibility: fold any non-multiple into the pivot block
        p = a[t][t]
        bad = None
        for i in range(t + 1, rows):
            for j in range(t + 1, cols):
                if a[i][j] % p:
                    bad = i
                    break
            if bad is not None:
                break
        if bad is not None:
            add_row(bad, t, 1)
            continue
        t += 1
    return u, a, v, u_inv, v_inv


def diagonal_of(d):
    n = min(len(d), len(d[0]) if d else 0)
    return [d[i][i] for i in range(n)]


def kernel_basis(m):
    """Columns spanning ker(m) over Z, as a list of column vectors."""
    rows = len(m)
    cols = len(m[0]) if rows else 0
    if cols == 0:
        return []
    if rows == 0:
        return [[1 if i == j else 0 for i in range(cols)] for j in range(cols)]
    _, d, v, _, _ = smith_normal_form_full(m)
    diag = diagonal_of(d)
    r = sum(1 for x in diag if x)
    # kernel is spanned by columns r..cols-1 of v
    return [[v[i][j] for i in range(cols)] for j in range(r, cols)]


def solve_int(m, b):
    """One integer solution x of m x = b, or None if none exists."""
    rows = len(m)
    cols = len(m[0]) if rows else 0
    if rows == 0:
        return [0] * cols
    u, d, v, _, _ = smith_normal_form_full(m)
    c = mat_vec(u, b)
    diag = diagonal_of(d)
    y = [0] * cols
    for i in range(rows):
        di = diag[i] if i < len(diag) else 0
        ci = c[i]
        if i < cols and di:
            if ci % di:
                return None
            y[i] = ci // di
        elif ci:
            return None
    return mat_vec(v, y)


# ---------------------------------------------------------------------------
# Finitely generated abelian groups.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FgAbGroup:
    """Canonical form: free rank plus torsion coefficients t_i >= 2 with
    t_i | t_{i+1}.  Equality is structural.

    >>> FgAbGroup.of(0, [2, 6])
    FgAbGroup(rank=0, torsion=(2, 6))
    >>> print(FgAbGroup.of(1, [3, 2]))
    Z + Z/6
    """

    rank: int
    torsion: tuple

    @classmethod
    def of(cls, rank, torsion=()):
        return cls(rank, _normalize_torsion(torsion))

    @classmethod
    def zero(cls):
        return cls(0, ())

    @classmethod
    def free(cls, rank):
        return cls(rank, ())

    @classmethod
    def cyclic(cls, n):
        if n == 0:
            return cls(1, ())
        return cls.of(0, [n])

    def is_zero(self):
        return self.rank == 0 and not self.torsion

    def direct_sum(self, other):
        return FgAbGroup.of(self.rank + other.rank, self.torsion + other.torsion)

    def exponent(self):
        """0 when the group has a free part, else lcm of torsion (1 if trivial)."""
        if self.rank:
            return 0
        return self.torsion[-1] if self.torsion else 1

    def order(self):
        """Group order: 0 for infinite, else the product of torsion coefficients."""
        if self.rank:
            return 0
        out = 1
        for t in self.torsion:
            out *= t
        return out

    def __str__(self):
        parts = ["Z"] * self.rank + ["Z/%d" % t for t in self.torsion]
        return " + ".join(parts) if parts else "0"


def _normalize_torsion(coeffs):
    """Renormalize arbitrary cyclic orders into the divisibility chain."""
    primary = {}
    for c in coeffs:
        c = abs(int(c))
        if c in (0, 1):
            if c == 0:
                raise ValueError("use rank for free summands")
            continue
        for p, e in _factor(c).items():
            primary.setdefault(p, []).append(e)
    for p in primary:
        primary[p].sort(reverse=True)
    out = []
    i = 0
    while True:
        term = 1
        for p, exps in primary.items():
            if i < len(exps):
                term *= p ** exps[i]
        if term == 1:
            break
        out.append(term)
        i += 1
    out.reverse()
    return tuple(out)


def _factor(n):
    out = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def group_from_diagonal(diag, extra_free=0):
    tors = [d for d in diag if d not in (0, 1)]
    rank = extra_free + sum(1 for d in diag if d == 0)
    return FgAbGroup.of(rank, tors)


def cokernel(m, rows=None):
    """Group Z^rows / (column span of m), in canonical form.

    ``m`` may be an IntMatrix or a list of rows; ``rows`` overrides the
    ambient rank when m has no rows (empty relation set).
    """
    if isinstance(m, IntMatrix):
        rows_ = m.rows
        m = m.to_rows()
    else:
        rows_ = len(m)
    if rows is None:
        rows = rows_
    if not m or not m[0]:
        return FgAbGroup.free(rows)
    _, d, _, _, _ = smith_normal_form_full(m)
    diag = diagonal_of(d)
    free = rows - sum(1 for x in diag if x)
    return group_from_diagonal([x for x in diag if x], extra_free=free)


@dataclass
class QuotientPresentation:
    """Z^n / <columns of rels> with explicit generators and reduction.

    gens[i] is a vector in Z^n representing the i-th canonical generator,
    whose order is orders[i] (0 means infinite).  reduce() rewrites any
    ambient vector as canonical coordinates.
    """

    n: int
    orders: list
    gens: list
    _u: list  # change of basis: y = u x

    @property
    def group(self):
        return group_from_diagonal(self.orders)

    def reduce(self, vec):
        """Coordinates of an ambient vector in the canonical generators."""
        y = mat_vec(self._u, vec)
        coords = []
        for i, o in self._kept:
            c = y[i]
            if o:
                c %= o
            coords.append(c)
        return coords

    def is_zero(self, vec):
        return all(c == 0 for c in self.reduce(vec))


def quotient_presentation(n, rel_columns):
    """Present Z^n modulo the span of the given relation column vectors."""
    if not rel_columns:
        u = identity(n)
        u_inv = identity(n)
        diag = [0] * n
    else:
        r = [[col[i] for col in rel_columns] for i in range(n)]
        u, d, _, u_inv, _ = smith_normal_form_full(r)
        diag = diagonal_of(d)
        diag = diag + [0] * (n - len(diag))
    q = QuotientPresentation(n, [], [], u)
    kept = []
    for i in range(n):
        o = diag[i] if i < len(diag) else 0
        if o == 1:
            continue
        kept.append((i, o))
    # canonical ordering: free generators first, then torsion ascending,
    # matching the generator order implied by FgAbGroup
    kept.sort(key=lambda io: (io[1] != 0, io[1]))
    q.orders = [o for _, o in kept]
    q.gens = [[u_inv[j][i] for j in range(n)] for i, _ in kept]
    q._kept = kept
    return q


@dataclass
class GroupMorphism:
    """Map of canonical-form groups, as a matrix on chosen generators.

    matrix[i][j] is the coefficient of target generator i in the image of
    source generator j.  Generator j of the source has order
    source_orders[j] (0 = infinite); well-definedness requires
    order(source_j) * column_j = 0 in the target.
    """

    source: FgAbGroup
    target: FgAbGroup
    matrix: list

    def source_orders(self):
        return [0] * self.source.rank + list(self.source.torsion)

    def target_orders(self):
        return [0] * self.target.rank + list(self.target.torsion)

    def check(self):
        so = self.source_orders()
        to = self.target_orders()
        m = self.matrix
        if len(m) != len(to) or (m and any(len(r) != len(so) for r in m)):
            raise ValueError("morphism matrix shape mismatch")
        for j, o in enumerate(so):
            for i, t in enumerate(to):
                c = o * m[i][j]
                if t == 0:
                    if c != 0:
                        raise ValueError("morphism not defined on torsion generator")
                elif c % t:
                    raise ValueError("morphism not defined on torsion generator")
        return self

    @classmethod
    def zero(cls, source, target):
        rows = target.rank + len(target.torsion)
        cols = source.rank + len(source.torsion)
        return cls(source, target, zeros(rows, cols))


def homology_at(d_in, d_out):
    """ker(d_out)/im(d_in) for composable GroupMorphisms, with a section.

    Returns (group, section); section[i] is the middle-group coordinate
    vector representing the i-th canonical generator of the homology.

    Raises CompositionNotZero unless d_out . d_in vanishes.
    """
    if d_in.target != d_out.source:
        raise ValueError("maps are not composable")
    mid_orders = [0] * d_in.target.rank + list(d_in.target.torsion)
    n = len(mid_orders)
    out_orders = d_out.target_orders()
    # composition must vanish in the target
    comp = mat_mul(d_out.matrix, d_in.matrix) if d_in.matrix and d_out.matrix else []
    for row, t in zip(comp, out_orders):
        for c in row:
            if (t == 0 and c != 0) or (t != 0 and c % t):
                raise CompositionNotZero("d_out . d_in != 0")
    # cycles: x in Z^n with d_out x = 0 modulo target torsion
    b = d_out.matrix
    if b and any(any(r) for r in b):
        ext = [row[:] for row in b]
        tor_cols = []
        for i, t in enumerate(out_orders):
            if t:
                col = [0] * len(out_orders)
                col[i] = t
                tor_cols.append(col)
        for col in tor_cols:
            for i, row in enumerate(ext):
                row.append(col[i])
        kb = kernel_basis(ext)
        kb = [col[:n] for col in kb]
    else:
        kb = [[1 if i == j else 0 for i in range(n)] for j in range(n)]
    # boundaries: image columns of d_in plus the middle group's own torsion
    rel_cols = []
    if d_in.matrix and d_in.matrix[0:]:
        cols = len(d_in.matrix[0]) if d_in.matrix else 0
        for j in range(cols):
            rel_cols.append([d_in.matrix[i][j] for i in range(n)])
    for i, t in enumerate(mid_orders):
        if t:
            col = [0] * n
            col[i] = t
            rel_cols.append(col)
    k = len(kb)
    if k == 0:
        return FgAbGroup.zero(), []
    kmat = [[kb[j][i] for j in range(k)] for i in range(n)]  # n x k
    sub_rels = []
    for col in rel_cols:
        x = solve_int(kmat, col)
        if x is None:
            raise CompositionNotZero("boundary is not a cycle")
        sub_rels.append(x)
    q = quotient_presentation(k, sub_rels)
    section = [mat_vec(kmat, g) for g in q.gens]
    return q.group, section


# ---------------------------------------------------------------------------
# Tensor, Tor, Hom, coefficient assembly.
# ---------------------------------------------------------------------------

def tensor_and_tor(g, h):
    """(g (x) h, Tor(g, h)) in canonical form.

    >>> tensor_and_tor(FgAbGroup.cyclic(2), FgAbGroup.cyclic(2))
    (FgAbGroup(rank=0, torsion=(2,)), FgAbGroup(rank=0, torsion=(2,)))
    """
    tensor_tors = []
    tor_tors = []
    for a in g.torsion:
        for b in h.torsion:
            d = gcd(a, b)
            if d > 1:
                tensor_tors.append(d)
                tor_tors.append(d)
    tensor_tors.extend(list(g.torsion) * h.rank)
    tensor_tors.extend(list(h.torsion) * g.rank)
    tensor = FgAbGroup.of(g.rank * h.rank, tensor_tors)
    tor = FgAbGroup.of(0, tor_tors)
    return tensor, tor


def hom_group(g, h):
    """Hom(g, h) as an FgAbGroup."""
    tors = []
    for a in g.torsion:
        for b in h.torsion:
            d = gcd(a, b)
            if d > 1:
                tors.append(d)
        # Hom(Z/a, Z) = 0
    tors.extend(list(h.torsion) * g.rank)
    return FgAbGroup.of(g.rank * h.rank, tors)


def hom_description(g, h):
    """Generator-level description of Hom(g, h).

    Returns (group, note) where note says whether the Hom set is finite.
    """
    grp = hom_group(g, h)
    return grp, ("finite" if grp.rank == 0 else "infinite rank %d" % grp.rank)


def coefficient_homology(base_groups, coeff):
    """Universal coefficients: H_p(X; G) = H_p (x) G  +  Tor(H_{p-1}, G).

    base_groups: dict degree -> FgAbGroup over a finite window.
    Returns dict degree -> list of (summand, origin) with origin in
    {"tensor", "tor"}; degrees outside the input window get only the Tor
    contribution of the degree below.
    """
    out = {}
    degs = sorted(base_groups)
    for d in degs + [degs[-1] + 1] if degs else []:
        parts = []
        if d in base_groups:
            t, _ = tensor_and_tor(base_groups[d], coeff)
            if not t.is_zero():
                parts.append((t, "tensor"))
        if d - 1 in base_groups:
            _, tor = tensor_and_tor(base_groups[d - 1], coeff)
            if not tor.is_zero():
                parts.append((tor, "tor"))
        if parts:
            out[d] = parts
    return out


def is_prime(p):
    if p < 2:
        return False
    q = 2
    while q * q <= p:
        if p % q == 0:
            return False
        q += 1
    return True


def mod_p_reduction(g, p):
    """dim_{F_p}(g (x) F_p) = rank + #{torsion coefficients divisible by p}."""
    if not is_prime(p):
        raise NotPrime(str(p))
    return g.rank + sum(1 for t in g.torsion if t % p == 0)


def graded_pieces_compatible(group, pieces):
    """Could ``group`` have a filtration with graded pieces ``pieces``?

    Necessary and sufficient for finite abelian p-parts via partition
    dominance; rank and torsion order must match exactly.
    """
    rank = sum(p.rank for p in pieces)
    if rank != group.rank:
        return False
    # total torsion order must agree
    tord = 1
    for p in pieces:
        for t in p.torsion:
            tord *= t
    gord = 1
    for t in group.torsion:
        gord *= t
    if tord != gord:
        return False
    # per-prime dominance: partition of group must dominate partition of pieces
    def partitions(torsions):
        per = {}
        for t in torsions:
            for q, e in _factor(t).items():
                per.setdefault(q, []).append(e)
        return {q: sorted(v, reverse=True) for q, v in per.items()}

    gp = partitions(group.torsion)
    pp = partitions([t for p in pieces for t in p.torsion])
    if set(gp) != set(pp):
        return False
    for q in gp:
        a, b = gp[q], pp[q]
        # group partition must dominate the (finer) pieces partition
        sa = sb = 0
        for i in range(max(len(a), len(b))):
            sa += a[i] if i < len(a) else 0
            sb += b[i] if i < len(b) else 0
            if sa < sb:
                return False
    return True


if __name__ == "__main__":
    import doctest

    doctest.testmod()
