"""Bigraded spectral-sequence pages over Z.

A page algebra is a graded-commutative presentation whose generators carry
bidegrees.  Two shapes cover everything needed here:

* tensor pages (Serre-type): every generator is an honest page class;
* column pages (Morse-type): "base" generators live in column 0, "column"
  generators only occur together with the column shift T, and a module map
  phi folds base-times-column products into the columns via the rewrite
  g*T -> phi(g)*T.

Differentials are assigned on generator classes and extended as
derivations (Leibniz closure); every extension step is double-checked, so
an inconsistent assignment raises instead of propagating silently.  Page
turning is homology slot by slot with representative tracking, and
stabilization emits certificates only for slots whose potential partners
are all inside the tracked window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .fgab import (
    CompositionNotZero,
    FgAbGroup,
    GroupMorphism,
    homology_at,
    kernel_basis,
    mat_vec,
    quotient_presentation,
    smith_normal_form_full,
    solve_int,
)
from .graded import Generator, Presentation


class BidegreeMismatch(Exception):
    pass


class RelationViolated(Exception):
    """d of a relation (or of a product identity) fails to vanish."""


class WindowTooSmall(Exception):
    pass


class AmbiguousDifferential(Exception):
    def __init__(self, candidates):
        super().__init__("ambiguous differential; %d candidates" % len(candidates))
        self.candidates = candidates


@dataclass(frozen=True)
class PageGen:
    name: str
    p: int
    q: int
    pontryagin: bool = False
    sector: str = "plain"  # "plain" | "base" | "column" | "t"

    @property
    def total(self):
        return self.p + self.q


@dataclass(frozen=True)
class Regrading:
    p_shift: int = 0
    q_shift: int = 0


@dataclass(frozen=True)
class Window:
    tmin: int
    tmax: int
    pmin: int
    pmax: int

    def contains(self, p, q):
        return self.pmin <= p <= self.pmax and self.tmin <= p + q <= self.tmax


@dataclass
class StabilityCertificate:
    bidegree: tuple
    first_stable_page: int
    reason: str


class PageAlgebra:
    """Presentation with bidegrees; the multiplicative E^1/E^2 skeleton."""

    def __init__(self, gens, relations=(), module_map=None, name="",
                 regrading=Regrading()):
        self.name = name
        self.regrading = regrading
        self.page_gens = list(gens)
        order = {"base": 0, "plain": 1, "t": 2, "column": 3}
        self.page_gens.sort(key=lambda g: (order[g.sector],))
        self.pres = Presentation(
            [Generator(g.name, g.p + g.q, g.pontryagin) for g in self.page_gens],
            [])
        self.bidegrees = {g.name: (g.p, g.q) for g in self.page_gens}
        self.t_name = None
        for g in self.page_gens:
            if g.sector == "t":
                if self.t_name is not None:
                    raise ValueError("only one T generator allowed")
                self.t_name = g.name
        self.base_names = [g.name for g in self.page_gens if g.sector == "base"]
        self.column_names = [g.name for g in self.page_gens if g.sector == "column"]
        if self.column_names and self.t_name is None:
            raise ValueError("column generators require a T generator")
        self.module_map = dict(module_map or {})
        all_rel = [list(r) for r in relations]
        for bname, terms in self.module_map.items():
            # g*T = phi(g)*T, oriented so the mixed monomial rewrites away
            rel = [(1, [(bname, 1), (self.t_name, 1)])]
            for c, mono in terms:
                rel.append((-c, list(mono) + [(self.t_name, 1)]))
            all_rel.append(rel)
        self.pres = Presentation(
            [Generator(g.name, g.p + g.q, g.pontryagin) for g in self.page_gens],
            all_rel, name=name)
        self.pres.check_confluence()
        self._slot_cache = {}

    # -- monomial geometry --------------------------------------------------

    def mono_bidegree(self, mono):
        p = q = 0
        for e, g in zip(mono, self.page_gens):
            bp, bq = self.bidegrees[g.name]
            p += e * bp
            q += e * bq
        return p, q

    def admissible(self, mono):
        if self.t_name is None:
            return True
        it = self.pres.index[self.t_name]
        has_t = mono[it] >= 1
        has_base = any(mono[self.pres.index[n]] for n in self.base_names)
        has_col = any(mono[self.pres.index[n]] for n in self.column_names)
        if has_t:
            return not has_base
        return not has_col

    def generator_class_monos(self):
        """The monomials whose differentials are independent data."""
        out = []
        unit = self.pres.unit()
        for g in self.page_gens:
            i = self.pres.index[g.name]
            if g.sector == "column":
                it = self.pres.index[self.t_name]
                exps = list(unit)
                exps[i] = 1
                exps[it] = 1
                out.append(tuple(exps))
            elif g.sector in ("plain", "base", "t"):
                exps = list(unit)
                exps[i] = 1
                out.append(tuple(exps))
        return out

    def mono_name(self, mono):
        return self.pres.format_mono(mono)

    def slots_in_window(self, window):
        key = (window.tmin, window.tmax, window.pmin, window.pmax)
        if key in self._slot_cache:
            return self._slot_cache[key]
        slots = {}
        for t in range(window.tmin, window.tmax + 1):
            for mono in self.pres.monomials_of_degree(t):
                if not self.admissible(mono):
                    continue
                p, q = self.mono_bidegree(mono)
                if not (window.pmin <= p <= window.pmax):
                    continue
                slots.setdefault((p, q), []).append(mono)
        for k in slots:
            slots[k].sort()
        self._slot_cache[key] = slots
        return slots

    def min_total_in_column(self, p):
        """Lower bound p + qmin for the total degree of classes in column p,
        where qmin bounds the fiber-direction contribution from below."""
        qmin = 0
        for g in self.page_gens:
            if g.q < 0:
                cap = self.pres.caps()[self.pres.index[g.name]]
                if cap is None:
                    return None
                qmin += cap * g.q
        return p + qmin


# ---------------------------------------------------------------------------
# Slot state: a subquotient of the ambient monomial span with labels.
# ---------------------------------------------------------------------------

class SlotState:
    def __init__(self, algebra, bidegree, monos, rel_cols):
        self.algebra = algebra
        self.bidegree = bidegree
        self.monos = list(monos)
        self.pos = {m: i for i, m in enumerate(self.monos)}
        n = len(self.monos)
        self.amb_rels = [list(c) for c in rel_cols]
        self.kmat = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
        self.bound_in_k = [list(c) for c in rel_cols]
        self._refresh()

    def _refresh(self):
        k = len(self.kmat[0]) if self.kmat else 0
        self.qp = quotient_presentation(k, self.bound_in_k)
        self.reps = [mat_vec(self.kmat, g) for g in self.qp.gens] if k else []
        self.orders = list(self.qp.orders)
        n = len(self.monos)
        self._kmat_identity = (k == n and all(
            self.kmat[i][j] == (1 if i == j else 0)
            for i in range(n) for j in range(k)))
        self._solver = None

    @property
    def group(self):
        return self.qp.group if self.monos else FgAbGroup.zero()

    def nclasses(self):
        return len(self.orders)

    def element_vec(self, el):
        vec = [0] * len(self.monos)
        for m, c in el.items():
            if m not in self.pos:
                raise BidegreeMismatch(
                    "monomial %s not in slot %s" % (self.algebra.mono_name(m), self.bidegree))
            vec[self.pos[m]] = c
        return vec

    def reduce_ambient(self, vec):
        """Class coordinates of an ambient cycle vector."""
        if not self.monos:
            if any(vec):
                raise CompositionNotZero("nonzero element of an empty slot")
            return []
        if self._kmat_identity:
            return self.qp.reduce(vec)
        x = self._solve(vec)
        if x is None:
            raise CompositionNotZero(
                "element is not a cycle in slot %s" % (self.bidegree,))
        return self.qp.reduce(x)

    def _solve(self, vec):
        if self._solver is None:
            u, d, v, _, _ = smith_normal_form_full(self.kmat)
            self._solver = (u, [row[:] for row in d], v)
        u, d, v = self._solver
        rows = len(self.kmat)
        cols = len(self.kmat[0]) if self.kmat else 0
        c = mat_vec(u, vec)
        y = [0] * cols
        for i in range(rows):
            di = d[i][i] if i < min(rows, cols) else 0
            if i < cols and di:
                if c[i] % di:
                    return None
                y[i] = c[i] // di
            elif c[i]:
                return None
        return mat_vec(v, y)

    def class_label(self, i):
        rep = self.reps[i]
        el = {self.monos[j]: rep[j] for j in range(len(rep)) if rep[j]}
        return self.algebra.pres.format_element(el)


def lattice_basis(columns, n):
    """A basis of the column span of the given vectors inside Z^n."""
    cols = [c for c in columns if any(c)]
    if not cols:
        return []
    m = [[c[i] for c in cols] for i in range(n)]
    _, d, _, u_inv, _ = smith_normal_full_cached(m)
    out = []
    rank = 0
    for i in range(min(n, len(cols))):
        if d[i][i]:
            rank += 1
    for i in range(rank):
        di = d[i][i]
        out.append([di * u_inv[j][i] for j in range(n)])
    return out


def smith_normal_full_cached(m):
    return smith_normal_form_full(m)


# ---------------------------------------------------------------------------
# Page.
# ---------------------------------------------------------------------------

class Page:
    def __init__(self, algebra, window, r=1, report_window=None):
        self.algebra = algebra
        self.window = window
        self.report_window = report_window or window
        self.r = r
        self.slots = {}
        raw = algebra.slots_in_window(window)
        for (p, q), monos in raw.items():
            t = p + q
            basis = monos
            cols = self._slot_relations(basis, t)
            self.slots[(p, q)] = SlotState(algebra, (p, q), basis, cols)
        self.history = []

    def _slot_relations(self, basis, total):
        pres = self.algebra.pres
        cols = pres.relation_columns(basis, total)
        # relation columns computed degree-wise can mix bidegrees only if a
        # relation were inhomogeneous in (p, q); all fixtures are bigraded.
        return cols

    def copy_shell(self):
        new = object.__new__(Page)
        new.algebra = self.algebra
        new.window = self.window
        new.report_window = self.report_window
        new.r = self.r
        new.slots = self.slots
        new.history = list(self.history)
        return new

    def slot(self, p, q):
        return self.slots.get((p, q))

    def group(self, p, q):
        s = self.slot(p, q)
        return s.group if s else FgAbGroup.zero()

    def total_degree_groups(self):
        out = {}
        for (p, q), s in self.slots.items():
            if s.group.is_zero():
                continue
            out.setdefault(p + q, []).append(((p, q), s.group))
        for t in out:
            out[t].sort()
        return out

    def total_group(self, t):
        g = FgAbGroup.zero()
        for (p, q), s in self.slots.items():
            if p + q == t:
                g = g.direct_sum(s.group)
        return g

    def safe_totals(self, turns):
        """Totals whose groups are unaffected by the untracked margins."""
        lo = self.window.tmin + turns + 1
        hi = self.window.tmax - turns - 1
        return lo, hi

    # -- differentials -------------------------------------------------------

    def target_bidegree(self, p, q, r=None):
        r = self.r if r is None else r
        return (p - r, q + r - 1)

    def leibniz_extend(self, gen_diffs, orphan_diffs=None, strict=True):
        """Extend generator differentials to every tracked monomial.

        gen_diffs maps generator-class monomials (or their printed names)
        to target-slot elements.  Values propagate to products by the
        Leibniz rule; monomials several generator steps away are reached
        by iterated left multiplication, and every doubly-determined value
        is cross-checked.  Monomials the closure cannot reach are orphans;
        those with vanishing target slots are forced to zero, the rest
        must come from ``orphan_diffs``.
        """
        alg = self.algebra
        pres = alg.pres
        values = {pres.unit(): {}}
        gen_monos = alg.generator_class_monos()
        for m in gen_monos:
            v = gen_diffs.get(m, gen_diffs.get(alg.mono_name(m), {}))
            self._check_target(m, v)
            values[m] = dict(v)
        all_set = set()
        for s in self.slots.values():
            all_set.update(s.monos)
        # forced zeros: monomials whose target slot holds nothing
        for m in all_set:
            if m in values:
                continue
            p, q = alg.mono_bidegree(m)
            tgt = self.slot(*self.target_bidegree(p, q))
            if tgt is None or not tgt.monos or tgt.group.is_zero():
                values[m] = {}
        # caller-supplied orphan assignments seed the closure as well
        for m, v in (orphan_diffs or {}).items():
            self._check_target(m, v)
            values[m] = dict(v)
        changed = True
        while changed:
            changed = False
            for g in gen_monos:
                for m in list(values.keys()):
                    prod = pres.multiply({g: 1}, {m: 1})
                    if not prod:
                        continue
                    if any(mm not in all_set for mm in prod):
                        continue  # product leaves the tracked window
                    rhs = self._leibniz_rhs(g, m, values)
                    unknown = [mm for mm in prod if mm not in values]
                    if not unknown:
                        if strict:
                            lhs = {}
                            for mm, cc in prod.items():
                                for m3, c3 in values[mm].items():
                                    lhs[m3] = lhs.get(m3, 0) + cc * c3
                            self._assert_same_class(lhs, rhs)
                        continue
                    if len(unknown) == 1 and abs(prod[unknown[0]]) == 1:
                        mm = unknown[0]
                        c = prod[mm]
                        val = dict(rhs)
                        for m2, c2 in prod.items():
                            if m2 == mm:
                                continue
                            for m3, c3 in values[m2].items():
                                val[m3] = val.get(m3, 0) - c2 * c3
                        val = {m3: (c3 if c == 1 else -c3)
                               for m3, c3 in val.items() if c3}
                        self._check_target(mm, val)
                        values[mm] = val
                        changed = True
        orphans = [m for m in sorted(all_set) if m not in values]
        return DiffData(self, values, orphans)

    def _leibniz_rhs(self, g, m, values):
        """d(g*m) = d(g) m + (-1)^{|g|} g d(m), with |g| the total degree."""
        pres = self.algebra.pres
        dg = values[g]
        dm = values[m]
        sg = -1 if pres.mono_degree(g) % 2 else 1
        out = {}
        for mm, cc in pres.multiply(dg, {m: 1}).items():
            out[mm] = out.get(mm, 0) + cc
        for mm, cc in pres.multiply({g: 1}, dm).items():
            out[mm] = out.get(mm, 0) + sg * cc
        return {mm: cc for mm, cc in out.items() if cc}

    def _check_target(self, mono, val):
        if not val:
            return
        p, q = self.algebra.mono_bidegree(mono)
        tp, tq = self.target_bidegree(p, q)
        for m in val:
            mp, mq = self.algebra.mono_bidegree(m)
            if (mp, mq) != (tp, tq):
                raise BidegreeMismatch(
                    "d_%d(%s) has a term %s at %s, expected %s" % (
                        self.r, self.algebra.mono_name(mono),
                        self.algebra.mono_name(m), (mp, mq), (tp, tq)))

    def _assert_same_class(self, lhs, rhs):
        diff = dict(lhs)
        for m, c in rhs.items():
            diff[m] = diff.get(m, 0) - c
        diff = {m: c for m, c in diff.items() if c}
        if not diff:
            return
        # compare inside the target slot modulo boundaries-so-far
        m0 = next(iter(diff))
        p, q = self.algebra.mono_bidegree(m0)
        s = self.slot(p, q)
        if s is None:
            return
        try:
            coords = s.reduce_ambient(s.element_vec(diff))
        except CompositionNotZero:
            raise RelationViolated(
                "Leibniz extension is inconsistent at %s" % (self.algebra.pres.format_element(diff)))
        if any(coords):
            raise RelationViolated(
                "Leibniz extension disagrees by %s" % self.algebra.pres.format_element(diff))


@dataclass
class DiffData:
    page: Page
    values: dict
    orphans: list

    def class_matrices(self):
        """Per-slot morphisms on current classes; verifies cycles/relations."""
        page = self.page
        out = {}
        for (p, q), s in page.slots.items():
            tp, tq = page.target_bidegree(p, q)
            target = page.slot(tp, tq)
            cols = []
            for rep in s.reps:
                val = {}
                ok = True
                for j, c in enumerate(rep):
                    if not c:
                        continue
                    m = s.monos[j]
                    if m not in self.values:
                        ok = False
                        break
                    for m2, c2 in self.values[m].items():
                        val[m2] = val.get(m2, 0) + c * c2
                if not ok:
                    cols.append(None)
                    continue
                val = {m2: c2 for m2, c2 in val.items() if c2}
                if not val:
                    cols.append([0] * (target.nclasses() if target else 0))
                    continue
                if target is None:
                    if page.window.contains(tp, tq):
                        raise RelationViolated("differential into a missing slot")
                    raise WindowTooSmall(
                        "differential from %s leaves the window" % ((p, q),))
                coords = target.reduce_ambient(target.element_vec(val))
                cols.append(coords)
            out[(p, q)] = cols
        return out


def assemble_differential(page, gen_diffs, orphan_diffs=None):
    """Leibniz-extend and package the page differential, checking d.d = 0."""
    data = page.leibniz_extend(gen_diffs, orphan_diffs)
    if data.orphans:
        named = [page.algebra.mono_name(m) for m in data.orphans]
        raise AmbiguousDifferential(["unassigned classes: " + ", ".join(sorted(named))])
    mats = data.class_matrices()
    # verify d . d = 0 at class level
    for (p, q), cols in mats.items():
        tp, tq = page.target_bidegree(p, q)
        if (tp, tq) not in mats:
            continue
        tcols = mats[(tp, tq)]
        tslot = page.slot(tp, tq)
        t2 = page.slot(*page.target_bidegree(tp, tq))
        for col in cols:
            if col is None or not any(col):
                continue
            image = [0] * (t2.nclasses() if t2 else 0)
            for j, c in enumerate(col):
                if not c:
                    continue
                tc = tcols[j]
                if tc is None:
                    continue
                for i, v in enumerate(tc):
                    image[i] += c * v
            if t2 is not None:
                red = [v % o if o else v for v, o in zip(image, t2.orders)]
                if any(red):
                    raise RelationViolated("d . d != 0")
    # verify relation vectors die
    for (p, q), s in page.slots.items():
        tp, tq = page.target_bidegree(p, q)
        target = page.slot(tp, tq)
        for rel in s.amb_rels:
            val = {}
            ok = True
            for j, c in enumerate(rel):
                if not c:
                    continue
                m = s.monos[j]
                if m not in data.values:
                    ok = False
                    break
                for m2, c2 in data.values[m].items():
                    val[m2] = val.get(m2, 0) + c * c2
            if not ok:
                continue
            val = {m2: c2 for m2, c2 in val.items() if c2}
            if val and target is not None:
                coords = target.reduce_ambient(target.element_vec(val))
                if any(coords):
                    raise RelationViolated("d of a relation does not vanish")
            elif val:
                raise RelationViolated("d of a relation leaves the window")
    return data, mats


def turn_page(page, gen_diffs, orphan_diffs=None):
    """Homology at every slot for the assembled differential; returns the
    next page with labels propagated through chosen sections."""
    data, mats = assemble_differential(page, gen_diffs, orphan_diffs)
    new = page.copy_shell()
    new.r = page.r + 1
    new.slots = {}
    r = page.r
    incoming = {}
    for (p, q), cols in mats.items():
        tp, tq = page.target_bidegree(p, q)
        incoming.setdefault((tp, tq), []).extend(
            [(p, q, j, col) for j, col in enumerate(cols) if col is not None])
    for (p, q), s in page.slots.items():
        # outgoing map on classes
        cols = mats[(p, q)]
        tgt = page.slot(*page.target_bidegree(p, q))
        src_group = s.group
        mid_orders = s.orders
        d_out_matrix = []
        if tgt is not None and tgt.nclasses():
            for i in range(tgt.nclasses()):
                d_out_matrix.append([
                    (cols[j][i] if cols[j] is not None else 0)
                    for j in range(s.nclasses())])
            d_out = GroupMorphism(src_group, tgt.group, d_out_matrix)
        else:
            d_out = GroupMorphism.zero(src_group, FgAbGroup.zero())
        ins = incoming.get((p, q), [])
        if ins:
            cols_in = []
            for (_, _, _, col) in ins:
                cols_in.append(col)
            d_in_matrix = [[col[i] for col in cols_in] for i in range(s.nclasses())]
            d_in = GroupMorphism(FgAbGroup.free(len(cols_in)), src_group, d_in_matrix)
        else:
            d_in = GroupMorphism.zero(FgAbGroup.zero(), src_group)
        hgroup, section = homology_at(d_in, d_out)
        # rebuild the slot: new cycle lattice and boundaries in ambient coords
        new_slot = object.__new__(SlotState)
        new_slot.algebra = s.algebra
        new_slot.bidegree = s.bidegree
        new_slot.monos = s.monos
        new_slot.pos = s.pos
        new_slot.amb_rels = s.amb_rels
        n = len(s.monos)
        # ambient reps of surviving classes
        new_reps = []
        for vec in section:
            amb = [0] * n
            for j, c in enumerate(vec):
                if not c:
                    continue
                for i in range(n):
                    amb[i] += c * s.reps[j][i]
            new_reps.append(amb)
        # boundaries: previous boundaries + incoming images (ambient)
        bounds = [mat_vec(s.kmat, b) for b in s.bound_in_k]
        for (_, _, _, col) in ins:
            amb = [0] * n
            for j, c in enumerate(col):
                if not c:
                    continue
                for i in range(n):
                    amb[i] += c * s.reps[j][i]
            bounds.append(amb)
        basis_cols = new_reps + bounds
        kb = lattice_basis(basis_cols, n)
        new_slot.kmat = [[kb[j][i] for j in range(len(kb))] for i in range(n)]
        new_slot.bound_in_k = []
        for b in bounds:
            if not any(b):
                continue
            x = solve_int(new_slot.kmat, b) if kb else ([] if not any(b) else None)
            if x is None:
                raise CompositionNotZero("boundary escaped the cycle lattice")
            new_slot.bound_in_k.append(x)
        new_slot._refresh()
        assert new_slot.group == hgroup
        new.slots[(p, q)] = new_slot
    new.history.append(("turn", r))
    return new


# ---------------------------------------------------------------------------
# Degree-reasons scan, stabilization, invariants, rendering.
# ---------------------------------------------------------------------------

def e1_slot_empty(page, p, q):
    """True when the ambient E^1 slot provably has no monomials."""
    alg = page.algebra
    key = (p, q)
    cache = getattr(page, "_empty_cache", None)
    if cache is None:
        cache = page._empty_cache = {}
    if key in cache:
        return cache[key]
    try:
        monos = alg.pres.monomials_of_degree(p + q)
    except Exception:
        cache[key] = False
        return False
    empty = not any(alg.admissible(m) and alg.mono_bidegree(m) == (p, q) for m in monos)
    cache[key] = empty
    return empty


def scan_r_bound(page):
    """Largest r beyond which no tracked slot can emit or receive d_r."""
    qmin = 0
    for g in page.algebra.page_gens:
        if g.q < 0:
            cap = page.algebra.pres.caps()[page.algebra.pres.index[g.name]]
            if cap is None:
                raise WindowTooSmall("uncapped generator of negative fiber degree")
            qmin += cap * g.q
    span = page.window.pmax - page.window.pmin + 1
    bound = span
    for (p, q), s in page.slots.items():
        if s.group.is_zero():
            continue
        # incoming d_r source sits in column p + r with total p + q + 1;
        # columns with min total above that are empty
        bound = max(bound, (p + q) + 1 - qmin - p + 1)
    return max(bound, 2)


def possible_differentials(page, r_range):
    """All (r, source bidegree, hom description) with Hom(source, target)
    nonzero inside the tracked window.

    Raises WindowTooSmall when a nonzero tracked slot could emit a
    differential into an untracked region that is not provably empty;
    unverifiable *incoming* edges do not raise, they only mark slots
    unsafe (see unsafe_bidegrees).
    """
    from .fgab import hom_description, hom_group
    out = []
    for r in r_range:
        for (p, q), s in sorted(page.slots.items()):
            if s.group.is_zero():
                continue
            tp, tq = p - r, q + r - 1
            target = page.slot(tp, tq)
            if target is None:
                if tp >= page.window.pmin and not e1_slot_empty(page, tp, tq):
                    raise WindowTooSmall(
                        "cannot rule out d_%d from %s into untracked %s"
                        % (r, (p, q), (tp, tq)))
            elif not target.group.is_zero():
                if not hom_group(s.group, target.group).is_zero():
                    desc, _ = hom_description(s.group, target.group)
                    out.append((r, (p, q), str(desc)))
    return out


def unsafe_bidegrees(page, r_range):
    """Slots whose groups could be touched from outside the tracked window."""
    unsafe = set()
    for r in r_range:
        for (p, q), s in page.slots.items():
            sp, sq = p + r, q - r + 1
            if page.slot(sp, sq) is None and not e1_slot_empty(page, sp, sq):
                unsafe.add((p, q))
            tp, tq = p - r, q + r - 1
            if page.slot(tp, tq) is None and tp >= page.window.pmin \
                    and not e1_slot_empty(page, tp, tq):
                unsafe.add((p, q))
    return unsafe


def collapse_certificates(page, r_from=None):
    """Certificates that no further differential can be nonzero, or None.

    Certificates are only issued for slots whose potential partners across
    all remaining pages are tracked (or provably empty); the caller's
    window margins are responsible for making the report region safe.
    """
    r0 = r_from if r_from is not None else page.r
    rng = range(r0, scan_r_bound(page) + 1)
    try:
        cands = possible_differentials(page, rng)
    except WindowTooSmall:
        return None
    if cands:
        return None
    unsafe = unsafe_bidegrees(page, rng)
    certs = []
    for (p, q), s in sorted(page.slots.items()):
        if s.group.is_zero():
            continue
        if (p, q) in unsafe:
            reason = "UNKNOWN: window edge; enlarge the margin to certify"
        else:
            reason = "no nonzero Hom for any d_r, r >= %d, within the window" % r0
        certs.append(StabilityCertificate((p, q), r0, reason))
    return certs


def run_to_infinity(page, policy):
    """Run pages until stable.

    ``policy(page, candidates)`` returns a (gen_diffs, orphan_diffs) pair
    whenever the current page has candidate differentials; zero_policy
    encodes an externally justified collapse.  Returns (e_inf_page,
    certificates); raises AmbiguousDifferential when candidates exist and
    no policy was given.
    """
    current = page
    guard = 0
    while True:
        guard += 1
        if guard > scan_r_bound(page) + 4:
            raise RuntimeError("stabilization did not terminate")
        certs = collapse_certificates(current)
        if certs is not None:
            return current, certs
        cands = possible_differentials(current, [current.r])
        if not cands:
            nxt = current.copy_shell()
            nxt.r = current.r + 1
            current = nxt
            continue
        if policy is None:
            raise AmbiguousDifferential(cands)
        gen_diffs, orphan_diffs = policy(current, cands)
        current = turn_page(current, gen_diffs, orphan_diffs)


def zero_policy(reason):
    """Policy asserting every candidate differential vanishes, on external
    grounds (a cited collapse); the reason string lands in reports."""

    def policy(page, candidates):
        data = page.leibniz_extend({}, None, strict=False)
        return {}, {m: {} for m in data.orphans}

    policy.reason = reason
    return policy


def euler_check(page_a, page_b):
    """Alternating-sum-of-ranks comparison across a page turn.

    All differentials the model applies are internal to the tracked
    window, so the sum over every tracked slot is exactly invariant.
    """

    def chi(page):
        s = 0
        for (p, q), slot in page.slots.items():
            s += (1 if (p + q) % 2 == 0 else -1) * slot.group.rank
        return s

    return chi(page_a) == chi(page_b)


def render_chart(page, window=None, generators=(), fmt="text"):
    """X/O grid; X per Z summand, O per Z/2, (Z/k) otherwise.

    Generator positions may be highlighted with brackets, matching the
    figure convention that algebra generators are squares.
    """
    win = window or page.report_window
    cells = {}
    gen_positions = set()
    for name in generators:
        if name in page.algebra.bidegrees:
            gen_positions.add(page.algebra.bidegrees[name])
    qs = set()
    ps = set()
    for (p, q), s in page.slots.items():
        if not win.contains(p, q):
            continue
        g = s.group
        if g.is_zero():
            continue
        sym = "X" * g.rank
        for t in g.torsion:
            sym += "O" if t == 2 else "(Z/%d)" % t
        if (p, q) in gen_positions:
            sym = "[%s]" % sym
        cells[(p, q)] = sym
        qs.add(q)
        ps.add(p)
    if not cells:
        return "(empty chart)"
    pmin, pmax = min(ps), max(ps)
    qmin, qmax = min(qs), max(qs)
    colw = {}
    for p in range(pmin, pmax + 1):
        w = max([len(cells.get((p, q), "")) for q in range(qmin, qmax + 1)] + [len(str(p))])
        colw[p] = max(w, 1)
    lines = []
    header = "q\\p |" + "|".join(str(p).rjust(colw[p]) for p in range(pmin, pmax + 1))
    lines.append(header)
    lines.append("-" * len(header))
    for q in range(qmax, qmin - 1, -1):
        row = str(q).rjust(4) + " |"
        row += "|".join(cells.get((p, q), "").rjust(colw[p]) for p in range(pmin, pmax + 1))
        lines.append(row)
    text = "\n".join(lines)
    if fmt == "svg":
        return _chart_svg(cells, pmin, pmax, qmin, qmax)
    return text


def _chart_svg(cells, pmin, pmax, qmin, qmax):
    cw, ch = 46, 24
    width = (pmax - pmin + 2) * cw
    height = (qmax - qmin + 2) * ch
    out = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d">' % (width, height)]
    out.append('<style>text{font:12px monospace}</style>')
    for (p, q), sym in sorted(cells.items()):
        x = (p - pmin + 1) * cw
        y = (qmax - q + 1) * ch
        out.append('<text x="%d" y="%d">%s</text>' % (x, y, sym))
    for p in range(pmin, pmax + 1):
        out.append('<text x="%d" y="%d" fill="gray">%d</text>' % ((p - pmin + 1) * cw, height - 4, p))
    for q in range(qmin, qmax + 1):
        out.append('<text x="2" y="%d" fill="gray">%d</text>' % ((qmax - q + 1) * ch, q))
    out.append("</svg>")
    return "\n".join(out)
