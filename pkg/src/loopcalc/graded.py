"""Graded-commutative algebra presentations over Z.

A presentation is a list of generators with integer degrees and a list of
homogeneous relations.  Monomials are exponent tuples in declaration
order; signs follow the Koszul rule with respect to each generator's
declared parity (default: parity of its degree).  Pontryagin-ring
fixtures declare odd-degree generators with even parity, so that their
squares are honest free classes.

Over Z a parity-odd generator x always satisfies 2*x^2 = 0; x^2 itself is
an admissible 2-torsion monomial unless a relation kills it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

from .fgab import FgAbGroup, mat_vec, quotient_presentation


class UnboundedDegree(Exception):
    """A degree slice has infinitely many monomials under the given caps."""


class NonConfluent(Exception):
    """The oriented relation set does not reduce to unique normal forms."""


@dataclass(frozen=True)
class Generator:
    """Named generator of one integer degree.

    Distinct generators always commute with the Koszul sign of their
    degrees; the pontryagin flag only exempts a generator's own square
    from the rule (so f^2 can be an honest free class, as in the
    Pontryagin ring of an even-sphere loop space).
    """

    name: str
    degree: int
    pontryagin: bool = False

    def par(self):
        return abs(self.degree) % 2


class Presentation:
    """Generators plus homogeneous relations, with rewrite normal forms.

    Relations are given as lists of (coeff, [(name, exp), ...]) terms.

    >>> p = Presentation([("a", -3), ("u", 2)], [[(1, [("a", 2)])]])
    >>> p.group_at(0).group == FgAbGroup.free(1)
    True
    """

    def __init__(self, generators, relations=(), name=""):
        self.name = name
        gens = []
        for g in generators:
            if isinstance(g, Generator):
                gens.append(g)
            else:
                gens.append(Generator(*g))
        self.gens = gens
        self.index = {g.name: i for i, g in enumerate(gens)}
        if len(self.index) != len(gens):
            raise ValueError("generator names must be unique")
        self.relations = [self._element_from_terms(r) for r in relations]
        for r in self.relations:
            degs = {self.mono_degree(m) for m in r}
            if len(degs) > 1:
                raise ValueError("relation is not homogeneous: %s" % self.format_element(r))
        self._rules = None
        self._caps = None
        self._mono_cache = {}
        self._mul_cache = {}

    # -- basic monomial algebra ------------------------------------------

    def n(self):
        return len(self.gens)

    def unit(self):
        return (0,) * self.n()

    def _element_from_terms(self, terms):
        el = {}
        for coeff, mono in terms:
            exps = [0] * self.n()
            for name, e in mono:
                exps[self.index[name]] += e
            key = tuple(exps)
            el[key] = el.get(key, 0) + int(coeff)
        return {m: c for m, c in el.items() if c}

    def element(self, terms):
        """Public constructor from (coeff, [(name, exp), ...]) terms."""
        return self.reduce_element(self._element_from_terms(terms))

    def gen_element(self, name):
        exps = [0] * self.n()
        exps[self.index[name]] = 1
        return {tuple(exps): 1}

    def mono_degree(self, mono):
        return sum(e * g.degree for e, g in zip(mono, self.gens))

    def mono_parity(self, mono):
        return sum(e * g.par() for e, g in zip(mono, self.gens)) % 2

    def mul_sign(self, m1, m2):
        """Koszul sign for concatenating normal monomials m1 * m2."""
        s = 0
        for j, g2 in enumerate(self.gens):
            b = m2[j]
            if not b or not g2.par():
                continue
            behind = sum(m1[i] * self.gens[i].par() for i in range(j + 1, self.n()))
            s += b * behind
        return -1 if s % 2 else 1

    def mono_mul(self, m1, m2):
        sign = self.mul_sign(m1, m2)
        return sign, tuple(a + b for a, b in zip(m1, m2))

    def mono_divides(self, m1, m2):
        return all(a <= b for a, b in zip(m1, m2))

    def mono_sub(self, m2, m1):
        return tuple(b - a for a, b in zip(m1, m2))

    def format_mono(self, mono):
        parts = []
        for e, g in zip(mono, self.gens):
            if e == 1:
                parts.append(g.name)
            elif e:
                parts.append("%s^%d" % (g.name, e))
        return "*".join(parts) if parts else "1"

    def format_element(self, el):
        if not el:
            return "0"
        parts = []
        for mono in sorted(el):
            c = el[mono]
            t = self.format_mono(mono)
            if c == 1:
                parts.append(t)
            elif c == -1:
                parts.append("-" + t)
            else:
                parts.append("%d*%s" % (c, t))
        return " + ".join(parts).replace("+ -", "- ")

    # -- rewrite system ---------------------------------------------------

    def _lex_key(self, mono):
        return mono

    def rules(self):
        """Oriented rewrite rules lhs -> element, from monic-lead relations."""
        if self._rules is None:
            rules = []
            for r in self.relations:
                lead = max(r, key=self._lex_key)
                c = r[lead]
                if c in (1, -1):
                    rest = {m: -v * c for m, v in r.items() if m != lead}
                    rules.append((lead, rest))
            self._rules = rules
        return self._rules

    def reduce_element(self, el, _depth=0):
        """Rewrite to normal form: leads replaced, odd squares kept."""
        if _depth > 200:
            raise NonConfluent("rewriting did not terminate")
        out = {}
        again = False
        for mono, coeff in el.items():
            hit = None
            for lhs, rhs in self.rules():
                if self.mono_divides(lhs, mono):
                    hit = (lhs, rhs)
                    break
            if hit is None:
                out[mono] = out.get(mono, 0) + coeff
                continue
            again = True
            lhs, rhs = hit
            rest = self.mono_sub(mono, lhs)
            sign, recomb = self.mono_mul(lhs, rest)
            assert recomb == mono
            for m2, c2 in rhs.items():
                s2, prod = self.mono_mul(m2, rest)
                out[prod] = out.get(prod, 0) + coeff * sign * s2 * c2
        out = {m: c for m, c in out.items() if c}
        if again:
            return self.reduce_element(out, _depth + 1)
        return out

    def multiply(self, e1, e2):
        """Product of two elements (dict monomial -> coeff), normal form."""
        out = {}
        for m1, c1 in e1.items():
            for m2, c2 in e2.items():
                key = (m1, m2)
                hit = self._mul_cache.get(key)
                if hit is None:
                    s, m = self.mono_mul(m1, m2)
                    hit = self.reduce_element({m: s})
                    self._mul_cache[key] = hit
                for m, c in hit.items():
                    out[m] = out.get(m, 0) + c * c1 * c2
        return {m: c for m, c in out.items() if c}

    def scale(self, c, el):
        return {m: c * v for m, v in el.items() if c * v}

    def add(self, e1, e2):
        out = dict(e1)
        for m, c in e2.items():
            out[m] = out.get(m, 0) + c
        return {m: c for m, c in out.items() if c}

    def check_confluence(self, max_degree_span=60):
        """Pairwise overlap check on the oriented rules; raises NonConfluent."""
        rules = self.rules()
        for i, (l1, r1) in enumerate(rules):
            for l2, r2 in rules[i:]:
                overlap = tuple(max(a, b) for a, b in zip(l1, l2))
                if sum(overlap) > sum(l1) + sum(l2):
                    continue  # disjoint supports never overlap critically
                if abs(self.mono_degree(overlap)) > max_degree_span:
                    continue
                e = {overlap: 1}
                # reduce starting with each rule explicitly
                a = self._reduce_with_first(e, (l1, r1))
                b = self._reduce_with_first(e, (l2, r2))
                diff = self.add(a, self.scale(-1, b))
                if self.reduce_element(diff):
                    raise NonConfluent(
                        "rules %s and %s disagree on %s" % (
                            self.format_mono(l1), self.format_mono(l2),
                            self.format_mono(overlap)))
        return True

    def _reduce_with_first(self, el, rule):
        lhs, rhs = rule
        out = {}
        for mono, coeff in el.items():
            if self.mono_divides(lhs, mono):
                rest = self.mono_sub(mono, lhs)
                sign, _ = self.mono_mul(lhs, rest)
                for m2, c2 in rhs.items():
                    s2, prod = self.mono_mul(m2, rest)
                    out[prod] = out.get(prod, 0) + coeff * sign * s2 * c2
            else:
                out[mono] = out.get(mono, 0) + coeff
        return self.reduce_element(out)

    # -- degree slices -----------------------------------------------------

    def caps(self):
        """Exponent cap per generator from pure-power monomial rules."""
        if self._caps is None:
            caps = [None] * self.n()
            for lhs, rhs in self.rules():
                if rhs:
                    continue
                support = [i for i, e in enumerate(lhs) if e]
                if len(support) == 1:
                    i = support[0]
                    e = lhs[i]
                    if caps[i] is None or e - 1 < caps[i]:
                        caps[i] = e - 1
            self._caps = caps
        return self._caps

    def monomials_of_degree(self, degree, extra_caps=None):
        """All normal-form monomials of the given degree.

        Raises UnboundedDegree when an uncapped generator of nonpositive
        degree makes the slice infinite.
        """
        cache_key = (degree, tuple(sorted(extra_caps.items())) if extra_caps else None)
        hit = self._mono_cache.get(cache_key)
        if hit is not None:
            return list(hit)
        caps = list(self.caps())
        if extra_caps:
            for name, c in extra_caps.items():
                i = self.index[name]
                caps[i] = c if caps[i] is None else min(caps[i], c)
        degs = [g.degree for g in self.gens]
        for i, c in enumerate(caps):
            if c is None and degs[i] <= 0:
                raise UnboundedDegree(
                    "generator %s needs an exponent cap" % self.gens[i].name)
        # suffix minimum contribution of capped generators
        n = self.n()
        minrest = [0] * (n + 1)
        for i in range(n - 1, -1, -1):
            m = 0
            if caps[i] is not None:
                m = min(0, caps[i] * degs[i])
            minrest[i] = minrest[i + 1] + m
        out = []

        def rec(i, exps, remaining):
            if i == n:
                # basis keeps only monomials no monic rule rewrites
                if remaining == 0:
                    mono = tuple(exps)
                    if not any(self.mono_divides(l, mono) for l, _ in self.rules()):
                        out.append(mono)
                return
            cap = caps[i]
            if cap is None:
                cap = (remaining - minrest[i + 1]) // degs[i]
                if cap < 0:
                    cap = -1
            for e in range(cap + 1):
                exps.append(e)
                rec(i + 1, exps, remaining - e * degs[i])
                exps.pop()

        rec(0, [], degree)
        out.sort()
        self._mono_cache[cache_key] = out
        return list(out)

    def relation_columns(self, basis, degree, extra_caps=None):
        """Ideal relation vectors over the monomial basis in one degree."""
        pos = {m: i for i, m in enumerate(basis)}
        cols = []
        seen = set()
        for r in self.relations:
            if not r:
                continue
            dr = self.mono_degree(next(iter(r)))
            try:
                mults = self.monomials_of_degree(degree - dr, extra_caps)
            except UnboundedDegree:
                raise
            for q in mults:
                prod = self.multiply({q: 1}, r)
                if any(m not in pos for m in prod):
                    continue  # term exceeds the window caps; conservative skip
                col = [0] * len(basis)
                for m, c in prod.items():
                    col[pos[m]] = c
                key = tuple(col)
                if any(key) and key not in seen:
                    seen.add(key)
                    cols.append(col)
        # ambient graded commutativity: odd squares are 2-torsion, except
        # for pontryagin generators whose self-swaps carry no sign
        for m in basis:
            if any(e >= 2 and g.par() and not g.pontryagin
                   for e, g in zip(m, self.gens)):
                col = [0] * len(basis)
                col[pos[m]] = 2
                key = tuple(col)
                if key not in seen:
                    seen.add(key)
                    cols.append(col)
        return cols

    def group_at(self, degree, extra_caps=None):
        """The abelian group this presentation spans in one degree."""
        basis = self.monomials_of_degree(degree, extra_caps)
        cols = self.relation_columns(basis, degree, extra_caps)
        q = quotient_presentation(len(basis), cols)
        return GradedSlice(self, degree, basis, q)


@dataclass
class GradedSlice:
    """One degree of a presented algebra: labeled basis plus quotient."""

    presentation: Presentation
    degree: int
    basis: list
    quotient: object

    @property
    def group(self):
        return self.quotient.group

    def coords(self, el):
        el = self.presentation.reduce_element(el)
        vec = [0] * len(self.basis)
        pos = {m: i for i, m in enumerate(self.basis)}
        for m, c in el.items():
            if m not in pos:
                raise ValueError("element outside the degree slice basis")
            vec[pos[m]] = c
        return self.quotient.reduce(vec)

    def is_zero(self, el):
        return all(c == 0 for c in self.coords(el))

    def elements_equal(self, e1, e2):
        p = self.presentation
        return self.is_zero(p.add(e1, p.scale(-1, e2)))


# ---------------------------------------------------------------------------
# Presentation matching.
# ---------------------------------------------------------------------------

@dataclass
class MatchReport:
    """Outcome of comparing computed graded data against a presentation."""

    passed: bool = True
    group_results: list = field(default_factory=list)  # (degree, ok, got, want)
    product_results: list = field(default_factory=list)  # (desc, ok, note)
    flags: list = field(default_factory=list)

    def fail(self):
        self.passed = False

    def summary(self):
        lines = []
        for d, ok, got, want in self.group_results:
            mark = "PASS" if ok else "FAIL"
            lines.append("degree %+d: %s (computed %s, expected %s)" % (d, mark, got, want))
        for desc, ok, note in self.product_results:
            mark = "PASS" if ok else "FAIL"
            lines.append("product %s: %s%s" % (desc, mark, " " + note if note else ""))
        for f in self.flags:
            lines.append("flagged: %s" % f)
        lines.append("overall: %s" % ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def match_presentation(pres, computed_groups, window, products=None, extra_caps=None):
    """Compare computed per-degree groups (and optional generator products)
    against the groups and products of a presentation.

    computed_groups: dict degree -> FgAbGroup.
    products: list of (name1, name2, expected_element_terms) where the
    expected element is given in the presentation's own generators; the
    check is that name1*name2 equals it modulo the relations.
    """
    lo, hi = window
    report = MatchReport()
    for d in range(lo, hi + 1):
        want = pres.group_at(d, extra_caps).group
        got = computed_groups.get(d, FgAbGroup.zero())
        ok = got == want
        if not ok:
            report.fail()
        report.group_results.append((d, ok, got, want))
    for name1, name2, expected in products or []:
        p1 = pres.gen_element(name1)
        p2 = pres.gen_element(name2)
        prod = pres.multiply(p1, p2)
        want = pres.element(expected)
        d = pres.gens[pres.index[name1]].degree + pres.gens[pres.index[name2]].degree
        sl = pres.group_at(d, extra_caps)
        ok = sl.elements_equal(prod, want)
        if not ok:
            report.fail()
        report.product_results.append((
            "%s*%s = %s" % (name1, name2, pres.format_element(want)), ok,
            "" if ok else "computed %s" % pres.format_element(prod)))
    return report


def normal_form_word(pres, word):
    """Normal form of a generator word [(name, sign), ...] -> (sign, element).

    The word is multiplied left to right; the result is the reduced
    element.  Kept as a thin convenience wrapper for tests.
    """
    el = {pres.unit(): 1}
    for name in word:
        el = pres.multiply(el, pres.gen_element(name))
    return el


if __name__ == "__main__":
    import doctest

    doctest.testmod()
