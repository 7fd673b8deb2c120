"""LTL formulas over counted atomic propositions.

An atom ``pi(i, j, k, chi)`` asserts that at least ``i`` robots of type ``j``
occupy region ``k`` at the same time.  A nonzero connector ``chi`` binds every
atom carrying the same value to one fixed fleet of ``i`` robots of type ``j``,
so e.g. a pickup and a delivery can be tied to the same robots.  ``chi = 0``
(the default) is the plain counting atom.

Concrete syntax::

    f ::= true | false | pi(i,j,k[,chi]) | ! f | f & f | f "|" f
        | X f | F f | G f | f U f | f R f | ( f )

Unary operators bind tightest, then U/R (right associative), then &, then |.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class Atom:
    """Counted atomic proposition: at least `count` robots of `rtype` in `region`."""

    count: int
    rtype: int
    region: int
    chi: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise FormulaError(f"atom requires count >= 1, got {self.count}")
        if self.chi < 0:
            raise FormulaError(f"atom connector must be >= 0, got {self.chi}")

    @property
    def basic(self) -> "Atom":
        """The connector-free counterpart (chi = 0)."""
        return Atom(self.count, self.rtype, self.region) if self.chi else self

    def __str__(self):
        if self.chi:
            return f"pi({self.count},{self.rtype},{self.region},{self.chi})"
        return f"pi({self.count},{self.rtype},{self.region})"


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Formula:
    op: str                       # true|false|atom|not|and|or|next|until|release
    atom: Atom | None = None
    children: tuple["Formula", ...] = field(default_factory=tuple)

    def __str__(self):
        return pretty(self)


TRUE = Formula("true")
FALSE = Formula("false")


def atom(a: Atom) -> Formula:
    return Formula("atom", atom=a)


def not_(f: Formula) -> Formula:
    return Formula("not", children=(f,))


def and_(l: Formula, r: Formula) -> Formula:
    return Formula("and", children=(l, r))


def or_(l: Formula, r: Formula) -> Formula:
    return Formula("or", children=(l, r))


def next_(f: Formula) -> Formula:
    return Formula("next", children=(f,))


def until(l: Formula, r: Formula) -> Formula:
    return Formula("until", children=(l, r))


def release(l: Formula, r: Formula) -> Formula:
    return Formula("release", children=(l, r))


def eventually(f: Formula) -> Formula:
    return until(TRUE, f)


def always(f: Formula) -> Formula:
    return release(FALSE, f)


def atoms_of(f: Formula) -> set[Atom]:
    out: set[Atom] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if g.op == "atom":
            out.add(g.atom)
        stack.extend(g.children)
    return out


class FormulaError(ValueError):
    """Raised for malformed formula text or ill-formed atoms."""


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<TRUE>true\b)
  | (?P<FALSE>false\b)
  | (?P<PI>pi\s*\()
  | (?P<NUM>\d+)
  | (?P<COMMA>,)
  | (?P<RPAR>\))
  | (?P<LPAR>\()
  | (?P<NOT>!)
  | (?P<AND>&)
  | (?P<OR>\|)
  | (?P<OPNAME>[XFGUR]\b)
    """,
    re.VERBOSE,
)


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise FormulaError(self._where(pos, f"unexpected character {text[pos]!r}"))
            kind = m.lastgroup
            if kind != "WS":
                self.toks.append((kind, m.group(), pos))
            pos = m.end()
        self.i = 0

    def _where(self, pos: int, msg: str) -> str:
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return f"line {line}, column {col}: {msg}"

    def peek(self) -> str | None:
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def take(self, kind: str | None = None) -> tuple[str, str, int]:
        if self.i >= len(self.toks):
            raise FormulaError(self._where(len(self.text), "unexpected end of formula"))
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            raise FormulaError(self._where(tok[2], f"expected {kind}, got {tok[1]!r}"))
        self.i += 1
        return tok

    def error(self, msg: str) -> FormulaError:
        pos = self.toks[self.i][2] if self.i < len(self.toks) else len(self.text)
        return FormulaError(self._where(pos, msg))


def parse_formula(text: str) -> Formula:
    """Parse formula text into an AST.

    Raises FormulaError with line/column information on syntax errors,
    zero counts, or atoms with missing fields.
    """
    toks = _Tokens(text)
    f = _parse_or(toks)
    if toks.peek() is not None:
        raise toks.error(f"trailing input {toks.toks[toks.i][1]!r}")
    return f


def _parse_or(toks: _Tokens) -> Formula:
    f = _parse_and(toks)
    while toks.peek() == "OR":
        toks.take()
        f = or_(f, _parse_and(toks))
    return f


def _parse_and(toks: _Tokens) -> Formula:
    f = _parse_binary_temporal(toks)
    while toks.peek() == "AND":
        toks.take()
        f = and_(f, _parse_binary_temporal(toks))
    return f


def _parse_binary_temporal(toks: _Tokens) -> Formula:
    f = _parse_unary(toks)
    if toks.peek() == "OPNAME" and toks.toks[toks.i][1] in ("U", "R"):
        _, name, _ = toks.take()
        rhs = _parse_binary_temporal(toks)  # right associative
        return until(f, rhs) if name == "U" else release(f, rhs)
    return f


def _parse_unary(toks: _Tokens) -> Formula:
    kind = toks.peek()
    if kind == "NOT":
        toks.take()
        return not_(_parse_unary(toks))
    if kind == "OPNAME":
        _, name, pos = toks.toks[toks.i]
        if name in ("X", "F", "G"):
            toks.take()
            sub = _parse_unary(toks)
            if name == "X":
                return next_(sub)
            if name == "F":
                return eventually(sub)
            return always(sub)
        raise toks.error(f"operator {name!r} needs a left operand")
    return _parse_primary(toks)


def _parse_primary(toks: _Tokens) -> Formula:
    kind = toks.peek()
    if kind == "TRUE":
        toks.take()
        return TRUE
    if kind == "FALSE":
        toks.take()
        return FALSE
    if kind == "LPAR":
        toks.take()
        f = _parse_or(toks)
        toks.take("RPAR")
        return f
    if kind == "PI":
        _, _, pos = toks.take()
        nums = [int(toks.take("NUM")[1])]
        while toks.peek() == "COMMA":
            toks.take()
            nums.append(int(toks.take("NUM")[1]))
        toks.take("RPAR")
        if len(nums) not in (3, 4):
            raise FormulaError(toks._where(pos, f"pi() takes 3 or 4 fields, got {len(nums)}"))
        if nums[0] < 1:
            raise FormulaError(toks._where(pos, "pi() robot count must be >= 1"))
        chi = nums[3] if len(nums) == 4 else 0
        return atom(Atom(nums[0], nums[1], nums[2], chi))
    raise toks.error("expected a formula")


_PREC = {"or": 1, "and": 2, "until": 3, "release": 3,
         "not": 4, "next": 4, "atom": 5, "true": 5, "false": 5}


def pretty(f: Formula) -> str:
    """Render an AST back to parseable text (round-trips through parse_formula)."""

    def wrap(child: Formula, parent_prec: int) -> str:
        s = pretty(child)
        if _PREC[child.op] < parent_prec:
            return f"({s})"
        return s

    if f.op == "true":
        return "true"
    if f.op == "false":
        return "false"
    if f.op == "atom":
        return str(f.atom)
    if f.op == "not":
        return "! " + wrap(f.children[0], _PREC["not"] + 1)
    if f.op == "next":
        return "X " + wrap(f.children[0], _PREC["next"] + 1)
    if f.op in ("and", "or"):
        sym = "&" if f.op == "and" else "|"
        p = _PREC[f.op]
        return f"{wrap(f.children[0], p)} {sym} {wrap(f.children[1], p + 1)}"
    if f.op in ("until", "release"):
        sym = "U" if f.op == "until" else "R"
        p = _PREC[f.op]
        # right associative: left child needs strictly higher precedence
        return f"{wrap(f.children[0], p + 1)} {sym} {wrap(f.children[1], p)}"
    raise AssertionError(f.op)


# ---------------------------------------------------------------------------
# Fleet specification and validation


@dataclass(frozen=True)
class FleetSpec:
    """Robot team: per-type counts and the declared region ids."""

    counts: dict[int, int]          # robot type -> number of robots
    regions: frozenset[int] = frozenset()

    def __post_init__(self):
        for j, n in self.counts.items():
            if n < 1:
                raise FormulaError(f"robot type {j} must have >= 1 robots, got {n}")

    @property
    def robots(self) -> list[tuple[int, int]]:
        """All robot ids [r, j], r numbered 1..|K_j| within each type."""
        out = []
        for j in sorted(self.counts):
            out.extend((r, j) for r in range(1, self.counts[j] + 1))
        return out

    def size(self, j: int) -> int:
        return self.counts.get(j, 0)


@dataclass
class ValidityReport:
    valid: bool
    connector_uses: dict[int, set[tuple[int, int]]]   # chi -> {(count, rtype)}
    violations: list[str]

    def __bool__(self):
        return self.valid


def validate(f: Formula, fleet: FleetSpec) -> ValidityReport:
    """Check the formula against the fleet.

    A formula is valid when every nonzero connector is used with a single
    (count, rtype) pair and every referenced type/region is declared.
    """
    uses: dict[int, set[tuple[int, int]]] = {}
    violations: list[str] = []
    for a in atoms_of(f):
        if a.chi:
            uses.setdefault(a.chi, set()).add((a.count, a.rtype))
        if a.rtype not in fleet.counts:
            violations.append(f"{a}: robot type {a.rtype} not declared")
        if fleet.regions and a.region not in fleet.regions:
            violations.append(f"{a}: region {a.region} not declared")
    for chi, pairs in sorted(uses.items()):
        if len(pairs) > 1:
            violations.append(
                f"connector {chi} used with conflicting (count, type) pairs: "
                + ", ".join(map(str, sorted(pairs)))
            )
    return ValidityReport(not violations, uses, violations)


# ---------------------------------------------------------------------------
# Negation normal form


def to_nnf(f: Formula) -> Formula:
    """Push negations down to atoms (De Morgan plus the until/release duality).

    F and G are already desugared at parse time, so the result only uses
    atoms, not-over-atom, and/or, next, until, and release.
    """
    return _nnf(f, False)


def _nnf(f: Formula, neg: bool) -> Formula:
    if f.op == "true":
        return FALSE if neg else TRUE
    if f.op == "false":
        return TRUE if neg else FALSE
    if f.op == "atom":
        return not_(f) if neg else f
    if f.op == "not":
        return _nnf(f.children[0], not neg)
    if f.op == "next":
        return next_(_nnf(f.children[0], neg))
    l, r = f.children
    if f.op == "and":
        mk = or_ if neg else and_
        return mk(_nnf(l, neg), _nnf(r, neg))
    if f.op == "or":
        mk = and_ if neg else or_
        return mk(_nnf(l, neg), _nnf(r, neg))
    if f.op == "until":
        mk = release if neg else until
        return mk(_nnf(l, neg), _nnf(r, neg))
    if f.op == "release":
        mk = until if neg else release
        return mk(_nnf(l, neg), _nnf(r, neg))
    raise AssertionError(f.op)


def strip_connectors(f: Formula) -> Formula:
    """Replace every induced atom by its basic (chi = 0) counterpart."""
    if f.op == "atom":
        return atom(f.atom.basic)
    if not f.children:
        return f
    return Formula(f.op, atom=f.atom, children=tuple(strip_connectors(c) for c in f.children))
