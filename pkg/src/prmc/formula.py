"""Concrete syntax, desugaring and static analysis of announcement-logic formulas.

Grammar (prefix operators bind tighter than '&' except quantifiers, whose body
extends as far to the right as possible):

    f ::= 'true' | 'false' | f '&' f | f '|' f | '!' f | f '->' f | f '<->' f
        | 'E' v ':' f | 'A' v ':' f | t '=' t | t '!=' t | v '%' n '=' '0'
        | p '_' t | '<' t '>' f | 'K' t f
        | '[!' f ']' f | '[!' f ']^' n f | '[!' f ']*' f | '[!!' f ']' f
    t ::= v | n | v '+' n
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .errors import FormulaError, UnsupportedStar


def _posfield():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Term:
    var: Optional[str]  # None for a plain constant
    k: int = 0

    def __str__(self):
        if self.var is None:
            return str(self.k)
        return self.var if self.k == 0 else f"{self.var}+{self.k}"


@dataclass(frozen=True)
class Formula:
    pass


# ----- core nodes (what the evaluator understands)

@dataclass(frozen=True)
class Top(Formula):
    pos: object = _posfield()


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class Not(Formula):
    child: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class AtZero(Formula):
    var: str
    pos: object = _posfield()


@dataclass(frozen=True)
class ModZero(Formula):
    var: str
    k: int
    pos: object = _posfield()


@dataclass(frozen=True)
class Offset(Formula):
    """var = var2 + k (k >= 0)."""
    var: str
    var2: str
    k: int
    pos: object = _posfield()


@dataclass(frozen=True)
class Prop(Formula):
    name: str
    var: str
    pos: object = _posfield()


@dataclass(frozen=True)
class Diamond(Formula):
    var: str
    body: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class Announce(Formula):
    ann: Formula
    body: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class AnnounceIter(Formula):
    """[ann !]^count body; count None means unbounded iteration (star)."""
    ann: Formula
    body: Formula
    count: Optional[int]
    pos: object = _posfield()


# ----- sugar nodes (eliminated by desugar)

@dataclass(frozen=True)
class Bottom(Formula):
    pos: object = _posfield()


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class Know(Formula):
    term: Term
    body: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class DiamondT(Formula):
    term: Term
    body: Formula
    pos: object = _posfield()


@dataclass(frozen=True)
class PropT(Formula):
    name: str
    term: Term
    pos: object = _posfield()


@dataclass(frozen=True)
class Cmp(Formula):
    """t1 = t2, or its negation when negated is set."""
    t1: Term
    t2: Term
    negated: bool = False
    pos: object = _posfield()


@dataclass(frozen=True)
class AnnounceBoth(Formula):
    """[!!a]b: truthful announcement, sugar for a & [!a]b."""
    ann: Formula
    body: Formula
    pos: object = _posfield()


# --------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<name>[A-Za-z][A-Za-z0-9]*)
  | (?P<int>\d+)
  | (?P<op><->|->|!=|\[!!|\[!|[()\[\]<>!&|:=%+*^_])
""", re.VERBOSE)

_KEYWORDS = {"true", "false", "E", "A", "K"}


def _tokenize(text: str):
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise FormulaError(f"unexpected character {text[i]!r}", i)
        i = m.end()
        if m.lastgroup == "ws":
            continue
        tokens.append((m.lastgroup, m.group(), m.start()))
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, val, pos = self.next()
        if val != value:
            raise FormulaError(f"expected {value!r}, got {val!r}", pos)
        return pos

    def at(self, value):
        return self.peek()[1] == value

    # term := NAME ('+' INT)? | INT
    def term(self) -> Term:
        kind, val, pos = self.next()
        if kind == "int":
            return Term(None, int(val))
        if kind != "name" or val in _KEYWORDS:
            raise FormulaError(f"expected an index term, got {val!r}", pos)
        if self.at("+"):
            self.next()
            kind2, val2, pos2 = self.next()
            if kind2 != "int":
                raise FormulaError("only 'variable + constant' terms are supported", pos2)
            return Term(val, int(val2))
        return Term(val, 0)

    def formula(self) -> Formula:
        return self.iff()

    def iff(self) -> Formula:
        f = self.imp()
        while self.at("<->"):
            pos = self.next()[2]
            f = Iff(f, self.imp(), pos=pos)
        return f

    def imp(self) -> Formula:
        f = self.disj()
        if self.at("->"):
            pos = self.next()[2]
            return Implies(f, self.imp(), pos=pos)
        return f

    def disj(self) -> Formula:
        f = self.conj()
        while self.at("|"):
            pos = self.next()[2]
            f = Or(f, self.conj(), pos=pos)
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.at("&"):
            pos = self.next()[2]
            f = And(f, self.unary(), pos=pos)
        return f

    def unary(self) -> Formula:
        kind, val, pos = self.peek()
        if val == "!":
            self.next()
            return Not(self.unary(), pos=pos)
        if val == "K":
            self.next()
            return Know(self.term(), self.unary(), pos=pos)
        if val == "<":
            self.next()
            t = self.term()
            self.expect(">")
            return DiamondT(t, self.unary(), pos=pos)
        if val in ("[!", "[!!"):
            self.next()
            ann = self.formula()
            self.expect("]")
            if val == "[!!":
                return AnnounceBoth(ann, self.unary(), pos=pos)
            if self.at("^"):
                self.next()
                kind2, val2, pos2 = self.next()
                if kind2 != "int":
                    raise FormulaError("expected a repetition count after '^'", pos2)
                return AnnounceIter(ann, self.unary(), int(val2), pos=pos)
            if self.at("*"):
                self.next()
                return AnnounceIter(ann, self.unary(), None, pos=pos)
            return Announce(ann, self.unary(), pos=pos)
        if val in ("E", "A"):
            self.next()
            kind2, var, pos2 = self.next()
            if kind2 != "name" or var in _KEYWORDS:
                raise FormulaError(f"expected a variable after {val!r}", pos2)
            self.expect(":")
            body = self.formula()
            return (Exists if val == "E" else Forall)(var, body, pos=pos)
        return self.atom()

    def atom(self) -> Formula:
        kind, val, pos = self.peek()
        if val == "true":
            self.next()
            return Top(pos=pos)
        if val == "false":
            self.next()
            return Bottom(pos=pos)
        if val == "(":
            self.next()
            f = self.formula()
            self.expect(")")
            return f
        if kind == "name" and val not in _KEYWORDS:
            # p_t, v%k=0, or a comparison starting with a variable
            nxt = self.tokens[self.i + 1][1]
            if nxt == "_":
                self.next()
                self.next()
                return PropT(val, self.term(), pos=pos)
            if nxt == "%":
                self.next()
                self.next()
                kind2, val2, pos2 = self.next()
                if kind2 != "int" or int(val2) < 1:
                    raise FormulaError("modulus must be a positive constant", pos2)
                self.expect("=")
                kind3, val3, pos3 = self.next()
                if val3 != "0":
                    raise FormulaError("only '% k = 0' constraints are supported", pos3)
                return ModZero(val, int(val2), pos=pos)
        if kind in ("name", "int"):
            t1 = self.term()
            if self.at("!="):
                self.next()
                return Cmp(t1, self.term(), negated=True, pos=pos)
            self.expect("=")
            return Cmp(t1, self.term(), pos=pos)
        raise FormulaError(f"unexpected token {val!r}", pos)


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    kind, val, pos = p.peek()
    if kind != "eof":
        raise FormulaError(f"trailing input {val!r}", pos)
    return f


# ----------------------------------------------------------------- printing


def to_str(f: Formula) -> str:
    def par(g):
        s = to_str(g)
        return s if isinstance(g, (Top, Bottom, Prop, PropT, AtZero, ModZero,
                                   Offset, Cmp, Not, Diamond, DiamondT, Know)) else f"({s})"

    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, And):
        return f"{par(f.left)} & {par(f.right)}"
    if isinstance(f, Or):
        return f"{par(f.left)} | {par(f.right)}"
    if isinstance(f, Implies):
        return f"{par(f.left)} -> {par(f.right)}"
    if isinstance(f, Iff):
        return f"{par(f.left)} <-> {par(f.right)}"
    if isinstance(f, Not):
        return f"!{par(f.child)}"
    if isinstance(f, Exists):
        return f"E {f.var}: {to_str(f.body)}"
    if isinstance(f, Forall):
        return f"A {f.var}: {to_str(f.body)}"
    if isinstance(f, AtZero):
        return f"{f.var} = 0"
    if isinstance(f, ModZero):
        return f"{f.var}%{f.k} = 0"
    if isinstance(f, Offset):
        return f"{f.var} = {f.var2}+{f.k}" if f.k else f"{f.var} = {f.var2}"
    if isinstance(f, Cmp):
        return f"{f.t1} {'!=' if f.negated else '='} {f.t2}"
    if isinstance(f, Prop):
        return f"{f.name}_{f.var}"
    if isinstance(f, PropT):
        return f"{f.name}_{f.term}"
    if isinstance(f, Diamond):
        return f"<{f.var}> {par(f.body)}"
    if isinstance(f, DiamondT):
        return f"<{f.term}> {par(f.body)}"
    if isinstance(f, Know):
        return f"K {f.term} {par(f.body)}"
    if isinstance(f, Announce):
        return f"[! {to_str(f.ann)} ] {par(f.body)}"
    if isinstance(f, AnnounceBoth):
        return f"[!! {to_str(f.ann)} ] {par(f.body)}"
    if isinstance(f, AnnounceIter):
        power = "*" if f.count is None else f"^{f.count}"
        return f"[! {to_str(f.ann)} ]{power} {par(f.body)}"
    raise TypeError(f"not a formula node: {f!r}")


# ------------------------------------------------------------- substitution


def substitute_agents(f: Formula, aliases: dict) -> Formula:
    """Replace free variables named in `aliases` by their constant index.

    Applied before desugaring so that model-declared agent names like b=2 can
    appear in formulas as if they were variables.
    """
    def sub_term(t: Term, bound):
        if t.var is not None and t.var not in bound and t.var in aliases:
            return Term(None, aliases[t.var] + t.k)
        return t

    def walk(g: Formula, bound: frozenset) -> Formula:
        if isinstance(g, (Top, Bottom)):
            return g
        if isinstance(g, (And, Or, Implies, Iff)):
            return replace(g, left=walk(g.left, bound), right=walk(g.right, bound))
        if isinstance(g, Not):
            return replace(g, child=walk(g.child, bound))
        if isinstance(g, (Exists, Forall)):
            return replace(g, body=walk(g.body, bound | {g.var}))
        if isinstance(g, (Know, DiamondT)):
            return replace(g, term=sub_term(g.term, bound), body=walk(g.body, bound))
        if isinstance(g, Diamond):
            if g.var not in bound and g.var in aliases:
                return DiamondT(Term(None, aliases[g.var]), walk(g.body, bound), pos=g.pos)
            return replace(g, body=walk(g.body, bound))
        if isinstance(g, PropT):
            return replace(g, term=sub_term(g.term, bound))
        if isinstance(g, Prop):
            if g.var not in bound and g.var in aliases:
                return PropT(g.name, Term(None, aliases[g.var]), pos=g.pos)
            return g
        if isinstance(g, Cmp):
            return replace(g, t1=sub_term(g.t1, bound), t2=sub_term(g.t2, bound))
        if isinstance(g, (AtZero, ModZero, Offset)):
            return g  # already core; core vars are never aliases
        if isinstance(g, (Announce, AnnounceBoth)):
            return replace(g, ann=walk(g.ann, bound), body=walk(g.body, bound))
        if isinstance(g, AnnounceIter):
            return replace(g, ann=walk(g.ann, bound), body=walk(g.body, bound))
        raise TypeError(f"not a formula node: {g!r}")

    return walk(f, frozenset())


# ---------------------------------------------------------------- desugaring


class _Fresh:
    def __init__(self, used):
        self.used = set(used)
        self.counter = 0

    def __call__(self, hint="u"):
        while True:
            name = f"{hint}{self.counter}"
            self.counter += 1
            if name not in self.used:
                self.used.add(name)
                return name


def _all_names(f: Formula) -> set:
    names = set()

    def walk(g):
        for attr in ("var", "var2"):
            v = getattr(g, attr, None)
            if isinstance(v, str):
                names.add(v)
        for attr in ("term", "t1", "t2"):
            t = getattr(g, attr, None)
            if isinstance(t, Term) and t.var is not None:
                names.add(t.var)
        for attr in ("left", "right", "child", "body", "ann"):
            c = getattr(g, attr, None)
            if isinstance(c, Formula):
                walk(c)

    walk(f)
    return names


def desugar(f: Formula) -> Formula:
    """Reduce to the core connectives; idempotent on core formulas."""
    fresh = _Fresh(_all_names(f))

    def var_equals_const(v: str, c: int) -> Formula:
        if c == 0:
            return AtZero(v)
        j = fresh("j")
        return Exists(j, And(AtZero(j), Offset(v, j, c)))

    def eq(t1: Term, t2: Term) -> Formula:
        if t1.var is None and t2.var is None:
            return Top() if t1.k == t2.k else Not(Top())
        if t1.var is None:
            t1, t2 = t2, t1
        if t2.var is None:
            c = t2.k - t1.k
            return Not(Top()) if c < 0 else var_equals_const(t1.var, c)
        if t1.k > t2.k:
            return Offset(t2.var, t1.var, t1.k - t2.k)
        if t1.k < t2.k:
            return Offset(t1.var, t2.var, t2.k - t1.k)
        return Offset(t1.var, t2.var, 0)

    def with_var(t: Term, make) -> Formula:
        """Route a term through a fresh variable unless it already is one."""
        if t.var is not None and t.k == 0:
            return make(t.var)
        x = fresh("x")
        return Exists(x, And(eq(Term(x), t), make(x)))

    def walk(g: Formula) -> Formula:
        if isinstance(g, Top):
            return g
        if isinstance(g, Bottom):
            return Not(Top())
        if isinstance(g, And):
            return And(walk(g.left), walk(g.right))
        if isinstance(g, Or):
            return Not(And(Not(walk(g.left)), Not(walk(g.right))))
        if isinstance(g, Implies):
            return Not(And(walk(g.left), Not(walk(g.right))))
        if isinstance(g, Iff):
            l, r = walk(g.left), walk(g.right)
            return And(Not(And(l, Not(r))), Not(And(r, Not(l))))
        if isinstance(g, Not):
            return Not(walk(g.child))
        if isinstance(g, Exists):
            return Exists(g.var, walk(g.body))
        if isinstance(g, Forall):
            return Not(Exists(g.var, Not(walk(g.body))))
        if isinstance(g, (AtZero, ModZero, Offset, Prop)):
            return g
        if isinstance(g, Cmp):
            core = eq(g.t1, g.t2)
            return Not(core) if g.negated else core
        if isinstance(g, PropT):
            return with_var(g.term, lambda v: Prop(g.name, v))
        if isinstance(g, Diamond):
            return Diamond(g.var, walk(g.body))
        if isinstance(g, DiamondT):
            body = walk(g.body)
            return with_var(g.term, lambda v: Diamond(v, body))
        if isinstance(g, Know):
            body = walk(g.body)
            return Not(with_var(g.term, lambda v: Diamond(v, Not(body))))
        if isinstance(g, Announce):
            return Announce(walk(g.ann), walk(g.body))
        if isinstance(g, AnnounceBoth):
            ann = walk(g.ann)
            return And(ann, Announce(ann, walk(g.body)))
        if isinstance(g, AnnounceIter):
            ann, body = walk(g.ann), walk(g.body)
            if g.count is None:
                return AnnounceIter(ann, body, None)
            out = body
            for _ in range(g.count):
                out = Announce(ann, out)
            return out
        raise TypeError(f"not a formula node: {g!r}")

    return walk(f)


# ------------------------------------------------------------------ analysis


@dataclass(frozen=True)
class Analysis:
    formula: Formula            # core, bound variables globally unique
    vars: tuple                 # every variable, in order of first appearance
    free: frozenset
    star_free: bool

    @property
    def closed(self) -> bool:
        return not self.free


def free_vars(f: Formula) -> frozenset:
    if isinstance(f, Top):
        return frozenset()
    if isinstance(f, And):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, Not):
        return free_vars(f.child)
    if isinstance(f, Exists):
        return free_vars(f.body) - {f.var}
    if isinstance(f, AtZero):
        return frozenset({f.var})
    if isinstance(f, ModZero):
        return frozenset({f.var})
    if isinstance(f, Offset):
        return frozenset({f.var, f.var2})
    if isinstance(f, Prop):
        return frozenset({f.var})
    if isinstance(f, Diamond):
        return free_vars(f.body) | {f.var}
    if isinstance(f, (Announce, AnnounceIter)):
        return free_vars(f.ann) | free_vars(f.body)
    raise TypeError(f"analysis requires a core formula, got {f!r}")


def _has_star(f: Formula) -> bool:
    if isinstance(f, AnnounceIter) and f.count is None:
        return True
    for attr in ("left", "right", "child", "body", "ann"):
        c = getattr(f, attr, None)
        if isinstance(c, Formula) and _has_star(c):
            return True
    return False


def analyze(f: Formula) -> Analysis:
    """Alpha-rename bound variables to unique names and collect variable data.

    Iterated announcements are only supported when the whole star node is
    closed and the announced formula is star-free; violations raise
    UnsupportedStar.
    """
    fresh = _Fresh(set())
    order = []

    def note(name):
        if name not in order:
            order.append(name)
        return name

    def pick(name, env):
        new = name if name not in fresh.used else fresh(name)
        fresh.used.add(new)
        return new

    def walk(g: Formula, env: dict) -> Formula:
        if isinstance(g, Top):
            return g
        if isinstance(g, And):
            return And(walk(g.left, env), walk(g.right, env))
        if isinstance(g, Not):
            return Not(walk(g.child, env))
        if isinstance(g, Exists):
            new = pick(g.var, env)
            note(new)
            return Exists(new, walk(g.body, {**env, g.var: new}))
        if isinstance(g, AtZero):
            return AtZero(note(env.get(g.var, g.var)))
        if isinstance(g, ModZero):
            return ModZero(note(env.get(g.var, g.var)), g.k)
        if isinstance(g, Offset):
            return Offset(note(env.get(g.var, g.var)), note(env.get(g.var2, g.var2)), g.k)
        if isinstance(g, Prop):
            return Prop(g.name, note(env.get(g.var, g.var)))
        if isinstance(g, Diamond):
            return Diamond(note(env.get(g.var, g.var)), walk(g.body, env))
        if isinstance(g, Announce):
            return Announce(walk(g.ann, env), walk(g.body, env))
        if isinstance(g, AnnounceIter):
            assert g.count is None  # finite powers were unrolled by desugar
            ann = walk(g.ann, env)
            body = walk(g.body, env)
            if free_vars(ann) or free_vars(body):
                raise UnsupportedStar("iterated announcements must be closed formulas")
            if _has_star(ann):
                raise UnsupportedStar("the announced formula of an iteration must be star-free")
            return AnnounceIter(ann, body, None)
        raise TypeError(f"analysis requires a core formula, got {g!r}")

    renamed = walk(f, {})
    free = free_vars(renamed)
    for v in sorted(free):
        note(v)
    return Analysis(renamed, tuple(order), free, not _has_star(renamed))


def parse_and_analyze(text: str, aliases: Optional[dict] = None) -> Analysis:
    f = parse_formula(text)
    if aliases:
        f = substitute_agents(f, aliases)
    return analyze(desugar(f))
