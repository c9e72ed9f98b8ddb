"""The automata-based evaluator: compiles a formula against a model into the
regular set of satisfying (state, valuation) words.

Valuation tracks are scoped: a quantified variable owns one position-encoding
bit track from its binder down to its leaves, and the track is projected away
when the quantifier closes.  Satisfaction sets over scope (x1..xk) run over
the layout (state, x1, .., xk); transducers over (src, obs, tgt[, x1..xk]).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

from collections import deque

from . import automata as A
from .automata import Nfa, Track, TrackLayout, Word
from .config import active
from .errors import FormulaError, LayoutError, UnsupportedStar
from .formula import (Analysis, And, Announce, AnnounceIter, AtZero, Diamond,
                      Exists, ModZero, Not, Offset, Prop, Top, analyze,
                      desugar, free_vars, parse_formula, substitute_agents)
from .kripke import RegularKripke


class SatSet:
    """A regular set of state words zipped with position encodings of the
    in-scope variables; layout (s, x1, .., xk)."""

    __slots__ = ("model", "scope", "nfa")

    def __init__(self, model: RegularKripke, scope: tuple, nfa: Nfa):
        self.model = model
        self.scope = scope
        self.nfa = nfa

    def var_pos(self, var: str) -> int:
        return 1 + self.scope.index(var)

    def states(self) -> Nfa:
        """Project away all valuation tracks."""
        if not self.scope:
            return self.nfa
        return self.nfa.project([0]).reduce()

    def __repr__(self):
        return f"<SatSet scope={self.scope} {self.nfa.n} states>"


class ExtTransducer:
    """A model transducer extended with the in-scope valuation tracks.

    The bit tracks are materialized only after an announcement made under
    non-empty scope (the restriction then depends on the valuation); before
    that the transducer stays three-track and the valuation constraints live
    in the satisfaction sets alone.
    """

    __slots__ = ("model", "scope", "base", "tracked")

    def __init__(self, model: RegularKripke, scope: tuple, base: Nfa, tracked: bool):
        self.model = model
        self.scope = scope
        self.base = base
        self.tracked = tracked and bool(scope)

    @property
    def nfa(self) -> Nfa:
        """The transducer over the full (src, obs, tgt, x1..xk) layout."""
        if self.tracked or not self.scope:
            return self.base
        inserts = [(3 + i, v) for i, v in enumerate(self.scope)]
        return A.attach_bit_tracks(self.base, inserts)

    def __repr__(self):
        return f"<ExtTransducer scope={self.scope} tracked={self.tracked} {self.base.n} states>"


def _sat_layout(model: RegularKripke, scope: tuple) -> TrackLayout:
    return TrackLayout([Track("s", model.alphabet)] + [A.bit_track(v) for v in scope])


def _ordered(scope: tuple) -> tuple:
    """Apply the configured variable-order override to a scope tuple."""
    order = active().var_order
    if not order:
        return scope
    rank = {v: i for i, v in enumerate(order)}
    return tuple(sorted(scope, key=lambda v: (rank.get(v, len(order)), scope.index(v))))


def init_extended(model: RegularKripke, scope: tuple = ()) -> ExtTransducer:
    return ExtTransducer(model, _ordered(tuple(scope)), model.trans, tracked=False)


@dataclass
class CheckResult:
    valid: bool
    counterexamples: Optional[Nfa] = None
    witness: Optional[Word] = None
    peak_states: int = 0

    def __bool__(self):
        return self.valid


class Evaluator:
    """Evaluates core formulas bottom-up; caches satisfaction sets and
    announcement transducers per (formula node, transducer) identity."""

    def __init__(self, debug_dir: Optional[str] = None):
        self._sat_cache = {}
        self._top_cache = {}
        self._announce_cache = {}
        self._keepalive = []     # caches key on id(); pin everything we key on
        self._dump_count = 0
        self.debug_dir = debug_dir

    # ------------------------------------------------------------- plumbing

    def _dump(self, tag: str, nfa: Nfa):
        if self.debug_dir is None:
            return
        os.makedirs(self.debug_dir, exist_ok=True)
        path = os.path.join(self.debug_dir, f"{self._dump_count:03d}_{tag}.dot")
        self._dump_count += 1
        with open(path, "w") as fh:
            fh.write(nfa.to_dot(tag))

    def top(self, t: ExtTransducer) -> SatSet:
        """The satisfaction set of the trivially true formula: every state of
        the transducer zipped with every admissible valuation."""
        hit = self._top_cache.get(id(t))
        if hit is not None:
            return hit
        k = len(t.scope)
        if t.tracked:
            nfa = t.base.project([0] + [3 + i for i in range(k)]).reduce()
        else:
            states = t.base.project([0]).reduce()
            inserts = [(1 + i, v) for i, v in enumerate(t.scope)]
            nfa = A.attach_bit_tracks(states, inserts)
        out = SatSet(t.model, t.scope, nfa)
        self._top_cache[id(t)] = out
        self._keepalive.append(t)
        return out

    def _extend_scope(self, t: ExtTransducer, var: str) -> ExtTransducer:
        scope = _ordered(t.scope + (var,))
        if not t.tracked:
            return ExtTransducer(t.model, scope, t.base, tracked=False)
        pos = 3 + scope.index(var)
        base = A.attach_bit_tracks(t.base, [(pos, var)])
        return ExtTransducer(t.model, scope, base, tracked=True)

    # ------------------------------------------------------------ evaluation

    def evaluate(self, f, t: ExtTransducer) -> SatSet:
        key = (id(f), id(t))
        hit = self._sat_cache.get(key)
        if hit is not None:
            return hit
        out = self._eval(f, t)
        self._sat_cache[key] = out
        self._keepalive.append((f, t))
        self._dump(type(f).__name__, out.nfa)
        return out

    def _eval(self, f, t: ExtTransducer) -> SatSet:
        model, scope = t.model, t.scope
        if isinstance(f, Top):
            return self.top(t)
        if isinstance(f, And):
            l = self.evaluate(f.left, t)
            r = self.evaluate(f.right, t)
            return SatSet(model, scope, l.nfa.intersect(r.nfa).trim())
        if isinstance(f, Not):
            child = self.evaluate(f.child, t)
            return SatSet(model, scope, self.top(t).nfa.difference(child.nfa).reduce())
        if isinstance(f, Exists):
            t2 = self._extend_scope(t, f.var)
            body = self.evaluate(f.body, t2)
            pos = body.var_pos(f.var)
            return SatSet(model, scope, body.nfa.drop([pos]).trim())
        if isinstance(f, AtZero):
            top = self.top(t)
            return SatSet(model, scope,
                          top.nfa.constrain([top.var_pos(f.var)], A.pattern_at_zero()))
        if isinstance(f, ModZero):
            top = self.top(t)
            return SatSet(model, scope,
                          top.nfa.constrain([top.var_pos(f.var)], A.pattern_mod_zero(f.k)))
        if isinstance(f, Offset):
            top = self.top(t)
            return SatSet(model, scope,
                          top.nfa.constrain([top.var_pos(f.var), top.var_pos(f.var2)],
                                            A.pattern_offset(f.k)))
        if isinstance(f, Prop):
            if f.name not in model.propositions:
                raise FormulaError(f"unknown proposition {f.name!r} for this model")
            top = self.top(t)
            pat = _prop_pattern(model, f.name)
            return SatSet(model, scope,
                          top.nfa.constrain([0, top.var_pos(f.var)], pat))
        if isinstance(f, Diamond):
            body = self.evaluate(f.body, t)
            return SatSet(model, scope, _diamond(t, body, f.var).trim())
        if isinstance(f, Announce):
            not_ann = self.evaluate(Not(f.ann), t)
            t2 = self.announce(t, f.ann)
            inner = self.evaluate(f.body, t2)
            return SatSet(model, scope, not_ann.nfa.union(inner.nfa).reduce())
        if isinstance(f, AnnounceIter):
            if f.count is not None:
                raise FormulaError("finite announcement powers should have been desugared")
            if scope or t.tracked:
                raise UnsupportedStar("iterated announcement under quantifier scope")
            from .disappearance import star_sat
            current = model.with_trans(t.base)
            return star_sat(f.body, current, f.ann, evaluator=self)
        raise TypeError(f"evaluator needs a core formula, got {f!r}")

    # ---------------------------------------------------------- announcement

    def announce(self, t: ExtTransducer, ann) -> ExtTransducer:
        """The transducer of the model after publicly announcing `ann`:
        both endpoints must satisfy the announcement under the same valuation."""
        key = (id(t), id(ann))
        hit = self._announce_cache.get(key)
        if hit is not None:
            return hit
        sat = self.evaluate(ann, t)
        nfa = _announce_product(t, sat).reduce()
        out = ExtTransducer(t.model, t.scope, nfa, tracked=True)
        self._announce_cache[key] = out
        self._dump("announce", nfa)
        return out


def _prop_pattern(model: RegularKripke, prop: str) -> Nfa:
    """A*BA* over (state letter, variable bit): B carries the proposition at
    the flagged position, other positions are unconstrained."""
    layout = TrackLayout([Track("s", model.alphabet), A.bit_track("x")])
    trans = []
    for i, sym in enumerate(model.alphabet):
        off = layout.encode((sym, "0"))
        trans.append((0, off, 0))
        trans.append((1, off, 1))
        if prop in model.labelling[sym]:
            trans.append((0, layout.encode((sym, "1")), 1))
    return Nfa(layout, 2, {0}, {1}, trans)


def _diamond(t: ExtTransducer, body: SatSet, var: str) -> Nfa:
    """pi(T ∩ obs-matches-var ∩ target-satisfies-body), keeping (src, vars)."""
    base = t.base
    k = len(t.scope)
    vstride = body.nfa.layout.strides[0]        # 2^k
    tlay = base.layout
    vpos_in_bits = body.var_pos(var) - 1        # index among the bit tracks
    bit_stride = body.nfa.layout.strides[1 + vpos_in_bits]

    # index body edges by (state, state component)
    by_state = [dict() for _ in range(body.nfa.n)]
    for q, d in enumerate(body.nfa._out):
        for b, us in d.items():
            by_state[q].setdefault(b // vstride, []).append((b, us))

    tracked = t.tracked
    ids = {}
    trans = []
    todo = deque()
    for p in base.initial:
        for q in body.nfa.initial:
            key = (p, q, 0)
            ids.setdefault(key, len(ids))
            todo.append(key)
    while todo:
        p, q, phase = todo.popleft()
        src = ids[(p, q, phase)]
        for a, ts in base._out[p].items():
            s_i = tlay.component_index(a, 0)
            o_i = tlay.component_index(a, 1)
            t_i = tlay.component_index(a, 2)
            if tracked:
                tbits = a % vstride
            for b, us in by_state[q].get(t_i, ()):
                bits = b % vstride
                if tracked and bits != tbits:
                    continue
                v_i = (bits // bit_stride) % 2
                if o_i != v_i:
                    continue
                if phase == 0:
                    nphase = 1 if o_i == 1 else 0
                elif o_i == 1:
                    continue
                else:
                    nphase = 1
                out_letter = s_i * vstride + bits
                for tt in ts:
                    for u in us:
                        key = (tt, u, nphase)
                        if key not in ids:
                            ids[key] = len(ids)
                            todo.append(key)
                        trans.append((src, out_letter, ids[key]))
    acc = [i for (p, q, phase), i in ids.items()
           if p in base.accepting and q in body.nfa.accepting and phase == 1]
    ini = [ids[k] for k in ids if k[2] == 0 and k[0] in base.initial and k[1] in body.nfa.initial]
    return Nfa(body.nfa.layout, len(ids), ini, acc, trans)


def _announce_product(t: ExtTransducer, sat: SatSet) -> Nfa:
    """T ∩ {source side in sat} ∩ {target side in sat}, same valuation on both."""
    base = t.base
    k = len(t.scope)
    vstride = sat.nfa.layout.strides[0]
    tlay = base.layout
    n_tgt = tlay.sizes[2]

    by_state = [dict() for _ in range(sat.nfa.n)]
    for q, d in enumerate(sat.nfa._out):
        for b, us in d.items():
            by_state[q].setdefault(b // vstride, []).append((b % vstride, us))

    out_layout = TrackLayout(list(tlay.tracks[:3]) + [A.bit_track(v) for v in t.scope])
    tracked = t.tracked
    ids = {}
    trans = []
    todo = deque()
    for p in base.initial:
        for q1 in sat.nfa.initial:
            for q2 in sat.nfa.initial:
                key = (p, q1, q2)
                ids.setdefault(key, len(ids))
                todo.append(key)
    while todo:
        p, q1, q2 = todo.popleft()
        src = ids[(p, q1, q2)]
        for a, ts in base._out[p].items():
            s_i = tlay.component_index(a, 0)
            o_i = tlay.component_index(a, 1)
            t_i = tlay.component_index(a, 2)
            if tracked:
                tbits = a % vstride
                triple = a // vstride
            else:
                triple = a
            for bits1, us1 in by_state[q1].get(s_i, ()):
                if tracked and bits1 != tbits:
                    continue
                for bits2, us2 in by_state[q2].get(t_i, ()):
                    if bits2 != bits1:
                        continue
                    letter = triple * vstride + bits1 if k else a
                    for tt in ts:
                        for u1 in us1:
                            for u2 in us2:
                                key = (tt, u1, u2)
                                if key not in ids:
                                    ids[key] = len(ids)
                                    todo.append(key)
                                trans.append((src, letter, ids[key]))
    acc = [i for (p, q1, q2), i in ids.items()
           if p in base.accepting and q1 in sat.nfa.accepting and q2 in sat.nfa.accepting]
    ini = [i for (p, q1, q2), i in ids.items()
           if p in base.initial and q1 in sat.nfa.initial and q2 in sat.nfa.initial]
    return Nfa(out_layout, len(ids), ini, acc, trans)


# ------------------------------------------------------------------ fronts


def evaluate(f, t: ExtTransducer, evaluator: Optional[Evaluator] = None) -> SatSet:
    ev = evaluator or Evaluator()
    missing = free_vars(f) - set(t.scope)
    if missing:
        raise FormulaError(f"free variables {sorted(missing)} not in transducer scope")
    return ev.evaluate(f, t)


def announce(t: ExtTransducer, ann, evaluator: Optional[Evaluator] = None) -> ExtTransducer:
    ev = evaluator or Evaluator()
    return ev.announce(t, ann)


def announce_model(model: RegularKripke, analysis: Analysis,
                   evaluator: Optional[Evaluator] = None) -> RegularKripke:
    """Model-level announcement: restrict the model to the satisfying states."""
    if not analysis.closed:
        raise FormulaError("announcements applied to a model must be closed")
    ev = evaluator or Evaluator()
    sat = ev.evaluate(analysis.formula, init_extended(model))
    return model.restrict(sat.states().reduce())


def check_valid(model: RegularKripke, analysis: Analysis,
                debug_dir: Optional[str] = None) -> CheckResult:
    """Model-check a closed formula: valid iff no state falsifies it."""
    if not analysis.closed:
        raise FormulaError("model checking needs a closed formula")
    A.stats.reset()
    ev = Evaluator(debug_dir=debug_dir)
    t0 = init_extended(model)
    neg = ev.evaluate(Not(analysis.formula), t0)
    bad = neg.states().reduce()
    if bad.is_empty():
        return CheckResult(True, peak_states=A.stats.peak_states)
    return CheckResult(False, counterexamples=bad, witness=bad.shortest_accepted(),
                       peak_states=A.stats.peak_states)


def check_text(model: RegularKripke, text: str, **kw) -> CheckResult:
    f = parse_formula(text)
    if model.agents:
        f = substitute_agents(f, model.agents)
    return check_valid(model, analyze(desugar(f)), **kw)
