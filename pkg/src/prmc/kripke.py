"""Regular Kripke structures: models whose states are words and whose
indistinguishability relation is a length-preserving transducer over
(source, observer-position bit, target) triples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import automata as A
from .automata import Nfa, Track, TrackLayout, Word
from .errors import LayoutError, ModelSyntaxError, ValidationError

OBS = ("0", "1")


def state_layout(alphabet: Sequence[str]) -> TrackLayout:
    return TrackLayout([Track("s", alphabet)])


def trans_layout(alphabet: Sequence[str]) -> TrackLayout:
    return TrackLayout([Track("src", alphabet), Track("obs", OBS), Track("tgt", alphabet)])


@dataclass
class S5Report:
    reflexive: bool
    symmetric: bool
    transitive: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return self.reflexive and self.symmetric and self.transitive


class RegularKripke:
    """A model: alphabet, per-letter proposition labelling, and the transducer.

    The labelling is positional: the propositions of agent i in state s are the
    propositions of the letter s[i].
    """

    def __init__(self, alphabet: Sequence, labelling: dict, trans: Nfa,
                 agents: Optional[dict] = None):
        self.alphabet = tuple(alphabet)
        self.labelling = {a: frozenset(labelling.get(a, ())) for a in self.alphabet}
        self.trans = trans
        self.agents = dict(agents or {})
        expected = trans_layout(self.alphabet)
        if not trans.layout.compatible(expected):
            raise LayoutError("transducer layout must be (src, obs, tgt) over the model alphabet")
        self.state_layout = state_layout(self.alphabet)

    @property
    def propositions(self) -> frozenset:
        out = set()
        for props in self.labelling.values():
            out |= props
        return frozenset(out)

    def __repr__(self):
        return f"<RegularKripke |Σ|={len(self.alphabet)} trans={self.trans.n} states>"

    # ------------------------------------------------------------- structure

    def state_space(self) -> Nfa:
        return self.trans.project([0]).reduce()

    def with_trans(self, trans: Nfa) -> "RegularKripke":
        return RegularKripke(self.alphabet, self.labelling, trans, self.agents)

    def restrict(self, keep: Nfa) -> "RegularKripke":
        """Keep only transitions whose source and target words lie in `keep`."""
        if not keep.layout.compatible(self.state_layout):
            raise LayoutError("restriction language must be over the state alphabet")
        t = self.trans.constrain([0], keep).constrain([2], keep).trim()
        return self.with_trans(t)

    def extend_context(self, ctx_symbols: Sequence, constraint: Nfa) -> "ContextKripke":
        """A context-indexed family: the slice at context word c is this model
        restricted to the states s with (s, c) in the constraint."""
        ctx_track = Track("ctx", ctx_symbols)
        expected = TrackLayout([Track("s", self.alphabet), ctx_track])
        if not constraint.layout.compatible(expected):
            raise LayoutError("context constraint must be over (state, ctx) tracks")
        ctx_universe = A.universe(TrackLayout([ctx_track]))
        t4 = self.trans.sync(ctx_universe)
        t4 = t4.constrain([0, 3], constraint).constrain([2, 3], constraint).trim()
        return ContextKripke(self, tuple(ctx_symbols), t4)

    # ------------------------------------------------------------ validation

    def _reflexive_witness(self) -> Optional[Word]:
        s = self.state_space()
        bit = TrackLayout([A.bit_track("obs")])
        pairs = s.sync(A.track_constraint(bit, "exactly_one", 0))
        refl = pairs.relabel(lambda t: (t[0], t[1], t[0]), self.trans.layout)
        return refl.difference(self.trans).shortest_accepted()

    def _obs_shape_witness(self) -> Optional[Word]:
        bad = self.trans.constrain([1], A.pattern_exactly_one().complement())
        return bad.shortest_accepted()

    def validate(self) -> None:
        w = self._obs_shape_witness()
        if w is not None:
            raise ValidationError("obs-shape", "an accepted word's obs track is not 0*10*", w)
        w = self._reflexive_witness()
        if w is not None:
            raise ValidationError("reflexivity", "missing self-loop s ~_i s", w)

    def check_s5(self) -> S5Report:
        witnesses = {}
        w = self._reflexive_witness()
        reflexive = w is None
        if w is not None:
            witnesses["reflexive"] = w
        swapped = self.trans.reorder([2, 1, 0])
        w = A.counterexample(self.trans, swapped)
        symmetric = w is None
        if w is not None:
            witnesses["symmetric"] = w
        comp = _compose_agented(self.trans)
        w = comp.difference(self.trans).shortest_accepted()
        transitive = w is None
        if w is not None:
            witnesses["transitive"] = w
        return S5Report(reflexive, symmetric, transitive, witnesses)

    # ------------------------------------------------------------------- I/O

    def to_text(self) -> str:
        lines = ["alphabet: " + " ".join(map(str, self.alphabet))]
        props = "; ".join(f"{a} = {{{','.join(sorted(self.labelling[a]))}}}" for a in self.alphabet)
        lines.append("props: " + props)
        if self.agents:
            lines.append("agents: " + " ".join(f"{k}={v}" for k, v in sorted(self.agents.items())))
        lines.append("transducer:")
        lines.append(self.trans.to_text().rstrip("\n"))
        return "\n".join(lines) + "\n"


def _compose_agented(trans: Nfa) -> Nfa:
    """{s (x) v (x) u | exists t: (s,v,t) and (t,v,u) accepted}: same-agent join."""
    layout = trans.layout
    n_tgt = layout.sizes[2]
    # index edges by (state, (src component, obs component))
    by_head = [dict() for _ in range(trans.n)]
    for q, d in enumerate(trans._out):
        for a, us in d.items():
            src_i = layout.component_index(a, 0)
            obs_i = layout.component_index(a, 1)
            tgt_i = layout.component_index(a, 2)
            by_head[q].setdefault((src_i, obs_i), []).append((tgt_i, us))
    from collections import deque
    ids = {}
    todo = deque()
    trans_out = []
    for p in trans.initial:
        for q in trans.initial:
            ids.setdefault((p, q), len(ids))
            todo.append((p, q))
    while todo:
        p, q = todo.popleft()
        src_id = ids[(p, q)]
        for a, ts in trans._out[p].items():
            s_i = layout.component_index(a, 0)
            o_i = layout.component_index(a, 1)
            t_i = layout.component_index(a, 2)
            for u_i, us in by_head[q].get((t_i, o_i), ()):
                letter = (s_i * 2 + o_i) * n_tgt + u_i
                for t in ts:
                    for u in us:
                        key = (t, u)
                        if key not in ids:
                            ids[key] = len(ids)
                            todo.append(key)
                        trans_out.append((src_id, letter, ids[key]))
    acc = [i for (p, q), i in ids.items()
           if p in trans.accepting and q in trans.accepting]
    ini = [ids[(p, q)] for p in trans.initial for q in trans.initial]
    return Nfa(layout, len(ids), ini, acc, trans_out)


class ContextKripke:
    """A context-indexed family of Kripke structures sharing one transducer.

    The transducer runs over (src, obs, tgt, ctx); for every fixed context word
    c, the slice {w | w (x) c accepted} is a regular Kripke transducer.
    """

    def __init__(self, base: RegularKripke, ctx_symbols: tuple, trans: Nfa):
        self.base = base
        self.ctx_symbols = tuple(ctx_symbols)
        self.trans = trans
        expected = TrackLayout([Track("src", base.alphabet), Track("obs", OBS),
                                Track("tgt", base.alphabet), Track("ctx", self.ctx_symbols)])
        if not trans.layout.compatible(expected):
            raise LayoutError("context transducer layout must be (src, obs, tgt, ctx)")

    def __repr__(self):
        return f"<ContextKripke |Σ'|={len(self.ctx_symbols)} trans={self.trans.n} states>"

    def state_space(self) -> Nfa:
        return self.trans.project([0, 3]).reduce()

    def restrict(self, keep: Nfa) -> "ContextKripke":
        """keep is over (state, ctx); both endpoints of every transition must lie in it."""
        t = self.trans.constrain([0, 3], keep).constrain([2, 3], keep).trim()
        return ContextKripke(self.base, self.ctx_symbols, t)

    def slice_at(self, ctx_word: Word) -> RegularKripke:
        """The member model at one concrete context word."""
        ctx_layout = TrackLayout([Track("ctx", self.ctx_symbols)])
        single = A.from_word_set(ctx_layout, [ctx_word])
        t = self.trans.constrain([3], single)
        return self.base.with_trans(t.drop([3]).trim())

    def to_pair_model(self) -> RegularKripke:
        """Fold the context into the state letters, giving a plain model over
        pair symbols (state letter, context letter)."""
        pairs = [(a, c) for a in self.base.alphabet for c in self.ctx_symbols]
        labelling = {(a, c): self.base.labelling[a] for (a, c) in pairs}
        layout = trans_layout(pairs)
        t = self.trans.relabel(lambda t4: ((t4[0], t4[3]), t4[1], (t4[2], t4[3])), layout)
        return RegularKripke(pairs, labelling, t, self.base.agents)


# ----------------------------------------------------------------- documents


def parse_model(text: str) -> RegularKripke:
    """Parse and eagerly validate a model document."""
    alphabet = None
    labelling = {}
    agents = {}
    lines = text.splitlines()
    trans_at = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        key, rest = key.strip(), rest.strip()
        if key == "alphabet":
            alphabet = tuple(rest.split())
            if not alphabet:
                raise ModelSyntaxError("empty alphabet", lineno)
        elif key == "props":
            for item in rest.split(";"):
                item = item.strip()
                if not item:
                    continue
                if "=" not in item:
                    raise ModelSyntaxError(f"bad props entry {item!r}", lineno)
                sym, _, val = item.partition("=")
                sym, val = sym.strip(), val.strip()
                if not (val.startswith("{") and val.endswith("}")):
                    raise ModelSyntaxError(f"bad proposition set {val!r}", lineno)
                props = [p.strip() for p in val[1:-1].split(",") if p.strip()]
                labelling[sym] = frozenset(props)
        elif key == "agents":
            for item in rest.split():
                name, _, idx = item.partition("=")
                try:
                    agents[name] = int(idx)
                except ValueError:
                    raise ModelSyntaxError(f"bad agent alias {item!r}", lineno) from None
        elif key == "transducer":
            trans_at = lineno
            break
        else:
            raise ModelSyntaxError(f"unknown keyword {key!r}", lineno)
    if alphabet is None:
        raise ModelSyntaxError("missing 'alphabet:' line")
    if trans_at is None:
        raise ModelSyntaxError("missing 'transducer:' block")
    for sym in labelling:
        if sym not in alphabet:
            raise ModelSyntaxError(f"props declared for unknown letter {sym!r}")
    trans = Nfa.from_text("\n".join(lines[trans_at:]))
    model = RegularKripke(alphabet, labelling, trans, agents)
    model.validate()
    return model
