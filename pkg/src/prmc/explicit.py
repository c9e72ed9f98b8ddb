"""Explicit-state reference checker.

Enumerates the worlds of one fixed length and evaluates the satisfaction
relation directly on sets of worlds, by structural recursion on the formula.
Exists to cross-check the automata-based evaluator; it shares no code with it
beyond word enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Tuple

from .formula import (And, Announce, AnnounceIter, AtZero, Diamond, Exists,
                      ModZero, Not, Offset, Prop, Top)
from .kripke import RegularKripke

World = Tuple[str, ...]


@dataclass(frozen=True)
class ExplicitModel:
    length: int
    worlds: FrozenSet[World]
    rel: Dict[int, FrozenSet[tuple]]   # agent -> set of (source, target) pairs
    labelling: Dict[str, frozenset]


def explicit_model(m: RegularKripke, l: int) -> ExplicitModel:
    rel: Dict[int, set] = {}
    worlds = set()
    for w in m.trans.words_of_length(l):
        src = w.track(0)
        agent = w.track(1).index("1")
        tgt = w.track(2)
        worlds.add(src)
        worlds.add(tgt)
        rel.setdefault(agent, set()).add((src, tgt))
    return ExplicitModel(l, frozenset(worlds),
                         {i: frozenset(p) for i, p in rel.items()},
                         dict(m.labelling))


def sat_set(em: ExplicitModel, f, space: FrozenSet[World],
            valuation: Dict[str, int]) -> FrozenSet[World]:
    """The worlds of `space` satisfying f under the given index valuation."""
    l = em.length
    if isinstance(f, Top):
        return space
    if isinstance(f, And):
        return sat_set(em, f.left, space, valuation) & sat_set(em, f.right, space, valuation)
    if isinstance(f, Not):
        return space - sat_set(em, f.child, space, valuation)
    if isinstance(f, Exists):
        out = set()
        for p in range(l):
            out |= sat_set(em, f.body, space, {**valuation, f.var: p})
        return frozenset(out)
    if isinstance(f, AtZero):
        return space if valuation[f.var] == 0 else frozenset()
    if isinstance(f, ModZero):
        return space if valuation[f.var] % f.k == 0 else frozenset()
    if isinstance(f, Offset):
        return space if valuation[f.var] == valuation[f.var2] + f.k else frozenset()
    if isinstance(f, Prop):
        p = valuation[f.var]
        return frozenset(s for s in space if f.name in em.labelling[s[p]])
    if isinstance(f, Diamond):
        pairs = em.rel.get(valuation[f.var], frozenset())
        body = sat_set(em, f.body, space, valuation)
        return frozenset(s for s in space
                         if any(t in body for (s2, t) in pairs if s2 == s))
    if isinstance(f, Announce):
        kept = sat_set(em, f.ann, space, valuation)
        inner = sat_set(em, f.body, kept, valuation)
        return (space - kept) | inner
    if isinstance(f, AnnounceIter) and f.count is None:
        # union over all finite iteration depths; stabilizes on a fixed length
        acc = set()
        cur = space
        while True:
            acc |= sat_set(em, f.body, cur, valuation)
            nxt = sat_set(em, f.ann, cur, valuation)
            if nxt == cur:
                break
            cur = nxt
        return frozenset((space - cur) | acc)
    raise TypeError(f"explicit checker needs a core formula, got {f!r}")


def satisfying_worlds(m: RegularKripke, core, l: int) -> FrozenSet[World]:
    """Worlds of length l satisfying a closed core formula."""
    em = explicit_model(m, l)
    return sat_set(em, core, em.worlds, {})


def is_valid_up_to(m: RegularKripke, core, max_len: int) -> bool:
    """Whether every world of every length 1..max_len satisfies the formula."""
    for l in range(1, max_len + 1):
        em = explicit_model(m, l)
        if sat_set(em, core, em.worlds, {}) != em.worlds:
            return False
    return True


def iterate_announcement(m: RegularKripke, ann_core, l: int) -> list:
    """The chain of surviving world sets under repeated announcement, to fixpoint."""
    em = explicit_model(m, l)
    chain = [em.worlds]
    while True:
        nxt = sat_set(em, ann_core, chain[-1], {})
        if nxt == chain[-1]:
            break
        chain.append(nxt)
    return chain
