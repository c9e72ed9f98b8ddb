"""NFAs over multi-track alphabets and the algebra used by the whole package.

A letter is a tuple with one component per named track; internally every letter
is interned as a single integer in a mixed-radix encoding so that product
alphabets stay O(1) to hash and combine.  Automata are immutable after
construction and every operation returns a fresh automaton.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

from .config import active
from .errors import CapacityError, LayoutError, ModelSyntaxError

BIT = ("0", "1")


class _Stats:
    """Peak automaton size seen since the last reset (for run reports)."""

    def __init__(self):
        self.peak_states = 0

    def note(self, n):
        if n > self.peak_states:
            self.peak_states = n

    def reset(self):
        self.peak_states = 0


stats = _Stats()


def _guard_states(count: int):
    if count > active().max_states:
        raise CapacityError(f"state cap exceeded ({count} > {active().max_states})")


class Track:
    """A named track: one position of the letter tuple, with a finite symbol domain."""

    __slots__ = ("name", "symbols", "_index")

    def __init__(self, name: str, symbols: Sequence):
        self.name = name
        self.symbols = tuple(symbols)
        if len(set(self.symbols)) != len(self.symbols):
            raise LayoutError(f"track {name!r} has duplicate symbols")
        self._index = {s: i for i, s in enumerate(self.symbols)}

    def index(self, symbol) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise LayoutError(f"symbol {symbol!r} not in track {self.name!r}") from None

    def __repr__(self):
        return f"{self.name}:{','.join(map(str, self.symbols))}"


def bit_track(name: str) -> Track:
    return Track(name, BIT)


class TrackLayout:
    """An ordered list of tracks; the letter set is the product of their domains."""

    __slots__ = ("tracks", "sizes", "strides", "num_letters")

    def __init__(self, tracks: Sequence[Union[Track, tuple]]):
        norm = []
        for t in tracks:
            norm.append(t if isinstance(t, Track) else Track(t[0], t[1]))
        names = [t.name for t in norm]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate track names in layout: {names}")
        self.tracks = tuple(norm)
        self.sizes = tuple(len(t.symbols) for t in norm)
        strides = [1] * len(norm)
        for i in range(len(norm) - 2, -1, -1):
            strides[i] = strides[i + 1] * self.sizes[i + 1]
        self.strides = tuple(strides)
        n = 1
        for s in self.sizes:
            n *= s
        self.num_letters = n

    @property
    def arity(self) -> int:
        return len(self.tracks)

    @property
    def names(self) -> tuple:
        return tuple(t.name for t in self.tracks)

    def encode(self, symbols: Sequence) -> int:
        if len(symbols) != self.arity:
            raise LayoutError(f"letter {symbols!r} has arity {len(symbols)}, layout has {self.arity}")
        x = 0
        for t, stride, s in zip(self.tracks, self.strides, symbols):
            x += t.index(s) * stride
        return x

    def decode(self, letter: int) -> tuple:
        return tuple(t.symbols[(letter // st) % sz]
                     for t, st, sz in zip(self.tracks, self.strides, self.sizes))

    def component_index(self, letter: int, i: int) -> int:
        return (letter // self.strides[i]) % self.sizes[i]

    def component(self, letter: int, i: int):
        return self.tracks[i].symbols[self.component_index(letter, i)]

    def track_index(self, name: str) -> int:
        for i, t in enumerate(self.tracks):
            if t.name == name:
                return i
        raise LayoutError(f"no track named {name!r}")

    def sub(self, idxs: Sequence[int]) -> "TrackLayout":
        for i in idxs:
            if not 0 <= i < self.arity:
                raise LayoutError(f"bad track index {i}")
        return TrackLayout([self.tracks[i] for i in idxs])

    def extractor(self, idxs: Sequence[int]) -> Callable[[int], int]:
        """Map a letter of this layout to the corresponding letter of self.sub(idxs)."""
        sub = self.sub(idxs)
        strides, sizes = self.strides, self.sizes
        pairs = tuple((strides[i], sizes[i], sub.strides[j]) for j, i in enumerate(idxs))

        def f(letter: int) -> int:
            x = 0
            for st, sz, out in pairs:
                x += ((letter // st) % sz) * out
            return x

        return f

    def concat(self, other: "TrackLayout") -> "TrackLayout":
        used = set()
        tracks = []
        for t in self.tracks + other.tracks:
            name = t.name
            k = 2
            while name in used:
                name = f"{t.name}{k}"
                k += 1
            used.add(name)
            tracks.append(Track(name, t.symbols))
        return TrackLayout(tracks)

    def compatible(self, other: "TrackLayout") -> bool:
        return (self.arity == other.arity
                and all(a.symbols == b.symbols for a, b in zip(self.tracks, other.tracks)))

    def require_compatible(self, other: "TrackLayout"):
        if not self.compatible(other):
            raise LayoutError(f"layout mismatch: {self.names}{[t.symbols for t in self.tracks]} "
                              f"vs {other.names}{[t.symbols for t in other.tracks]}")

    def letters(self) -> range:
        if self.num_letters > active().max_enum:
            raise CapacityError(f"alphabet of {self.num_letters} letters is over the enumeration cap")
        return range(self.num_letters)

    def __repr__(self):
        return f"TrackLayout({', '.join(map(repr, self.tracks))})"


class Word:
    """A word over a TrackLayout; letters are stored interned."""

    __slots__ = ("layout", "letters")

    def __init__(self, layout: TrackLayout, letters: Sequence[int]):
        self.layout = layout
        self.letters = tuple(letters)

    @classmethod
    def of(cls, layout: TrackLayout, rows: Sequence[Sequence]) -> "Word":
        return cls(layout, [layout.encode(r) for r in rows])

    def symbols(self) -> tuple:
        return tuple(self.layout.decode(a) for a in self.letters)

    def track(self, i: int) -> tuple:
        return tuple(self.layout.component(a, i) for a in self.letters)

    def __len__(self):
        return len(self.letters)

    def __getitem__(self, i):
        return self.layout.decode(self.letters[i])

    def __eq__(self, other):
        return (isinstance(other, Word) and self.letters == other.letters
                and self.layout.compatible(other.layout))

    def __hash__(self):
        return hash(self.letters)

    def __str__(self):
        if not self.letters:
            return "ε"
        if self.layout.arity == 1 and all(len(str(s)) == 1 for t in self.layout.tracks for s in t.symbols):
            return "".join(str(r[0]) for r in self.symbols())
        return " ".join("(" + ",".join(map(str, r)) + ")" for r in self.symbols())

    def __repr__(self):
        return f"Word({self})"


class Nfa:
    """Immutable NFA; states are 0..n-1, transitions indexed by interned letter."""

    __slots__ = ("layout", "n", "initial", "accepting", "_out")

    def __init__(self, layout: TrackLayout, n: int, initial: Iterable[int],
                 accepting: Iterable[int], transitions: Iterable[tuple]):
        self.layout = layout
        self.n = n
        self.initial = frozenset(initial)
        self.accepting = frozenset(accepting)
        out = [dict() for _ in range(n)]
        for p, a, q in transitions:
            out[p].setdefault(a, set()).add(q)
        self._out = tuple({a: tuple(sorted(ts)) for a, ts in sorted(d.items())} for d in out)
        stats.note(n)

    # ------------------------------------------------------------------ basics

    def outgoing(self, p: int) -> dict:
        return self._out[p]

    @property
    def transitions(self) -> Iterator[tuple]:
        for p, d in enumerate(self._out):
            for a, ts in d.items():
                for q in ts:
                    yield (p, a, q)

    @property
    def num_transitions(self) -> int:
        return sum(len(ts) for d in self._out for ts in d.values())

    def __repr__(self):
        return (f"<Nfa {self.n} states {self.num_transitions} transitions "
                f"over {'x'.join(self.layout.names)}>")

    def accepts_letters(self, letters: Iterable[int]) -> bool:
        cur = self.initial
        for a in letters:
            nxt = set()
            for p in cur:
                nxt.update(self._out[p].get(a, ()))
            if not nxt:
                return False
            cur = nxt
        return bool(cur & self.accepting)

    def accepts(self, word: Word) -> bool:
        self.layout.require_compatible(word.layout)
        return self.accepts_letters(word.letters)

    def is_empty(self) -> bool:
        seen = set(self.initial)
        todo = deque(seen)
        while todo:
            p = todo.popleft()
            if p in self.accepting:
                return False
            for ts in self._out[p].values():
                for q in ts:
                    if q not in seen:
                        seen.add(q)
                        todo.append(q)
        return True

    def shortest_accepted(self) -> Optional[Word]:
        """Shortest accepted word, lexicographically least by letter order."""
        return counterexample(empty_language(self.layout), self)

    # ------------------------------------------------------------ reachability

    def _reachable(self) -> set:
        seen = set(self.initial)
        todo = deque(seen)
        while todo:
            p = todo.popleft()
            for ts in self._out[p].values():
                for q in ts:
                    if q not in seen:
                        seen.add(q)
                        todo.append(q)
        return seen

    def _coreachable(self) -> set:
        rev = [[] for _ in range(self.n)]
        for p, d in enumerate(self._out):
            for ts in d.values():
                for q in ts:
                    rev[q].append(p)
        seen = set(self.accepting)
        todo = deque(seen)
        while todo:
            q = todo.popleft()
            for p in rev[q]:
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return seen

    def trim(self) -> "Nfa":
        """Drop states that are unreachable or cannot reach acceptance."""
        keep = self._reachable() & self._coreachable()
        if len(keep) == self.n:
            return self
        ids = {p: i for i, p in enumerate(sorted(keep))}
        trans = [(ids[p], a, ids[q]) for p, a, q in self.transitions
                 if p in keep and q in keep]
        return Nfa(self.layout, len(keep),
                   [ids[p] for p in self.initial if p in keep],
                   [ids[p] for p in self.accepting if p in keep], trans)

    def reverse(self) -> "Nfa":
        trans = [(q, a, p) for p, a, q in self.transitions]
        return Nfa(self.layout, self.n, self.accepting, self.initial, trans)

    # ---------------------------------------------------------------- boolean

    def union(self, other: "Nfa") -> "Nfa":
        self.layout.require_compatible(other.layout)
        off = self.n
        trans = list(self.transitions) + [(p + off, a, q + off) for p, a, q in other.transitions]
        return Nfa(self.layout, self.n + other.n,
                   set(self.initial) | {p + off for p in other.initial},
                   set(self.accepting) | {p + off for p in other.accepting}, trans)

    def intersect(self, other: "Nfa") -> "Nfa":
        self.layout.require_compatible(other.layout)
        ids = {}
        trans = []
        todo = deque()
        for p in self.initial:
            for q in other.initial:
                ids.setdefault((p, q), len(ids))
                todo.append((p, q))
        while todo:
            p, q = todo.popleft()
            src = ids[(p, q)]
            oq = other._out[q]
            for a, ts in self._out[p].items():
                us = oq.get(a)
                if not us:
                    continue
                for t in ts:
                    for u in us:
                        key = (t, u)
                        if key not in ids:
                            ids[key] = len(ids)
                            _guard_states(len(ids))
                            todo.append(key)
                        trans.append((src, a, ids[key]))
        acc = [i for (p, q), i in ids.items() if p in self.accepting and q in other.accepting]
        ini = [ids[(p, q)] for p in self.initial for q in other.initial]
        return Nfa(self.layout, len(ids), ini, acc, trans)

    def difference(self, other: "Nfa") -> "Nfa":
        """L(self) \\ L(other), determinizing `other` lazily over used letters only."""
        self.layout.require_compatible(other.layout)
        start_b = frozenset(other.initial)
        move_cache = {}

        def move(fs, a):
            key = (fs, a)
            r = move_cache.get(key)
            if r is None:
                s = set()
                for q in fs:
                    s.update(other._out[q].get(a, ()))
                r = frozenset(s)
                move_cache[key] = r
            return r

        ids = {}
        trans = []
        todo = deque()
        for p in self.initial:
            key = (p, start_b)
            if key not in ids:
                ids[key] = len(ids)
                todo.append(key)
        while todo:
            p, fs = todo.popleft()
            src = ids[(p, fs)]
            for a, ts in self._out[p].items():
                fs2 = move(fs, a)
                for t in ts:
                    key = (t, fs2)
                    if key not in ids:
                        ids[key] = len(ids)
                        _guard_states(len(ids))
                        todo.append(key)
                    trans.append((src, a, ids[key]))
        acc = [i for (p, fs), i in ids.items()
               if p in self.accepting and not (fs & other.accepting)]
        ini = [ids[(p, start_b)] for p in self.initial]
        return Nfa(self.layout, len(ids), ini, acc, trans)

    def complement(self) -> "Nfa":
        """Complement relative to all words over the layout's full letter set."""
        d = self.determinize().complete()
        return Nfa(d.layout, d.n, d.initial, set(range(d.n)) - d.accepting,
                   d.transitions)

    # --------------------------------------------------------------- rational

    def concat(self, other: "Nfa") -> "Nfa":
        self.layout.require_compatible(other.layout)
        off = self.n
        trans = list(self.transitions) + [(p + off, a, q + off) for p, a, q in other.transitions]
        # bridge: leaving an accepting state of self behaves like entering other
        for q0 in other.initial:
            for a, ts in other._out[q0].items():
                for t in ts:
                    for f in self.accepting:
                        trans.append((f, a, t + off))
        eps_self = bool(self.initial & self.accepting)
        eps_other = bool(other.initial & other.accepting)
        ini = set(self.initial) | ({p + off for p in other.initial} if eps_self else set())
        acc = {p + off for p in other.accepting} | (set(self.accepting) if eps_other else set())
        return Nfa(self.layout, self.n + other.n, ini, acc, trans)

    def star(self) -> "Nfa":
        new = self.n
        trans = list(self.transitions)
        starts = [(a, t) for q0 in self.initial for a, ts in self._out[q0].items() for t in ts]
        for a, t in starts:
            trans.append((new, a, t))
            for f in self.accepting:
                trans.append((f, a, t))
        return Nfa(self.layout, self.n + 1, {new}, set(self.accepting) | {new}, trans)

    # ----------------------------------------------------- determinism, minima

    def determinize(self) -> "Nfa":
        """Subset construction over letters that actually occur (partial DFA)."""
        start = frozenset(self.initial)
        ids = {start: 0}
        todo = deque([start])
        trans = []
        while todo:
            fs = todo.popleft()
            src = ids[fs]
            letters = {}
            for p in fs:
                for a, ts in self._out[p].items():
                    letters.setdefault(a, set()).update(ts)
            for a, s in letters.items():
                fs2 = frozenset(s)
                if fs2 not in ids:
                    ids[fs2] = len(ids)
                    _guard_states(len(ids))
                    todo.append(fs2)
                trans.append((src, a, ids[fs2]))
        acc = [i for fs, i in ids.items() if fs & self.accepting]
        return Nfa(self.layout, len(ids), {0}, acc, trans)

    def complete(self) -> "Nfa":
        """Add a sink so every state has a transition for every layout letter."""
        letters = list(self.layout.letters())
        if self.n == 0:
            sink = 0
            trans = [(sink, a, sink) for a in letters]
            return Nfa(self.layout, 1, {0}, set(), trans)
        missing = [(p, a) for p, d in enumerate(self._out) for a in letters if a not in d]
        if not missing:
            return self
        sink = self.n
        trans = list(self.transitions)
        trans.extend((p, a, sink) for p, a in missing)
        trans.extend((sink, a, sink) for a in letters)
        return Nfa(self.layout, self.n + 1, self.initial, self.accepting, trans)

    def _moore(self) -> "Nfa":
        """Partition refinement on a trim partial DFA; missing edges act as a sink."""
        if self.n == 0:
            return self
        cls = [1 if q in self.accepting else 0 for q in range(self.n)]
        ncls = len(set(cls))
        while True:
            sigs = {}
            new = [0] * self.n
            for q in range(self.n):
                sig = (cls[q], tuple(sorted((a, cls[ts[0]]) for a, ts in self._out[q].items())))
                if sig not in sigs:
                    sigs[sig] = len(sigs)
                new[q] = sigs[sig]
            stable = len(sigs) == ncls
            cls, ncls = new, len(sigs)
            if stable:
                break
        reps = {}
        for q in range(self.n):
            reps.setdefault(cls[q], q)
        trans = []
        for c, q in reps.items():
            for a, ts in self._out[q].items():
                trans.append((c, a, cls[ts[0]]))
        ini = {cls[q] for q in self.initial}
        acc = {cls[q] for q in self.accepting}
        return Nfa(self.layout, ncls, ini, acc, trans)

    def reduce(self) -> "Nfa":
        """Language-preserving canonical shrink: minimal partial DFA, no sink.

        Falls back to a plain trim when determinization would blow the state cap.
        """
        try:
            return self.determinize().trim()._moore()
        except CapacityError:
            return self.trim()

    def minimize(self) -> "Nfa":
        """The complete minimal DFA (includes an explicit sink when needed)."""
        return self.reduce().complete()

    # ---------------------------------------------------------- track algebra

    def sync(self, other: "Nfa") -> "Nfa":
        """Synchronous product: zip equal-length words into the combined layout."""
        layout = self.layout.concat(other.layout)
        nb = other.layout.num_letters
        ids = {}
        trans = []
        todo = deque()
        for p in self.initial:
            for q in other.initial:
                ids.setdefault((p, q), len(ids))
                todo.append((p, q))
        while todo:
            p, q = todo.popleft()
            src = ids[(p, q)]
            oq = other._out[q]
            for a, ts in self._out[p].items():
                base = a * nb
                for b, us in oq.items():
                    ab = base + b
                    for t in ts:
                        for u in us:
                            key = (t, u)
                            if key not in ids:
                                ids[key] = len(ids)
                                _guard_states(len(ids))
                                todo.append(key)
                            trans.append((src, ab, ids[key]))
        acc = [i for (p, q), i in ids.items() if p in self.accepting and q in other.accepting]
        ini = [ids[(p, q)] for p in self.initial for q in other.initial]
        return Nfa(layout, len(ids), ini, acc, trans)

    def map_letters(self, fn: Callable[[int], int], layout: TrackLayout) -> "Nfa":
        """Morphic image under a per-letter map (computed on used letters only)."""
        cache = {}
        trans = []
        for p, a, q in self.transitions:
            b = cache.get(a)
            if b is None:
                b = cache[a] = fn(a)
            trans.append((p, b, q))
        return Nfa(layout, self.n, self.initial, self.accepting, trans)

    def relabel(self, f, layout: TrackLayout) -> "Nfa":
        """Apply a per-letter total map given as dict or callable on symbol tuples."""
        if isinstance(f, dict):
            def fn(a):
                try:
                    return layout.encode(f[self.layout.decode(a)])
                except KeyError:
                    raise LayoutError(f"letter map not defined on {self.layout.decode(a)}") from None
        else:
            def fn(a):
                return layout.encode(f(self.layout.decode(a)))
        return self.map_letters(fn, layout)

    def project(self, keep: Sequence[int]) -> "Nfa":
        """Keep only the given tracks (a projection morphism)."""
        return self.map_letters(self.layout.extractor(tuple(keep)), self.layout.sub(keep))

    def drop(self, idxs: Sequence[int]) -> "Nfa":
        keep = [i for i in range(self.layout.arity) if i not in set(idxs)]
        return self.project(keep)

    def reorder(self, perm: Sequence[int]) -> "Nfa":
        """Reorder tracks; perm[i] is the source index of target track i."""
        return self.project(perm)

    def constrain(self, idxs: Sequence[int], pattern: "Nfa") -> "Nfa":
        """Intersect with a pattern automaton that reads only the given tracks."""
        self.layout.sub(idxs)  # validates indices
        if not self.layout.sub(idxs).compatible(pattern.layout):
            raise LayoutError("pattern layout does not match the selected tracks")
        extract = self.layout.extractor(tuple(idxs))
        cache = {}
        ids = {}
        trans = []
        todo = deque()
        for p in self.initial:
            for q in pattern.initial:
                ids.setdefault((p, q), len(ids))
                todo.append((p, q))
        while todo:
            p, q = todo.popleft()
            src = ids[(p, q)]
            oq = pattern._out[q]
            for a, ts in self._out[p].items():
                sub = cache.get(a)
                if sub is None:
                    sub = cache[a] = extract(a)
                us = oq.get(sub)
                if not us:
                    continue
                for t in ts:
                    for u in us:
                        key = (t, u)
                        if key not in ids:
                            ids[key] = len(ids)
                            _guard_states(len(ids))
                            todo.append(key)
                        trans.append((src, a, ids[key]))
        acc = [i for (p, q), i in ids.items()
               if p in self.accepting and q in pattern.accepting]
        ini = [ids[(p, q)] for p in self.initial for q in pattern.initial]
        return Nfa(self.layout, len(ids), ini, acc, trans)

    def filter_letters(self, pred: Callable[[tuple], bool]) -> "Nfa":
        """Keep only transitions whose decoded letter satisfies the predicate."""
        cache = {}
        trans = []
        for p, a, q in self.transitions:
            ok = cache.get(a)
            if ok is None:
                ok = cache[a] = bool(pred(self.layout.decode(a)))
            if ok:
                trans.append((p, a, q))
        return Nfa(self.layout, self.n, self.initial, self.accepting, trans)

    # ------------------------------------------------------------- enumeration

    def words_of_length(self, l: int) -> list:
        """Materialize L ∩ (letters)^l, in lexicographic letter order."""
        cap = active().max_enum
        # canreach[j] = states with a path of exactly j steps to acceptance
        canreach = [set(self.accepting)]
        rev = [[] for _ in range(self.n)]
        for p, a, q in self.transitions:
            rev[q].append(p)
        for _ in range(l):
            canreach.append({p for q in canreach[-1] for p in rev[q]})
        out = []
        prefix = []

        def rec(states, depth):
            if depth == l:
                if states & self.accepting:
                    if len(out) >= cap:
                        raise CapacityError(f"enumeration cap exceeded at length {l}")
                    out.append(Word(self.layout, prefix))
                return
            rem = l - depth - 1
            letters = sorted({a for p in states for a in self._out[p]})
            for a in letters:
                nxt = {t for p in states for t in self._out[p].get(a, ())} & canreach[rem]
                if nxt:
                    prefix.append(a)
                    rec(nxt, depth + 1)
                    prefix.pop()

        start = set(self.initial) & canreach[l]
        if start:
            rec(start, 0)
        return out

    # ------------------------------------------------------------------- I/O

    def to_text(self) -> str:
        def sym_str(s):
            s = str(s)
            if any(c in s for c in " ,():#") or not s:
                raise ValueError(f"symbol {s!r} cannot appear in the text format")
            return s

        lines = []
        lines.append("tracks: " + " ".join(
            f"{t.name}:{','.join(sym_str(s) for s in t.symbols)}" for t in self.layout.tracks))
        lines.append("states: " + " ".join(f"q{i}" for i in range(self.n)))
        lines.append("initial: " + " ".join(f"q{i}" for i in sorted(self.initial)))
        lines.append("accepting: " + " ".join(f"q{i}" for i in sorted(self.accepting)))
        for p, a, q in sorted(self.transitions):
            tup = ",".join(sym_str(s) for s in self.layout.decode(a))
            lines.append(f"trans: q{p} ({tup}) q{q}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Nfa":
        layout = None
        names = {}
        initial, accepting, trans_raw = [], [], []
        state_list = None

        def state_id(tok, lineno):
            if state_list is None:
                raise ModelSyntaxError("'states:' line must precede state references", lineno)
            if tok not in names:
                raise ModelSyntaxError(f"unknown state {tok!r}", lineno)
            return names[tok]

        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise ModelSyntaxError(f"expected '<keyword>: ...', got {line!r}", lineno)
            key, _, rest = line.partition(":")
            key = key.strip()
            rest = rest.strip()
            if key == "tracks":
                tracks = []
                for spec in rest.split():
                    if ":" not in spec:
                        raise ModelSyntaxError(f"bad track spec {spec!r}", lineno)
                    name, _, syms = spec.partition(":")
                    tracks.append(Track(name, syms.split(",")))
                layout = TrackLayout(tracks)
            elif key == "states":
                state_list = rest.split()
                names = {s: i for i, s in enumerate(state_list)}
                if len(names) != len(state_list):
                    raise ModelSyntaxError("duplicate state names", lineno)
            elif key == "initial":
                initial = [state_id(t, lineno) for t in rest.split()]
            elif key == "accepting":
                accepting = [state_id(t, lineno) for t in rest.split()]
            elif key == "trans":
                parts = rest.split()
                if len(parts) != 3 or not (parts[1].startswith("(") and parts[1].endswith(")")):
                    raise ModelSyntaxError(f"bad transition {rest!r}", lineno)
                if layout is None:
                    raise ModelSyntaxError("'tracks:' line must precede transitions", lineno)
                syms = parts[1][1:-1].split(",")
                try:
                    letter = layout.encode(syms)
                except LayoutError as e:
                    raise ModelSyntaxError(str(e), lineno) from None
                trans_raw.append((state_id(parts[0], lineno), letter, state_id(parts[2], lineno)))
            else:
                raise ModelSyntaxError(f"unknown keyword {key!r}", lineno)
        if layout is None:
            raise ModelSyntaxError("missing 'tracks:' line")
        n = len(state_list or [])
        return cls(layout, n, initial, accepting, trans_raw)

    def to_dot(self, name: str = "nfa") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;", '  node [shape=circle];']
        for q in sorted(self.accepting):
            lines.append(f'  q{q} [shape=doublecircle];')
        for i, q in enumerate(sorted(self.initial)):
            lines.append(f'  __start{i} [shape=none label=""];')
            lines.append(f'  __start{i} -> q{q};')
        by_edge = {}
        for p, a, q in self.transitions:
            by_edge.setdefault((p, q), []).append(a)
        for (p, q), letters in sorted(by_edge.items()):
            label = "\\n".join(",".join(map(str, self.layout.decode(a))) for a in sorted(letters))
            lines.append(f'  q{p} -> q{q} [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# ------------------------------------------------------------- constructions


def empty_language(layout: TrackLayout) -> Nfa:
    return Nfa(layout, 0, (), (), ())


def epsilon(layout: TrackLayout) -> Nfa:
    return Nfa(layout, 1, {0}, {0}, ())


def universe(layout: TrackLayout) -> Nfa:
    """All words over the layout's full letter set."""
    return Nfa(layout, 1, {0}, {0}, [(0, a, 0) for a in layout.letters()])


def from_word_set(layout: TrackLayout, words: Iterable) -> Nfa:
    """Trie acceptor for a finite set of words (Word objects or letter tuples)."""
    root = 0
    nodes = [dict()]
    accepting = set()
    for w in words:
        letters = w.letters if isinstance(w, Word) else tuple(w)
        cur = root
        for a in letters:
            nxt = nodes[cur].get(a)
            if nxt is None:
                nxt = len(nodes)
                nodes.append(dict())
                _guard_states(len(nodes))
                nodes[cur][a] = nxt
            cur = nxt
        accepting.add(cur)
    trans = [(p, a, q) for p, d in enumerate(nodes) for a, q in d.items()]
    return Nfa(layout, len(nodes), {root}, accepting, trans)


def length_filter(layout: TrackLayout, l: int) -> Nfa:
    """Exactly the words of length l (over the full letter set)."""
    letters = list(layout.letters())
    trans = [(i, a, i + 1) for i in range(l) for a in letters]
    return Nfa(layout, l + 1, {0}, {l}, trans)


# ------------------------------------------------------------------ patterns
#
# Small automata over bit sub-layouts, for use with Nfa.constrain.

_BIT1 = TrackLayout([bit_track("b")])
_BIT2 = TrackLayout([bit_track("b1"), bit_track("b2")])


def pattern_exactly_one() -> Nfa:
    """0*10* on a single bit track (a position encoding)."""
    z, o = 0, 1
    return Nfa(_BIT1, 2, {0}, {1}, [(0, z, 0), (0, o, 1), (1, z, 1)])


def pattern_at_zero() -> Nfa:
    """10* on a single bit track."""
    z, o = 0, 1
    return Nfa(_BIT1, 2, {0}, {1}, [(0, o, 1), (1, z, 1)])


def pattern_mod_zero(k: int) -> Nfa:
    """(0^k)*10* on a single bit track: the 1 sits at a position divisible by k."""
    if k < 1:
        raise LayoutError("mod_zero needs k >= 1")
    z, o = 0, 1
    acc = k
    trans = [(i, z, (i + 1) % k) for i in range(k)]
    trans += [(0, o, acc), (acc, z, acc)]
    return Nfa(_BIT1, k + 1, {0}, {acc}, trans)


def pattern_offset(k: int) -> Nfa:
    """Two bit tracks spelling positions i and j with i = j + k."""
    if k < 0:
        raise LayoutError("offset needs k >= 0")
    def enc(b1, b2):
        return b1 * 2 + b2
    if k == 0:
        return Nfa(_BIT2, 2, {0}, {1},
                   [(0, enc(0, 0), 0), (0, enc(1, 1), 1), (1, enc(0, 0), 1)])
    # (0,0)* (0,1) (0,0)^{k-1} (1,0) (0,0)*   -- j comes first, i is k later
    trans = [(0, enc(0, 0), 0)]
    trans.append((0, enc(0, 1), 1))
    for i in range(1, k):
        trans.append((i, enc(0, 0), i + 1))
    trans.append((k, enc(1, 0), k + 1))
    trans.append((k + 1, enc(0, 0), k + 1))
    return Nfa(_BIT2, k + 2, {0}, {k + 1}, trans)


def track_constraint(layout: TrackLayout, kind: str, *args) -> Nfa:
    """Materialized constraint automata over a full layout.

    kinds: equal(i,j), exactly_one(i), at_zero(i), offset(i,j,k), mod_zero(i,k).
    Bit-track kinds require the referenced tracks to carry symbols '0','1'.
    """
    def require_bit(i):
        if not 0 <= i < layout.arity:
            raise LayoutError(f"bad track index {i}")
        if layout.tracks[i].symbols != BIT:
            raise LayoutError(f"track {layout.tracks[i].name!r} is not a bit track")

    if kind == "equal":
        i, j = args
        layout.sub([i, j])
        return universe(layout).filter_letters(lambda t: t[i] == t[j])
    if kind == "exactly_one":
        (i,) = args
        require_bit(i)
        return universe(layout).constrain((i,), pattern_exactly_one())
    if kind == "at_zero":
        (i,) = args
        require_bit(i)
        return universe(layout).constrain((i,), pattern_at_zero())
    if kind == "mod_zero":
        i, k = args
        require_bit(i)
        return universe(layout).constrain((i,), pattern_mod_zero(k))
    if kind == "offset":
        i, j, k = args
        require_bit(i)
        require_bit(j)
        return universe(layout).constrain((i, j), pattern_offset(k))
    raise LayoutError(f"unknown constraint kind {kind!r}")


def attach_bit_tracks(nfa: Nfa, inserts: Sequence[tuple]) -> Nfa:
    """Product with fresh 0*10* bit tracks.

    `inserts` lists (position, name) pairs, positions referring to the final
    layout and strictly increasing.  Each new track spells a position encoding.
    """
    if not inserts:
        return nfa
    positions = [p for p, _ in inserts]
    tracks = list(nfa.layout.tracks)
    for pos, name in inserts:
        tracks.insert(pos, bit_track(name))
    layout = TrackLayout(tracks)
    r = len(inserts)
    old_arity = nfa.layout.arity
    posset = set(positions)
    posidx = {p: i for i, p in enumerate(positions)}
    lettermap = {}

    def combined(a, bits):
        key = (a, bits)
        v = lettermap.get(key)
        if v is None:
            old = nfa.layout.decode(a)
            row = []
            oi = 0
            for idx in range(old_arity + r):
                if idx in posset:
                    row.append(BIT[bits[posidx[idx]]])
                else:
                    row.append(old[oi])
                    oi += 1
            v = lettermap[key] = layout.encode(row)
        return v

    ids = {}
    trans = []
    todo = deque()
    for p in nfa.initial:
        key = (p, (0,) * r)
        ids.setdefault(key, len(ids))
        todo.append(key)
    while todo:
        p, phases = todo.popleft()
        src = ids[(p, phases)]
        for a, ts in nfa._out[p].items():
            # each fresh track emits 0 before and after its single 1
            choices = [(0, 1) if ph == 0 else (0,) for ph in phases]
            for bits in _product_bits(choices):
                new_phases = tuple(ph or b for ph, b in zip(phases, bits))
                letter = combined(a, bits)
                for t in ts:
                    key = (t, new_phases)
                    if key not in ids:
                        ids[key] = len(ids)
                        _guard_states(len(ids))
                        todo.append(key)
                    trans.append((src, letter, ids[key]))
    full = (1,) * r
    acc = [i for (p, phases), i in ids.items() if p in nfa.accepting and phases == full]
    ini = [ids[(p, (0,) * r)] for p in nfa.initial]
    return Nfa(layout, len(ids), ini, acc, trans)


def _product_bits(choices):
    if not choices:
        yield ()
        return
    for b in choices[0]:
        for rest in _product_bits(choices[1:]):
            yield (b,) + rest


# ------------------------------------------------------------- equivalence


def counterexample(a: Nfa, b: Nfa) -> Optional[Word]:
    """Shortest word in the symmetric difference (lexicographic tie-break), or None."""
    a.layout.require_compatible(b.layout)

    def move(nfa, fs, letter):
        s = set()
        for p in fs:
            s.update(nfa._out[p].get(letter, ()))
        return frozenset(s)

    def differs(fa, fb):
        return bool(fa & a.accepting) != bool(fb & b.accepting)

    start = (frozenset(a.initial), frozenset(b.initial))
    if differs(*start):
        return Word(a.layout, ())
    seen = {start}
    queue = deque([(start, ())])
    while queue:
        (fa, fb), word = queue.popleft()
        letters = sorted({x for p in fa for x in a._out[p]} | {x for q in fb for x in b._out[q]})
        for letter in letters:
            nxt = (move(a, fa, letter), move(b, fb, letter))
            if nxt in seen:
                continue
            w2 = word + (letter,)
            if differs(*nxt):
                return Word(a.layout, w2)
            seen.add(nxt)
            _guard_states(len(seen))
            queue.append((nxt, w2))
    return None


def equivalent(a: Nfa, b: Nfa) -> bool:
    return counterexample(a, b) is None


def contains(a: Nfa, b: Nfa) -> Optional[Word]:
    """Shortest witness of L(b) ⊄ L(a), or None when L(b) ⊆ L(a)."""
    return b.difference(a).shortest_accepted()


# ----------------------------------------------------------------- relations


def _require_relation(r: Nfa):
    if r.layout.arity != 2:
        raise LayoutError("relation operations need a two-track layout")


def compose(r: Nfa, s: Nfa) -> Nfa:
    """{(x,z) | exists y: (x,y) in r and (y,z) in s} on two-track layouts."""
    _require_relation(r)
    _require_relation(s)
    if r.layout.tracks[1].symbols != s.layout.tracks[0].symbols:
        raise LayoutError("inner tracks of composed relations do not match")
    layout = TrackLayout([r.layout.tracks[0], s.layout.tracks[1]])
    ny = r.layout.sizes[1]
    nz = s.layout.sizes[1]
    # index s-edges by (state, inner symbol index)
    s_by = [dict() for _ in range(s.n)]
    for q, d in enumerate(s._out):
        for b, us in d.items():
            y = b // nz
            s_by[q].setdefault(y, []).append((b % nz, us))
    ids = {}
    trans = []
    todo = deque()
    for p in r.initial:
        for q in s.initial:
            ids.setdefault((p, q), len(ids))
            todo.append((p, q))
    while todo:
        p, q = todo.popleft()
        src = ids[(p, q)]
        for a, ts in r._out[p].items():
            x, y = divmod(a, ny)
            for z, us in s_by[q].get(y, ()):
                letter = x * nz + z
                for t in ts:
                    for u in us:
                        key = (t, u)
                        if key not in ids:
                            ids[key] = len(ids)
                            _guard_states(len(ids))
                            todo.append(key)
                        trans.append((src, letter, ids[key]))
    acc = [i for (p, q), i in ids.items() if p in r.accepting and q in s.accepting]
    ini = [ids[(p, q)] for p in r.initial for q in s.initial]
    return Nfa(layout, len(ids), ini, acc, trans)


def inverse(r: Nfa) -> Nfa:
    """Swap the two tracks of a relation."""
    _require_relation(r)
    layout = TrackLayout([r.layout.tracks[1], r.layout.tracks[0]])
    ny = r.layout.sizes[1]
    nx = r.layout.sizes[0]

    def fn(a):
        x, y = divmod(a, ny)
        return y * nx + x

    return r.map_letters(fn, layout)


def identity_relation(s: Nfa, pair_layout: TrackLayout) -> Nfa:
    """{(w,w) | w in L(s)} as a relation over pair_layout (both tracks = s's track)."""
    if s.layout.arity != 1:
        raise LayoutError("identity_relation expects a one-track language")
    nz = pair_layout.sizes[1]

    def fn(a):
        return a * nz + a

    return s.map_letters(fn, pair_layout)
