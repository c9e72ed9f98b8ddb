import itertools

import hypothesis
import pytest

from prmc.automata import Nfa, Track, TrackLayout, Word

hypothesis.settings.register_profile("fast", max_examples=25)
hypothesis.settings.load_profile("fast")

# Single-track alphabet {m, c} used throughout the muddy fixtures.
SIGMA = TrackLayout([Track("s", ("m", "c"))])
M, C = 0, 1  # interned letters of SIGMA

# The muddy transducer layout (src, obs, tgt).
TRANS = TrackLayout([Track("src", ("m", "c")), Track("obs", ("0", "1")), Track("tgt", ("m", "c"))])


def letter(*syms):
    return TRANS.encode(syms)


def fig3_nfa() -> Nfa:
    """The 2-state muddy-children transducer: loop on equal letters, one obs jump."""
    loops0 = [(0, letter(a, "0", a), 0) for a in "mc"]
    jumps = [(0, letter(a, "1", b), 1) for a in "mc" for b in "mc"]
    loops1 = [(1, letter(a, "0", a), 1) for a in "mc"]
    return Nfa(TRANS, 2, {0}, {1}, loops0 + jumps + loops1)


@pytest.fixture
def fig3():
    return fig3_nfa()


def sigma_word(s: str) -> Word:
    return Word(SIGMA, [{"m": M, "c": C}[ch] for ch in s])


def m_count_at_least(k: int) -> Nfa:
    """Σ*(mΣ*)^k: words over {m,c} with at least k occurrences of m."""
    trans = [(i, C, i) for i in range(k + 1)]
    trans += [(i, M, i + 1) for i in range(k)]
    trans.append((k, M, k))
    return Nfa(SIGMA, k + 1, {0}, {k}, trans)


def muddy_model():
    from prmc.kripke import parse_model
    import importlib.resources as res
    text = (res.files("prmc") / "models" / "muddy.kripke").read_text()
    return parse_model(text)


@pytest.fixture
def muddy():
    return muddy_model()


def all_letter_tuples(layout, length):
    return itertools.product(range(layout.num_letters), repeat=length)


def brute_language(nfa, max_len):
    """Membership-checked language up to max_len, as a set of letter tuples."""
    out = set()
    for l in range(max_len + 1):
        for w in all_letter_tuples(nfa.layout, l):
            if nfa.accepts_letters(w):
                out.add(w)
    return out
