import itertools

import pytest
from hypothesis import given, strategies as st

import prmc.automata as A
from prmc.automata import Nfa, Track, TrackLayout, Word, counterexample, equivalent
from prmc.config import override
from prmc.errors import CapacityError, LayoutError

from conftest import (C, M, SIGMA, TRANS, all_letter_tuples, brute_language,
                      fig3_nfa, sigma_word)


# ------------------------------------------------------ building blocks


def one_letter(layout, a):
    return Nfa(layout, 2, {0}, {1}, [(0, a, 1)])


def sigma_star():
    return A.universe(SIGMA)


def sigma_star_m_sigma_star():
    # words containing at least one m
    return Nfa(SIGMA, 2, {0}, {1}, [(0, M, 0), (0, C, 0), (0, M, 1), (1, M, 1), (1, C, 1)])


def c_star():
    return Nfa(SIGMA, 1, {0}, {0}, [(0, C, 0)])


# ------------------------------------------------------------ boolean ops


def test_complement_is_involution_on_fig3():
    t = fig3_nfa()
    back = t.complement().complement()
    assert equivalent(t, back)


def test_intersect_containment_example():
    # Σ*mΣ* ∩ Σ*c accepts "mc", rejects "cc"
    ends_c = Nfa(SIGMA, 2, {0}, {1}, [(0, M, 0), (0, C, 0), (0, C, 1)])
    got = sigma_star_m_sigma_star().intersect(ends_c)
    assert got.accepts(sigma_word("mc"))
    assert not got.accepts(sigma_word("cc"))


def test_difference_matches_set_oracle():
    # expected values computed by the brute-force set oracle, not by the library
    diff = sigma_star().difference(sigma_star_m_sigma_star())
    expect = brute_language(sigma_star(), 4) - brute_language(sigma_star_m_sigma_star(), 4)
    got = {w for w in brute_language(A.universe(SIGMA), 4) if diff.accepts_letters(w)}
    assert got == expect
    # and the closed form: c*
    assert equivalent(diff, c_star())


def test_complement_agreement_up_to_len4(fig3):
    comp = fig3.complement()
    for l in range(5):
        for w in all_letter_tuples(TRANS, l):
            assert comp.accepts_letters(w) != fig3.accepts_letters(w)


def test_union_and_layout_mismatch():
    u = c_star().union(sigma_star_m_sigma_star())
    assert equivalent(u, sigma_star())
    other = TrackLayout([Track("x", ("a", "b", "c"))])
    with pytest.raises(LayoutError):
        c_star().union(A.universe(other))


# ------------------------------------------------------------ rational ops


def test_star_of_empty_is_epsilon():
    got = A.empty_language(SIGMA).star()
    assert equivalent(got, A.epsilon(SIGMA))


def test_concat_against_enumeration_oracle():
    # Σ*m . (Σ*m)*  vs brute-force concatenation of the two languages
    ends_m = Nfa(SIGMA, 2, {0}, {1}, [(0, M, 0), (0, C, 0), (0, M, 1)])
    lhs = ends_m.concat(ends_m.star())
    left = brute_language(ends_m, 5)
    right = brute_language(ends_m.star(), 5)
    expect = {u + v for u in left for v in right if len(u) + len(v) <= 5}
    got = {w for l in range(6) for w in all_letter_tuples(SIGMA, l) if lhs.accepts_letters(w)}
    assert got == expect


def test_repeated_m_family_constructions_agree():
    # Σ*(mΣ*)^2 built two ways
    m_sig_star = one_letter(SIGMA, M).concat(sigma_star())
    built = sigma_star().concat(m_sig_star.concat(m_sig_star))
    direct = Nfa(SIGMA, 3, {0}, {2}, [
        (0, M, 0), (0, C, 0), (0, M, 1),
        (1, M, 1), (1, C, 1), (1, M, 2),
        (2, M, 2), (2, C, 2),
    ])
    assert equivalent(built, direct)


# ------------------------------------------------- determinize / minimize


def test_minimize_fig3_has_three_states(fig3):
    m = fig3.minimize()
    assert m.n == 3  # the two control states plus one sink
    assert equivalent(m, fig3)
    assert m.minimize().n == 3


def test_minimize_empty_with_junk_states():
    junk = Nfa(SIGMA, 5, {0}, set(), [(0, M, 1), (1, C, 2)])
    m = junk.minimize()
    assert m.n == 1
    assert not m.accepting
    assert m.is_empty()


@st.composite
def random_nfas(draw):
    n = draw(st.integers(1, 4))
    trans = draw(st.lists(
        st.tuples(st.integers(0, n - 1), st.integers(0, 1), st.integers(0, n - 1)),
        max_size=12))
    accepting = draw(st.sets(st.integers(0, n - 1), max_size=n))
    return Nfa(SIGMA, n, {0}, accepting, trans)


@given(random_nfas())
def test_minimize_idempotent_and_language_preserving(nfa):
    m = nfa.minimize()
    assert equivalent(nfa, m)
    assert m.minimize().n == m.n


# ------------------------------------------------------------- equivalence


def test_equivalent_reflexive(fig3):
    assert equivalent(fig3, fig3)


def test_counterexample_is_shortest_lex():
    cex = counterexample(sigma_star(), sigma_star_m_sigma_star())
    # brute-force: shortest word in the symmetric difference is the empty word
    sym = brute_language(sigma_star(), 3) ^ brute_language(sigma_star_m_sigma_star(), 3)
    shortest = min(sym, key=lambda w: (len(w), w))
    assert cex is not None and cex.letters == shortest == ()


def test_counterexample_none_for_equal():
    a = sigma_star_m_sigma_star()
    assert counterexample(a, a.minimize()) is None


# ------------------------------------------------------------ sync product


def test_sync_product_fig3_word(fig3):
    s = A.universe(SIGMA)
    v = A.track_constraint(TrackLayout([A.bit_track("v")]), "exactly_one", 0)
    prod = s.sync(v).sync(s)
    w = Word.of(prod.layout, [("c", "0", "c"), ("c", "0", "c"), ("m", "1", "c")])
    assert prod.accepts(w)  # the observation ccm ~_2 ccc, modulo track order
    assert fig3.accepts(Word.of(TRANS, [("c", "0", "c"), ("c", "0", "c"), ("m", "1", "c")]))


def test_sync_with_empty_is_empty(fig3):
    assert fig3.sync(A.empty_language(SIGMA)).is_empty()


def test_sync_then_project_recovers_length_filtered():
    a = sigma_star_m_sigma_star()
    b = one_letter(SIGMA, C)  # only length-1 words
    back = a.sync(b).project([0])
    expect = {w for w in brute_language(a, 4) if len(w) == 1}
    got = brute_language(back, 4)
    assert got == expect


# ----------------------------------------------------------------- project


def test_projection_of_fig3_source_is_nonempty_words(fig3):
    s = fig3.project([0])
    sigma_plus = one_letter(SIGMA, M).union(one_letter(SIGMA, C)).concat(sigma_star())
    assert equivalent(s, sigma_plus)


def test_identity_relabel_keeps_language(fig3):
    same = fig3.relabel(lambda t: t, TRANS)
    assert equivalent(same, fig3)


def test_reorder_twice_is_identity(fig3):
    swapped = fig3.reorder([2, 1, 0])
    back = swapped.reorder([2, 1, 0])
    assert equivalent(back, fig3)


def test_relabel_dict_must_cover_used_letters(fig3):
    with pytest.raises(LayoutError):
        fig3.relabel({("m", "0", "m"): ("m", "0", "m")}, TRANS)


# --------------------------------------------------------- track constraints


BITS2 = TrackLayout([A.bit_track("i"), A.bit_track("j")])
BITS1 = TrackLayout([A.bit_track("i")])


def bits2_word(s1, s2):
    return Word.of(BITS2, list(zip(s1, s2)))


def test_offset_zero_alignment():
    zero = A.track_constraint(BITS2, "offset", 0, 1, 0)
    assert zero.accepts(bits2_word("010", "010"))
    assert not zero.accepts(bits2_word("10", "01"))


def test_offset_matches_arithmetic_oracle():
    for k in (0, 1, 2):
        nfa = A.track_constraint(BITS2, "offset", 0, 1, k)
        for l in range(5):
            for w in all_letter_tuples(BITS2, l):
                i_track = [BITS2.component_index(a, 0) for a in w]
                j_track = [BITS2.component_index(a, 1) for a in w]
                ok = (i_track.count(1) == 1 and j_track.count(1) == 1
                      and i_track.index(1) == j_track.index(1) + k)
                assert nfa.accepts_letters(w) == ok, (k, w)


def test_exactly_one_examples():
    nfa = A.track_constraint(BITS1, "exactly_one", 0)
    assert nfa.accepts(Word.of(BITS1, [("0",), ("1",), ("0",)]))
    assert not nfa.accepts(Word.of(BITS1, [("0",), ("1",), ("1",)]))
    assert not nfa.accepts(Word.of(BITS1, [("0",), ("0",), ("0",)]))


def test_mod_zero_positions():
    nfa = A.track_constraint(BITS1, "mod_zero", 0, 3)
    ok = Word.of(BITS1, [("0",)] * 3 + [("1",)] + [("0",)] * 2)   # 1 at position 3
    bad = Word.of(BITS1, [("0",)] * 2 + [("1",)] + [("0",)] * 3)  # 1 at position 2
    assert nfa.accepts(ok)
    assert not nfa.accepts(bad)


def test_exactly_one_and_at_zero_is_10star():
    both = A.track_constraint(BITS1, "exactly_one", 0).intersect(
        A.track_constraint(BITS1, "at_zero", 0))
    ten = Nfa(BITS1, 2, {0}, {1}, [(0, 1, 1), (1, 0, 1)])
    assert equivalent(both, ten)


def test_bad_track_index():
    with pytest.raises(LayoutError):
        A.track_constraint(BITS1, "exactly_one", 3)


# -------------------------------------------------------------- enumeration


def test_enumerate_exact_sets():
    got = {w.letters for w in sigma_star_m_sigma_star().words_of_length(2)}
    expect = {w for w in all_letter_tuples(SIGMA, 2)
              if sigma_star_m_sigma_star().accepts_letters(w)}
    assert got == expect == {(M, M), (M, C), (C, M)}


def test_enumerate_length_zero():
    assert sigma_star().words_of_length(0) == [Word(SIGMA, ())]
    assert sigma_star_m_sigma_star().words_of_length(0) == []


def test_enumerate_counts_universe():
    for l in range(6):
        assert len(sigma_star().words_of_length(l)) == 2 ** l


def test_enumeration_cap():
    with override(max_enum=3):
        with pytest.raises(CapacityError):
            sigma_star().words_of_length(4)


# ---------------------------------------------------------------- relations


REL = TrackLayout([Track("x", ("m", "c")), Track("y", ("m", "c"))])


def rel_from_pairs(pairs):
    """pairs: iterable of (str, str) same-length words over {m,c}."""
    words = []
    for u, v in pairs:
        assert len(u) == len(v)
        words.append(tuple(REL.encode((a, b)) for a, b in zip(u, v)))
    return A.from_word_set(REL, words)


def test_compose_with_identity():
    r = rel_from_pairs([("mc", "cm"), ("m", "m"), ("cc", "mc")])
    ident = A.identity_relation(sigma_star(), REL)
    assert equivalent(A.compose(ident, r), r)
    assert equivalent(A.compose(r, ident), r)


def test_inverse_involution():
    r = rel_from_pairs([("mc", "cm"), ("mmm", "ccc")])
    assert equivalent(A.inverse(A.inverse(r)), r)


def test_compose_matches_join_oracle():
    r = rel_from_pairs([("mc", "cm"), ("mc", "cc"), ("mm", "cm")])
    s = rel_from_pairs([("cm", "mm"), ("cc", "mc"), ("cm", "cc")])
    comp = A.compose(r, s)
    # brute-force join oracle over all pairs of length <= 3
    def pairs(nfa):
        out = set()
        for l in range(4):
            for w in all_letter_tuples(REL, l):
                if nfa.accepts_letters(w):
                    out.add((tuple(REL.component_index(a, 0) for a in w),
                             tuple(REL.component_index(a, 1) for a in w)))
        return out
    rp, sp = pairs(r), pairs(s)
    expect = {(x, z) for (x, y) in rp for (y2, z) in sp if y == y2}
    assert pairs(comp) == expect


def test_compose_associative_on_languages():
    r = rel_from_pairs([("mc", "cm"), ("mm", "mc")])
    s = rel_from_pairs([("cm", "mm"), ("mc", "cm")])
    t = rel_from_pairs([("mm", "cc"), ("cm", "mc")])
    assert equivalent(A.compose(A.compose(r, s), t), A.compose(r, A.compose(s, t)))


# ------------------------------------------------------------------ formats


def test_text_roundtrip(fig3):
    text = fig3.to_text()
    back = Nfa.from_text(text)
    assert equivalent(back, fig3)
    assert back.to_text() == text


def test_dot_export_mentions_edges(fig3):
    dot = fig3.to_dot("muddy")
    assert "digraph muddy" in dot
    assert "m,0,m" in dot
    assert "doublecircle" in dot


def test_word_str():
    assert str(sigma_word("mcm")) == "mcm"
    assert str(Word(SIGMA, ())) == "ε"
    w = Word.of(TRANS, [("m", "0", "c")])
    assert str(w) == "(m,0,c)"


# ------------------------------------------------------------- misc helpers


def test_attach_bit_tracks_semantics():
    # Σ* with one attached position track equals Σ* ⊗ 0*10*
    got = A.attach_bit_tracks(sigma_star(), [(1, "i")])
    v = A.track_constraint(TrackLayout([A.bit_track("i")]), "exactly_one", 0)
    expect = sigma_star().sync(v)
    assert equivalent(got, expect.reorder([0, 1]))


def test_filter_letters_equal_tracks():
    eq = A.track_constraint(REL, "equal", 0, 1)
    assert eq.accepts(Word.of(REL, [("m", "m"), ("c", "c")]))
    assert not eq.accepts(Word.of(REL, [("m", "c")]))


def test_state_cap_guard():
    with override(max_states=2):
        with pytest.raises(CapacityError):
            sigma_star_m_sigma_star().sync(sigma_star_m_sigma_star()).determinize()
