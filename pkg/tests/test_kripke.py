import itertools

import pytest

import prmc.automata as A
from prmc.automata import Nfa, Track, TrackLayout, Word, equivalent
from prmc.errors import LayoutError, ModelSyntaxError, ValidationError
from prmc.kripke import ContextKripke, RegularKripke, parse_model, state_layout, trans_layout

from conftest import C, M, SIGMA, TRANS, m_count_at_least, muddy_model, sigma_word


def identity_trans() -> Nfa:
    """{s (x) v (x) s}: every agent relates each state only to itself."""
    bit = TrackLayout([A.bit_track("obs")])
    pairs = A.universe(SIGMA).sync(A.track_constraint(bit, "exactly_one", 0))
    return pairs.relabel(lambda t: (t[0], t[1], t[0]), TRANS)


def w3(*rows) -> Word:
    return Word.of(TRANS, list(rows))


# ------------------------------------------------------------------ parsing


def test_parse_muddy_accepts_fig3_word(muddy):
    assert muddy.trans.accepts(w3(("c", "0", "c"), ("c", "0", "c"), ("m", "1", "c")))
    assert muddy.labelling["m"] == frozenset({"m"})
    assert muddy.labelling["c"] == frozenset()


def test_parse_empty_transducer_is_vacuous():
    text = """
alphabet: m c
props: m = {m}; c = {}
transducer:
tracks: src:m,c obs:0,1 tgt:m,c
states: q0
initial: q0
accepting:
"""
    model = parse_model(text)
    assert model.state_space().is_empty()


def test_parse_rejects_double_obs_bit():
    text = """
alphabet: m c
props: m = {m}; c = {}
transducer:
tracks: src:m,c obs:0,1 tgt:m,c
states: q0 q1
initial: q0
accepting: q1
trans: q0 (m,1,m) q1
trans: q1 (m,1,m) q1
"""
    with pytest.raises(ValidationError) as exc:
        parse_model(text)
    assert exc.value.check == "obs-shape"


def test_parse_syntax_error_has_line_number():
    with pytest.raises(ModelSyntaxError) as exc:
        parse_model("alphabet: m c\nwhatever: nope\n")
    assert exc.value.line == 2


# --------------------------------------------------------------- validation


def test_validate_muddy_ok(muddy):
    muddy.validate()


def test_missing_self_loop_is_reflexivity_error(muddy):
    # drop the (m,0,m) loop on the pre-observation state
    keep = [(p, a, q) for (p, a, q) in muddy.trans.transitions
            if not (p == 0 and q == 0 and muddy.trans.layout.decode(a) == ("m", "0", "m"))]
    broken = RegularKripke(muddy.alphabet, muddy.labelling,
                           Nfa(TRANS, 2, {0}, {1}, keep))
    with pytest.raises(ValidationError) as exc:
        broken.validate()
    assert exc.value.check == "reflexivity"
    # the shortest missing loop needs an m strictly before the observed position
    assert exc.value.witness == w3(("m", "0", "m"), ("m", "1", "m"))


# ---------------------------------------------------------------------- S5


def test_muddy_is_s5(muddy):
    report = muddy.check_s5()
    assert report.all_ok, report.witnesses


def test_one_directional_edge_breaks_symmetry(muddy):
    extra_word = w3(("m", "0", "m"), ("m", "1", "c"))
    extra = A.from_word_set(TRANS, [extra_word])
    model = RegularKripke(muddy.alphabet, muddy.labelling, identity_trans().union(extra))
    model.validate()
    report = model.check_s5()
    assert report.symmetric is False
    assert report.witnesses["symmetric"] == extra_word
    assert report.reflexive is True


def test_empty_model_is_vacuously_s5(muddy):
    model = RegularKripke(muddy.alphabet, muddy.labelling, A.empty_language(TRANS))
    report = model.check_s5()
    assert report.all_ok


def test_explicit_closure_cross_validation(muddy):
    # explicit-state check of reflexive/symmetric/transitive at lengths <= 4
    for l in range(1, 5):
        triples = set()
        for w in muddy.trans.words_of_length(l):
            src = w.track(0)
            obs = w.track(1).index("1")
            tgt = w.track(2)
            triples.add((src, obs, tgt))
        states = {s for (s, _, _) in triples} | {t for (_, _, t) in triples}
        for s in states:
            for i in range(l):
                assert (s, i, s) in triples
        for (s, i, t) in triples:
            assert (t, i, s) in triples
        by_agent = {}
        for (s, i, t) in triples:
            by_agent.setdefault(i, set()).add((s, t))
        for i, pairs in by_agent.items():
            for (s, t) in pairs:
                for (t2, u) in pairs:
                    if t2 == t:
                        assert (s, u) in pairs


# ------------------------------------------------------------- restriction


def test_restrict_to_muddy_states(muddy):
    restricted = muddy.restrict(m_count_at_least(1))
    assert equivalent(restricted.state_space(), m_count_at_least(1))


def test_restrict_by_state_space_is_noop(muddy):
    same = muddy.restrict(muddy.state_space())
    assert equivalent(same.trans, muddy.trans)


def test_restrict_to_empty(muddy):
    assert muddy.restrict(A.empty_language(SIGMA)).trans.is_empty()


def test_restrict_intersects_state_space(muddy):
    keep = m_count_at_least(2)
    restricted = muddy.restrict(keep)
    expect = muddy.state_space().intersect(keep)
    assert equivalent(restricted.state_space(), expect)


def test_restrict_shrinks_transducer(muddy):
    restricted = muddy.restrict(m_count_at_least(1))
    assert restricted.trans.difference(muddy.trans).is_empty()


def test_s5_preserved_by_restriction(muddy):
    for keep in (m_count_at_least(1), m_count_at_least(2),
                 A.from_word_set(SIGMA, [(M, C), (C, M), (M, M, C)])):
        assert muddy.restrict(keep).check_s5().all_ok


def test_state_space_of_muddy_is_nonempty_words(muddy):
    sigma_plus = A.universe(SIGMA).difference(A.epsilon(SIGMA))
    assert equivalent(muddy.state_space(), sigma_plus)


# ----------------------------------------------------------------- context


def ctx_layout():
    return TrackLayout([Track("s", ("m", "c")), Track("ctx", ("m", "c"))])


def test_extend_context_full_relation(muddy):
    ck = muddy.extend_context(("m", "c"), A.universe(ctx_layout()))
    for ctx in [(M,), (C, M), (M, M, C)]:
        ctx_word = Word(TrackLayout([Track("ctx", ("m", "c"))]), ctx)
        sliced = ck.slice_at(ctx_word)
        l = len(ctx)
        assert ({w.letters for w in sliced.trans.words_of_length(l)}
                == {w.letters for w in muddy.trans.words_of_length(l)})


def test_extend_context_equality_relation(muddy):
    eq = A.track_constraint(ctx_layout(), "equal", 0, 1)
    ck = muddy.extend_context(("m", "c"), eq)
    ctx_word = Word(TrackLayout([Track("ctx", ("m", "c"))]), (M, C))
    sliced = ck.slice_at(ctx_word)
    # slice at t is muddy restricted to the single state t
    expect = muddy.restrict(A.from_word_set(SIGMA, [(M, C)]))
    assert ({w.letters for w in sliced.trans.words_of_length(2)}
            == {w.letters for w in expect.trans.words_of_length(2)})


def test_extend_context_slices_match_independent_restriction(muddy):
    # upward-closure style constraint: context t keeps states with >= as many m
    rel = ctx_layout()
    le_m = []  # (state, ctx) pairs where count_m(state) >= count_m(ctx)
    for l in range(1, 4):
        for s in itertools.product("mc", repeat=l):
            for t in itertools.product("mc", repeat=l):
                if s.count("m") >= t.count("m"):
                    le_m.append(tuple(rel.encode((a, b)) for a, b in zip(s, t)))
    constraint = A.from_word_set(rel, le_m)
    ck = muddy.extend_context(("m", "c"), constraint)
    for ctx in [(M,), (M, C), (C, C, M)]:
        ctx_word = Word(TrackLayout([Track("ctx", ("m", "c"))]), ctx)
        l = len(ctx)
        m_needed = sum(1 for a in ctx if a == M)
        keep = m_count_at_least(m_needed)
        expect = muddy.restrict(keep)
        got = ck.slice_at(ctx_word)
        assert ({w.letters for w in got.trans.words_of_length(l)}
                == {w.letters for w in expect.trans.words_of_length(l)})


def test_pair_model_folds_context(muddy):
    ck = muddy.extend_context(("m", "c"), A.universe(ctx_layout()))
    pm = ck.to_pair_model()
    pm.validate()
    assert pm.labelling[("m", "c")] == frozenset({"m"})
    assert pm.check_s5().all_ok


# --------------------------------------------------------------------- I/O


def test_model_roundtrip(muddy):
    text = muddy.to_text()
    back = parse_model(text)
    assert equivalent(back.trans, muddy.trans)
    assert back.labelling == muddy.labelling


def test_restrict_layout_mismatch(muddy):
    with pytest.raises(LayoutError):
        muddy.restrict(A.universe(TRANS))
