import math
import pickle
from collections import Counter, defaultdict
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dop.errors import BadGrammarFile, EmptyCorpus, UnknownElementaryTree
from dop.stsg import (extract_subtrees, is_producible, load_grammar,
                      probability, recover_corpus, serialize_grammar,
                      subtree_count_per_node)
from dop.treebank import (Corpus, Production, parse_bracketed,
                          parse_fragment, parse_tree, productions)

from oracles import (brute_fragments, fragment_depth, random_corpus,
                     random_tree, toy_rng)

SINGLE = parse_bracketed('(S (A a) (B b))')
T1, T2 = '(S (A a) (B b))', '(S (C a) (D b))'
WEIGHTED = parse_bracketed(' '.join([T1, T1, T2]))


def test_single_tree_fragments():
    grammar = extract_subtrees(SINGLE)
    assert len(grammar.entries) == 6
    assert Counter(f.label for f in grammar.entries) == {'S': 4, 'A': 1,
                                                         'B': 1}
    assert set(grammar.entries.values()) == {1}
    assert set(grammar.entries) == set(brute_fragments(SINGLE[0]))


def test_depth_one_is_the_cfg():
    grammar = extract_subtrees(SINGLE, max_depth=1)
    assert set(map(str, grammar.entries)) == {'(S (A ) (B ))', '(A a)',
                                              '(B b)'}
    assert grammar.productions == frozenset(productions(SINGLE[0]))


def test_weighted_counts():
    grammar = extract_subtrees(WEIGHTED)
    assert grammar.root_totals['S'] == 12
    for text, count in [(T1, 2), (T2, 1)]:
        frags = [f for f in brute_fragments(parse_tree(text))
                 if f.label == 'S']
        assert len(frags) == 4
        for frag in frags:
            assert grammar.entries[frag] == count
            assert probability(frag, grammar) == pytest.approx(count / 12,
                                                               abs=1e-15)


def test_probability_examples():
    grammar = extract_subtrees(SINGLE)
    assert probability(parse_fragment('(A a)'), grammar) == 1.0
    for frag in grammar.by_root('S'):
        assert probability(frag, grammar) == 0.25
    assert probability(parse_fragment('(S (A a) (B ))'),
                       extract_subtrees(WEIGHTED)) == pytest.approx(2 / 12)
    with pytest.raises(UnknownElementaryTree):
        probability(parse_fragment('(S (B ) (A ))'), grammar)


def test_subtree_counts():
    counts = subtree_count_per_node(parse_tree('(S (A a) (B b))'))
    assert counts == {(): 4, (0, ): 1, (1, ): 1}
    assert subtree_count_per_node(parse_tree('(A a)')) == {(): 1}
    counts = subtree_count_per_node(parse_tree('(S (A a) (B b) (C c))'))
    assert counts[()] == 8 and sum(counts.values()) == 11


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        extract_subtrees(Corpus([]))


def test_producibility():
    grammar = extract_subtrees(SINGLE)
    assert is_producible(SINGLE[0], grammar)
    assert not is_producible(parse_tree('(S (B b) (A a))'), grammar)
    assert not is_producible(parse_tree('(S (A c) (B b))'), grammar)


def test_grammar_round_trip():
    grammar = extract_subtrees(WEIGHTED, max_depth=2, start='S')
    loaded = load_grammar(serialize_grammar(grammar))
    assert loaded.entries == grammar.entries
    assert loaded.root_totals == grammar.root_totals
    assert (loaded.max_depth, loaded.start) == (grammar.max_depth,
                                                grammar.start)
    assert serialize_grammar(loaded) == serialize_grammar(grammar)
    assert pickle.loads(pickle.dumps(grammar)).entries == grammar.entries


@pytest.mark.parametrize('text,line', [
    ('%start\tS\n(A a)\t-3\n', 2),
    ('%start\tS\n(A a)\tx\n', 2),
    ('%start\tS\n(A a\t1\n', 2),
    ('%bogus\tS\n', 1),
])
def test_bad_grammar_file(text, line):
    with pytest.raises(BadGrammarFile) as info:
        load_grammar(text)
    assert info.value.line == line


def test_start_symbol_default():
    corpus = parse_bracketed('(S (A a)) (T (A a)) (T (B b))')
    assert extract_subtrees(corpus).start == 'T'
    assert extract_subtrees(corpus, start='S').start == 'S'


def test_recover_corpus():
    grammar = extract_subtrees(WEIGHTED)
    assert sorted(recover_corpus(grammar)) == sorted(WEIGHTED)


def test_depth_capped_counts_match_enumeration():
    rng = toy_rng(11)
    for _ in range(30):
        tree = random_tree(rng, depth=4)
        brute = brute_fragments(tree)
        for depth in (1, 2, 3):
            capped = Counter({f: c for f, c in brute.items()
                              if fragment_depth(f) <= depth})
            assert extract_subtrees(Corpus([tree]), depth).entries == capped
            assert sum(subtree_count_per_node(tree, depth).values()) == sum(
                capped.values())


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_fragment_count_closed_form(seed):
    rng = toy_rng(seed)
    tree = random_tree(rng, depth=3)
    if sum(1 for _ in tree.subtrees()) > 8:
        tree = random_tree(rng, depth=2)
    brute = brute_fragments(tree)
    assert sum(subtree_count_per_node(tree).values()) == sum(brute.values())
    assert extract_subtrees(Corpus([tree])).entries == brute


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_grammar_invariants(seed):
    corpus = random_corpus(toy_rng(seed), ntrees=3, maxwords=8)
    full = extract_subtrees(corpus)
    sums = defaultdict(Fraction)
    for frag, count in full.entries.items():
        sums[frag.label] += Fraction(count, full.root_totals[frag.label])
    assert set(sums.values()) == {1}
    for label in full.root_totals:
        total = math.fsum(full.probability(f) for f in full.by_root(label))
        assert total == pytest.approx(1, abs=1e-12)
    previous = None
    for depth in (1, 2, 3, None):
        grammar = extract_subtrees(corpus, depth)
        for tree in corpus:
            assert is_producible(tree, grammar)
        if previous is not None:
            assert set(previous.entries) <= set(grammar.entries)
            for frag, count in previous.entries.items():
                if fragment_depth(frag) == 1:
                    assert grammar.entries[frag] == count
        previous = grammar
    depth1 = extract_subtrees(corpus, 1)
    expected = Counter()
    for tree in corpus:
        expected.update(productions(tree))
    assert Counter({_as_production(f): c
                    for f, c in depth1.entries.items()}) == expected


def _as_production(frag):
    if frag.is_preterminal:
        return Production(frag.label, frag.children, True)
    return Production(frag.label, tuple(c.label for c in frag.children))
