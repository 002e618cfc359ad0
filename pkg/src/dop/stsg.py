"""Elementary trees of a treebank and their relative frequencies.

Every fragment of every corpus tree is an elementary tree.  A fragment
rooted at node j keeps, for each nonterminal child, either the child's
label alone (a substitution site) or a fragment rooted at that child.
Fragments are identified by their canonical bracketed form, with sites
written ``(B )``.
"""

from __future__ import annotations

import itertools
from collections import Counter
from typing import Optional

from dop.errors import BadGrammarFile, EmptyCorpus, UnknownElementaryTree
from dop.treebank import (Corpus, Production, Tree, parse_fragment,
                          productions)


def _normdepth(max_depth):
    if max_depth is None or max_depth == 0:
        return None
    if max_depth < 0:
        raise ValueError('max_depth must be >= 1, or 0/None for unbounded')
    return int(max_depth)


def fragments_with_sites(node: Tree, max_depth: Optional[int] = None,
                         _memo=None) -> list:
    """All fragments rooted at ``node`` with depth at most ``max_depth``.

    Returns a list of ``(fragment, sites)`` pairs where ``sites`` are the
    nodes of the original tree found under the fragment's substitution
    sites, from left to right.
    """
    if _memo is None:
        _memo = {}
    key = (id(node), max_depth)
    if key in _memo:
        return _memo[key][1]
    if node.is_preterminal:
        result = [(node, ())]
    else:
        options = []
        for child in node.children:
            opts = [(Tree(child.label), (child, ))]
            if max_depth is None or max_depth > 1:
                opts.extend(fragments_with_sites(
                    child, None if max_depth is None else max_depth - 1,
                    _memo))
            options.append(opts)
        result = [(Tree(node.label, [frag for frag, _ in combo]),
                   tuple(site for _, sites in combo for site in sites))
                  for combo in itertools.product(*options)]
    # keep node alive so id() stays unique while memoized
    _memo[key] = (node, result)
    return result


def subtree_count_per_node(tree: Tree, max_depth: Optional[int] = None) -> dict:
    """Number of fragments rooted at each node, keyed by tree position.

    A preterminal has one fragment; a node with children k1..km has
    prod(1 + count(ki)).  Under a depth cap the children are counted with
    one unit of depth less, and nothing fits in a budget of 0.
    """
    max_depth = _normdepth(max_depth)
    memo = {}

    def count(node, budget):
        if budget is not None and budget < 1:
            return 0
        key = (id(node), budget)
        if key not in memo:
            n = 1
            if not node.is_preterminal:
                for child in node.children:
                    n *= 1 + count(child,
                                   None if budget is None else budget - 1)
            memo[key] = n
        return memo[key]

    return {pos: count(tree[pos], max_depth) for pos in tree.positions()}


class Stsg:
    """A bank of elementary trees with integer occurrence counts.

    ``probability(e) = count(e) / root_totals[root(e)]``.
    """

    def __init__(self, entries: dict, max_depth: Optional[int] = None,
                 start: Optional[str] = None):
        self.entries = dict(entries)
        self.max_depth = _normdepth(max_depth)
        self.root_totals = Counter()
        for frag, count in self.entries.items():
            if count <= 0:
                raise ValueError('count of %s must be positive' % frag)
            self.root_totals[frag.label] += count
        self.root_totals = dict(self.root_totals)
        if start is None and self.entries:
            start = min(self.root_totals,
                        key=lambda label: (-self.root_totals[label], label))
        self.start = start
        self._productions = None
        self._index = None

    def __len__(self):
        return len(self.entries)

    def __contains__(self, frag):
        return frag in self.entries

    def __eq__(self, other):
        if not isinstance(other, Stsg):
            return NotImplemented
        return (self.entries == other.entries
                and self.max_depth == other.max_depth
                and self.start == other.start)

    def __repr__(self):
        return 'Stsg(<%d elementary trees>, max_depth=%r, start=%r)' % (
            len(self.entries), self.max_depth, self.start)

    def __getstate__(self):
        return (self.entries, self.max_depth, self.start)

    def __setstate__(self, state):
        self.__init__(*state)

    def probability(self, frag: Tree) -> float:
        try:
            count = self.entries[frag]
        except KeyError:
            raise UnknownElementaryTree(str(frag)) from None
        return count / self.root_totals[frag.label]

    @property
    def productions(self) -> frozenset:
        """Depth-1 entries as productions."""
        if self._productions is None:
            prods = set()
            for frag in self.entries:
                if frag.is_preterminal:
                    prods.add(Production(frag.label, frag.children, True))
                elif all(isinstance(c, Tree) and c.is_site
                         for c in frag.children):
                    prods.add(Production(frag.label, tuple(
                        c.label for c in frag.children)))
            self._productions = frozenset(prods)
        return self._productions

    def by_root(self, label: str) -> list:
        return sorted(frag for frag in self.entries if frag.label == label)


def extract_subtrees(corpus: Corpus, max_depth: Optional[int] = None,
                     start: Optional[str] = None) -> Stsg:
    """Count all fragments (depth <= ``max_depth``; 0 or None means no
    limit) of all corpus trees.  Duplicate corpus trees count twice."""
    if len(corpus) == 0:
        raise EmptyCorpus('cannot extract a grammar from an empty corpus')
    max_depth = _normdepth(max_depth)
    counts = Counter()
    for tree in corpus:
        memo = {}
        for node in tree.subtrees():
            for frag, _ in fragments_with_sites(node, max_depth, memo):
                counts[frag] += 1
    if start is None:
        roots = Counter(tree.label for tree in corpus)
        start = min(roots, key=lambda label: (-roots[label], label))
    return Stsg(counts, max_depth, start)


def probability(entry: Tree, grammar: Stsg) -> float:
    return grammar.probability(entry)


def is_producible(tree: Tree, grammar: Stsg) -> bool:
    """Whether every production of ``tree`` is an entry of ``grammar``."""
    return all(prod in grammar.productions for prod in productions(tree))


def serialize_grammar(grammar: Stsg) -> str:
    lines = ['%%start\t%s' % grammar.start,
             '%%max_depth\t%d' % (grammar.max_depth or 0)]
    lines.extend('%s\t%d' % (frag, count) for frag, count in sorted(
        grammar.entries.items(), key=lambda x: str(x[0])))
    return '\n'.join(lines) + '\n'


def load_grammar(text: str) -> Stsg:
    start = max_depth = None
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith(';'):
            continue
        fields = line.rstrip('\n').split('\t')
        if len(fields) != 2:
            raise BadGrammarFile('expected two tab-separated fields', lineno)
        if fields[0] == '%start':
            start = fields[1]
            continue
        if fields[0] == '%max_depth':
            try:
                max_depth = int(fields[1])
            except ValueError:
                raise BadGrammarFile('bad depth %r' % fields[1], lineno) from None
            if max_depth < 0:
                raise BadGrammarFile('negative depth', lineno)
            continue
        try:
            frag = parse_fragment(fields[0])
            count = int(fields[1])
        except ValueError as err:
            raise BadGrammarFile(str(err), lineno) from None
        if count <= 0:
            raise BadGrammarFile('count must be a positive integer', lineno)
        if frag in entries:
            raise BadGrammarFile('duplicate entry %s' % frag, lineno)
        entries[frag] = count
    if not entries:
        raise BadGrammarFile('no entries')
    return Stsg(entries, max_depth, start)


def recover_corpus(grammar: Stsg) -> Corpus:
    """Reconstruct the training corpus of a grammar without depth cap.

    Complete fragments (no substitution sites) are exactly the subtrees of
    corpus nodes, so the corpus multiset follows by peeling off embedded
    occurrences from the largest fragment down.  The original order of the
    corpus is not recoverable; trees are returned in canonical order.
    """
    if grammar.max_depth is not None:
        raise ValueError('corpus recovery requires a grammar without a '
                         'depth cap')
    complete = {frag: count for frag, count in grammar.entries.items()
                if not any(node.is_site for node in frag.subtrees())}
    order = sorted(complete, key=lambda t: (-sum(1 for _ in t.subtrees()),
                                            str(t)))
    embedded = Counter()
    roots = {}
    for tree in order:
        mult = complete[tree] - embedded[tree]
        if mult < 0:
            raise ValueError('inconsistent grammar counts for %s' % tree)
        if mult:
            roots[tree] = mult
            for node in itertools.islice(tree.subtrees(), 1, None):
                embedded[node] += mult
    trees = []
    for tree in sorted(roots, key=str):
        trees.extend([tree] * roots[tree])
    return Corpus(trees)
