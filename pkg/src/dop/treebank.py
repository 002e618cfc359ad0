"""Bracketed treebank trees: reading, writing, and the views used by the
grammar and evaluation code.

Trees are immutable.  A node is a :class:`Tree` with a nonterminal label
and a tuple of children; a terminal is a plain ``str``.  Terminals occur
only as the single child of a preterminal, e.g. ``(S (A a) (B b))``.

A ``Tree`` without children is a frontier nonterminal (a substitution
site); it only occurs inside elementary trees and prints as ``(B )``.
"""

from __future__ import annotations

import math
import re
import sys
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from dop.errors import (BadToken, DegenerateSplit, EmptyNode,
                        EmptyTreeAfterStrip, UnbalancedBrackets)

EPSILON = '-EPS-'

Child = Union['Tree', str]


class Tree:
    """An immutable labeled ordered tree."""

    __slots__ = ('label', 'children', '_str', '_hash')

    def __init__(self, label: str, children: Iterable[Child] = ()):
        self.label = label
        self.children = tuple(children)
        self._str = None
        self._hash = None

    def __str__(self):
        if self._str is None:
            if not self.children:
                self._str = '(%s )' % self.label
            else:
                self._str = '(%s %s)' % (self.label, ' '.join(
                    str(child) for child in self.children))
        return self._str

    def __repr__(self):
        return 'Tree(%r)' % str(self)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Tree):
            return NotImplemented
        return str(self) == str(other)

    def __lt__(self, other):
        return str(self) < str(other)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(str(self))
        return self._hash

    def __reduce__(self):
        return (Tree, (self.label, self.children))

    @property
    def is_site(self) -> bool:
        """True for a frontier nonterminal of an elementary tree."""
        return not self.children

    @property
    def is_preterminal(self) -> bool:
        return len(self.children) == 1 and isinstance(self.children[0], str)

    def subtrees(self) -> Iterator['Tree']:
        """Nonterminal nodes in preorder."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(child for child in reversed(node.children)
                         if isinstance(child, Tree))

    def leaves(self) -> list:
        return [node.children[0] for node in self.subtrees()
                if node.is_preterminal]

    def positions(self) -> Iterator[tuple]:
        """Tree positions (child index paths) of nonterminal nodes, in
        preorder; ``()`` is the root."""
        stack = [((), self)]
        while stack:
            pos, node = stack.pop()
            yield pos
            for n in range(len(node.children) - 1, -1, -1):
                if isinstance(node.children[n], Tree):
                    stack.append((pos + (n, ), node.children[n]))

    def __getitem__(self, pos):
        node = self
        for n in pos:
            node = node.children[n]
        return node

    def depth(self) -> int:
        """Maximum number of edges from the root to a frontier node."""
        best = 0
        for child in self.children:
            if isinstance(child, str) or child.is_site:
                best = max(best, 1)
            else:
                best = max(best, 1 + child.depth())
        return best


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple
    lexical: bool = False

    def __str__(self):
        if self.lexical:
            return '%s -> %r' % (self.lhs, self.rhs[0])
        return '%s -> %s' % (self.lhs, ' '.join(self.rhs))


class Corpus(Sequence):
    """An ordered collection of trees; ``corpus[i]`` is tree number i."""

    def __init__(self, trees: Iterable[Tree] = ()):
        self.trees = tuple(trees)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Corpus(self.trees[i])
        return self.trees[i]

    def __len__(self):
        return len(self.trees)

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.trees == other.trees

    def __repr__(self):
        return 'Corpus(<%d trees>)' % len(self.trees)

    def dumps(self) -> str:
        return ''.join('%s\n' % tree for tree in self.trees)


_TOKEN = re.compile(r'\(|\)|[^\s()]+')


def _tokenize(text):
    """Yield (token, offset) pairs; comment lines starting with ';' are
    skipped."""
    offset = 0
    for line in text.splitlines(keepends=True):
        if not line.lstrip().startswith(';'):
            for match in _TOKEN.finditer(line):
                yield match.group(), offset + match.start()
        offset += len(line)


def _read_trees(text, allow_sites):
    tokens = list(_tokenize(text))
    trees = []
    idx = 0

    def node(idx):
        # tokens[idx] is '('
        start = tokens[idx][1]
        idx += 1
        if idx >= len(tokens):
            raise UnbalancedBrackets('unclosed bracket', start)
        tok, pos = tokens[idx]
        if tok == ')':
            raise EmptyNode('empty node', start)
        label = None
        if tok != '(':
            label = tok
            idx += 1
        children = []
        while True:
            if idx >= len(tokens):
                raise UnbalancedBrackets('unclosed bracket', start)
            tok, pos = tokens[idx]
            if tok == ')':
                idx += 1
                break
            if tok == '(':
                child, idx = node(idx)
                children.append(child)
            else:
                children.append(tok)
                idx += 1
        if label is None:
            # Penn-style unlabeled wrapper: ``( (S ...) )``
            if len(children) == 1 and isinstance(children[0], Tree):
                return children[0], idx
            raise BadToken('node without a label', start)
        if not children and not allow_sites:
            raise EmptyNode('node %r has no children' % label, start)
        if any(isinstance(c, str) for c in children) and len(children) > 1:
            raise BadToken('terminal must be the only child of a '
                           'preterminal (node %r)' % label, start)
        return Tree(label, children), idx

    while idx < len(tokens):
        tok, pos = tokens[idx]
        if tok == ')':
            raise UnbalancedBrackets('unexpected closing bracket', pos)
        if tok != '(':
            raise BadToken('token %r outside of a tree' % tok, pos)
        tree, idx = node(idx)
        trees.append(tree)
    return trees


def parse_bracketed(text: str) -> Corpus:
    """Read one or more s-expression trees.

    >>> corpus = parse_bracketed('(S (A a) (B b))')
    >>> yield_of(corpus[0])
    ['a', 'b']
    """
    return Corpus(_read_trees(text, allow_sites=False))


def parse_tree(text: str) -> Tree:
    """Read exactly one tree."""
    trees = _read_trees(text, allow_sites=False)
    if len(trees) != 1:
        raise BadToken('expected exactly one tree, got %d' % len(trees), 0)
    return trees[0]


def parse_fragment(text: str) -> Tree:
    """Read one elementary tree; ``(B )`` denotes a substitution site."""
    trees = _read_trees(text, allow_sites=True)
    if len(trees) != 1:
        raise BadToken('expected exactly one fragment, got %d' % len(trees), 0)
    return trees[0]


def read_corpus(path) -> Corpus:
    """Read a corpus file; ``'-'`` reads standard input."""
    if path == '-':
        return parse_bracketed(sys.stdin.read())
    with open(path, encoding='utf8') as inp:
        return parse_bracketed(inp.read())


def productions(tree: Tree) -> Counter:
    """Multiset of depth-1 productions, one per internal node."""
    result = Counter()
    for node in tree.subtrees():
        if node.is_site:
            continue
        if node.is_preterminal:
            result[Production(node.label, node.children, True)] += 1
        else:
            result[Production(node.label, tuple(
                child.label for child in node.children))] += 1
    return result


def yield_of(tree: Tree, epsilon_mode: str = 'strip',
             epsilon: str = EPSILON) -> list:
    """Terminals from left to right."""
    words = tree.leaves()
    if epsilon_mode == 'strip':
        return [word for word in words if word != epsilon]
    elif epsilon_mode == 'keep':
        return words
    raise ValueError('epsilon_mode must be "strip" or "keep"')


def normalize_epsilon(tree: Tree, mode: str = 'strip',
                      epsilon: str = EPSILON) -> Tree:
    """Remove subtrees with an empty yield (``strip``) or do nothing
    (``keep``)."""
    if mode == 'keep':
        return tree
    if mode != 'strip':
        raise ValueError('mode must be "strip" or "keep"')

    def strip(node):
        if node.is_preterminal:
            return None if node.children[0] == epsilon else node
        children = [strip(child) for child in node.children]
        children = [child for child in children if child is not None]
        if not children:
            return None
        if len(children) == len(node.children) and all(
                a is b for a, b in zip(children, node.children)):
            return node
        return Tree(node.label, children)

    result = strip(tree)
    if result is None:
        raise EmptyTreeAfterStrip('tree %s has an empty yield' % tree)
    return result


def spans(tree: Tree) -> list:
    """(label, start, end) for every nonterminal node, in preorder."""
    result = []

    def visit(node, start):
        if node.is_preterminal:
            result.append((node.label, start, start + 1))
            return start + 1
        idx = len(result)
        result.append(None)
        end = start
        for child in node.children:
            end = visit(child, end)
        result[idx] = (node.label, start, end)
        return end

    visit(tree, 0)
    return result


def split_sizes(n: int, test_fraction: float) -> int:
    """Test-set size for a split: ``round(n * test_fraction)`` with halves
    rounded up."""
    if not 0 < test_fraction < 1:
        raise DegenerateSplit('test_fraction must lie strictly between 0 '
                              'and 1, got %r' % test_fraction)
    ntest = math.floor(n * test_fraction + 0.5)
    if ntest < 1 or ntest >= n:
        raise DegenerateSplit('a %d-tree corpus with test fraction %g gives '
                              'a test set of %d trees' % (n, test_fraction, ntest))
    return ntest


def split_indices(n: int, test_fraction: float, seed: int):
    """Index arrays ``(train, test)``, each in increasing order."""
    ntest = split_sizes(n, test_fraction)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[ntest:]), np.sort(perm[:ntest])


def random_split(corpus: Corpus, test_fraction: float, seed: int):
    """Seeded random partition into ``(train, test)`` corpora."""
    train, test = split_indices(len(corpus), test_fraction, seed)
    return (Corpus(corpus[i] for i in train),
            Corpus(corpus[i] for i in test))
