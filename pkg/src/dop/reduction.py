"""Node-indexed PCFG equivalent to the all-fragments STSG of a corpus.

Every internal corpus node j gets a nonterminal ``A@j``.  With ``a_j`` the
number of fragments rooted at j and ``a(A)`` the sum of ``a_j`` over the
nodes labeled A, a node j with children k1..km yields, for each choice of
which children to index, the rules::

    A@j -> X1 .. Xm   weight prod(a_k, k indexed) / a_j
    A   -> X1 .. Xm   weight prod(a_k, k indexed) / a(A)

where ``Xi`` is ``Bi@ki`` if child i is indexed and ``Bi`` otherwise.  A
plain left-hand side starts a fragment, an indexed one continues it, and
the weights along one fragment multiply out to ``1 / a(A)``; summed over
the nodes where a fragment occurs this is its STSG probability.  Under a
depth cap, indexed symbols carry the remaining depth: ``A@j:d``.

Chart computations binarize rules internally; the bookkeeping symbols
carry weight 1 and never show up in results.
"""

from __future__ import annotations

import graphlib
import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from dop.errors import (BadGrammarFile, CyclicGrammar, EmptyCorpus, NoParse,
                        UnknownWord)
from dop.stsg import _normdepth
from dop.treebank import Corpus, Tree


def plain_label(symbol: str) -> str:
    """``'NP@12'`` -> ``'NP'``; plain labels are returned unchanged."""
    label, sep, index = symbol.rpartition('@')
    if sep and index.replace(':', '', 1).isdigit():
        return label
    return symbol


def project(tree: Tree) -> Tree:
    """Erase node indices from an indexed parse tree."""
    return Tree(plain_label(tree.label), [
        child if isinstance(child, str) else project(child)
        for child in tree.children])


@dataclass
class IndexedPcfg:
    """Rules ``(lhs, rhs) -> weight`` and lexical rules ``(lhs, word) ->
    weight``; ``node_counts`` maps indexed symbols to their fragment counts
    and ``label_totals`` plain labels to the summed counts."""
    rules: dict
    lexicon: dict
    start: str
    node_counts: dict = field(default_factory=dict)
    label_totals: dict = field(default_factory=dict)
    max_depth: Optional[int] = None
    start_weights: Optional[dict] = None
    _compiled: object = field(default=None, repr=False, compare=False)

    def lhs_totals(self) -> dict:
        """Summed rule weight per left-hand side."""
        totals = defaultdict(list)
        for (lhs, _), weight in itertools.chain(self.rules.items(),
                                                self.lexicon.items()):
            totals[lhs].append(weight)
        return {lhs: math.fsum(ws) for lhs, ws in totals.items()}

    def __len__(self):
        return len(self.rules) + len(self.lexicon)


def _check_labels(corpus):
    for tree in corpus:
        for node in tree.subtrees():
            if plain_label(node.label) != node.label:
                raise ValueError('label %r clashes with the spelling of '
                                 'indexed symbols' % node.label)


def reduce(corpus: Corpus, max_depth: Optional[int] = None,
           start: Optional[str] = None) -> IndexedPcfg:
    """Compile the STSG of ``corpus`` into a node-indexed PCFG."""
    if len(corpus) == 0:
        raise EmptyCorpus('cannot reduce an empty corpus')
    _check_labels(corpus)
    depth = _normdepth(max_depth)
    nodes = []  # (id, node) in preorder over the corpus
    for tree in corpus:
        for node in tree.subtrees():
            nodes.append(node)
    nodeid = {id(node): n for n, node in enumerate(nodes)}

    counts = {}

    def count(node, budget):
        # fragments rooted at node with depth <= budget
        if budget is not None and budget < 1:
            return 0
        key = (id(node), budget)
        if key not in counts:
            n = 1
            if not node.is_preterminal:
                for child in node.children:
                    n *= 1 + count(child,
                                   None if budget is None else budget - 1)
            counts[key] = n
        return counts[key]

    def symbol(node, budget):
        if depth is None:
            return '%s@%d' % (node.label, nodeid[id(node)])
        return '%s@%d:%d' % (node.label, nodeid[id(node)], budget)

    def expansions(node, budget):
        """(rhs, numerator) for every choice of indexed children."""
        sub = None if budget is None else budget - 1
        options = []
        for child in node.children:
            opts = [(child.label, 1)]
            if sub is None or sub >= 1:
                opts.append((symbol(child, sub), count(child, sub)))
            options.append(opts)
        for combo in itertools.product(*options):
            yield (tuple(sym for sym, _ in combo),
                   math.prod(num for _, num in combo))

    label_totals = Counter()
    for node in nodes:
        label_totals[node.label] += count(node, depth)
    plain_num = Counter()
    lex_num = Counter()
    for node in nodes:
        if node.is_preterminal:
            lex_num[node.label, node.children[0]] += 1
        else:
            for rhs, num in expansions(node, depth):
                plain_num[node.label, rhs] += num
    rules = {key: num / label_totals[key[0]] for key, num in plain_num.items()}
    lexicon = {key: num / label_totals[key[0]] for key, num in lex_num.items()}
    node_counts = {}
    if depth is None:
        agenda = [(node, None) for node in nodes]
    else:
        agenda = [(child, depth - 1) for node in nodes
                  if not node.is_preterminal and depth > 1
                  for child in node.children]
    seen = set()
    while agenda:
        node, budget = agenda.pop()
        sym = symbol(node, budget)
        if sym in seen:
            continue
        seen.add(sym)
        total = count(node, budget)
        node_counts[sym] = total
        if node.is_preterminal:
            lexicon[sym, node.children[0]] = 1.0
            continue
        for rhs, num in expansions(node, budget):
            rules[sym, rhs] = num / total
        if budget is not None and budget > 1:
            agenda.extend((child, budget - 1) for child in node.children)
    if start is None:
        roots = Counter(tree.label for tree in corpus)
        start = min(roots, key=lambda label: (-roots[label], label))
    return IndexedPcfg(dict(sorted(rules.items())), dict(sorted(lexicon.items())),
                       start, node_counts, dict(label_totals), depth)


def write_rules(pcfg: IndexedPcfg) -> str:
    """Rule file: ``LHS<TAB>RHS...<TAB>weight``; terminals are quoted."""
    lines = ['%%start\t%s' % pcfg.start,
             '%%max_depth\t%d' % (pcfg.max_depth or 0)]
    lines.extend('%%startweight\t%s\t%r' % item
                 for item in sorted((pcfg.start_weights or {}).items()))
    lines.extend('%%label\t%s\t%d' % item
                 for item in sorted(pcfg.label_totals.items()))
    lines.extend('%%node\t%s\t%d' % item
                 for item in sorted(pcfg.node_counts.items()))
    lines.extend('%s\t%s\t%r' % (lhs, ' '.join(rhs), weight)
                 for (lhs, rhs), weight in sorted(pcfg.rules.items()))
    lines.extend("%s\t'%s'\t%r" % (lhs, word, weight)
                 for (lhs, word), weight in sorted(pcfg.lexicon.items()))
    return '\n'.join(lines) + '\n'


def load_rules(text: str) -> IndexedPcfg:
    rules, lexicon, node_counts, label_totals, weights = {}, {}, {}, {}, {}
    start, depth = None, None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith(';'):
            continue
        fields = line.split('\t')
        try:
            if fields[0] == '%start':
                start = fields[1]
            elif fields[0] == '%max_depth':
                depth = int(fields[1]) or None
            elif fields[0] == '%startweight':
                weights[fields[1]] = float(fields[2])
            elif fields[0] == '%label':
                label_totals[fields[1]] = int(fields[2])
            elif fields[0] == '%node':
                node_counts[fields[1]] = int(fields[2])
            elif len(fields) != 3:
                raise ValueError('expected three tab-separated fields')
            elif (len(fields[1]) > 2 and fields[1][0] == "'"
                    and fields[1][-1] == "'"):
                lexicon[fields[0], fields[1][1:-1]] = float(fields[2])
            else:
                rules[fields[0], tuple(fields[1].split())] = float(fields[2])
        except (ValueError, IndexError) as err:
            raise BadGrammarFile(str(err), lineno) from None
    if start is None:
        raise BadGrammarFile('missing %start line')
    return IndexedPcfg(rules, lexicon, start, node_counts, label_totals, depth,
                       weights or None)


class _Compiled:
    """Binarized integer-coded form of a PCFG for the chart algorithms."""

    def __init__(self, pcfg):
        symbols = {}

        def sym(name):
            if name not in symbols:
                symbols[name] = len(symbols)
            return symbols[name]

        binary, unary = [], []
        aux_done = set()

        def binarize(lhs, rhs, weight):
            if len(rhs) == 1:
                unary.append((sym(lhs), sym(rhs[0]), weight))
                return
            if len(rhs) == 2:
                binary.append((sym(lhs), sym(rhs[0]), sym(rhs[1]), weight))
                return
            # bookkeeping symbols contain a space, which labels never do
            aux = '<%s>' % ' '.join(rhs[1:])
            binary.append((sym(lhs), sym(rhs[0]), sym(aux), weight))
            if aux not in aux_done:
                aux_done.add(aux)
                binarize(aux, rhs[1:], 1.0)

        for (lhs, rhs), weight in sorted(pcfg.rules.items()):
            binarize(lhs, rhs, weight)
        self.lexicon = defaultdict(list)
        for (lhs, word), weight in sorted(pcfg.lexicon.items()):
            self.lexicon[word].append((sym(lhs), weight))
        self.lexicon = {word: (np.array([s for s, _ in entries], dtype=int),
                               np.array([w for _, w in entries]))
                        for word, entries in self.lexicon.items()}
        sym(pcfg.start)
        self.symbols = symbols
        self.names = sorted(symbols, key=symbols.get)
        self.nsym = len(symbols)
        self.aux = np.array([' ' in name for name in self.names])
        labels = sorted({plain_label(name) for name in self.names
                         if ' ' not in name})
        self.labels = labels
        labelidx = {label: n for n, label in enumerate(labels)}
        self.label_of = np.array([-1 if ' ' in name
                                  else labelidx[plain_label(name)]
                                  for name in self.names], dtype=int)
        bin_arr = np.array(binary, dtype=float).reshape(-1, 4)
        self.bl = bin_arr[:, 0].astype(int)
        self.bb = bin_arr[:, 1].astype(int)
        self.bc = bin_arr[:, 2].astype(int)
        self.bw = bin_arr[:, 3]
        with np.errstate(divide='ignore'):
            self.logbw = np.log(self.bw)
        # unary rules grouped in levels: a level only reads symbols that
        # earlier levels have finished
        sorter = graphlib.TopologicalSorter()
        for lhs, rhs, _ in unary:
            sorter.add(lhs, rhs)
        try:
            topo = list(sorter.static_order())
        except graphlib.CycleError as err:
            raise CyclicGrammar('unary cycle among %s' % ' '.join(
                self.names[s] for s in err.args[1])) from None
        level = {}
        deps = defaultdict(list)
        for lhs, rhs, _ in unary:
            deps[lhs].append(rhs)
        for s in topo:
            level[s] = 1 + max((level[r] for r in deps[s]), default=-1) \
                if deps[s] else 0
        bylevel = defaultdict(list)
        for n, (lhs, rhs, weight) in enumerate(unary):
            bylevel[level[lhs]].append((lhs, rhs, weight, n))
        self.unary_levels = []
        for lev in sorted(bylevel):
            arr = np.array(bylevel[lev], dtype=float)
            self.unary_levels.append((arr[:, 0].astype(int),
                                      arr[:, 1].astype(int), arr[:, 2],
                                      np.log(arr[:, 2]),
                                      arr[:, 3].astype(int)))
        self.unary = unary


def _compiled(pcfg):
    if pcfg._compiled is None:
        pcfg._compiled = _Compiled(pcfg)
    return pcfg._compiled


def _start_weights(pcfg, comp, start):
    if start is None:
        start = pcfg.start_weights or pcfg.start
    if isinstance(start, str):
        start = {start: 1.0}
    syms = np.array([comp.symbols[name] for name in start if name
                     in comp.symbols], dtype=int)
    weights = np.array([w for name, w in start.items()
                        if name in comp.symbols])
    return syms, weights


@dataclass
class InsideOutsideTables:
    """Span tables indexed as ``inside[i, j, symbol_index]``."""
    sentence: tuple
    symbols: dict
    inside: np.ndarray
    sentence_mass: float
    outside: Optional[np.ndarray] = None
    start: dict = field(default_factory=dict)

    def inside_of(self, i, j, symbol) -> float:
        idx = self.symbols.get(symbol)
        return 0.0 if idx is None else float(self.inside[i, j, idx])

    def outside_of(self, i, j, symbol) -> float:
        idx = self.symbols.get(symbol)
        return 0.0 if idx is None else float(self.outside[i, j, idx])


def _lexical_index(comp, words):
    result = []
    for pos, word in enumerate(words):
        if word not in comp.lexicon:
            raise UnknownWord(word, pos)
        result.append(comp.lexicon[word])
    return result


def inside(pcfg: IndexedPcfg, sentence, start=None) -> InsideOutsideTables:
    """Inside probabilities of every symbol over every span.

    ``start`` defaults to the grammar's start symbol; a mapping
    ``{symbol: weight}`` mixes several start symbols.
    """
    words = tuple(sentence)
    if not words:
        raise ValueError('cannot parse an empty sentence')
    comp = _compiled(pcfg)
    lex = _lexical_index(comp, words)
    n, nsym = len(words), comp.nsym
    chart = np.zeros((n + 1, n + 1, nsym))
    for i in range(n):
        syms, weights = lex[i]
        np.add.at(chart[i, i + 1], syms, weights)
        _unary_inside(comp, chart[i, i + 1])
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            j = i + length
            left = chart[i, i + 1:j][:, comp.bb]
            right = chart[i + 1:j, j][:, comp.bc]
            contrib = (left * right).sum(axis=0) * comp.bw
            chart[i, j] = np.bincount(comp.bl, weights=contrib,
                                      minlength=nsym)
            _unary_inside(comp, chart[i, j])
    syms, weights = _start_weights(pcfg, comp, start)
    mass = float(np.dot(chart[0, n, syms], weights))
    return InsideOutsideTables(words, comp.symbols, chart, mass,
                               start=dict(zip(syms.tolist(), weights.tolist())))


def _unary_inside(comp, vec):
    for lhs, rhs, weight, _, _ in comp.unary_levels:
        np.add.at(vec, lhs, weight * vec[rhs])


def outside(pcfg: IndexedPcfg, sentence,
            tables: InsideOutsideTables) -> InsideOutsideTables:
    """Fill in outside probabilities (in place) and return the tables."""
    if tables.sentence_mass <= 0:
        raise NoParse('no parse of %r' % ' '.join(tables.sentence))
    comp = _compiled(pcfg)
    chart = tables.inside
    n, nsym = len(tables.sentence), comp.nsym
    out = np.zeros((n + 1, n + 1, nsym))
    for s, weight in tables.start.items():
        out[0, n, s] += weight
    for length in range(n, 0, -1):
        for i in range(n - length + 1):
            j = i + length
            vec = out[i, j]
            for lhs, rhs, weight, _, _ in reversed(comp.unary_levels):
                np.add.at(vec, rhs, weight * vec[lhs])
            if length == 1:
                continue
            ks = np.arange(i + 1, j)[:, None]
            parent = vec[comp.bl] * comp.bw
            np.add.at(out[i], (ks, comp.bb[None, :]),
                      parent * chart[i + 1:j, j][:, comp.bc])
            np.add.at(out[:, j], (ks, comp.bc[None, :]),
                      parent * chart[i, i + 1:j][:, comp.bb])
    tables.outside = out
    return tables


def inside_outside(pcfg: IndexedPcfg, sentence, start=None):
    tables = inside(pcfg, sentence, start)
    return outside(pcfg, sentence, tables)


@dataclass
class ConstituentPosterior:
    """``table[i, j, label]``: posterior probability of a labeled span."""
    table: dict
    length: int

    def __getitem__(self, key):
        return self.table.get(key, 0.0)

    def labels_at(self, i, j) -> dict:
        return {label: p for (a, b, label), p in self.table.items()
                if (a, b) == (i, j)}


def constituent_posteriors(tables: InsideOutsideTables,
                           pcfg: IndexedPcfg) -> ConstituentPosterior:
    """Sum of inside * outside / mass over the indexed variants of each
    label."""
    if tables.outside is None:
        raise ValueError('outside probabilities have not been computed')
    comp = _compiled(pcfg)
    n = len(tables.sentence)
    prod = tables.inside * tables.outside / tables.sentence_mass
    keep = ~comp.aux
    table = {}
    for i in range(n):
        for j in range(i + 1, n + 1):
            vec = np.bincount(comp.label_of[keep], weights=prod[i, j][keep],
                              minlength=len(comp.labels))
            for idx in np.flatnonzero(vec):
                table[i, j, comp.labels[idx]] = float(vec[idx])
    return ConstituentPosterior(table, n)


def _segment_argmax(values, segments):
    """For each distinct segment id, the index of its largest value (the
    first such index on ties)."""
    order = np.lexsort((-values, segments))
    segs = segments[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = segs[1:] != segs[:-1]
    return order[first]


@dataclass
class ViterbiParse:
    tree: Tree
    probability: float
    indexed: Tree

    def __iter__(self):
        return iter((self.tree, self.probability))


def pcfg_viterbi(pcfg: IndexedPcfg, sentence, start=None) -> ViterbiParse:
    """Best single indexed parse, and its projection.

    Each indexed parse is one STSG derivation (with a particular corpus
    occurrence for each elementary tree deeper than one level), so this
    finds a most probable derivation, not a most probable tree.
    """
    words = tuple(sentence)
    if not words:
        raise ValueError('cannot parse an empty sentence')
    comp = _compiled(pcfg)
    lex = _lexical_index(comp, words)
    n, nsym = len(words), comp.nsym
    best = np.full((n + 1, n + 1, nsym), -np.inf)
    kind = np.zeros((n + 1, n + 1, nsym), dtype=np.int8)
    rule = np.zeros((n + 1, n + 1, nsym), dtype=np.int64)
    split = np.zeros((n + 1, n + 1, nsym), dtype=np.int64)
    LEX, BIN, UNARY = 1, 2, 3
    for i in range(n):
        syms, weights = lex[i]
        best[i, i + 1, syms] = np.log(weights)
        kind[i, i + 1, syms] = LEX
        _unary_viterbi(comp, best[i, i + 1], kind[i, i + 1], rule[i, i + 1])
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            j = i + length
            if len(comp.bl):
                cand = (comp.logbw + best[i, i + 1:j][:, comp.bb]
                        + best[i + 1:j, j][:, comp.bc])
                kbest = np.argmax(cand, axis=0)
                val = cand[kbest, np.arange(len(comp.bl))]
                winners = _segment_argmax(val, comp.bl)
                winners = winners[np.isfinite(val[winners])]
                lhs = comp.bl[winners]
                best[i, j, lhs] = val[winners]
                kind[i, j, lhs] = BIN
                rule[i, j, lhs] = winners
                split[i, j, lhs] = i + 1 + kbest[winners]
            _unary_viterbi(comp, best[i, j], kind[i, j], rule[i, j])
    syms, weights = _start_weights(pcfg, comp, start)
    scores = best[0, n, syms] + np.log(weights)
    if not len(syms) or not np.isfinite(scores.max()):
        raise NoParse('no parse of %r' % ' '.join(words))
    top = syms[int(np.argmax(scores))]

    def build(i, j, s):
        name = comp.names[s]
        if kind[i, j, s] == LEX:
            return Tree(name, [words[i]])
        if kind[i, j, s] == UNARY:
            children = [build(i, j, comp.unary[rule[i, j, s]][1])]
        else:
            r, k = rule[i, j, s], split[i, j, s]
            children = [build(i, k, comp.bb[r]), build(k, j, comp.bc[r])]
        flat = []
        for child in children:
            if isinstance(child, Tree) and ' ' in child.label:
                flat.extend(child.children)
            else:
                flat.append(child)
        return Tree(name, flat)

    indexed = build(0, n, top)
    return ViterbiParse(project(indexed), float(np.exp(best[0, n, top])),
                        indexed)


def _unary_viterbi(comp, vec, kind, rule):
    for lhs, rhs, _, logw, ruleno in comp.unary_levels:
        cand = logw + vec[rhs]
        for r in _segment_argmax(cand, lhs):
            if cand[r] > vec[lhs[r]]:
                vec[lhs[r]] = cand[r]
                kind[lhs[r]] = 3
                rule[lhs[r]] = ruleno[r]


def maximum_constituents_parse(posteriors: ConstituentPosterior, sentence,
                               labeled: bool = True,
                               return_score: bool = False):
    """Binary tree maximizing the summed posterior of its constituents.

    Every span in the result carries one label; spans without posterior
    mass are never used, so if no binary tree can be built from supported
    spans, :class:`NoParse` is raised.  With ``labeled=False`` a span
    scores the total posterior over its labels.
    """
    words = tuple(sentence)
    n = len(words)
    if posteriors.length != n:
        raise ValueError('posteriors are for a sentence of length %d'
                         % posteriors.length)
    spanlabels = defaultdict(dict)
    for (i, j, label), p in posteriors.table.items():
        if p > 0:
            spanlabels[i, j][label] = p
    best = {}
    back = {}
    for length in range(1, n + 1):
        for i in range(n - length + 1):
            j = i + length
            labels = spanlabels.get((i, j))
            if not labels:
                continue
            label = min(labels, key=lambda x: (-labels[x], x))
            score = sum(labels.values()) if not labeled else labels[label]
            if length == 1:
                best[i, j] = score
                back[i, j] = (label, None)
                continue
            top = None
            for k in range(i + 1, j):
                if (i, k) in best and (k, j) in best:
                    cand = best[i, k] + best[k, j]
                    if top is None or cand > top + 1e-12:
                        top, topk = cand, k
            if top is not None:
                best[i, j] = score + top
                back[i, j] = (label, topk)
    if (0, n) not in best:
        raise NoParse('no binary tree over supported spans for %r'
                      % ' '.join(words))

    def build(i, j):
        label, k = back[i, j]
        if k is None:
            return Tree(label, [words[i]])
        return Tree(label, [build(i, k), build(k, j)])

    tree = build(0, n)
    return (tree, best[0, n]) if return_score else tree


def collapse_unaries(tree: Tree) -> Tree:
    """Merge unary chains into one node labeled ``X+Y``."""
    label = tree.label
    node = tree
    while len(node.children) == 1 and isinstance(node.children[0], Tree):
        node = node.children[0]
        label += '+' + node.label
    if node.is_preterminal:
        return Tree(label, node.children)
    return Tree(label, [collapse_unaries(child) for child in node.children])


def expand_unaries(tree: Tree) -> Tree:
    labels = tree.label.split('+')
    children = [child if isinstance(child, str) else expand_unaries(child)
                for child in tree.children]
    for label in reversed(labels[1:]):
        children = [Tree(label, children)]
    return Tree(labels[0], children)


def binarize(tree: Tree) -> Tree:
    """Right-factored binarization; new nodes are labeled ``A|<...>``."""
    if tree.is_preterminal:
        return tree
    children = [binarize(child) for child in tree.children]
    while len(children) > 2:
        tail = children[-2:]
        aux = '%s|<%s>' % (tree.label, ','.join(
            orig.label for orig in tree.children[len(children) - 2:]))
        children = children[:-2] + [Tree(aux, tail)]
    return Tree(tree.label, children)


def unbinarize(tree: Tree) -> Tree:
    if tree.is_preterminal:
        return tree
    children = []
    for child in tree.children:
        child = unbinarize(child)
        if '|<' in child.label:
            children.extend(child.children)
        else:
            children.append(child)
    return Tree(tree.label, children)


def _check_reserved(corpus):
    for tree in corpus:
        for node in tree.subtrees():
            if '+' in node.label or '|<' in node.label:
                raise ValueError('label %r uses a character reserved for '
                                 'unary collapsing or binarization'
                                 % node.label)


@dataclass
class MaxConstituentsResult:
    tree: Tree
    score: float
    binary_tree: Tree
    posteriors: ConstituentPosterior


def mcp_parse(corpus: Corpus, sentence, max_depth: Optional[int] = None,
              start: Optional[str] = None, labeled: bool = True,
              pcfg: Optional[IndexedPcfg] = None) -> MaxConstituentsResult:
    """Maximum Constituents Parse of ``sentence`` from a treebank.

    The treebank is transformed first: unary chains become single nodes
    and wider nodes are binarized.  Both transformations are undone on the
    result.  Trees whose (collapsed) root starts with the start label are
    mixed according to their corpus frequency.  Pass ``pcfg`` to reuse a
    reduction of the same transformed corpus (see :func:`mcp_grammar`).
    """
    if pcfg is None:
        pcfg = mcp_grammar(corpus, max_depth, start)
    tables = inside(pcfg, sentence)
    outside(pcfg, sentence, tables)
    post = constituent_posteriors(tables, pcfg)
    binary, score = maximum_constituents_parse(post, sentence, labeled,
                                               return_score=True)
    tree = expand_unaries(unbinarize(binary))
    return MaxConstituentsResult(tree, score, binary, post)


def mcp_grammar(corpus: Corpus, max_depth: Optional[int] = None,
                start: Optional[str] = None) -> IndexedPcfg:
    """Reduction of the collapsed and binarized treebank used by
    :func:`mcp_parse`."""
    if len(corpus) == 0:
        raise EmptyCorpus('cannot reduce an empty corpus')
    _check_reserved(corpus)
    if start is None:
        roots = Counter(tree.label for tree in corpus)
        start = min(roots, key=lambda label: (-roots[label], label))
    prepared = Corpus(binarize(collapse_unaries(tree)) for tree in corpus)
    roots = Counter(tree.label for tree in prepared
                    if tree.label.split('+')[0] == start)
    if not roots:
        raise ValueError('no corpus tree is rooted in %r' % start)
    total = sum(roots.values())
    pcfg = reduce(prepared, max_depth, start=max(roots, key=lambda x: (
        roots[x], x)))
    pcfg.start_weights = {label: count / total
                        for label, count in sorted(roots.items())}
    return pcfg


def enumerate_indexed_parses(pcfg: IndexedPcfg, sentence,
                             start: Optional[str] = None) -> list:
    """All parses as ``(indexed_tree, weight)`` pairs, by exhaustive
    top-down search; only for small sentences and grammars."""
    words = tuple(sentence)
    start = pcfg.start if start is None else start
    bylhs = defaultdict(list)
    for (lhs, rhs), weight in pcfg.rules.items():
        bylhs[lhs].append((rhs, weight))
    lexical = defaultdict(list)
    for (lhs, word), weight in pcfg.lexicon.items():
        lexical[lhs].append((word, weight))
    memo = {}

    def splits(i, j, parts):
        if parts == 1:
            yield (j, )
            return
        for k in range(i + 1, j - parts + 2):
            for rest in splits(k, j, parts - 1):
                yield (k, ) + rest

    def parses(sym, i, j):
        key = (sym, i, j)
        if key in memo:
            return memo[key]
        memo[key] = None  # guards against unary cycles
        result = []
        if j == i + 1:
            for word, weight in lexical.get(sym, ()):
                if word == words[i]:
                    result.append((Tree(sym, [word]), weight))
        for rhs, weight in bylhs.get(sym, ()):
            if len(rhs) > j - i:
                continue
            for ends in splits(i, j, len(rhs)):
                combos = [[]]
                lo = i
                for child, hi in zip(rhs, ends):
                    sub = parses(child, lo, hi)
                    if sub is None:
                        raise CyclicGrammar('unary cycle through %s' % child)
                    combos = [c + [s] for c in combos for s in sub]
                    lo = hi
                    if not combos:
                        break
                for combo in combos:
                    result.append((Tree(sym, [t for t, _ in combo]),
                                   weight * math.prod(w for _, w in combo)))
        memo[key] = result
        return result

    return parses(start, 0, len(words))
