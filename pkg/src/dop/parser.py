"""Parsing with an STSG: derivation forests and disambiguation.

The chart matches the frontier of each elementary tree against the
sentence one symbol at a time.  Frontiers are stored in a trie, so a chart
state ``(s, i, j)`` says that the frontier prefix ``s`` covers words i..j;
this is the usual dotted-item binarization, kept internal to this module.
An item ``(X, i, j)`` says that some derivation rooted in X yields words
i..j.  Elementary trees that share a frontier share their chart states.

Products are carried in log space and sums with log-sum-exp.
"""

from __future__ import annotations

import bisect
import graphlib
import heapq
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from dop.errors import (BudgetExceeded, CyclicGrammar, LimitExceeded, NoParse,
                        UnknownWord)
from dop.stsg import Stsg, fragments_with_sites
from dop.treebank import Tree

# two log probabilities closer than this are considered tied
TIE_TOLERANCE = 1e-12

SITE, WORD = 0, 1


def _logsumexp(values):
    if len(values) == 1:
        return values[0]
    top = max(values)
    if top == -math.inf:
        return top
    return top + math.log(math.fsum(math.exp(v - top) for v in values))


def _frontier(frag):
    result = []

    def visit(node):
        for child in node.children:
            if isinstance(child, str):
                result.append((WORD, child))
            elif child.is_site:
                result.append((SITE, child.label))
            else:
                visit(child)

    visit(frag)
    return tuple(result)


class _GrammarIndex:
    """Frontier trie of a grammar, built once per grammar."""

    def __init__(self, grammar):
        self.trans = [{}]
        self.parent = [-1]
        self.completions = [{}]
        self.vocabulary = set()
        for frag in sorted(grammar.entries, key=str):
            state = 0
            for sym in _frontier(frag):
                if sym[0] == WORD:
                    self.vocabulary.add(sym[1])
                nxt = self.trans[state].get(sym)
                if nxt is None:
                    nxt = len(self.trans)
                    self.trans[state][sym] = nxt
                    self.trans.append({})
                    self.parent.append(state)
                    self.completions.append({})
                state = nxt
            prob = grammar.probability(frag)
            self.completions[state].setdefault(frag.label, []).append(
                (frag, prob, math.log(prob)))
        self.logprob = [
            {label: math.log(math.fsum(p for _, p, _ in frags))
             for label, frags in comp.items()}
            for comp in self.completions]
        # items over a span must be finished before a unary elementary tree
        # (frontier = one site) builds on them
        sorter = graphlib.TopologicalSorter()
        labels = sorted({frag.label for frag in grammar.entries}
                        | {sym[1] for sym in self.trans[0] if sym[0] == SITE})
        for label in labels:
            sorter.add(label)
        for sym, state in sorted(self.trans[0].items()):
            if sym[0] == SITE:
                for root in sorted(self.completions[state]):
                    sorter.add(root, sym[1])
        try:
            self.rank = {label: n for n, label
                         in enumerate(sorter.static_order())}
        except graphlib.CycleError as err:
            raise CyclicGrammar('unary cycle among labels %s'
                                % ' '.join(err.args[1])) from None


def _index(grammar):
    if grammar._index is None:
        grammar._index = _GrammarIndex(grammar)
    return grammar._index


@dataclass(frozen=True, eq=False)
class Derivation:
    """An elementary tree with derivations for its substitution sites.

    Read in preorder (``steps``) this is the leftmost derivation.
    """
    fragment: Tree
    children: tuple
    probability: float

    @property
    def steps(self) -> tuple:
        result = [self.fragment]
        for child in self.children:
            result.extend(child.steps)
        return tuple(result)

    @property
    def key(self) -> tuple:
        return tuple(str(step) for step in self.steps)

    @property
    def result(self) -> Tree:
        kids = iter(self.children)

        def fill(node):
            if node.is_site:
                return next(kids).result
            return Tree(node.label, [
                child if isinstance(child, str) else fill(child)
                for child in node.children])

        return fill(self.fragment)

    def __eq__(self, other):
        if not isinstance(other, Derivation):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __str__(self):
        return ' . '.join(self.key)


class DerivationForest:
    """Packed chart of all derivations of a sentence from the start symbol.

    ``items`` maps ``(label, i, j)`` to the trie states that complete
    there; ``states`` maps ``(state, i, j)`` to back-pointers
    ``(k, child)``, meaning that the parent prefix covers i..k and the last
    frontier symbol covers k..j (``child`` is the item filling a site, or
    None for a word).
    """

    def __init__(self, grammar, sentence, items, states, order):
        self.grammar = grammar
        self.sentence = tuple(sentence)
        self.items = items
        self.states = states
        self.order = order
        self._inside = None
        self._count = None
        self._sampler = None

    @property
    def goal(self):
        return (self.grammar.start, 0, len(self.sentence))

    def __bool__(self):
        return self.goal in self.items

    @property
    def is_empty(self):
        return not self

    def inside(self) -> dict:
        """Log inside mass for every item and chart state."""
        if self._inside is None:
            idx = _index(self.grammar)
            ins = {}
            for key in self.order:
                if isinstance(key[0], str):
                    label, i, j = key
                    ins[key] = _logsumexp([
                        idx.logprob[s][label] + ins[s, i, j]
                        for s in self.items[key]])
                else:
                    s, i, j = key
                    parent = idx.parent[s]
                    ins[key] = _logsumexp([
                        (0.0 if parent == 0 else ins[parent, i, k])
                        + (0.0 if child is None else ins[child])
                        for k, child in self.states[key]])
            self._inside = ins
        return self._inside

    @property
    def log_mass(self) -> float:
        """Log of the summed probability of all derivations."""
        if not self:
            return -math.inf
        return self.inside()[self.goal]

    @property
    def mass(self) -> float:
        return math.exp(self.log_mass)

    def derivation_count(self) -> int:
        """Exact number of derivations, without enumerating them."""
        if not self:
            return 0
        if self._count is None:
            idx = _index(self.grammar)
            cnt = {}
            for key in self.order:
                if isinstance(key[0], str):
                    label, i, j = key
                    cnt[key] = sum(len(idx.completions[s][label]) * cnt[s, i, j]
                                   for s in self.items[key])
                else:
                    s, i, j = key
                    parent = idx.parent[s]
                    cnt[key] = sum((1 if parent == 0 else cnt[parent, i, k])
                                   * (1 if child is None else cnt[child])
                                   for k, child in self.states[key])
            self._count = cnt[self.goal]
        return self._count

    def __repr__(self):
        return 'DerivationForest(%r, %d items, %d states)' % (
            ' '.join(self.sentence), len(self.items), len(self.states))


def build_forest(grammar: Stsg, sentence: Sequence[str]) -> DerivationForest:
    """Chart-parse ``sentence``; an empty forest means no parse."""
    words = tuple(sentence)
    if not words:
        raise ValueError('cannot parse an empty sentence')
    idx = _index(grammar)
    for pos, word in enumerate(words):
        if word not in idx.vocabulary:
            raise UnknownWord(word, pos)
    n = len(words)
    trans, completions, rank = idx.trans, idx.completions, idx.rank
    states = {}
    items = {}
    states_at = defaultdict(list)
    labels_at = defaultdict(list)
    order = []
    for length in range(1, n + 1):
        for i in range(n - length + 1):
            j = i + length
            new = defaultdict(list)
            if length == 1:
                s = trans[0].get((WORD, words[i]))
                if s is not None:
                    new[s].append((i, None))
            for k in range(i + 1, j):
                right = labels_at.get((k, j), ())
                for p in states_at.get((i, k), ()):
                    tr = trans[p]
                    if not tr:
                        continue
                    if k == j - 1:
                        s = tr.get((WORD, words[k]))
                        if s is not None:
                            new[s].append((k, None))
                    for label in right:
                        s = tr.get((SITE, label))
                        if s is not None:
                            new[s].append((k, (label, k, j)))
            pending = defaultdict(list)
            for s in sorted(new):
                states[s, i, j] = tuple(new[s])
                order.append((s, i, j))
                states_at[i, j].append(s)
                for label in completions[s]:
                    pending[label].append(s)
            heap = [(rank[label], label) for label in pending]
            heapq.heapify(heap)
            while heap:
                _, label = heapq.heappop(heap)
                key = (label, i, j)
                items[key] = tuple(sorted(pending[label]))
                order.append(key)
                labels_at[i, j].append(label)
                s = trans[0].get((SITE, label))
                if s is None:
                    continue
                states[s, i, j] = ((i, key), )
                order.append((s, i, j))
                states_at[i, j].append(s)
                for root in completions[s]:
                    if root not in pending:
                        heapq.heappush(heap, (rank[root], root))
                    pending[root].append(s)
    forest = DerivationForest(grammar, words, items, states, order)
    return _prune(forest)


def _prune(forest):
    """Keep only what is reachable from the goal item."""
    goal = forest.goal
    if goal not in forest.items:
        return DerivationForest(forest.grammar, forest.sentence, {}, {}, [])
    parent = _index(forest.grammar).parent
    reachable = {goal}
    agenda = [goal]
    while agenda:
        key = agenda.pop()
        if isinstance(key[0], str):
            _, i, j = key
            nxt = [(s, i, j) for s in forest.items[key]]
        else:
            s, i, j = key
            nxt = []
            for k, child in forest.states[key]:
                if parent[s] != 0:
                    nxt.append((parent[s], i, k))
                if child is not None:
                    nxt.append(child)
        for key in nxt:
            if key not in reachable:
                reachable.add(key)
                agenda.append(key)
    return DerivationForest(
        forest.grammar, forest.sentence,
        {key: val for key, val in forest.items.items() if key in reachable},
        {key: val for key, val in forest.states.items() if key in reachable},
        [key for key in forest.order if key in reachable])


def _expand_item(forest, key, memo):
    if key in memo:
        return memo[key]
    idx = _index(forest.grammar)
    label, i, j = key
    result = []
    for s in forest.items[key]:
        seqs = _expand_state(forest, (s, i, j), memo)
        for frag, prob, _ in idx.completions[s][label]:
            for seq in seqs:
                result.append(Derivation(
                    frag, seq, prob * math.prod(d.probability for d in seq)))
    memo[key] = result
    return result


def _expand_state(forest, key, memo):
    if key in memo:
        return memo[key]
    parent = _index(forest.grammar).parent
    s, i, j = key
    result = []
    for k, child in forest.states[key]:
        prefixes = ([()] if parent[s] == 0
                    else _expand_state(forest, (parent[s], i, k), memo))
        if child is None:
            result.extend(prefixes)
        else:
            kids = _expand_item(forest, child, memo)
            result.extend(prefix + (kid, ) for prefix in prefixes
                          for kid in kids)
    memo[key] = result
    return result


def _sort_key(derivation):
    # quantize so that products computed in a different order still tie
    return (-float('%.12e' % derivation.probability), derivation.key)


def enumerate_derivations(forest: DerivationForest, limit: int = 10**6,
                          exhaustive: bool = True) -> list:
    """All derivations, most probable first (ties by their steps).

    If the forest holds more than ``limit`` derivations, raise
    :class:`LimitExceeded` when ``exhaustive``; otherwise return ``limit``
    of them (a deterministic selection, not necessarily the best ones).
    """
    if not forest:
        return []
    count = forest.derivation_count()
    if count > limit:
        if exhaustive:
            raise LimitExceeded(count, limit)
        result = []
        for deriv in _iter_item(forest, forest.goal):
            result.append(deriv)
            if len(result) == limit:
                break
    else:
        result = _expand_item(forest, forest.goal, {})
    return sorted(result, key=_sort_key)


def _iter_item(forest, key):
    idx = _index(forest.grammar)
    label, i, j = key
    for s in forest.items[key]:
        for frag, prob, _ in idx.completions[s][label]:
            for seq in _iter_state(forest, (s, i, j)):
                yield Derivation(
                    frag, seq, prob * math.prod(d.probability for d in seq))


def _iter_state(forest, key):
    parent = _index(forest.grammar).parent
    s, i, j = key
    for k, child in forest.states[key]:
        prefixes = ([()] if parent[s] == 0
                    else _iter_state(forest, (parent[s], i, k)))
        for prefix in prefixes:
            if child is None:
                yield prefix
            else:
                for kid in _iter_item(forest, child):
                    yield prefix + (kid, )


def _better(a, b):
    """Compare (logprob, key) pairs: higher probability, then least key."""
    if b is None:
        return True
    if a[0] > b[0] + TIE_TOLERANCE:
        return True
    if a[0] < b[0] - TIE_TOLERANCE:
        return False
    return a[1] < b[1]


def most_probable_derivation(forest: DerivationForest):
    """Max-product search over the forest.

    Returns ``(derivation, probability)``.  Among derivations tied in
    probability the one whose step sequence is least is chosen; this
    composes because complete derivations of one label are prefix-free.
    """
    if not forest:
        raise NoParse('no derivation of %r' % ' '.join(forest.sentence))
    idx = _index(forest.grammar)
    best = {}
    back = {}
    for key in forest.order:
        top = None
        if isinstance(key[0], str):
            label, i, j = key
            for s in forest.items[key]:
                lp, seq = best[s, i, j]
                for frag, _, logprob in idx.completions[s][label]:
                    cand = (logprob + lp, (str(frag), ) + seq)
                    if _better(cand, top):
                        top = cand
                        back[key] = (s, frag)
        else:
            s, i, j = key
            parent = idx.parent[s]
            for k, child in forest.states[key]:
                lp, seq = (0.0, ()) if parent == 0 else best[parent, i, k]
                if child is not None:
                    lp += best[child][0]
                    seq += best[child][1]
                cand = (lp, seq)
                if _better(cand, top):
                    top = cand
                    back[key] = (k, child)
        best[key] = top

    def build_item(key):
        label, i, j = key
        s, frag = back[key]
        kids = tuple(build_state((s, i, j)))
        return Derivation(frag, kids, forest.grammar.probability(frag)
                          * math.prod(d.probability for d in kids))

    def build_state(key):
        s, i, j = key
        k, child = back[key]
        parent = idx.parent[s]
        kids = [] if parent == 0 else build_state((parent, i, k))
        if child is not None:
            kids.append(build_item(child))
        return kids

    deriv = build_item(forest.goal)
    return deriv, deriv.probability


def tree_probability(tree: Tree, forest: DerivationForest) -> float:
    """Sum of the probabilities of all derivations of ``tree``."""
    if tuple(tree.leaves()) != forest.sentence:
        raise ValueError('tree does not yield the sentence of the forest')
    grammar = forest.grammar
    if tree.label != grammar.start:
        return 0.0
    frags = {}
    memo = {}

    def total(node):
        key = id(node)
        if key not in memo:
            result = 0.0
            for frag, sites in fragments_with_sites(node, grammar.max_depth,
                                                    frags):
                count = grammar.entries.get(frag)
                if count is None:
                    continue
                prob = count / grammar.root_totals[frag.label]
                for site in sites:
                    prob *= total(site)
                    if prob == 0:
                        break
                result += prob
            memo[key] = result
        return memo[key]

    return total(tree)


@dataclass
class MostProbableTree:
    tree: Tree
    probability: float
    tied: tuple = ()  # other trees within tolerance of the best

    def __iter__(self):
        return iter((self.tree, self.probability))


def tree_distribution(forest: DerivationForest, budget: int = 10**6) -> dict:
    """Exact probability of every tree in the forest, by enumeration."""
    count = forest.derivation_count()
    if count > budget:
        raise BudgetExceeded(count, budget)
    probs = defaultdict(list)
    for deriv in enumerate_derivations(forest, limit=budget):
        probs[deriv.result].append(deriv.probability)
    return {tree: math.fsum(ps) for tree, ps in probs.items()}


def exact_most_probable_tree(forest: DerivationForest,
                             budget: int = 10**6) -> MostProbableTree:
    """Most probable tree by summing enumerated derivations.

    Exponential in general; raises :class:`BudgetExceeded` when the forest
    holds more than ``budget`` derivations.
    """
    if not forest:
        raise NoParse('no derivation of %r' % ' '.join(forest.sentence))
    probs = tree_distribution(forest, budget)
    top = max(probs.values())
    tied = sorted(tree for tree, prob in probs.items()
                  if prob >= top * (1 - 1e-12))
    return MostProbableTree(tied[0], probs[tied[0]], tuple(tied[1:]))


class _Sampler:
    """Cumulative choice tables for top-down sampling."""

    def __init__(self, forest):
        idx = _index(forest.grammar)
        ins = forest.inside()
        self.forest = forest
        self.tables = {}
        for key in forest.order:
            if isinstance(key[0], str):
                label, i, j = key
                options, weights = [], []
                for s in forest.items[key]:
                    for frag, prob, logprob in idx.completions[s][label]:
                        options.append(((s, i, j), frag, prob))
                        weights.append(logprob + ins[s, i, j] - ins[key])
            else:
                s, i, j = key
                parent = idx.parent[s]
                options, weights = [], []
                for k, child in forest.states[key]:
                    options.append((None if parent == 0 else (parent, i, k),
                                    child))
                    weights.append((0.0 if parent == 0 else ins[parent, i, k])
                                   + (0.0 if child is None else ins[child])
                                   - ins[key])
            cum = list(np.cumsum(np.exp(weights)))
            self.tables[key] = (options, cum)

    def _choose(self, key, rng):
        options, cum = self.tables[key]
        if len(options) == 1:
            return options[0]
        n = bisect.bisect_right(cum, rng.random() * cum[-1])
        return options[min(n, len(options) - 1)]

    def item(self, key, rng):
        state, frag, prob = self._choose(key, rng)
        kids = self.state(state, rng)
        return Derivation(frag, tuple(kids),
                          prob * math.prod(d.probability for d in kids))

    def state(self, key, rng):
        kids = []
        while key is not None:
            prev, child = self._choose(key, rng)
            if child is not None:
                kids.append(self.item(child, rng))
            key = prev
        kids.reverse()
        return kids


def _sampler(forest):
    if forest._sampler is None:
        forest._sampler = _Sampler(forest)
    return forest._sampler


def sample_derivation(forest: DerivationForest, rng) -> Derivation:
    """Draw a derivation with probability proportional to its own.

    ``rng`` is a :class:`numpy.random.Generator` or a seed.
    """
    if not forest:
        raise NoParse('no derivation of %r' % ' '.join(forest.sentence))
    rng = np.random.default_rng(rng)
    return _sampler(forest).item(forest.goal, rng)


@dataclass
class MonteCarloEstimate:
    """Most frequent tree among sampled derivations."""
    tree: Tree
    frequency: float
    standard_error: float
    samples: int
    runner_up: Optional[Tree] = None
    runner_up_frequency: float = 0.0
    counts: dict = field(default_factory=dict, repr=False)

    def __iter__(self):
        return iter((self.tree, self.frequency, self.standard_error))

    @property
    def difference_error(self) -> float:
        """Standard error of the difference between the two leading
        frequencies."""
        f1, f2 = self.frequency, self.runner_up_frequency
        return math.sqrt(max(f1 + f2 - (f1 - f2) ** 2, 0.0) / self.samples)

    @property
    def separated(self) -> bool:
        """Leader ahead of the runner-up by more than 3 standard errors."""
        if self.runner_up is None:
            return True
        return (self.frequency - self.runner_up_frequency
                > 3 * self.difference_error)


def _summarize(tally, total):
    ranked = sorted(tally.items(), key=lambda x: (-x[1], str(x[0])))
    tree, count = ranked[0]
    freq = count / total
    runner, rfreq = None, 0.0
    if len(ranked) > 1:
        runner, rfreq = ranked[1][0], ranked[1][1] / total
    return MonteCarloEstimate(tree, freq, math.sqrt(freq * (1 - freq) / total),
                              total, runner, rfreq, dict(tally))


def monte_carlo_mpt(forest: DerivationForest, samples: int = 10000,
                    seed: int = 0, streams: int = 1,
                    sequential: bool = False,
                    batch: int = 1000) -> MonteCarloEstimate:
    """Estimate the most probable tree by sampling derivations.

    Samples are split over ``streams`` independent random streams derived
    from ``seed``; the tally is the same for a given ``(seed, streams)``
    however the streams are scheduled.  With ``sequential``, sampling
    stops early once the leading tree is more than three standard errors
    ahead of the runner-up (checked every ``batch`` samples), with
    ``samples`` as the upper bound.
    """
    if samples < 1:
        raise ValueError('samples must be >= 1')
    if not forest:
        raise NoParse('no derivation of %r' % ' '.join(forest.sentence))
    sampler = _sampler(forest)
    if streams == 1:
        rngs = [np.random.default_rng(seed)]
    else:
        rngs = [np.random.default_rng(child)
                for child in np.random.SeedSequence(seed).spawn(streams)]
    tally = Counter()
    drawn = 0
    step = batch if sequential else samples
    while drawn < samples:
        todo = min(step, samples - drawn)
        for w, rng in enumerate(rngs):
            share = todo // streams + (w < todo % streams)
            for _ in range(share):
                tally[sampler.item(forest.goal, rng).result] += 1
        drawn += todo
        if sequential and _summarize(tally, drawn).separated:
            break
    return _summarize(tally, drawn)
