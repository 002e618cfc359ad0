"""Evaluation: coverage, structural consistency, parse accuracy, crossing
brackets, and the probability of drawing a good test set.

Coverage counts sentences that get any parse at all; structural
consistency counts sentences for which the gold tree is among the parses
found; parse accuracy counts sentences whose single selected parse equals
the gold tree.  The three are kept apart on purpose.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from dop.errors import BadProbability, YieldMismatch
from dop.treebank import Corpus, Tree, productions, split_indices, spans


@dataclass(frozen=True)
class SentenceResult:
    """Outcome for one test sentence.

    ``gold_found`` tells whether the gold tree was among the parses the
    parser found; if it is None, only the proposed parse is known and
    structural consistency falls back to comparing it with the gold tree.
    """
    gold: Tree
    proposed: Optional[Tree] = None
    gold_found: Optional[bool] = None

    @property
    def parsable(self) -> bool:
        return self.proposed is not None

    @property
    def consistent(self) -> bool:
        if not self.parsable:
            return False
        if self.gold_found is not None:
            return self.gold_found
        return self.proposed == self.gold

    @property
    def exact(self) -> bool:
        return self.parsable and self.proposed == self.gold


def _check(results):
    if not results:
        raise ValueError('no results to evaluate')


def coverage(results: Sequence[SentenceResult]) -> float:
    _check(results)
    return sum(r.parsable for r in results) / len(results)


def structural_consistency(results: Sequence[SentenceResult]) -> float:
    _check(results)
    return sum(r.consistent for r in results) / len(results)


def parse_accuracy(results: Sequence[SentenceResult],
                   parsed_only: bool = False) -> float:
    """Fraction of exact matches.  Unparsed sentences count as errors
    unless ``parsed_only``, in which case they leave the denominator."""
    _check(results)
    if parsed_only:
        parsed = [r for r in results if r.parsable]
        return sum(r.exact for r in parsed) / len(parsed) if parsed else 0.0
    return sum(r.exact for r in results) / len(results)


def crossing_brackets(gold: Tree, proposed: Tree) -> int:
    """Number of proposed constituents whose span overlaps some gold span
    without either containing the other."""
    if gold.leaves() != proposed.leaves():
        raise YieldMismatch('gold and proposed trees have different yields')
    goldspans = {(i, j) for _, i, j in spans(gold)}
    result = 0
    for _, i, j in spans(proposed):
        if any(a < i < b < j or i < a < j < b for a, b in goldspans):
            result += 1
    return result


@dataclass(frozen=True)
class EvalReport:
    n: int
    coverage: float
    structural_consistency: float
    parse_accuracy: float
    zero_crossing_rate: float
    mean_crossing_brackets: float

    def as_keyvalue(self) -> str:
        return ''.join('%s=%s\n' % (key, _fmt(getattr(self, key)))
                       for key in self.__dataclass_fields__)

    def as_table(self) -> str:
        rows = [('sentences', str(self.n)),
                ('coverage', '%.2f%%' % (100 * self.coverage)),
                ('structural consistency',
                 '%.2f%%' % (100 * self.structural_consistency)),
                ('parse accuracy', '%.2f%%' % (100 * self.parse_accuracy)),
                ('zero crossing brackets',
                 '%.2f%%' % (100 * self.zero_crossing_rate)),
                ('mean crossing brackets', '%.3f' % self.mean_crossing_brackets)]
        width = max(len(name) for name, _ in rows)
        return ''.join('%-*s  %s\n' % (width, name, value)
                       for name, value in rows)


def _fmt(value):
    return repr(value) if isinstance(value, float) else str(value)


def evaluate(results: Sequence[SentenceResult]) -> EvalReport:
    """All metrics; crossing brackets are averaged over parsed sentences."""
    _check(results)
    crossings = [crossing_brackets(r.gold, r.proposed)
                 for r in results if r.parsable]
    return EvalReport(
        n=len(results),
        coverage=coverage(results),
        structural_consistency=structural_consistency(results),
        parse_accuracy=parse_accuracy(results),
        zero_crossing_rate=(sum(c == 0 for c in crossings) / len(crossings)
                            if crossings else 0.0),
        mean_crossing_brackets=(sum(crossings) / len(crossings)
                                if crossings else 0.0))


def poisson_binomial_pmf(probs: Sequence[float]) -> np.ndarray:
    """Distribution of the number of successes among independent
    Bernoulli trials, by repeated convolution."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or np.any(~np.isfinite(probs)) or np.any(
            (probs < 0) | (probs > 1)):
        raise BadProbability('probabilities must be finite and in [0, 1]')
    pmf = np.zeros(len(probs) + 1)
    pmf[0] = 1.0
    for n, p in enumerate(probs, 1):
        pmf[1:n + 1] = pmf[1:n + 1] * (1 - p) + pmf[:n] * p
        pmf[0] *= 1 - p
    return pmf


def poisson_binomial_tail(probs: Sequence[float], min_successes: int) -> float:
    """P(at least ``min_successes`` of the trials succeed)."""
    pmf = poisson_binomial_pmf(probs)
    if min_successes <= 0:
        return 1.0
    if min_successes >= len(pmf):
        return 0.0
    return float(min(math.fsum(pmf[min_successes:]), 1.0))


def producibility_simulation(corpus: Corpus, test_fraction: float,
                             trials: int, seed: int) -> np.ndarray:
    """Per-sentence chance that the gold tree is producible from the
    training part of a random split, given that the sentence is in the
    test part.

    Trial t uses the t-th child of ``numpy.random.SeedSequence(seed)``, so
    trials can be farmed out without changing the result.  Sentences that
    never land in a test set get NaN.
    """
    if trials < 1:
        raise ValueError('trials must be >= 1')
    prods = [frozenset(productions(tree)) for tree in corpus]
    total = Counter(p for ps in prods for p in ps)
    tested = np.zeros(len(corpus), dtype=int)
    good = np.zeros(len(corpus), dtype=int)
    for child in np.random.SeedSequence(seed).spawn(trials):
        _, test = split_indices(len(corpus), test_fraction, child)
        in_test = Counter(p for i in test for p in prods[i])
        for i in test:
            tested[i] += 1
            good[i] += all(total[p] > in_test[p] for p in prods[i])
    with np.errstate(invalid='ignore', divide='ignore'):
        return np.where(tested > 0, good / np.maximum(tested, 1), np.nan)


@dataclass(frozen=True)
class SplitAnalysis:
    per_sentence_producibility: tuple
    threshold_fraction: float
    tail_probability: float

    @property
    def min_successes(self) -> int:
        return _min_successes(self.threshold_fraction,
                              len(self.per_sentence_producibility))


def _min_successes(threshold, n):
    # tolerance guards against 0.96 * 75 = 71.99999999999999
    return max(0, math.ceil(threshold * n - 1e-9))


def split_analysis(probs: Sequence[float], threshold_fraction: float
                   ) -> SplitAnalysis:
    probs = tuple(float(p) for p in probs)
    tail = poisson_binomial_tail(
        probs, _min_successes(threshold_fraction, len(probs)))
    return SplitAnalysis(probs, threshold_fraction, tail)


def chance_of_test_set(analysis: SplitAnalysis) -> float:
    """Probability that at least ``threshold_fraction`` of the sentences
    are producible, treating sentences as independent."""
    return poisson_binomial_tail(analysis.per_sentence_producibility,
                                 analysis.min_successes)
