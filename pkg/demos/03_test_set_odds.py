# %% [markdown]
# # How lucky can a test set be?
#
# A sentence can only be parsed exactly if every production of its gold
# tree also occurs in the training part.  Simulating random splits gives a
# per-sentence chance of that; a Poisson-binomial tail turns the chances
# into the probability that a whole test set clears a threshold.

# %%
import numpy as np

from dop.evaluation import (SentenceResult, chance_of_test_set, evaluate,
                            poisson_binomial_tail, producibility_simulation,
                            split_analysis)
from dop.treebank import Corpus, Tree

rng = np.random.default_rng(0)
trees = []
for i in range(200):
    # common words most of the time, a rare one now and then
    word = f'w{rng.integers(0, 40)}' if rng.random() < 0.98 else f'rare{i}'
    trees.append(Tree('S', [Tree('N', [f'n{rng.integers(0, 8)}']),
                            Tree('V', [word])]))
corpus = Corpus(trees)

# %%
estimates = producibility_simulation(corpus, test_fraction=0.1, trials=500,
                                     seed=9)
known = estimates[~np.isnan(estimates)]
print(len(known), 'sentences seen in a test set')
print('mean producibility', known.mean().round(3))

# %% [markdown]
# Take 75 of the sentences as a test set.  A 96% threshold asks for at
# least 72 producible ones; lower thresholds are far easier to meet.

# %%
probs = known[:75]
for threshold in (0.96, 0.9, 0.8):
    analysis = split_analysis(probs, threshold)
    print(threshold, analysis.min_successes,
          round(chance_of_test_set(analysis), 4))
print('expected producible', probs.sum().round(2))
print([round(poisson_binomial_tail(probs, k), 4) for k in range(60, 76, 3)])

# %% [markdown]
# ## Coverage is not accuracy
#
# A parser can return something for nearly every sentence while the gold
# tree is among its parses far less often.  The report keeps both apart.

# %%
gold = Tree('S', [Tree('N', ['n1']), Tree('V', ['w1'])])
wrong = Tree('S', [Tree('V', ['n1']), Tree('N', ['w1'])])
results = ([SentenceResult(gold, gold, True)] * 60
           + [SentenceResult(gold, wrong, False)] * 39
           + [SentenceResult(gold, None)])
print(evaluate(results).as_table())
