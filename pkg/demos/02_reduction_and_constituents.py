# %% [markdown]
# # A node-indexed PCFG and the maximum constituents parse
#
# Every corpus node gets its own indexed copy of its label.  Rules between
# indexed and plain symbols reproduce the fragment grammar exactly, so
# inside probabilities give the same sentence mass.

# %%
import math
from collections import defaultdict

from dop.parser import build_forest, tree_distribution
from dop.reduction import (constituent_posteriors, enumerate_indexed_parses,
                           inside, inside_outside, mcp_parse, pcfg_viterbi,
                           project, reduce, write_rules)
from dop.stsg import extract_subtrees, is_producible
from dop.treebank import parse_bracketed

corpus = parse_bracketed('(S (A a) (B b)) (S (A a) (B b)) (S (C a) (D b))')
pcfg = reduce(corpus)
print(write_rules(pcfg))

# %%
sentence = ['a', 'b']
print('PCFG mass', inside(pcfg, sentence).sentence_mass)
print('STSG mass', build_forest(extract_subtrees(corpus), sentence).mass)

# %% [markdown]
# Several indexed parses project onto the same plain tree.  Their summed
# weight is that tree's probability under the fragment grammar.

# %%
sums = defaultdict(list)
for tree, weight in enumerate_indexed_parses(pcfg, sentence):
    sums[project(tree)].append(weight)
for tree, weights in sums.items():
    print(tree, len(weights), 'parses', round(math.fsum(weights), 6))
print(tree_distribution(build_forest(extract_subtrees(corpus), sentence)))

# %% [markdown]
# The PCFG Viterbi parse is a single indexed parse, so it is as good as
# the best derivation and no better.

# %%
print(pcfg_viterbi(pcfg, sentence))
post = constituent_posteriors(inside_outside(pcfg, sentence), pcfg)
print(sorted(post.table.items()))

# %% [markdown]
# ## Constituents the grammar cannot put together
#
# The maximum constituents parse picks the best label for each span
# independently.  Here it combines C with a Q P expansion that appears in
# no corpus tree.

# %%
corpus = parse_bracketed('''
(S (A d) (C d))
(S (C (P c) (P c)) (P d))
(S (P c) (C (Q c) (Q d)))
''')
result = mcp_parse(corpus, ['c', 'c', 'd'])
print(result.tree, 'expected constituents', round(result.score, 3))
print('producible:', is_producible(result.tree, extract_subtrees(corpus)))
