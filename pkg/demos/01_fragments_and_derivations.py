# %% [markdown]
# # Fragments, derivations and the most probable tree
#
# A treebank grammar here is nothing more than every fragment of every
# corpus tree, counted.  This walk-through builds one from a single tree,
# parses with it, and then shows a small corpus where the single best
# derivation points at the wrong tree.

# %%
from dop.parser import (build_forest, enumerate_derivations,
                        exact_most_probable_tree, monte_carlo_mpt,
                        most_probable_derivation, tree_distribution)
from dop.stsg import extract_subtrees, subtree_count_per_node
from dop.treebank import parse_bracketed

corpus = parse_bracketed('(S (A a) (B b))')
grammar = extract_subtrees(corpus)
for frag, count in sorted(grammar.entries.items()):
    print(f'{grammar.probability(frag):.2f}  {frag}')

# %% [markdown]
# Six fragments: four rooted in S and one each for A and B.  The count per
# node follows a product rule, so it can be checked without enumerating.

# %%
print(subtree_count_per_node(corpus[0]))

# %% [markdown]
# The sentence "a b" has four derivations of probability 1/4, all of which
# build the corpus tree.

# %%
forest = build_forest(grammar, ['a', 'b'])
for deriv in enumerate_derivations(forest):
    print(f'{deriv.probability:.3f}', ' + '.join(deriv.key))
print('mass', forest.mass)

# %% [markdown]
# ## When the best derivation is not the best tree
#
# In the corpus below, "b a" has a derivation of probability 1/16 for
# (S (P b) (A a)).  No single derivation of (S (P b) (A (P a))) comes close,
# yet summed over all of its derivations that tree wins.

# %%
corpus = parse_bracketed('''
(S (P a) (A (P a)))
(S (P b) (A a))
(S (A (P a)) (P b))
''')
grammar = extract_subtrees(corpus)
forest = build_forest(grammar, ['b', 'a'])
deriv, prob = most_probable_derivation(forest)
print('best derivation ', deriv.result, round(prob, 4))
for tree, p in sorted(tree_distribution(forest).items(), key=lambda x: -x[1]):
    print('tree probability', tree, round(p, 4))

# %% [markdown]
# Enumeration is fine at this size.  Sampling derivations in proportion to
# their probability estimates the same ranking, with a standard error.

# %%
print(exact_most_probable_tree(forest))
est = monte_carlo_mpt(forest, samples=20000, seed=1)
print(est.tree, est.frequency * forest.mass, est.standard_error)
