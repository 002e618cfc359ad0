"""Data-oriented parsing: treebank fragments as a stochastic tree
substitution grammar, with the usual disambiguation criteria."""

__version__ = '0.1.0'
