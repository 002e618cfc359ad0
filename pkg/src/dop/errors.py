"""Exception hierarchy shared by all modules."""


class DopError(Exception):
    """Base class for domain errors (mapped to exit status 1 by the CLI)."""


class TreebankError(DopError, ValueError):
    """Malformed bracketed input; ``position`` is a character offset."""

    def __init__(self, message, position=None):
        if position is not None:
            message = '%s at position %d' % (message, position)
        super().__init__(message)
        self.position = position


class UnbalancedBrackets(TreebankError):
    pass


class EmptyNode(TreebankError):
    pass


class BadToken(TreebankError):
    pass


class EmptyTreeAfterStrip(DopError, ValueError):
    pass


class DegenerateSplit(DopError, ValueError):
    pass


class EmptyCorpus(DopError, ValueError):
    pass


class UnknownElementaryTree(DopError, KeyError):
    pass


class BadGrammarFile(DopError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = 'line %d: %s' % (line, message)
        super().__init__(message)
        self.line = line


class CyclicGrammar(DopError, ValueError):
    """Unary substitution cycle: a sentence would have infinitely many
    derivations."""


class UnknownWord(DopError, KeyError):
    def __init__(self, word, position):
        super().__init__('unknown word %r at position %d' % (word, position))
        self.word = word
        self.position = position

    def __str__(self):
        return self.args[0]


class NoParse(DopError):
    pass


class LimitExceeded(DopError):
    def __init__(self, count, limit):
        super().__init__('%d derivations exceed the limit of %d'
                         % (count, limit))
        self.count = count
        self.limit = limit


class BudgetExceeded(DopError):
    def __init__(self, count, budget):
        super().__init__('%d derivations exceed the budget of %d; '
                         'use Monte Carlo estimation instead' % (count, budget))
        self.count = count
        self.budget = budget


class YieldMismatch(DopError, ValueError):
    pass


class BadProbability(DopError, ValueError):
    pass
