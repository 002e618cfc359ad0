"""Command line interface.

    dop extract corpus.mrg --max-depth 0 -o g.stsg
    dop reduce corpus.mrg -o g.pcfg
    dop parse g.stsg --method mpt-mc --samples 10000 --seed 1 "a b"
    dop sample g.stsg --seed 1 -n 5 "a b"
    dop evaluate g.stsg test.mrg --method mpd
    dop split corpus.mrg --test-fraction 0.1 --seed 7 --train train.mrg --test test.mrg
    dop analyze corpus.mrg --test-fraction 0.1 --trials 2000 --threshold 0.96 --seed 9

Exit status: 0 on success, 1 on a domain error (including no parse for
any input sentence), 2 on a usage error.
"""

import argparse
import os
import secrets
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from dop import __version__
from dop.errors import DopError, NoParse, UnknownWord
from dop.evaluation import (SentenceResult, evaluate, producibility_simulation,
                            split_analysis)
from dop.parser import (build_forest, exact_most_probable_tree,
                        monte_carlo_mpt, most_probable_derivation,
                        sample_derivation)
from dop.reduction import mcp_grammar, mcp_parse, pcfg_viterbi, reduce, \
    write_rules
from dop.stsg import (extract_subtrees, is_producible, load_grammar,
                      recover_corpus, serialize_grammar)
from dop.treebank import (Corpus, normalize_epsilon, parse_bracketed,
                          random_split, read_corpus, yield_of)

METHODS = ('mpd', 'mpt-exact', 'mpt-mc', 'mcp', 'pcfg-viterbi')


class UsageError(Exception):
    pass


def _write(path, text):
    """Write ``text`` to ``path`` atomically; None or '-' is stdout."""
    if path in (None, '-'):
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.dop-')
    try:
        with os.fdopen(fd, 'w', encoding='utf8') as out:
            out.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _read_text(path):
    if path == '-':
        return sys.stdin.read()
    with open(path, encoding='utf8') as inp:
        return inp.read()


def _load_corpus(path, epsilon):
    try:
        corpus = read_corpus(path)
    except DopError as err:
        raise DopError('%s: %s' % (path, err)) from None
    return Corpus(normalize_epsilon(tree, epsilon) for tree in corpus)


def _load_model(path, epsilon='strip', max_depth=0, start=None):
    """A grammar file, or a treebank from which a grammar is extracted.

    Returns ``(grammar, corpus)``; the corpus is None when it cannot be
    known (a grammar file with a depth cap).
    """
    text = _read_text(path)
    first = next((line for line in text.splitlines()
                  if line.strip() and not line.startswith(';')), '')
    try:
        if first.startswith('%'):
            grammar = load_grammar(text)
            corpus = (recover_corpus(grammar) if grammar.max_depth is None
                      else None)
            return grammar, corpus
        corpus = Corpus(normalize_epsilon(tree, epsilon)
                        for tree in parse_bracketed(text))
    except DopError as err:
        raise DopError('%s: %s' % (path, err)) from None
    return extract_subtrees(corpus, max_depth, start), corpus


def _seed(args, needed):
    if not needed:
        return None
    if args.seed is None:
        args.seed = secrets.randbelow(2 ** 31)
        print('seed=%d' % args.seed, file=sys.stderr)
    return args.seed


def _sentence_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


_STATE = {}


def _init_worker(state):
    _STATE.clear()
    _STATE.update(state)


def _disambiguate(job):
    """Parse one sentence with the configured method.

    Returns ``(tree or None, fields)``; ``fields`` is a list of
    ``(key, value)`` pairs describing the result.
    """
    index, words = job
    grammar = _STATE['grammar']
    method = _STATE['method']
    try:
        if method in ('mcp', 'pcfg-viterbi'):
            pcfg = _STATE['pcfg']
            if method == 'mcp':
                result = mcp_parse(None, words, pcfg=pcfg)
                return result.tree, [('score', result.score)]
            result = pcfg_viterbi(pcfg, words)
            return result.tree, [('prob', result.probability)]
        forest = build_forest(grammar, words)
        if not forest:
            return None, [('error', 'no parse')]
        if method == 'mpd':
            deriv, prob = most_probable_derivation(forest)
            return deriv.result, [('prob', prob)]
        if method == 'mpt-exact':
            result = exact_most_probable_tree(forest, _STATE['budget'])
            return result.tree, [('prob', result.probability),
                                 ('tied', len(result.tied))]
        result = monte_carlo_mpt(
            forest, _STATE['samples'], _sentence_seed(_STATE['seed'], index),
            sequential=_STATE['sequential'])
        return result.tree, [('frequency', result.frequency),
                             ('stderr', result.standard_error),
                             ('samples', result.samples),
                             ('separated', 'yes' if result.separated else 'no')]
    except (UnknownWord, NoParse) as err:
        return None, [('error', str(err))]


def _format_fields(fields):
    return '\t'.join('%s=%s' % (key, ('%.10g' % val)
                                if isinstance(val, float) else val)
                     for key, val in fields)


def _run_sentences(args, grammar, corpus, sentences):
    if args.method in ('mcp', 'pcfg-viterbi'):
        if corpus is None:
            raise DopError('method %s needs a treebank or a grammar without '
                           'depth cap' % args.method)
        if args.method == 'mcp':
            pcfg = mcp_grammar(corpus, grammar.max_depth, grammar.start)
        else:
            pcfg = reduce(corpus, grammar.max_depth, grammar.start)
    else:
        pcfg = None
    state = dict(grammar=grammar, pcfg=pcfg, method=args.method,
                 samples=args.samples, seed=args.seed, budget=args.budget,
                 sequential=getattr(args, 'sequential', False))
    jobs = list(enumerate(sentences))
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.workers, initializer=_init_worker,
                                 initargs=(state, )) as pool:
            return list(pool.map(_disambiguate, jobs))
    _init_worker(state)
    return [_disambiguate(job) for job in jobs]


def cmd_extract(args):
    corpus = _load_corpus(args.corpus, args.epsilon)
    grammar = extract_subtrees(corpus, args.max_depth, args.start)
    _write(args.output, serialize_grammar(grammar))


def cmd_reduce(args):
    corpus = _load_corpus(args.corpus, args.epsilon)
    _write(args.output, write_rules(reduce(corpus, args.max_depth, args.start)))


def _sentences(args):
    sentences = [s.split() for s in args.sentences]
    if args.input:
        sentences.extend(line.split() for line in
                         _read_text(args.input).splitlines() if line.strip())
    if not sentences:
        raise UsageError('no sentences given')
    return sentences


def cmd_parse(args):
    _seed(args, args.method == 'mpt-mc')
    grammar, corpus = _load_model(args.grammar, args.epsilon, args.max_depth)
    results = _run_sentences(args, grammar, corpus, _sentences(args))
    lines = ['%s\t%s\n' % ('(NO-PARSE)' if tree is None else tree,
                           _format_fields(fields))
             for tree, fields in results]
    _write(args.output, ''.join(lines))
    if all(tree is None for tree, _ in results):
        return 1


def cmd_sample(args):
    _seed(args, True)
    grammar, _ = _load_model(args.grammar, args.epsilon, args.max_depth)
    out = []
    for index, words in enumerate(_sentences(args)):
        forest = build_forest(grammar, words)
        rng = np.random.default_rng(_sentence_seed(args.seed, index))
        for _ in range(args.n):
            deriv = sample_derivation(forest, rng)
            out.append('%s\tprob=%.10g\tsteps=%s\n' % (
                deriv.result, deriv.probability, ' . '.join(deriv.key)))
    _write(args.output, ''.join(out))


def cmd_evaluate(args):
    _seed(args, args.method == 'mpt-mc')
    grammar, corpus = _load_model(args.grammar, args.epsilon, args.max_depth)
    gold = _load_corpus(args.test, 'strip')
    sentences = [yield_of(tree) for tree in gold]
    parsed = _run_sentences(args, grammar, corpus, sentences)
    results = []
    for tree, (proposed, _) in zip(gold, parsed):
        # mcp can return a tree outside the grammar, gold included
        found = proposed == tree or (tree.label == grammar.start
                                     and is_producible(tree, grammar))
        results.append(SentenceResult(tree, proposed,
                                      found if proposed is not None else None))
    report = evaluate(results)
    _write(args.output, report.as_keyvalue() if args.format == 'kv'
           else report.as_table())
    if report.coverage == 0:
        return 1


def cmd_split(args):
    _seed(args, True)
    corpus = read_corpus(args.corpus)
    train, test = random_split(corpus, args.test_fraction, args.seed)
    _write(args.train, train.dumps())
    _write(args.test, test.dumps())


def cmd_analyze(args):
    _seed(args, True)
    corpus = _load_corpus(args.corpus, args.epsilon)
    estimates = producibility_simulation(corpus, args.test_fraction,
                                         args.trials, args.seed)
    known = [p for p in estimates if p == p]
    analysis = split_analysis(known, args.threshold)
    lines = ['sentence=%d\tproducibility=%s\n' % (n, '%.6f' % p if p == p
                                                  else 'nan')
             for n, p in enumerate(estimates)]
    lines.append('sentences=%d\n' % len(known))
    lines.append('threshold=%g\n' % args.threshold)
    lines.append('min_successes=%d\n' % analysis.min_successes)
    lines.append('expected_producible=%.6f\n' % sum(known))
    lines.append('tail_probability=%.10g\n' % analysis.tail_probability)
    _write(args.output, ''.join(lines))


def _positive(value):
    value = int(value)
    if value < 1:
        raise argparse.ArgumentTypeError('must be >= 1')
    return value


def _depth(value):
    value = int(value)
    if value < 0:
        raise argparse.ArgumentTypeError('must be >= 0 (0 = unbounded)')
    return value


def _fraction(value):
    value = float(value)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError('must lie strictly between 0 and 1')
    return value


def build_argparser():
    parser = argparse.ArgumentParser(
        prog='dop', description='Data-oriented parsing with all treebank '
        'fragments.')
    parser.add_argument('--version', action='version', version=__version__)
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p, epsilon='strip'):
        p.add_argument('-o', '--output', help='output file (default stdout)')
        p.add_argument('--epsilon', choices=('strip', 'keep'), default=epsilon,
                       help='treatment of empty elements (default %(default)s)')

    def grammar_opts(p):
        p.add_argument('--max-depth', type=_depth, default=0,
                       help='largest fragment depth, 0 = unbounded')
        p.add_argument('--start', help='start symbol (default: most '
                       'frequent root label)')

    def method_opts(p):
        p.add_argument('--method', choices=METHODS, default='mpd')
        p.add_argument('--samples', type=_positive, default=10000,
                       help='Monte Carlo samples per sentence')
        p.add_argument('--sequential', action='store_true',
                       help='stop sampling once the best tree is '
                       'significantly ahead')
        p.add_argument('--budget', type=_positive, default=10 ** 6,
                       help='derivation budget for mpt-exact')
        p.add_argument('--seed', type=int)
        p.add_argument('--workers', type=_positive, default=1)
        p.add_argument('--max-depth', type=_depth, default=0,
                       help='depth cap when GRAMMAR is a treebank')

    p = sub.add_parser('extract', help='treebank -> fragment grammar')
    p.add_argument('corpus')
    grammar_opts(p)
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser('reduce', help='treebank -> node-indexed PCFG')
    p.add_argument('corpus')
    grammar_opts(p)
    common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser('parse', help='parse sentences')
    p.add_argument('grammar', help='grammar file or treebank')
    p.add_argument('sentences', nargs='*', help='sentences (words separated '
                   'by spaces)')
    p.add_argument('--input', help='file with one sentence per line')
    method_opts(p)
    common(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser('sample', help='sample derivations')
    p.add_argument('grammar')
    p.add_argument('sentences', nargs='*')
    p.add_argument('--input')
    p.add_argument('-n', type=_positive, default=10)
    p.add_argument('--seed', type=int)
    p.add_argument('--max-depth', type=_depth, default=0)
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser('evaluate', help='parse a test treebank and report '
                       'metrics')
    p.add_argument('grammar')
    p.add_argument('test')
    p.add_argument('--format', choices=('table', 'kv'), default='table')
    method_opts(p)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('split', help='random train/test split')
    p.add_argument('corpus')
    p.add_argument('--test-fraction', type=_fraction, default=0.1)
    p.add_argument('--seed', type=int)
    p.add_argument('--train', required=True)
    p.add_argument('--test', required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser('analyze', help='producibility under random splits')
    p.add_argument('corpus')
    p.add_argument('--test-fraction', type=_fraction, default=0.1)
    p.add_argument('--trials', type=_positive, default=1000)
    p.add_argument('--threshold', type=float, default=0.96)
    p.add_argument('--seed', type=int)
    common(p, epsilon='keep')
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    parser = build_argparser()
    args, extra = parser.parse_known_args(argv)
    # sentences may follow the options
    if extra and hasattr(args, 'sentences') and not any(
            arg.startswith('-') for arg in extra):
        args.sentences.extend(extra)
    elif extra:
        parser.error('unrecognized arguments: %s' % ' '.join(extra))
    try:
        return args.func(args) or 0
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print('dop: error: %s' % err, file=sys.stderr)
        return 2
    except (DopError, OSError, ValueError) as err:
        print('dop: error: %s' % err, file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
