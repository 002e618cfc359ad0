"""Rerun the brute-force witness searches and check that they still land
on the frozen corpora."""

from dop.treebank import parse_bracketed

import witnesses
from oracles import find_mcp_witness, find_mpd_witness


def test_mpd_search_reproduces_frozen_witness():
    seed, corpus, sentence = find_mpd_witness(range(8000))
    assert seed == 7968
    assert corpus == parse_bracketed(witnesses.MPD_VS_MPT)
    assert sentence == witnesses.MPD_VS_MPT_SENTENCE
    assert len(corpus) <= 3 and max(t.depth() for t in corpus) <= 3


def test_mcp_search_reproduces_frozen_witness():
    seed, corpus, sentence = find_mcp_witness(range(3000))
    assert seed == 2636
    assert corpus == parse_bracketed(witnesses.MCP_OUTSIDE)
    assert sentence == witnesses.MCP_OUTSIDE_SENTENCE
    assert len(corpus) <= 4
