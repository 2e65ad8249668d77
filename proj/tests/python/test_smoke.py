"""Smoke tests for the _corpuscle extension module."""

import math
import os

import pytest

import _corpuscle as cc

FIXTURES = os.environ.get("CORPUSCLE_FIXTURE_DIR", "tests/fixtures")


@pytest.fixture(scope="module")
def vocab():
    return cc.BpeVocab.load(
        os.path.join(FIXTURES, "fixture_vocab.json"),
        os.path.join(FIXTURES, "fixture_merges.txt"),
    )


def test_normalize_and_chunk():
    assert cc.normalize_text("ﬁn\u0000ale") == "finale"
    policy = cc.ChunkPolicy()
    chunks = cc.chunk_document("d", "x" * 3000, policy)
    assert [c.char_end - c.char_start for c in chunks] == [1200, 1200, 600]
    assert all(c.scorable for c in chunks)
    short = cc.chunk_document("d", "x" * 100, policy)
    assert len(short) == 1 and not short[0].scorable


def test_tokenizer_roundtrip(vocab):
    text = "Bonjour le monde ! L'été arrive."
    ids = cc.bpe_encode(text, vocab)
    assert ids and all(0 <= i < vocab.size for i in ids)
    assert cc.bpe_decode(ids, vocab) == text
    assert cc.pretokenize("isn't it") == ["isn", "'t", " it"]
    assert vocab.end_of_text_id == vocab.size - 1


def test_quantile():
    assert cc.shard_loss_cutoff([1.0, 2.0, 3.0, 4.0, 5.0], 0.2) == pytest.approx(1.8)


def test_metrics():
    r = cc.rouge_scores("le chat", "le chat noir")
    assert r.r1.precision == pytest.approx(1.0)
    assert r.r1.f1 == pytest.approx(0.8)

    b = cc.corpus_bleu(["le chat dort sur le tapis ."], ["le chat dort sur le tapis ."])
    assert b.bleu == pytest.approx(100.0)

    em, f1 = cc.squad_em_f1("Tour Eiffel", ["la Tour Eiffel"])
    assert (em, f1) == (1, 1.0)
    em, f1 = cc.squad_em_f1("Tour Eiffel Paris", ["la Tour Eiffel"])
    assert em == 0 and f1 == pytest.approx(0.8)

    assert cc.clip_sentences("M. Dupont est né. Fin.", 1) == "M."

    tok_ppl, char_ppl = cc.perplexities(100.0, 50, 200)
    assert tok_ppl == pytest.approx(math.exp(2.0))
    assert char_ppl == pytest.approx(math.exp(0.5))


def test_prompts():
    assert cc.build_summarization_prompt("A") == "A\nPour résumer :"
    assert cc.build_qa_prompt("T", "C", "Q") == (
        "Titre: T\nContexte: C\n\nQuestion: Q\n\nRéponse:"
    )
    assert cc.build_translation_prompt("English", "French", "X") == (
        "English phrase: X\nFrench phrase:"
    )


def test_bootstrap():
    est = cc.expected_max_toxicity([0.1, 0.9], n=2, iterations=100, seed=1)
    assert est.mean == pytest.approx(0.9)
    assert est.std == pytest.approx(0.0)
    p = cc.toxic_probability([0.9] * 10 + [0.1] * 40, n=25, threshold=0.5,
                             iterations=20000, seed=5)
    expect = 1.0 - math.exp(
        math.lgamma(41) - math.lgamma(26) - math.lgamma(16)
        - (math.lgamma(51) - math.lgamma(26) - math.lgamma(26))
    )
    assert p == pytest.approx(expect, abs=0.02)
