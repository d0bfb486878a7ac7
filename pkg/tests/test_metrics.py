import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from editaug.errors import EmptyInputError
from editaug.metrics import bench, bleu, evaluate
from editaug.pairs import SentencePair
from editaug.training import Adam, TrainConfig, iterate_batches, train_step
from editaug.vocab import Sentence

from test_transformer import make_state, sent

words_st = st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=12)


def test_bleu_identity_is_one():
    s = sent("the cat sat down")
    assert bleu(s, s) == pytest.approx(1.0)


def test_bleu_no_overlap_is_zero():
    assert bleu(sent("aa bb cc"), sent("dd ee ff")) == 0.0


def test_bleu_hand_computed_clipped_precision():
    # candidate: the the the cat; reference: the cat sat down
    # p1 = 2/4 (clip: the->1, cat->1); add-one smoothing above order 1:
    # p2 = (1+1)/(3+1); p3 = (0+1)/(2+1); p4 = (0+1)/(1+1); BP = 1
    expect = math.exp(
        (math.log(2 / 4) + math.log(2 / 4) + math.log(1 / 3) + math.log(1 / 2)) / 4
    )
    got = bleu(sent("the the the cat"), sent("the cat sat down"))
    assert got == pytest.approx(expect, abs=1e-9)


def test_bleu_brevity_penalty():
    # identical prefix, candidate half as long: BP = exp(1 - 4/2)
    cand, ref = sent("aa bb"), sent("aa bb cc dd")
    long_cand = bleu(ref, ref)
    short = bleu(cand, ref)
    assert short < long_cand
    # all precisions are 1 or smoothed-1 except none clipped; check BP factor
    p2 = (1 + 1) / (1 + 1)
    p3 = (0 + 1) / (0 + 1)
    expect = math.exp(1 - 4 / 2) * math.exp(
        (math.log(1.0) + math.log(p2) + math.log(p3) + math.log(1.0)) / 4
    )
    assert short == pytest.approx(expect, abs=1e-9)


def test_bleu_empty_raises():
    from types import SimpleNamespace

    empty = SimpleNamespace(words=())
    with pytest.raises(EmptyInputError):
        bleu(sent("a"), empty)
    with pytest.raises(EmptyInputError):
        bleu(empty, sent("a"))


@given(words_st)
def test_bleu_self_is_always_one(words):
    s = Sentence(words=tuple(words))
    assert bleu(s, s) == pytest.approx(1.0)


@given(words_st, words_st)
def test_bleu_bounded(a, b):
    score = bleu(Sentence(words=tuple(a)), Sentence(words=tuple(b)))
    assert 0.0 <= score <= 1.0 + 1e-12


def test_evaluate_empty_raises():
    state = make_state()
    with pytest.raises(EmptyInputError):
        evaluate(state, [])


def test_evaluate_unknown_mode():
    state = make_state()
    with pytest.raises(ValueError):
        evaluate(state, [SentencePair(sent("alpha"), sent("beta"), 0.5)], mode="magic")


def test_evaluate_posterior_and_prior_run():
    state = make_state()
    pairs = [SentencePair(sent("alpha beta"), sent("beta gamma"), 0.4),
             SentencePair(sent("gamma delta"), sent("delta alpha"), 0.4)]
    post = evaluate(state, pairs, mode="posterior", seed=1)
    prior = evaluate(state, pairs, mode="prior", seed=1)
    for rep in (post, prior):
        assert rep.count == 2
        assert math.isfinite(rep.mean_loss) and rep.mean_loss > 0
        assert 0.0 <= rep.mean_bleu <= 1.0
    assert "mean_loss" in post.summary() or "loss" in post.summary()


def test_single_pair_overfit_reaches_high_bleu():
    state = make_state(seed=11)
    pair = SentencePair(sent("alpha beta gamma"), sent("alpha delta gamma"), 0.5)
    opt = Adam(state.params, 5e-3, 20)
    rng = np.random.default_rng(0)
    cfg = TrainConfig(batch_size=2, identity_rate=0.0, seed=0)
    stream = iterate_batches([pair, pair], cfg, rng)
    for _ in range(250):
        train_step(next(stream), state, opt, rng, dropout=False)
    rep = evaluate(state, [pair], mode="posterior", seed=3)
    assert rep.mean_bleu >= 0.9


def test_bench_rejects_zero_reps():
    state = make_state()
    with pytest.raises(ValueError):
        bench(state, [sent("alpha beta")], repetitions=0)


def test_bench_statistics_ordering():
    state = make_state()
    rep = bench(state, [sent("alpha beta"), sent("beta gamma alpha")], repetitions=5)
    assert rep.mean_ms > 0 and rep.median_ms > 0 and rep.p95_ms > 0
    assert rep.median_ms <= rep.p95_ms
    assert rep.repetitions == 5
    assert "median" in rep.summary()
    assert rep.csv().startswith("repetitions,")


def test_bench_training_throughput():
    state = make_state()
    pairs = [SentencePair(sent("alpha beta"), sent("beta gamma"), 0.4)]
    rep = bench(state, [sent("alpha beta")], repetitions=2, train_pairs=pairs)
    assert rep.train_steps_per_sec > 0
