import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stdgi.encoder import EncoderParams, encode
from stdgi.errors import DimensionError, ValidationError
from stdgi.graph import make_graph, normalize_adjacency
from stdgi.mi import (DiscriminatorParams, corrupt, corrupt_batch, discriminate, infomax_loss,
                      pair_accuracy)
from stdgi.numerics import Tensor, check_gradients
from stdgi.params import tensors


def sorted_rows(a):
    return a[np.lexsort(a.T[::-1])]


def test_corrupt_preserves_row_multiset(rng):
    x = rng.normal(size=(9, 3))
    np.testing.assert_array_equal(sorted_rows(corrupt(x, rng)), sorted_rows(x))


def test_corrupt_two_nodes_swap_frequency():
    x = np.array([[1.0, 0.0], [2.0, 0.0]])
    swaps = sum(corrupt(x, np.random.default_rng(seed))[0, 0] == 2.0 for seed in range(10_000))
    assert abs(swaps / 10_000 - 0.5) < 0.02


class IdentityRng:
    def permutation(self, n):
        return np.arange(n)


def test_corrupt_identity_permutation_stub(rng):
    x = rng.normal(size=(5, 2))
    np.testing.assert_array_equal(corrupt(x, IdentityRng()), x)


def test_corrupt_single_node_rejected(rng):
    with pytest.raises(ValidationError):
        corrupt(np.zeros((1, 2)), rng)
    with pytest.raises(ValidationError):
        corrupt_batch(np.zeros((3, 1, 2)), rng)


def test_corrupt_batch_preserves_marginals_per_step(rng):
    x = rng.normal(size=(6, 10, 2))
    y = corrupt_batch(x, rng)
    for t in range(6):
        np.testing.assert_array_equal(sorted_rows(y[t]), sorted_rows(x[t]))
        np.testing.assert_allclose(y[t].mean(axis=0), x[t].mean(axis=0), atol=1e-15)
        np.testing.assert_allclose(y[t].std(axis=0), x[t].std(axis=0), atol=1e-15)
    # rows move together: (speed, time-of-day) pairs survive intact
    assert {tuple(r) for r in y[0]} == {tuple(r) for r in x[0]}


def test_zero_discriminator_gives_half(rng):
    p = DiscriminatorParams.init(rng)
    for t in tensors(p):
        t.data[:] = 0
    assert discriminate(rng.normal(size=128), rng.normal(size=2), p).item() == 0.5


def test_discriminator_matches_hand_forward(rng):
    p = DiscriminatorParams.init(rng, embed_dim=4, feat_dim=2)
    p.b1.data[:] = rng.normal(size=6) * 0.1
    p.b2.data[:] = 0.3
    h, x = rng.normal(size=4), rng.normal(size=2)
    z = np.concatenate([h, x])
    hidden = [max(0.0, sum(z[i] * p.w1.data[i, j] for i in range(6)) + p.b1.data[j]) for j in range(6)]
    logit = sum(hidden[j] * p.w2.data[j, 0] for j in range(6)) + p.b2.data[0]
    ref = 1.0 / (1.0 + math.exp(-logit))
    assert discriminate(h, x, p).item() == pytest.approx(ref, abs=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 5.0))
def test_scores_in_open_unit_interval(seed, scale):
    rng = np.random.default_rng(seed)
    p = DiscriminatorParams.init(rng, embed_dim=8)
    s = discriminate(rng.normal(0, scale, (16, 8)), rng.normal(0, scale, (16, 2)), p).data
    assert s.shape == (16, 1)
    assert np.all((s > 0) & (s < 1))


def test_saturated_scores_are_clamped_not_errors():
    loss = infomax_loss([1.0, 0.0], [1.0, 0.0]).item()
    assert math.isfinite(loss) and loss > 0


def test_discriminator_dimension_error(rng):
    p = DiscriminatorParams.init(rng)
    with pytest.raises(DimensionError):
        discriminate(np.zeros(127), np.zeros(2), p)


def test_infomax_uninformed_is_ln2():
    assert infomax_loss([0.5] * 4, [0.5] * 4).item() == pytest.approx(math.log(2), abs=1e-15)


def test_infomax_perfect_tends_to_zero():
    assert infomax_loss([1.0], [0.0]).item() == pytest.approx(-math.log(1 - 1e-7), abs=1e-15)
    assert infomax_loss([1.0], [0.0]).item() < 1e-6


def test_infomax_hand_value():
    expected = -(math.log(0.9) + math.log(0.8)) / 2
    assert infomax_loss([0.9], [0.2]).item() == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.1643, abs=1e-4)


@settings(max_examples=40)
@given(st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=20),
       st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=20), st.randoms())
def test_infomax_nonnegative_and_permutation_invariant(pos, neg, rnd):
    base = infomax_loss(pos, neg).item()
    assert base >= 0
    p2, n2 = pos[:], neg[:]
    rnd.shuffle(p2)
    rnd.shuffle(n2)
    assert infomax_loss(p2, n2).item() == pytest.approx(base, rel=1e-12, abs=1e-15)


def test_pair_accuracy():
    assert pair_accuracy([0.9, 0.2], [0.1, 0.7]) == 0.5
    assert pair_accuracy([0.9], [0.1]) == 1.0


def test_end_to_end_gradient_through_encoder_and_discriminator(rng):
    g = normalize_adjacency(make_graph("ring", 5, rng))
    enc = EncoderParams.init(rng, 2, 4, 3)
    disc = DiscriminatorParams.init(rng, embed_dim=3, feat_dim=2)
    for t in (enc.linear_b, enc.gc1_b, enc.gc2_b, disc.b1):
        t.data[:] = rng.normal(0, 0.3, t.shape)
    x = rng.normal(size=(5, 2))
    fut = rng.normal(size=(5, 2))
    neg = corrupt(fut, rng)

    def loss():
        h = encode(x, g, enc)
        return infomax_loss(discriminate(h, fut, disc), discriminate(h, neg, disc))

    assert max(check_gradients(loss, tensors(enc) + tensors(disc))) < 1e-4
