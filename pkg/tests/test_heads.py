import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradcheck import REL_TOL, NoSmoothDirection, directional_error
from teenadapt.heads import ADAPTIVE_HIDDEN, INIT_RANGE, Classifier, Discriminator, classify, discriminate


def test_zero_discriminator_is_half():
    d = Discriminator(4, 3)
    with torch.no_grad():
        for p in d.parameters():
            p.zero_()
    assert discriminate(d, np.ones(4)) == 0.5


def test_hand_set_one_d_discriminator():
    d = Discriminator(1, 1)
    with torch.no_grad():
        d.fc1.weight.fill_(1.0)
        d.fc1.bias.zero_()
        d.fc2.weight.fill_(1.0)
        d.fc2.bias.zero_()
    assert discriminate(d, np.array([2.0])) == pytest.approx(1 / (1 + math.exp(-2.0)), abs=1e-15)
    assert discriminate(d, np.array([2.0])) == pytest.approx(0.8808, abs=1e-4)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        discriminate(Discriminator(4), np.zeros(5))
    with pytest.raises(ValueError):
        classify(Classifier(4), np.zeros(3))


def test_classifier_shapes_and_init():
    c = Classifier(8, "adaptive", seed=0)
    assert c.hidden_width == ADAPTIVE_HIDDEN == 512
    assert c.net[0].out_features == 512
    assert Classifier(8, "baseline").hidden_width is None
    assert len(Classifier(8, "baseline").net) == 1
    for p in c.parameters():
        assert p.abs().max() <= INIT_RANGE
    with pytest.raises(ValueError):
        Classifier(8, "deep")


def test_zero_output_layer_is_uniform():
    c = Classifier(6, "adaptive", seed=1)
    with torch.no_grad():
        c.output_layer.weight.zero_()
        c.output_layer.bias.zero_()
    assert np.allclose(classify(c, np.random.default_rng(0).normal(size=6)), [0.5, 0.5], atol=0)


def test_softmax_closed_form():
    c = Classifier(1, "baseline")
    with torch.no_grad():
        c.output_layer.weight.copy_(torch.tensor([[math.log(3.0)], [0.0]]))
        c.output_layer.bias.zero_()
    assert np.allclose(classify(c, np.array([1.0])), [0.75, 0.25], atol=1e-12)


def test_seeded_init_reproducible():
    a, b = Discriminator(8, seed=5), Discriminator(8, seed=5)
    assert all(torch.equal(x, y) for x, y in zip(a.parameters(), b.parameters()))


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(v=arrays(np.float64, (4, 8), elements=finite), seed=st.integers(0, 100))
def test_softmax_normalization(v, seed):
    for variant in ("adaptive", "baseline"):
        p = classify(Classifier(8, variant, seed=seed), v)
        assert np.all(p >= 0) and np.all(p <= 1)
        assert np.allclose(p.sum(-1), 1.0, atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(v=arrays(np.float64, (8,), elements=st.floats(-20, 20)), seed=st.integers(0, 100))
def test_discriminator_open_interval(v, seed):
    p = discriminate(Discriminator(8, 16, seed=seed), v)
    assert 0.0 < p < 1.0


def test_head_gradients_match_finite_differences():
    g = torch.Generator().manual_seed(0)
    errors, draw = [], 0
    while len(errors) < 100:
        d = Discriminator(8, 8, seed=draw)
        c = Classifier(8, "adaptive", seed=draw)
        x = torch.randn(5, 8, generator=g, dtype=torch.float64)
        y = torch.randint(0, 2, (5,), generator=g)
        draw += 1
        try:
            e_d = directional_error(
                lambda: torch.nn.functional.logsigmoid(d(x)).sum(), d.parameters(), g, relu_inputs=lambda: [d.fc1(x)]
            )
            e_c = directional_error(
                lambda: torch.nn.functional.cross_entropy(c(x), y), c.parameters(), g, relu_inputs=lambda: [c.net[0](x)]
            )
        except NoSmoothDirection:
            continue
        errors.append(max(e_d, e_c))
    assert draw < 200
    assert max(errors) <= REL_TOL
