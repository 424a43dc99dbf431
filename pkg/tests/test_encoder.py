import numpy as np
import pytest
import torch

from teenadapt.adaptation import Hyperparams
from teenadapt.encoder import (
    EncoderConfig,
    ToyEncoder,
    TrainingError,
    TransformerEncoder,
    encode,
    init_target_from_source,
    load_encoder,
    max_param_diff,
    parameter_vector,
    save_encoder,
    train_source_encoder,
)
from teenadapt.heads import Classifier
from teenadapt.synthetic import separable_platform

TEXTS = [f"w{i} teen{i % 7} adult{i % 5} filler" for i in range(50)]


def toy(dim=32, seed=0, **kw):
    return ToyEncoder(EncoderConfig(embedding_dim=dim, **kw), seed=seed)


def test_toy_shape_and_determinism():
    enc = toy()
    a, b = encode(enc, "hello world"), encode(enc, "hello world")
    assert a.shape == (32,) and a.dtype == np.float64
    assert np.array_equal(a, b) and np.all(np.isfinite(a))


def test_empty_text_rejected():
    with pytest.raises(ValueError):
        encode(toy(), "   ")


def test_truncation_at_max_tokens():
    enc = toy(max_tokens=4)
    assert np.array_equal(encode(enc, "a b c d"), encode(enc, "a b c d e f g"))


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(max_tokens=513)
    with pytest.raises(ValueError):
        EncoderConfig(backend="pretrained_transformer")
    with pytest.raises(ValueError):
        EncoderConfig(backend="lstm")


def test_init_identity_and_independence():
    src = toy(seed=3)
    tgt = init_target_from_source(src)
    assert max_param_diff(src, tgt) == 0.0
    assert tgt.role == "target" and src.role == "source"
    for t in TEXTS:
        assert np.array_equal(encode(src, t), encode(tgt, t))
    before = parameter_vector(src).clone()
    opt = torch.optim.SGD(tgt.parameters(), lr=0.1)
    tgt(TEXTS[:8]).pow(2).sum().backward()
    opt.step()
    assert torch.equal(parameter_vector(src), before)
    assert max_param_diff(src, tgt) > 0


def test_separable_training_accuracy():
    data = separable_platform(size=200, seed=0)
    enc, clf = toy(seed=0), Classifier(32, "adaptive", seed=1)
    hp = Hyperparams(encoder_lr=5e-3, head_lr=1e-3, epochs=4)
    enc, clf, curve = train_source_encoder(enc, clf, data, hp)
    assert len(curve) == 4
    with torch.no_grad():
        pred = clf(enc(data.texts)).argmax(-1).tolist()
    acc = np.mean(np.array(pred) == np.array(data.labels))
    assert acc >= 0.95


def test_zero_epochs_unchanged_and_determinism():
    data = separable_platform(size=40, seed=1)
    enc, clf = toy(seed=2), Classifier(32, "baseline", seed=2)
    before = parameter_vector(enc).clone()
    _, _, curve = train_source_encoder(enc, clf, data, Hyperparams(epochs=0))
    assert curve == [] and torch.equal(parameter_vector(enc), before)

    runs = []
    for _ in range(2):
        e, c = toy(seed=2), Classifier(32, "baseline", seed=2)
        train_source_encoder(e, c, data, Hyperparams(epochs=2, encoder_lr=1e-3, seed=9))
        runs.append(parameter_vector(e))
    assert torch.equal(runs[0], runs[1])


def test_nan_loss_aborts():
    data = separable_platform(size=20, seed=1)
    enc, clf = toy(), Classifier(32, "baseline")
    with torch.no_grad():
        enc.fc2.bias.fill_(float("nan"))
    with pytest.raises(TrainingError, match="non-finite"):
        train_source_encoder(enc, clf, data, Hyperparams(epochs=1))


def test_checkpoint_roundtrip(tmp_path):
    import json

    enc = init_target_from_source(toy(dim=8, seed=4, hidden_dim=8))
    sidecar = save_encoder(enc, tmp_path / "m.pt")
    manifest = json.loads(sidecar.read_text())
    assert {k: manifest[k] for k in ("backend", "embedding_dim", "max_tokens", "role", "seed")} == {
        "backend": "toy", "embedding_dim": 8, "max_tokens": 512, "role": "target", "seed": 4,
    }
    back = load_encoder(tmp_path / "m.pt")
    assert max_param_diff(enc, back) == 0.0 and back.role == "target"


def test_transformer_backend_768(tmp_path):
    transformers = pytest.importorskip("transformers")
    words = ["hello", "world", "lol", "omg", "school", "work"]
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("\n".join(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", *words]) + "\n")
    tok = transformers.BertTokenizer(str(vocab))
    cfg = transformers.BertConfig(
        vocab_size=len(words) + 5, hidden_size=768, num_hidden_layers=1, num_attention_heads=12,
        intermediate_size=64, max_position_embeddings=64,
    )
    torch.manual_seed(0)
    model = transformers.BertModel(cfg).eval()
    enc = TransformerEncoder(
        model, tok, EncoderConfig(backend="pretrained_transformer", embedding_dim=768, model_name="local", max_tokens=32)
    )
    v = encode(enc, "hello lol school")
    assert v.shape == (768,) and np.all(np.isfinite(v))
    assert np.array_equal(v, encode(enc, "hello lol school"))
    tgt = init_target_from_source(enc)
    assert np.array_equal(v, encode(tgt, "hello lol school"))
