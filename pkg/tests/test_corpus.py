import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teenadapt.corpus import (
    CorpusError,
    PlatformDataset,
    TextRecord,
    dataset_stats,
    load_dataset,
    map_age_to_label,
    stratified_sample,
    train_test_split,
    write_jsonl,
)


def make_ds(labels, platform="synthetic:t", texts=None):
    texts = texts or [f"text {i}" for i in range(len(labels))]
    recs = tuple(TextRecord(str(i), platform, t, y) for i, (t, y) in enumerate(zip(texts, labels)))
    return PlatformDataset(platform, recs, "mem")


def ratio_ds(n, tr):
    k = round(n * tr)
    return make_ds([1] * k + [0] * (n - k))


def write_rows(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


@pytest.mark.parametrize("age,label", [(13, 1), (19, 1), (20, 0), (0, 1), (45, 0)])
def test_map_age_to_label(age, label):
    assert map_age_to_label(age) == label


def test_negative_age_rejected():
    with pytest.raises(CorpusError):
        map_age_to_label(-1)


def test_load_age_boundary(tmp_path):
    p = write_rows(tmp_path / "d.jsonl", [{"text": "hi", "age": 19}, {"text": "hi", "age": 20}])
    ds = load_dataset(p, "jsonl", "youtube")
    assert ds.labels == [1, 0]
    assert ds.records[0].age == 19


def test_load_normalizes_whitespace(tmp_path):
    p = write_rows(tmp_path / "d.jsonl", [{"id": "a", "text": "  hello \t  world\n", "label": 1}])
    assert load_dataset(p, "jsonl", "blogger").texts == ["hello world"]


def test_load_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("id,text,age,label\nx,some words,15,\ny,other words,,0\n")
    ds = load_dataset(p, "csv", "myspace")
    assert ds.ids == ["x", "y"] and ds.labels == [1, 0]


@pytest.mark.parametrize(
    "rows,where",
    [
        ([{"text": "ok", "label": 1}, {"text": "no label"}], "row 1"),
        ([{"text": "ok", "label": 1}, {"text": "", "label": 0}], "row 1"),
        ([{"text": "a", "age": 30, "label": 1}], "row 0"),
        ([{"text": "a", "age": -3}], "row 0"),
        ([{"text": "a", "label": 2}], "row 0"),
    ],
)
def test_malformed_rows_report_index(tmp_path, rows, where):
    p = write_rows(tmp_path / "d.jsonl", rows)
    with pytest.raises(CorpusError, match=where):
        load_dataset(p, "jsonl", "youtube")


def test_load_errors(tmp_path):
    with pytest.raises(CorpusError, match="not found"):
        load_dataset(tmp_path / "missing.jsonl", "jsonl", "youtube")
    (tmp_path / "e.jsonl").write_text("\n")
    with pytest.raises(CorpusError, match="empty"):
        load_dataset(tmp_path / "e.jsonl", "jsonl", "youtube")
    with pytest.raises(CorpusError):
        load_dataset(tmp_path / "e.jsonl", "xml", "youtube")
    with pytest.raises(CorpusError):
        load_dataset(tmp_path / "e.jsonl", "jsonl", "twitter")


def test_duplicate_ids_rejected():
    r = TextRecord("a", "youtube", "x", 1)
    with pytest.raises(CorpusError):
        PlatformDataset("youtube", (r, r), "mem")


def test_mixed_platform_rejected():
    with pytest.raises(CorpusError):
        PlatformDataset("youtube", (TextRecord("a", "blogger", "x", 1),), "mem")


def test_youtube_table_size(tmp_path):
    rows = [{"id": str(i), "text": "w " * 5, "label": int(i < 694)} for i in range(3468)]
    ds = load_dataset(write_rows(tmp_path / "y.jsonl", rows), "jsonl", "youtube")
    st_ = dataset_stats(ds)
    assert st_.size == 3468
    assert st_.teenager_ratio == pytest.approx(0.2, abs=0.001)


def test_stats_hand_count():
    s = dataset_stats(make_ds([1, 0], texts=["a b", "c d e f"]))
    assert (s.size, s.avg_length, s.teenager_ratio) == (2, 3.0, 0.5)
    assert dataset_stats(make_ds([0, 0, 0])).teenager_ratio == 0.0


def test_blogger_like_ratio():
    assert dataset_stats(ratio_ds(1000, 0.42)).teenager_ratio == pytest.approx(0.42)


def test_stratified_700_from_042():
    s = stratified_sample(ratio_ds(2000, 0.42), 700, seed=3)
    assert abs(sum(s.labels) - 294) <= 1
    assert len(s) == 700


def test_stratified_full_is_permutation():
    ds = ratio_ds(50, 0.3)
    s = stratified_sample(ds, 50, seed=0)
    assert sorted(s.ids) == sorted(ds.ids)


def test_stratified_deterministic_and_seed_sensitive():
    ds = ratio_ds(300, 0.3)
    a, b = stratified_sample(ds, 100, 7), stratified_sample(ds, 100, 7)
    assert a.ids == b.ids
    assert stratified_sample(ds, 100, 8).ids != a.ids


def test_stratified_errors():
    with pytest.raises(CorpusError):
        stratified_sample(ratio_ds(10, 0.5), 11, 0)
    with pytest.raises(CorpusError):
        stratified_sample(make_ds([1] * 10), 4, 0)


@settings(max_examples=60, deadline=None)
@given(
    n_total=st.integers(4, 300),
    tr=st.floats(0.05, 0.95),
    frac=st.floats(0.01, 1.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_stratified_ratio_within_one_over_n(n_total, tr, frac, seed):
    ds = ratio_ds(n_total, tr)
    if len(set(ds.labels)) < 2:
        return
    n = max(2, int(n_total * frac))
    s = stratified_sample(ds, n, seed)
    parent = sum(ds.labels) / len(ds)
    assert abs(sum(s.labels) / n - parent) <= 1 / n + 1e-12
    assert len(set(s.ids)) == n


def test_split_sizes_and_disjoint():
    ds = ratio_ds(10, 0.5)
    train, test = train_test_split(ds, 0.2, seed=0)
    assert (len(train), len(test)) == (8, 2)
    assert not set(train.ids) & set(test.ids)
    assert set(train.ids) | set(test.ids) == set(ds.ids)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(5, 40), k=st.integers(1, 39), f=st.floats(0.1, 0.9), seed=st.integers(0, 1000))
def test_split_stratified(n, k, f, seed):
    k = min(k, n - 1)
    ds = make_ds([1] * k + [0] * (n - k))
    train, test = train_test_split(ds, f, seed)
    overall = k / n
    for part in (train, test):
        assert abs(sum(part.labels) - overall * len(part)) <= 1 + 1e-9
    with pytest.raises(CorpusError):
        train_test_split(ds, 0.0, seed)


def test_jsonl_roundtrip_byte_identical(tmp_path):
    ds = make_ds([1, 0, 1], platform="youtube")
    write_jsonl(ds, tmp_path / "a.jsonl")
    back = load_dataset(tmp_path / "a.jsonl", "jsonl", "youtube")
    write_jsonl(back, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert back.labels == ds.labels


@given(age=st.integers(0, 120))
def test_label_iff_under_20(age):
    rec = TextRecord("a", "youtube", "x", map_age_to_label(age), age)
    assert rec.label == int(age < 20)
