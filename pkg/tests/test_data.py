import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prospectnet.data import (
    Column,
    CsvFormatError,
    DatasetError,
    EncodingError,
    FeatureSchema,
    RawRecord,
    SchemaError,
    SchemaMismatchError,
    SyntheticPopulationSpec,
    build_prospecting_dataset,
    encode,
    generate_synthetic,
    inverse_frequency_weights,
    load_csv,
    load_snapshot,
    parse_csv,
    parse_schema,
    save_snapshot,
    split,
    write_csv,
)
from prospectnet.data.schema import DEFAULT_BUCKETS


@pytest.fixture
def small_schema():
    return FeatureSchema(
        (
            Column("age", "numeric"),
            Column("income", "numeric", missing=True),
            Column("region", "categorical", vocabulary=("a", "b", "c")),
        )
    )


def _csv(text):
    return io.StringIO(text)


# --- schema ---


def test_schema_widths(small_schema):
    assert small_schema.encoded_width == 1 + 2 + 3
    assert small_schema.encoded_names() == ["age", "income", "income__missing", "region=a", "region=b", "region=c"]


def test_large_vocabulary_is_hashed():
    col = Column("zip", "categorical", vocabulary=tuple(str(i) for i in range(65)))
    assert col.hashed and col.encoded_width == DEFAULT_BUCKETS
    assert not Column("s", "categorical", vocabulary=tuple(str(i) for i in range(64))).hashed


def test_schema_text_roundtrip(small_schema):
    hashed = FeatureSchema(small_schema.columns + (Column("zip", "categorical", buckets=16, missing=True),), "hh")
    for schema in (small_schema, hashed):
        assert parse_schema(schema.to_text()) == schema


def test_schema_errors():
    with pytest.raises(SchemaError):
        FeatureSchema((Column("a", "numeric"), Column("a", "numeric")))
    with pytest.raises(SchemaError):
        Column("x", "categorical")
    with pytest.raises(SchemaError, match="line 2"):
        parse_schema("id_column: id\nbogus: x\n")


# --- csv ---


def test_load_csv_empty_body(small_schema):
    assert parse_csv(_csv("record_id,age,income,region\n"), small_schema) == []


def test_load_csv_preserves_order(small_schema):
    recs = parse_csv(_csv("record_id,region,age,income\nz,a,1,2\ny,b,3,\nx,c,5,6\n"), small_schema)
    assert [r.record_id for r in recs] == ["z", "y", "x"]
    assert recs[1].values == (3.0, None, "b")
    assert recs[1].missing == (False, True, False)


def test_load_csv_malformed_row_names_line(small_schema):
    with pytest.raises(CsvFormatError) as exc:
        parse_csv(_csv("record_id,age,income,region\na,1,2,a\nb,1,2\n"), small_schema)
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


@pytest.mark.parametrize(
    "text",
    [
        "record_id,age,income,region,extra\n",
        "record_id,age,income\n",
        "record_id,age,income,region\na,1,2,a\na,1,2,b\n",
        "record_id,age,income,region\na,,2,a\n",
        "record_id,age,income,region\na,x,2,a\n",
    ],
)
def test_load_csv_rejects(small_schema, text):
    with pytest.raises(CsvFormatError):
        parse_csv(_csv(text), small_schema)


def test_csv_file_roundtrip(tmp_path, small_schema):
    recs = [RawRecord("a", (1.5, None, "c")), RawRecord("b", (-2.0, 0.1, "a"))]
    path = tmp_path / "x.csv"
    write_csv(path, recs, small_schema)
    assert load_csv(path, small_schema) == recs


# --- encoding ---


def test_zscore_example():
    schema = FeatureSchema((Column("v", "numeric"),))
    x, stats = encode([RawRecord(str(i), (float(v),)) for i, v in enumerate((1, 2, 3))], schema)
    sigma = math.sqrt(2.0 / 3.0)  # population std of (1, 2, 3)
    np.testing.assert_allclose(x[:, 0], [-1 / sigma, 0.0, 1 / sigma], atol=1e-12)
    np.testing.assert_allclose(x[:, 0], [-1.2247, 0.0, 1.2247], atol=1e-4)
    assert stats.mean["v"] == 2.0


def test_onehot_example(small_schema):
    x, _ = encode([RawRecord("r", (0.0, 1.0, "b"))], small_schema)
    np.testing.assert_array_equal(x[0, 3:], [0, 1, 0])


def test_constant_column_encodes_to_zero():
    schema = FeatureSchema((Column("v", "numeric"),))
    x, stats = encode([RawRecord(str(i), (7.0,)) for i in range(4)], schema)
    np.testing.assert_array_equal(x, 0.0)
    assert stats.std["v"] == 1.0


def test_missing_numeric_gets_indicator(small_schema):
    recs = [RawRecord("a", (1.0, 10.0, "a")), RawRecord("b", (2.0, None, "a")), RawRecord("c", (3.0, 20.0, "c"))]
    x, stats = encode(recs, small_schema)
    assert stats.mean["income"] == 15.0
    np.testing.assert_array_equal(x[:, 1:3], [[-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])


def test_missing_categorical_slot_and_unknown_tokens():
    schema = FeatureSchema((Column("c", "categorical", vocabulary=("x", "y"), missing=True),))
    x, _ = encode([RawRecord("1", (None,)), RawRecord("2", ("zzz",)), RawRecord("3", ("y",))], schema)
    np.testing.assert_array_equal(x, [[0, 0, 1], [0, 0, 1], [0, 1, 0]])
    strict = FeatureSchema((Column("c", "categorical", vocabulary=("x", "y")),))
    with pytest.raises(EncodingError):
        encode([RawRecord("1", ("zzz",))], strict)


def test_hashed_encoding_is_stable_one_hot():
    schema = FeatureSchema((Column("zip", "categorical", buckets=8),))
    x1, _ = encode([RawRecord("1", ("02139",)), RawRecord("2", ("94110",))], schema)
    x2, _ = encode([RawRecord("1", ("02139",))], schema)
    assert x1.shape == (2, 8)
    np.testing.assert_array_equal(x1.sum(axis=1), 1.0)
    np.testing.assert_array_equal(x1[0], x2[0])


def test_reused_stats_and_mismatch(small_schema):
    recs = [RawRecord("a", (1.0, 10.0, "a")), RawRecord("b", (3.0, 30.0, "b"))]
    x, stats = encode(recs, small_schema)
    x_again, _ = encode(recs, small_schema, stats)
    np.testing.assert_array_equal(x, x_again)
    other = FeatureSchema((Column("age", "numeric"),))
    with pytest.raises(SchemaMismatchError):
        encode([RawRecord("a", (1.0,))], other, stats)


# --- dataset construction ---


def _population(n_universe=60, n_audience=6, seed=0):
    schema = FeatureSchema((Column("v", "numeric"),))
    rng = np.random.default_rng(seed)
    universe = [RawRecord(f"u{i:03d}", (float(rng.normal()),)) for i in range(n_universe)]
    audience = universe[:n_audience]
    return schema, audience, universe


def test_ratio_row_counts():
    schema = FeatureSchema((Column("v", "numeric"),))
    audience = [RawRecord(f"a{i}", (1.0,)) for i in range(1000)]
    universe = audience + [RawRecord(f"u{i}", (float(i),)) for i in range(5000)]
    ds = build_prospecting_dataset(audience, universe, ratio=4, seed=0, schema=schema)
    assert ds.n_rows == 5000 and ds.n_positive == 1000
    assert ds.class_weights.w1 / ds.class_weights.w0 == pytest.approx(4.0, abs=1e-12)


def test_ratio_one_is_balanced():
    schema, audience, universe = _population()
    ds = build_prospecting_dataset(audience, universe, ratio=1, seed=1, schema=schema)
    assert ds.class_weights.w0 == ds.class_weights.w1


def test_negatives_exclude_audience():
    schema, audience, universe = _population()
    ds = build_prospecting_dataset(audience, universe, ratio=5, seed=2, schema=schema)
    pos = set(ds.record_ids[ds.labels == 1])
    neg = set(ds.record_ids[ds.labels == 0])
    assert pos == {r.record_id for r in audience}
    assert not pos & neg
    assert len(neg) == 30


@pytest.mark.parametrize("ratio", [0, -1, 2.5])
def test_bad_ratio(ratio):
    schema, audience, universe = _population()
    with pytest.raises(DatasetError):
        build_prospecting_dataset(audience, universe, ratio=ratio, seed=0, schema=schema)


def test_insufficient_universe():
    schema, audience, universe = _population(n_universe=20, n_audience=5)
    with pytest.raises(DatasetError):
        build_prospecting_dataset(audience, universe, ratio=4, seed=0, schema=schema)


def test_positive_count_constant_across_ratios():
    schema, audience, universe = _population(n_universe=200, n_audience=10)
    assert {build_prospecting_dataset(audience, universe, r, 0, schema).n_positive for r in range(1, 11)} == {10}


def test_negative_sampling_is_uniform():
    schema, audience, universe = _population(n_universe=50, n_audience=5)
    candidates = [r.record_id for r in universe[5:]]
    counts = dict.fromkeys(candidates, 0)
    reps = 1000
    for seed in range(reps):
        ds = build_prospecting_dataset(audience, universe, ratio=2, seed=seed, schema=schema)
        for rid in ds.record_ids[ds.labels == 0]:
            counts[rid] += 1
    q = 10 / 45
    se = math.sqrt(reps * q * (1 - q))
    assert all(abs(c - reps * q) < 5 * se for c in counts.values())


def test_same_seed_same_dataset():
    schema, audience, universe = _population()
    a = build_prospecting_dataset(audience, universe, 3, 9, schema)
    b = build_prospecting_dataset(audience, universe, 3, 9, schema)
    np.testing.assert_array_equal(a.record_ids, b.record_ids)
    np.testing.assert_array_equal(a.features, b.features)


# --- split ---


def _labelled(n_pos, n_neg):
    schema = FeatureSchema((Column("v", "numeric"),))
    audience = [RawRecord(f"p{i}", (float(i),)) for i in range(n_pos)]
    universe = audience + [RawRecord(f"n{i}", (float(-i),)) for i in range(n_neg)]
    return build_prospecting_dataset(audience, universe, ratio=n_neg // n_pos, seed=0, schema=schema)


def test_stratified_counts():
    ds = split(_labelled(20, 80), 0.2, seed=0)
    assert int((ds.is_test & (ds.labels == 1)).sum()) == 4
    assert int((ds.is_test & (ds.labels == 0)).sum()) == 16


def test_split_determinism():
    ds = _labelled(20, 80)
    np.testing.assert_array_equal(split(ds, 0.3, 5).split_tags, split(ds, 0.3, 5).split_tags)


def test_minimal_stratified_split():
    ds = split(_labelled(2, 2), 0.5, seed=0)
    for tag in (True, False):
        side = ds.labels[ds.is_test == tag]
        assert sorted(side.tolist()) == [0, 1]


def test_split_refuses_empty_train_class():
    with pytest.raises(DatasetError):
        split(_labelled(1, 1), 0.5, seed=0)
    with pytest.raises(DatasetError):
        split(_labelled(5, 5), 1.0, seed=0)


def test_split_weights_and_stats_from_train_only():
    ds = split(_labelled(20, 80), 0.25, seed=3)
    train_labels = ds.labels[~ds.is_test]
    w = ds.class_weights
    assert w.w0 * np.sum(train_labels == 0) == pytest.approx(w.w1 * np.sum(train_labels == 1))
    train_vals = np.array([r.values[0] for r, t in zip(ds.records, ds.is_test) if not t])
    assert ds.stats.mean["v"] == pytest.approx(train_vals.mean())
    x_train, _ = ds.train()
    assert x_train.mean() == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(2, 120), st.floats(0.05, 0.5))
def test_split_within_one_row(n_pos, n_neg, frac):
    ds = _labelled(n_pos, n_neg * n_pos)
    try:
        out = split(ds, frac, seed=1)
    except DatasetError:
        return
    for cls in (0, 1):
        m = out.labels == cls
        assert abs(int((out.is_test & m).sum()) - frac * m.sum()) <= 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=2, max_size=200).filter(lambda v: 0 < sum(v) < len(v)))
def test_inverse_frequency_balances_mass(labels):
    w = inverse_frequency_weights(labels)
    n1 = sum(labels)
    assert w.w1 * n1 == pytest.approx(w.w0 * (len(labels) - n1))


def test_snapshot_roundtrip(tmp_path):
    ds = split(_labelled(10, 40), 0.2, seed=0)
    save_snapshot(tmp_path / "ds.pknn", ds)
    back = load_snapshot(tmp_path / "ds.pknn")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)
    np.testing.assert_array_equal(back.is_test, ds.is_test)
    np.testing.assert_array_equal(back.record_ids, ds.record_ids)
    assert back.class_weights == ds.class_weights and back.stats == ds.stats


# --- synthetic ---


def test_synthetic_shapes_and_ids():
    spec = SyntheticPopulationSpec(universe_size=2000, audience_size=200, seed=3)
    pop = generate_synthetic(spec)
    assert len(pop.universe) == 2000 and len(pop.audience) == 200
    assert pop.schema.encoded_width == spec.encoded_width == 50
    aud = {r.record_id for r in pop.audience}
    assert not aud & {r.record_id for r in pop.universe}
    assert set(pop.conversions) == {r.record_id for r in pop.universe}
    # ratio 10 stays feasible at the default 10:1 universe/audience proportion
    assert len(build_prospecting_dataset(pop.audience, pop.universe, 10, 0, pop.schema).labels) == 2200


def test_synthetic_determinism():
    spec = SyntheticPopulationSpec(universe_size=500, audience_size=50, seed=11)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert a.universe == b.universe and a.conversions == b.conversions


def test_synthetic_validation():
    with pytest.raises(ValueError):
        SyntheticPopulationSpec(universe_size=100, audience_size=100)
    with pytest.raises(ValueError):
        SyntheticPopulationSpec(separation=-1.0)


def test_synthetic_propensity_tracks_customer_likeness():
    pop = generate_synthetic(SyntheticPopulationSpec(universe_size=20_000, audience_size=1000, seed=0))
    like = np.array([pop.customer_like[k] for k in pop.propensity])
    prop = np.array(list(pop.propensity.values()))
    assert prop[like].mean() > 3 * prop[~like].mean()


def test_synthetic_missing_values():
    spec = SyntheticPopulationSpec(universe_size=300, audience_size=30, missing_rate=0.2, seed=1)
    pop = generate_synthetic(spec)
    assert any(v is None for r in pop.universe for v in r.values)
    x, _ = encode(pop.universe, pop.schema)
    assert x.shape[1] == spec.encoded_width and np.all(np.isfinite(x))
