"""Dataset container, CSV round-trips, and the synthetic generator."""

from __future__ import annotations

import numpy as np
import pytest

from leakbench.data import (
    Dataset,
    ORIGINAL,
    RowOrigin,
    SYNTHETIC,
    SynthConfig,
    TIME_SPAN_SECONDS,
    TRANSACTION_SCHEMA,
    expand_features,
    generate_synthetic,
    load_csv,
    save_csv,
)

from conftest import make_dataset


# ---------------------------------------------------------------------------
# container validation
# ---------------------------------------------------------------------------


def test_dataset_rejects_bad_labels() -> None:
    with pytest.raises(ValueError, match="label at row 2 is not 0 or 1"):
        make_dataset([[0.0], [1.0], [2.0]], [0, 1, 7])


def test_dataset_rejects_shape_mismatches() -> None:
    with pytest.raises(ValueError, match="labels length"):
        Dataset(np.zeros((3, 2)), np.zeros(2, dtype=np.int64), ("a", "b"))
    with pytest.raises(ValueError, match="feature_names length"):
        Dataset(np.zeros((3, 2)), np.zeros(3, dtype=np.int64), ("a",))
    with pytest.raises(ValueError, match="time length"):
        Dataset(np.zeros((3, 2)), np.zeros(3, dtype=np.int64), ("a", "b"), time=np.zeros(4))
    with pytest.raises(ValueError, match="2-d"):
        Dataset(np.zeros(3), np.zeros(3, dtype=np.int64), ("a",))


def test_dataset_take_carries_everything() -> None:
    ds = make_dataset([[1.0], [2.0], [3.0]], [0, 1, 0], time=[5.0, 6.0, 7.0])
    sub = ds.take(np.array([2, 0]))
    np.testing.assert_array_equal(sub.features[:, 0], [3.0, 1.0])
    np.testing.assert_array_equal(sub.labels, [0, 0])
    np.testing.assert_array_equal(sub.time, [7.0, 5.0])
    np.testing.assert_array_equal(sub.origin.parent_a, [2, 0])


def test_select_columns() -> None:
    ds = make_dataset(np.arange(12.0).reshape(3, 4), [0, 1, 0])
    sub = ds.select_columns(["V3", "V1"])
    assert sub.feature_names == ("V3", "V1")
    np.testing.assert_array_equal(sub.features, ds.features[:, [2, 0]])
    with pytest.raises(ValueError, match="unknown feature columns: V9"):
        ds.select_columns(["V1", "V9"])


def test_row_origin_defaults_to_originals() -> None:
    ds = make_dataset([[0.0], [1.0]], [0, 1])
    assert (ds.origin.kind == ORIGINAL).all()
    np.testing.assert_array_equal(ds.origin.parent_a, [0, 1])
    np.testing.assert_array_equal(ds.origin.parent_b, [-1, -1])


def test_row_origin_concat_and_synthetic() -> None:
    a = RowOrigin.originals(2)
    b = RowOrigin.synthetic([0, 1], [1, 0], [0.5, 0.25])
    both = RowOrigin.concat(a, b)
    assert len(both) == 4
    np.testing.assert_array_equal(both.kind, [ORIGINAL, ORIGINAL, SYNTHETIC, SYNTHETIC])
    np.testing.assert_array_equal(both.delta, [0.0, 0.0, 0.5, 0.25])


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------


def test_synthetic_exact_positive_count() -> None:
    for n, rate, want in [(1000, 0.005, 5), (20000, 0.005, 100), (400, 0.1, 40), (999, 0.0125, 12)]:
        ds = generate_synthetic(SynthConfig(n_samples=n, positive_rate=rate))
        assert ds.n_rows == n
        assert int(ds.labels.sum()) == want


def test_synthetic_rows_sorted_by_time() -> None:
    ds = generate_synthetic(SynthConfig(n_samples=500, positive_rate=0.1, seed=8))
    assert ds.time is not None
    assert (np.diff(ds.time) >= 0).all()
    assert ds.time.min() >= 0.0
    assert ds.time.max() <= TIME_SPAN_SECONDS


def test_synthetic_is_deterministic_per_seed() -> None:
    a = generate_synthetic(SynthConfig(n_samples=300, positive_rate=0.1, seed=5))
    b = generate_synthetic(SynthConfig(n_samples=300, positive_rate=0.1, seed=5))
    c = generate_synthetic(SynthConfig(n_samples=300, positive_rate=0.1, seed=6))
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.time, b.time)
    assert not np.array_equal(a.features, c.features)


def test_synthetic_class_separation_on_first_axis() -> None:
    ds = generate_synthetic(
        SynthConfig(n_samples=20000, positive_rate=0.3, n_features=4, class_separation=6.0, seed=0)
    )
    pos = ds.features[ds.labels == 1]
    neg = ds.features[ds.labels == 0]
    gap = pos.mean(axis=0) - neg.mean(axis=0)
    assert abs(gap[0] - 6.0) < 0.1
    assert np.abs(gap[1:]).max() < 0.1
    # unit variance per axis on both sides
    assert np.abs(pos.std(axis=0) - 1.0).max() < 0.05
    assert np.abs(neg.std(axis=0) - 1.0).max() < 0.05


def test_synthetic_fraud_burst_concentrates_positives() -> None:
    ds = generate_synthetic(
        SynthConfig(n_samples=2000, positive_rate=0.05, seed=9, fraud_burst=True)
    )
    pos_times = ds.time[ds.labels == 1]
    neg_times = ds.time[ds.labels == 0]
    assert pos_times.min() >= 0.8 * TIME_SPAN_SECONDS
    assert neg_times.min() < 0.8 * TIME_SPAN_SECONDS


def test_synth_config_validation() -> None:
    with pytest.raises(ValueError, match="positive_rate"):
        SynthConfig(n_samples=100, positive_rate=0.6)
    with pytest.raises(ValueError, match="positive_rate"):
        SynthConfig(n_samples=100, positive_rate=0.0)
    with pytest.raises(ValueError, match="at least 2"):
        SynthConfig(n_samples=100, positive_rate=0.01)
    with pytest.raises(ValueError, match="n_samples"):
        SynthConfig(n_samples=0, positive_rate=0.1)
    with pytest.raises(ValueError, match="class_separation"):
        SynthConfig(n_samples=100, positive_rate=0.1, class_separation=-1.0)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def test_load_csv_hand_written(tmp_path) -> None:
    path = tmp_path / "tiny.csv"
    path.write_text("Time,V1,Amount,Class\n10.0,0.5,99.25,0\n20.0,-1.5,3.0,1\n")
    ds = load_csv(str(path))
    assert ds.feature_names == ("V1", "Amount")
    np.testing.assert_array_equal(ds.features, [[0.5, 99.25], [-1.5, 3.0]])
    np.testing.assert_array_equal(ds.labels, [0, 1])
    np.testing.assert_array_equal(ds.time, [10.0, 20.0])


def test_load_csv_without_time_column(tmp_path) -> None:
    path = tmp_path / "no_time.csv"
    path.write_text("a,b,Class\n1,2,0\n3,4,1\n")
    ds = load_csv(str(path))
    assert ds.time is None
    assert ds.feature_names == ("a", "b")


def test_load_csv_errors(tmp_path) -> None:
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="file is empty"):
        load_csv(str(empty))

    no_label = tmp_path / "no_label.csv"
    no_label.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="no 'Class' column"):
        load_csv(str(no_label))

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("a,Class\n1,0\n1,0,9\n")
    with pytest.raises(ValueError, match="line 3: expected 2 columns, got 3"):
        load_csv(str(ragged))

    non_numeric = tmp_path / "non_numeric.csv"
    non_numeric.write_text("a,Class\n1,0\nfoo,1\n")
    with pytest.raises(ValueError, match="line 3: column 'a' has non-numeric value 'foo'"):
        load_csv(str(non_numeric))

    bad_label = tmp_path / "bad_label.csv"
    bad_label.write_text("a,Class\n1,0\n2,3\n")
    with pytest.raises(ValueError, match="line 3: label 3.0 is not 0 or 1"):
        load_csv(str(bad_label))

    header_only = tmp_path / "header_only.csv"
    header_only.write_text("a,Class\n")
    with pytest.raises(ValueError, match="no data rows"):
        load_csv(str(header_only))


def test_load_csv_schema_check(tmp_path) -> None:
    good = tmp_path / "schema.csv"
    row = ",".join(["1.0"] * 30 + ["0"])
    good.write_text(",".join(TRANSACTION_SCHEMA) + "\n" + row + "\n")
    ds = load_csv(str(good), expect_schema=True)
    assert ds.n_features == 29  # Time and Class are not features
    assert ds.feature_names[:2] == ("V1", "V2")

    bad = tmp_path / "off_schema.csv"
    bad.write_text("a,Class\n1,0\n")
    with pytest.raises(ValueError, match="does not match the expected transactions schema"):
        load_csv(str(bad), expect_schema=True)


def test_csv_round_trip_is_exact(tmp_path) -> None:
    rng = np.random.default_rng(42)
    ds = make_dataset(rng.standard_normal((20, 3)), rng.integers(0, 2, 20), time=rng.uniform(0, 100, 20))
    path = tmp_path / "round.csv"
    save_csv(ds, str(path))
    back = load_csv(str(path))
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)
    np.testing.assert_array_equal(back.time, ds.time)
    assert back.feature_names == ds.feature_names


# ---------------------------------------------------------------------------
# feature expansion
# ---------------------------------------------------------------------------


def test_expand_degree_one_is_identity() -> None:
    ds = make_dataset([[1.0, 2.0]], [0])
    assert expand_features(ds, 1) is ds


def test_expand_degree_two_counts_and_names() -> None:
    ds = make_dataset(np.ones((2, 4)), [0, 1])
    out = expand_features(ds, 2)
    assert out.n_features == 4 + 10
    assert out.feature_names[:4] == ("V1", "V2", "V3", "V4")
    assert out.feature_names[4:7] == ("V1*V1", "V1*V2", "V1*V3")
    assert out.feature_names[-1] == "V4*V4"

    wide = make_dataset(np.ones((1, 30)), [0])
    assert expand_features(wide, 2).n_features == 495


def test_expand_degree_two_values() -> None:
    ds = make_dataset([[2.0, 3.0]], [1])
    out = expand_features(ds, 2)
    np.testing.assert_array_equal(out.features, [[2.0, 3.0, 4.0, 6.0, 9.0]])


def test_expand_rejects_other_degrees() -> None:
    ds = make_dataset([[1.0]], [0])
    with pytest.raises(ValueError, match="degree must be 1 or 2"):
        expand_features(ds, 3)
