import numpy as np
import pytest
from pydantic import ValidationError

from core.exceptions import (
    DatasetIOError,
    DegenerateColumn,
    EmptySplit,
    InvalidConfig,
    InvalidDatasetState,
    MalformedRow,
    SchemaMismatch,
    UnknownFeature,
)
from services.dataset import (
    CANONICAL_FEATURES,
    Dataset,
    FeatureSchema,
    apply_standardizer,
    filter_outliers,
    fit_standardizer,
    flag_outliers_zscore,
    invert_standardizer,
    parse_csv,
    split,
    split_indices,
    write_csv,
)
from services.synth import generate

HEADER = ",".join(CANONICAL_FEATURES)
ROW = "2500.0,320.0,-60.0,2200.0,1500.0,600.0,1.05,280.0"


def _write(tmp_path, lines):
    path = tmp_path / "data.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_csv_round_trip_is_exact(tmp_path, small_raw):
    path = write_csv(small_raw, tmp_path / "plant.csv")
    parsed = parse_csv(path)

    np.testing.assert_array_equal(parsed.features, small_raw.features)
    np.testing.assert_array_equal(parsed.nt, small_raw.nt)
    np.testing.assert_array_equal(parsed.outlier, small_raw.outlier)
    np.testing.assert_array_equal(parsed.timestamp, small_raw.timestamp)
    assert parsed.n_outliers == 4


def test_parse_without_labels(tmp_path):
    data = parse_csv(_write(tmp_path, [HEADER, ROW, ROW]))
    assert len(data) == 2
    assert not data.has_labels
    assert data.n_outliers == 0
    with pytest.raises(InvalidDatasetState):
        data.labels()


def test_parse_rejects_wrong_header(tmp_path):
    header = ",".join(reversed(CANONICAL_FEATURES))
    with pytest.raises(SchemaMismatch):
        parse_csv(_write(tmp_path, [header, ROW]))


def test_parse_rejects_unknown_trailing_column(tmp_path):
    with pytest.raises(SchemaMismatch):
        parse_csv(_write(tmp_path, [HEADER + ",quality", ROW + ",1"]))


def test_parse_rejects_optional_columns_out_of_order(tmp_path):
    with pytest.raises(SchemaMismatch):
        parse_csv(_write(tmp_path, [HEADER + ",outlier,nt", ROW + ",0,170.0"]))


def test_non_numeric_token_reports_row(tmp_path):
    bad = ROW.replace("320.0", "abc")
    with pytest.raises(MalformedRow) as excinfo:
        parse_csv(_write(tmp_path, [HEADER, ROW, bad]))
    assert excinfo.value.row_index == 1


def test_short_row_is_malformed(tmp_path):
    short = ",".join(ROW.split(",")[:6])
    with pytest.raises(MalformedRow) as excinfo:
        parse_csv(_write(tmp_path, [HEADER, ROW, short]))
    assert excinfo.value.row_index == 1


def test_long_row_is_malformed(tmp_path):
    with pytest.raises(MalformedRow) as excinfo:
        parse_csv(_write(tmp_path, [HEADER, ROW, ROW + ",1.0,2.0"]))
    assert excinfo.value.row_index == 1


def test_extra_field_on_every_row_is_malformed(tmp_path):
    # 每行多一个前导字段时不能被当成索引列静默吞掉
    lines = [HEADER + ",nt", "999," + ROW + ",170.0", "999," + ROW + ",171.0"]
    with pytest.raises(MalformedRow) as excinfo:
        parse_csv(_write(tmp_path, lines))
    assert excinfo.value.row_index == 0


def test_decimal_tokens_parse_exactly(tmp_path):
    token = "2134.3269370507237"
    data = parse_csv(_write(tmp_path, [HEADER, ROW.replace("2500.0", token)]))
    assert data.features[0, 0] == float(token)
    assert repr(data.features[0, 0]) == token


def test_timestamp_out_of_int64_range_is_malformed(tmp_path):
    lines = [HEADER + ",timestamp", ROW + ",0", ROW + ",1e20"]
    with pytest.raises(MalformedRow) as excinfo:
        parse_csv(_write(tmp_path, lines))
    assert excinfo.value.row_index == 1


def test_outlier_flag_must_be_binary(tmp_path):
    with pytest.raises(MalformedRow):
        parse_csv(_write(tmp_path, [HEADER + ",nt,outlier", ROW + ",170.0,2"]))


def test_infinite_value_is_malformed(tmp_path):
    with pytest.raises(MalformedRow):
        parse_csv(_write(tmp_path, [HEADER + ",nt", ROW + ",inf"]))


def test_decreasing_timestamp_is_malformed(tmp_path):
    lines = [HEADER + ",timestamp", ROW + ",3600", ROW + ",1800"]
    with pytest.raises(MalformedRow) as excinfo:
        parse_csv(_write(tmp_path, lines))
    assert excinfo.value.row_index == 1


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(DatasetIOError):
        parse_csv(tmp_path / "missing.csv")


def test_schema_is_fixed():
    assert FeatureSchema().index("sulfur") == 1
    with pytest.raises(UnknownFeature):
        FeatureSchema().index("temperature")
    with pytest.raises(ValidationError):
        FeatureSchema(names=tuple(reversed(CANONICAL_FEATURES)))


def test_records_round_trip(small_raw):
    subset = small_raw.take([5, 0, 3])
    rebuilt = Dataset.from_records(subset.records)
    np.testing.assert_array_equal(rebuilt.features, subset.features)
    np.testing.assert_array_equal(rebuilt.nt, subset.nt)
    np.testing.assert_array_equal(rebuilt.timestamp, small_raw.timestamp[[5, 0, 3]])


def test_dataset_is_read_only(small_raw):
    with pytest.raises(ValueError):
        small_raw.features[0, 0] = 1.0


def test_standardizer_uses_sample_statistics(small_raw):
    s = fit_standardizer(small_raw)
    np.testing.assert_allclose(s.means[:-1], small_raw.features.mean(axis=0))
    np.testing.assert_allclose(s.stds[:-1], small_raw.features.std(axis=0, ddof=1))
    np.testing.assert_allclose(s.stds[-1], np.std(small_raw.nt, ddof=1))

    scaled = apply_standardizer(small_raw, s)
    assert scaled.standardized
    np.testing.assert_allclose(scaled.features.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(scaled.features.std(axis=0, ddof=1), 1.0, atol=1e-10)

    restored = invert_standardizer(scaled, s)
    np.testing.assert_allclose(restored.features, small_raw.features, rtol=1e-12)
    np.testing.assert_allclose(restored.nt, small_raw.nt, rtol=1e-12)


def test_standardizer_state_checks(small_raw):
    s = fit_standardizer(small_raw)
    scaled = apply_standardizer(small_raw, s)
    with pytest.raises(InvalidDatasetState):
        apply_standardizer(scaled, s)
    with pytest.raises(InvalidDatasetState):
        invert_standardizer(small_raw, s)


def test_degenerate_column(small_raw):
    features = small_raw.features.copy()
    features[:, 2] = -60.0
    constant = small_raw.with_features(features)
    with pytest.raises(DegenerateColumn) as excinfo:
        fit_standardizer(constant)
    assert excinfo.value.name == "dew_point"

    s = fit_standardizer(constant, allow_degenerate=True)
    assert s.degenerate.tolist() == [False, False, True] + [False] * 6
    assert s.stds[2] == 1.0


def test_split_indices_partition():
    train, test = split_indices(100, 0.7, seed=1)
    assert len(train) == 70 and len(test) == 30
    assert np.all(np.diff(train) > 0) and np.all(np.diff(test) > 0)
    assert sorted(np.concatenate([train, test]).tolist()) == list(range(100))

    again, _ = split_indices(100, 0.7, seed=1)
    other, _ = split_indices(100, 0.7, seed=2)
    np.testing.assert_array_equal(train, again)
    assert not np.array_equal(train, other)


def test_split_rejects_bad_fraction_and_empty_sides():
    with pytest.raises(InvalidConfig):
        split_indices(10, 1.0, seed=0)
    with pytest.raises(EmptySplit):
        split_indices(1, 0.5, seed=0)


def test_split_keeps_original_order(small_raw):
    train, test = split(small_raw, 0.7, seed=3)
    assert len(train) == 280 and len(test) == 120
    assert np.all(np.diff(train.timestamp) > 0)
    assert np.all(np.diff(test.timestamp) > 0)


def test_filter_outliers(small_raw):
    clean = filter_outliers(small_raw)
    assert len(clean) == len(small_raw) - 4
    assert clean.n_outliers == 0
    np.testing.assert_array_equal(clean.timestamp, small_raw.timestamp[~small_raw.outlier])


def test_zscore_flagger_finds_injected_outliers(small_raw):
    cleared = Dataset(schema=small_raw.schema, features=small_raw.features, nt=small_raw.nt)
    flagged = flag_outliers_zscore(cleared, threshold=4.0)
    assert np.all(flagged.outlier[small_raw.outlier])


def test_zscore_flagger_keeps_existing_flags(small_raw):
    flagged = flag_outliers_zscore(small_raw, threshold=np.inf)
    np.testing.assert_array_equal(flagged.outlier, small_raw.outlier)


def test_zscore_flagger_rejects_constant_column(small_raw):
    features = small_raw.features.copy()
    features[:, 0] = 1.0
    with pytest.raises(DegenerateColumn):
        flag_outliers_zscore(small_raw.with_features(features))
    with pytest.raises(InvalidConfig):
        flag_outliers_zscore(small_raw, threshold=0.0)


def test_standardizer_hand_example():
    rng = np.random.default_rng(0)
    features = rng.normal(size=(3, 8))
    features[:, 0] = [1.0, 2.0, 3.0]
    data = Dataset(schema=FeatureSchema(), features=features, nt=[1.0, 2.0, 3.0])
    s = fit_standardizer(data)
    assert s.means[0] == 2.0 and s.stds[0] == 1.0
    assert apply_standardizer(data, s).features[:, 0].tolist() == [-1.0, 0.0, 1.0]


@pytest.mark.parametrize("fraction", [0.5, 0.7, 0.9])
def test_split_sizes_for_all_small_n(fraction):
    for n in range(2, 1001):
        train, test = split_indices(n, fraction, seed=n)
        assert len(train) == int(np.floor(n * fraction))
        assert len(np.intersect1d(train, test)) == 0
        assert len(train) + len(test) == n
        assert np.union1d(train, test).tolist() == list(range(n))


def test_split_reference_size():
    train, test = split_indices(14252, 0.7, seed=42)
    assert (len(train), len(test)) == (9976, 4276)


def test_zscore_flagger_recovers_reference_outliers():
    data, manifest = generate()
    cleared = Dataset(schema=data.schema, features=data.features, nt=data.nt)
    flagged = flag_outliers_zscore(cleared, threshold=4.0)
    assert int(flagged.outlier[manifest.outlier_indices].sum()) >= 20
