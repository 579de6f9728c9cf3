import numpy as np
import pytest

from labeldist.data import (Dataset, FormatError, load_dataset, read_features, read_latent,
                            read_votes, save_dataset, write_votes)
from labeldist.synth import GeneratorConfig, GroupSpec, generate


@pytest.fixture
def data():
    groups = (GroupSpec("north", 3), GroupSpec("south", [2, 0, 1]))
    return generate(GeneratorConfig(class_count=3, feature_dim=2, groups=groups, seed=11))


def test_vote_file_is_one_based(tmp_path):
    path = tmp_path / "votes.csv"
    path.write_text("sample_id,group_id,v1,v2,v3\na,g,3,3,1\nb,g,2,2,2\n")
    ds = read_votes(path, 3)
    np.testing.assert_array_equal(ds.counts, [[1, 0, 2], [0, 3, 0]])
    assert list(ds.majority) == [2, 1]
    assert ds.votes[0].tolist() == [2, 2, 0]


def test_count_form(tmp_path):
    path = tmp_path / "counts.csv"
    path.write_text("sample_id,group_id,c1,c2\na,g,7,3\n")
    ds = read_votes(path)
    assert ds.votes is None and ds.counts.tolist() == [[7, 3]]
    np.testing.assert_allclose(ds.distributional, [[0.7, 0.3]])


@pytest.mark.parametrize("form", ["votes", "counts"])
def test_vote_round_trip(tmp_path, data, form):
    path = tmp_path / "v.csv"
    write_votes(data, path, form)
    back = read_votes(path, 3)
    np.testing.assert_array_equal(back.counts, data.counts)
    assert list(back.sample_ids) == list(data.sample_ids)
    assert list(back.group_ids) == list(data.group_ids)


@pytest.mark.parametrize("body, where", [
    ("a,g,1,2\nb,g,1,4\n", ":3:"),
    ("a,g,1,2\nb,g,1\n", ":3:"),
    ("a,g,1,x\n", ":2:"),
    ("a,g,0,1\n", ":2:"),
])
def test_errors_name_the_line(tmp_path, body, where):
    path = tmp_path / "bad.csv"
    path.write_text("sample_id,group_id,v1,v2\n" + body)
    with pytest.raises(FormatError, match=where):
        read_votes(path, 3)


def test_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,group,v1\n")
    with pytest.raises(FormatError, match=":1:"):
        read_votes(path)


def test_negative_count(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("sample_id,group_id,c1,c2\na,g,1,1\nb,g,-1,2\n")
    with pytest.raises(FormatError, match=":3:"):
        read_votes(path)


def test_dataset_round_trip_is_exact(tmp_path, data):
    save_dataset(data, tmp_path)
    back = load_dataset(tmp_path, 3)
    assert back.digest() == data.digest()
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.latent, data.latent)


def test_rows_aligned_by_sample_id(tmp_path, data):
    save_dataset(data, tmp_path)
    lines = (tmp_path / "features.csv").read_text().splitlines()
    (tmp_path / "features.csv").write_text("\n".join([lines[0]] + lines[1:][::-1]) + "\n")
    np.testing.assert_array_equal(load_dataset(tmp_path).features, data.features)


def test_feature_and_latent_readers(tmp_path, data):
    save_dataset(data, tmp_path)
    ids, feats = read_features(tmp_path / "features.csv")
    assert ids == list(data.sample_ids) and feats.shape == (len(data), 2)
    ids, lat = read_latent(tmp_path / "latent.csv")
    np.testing.assert_allclose(lat.sum(axis=1), 1, atol=1e-12)


def test_missing_feature_row(tmp_path, data):
    save_dataset(data, tmp_path)
    lines = (tmp_path / "features.csv").read_text().splitlines()
    (tmp_path / "features.csv").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(FormatError):
        load_dataset(tmp_path)


def test_subset_and_records(data):
    sub = data.subset(np.array([0, 2]))
    assert len(sub) == 2 and sub.features.shape == (2, 2)
    recs = list(sub.records())
    assert recs[0].sample_id == data.sample_ids[0] and len(recs[0].votes) == 10


def test_mismatched_lengths():
    with pytest.raises(ValueError):
        Dataset(["a", "b"], ["g"], [[1, 0], [0, 1]])
