import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from isa2.dataset import (
    VOID_ID,
    LabelMapError,
    Manifest,
    ManifestError,
    Sample,
    Scenario,
    Split,
    filter_manifest,
    load_label_map,
    load_manifest,
    write_label_map,
    write_manifest,
)


def make_sample(i, scenario, split, speed=10.0):
    return Sample(f"f{i:03d}", f"labels/f{i:03d}.pgm", scenario, split, speed)


def write_dataset(tmp_path, samples, class_count=3):
    (tmp_path / "labels").mkdir(exist_ok=True)
    for s in samples:
        write_label_map(tmp_path / s.label_map_path, np.zeros((2, 2), dtype=np.uint8))
    manifest = Manifest(tuple(samples), class_count=class_count, root=tmp_path)
    write_manifest(tmp_path / "manifest.csv", manifest)
    return tmp_path / "manifest.csv"


class TestLabelMapIO:
    def test_decode_example(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 1, 1, 1]))
        labels = load_label_map(path, class_count=3)
        assert labels.tolist() == [[0, 1], [1, 1]]

    def test_constant_full_size_map(self, tmp_path):
        labels = np.zeros((384, 640), dtype=np.uint8)
        write_label_map(tmp_path / "m.pgm", labels)
        loaded = load_label_map(tmp_path / "m.pgm", class_count=19)
        assert loaded.size == 245_760
        assert (loaded == 0).all()

    def test_header_comments_skipped(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n# a comment\n2 1\n255\n" + bytes([5, 7]))
        assert load_label_map(path, class_count=8).tolist() == [[5, 7]]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P2\n2 2\n255\n1 2 3 4\n")
        with pytest.raises(LabelMapError, match="P5"):
            load_label_map(path, class_count=3)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 1]))
        with pytest.raises(LabelMapError, match="truncated"):
            load_label_map(path, class_count=3)

    def test_class_id_out_of_range(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 19, 1, 1]))
        with pytest.raises(LabelMapError, match="out of range"):
            load_label_map(path, class_count=19)

    def test_void_id_allowed(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 1\n255\n" + bytes([0, VOID_ID]))
        labels = load_label_map(path, class_count=3)
        assert labels[0, 1] == VOID_ID

    def test_bad_maxval(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(LabelMapError, match="maxval"):
            load_label_map(path, class_count=3)

    @given(
        labels=arrays(
            np.uint8,
            st.tuples(st.integers(1, 24), st.integers(1, 24)),
            elements=st.integers(0, 255),
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_bit_exact(self, labels, tmp_path_factory):
        path = tmp_path_factory.mktemp("pgm") / "m.pgm"
        write_label_map(path, labels)
        assert np.array_equal(load_label_map(path, class_count=256), labels)


class TestManifest:
    def test_roundtrip_preserves_rows(self, tmp_path):
        samples = [
            make_sample(0, Scenario.URBAN, Split.TRAIN, 12.5),
            make_sample(1, Scenario.URBAN, Split.TEST, 8.25),
            make_sample(2, Scenario.HIGHWAY, Split.TRAIN, 90.0),
            make_sample(3, Scenario.HIGHWAY, Split.TEST, 101.5),
        ]
        path = write_dataset(tmp_path, samples)
        loaded = load_manifest(path, class_count=3)
        assert loaded.samples == tuple(samples)
        assert loaded.class_count == 3
        assert loaded.root == tmp_path

    def test_negative_speed_reports_line(self, tmp_path):
        samples = [make_sample(0, Scenario.URBAN, Split.TRAIN)]
        path = write_dataset(tmp_path, samples)
        text = path.read_text().replace("10.0", "-3.0")
        path.write_text(text)
        with pytest.raises(ManifestError, match=r":2: negative speed"):
            load_manifest(path)

    def test_duplicate_frame_id(self, tmp_path):
        samples = [make_sample(0, Scenario.URBAN, Split.TRAIN)]
        path = write_dataset(tmp_path, samples)
        with open(path, "a") as f:
            f.write("f000,labels/f000.pgm,urban,train,1.0\n")
        with pytest.raises(ManifestError, match="duplicate frame_id"):
            load_manifest(path)

    def test_missing_label_map_names_frame(self, tmp_path):
        samples = [make_sample(0, Scenario.URBAN, Split.TRAIN)]
        path = write_dataset(tmp_path, samples)
        (tmp_path / "labels" / "f000.pgm").unlink()
        with pytest.raises(ManifestError, match="f000"):
            load_manifest(path)

    def test_bad_scenario_value(self, tmp_path):
        samples = [make_sample(0, Scenario.URBAN, Split.TRAIN)]
        path = write_dataset(tmp_path, samples)
        path.write_text(path.read_text().replace("urban", "rural"))
        with pytest.raises(ManifestError, match=":2:"):
            load_manifest(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ManifestError, match="bad header"):
            load_manifest(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_manifest(tmp_path / "nope.csv")

    def test_malformed_row_reports_line(self, tmp_path):
        samples = [make_sample(0, Scenario.URBAN, Split.TRAIN)]
        path = write_dataset(tmp_path, samples)
        with open(path, "a") as f:
            f.write("only,two\n")
        with pytest.raises(ManifestError, match=":3:"):
            load_manifest(path)


def mixed_manifest():
    samples = (
        make_sample(0, Scenario.URBAN, Split.TRAIN),
        make_sample(1, Scenario.HIGHWAY, Split.TRAIN),
        make_sample(2, Scenario.URBAN, Split.TEST),
        make_sample(3, Scenario.HIGHWAY, Split.TEST),
        make_sample(4, Scenario.URBAN, Split.TRAIN),
    )
    return Manifest(samples, class_count=3)


class TestFilter:
    def test_scenario_and_split(self):
        m = mixed_manifest()
        got = filter_manifest(m, Scenario.URBAN, Split.TRAIN)
        assert [s.frame_id for s in got.samples] == ["f000", "f004"]
        assert got.class_count == m.class_count

    def test_all_scenarios_train(self):
        m = mixed_manifest()
        got = filter_manifest(m, None, Split.TRAIN)
        assert [s.frame_id for s in got.samples] == ["f000", "f001", "f004"]

    def test_empty_result_is_legal(self):
        urban_only = Manifest(
            tuple(make_sample(i, Scenario.URBAN, Split.TRAIN) for i in range(3)),
            class_count=3,
        )
        got = filter_manifest(urban_only, Scenario.HIGHWAY, Split.TEST)
        assert got.samples == ()

    @given(
        tags=st.lists(
            st.tuples(st.sampled_from(list(Scenario)), st.sampled_from(list(Split))),
            max_size=30,
        ),
        split=st.sampled_from(list(Split)),
    )
    def test_partition_property(self, tags, split):
        samples = tuple(
            make_sample(i, scenario, sp) for i, (scenario, sp) in enumerate(tags)
        )
        m = Manifest(samples, class_count=3)
        both = filter_manifest(m, None, split).samples
        urban = filter_manifest(m, Scenario.URBAN, split).samples
        highway = filter_manifest(m, Scenario.HIGHWAY, split).samples
        assert sorted(s.frame_id for s in both) == sorted(
            s.frame_id for s in urban + highway
        )
        assert set(urban) & set(highway) == set()
