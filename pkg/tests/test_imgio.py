"""PNM reading/writing, annotation parsing, dataset scanning."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ldcf.errors import (
    EmptyDataset,
    MalformedHeader,
    MalformedLine,
    MissingAnnotation,
    NegativeDimension,
    TruncatedData,
    UnsupportedFormat,
)
from ldcf.imgio import (
    GroundTruthBox,
    Image,
    list_images,
    load_annotations,
    load_image,
    save_image,
    scan_dataset,
)

from conftest import make_image


class TestPnmRoundtrip:
    def test_color_roundtrip(self, tmp_path, rng):
        img = make_image(rng.integers(0, 256, size=(11, 7, 3)))
        save_image(img, tmp_path / "a.ppm")
        back = load_image(tmp_path / "a.ppm")
        assert (back.width, back.height, back.planes) == (7, 11, 3)
        np.testing.assert_array_equal(back.data, img.data)

    def test_gray_roundtrip(self, tmp_path, rng):
        img = make_image(rng.integers(0, 256, size=(5, 9)))
        save_image(img, tmp_path / "g.pgm")
        back = load_image(tmp_path / "g.pgm")
        assert back.planes == 1
        np.testing.assert_array_equal(back.data, img.data)

    @settings(max_examples=25, deadline=None,
              suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(
        h=st.integers(1, 12),
        w=st.integers(1, 12),
        gray=st.booleans(),
        seed=st.integers(0, 2**31),
    )
    def test_any_size_roundtrip(self, tmp_path, h, w, gray, seed):
        # each example writes its own file, so fixture reuse is harmless
        r = np.random.Generator(np.random.Philox(seed))
        shape = (h, w) if gray else (h, w, 3)
        img = make_image(r.integers(0, 256, size=shape))
        path = tmp_path / f"r{h}x{w}_{int(gray)}_{seed}.{'pgm' if gray else 'ppm'}"
        save_image(img, path)
        np.testing.assert_array_equal(load_image(path).data, img.data)

    def test_header_comments_ok(self, tmp_path):
        payload = bytes(range(12))
        (tmp_path / "c.pgm").write_bytes(b"P5\n# a comment\n4 3\n# more\n255\n" + payload)
        img = load_image(tmp_path / "c.pgm")
        assert (img.width, img.height) == (4, 3)
        assert img.data.ravel().tolist() == list(payload)


class TestPnmErrors:
    def test_ascii_variant_rejected(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
        with pytest.raises(UnsupportedFormat):
            load_image(tmp_path / "a.pgm")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "b.pgm").write_bytes(b"Q5\n2 2\n255\n" + bytes(4))
        with pytest.raises(MalformedHeader):
            load_image(tmp_path / "b.pgm")

    def test_wrong_maxval(self, tmp_path):
        (tmp_path / "m.pgm").write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
        with pytest.raises(UnsupportedFormat):
            load_image(tmp_path / "m.pgm")

    def test_truncated_payload(self, tmp_path):
        (tmp_path / "t.ppm").write_bytes(b"P6\n4 4\n255\n" + bytes(10))
        with pytest.raises(TruncatedData):
            load_image(tmp_path / "t.ppm")

    def test_non_numeric_header(self, tmp_path):
        (tmp_path / "n.pgm").write_bytes(b"P5\nx 2\n255\n" + bytes(4))
        with pytest.raises(MalformedHeader):
            load_image(tmp_path / "n.pgm")

    def test_data_shape_enforced(self):
        with pytest.raises(TruncatedData):
            Image(4, 4, 1, np.zeros((4, 3, 1), dtype=np.uint8))


class TestAnnotations:
    def test_comment_lines_skipped(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("1 2 10 20\n# comment\n")
        assert load_annotations(p) == [GroundTruthBox(1, 2, 10, 20, False)]

    def test_four_and_five_fields(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("1 2 10 20\n3.5 4.5 7 8 1\n")
        boxes = load_annotations(p)
        assert boxes == [
            GroundTruthBox(1, 2, 10, 20, False),
            GroundTruthBox(3.5, 4.5, 7, 8, True),
        ]

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("\n1 1 2 2\n\n")
        assert len(load_annotations(p)) == 1

    def test_nonpositive_box(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("0 0 0 5\n")
        with pytest.raises(NegativeDimension):
            load_annotations(p)

    def test_bad_ignore_flag(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("0 0 5 5 2\n")
        with pytest.raises(MalformedLine) as exc:
            load_annotations(p)
        assert ":1:" in str(exc.value)


class TestDatasetScan:
    def _write(self, d, name, shape=(8, 8, 3)):
        d.mkdir(parents=True, exist_ok=True)
        save_image(make_image(np.zeros(shape)), d / name)

    def test_layout(self, tmp_path):
        self._write(tmp_path / "pos", "b.ppm")
        self._write(tmp_path / "pos", "a.ppm")
        (tmp_path / "pos-annot").mkdir()
        for stem in ("a", "b"):
            (tmp_path / "pos-annot" / f"{stem}.txt").write_text("0 0 4 4\n")
        self._write(tmp_path / "neg", "n.ppm")
        idx = scan_dataset(tmp_path)
        names = [p.name for p, _ in idx.positives]
        assert names == ["a.ppm", "b.ppm"]  # sorted
        assert [p.name for p in idx.negatives] == ["n.ppm"]

    def test_missing_annotation(self, tmp_path):
        self._write(tmp_path / "pos", "a.ppm")
        (tmp_path / "pos-annot").mkdir()
        self._write(tmp_path / "neg", "n.ppm")
        with pytest.raises(MissingAnnotation):
            scan_dataset(tmp_path)

    def test_empty_dataset(self, tmp_path):
        (tmp_path / "pos").mkdir()
        (tmp_path / "pos-annot").mkdir()
        (tmp_path / "neg").mkdir()
        with pytest.raises(EmptyDataset):
            scan_dataset(tmp_path)

    def test_list_images_filters_and_sorts(self, tmp_path):
        for name in ("z.ppm", "a.pgm", "ignore.txt", "b.PPM"):
            (tmp_path / name).write_bytes(b"")
        assert [p.name for p in list_images(tmp_path)] == ["a.pgm", "b.PPM", "z.ppm"]
        assert list_images(tmp_path / "nope") == []
