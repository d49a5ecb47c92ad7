"""Binary PGM export and the gray encodings for saliency and masks."""
from __future__ import annotations

import numpy as np
import pytest

from micl.kernels import BACKGROUND, UNLABELED
from micl.pgm import mask_to_gray, read_pgm, saliency_to_gray, write_pgm


class TestWriteRead:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        gray = rng.integers(0, 256, size=(5, 7), dtype=np.uint8)
        path = tmp_path / "x.pgm"
        write_pgm(path, gray)
        assert np.array_equal(read_pgm(path), gray)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "x.pgm"
        write_pgm(path, np.zeros((2, 3), dtype=np.uint8))
        assert path.read_bytes() == b"P5\n3 2\n255\n" + b"\x00" * 6

    def test_non_uint8_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm(tmp_path / "x.pgm", np.zeros((2, 2)))
        with pytest.raises(ValueError):
            write_pgm(tmp_path / "x.pgm", np.zeros((2, 2, 1), dtype=np.uint8))

    def test_read_rejects_other_formats(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 0 0 0")
        with pytest.raises(ValueError, match="binary PGM"):
            read_pgm(path)

    def test_read_rejects_other_maxval(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
        with pytest.raises(ValueError, match="maxval"):
            read_pgm(path)

    def test_read_validates_payload_size(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x00\x00\x00")
        with pytest.raises(ValueError, match="expected 4"):
            read_pgm(path)


class TestSaliencyToGray:
    def test_endpoints_and_rounding(self):
        gray = saliency_to_gray(np.array([[0.0, 1.0, 0.5]]))
        assert gray.dtype == np.uint8
        assert gray.tolist() == [[0, 255, 128]]

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            saliency_to_gray(np.array([[-0.1, 0.5]]))
        with pytest.raises(ValueError):
            saliency_to_gray(np.array([[0.5, 1.1]]))


class TestMaskToGray:
    def test_encoding(self):
        mask = np.array([[UNLABELED, BACKGROUND], [0, 5]], dtype=np.int32)
        assert mask_to_gray(mask).tolist() == [[0, 1], [2, 7]]

    def test_largest_encodable_category(self):
        assert mask_to_gray(np.array([[253]])).tolist() == [[255]]
        with pytest.raises(ValueError):
            mask_to_gray(np.array([[254]]))
