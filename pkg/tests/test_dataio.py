import json

import numpy as np
import pytest

from ptychokit.dataio import (GroundTruth, PtychoDataset, read_checkpoint,
                              read_dataset, write_checkpoint, write_dataset)
from ptychokit.errors import DatasetIOError
from ptychokit.fields import Geometry

GEOM = Geometry.create(8.3187e-10, 0.75, 20e-6, 16)


def small_dataset(with_truth=True, seed=5):
    rng = np.random.default_rng(seed)
    patterns = rng.uniform(0, 1, (3, 16, 16))
    positions = rng.uniform(0, 10, (3, 2))
    truth = None
    if with_truth:
        obj = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
        probe = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        truth = GroundTruth(true_positions=positions + 0.5, obj=obj,
                            probes=[probe], mode_powers=(1.0,))
    return PtychoDataset(patterns=patterns, positions=positions,
                         geometry=GEOM, ground_truth=truth, seed=seed)


class TestDatasetRoundTrip:
    def test_round_trip_exact_at_storage_precision(self, tmp_path):
        ds = small_dataset()
        write_dataset(tmp_path / "d", ds)
        back = read_dataset(tmp_path / "d")
        # storage is float32/complex64 for patterns/fields, float64 positions
        np.testing.assert_array_equal(back.positions, ds.positions)
        np.testing.assert_allclose(back.patterns, ds.patterns, rtol=1e-6)
        np.testing.assert_array_equal(back.ground_truth.true_positions,
                                      ds.ground_truth.true_positions)
        np.testing.assert_allclose(back.ground_truth.obj, ds.ground_truth.obj,
                                   rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(back.ground_truth.probes[0],
                                   ds.ground_truth.probes[0],
                                   rtol=1e-5, atol=1e-6)
        assert back.ground_truth.mode_powers == (1.0,)
        assert back.geometry == ds.geometry
        assert back.seed == ds.seed

    def test_second_write_read_is_bit_identical(self, tmp_path):
        ds = small_dataset()
        write_dataset(tmp_path / "a", ds)
        write_dataset(tmp_path / "b", ds)
        a = read_dataset(tmp_path / "a")
        b = read_dataset(tmp_path / "b")
        np.testing.assert_array_equal(a.patterns, b.patterns)
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_truth_optional(self, tmp_path):
        write_dataset(tmp_path / "d", small_dataset(with_truth=False))
        back = read_dataset(tmp_path / "d")
        assert back.ground_truth is None

    def test_manifest_is_plain_json_with_declared_arrays(self, tmp_path):
        write_dataset(tmp_path / "d", small_dataset())
        manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
        assert manifest["format_version"] == "1"
        assert manifest["window_px"] == 16
        entry = manifest["patterns_file"]
        assert entry["dtype"] == "float32" and entry["shape"] == [3, 16, 16]
        # raw file length must equal the declared shape times itemsize
        size = (tmp_path / "d" / entry["path"]).stat().st_size
        assert size == 3 * 16 * 16 * 4


class TestDatasetErrors:
    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DatasetIOError, match="manifest"):
            read_dataset(tmp_path / "nope")

    def test_invalid_json(self, tmp_path):
        d = tmp_path / "d"
        d.mkdir()
        (d / "manifest.json").write_text("{not json")
        with pytest.raises(DatasetIOError, match="invalid JSON"):
            read_dataset(d)

    def test_unsupported_version(self, tmp_path):
        d = tmp_path / "d"
        write_dataset(d, small_dataset())
        manifest = json.loads((d / "manifest.json").read_text())
        manifest["format_version"] = "99"
        (d / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(DatasetIOError, match="format_version"):
            read_dataset(d)

    def test_truncated_array_names_offending_file(self, tmp_path):
        d = tmp_path / "d"
        write_dataset(d, small_dataset())
        raw = d / "patterns.raw"
        raw.write_bytes(raw.read_bytes()[:-8])
        with pytest.raises(DatasetIOError, match="patterns.raw"):
            read_dataset(d)

    def test_missing_array_file(self, tmp_path):
        d = tmp_path / "d"
        write_dataset(d, small_dataset())
        (d / "positions.raw").unlink()
        with pytest.raises(DatasetIOError, match="positions.raw"):
            read_dataset(d)

    def test_inconsistent_counts(self, tmp_path):
        d = tmp_path / "d"
        ds = small_dataset(with_truth=False)
        ds.positions = ds.positions[:2]
        write_dataset(d, ds)
        with pytest.raises(DatasetIOError, match="positions"):
            read_dataset(d)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        obj = rng.standard_normal((20, 24)) + 1j * rng.standard_normal((20, 24))
        probes = [rng.standard_normal((16, 16)) + 0j for _ in range(2)]
        pos = rng.uniform(0, 5, (4, 2))
        write_checkpoint(tmp_path / "c", obj, probes, pos, (3, 7),
                         [1.0, 0.5, 0.25], iteration=3)
        back = read_checkpoint(tmp_path / "c")
        assert back["iteration"] == 3
        assert back["canvas_origin"] == (3, 7)
        assert back["error_trace"] == [1.0, 0.5, 0.25]
        np.testing.assert_allclose(back["object"], obj, rtol=1e-5, atol=1e-6)
        assert len(back["probes"]) == 2
        np.testing.assert_array_equal(back["positions"], pos)

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(DatasetIOError, match="checkpoint"):
            read_checkpoint(tmp_path / "nope")
