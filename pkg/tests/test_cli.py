import json

import numpy as np
import pytest

from mcrp import fixtures, heatmap_io
from mcrp.cli import main


@pytest.fixture
def demo_png(tmp_path):
    path = tmp_path / "demo.png"
    raster = heatmap_io.RasterImage.from_tensor(fixtures.demo_image())
    heatmap_io.save_raster(raster, path)
    return path


def read_outputs(outdir):
    return {p.name: p.read_bytes() for p in sorted(outdir.iterdir())}


class TestExplain:
    def test_default_run_writes_eight_files_plus_manifest(self, tiny_cnn_archive, demo_png, tmp_path):
        out = tmp_path / "run"
        rc = main([
            "explain", "--model", str(tiny_cnn_archive), "--image", str(demo_png),
            "--samples", "20", "--out", str(out),
        ])
        assert rc == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == sorted(
            [f"{m}.{ext}" for m in ("mean", "sigma", "snr", "confusion") for ext in ("png", "mcrt")]
            + ["manifest.json"]
        )
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["samples"] == 20
        assert len(manifest["outputs"]) == 8

    def test_zero_samples_is_usage_error(self, tiny_cnn_archive, demo_png, tmp_path, capsys):
        rc = main([
            "explain", "--model", str(tiny_cnn_archive), "--image", str(demo_png),
            "--samples", "0", "--out", str(tmp_path / "x"),
        ])
        assert rc == 1
        err = capsys.readouterr().err
        assert "sample count" in err
        assert "usage" in err

    def test_unknown_metric_is_usage_error(self, tiny_cnn_archive, demo_png, tmp_path):
        rc = main([
            "explain", "--model", str(tiny_cnn_archive), "--image", str(demo_png),
            "--metrics", "wut", "--out", str(tmp_path / "x"),
        ])
        assert rc == 1

    def test_bad_target_and_tap_are_usage_errors(self, tiny_cnn_archive, demo_png, tmp_path):
        base = ["explain", "--model", str(tiny_cnn_archive), "--image", str(demo_png),
                "--samples", "3", "--out", str(tmp_path / "x")]
        assert main([*base, "--target", "99"]) == 1
        assert main([*base, "--taps", "no_such_layer"]) == 1

    def test_missing_model_is_load_error(self, demo_png, tmp_path):
        rc = main([
            "explain", "--model", str(tmp_path / "missing"), "--image", str(demo_png),
            "--out", str(tmp_path / "x"),
        ])
        assert rc == 2

    def test_repeat_runs_are_byte_identical(self, tiny_cnn_archive, demo_png, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        flags = ["--model", str(tiny_cnn_archive), "--image", str(demo_png),
                 "--samples", "15", "--seed", "3"]
        assert main(["explain", *flags, "--out", str(out1)]) == 0
        assert main(["explain", *flags, "--out", str(out2)]) == 0
        a, b = read_outputs(out1), read_outputs(out2)
        assert a.keys() == b.keys()
        for name in a:
            if name == "manifest.json":
                continue  # contains wall time
            assert a[name] == b[name], name

    def test_thread_counts_are_byte_identical(self, tiny_cnn_archive, demo_png, tmp_path):
        out1, out4 = tmp_path / "t1", tmp_path / "t4"
        flags = ["--model", str(tiny_cnn_archive), "--image", str(demo_png),
                 "--samples", "15", "--seed", "3"]
        assert main(["explain", *flags, "--threads", "1", "--out", str(out1)]) == 0
        assert main(["explain", *flags, "--threads", "4", "--out", str(out4)]) == 0
        a, b = read_outputs(out1), read_outputs(out4)
        for name in a:
            if name == "manifest.json":
                continue
            assert a[name] == b[name], name

    def test_manifests_match_modulo_wall_time(self, tiny_cnn_archive, demo_png, tmp_path):
        out1, out2 = tmp_path / "m1", tmp_path / "m2"
        flags = ["--model", str(tiny_cnn_archive), "--image", str(demo_png), "--samples", "10"]
        assert main(["explain", *flags, "--out", str(out1)]) == 0
        assert main(["explain", *flags, "--out", str(out2)]) == 0
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        m1.pop("wall_time_s"), m2.pop("wall_time_s")
        assert m1 == m2

    def test_target_label_and_taps(self, tiny_cnn_archive, demo_png, tmp_path):
        out = tmp_path / "lbl"
        rc = main([
            "explain", "--model", str(tiny_cnn_archive), "--image", str(demo_png),
            "--samples", "5", "--target", "class_2", "--taps", "pool1",
            "--out", str(out),
        ])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["resolved_target"] == 2
        tap = heatmap_io.read_tensor_dump(out / "tap_pool1_mean.mcrt")
        assert tap.shape == (4, 4)

    def test_report_flag_adds_figure_and_csv(self, tiny_cnn_archive, demo_png, tmp_path):
        out = tmp_path / "rep"
        rc = main([
            "explain", "--model", str(tiny_cnn_archive), "--image", str(demo_png),
            "--samples", "5", "--report", "--out", str(out),
        ])
        assert rc == 0
        assert (out / "report.png").is_file()
        csv_text = (out / "summary.csv").read_text()
        assert csv_text.startswith("entry,statistic,value")
        assert "predictive_mean" in csv_text

    def test_threads_env_fallback(self, tiny_cnn_archive, demo_png, tmp_path, monkeypatch):
        monkeypatch.setenv("MCRP_THREADS", "3")
        out = tmp_path / "env"
        assert main([
            "explain", "--model", str(tiny_cnn_archive), "--image", str(demo_png),
            "--samples", "5", "--out", str(out),
        ]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["threads"] == 3

    def test_mcrt_dumps_carry_raw_metric_values(self, tiny_cnn_archive, demo_png, tmp_path):
        out = tmp_path / "vals"
        assert main([
            "explain", "--model", str(tiny_cnn_archive), "--image", str(demo_png),
            "--samples", "10", "--seed", "1", "--out", str(out),
        ]) == 0
        mean = heatmap_io.read_tensor_dump(out / "mean.mcrt")
        sigma = heatmap_io.read_tensor_dump(out / "sigma.mcrt")
        confusion = heatmap_io.read_tensor_dump(out / "confusion.mcrt")
        assert mean.shape == (8, 8)
        np.testing.assert_array_equal(confusion, (mean * sigma).astype(np.float32))


class TestInspect:
    def test_table_has_one_row_per_layer(self, tiny_mlp_archive, capsys):
        assert main(["inspect", "--model", str(tiny_mlp_archive)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        # header + rule + 4 layers + summary
        assert len(lines) == 7
        assert any("fc1" in line for line in lines)

    def test_json_mode(self, tiny_cnn_archive, capsys):
        assert main(["inspect", "--model", str(tiny_cnn_archive), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["layers"]) == 8
        assert payload["layers"][0]["kind"] == "conv2d"
        assert payload["input_shape"] == [3, 8, 8]

    def test_missing_model_exits_2(self, tmp_path):
        assert main(["inspect", "--model", str(tmp_path / "gone")]) == 2


class TestValidate:
    def test_all_positive_fixture_conserves(self, tmp_path, allpos_cnn, demo_png):
        from mcrp import archive

        path = tmp_path / "allpos"
        archive.write_archive(allpos_cnn, path)
        assert main(["validate", "--model", str(path), "--image", str(demo_png)]) == 0

    def test_dead_column_deficit_equals_leak(self, tmp_path, capsys):
        from mcrp import archive
        from mcrp.fixtures import dead_column_mlp

        path = tmp_path / "dead"
        archive.write_archive(dead_column_mlp(), path)
        img = tmp_path / "gray.png"
        raster = heatmap_io.RasterImage.from_tensor(np.full((3, 2, 2), 0.5, dtype=np.float32))
        heatmap_io.save_raster(raster, img)
        assert main(["validate", "--model", str(path), "--image", str(img)]) == 0
        out = capsys.readouterr().out
        assert "leak" in out
        assert "conservation holds" in out

    def test_corrupt_archive_exits_2(self, tmp_path, tiny_cnn_archive, demo_png):
        (tiny_cnn_archive / "weights.bin").write_bytes(b"short")
        assert main(["validate", "--model", str(tiny_cnn_archive), "--image", str(demo_png)]) == 2


class TestPredict:
    def test_predict_from_mcrt(self, tiny_cnn_archive, tmp_path, capsys, cnn_image):
        probe = tmp_path / "probe.mcrt"
        heatmap_io.write_tensor_dump(cnn_image, probe)
        rc = main(["predict", "--model", str(tiny_cnn_archive), "--input", str(probe)])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["logits"]) == 5
        assert payload["label"] == f"class_{payload['argmax']}"

    def test_predict_from_image_writes_dump(self, tiny_cnn_archive, demo_png, tmp_path, capsys):
        out = tmp_path / "logits.mcrt"
        rc = main(["predict", "--model", str(tiny_cnn_archive), "--input", str(demo_png),
                   "--out", str(out)])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        dumped = heatmap_io.read_tensor_dump(out)
        np.testing.assert_allclose(dumped, payload["logits"], atol=1e-6)

    def test_wrong_shape_probe(self, tiny_cnn_archive, tmp_path):
        probe = tmp_path / "probe.mcrt"
        heatmap_io.write_tensor_dump(np.zeros((1, 4, 4), dtype=np.float32), probe)
        rc = main(["predict", "--model", str(tiny_cnn_archive), "--input", str(probe)])
        assert rc != 0
