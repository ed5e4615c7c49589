"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with ``pytest -s tests/test_acceptance.py`` to see the verdict lines.
"""

import json
import time

import numpy as np
import pytest

from mcrp import archive, fixtures, heatmap_io
from mcrp.cli import main
from mcrp.model import all_ones_mask, forward
from mcrp.relprop import RelevanceSeed, relevance_pass, zplus_conv, zplus_dense
from mcrp.sampling import SamplingConfig, deterministic_relevance_map, mean_variance, run_mcrp

from test_relprop import unroll_conv_as_dense, zplus_dense_oracle


def verdict(name):
    print(f"[PASS] {name}")


class TestAcceptance:
    def test_conservation(self, allpos_cnn, cnn_image):
        started = time.perf_counter()

        trace = forward(allpos_cnn, cnn_image, all_ones_mask(allpos_cnn))
        seed = RelevanceSeed.predicted_class(trace.logits)
        rel = relevance_pass(allpos_cnn, trace, seed, epsilon=0.0)
        sums = rel.boundary_sums()
        for i, s in enumerate(sums):
            assert s == pytest.approx(sums[-1], rel=1e-4), f"boundary {i}: {s} vs {sums[-1]}"

        dead = fixtures.dead_column_mlp()
        x = np.full((1, 2, 2), 0.5, dtype=np.float32)
        dtrace = forward(dead, x, all_ones_mask(dead))
        drel = relevance_pass(dead, dtrace, RelevanceSeed.predicted_class(dtrace.logits), epsilon=0.0)
        dsums = drel.boundary_sums()
        deficit = dsums[-1] - dsums[0]
        assert drel.total_leak > 0
        assert deficit == pytest.approx(drel.total_leak, abs=1e-5)

        elapsed = time.perf_counter() - started
        assert elapsed < 1.0, f"conservation check took {elapsed:.2f}s"
        verdict(
            "conservation: per-boundary sums within 1e-4 relative; "
            f"dead-column deficit equals leak within 1e-5; {elapsed * 1000:.0f} ms"
        )

    def test_zplus_oracle_equivalence(self):
        gen = np.random.default_rng(500)
        for _ in range(100):
            n_in = int(gen.integers(1, 9))
            n_out = int(gen.integers(1, 9))
            x = gen.uniform(0, 1, n_in).astype(np.float32)
            w = gen.uniform(-1, 1, (n_in, n_out)).astype(np.float32)
            r_out = gen.uniform(0, 1, n_out).astype(np.float32)
            got, _ = zplus_dense(x, w, r_out)
            want, _ = zplus_dense_oracle(x, w, r_out)
            np.testing.assert_allclose(got, want, atol=1e-6)

        for _ in range(20):
            c = int(gen.integers(1, 3))
            k = int(gen.integers(1, 4))
            kh = int(gen.integers(1, 4))
            stride = int(gen.integers(1, 3))
            size = kh + stride * int(gen.integers(0, 3))  # always tiles
            x = gen.uniform(0, 1, (c, size, size)).astype(np.float32)
            kern = gen.uniform(-1, 1, (k, c, kh, kh)).astype(np.float32)
            hh = (size - kh) // stride + 1
            r_out = gen.uniform(0, 1, (k, hh, hh)).astype(np.float32)
            got, got_leak = zplus_conv(x, kern, stride, 0, r_out)
            big = unroll_conv_as_dense(x.shape, kern, stride, 0).astype(np.float32)
            want, want_leak = zplus_dense(x.reshape(-1), big, r_out.reshape(-1))
            np.testing.assert_allclose(got.reshape(-1), want, atol=1e-6)
            assert got_leak == pytest.approx(want_leak, abs=1e-6)
        verdict("z+ oracle equivalence: 100 dense + 20 conv layers within 1e-6")

    def test_estimator_identity(self):
        gen = np.random.default_rng(501)
        for _ in range(50):
            stack = gen.uniform(0, 1, (100, 5, 5)).astype(np.float32)
            mean, var = mean_variance(stack)
            mu64 = stack.astype(np.float64).mean(axis=0)
            var2 = ((stack.astype(np.float64) - mu64) ** 2).mean(axis=0)
            np.testing.assert_allclose(var, var2, atol=1e-6)
            np.testing.assert_allclose(mean, mu64, atol=1e-6)
        verdict("estimator identity: one-pass variance equals two-pass within 1e-6 (50 sets, T=100)")

    def test_zero_dropout_collapse(self, tiny_cnn, cnn_image):
        config = SamplingConfig(samples=100, base_seed=0, p_keep=1.0)
        _, maps = run_mcrp(tiny_cnn, cnn_image, config)
        assert (maps.sigma == 0.0).all()
        assert (maps.variance == 0.0).all()
        det = deterministic_relevance_map(tiny_cnn, cnn_image, config)
        assert np.array_equal(maps.mean, det)
        verdict("zero-dropout collapse: sigma identically 0, mean bit-equal to the single pass")

    def test_normalization(self, tiny_cnn, cnn_image):
        samples, _ = run_mcrp(tiny_cnn, cnn_image, SamplingConfig(samples=50, base_seed=17))
        saw_nonconstant = False
        for s in samples:
            assert s.pixel_map.min() >= 0.0 and s.pixel_map.max() <= 1.0
            if not np.all(s.pixel_map == s.pixel_map.flat[0]):
                saw_nonconstant = True
                assert s.pixel_map.min() == 0.0
                assert s.pixel_map.max() == 1.0
        assert saw_nonconstant
        from mcrp.sampling import normalize

        assert (normalize(np.full((4, 4), 2.5, dtype=np.float32)) == 0).all()
        verdict("normalization: maps in [0,1], endpoints attained, constant maps zeroed")

    def test_cmd_explain_determinism(self, tiny_cnn_archive, tmp_path):
        img = tmp_path / "demo.png"
        heatmap_io.save_raster(heatmap_io.RasterImage.from_tensor(fixtures.demo_image()), img)
        flags = ["--model", str(tiny_cnn_archive), "--image", str(img),
                 "--samples", "20", "--seed", "5"]
        outputs = {}
        for tag, extra in [("r1", ["--threads", "1"]), ("r2", ["--threads", "1"]),
                           ("t4", ["--threads", "4"])]:
            out = tmp_path / tag
            assert main(["explain", *flags, *extra, "--out", str(out)]) == 0
            outputs[tag] = {
                p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "manifest.json"
            }
        assert outputs["r1"] == outputs["r2"]
        assert outputs["r1"] == outputs["t4"]
        verdict("cmd_explain determinism: byte-identical outputs across runs and threads 1/4")

    def test_protocol_defaults(self, tiny_cnn_archive, tmp_path):
        img = tmp_path / "demo.png"
        heatmap_io.save_raster(heatmap_io.RasterImage.from_tensor(fixtures.demo_image()), img)
        out = tmp_path / "proto"
        started = time.perf_counter()
        rc = main(["explain", "--model", str(tiny_cnn_archive), "--image", str(img),
                   "--out", str(out)])
        elapsed = time.perf_counter() - started
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["samples"] == 100  # protocol default
        assert manifest["config"]["keep_prob_override"] is None  # archive-declared 0.5 applies
        assert elapsed < 5.0, f"default run took {elapsed:.2f}s"
        verdict(f"protocol defaults: T=100 with archive dropout 0.5 in {elapsed:.2f}s (< 5 s)")

    def test_mcrt_round_trip(self, tmp_path):
        gen = np.random.default_rng(502)
        cases = []
        for _ in range(98):
            rank = int(gen.integers(1, 5))
            shape = tuple(int(gen.integers(1, 7)) for _ in range(rank))
            cases.append(gen.standard_normal(shape).astype(np.float32))
        cases.append(np.array([7.5], dtype=np.float32))  # 1-element
        cases.append(gen.standard_normal((1, 200000)).astype(np.float32))  # large extent
        for i, t in enumerate(cases):
            path = tmp_path / f"t{i}.mcrt"
            heatmap_io.write_tensor_dump(t, path)
            back = heatmap_io.read_tensor_dump(path)
            assert back.shape == t.shape
            assert np.array_equal(back, t)
        verdict("MCRT round-trip: 100 tensors bit-exact incl. 1-element and large extents")
