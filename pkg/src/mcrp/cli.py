"""Command-line front end: explain, inspect, validate, predict.

``explain`` orchestrates load -> sample -> estimate -> render and writes
one PNG plus one MCRT dump per requested metric together with a
machine-readable run manifest.  Exit codes: 1 bad arguments, 2 load
failure, 3 numerical failure, 4 conservation violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import zipfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ArchiveError, DimensionError, ImageIOError, McrpError, NumericalError
from .heatmap_io import RasterImage, RenderSpec, load_image, render_heatmap, save_raster, \
    read_tensor_dump, write_tensor_dump
from .model import all_ones_mask, forward, load_model, predict_deterministic, sample_mask
from .relprop import RelevanceSeed, relevance_pass
from .sampling import SamplingConfig, run_mcrp

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_LOAD = 2
EXIT_NUMERICAL = 3
EXIT_CONSERVATION = 4

METRIC_FIELDS = {"mean": "mean", "sigma": "sigma", "snr": "snr", "confusion": "confusion"}
CONSERVATION_TOLERANCE = 1e-5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract here is exit 1 with usage.
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for name in sorted(p.name for p in path.iterdir() if p.is_file()):
            h.update(name.encode())
            h.update((path / name).read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


def _load_model_input(path, model) -> np.ndarray:
    """Read an image resized to the model grid, collapsing RGB for 1-channel nets."""
    t = load_image(path, size=model.input_shape[1:])
    want_c = model.input_shape[0]
    if t.shape[0] != want_c:
        if want_c == 1:
            t = t.mean(axis=0, keepdims=True).astype(t.dtype)
        else:
            raise DimensionError(
                f"image has {t.shape[0]} channels, model expects {want_c}"
            )
    return t


def _default_threads() -> int:
    env = os.environ.get("MCRP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _build_parser() -> _Parser:
    parser = _Parser(prog="mcrp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_explain = sub.add_parser("explain", help="sample relevance maps and render heatmaps")
    p_explain.add_argument("--model", required=True, help="model archive (directory or zip)")
    p_explain.add_argument("--image", required=True, help="input image (PNG/PPM/PGM)")
    p_explain.add_argument("--samples", type=int, default=100, metavar="T")
    p_explain.add_argument("--keep-prob", type=float, default=None,
                           help="override every dropout layer's keep probability")
    p_explain.add_argument("--seed", type=int, default=0)
    p_explain.add_argument("--target", default="auto",
                           help="class index, class label, 'auto', or 'full'")
    p_explain.add_argument("--epsilon", type=float, default=1e-9)
    p_explain.add_argument("--metrics", default="mean,sigma,snr,confusion")
    p_explain.add_argument("--taps", default="", help="comma-separated layer names")
    p_explain.add_argument("--out", default="mcrp-out", metavar="DIR")
    p_explain.add_argument("--raw", action="store_true",
                           help="estimate over raw (unnormalized) relevance maps")
    p_explain.add_argument("--rescale-activations", action="store_true",
                           help="apply 1/keep_prob rescaling after dropout")
    p_explain.add_argument("--threads", type=int, default=None)
    p_explain.add_argument("--colormap", default="blackbody")
    p_explain.add_argument("--alpha", type=float, default=0.85)
    p_explain.add_argument("--report", action="store_true",
                           help="also write a panel figure and CSV summary")

    p_inspect = sub.add_parser("inspect", help="print the layer table of an archive")
    p_inspect.add_argument("--model", required=True)
    p_inspect.add_argument("--json", action="store_true", dest="as_json")

    p_validate = sub.add_parser("validate", help="check relevance conservation layer by layer")
    p_validate.add_argument("--model", required=True)
    p_validate.add_argument("--image", required=True)
    p_validate.add_argument("--seed", type=int, default=None,
                            help="sample a dropout mask instead of the deterministic pass")

    p_predict = sub.add_parser("predict", help="deterministic logits for one input")
    p_predict.add_argument("--model", required=True)
    p_predict.add_argument("--input", required=True, help="MCRT dump or image file")
    p_predict.add_argument("--out", default=None, help="optional MCRT dump for the logits")
    return parser


def _resolve_target(value: str, class_labels) -> str | int:
    if value == "auto":
        return "predicted_class"
    if value == "full":
        return "full_output"
    try:
        return int(value)
    except ValueError:
        pass
    if class_labels and value in class_labels:
        return class_labels.index(value)
    raise UsageError(f"unknown target {value!r}: not an index, label, 'auto', or 'full'")


def cmd_explain(args) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for m in metrics:
        if m not in METRIC_FIELDS:
            raise UsageError(f"unknown metric {m!r}; choose from {sorted(METRIC_FIELDS)}")
    if not metrics:
        raise UsageError("no metrics requested")

    model = load_model(args.model)
    image = _load_model_input(args.image, model)
    taps = tuple(t.strip() for t in args.taps.split(",") if t.strip())
    for name in taps:
        try:
            model.layer_index(name)
        except KeyError as exc:
            raise UsageError(f"unknown tap layer {name!r}") from exc
    try:
        config = SamplingConfig(
            samples=args.samples,
            base_seed=args.seed,
            p_keep=args.keep_prob,
            epsilon=args.epsilon,
            seed_mode=_resolve_target(args.target, model.class_labels),
            layer_taps=taps,
            normalize_maps=not args.raw,
            rescale_activations=args.rescale_activations,
            threads=args.threads if args.threads is not None else _default_threads(),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    started = time.time()
    samples, maps = run_mcrp(model, image, config)
    wall_time = time.time() - started

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    spec = RenderSpec(colormap=args.colormap, overlay_alpha=args.alpha)
    original = RasterImage.from_tensor(image)
    outputs = []
    rendered = {}
    for metric in metrics:
        grid = getattr(maps, METRIC_FIELDS[metric])
        raster = render_heatmap(grid, original, spec)
        rendered[metric] = raster
        png_path = outdir / f"{metric}.png"
        dump_path = outdir / f"{metric}.mcrt"
        save_raster(raster, png_path)
        write_tensor_dump(grid, dump_path)
        outputs += [png_path.name, dump_path.name]
    for name in taps:
        tap_dump = outdir / f"tap_{name}_mean.mcrt"
        write_tensor_dump(maps.tap_mean[name], tap_dump)
        outputs.append(tap_dump.name)

    if args.report:
        from . import report

        panels = [("input", original.pixels)]
        panels += [(m, rendered[m].pixels) for m in metrics]
        report.save_report_figure(outdir / "report.png", panels)
        report.save_summary_csv(outdir / "summary.csv", maps, samples, model.class_labels)
        outputs += ["report.png", "summary.csv"]

    leaks = [s.leak for s in samples]
    manifest = {
        "engine_version": __version__,
        "model": {"path": str(args.model), "sha256": _sha256(Path(args.model))},
        "image": {"path": str(args.image), "sha256": _sha256(Path(args.image))},
        "config": {
            "samples": config.samples,
            "base_seed": config.base_seed,
            "keep_prob_override": config.p_keep,
            "epsilon": config.epsilon,
            "target": args.target,
            "resolved_target": maps.target,
            "metrics": metrics,
            "taps": list(taps),
            "raw": args.raw,
            "rescale_activations": config.rescale_activations,
            "snr_epsilon": config.snr_epsilon,
            "threads": config.threads,
            "colormap": args.colormap,
            "overlay_alpha": args.alpha,
        },
        "wall_time_s": round(wall_time, 6),
        "leak": {
            "total": float(np.sum(leaks)),
            "mean_per_sample": float(np.mean(leaks)),
            "max": float(np.max(leaks)),
        },
        "outputs": outputs,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    label = ""
    if maps.target is not None and model.class_labels:
        label = f" ({model.class_labels[maps.target]})"
    target_desc = "full output" if maps.target is None else f"class {maps.target}{label}"
    print(f"explained {target_desc}: {config.samples} samples -> {outdir} ({len(outputs)} files)")
    return EXIT_OK


def _layer_rows(model) -> list[dict]:
    shapes = model.layer_shapes()
    rows = []
    for i, layer in enumerate(model.layers):
        rows.append(
            {
                "name": layer.name,
                "kind": layer.kind,
                "input_shape": list(shapes[i]),
                "output_shape": list(shapes[i + 1]),
                "params": layer.param_count(),
                "hyperparams": layer.hyperparams(),
            }
        )
    return rows


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    rows = _layer_rows(model)
    if args.as_json:
        print(json.dumps({"input_shape": list(model.input_shape),
                          "class_labels": model.class_labels, "layers": rows}, indent=2))
        return EXIT_OK
    header = f"{'name':<12} {'kind':<10} {'in':<14} {'out':<14} {'params':>8}  extras"
    print(header)
    print("-" * len(header))
    for row in rows:
        extras = " ".join(f"{k}={v}" for k, v in row["hyperparams"].items())
        print(
            f"{row['name']:<12} {row['kind']:<10} {str(row['input_shape']):<14} "
            f"{str(row['output_shape']):<14} {row['params']:>8}  {extras}"
        )
    total = sum(r["params"] for r in rows)
    dropout = [r["name"] for r in rows if r["kind"] == "dropout"] or ["none"]
    print(f"total parameters: {total}; dropout layers: {', '.join(dropout)}")
    return EXIT_OK


def cmd_validate(args) -> int:
    model = load_model(args.model)
    image = _load_model_input(args.image, model)
    if args.seed is None:
        mask = all_ones_mask(model)
    else:
        mask = sample_mask(model, args.seed, 0)
    trace = forward(model, image, mask)
    seed = RelevanceSeed.predicted_class(trace.logits)
    rel = relevance_pass(model, trace, seed, epsilon=0.0)
    sums = rel.boundary_sums()
    print(f"seed: class {seed.target}, relevance {sums[-1]:.6f}")
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        print(
            f"  {layer.name:<12} {layer.kind:<10} sum_in={sums[i]: .6f} "
            f"sum_out={sums[i + 1]: .6f} leak={rel.layer_leaks[i]:.6g}"
        )
    deficit = sums[-1] - sums[0]
    leak = rel.total_leak
    print(f"deficit {deficit:.6g} vs reported leak {leak:.6g}")
    if abs(deficit - leak) > CONSERVATION_TOLERANCE * max(1.0, abs(sums[-1])):
        print("conservation violated: deficit does not match the leak report", file=sys.stderr)
        return EXIT_CONSERVATION
    print("conservation holds (deficit fully accounted by leak)")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    input_path = Path(args.input)
    if input_path.suffix.lower() == ".mcrt":
        x = read_tensor_dump(input_path)
        if x.shape != model.input_shape:
            raise DimensionError(f"input {x.shape} does not match model {model.input_shape}")
    else:
        x = _load_model_input(input_path, model)
    logits = predict_deterministic(model, x)
    if args.out:
        write_tensor_dump(logits, args.out)
    k = int(np.argmax(logits))
    payload = {
        "logits": [float(v) for v in logits],
        "argmax": k,
        "label": model.class_labels[k] if model.class_labels else None,
    }
    print(json.dumps(payload))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "explain": cmd_explain,
            "inspect": cmd_inspect,
            "validate": cmd_validate,
            "predict": cmd_predict,
        }[args.command]
        return handler(args)
    except (UsageError, ValueError) as exc:
        message = str(exc)
        print(message, file=sys.stderr)
        if "usage:" not in message:
            print("usage: run 'mcrp <command> --help' for options", file=sys.stderr)
        return EXIT_USAGE
    except (ArchiveError, ImageIOError, FileNotFoundError, KeyError) as exc:
        print(f"load error: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except McrpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD


if __name__ == "__main__":
    sys.exit(main())
