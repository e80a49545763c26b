"""Command-line interface: tile, simulate, fuse, eval, bench, serve.

Every subcommand also accepts --config pointing at a single JSON file;
explicit flags override file values.
"""

from __future__ import annotations

import glob
import json
import sys
from pathlib import Path

import click

from .backends import load_detection_file
from .bench import bench_table1
from .evaluation import EvalConfig, evaluate, format_report
from .fusion import WcfConfig, fused_document, parse_fused_document
from .geojson_io import read_geojson, import_geojson, write_geojson
from .pipeline import BackendConfig, dump_json, run_pipeline
from .review import ReviewState, create_app
from .synthetic import (
    SynthConfig,
    read_ground_truth,
    simulate_ensemble,
    runs_to_detection_files,
    write_ground_truth,
)
from .tiling import Patch, SlideGeometry, TilingConfig, generate_patches

DETECTION_SCHEMA = "circlefuse-detections/1"


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _cfg_value(ctx: click.Context, name: str, cfg: dict, *keys):
    """Flag value if given on the command line, else config-file value."""
    if ctx.get_parameter_source(name) == click.core.ParameterSource.COMMANDLINE:
        return ctx.params[name]
    node = cfg
    for key in keys:
        if not isinstance(node, dict) or key not in node:
            return ctx.params[name]
        node = node[key]
    return node


def _patches_to_json(patches: list[Patch]) -> list[dict]:
    return [{"patch_id": p.patch_id, "x": p.x, "y": p.y, "w": p.w, "h": p.h} for p in patches]


def _patches_from_json(path: Path) -> list[Patch]:
    raw = json.loads(path.read_text(encoding="utf-8"))
    return [Patch(e["patch_id"], int(e["x"]), int(e["y"]), int(e["w"]), int(e["h"])) for e in raw]


def _expand_detection_paths(values: list[str]) -> list[Path]:
    out: list[Path] = []
    for value in values:
        path = Path(value)
        if path.exists():
            out.append(path)
            continue
        matches = sorted(glob.glob(value))
        if not matches:
            raise click.BadParameter(f"no detection file matches {value!r}",
                                     param_hint="--detections")
        out.extend(Path(m) for m in matches)
    seen = set()
    unique = []
    for p in out:
        if p not in seen:
            seen.add(p)
            unique.append(p)
    return unique


@click.group()
def main():
    """Circle-detection post-processing for whole-slide images."""


@main.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--slide-id", default=None)
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--patch", "patch_size", type=int, default=512, show_default=True)
@click.option("--overlap", type=float, default=0.5, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def tile(ctx, config, slide_id, width, height, patch_size, overlap, output):
    """Write the half-overlapping patch grid as a JSON array."""
    cfg = _load_config(config)
    slide_cfg = cfg.get("slide", {})
    slide_id = slide_id if slide_id is not None else slide_cfg.get("slide_id")
    width = width if width is not None else slide_cfg.get("width")
    height = height if height is not None else slide_cfg.get("height")
    if slide_id is None or width is None or height is None:
        raise click.UsageError("--slide-id/--width/--height required (flags or --config)")
    patch_size = _cfg_value(ctx, "patch_size", cfg, "tiling", "patch_size")
    overlap = _cfg_value(ctx, "overlap", cfg, "tiling", "overlap_fraction")
    slide = SlideGeometry(slide_id, int(width), int(height))
    patches = generate_patches(slide, TilingConfig(patch_size, overlap))
    Path(output).write_text(dump_json(_patches_to_json(patches)), encoding="utf-8")
    click.echo(f"wrote {len(patches)} patches to {output}")


@main.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--tiled", is_flag=True, help="Write detections against the real patch grid.")
@click.option("--patch", "patch_size", type=int, default=512, show_default=True)
@click.option("--overlap", type=float, default=0.5, show_default=True)
@click.option("-o", "--outdir", type=click.Path(file_okay=False), required=True)
def simulate(config, seed, tiled, patch_size, overlap, outdir):
    """Generate ground truth plus K noisy model detection files."""
    raw = _load_config(config)
    synth = SynthConfig.from_dict(raw.get("synth", raw)) if raw else SynthConfig()
    if seed is not None:
        synth.seed = seed
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    gt, runs = simulate_ensemble(synth)
    write_ground_truth(gt, outdir / "gt.json")

    slide = synth.slide
    if tiled:
        patches = generate_patches(slide, TilingConfig(patch_size, overlap))
    else:
        patches = generate_patches(
            slide, TilingConfig(max(slide.width, slide.height), 0.5)
        )
    (outdir / "patches.json").write_text(
        dump_json(_patches_to_json(patches)), encoding="utf-8"
    )

    for df in runs_to_detection_files(runs, slide, patches):
        doc = {
            "schema": DETECTION_SCHEMA,
            "model_id": df.model_id,
            "slide_id": df.slide_id,
            "patches": [
                {
                    "patch_id": pid,
                    "detections": [
                        {
                            "cx": d.circle.cx,
                            "cy": d.circle.cy,
                            "r": d.circle.r,
                            "score": d.score,
                            "label": d.label,
                        }
                        for d in dets
                    ],
                }
                for pid, dets in df.patches.items()
            ],
        }
        path = outdir / f"{df.model_id}.detections.json"
        path.write_text(dump_json(doc), encoding="utf-8")
    click.echo(
        f"wrote gt.json ({len(gt.circles)} objects), patches.json "
        f"({len(patches)} patches), and {len(runs)} detection files to {outdir}"
    )


@main.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--patches", "patches_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--detections", "detection_paths", multiple=True, required=True,
              help="Detection file; repeatable, glob patterns allowed.")
@click.argument("extra_detections", nargs=-1, type=click.Path())
@click.option("--nms-ciou", type=float, default=0.5, show_default=True)
@click.option("--t-match", type=float, default=0.5, show_default=True)
@click.option("--t-count", type=int, default=2, show_default=True)
@click.option("--t-score", type=float, default=0.9, show_default=True)
@click.option("--retention", type=click.Choice(["count_or_score", "count_and_score", "count_only"]),
              default="count_or_score", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), required=True)
@click.option("--geojson", "geojson_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def fuse(ctx, config, patches_path, detection_paths, extra_detections, nms_ciou, t_match,
         t_count, t_score, retention, workers, output, geojson_path):
    """Assemble detection files, de-duplicate per model, fuse, and export.

    A shell-expanded `--detections model_*.json` works: paths following the
    first one arrive as plain arguments and are folded into the same list.
    """
    detection_paths = _expand_detection_paths(list(detection_paths) + list(extra_detections))
    cfg = _load_config(config)
    nms_ciou = _cfg_value(ctx, "nms_ciou", cfg, "nms_ciou")
    wcf_cfg = WcfConfig(
        t_match=_cfg_value(ctx, "t_match", cfg, "wcf", "t_match"),
        t_count=_cfg_value(ctx, "t_count", cfg, "wcf", "t_count"),
        t_score=_cfg_value(ctx, "t_score", cfg, "wcf", "t_score"),
        retention_policy=_cfg_value(ctx, "retention", cfg, "wcf", "retention_policy"),
    )

    patches = _patches_from_json(Path(patches_path))
    width = max(p.x + p.w for p in patches)
    height = max(p.y + p.h for p in patches)
    slide_id = load_detection_file(detection_paths[0]).slide_id
    slide = SlideGeometry(slide_id, width, height)

    result = run_pipeline(
        slide,
        TilingConfig(max(p.w for p in patches), 0.5),
        BackendConfig(kind="files", detection_files=tuple(detection_paths)),
        wcf_cfg,
        nms_ciou=nms_ciou,
        workers=workers,
        patches=patches,
    )
    out = Path(output)
    out.write_text(dump_json(fused_document(result.fused, slide_id)), encoding="utf-8")
    manifest_path = out.with_suffix(".manifest.json")
    manifest_path.write_text(dump_json(result.manifest), encoding="utf-8")
    if geojson_path:
        write_geojson(result.geojson, geojson_path)
    counts = result.manifest["counts"]
    click.echo(
        f"fused {counts['detections_in']} detections -> {counts['fused_retained']} "
        f"consensus circles ({out}, manifest {manifest_path.name})"
    )


@main.command(name="eval")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--pred", "pred_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gt", "gt_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--thresholds", default="0.5:0.95:0.05", show_default=True,
              help="start:stop:step sweep of cIoU thresholds.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def eval_cmd(ctx, config, pred_path, gt_path, thresholds, output):
    """Score fused predictions against ground truth."""
    cfg = _load_config(config)
    thresholds = _cfg_value(ctx, "thresholds", cfg, "eval", "thresholds")
    try:
        start, stop, step = (float(v) for v in thresholds.split(":"))
    except ValueError:
        raise click.BadParameter("expected start:stop:step", param_hint="--thresholds")
    ts = []
    t = start
    while t <= stop + 1e-9:
        ts.append(round(t, 10))
        t += step

    _, fused = parse_fused_document(json.loads(Path(pred_path).read_text(encoding="utf-8")))
    gt = read_ground_truth(gt_path)
    report = evaluate(fused, gt.circles, EvalConfig(thresholds=tuple(ts)))
    click.echo(format_report(report))
    if output:
        Path(output).write_text(dump_json(report.to_dict()), encoding="utf-8")
        click.echo(f"report written to {output}")


@main.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seeds", type=int, default=20, show_default=True, help="Number of seeds.")
@click.option("--base-seed", type=int, default=None, help="First seed (default: config seed).")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def bench(config, seeds, base_seed, output):
    """Compare single models, pooled NMS, pooled Soft-NMS, and WCF."""
    raw = _load_config(config)
    synth = SynthConfig.from_dict(raw.get("synth", raw)) if raw else SynthConfig()
    first = base_seed if base_seed is not None else synth.seed
    result = bench_table1(synth, [first + i for i in range(seeds)])
    table = result.to_markdown()
    click.echo(table)
    if output:
        Path(output).write_text(table + "\n", encoding="utf-8")
        click.echo(f"table written to {output}")


@main.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--fused", "fused_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--geojson", "geojson_path", type=click.Path(dir_okay=False), default=None,
              help="Export target; loaded as input when --fused is absent.")
@click.option("--image", "image_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--downsample", type=float, default=1.0, show_default=True)
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), default=None,
              help="Directory of built review-UI static files to serve at /.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.pass_context
def serve(ctx, config, fused_path, geojson_path, image_path, downsample, width, height,
          ui_dir, host, port):
    """Serve the review API (and optionally the review UI) for a fused set."""
    cfg = _load_config(config)
    fused_path = fused_path or cfg.get("serve", {}).get("fused")
    geojson_path = geojson_path or cfg.get("serve", {}).get("geojson")
    image_path = image_path or cfg.get("serve", {}).get("image")
    downsample = _cfg_value(ctx, "downsample", cfg, "serve", "downsample")
    ui_dir = ui_dir or cfg.get("serve", {}).get("ui")
    host = _cfg_value(ctx, "host", cfg, "serve", "host")
    port = _cfg_value(ctx, "port", cfg, "serve", "port")
    if fused_path:
        slide_id, fused = parse_fused_document(
            json.loads(Path(fused_path).read_text(encoding="utf-8"))
        )
    elif geojson_path and Path(geojson_path).exists():
        imported = import_geojson(read_geojson(geojson_path))
        slide_id, fused = imported.slide_id, imported.fused
        for err in imported.errors:
            click.echo(f"warning: {err}", err=True)
    else:
        raise click.UsageError("provide --fused, or --geojson pointing at an existing file")

    if width is None:
        width = int(max((f.circle.cx + f.circle.r for f in fused), default=1024)) + 1
    if height is None:
        height = int(max((f.circle.cy + f.circle.r for f in fused), default=1024)) + 1

    state = ReviewState(
        fused,
        slide_id=slide_id,
        width=width,
        height=height,
        image_path=image_path,
        downsample=downsample,
        export_path=geojson_path or "review_export.geojson",
    )
    app = create_app(state)
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    import uvicorn

    click.echo(f"review service for {slide_id!r}: {len(fused)} detections on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    sys.exit(main())
