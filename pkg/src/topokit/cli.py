"""Command-line surface: split, labelgen, eval, rollout, synth.

Every command is deterministic under --seed. Option precedence is
flags > --config file > built-in defaults; the config file is a flat JSON
object keyed by the long option names (dashes or underscores both accepted).
"""

from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import formats
from .geometry import BoundaryGraph, densify
from .ingest import FilterConfig, Patch, filter_patch, make_splits, split_tile
from .labels import (
    binary_map,
    direction_map,
    endpoint_map,
    instance_map,
    inverse_distance_map,
    orientation_map,
    orientation_raster_with_mask,
)
from .metrics import evaluate_graphs, mean_report
from .rollout import (
    EXPERT_KINDS,
    ExpertPolicy,
    FrozenOffsetPolicy,
    NoisyExpertPolicy,
    ReplayPolicy,
    RolloutConfig,
    run_patch_rollout,
)
from .synth import Degradation, SceneSpec, generate_scene, generate_tile

LABEL_ALIASES = {
    "all": ("sa", "sd", "binary", "instance", "endpoint", "invdist", "direction", "orientation"),
    # the connectivity metrics work on instance identities
    "ecm-inputs": ("instance",),
}
LABEL_CHOICES = LABEL_ALIASES["all"]


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _resolve(flag, config: dict, key: str, default):
    if flag is not None:
        return flag
    return config.get(key, default)


def _fail(message: str) -> None:
    raise click.ClickException(message)


@click.group()
def main() -> None:
    """Topological road-boundary toolkit."""


# --- split -----------------------------------------------------------------


def _process_tile(args) -> tuple[list[tuple[str, dict]], list]:
    tile, patch_size, grid, filter_cfg = args
    patches = split_tile(tile, patch_size=patch_size, grid=grid)
    reports = [filter_patch(p, filter_cfg) for p in patches]
    kept = []
    for patch, report in zip(patches, reports):
        if report.verdict == "kept":
            kept.append((patch.id, _patch_payload(patch)))
    return kept, reports


def _patch_payload(patch: Patch) -> dict:
    return {
        "version": formats.FORMAT_VERSION,
        "units": "pixels",
        "patch": {
            "tile_id": patch.tile_id,
            "index": patch.index,
            "grid": patch.grid,
            "offset": list(patch.offset),
            "size": list(patch.size),
            "image": patch.image_ref,
        },
        "instances": [
            {"id": inst.id, "vertices": [[v.col, v.row] for v in inst.vertices]}
            for inst in sorted(patch.boundaries.instances, key=lambda i: i.id)
        ],
    }


@main.command("split")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--patch-size", type=int, default=None)
@click.option("--grid", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--max-instances", type=int, default=None)
@click.option("--max-pixels", type=int, default=None)
@click.option("--jobs", type=int, default=None, envvar="TOPOKIT_JOBS")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def split_cmd(in_path, out_dir, patch_size, grid, seed, max_instances, max_pixels, jobs, config_path):
    """Split tile annotations into filtered patch files plus dataset splits."""
    config = _load_config(config_path)
    patch_size = _resolve(patch_size, config, "patch_size", 1000)
    grid = _resolve(grid, config, "grid", 5)
    seed = _resolve(seed, config, "seed", 0)
    jobs = _resolve(jobs, config, "jobs", 1)
    filter_cfg = FilterConfig(
        max_instances=_resolve(max_instances, config, "max_instances", 15),
        max_pixels=_resolve(max_pixels, config, "max_pixels", 12000),
    )
    try:
        tiles = formats.load_annotations(Path(in_path))
    except (ValueError, KeyError) as exc:
        _fail(f"malformed annotation file: {exc}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    work = [(tile, patch_size, grid, filter_cfg) for tile in tiles]
    try:
        if jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_process_tile, work))
        else:
            results = [_process_tile(w) for w in work]
    except ValueError as exc:
        _fail(str(exc))
    all_reports = []
    kept_ids = []
    for kept, reports in results:
        all_reports.extend(reports)
        for patch_id, payload in kept:
            (out / f"{patch_id}.json").write_text(
                json.dumps(payload, indent=2) + "\n", encoding="utf-8"
            )
            kept_ids.append(patch_id)
    formats.save_filter_reports(all_reports, out / "filter_reports.json")
    if kept_ids:
        formats.save_splits(make_splits(kept_ids, seed), out / "splits.json")
    dropped = sum(1 for r in all_reports if r.verdict == "dropped")
    click.echo(f"split: {len(kept_ids)} patches kept, {dropped} dropped")


# --- labelgen ----------------------------------------------------------------


@main.command("labelgen")
@click.option("--patch", "patch_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--labels", "labels_arg", default=None)
@click.option("--orient-start", type=click.Choice(["lexicographic", "random"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def labelgen_cmd(patch_path, out_dir, labels_arg, orient_start, seed, config_path):
    """Generate the requested ground-truth labels for one patch."""
    config = _load_config(config_path)
    labels_arg = _resolve(labels_arg, config, "labels", "all")
    orient_start = _resolve(orient_start, config, "orient_start", "lexicographic")
    seed = _resolve(seed, config, "seed", 0)
    wanted: list[str] = []
    for token in labels_arg.split(","):
        token = token.strip()
        if token in LABEL_ALIASES:
            wanted.extend(LABEL_ALIASES[token])
        elif token in LABEL_CHOICES:
            wanted.append(token)
        else:
            _fail(f"unknown label {token!r}; choices: {', '.join(LABEL_CHOICES + tuple(LABEL_ALIASES))}")
    try:
        patch = formats.load_patch(Path(patch_path))
    except (ValueError, KeyError) as exc:
        _fail(f"malformed patch file: {exc}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph = patch.boundaries
    dense = graph.densified()
    size = patch.size
    stem = patch.id
    written = []
    for name in dict.fromkeys(wanted):
        path = out / f"{stem}_{name}{_label_suffix(name)}"
        if name == "sa":
            formats.save_graph(graph, path, size=size)
        elif name == "sd":
            formats.save_graph(dense, path, size=size)
        elif name == "binary":
            formats.save_png(binary_map(dense, size), path)
        elif name == "instance":
            formats.save_png(instance_map(dense, size), path)
        elif name == "endpoint":
            formats.save_png(endpoint_map(graph, size), path)
        elif name == "invdist":
            formats.save_tbnd(inverse_distance_map(dense, size), path)
        elif name == "direction":
            formats.save_tbnd(direction_map(inverse_distance_map(dense, size)), path)
        elif name == "orientation":
            values, mask = orientation_map(graph, size, start=orient_start, seed=seed)
            formats.save_tbnd(orientation_raster_with_mask(values, mask), path)
        written.append(path.name)
    click.echo(f"labelgen: wrote {len(written)} artifacts to {out}")


def _label_suffix(name: str) -> str:
    if name in ("sa", "sd"):
        return ".json"
    if name in ("binary", "instance", "endpoint"):
        return ".png"
    return ".tbnd"


# --- eval ---------------------------------------------------------------------


def _parse_taus(arg: str) -> tuple[float, ...]:
    try:
        taus = tuple(float(t) for t in arg.split(","))
    except ValueError:
        _fail(f"bad tau list {arg!r}")
    if not taus or any(t < 1 for t in taus):
        _fail("tau values must be >= 1")
    return taus


def _eval_pair(args):
    pred_path, gt_path, taus = args
    pred = formats.load_graph(Path(pred_path))
    gt = formats.load_graph(Path(gt_path))
    return evaluate_graphs(pred, gt, taus)


@main.command("eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--tau", "tau_arg", default=None)
@click.option("--json", "json_path", type=click.Path(), default=None)
@click.option("--render", "render_path", type=click.Path(), default=None)
@click.option("--size", "size_arg", default=None, help="HxW for --render, e.g. 1000x1000")
@click.option("--jobs", type=int, default=None, envvar="TOPOKIT_JOBS")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def eval_cmd(pred_path, gt_path, tau_arg, json_path, render_path, size_arg, jobs, config_path):
    """Evaluate predicted against ground-truth graphs (files or directories)."""
    config = _load_config(config_path)
    taus = _parse_taus(_resolve(tau_arg, config, "tau", "1,2,5,10"))
    jobs = _resolve(jobs, config, "jobs", 1)
    pred_p, gt_p = Path(pred_path), Path(gt_path)
    try:
        if pred_p.is_dir() != gt_p.is_dir():
            _fail("--pred and --gt must both be files or both be directories")
        if pred_p.is_dir():
            names = sorted(
                {p.name for p in pred_p.glob("*.json")} & {p.name for p in gt_p.glob("*.json")}
            )
            if not names:
                _fail("no matching .json files between the two directories")
            work = [(pred_p / n, gt_p / n, taus) for n in names]
            if jobs > 1 and len(work) > 1:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    reports = list(pool.map(_eval_pair, work))
            else:
                reports = [_eval_pair(w) for w in work]
            report = mean_report(reports)
        else:
            report = _eval_pair((pred_p, gt_p, taus))
    except ValueError as exc:
        _fail(str(exc))
    for line in report.to_kv_lines():
        click.echo(line)
    if json_path:
        Path(json_path).write_text(
            json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )
    if render_path:
        if pred_p.is_dir():
            _fail("--render works on single files only")
        size = _parse_size(_resolve(size_arg, config, "size", None), pred_p, gt_p)
        _render_overlay(
            formats.load_graph(pred_p), formats.load_graph(gt_p), size, Path(render_path)
        )


def _parse_size(arg, pred_p: Path, gt_p: Path) -> tuple[int, int]:
    if arg:
        h, w = arg.lower().split("x")
        return int(h), int(w)
    for p in (pred_p, gt_p):
        size = formats.load_graph_size(p)
        if size:
            return size
    # fall back to the graphs' extent
    h = w = 0
    for p in (pred_p, gt_p):
        for inst in formats.load_graph(p).instances:
            for v in inst.vertices:
                h, w = max(h, v.row + 1), max(w, v.col + 1)
    return h, w


def _render_overlay(pred: BoundaryGraph, gt: BoundaryGraph, size, path: Path) -> None:
    canvas = np.zeros((size[0], size[1], 3), dtype=np.uint8)
    for inst in gt.instances:
        for v in densify(inst).vertices:
            canvas[v.row, v.col] = (0, 255, 255)
    for inst in pred.instances:
        for v in densify(inst).vertices:
            already = tuple(canvas[v.row, v.col]) == (0, 255, 255)
            canvas[v.row, v.col] = (255, 255, 255) if already else (255, 165, 0)
    Image.fromarray(canvas, mode="RGB").save(path, format="PNG")


# --- rollout ---------------------------------------------------------------------


def _parse_policy(spec: str):
    head, _, rest = spec.partition(":")
    params = {}
    if rest:
        for part in rest.split(","):
            key, _, value = part.partition("=")
            params[key.strip()] = value.strip()
    if head == "expert":
        return lambda: ExpertPolicy()
    if head == "noisy":
        sigma = float(params.get("sigma", 2.0))
        return lambda: NoisyExpertPolicy(sigma)
    if head == "frozen":
        dr = int(params.get("dr", 0))
        dc = int(params.get("dc", 5))
        return lambda: FrozenOffsetPolicy(dr, dc)
    if head == "replay":
        if "path" not in params:
            _fail("replay policy needs path=<trace.jsonl>")
        vertices = formats.load_replay_vertices(Path(params["path"]))
        return lambda: ReplayPolicy(vertices)
    _fail(f"unknown policy {head!r}; choices: expert, noisy, frozen, replay")


@main.command("rollout")
@click.option("--patch", "patch_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--policy", "policy_arg", default=None)
@click.option("--expert", "expert_kind", type=click.Choice(EXPERT_KINDS), default=None)
@click.option("--beta0", type=float, default=None)
@click.option("--beta-min", type=float, default=None)
@click.option("--lambda", "decay", type=float, default=None)
@click.option("--theta-deg", type=float, default=None)
@click.option("--dmax", type=int, default=None)
@click.option("--rounds", type=int, default=None)
@click.option("--max-steps", type=int, default=None)
@click.option("--init-sigma", type=float, default=None)
@click.option("--patch-index", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def rollout_cmd(
    patch_path,
    out_dir,
    policy_arg,
    expert_kind,
    beta0,
    beta_min,
    decay,
    theta_deg,
    dmax,
    rounds,
    max_steps,
    init_sigma,
    patch_index,
    seed,
    config_path,
):
    """Run rollout episodes over a patch; writes trace.jsonl and generated.json."""
    config = _load_config(config_path)
    policy_factory = _parse_policy(_resolve(policy_arg, config, "policy", "expert"))
    expert_kind = _resolve(expert_kind, config, "expert", "orientation")
    cfg = RolloutConfig(
        theta=math.radians(_resolve(theta_deg, config, "theta_deg", 15.0)),
        d_max=_resolve(dmax, config, "dmax", 30),
        beta0=_resolve(beta0, config, "beta0", 1.0),
        beta_min=_resolve(beta_min, config, "beta_min", 0.0),
        decay=_resolve(decay, config, "lambda", 0.05),
        max_steps=_resolve(max_steps, config, "max_steps", 2000),
        rounds=_resolve(rounds, config, "rounds", 3),
        init_noise_sigma=_resolve(init_sigma, config, "init_sigma", 3.0),
    )
    patch_index = _resolve(patch_index, config, "patch_index", 0)
    seed = _resolve(seed, config, "seed", 0)
    try:
        patch = formats.load_patch(Path(patch_path))
        generated, traces = run_patch_rollout(
            patch, policy_factory, expert_kind, cfg, seed=seed, patch_index=patch_index
        )
    except ValueError as exc:
        _fail(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats.save_traces(traces, out / "trace.jsonl")
    formats.save_graph(generated, out / "generated.json", size=patch.size)
    click.echo(
        f"rollout: {len(traces)} episodes, {sum(len(t.steps) for t in traces)} steps"
    )


# --- synth -----------------------------------------------------------------------


def _degradation_from_doc(doc: dict) -> Degradation:
    keep = doc.get("keep_intervals")
    if keep is not None:
        keep = tuple(
            (int(idx), tuple((float(a), float(b)) for a, b in intervals))
            for idx, intervals in keep
        )
    return Degradation(
        gap_count=int(doc.get("gap_count", 0)),
        gap_length=float(doc.get("gap_length", 0.0)),
        jitter_sigma=float(doc.get("jitter_sigma", 0.0)),
        drop_fraction=float(doc.get("drop_fraction", 0.0)),
        spurious_count=int(doc.get("spurious_count", 0)),
        keep_intervals=keep,
    )


def load_scene_spec(path: Path, seed_override: int | None = None) -> SceneSpec:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return SceneSpec(
        seed=seed_override if seed_override is not None else int(doc["seed"]),
        size=tuple(doc.get("size", [256, 256])),
        n_instances=int(doc.get("n_instances", 3)),
        family=doc.get("family", "polyline"),
        degradation=_degradation_from_doc(doc.get("degradation", {})),
    )


@main.command("synth")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="override the spec's seed")
@click.option("--tile", "tile_mode", is_flag=True, default=False)
def synth_cmd(spec_path, out_dir, seed, tile_mode):
    """Generate a synthetic scene (gt + degraded pred) or a tile annotation."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if tile_mode:
            doc = json.loads(Path(spec_path).read_text(encoding="utf-8"))
            tile = generate_tile(
                seed=seed if seed is not None else int(doc["seed"]),
                tile_id=doc.get("tile_id", "tile0"),
                size=int(doc.get("tile_size", 5000)),
                n_instances=int(doc.get("n_instances", 30)),
                family=doc.get("family", "polyline"),
            )
            formats.save_annotations([tile], out / "annotations.json", units="feet-geo")
            click.echo(f"synth: wrote tile annotation with {len(tile.boundaries)} instances")
            return
        spec = load_scene_spec(Path(spec_path), seed_override=seed)
        gt, pred = generate_scene(spec)
        formats.save_graph(gt, out / "gt.json", size=spec.size)
        formats.save_graph(pred, out / "pred.json", size=spec.size)
        formats.save_placeholder_image(spec.size, out / "image.png")
    except (ValueError, KeyError) as exc:
        _fail(f"bad scene spec: {exc}")
    click.echo(f"synth: wrote scene ({len(gt)} gt, {len(pred)} pred instances)")


if __name__ == "__main__":
    sys.exit(main())
