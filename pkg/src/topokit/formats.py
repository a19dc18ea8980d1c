"""File formats: annotation JSON, patch/graph documents, TBND tensors, PNG.

Annotation documents carry tiles with polylines in either geo units
("feet-geo": points are [x east, y north] in feet) or pixel units
("pixels": points are [col, row], row increasing downward). Patch and graph
documents always use pixel units.

TBND is a tiny container for f32 rasters: magic ``TBND``, three u32 fields
(height, width, channels) and H*W*C little-endian f32 values, row-major and
channel-interleaved. Endianness is fixed regardless of host.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import BoundaryGraph, BoundaryInstance, Vertex
from .ingest import Patch, Tile, geo_to_image, image_to_geo
from .labels import Raster
from .rollout import RolloutTrace

UNITS = ("feet-geo", "pixels")
FORMAT_VERSION = 1

_TBND_MAGIC = b"TBND"


def _dump_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _vertices_to_points(vertices) -> list[list[int]]:
    return [[v.col, v.row] for v in vertices]


def _points_to_vertices(points) -> tuple[Vertex, ...]:
    return tuple(Vertex(int(p[1]), int(p[0])) for p in points)


# --- annotation documents (tile level) ---------------------------------------


def tile_to_doc(tile: Tile, units: str = "feet-geo") -> dict:
    if units not in UNITS:
        raise ValueError(f"units must be one of {UNITS}")
    polylines = []
    for inst in sorted(tile.boundaries.instances, key=lambda i: i.id):
        if units == "feet-geo":
            polylines.append([list(image_to_geo(v, tile)) for v in inst.vertices])
        else:
            polylines.append(_vertices_to_points(inst.vertices))
    return {
        "version": FORMAT_VERSION,
        "units": units,
        "tiles": [
            {
                "id": tile.id,
                "geo_origin": list(tile.geo_origin),
                "resolution": tile.resolution,
                "size": [tile.height, tile.width],
                "polylines": polylines,
            }
        ],
    }


def save_annotations(tiles: list[Tile], path: Path, units: str = "feet-geo") -> None:
    docs = [tile_to_doc(t, units) for t in tiles]
    merged = {
        "version": FORMAT_VERSION,
        "units": units,
        "tiles": [d["tiles"][0] for d in docs],
    }
    _dump_json(merged, path)


def load_annotations(path: Path) -> list[Tile]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported annotation version {doc.get('version')}")
    units = doc.get("units")
    if units not in UNITS:
        raise ValueError(f"unknown units {units!r}")
    tiles = []
    for entry in doc["tiles"]:
        size = entry.get("size", [5000, 5000])
        tile = Tile(
            id=entry["id"],
            boundaries=BoundaryGraph(),
            height=int(size[0]),
            width=int(size[1]),
            geo_origin=tuple(entry.get("geo_origin", [0.0, 0.0])),
            resolution=float(entry.get("resolution", 1.0)),
        )
        instances = []
        for k, polyline in enumerate(entry["polylines"]):
            if len(polyline) < 2:
                raise ValueError(f"polyline {k} in tile {tile.id} has fewer than 2 points")
            if units == "feet-geo":
                verts = tuple(geo_to_image((p[0], p[1]), tile) for p in polyline)
            else:
                verts = _points_to_vertices(polyline)
            deduped = [verts[0]]
            for v in verts[1:]:
                if v != deduped[-1]:
                    deduped.append(v)
            if len(deduped) >= 2:
                instances.append(BoundaryInstance(len(instances) + 1, tuple(deduped)))
        tiles.append(
            Tile(
                id=tile.id,
                boundaries=BoundaryGraph(tuple(instances)),
                height=tile.height,
                width=tile.width,
                geo_origin=tile.geo_origin,
                resolution=tile.resolution,
            )
        )
    return tiles


# --- patch and graph documents (pixel units) ----------------------------------


def _graph_to_instance_records(graph: BoundaryGraph) -> list[dict]:
    return [
        {"id": inst.id, "vertices": _vertices_to_points(inst.vertices)}
        for inst in sorted(graph.instances, key=lambda i: i.id)
    ]


def _instances_from_records(records) -> BoundaryGraph:
    return BoundaryGraph(
        tuple(
            BoundaryInstance(int(rec["id"]), _points_to_vertices(rec["vertices"]))
            for rec in records
        )
    )


def save_patch(patch: Patch, path: Path) -> None:
    payload = {
        "version": FORMAT_VERSION,
        "units": "pixels",
        "patch": {
            "tile_id": patch.tile_id,
            "index": patch.index,
            "grid": patch.grid,
            "offset": list(patch.offset),
            "size": list(patch.size),
            "image": patch.image_ref,
        },
        "instances": _graph_to_instance_records(patch.boundaries),
    }
    _dump_json(payload, path)


def load_patch(path: Path) -> Patch:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("units") != "pixels":
        raise ValueError("patch documents must use pixel units")
    meta = doc["patch"]
    return Patch(
        tile_id=meta["tile_id"],
        index=int(meta["index"]),
        grid=int(meta.get("grid", 5)),
        offset=tuple(meta["offset"]),
        size=tuple(meta["size"]),
        image_ref=meta.get("image"),
        boundaries=_instances_from_records(doc["instances"]),
    )


def save_graph(graph: BoundaryGraph, path: Path, size: tuple[int, int] | None = None) -> None:
    payload: dict = {"version": FORMAT_VERSION, "units": "pixels"}
    if size is not None:
        payload["size"] = list(size)
    payload["instances"] = _graph_to_instance_records(graph)
    _dump_json(payload, path)


def load_graph(path: Path) -> BoundaryGraph:
    """Read a graph from a graph document or a patch document."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("units") != "pixels":
        raise ValueError("graph documents must use pixel units")
    return _instances_from_records(doc["instances"])


def load_graph_size(path: Path) -> tuple[int, int] | None:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "size" in doc:
        return tuple(doc["size"])
    if "patch" in doc:
        return tuple(doc["patch"]["size"])
    return None


# --- TBND tensors --------------------------------------------------------------


def save_tbnd(raster: Raster, path: Path) -> None:
    if raster.kind != "f32":
        raise ValueError("TBND stores f32 rasters only")
    data = raster.data
    if data.ndim == 2:
        data = data[:, :, np.newaxis]
    h, w, c = data.shape
    with open(path, "wb") as fh:
        fh.write(_TBND_MAGIC)
        fh.write(struct.pack("<III", h, w, c))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def load_tbnd(path: Path) -> Raster:
    raw = Path(path).read_bytes()
    if raw[:4] != _TBND_MAGIC:
        raise ValueError(f"{path} is not a TBND file")
    h, w, c = struct.unpack("<III", raw[4:16])
    if len(raw) != 16 + 4 * h * w * c:
        raise ValueError(f"{path} has inconsistent size for {h}x{w}x{c}")
    data = np.frombuffer(raw[16:], dtype="<f4").reshape(h, w, c)
    data = np.ascontiguousarray(data.astype(np.float32))
    if c == 1:
        data = data[:, :, 0]
    return Raster(data, "f32")


# --- PNG rasters ----------------------------------------------------------------


def save_png(raster: Raster, path: Path, scale_binary: bool = False) -> None:
    """Write a u8/u16 single-channel raster as PNG.

    ``scale_binary`` maps {0,1} to {0,255} for viewability; the instance map
    is written verbatim so ids survive a round trip.
    """
    if raster.channels != 1:
        raise ValueError("PNG export expects a single-channel raster")
    data = raster.data
    if raster.kind == "u8":
        if scale_binary:
            data = (data * 255).astype(np.uint8)
        img = Image.fromarray(data, mode="L")
    elif raster.kind == "u16":
        img = Image.fromarray(data.astype(np.uint16))  # PIL mode I;16
    else:
        raise ValueError("PNG export supports u8/u16 rasters only")
    img.save(path, format="PNG")


def load_png(path: Path) -> np.ndarray:
    return np.array(Image.open(path))


def save_placeholder_image(size: tuple[int, int], path: Path) -> None:
    """Flat 4-channel placeholder standing in for real aerial imagery."""
    img = Image.fromarray(np.zeros((size[0], size[1], 4), dtype=np.uint8), mode="RGBA")
    img.save(path, format="PNG")


# --- rollout traces --------------------------------------------------------------


def save_traces(traces: list[RolloutTrace], path: Path) -> None:
    """One JSON line per step, then one terminal line per episode."""
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            for t, step in enumerate(trace.steps):
                fh.write(
                    json.dumps(
                        {
                            "instance": trace.instance_id,
                            "round": trace.round_index,
                            "t": t,
                            "learner": [step.learner.row, step.learner.col],
                            "expert": [step.expert.row, step.expert.col],
                            "vertex": [step.vertex.row, step.vertex.col],
                            "beta": step.beta,
                            "radian_prev": step.radian_prev,
                        }
                    )
                    + "\n"
                )
            fh.write(
                json.dumps(
                    {
                        "instance": trace.instance_id,
                        "round": trace.round_index,
                        "terminal": trace.terminal,
                        "steps": len(trace.steps),
                    }
                )
                + "\n"
            )


def load_replay_vertices(path: Path) -> list[Vertex]:
    """Learner proposals from a trace file, for the replay policy."""
    vertices = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        rec = json.loads(line)
        if "learner" in rec:
            vertices.append(Vertex(rec["learner"][0], rec["learner"][1]))
    return vertices


# --- reports ----------------------------------------------------------------------


def save_filter_reports(reports, path: Path) -> None:
    payload = {
        "version": FORMAT_VERSION,
        "reports": [
            {"patch_id": r.patch_id, "verdict": r.verdict, "reason": r.reason}
            for r in reports
        ],
    }
    _dump_json(payload, path)


def save_splits(splits: dict[str, list[str]], path: Path) -> None:
    _dump_json({"version": FORMAT_VERSION, "splits": splits}, path)
