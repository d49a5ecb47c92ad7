"""Synthetic feature-grid scenes with a planted part-dominance trap.

Each image is an (H, W, K) feature grid containing one or more
rectangular objects on a zero background. An object body carries its
category's unit feature direction, its one-pixel boundary ring carries
the same direction plus a small shared edge component, and most
objects hide a small interior part whose features point the same way
but with several times the magnitude. A classifier trained only on
image labels finds the part more discriminative than the body, so its
best-scoring box collapses onto the part; region growing from saliency
seeds recovers the full body instead, and merges touching same-category
bodies into one oversized region. Those two failure modes, and the gap
between them, are what the curriculum machinery is built to exploit.

Proposals always include, per object, a part-tight box, the body-tight
box, and an oversized box, plus a coarse sliding grid.
"""
from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from micl.evaluation import GroundTruthObject
from micl.geometry import BoundingBox

_TAG = 0x53594E44  # domain separator for generator rng streams

PLANT_RATIO_THRESHOLD = 2.0


@dataclass
class GenConfig:
    n_images: int = 200
    n_categories: int = 3
    height: int = 32
    width: int = 32
    n_channels: int = 12
    objects_per_image: tuple[int, int] = (2, 2)
    body_size: tuple[int, int] = (9, 14)
    part_area_ratio: tuple[float, float] = (0.10, 0.20)
    part_scale: float = 2.2
    easy_object_prob: float = 0.95
    adjacent_pair_prob: float = 0.35
    edge_magnitude: float = 0.35
    ring_scale: float = 1.2
    ring_magnitude: float = 1.0
    interior_level: float = 0.9
    noise_sigma: float = 0.05
    oversize_factor: float = 1.8
    max_place_attempts: int = 40
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_images < 0:
            raise ValueError("n_images must be >= 0")
        if self.n_categories < 1:
            raise ValueError("n_categories must be >= 1")
        if 3 * self.n_categories > self.n_channels - 1:
            raise ValueError("need n_channels >= 3 * n_categories + 1")
        lo, hi = self.objects_per_image
        if not 1 <= lo <= hi:
            raise ValueError("objects_per_image must satisfy 1 <= lo <= hi")
        blo, bhi = self.body_size
        if not 4 <= blo <= bhi:
            raise ValueError("body_size must satisfy 4 <= lo <= hi")
        if bhi + 2 > min(self.height, self.width):
            raise ValueError("bodies must fit inside the image with a margin")
        rlo, rhi = self.part_area_ratio
        if not 0.0 < rlo <= rhi < 0.5:
            raise ValueError("part_area_ratio must lie in (0, 0.5)")
        if self.part_scale <= 1.0:
            raise ValueError("part_scale must exceed 1")
        if not 0.0 <= self.easy_object_prob <= 1.0:
            raise ValueError("easy_object_prob must be a probability")
        if not 0.0 <= self.adjacent_pair_prob <= 1.0:
            raise ValueError("adjacent_pair_prob must be a probability")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if self.oversize_factor <= 1.0:
            raise ValueError("oversize_factor must exceed 1")
        if self.ring_scale < 1.0:
            raise ValueError("ring_scale must be >= 1")
        if not 0.0 < self.interior_level <= 1.0:
            raise ValueError("interior_level must be in (0, 1]")
        if self.ring_magnitude < 0.0:
            raise ValueError("ring_magnitude must be >= 0")
        if self.part_scale <= self.ring_scale:
            raise ValueError("part_scale must exceed ring_scale")


@dataclass(frozen=True)
class SyntheticScene:
    image_id: str
    features: np.ndarray  # (H, W, K) float32
    labels: tuple[int, ...]  # sorted distinct categories present
    gt: tuple[GroundTruthObject, ...]
    proposals: tuple[BoundingBox, ...]


def _category_directions(config: GenConfig) -> np.ndarray:
    """Orthonormal unit directions over channels 0..K-2, three per category.

    Row 0 holds the body direction of each category, row 1 its boundary-ring
    identity, row 2 its part appearance. All 3C directions are mutually
    orthogonal: ring identity gives boundary cells a cue interior crops cannot
    fake, and a part that does not lie along the body direction is something a
    scorer trained on whole-object boxes assigns no weight to, the way a
    distinctive part looks nothing like the whole object it belongs to.
    """
    rng = np.random.default_rng(np.random.SeedSequence((config.rng_seed, _TAG, 0)))
    raw = rng.standard_normal((config.n_channels - 1, 3 * config.n_categories))
    q, r = np.linalg.qr(raw)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity
    c = config.n_categories
    dirs = np.zeros((3, c, config.n_channels))
    for row in range(3):
        dirs[row, :, : config.n_channels - 1] = q.T[row * c : (row + 1) * c]
    return dirs


def _part_dims(
    rng: np.random.Generator, body_h: int, body_w: int, ratio: tuple[float, float]
) -> tuple[int, int]:
    """Interior part dimensions whose area ratio falls in the range."""
    area = body_h * body_w
    feasible = [
        (ph, pw)
        for ph in range(1, body_h - 1)
        for pw in range(1, body_w - 1)
        if ratio[0] <= ph * pw / area <= ratio[1]
    ]
    if not feasible:  # degenerate config: take the closest ratio available
        mid = 0.5 * (ratio[0] + ratio[1])
        feasible = [
            min(
                ((ph, pw) for ph in range(1, body_h - 1) for pw in range(1, body_w - 1)),
                key=lambda d: abs(d[0] * d[1] / area - mid),
            )
        ]
    return feasible[int(rng.integers(len(feasible)))]


@dataclass
class _Planted:
    category: int
    body: BoundingBox
    part: BoundingBox  # geometric part box; features planted only when trapped
    trapped: bool


def _place_part(
    rng: np.random.Generator, body: BoundingBox, ratio: tuple[float, float]
) -> BoundingBox:
    ph, pw = _part_dims(rng, body.height, body.width, ratio)
    y0 = body.y_min + 1 + int(rng.integers(body.height - 1 - ph))
    x0 = body.x_min + 1 + int(rng.integers(body.width - 1 - pw))
    return BoundingBox(x0, y0, x0 + pw, y0 + ph)


def _oversized(box: BoundingBox, factor: float, width: int, height: int) -> BoundingBox:
    cy = box.y_min + box.height / 2.0
    cx = box.x_min + box.width / 2.0
    nh = int(round(box.height * factor))
    nw = int(round(box.width * factor))
    y0 = max(0, int(round(cy - nh / 2.0)))
    x0 = max(0, int(round(cx - nw / 2.0)))
    y1 = min(height, y0 + nh)
    x1 = min(width, x0 + nw)
    # containment of the body survives clipping
    y0 = min(y0, box.y_min)
    x0 = min(x0, box.x_min)
    y1 = max(y1, box.y_max)
    x1 = max(x1, box.x_max)
    return BoundingBox(x0, y0, x1, y1)


def _grid_proposals(height: int, width: int) -> list[BoundingBox]:
    side = min(height, width)
    stride = max(1, side // 4)
    out = []
    for size in (side // 2, (3 * side) // 4):
        for y0 in range(0, height - size + 1, stride):
            for x0 in range(0, width - size + 1, stride):
                out.append(BoundingBox(x0, y0, x0 + size, y0 + size))
    return out


def _place_objects(rng: np.random.Generator, config: GenConfig) -> list[_Planted]:
    height, width = config.height, config.width
    blo, bhi = config.body_size
    n_obj = int(rng.integers(config.objects_per_image[0], config.objects_per_image[1] + 1))
    placed: list[_Planted] = []

    def body_dims() -> tuple[int, int]:
        return int(rng.integers(blo, bhi + 1)), int(rng.integers(blo, bhi + 1))

    if n_obj == 2 and rng.random() < config.adjacent_pair_prob:
        cat = int(rng.integers(config.n_categories))
        for _ in range(config.max_place_attempts):
            ha, wa = body_dims()
            hb, wb = body_dims()
            if wa + wb <= width - 2 and max(ha, hb) <= height - 2:
                break
        else:
            ha = hb = wa = wb = blo
        y0 = 1 + int(rng.integers(height - 1 - max(ha, hb)))
        x0 = 1 + int(rng.integers(width - 1 - (wa + wb)))
        body_a = BoundingBox(x0, y0, x0 + wa, y0 + ha)
        body_b = BoundingBox(x0 + wa, y0, x0 + wa + wb, y0 + hb)
        for body, trapped in ((body_a, True), (body_b, rng.random() >= config.easy_object_prob)):
            placed.append(
                _Planted(cat, body, _place_part(rng, body, config.part_area_ratio), trapped)
            )
        return placed

    for index in range(n_obj):
        for _ in range(config.max_place_attempts):
            h, w = body_dims()
            y0 = 1 + int(rng.integers(height - 1 - h))
            x0 = 1 + int(rng.integers(width - 1 - w))
            body = BoundingBox(x0, y0, x0 + w, y0 + h)
            grown = BoundingBox(
                max(0, x0 - 1), max(0, y0 - 1), min(width, x0 + w + 1), min(height, y0 + h + 1)
            )
            if all(not _overlaps(grown, other.body) for other in placed):
                cat = int(rng.integers(config.n_categories))
                trapped = index == 0 or rng.random() >= config.easy_object_prob
                placed.append(
                    _Planted(cat, body, _place_part(rng, body, config.part_area_ratio), trapped)
                )
                break
        # placement failure for a later object just yields fewer objects
    return placed


def _overlaps(a: BoundingBox, b: BoundingBox) -> bool:
    return not (
        a.x_max <= b.x_min or b.x_max <= a.x_min or a.y_max <= b.y_min or b.y_max <= a.y_min
    )


def generate_scene(config: GenConfig, index: int, directions: np.ndarray) -> SyntheticScene:
    """One deterministic scene; index selects the per-image rng stream."""
    rng = np.random.default_rng(np.random.SeedSequence((config.rng_seed, _TAG, 1 + index)))
    height, width, channels = config.height, config.width, config.n_channels
    edge = np.zeros(channels)
    edge[channels - 1] = config.edge_magnitude
    objects = _place_objects(rng, config)

    features = np.zeros((height, width, channels))
    for obj in objects:
        v = directions[0, obj.category]
        r = directions[1, obj.category]
        part_dir = directions[2, obj.category]
        b = obj.body
        # boundary ring first: amplified body direction plus the ring identity
        # and the shared edge component, over a dimmer interior. The ring
        # identity is the evidence of full object extent; interior crops and
        # planted parts carry none of it, so whole-extent boxes stay separable
        # from both no matter how the body direction itself gets reweighted.
        features[b.y_min : b.y_max, b.x_min : b.x_max] = (
            config.ring_scale * v + config.ring_magnitude * r + edge
        )
        features[b.y_min + 1 : b.y_max - 1, b.x_min + 1 : b.x_max - 1] = (
            config.interior_level * v
        )
        if obj.trapped:
            p = obj.part
            features[p.y_min : p.y_max, p.x_min : p.x_max] = config.part_scale * part_dir
    features = features + config.noise_sigma * rng.standard_normal(features.shape)

    image_id = f"img_{index:04d}"
    gt = tuple(GroundTruthObject(image_id, o.category, o.body) for o in objects)
    proposals: list[BoundingBox] = []
    for o in objects:
        proposals.append(o.part)
        proposals.append(o.body)
        proposals.append(_oversized(o.body, config.oversize_factor, width, height))
    proposals.extend(_grid_proposals(height, width))
    seen = set()
    unique = []
    for box in proposals:
        if box.as_tuple() not in seen:
            seen.add(box.as_tuple())
            unique.append(box)
    labels = tuple(sorted({o.category for o in objects}))
    return SyntheticScene(
        image_id=image_id,
        features=features.astype(np.float32),
        labels=labels,
        gt=gt,
        proposals=tuple(unique),
    )


def generate_dataset(config: GenConfig) -> list[SyntheticScene]:
    """All scenes for a config; bit-identical across calls."""
    directions = _category_directions(config)
    return [generate_scene(config, i, directions) for i in range(config.n_images)]


@dataclass(frozen=True)
class PlantReport:
    """Outcome of the norm-ratio audit of the planted parts."""

    n_images: int
    n_satisfied: int
    ratio_threshold: float
    violations: tuple[str, ...]

    @property
    def fraction(self) -> float:
        if self.n_images == 0:
            return 1.0
        return self.n_satisfied / self.n_images


def planted_bias_check(
    scenes: Sequence[SyntheticScene], ratio_threshold: float = PLANT_RATIO_THRESHOLD
) -> PlantReport:
    """Audit that each image still carries a dominant planted part.

    For every ground-truth box, each proposal nested strictly inside it
    is treated as a candidate part region: its mean per-cell feature
    norm is compared against the median norm over the rest of the box
    (the body level, robust to the thin boundary ring). An image passes
    when some object has a candidate reaching ratio_threshold times its
    body level. Heavy noise erodes the ratio, so the satisfied fraction
    drops as noise_sigma grows.
    """
    violations = []
    for scene in scenes:
        feats = np.asarray(scene.features, dtype=np.float64)
        norms = np.linalg.norm(feats, axis=2)
        ok = False
        for obj in scene.gt:
            b = obj.box
            inner = [
                p
                for p in scene.proposals
                if p != b
                and b.x_min <= p.x_min
                and b.y_min <= p.y_min
                and p.x_max <= b.x_max
                and p.y_max <= b.y_max
            ]
            for p in inner:
                sel = np.zeros(norms.shape, dtype=bool)
                sel[b.y_min : b.y_max, b.x_min : b.x_max] = True
                part = np.zeros(norms.shape, dtype=bool)
                part[p.y_min : p.y_max, p.x_min : p.x_max] = True
                rest = sel & ~part
                if not rest.any():
                    continue
                body_level = float(np.median(norms[rest]))
                part_level = float(norms[part].mean())
                if body_level <= 0.0 or part_level / body_level >= ratio_threshold:
                    ok = True
                    break
            if ok:
                break
        if not ok:
            violations.append(scene.image_id)
    return PlantReport(
        n_images=len(scenes),
        n_satisfied=len(scenes) - len(violations),
        ratio_threshold=ratio_threshold,
        violations=tuple(violations),
    )


def dataset_to_json(scenes: Sequence[SyntheticScene]) -> str:
    """Canonical JSON encoding; identical scenes give identical bytes."""
    images = []
    for s in scenes:
        h, w, k = s.features.shape
        raw = np.ascontiguousarray(s.features, dtype="<f4").tobytes()
        images.append(
            {
                "id": s.image_id,
                "h": h,
                "w": w,
                "k": k,
                "features": base64.b64encode(raw).decode("ascii"),
                "labels": list(s.labels),
                "gt": [{"c": o.category, "box": list(o.box.as_tuple())} for o in s.gt],
                "proposals": [list(b.as_tuple()) for b in s.proposals],
            }
        )
    return json.dumps({"images": images}, sort_keys=True, separators=(",", ":")) + "\n"


def dataset_from_json(text: str) -> list[SyntheticScene]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"dataset is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "images" not in payload:
        raise ValueError("dataset JSON must be an object with an 'images' list")
    scenes = []
    for entry in payload["images"]:
        try:
            h, w, k = int(entry["h"]), int(entry["w"]), int(entry["k"])
            raw = base64.b64decode(entry["features"], validate=True)
            if len(raw) != h * w * k * 4:
                raise ValueError(
                    f"feature payload for {entry['id']!r} has {len(raw)} bytes, "
                    f"expected {h * w * k * 4}"
                )
            features = np.frombuffer(raw, dtype="<f4").reshape(h, w, k).copy()
            image_id = str(entry["id"])
            gt = tuple(
                GroundTruthObject(image_id, int(g["c"]), BoundingBox(*g["box"]))
                for g in entry["gt"]
            )
            scenes.append(
                SyntheticScene(
                    image_id=image_id,
                    features=features,
                    labels=tuple(int(c) for c in entry["labels"]),
                    gt=gt,
                    proposals=tuple(BoundingBox(*b) for b in entry["proposals"]),
                )
            )
        except (KeyError, TypeError, binascii.Error) as exc:
            raise ValueError(f"malformed dataset image entry: {exc}") from exc
    return scenes
