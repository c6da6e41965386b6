"""Corpus ingestion: manifests, decoding, exclusion rules and dataset statistics."""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from PIL import Image

from .buffers import SAMPLE_DTYPE, ImageBuffer
from .pixels import preprocess, to_greyscale

EXCLUDE_GREYSCALE = "greyscale"
EXCLUDE_TOO_SMALL = "too_small"
EXCLUDE_MEAN_OUTLIER = "mean_outlier"


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: str
    category: str


def read_manifest(path) -> list[ManifestEntry]:
    """Read a line-delimited JSON manifest: {image_id, path, category} per line."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            entries.append(ManifestEntry(rec["image_id"], rec["path"], rec["category"]))
    return entries


def write_manifest(entries: Iterable[ManifestEntry], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps({"image_id": e.image_id, "path": e.path, "category": e.category}) + "\n")


def write_exclusion_report(excluded: Iterable[tuple[str, str]], path) -> None:
    """Line-delimited {image_id, reason} records."""
    with open(path, "w", encoding="utf-8") as fh:
        for image_id, reason in excluded:
            fh.write(json.dumps({"image_id": image_id, "reason": reason}) + "\n")


def load_image(path) -> ImageBuffer:
    """Decode a PNG or JPEG file into a 1- or 3-channel buffer."""
    with Image.open(path) as im:
        return _from_pil(im)


def _from_pil(im: Image.Image) -> ImageBuffer:
    if im.mode in ("L", "I;16", "I"):
        im = im.convert("L")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    else:
        im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return ImageBuffer(arr.astype(SAMPLE_DTYPE))


def encode_png(img: ImageBuffer) -> bytes:
    """Encode to 8-bit PNG bytes (the only supported output format)."""
    arr = np.clip(np.rint(img.data.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if img.channels == 1 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def save_png(img: ImageBuffer, path) -> None:
    data = encode_png(img)
    with open(path, "wb") as fh:
        fh.write(data)


@dataclass(frozen=True)
class IngestRules:
    min_side: int = 256  # minimum raw size before cropping
    mean_sd_limit: float = 2.0  # exclude means beyond this many population SDs
    target_side: int = 256  # processed stimulus side


@dataclass
class DatasetStats:
    """Greyscale statistics of the retained, preprocessed corpus."""

    mean_grey: float
    per_image_means: dict[str, float] = field(default_factory=dict)
    sd_of_means: float = 0.0

    def to_json(self) -> dict:
        return {
            "mean_grey": self.mean_grey,
            "sd_of_means": self.sd_of_means,
            "per_image_means": self.per_image_means,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "DatasetStats":
        return cls(rec["mean_grey"], dict(rec.get("per_image_means", {})), rec.get("sd_of_means", 0.0))


@dataclass
class IngestResult:
    retained: list[tuple[str, ImageBuffer]]  # processed colour images, sorted by id
    excluded: list[tuple[str, str]]  # (image_id, reason)
    stats: DatasetStats | None  # None for an empty corpus


def ingest_filter(images: Iterable[tuple[str, ImageBuffer]], rules: IngestRules | None = None) -> IngestResult:
    """Apply the exclusion rules and preprocess the survivors.

    Exclusions, in order: single-channel sources, images smaller than the
    minimum raw size, then images whose (preprocessed, greyscale) mean
    deviates more than ``mean_sd_limit`` population SDs from the mean of
    means. The result is independent of input order: all statistics are
    computed over id-sorted sets.
    """
    if rules is None:
        rules = IngestRules()

    excluded: list[tuple[str, str]] = []
    candidates: list[tuple[str, ImageBuffer]] = []
    for image_id, img in sorted(images, key=lambda pair: pair[0]):
        if img.channels == 1:
            excluded.append((image_id, EXCLUDE_GREYSCALE))
        elif min(img.height, img.width) < rules.min_side:
            excluded.append((image_id, EXCLUDE_TOO_SMALL))
        else:
            candidates.append((image_id, preprocess(img, rules.target_side)))

    if not candidates:
        return IngestResult([], excluded, None)

    means = {image_id: float(to_greyscale(img).data.mean(dtype=np.float64)) for image_id, img in candidates}
    values = np.array([means[image_id] for image_id, _ in candidates])
    mu = float(values.mean())
    sd = float(values.std())  # population SD

    retained = []
    for image_id, img in candidates:
        if sd > 0 and abs(means[image_id] - mu) > rules.mean_sd_limit * sd:
            excluded.append((image_id, EXCLUDE_MEAN_OUTLIER))
        else:
            retained.append((image_id, img))

    kept_means = {image_id: means[image_id] for image_id, _ in retained}
    stats = DatasetStats(
        mean_grey=float(np.mean(list(kept_means.values()))),
        per_image_means=kept_means,
        sd_of_means=float(np.std(list(kept_means.values()))),
    )
    return IngestResult(retained, excluded, stats)


def ingest_corpus(manifest: list[ManifestEntry], rules: IngestRules | None = None) -> tuple[IngestResult, list[ManifestEntry]]:
    """Load, filter and preprocess a manifest; returns the retained sub-manifest too."""
    images = [(e.image_id, load_image(e.path)) for e in manifest]
    result = ingest_filter(images, rules)
    kept_ids = {image_id for image_id, _ in result.retained}
    return result, [e for e in manifest if e.image_id in kept_ids]


def save_stats(stats: DatasetStats, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stats.to_json(), fh, indent=2, sort_keys=True)


def load_stats(path) -> DatasetStats:
    with open(path, encoding="utf-8") as fh:
        return DatasetStats.from_json(json.load(fh))


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
