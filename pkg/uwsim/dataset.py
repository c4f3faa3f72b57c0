"""Build synthetic underwater training pairs from in-air RGB-D data.

Input directories hold ``<id>.png`` (8-bit RGB) next to ``<id>_depth.png``
(16-bit greyscale). Every pair is cropped and resized, its depth conditioned,
and for each sample a set of water parameters is drawn and the improved
model applied. Output layout::

    <out>/degraded/<id>_<k>.png
    <out>/clear/<id>_<k>.png
    <out>/depth/<id>.png          16-bit, the exact ranges used
    <out>/manifest.csv
    <out>/config.json

Generation is a pure function of the input files, the sampler seed and the
settings, whatever the thread count.
"""
import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image
from tqdm import tqdm

from uwsim.exceptions import ImageReadError, ImageWriteError, InvalidInput, InvalidParameter
from uwsim.imagefiles import quantize, read_depth16, read_rgb, write_depth16, write_rgb
from uwsim.imaging import WaterParams, as_depth, as_image, synthesize, water_preset


#: Meters per 16-bit depth unit (NYU style millimeters)
DEFAULT_DEPTH_SCALE = 0.001

#: Ranges beyond this are clamped, meters
DEFAULT_MAX_RANGE = 10.0

#: Edge of the square output images
DEFAULT_SIZE = 256

#: Redraws of beta before an ordered sampler gives up
ORDER_ATTEMPTS = 1000

DEPTH_SUFFIX = "_depth"

MANIFEST_COLUMNS = [
    "source_id", "sample_index",
    "beta_r", "beta_g", "beta_b", "alpha", "ambient_r", "ambient_g", "ambient_b",
    "depth_min", "depth_max",
    "degraded_path", "clear_path", "depth_path",
]

MANIFEST_NAME = "manifest.csv"

CONFIG_NAME = "config.json"


class RgbdPair:
    """Colour image with a co-registered depth map of the same size."""

    def __init__(self, image: np.ndarray, depth: np.ndarray, source_id: str):
        self.image = as_image(image)
        self.depth = as_depth(depth)
        if self.image.shape[:2] != self.depth.shape:
            raise InvalidInput("{}: image and depth sizes differ".format(source_id))
        self.source_id = source_id

    def __repr__(self):
        return "<RgbdPair {} {}x{}>".format(self.source_id, self.image.shape[1], self.image.shape[0])


def _check_range(r, name: str, low: float=0.0, high: float=np.inf) -> Tuple[float, float]:
    lo, hi = float(r[0]), float(r[1])
    if lo > hi:
        raise InvalidParameter("{} range is inverted: [{}, {}]".format(name, lo, hi))
    if lo < low or hi > high:
        raise InvalidParameter("{} range [{}, {}] leaves [{}, {}]".format(name, lo, hi, low, high))
    return lo, hi


class ParamSampler:
    """Draws :py:class:`WaterParams` uniformly from per-component ranges.

    :param ordered: Keep ``beta_r >= beta_g >= beta_b`` in every draw
    """

    def __init__(self, water_type: str, beta_ranges, ambient_ranges, alpha_range, seed: int=0, ordered: bool=False):
        if len(beta_ranges) != 3 or len(ambient_ranges) != 3:
            raise InvalidParameter("beta and ambient need one range per channel")
        if seed < 0:
            raise InvalidParameter("seed must be non-negative, got {}".format(seed))
        self.water_type = water_type
        self.beta_ranges = [_check_range(r, "beta") for r in beta_ranges]
        self.ambient_ranges = [_check_range(r, "ambient", high=1.0) for r in ambient_ranges]
        self.alpha_range = _check_range(alpha_range, "alpha")
        self.seed = int(seed)
        self.ordered = ordered
        if ordered:
            (_, r_hi), (g_lo, g_hi), (b_lo, _) = self.beta_ranges
            if max(g_lo, b_lo) > min(g_hi, r_hi):
                raise InvalidParameter("beta ranges {} admit no draw with red >= green >= blue".format(self.beta_ranges))

    @classmethod
    def from_preset(cls, name: str, seed: int=0) -> "ParamSampler":
        preset = water_preset(name)
        return cls(name, preset.beta_ranges, preset.ambient_ranges, preset.alpha_range, seed=seed, ordered=True)


def sample_params(sampler: ParamSampler, index: int) -> WaterParams:
    """Deterministic draw number ``index`` of a sampler.

    Each draw has its own generator seeded with ``(seed, index)`` so draws do
    not depend on how many came before or on which thread makes them. Ordered
    samplers redraw beta until it is ordered, which keeps the draw uniform over
    the ordered part of the ranges.
    """
    rng = np.random.default_rng([sampler.seed, int(index)])
    beta_lo, beta_hi = np.array(sampler.beta_ranges).T
    amb_lo, amb_hi = np.array(sampler.ambient_ranges).T
    ambient = rng.uniform(amb_lo, amb_hi)
    alpha = rng.uniform(*sampler.alpha_range)

    for _ in range(ORDER_ATTEMPTS):
        beta = rng.uniform(beta_lo, beta_hi)
        if not sampler.ordered or beta[0] >= beta[1] >= beta[2]:
            return WaterParams(beta, ambient, alpha)
    raise InvalidParameter("beta ranges {} gave no ordered draw in {} attempts".format(sampler.beta_ranges, ORDER_ATTEMPTS))


def _resize(data: np.ndarray, width: int, height: int, resample) -> np.ndarray:
    im = Image.fromarray(np.asarray(data, dtype=np.float32))
    return np.asarray(im.resize((width, height), resample=resample), dtype=np.float64)


def resize_image(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize of a colour image, one channel at a time."""
    return np.stack([_resize(img[:, :, c], width, height, Image.Resampling.BILINEAR) for c in range(3)], axis=2).clip(0, 1)


def resize_depth(depth: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest neighbour resize, never inventing ranges in between surfaces."""
    return _resize(depth, width, height, Image.Resampling.NEAREST)


def load_rgbd_pair(image_path: str, depth_path: str, depth_scale: float=DEFAULT_DEPTH_SCALE, source_id: Optional[str]=None) -> RgbdPair:
    """Load an image and its depth map, resampling the depth to the image size."""
    if depth_scale <= 0:
        raise InvalidParameter("depth_scale must be positive, got {}".format(depth_scale))

    image = read_rgb(image_path)
    depth = read_depth16(depth_path).astype(np.float64) * depth_scale
    height, width = image.shape[:2]
    if depth.shape != (height, width):
        depth = resize_depth(depth, width, height)

    if source_id is None:
        source_id = os.path.splitext(os.path.basename(image_path))[0]
    return RgbdPair(image, depth, source_id)


def normalize_depth(depth, max_range: float=DEFAULT_MAX_RANGE) -> np.ndarray:
    """Fill missing (zero) ranges with the median valid range and clamp to ``max_range``."""
    if max_range <= 0:
        raise InvalidParameter("max_range must be positive, got {}".format(max_range))
    d = as_depth(depth).copy()
    valid = d > 0
    if not np.any(valid):
        raise InvalidInput("Depth map has no valid ranges, every value is zero")
    d[~valid] = np.median(d[valid])
    return np.clip(d, 0, max_range)


def center_crop_resize(image: np.ndarray, depth: np.ndarray, size: int=DEFAULT_SIZE) -> Tuple[np.ndarray, np.ndarray]:
    """Crop the largest centred square and resize it to ``size x size``."""
    if size < 1:
        raise InvalidParameter("size must be positive, got {}".format(size))
    height, width = depth.shape
    side = min(height, width)
    top = (height - side) // 2
    left = (width - side) // 2
    image = image[top:top + side, left:left + side]
    depth = depth[top:top + side, left:left + side]
    if side != size:
        image = resize_image(image, size, size)
        depth = resize_depth(depth, size, size)
    return image, depth


def discover_pairs(logger: logging.Logger, input_dir: str) -> List[Tuple[str, str, str]]:
    """Find ``(source_id, image_path, depth_path)`` triples sorted by id."""
    if not os.path.isdir(input_dir):
        raise ImageReadError("Input directory {} does not exist".format(input_dir))

    found = []
    for name in sorted(os.listdir(input_dir)):
        stem, ext = os.path.splitext(name)
        if ext.lower() != ".png" or stem.endswith(DEPTH_SUFFIX):
            continue
        depth_path = os.path.join(input_dir, stem + DEPTH_SUFFIX + ext)
        if not os.path.exists(depth_path):
            logger.warning("Skipping %s, no depth map %s", name, depth_path)
            continue
        found.append((stem, os.path.join(input_dir, name), depth_path))
    return found


class ManifestEntry:
    """One generated sample. Paths are relative to the dataset directory."""

    def __init__(self, source_id: str, sample_index: int, params: WaterParams, depth_min: float, depth_max: float, degraded_path: str, clear_path: str, depth_path: str):
        self.source_id = source_id
        self.sample_index = sample_index
        self.params = params
        self.depth_min = depth_min
        self.depth_max = depth_max
        self.degraded_path = degraded_path
        self.clear_path = clear_path
        self.depth_path = depth_path

    def as_row(self) -> dict:
        row = {
            "source_id": self.source_id,
            "sample_index": self.sample_index,
            "depth_min": repr(self.depth_min),
            "depth_max": repr(self.depth_max),
            "degraded_path": self.degraded_path,
            "clear_path": self.clear_path,
            "depth_path": self.depth_path,
        }
        row.update({k: repr(v) for k, v in self.params.as_dict().items()})
        return row

    @classmethod
    def from_row(cls, row: dict) -> "ManifestEntry":
        return cls(
            source_id=row["source_id"],
            sample_index=int(row["sample_index"]),
            params=WaterParams.from_dict(row),
            depth_min=float(row["depth_min"]),
            depth_max=float(row["depth_max"]),
            degraded_path=row["degraded_path"],
            clear_path=row["clear_path"],
            depth_path=row["depth_path"])


class DatasetManifest:
    """Reproducibility record of a generated dataset.

    :param errors: ``(source_id, sample_index, message)`` of samples that could not be written
    """

    def __init__(self, root: str, entries: List[ManifestEntry], seed: int, preset: str, depth_scale: float=DEFAULT_DEPTH_SCALE, model: str="improved", errors: Optional[list]=None):
        self.root = root
        self.entries = entries
        self.seed = seed
        self.preset = preset
        self.depth_scale = depth_scale
        self.model = model
        self.errors = errors or []

    @property
    def path(self) -> str:
        return os.path.join(self.root, MANIFEST_NAME)

    def resolve(self, rel_path: str) -> str:
        return os.path.join(self.root, rel_path)


def write_manifest(manifest: DatasetManifest, settings: Optional[dict]=None) -> str:
    """Write ``manifest.csv`` and the ``config.json`` echo, return the CSV path."""
    with open(manifest.path, "wt", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=MANIFEST_COLUMNS)
        writer.writeheader()
        for entry in manifest.entries:
            writer.writerow(entry.as_row())

    config = dict(settings or {})
    config.update({
        "seed": manifest.seed,
        "preset": manifest.preset,
        "depth_scale": manifest.depth_scale,
        "model": manifest.model,
        "entries": len(manifest.entries),
        "errors": [list(e) for e in manifest.errors],
    })
    with open(os.path.join(manifest.root, CONFIG_NAME), "wt") as f:
        json.dump(config, f, indent=2, sort_keys=True)

    return manifest.path


def read_manifest(path: str) -> DatasetManifest:
    """Parse a manifest CSV, or the manifest inside a dataset directory."""
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    if not os.path.exists(path):
        raise ImageReadError("Manifest {} does not exist".format(path))

    root = os.path.dirname(os.path.abspath(path))
    with open(path, "rt", newline="") as f:
        reader = csv.DictReader(f)
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise InvalidInput("Manifest {} lacks columns {}".format(path, ", ".join(sorted(missing))))
        entries = [ManifestEntry.from_row(row) for row in reader]

    config = {}
    config_path = os.path.join(root, CONFIG_NAME)
    if os.path.exists(config_path):
        with open(config_path, "rt") as f:
            config = json.load(f)

    return DatasetManifest(
        root, entries,
        seed=config.get("seed", 0),
        preset=config.get("preset", ""),
        depth_scale=config.get("depth_scale", DEFAULT_DEPTH_SCALE),
        model=config.get("model", "improved"),
        errors=[tuple(e) for e in config.get("errors", [])])


def load_entry(manifest: DatasetManifest, entry: ManifestEntry) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read back ``(degraded, clear, depth)`` of a manifest entry."""
    degraded = read_rgb(manifest.resolve(entry.degraded_path))
    clear = read_rgb(manifest.resolve(entry.clear_path))
    depth = read_depth16(manifest.resolve(entry.depth_path)).astype(np.float64) * manifest.depth_scale
    return degraded, clear, depth


def verify_entry(manifest: DatasetManifest, entry: ManifestEntry) -> float:
    """Re-synthesize a degraded image from its recorded inputs.

    :return: Largest absolute difference against the stored degraded image
    """
    degraded, clear, depth = load_entry(manifest, entry)
    expected = synthesize(clear, depth, entry.params, model=manifest.model)
    return float(np.max(np.abs(expected - degraded)))


def _prepare(pair: RgbdPair, size: int, max_range: float, depth_scale: float) -> Tuple[np.ndarray, np.ndarray]:
    """Crop, resize and quantize so that the written files reproduce the inputs exactly."""
    depth = normalize_depth(pair.depth, max_range)
    clear, depth = center_crop_resize(pair.image, depth, size)
    depth = np.rint(depth / depth_scale) * depth_scale
    return quantize(clear), depth


def generate_batch(logger: logging.Logger, pairs: List[RgbdPair], sampler: ParamSampler, samples_per_pair: int, out_dir: str, size: int=DEFAULT_SIZE, threads: int=1, model: str="improved", max_range: float=DEFAULT_MAX_RANGE, depth_scale: float=DEFAULT_DEPTH_SCALE, errors: Optional[list]=None) -> DatasetManifest:
    """Degrade every pair ``samples_per_pair`` times and write the dataset.

    Sample ``k`` of the ``i``-th pair (pairs sorted by id) uses parameter draw
    ``i * samples_per_pair + k``. Failed writes are logged, kept in
    ``manifest.errors`` and do not stop the batch.

    :param errors: Failures met before generation, e.g. unreadable inputs, carried into the manifest
    """
    if not pairs:
        raise InvalidInput("No RGB-D pairs to generate from")
    if samples_per_pair < 1:
        raise InvalidParameter("samples_per_pair must be positive, got {}".format(samples_per_pair))
    if max_range / depth_scale > 65535:
        raise InvalidParameter("max_range {} m does not fit 16-bit depth at {} m per unit".format(max_range, depth_scale))

    pairs = sorted(pairs, key=lambda p: p.source_id)
    for sub in ("degraded", "clear", "depth"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    def run_pair(task):
        pair_index, pair = task
        results = []
        try:
            clear, depth = _prepare(pair, size, max_range, depth_scale)
            depth_path = os.path.join("depth", pair.source_id + ".png")
            write_depth16(os.path.join(out_dir, depth_path), depth / depth_scale)
        except (ImageWriteError, InvalidInput) as e:
            return [(None, (pair.source_id, k, str(e))) for k in range(samples_per_pair)]

        for k in range(samples_per_pair):
            name = "{}_{}.png".format(pair.source_id, k)
            params = sample_params(sampler, pair_index * samples_per_pair + k)
            degraded = synthesize(clear, depth, params, model=model)
            entry = ManifestEntry(
                pair.source_id, k, params,
                float(depth.min()), float(depth.max()),
                os.path.join("degraded", name),
                os.path.join("clear", name),
                depth_path)
            try:
                write_rgb(os.path.join(out_dir, entry.degraded_path), degraded)
                write_rgb(os.path.join(out_dir, entry.clear_path), clear)
            except ImageWriteError as e:
                results.append((None, (pair.source_id, k, str(e))))
                continue
            results.append((entry, None))
        return results

    entries = []
    errors = list(errors or [])
    with ThreadPoolExecutor(max_workers=max(int(threads), 1)) as executor:
        # map() yields in submission order, keeping the manifest stable
        for results in tqdm(executor.map(run_pair, enumerate(pairs)), total=len(pairs), desc="Generating", unit="pair"):
            for entry, error in results:
                if error:
                    logger.error("Sample %s/%d failed: %s", error[0], error[1], error[2])
                    errors.append(error)
                else:
                    entries.append(entry)

    manifest = DatasetManifest(out_dir, entries, seed=sampler.seed, preset=sampler.water_type, depth_scale=depth_scale, model=model, errors=errors)
    settings = {
        "size": size,
        "samples_per_pair": samples_per_pair,
        "max_range": max_range,
        "beta_ranges": [list(r) for r in sampler.beta_ranges],
        "ambient_ranges": [list(r) for r in sampler.ambient_ranges],
        "alpha_range": list(sampler.alpha_range),
        "ordered": sampler.ordered,
    }
    write_manifest(manifest, settings)
    logger.info("Wrote %d samples to %s", len(entries), manifest.path)
    return manifest
