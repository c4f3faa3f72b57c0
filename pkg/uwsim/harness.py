"""Batch operations behind the command line subcommands.

Each function takes the logger first, does its work over a directory of
images and returns result tables. Writing tables and printing is left to
the caller.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import colorama
import numpy as np
from tqdm import tqdm

from uwsim.dataset import DEFAULT_DEPTH_SCALE, DEFAULT_MAX_RANGE, DEFAULT_SIZE, DatasetManifest, ParamSampler, discover_pairs, generate_batch, load_entry, load_rgbd_pair, read_manifest
from uwsim.exceptions import DescentFailure, ImageFormatError, ImageReadError, ImageWriteError, InvalidInput, InvalidParameter
from uwsim.generic.comparison import ComparisonTable
from uwsim.generic.timing import TimingReport, time_method
from uwsim.imagefiles import read_rgb, write_rgb
from uwsim.imaging import synthesize_improved, water_preset
from uwsim.losses import LossSpec, max_msssim_scales
from uwsim.metrics import FULL_REFERENCE, METRIC_NAMES, assess_image
from uwsim.restoration import MODEL_BASED, InversionConfig, invert_by_gradient_descent, restore


#: Columns of the ablation summary
ABLATION_METRICS = ("mse", "psnr", "ssim")

#: Water type of the model based methods in ``bench``
BENCH_WATER = "coastal-green"


def list_images(input_dir: str) -> List[Tuple[str, str]]:
    """``(name, path)`` of the PNG images in a directory, depth maps excluded."""
    if not os.path.isdir(input_dir):
        raise ImageReadError("Input directory {} does not exist".format(input_dir))
    found = []
    for name in sorted(os.listdir(input_dir)):
        stem, ext = os.path.splitext(name)
        if ext.lower() == ".png" and not stem.endswith("_depth"):
            found.append((stem, os.path.join(input_dir, name)))
    return found


def _ordered_map(func, items: list, threads: int, desc: str) -> list:
    """Run ``func`` over ``items`` in a thread pool, results in input order."""
    with ThreadPoolExecutor(max_workers=max(int(threads), 1)) as executor:
        return list(tqdm(executor.map(func, items), total=len(items), desc=desc, unit="image"))


def synthesize_dataset(logger: logging.Logger, input_dir: str, out_dir: str, preset: str="clear-oceanic", seed: int=0, samples_per_pair: int=1, size: int=DEFAULT_SIZE, threads: int=1, model: str="improved", depth_scale: float=DEFAULT_DEPTH_SCALE, max_range: float=DEFAULT_MAX_RANGE) -> DatasetManifest:
    """Generate a synthetic underwater dataset from a directory of RGB-D pairs."""
    sampler = ParamSampler.from_preset(preset, seed=seed)
    found = discover_pairs(logger, input_dir)
    logger.info("Found %d RGB-D pairs in %s", len(found), input_dir)

    pairs = []
    errors = []
    for source_id, image_path, depth_path in found:
        try:
            pairs.append(load_rgbd_pair(image_path, depth_path, depth_scale=depth_scale, source_id=source_id))
        except (ImageReadError, ImageFormatError, InvalidInput) as e:
            logger.error("Could not load %s: %s", source_id, e)
            errors.append((source_id, -1, str(e)))

    if not pairs:
        raise InvalidInput("No usable RGB-D pairs in {}".format(input_dir))

    return generate_batch(
        logger, pairs, sampler, samples_per_pair, out_dir,
        size=size, threads=threads, model=model, max_range=max_range, depth_scale=depth_scale, errors=errors)


def assess_images(logger: logging.Logger, input_dir: str, reference_dir: Optional[str]=None, metrics: Sequence[str]=METRIC_NAMES, threads: int=1) -> ComparisonTable:
    """Score every image of a directory.

    Images are paired with references by file name. Rows that cannot be scored
    are kept with all cells absent and a note.
    """
    metrics = [m for m in METRIC_NAMES if m in metrics]
    if reference_dir is None and set(metrics) & set(FULL_REFERENCE):
        raise InvalidParameter("Metrics {} need a reference directory".format(", ".join(m for m in metrics if m in FULL_REFERENCE)))

    images = list_images(input_dir)
    table = ComparisonTable("image", metrics, title="Image quality")

    def score(item):
        name, path = item
        try:
            img = read_rgb(path)
            reference = None
            if reference_dir is not None:
                reference = read_rgb(os.path.join(reference_dir, os.path.basename(path)))
            return assess_image(img, reference, metrics).as_dict(), None
        except (ImageReadError, ImageFormatError, InvalidInput) as e:
            return None, str(e)

    for (name, path), (values, error) in zip(images, _ordered_map(score, images, threads, "Assessing")):
        if error:
            logger.warning("Skipping %s: %s", name, error)
            table.mark_absent(name, error)
        else:
            table.add_row(name, values)

    logger.info("Assessed %d images", len(images))
    return table


class _CompareItem:
    """One observed image with whatever is known about it."""

    def __init__(self, name: str, observed: np.ndarray, reference: Optional[np.ndarray]=None, depth: Optional[np.ndarray]=None, params=None):
        self.name = name
        self.observed = observed
        self.reference = reference
        self.depth = depth
        self.params = params


def _compare_items(logger: logging.Logger, input_dir: Optional[str], reference_dir: Optional[str], manifest_path: Optional[str]) -> List[_CompareItem]:
    items = []
    if manifest_path:
        manifest = read_manifest(manifest_path)
        for entry in manifest.entries:
            degraded, clear, depth = load_entry(manifest, entry)
            name = "{}_{}".format(entry.source_id, entry.sample_index)
            items.append(_CompareItem(name, degraded, clear, depth, entry.params))
        return items

    for name, path in list_images(input_dir):
        try:
            observed = read_rgb(path)
            reference = read_rgb(os.path.join(reference_dir, os.path.basename(path))) if reference_dir else None
        except (ImageReadError, ImageFormatError) as e:
            logger.warning("Skipping %s: %s", name, e)
            continue
        items.append(_CompareItem(name, observed, reference))
    return items


def compare_methods(logger: logging.Logger, methods: Sequence[str], out_dir: str, input_dir: Optional[str]=None, reference_dir: Optional[str]=None, manifest_path: Optional[str]=None, metrics: Sequence[str]=("uiqm",), cfg: Optional[InversionConfig]=None, threads: int=1) -> Dict[str, ComparisonTable]:
    """Restore every image with every method and score the results.

    With a manifest the dataset's degraded images are restored and its clear
    images serve as references; model based methods then get the recorded
    depth and water parameters. Without one they are reported absent.

    :return: ``{"summary": methods x metrics means, <metric>: methods x images}``
    """
    if not input_dir and not manifest_path:
        raise InvalidParameter("Give an input directory or a dataset manifest")

    metrics = [m for m in METRIC_NAMES if m in metrics]
    items = _compare_items(logger, input_dir, reference_dir, manifest_path)
    if not items:
        raise InvalidInput("No images to compare")

    has_reference = all(item.reference is not None for item in items)
    if set(metrics) & set(FULL_REFERENCE) and not has_reference:
        raise InvalidParameter("Metrics {} need reference images".format(", ".join(m for m in metrics if m in FULL_REFERENCE)))

    cfg = cfg or InversionConfig()
    names = [item.name for item in items]
    per_metric = {m: ComparisonTable("method", names, title=m.upper()) for m in metrics}
    summary = ComparisonTable("method", metrics, title="Method means")

    for method in methods:
        if method in MODEL_BASED and any(item.depth is None for item in items):
            reason = "needs depth maps and water parameters, run with --manifest"
            logger.warning("Method %s absent: %s", method, reason)
            for table in per_metric.values():
                table.mark_absent(method, reason)
            summary.mark_absent(method, reason)
            continue

        method_dir = os.path.join(out_dir, "restored", method)

        def run(item: _CompareItem):
            try:
                restored = restore(method, item.observed, item.depth, item.params, cfg)
            except (DescentFailure, InvalidInput) as e:
                return None, str(e)
            try:
                write_rgb(os.path.join(method_dir, item.name + ".png"), restored)
            except ImageWriteError as e:
                return None, str(e)
            return assess_image(restored, item.reference, metrics).as_dict(), None

        results = _ordered_map(run, items, threads, method)

        failures = ["{}: {}".format(item.name, error) for item, (_, error) in zip(items, results) if error]
        note = "; ".join(failures)
        for m in metrics:
            values = {item.name: scores[m] for item, (scores, _) in zip(items, results) if scores}
            per_metric[m].add_row(method, values, note=note)

        summary.add_row(method, {m: per_metric[m].row_mean(method) for m in metrics}, note=note)
        logger.info("Method %s%s%s done", colorama.Fore.LIGHTCYAN_EX, method, colorama.Fore.RESET)

    tables = {"summary": summary}
    tables.update(per_metric)
    return tables


def _loss_for(kind: str, shape, mix_alpha: float) -> LossSpec:
    """MS-SSIM kinds use as many scales as the image supports."""
    scales = max(min(max_msssim_scales(shape), 5), 1)
    return LossSpec(kind, mix_alpha=mix_alpha, msssim_scales=scales)


def ablate_losses(logger: logging.Logger, manifest_path: str, losses: Sequence[str], mix_alpha: float=0.8, cfg: Optional[InversionConfig]=None, threads: int=1) -> Tuple[ComparisonTable, ComparisonTable]:
    """Invert a synthetic dataset with gradient descent under each loss.

    :return: ``(summary, per_image)``; the summary has one row per loss with
        mean MSE, PSNR and SSIM against the clear images, the per image table
        adds the initial and final loss values of every run
    """
    if not losses:
        raise InvalidParameter("Give at least one loss kind")

    cfg = cfg or InversionConfig()
    manifest = read_manifest(manifest_path)
    if not manifest.entries:
        raise InvalidInput("Manifest {} has no entries".format(manifest_path))

    items = []
    for entry in manifest.entries:
        degraded, clear, depth = load_entry(manifest, entry)
        items.append(_CompareItem("{}_{}".format(entry.source_id, entry.sample_index), degraded, clear, depth, entry.params))

    summary = ComparisonTable("loss", list(ABLATION_METRICS), title="Loss ablation")
    per_image = ComparisonTable("run", list(ABLATION_METRICS) + ["initial_loss", "final_loss", "iterations"], title="Loss ablation per image")

    for kind in losses:

        def run(item: _CompareItem):
            try:
                spec = _loss_for(kind, item.observed.shape, mix_alpha)
                loss_cfg = InversionConfig(cfg.transmission_floor, cfg.max_iters, cfg.step_size, spec, cfg.stop_tol, cfg.max_halvings)
                result = invert_by_gradient_descent(item.observed, item.depth, item.params, loss_cfg)
                if result.stalled:
                    logger.warning("Loss %s on %s stalled after %d steps at %g", kind, item.name, result.iterations, result.trace[-1])
            except DescentFailure as e:
                return None, "failed after {} steps, last loss {}".format(len(e.trace), e.trace[-1] if e.trace else "n/a")
            except (InvalidInput, InvalidParameter) as e:
                return None, str(e)
            scores = assess_image(result.image, item.reference, ABLATION_METRICS).as_dict()
            scores.update({
                "initial_loss": result.trace[0],
                "final_loss": result.trace[-1],
                "iterations": result.iterations,
            })
            return scores, None

        results = _ordered_map(run, items, threads, kind)

        failures = []
        for item, (scores, error) in zip(items, results):
            row = "{}/{}".format(kind, item.name)
            if error:
                logger.warning("Loss %s on %s: %s", kind, item.name, error)
                failures.append("{}: {}".format(item.name, error))
                per_image.mark_absent(row, error)
            else:
                per_image.add_row(row, scores)

        ok = [scores for scores, _ in results if scores]
        means = {m: float(np.mean([s[m] for s in ok])) for m in ABLATION_METRICS} if ok else {}
        summary.add_row(kind, means, note="; ".join(failures))
        logger.info("Loss %s%s%s done", colorama.Fore.LIGHTCYAN_EX, kind, colorama.Fore.RESET)

    return summary, per_image


def bench_methods(logger: logging.Logger, methods: Sequence[str], image_count: int, warmup: int, size: int=256, seed: int=0) -> TimingReport:
    """Time restoration methods on random images of ``size x size``."""
    if image_count < 1:
        raise InvalidParameter("image_count must be at least 1, got {}".format(image_count))

    rng = np.random.default_rng(seed)
    params = water_preset(BENCH_WATER).nominal()
    images = []
    for _ in range(image_count):
        clear = rng.uniform(0, 0.6, size=(size, size, 3))
        depth = rng.uniform(0.5, 3.0, size=(size, size))
        images.append((synthesize_improved(clear, depth, params), depth))

    report = TimingReport(size)
    for method in methods:
        timing = time_method(method, lambda item: restore(method, item[0], item[1], params), images, warmup)
        report.add(timing)
        logger.info("%s: %s%.4f%s s/image", method, colorama.Fore.LIGHTCYAN_EX, timing.mean_seconds, colorama.Fore.RESET)
    return report

