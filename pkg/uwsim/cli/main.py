"""Define command line interface and subcommands. """
import json
import logging
import os
import time
from contextlib import contextmanager
from typing import List

import click
import colorama
import coloredlogs
import configobj
from click.core import ParameterSource

from uwsim import __version__
from uwsim.exceptions import InvalidParameter, UwsimError
from uwsim.imaging import MODELS, PRESETS
from uwsim.losses import DEFAULT_MIX_ALPHA, LOSS_KINDS
from uwsim.metrics import METRIC_NAMES
from uwsim.restoration import METHODS


class CommandConfiguration:
    """All top level option switches either read from the command line or INI

    See ``main.cli()`` arguments for content.
    """

    def __init__(self, **kwargs):
        # See cli() for descriptions of variables
        self.__dict__.update(kwargs)


def create_command_line_logger(log_level):
    """Create a fancy output.

    See: https://coloredlogs.readthedocs.io/en/latest/readme.html#installation
    """
    fmt = "%(message)s"
    logger = logging.getLogger()
    coloredlogs.install(level=log_level, fmt=fmt, logger=logger)
    return logger


def read_config_file(path: str) -> dict:
    """Read an INI or JSON file into a click ``default_map``.

    Top level keys set the main command options, ``[section]`` keys (nested
    objects in JSON) the options of the subcommand of the same name. Dashed
    names map to click parameter names and lists are joined back to comma
    separated strings. Files ending in ``.json`` are read as JSON.
    """
    if not os.path.exists(path):
        raise click.UsageError("Config file does not exist {}".format(path))

    try:
        if path.lower().endswith(".json"):
            with open(path, "rt") as f:
                parsed = json.load(f)
            if not isinstance(parsed, dict):
                raise click.UsageError("Config file {} must hold a JSON object".format(path))
        else:
            parsed = configobj.ConfigObj(path, raise_errors=True, file_error=True)
    except (configobj.ConfigObjError, ValueError, IOError) as e:
        raise click.UsageError("Could not parse config file {}: {}".format(path, e))

    def convert(section) -> dict:
        result = {}
        for key, value in section.items():
            name = key.replace("-", "_")
            if isinstance(value, dict):
                result[key] = convert(value)
            elif isinstance(value, list):
                result[name] = ",".join(str(v) for v in value)
            else:
                result[name] = value
        return result

    return convert(parsed)


def split_names(allowed):
    """Click callback turning ``a,b,c`` into a validated list."""

    def callback(ctx, param, value) -> List[str]:
        if value is None:
            return []
        names = [v.strip() for v in value.split(",") if v.strip()]
        unknown = [n for n in names if n not in allowed]
        if unknown:
            raise click.BadParameter("Unknown {}, choose from {}".format(", ".join(unknown), ", ".join(allowed)))
        return names

    return callback


INTRO_TEXT = """{}uwsim{} underwater image synthesis and restoration toolkit.

    {}Synthesize underwater datasets from RGB-D pairs, restore degraded images and score them.{}

    Options can be given on the command line or in an INI or JSON file passed with --config.
""".format(colorama.Fore.LIGHTGREEN_EX, colorama.Fore.RESET, colorama.Fore.BLUE, colorama.Fore.RESET)


#: Subcommands that neither print the prelude nor touch the run ledger
QUIET_COMMANDS = ("version", "reference")


@click.group(help=INTRO_TEXT)
@click.option('--config', required=False, default=None, help="INI or JSON file where to read options from", type=click.Path())
@click.option('--database-file', required=False, default="uwsim-runs.sqlite", help="SQLite file that keeps the run ledger", type=click.Path())
@click.option('--seed', required=False, default=0, help="Seed of every random draw", type=click.IntRange(min=0))
@click.option('--out', required=False, default="uwsim-out", help="Directory where results are written", type=click.Path())
@click.option('--threads', required=False, default=1, help="Worker threads for per image work", type=click.IntRange(min=1))
@click.option('--log-level', default="INFO", help="Python logging level to tune the verbosity of the command")
@click.pass_context
def cli(ctx, config: str, **kwargs):

    # Fill in arguments from the configuration file, flags given on the command line win
    if config:
        default_map = read_config_file(config)
        for opt in ctx.command.params:  # type: click.core.Option
            if opt.name in default_map and ctx.get_parameter_source(opt.name) == ParameterSource.DEFAULT:
                try:
                    kwargs[opt.name] = opt.type_cast_value(ctx, default_map[opt.name])
                except click.BadParameter as e:
                    raise click.UsageError("Config file {}: {} {}".format(config, opt.name, e.message))
        ctx.default_map = {k: v for k, v in default_map.items() if isinstance(v, dict)}

    config = CommandConfiguration(**kwargs)
    logger = config.logger = create_command_line_logger(config.log_level.upper())

    # Mute SQLAlchemy logger who is quite a verbose friend otherwise
    sa_logger = logging.getLogger("sqlalchemy")
    sa_logger.setLevel(logging.WARN)

    config.version = __version__
    config.dbsession = None

    if ctx.invoked_subcommand not in QUIET_COMMANDS:
        from uwsim.db import setup_database

        dbfile = os.path.abspath(config.database_file)
        logger.info("uwsim, version %s%s%s", colorama.Fore.LIGHTCYAN_EX, __version__, colorama.Fore.RESET)
        logger.info("Using run ledger %s%s%s", colorama.Fore.LIGHTCYAN_EX, dbfile, colorama.Fore.RESET)
        config.dbsession, _ = setup_database(logger, dbfile)

    ctx.obj = config


@contextmanager
def recorded_run(config: CommandConfiguration, output_dir=None):
    """Keep a run ledger row of the current subcommand.

    Yields a dict the command fills with its summary. Domain errors are turned
    into click errors: bad parameters exit with 2, everything else with 1.
    """
    from uwsim.models.implementation import RunRecord

    ctx = click.get_current_context()
    run = RunRecord(command=ctx.info_name, seed=config.seed, arguments=dict(ctx.params), output_dir=output_dir, status="running")
    config.dbsession.add(run)
    config.dbsession.commit()

    summary = {}
    started = time.perf_counter()
    try:
        yield summary
    except Exception as e:
        run.status = "failed"
        run.summary = {"error": str(e)}
        run.duration = time.perf_counter() - started
        config.dbsession.commit()
        if isinstance(e, InvalidParameter):
            raise click.UsageError(str(e)) from e
        if isinstance(e, UwsimError):
            raise click.ClickException(str(e)) from e
        raise
    run.status = "success"
    run.summary = summary
    run.duration = time.perf_counter() - started
    config.dbsession.commit()


def write_table(logger, table, out_dir: str, name: str, print_out=True):
    """Write a table as CSV and Markdown and echo it on the terminal."""
    from uwsim.generic.comparison import print_table

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, name + ".csv")
    table.write_csv(csv_path)
    table.write_markdown(os.path.join(out_dir, name + ".md"))
    if print_out:
        print_table(table)
    logger.info("Wrote %s%s%s", colorama.Fore.LIGHTCYAN_EX, csv_path, colorama.Fore.RESET)
    return csv_path


@cli.command()
@click.option('--input-dir', required=True, help="Directory of <id>.png and <id>_depth.png pairs", type=click.Path(exists=True, file_okay=False))
@click.option('--preset', required=False, default="clear-oceanic", help="Water type the parameters are drawn from", type=click.Choice(sorted(PRESETS)))
@click.option('--samples-per-pair', required=False, default=1, help="Parameter draws per RGB-D pair", type=click.IntRange(min=1))
@click.option('--size', required=False, default=256, help="Edge of the square output images", type=click.IntRange(min=1))
@click.option('--model', required=False, default="improved", help="Imaging model", type=click.Choice(sorted(MODELS)))
@click.option('--depth-scale', required=False, default=0.001, help="Meters per 16-bit depth unit", type=click.FloatRange(min=0, min_open=True))
@click.option('--max-range', required=False, default=10.0, help="Ranges are clamped to this many meters", type=click.FloatRange(min=0, min_open=True))
@click.pass_obj
def synthesize(config: CommandConfiguration, input_dir, preset, samples_per_pair, size, model, depth_scale, max_range):
    """Generate a synthetic underwater dataset.

    Every RGB-D pair is cropped and resized, and degraded with water
    parameters drawn from the chosen water type. Writes degraded and clear
    images, the depth maps used and a manifest under --out.
    """

    logger = config.logger

    from uwsim.harness import synthesize_dataset

    with recorded_run(config, config.out) as summary:
        manifest = synthesize_dataset(
            logger,
            input_dir,
            config.out,
            preset=preset,
            seed=config.seed,
            samples_per_pair=samples_per_pair,
            size=size,
            threads=config.threads,
            model=model,
            depth_scale=depth_scale,
            max_range=max_range)

        summary.update({"entries": len(manifest.entries), "errors": len(manifest.errors), "manifest": manifest.path})

        print("Manifest: {}{}{}".format(colorama.Fore.LIGHTCYAN_EX, manifest.path, colorama.Fore.RESET))
        print("Samples written: {}{}{}".format(colorama.Fore.LIGHTCYAN_EX, len(manifest.entries), colorama.Fore.RESET))

        if manifest.errors:
            lines = ["{} sample {}: {}".format(*e) for e in manifest.errors]
            raise click.ClickException("{} samples failed:\n{}".format(len(manifest.errors), "\n".join(lines)))


@cli.command()
@click.option('--input-dir', required=True, help="Directory of images to score", type=click.Path(exists=True, file_okay=False))
@click.option('--reference-dir', required=False, default=None, help="Directory of clear images with the same file names", type=click.Path(exists=True, file_okay=False))
@click.option('--metrics', required=False, default="uicm,uism,uiconm,uiqm", help="Comma separated metric names", callback=split_names(METRIC_NAMES))
@click.pass_obj
def assess(config: CommandConfiguration, input_dir, reference_dir, metrics):
    """Score images with non-reference and full-reference metrics.

    Full-reference metrics (mse, psnr, ssim) need --reference-dir.
    """

    logger = config.logger

    if not metrics:
        raise click.UsageError("Give at least one metric")

    from uwsim.harness import assess_images

    with recorded_run(config, config.out) as summary:
        table = assess_images(logger, input_dir, reference_dir, metrics, threads=config.threads)
        summary["csv"] = write_table(logger, table, config.out, "assess")
        summary["images"] = len(table.rows)


@cli.command()
@click.option('--input-dir', required=False, default=None, help="Directory of underwater images", type=click.Path(exists=True, file_okay=False))
@click.option('--reference-dir', required=False, default=None, help="Directory of clear images with the same file names", type=click.Path(exists=True, file_okay=False))
@click.option('--manifest', required=False, default=None, help="Synthetic dataset manifest, gives depth maps, water parameters and references", type=click.Path(exists=True))
@click.option('--methods', required=False, default="he,grayworld,udcp", help="Comma separated restoration methods", callback=split_names(METHODS))
@click.option('--metrics', required=False, default="uiqm", help="Comma separated metric names", callback=split_names(METRIC_NAMES))
@click.option('--loss', required=False, default="l2", help="Loss of the graddesc method", type=click.Choice(LOSS_KINDS))
@click.option('--max-iters', required=False, default=500, help="Gradient descent iteration cap", type=click.IntRange(min=1))
@click.pass_obj
def compare(config: CommandConfiguration, input_dir, reference_dir, manifest, methods, metrics, loss, max_iters):
    """Restore images with several methods and compare the scores.

    Model based methods (analytic, graddesc) need --manifest. Restored
    images are written under --out for visual inspection.
    """

    logger = config.logger

    if not methods:
        raise click.UsageError("Give at least one method")
    if not metrics:
        raise click.UsageError("Give at least one metric")
    if not input_dir and not manifest:
        raise click.UsageError("Give --input-dir or --manifest")

    from uwsim.harness import compare_methods
    from uwsim.losses import LossSpec
    from uwsim.restoration import InversionConfig

    with recorded_run(config, config.out) as summary:
        cfg = InversionConfig(max_iters=max_iters, loss=LossSpec(loss))
        tables = compare_methods(logger, methods, config.out, input_dir=input_dir, reference_dir=reference_dir, manifest_path=manifest, metrics=metrics, cfg=cfg, threads=config.threads)
        for name, table in tables.items():
            summary[name] = write_table(logger, table, config.out, "compare-" + name)


@cli.command()
@click.option('--manifest', required=True, help="Synthetic dataset manifest", type=click.Path(exists=True))
@click.option('--losses', required=False, default=",".join(LOSS_KINDS), help="Comma separated loss kinds", callback=split_names(LOSS_KINDS))
@click.option('--mix-alpha', required=False, default=DEFAULT_MIX_ALPHA, help="Weight of the base loss in combined losses", type=click.FloatRange(0, 1))
@click.option('--max-iters', required=False, default=500, help="Gradient descent iteration cap", type=click.IntRange(min=1))
@click.option('--step-size', required=False, default=0.5, help="Initial trial step of every descent iteration", type=click.FloatRange(min=0, min_open=True))
@click.pass_obj
def ablate(config: CommandConfiguration, manifest, losses, mix_alpha, max_iters, step_size):
    """Compare loss functions by gradient descent inversion of a synthetic set.

    Reports MSE, PSNR and SSIM of the restored images against the clear ones.
    """

    logger = config.logger

    if not losses:
        raise click.UsageError("Give at least one loss kind")

    from uwsim.harness import ablate_losses
    from uwsim.restoration import InversionConfig

    with recorded_run(config, config.out) as summary:
        cfg = InversionConfig(max_iters=max_iters, step_size=step_size)
        table, per_image = ablate_losses(logger, manifest, losses, mix_alpha=mix_alpha, cfg=cfg, threads=config.threads)
        summary["csv"] = write_table(logger, table, config.out, "ablation")
        write_table(logger, per_image, config.out, "ablation-per-image", print_out=False)


@cli.command()
@click.option('--methods', required=False, default="he,grayworld,udcp,analytic", help="Comma separated restoration methods", callback=split_names(METHODS))
@click.option('--count', required=False, default=10, help="Timed images per method", type=click.IntRange(min=1))
@click.option('--warmup', required=False, default=2, help="Untimed calls before timing", type=click.IntRange(min=0))
@click.option('--size', required=False, default=256, help="Edge of the square test images", type=click.IntRange(min=16))
@click.pass_obj
def bench(config: CommandConfiguration, methods, count, warmup, size):
    """Time restoration methods on random images.

    Published timings are printed alongside. The learned generator figure is
    GPU inference and not comparable with these CPU numbers.
    """

    logger = config.logger

    if not methods:
        raise click.UsageError("Give at least one method")

    from uwsim.generic.comparison import ComparisonTable
    from uwsim.generic.timing import print_timing_report
    from uwsim.harness import bench_methods

    with recorded_run(config, config.out) as summary:
        report = bench_methods(logger, methods, count, warmup, size=size, seed=config.seed)
        print_timing_report(report)

        table = ComparisonTable("method", ["mean_seconds", "images_per_second", "image_count", "warmup", "reference_seconds"], title="Timing")
        for row in report.as_rows():
            table.add_row(row["method"], row)
        summary["csv"] = write_table(logger, table, config.out, "bench", print_out=False)
        summary["mean_seconds"] = {m: t.mean_seconds for m, t in report.timings.items()}


@cli.command()
@click.option('--limit', required=False, default=20, help="How many latest runs to print", type=click.IntRange(min=1))
@click.pass_obj
def history(config: CommandConfiguration, limit):
    """Print out the latest runs from the run ledger."""

    from uwsim.generic.history import fetch_history, print_history
    from uwsim.models.implementation import RunRecord

    print_history(fetch_history(config.dbsession, RunRecord, limit))


@cli.command(name="reference")
@click.pass_obj
def reference(config: CommandConfiguration):
    """Print out the command line reference for the documentation."""

    from uwsim.generic.reference import generate_reference
    generate_reference(cli)


@cli.command(name="version")
@click.pass_obj
def version(config: CommandConfiguration):
    """Print version number and exit."""
    print(config.version)


def main():
    # https://github.com/pallets/click/issues/204#issuecomment-270012917
    cli.main(max_content_width=200, terminal_width=200)
