"""Wall clock timing of restoration methods."""
import time
from typing import Callable, Dict, List, Optional

import colorama
import numpy as np
from tabulate import tabulate

from uwsim.exceptions import InvalidParameter


#: Published per image times in seconds at 256x256. HE and UDCP were measured on a CPU,
#: the learned generator on a GPU.
REFERENCE_TIMINGS = {
    "he": 0.009,
    "udcp": 2.051,
    "learned (GPU)": 0.008,
}

GPU_CAVEAT = "Learned generator figure is GPU inference, not comparable with local CPU timings"


class MethodTiming:
    """Timing of one method.

    :param samples: Seconds of every timed call, warmup calls excluded
    """

    def __init__(self, method: str, samples: List[float], warmup: int):
        if not samples:
            raise InvalidParameter("Timing needs at least one timed image")
        self.method = method
        self.samples = samples
        self.warmup = warmup

    @property
    def image_count(self) -> int:
        return len(self.samples)

    @property
    def mean_seconds(self) -> float:
        return float(np.mean(self.samples))

    @property
    def throughput(self) -> float:
        """Images per second."""
        mean = self.mean_seconds
        return 1.0 / mean if mean > 0 else float("inf")


class TimingReport:

    def __init__(self, size: int, timings: Optional[Dict[str, MethodTiming]]=None):
        self.size = size
        self.timings = timings or {}

    def add(self, timing: MethodTiming):
        self.timings[timing.method] = timing

    def as_rows(self) -> List[dict]:
        return [{
            "method": t.method,
            "mean_seconds": t.mean_seconds,
            "images_per_second": t.throughput,
            "image_count": t.image_count,
            "warmup": t.warmup,
            "reference_seconds": REFERENCE_TIMINGS.get(t.method),
        } for t in self.timings.values()]


def time_method(method: str, func: Callable, images: list, warmup: int) -> MethodTiming:
    """Call ``func`` on every image and time the calls.

    Warmup calls run on the first image before the clock starts.
    """
    if warmup < 0:
        raise InvalidParameter("warmup must not be negative, got {}".format(warmup))
    if not images:
        raise InvalidParameter("Timing needs at least one image")

    for _ in range(warmup):
        func(images[0])

    samples = []
    for img in images:
        started = time.perf_counter()
        func(img)
        samples.append(time.perf_counter() - started)
    return MethodTiming(method, samples, warmup)


def print_timing_report(report: TimingReport):
    """Console timing printer"""

    table = []
    for row in report.as_rows():
        ref = row["reference_seconds"]
        table.append((
            row["method"],
            "{:.4f}".format(row["mean_seconds"]),
            "{:.1f}".format(row["images_per_second"]),
            row["image_count"],
            row["warmup"],
            "{:.3f}".format(ref) if ref is not None else "",
        ))

    for method, seconds in REFERENCE_TIMINGS.items():
        if method not in report.timings:
            table.append((method, "", "", "", "", "{:.3f}".format(seconds)))

    print("Image size: {}{}x{}{}".format(colorama.Fore.LIGHTCYAN_EX, report.size, report.size, colorama.Fore.RESET))
    print(tabulate(table, headers=["Method", "Mean s/image", "Images/s", "Timed", "Warmup", "Published s/image"], disable_numparse=True))
    print("{}{}{}".format(colorama.Fore.YELLOW, GPU_CAVEAT, colorama.Fore.RESET))
