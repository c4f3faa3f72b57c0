"""Run ledger queries and printing."""
import datetime
import json
from typing import List

import arrow
import colorama
from sqlalchemy.orm import Session
from tabulate import tabulate


def humanize(d: datetime.datetime) -> str:
    """"3 minutes ago" style time relative to now."""
    return arrow.get(d).humanize(arrow.utcnow())


def fetch_history(dbsession: Session, RunRecord: type, limit: int) -> List:
    """Most recent runs first."""
    return RunRecord.latest(dbsession, limit)


def print_history(runs: list):
    """Console run ledger printer"""

    if not runs:
        print("No runs recorded yet")
        return

    table = []
    for run in runs:
        if run.status == "success":
            status = "{}{}{}".format(colorama.Fore.LIGHTGREEN_EX, run.status, colorama.Fore.RESET)
        else:
            status = "{}{}{}".format(colorama.Fore.RED, run.status, colorama.Fore.RESET)
        table.append((
            run.id,
            run.command,
            humanize(run.created_at),
            status,
            "{:.1f}".format(run.duration) if run.duration is not None else "",
            run.seed,
            run.output_dir or "",
            json.dumps(run.summary, sort_keys=True) if run.summary else "",
        ))

    print(tabulate(table, headers=["#", "Command", "Started", "Status", "Seconds", "Seed", "Output", "Summary"], disable_numparse=True))
