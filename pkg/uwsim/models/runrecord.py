from typing import List

import sqlalchemy as sa
from sqlalchemy.orm import Session

from uwsim.models.utils import TimeStampedBaseModel


class _RunRecord(TimeStampedBaseModel):
    """One invocation of a subcommand."""

    __tablename__ = "run_record"

    #: Subcommand name like "synthesize" or "ablate"
    command = sa.Column(sa.String(64), nullable=False)

    #: Global --seed in effect
    seed = sa.Column(sa.Integer, nullable=False, default=0)

    #: Effective subcommand arguments after config file and flags were merged
    arguments = sa.Column(sa.JSON, nullable=False, default=dict)

    #: Where the command wrote its files
    output_dir = sa.Column(sa.String(1024), nullable=True)

    #: "running", "success" or "failed"
    status = sa.Column(sa.String(16), nullable=False, default="running")

    #: Command specific counts, table paths or the failure message
    summary = sa.Column(sa.JSON, nullable=True)

    #: Wall clock seconds from start to finish
    duration = sa.Column(sa.Float, nullable=True)

    @classmethod
    def latest(cls, dbsession: Session, limit: int) -> List["_RunRecord"]:
        return dbsession.query(cls).order_by(cls.id.desc()).limit(limit).all()
