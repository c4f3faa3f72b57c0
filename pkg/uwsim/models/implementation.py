"""Attach SQLAlchemy models to their "Base"

Models are defined as mixins so that an embedding application may supply its
own declarative base. Here we supply implementations for the default command
line application using SQLite.
"""
from sqlalchemy.orm import declarative_base

from .runrecord import _RunRecord


Base = declarative_base()


class RunRecord(_RunRecord, Base):
    pass
