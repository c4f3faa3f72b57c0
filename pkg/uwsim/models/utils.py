import datetime

import sqlalchemy as sa
from sqlalchemy.types import DateTime, TypeDecorator


def now() -> datetime.datetime:
    """Get the current time as timezone-aware UTC timestamp."""
    return datetime.datetime.now(datetime.timezone.utc)


class UTCDateTime(TypeDecorator):
    """Timezone aware datetime column that only accepts UTC.

    SQLite has no timezone support, so values are stored naive in UTC and
    the timezone is put back when loading.
    """

    impl = DateTime
    cache_ok = True

    def process_bind_param(self, value, dialect):
        if value is None:
            return value
        if value.tzinfo is None:
            raise ValueError("Naive datetime {} given, UTC expected".format(value))
        return value.astimezone(datetime.timezone.utc).replace(tzinfo=None)

    def process_result_value(self, value, dialect):
        if value is None:
            return value
        return value.replace(tzinfo=datetime.timezone.utc)


class TimeStampedBaseModel:
    """Base model with an integer PK and create & update timestamps."""

    __abstract__ = True
    __table_args__ = {"extend_existing": True}

    id = sa.Column(sa.Integer, autoincrement=True, primary_key=True)
    created_at = sa.Column(UTCDateTime, default=now)
    updated_at = sa.Column(UTCDateTime, onupdate=now)
