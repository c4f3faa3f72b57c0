import os
from typing import Tuple

from sqlalchemy import create_engine
from sqlalchemy.orm import Session, sessionmaker

from .models.implementation import Base


def setup_database(logger, db_filename) -> Tuple[Session, bool]:
    """Create new SQLite database and set up connection"""

    # https://docs.sqlalchemy.org/en/latest/dialects/sqlite.html
    url = "sqlite+pysqlite:///" + db_filename

    engine = create_engine(url, echo=False)

    new = not os.path.exists(db_filename)
    if new:
        logger.info("Initializing new run ledger %s", db_filename)
    init_db(engine)

    Session = sessionmaker(bind=engine)
    session = Session()
    return session, new


def init_db(engine):
    Base.metadata.create_all(engine)
