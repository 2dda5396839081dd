from datetime import datetime
from pathlib import Path
from typing import Optional, Union

from sqlalchemy import create_engine, String, Integer, Float, DateTime
from sqlalchemy.engine import Engine
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column, Session

from src.config import DB_PATH


def get_engine(db_path: Union[str, Path] = DB_PATH) -> Engine:
    """SQLite engine for the evaluation ledger (SQLAlchemy 2.0 style)."""
    return create_engine(f"sqlite:///{db_path}", echo=False)


class Base(DeclarativeBase):
    pass


# One row per (trace, model) evaluation
class EvalRun(Base):
    __tablename__ = "eval_runs"

    # Identity
    id: Mapped[int] = mapped_column(primary_key=True)
    trace_path: Mapped[str] = mapped_column(String(500))
    trace_hash: Mapped[str] = mapped_column(String(64), index=True)
    model_path: Mapped[str] = mapped_column(String(500))
    prior_mode: Mapped[str] = mapped_column(String(20))

    # Metrics
    steps: Mapped[int] = mapped_column(Integer)
    accuracy: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    latency_steps: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    false_alarms: Mapped[int] = mapped_column(Integer)
    agreement: Mapped[Optional[float]] = mapped_column(Float, nullable=True)

    created: Mapped[datetime] = mapped_column(DateTime, default=datetime.utcnow)

    def __repr__(self):
        return f"<EvalRun(trace='{self.trace_path}', accuracy={self.accuracy})>"


def init_db(engine: Engine) -> None:
    """Creates the tables if they don't exist."""
    Base.metadata.create_all(engine)


def record_runs(engine: Engine, runs) -> int:
    init_db(engine)
    with Session(engine) as session:
        session.add_all(runs)
        session.commit()
    return len(runs)
