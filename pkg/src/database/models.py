import io
from datetime import datetime

import numpy as np
from sqlalchemy import Column, Date, DateTime, Float, ForeignKey, Index, Integer, LargeBinary, String
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


def pack_array(values: np.ndarray) -> bytes:
    """Serialize as .npy bytes"""
    buffer = io.BytesIO()
    np.save(buffer, np.asarray(values), allow_pickle=False)
    return buffer.getvalue()


def unpack_array(blob: bytes) -> np.ndarray:
    return np.load(io.BytesIO(blob), allow_pickle=False)


class ForecastRun(Base):
    """One rolling run: a variant at one alpha over one input file and config"""

    __tablename__ = 'forecast_runs'

    id = Column(Integer, primary_key=True)
    variant = Column(String(40), nullable=False)
    alpha = Column(Float, nullable=False)
    input_digest = Column(String(64), nullable=False)
    config_digest = Column(String(64), nullable=False)
    n = Column(Integer, nullable=False)
    m = Column(Integer, nullable=False)
    status = Column(String(20), default='running', nullable=False)
    created_at = Column(DateTime, default=datetime.now, nullable=False)
    updated_at = Column(DateTime, default=datetime.now, onupdate=datetime.now)

    rows = relationship("ForecastRow", back_populates="run", cascade="all, delete-orphan", order_by="ForecastRow.step")
    checkpoint = relationship("ChainCheckpoint", back_populates="run", uselist=False, cascade="all, delete-orphan")

    __table_args__ = (
        Index('idx_run_key', 'variant', 'alpha', 'input_digest', 'config_digest', unique=True),
    )

    def __repr__(self):
        return f"<ForecastRun(id={self.id}, variant='{self.variant}', alpha={self.alpha}, status='{self.status}')>"


class ForecastRow(Base):
    __tablename__ = 'forecast_rows'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('forecast_runs.id'), nullable=False)
    step = Column(Integer, nullable=False)
    date = Column(Date, nullable=False)
    r = Column(Float, nullable=False)
    q = Column(Float, nullable=False)
    es = Column(Float, nullable=False)

    run = relationship("ForecastRun", back_populates="rows")

    __table_args__ = (
        Index('idx_row_run_step', 'run_id', 'step', unique=True),
    )

    def __repr__(self):
        return f"<ForecastRow(run={self.run_id}, date={self.date}, q={self.q:.4f}, es={self.es:.4f})>"


class ChainCheckpoint(Base):
    """
    Latest carried draws and their recursion states for a run.
    (Enough to resume without refitting)
    """
    __tablename__ = 'chain_checkpoints'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('forecast_runs.id'), nullable=False, unique=True)
    # states hold (Q, w) at this series index
    state_index = Column(Integer, nullable=False)
    refit_ordinal = Column(Integer, nullable=False)
    draws = Column(LargeBinary, nullable=False)
    q_state = Column(LargeBinary, nullable=False)
    w_state = Column(LargeBinary, nullable=False)
    updated_at = Column(DateTime, default=datetime.now, onupdate=datetime.now)

    run = relationship("ForecastRun", back_populates="checkpoint")

    def __repr__(self):
        return f"<ChainCheckpoint(run={self.run_id}, state_index={self.state_index})>"
