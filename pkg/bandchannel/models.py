from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Index, Integer, String, Text, func
from sqlalchemy.orm import relationship

from .database import Base

class Run(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    command = Column(String, nullable=False, index=True)  # coefficients, evolve, fig1, fig2, sweep, verify
    scenario = Column(Text, nullable=False)  # SweepScenario as JSON
    output_path = Column(String)
    csv_sha256 = Column(String(64))
    rows = Column(Integer, default=0)
    version = Column(String)
    created_at = Column(DateTime, server_default=func.now())

    checks = relationship("OracleCheck", back_populates="run", cascade="all, delete-orphan")

class OracleCheck(Base):
    __tablename__ = "oracle_checks"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    quantity = Column(String, nullable=False)
    primary_value = Column(Float)
    oracle_value = Column(Float)
    abs_dev = Column(Float)
    rel_dev = Column(Float)
    tolerance = Column(Float)
    passed = Column(Boolean, nullable=False)

    run = relationship("Run", back_populates="checks")

    __table_args__ = (
        Index('idx_check_run', 'run_id'),
        Index('idx_check_passed', 'passed'),
    )
