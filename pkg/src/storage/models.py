from sqlalchemy import Column, Integer, String, Float, DateTime, Text, UniqueConstraint
from sqlalchemy.orm import declarative_base
from datetime import datetime

Base = declarative_base()


class RunRecord(Base):
    """Запуск подкоманды"""
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True)
    command = Column(String(20), nullable=False, index=True)  # gen, train, decode, eval, ablate
    config_hash = Column(String(64), nullable=False, index=True)
    out_dir = Column(Text, nullable=False)
    status = Column(String(20), nullable=False, default="STARTED")  # STARTED, FINISHED, FAILED
    exit_code = Column(Integer, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow)
    updated_at = Column(DateTime, default=datetime.utcnow, onupdate=datetime.utcnow)

    def __repr__(self):
        return f"<RunRecord(command={self.command}, status={self.status}, out_dir={self.out_dir})>"


class AblationRow(Base):
    """Результат одного варианта абляции для одного зерна"""
    __tablename__ = "ablation_rows"

    id = Column(Integer, primary_key=True)
    variant = Column(String(50), nullable=False, index=True)
    seed = Column(Integer, nullable=False)
    config_hash = Column(String(64), nullable=False, index=True)
    cer = Column(Float, nullable=False)
    latency_mean = Column(Float, nullable=True)  # NULL для непотокового варианта
    boundary_precision = Column(Float, nullable=True)
    boundary_recall = Column(Float, nullable=True)
    checkpoint = Column(Text, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow)

    __table_args__ = (
        UniqueConstraint('variant', 'seed', 'config_hash', name='uix_variant_seed_config'),
    )

    def __repr__(self):
        return f"<AblationRow(variant={self.variant}, seed={self.seed}, cer={self.cer:.4f})>"
