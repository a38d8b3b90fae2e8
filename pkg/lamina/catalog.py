"""In-memory sqlite catalog of finished runs, queried by ``report``."""
from sqlalchemy import Boolean, Column, Float, Integer, String, create_engine, select
from sqlalchemy.orm import Session, declarative_base

from lamina.audit import ConvergenceRecord

Base = declarative_base()


class RunRecord(Base):
    """One convergence record plus the run it came from."""

    __tablename__ = "run_record"
    id = Column(Integer, primary_key=True)
    nickname = Column(String, index=True)
    source = Column(String)

    eta = Column(Float)
    nu = Column(Float)
    delta = Column(Float)
    alpha = Column(Float)
    beta = Column(Float)
    budget = Column(Float)
    theta_nu = Column(Float)
    steps = Column(Integer)
    dt = Column(Float)
    sup_error = Column(Float)
    m = Column(Float)
    gradient_metric = Column(Float)
    gradient_ratio = Column(Float)
    v_gradient_integral = Column(Float)
    v_gradient_ratio = Column(Float)
    envelope_m = Column(Float)
    envelope_violation = Column(Float)
    max_defect = Column(Float)
    layer_sup = Column(Float)
    layer_ratio = Column(Float)
    initial_error = Column(Float)
    initial_corrector = Column(Float)
    initial_layer = Column(Float)
    w_gradient_ratio = Column(Float)
    layer_gradient_ratio = Column(Float)
    physical_dissipation = Column(Float)
    energy_constant = Column(Float)
    c_star = Column(Float)
    epsilon_ok = Column(Boolean)
    theta_condition = Column(Boolean)
    f0_constant = Column(Float)
    f1_constant = Column(Float)
    f2_constant = Column(Float)

    def as_record(self) -> ConvergenceRecord:
        return ConvergenceRecord(**{c: getattr(self, c) for c in ConvergenceRecord.columns()})

    def __repr__(self) -> str:
        return f"{self.nickname} beta={self.beta} M={self.m}"


class Catalog:
    """Context manager holding a fresh in-memory database."""

    def __init__(self, url: str = "sqlite://"):
        self.engine = create_engine(url)
        Base.metadata.create_all(self.engine)
        self.session = Session(self.engine)

    def __enter__(self) -> "Catalog":
        return self

    def __exit__(self, *exc):
        self.session.close()
        self.engine.dispose()

    def add(self, nickname: str, source: str, record: ConvergenceRecord) -> RunRecord:
        values = {c: getattr(record, c) for c in ConvergenceRecord.columns()}
        row = RunRecord(nickname=nickname, source=source, **values)
        self.session.add(row)
        self.session.commit()
        return row

    def by_beta(self) -> list:
        """Every run ordered by beta, then nickname."""
        query = select(RunRecord).order_by(RunRecord.beta, RunRecord.nickname)
        return list(self.session.scalars(query))
