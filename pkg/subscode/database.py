import os
from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text, create_engine
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

Base = declarative_base()


class PipelineRun(Base):
    __tablename__ = "pipeline_runs"

    id = Column(Integer, primary_key=True)
    command = Column(String(50), nullable=False)
    config_hash = Column(String(64), nullable=False, index=True)
    seed = Column(Integer)
    start_time = Column(DateTime, default=datetime.utcnow)
    end_time = Column(DateTime)
    duration_seconds = Column(Float)
    status = Column(String(20), default="running")
    error = Column(Text)

    artifacts = relationship("StageArtifact", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<PipelineRun(id={self.id}, command='{self.command}', status='{self.status}')>"


class StageArtifact(Base):
    __tablename__ = "stage_artifacts"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("pipeline_runs.id"), nullable=False)
    role = Column(String(10), nullable=False)
    path = Column(Text, nullable=False)
    digest = Column(String(64), nullable=False)
    size_bytes = Column(Integer)

    run = relationship("PipelineRun", back_populates="artifacts")

    def __repr__(self):
        return f"<StageArtifact(id={self.id}, role='{self.role}', path='{self.path}')>"


class RunLedger:
    """Persistent record of pipeline stage runs and the files they touched."""

    def __init__(self, database_url=None):
        if database_url is None:
            database_url = f"sqlite:///{os.path.join(os.getcwd(), 'subscode_runs.db')}"

        self.engine = create_engine(database_url)
        Base.metadata.create_all(self.engine)
        Session = sessionmaker(bind=self.engine)
        self.session = Session()

    def start_run(self, command, config_hash, seed=None):
        """create a run record in the running state"""
        run = PipelineRun(command=command, config_hash=config_hash, seed=seed, start_time=datetime.utcnow())
        self.session.add(run)
        self.session.commit()
        return run

    def add_artifact(self, run_id, role, path, digest, size_bytes=None):
        """attach an input or output file to a run"""
        if role not in ("input", "output"):
            raise ValueError(f"artifact role must be input or output, got {role!r}")
        artifact = StageArtifact(run_id=run_id, role=role, path=str(path), digest=digest, size_bytes=size_bytes)
        self.session.add(artifact)
        self.session.commit()
        return artifact

    def finish_run(self, run_id, status="completed", error=None):
        """mark a run as ended"""
        run = self.session.query(PipelineRun).filter_by(id=run_id).first()
        if run:
            run.end_time = datetime.utcnow()
            run.status = status
            run.error = error
            if run.start_time:
                run.duration_seconds = (run.end_time - run.start_time).total_seconds()
            self.session.commit()
        return run

    def get_runs(self, limit=50):
        """most recent runs first"""
        return self.session.query(PipelineRun).order_by(PipelineRun.id.desc()).limit(limit).all()

    def find_runs_by_config_hash(self, config_hash):
        return self.session.query(PipelineRun).filter_by(config_hash=config_hash).order_by(PipelineRun.id).all()

    def close(self):
        """close the database session"""
        self.session.close()
