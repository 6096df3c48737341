import json
import logging
from typing import Iterable, Optional

from sqlalchemy.orm import Session

from .. import __version__
from ..database import Base, SessionLocal, engine
from ..models import OracleCheck, Run
from ..schemas import OracleReport, SweepScenario

logger = logging.getLogger(__name__)

class RegistryService:
    def init_db(self):
        Base.metadata.create_all(bind=engine)

    def record_run(self, command: str, scenario: SweepScenario, output_path: Optional[str] = None,
                   csv_sha256: Optional[str] = None, rows: int = 0,
                   reports: Iterable[OracleReport] = (), db: Optional[Session] = None) -> Optional[int]:
        """
        Persist one CLI run and its oracle checks.
        Returns the run id, or None when the registry is unavailable (the run itself is not affected).
        """
        owns_session = db is None
        if owns_session:
            self.init_db()
            db = SessionLocal()
        try:
            run = Run(
                command=command,
                scenario=json.dumps(scenario.model_dump(mode="json"), sort_keys=True),
                output_path=output_path,
                csv_sha256=csv_sha256,
                rows=rows,
                version=__version__,
            )
            for report in reports:
                run.checks.append(OracleCheck(
                    quantity=report.quantity,
                    primary_value=report.primary,
                    oracle_value=report.oracle,
                    abs_dev=report.abs_dev,
                    rel_dev=report.rel_dev,
                    tolerance=report.tolerance,
                    passed=report.passed,
                ))
            db.add(run)
            db.commit()
            logger.info("recorded %s run #%d", command, run.id)
            return run.id
        except Exception as e:
            db.rollback()
            logger.warning("could not record %s run: %s", command, e)
            return None
        finally:
            if owns_session:
                db.close()

    def list_runs(self, db: Session, limit: int = 50) -> list[dict]:
        runs = db.query(Run).order_by(Run.id.desc()).limit(limit).all()
        return [
            {
                "id": run.id,
                "command": run.command,
                "output_path": run.output_path,
                "csv_sha256": run.csv_sha256,
                "rows": run.rows,
                "version": run.version,
                "created_at": run.created_at.isoformat() if run.created_at else None,
                "checks": len(run.checks),
                "failed_checks": sum(1 for check in run.checks if not check.passed),
            }
            for run in runs
        ]

registry_service = RegistryService()
