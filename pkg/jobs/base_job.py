"""
Base job handler for the batch driver.
"""

import time
from abc import ABC, abstractmethod
from typing import Any, Dict, List

import structlog

from shared.config import config_scope
from shared.errors import FileError, HypoBVError, NumericNonConvergence, SchemaError, VerdictFailure
from shared.models import Job, JobResult, JobStatus

logger = structlog.get_logger(__name__)


def status_for(error: BaseException) -> JobStatus:
    if isinstance(error, VerdictFailure):
        return JobStatus.VERDICT_FAILURE
    if isinstance(error, NumericNonConvergence):
        return JobStatus.NON_CONVERGENCE
    if isinstance(error, SchemaError):
        return JobStatus.SCHEMA_ERROR
    if isinstance(error, FileError):
        return JobStatus.FILE_ERROR
    return JobStatus.ERROR


class JobContext:
    """Per-job scratch space handed to command handlers."""

    def __init__(self, job: Job):
        self.job = job
        self.parameters: Dict[str, Any] = dict(job.parameters)
        self.warnings: List[str] = []

    def warn(self, message: str) -> None:
        logger.warning("job_warning", job_id=self.job.job_id, message=message)
        self.warnings.append(message)


class BaseJobHandler(ABC):
    """Base class for job handlers: times the work and turns domain errors into results."""

    def process(self, job: Job) -> JobResult:
        job_id = job.job_id or job.command
        started = time.perf_counter()
        ctx = JobContext(job)
        log = logger.bind(job_id=job_id, command=job.command)
        try:
            with config_scope(job.config):
                result = self.execute(job.command, ctx)
            outcome = JobResult(
                job_id=job_id,
                command=job.command,
                status=JobStatus.OK,
                success=True,
                result=result,
                warnings=ctx.warnings,
            )
            log.info("job_completed", elapsed=round(time.perf_counter() - started, 3))
        except HypoBVError as e:
            outcome = JobResult(
                job_id=job_id,
                command=job.command,
                status=status_for(e),
                success=False,
                error_message=e.message,
                result={"details": e.details} if e.details else None,
                exit_code=e.exit_code,
                warnings=ctx.warnings,
            )
            log.error("job_failed", error=e.message, exit_code=e.exit_code)
        except Exception as e:
            outcome = JobResult(
                job_id=job_id,
                command=job.command,
                status=JobStatus.ERROR,
                success=False,
                error_message=f"{type(e).__name__}: {e}",
                exit_code=1,
                warnings=ctx.warnings,
            )
            log.exception("job_crashed")

        if job.expect == "fail":
            outcome.expected_failure = not outcome.success
        return outcome

    @abstractmethod
    def execute(self, command: str, ctx: JobContext) -> Dict[str, Any]:
        """Run one command and return its JSON-ready result."""
        pass

    @abstractmethod
    def commands(self) -> List[str]:
        pass
