"""
Job manager: loads job files, runs them in parallel and assembles reports.
"""

import asyncio
import contextvars
import glob
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional

import numpy
import pydantic
import scipy
import structlog
import sympy
from pydantic import ValidationError

from jobs.handlers import CommandHandler, read_json
from shared.config import get_config
from shared.errors import FileError, SchemaError
from shared.models import Job, JobResult, JobStatus, Report

logger = structlog.get_logger(__name__)


def load_job(path: str) -> Job:
    """Read and validate a job file; relative inputs resolve against its directory."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise SchemaError(f"Job file {path} must hold a JSON object")
    try:
        job = Job.model_validate(data)
    except ValidationError as e:
        raise SchemaError(f"Job file {path} does not validate: {e.errors()[0]['msg']}") from e
    job.job_id = job.job_id or os.path.splitext(os.path.basename(path))[0]
    job.base_dir = os.path.dirname(os.path.abspath(path))
    return job


def provenance() -> Dict[str, Any]:
    cfg = get_config()
    return {
        "hypobv": cfg.app.version,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
        "pydantic": pydantic.VERSION,
        "seed": cfg.run.seed,
        "quad_tol": cfg.boundary.quad_tol,
    }


def job_echo(job: Job) -> Dict[str, Any]:
    return job.model_dump(mode="json", exclude_none=True)


def unexpected(result: JobResult, job: Job) -> bool:
    """A failure not declared by the job, or a declared failure that did not happen."""
    if job.expect == "fail":
        return result.success
    return not result.success


def render(report: Report) -> str:
    """Deterministic JSON text of a report."""
    return json.dumps(report.model_dump(mode="json", by_alias=True), indent=2, sort_keys=True) + "\n"


class JobManager:
    """Runs single jobs and job suites."""

    def __init__(self, threads: Optional[int] = None):
        self.handler = CommandHandler()
        self.threads = threads or get_config().run.threads
        self._write_lock = asyncio.Lock()

    async def run_job(self, job: Job, executor: Optional[ThreadPoolExecutor] = None) -> JobResult:
        """Run one job off the event loop, with its config scope isolated in a copied context."""
        loop = asyncio.get_running_loop()
        ctx = contextvars.copy_context()
        return await loop.run_in_executor(executor, ctx.run, self.handler.process, job)

    def job_report(self, job: Job, result: JobResult) -> Report:
        failed = unexpected(result, job)
        code = 0
        if failed:
            code = result.exit_code if not result.success else 1
        return Report(
            job=job_echo(job),
            results=[result],
            provenance=provenance(),
            warnings=list(result.warnings),
            summary=self._summary([(job, result)]),
            exit_code=code,
        )

    async def run(self, job: Job, out: Optional[str] = None) -> Report:
        with ThreadPoolExecutor(max_workers=1) as executor:
            result = await self.run_job(job, executor)
        report = self.job_report(job, result)
        target = out or (os.path.join(job.base_dir, job.out) if job.out and job.base_dir else job.out)
        if target:
            await self.write(report, target)
        return report

    async def run_suite(self, corpus_dir: str, out: Optional[str] = None) -> Report:
        """Run every *.json job in corpus_dir; nonzero exit iff some job fails unexpectedly."""
        if not os.path.isdir(corpus_dir):
            raise FileError(f"Corpus directory not found: {corpus_dir}")
        paths = sorted(glob.glob(os.path.join(corpus_dir, "*.json")))
        jobs: List[Job] = []
        loaded: List[JobResult] = []
        for path in paths:
            try:
                jobs.append(load_job(path))
            except (SchemaError, FileError) as e:
                stem = os.path.splitext(os.path.basename(path))[0]
                logger.error("job_rejected", path=path, error=e.message)
                loaded.append(JobResult(job_id=stem, command="?", status=JobStatus.SCHEMA_ERROR, success=False,
                                        error_message=e.message, exit_code=e.exit_code))

        warnings: List[str] = []
        if not paths:
            warnings.append(f"no job files in {corpus_dir}")
            logger.warning("empty_corpus", corpus=corpus_dir)

        logger.info("suite_started", corpus=corpus_dir, jobs=len(jobs), threads=self.threads)
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            results = await asyncio.gather(*(self.run_job(job, executor) for job in jobs))

        pairs = list(zip(jobs, results))
        for job, result in pairs:
            warnings.extend(f"{result.job_id}: {w}" for w in result.warnings)
            if job.out:
                await self.write(self.job_report(job, result), os.path.join(job.base_dir or "", job.out))

        exit_code = 0
        for job, result in pairs:
            if unexpected(result, job):
                exit_code = result.exit_code if not result.success else 1
                break
        if loaded and exit_code == 0:
            exit_code = loaded[0].exit_code

        report = Report(
            job={"suite": os.path.basename(os.path.normpath(corpus_dir))},
            results=sorted(loaded + list(results), key=lambda r: r.job_id),
            provenance=provenance(),
            warnings=warnings,
            summary=self._summary(pairs, rejected=len(loaded)),
            exit_code=exit_code,
        )
        logger.info("suite_finished", **report.summary, exit_code=exit_code)
        if out:
            await self.write(report, out)
        return report

    def _summary(self, pairs: List[Any], rejected: int = 0) -> Dict[str, int]:
        summary = {"total": len(pairs) + rejected, "passed": 0, "expected_failures": 0, "failed": rejected}
        for job, result in pairs:
            if unexpected(result, job):
                summary["failed"] += 1
            elif result.expected_failure:
                summary["expected_failures"] += 1
            else:
                summary["passed"] += 1
        return summary

    async def write(self, report: Report, path: str) -> None:
        async with self._write_lock:
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok=True)
            with open(path, "w") as handle:
                handle.write(render(report))
            logger.info("report_written", path=path)

    def summarize_reports(self, directory: str) -> Report:
        """Re-summarize report files written earlier."""
        if not os.path.isdir(directory):
            raise FileError(f"Report directory not found: {directory}")
        results: List[JobResult] = []
        warnings: List[str] = []
        exit_code = 0
        failed = 0
        for path in sorted(glob.glob(os.path.join(directory, "*.json"))):
            data = read_json(path)
            try:
                report = Report.model_validate(data)
            except ValidationError:
                warnings.append(f"{os.path.basename(path)} is not a report")
                continue
            results.extend(report.results)
            warnings.extend(report.warnings)
            failed += int(report.exit_code != 0)
            exit_code = exit_code or report.exit_code
        return Report(
            job={"report_dir": os.path.basename(os.path.normpath(directory))},
            results=results,
            provenance=provenance(),
            warnings=warnings,
            summary={"results": len(results), "failed_reports": failed},
            exit_code=exit_code,
        )


# Global job manager instance
job_manager: Optional[JobManager] = None


def get_job_manager() -> JobManager:
    """Get the global job manager."""
    global job_manager
    if job_manager is None:
        job_manager = JobManager()
    return job_manager
