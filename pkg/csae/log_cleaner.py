import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List

RUN_FILE_PATTERNS = ("log_*.txt", "verbose_*.txt")


@dataclass
class CleanupSummary:
    logs_deleted: int = 0
    reports_deleted: int = 0
    errors: List[str] = field(default_factory=list)


def cleanup_old_runs(log_dir="logs", report_dir="reports", days_old=7, keep: Iterable[Path] = ()):
    """
    Delete run logs and verbose reports whose modification time is older
    than ``days_old`` days. Files listed in ``keep`` are never touched.

    Returns:
        CleanupSummary with per-directory deletion counts and any OS errors.
    """
    summary = CleanupSummary()
    cutoff = time.time() - days_old * 24 * 60 * 60
    protected = {Path(p).resolve() for p in keep}

    summary.logs_deleted = _purge(Path(log_dir), cutoff, protected, summary.errors)
    if Path(report_dir).resolve() != Path(log_dir).resolve():
        summary.reports_deleted = _purge(Path(report_dir), cutoff, protected, summary.errors)
    return summary


def _purge(directory: Path, cutoff: float, protected, errors: List[str]) -> int:
    if not directory.is_dir():
        return 0

    deleted = 0
    for pattern in RUN_FILE_PATTERNS:
        for path in directory.glob(pattern):
            if path.resolve() in protected:
                continue
            try:
                if path.stat().st_mtime < cutoff:
                    path.unlink()
                    deleted += 1
            except OSError as e:
                errors.append(f"could not delete {path}: {e}")
    return deleted
