import json
from datetime import datetime
from pathlib import Path

from csae import config
from csae.log_cleaner import cleanup_old_runs


class RunLogger:
    """
    Console + file logger for one CLI run.

    Every line goes to stdout and to logs/log_<timestamp>.txt. The verbose
    channel (per-batch details, classifier internals) only goes to
    reports/verbose_<timestamp>.txt and only when verbose is on.
    """

    def __init__(self, verbose=False, log_dir=config.LOG_DIR, report_dir=config.REPORT_DIR):
        self.verbose = verbose
        self.log_dir = Path(log_dir)
        self.report_dir = Path(report_dir)
        self.log_file = None
        self.verbose_file = None
        self.verbose_written = False
        self._setup_files()

    def _setup_files(self):
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.log_dir.mkdir(parents=True, exist_ok=True)

        self.log_file = self.log_dir / f"log_{timestamp}.txt"
        with self.log_file.open("w", encoding="utf-8") as f:
            f.write(f"=== CSAE Run Log ({timestamp}) ===\n\n")

        if self.verbose:
            self.report_dir.mkdir(parents=True, exist_ok=True)
            self.verbose_file = self.report_dir / f"verbose_{timestamp}.txt"
            with self.verbose_file.open("w", encoding="utf-8") as f:
                f.write(f"=== Verbose Report ({timestamp}) ===\n\n")

    def _append(self, path, line):
        with path.open("a", encoding="utf-8") as f:
            f.write(line + "\n")

    def log(self, message, level="INFO"):
        line = f"[{level}] {message}"
        print(line)
        if self.log_file:
            self._append(self.log_file, line)

    def log_verbose(self, message):
        if self.verbose_file:
            self._append(self.verbose_file, message)
            self.verbose_written = True

    def metric(self, name, value):
        """Emit one machine-readable metric record as a JSON line."""
        record = json.dumps({"metric": name, "value": value})
        print(record)
        if self.log_file:
            self._append(self.log_file, record)

    def cleanup(self, days_old=config.LOG_RETENTION_DAYS):
        try:
            summary = cleanup_old_runs(
                log_dir=self.log_dir,
                report_dir=self.report_dir,
                days_old=days_old,
                keep=[p for p in (self.log_file, self.verbose_file) if p],
            )
            if summary.logs_deleted or summary.reports_deleted:
                self.log(
                    f"Cleaned up {summary.logs_deleted} old log files and "
                    f"{summary.reports_deleted} old report files"
                )
            for error in summary.errors:
                self.log(f"Log cleanup: {error}", level="WARNING")
        except OSError as e:
            self.log(f"Could not clean old log files: {e}", level="WARNING")

        # drop an empty verbose report
        if self.verbose and self.verbose_file and not self.verbose_written:
            try:
                self.verbose_file.unlink()
            except OSError as e:
                self.log(f"Failed to delete unused verbose file: {e}", level="WARNING")
