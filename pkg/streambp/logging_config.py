import logging
import os
from pathlib import Path
from logging.handlers import RotatingFileHandler


class TrialContextFilter(logging.Filter):
    """Tag records with the worker process name so parallel trials stay distinguishable."""

    def filter(self, record: logging.LogRecord):
        record.worker = record.processName if record.processName != "MainProcess" else "main"
        return True


def setup_logging(format: str = None, log_to_file: bool = True):
    """
    Configure logging for the toolkit with log rotation.

    Environment variables:
        LOG_LEVEL: Log level (default: INFO)
        LOG_FILE_PATH: Path to log file (default: logs/streambp.log)
        LOG_MAX_SIZE: Max size in MB before rotating (default: 10MB)
        LOG_BACKUP_COUNT: Number of backup files to keep (default: 5)

    Ensures log directory exists, prevents path traversal, and configures
    both rotating file and console handlers.
    """
    base_dir = Path(__file__).parent
    log_dir = base_dir / "logs"
    default_log_file = log_dir / "streambp.log"

    log_level_str = os.environ.get("LOG_LEVEL", "INFO").upper()
    log_level = getattr(logging, log_level_str, logging.INFO)

    log_format = format or "%(asctime)s - %(levelname)s - %(name)s [%(worker)s] - %(filename)s:%(lineno)d - %(message)s"
    formatter = logging.Formatter(log_format)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.addFilter(TrialContextFilter())
    handlers = [console_handler]

    resolved_path = None
    max_bytes = None
    backup_count = None
    if log_to_file:
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file_path = Path(os.environ.get("LOG_FILE_PATH", str(default_log_file)))

        # Secure path check: must be inside logs/ directory
        log_dir_resolved = log_dir.resolve()
        resolved_path = log_file_path.resolve()
        if not str(resolved_path).startswith(str(log_dir_resolved) + os.sep):
            raise ValueError(f"LOG_FILE_PATH '{log_file_path}' is outside the trusted log directory '{log_dir_resolved}'")

        resolved_path.parent.mkdir(parents=True, exist_ok=True)

        try:
            max_mb = int(os.environ.get("LOG_MAX_SIZE", 10))
            max_bytes = max_mb * 1024 * 1024
        except (TypeError, ValueError):
            max_bytes = 10 * 1024 * 1024

        try:
            backup_count = int(os.environ.get("LOG_BACKUP_COUNT", 5))
        except ValueError:
            backup_count = 5

        file_handler = RotatingFileHandler(resolved_path, maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8")
        file_handler.setFormatter(formatter)
        file_handler.addFilter(TrialContextFilter())
        handlers.append(file_handler)

    logging.basicConfig(level=log_level, handlers=handlers, force=True)

    logger = logging.getLogger(__name__)
    logger.debug(
        f"Logging configured: level={log_level_str}, "
        f"file={resolved_path}, max_size={max_bytes} bytes, "
        f"backup_count={backup_count}"
    )
