import json
import logging
import logging.handlers
import os
import sys
from contextvars import ContextVar, Token
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

# Atribut bawaan LogRecord, sisanya dianggap field "extra"
_RESERVED = set(vars(logging.LogRecord("", 0, "", 0, "", (), None))) | {"message", "asctime"}


class JSONFormatter(logging.Formatter):
    """
    Formatter untuk menghasilkan log dalam format JSON
    """
    def format(self, record: logging.LogRecord) -> str:
        log_data = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        # Konteks dari LogContext
        context = getattr(record, "context", None)
        if context:
            log_data.update(context)

        # Field dari logger.info(..., extra={...})
        for key, value in record.__dict__.items():
            if key not in _RESERVED and key != "context":
                log_data[key] = value

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


def setup_logging(
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    max_bytes: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5
) -> None:
    """
    Mengatur konfigurasi logging
    """
    # Buat direktori log jika belum ada
    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            Path(log_dir).mkdir(parents=True, exist_ok=True)

    numeric_level = getattr(logging, log_level.upper(), logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    # Console ke stderr, stdout dipakai untuk tabel hasil
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.addFilter(ContextFilter())
    console_handler.setFormatter(logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    ))
    root_logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=max_bytes,
            backupCount=backup_count
        )
        file_handler.addFilter(ContextFilter())
        file_handler.setFormatter(JSONFormatter())
        root_logger.addHandler(file_handler)

    # Logging untuk library pihak ketiga
    for noisy in ("uvicorn", "matplotlib", "joblib"):
        logging.getLogger(noisy).setLevel(logging.WARNING)


# Konteks log aktif, terpisah per thread dan per task asyncio
_log_context: ContextVar[Dict[str, Any]] = ContextVar("perfectsim_log_context", default={})


class ContextFilter(logging.Filter):
    """
    Menempelkan konteks LogContext yang aktif ke setiap record
    """
    def filter(self, record: logging.LogRecord) -> bool:
        context = _log_context.get()
        if context:
            merged = dict(getattr(record, "context", None) or {})
            merged.update(context)
            record.context = merged
        return True


class LogContext:
    """
    Context manager untuk menambahkan konteks ke log
    """
    def __init__(self, logger: logging.Logger, **kwargs):
        self.logger = logger
        self.fields = kwargs
        self._token: Optional[Token] = None

    def __enter__(self) -> logging.Logger:
        self._token = _log_context.set({**_log_context.get(), **self.fields})
        return self.logger

    def __exit__(self, exc_type, exc_val, exc_tb):
        _log_context.reset(self._token)
        self._token = None


def current_context() -> Dict[str, Any]:
    return dict(_log_context.get())


def logging_configured() -> bool:
    """
    True jika root logger sudah punya handler dari setup_logging
    """
    return any(
        any(isinstance(f, ContextFilter) for f in handler.filters)
        for handler in logging.getLogger().handlers
    )


def get_logger(name: str) -> logging.Logger:
    """
    Mendapatkan logger dengan nama tertentu
    """
    return logging.getLogger(name)
