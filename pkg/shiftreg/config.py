import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

load_dotenv()

logger = logging.getLogger(__name__)

# BLAS/OpenMP read these once, at numpy import time
THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


class Settings(BaseModel):
    """Runtime settings, read from SHIFTREG_* environment variables.

    -'num_threads': cap on dense-kernel threads, None leaves the BLAS default.
    -'log_level': level the CLI configures logging with.
    -'sweep_workers': threads used to evaluate sweep rows.
    """
    num_threads: Optional[int] = Field(None, ge=1, description="Thread cap for dense kernels")
    log_level: str = Field("WARNING", description="Logging level name")
    sweep_workers: int = Field(1, ge=1, le=64, description="Row-level workers in sweeps")

    @field_validator("log_level")
    @classmethod
    def normalise_log_level(cls, v: str) -> str:
        value = str(v).strip().upper()
        if value not in LOG_LEVELS:
            allowed_str = ", ".join(sorted(LOG_LEVELS))
            raise ValueError(f"log level must be one of: {allowed_str}")
        return value


def _thread_cap_from_env() -> Optional[int]:
    raw_threads = os.getenv("SHIFTREG_NUM_THREADS")
    return int(raw_threads) if raw_threads else None


def get_settings() -> Settings:
    """Build Settings from the current environment."""
    return Settings(
        num_threads=_thread_cap_from_env(),
        log_level=os.getenv("SHIFTREG_LOG_LEVEL", "WARNING"),
        sweep_workers=int(os.getenv("SHIFTREG_SWEEP_WORKERS", "1")),
    )


def apply_thread_cap(settings: Settings | None = None) -> None:
    """Export the thread cap to the BLAS environment variables if not already set.

    A malformed SHIFTREG_NUM_THREADS is logged and skipped here; the CLI rejects it
    when it builds the full Settings.
    """
    if settings is None:
        try:
            settings = Settings(num_threads=_thread_cap_from_env())
        except (ValueError, ValidationError) as exc:
            logger.warning("ignoring SHIFTREG_NUM_THREADS=%r: %s", os.getenv("SHIFTREG_NUM_THREADS"), exc)
            return
    if settings.num_threads is None:
        return
    for name in THREAD_ENV_VARS:
        os.environ.setdefault(name, str(settings.num_threads))
