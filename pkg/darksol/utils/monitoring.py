"""
Monitoring utilities for the dark-soliton lab.

This module provides logging setup and solver metrics collection.
"""

import logging
import logging.handlers
from pathlib import Path
from typing import Dict, Optional

import structlog
from prometheus_client import CollectorRegistry, Counter
from rich.console import Console
from rich.logging import RichHandler

from darksol.config.settings import get_settings

console = Console(stderr=True)

# Solver counters live in a private registry so that importing the package
# never touches the process-global prometheus registry.
registry = CollectorRegistry(auto_describe=True)

profile_builds = Counter(
    'darksol_profile_builds_total',
    'Traveling-wave profiles integrated',
    ['status'],
    registry=registry,
)

rk4_steps = Counter(
    'darksol_rk4_steps_total',
    'RK4 time steps taken',
    registry=registry,
)

newton_iterations = Counter(
    'darksol_newton_iterations_total',
    'Newton iterations of the chain decomposition',
    ['outcome'],
    registry=registry,
)

eigen_solves = Counter(
    'darksol_eigen_solves_total',
    'Eigenvalue problems solved',
    ['method'],
    registry=registry,
)

checks = Counter(
    'darksol_checks_total',
    'Verification checks evaluated',
    ['check', 'verdict'],
    registry=registry,
)

_configured = False


def setup_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> None:
    """Set up logging configuration.

    Safe to call more than once; later calls only adjust the level.
    """
    global _configured
    cfg = get_settings().logging
    level_name = (level or cfg.level).upper()
    renderer_name = fmt or cfg.format

    if _configured:
        logging.getLogger().setLevel(getattr(logging, level_name))
        return

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer() if renderer_name == "json" else structlog.dev.ConsoleRenderer(colors=False),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    handlers: list[logging.Handler] = [
        RichHandler(console=console, rich_tracebacks=True, show_path=False)
    ]
    if cfg.file:
        log_file_path = Path(cfg.file)
        log_file_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(
            logging.handlers.RotatingFileHandler(
                filename=log_file_path,
                maxBytes=_parse_size(cfg.rotation),
                backupCount=5,
            )
        )

    logging.basicConfig(
        level=getattr(logging, level_name),
        format='%(message)s',
        handlers=handlers,
    )

    _configured = True
    logging.getLogger(__name__).debug("logging configured")


def _parse_size(size_str: str) -> int:
    """Parse size string (e.g., '10MB') to bytes."""
    size_str = size_str.upper()

    if size_str.endswith('KB'):
        return int(size_str[:-2]) * 1024
    elif size_str.endswith('MB'):
        return int(size_str[:-2]) * 1024 * 1024
    elif size_str.endswith('GB'):
        return int(size_str[:-2]) * 1024 * 1024 * 1024
    else:
        return int(size_str)


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Get a structured logger instance."""
    return structlog.get_logger(name)


class MetricsCollector:
    """Utility class for collecting solver metrics."""

    @staticmethod
    def increment_profile_builds(status: str) -> None:
        profile_builds.labels(status=status).inc()

    @staticmethod
    def increment_rk4_steps(count: int = 1) -> None:
        rk4_steps.inc(count)

    @staticmethod
    def increment_newton_iterations(outcome: str, count: int = 1) -> None:
        newton_iterations.labels(outcome=outcome).inc(count)

    @staticmethod
    def increment_eigen_solves(method: str) -> None:
        eigen_solves.labels(method=method).inc()

    @staticmethod
    def record_check(check: str, passed: bool) -> None:
        checks.labels(check=check, verdict="pass" if passed else "fail").inc()

    @staticmethod
    def snapshot() -> Dict[str, float]:
        """Current counter values keyed by ``name{labels}``."""
        values: Dict[str, float] = {}
        for metric in registry.collect():
            for sample in metric.samples:
                if not sample.name.endswith("_total"):
                    continue
                labels = ",".join(f"{k}={v}" for k, v in sorted(sample.labels.items()))
                key = f"{sample.name}{{{labels}}}" if labels else sample.name
                values[key] = sample.value
        return values


# Create global metrics collector instance
metrics = MetricsCollector()
