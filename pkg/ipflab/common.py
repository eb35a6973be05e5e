#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

import sys
import threading
from collections import defaultdict
from enum import IntEnum
from types import SimpleNamespace
from typing import Callable, Generic, Optional, TextIO, TypeVar

import numpy as np
import numpy.typing as npt


VERSION: str = "dev-0.1.0"


class IpfLabError(Exception):
    code: str = "IPFLAB_ERROR"


class ModelEvaluationError(IpfLabError):
    code = "MODEL_EVALUATION"

    def __init__(self, message: str, node_index: int) -> None:
        super().__init__(f"{message} (node index {node_index})")
        self.node_index = node_index


class AliasingError(IpfLabError, ValueError):
    code = "ALIASING"


class NotFactorizableError(IpfLabError):
    code = "NOT_FACTORIZABLE"


class SingularGramError(IpfLabError):
    code = "SINGULAR_GRAM"


class ConfigError(IpfLabError, ValueError):
    code = "SCHEMA"

    def __init__(self, diagnostics: list[str]) -> None:
        super().__init__("Invalid configuration:\n" + "\n".join(f"  • {d}" for d in diagnostics))
        self.diagnostics = diagnostics


class SingularFactorError(IpfLabError):
    code = "SINGULAR_FACTOR"


class TaskFailedError(IpfLabError):
    code = "PARTIAL_FAILURE"


class ConcurrencyError(IpfLabError):
    code = "CONCURRENCY"


class IntegrityCheckFailedError(IpfLabError):
    code = "INTEGRITY"


ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]


class ConfigNamespace(SimpleNamespace):
    pass


K = TypeVar("K")
T = TypeVar("T")


class Cache(Generic[K, T]):
    def __init__(self) -> None:
        self._cache: dict[K, T] = {}
        self._lock = threading.Lock()

    def compute_if_absent(self, key: K, factory: Callable[[K], T]) -> T:
        # Factories may be slow (order-4096 factorizations), so concurrent callers of one key wait for the first
        with self._lock:
            if key not in self._cache:
                self._cache[key] = factory(key)
            return self._cache[key]


class LogLevel(IntEnum):
    ERROR = 0
    WARN = 1
    INFO = 2
    DEBUG = 3

    @classmethod
    def from_name_or_number(cls, prefix: str) -> "LogLevel":
        match = next((m for m in cls if m.name == prefix.upper().strip()), None)
        if match is not None:
            return match
        try:
            return cls(int(prefix.upper().strip()))
        except ValueError:
            raise ValueError("Invalid log level: " + prefix)


class Logger:
    _level: LogLevel
    _findings: dict[str, list[tuple[str, Optional[str]]]]

    def __init__(self, level: LogLevel = LogLevel.ERROR) -> None:
        self._level = level
        self._findings = defaultdict(list)

    def has_log_level(self, level: LogLevel) -> bool:
        return int(level) <= int(self._level)

    def _raw_verbose(self, level: LogLevel, message: str, file: Optional[TextIO] = None, prefix: str = "") -> None:
        if file is None:
            file = sys.stdout
        print(f"[{prefix or LogLevel(level).name}] {message}", file=file)

    def verbose(self, level: LogLevel, message: str, file: Optional[TextIO] = None, prefix: str = "") -> None:
        if self.has_log_level(level):
            self._raw_verbose(level, message, file, prefix)

    def add_finding(self, level: LogLevel, task: str, message: str, debug: Optional[str] = None) -> None:
        # First finding of a task is its headline, the rest is evidence (shown at debug level only)
        if self.has_log_level(LogLevel.DEBUG):
            self._findings[task].append((message, debug))
        elif self.has_log_level(level):
            self._findings[task].append((message, None))

    def _format_finding(self, finding: tuple[str, Optional[str]]) -> str:
        message, debug = finding
        return message + (f" ({debug})" if debug is not None else "")

    def print_findings(self) -> None:
        if not self._findings:
            return
        longest_task_name_length = max(len(t) for t in self._findings) + 1
        for task, findings in self._findings.items():
            if not findings:
                continue
            self._raw_verbose(LogLevel.INFO, f"{task:<{longest_task_name_length}}: {self._format_finding(findings[0])}")
            if not self.has_log_level(LogLevel.DEBUG):
                continue
            for finding in findings[1:]:
                self._raw_verbose(LogLevel.DEBUG, f"{' ' * (longest_task_name_length + 2)}└── {self._format_finding(finding)}")
