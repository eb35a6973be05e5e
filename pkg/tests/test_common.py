"""Tests for LogLevel, Logger, Cache and the error hierarchy."""

import pytest

from ipflab.common import AliasingError, Cache, ConfigError, IpfLabError, Logger, LogLevel, ModelEvaluationError, NotFactorizableError


@pytest.mark.parametrize(
    "value, expected",
    [
        ("ERROR", LogLevel.ERROR),
        ("wArn", LogLevel.WARN),
        ("info", LogLevel.INFO),
        (" Debug ", LogLevel.DEBUG),
        ("0", LogLevel.ERROR),
        ("3", LogLevel.DEBUG),
    ],
)
def test_log_level_from_name_or_number(value: str, expected: LogLevel) -> None:
    assert LogLevel.from_name_or_number(value) is expected


@pytest.mark.parametrize("value", ["", "NOPE", "4", "-1", "infoo"])
def test_log_level_invalid(value: str) -> None:
    with pytest.raises(ValueError, match="Invalid log level"):
        LogLevel.from_name_or_number(value)


def test_verbose_respects_level(capsys: pytest.CaptureFixture[str]) -> None:
    """Messages above the configured level are suppressed."""
    logger = Logger(LogLevel.WARN)
    logger.verbose(LogLevel.WARN, "shown")
    logger.verbose(LogLevel.INFO, "hidden")
    out = capsys.readouterr().out
    assert "[WARN] shown" in out
    assert "hidden" not in out


def test_findings_headline_and_evidence(capsys: pytest.CaptureFixture[str]) -> None:
    """First finding per task is the headline, the rest shows up as a tree at debug level only."""
    logger = Logger(LogLevel.INFO)
    logger.add_finding(LogLevel.INFO, "conditions", "MR HOLDS", debug="min det 1")
    logger.add_finding(LogLevel.DEBUG, "conditions", "rule text")
    logger.print_findings()
    out = capsys.readouterr().out
    assert "conditions" in out and "MR HOLDS" in out
    assert "min det 1" not in out
    assert "rule text" not in out

    debug_logger = Logger(LogLevel.DEBUG)
    debug_logger.add_finding(LogLevel.INFO, "conditions", "MR HOLDS", debug="min det 1")
    debug_logger.add_finding(LogLevel.DEBUG, "conditions", "rule text")
    debug_logger.add_finding(LogLevel.INFO, "angles", "dims [1, 1]")
    debug_logger.print_findings()
    out = capsys.readouterr().out
    assert "MR HOLDS (min det 1)" in out
    assert "└── rule text" in out
    assert "angles" in out


def test_print_findings_without_findings(capsys: pytest.CaptureFixture[str]) -> None:
    Logger(LogLevel.DEBUG).print_findings()
    assert capsys.readouterr().out == ""


def test_cache_computes_once() -> None:
    calls: list[str] = []
    cache: Cache[str, int] = Cache()

    def factory(key: str) -> int:
        calls.append(key)
        return len(key)

    assert cache.compute_if_absent("abc", factory) == 3
    assert cache.compute_if_absent("abc", factory) == 3
    assert cache.compute_if_absent("de", factory) == 2
    assert calls == ["abc", "de"]


def test_cache_does_not_store_failures() -> None:
    cache: Cache[str, int] = Cache()

    def failing(key: str) -> int:
        raise NotFactorizableError(key)

    with pytest.raises(NotFactorizableError):
        cache.compute_if_absent("h", failing)
    assert cache.compute_if_absent("h", lambda key: 1) == 1


def test_error_codes_and_hierarchy() -> None:
    assert issubclass(AliasingError, ValueError) and issubclass(AliasingError, IpfLabError)
    assert AliasingError.code == "ALIASING"
    assert NotFactorizableError.code == "NOT_FACTORIZABLE"
    e = ModelEvaluationError("Spectral density is not finite", 7)
    assert e.node_index == 7
    assert "node index 7" in str(e)


def test_config_error_lists_diagnostics() -> None:
    e = ConfigError(["a: wrong", "b: missing"])
    assert e.diagnostics == ["a: wrong", "b: missing"]
    assert "  • a: wrong" in str(e)
    assert "  • b: missing" in str(e)
