"""
Tests for run configuration and logging setup.
"""

import io
import json
import logging
import os
import sys
from pathlib import Path
from unittest.mock import patch

import pytest

from src.config import CliConfig, DetectionConfig, check_threshold
from src.detector import build_templates, detect, prepare_sample
from src.disasm import Arch
from src.logging_config import HumanReadableFormatter, JSONFormatter, configure_logging, sample_context
from src.matcher import DEFAULT_BUDGET
from tests.conftest import function_sources


class TestDetectionConfig:
    """Tests for DetectionConfig defaults and validation."""

    def test_defaults(self):
        config = DetectionConfig(workers=1)
        assert config.mode == "threshold"
        assert config.threshold == 0.25
        assert config.granularity == "function"
        assert config.use_patterns
        assert config.budget == DEFAULT_BUDGET

    def test_environment(self):
        """Test that defaults are read from MAIL_* variables."""
        env = {"MAIL_THRESHOLD": "0.5", "MAIL_MATCH_BUDGET": "1000", "MAIL_WORKERS": "3"}
        with patch.dict(os.environ, env):
            config = DetectionConfig()
        assert (config.threshold, config.budget, config.workers) == (0.5, 1000, 3)

    def test_explicit_values_win(self):
        with patch.dict(os.environ, {"MAIL_THRESHOLD": "0.5"}):
            assert DetectionConfig(threshold=0.75, workers=1).threshold == 0.75

    @pytest.mark.parametrize("kwargs,message", [
        ({"mode": "fuzzy"}, "detection mode"),
        ({"granularity": "block"}, "granularity"),
        ({"threshold": 0.0}, "Threshold"),
        ({"threshold": 1.01}, "Threshold"),
        ({"budget": 0}, "budget"),
        ({"workers": 0}, "Worker count"),
    ])
    def test_invalid(self, kwargs, message):
        with pytest.raises(ValueError, match=message):
            DetectionConfig(**{"workers": 1, **kwargs})

    def test_threshold_bounds(self):
        assert check_threshold(1.0) == 1.0
        assert check_threshold(0.01) == 0.01
        with pytest.raises(ValueError):
            check_threshold(-0.5)


class TestCliConfig:
    """Tests for CliConfig."""

    def test_store_from_environment(self):
        with patch.dict(os.environ, {"MAIL_TEMPLATE_STORE": "/data/store"}):
            config = CliConfig(command="detect", workers=1)
        assert config.store == Path("/data/store")

    def test_no_store_by_default(self):
        assert CliConfig(command="detect", workers=1).store is None

    def test_arch_string(self):
        assert CliConfig(command="translate", arch="ARM", workers=1).arch == Arch.ARM

    def test_detection(self):
        config = CliConfig(command="detect", threshold=0.4, use_patterns=False, workers=2, budget=50)
        detection = config.detection(mode="exact", granularity="program")
        assert detection == DetectionConfig(
            mode="exact", threshold=0.4, granularity="program", use_patterns=False, budget=50, workers=2,
        )

    def test_folds_only_checked_for_xval(self):
        assert CliConfig(command="detect", folds=1, workers=1).folds == 1
        with pytest.raises(ValueError, match="at least 2 folds"):
            CliConfig(command="xval", folds=1, workers=1)

    @pytest.mark.parametrize("kwargs,message", [
        ({"seed": -1}, "64-bit"),
        ({"seed": 2 ** 64}, "64-bit"),
        ({"train_size": -1}, "must not be negative"),
        ({"workers": 0}, "Worker count"),
        ({"threshold": 2.0}, "Threshold"),
        ({"arch": "mips"}, "Unknown architecture"),
    ])
    def test_invalid(self, kwargs, message):
        with pytest.raises(ValueError, match=message):
            CliConfig(command="xval", **{"workers": 1, **kwargs})

    def test_largest_seed(self):
        assert CliConfig(command="xval", seed=2 ** 64 - 1, workers=1).seed == 2 ** 64 - 1


@pytest.mark.usefixtures("restore_logging")
class TestLogging:
    """Tests for configure_logging and the formatters."""

    def test_json_lines(self):
        stream = io.StringIO()
        configure_logging(level="info", json_format=True, stream=stream)
        logging.getLogger("src.detector.store").info("saved", extra={"templates": 3})
        record = json.loads(stream.getvalue())
        assert record["level"] == "INFO"
        assert record["logger"] == "src.detector.store"
        assert record["message"] == "saved"
        assert record["extra"] == {"templates": 3}

    def test_human_readable(self):
        stream = io.StringIO()
        configure_logging(level="WARNING", json_format=False, stream=stream)
        logging.getLogger("src.cfg").info("hidden")
        logging.getLogger("src.cfg").warning("shown")
        out = stream.getvalue()
        assert "hidden" not in out
        assert "WARNING  src.cfg - shown" in out

    def test_environment(self):
        stream = io.StringIO()
        with patch.dict(os.environ, {"LOG_LEVEL": "DEBUG", "LOG_FORMAT": "json"}):
            configure_logging(stream=stream)
        logging.getLogger("src.matcher").debug("expanding")
        assert json.loads(stream.getvalue())["level"] == "DEBUG"

    def test_replaces_handlers(self):
        configure_logging(stream=io.StringIO())
        configure_logging(stream=io.StringIO())
        assert len(logging.getLogger().handlers) == 1

    def test_formatters_include_exceptions(self):
        try:
            raise ValueError("boom")
        except ValueError:
            record = logging.getLogger("src").makeRecord(
                "src", logging.ERROR, __file__, 1, "failed", (), sys.exc_info(),
            )
        assert "ValueError: boom" in json.loads(JSONFormatter().format(record))["exception"]
        assert "ValueError: boom" in HumanReadableFormatter().format(record)

    def test_sample_context(self):
        """Test that records inside sample_context name the sample."""
        stream = io.StringIO()
        configure_logging(level="INFO", json_format=True, stream=stream)
        log = logging.getLogger("src.detector.detect")
        with sample_context("dropper"):
            log.info("inside")
        log.info("outside")
        inside, outside = [json.loads(line) for line in stream.getvalue().splitlines()]
        assert inside["sample"] == "dropper"
        assert "extra" not in inside
        assert "sample" not in outside

    def test_sample_context_human(self):
        stream = io.StringIO()
        configure_logging(level="WARNING", json_format=False, stream=stream)
        with sample_context("dropper"):
            logging.getLogger("src.cfg").warning("odd target")
        assert "src.cfg (dropper) - odd target" in stream.getvalue()

    def test_detection_logs_carry_sample(self, mutation_text):
        text = function_sources(mutation_text)["clamp"]
        store = build_templates([("clamp", text, "x86")])
        sample = prepare_sample("suspect", text)
        stream = io.StringIO()
        configure_logging(level="INFO", json_format=True, stream=stream)
        detect(store, sample, DetectionConfig(workers=1))
        records = [json.loads(line) for line in stream.getvalue().splitlines()]
        assert records
        assert all(r["sample"] == "suspect" for r in records)
