"""Shared fixtures: the golden measurement scenario and a config without adapters."""

from pathlib import Path

import pytest

from backend.iqb.config import EXAMPLE_THRESHOLDS_PATH
from backend.iqb.ingest import FixtureEntry, FixtureScenario, Outcome, generate_fixture, write_measurements_csv
from backend.iqb.model import CANONICAL_DATASETS, MetricKind, load_config

SEED = 20250101

# metric -> (min_value, max_value, threshold, outcome)
# Latency 25-45 ms misses only the gaming high-level threshold (20 ms).
GOLDEN_RANGES = {
    MetricKind.download_throughput: (60.0, 400.0, 50.0, Outcome.passes),
    MetricKind.upload_throughput: (60.0, 200.0, 50.0, Outcome.passes),
    MetricKind.latency: (25.0, 45.0, 20.0, Outcome.fails),
    MetricKind.packet_loss: (0.0, 0.0005, 0.001, Outcome.passes),
}
ALL_PASS_RANGES = GOLDEN_RANGES | {MetricKind.latency: (5.0, 18.0, 20.0, Outcome.passes)}

# S_gaming = 12/17, the other five use cases score 1
GOLDEN_S_IQB = 97 / 102

TEST_DATASETS = """
datasets:
  - {id: ndt, granularity: per_test}
  - {id: ookla, granularity: pre_aggregated}
  - {id: cloudflare, granularity: per_test}
"""


def build_scenario(ranges=GOLDEN_RANGES, regions=("region-a",), sample_count: int = 40) -> FixtureScenario:
    return FixtureScenario(entries=[
        FixtureEntry(
            region_id=region,
            dataset=dataset,
            metric=metric,
            sample_count=sample_count,
            threshold=threshold,
            outcome=outcome,
            min_value=lo,
            max_value=hi,
        )
        for region in regions
        for dataset in CANONICAL_DATASETS
        for metric, (lo, hi, threshold, outcome) in ranges.items()
    ])


@pytest.fixture
def config_text() -> str:
    return EXAMPLE_THRESHOLDS_PATH.read_text(encoding="utf-8") + TEST_DATASETS


@pytest.fixture
def config_path(tmp_path: Path, config_text: str) -> Path:
    path = tmp_path / "iqb.yaml"
    path.write_text(config_text, encoding="utf-8")
    return path


@pytest.fixture
def config(config_path: Path):
    return load_config(config_path)


@pytest.fixture
def golden_records():
    return generate_fixture(SEED, build_scenario())


@pytest.fixture
def all_pass_records():
    return generate_fixture(SEED, build_scenario(ALL_PASS_RANGES))


@pytest.fixture
def golden_csv(tmp_path: Path, golden_records) -> Path:
    path = tmp_path / "golden.csv"
    write_measurements_csv(golden_records, path)
    return path


@pytest.fixture
def all_pass_csv(tmp_path: Path, all_pass_records) -> Path:
    path = tmp_path / "all_pass.csv"
    write_measurements_csv(all_pass_records, path)
    return path
