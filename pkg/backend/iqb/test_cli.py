"""End-to-end tests for the command line: exit codes, reports and determinism."""

import io
import json
import math
from fractions import Fraction

import pandas as pd
import pytest

from backend.iqb.config import EXAMPLE_CONFIG_PATH
from backend.iqb.conftest import GOLDEN_S_IQB
from backend.iqb.ingest import write_measurements_csv
from backend.iqb.model import MeasurementRecord, MetricKind
from backend.main import main

EPOCH = "1735689600"


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("IQB_CONFIG", "IQB_WORKERS", "IQB_LOG_LEVEL", "SOURCE_DATE_EPOCH"):
        monkeypatch.delenv(name, raising=False)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# =============================================================================
# VALIDATE
# =============================================================================

def test_validate_example_config(capsys):
    assert run(capsys, "validate", "-c", EXAMPLE_CONFIG_PATH) == (0, "", "")


def test_validate_reports_bad_weight(capsys, tmp_path, config_text):
    path = tmp_path / "bad.yaml"
    path.write_text(config_text + "weights:\n  use_case_weights: {gaming: 7}\n", encoding="utf-8")
    code, out, _ = run(capsys, "validate", "-c", path)
    assert code == 1
    assert out.splitlines() == ["weights.use_case_weights.gaming: weight out of range [0,5]: 7"]


def test_validate_missing_thresholds_is_a_parse_error(capsys, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("datasets:\n  - {id: ndt, granularity: per_test}\n", encoding="utf-8")
    code, _, err = run(capsys, "validate", "-c", path)
    assert code == 2
    assert "thresholds" in err


def test_config_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("IQB_CONFIG", str(EXAMPLE_CONFIG_PATH))
    assert run(capsys, "validate")[0] == 0


def test_no_config_is_a_usage_error(capsys):
    code, _, err = run(capsys, "validate")
    assert code == 2
    assert "IQB_CONFIG" in err


def test_unknown_command_is_a_usage_error(capsys):
    assert run(capsys, "publish")[0] == 2


# =============================================================================
# AGGREGATE
# =============================================================================

def test_aggregate_matches_direct_nearest_rank(capsys, config_path, golden_csv, golden_records):
    code, out, _ = run(capsys, "aggregate", "-c", config_path, golden_csv)
    assert code == 0
    frame = pd.read_csv(io.StringIO(out), float_precision="round_trip")
    assert list(frame.columns) == ["region_id", "dataset_id", "metric", "statistic", "value", "unit", "sample_count"]
    assert len(frame) == 12
    assert list(frame.itertuples(index=False)) == sorted(frame.itertuples(index=False), key=lambda r: (r[0], r[1], r[2]))

    for row in frame.itertuples(index=False):
        metric = MetricKind(row.metric)
        values = sorted(
            (r.value for r in golden_records if r.dataset == row.dataset_id and r.metric is metric),
            reverse=metric.higher_is_better,
        )
        rank = math.ceil(Fraction(95) * len(values) / 100)
        assert row.value == values[rank - 1]
        assert row.sample_count == len(values)
        assert row.statistic == "p95_tail"


def test_aggregate_is_byte_identical(capsys, config_path, golden_csv):
    first = run(capsys, "aggregate", "-c", config_path, golden_csv)[1]
    second = run(capsys, "aggregate", "-c", config_path, golden_csv)[1]
    assert first == second


def test_aggregate_empty_window(capsys, config_path, golden_csv):
    code, out, err = run(capsys, "aggregate", "-c", config_path, golden_csv, "--window", "2030-01-01T00:00:00Z/2030-02-01T00:00:00Z")
    assert code == 1
    assert out == ""
    assert "no data" in err


def test_aggregate_writes_rejects(capsys, tmp_path, config_path):
    data = tmp_path / "in.csv"
    data.write_text(
        "region_id,dataset_id,metric,value,unit,timestamp\n"
        "us-ca,ndt,latency,12,ms,2025-01-01T00:00:00Z\n"
        "us-ca,ndt,latency,oops,ms,2025-01-01T00:00:01Z\n",
        encoding="utf-8",
    )
    rejects = tmp_path / "rejects.csv"
    out = tmp_path / "agg.csv"
    assert run(capsys, "aggregate", "-c", config_path, data, "--rejects", rejects, "--out", out)[0] == 0
    assert rejects.read_text(encoding="utf-8") == "row_number,reason\n2,value is not a number: 'oops'\n"
    assert "us-ca,ndt,latency,p95_tail,12.0,ms,1\n" in out.read_text(encoding="utf-8")


def test_pre_aggregated_input_for_declared_dataset(capsys, tmp_path, config_path):
    data = tmp_path / "ookla.csv"
    data.write_text(
        "region_id,dataset_id,metric,statistic,value,unit,sample_count\n"
        "us-ca,ookla,download_throughput,p95,120000,kbps,900\n",
        encoding="utf-8",
    )
    code, out, _ = run(capsys, "aggregate", "-c", config_path, f"ookla={data}")
    assert code == 0
    assert out.splitlines()[1] == "us-ca,ookla,download_throughput,p95,120.0,Mbps,900"


def test_undeclared_dataset_input_is_a_usage_error(capsys, config_path, golden_csv):
    assert run(capsys, "aggregate", "-c", config_path, f"mlab={golden_csv}")[0] == 2


def test_window_reports_dropped_count(capsys, config_path, golden_csv):
    # Twelve fixture series of 40 samples, one minute apart; the first ten of each fall before the window
    code, out, err = run(capsys, "score", "-c", config_path, golden_csv, "--window", "2025-01-01T00:10:00Z/")
    assert code == 0
    assert "120 records outside --window dropped" in err
    (report,) = json.loads(out)
    assert report["manifest"]["parameters"]["dropped"] == "120"
    assert report["manifest"]["parameters"]["window"] == "2025-01-01T00:10:00+00:00/"


def test_invalid_config_blocks_aggregation(capsys, tmp_path, config_text, golden_csv):
    path = tmp_path / "bad.yaml"
    path.write_text(config_text + "weights:\n  use_case_weights: {gaming: 9}\n", encoding="utf-8")
    code, out, err = run(capsys, "aggregate", "-c", path, golden_csv)
    assert code == 1
    assert out == ""
    assert "weight out of range" in err


def test_ragged_line_is_rejected_not_fatal(capsys, tmp_path, config_path):
    data = tmp_path / "in.csv"
    data.write_text(
        "region_id,dataset_id,metric,value,unit,timestamp\n"
        "us-ca,ndt,latency,12,ms,2025-01-01T00:00:00Z\n"
        "us-ca,ndt,latency,13,ms,2025-01-01T00:00:01Z,extra\n"
        "us-ca,ndt,latency,14,ms,2025-01-01T00:00:02Z\n",
        encoding="utf-8",
    )
    rejects = tmp_path / "rejects.csv"
    code, out, _ = run(capsys, "aggregate", "-c", config_path, data, "--rejects", rejects)
    assert code == 0
    assert "us-ca,ndt,latency,p95_tail,14.0,ms,2\n" in out
    assert rejects.read_text(encoding="utf-8") == "row_number,reason\n2,\"expected 6 fields, found 7\"\n"


# =============================================================================
# SCORE
# =============================================================================

def test_score_golden_fixture(capsys, config_path, golden_csv):
    code, out, _ = run(capsys, "score", "-c", config_path, golden_csv)
    assert code == 0
    (report,) = json.loads(out)
    assert report["region_id"] == "region-a"
    assert report["quality_level"] == "high"
    assert report["s_iqb"] == round(GOLDEN_S_IQB, 6) == 0.95098
    assert [u["use_case"] for u in report["use_cases"]] == sorted(u["use_case"] for u in report["use_cases"])

    gaming = next(u for u in report["use_cases"] if u["use_case"] == "gaming")
    assert gaming["score"] == round(12 / 17, 6)
    latency = next(r for r in gaming["requirements"] if r["metric"] == "latency")
    assert [d["binary_score"] for d in latency["datasets"]] == [0, 0, 0]
    assert [d["dataset"] for d in latency["datasets"]] == ["cloudflare", "ndt", "ookla"]

    assert report["manifest"]["tool_version"] == "0.1.0"
    assert len(report["manifest"]["input_digests"]) == 1


def test_score_all_pass_fixture(capsys, config_path, all_pass_csv):
    code, out, _ = run(capsys, "score", "-c", config_path, all_pass_csv)
    assert code == 0
    assert json.loads(out)[0]["s_iqb"] == 1.0


def test_minimum_level_scores_at_least_high(capsys, config_path, golden_csv):
    high = json.loads(run(capsys, "score", "-c", config_path, golden_csv)[1])[0]["s_iqb"]
    low = json.loads(run(capsys, "score", "-c", config_path, golden_csv, "--level", "min")[1])[0]
    assert low["quality_level"] == "minimum"
    assert low["s_iqb"] >= high


def test_score_is_byte_identical(capsys, monkeypatch, tmp_path, config_path, golden_csv):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", EPOCH)
    monkeypatch.setenv("IQB_WORKERS", "4")
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "score", "-c", config_path, golden_csv, "--out", first)[0] == 0
    assert run(capsys, "score", "-c", config_path, golden_csv, "--out", second)[0] == 0
    assert first.read_bytes() == second.read_bytes()
    assert json.loads(first.read_text(encoding="utf-8"))[0]["manifest"]["started_at"] == "2025-01-01T00:00:00Z"


def test_score_identical_apart_from_timestamp(capsys, config_path, golden_csv):
    first = json.loads(run(capsys, "score", "-c", config_path, golden_csv)[1])
    second = json.loads(run(capsys, "score", "-c", config_path, golden_csv)[1])
    for report in first + second:
        report["manifest"].pop("started_at")
    assert first == second


def test_score_csv_format(capsys, config_path, golden_csv):
    code, out, _ = run(capsys, "score", "-c", config_path, golden_csv, "--format", "csv")
    assert code == 0
    frame = pd.read_csv(io.StringIO(out))
    assert len(frame) == 6 * 4 * 3
    assert set(frame["s_iqb"].round(6)) == {0.95098}
    assert "s_iqb" == frame.columns[-1]


def test_unknown_region(capsys, config_path, golden_csv):
    code, out, err = run(capsys, "score", "-c", config_path, golden_csv, "--region", "atlantis")
    assert code == 1
    assert "unknown region" in err


def test_insufficient_region_still_reports_the_others(capsys, tmp_path, config_path, golden_csv):
    # region-b only has data from a dataset that carries no weight
    other = tmp_path / "other.csv"
    write_measurements_csv([
        MeasurementRecord(region_id="region-b", dataset="mlab", metric=MetricKind.latency,
                          value=10.0, timestamp="2025-01-01T00:00:00Z"),
    ], other)
    code, out, err = run(capsys, "score", "-c", config_path, golden_csv, other)
    assert code == 1
    assert [r["region_id"] for r in json.loads(out)] == ["region-a"]
    assert "region-b" in err


def test_invalid_config_blocks_scoring(capsys, tmp_path, config_text, golden_csv):
    path = tmp_path / "bad.yaml"
    path.write_text(config_text + "weights:\n  use_case_weights: {gaming: 9}\n", encoding="utf-8")
    code, out, err = run(capsys, "score", "-c", path, golden_csv)
    assert code == 1
    assert out == ""
    assert "weight out of range" in err


@pytest.mark.parametrize("flag", [["--level", "extreme"], ["--format", "xml"], ["--window", "yesterday"]])
def test_bad_flags_are_usage_errors(capsys, config_path, golden_csv, flag):
    assert run(capsys, "score", "-c", config_path, golden_csv, *flag)[0] == 2


# =============================================================================
# EXPLAIN
# =============================================================================

def explain_rows(out: str) -> list[list[str]]:
    table = out.split("\n\n")[0].splitlines()
    return [line.split() for line in table[1:]]


def test_explain_gaming_latency_contributes_nothing(capsys, config_path, golden_csv):
    code, out, _ = run(capsys, "explain", "-c", config_path, golden_csv, "--region", "region-a", "--use-case", "gaming")
    assert code == 0
    rows = explain_rows(out)
    assert len(rows) == 12
    assert {row[0] for row in rows} == {"gaming"}
    latency = [row for row in rows if row[1] == "latency"]
    assert len(latency) == 3
    assert all(row[3] == "0" and float(row[5]) == 0 for row in latency)
    # Sorted by contribution, largest first
    contributions = [float(row[5]) for row in rows]
    assert contributions == sorted(contributions, reverse=True)
    assert "s_iqb: 0.950980  (consistent)" in out


def test_explain_footer_matches_score(capsys, config_path, golden_csv):
    score = json.loads(run(capsys, "score", "-c", config_path, golden_csv)[1])[0]["s_iqb"]
    out = run(capsys, "explain", "-c", config_path, golden_csv, "--region", "region-a")[1]
    assert len(explain_rows(out)) == 6 * 4 * 3
    footer = next(line for line in out.splitlines() if line.startswith("sum of satisfied contributions"))
    assert abs(float(footer.split(":")[1]) - score) <= 1e-6


def test_explain_all_pass_footer(capsys, config_path, all_pass_csv):
    code, out, _ = run(capsys, "explain", "-c", config_path, all_pass_csv, "--region", "region-a")
    assert code == 0
    assert "sum of satisfied contributions: 1.000000" in out


def test_explain_unknown_use_case_is_a_usage_error(capsys, config_path, golden_csv):
    assert run(capsys, "explain", "-c", config_path, golden_csv, "--region", "region-a", "--use-case", "telepathy")[0] == 2


def test_explain_without_data_for_region(capsys, config_path, golden_csv):
    assert run(capsys, "explain", "-c", config_path, golden_csv, "--region", "atlantis")[0] == 1
