# Dataset export adapters and synthetic fixtures
from .adapters import (
    AdapterSpec,
    RowReject,
    canonical_spec,
    detect_granularity,
    filter_window,
    load_adapter_spec,
    parse_per_test,
    parse_pre_aggregated,
    read_table,
    write_measurements_csv,
    write_rejects_csv,
)
from .fixtures import FixtureEntry, FixtureScenario, Outcome, generate_fixture
