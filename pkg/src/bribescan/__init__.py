"""Chain forensics: detect payments to block miners, trace their funding,
and turn them into daily activity scores and regressions."""

from .analytics import (
    FrequencyRow,
    Panel,
    PanelRow,
    RegressionResult,
    ValueStats,
    build_panel,
    describe_values,
    frequency_table,
    ols,
    run_regression_suite,
)
from .chain_model import (
    BlockRecord,
    TxRecord,
    block_date,
    parse_address,
    wei_to_eth,
)
from .detection import (
    BlockDetection,
    BribeCandidate,
    DetectionParams,
    FollowupTx,
    detect,
    filter_min_value,
    self_payment_flags,
)
from .ingestion import (
    ChainStore,
    ValidationReport,
    fetch_rpc,
    import_files,
    validate_store,
)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .proxies import (
    BlockProxies,
    DailyProxies,
    ProxyParams,
    aggregate_daily,
    compute_block_proxies,
    describe_proxies,
    proxy_benchmark,
    proxy_bribing,
    trace_link_weight,
)
from .tracing import BlockTrace, TraceLink, TraceParams, trace

__version__ = "0.1.0"

__all__ = [
    "BlockDetection",
    "BlockProxies",
    "BlockRecord",
    "BlockTrace",
    "BribeCandidate",
    "ChainStore",
    "DailyProxies",
    "DetectionParams",
    "FollowupTx",
    "FrequencyRow",
    "Panel",
    "PanelRow",
    "PipelineConfig",
    "PipelineResult",
    "ProxyParams",
    "RegressionResult",
    "TraceLink",
    "TraceParams",
    "TxRecord",
    "ValidationReport",
    "ValueStats",
    "aggregate_daily",
    "block_date",
    "build_panel",
    "compute_block_proxies",
    "describe_proxies",
    "describe_values",
    "detect",
    "fetch_rpc",
    "filter_min_value",
    "frequency_table",
    "import_files",
    "ols",
    "parse_address",
    "proxy_benchmark",
    "proxy_bribing",
    "run_pipeline",
    "run_regression_suite",
    "self_payment_flags",
    "trace",
    "trace_link_weight",
    "validate_store",
    "wei_to_eth",
]
