"""Opportunistic transmission scheduling for vehicular sensor uplinks.

The package simulates buffered sensor uploads over cellular channel traces.
Transfers are timed by a probabilistic channel-aware scheme driven by passive
link-quality indicators (single metrics, generic multi-metric combinations,
or a learned data-rate predictor) and evaluated against a periodic baseline
in terms of goodput, data age and deadline miss ratio.
"""

from .metrics import (
    CombinerConfig,
    MetricDefinition,
    TimingConfig,
    bernoulli_decide,
    combine_optimistic,
    combine_pessimistic,
    combine_weighted_mean,
    default_metric_definitions,
    export_analytic_curve,
    normalize_theta,
    transmission_probability,
)
from .predictor import (
    EvalMetrics,
    FeatureVector,
    LabeledSample,
    LinearModel,
    ModelTree,
    cross_validate,
    eval_metrics,
    load_dataset,
    load_model,
    predict,
    save_model,
    train_linear,
    train_model_tree,
)
from .reporting import (
    BinnedSeries,
    DmrTable,
    PacketLog,
    SummaryStats,
    TransferLog,
    binned_correlation,
    dmr_table,
    export_csv,
    load_run_log,
    summarize,
)
from .simulator import (
    PolicyConfig,
    RunReport,
    SensorConfig,
    TransmissionRecord,
    compute_dmr,
    effective_goodput,
    run_simulation,
    sweep,
)
from .trace import (
    HIGHWAY,
    PROFILES,
    SUBURBAN,
    ChannelSample,
    ChannelTrace,
    TrackProfile,
    generate_synthetic_trace,
    latent_capacity,
    parse_trace_csv,
    sample_at,
    write_trace_csv,
)

__version__ = "0.1.0"
