//! Monte Carlo sampling per floor, mergeable accumulators and hierarchical
//! aggregation over AGS prefixes.

mod accumulator;
mod exact_sum;
mod hierarchy;
pub mod output;
mod pipeline;
mod sampling;

pub use accumulator::{
    AggregateAccumulator, AggregateStats, Exceedance, HistogramSpec, Outcome, PercentileValue, Suppressed,
    SummarySpec, DEFAULT_PERCENTILES, DEFAULT_THRESHOLDS, SUPPRESSED_REASON,
};
pub use exact_sum::ExactSum;
pub use hierarchy::{aggregate_levels, LevelAccumulators};
pub use pipeline::{
    aggregate_shards, prepare_stock, run_pipeline, run_scenarios, sample_stock, write_level_outputs, McSettings,
    PipelineInputs, RunReport, SampledStock, ScenarioRow, RUN_REPORT, SHARD_DIR, SUPPRESSED_FILE,
};
pub use sampling::{floor_stream, process_chunk, sample_size, ChunkDiagnostics, ChunkOutput, FitRow, SamplingConfig, ShardBlock};
