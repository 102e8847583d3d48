//! Inference-latency harness and report tables.

mod latency;
mod table;

pub use latency::{
    quantile, run_latency_bench, synthetic_batch, timer_tick_ns, BenchConfig, BenchContext, BenchReport, BenchRow,
    FAMILY_CNN, FAMILY_ENSEMBLE, FAMILY_LSTM, MIN_ITERATIONS, MIN_TICKS_PER_ITERATION, MIN_WARMUP,
};
pub use table::{accuracy_entry, emit_report_table, latency_entries, ReportTable, TableEntry, TableRow};
