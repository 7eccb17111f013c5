//! Multithreaded drivers over the core's shard and grid primitives.

use coherent_rx::montecarlo::simulate_shard;
use coherent_rx::{BinaryEnsemble, ChannelPlan, ErrorReport, SimConfig};
use rayon::prelude::*;

/// Runs each shard of `cfg` on the rayon pool. The tally, and so the report,
/// is identical to the sequential [`coherent_rx::simulate`] for any shard count.
pub fn simulate_parallel(
    plan: &ChannelPlan,
    e: &BinaryEnsemble,
    cfg: &SimConfig,
) -> coherent_rx::Result<ErrorReport> {
    cfg.validate()?;
    let ranges: Vec<_> = cfg.shard_ranges().collect();
    let errors = ranges
        .into_par_iter()
        .map(|r| simulate_shard(plan, e, cfg.seed, r))
        .collect::<coherent_rx::Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(ErrorReport::from_tally(errors, cfg.trials, cfg.seed))
}

/// Maps `f` over `grid` in parallel, keeping grid order in the output.
pub fn par_map_grid<T, F>(grid: &[f64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(f64) -> T + Sync + Send,
{
    grid.par_iter().map(|&x| f(x)).collect()
}
