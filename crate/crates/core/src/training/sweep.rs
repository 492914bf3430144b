use crate::error::{Error, Result};
use crate::model::{PacrrConfig, PacrrParams};

use super::{train, TrainData, TrainOptions};

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Index into the grid.
    pub best_index: usize,
    pub best_config: PacrrConfig,
    pub best_params: PacrrParams<f32>,
    pub best_err20: f64,
    /// Validation ERR of every grid point, in grid order.
    pub scores: Vec<f64>,
}

/// Default hyper-parameter grid. `firstk` always uses the longest document
/// length, `kwindow` sweeps it.
pub fn default_grid(mode: &str, base: &PacrrConfig) -> Vec<PacrrConfig> {
    let lengths: &[usize] = if mode == "firstk" {
        &[768]
    } else {
        &[256, 384, 512, 640, 768]
    };
    let mut grid = Vec::new();
    for &l_d in lengths {
        for n_s in 1..=4 {
            for l_g in 2..=4 {
                grid.push(PacrrConfig {
                    l_d,
                    n_s,
                    l_g,
                    n_f: 32,
                    mode: mode.to_string(),
                    ..base.clone()
                });
            }
        }
    }
    grid
}

/// Trains every configuration and keeps the best by validation ERR; ties go
/// to the smaller model, then to the earlier grid point. Each run writes to
/// `out_dir/config_NNN` when an output directory is set.
pub fn sweep(grid: &[PacrrConfig], data: TrainData<'_>, options: &TrainOptions) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("hyper-parameter grid is empty".into()));
    }
    let mut best: Option<(usize, PacrrParams<f32>, f64)> = None;
    let mut scores = Vec::with_capacity(grid.len());
    for (i, config) in grid.iter().enumerate() {
        let opts = TrainOptions {
            out_dir: options
                .out_dir
                .as_ref()
                .map(|d| d.join(format!("config_{i:03}"))),
            ..options.clone()
        };
        log::info!("sweep point {i}: {config:?}");
        let outcome = train(config, data, &opts)?;
        let err = outcome.state.best_err20;
        scores.push(err);
        let better = match &best {
            None => true,
            Some((j, _, best_err)) => {
                err > *best_err || (err == *best_err && config.param_count() < grid[*j].param_count())
            }
        };
        if better {
            best = Some((i, outcome.best_params, err));
        }
    }
    let (best_index, best_params, best_err20) = best.expect("grid is non-empty");
    Ok(SweepOutcome {
        best_index,
        best_config: grid[best_index].clone(),
        best_params,
        best_err20,
        scores,
    })
}
