use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_on_library, ExperimentReport, ExperimentRun};
use crate::error::{Error, Result};
use crate::spectra::Library;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub seed: u64,
    /// One report per budget, in the order the budgets were given.
    pub runs: Vec<ExperimentReport>,
}

impl SweepReport {
    pub fn without_timings(&self) -> Self {
        Self {
            runs: self.runs.iter().map(ExperimentReport::without_timings).collect(),
            ..self.clone()
        }
    }

    /// `(budget, accuracy, earliest epoch reaching the target)` per run.
    pub fn summary(&self) -> Vec<(u64, f64, Option<usize>)> {
        self.runs
            .iter()
            .map(|r| (r.budget, r.accuracy, r.reached_target_at))
            .collect()
    }
}

/// One run per budget with everything else, seeds included, held fixed.
/// Up to `jobs` runs execute concurrently; results do not depend on `jobs`.
pub fn count_rate_sweep(
    config: &ExperimentConfig,
    library: &Library,
    budgets: &[u64],
    jobs: usize,
) -> Result<(SweepReport, Vec<ExperimentRun>)> {
    if budgets.len() < 2 {
        return Err(Error::Config(format!(
            "a sweep needs at least two budgets, got {}",
            budgets.len()
        )));
    }
    config.validate()?;
    let configs: Vec<ExperimentConfig> = budgets
        .iter()
        .map(|&budget| ExperimentConfig {
            name: format!("{}-k{budget}", config.name),
            budget,
            ..config.clone()
        })
        .collect();

    let results: Vec<Mutex<Option<Result<ExperimentRun>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= configs.len() {
            break;
        }
        let run = run_on_library(&configs[i], library);
        *results[i].lock().expect("sweep worker panicked") = Some(run);
    };
    let workers = jobs.clamp(1, configs.len());
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let runs = results
        .into_iter()
        .map(|m| m.into_inner().expect("sweep worker panicked").expect("every budget ran"))
        .collect::<Result<Vec<_>>>()?;
    let report = SweepReport {
        name: config.name.clone(),
        seed: config.seed,
        runs: runs.iter().map(|r| r.report.clone()).collect(),
    };
    Ok((report, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cam::DiscardRanges;
    use crate::experiments::config::{LibrarySource, ModelSpec};
    use std::path::Path;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            library: LibrarySource::NearIdentical {
                species: 2,
                channels: 128,
                intensity: 1e6,
                seed: 2,
                family: "Al".into(),
            },
            model: ModelSpec {
                blocks: 1,
                filters: 2,
                kernel_size: 3,
                layers: None,
            },
            epochs: 2,
            pool_size: 256,
            discard: DiscardRanges::default(),
            ..Default::default()
        }
    }

    #[test]
    fn needs_two_budgets() {
        let c = config();
        let lib = c.library.load(Path::new(".")).unwrap();
        assert!(matches!(count_rate_sweep(&c, &lib, &[1000], 1), Err(Error::Config(_))));
    }

    #[test]
    fn repeated_budgets_give_identical_runs_for_any_job_count() {
        let c = config();
        let lib = c.library.load(Path::new(".")).unwrap();
        let (a, _) = count_rate_sweep(&c, &lib, &[1000, 1000, 5000], 1).unwrap();
        let (b, _) = count_rate_sweep(&c, &lib, &[1000, 1000, 5000], 3).unwrap();
        let (a, b) = (a.without_timings(), b.without_timings());
        assert_eq!(a, b);
        assert_eq!(a.runs[0].loss_curve, a.runs[1].loss_curve);
        assert_ne!(a.runs[0].loss_curve, a.runs[2].loss_curve);
        assert_eq!(a.summary().len(), 3);
    }
}
