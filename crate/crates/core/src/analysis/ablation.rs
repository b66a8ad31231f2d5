use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::consistency::temporal_consistency;
use crate::error::{Error, Result};
use crate::sampler::{freeinit_sample, EpsModel, FreeInitConfig, FreeInitOutput};
use crate::schedule::NoiseSchedule;
use crate::spectral::{FilterFamily, FilterSpec};

pub const ABLATION_CSV_HEADER: &str = "family,d0,iterations,reuse_eps,noise_reinit,seed,class,consistency";

/// Cartesian grid of FreeInit settings. Every point runs once per seed;
/// run `k` uses class `classes[k % classes.len()]` (`None` = unconditional).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationGrid {
    pub families: Vec<FilterFamily>,
    pub d0s: Vec<f64>,
    pub iterations: Vec<usize>,
    pub reuse_eps: Vec<bool>,
    pub noise_reinit: Vec<bool>,
    pub seeds: Vec<u64>,
    pub classes: Vec<Option<usize>>,
}

impl Default for AblationGrid {
    fn default() -> Self {
        AblationGrid {
            families: vec![FilterFamily::Gaussian],
            d0s: vec![0.25],
            iterations: vec![4],
            reuse_eps: vec![true],
            noise_reinit: vec![true, false],
            seeds: (0..4).collect(),
            classes: vec![None],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub family: FilterFamily,
    pub d0: f64,
    pub iterations: usize,
    pub reuse_eps: bool,
    pub noise_reinit: bool,
}

impl AblationGrid {
    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("families", self.families.len()),
            ("d0s", self.d0s.len()),
            ("iterations", self.iterations.len()),
            ("reuse_eps", self.reuse_eps.len()),
            ("noise_reinit", self.noise_reinit.len()),
            ("seeds", self.seeds.len()),
            ("classes", self.classes.len()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, n)| *n == 0) {
            return Err(Error::param(name, "grid axis is empty"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &d0 in &self.d0s {
                for &iterations in &self.iterations {
                    for &reuse_eps in &self.reuse_eps {
                        for &noise_reinit in &self.noise_reinit {
                            out.push(GridPoint {
                                family,
                                d0,
                                iterations,
                                reuse_eps,
                                noise_reinit,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub family: FilterFamily,
    pub d0: f64,
    pub iterations: usize,
    pub reuse_eps: bool,
    pub noise_reinit: bool,
    pub seed: u64,
    /// Class index, empty for unconditional runs.
    pub class: Option<usize>,
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationSummary {
    #[serde(flatten)]
    pub point: GridPoint,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    pub summary: Vec<AblationSummary>,
}

impl AblationTable {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_rows_csv(&self.rows, out)
    }
}

/// Writes serializable rows with a header line; flushes before returning.
pub fn write_rows_csv<R: Serialize>(rows: &[R], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Population mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Temporal consistency of every pass of a FreeInit run.
pub fn iteration_consistency(out: &FreeInitOutput) -> Result<Vec<f64>> {
    out.iterations.iter().map(temporal_consistency).collect()
}

/// Worker pool capped by `FREEINIT_THREADS` (default: all cores).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("FREEINIT_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("FREEINIT_THREADS must be a positive integer, got {v:?}")))?,
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs every grid point for every seed. `base` supplies the settings the
/// grid does not vary (DDIM steps, guidance, coarse-to-fine, filter order).
/// Rows come back in grid order, seeds innermost, regardless of pool size.
pub fn ablation_run<M: EpsModel + ?Sized>(
    grid: &AblationGrid,
    base: &FreeInitConfig,
    model: &M,
    s: &NoiseSchedule,
    pool: &rayon::ThreadPool,
) -> Result<AblationTable> {
    grid.validate()?;
    let points = grid.points();
    let jobs: Vec<(GridPoint, usize)> = points
        .iter()
        .flat_map(|&p| (0..grid.seeds.len()).map(move |k| (p, k)))
        .collect();
    let rows: Vec<AblationRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, k)| {
                let seed = grid.seeds[k];
                let class = grid.classes[k % grid.classes.len()];
                let config = FreeInitConfig {
                    iterations: p.iterations,
                    filter: FilterSpec::new(p.family, p.d0, base.filter.order)?,
                    reuse_eps: p.reuse_eps,
                    noise_reinit: p.noise_reinit,
                    seed,
                    ..*base
                };
                let out = freeinit_sample(model, &config, class, s)?;
                Ok(AblationRow {
                    family: p.family,
                    d0: p.d0,
                    iterations: p.iterations,
                    reuse_eps: p.reuse_eps,
                    noise_reinit: p.noise_reinit,
                    seed,
                    class,
                    consistency: temporal_consistency(&out.final_z0)?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = points
        .iter()
        .zip(rows.chunks(grid.seeds.len()))
        .map(|(&point, chunk)| {
            let scores: Vec<f64> = chunk.iter().map(|r| r.consistency).collect();
            let (mean, std) = mean_std(&scores);
            AblationSummary {
                point,
                runs: scores.len(),
                mean,
                std,
            }
        })
        .collect();
    Ok(AblationTable { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorio::{Shape, VideoTensor};

    struct Shrink(Shape);

    impl EpsModel for Shrink {
        fn shape(&self) -> Shape {
            self.0
        }

        fn predict_eps(&self, z_t: &VideoTensor, _t: usize, _cond: Option<usize>) -> Result<VideoTensor> {
            z_t.scale(0.5)
        }
    }

    fn base() -> FreeInitConfig {
        FreeInitConfig {
            ddim_steps: 3,
            guidance_weight: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn single_point_matches_direct_run() {
        let model = Shrink(Shape::new(4, 1, 8, 8).unwrap());
        let s = NoiseSchedule::sd();
        let grid = AblationGrid {
            noise_reinit: vec![true],
            seeds: vec![7],
            iterations: vec![2],
            ..Default::default()
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let table = ablation_run(&grid, &base(), &model, &s, &pool).unwrap();
        assert_eq!(table.rows.len(), 1);
        let direct = freeinit_sample(
            &model,
            &FreeInitConfig {
                iterations: 2,
                seed: 7,
                ..base()
            },
            None,
            &s,
        )
        .unwrap();
        assert_eq!(table.rows[0].consistency, temporal_consistency(&direct.final_z0).unwrap());
        assert_eq!(table.summary[0].mean, table.rows[0].consistency);
        assert_eq!(table.summary[0].std, 0.0);
    }

    #[test]
    fn row_count_order_and_csv_header() {
        let model = Shrink(Shape::new(2, 1, 4, 4).unwrap());
        let s = NoiseSchedule::sd();
        let grid = AblationGrid {
            families: vec![FilterFamily::Gaussian, FilterFamily::Ideal],
            d0s: vec![0.25, 0.5],
            iterations: vec![1],
            noise_reinit: vec![true],
            seeds: vec![0, 1, 2],
            classes: vec![None, Some(1)],
            ..Default::default()
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let two = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let a = ablation_run(&grid, &base(), &model, &s, &one).unwrap();
        let b = ablation_run(&grid, &base(), &model, &s, &two).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 12);
        assert_eq!(a.summary.len(), 4);
        assert_eq!(a.rows[1].class, Some(1));
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), ABLATION_CSV_HEADER);
        assert!(lines.next().unwrap().starts_with("gaussian,0.25,1,true,true,0,,"));
        assert_eq!(text.lines().count(), 13);
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn empty_axis_is_rejected() {
        let grid = AblationGrid {
            seeds: vec![],
            ..Default::default()
        };
        assert!(grid.validate().is_err());
    }
}
