//! Monte Carlo experiment driver: parameter sweeps, paired scheme runs over
//! identical stage-one outcomes, per-instance bound evaluation, aggregation,
//! and CSV emission.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineScheme};
use crate::batch::run_batch;
use crate::bounds::{lb_lossless, lb_lossy, ub_batch_lossless, ub_batch_lossy, ub_instant_lossless, ub_instant_lossy};
use crate::error::{Error, Result};
use crate::instant::run_instant;
use crate::model::{run_stage_one, Instance, RunOptions, RunResult, Scenario};
use crate::rng::{derive_rng, derive_seed};

/// Every runnable scheme, including the two dual-interface schedulers.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Scheme {
    NcmiBatch,
    NcmiInstant,
    Baseline(BaselineScheme),
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::NcmiBatch => "ncmi-batch",
            Scheme::NcmiInstant => "ncmi-instant",
            Scheme::Baseline(b) => b.as_str(),
        }
    }

    pub const ALL: [Scheme; 7] = [
        Scheme::NcmiBatch,
        Scheme::NcmiInstant,
        Scheme::Baseline(BaselineScheme::NoncMulti),
        Scheme::Baseline(BaselineScheme::NcsiBatchCell),
        Scheme::Baseline(BaselineScheme::NcsiBatchD2d),
        Scheme::Baseline(BaselineScheme::NcsiInstantCell),
        Scheme::Baseline(BaselineScheme::NcsiInstantD2d),
    ];
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ncmi-batch" => Ok(Scheme::NcmiBatch),
            "ncmi-instant" => Ok(Scheme::NcmiInstant),
            other => Ok(Scheme::Baseline(BaselineScheme::from_str(other)?)),
        }
    }
}

/// Runs one scheme on one scenario.
pub fn run_scheme(
    scenario: &Scenario,
    scheme: Scheme,
    lossy: bool,
    opts: &RunOptions,
) -> Result<RunResult> {
    match scheme {
        Scheme::NcmiBatch => run_batch(scenario, lossy, opts),
        Scheme::NcmiInstant => run_instant(scenario, lossy, opts),
        Scheme::Baseline(b) => run_baseline(scenario, b, lossy, opts),
    }
}

/// Runs a scheme independently on each index-contiguous subfile of the
/// universe and sums the completion times.
pub fn subfile_run(
    scenario: &Scenario,
    m_total: usize,
    subfile_size: usize,
    scheme: Scheme,
    lossy: bool,
    opts: &RunOptions,
) -> Result<u32> {
    if subfile_size == 0 || !m_total.is_multiple_of(subfile_size) {
        return Err(Error::Config(format!(
            "subfile size {subfile_size} does not divide the file size {m_total}"
        )));
    }
    let mut total = 0u32;
    for (chunk, lo) in (1..=m_total).step_by(subfile_size).enumerate() {
        let hi = lo + subfile_size - 1;
        let in_chunk = |p: usize| p >= lo && p <= hi;
        let packets: Vec<usize> = scenario.packets.iter().copied().filter(|&p| in_chunk(p)).collect();
        if packets.is_empty() {
            continue;
        }
        let sub = Scenario {
            n_devices: scenario.n_devices,
            packets,
            wants: scenario
                .wants
                .iter()
                .map(|w| w.iter().copied().filter(|&p| in_chunk(p)).collect())
                .collect(),
            eta_stage1: scenario.eta_stage1.clone(),
            eta: scenario.eta.clone(),
            eps: scenario.eps.clone(),
            coding_mode: scenario.coding_mode,
            seed: derive_seed(scenario.seed, &[chunk as u64]),
        };
        total += run_scheme(&sub, scheme, lossy, opts)?.completion_time;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "packets")]
    Packets,
    #[serde(rename = "devices")]
    Devices,
    #[serde(rename = "stage1-loss")]
    Stage1Loss,
    #[serde(rename = "subfile-size")]
    SubfileSize,
    #[serde(rename = "network-size")]
    NetworkSize,
}

impl SweepVar {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVar::Packets => "packets",
            SweepVar::Devices => "devices",
            SweepVar::Stage1Loss => "stage1-loss",
            SweepVar::SubfileSize => "subfile-size",
            SweepVar::NetworkSize => "network-size",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage2 {
    /// No loss in stage two; schedulers run their lossless variants.
    Lossless,
    /// Lossy stage two: one cellular loss per device and one D2D loss per
    /// ordered pair, drawn uniformly from these ranges each iteration. The
    /// cellular draw is reused as the stage-one loss.
    Lossy { eta: [f64; 2], eps: [f64; 2] },
}

fn default_iterations() -> u32 {
    500
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schemes: Vec<String>,
    pub sweep: SweepVar,
    pub grid: Vec<f64>,
    #[serde(default = "default_iterations")]
    pub iterations: u32,
    pub base_m: usize,
    pub base_n: usize,
    /// Uniform range for the per-device stage-one loss (lossless regime).
    pub stage1_loss: [f64; 2],
    pub stage2: Stage2,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn schemes(&self) -> Result<Vec<Scheme>> {
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes configured".into()));
        }
        self.schemes.iter().map(|s| Scheme::from_str(s)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("empty sweep grid".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        self.schemes()?;
        Ok(())
    }
}

/// Aggregated statistics for one (scheme, grid point) cell.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub scheme: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub mean_t: f64,
    pub std_t: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub mean_lb: f64,
    /// Scheduler-specific upper bound; absent for baselines.
    pub mean_ub: Option<f64>,
    pub iterations: u32,
    pub seed: u64,
    /// Sample dispersion of the per-instance bounds (not emitted in the CSV).
    #[serde(skip)]
    pub std_lb: f64,
    #[serde(skip)]
    pub std_ub: Option<f64>,
}

struct IterationOutcome {
    t: Vec<u32>,
    lb: f64,
    ub: Vec<Option<f64>>,
}

fn draw_range<R: Rng>(rng: &mut R, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.gen_range(range[0]..range[1])
    }
}

fn run_iteration(
    config: &ExperimentConfig,
    schemes: &[Scheme],
    grid_idx: usize,
    value: f64,
    iter: u32,
) -> Result<IterationOutcome> {
    let mut rng = derive_rng(config.seed, &[grid_idx as u64, iter as u64]);
    let (m_total, n) = match config.sweep {
        SweepVar::Packets => (value as usize, config.base_n),
        SweepVar::Devices | SweepVar::NetworkSize => (config.base_m, value as usize),
        SweepVar::Stage1Loss | SweepVar::SubfileSize => (config.base_m, config.base_n),
    };
    let lossy = !matches!(config.stage2, Stage2::Lossless);

    // one eta per device and one eps per ordered pair per iteration
    let eta_stage1: Vec<f64> = match (&config.stage2, config.sweep) {
        (Stage2::Lossy { eta, .. }, _) => (0..n).map(|_| draw_range(&mut rng, *eta)).collect(),
        (_, SweepVar::Stage1Loss) => vec![value; n],
        _ => (0..n).map(|_| draw_range(&mut rng, config.stage1_loss)).collect(),
    };
    let eps: Vec<Vec<f64>> = match &config.stage2 {
        Stage2::Lossless => vec![vec![0.0; n]; n],
        Stage2::Lossy { eps, .. } => (0..n)
            .map(|k| (0..n).map(|l| if l == k { 0.0 } else { draw_range(&mut rng, *eps) }).collect())
            .collect(),
    };

    let mut scenario = run_stage_one(m_total, n, &eta_stage1, &mut rng)?;
    scenario.eps = eps;
    scenario.seed = derive_seed(config.seed, &[grid_idx as u64, iter as u64, 0x7363]);

    let instance = Instance::build(&scenario)?;
    let sizes: Vec<usize> = instance.wants.iter().map(|w| w.len()).collect();
    let mc = instance.source_only.len();
    let (lb_real, lb_ceil) = if lossy {
        let b = lb_lossy(&instance);
        (b.real, b.ceiled)
    } else {
        let b = lb_lossless(&sizes, mc);
        (b.real, b.ceiled)
    };
    let (ub_batch, ub_instant) = if lossy {
        (ub_batch_lossy(&instance).bound, ub_instant_lossy(&instance).bound)
    } else {
        (ub_batch_lossless(&sizes, mc), ub_instant_lossless(&instance))
    };

    let opts = RunOptions::default();
    let mut t = Vec::with_capacity(schemes.len());
    let mut ub = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let completion = if config.sweep == SweepVar::SubfileSize {
            subfile_run(&scenario, m_total, value as usize, scheme, lossy, &opts)?
        } else {
            run_scheme(&scenario, scheme, lossy, &opts)?.completion_time
        };
        let scheme_ub = match scheme {
            Scheme::NcmiBatch => Some(ub_batch),
            Scheme::NcmiInstant => Some(ub_instant),
            Scheme::Baseline(_) => None,
        };
        // the lossless sandwich is a hard guarantee for the dual-interface
        // schedulers on whole-universe runs
        if !lossy && config.sweep != SweepVar::SubfileSize {
            if let Some(bound) = scheme_ub {
                if completion < lb_ceil || completion > bound.ceiled {
                    return Err(Error::Invariant(format!(
                        "{} completed in {completion} slots outside [{lb_ceil}, {}]",
                        scheme.as_str(),
                        bound.ceiled
                    )));
                }
            }
        }
        t.push(completion);
        ub.push(scheme_ub.map(|b| b.real));
    }
    Ok(IterationOutcome { t, lb: lb_real, ub })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Runs the configured sweep. Iterations are independent and run in
/// parallel; aggregation order is fixed by iteration index, so results do
/// not depend on the degree of parallelism.
pub fn monte_carlo(config: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    let schemes = config.schemes()?;
    let mut points = Vec::new();
    for (grid_idx, &value) in config.grid.iter().enumerate() {
        let outcomes: Vec<Result<IterationOutcome>> = (0..config.iterations)
            .into_par_iter()
            .map(|iter| run_iteration(config, &schemes, grid_idx, value, iter))
            .collect();
        let mut per_scheme_t: Vec<Vec<f64>> = vec![Vec::new(); schemes.len()];
        let mut per_scheme_ub: Vec<Vec<f64>> = vec![Vec::new(); schemes.len()];
        let mut lbs: Vec<f64> = Vec::new();
        for outcome in outcomes {
            let outcome = outcome?;
            lbs.push(outcome.lb);
            for (i, &t) in outcome.t.iter().enumerate() {
                per_scheme_t[i].push(t as f64);
                if let Some(u) = outcome.ub[i] {
                    per_scheme_ub[i].push(u);
                }
            }
        }
        let mean_lb = mean(&lbs);
        let std_lb = sample_std(&lbs, mean_lb);
        for (i, &scheme) in schemes.iter().enumerate() {
            let m = mean(&per_scheme_t[i]);
            let sd = sample_std(&per_scheme_t[i], m);
            let hw = 1.96 * sd / (per_scheme_t[i].len() as f64).sqrt();
            let (mean_ub, std_ub) = if per_scheme_ub[i].is_empty() {
                (None, None)
            } else {
                let mu = mean(&per_scheme_ub[i]);
                (Some(mu), Some(sample_std(&per_scheme_ub[i], mu)))
            };
            points.push(SweepPoint {
                scheme: scheme.as_str().to_string(),
                sweep_var: config.sweep.as_str().to_string(),
                sweep_value: value,
                mean_t: m,
                std_t: sd,
                ci95_lo: m - hw,
                ci95_hi: m + hw,
                mean_lb,
                mean_ub,
                iterations: config.iterations,
                seed: config.seed,
                std_lb,
                std_ub,
            });
        }
    }
    Ok(points)
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.6}")
    }
}

/// Writes sweep results as CSV: one row per (scheme, grid point).
pub fn emit_csv(points: &[SweepPoint], path: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Config("no results to write".into()));
    }
    let mut out = String::new();
    out.push_str(
        "scheme,sweep_var,sweep_value,mean_T,std_T,ci95_lo,ci95_hi,mean_lb,mean_ub,iterations,seed\n",
    );
    for p in points {
        let ub = p.mean_ub.map(|u| format!("{u:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            p.scheme,
            p.sweep_var,
            fmt_value(p.sweep_value),
            p.mean_t,
            p.std_t,
            p.ci95_lo,
            p.ci95_hi,
            p.mean_lb,
            ub,
            p.iterations,
            p.seed
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(schemes: &[&str], stage2: Stage2) -> ExperimentConfig {
        ExperimentConfig {
            schemes: schemes.iter().map(|s| s.to_string()).collect(),
            sweep: SweepVar::Packets,
            grid: vec![8.0, 12.0],
            iterations: 20,
            base_m: 8,
            base_n: 3,
            stage1_loss: [0.3, 0.5],
            stage2,
            seed: 99,
        }
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let config = small_config(&["ncmi-batch", "nonc-multi"], Stage2::Lossless);
        let a = monte_carlo(&config).unwrap();
        let b = monte_carlo(&config).unwrap();
        let ser_a = serde_json::to_string(&a).unwrap();
        let ser_b = serde_json::to_string(&b).unwrap();
        assert_eq!(ser_a, ser_b);
        assert_eq!(a.len(), 4, "two schemes x two grid points");
    }

    #[test]
    fn scheme_list_does_not_perturb_paired_instances() {
        // schemes at a grid point share the stage-one outcome and loss
        // draws, so adding a scheme must not change another's results
        let alone = small_config(&["ncmi-batch"], Stage2::Lossless);
        let paired = small_config(&["ncmi-batch", "ncmi-instant", "nonc-multi"], Stage2::Lossless);
        let a = monte_carlo(&alone).unwrap();
        let b = monte_carlo(&paired).unwrap();
        for pa in &a {
            let pb = b
                .iter()
                .find(|p| p.scheme == pa.scheme && p.sweep_value == pa.sweep_value)
                .unwrap();
            assert_eq!(pa.mean_t, pb.mean_t);
            assert_eq!(pa.std_t, pb.std_t);
            assert_eq!(pa.mean_lb, pb.mean_lb);
        }
    }

    #[test]
    fn device_sweep_reports_each_grid_point() {
        let config = ExperimentConfig {
            schemes: vec!["ncmi-instant".into()],
            sweep: SweepVar::Devices,
            grid: vec![2.0, 4.0],
            iterations: 10,
            base_m: 10,
            base_n: 3,
            stage1_loss: [0.3, 0.5],
            stage2: Stage2::Lossless,
            seed: 7,
        };
        let points = monte_carlo(&config).unwrap();
        assert_eq!(points.len(), 2);
        assert!(points.iter().all(|p| p.sweep_var == "devices" && p.mean_t > 0.0));
    }

    #[test]
    fn lossy_sweep_runs_and_reports_bounds() {
        let config = small_config(
            &["ncmi-batch", "ncmi-instant"],
            Stage2::Lossy { eta: [0.15, 0.35], eps: [0.15, 0.35] },
        );
        let points = monte_carlo(&config).unwrap();
        for p in &points {
            assert!(p.mean_ub.is_some());
            assert!(p.mean_t > 0.0);
            assert!(p.mean_lb > 0.0);
        }
    }

    #[test]
    fn csv_has_one_row_per_cell_plus_header() {
        let config = small_config(&["ncmi-batch"], Stage2::Lossless);
        let points = monte_carlo(&config).unwrap();
        let dir = std::env::temp_dir().join("ncmi-csv-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.csv");
        emit_csv(&points, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + points.len());
        assert!(text.starts_with("scheme,sweep_var,sweep_value"));
        assert!(emit_csv(&[], &path).is_err());
    }

    #[test]
    fn whole_file_subfile_run_equals_single_run() {
        let mut rng = derive_rng(5, &[1]);
        let mut scenario = run_stage_one(10, 3, &[0.4; 3], &mut rng).unwrap();
        scenario.seed = 1234;
        let opts = RunOptions::default();
        let direct = {
            let mut s = scenario.clone();
            s.seed = derive_seed(scenario.seed, &[0]);
            run_scheme(&s, Scheme::NcmiBatch, false, &opts).unwrap().completion_time
        };
        let total = subfile_run(&scenario, 10, 10, Scheme::NcmiBatch, false, &opts).unwrap();
        assert_eq!(total, direct);
    }

    #[test]
    fn subfile_sum_matches_explicit_partition() {
        let mut rng = derive_rng(6, &[2]);
        let mut scenario = run_stage_one(12, 3, &[0.4; 3], &mut rng).unwrap();
        scenario.seed = 777;
        let opts = RunOptions::default();
        let total = subfile_run(&scenario, 12, 4, Scheme::NcmiInstant, false, &opts).unwrap();
        let mut explicit = 0;
        for (chunk, lo) in (1..=12).step_by(4).enumerate() {
            let hi = lo + 3;
            let packets: Vec<usize> =
                scenario.packets.iter().copied().filter(|&p| p >= lo && p <= hi).collect();
            if packets.is_empty() {
                continue;
            }
            let sub = Scenario {
                packets: packets.clone(),
                wants: scenario
                    .wants
                    .iter()
                    .map(|w| w.iter().copied().filter(|&p| p >= lo && p <= hi).collect())
                    .collect(),
                seed: derive_seed(scenario.seed, &[chunk as u64]),
                ..scenario.clone()
            };
            explicit += run_scheme(&sub, Scheme::NcmiInstant, false, &opts).unwrap().completion_time;
        }
        assert_eq!(total, explicit);
    }

    #[test]
    fn non_divisor_subfile_size_is_rejected() {
        let scenario = Scenario::lossless(&[&[1, 2], &[3]], 0);
        assert!(matches!(
            subfile_run(&scenario, 10, 3, Scheme::NcmiBatch, false, &RunOptions::default()),
            Err(Error::Config(_))
        ));
    }
}
