//! Sweeps over dyadic schedules and log-log exponent fits.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::task_rng;

/// Least-squares line through (log N, log value).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub max_abs_residual: f64,
    pub points: Vec<(f64, f64)>,
}

impl FitResult {
    pub fn residuals(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|(x, y)| y - (self.intercept + self.slope * x))
            .collect()
    }
}

/// Fits log(value) = intercept + slope·log(N) by ordinary least squares,
/// after dropping the `drop_smallest` points with the smallest N.
pub fn fit_exponent(points: &[(f64, f64)], drop_smallest: usize) -> Result<FitResult> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pts: Vec<(f64, f64)> = pts.into_iter().skip(drop_smallest).collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 points, have {}",
            pts.len()
        )));
    }
    if pts.iter().any(|&(n, v)| !(n > 0.0 && v > 0.0)) {
        return Err(Error::DegenerateFit("N and values must be positive".into()));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("all N are equal".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut fit = FitResult {
        slope,
        intercept,
        max_abs_residual: 0.0,
        points: logs,
    };
    fit.max_abs_residual = fit.residuals().iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok(fit)
}

/// A schedule point: the primary dyadic parameter and any companions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchedulePoint {
    pub n: i64,
    pub extra: Vec<i64>,
}

impl SchedulePoint {
    pub fn new(n: i64) -> Self {
        Self {
            n,
            extra: Vec::new(),
        }
    }
}

/// Dyadic values lo, 2lo, 4lo, … ≤ hi.
pub fn dyadic(lo: i64, hi: i64) -> Vec<i64> {
    let mut out = Vec::new();
    let mut n = lo.max(1);
    while n <= hi {
        out.push(n);
        n *= 2;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub schedule: Vec<SchedulePoint>,
    /// Points whose cost exceeds this are skipped and flagged.
    pub budget: u128,
    pub seed: u64,
    pub trials: usize,
}

impl Sweep {
    pub fn new(schedule: Vec<SchedulePoint>, budget: u128, seed: u64, trials: usize) -> Result<Self> {
        if schedule.windows(2).any(|w| w[0].n >= w[1].n) {
            return Err(Error::InvalidArgument(
                "schedule must be strictly increasing in N".into(),
            ));
        }
        Ok(Self {
            schedule,
            budget,
            seed,
            trials: trials.max(1),
        })
    }
}

/// A named measurement run at each schedule point.
pub trait Driver: Sync {
    fn name(&self) -> String;

    /// Predicted exponent of the measured value in N, if any.
    fn theoretical_exponent(&self) -> Option<f64>;

    /// Work estimate compared against the sweep budget.
    fn cost(&self, point: &SchedulePoint) -> u128;

    /// One trial; the generator is seeded per (point, trial).
    fn measure(&self, point: &SchedulePoint, rng: &mut ChaCha8Rng) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointStatus {
    Ok,
    OverBudget,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointResult {
    pub index: usize,
    pub n: i64,
    pub value: Option<f64>,
    pub status: PointStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub driver: String,
    pub seed: u64,
    pub trials: usize,
    pub points: Vec<PointResult>,
    pub fit: Option<FitResult>,
    pub theoretical_exponent: Option<f64>,
}

/// Runs every schedule point (in parallel), keeps the maximum over trials,
/// and fits the successful points when there are at least three.
pub fn run_sweep(sweep: &Sweep, driver: &dyn Driver) -> SweepReport {
    let points: Vec<PointResult> = sweep
        .schedule
        .par_iter()
        .enumerate()
        .map(|(index, point)| {
            if driver.cost(point) > sweep.budget {
                return PointResult {
                    index,
                    n: point.n,
                    value: None,
                    status: PointStatus::OverBudget,
                };
            }
            let mut best: Option<f64> = None;
            for trial in 0..sweep.trials {
                let mut rng = task_rng(sweep.seed, index as u64, trial as u64);
                match driver.measure(point, &mut rng) {
                    Ok(v) => best = Some(best.map_or(v, |b| b.max(v))),
                    Err(e) => {
                        return PointResult {
                            index,
                            n: point.n,
                            value: None,
                            status: PointStatus::Failed(e.to_string()),
                        }
                    }
                }
            }
            PointResult {
                index,
                n: point.n,
                value: best,
                status: PointStatus::Ok,
            }
        })
        .collect();
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.value.map(|v| (p.n as f64, v)))
        .collect();
    SweepReport {
        driver: driver.name(),
        seed: sweep.seed,
        trials: sweep.trials,
        fit: fit_exponent(&data, 0).ok(),
        theoretical_exponent: driver.theoretical_exponent(),
        points,
    }
}

impl SweepReport {
    /// CSV with columns `index,N,value,status`; values use Rust's shortest
    /// round-trip formatting, so equal reports give identical bytes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "N", "value", "status"])?;
        for p in &self.points {
            let status = match &p.status {
                PointStatus::Ok => "ok".to_string(),
                PointStatus::OverBudget => "over-budget".to_string(),
                PointStatus::Failed(m) => format!("failed: {m}"),
            };
            w.write_record([
                p.index.to_string(),
                p.n.to_string(),
                p.value.map_or(String::new(), |v| v.to_string()),
                status,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gnuplot script plotting column `y_col` against column `x_col` of a CSV on
/// log-log axes, with the fitted line when available.
pub fn gnuplot_script(csv_name: &str, title: &str, x_col: usize, y_col: usize, fit: Option<&FitResult>) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale xy\n");
    s.push_str("set key left top\n");
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str("set xlabel 'N'\n");
    let mut plot = format!("plot '{csv_name}' every ::1 using {x_col}:{y_col} with linespoints title 'measured'");
    if let Some(f) = fit {
        s.push_str(&format!("fit_line(x) = exp({}) * x**({})\n", f.intercept, f.slope));
        plot.push_str(&format!(", fit_line(x) title 'slope {:.3}'", f.slope));
    }
    s.push_str(&plot);
    s.push('\n');
    s
}
