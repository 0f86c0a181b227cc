// A custom sweep driver, max-over-trials aggregation and log-log fitting.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use strichartz_lab::experiments::{gnuplot_script, run_sweep, Driver, SchedulePoint, Sweep};

/// Largest of N·u over uniform u ∈ [1, 2): grows like N.
struct NoisyLinear;

impl Driver for NoisyLinear {
    fn name(&self) -> String {
        "noisy-linear".into()
    }

    fn theoretical_exponent(&self) -> Option<f64> {
        Some(1.0)
    }

    fn cost(&self, point: &SchedulePoint) -> u128 {
        point.n as u128
    }

    fn measure(&self, point: &SchedulePoint, rng: &mut ChaCha8Rng) -> strichartz_lab::Result<f64> {
        Ok(point.n as f64 * rng.random_range(1.0..2.0))
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let schedule = [8, 16, 32, 64, 128, 256].map(SchedulePoint::new).to_vec();
    let sweep = Sweep::new(schedule, 200, 42, 16)?;
    let report = run_sweep(&sweep, &NoisyLinear);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    print!("{}", String::from_utf8(csv)?);
    let fit = report.fit.as_ref().expect("five points fit");
    println!("slope {:.3} (theory 1), max residual {:.3}", fit.slope, fit.max_abs_residual);
    print!("{}", gnuplot_script("noisy.csv", "noisy linear", 2, 3, Some(fit)));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
