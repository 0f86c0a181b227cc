// Products of exact joint eigenfunctions against the joint spectral
// projector bound.

use strichartz_lab::experiments::fit_exponent;
use strichartz_lab::packets::{projector_experiment, projector_schedule, witness_combinations};
use strichartz_lab::ManifoldSpec;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ManifoldSpec::spheres(&[2, 2])?;
    let schedule = projector_schedule(2, 1, &[4, 8, 16, 32], 4);
    let rows = projector_experiment(&spec, 1, &schedule, &witness_combinations(2, true), 1e-3)?;
    for label in ["Z,Z", "HW,Z", "HW,HW"] {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.label == label)
            .map(|r| (r.n[1], r.lhs))
            .collect();
        let fit = fit_exponent(&pts, 0)?;
        println!("{spec} witnesses {label:<6} growth exponent {:.3}", fit.slope);
    }
    for r in rows.iter().filter(|r| r.label == "HW,HW") {
        println!("  N2 = {:>6.2}: lhs {:.4}, bound {:.4}, ratio {:.4}", r.n[1], r.lhs, r.rhs, r.ratio);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
