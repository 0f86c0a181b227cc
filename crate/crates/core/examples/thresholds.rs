// Well-posedness thresholds and estimate constants for a few products.

use strichartz_lab::regularity::{applicable_thresholds, fmt_q, lwp_threshold, mls_constant, FreeParams};
use strichartz_lab::ManifoldSpec;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let products = [
        ManifoldSpec::new(vec![2], 2)?,
        ManifoldSpec::spheres(&[4, 5])?,
        ManifoldSpec::new(vec![3], 1)?,
        ManifoldSpec::new(vec![2, 2, 2], 0)?,
    ];
    for spec in &products {
        for k in 1..=2 {
            let best = lwp_threshold(spec, k)?;
            println!(
                "{spec:<16} k={k}: s {} {:<6} {:<15} via {}",
                best.relation(),
                fmt_q(&best.s_bound),
                best.regime.to_string(),
                best.source()
            );
        }
    }

    // Every rule that applies, not only the winner.
    let spec = ManifoldSpec::new(vec![2], 1)?;
    for row in applicable_thresholds(&spec, 1)? {
        println!("  {spec} k=1 candidate: s {} {}  [{}]", row.relation(), fmt_q(&row.s_bound), row.rule);
    }

    let c = mls_constant(&spec, 1, &FreeParams::default())?;
    println!("bilinear constant on {spec}: {c}");
    println!("  at N = (64, 8): {:.4}", c.evaluate(&[64.0, 8.0])?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
