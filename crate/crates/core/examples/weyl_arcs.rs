// Rational approximation, arc classification and cut-off Weyl sums.

use strichartz_lab::expsum::{arc_sweep, build_cutoff, classify_arc, dirichlet_approx, weyl_sum};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let t = std::f64::consts::PI - 3.0;
    let r = dirichlet_approx(t, 1000)?;
    println!("{t:.10} ~ {}/{}  (error {:.2e})", r.a, r.q, (t - r.value()).abs());

    let n = 1024;
    for t in [0.5, 0.5 + 1e-7, 0.123456] {
        println!("t = {t}: {:?}", classify_arc(t, n));
    }

    let c = build_cutoff(0, n)?;
    println!("|f_0(0)| = {:.3}, |f_0(0.123456)| = {:.3}", weyl_sum(&c, 0.0).norm(), weyl_sum(&c, 0.123456).norm());

    let report = arc_sweep(&[64, 128, 256], 4, 8, 1)?;
    for row in &report.rows {
        println!("N={:>4}: major {:.4}  minor {:.4}", row.n, row.major_ratio, row.minor_ratio);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
