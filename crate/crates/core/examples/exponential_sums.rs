// Space-time norms of torus exponential sums and a small shifted-cube sweep.

use strichartz_lab::expsum::{
    draw_coefficients, exp_sum_norm, level_set_l2_squared, verify_i1, CoefficientVector, Family, GridSizing,
    NormOptions, SumSweep,
};
use strichartz_lab::lattice::{enumerate_cube, Cube};
use strichartz_lab::numeric::task_rng;
use strichartz_lab::LpExponent;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cube = Cube::integer(&[3, -2], 6)?;
    let support = enumerate_cube(&cube, 0, 1 << 20)?;
    let mut rng = task_rng(7, 0, 0);
    let a: CoefficientVector = draw_coefficients(Family::ComplexGaussian, support, &mut rng)?;

    let opts = NormOptions::default();
    let l2 = exp_sum_norm(&a, LpExponent::int(2), 2, &GridSizing::Auto, &opts)?;
    println!(
        "L^2 on the grid {:?}: {:.12}, level sets: {:.12}",
        l2.grid,
        l2.value,
        level_set_l2_squared(&a, 2).sqrt()
    );
    let l4 = exp_sum_norm(&a, LpExponent::int(4), 0, &GridSizing::Auto, &opts)?;
    println!("L^4_t (r1 = 0): {:.6}  ratio to l2: {:.4}", l4.value, l4.value / a.norm2());

    let mut sweep = SumSweep::new(2, 0, LpExponent::int(4), vec![4, 8, 16]);
    sweep.shifts = 4;
    let report = verify_i1(&sweep)?;
    for s in &report.summaries {
        println!("N={:>3} max ratio {:.4}", s.n, s.max_ratio);
    }
    if let Some(fit) = &report.fit {
        println!("fitted exponent {:.3}", fit.slope);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
