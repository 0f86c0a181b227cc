// Packets under the model flow and the space-time L² norm of their product.

use num_complex::Complex64;
use strichartz_lab::packets::{
    max_per_point, strichartz_experiment, strichartz_lhs, strichartz_lhs_direct, JointMode, LhsOptions, Packet,
    StrichartzRun,
};
use strichartz_lab::specialfn::SphereMode;
use strichartz_lab::ManifoldSpec;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ManifoldSpec::new(vec![2], 1)?;
    let hw = |n| SphereMode::highest_weight(2, n);
    let f1 = Packet::new(
        &spec,
        vec![
            (JointMode::new(vec![hw(5)?], vec![2]), Complex64::new(1.0, 0.0)),
            (JointMode::new(vec![hw(4)?], vec![-3]), Complex64::new(0.0, 0.5)),
        ],
        None,
    )?;
    let f2 = Packet::new(&spec, vec![(JointMode::new(vec![hw(2)?], vec![1]), Complex64::new(1.0, 0.0))], None)?;
    let pair = vec![f1, f2];
    let opts = LhsOptions::default();
    println!(
        "||e^(itD)f1 e^(itD)f2||: level sets {:.12}, direct grid {:.12}",
        strichartz_lhs(&pair, &spec, &opts)?,
        strichartz_lhs_direct(&pair, &spec, &opts)?
    );

    let mut run = StrichartzRun::new(spec, 1, vec![vec![16, 4], vec![64, 8]]);
    run.trials = 2;
    run.max_modes = 8;
    for r in max_per_point(&strichartz_experiment(&run)?) {
        println!("N = {:?} {:<16} lhs/|f| = {:.4}  ratio = {:.4}", r.n, r.label, r.lhs / r.input_norm, r.ratio);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
