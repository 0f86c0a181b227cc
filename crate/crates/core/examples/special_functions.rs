// Gegenbauer polynomials and L²-normalized zonal and highest-weight
// harmonics on spheres.

use strichartz_lab::quadrature::{build_sphere_quadrature, DEFAULT_NODE_BUDGET};
use strichartz_lab::specialfn::{
    gegenbauer, highest_weight_harmonic, normalization_constant, zonal_harmonic, SphereMode, SpherePoint,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("C_5^(1/2)(0.3) = {:.12}", gegenbauer(0.5, 5, 0.3));

    for dim in [2usize, 3, 4] {
        let pole = SpherePoint::axis(dim, 0);
        let on_plane = SpherePoint::axis(dim, 1);
        for n in [4u32, 16, 64] {
            let z = SphereMode::zonal(dim, n)?;
            let hw = SphereMode::highest_weight(dim, n)?;
            println!(
                "S^{dim} n={n:>2}: |Z(pole)| = {:>10.4}  |HW(e_1)| = {:>8.4}  c_HW = {:.4}",
                zonal_harmonic(&z, &pole)?.norm(),
                highest_weight_harmonic(&hw, &on_plane)?.norm(),
                normalization_constant(&hw),
            );
        }
    }

    // The normalization is exact: integrate |Y|² with a rule of degree 2n.
    let mode = SphereMode::zonal(3, 7)?;
    let rule = build_sphere_quadrature(3, 14, DEFAULT_NODE_BUDGET)?;
    let norm2 = rule.integrate_real(|x| mode.eval(x).norm_sqr());
    println!("||Z_7||^2 on S^3 = {norm2:.14}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
