// Exact-degree product rules on spheres and mixed space-time norms.

use num_complex::Complex64;
use strichartz_lab::quadrature::{
    build_sphere_quadrature, gauss_legendre, mixed_norm, sphere_moment, DomainFactor, MixedNormSpec,
    PeriodicGrid, DEFAULT_NODE_BUDGET,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (x, w) = gauss_legendre(5)?;
    let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
    println!("mean of x^8 on [-1,1]: {approx:.15} (exact {:.15})", 1.0 / 9.0);

    let rule = build_sphere_quadrature(2, 8, DEFAULT_NODE_BUDGET)?;
    let got = rule.integrate_real(|p| p[0].powi(4) * p[2].powi(2));
    println!(
        "E[x0^4 x2^2] on S^2 with {} nodes: {got:.15} (closed form {:.15})",
        rule.len(),
        sphere_moment(&[4, 0, 2])
    );

    // ‖u‖_{L^4_t L^2_x} for u = e^{-it}·x0 + e^{-4it}·x1 on [0,2π) × S^2.
    let domain = [
        DomainFactor::Periodic(PeriodicGrid::new(16)),
        DomainFactor::Sphere(build_sphere_quadrature(2, 12, DEFAULT_NODE_BUDGET)?),
    ];
    let spec = MixedNormSpec::new(vec![(1, 2.0), (0, 4.0)]);
    let value = mixed_norm(&domain, &spec, |v| {
        let (t, x) = (v[0][0], v[1]);
        Complex64::from_polar(x[0], -t) + Complex64::from_polar(x[1], -4.0 * t)
    })?;
    println!("L^4_t L^2_x norm: {value:.12}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
