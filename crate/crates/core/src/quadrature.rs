//! Exact-degree integration on spheres and periodic grids, plus iterated
//! mixed norms over tensor products of them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, pairwise_sum_c};
use crate::regularity::LpExponent;

/// Default cap on the number of nodes a single rule may have.
pub const DEFAULT_NODE_BUDGET: usize = 20_000_000;

/// Gauss–Jacobi rule with `n` nodes for the weight (1−x)^α (1+x)^β on
/// [−1, 1]. Weights are normalized to sum to one. Exact for polynomials of
/// degree ≤ 2n − 1.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("rule needs at least one node".into()));
    }
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(Error::InvalidArgument(format!(
            "Jacobi parameters must exceed -1, got ({alpha}, {beta})"
        )));
    }
    let ab = alpha + beta;
    let diag = |k: usize| -> f64 {
        if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            let s = 2.0 * k as f64 + ab;
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        }
    };
    // Off-diagonal entry between rows k-1 and k, k ≥ 1.
    let off = |k: usize| -> f64 {
        let k = k as f64;
        let s = 2.0 * k + ab;
        let num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
        let den = s * s * (s + 1.0) * (s - 1.0);
        if k == 1.0 && (ab + 1.0).abs() < 1e-14 {
            // s − 1 = 0 cancels against k + ab = 0 in the numerator.
            let s = 2.0 + ab;
            return (4.0 * (1.0 + alpha) * (1.0 + beta) / (s * s * (s + 1.0))).sqrt();
        }
        (num / den).sqrt()
    };
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = diag(k);
        if k + 1 < n {
            let b = off(k + 1);
            jac[(k, k + 1)] = b;
            jac[(k + 1, k)] = b;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok(pairs.into_iter().map(|(x, w)| (x, w / total)).unzip())
}

/// Gauss–Legendre rule on [−1, 1] with weights summing to one.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Tensor rule on 𝕊^d ⊂ ℝ^{d+1} for the probability surface measure.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub dim: usize,
    /// Node coordinates, `dim + 1` per node, stored contiguously.
    coords: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let w = self.dim + 1;
        &self.coords[i * w..(i + 1) * w]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim + 1)
    }

    pub fn integrate<F: Fn(&[f64]) -> Complex64>(&self, f: F) -> Complex64 {
        let terms: Vec<Complex64> = self
            .nodes()
            .zip(&self.weights)
            .map(|(x, &w)| f(x) * w)
            .collect();
        pairwise_sum_c(&terms)
    }

    pub fn integrate_real<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .nodes()
            .zip(&self.weights)
            .map(|(x, &w)| f(x) * w)
            .collect();
        pairwise_sum(&terms)
    }
}

/// Number of nodes [`build_sphere_quadrature`] would produce.
pub fn sphere_node_count(dim: usize, exact_degree: usize) -> u128 {
    let mut count = exact_degree as u128 + 1;
    for _ in 2..=dim {
        count *= (exact_degree / 2 + 1) as u128;
    }
    count
}

/// Iterated polar rule: uniform azimuth on 𝕊¹, then at each level a
/// Gauss–Jacobi rule in the latitude cosine with the (1−t²)^{(d−2)/2} weight.
pub fn build_sphere_quadrature(
    dim: usize,
    exact_degree: usize,
    node_budget: usize,
) -> Result<SphereQuadrature> {
    if dim < 1 {
        return Err(Error::InvalidArgument("sphere dimension must be >= 1".into()));
    }
    let needed = sphere_node_count(dim, exact_degree);
    if needed > node_budget as u128 {
        return Err(Error::BudgetExceeded {
            what: "sphere quadrature nodes",
            needed,
            budget: node_budget as u128,
        });
    }
    let m = exact_degree + 1;
    let mut coords = Vec::with_capacity(2 * m);
    for j in 0..m {
        let phi = 2.0 * PI * j as f64 / m as f64;
        coords.push(phi.cos());
        coords.push(phi.sin());
    }
    let mut weights = vec![1.0 / m as f64; m];
    for level in 2..=dim {
        let a = (level as f64 - 2.0) / 2.0;
        let (ts, ws) = gauss_jacobi(exact_degree / 2 + 1, a, a)?;
        let width = level;
        let mut next = Vec::with_capacity(ts.len() * weights.len() * (width + 1));
        let mut next_w = Vec::with_capacity(ts.len() * weights.len());
        for (&t, &wt) in ts.iter().zip(&ws) {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for (y, &wy) in coords.chunks_exact(width).zip(&weights) {
                next.push(t);
                next.extend(y.iter().map(|v| s * v));
                next_w.push(wt * wy);
            }
        }
        coords = next;
        weights = next_w;
    }
    Ok(SphereQuadrature {
        dim,
        coords,
        weights,
        exact_degree,
    })
}

/// Rule for functions of t = ⟨x, pole⟩ alone on 𝕊^d: the push-forward of the
/// surface measure is ∝ (1−t²)^{(d−2)/2} dt. Exact for polynomials in t of
/// degree ≤ `exact_degree`.
pub fn zonal_rule(dim: usize, exact_degree: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = (dim as f64 - 2.0) / 2.0;
    gauss_jacobi(exact_degree / 2 + 1, a, a)
}

/// Rule for functions of u = x_i² + x_j² on 𝕊^d (d ≥ 2): u has density
/// ∝ (1−u)^{(d−3)/2} on [0,1]. Returns nodes in u, exact for polynomials in u
/// of degree ≤ `exact_degree`.
pub fn plane_radius_rule(dim: usize, exact_degree: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if dim < 2 {
        return Err(Error::InvalidArgument("plane rule needs d >= 2".into()));
    }
    let a = (dim as f64 - 3.0) / 2.0;
    let (xs, ws) = gauss_jacobi(exact_degree / 2 + 1, a, 0.0)?;
    Ok((xs.into_iter().map(|x| (1.0 + x) / 2.0).collect(), ws))
}

/// Uniform grid 2πj/m on [0, 2π).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodicGrid {
    pub num_points: usize,
    /// Use the raw measure dt instead of dt/2π.
    pub raw_measure: bool,
}

impl PeriodicGrid {
    pub fn new(num_points: usize) -> Self {
        Self {
            num_points: num_points.max(1),
            raw_measure: false,
        }
    }

    pub fn raw(num_points: usize) -> Self {
        Self {
            num_points: num_points.max(1),
            raw_measure: true,
        }
    }

    /// Smallest grid integrating |f|^p exactly when f is a trigonometric
    /// polynomial whose frequencies lie in an interval of half-width `max_freq`.
    /// Returns `None` when p is not an even integer.
    pub fn exact_for_power(max_freq: u64, p: LpExponent) -> Option<Self> {
        even_power(p).map(|p| Self::new((p as u64 * max_freq + 1) as usize))
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.num_points as f64
    }

    pub fn weight(&self) -> f64 {
        let base = 1.0 / self.num_points as f64;
        if self.raw_measure {
            2.0 * PI * base
        } else {
            base
        }
    }

    pub fn integrate<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        let w = self.weight();
        let terms: Vec<Complex64> = (0..self.num_points).map(|j| f(self.node(j)) * w).collect();
        pairwise_sum_c(&terms)
    }
}

/// `Some(p)` if `p` is an even positive integer.
pub fn even_power(p: LpExponent) -> Option<u32> {
    match p {
        LpExponent::Finite(v) if v.is_integer() && *v.numer() > 0 && v.numer() % 2 == 0 => {
            Some(*v.numer() as u32)
        }
        _ => None,
    }
}

/// One factor of a tensor-product domain.
#[derive(Clone, Debug)]
pub enum DomainFactor {
    Sphere(SphereQuadrature),
    Periodic(PeriodicGrid),
}

impl DomainFactor {
    pub fn len(&self) -> usize {
        match self {
            DomainFactor::Sphere(q) => q.len(),
            DomainFactor::Periodic(g) => g.num_points,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn weight(&self, i: usize) -> f64 {
        match self {
            DomainFactor::Sphere(q) => q.weights[i],
            DomainFactor::Periodic(g) => g.weight(),
        }
    }

    /// Coordinates of node `i`: the point on the sphere, or `[θ]`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        match self {
            DomainFactor::Sphere(q) => q.node(i).to_vec(),
            DomainFactor::Periodic(g) => vec![g.node(i)],
        }
    }
}

/// Iterated norm L^{p₁}_{v₁} L^{p₂}_{v₂} …, listed innermost first.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedNormSpec {
    pub order: Vec<(usize, f64)>,
}

impl MixedNormSpec {
    pub fn new(order: Vec<(usize, f64)>) -> Self {
        Self { order }
    }
}

/// Evaluates the iterated norm of `f` over the tensor product of `domain`.
///
/// `f` receives one coordinate slice per factor. An exponent of `f64::INFINITY`
/// takes the maximum over nodes, which only bounds the true supremum from
/// below.
pub fn mixed_norm<F>(domain: &[DomainFactor], spec: &MixedNormSpec, f: F) -> Result<f64>
where
    F: Fn(&[&[f64]]) -> Complex64,
{
    let k = domain.len();
    let mut seen = vec![false; k];
    for &(v, p) in &spec.order {
        if v >= k || seen[v] {
            return Err(Error::InvalidArgument(format!(
                "mixed norm variable {v} missing or repeated"
            )));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("exponent {p} below 1")));
        }
        seen[v] = true;
    }
    if seen.iter().any(|s| !s) || spec.order.len() != k {
        return Err(Error::InvalidArgument(
            "mixed norm must cover every domain factor".into(),
        ));
    }
    let points: Vec<Vec<Vec<f64>>> = domain
        .iter()
        .map(|d| (0..d.len()).map(|i| d.point(i)).collect())
        .collect();
    let mut shape: Vec<usize> = domain.iter().map(|d| d.len()).collect();
    let total: usize = shape.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut idx = vec![0usize; k];
    for _ in 0..total {
        let args: Vec<&[f64]> = (0..k).map(|a| points[a][idx[a]].as_slice()).collect();
        values.push(f(&args).norm());
        for a in (0..k).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    // Axis labels of the current tensor, in storage order.
    let mut axes: Vec<usize> = (0..k).collect();
    for &(v, p) in &spec.order {
        let pos = axes.iter().position(|&a| a == v).expect("validated above");
        let n = shape[pos];
        let inner: usize = shape[pos + 1..].iter().product();
        let outer: usize = shape[..pos].iter().product();
        let mut next = Vec::with_capacity(outer * inner);
        let mut column = Vec::with_capacity(n);
        for o in 0..outer {
            for i in 0..inner {
                column.clear();
                for j in 0..n {
                    column.push(values[(o * n + j) * inner + i]);
                }
                let reduced = if p.is_infinite() {
                    column.iter().cloned().fold(0.0, f64::max)
                } else {
                    let terms: Vec<f64> = column
                        .iter()
                        .enumerate()
                        .map(|(j, x)| domain[v].weight(j) * x.powf(p))
                        .collect();
                    pairwise_sum(&terms).powf(1.0 / p)
                };
                next.push(reduced);
            }
        }
        values = next;
        shape.remove(pos);
        axes.remove(pos);
    }
    Ok(values[0])
}

/// ∫_{𝕊^d} x^α dσ for the probability measure, by the closed form
/// Γ((d+1)/2) ∏ Γ((αᵢ+1)/2) / (π^{(d+1)/2} Γ((|α|+d+1)/2)), computed as a
/// product of ratios to stay finite.
pub fn sphere_moment(alpha: &[u32]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    // Recursively: integrating out one coordinate at a time.
    // E[x₀^{2a₀} ⋯] = ∏ (2aᵢ−1)!! / ((n)(n+2)⋯(n+2|a|−2)), n = d+1.
    let n = alpha.len() as f64;
    let mut num = 1.0;
    for &a in alpha {
        let mut j = 1.0;
        while j < a as f64 {
            num *= j;
            j += 2.0;
        }
    }
    let half: u32 = alpha.iter().map(|a| a / 2).sum();
    let mut den = 1.0;
    for i in 0..half {
        den *= n + 2.0 * i as f64;
    }
    num / den
}
