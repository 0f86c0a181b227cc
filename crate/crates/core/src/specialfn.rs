//! Zonal and highest-weight spherical harmonics on 𝕊^d, normalized in
//! L² of the probability surface measure.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{plane_radius_rule, zonal_rule};

/// Largest degree supported by the recurrences.
pub const MAX_DEGREE: u32 = 4096;

/// Gegenbauer polynomial C_n^{(α)}(x) by the three-term recurrence.
pub fn gegenbauer(alpha: f64, n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * alpha * x;
    for m in 2..=n {
        let m = m as f64;
        let next = (2.0 * x * (m + alpha - 1.0) * cur - (m + 2.0 * alpha - 2.0) * prev) / m;
        prev = cur;
        cur = next;
    }
    cur
}

/// Which eigenfunction of the degree-n eigenspace a mode stands for.
/// Coordinate indices are 0-based into ℝ^{d+1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    /// Zonal about the coordinate axis `pole`.
    Zonal { pole: usize },
    /// (x_i + i x_j)^n for `axis = (i, j)`.
    HighestWeight { axis: (usize, usize) },
}

impl ModeKind {
    pub fn zonal() -> Self {
        ModeKind::Zonal { pole: 0 }
    }

    pub fn highest_weight() -> Self {
        ModeKind::HighestWeight { axis: (0, 1) }
    }

    pub fn is_zonal(&self) -> bool {
        matches!(self, ModeKind::Zonal { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SphereMode {
    pub dim: usize,
    pub degree: u32,
    pub kind: ModeKind,
}

impl SphereMode {
    pub fn new(dim: usize, degree: u32, kind: ModeKind) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("sphere dimension {dim} < 2")));
        }
        if degree > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} above supported maximum {MAX_DEGREE}"
            )));
        }
        match kind {
            ModeKind::Zonal { pole } if pole > dim => {
                return Err(Error::InvalidArgument(format!("pole index {pole} out of range")))
            }
            ModeKind::HighestWeight { axis: (i, j) } if i == j || i > dim || j > dim => {
                return Err(Error::InvalidArgument(format!("invalid axis ({i}, {j})")))
            }
            _ => {}
        }
        Ok(Self { dim, degree, kind })
    }

    pub fn zonal(dim: usize, degree: u32) -> Result<Self> {
        Self::new(dim, degree, ModeKind::zonal())
    }

    pub fn highest_weight(dim: usize, degree: u32) -> Result<Self> {
        Self::new(dim, degree, ModeKind::highest_weight())
    }

    /// Eigenvalue −n(n+d−1) of the Laplace–Beltrami operator.
    pub fn laplace_eigenvalue(&self) -> f64 {
        let n = self.degree as f64;
        -n * (n + self.dim as f64 - 1.0)
    }

    /// L²-normalized value at a unit vector `x ∈ ℝ^{d+1}`.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let c = normalization_constant(self);
        self.eval_unnormalized(x) * c
    }

    /// The harmonic polynomial before normalization.
    pub fn eval_unnormalized(&self, x: &[f64]) -> Complex64 {
        match self.kind {
            ModeKind::Zonal { pole } => Complex64::new(
                gegenbauer((self.dim as f64 - 1.0) / 2.0, self.degree, x[pole]),
                0.0,
            ),
            ModeKind::HighestWeight { axis: (i, j) } => {
                Complex64::new(x[i], x[j]).powu(self.degree)
            }
        }
    }
}

/// A point of 𝕊^d.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let norm2: f64 = coords.iter().map(|v| v * v).sum();
        if coords.len() < 3 || (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "sphere point must be a unit vector in at least 3 coordinates".into(),
            ));
        }
        Ok(Self { coords })
    }

    /// Unit vector along coordinate `i` in ℝ^{dim+1}.
    pub fn axis(dim: usize, i: usize) -> Self {
        let mut coords = vec![0.0; dim + 1];
        coords[i] = 1.0;
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

pub fn zonal_harmonic(mode: &SphereMode, p: &SpherePoint) -> Result<Complex64> {
    check(mode, p, true)?;
    Ok(mode.eval(p.coords()))
}

pub fn highest_weight_harmonic(mode: &SphereMode, p: &SpherePoint) -> Result<Complex64> {
    check(mode, p, false)?;
    Ok(mode.eval(p.coords()))
}

fn check(mode: &SphereMode, p: &SpherePoint, zonal: bool) -> Result<()> {
    if mode.dim != p.dim() {
        return Err(Error::InvalidArgument(format!(
            "mode on S^{} evaluated at a point of S^{}",
            mode.dim,
            p.dim()
        )));
    }
    if mode.kind.is_zonal() != zonal {
        return Err(Error::InvalidArgument("wrong mode kind".into()));
    }
    Ok(())
}

type CacheKey = (usize, u32, bool);

fn cache() -> &'static RwLock<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Positive constant c with ‖c·(unnormalized mode)‖_{L²(𝕊^d)} = 1.
///
/// Computed once per (d, n, kind) by a reduced quadrature that is exact for
/// the squared modulus, then cached. The constant does not depend on the pole
/// or axis.
pub fn normalization_constant(mode: &SphereMode) -> f64 {
    let key = (mode.dim, mode.degree, mode.kind.is_zonal());
    if let Some(c) = cache().read().expect("cache poisoned").get(&key) {
        return *c;
    }
    let c = compute_normalization(mode.dim, mode.degree, mode.kind.is_zonal());
    cache().write().expect("cache poisoned").insert(key, c);
    c
}

fn compute_normalization(dim: usize, n: u32, zonal: bool) -> f64 {
    let norm2 = if zonal {
        let alpha = (dim as f64 - 1.0) / 2.0;
        let (ts, ws) = zonal_rule(dim, 2 * n as usize).expect("valid rule parameters");
        ts.iter()
            .zip(&ws)
            .map(|(&t, &w)| w * gegenbauer(alpha, n, t).powi(2))
            .sum::<f64>()
    } else {
        let (us, ws) = plane_radius_rule(dim, n as usize).expect("valid rule parameters");
        us.iter().zip(&ws).map(|(&u, &w)| w * u.powi(n as i32)).sum::<f64>()
    };
    1.0 / norm2.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_sphere_quadrature, DEFAULT_NODE_BUDGET};
    use approx::assert_abs_diff_eq;

    #[test]
    fn gegenbauer_bases() {
        assert_eq!(gegenbauer(0.7, 0, 0.3), 1.0);
        assert_abs_diff_eq!(gegenbauer(0.7, 1, 0.3), 2.0 * 0.7 * 0.3);
        let x: f64 = 0.3;
        let p4 = (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0;
        assert_abs_diff_eq!(gegenbauer(0.5, 4, x), p4, epsilon = 1e-15);
    }

    #[test]
    fn zonal_examples() {
        let pole = SpherePoint::axis(2, 0);
        let eq = SpherePoint::axis(2, 1);
        let z0 = SphereMode::zonal(2, 0).unwrap();
        assert_abs_diff_eq!(zonal_harmonic(&z0, &eq).unwrap().re, 1.0, epsilon = 1e-14);
        let z2 = SphereMode::zonal(2, 2).unwrap();
        assert_abs_diff_eq!(zonal_harmonic(&z2, &pole).unwrap().re, 5f64.sqrt(), epsilon = 1e-12);
        let z1 = SphereMode::zonal(3, 1).unwrap();
        assert_abs_diff_eq!(
            zonal_harmonic(&z1, &SpherePoint::axis(3, 2)).unwrap().norm(),
            0.0
        );
        assert_abs_diff_eq!(normalization_constant(&SphereMode::zonal(2, 3).unwrap()), 7f64.sqrt(), epsilon = 1e-12);
        for d in 2..6 {
            assert_abs_diff_eq!(normalization_constant(&SphereMode::zonal(d, 0).unwrap()), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn highest_weight_examples() {
        let hw = SphereMode::highest_weight(2, 1).unwrap();
        assert_abs_diff_eq!(normalization_constant(&hw), 1.5f64.sqrt(), epsilon = 1e-13);
        let v = highest_weight_harmonic(&hw, &SpherePoint::axis(2, 0)).unwrap();
        assert_abs_diff_eq!(v.norm(), 1.5f64.sqrt(), epsilon = 1e-13);
        let hw3 = SphereMode::highest_weight(4, 3).unwrap();
        assert_abs_diff_eq!(hw3.eval(SpherePoint::axis(4, 3).coords()).norm(), 0.0);
        let h0 = SphereMode::highest_weight(2, 0).unwrap();
        assert_abs_diff_eq!(h0.eval(SpherePoint::axis(2, 2).coords()).re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn normalization_matches_full_quadrature() {
        for (d, n) in [(2, 5), (3, 4), (4, 3)] {
            let q = build_sphere_quadrature(d, 2 * n as usize, DEFAULT_NODE_BUDGET).unwrap();
            for kind in [ModeKind::zonal(), ModeKind::highest_weight()] {
                let m = SphereMode::new(d, n, kind).unwrap();
                let norm2 = q.integrate_real(|x| m.eval(x).norm_sqr());
                assert_abs_diff_eq!(norm2, 1.0, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let m = SphereMode::zonal(3, 2).unwrap();
        assert!(zonal_harmonic(&m, &SpherePoint::axis(2, 0)).is_err());
        assert!(highest_weight_harmonic(&m, &SpherePoint::axis(3, 0)).is_err());
        assert!(SphereMode::new(2, 1, ModeKind::HighestWeight { axis: (1, 1) }).is_err());
        assert!(SphereMode::zonal(1, 1).is_err());
    }
}
