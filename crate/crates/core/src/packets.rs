//! Joint eigenmodes and spectrally localized packets on
//! 𝕊^{d₁} × … × 𝕊^{d_{r₀}} × 𝕋^{r₁}, the model flow e^{itΔ} with integer
//! phases |ξ|², and space-time L² norms of products of evolved packets.
//!
//! Measures are probability measures on every factor and on t ∈ [0, 2π).
//! Space-time norms are computed exactly by grouping frequency tuples into
//! level sets of (Σ|ξ^j|², Σξ₁^j); sphere integrals of eigenfunction
//! products use one-dimensional reduced rules whenever all modes on a factor
//! share a pole or a plane, and the full tensor rule otherwise.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expsum::{eval_on_grid, largest_slab};
use crate::lattice::{window_enumerate, Cube, Frequency};
use crate::numeric::{pairwise_sum, pairwise_sum_c, smooth_size, task_rng};
use crate::quadrature::{
    build_sphere_quadrature, plane_radius_rule, zonal_rule, SphereQuadrature, DEFAULT_NODE_BUDGET,
};
use crate::regularity::{mljspe_constant, mls_constant, FreeParams, ManifoldSpec, Q};
use crate::specialfn::{gegenbauer, normalization_constant, ModeKind, SphereMode, SpherePoint};

/// Default cap on the number of frequency tuples in a level-set expansion.
pub const DEFAULT_TUPLE_BUDGET: u128 = 4_000_000;

/// Default cap on (sphere nodes × space-time grid points) for direct
/// integration.
pub const DEFAULT_DIRECT_BUDGET: u128 = 1 << 27;

/// Which eigenvalue drives the time phase of a sphere degree n.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spectrum {
    /// n², the normalization used throughout the estimates.
    #[default]
    Model,
    /// n(n + d − 1), the actual Laplace–Beltrami eigenvalue.
    True,
}

/// A joint eigenfunction: one spherical harmonic per sphere factor times a
/// torus character e^{i⟨x₁, ξ₁⟩}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct JointMode {
    pub sphere_modes: Vec<SphereMode>,
    pub torus_freq: Vec<i64>,
}

impl JointMode {
    pub fn new(sphere_modes: Vec<SphereMode>, torus_freq: Vec<i64>) -> Self {
        Self {
            sphere_modes,
            torus_freq,
        }
    }

    pub fn torus(freq: Vec<i64>) -> Self {
        Self::new(Vec::new(), freq)
    }

    /// Mode with joint spectrum `xi` on `spec`, using `kinds[i]` on the i-th
    /// sphere factor.
    pub fn from_frequency(spec: &ManifoldSpec, xi: &Frequency, kinds: &[ModeKind]) -> Result<Self> {
        let r0 = spec.sphere_count();
        if xi.rank() != spec.rank() || kinds.len() != r0 {
            return Err(Error::InvalidArgument(format!(
                "frequency of rank {} with {} kinds does not fit {spec}",
                xi.rank(),
                kinds.len()
            )));
        }
        let mut modes = Vec::with_capacity(r0);
        for (i, (&d, kind)) in spec.sphere_dims().iter().zip(kinds).enumerate() {
            let n = u32::try_from(xi.0[i]).map_err(|_| {
                Error::InvalidArgument(format!("sphere degree {} is negative", xi.0[i]))
            })?;
            modes.push(SphereMode::new(d as usize, n, *kind)?);
        }
        Ok(Self::new(modes, xi.torus_part(r0).to_vec()))
    }

    /// ξ = (n₁, …, n_{r₀}, ξ₁).
    pub fn frequency(&self) -> Frequency {
        let mut v: Vec<i64> = self.sphere_modes.iter().map(|m| m.degree as i64).collect();
        v.extend_from_slice(&self.torus_freq);
        Frequency(v)
    }

    pub fn norm2(&self) -> i128 {
        self.frequency().norm2()
    }

    /// Time frequency of the mode under the chosen spectrum.
    pub fn phase(&self, spectrum: Spectrum) -> i128 {
        let torus: i128 = self.torus_freq.iter().map(|&n| n as i128 * n as i128).sum();
        let sphere: i128 = self
            .sphere_modes
            .iter()
            .map(|m| {
                let n = m.degree as i128;
                match spectrum {
                    Spectrum::Model => n * n,
                    Spectrum::True => n * (n + m.dim as i128 - 1),
                }
            })
            .sum();
        torus + sphere
    }

    fn check(&self, spec: &ManifoldSpec) -> Result<()> {
        let dims_ok = self.sphere_modes.len() == spec.sphere_count()
            && self
                .sphere_modes
                .iter()
                .zip(spec.sphere_dims())
                .all(|(m, &d)| m.dim == d as usize);
        if !dims_ok || self.torus_freq.len() != spec.torus_dim() {
            return Err(Error::InvalidArgument(format!(
                "mode {} does not live on {spec}",
                self.frequency()
            )));
        }
        Ok(())
    }

    /// Value at time zero; `x0[i]` is a unit vector of the i-th sphere.
    pub fn eval(&self, x0: &[&[f64]], x1: &[f64]) -> Complex64 {
        let sphere: Complex64 = self
            .sphere_modes
            .iter()
            .zip(x0)
            .map(|(m, x)| m.eval(x))
            .product();
        let arg: f64 = self.torus_freq.iter().zip(x1).map(|(&n, &x)| n as f64 * x).sum();
        sphere * Complex64::from_polar(1.0, arg)
    }
}

/// A finite combination of joint modes, optionally localized to the window
/// N ≤ |ξ| ≤ 2N.
#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    spec: ManifoldSpec,
    terms: Vec<(JointMode, Complex64)>,
    window: Option<Q>,
}

impl Packet {
    /// Validates the manifold, the window, and pairwise orthogonality of the
    /// modes (distinct spectra, or equal spectra with orthogonal sphere
    /// kinds).
    pub fn new(spec: &ManifoldSpec, terms: Vec<(JointMode, Complex64)>, window: Option<Q>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("packet has no terms".into()));
        }
        for (m, _) in &terms {
            m.check(spec)?;
        }
        if let Some(n) = window {
            if !n.is_positive() {
                return Err(Error::InvalidArgument("window size must be positive".into()));
            }
            let (a, b) = (*n.numer() as i128, *n.denom() as i128);
            for (m, _) in &terms {
                let s = m.norm2() * b * b;
                if s < a * a || s > 4 * a * a {
                    return Err(Error::InvalidArgument(format!(
                        "mode {} lies outside the window [{n}, {}]",
                        m.frequency(),
                        n * Q::from_integer(2)
                    )));
                }
            }
        }
        let mut by_freq: HashMap<Frequency, Vec<usize>> = HashMap::new();
        for (i, (m, _)) in terms.iter().enumerate() {
            by_freq.entry(m.frequency()).or_default().push(i);
        }
        let integ = Integrator::new(DEFAULT_NODE_BUDGET);
        for idx in by_freq.values().filter(|v| v.len() > 1) {
            for (x, &i) in idx.iter().enumerate() {
                for &j in &idx[x + 1..] {
                    let (a, b) = (&terms[i].0, &terms[j].0);
                    let mut ip = Complex64::new(1.0, 0.0);
                    for (ma, mb) in a.sphere_modes.iter().zip(&b.sphere_modes) {
                        ip *= integ.inner(ma.dim, &[*ma], &[*mb])?;
                    }
                    if ip.norm() > 1e-10 {
                        return Err(Error::NonOrthogonal(format!(
                            "modes {} and {} of the same spectrum overlap ({:.3e})",
                            a.frequency(),
                            b.frequency(),
                            ip.norm()
                        )));
                    }
                }
            }
        }
        Ok(Self {
            spec: spec.clone(),
            terms,
            window,
        })
    }

    pub fn single(spec: &ManifoldSpec, mode: JointMode) -> Result<Self> {
        Self::new(spec, vec![(mode, Complex64::new(1.0, 0.0))], None)
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn terms(&self) -> &[(JointMode, Complex64)] {
        &self.terms
    }

    pub fn window(&self) -> Option<Q> {
        self.window
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// ‖f‖_{L²(M)} = (Σ|c|²)^{1/2}, valid because the modes are orthonormal.
    pub fn norm(&self) -> f64 {
        let sq: Vec<f64> = self.terms.iter().map(|(_, c)| c.norm_sqr()).collect();
        pairwise_sum(&sq).sqrt()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|(_, c)| *c *= s);
        out
    }

    /// Same modes with conjugated coefficients.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|(_, c)| *c = c.conj());
        out
    }

    /// The projection onto the modes whose spectrum satisfies `keep`.
    pub fn restrict<F: Fn(&Frequency) -> bool>(&self, keep: F) -> Result<Self> {
        let terms: Vec<_> = self
            .terms
            .iter()
            .filter(|(m, _)| keep(&m.frequency()))
            .cloned()
            .collect();
        if terms.is_empty() {
            return Err(Error::InvalidArgument("restriction leaves no terms".into()));
        }
        Ok(Self {
            spec: self.spec.clone(),
            terms,
            window: self.window,
        })
    }

    fn max_degree(&self, factor: usize) -> usize {
        self.terms
            .iter()
            .map(|(m, _)| m.sphere_modes[factor].degree as usize)
            .max()
            .unwrap_or(0)
    }
}

/// e^{itΔ}f at (x₀, x₁): Σ c·e^{−it|ξ|²}·∏ᵢ Y_i(x₀ᵢ)·e^{i⟨x₁,ξ₁⟩}.
pub fn evaluate_packet(p: &Packet, x0: &[SpherePoint], x1: &[f64], t: f64) -> Result<Complex64> {
    evaluate_packet_with(p, x0, x1, t, Spectrum::Model)
}

pub fn evaluate_packet_with(
    p: &Packet,
    x0: &[SpherePoint],
    x1: &[f64],
    t: f64,
    spectrum: Spectrum,
) -> Result<Complex64> {
    let dims_ok = x0.len() == p.spec.sphere_count()
        && x0
            .iter()
            .zip(p.spec.sphere_dims())
            .all(|(x, &d)| x.dim() == d as usize);
    if !dims_ok || x1.len() != p.spec.torus_dim() {
        return Err(Error::InvalidArgument(format!(
            "evaluation point does not lie on {}",
            p.spec
        )));
    }
    let xs: Vec<&[f64]> = x0.iter().map(|x| x.coords()).collect();
    let vals: Vec<Complex64> = p
        .terms
        .iter()
        .map(|(m, c)| {
            let phase = -(m.phase(spectrum) as f64) * t;
            c * Complex64::from_polar(1.0, phase) * m.eval(&xs, x1)
        })
        .collect();
    Ok(pairwise_sum_c(&vals))
}

fn mode_key(m: &SphereMode) -> (u32, u8, usize, usize) {
    match m.kind {
        ModeKind::Zonal { pole } => (m.degree, 0, pole, 0),
        ModeKind::HighestWeight { axis: (i, j) } => (m.degree, 1, i, j),
    }
}

fn sorted_nonconstant(modes: &[SphereMode]) -> Vec<SphereMode> {
    let mut v: Vec<SphereMode> = modes.iter().copied().filter(|m| m.degree > 0).collect();
    v.sort_by_key(mode_key);
    v
}

type InnerKey = (usize, Vec<SphereMode>, Vec<SphereMode>);
type RuleKey = (u8, usize, usize);
type Rule1d = Arc<(Vec<f64>, Vec<f64>)>;

/// Memoized sphere integrals ⟨∏ Y_a, ∏ Y_b⟩ with probability measure.
struct Integrator {
    node_budget: usize,
    rules: Mutex<HashMap<RuleKey, Rule1d>>,
    full: Mutex<HashMap<(usize, usize), Arc<SphereQuadrature>>>,
    memo: Mutex<HashMap<InnerKey, Complex64>>,
}

impl Integrator {
    fn new(node_budget: usize) -> Self {
        Self {
            node_budget,
            rules: Mutex::new(HashMap::new()),
            full: Mutex::new(HashMap::new()),
            memo: Mutex::new(HashMap::new()),
        }
    }

    fn rule(&self, zonal: bool, dim: usize, degree: usize) -> Result<Rule1d> {
        let key = (u8::from(zonal), dim, degree);
        if let Some(r) = self.rules.lock().expect("rule cache poisoned").get(&key) {
            return Ok(r.clone());
        }
        let r = Arc::new(if zonal {
            zonal_rule(dim, degree)?
        } else {
            plane_radius_rule(dim, degree)?
        });
        self.rules.lock().expect("rule cache poisoned").insert(key, r.clone());
        Ok(r)
    }

    fn full_rule(&self, dim: usize, degree: usize) -> Result<Arc<SphereQuadrature>> {
        if let Some(r) = self.full.lock().expect("rule cache poisoned").get(&(dim, degree)) {
            return Ok(r.clone());
        }
        let r = Arc::new(build_sphere_quadrature(dim, degree, self.node_budget)?);
        self.full
            .lock()
            .expect("rule cache poisoned")
            .insert((dim, degree), r.clone());
        Ok(r)
    }

    fn inner(&self, dim: usize, a: &[SphereMode], b: &[SphereMode]) -> Result<Complex64> {
        let a = sorted_nonconstant(a);
        let b = sorted_nonconstant(b);
        let key = (dim, a, b);
        if let Some(v) = self.memo.lock().expect("memo poisoned").get(&key) {
            return Ok(*v);
        }
        let v = self.compute(dim, &key.1, &key.2)?;
        self.memo.lock().expect("memo poisoned").insert(key, v);
        Ok(v)
    }

    fn compute(&self, dim: usize, a: &[SphereMode], b: &[SphereMode]) -> Result<Complex64> {
        let all: Vec<&SphereMode> = a.iter().chain(b).collect();
        if all.is_empty() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let consts: f64 = all.iter().map(|m| normalization_constant(m)).product();
        let total: usize = all.iter().map(|m| m.degree as usize).sum();
        let first = all[0].kind;
        let shared = all.iter().all(|m| m.kind == first);
        if shared {
            match first {
                ModeKind::Zonal { .. } => {
                    let alpha = (dim as f64 - 1.0) / 2.0;
                    let rule = self.rule(true, dim, total)?;
                    let terms: Vec<f64> = rule
                        .0
                        .iter()
                        .zip(&rule.1)
                        .map(|(&t, &w)| w * all.iter().map(|m| gegenbauer(alpha, m.degree, t)).product::<f64>())
                        .collect();
                    return Ok(Complex64::new(consts * pairwise_sum(&terms), 0.0));
                }
                ModeKind::HighestWeight { .. } => {
                    let na: u32 = a.iter().map(|m| m.degree).sum();
                    let nb: u32 = b.iter().map(|m| m.degree).sum();
                    if na != nb {
                        return Ok(Complex64::zero());
                    }
                    let rule = self.rule(false, dim, na as usize)?;
                    let terms: Vec<f64> = rule
                        .0
                        .iter()
                        .zip(&rule.1)
                        .map(|(&u, &w)| w * u.powi(na as i32))
                        .collect();
                    return Ok(Complex64::new(consts * pairwise_sum(&terms), 0.0));
                }
            }
        }
        let rule = self.full_rule(dim, total)?;
        Ok(rule.integrate(|x| {
            let fa: Complex64 = a.iter().map(|m| m.eval_unnormalized(x)).product();
            let fb: Complex64 = b.iter().map(|m| m.eval_unnormalized(x)).product();
            fa * fb.conj()
        }) * consts)
    }
}

/// ‖∏_j f^j‖_{L²(M₀)} for single joint modes, factor by factor.
pub fn product_l2_factorized(modes: &[JointMode]) -> Result<f64> {
    product_l2_factorized_with(modes, DEFAULT_NODE_BUDGET)
}

pub fn product_l2_factorized_with(modes: &[JointMode], node_budget: usize) -> Result<f64> {
    let Some(first) = modes.first() else {
        return Err(Error::InvalidArgument("no modes given".into()));
    };
    let r0 = first.sphere_modes.len();
    if modes.iter().any(|m| {
        m.sphere_modes.len() != r0
            || m.sphere_modes.iter().zip(&first.sphere_modes).any(|(a, b)| a.dim != b.dim)
    }) {
        return Err(Error::InvalidArgument("modes live on different manifolds".into()));
    }
    let integ = Integrator::new(node_budget);
    let mut out = 1.0;
    for i in 0..r0 {
        let list: Vec<SphereMode> = modes.iter().map(|m| m.sphere_modes[i]).collect();
        out *= integ.inner(first.sphere_modes[i].dim, &list, &list)?.re.max(0.0).sqrt();
    }
    Ok(out)
}

/// Knobs shared by the space-time norm computations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LhsOptions {
    pub spectrum: Spectrum,
    pub tuple_budget: u128,
    pub node_budget: usize,
    pub direct_budget: u128,
}

impl Default for LhsOptions {
    fn default() -> Self {
        Self {
            spectrum: Spectrum::Model,
            tuple_budget: DEFAULT_TUPLE_BUDGET,
            node_budget: DEFAULT_NODE_BUDGET,
            direct_budget: DEFAULT_DIRECT_BUDGET,
        }
    }
}

fn check_packets(packets: &[&Packet], spec: &ManifoldSpec) -> Result<()> {
    if packets.iter().any(|p| p.spec != *spec) {
        return Err(Error::InvalidArgument(format!("packet does not live on {spec}")));
    }
    Ok(())
}

struct Tuple {
    coef: Complex64,
    factors: Vec<Vec<SphereMode>>,
}

type CellKey = (i128, Vec<i64>);

fn level_cells(packets: &[&Packet], opts: &LhsOptions) -> Result<BTreeMap<CellKey, Vec<Tuple>>> {
    let count: u128 = packets.iter().map(|p| p.len() as u128).product();
    if count > opts.tuple_budget {
        return Err(Error::BudgetExceeded {
            what: "frequency tuples",
            needed: count,
            budget: opts.tuple_budget,
        });
    }
    let r0 = packets[0].spec.sphere_count();
    let r1 = packets[0].spec.torus_dim();
    let mut cells: BTreeMap<CellKey, Vec<Tuple>> = BTreeMap::new();
    let mut idx = vec![0usize; packets.len()];
    loop {
        let mut coef = Complex64::new(1.0, 0.0);
        let mut l = 0i128;
        let mut mu = vec![0i64; r1];
        let mut factors = vec![Vec::with_capacity(packets.len()); r0];
        for (p, &i) in packets.iter().zip(&idx) {
            let (m, c) = &p.terms[i];
            coef *= c;
            l += m.phase(opts.spectrum);
            mu.iter_mut().zip(&m.torus_freq).for_each(|(s, &n)| *s += n);
            for (f, sm) in factors.iter_mut().zip(&m.sphere_modes) {
                f.push(*sm);
            }
        }
        let factors = factors.iter().map(|f| sorted_nonconstant(f)).collect();
        cells.entry((l, mu)).or_default().push(Tuple { coef, factors });
        let mut j = packets.len();
        loop {
            if j == 0 {
                return Ok(cells);
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < packets[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

fn tuple_inner(integ: &Integrator, dims: &[u32], a: &Tuple, b: &Tuple) -> Result<Complex64> {
    let mut v = Complex64::new(1.0, 0.0);
    for (i, &d) in dims.iter().enumerate() {
        v *= integ.inner(d as usize, &a.factors[i], &b.factors[i])?;
        if v == Complex64::zero() {
            break;
        }
    }
    Ok(v)
}

/// ‖∏_j e^{itΔ}f^j‖_{L²([0,2π)×M)} by the level-set expansion: the squared
/// norm is Σ over cells (l, μ) of ‖Σ_{tuples in the cell} ∏_j c_j Y_j‖²
/// on the sphere factors.
pub fn strichartz_lhs(packets: &[Packet], spec: &ManifoldSpec, opts: &LhsOptions) -> Result<f64> {
    let refs: Vec<&Packet> = packets.iter().collect();
    Ok(cross_gram(&refs, &refs, spec, opts)?.max(0.0).sqrt())
}

/// ⟨∏_j e^{itΔ}f^j, ∏_j e^{itΔ}g^j⟩ over [0,2π)×M by level sets.
fn cross_gram(f: &[&Packet], g: &[&Packet], spec: &ManifoldSpec, opts: &LhsOptions) -> Result<f64> {
    Ok(cross_inner(f, g, spec, opts)?.re)
}

fn cross_inner(f: &[&Packet], g: &[&Packet], spec: &ManifoldSpec, opts: &LhsOptions) -> Result<Complex64> {
    if f.len() < 2 || f.len() != g.len() {
        return Err(Error::InvalidArgument(
            "need at least two packets on each side, equally many".into(),
        ));
    }
    check_packets(f, spec)?;
    check_packets(g, spec)?;
    let same = f.iter().zip(g).all(|(a, b)| std::ptr::eq(*a, *b));
    let cf = level_cells(f, opts)?;
    let cg = if same { None } else { Some(level_cells(g, opts)?) };
    let integ = Integrator::new(opts.node_budget);
    let dims = spec.sphere_dims();
    let work: Vec<(&Vec<Tuple>, &Vec<Tuple>)> = match &cg {
        None => cf.values().map(|v| (v, v)).collect(),
        Some(cg) => cf
            .iter()
            .filter_map(|(k, v)| cg.get(k).map(|w| (v, w)))
            .collect(),
    };
    let parts: Result<Vec<Complex64>> = work
        .par_iter()
        .map(|(a, b)| {
            if dims.is_empty() {
                let sa: Complex64 = a.iter().map(|t| t.coef).sum();
                let sb: Complex64 = b.iter().map(|t| t.coef).sum();
                return Ok(sa * sb.conj());
            }
            let mut terms = Vec::new();
            if same {
                for (x, ta) in a.iter().enumerate() {
                    terms.push(ta.coef.norm_sqr() * tuple_inner(&integ, dims, ta, ta)?);
                    for tb in &a[x + 1..] {
                        let v = ta.coef * tb.coef.conj() * tuple_inner(&integ, dims, ta, tb)?;
                        terms.push(Complex64::new(2.0 * v.re, 0.0));
                    }
                }
            } else {
                for ta in a.iter() {
                    for tb in b.iter() {
                        terms.push(ta.coef * tb.coef.conj() * tuple_inner(&integ, dims, ta, tb)?);
                    }
                }
            }
            Ok(pairwise_sum_c(&terms))
        })
        .collect();
    Ok(pairwise_sum_c(&parts?))
}

/// Set of level-set keys (Σ phases, Σ ξ₁) reached by a product.
pub fn level_keys(packets: &[&Packet], spectrum: Spectrum) -> BTreeSet<CellKey> {
    let mut keys = BTreeSet::new();
    keys.insert((0i128, vec![0i64; packets.first().map_or(0, |p| p.spec.torus_dim())]));
    for p in packets {
        let mut next = BTreeSet::new();
        for (l, mu) in &keys {
            for (m, _) in &p.terms {
                let mut mu2 = mu.clone();
                mu2.iter_mut().zip(&m.torus_freq).for_each(|(s, &n)| *s += n);
                next.insert((l + m.phase(spectrum), mu2));
            }
        }
        keys = next;
    }
    keys
}

/// Gram matrix ⟨F_a, F_b⟩ of products F_a = ∏_j e^{itΔ}f_a^j, computed by
/// brute-force integration: tensor sphere quadrature nodes, and at each node
/// a uniform (t, x₁) grid evaluated by FFT. Independent of the level-set
/// expansion and meant as its oracle.
pub fn direct_gram(products: &[Vec<&Packet>], spec: &ManifoldSpec, opts: &LhsOptions) -> Result<Vec<Vec<Complex64>>> {
    if products.is_empty() {
        return Ok(Vec::new());
    }
    for prod in products {
        if prod.is_empty() {
            return Err(Error::InvalidArgument("empty product".into()));
        }
        check_packets(prod, spec)?;
    }
    let r0 = spec.sphere_count();
    let r1 = spec.torus_dim();
    // Frequency extents of every product along t and each torus axis.
    let mut lo = vec![i128::MAX; 1 + r1];
    let mut hi = vec![i128::MIN; 1 + r1];
    for prod in products {
        let mut plo = vec![0i128; 1 + r1];
        let mut phi = vec![0i128; 1 + r1];
        for p in prod {
            for axis in 0..=r1 {
                let vals = p.terms.iter().map(|(m, _)| {
                    if axis == 0 {
                        -m.phase(opts.spectrum)
                    } else {
                        m.torus_freq[axis - 1] as i128
                    }
                });
                let (a, b) = vals.fold((i128::MAX, i128::MIN), |(a, b), v| (a.min(v), b.max(v)));
                plo[axis] += a;
                phi[axis] += b;
            }
        }
        for axis in 0..=r1 {
            lo[axis] = lo[axis].min(plo[axis]);
            hi[axis] = hi[axis].max(phi[axis]);
        }
    }
    let sizes: Vec<usize> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| smooth_size((b - a) as usize + 1))
        .collect();
    let grid: u128 = sizes.iter().map(|&m| m as u128).product();
    let mut rules = Vec::with_capacity(r0);
    for (i, &d) in spec.sphere_dims().iter().enumerate() {
        let deg = 2 * products
            .iter()
            .map(|prod| prod.iter().map(|p| p.max_degree(i)).sum::<usize>())
            .max()
            .unwrap_or(0);
        rules.push(build_sphere_quadrature(d as usize, deg, opts.node_budget)?);
    }
    let nodes: u128 = rules.iter().map(|r| r.len() as u128).product();
    let needed = nodes * grid * products.len() as u128;
    if needed > opts.direct_budget {
        return Err(Error::BudgetExceeded {
            what: "direct space-time grid",
            needed,
            budget: opts.direct_budget,
        });
    }
    let n = products.len();
    let node_count = nodes as usize;
    let per_node: Vec<Vec<Complex64>> = (0..node_count)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut weight = 1.0;
            let mut x0: Vec<&[f64]> = vec![&[]; r0];
            for i in (0..r0).rev() {
                let len = rules[i].len();
                let j = rem % len;
                rem /= len;
                x0[i] = rules[i].node(j);
                weight *= rules[i].weights[j];
            }
            let values: Vec<Vec<Complex64>> = products
                .iter()
                .map(|prod| {
                    let mut acc = vec![Complex64::new(1.0, 0.0); grid as usize];
                    for p in prod {
                        let mut terms: BTreeMap<Vec<i128>, Complex64> = BTreeMap::new();
                        for (m, c) in &p.terms {
                            let mut key = Vec::with_capacity(1 + r1);
                            key.push(-m.phase(opts.spectrum));
                            key.extend(m.torus_freq.iter().map(|&v| v as i128));
                            let sphere: Complex64 = m
                                .sphere_modes
                                .iter()
                                .zip(&x0)
                                .map(|(sm, x)| sm.eval(x))
                                .product();
                            *terms.entry(key).or_default() += c * sphere;
                        }
                        let vals = eval_on_grid(&terms, &sizes);
                        acc.iter_mut().zip(vals).for_each(|(a, v)| *a *= v);
                    }
                    acc
                })
                .collect();
            let mut out = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    let prods: Vec<Complex64> = values[a]
                        .iter()
                        .zip(&values[b])
                        .map(|(x, y)| x * y.conj())
                        .collect();
                    out.push(pairwise_sum_c(&prods) * (weight / grid as f64));
                }
            }
            out
        })
        .collect();
    let mut gram = vec![vec![Complex64::zero(); n]; n];
    for a in 0..n {
        for b in 0..n {
            let col: Vec<Complex64> = per_node.iter().map(|v| v[a * n + b]).collect();
            gram[a][b] = pairwise_sum_c(&col);
        }
    }
    Ok(gram)
}

/// The same norm as [`strichartz_lhs`], by direct grid integration.
pub fn strichartz_lhs_direct(packets: &[Packet], spec: &ManifoldSpec, opts: &LhsOptions) -> Result<f64> {
    let prod: Vec<&Packet> = packets.iter().collect();
    let g = direct_gram(&[prod], spec, opts)?;
    Ok(g[0][0].re.max(0.0).sqrt())
}

/// ‖e^{itΔ}f‖_{L²(M)} at a fixed time by quadrature on M.
pub fn packet_l2_at(p: &Packet, t: f64, opts: &LhsOptions) -> Result<f64> {
    let r1 = p.spec.torus_dim();
    let sizes: Vec<usize> = (0..r1)
        .map(|axis| {
            let (a, b) = p.terms.iter().fold((i64::MAX, i64::MIN), |(a, b), (m, _)| {
                (a.min(m.torus_freq[axis]), b.max(m.torus_freq[axis]))
            });
            smooth_size((b - a) as usize + 1)
        })
        .collect();
    let grid: usize = sizes.iter().product();
    let mut rules = Vec::new();
    for (i, &d) in p.spec.sphere_dims().iter().enumerate() {
        rules.push(build_sphere_quadrature(d as usize, 2 * p.max_degree(i), opts.node_budget)?);
    }
    let nodes: u128 = rules.iter().map(|r| r.len() as u128).product();
    if nodes * grid as u128 > opts.direct_budget {
        return Err(Error::BudgetExceeded {
            what: "fixed-time grid",
            needed: nodes * grid as u128,
            budget: opts.direct_budget,
        });
    }
    let r0 = rules.len();
    let parts: Vec<f64> = (0..nodes as usize)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut weight = 1.0;
            let mut x0: Vec<&[f64]> = vec![&[]; r0];
            for i in (0..r0).rev() {
                let j = rem % rules[i].len();
                rem /= rules[i].len();
                x0[i] = rules[i].node(j);
                weight *= rules[i].weights[j];
            }
            let mut terms: BTreeMap<Vec<i128>, Complex64> = BTreeMap::new();
            for (m, c) in &p.terms {
                let key: Vec<i128> = m.torus_freq.iter().map(|&v| v as i128).collect();
                let phase = Complex64::from_polar(1.0, -(m.phase(opts.spectrum) as f64) * t);
                let sphere: Complex64 = m.sphere_modes.iter().zip(&x0).map(|(sm, x)| sm.eval(x)).product();
                *terms.entry(key).or_default() += c * phase * sphere;
            }
            let vals = if r1 == 0 {
                vec![terms.values().sum()]
            } else {
                eval_on_grid(&terms, &sizes)
            };
            let sq: Vec<f64> = vals.iter().map(|v| v.norm_sqr()).collect();
            weight * pairwise_sum(&sq) / grid as f64
        })
        .collect();
    Ok(pairwise_sum(&parts).sqrt())
}

/// One measured product norm against the estimate's constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductNormReport {
    pub spec: String,
    pub k: u32,
    pub label: String,
    pub point: usize,
    pub trial: usize,
    /// N₁ ≥ … ≥ N_{k+1}.
    pub n: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// ∏_j ‖f^j‖_{L²}.
    pub input_norm: f64,
    pub ratio: f64,
    pub modes: Vec<usize>,
    pub conventions: &'static str,
}

const CONVENTIONS: &str = "probability measures; model spectrum n^2; t in [0,2pi)";

pub fn write_reports_csv<W: Write>(rows: &[ProductNormReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["spec", "k", "label", "point", "trial", "N", "lhs", "rhs", "input_norm", "ratio", "modes"])?;
    for r in rows {
        let join = |v: Vec<String>| v.join(":");
        w.write_record([
            r.spec.clone(),
            r.k.to_string(),
            r.label.clone(),
            r.point.to_string(),
            r.trial.to_string(),
            join(r.n.iter().map(|x| x.to_string()).collect()),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.input_norm.to_string(),
            r.ratio.to_string(),
            join(r.modes.iter().map(|x| x.to_string()).collect()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Keeps the largest ratio per (schedule point, label).
pub fn max_per_point(rows: &[ProductNormReport]) -> Vec<ProductNormReport> {
    let mut best: BTreeMap<(usize, String), ProductNormReport> = BTreeMap::new();
    for r in rows {
        let key = (r.point, r.label.clone());
        match best.get(&key) {
            Some(b) if b.ratio >= r.ratio => {}
            _ => {
                best.insert(key, r.clone());
            }
        }
    }
    best.into_values().collect()
}

/// Witness eigenfunction family on one sphere factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Witness {
    Zonal,
    HighestWeight,
}

impl Witness {
    pub fn kind(self) -> ModeKind {
        match self {
            Witness::Zonal => ModeKind::zonal(),
            Witness::HighestWeight => ModeKind::highest_weight(),
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Witness::Zonal => "Z",
            Witness::HighestWeight => "HW",
        }
    }
}

/// All 2^{r₀} per-factor witness combinations when `all` is set, else the
/// two pure ones.
pub fn witness_combinations(r0: usize, all: bool) -> Vec<Vec<Witness>> {
    if !all || r0 == 0 {
        return vec![vec![Witness::Zonal; r0], vec![Witness::HighestWeight; r0]];
    }
    (0..1usize << r0)
        .map(|mask| {
            (0..r0)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        Witness::HighestWeight
                    } else {
                        Witness::Zonal
                    }
                })
                .collect()
        })
        .collect()
}

fn witness_label(w: &[Witness]) -> String {
    w.iter().map(|x| x.short()).collect::<Vec<_>>().join(",")
}

fn euclid(v: &[u32]) -> f64 {
    v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt()
}

/// Product norms of exact joint eigenfunctions against the joint projector
/// bound. Each schedule point lists λ^j (sphere degrees) for j = 1..k+1;
/// N_j = max(|λ^j|, 1).
pub fn projector_experiment(
    spec: &ManifoldSpec,
    k: u32,
    schedule: &[Vec<Vec<u32>>],
    witnesses: &[Vec<Witness>],
    eta: f64,
) -> Result<Vec<ProductNormReport>> {
    let constant = mljspe_constant(spec, k, eta)?;
    let r0 = spec.sphere_count();
    let mut rows = Vec::new();
    for (point, lambdas) in schedule.iter().enumerate() {
        if lambdas.len() != k as usize + 1 || lambdas.iter().any(|l| l.len() != r0) {
            return Err(Error::InvalidArgument(format!(
                "schedule point {point} needs {} degree vectors of length {r0}",
                k + 1
            )));
        }
        let n: Vec<f64> = lambdas.iter().map(|l| euclid(l).max(1.0)).collect();
        if n.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(format!(
                "schedule point {point}: |lambda^j| must be non-increasing"
            )));
        }
        let rhs = constant.evaluate(&n)?;
        for w in witnesses {
            if w.len() != r0 {
                return Err(Error::InvalidArgument("one witness per sphere factor".into()));
            }
            let kinds: Vec<ModeKind> = w.iter().map(|x| x.kind()).collect();
            let modes: Vec<JointMode> = lambdas
                .iter()
                .map(|l| {
                    let xi = Frequency(l.iter().map(|&d| d as i64).collect());
                    JointMode::from_frequency(spec, &xi, &kinds)
                })
                .collect::<Result<_>>()?;
            let lhs = product_l2_factorized(&modes)?;
            rows.push(ProductNormReport {
                spec: spec.to_string(),
                k,
                label: witness_label(w),
                point,
                trial: 0,
                n: n.clone(),
                lhs,
                rhs,
                input_norm: 1.0,
                ratio: lhs / rhs,
                modes: vec![1; k as usize + 1],
                conventions: CONVENTIONS,
            });
        }
    }
    Ok(rows)
}

/// λ¹ = ratio·(n, …, n) and λ^j = (n, …, n) for j ≥ 2, one point per n.
pub fn projector_schedule(r0: usize, k: u32, n_list: &[u32], ratio: u32) -> Vec<Vec<Vec<u32>>> {
    n_list
        .iter()
        .map(|&n| {
            let mut point = vec![vec![ratio * n; r0]];
            point.extend((0..k).map(|_| vec![n; r0]));
            point
        })
        .collect()
}

/// (N₁, N₂, …, N₂) with N₁ = N₂^κ, one point per N₂.
pub fn strichartz_schedule(k: u32, n2_list: &[i64], kappa: u32) -> Vec<Vec<i64>> {
    n2_list
        .iter()
        .map(|&n| {
            let mut point = vec![n.pow(kappa)];
            point.extend((0..k).map(|_| n));
            point
        })
        .collect()
}

/// How test packets are drawn inside each spectral window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PacketFamily {
    /// The single mode ξ = (N, 0, …, 0).
    SingleMode,
    /// Up to `max_modes` random window points with Gaussian coefficients.
    RandomInWindow,
    /// Highest packet restricted to the fullest slab of a cube of side N₂
    /// around a random window point; lower packets random in their windows.
    SlabLocalized,
}

impl PacketFamily {
    pub fn name(self) -> &'static str {
        match self {
            PacketFamily::SingleMode => "single-mode",
            PacketFamily::RandomInWindow => "random-in-window",
            PacketFamily::SlabLocalized => "slab-localized",
        }
    }

    pub fn all() -> [PacketFamily; 3] {
        [
            PacketFamily::SingleMode,
            PacketFamily::RandomInWindow,
            PacketFamily::SlabLocalized,
        ]
    }
}

impl std::str::FromStr for PacketFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PacketFamily::all()
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown packet family '{s}'")))
    }
}

/// Configuration of a multilinear Strichartz sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrichartzRun {
    pub spec: ManifoldSpec,
    pub k: u32,
    /// Windows (N₁, …, N_{k+1}) per schedule point, non-increasing.
    pub schedule: Vec<Vec<i64>>,
    pub families: Vec<PacketFamily>,
    pub trials: usize,
    pub seed: u64,
    pub params: FreeParams,
    /// Eigenfunction kind used on every sphere factor.
    pub witness: Witness,
    pub max_modes: usize,
    pub window_budget: u128,
    pub options: LhsOptions,
}

impl StrichartzRun {
    pub fn new(spec: ManifoldSpec, k: u32, schedule: Vec<Vec<i64>>) -> Self {
        Self {
            spec,
            k,
            schedule,
            families: PacketFamily::all().to_vec(),
            trials: 4,
            seed: 0,
            params: FreeParams::default(),
            witness: Witness::HighestWeight,
            max_modes: 16,
            window_budget: 1 << 22,
            options: LhsOptions::default(),
        }
    }
}

fn gaussian_coef(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

fn random_packet(
    run: &StrichartzRun,
    window: &[Frequency],
    n: i64,
    kinds: &[ModeKind],
    rng: &mut ChaCha8Rng,
) -> Result<Packet> {
    let take = run.max_modes.min(window.len()).max(1);
    let mut picks: Vec<usize> = sample(rng, window.len(), take).into_vec();
    picks.sort_unstable();
    let terms = picks
        .into_iter()
        .map(|i| Ok((JointMode::from_frequency(&run.spec, &window[i], kinds)?, gaussian_coef(rng))))
        .collect::<Result<Vec<_>>>()?;
    Packet::new(&run.spec, terms, Some(Q::from_integer(n)))
}

fn single_packet(run: &StrichartzRun, n: i64, kinds: &[ModeKind]) -> Result<Packet> {
    let mut xi = vec![0i64; run.spec.rank()];
    xi[0] = n;
    let mode = JointMode::from_frequency(&run.spec, &Frequency(xi), kinds)?;
    Packet::new(
        &run.spec,
        vec![(mode, Complex64::new(1.0, 0.0))],
        Some(Q::from_integer(n)),
    )
}

fn slab_packet(
    run: &StrichartzRun,
    window: &[Frequency],
    n1: i64,
    n2: i64,
    kinds: &[ModeKind],
    rng: &mut ChaCha8Rng,
) -> Result<Packet> {
    let r0 = run.spec.sphere_count();
    let anchor = &window[rng.random_range(0..window.len())];
    let corner: Vec<i64> = anchor.0.iter().map(|&v| v - n2 / 2).collect();
    let cube = Cube::integer(&corner, n2)?;
    let (points, _) = largest_slab(
        &cube,
        Q::from_integer(n1),
        Q::from_integer(n2),
        r0,
        run.window_budget,
    )?;
    let lo = n1 as i128 * n1 as i128;
    let mut inside: Vec<&Frequency> = points
        .iter()
        .filter(|xi| {
            let s = xi.norm2();
            lo <= s && s <= 4 * lo && xi.0[..r0].iter().all(|&v| v >= 0)
        })
        .collect();
    if inside.is_empty() {
        inside.push(anchor);
    }
    if inside.len() > run.max_modes {
        let picks = sample(rng, inside.len(), run.max_modes).into_vec();
        let mut picks = picks;
        picks.sort_unstable();
        inside = picks.into_iter().map(|i| inside[i]).collect();
    }
    let terms = inside
        .into_iter()
        .map(|xi| Ok((JointMode::from_frequency(&run.spec, xi, kinds)?, gaussian_coef(rng))))
        .collect::<Result<Vec<_>>>()?;
    Packet::new(&run.spec, terms, Some(Q::from_integer(n1)))
}

/// Draws packets per family and trial, computes the space-time product norm
/// and compares it with the multilinear Strichartz constant. Returns one row
/// per (schedule point, family, trial); see [`max_per_point`].
pub fn strichartz_experiment(run: &StrichartzRun) -> Result<Vec<ProductNormReport>> {
    let spec = &run.spec;
    let kk = run.k as usize + 1;
    let constant = mls_constant(spec, run.k, &run.params)?;
    let kinds = vec![run.witness.kind(); spec.sphere_count()];
    let mut windows: HashMap<i64, Vec<Frequency>> = HashMap::new();
    for point in &run.schedule {
        if point.len() != kk {
            return Err(Error::InvalidArgument(format!("each schedule point needs {kk} window sizes")));
        }
        if point.iter().any(|&n| n < 1) || point.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "window sizes must be positive and non-increasing".into(),
            ));
        }
        for &n in point {
            if let std::collections::hash_map::Entry::Vacant(e) = windows.entry(n) {
                e.insert(window_enumerate(Q::from_integer(n), spec, run.window_budget)?);
            }
        }
    }
    let mut tasks = Vec::new();
    for p in 0..run.schedule.len() {
        for (f, fam) in run.families.iter().enumerate() {
            let trials = if *fam == PacketFamily::SingleMode { 1 } else { run.trials.max(1) };
            for t in 0..trials {
                tasks.push((p, f, *fam, t));
            }
        }
    }
    let rows: Result<Vec<ProductNormReport>> = tasks
        .par_iter()
        .map(|&(p, f, fam, trial)| {
            let ns = &run.schedule[p];
            let mut rng = task_rng(run.seed, (p * 16 + f) as u64, trial as u64);
            let mut packets = Vec::with_capacity(kk);
            for (j, &n) in ns.iter().enumerate() {
                let window = &windows[&n];
                let packet = match fam {
                    PacketFamily::SingleMode => single_packet(run, n, &kinds)?,
                    PacketFamily::RandomInWindow => random_packet(run, window, n, &kinds, &mut rng)?,
                    PacketFamily::SlabLocalized if j == 0 => {
                        slab_packet(run, window, n, ns[1], &kinds, &mut rng)?
                    }
                    PacketFamily::SlabLocalized => random_packet(run, window, n, &kinds, &mut rng)?,
                };
                packets.push(packet);
            }
            let lhs = strichartz_lhs(&packets, spec, &run.options)?;
            let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
            let rhs = constant.evaluate(&nf)?;
            let input_norm: f64 = packets.iter().map(|p| p.norm()).product();
            Ok(ProductNormReport {
                spec: spec.to_string(),
                k: run.k,
                label: fam.name().to_string(),
                point: p,
                trial,
                n: nf,
                lhs,
                rhs,
                input_norm,
                ratio: lhs / (rhs * input_norm),
                modes: packets.iter().map(|p| p.len()).collect(),
                conventions: CONVENTIONS,
            })
        })
        .collect();
    rows
}

/// Outcome of [`orthogonality_probe`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeResult {
    /// |⟨F_A, F_B⟩| / (‖F_A‖‖F_B‖) by direct integration.
    pub normalized: f64,
    /// ⟨F_A, F_B⟩ by the level-set expansion, unnormalized.
    pub level_set: f64,
    /// Whether the two products share no (Σ|ξ|², Σξ₁) key.
    pub keys_disjoint: bool,
}

/// Normalized inner product of (e^{itΔ}P_A f¹)(e^{itΔ}f²) against
/// (e^{itΔ}P_B f¹)(e^{itΔ}f²), where `pa`, `pb` are the two projections.
pub fn orthogonality_probe(pa: &Packet, pb: &Packet, f2: &Packet, opts: &LhsOptions) -> Result<ProbeResult> {
    let spec = pa.spec.clone();
    let ka = level_keys(&[pa, f2], opts.spectrum);
    let kb = level_keys(&[pb, f2], opts.spectrum);
    let keys_disjoint = ka.is_disjoint(&kb);
    let g = direct_gram(&[vec![pa, f2], vec![pb, f2]], &spec, opts)?;
    let denom = (g[0][0].re * g[1][1].re).max(0.0).sqrt();
    let normalized = if denom > 0.0 { g[0][1].norm() / denom } else { 0.0 };
    let level_set = cross_inner(&[pa, f2], &[pb, f2], &spec, opts)?.norm();
    Ok(ProbeResult {
        normalized,
        level_set,
        keys_disjoint,
    })
}

/// N_j as f64 with the convention that a constant factor has N = 1.
pub fn spectral_size(xi: &Frequency) -> f64 {
    (xi.norm2().to_f64().unwrap_or(f64::INFINITY)).sqrt().max(1.0)
}
