//! Torus exponential sums Σ a_ξ e^{−it|ξ|² + i⟨x₁,ξ₁⟩}, their space-time
//! Lebesgue norms, and the circle-method apparatus for quadratic Weyl sums.
//!
//! Sums in the (t, x₁) variables use period 2π. Weyl sums use period 1 and
//! the phase e^{2πi·}; [`level_set_measure`] converts between the two.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{fit_exponent, FitResult};
use crate::lattice::{enumerate_cube, level_sets, slab_decompose, Cube, Frequency};
use crate::numeric::{pairwise_sum, pairwise_sum_c, smooth_size, task_rng};
use crate::quadrature::{even_power, gauss_legendre};
use crate::regularity::{LpExponent, Q};

/// Default cap on grid points for a single norm evaluation.
pub const DEFAULT_GRID_BUDGET: u128 = 1 << 26;

/// Coefficients a_ξ on a finite set of frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    support: Vec<Frequency>,
    values: Vec<Complex64>,
}

impl CoefficientVector {
    pub fn new(support: Vec<Frequency>, values: Vec<Complex64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::InvalidArgument(
                "support and values differ in length".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(support.len());
        let rank = support.first().map(|f| f.rank());
        for f in &support {
            if Some(f.rank()) != rank {
                return Err(Error::InvalidArgument("frequencies of mixed rank".into()));
            }
            if !seen.insert(f) {
                return Err(Error::InvalidArgument(format!("duplicate frequency {f}")));
            }
        }
        Ok(Self { support, values })
    }

    pub fn constant(support: Vec<Frequency>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn support(&self) -> &[Frequency] {
        &self.support
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.support.first().map_or(0, |f| f.rank())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Frequency, &Complex64)> {
        self.support.iter().zip(&self.values)
    }

    pub fn norm2(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        pairwise_sum(&sq).sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            support: self.support.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Σ_ξ a_ξ e^{−it|ξ|² + i⟨x₁, ξ₁⟩}, where ξ₁ is the last `x1.len()`
/// coordinates of ξ.
pub fn exp_sum(a: &CoefficientVector, t: f64, x1: &[f64]) -> Complex64 {
    let r0 = a.rank().saturating_sub(x1.len());
    let terms: Vec<Complex64> = a
        .iter()
        .map(|(xi, c)| {
            let mut phase = -t * xi.norm2() as f64;
            for (x, &n) in x1.iter().zip(xi.torus_part(r0)) {
                phase += x * n as f64;
            }
            c * Complex64::from_polar(1.0, phase)
        })
        .collect();
    pairwise_sum_c(&terms)
}

/// Grid choice for [`exp_sum_norm`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GridSizing {
    /// Exact grids for even p, otherwise oversampling with a doubling check.
    Auto,
    /// Explicit points per axis (t first, then x₁).
    Fixed(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormOptions {
    pub raw_measure: bool,
    pub budget: u128,
    /// Relative tolerance of the doubling check for non-even p.
    pub tolerance: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            raw_measure: false,
            budget: DEFAULT_GRID_BUDGET,
            tolerance: 1e-6,
        }
    }
}

/// A computed norm together with the grid that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormValue {
    pub value: f64,
    pub grid: Vec<usize>,
    pub exact: bool,
}

/// Frequencies per axis: (−|ξ|², ξ₁) for each term, summed over collisions.
fn axis_terms(a: &CoefficientVector, r1: usize) -> Result<BTreeMap<Vec<i128>, Complex64>> {
    if r1 > a.rank() {
        return Err(Error::InvalidArgument(format!(
            "r1 = {r1} exceeds frequency rank {}",
            a.rank()
        )));
    }
    let r0 = a.rank() - r1;
    let mut out: BTreeMap<Vec<i128>, Complex64> = BTreeMap::new();
    for (xi, c) in a.iter() {
        let mut key = Vec::with_capacity(1 + r1);
        key.push(-xi.norm2());
        key.extend(xi.torus_part(r0).iter().map(|&n| n as i128));
        *out.entry(key).or_default() += c;
    }
    Ok(out)
}

fn spreads(terms: &BTreeMap<Vec<i128>, Complex64>, axes: usize) -> Vec<u128> {
    (0..axes)
        .map(|i| {
            let lo = terms.keys().map(|k| k[i]).min().unwrap_or(0);
            let hi = terms.keys().map(|k| k[i]).max().unwrap_or(0);
            (hi - lo) as u128
        })
        .collect()
}

/// Values of Σ c_k e^{i⟨k,θ⟩} on the uniform grid with `sizes` points per axis,
/// in row-major order. Requires every axis to be wider than the frequency
/// spread so that no two frequencies alias.
pub fn eval_on_grid(terms: &BTreeMap<Vec<i128>, Complex64>, sizes: &[usize]) -> Vec<Complex64> {
    let total: usize = sizes.iter().product();
    let mut data = vec![Complex64::zero(); total];
    for (k, c) in terms {
        let mut idx = 0usize;
        for (kk, &m) in k.iter().zip(sizes) {
            idx = idx * m + kk.rem_euclid(m as i128) as usize;
        }
        data[idx] += c;
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = 1usize;
    for axis in (0..sizes.len()).rev() {
        let m = sizes[axis];
        if m > 1 {
            let fft = planner.plan_fft_inverse(m);
            let outer = total / (m * stride);
            let mut line = vec![Complex64::zero(); m];
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * m * stride + s;
                    for j in 0..m {
                        line[j] = data[base + j * stride];
                    }
                    fft.process(&mut line);
                    for j in 0..m {
                        data[base + j * stride] = line[j];
                    }
                }
            }
        }
        stride *= m;
    }
    data
}

fn lp_mean(values: &[Complex64], p: LpExponent) -> f64 {
    match p {
        LpExponent::Infinity => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
        LpExponent::Finite(q) => {
            let pf = q.to_f64().unwrap_or(f64::NAN);
            let powers: Vec<f64> = values.iter().map(|v| v.norm().powf(pf)).collect();
            (pairwise_sum(&powers) / values.len() as f64).powf(1.0 / pf)
        }
    }
}

/// L^p norm over (t, x₁) ∈ [0,2π]^{1+r₁} of the exponential sum.
///
/// For even integer p the grid is sized so that |f|^p is integrated exactly;
/// other exponents use an oversampled grid refined by doubling until two
/// successive values agree to `opts.tolerance`.
pub fn exp_sum_norm(
    a: &CoefficientVector,
    p: LpExponent,
    r1: usize,
    sizing: &GridSizing,
    opts: &NormOptions,
) -> Result<NormValue> {
    if p < LpExponent::int(1) {
        return Err(Error::InvalidArgument(format!("exponent {p} below 1")));
    }
    let terms = axis_terms(a, r1)?;
    let axes = 1 + r1;
    let spread = spreads(&terms, axes);
    let raw_factor = |v: f64| match (opts.raw_measure, p) {
        (true, LpExponent::Finite(q)) => {
            v * (2.0 * PI).powf(axes as f64 / q.to_f64().unwrap_or(f64::NAN))
        }
        _ => v,
    };
    let check_budget = |sizes: &[usize]| -> Result<()> {
        let needed: u128 = sizes.iter().map(|&m| m as u128).product();
        if needed > opts.budget {
            return Err(Error::BudgetExceeded {
                what: "exponential-sum grid",
                needed,
                budget: opts.budget,
            });
        }
        Ok(())
    };
    let even = even_power(p);
    let exact_sizes: Option<Vec<usize>> =
        even.map(|pe| spread.iter().map(|&s| (pe as u128 / 2 * s + 1) as usize).collect());
    match sizing {
        GridSizing::Fixed(sizes) => {
            if sizes.len() != axes {
                return Err(Error::InvalidArgument(format!(
                    "grid has {} axes, need {axes}",
                    sizes.len()
                )));
            }
            if sizes.iter().zip(&spread).any(|(&m, &s)| (m as u128) <= s) {
                return Err(Error::InvalidArgument(
                    "grid too coarse: frequencies alias".into(),
                ));
            }
            let exact = match &exact_sizes {
                Some(need) => {
                    if sizes.iter().zip(need).any(|(m, n)| m < n) {
                        return Err(Error::InvalidArgument(format!(
                            "grid {sizes:?} too small for exact L^{p} (needs {need:?})"
                        )));
                    }
                    true
                }
                None => false,
            };
            check_budget(sizes)?;
            let v = lp_mean(&eval_on_grid(&terms, sizes), p);
            Ok(NormValue {
                value: raw_factor(v),
                grid: sizes.clone(),
                exact,
            })
        }
        GridSizing::Auto => {
            if let Some(need) = exact_sizes {
                let sizes: Vec<usize> = need.iter().map(|&m| smooth_size(m)).collect();
                check_budget(&sizes)?;
                let v = lp_mean(&eval_on_grid(&terms, &sizes), p);
                return Ok(NormValue {
                    value: raw_factor(v),
                    grid: sizes,
                    exact: true,
                });
            }
            let mut sizes: Vec<usize> = spread
                .iter()
                .map(|&s| smooth_size(4 * (s as usize + 1)))
                .collect();
            check_budget(&sizes)?;
            let mut prev = lp_mean(&eval_on_grid(&terms, &sizes), p);
            loop {
                let next_sizes: Vec<usize> = sizes.iter().map(|m| 2 * m).collect();
                check_budget(&next_sizes)?;
                let next = lp_mean(&eval_on_grid(&terms, &next_sizes), p);
                let done = (next - prev).abs() <= opts.tolerance * next.abs().max(f64::MIN_POSITIVE);
                sizes = next_sizes;
                prev = next;
                if done {
                    return Ok(NormValue {
                        value: raw_factor(prev),
                        grid: sizes,
                        exact: false,
                    });
                }
            }
        }
    }
}

/// Reference path: evaluates [`exp_sum`] pointwise on a uniform grid.
pub fn exp_sum_norm_direct(a: &CoefficientVector, p: LpExponent, r1: usize, sizes: &[usize]) -> f64 {
    let total: usize = sizes.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut idx = vec![0usize; sizes.len()];
    for _ in 0..total {
        let coords: Vec<f64> = idx
            .iter()
            .zip(sizes)
            .map(|(&j, &m)| 2.0 * PI * j as f64 / m as f64)
            .collect();
        values.push(exp_sum(a, coords[0], &coords[1..1 + r1]));
        for ax in (0..sizes.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < sizes[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    lp_mean(&values, p)
}

/// Σ over level sets (|ξ|², ξ₁) of |Σ a_ξ|², which equals the squared
/// L²_{t,x₁} norm by orthogonality.
pub fn level_set_l2_squared(a: &CoefficientVector, r1: usize) -> f64 {
    let r0 = a.rank().saturating_sub(r1);
    let coef: BTreeMap<&Frequency, Complex64> = a.iter().map(|(f, c)| (f, *c)).collect();
    let groups = level_sets(a.support(), r1 > 0, r0);
    let parts: Vec<f64> = groups
        .values()
        .map(|g| g.iter().map(|xi| coef[xi]).sum::<Complex64>().norm_sqr())
        .collect();
    pairwise_sum(&parts)
}

/// Coefficient families tried when maximizing norm ratios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Constant,
    RandomSigns,
    ComplexGaussian,
    SingleSlab,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Constant,
        Family::RandomSigns,
        Family::ComplexGaussian,
        Family::SingleSlab,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::RandomSigns => "random-signs",
            Family::ComplexGaussian => "complex-gaussian",
            Family::SingleSlab => "single-slab",
        }
    }

    fn is_random(&self) -> bool {
        matches!(self, Family::RandomSigns | Family::ComplexGaussian)
    }
}

/// Draws coefficients of `family` on `support`. For the single-slab family
/// `support` should already be the slab.
pub fn draw_coefficients<R: Rng>(
    family: Family,
    support: Vec<Frequency>,
    rng: &mut R,
) -> Result<CoefficientVector> {
    let values = match family {
        Family::Constant | Family::SingleSlab => vec![Complex64::new(1.0, 0.0); support.len()],
        Family::RandomSigns => (0..support.len())
            .map(|_| Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
            .collect(),
        Family::ComplexGaussian => (0..support.len())
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect(),
    };
    CoefficientVector::new(support, values)
}

/// The most populated slab of `cube` for thickness parameters (N₁, N₂).
/// A cube centered at the origin is first moved by its own side length.
pub fn largest_slab(cube: &Cube, n1: Q, n2: Q, r0: usize, budget: u128) -> Result<(Vec<Frequency>, Cube)> {
    let mut cube = cube.clone();
    if cube.center().iter().all(|v| v.is_zero()) {
        cube = Cube::new(cube.b.iter().map(|b| b + cube.side).collect(), cube.side)?;
    }
    let slabs = slab_decompose(&cube, n1, n2, r0, budget)?;
    let best = slabs
        .into_iter()
        .max_by(|a, b| a.points.len().cmp(&b.points.len()).then(b.m.cmp(&a.m)))
        .map(|s| s.points)
        .unwrap_or_default();
    Ok((best, cube))
}

/// One measured ratio ‖Σ‖_{L^p}/‖a‖_{ℓ²}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    #[serde(rename = "N")]
    pub n: i64,
    pub p: String,
    pub r0: usize,
    pub r1: usize,
    pub family: &'static str,
    pub shift: usize,
    pub ratio: f64,
}

/// Ratios for one N, aggregated over families and shifts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftSummary {
    #[serde(rename = "N")]
    pub n: i64,
    pub max_ratio: f64,
    /// Maximum over families at each shift; index 0 is b = 0.
    pub per_shift: Vec<f64>,
}

impl ShiftSummary {
    /// Largest shifted value relative to the unshifted one, minus one.
    pub fn excess_over_unshifted(&self) -> f64 {
        let base = self.per_shift[0];
        self.per_shift.iter().cloned().fold(0.0, f64::max) / base - 1.0
    }

    /// (max − min)/max over shifts.
    pub fn relative_spread(&self) -> f64 {
        let hi = self.per_shift.iter().cloned().fold(0.0, f64::max);
        let lo = self.per_shift.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi - lo) / hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumReport {
    pub fit: Option<FitResult>,
    pub rows: Vec<RatioRow>,
    pub summaries: Vec<ShiftSummary>,
}

/// Parameters of the exponential-sum sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct SumSweep {
    pub r0: usize,
    pub r1: usize,
    pub p: LpExponent,
    pub n_list: Vec<i64>,
    pub trials: usize,
    pub seed: u64,
    /// Number of random shifts in addition to b = 0.
    pub shifts: usize,
    pub families: Vec<Family>,
    pub budget: u128,
}

impl SumSweep {
    pub fn new(r0: usize, r1: usize, p: LpExponent, n_list: Vec<i64>) -> Self {
        Self {
            r0,
            r1,
            p,
            n_list,
            trials: 1,
            seed: 0,
            shifts: 20,
            families: Family::ALL.to_vec(),
            budget: DEFAULT_GRID_BUDGET,
        }
    }

    fn rank(&self) -> usize {
        self.r0 + self.r1
    }
}

/// Random quarter-integer shift: in [0, N²] for sphere coordinates and
/// [−N², N²] for torus coordinates.
fn random_shift<R: Rng>(n: i64, r0: usize, r: usize, rng: &mut R) -> Vec<Q> {
    let reach = 4 * n * n;
    (0..r)
        .map(|i| {
            let lo = if i < r0 { 0 } else { -reach };
            Q::new(rng.random_range(lo..=reach), 4)
        })
        .collect()
}

fn shift_list(sweep: &SumSweep, n: i64) -> Vec<Vec<Q>> {
    let r = sweep.rank();
    let mut out = vec![vec![Q::zero(); r]];
    let mut rng = task_rng(sweep.seed, n as u64, u64::MAX);
    for _ in 0..sweep.shifts {
        out.push(random_shift(n, sweep.r0, r, &mut rng));
    }
    out
}

fn ratio_for(
    sweep: &SumSweep,
    family: Family,
    cube: &Cube,
    n1: Q,
    n2: Q,
    task: (u64, u64),
) -> Result<f64> {
    let support = if family == Family::SingleSlab {
        largest_slab(cube, n1, n2, sweep.r0, sweep.budget)?.0
    } else {
        enumerate_cube(cube, sweep.r0, sweep.budget)?
    };
    if support.is_empty() {
        return Ok(0.0);
    }
    let draws = if family.is_random() { sweep.trials.max(1) } else { 1 };
    let mut best: f64 = 0.0;
    for trial in 0..draws {
        let mut rng = task_rng(sweep.seed, task.0, task.1 * 4096 + trial as u64);
        let a = draw_coefficients(family, support.clone(), &mut rng)?;
        let opts = NormOptions {
            budget: sweep.budget,
            ..NormOptions::default()
        };
        let v = exp_sum_norm(&a, sweep.p, sweep.r1, &GridSizing::Auto, &opts)?;
        best = best.max(v.value / a.norm2());
    }
    Ok(best)
}

fn run_sum_sweep(sweep: &SumSweep, thickness: impl Fn(i64) -> (Q, Q, i64) + Sync) -> Result<SumReport> {
    let mut tasks = Vec::new();
    for &n in &sweep.n_list {
        for (si, b) in shift_list(sweep, n).into_iter().enumerate() {
            for &family in &sweep.families {
                tasks.push((n, si, b.clone(), family));
            }
        }
    }
    let results: Vec<Result<RatioRow>> = tasks
        .par_iter()
        .map(|(n, si, b, family)| {
            let (n1, n2, side) = thickness(*n);
            let cube = Cube::new(b.clone(), Q::from_integer(side))?;
            let task = (*n as u64 * 1024 + *si as u64, *family as u64);
            let ratio = ratio_for(sweep, *family, &cube, n1, n2, task)?;
            Ok(RatioRow {
                n: *n,
                p: sweep.p.to_string(),
                r0: sweep.r0,
                r1: sweep.r1,
                family: family.name(),
                shift: *si,
                ratio,
            })
        })
        .collect();
    let rows: Vec<RatioRow> = results.into_iter().collect::<Result<_>>()?;
    let mut summaries = Vec::new();
    for &n in &sweep.n_list {
        let mut per_shift = vec![0.0f64; sweep.shifts + 1];
        for row in rows.iter().filter(|r| r.n == n) {
            per_shift[row.shift] = per_shift[row.shift].max(row.ratio);
        }
        summaries.push(ShiftSummary {
            n,
            max_ratio: per_shift.iter().cloned().fold(0.0, f64::max),
            per_shift,
        });
    }
    let points: Vec<(f64, f64)> = summaries.iter().map(|s| (s.n as f64, s.max_ratio)).collect();
    let fit = fit_exponent(&points, 0).ok();
    Ok(SumReport {
        fit,
        rows,
        summaries,
    })
}

/// Ratios of ‖Σ‖_{L^p_{t,x₁}} to ‖a‖_{ℓ²} for coefficients on shifted cubes
/// of side N, maximized over families and shifts, with a log-log fit in N.
///
/// The single-slab family takes the thickest slab for (N₁, N₂) = (N², N),
/// i.e. a layer of thickness one.
pub fn verify_i1(sweep: &SumSweep) -> Result<SumReport> {
    run_sum_sweep(sweep, |n| (Q::from_integer(n * n), Q::from_integer(n), n))
}

/// One N₂ of a slab sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabRow {
    pub n1: i64,
    pub n2: i64,
    pub thickness: String,
    pub slab_size: usize,
    pub max_ratio: f64,
    /// ‖Σ‖_∞/‖a‖ on the grid; never exceeds √|K_m|.
    pub linf_ratio: f64,
    pub gain_base: f64,
    /// log(max_ratio / N₂^{s}) / log(gain_base), s the exponent without gain.
    pub measured_gain_exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabReport {
    pub fit: Option<FitResult>,
    pub rows: Vec<SlabRow>,
}

/// Ratios for coefficients on one slab of a side-N₂ cube, N₁ = N₂^κ.
///
/// `base_exponent` is the exponent of N₂ in the bound without gain; the
/// report measures how far below N₂^{base_exponent} the ratios fall, in
/// units of log(N₂/N₁ + 1/N₂).
pub fn verify_i2(sweep: &SumSweep, kappa: u32, base_exponent: f64) -> Result<SlabReport> {
    let mut rows = Vec::new();
    for &n2 in &sweep.n_list {
        let n1 = n2.pow(kappa);
        let cube = Cube::new(
            (0..sweep.rank()).map(|_| Q::from_integer(n2)).collect(),
            Q::from_integer(n2),
        )?;
        let (slab, _) = largest_slab(&cube, Q::from_integer(n1), Q::from_integer(n2), sweep.r0, sweep.budget)?;
        if slab.is_empty() {
            continue;
        }
        let mut best: f64 = 0.0;
        let mut linf: f64 = 0.0;
        for family in &sweep.families {
            let draws = if family.is_random() { sweep.trials.max(1) } else { 1 };
            for trial in 0..draws {
                let mut rng = task_rng(sweep.seed, n2 as u64, *family as u64 * 4096 + trial as u64);
                let a = draw_coefficients(*family, slab.clone(), &mut rng)?;
                let opts = NormOptions {
                    budget: sweep.budget,
                    ..NormOptions::default()
                };
                let v = exp_sum_norm(&a, sweep.p, sweep.r1, &GridSizing::Auto, &opts)?;
                let vinf = exp_sum_norm(
                    &a,
                    LpExponent::Infinity,
                    sweep.r1,
                    &GridSizing::Fixed(v.grid.clone()),
                    &opts,
                )?;
                best = best.max(v.value / a.norm2());
                linf = linf.max(vinf.value / a.norm2());
            }
        }
        let gain_base = n2 as f64 / n1 as f64 + 1.0 / n2 as f64;
        let reference = (n2 as f64).powf(base_exponent);
        let measured = if (gain_base - 1.0).abs() > 1e-12 {
            (best / reference).ln() / gain_base.ln()
        } else {
            f64::NAN
        };
        rows.push(SlabRow {
            n1,
            n2,
            thickness: crate::regularity::fmt_q(&crate::lattice::slab_thickness(
                Q::from_integer(n1),
                Q::from_integer(n2),
            )),
            slab_size: slab.len(),
            max_ratio: best,
            linf_ratio: linf,
            gain_base,
            measured_gain_exponent: measured,
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n2 as f64, r.max_ratio)).collect();
    Ok(SlabReport {
        fit: fit_exponent(&points, 0).ok(),
        rows,
    })
}

/// Raised-cosine cutoff σ_b: 1 on [b, b+N], 0 outside (b−N, b+2N).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CutoffSeq {
    pub b: i64,
    pub n: i64,
}

/// Measured constants of the two cutoff conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CutoffReport {
    /// N · max |σ(n+1) − σ(n)|.
    pub increment_constant: f64,
    /// N · Σ |σ(n+2) − 2σ(n+1) + σ(n)|.
    pub variation_constant: f64,
}

pub fn build_cutoff(b: i64, n: i64) -> Result<CutoffSeq> {
    if n < 2 {
        return Err(Error::InvalidArgument("cutoff needs N >= 2".into()));
    }
    Ok(CutoffSeq { b, n })
}

impl CutoffSeq {
    pub fn value(&self, m: i64) -> f64 {
        let x = m - self.b;
        let n = self.n;
        if x <= -n || x >= 2 * n {
            0.0
        } else if x < 0 {
            0.5 * (1.0 - (PI * (x + n) as f64 / n as f64).cos())
        } else if x <= n {
            1.0
        } else {
            0.5 * (1.0 - (PI * (2 * n - x) as f64 / n as f64).cos())
        }
    }

    /// Integers where σ may be nonzero.
    pub fn support(&self) -> std::ops::RangeInclusive<i64> {
        (self.b - self.n + 1)..=(self.b + 2 * self.n - 1)
    }

    pub fn report(&self) -> CutoffReport {
        let lo = self.b - self.n - 2;
        let hi = self.b + 2 * self.n + 2;
        let vals: Vec<f64> = (lo..=hi).map(|m| self.value(m)).collect();
        let inc: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
        let max_inc = inc.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let var: f64 = inc.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        CutoffReport {
            increment_constant: max_inc * self.n as f64,
            variation_constant: var * self.n as f64,
        }
    }
}

/// f_b(t) = Σ σ_b(n)² e^{2πitn²}.
pub fn weyl_sum(c: &CutoffSeq, t: f64) -> Complex64 {
    let frac = t - t.floor();
    let terms: Vec<Complex64> = c
        .support()
        .map(|m| {
            let s = c.value(m);
            let sq = (m as i128 * m as i128) as f64;
            let phase = (frac * sq).fract();
            Complex64::from_polar(s * s, 2.0 * PI * phase)
        })
        .collect();
    pairwise_sum_c(&terms)
}

/// f_b at t = a/q + β, reducing a·n² modulo q exactly.
pub fn weyl_sum_at(c: &CutoffSeq, a: i64, q: i64, beta: f64) -> Complex64 {
    let terms: Vec<Complex64> = c
        .support()
        .map(|m| {
            let s = c.value(m);
            let sq = m as i128 * m as i128;
            let r = (a as i128 * sq).rem_euclid(q as i128) as f64 / q as f64;
            let phase = r + (beta * sq as f64).fract();
            Complex64::from_polar(s * s, 2.0 * PI * phase)
        })
        .collect();
    pairwise_sum_c(&terms)
}

/// a/q in lowest terms with 1 ≤ a ≤ q.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct RationalApprox {
    pub a: i64,
    pub q: i64,
}

impl RationalApprox {
    pub fn value(&self) -> f64 {
        self.a as f64 / self.q as f64
    }
}

/// Distance from t to a/q on ℝ/ℤ.
pub fn circle_distance(t: f64, a: i64, q: i64) -> f64 {
    let d = (t - a as f64 / q as f64).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Dirichlet approximation by continued fractions: q ≤ Q and
/// |t − a/q| < 1/(qQ), with the distance taken on ℝ/ℤ when a/q = 1/1
/// stands for 0.
pub fn dirichlet_approx(t: f64, big_q: u64) -> Result<RationalApprox> {
    if !(0.0..=1.0).contains(&t) || big_q == 0 {
        return Err(Error::InvalidArgument(format!(
            "need t in [0,1] and Q >= 1, got ({t}, {big_q})"
        )));
    }
    let x = BigRational::from_float(t).expect("finite t");
    let big_q = BigInt::from(big_q);
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    let mut rest = x;
    loop {
        let a = rest.floor().to_integer();
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        if q2 > big_q {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = &rest - BigRational::from_integer(a);
        if frac.is_zero() {
            break;
        }
        rest = frac.recip();
    }
    // p1/q1 is the last convergent with denominator ≤ Q.
    let mut a = p1.to_i64().expect("small numerator");
    let mut q = q1.to_i64().expect("small denominator");
    let g = a.gcd(&q);
    a /= g;
    q /= g;
    if a == 0 {
        a = 1;
        q = 1;
    }
    Ok(RationalApprox { a, q })
}

/// Major arc M(a,q) around a/q, or the minor arcs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ArcLabel {
    Major { a: i64, q: i64 },
    Minor,
}

/// Largest q with q¹⁰ ≤ N.
fn major_q_bound(n: i64) -> i64 {
    let mut q = 1i64;
    while ((q + 1) as i128).pow(10) <= n as i128 {
        q += 1;
    }
    q
}

/// Major if |t − a/q| ≤ N^{1/10−2} on ℝ/ℤ for some q ≤ N^{1/10}, gcd(a,q)=1;
/// the smallest such q is reported. Decided by enumerating all a/q.
pub fn classify_arc(t: f64, n: i64) -> ArcLabel {
    let width = (n as f64).powf(0.1 - 2.0);
    for q in 1..=major_q_bound(n) {
        for a in 1..=q {
            if a.gcd(&q) == 1 && circle_distance(t, a, q) <= width {
                return ArcLabel::Major { a, q };
            }
        }
    }
    ArcLabel::Minor
}

/// A point a/q + offset·N⁻² near a rational.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArcSample {
    pub a: i64,
    pub q: i64,
    pub offset: f64,
}

/// max over samples and shifts of |f_b(t)|·q^{1/2}·(|t − a/q| + N⁻²)^{1/2}.
pub fn major_arc_ratio(n: i64, samples: &[ArcSample], b_samples: &[i64]) -> Result<f64> {
    let n2 = (n as f64).powi(-2);
    let mut best: f64 = 0.0;
    for s in samples {
        let beta = s.offset * n2;
        if !(s.q >= 1 && s.q < n && beta.abs() < 1.0 / (s.q as f64 * n as f64)) {
            return Err(Error::InvalidArgument(format!(
                "sample {}/{} + {beta:e} outside the major-arc range",
                s.a, s.q
            )));
        }
        for &b in b_samples {
            let c = build_cutoff(b, n)?;
            let f = weyl_sum_at(&c, s.a, s.q, beta).norm();
            best = best.max(f * (s.q as f64).sqrt() * (beta.abs() + n2).sqrt());
        }
    }
    Ok(best)
}

/// max over samples and shifts of |f_b(t)|/N^{1−1/20}; rejects major samples.
pub fn minor_arc_ratio(n: i64, t_samples: &[f64], b_samples: &[i64]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for &t in t_samples {
        if let ArcLabel::Major { a, q } = classify_arc(t, n) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} lies on the major arc around {a}/{q} for N = {n}"
            )));
        }
        for &b in b_samples {
            let c = build_cutoff(b, n)?;
            best = best.max(weyl_sum(&c, t).norm() / (n as f64).powf(0.95));
        }
    }
    Ok(best)
}

/// Major and minor arc ratios at one N.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArcRow {
    #[serde(rename = "N")]
    pub n: i64,
    pub major_ratio: f64,
    pub minor_ratio: f64,
    pub minor_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArcReport {
    pub rows: Vec<ArcRow>,
    /// Log-log fit of the major ratio in N.
    pub major_fit: Option<FitResult>,
    /// Largest minor ratio relative to the first N.
    pub minor_growth: f64,
}

/// Sample points a/q + offset·N⁻² with q ≤ `max_q` and offsets {0, 1/2, 2}.
pub fn major_samples(n: i64, max_q: i64) -> Vec<ArcSample> {
    let mut out = Vec::new();
    for q in 1..=max_q.min(n - 1) {
        for a in 1..=q {
            if a.gcd(&q) != 1 {
                continue;
            }
            for offset in [0.0, 0.5, 2.0] {
                if offset < n as f64 / q as f64 {
                    out.push(ArcSample { a, q, offset });
                }
            }
        }
    }
    out
}

/// Runs [`major_arc_ratio`] and [`minor_arc_ratio`] over `n_list` with
/// `shifts` cutoff offsets b ∈ [−N, N] and `minor` random minor-arc points.
/// The same seed gives the same shifts and points for every N; points that
/// fall on a major arc for a given N are skipped there.
pub fn arc_sweep(n_list: &[i64], shifts: usize, minor: usize, seed: u64) -> Result<ArcReport> {
    let mut rng = task_rng(seed, 0, 0);
    let t_pool: Vec<f64> = (0..minor).map(|_| rng.random::<f64>()).collect();
    let rows: Result<Vec<ArcRow>> = n_list
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut brng = task_rng(seed, 1, i as u64);
            let mut bs = vec![0i64];
            bs.extend((1..shifts.max(1)).map(|_| brng.random_range(-n..=n)));
            let major = major_arc_ratio(n, &major_samples(n, 4), &bs)?;
            let ts: Vec<f64> = t_pool
                .iter()
                .copied()
                .filter(|&t| classify_arc(t, n) == ArcLabel::Minor)
                .collect();
            let minor_ratio = minor_arc_ratio(n, &ts, &bs)?;
            Ok(ArcRow {
                n,
                major_ratio: major,
                minor_ratio,
                minor_samples: ts.len(),
            })
        })
        .collect();
    let rows = rows?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.major_ratio)).collect();
    let base = rows.first().map_or(1.0, |r| r.minor_ratio);
    let minor_growth = rows.iter().map(|r| r.minor_ratio / base).fold(0.0, f64::max);
    Ok(ArcReport {
        major_fit: fit_exponent(&points, 0).ok(),
        rows,
        minor_growth,
    })
}

/// Measured size of a superlevel set of a cut-off exponential sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelSetMeasure {
    pub measure: f64,
    /// N⁻² δ^{−2−ε}.
    pub reference: f64,
    pub grid: usize,
}

/// Fraction of t ∈ [0,1) where |Σ σ_b(ξ) a_ξ e^{−2πit|ξ|²}| > δ N^{r/2},
/// with σ_b(ξ) = ∏ σ_{bᵢ}(ξᵢ).
pub fn level_set_measure(
    a: &CoefficientVector,
    cutoffs: &[CutoffSeq],
    n: i64,
    delta: f64,
    eps: f64,
    budget: u128,
) -> Result<LevelSetMeasure> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")));
    }
    if cutoffs.len() != a.rank() {
        return Err(Error::InvalidArgument("one cutoff per coordinate required".into()));
    }
    let mut terms: BTreeMap<Vec<i128>, Complex64> = BTreeMap::new();
    for (xi, c) in a.iter() {
        let w: f64 = xi.0.iter().zip(cutoffs).map(|(&m, s)| s.value(m)).product();
        if w != 0.0 {
            *terms.entry(vec![-xi.norm2()]).or_default() += c * w;
        }
    }
    let spread = spreads(&terms, 1)[0];
    let m = smooth_size(8 * (spread as usize + 1));
    if m as u128 > budget {
        return Err(Error::BudgetExceeded {
            what: "level-set grid",
            needed: m as u128,
            budget,
        });
    }
    let vals = eval_on_grid(&terms, &[m]);
    let r = a.rank() as i32;
    let level = delta * (n as f64).powf(r as f64 / 2.0);
    let above = vals.iter().filter(|v| v.norm() > level).count();
    Ok(LevelSetMeasure {
        measure: above as f64 / m as f64,
        reference: (n as f64).powi(-2) * delta.powf(-2.0 - eps),
        grid: m,
    })
}

/// F(θ) = (N²|sin θ| + 1)^{−rγ/2}.
pub fn eval_f(theta: f64, n: i64, r: u32, gamma: f64) -> f64 {
    ((n as f64).powi(2) * theta.sin().abs() + 1.0).powf(-(r as f64) * gamma / 2.0)
}

/// G(t) = Σ_{q ≤ Q} Σ_{1 ≤ a ≤ q, gcd(a,q)=1} q^{−rγ/2} F(t − a/q).
pub fn eval_g(t: f64, n: i64, big_q: i64, r: u32, gamma: f64) -> Result<f64> {
    if !(r as f64 * gamma > 2.0) {
        return Err(Error::InvalidArgument("need r*gamma > 2".into()));
    }
    let mut terms = Vec::new();
    for q in 1..=big_q {
        for a in 1..=q {
            if a.gcd(&q) == 1 {
                let w = (q as f64).powf(-(r as f64) * gamma / 2.0);
                terms.push(w * eval_f(t - a as f64 / q as f64, n, r, gamma));
            }
        }
    }
    Ok(pairwise_sum(&terms))
}

/// ‖F‖_{L¹[0,2π]} (raw measure) by composite Gauss–Legendre on panels
/// graded geometrically towards the zeros of sin θ.
pub fn f_l1_norm(n: i64, r: u32, gamma: f64) -> Result<f64> {
    if !(r as f64 * gamma > 2.0) {
        return Err(Error::InvalidArgument("need r*gamma > 2".into()));
    }
    let (xs, ws) = gauss_legendre(24)?;
    let h = (n as f64).powi(-2);
    let mut edges = vec![0.0];
    let mut e = h;
    while e < PI / 2.0 {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(PI / 2.0);
    let mut parts = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = (hi - lo) / 2.0;
        for (x, wt) in xs.iter().zip(&ws) {
            // Weights sum to one on [−1,1], so the panel length is 2·half.
            parts.push(2.0 * half * wt * eval_f(lo + half * (x + 1.0), n, r, gamma));
        }
    }
    // |sin θ| is symmetric about π/2 and π-periodic.
    Ok(4.0 * pairwise_sum(&parts))
}
