//! Exponent arithmetic for products of spheres and tori.
//!
//! Everything here is exact: exponents are rationals, and the free slack
//! parameters (ε, η, δ) are carried as coefficients of a linear form until a
//! numeric value is requested.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational used for every exponent.
pub type Q = Ratio<i64>;

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

fn qi(n: i64) -> Q {
    Q::from_integer(n)
}

/// Formats a rational as `n` or `n/d`.
pub fn fmt_q(v: &Q) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn q_to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// A product 𝕊^{d₁} × … × 𝕊^{d_{r₀}} × 𝕋^{r₁}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ManifoldSpec {
    sphere_dims: Vec<u32>,
    torus_dim: u32,
}

/// The smallest sphere dimension different from two, with `Infinite` for
/// the empty minimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MinDim {
    Finite(u32),
    Infinite,
}

impl ManifoldSpec {
    pub fn new(sphere_dims: Vec<u32>, torus_dim: u32) -> Result<Self> {
        if let Some(d) = sphere_dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidManifold(format!(
                "sphere dimension {d} is below 2"
            )));
        }
        if sphere_dims.is_empty() && torus_dim == 0 {
            return Err(Error::InvalidManifold(
                "product needs at least one factor".into(),
            ));
        }
        Ok(Self {
            sphere_dims,
            torus_dim,
        })
    }

    pub fn spheres(dims: &[u32]) -> Result<Self> {
        Self::new(dims.to_vec(), 0)
    }

    pub fn torus(dim: u32) -> Result<Self> {
        Self::new(Vec::new(), dim)
    }

    pub fn sphere_dims(&self) -> &[u32] {
        &self.sphere_dims
    }

    pub fn sphere_count(&self) -> usize {
        self.sphere_dims.len()
    }

    pub fn torus_dim(&self) -> usize {
        self.torus_dim as usize
    }

    /// Number of factors.
    pub fn rank(&self) -> usize {
        self.sphere_count() + self.torus_dim()
    }

    /// Total dimension.
    pub fn dim(&self) -> u32 {
        self.sphere_dims.iter().sum::<u32>() + self.torus_dim
    }

    pub fn two_sphere_count(&self) -> usize {
        self.sphere_dims.iter().filter(|&&d| d == 2).count()
    }

    pub fn three_sphere_count(&self) -> usize {
        self.sphere_dims.iter().filter(|&&d| d == 3).count()
    }

    pub fn min_non_two_dim(&self) -> MinDim {
        self.sphere_dims
            .iter()
            .copied()
            .filter(|&d| d != 2)
            .min()
            .map_or(MinDim::Infinite, MinDim::Finite)
    }

    pub fn all_spheres_odd(&self) -> bool {
        self.sphere_dims.iter().all(|d| d % 2 == 1)
    }

    pub fn is_sphere_only(&self) -> bool {
        self.torus_dim == 0 && !self.sphere_dims.is_empty()
    }

    fn half_dim(&self) -> Q {
        q(self.dim() as i64, 2)
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.sphere_dims.iter().map(|d| format!("S^{d}")).collect();
        if self.torus_dim > 0 {
            parts.push(format!("T^{}", self.torus_dim));
        }
        write!(f, "{}", parts.join(" x "))
    }
}

/// A Lebesgue exponent in [1, ∞].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LpExponent {
    Finite(Q),
    Infinity,
}

impl LpExponent {
    pub fn int(p: i64) -> Self {
        Self::Finite(qi(p))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Self::Finite(q(n, d))
    }

    /// 1/p, zero at infinity.
    pub fn recip(&self) -> Q {
        match self {
            Self::Finite(p) => p.recip(),
            Self::Infinity => Q::zero(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Self::Finite(p) => q_to_f64(p),
            Self::Infinity => f64::INFINITY,
        }
    }
}

impl PartialOrd for LpExponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LpExponent {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => a.cmp(b),
            (Self::Finite(_), Self::Infinity) => Ordering::Less,
            (Self::Infinity, Self::Finite(_)) => Ordering::Greater,
            (Self::Infinity, Self::Infinity) => Ordering::Equal,
        }
    }
}

impl std::str::FromStr for LpExponent {
    type Err = Error;

    /// Accepts `4`, `10/3` or `inf`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Self::Infinity);
        }
        let bad = || Error::InvalidArgument(format!("cannot parse exponent '{s}'"));
        let v = match s.split_once('/') {
            Some((n, d)) => {
                let d: i64 = d.trim().parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(bad());
                }
                q(n.trim().parse().map_err(|_| bad())?, d)
            }
            None => qi(s.parse().map_err(|_| bad())?),
        };
        if v < qi(1) {
            return Err(Error::InvalidArgument(format!("exponent {s} is below 1")));
        }
        Ok(Self::Finite(v))
    }
}

impl fmt::Display for LpExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(p) => write!(f, "{}", fmt_q(p)),
            Self::Infinity => write!(f, "inf"),
        }
    }
}

/// Numeric values for the slack symbols.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlackValues {
    pub eps: f64,
    pub eta: f64,
    pub delta: f64,
}

/// `constant + eps·ε + eta·η + delta·δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SlackExpr {
    pub constant: Q,
    pub eps: Q,
    pub eta: Q,
    pub delta: Q,
}

impl Default for SlackExpr {
    fn default() -> Self {
        Self::constant(Q::zero())
    }
}

impl SlackExpr {
    pub fn constant(c: Q) -> Self {
        Self {
            constant: c,
            eps: Q::zero(),
            eta: Q::zero(),
            delta: Q::zero(),
        }
    }

    pub fn eps() -> Self {
        Self {
            eps: Q::one(),
            ..Self::default()
        }
    }

    pub fn eta() -> Self {
        Self {
            eta: Q::one(),
            ..Self::default()
        }
    }

    pub fn delta() -> Self {
        Self {
            delta: Q::one(),
            ..Self::default()
        }
    }

    pub fn is_constant(&self) -> bool {
        self.eps.is_zero() && self.eta.is_zero() && self.delta.is_zero()
    }

    pub fn evaluate(&self, slack: &SlackValues) -> f64 {
        q_to_f64(&self.constant)
            + q_to_f64(&self.eps) * slack.eps
            + q_to_f64(&self.eta) * slack.eta
            + q_to_f64(&self.delta) * slack.delta
    }

    /// Ordering with every slack symbol treated as a positive infinitesimal.
    fn infinitesimal_cmp(&self, other: &Self) -> Ordering {
        self.constant
            .cmp(&other.constant)
            .then((self.eps + self.eta + self.delta).cmp(&(other.eps + other.eta + other.delta)))
    }
}

impl Add for SlackExpr {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            constant: self.constant + o.constant,
            eps: self.eps + o.eps,
            eta: self.eta + o.eta,
            delta: self.delta + o.delta,
        }
    }
}

impl Sub for SlackExpr {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for SlackExpr {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            constant: -self.constant,
            eps: -self.eps,
            eta: -self.eta,
            delta: -self.delta,
        }
    }
}

impl Mul<Q> for SlackExpr {
    type Output = Self;
    fn mul(self, c: Q) -> Self {
        Self {
            constant: self.constant * c,
            eps: self.eps * c,
            eta: self.eta * c,
            delta: self.delta * c,
        }
    }
}

impl From<Q> for SlackExpr {
    fn from(c: Q) -> Self {
        Self::constant(c)
    }
}

impl fmt::Display for SlackExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = fmt_q(&self.constant);
        for (coef, sym) in [(self.eps, "eps"), (self.eta, "eta"), (self.delta, "delta")] {
            if coef.is_zero() {
                continue;
            }
            let sign = if coef.is_negative() { " - " } else { " + " };
            let mag = coef.abs();
            if mag.is_one() {
                out.push_str(&format!("{sign}{sym}"));
            } else {
                out.push_str(&format!("{sign}{}{sym}", fmt_q(&mag)));
            }
        }
        write!(f, "{out}")
    }
}

/// Which ratio the frequency-separation gain is raised on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GainRatio {
    /// N₂/N₁ + 1/N₂
    SecondOverFirst,
    /// N_{k+1}/N₁ + 1/N₂
    LastOverFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gain {
    pub ratio: GainRatio,
    pub exponent: SlackExpr,
}

/// Symbolic constant ∏ N_j^{e_j} (log N_j)^{l_j} × gain^δ.
///
/// Indices are 1-based, matching N₁ ≥ N₂ ≥ … ≥ N_{k+1}. Log powers are
/// evaluated as `(1 + ln N)^l` so the constant stays positive at `N = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateConstant {
    pub label: &'static str,
    pub multilinearity: u32,
    pub base_exponents: BTreeMap<usize, SlackExpr>,
    pub log_powers: BTreeMap<usize, Q>,
    pub gain: Option<Gain>,
    pub epsilon_slack: bool,
    pub slack: SlackValues,
}

impl EstimateConstant {
    fn new(label: &'static str, k: u32, slack: SlackValues) -> Self {
        Self {
            label,
            multilinearity: k,
            base_exponents: BTreeMap::new(),
            log_powers: BTreeMap::new(),
            gain: None,
            epsilon_slack: false,
            slack,
        }
    }

    fn set(&mut self, j: usize, e: SlackExpr) {
        if e != SlackExpr::default() {
            self.base_exponents.insert(j, e);
        }
    }

    pub fn exponent(&self, j: usize) -> SlackExpr {
        self.base_exponents.get(&j).copied().unwrap_or_default()
    }

    pub fn log_power(&self, j: usize) -> Q {
        self.log_powers.get(&j).copied().unwrap_or_else(Q::zero)
    }

    /// Sum of all base exponents, i.e. the exponent when every N_j is equal.
    pub fn total_exponent(&self) -> SlackExpr {
        self.base_exponents
            .values()
            .fold(SlackExpr::default(), |acc, e| acc + *e)
    }

    pub fn evaluate(&self, n: &[f64]) -> Result<f64> {
        self.evaluate_with(n, &self.slack, true)
    }

    pub fn evaluate_without_gain(&self, n: &[f64]) -> Result<f64> {
        self.evaluate_with(n, &self.slack, false)
    }

    pub fn evaluate_with(&self, n: &[f64], slack: &SlackValues, with_gain: bool) -> Result<f64> {
        let need = self.multilinearity as usize + 1;
        if n.len() != need {
            return Err(Error::InvalidArgument(format!(
                "expected {need} spectral parameters, got {}",
                n.len()
            )));
        }
        if n.iter().any(|&x| !(x >= 1.0)) {
            return Err(Error::InvalidArgument(
                "spectral parameters must be >= 1".into(),
            ));
        }
        let mut value = 1.0;
        for (&j, e) in &self.base_exponents {
            value *= n[j - 1].powf(e.evaluate(slack));
        }
        for (&j, l) in &self.log_powers {
            value *= (1.0 + n[j - 1].ln()).powf(q_to_f64(l));
        }
        if with_gain {
            if let Some(g) = &self.gain {
                let top = match g.ratio {
                    GainRatio::SecondOverFirst => n[1],
                    GainRatio::LastOverFirst => n[need - 1],
                };
                let base = top / n[0] + 1.0 / n[1];
                value *= base.powf(g.exponent.evaluate(slack));
            }
        }
        Ok(value)
    }
}

impl fmt::Display for EstimateConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(g) = &self.gain {
            let r = match g.ratio {
                GainRatio::SecondOverFirst => "(N2/N1 + 1/N2)".to_string(),
                GainRatio::LastOverFirst => format!("(N{}/N1 + 1/N2)", self.multilinearity + 1),
            };
            parts.push(format!("{r}^({})", g.exponent));
        }
        for (j, e) in &self.base_exponents {
            parts.push(format!("N{j}^({e})"));
        }
        for (j, l) in &self.log_powers {
            if !l.is_zero() {
                parts.push(format!("log(N{j})^({})", fmt_q(l)));
            }
        }
        if parts.is_empty() {
            parts.push("1".into());
        }
        write!(f, "{}", parts.join(" * "))
    }
}

/// Free parameters of the multilinear estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeParams {
    /// Upper end of the admissible δ range; δ defaults to half of it.
    pub delta0: Option<f64>,
    pub eta: f64,
    pub eps: f64,
}

impl Default for FreeParams {
    fn default() -> Self {
        Self {
            delta0: None,
            eta: 1e-3,
            eps: 1e-3,
        }
    }
}

impl FreeParams {
    pub fn delta(&self) -> f64 {
        self.delta0.map_or(0.0, |d| d / 2.0)
    }

    pub fn slack(&self) -> SlackValues {
        SlackValues {
            eps: self.eps,
            eta: self.eta,
            delta: self.delta(),
        }
    }
}

/// s_c = d/2 − 1/k.
pub fn critical_regularity(spec: &ManifoldSpec, k: u32) -> Result<Q> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    Ok(spec.half_dim() - q(1, k as i64))
}

/// Both branches of the sphere projector exponent at `p`:
/// `((dim−1)/2 − dim/p, (dim−1)/2·(1/2 − 1/p))`.
pub fn sogge_branches(p: LpExponent, dim: u32) -> (Q, Q) {
    let d = dim as i64;
    let inv = p.recip();
    (
        q(d - 1, 2) - qi(d) * inv,
        q(d - 1, 2) * (q(1, 2) - inv),
    )
}

/// Endpoint 2(d+1)/(d−1) where the two projector branches meet.
pub fn sogge_junction(dim: u32) -> Q {
    q(2 * (dim as i64 + 1), dim as i64 - 1)
}

/// Growth exponent δ(p, dim) of the L² → L^p spectral projector on a sphere.
pub fn sogge_delta(p: LpExponent, dim: u32) -> Result<Q> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dimension {dim} < 2")));
    }
    if p < LpExponent::int(2) {
        return Err(Error::InvalidArgument(format!("exponent {p} < 2")));
    }
    let (high, low) = sogge_branches(p, dim);
    Ok(if p >= LpExponent::Finite(sogge_junction(dim)) {
        high
    } else {
        low
    })
}

/// Where an exponent condition is tested: at `p` itself, or for every
/// exponent slightly larger than `p` (a right limit).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Probe {
    At(LpExponent),
    Above(Q),
}

impl Probe {
    fn value(&self) -> LpExponent {
        match *self {
            Probe::At(p) => p,
            Probe::Above(p) => LpExponent::Finite(p),
        }
    }

    fn recip(&self) -> Q {
        self.value().recip()
    }

    fn ge(&self, c: Q) -> bool {
        self.value() >= LpExponent::Finite(c)
    }

    fn gt(&self, c: Q) -> bool {
        match *self {
            Probe::At(p) => p > LpExponent::Finite(c),
            Probe::Above(p) => p >= c,
        }
    }

    fn eq(&self, c: Q) -> bool {
        matches!(*self, Probe::At(LpExponent::Finite(p)) if p == c)
    }
}

fn gamma_at(spec: &ManifoldSpec, probe: Probe) -> Option<SlackExpr> {
    let r = spec.rank() as i64;
    let r0 = spec.sphere_count();
    let r1 = spec.torus_dim() as i64;
    let inv = probe.recip();
    let half_r = q(r, 2);
    let mut options = Vec::new();
    if probe.gt(qi(2)) && r1 == 0 {
        options.push(SlackExpr::constant(half_r - qi(2) * inv));
    }
    if probe.gt(q(2 * (r + 2), r)) {
        options.push(SlackExpr::constant(half_r - qi(2 + r1) * inv));
    }
    if probe.ge(qi(2)) && r0 >= 2 {
        options.push(SlackExpr::constant(half_r - qi(2 + r1) * inv) + SlackExpr::eps());
    }
    if probe.eq(qi(2)) && r0 <= 1 {
        options.push(SlackExpr::constant(Q::zero()));
    }
    options.into_iter().min_by(|a, b| a.infinitesimal_cmp(b))
}

/// Exponent γ(p) of the restricted torus Strichartz bound, with ε symbolic.
/// `None` when no known case applies.
pub fn gamma_exponent_symbolic(spec: &ManifoldSpec, p: LpExponent) -> Option<SlackExpr> {
    if p < LpExponent::int(2) {
        return None;
    }
    gamma_at(spec, Probe::At(p))
}

/// γ(p) with ε instantiated.
pub fn gamma_exponent(spec: &ManifoldSpec, p: LpExponent, eps: f64) -> Option<f64> {
    let slack = SlackValues {
        eps,
        ..SlackValues::default()
    };
    if p < LpExponent::int(2) {
        return None;
    }
    let r = spec.rank() as i64;
    let r0 = spec.sphere_count();
    let r1 = spec.torus_dim() as i64;
    let probe = Probe::At(p);
    let inv = probe.recip();
    let half_r = q(r, 2);
    let mut best: Option<f64> = None;
    let mut consider = |e: SlackExpr| {
        let v = e.evaluate(&slack);
        best = Some(best.map_or(v, |b: f64| b.min(v)));
    };
    if probe.gt(qi(2)) && r1 == 0 {
        consider(SlackExpr::constant(half_r - qi(2) * inv));
    }
    if probe.gt(q(2 * (r + 2), r)) {
        consider(SlackExpr::constant(half_r - qi(2 + r1) * inv));
    }
    if probe.ge(qi(2)) && r0 >= 2 {
        consider(SlackExpr::constant(half_r - qi(2 + r1) * inv) + SlackExpr::eps());
    }
    if probe.eq(qi(2)) && r0 <= 1 {
        consider(SlackExpr::constant(Q::zero()));
    }
    best
}

/// Right-hand-side constant of the (k+1)-linear Strichartz estimate.
pub fn mls_constant(spec: &ManifoldSpec, k: u32, params: &FreeParams) -> Result<EstimateConstant> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let r = spec.rank();
    if r < 2 {
        return Err(Error::NoCase(format!("{spec} has rank {r} < 2")));
    }
    let half_d = spec.half_dim();
    let quarter_r2 = q(spec.two_sphere_count() as i64, 4);
    let r3 = qi(spec.three_sphere_count() as i64);
    let half_r3 = q(spec.three_sphere_count() as i64, 2);
    let eta = SlackExpr::eta();
    let delta = SlackExpr::delta();
    let eps = SlackExpr::eps();
    let big_pair = spec.sphere_count() == 2
        && spec.torus_dim() == 0
        && spec.sphere_dims().iter().all(|&d| d >= 4);

    let mut c;
    if k == 1 {
        if big_pair {
            c = EstimateConstant::new("k=1, two spheres of dimension >= 4", 1, params.slack());
            c.set(2, SlackExpr::constant(half_d - qi(1)));
            c.gain = Some(Gain {
                ratio: GainRatio::SecondOverFirst,
                exponent: delta,
            });
        } else if r >= 3 {
            c = EstimateConstant::new("k=1, r>=3", 1, params.slack());
            c.set(2, SlackExpr::constant(half_d - qi(1) + quarter_r2));
            c.log_powers.insert(2, half_r3);
            c.gain = Some(Gain {
                ratio: GainRatio::SecondOverFirst,
                exponent: delta,
            });
        } else {
            c = EstimateConstant::new("k=1, r=2", 1, params.slack());
            c.set(2, SlackExpr::constant(half_d - qi(1) + quarter_r2) + eps);
            c.log_powers.insert(2, half_r3);
            c.epsilon_slack = true;
        }
    } else {
        let km1 = qi(k as i64 - 1);
        let label = if r >= 3 { "k>=2, r>=3" } else { "k>=2, r=2" };
        c = EstimateConstant::new(label, k, params.slack());
        let mut second = SlackExpr::constant(half_d - qi(1) + quarter_r2) + eta * r3 + delta * km1;
        let mut third = SlackExpr::constant(half_d - quarter_r2) - eta * r3 - delta;
        if r == 2 {
            second = second + eps;
            third = third - eps;
            c.epsilon_slack = true;
        }
        c.set(2, second);
        c.set(3, third);
        for j in 4..=(k as usize + 1) {
            c.set(j, SlackExpr::constant(half_d) - delta);
        }
        c.gain = Some(Gain {
            ratio: GainRatio::LastOverFirst,
            exponent: delta,
        });
    }
    Ok(c)
}

/// Constant of the multilinear joint spectral projector bound on a product
/// of spheres.
pub fn mljspe_constant(spec: &ManifoldSpec, k: u32, eta: f64) -> Result<EstimateConstant> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if !spec.is_sphere_only() {
        return Err(Error::InvalidManifold(format!(
            "joint projector bound needs a product of spheres, got {spec}"
        )));
    }
    if k >= 2 && !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let d = spec.dim() as i64;
    let r = spec.rank() as i64;
    let quarter_r2 = q(spec.two_sphere_count() as i64, 4);
    let r3 = qi(spec.three_sphere_count() as i64);
    let slack = SlackValues {
        eta,
        ..SlackValues::default()
    };
    let mut c = EstimateConstant::new("joint spectral projector", k, slack);
    if k == 1 {
        c.set(2, SlackExpr::constant(q(d - 2 * r, 2) + quarter_r2));
        c.log_powers.insert(2, q(spec.three_sphere_count() as i64, 2));
    } else {
        let eta_s = SlackExpr::eta();
        c.set(2, SlackExpr::constant(q(d - 2 * r, 2) + quarter_r2) + eta_s * r3);
        c.set(3, SlackExpr::constant(q(d - r, 2) - quarter_r2) - eta_s * r3);
        for j in 4..=(k as usize + 1) {
            c.set(j, SlackExpr::constant(q(d - r, 2)));
        }
    }
    Ok(c)
}

/// Well-posedness regime relative to the scaling exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Critical,
    AlmostCritical,
    Subcritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Critical => "critical",
            Regime::AlmostCritical => "almost-critical",
            Regime::Subcritical => "subcritical",
        })
    }
}

/// Where a threshold rule comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleFamily {
    /// Consequences of the multilinear estimates implemented here.
    Multilinear,
    /// Previously known results on the literature table.
    Literature,
    /// Optimization over linear Strichartz triples.
    LinearStrichartz,
    /// The bound valid on every compact manifold.
    General,
}

/// One applicable well-posedness threshold: `s ≥ s_bound` or `s > s_bound`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdRow {
    pub manifold: String,
    pub two_spheres: usize,
    pub three_spheres: usize,
    pub rank: usize,
    pub k: u32,
    pub regime: Regime,
    pub s_bound: Q,
    pub strict: bool,
    pub rule: &'static str,
    pub reference: &'static str,
    pub family: RuleFamily,
}

impl ThresholdRow {
    pub fn source(&self) -> String {
        format!("{} [{}]", self.rule, self.reference)
    }

    pub fn relation(&self) -> &'static str {
        if self.strict {
            ">"
        } else {
            ">="
        }
    }

    /// True when `self` is at least as good as `other`.
    fn beats(&self, other: &ThresholdRow) -> bool {
        match self.s_bound.cmp(&other.s_bound) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => !self.strict || other.strict,
        }
    }
}

type Applies = fn(&ManifoldSpec, u32) -> bool;
type Bound = fn(&ManifoldSpec, u32) -> Q;

struct Rule {
    id: &'static str,
    reference: &'static str,
    family: RuleFamily,
    applies: Applies,
    bound: Bound,
    strict: bool,
}

fn s_c(m: &ManifoldSpec, k: u32) -> Q {
    m.half_dim() - q(1, k as i64)
}

fn product(m: &ManifoldSpec) -> bool {
    m.rank() >= 2
}

fn r_over_r_plus_4(m: &ManifoldSpec) -> Q {
    let r = m.rank() as i64;
    q(r, r + 4)
}

fn d_prime_fraction(m: &ManifoldSpec) -> Q {
    // d'/(2(d'+1)), with the d' = ∞ limit 1/2.
    match m.min_non_two_dim() {
        MinDim::Finite(dp) => q(dp as i64, 2 * (dp as i64 + 1)),
        MinDim::Infinite => q(1, 2),
    }
}

fn linear_p0(m: &ManifoldSpec, single_sphere: bool) -> Option<Q> {
    let dp = match m.min_non_two_dim() {
        MinDim::Finite(dp) => dp as i64,
        MinDim::Infinite => return None,
    };
    let r = m.rank() as i64;
    let junction = q(2 * (dp + 1), dp - 1);
    let lower = if single_sphere {
        junction.max(q(2 * (r + 2), r))
    } else {
        junction
    };
    let cap = if m.all_spheres_odd() && m.torus_dim() == 0 {
        qi(2) + q(4 * (dp + 1), dp * r)
    } else {
        qi(2) + q(8, r)
    };
    Some(lower.min(cap))
}

fn linear_case3(m: &ManifoldSpec, _k: u32) -> Q {
    let p0 = linear_p0(m, false).expect("applies() guarantees a finite d'");
    m.half_dim() - qi(2) / p0
}

fn linear_case4(m: &ManifoldSpec, _k: u32) -> Q {
    let p0 = linear_p0(m, true).expect("applies() guarantees a finite d'");
    m.half_dim() - qi(2) / p0
}

static RULES: &[Rule] = &[
    // Multilinear consequences.
    Rule {
        id: "r2<=1, k>=2",
        reference: "multilinear",
        family: RuleFamily::Multilinear,
        applies: |m, k| product(m) && m.two_sphere_count() <= 1 && k >= 2,
        bound: s_c,
        strict: false,
    },
    Rule {
        id: "S^d1 x S^d2, d1,d2>=4, k>=1",
        reference: "multilinear",
        family: RuleFamily::Multilinear,
        applies: |m, _| {
            m.sphere_count() == 2 && m.torus_dim() == 0 && m.sphere_dims().iter().all(|&d| d >= 4)
        },
        bound: s_c,
        strict: false,
    },
    Rule {
        id: "r2=2, k>=3",
        reference: "multilinear",
        family: RuleFamily::Multilinear,
        applies: |m, k| product(m) && m.two_sphere_count() == 2 && k >= 3,
        bound: s_c,
        strict: false,
    },
    Rule {
        id: "r2=3, k>=5",
        reference: "multilinear",
        family: RuleFamily::Multilinear,
        applies: |m, k| product(m) && m.two_sphere_count() == 3 && k >= 5,
        bound: s_c,
        strict: false,
    },
    Rule {
        id: "r2=2, r=2,3, k=2",
        reference: "multilinear",
        family: RuleFamily::Multilinear,
        applies: |m, k| m.two_sphere_count() == 2 && (2..=3).contains(&m.rank()) && k == 2,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "r2=1, r<=11, k=1",
        reference: "multilinear",
        family: RuleFamily::Multilinear,
        applies: |m, k| product(m) && m.two_sphere_count() == 1 && m.rank() <= 11 && k == 1,
        bound: |m, _| m.half_dim() - q(3, 4),
        strict: true,
    },
    // Literature table, sphere/torus products.
    Rule {
        id: "r2=0, k>=1",
        reference: "BGT04, Zha21",
        family: RuleFamily::Literature,
        applies: |m, _| product(m) && m.two_sphere_count() == 0,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "S^3 x T^r1, r1>=2, k=1",
        reference: "DZZ25",
        family: RuleFamily::Literature,
        applies: |m, k| m.sphere_dims() == [3] && m.torus_dim() >= 2 && k == 1,
        bound: s_c,
        strict: false,
    },
    Rule {
        id: "r2=r3=0, r>=3, k=1",
        reference: "Zha21",
        family: RuleFamily::Literature,
        applies: |m, k| {
            m.two_sphere_count() == 0 && m.three_sphere_count() == 0 && m.rank() >= 3 && k == 1
        },
        bound: s_c,
        strict: false,
    },
    Rule {
        id: "r2=1, r>=12, k=1",
        reference: "Zha21",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() == 1 && m.rank() >= 12 && k == 1,
        bound: |m, _| m.half_dim() - r_over_r_plus_4(m),
        strict: true,
    },
    Rule {
        id: "r2=1, k>=2",
        reference: "HS15",
        family: RuleFamily::Literature,
        applies: |m, k| product(m) && m.two_sphere_count() == 1 && k >= 2,
        bound: s_c,
        strict: false,
    },
    Rule {
        id: "r2=2, r<=4, k=1",
        reference: "BGT04",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() == 2 && m.rank() <= 4 && k == 1,
        bound: |m, _| m.half_dim() - q(1, 2),
        strict: false,
    },
    Rule {
        id: "r2=2, r>=5, k=1",
        reference: "Zha21",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() == 2 && m.rank() >= 5 && k == 1,
        bound: |m, _| m.half_dim() - r_over_r_plus_4(m),
        strict: false,
    },
    Rule {
        id: "r2=2, k>=2",
        reference: "Zha21",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() == 2 && k >= 2,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "r2=3, r<=4, k=1",
        reference: "BGT04",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() == 3 && m.rank() <= 4 && k == 1,
        bound: |m, _| m.half_dim() - q(1, 2),
        strict: true,
    },
    Rule {
        id: "r2=3, r>=5, k=1",
        reference: "Zha21",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() == 3 && m.rank() >= 5 && k == 1,
        bound: |m, _| m.half_dim() - r_over_r_plus_4(m),
        strict: true,
    },
    Rule {
        id: "S^2 x S^2 x S^2, k=2",
        reference: "Zha21",
        family: RuleFamily::Literature,
        applies: |m, k| m.sphere_dims() == [2, 2, 2] && m.torus_dim() == 0 && k == 2,
        bound: |m, _| m.half_dim() - q(3, 7),
        strict: true,
    },
    Rule {
        id: "r2=3, r>=4, k=2",
        reference: "Zha21",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() == 3 && m.rank() >= 4 && k == 2,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "r2=3, k>=3",
        reference: "BGT04",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() == 3 && k >= 3,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "r2>=4, k=1",
        reference: "Zha21",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() >= 4 && k == 1,
        bound: |m, _| m.half_dim() - r_over_r_plus_4(m),
        strict: true,
    },
    Rule {
        id: "r2>=4, k>=2",
        reference: "Zha21",
        family: RuleFamily::Literature,
        applies: |m, k| m.two_sphere_count() >= 4 && k >= 2,
        bound: s_c,
        strict: true,
    },
    // Literature table, tori T^d (no sphere factors).
    Rule {
        id: "T^1, k=1",
        reference: "Bou93",
        family: RuleFamily::Literature,
        applies: |m, k| m.sphere_count() == 0 && m.torus_dim() == 1 && k == 1,
        bound: |_, _| Q::zero(),
        strict: false,
    },
    Rule {
        id: "T^1, k>=2",
        reference: "Bou93",
        family: RuleFamily::Literature,
        applies: |m, k| m.sphere_count() == 0 && m.torus_dim() == 1 && k >= 2,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "T^1, k>=3",
        reference: "HTT11, Wan13",
        family: RuleFamily::Literature,
        applies: |m, k| m.sphere_count() == 0 && m.torus_dim() == 1 && k >= 3,
        bound: s_c,
        strict: false,
    },
    Rule {
        id: "T^2, k>=2",
        reference: "Bou93, GOW14",
        family: RuleFamily::Literature,
        applies: |m, k| m.sphere_count() == 0 && m.torus_dim() == 2 && k >= 2,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "T^d, d>=3, k>=1",
        reference: "HTT11, HTT14, Wan13, GOW14, BD15, KV16",
        family: RuleFamily::Literature,
        applies: |m, _| m.sphere_count() == 0 && m.torus_dim() >= 3,
        bound: s_c,
        strict: false,
    },
    // Literature table, single spheres.
    Rule {
        id: "S^2, k=1",
        reference: "BGT05",
        family: RuleFamily::Literature,
        applies: |m, k| m.sphere_dims() == [2] && m.torus_dim() == 0 && k == 1,
        bound: |_, _| q(1, 4),
        strict: true,
    },
    Rule {
        id: "S^2, k>=2",
        reference: "Yan15",
        family: RuleFamily::Literature,
        applies: |m, k| m.sphere_dims() == [2] && m.torus_dim() == 0 && k >= 2,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "S^2, k>=3",
        reference: "Zha16",
        family: RuleFamily::Literature,
        applies: |m, k| m.sphere_dims() == [2] && m.torus_dim() == 0 && k >= 3,
        bound: s_c,
        strict: false,
    },
    Rule {
        id: "S^d, d>=3, k>=1",
        reference: "Yan15",
        family: RuleFamily::Literature,
        applies: |m, _| m.sphere_count() == 1 && m.torus_dim() == 0 && m.sphere_dims()[0] >= 3,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "S^d, d>=3, k>=2",
        reference: "Her13, Zha16",
        family: RuleFamily::Literature,
        applies: |m, k| {
            m.sphere_count() == 1 && m.torus_dim() == 0 && m.sphere_dims()[0] >= 3 && k >= 2
        },
        bound: s_c,
        strict: false,
    },
    // Linear Strichartz optimization, closed forms.
    Rule {
        id: "linear: k=1, r2>=1, r=2..4",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| k == 1 && m.two_sphere_count() >= 1 && (2..=4).contains(&m.rank()),
        bound: |m, _| m.half_dim() - q(1, 2),
        strict: true,
    },
    Rule {
        id: "linear: k=1, r2>=1, r>=5",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| k == 1 && m.two_sphere_count() >= 1 && m.rank() >= 5,
        bound: |m, _| m.half_dim() - r_over_r_plus_4(m),
        strict: true,
    },
    Rule {
        id: "linear: k=1, r2=0, r0>=2",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| {
            k == 1 && product(m) && m.two_sphere_count() == 0 && m.sphere_count() >= 2
        },
        bound: linear_case3,
        strict: true,
    },
    Rule {
        id: "linear: k=1, r2=0, r0=1",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| {
            k == 1 && product(m) && m.two_sphere_count() == 0 && m.sphere_count() == 1
        },
        bound: linear_case4,
        strict: true,
    },
    Rule {
        id: "linear: k=2, r>=4",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| k == 2 && m.rank() >= 4,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "linear: k=2, r=3, r2=2,3",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| k == 2 && m.rank() == 3 && (2..=3).contains(&m.two_sphere_count()),
        bound: |m, _| m.half_dim() - q(3, 7),
        strict: true,
    },
    Rule {
        id: "linear: k=2, S^2 x S^2",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| k == 2 && m.sphere_dims() == [2, 2] && m.torus_dim() == 0,
        bound: |m, _| m.half_dim() - q(1, 3),
        strict: true,
    },
    Rule {
        id: "linear: k=2, r2=1, r=2",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| k == 2 && m.two_sphere_count() == 1 && m.rank() == 2,
        bound: |m, _| m.half_dim() - d_prime_fraction(m),
        strict: true,
    },
    Rule {
        id: "linear: k=2, r2=1, r=3, d'<=6",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| {
            k == 2
                && m.two_sphere_count() == 1
                && m.rank() == 3
                && m.min_non_two_dim() <= MinDim::Finite(6)
        },
        bound: |m, _| m.half_dim() - q(3, 7),
        strict: true,
    },
    Rule {
        id: "linear: k=2, r2=1, r=3, d'>=7",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| {
            k == 2
                && m.two_sphere_count() == 1
                && m.rank() == 3
                && m.min_non_two_dim() >= MinDim::Finite(7)
        },
        bound: |m, _| m.half_dim() - d_prime_fraction(m),
        strict: true,
    },
    Rule {
        id: "linear: k=2, r2=0",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| k == 2 && product(m) && m.two_sphere_count() == 0,
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "linear: k>=3",
        reference: "linear-strichartz",
        family: RuleFamily::LinearStrichartz,
        applies: |m, k| k >= 3 && product(m),
        bound: s_c,
        strict: true,
    },
    Rule {
        id: "general compact manifold",
        reference: "BGT04",
        family: RuleFamily::General,
        applies: |_, _| true,
        bound: |m, k| m.half_dim() - q(1, 2 * k as i64),
        strict: true,
    },
];

fn regime_of(bound: &Q, strict: bool, critical: &Q) -> Regime {
    if bound > critical {
        Regime::Subcritical
    } else if strict {
        Regime::AlmostCritical
    } else {
        Regime::Critical
    }
}

/// Every rule in the table that applies to `(spec, k)`, in table order.
pub fn applicable_thresholds(spec: &ManifoldSpec, k: u32) -> Result<Vec<ThresholdRow>> {
    let critical = critical_regularity(spec, k)?;
    Ok(RULES
        .iter()
        .filter(|rule| (rule.applies)(spec, k))
        .map(|rule| {
            let bound = (rule.bound)(spec, k);
            ThresholdRow {
                manifold: spec.to_string(),
                two_spheres: spec.two_sphere_count(),
                three_spheres: spec.three_sphere_count(),
                rank: spec.rank(),
                k,
                regime: regime_of(&bound, rule.strict, &critical),
                s_bound: bound,
                strict: rule.strict,
                rule: rule.id,
                reference: rule.reference,
                family: rule.family,
            }
        })
        .collect())
}

/// Best known well-posedness threshold for `(spec, k)`.
///
/// Lowest bound wins; on equal bounds a non-strict row is preferred, and
/// among equals the earlier (more specific) table entry is kept.
pub fn lwp_threshold(spec: &ManifoldSpec, k: u32) -> Result<ThresholdRow> {
    let rows = applicable_thresholds(spec, k)?;
    let mut best: Option<ThresholdRow> = None;
    for row in rows {
        match &best {
            Some(b) if !row.beats(b) || (row.s_bound == b.s_bound && row.strict == b.strict) => {}
            _ => best = Some(row),
        }
    }
    // The general row always applies.
    Ok(best.expect("general rule applies to every manifold"))
}

/// Writes rows as CSV with columns `r2,r3,r,k,regime,s_bound,strict,source`.
pub fn write_threshold_csv<W: std::io::Write>(rows: &[ThresholdRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r2", "r3", "r", "k", "regime", "s_bound", "strict", "source"])?;
    for row in rows {
        w.write_record([
            row.two_spheres.to_string(),
            row.three_spheres.to_string(),
            row.rank.to_string(),
            row.k.to_string(),
            row.regime.to_string(),
            fmt_q(&row.s_bound),
            row.strict.to_string(),
            row.source(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The five families of admissible linear Strichartz triples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TripleCase {
    /// q = 2, s = 0.
    EnergyOnly,
    /// Scale-admissible pairs valid on any compact manifold, s = 1/p.
    Universal,
    /// p = q with the factorized torus/sphere bound γ(p) + Σ δ(p, dᵢ).
    Factorized,
    /// p = q ≥ 2 + 8/r.
    Diagonal,
    /// p = q ≥ 2 + 4(d'+1)/(d'r) on odd-sphere products.
    DiagonalOdd,
}

/// Result of optimizing `s₀ + d/q₀` over admissible triples with p₀ > 2k.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOptimum {
    pub p0: LpExponent,
    pub q0: LpExponent,
    pub s0: Q,
    pub threshold: Q,
    pub case: TripleCase,
    /// The optimum is an infimum reached only as p₀ decreases to `p0`.
    pub limit_from_above: bool,
}

/// Candidate exponents for [`optimize_linear_threshold`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentGrid {
    pub points: Vec<Q>,
    pub p_max: LpExponent,
}

impl ExponentGrid {
    /// Uniform grid with spacing `1/den` on (lo, hi], plus infinity.
    pub fn uniform(lo: i64, hi: i64, den: i64) -> Self {
        let points = ((lo * den + 1)..=(hi * den)).map(|n| q(n, den)).collect();
        Self {
            points,
            p_max: LpExponent::Infinity,
        }
    }
}

fn triple_at(spec: &ManifoldSpec, case: TripleCase, probe: Probe) -> Option<(Q, LpExponent)> {
    let half_d = spec.half_dim();
    let d = qi(spec.dim() as i64);
    let inv = probe.recip();
    let p = probe.value();
    if !probe.ge(qi(2)) {
        return None;
    }
    match case {
        TripleCase::EnergyOnly => Some((Q::zero(), LpExponent::int(2))),
        TripleCase::Universal => {
            // 2/p + d/q = d/2 with q < ∞.
            let d_over_q = half_d - qi(2) * inv;
            if !d_over_q.is_positive() {
                return None;
            }
            Some((inv, LpExponent::Finite(d / d_over_q)))
        }
        TripleCase::Factorized => {
            let gamma = gamma_at(spec, probe)?;
            let mut s0 = gamma.constant;
            for &di in spec.sphere_dims() {
                let (high, low) = sogge_branches(p, di);
                s0 += if probe.ge(sogge_junction(di)) { high } else { low };
            }
            Some((s0, p))
        }
        TripleCase::Diagonal => {
            let r = spec.rank() as i64;
            if !probe.ge(qi(2) + q(8, r)) {
                return None;
            }
            Some((half_d - (d + qi(2)) * inv, p))
        }
        TripleCase::DiagonalOdd => {
            if spec.torus_dim() != 0 || !spec.all_spheres_odd() {
                return None;
            }
            let dp = match spec.min_non_two_dim() {
                MinDim::Finite(v) => v as i64,
                MinDim::Infinite => return None,
            };
            let r = spec.rank() as i64;
            if !probe.ge(qi(2) + q(4 * (dp + 1), dp * r)) {
                return None;
            }
            Some((half_d - (d + qi(2)) * inv, p))
        }
    }
}

fn breakpoints(spec: &ManifoldSpec) -> Vec<Q> {
    let r = spec.rank() as i64;
    let mut pts = vec![qi(2), q(2 * (r + 2), r), qi(2) + q(8, r)];
    for &di in spec.sphere_dims() {
        pts.push(sogge_junction(di));
    }
    if let MinDim::Finite(dp) = spec.min_non_two_dim() {
        let dp = dp as i64;
        pts.push(qi(2) + q(4 * (dp + 1), dp * r));
    }
    pts.push(q(4, spec.dim() as i64));
    pts
}

/// Minimizes `s₀ + d/q₀` over admissible triples with `p₀ > 2k`.
///
/// The objective is piecewise of the form `a + b/p`, so besides the grid the
/// search visits every breakpoint of the case conditions and the open
/// endpoint `2k` as a right limit.
pub fn optimize_linear_threshold(
    spec: &ManifoldSpec,
    k: u32,
    grid: &ExponentGrid,
) -> Result<LinearOptimum> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let floor = qi(2 * k as i64);
    let in_range = |p: &Q| *p > floor && LpExponent::Finite(*p) <= grid.p_max;
    let mut probes: Vec<Probe> = grid
        .points
        .iter()
        .chain(breakpoints(spec).iter())
        .filter(|p| in_range(p))
        .map(|&p| Probe::At(LpExponent::Finite(p)))
        .collect();
    if LpExponent::Finite(floor) < grid.p_max {
        probes.push(Probe::Above(floor));
        for p in breakpoints(spec).into_iter().filter(|p| in_range(p)) {
            probes.push(Probe::Above(p));
        }
    }
    if grid.p_max == LpExponent::Infinity {
        probes.push(Probe::At(LpExponent::Infinity));
    } else if let LpExponent::Finite(pm) = grid.p_max {
        if pm > floor {
            probes.push(Probe::At(grid.p_max));
        }
    }
    let cases = [
        TripleCase::EnergyOnly,
        TripleCase::Universal,
        TripleCase::Factorized,
        TripleCase::Diagonal,
        TripleCase::DiagonalOdd,
    ];
    let d = qi(spec.dim() as i64);
    let mut best: Option<LinearOptimum> = None;
    for probe in probes {
        for case in cases {
            let Some((s0, q0)) = triple_at(spec, case, probe) else {
                continue;
            };
            let threshold = s0 + d * q0.recip();
            let limit = matches!(probe, Probe::Above(_));
            let better = match &best {
                None => true,
                Some(b) => threshold < b.threshold || (threshold == b.threshold && b.limit_from_above && !limit),
            };
            if better {
                best = Some(LinearOptimum {
                    p0: probe.value(),
                    q0,
                    s0,
                    threshold,
                    case,
                    limit_from_above: limit,
                });
            }
        }
    }
    best.ok_or(Error::NoAdmissibleTriple)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(spheres: &[u32], torus: u32) -> ManifoldSpec {
        ManifoldSpec::new(spheres.to_vec(), torus).unwrap()
    }

    #[test]
    fn derived_combinatorics() {
        let s = m(&[2, 3, 5], 2);
        assert_eq!(s.rank(), 5);
        assert_eq!(s.dim(), 12);
        assert_eq!(s.two_sphere_count(), 1);
        assert_eq!(s.three_sphere_count(), 1);
        assert_eq!(s.min_non_two_dim(), MinDim::Finite(3));
        assert_eq!(m(&[2, 2], 1).min_non_two_dim(), MinDim::Infinite);
        assert!(MinDim::Finite(u32::MAX) < MinDim::Infinite);
    }

    #[test]
    fn rejects_bad_manifolds() {
        assert!(ManifoldSpec::new(vec![1], 0).is_err());
        assert!(ManifoldSpec::new(vec![], 0).is_err());
    }

    #[test]
    fn critical_regularity_examples() {
        assert_eq!(critical_regularity(&m(&[2, 2], 0), 1).unwrap(), qi(1));
        assert_eq!(critical_regularity(&m(&[], 1), 1).unwrap(), q(-1, 2));
        assert_eq!(critical_regularity(&m(&[3], 1), 1).unwrap(), qi(1));
        assert!(critical_regularity(&m(&[3], 1), 0).is_err());
    }

    #[test]
    fn sogge_examples() {
        assert_eq!(sogge_delta(LpExponent::int(6), 2).unwrap(), q(1, 6));
        for d in 2..8 {
            assert_eq!(sogge_delta(LpExponent::int(2), d).unwrap(), Q::zero());
        }
        assert_eq!(sogge_delta(LpExponent::int(4), 3).unwrap(), q(1, 4));
        assert_eq!(sogge_delta(LpExponent::Infinity, 4).unwrap(), q(3, 2));
        assert!(sogge_delta(LpExponent::int(1), 3).is_err());
    }

    #[test]
    fn sogge_branches_meet_at_junction() {
        for d in 2..=10 {
            let (a, b) = sogge_branches(LpExponent::Finite(sogge_junction(d)), d);
            assert_eq!(a, b);
            assert!((q_to_f64(&a) - q_to_f64(&b)).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_exponent(&m(&[2, 2], 0), LpExponent::int(4), 0.0), Some(0.5));
        let g = gamma_exponent(&m(&[2, 2], 0), LpExponent::int(2), 0.01).unwrap();
        assert!((g - 0.01).abs() < 1e-15);
        assert_eq!(gamma_exponent(&m(&[2], 0), LpExponent::int(2), 0.0), Some(0.0));
        // 2 < p <= 2(r+2)/r with a torus factor and a single sphere: no case applies.
        assert_eq!(gamma_exponent(&m(&[2], 1), LpExponent::int(3), 0.1), None);
        assert_eq!(gamma_exponent(&m(&[2], 1), LpExponent::int(2), 0.1), Some(0.0));
        let sym = gamma_exponent_symbolic(&m(&[2, 2], 0), LpExponent::int(2)).unwrap();
        assert_eq!(sym, SlackExpr::eps());
    }

    #[test]
    fn mls_constant_cases() {
        let p = FreeParams::default();
        let c = mls_constant(&m(&[2, 2], 1), 1, &p).unwrap();
        assert_eq!(c.exponent(2), SlackExpr::constant(q(5, 2) - qi(1) + q(2, 4)));
        assert!(c.gain.is_some());
        assert_eq!(c.log_power(2), Q::zero());

        let c = mls_constant(&m(&[3, 3], 0), 1, &p).unwrap();
        assert_eq!(c.exponent(2), SlackExpr::constant(qi(2)) + SlackExpr::eps());
        assert_eq!(c.log_power(2), qi(1));
        assert!(c.epsilon_slack);

        let c = mls_constant(&m(&[4, 4], 0), 1, &p).unwrap();
        assert_eq!(c.exponent(2), SlackExpr::constant(qi(3)));
        assert!(c.gain.is_some());

        assert!(mls_constant(&m(&[3], 0), 1, &p).is_err());
    }

    #[test]
    fn mls_constant_higher_k() {
        let p = FreeParams {
            delta0: Some(0.2),
            eta: 0.01,
            eps: 0.01,
        };
        let c = mls_constant(&m(&[2, 3], 1), 3, &p).unwrap();
        // d = 6, r2 = 1, r3 = 1
        let second = c.exponent(2);
        assert_eq!(second.constant, qi(3) - qi(1) + q(1, 4));
        assert_eq!(second.eta, qi(1));
        assert_eq!(second.delta, qi(2));
        let third = c.exponent(3);
        assert_eq!(third.constant, qi(3) - q(1, 4));
        assert_eq!(third.delta, qi(-1));
        assert_eq!(c.exponent(4), SlackExpr::constant(qi(3)) - SlackExpr::delta());
        assert_eq!(c.gain.unwrap().ratio, GainRatio::LastOverFirst);
        assert!((c.slack.delta - 0.1).abs() < 1e-15);

        let c = mls_constant(&m(&[2, 2], 0), 2, &p).unwrap();
        assert_eq!(c.exponent(2).eps, qi(1));
        assert_eq!(c.exponent(3).eps, qi(-1));
    }

    #[test]
    fn mls_constant_evaluation() {
        let p = FreeParams {
            delta0: Some(0.5),
            ..FreeParams::default()
        };
        let c = mls_constant(&m(&[4, 4], 0), 1, &p).unwrap();
        let v = c.evaluate(&[64.0, 4.0]).unwrap();
        let expect = 4f64.powf(3.0) * (4.0 / 64.0 + 0.25f64).powf(0.25);
        assert!((v - expect).abs() < 1e-12 * expect);
        assert!(c.evaluate(&[64.0]).is_err());
    }

    #[test]
    fn mljspe_examples() {
        let c = mljspe_constant(&m(&[2, 2], 0), 1, 0.0).unwrap();
        assert_eq!(c.exponent(2), SlackExpr::constant(q(1, 2)));
        let c = mljspe_constant(&m(&[3, 3], 0), 1, 0.0).unwrap();
        assert_eq!(c.exponent(2), SlackExpr::constant(qi(1)));
        assert_eq!(c.log_power(2), qi(1));
        let c = mljspe_constant(&m(&[2], 0), 1, 0.0).unwrap();
        assert_eq!(c.exponent(2), SlackExpr::constant(q(1, 4)));
        assert!(mljspe_constant(&m(&[2, 2], 0), 2, 0.0).is_err());
        assert!(mljspe_constant(&m(&[2], 1), 1, 0.1).is_err());
    }

    #[test]
    fn lwp_examples() {
        let row = lwp_threshold(&m(&[2], 2), 1).unwrap();
        assert_eq!(row.regime, Regime::Subcritical);
        assert_eq!(row.s_bound, q(4, 2) - q(3, 4));
        assert!(row.strict);

        let row = lwp_threshold(&m(&[4, 5], 0), 1).unwrap();
        assert_eq!(row.regime, Regime::Critical);
        assert_eq!(row.s_bound, q(9, 2) - qi(1));
        assert!(!row.strict);

        let row = lwp_threshold(&m(&[2, 2], 0), 2).unwrap();
        assert_eq!(row.regime, Regime::AlmostCritical);
        assert_eq!(row.s_bound, qi(2) - q(1, 2));
    }

    #[test]
    fn optimizer_examples() {
        let grid = ExponentGrid::uniform(2, 40, 12);
        let o = optimize_linear_threshold(&m(&[3, 3], 0), 2, &grid).unwrap();
        assert_eq!(o.threshold, qi(3) - q(1, 2));
        let o = optimize_linear_threshold(&m(&[2, 2], 0), 2, &grid).unwrap();
        assert_eq!(o.threshold, qi(2) - q(1, 3));
        for r in 4..7u32 {
            let spec = m(&[], r);
            let o = optimize_linear_threshold(&spec, 3, &grid).unwrap();
            assert_eq!(o.threshold, critical_regularity(&spec, 3).unwrap());
            assert!(o.limit_from_above);
        }
    }

    #[test]
    fn optimizer_reports_empty_grid() {
        let grid = ExponentGrid {
            points: vec![],
            p_max: LpExponent::int(3),
        };
        assert!(matches!(
            optimize_linear_threshold(&m(&[2, 2], 0), 2, &grid),
            Err(Error::NoAdmissibleTriple)
        ));
    }

    #[test]
    fn csv_has_documented_columns() {
        let rows = applicable_thresholds(&m(&[2], 2), 1).unwrap();
        let mut buf = Vec::new();
        write_threshold_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r2,r3,r,k,regime,s_bound,strict,source\n"));
        assert!(text.contains("1,0,3,1,subcritical,5/4,true,"));
    }
}
