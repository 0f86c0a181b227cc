//! Frequency sets: shifted cubes, their slab decomposition, level sets of
//! |ξ|², spectral windows and lattice points on circles.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numeric::{is_square, isqrt};
use crate::regularity::{ManifoldSpec, Q};

/// Default cap on enumerated lattice points.
pub const DEFAULT_POINT_BUDGET: u128 = 10_000_000;

type Q128 = Ratio<i128>;

fn wide(v: &Q) -> Q128 {
    Q128::new(*v.numer() as i128, *v.denom() as i128)
}

fn ceil_i(v: &Q) -> i64 {
    v.ceil().to_integer()
}

fn floor_i(v: &Q) -> i64 {
    v.floor().to_integer()
}

/// A lattice point ξ = (n₁, …, n_r); the first r₀ coordinates are sphere
/// degrees, the rest torus frequencies.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frequency(pub Vec<i64>);

impl Frequency {
    pub fn norm2(&self) -> i128 {
        self.0.iter().map(|&n| (n as i128) * (n as i128)).sum()
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn torus_part(&self, r0: usize) -> &[i64] {
        &self.0[r0..]
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// The closed cube ∏ [bᵢ, bᵢ + N].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cube {
    pub b: Vec<Q>,
    pub side: Q,
}

impl Cube {
    pub fn new(b: Vec<Q>, side: Q) -> Result<Self> {
        if !side.is_positive() || b.is_empty() {
            return Err(Error::InvalidArgument(
                "cube needs a positive side and at least one coordinate".into(),
            ));
        }
        Ok(Self { b, side })
    }

    pub fn integer(b: &[i64], side: i64) -> Result<Self> {
        Self::new(b.iter().map(|&v| Q::from_integer(v)).collect(), Q::from_integer(side))
    }

    pub fn rank(&self) -> usize {
        self.b.len()
    }

    pub fn contains(&self, xi: &Frequency) -> bool {
        xi.rank() == self.rank()
            && xi.0.iter().zip(&self.b).all(|(&n, b)| {
                let n = Q::from_integer(n);
                *b <= n && n <= *b + self.side
            })
    }

    /// Center b + (N/2)·1.
    pub fn center(&self) -> Vec<Q> {
        let half = self.side / Q::from_integer(2);
        self.b.iter().map(|b| b + half).collect()
    }

    fn ranges(&self, r0: usize) -> Vec<(i64, i64)> {
        self.b
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let lo = ceil_i(b);
                let lo = if i < r0 { lo.max(0) } else { lo };
                (lo, floor_i(&(b + self.side)))
            })
            .collect()
    }
}

fn count_box(ranges: &[(i64, i64)]) -> u128 {
    ranges
        .iter()
        .map(|&(lo, hi)| if hi >= lo { (hi - lo + 1) as u128 } else { 0 })
        .product()
}

fn enumerate_box(ranges: &[(i64, i64)], mut keep: impl FnMut(&[i64]) -> bool) -> Vec<Frequency> {
    let mut out = Vec::new();
    if ranges.iter().any(|&(lo, hi)| hi < lo) {
        return out;
    }
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        if keep(&cur) {
            out.push(Frequency(cur.clone()));
        }
        let mut i = ranges.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < ranges[i].1 {
                cur[i] += 1;
                for (j, c) in cur.iter_mut().enumerate().skip(i + 1) {
                    *c = ranges[j].0;
                }
                break;
            }
        }
    }
}

/// Lattice points of the cube, with the first `r0` coordinates kept
/// nonnegative, in lexicographic order.
pub fn enumerate_cube(c: &Cube, r0: usize, budget: u128) -> Result<Vec<Frequency>> {
    let ranges = c.ranges(r0);
    let needed = count_box(&ranges);
    if needed > budget {
        return Err(Error::BudgetExceeded {
            what: "cube lattice points",
            needed,
            budget,
        });
    }
    Ok(enumerate_box(&ranges, |_| true))
}

/// Slab thickness M = max{N₂²/N₁, 1}.
pub fn slab_thickness(n1: Q, n2: Q) -> Q {
    (n2 * n2 / n1).max(Q::from_integer(1))
}

/// The layer of a cube whose points satisfy ⟨ξ,ξ⁰⟩/|ξ⁰| ∈ [(m−1)M, mM).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slab {
    pub m: i64,
    pub thickness: Q,
    pub center: Vec<Q>,
    pub points: Vec<Frequency>,
}

impl Slab {
    pub fn contains(&self, xi: &Frequency) -> bool {
        slab_index(xi, &self.center, &self.thickness).ok() == Some(self.m)
    }
}

/// The index m of the slab containing ξ, decided in exact arithmetic.
pub fn slab_index(xi: &Frequency, center: &[Q], thickness: &Q) -> Result<i64> {
    let c: Vec<Q128> = center.iter().map(wide).collect();
    let r2: Q128 = c.iter().map(|v| v * v).sum();
    if r2.is_zero() {
        return Err(Error::DegenerateCenter);
    }
    let s: Q128 = xi
        .0
        .iter()
        .zip(&c)
        .map(|(&n, v)| v * Q128::from_integer(n as i128))
        .sum();
    let m = wide(thickness);
    // x = s / (M |ξ⁰|); floor(x) from y = x² and the sign of s.
    let y = s * s / (m * m * r2);
    let fl = y.floor().to_integer();
    let j = isqrt(fl as u128) as i128;
    let floor_x = if !s.is_negative() {
        j
    } else if y.is_integer() && j * j == fl {
        -j
    } else {
        -j - 1
    };
    (floor_x + 1)
        .to_i64()
        .ok_or_else(|| Error::InvalidArgument("slab index overflow".into()))
}

/// Splits a cube into its nonempty slabs, ordered by index.
pub fn slab_decompose(c: &Cube, n1: Q, n2: Q, r0: usize, budget: u128) -> Result<Vec<Slab>> {
    if !(n1 >= n2 && n2 >= Q::from_integer(1)) {
        return Err(Error::InvalidArgument(
            "slab decomposition needs N1 >= N2 >= 1".into(),
        ));
    }
    let center = c.center();
    if center.iter().all(|v| v.is_zero()) {
        return Err(Error::DegenerateCenter);
    }
    let thickness = slab_thickness(n1, n2);
    let mut by_index: BTreeMap<i64, Vec<Frequency>> = BTreeMap::new();
    for xi in enumerate_cube(c, r0, budget)? {
        let m = slab_index(&xi, &center, &thickness)?;
        by_index.entry(m).or_default().push(xi);
    }
    Ok(by_index
        .into_iter()
        .map(|(m, points)| Slab {
            m,
            thickness,
            center: center.clone(),
            points,
        })
        .collect())
}

/// Key of a level set: |ξ|² and, optionally, the torus part of ξ.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LevelKey {
    pub norm2: i128,
    pub torus: Vec<i64>,
}

/// Groups frequencies by |ξ|², and additionally by the torus coordinates
/// (those after the first `r0`) when `keep_torus` is set.
pub fn level_sets(
    freqs: &[Frequency],
    keep_torus: bool,
    r0: usize,
) -> BTreeMap<LevelKey, Vec<Frequency>> {
    let mut out: BTreeMap<LevelKey, Vec<Frequency>> = BTreeMap::new();
    for xi in freqs {
        let torus = if keep_torus {
            xi.0[r0.min(xi.rank())..].to_vec()
        } else {
            Vec::new()
        };
        out.entry(LevelKey {
            norm2: xi.norm2(),
            torus,
        })
        .or_default()
        .push(xi.clone());
    }
    out
}

/// Number of (n₁, n₂) ∈ [b₁, b₁+N] × [b₂, b₂+N] with n₁² + n₂² = A.
pub fn circle_count(b1: Q, b2: Q, n: Q, a: u64) -> u64 {
    let (lo1, hi1) = (ceil_i(&b1), floor_i(&(b1 + n)));
    let (lo2, hi2) = (ceil_i(&b2), floor_i(&(b2 + n)));
    let mut count = 0;
    for n1 in lo1..=hi1 {
        let rest = a as i128 - (n1 as i128) * (n1 as i128);
        if let Some(s) = is_square(rest) {
            let s = s as i64;
            if lo2 <= s && s <= hi2 {
                count += 1;
            }
            if s != 0 && lo2 <= -s && -s <= hi2 {
                count += 1;
            }
        }
    }
    count
}

/// Which box offsets `max_circle_count` ranges over.
#[derive(Clone, Debug, PartialEq)]
pub enum BSamples {
    /// The listed offsets only.
    Fixed(Vec<(Q, Q)>),
    /// Every integer offset whose box meets the circle.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxCount {
    pub max_count: u64,
    /// (b₁, b₂, A) attaining the maximum.
    pub arg: (Q, Q, u64),
}

/// All integer points on the circle n₁² + n₂² = A.
pub fn circle_points(a: u64) -> Vec<(i64, i64)> {
    let r = isqrt(a as u128) as i64;
    let mut pts = Vec::new();
    for x in -r..=r {
        if let Some(s) = is_square(a as i128 - (x as i128) * (x as i128)) {
            let s = s as i64;
            pts.push((x, s));
            if s != 0 {
                pts.push((x, -s));
            }
        }
    }
    pts
}

/// Maximum of [`circle_count`] over A in `a_range` and the sampled offsets.
pub fn max_circle_count(
    n: Q,
    a_range: std::ops::RangeInclusive<u64>,
    samples: &BSamples,
    budget: u128,
) -> Result<MaxCount> {
    let mut best = MaxCount {
        max_count: 0,
        arg: (Q::zero(), Q::zero(), *a_range.start()),
    };
    match samples {
        BSamples::Fixed(bs) => {
            for (b1, b2) in bs {
                let ranges = [
                    (ceil_i(b1), floor_i(&(b1 + n))),
                    (ceil_i(b2), floor_i(&(b2 + n))),
                ];
                let needed = count_box(&ranges);
                if needed > budget {
                    return Err(Error::BudgetExceeded {
                        what: "circle-count box",
                        needed,
                        budget,
                    });
                }
                let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
                for x in ranges[0].0..=ranges[0].1 {
                    for y in ranges[1].0..=ranges[1].1 {
                        let a = (x as i128 * x as i128 + y as i128 * y as i128) as u64;
                        if a_range.contains(&a) {
                            *hist.entry(a).or_default() += 1;
                        }
                    }
                }
                for (a, c) in hist {
                    if c > best.max_count {
                        best = MaxCount {
                            max_count: c,
                            arg: (*b1, *b2, a),
                        };
                    }
                }
            }
        }
        BSamples::Exhaustive => {
            let span = (*a_range.end() - *a_range.start()) as u128 + 1;
            let cost = span * (isqrt(*a_range.end() as u128) + 1);
            if cost > budget {
                return Err(Error::BudgetExceeded {
                    what: "circle enumeration",
                    needed: cost,
                    budget,
                });
            }
            for a in a_range {
                let pts = circle_points(a);
                // A box with maximal count can be slid until its left and
                // lower edges touch points of the circle.
                for &(x0, _) in &pts {
                    for &(_, y0) in &pts {
                        let inside = pts
                            .iter()
                            .filter(|&&(x, y)| {
                                let (x, y) = (Q::from_integer(x), Q::from_integer(y));
                                let (bx, by) = (Q::from_integer(x0), Q::from_integer(y0));
                                bx <= x && x <= bx + n && by <= y && y <= by + n
                            })
                            .count() as u64;
                        if inside > best.max_count {
                            best = MaxCount {
                                max_count: inside,
                                arg: (Q::from_integer(x0), Q::from_integer(y0), a),
                            };
                        }
                    }
                }
            }
        }
    }
    Ok(best)
}

/// All ξ with N ≤ |ξ| ≤ 2N, nonnegative in the sphere coordinates.
pub fn window_enumerate(n: Q, spec: &ManifoldSpec, budget: u128) -> Result<Vec<Frequency>> {
    if !n.is_positive() {
        return Err(Error::InvalidArgument("window size must be positive".into()));
    }
    let r0 = spec.sphere_count();
    let r = spec.rank();
    let lo2 = wide(&n) * wide(&n);
    let hi2 = lo2 * Q128::from_integer(4);
    let reach = floor_i(&(n * Q::from_integer(2)));
    let ranges: Vec<(i64, i64)> = (0..r)
        .map(|i| if i < r0 { (0, reach) } else { (-reach, reach) })
        .collect();
    let needed = count_box(&ranges);
    if needed > budget {
        return Err(Error::BudgetExceeded {
            what: "spectral window points",
            needed,
            budget,
        });
    }
    Ok(enumerate_box(&ranges, |v| {
        let n2 = Q128::from_integer(v.iter().map(|&x| x as i128 * x as i128).sum());
        lo2 <= n2 && n2 <= hi2
    }))
}

/// Writes one CSV row per frequency, columns `n1..nr`.
pub fn write_frequencies_csv<W: std::io::Write>(freqs: &[Frequency], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let r = freqs.first().map_or(0, |f| f.rank());
    w.write_record((1..=r).map(|i| format!("n{i}")))?;
    for f in freqs {
        w.write_record(f.0.iter().map(|n| n.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    #[test]
    fn cube_examples() {
        let c = Cube::integer(&[0, 0], 1).unwrap();
        assert_eq!(enumerate_cube(&c, 0, DEFAULT_POINT_BUDGET).unwrap().len(), 4);
        let c = Cube::new(vec![q(-1, 2), q(-1, 2)], q(1, 1)).unwrap();
        assert_eq!(
            enumerate_cube(&c, 2, DEFAULT_POINT_BUDGET).unwrap(),
            vec![Frequency(vec![0, 0])]
        );
        let c = Cube::integer(&[3, 3], 2).unwrap();
        let pts = enumerate_cube(&c, 0, DEFAULT_POINT_BUDGET).unwrap();
        assert_eq!(pts.len(), 9);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert!(enumerate_cube(&c, 0, 5).is_err());
    }

    #[test]
    fn slab_examples() {
        assert_eq!(slab_thickness(q(16, 1), q(4, 1)), q(1, 1));
        assert_eq!(slab_thickness(q(4, 1), q(4, 1)), q(4, 1));
        let c = Cube::integer(&[8, 8], 4).unwrap();
        let slabs = slab_decompose(&c, q(16, 1), q(4, 1), 0, DEFAULT_POINT_BUDGET).unwrap();
        let pts = enumerate_cube(&c, 0, DEFAULT_POINT_BUDGET).unwrap();
        for p in &pts {
            assert_eq!(slabs.iter().filter(|s| s.points.contains(p)).count(), 1);
            assert_eq!(slabs.iter().filter(|s| s.contains(p)).count(), 1);
        }
        assert_eq!(slabs.iter().map(|s| s.points.len()).sum::<usize>(), pts.len());
    }

    #[test]
    fn slab_rejects_origin_center() {
        let c = Cube::integer(&[-2, -2], 4).unwrap();
        assert!(matches!(
            slab_decompose(&c, q(4, 1), q(4, 1), 0, DEFAULT_POINT_BUDGET),
            Err(Error::DegenerateCenter)
        ));
    }

    #[test]
    fn slab_index_boundaries() {
        // ξ⁰ = (3,4), |ξ⁰| = 5, M = 1: ⟨ξ,ξ⁰⟩/5 for ξ = (3,4) is exactly 5.
        let center = vec![q(3, 1), q(4, 1)];
        assert_eq!(slab_index(&Frequency(vec![3, 4]), &center, &q(1, 1)).unwrap(), 6);
        assert_eq!(slab_index(&Frequency(vec![0, 0]), &center, &q(1, 1)).unwrap(), 1);
        // −1 exactly lies in [−1, 0), slab 0.
        assert_eq!(slab_index(&Frequency(vec![-3, -4]), &center, &q(5, 1)).unwrap(), 0);
        assert_eq!(slab_index(&Frequency(vec![-1, 0]), &center, &q(1, 1)).unwrap(), 0);
    }

    #[test]
    fn level_set_examples() {
        let pts = vec![Frequency(vec![0, 0]), Frequency(vec![1, 0]), Frequency(vec![0, 1])];
        let ls = level_sets(&pts, false, 2);
        assert_eq!(ls.len(), 2);
        assert_eq!(ls[&LevelKey { norm2: 1, torus: vec![] }].len(), 2);
        let ls = level_sets(&pts, true, 1);
        assert_eq!(ls.len(), 3);
        let c = Cube::integer(&[0, 0], 5).unwrap();
        let pts = enumerate_cube(&c, 0, DEFAULT_POINT_BUDGET).unwrap();
        let ls = level_sets(&pts, false, 0);
        assert_eq!(ls[&LevelKey { norm2: 25, torus: vec![] }].len(), 4);
        assert_eq!(level_sets(&pts[..1], true, 0).len(), 1);
    }

    #[test]
    fn circle_examples() {
        let z = Q::zero();
        assert_eq!(circle_count(z, z, q(5, 1), 25), 4);
        assert_eq!(circle_count(z, z, q(5, 1), 2), 1);
        assert_eq!(circle_count(q(10, 1), q(10, 1), q(3, 1), 1), 0);
        assert_eq!(circle_count(q(-5, 1), q(-5, 1), q(10, 1), 25), 12);
    }

    #[test]
    fn max_count_small_cases() {
        let r = max_circle_count(q(3, 1), 0..=0, &BSamples::Exhaustive, DEFAULT_POINT_BUDGET).unwrap();
        assert!(r.max_count <= 1);
        let fixed = BSamples::Fixed(vec![(Q::zero(), Q::zero())]);
        let r = max_circle_count(q(5, 1), 0..=10_000, &fixed, DEFAULT_POINT_BUDGET).unwrap();
        let brute = (0..=50u64)
            .map(|a| circle_count(Q::zero(), Q::zero(), q(5, 1), a))
            .max()
            .unwrap();
        assert_eq!(r.max_count, brute);
    }

    #[test]
    fn window_examples() {
        let s1 = ManifoldSpec::spheres(&[2]).unwrap();
        let pts = window_enumerate(q(1, 1), &s1, DEFAULT_POINT_BUDGET).unwrap();
        assert_eq!(pts, vec![Frequency(vec![1]), Frequency(vec![2])]);
        let s2 = ManifoldSpec::spheres(&[2, 2]).unwrap();
        let pts = window_enumerate(q(2, 1), &s2, DEFAULT_POINT_BUDGET).unwrap();
        let brute = (0..=4i64)
            .flat_map(|a| (0..=4i64).map(move |b| a * a + b * b))
            .filter(|n| (4..=16).contains(n))
            .count();
        assert_eq!(pts.len(), brute);
        let far = window_enumerate(q(8, 1), &s2, DEFAULT_POINT_BUDGET).unwrap();
        assert!(pts.iter().all(|p| !far.contains(p)));
    }

    #[test]
    fn frequency_csv() {
        let mut buf = Vec::new();
        write_frequencies_csv(&[Frequency(vec![1, -2])], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n1,n2\n1,-2\n");
    }
}
