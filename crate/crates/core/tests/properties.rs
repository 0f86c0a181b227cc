use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use strichartz_lab::experiments::fit_exponent;
use strichartz_lab::expsum::{
    build_cutoff, circle_distance, dirichlet_approx, eval_on_grid, exp_sum_norm, level_set_l2_squared,
    weyl_sum, CoefficientVector, GridSizing, NormOptions,
};
use strichartz_lab::lattice::{circle_count, enumerate_cube, level_sets, slab_decompose, Cube, Frequency};
use strichartz_lab::packets::{
    packet_l2_at, strichartz_lhs, strichartz_lhs_direct, JointMode, LhsOptions, Packet,
};
use strichartz_lab::quadrature::{
    build_sphere_quadrature, mixed_norm, sphere_moment, DomainFactor, MixedNormSpec, PeriodicGrid,
    DEFAULT_NODE_BUDGET,
};
use strichartz_lab::regularity::{mljspe_constant, mls_constant, FreeParams, SlackExpr};
use strichartz_lab::specialfn::{gegenbauer, SphereMode};
use strichartz_lab::{LpExponent, ManifoldSpec, Q};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn unit_vector(raw: &[f64]) -> Vec<f64> {
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| v / n).collect()
}

fn point_on(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim + 1)
        .prop_filter("away from the origin", |v| v.iter().map(|x| x * x).sum::<f64>() > 0.05)
        .prop_map(|v| unit_vector(&v))
}

/// Laplacian in ℝ^{d+1} of x ↦ |x|^n Y(x/|x|) by central differences.
fn ambient_laplacian(mode: &SphereMode, x: &[f64], h: f64) -> f64 {
    let f = |y: &[f64]| {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let u: Vec<f64> = y.iter().map(|v| v / r).collect();
        r.powi(mode.degree as i32) * mode.eval(&u).re
    };
    let f0 = f(x);
    let mut lap = 0.0;
    for i in 0..x.len() {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[i] += h;
        m[i] -= h;
        lap += (f(&p) - 2.0 * f0 + f(&m)) / (h * h);
    }
    lap
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gegenbauer_closed_forms(alpha in 0.5f64..4.0, x in -1.0f64..1.0) {
        let a = alpha;
        let closed = [
            1.0,
            2.0 * a * x,
            2.0 * a * (1.0 + a) * x * x - a,
            4.0 / 3.0 * a * (1.0 + a) * (2.0 + a) * x.powi(3) - 2.0 * a * (1.0 + a) * x,
            2.0 / 3.0 * a * (a + 1.0) * (a + 2.0) * (a + 3.0) * x.powi(4)
                - 2.0 * a * (a + 1.0) * (a + 2.0) * x * x
                + a * (a + 1.0) / 2.0,
        ];
        for (n, want) in closed.iter().enumerate() {
            let got = gegenbauer(alpha, n as u32, x);
            prop_assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()), "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn zonal_modes_are_orthonormal(dim in 2usize..5, n in 0u32..6, m in 0u32..6) {
        let a = SphereMode::zonal(dim, n).unwrap();
        let b = SphereMode::zonal(dim, m).unwrap();
        let q = build_sphere_quadrature(dim, (n + m) as usize, DEFAULT_NODE_BUDGET).unwrap();
        let ip = q.integrate(|x| a.eval(x) * b.eval(x).conj());
        let want = if n == m { 1.0 } else { 0.0 };
        prop_assert!((ip - c(want, 0.0)).norm() < 1e-10, "{ip}");
    }

    #[test]
    fn modes_extend_to_harmonic_polynomials(
        dim in 2usize..5,
        n in 1u32..6,
        zonal in any::<bool>(),
        x in point_on(4),
    ) {
        let mode = if zonal { SphereMode::zonal(dim, n) } else { SphereMode::highest_weight(dim, n) }.unwrap();
        let x = unit_vector(&x[..=dim]);
        // A function on the sphere is a degree-n eigenfunction exactly when its
        // degree-n homogeneous extension is harmonic.
        let (coarse, fine) = (ambient_laplacian(&mode, &x, 2e-2), ambient_laplacian(&mode, &x, 1e-2));
        let lap = (4.0 * fine - coarse) / 3.0;
        let scale = mode.laplace_eigenvalue().max(1.0);
        prop_assert!(lap.abs() < 1e-5 * scale, "Δ = {lap}");
    }

    #[test]
    fn highest_weight_modulus_depends_on_plane_radius(dim in 2usize..5, n in 1u32..8, x in point_on(4), angle in 0.0f64..(2.0 * PI)) {
        let mode = SphereMode::highest_weight(dim, n).unwrap();
        let x = unit_vector(&x[..=dim]);
        let mut y = x.clone();
        let (s, co) = angle.sin_cos();
        y[0] = co * x[0] - s * x[1];
        y[1] = s * x[0] + co * x[1];
        y[2..].reverse();
        let (a, b) = (mode.eval(&x).norm(), mode.eval(&y).norm());
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a), "{a} vs {b}");
    }

    #[test]
    fn quadrature_reproduces_moments(dim in 2usize..6, raw in prop::collection::vec(0u32..4, 6)) {
        let alpha = &raw[..=dim];
        let degree: u32 = alpha.iter().sum();
        let q = build_sphere_quadrature(dim, degree as usize, DEFAULT_NODE_BUDGET).unwrap();
        let got = q.integrate_real(|x| x.iter().zip(alpha).map(|(v, &a)| v.powi(a as i32)).product());
        prop_assert!((got - sphere_moment(alpha)).abs() < 1e-12, "{got} vs {}", sphere_moment(alpha));
    }

    #[test]
    fn periodic_grid_is_exact_below_its_size(m in 1usize..40, k in -39i64..40) {
        prop_assume!(k.unsigned_abs() < m as u64);
        let v = PeriodicGrid::new(m).integrate(|t| Complex64::from_polar(1.0, k as f64 * t));
        let want = if k == 0 { 1.0 } else { 0.0 };
        prop_assert!((v - c(want, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn mixed_norm_triangle_inequality(
        p in 1.0f64..6.0,
        q in 1.0f64..6.0,
        fa in prop::collection::vec(-2.0f64..2.0, 4),
        fb in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let domain = [
            DomainFactor::Sphere(build_sphere_quadrature(2, 6, DEFAULT_NODE_BUDGET).unwrap()),
            DomainFactor::Periodic(PeriodicGrid::new(9)),
        ];
        let spec = MixedNormSpec::new(vec![(0, p), (1, q)]);
        let make = |v: Vec<f64>| {
            move |x: &[&[f64]]| c(v[0] + v[1] * x[0][2], v[2] * x[0][0]) * Complex64::from_polar(1.0, v[3] * x[1][0])
        };
        let (f, g) = (make(fa.clone()), make(fb.clone()));
        let nf = mixed_norm(&domain, &spec, &f).unwrap();
        let ng = mixed_norm(&domain, &spec, &g).unwrap();
        let nfg = mixed_norm(&domain, &spec, |x: &[&[f64]]| f(x) + g(x)).unwrap();
        prop_assert!(nfg <= nf + ng + 1e-12);
    }

    #[test]
    fn all_two_mixed_norm_is_flat_l2(coef in prop::collection::vec(-2.0f64..2.0, 3)) {
        let sphere = build_sphere_quadrature(2, 4, DEFAULT_NODE_BUDGET).unwrap();
        let grid = PeriodicGrid::new(7);
        let f = |x: &[f64], th: f64| c(coef[0] + coef[1] * x[1], coef[2] * x[2] * th.cos());
        let domain = [DomainFactor::Sphere(sphere.clone()), DomainFactor::Periodic(grid)];
        let mixed = mixed_norm(&domain, &MixedNormSpec::new(vec![(1, 2.0), (0, 2.0)]), |x: &[&[f64]]| f(x[0], x[1][0])).unwrap();
        let mut flat = 0.0;
        for i in 0..sphere.len() {
            for j in 0..grid.num_points {
                flat += sphere.weights[i] * grid.weight() * f(sphere.node(i), grid.node(j)).norm_sqr();
            }
        }
        prop_assert!((mixed - flat.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn slabs_partition_the_cube(
        b in prop::collection::vec(-6i64..6, 3),
        side in 1i64..6,
        n2 in 1i64..6,
        extra in 0i64..40,
        r0 in 0usize..3,
    ) {
        prop_assume!(b.iter().any(|&v| 2 * v + side != 0));
        let n1 = n2 + extra;
        let cube = Cube::integer(&b, side).unwrap();
        let slabs = slab_decompose(&cube, Q::from_integer(n1), Q::from_integer(n2), r0, 1 << 20).unwrap();
        let mut seen = BTreeSet::new();
        for s in &slabs {
            for xi in &s.points {
                prop_assert!(s.contains(xi));
                prop_assert!(seen.insert(xi.clone()), "{xi} in two slabs");
            }
        }
        let all: BTreeSet<Frequency> = enumerate_cube(&cube, r0, 1 << 20).unwrap().into_iter().collect();
        prop_assert_eq!(seen, all);
    }

    #[test]
    fn circle_count_matches_brute_force(b1 in -8i64..8, b2 in -8i64..8, n in 1i64..8, a in 0u64..80) {
        let want = (b1..=b1 + n)
            .flat_map(|x| (b2..=b2 + n).map(move |y| (x, y)))
            .filter(|&(x, y)| (x * x + y * y) as u64 == a)
            .count() as u64;
        let q = Q::from_integer;
        prop_assert_eq!(circle_count(q(b1), q(b2), q(n), a), want);
        prop_assert_eq!(circle_count(q(b2), q(b1), q(n), a), want);
        prop_assert_eq!(circle_count(q(-b1 - n), q(b2), q(n), a), want);
    }

    #[test]
    fn level_sets_reconstruct_their_input(b in prop::collection::vec(-5i64..5, 3), side in 1i64..4, r0 in 0usize..4, keep in any::<bool>()) {
        let freqs = enumerate_cube(&Cube::integer(&b, side).unwrap(), r0.min(3), 1 << 16).unwrap();
        let sets = level_sets(&freqs, keep, r0.min(3));
        let mut back: Vec<Frequency> = Vec::new();
        for (key, members) in &sets {
            for xi in members {
                prop_assert_eq!(xi.norm2(), key.norm2);
            }
            back.extend(members.iter().cloned());
        }
        back.sort();
        let mut orig = freqs.clone();
        orig.sort();
        prop_assert_eq!(back, orig);
    }

    #[test]
    fn l2_norm_is_level_set_sum(
        b in prop::collection::vec(-4i64..4, 3),
        side in 1i64..4,
        r1 in 0usize..4,
        seed in any::<u64>(),
    ) {
        let support = enumerate_cube(&Cube::integer(&b, side).unwrap(), 0, 1 << 16).unwrap();
        let mut s = seed;
        let values: Vec<Complex64> = (0..support.len())
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                c(((s >> 11) % 1000) as f64 / 500.0 - 1.0, ((s >> 31) % 1000) as f64 / 500.0 - 1.0)
            })
            .collect();
        let a = CoefficientVector::new(support, values).unwrap();
        let l2 = exp_sum_norm(&a, LpExponent::int(2), r1, &GridSizing::Auto, &NormOptions::default()).unwrap().value;
        let lev = level_set_l2_squared(&a, r1);
        prop_assert!((l2 * l2 - lev).abs() < 1e-10 * (1.0 + lev));
        if r1 == 3 {
            // All (|ξ|², ξ) are distinct: Parseval.
            prop_assert!((l2 - a.norm2()).abs() < 1e-10 * (1.0 + a.norm2()));
        }
    }

    #[test]
    fn integer_shifts_preserve_torus_norms(
        side in 1i64..5,
        shift in prop::collection::vec(-20i64..20, 2),
        p in prop::sample::select(vec![4u32, 6]),
    ) {
        let base = enumerate_cube(&Cube::integer(&[0, 0], side).unwrap(), 0, 1 << 16).unwrap();
        let moved: Vec<Frequency> = base.iter().map(|f| Frequency(vec![f.0[0] + shift[0], f.0[1] + shift[1]])).collect();
        let opts = NormOptions::default();
        let lp = LpExponent::int(p as i64);
        let a = exp_sum_norm(&CoefficientVector::constant(base).unwrap(), lp, 2, &GridSizing::Auto, &opts).unwrap();
        let b = exp_sum_norm(&CoefficientVector::constant(moved).unwrap(), lp, 2, &GridSizing::Auto, &opts).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-9 * a.value, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn even_power_grids_are_already_exact(b in prop::collection::vec(-3i64..3, 2), side in 1i64..4, r1 in 0usize..3) {
        let a = CoefficientVector::constant(enumerate_cube(&Cube::integer(&b, side).unwrap(), 0, 1 << 16).unwrap()).unwrap();
        let opts = NormOptions::default();
        let auto = exp_sum_norm(&a, LpExponent::int(4), r1, &GridSizing::Auto, &opts).unwrap();
        let doubled: Vec<usize> = auto.grid.iter().map(|m| 2 * m).collect();
        let fine = exp_sum_norm(&a, LpExponent::int(4), r1, &GridSizing::Fixed(doubled), &opts).unwrap();
        prop_assert!((auto.value - fine.value).abs() < 1e-10 * auto.value);
    }

    #[test]
    fn weyl_sums_obey_the_trivial_bound(b in -100i64..100, n in 2i64..200, t in 0.0f64..1.0) {
        let cut = build_cutoff(b, n).unwrap();
        let total: f64 = cut.support().map(|m| cut.value(m).powi(2)).sum();
        prop_assert!(weyl_sum(&cut, t).norm() <= total + 1e-9);
        prop_assert!((weyl_sum(&cut, 0.0).re - total).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_approximation_postcondition(t in 0.0f64..1.0, big_q in 1u64..100_000) {
        let r = dirichlet_approx(t, big_q).unwrap();
        prop_assert!(r.q >= 1 && r.q as u64 <= big_q && 1 <= r.a && r.a <= r.q);
        prop_assert!(circle_distance(t, r.a, r.q) <= 1.0 / (r.q as f64 * big_q as f64) + 1e-15);
    }

    #[test]
    fn fit_is_scale_invariant(
        slope in -2.0f64..2.0,
        scale_y in 0.01f64..100.0,
        scale_x in 0.1f64..10.0,
        wiggle in prop::collection::vec(-0.1f64..0.1, 5),
    ) {
        let pts: Vec<(f64, f64)> = [2.0f64, 4.0, 8.0, 16.0, 32.0]
            .iter()
            .zip(&wiggle)
            .map(|(&n, w)| (n, n.powf(slope) * w.exp()))
            .collect();
        let base = fit_exponent(&pts, 0).unwrap();
        let sy: Vec<_> = pts.iter().map(|&(n, v)| (n, scale_y * v)).collect();
        let sx: Vec<_> = pts.iter().map(|&(n, v)| (scale_x * n, v)).collect();
        prop_assert!((fit_exponent(&sy, 0).unwrap().slope - base.slope).abs() < 1e-10);
        prop_assert!((fit_exponent(&sx, 0).unwrap().slope - base.slope).abs() < 1e-10);
    }

    #[test]
    fn multilinear_constants_grow_with_each_frequency(
        dims in prop::collection::vec(2u32..6, 1..3),
        torus in 0u32..3,
        k in 1u32..4,
        raw in prop::collection::vec(1.0f64..200.0, 4),
        bump in 1.0f64..3.0,
        which in 0usize..4,
    ) {
        let spec = ManifoldSpec::new(dims, torus).unwrap();
        prop_assume!(spec.rank() >= 2);
        let mut n: Vec<f64> = raw[..=k as usize].to_vec();
        n.sort_by(|a, b| b.total_cmp(a));
        let which = which.min(k as usize);
        let mut up = n.clone();
        up[which] *= bump;
        up.sort_by(|a, b| b.total_cmp(a));
        for constant in [
            mls_constant(&spec, k, &FreeParams::default()),
            mljspe_constant(&ManifoldSpec::new(spec.sphere_dims().to_vec(), 0).unwrap(), k, 1e-3),
        ] {
            let Ok(constant) = constant else { continue };
            let lo = constant.evaluate_without_gain(&n).unwrap();
            let hi = constant.evaluate_without_gain(&up).unwrap();
            prop_assert!(hi >= lo * (1.0 - 1e-12), "{lo} -> {hi}");
        }
    }
}

#[test]
fn single_sphere_joint_projector_matches_the_classical_bound() {
    let q = |a: i64, b: i64| Q::new(a, b);
    let eta = 1e-3;
    for d in 2u32..=8 {
        let spec = ManifoldSpec::spheres(&[d]).unwrap();
        let d2 = if d == 2 { 1 } else { 0 };
        let d3 = if d == 3 { 1 } else { 0 };
        let low = q(d as i64 - 2, 2) + q(d2, 4);
        for k in 1u32..=3 {
            let got = mljspe_constant(&spec, k, eta).unwrap();
            if k == 1 {
                assert_eq!(got.exponent(2), SlackExpr::constant(low), "d={d}");
                assert_eq!(got.log_power(2), q(d3, 2), "d={d}");
            } else {
                let e2 = got.exponent(2);
                assert_eq!((e2.constant, e2.eta), (low, q(d3, 1)), "d={d} k={k}");
                let e3 = got.exponent(3);
                assert_eq!((e3.constant, e3.eta), (q(d as i64 - 1, 2) - q(d2, 4), q(-d3, 1)), "d={d} k={k}");
                for j in 4..=k as usize + 1 {
                    assert_eq!(got.exponent(j), SlackExpr::constant(q(d as i64 - 1, 2)), "d={d} k={k}");
                }
            }
            assert_eq!(got.exponent(1), SlackExpr::default());
        }
    }
}

fn s2t1() -> ManifoldSpec {
    ManifoldSpec::new(vec![2], 1).unwrap()
}

/// A zonal packet on S²×T with distinct (degree, torus) pairs.
fn packet_strategy() -> impl Strategy<Value = Packet> {
    prop::collection::btree_map((0u32..5, -3i64..4), (-1.0f64..1.0, -1.0f64..1.0), 1..5).prop_map(|terms| {
        let terms = terms
            .into_iter()
            .map(|((n, m), (re, im))| (JointMode::new(vec![SphereMode::zonal(2, n).unwrap()], vec![m]), c(re, im)))
            .collect();
        Packet::new(&s2t1(), terms, None).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn level_set_lhs_matches_direct_integration(f in packet_strategy(), g in packet_strategy()) {
        let opts = LhsOptions::default();
        let pk = vec![f, g];
        let a = strichartz_lhs(&pk, &s2t1(), &opts).unwrap();
        let b = strichartz_lhs_direct(&pk, &s2t1(), &opts).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * (1.0 + b), "{a} vs {b}");
    }

    #[test]
    fn lhs_is_symmetric(f in packet_strategy(), g in packet_strategy(), h in packet_strategy()) {
        let spec = s2t1();
        let opts = LhsOptions::default();
        let base = strichartz_lhs(&[f.clone(), g.clone(), h.clone()], &spec, &opts).unwrap();
        let perm = strichartz_lhs(&[h.clone(), f.clone(), g.clone()], &spec, &opts).unwrap();
        prop_assert!((base - perm).abs() < 1e-10 * (1.0 + base));
        let scaled = strichartz_lhs(&[f.scaled(c(0.0, 2.0)), g.clone(), h.clone()], &spec, &opts).unwrap();
        prop_assert!((scaled - 2.0 * base).abs() < 1e-10 * (1.0 + base));
    }

    #[test]
    fn conjugation_preserves_real_mode_products(
        a in prop::collection::btree_map(0u32..6, (-1.0f64..1.0, -1.0f64..1.0), 1..4),
        b in prop::collection::btree_map(0u32..6, (-1.0f64..1.0, -1.0f64..1.0), 1..4),
    ) {
        // Zonal modes are real, so conjugating the coefficients conjugates the
        // data, and |∏ e^{itΔ} f̄_j| is |∏ e^{itΔ} f_j| at time −t.
        let spec = ManifoldSpec::spheres(&[2, 2]).unwrap();
        let make = |m: &BTreeMap<u32, (f64, f64)>| {
            let terms = m
                .iter()
                .map(|(&n, &(re, im))| {
                    let z = |d| SphereMode::zonal(2, d).unwrap();
                    (JointMode::new(vec![z(n), z((n + 1) % 4)], vec![]), c(re, im))
                })
                .collect();
            Packet::new(&spec, terms, None).unwrap()
        };
        let (f, g) = (make(&a), make(&b));
        let opts = LhsOptions::default();
        let x = strichartz_lhs(&[f.clone(), g.clone()], &spec, &opts).unwrap();
        let y = strichartz_lhs(&[f.conj(), g.conj()], &spec, &opts).unwrap();
        prop_assert!((x - y).abs() < 1e-10 * (1.0 + x));
    }

    #[test]
    fn evolution_is_unitary(f in packet_strategy(), t in 0.0f64..(2.0 * PI)) {
        let got = packet_l2_at(&f, t, &LhsOptions::default()).unwrap();
        prop_assert!((got - f.norm()).abs() < 1e-10 * (1.0 + f.norm()));
    }

    #[test]
    fn torus_characters_have_unit_product(
        freqs in prop::collection::vec(prop::collection::vec(-50i64..50, 2), 2..5),
    ) {
        let spec = ManifoldSpec::torus(2).unwrap();
        let pk: Vec<Packet> = freqs.into_iter().map(|f| Packet::single(&spec, JointMode::torus(f)).unwrap()).collect();
        let lhs = strichartz_lhs(&pk, &spec, &LhsOptions::default()).unwrap();
        prop_assert!((lhs - 1.0).abs() < 1e-12);
    }
}

#[test]
fn grid_evaluation_matches_direct_sum() {
    let mut terms = BTreeMap::new();
    terms.insert(vec![3i128, -1], c(1.0, 0.5));
    terms.insert(vec![-2, 2], c(-0.25, 0.0));
    terms.insert(vec![0, 0], c(0.0, 2.0));
    let sizes = [7usize, 5];
    let vals = eval_on_grid(&terms, &sizes);
    for i in 0..7 {
        for j in 0..5 {
            let (t, x) = (2.0 * PI * i as f64 / 7.0, 2.0 * PI * j as f64 / 5.0);
            let direct: Complex64 = terms
                .iter()
                .map(|(k, v)| v * Complex64::from_polar(1.0, k[0] as f64 * t + k[1] as f64 * x))
                .sum();
            assert_relative_eq!(vals[i * 5 + j].re, direct.re, epsilon = 1e-12);
            assert_relative_eq!(vals[i * 5 + j].im, direct.im, epsilon = 1e-12);
        }
    }
}
