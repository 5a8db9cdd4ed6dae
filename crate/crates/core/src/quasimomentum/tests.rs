use super::*;
use crate::floquet::discriminant;
use crate::potential::PeriodicPotential;
use crate::real::Mp;
use std::f64::consts::PI;

fn mathieu(n_max: usize) -> BandStructure<f64> {
    BandStructure::compute(&PeriodicPotential::mathieu(2.0), n_max, None).unwrap()
}

#[test]
fn free_band_function() {
    let bs = BandStructure::<f64>::compute(&PeriodicPotential::zero(), 6, None).unwrap();
    for &k in &[0.3, 1.7, 4.0, 7.1, 12.5] {
        let p = band_function(&bs, &k).unwrap();
        assert!((p.w - k).abs() < 1e-12, "w {} vs {k}", p.w);
        assert!((p.e_dot - 2.0 * k).abs() < 1e-9);
        assert!((p.e_ddot - 2.0).abs() < 1e-8, "E'' {}", p.e_ddot);
        assert!(p.e_dddot.abs() < 1e-6, "E''' {}", p.e_dddot);
    }
    assert!((k_of_w(&bs, &2.5).unwrap() - 2.5).abs() < 1e-13);
}

#[test]
fn quasimomentum_matches_discriminant() {
    let bs = mathieu(6);
    for n in 0..5 {
        let (lo, hi) = bs.band(n).unwrap();
        for j in 1..10 {
            let w = lo + (hi - lo) * j as f64 / 10.0;
            let p = band_point(&bs, &w, 1).unwrap();
            assert_eq!(p.band, n);
            let d = discriminant(&bs.potential, w).unwrap().d;
            assert!((p.k.cos() - d).abs() < 1e-12);
            assert!(p.k >= n as f64 * PI && p.k <= (n + 1) as f64 * PI);
            assert!(p.e_dot > 0.0);
        }
        // edges map to multiples of pi
        if n > 0 {
            assert!((k_of_w(&bs, &lo).unwrap() - n as f64 * PI).abs() < 1e-6);
        }
        assert!((k_of_w(&bs, &hi).unwrap() - (n + 1) as f64 * PI).abs() < 1e-6);
    }
}

#[test]
fn in_gap_is_rejected() {
    let bs = mathieu(3);
    let g = bs.gap(1);
    let mid = 0.5 * (g.lower + g.upper);
    assert!(matches!(k_of_w(&bs, &mid), Err(HillError::InGap { gap: 1, .. })));
}

#[test]
fn round_trip_k_w() {
    let bs = mathieu(6);
    for n in 0..5 {
        for j in 0..=20 {
            let k = (n as f64 + j as f64 / 20.0) * PI;
            let w = w_of_k(&bs, &k, None).unwrap();
            let back = k_of_w(&bs, &w).unwrap();
            // at an edge k ~ sqrt(1 - |D|) amplifies rounding to about 1e-8
            let tol = if j == 0 || j == 20 { 1e-7 } else { 1e-9 };
            assert!((back - k).abs() < tol, "band {n} k {k} back {back}");
        }
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let bs = mathieu(4);
    for n in 1..3 {
        let k = (n as f64 + 0.5) * PI;
        let p = band_function(&bs, &k).unwrap();
        let h = 1e-3;
        let e = |k: f64| band_function(&bs, &k).unwrap().energy;
        let fd1 = (e(k - 2.0 * h) - 8.0 * e(k - h) + 8.0 * e(k + h) - e(k + 2.0 * h)) / (12.0 * h);
        assert!((fd1 / p.e_dot - 1.0).abs() < 1e-8);
        let d = |k: f64| band_function(&bs, &k).unwrap().e_dot;
        let fd2 = (d(k - 2.0 * h) - 8.0 * d(k - h) + 8.0 * d(k + h) - d(k + 2.0 * h)) / (12.0 * h);
        assert!((fd2 / p.e_ddot - 1.0).abs() < 1e-4, "{fd2} vs {}", p.e_ddot);
        let dd = |k: f64| band_function(&bs, &k).unwrap().e_ddot;
        let fd3 = (dd(k - 2.0 * h) - 8.0 * dd(k - h) + 8.0 * dd(k + h) - dd(k + 2.0 * h)) / (12.0 * h);
        assert!((fd3 - p.e_dddot).abs() < 1e-4 * (1.0 + p.e_dddot.abs()), "{fd3} vs {}", p.e_dddot);
    }
}

#[test]
fn edge_values_are_finite() {
    let bs = mathieu(4);
    let lo = bs.gap(2).upper;
    let p = point_in_band(&bs, 2, &lo, 3).unwrap();
    assert!(p.edge_limited);
    assert!(p.e_dot.abs() < 1e-5);
    // E'' at a lower edge of an open gap is large and positive
    assert!(p.e_ddot > 2.0 && p.e_ddot.is_finite());
}

#[test]
fn extended_precision_agrees() {
    let p = PeriodicPotential::mathieu(2.0);
    let bs = mathieu(3);
    let bm = BandStructure::<Mp>::compute(&p, 3, None).unwrap();
    let w = 0.5 * (bs.band(1).unwrap().0 + bs.band(1).unwrap().1);
    let a = band_point(&bs, &w, 3).unwrap();
    let b = band_point(&bm, &Mp::from_f64(w), 3).unwrap().to_f64();
    assert!((a.k - b.k).abs() < 1e-13);
    assert!((a.e_ddot / b.e_ddot - 1.0).abs() < 1e-10);
    assert!((a.e_dddot - b.e_dddot).abs() < 1e-8 * (1.0 + b.e_dddot.abs()));
}

#[test]
fn free_has_no_inflection() {
    let bs = BandStructure::<f64>::compute(&PeriodicPotential::zero(), 4, None).unwrap();
    assert!(inflection_point(&bs, 2).unwrap().zeros.is_empty());
}

#[test]
fn mathieu_inflection_is_unique() {
    let bs = mathieu(6);
    // gap 5 is below 1e-10, so band 4 is left to the extended-precision test
    for n in 1..4 {
        let s = inflection_point(&bs, n).unwrap();
        let z = s.unique().expect("one zero");
        assert!(z.k > n as f64 * PI && z.k < (n + 1) as f64 * PI);
        assert!(z.e_dddot.abs() > 10.0 * z.noise, "{z:?}");
        // E'' is positive before and negative after
        let before = band_function(&bs, &(0.5 * (z.k + n as f64 * PI))).unwrap();
        let after = band_function(&bs, &(0.5 * (z.k + (n + 1) as f64 * PI))).unwrap();
        assert!(before.e_ddot > 0.0 && after.e_ddot < 0.0);
    }
}

#[test]
fn chart_interpolates() {
    let bs = mathieu(6);
    let chart = QuasimomentumChart::build(&bs, 5, ChartOptions::default()).unwrap();
    for n in 0..5 {
        for j in 1..40 {
            let k = (n as f64 + j as f64 / 40.0) * PI + 1e-3;
            let p = band_function(&bs, &k).unwrap();
            assert!((chart.w(k).unwrap() - p.w).abs() < 1e-11 * p.w.max(1.0), "band {n} k {k}");
            assert!((chart.e_dot(k).unwrap() - p.e_dot).abs() < 1e-8 * (1.0 + p.e_dot.abs()));
            assert!((chart.e_ddot(k).unwrap() - p.e_ddot).abs() < 1e-6 * (1.0 + p.e_ddot.abs()));
            assert!((chart.e_dot(-k).unwrap() + p.e_dot).abs() < 1e-8 * (1.0 + p.e_dot.abs()));
        }
    }
    assert!(chart.band(1).inflection.is_some());
    assert!(chart.band(1).partition.left_near.is_some());
}

#[test]
fn constant_potential_asymptotics() {
    let p = PeriodicPotential::constant(3.0);
    let bs = BandStructure::<f64>::compute(&p, 30, None).unwrap();
    // after the shift the operator is free, so w = k exactly
    for n in [10, 20, 28] {
        let w = (n as f64 + 0.5) * PI;
        let r = asymptotic_residual(&bs, w).unwrap();
        assert!(r.r1.abs() < 1e-10, "{r:?}");
    }
}

#[test]
fn mathieu_asymptotics_bounded() {
    let bs = mathieu(42);
    let mut scaled = Vec::new();
    for n in [10, 20, 30, 40] {
        let (lo, hi) = bs.band(n).unwrap();
        let r = asymptotic_residual(&bs, 0.5 * (lo + hi)).unwrap();
        scaled.push(r.scaled1);
        // the next term is Q_2 / w^3
        assert!(r.scaled3 < 10.0 * r.scaled1 + 10.0, "{r:?}");
    }
    let q2 = bs.potential.moment_q2();
    for s in &scaled {
        assert!((s / q2 - 1.0).abs() < 0.05, "{scaled:?} vs Q2 {q2}");
    }
}

#[test]
fn trace_formula_for_q0() {
    let bs = mathieu(10);
    let d = GapDensities::build(&bs).unwrap();
    let q0 = bs.potential.moment_q0();
    assert!((d.trace_q0() / q0 - 1.0).abs() < 1e-8, "{} vs {q0}", d.trace_q0());
}

#[test]
fn p_prime_matches_dk_dw() {
    let bs = mathieu(10);
    let d = GapDensities::build(&bs).unwrap();
    for n in 0..6 {
        let (lo, hi) = bs.band(n).unwrap();
        let u = 0.5 * (lo + hi);
        let p = band_point(&bs, &u, 1).unwrap();
        let series = d.p_prime(u, 1.0).unwrap();
        assert!((series / p.dk_dw() - 1.0).abs() < 1e-5, "band {n}: {series} vs {}", p.dk_dw());
    }
    let edge = bs.gap(1).upper + 1e-3;
    assert!(d.p_prime(edge, 8.0).is_err());
}

#[test]
fn density_bounds() {
    let bs = mathieu(6);
    // gap 4 is near 1e-8, where q^2 is at the rounding level of 1 - |D|
    for n in 1..4 {
        let g = gap_density(&bs, n).unwrap();
        let b = g.bounds().unwrap();
        assert!(b.min_ratio >= 1.0 - 1e-9, "gap {n}: {b:?}");
        assert!(b.max_ratio < 2.0, "gap {n}: {b:?}");
        assert_eq!(g.eval(g.lower).unwrap(), 0.0);
        assert_eq!(g.eval(g.upper).unwrap(), 0.0);
    }
}

#[test]
fn poisson_boundary_values() {
    let bs = mathieu(8);
    let d = GapDensities::build(&bs).unwrap();
    let (lo, hi) = bs.band(2).unwrap();
    assert_eq!(poisson_extension(&d, 0.5 * (lo + hi), 0.0).unwrap().value, 0.0);
    let g = &d.gaps[0];
    let u = g.lower + 0.3 * g.length();
    let q = g.eval(u).unwrap();
    let at0 = poisson_extension(&d, u, 0.0).unwrap().value;
    assert_eq!(at0, q);
    let small = poisson_extension(&d, u, 1e-6).unwrap().value;
    assert!((small - q).abs() < 1e-4 * q, "{small} vs {q}");
}

#[test]
fn poisson_near_gap_regime() {
    let bs = mathieu(8);
    let d = GapDensities::build(&bs).unwrap();
    let g = &d.gaps[1];
    for frac in [0.05, 0.2, 0.5] {
        let u = g.lower + frac * g.length();
        let dist = (u - g.lower).min(g.upper - u);
        let v = 0.5 * dist;
        let pv = poisson_extension(&d, u, v).unwrap();
        let i_n = pv.terms.iter().find(|t| t.0 == g.n).unwrap().1;
        let ratio = i_n / (g.length() * dist).sqrt();
        assert!(ratio > 0.2 && ratio < 5.0, "frac {frac}: ratio {ratio}");
    }
}

#[test]
fn gap_integral_examples() {
    let v = exact_gap_integral(0.0, 1.0, 2.0, 3).unwrap();
    assert!((v + PI / (8.0 * 2f64.powf(1.5))).abs() < 1e-15);
    assert!((v - gap_integral_quadrature(0.0, 1.0, 2.0, 3)).abs() < 1e-12);
    let v4 = exact_gap_integral(0.0, 1.0, -1.0, 4).unwrap();
    assert!((v4 - 3.0 * PI / (64.0 * 2f64.sqrt())).abs() < 1e-15);
    assert!((v4 - gap_integral_quadrature(0.0, 1.0, -1.0, 4)).abs() < 1e-12);
    let refl = exact_gap_integral(-1.0, 0.0, 1.0, 4).unwrap();
    assert!((v4 - refl).abs() < 1e-15);
    assert!(exact_gap_integral(0.0, 1.0, 0.5, 3).is_err());
    assert!(exact_gap_integral(0.0, 1.0, 2.0, 5).is_err());
}

#[test]
fn extended_precision_inflection() {
    let bm = BandStructure::<Mp>::compute(&PeriodicPotential::mathieu(2.0), 6, None).unwrap();
    for n in [4, 5] {
        let s = inflection_point(&bm, n).unwrap();
        let z = s.unique().expect("one zero");
        assert!(z.k > n as f64 * PI && z.k < (n + 1) as f64 * PI);
        assert!(z.e_dddot.abs() > 10.0 * z.noise, "{z:?}");
    }
}
