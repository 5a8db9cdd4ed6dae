use super::*;
use crate::quasimomentum::ChartOptions;
use crate::transform::{evolve, Gaussian, TransformOptions};
use std::time::Instant;

fn setup(p: PeriodicPotential, bands: usize) -> (BandStructure<f64>, QuasimomentumChart) {
    let bs = BandStructure::compute(&p, bands + 1, None).unwrap();
    let chart = QuasimomentumChart::build(&bs, bands, ChartOptions::default()).unwrap();
    (bs, chart)
}

#[test]
fn free_kernel_exact() {
    let (bs, chart) = setup(PeriodicPotential::zero(), 12);
    let ev = KernelEvaluator::new(&bs, &chart, KernelOptions::default()).unwrap();
    for (x, y) in [(0.0, 0.0), (0.3, -0.4), (2.5, 0.1)] {
        let amp = ev.amplitude(x, y).unwrap();
        for t in [0.5, 1.0, 2.0, 8.0] {
            let s = ev.kernel_with(&amp, t).unwrap();
            let exact = free_kernel(t, x, y);
            assert!((s.value - exact).norm() / exact.norm() < 1e-6, "t {t} x {x}: {} vs {exact}", s.value);
            assert!(s.tail_bound >= s.tail_model.norm());
        }
    }
}

#[test]
fn amplitude_interpolation_matches_direct() {
    let (bs, chart) = setup(PeriodicPotential::mathieu(2.0), 6);
    let t0 = Instant::now();
    let amp = AmplitudeChart::build(&bs, &chart, 0.3, 0.85, 6, 24).unwrap();
    eprintln!("amplitude build {:?}", t0.elapsed());
    let mut worst: f64 = 0.0;
    for n in 0..6 {
        let b = chart.band(n);
        for j in 0..37 {
            let k = b.k_lo + (b.k_hi - b.k_lo) * (j as f64 + 0.31) / 37.0;
            let w = chart.w(k).unwrap();
            let direct = amplitude_at(&bs, n, w, 0.3, 0.85).unwrap();
            worst = worst.max((amp.eval(n, k) - direct).norm());
        }
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn mathieu_kernel_symmetric_and_consistent() {
    let (bs, chart) = setup(PeriodicPotential::mathieu(2.0), 12);
    let ev = KernelEvaluator::new(&bs, &chart, KernelOptions::default()).unwrap();
    let t0 = Instant::now();
    let a = ev.kernel(1.0, 0.3, -0.45).unwrap();
    eprintln!("kernel t=1 {:?}", t0.elapsed());
    let b = ev.kernel(1.0, -0.45, 0.3).unwrap();
    assert!((a.value - b.value).norm() < 1e-7, "{} vs {}", a.value, b.value);
    let sum: f64 = a.per_band.iter().map(|c| c.value().norm()).sum();
    assert!(a.value.norm() <= sum + a.tail_bound);
    // halving the tolerance moves each band by less than its error estimate
    let fine = KernelEvaluator::new(&bs, &chart, KernelOptions { tol: 5e-11, ..Default::default() }).unwrap();
    let c = fine.kernel(1.0, 0.3, -0.45).unwrap();
    for (p, q) in a.per_band.iter().zip(&c.per_band) {
        assert!((p.value() - q.value()).norm() <= p.error.max(1e-14), "band {}", p.n);
    }
    let t0 = Instant::now();
    let l = ev.kernel(64.0, 0.3, -0.45).unwrap();
    eprintln!("kernel t=64 {:?} converged {}", t0.elapsed(), l.converged);
}

#[test]
fn far_off_diagonal_bands_are_small() {
    let (bs, chart) = setup(PeriodicPotential::mathieu(2.0), 4);
    let ev = KernelEvaluator::new(&bs, &chart, KernelOptions { n_bands: 4, ..Default::default() }).unwrap();
    // band 1 group velocities stay below about 2 (n+1) pi, so |x - y| = 200 at t = 1 is non-stationary
    let near = ev.kernel(1.0, 0.2, 0.0).unwrap();
    let far = ev.kernel(1.0, 200.2, 0.0).unwrap();
    let b = |s: &KernelSample| s.per_band.iter().find(|c| c.n == 1).unwrap().value().norm();
    assert!(b(&far) < 0.05 * b(&near), "{} vs {}", b(&far), b(&near));
}

#[test]
fn van_der_corput_constants_and_example() {
    assert_eq!(van_der_corput_constant(1), 3.0);
    assert_eq!(van_der_corput_constant(2), 8.0);
    assert_eq!(van_der_corput_constant(3), 18.0);
    let req = VdcRequest {
        m: 2,
        c_m: 2.0,
        mu: 100.0,
        psi_endpoint_min: 1.0,
        psi_derivative_l1: 0.0,
    };
    let bound = van_der_corput_bound(&req).unwrap();
    assert!((bound - 8.0 / 200f64.sqrt()).abs() < 1e-15);
    let direct = oscillatory_integral(&Poly(vec![0.0, 0.0, 1.0]), &Poly(vec![1.0]), 100.0, 0.0, 1.0).norm();
    // |int_0^1 e^{100 i x^2}| ~ sqrt(pi) / 20
    assert!(direct < bound && (direct - 0.0886).abs() < 0.01, "{direct}");
    let zero = VdcRequest {
        psi_endpoint_min: 0.0,
        ..req
    };
    assert_eq!(van_der_corput_bound(&zero).unwrap(), 0.0);
    assert!(van_der_corput_bound(&VdcRequest { m: 0, ..req }).is_err());
}

#[test]
fn vdc_random_instances() {
    let r = vdc_verify(100, 7).unwrap();
    assert_eq!(r.violations, 0, "worst {}", r.worst_ratio);
}

#[test]
fn reference_matches_free_closed_form() {
    let g = Gaussian::new(0.0, 0.5);
    let xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
    let r = reference_propagator(&PeriodicPotential::zero(), &g, 1.0, &xs, 1e-6).unwrap();
    assert!(r.converged);
    for (x, u) in xs.iter().zip(&r.u) {
        assert!((u - g.free_evolution(1.0, *x)).norm() < 1e-8);
    }
}

#[test]
fn evolve_matches_reference_mathieu() {
    let (bs, chart) = setup(PeriodicPotential::mathieu(2.0), 12);
    let g = Gaussian::new(0.0, 0.5);
    for t in [0.0, 0.01, 0.1] {
        let e = evolve(&bs, &chart, &g, t, -3.0, 3.0, TransformOptions::default()).unwrap();
        let r = reference_propagator(&bs.potential, &g, t, &e.x, 1e-6).unwrap();
        let err = e.u.iter().zip(&r.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "t {t}: {err}");
    }
    let t0 = Instant::now();
    let ev = evolve(&bs, &chart, &g, 1.0, -12.0, 12.0, TransformOptions::default()).unwrap();
    eprintln!("evolve {:?}", t0.elapsed());
    let t0 = Instant::now();
    let r = reference_propagator(&bs.potential, &g, 1.0, &ev.x, 1e-6).unwrap();
    eprintln!("reference {:?} modes {} k {}", t0.elapsed(), r.modes, r.k_points);
    let err = ev.u.iter().zip(&r.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
    assert!(r.converged);
    // unitarity needs a window holding all the mass
    let wide = evolve(&bs, &chart, &g, 1.0, -80.0, 80.0, TransformOptions::default()).unwrap();
    assert!((wide.norm_ratio - 1.0).abs() < 1e-6, "{}", wide.norm_ratio);
}


#[test]
fn smoothed_kernel_matches_reference() {
    let (bs, chart) = setup(PeriodicPotential::mathieu(2.0), 12);
    let opts = KernelOptions { amplitude_nodes: 16, tol: 1e-8, ..Default::default() };
    let ev = KernelEvaluator::new(&bs, &chart, opts).unwrap();
    let g = Gaussian::new(0.0, 0.5);
    let ts = [0.5, 1.0, 2.0];
    let x = 0.35;
    let smoothed = ev.smoothed(&g, &ts, x, 64).unwrap();
    for (t, v) in ts.iter().zip(&smoothed) {
        let r = reference_propagator(&bs.potential, &g, *t, &[x], 1e-6).unwrap();
        assert!((v - r.u[0]).norm() < 1e-3, "t {t}: {v} vs {}", r.u[0]);
    }
}
