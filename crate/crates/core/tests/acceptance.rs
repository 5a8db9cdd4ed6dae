//! Acceptance run: one verdict line per criterion.
//!
//! Two criteria cannot hold as stated and are expected to print FAIL:
//! the four-fold derivative identity (2) and the short-time decay slope (11).
//! For those the run instead checks the measured diagnosis, so an unexpected
//! verdict in either direction makes the run fail.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use hillwave::bloch::identity_suite;
use hillwave::kernel::{
    decay_envelope, decay_report, log_log_slope, reference_propagator, stationary_targets, vdc_verify,
    KernelEvaluator, KernelOptions, XySample,
};
use hillwave::potential::PeriodicPotential;
use hillwave::quasimomentum::{
    asymptotic_residual, edge_law_ratio, exact_gap_integral, gap_integral_quadrature, inflection_point, ChartOptions,
    QuasimomentumChart,
};
use hillwave::real::{Mp, Real};
use hillwave::spectrum::BandStructure;
use hillwave::transform::{evolve, transform_check, Gaussian, TransformOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Res<T> = Result<T, Box<dyn std::error::Error>>;
type Criterion = (u32, &'static str, fn() -> Res<Outcome>);

struct Outcome {
    pass: bool,
    detail: String,
    /// Set for criteria known not to hold: whether the recorded diagnosis was confirmed.
    diagnosis: Option<(bool, String)>,
}

impl Outcome {
    fn plain(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, diagnosis: None }
    }
}

fn mathieu() -> PeriodicPotential {
    PeriodicPotential::mathieu(2.0)
}

fn setup(p: &PeriodicPotential, bands: usize) -> Res<(BandStructure<f64>, QuasimomentumChart)> {
    let bs = BandStructure::compute(p, bands + 1, None)?;
    let chart = QuasimomentumChart::build(&bs, bands, ChartOptions::default())?;
    Ok((bs, chart))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Largest value on the upper half of `v` against the lower half.
fn growth(v: &[f64]) -> f64 {
    let h = v.len() / 2;
    let lo = v[..h].iter().cloned().fold(0.0, f64::max);
    let hi = v[h..].iter().cloned().fold(0.0, f64::max);
    hi / lo
}

fn free_case() -> Res<Outcome> {
    let (bs, chart) = setup(&PeriodicPotential::zero(), 12)?;
    let ev = KernelEvaluator::new(&bs, &chart, KernelOptions::default())?;
    let pairs = [(0.3, -0.4), (1.0, 0.0), (2.5, 0.1), (-0.7, 0.45)];
    let (mut modulus, mut phase) = (0.0f64, 0.0f64);
    for t in [0.5, 1.0, 2.0, 8.0] {
        let k0 = ev.kernel(t, 0.0, 0.0)?.value;
        modulus = modulus.max((k0.norm() * (4.0 * PI * t).sqrt() - 1.0).abs());
        for (x, y) in pairs {
            let k = ev.kernel(t, x, y)?.value;
            let d: f64 = x - y;
            phase = phase.max(wrap((k / k0).arg() + d * d / (4.0 * t)).abs());
        }
    }
    Ok(Outcome::plain(
        modulus <= 1e-4 && phase <= 1e-3,
        format!("modulus rel err {modulus:.2e} (tol 1e-4), phase err {phase:.2e} (tol 1e-3)"),
    ))
}

/// 200 interior points spread over bands 1..=12.
fn band_samples(bs: &BandStructure<f64>) -> Res<Vec<f64>> {
    let mut w = Vec::with_capacity(200);
    for i in 0..200 {
        let n = 1 + i % 12;
        let j = i / 12;
        let (a, b) = bs.band(n)?;
        w.push(a + (j + 1) as f64 / 18.0 * (b - a));
    }
    Ok(w)
}

fn discriminant_identity() -> Res<Outcome> {
    let bs = BandStructure::compute(&mathieu(), 13, None)?;
    let id = identity_suite(&bs, &band_samples(&bs)?, 64)?;
    let pass = id.worst_cos_k <= 1e-10 && id.worst_d_prime_four <= 1e-6;
    let detail = format!(
        "|cos k - D| {:.2e} (tol 1e-10), |D' + 4 w phi N^2|/|D'| {:.3e} (tol 1e-6)",
        id.worst_cos_k, id.worst_d_prime_four
    );
    // D' = -sin k dk/dw together with criterion 3 forces D' = -w phi N^2,
    // so the four-fold form is off by exactly 3
    let off_by_three = id.rows.iter().all(|r| (r.d_prime_four - 3.0).abs() < 1e-6);
    let ok = id.worst_cos_k <= 1e-10 && id.worst_d_prime <= 1e-6 && off_by_three;
    Ok(Outcome {
        pass,
        detail,
        diagnosis: Some((
            ok,
            format!(
                "residual of the four-fold form is 3 at every sample; |D' + w phi N^2|/|D'| {:.2e}",
                id.worst_d_prime
            ),
        )),
    })
}

fn e_dot_identity() -> Res<Outcome> {
    let bs = BandStructure::compute(&mathieu(), 13, None)?;
    let id = identity_suite(&bs, &band_samples(&bs)?, 64)?;
    Ok(Outcome::plain(
        id.worst_e_dot <= 1e-6,
        format!("|E' phi N^2 / (2 sin k) - 1| {:.2e} over {} samples (tol 1e-6)", id.worst_e_dot, id.rows.len()),
    ))
}

fn gap_closed_forms() -> Res<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut sign_mismatch = 0;
    for _ in 0..50 {
        let a = rng.gen_range(-5.0..5.0);
        let b = a + rng.gen_range(0.01..3.0);
        let gap = rng.gen_range(0.01..5.0);
        let u = if rng.gen_bool(0.5) { a - gap } else { b + gap };
        for p in [3, 4] {
            let exact = exact_gap_integral(a, b, u, p)?;
            let quad = gap_integral_quadrature(a, b, u, p);
            worst = worst.max((exact.abs() - quad.abs()).abs() / quad.abs());
            if exact.signum() != quad.signum() {
                sign_mismatch += 1;
            }
        }
    }
    Ok(Outcome::plain(
        worst <= 1e-8 && sign_mismatch == 0,
        format!("magnitude rel err {worst:.2e} (tol 1e-8), sign mismatches {sign_mismatch}"),
    ))
}

fn large_k_integrals() -> Res<Outcome> {
    let bs = BandStructure::compute(&mathieu(), 26, None)?;
    let mids = (5..=25)
        .map(|n| bs.band(n).map(|(a, b)| 0.5 * (a + b)))
        .collect::<Result<Vec<_>, _>>()?;
    let id = identity_suite(&bs, &mids, 64)?;
    let mut worst_growth = 0.0f64;
    let mut sup = 0.0f64;
    for i in 0..3 {
        let v: Vec<f64> = id.rows.iter().map(|r| r.large_k[i]).collect();
        worst_growth = worst_growth.max(growth(&v));
        sup = v.iter().cloned().fold(sup, f64::max);
    }
    Ok(Outcome::plain(
        sup.is_finite() && worst_growth <= 1.0,
        format!("k^2 residual sup {sup:.3} on k in [5pi, 26pi], upper/lower half max {worst_growth:.3} (need <= 1)"),
    ))
}

fn quasimomentum_asymptotics() -> Res<Outcome> {
    let bs = BandStructure::compute(&mathieu(), 41, None)?;
    let mut s = Vec::new();
    for n in 10..=40 {
        let (a, b) = bs.band(n)?;
        s.push(asymptotic_residual(&bs, 0.5 * (a + b))?.scaled1);
    }
    let g = growth(&s);
    let sup = s.iter().cloned().fold(0.0, f64::max);
    Ok(Outcome::plain(
        g <= 1.0,
        format!(
            "|w - k - Q0/w| w^3 sup {sup:.4} (Q2 = {:.4}), upper/lower half max {g:.4} (need <= 1)",
            bs.potential.moment_q2()
        ),
    ))
}

fn edge_law() -> Res<Outcome> {
    let bm = BandStructure::<Mp>::compute(&mathieu(), 9, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 1.0f64;
    for n in 1..=8 {
        let g = bm.gap_length(n);
        let mut fr = log_grid(1e-6, 0.5, 16);
        fr.extend((0..16).map(|_| 10f64.powf(rng.gen_range(-6.0..(0.5f64).log10()))));
        let r = fr
            .iter()
            .map(|f| edge_law_ratio(&bm, n, &(bm.gap(n).upper.clone() + Mp::from_f64(f * g))))
            .collect::<Result<Vec<_>, _>>()?;
        let hi = r.iter().cloned().fold(f64::MIN, f64::max);
        let lo = r.iter().cloned().fold(f64::MAX, f64::min);
        worst = worst.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
    }
    Ok(Outcome::plain(worst <= 10.0, format!("largest max/min ratio over bands 1-8: {worst:.3} (need <= 10)")))
}

fn inflection() -> Res<Outcome> {
    let bm = BandStructure::<Mp>::compute(&mathieu(), 9, None)?;
    let mut pass = true;
    let mut margin = f64::INFINITY;
    let mut counts = Vec::new();
    for n in 1..=8 {
        let s = inflection_point(&bm, n)?;
        counts.push(s.zeros.len());
        match s.unique() {
            Some(z) => {
                margin = margin.min(z.e_dddot.abs() / z.noise);
                pass &= z.e_dddot.abs() > z.noise;
            }
            None => pass = false,
        }
    }
    Ok(Outcome::plain(pass, format!("zeros per band {counts:?}, min |E'''|/noise {margin:.2e}")))
}

fn transform_suite() -> Res<Outcome> {
    let (bs, chart) = setup(&mathieu(), 12)?;
    let c = transform_check(&bs, &chart, &Gaussian::new(0.2, 0.5), TransformOptions::default())?;
    Ok(Outcome::plain(
        c.parseval_defect <= 1e-6 && c.inversion_error <= 1e-4 && c.diagonalization <= 1e-5,
        format!(
            "Parseval {:.2e} (1e-6), inversion {:.2e} (1e-4), diagonalization {:.2e} (1e-5)",
            c.parseval_defect, c.inversion_error, c.diagonalization
        ),
    ))
}

fn propagator() -> Res<Outcome> {
    let (bs, chart) = setup(&mathieu(), 12)?;
    let g = Gaussian::new(0.0, 0.5);
    let e = evolve(&bs, &chart, &g, 1.0, -12.0, 12.0, TransformOptions::default())?;
    let r = reference_propagator(&bs.potential, &g, 1.0, &e.x, 1e-6)?;
    let err = e.u.iter().zip(&r.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(Outcome::plain(
        err <= 1e-3 && r.converged,
        format!("L-inf difference {err:.2e} on [-12, 12] (tol 1e-3), reference converged {}", r.converged),
    ))
}

fn decay() -> Res<Outcome> {
    let (bs, chart) = setup(&mathieu(), 12)?;
    let ev = KernelEvaluator::new(&bs, &chart, KernelOptions::default())?;
    let mut samples = vec![
        XySample::Fixed { x: 0.0, y: 0.0 },
        XySample::Fixed { x: 0.5, y: 0.0 },
        XySample::Fixed { x: 0.25, y: -0.25 },
    ];
    samples.extend(stationary_targets(&chart, 4).into_iter().map(|v| XySample::Velocity { v, y: 0.0 }));
    let long = decay_report(&ev, &log_grid(1.0, 64.0, 16), &samples)?;
    let short = decay_report(&ev, &log_grid(1.0 / 16.0, 1.0, 16), &samples)?;
    let pass = long.slope <= 0.05 && long.converged && short.slope <= 0.05 && short.converged;
    let detail = format!(
        "[1, 64] slope {:.4} C {:.4}; [1/16, 1] slope {:.4} C {:.4} (need <= 0.05); {} samples",
        long.slope,
        long.fitted_c,
        short.slope,
        short.fitted_c,
        samples.len()
    );

    // at the short-time peak, compare with the plane-wave propagator applied
    // to a unit-mass Gaussian of width 0.04 centred at y
    let i = (0..short.ratio.len()).fold(0, |b, i| if short.ratio[i] > short.ratio[b] { i } else { b });
    let (t_peak, t_first) = (short.t_grid[i], short.t_grid[0]);
    let (x, y) = samples[short.argmax[i]].at(t_peak);
    let s = 0.04;
    let g = Gaussian {
        amplitude: 1.0 / (s * (2.0 * PI).sqrt()),
        ..Gaussian::new(y, s)
    };
    let reference = |t: f64| -> Res<Complex64> {
        let r = reference_propagator(&bs.potential, &g, t, &[x], 1e-5)?;
        Ok(r.u[0])
    };
    let (r_peak, r_first) = (reference(t_peak)?, reference(t_first)?);
    let k_peak = short.sup_abs[i];
    let agree = (r_peak.norm() - k_peak).abs() / k_peak;
    let ref_slope = log_log_slope(
        &[t_first, t_peak],
        &[r_first.norm() / decay_envelope(t_first), r_peak.norm() / decay_envelope(t_peak)],
    );
    let ok = long.slope <= 0.05 && long.converged && short.converged && agree < 0.01 && ref_slope > 0.05;
    Ok(Outcome {
        pass,
        detail,
        diagnosis: Some((
            ok,
            format!(
                "peak |K({t_peak:.4}, {x:.3}, {y:.3})| = {k_peak:.5}, reference {:.5} (rel {agree:.1e}); \
                 reference ratio slope from t = 1/16 to the peak {ref_slope:.3}",
                r_peak.norm()
            ),
        )),
    })
}

fn van_der_corput() -> Res<Outcome> {
    let r = vdc_verify(100, 12)?;
    Ok(Outcome::plain(
        r.violations == 0,
        format!("{} instances, {} violations, worst integral/bound {:.3}", r.instances.len(), r.violations, r.worst_ratio),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "free-case exactness", free_case),
        (2, "discriminant identity", discriminant_identity),
        (3, "velocity identity", e_dot_identity),
        (4, "gap integral closed forms", gap_closed_forms),
        (5, "large-k integrals", large_k_integrals),
        (6, "quasimomentum asymptotics", quasimomentum_asymptotics),
        (7, "band-edge law", edge_law),
        (8, "unique inflection", inflection),
        (9, "transform suite", transform_suite),
        (10, "propagator cross-validation", propagator),
        (11, "dispersive decay", decay),
        (12, "van der Corput", van_der_corput),
    ];
    let mut ok = true;
    for (id, name, run) in criteria {
        let t0 = Instant::now();
        match run() {
            Ok(o) => {
                let verdict = if o.pass { "PASS" } else { "FAIL" };
                println!("criterion {id:>2} {name}: {verdict} | {} | {:.1?}", o.detail, t0.elapsed());
                match o.diagnosis {
                    // expected to fail; the diagnosis must hold
                    Some((confirmed, why)) => {
                        let tag = if confirmed { "confirmed" } else { "NOT confirmed" };
                        println!("    known failure, diagnosis {tag}: {why}");
                        ok &= !o.pass && confirmed;
                    }
                    None => ok &= o.pass,
                }
            }
            Err(e) => {
                println!("criterion {id:>2} {name}: FAIL | error: {e}");
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
