//! The `verify` suite: identities and invariants across all modules.

use hillwave::bloch::identity_suite;
use hillwave::floquet::fundamental_pair;
use hillwave::hill::periodic_spectra;
use hillwave::kernel::{free_kernel, vdc_verify, KernelEvaluator, KernelOptions};
use hillwave::potential::PeriodicPotential;
use hillwave::quasimomentum::{k_of_w, w_of_k, ChartOptions, QuasimomentumChart};
use hillwave::spectrum::BandStructure;
use hillwave::transform::{transform_check, Gaussian, TransformOptions};

use crate::CliResult;

pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &str, residual: f64, tolerance: f64) -> Check {
    Check {
        name: name.to_string(),
        residual,
        tolerance,
        pass: residual <= tolerance,
    }
}

pub fn run(pot: &PeriodicPotential, bands: usize, seed: u64) -> CliResult<Vec<Check>> {
    crate::positive_count("bands", bands)?;
    let bs = BandStructure::compute(pot, bands + 1, None)?;
    let chart = QuasimomentumChart::build(&bs, bands, ChartOptions::default())?;
    let mut rows = Vec::new();

    rows.push(check("floquet.bottom_of_spectrum", bs.bottom_residual.abs(), 1e-10));

    // band edges against the plane-wave matrices
    let base = bs.potential.with_shift(0.0);
    let half = bands as i64 + 24 + 2 * base.degree() as i64;
    let (per, anti) = periodic_spectra(&base, half);
    let mut edge_err: f64 = 0.0;
    for n in 1..=bands {
        let g = bs.gap(n);
        let (lo, hi) = if n % 2 == 1 { (anti[n - 1], anti[n]) } else { (per[n - 1], per[n]) };
        let e = |w: f64| w * w + bs.e0;
        edge_err = edge_err
            .max((e(g.lower_f64) - lo).abs() / lo.abs().max(1.0))
            .max((e(g.upper_f64) - hi).abs() / hi.abs().max(1.0));
    }
    rows.push(check("spectrum.edges_vs_hill_matrix", edge_err, 1e-8));

    let mut wr: f64 = 0.0;
    let mut samples = Vec::new();
    for n in 1..bands {
        let (a, b) = bs.band(n)?;
        for s in [0.2, 0.5, 0.8] {
            samples.push(a + s * (b - a));
        }
    }
    for &w in &samples {
        let fp = fundamental_pair(&bs.potential, w, &[0.5], None)?;
        wr = wr.max((fp.wronskian() - 1.0).abs());
    }
    rows.push(check("floquet.wronskian", wr, 1e-12));

    let id = identity_suite(&bs, &samples, 64)?;
    rows.push(check("bloch.cos_k_equals_d", id.worst_cos_k, 1e-10));
    rows.push(check("bloch.e_dot_identity", id.worst_e_dot, 1e-6));
    rows.push(check("bloch.d_prime_identity", id.worst_d_prime, 1e-6));
    rows.push(check("bloch.m0_normalisation", id.worst_m0_norm, 1e-8));

    let mut rt: f64 = 0.0;
    for &w in &samples {
        let k = k_of_w(&bs, &w)?;
        rt = rt.max((w_of_k(&bs, &k, None)? - w).abs() / w);
    }
    rows.push(check("quasimomentum.round_trip", rt, 1e-9));

    let g = Gaussian::new(0.2, 0.5);
    let tc = transform_check(&bs, &chart, &g, TransformOptions { n_bands: bands, ..Default::default() })?;
    rows.push(check("transform.parseval", tc.parseval_defect, 1e-6));
    rows.push(check("transform.inversion", tc.inversion_error, 1e-4));
    rows.push(check("transform.diagonalization", tc.diagonalization, 1e-5));

    let ev = KernelEvaluator::new(&bs, &chart, KernelOptions { n_bands: bands, ..Default::default() })?;
    let (x, y) = (0.3, -0.45);
    let a = ev.kernel(1.0, x, y)?;
    let b = ev.kernel(1.0, y, x)?;
    rows.push(check("kernel.symmetry", (a.value - b.value).norm(), 1e-6));
    let bound: f64 = a.per_band.iter().map(|c| c.value().norm()).sum::<f64>() + a.tail_bound;
    rows.push(check("kernel.band_sum_bound", (a.value.norm() - bound).max(0.0), 0.0));
    if pot.degree() == 0 {
        // constant potential: the shifted operator is free
        let exact = free_kernel(1.0, x, y);
        rows.push(check("kernel.free_closed_form", (a.value - exact).norm() / exact.norm(), 1e-4));
    }

    let vdc = vdc_verify(100, seed)?;
    rows.push(check("kernel.van_der_corput_violations", vdc.violations as f64, 0.0));
    Ok(rows)
}
