//! Bloch (distorted Fourier) transform and spectral time evolution.
//!
//! With `phi_pm(x, k) = phi~_pm(x, w(k)) / (N sqrt(2 pi))` for `k > 0` and
//! `phi_pm(x, -k) = phi_mp(x, k)`, the transform
//! `f^(k) = int phi_+(y, k) f(y) dy` is unitary from `L^2(R)` onto
//! `L^2(R, dk)`, inverted by `f(x) = int phi_-(x, k) f^(k) dk`, and turns
//! `H_0` into multiplication by `E(k)`.
//!
//! Functions are sampled on the lattice `j / M`. Because
//! `phi_+(y + m, k) = e^{ikm} phi_+(y, k)`, one solution of the ODE on
//! `[0, 1)` per quadrature node in `k` suffices, and the trapezoid rule on
//! the lattice is spectrally accurate for smooth decaying integrands.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::bloch::FloquetVector;
use crate::error::{HillError, Result};
use crate::floquet::fundamental_pair;
use crate::potential::PeriodicPotential;
use crate::quad::gl_rule;
use crate::quasimomentum::{point_in_band, w_of_k, QuasimomentumChart};
use crate::spectrum::BandStructure;

/// Smooth, effectively compactly supported function on the line.
pub trait SpatialFunction: Sync {
    fn eval(&self, x: f64) -> Complex64;
    fn second_derivative(&self, x: f64) -> Complex64;
    /// Interval outside which the function is negligible.
    fn support(&self) -> (f64, f64);
}

/// `A exp(-(x - c)^2 / (2 s^2) + i p (x - c))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Gaussian {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub momentum: f64,
}

impl Gaussian {
    pub fn new(center: f64, width: f64) -> Self {
        Gaussian {
            center,
            width,
            amplitude: 1.0,
            momentum: 0.0,
        }
    }

    /// `e^{-it d^2/dx^2}` applied to the packet (zero momentum), in closed form.
    pub fn free_evolution(&self, t: f64, x: f64) -> Complex64 {
        let s2 = Complex64::new(self.width * self.width, -2.0 * t);
        let d = x - self.center;
        self.amplitude * self.width / s2.sqrt() * (-(d * d) / (2.0 * s2)).exp()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.amplitude * self.amplitude * self.width * PI.sqrt()
    }
}

impl SpatialFunction for Gaussian {
    fn eval(&self, x: f64) -> Complex64 {
        let d = x - self.center;
        let s2 = self.width * self.width;
        self.amplitude * Complex64::new(-d * d / (2.0 * s2), self.momentum * d).exp()
    }

    fn second_derivative(&self, x: f64) -> Complex64 {
        let d = x - self.center;
        let s2 = self.width * self.width;
        let g = Complex64::new(-d / s2, self.momentum);
        self.eval(x) * (g * g - 1.0 / s2)
    }

    fn support(&self) -> (f64, f64) {
        (self.center - 12.0 * self.width, self.center + 12.0 * self.width)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TransformOptions {
    /// Bands `0 .. n_bands` and their mirror images are used.
    pub n_bands: usize,
    /// Lattice points per unit cell.
    pub cell_points: usize,
    /// Minimum Gauss-Legendre nodes per chart panel.
    pub gl_nodes: usize,
    /// Largest time the nodes must resolve in `evolve`.
    pub t_max: f64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            n_bands: 12,
            cell_points: 64,
            gl_nodes: 16,
            t_max: 0.0,
        }
    }
}

/// Transform data at one quadrature node `k > 0` and its mirror `-k`.
#[derive(Debug, Clone)]
pub struct SpectralNode {
    pub band: usize,
    pub k: f64,
    pub weight: f64,
    pub w: f64,
    pub energy: f64,
    /// `f^(k)`.
    pub plus: Complex64,
    /// `f^(-k)`.
    pub minus: Complex64,
    /// `e^{ik}`.
    pub lambda: Complex64,
    /// `phi_+(j / M, k)` for `j = 0 .. M`.
    pub phi: Vec<Complex64>,
}

/// Transform of a sampled function.
#[derive(Debug, Clone)]
pub struct SpectralCoefficients {
    pub cell_points: usize,
    pub n_bands: usize,
    pub t_max: f64,
    pub nodes: Vec<SpectralNode>,
    /// `int |f|^2` on the lattice.
    pub norm_f: f64,
    /// `int |f^|^2 dk` over the bands used.
    pub norm_hat: f64,
    /// `|norm_f - norm_hat| / norm_f`.
    pub parseval_defect: f64,
    /// Share of `int |f^|^2` carried by the outermost band, a proxy for the
    /// part beyond the truncation.
    pub tail_share: f64,
}

/// Samples of `f` on the lattice `j / M` over its support, grouped by cell.
pub(crate) struct Lattice {
    m: usize,
    first_cell: i64,
    /// `cells[c][r] = f(first_cell + c + r / M)`.
    cells: Vec<Vec<Complex64>>,
}

impl Lattice {
    pub(crate) fn sample(m: usize, support: (f64, f64), f: impl Fn(f64) -> Complex64) -> Self {
        let first_cell = support.0.floor() as i64;
        let last_cell = support.1.ceil() as i64;
        let cells = (first_cell..last_cell)
            .map(|c| (0..m).map(|r| f(c as f64 + r as f64 / m as f64)).collect())
            .collect();
        Lattice { m, first_cell, cells }
    }

    pub(crate) fn norm_sq(&self) -> f64 {
        self.cells.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() / self.m as f64
    }

    /// `g_r = sum_c lambda^c f(c + r / M)`.
    pub(crate) fn folded(&self, lambda: Complex64) -> Vec<Complex64> {
        let mut g = vec![Complex64::new(0.0, 0.0); self.m];
        let mut pw = lambda.powi(self.first_cell as i32);
        for cell in &self.cells {
            for (gr, fr) in g.iter_mut().zip(cell) {
                *gr += pw * fr;
            }
            pw *= lambda;
        }
        g
    }
}

/// Normalised Bloch wave `phi_+(., k)` on one cell together with `e^{ik}`.
fn bloch_cell(bs: &BandStructure<f64>, n: usize, w: f64, m: usize) -> Result<(Vec<Complex64>, Complex64, f64)> {
    let p = point_in_band(bs, n, &w, 0)?;
    let xs: Vec<f64> = (0..m).map(|r| r as f64 / m as f64).collect();
    let fp = fundamental_pair(&bs.potential, w, &xs, None)?;
    let fv = FloquetVector::new(&fp, p.sin_k);
    let scale = 1.0 / (fv.norm2 * 2.0 * PI).sqrt();
    let phi = (0..m).map(|r| fv.at(fp.theta[r], fp.phi[r]) * scale).collect();
    Ok((phi, Complex64::from_polar(1.0, p.k), p.k))
}

/// Quadrature nodes of band `n` on the chart panels, refined so that the
/// phase `t_max E(k)` turns by at most about one radian per node.
fn band_nodes(chart: &QuasimomentumChart, n: usize, opts: &TransformOptions) -> Vec<(f64, f64, f64)> {
    let b = chart.band(n);
    let mut out = Vec::new();
    for p in &b.panels {
        let (w_lo, w_hi) = (p.w.eval(p.k_lo), p.w.eval(p.k_hi));
        let turn = opts.t_max * (w_hi * w_hi - w_lo * w_lo).abs();
        let count = opts.gl_nodes + turn.ceil() as usize;
        for (k, wt) in gl_rule(count).mapped(p.k_lo, p.k_hi) {
            out.push((k, wt, p.w.eval(k)));
        }
    }
    out
}

/// `f^(k)` at quadrature nodes over bands `0 .. n_bands` and their mirrors.
pub fn forward(
    bs: &BandStructure<f64>,
    chart: &QuasimomentumChart,
    f: &dyn SpatialFunction,
    opts: TransformOptions,
) -> Result<SpectralCoefficients> {
    forward_samples(bs, chart, f.support(), &|x| f.eval(x), opts)
}

fn forward_samples(
    bs: &BandStructure<f64>,
    chart: &QuasimomentumChart,
    support: (f64, f64),
    f: &(dyn Fn(f64) -> Complex64 + Sync),
    opts: TransformOptions,
) -> Result<SpectralCoefficients> {
    if opts.n_bands == 0 || opts.n_bands > chart.n_bands() {
        return Err(HillError::InvalidArgument(format!(
            "transform needs 1..={} bands, got {}",
            chart.n_bands(),
            opts.n_bands
        )));
    }
    if !(support.0 < support.1) || !support.0.is_finite() || !support.1.is_finite() {
        return Err(HillError::InvalidArgument(format!("support {support:?}")));
    }
    let m = opts.cell_points;
    let lattice = Lattice::sample(m, support, f);
    let mut jobs = Vec::new();
    for n in 0..opts.n_bands {
        for (k, wt, w_guess) in band_nodes(chart, n, &opts) {
            jobs.push((n, k, wt, w_guess));
        }
    }
    let nodes = jobs
        .par_iter()
        .map(|&(n, k, wt, w_guess)| -> Result<SpectralNode> {
            let w = w_of_k(bs, &k, Some(w_guess))?;
            let (phi, lambda, _) = bloch_cell(bs, n, w, m)?;
            let g_plus = lattice.folded(lambda);
            let g_minus = lattice.folded(lambda.conj());
            let mut plus = Complex64::new(0.0, 0.0);
            let mut minus = Complex64::new(0.0, 0.0);
            for r in 0..m {
                plus += phi[r] * g_plus[r];
                minus += phi[r].conj() * g_minus[r];
            }
            Ok(SpectralNode {
                band: n,
                k,
                weight: wt,
                w,
                energy: w * w,
                plus: plus / m as f64,
                minus: minus / m as f64,
                lambda,
                phi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let norm_f = lattice.norm_sq();
    let mass = |band: Option<usize>| -> f64 {
        nodes
            .iter()
            .filter(|nd| band.map_or(true, |b| nd.band == b))
            .map(|nd| nd.weight * (nd.plus.norm_sqr() + nd.minus.norm_sqr()))
            .sum()
    };
    let norm_hat = mass(None);
    let tail = mass(Some(opts.n_bands - 1));
    Ok(SpectralCoefficients {
        cell_points: m,
        n_bands: opts.n_bands,
        t_max: opts.t_max,
        norm_f,
        norm_hat,
        parseval_defect: (norm_f - norm_hat).abs() / norm_f,
        tail_share: tail / norm_hat,
        nodes,
    })
}

/// Values on the lattice `x_j = j / M`, `j = j_lo ..= j_hi`.
#[derive(Debug, Clone)]
pub struct LatticeValues {
    pub x: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl LatticeValues {
    pub fn norm_sq(&self, m: usize) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64
    }
}

/// `int phi_-(x, k) e^{itE(k)} f^(k) dk` on the lattice points in `[x_lo, x_hi]`.
pub fn synthesize(coeffs: &SpectralCoefficients, t: f64, x_lo: f64, x_hi: f64) -> Result<LatticeValues> {
    if t < 0.0 || !t.is_finite() {
        return Err(HillError::InvalidArgument(format!("t = {t}")));
    }
    if t > coeffs.t_max * (1.0 + 1e-12) && t > 0.0 {
        return Err(HillError::InvalidArgument(format!(
            "coefficients resolve t <= {}, asked for {t}",
            coeffs.t_max
        )));
    }
    let m = coeffs.cell_points;
    let j_lo = (x_lo * m as f64).ceil() as i64;
    let j_hi = (x_hi * m as f64).floor() as i64;
    if j_hi < j_lo {
        return Err(HillError::InvalidArgument(format!("empty range [{x_lo}, {x_hi}]")));
    }
    let c_lo = j_lo.div_euclid(m as i64);
    let c_hi = j_hi.div_euclid(m as i64);
    let n_cells = (c_hi - c_lo + 1) as usize;
    let zero = Complex64::new(0.0, 0.0);
    // accumulate per node in parallel chunks, reduced in node order
    let partial = coeffs
        .nodes
        .par_chunks(64)
        .map(|chunk| {
            let mut acc = vec![zero; n_cells * m];
            for nd in chunk {
                let ph = Complex64::from_polar(1.0, t * nd.energy);
                let a = nd.weight * ph * nd.plus;
                let b = nd.weight * ph * nd.minus;
                // phi_-(x, k) = conj(lambda)^c conj(phi_+(r/M)), phi_-(x, -k) = lambda^c phi_+(r/M)
                let mut pw = nd.lambda.powi(c_lo as i32);
                for c in 0..n_cells {
                    let ca = a * pw.conj();
                    let cb = b * pw;
                    let row = &mut acc[c * m..(c + 1) * m];
                    for (r, v) in row.iter_mut().enumerate() {
                        let p = nd.phi[r];
                        *v += ca * p.conj() + cb * p;
                    }
                    pw *= nd.lambda;
                }
            }
            acc
        })
        .collect::<Vec<_>>();
    let mut total = vec![zero; n_cells * m];
    for part in partial {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    let mut x = Vec::new();
    let mut values = Vec::new();
    for j in j_lo..=j_hi {
        let idx = (j - c_lo * m as i64) as usize;
        x.push(j as f64 / m as f64);
        values.push(total[idx]);
    }
    Ok(LatticeValues { x, values })
}

/// Inverse transform on the lattice points in `[x_lo, x_hi]`.
pub fn inverse(coeffs: &SpectralCoefficients, x_lo: f64, x_hi: f64) -> Result<LatticeValues> {
    synthesize(coeffs, 0.0, x_lo, x_hi)
}

/// Round-trip and Parseval errors of the transform of `f`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransformCheck {
    pub parseval_defect: f64,
    /// Relative `L^2` error of `inverse(forward(f))`.
    pub inversion_error: f64,
    /// `||(H_0 f)^ - E f^|| / ||E f^||`.
    pub diagonalization: f64,
    pub tail_share: f64,
}

/// `||(H_0 f)^ - E f^|| / ||E f^||` over the quadrature nodes.
pub fn diagonalization_check(
    bs: &BandStructure<f64>,
    chart: &QuasimomentumChart,
    f: &dyn SpatialFunction,
    opts: TransformOptions,
) -> Result<f64> {
    let a = forward(bs, chart, f, opts)?;
    let pot: &PeriodicPotential = &bs.potential;
    let h0f = |x: f64| -f.second_derivative(x) + pot.eval(x) * f.eval(x);
    let b = forward_samples(bs, chart, f.support(), &h0f, opts)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (na, nb) in a.nodes.iter().zip(&b.nodes) {
        let ep = na.energy * na.plus;
        let em = na.energy * na.minus;
        num += na.weight * ((nb.plus - ep).norm_sqr() + (nb.minus - em).norm_sqr());
        den += na.weight * (ep.norm_sqr() + em.norm_sqr());
    }
    Ok((num / den).sqrt())
}

/// Parseval, inversion and diagonalisation on one test function.
pub fn transform_check(
    bs: &BandStructure<f64>,
    chart: &QuasimomentumChart,
    f: &dyn SpatialFunction,
    opts: TransformOptions,
) -> Result<TransformCheck> {
    let c = forward(bs, chart, f, opts)?;
    let (lo, hi) = f.support();
    let back = inverse(&c, lo, hi)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, v) in back.x.iter().zip(&back.values) {
        let fx = f.eval(*x);
        num += (v - fx).norm_sqr();
        den += fx.norm_sqr();
    }
    Ok(TransformCheck {
        parseval_defect: c.parseval_defect,
        inversion_error: (num / den).sqrt(),
        diagonalization: diagonalization_check(bs, chart, f, opts)?,
        tail_share: c.tail_share,
    })
}

/// Result of [`evolve`].
#[derive(Debug, Clone)]
pub struct Evolution {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<Complex64>,
    /// `||u(t)|| / ||f||` on the output range.
    pub norm_ratio: f64,
}

/// `e^{itH_0} f` on the lattice points of `[x_lo, x_hi]` via the transform.
pub fn evolve(
    bs: &BandStructure<f64>,
    chart: &QuasimomentumChart,
    f: &dyn SpatialFunction,
    t: f64,
    x_lo: f64,
    x_hi: f64,
    opts: TransformOptions,
) -> Result<Evolution> {
    let opts = TransformOptions {
        t_max: opts.t_max.max(t),
        ..opts
    };
    let c = forward(bs, chart, f, opts)?;
    let v = synthesize(&c, t, x_lo, x_hi)?;
    let norm_ratio = (v.norm_sq(c.cell_points) / c.norm_f).sqrt();
    Ok(Evolution {
        t,
        x: v.x,
        u: v.values,
        norm_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasimomentum::ChartOptions;

    fn setup(p: PeriodicPotential, bands: usize) -> (BandStructure<f64>, QuasimomentumChart) {
        let bs = BandStructure::compute(&p, bands + 1, None).unwrap();
        let chart = QuasimomentumChart::build(&bs, bands, ChartOptions::default()).unwrap();
        (bs, chart)
    }

    #[test]
    fn free_transform_is_fourier() {
        let (bs, chart) = setup(PeriodicPotential::zero(), 6);
        let g = Gaussian::new(0.3, 0.5);
        let opts = TransformOptions {
            n_bands: 6,
            ..Default::default()
        };
        let c = forward(&bs, &chart, &g, opts).unwrap();
        for nd in c.nodes.iter().step_by(37) {
            // (2 pi)^{-1/2} int e^{iky} f(y) dy
            let exact = |k: f64| Complex64::from_polar(g.width * (-k * k * g.width * g.width / 2.0).exp(), k * g.center);
            assert!((nd.plus - exact(nd.k)).norm() < 1e-10, "k {}: {} vs {}", nd.k, nd.plus, exact(nd.k));
            assert!((nd.minus - exact(-nd.k)).norm() < 1e-10);
        }
        assert!(c.parseval_defect < 1e-10, "{}", c.parseval_defect);
        assert!((c.norm_f - g.l2_norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn free_evolution_matches_closed_form() {
        let (bs, chart) = setup(PeriodicPotential::zero(), 8);
        let g = Gaussian::new(0.0, 0.5);
        for t in [0.5, 1.0, 2.0] {
            let ev = evolve(&bs, &chart, &g, t, -10.0, 10.0, TransformOptions { n_bands: 8, ..Default::default() }).unwrap();
            let err = ev
                .x
                .iter()
                .zip(&ev.u)
                .map(|(x, u)| (u - g.free_evolution(t, *x)).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "t {t}: {err}");
        }
    }

    #[test]
    fn mathieu_transform_suite() {
        let (bs, chart) = setup(PeriodicPotential::mathieu(2.0), 12);
        let g = Gaussian::new(0.2, 0.5);
        let chk = transform_check(&bs, &chart, &g, TransformOptions::default()).unwrap();
        assert!(chk.parseval_defect < 1e-8, "{chk:?}");
        assert!(chk.inversion_error < 1e-6, "{chk:?}");
        assert!(chk.diagonalization < 1e-6, "{chk:?}");
    }

    #[test]
    fn mirror_symmetry_matches_direct_evaluation() {
        let (bs, chart) = setup(PeriodicPotential::mathieu(2.0), 4);
        let g = Gaussian::new(0.2, 0.5);
        let c = forward(&bs, &chart, &g, TransformOptions { n_bands: 4, ..Default::default() }).unwrap();
        // direct: Bloch wave with multiplier e^{-ik} built from the eigenvector for -sin k
        for nd in c.nodes.iter().step_by(53) {
            let p = point_in_band(&bs, nd.band, &nd.w, 0).unwrap();
            let m = 64;
            let cell: Vec<f64> = (0..m).map(|r| r as f64 / m as f64).collect();
            let fp = fundamental_pair(&bs.potential, nd.w, &cell, None).unwrap();
            let fv = FloquetVector::new(&fp, -p.sin_k);
            let scale = 1.0 / (fv.norm2 * 2.0 * PI).sqrt();
            let lat = Lattice::sample(m, g.support(), |x| g.eval(x));
            let gm = lat.folded(fv.lambda);
            let mut direct = Complex64::new(0.0, 0.0);
            for r in 0..m {
                direct += fv.at(fp.theta[r], fp.phi[r]) * scale * gm[r];
            }
            direct /= m as f64;
            // equal up to the phase convention of the eigenvector
            assert!((direct.norm() - nd.minus.norm()).abs() < 1e-8);
        }
    }
}
