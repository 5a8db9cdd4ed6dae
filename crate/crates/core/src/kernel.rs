//! The Schrodinger kernel `K(t, x, y)` of `e^{itH_0}` as a sum of band integrals.
//!
//! `K = sum_n K^n` with
//! `K^n = (1/2 pi) int_{band n} e^{i(tE(k) - (x - y)k)} m_-^0(x, k) m_+^0(y, k) dk`.
//! For `k < 0` the amplitude is the complex conjugate of its value at `-k`
//! and `E` is even, so each positive band and its mirror share one amplitude
//! chart. The amplitude depends on `x, y` only through their fractional parts
//! and not on `t`; it is interpolated once per `(x, y)` on the quasimomentum
//! chart panels, after which the oscillatory quadrature is cheap.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::bloch::product_at;
use crate::error::{HillError, Result};
use crate::fresnel::quadratic_phase_tail;
use crate::hill::HillMatrix;
use crate::potential::PeriodicPotential;
use crate::quad::{adaptive, cheb_points, gl_rule, ChebPanel};
use crate::quasimomentum::{point_in_band, BandChart, ChartPanel, QuasimomentumChart};
use crate::spectrum::BandStructure;
use crate::transform::{Lattice, SpatialFunction};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelOptions {
    /// Bands `0 .. n_bands` and their mirrors are integrated.
    pub n_bands: usize,
    /// Absolute tolerance per band integral of `K^n`.
    pub tol: f64,
    /// Chebyshev nodes per chart panel for the amplitude.
    pub amplitude_nodes: usize,
    /// Gauss-Legendre order per quadrature piece.
    pub order: usize,
    /// Minimum nodes per `2 pi` of phase.
    pub nodes_per_oscillation: usize,
    pub max_depth: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            n_bands: 12,
            tol: 1e-10,
            amplitude_nodes: 24,
            order: 30,
            nodes_per_oscillation: 20,
            max_depth: 14,
        }
    }
}

/// `m_-^0(x, k) m_+^0(y, k)` on the chart panels of each band.
#[derive(Debug, Clone)]
pub struct AmplitudeChart {
    pub x: f64,
    pub y: f64,
    bands: Vec<Vec<ChebPanel<Complex64>>>,
}

impl AmplitudeChart {
    pub fn build(bs: &BandStructure<f64>, chart: &QuasimomentumChart, x: f64, y: f64, n_bands: usize, nodes: usize) -> Result<Self> {
        if n_bands == 0 || n_bands > chart.n_bands() {
            return Err(HillError::InvalidArgument(format!(
                "kernel needs 1..={} bands, got {n_bands}",
                chart.n_bands()
            )));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(HillError::InvalidArgument(format!("x = {x}, y = {y}")));
        }
        let jobs: Vec<(usize, usize)> = (0..n_bands)
            .flat_map(|n| (0..chart.band(n).panels.len()).map(move |i| (n, i)))
            .collect();
        let panels = jobs
            .par_iter()
            .map(|&(n, i)| {
                let p = &chart.band(n).panels[i];
                let ks = cheb_points(nodes, p.k_lo, p.k_hi);
                let v = ks
                    .iter()
                    .map(|&k| amplitude_at(bs, n, p.w.eval(k), x, y))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ChebPanel::new(p.k_lo, p.k_hi, ks, v))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bands: Vec<Vec<ChebPanel<Complex64>>> = vec![Vec::new(); n_bands];
        for ((n, _), p) in jobs.into_iter().zip(panels) {
            bands[n].push(p);
        }
        Ok(AmplitudeChart { x, y, bands })
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    /// Interpolated amplitude at `k` in band `n` (`k >= 0`).
    pub fn eval(&self, n: usize, k: f64) -> Complex64 {
        let ps = &self.bands[n];
        let i = ps.partition_point(|p| p.b < k).min(ps.len() - 1);
        ps[i].eval(k)
    }
}

/// `m_-^0(x, k) m_+^0(y, k)` at the point of band `n` with frequency `w`.
pub fn amplitude_at(bs: &BandStructure<f64>, n: usize, w: f64, x: f64, y: f64) -> Result<Complex64> {
    let p = point_in_band(bs, n, &w, 0)?;
    product_at(&bs.potential, w, p.k, p.sin_k, x, y)
}

/// Oscillatory band integral with its error estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandIntegral {
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    pub error: f64,
    pub pieces: usize,
    pub converged: bool,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

struct Integrand<'a> {
    panel: &'a ChartPanel,
    amp: &'a ChebPanel<Complex64>,
    t: f64,
    /// `(x - y)` for the positive band, `-(x - y)` for the mirror.
    d: f64,
    conj: bool,
}

impl Integrand<'_> {
    fn eval(&self, k: f64) -> Complex64 {
        let w = self.panel.w.eval(k);
        let a = self.amp.eval(k);
        let a = if self.conj { a.conj() } else { a };
        Complex64::from_polar(1.0, self.t * w * w - self.d * k) * a
    }

    /// Derivative of the phase, `t E'(k) - d`.
    fn slope(&self, k: f64) -> f64 {
        self.t * self.panel.e_dot.eval(k) - self.d
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `int e^{i(tE(k) - dk)} A(k) dk` over one band (`conj` selects `conj A`).
///
/// Panels of the chart (graded toward the edges, split at the partition
/// points and the inflection) are further split where `E''` changes sign and
/// at stationary points `t E'(k) = d`; on the resulting pieces the phase
/// derivative is monotone, which bounds the number of oscillations and sets
/// the initial subdivision. Pieces are then refined until two Gauss rules
/// agree; the summed discrepancy is the error estimate.
pub fn band_integral(chart: &BandChart, amp: &[ChebPanel<Complex64>], t: f64, d: f64, conj: bool, opts: &KernelOptions) -> BandIntegral {
    let band_len = chart.k_hi - chart.k_lo;
    let hi_rule = gl_rule(opts.order);
    let lo_rule = gl_rule((2 * opts.order) / 3);
    let budget = 2.0 * PI * opts.order as f64 / opts.nodes_per_oscillation as f64;
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut pieces = 0;
    for (panel, a) in chart.panels.iter().zip(amp) {
        let f = Integrand { panel, amp: a, t, d, conj };
        let mut cuts = vec![panel.k_lo, panel.k_hi];
        let dd = |k: f64| panel.e_ddot.eval(k);
        if (dd(panel.k_lo) > 0.0) != (dd(panel.k_hi) > 0.0) {
            cuts.insert(1, bisect(dd, panel.k_lo, panel.k_hi));
        }
        let mut all = vec![cuts[0]];
        for win in cuts.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            if (f.slope(lo) > 0.0) != (f.slope(hi) > 0.0) {
                all.push(bisect(|k| f.slope(k), lo, hi));
            }
            all.push(hi);
        }
        for win in all.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            if hi <= lo {
                continue;
            }
            let turn = f.slope(lo).abs().max(f.slope(hi).abs()) * (hi - lo);
            let m = ((turn / budget).ceil() as usize).max(1);
            let h = (hi - lo) / m as f64;
            for j in 0..m {
                let a0 = lo + j as f64 * h;
                let b0 = if j + 1 == m { hi } else { a0 + h };
                let mut stack = vec![(a0, b0, 0usize)];
                while let Some((a1, b1, depth)) = stack.pop() {
                    let g_hi = hi_rule.integrate(a1, b1, |k| f.eval(k));
                    let g_lo = lo_rule.integrate(a1, b1, |k| f.eval(k));
                    let diff = (g_hi - g_lo).norm();
                    // share of the tolerance, floored so that pieces near the
                    // edges stop at the noise level of the amplitude
                    let allowed = (opts.tol * (b1 - a1) / band_len).max(1e-3 * opts.tol);
                    if diff <= allowed || depth >= opts.max_depth {
                        value += g_hi;
                        error += diff;
                        pieces += 1;
                    } else {
                        let mid = 0.5 * (a1 + b1);
                        stack.push((mid, b1, depth + 1));
                        stack.push((a1, mid, depth + 1));
                    }
                }
            }
        }
    }
    BandIntegral {
        value,
        error,
        pieces,
        converged: error <= opts.tol,
    }
}

/// `K(t, x, y)` with its band decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    /// `(n, K^n)` for `n = 0, -1, 1, -2, ...` (band `n >= 0` covers
    /// `[n pi, (n+1) pi]`, band `-n-1` its mirror).
    pub per_band: Vec<BandContribution>,
    /// Free-like model of the bands beyond the truncation, included in `value`.
    #[serde(serialize_with = "ser_complex")]
    pub tail_model: Complex64,
    /// Bound on `|remainder|` beyond the truncation (model plus deviation).
    pub tail_bound: f64,
    /// Sum of the quadrature error estimates.
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandContribution {
    pub n: i64,
    pub re: f64,
    pub im: f64,
    pub error: f64,
}

impl BandContribution {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Evaluates kernels for one potential, reusing amplitudes across times.
pub struct KernelEvaluator<'a> {
    pub bs: &'a BandStructure<f64>,
    pub chart: &'a QuasimomentumChart,
    pub opts: KernelOptions,
    /// Largest `|A(k) - 1|` and `|E - k^2 - 2 Q_0|` seen on the last band.
    tail_shape: std::sync::OnceLock<(f64, f64)>,
}

impl<'a> KernelEvaluator<'a> {
    pub fn new(bs: &'a BandStructure<f64>, chart: &'a QuasimomentumChart, opts: KernelOptions) -> Result<Self> {
        if opts.n_bands == 0 || opts.n_bands > chart.n_bands() {
            return Err(HillError::InvalidArgument(format!(
                "kernel needs 1..={} bands, got {}",
                chart.n_bands(),
                opts.n_bands
            )));
        }
        if !(opts.tol > 0.0) || opts.order < 3 || opts.nodes_per_oscillation == 0 {
            return Err(HillError::InvalidArgument(format!("kernel options {opts:?}")));
        }
        Ok(KernelEvaluator {
            bs,
            chart,
            opts,
            tail_shape: std::sync::OnceLock::new(),
        })
    }

    pub fn amplitude(&self, x: f64, y: f64) -> Result<AmplitudeChart> {
        AmplitudeChart::build(self.bs, self.chart, x, y, self.opts.n_bands, self.opts.amplitude_nodes)
    }

    /// Deviation of the last band from the free-like tail model.
    fn tail_shape(&self) -> (f64, f64) {
        *self.tail_shape.get_or_init(|| {
            let n = self.opts.n_bands - 1;
            let b = self.chart.band(n);
            let q0 = self.bs.potential.moment_q0();
            let mut da: f64 = 0.0;
            let mut de: f64 = 0.0;
            for (x, y) in [(0.0, 0.0), (0.25, 0.0), (0.5, 0.0), (0.75, 0.25)] {
                for p in &b.panels {
                    let k = 0.5 * (p.k_lo + p.k_hi);
                    let w = p.w.eval(k);
                    if let Ok(a) = amplitude_at(self.bs, n, w, x, y) {
                        da = da.max((a - 1.0).norm());
                    }
                    de = de.max((w * w - k * k - 2.0 * q0).abs());
                }
            }
            (da, de)
        })
    }

    /// `K(t, x, y)` using a prebuilt amplitude for `(x, y)`.
    pub fn kernel_with(&self, amp: &AmplitudeChart, t: f64) -> Result<KernelSample> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(HillError::InvalidArgument(format!("t = {t} must be positive")));
        }
        let d = amp.x - amp.y;
        let scale = 1.0 / (2.0 * PI);
        let mut per_band = Vec::with_capacity(2 * self.opts.n_bands);
        let mut value = Complex64::new(0.0, 0.0);
        let mut error = 0.0;
        let mut converged = true;
        let parts: Vec<(BandIntegral, BandIntegral)> = (0..self.opts.n_bands)
            .into_par_iter()
            .map(|n| {
                let b = self.chart.band(n);
                let a = &amp.bands[n];
                (
                    band_integral(b, a, t, d, false, &self.opts),
                    band_integral(b, a, t, -d, true, &self.opts),
                )
            })
            .collect();
        for (n, (pos, neg)) in parts.into_iter().enumerate() {
            for (idx, bi) in [(n as i64, pos), (-(n as i64) - 1, neg)] {
                let v = bi.value * scale;
                value += v;
                error += bi.error * scale;
                converged &= bi.converged;
                per_band.push(BandContribution {
                    n: idx,
                    re: v.re,
                    im: v.im,
                    error: bi.error * scale,
                });
            }
        }
        let k_cut = self.chart.band(self.opts.n_bands - 1).k_hi;
        let q0 = self.bs.potential.moment_q0();
        let tail_model = scale
            * Complex64::from_polar(1.0, 2.0 * t * q0)
            * (quadratic_phase_tail(t, d, k_cut) + quadratic_phase_tail(t, -d, k_cut));
        let (da, de) = self.tail_shape();
        let delta = da + t * de;
        // non-stationary tail: |int e^{i phi} g| <= 2 sup|g| / phi'(K); otherwise second-derivative bound
        let side = |ds: f64| {
            let slope = 2.0 * t * k_cut - ds;
            if slope > 0.0 {
                2.0 / slope
            } else {
                van_der_corput_constant(2) * (2.0 * t).powf(-0.5) * 2.0
            }
        };
        let tail_bound = tail_model.norm() + scale * delta * (side(d) + side(-d));
        Ok(KernelSample {
            t,
            x: amp.x,
            y: amp.y,
            value: value + tail_model,
            per_band,
            tail_model,
            tail_bound,
            error,
            converged,
        })
    }

    pub fn kernel(&self, t: f64, x: f64, y: f64) -> Result<KernelSample> {
        let amp = self.amplitude(x, y)?;
        self.kernel_with(&amp, t)
    }

    /// `int K(t, x, y) g(y) dy` for each `t`, by Gauss-Legendre in `y` over
    /// the support of `g`.
    pub fn smoothed(&self, g: &dyn SpatialFunction, ts: &[f64], x: f64, y_nodes: usize) -> Result<Vec<Complex64>> {
        let (lo, hi) = g.support();
        let mut acc = vec![Complex64::new(0.0, 0.0); ts.len()];
        for (y, wt) in gl_rule(y_nodes).mapped(lo, hi) {
            let amp = self.amplitude(x, y)?;
            let gy = g.eval(y) * wt;
            for (a, &t) in acc.iter_mut().zip(ts) {
                *a += self.kernel_with(&amp, t)?.value * gy;
            }
        }
        Ok(acc)
    }
}

/// Free kernel `(4 pi t)^{-1/2} e^{i pi / 4} e^{-i(x-y)^2 / (4t)}` of `e^{-it d^2/dx^2}`.
pub fn free_kernel(t: f64, x: f64, y: f64) -> Complex64 {
    let d = x - y;
    (4.0 * PI * t).powf(-0.5) * Complex64::from_polar(1.0, PI / 4.0 - d * d / (4.0 * t))
}

/// `max(t^{-1/2}, t^{-1/3})`.
pub fn decay_envelope(t: f64) -> f64 {
    t.powf(-0.5).max(t.powf(-1.0 / 3.0))
}

/// Where a decay report samples the kernel at each time.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum XySample {
    /// Fixed `(x, y)`.
    Fixed { x: f64, y: f64 },
    /// `x = y + v t`: the stationary point sits where `E'(k) = v`.
    Velocity { v: f64, y: f64 },
}

impl XySample {
    pub fn at(&self, t: f64) -> (f64, f64) {
        match *self {
            XySample::Fixed { x, y } => (x, y),
            XySample::Velocity { v, y } => (y + v * t, y),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub t_grid: Vec<f64>,
    pub xy_samples: Vec<XySample>,
    /// `sup |K|` over the samples, per time.
    pub sup_abs: Vec<f64>,
    /// `sup_abs / max(t^{-1/2}, t^{-1/3})`.
    pub ratio: Vec<f64>,
    /// Largest ratio.
    pub fitted_c: f64,
    /// Least-squares slope of `log ratio` against `log t`.
    pub slope: f64,
    /// Index of the sample attaining the sup, per time.
    pub argmax: Vec<usize>,
    pub converged: bool,
}

/// Slope of the least-squares line through `(log x, log y)`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Velocities whose stationary points land at the inflection points, where
/// the phase degenerates to third order, and just inside the band edges.
pub fn stationary_targets(chart: &QuasimomentumChart, bands: usize) -> Vec<f64> {
    let mut v = Vec::new();
    for n in 0..bands.min(chart.n_bands()) {
        let b = chart.band(n);
        if let Some(k) = b.inflection {
            if let Ok(e) = chart.e_dot(k) {
                v.push(e);
            }
        }
        for k in [b.k_lo + 0.05, b.k_hi - 0.05] {
            if let Ok(e) = chart.e_dot(k) {
                v.push(e);
            }
        }
    }
    v
}

/// Measured `sup |K|` over the samples against `max(t^{-1/2}, t^{-1/3})`.
pub fn decay_report(ev: &KernelEvaluator, t_grid: &[f64], xy_samples: &[XySample]) -> Result<DecayReport> {
    if t_grid.is_empty() || xy_samples.is_empty() {
        return Err(HillError::InvalidArgument("empty t grid or sample set".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(HillError::InvalidArgument("t grid must be positive".into()));
    }
    // fixed samples share one amplitude across all times
    let fixed: Vec<Option<AmplitudeChart>> = xy_samples
        .iter()
        .map(|s| match *s {
            XySample::Fixed { x, y } => ev.amplitude(x, y).map(Some),
            XySample::Velocity { .. } => Ok(None),
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..t_grid.len())
        .flat_map(|i| (0..xy_samples.len()).map(move |j| (i, j)))
        .collect();
    let values = jobs
        .par_iter()
        .map(|&(i, j)| {
            let t = t_grid[i];
            let s = match &fixed[j] {
                Some(a) => ev.kernel_with(a, t)?,
                None => {
                    let (x, y) = xy_samples[j].at(t);
                    ev.kernel(t, x, y)?
                }
            };
            Ok((s.value.norm(), s.converged))
        })
        .collect::<Result<Vec<_>>>()?;
    let ns = xy_samples.len();
    let mut sup_abs = Vec::new();
    let mut argmax = Vec::new();
    let mut converged = true;
    for i in 0..t_grid.len() {
        let row = &values[i * ns..(i + 1) * ns];
        let (j, best) = row
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (j, (v, _))| if *v > acc.1 { (j, *v) } else { acc });
        converged &= row.iter().all(|(_, c)| *c);
        sup_abs.push(best);
        argmax.push(j);
    }
    let ratio: Vec<f64> = sup_abs.iter().zip(t_grid).map(|(s, t)| s / decay_envelope(*t)).collect();
    let fitted_c = ratio.iter().cloned().fold(0.0, f64::max);
    let slope = if t_grid.len() > 1 { log_log_slope(t_grid, &ratio) } else { 0.0 };
    Ok(DecayReport {
        t_grid: t_grid.to_vec(),
        xy_samples: xy_samples.to_vec(),
        sup_abs,
        ratio,
        fitted_c,
        slope,
        argmax,
        converged,
    })
}

/// `C_m = 5 * 2^{m-1} - 2`.
pub fn van_der_corput_constant(m: u32) -> f64 {
    5.0 * 2f64.powi(m as i32 - 1) - 2.0
}

/// Data of an oscillatory integral `int_a^b e^{i mu phi} psi` with
/// `|phi^{(m)}| >= c_m` (and `phi'` monotone when `m = 1`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VdcRequest {
    pub m: u32,
    pub c_m: f64,
    pub mu: f64,
    /// `min(|psi(a)|, |psi(b)|)`.
    pub psi_endpoint_min: f64,
    /// `int_a^b |psi'|`.
    pub psi_derivative_l1: f64,
}

/// `C_m (c_m mu)^{-1/m} (min|psi(a,b)| + int |psi'|)`.
pub fn van_der_corput_bound(req: &VdcRequest) -> Result<f64> {
    if req.m < 1 {
        return Err(HillError::InvalidArgument("derivative order must be at least 1".into()));
    }
    if !(req.c_m > 0.0) || !(req.mu > 0.0) || req.psi_endpoint_min < 0.0 || req.psi_derivative_l1 < 0.0 {
        return Err(HillError::InvalidArgument(format!("{req:?}")));
    }
    Ok(van_der_corput_constant(req.m) * (req.c_m * req.mu).powf(-1.0 / req.m as f64) * (req.psi_endpoint_min + req.psi_derivative_l1))
}

/// Polynomial `sum c_j x^j`.
#[derive(Debug, Clone, Serialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect())
    }
}

/// `int_a^b e^{i mu phi} psi` by Gauss-Legendre on pieces shorter than a
/// fraction of one oscillation.
pub fn oscillatory_integral(phi: &Poly, psi: &Poly, mu: f64, a: f64, b: f64) -> Complex64 {
    let dphi = phi.derivative();
    let slope = (0..=256)
        .map(|i| dphi.eval(a + (b - a) * i as f64 / 256.0).abs())
        .fold(0.0, f64::max);
    let m = ((mu * slope * (b - a) / PI).ceil() as usize).max(1) + 4;
    let rule = gl_rule(24);
    let h = (b - a) / m as f64;
    (0..m)
        .map(|i| {
            let lo = a + i as f64 * h;
            rule.integrate(lo, lo + h, |x| Complex64::from_polar(psi.eval(x), mu * phi.eval(x)))
        })
        .sum()
}

/// One randomized van der Corput check.
#[derive(Debug, Clone, Serialize)]
pub struct VdcInstance {
    pub phi: Poly,
    pub psi: Poly,
    pub request: VdcRequest,
    pub integral: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VdcReport {
    pub instances: Vec<VdcInstance>,
    pub violations: usize,
    /// Largest `integral / bound`.
    pub worst_ratio: f64,
}

/// Random admissible instances on `[0, 1]`: `phi^{(m)} = c_m + a_1 x + a_2 x^2`
/// with `a_i >= 0` (so `phi^{(m)} >= c_m` and, for `m = 1`, `phi'` increases),
/// arbitrary lower-order terms and a random cubic amplitude.
pub fn vdc_verify(count: usize, seed: u64) -> Result<VdcReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(count);
    for i in 0..count {
        let m = 1 + (i % 3) as u32;
        let c_m = rng.gen_range(0.5..3.0);
        let (a1, a2) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let mut coef = vec![0.0; m as usize + 3];
        for c in coef.iter_mut().take(m as usize) {
            *c = rng.gen_range(-2.0..2.0);
        }
        coef[m as usize] = c_m / fact(m);
        coef[m as usize + 1] = a1 / fact(m + 1);
        coef[m as usize + 2] = 2.0 * a2 / fact(m + 2);
        let phi = Poly(coef);
        let psi = Poly((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let mu = 10f64.powf(rng.gen_range(0.0..3.0));
        let dpsi = psi.derivative();
        let l1 = adaptive(&mut |x| dpsi.eval(x).abs(), 0.0, 1.0, 1e-13, 1e-12, 30).value;
        let request = VdcRequest {
            m,
            c_m,
            mu,
            psi_endpoint_min: psi.eval(0.0).abs().min(psi.eval(1.0).abs()),
            psi_derivative_l1: l1,
        };
        let bound = van_der_corput_bound(&request)?;
        let integral = oscillatory_integral(&phi, &psi, mu, 0.0, 1.0).norm();
        instances.push(VdcInstance {
            phi,
            psi,
            request,
            integral,
            bound,
        });
    }
    let violations = instances.iter().filter(|v| v.integral > v.bound).count();
    let worst_ratio = instances
        .iter()
        .map(|v| if v.bound > 0.0 { v.integral / v.bound } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(VdcReport {
        instances,
        violations,
        worst_ratio,
    })
}

/// Result of [`reference_propagator`].
#[derive(Debug, Clone)]
pub struct ReferenceEvolution {
    pub x: Vec<f64>,
    pub u: Vec<Complex64>,
    /// Plane-wave modes per fibre.
    pub modes: usize,
    pub k_points: usize,
    /// `L^inf` change at the last doubling.
    pub change: f64,
    pub converged: bool,
}

/// `e^{itH} f` from truncated Hill matrices on a uniform quasimomentum grid.
///
/// `f(x) = (1/2 pi) int F(xi) e^{i xi x} d xi` is split into fibres
/// `xi = k + 2 pi m`, each fibre is evolved with its Hill matrix and the result
/// is synthesised at `x`. Modes and grid are doubled until the values change
/// by less than `tol`. Independent of the ODE machinery used elsewhere.
pub fn reference_propagator(pot: &PeriodicPotential, f: &dyn SpatialFunction, t: f64, xs: &[f64], tol: f64) -> Result<ReferenceEvolution> {
    if t < 0.0 || !t.is_finite() {
        return Err(HillError::InvalidArgument(format!("t = {t}")));
    }
    const M: usize = 64;
    let lattice = Lattice::sample(M, f.support(), |x| f.eval(x));
    let run = |half: i64, nk: usize| -> Vec<Complex64> {
        let fibres: Vec<(Vec<f64>, Vec<Complex64>)> = (0..nk)
            .into_par_iter()
            .map(|i| {
                let k = 2.0 * PI * i as f64 / nk as f64;
                let h = HillMatrix::centered(pot, k, half);
                let g = lattice.folded(Complex64::from_polar(1.0, -k));
                let n = h.matrix.nrows();
                let freqs: Vec<f64> = (0..n).map(|j| h.frequency(j)).collect();
                let c: Vec<Complex64> = freqs
                    .iter()
                    .map(|&xi| {
                        g.iter()
                            .enumerate()
                            .map(|(r, gr)| gr * Complex64::from_polar(1.0, -xi * r as f64 / M as f64))
                            .sum::<Complex64>()
                            / M as f64
                    })
                    .collect();
                let (vals, vecs) = h.eigen();
                let mut b = vec![Complex64::new(0.0, 0.0); n];
                for (col, lam) in vals.iter().enumerate() {
                    let proj: Complex64 = (0..n).map(|r| vecs[(r, col)].conj() * c[r]).sum();
                    let coef = proj * Complex64::from_polar(1.0, t * lam);
                    for (r, br) in b.iter_mut().enumerate() {
                        *br += vecs[(r, col)] * coef;
                    }
                }
                (freqs, b)
            })
            .collect();
        xs.par_iter()
            .map(|&x| {
                let mut s = Complex64::new(0.0, 0.0);
                for (freqs, b) in &fibres {
                    for (xi, bj) in freqs.iter().zip(b) {
                        s += bj * Complex64::from_polar(1.0, xi * x);
                    }
                }
                s / nk as f64
            })
            .collect()
    };
    let mut half = 8i64;
    let mut nk = 64usize;
    let mut prev = run(half, nk);
    loop {
        let (h2, n2) = (half * 2, nk * 2);
        let next = run(h2, n2);
        let change = prev.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        half = h2;
        nk = n2;
        if change < tol || half >= 64 {
            return Ok(ReferenceEvolution {
                x: xs.to_vec(),
                u: next,
                modes: (2 * half + 1) as usize,
                k_points: nk,
                change,
                converged: change < tol,
            });
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests;
