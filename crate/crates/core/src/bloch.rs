//! Weyl functions, Bloch waves and their normalisation on real bands.
//!
//! The Bloch solution with multiplier `e^{ik}` is `u = alpha theta + beta phi`
//! where `(alpha, beta)` is an eigenvector of the monodromy matrix. Writing
//! `phi~_+ = theta + m^+ phi` corresponds to `alpha = 1`, which breaks down
//! where `phi(1, w) = 0`; the eigenvector form does not, and every quantity
//! that is independent of the scaling of `u` (the normalised product
//! `phi~_+(x) phi~_-(y) / N^2`, the factors `m_pm^0`) is computed from it.
//! On a real band `u_- = conj(u_+)`, so `N^2 = int |u_+|^2 / |alpha|^2 > 0`.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{HillError, Result};
use crate::floquet::{discriminant, fundamental_pair, FundamentalPair};
use crate::potential::PeriodicPotential;
use crate::quasimomentum::band_point;
use crate::spectrum::BandStructure;

/// Unit Floquet eigenvector of the monodromy for the multiplier `e^{ik}`.
#[derive(Debug, Clone, Copy)]
pub struct FloquetVector {
    /// `u(0)`.
    pub alpha: Complex64,
    /// `u'(0)`.
    pub beta: Complex64,
    pub lambda: Complex64,
    /// `int_0^1 |u|^2`.
    pub norm2: f64,
    /// `|M v - lambda v|`.
    pub defect: f64,
}

impl FloquetVector {
    /// Eigenvector from the monodromy entries and the signed `sin k`; the
    /// phase makes `alpha` real and positive whenever it is not negligible.
    pub fn new(fp: &FundamentalPair, sin_k: f64) -> Self {
        let (t1, t1p, p1, p1p) = (fp.theta1, fp.theta1_p, fp.phi1, fp.phi1_p);
        let d = 0.5 * (t1 + p1p);
        let lambda = Complex64::new(d, sin_k);
        let v1 = (Complex64::new(p1, 0.0), Complex64::new(0.5 * (p1p - t1), sin_k));
        let v2 = (Complex64::new(0.5 * (t1 - p1p), sin_k), Complex64::new(t1p, 0.0));
        let n1 = v1.0.norm_sqr() + v1.1.norm_sqr();
        let n2 = v2.0.norm_sqr() + v2.1.norm_sqr();
        let (mut a, mut b, n) = if n1 >= n2 { (v1.0, v1.1, n1.sqrt()) } else { (v2.0, v2.1, n2.sqrt()) };
        a /= n;
        b /= n;
        let phase = if a.norm() > 1e-8 { a.conj() / a.norm() } else { b.conj() / b.norm() };
        a *= phase;
        b *= phase;
        let [itt, itp, ipp] = fp.gram;
        let norm2 = a.norm_sqr() * itt + 2.0 * (a * b.conj()).re * itp + b.norm_sqr() * ipp;
        let ma = t1 * a + p1 * b - lambda * a;
        let mb = t1p * a + p1p * b - lambda * b;
        FloquetVector {
            alpha: a,
            beta: b,
            lambda,
            norm2,
            defect: (ma.norm_sqr() + mb.norm_sqr()).sqrt(),
        }
    }

    /// `u(x)` from `theta(x)` and `phi(x)`.
    pub fn at(&self, theta: f64, phi: f64) -> Complex64 {
        self.alpha * theta + self.beta * phi
    }
}

/// Bloch data at one energy of a band.
#[derive(Debug, Clone)]
pub struct BlochEvaluation {
    pub w: f64,
    pub k: f64,
    pub band: usize,
    pub sin_k: f64,
    pub theta1: f64,
    pub phi1: f64,
    pub theta1_p: f64,
    pub phi1_p: f64,
    /// Weyl values; `None` where `phi(1, w)` is too small to divide by.
    pub m_plus: Option<Complex64>,
    pub m_minus: Option<Complex64>,
    /// `N^2 = int phi~_+ phi~_-` when the Weyl values exist.
    pub n_squared: Option<f64>,
    pub floquet: FloquetVector,
    pub x: Vec<f64>,
    /// `phi~_+` on the grid, or the unit-norm Bloch wave when `m_plus` is `None`.
    pub bloch_plus: Vec<Complex64>,
    pub bloch_minus: Vec<Complex64>,
    /// `m_pm^0 = e^{-+ ikx} phi~_pm / N`.
    pub m0_plus: Vec<Complex64>,
    pub m0_minus: Vec<Complex64>,
    /// `int_0^1 theta^2`, `int_0^1 theta phi`, `int_0^1 phi^2`.
    pub gram: [f64; 3],
}

/// `|phi(1)|` below which the Weyl functions are not formed.
fn weyl_threshold(numerator: f64) -> f64 {
    1e-8 * (1.0 + numerator.abs())
}

/// `m^pm(w) = (phi' - theta) / (2 phi) pm i sin k / phi` on a band.
pub fn weyl_m(bs: &BandStructure<f64>, w: f64) -> Result<(Complex64, Complex64)> {
    let p = band_point(bs, &w, 0)?;
    let fp = fundamental_pair(&bs.potential, w, &[], None)?;
    let num = 0.5 * (fp.phi1_p - fp.theta1);
    if fp.phi1.abs() < weyl_threshold(num) {
        return Err(edge_error(bs, p.band, w));
    }
    let re = num / fp.phi1;
    let im = p.sin_k / fp.phi1;
    Ok((Complex64::new(re, im), Complex64::new(re, -im)))
}

fn edge_error(bs: &BandStructure<f64>, band: usize, w: f64) -> HillError {
    let (lo, hi) = bs.band(band).unwrap_or((w, w));
    let edge = if (w - lo).abs() < (hi - w).abs() { lo } else { hi };
    HillError::EdgeProximity {
        w,
        edge,
        distance: (w - edge).abs(),
    }
}

/// Uniform periodic grid `j / m`, `j = 0 .. m`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64 / m as f64).collect()
}

/// Bloch waves, `N^2` and the normalised periodic factors on `x_grid`.
pub fn bloch_pair(bs: &BandStructure<f64>, w: f64, x_grid: &[f64]) -> Result<BlochEvaluation> {
    let p = band_point(bs, &w, 0)?;
    bloch_at(&bs.potential, p.band, w, p.k, p.sin_k, x_grid)
}

pub(crate) fn bloch_at(
    pot: &PeriodicPotential,
    band: usize,
    w: f64,
    k: f64,
    sin_k: f64,
    x_grid: &[f64],
) -> Result<BlochEvaluation> {
    let fp = fundamental_pair(pot, w, x_grid, None)?;
    let fv = FloquetVector::new(&fp, sin_k);
    if !(fv.norm2 > 0.0) {
        return Err(HillError::Consistency(format!("non-positive Bloch norm {} at w = {w}", fv.norm2)));
    }
    let num = 0.5 * (fp.phi1_p - fp.theta1);
    let weyl = fp.phi1.abs() >= weyl_threshold(num) && fv.alpha.norm() > 1e-8;
    let (m_plus, m_minus, n_squared) = if weyl {
        let m = Complex64::new(num / fp.phi1, sin_k / fp.phi1);
        (Some(m), Some(m.conj()), Some(fv.norm2 / fv.alpha.norm_sqr()))
    } else {
        (None, None, None)
    };
    let norm = fv.norm2.sqrt();
    let scale = if weyl { fv.alpha } else { Complex64::new(norm, 0.0) };
    let mut bloch_plus = Vec::with_capacity(x_grid.len());
    let mut m0_plus = Vec::with_capacity(x_grid.len());
    for (i, &x) in x_grid.iter().enumerate() {
        let u = fv.at(fp.theta[i], fp.phi[i]);
        bloch_plus.push(u / scale);
        // alpha is real and positive, so u / |u| carries the phase of phi~_+
        m0_plus.push(Complex64::from_polar(1.0, -k * x) * u / norm);
    }
    Ok(BlochEvaluation {
        w,
        k,
        band,
        sin_k,
        theta1: fp.theta1,
        phi1: fp.phi1,
        theta1_p: fp.theta1_p,
        phi1_p: fp.phi1_p,
        m_plus,
        m_minus,
        n_squared,
        floquet: fv,
        x: x_grid.to_vec(),
        bloch_minus: bloch_plus.iter().map(|z| z.conj()).collect(),
        m0_minus: m0_plus.iter().map(|z| z.conj()).collect(),
        bloch_plus,
        m0_plus,
        gram: fp.gram,
    })
}

impl BlochEvaluation {
    /// `m_-^0(x_i) m_+^0(x_j)`.
    pub fn product(&self, i: usize, j: usize) -> Complex64 {
        self.m0_minus[i] * self.m0_plus[j]
    }

    /// `max |xi_+(x + 1) - xi_+(x)|` relative to `max |xi_+|`, from the
    /// monodromy: `u(1) = lambda u(0)` and `u'(1) = lambda u'(0)`.
    pub fn periodicity_defect(&self) -> f64 {
        self.floquet.defect
    }

    /// Trapezoid value of `int_0^1 m_+^0 m_-^0` on a uniform grid.
    pub fn m0_normalisation(&self) -> f64 {
        let s: Complex64 = self.m0_plus.iter().zip(&self.m0_minus).map(|(a, b)| a * b).sum();
        (s / self.x.len() as f64).re
    }
}

/// Fourier coefficients of `m_pm^0` for `|l| <= L`.
#[derive(Debug, Clone, Serialize)]
pub struct FourierCoeffs {
    pub l_max: usize,
    /// Index `l + L` holds the coefficient of `e^{2 pi i l x}`.
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

impl FourierCoeffs {
    pub fn plus_at(&self, l: i64) -> Complex64 {
        self.plus[(l + self.l_max as i64) as usize]
    }

    pub fn minus_at(&self, l: i64) -> Complex64 {
        self.minus[(l + self.l_max as i64) as usize]
    }

    /// `sum_{l != 0} |m^_+(l)|^2`.
    pub fn plus_off_zero(&self) -> f64 {
        let l = self.l_max as i64;
        (-l..=l).filter(|&i| i != 0).map(|i| self.plus_at(i).norm_sqr()).sum()
    }
}

/// Trapezoid Fourier coefficients of the periodic factors; the evaluation
/// grid must be uniform on `[0, 1)` with at least `8 L` points.
pub fn fourier_coeffs(ev: &BlochEvaluation, l_max: usize) -> Result<FourierCoeffs> {
    let m = ev.x.len();
    if m < 8 * l_max.max(1) {
        return Err(HillError::InvalidArgument(format!("{m} grid points cannot resolve {l_max} harmonics")));
    }
    for (j, &x) in ev.x.iter().enumerate() {
        if (x - j as f64 / m as f64).abs() > 1e-12 {
            return Err(HillError::InvalidArgument("Fourier coefficients need a uniform grid j/m".into()));
        }
    }
    let coeffs = |vals: &[Complex64]| -> Vec<Complex64> {
        (-(l_max as i64)..=l_max as i64)
            .map(|l| {
                let s: Complex64 = vals
                    .iter()
                    .zip(&ev.x)
                    .map(|(v, &x)| v * Complex64::from_polar(1.0, -2.0 * PI * l as f64 * x))
                    .sum();
                s / m as f64
            })
            .collect()
    };
    Ok(FourierCoeffs {
        l_max,
        plus: coeffs(&ev.m0_plus),
        minus: coeffs(&ev.m0_minus),
    })
}

/// Residuals of the band identities at one energy.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityRow {
    pub w: f64,
    pub k: f64,
    pub band: usize,
    /// `|cos k - D|`.
    pub cos_k: f64,
    /// `|E' phi(1) N^2 / (2 sin k) - 1|`.
    pub e_dot: f64,
    /// `|D' + 4 w phi(1) N^2| / |D'|`, the four-fold normalisation.
    pub d_prime_four: f64,
    /// `|D' + w phi(1) N^2| / |D'|`.
    pub d_prime: f64,
    /// `|int m_+^0 m_-^0 - 1|` by trapezoid on the periodic grid.
    pub m0_norm: f64,
    /// `k^2` times the residuals of the three large-`k` integrals of
    /// `theta^2`, `phi^2` and `theta phi`.
    pub large_k: [f64; 3],
}

/// Worst residuals over a sample set.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub rows: Vec<IdentityRow>,
    pub worst_cos_k: f64,
    pub worst_e_dot: f64,
    pub worst_d_prime_four: f64,
    pub worst_d_prime: f64,
    pub worst_m0_norm: f64,
}

/// Checks the band identities at each sample `w` (band interiors).
pub fn identity_suite(bs: &BandStructure<f64>, w_samples: &[f64], grid: usize) -> Result<IdentityReport> {
    let xs = uniform_grid(grid);
    let mut rows = Vec::with_capacity(w_samples.len());
    for &w in w_samples {
        let p = band_point(bs, &w, 1)?;
        let ev = bloch_at(&bs.potential, p.band, w, p.k, p.sin_k, &xs)?;
        let n2 = ev.n_squared.ok_or_else(|| edge_error(bs, p.band, w))?;
        let dv = discriminant(&bs.potential, w)?;
        let phi_n2 = ev.phi1 * n2;
        rows.push(IdentityRow {
            w,
            k: p.k,
            band: p.band,
            cos_k: (p.k.cos() - dv.d).abs(),
            e_dot: (p.e_dot * phi_n2 / (2.0 * p.sin_k) - 1.0).abs(),
            d_prime_four: (dv.d_prime + 4.0 * w * phi_n2).abs() / dv.d_prime.abs(),
            d_prime: (dv.d_prime + w * phi_n2).abs() / dv.d_prime.abs(),
            m0_norm: (ev.m0_normalisation() - 1.0).abs(),
            large_k: large_k_residuals(p.k, &ev.gram),
        });
    }
    let worst = |f: fn(&IdentityRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(IdentityReport {
        worst_cos_k: worst(|r| r.cos_k),
        worst_e_dot: worst(|r| r.e_dot),
        worst_d_prime_four: worst(|r| r.d_prime_four),
        worst_d_prime: worst(|r| r.d_prime),
        worst_m0_norm: worst(|r| r.m0_norm),
        rows,
    })
}

/// `k^2 |int theta^2 - 1/2 - sin 2k / 4k|`, `k^2 |k^2 int phi^2 - 1/2 + sin 2k / 4k|`
/// and `k^2 |2k int theta phi - (1 - cos 2k) / 2k|`.
pub fn large_k_residuals(k: f64, gram: &[f64; 3]) -> [f64; 3] {
    let s = (2.0 * k).sin() / (4.0 * k);
    let k2 = k * k;
    [
        k2 * (gram[0] - 0.5 - s).abs(),
        k2 * (k2 * gram[2] - 0.5 + s).abs(),
        k2 * (2.0 * k * gram[1] - (1.0 - (2.0 * k).cos()) / (2.0 * k)).abs(),
    ]
}

/// `m_-^0(x, k) m_+^0(y, k)` for arbitrary real `x, y`, equal to
/// `e^{-ik(x - y)} phi~_-(x) phi~_+(y) / N^2`, together with
/// `|product - 1|`, which is `O(1 / k)` in the deep band interior.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProductFactor {
    pub value: Complex64,
    pub deviation: f64,
}

/// Normalised Bloch product at `w` for points `x`, `y` anywhere on the line.
pub fn product_kernel_factor(bs: &BandStructure<f64>, w: f64, x: f64, y: f64) -> Result<ProductFactor> {
    let p = band_point(bs, &w, 0)?;
    let value = product_at(&bs.potential, w, p.k, p.sin_k, x, y)?;
    Ok(ProductFactor {
        value,
        deviation: (value - 1.0).norm(),
    })
}

/// `conj(u(x)) u(y) e^{ik(x - y)} / int |u|^2` with `u` the Bloch wave.
pub(crate) fn product_at(pot: &PeriodicPotential, w: f64, k: f64, sin_k: f64, x: f64, y: f64) -> Result<Complex64> {
    let (fx, fy) = (x - x.floor(), y - y.floor());
    let fp = fundamental_pair(pot, w, &[fx, fy], None)?;
    let fv = FloquetVector::new(&fp, sin_k);
    let ux = fv.at(fp.theta[0], fp.phi[0]);
    let uy = fv.at(fp.theta[1], fp.phi[1]);
    // u(x) = lambda^{floor x} u(frac x), so only the fractional phases remain
    let phase = Complex64::from_polar(1.0, k * (fx - fy));
    Ok(ux.conj() * uy * phase / fv.norm2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PeriodicPotential;

    fn mathieu(n: usize) -> BandStructure<f64> {
        BandStructure::compute(&PeriodicPotential::mathieu(2.0), n, None).unwrap()
    }

    fn mid(bs: &BandStructure<f64>, n: usize) -> f64 {
        let (a, b) = bs.band(n).unwrap();
        0.5 * (a + b)
    }

    #[test]
    fn free_weyl_values() {
        let bs = BandStructure::compute(&PeriodicPotential::zero(), 4, None).unwrap();
        let (mp, mm) = weyl_m(&bs, 2.0).unwrap();
        assert!((mp - Complex64::new(0.0, 2.0)).norm() < 1e-12);
        assert!((mm - Complex64::new(0.0, -2.0)).norm() < 1e-12);
        let xs = uniform_grid(64);
        let ev = bloch_pair(&bs, 2.0, &xs).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            assert!((ev.bloch_plus[i] - Complex64::from_polar(1.0, 2.0 * x)).norm() < 1e-12);
        }
        assert!((ev.n_squared.unwrap() - 1.0).abs() < 1e-12);
        let f = fourier_coeffs(&ev, 4).unwrap();
        assert!((f.plus_at(0) - 1.0).norm() < 1e-12);
        assert!(f.plus_off_zero() < 1e-24);
    }

    #[test]
    fn mathieu_bloch_solves_the_equation() {
        let bs = mathieu(4);
        let w = mid(&bs, 1);
        let (mp, mm) = weyl_m(&bs, w).unwrap();
        assert!((mp - mm.conj()).norm() < 1e-14);
        let xs = uniform_grid(256);
        let ev = bloch_pair(&bs, w, &xs).unwrap();
        assert!(ev.periodicity_defect() < 1e-10);
        // the periodic factor closes up across one period
        let fp = fundamental_pair(&bs.potential, w, &[1.0 + 0.25, 0.25], None).unwrap();
        let fv = FloquetVector::new(&fp, ev.sin_k);
        let shifted = fv.at(fp.theta[0], fp.phi[0]);
        let base = fv.at(fp.theta[1], fp.phi[1]);
        assert!((shifted - fv.lambda * base).norm() < 1e-9);
        // N^2 from the Gram integrals matches the trapezoid norm of phi~_+
        let trap: f64 = ev.bloch_plus.iter().map(|z| z.norm_sqr()).sum::<f64>() / xs.len() as f64;
        assert!((trap / ev.n_squared.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identities_on_mathieu_bands() {
        let bs = mathieu(8);
        let ws: Vec<f64> = (1..6).map(|n| mid(&bs, n)).collect();
        let r = identity_suite(&bs, &ws, 256).unwrap();
        assert!(r.worst_cos_k < 1e-10);
        assert!(r.worst_e_dot < 1e-8, "{r:?}");
        assert!(r.worst_d_prime < 1e-8, "{r:?}");
        assert!(r.worst_m0_norm < 1e-10);
        // the four-fold variant is off by exactly a factor of four
        for row in &r.rows {
            assert!((row.d_prime_four - 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn product_factor_is_regular_at_dirichlet_points() {
        let bs = mathieu(4);
        // phi(1, a) = 0 at a band edge of an open gap: approach it
        let a = bs.gap(1).upper;
        for d in [1e-3, 1e-6, 1e-9] {
            let w = a + d * bs.gap(1).length;
            let pf = product_kernel_factor(&bs, w, 0.3, 1.7).unwrap();
            assert!(pf.value.norm().is_finite() && pf.value.norm() < 10.0);
        }
        // x = y gives |u(x)|^2 / int |u|^2 whose mean over a period is one
        let w = mid(&bs, 2);
        let s: f64 = (0..64)
            .map(|j| product_kernel_factor(&bs, w, j as f64 / 64.0, j as f64 / 64.0).unwrap().value.re)
            .sum();
        assert!((s / 64.0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn product_matches_weyl_normalisation() {
        let bs = mathieu(4);
        let w = mid(&bs, 2);
        let xs = uniform_grid(32);
        let ev = bloch_pair(&bs, w, &xs).unwrap();
        let n2 = ev.n_squared.unwrap();
        for (i, j) in [(3, 7), (10, 2), (0, 31)] {
            let direct = ev.bloch_minus[i] * ev.bloch_plus[j] * Complex64::from_polar(1.0, ev.k * (xs[i] - xs[j])) / n2;
            let pf = product_kernel_factor(&bs, w, xs[i], xs[j]).unwrap().value;
            assert!((direct - pf).norm() < 1e-10);
            assert!((ev.product(i, j) - pf).norm() < 1e-10);
        }
    }

    #[test]
    fn near_edge_concentration() {
        let bs = mathieu(6);
        let xs = uniform_grid(256);
        for n in 1..4 {
            let g = bs.gap(n);
            for w in [g.upper + 0.5 * g.length, g.lower - 0.5 * g.length] {
                let ev = bloch_pair(&bs, w, &xs).unwrap();
                let f = fourier_coeffs(&ev, 16).unwrap();
                // e^{-ikx} times e^{+- i n pi x} leaves harmonics 0 and -n
                let two = f.plus_at(0).norm_sqr() + f.plus_at(-(n as i64)).norm_sqr();
                assert!(two >= 0.9, "gap {n} w {w}: {two}");
            }
        }
    }

    #[test]
    fn interior_fourier_tail_decays() {
        let bs = mathieu(12);
        let xs = uniform_grid(512);
        let mut scaled = Vec::new();
        for n in [3, 6, 10] {
            let ev = bloch_pair(&bs, mid(&bs, n), &xs).unwrap();
            let f = fourier_coeffs(&ev, 32).unwrap();
            scaled.push(f.plus_off_zero() * ev.k * ev.k);
        }
        let max = scaled.iter().cloned().fold(0.0, f64::max);
        let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 4.0, "{scaled:?}");
    }
}
