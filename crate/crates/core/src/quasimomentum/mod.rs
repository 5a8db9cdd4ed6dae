//! Quasimomentum and band functions.
//!
//! On band `n` the quasimomentum `k(w)` runs from `n pi` to `(n + 1) pi`
//! with `cos k = D(w)`. With `r = k - n pi` and `sigma = (-1)^n` we have
//! `1 - cos r = 1 - sigma D` and `1 + cos r = 1 + sigma D`, both available in
//! product form from the monodromy, so `r` is recovered without cancellation
//! next to either band edge.
//!
//! Derivatives of `E(k) = w(k)^2` come from `cos k = D(E)`:
//! `E' = -sin k / D_E`, `E'' = -D / D_E - sin^2 k D_EE / D_E^3` and
//! `E''' = sin k / D_E - 3 sin k D D_EE / D_E^3 + sin^3 k D_EEE / D_E^4
//! - 3 sin^3 k D_EE^2 / D_E^5`. None of these is singular at an open band
//! edge, where `sin k = 0` and `D_E != 0`.

mod chart;
mod gaps;

pub use chart::{BandChart, ChartOptions, ChartPanel, ChartSample, Partition, QuasimomentumChart};
pub use gaps::{
    asymptotic_residual, exact_gap_integral, gap_density, gap_integral_quadrature, poisson_extension,
    AsymptoticResidual, DensityBounds, GapDensities, GapDensity, PoissonValue,
};

use serde::Serialize;

use crate::error::{HillError, Result};
use crate::floquet::{monodromy, Monodromy};
use crate::real::Real;
use crate::spectrum::{gap_function, newton_bracketed, sigma_of, BandStructure, Location};

/// Quasimomentum and band-function derivatives at one point of a band.
#[derive(Debug, Clone)]
pub struct BandPoint<T: Real> {
    pub band: usize,
    pub w: T,
    /// In `[n pi, (n + 1) pi]`.
    pub k: T,
    pub sin_k: T,
    /// `D(w) = cos k`.
    pub d: T,
    pub energy: T,
    pub e_dot: T,
    /// Zero unless `order >= 2`.
    pub e_ddot: T,
    /// Zero unless `order >= 3`.
    pub e_dddot: T,
    pub order: usize,
    /// `sin k` is below `1e-6`, so the point is effectively a band edge.
    pub edge_limited: bool,
}

impl<T: Real> BandPoint<T> {
    /// `dk/dw = 2 w / E'`; infinite at open band edges.
    pub fn dk_dw(&self) -> f64 {
        2.0 * self.w.to_f64() / self.e_dot.to_f64()
    }

    pub fn to_f64(&self) -> BandPoint<f64> {
        BandPoint {
            band: self.band,
            w: self.w.to_f64(),
            k: self.k.to_f64(),
            sin_k: self.sin_k.to_f64(),
            d: self.d.to_f64(),
            energy: self.energy.to_f64(),
            e_dot: self.e_dot.to_f64(),
            e_ddot: self.e_ddot.to_f64(),
            e_dddot: self.e_dddot.to_f64(),
            order: self.order,
            edge_limited: self.edge_limited,
        }
    }
}

/// Values of `|1 - sigma D|` below this count as zero.
fn clamp_tol<T: Real>() -> f64 {
    1e4 * T::epsilon()
}

/// Band containing `w`; points inside a gap but within rounding of an edge
/// are assigned to the nearer band.
pub fn band_index<T: Real>(bs: &BandStructure<T>, w: &T) -> Result<usize> {
    match bs.locate(w) {
        Location::Band(n) => Ok(n),
        Location::Beyond => Err(HillError::InvalidArgument(format!(
            "w = {} lies beyond the {} computed bands",
            w.to_f64(),
            bs.n_bands()
        ))),
        Location::Gap(n) => {
            let g = bs.gap(n);
            let m = monodromy(&bs.potential, w, 1)?;
            let depth = -m.gap_jet(sigma_of(n))[0].to_f64();
            if depth > clamp_tol::<T>() {
                return Err(HillError::InGap { w: w.to_f64(), gap: n });
            }
            let d_lo = (w.clone() - g.lower.clone()).to_f64();
            let d_hi = (g.upper.clone() - w.clone()).to_f64();
            Ok(if d_lo < d_hi { n - 1 } else { n })
        }
    }
}

/// Band point at `w` with `order` derivatives of `E` (0 to 3).
pub fn band_point<T: Real>(bs: &BandStructure<T>, w: &T, order: usize) -> Result<BandPoint<T>> {
    let n = band_index(bs, w)?;
    point_in_band(bs, n, w, order)
}

/// Band point at `w`, which must lie on band `n` up to rounding.
pub fn point_in_band<T: Real>(bs: &BandStructure<T>, n: usize, w: &T, order: usize) -> Result<BandPoint<T>> {
    if order > 3 {
        return Err(HillError::InvalidArgument(format!("derivative order {order} > 3")));
    }
    let m = monodromy(&bs.potential, w, order.max(1) + 1)?;
    point_from_monodromy(&m, n, w, order)
}

pub(crate) fn point_from_monodromy<T: Real>(m: &Monodromy<T>, n: usize, w: &T, order: usize) -> Result<BandPoint<T>> {
    let sigma = sigma_of(n);
    let g_in = m.gap_jet(sigma)[0].clone();
    let g_out = m.gap_jet(-sigma)[0].clone();
    let tol = clamp_tol::<T>();
    if g_in.to_f64() < -tol {
        return Err(HillError::InGap { w: w.to_f64(), gap: n });
    }
    if g_out.to_f64() < -tol {
        return Err(HillError::InGap { w: w.to_f64(), gap: n + 1 });
    }
    let g_in = T::max_of(g_in, T::zero());
    let g_out = T::max_of(g_out, T::zero());
    let two = T::from_f64(2.0);
    let sin_r = (g_in.clone() * g_out.clone()).sqrt();
    let r = if g_in <= T::one() {
        two.clone() * (g_in / two.clone()).sqrt().asin()
    } else {
        T::pi() - two.clone() * (g_out / two.clone()).sqrt().asin()
    };
    let k = T::pi() * T::from_f64(n as f64) + r;
    let s = if sigma > 0 { sin_r.clone() } else { -sin_r.clone() };

    let dj = m.d_jet();
    let d = dj[0].clone();
    let d_e = dj[1].clone();
    if d_e.to_f64() == 0.0 {
        return Err(HillError::EdgeProximity {
            w: w.to_f64(),
            edge: w.to_f64(),
            distance: 0.0,
        });
    }
    let e_dot = -s.clone() / d_e.clone();
    let (mut e_ddot, mut e_dddot) = (T::zero(), T::zero());
    if order >= 2 {
        let d_ee = dj[2].clone() * two;
        let de2 = d_e.clone() * d_e.clone();
        let de3 = de2.clone() * d_e.clone();
        let s2 = s.clone() * s.clone();
        e_ddot = -d.clone() / d_e.clone() - s2.clone() * d_ee.clone() / de3.clone();
        if order >= 3 {
            let d_eee = dj[3].clone() * T::from_f64(6.0);
            let s3 = s2 * s.clone();
            let de4 = de3.clone() * d_e.clone();
            let de5 = de4.clone() * d_e.clone();
            e_dddot = s.clone() / d_e.clone() - T::from_f64(3.0) * s.clone() * d.clone() * d_ee.clone() / de3
                + s3.clone() * d_eee / de4
                - T::from_f64(3.0) * s3 * d_ee.clone() * d_ee / de5;
        }
    }
    Ok(BandPoint {
        band: n,
        w: w.clone(),
        k,
        edge_limited: sin_r.to_f64() < 1e-6,
        sin_k: s,
        d,
        energy: m.energy.clone(),
        e_dot,
        e_ddot,
        e_dddot,
        order,
    })
}

/// Quasimomentum of `w` on its band.
pub fn k_of_w<T: Real>(bs: &BandStructure<T>, w: &T) -> Result<T> {
    Ok(band_point(bs, w, 0)?.k)
}

/// Band and offset `r = k - n pi` of a real quasimomentum (`E` is even in `k`).
fn split_k<T: Real>(bs: &BandStructure<T>, k: &T) -> Result<(usize, T)> {
    let k = k.abs();
    let pi = T::pi();
    let mut n = (k.to_f64() / std::f64::consts::PI).floor().max(0.0) as usize;
    let mut r = k.clone() - pi.clone() * T::from_f64(n as f64);
    // correct the double-precision floor by one step either way
    if r.is_negative() && n > 0 {
        n -= 1;
        r = r + pi.clone();
    } else if r > pi && r.to_f64() > 0.0 {
        n += 1;
        r = r - pi;
    }
    if n >= bs.n_bands() {
        if n == bs.n_bands() && r.to_f64() == 0.0 && n > 0 {
            return Ok((n - 1, T::pi()));
        }
        return Err(HillError::InvalidArgument(format!(
            "k = {} lies beyond the {} computed bands",
            k.to_f64(),
            bs.n_bands()
        )));
    }
    Ok((n, r))
}

/// Unique `w` on band `n` with `k(w) = k`; `hint` seeds the Newton iteration.
pub fn w_of_k<T: Real>(bs: &BandStructure<T>, k: &T, hint: Option<T>) -> Result<T> {
    let (n, r) = split_k(bs, k)?;
    let (lo, hi) = bs.band(n)?;
    if r.to_f64() <= 0.0 {
        return Ok(lo);
    }
    let pi = T::pi();
    if r >= pi {
        return Ok(hi);
    }
    let sigma = sigma_of(n);
    let two = T::from_f64(2.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    // near the left edge solve 1 - sigma D = 2 sin^2(r/2), else 1 + sigma D = 2 cos^2(r/2)
    let (sg, target, lo_positive) = if r.to_f64() <= half_pi {
        let s = (r.clone() / two.clone()).sin();
        (sigma, two.clone() * s.clone() * s, false)
    } else {
        let s = ((pi - r.clone()) / two.clone()).sin();
        (-sigma, two.clone() * s.clone() * s, true)
    };
    let x0 = hint.unwrap_or_else(|| lo.clone() + (hi.clone() - lo.clone()) * r / T::pi());
    let pot = &bs.potential;
    let f = |w: &T| -> Result<(T, T)> {
        let m = monodromy(pot, w, 2)?;
        let g = gap_function(&m, sg, w);
        Ok((g[0].clone() - target.clone(), g[1].clone()))
    };
    let root = newton_bracketed(f, lo, hi, Some(lo_positive), x0, 4.0 * T::epsilon(), 200)?;
    Ok(root.x)
}

/// `E(k)` and its first three derivatives at a real quasimomentum.
pub fn band_function<T: Real>(bs: &BandStructure<T>, k: &T) -> Result<BandPoint<T>> {
    let (n, _) = split_k(bs, k)?;
    let w = w_of_k(bs, k, None)?;
    let mut p = point_in_band(bs, n, &w, 3)?;
    if k.is_negative() {
        // E is even in k
        p.k = -p.k;
        p.sin_k = -p.sin_k;
        p.e_dot = -p.e_dot;
        p.e_dddot = -p.e_dddot;
    }
    Ok(p)
}

/// `E'(k) / (k sqrt((w - a_n^+) / |g_n|))`, the ratio governed by the
/// square-root law at the left edge of band `n`.
pub fn edge_law_ratio<T: Real>(bs: &BandStructure<T>, n: usize, w: &T) -> Result<f64> {
    if n == 0 || n > bs.n_max() || bs.gap(n).empty {
        return Err(HillError::InvalidArgument(format!("gap {n} is empty or not computed")));
    }
    let p = point_in_band(bs, n, w, 1)?;
    let dist = (w.clone() - bs.gap(n).upper.clone()).to_f64();
    let g = bs.gap(n).length;
    Ok(p.e_dot.to_f64() / (p.k.to_f64() * (dist / g).sqrt()))
}

/// One zero of `E''` on a band.
#[derive(Debug, Clone, Serialize)]
pub struct Inflection {
    pub band: usize,
    pub k: f64,
    pub w: f64,
    /// `E'''` from the analytic energy jets.
    pub e_dddot: f64,
    /// `E'''` from Richardson-extrapolated differences of `E''`.
    pub e_dddot_fd: f64,
    /// Disagreement of the two, taken as the noise floor.
    pub noise: f64,
}

/// Zeros of `E''` located on a band.
#[derive(Debug, Clone, Serialize)]
pub struct InflectionSearch {
    pub band: usize,
    pub zeros: Vec<Inflection>,
    /// Number of sign evaluations used to detect zeros.
    pub samples: usize,
}

impl InflectionSearch {
    /// The inflection point when it is unique.
    pub fn unique(&self) -> Option<&Inflection> {
        if self.zeros.len() == 1 {
            Some(&self.zeros[0])
        } else {
            None
        }
    }
}

/// Sample points of band `[lo, hi]`: geometric toward both open edges
/// (ratio 4, starting a sixteenth of the adjacent gap length away) and a
/// uniform interior grid.
fn inflection_samples(lo: f64, hi: f64, g_left: f64, g_right: f64, uniform: usize) -> (Vec<f64>, Vec<f64>) {
    let len = hi - lo;
    let mut left = Vec::new();
    let mut right = Vec::new();
    let geometric = |g: f64, out: &mut Vec<f64>| {
        if g > 0.0 {
            let mut d = g / 16.0;
            while d < 0.5 * len {
                out.push(d);
                d *= 4.0;
            }
        }
    };
    geometric(g_left, &mut left);
    geometric(g_right, &mut right);
    for i in 1..uniform {
        let f = i as f64 / uniform as f64;
        if f <= 0.5 {
            left.push(f * len);
        } else {
            right.push((1.0 - f) * len);
        }
    }
    left.sort_by(|a, b| a.partial_cmp(b).unwrap());
    right.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (left, right)
}

/// Zeros of `E''` on band `n`, found by sign changes on a sample set that
/// is geometric toward both edges and refined by safeguarded Newton.
pub fn inflection_point<T: Real>(bs: &BandStructure<T>, n: usize) -> Result<InflectionSearch> {
    let (lo, hi) = bs.band(n)?;
    let g_left = bs.gap_length(n);
    let g_right = bs.gap_length(n + 1);
    let (left, right) = inflection_samples(lo.to_f64(), hi.to_f64(), g_left, g_right, 24);
    // offsets are applied in T so that edges closer than f64 resolution stay distinct
    let mut pts: Vec<T> = left.iter().map(|d| lo.clone() + T::from_f64(*d)).collect();
    pts.extend(right.iter().rev().map(|d| hi.clone() - T::from_f64(*d)));

    let mut signs = Vec::with_capacity(pts.len());
    for w in &pts {
        let p = point_in_band(bs, n, w, 2)?;
        signs.push(p.e_ddot.is_negative());
    }
    let mut zeros = Vec::new();
    for i in 1..pts.len() {
        if signs[i] == signs[i - 1] {
            continue;
        }
        let (a, b) = (pts[i - 1].clone(), pts[i].clone());
        let f = |w: &T| -> Result<(T, T)> {
            let p = point_in_band(bs, n, w, 3)?;
            // dE''/dw = E''' dk/dw = E''' 2w / E'
            let slope = p.e_dddot.clone() * T::from_f64(2.0) * w.clone() / p.e_dot.clone();
            Ok((p.e_ddot, slope))
        };
        let root = newton_bracketed(f, a.clone(), b.clone(), Some(!signs[i - 1]), (a + b) * T::from_f64(0.5), 16.0 * T::epsilon(), 200)?;
        let wn = root.x;
        let p = point_in_band(bs, n, &wn, 3)?;
        let fd = e_dddot_richardson(bs, n, &wn, &lo, &hi)?;
        zeros.push(Inflection {
            band: n,
            k: p.k.to_f64(),
            w: wn.to_f64(),
            e_dddot: p.e_dddot.to_f64(),
            e_dddot_fd: fd,
            noise: (fd - p.e_dddot.to_f64()).abs(),
        });
    }
    Ok(InflectionSearch {
        band: n,
        zeros,
        samples: pts.len(),
    })
}

/// `E'''` at `w` from central differences of `E''` in `w` with one
/// Richardson step, converted with `dw/dk = E' / 2w`.
fn e_dddot_richardson<T: Real>(bs: &BandStructure<T>, n: usize, w: &T, lo: &T, hi: &T) -> Result<f64> {
    let dist = T::min_of(w.clone() - lo.clone(), hi.clone() - w.clone());
    let h = dist * T::from_f64(0.05);
    let second = |x: &T| -> Result<T> { Ok(point_in_band(bs, n, x, 2)?.e_ddot) };
    let central = |h: &T| -> Result<T> {
        let up = second(&(w.clone() + h.clone()))?;
        let dn = second(&(w.clone() - h.clone()))?;
        Ok((up - dn) / (T::from_f64(2.0) * h.clone()))
    };
    let d1 = central(&h)?;
    let d2 = central(&(h * T::from_f64(0.5)))?;
    let slope = (T::from_f64(4.0) * d2 - d1) / T::from_f64(3.0);
    let p = point_in_band(bs, n, w, 1)?;
    Ok((slope * p.e_dot / (T::from_f64(2.0) * w.clone())).to_f64())
}

#[cfg(test)]
mod tests;
