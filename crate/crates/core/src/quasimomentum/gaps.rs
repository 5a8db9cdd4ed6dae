//! Gap densities `q(u) = arccosh |D(u)|` and the integrals built from them.
//!
//! On gap `n` the quasimomentum is `n pi + i q(u)`. The harmonic extension
//! of `q` to the upper half plane and the derivative of `p(u) = Re k(u)` are
//! both integrals of `q` against explicit kernels over the gaps and their
//! mirror images `-g_n`. Gap integrals use `t = m - (L/2) cos theta`, under
//! which `q(t) dt` behaves like `sin^2 theta d theta` and Gauss-Legendre
//! quadrature converges rapidly.

use serde::Serialize;
use std::f64::consts::PI;

use super::k_of_w;
use crate::error::{HillError, Result};
use crate::floquet::monodromy;
use crate::potential::PeriodicPotential;
use crate::quad::{adaptive, gl_rule};
use crate::real::Real;
use crate::spectrum::{sigma_of, BandStructure};

const DENSITY_NODES: usize = 64;

/// Density of one nonempty gap, with a fixed quadrature of `q`.
#[derive(Debug, Clone)]
pub struct GapDensity {
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
    potential: PeriodicPotential,
    /// Quadrature nodes in the gap.
    pub nodes: Vec<f64>,
    /// Quadrature weight times `q` at each node.
    pub weighted: Vec<f64>,
    /// `int_{g_n} q`.
    pub mass: f64,
}

/// Extreme values of `q(u) / sqrt((u - a^-)(a^+ - u))` over the nodes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DensityBounds {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl GapDensity {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    /// `q(u)`; zero outside the gap.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if u <= self.lower || u >= self.upper {
            return Ok(0.0);
        }
        let m = monodromy::<f64>(&self.potential, &u, 1)?;
        Ok((-m.gap_jet(sigma_of(self.n))[0]).max(0.0).acosh_1p())
    }

    pub fn sample(&self, us: &[f64]) -> Result<Vec<f64>> {
        us.iter().map(|&u| self.eval(u)).collect()
    }

    /// Ratio of `q` to the semicircle profile at the quadrature nodes.
    pub fn bounds(&self) -> Result<DensityBounds> {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &t in &self.nodes {
            let s = ((t - self.lower) * (self.upper - t)).sqrt();
            let r = self.eval(t)? / s;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        Ok(DensityBounds {
            min_ratio: lo,
            max_ratio: hi,
        })
    }

    /// `int_{g_n} q(t) f(t) dt` adaptively in the angle variable.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64, split: Option<f64>, tol: f64) -> Result<f64> {
        let (m, h) = (self.center(), 0.5 * self.length());
        let mut err = None;
        let mut g = |th: f64| {
            let t = m - h * th.cos();
            match self.eval(t) {
                Ok(q) => q * f(t) * h * th.sin(),
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        };
        let mut cuts = vec![0.0, PI];
        if let Some(u) = split {
            if u > self.lower && u < self.upper {
                cuts.insert(1, ((m - u) / h).clamp(-1.0, 1.0).acos());
            }
        }
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += adaptive(&mut g, w[0], w[1], tol, 1e-12, 40).value;
        }
        match err {
            Some(e) => Err(e),
            None => Ok(total),
        }
    }
}

/// Density of gap `n` with its fixed quadrature.
pub fn gap_density(bs: &BandStructure<f64>, n: usize) -> Result<GapDensity> {
    if n == 0 || n > bs.n_max() {
        return Err(HillError::InvalidArgument(format!("gap {n} not computed")));
    }
    let g = bs.gap(n);
    let mut d = GapDensity {
        n,
        lower: g.lower,
        upper: g.upper,
        potential: bs.potential.clone(),
        nodes: Vec::new(),
        weighted: Vec::new(),
        mass: 0.0,
    };
    if g.empty {
        return Ok(d);
    }
    let (m, h) = (d.center(), 0.5 * d.length());
    for (th, wt) in gl_rule(DENSITY_NODES).mapped(0.0, PI) {
        let t = m - h * th.cos();
        let q = d.eval(t)?;
        d.nodes.push(t);
        d.weighted.push(wt * h * th.sin() * q);
    }
    d.mass = d.weighted.iter().sum();
    Ok(d)
}

/// Densities of all nonempty computed gaps.
#[derive(Debug, Clone)]
pub struct GapDensities {
    pub gaps: Vec<GapDensity>,
    /// Index of the last computed gap.
    pub n_max: usize,
}

impl GapDensities {
    pub fn build(bs: &BandStructure<f64>) -> Result<Self> {
        let mut gaps = Vec::new();
        for n in 1..=bs.n_max() {
            if !bs.gap(n).empty {
                gaps.push(gap_density(bs, n)?);
            }
        }
        Ok(GapDensities { gaps, n_max: bs.n_max() })
    }

    /// `(2 / pi) sum_n int_{g_n} q`, which equals `Q_0` of the shifted potential.
    pub fn trace_q0(&self) -> f64 {
        2.0 / PI * self.gaps.iter().map(|g| g.mass).sum::<f64>()
    }

    /// Estimated mass of the gaps beyond the last nonempty one, assuming the
    /// masses keep decaying at the ratio of the last two.
    pub fn tail_mass(&self) -> f64 {
        let k = self.gaps.len();
        if k < 2 {
            return 0.0;
        }
        let (a, b) = (self.gaps[k - 2].mass, self.gaps[k - 1].mass);
        let rho = b / a;
        if rho < 1.0 {
            b * rho / (1.0 - rho)
        } else {
            f64::INFINITY
        }
    }

    /// `p'(u) = 1 + (1/pi) sum_{n != 0} int_{g_n} q(t) / (t - u)^2 dt`, with
    /// gaps `-g_n` folded in. Refuses `u` within `c |g_n|` of an open gap.
    pub fn p_prime(&self, u: f64, c: f64) -> Result<f64> {
        for g in &self.gaps {
            let reach = c * g.length();
            if u > g.lower - reach && u < g.upper + reach {
                return Err(HillError::EdgeProximity {
                    w: u,
                    edge: if u < g.center() { g.lower } else { g.upper },
                    distance: (u - g.lower).abs().min((u - g.upper).abs()),
                });
            }
        }
        let mut s = 0.0;
        for g in &self.gaps {
            for (t, wq) in g.nodes.iter().zip(&g.weighted) {
                s += wq * ((t - u).powi(-2) + (t + u).powi(-2));
            }
        }
        Ok(1.0 + s / PI)
    }
}

/// Harmonic extension of the gap densities at `u + i v`.
#[derive(Debug, Clone, Serialize)]
pub struct PoissonValue {
    pub u: f64,
    pub v: f64,
    /// `q(u + i v)`.
    pub value: f64,
    /// `(n, I_n(u, v))` over the nonempty gaps `n >= 1`.
    pub terms: Vec<(usize, f64)>,
    /// Sum of the mirrored terms `I_{-n}(u, v)`.
    pub mirrored: f64,
    /// Estimated contribution of the gaps that were not computed.
    pub tail_bound: f64,
}

/// `q(u + i v) = v + (v / pi) int q(t) / ((t - u)^2 + v^2) dt` over all gaps.
pub fn poisson_extension(densities: &GapDensities, u: f64, v: f64) -> Result<PoissonValue> {
    if v < 0.0 || !v.is_finite() || !u.is_finite() {
        return Err(HillError::InvalidArgument(format!("need finite u and v >= 0, got ({u}, {v})")));
    }
    let mut terms = Vec::with_capacity(densities.gaps.len());
    if v == 0.0 {
        // boundary value: q itself
        let mut value = 0.0;
        for g in &densities.gaps {
            let q = g.eval(u.abs())?;
            terms.push((g.n, q));
            value += q;
        }
        return Ok(PoissonValue {
            u,
            v,
            value,
            terms,
            mirrored: 0.0,
            tail_bound: 0.0,
        });
    }
    let mut mirrored = 0.0;
    let mut value = v;
    for g in &densities.gaps {
        let direct = g.integrate(|t| v / PI / ((t - u).powi(2) + v * v), Some(u), 1e-14)?;
        let mirror = g.integrate(|t| v / PI / ((t + u).powi(2) + v * v), Some(-u), 1e-14)?;
        terms.push((g.n, direct));
        mirrored += mirror;
        value += direct + mirror;
    }
    // beyond the last computed gap every gap is at least this far from u
    let edge = (densities.n_max as f64 + 0.5) * PI;
    let dist2 = ((edge - u.abs()).max(0.0)).powi(2) + v * v;
    let tail_bound = 2.0 * v / PI * densities.tail_mass() / dist2;
    Ok(PoissonValue {
        u,
        v,
        value,
        terms,
        mirrored,
        tail_bound,
    })
}

/// Quasimomentum asymptotics at one band point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsymptoticResidual {
    pub w: f64,
    pub k: f64,
    /// `w - k - Q_0 / w`.
    pub r1: f64,
    /// `|r1| w^3`.
    pub scaled1: f64,
    /// `w - k - Q_0 / w - Q_2 / w^3`.
    pub r3: f64,
    /// `|r3| w^5`.
    pub scaled3: f64,
}

/// Residuals of `w - k(w) = Q_0 / w + Q_2 / w^3 + ...` with the moments of
/// the shifted potential.
pub fn asymptotic_residual(bs: &BandStructure<f64>, w: f64) -> Result<AsymptoticResidual> {
    let k = k_of_w(bs, &w)?;
    let q0 = bs.potential.moment_q0();
    let q2 = bs.potential.moment_q2();
    let r1 = w - k - q0 / w;
    let r3 = r1 - q2 / w.powi(3);
    Ok(AsymptoticResidual {
        w,
        k,
        r1,
        scaled1: r1.abs() * w.powi(3),
        r3,
        scaled3: r3.abs() * w.powi(5),
    })
}

/// `int_a^b sqrt((t - a)(b - t)) / (t - u)^p dt` in closed form for
/// `p = 3, 4` and `u` outside `[a, b]`.
pub fn exact_gap_integral(a: f64, b: f64, u: f64, power: u32) -> Result<f64> {
    if !(a < b) || !u.is_finite() {
        return Err(HillError::InvalidArgument(format!("need a < b, got [{a}, {b}]")));
    }
    if u >= a && u <= b {
        return Err(HillError::InvalidArgument(format!("u = {u} lies in [{a}, {b}]")));
    }
    let (da, db) = ((u - a).abs(), (u - b).abs());
    let base = (b - a).powi(2) / (da * db).powf(1.5);
    match power {
        // odd power: the integrand has the sign of a - u
        3 => Ok((a - u).signum() * PI / 8.0 * base),
        4 => Ok(PI / 16.0 * base * (1.0 / da + 1.0 / db)),
        _ => Err(HillError::InvalidArgument(format!("power {power} not in {{3, 4}}"))),
    }
}

/// Adaptive quadrature of the same integral, used as an independent check.
pub fn gap_integral_quadrature(a: f64, b: f64, u: f64, power: u32) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut f = |th: f64| {
        let t = m - h * th.cos();
        let s = h * th.sin();
        s * s / (t - u).powi(power as i32)
    };
    adaptive(&mut f, 0.0, PI, 0.0, 1e-14, 50).value
}
