//! Fundamental solutions, monodromy and the discriminant.
//!
//! `theta` and `phi` solve `-y'' + P y = E y` with `theta(0) = phi'(0) = 1`,
//! `theta'(0) = phi(0) = 0`, and `D = (theta(1) + phi'(1)) / 2`.
//!
//! The integrator is a Taylor series method: with `V = P - E` expanded at the
//! current point, the coefficients of a solution obey
//! `(j+1)(j+2) y_{j+2} = sum_i V_i y_{j-i}`. All four solution components are
//! carried as truncated power series in the energy offset, which gives exact
//! energy derivatives of the monodromy without finite differences. Step sizes
//! come from the size of the last two Taylor coefficients.

use crate::error::{HillError, Result};
use crate::potential::PeriodicPotential;
use crate::quad::LobattoGrid;
use crate::real::Real;

/// Jet depth: value plus three energy derivatives.
pub(crate) const JETS: usize = 4;

/// Monodromy entries at `x = 1` as Taylor coefficients in the energy.
///
/// Entry `[d]` of each array is `(1/d!) d^d/dE^d` of the quantity.
#[derive(Debug, Clone)]
pub struct Monodromy<T: Real> {
    pub energy: T,
    pub theta: [T; JETS],
    pub theta_p: [T; JETS],
    pub phi: [T; JETS],
    pub phi_p: [T; JETS],
    pub depth: usize,
}

/// Outputs of one integration over `[0, x_end]`.
#[derive(Debug, Clone)]
pub(crate) struct Flow<T: Real> {
    pub end: Monodromy<T>,
    /// `int theta^2`, `int theta phi`, `int phi^2` over `[0, x_end]`.
    pub gram: [T; 3],
    /// `(theta, theta', phi, phi')` at the requested outputs.
    pub samples: Vec<[T; 4]>,
    #[allow(dead_code)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FlowOptions<'a> {
    pub x_end: f64,
    pub outputs: &'a [f64],
    pub gram: bool,
    /// Number of energy jets carried (1 = values only).
    pub depth: usize,
    pub tol: Option<f64>,
}

impl Default for FlowOptions<'_> {
    fn default() -> Self {
        FlowOptions {
            x_end: 1.0,
            outputs: &[],
            gram: false,
            depth: 1,
            tol: None,
        }
    }
}

fn zeros<T: Real, const N: usize>() -> [T; N] {
    std::array::from_fn(|_| T::zero())
}

/// Truncated product of two energy jets.
pub(crate) fn jet_mul<T: Real>(a: &[T; JETS], b: &[T; JETS], depth: usize) -> [T; JETS] {
    let mut out = zeros::<T, JETS>();
    for i in 0..depth {
        for j in 0..depth - i {
            out[i + j] = out[i + j].clone() + a[i].clone() * b[j].clone();
        }
    }
    out
}

/// Integrate the fundamental system at energy `energy`.
pub(crate) fn flow<T: Real>(pot: &PeriodicPotential, energy: &T, opts: FlowOptions<'_>) -> Result<Flow<T>> {
    let depth = opts.depth.clamp(1, JETS);
    let n = T::taylor_order();
    let tol = opts.tol.unwrap_or_else(T::ode_tol);
    let neg_e = -energy.clone();

    // y[0] = theta, y[1] = phi; value and derivative jets
    let mut val: [[T; JETS]; 2] = [zeros(), zeros()];
    let mut der: [[T; JETS]; 2] = [zeros(), zeros()];
    val[0][0] = T::one();
    der[1][0] = T::one();
    let mut gram: [T; 3] = zeros();
    let mut samples = Vec::with_capacity(opts.outputs.len());
    let mut out_idx = 0;
    while out_idx < opts.outputs.len() && opts.outputs[out_idx] <= 0.0 {
        samples.push([val[0][0].clone(), der[0][0].clone(), val[1][0].clone(), der[1][0].clone()]);
        out_idx += 1;
    }

    let mut v: Vec<T> = vec![T::zero(); n + 1];
    let mut c: [Vec<[T; JETS]>; 2] = [vec![zeros(); n + 1], vec![zeros(); n + 1]];
    let mut x0 = 0.0f64;
    let mut x0_t = T::zero();
    let mut steps = 0usize;

    while x0 < opts.x_end {
        pot.taylor_into(&x0_t, &neg_e, &mut v);
        for s in 0..2 {
            let cs = &mut c[s];
            cs[0] = val[s].clone();
            cs[1] = der[s].clone();
            for j in 0..=n - 2 {
                let mut acc: [T; JETS] = zeros();
                for i in 0..=j {
                    let vi = &v[i];
                    let cj = &cs[j - i];
                    for d in 0..depth {
                        acc[d].mul_add_assign(vi, &cj[d]);
                    }
                }
                // energy offset enters V with a minus sign
                for d in 1..depth {
                    acc[d] = acc[d].clone() - cs[j][d - 1].clone();
                }
                let denom = T::from_f64(((j + 1) * (j + 2)) as f64);
                for d in 0..depth {
                    acc[d] = acc[d].clone() / denom.clone();
                }
                cs[j + 2] = acc;
            }
        }

        // step size from the trailing coefficients, per jet order
        let mut h = f64::INFINITY;
        for d in 0..depth {
            let mut scale: f64 = if d == 0 { 1.0 } else { 0.0 };
            let mut r1: f64 = 0.0;
            let mut r2: f64 = 0.0;
            for s in 0..2 {
                scale = scale.max(val[s][d].to_f64().abs() + der[s][d].to_f64().abs());
                r1 = r1.max(c[s][n][d].to_f64().abs());
                r2 = r2.max(c[s][n - 1][d].to_f64().abs());
            }
            if scale == 0.0 {
                scale = 1.0;
            }
            let budget = tol * scale / n as f64;
            if r1 > 0.0 {
                h = h.min((budget / r1).powf(1.0 / n as f64));
            }
            if r2 > 0.0 {
                h = h.min((budget / r2).powf(1.0 / (n - 1) as f64));
            }
        }
        h *= 0.9;
        if !h.is_finite() {
            h = opts.x_end - x0;
        }
        if h < 1e-12 {
            return Err(HillError::Integration {
                x: x0,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        let last = x0 + h >= opts.x_end;
        if last {
            h = opts.x_end - x0;
        }
        let h_t = if last {
            T::from_f64(opts.x_end) - x0_t.clone()
        } else {
            T::from_f64(h)
        };

        // dense output inside the step
        while out_idx < opts.outputs.len() && (opts.outputs[out_idx] <= x0 + h || last) {
            let xo = opts.outputs[out_idx].min(opts.x_end);
            let tau = T::from_f64(xo) - x0_t.clone();
            let mut row: [T; 4] = zeros();
            for s in 0..2 {
                let (y, dy) = horner(&c[s], &tau, 0);
                row[2 * s] = y;
                row[2 * s + 1] = dy;
            }
            samples.push(row);
            out_idx += 1;
        }

        if opts.gram {
            let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
            for (g, (p, q)) in pairs.iter().enumerate() {
                // int_0^h of the product series, highest power first
                let mut acc = T::zero();
                for m in (0..=2 * n).rev() {
                    let lo = m.saturating_sub(n);
                    let hi = m.min(n);
                    let mut conv = T::zero();
                    for i in lo..=hi {
                        conv.mul_add_assign(&c[*p][i][0], &c[*q][m - i][0]);
                    }
                    acc = acc * h_t.clone() + conv / T::from_f64((m + 1) as f64);
                }
                gram[g] = gram[g].clone() + acc * h_t.clone();
            }
        }

        for s in 0..2 {
            for d in 0..depth {
                let (y, dy) = horner(&c[s], &h_t, d);
                val[s][d] = y;
                der[s][d] = dy;
            }
        }
        x0_t = if last { T::from_f64(opts.x_end) } else { x0_t + h_t };
        x0 = if last { opts.x_end } else { x0 + h };
        steps += 1;
        if steps > 200_000 {
            return Err(HillError::Integration {
                x: x0,
                reason: "step budget exhausted".into(),
            });
        }
    }

    Ok(Flow {
        end: Monodromy {
            energy: energy.clone(),
            theta: val[0].clone(),
            theta_p: der[0].clone(),
            phi: val[1].clone(),
            phi_p: der[1].clone(),
            depth,
        },
        gram,
        samples,
        steps,
    })
}

/// Value and derivative of the series for jet component `d` at `tau`.
fn horner<T: Real>(c: &[[T; JETS]], tau: &T, d: usize) -> (T, T) {
    let n = c.len() - 1;
    let mut y = c[n][d].clone();
    let mut dy = T::zero();
    for j in (0..n).rev() {
        dy = dy * tau.clone() + y.clone();
        y = y * tau.clone() + c[j][d].clone();
    }
    (y, dy)
}

/// Converts energy Taylor coefficients `[f, f_E, f_EE/2, f_EEE/6]` at
/// `E = w^2` into `[f, f_w, f_ww, f_www]`.
pub(crate) fn energy_jet_to_w<T: Real>(jet: &[T; JETS], w: &T) -> [T; 4] {
    let fe = jet[1].clone();
    let fee = jet[2].clone() * T::from_f64(2.0);
    let feee = jet[3].clone() * T::from_f64(6.0);
    let w2 = w.clone() * w.clone();
    let two = T::from_f64(2.0);
    [
        jet[0].clone(),
        two.clone() * w.clone() * fe.clone(),
        two * fe + T::from_f64(4.0) * w2.clone() * fee.clone(),
        T::from_f64(12.0) * w.clone() * fee + T::from_f64(8.0) * w2 * w.clone() * feee,
    ]
}

impl<T: Real> Monodromy<T> {
    /// Jets of `D`.
    pub fn d_jet(&self) -> [T; JETS] {
        let half = T::from_f64(0.5);
        std::array::from_fn(|i| (self.theta[i].clone() + self.phi_p[i].clone()) * half.clone())
    }

    /// Jets of `1 - sigma D`, computed as `det(M - sigma I) / 2`.
    ///
    /// Near a narrow gap the entries of `M - sigma I` are small, so the product
    /// form keeps relative accuracy where `1 - sigma D` itself would cancel.
    pub fn gap_jet(&self, sigma: i32) -> [T; JETS] {
        let s = T::from_f64(sigma as f64);
        let mut a = self.theta.clone();
        let mut d = self.phi_p.clone();
        a[0] = a[0].clone() - s.clone();
        d[0] = d[0].clone() - s.clone();
        let ad = jet_mul(&a, &d, self.depth);
        let bc = jet_mul(&self.theta_p, &self.phi, self.depth);
        // det(M - sI) = det M - s tr M + 1 = 2 - 2 s D since det M = 1
        let half = T::from_f64(0.5);
        std::array::from_fn(|i| (ad[i].clone() - bc[i].clone()) * half.clone())
    }

    /// `sin^2 k = 1 - D^2 = (1 - D)(1 + D)` in product form.
    pub fn sin2(&self) -> T {
        self.gap_jet(1)[0].clone() * self.gap_jet(-1)[0].clone()
    }
}

/// Monodromy with `depth` energy jets at energy `e`.
pub fn monodromy_at_energy<T: Real>(pot: &PeriodicPotential, e: &T, depth: usize) -> Result<Monodromy<T>> {
    Ok(flow(
        pot,
        e,
        FlowOptions {
            depth,
            ..Default::default()
        },
    )?
    .end)
}

/// Monodromy at `E = w^2`.
pub fn monodromy<T: Real>(pot: &PeriodicPotential, w: &T, depth: usize) -> Result<Monodromy<T>> {
    monodromy_at_energy(pot, &(w.clone() * w.clone()), depth)
}

/// Fundamental pair with its trace on a grid.
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    pub w: f64,
    pub theta1: f64,
    pub theta1_p: f64,
    pub phi1: f64,
    pub phi1_p: f64,
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_p: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_p: Vec<f64>,
    /// `int_0^1 theta^2`, `int_0^1 theta phi`, `int_0^1 phi^2`.
    pub gram: [f64; 3],
}

impl FundamentalPair {
    /// Wronskian `theta phi' - theta' phi` at `x = 1`.
    pub fn wronskian(&self) -> f64 {
        self.theta1 * self.phi1_p - self.theta1_p * self.phi1
    }

    pub fn discriminant(&self) -> f64 {
        0.5 * (self.theta1 + self.phi1_p)
    }
}

/// `theta`, `phi` and derivatives at `E = w^2` on `x_grid` (any `x >= 0`).
pub fn fundamental_pair(
    pot: &PeriodicPotential,
    w: f64,
    x_grid: &[f64],
    tol: Option<f64>,
) -> Result<FundamentalPair> {
    if !w.is_finite() {
        return Err(HillError::InvalidArgument(format!("w = {w}")));
    }
    let mut order: Vec<usize> = (0..x_grid.len()).collect();
    for &x in x_grid {
        if !(x.is_finite() && x >= 0.0) {
            return Err(HillError::InvalidArgument(format!("grid point {x}")));
        }
    }
    order.sort_by(|&a, &b| x_grid[a].partial_cmp(&x_grid[b]).unwrap());
    let mut outs: Vec<f64> = order.iter().map(|&i| x_grid[i]).collect();
    let x_max = outs.last().copied().unwrap_or(0.0);
    // include x = 1 so the monodromy is available when the grid extends further
    let one_pos = outs.partition_point(|&x| x < 1.0);
    outs.insert(one_pos, 1.0);
    let fl = flow::<f64>(
        pot,
        &(w * w),
        FlowOptions {
            x_end: x_max.max(1.0),
            outputs: &outs,
            gram: x_max <= 1.0,
            depth: 1,
            tol,
        },
    )?;
    let gram = if x_max <= 1.0 {
        fl.gram
    } else {
        flow::<f64>(
            pot,
            &(w * w),
            FlowOptions {
                gram: true,
                tol,
                ..Default::default()
            },
        )?
        .gram
    };
    let at_one = fl.samples[one_pos];
    let mut rows = fl.samples;
    rows.remove(one_pos);
    let m = x_grid.len();
    let mut fp = FundamentalPair {
        w,
        theta1: at_one[0],
        theta1_p: at_one[1],
        phi1: at_one[2],
        phi1_p: at_one[3],
        x: x_grid.to_vec(),
        theta: vec![0.0; m],
        theta_p: vec![0.0; m],
        phi: vec![0.0; m],
        phi_p: vec![0.0; m],
        gram,
    };
    for (r, &i) in rows.iter().zip(&order) {
        fp.theta[i] = r[0];
        fp.theta_p[i] = r[1];
        fp.phi[i] = r[2];
        fp.phi_p[i] = r[3];
    }
    Ok(fp)
}

/// Discriminant value and its first two `w`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminantValue {
    pub w: f64,
    pub d: f64,
    pub d_prime: f64,
    pub d_second: f64,
    pub d_third: f64,
}

pub fn discriminant(pot: &PeriodicPotential, w: f64) -> Result<DiscriminantValue> {
    if !w.is_finite() {
        return Err(HillError::InvalidArgument(format!("w = {w}")));
    }
    let m = monodromy::<f64>(pot, &w, JETS)?;
    let dw = energy_jet_to_w(&m.d_jet(), &w);
    Ok(DiscriminantValue {
        w,
        d: dw[0],
        d_prime: dw[1],
        d_second: dw[2],
        d_third: dw[3],
    })
}

/// Partial sums of the iterated-integral expansion of `theta` and `phi`.
#[derive(Debug, Clone)]
pub struct PicardExpansion {
    pub x: f64,
    pub k: f64,
    pub energy: f64,
    pub n_terms: usize,
    /// `sum_{j < n_terms} theta_j(x)`.
    pub theta: f64,
    pub phi: f64,
    /// Individual terms `theta_j(x)`, `phi_j(x)`.
    pub theta_terms: Vec<f64>,
    pub phi_terms: Vec<f64>,
    /// Bound on `|theta - partial sum|`.
    pub theta_bound: f64,
    /// Bound on `|phi - partial sum|`.
    pub phi_bound: f64,
}

/// Iterates `y_{j+1}(x) = (1/k) int_0^x sin(k(x-s)) [P(s) + k^2 - E] y_j(s) ds`
/// from `theta_0 = cos kx`, `phi_0 = sin(kx)/k`.
pub fn picard_series(
    pot: &PeriodicPotential,
    k: f64,
    energy: f64,
    n_terms: usize,
    x: f64,
) -> Result<PicardExpansion> {
    if !(k.is_finite() && k > 0.0) {
        return Err(HillError::InvalidArgument(format!("k = {k} must be positive")));
    }
    if !(x.is_finite() && x >= 0.0) || !energy.is_finite() || n_terms == 0 {
        return Err(HillError::InvalidArgument("x >= 0, finite E and n_terms >= 1 required".into()));
    }
    let nodes = ((1.5 * k * x) as usize + 48).min(600);
    let grid = LobattoGrid::new(nodes, x.max(1e-300));
    let v: Vec<f64> = grid.x.iter().map(|&s| pot.eval(s) + k * k - energy).collect();
    let (sk, ck): (Vec<f64>, Vec<f64>) = grid.x.iter().map(|&s| (k * s).sin_cos()).unzip();
    let mut theta_j: Vec<f64> = ck.clone();
    let mut phi_j: Vec<f64> = sk.iter().map(|s| s / k).collect();
    let last = grid.x.len() - 1;
    let mut theta_terms = vec![theta_j[last]];
    let mut phi_terms = vec![phi_j[last]];
    let next = |y: &[f64]| -> Vec<f64> {
        let fc: Vec<f64> = (0..y.len()).map(|i| ck[i] * v[i] * y[i]).collect();
        let fs: Vec<f64> = (0..y.len()).map(|i| sk[i] * v[i] * y[i]).collect();
        let ic = grid.cumulative(&fc);
        let is = grid.cumulative(&fs);
        (0..y.len()).map(|i| (sk[i] * ic[i] - ck[i] * is[i]) / k).collect()
    };
    for _ in 1..n_terms {
        theta_j = next(&theta_j);
        phi_j = next(&phi_j);
        theta_terms.push(theta_j[last]);
        phi_terms.push(phi_j[last]);
    }
    let b = pot.sup_bound() + (k * k - energy).abs();
    let z = x * b / k;
    // sum_{i >= n-1} z^i / i!
    let mut head = 0.0;
    let mut term = 1.0;
    for i in 0..n_terms.saturating_sub(1) {
        head += term;
        term *= z / (i + 1) as f64;
    }
    let tail = (z.exp() - head).max(term);
    let theta_bound = if n_terms == 1 { z.exp() / k } else { tail / k };
    let phi_bound = theta_bound / k;
    Ok(PicardExpansion {
        x,
        k,
        energy,
        n_terms,
        theta: theta_terms.iter().sum(),
        phi: phi_terms.iter().sum(),
        theta_terms,
        phi_terms,
        theta_bound,
        phi_bound,
    })
}

/// Free-case fundamental pair, used by tests and as an oracle.
pub fn free_pair(w: f64, x: f64) -> [f64; 4] {
    if w.abs() < 1e-300 {
        return [1.0, 0.0, x, 1.0];
    }
    let (s, c) = (w * x).sin_cos();
    [c, -w * s, s / w, c]
}
