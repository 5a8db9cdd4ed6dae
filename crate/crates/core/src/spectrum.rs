//! Band edges, gaps and gap heights.
//!
//! The potential is first shifted so that the bottom of the spectrum sits at
//! `E = 0`; everything downstream works in `w = sqrt(E)`. Gap `n` is the
//! interval `(a_n^-, a_n^+)` on which `(-1)^n D(w) > 1`. Edges are bracketed
//! by Hill-matrix eigenvalues and refined on `G(w) = 1 - (-1)^n D(w)`, which
//! is evaluated as `det(M - (-1)^n I) / 2` so that narrow gaps keep their
//! relative accuracy. Each gap is handled by locating the minimum of `G`
//! (the unique critical point of `D` in the gap) and then the two roots on
//! either side of it.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{HillError, Result};
use crate::floquet::{energy_jet_to_w, monodromy, monodromy_at_energy, Monodromy};
use crate::hill::periodic_spectra;
use crate::potential::PeriodicPotential;
use crate::real::Real;

/// One spectral gap in `w`.
#[derive(Debug, Clone, Serialize)]
pub struct Gap<T: Real> {
    pub n: usize,
    /// `a_n^-`.
    #[serde(skip)]
    pub lower: T,
    /// `a_n^+`.
    #[serde(skip)]
    pub upper: T,
    /// Critical point of `D` inside the gap.
    #[serde(skip)]
    pub center: T,
    /// `a_n^+ - a_n^-` in double precision.
    pub length: f64,
    pub lower_f64: f64,
    pub upper_f64: f64,
    pub empty: bool,
    /// Index of the multiple of pi nearest to the gap.
    pub ell: i64,
    /// `max_gap arccosh |D|`.
    pub height: f64,
    /// `|1 - (-1)^n D|` at the reported edges.
    pub residual: f64,
}

/// Gaps `1..=n_max` of the shifted operator.
#[derive(Debug, Clone, Serialize)]
pub struct BandStructure<T: Real> {
    /// Potential including the spectral shift.
    pub potential: PeriodicPotential,
    /// Lowest periodic eigenvalue of the unshifted potential.
    pub e0: f64,
    /// `D(0) - 1` for the shifted potential.
    pub bottom_residual: f64,
    pub gaps: Vec<Gap<T>>,
}

/// Where a value of `w >= 0` sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Band(usize),
    Gap(usize),
    /// Beyond the last computed gap.
    Beyond,
}

/// Outcome of [`newton_bracketed`].
#[derive(Debug, Clone)]
pub(crate) struct Root<T> {
    pub x: T,
    #[allow(dead_code)]
    pub iterations: usize,
}

/// Safeguarded Newton iteration for `f(x) = 0` on `[lo, hi]`, where
/// `f(lo)` and `f(hi)` have opposite signs; `f` returns value and slope.
pub(crate) fn newton_bracketed<T: Real>(
    mut f: impl FnMut(&T) -> Result<(T, T)>,
    lo: T,
    hi: T,
    lo_positive: Option<bool>,
    x0: T,
    rel_tol: f64,
    max_iter: usize,
) -> Result<Root<T>> {
    let (mut lo, mut hi) = (lo, hi);
    let lo_positive = match lo_positive {
        Some(s) => s,
        None => !f(&lo)?.0.is_negative(),
    };
    let mut x = if x0 > lo && x0 < hi {
        x0
    } else {
        (lo.clone() + hi.clone()) * T::from_f64(0.5)
    };
    let half = T::from_f64(0.5);
    let mut prev_step = f64::INFINITY;
    for it in 0..max_iter {
        let (fx, dfx) = f(&x)?;
        if fx.to_f64() == 0.0 && fx == T::zero() {
            return Ok(Root { x, iterations: it });
        }
        if fx.is_negative() != lo_positive {
            // fx has the sign of f(lo)
            lo = x.clone();
        } else {
            hi = x.clone();
        }
        let scale = x.abs().to_f64().max(1e-300);
        let width = (hi.clone() - lo.clone()).to_f64();
        let noise = rel_tol.sqrt() * 1e-4 * scale;
        let mut next = None;
        if dfx.to_f64() != 0.0 {
            let cand = x.clone() - fx / dfx;
            if cand > lo && cand < hi {
                next = Some(cand);
            } else if (cand.clone() - x.clone()).abs().to_f64() <= noise {
                // the root sits on the bracket end to within rounding
                return Ok(Root { x, iterations: it + 1 });
            }
        }
        let newton = next.is_some();
        let next = next.unwrap_or_else(|| (lo.clone() + hi.clone()) * half.clone());
        let step = (next.clone() - x.clone()).abs().to_f64();
        x = next;
        if step <= rel_tol * scale || width <= rel_tol * scale {
            return Ok(Root { x, iterations: it + 1 });
        }
        // Newton steps that stop contracting near the tolerance are rounding noise
        if newton && step <= noise && step > 0.25 * prev_step {
            return Ok(Root { x, iterations: it + 1 });
        }
        prev_step = if newton { step } else { f64::INFINITY };
    }
    Ok(Root { x, iterations: max_iter })
}

/// `G = 1 - sigma D` and its first `w`-derivatives.
pub(crate) fn gap_function<T: Real>(m: &Monodromy<T>, sigma: i32, w: &T) -> [T; 4] {
    energy_jet_to_w(&m.gap_jet(sigma), w)
}

pub(crate) fn sigma_of(n: usize) -> i32 {
    if n % 2 == 0 {
        1
    } else {
        -1
    }
}

impl<T: Real> BandStructure<T> {
    /// Shift the potential and locate gaps `1..=n_max`.
    ///
    /// `tol` bounds `|1 - (-1)^n D|` at the edges; edges are iterated to the
    /// working precision of `T` in any case.
    pub fn compute(pot: &PeriodicPotential, n_max: usize, tol: Option<f64>) -> Result<Self> {
        pot.validate()?;
        if n_max == 0 {
            return Err(HillError::InvalidArgument("n_max must be at least 1".into()));
        }
        let tol = tol.unwrap_or(1e-12);
        let base = pot.with_shift(0.0);
        let half = (n_max as i64) + 12 + 2 * base.degree() as i64 + (base.sup_bound().sqrt() as i64);
        let (per, anti) = periodic_spectra(&base, half);

        let e0 = refine_bottom(&base, per[0])?;
        let shifted = base.with_shift(e0);
        let bottom = monodromy::<f64>(&shifted, &0.0, 1)?;
        let bottom_residual = bottom.d_jet()[0] - 1.0;

        let to_w = |e: f64| (e - e0).max(0.0).sqrt();
        let mut gaps = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let (e_lo, e_hi) = if n % 2 == 1 {
                (anti[n - 1], anti[n])
            } else {
                (per[n - 1], per[n])
            };
            let gap = refine_gap::<T>(&shifted, n, to_w(e_lo), to_w(e_hi), tol)?;
            gaps.push(gap);
        }
        for win in gaps.windows(2) {
            if !(win[0].upper < win[1].lower) {
                return Err(HillError::Consistency(format!(
                    "band {} has non-positive length",
                    win[0].n
                )));
            }
        }
        Ok(BandStructure {
            potential: shifted,
            e0,
            bottom_residual,
            gaps,
        })
    }

    pub fn n_max(&self) -> usize {
        self.gaps.len()
    }

    /// Gap `n >= 1`.
    pub fn gap(&self, n: usize) -> &Gap<T> {
        &self.gaps[n - 1]
    }

    /// Bands with both edges known: `0 .. n_max`.
    pub fn n_bands(&self) -> usize {
        self.gaps.len()
    }

    /// `[a_n^+, a_{n+1}^-]`, with `a_0^+ = 0`.
    pub fn band(&self, n: usize) -> Result<(T, T)> {
        if n >= self.gaps.len() {
            return Err(HillError::InvalidArgument(format!(
                "band {n} needs gap {} but only {} gaps were computed",
                n + 1,
                self.gaps.len()
            )));
        }
        let lo = if n == 0 {
            T::zero()
        } else {
            self.gaps[n - 1].upper.clone()
        };
        Ok((lo, self.gaps[n].lower.clone()))
    }

    /// Length of gap `n`; zero for `n = 0` and for empty gaps.
    pub fn gap_length(&self, n: usize) -> f64 {
        if n == 0 || n > self.gaps.len() {
            0.0
        } else {
            self.gaps[n - 1].length
        }
    }

    pub fn locate(&self, w: &T) -> Location {
        if w.is_negative() {
            return Location::Beyond;
        }
        for g in &self.gaps {
            if *w <= g.lower {
                return Location::Band(g.n - 1);
            }
            if *w < g.upper {
                return Location::Gap(g.n);
            }
        }
        Location::Beyond
    }

    pub fn to_f64(&self) -> BandStructure<f64> {
        BandStructure {
            potential: self.potential.clone(),
            e0: self.e0,
            bottom_residual: self.bottom_residual,
            gaps: self
                .gaps
                .iter()
                .map(|g| Gap {
                    n: g.n,
                    lower: g.lower_f64,
                    upper: g.upper_f64,
                    center: g.center.to_f64(),
                    length: g.length,
                    lower_f64: g.lower_f64,
                    upper_f64: g.upper_f64,
                    empty: g.empty,
                    ell: g.ell,
                    height: g.height,
                    residual: g.residual,
                })
                .collect(),
        }
    }
}

/// Band edges of gaps `1..=n_max` in double precision.
pub fn band_edges(pot: &PeriodicPotential, n_max: usize, tol: Option<f64>) -> Result<BandStructure<f64>> {
    BandStructure::<f64>::compute(pot, n_max, tol)
}

/// Lowest periodic eigenvalue by Newton on `1 - D(E)` from the Hill estimate.
fn refine_bottom(base: &PeriodicPotential, guess: f64) -> Result<f64> {
    let f = |e: &f64| -> Result<(f64, f64)> {
        let m = monodromy_at_energy::<f64>(base, e, 2)?;
        let g = m.gap_jet(1);
        Ok((g[0], g[1]))
    };
    let mut delta = 1e-8 * (1.0 + guess.abs());
    let (mut lo, mut hi) = (guess - delta, guess + delta);
    for _ in 0..40 {
        let (flo, _) = f(&lo)?;
        let (fhi, _) = f(&hi)?;
        if flo < 0.0 && fhi > 0.0 {
            break;
        }
        delta *= 4.0;
        if flo >= 0.0 {
            lo = guess - delta;
        }
        if fhi <= 0.0 {
            hi = guess + delta;
        }
    }
    let r = newton_bracketed(f, lo, hi, Some(false), guess, 4.0 * f64::EPSILON, 200)?;
    Ok(r.x)
}

fn refine_gap<T: Real>(pot: &PeriodicPotential, n: usize, w_lo: f64, w_hi: f64, tol: f64) -> Result<Gap<T>> {
    let sigma = sigma_of(n);
    let eval = |w: &T, depth: usize| -> Result<[T; 4]> {
        let m = monodromy::<T>(pot, w, depth)?;
        Ok(gap_function(&m, sigma, w))
    };
    let rel = 8.0 * T::epsilon();

    // bracket the critical point: G' < 0 on band n-1, > 0 on band n
    let mut margin = (1e-7 * (w_hi - w_lo).max(1e-3)).max(1e-9);
    let (mut b_lo, mut b_hi);
    let mut tries = 0;
    loop {
        b_lo = T::from_f64((w_lo - margin).max(0.0));
        b_hi = T::from_f64(w_hi + margin);
        let gl = eval(&b_lo, 3)?;
        let gh = eval(&b_hi, 3)?;
        if gl[1].is_negative() && !gh[1].is_negative() {
            break;
        }
        tries += 1;
        margin *= 8.0;
        if tries > 12 || margin > 1.0 {
            return Err(HillError::Bracket {
                gap: n,
                detail: format!("no sign change of D' around [{w_lo}, {w_hi}]"),
            });
        }
    }
    let guess = T::from_f64(0.5 * (w_lo + w_hi));
    let crit = newton_bracketed(
        |w: &T| {
            let g = eval(w, 3)?;
            Ok((g[1].clone(), g[2].clone()))
        },
        b_lo.clone(),
        b_hi.clone(),
        Some(false),
        guess,
        rel,
        200,
    )?;
    let c = crit.x;
    let gc = eval(&c, 3)?;
    let g_min = gc[0].clone();
    let curv = gc[2].to_f64();
    let ell = (c.to_f64() / PI).round() as i64;
    let empty_tol = T::empty_gap_tol();
    let est_len = if g_min.is_negative() && curv > 0.0 {
        2.0 * (-2.0 * g_min.to_f64() / curv).sqrt()
    } else {
        0.0
    };
    if est_len < empty_tol {
        let cf = c.to_f64();
        return Ok(Gap {
            n,
            lower: c.clone(),
            upper: c.clone(),
            center: c,
            length: 0.0,
            lower_f64: cf,
            upper_f64: cf,
            empty: true,
            ell,
            height: 0.0,
            residual: g_min.abs().to_f64(),
        });
    }
    let height = (-g_min.clone()).acosh_1p().to_f64();

    let root = |side: f64| -> Result<T> {
        // outer point where G > 0, starting from the quadratic model
        let mut dist = T::from_f64(est_len);
        let mut outer;
        let mut k = 0;
        loop {
            outer = c.clone() + T::from_f64(side) * dist.clone();
            if outer.is_negative() {
                outer = T::zero();
            }
            let go = eval(&outer, 2)?;
            if !go[0].is_negative() {
                break;
            }
            dist = dist * T::from_f64(2.0);
            k += 1;
            if k > 60 {
                return Err(HillError::Bracket {
                    gap: n,
                    detail: "edge bracket expansion failed".into(),
                });
            }
        }
        let x0 = c.clone() + T::from_f64(side * 0.5 * est_len);
        let f = |w: &T| {
            let g = eval(w, 2)?;
            Ok((g[0].clone(), g[1].clone()))
        };
        let r = if side < 0.0 {
            newton_bracketed(f, outer, c.clone(), Some(true), x0, rel, 300)?
        } else {
            newton_bracketed(f, c.clone(), outer, Some(false), x0, rel, 300)?
        };
        Ok(r.x)
    };
    let lower = root(-1.0)?;
    let upper = root(1.0)?;
    let res_lo = eval(&lower, 1)?[0].abs().to_f64();
    let res_hi = eval(&upper, 1)?[0].abs().to_f64();
    let residual = res_lo.max(res_hi);
    if residual > tol {
        return Err(HillError::NoConvergence(format!(
            "gap {n}: edge residual {residual:e} exceeds {tol:e}"
        )));
    }
    let length = (upper.clone() - lower.clone()).to_f64();
    Ok(Gap {
        n,
        lower_f64: lower.to_f64(),
        upper_f64: upper.to_f64(),
        lower,
        upper,
        center: c,
        length,
        empty: false,
        ell,
        height,
        residual,
    })
}

/// `max_{u in g_n} arccosh |D(u)|` by golden-section search.
pub fn gap_height(bs: &BandStructure<f64>, n: usize) -> Result<f64> {
    if n == 0 || n > bs.n_max() {
        return Err(HillError::InvalidArgument(format!("gap {n} not computed")));
    }
    let g = bs.gap(n);
    if g.empty {
        return Ok(0.0);
    }
    let sigma = sigma_of(n);
    let q = |u: f64| -> Result<f64> {
        let m = monodromy::<f64>(&bs.potential, &u, 1)?;
        Ok((-m.gap_jet(sigma)[0]).max(0.0).acosh_1p())
    };
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (g.lower, g.upper);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = q(x1)?;
    let mut f2 = q(x2)?;
    for _ in 0..200 {
        if (b - a) <= 4.0 * f64::EPSILON * b.abs() {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = q(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = q(x1)?;
        }
    }
    Ok(f1.max(f2))
}
