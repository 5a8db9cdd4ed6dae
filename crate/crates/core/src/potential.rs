//! Period-one potentials given by finite Fourier series.
//!
//! `P(x) = sum_l a_l cos(2 pi l x) + b_l sin(2 pi l x) - shift`, with the
//! shift recorded separately so that the spectrum can be moved to start at
//! zero without touching the user's coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HillError, Result};
use crate::real::Real;

/// Trigonometric polynomial of period one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPotential {
    /// `a_0 .. a_L`.
    pub cosine: Vec<f64>,
    /// `b_0 .. b_L`; the `l = 0` entry multiplies `sin 0` and is ignored.
    #[serde(default)]
    pub sine: Vec<f64>,
    /// Constant subtracted from the series.
    #[serde(default)]
    pub shift: f64,
}

impl PeriodicPotential {
    pub fn from_fourier(cosine: Vec<f64>, sine: Vec<f64>) -> Result<Self> {
        let p = PeriodicPotential {
            cosine,
            sine,
            shift: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// `P(x) = 2 cos(2 pi x)`, the Mathieu potential.
    pub fn mathieu(amplitude: f64) -> Self {
        PeriodicPotential {
            cosine: vec![0.0, amplitude],
            sine: vec![],
            shift: 0.0,
        }
    }

    pub fn zero() -> Self {
        PeriodicPotential {
            cosine: vec![0.0],
            sine: vec![],
            shift: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        PeriodicPotential {
            cosine: vec![c],
            sine: vec![],
            shift: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.cosine.iter().enumerate() {
            if !a.is_finite() {
                return Err(HillError::InvalidCoefficient(format!("cosine[{i}] = {a}")));
            }
        }
        for (i, b) in self.sine.iter().enumerate() {
            if !b.is_finite() {
                return Err(HillError::InvalidCoefficient(format!("sine[{i}] = {b}")));
            }
        }
        if !self.shift.is_finite() {
            return Err(HillError::InvalidCoefficient(format!("shift = {}", self.shift)));
        }
        Ok(())
    }

    /// Same series with a different shift.
    pub fn with_shift(&self, shift: f64) -> Self {
        PeriodicPotential {
            shift,
            ..self.clone()
        }
    }

    /// Highest harmonic present.
    pub fn degree(&self) -> usize {
        self.cosine.len().max(self.sine.len()).saturating_sub(1)
    }

    pub(crate) fn a(&self, l: usize) -> f64 {
        self.cosine.get(l).copied().unwrap_or(0.0)
    }

    pub(crate) fn b(&self, l: usize) -> f64 {
        if l == 0 {
            0.0
        } else {
            self.sine.get(l).copied().unwrap_or(0.0)
        }
    }

    /// Mean value including the shift.
    pub fn mean(&self) -> f64 {
        self.a(0) - self.shift
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.mean();
        for l in 1..=self.degree() {
            let (s, c) = (2.0 * PI * l as f64 * x).sin_cos();
            v += self.a(l) * c + self.b(l) * s;
        }
        v
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for l in 1..=self.degree() {
            let om = 2.0 * PI * l as f64;
            let (s, c) = (om * x).sin_cos();
            v += om * (-self.a(l) * s + self.b(l) * c);
        }
        v
    }

    /// Exponential Fourier coefficient: `P(x) = sum_l hat(l) e^{2 pi i l x}`.
    pub fn hat(&self, l: i64) -> Complex64 {
        if l == 0 {
            return Complex64::new(self.mean(), 0.0);
        }
        let m = l.unsigned_abs() as usize;
        let (a, b) = (self.a(m), self.b(m));
        if l > 0 {
            Complex64::new(a / 2.0, -b / 2.0)
        } else {
            Complex64::new(a / 2.0, b / 2.0)
        }
    }

    /// Rigorous bound on `sup |P|`.
    pub fn sup_bound(&self) -> f64 {
        let mut s = self.mean().abs();
        for l in 1..=self.degree() {
            s += self.a(l).abs() + self.b(l).abs();
        }
        s
    }

    /// `Q_0 = (1/2) int_0^1 P`.
    pub fn moment_q0(&self) -> f64 {
        0.5 * self.mean()
    }

    /// `Q_2 = (1/8) int_0^1 P^2`.
    pub fn moment_q2(&self) -> f64 {
        let mut sq = self.mean() * self.mean();
        for l in 1..=self.degree() {
            sq += 0.5 * (self.a(l).powi(2) + self.b(l).powi(2));
        }
        sq / 8.0
    }

    /// `int_0^x P(s) ds`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let mut v = self.mean() * x;
        for l in 1..=self.degree() {
            let om = 2.0 * PI * l as f64;
            let (s, c) = (om * x).sin_cos();
            v += self.a(l) * s / om + self.b(l) * (1.0 - c) / om;
        }
        v
    }

    /// Taylor coefficients `c_i = P^{(i)}(x0) / i!` for `i = 0..=order`,
    /// written into `out`; `extra` is added to the constant term.
    pub(crate) fn taylor_into<T: Real>(&self, x0: &T, extra: &T, out: &mut [T]) {
        for o in out.iter_mut() {
            *o = T::zero();
        }
        out[0] = T::from_f64(self.mean()) + extra.clone();
        let two_pi = T::pi() * T::from_f64(2.0);
        for l in 1..=self.degree() {
            let (a, b) = (self.a(l), self.b(l));
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let om = two_pi.clone() * T::from_f64(l as f64);
            let arg = om.clone() * x0.clone();
            let (c, s) = (arg.cos(), arg.sin());
            let ta = T::from_f64(a);
            let tb = T::from_f64(b);
            // derivative i of a cos + b sin is (a cos + b sin) rotated by i*pi/2
            let mut cc = ta.clone() * c.clone() + tb.clone() * s.clone();
            let mut ss = tb * c - ta * s;
            let mut scale = T::one();
            for (i, o) in out.iter_mut().enumerate() {
                if i > 0 {
                    scale = scale * om.clone() / T::from_f64(i as f64);
                    let next_c = ss.clone();
                    let next_s = -cc.clone();
                    cc = next_c;
                    ss = next_s;
                }
                *o = o.clone() + scale.clone() * cc.clone();
            }
        }
    }
}
