//! Scalar abstraction shared by the double and extended precision paths.
//!
//! The Floquet integrator, the band-edge search and the quasimomentum chart
//! are written once against [`Real`]. `f64` is the working type everywhere;
//! [`Mp`] (a 128-bit binary float) is used where spectral gaps are far below
//! double resolution, e.g. the higher Mathieu gaps.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, RoundingMode};

/// Arithmetic needed by the generic numerical core.
pub trait Real:
    Clone
    + fmt::Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn asin(&self) -> Self;
    /// `ln(1 + self)`.
    fn ln_1p(&self) -> Self;
    fn pi() -> Self;
    /// Unit roundoff of the type.
    fn epsilon() -> f64;
    /// Default truncation tolerance for the Taylor integrator.
    fn ode_tol() -> f64;
    /// Default Taylor order for the integrator.
    fn taylor_order() -> usize;
    /// Gap length below which a gap is reported as empty.
    fn empty_gap_tol() -> f64;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    /// `self += a * b`.
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        *self = self.clone() + a.clone() * b.clone();
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn from_i64(n: i64) -> Self {
        Self::from_f64(n as f64)
    }
    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }
    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }
    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self.clone();
        }
        acc
    }
    /// `acosh(1 + self)` for `self >= 0`, accurate for tiny arguments.
    fn acosh_1p(&self) -> Self {
        let x = self.clone();
        let two = Self::from_f64(2.0);
        let s = (x.clone() * (x.clone() + two)).sqrt();
        (x + s).ln_1p()
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn asin(&self) -> Self {
        f64::asin(*self)
    }
    fn ln_1p(&self) -> Self {
        f64::ln_1p(*self)
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn epsilon() -> f64 {
        f64::EPSILON
    }
    fn ode_tol() -> f64 {
        1e-16
    }
    fn taylor_order() -> usize {
        28
    }
    fn empty_gap_tol() -> f64 {
        1e-12
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
}

/// Working precision of [`Mp`] in bits.
pub const MP_BITS: usize = 128;
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constants cache"));
}

fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// 128-bit binary floating point number.
#[derive(Clone)]
pub struct Mp(BigFloat);

impl Mp {
    pub fn inner(&self) -> &BigFloat {
        &self.0
    }

    fn wrap(b: BigFloat) -> Self {
        debug_assert!(!b.is_nan(), "extended precision NaN");
        Mp(b)
    }
}

impl fmt::Debug for Mp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Mp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl PartialEq for Mp {
    fn eq(&self, other: &Self) -> bool {
        self.0.cmp(&other.0) == Some(0)
    }
}

impl PartialOrd for Mp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.cmp(&other.0).map(|c| c.cmp(&0))
    }
}

impl Add for Mp {
    type Output = Mp;
    fn add(self, rhs: Mp) -> Mp {
        Mp::wrap(self.0.add(&rhs.0, MP_BITS, RM))
    }
}

impl Sub for Mp {
    type Output = Mp;
    fn sub(self, rhs: Mp) -> Mp {
        Mp::wrap(self.0.sub(&rhs.0, MP_BITS, RM))
    }
}

impl Mul for Mp {
    type Output = Mp;
    fn mul(self, rhs: Mp) -> Mp {
        Mp::wrap(self.0.mul(&rhs.0, MP_BITS, RM))
    }
}

impl Div for Mp {
    type Output = Mp;
    fn div(self, rhs: Mp) -> Mp {
        Mp::wrap(self.0.div(&rhs.0, MP_BITS, RM))
    }
}

impl Neg for Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        Mp(self.0.neg())
    }
}

impl Real for Mp {
    fn from_f64(x: f64) -> Self {
        Mp(BigFloat::from_f64(x, MP_BITS))
    }

    fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        let Some((words, _, sign, exp, _)) = self.0.as_raw_parts() else {
            return f64::NAN;
        };
        // value = 0.m * 2^exp with the most significant word last
        let n = words.len();
        let hi = words[n - 1] as f64;
        let lo = if n > 1 { words[n - 2] as f64 } else { 0.0 };
        let frac = (hi + lo * 2f64.powi(-64)) * 2f64.powi(-64);
        let mut v = frac;
        let mut e = exp;
        while e > 1000 {
            v *= 2f64.powi(1000);
            e -= 1000;
        }
        while e < -1000 {
            v *= 2f64.powi(-1000);
            e += 1000;
        }
        v *= 2f64.powi(e);
        if sign.is_negative() {
            -v
        } else {
            v
        }
    }

    fn sqrt(&self) -> Self {
        Mp::wrap(self.0.sqrt(MP_BITS, RM))
    }

    fn sin(&self) -> Self {
        with_consts(|c| Mp::wrap(self.0.sin(MP_BITS, RM, c)))
    }

    fn cos(&self) -> Self {
        with_consts(|c| Mp::wrap(self.0.cos(MP_BITS, RM, c)))
    }

    fn asin(&self) -> Self {
        with_consts(|c| Mp::wrap(self.0.asin(MP_BITS, RM, c)))
    }

    fn ln_1p(&self) -> Self {
        let y = self.0.add(&BigFloat::from_f64(1.0, MP_BITS), MP_BITS, RM);
        with_consts(|c| Mp::wrap(y.ln(MP_BITS, RM, c)))
    }

    fn pi() -> Self {
        with_consts(|c| Mp(c.pi(MP_BITS, RM)))
    }

    fn epsilon() -> f64 {
        2f64.powi(-(MP_BITS as i32) + 1)
    }

    fn ode_tol() -> f64 {
        1e-38
    }

    fn taylor_order() -> usize {
        50
    }

    fn empty_gap_tol() -> f64 {
        1e-30
    }

    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        let p = a.0.mul(&b.0, MP_BITS, RM);
        self.0 = self.0.add(&p, MP_BITS, RM);
    }
}
