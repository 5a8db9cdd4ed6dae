//! Quadrature and interpolation helpers.

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
#[derive(Debug, Clone)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Cached rule of the given order.
pub fn gl_rule(n: usize) -> Arc<GlRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
            let mut pairs: Vec<(f64, f64)> = rule.into_node_weight_pairs().into_vec();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Arc::new(GlRule {
                nodes: pairs.iter().map(|p| p.0).collect(),
                weights: pairs.iter().map(|p| p.1).collect(),
            })
        })
        .clone()
}

impl GlRule {
    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + h * x, h * w))
    }

    pub fn integrate<V: Value>(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> V) -> V {
        let mut acc = V::zero();
        for (x, w) in self.mapped(a, b) {
            acc = acc + f(x) * w;
        }
        acc
    }
}

/// Values that can be integrated: reals and complex numbers.
pub trait Value: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn mag(&self) -> f64;
}

impl Value for f64 {
    fn zero() -> Self {
        0.0
    }
    fn mag(&self) -> f64 {
        self.abs()
    }
}

impl Value for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn mag(&self) -> f64 {
        self.norm()
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<V> {
    pub value: V,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Globally adaptive Gauss-Legendre quadrature: the panel with the largest
/// error estimate (one panel against its two halves) is split until the total
/// error meets the tolerance, no panel can be split below `max_depth` levels,
/// or the panel budget is spent. Noisy integrands therefore cost a bounded
/// number of evaluations.
pub fn adaptive<V: Value>(
    f: &mut impl FnMut(f64) -> V,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: usize,
) -> Integral<V> {
    const MAX_PANELS: usize = 2000;
    let rule = gl_rule(15);
    let whole = rule.integrate(a, b, &mut *f);
    let mut evals = rule.nodes.len();
    let mut panel = |lo: f64, hi: f64, whole: V, depth: usize, evals: &mut usize| -> Panel<V> {
        let m = 0.5 * (lo + hi);
        let left = rule.integrate(lo, m, &mut *f);
        let right = rule.integrate(m, hi, &mut *f);
        *evals += 2 * rule.nodes.len();
        let value = left + right;
        let err = (value - whole).mag();
        // differences at the rounding level of the halves cannot be reduced
        let floor = 64.0 * f64::EPSILON * (left.mag() + right.mag());
        let splittable = depth < max_depth && (hi - lo) > 8.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1e-300);
        Panel {
            lo,
            hi,
            left,
            right,
            value,
            err: if err <= floor { 0.0 } else { err },
            depth,
            splittable,
        }
    };
    let mut heap = BinaryHeap::new();
    heap.push(panel(a, b, whole, 0, &mut evals));
    let mut done: Vec<Panel<V>> = Vec::new();
    loop {
        let total = heap.iter().chain(&done).fold(V::zero(), |acc, p| acc + p.value);
        let err: f64 = heap.iter().chain(&done).map(|p| p.err).sum();
        let tol = abs_tol.max(rel_tol * total.mag());
        let worst = heap.pop();
        let stop = err <= tol || heap.len() + done.len() >= MAX_PANELS;
        match worst {
            Some(p) if !stop && p.err > 0.0 && p.splittable => {
                let m = 0.5 * (p.lo + p.hi);
                heap.push(panel(p.lo, m, p.left, p.depth + 1, &mut evals));
                heap.push(panel(m, p.hi, p.right, p.depth + 1, &mut evals));
            }
            Some(p) if !stop => done.push(p),
            Some(p) => {
                heap.push(p);
                return Integral {
                    value: total,
                    error: err,
                    converged: err <= tol,
                    evaluations: evals,
                };
            }
            None => {
                return Integral {
                    value: total,
                    error: err,
                    converged: err <= tol,
                    evaluations: evals,
                };
            }
        }
    }
}

struct Panel<V> {
    lo: f64,
    hi: f64,
    left: V,
    right: V,
    value: V,
    err: f64,
    depth: usize,
    splittable: bool,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl<V> Eq for Panel<V> {}

impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Chebyshev points of the first kind on `[a, b]`, ascending.
pub fn cheb_points(n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let t = -((2 * j + 1) as f64 * PI / (2 * n) as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * t
        })
        .collect()
}

/// Barycentric interpolant through Chebyshev points of the first kind.
#[derive(Debug, Clone)]
pub struct ChebPanel<V> {
    pub a: f64,
    pub b: f64,
    pub x: Vec<f64>,
    pub v: Vec<V>,
    weights: Vec<f64>,
}

impl<V: Value> ChebPanel<V> {
    pub fn new(a: f64, b: f64, x: Vec<f64>, v: Vec<V>) -> Self {
        let n = x.len();
        // ascending order reverses the classical sign pattern consistently
        let weights = (0..n)
            .map(|j| {
                let s = ((2 * j + 1) as f64 * PI / (2 * n) as f64).sin();
                if j % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect();
        ChebPanel { a, b, x, v, weights }
    }

    pub fn eval(&self, t: f64) -> V {
        let mut num = V::zero();
        let mut den = 0.0;
        for j in 0..self.x.len() {
            let d = t - self.x[j];
            if d == 0.0 {
                return self.v[j];
            }
            let c = self.weights[j] / d;
            num = num + self.v[j] * c;
            den += c;
        }
        num * (1.0 / den)
    }
}

/// Values at Chebyshev-Lobatto points of `[0, len]` together with the
/// spectral cumulative integration operator on those points.
#[derive(Debug, Clone)]
pub struct LobattoGrid {
    pub len: f64,
    /// Nodes ascending from 0 to `len`.
    pub x: Vec<f64>,
    n: usize,
}

impl LobattoGrid {
    pub fn new(n: usize, len: f64) -> Self {
        let x = (0..=n)
            .map(|j| 0.5 * len * (1.0 - (j as f64 * PI / n as f64).cos()))
            .collect();
        LobattoGrid { len, x, n }
    }

    /// `F(x_i) = int_0^{x_i} f` from the values of `f` at the nodes.
    pub fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        // nodes in t = -cos(j pi / n) ordering; coefficients of f in T_k(t)
        let mut c = vec![0.0; n + 1];
        for (k, ck) in c.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, fj) in f.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                // T_k(-cos a) = (-1)^k cos(k a)
                s += w * fj * ((k * j) as f64 * PI / n as f64).cos();
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *ck = sign * 2.0 * s / n as f64;
        }
        c[0] *= 0.5;
        c[n] *= 0.5;
        // integrate the series: int T_k = T_{k+1}/(2(k+1)) - T_{k-1}/(2(k-1))
        let mut ic = vec![0.0; n + 2];
        for k in 0..=n {
            match k {
                0 => {
                    ic[1] += c[0];
                }
                1 => {
                    ic[2] += c[1] / 4.0;
                }
                _ => {
                    ic[k + 1] += c[k] / (2.0 * (k + 1) as f64);
                    ic[k - 1] -= c[k] / (2.0 * (k - 1) as f64);
                }
            }
        }
        let half = 0.5 * self.len;
        let eval = |t: f64| -> f64 {
            // Clenshaw
            let (mut b1, mut b2) = (0.0, 0.0);
            for k in (1..ic.len()).rev() {
                let b0 = 2.0 * t * b1 - b2 + ic[k];
                b2 = b1;
                b1 = b0;
            }
            t * b1 - b2 + ic[0]
        };
        let base = eval(-1.0);
        (0..=n)
            .map(|j| {
                let t = -(j as f64 * PI / n as f64).cos();
                half * (eval(t) - base)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials() {
        let r = gl_rule(10);
        let v = r.integrate(0.0, 2.0, |x: f64| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let mut f = |x: f64| x.sqrt();
        let r = adaptive(&mut f, 0.0, 1.0, 1e-13, 1e-13, 60);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-12, "{}", r.value);
        assert!(r.converged);
    }

    #[test]
    fn cheb_panel_interpolates() {
        let x = cheb_points(20, 1.0, 2.0);
        let v: Vec<f64> = x.iter().map(|t| t.exp()).collect();
        let p = ChebPanel::new(1.0, 2.0, x, v);
        for t in [1.0, 1.13, 1.5, 1.999, 2.0] {
            assert!((p.eval(t) - f64::exp(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn lobatto_cumulative() {
        let g = LobattoGrid::new(40, 2.5);
        let f: Vec<f64> = g.x.iter().map(|x| (3.0 * x).cos()).collect();
        let cum = g.cumulative(&f);
        for (x, c) in g.x.iter().zip(&cum) {
            assert!((c - (3.0 * x).sin() / 3.0).abs() < 1e-13);
        }
    }
}
