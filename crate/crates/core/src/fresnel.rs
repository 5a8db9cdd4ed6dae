//! Complete and incomplete Fresnel-type integrals with quadratic phase.

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64;
use std::f64::consts::PI;

/// `int_z^inf e^{iu^2} du` for real `z`.
pub fn fresnel_tail(z: f64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, -PI / 4.0);
    0.5 * PI.sqrt() * rot.conj() * (rot * z).erfc()
}

/// `int_{k0}^inf e^{i(a k^2 - d k)} dk` for `a > 0`.
pub fn quadratic_phase_tail(a: f64, d: f64, k0: f64) -> Complex64 {
    let c = d / (2.0 * a);
    Complex64::from_polar(1.0, -d * d / (4.0 * a)) * fresnel_tail(a.sqrt() * (k0 - c)) / a.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gl_rule;

    #[test]
    fn complete_integral() {
        // int_R e^{iu^2} = sqrt(pi) e^{i pi / 4}
        let exact = Complex64::from_polar(PI.sqrt(), PI / 4.0);
        for z in [0.3, 2.0, 7.5, 40.0] {
            let full = fresnel_tail(-z) + fresnel_tail(z);
            assert!((full - exact).norm() < 1e-13, "{z}: {full}");
        }
        assert!((fresnel_tail(0.0) - exact / 2.0).norm() < 1e-14);
    }

    #[test]
    fn matches_direct_quadrature() {
        let (a, d, k0) = (1.3, 2.1, 0.4);
        // finite part by quadrature, remainder beyond 40 by the tail itself
        let rule = gl_rule(40);
        let mut direct = Complex64::new(0.0, 0.0);
        let n = 4000;
        let h = (40.0 - k0) / n as f64;
        for i in 0..n {
            let lo = k0 + i as f64 * h;
            direct += rule.integrate(lo, lo + h, |k| Complex64::from_polar(1.0, a * k * k - d * k));
        }
        direct += quadratic_phase_tail(a, d, 40.0);
        assert!((direct - quadratic_phase_tail(a, d, k0)).norm() < 1e-10);
        // the remainder itself decays like 1 / (2 a k0 - d)
        let far = quadratic_phase_tail(a, d, 40.0).norm();
        assert!(far < 1.0 / (2.0 * a * 40.0 - d));
    }
}
