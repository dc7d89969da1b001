//! Order-3 forward-mode automatic differentiation on scalars.
//!
//! A [`Jet3`] carries a function value together with its first three
//! derivatives with respect to a single input variable. Arithmetic and the
//! elementary functions propagate all four slots exactly (truncated Taylor
//! arithmetic), so a network evaluated on jets yields u, u', u'' and u'''
//! to floating-point rounding — no finite differences anywhere in the
//! evaluation path.

use crate::error::{Error, Result};

/// Value plus exact first, second, and third derivatives w.r.t. the input.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet3 {
    /// Function value f(x).
    pub v: f64,
    /// First derivative f'(x).
    pub d1: f64,
    /// Second derivative f''(x).
    pub d2: f64,
    /// Third derivative f'''(x).
    pub d3: f64,
}

/// Elementary functions with order-3 chain rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Tanh,
    Sin,
    Cos,
}

impl Jet3 {
    pub fn new(v: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Self { v, d1, d2, d3 }
    }

    /// Seed the input variable: (x, 1, 0, 0).
    pub fn lift(x: f64) -> Self {
        Self { v: x, d1: 1.0, d2: 0.0, d3: 0.0 }
    }

    /// Lift a constant: (c, 0, 0, 0).
    pub fn constant(c: f64) -> Self {
        Self { v: c, d1: 0.0, d2: 0.0, d3: 0.0 }
    }

    /// Multiply every slot by a scalar.
    pub fn scale(self, c: f64) -> Self {
        Self { v: c * self.v, d1: c * self.d1, d2: c * self.d2, d3: c * self.d3 }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d1.is_finite() && self.d2.is_finite() && self.d3.is_finite()
    }

    /// Apply an elementary function via Faa di Bruno to order 3:
    ///
    /// ```text
    /// out.v  = f(v)
    /// out.d1 = f'·d1
    /// out.d2 = f''·d1² + f'·d2
    /// out.d3 = f'''·d1³ + 3·f''·d1·d2 + f'·d3
    /// ```
    pub fn apply(self, f: UnaryFn) -> Self {
        let (f0, f1, f2, f3) = match f {
            // With t = tanh(v): f' = 1−t², f'' = −2t(1−t²), f''' = (6t²−2)(1−t²).
            UnaryFn::Tanh => {
                let t = self.v.tanh();
                let s = 1.0 - t * t;
                (t, s, -2.0 * t * s, (6.0 * t * t - 2.0) * s)
            }
            UnaryFn::Sin => {
                let (s, c) = self.v.sin_cos();
                (s, c, -s, -c)
            }
            UnaryFn::Cos => {
                let (s, c) = self.v.sin_cos();
                (c, -s, -c, s)
            }
        };
        let g1 = self.d1;
        let g2 = self.d2;
        let g3 = self.d3;
        Self {
            v: f0,
            d1: f1 * g1,
            d2: f2 * g1 * g1 + f1 * g2,
            d3: f3 * g1 * g1 * g1 + 3.0 * f2 * g1 * g2 + f1 * g3,
        }
    }

    pub fn tanh(self) -> Self {
        self.apply(UnaryFn::Tanh)
    }

    pub fn sin(self) -> Self {
        self.apply(UnaryFn::Sin)
    }

    pub fn cos(self) -> Self {
        self.apply(UnaryFn::Cos)
    }
}

impl std::ops::Add for Jet3 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            v: self.v + rhs.v,
            d1: self.d1 + rhs.d1,
            d2: self.d2 + rhs.d2,
            d3: self.d3 + rhs.d3,
        }
    }
}

impl std::ops::Sub for Jet3 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            v: self.v - rhs.v,
            d1: self.d1 - rhs.d1,
            d2: self.d2 - rhs.d2,
            d3: self.d3 - rhs.d3,
        }
    }
}

impl std::ops::Neg for Jet3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self { v: -self.v, d1: -self.d1, d2: -self.d2, d3: -self.d3 }
    }
}

impl std::ops::Mul for Jet3 {
    type Output = Self;
    /// Leibniz rule through order 3:
    /// d3 = a'''b + 3a''b' + 3a'b'' + ab'''.
    fn mul(self, rhs: Self) -> Self {
        Self {
            v: self.v * rhs.v,
            d1: self.d1 * rhs.v + self.v * rhs.d1,
            d2: self.d2 * rhs.v + 2.0 * self.d1 * rhs.d1 + self.v * rhs.d2,
            d3: self.d3 * rhs.v
                + 3.0 * self.d2 * rhs.d1
                + 3.0 * self.d1 * rhs.d2
                + self.v * rhs.d3,
        }
    }
}

impl std::ops::Mul<f64> for Jet3 {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.scale(c)
    }
}

/// Anything evaluable at a point together with its first three spatial
/// derivatives. Implemented by the network, the exact solution, and
/// perturbed fields, so losses and residuals accept any of them.
pub trait Differentiable1D {
    fn eval_jet(&self, x: f64) -> Jet3;

    /// Function value only.
    fn eval(&self, x: f64) -> f64 {
        self.eval_jet(x).v
    }
}

impl<T: Differentiable1D + ?Sized> Differentiable1D for &T {
    fn eval_jet(&self, x: f64) -> Jet3 {
        (**self).eval_jet(x)
    }
}

/// Wrap a closure as a field. Handy for analytic references in tests and
/// for composing fields without a dedicated type.
pub struct JetClosure<F: Fn(f64) -> Jet3>(pub F);

impl<F: Fn(f64) -> Jet3> Differentiable1D for JetClosure<F> {
    fn eval_jet(&self, x: f64) -> Jet3 {
        (self.0)(x)
    }
}

/// Validate that a jet produced by user-facing entry points is finite.
pub fn ensure_finite(jet: Jet3, what: &str) -> Result<Jet3> {
    if jet.is_finite() {
        Ok(jet)
    } else {
        Err(Error::NonFinite(format!("{what}: {jet:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn lift_seeds_the_variable() {
        assert_eq!(Jet3::lift(0.5), Jet3::new(0.5, 1.0, 0.0, 0.0));
        assert_eq!(Jet3::lift(0.0), Jet3::new(0.0, 1.0, 0.0, 0.0));
        assert_eq!(Jet3::lift(1.0), Jet3::new(1.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn constants_have_zero_derivatives() {
        assert_eq!(Jet3::constant(3.0), Jet3::new(3.0, 0.0, 0.0, 0.0));
        let sum = Jet3::constant(1.0) + Jet3::constant(2.0);
        assert_eq!(sum, Jet3::new(3.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn square_of_the_variable() {
        let x = Jet3::lift(3.0);
        assert_eq!(x * x, Jet3::new(9.0, 6.0, 2.0, 0.0));
    }

    #[test]
    fn cube_of_the_variable() {
        let x = Jet3::lift(2.0);
        assert_eq!(x * x * x, Jet3::new(8.0, 12.0, 12.0, 6.0));
    }

    #[test]
    fn tanh_at_zero() {
        let out = Jet3::lift(0.0).tanh();
        assert_eq!(out, Jet3::new(0.0, 1.0, 0.0, -2.0));
    }

    #[test]
    fn sin_at_zero() {
        let out = Jet3::lift(0.0).sin();
        assert_eq!(out, Jet3::new(0.0, 1.0, 0.0, -1.0));
    }

    // Finite-difference oracle on tanh and its derivative chain at x = 0.3.
    // Each order is checked against a central difference of the order below,
    // evaluated through f64::tanh only.
    #[test]
    fn tanh_jet_matches_finite_differences() {
        let x = 0.3;
        let out = Jet3::lift(x).tanh();
        let h = 1e-6;
        let f = |x: f64| x.tanh();
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let h3 = 1e-3;
        let d3 = (f(x + 2.0 * h3) - 2.0 * f(x + h3) + 2.0 * f(x - h3) - f(x - 2.0 * h3))
            / (2.0 * h3 * h3 * h3);
        assert!(close(out.v, f(x), 1e-12));
        assert!(close(out.d1, d1, 1e-6));
        assert!(close(out.d2, d2, 1e-4));
        assert!(close(out.d3, d3, 1e-4));
    }

    // Independent multiplication oracle: convert jets to Taylor coefficients
    // (c_k = d_k / k!), convolve the truncated polynomials, convert back.
    fn taylor_mul(a: Jet3, b: Jet3) -> Jet3 {
        let ca = [a.v, a.d1, a.d2 / 2.0, a.d3 / 6.0];
        let cb = [b.v, b.d1, b.d2 / 2.0, b.d3 / 6.0];
        let mut cc = [0.0f64; 4];
        for i in 0..4 {
            for j in 0..4 - i {
                cc[i + j] += ca[i] * cb[j];
            }
        }
        Jet3::new(cc[0], cc[1], 2.0 * cc[2], 6.0 * cc[3])
    }

    proptest! {
        #[test]
        fn product_rule_first_order_is_exact(
            a in proptest::array::uniform4(-3.0f64..3.0),
            b in proptest::array::uniform4(-3.0f64..3.0),
        ) {
            let f = Jet3::new(a[0], a[1], a[2], a[3]);
            let g = Jet3::new(b[0], b[1], b[2], b[3]);
            let p = f * g;
            prop_assert_eq!(p.d1, f.d1 * g.v + f.v * g.d1);
        }

        #[test]
        fn multiplication_matches_taylor_convolution(
            a in proptest::array::uniform4(-3.0f64..3.0),
            b in proptest::array::uniform4(-3.0f64..3.0),
        ) {
            let f = Jet3::new(a[0], a[1], a[2], a[3]);
            let g = Jet3::new(b[0], b[1], b[2], b[3]);
            let p = f * g;
            let q = taylor_mul(f, g);
            prop_assert!(close(p.v, q.v, 1e-12));
            prop_assert!(close(p.d1, q.d1, 1e-12));
            prop_assert!(close(p.d2, q.d2, 1e-12));
            prop_assert!(close(p.d3, q.d3, 1e-12));
        }

        #[test]
        fn addition_is_slotwise(
            a in proptest::array::uniform4(-3.0f64..3.0),
            b in proptest::array::uniform4(-3.0f64..3.0),
        ) {
            let f = Jet3::new(a[0], a[1], a[2], a[3]);
            let g = Jet3::new(b[0], b[1], b[2], b[3]);
            let s = f + g;
            prop_assert_eq!(s.v, f.v + g.v);
            prop_assert_eq!(s.d3, f.d3 + g.d3);
        }
    }
}
