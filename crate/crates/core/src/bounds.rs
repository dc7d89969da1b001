//! Closed-form stability and concentration bounds.
//!
//! Everything here is pure arithmetic on previously measured quantities:
//! the perturbation bounds and their admissible-amplitude roots, the
//! bounded-difference concentration tail with its sample-count inverse,
//! the vector-valued deviation, and the Sobolev-to-uniform error bound.
//! No sampling happens in this module.

use crate::error::{Error, Result};

fn ensure(cond: bool, msg: impl Fn() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}

fn finite_nonneg(v: f64, name: &str) -> Result<()> {
    ensure(v.is_finite() && v >= 0.0, || format!("{name} must be finite and >= 0, got {v}"))
}

/// Growth of the data loss under an output perturbation of sup-norm delta:
/// 2*delta*l1_data + delta^2.
pub fn data_perturb_bound(delta: f64, l1_data: f64) -> Result<f64> {
    finite_nonneg(delta, "delta")?;
    finite_nonneg(l1_data, "l1_data")?;
    Ok(2.0 * delta * l1_data + delta * delta)
}

/// Growth of the physics loss under the same perturbation, whose residual
/// image has sup-norm C*delta: 2*C*delta*l1_residual + C^2*delta^2.
pub fn physics_perturb_bound(delta: f64, l1_residual: f64, c: f64) -> Result<f64> {
    finite_nonneg(delta, "delta")?;
    finite_nonneg(l1_residual, "l1_residual")?;
    ensure(c.is_finite() && c > 0.0, || format!("operator constant must be > 0, got {c}"))?;
    Ok(2.0 * c * delta * l1_residual + c * c * delta * delta)
}

/// Growth of the full training loss: 2*delta*S + delta^2*(1 + lambda*C^2),
/// with S the combined sensitivity.
pub fn combined_bound(delta: f64, s_theta: f64, lambda: f64, c: f64) -> Result<f64> {
    finite_nonneg(delta, "delta")?;
    finite_nonneg(s_theta, "s_theta")?;
    finite_nonneg(lambda, "lambda")?;
    finite_nonneg(c, "c")?;
    Ok(2.0 * delta * s_theta + delta * delta * (1.0 + lambda * c * c))
}

/// Admissible perturbation amplitude for tolerance epsilon:
/// [-(1+lambda*C^2) + sqrt((1+lambda*C^2)^2 + 8*S*eps)] / (4*S) for S > 0,
/// and sqrt(eps/(1+lambda*C^2)) for S = 0.
///
/// Evaluated in the conjugate form 2*eps/(B + sqrt(B^2 + 8*S*eps)) with
/// B = 1 + lambda*C^2, which avoids the subtractive cancellation of the
/// textbook form for small eps.
pub fn admissible_delta(s_theta: f64, lambda: f64, c: f64, epsilon_tol: f64) -> Result<f64> {
    finite_nonneg(s_theta, "s_theta")?;
    finite_nonneg(lambda, "lambda")?;
    finite_nonneg(c, "c")?;
    ensure(epsilon_tol.is_finite() && epsilon_tol > 0.0, || {
        format!("tolerance must be > 0, got {epsilon_tol}")
    })?;
    let b = 1.0 + lambda * c * c;
    if s_theta == 0.0 {
        Ok((epsilon_tol / b).sqrt())
    } else {
        Ok(2.0 * epsilon_tol / (b + (b * b + 8.0 * s_theta * epsilon_tol).sqrt()))
    }
}

/// The amplitude at which `combined_bound` itself reaches epsilon: the
/// positive root of delta^2*(1+lambda*C^2) + 2*delta*S = eps, evaluated as
/// eps/(S + sqrt(S^2 + B*eps)). Exact inverse of [`combined_bound`],
/// continuous in S down to S = 0.
pub fn combined_bound_root(s_theta: f64, lambda: f64, c: f64, epsilon_tol: f64) -> Result<f64> {
    finite_nonneg(s_theta, "s_theta")?;
    finite_nonneg(lambda, "lambda")?;
    finite_nonneg(c, "c")?;
    ensure(epsilon_tol.is_finite() && epsilon_tol > 0.0, || {
        format!("tolerance must be > 0, got {epsilon_tol}")
    })?;
    let b = 1.0 + lambda * c * c;
    Ok(epsilon_tol / (s_theta + (s_theta * s_theta + b * epsilon_tol).sqrt()))
}

/// Probability that the empirical physics loss deviates from its mean by
/// more than epsilon when residuals are bounded by M:
/// exp(-N_f*eps^2/(8*M^4)), clamped to [0,1].
pub fn mcdiarmid_tail(epsilon: f64, n_f: usize, m: f64) -> Result<f64> {
    finite_nonneg(epsilon, "epsilon")?;
    ensure(n_f >= 1, || "sample count must be >= 1".into())?;
    ensure(m.is_finite() && m > 0.0, || format!("residual bound M must be > 0, got {m}"))?;
    let t = (-(n_f as f64) * epsilon * epsilon / (8.0 * m.powi(4))).exp();
    Ok(t.clamp(0.0, 1.0))
}

/// Smallest sample count with tail probability at most confidence_delta:
/// ceil(8*M^4*ln(1/delta)/eps^2). The ceiling is taken with a relative
/// guard of 1e-12 so that values landing within rounding error of an
/// integer do not get bumped to the next one.
pub fn min_samples(m: f64, epsilon: f64, confidence_delta: f64) -> Result<u64> {
    ensure(m.is_finite() && m > 0.0, || format!("residual bound M must be > 0, got {m}"))?;
    ensure(epsilon.is_finite() && epsilon > 0.0, || {
        format!("epsilon must be > 0, got {epsilon}")
    })?;
    ensure(confidence_delta > 0.0 && confidence_delta < 1.0, || {
        format!("confidence level must lie in (0,1), got {confidence_delta}")
    })?;
    let v = 8.0 * m.powi(4) * (1.0 / confidence_delta).ln() / (epsilon * epsilon);
    ensure(v.is_finite() && v < u64::MAX as f64, || format!("sample bound overflows: {v}"))?;
    Ok(((v - v.abs() * 1e-12).ceil() as u64).max(1))
}

/// Per-sample influence bounds on the combined loss:
/// (4*M_f^2/N_f, 4*lambda*M_d^2/N_d).
pub fn bounded_difference_constants(
    m_f: f64,
    m_d: f64,
    n_f: usize,
    n_d: usize,
    lambda: f64,
) -> Result<(f64, f64)> {
    finite_nonneg(m_f, "m_f")?;
    finite_nonneg(m_d, "m_d")?;
    finite_nonneg(lambda, "lambda")?;
    ensure(n_f >= 1 && n_d >= 1, || "sample counts must be >= 1".into())?;
    Ok((4.0 * m_f * m_f / n_f as f64, 4.0 * lambda * m_d * m_d / n_d as f64))
}

/// Deviation amplitude of the combined loss under joint resampling:
/// sqrt((8*M_f^4/N_f + 8*lambda^2*M_d^4/N_d) * ln(1/delta)).
pub fn vector_deviation(
    n_f: usize,
    n_d: usize,
    m_f: f64,
    m_d: f64,
    lambda: f64,
    confidence_delta: f64,
) -> Result<f64> {
    finite_nonneg(m_f, "m_f")?;
    finite_nonneg(m_d, "m_d")?;
    finite_nonneg(lambda, "lambda")?;
    ensure(n_f >= 1 && n_d >= 1, || "sample counts must be >= 1".into())?;
    ensure(confidence_delta > 0.0 && confidence_delta < 1.0, || {
        format!("confidence level must lie in (0,1), got {confidence_delta}")
    })?;
    let var = 8.0 * m_f.powi(4) / n_f as f64
        + 8.0 * lambda * lambda * m_d.powi(4) / n_d as f64;
    Ok((var * (1.0 / confidence_delta).ln()).sqrt())
}

/// Uniform-error bound from Sobolev-type loss control:
/// C_tilde * sqrt(L_s + sqrt(ln(1/delta)/N_f + ln(1/delta)/N_d)).
pub fn generalization_bound(
    l_s: f64,
    n_f: usize,
    n_d: usize,
    confidence_delta: f64,
    c_tilde: f64,
) -> Result<f64> {
    finite_nonneg(l_s, "l_s")?;
    ensure(n_f >= 1 && n_d >= 1, || "sample counts must be >= 1".into())?;
    ensure(confidence_delta > 0.0 && confidence_delta < 1.0, || {
        format!("confidence level must lie in (0,1), got {confidence_delta}")
    })?;
    ensure(c_tilde.is_finite() && c_tilde > 0.0, || {
        format!("aggregate constant must be > 0, got {c_tilde}")
    })?;
    let log_term = (1.0 / confidence_delta).ln();
    let inner = log_term / n_f as f64 + log_term / n_d as f64;
    Ok(c_tilde * (l_s + inner.sqrt()).sqrt())
}

/// Everything a downstream consumer needs to judge perturbation safety of
/// a trained network at a given tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCertificate {
    /// Combined sensitivity of the trained network.
    pub s_theta: f64,
    /// Operator constant of the perturbation family.
    pub c: f64,
    /// Physics weight used in training.
    pub lambda: f64,
    /// Sup-norm residual bound on the evaluation grid.
    pub m_f: f64,
    /// Sup-norm data-mismatch bound on the evaluation grid.
    pub m_d: f64,
    /// Admissible perturbation amplitude for `epsilon_tol`.
    pub delta_max: f64,
    /// Loss-change tolerance the certificate is issued for.
    pub epsilon_tol: f64,
}

impl StabilityCertificate {
    pub fn new(
        s_theta: f64,
        c: f64,
        lambda: f64,
        m_f: f64,
        m_d: f64,
        epsilon_tol: f64,
    ) -> Result<Self> {
        finite_nonneg(s_theta, "s_theta")?;
        finite_nonneg(m_f, "m_f")?;
        finite_nonneg(m_d, "m_d")?;
        ensure(c.is_finite() && c > 0.0, || format!("operator constant must be > 0, got {c}"))?;
        ensure(lambda.is_finite() && lambda > 0.0, || {
            format!("physics weight must be > 0, got {lambda}")
        })?;
        let delta_max = admissible_delta(s_theta, lambda, c, epsilon_tol)?;
        Ok(Self { s_theta, c, lambda, m_f, m_d, delta_max, epsilon_tol })
    }
}

/// Constants of the uniform-error bound that are modeling inputs rather
/// than measured quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConfig {
    /// Coercivity constant; informational only, no formula consumes it.
    pub alpha: Option<f64>,
    /// Aggregate constant of the uniform-error bound.
    pub c_tilde: f64,
    /// Sobolev order of the loss.
    pub s: u32,
    /// Spatial dimension.
    pub d: u32,
}

impl BoundConfig {
    pub fn new(alpha: Option<f64>, c_tilde: f64, s: u32, d: u32) -> Result<Self> {
        ensure(c_tilde.is_finite() && c_tilde > 0.0, || {
            format!("aggregate constant must be > 0, got {c_tilde}")
        })?;
        // The uniform norm is only controlled when the Sobolev order
        // exceeds half the dimension.
        ensure(f64::from(s) > f64::from(d) / 2.0, || {
            format!("need Sobolev order s > d/2, got s = {s}, d = {d}")
        })?;
        if let Some(a) = alpha {
            finite_nonneg(a, "alpha")?;
        }
        Ok(Self { alpha, c_tilde, s, d })
    }
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { alpha: None, c_tilde: 1.0, s: 1, d: 1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn data_bound_examples() {
        assert_eq!(data_perturb_bound(0.0, 123.0).unwrap(), 0.0);
        assert!((data_perturb_bound(0.1, 0.5).unwrap() - 0.11).abs() < 1e-15);
        assert!(data_perturb_bound(-0.1, 0.5).is_err());
    }

    #[test]
    fn physics_bound_examples() {
        assert_eq!(physics_perturb_bound(0.0, 1.0, PI * PI).unwrap(), 0.0);
        let b = physics_perturb_bound(0.01, 1.0, PI * PI).unwrap();
        let expect = 2.0 * PI * PI * 0.01 + PI.powi(4) * 1e-4;
        assert!((b - expect).abs() < 1e-12);
        assert!((b - 0.20713).abs() < 1e-5, "{b}");
        assert!(physics_perturb_bound(0.01, 1.0, 0.0).is_err());
        assert!(physics_perturb_bound(0.01, 1.0, -1.0).is_err());
    }

    #[test]
    fn combined_bound_examples_and_decomposition() {
        assert_eq!(combined_bound(0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!((combined_bound(0.1, 1.0, 1.0, 1.0).unwrap() - 0.22).abs() < 1e-15);

        // With S = l1_data + lambda*C*l1_residual the combined bound is
        // exactly the data bound plus lambda times the physics bound.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let delta: f64 = rng.gen_range(0.0..0.2);
            let l1d: f64 = rng.gen_range(0.0..2.0);
            let l1r: f64 = rng.gen_range(0.0..2.0);
            let lambda: f64 = rng.gen_range(0.1..3.0);
            let c: f64 = rng.gen_range(0.1..12.0);
            let s = l1d + lambda * c * l1r;
            let combined = combined_bound(delta, s, lambda, c).unwrap();
            let parts = data_perturb_bound(delta, l1d).unwrap()
                + lambda * physics_perturb_bound(delta, l1r, c).unwrap();
            assert!(
                (combined - parts).abs() <= 1e-12 * combined.max(1.0),
                "{combined} vs {parts}"
            );
        }
    }

    #[test]
    fn admissible_delta_examples() {
        // S = 1, lambda = 0, C = 0, eps = 1: (-1 + sqrt(9))/4 = 0.5 exactly.
        assert_eq!(admissible_delta(1.0, 0.0, 0.0, 1.0).unwrap(), 0.5);
        // S = 2, lambda = 1, C = 1, eps = 1: (-2 + sqrt(20))/8.
        let d = admissible_delta(2.0, 1.0, 1.0, 1.0).unwrap();
        assert!((d - (-2.0 + 20.0f64.sqrt()) / 8.0).abs() < 1e-15);
        assert!((d - 0.30902).abs() < 1e-5, "{d}");
        // Tolerance -> 0 drives the amplitude to 0.
        assert!(admissible_delta(1.0, 1.0, 1.0, 1e-12).unwrap() < 1e-10);
        assert!(admissible_delta(1.0, 1.0, 1.0, 0.0).is_err());
        // Degenerate S = 0 branch.
        let d0 = admissible_delta(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((d0 - (0.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn combined_bound_root_inverts_combined_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..1000 {
            let s: f64 = if trial % 50 == 0 { 0.0 } else { rng.gen_range(0.0..5.0) };
            let lambda: f64 = rng.gen_range(0.0..3.0);
            let c: f64 = rng.gen_range(0.0..12.0);
            let eps: f64 = rng.gen_range(1e-6..10.0);
            let root = combined_bound_root(s, lambda, c, eps).unwrap();
            let back = combined_bound(root, s, lambda, c).unwrap();
            assert!(
                (back - eps).abs() <= 1e-10 * eps,
                "trial {trial}: eps {eps} reproduced as {back} (root {root})"
            );
        }
    }

    #[test]
    fn first_order_dominance_within_the_admissible_range() {
        // With benchmark-like magnitudes the admissible amplitude sits in
        // the region where the linear term dominates the quadratic one:
        // 2*delta*S >= delta^2*(1+lambda*C^2) iff delta <= 2S/B.
        for (s, lambda, c, eps) in [
            (0.1, 1.0, PI * PI, 0.01),
            (0.5, 1.0, PI * PI, 0.05),
            (0.05, 0.5, PI * PI, 0.005),
        ] {
            let b = 1.0 + lambda * c * c;
            let d_adm = admissible_delta(s, lambda, c, eps).unwrap();
            assert!(d_adm <= 2.0 * s / b * (1.0 + 1e-12), "delta_max {d_adm} vs {}", 2.0 * s / b);
            for k in 1..=20 {
                let delta = d_adm * k as f64 / 20.0;
                assert!(2.0 * delta * s >= delta * delta * b - 1e-15);
            }
        }
    }

    #[test]
    fn mcdiarmid_tail_examples_and_monotonicity() {
        assert_eq!(mcdiarmid_tail(0.0, 10, 1.0).unwrap(), 1.0);
        let t = mcdiarmid_tail(1.0, 8, 1.0).unwrap();
        assert!((t - (-1.0f64).exp()).abs() < 1e-12, "{t}");
        assert!(mcdiarmid_tail(1.0, 8, 0.0).is_err());

        let mut prev = 1.0;
        for n in [1usize, 2, 4, 8, 16, 64] {
            let t = mcdiarmid_tail(0.5, n, 1.0).unwrap();
            assert!(t < prev);
            prev = t;
        }
        let mut prev = 1.0;
        for eps in [0.1, 0.2, 0.5, 1.0, 2.0] {
            let t = mcdiarmid_tail(eps, 8, 1.0).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn min_samples_examples() {
        assert_eq!(min_samples(1.0, 1.0, (-1.0f64).exp()).unwrap(), 8);
        assert_eq!(min_samples(1.0, 0.1, 0.01).unwrap(), 3685);
        assert!(min_samples(0.0, 1.0, 0.5).is_err());
        assert!(min_samples(1.0, 0.0, 0.5).is_err());
        assert!(min_samples(1.0, 1.0, 1.0).is_err());
        assert!(min_samples(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn min_samples_round_trips_through_the_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let m: f64 = rng.gen_range(0.2..4.0);
            let eps: f64 = rng.gen_range(0.05..3.0);
            let conf: f64 = rng.gen_range(0.001..0.9);
            let n = min_samples(m, eps, conf).unwrap();
            let tail = mcdiarmid_tail(eps, n as usize, m).unwrap();
            assert!(
                tail <= conf * (1.0 + 1e-12),
                "m {m} eps {eps} conf {conf}: n {n} gives tail {tail}"
            );
        }
    }

    #[test]
    fn bounded_difference_examples() {
        assert_eq!(bounded_difference_constants(1.0, 1.0, 4, 4, 1.0).unwrap(), (1.0, 1.0));
        assert_eq!(bounded_difference_constants(2.0, 1.0, 8, 8, 0.5).unwrap(), (2.0, 0.25));
        let (cf1, cd1) = bounded_difference_constants(1.5, 0.7, 10, 20, 2.0).unwrap();
        let (cf2, cd2) = bounded_difference_constants(1.5, 0.7, 20, 40, 2.0).unwrap();
        assert!((cf1 / cf2 - 2.0).abs() < 1e-12);
        assert!((cd1 / cd2 - 2.0).abs() < 1e-12);
        assert!(bounded_difference_constants(1.0, 1.0, 0, 4, 1.0).is_err());
    }

    #[test]
    fn vector_deviation_examples() {
        let v = vector_deviation(8, 8, 1.0, 1.0, 1.0, (-1.0f64).exp()).unwrap();
        assert!((v - 2.0f64.sqrt()).abs() < 1e-12, "{v}");

        // Vanishes as both sample counts grow.
        let small = vector_deviation(100_000_000, 100_000_000, 1.0, 1.0, 1.0, 0.1).unwrap();
        assert!(small < 1e-3);

        // lambda = 0 reduces to the residual-only scaling.
        let reduced = vector_deviation(16, 999, 1.3, 5.0, 0.0, 0.05).unwrap();
        let scalar = (8.0 * 1.3f64.powi(4) * (1.0 / 0.05f64).ln() / 16.0).sqrt();
        assert!((reduced - scalar).abs() < 1e-12);
    }

    #[test]
    fn generalization_bound_examples() {
        let g = generalization_bound(1.0, 1, 1, (-1.0f64).exp(), 1.0).unwrap();
        assert!((g - (1.0 + 2.0f64.sqrt()).sqrt()).abs() < 1e-12);
        assert!((g - 1.55377).abs() < 1e-5, "{g}");

        // Zero loss and enormous sample counts drive the bound toward 0.
        let tiny = generalization_bound(0.0, 100_000_000_000_000, 100_000_000_000_000, (-1.0f64).exp(), 1.0)
            .unwrap();
        assert!(tiny < 1e-3, "{tiny}");

        // Monotone in the loss and in the sample counts.
        let base = generalization_bound(1.0, 50, 50, 0.1, 1.0).unwrap();
        assert!(generalization_bound(2.0, 50, 50, 0.1, 1.0).unwrap() > base);
        assert!(generalization_bound(1.0, 500, 500, 0.1, 1.0).unwrap() < base);
        assert!(generalization_bound(1.0, 50, 50, 0.01, 1.0).unwrap() > base);
    }

    #[test]
    fn certificate_carries_the_admissible_amplitude() {
        let cert = StabilityCertificate::new(0.2, PI * PI, 1.0, 0.5, 0.01, 0.01).unwrap();
        assert_eq!(
            cert.delta_max,
            admissible_delta(0.2, 1.0, PI * PI, 0.01).unwrap()
        );
        assert!(cert.delta_max > 0.0);
        assert!(StabilityCertificate::new(0.2, 0.0, 1.0, 0.5, 0.01, 0.01).is_err());
        assert!(StabilityCertificate::new(0.2, 1.0, 0.0, 0.5, 0.01, 0.01).is_err());
        assert!(StabilityCertificate::new(-0.1, 1.0, 1.0, 0.5, 0.01, 0.01).is_err());
    }

    #[test]
    fn bound_config_validates_the_embedding_condition() {
        let cfg = BoundConfig::default();
        assert_eq!((cfg.c_tilde, cfg.s, cfg.d), (1.0, 1, 1));
        assert!(BoundConfig::new(None, 1.0, 1, 1).is_ok());
        assert!(BoundConfig::new(None, 1.0, 1, 2).is_err());
        assert!(BoundConfig::new(None, 1.0, 2, 3).is_ok());
        assert!(BoundConfig::new(None, 0.0, 1, 1).is_err());
        assert!(BoundConfig::new(Some(0.5), 1.0, 1, 1).is_ok());
    }
}
