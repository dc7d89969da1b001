//! The 1D Poisson benchmark: u''(x) = -pi^2 sin(pi x) on [0,1] with
//! u(0) = u(1) = 0 and exact solution u*(x) = sin(pi x).
//!
//! Everything downstream (losses, stability bounds, studies) works against
//! this fixed problem. The residual is written so it vanishes on the exact
//! solution: r(x) = u''(x) + pi^2 sin(pi x), and its spatial derivative
//! r'(x) = u'''(x) + pi^3 cos(pi x) feeds the Sobolev-type loss.

use std::f64::consts::PI;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::{Differentiable1D, Jet3};

/// Grid size used for sup-norm estimates unless a caller overrides it.
pub const DEFAULT_SUP_GRID: usize = 1024;

/// How a sample set was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleDistribution {
    UniformIid,
}

/// Collocation points with their provenance, reproducible from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<f64>,
    pub seed: u64,
    pub distribution: SampleDistribution,
}

/// The benchmark problem plus the sinusoidal perturbation family used by
/// the stability bounds.
///
/// The second-order operator maps the perturbation delta*sin(k pi x) to
/// -delta*(k pi)^2 sin(k pi x), whose sup-norm is delta*(k pi)^2; the
/// operator constant is therefore C = (k pi)^2, exactly pi^2 for k = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem1D {
    /// Order of the differential operator (second derivative).
    pub operator_order: usize,
    /// Sup-norm amplification of the operator on the perturbation family.
    pub operator_constant_c: f64,
    /// Frequency k of the perturbation family delta*sin(k pi x).
    pub perturb_frequency: u32,
}

impl Problem1D {
    /// Benchmark with perturbation family delta*sin(k pi x).
    pub fn with_frequency(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("perturbation frequency must be >= 1".into()));
        }
        Ok(Self {
            operator_order: 2,
            operator_constant_c: (k as f64 * PI).powi(2),
            perturb_frequency: k,
        })
    }

    /// Residual and its first spatial derivative at x, from the jet of a
    /// candidate solution: r = u'' + pi^2 sin(pi x), r' = u''' + pi^3 cos(pi x).
    pub fn residual(&self, u_jet: Jet3, x: f64) -> (f64, f64) {
        let r = u_jet.d2 + PI * PI * (PI * x).sin();
        let r_prime = u_jet.d3 + PI.powi(3) * (PI * x).cos();
        (r, r_prime)
    }

    /// Dirichlet boundary data: [(0, 0), (1, 0)].
    pub fn boundary_set(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 0.0), (1.0, 0.0)]
    }

    /// Max of |r(x)| over `grid_n` uniformly spaced points in [0,1];
    /// the residual bound M_f used by the concentration machinery.
    pub fn estimate_sup_residual(
        &self,
        field: &impl Differentiable1D,
        grid_n: usize,
    ) -> Result<f64> {
        self.sup_on_grid(field, grid_n, |jet, x| self.residual(jet, x).0)
    }

    /// Max of |u(x) - sin(pi x)| over `grid_n` uniformly spaced points;
    /// the data-mismatch bound M_d.
    pub fn estimate_sup_mismatch(
        &self,
        field: &impl Differentiable1D,
        grid_n: usize,
    ) -> Result<f64> {
        self.sup_on_grid(field, grid_n, |jet, x| jet.v - (PI * x).sin())
    }

    fn sup_on_grid(
        &self,
        field: &impl Differentiable1D,
        grid_n: usize,
        quantity: impl Fn(Jet3, f64) -> f64,
    ) -> Result<f64> {
        if grid_n < 2 {
            return Err(Error::InvalidArgument(format!(
                "sup-norm grid needs at least 2 points, got {grid_n}"
            )));
        }
        let mut sup: f64 = 0.0;
        for i in 0..grid_n {
            let x = i as f64 / (grid_n - 1) as f64;
            sup = sup.max(quantity(field.eval_jet(x), x).abs());
        }
        if sup.is_finite() {
            Ok(sup)
        } else {
            Err(Error::NonFinite("sup-norm estimate".into()))
        }
    }
}

impl Default for Problem1D {
    fn default() -> Self {
        Self::with_frequency(1).unwrap()
    }
}

/// n i.i.d. uniform points strictly inside (0,1), deterministic per seed.
pub fn sample_collocation(n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("collocation sample count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| rng.sample(Open01)).collect();
    Ok(SampleSet { points, seed, distribution: SampleDistribution::UniformIid })
}

/// The exact solution sin(pi x), evaluated through jets like any field.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSolution;

impl Differentiable1D for ExactSolution {
    fn eval_jet(&self, x: f64) -> Jet3 {
        (Jet3::lift(x) * PI).sin()
    }
}

/// The perturbation family delta*sin(k pi x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinePerturbation {
    pub amplitude: f64,
    pub frequency: u32,
}

impl Differentiable1D for SinePerturbation {
    fn eval_jet(&self, x: f64) -> Jet3 {
        (Jet3::lift(x) * (self.frequency as f64 * PI)).sin().scale(self.amplitude)
    }
}

/// A base field plus an additive bump; used to evaluate losses of
/// u + delta*sin(k pi x) without touching the network's parameters.
pub struct Perturbed<B, P> {
    pub base: B,
    pub bump: P,
}

impl<B: Differentiable1D, P: Differentiable1D> Differentiable1D for Perturbed<B, P> {
    fn eval_jet(&self, x: f64) -> Jet3 {
        self.base.eval_jet(x) + self.bump.eval_jet(x)
    }
}
