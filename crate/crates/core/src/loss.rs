//! Empirical loss functionals: data and physics losses, their l1
//! counterparts, the combined sensitivity, the Sobolev-type loss, and the
//! uniform (C0) error against the exact solution.
//!
//! All losses are mean-normalized (1/N sums). The training objective is
//! L = L_u + lambda * L_f; the sensitivity S = l1_data + lambda * C *
//! l1_residual is the first-order coefficient of the perturbation bounds.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jet::Differentiable1D;
use crate::pde::Problem1D;

/// Number of evaluation points (endpoints included) for the uniform error.
pub const C0_GRID: usize = 100;

/// Every scalar the studies and reports read off one field evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// Mean squared data mismatch.
    pub l_u: f64,
    /// Mean squared residual.
    pub l_f: f64,
    /// l_u + lambda * l_f.
    pub l_pinn: f64,
    /// Physics weight used.
    pub lambda: f64,
    /// Mean absolute data mismatch.
    pub l1_data: f64,
    /// Mean absolute residual.
    pub l1_residual: f64,
    /// l1_data + lambda * C * l1_residual.
    pub s_theta: f64,
    /// Mean of r^2 + r'^2 over collocation plus lambda * data term.
    pub l_s: f64,
    /// Max |u(x) - sin(pi x)| over the evaluation grid.
    pub c0_error: f64,
}

/// Mean squared mismatch against supervised targets.
pub fn data_loss(field: &impl Differentiable1D, data: &[(f64, f64)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("data loss needs at least one point".into()));
    }
    let sum: f64 = data.iter().map(|&(x, y)| (field.eval(x) - y).powi(2)).sum();
    Ok(sum / data.len() as f64)
}

/// Mean squared residual over collocation points.
pub fn physics_loss(
    problem: &Problem1D,
    field: &impl Differentiable1D,
    colloc: &[f64],
) -> Result<f64> {
    if colloc.is_empty() {
        return Err(Error::InvalidArgument("physics loss needs at least one point".into()));
    }
    let sum: f64 = colloc
        .iter()
        .map(|&x| problem.residual(field.eval_jet(x), x).0.powi(2))
        .sum();
    Ok(sum / colloc.len() as f64)
}

/// Mean absolute data mismatch.
pub fn empirical_l1_data(field: &impl Differentiable1D, data: &[(f64, f64)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("l1 data norm needs at least one point".into()));
    }
    let sum: f64 = data.iter().map(|&(x, y)| (field.eval(x) - y).abs()).sum();
    Ok(sum / data.len() as f64)
}

/// Mean absolute residual.
pub fn empirical_l1_residual(
    problem: &Problem1D,
    field: &impl Differentiable1D,
    colloc: &[f64],
) -> Result<f64> {
    if colloc.is_empty() {
        return Err(Error::InvalidArgument("l1 residual norm needs at least one point".into()));
    }
    let sum: f64 = colloc
        .iter()
        .map(|&x| problem.residual(field.eval_jet(x), x).0.abs())
        .sum();
    Ok(sum / colloc.len() as f64)
}

/// Sobolev-type loss: mean of r^2 + r'^2 over collocation points plus
/// lambda times the mean squared data mismatch. An empty data slice is
/// allowed and contributes zero (pure physics variant); collocation points
/// are required.
pub fn sobolev_loss(
    problem: &Problem1D,
    field: &impl Differentiable1D,
    colloc: &[f64],
    data: &[(f64, f64)],
    lambda: f64,
) -> Result<f64> {
    if colloc.is_empty() {
        return Err(Error::InvalidArgument("sobolev loss needs collocation points".into()));
    }
    let phys: f64 = colloc
        .iter()
        .map(|&x| {
            let (r, rp) = problem.residual(field.eval_jet(x), x);
            r * r + rp * rp
        })
        .sum::<f64>()
        / colloc.len() as f64;
    let data_term = if data.is_empty() { 0.0 } else { data_loss(field, data)? };
    Ok(phys + lambda * data_term)
}

/// Max |u(x) - sin(pi x)| over C0_GRID uniformly spaced points in [0,1],
/// endpoints included.
pub fn c0_error(field: &impl Differentiable1D) -> f64 {
    (0..C0_GRID)
        .map(|i| {
            let x = i as f64 / (C0_GRID - 1) as f64;
            (field.eval(x) - (PI * x).sin()).abs()
        })
        .fold(0.0, f64::max)
}

/// Evaluate every loss-family quantity at once.
pub fn pinn_loss(
    problem: &Problem1D,
    field: &impl Differentiable1D,
    colloc: &[f64],
    data: &[(f64, f64)],
    lambda: f64,
) -> Result<LossReport> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "physics weight must be positive and finite, got {lambda}"
        )));
    }
    let l_u = data_loss(field, data)?;
    let l_f = physics_loss(problem, field, colloc)?;
    let l1_data = empirical_l1_data(field, data)?;
    let l1_residual = empirical_l1_residual(problem, field, colloc)?;
    let report = LossReport {
        l_u,
        l_f,
        l_pinn: l_u + lambda * l_f,
        lambda,
        l1_data,
        l1_residual,
        s_theta: l1_data + lambda * problem.operator_constant_c * l1_residual,
        l_s: sobolev_loss(problem, field, colloc, data, lambda)?,
        c0_error: c0_error(field),
    };
    if [report.l_pinn, report.s_theta, report.l_s, report.c0_error]
        .iter()
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("loss report".into()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{Jet3, JetClosure};
    use crate::net::init_net;
    use crate::pde::{sample_collocation, ExactSolution, Perturbed, SinePerturbation};

    fn zero_field() -> JetClosure<impl Fn(f64) -> Jet3> {
        JetClosure(|_| Jet3::constant(0.0))
    }

    fn problem() -> Problem1D {
        Problem1D::default()
    }

    #[test]
    fn data_loss_examples() {
        let bnd = problem().boundary_set();
        assert!(data_loss(&ExactSolution, &bnd).unwrap() < 1e-28);
        assert_eq!(data_loss(&zero_field(), &bnd).unwrap(), 0.0);
        assert_eq!(data_loss(&zero_field(), &[(0.5, 1.0)]).unwrap(), 1.0);
        assert!(data_loss(&zero_field(), &[]).is_err());
    }

    #[test]
    fn physics_loss_examples() {
        let p = problem();
        let colloc = sample_collocation(64, 3).unwrap();
        assert!(physics_loss(&p, &ExactSolution, &colloc.points).unwrap() < 1e-20);
        let at_half = physics_loss(&p, &zero_field(), &[0.5]).unwrap();
        assert!((at_half - PI.powi(4)).abs() < 1e-9 * PI.powi(4), "{at_half}");
        let two = physics_loss(&p, &zero_field(), &[0.0, 0.5]).unwrap();
        assert!((two - PI.powi(4) / 2.0).abs() < 1e-9 * PI.powi(4), "{two}");
        assert!(physics_loss(&p, &zero_field(), &[]).is_err());
    }

    #[test]
    fn l1_norms_examples() {
        let p = problem();
        let bnd = p.boundary_set();
        assert!(empirical_l1_data(&ExactSolution, &bnd).unwrap() < 1e-14);
        let colloc = sample_collocation(32, 5).unwrap();
        assert!(empirical_l1_residual(&p, &ExactSolution, &colloc.points).unwrap() < 1e-10);
        let l1 = empirical_l1_residual(&p, &zero_field(), &[0.5]).unwrap();
        assert!((l1 - PI * PI).abs() < 1e-9, "{l1}");
    }

    // Cauchy-Schwarz: the mean absolute value never exceeds the root of
    // the mean square, for any field and sample set.
    #[test]
    fn l1_is_dominated_by_root_mean_square() {
        let p = problem();
        for seed in 0..10u64 {
            let net = init_net(seed, &[1, 8, 8, 1]).unwrap();
            let colloc = sample_collocation(40, 100 + seed).unwrap();
            let l1 = empirical_l1_residual(&p, &net, &colloc.points).unwrap();
            let l2 = physics_loss(&p, &net, &colloc.points).unwrap();
            assert!(l1 <= l2.sqrt() + 1e-12, "seed {seed}: {l1} vs sqrt {}", l2.sqrt());

            let data: Vec<(f64, f64)> =
                colloc.points.iter().map(|&x| (x, (PI * x).sin())).collect();
            let d1 = empirical_l1_data(&net, &data).unwrap();
            let d2 = data_loss(&net, &data).unwrap();
            assert!(d1 <= d2.sqrt() + 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn sobolev_loss_examples() {
        let p = problem();
        let colloc = sample_collocation(32, 11).unwrap();
        assert!(sobolev_loss(&p, &ExactSolution, &colloc.points, &[], 1.0).unwrap() < 1e-20);
        // At x = 0.5 the residual of the zero field is pi^2 and its
        // derivative pi^3 cos(pi/2) = 0.
        let at_half = sobolev_loss(&p, &zero_field(), &[0.5], &[], 1.0).unwrap();
        assert!((at_half - PI.powi(4)).abs() < 1e-9 * PI.powi(4), "{at_half}");
        // At x = 0 the residual vanishes but its derivative is pi^3.
        let at_zero = sobolev_loss(&p, &zero_field(), &[0.0], &[], 1.0).unwrap();
        assert!((at_zero - PI.powi(6)).abs() < 1e-12 * PI.powi(6), "{at_zero}");
        assert!((PI.powi(6) - 961.389).abs() < 1e-3);
        assert!(sobolev_loss(&p, &zero_field(), &[], &[], 1.0).is_err());
    }

    #[test]
    fn sobolev_loss_dominates_physics_loss() {
        let p = problem();
        for seed in 0..8u64 {
            let net = init_net(50 + seed, &[1, 8, 8, 1]).unwrap();
            let colloc = sample_collocation(30, 200 + seed).unwrap();
            let ls = sobolev_loss(&p, &net, &colloc.points, &p.boundary_set(), 0.7).unwrap();
            let lf = physics_loss(&p, &net, &colloc.points).unwrap();
            assert!(ls >= lf - 1e-12, "seed {seed}: {ls} < {lf}");
        }
    }

    #[test]
    fn c0_error_examples() {
        assert!(c0_error(&ExactSolution) < 1e-15);
        // The 100-point inclusive grid does not contain x = 0.5; the
        // largest |sin(pi x)| it sees is sin(49 pi / 99).
        let zero = c0_error(&zero_field());
        let grid_peak = (PI * 49.0 / 99.0).sin();
        assert!((zero - grid_peak).abs() < 1e-12, "{zero}");
        assert!(zero > 0.9998 && zero < 1.0);

        let shifted =
            Perturbed { base: ExactSolution, bump: SinePerturbation { amplitude: 0.1, frequency: 1 } };
        let c = c0_error(&shifted);
        assert!((c - 0.1 * grid_peak).abs() < 1e-12, "{c}");
    }

    #[test]
    fn pinn_loss_fills_every_field_consistently() {
        let p = problem();
        let colloc = sample_collocation(20, 42).unwrap();
        let bnd = p.boundary_set();

        let exact = pinn_loss(&p, &ExactSolution, &colloc.points, &bnd, 1.0).unwrap();
        for v in [
            exact.l_u,
            exact.l_f,
            exact.l_pinn,
            exact.l1_data,
            exact.l1_residual,
            exact.s_theta,
            exact.l_s,
        ] {
            assert!(v < 1e-10, "{exact:?}");
        }
        assert!(exact.c0_error < 1e-10);

        let zero = pinn_loss(&p, &zero_field(), &[0.5], &[(0.5, 1.0)], 1.0).unwrap();
        assert!((zero.l_pinn - (1.0 + PI.powi(4))).abs() < 1e-9, "{}", zero.l_pinn);

        assert!(pinn_loss(&p, &zero_field(), &[0.5], &bnd, 0.0).is_err());
        assert!(pinn_loss(&p, &zero_field(), &[0.5], &bnd, -1.0).is_err());
    }

    // The combination identities must hold bitwise, not just approximately:
    // the report is built from its own component values.
    #[test]
    fn report_identities_are_exact() {
        let p = problem();
        for seed in 0..6u64 {
            let net = init_net(300 + seed, &[1, 8, 1]).unwrap();
            let colloc = sample_collocation(25, 400 + seed).unwrap();
            let lambda = 0.5 + seed as f64 * 0.3;
            let rep = pinn_loss(&p, &net, &colloc.points, &p.boundary_set(), lambda).unwrap();
            assert_eq!(rep.l_pinn, rep.l_u + lambda * rep.l_f);
            assert_eq!(rep.s_theta, rep.l1_data + lambda * p.operator_constant_c * rep.l1_residual);
            assert!(rep.l_u >= 0.0 && rep.l_f >= 0.0 && rep.l_s >= 0.0 && rep.c0_error >= 0.0);
        }
    }
}
