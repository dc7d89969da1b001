//! The three studies: perturbation sweep, concentration under collocation
//! resampling, and the Sobolev-loss-to-uniform-error relation — plus the
//! training loop, deterministic seed derivation, and log-log slope fitting
//! they share.
//!
//! Every random choice descends from one master seed through
//! [`derive_seed`], so studies are bit-reproducible regardless of how much
//! of the work runs in parallel.

use rayon::prelude::*;

use crate::bounds::combined_bound;
use crate::error::{Error, Result};
use crate::loss::{physics_loss, pinn_loss, LossReport};
use crate::net::{init_net, param_gradient, AdamState, Mlp};
use crate::pde::{sample_collocation, Perturbed, Problem1D, SampleSet, SinePerturbation};

use std::f64::consts::PI;

/// Seed stream for network initialization.
const STREAM_INIT: u64 = 0;
/// Seed stream for the training collocation set.
const STREAM_COLLOC: u64 = 1;
/// Seed stream for interior supervision points (when enabled).
const STREAM_DATA: u64 = 2;
/// Seed stream that parents all concentration-study resamplings.
const STREAM_CONCENTRATION: u64 = 3;
/// Seed stream that parents all generalization-study cells.
const STREAM_GENERALIZATION: u64 = 4;

/// Master seed used when nothing else is configured.
pub const DEFAULT_MASTER_SEED: u64 = 42;

/// Everything a training run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layer_sizes: Vec<usize>,
    pub lr: f64,
    pub max_iters: usize,
    /// Number of interior collocation points.
    pub n_f: usize,
    /// Physics weight lambda in L = L_u + lambda * L_f.
    pub lambda: f64,
    /// Master seed; all RNG streams derive from it.
    pub seed: u64,
    /// Frequency k of the perturbation family delta*sin(k pi x).
    pub perturb_frequency: u32,
    /// Extra supervised interior points (targets from the exact solution)
    /// added to the two boundary points; 0 keeps boundary-only data.
    pub interior_data_n: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_sizes: vec![1, 32, 32, 1],
            lr: 1e-3,
            max_iters: 10_000,
            n_f: 100,
            lambda: 1.0,
            seed: DEFAULT_MASTER_SEED,
            perturb_frequency: 1,
            interior_data_n: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if self.n_f == 0 {
            return Err(Error::InvalidArgument("n_f must be >= 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if self.perturb_frequency == 0 {
            return Err(Error::InvalidArgument("perturb_frequency must be >= 1".into()));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem1D> {
        Problem1D::with_frequency(self.perturb_frequency)
    }
}

/// One row of the perturbation sweep. The three loss deltas are absolute
/// values of measured changes; `ratio` is d_total/bound (0 when the bound
/// is 0, which only happens at delta = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationRow {
    pub delta: f64,
    pub d_lu: f64,
    pub d_lf: f64,
    pub d_total: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Sweep output: the unperturbed report (whose l1 norms parameterize the
/// bounds) plus one row per amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationStudy {
    pub base: LossReport,
    pub rows: Vec<PerturbationRow>,
}

/// One resampling trial of the concentration study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationRow {
    pub n_f: usize,
    pub trial: usize,
    pub l_f: f64,
}

/// Per-N_f aggregate with the unbiased (n-1) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationAgg {
    pub n_f: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationStudy {
    pub rows: Vec<ConcentrationRow>,
    pub aggregates: Vec<ConcentrationAgg>,
    /// OLS fit of ln(std) against ln(N_f).
    pub fit: SlopeFit,
}

/// One trained cell of the generalization study. `seed` is the cell's
/// index among the seeds for its N_f, not the derived RNG seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizationRow {
    pub n_f: usize,
    pub seed: usize,
    pub l_s: f64,
    pub c0_error: f64,
}

/// A cell whose training failed; the study continues without it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub n_f: usize,
    pub seed: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationStudy {
    pub rows: Vec<GeneralizationRow>,
    pub failures: Vec<CellFailure>,
    /// OLS fit of ln(c0_error) against ln(L_s).
    pub fit: SlopeFit,
}

/// Ordinary least squares on logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Deterministic per-stream seed derivation (SplitMix64 finalizer over
/// master + (stream+1)*golden-gamma). Documented so independent
/// implementations produce identical studies:
///
/// ```text
/// z = master + (stream + 1) * 0x9E3779B97F4A7C15   (mod 2^64)
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// seed = z ^ (z >> 31)
/// ```
pub fn derive_seed(master_seed: u64, stream_id: u64) -> u64 {
    let mut z = master_seed.wrapping_add(stream_id.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// The supervised points a config trains on: the two Dirichlet boundary
/// points, plus optional interior points with exact-solution targets.
pub fn training_data(cfg: &TrainConfig, problem: &Problem1D) -> Result<Vec<(f64, f64)>> {
    let mut data = problem.boundary_set();
    if cfg.interior_data_n > 0 {
        let xs = sample_collocation(cfg.interior_data_n, derive_seed(cfg.seed, STREAM_DATA))?;
        data.extend(xs.points.iter().map(|&x| (x, (PI * x).sin())));
    }
    Ok(data)
}

/// The collocation set a config trains on.
pub fn training_collocation(cfg: &TrainConfig) -> Result<SampleSet> {
    sample_collocation(cfg.n_f, derive_seed(cfg.seed, STREAM_COLLOC))
}

/// Full-batch Adam training of the benchmark network.
///
/// Returns the trained network and the loss history, recorded before the
/// first step and after every 100th iteration (and after the last).
pub fn train_pinn(cfg: &TrainConfig) -> Result<(Mlp, Vec<(usize, LossReport)>)> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let mut net = init_net(derive_seed(cfg.seed, STREAM_INIT), &cfg.layer_sizes)?;
    let colloc = training_collocation(cfg)?;
    let data = training_data(cfg, &problem)?;
    let data_xs: Vec<f64> = data.iter().map(|d| d.0).collect();

    let mut adam = AdamState::new(&net, cfg.lr);
    let mut history = Vec::with_capacity(cfg.max_iters / 100 + 2);
    let initial = pinn_loss(&problem, &net, &colloc.points, &data, cfg.lambda)?;
    history.push((0, initial));

    let data_w = 1.0 / data.len() as f64;
    let phys_w = cfg.lambda / colloc.points.len() as f64;
    for iter in 1..=cfg.max_iters {
        let (_, mut grads) = param_gradient(&net, &data_xs, |i, out| {
            let e = out.v - data[i].1;
            (data_w * e * e, [2.0 * data_w * e, 0.0, 0.0, 0.0])
        })
        .map_err(|_| Error::Diverged { iteration: iter })?;
        let (_, g_phys) = param_gradient(&net, &colloc.points, |i, out| {
            let (r, _) = problem.residual(out, colloc.points[i]);
            (phys_w * r * r, [0.0, 0.0, 2.0 * phys_w * r, 0.0])
        })
        .map_err(|_| Error::Diverged { iteration: iter })?;
        grads.add_assign(&g_phys);
        adam.apply(&mut net, &grads)?;

        if iter % 100 == 0 || iter == cfg.max_iters {
            let report = pinn_loss(&problem, &net, &colloc.points, &data, cfg.lambda)
                .map_err(|_| Error::Diverged { iteration: iter })?;
            history.push((iter, report));
        }
    }

    let final_report = history.last().unwrap().1;
    if !(final_report.l_pinn < initial.l_pinn) {
        return Err(Error::NoProgress {
            initial: initial.l_pinn,
            final_loss: final_report.l_pinn,
        });
    }
    Ok((net, history))
}

/// 20 log-spaced amplitudes in [1e-3, 1e-1].
pub fn default_delta_grid() -> Vec<f64> {
    (0..20).map(|i| 10f64.powf(-3.0 + 2.0 * i as f64 / 19.0)).collect()
}

/// Default N_f grid for the concentration study.
pub const DEFAULT_CONCENTRATION_GRID: [usize; 4] = [20, 50, 100, 200];
/// Default resampling count per N_f.
pub const DEFAULT_TRIALS: usize = 50;
/// Default N_f grid for the generalization study.
pub const DEFAULT_GENERALIZATION_GRID: [usize; 7] = [10, 20, 40, 80, 120, 160, 200];
/// Default trained networks per N_f in the generalization study.
pub const DEFAULT_SEEDS_PER_NF: usize = 3;

/// Sweep the perturbation amplitude over `delta_grid`, measuring the exact
/// loss changes of u + delta*sin(k pi x) on the training sample sets and
/// tabulating them against the closed-form bound.
///
/// The perturbation is applied functionally — the network's weights are
/// never touched.
pub fn perturbation_study(
    net: &Mlp,
    cfg: &TrainConfig,
    delta_grid: &[f64],
) -> Result<PerturbationStudy> {
    cfg.validate()?;
    if delta_grid.is_empty() {
        return Err(Error::InvalidArgument("amplitude grid must be non-empty".into()));
    }
    if delta_grid.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidArgument(
            "amplitude grid must contain finite non-negative values".into(),
        ));
    }
    if delta_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("amplitude grid must be sorted ascending".into()));
    }

    let problem = cfg.problem()?;
    let colloc = training_collocation(cfg)?;
    let data = training_data(cfg, &problem)?;
    let base = pinn_loss(&problem, net, &colloc.points, &data, cfg.lambda)?;

    let mut rows = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let field = Perturbed {
            base: net,
            bump: SinePerturbation { amplitude: delta, frequency: cfg.perturb_frequency },
        };
        let rep = pinn_loss(&problem, &field, &colloc.points, &data, cfg.lambda)?;
        let d_lu = (rep.l_u - base.l_u).abs();
        let d_lf = (rep.l_f - base.l_f).abs();
        let d_total = (rep.l_pinn - base.l_pinn).abs();
        let bound =
            combined_bound(delta, base.s_theta, cfg.lambda, problem.operator_constant_c)?;
        let ratio = if bound > 0.0 { d_total / bound } else { 0.0 };
        rows.push(PerturbationRow { delta, d_lu, d_lf, d_total, bound, ratio });
    }
    Ok(PerturbationStudy { base, rows })
}

/// Re-draw the collocation set `trials` times per N_f with the network
/// frozen, recording the empirical physics loss each time, and fit the
/// scaling of its standard deviation.
pub fn concentration_study(
    net: &Mlp,
    cfg: &TrainConfig,
    nf_grid: &[usize],
    trials: usize,
) -> Result<ConcentrationStudy> {
    cfg.validate()?;
    if trials < 2 {
        return Err(Error::InvalidArgument("need at least 2 trials for a std".into()));
    }
    if nf_grid.is_empty() || nf_grid.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument("N_f grid must contain positive counts".into()));
    }

    let problem = cfg.problem()?;
    let master = derive_seed(cfg.seed, STREAM_CONCENTRATION);
    let mut rows = Vec::with_capacity(nf_grid.len() * trials);
    let mut aggregates = Vec::with_capacity(nf_grid.len());
    for (gi, &n_f) in nf_grid.iter().enumerate() {
        let mut values = Vec::with_capacity(trials);
        for trial in 0..trials {
            let seed = derive_seed(master, (gi * trials + trial) as u64);
            let colloc = sample_collocation(n_f, seed)?;
            let l_f = physics_loss(&problem, net, &colloc.points)?;
            rows.push(ConcentrationRow { n_f, trial, l_f });
            values.push(l_f);
        }
        let mean = values.iter().sum::<f64>() / trials as f64;
        let var =
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (trials - 1) as f64;
        aggregates.push(ConcentrationAgg { n_f, mean, std: var.sqrt() });
    }

    let pts: Vec<(f64, f64)> =
        aggregates.iter().map(|a| (a.n_f as f64, a.std)).collect();
    let fit = fit_loglog_slope(&pts)?;
    Ok(ConcentrationStudy { rows, aggregates, fit })
}

/// Train a fresh network for every (N_f, seed index) cell and relate the
/// final Sobolev-type loss to the uniform error. Cells whose training
/// fails are reported and skipped; the slope is fitted on the survivors.
pub fn generalization_study(
    cfg: &TrainConfig,
    nf_grid: &[usize],
    seeds_per_nf: usize,
) -> Result<GeneralizationStudy> {
    cfg.validate()?;
    if seeds_per_nf == 0 {
        return Err(Error::InvalidArgument("need at least one seed per N_f".into()));
    }
    if nf_grid.is_empty() || nf_grid.iter().any(|&n| !(10..=200).contains(&n)) {
        return Err(Error::InvalidArgument(
            "generalization N_f grid entries must lie in [10, 200]".into(),
        ));
    }

    let master = derive_seed(cfg.seed, STREAM_GENERALIZATION);
    let cells: Vec<(usize, usize, usize)> = nf_grid
        .iter()
        .enumerate()
        .flat_map(|(gi, &n_f)| {
            (0..seeds_per_nf).map(move |si| (gi * seeds_per_nf + si, n_f, si))
        })
        .collect();

    // Cells are independent; the collect preserves cell order, so the
    // output is identical no matter how rayon schedules the work.
    let outcomes: Vec<std::result::Result<GeneralizationRow, CellFailure>> = cells
        .par_iter()
        .map(|&(index, n_f, si)| {
            let cell_cfg = TrainConfig {
                n_f,
                seed: derive_seed(master, index as u64),
                ..cfg.clone()
            };
            match train_pinn(&cell_cfg) {
                Ok((_, history)) => {
                    let last = history.last().unwrap().1;
                    Ok(GeneralizationRow { n_f, seed: si, l_s: last.l_s, c0_error: last.c0_error })
                }
                Err(e) => Err(CellFailure { n_f, seed: si, message: e.to_string() }),
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(fail) => failures.push(fail),
        }
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.l_s, r.c0_error)).collect();
    let fit = fit_loglog_slope(&pts)?;
    Ok(GeneralizationStudy { rows, failures, fit })
}

/// Ordinary least squares of ln(y) against ln(x).
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::InvalidArgument(
            "log-log fit requires strictly positive finite coordinates".into(),
        ));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "slope fit needs at least two distinct x values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let r_squared =
        if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(SlopeFit { slope, intercept, r_squared, n_points: points.len() })
}
