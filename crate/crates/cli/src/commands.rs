//! Subcommand implementations.
//!
//! Artifact layout inside the output directory:
//!
//! | file                    | written by    | read by               |
//! |-------------------------|---------------|-----------------------|
//! | `config.txt`            | `train`       | every later command   |
//! | `checkpoint.txt`        | `train`       | certify/perturb/concentrate |
//! | `history.csv`           | `train`       | —                     |
//! | `certificate.txt`       | `certify`     | —                     |
//! | `perturbation.csv/svg`  | `perturb`     | `report`              |
//! | `concentration*.csv/svg`| `concentrate` | `report`              |
//! | `generalization.csv/svg`| `generalize`  | `report`              |
//! | `report.md`             | `report`      | —                     |
//!
//! Commands that study a trained network (`certify`, `perturb`,
//! `concentrate`) always read the stored `config.txt`, so their sample
//! sets are exactly the ones the checkpoint was trained on.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pinnlab_core::bounds::StabilityCertificate;
use pinnlab_core::experiments::{
    concentration_study, fit_loglog_slope, generalization_study, perturbation_study, train_pinn,
    training_collocation, training_data,
};
use pinnlab_core::loss::pinn_loss;
use pinnlab_core::net::Mlp;
use pinnlab_core::pde::DEFAULT_SUP_GRID;

use crate::checkpoint;
use crate::config::{self, Settings};
use crate::csv;
use crate::svg::{self, Axes, Series};

/// Slack added to the closed-form bound before a measured change counts
/// as a violation; absorbs the last-bit rounding of the comparison.
pub const BOUND_SLACK: f64 = 1e-12;

pub fn config_path(out_dir: &Path) -> PathBuf {
    out_dir.join("config.txt")
}

pub fn checkpoint_path(out_dir: &Path) -> PathBuf {
    out_dir.join("checkpoint.txt")
}

/// Settings for commands that may start from scratch (`train`,
/// `generalize` without a stored run): explicit file or defaults, then
/// `--set` overrides, then `--seed`.
pub fn resolve_fresh(
    config_file: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<Settings> {
    let mut settings = match config_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            config::parse_settings(&text)
                .with_context(|| format!("config {}", path.display()))?
        }
        None => Settings::default(),
    };
    finish_resolve(&mut settings, overrides, seed)?;
    Ok(settings)
}

/// Settings stored by a previous `train` in `out_dir`, plus overrides.
pub fn load_stored_settings(
    out_dir: &Path,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<Settings> {
    let path = config_path(out_dir);
    if !path.exists() {
        bail!(
            "missing config {}; run `pinnlab train --out {}` first",
            path.display(),
            out_dir.display()
        );
    }
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let mut settings =
        config::parse_settings(&text).with_context(|| format!("config {}", path.display()))?;
    finish_resolve(&mut settings, overrides, seed)?;
    Ok(settings)
}

/// The stored settings and trained network of a previous `train`.
pub fn load_stored_run(
    out_dir: &Path,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<(Settings, Mlp)> {
    let ckpt = checkpoint_path(out_dir);
    if !ckpt.exists() {
        bail!(
            "missing checkpoint {}; run `pinnlab train --out {}` first",
            ckpt.display(),
            out_dir.display()
        );
    }
    let settings = load_stored_settings(out_dir, overrides, seed)?;
    let net = checkpoint::load(&ckpt)?;
    Ok((settings, net))
}

fn finish_resolve(settings: &mut Settings, overrides: &[String], seed: Option<u64>) -> Result<()> {
    for pair in overrides {
        config::apply_override(settings, pair)?;
    }
    if let Some(seed) = seed {
        settings.train.seed = seed;
    }
    settings.validate()
}

/// Train the configured network; store checkpoint, loss history, and the
/// resolved config.
pub fn cmd_train(out_dir: &Path, settings: &Settings) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let (net, history) = train_pinn(&settings.train)?;
    let (last_iter, last) = *history.last().expect("training history is never empty");

    checkpoint::save(&checkpoint_path(out_dir), &net)?;
    let history_path = out_dir.join("history.csv");
    csv::write_history_csv(&history_path, &history)?;
    fs::write(config_path(out_dir), config::to_text(settings))
        .with_context(|| format!("writing {}", config_path(out_dir).display()))?;

    println!("iterations = {last_iter}");
    println!("l_pinn = {:e}", last.l_pinn);
    println!("c0_error = {:e}", last.c0_error);
    println!("s_theta = {:e}", last.s_theta);
    println!("wrote {}", checkpoint_path(out_dir).display());
    println!("wrote {}", history_path.display());
    println!("wrote {}", config_path(out_dir).display());
    Ok(())
}

/// Issue a perturbation-safety certificate for the stored network.
pub fn cmd_certify(
    out_dir: &Path,
    settings: &Settings,
    net: &Mlp,
    epsilon: Option<f64>,
) -> Result<()> {
    let epsilon = epsilon.unwrap_or(settings.epsilon);
    let problem = settings.train.problem()?;
    let colloc = training_collocation(&settings.train)?;
    let data = training_data(&settings.train, &problem)?;
    let report = pinn_loss(&problem, net, &colloc.points, &data, settings.train.lambda)?;
    let m_f = problem.estimate_sup_residual(net, DEFAULT_SUP_GRID)?;
    let m_d = problem.estimate_sup_mismatch(net, DEFAULT_SUP_GRID)?;
    let cert = StabilityCertificate::new(
        report.s_theta,
        problem.operator_constant_c,
        settings.train.lambda,
        m_f,
        m_d,
        epsilon,
    )?;

    let text = certificate_text(&cert);
    let path = out_dir.join("certificate.txt");
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    print!("{text}");
    println!("wrote {}", path.display());
    Ok(())
}

fn certificate_text(cert: &StabilityCertificate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "s_theta = {:e}", cert.s_theta);
    let _ = writeln!(out, "c = {:e}", cert.c);
    let _ = writeln!(out, "lambda = {:e}", cert.lambda);
    let _ = writeln!(out, "m_f = {:e}", cert.m_f);
    let _ = writeln!(out, "m_d = {:e}", cert.m_d);
    let _ = writeln!(out, "delta_max = {:e}", cert.delta_max);
    let _ = writeln!(out, "epsilon_tol = {:e}", cert.epsilon_tol);
    out
}

/// Sweep the perturbation amplitude on the stored network.
pub fn cmd_perturb(out_dir: &Path, settings: &Settings, net: &Mlp) -> Result<()> {
    let grid = settings.delta_grid()?;
    let study = perturbation_study(net, &settings.train, &grid)?;

    let csv_path = out_dir.join("perturbation.csv");
    csv::write_perturbation_csv(&csv_path, &study.rows)?;

    let measured = Series {
        label: "measured loss change".to_string(),
        points: study.rows.iter().map(|r| (r.delta, r.d_total)).collect(),
    };
    let bound = Series {
        label: "closed-form bound".to_string(),
        points: study.rows.iter().map(|r| (r.delta, r.bound)).collect(),
    };
    let svg_path = out_dir.join("perturbation.svg");
    svg::write_svg_plot(
        &svg_path,
        "Loss change under output perturbation",
        "perturbation amplitude",
        "PINN loss change",
        Axes::LogLog,
        &[measured, bound],
    )?;

    let max_ratio = study.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let violations =
        study.rows.iter().filter(|r| r.d_total > r.bound + BOUND_SLACK).count();
    println!("rows = {}", study.rows.len());
    println!("max_ratio = {max_ratio:e}");
    println!("bound_violations = {violations}");
    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

/// Resample collocation sets around the stored (frozen) network.
pub fn cmd_concentrate(
    out_dir: &Path,
    settings: &Settings,
    net: &Mlp,
    trials: Option<usize>,
    nf_grid: Option<Vec<usize>>,
) -> Result<()> {
    let trials = trials.unwrap_or(settings.trials);
    let grid = nf_grid.unwrap_or_else(|| settings.conc_nf_grid.clone());
    let study = concentration_study(net, &settings.train, &grid, trials)?;

    let csv_path = out_dir.join("concentration.csv");
    csv::write_concentration_csv(&csv_path, &study.rows)?;
    let agg_path = out_dir.join("concentration_agg.csv");
    csv::write_concentration_agg_csv(&agg_path, &study.aggregates)?;

    let std_series = Series {
        label: "std of empirical physics loss".to_string(),
        points: study.aggregates.iter().map(|a| (a.n_f as f64, a.std)).collect(),
    };
    let svg_path = out_dir.join("concentration.svg");
    svg::write_svg_plot(
        &svg_path,
        "Physics-loss fluctuation vs collocation count",
        "collocation points",
        "std of empirical physics loss",
        Axes::LogLog,
        &[std_series],
    )?;

    for agg in &study.aggregates {
        println!("n_f = {}, mean = {:e}, std = {:e}", agg.n_f, agg.mean, agg.std);
    }
    println!("slope = {:e}", study.fit.slope);
    println!("r_squared = {:e}", study.fit.r_squared);
    println!("wrote {}", csv_path.display());
    println!("wrote {}", agg_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

/// Train one network per (collocation count, seed) cell and relate the
/// final Sobolev-type loss to the uniform error.
pub fn cmd_generalize(
    out_dir: &Path,
    settings: &Settings,
    nf_grid: Option<Vec<usize>>,
    seeds_per_nf: Option<usize>,
) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let grid = nf_grid.unwrap_or_else(|| settings.gen_nf_grid.clone());
    let seeds = seeds_per_nf.unwrap_or(settings.seeds_per_nf);
    let study = generalization_study(&settings.train, &grid, seeds)?;

    let csv_path = out_dir.join("generalization.csv");
    csv::write_generalization_csv(&csv_path, &study.rows)?;

    let mut points: Vec<(f64, f64)> =
        study.rows.iter().map(|r| (r.l_s, r.c0_error)).collect();
    points.sort_by(|a, b| a.partial_cmp(b).expect("loss values are finite"));
    let cells = Series { label: "trained cells".to_string(), points };
    let svg_path = out_dir.join("generalization.svg");
    svg::write_svg_plot(
        &svg_path,
        "Uniform error vs Sobolev-type loss",
        "final Sobolev-type loss",
        "uniform error",
        Axes::LogLog,
        &[cells],
    )?;

    for failure in &study.failures {
        eprintln!(
            "warning: cell n_f = {}, seed = {} failed: {}",
            failure.n_f, failure.seed, failure.message
        );
    }
    println!("cells = {}", study.rows.len());
    println!("failed_cells = {}", study.failures.len());
    println!("slope = {:e}", study.fit.slope);
    println!("r_squared = {:e}", study.fit.r_squared);
    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

/// Aggregate whatever study CSVs exist into one markdown summary.
pub fn cmd_report(out_dir: &Path) -> Result<()> {
    let perturbation = report_perturbation(out_dir)?;
    let concentration = report_concentration(out_dir)?;
    let generalization = report_generalization(out_dir)?;
    if perturbation.is_none() && concentration.is_none() && generalization.is_none() {
        bail!(
            "no study CSVs found in {}; run `perturb`, `concentrate`, or `generalize` first",
            out_dir.display()
        );
    }

    let mut md = String::new();
    md.push_str("# PINN stability lab report\n\n");

    // Headline table: one row per study, mirroring the three validated
    // claims (bound tightness, fluctuation scaling, error-vs-loss slope).
    md.push_str("| quantity | value |\n|---|---|\n");
    let _ = writeln!(
        md,
        "| max measured/bound ratio (amplitudes <= 0.05) | {} |",
        perturbation
            .as_ref()
            .map_or("not run".to_string(), |p| format!("{:.3e}", p.max_ratio_small))
    );
    let _ = writeln!(
        md,
        "| physics-loss std log-log slope vs N_f | {} |",
        concentration
            .as_ref()
            .map_or("not run".to_string(), |c| format!("{:.3}", c.fit.slope))
    );
    let _ = writeln!(
        md,
        "| uniform-error log-log slope vs Sobolev loss | {} |",
        generalization
            .as_ref()
            .map_or("not run".to_string(), |g| format!("{:.3}", g.fit.slope))
    );
    md.push('\n');

    md.push_str("## Output-perturbation sweep\n\n");
    match &perturbation {
        None => md.push_str("Not run — missing `perturbation.csv`.\n\n"),
        Some(p) => {
            let _ = writeln!(md, "- rows: {}", p.rows.len());
            let _ = writeln!(
                md,
                "- bound violations (measured > bound + {BOUND_SLACK:e}): {}",
                p.violations
            );
            let _ = writeln!(md, "- max measured/bound ratio: {:.3e}", p.max_ratio);
            let _ = writeln!(
                md,
                "- max measured/bound ratio for amplitudes <= 0.05: {:.3e}",
                p.max_ratio_small
            );
            md.push('\n');
            md.push_str("| amplitude | measured loss change | bound | ratio |\n|---|---|---|---|\n");
            for row in &p.rows {
                let _ = writeln!(
                    md,
                    "| {:.3e} | {:.3e} | {:.3e} | {:.3e} |",
                    row.0, row.1, row.2, row.3
                );
            }
            md.push('\n');
        }
    }

    md.push_str("## Collocation-resampling concentration\n\n");
    match &concentration {
        None => md.push_str("Not run — missing `concentration_agg.csv`.\n\n"),
        Some(c) => {
            let _ = writeln!(
                md,
                "- log-log slope of std vs N_f: {:.3} (r² = {:.3}, {} points)",
                c.fit.slope, c.fit.r_squared, c.fit.n_points
            );
            let _ = writeln!(
                md,
                "- std strictly decreasing across the grid: {}",
                if c.strictly_decreasing { "yes" } else { "no" }
            );
            md.push('\n');
            md.push_str("| N_f | mean | std |\n|---|---|---|\n");
            for &(n_f, mean, std) in &c.rows {
                let _ = writeln!(md, "| {n_f} | {mean:.3e} | {std:.3e} |");
            }
            md.push('\n');
        }
    }

    md.push_str("## Sobolev-to-uniform generalization\n\n");
    match &generalization {
        None => md.push_str("Not run — missing `generalization.csv`.\n\n"),
        Some(g) => {
            let _ = writeln!(md, "- cells: {}", g.n_cells);
            let _ = writeln!(
                md,
                "- log-log slope of uniform error vs Sobolev loss: {:.3} (r² = {:.3}, {} points)",
                g.fit.slope, g.fit.r_squared, g.fit.n_points
            );
            let _ = writeln!(
                md,
                "- Spearman rank correlation (Sobolev loss, uniform error): {:.3}",
                g.spearman
            );
            let _ = writeln!(
                md,
                "- uniform error range: [{:.3e}, {:.3e}]",
                g.c0_min, g.c0_max
            );
            md.push('\n');
        }
    }

    let path = out_dir.join("report.md");
    fs::write(&path, md).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

struct PerturbationSection {
    rows: Vec<(f64, f64, f64, f64)>,
    violations: usize,
    max_ratio: f64,
    max_ratio_small: f64,
}

fn report_perturbation(out_dir: &Path) -> Result<Option<PerturbationSection>> {
    let path = out_dir.join("perturbation.csv");
    if !path.exists() {
        return Ok(None);
    }
    let table = csv::read_csv(&path)?;
    let delta = table.column("delta")?;
    let d_total = table.column("d_total")?;
    let bound = table.column("bound")?;
    let ratio = table.column("ratio")?;

    let rows: Vec<(f64, f64, f64, f64)> = (0..delta.len())
        .map(|i| (delta[i], d_total[i], bound[i], ratio[i]))
        .collect();
    let violations =
        rows.iter().filter(|r| r.1 > r.2 + BOUND_SLACK).count();
    let max_ratio = ratio.iter().copied().fold(0.0, f64::max);
    let max_ratio_small = rows
        .iter()
        .filter(|r| r.0 <= 0.05)
        .map(|r| r.3)
        .fold(0.0, f64::max);
    Ok(Some(PerturbationSection { rows, violations, max_ratio, max_ratio_small }))
}

struct ConcentrationSection {
    rows: Vec<(f64, f64, f64)>,
    fit: pinnlab_core::experiments::SlopeFit,
    strictly_decreasing: bool,
}

fn report_concentration(out_dir: &Path) -> Result<Option<ConcentrationSection>> {
    let path = out_dir.join("concentration_agg.csv");
    if !path.exists() {
        return Ok(None);
    }
    let table = csv::read_csv(&path)?;
    let n_f = table.column("n_f")?;
    let mean = table.column("mean")?;
    let std = table.column("std")?;
    let rows: Vec<(f64, f64, f64)> =
        (0..n_f.len()).map(|i| (n_f[i], mean[i], std[i])).collect();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.2)).collect();
    let fit = fit_loglog_slope(&pts)?;
    let strictly_decreasing = std.windows(2).all(|w| w[1] < w[0]);
    Ok(Some(ConcentrationSection { rows, fit, strictly_decreasing }))
}

struct GeneralizationSection {
    n_cells: usize,
    fit: pinnlab_core::experiments::SlopeFit,
    spearman: f64,
    c0_min: f64,
    c0_max: f64,
}

fn report_generalization(out_dir: &Path) -> Result<Option<GeneralizationSection>> {
    let path = out_dir.join("generalization.csv");
    if !path.exists() {
        return Ok(None);
    }
    let table = csv::read_csv(&path)?;
    let l_s = table.column("l_s")?;
    let c0 = table.column("c0_error")?;
    let pts: Vec<(f64, f64)> =
        l_s.iter().copied().zip(c0.iter().copied()).collect();
    let fit = fit_loglog_slope(&pts)?;
    let spearman = spearman(&l_s, &c0)
        .ok_or_else(|| anyhow::anyhow!("rank correlation undefined: a column is constant"))?;
    let c0_min = c0.iter().copied().fold(f64::INFINITY, f64::min);
    let c0_max = c0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Some(GeneralizationSection { n_cells: pts.len(), fit, spearman, c0_min, c0_max }))
}

/// Spearman rank correlation with average ranks for ties; `None` when
/// either ranking is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    pearson(&ranks(xs), &ranks(ys))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks; a run of equal values shares the mean rank.
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
