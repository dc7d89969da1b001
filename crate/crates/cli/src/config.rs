//! Flat `key = value` run configuration.
//!
//! The format is deliberately trivial: one key per line, `#` starts a
//! comment, blank lines are ignored, and every key has a default so an
//! empty file is a valid configuration. Unknown keys are rejected with
//! the offending line number so typos cannot silently fall back to a
//! default. `to_text` writes every key back out with its resolved value,
//! and floats use the shortest decimal that round-trips, so a stored
//! config re-parses to exactly the settings that produced it.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use pinnlab_core::experiments::{
    TrainConfig, DEFAULT_CONCENTRATION_GRID, DEFAULT_GENERALIZATION_GRID, DEFAULT_SEEDS_PER_NF,
    DEFAULT_TRIALS,
};

/// Everything the binary can be told: training hyper-parameters plus the
/// knobs of the three studies and the certificate tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub train: TrainConfig,
    /// Smallest perturbation amplitude of the sweep.
    pub delta_min: f64,
    /// Largest perturbation amplitude of the sweep.
    pub delta_max: f64,
    /// Number of log-spaced amplitudes.
    pub delta_steps: usize,
    /// Resampling trials per collocation count in the concentration study.
    pub trials: usize,
    /// Collocation counts for the concentration study.
    pub conc_nf_grid: Vec<usize>,
    /// Collocation counts for the generalization study.
    pub gen_nf_grid: Vec<usize>,
    /// Trained networks per collocation count in the generalization study.
    pub seeds_per_nf: usize,
    /// Loss-change tolerance the certificate is issued for.
    pub epsilon: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            delta_min: 1e-3,
            delta_max: 1e-1,
            delta_steps: 20,
            trials: DEFAULT_TRIALS,
            conc_nf_grid: DEFAULT_CONCENTRATION_GRID.to_vec(),
            gen_nf_grid: DEFAULT_GENERALIZATION_GRID.to_vec(),
            seeds_per_nf: DEFAULT_SEEDS_PER_NF,
            epsilon: 1e-2,
        }
    }
}

impl Settings {
    /// Cross-field checks that the individual setters cannot do.
    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| anyhow!("{e}"))?;
        self.delta_grid()?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            bail!("epsilon must be a positive finite number, got {}", self.epsilon);
        }
        Ok(())
    }

    /// The `delta_steps` log-spaced amplitudes in `[delta_min, delta_max]`.
    pub fn delta_grid(&self) -> Result<Vec<f64>> {
        if !(self.delta_min.is_finite() && self.delta_min > 0.0) {
            bail!("delta_min must be a positive finite number, got {}", self.delta_min);
        }
        if !(self.delta_max.is_finite() && self.delta_max >= self.delta_min) {
            bail!(
                "delta_max must be finite and >= delta_min, got delta_max = {}, delta_min = {}",
                self.delta_max,
                self.delta_min
            );
        }
        if self.delta_steps < 2 {
            bail!("delta_steps must be >= 2, got {}", self.delta_steps);
        }
        let (a, b) = (self.delta_min.log10(), self.delta_max.log10());
        let n = (self.delta_steps - 1) as f64;
        Ok((0..self.delta_steps)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / n))
            .collect())
    }
}

/// Parse a whole config file; errors carry the 1-based line number.
pub fn parse_settings(text: &str) -> Result<Settings> {
    let mut settings = Settings::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {line_no}: expected `key = value`, got `{line}`");
        };
        apply_key(&mut settings, key.trim(), value.trim())
            .with_context(|| format!("config line {line_no}"))?;
    }
    Ok(settings)
}

/// Apply one `KEY=VALUE` command-line override.
pub fn apply_override(settings: &mut Settings, pair: &str) -> Result<()> {
    let Some((key, value)) = pair.split_once('=') else {
        bail!("override `{pair}`: expected KEY=VALUE");
    };
    apply_key(settings, key.trim(), value.trim()).with_context(|| format!("override `{pair}`"))
}

/// Set one key; shared by the file parser and `--set` overrides.
fn apply_key(s: &mut Settings, key: &str, value: &str) -> Result<()> {
    match key {
        "layer_sizes" => s.train.layer_sizes = usize_list(key, value)?,
        "lr" => s.train.lr = num(key, value)?,
        "max_iters" => s.train.max_iters = num(key, value)?,
        "n_f" => s.train.n_f = num(key, value)?,
        "lambda" => s.train.lambda = num(key, value)?,
        "seed" => s.train.seed = num(key, value)?,
        "perturb_frequency" => s.train.perturb_frequency = num(key, value)?,
        "interior_data_n" => s.train.interior_data_n = num(key, value)?,
        "delta_min" => s.delta_min = num(key, value)?,
        "delta_max" => s.delta_max = num(key, value)?,
        "delta_steps" => s.delta_steps = num(key, value)?,
        "trials" => s.trials = num(key, value)?,
        "conc_nf_grid" => s.conc_nf_grid = usize_list(key, value)?,
        "gen_nf_grid" => s.gen_nf_grid = usize_list(key, value)?,
        "seeds_per_nf" => s.seeds_per_nf = num(key, value)?,
        "epsilon" => s.epsilon = num(key, value)?,
        other => bail!("unknown key `{other}`"),
    }
    Ok(())
}

fn num<T>(key: &str, value: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value for `{key}`: `{value}` ({e})"))
}

/// Comma-separated positive integers, e.g. `20,50,100,200`.
pub fn usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let items: Vec<usize> = value
        .split(',')
        .map(|part| num::<usize>(key, part.trim()))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("invalid value for `{key}`: empty list");
    }
    Ok(items)
}

fn join_usizes(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Serialize every key with its resolved value. Floats are written with
/// `{}` (shortest round-tripping decimal), so `parse_settings(to_text(s))`
/// reproduces `s` exactly.
pub fn to_text(s: &Settings) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# resolved run configuration (all keys explicit)");
    let _ = writeln!(out, "layer_sizes = {}", join_usizes(&s.train.layer_sizes));
    let _ = writeln!(out, "lr = {}", s.train.lr);
    let _ = writeln!(out, "max_iters = {}", s.train.max_iters);
    let _ = writeln!(out, "n_f = {}", s.train.n_f);
    let _ = writeln!(out, "lambda = {}", s.train.lambda);
    let _ = writeln!(out, "seed = {}", s.train.seed);
    let _ = writeln!(out, "perturb_frequency = {}", s.train.perturb_frequency);
    let _ = writeln!(out, "interior_data_n = {}", s.train.interior_data_n);
    let _ = writeln!(out, "delta_min = {}", s.delta_min);
    let _ = writeln!(out, "delta_max = {}", s.delta_max);
    let _ = writeln!(out, "delta_steps = {}", s.delta_steps);
    let _ = writeln!(out, "trials = {}", s.trials);
    let _ = writeln!(out, "conc_nf_grid = {}", join_usizes(&s.conc_nf_grid));
    let _ = writeln!(out, "gen_nf_grid = {}", join_usizes(&s.gen_nf_grid));
    let _ = writeln!(out, "seeds_per_nf = {}", s.seeds_per_nf);
    let _ = writeln!(out, "epsilon = {}", s.epsilon);
    out
}
