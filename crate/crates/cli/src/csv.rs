//! CSV emission and parsing for the study artifacts.
//!
//! All files share one convention: a header row, comma separation, LF line
//! endings, and floats printed with 12 significant digits in scientific
//! notation (`{:.11e}`). Twelve digits over-resolves every quantity the
//! studies report while keeping the files stable: parsing an emitted file
//! and re-emitting it reproduces the bytes exactly.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use pinnlab_core::experiments::{
    ConcentrationAgg, ConcentrationRow, GeneralizationRow, PerturbationRow,
};
use pinnlab_core::loss::LossReport;

/// A float with 12 significant decimal digits, e.g. `1.10000000000e-1`.
pub fn format_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

/// Write `rows` under `header`, rejecting any row whose width differs
/// from the header's.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + 64);
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            bail!(
                "row {i} has {} fields but the schema `{}` has {}",
                row.len(),
                header.join(","),
                header.len()
            );
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Schema: `delta,d_lu,d_lf,d_total,bound,ratio`.
pub fn write_perturbation_csv(path: &Path, rows: &[PerturbationRow]) -> Result<()> {
    let header = ["delta", "d_lu", "d_lf", "d_total", "bound", "ratio"];
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            [r.delta, r.d_lu, r.d_lf, r.d_total, r.bound, r.ratio]
                .iter()
                .map(|&v| format_sig12(v))
                .collect()
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Schema: `n_f,trial,l_f`.
pub fn write_concentration_csv(path: &Path, rows: &[ConcentrationRow]) -> Result<()> {
    let header = ["n_f", "trial", "l_f"];
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.n_f.to_string(), r.trial.to_string(), format_sig12(r.l_f)])
        .collect();
    write_csv(path, &header, &rows)
}

/// Schema: `n_f,mean,std`.
pub fn write_concentration_agg_csv(path: &Path, rows: &[ConcentrationAgg]) -> Result<()> {
    let header = ["n_f", "mean", "std"];
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.n_f.to_string(), format_sig12(r.mean), format_sig12(r.std)])
        .collect();
    write_csv(path, &header, &rows)
}

/// Schema: `n_f,seed,l_s,c0_error`.
pub fn write_generalization_csv(path: &Path, rows: &[GeneralizationRow]) -> Result<()> {
    let header = ["n_f", "seed", "l_s", "c0_error"];
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n_f.to_string(),
                r.seed.to_string(),
                format_sig12(r.l_s),
                format_sig12(r.c0_error),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Schema: `iter,l_u,l_f,l_pinn,l1_data,l1_residual,s_theta,l_s,c0_error`.
pub fn write_history_csv(path: &Path, history: &[(usize, LossReport)]) -> Result<()> {
    let header =
        ["iter", "l_u", "l_f", "l_pinn", "l1_data", "l1_residual", "s_theta", "l_s", "c0_error"];
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|(iter, rep)| {
            let mut row = vec![iter.to_string()];
            row.extend(
                [
                    rep.l_u,
                    rep.l_f,
                    rep.l_pinn,
                    rep.l1_data,
                    rep.l1_residual,
                    rep.s_theta,
                    rep.l_s,
                    rep.c0_error,
                ]
                .iter()
                .map(|&v| format_sig12(v)),
            );
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// A parsed CSV: header plus rectangular string rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// All values of the named column, parsed as floats.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("no column `{name}` in header `{}`", self.header.join(",")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[idx]
                    .parse()
                    .map_err(|e| anyhow!("row {i}, column `{name}`: bad float `{}` ({e})", row[idx]))
            })
            .collect()
    }
}

/// Read a CSV written by this module (no quoting: fields never contain
/// commas). Rejects ragged rows.
pub fn read_csv(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| anyhow!("{}: empty file, expected a header row", path.display()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            bail!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                i + 1,
                row.len(),
                header.len()
            );
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn formats_12_significant_digits() {
        assert_eq!(format_sig12(0.11), "1.10000000000e-1");
        assert_eq!(format_sig12(0.0), "0.00000000000e0");
        assert_eq!(format_sig12(-2.5e-7), "-2.50000000000e-7");
        assert_eq!(format_sig12(std::f64::consts::PI), "3.14159265359e0");
    }

    #[test]
    fn twelve_digit_round_trip_is_stable() {
        // parse(format(v)) re-formatted must give the identical string: the
        // 12-digit decimal is itself the nearest 12-digit decimal to the
        // float it parses to.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let v: f64 = rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-12..12));
            let s = format_sig12(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(format_sig12(back), s, "v = {v:?}");
            assert!((back - v).abs() <= v.abs() * 1e-11);
        }
    }

    #[test]
    fn empty_rows_give_header_only_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_perturbation_csv(&path, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "delta,d_lu,d_lf,d_total,bound,ratio\n");
    }

    #[test]
    fn lf_endings_and_no_carriage_returns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rows = vec![
            ConcentrationRow { n_f: 20, trial: 0, l_f: 0.5 },
            ConcentrationRow { n_f: 20, trial: 1, l_f: 0.25 },
        ];
        write_concentration_csv(&path, &rows).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(!bytes.contains(&b'\r'));
        assert_eq!(*bytes.last().unwrap(), b'\n');
        assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 3);
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let err = write_csv(&path, &["a", "b"], &[vec!["1".into()]]).unwrap_err();
        assert!(err.to_string().contains("2"), "{err}");
        assert!(!path.exists());
    }

    #[test]
    fn io_errors_name_the_path() {
        let err = write_csv(Path::new("/nonexistent-dir/x.csv"), &["a"], &[])
            .map(|_| ())
            .unwrap_err();
        assert!(format!("{err:#}").contains("/nonexistent-dir/x.csv"));
        let err = read_csv(Path::new("/nonexistent-dir/x.csv")).map(|_| ()).unwrap_err();
        assert!(format!("{err:#}").contains("/nonexistent-dir/x.csv"));
    }

    #[test]
    fn emitted_files_parse_back_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let rows = vec![
            pinnlab_core::experiments::PerturbationRow {
                delta: 1e-3,
                d_lu: 2.000123e-5,
                d_lf: 3.5e-4,
                d_total: 3.700135e-4,
                bound: 8.1e-4,
                ratio: 0.456790123456,
            },
            pinnlab_core::experiments::PerturbationRow {
                delta: 1e-2,
                d_lu: 0.0,
                d_lf: 1.0 / 3.0,
                d_total: 1.0 / 3.0,
                bound: 0.5,
                ratio: 2.0 / 3.0,
            },
        ];
        write_perturbation_csv(&path, &rows).unwrap();
        let before = std::fs::read(&path).unwrap();

        // Parse every cell, rebuild rows from the parsed floats, re-emit.
        let table = read_csv(&path).unwrap();
        let rebuilt: Vec<pinnlab_core::experiments::PerturbationRow> = (0..table.rows.len())
            .map(|i| pinnlab_core::experiments::PerturbationRow {
                delta: table.column("delta").unwrap()[i],
                d_lu: table.column("d_lu").unwrap()[i],
                d_lf: table.column("d_lf").unwrap()[i],
                d_total: table.column("d_total").unwrap()[i],
                bound: table.column("bound").unwrap()[i],
                ratio: table.column("ratio").unwrap()[i],
            })
            .collect();
        write_perturbation_csv(&path, &rebuilt).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), before);
    }

    #[test]
    fn read_csv_rejects_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.csv");
        std::fs::write(&path, "a,b\n1,2\n3\n").unwrap();
        let err = read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn column_lookup_errors_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,b\n1,x\n").unwrap();
        let table = read_csv(&path).unwrap();
        assert_eq!(table.column("a").unwrap(), vec![1.0]);
        assert!(table.column("c").unwrap_err().to_string().contains("`c`"));
        assert!(table.column("b").unwrap_err().to_string().contains("bad float"));
    }
}
