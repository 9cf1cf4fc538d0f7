//! Convergence reports in the layout of the paper's tables, and their
//! file emission (CSV, JSON metadata, log-log plot data) with atomic
//! writes.

use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub price: f64,
    pub h: f64,
    pub n: usize,
    pub elapsed_s: f64,
    /// β_i = log₂((C_i − C_ref)/(C_{i+1} − C_ref)); absent on the last row.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub study: String,
    pub rows: Vec<ConvergenceRow>,
    pub c_ref: f64,
    pub c_ref_provenance: String,
    pub metadata: serde_json::Value,
}

impl ConvergenceReport {
    /// Assemble rows from ladder results, computing β against c_ref.
    pub fn new(
        study: &str,
        ladder: &[(usize, f64, f64, f64)], // (N, h, price, elapsed)
        c_ref: f64,
        provenance: &str,
        metadata: serde_json::Value,
    ) -> Self {
        let mut rows: Vec<ConvergenceRow> = ladder
            .iter()
            .map(|&(n, h, price, elapsed_s)| ConvergenceRow {
                price,
                h,
                n,
                elapsed_s,
                beta: None,
            })
            .collect();
        for i in 0..rows.len() {
            if i + 1 < rows.len() {
                let e0 = rows[i].price - c_ref;
                let e1 = rows[i + 1].price - c_ref;
                if e0 != 0.0 && e1 != 0.0 && (e0 / e1) > 0.0 {
                    rows[i].beta = Some((e0 / e1).log2());
                }
            }
        }
        ConvergenceReport {
            study: study.to_string(),
            rows,
            c_ref,
            c_ref_provenance: provenance.to_string(),
            metadata,
        }
    }

    pub fn betas(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.beta).collect()
    }

    /// CSV in the paper's column order: C, h, N, t_e, beta.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("C,h,N,t_e,beta\n");
        for r in &self.rows {
            let beta = r.beta.map(|b| format!("{b:.5}")).unwrap_or_default();
            out.push_str(&format!(
                "{:.8},{:.6},{},{:.5},{}\n",
                r.price, r.h, r.n, r.elapsed_s, beta
            ));
        }
        out
    }

    /// Pairs (h, |C − C_ref|) for log-log plotting.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::from("h abs_error\n");
        for r in &self.rows {
            out.push_str(&format!("{:.6e} {:.6e}\n", r.h, (r.price - self.c_ref).abs()));
        }
        out
    }

    /// Write CSV + JSON metadata + plot data under `dir` with the study
    /// name as the file stem.
    pub fn emit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = self.study.replace([' ', '/'], "_");
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        let plot = dir.join(format!("{stem}_plot.dat"));
        atomic_write(&csv, self.to_csv().as_bytes())?;
        atomic_write(&json, serde_json::to_string_pretty(self).unwrap().as_bytes())?;
        atomic_write(&plot, self.to_plot_data().as_bytes())?;
        Ok(vec![csv, json, plot])
    }
}

/// Write through a temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_column_matches_definition() {
        // errors 8, 2, 0.5 against ref 1: ratios 4 → beta 2
        let ladder = vec![(100, 0.4, 9.0, 0.0), (200, 0.2, 3.0, 0.0), (400, 0.1, 1.5, 0.0)];
        let rep = ConvergenceReport::new("t", &ladder, 1.0, "test", serde_json::json!({}));
        let betas = rep.betas();
        assert!((betas[0].unwrap() - 2.0).abs() < 1e-12);
        assert!((betas[1].unwrap() - 2.0).abs() < 1e-12);
        assert!(betas[2].is_none());
    }

    #[test]
    fn two_row_ladder_has_single_beta() {
        let ladder = vec![(100, 0.4, 9.0, 0.0), (200, 0.2, 3.0, 0.0)];
        let rep = ConvergenceReport::new("t", &ladder, 1.0, "test", serde_json::json!({}));
        assert_eq!(rep.betas().iter().filter(|b| b.is_some()).count(), 1);
    }

    #[test]
    fn empty_ladder_gives_header_only_csv() {
        let rep = ConvergenceReport::new("t", &[], 0.0, "test", serde_json::json!({}));
        assert_eq!(rep.to_csv(), "C,h,N,t_e,beta\n");
    }

    #[test]
    fn emit_writes_three_files() {
        let dir = std::env::temp_dir().join(format!("levy_pide_test_{}", std::process::id()));
        let ladder = vec![(100, 0.4, 9.0, 0.01), (200, 0.2, 3.0, 0.02)];
        let rep = ConvergenceReport::new("unit emit", &ladder, 1.0, "test", serde_json::json!({"k": 1}));
        let files = rep.emit(&dir).unwrap();
        assert_eq!(files.len(), 3);
        for f in &files {
            assert!(f.exists());
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
