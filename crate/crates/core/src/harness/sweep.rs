use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Experiment;
use crate::error::{Error, Result};
use crate::identify::{fit, training_grams, Method};
use crate::lti::spectrum;
use crate::scoring::CrossValidation;

/// Header of `sweep.csv`.
pub const SWEEP_HEADER: &str = "alpha,method,rho_cl,rho_plant,r2_cl,r2_plant";

/// One (α, method) point: spectral radii of the models fitted on the whole
/// training set and cross-validated scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub method: Method,
    pub rho_cl: f64,
    pub rho_plant: f64,
    pub r2_cl: f64,
    pub r2_plant: f64,
    pub nrmse_cl: f64,
    pub nrmse_plant: f64,
    /// Frobenius norm of the closed-loop Koopman matrix.
    pub uf_norm: f64,
    /// Message of a failed fit; the numeric columns are NaN then.
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(alpha: f64, method: Method, err: &Error) -> Self {
        Self {
            alpha,
            method,
            rho_cl: f64::NAN,
            rho_plant: f64::NAN,
            r2_cl: f64::NAN,
            r2_plant: f64::NAN,
            nrmse_cl: f64::NAN,
            nrmse_plant: f64::NAN,
            uf_norm: f64::NAN,
            error: Some(err.to_string()),
        }
    }
}

/// Fit and cross-validate every configured method at every grid point.
///
/// Gram matrices are built once for the full training set and once per fold.
/// Fits that fail produce NaN rows carrying the error message. Rows are sorted
/// by α, then method name.
pub fn run_sweep(exp: &Experiment) -> Result<Vec<SweepRow>> {
    let cfg = &exp.config;
    let train = &exp.data.train;
    let grams = training_grams(&cfg.lifting, train)?;
    let cv = CrossValidation::new(&cfg.lifting, train, cfg.folds)?;
    let mut rows = Vec::with_capacity(cfg.alpha_grid.count * cfg.methods.len());
    for alpha in cfg.alpha_grid.values() {
        for &method in &cfg.methods {
            let row = fit(method, &grams, &exp.controller, alpha, cfg.options)
                .and_then(|(clk, plant)| {
                    let rho_cl = spectrum(&clk.a_f())?.spectral_radius;
                    let rho_plant = spectrum(&plant.a_p())?.spectral_radius;
                    let p = cv.score(method, &exp.controller, alpha, cfg.options)?;
                    Ok(SweepRow {
                        alpha,
                        method,
                        rho_cl,
                        rho_plant,
                        r2_cl: p.r2_cl,
                        r2_plant: p.r2_plant,
                        nrmse_cl: p.nrmse_cl,
                        nrmse_plant: p.nrmse_plant,
                        uf_norm: clk.u_f.norm(),
                        error: None,
                    })
                })
                .or_else(|e| match e {
                    Error::Singular { .. } | Error::Eigen(_) | Error::NonFinite(_) => {
                        Ok(SweepRow::failed(alpha, method, &e))
                    }
                    other => Err(other),
                })?;
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then_with(|| a.method.name().cmp(b.method.name())));
    Ok(rows)
}

/// Write `sweep.csv` (the six contract columns) and `sweep_detail.csv`
/// (adds NRMSE, ‖Uᶠ‖ and the error message).
pub fn write_sweep_outputs(rows: &[SweepRow], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut main = String::from(SWEEP_HEADER);
    main.push('\n');
    let mut detail = format!("{SWEEP_HEADER},nrmse_cl,nrmse_plant,uf_norm,error\n");
    for r in rows {
        let head = format!(
            "{},{},{},{},{},{}",
            r.alpha,
            r.method.name(),
            r.rho_cl,
            r.rho_plant,
            r.r2_cl,
            r.r2_plant
        );
        main.push_str(&head);
        main.push('\n');
        let err = r.error.as_deref().unwrap_or("").replace(['"', ',', '\n'], " ");
        detail.push_str(&format!("{head},{},{},{},{err}\n", r.nrmse_cl, r.nrmse_plant, r.uf_norm));
    }
    std::fs::write(out_dir.join("sweep.csv"), main)?;
    std::fs::write(out_dir.join("sweep_detail.csv"), detail)?;
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::InvalidArgument(format!("bad number {s:?} in sweep file: {e}")))
}

/// Read a `sweep.csv` or `sweep_detail.csv` back. Columns missing from the
/// short form are NaN.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.clone();
    let expected: Vec<&str> = SWEEP_HEADER.split(',').collect();
    if header.iter().take(expected.len()).ne(expected.iter().copied()) {
        return Err(Error::InvalidArgument(format!(
            "{} does not start with the header {SWEEP_HEADER}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| rec.get(i).map(parse_f64).unwrap_or(Ok(f64::NAN));
        let error = rec.get(9).filter(|s| !s.is_empty()).map(str::to_string);
        rows.push(SweepRow {
            alpha: num(0)?,
            method: rec.get(1).unwrap_or("").parse()?,
            rho_cl: num(2)?,
            rho_plant: num(3)?,
            r2_cl: num(4)?,
            r2_plant: num(5)?,
            nrmse_cl: num(6)?,
            nrmse_plant: num(7)?,
            uf_norm: num(8)?,
            error,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alpha: f64, method: Method, r2_cl: f64) -> SweepRow {
        SweepRow {
            alpha,
            method,
            rho_cl: 0.5,
            rho_plant: 1.5,
            r2_cl,
            r2_plant: f64::NEG_INFINITY,
            nrmse_cl: 0.1,
            nrmse_plant: f64::INFINITY,
            uf_norm: 3.0,
            error: None,
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut failed = SweepRow::failed(0.1, Method::Edmd, &Error::Eigen("x, y".into()));
        failed.uf_norm = f64::NAN;
        let rows = vec![row(1e-3, Method::ClEdmd, 0.9), row(1e-3, Method::Edmd, -0.25), failed];
        write_sweep_outputs(&rows, dir.path()).unwrap();
        let main = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(main.lines().next().unwrap(), SWEEP_HEADER);
        assert_eq!(main.lines().nth(1).unwrap(), "0.001,cl_edmd,0.5,1.5,0.9,-inf");
        let back = read_sweep_csv(&dir.path().join("sweep_detail.csv")).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0], rows[0]);
        assert!(back[2].rho_cl.is_nan());
        assert!(back[2].error.as_deref().unwrap().contains("x  y"));
        let short = read_sweep_csv(&dir.path().join("sweep.csv")).unwrap();
        assert_eq!(short[1].r2_cl, -0.25);
        assert!(short[1].uf_norm.is_nan());
    }
}
