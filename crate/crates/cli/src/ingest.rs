use std::path::Path;

use anyhow::{anyhow, bail, Context};
use nalgebra::DMatrix;

use twoway::graph::{largest_component, MatchedPanel, Observation};

use crate::error::{core_error, input_error};

/// Reads `i,t,j,y[,x...]` with 1-based integer ids. Unit counts are the largest ids seen.
pub fn read_panel(path: &Path) -> anyhow::Result<MatchedPanel> {
    read(path).with_context(|| format!("reading {}", path.display())).map_err(input_error)
}

fn read(path: &Path) -> anyhow::Result<MatchedPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 4 || header[..4] != ["i", "t", "j", "y"] {
        bail!("header must start with i,t,j,y; found {}", header.join(","));
    }
    let names: Vec<String> = header[4..].to_vec();
    let mut obs = Vec::new();
    let (mut rows, mut cols, mut periods) = (0usize, 0usize, 0usize);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = |k: usize| -> anyhow::Result<usize> {
            let v: usize = rec[k].parse().map_err(|_| anyhow!("line {line}: {} = {:?} is not a positive integer", header[k], &rec[k]))?;
            if v == 0 {
                bail!("line {line}: {} ids are 1-based, got 0", header[k]);
            }
            Ok(v - 1)
        };
        let num = |k: usize| -> anyhow::Result<f64> {
            let v: f64 = rec[k].parse().map_err(|_| anyhow!("line {line}: {} = {:?} is not a number", header[k], &rec[k]))?;
            if !v.is_finite() {
                bail!("line {line}: {} is not finite", header[k]);
            }
            Ok(v)
        };
        let (i, t, j) = (id(0)?, id(1)?, id(2)?);
        let x = (4..header.len()).map(num).collect::<anyhow::Result<Vec<f64>>>()?;
        obs.push(Observation { row: i, period: t, col: j, y: num(3)?, x });
        rows = rows.max(i + 1);
        cols = cols.max(j + 1);
        periods = periods.max(t + 1);
    }
    if obs.is_empty() {
        bail!("no observations");
    }
    MatchedPanel::new(rows, cols, periods, obs, names).map_err(anyhow::Error::from)
}

/// Applies the isolated-unit and component filters.
pub fn preprocess(panel: MatchedPanel, drop_isolated: bool, largest: bool) -> anyhow::Result<MatchedPanel> {
    let mut p = panel;
    if drop_isolated || largest {
        p = p.drop_isolated().map_err(core_error)?;
    }
    if largest {
        p = largest_component(&p).map_err(core_error)?;
    }
    Ok(p)
}

/// Per-row-unit means of the named covariates.
pub fn row_covariates(panel: &MatchedPanel, names: &[String]) -> anyhow::Result<DMatrix<f64>> {
    let r = panel.rows();
    let mut out = DMatrix::zeros(r, names.len());
    let mut count = vec![0.0f64; r];
    for &i in panel.row_ids() {
        count[i] += 1.0;
    }
    for (k, name) in names.iter().enumerate() {
        let idx = covariate_index(panel, name)?;
        for (o, x) in panel.covariate(idx).into_iter().enumerate() {
            out[(panel.row_ids()[o], k)] += x;
        }
        for i in 0..r {
            out[(i, k)] /= count[i].max(1.0);
        }
    }
    Ok(out)
}

/// Copy of the panel keeping only the named covariates, in that order.
pub fn select_covariates(panel: &MatchedPanel, names: &[String]) -> anyhow::Result<MatchedPanel> {
    let idx = names.iter().map(|n| covariate_index(panel, n)).collect::<anyhow::Result<Vec<_>>>()?;
    let obs = (0..panel.len())
        .map(|o| {
            let mut ob = panel.observation(o);
            ob.x = idx.iter().map(|&k| ob.x[k]).collect();
            ob
        })
        .collect();
    MatchedPanel::with_labels(
        panel.rows(),
        panel.cols(),
        panel.periods(),
        obs,
        names.to_vec(),
        panel.row_labels().to_vec(),
        panel.col_labels().to_vec(),
    )
    .map_err(core_error)
}

fn covariate_index(panel: &MatchedPanel, name: &str) -> anyhow::Result<usize> {
    panel
        .covariate_index(name)
        .ok_or_else(|| input_error(anyhow!("covariate column {name:?} not found in input")))
}
