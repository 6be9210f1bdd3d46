use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use log::{info, warn};
use serde::Serialize;

use twoway::criteria::{Criterion, CriterionValue, WeightSpec};
use twoway::estimators::{
    one_way_fit, partial_out_covariates, posterior_mean, CovariateMode, EstimateResult, Hyperparams, Precision,
    PriorLocation, ProblemOptions, ShrinkageProblem, SolverDiagnostics, TraceBackend,
};
use twoway::graph::{build_graph, connectivity_report, BipartiteGraph, ConnectivityReport, MatchedPanel};
use twoway::hyperopt::{select, SelectionResult};
use twoway::simulate::{
    quintile_crosstab, rep_seed, run_experiment, run_replication, DesignParams, ExperimentConfig, ExperimentReport,
};
use twoway::sparse_linalg::SolverConfig;

use crate::config::{file_sha256, EstimatorKind, RunConfig};
use crate::error::{core_error, input_error, ExitKind, Tagged};
use crate::ingest::{preprocess, read_panel, row_covariates, select_covariates};
use crate::output::{num, opt_num, OutDir, Stamp};

fn stamp(cfg: &RunConfig) -> Stamp {
    Stamp { config_hash: cfg.hash(), seed: cfg.seed }
}

fn load_graph(cfg: &RunConfig) -> anyhow::Result<(MatchedPanel, BipartiteGraph, String)> {
    let input = cfg.input.as_deref().ok_or_else(|| input_error(anyhow!("--input is required")))?;
    let panel = preprocess(read_panel(input)?, cfg.drop_isolated, cfg.largest_component)
        .with_context(|| format!("preparing {}", input.display()))?;
    let graph = build_graph(&panel).map_err(core_error).with_context(|| format!("building graph from {}", input.display()))?;
    Ok((panel, graph, file_sha256(input)?))
}

fn report_connectivity(cfg: &RunConfig, graph: &BipartiteGraph) -> anyhow::Result<ConnectivityReport> {
    let opts = cfg.diagnose.eigen_options(cfg.seed.unwrap_or(0));
    connectivity_report(graph, cfg.diagnose.eigenvalues, &opts).map_err(core_error).context("connectivity diagnostics")
}

#[derive(Serialize)]
struct Connectivity<'a> {
    input_sha256: &'a str,
    rows: usize,
    cols: usize,
    observations: usize,
    #[serde(flatten)]
    report: &'a ConnectivityReport,
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    input_sha256: &'a str,
    estimator: EstimatorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    criterion: Option<Criterion>,
    weight: WeightSpec,
    rows: usize,
    cols: usize,
    observations: usize,
    sigma2: f64,
    sigma2_estimated: bool,
    trace_backend: TraceBackend,
    covariate_mode: &'static str,
    covariate_slopes: BTreeMap<String, f64>,
    location_names: Vec<String>,
    hyperparams: Option<Hyperparams>,
    location: Vec<f64>,
    criterion_value: Option<&'a CriterionValue>,
    selection: Option<&'a SelectionResult>,
    solver: &'a SolverDiagnostics,
    /// `sum(beta)` of the written estimate.
    normalization: f64,
    normalized: bool,
}

pub fn estimate(cfg: &RunConfig) -> anyhow::Result<()> {
    let (panel, graph, input_sha) = load_graph(cfg)?;
    let (rows, cols) = (graph.rows(), graph.cols());
    info!("{} observations, {rows} row units, {cols} column units", graph.n_obs());

    let mut slopes = BTreeMap::new();
    let mut covariate_mode = "none";
    let y = if cfg.prior.regressors.is_empty() {
        panel.outcomes().to_vec()
    } else {
        let sub = select_covariates(&panel, &cfg.prior.regressors)?;
        let mode = match &cfg.prior.gamma {
            Some(g) => {
                covariate_mode = "external_gamma";
                CovariateMode::ExternalGamma(g.clone())
            }
            None => {
                covariate_mode = "strict_ols";
                warn!(
                    "regressor slopes estimated by two-way OLS, which assumes strictly exogenous regressors; \
                     for lagged outcomes supply prior.gamma from an external estimator"
                );
                CovariateMode::StrictOls
            }
        };
        let (ystar, gamma) = partial_out_covariates(&sub, &mode, &cfg.solver).map_err(core_error)?;
        slopes.extend(cfg.prior.regressors.iter().cloned().zip(gamma));
        ystar
    };

    let location = if cfg.prior.covariates.is_empty() {
        PriorLocation::ConstantMu
    } else {
        PriorLocation::row_index_with_intercept(&row_covariates(&panel, &cfg.prior.covariates)?, &cfg.prior.covariates)
    };
    let location_names = location.names();
    let weight = cfg.weight.unwrap_or(WeightSpec::AllEffects);
    let solver = SolverConfig { seed: cfg.seed.unwrap_or(cfg.solver.seed), ..cfg.solver.clone() };
    let opts = ProblemOptions { sigma2: cfg.sigma2, weight, location, solver, obs_variance: None };
    let problem = ShrinkageProblem::new(graph.clone(), y.clone(), opts).map_err(core_error)?;
    let stochastic = cfg.estimator == EstimatorKind::Eb && problem.backend() == TraceBackend::Hutchinson;
    if stochastic && cfg.seed.is_none() {
        return Err(input_error(anyhow!(
            "this problem uses randomized trace estimates; pass --seed for a reproducible run"
        )));
    }

    let mut selection = None;
    let est: EstimateResult = match cfg.estimator {
        EstimatorKind::Ls => {
            let mut e = EstimateResult::from_theta(problem.theta_ls(), rows, problem.ls_diagnostics().clone());
            e.sigma2 = Some(problem.sigma2());
            e
        }
        EstimatorKind::Eb => {
            let grid = twoway::hyperopt::GridSpec { keep_surface: cfg.write_surface, ..cfg.grid.clone() };
            let sel = select(&problem, cfg.criterion, &grid).map_err(core_error).context("hyperparameter selection")?;
            let mut e = sel.estimate(&problem).map_err(core_error)?;
            e.criterion = Some(sel.value.value);
            selection = Some(sel);
            e
        }
        EstimatorKind::Oneway => {
            let (theta, hp) = one_way_fit(&graph, &y, cfg.sigma2).map_err(core_error)?;
            let mut e = EstimateResult::from_theta(&theta, rows, SolverDiagnostics::new("closed_form", 0, 0.0));
            e.hyperparams = Some(hp);
            e
        }
        EstimatorKind::Projoneway => {
            let (_, hp) = one_way_fit(&graph, &y, cfg.sigma2).map_err(core_error)?;
            let hp = Hyperparams::with_limits(0.0, Precision::Zero, hp.lambda_b, 0.0).map_err(core_error)?;
            posterior_mean(&problem, &hp, None).map_err(core_error)?
        }
    };

    let out = OutDir::create(&cfg.out_dir, stamp(cfg))?;
    let labels = |side: &str, ids: &[u64], vals: &[f64]| -> Vec<Vec<String>> {
        ids.iter().zip(vals).map(|(id, v)| vec![side.to_string(), id.to_string(), num(*v)]).collect()
    };
    let mut records = labels("a", panel.row_labels(), &est.alpha);
    records.extend(labels("b", panel.col_labels(), &est.beta));
    out.csv("estimates.csv", &["unit_type", "unit_id", "estimate"], records)?;

    let mut sel_body = selection.clone();
    if let Some(surface) = sel_body.as_mut().and_then(|s| s.surface.take()) {
        let rows = surface.iter().map(|p| {
            vec![num(p.lambda_a), num(p.lambda_b), num(p.phi), num(p.mu), num(p.value), p.round.to_string()]
        });
        out.csv("surface.csv", &["lambda_a", "lambda_b", "phi", "mu", "value", "round"], rows)?;
    }
    let summary = EstimateSummary {
        input_sha256: &input_sha,
        estimator: cfg.estimator,
        criterion: (cfg.estimator == EstimatorKind::Eb).then_some(cfg.criterion),
        weight,
        rows,
        cols,
        observations: graph.n_obs(),
        sigma2: problem.sigma2(),
        sigma2_estimated: problem.sigma2_is_estimated(),
        trace_backend: problem.backend(),
        covariate_mode,
        covariate_slopes: slopes,
        location_names,
        hyperparams: est.hyperparams,
        location: est.location.clone(),
        criterion_value: sel_body.as_ref().map(|s| &s.value),
        selection: sel_body.as_ref(),
        solver: &est.diagnostics,
        normalization: est.normalization,
        normalized: est.is_normalized(),
    };
    out.json("selection.json", &summary)?;

    let report = report_connectivity(cfg, &graph)?;
    let conn = Connectivity { input_sha256: &input_sha, rows, cols, observations: graph.n_obs(), report: &report };
    out.json("connectivity.json", &conn)?;
    if let Some(hp) = est.hyperparams {
        println!("hyperparameters: {}", serde_json::to_string(&hp)?);
    }
    println!("config hash {}", out.stamp.config_hash);
    Ok(())
}

pub fn diagnose(cfg: &RunConfig) -> anyhow::Result<()> {
    let (_, graph, input_sha) = load_graph(cfg)?;
    let report = report_connectivity(cfg, &graph)?;
    let out = OutDir::create(&cfg.out_dir, stamp(cfg))?;
    let conn = Connectivity {
        input_sha256: &input_sha,
        rows: graph.rows(),
        cols: graph.cols(),
        observations: graph.n_obs(),
        report: &report,
    };
    out.json("connectivity.json", &conn)?;
    println!("components {}", report.num_components);
    if let Some(note) = &report.note {
        println!("{note}");
    }
    println!("config hash {}", out.stamp.config_hash);
    Ok(())
}

fn precision(p: Precision) -> String {
    match p {
        Precision::Zero => "0".into(),
        Precision::Finite(v) => num(v),
        Precision::Infinite => "inf".into(),
    }
}

pub fn experiment_config(cfg: &RunConfig) -> anyhow::Result<ExperimentConfig> {
    let seed = cfg.seed.ok_or_else(|| input_error(anyhow!("simulate needs --seed (or seed in the config)")))?;
    let sim = &cfg.simulate;
    let mut design = match (&cfg.design, &sim.preset) {
        (Some(d), _) => d.clone(),
        (None, Some(p)) => DesignParams::preset(p).map_err(core_error)?,
        (None, None) => DesignParams::default(),
    };
    if sim.scale_down > 1 {
        design = design.scaled_down(sim.scale_down).map_err(core_error)?;
    }
    design.seed = seed;
    if let Some(s) = cfg.sigma2 {
        design.sigma2 = s;
    }
    let exp = ExperimentConfig {
        design,
        reps: sim.reps,
        estimators: sim.estimators.clone(),
        grid: cfg.grid.clone(),
        weight: cfg.weight.unwrap_or(WeightSpec::BetaOnly),
        solver: cfg.solver.clone(),
        known_sigma2: sim.known_sigma2,
        keep_vectors: false,
    };
    exp.validate().map_err(core_error)?;
    Ok(exp)
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    experiment: &'a ExperimentConfig,
    #[serde(flatten)]
    report: &'a ExperimentReport,
}

pub fn simulate(cfg: &RunConfig) -> anyhow::Result<()> {
    let exp = experiment_config(cfg)?;
    let report = run_experiment(&exp).map_err(core_error).context("simulation")?;
    let out = OutDir::create(&cfg.out_dir, stamp(cfg))?;

    let mut records = Vec::new();
    for rep in &report.replications {
        for o in &rep.outcomes {
            let hp = o.hyperparams;
            records.push(vec![
                rep.rep.to_string(),
                rep.seed.to_string(),
                rep.rows.to_string(),
                rep.cols.to_string(),
                rep.dropped_rows.to_string(),
                rep.dropped_cols.to_string(),
                num(rep.sigma2),
                o.estimator.name().to_string(),
                num(o.rmse),
                hp.map(|h| precision(h.lambda_a)).unwrap_or_default(),
                hp.map(|h| precision(h.lambda_b)).unwrap_or_default(),
                opt_num(hp.map(|h| h.phi)),
                opt_num(hp.map(|h| h.mu)),
                num(o.moments.var_alpha),
                num(o.moments.var_beta),
                opt_num(o.moments.cor),
            ]);
        }
    }
    let header = [
        "rep", "rep_seed", "rows", "cols", "dropped_rows", "dropped_cols", "sigma2", "estimator", "rmse", "lambda_a",
        "lambda_b", "phi", "mu", "var_alpha", "var_beta", "cor",
    ];
    out.csv("replications.csv", &header, records)?;

    let mut summary_report = report.clone();
    summary_report.replications.clear();
    out.json("summary.json", &SimulationSummary { experiment: &exp, report: &summary_report })?;

    if cfg.simulate.scatter {
        if let Some(first) = report.replications.first() {
            write_scatter(&out, &exp, first.rep, first.seed)?;
        }
    }
    for s in &report.summary {
        println!(
            "{:8} median rmse {:.4}  ratio to oracle {}",
            s.estimator.name(),
            s.rmse_median,
            s.median_ratio_to_oracle.map_or("-".into(), |r| format!("{r:.3}"))
        );
    }
    println!("config hash {}", out.stamp.config_hash);
    if !report.failures.is_empty() {
        for f in &report.failures {
            warn!("replication {} (seed {}) failed: {}", f.rep, f.seed, f.error);
        }
        return Err(anyhow!("{} of {} replications failed", report.failures.len(), exp.reps)
            .context(Tagged(ExitKind::PartialSimulation)));
    }
    Ok(())
}

fn write_scatter(out: &OutDir, exp: &ExperimentConfig, rep: usize, seed: u64) -> anyhow::Result<()> {
    let full = ExperimentConfig { keep_vectors: true, ..exp.clone() };
    let r = run_replication(&full, rep, seed).map_err(core_error).context("scatter replication")?;
    debug_assert_eq!(seed, rep_seed(exp.design.seed, rep));
    let truth = r.true_scatter.as_ref().ok_or_else(|| anyhow!("replication kept no vectors"))?;
    let mut header = vec!["rep".to_string(), "col".into(), "beta_true".into(), "mu_true".into()];
    for o in &r.outcomes {
        header.push(format!("beta_{}", o.estimator.name()));
        header.push(format!("mu_{}", o.estimator.name()));
    }
    let rows = truth.iter().enumerate().map(|(k, t)| {
        let mut row = vec![rep.to_string(), (t.col + 1).to_string(), num(t.beta), num(t.mu)];
        for o in &r.outcomes {
            let p = o.scatter.as_ref().map(|s| s[k]);
            row.push(opt_num(p.map(|p| p.beta)));
            row.push(opt_num(p.map(|p| p.mu)));
        }
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("scatter.csv", &header, rows)
}

fn read_estimates(path: &Path, unit_type: &str) -> anyhow::Result<BTreeMap<u64, f64>> {
    let read = || -> anyhow::Result<BTreeMap<u64, f64>> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let h = rdr.headers()?.clone();
        let col = |name: &str| h.iter().position(|c| c == name).ok_or_else(|| anyhow!("missing column {name}"));
        let (kt, ki, ke) = (col("unit_type")?, col("unit_id")?, col("estimate")?);
        let mut out = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if &rec[kt] != unit_type {
                continue;
            }
            let id: u64 = rec[ki].parse().map_err(|_| anyhow!("line {line}: bad unit_id {:?}", &rec[ki]))?;
            let v: f64 = rec[ke].parse().map_err(|_| anyhow!("line {line}: bad estimate {:?}", &rec[ke]))?;
            if out.insert(id, v).is_some() {
                bail!("line {line}: unit {id} appears twice");
            }
        }
        Ok(out)
    };
    read().with_context(|| format!("reading {}", path.display())).map_err(input_error)
}

pub fn crosstab(cfg: &RunConfig, first: &Path, second: &Path, unit_type: &str) -> anyhow::Result<()> {
    let a = read_estimates(first, unit_type)?;
    let b = read_estimates(second, unit_type)?;
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        let missing = a.keys().find(|k| !b.contains_key(k)).or_else(|| b.keys().find(|k| !a.contains_key(k)));
        return Err(input_error(anyhow!(
            "unit ids differ between {} and {} (e.g. id {})",
            first.display(),
            second.display(),
            missing.map_or("?".into(), |m| m.to_string())
        )));
    }
    let va: Vec<f64> = a.values().copied().collect();
    let vb: Vec<f64> = b.values().copied().collect();
    let table = quintile_crosstab(&va, &vb).map_err(core_error)?;
    let out = OutDir::create(&cfg.out_dir, stamp(cfg))?;
    let mut rows = Vec::new();
    for (q, row) in table.iter().enumerate() {
        let mut r = vec![(q + 1).to_string()];
        r.extend(row.iter().map(|n| n.to_string()));
        r.push(row.iter().sum::<usize>().to_string());
        rows.push(r);
    }
    let mut total = vec!["total".to_string()];
    total.extend((0..5).map(|k| table.iter().map(|r| r[k]).sum::<usize>().to_string()));
    total.push(va.len().to_string());
    rows.push(total);
    out.csv("crosstab.csv", &["quintile", "q1", "q2", "q3", "q4", "q5", "total"], rows)?;
    for r in &table {
        println!("{}", r.iter().map(|n| format!("{n:6}")).collect::<String>());
    }
    Ok(())
}
