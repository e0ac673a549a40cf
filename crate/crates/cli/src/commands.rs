//! The five subcommands. Each takes a resolved [`RunConfig`], writes its
//! outputs atomically under the output directory and returns what it wrote.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pyramid_core::gibbs::{run_chain, run_chain_with, PosteriorDraws, PriorRegistry};
use pyramid_core::identify::{CheckInput, CheckerRegistry, IdVerdict, SearchBudget};
use pyramid_core::io::{
    dataset_from_csv, dataset_to_csv, read_draw_summary, table_to_csv, write_atomic, write_draws,
};
use pyramid_core::lcm::{ConstraintMatrix, Dataset, GraphicalMatrix, TwoLayerParams};
use pyramid_core::postproc::{aggregate, evaluate, evaluate_means, Aggregate, EvalReport, Summary};
use pyramid_core::rngs::derive_seed;
use pyramid_core::simgen::{simulate_pyramid, simulate_two_layer, SimOutput};
use pyramid_core::{BinaryMatrix, Error};

use crate::config::{require_file, sha256_hex, RunConfig, MAX_SEED};
use crate::error::{config_err, CliError, CliResult};
use crate::truth::TruthFile;

pub const MANIFEST: &str = "manifest.toml";
pub const TIMING: &str = "timing.toml";

const REPLICATE_TAG: u64 = 0x7265_706c;

fn log(verbose: bool, msg: impl AsRef<str>) {
    if verbose {
        eprintln!("[pyramid] {}", msg.as_ref());
    }
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    Ok(write_atomic(&dir.join(name), text.as_bytes())?)
}

fn prepare_out(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn to_value<T: Serialize>(v: &T) -> CliResult<toml::Value> {
    toml::Value::try_from(v).or_else(|e| config_err(format!("cannot serialize config: {e}")))
}

/// Writes the resolved config for `command` plus provenance and returns the
/// config hash. Output directory and thread count are left out so that the
/// manifest is identical wherever and however the command ran.
fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    sections: &[&str],
    extra: Vec<(&str, toml::Value)>,
) -> CliResult<String> {
    let full = match to_value(cfg)? {
        toml::Value::Table(t) => t,
        _ => unreachable!("RunConfig serializes to a table"),
    };
    let mut body = toml::Table::new();
    body.insert("command".into(), command.into());
    if let Some(seed) = full.get("seed") {
        body.insert("seed".into(), seed.clone());
    }
    for s in sections {
        if let Some(v) = full.get(*s) {
            body.insert((*s).into(), v.clone());
        }
    }
    let hash = sha256_hex(toml::to_string(&body).unwrap_or_default().as_bytes());
    let mut prov = toml::Table::new();
    prov.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    prov.insert("config_hash".into(), hash.clone().into());
    for (k, v) in extra {
        prov.insert(k.into(), v);
    }
    body.insert("provenance".into(), toml::Value::Table(prov));
    let text = toml::to_string(&body).or_else(|e| config_err(format!("cannot write manifest: {e}")))?;
    write_text(dir, MANIFEST, &text)?;
    Ok(hash)
}

fn write_timing(dir: &Path, started: Instant) -> CliResult<()> {
    write_text(
        dir,
        TIMING,
        &format!("runtime_seconds = {:.3}\n", started.elapsed().as_secs_f64()),
    )
}

/// `paper` or a truth-file path.
pub fn load_truth(selection: &str) -> CliResult<TruthFile> {
    if selection == "paper" {
        return Ok(TruthFile::paper());
    }
    let path = Path::new(selection);
    require_file(path, "truth file")?;
    TruthFile::load(path)
}

fn two_layer_truth(truth: &TruthFile) -> CliResult<TwoLayerParams> {
    if !truth.layers.is_empty() {
        return Err(Error::Usage("evaluation needs a two-layer truth (no [[layers]])".into()).into());
    }
    truth.params()
}

fn header(prefix: &str, width: usize) -> Vec<String> {
    (1..=width).map(|k| format!("{prefix}{k}")).collect()
}

fn binary_table(m: &BinaryMatrix, prefix: &str) -> String {
    let rows: Vec<Vec<u8>> = (0..m.rows()).map(|r| m.row(r).to_vec()).collect();
    table_to_csv(&header(prefix, m.cols()), &rows)
}

pub struct SimulateResult {
    pub dir: PathBuf,
    pub output: SimOutput,
    pub config_hash: String,
}

pub fn cmd_simulate(cfg: &RunConfig, verbose: bool) -> CliResult<SimulateResult> {
    let seed = cfg.require_seed("simulate")?;
    let truth = load_truth(&cfg.simulate.truth)?;
    let params = truth.params()?;
    let layers = truth.latent_layers()?;
    log(verbose, format!("simulating n = {} from {}", cfg.simulate.n, truth.source));
    let output = simulate_pyramid(&params, &layers, cfg.simulate.n, seed)?;
    let dir = prepare_out(cfg)?;
    write_text(&dir, "data.csv", &dataset_to_csv(&output.dataset, true))?;
    for (m, alpha) in output.latents_alpha.iter().enumerate() {
        write_text(&dir, &format!("alpha_{}.csv", m + 1), &binary_table(alpha, "a"))?;
    }
    let z: Vec<Vec<usize>> = output.latents_z.iter().map(|&z| vec![z]).collect();
    write_text(&dir, "z.csv", &table_to_csv(&["z".to_string()], &z))?;
    write_text(&dir, "truth.toml", &truth.to_toml()?)?;
    let config_hash = write_manifest(&dir, "simulate", cfg, &["simulate"], Vec::new())?;
    Ok(SimulateResult {
        dir,
        output,
        config_hash,
    })
}

fn load_dataset(cfg: &RunConfig) -> CliResult<(Dataset, String)> {
    let Some(path) = &cfg.fit.data else {
        return config_err("fit needs a dataset (--data or fit.data)");
    };
    require_file(path, "dataset")?;
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Data {
        row: 0,
        col: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let mut data = dataset_from_csv(&text, cfg.fit.header, None)?;
    if let Some(d) = cfg.fit.categories {
        if let Some(j) = data.cardinalities().iter().position(|&c| c > d) {
            return Err(Error::Input(format!(
                "variable {} has a category above --categories {d}",
                j + 1
            ))
            .into());
        }
        data = Dataset::new(data.n(), vec![d; data.p()], data.values().to_vec())?;
    }
    Ok((data, sha256_hex(&bytes)))
}

pub struct FitResult {
    pub dir: PathBuf,
    pub draws: PosteriorDraws,
    pub config_hash: String,
}

pub fn cmd_fit(cfg: &RunConfig, verbose: bool) -> CliResult<FitResult> {
    let seed = cfg.require_seed("fit")?;
    let sampler = cfg.fit.sampler(seed);
    sampler.validate()?;
    let registry = PriorRegistry::default();
    registry.get(&sampler.mode)?;
    let (data, data_hash) = load_dataset(cfg)?;
    let dir = prepare_out(cfg)?;
    log(
        verbose,
        format!("fitting n = {}, p = {}, mode {}, K = {}", data.n(), data.p(), sampler.mode, sampler.k_upper),
    );
    let started = Instant::now();
    let mut progress = |t: usize| {
        if t % 1000 == 0 {
            log(verbose, format!("sweep {t} / {}", sampler.iterations));
        }
    };
    let draws = run_chain_with(&data, &sampler, &registry, &mut progress)?;
    write_draws(&dir, &draws)?;
    let config_hash = write_manifest(
        &dir,
        "fit",
        cfg,
        &["fit"],
        vec![
            ("data_sha256", data_hash.into()),
            ("positivity", sampler.positivity.into()),
            ("retained_draws", (draws.iterations.len() as i64).into()),
        ],
    )?;
    write_timing(&dir, started)?;
    Ok(FitResult {
        dir,
        draws,
        config_hash,
    })
}

/// Headerless numeric matrix.
fn numeric_csv(path: &Path) -> CliResult<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(c, cell)| {
                cell.trim().parse::<f64>().map_err(|_| Error::Data {
                    row: r + 1,
                    col: c + 1,
                    message: format!("{}: expected a number, found {cell:?}", path.display()),
                })
            })
            .collect::<Result<Vec<f64>, Error>>()?;
        if rows.first().is_some_and(|f| f.len() != row.len()) {
            return Err(Error::Data {
                row: r + 1,
                col: row.len(),
                message: format!("{}: ragged row", path.display()),
            }
            .into());
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn binary_csv(path: &Path) -> CliResult<BinaryMatrix> {
    require_file(path, "matrix")?;
    Ok(BinaryMatrix::from_csv(&fs::read_to_string(path)?)?)
}

/// Verdict with 1-based row and column indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub checker: String,
    pub status: String,
    pub witness: Option<WitnessReport>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub parts: [Vec<usize>; 3],
    pub flips: Vec<[usize; 2]>,
}

impl VerdictReport {
    pub fn new(checker: &str, v: &IdVerdict) -> Self {
        let status = serde_json::to_value(v.status)
            .ok()
            .and_then(|s| s.as_str().map(str::to_string))
            .unwrap_or_default();
        Self {
            checker: checker.into(),
            status,
            witness: v.witness.as_ref().map(|w| WitnessReport {
                parts: w.parts.clone().map(|p| p.into_iter().map(|r| r + 1).collect()),
                flips: w.flips.iter().map(|&(r, c)| [r + 1, c + 1]).collect(),
            }),
            diagnostics: v.diagnostics.clone(),
        }
    }
}

pub fn cmd_check_id(cfg: &RunConfig, verbose: bool) -> CliResult<VerdictReport> {
    let c = &cfg.check_id;
    let registry = CheckerRegistry::default();
    let checker = registry.get(&c.checker)?;
    let mut input = CheckInput {
        budget: SearchBudget {
            max_evaluations: c.max_evaluations,
            restarts: c.restarts,
            max_flips: c.max_flips,
            seed: cfg.seed.unwrap_or(0),
        },
        deep_classes: c.deep_classes,
        ..CheckInput::default()
    };
    if let Some(m) = &c.matrix {
        input.constraint = Some(ConstraintMatrix::new(binary_csv(m)?));
    }
    for g in &c.graphs {
        input.graphs.push(GraphicalMatrix::new(binary_csv(g)?));
    }
    if let Some(sel) = &c.truth {
        let truth = load_truth(sel)?;
        if input.graphs.is_empty() {
            input.graphs.push(truth.params()?.graph);
            for layer in truth.latent_layers()? {
                input.graphs.push(layer.graph);
            }
        }
        input.beta = Some(truth.beta.clone());
        input.deep_classes = input.deep_classes.or(Some(truth.tau.len()));
    }
    if !c.lambdas.is_empty() {
        let mut lambdas = Vec::with_capacity(c.lambdas.len());
        for p in &c.lambdas {
            require_file(p, "lambda matrix")?;
            lambdas.push(numeric_csv(p)?);
        }
        input.lambdas = Some(lambdas);
    }
    log(verbose, format!("running checker {}", c.checker));
    let verdict = checker.check(&input)?;
    let report = VerdictReport::new(&c.checker, &verdict);
    let dir = prepare_out(cfg)?;
    write_text(&dir, "verdict.json", &json(&report)?)?;
    write_manifest(&dir, "check-id", cfg, &["check_id"], Vec::new())?;
    Ok(report)
}

pub fn json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .or_else(|e| config_err(format!("cannot serialize report: {e}")))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn report_curve(reports: &[EvalReport]) -> String {
    let head: Vec<String> = [
        "n",
        "g_error_matrix",
        "g_error_row",
        "g_error_entry",
        "rmse_beta",
        "rmse_beta_all",
        "rmse_beta0",
        "rmse_eta",
        "k_star",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string()];
            row.extend(
                [r.g_error_matrix, r.g_error_row, r.g_error_entry, r.rmse.beta, r.rmse.beta_all, r.rmse.beta0, r.rmse.eta]
                    .map(|v| v.to_string()),
            );
            row.push(opt(r.k_star));
            row
        })
        .collect();
    table_to_csv(&head, &rows)
}

pub fn cmd_evaluate(cfg: &RunConfig, verbose: bool) -> CliResult<EvalReport> {
    let e = &cfg.evaluate;
    let Some(draws) = &e.draws else {
        return config_err("evaluate needs a draws directory (--draws or evaluate.draws)");
    };
    let Some(truth) = &e.truth else {
        return config_err("evaluate needs a truth file (--truth or evaluate.truth)");
    };
    require_file(draws, "draws directory")?;
    let params = two_layer_truth(&load_truth(truth)?)?;
    log(verbose, format!("evaluating {}", draws.display()));
    let summary = read_draw_summary(draws)?;
    let report = evaluate_means(&summary.means, summary.k_star, &params)?;
    let dir = prepare_out(cfg)?;
    write_text(&dir, "report.json", &json(&report)?)?;
    write_text(&dir, "curve.csv", &report_curve(std::slice::from_ref(&report)))?;
    write_manifest(&dir, "evaluate", cfg, &["evaluate"], Vec::new())?;
    Ok(report)
}

/// One simulate, fit and evaluate pipeline of a replication study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub n: usize,
    /// 1-based replication index within its sample size.
    pub replication: usize,
    pub simulation_seed: u64,
    pub fit_seed: u64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub replications: Vec<ReplicationRecord>,
    pub aggregates: Vec<Aggregate>,
}

/// Seeds for replication `r` (0-based) at sample size `n`, kept within
/// [`MAX_SEED`] so that each can be passed back to `simulate` and `fit`.
pub fn replication_seeds(root: u64, n: usize, r: usize) -> (u64, u64) {
    let seed = |stage: u64| derive_seed(root, &[REPLICATE_TAG, n as u64, r as u64, stage]) & MAX_SEED;
    (seed(0), seed(1))
}

fn run_replication(
    cfg: &RunConfig,
    params: &TwoLayerParams,
    root: u64,
    n: usize,
    r: usize,
    verbose: bool,
) -> CliResult<ReplicationRecord> {
    let (simulation_seed, fit_seed) = replication_seeds(root, n, r);
    let sim = simulate_two_layer(params, n, simulation_seed)?;
    let draws = run_chain(&sim.dataset, &cfg.fit.sampler(fit_seed))?;
    let report = evaluate(&draws, params)?;
    log(
        verbose,
        format!("n = {n}, replication {}: entry error {:.4}", r + 1, report.g_error_entry),
    );
    Ok(ReplicationRecord {
        n,
        replication: r + 1,
        simulation_seed,
        fit_seed,
        report,
    })
}

fn aggregate_curve(aggs: &[Aggregate]) -> String {
    let metrics = [
        "g_error_matrix",
        "g_error_row",
        "g_error_entry",
        "rmse_beta",
        "rmse_beta_all",
        "rmse_beta0",
        "rmse_eta",
        "k_star",
    ];
    let mut head = vec!["n".to_string(), "replications".to_string()];
    for m in metrics {
        for s in ["mean", "median", "q25", "q75"] {
            head.push(format!("{m}_{s}"));
        }
    }
    let cells = |s: Option<Summary>| match s {
        Some(s) => [s.mean, s.median, s.q25, s.q75].map(|v| v.to_string()).to_vec(),
        None => vec![String::new(); 4],
    };
    let rows: Vec<Vec<String>> = aggs
        .iter()
        .map(|a| {
            let mut row = vec![a.n.to_string(), a.replications.to_string()];
            for s in [
                a.g_error_matrix,
                a.g_error_row,
                a.g_error_entry,
                a.rmse_beta,
                a.rmse_beta_all,
                a.rmse_beta0,
                a.rmse_eta,
            ] {
                row.extend(cells(Some(s)));
            }
            row.extend(cells(a.k_star));
            row
        })
        .collect();
    table_to_csv(&head, &rows)
}

pub fn cmd_replicate(cfg: &RunConfig, verbose: bool) -> CliResult<ReplicateReport> {
    let root = cfg.require_seed("replicate")?;
    let rep = &cfg.replicate;
    if rep.n_values.is_empty() || rep.replications == 0 {
        return config_err("replicate needs at least one sample size and one replication");
    }
    cfg.fit.sampler(root).validate()?;
    PriorRegistry::default().get(&cfg.fit.mode)?;
    let params = two_layer_truth(&load_truth(&rep.truth)?)?;
    let dir = prepare_out(cfg)?;
    let started = Instant::now();
    let tasks: Vec<(usize, usize)> = rep
        .n_values
        .iter()
        .flat_map(|&n| (0..rep.replications).map(move |r| (n, r)))
        .collect();
    let results: Vec<CliResult<ReplicationRecord>> = tasks
        .par_iter()
        .map(|&(n, r)| run_replication(cfg, &params, root, n, r, verbose))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    for (res, &(n, r)) in results.into_iter().zip(&tasks) {
        records.push(res.map_err(|e| CliError::Replication {
            index: r + 1,
            n,
            source: Box::new(e),
        })?);
    }
    let mut aggregates = Vec::with_capacity(rep.n_values.len());
    for &n in &rep.n_values {
        let reports: Vec<EvalReport> = records
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.report.clone())
            .collect();
        aggregates.push(aggregate(&reports)?);
    }
    let report = ReplicateReport {
        replications: records,
        aggregates,
    };
    write_text(&dir, "report.json", &json(&report)?)?;
    write_text(&dir, "curve.csv", &aggregate_curve(&report.aggregates))?;
    write_manifest(&dir, "replicate", cfg, &["replicate", "fit"], Vec::new())?;
    write_timing(&dir, started)?;
    Ok(report)
}
