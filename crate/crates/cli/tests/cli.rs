//! End-to-end checks of the command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pyramid_cli::commands::{
    cmd_evaluate, cmd_fit, cmd_replicate, cmd_simulate, replication_seeds, MANIFEST, TIMING,
};
use pyramid_cli::RunConfig;
use pyramid_core::postproc::Summary;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pyramid"))
}

fn run(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let out = bin().args(args).current_dir(cwd).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn short_fit(cfg: &mut RunConfig) {
    cfg.fit.iterations = 40;
    cfg.fit.burn_in = 20;
    cfg.fit.thin = 2;
}

fn sim_config(dir: &Path, seed: u64, n: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.seed = Some(seed);
    cfg.out = Some(dir.to_path_buf());
    cfg.simulate.n = n;
    cfg
}

/// Every file in `dir` except the runtime record, with its bytes.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != TIMING)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_is_reproducible_and_creates_nested_output() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("deep/nested/a");
    let b = tmp.path().join("b");
    let ra = cmd_simulate(&sim_config(&a, 11, 200), false).unwrap();
    cmd_simulate(&sim_config(&b, 11, 200), false).unwrap();
    assert_eq!(snapshot(&a), snapshot(&b));
    assert_eq!(ra.output.dataset.p(), 20);
    let header = fs::read_to_string(a.join("data.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 20);
    assert_eq!(header.lines().count(), 201);
    for f in ["alpha_1.csv", "z.csv", "truth.toml", MANIFEST] {
        assert!(a.join(f).exists(), "{f}");
    }
    let c = tmp.path().join("c");
    cmd_simulate(&sim_config(&c, 12, 200), false).unwrap();
    assert_ne!(fs::read(a.join("data.csv")).unwrap(), fs::read(c.join("data.csv")).unwrap());
}

#[test]
fn one_iteration_fit_completes() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    cmd_simulate(&sim_config(&sim, 1, 50), false).unwrap();
    let mut cfg = sim_config(&tmp.path().join("fit"), 2, 0);
    cfg.fit.data = Some(sim.join("data.csv"));
    cfg.fit.iterations = 1;
    cfg.fit.burn_in = 0;
    cfg.fit.thin = 1;
    let r = cmd_fit(&cfg, false).unwrap();
    assert_eq!(r.draws.iterations, vec![1]);
    for f in ["G.csv", "beta.csv", "shape.csv", "trace.csv", MANIFEST, TIMING] {
        assert!(r.dir.join(f).exists(), "{f}");
    }
}

#[test]
fn protocol_flags_are_accepted() {
    let cli = <pyramid_cli::Cli as clap::Parser>::parse_from([
        "pyramid", "fit", "--seed", "1", "--data", "x.csv", "--mode", "fixed_K", "--k-upper", "4",
        "--b", "2", "--iterations", "15000", "--burn-in", "5000", "--thin", "5", "--v0", "0.1",
        "--sigma0-sq", "4", "--a-sigma", "2", "--b-sigma", "2", "--alpha0", "5", "--theta-inf",
        "0.07", "--mu0", "0",
    ]);
    let cfg = cli.merge(RunConfig::default());
    let s = cfg.fit.sampler(1);
    s.validate().unwrap();
    assert_eq!((s.iterations, s.burn_in, s.thin, s.k_upper), (15000, 5000, 5, 4));
}

#[test]
fn exit_codes_follow_error_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("ok.csv"), "y1,y2,y3\n1,2,1\n2,1,2\n").unwrap();
    fs::write(d.join("bad.csv"), "y1,y2,y3\n1,2,1\n2,oops,2\n").unwrap();

    let (code, _, err) = run(&["fit", "--seed", "1", "--data", "ok.csv", "--mode", "nope"], d);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("unknown mode"));

    let (code, _, err) = run(&["fit", "--data", "ok.csv"], d);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("seed"));

    let (code, _, err) = run(&["fit", "--seed", "1", "--data", "missing.csv"], d);
    assert_eq!(code, 2, "{err}");

    let (code, _, err) = run(&["fit", "--seed", "1", "--data", "bad.csv"], d);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("row 3, column 2"), "{err}");

    fs::write(d.join("typo.toml"), "[fit]\nk_uper = 3\n").unwrap();
    let (code, _, err) = run(&["fit", "--config", "typo.toml", "--seed", "1", "--data", "ok.csv"], d);
    assert_eq!(code, 2, "{err}");

    let (code, _, _) = run(&["no-such-command"], d);
    assert_eq!(code, 2);
}

#[test]
fn manifest_reruns_the_fit_bit_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (code, _, err) = run(&["simulate", "--seed", "5", "--n", "80", "--out", "sim"], d);
    assert_eq!(code, 0, "{err}");
    fs::write(
        d.join("run.toml"),
        "seed = 6\n[fit]\ndata = \"sim/data.csv\"\nmode = \"csp\"\nk_upper = 5\niterations = 30\nburn_in = 10\nthin = 2\n",
    )
    .unwrap();
    let (code, _, err) = run(&["fit", "--config", "run.toml", "--out", "first"], d);
    assert_eq!(code, 0, "{err}");
    let (code, _, err) = run(&["fit", "--config", "first/manifest.toml", "--out", "second", "--jobs", "2"], d);
    assert_eq!(code, 0, "{err}");
    assert_eq!(snapshot(&d.join("first")), snapshot(&d.join("second")));
    let manifest = fs::read_to_string(d.join("first").join(MANIFEST)).unwrap();
    assert!(manifest.contains("positivity = true"));
    assert!(manifest.contains("data_sha256"));
    assert!(fs::read_to_string(d.join("first").join(TIMING)).unwrap().contains("runtime_seconds"));
}

#[test]
fn evaluate_writes_report_and_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for args in [
        &["simulate", "--seed", "8", "--n", "150", "--out", "sim"][..],
        &["fit", "--seed", "9", "--data", "sim/data.csv", "--iterations", "40", "--burn-in", "20", "--out", "fit"],
        &["evaluate", "--draws", "fit", "--truth", "sim/truth.toml", "--out", "eval"],
    ] {
        let (code, _, err) = run(args, d);
        assert_eq!(code, 0, "{args:?}: {err}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 150);
    assert_eq!(report["permutation"].as_array().unwrap().len(), 4);
    let curve = fs::read_to_string(d.join("eval/curve.csv")).unwrap();
    assert!(curve.starts_with("n,g_error_matrix"));
    assert_eq!(curve.lines().count(), 2);
}

#[test]
fn single_replication_matches_the_manual_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sim_config(&tmp.path().join("rep"), 31, 0);
    short_fit(&mut cfg);
    cfg.replicate.n_values = vec![120];
    cfg.replicate.replications = 1;
    let rep = cmd_replicate(&cfg, false).unwrap();
    let rec = &rep.replications[0];
    assert_eq!((rec.n, rec.replication), (120, 1));
    assert_eq!((rec.simulation_seed, rec.fit_seed), replication_seeds(31, 120, 0));

    let sim = tmp.path().join("sim");
    let mut s = sim_config(&sim, rec.simulation_seed, 120);
    s.simulate.n = 120;
    cmd_simulate(&s, false).unwrap();
    let mut f = sim_config(&tmp.path().join("fit"), rec.fit_seed, 0);
    short_fit(&mut f);
    f.fit.data = Some(sim.join("data.csv"));
    f.fit.categories = Some(4);
    cmd_fit(&f, false).unwrap();
    let mut e = sim_config(&tmp.path().join("eval"), 0, 0);
    e.evaluate.draws = Some(tmp.path().join("fit"));
    e.evaluate.truth = Some(sim.join("truth.toml").to_string_lossy().into_owned());
    let manual = cmd_evaluate(&e, false).unwrap();
    assert_eq!(manual, rec.report);
}

#[test]
fn replication_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for n in [500, 1000, 1500, 2000] {
        for r in 0..50 {
            let (a, b) = replication_seeds(4, n, r);
            assert!(seen.insert(a) && seen.insert(b));
        }
    }
}

#[test]
fn replicate_aggregates_match_a_direct_sort() {
    let tmp = tempfile::tempdir().unwrap();
    let out: PathBuf = tmp.path().join("rep");
    let mut cfg = sim_config(&out, 2, 0);
    short_fit(&mut cfg);
    cfg.fit.mode = "csp".into();
    cfg.fit.k_upper = 5;
    cfg.replicate.n_values = vec![60, 90];
    cfg.replicate.replications = 3;
    let rep = cmd_replicate(&cfg, false).unwrap();
    assert_eq!(rep.replications.len(), 6);
    for agg in &rep.aggregates {
        let mut v: Vec<f64> = rep
            .replications
            .iter()
            .filter(|r| r.n == agg.n)
            .map(|r| r.report.rmse.eta)
            .collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(agg.rmse_eta.median, v[1]);
        assert_eq!(agg.rmse_eta.q25, (v[0] + v[1]) / 2.0);
        assert_eq!(agg.rmse_eta.q75, (v[1] + v[2]) / 2.0);
        let ks: Vec<f64> = rep.replications.iter().filter(|r| r.n == agg.n).map(|r| r.report.k_star.unwrap()).collect();
        assert_eq!(agg.k_star, Some(Summary::of(&ks)));
    }
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
    assert!(out.join("report.json").exists() && out.join(MANIFEST).exists());
}

#[test]
fn check_id_reports_one_based_witnesses() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("s.csv"), "1,0\n0,1\n1,0\n0,1\n1,0\n0,1\n").unwrap();
    let (code, out, err) = run(
        &["check-id", "--checker", "strict-corollary", "--matrix", "s.csv", "--out", "v"],
        d,
    );
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "strict");
    let mut rows: Vec<u64> = v["witness"]["parts"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|p| p.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()))
        .collect();
    rows.sort();
    assert_eq!(rows, (1..=6).collect::<Vec<_>>());
    assert_eq!(fs::read_to_string(d.join("v/verdict.json")).unwrap(), out);

    let (code, out, _) = run(&["check-id", "--checker", "two-layer", "--truth", "paper", "--out", "t"], d);
    assert_eq!(code, 0);
    assert!(out.contains("\"strict\""));

    fs::write(d.join("lam.csv"), "0.5,x\n0.5,0.5\n").unwrap();
    let (code, _, err) = run(
        &["check-id", "--checker", "strict-theorem1", "--matrix", "s.csv", "--lambda", "lam.csv"],
        d,
    );
    assert_eq!(code, 3, "{err}");
    let (code, _, _) = run(&["check-id", "--checker", "psychic", "--matrix", "s.csv"], d);
    assert_eq!(code, 2);
}

#[test]
fn deeper_pyramid_simulates_and_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (code, _, err) = run(&["simulate", "--seed", "1", "--n", "5", "--out", "base"], d);
    assert_eq!(code, 0, "{err}");
    let mut truth = fs::read_to_string(d.join("base/truth.toml")).unwrap();
    truth = truth.replace("eta = [[0.8, 0.2], [0.8, 0.2], [0.8, 0.2], [0.8, 0.2]]", "eta = [[0.9, 0.1]]");
    assert!(truth.contains("eta = [[0.9, 0.1]]"), "{truth}");
    truth.push_str(
        "\n[[layers]]\ngraph = [\"1\", \"1\", \"1\", \"1\"]\nlink = \"boolean-or\"\ntheta0 = [0.2, 0.2, 0.2, 0.2]\ntheta1 = [0.8, 0.8, 0.8, 0.8]\n",
    );
    fs::write(d.join("deep.toml"), truth).unwrap();
    let (code, _, err) = run(&["simulate", "--seed", "1", "--n", "40", "--truth", "deep.toml", "--out", "sim"], d);
    assert_eq!(code, 0, "{err}");
    let top = fs::read_to_string(d.join("sim/alpha_2.csv")).unwrap();
    assert_eq!(top.lines().next(), Some("a1"));
    assert_eq!(top.lines().count(), 41);

    let (code, out, err) = run(&["check-id", "--checker", "multilayer", "--truth", "deep.toml", "--out", "v"], d);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("\"status\""));

    let (code, _, err) = run(&["evaluate", "--draws", "sim", "--truth", "deep.toml"], d);
    assert_eq!(code, 2, "{err}");
}
