use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};

use sha2::{Digest, Sha256};
use sobext::cli::{run_config, Artifact, RunConfig, Stage, Summary};
use sobext::domains::{DomainKind, DomainSpec};
use sobext::extension::extension_criterion_sweep;
use tempfile::tempdir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sobext"));
    c.env_remove("SOBEXT_JOBS").env_remove("RUST_LOG").stderr(Stdio::null());
    c
}

fn error_report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("error.json")).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn slit_pipeline() -> RunConfig {
    RunConfig::from_json(
        r#"{"stages": ["report", "poincare", "approx", "extend", "grad", "whitney", "gen"],
            "domain": "slit_disk", "hs": [0.0625, 0.125], "r0": 0.25, "approx_l": [4.0]}"#,
        "inline",
    )
    .unwrap()
}

#[test]
fn empty_stage_list_is_a_no_op() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, "{}").unwrap();
    let out = dir.path().join("out");
    let st = bin().args(["run", "--config"]).arg(&cfg).arg("--out-dir").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(!out.exists());
    let st = bin().args(["run", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(0));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"stages": ["gen"], "hs": [0.25], "colour": "blue"}"#).unwrap();
    let st = bin().args(["run", "--config"]).arg(&cfg).arg("--out-dir").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let rep = error_report(dir.path());
    assert_eq!(rep["kind"], "json");
    assert_eq!(rep["exit_code"], 2);
    assert!(rep["message"].as_str().unwrap().contains("colour"));
}

#[test]
fn invalid_parameters_map_to_exit_codes() {
    let dir = tempdir().unwrap();
    // Config error.
    let cfg = RunConfig::from_json(r#"{"stages": ["gen"], "hs": [0.25], "p": 0.5}"#, "inline").unwrap();
    assert_eq!(run_config(cfg, dir.path()), 2);
    assert_eq!(error_report(dir.path())["kind"], "config");
    // Too coarse to resolve the domain.
    let cfg = RunConfig::from_json(r#"{"stages": ["gen"], "domain": "disk", "hs": [1.5]}"#, "inline").unwrap();
    assert_eq!(run_config(cfg, dir.path()), 4);
    let rep = error_report(dir.path());
    assert_eq!((rep["kind"].as_str(), rep["stage"].as_str()), (Some("resolution"), Some("gen")));
    // Unknown field name.
    let cfg = RunConfig::from_json(r#"{"stages": ["grad"], "hs": [0.25], "field": "nope"}"#, "inline").unwrap();
    assert_eq!(run_config(cfg, dir.path()), 2);
    // Numeric failure inside a stage.
    let st = bin()
        .args(["poincare", "--domain", "disk", "--h", "0.25", "--p", "inf", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));
    let rep = error_report(dir.path());
    assert_eq!((rep["kind"].as_str(), rep["stage"].as_str()), (Some("domain"), Some("poincare")));
    // Bad worker count and bad arguments.
    let st = bin().args(["--jobs", "0", "gen", "--domain", "disk", "--h", "0.25", "--out-dir"]).arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = bin().args(["gen", "--domain", "torus", "--h", "0.25", "--out-dir"]).arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn subcommand_writes_enveloped_artifacts() {
    let dir = tempdir().unwrap();
    let st = bin()
        .env("SOBEXT_JOBS", "1")
        .args(["grad", "--domain", "two_squares", "--h", "0.25", "0.125", "--s", "0.2", "--report", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let names: Vec<String> = files(dir.path()).into_iter().map(|f| f.0).collect();
    assert_eq!(names, ["grad.csv", "grad.json", "report.csv", "report.json"]);
    let art: Artifact<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("grad.json")).unwrap()).unwrap();
    assert_eq!(art.version, sobext::VERSION);
    assert_eq!(art.stage, "grad");
    assert_eq!(art.config.field_name(), "vertex_jump");
    assert_eq!(art.config.stages, [Stage::Grad, Stage::Report]);
    // The coarse level is small enough for the minimal gradient.
    assert!(art.data[1]["minimal"]["feasible"].as_bool().unwrap());
    let csv = fs::read_to_string(dir.path().join("grad.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("h,s,norm"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn full_pipeline_is_byte_reproducible_and_rederivable() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    assert_eq!(run_config(slit_pipeline(), a.path()), 0);
    assert_eq!(run_config(slit_pipeline(), b.path()), 0);
    let fa = files(a.path());
    assert_eq!(fa.len(), 14);
    assert_eq!(fa, files(b.path()));

    let text = fs::read_to_string(a.path().join("report.json")).unwrap();
    // Non-finite numbers are written as null, so read the data loosely.
    let art: Artifact<serde_json::Value> = serde_json::from_str(&text).unwrap();
    let canonical = serde_json::to_vec(&art.config).unwrap();
    assert_eq!(art.config_hash, hex::encode(Sha256::digest(&canonical)));
    assert_eq!(art.config_hash, slit_pipeline().hash());

    // Re-running the embedded config reproduces every table.
    let c = tempdir().unwrap();
    assert_eq!(run_config(art.config.clone(), c.path()), 0);
    assert_eq!(fa, files(c.path()));
}

#[test]
fn slit_pipeline_verdict_matches_the_library_sweep() {
    let dir = tempdir().unwrap();
    let hs = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let cfg = RunConfig {
        stages: vec![Stage::Gen, Stage::Grad, Stage::Report],
        domain: DomainKind::SlitDisk,
        hs: hs.to_vec(),
        ..RunConfig::default()
    };
    assert_eq!(run_config(cfg.clone(), dir.path()), 0);
    let art: Artifact<Summary> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let lib = extension_criterion_sweep(&DomainSpec::new(DomainKind::SlitDisk, hs[0]), &hs, "slit_jump", 2.0, &cfg.s_list).unwrap();
    assert_eq!(art.data.verdict, lib.verdict.name());
    assert_eq!(art.data.criterion, lib);
    assert_eq!(art.data.pi_stable, None);
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}

#[test]
fn hash_ignores_the_output_directory_only() {
    let mut a = slit_pipeline();
    let h0 = a.hash();
    a.output_dir = Some("/elsewhere".into());
    assert_eq!(a.hash(), h0);
    a.seed = 1;
    assert_ne!(a.hash(), h0);
}

#[test]
fn space_files_round_trip_through_whitney() {
    let dir = tempdir().unwrap();
    let (space, mask, cover) = (dir.path().join("space.json"), dir.path().join("omega.json"), dir.path().join("cover.json"));
    let st = bin()
        .args(["gen", "--kind", "slit_disk", "--h", "0.125", "--out"])
        .arg(&space)
        .arg("--mask")
        .arg(&mask)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let idx: Vec<usize> = serde_json::from_str(&fs::read_to_string(&mask).unwrap()).unwrap();
    let (gs, go) = sobext::domains::gen_domain(&DomainSpec::new(DomainKind::SlitDisk, 0.125)).unwrap();
    assert_eq!(idx, go.indices());

    let st = bin()
        .args(["whitney", "--verify", "--space"])
        .arg(&space)
        .arg("--mask")
        .arg(&mask)
        .arg("--out")
        .arg(&cover)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let file: sobext::cli::CoverFile = serde_json::from_str(&fs::read_to_string(&cover).unwrap()).unwrap();
    let direct = sobext::whitney::whitney_cover(&gs, &go).unwrap();
    assert_eq!(file.balls, direct.balls);
    assert!(file.report.unwrap().all_ok);
    assert!(file.partition.unwrap().ok);

    // --out needs a single spacing; --space needs --mask.
    let st = bin().args(["gen", "--kind", "disk", "--h", "0.25", "0.125", "--out"]).arg(&space).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = bin().args(["whitney", "--space"]).arg(&space).arg("--out").arg(&cover).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn file_operations_match_the_library() {
    use sobext::cli::{ApproxFile, FieldData, GradFile};
    use sobext::gradients::{minimal_hajlasz_gradient, sharp_functional, Scope, SharpOptions, SolveOptions};

    let dir = tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let st = bin()
        .args(["gen", "--kind", "disk", "--h", "0.25", "--out"])
        .arg(p("space.json"))
        .arg("--mask")
        .arg(p("omega.json"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let (space, omega) = sobext::domains::gen_domain(&DomainSpec::new(DomainKind::Disk, 0.25)).unwrap();
    let u = sobext::domains::gen_test_field("radial", &space, &omega).unwrap();
    fs::write(p("u.json"), serde_json::to_string(u.values()).unwrap()).unwrap();

    let grad = |op: &str, extra: &[&str]| -> GradFile {
        let st = bin()
            .args(["grad", "--op", op, "--space"])
            .arg(p("space.json"))
            .arg("--mask")
            .arg(p("omega.json"))
            .arg("--field")
            .arg(p("u.json"))
            .args(extra)
            .arg("--out")
            .arg(p("g.json"))
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0), "{op}");
        serde_json::from_str(&fs::read_to_string(p("g.json")).unwrap()).unwrap()
    };
    let m = grad("minimize", &["--p", "2"]);
    let lib = minimal_hajlasz_gradient(&space, (&u).into(), 2.0, Scope::Global, &SolveOptions::default()).unwrap();
    assert_eq!(m.values, lib.g.values());
    assert!(m.certificate.unwrap().feasible);
    let sh = grad("sharp", &["--s", "0.2"]);
    let lib = sharp_functional(&space, (&u).into(), 0.2, &SharpOptions::default()).unwrap();
    assert_eq!(sh.values, lib.values.values());
    // The minimal gradient passes the check and half of it does not.
    fs::write(p("cand.json"), serde_json::to_string(&m.values).unwrap()).unwrap();
    let ok = grad("check", &["--g", p("cand.json").to_str().unwrap()]);
    assert!(ok.certificate.unwrap().feasible);
    let half: Vec<f64> = m.values.iter().map(|v| v / 2.0).collect();
    fs::write(p("cand.json"), serde_json::to_string(&half).unwrap()).unwrap();
    let bad = grad("check", &["--g", p("cand.json").to_str().unwrap()]);
    assert!(!bad.certificate.unwrap().feasible);
    let local = grad("local", &["--s", "0.25"]);
    assert!(local.c.unwrap() > 0.0 && local.certificate.unwrap().feasible);

    let rows: Vec<Vec<f64>> = u.values().iter().map(|&x| vec![x, 0.5 * x, 0.25 * x]).collect();
    fs::write(p("v.json"), serde_json::to_string(&rows).unwrap()).unwrap();
    let approx = |args: &[&str], field: &str| -> (Option<i32>, Option<ApproxFile>) {
        let st = bin()
            .arg("approx")
            .args(args)
            .arg("--space")
            .arg(p("space.json"))
            .arg("--field")
            .arg(p(field))
            .arg("--out")
            .arg(p("a.json"))
            .status()
            .unwrap();
        let file = st.success().then(|| serde_json::from_str(&fs::read_to_string(p("a.json")).unwrap()).unwrap());
        (st.code(), file)
    };
    let (_, t) = approx(&["--op", "truncate", "--k", "2"], "v.json");
    let FieldData::Vector(tr) = t.unwrap().field else { panic!("vector expected") };
    for (a, b) in tr.iter().zip(&rows) {
        assert_eq!(a, &vec![b[0], b[1], 0.0]);
    }
    let (_, d) = approx(&["--op", "density"], "v.json");
    assert!(d.unwrap().density.unwrap().ok);
    let ladder = fs::read_to_string(p("a.csv")).unwrap();
    assert_eq!(ladder.lines().next(), Some("k,error,rho_norm,rho_violations"));
    assert_eq!(ladder.lines().count(), 4);
    let (_, l) = approx(&["--op", "lipschitz", "--l", "0.5"], "u.json");
    assert!(matches!(l.unwrap().field, FieldData::Scalar(_)));
    // A vector field has no scalar Lipschitz approximant; a missing level is a config error.
    assert_eq!(approx(&["--op", "lipschitz", "--l", "0.5"], "v.json").0, Some(2));
    assert_eq!(approx(&["--op", "truncate"], "v.json").0, Some(2));
    // --op needs a space file.
    let st = bin().args(["grad", "--op", "sharp", "--field", "radial"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
}
