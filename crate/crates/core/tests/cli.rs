use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_radcmp"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn schema(name: &str) -> serde_json::Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schema")
        .join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    if let Some(w) = workers {
        cmd.env("RADCMP_WORKERS", w);
    }
    cmd.output().unwrap()
}

const SMALL: &str =
    "n = 2\nseed = 3\n[m1]\nkind = \"warped-round\"\n[m2]\n{M2}\n[sampler]\ndirections = 16\n\
                     [quadrature]\nnodes = 65\n[lipschitz]\npairs = 400\n";

fn small(m2: &str) -> String {
    SMALL.replace("{M2}", m2)
}

fn profile_csv(f: impl Fn(f64) -> (f64, f64, f64)) -> String {
    let mut csv = String::from("t,f,fp,fpp\n");
    for i in 0..=400 {
        let t = std::f64::consts::PI * i as f64 / 400.0;
        let (v, d, dd) = f(t);
        csv.push_str(&format!("{t},{v},{d},{dd}\n"));
    }
    csv
}

#[test]
fn exit_codes_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("short.csv"),
        profile_csv(|t| {
            (
                (0.9 * t).sin() / 0.9,
                (0.9 * t).cos(),
                -0.9 * (0.9 * t).sin(),
            )
        }),
    )
    .unwrap();
    let cases = [
        (small("kind = \"warped-round\""), 0),
        (small("kind = \"warped-bump\"\nbeta = 1e-4"), 0),
        (small("kind = \"synthetic-constant\"\nkappa = 1.02"), 2),
        (small("kind = \"warped-round\"").replace("kind = \"warped-round\"\n[m2]", "kind = \"synthetic-constant\"\nkappa = 2.25\n[m2]"), 4),
        (small("kind = \"warped-table\"\npath = \"short.csv\"\ncurvature_at_p = 0.81\ncurvature_at_q = 0.81"), 4),
        (small("kind = \"warped-round\"") + "[isometry]\nkind = \"matrix\"\nrows = [[1.0, 0.2], [0.0, 1.0]]\n", 1),
        (small("kind = \"no-such-model\""), 1),
    ];
    for (i, (body, want)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.toml"), body);
        let out = run(
            &["--deterministic", "run", "--config", cfg.to_str().unwrap()],
            None,
        );
        assert_eq!(
            out.status.code(),
            Some(*want),
            "case {i}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        if *want == 1 {
            assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
        } else {
            let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
            assert_eq!(report["exit_code"], *want);
        }
    }
}

#[test]
fn non_orthogonal_isometry_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let body = small("kind = \"warped-round\"")
        + "[isometry]\nkind = \"matrix\"\nrows = [[1.0, 0.2], [0.0, 1.0]]\n";
    let cfg = write_config(dir.path(), "q.toml", &body);
    let out = run(&["run", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not orthogonal"));
}

#[test]
fn reports_are_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("charted_perturbed.toml");
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}.json"));
        let curves = dir.path().join(format!("c{i}.csv"));
        let o = run(
            &[
                "--deterministic",
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--curves",
                curves.to_str().unwrap(),
            ],
            Some(workers),
        );
        assert!(o.status.code().is_some());
        outputs.push((fs::read(&out).unwrap(), fs::read(&curves).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn timings_only_without_deterministic_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &small("kind = \"warped-round\""));
    let timed = run(&["run", "--config", cfg.to_str().unwrap()], None);
    let report: serde_json::Value = serde_json::from_slice(&timed.stdout).unwrap();
    assert!(report["timings"].as_array().is_some_and(|t| !t.is_empty()));
}

#[test]
fn reports_and_configs_match_published_schemas() {
    let config_schema = schema("config.schema.json");
    let report_schema = schema("report.schema.json");
    let id = config_schema["$id"].as_str().unwrap().to_string();
    let report_validator = jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft7)
        .with_document(id, config_schema.clone())
        .compile(&report_schema)
        .unwrap();
    let config_validator = jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft7)
        .compile(&config_schema)
        .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut checked = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let as_json: serde_json::Value =
            toml::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        if let Err(errors) = config_validator.validate(&as_json) {
            let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
            panic!("{}: {msgs:?}", path.display());
        }
        let out = dir.path().join("r.json");
        let o = run(
            &[
                "--deterministic",
                "run",
                "--config",
                path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            None,
        );
        assert!(matches!(o.status.code(), Some(0 | 2)), "{}", path.display());
        let report: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
        if let Err(errors) = report_validator.validate(&report) {
            let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
            panic!("{}: {msgs:?}", path.display());
        }
        checked += 1;
    }
    assert!(checked >= 4);
}

#[test]
fn curves_have_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &small("kind = \"warped-bump\"\nbeta = 1e-4"),
    );
    let curves = dir.path().join("curves.csv");
    let o = run(
        &[
            "compare",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "/dev/null",
            "--curves",
            curves.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&curves).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,lambda,phi_max,envelope_max"));
    assert_eq!(lines.count(), 65);

    let lam = dir.path().join("lambda.csv");
    let rep = dir.path().join("lambda.json");
    let o = run(
        &[
            "lambda",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            lam.to_str().unwrap(),
            "--report",
            rep.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&lam).unwrap();
    assert!(text.starts_with("t,lambda\n"));
    assert_eq!(text.lines().count(), 66);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&rep).unwrap()).unwrap();
    assert!(report["lambda"]["integral"].as_f64().unwrap() > 0.0);
    assert_eq!(report["lambda"]["sampler"]["directions"], 16);
}

#[test]
fn constants_and_keylemma_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &small("kind = \"synthetic-constant\"\nkappa = 1.02"),
    );
    let o = run(&["constants", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["c1", "c2", "c3", "c", "delta_n", "epsilon_n"] {
        assert!(r["constants"][key].is_number(), "{key}");
    }
    assert!(r["key_lemma"].is_null());

    let out = dir.path().join("kl.json");
    let o = run(
        &[
            "keylemma",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    let r: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let k = &r["key_lemma"];
    assert_eq!(k["hypothesis_met"], false);
    assert!(k["directions"][0]["envelope"].is_number());
    assert!(r["lipschitz"].is_null());
}

#[test]
fn mollify_check_with_grid_dump() {
    let dir = tempfile::tempdir().unwrap();
    let body = small("kind = \"warped-bump\"\nbeta = 1e-3") + "[output]\ngrid_nodes = 33\n";
    let cfg = write_config(dir.path(), "c.toml", &body);
    let dump = dir.path().join("grid.csv");
    let out = dir.path().join("m.json");
    let o = run(
        &[
            "mollify-check",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid-dump",
            dump.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(r["mollifier"]["pass"], true);
    assert!(
        r["mollifier"]["params"]["defaults_used"]
            .as_array()
            .unwrap()
            .len()
            >= 3
    );
    let text = fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("x1,x2,Fx1,Fx2\n"));
    assert_eq!(text.lines().count(), 33 * 33 + 1);
}

#[test]
fn sweep_writes_points_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &small("kind = \"synthetic-constant\"\nkappa = 1.0"),
    );
    let out = dir.path().join("sweep");
    let o = run(
        &[
            "--deterministic",
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--sweep",
            "m2.kappa=1.0:1.02:3",
            "--out-dir",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for i in 0..3 {
        assert!(out.join(format!("point-{i:03}.json")).exists());
    }
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][3], "HypothesisMetAndVerified");
    assert_eq!(&rows[2][3], "HypothesisNotMet");
    let last: f64 = rows[2][5].parse().unwrap();
    assert!((last - 0.02 * std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn table_profile_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("round.csv"),
        profile_csv(|t| (t.sin(), t.cos(), -t.sin())),
    )
    .unwrap();
    let body = small(
        "kind = \"warped-table\"\npath = \"round.csv\"\ncurvature_at_p = 1.0\ncurvature_at_q = 1.0",
    );
    let cfg = write_config(dir.path(), "c.toml", &body);
    let o = run(
        &[
            "--deterministic",
            "lambda",
            "--config",
            cfg.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["lambda"]["integral"].as_f64().unwrap() < 1e-6);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &small("kind = \"warped-bump\"\nbeta = 1e-3"),
    );
    let o = run(
        &[
            "--deterministic",
            "--seed",
            "99",
            "lambda",
            "--config",
            cfg.to_str().unwrap(),
        ],
        None,
    );
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["config"]["sampler"]["seed"], 99);
    assert_eq!(r["config"]["seed"], 99);
}
