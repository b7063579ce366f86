use std::process::{Command, Output};

fn shapeinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapeinv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid json")
}

#[test]
fn validate_morse_passes() {
    let o = shapeinv(&["validate", "--preset", "morse"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["result"]["passed"], true);
    assert!(v["result"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == true));
}

#[test]
fn oscillator_spectrum_csv() {
    let o = shapeinv(&[
        "spectrum",
        "--preset",
        "shifted_oscillator",
        "--alpha",
        "1.5",
        "--m",
        "0",
        "--nmax",
        "6",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: "));
    assert_eq!(
        lines.next().unwrap(),
        "n,energy,table_energy,mu,factorization_energy"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    assert_eq!(rows.len(), 7);
    for (n, r) in rows.iter().enumerate() {
        assert_eq!(r[1], 1.5 * (n as f64 + 1.0));
    }
}

#[test]
fn crosscheck_reports_mu_column() {
    let o = shapeinv(&[
        "crosscheck",
        "--preset",
        "shifted_oscillator",
        "--nmax",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let mu: Vec<&serde_json::Value> = v["result"]["findings"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| f["column"] == "mu")
        .collect();
    assert_eq!(mu.len(), 5);
    for f in mu {
        let n = f["n"].as_f64().unwrap();
        assert!((f["printed"].as_f64().unwrap() - n.sqrt()).abs() < 1e-15);
        assert_eq!(f["direct"].as_f64().unwrap(), 1.0);
    }
}

#[test]
fn invalid_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut spec: serde_json::Value = serde_json::from_str(
        &shapeinv::master_catalog::Preset::Morse
            .spec(-41.0, 1.0)
            .to_json(),
    )
    .unwrap();
    spec["interval"] = serde_json::json!([2.0, 1.0]);
    std::fs::write(&path, spec.to_string()).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(shapeinv(&["validate", "--spec", p]).status.code(), Some(2));
    assert_eq!(shapeinv(&["spectrum", "--spec", p]).status.code(), Some(2));
}

#[test]
fn spec_file_roundtrip_and_output_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scarf.json");
    std::fs::write(
        &path,
        shapeinv::master_catalog::Preset::Scarf1Trigonometric
            .spec(1.0, 2.0)
            .to_json(),
    )
    .unwrap();
    let out = dir.path().join("out.json");
    let o = shapeinv(&[
        "spectrum",
        "--spec",
        path.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(
        v["result"]["levels"][0]["energy"],
        v["result"]["levels"][0]["table_energy"]
    );
}

#[test]
fn parse_errors_carry_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"name\": \"x\",\n  oops\n}").unwrap();
    let o = shapeinv(&["validate", "--spec", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("broken.json:3:"), "{err}");
}

#[test]
fn unknown_flag_rejected() {
    let o = shapeinv(&["spectrum", "--preset", "morse", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_symmetry_exits_2() {
    let o = shapeinv(&["cat", "--preset", "morse"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergent_state_exits_3() {
    let o = shapeinv(&[
        "mucs",
        "--preset",
        "shifted_oscillator",
        "--mode",
        "two-term",
        "--k0",
        "9",
        "--ntrunc",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_is_echoed_with_defaults() {
    let v = json(&shapeinv(&["aocs", "--preset", "scarf1_trigonometric"]));
    let c = &v["config"];
    assert_eq!(c["subcommand"], "aocs");
    assert_eq!(c["npoints"], 200);
    assert_eq!(c["ntrunc"], 60);
    assert_eq!(c["t"].as_array().unwrap().len(), 4);
}

#[test]
fn json_is_byte_stable() {
    let args = ["evolve", "--preset", "morse", "--t-steps", "5"];
    assert_eq!(shapeinv(&args).stdout, shapeinv(&args).stdout);
    let text = stdout(&shapeinv(&args));
    // keys sorted at the top level, floats with 17 significant digits
    assert!(text.find("\"config\"").unwrap() < text.find("\"result\"").unwrap());
    assert!(text.contains("\"b0\": 0.0000000000000000e0") || text.contains("\"b0\": -"));
}

#[test]
fn every_subcommand_runs_on_the_oscillator() {
    for sub in [
        "validate",
        "orthopoly",
        "spectrum",
        "wavefunction",
        "operators",
        "classical",
        "mucs",
        "aocs",
        "cat",
        "evolve",
        "audit",
        "crosscheck",
    ] {
        let o = shapeinv(&[sub, "--preset", "shifted_oscillator"]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{sub}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn audit_passes_on_presets() {
    for p in ["three_dim_oscillator", "gen_poschl_teller"] {
        let v = json(&shapeinv(&["audit", "--preset", p, "--m", "1"]));
        assert_eq!(
            v["result"]["all_passed"], true,
            "{p}: {}",
            v["result"]["checks"]
        );
    }
}

#[test]
fn printed_recursion_is_reported() {
    let v = json(&shapeinv(&[
        "mucs",
        "--preset",
        "shifted_oscillator",
        "--mode",
        "printed",
        "--k0",
        "0.3",
    ]));
    assert!(v["result"]["audit"]["eigen_residual"].as_f64().unwrap() > 1e-3);
    assert!(
        v["result"]["comparison"]["overlap_with_recursion"]
            .as_f64()
            .unwrap()
            < 1.0 - 1e-3
    );
}

#[test]
fn crosscheck_all_needs_no_spec() {
    let o = shapeinv(&["crosscheck", "--all"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let summary = v["result"]["summary"].as_array().unwrap();
    let presets: std::collections::BTreeSet<_> = summary
        .iter()
        .map(|r| r["preset"].as_str().unwrap())
        .collect();
    assert_eq!(presets.len(), 8);
    assert!(summary
        .iter()
        .filter(|r| r["column"] == "energy")
        .all(|r| r["reproduced"] == true));
    assert_eq!(shapeinv(&["crosscheck"]).status.code(), Some(2));
}
