use std::path::PathBuf;

use clap::Parser;
use supergeo::model::Model;
use supergeo_cli::{parse_value, run, Cli, Outcome, EXIT_DOMAIN, EXIT_FAIL, EXIT_INPUT, EXIT_PASS};

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> String {
    models().join(name).display().to_string()
}

fn cli(args: &[&str]) -> Outcome {
    let mut argv = vec!["supergeo"];
    argv.extend_from_slice(args);
    run(Cli::try_parse_from(argv).expect("arguments parse"))
}

fn temp_file(name: &str, contents: &str) -> String {
    let dir = std::env::temp_dir().join(format!("supergeo-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.display().to_string()
}

fn last_row(csv: &str) -> Vec<(String, f64)> {
    let mut lines = csv.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let last = lines.last().unwrap();
    header
        .into_iter()
        .zip(last.split(',').map(|v| v.parse::<f64>().unwrap()))
        .collect()
}

#[test]
fn bundled_models_meet_their_expectations() {
    let mut seen = 0;
    for entry in std::fs::read_dir(models()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("model") {
            continue;
        }
        let m = Model::load(&path).unwrap();
        assert!(!m.expect.is_empty(), "{} declares no expectations", path.display());
        for (check, verdict) in &m.expect {
            let out = cli(&["check", check, "--model", path.to_str().unwrap()]);
            let want = if verdict == "pass" { EXIT_PASS } else { EXIT_FAIL };
            assert_eq!(out.code, want, "{} {check}:\n{}{}", path.display(), out.stdout, out.stderr);
            seen += 1;
        }
    }
    assert!(seen >= 15);
}

#[test]
fn flat_geodesic_is_a_straight_line() {
    let out = cli(&["geodesic", "--model", &model("flat.model"), "--x", "1", "--v", "2", "--t-end", "0.5"]);
    assert_eq!(out.code, EXIT_PASS, "{}", out.stderr);
    let row = last_row(&out.stdout);
    assert_eq!(row[0], ("t".into(), 0.5));
    assert!((row[1].1 - 2.0).abs() < 1e-12);
}

#[test]
fn log_model_reaches_ln_two() {
    let out = cli(&["geodesic", "--model", &model("log1d.model"), "--x", "0", "--v", "1"]);
    let row = last_row(&out.stdout);
    let x = row.iter().find(|(k, _)| k == "x1[body]").unwrap().1;
    assert!((x - 2f64.ln()).abs() < 1e-6);
}

#[test]
fn metric_model_energy_column_is_constant() {
    let out = cli(&["geodesic", "--model", &model("surface.model"), "--x", "1;0", "--v", "0.3;0.4"]);
    assert_eq!(out.code, EXIT_PASS, "{}", out.stderr);
    let mut lines = out.stdout.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "energy[body]").unwrap();
    let energies: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    let e0 = energies[0];
    assert!((e0 - 0.5 * (0.09 + 0.16)).abs() < 1e-12);
    assert!(energies.iter().all(|e| (e - e0).abs() < 1e-8));
}

#[test]
fn nilpotent_velocity_columns() {
    // flat 1|0 line with v = 1 + θ₁θ₂: x(t) = t + t·θ₁θ₂
    let path = temp_file("flat2.model", "[model]\neven = x1\n[christoffel]\n[settings]\ngenerators = 2\n");
    let out = cli(&["geodesic", "--model", &path, "--x", "0", "--v", "1@body,1@12"]);
    let row = last_row(&out.stdout);
    let get = |k: &str| row.iter().find(|(h, _)| h == k).unwrap().1;
    assert!((get("x1[body]") - 1.0).abs() < 1e-12);
    assert!((get("x1[12]") - 1.0).abs() < 1e-12);
}

#[test]
fn projective_verdicts() {
    let inits = temp_file("inits.txt", "# x | v\n0 | 1\n0.5 | 2\n");
    let out = cli(&["projective", "--model", &model("flat.model"), "--model-b", &model("log1d.model"), "--inits", &inits]);
    assert_eq!(out.code, EXIT_PASS, "{}", out.stdout);
    assert!(out.stdout.ends_with("EQUIVALENT\n"));
    assert!(out.stdout.contains(&format!("r(t_end) = {}", 2f64.ln()).as_str()[..20]));

    let same = cli(&["projective", "--model", &model("log1d.model"), "--model-b", &model("log1d.model"), "--inits", &inits]);
    assert_eq!(same.code, EXIT_PASS);
    assert!(same.stdout.contains("r(t_end) = 1\n"), "{}", same.stdout);

    let shifted = cli(&["projective", "--model", &model("log1d.model"), "--inits", &inits]);
    assert_eq!(shifted.code, EXIT_PASS, "{}", shifted.stdout);

    let inits2 = temp_file("inits2.txt", "1;0 | 0.3;0.2\n");
    let bad = cli(&["projective", "--model", &model("surface.model"), "--model-b", &model("perturbed.model"), "--inits", &inits2]);
    assert_eq!(bad.code, EXIT_FAIL);
    assert!(bad.stdout.contains("NOT-EQUIVALENT"));

    let twisted = cli(&["projective", "--model", &model("twisted.model"), "--model-b", &model("twisted.model"), "--inits", &inits2]);
    assert_eq!(twisted.code, EXIT_INPUT);
}

#[test]
fn exit_codes_for_bad_input_and_blow_up() {
    let broken = temp_file("broken.model", "[model]\neven = x1\n[christoffel]\nGamma(1,1,1) = \"x1 +\"\n");
    let out = cli(&["check", "torsion", "--model", &broken]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("line 4"), "{}", out.stderr);

    let out = cli(&["geodesic", "--model", &model("flat.model"), "--x", "0;1", "--v", "1"]);
    assert_eq!(out.code, EXIT_INPUT);

    let out = cli(&["check", "compatibility", "--model", &model("flat.model")]);
    assert_eq!(out.code, EXIT_INPUT);

    let out = cli(&["geodesic", "--model", &model("log1d.model"), "--x", "0", "--v", "-2", "--t-end", "2"]);
    assert_eq!(out.code, EXIT_DOMAIN);
    let t: f64 = out
        .stderr
        .lines()
        .find_map(|l| l.strip_prefix("last valid time: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((t - 0.5).abs() < 0.01, "{t}");
}

#[test]
fn output_is_deterministic_and_can_go_to_a_file() {
    let args = ["check", "intertwine", "--model", &model("super22.model"), "--seed", "11"];
    let a = cli(&args);
    let b = cli(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.code, EXIT_PASS);

    let dir = std::env::temp_dir().join(format!("supergeo-cli-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("traj.csv");
    let out = cli(&[
        "geodesic",
        "--model",
        &model("flat.model"),
        "--x",
        "0",
        "--v",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    let again = cli(&["geodesic", "--model", &model("flat.model"), "--x", "0", "--v", "1"]);
    assert_eq!(written, again.stdout);
}

#[test]
fn coefficient_literals() {
    let v = parse_value("1.0@body,0.5@12", 2).unwrap();
    assert_eq!(v.to_string(), "1 + 0.5*t1^t2");
    assert_eq!(parse_value("2@21", 2).unwrap().to_string(), "-2*t1^t2");
    assert_eq!(parse_value("3", 0).unwrap().body(), 3.0);
    assert_eq!(parse_value("1@1.10", 10).unwrap().coefficient((1 << 0) | (1 << 9)), 1.0);
    assert!(parse_value("1@3", 2).is_err());
    assert!(parse_value("1@11", 2).is_err());
    assert!(parse_value("x@1", 2).is_err());
}
