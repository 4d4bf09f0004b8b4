use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sparse_poisson::sim::{method_proposed, ScaleRule, SparsityRule};
use sparse_poisson::{CountPredictive, CountVector, SamplingRatios};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-poisson"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn header_value(text: &str, key: &str) -> Option<String> {
    let prefix = format!("# {key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

#[test]
fn predict_single_row_example() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.csv", "id,x\na,0\n");
    let o = run(&["predict", "--input", &input, "--r", "1", "--kappa", "1", "--scale", "fixed:0.025"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "id,x,r,omega,mean,median,q05,q25,q75,q95,p_zero,set_lo,set_hi");
    let row = &data_rows(&text)[0];
    assert_eq!(row[0], "a");
    let omega: f64 = row[3].parse().unwrap();
    let mean: f64 = row[4].parse().unwrap();
    assert!((omega - 0.97561).abs() < 1e-5);
    assert!((mean - 0.024390).abs() < 1e-6);
}

#[test]
fn predict_records_automatic_scale() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.csv", "id,x\na,0\nb,3\nc,0\nd,1\n");
    let o = run(&["predict", "--input", &input, "--r", "1", "--kappa", "0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let l: f64 = header_value(&text, "L").unwrap().parse().unwrap();
    let eta: f64 = header_value(&text, "eta_hat").unwrap().parse().unwrap();
    let h: f64 = header_value(&text, "h").unwrap().parse().unwrap();
    assert!((l - 0.39240).abs() < 1e-5);
    assert_eq!(eta, 0.5);
    assert!((h - l * eta).abs() < 1e-15);
}

#[test]
fn predict_output_round_trips() {
    let dir = TempDir::new().unwrap();
    let xs = [0u64, 2, 0, 17, 1, 0, 0, 5];
    let rs = [1.0, 2.0, 0.5, 1.0, 3.0, 1.0, 1.5, 0.7];
    let mut body = String::from("id,x,r\n");
    for (i, (x, r)) in xs.iter().zip(&rs).enumerate() {
        body.push_str(&format!("c{i},{x},{r}\n"));
    }
    let input = write(&dir, "in.csv", &body);
    let out = dir.path().join("out.csv");
    let o = run(&[
        "predict", "--input", &input, "--r-column", "r", "--scale", "auto-lbar", "--kappa", "0.5",
        "--output", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();

    let ratios = SamplingRatios::per_coordinate(rs.to_vec()).unwrap();
    let x = CountVector::new(xs.to_vec()).unwrap();
    let fit = method_proposed(&[x], &ratios, 0.5, ScaleRule::AutoLbar, SparsityRule::Count).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), xs.len());
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], format!("c{i}"));
        assert_eq!(row[1].parse::<u64>().unwrap(), xs[i]);
        assert_eq!(row[3].parse::<f64>().unwrap(), fit.density.omega(i));
        assert_eq!(row[4].parse::<f64>().unwrap(), fit.density.coord_mean(i));
        assert_eq!(row[5].parse::<u64>().unwrap(), fit.density.coord_quantile(i, 0.5).unwrap());
        assert_eq!(row[10].parse::<f64>().unwrap(), fit.density.p_zero(i));
        let (lo, hi): (u64, u64) = (row[11].parse().unwrap(), row[12].parse().unwrap());
        assert!(lo <= hi);
    }
}

#[test]
fn predict_data_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.csv", "id,x\na,0\n");
    let o = run(&["predict", "--input", &input, "--r-column", "ratio"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write(&dir, "bad.csv", "id,x\na,0\nb,-3\n");
    let o = run(&["predict", "--input", &bad, "--r", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let missing = write(&dir, "missing.csv", "id,x\na,\n");
    assert_eq!(run(&["predict", "--input", &missing, "--r", "1"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.csv", "id,x\na,0\n");
    assert_eq!(run(&["predict", "--input", &input]).status.code(), Some(1));
    assert_eq!(run(&["predict", "--input", &input, "--r", "1", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["predict", "--input", &input, "--r", "1", "--alpha", "1.5"]).status.code(), Some(1));
    assert_eq!(run(&["predict", "--input", &input, "--r", "1", "--kappa", "0"]).status.code(), Some(1));
    assert_eq!(
        run(&["predict", "--input", &input, "--r", "1", "--r-column", "r"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["predict", "--input", &input, "--r", "1", "--scale", "fixed:x"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

fn table_config(dir: &TempDir, r: f64, trials: usize) -> String {
    let cfg = format!(
        r#"{{
  "n": 200, "s": 5,
  "sparsity": {{"kind": "exact"}},
  "ratios": {{"kind": "scalar", "r": {r}}},
  "trials": {trials}, "seed": 20240501,
  "methods": [
    {{"kind": "proposed", "kappa": 0.1, "scale": "auto-lstar", "sparsity": "count"}},
    {{"kind": "l1-plugin", "lambda_reg": 0.1}}
  ]
}}"#
    );
    write(dir, "cfg.json", &cfg)
}

#[test]
fn simulate_table_one() {
    let dir = TempDir::new().unwrap();
    let cfg = table_config(&dir, 1.0, 500);
    let o = run(&["simulate", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(header_value(&text, "seed").as_deref(), Some("20240501"));
    let rows = data_rows(&text);
    let get = |method: &str, metric: &str| -> String {
        rows.iter()
            .find(|r| r[0].starts_with(method) && r[1] == metric)
            .map(|r| r[2].clone())
            .unwrap()
    };
    let l1: f64 = get("proposed", "l1").parse().unwrap();
    let pll: f64 = get("proposed", "pll").parse().unwrap();
    assert!((l1 - 18.8).abs() <= 2.0, "{l1}");
    assert!((pll + 15.4).abs() <= 1.5, "{pll}");
    assert_eq!(get("l1-plugin", "pll"), "-Inf");
}

#[test]
fn simulate_is_deterministic_and_marks_missing_sd() {
    let dir = TempDir::new().unwrap();
    let cfg = table_config(&dir, 20.0, 30);
    let a = run(&["simulate", "--config", &cfg, "--trials", "1"]);
    assert!(a.status.success());
    let text = stdout(&a);
    assert_eq!(header_value(&text, "trials").as_deref(), Some("1"));
    for row in data_rows(&text) {
        assert_eq!(row[3], "", "{row:?}");
    }
    let b = run(&["simulate", "--config", &cfg]);
    let c = run(&["simulate", "--config", &cfg]);
    assert_eq!(b.stdout, c.stdout);
    let d = bin().env("SPARSE_POISSON_THREADS", "3").args(["simulate", "--config", &cfg]).output().unwrap();
    assert_eq!(b.stdout, d.stdout);
}

#[test]
fn simulate_rejects_invalid_config() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"n": 10, "s": 20}"#);
    assert_eq!(run(&["simulate", "--config", &bad]).status.code(), Some(1));
    let cfg = table_config(&dir, 1.0, 10);
    let text = fs::read_to_string(&cfg).unwrap().replace("\"s\": 5", "\"s\": 500");
    let cfg = write(&dir, "big_s.json", &text);
    assert_eq!(run(&["simulate", "--config", &cfg]).status.code(), Some(1));
    let nowhere = dir.path().join("nope.json");
    assert_eq!(run(&["simulate", "--config", nowhere.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn verify_reports_constants() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("verify.json");
    let o = run(&["verify", "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["ratio_decreasing"], true);
    assert_eq!(v["estimation_ratio_decreasing"], true);
    assert_eq!(v["sandwich_holds"], true);
    assert_eq!(v["argmax_near_lambda_star"], true);
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 5);
    for e in entries {
        for key in ["eta", "sup_rho", "argmax", "ratio", "rho0", "estimation_ratio", "lower_bound", "upper_bound"] {
            assert!(e[key].is_number(), "{key}");
        }
    }
    let last = entries.last().unwrap();
    assert!((last["argmax"].as_f64().unwrap() - std::f64::consts::LN_2).abs() <= 0.1);
}

#[test]
fn risk_curve_outputs() {
    let o = run(&["risk-curve", "--h", "0.025", "--lambdas", "0"]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let rho0: f64 = rows[0][1].parse().unwrap();
    assert!((rho0 - 0.012_270_092_591_814).abs() < 1e-12);

    let args = ["risk-curve", "--h", "0.001", "--kappa", "0.1", "--r", "20", "--grid", "1e-4:50:100"];
    let a = run(&args);
    let rows = data_rows(&stdout(&a));
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() >= 0.0));
    assert_eq!(a.stdout, run(&args).stdout);

    assert_eq!(run(&["risk-curve", "--h", "0.1", "--grid", "5:1:10"]).status.code(), Some(1));
}

#[test]
fn output_file_matches_stdout() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("curve.csv");
    let args = ["risk-curve", "--h", "0.01", "--lambdas", "0,0.5,2"];
    let a = run(&args);
    let mut with_file: Vec<&str> = args.to_vec();
    with_file.extend(["--output", out.to_str().unwrap()]);
    assert!(run(&with_file).status.success());
    assert_eq!(a.stdout, fs::read(Path::new(&out)).unwrap());
}
