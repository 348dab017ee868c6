use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emv_cli::commands::compare_ladder;
use emv_cli::config::{load_config, parse_config, Overrides};
use emv_cli::io::load_ensemble;

fn emv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emv"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|x| x.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let cfg = load_config(Some(&p), &Overrides::default());
        assert!(cfg.is_ok(), "{}: {:?}", p.display(), cfg.err());
        n += 1;
    }
    assert!(n >= 3);
}

#[test]
fn ensemble_then_stats_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ens");
    let o = emv(&[
        "ensemble",
        "--preset",
        "burgers-example32",
        "--resolution",
        "32",
        "--samples",
        "16",
        "--end-time",
        "0.5",
        "--output",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let loaded = load_ensemble(&out).unwrap();
    assert_eq!(loaded.manifest.samples, 16);
    assert_eq!(loaded.manifest.preset, "burgers-example32");
    assert_eq!(loaded.snapshots.last().unwrap().time, 0.5);
    assert_eq!(loaded.snapshots[0].sample_count(), 16);

    let o = emv(&["stats", "--input", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stats = out.join("stats");
    let (header, rows) = read_csv(&stats.join("mean_t000.csv"));
    assert_eq!(header, ["x", "u"]);
    assert_eq!(rows.len(), 96);
    assert!(rows.iter().all(|r| (0.0..=2.0).contains(&r[1])));
    let (_, var) = read_csv(&stats.join("variance_t000.csv"));
    assert!(var.iter().all(|r| r[1] >= 0.0));
    let (_, pdf) = read_csv(&stats.join("pdf_t000_p00.csv"));
    let mass: f64 = pdf.iter().map(|r| (r[1] - r[0]) * r[2]).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(stats.join("summary.csv").exists());
}

#[test]
fn comparing_an_ensemble_with_itself_gives_zero_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let ens = tmp.path().join("ens");
    let o = emv(&[
        "ensemble",
        "--preset",
        "kh",
        "--resolution",
        "8",
        "--samples",
        "3",
        "--eps",
        "0.01",
        "--end-time",
        "0.05",
        "--output",
        path(&ens),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cmp = tmp.path().join("cmp");
    let o = emv(&["compare", path(&ens), path(&ens), "--output", path(&cmp)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&cmp.join("rates.csv"));
    assert_eq!(
        header[4..],
        [
            "mean_rate",
            "variance_rate",
            "sample_rate",
            "wasserstein_rate"
        ]
    );
    assert!(!rows.is_empty());
    for r in rows {
        assert!(r[4..].iter().all(|&x| x == 0.0), "{r:?}");
    }
}

#[test]
fn ladder_on_smooth_data_converges_at_second_order() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[problem]\npreset = \"smooth-burgers\"\n[grid]\nresolution = 32\n\
                [ensemble]\ntimes = [0.25]\n[compare]\nresolutions = [32, 64, 128, 256]\n";
    let cfg = parse_config(text, &Overrides::default()).unwrap();
    let table = compare_ladder(&cfg, tmp.path()).unwrap();
    let order = table
        .orders
        .iter()
        .find(|o| o.2 == "mean")
        .map(|o| o.3)
        .unwrap();
    assert!((1.7..=2.5).contains(&order), "order {order}");
    assert!(tmp.path().join("level_00128/manifest.txt").exists());
    assert!(tmp.path().join("orders.csv").exists());
}

fn error_json(o: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {stderr}"))
}

#[test]
fn validation_errors_exit_with_one() {
    let o = emv(&["ensemble", "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_json(&o);
    assert_eq!(e["kind"], "validation");
    assert_eq!(e["exit_code"], 1);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[problem]\npreset = \"kh\"\n[scheme]\nordr = 2\n").unwrap();
    let o = emv(&["ensemble", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(error_json(&o)["error"].as_str().unwrap().contains("ordr"));

    let o = emv(&["stats", "--input", path(&tmp.path().join("missing"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_failures_exit_with_two() {
    // Scalar-diffusion TeCNO loses positivity on the pressure pulse at once.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("rm.toml");
    std::fs::write(
        &cfg,
        "[problem]\npreset = \"rm\"\n[grid]\nresolution = 16\n[scheme]\ndiffusion = \"rusanov\"\n\
         [ensemble]\nsamples = 2\ntimes = [0.05]\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = emv(&["ensemble", "--config", path(&cfg), "--output", path(&out)]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let e = error_json(&o);
    assert_eq!(e["kind"], "solver");
    assert_eq!(e["sample"], 0);
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("sample 0 failed"));
}

#[test]
fn flags_override_config_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[problem]\npreset = \"smooth-burgers\"\n[grid]\nresolution = 16\n[ensemble]\nsamples = 4\nseed = 3\n\
         times = [0.1]\n[perturbation]\neps = 0.01\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = emv(&[
        "ensemble",
        "--config",
        path(&cfg),
        "--samples",
        "5",
        "--samples",
        "2",
        "--output",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = load_ensemble(&out).unwrap().manifest;
    assert_eq!(m.samples, 2);
    assert_eq!(m.seed, 3);
    assert_eq!(m.resolution, 16);
}

#[test]
fn run_and_oracle_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = emv(&[
        "run",
        "--preset",
        "burgers-riemann",
        "--resolution",
        "64",
        "--end-time",
        "0.5",
        "--output",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, num) = read_csv(&out.join("sample_000000_t000.csv"));

    let exact = tmp.path().join("oracle");
    let o = emv(&[
        "oracle",
        "--preset",
        "burgers-riemann",
        "--resolution",
        "64",
        "--time",
        "0.5",
        "--output",
        path(&exact),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, ex) = read_csv(&exact.join("oracle.csv"));
    assert_eq!(header, ["x", "u"]);
    assert_eq!(ex.len(), num.len());
    let l1: f64 = num
        .iter()
        .zip(&ex)
        .map(|(a, b)| (a[1] - b[1]).abs())
        .sum::<f64>()
        / 64.0;
    assert!(l1 < 0.05, "L1 error {l1}");
    let diag: PathBuf = out.join("diagnostics.csv");
    assert!(diag.exists());
}
