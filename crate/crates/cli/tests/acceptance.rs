//! End-to-end acceptance checks. Runs every criterion, prints one line per
//! criterion and exits non-zero if any failed.
//!
//! `EMV_ACCEPTANCE=3,4` restricts the run to the listed criteria.

use std::panic;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use emv::ensemble::{mc_error_curve, run_ensemble, space_time_average, EnsembleSpec, ExecPolicy};
use emv::grid::Field;
use emv::models::{Conversion, Model};
use emv::oracles::{example32_measure, transport_lp, PeriodicRiemann};
use emv::presets::Preset;
use emv::randfield::{PerturbKind, PerturbSpec, SampleSeed};
use emv::schemes::{evolve, SchemeConfig};
use emv::ymstats::{
    cauchy_rate_component, convergence_order, mean, wasserstein_1d, wasserstein_to_dirac,
    EmpiricalMeasure,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: pass flag and a short measurement summary.
type Outcome = (bool, String);

fn policy() -> ExecPolicy {
    ExecPolicy::default()
}

fn random_state(rng: &mut ChaCha8Rng, model: &Model) -> Vec<f64> {
    match model {
        Model::Burgers => vec![rng.gen_range(-5.0..5.0)],
        // covers the states the Euler presets reach
        _ => {
            let mut w = vec![rng.gen_range(0.5..5.0)];
            for _ in 0..model.ndim() {
                w.push(rng.gen_range(-2.0..2.0));
            }
            w.push(rng.gen_range(0.5..25.0));
            model.convert(&w, Conversion::PrimitiveToConserved).unwrap()
        }
    }
}

fn entropy_conservation_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut parts = Vec::new();
    let mut ok = true;
    for model in [Model::Burgers, Model::euler1d(), Model::euler2d()] {
        let mut worst = 0.0f64;
        for _ in 0..100_000 {
            let (ul, ur) = (
                random_state(&mut rng, &model),
                random_state(&mut rng, &model),
            );
            let axis = rng.gen_range(0..model.ndim());
            let f = model.ec_flux(&ul, &ur, axis).unwrap();
            let (l, r) = (
                model.entropy_structure(&ul).unwrap(),
                model.entropy_structure(&ur).unwrap(),
            );
            let lhs: f64 = (0..f.len()).map(|k| (r.v[k] - l.v[k]) * f[k]).sum();
            let dpsi = r.psi[axis] - l.psi[axis];
            worst = worst.max((lhs - dpsi).abs() / (1.0 + dpsi.abs()));
        }
        ok &= worst < 1e-12;
        parts.push(format!("{} {worst:.2e}", model.name()));
    }
    (
        ok,
        format!("max relative defect: {} (< 1e-12)", parts.join(", ")),
    )
}

fn wasserstein_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        for p in [1.0, 2.0] {
            let sorted = wasserstein_1d(
                &EmpiricalMeasure::new(a.clone()),
                &EmpiricalMeasure::new(b.clone()),
                p,
            )
            .unwrap()
            .powf(p);
            let lp = transport_lp(&a, &b, p).unwrap();
            worst = worst.max((sorted - lp).abs());
        }
    }
    (
        worst <= 1e-12,
        format!("max |W_p^p sorted − LP| {worst:.2e} (≤ 1e-12)"),
    )
}

/// Exact cell averages by midpoint sub-sampling.
fn exact_averages(field: &Field, exact: impl Fn(f64) -> f64) -> Vec<f64> {
    let g = &field.grid;
    let dx = g.dx(0);
    let sub = 64;
    (0..g.nx())
        .map(|i| {
            let x0 = g.center(i, 0)[0] - 0.5 * dx;
            (0..sub)
                .map(|k| exact(x0 + (k as f64 + 0.5) * dx / sub as f64))
                .sum::<f64>()
                / sub as f64
        })
        .collect()
}

fn l1(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}

fn monotone_convergence() -> Outcome {
    let preset = Preset::BurgersRiemann;
    let seed = SampleSeed::new(0, 0);
    let exact = preset.riemann_solution(seed).unwrap();
    let none = PerturbSpec::new(PerturbKind::None, 0.0);
    let (mut dx, mut err) = (Vec::new(), Vec::new());
    for res in [128, 256, 512, 1024, 2048] {
        let grid = preset.grid(res).unwrap();
        let u0 = preset.initial_field(&grid, &none, seed).unwrap();
        let ev = evolve(&preset.model(), &u0, &SchemeConfig::rusanov(), &[0.5]).unwrap();
        let u = &ev.snapshots[0];
        let reference = exact_averages(u, |x| exact.eval(x, 0.5));
        dx.push(grid.dx(0));
        err.push(l1(&u.data, &reference, grid.dx(0)));
    }
    let order = convergence_order(&dx, &err);
    let errs: Vec<String> = err.iter().map(|e| format!("{e:.2e}")).collect();
    (
        order >= 0.5,
        format!("L1 errors [{}], order {order:.3} (≥ 0.5)", errs.join(", ")),
    )
}

/// Self-convergence order from grids `n, 3n, 9n`, comparing point values at
/// coinciding cell centers.
fn self_convergence(order: usize, n: usize) -> f64 {
    let preset = Preset::SmoothBurgers;
    let none = PerturbSpec::new(PerturbKind::None, 0.0);
    let solve = |res: usize| {
        let grid = preset.grid(res).unwrap();
        let u0 = preset
            .initial_field(&grid, &none, SampleSeed::new(0, 0))
            .unwrap();
        evolve(&preset.model(), &u0, &SchemeConfig::tecno(order), &[0.25])
            .unwrap()
            .snapshots
            .remove(0)
    };
    let levels: Vec<Field> = [n, 3 * n, 9 * n].into_iter().map(solve).collect();
    let diff = |c: &Field, f: &Field| {
        let dx = c.grid.dx(0);
        (0..c.grid.nx())
            .map(|i| (c.data[i] - f.data[3 * i + 1]).abs())
            .sum::<f64>()
            * dx
    };
    let (e1, e2) = (diff(&levels[0], &levels[1]), diff(&levels[1], &levels[2]));
    (e1 / e2).ln() / 3f64.ln()
}

fn high_order_accuracy() -> Outcome {
    let p2 = self_convergence(2, 40);
    let p3 = self_convergence(3, 40);
    let ok = (1.7..=2.3).contains(&p2) && (2.5..=3.3).contains(&p3);
    (
        ok,
        format!("TeCNO2 order {p2:.3} (in [1.7, 2.3]), TeCNO3 order {p3:.3} (in [2.5, 3.3])"),
    )
}

fn max_entropy_increase(
    preset: Preset,
    res: usize,
    perturbation: PerturbSpec,
    scheme: &SchemeConfig,
    t: f64,
) -> f64 {
    let grid = preset.grid(res).unwrap();
    let u0 = preset
        .initial_field(&grid, &perturbation, SampleSeed::new(0, 3))
        .unwrap();
    let ev = evolve(&preset.model(), &u0, scheme, &[t]).unwrap();
    let increase = ev
        .diagnostics
        .windows(2)
        .map(|w| w[1].total_entropy - w[0].total_entropy)
        .fold(f64::NEG_INFINITY, f64::max);
    increase / grid.volume()
}

fn discrete_entropy_inequality() -> Outcome {
    let schemes = [
        ("rusanov", SchemeConfig::rusanov()),
        ("tecno1", SchemeConfig::tecno(1)),
        ("tecno2", SchemeConfig::tecno(2)),
        ("tecno3", SchemeConfig::tecno(3)),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for (name, scheme) in &schemes {
        let sod = max_entropy_increase(
            Preset::Sod,
            128,
            PerturbSpec::new(PerturbKind::Amplitude, 0.01),
            scheme,
            0.24,
        );
        let burgers = max_entropy_increase(
            Preset::SmoothBurgers,
            256,
            PerturbSpec::new(PerturbKind::RandomAmplitude, 0.05),
            scheme,
            1.0,
        );
        let riemann = max_entropy_increase(
            Preset::BurgersExample32,
            256,
            PerturbSpec::new(PerturbKind::None, 0.0),
            scheme,
            0.5,
        );
        let m = sod.max(burgers).max(riemann);
        worst = worst.max(m);
        parts.push(format!("{name} {m:.1e}"));
    }
    (
        worst <= 1e-10,
        format!(
            "max per-step increase / volume: {} (≤ 1e-10)",
            parts.join(", ")
        ),
    )
}

struct Example32Run {
    samples: usize,
    resolution: usize,
    /// `‖W₁(ν^{Δx,M}, ν_exact)‖_{L¹}` outside the influence of the periodic wrap.
    w_exact: f64,
    /// `‖W₁(ν^{Δx,M}, δ_{u(t)})‖_{L¹}` for the solution with mean initial data.
    w_mean_data: f64,
    /// Sample means at `x/t = 0, 1, 2`.
    means: [f64; 3],
}

const EXAMPLE32_T: f64 = 0.5;

fn example32_run(samples: usize, resolution: usize) -> Example32Run {
    let preset = Preset::BurgersExample32;
    let mut spec = EnsembleSpec::new(preset, resolution).unwrap();
    spec.samples = samples;
    spec.scheme = SchemeConfig::rusanov();
    spec.snapshot_times = vec![EXAMPLE32_T];
    let result = run_ensemble(&spec, policy()).unwrap();
    assert!(result.is_complete(), "{:?}", result.failures);
    let snap = &result.snapshots[0];
    let grid = &snap.grid;
    let dx = grid.dx(0);
    let (lo, hi) = preset.domain();
    let mean_data = PeriodicRiemann {
        ul: 1.5,
        ur: 0.5,
        x0: 0.0,
        lo: lo[0],
        hi: hi[0],
    };

    let (mut w_exact, mut w_mean_data) = (0.0, 0.0);
    let mut cell_means = Vec::with_capacity(grid.nx());
    for i in 0..grid.nx() {
        let x = grid.center(i, 0)[0];
        let values = snap.cell_values(i, 0).unwrap();
        let mu = EmpiricalMeasure::new(values.clone());
        // The closed-form measure is for the Cauchy problem on the line; the
        // wave from the periodic wrap at `lo` travels right at speed ≤ 2.
        if x >= lo[0] + 2.0 * EXAMPLE32_T {
            w_exact += example32_measure(x, EXAMPLE32_T)
                .unwrap()
                .w1_to_empirical(&values)
                * dx;
        }
        w_mean_data += wasserstein_to_dirac(&mu, mean_data.eval(x, EXAMPLE32_T), 1.0).unwrap() * dx;
        cell_means.push(mu.mean());
    }
    // x = ξ t sits on a cell face; average the two adjacent cells.
    let means = [0.0, 1.0, 2.0].map(|xi| {
        let k = ((xi * EXAMPLE32_T - lo[0]) / dx).round() as usize;
        0.5 * (cell_means[k - 1] + cell_means[k])
    });
    Example32Run {
        samples,
        resolution,
        w_exact,
        w_mean_data,
        means,
    }
}

fn example32_reproduction(coarse: &Example32Run, fine: &Example32Run) -> Outcome {
    let ratio = coarse.w_exact / fine.w_exact;
    let halves = ratio >= 1.6;
    let expected = [1.5, 1.0, 0.5];
    let dev = fine
        .means
        .iter()
        .zip(expected)
        .map(|(m, e)| (m - e).abs())
        .fold(0.0, f64::max);
    (
        halves && dev <= 0.02,
        format!(
            "(a) W1 error {:.4e} (M={}, 1/{}) -> {:.4e} (M={}, 1/{}), ratio {ratio:.3} (≥ 1.6); \
             (b) means at x/t=0,1,2: {:.4}, {:.4}, {:.4}, max deviation {dev:.4} (≤ 0.02)",
            coarse.w_exact,
            coarse.samples,
            coarse.resolution,
            fine.w_exact,
            fine.samples,
            fine.resolution,
            fine.means[0],
            fine.means[1],
            fine.means[2],
        ),
    )
}

fn w1_contraction(runs: &[&Example32Run]) -> Outcome {
    // σ is uniform on [1, 2] left of the jump and on [0, 1] right of it; its
    // distance to the Dirac at the mean is 1/4 per unit length.
    let (lo, hi) = Preset::BurgersExample32.domain();
    let initial = 0.25 * (hi[0] - lo[0]);
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs {
        let dx = 1.0 / run.resolution as f64;
        let bound = initial + 3.0 * (dx.sqrt() + (run.samples as f64).powf(-0.5));
        ok &= run.w_mean_data <= bound;
        parts.push(format!(
            "M={}, 1/{}: {:.4} ≤ {:.4}",
            run.samples, run.resolution, run.w_mean_data, bound
        ));
    }
    (ok, parts.join("; "))
}

fn mc_rate() -> Outcome {
    let mut spec = EnsembleSpec::new(Preset::BurgersExample32, 128).unwrap();
    spec.scheme = SchemeConfig::rusanov();
    spec.snapshot_times = vec![0.1, 0.2, 0.3, 0.4, 0.5];
    let m_list: Vec<usize> = (4..=10).map(|k| 1 << k).collect();
    let functional = |ev: &emv::schemes::Evolution| {
        space_time_average(
            &ev.snapshots,
            |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 },
            |u| u[0],
        )
    };
    let curve = mc_error_curve(&spec, &m_list, 8192, 8, policy(), functional).unwrap();
    let slope = curve.slope;
    let errs: Vec<String> = curve
        .points
        .iter()
        .map(|(m, e)| format!("{m}:{e:.2e}"))
        .collect();
    (
        (-0.65..=-0.35).contains(&slope),
        format!(
            "errors [{}], slope {slope:.3} (in [-0.65, -0.35])",
            errs.join(", ")
        ),
    )
}

fn total_variance(eps: f64) -> f64 {
    let mut spec = EnsembleSpec::new(Preset::SmoothBurgers, 256).unwrap();
    spec.samples = 32;
    spec.perturbation = PerturbSpec::new(PerturbKind::RandomAmplitude, eps);
    spec.snapshot_times = vec![0.25];
    let result = run_ensemble(&spec, policy()).unwrap();
    let (_, var) = emv::ymstats::snapshot_mean_variance(&result.snapshots[0], 0).unwrap();
    var.iter().sum::<f64>() * spec.grid.dx(0)
}

fn weak_strong_consistency() -> Outcome {
    let (a, b) = (total_variance(1e-2), total_variance(1e-3));
    let ratio = a / b;
    (
        (50.0..=200.0).contains(&ratio),
        format!("∫Var dx: {a:.3e} (ε=1e-2), {b:.3e} (ε=1e-3), ratio {ratio:.1} (in [50, 200])"),
    )
}

fn kelvin_helmholtz_dichotomy() -> Outcome {
    let mut means = Vec::new();
    let mut first = Vec::new();
    for res in [64, 128, 256] {
        let mut spec = EnsembleSpec::new(Preset::Kh, res).unwrap();
        spec.samples = 20;
        spec.perturbation = PerturbSpec::new(PerturbKind::KhSineInterface, 0.01);
        spec.snapshot_times = vec![1.0];
        let result = run_ensemble(&spec, policy()).unwrap();
        assert!(result.is_complete(), "{:?}", result.failures);
        let fields = result.snapshots[0].fields().unwrap();
        means.push(mean(fields).unwrap().as_field());
        first.push(fields[0].clone());
    }
    let mean_rates = [
        cauchy_rate_component(&means[0], &means[1], 0).unwrap(),
        cauchy_rate_component(&means[1], &means[2], 0).unwrap(),
    ];
    let single = cauchy_rate_component(&first[1], &first[2], 0).unwrap();
    let ok = single >= 3.0 * mean_rates[1] && mean_rates[1] < mean_rates[0];
    (
        ok,
        format!(
            "density mean-field rates {:.4e} (64→128), {:.4e} (128→256); single-sample rate {single:.4e} (128→256), \
             ratio {:.2} (≥ 3)",
            mean_rates[0],
            mean_rates[1],
            single / mean_rates[1]
        ),
    )
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("kh.toml");
    std::fs::write(
        &config,
        "[problem]\npreset = \"kh\"\n\n[grid]\nresolution = 16\n\n[perturbation]\nkind = \"kh-sine-interface\"\neps = 0.01\n\n\
         [ensemble]\nsamples = 8\nseed = 11\ntimes = [0.05, 0.1]\n",
    )
    .unwrap();
    let runs = [("t1a", 1), ("t1b", 1), ("t2", 2), ("t8", 8)];
    let mut outputs = Vec::new();
    for (name, threads) in runs {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_emv"))
            .arg("ensemble")
            .arg("--config")
            .arg(&config)
            .arg("--threads")
            .arg(threads.to_string())
            .arg("--output")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "ensemble with {threads} threads failed");
        outputs.push(dir_files(&out));
    }
    let files = outputs[0].len();
    let identical = files > 0 && outputs.iter().all(|o| *o == outputs[0]);
    (
        identical,
        format!("{files} files byte-identical across runs with 1, 1, 2, 8 workers"),
    )
}

fn main() -> ExitCode {
    let selected: Option<Vec<usize>> = std::env::var("EMV_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| selected.as_ref().map_or(true, |s| s.contains(&n));

    let mut failed = 0;
    let mut report = |n: usize, start: Instant, outcome: std::thread::Result<Outcome>| {
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = outcome.unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n}: {} {detail} [{secs:.1}s]",
            if ok { "PASS" } else { "FAIL" }
        );
    };
    let run = |f: fn() -> Outcome| panic::catch_unwind(f);

    let simple: [(usize, fn() -> Outcome); 4] = [
        (1, entropy_conservation_identity),
        (2, wasserstein_oracle),
        (3, monotone_convergence),
        (4, high_order_accuracy),
    ];
    for (n, f) in simple {
        if wanted(n) {
            let start = Instant::now();
            report(n, start, run(f));
        }
    }
    if wanted(5) {
        let start = Instant::now();
        report(5, start, run(discrete_entropy_inequality));
    }
    if wanted(6) || wanted(7) {
        let start = Instant::now();
        let runs = panic::catch_unwind(|| (example32_run(256, 256), example32_run(1024, 512)));
        match runs {
            Ok((coarse, fine)) => {
                if wanted(6) {
                    report(6, start, Ok(example32_reproduction(&coarse, &fine)));
                }
                if wanted(7) {
                    report(7, start, Ok(w1_contraction(&[&coarse, &fine])));
                }
            }
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().unwrap_or_default();
                for n in [6, 7].into_iter().filter(|&n| wanted(n)) {
                    report(n, start, Ok((false, format!("ensemble failed: {msg}"))));
                }
            }
        }
    }
    let rest: [(usize, fn() -> Outcome); 4] = [
        (8, mc_rate),
        (9, weak_strong_consistency),
        (10, kelvin_helmholtz_dichotomy),
        (11, determinism),
    ];
    for (n, f) in rest {
        if wanted(n) {
            let start = Instant::now();
            report(n, start, run(f));
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
