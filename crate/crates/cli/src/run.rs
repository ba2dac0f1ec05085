//! Execute a parsed experiment and write its artifacts.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use log::info;
use memspin_core::coupling::{
    fdt_check, kernel_moments, lorentzian_coupling, lorentzian_kernel_freq, lorentzian_kernel_time,
    ohmic_coupling, ohmic_kernel_freq,
};
use memspin_core::dynamics::{integrate, noise_for};
use memspin_core::experiments::{
    ensemble_average, equilibration_time, temperature_sweep, Method, SweepSpec,
};
use memspin_core::model::{LorentzianParams, SpinSystem};
use memspin_core::noise::{generate, WhiteSeed};
use memspin_core::spectral::{band_fidelity, welch};
use memspin_core::Execution;

use crate::config::{ExperimentConfig, Mode};
use crate::output::{metadata, write_csv};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Worker count; `Some(1)` forces sequential execution.
    pub workers: Option<usize>,
    /// Also write the noise traces used by trajectory runs.
    pub dump_noise: bool,
}

impl RunOptions {
    fn execution(&self) -> Execution {
        if self.workers == Some(1) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

/// Outcome of a run: written files, a human-readable summary and whether
/// every requested check held.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
    pub passed: bool,
}

pub const SUMMARY_FILE: &str = "summary.txt";

/// Run `cfg`, writing artifacts into `cfg.output`. A run that fails after
/// starting leaves a summary marked `status: failed`.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    fs::create_dir_all(&cfg.output)
        .with_context(|| format!("creating {}", cfg.output.display()))?;
    let summary_path = cfg.output.join(SUMMARY_FILE);
    let outcome = match cfg.mode {
        Mode::Trajectory => trajectory(cfg, opts),
        Mode::Ensemble => ensemble(cfg, opts),
        Mode::Sweep => sweep(cfg, opts),
        Mode::Validate => validate(cfg, opts),
    };
    match outcome {
        Ok(mut report) => {
            let status = if report.passed { "ok" } else { "checks failed" };
            let text = format!(
                "# {}\nmode: {}\nstatus: {status}\n{}",
                crate::output::TOOL,
                cfg.mode,
                report.summary
            );
            fs::write(&summary_path, &text)
                .with_context(|| format!("writing {}", summary_path.display()))?;
            report.artifacts.push(summary_path);
            report.summary = text;
            Ok(report)
        }
        Err(e) => {
            let text = format!(
                "# {}\nmode: {}\nstatus: failed\nerror: {e:#}\n",
                crate::output::TOOL,
                cfg.mode
            );
            // Best effort: the original error matters more than this write.
            let _ = fs::write(&summary_path, text);
            Err(e)
        }
    }
}

fn system(cfg: &ExperimentConfig) -> Result<SpinSystem> {
    Ok(SpinSystem::single(cfg.initial_spin, &cfg.frame())?)
}

fn trajectory(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let sys = system(cfg)?;
    let series = cfg.series();
    let mut header = vec!["t".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut artifacts = Vec::new();
    let mut summary = String::new();
    for s in &series {
        let icfg = cfg.integrator(s, cfg.temperature)?;
        let traj =
            integrate(&sys, &icfg, cfg.seed).with_context(|| format!("integrating {}", s.label))?;
        if columns.is_empty() {
            columns.push(traj.times.clone());
        }
        for (name, f) in [("sx", 0usize), ("sy", 1), ("sz", 2)] {
            header.push(format!("{}.{name}", s.label));
            columns.push(traj.spins[0].iter().map(|v| v[f]).collect());
        }
        header.push(format!("{}.norm", s.label));
        columns.push(traj.norms[0].clone());
        let _ = writeln!(
            summary,
            "{}: final sz = {:.6}, max |1 - |s|| = {:.3e}",
            s.label,
            traj.spins[0].last().map_or(f64::NAN, |v| v.z),
            traj.max_norm_deviation()
        );

        if opts.dump_noise {
            if let Some(traces) = noise_for(&icfg, 1, cfg.seed)? {
                let tr = &traces[0];
                let n = traj.len();
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|k| {
                        let b = tr.sample(k);
                        vec![traj.times[k], b.x, b.y, b.z]
                    })
                    .collect();
                let path = cfg.output.join(format!("noise_{}.csv", s.label));
                let meta = metadata(
                    cfg,
                    &[
                        ("series", s.label.clone()),
                        ("spectrum", tr.provenance.spectrum.clone()),
                    ],
                );
                write_csv(
                    &path,
                    &meta,
                    &["t", "bx", "by", "bz"].map(String::from),
                    &rows,
                )?;
                artifacts.push(path);
            }
        }
    }
    let rows = transpose(&columns);
    let path = cfg.output.join("trajectory.csv");
    let meta = metadata(
        cfg,
        &[
            ("series", labels(cfg)),
            ("temperature_K", cfg.temperature.to_string()),
        ],
    );
    write_csv(&path, &meta, &header, &rows)?;
    artifacts.insert(0, path);
    Ok(Report {
        artifacts,
        summary,
        passed: true,
    })
}

fn ensemble(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let sys = system(cfg)?;
    let mut header = vec!["t".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut summary = String::new();
    for s in cfg.series() {
        let icfg = cfg.integrator(&s, cfg.temperature)?;
        info!("ensemble {} with {} trajectories", s.label, cfg.n_traj);
        let e = ensemble_average(&sys, &icfg, cfg.n_traj, cfg.seed, opts.execution())
            .with_context(|| format!("ensemble for {}", s.label))?;
        let tail = &e.mean[e.mean.len() * 3 / 4..];
        let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
        let t_eq = equilibration_time(&e.times, &e.mean, 0.05)?;
        let _ = writeln!(
            summary,
            "{}: plateau {plateau:.4}, t_eq(5%) = {t_eq:.2}, used {} of {}, diverged seeds {:?}",
            s.label, e.used, cfg.n_traj, e.diverged
        );
        if columns.is_empty() {
            columns.push(e.times.clone());
        }
        header.push(format!("{}.mean", s.label));
        header.push(format!("{}.stderr", s.label));
        columns.push(e.mean);
        columns.push(e.stderr);
    }
    let path = cfg.output.join("ensemble.csv");
    let meta = metadata(
        cfg,
        &[
            ("series", labels(cfg)),
            ("temperature_K", cfg.temperature.to_string()),
            ("n_traj", cfg.n_traj.to_string()),
        ],
    );
    write_csv(&path, &meta, &header, &transpose(&columns))?;
    Ok(Report {
        artifacts: vec![path],
        summary,
        passed: true,
    })
}

fn sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let mut spec = SweepSpec::new(cfg.frame());
    spec.initial = cfg.initial_spin;
    spec.dt = cfg.dt;
    spec.t_max = cfg.t_max;
    spec.substeps = cfg.substeps;
    spec.replicas = cfg.replicas;
    spec.window_fraction = cfg.window_fraction;
    spec.base_seed = cfg.seed;
    let results = temperature_sweep(&cfg.methods, &cfg.temperatures, &spec, opts.execution())?;

    let mut header = vec!["temperature_K".to_string(), "oracle".to_string()];
    let mut columns = vec![cfg.temperatures.clone(), results[0].oracle.clone()];
    let mut summary = String::new();
    for r in &results {
        header.push(format!("{}.sz", r.method));
        header.push(format!("{}.stderr", r.method));
        columns.push(r.sz_mean.clone());
        columns.push(r.sz_stderr.clone());
        if let Some(m) = &r.rescaled {
            header.push(format!("{}.m", r.method));
            columns.push(m.clone());
        }
        let worst = r
            .sz_mean
            .iter()
            .zip(&r.oracle)
            .map(|(s, o)| (s - o).abs())
            .fold(0.0, f64::max);
        let _ = writeln!(summary, "{}: max |sz - oracle| = {worst:.4}", r.method);
    }
    let path = cfg.output.join("sweep.csv");
    let meta = metadata(
        cfg,
        &[
            ("methods", labels(cfg)),
            ("replicas", cfg.replicas.to_string()),
            ("spin_halves", cfg.spin_halves.to_string()),
        ],
    );
    write_csv(&path, &meta, &header, &transpose(&columns))?;
    Ok(Report {
        artifacts: vec![path],
        summary,
        passed: true,
    })
}

struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.value < self.limit
    }
}

/// `(-1)^m / m! int_0^inf t^m K(t) dt` by composite Simpson over
/// `[0, 100 / gamma]`.
fn moment_simpson(p: &LorentzianParams, m: i32) -> f64 {
    let end = 100.0 / p.gamma_width;
    let n = 400_000;
    let h = end / n as f64;
    let f = |t: f64| t.powi(m) * lorentzian_kernel_time(t, p);
    let mut sum = f(0.0) + f(end);
    for i in 1..n {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let factorial: f64 = (1..=m).map(f64::from).product();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    sign * sum * h / 3.0 / factorial
}

/// Invariant suite: FDT identity, kernel moments, noise spectral fidelity
/// and spin-length conservation for every named method.
fn validate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let frame = cfg.frame();
    let sets = [LorentzianParams::set1(), LorentzianParams::set2()];
    let mut checks = Vec::new();

    let grid: Vec<f64> = (0..=20_000).map(|k| k as f64 * 1e-3).collect();
    let eta = sets[0].eta();
    let mut fdt = fdt_check(
        |w| ohmic_coupling(w, eta).unwrap_or(f64::NAN),
        |w| ohmic_kernel_freq(w, eta),
        &grid,
    );
    for p in &sets {
        fdt = fdt.max(fdt_check(
            |w| lorentzian_coupling(w, p).unwrap_or(f64::NAN),
            |w| lorentzian_kernel_freq(w, p),
            &grid,
        ));
    }
    checks.push(Check {
        name: "fdt residual on [0, 20]",
        value: fdt,
        limit: 1e-10,
    });

    let mut moments = 0.0f64;
    for p in &sets {
        let closed = kernel_moments(p, 4)?;
        for m in 1..=4 {
            moments = moments.max((moment_simpson(p, m) / closed.kappa(m as usize) - 1.0).abs());
        }
    }
    checks.push(Check {
        name: "kernel moments vs quadrature (rel)",
        value: moments,
        limit: 1e-6,
    });

    // Noise fidelity and spin length at 1 K, where every spectrum is non-zero.
    let temperature = 1.0;
    let dt = cfg.dt;
    let fidelity =
        opts.execution()
            .map_indexed(Method::ALL.len(), |i| -> memspin_core::Result<f64> {
                let m = Method::ALL[i];
                let icfg = m.config(&frame, temperature, 100.0)?;
                let ps = icfg.noise.expect("named methods carry noise");
                let trace = generate(&WhiteSeed::new(cfg.seed ^ i as u64, 1 << 19, dt), &ps, 0)?;
                let mut worst = 0.0f64;
                for c in &trace.components {
                    let est = welch(c, dt, 2048)?;
                    worst = worst
                        .max(band_fidelity(&est, |w| ps.field_density(w), 0.25, PI / dt, 0.05).0);
                }
                Ok(worst)
            });
    let fidelity = fidelity
        .into_iter()
        .collect::<memspin_core::Result<Vec<_>>>()?;
    checks.push(Check {
        name: "noise psd band error (rel)",
        value: fidelity.iter().copied().fold(0.0, f64::max),
        limit: 0.10,
    });

    let sys = SpinSystem::single(cfg.initial_spin, &frame)?;
    let drift = opts
        .execution()
        .map_indexed(Method::ALL.len(), |i| -> memspin_core::Result<f64> {
            let mut icfg = Method::ALL[i].config(&frame, temperature, 1.0e4 * dt)?;
            icfg.dt = dt;
            icfg.substeps = cfg.substeps;
            Ok(integrate(&sys, &icfg, cfg.seed)?.max_norm_deviation())
        });
    let drift = drift
        .into_iter()
        .collect::<memspin_core::Result<Vec<_>>>()?;
    checks.push(Check {
        name: "spin length drift, 1e4 steps",
        value: drift.iter().copied().fold(0.0, f64::max),
        limit: 1e-5,
    });

    let mut summary = format!("{:<38} {:>12} {:>10}  result\n", "check", "value", "limit");
    for c in &checks {
        let _ = writeln!(
            summary,
            "{:<38} {:>12.3e} {:>10.0e}  {}",
            c.name,
            c.value,
            c.limit,
            if c.passed() { "PASS" } else { "FAIL" }
        );
    }
    let passed = checks.iter().all(Check::passed);
    Ok(Report {
        artifacts: Vec::new(),
        summary,
        passed,
    })
}

fn labels(cfg: &ExperimentConfig) -> String {
    cfg.series()
        .iter()
        .map(|s| s.label.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn transpose(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = columns.first().map_or(0, Vec::len);
    (0..n)
        .map(|k| columns.iter().map(|c| c[k]).collect())
        .collect()
}
