//! The named experiments.

use crate::config::ExperimentConfig;
use crate::output::{fmt_f, fmt_opt, write_csv, write_metadata};
use crate::{CliError, CliResult};
use nqs::derive_seed;
use nqs::drivers::{Driver, DriverSpec, DENSE_CAP};
use nqs::exact::{entanglement_entropy, ground_state};
use nqs::otoc::{
    default_tau_grid, invariant_training_profile, invariants, trace_for, DerivativeMode,
    TracePart,
};
use nqs::rbm::RbmParams;
use nqs::rdm::{bound_curve, ieta_scan, IEtaPoint, IetaScan};
use nqs::sr::{exact_energy, train, TrainingHistory};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("nqs-out"))
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

/// One finished (or failed) training run.
struct TrainedRun {
    init: usize,
    seed: u64,
    outcome: Result<(RbmParams, TrainingHistory), String>,
    /// Relative error of the returned snapshot against the oracle.
    rel_error: Option<f64>,
    /// Exact (oracle reach) or sampled energy of the snapshot.
    energy: f64,
    fisher: f64,
    converged: bool,
    iterations: usize,
}

/// Train `n_inits` networks of one spec; parallel across inits with a
/// deterministic seed tree.
fn run_training_set(
    cfg: &ExperimentConfig,
    spec: &DriverSpec,
    sweep_key: u64,
) -> CliResult<Vec<TrainedRun>> {
    let hidden = cfg.hidden_units();
    let runs: Vec<TrainedRun> = (0..cfg.n_inits)
        .into_par_iter()
        .map(|init| {
            let run_key = derive_seed(sweep_key, init as u64);
            let sampler = cfg.sampler.clone().with_seed(derive_seed(run_key, 1));
            let init_seed = derive_seed(run_key, 2);
            match train(spec, hidden, &cfg.sr, &sampler, init_seed) {
                Ok((x_star, history)) => {
                    let (rel_error, energy) = snapshot_quality(spec, &x_star, &history);
                    let fisher = history
                        .best_record()
                        .map(|r| r.fisher_max_eig)
                        .unwrap_or(f64::NAN);
                    let converged = history.converged
                        && rel_error.map_or(true, |r| r <= cfg.sr.convergence_threshold);
                    let iterations = history.records.len();
                    TrainedRun {
                        init,
                        seed: init_seed,
                        outcome: Ok((x_star, history)),
                        rel_error,
                        energy,
                        fisher,
                        converged,
                        iterations,
                    }
                }
                Err(e) => TrainedRun {
                    init,
                    seed: init_seed,
                    outcome: Err(e.to_string()),
                    rel_error: None,
                    energy: f64::NAN,
                    fisher: f64::NAN,
                    converged: false,
                    iterations: 0,
                },
            }
        })
        .collect();
    Ok(runs)
}

fn snapshot_quality(
    spec: &DriverSpec,
    x_star: &RbmParams,
    history: &TrainingHistory,
) -> (Option<f64>, f64) {
    if let Some(lambda0) = history.oracle_energy {
        if let Ok(driver) = Driver::new(spec.clone()) {
            if let Ok(e) = exact_energy(x_star, &driver) {
                return (Some((e - lambda0).abs() / lambda0.abs()), e);
            }
        }
    }
    let energy = history.best_record().map(|r| r.energy).unwrap_or(f64::NAN);
    (None, energy)
}

/// `train`: per-run logs, checkpoints, and invariant profiles plus a
/// summary of best relative errors.
pub fn cmd_train(cfg: &ExperimentConfig, pair: (usize, usize)) -> CliResult<PathBuf> {
    let started = Instant::now();
    let dir = out_dir(cfg);
    ensure_dir(&dir)?;
    let runs = run_training_set(cfg, &cfg.driver, derive_seed(cfg.seed, 0))?;

    let mut summary_rows = Vec::with_capacity(runs.len());
    for run in &runs {
        let status = match &run.outcome {
            Ok(_) => "ok",
            Err(_) => "diverged",
        };
        summary_rows.push(format!(
            "{},{},{},{},{},{},{}",
            run.init,
            run.seed,
            status,
            run.converged,
            run.iterations,
            fmt_opt(run.rel_error),
            fmt_f(run.energy),
        ));
        let Ok((x_star, history)) = &run.outcome else { continue };
        let run_dir = dir.join(format!("run_{:03}", run.init));
        ensure_dir(&run_dir)?;
        write_csv(
            &run_dir,
            "training_log.csv",
            "iter,energy,variance,rel_error,fisher_max_eig,acceptance_rate,wall_ms",
            history.records.iter().map(|r| {
                format!(
                    "{},{},{},{},{},{},{}",
                    r.iteration,
                    fmt_f(r.energy),
                    fmt_f(r.variance),
                    fmt_opt(r.rel_error),
                    fmt_f(r.fisher_max_eig),
                    fmt_f(r.acceptance_rate),
                    fmt_f(r.wall_ms)
                )
            }),
        )?;
        x_star.write_checkpoint(run_dir.join("checkpoint.csv"))?;
        let profile = invariant_training_profile(history, pair)?;
        write_csv(
            &run_dir,
            "invariants_profile.csv",
            "epoch,zz,i1_imag,compound_imag",
            profile.iter().map(|row| {
                format!(
                    "{},{},{},{}",
                    row.epoch,
                    fmt_f(row.zz),
                    fmt_f(row.i1_imag),
                    fmt_f(row.compound_imag)
                )
            }),
        )?;
    }
    write_csv(
        &dir,
        "summary.csv",
        "run,seed,status,converged,iterations,best_rel_error,best_energy",
        summary_rows,
    )?;
    write_metadata(&dir, "train", cfg, started.elapsed().as_secs_f64() * 1e3)?;
    Ok(dir)
}

struct SweepPoint {
    g: f64,
    runs: Vec<TrainedRun>,
    /// Indices into `runs` of the kept best-converged runs.
    kept: Vec<usize>,
}

/// Train across the g sweep, keeping the best-converged runs per point.
fn run_g_sweep(cfg: &ExperimentConfig) -> CliResult<Vec<SweepPoint>> {
    let mut points = Vec::new();
    for (gi, &g) in cfg.g_values().iter().enumerate() {
        let spec = cfg.driver.clone().at_g(g);
        spec.validate()?;
        let runs = run_training_set(cfg, &spec, derive_seed(cfg.seed, 1 + gi as u64))?;
        let mut converged: Vec<usize> =
            (0..runs.len()).filter(|&i| runs[i].converged).collect();
        converged.sort_by(|&a, &b| {
            let ka = runs[a].rel_error.unwrap_or(runs[a].energy);
            let kb = runs[b].rel_error.unwrap_or(runs[b].energy);
            ka.total_cmp(&kb).then(a.cmp(&b))
        });
        converged.truncate(cfg.keep_best);
        points.push(SweepPoint { g, runs, kept: converged });
    }
    Ok(points)
}

fn pair_row(p: &IEtaPoint) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        fmt_f(p.g),
        p.pair.0 + 1,
        p.pair.1 + 1,
        fmt_f(p.eta),
        fmt_f(p.mi),
        fmt_f(p.lb),
        fmt_f(p.ub),
        fmt_f(p.lb_gap),
        fmt_opt(p.stderr_eta),
        fmt_opt(p.stderr_mi),
    )
}

const PAIR_HEADER: &str = "g,k,m,eta,mi,lb,ub,lb_gap,stderr_eta,stderr_mi";

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt())
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    }
}

/// Aggregated statistics of one sweep point. Means pool every pair of
/// every kept run; spreads are taken across the per-init means, so a
/// single-init sweep leaves them empty.
pub struct ScanSummary {
    pub g: f64,
    pub mean_mi: f64,
    pub mean_eta: f64,
    pub std_mi: Option<f64>,
    pub std_eta: Option<f64>,
    pub sem_mi: Option<f64>,
    pub sem_eta: Option<f64>,
    pub median_lb_gap: f64,
    pub fisher_max_eig: f64,
    pub n_converged: usize,
    pub n_kept: usize,
    pub n_points: usize,
}

fn summarize_point(
    point: &SweepPoint,
    scans: &[(usize, IetaScan)],
    fisher: &[f64],
) -> ScanSummary {
    let all: Vec<&IEtaPoint> = scans.iter().flat_map(|(_, s)| s.points.iter()).collect();
    let init_mi: Vec<f64> =
        scans.iter().map(|(_, s)| mean(&s.points.iter().map(|p| p.mi).collect::<Vec<_>>())).collect();
    let init_eta: Vec<f64> = scans
        .iter()
        .map(|(_, s)| mean(&s.points.iter().map(|p| p.eta.abs()).collect::<Vec<_>>()))
        .collect();
    let std_mi = sample_std(&init_mi);
    let std_eta = sample_std(&init_eta);
    let root = (scans.len() as f64).sqrt();
    ScanSummary {
        g: point.g,
        mean_mi: mean(&all.iter().map(|p| p.mi).collect::<Vec<_>>()),
        mean_eta: mean(&all.iter().map(|p| p.eta.abs()).collect::<Vec<_>>()),
        std_mi,
        std_eta,
        sem_mi: std_mi.map(|s| s / root),
        sem_eta: std_eta.map(|s| s / root),
        median_lb_gap: median(all.iter().map(|p| p.lb_gap).collect()),
        fisher_max_eig: mean(fisher),
        n_converged: point.runs.iter().filter(|r| r.converged).count(),
        n_kept: point.kept.len(),
        n_points: all.len(),
    }
}

const SUMMARY_HEADER: &str = "g,mean_mi,mean_eta,std_mi,std_eta,sem_mi,sem_eta,\
median_lb_gap,fisher_max_eig,n_converged,n_kept,n_points";

fn summary_row(s: &ScanSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_f(s.g),
        fmt_f(s.mean_mi),
        fmt_f(s.mean_eta),
        fmt_opt(s.std_mi),
        fmt_opt(s.std_eta),
        fmt_opt(s.sem_mi),
        fmt_opt(s.sem_eta),
        fmt_f(s.median_lb_gap),
        fmt_f(s.fisher_max_eig),
        s.n_converged,
        s.n_kept,
        s.n_points,
    )
}

/// `scan-g`: train across the ratio sweep, scan every visible-hidden
/// pair of the kept runs, and aggregate the I-eta statistics per point.
pub fn cmd_scan_g(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let started = Instant::now();
    let dir = out_dir(cfg);
    ensure_dir(&dir)?;
    let points = run_g_sweep(cfg)?;
    let mut summaries = Vec::with_capacity(points.len());
    for (gi, point) in points.iter().enumerate() {
        let mut scans = Vec::new();
        let mut fisher = Vec::new();
        for &idx in &point.kept {
            let run = &point.runs[idx];
            let Ok((x_star, _)) = &run.outcome else { continue };
            let scan_seed = derive_seed(derive_seed(cfg.seed, 1 + gi as u64), 3 + run.init as u64);
            let scan = ieta_scan(x_star, point.g, cfg.rdm_mode(), scan_seed)?;
            scans.push((run.init, scan));
            fisher.push(run.fisher);
        }
        let rows: Vec<String> =
            scans.iter().flat_map(|(_, s)| s.points.iter().map(pair_row)).collect();
        write_csv(&dir, &format!("scan_pairs_{gi:03}.csv"), PAIR_HEADER, rows)?;
        summaries.push(summarize_point(point, &scans, &fisher));
    }
    write_csv(&dir, "scan_summary.csv", SUMMARY_HEADER, summaries.iter().map(summary_row))?;
    write_metadata(&dir, "scan-g", cfg, started.elapsed().as_secs_f64() * 1e3)?;
    Ok(dir)
}

/// `fisher`: the g sweep reduced to the largest Fisher eigenvalue of
/// the converged runs.
pub fn cmd_fisher(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let started = Instant::now();
    let dir = out_dir(cfg);
    ensure_dir(&dir)?;
    let points = run_g_sweep(cfg)?;
    let rows: Vec<String> = points
        .iter()
        .map(|point| {
            let fisher: Vec<f64> =
                point.kept.iter().map(|&i| point.runs[i].fisher).collect();
            let m = if fisher.is_empty() { f64::NAN } else { mean(&fisher) };
            format!(
                "{},{},{},{}",
                fmt_f(point.g),
                fmt_f(m),
                fmt_opt(sample_std(&fisher)),
                point.kept.len()
            )
        })
        .collect();
    write_csv(&dir, "fisher.csv", "g,fisher_max_eig,fisher_std,n_kept", rows)?;
    write_metadata(&dir, "fisher", cfg, started.elapsed().as_secs_f64() * 1e3)?;
    Ok(dir)
}

/// `ieta`: the I-eta scan of a checkpointed network plus the bound
/// curves for overlay.
pub fn cmd_ieta(cfg: &ExperimentConfig, checkpoint: &Path) -> CliResult<PathBuf> {
    let started = Instant::now();
    let dir = out_dir(cfg);
    ensure_dir(&dir)?;
    let x = RbmParams::read_checkpoint(checkpoint)
        .map_err(|e| CliError::Config(format!("checkpoint {}: {e}", checkpoint.display())))?;
    let scan = ieta_scan(&x, cfg.driver.g(), cfg.rdm_mode(), derive_seed(cfg.seed, 0xe7a))?;
    write_csv(&dir, "ieta.csv", PAIR_HEADER, scan.points.iter().map(pair_row))?;
    write_csv(
        &dir,
        "bounds.csv",
        "eta,lb,ub,conventional_lb",
        bound_curve(401).iter().map(|b| {
            format!(
                "{},{},{},{}",
                fmt_f(b.eta),
                fmt_f(b.lb),
                fmt_f(b.ub),
                fmt_f(b.conventional_lb)
            )
        }),
    )?;
    write_metadata(&dir, "ieta", cfg, started.elapsed().as_secs_f64() * 1e3)?;
    Ok(dir)
}

/// `otoc`: closed-form trace and invariants of one pair of a
/// checkpointed network.
pub fn cmd_otoc(cfg: &ExperimentConfig, checkpoint: &Path, pair: (usize, usize)) -> CliResult<PathBuf> {
    let started = Instant::now();
    let dir = out_dir(cfg);
    ensure_dir(&dir)?;
    let x = RbmParams::read_checkpoint(checkpoint)
        .map_err(|e| CliError::Config(format!("checkpoint {}: {e}", checkpoint.display())))?;
    if pair.0 >= x.n() || pair.1 >= x.p() {
        return Err(CliError::Config(format!(
            "pair ({},{}) outside the {}x{} register",
            pair.0 + 1,
            pair.1 + 1,
            x.n(),
            x.p()
        )));
    }
    let grid = default_tau_grid();
    let trace = trace_for(&x, pair.0, pair.1, &grid, derive_seed(cfg.seed, 0x070c))?;
    write_csv(
        &dir,
        "otoc_trace.csv",
        "tau,c_real,c_imag",
        (0..grid.len()).map(|i| {
            format!("{},{},{}", fmt_f(trace.tau[i]), fmt_f(trace.c_real[i]), fmt_f(trace.c_imag[i]))
        }),
    )?;
    let mut inv_rows = Vec::new();
    for part in [TracePart::Real, TracePart::Imag] {
        for (mode, label) in [
            (DerivativeMode::Analytic, "analytic"),
            (DerivativeMode::FiniteDifference, "finite_difference"),
        ] {
            let inv = invariants(&trace, part, mode)?;
            inv_rows.push(format!(
                "{},{},{},{},{},{},{}",
                match part {
                    TracePart::Real => "real",
                    TracePart::Imag => "imag",
                },
                label,
                fmt_f(inv.i1),
                fmt_f(inv.i2),
                fmt_f(inv.compound_sum),
                fmt_f(inv.compound_prod),
                fmt_f(inv.constancy_std),
            ));
        }
    }
    write_csv(
        &dir,
        "otoc_invariants.csv",
        "part,mode,i1,i2,compound_sum,compound_prod,constancy_std",
        inv_rows,
    )?;
    write_metadata(&dir, "otoc", cfg, started.elapsed().as_secs_f64() * 1e3)?;
    Ok(dir)
}

/// `entropy`: exact central-cut entanglement entropy across the size
/// sweep, optionally dumping the ground-state amplitude vectors.
pub fn cmd_entropy(cfg: &ExperimentConfig, dump_states: bool) -> CliResult<PathBuf> {
    let started = Instant::now();
    let dir = out_dir(cfg);
    ensure_dir(&dir)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_values() {
        if n > DENSE_CAP {
            return Err(CliError::OracleSize(format!(
                "entropy scan needs exact ground states; N = {n} exceeds the cap {DENSE_CAP}"
            )));
        }
        if n < 2 {
            return Err(CliError::Config("entropy needs at least two spins".into()));
        }
        let spec = cfg.driver.clone().at_n(n);
        spec.validate()?;
        let gs = ground_state(&spec)?;
        let cut = n / 2;
        let s = entanglement_entropy(gs.amplitudes.as_slice(), cut)?;
        rows.push(format!("{n},{cut},{}", fmt_f(s)));
        if dump_states {
            write_csv(
                &dir,
                &format!("state_N{n:02}.csv"),
                "index,amplitude",
                gs.amplitudes.iter().enumerate().map(|(i, a)| format!("{i},{}", fmt_f(*a))),
            )?;
        }
    }
    write_csv(&dir, "entropy.csv", "N,cut,S", rows)?;
    write_metadata(&dir, "entropy", cfg, started.elapsed().as_secs_f64() * 1e3)?;
    Ok(dir)
}
