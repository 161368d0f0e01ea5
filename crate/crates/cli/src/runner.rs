use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use temporal_im::influence::{solve_im, write_checkpoint, BoundaryKind};
use temporal_im::model::{HamiltonianParams, ModelSpec};
use temporal_im::observables::{
    autocorrelator_series, entropy_series, format_f64, quench_magnetization_series, solve_pair, ResultSeries,
    SeriesMeta, SeriesOptions,
};
use temporal_im::oracles::cross_check::{run_suite, CheckResult};
use temporal_im::oracles::ed::ed_disorder_autocorrelator;
use temporal_im::{C64, ENGINE_VERSION};

use crate::config::{Experiment, ExperimentConfig, Family};
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Worker threads; `None` leaves the choice to the pool.
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
    pub checks: Vec<CheckResult>,
    pub wall_time: f64,
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path.file_name().and_then(|n| n.to_str()).ok_or_else(|| CliError::config("bad output file name"))?;
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn chi_label(chi: Option<usize>) -> String {
    chi.map_or_else(|| "inf".to_string(), |c| c.to_string())
}

/// Unbounded first, then largest χ first.
fn ordered_chis(chis: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut v = chis.to_vec();
    v.sort_by(|a, b| match (a, b) {
        (None, None) => std::cmp::Ordering::Equal,
        (None, _) => std::cmp::Ordering::Less,
        (_, None) => std::cmp::Ordering::Greater,
        (Some(x), Some(y)) => y.cmp(x),
    });
    v.dedup();
    v
}

fn series_options(cfg: &ExperimentConfig, chi: Option<usize>, boundary: BoundaryKind) -> SeriesOptions {
    SeriesOptions {
        chi_max: chi,
        cutoff: cfg.cutoff,
        boundary,
        mode: cfg.mode,
        preserve_weak_bonds: cfg.preserve_weak_bonds,
        tol: cfg.tol,
    }
}

struct Output {
    name: String,
    bytes: Vec<u8>,
}

struct JobResult {
    outputs: Vec<Output>,
    notes: Vec<String>,
    series: Option<(Option<usize>, BoundaryKind, ResultSeries)>,
}

fn job_grid(cfg: &ExperimentConfig) -> Vec<(Option<usize>, BoundaryKind)> {
    ordered_chis(&cfg.chis).into_iter().flat_map(|c| cfg.boundaries.iter().map(move |&b| (c, b))).collect()
}

fn trotter_params(cfg: &ExperimentConfig) -> CliResult<(HamiltonianParams, f64, f64)> {
    let p = &cfg.params;
    let missing = || CliError::config("quench needs J, g, h, eps and t_max");
    Ok((
        HamiltonianParams { j: p.j.ok_or_else(missing)?, g: p.g.ok_or_else(missing)?, h: p.h.ok_or_else(missing)? },
        p.t_max.ok_or_else(missing)?,
        p.eps.ok_or_else(missing)?,
    ))
}

fn checkpoint_output(spec: &ModelSpec, opts: &SeriesOptions, stem: &str) -> CliResult<Output> {
    let pair = solve_pair(spec, opts)?;
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &pair.right)?;
    Ok(Output { name: format!("{stem}.ckpt"), bytes })
}

fn series_job(cfg: &ExperimentConfig, chi: Option<usize>, boundary: BoundaryKind) -> CliResult<JobResult> {
    let opts = series_options(cfg, chi, boundary);
    let stem = format!("{}_chi{}_{}", cfg.experiment, chi_label(chi), boundary);
    let mut outputs = Vec::new();
    let mut series = match cfg.experiment {
        Experiment::Quench => {
            let (params, t_max, eps) = trotter_params(cfg)?;
            quench_magnetization_series(params, t_max, eps, &opts)?
        }
        _ => {
            let spec = cfg.spec()?;
            autocorrelator_series(&spec, &opts, spec.t)?
        }
    };
    series.meta.seed = cfg.seed.filter(|_| cfg.family == Family::Dtc);
    if cfg.checkpoint {
        outputs.push(checkpoint_output(&cfg.spec()?, &opts, &stem)?);
    }
    let notes = series.notes.iter().map(|n| format!("{stem}: {n}")).collect();
    outputs.push(Output { name: format!("{stem}.csv"), bytes: series.to_csv().into_bytes() });
    Ok(JobResult { outputs, notes, series: Some((chi, boundary, series)) })
}

fn entropy_scan_job(cfg: &ExperimentConfig, chi: Option<usize>, boundary: BoundaryKind) -> CliResult<JobResult> {
    let chi = chi.ok_or_else(|| CliError::config("entropy-scan needs bounded `chi` values"))?;
    let (param, values) = cfg.scan.as_ref().expect("validated");
    let points = values
        .iter()
        .map(|&x| Ok((x, param.apply(&cfg.params, x)?.spec(cfg.family, cfg.initial_state, cfg.trotter_order)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let series = entropy_series(&points, &[chi], &series_options(cfg, Some(chi), boundary), "entropy")?;
    let stem = format!("{}_chi{}_{}", cfg.experiment, chi, boundary);
    Ok(JobResult {
        outputs: vec![Output { name: format!("{stem}.csv"), bytes: series.to_csv().into_bytes() }],
        notes: Vec::new(),
        series: Some((Some(chi), boundary, series)),
    })
}

/// Entropies of every power-iteration step at `T_max`.
fn iteration_entropy_job(cfg: &ExperimentConfig, chi: Option<usize>, boundary: BoundaryKind) -> CliResult<JobResult> {
    let spec = cfg.spec()?;
    let opts = series_options(cfg, chi, boundary);
    let (_, records) = solve_im(&spec, boundary, &opts.solve_options(&spec))?;
    let mut s = ResultSeries {
        label: "iteration_entropy".into(),
        meta: SeriesMeta {
            chi,
            cutoff: cfg.cutoff,
            eps: spec.eps,
            boundary: boundary.to_string(),
            seed: cfg.seed.filter(|_| cfg.family == Family::Dtc),
            samples: None,
            params: vec![("T".into(), spec.t.to_string())],
        },
        ..Default::default()
    };
    for r in &records {
        s.abscissa.push(r.iteration as f64);
        s.values.push(C64::new(r.half_cut_entropy, 0.0));
        s.entropy_halfcut.push(r.half_cut_entropy);
        s.entropy_max.push(r.max_entropy);
        s.discarded_weight.push(r.discarded_weight);
        s.trace_error.push(0.0);
    }
    let stem = format!("entropy_{}_chi{}_{}", cfg.experiment, chi_label(chi), boundary);
    Ok(JobResult { outputs: vec![Output { name: format!("{stem}.csv"), bytes: s.to_csv().into_bytes() }], notes: Vec::new(), series: None })
}

fn monte_carlo_output(cfg: &ExperimentConfig) -> CliResult<Option<Output>> {
    let (Some(samples), Some(t_max), Some(seed)) = (cfg.samples, cfg.mc_t_max, cfg.seed) else {
        return Ok(None);
    };
    let est = ed_disorder_autocorrelator(&cfg.spec()?, t_max, samples, seed)?;
    let mut text = String::from("abscissa,mean,stderr,samples,seed\n");
    for (t, (m, e)) in est.mean.iter().zip(&est.stderr).enumerate() {
        text.push_str(&format!("{},{},{},{samples},{seed}\n", format_f64(t as f64), format_f64(*m), format_f64(*e)));
    }
    Ok(Some(Output { name: "dtc_mc.csv".into(), bytes: text.into_bytes() }))
}

/// Notes on series whose values move by more than 2% between the two
/// largest bounded χ.
fn chi_convergence_notes(results: &[JobResult]) -> Vec<String> {
    let mut notes = Vec::new();
    let mut by_boundary: Vec<(BoundaryKind, Vec<(usize, &ResultSeries)>)> = Vec::new();
    for (chi, b, s) in results.iter().filter_map(|r| r.series.as_ref()) {
        let Some(chi) = chi else { continue };
        match by_boundary.iter_mut().find(|(bb, _)| bb == b) {
            Some((_, v)) => v.push((*chi, s)),
            None => by_boundary.push((*b, vec![(*chi, s)])),
        }
    }
    for (b, mut v) in by_boundary {
        if v.len() < 2 {
            continue;
        }
        v.sort_by(|x, y| y.0.cmp(&x.0));
        let (hi, lo) = (&v[0], &v[1]);
        let worst = hi.1.values.iter().zip(&lo.1.values).map(|(a, c)| (a - c).norm()).fold(0.0, f64::max);
        let scale = hi.1.values.iter().map(|a| a.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let verdict = if worst > 0.02 * scale { "not converged" } else { "converged" };
        notes.push(format!("{b}: chi {} vs {}: max deviation {} ({verdict} at 2%)", lo.0, hi.0, format_f64(worst)));
    }
    notes
}

fn pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        b = b.num_threads(k);
    }
    b.build().map_err(|e| CliError { category: crate::error::Category::Resource, message: e.to_string() })
}

fn oracle_t(cfg: &ExperimentConfig) -> usize {
    cfg.params.steps.unwrap_or(4)
}

/// Runs the oracle suite for `T = 1..=t_max`; any failed check is a
/// numerical error.
pub fn oracle_check(t_max: usize) -> CliResult<Vec<CheckResult>> {
    let checks = run_suite(t_max)?;
    let failed: Vec<String> =
        checks.iter().filter(|c| !c.passed()).map(|c| format!("{} at T={} ({:e})", c.name, c.t, c.error)).collect();
    if !failed.is_empty() {
        return Err(CliError { category: crate::error::Category::Numerical, message: format!("failed checks: {}", failed.join(", ")) });
    }
    Ok(checks)
}

pub fn format_checks(checks: &[CheckResult]) -> String {
    let mut s = String::from("check,T,error,tol,status\n");
    for c in checks {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            c.name,
            c.t,
            format_f64(c.error),
            format_f64(c.tol),
            if c.passed() { "PASS" } else { "FAIL" }
        ));
    }
    s
}

fn finish(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    outputs: Vec<Output>,
    mut notes: Vec<String>,
    checks: Vec<CheckResult>,
    start: Instant,
) -> CliResult<RunReport> {
    let dir = opts.out_dir.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    for o in &outputs {
        let path = dir.join(&o.name);
        write_atomic(&path, &o.bytes)?;
        files.push(path);
    }
    notes.sort();
    let wall_time = start.elapsed().as_secs_f64();
    let mut m = String::new();
    m.push_str(&format!("engine_version = {ENGINE_VERSION}\n"));
    m.push_str(&format!("experiment = {}\n", cfg.experiment));
    m.push_str(&format!("wall_time_s = {wall_time:.3}\n"));
    m.push_str(&format!("seed = {}\n", cfg.seed.map_or_else(|| "none".to_string(), |s| s.to_string())));
    m.push_str(&format!("threads = {}\n", opts.threads.map_or_else(|| "default".to_string(), |t| t.to_string())));
    for o in &outputs {
        m.push_str(&format!("file = {}\n", o.name));
    }
    for n in &notes {
        m.push_str(&format!("note = {n}\n"));
    }
    m.push_str("[config]\n");
    for (k, v) in &cfg.echo {
        m.push_str(&format!("{k} = {v}\n"));
    }
    let manifest = dir.join(format!("{}_manifest.txt", cfg.experiment));
    write_atomic(&manifest, m.as_bytes())?;
    files.push(manifest);
    Ok(RunReport { files, notes, checks, wall_time })
}

pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<RunReport> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seed = Some(s);
    }
    cfg.validate()?;
    if cfg.experiment == Experiment::OracleCheck {
        let checks = oracle_check(oracle_t(&cfg))?;
        let out = Output { name: "oracle_check.csv".into(), bytes: format_checks(&checks).into_bytes() };
        return finish(&cfg, opts, vec![out], Vec::new(), checks, start);
    }
    let grid = job_grid(&cfg);
    let job = |&(chi, b): &(Option<usize>, BoundaryKind)| match cfg.experiment {
        Experiment::EntropyScan => entropy_scan_job(&cfg, chi, b),
        _ => series_job(&cfg, chi, b),
    };
    let results: Vec<CliResult<JobResult>> = pool(opts.threads)?.install(|| grid.par_iter().map(job).collect());
    let results = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    let mut notes: Vec<String> = results.iter().flat_map(|r| r.notes.clone()).collect();
    notes.extend(chi_convergence_notes(&results));
    let mut outputs: Vec<Output> = results.into_iter().flat_map(|r| r.outputs).collect();
    if cfg.experiment == Experiment::Dtc {
        outputs.extend(monte_carlo_output(&cfg)?);
    }
    finish(&cfg, opts, outputs, notes, Vec::new(), start)
}

/// Entropy diagnostics: an entropy-scan config runs as usual; any other
/// config writes the per-iteration entropies of its IM solves.
pub fn entropy(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<RunReport> {
    match cfg.experiment {
        Experiment::EntropyScan => run(cfg, opts),
        Experiment::OracleCheck => Err(CliError::config("oracle-check has no entropy output")),
        _ => {
            let start = Instant::now();
            let mut cfg = cfg.clone();
            if let Some(s) = opts.seed {
                cfg.seed = Some(s);
            }
            cfg.validate()?;
            let grid = job_grid(&cfg);
            let results: Vec<CliResult<JobResult>> = pool(opts.threads)?
                .install(|| grid.par_iter().map(|&(c, b)| iteration_entropy_job(&cfg, c, b)).collect());
            let results = results.into_iter().collect::<CliResult<Vec<_>>>()?;
            let outputs = results.into_iter().flat_map(|r| r.outputs).collect();
            finish(&cfg, opts, outputs, Vec::new(), Vec::new(), start)
        }
    }
}
