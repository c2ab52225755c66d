//! The subcommands. Each takes a validated [`RunConfig`], writes its files
//! into `<output.dir>/<command>-<hash16>/` and returns what it computed.

use chainsense_core::inference::{error_summary, ErrorEstimator, ErrorSummary, LikelihoodTable, Posterior};
use chainsense_core::protocol::{free_trace, Outcome, Probe, TracePoint};
use chainsense_core::rng::stream_rng;
use chainsense_core::scaling::{extract_scaling, fixed_field_alpha, ErrorCell, LogLogFit, ScalingFit};
use serde::Serialize;

use crate::config::{AverageMode, RunConfig, SamplingMode};
use crate::error::{CliError, Result};
use crate::io::{format_dataset, json_with_provenance, num, sequence_to_string, CsvTable, Provenance, RunDir};
use crate::sweep::{self, SweepBlock};

// stream tags under the master seed
const DATASET_STREAM: u64 = 1;
const TRACE_STREAM: u64 = 2;

pub fn provenance(config: &RunConfig) -> Provenance {
    Provenance {
        config_hash: config.hash(),
        seed: config.rng.seed,
    }
}

fn run_dir(config: &RunConfig, command: &str) -> Result<RunDir> {
    RunDir::create(&config.output.dir, command, &config.hash())
}

fn pool(config: &RunConfig) -> Result<rayon::ThreadPool> {
    sweep::thread_pool(config.output.workers)
}

#[derive(Debug, Clone)]
pub struct MagnetizationOutput {
    pub dir: RunDir,
    pub free: Vec<TracePoint>,
    pub measured: Option<(Vec<TracePoint>, Vec<Outcome>)>,
}

fn trace_row(point: &TracePoint, coupling: f64) -> Vec<String> {
    vec![num(coupling * point.time), num(point.first), num(point.last)]
}

/// Free evolution of `m_1` and `m_N` from the all-down state, plus one seeded
/// measured trajectory when `trace.measured` is set.
pub fn magnetization(config: &RunConfig) -> Result<MagnetizationOutput> {
    let spec = config.chain_spec()?;
    let prov = provenance(config);
    let steps = (config.trace.t_max / config.trace.dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * config.trace.dt).collect();
    let free = free_trace(&spec, &times).map_err(|e| CliError::core("free evolution", e))?;
    let coupling = spec.coupling();

    let mut dir = run_dir(config, "magnetization")?;
    let mut csv = CsvTable::new(&prov, &["Jt", "m_1", "m_N"]);
    for p in &free {
        csv.row(&trace_row(p, coupling));
    }
    dir.write("free.csv", &csv.into_string())?;

    let measured = if config.trace.measured {
        let schedule = config.schedule()?;
        let probe = Probe::new(spec, schedule).map_err(|e| CliError::core("measured trace", e))?;
        let mut rng = stream_rng(config.rng.seed, TRACE_STREAM);
        let (points, outcomes) = probe
            .measured_trace(config.trace.dt, &mut rng)
            .map_err(|e| CliError::core("measured trace", e))?;
        let mut csv = CsvTable::new(&prov, &["Jt", "m_1", "m_N", "event"]);
        csv.comment(&format!("outcomes={}", sequence_to_string(&outcomes)));
        for p in &points {
            let mut row = trace_row(p, coupling);
            row.push(match p.event {
                Some(Outcome::Up) => "up".into(),
                Some(Outcome::Down) => "down".into(),
                None => String::new(),
            });
            csv.row(&row);
        }
        dir.write("measured.csv", &csv.into_string())?;
        Some((points, outcomes.outcomes().to_vec()))
    } else {
        None
    };
    Ok(MagnetizationOutput { dir, free, measured })
}

#[derive(Debug, Clone, Serialize)]
pub struct PrefixSummary {
    pub n_seq: usize,
    pub mean: f64,
    pub variance: f64,
    #[serde(rename = "deltaB2")]
    pub delta_b2: f64,
    #[serde(rename = "deltaB")]
    pub delta_b: f64,
    pub integral: f64,
}

impl PrefixSummary {
    fn new(n_seq: usize, post: &Posterior, summary: &ErrorSummary) -> Self {
        Self {
            n_seq,
            mean: summary.mean,
            variance: summary.variance,
            delta_b2: summary.delta_b2,
            delta_b: summary.delta_b(),
            integral: post.integral(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PosteriorReport {
    pub n_sites: usize,
    pub coupling: f64,
    pub field: f64,
    pub taus: Vec<f64>,
    #[serde(rename = "M_sam")]
    pub samples: u64,
    pub sampling: SamplingMode,
    pub fold_sign: bool,
    pub grid: [f64; 2],
    pub grid_points: usize,
    pub prefixes: Vec<PrefixSummary>,
}

#[derive(Debug, Clone)]
pub struct PosteriorOutput {
    pub dir: RunDir,
    pub posteriors: Vec<Posterior>,
    pub report: PosteriorReport,
}

/// One dataset over the full schedule and the posterior after each prefix.
pub fn posterior(config: &RunConfig) -> Result<PosteriorOutput> {
    let spec = config.chain_spec()?;
    let schedule = config.schedule()?;
    let options = config.estimator_options();
    let prov = provenance(config);
    let n = schedule.n_seq();
    let samples = config.inference.samples;

    let tables = pool(config)?.install(|| {
        (1..=n)
            .map(|k| {
                let prefix = schedule.prefix(k).map_err(|e| CliError::core("schedule prefix", e))?;
                sweep::build_table(config, &prefix)
            })
            .collect::<Result<Vec<LikelihoodTable>>>()
    })?;
    let estimator = ErrorEstimator::new(&tables[n - 1], spec.field(), options)
        .map_err(|e| CliError::core("posterior", e))?;
    let mut rng = stream_rng(config.rng.seed, DATASET_STREAM);
    let dataset = estimator
        .dataset(samples, &mut rng)
        .map_err(|e| CliError::core("dataset", e))?;

    let mut posteriors = Vec::with_capacity(n);
    let mut prefixes = Vec::with_capacity(n);
    for (k, table) in (1..=n).zip(&tables) {
        let wrap = |e| CliError::core(format!("posterior after {k} measurement(s)"), e);
        let part = dataset.prefix(k).map_err(wrap)?;
        let mut post = table.posterior(&part).map_err(wrap)?;
        if options.fold_sign {
            post = post.folded().map_err(wrap)?;
        }
        let summary = error_summary(&post, spec.field()).map_err(wrap)?;
        prefixes.push(PrefixSummary::new(k, &post, &summary));
        posteriors.push(post);
    }

    let mut columns = vec!["B_over_J".to_string()];
    columns.extend((1..=n).map(|k| format!("density_n{k}")));
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut csv = CsvTable::new(&prov, &refs);
    let grid = posteriors[0].grid().clone();
    for (g, b) in grid.values().iter().enumerate() {
        let mut row = vec![num(*b)];
        row.extend(posteriors.iter().map(|p| num(p.density()[g])));
        csv.row(&row);
    }

    let report = PosteriorReport {
        n_sites: spec.n_sites(),
        coupling: spec.coupling(),
        field: spec.field(),
        taus: schedule.taus().to_vec(),
        samples,
        sampling: config.inference.sampling,
        fold_sign: options.fold_sign,
        grid: [grid.min(), grid.max()],
        grid_points: grid.len(),
        prefixes,
    };
    let mut dir = run_dir(config, "posterior")?;
    dir.write("dataset.txt", &format_dataset(&dataset, Some(&prov)))?;
    dir.write("posterior.csv", &csv.into_string())?;
    dir.write("summary.json", &json_with_provenance(&prov, &report)?)?;
    Ok(PosteriorOutput {
        dir,
        posteriors,
        report,
    })
}

/// Time exponent at one fixed field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaEntry {
    pub n_seq: usize,
    pub field: f64,
    pub alpha: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

/// Sample counts of the two strategies at equal total time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub n_seq: usize,
    pub target_time: f64,
    pub m_seq: u64,
    pub t_seq: f64,
    pub m_std: u64,
    pub t_std: f64,
    /// `|T_std - T_seq|` in units of one standard sample.
    pub gap: f64,
}

impl Comparison {
    pub fn fair(&self) -> bool {
        self.gap <= 1.0
    }
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub cells: Vec<ErrorCell>,
    pub fits: Vec<ScalingFit>,
    pub alphas: Vec<AlphaEntry>,
    pub comparisons: Vec<Comparison>,
}

impl ScalingReport {
    pub fn alpha(&self, n_seq: usize, field: f64) -> Option<f64> {
        self.alphas
            .iter()
            .find(|a| a.n_seq == n_seq && (a.field - field).abs() < 1e-12)
            .map(|a| a.alpha)
    }

    pub fn fit(&self, n_seq: usize) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.n_seq == n_seq)
    }
}

#[derive(Debug, Clone)]
pub struct ScalingOutput {
    pub dir: RunDir,
    pub report: ScalingReport,
}

fn comparisons(blocks: &[SweepBlock]) -> Vec<Comparison> {
    blocks
        .iter()
        .flat_map(|b| {
            b.jobs.iter().filter(|j| j.field_index == 0).map(move |j| {
                let m_std = b.budget.matched_samples(b.n_seq, j.samples);
                let t_std = b.budget.total_time(1, m_std);
                Comparison {
                    n_seq: b.n_seq,
                    target_time: j.target_time,
                    m_seq: j.samples,
                    t_seq: j.total_time,
                    m_std,
                    t_std,
                    gap: (t_std - j.total_time).abs() / b.budget.per_sample(1),
                }
            })
        })
        .collect()
}

/// Error table, fits and fixed-field exponents, without writing anything.
pub fn compute_scaling(config: &RunConfig, progress: bool) -> Result<ScalingReport> {
    let blocks = sweep::plan(config)?;
    let cells = if config.sweep.synthetic {
        sweep::synthetic(config, &blocks)
    } else {
        pool(config)?.install(|| sweep::run(config, &blocks, progress))?
    };
    let windows = config.fit_windows();
    let fits = extract_scaling(&cells, windows).map_err(|e| CliError::core("scaling fit", e))?;
    let mut alphas = Vec::new();
    for &n_seq in &config.sweep.n_seq {
        for &field in &config.sweep.alpha_fields {
            let fit: LogLogFit = fixed_field_alpha(&cells, n_seq, field, windows.time)
                .map_err(|e| CliError::core(format!("alpha fit at B/J={field}"), e))?;
            alphas.push(AlphaEntry {
                n_seq,
                field,
                alpha: fit.slope,
                intercept: fit.intercept,
                residual: fit.residual,
                points: fit.points,
            });
        }
    }
    Ok(ScalingReport {
        cells,
        fits,
        alphas,
        comparisons: comparisons(&blocks),
    })
}

#[derive(Debug, Clone, Serialize)]
struct ScalingMetadata<'a> {
    n_sites: usize,
    coupling: f64,
    synthetic: bool,
    cell_seeds: &'static str,
    repeat_streams: &'static str,
    init_ratio: f64,
    meas_ratio: f64,
    field_window: [f64; 2],
    time_window: Option<[f64; 2]>,
    average: AverageMode,
    sampling: SamplingMode,
    fold_sign: bool,
    grid: [f64; 2],
    grid_points: usize,
    repeats: usize,
    schedules: Vec<(usize, Vec<f64>)>,
    matched_samples: &'static str,
    per_sample: &'static str,
    alpha_fields: &'a [f64],
}

pub fn write_scaling(config: &RunConfig, report: &ScalingReport, command: &str) -> Result<RunDir> {
    let prov = provenance(config);
    let mut dir = run_dir(config, command)?;

    let mut errors = CsvTable::new(&prov, &["n_seq", "B_over_J", "JT", "M_sam", "deltaB_bar", "stderr"]);
    for c in &report.cells {
        errors.row(&[
            c.n_seq.to_string(),
            num(c.field),
            num(config.chain.coupling * c.total_time),
            c.samples.to_string(),
            num(c.mean),
            num(c.std_error),
        ]);
    }
    dir.write("errors.csv", &errors.into_string())?;

    let mut fits = CsvTable::new(&prov, &["n_seq", "Delta_mean", "Delta_spread", "A", "alpha", "residual"]);
    for f in &report.fits {
        fits.row(&[
            f.n_seq.to_string(),
            num(f.delta_mean),
            num(f.delta_spread),
            num(f.amplitude()),
            num(f.alpha),
            num(f.residual),
        ]);
    }
    dir.write("fits.csv", &fits.into_string())?;

    let mut slices = CsvTable::new(&prov, &["n_seq", "JT", "Delta", "logC", "residual"]);
    for f in &report.fits {
        for s in &f.slices {
            slices.row(&[
                f.n_seq.to_string(),
                num(config.chain.coupling * s.total_time),
                num(s.delta),
                num(s.log_c),
                num(s.residual),
            ]);
        }
    }
    dir.write("slices.csv", &slices.into_string())?;

    let mut alpha = CsvTable::new(&prov, &["n_seq", "B_over_J", "alpha", "intercept", "residual", "points"]);
    for a in &report.alphas {
        alpha.row(&[
            a.n_seq.to_string(),
            num(a.field),
            num(a.alpha),
            num(a.intercept),
            num(a.residual),
            a.points.to_string(),
        ]);
    }
    dir.write("alpha.csv", &alpha.into_string())?;

    let mut cmp = CsvTable::new(&prov, &["n_seq", "JT_target", "M_seq", "T_seq", "M_std", "T_std", "gap_samples", "fair"]);
    for c in &report.comparisons {
        cmp.row(&[
            c.n_seq.to_string(),
            num(c.target_time),
            c.m_seq.to_string(),
            num(c.t_seq),
            c.m_std.to_string(),
            num(c.t_std),
            num(c.gap),
            c.fair().to_string(),
        ]);
    }
    dir.write("comparison.csv", &cmp.into_string())?;

    let schedules = config
        .sweep
        .n_seq
        .iter()
        .map(|&n| Ok((n, config.schedule_for(n)?.taus().to_vec())))
        .collect::<Result<Vec<_>>>()?;
    let windows = config.fit_windows();
    let meta = ScalingMetadata {
        n_sites: config.chain.n_sites,
        coupling: config.chain.coupling,
        synthetic: config.sweep.synthetic,
        cell_seeds: "derive_seed(seed, [n_seq, field_index, time_index])",
        repeat_streams: "repeat r uses stream r of the cell seed",
        init_ratio: config.budget.init_ratio,
        meas_ratio: config.budget.meas_ratio,
        field_window: config.sweep.field_window,
        time_window: windows.time.map(|(a, b)| [a, b]),
        average: config.inference.average,
        sampling: config.inference.sampling,
        fold_sign: config.inference.fold_sign,
        grid: [config.inference.grid_min, config.inference.grid_max],
        grid_points: config.inference.grid_points,
        repeats: config.inference.repeats,
        schedules,
        matched_samples: "M_std = round(M_seq * (init_ratio + n_seq*(1 + meas_ratio)) / (init_ratio + 1 + meas_ratio))",
        per_sample: "(init_ratio + n_seq*(1 + meas_ratio)) * t_evo, t_evo = mean interval",
        alpha_fields: &config.sweep.alpha_fields,
    };
    dir.write("metadata.json", &json_with_provenance(&prov, &meta)?)?;
    Ok(dir)
}

pub fn scaling(config: &RunConfig, progress: bool) -> Result<ScalingOutput> {
    let report = compute_scaling(config, progress)?;
    let dir = write_scaling(config, &report, "scaling")?;
    Ok(ScalingOutput { dir, report })
}

/// Scaling sweep under the table preset, plus a text table of `alpha`.
pub fn reproduce_table1(config: &RunConfig, progress: bool) -> Result<(ScalingOutput, String)> {
    let report = compute_scaling(config, progress)?;
    let dir = write_scaling(config, &report, "reproduce-table1")?;
    let table = alpha_table(config, &report);
    Ok((ScalingOutput { dir, report }, table))
}

pub fn alpha_table(config: &RunConfig, report: &ScalingReport) -> String {
    let mut out = String::from("n_seq");
    for b in &config.sweep.alpha_fields {
        out.push_str(&format!("  alpha(B/J={b})"));
    }
    out.push('\n');
    for &n in &config.sweep.n_seq {
        out.push_str(&format!("{n:>5}"));
        for &b in &config.sweep.alpha_fields {
            let w = format!("  alpha(B/J={b})").len();
            match report.alpha(n, b) {
                Some(a) => out.push_str(&format!("{a:>w$.3}")),
                None => out.push_str(&format!("{:>w$}", "-")),
            }
        }
        out.push('\n');
    }
    out
}
