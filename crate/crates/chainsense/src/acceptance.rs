//! Acceptance checks, shared by the `selftest` subcommand and the
//! `acceptance` test target. Tolerances are fixed here.

use std::fmt;

use chainsense_core::dynamics::{diagonalize, evolve};
use chainsense_core::inference::{error_summary, ErrorEstimator, ErrorSummary, FieldGrid, Posterior};
use chainsense_core::protocol::{generate_dataset, OutcomeSequence, Probe, Schedule};
use chainsense_core::rng::{derive_seed, stream_rng};
use chainsense_core::scaling::{extract_scaling, FitWindows, PowerLaw, TimeBudget};
use chainsense_core::spin::{build_hamiltonian, ChainSpec, ChainTemplate, PureState};
use rayon::prelude::*;

use crate::commands::ScalingReport;
use crate::config::{log_spaced, RunConfig};
use crate::oracle;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{mark}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

fn check(id: u8, name: &'static str, passed: bool, detail: String) -> Check {
    Check { id, name, passed, detail }
}

fn failed(id: u8, name: &'static str, err: impl fmt::Display) -> Check {
    check(id, name, false, format!("error: {err}"))
}

/// Target exponents at `B/J = 0.1` with their tolerances.
pub const ALPHA_TARGETS: [(usize, f64, f64); 3] = [(1, 0.490, 0.06), (5, 0.680, 0.07), (10, 0.770, 0.07)];
pub const ALPHA_FIELD: f64 = 0.1;
pub const MONOTONE_SEQUENCE_LENGTHS: [usize; 5] = [1, 4, 5, 6, 10];

/// Fitted time exponents against the targets, and exact monotonicity over
/// the sequence lengths.
pub fn time_exponents(report: &ScalingReport) -> Check {
    const NAME: &str = "time exponent per sequence length";
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, target, tol) in ALPHA_TARGETS {
        match report.alpha(n, ALPHA_FIELD) {
            Some(a) => {
                let hit = (a - target).abs() <= tol;
                ok &= hit;
                parts.push(format!("n={n} alpha={a:.3} (want {target}±{tol}{})", if hit { "" } else { " MISS" }));
            }
            None => return failed(1, NAME, format!("no alpha for n_seq={n}")),
        }
    }
    let mut values = Vec::new();
    for n in MONOTONE_SEQUENCE_LENGTHS {
        match report.alpha(n, ALPHA_FIELD) {
            Some(a) => values.push(a),
            None => return failed(1, NAME, format!("no alpha for n_seq={n}")),
        }
    }
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    ok &= monotone;
    let listed: Vec<String> = values.iter().map(|a| format!("{a:.3}")).collect();
    parts.push(format!(
        "over {MONOTONE_SEQUENCE_LENGTHS:?}: [{}] {}",
        listed.join(", "),
        if monotone { "non-decreasing" } else { "NOT non-decreasing" }
    ));
    check(1, NAME, ok, parts.join("; "))
}

/// Field exponent stays nearly constant across total times at `n_seq = 4`.
pub fn field_exponent_stability(report: &ScalingReport) -> Check {
    const NAME: &str = "field exponent stable over total time";
    let Some(fit) = report.fit(4) else {
        return failed(2, NAME, "no fit for n_seq=4");
    };
    let bound = 0.2 * fit.delta_mean.abs();
    check(
        2,
        NAME,
        fit.delta_spread < bound,
        format!("spread {:.4} vs 0.2*|mean {:.4}| = {bound:.4}", fit.delta_spread, fit.delta_mean),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Median posterior variance after `1..=n` measurements, over `repeats`
/// datasets of `samples` sequences.
pub fn prefix_variances(config: &RunConfig, repeats: usize) -> crate::Result<Vec<f64>> {
    let schedule = config.schedule()?;
    let n = schedule.n_seq();
    let field = config.chain.field;
    let options = config.estimator_options();
    let tables = (1..=n)
        .map(|k| {
            let prefix = schedule
                .prefix(k)
                .map_err(|e| crate::CliError::core("schedule prefix", e))?;
            crate::sweep::build_table(config, &prefix)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let full = ErrorEstimator::new(&tables[n - 1], field, options)
        .map_err(|e| crate::CliError::core("estimator", e))?;
    let per_repeat = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(derive_seed(config.rng.seed, &[3]), r as u64);
            let data = full.dataset(config.inference.samples, &mut rng)?;
            (1..=n)
                .map(|k| {
                    let est = ErrorEstimator::new(&tables[k - 1], field, options)?;
                    Ok(est.posterior(&data.prefix(k)?)?.variance())
                })
                .collect::<chainsense_core::Result<Vec<f64>>>()
        })
        .collect::<chainsense_core::Result<Vec<_>>>()
        .map_err(|e| crate::CliError::core("prefix posteriors", e))?;
    Ok((0..n)
        .map(|k| median(per_repeat.iter().map(|v| v[k]).collect()))
        .collect())
}

/// `N = 5`, `B/J = 0.1`, `M_sam = 1000`, five measurements at the default
/// intervals, default grid.
pub fn narrowing_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.chain.n_sites = 5;
    c.chain.field = 0.1;
    c.schedule.n_seq = 5;
    c.inference.samples = 1000;
    c
}

/// Posteriors narrow strictly as measurements are added.
pub fn posterior_narrowing() -> Check {
    const NAME: &str = "posterior narrows with each measurement";
    match prefix_variances(&narrowing_config(), 100) {
        Ok(v) => {
            let strict = v.windows(2).all(|w| w[1] < w[0]);
            let listed: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
            check(3, NAME, strict, format!("median variances [{}]", listed.join(", ")))
        }
        Err(e) => failed(3, NAME, e),
    }
}

pub fn oracle_equivalence() -> Check {
    const NAME: &str = "collapse chain equals matrix-product oracle";
    let run = || -> chainsense_core::Result<f64> {
        let template = ChainTemplate::new(3, 1.0)?;
        let schedule = Schedule::standard(3)?;
        let mut worst = 0.0f64;
        for b in [0.0, 0.05, 0.1, 0.15, 0.2] {
            let probe = Probe::new(template.with_field(b), schedule.clone())?;
            for index in 0..8 {
                let seq = OutcomeSequence::from_index(index, 3);
                let ups: Vec<bool> = seq.outcomes().iter().map(|o| o.is_up()).collect();
                let want = oracle::joint_probability(3, 1.0, b, schedule.taus(), &ups);
                worst = worst.max((probe.sequence_probability(&seq)? - want).abs());
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => check(4, NAME, w <= 1e-12, format!("max |diff| = {w:.2e} (tol 1e-12)")),
        Err(e) => failed(4, NAME, e),
    }
}

pub fn branch_completeness() -> Check {
    const NAME: &str = "sequence probabilities sum to one";
    let run = || -> chainsense_core::Result<f64> {
        let template = ChainTemplate::new(4, 1.0)?;
        let mut worst = 0.0f64;
        for n in 1..=6 {
            let schedule = Schedule::standard(n)?;
            for k in 0..9 {
                let b = -0.2 + 0.05 * k as f64;
                let total: f64 = Probe::new(template.with_field(b), schedule.clone())?
                    .distribution()
                    .iter()
                    .sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => check(5, NAME, w <= 1e-10, format!("max |sum - 1| = {w:.2e} (tol 1e-10)")),
        Err(e) => failed(5, NAME, e),
    }
}

pub fn eigenstate_invariance() -> Check {
    const NAME: &str = "all-down state is stationary at zero field";
    let run = || -> chainsense_core::Result<(f64, u64)> {
        let spec = ChainSpec::new(5, 1.0, 0.0)?;
        let decomposition = diagonalize(&build_hamiltonian(&spec))?;
        let psi0 = PureState::ferromagnetic(5);
        let mut worst = 0.0f64;
        for t in [1.0, 10.0, 100.0] {
            let fidelity = psi0.inner(&evolve(&psi0, &decomposition, t)?).norm();
            worst = worst.max((fidelity - 1.0).abs());
        }
        let schedule = Schedule::standard(5)?;
        let data = generate_dataset(&spec, &schedule, 1000, &mut stream_rng(6, 0))?;
        let all_down = data.counts().get(&OutcomeSequence::all_down(5)).copied().unwrap_or(0);
        Ok((worst, data.samples() - all_down))
    };
    match run() {
        Ok((w, other)) => check(
            6,
            NAME,
            w <= 1e-10 && other == 0,
            format!("max |fidelity - 1| = {w:.2e} (tol 1e-10); {other} of 1000 runs left all-down"),
        ),
        Err(e) => failed(6, NAME, e),
    }
}

pub fn two_level_rabi() -> Check {
    const NAME: &str = "single spin follows sin^2(Bt)";
    let run = || -> chainsense_core::Result<f64> {
        let spec = ChainSpec::new(1, 1.0, 0.3)?;
        let decomposition = diagonalize(&build_hamiltonian(&spec))?;
        let psi0 = PureState::ferromagnetic(1);
        let mut worst = 0.0f64;
        for k in 1..=20 {
            let t = 0.75 * k as f64;
            let p = evolve(&psi0, &decomposition, t)?.up_probability(1)?;
            worst = worst.max((p - oracle::two_level_up_probability(0.3, t)).abs());
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => check(7, NAME, w <= 1e-10, format!("max |diff| = {w:.2e} over 20 times (tol 1e-10)")),
        Err(e) => failed(7, NAME, e),
    }
}

fn ln_multinomial(counts: &[u64]) -> f64 {
    let ln_fact = |n: u64| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    ln_fact(counts.iter().sum()) - counts.iter().map(|&c| ln_fact(c)).sum::<f64>()
}

pub fn posterior_calculus() -> Check {
    const NAME: &str = "posterior normalization and moments";
    let run = || -> chainsense_core::Result<(f64, f64, f64)> {
        let template = ChainTemplate::new(3, 1.0)?;
        let schedule = Schedule::standard(3)?;
        let grid = FieldGrid::new(-0.2, 0.2, 401)?;
        let table = chainsense_core::inference::LikelihoodTable::build(template, &schedule, &grid)?;
        let (mut norm_err, mut coef_err) = (0.0f64, 0.0f64);
        for (i, samples) in [1u64, 2, 3, 5, 8, 13, 20, 1000].into_iter().enumerate() {
            for b in [0.05, 0.1, 0.2] {
                let est = ErrorEstimator::new(&table, b, Default::default())?;
                let data = est.dataset(samples, &mut stream_rng(8, (i * 10) as u64))?;
                let ll = table.log_likelihood(&data)?;
                let post = Posterior::from_log_likelihood(&grid, &ll)?;
                norm_err = norm_err.max((post.integral() - 1.0).abs());
                norm_err = norm_err.max((est.posterior(&data)?.integral() - 1.0).abs());
                if samples <= 20 {
                    let c = ln_multinomial(&data.dense_counts());
                    let shifted: Vec<f64> = ll.iter().map(|l| l + c).collect();
                    let with = Posterior::from_log_likelihood(&grid, &shifted)?;
                    for (a, b) in post.density().iter().zip(with.density()) {
                        coef_err = coef_err.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
                    }
                }
            }
        }
        let (lo, hi) = (0.02, 0.18);
        let uniform = Posterior::from_density(&FieldGrid::new(lo, hi, 161)?, vec![1.0; 161])?;
        let got = error_summary(&uniform, 0.1)?;
        let want = ErrorSummary::from_moments((lo + hi) / 2.0, (hi - lo) * (hi - lo) / 12.0, 0.1)?;
        let moment_err = [
            (got.mean - want.mean).abs(),
            (got.variance - want.variance).abs(),
            (got.delta_b2 - want.delta_b2).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        Ok((norm_err, coef_err, moment_err))
    };
    match run() {
        Ok((n, c, m)) => check(
            8,
            NAME,
            n <= 1e-9 && c <= 1e-12 && m <= 1e-12,
            format!(
                "max |integral - 1| = {n:.2e} (tol 1e-9); coefficient effect {c:.2e} (tol 1e-12); uniform moments {m:.2e} (tol 1e-12)"
            ),
        ),
        Err(e) => failed(8, NAME, e),
    }
}

pub fn time_budget_identity() -> Check {
    const NAME: &str = "matched samples equalize total time";
    let run = || -> chainsense_core::Result<(f64, bool)> {
        let mut worst = 0.0f64;
        let mut n1_exact = true;
        for n in 1..=10 {
            let budget = TimeBudget::for_schedule(&Schedule::standard(n)?);
            for m in [1u64, 7, 111, 1000, 12_345, 1_000_003] {
                let m_std = budget.matched_samples(n, m);
                let gap = (budget.total_time(1, m_std) - budget.total_time(n, m)).abs();
                worst = worst.max(gap / budget.per_sample(1));
                if n == 1 {
                    n1_exact &= m_std == m;
                }
            }
        }
        Ok((worst, n1_exact))
    };
    match run() {
        Ok((w, exact)) => check(
            9,
            NAME,
            w <= 1.0 && exact,
            format!("max gap = {w:.3} standard samples (tol 1); n_seq=1 exact: {exact}"),
        ),
        Err(e) => failed(9, NAME, e),
    }
}

/// Fields and times for the synthetic round trip.
pub fn synthetic_grid() -> (Vec<f64>, Vec<f64>) {
    let fields = (2..=10).map(|k| 0.02 * k as f64).collect();
    (fields, log_spaced(1e2, 1e8, 13))
}

pub fn synthetic_round_trip() -> Check {
    const NAME: &str = "scaling fit recovers a synthetic power law";
    let law = PowerLaw {
        amplitude: 3.7,
        delta: -0.85,
        alpha: 0.62,
    };
    let (fields, times) = synthetic_grid();
    let recover = |noise: f64| -> chainsense_core::Result<(f64, f64, f64)> {
        let cells = law.table(4, &fields, &times, noise, &mut stream_rng(10, 0));
        let fit = &extract_scaling(&cells, FitWindows::default())?[0];
        Ok((
            (fit.amplitude() / law.amplitude - 1.0).abs(),
            (fit.delta_mean - law.delta).abs(),
            (fit.alpha - law.alpha).abs(),
        ))
    };
    match (recover(0.0), recover(0.01)) {
        (Ok(exact), Ok(noisy)) => {
            let max = |t: (f64, f64, f64)| t.0.max(t.1).max(t.2);
            check(
                10,
                NAME,
                max(exact) <= 1e-10 && max(noisy) <= 0.02,
                format!(
                    "noiseless (A rel, Delta, alpha) = ({:.1e}, {:.1e}, {:.1e}) tol 1e-10; 1% noise = ({:.4}, {:.4}, {:.4}) tol 0.02",
                    exact.0, exact.1, exact.2, noisy.0, noisy.1, noisy.2
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => failed(10, NAME, e),
    }
}

/// The deterministic checks plus the posterior-narrowing check; everything
/// except the long scaling sweep.
pub fn quick_suite() -> Vec<Check> {
    vec![
        posterior_narrowing(),
        oracle_equivalence(),
        branch_completeness(),
        eigenstate_invariance(),
        two_level_rabi(),
        posterior_calculus(),
        time_budget_identity(),
        synthetic_round_trip(),
    ]
}

pub fn sweep_suite(report: &ScalingReport) -> Vec<Check> {
    vec![time_exponents(report), field_exponent_stability(report)]
}
