//! Time-budget accounting and the power-law fits `dB = C(T) B^Delta`,
//! `C(T) = A T^-alpha`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::protocol::Schedule;

/// Wall-clock cost model for one sample of the protocol, in units of `1/J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBudget {
    /// Mean evolution interval.
    pub t_evo: f64,
    /// `t_init / t_evo`
    pub init_ratio: f64,
    /// `t_meas / t_evo`
    pub meas_ratio: f64,
}

impl TimeBudget {
    pub const DEFAULT_INIT_RATIO: f64 = 100.0;
    pub const DEFAULT_MEAS_RATIO: f64 = 10.0;

    pub fn new(t_evo: f64, init_ratio: f64, meas_ratio: f64) -> Result<Self> {
        for (v, what) in [
            (t_evo, "evolution time must be positive"),
            (init_ratio, "initialization ratio must be positive"),
            (meas_ratio, "measurement ratio must be positive"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidBudget(what));
            }
        }
        Ok(Self {
            t_evo,
            init_ratio,
            meas_ratio,
        })
    }

    /// Default ratios with `t_evo` the schedule's mean interval.
    pub fn for_schedule(schedule: &Schedule) -> Self {
        Self {
            t_evo: schedule.mean_interval(),
            init_ratio: Self::DEFAULT_INIT_RATIO,
            meas_ratio: Self::DEFAULT_MEAS_RATIO,
        }
    }

    /// Duration of one reset-plus-sequence cycle.
    pub fn per_sample(&self, n_seq: usize) -> f64 {
        (self.init_ratio + n_seq as f64 * (1.0 + self.meas_ratio)) * self.t_evo
    }

    pub fn total_time(&self, n_seq: usize, samples: u64) -> f64 {
        samples as f64 * self.per_sample(n_seq)
    }

    /// Standard-strategy sample count with the same total time as `m_seq`
    /// sequences of length `n_seq`, rounded to the nearest integer.
    pub fn matched_samples(&self, n_seq: usize, m_seq: u64) -> u64 {
        let ratio = self.per_sample(n_seq) / self.per_sample(1);
        Float::round(m_seq as f64 * ratio) as u64
    }

    /// Sample count whose total time is closest to `total_time` (at least 1).
    pub fn samples_for_time(&self, n_seq: usize, total_time: f64) -> u64 {
        Float::round(total_time / self.per_sample(n_seq)).max(1.0) as u64
    }
}

pub fn total_time(budget: &TimeBudget, n_seq: usize, samples: u64) -> f64 {
    budget.total_time(n_seq, samples)
}

pub fn matched_samples(budget: &TimeBudget, n_seq: usize, m_seq: u64) -> u64 {
    budget.matched_samples(n_seq, m_seq)
}

/// Ordinary least squares of `ln y` on `ln x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in log space.
    pub residual: f64,
    /// Smallest and largest abscissa that entered the fit.
    pub window: (f64, f64),
    pub points: usize,
}

/// Fits `ln y = slope ln x + intercept` over points with `x` inside `window`.
pub fn fit_loglog(x: &[f64], y: &[f64], window: (f64, f64)) -> Result<LogLogFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    for (i, &v) in x.iter().chain(y).enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveData {
                index: i % x.len().max(1),
                value: v,
            });
        }
    }
    let (lo, hi) = window;
    let slack = 1e-12;
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&xi, _)| xi >= lo * (1.0 - slack) && xi <= hi * (1.0 + slack))
        .map(|(&xi, &yi)| (Float::ln(xi), Float::ln(yi)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::TooFewPoints { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::TooFewPoints { found: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum();
    let used = x
        .iter()
        .filter(|&&xi| xi >= lo * (1.0 - slack) && xi <= hi * (1.0 + slack));
    let wmin = used.clone().copied().fold(f64::INFINITY, f64::min);
    let wmax = used.copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LogLogFit {
        slope,
        intercept,
        residual: Float::sqrt(sse / n),
        window: (wmin, wmax),
        points: pts.len(),
    })
}

/// Averaged error for one `(n_seq, B, T)` cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCell {
    pub n_seq: usize,
    pub field: f64,
    pub total_time: f64,
    pub samples: u64,
    pub mean: f64,
    pub std_error: f64,
}

/// Fit windows for [`extract_scaling`]; `None` means the full data range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindows {
    pub field: (f64, f64),
    pub time: Option<(f64, f64)>,
}

impl Default for FitWindows {
    fn default() -> Self {
        Self {
            field: (0.04, 0.2),
            time: None,
        }
    }
}

/// Field-exponent fit at one total time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSlice {
    pub total_time: f64,
    pub delta: f64,
    pub log_c: f64,
    pub residual: f64,
}

/// Scaling law fitted for one sequence length.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub n_seq: usize,
    /// Mean of `Delta(T)` over the time window.
    pub delta_mean: f64,
    /// `max - min` of `Delta(T)` over the time window.
    pub delta_spread: f64,
    pub log_amplitude: f64,
    pub alpha: f64,
    /// RMS log residual of the `C(T)` fit.
    pub residual: f64,
    pub time_window: (f64, f64),
    pub slices: Vec<TimeSlice>,
}

impl ScalingFit {
    pub fn amplitude(&self) -> f64 {
        Float::exp(self.log_amplitude)
    }
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Per `n_seq`: fit `dB` against `B` at each total time, then `C(T)` against `T`.
///
/// Cells are grouped by exact total time; a sweep assigns the same time to
/// every field at a given `(n_seq, samples)`.
pub fn extract_scaling(cells: &[ErrorCell], windows: FitWindows) -> Result<Vec<ScalingFit>> {
    let mut sequence_lengths: Vec<usize> = cells.iter().map(|c| c.n_seq).collect();
    sequence_lengths.sort_unstable();
    sequence_lengths.dedup();
    sequence_lengths
        .into_iter()
        .map(|n_seq| fit_one(cells, n_seq, windows))
        .collect()
}

fn fit_one(cells: &[ErrorCell], n_seq: usize, windows: FitWindows) -> Result<ScalingFit> {
    let wrap = |total_time: f64| {
        move |e: Error| Error::Fit {
            n_seq,
            total_time,
            source: Box::new(e),
        }
    };
    let mine: Vec<&ErrorCell> = cells.iter().filter(|c| c.n_seq == n_seq).collect();
    let times = distinct_sorted(mine.iter().map(|c| c.total_time));
    let (tlo, thi) = windows.time.unwrap_or((
        times.first().copied().unwrap_or(0.0),
        times.last().copied().unwrap_or(0.0),
    ));
    let mut slices = Vec::new();
    for &t in times
        .iter()
        .filter(|&&t| t >= tlo * (1.0 - 1e-12) && t <= thi * (1.0 + 1e-12))
    {
        let at: Vec<&&ErrorCell> = mine.iter().filter(|c| c.total_time == t).collect();
        let x: Vec<f64> = at.iter().map(|c| c.field).collect();
        let y: Vec<f64> = at.iter().map(|c| c.mean).collect();
        let fit = fit_loglog(&x, &y, windows.field).map_err(wrap(t))?;
        slices.push(TimeSlice {
            total_time: t,
            delta: fit.slope,
            log_c: fit.intercept,
            residual: fit.residual,
        });
    }
    let t: Vec<f64> = slices.iter().map(|s| s.total_time).collect();
    let c: Vec<f64> = slices.iter().map(|s| Float::exp(s.log_c)).collect();
    let time_fit = fit_loglog(&t, &c, (tlo, thi)).map_err(wrap(f64::NAN))?;
    let deltas = slices.iter().map(|s| s.delta);
    let dmin = deltas.clone().fold(f64::INFINITY, f64::min);
    let dmax = deltas.clone().fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalingFit {
        n_seq,
        delta_mean: deltas.sum::<f64>() / slices.len() as f64,
        delta_spread: dmax - dmin,
        log_amplitude: time_fit.intercept,
        alpha: -time_fit.slope,
        residual: time_fit.residual,
        time_window: time_fit.window,
        slices,
    })
}

/// Time exponent at a single field: `-slope` of `ln dB` against `ln T`.
pub fn fixed_field_alpha(
    cells: &[ErrorCell],
    n_seq: usize,
    field: f64,
    time_window: Option<(f64, f64)>,
) -> Result<LogLogFit> {
    let at: Vec<&ErrorCell> = cells
        .iter()
        .filter(|c| c.n_seq == n_seq && (c.field - field).abs() <= 1e-12 * field.abs().max(1.0))
        .collect();
    let x: Vec<f64> = at.iter().map(|c| c.total_time).collect();
    let y: Vec<f64> = at.iter().map(|c| c.mean).collect();
    let window = time_window.unwrap_or((
        x.iter().copied().fold(f64::INFINITY, f64::min),
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ));
    let mut fit = fit_loglog(&x, &y, window).map_err(|e| Error::Fit {
        n_seq,
        total_time: f64::NAN,
        source: Box::new(e),
    })?;
    fit.slope = -fit.slope;
    Ok(fit)
}

/// `dB = A B^Delta T^-alpha`, for synthetic error tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub amplitude: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl PowerLaw {
    pub fn value(&self, field: f64, total_time: f64) -> f64 {
        self.amplitude * Float::powf(field, self.delta) * Float::powf(total_time, -self.alpha)
    }

    /// One cell per `(field, time)`, optionally with multiplicative
    /// `exp(noise * z)` log-normal scatter.
    pub fn table<R: Rng + ?Sized>(
        &self,
        n_seq: usize,
        fields: &[f64],
        times: &[f64],
        noise: f64,
        rng: &mut R,
    ) -> Vec<ErrorCell> {
        let mut cells = Vec::with_capacity(fields.len() * times.len());
        for &t in times {
            for &b in fields {
                let z: f64 = if noise > 0.0 {
                    StandardNormal.sample(rng)
                } else {
                    0.0
                };
                cells.push(ErrorCell {
                    n_seq,
                    field: b,
                    total_time: t,
                    samples: 0,
                    mean: self.value(b, t) * Float::exp(noise * z),
                    std_error: 0.0,
                });
            }
        }
        cells
    }
}
