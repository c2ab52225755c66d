//! Grid-based Bayesian estimation of the field and the relative-error metric.
//!
//! The posterior is stored as a density sampled on a uniform grid and read as
//! its piecewise-linear interpolant. Normalization is therefore the trapezoid
//! rule, and the mean and variance are the exact moments of that interpolant.

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::protocol::{sample_dataset, Dataset, Probe, Schedule};
use crate::rng::stream_rng;
use crate::spin::{ChainSpec, ChainTemplate};

const SPACING_TOLERANCE: f64 = 1e-12;

/// Uniformly spaced field values spanning the prior's support.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    values: Vec<f64>,
}

impl Default for FieldGrid {
    /// `[-0.2, 0.2]` (units of `J`) at spacing `0.001`.
    fn default() -> Self {
        Self::new(-0.2, 0.2, 401).expect("default grid is valid")
    }
}

impl FieldGrid {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 3 {
            return Err(Error::InvalidGrid("grid needs at least 3 points"));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidGrid("grid bounds must be finite with min < max"));
        }
        let last = points - 1;
        let step = (max - min) / last as f64;
        // Fill from both ends so symmetric bounds give exactly mirrored values.
        let values = (0..points)
            .map(|i| match (2 * i).cmp(&last) {
                core::cmp::Ordering::Less => min + step * i as f64,
                core::cmp::Ordering::Equal => (min + max) / 2.0,
                core::cmp::Ordering::Greater => max - step * (last - i) as f64,
            })
            .collect();
        Ok(Self { values })
    }

    /// Wraps explicit values, checking ascending uniform spacing.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidGrid("grid needs at least 3 points"));
        }
        let h = values[1] - values[0];
        if !(h > 0.0) {
            return Err(Error::InvalidGrid("grid must be ascending"));
        }
        if values
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > SPACING_TOLERANCE)
        {
            return Err(Error::InvalidGrid("grid spacing is not uniform"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn spacing(&self) -> f64 {
        (self.max() - self.min()) / (self.values.len() - 1) as f64
    }

    /// Symmetric about zero with zero as a grid point.
    pub fn is_symmetric(&self) -> bool {
        self.values.len() % 2 == 1 && (self.min() + self.max()).abs() < SPACING_TOLERANCE
    }
}

/// Log-probabilities of every outcome sequence at every grid point.
///
/// Evaluating the likelihood of a dataset is then a weighted sum of table
/// columns, so one table serves every dataset sharing the chain and schedule.
/// Storage is sequence-major: the grid values for one sequence are contiguous.
#[derive(Debug, Clone)]
pub struct LikelihoodTable {
    template: ChainTemplate,
    schedule: Schedule,
    grid: FieldGrid,
    log_probabilities: Vec<f64>,
}

impl LikelihoodTable {
    pub fn build(template: ChainTemplate, schedule: &Schedule, grid: &FieldGrid) -> Result<Self> {
        let rows = grid
            .values()
            .iter()
            .map(|&b| Ok(Probe::new(template.with_field(b), schedule.clone())?.distribution()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(template, schedule, grid, rows)
    }

    /// Assembles a table from per-grid-point sequence distributions computed
    /// elsewhere, e.g. in parallel.
    pub fn from_rows(
        template: ChainTemplate,
        schedule: &Schedule,
        grid: &FieldGrid,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let width = 1usize << schedule.n_seq();
        if rows.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: rows.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: bad.len(),
            });
        }
        let points = grid.len();
        let mut log_probabilities = alloc::vec![0.0; width * points];
        for (g, row) in rows.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                log_probabilities[j * points + g] = if p > 0.0 {
                    Float::ln(p)
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
        Ok(Self {
            template,
            schedule: schedule.clone(),
            grid: grid.clone(),
            log_probabilities,
        })
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn template(&self) -> ChainTemplate {
        self.template
    }

    /// `ln p(sequence | B)` across the grid for the sequence at `index`.
    pub fn column(&self, index: usize) -> &[f64] {
        let n = self.grid.len();
        &self.log_probabilities[index * n..(index + 1) * n]
    }

    /// `sum_j k_j ln p_j(B)` per grid point, without the multinomial
    /// coefficient (it does not depend on `B`).
    pub fn log_likelihood(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        if dataset.schedule() != &self.schedule {
            return Err(Error::InvalidSchedule("dataset schedule differs from the table's"));
        }
        if dataset.template() != self.template {
            return Err(Error::InvalidChain("dataset chain differs from the table's"));
        }
        let mut total = alloc::vec![0.0; self.grid.len()];
        for (seq, &k) in dataset.counts() {
            let k = k as f64;
            for (acc, &lp) in total.iter_mut().zip(self.column(seq.index())) {
                *acc += k * lp;
            }
        }
        Ok(total)
    }

    pub fn posterior(&self, dataset: &Dataset) -> Result<Posterior> {
        Posterior::from_log_likelihood(&self.grid, &self.log_likelihood(dataset)?)
    }
}

pub fn log_likelihood(dataset: &Dataset, grid: &FieldGrid) -> Result<Vec<f64>> {
    LikelihoodTable::build(dataset.template(), dataset.schedule(), grid)?.log_likelihood(dataset)
}

/// Posterior under a uniform prior on the grid interval.
pub fn posterior(dataset: &Dataset, grid: &FieldGrid) -> Result<Posterior> {
    LikelihoodTable::build(dataset.template(), dataset.schedule(), grid)?.posterior(dataset)
}

/// Normalized probability density of the field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    grid: FieldGrid,
    density: Vec<f64>,
}

impl Posterior {
    /// Exponentiates after subtracting the maximum, then normalizes.
    pub fn from_log_likelihood(grid: &FieldGrid, log_likelihood: &[f64]) -> Result<Self> {
        if log_likelihood.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: log_likelihood.len(),
            });
        }
        let max = log_likelihood
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegeneratePosterior);
        }
        let density = log_likelihood
            .iter()
            .map(|&l| Float::exp(l - max))
            .collect();
        Self::from_density(grid, density)
    }

    /// Normalizes a nonnegative unnormalized density.
    pub fn from_density(grid: &FieldGrid, mut density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: density.len(),
            });
        }
        if density.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidGrid("density must be finite and nonnegative"));
        }
        let mass = trapezoid(grid.spacing(), &density);
        if !(mass > 0.0) {
            return Err(Error::DegeneratePosterior);
        }
        density.iter_mut().for_each(|d| *d /= mass);
        Ok(Self {
            grid: grid.clone(),
            density,
        })
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn integral(&self) -> f64 {
        trapezoid(self.grid.spacing(), &self.density)
    }

    pub fn mean(&self) -> f64 {
        let h = self.grid.spacing();
        let b = self.grid.values();
        let f = &self.density;
        let first: f64 = (0..f.len() - 1)
            .map(|i| h * (b[i] * (f[i] + f[i + 1]) / 2.0 + h * (f[i] / 6.0 + f[i + 1] / 3.0)))
            .sum();
        first / self.integral()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let h = self.grid.spacing();
        let b = self.grid.values();
        let f = &self.density;
        let central: f64 = (0..f.len() - 1)
            .map(|i| {
                let c = b[i] - m;
                let left = c * c / 2.0 + c * h / 3.0 + h * h / 12.0;
                let right = c * c / 2.0 + 2.0 * c * h / 3.0 + h * h / 4.0;
                h * (f[i] * left + f[i + 1] * right)
            })
            .sum();
        (central / self.integral()).max(0.0)
    }

    /// Density of `|B|`.
    ///
    /// Every sequence probability is even in the field, so the sign of `B` is
    /// not identifiable from data; folding a symmetric grid onto `[0, max]`
    /// is equivalent to a uniform prior on the positive half. Grids that are
    /// already nonnegative are returned unchanged.
    pub fn folded(&self) -> Result<Self> {
        if self.grid.min() >= 0.0 {
            return Ok(self.clone());
        }
        if !self.grid.is_symmetric() {
            return Err(Error::InvalidGrid("only grids symmetric about zero can be folded"));
        }
        let centre = self.grid.len() / 2;
        let values = self.grid.values()[centre..].to_vec();
        let density: Vec<f64> = (0..values.len())
            .map(|i| self.density[centre + i] + self.density[centre - i])
            .collect();
        Ok(Self {
            grid: FieldGrid::from_values(values)?,
            density,
        })
    }
}

fn trapezoid(h: f64, f: &[f64]) -> f64 {
    let inner: f64 = f.iter().sum();
    h * (inner - (f[0] + f[f.len() - 1]) / 2.0)
}

/// Posterior moments and the squared relative error they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub mean: f64,
    pub variance: f64,
    /// `(variance + (mean - B)^2) / B^2`
    pub delta_b2: f64,
}

impl ErrorSummary {
    pub fn from_moments(mean: f64, variance: f64, field: f64) -> Result<Self> {
        if field == 0.0 {
            return Err(Error::ZeroTrueField);
        }
        let bias = mean - field;
        Ok(Self {
            mean,
            variance,
            delta_b2: (variance + bias * bias) / (field * field),
        })
    }

    pub fn delta_b(&self) -> f64 {
        Float::sqrt(self.delta_b2)
    }
}

pub fn error_summary(posterior: &Posterior, field: f64) -> Result<ErrorSummary> {
    ErrorSummary::from_moments(posterior.mean(), posterior.variance(), field)
}

/// How per-repeat errors are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorAverage {
    /// Arithmetic mean of `delta_b`.
    #[default]
    DeltaB,
    /// Square root of the mean of `delta_b^2`.
    RootMeanSquare,
}

/// How datasets are drawn for error estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Multinomial draw from the exact sequence distribution at the true field.
    #[default]
    Exact,
    /// Run the measurement protocol once per sample.
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorOptions {
    pub average: ErrorAverage,
    pub sampling: Sampling,
    /// Estimate `|B|`; see [`Posterior::folded`].
    pub fold_sign: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            average: ErrorAverage::default(),
            sampling: Sampling::default(),
            fold_sign: true,
        }
    }
}

/// Mean error over independent repeats with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageError {
    pub mean: f64,
    pub std_error: f64,
    pub repeats: usize,
}

impl AverageError {
    /// Combines per-repeat `delta_b` values.
    pub fn from_deltas(deltas: &[f64], average: ErrorAverage) -> Self {
        let n = deltas.len() as f64;
        let values: Vec<f64> = match average {
            ErrorAverage::DeltaB => deltas.to_vec(),
            ErrorAverage::RootMeanSquare => deltas.iter().map(|d| d * d).collect(),
        };
        let mean = values.iter().sum::<f64>() / n;
        let std_error = if deltas.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            Float::sqrt(var / n)
        } else {
            0.0
        };
        match average {
            ErrorAverage::DeltaB => Self {
                mean,
                std_error,
                repeats: deltas.len(),
            },
            ErrorAverage::RootMeanSquare => {
                let rms = Float::sqrt(mean);
                Self {
                    mean: rms,
                    std_error: if rms > 0.0 { std_error / (2.0 * rms) } else { 0.0 },
                    repeats: deltas.len(),
                }
            }
        }
    }
}

/// Simulates datasets at a true field and scores their posteriors against a
/// shared likelihood table.
#[derive(Debug, Clone)]
pub struct ErrorEstimator<'a> {
    table: &'a LikelihoodTable,
    field: f64,
    probe: Probe,
    distribution: Vec<f64>,
    options: EstimatorOptions,
}

impl<'a> ErrorEstimator<'a> {
    pub fn new(table: &'a LikelihoodTable, field: f64, options: EstimatorOptions) -> Result<Self> {
        if field == 0.0 {
            return Err(Error::ZeroTrueField);
        }
        let probe = Probe::new(table.template().with_field(field), table.schedule().clone())?;
        let distribution = probe.distribution();
        Ok(Self {
            table,
            field,
            probe,
            distribution,
            options,
        })
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn options(&self) -> EstimatorOptions {
        self.options
    }

    pub fn dataset<R: Rng + ?Sized>(&self, samples: u64, rng: &mut R) -> Result<Dataset> {
        match self.options.sampling {
            Sampling::Exact => sample_dataset(
                self.table.template(),
                self.table.schedule(),
                &self.distribution,
                samples,
                rng,
            ),
            Sampling::Simulate => crate::protocol::generate_dataset(
                self.probe.spec(),
                self.probe.schedule(),
                samples,
                rng,
            ),
        }
    }

    /// Posterior used for scoring, folded onto `|B|` when configured.
    pub fn posterior(&self, dataset: &Dataset) -> Result<Posterior> {
        let post = self.table.posterior(dataset)?;
        if self.options.fold_sign {
            post.folded()
        } else {
            Ok(post)
        }
    }

    /// One repeat: draw a dataset, form the posterior, score it.
    pub fn repeat<R: Rng + ?Sized>(&self, samples: u64, rng: &mut R) -> Result<ErrorSummary> {
        let dataset = self.dataset(samples, rng)?;
        error_summary(&self.posterior(&dataset)?, self.field)
    }

    /// Repeat `r` draws from stream `r` of `seed`.
    pub fn average(&self, samples: u64, repeats: usize, seed: u64) -> Result<AverageError> {
        if repeats == 0 {
            return Err(Error::EmptyDataset);
        }
        let deltas = (0..repeats)
            .map(|r| {
                self.repeat(samples, &mut stream_rng(seed, r as u64))
                    .map(|s| s.delta_b())
                    .map_err(|e| Error::Repeat {
                        index: r,
                        source: alloc::boxed::Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AverageError::from_deltas(&deltas, self.options.average))
    }
}

/// Mean relative error over `repeats` independent datasets at `spec.field()`.
pub fn average_error(
    spec: &ChainSpec,
    schedule: &Schedule,
    grid: &FieldGrid,
    samples: u64,
    repeats: usize,
    seed: u64,
    options: EstimatorOptions,
) -> Result<AverageError> {
    let table = LikelihoodTable::build(spec.template(), schedule, grid)?;
    ErrorEstimator::new(&table, spec.field(), options)?.average(samples, repeats, seed)
}
