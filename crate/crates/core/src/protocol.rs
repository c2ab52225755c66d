//! The sequential measurement protocol on the last site of the chain.
//!
//! One sequence starts from the all-down state, then alternates free evolution
//! for `tau_i` with a projective `sigma^z` measurement on site `N` and the
//! accompanying collapse. The probe is never re-initialized inside a sequence.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use num_traits::Float;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::dynamics::{diagonalize, evolve, Propagator, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::spin::{build_hamiltonian, magnetization, zeros, ChainSpec, ChainTemplate, PureState, C64};

/// Outcomes below this probability are treated as impossible.
pub const COLLAPSE_THRESHOLD: f64 = 1e-14;

/// Tolerance on the total probability of an exact sequence distribution.
const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Up,
    Down,
}

impl Outcome {
    /// `+1` for up, `-1` for down.
    pub fn sign(self) -> i8 {
        match self {
            Outcome::Up => 1,
            Outcome::Down => -1,
        }
    }

    pub fn is_up(self) -> bool {
        self == Outcome::Up
    }

    fn from_bit(up: bool) -> Self {
        if up {
            Outcome::Up
        } else {
            Outcome::Down
        }
    }
}

/// Free-evolution intervals between successive measurements, in units of `1/J`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    taus: Vec<f64>,
}

impl Schedule {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::InvalidSchedule("schedule needs at least one interval"));
        }
        if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidSchedule("intervals must be positive and finite"));
        }
        Ok(Self { taus })
    }

    /// `start, start + step, ...` with `n_seq` entries.
    pub fn arithmetic(n_seq: usize, start: f64, step: f64) -> Result<Self> {
        Self::new((0..n_seq).map(|i| start + step * i as f64).collect())
    }

    /// Intervals `6, 8, 10, ...` (units of `1/J`), the default spacing.
    pub fn standard(n_seq: usize) -> Result<Self> {
        Self::arithmetic(n_seq, 6.0, 2.0)
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn n_seq(&self) -> usize {
        self.taus.len()
    }

    pub fn mean_interval(&self) -> f64 {
        self.taus.iter().sum::<f64>() / self.taus.len() as f64
    }

    /// The first `k` intervals.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.taus.len() {
            return Err(Error::InvalidSchedule("prefix length out of range"));
        }
        Self::new(self.taus[..k].to_vec())
    }
}

/// One measurement record, first measurement first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutcomeSequence(Vec<Outcome>);

impl OutcomeSequence {
    pub fn new(outcomes: Vec<Outcome>) -> Self {
        Self(outcomes)
    }

    pub fn all_down(len: usize) -> Self {
        Self(vec![Outcome::Down; len])
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Position in a `2^n` table: the first outcome is the most significant
    /// bit and up is 1.
    pub fn index(&self) -> usize {
        self.0
            .iter()
            .fold(0, |acc, o| (acc << 1) | usize::from(o.is_up()))
    }

    pub fn from_index(index: usize, len: usize) -> Self {
        Self(
            (0..len)
                .map(|i| Outcome::from_bit(index >> (len - 1 - i) & 1 == 1))
                .collect(),
        )
    }

    pub fn prefix(&self, k: usize) -> Self {
        Self(self.0[..k].to_vec())
    }
}

/// Counts of each distinct sequence over `samples` independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    template: ChainTemplate,
    schedule: Schedule,
    counts: BTreeMap<OutcomeSequence, u64>,
    samples: u64,
}

impl Dataset {
    pub fn new(
        template: ChainTemplate,
        schedule: Schedule,
        counts: BTreeMap<OutcomeSequence, u64>,
    ) -> Result<Self> {
        let n = schedule.n_seq();
        if let Some(bad) = counts.keys().find(|s| s.len() != n) {
            return Err(Error::SequenceLength {
                expected: n,
                found: bad.len(),
            });
        }
        let mut counts = counts;
        counts.retain(|_, k| *k > 0);
        let samples = counts.values().sum();
        if samples == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            template,
            schedule,
            counts,
            samples,
        })
    }

    /// Builds a dataset from counts laid out by [`OutcomeSequence::index`].
    pub fn from_dense(template: ChainTemplate, schedule: Schedule, dense: &[u64]) -> Result<Self> {
        let n = schedule.n_seq();
        if dense.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: dense.len(),
            });
        }
        let counts = dense
            .iter()
            .enumerate()
            .filter(|(_, k)| **k > 0)
            .map(|(i, k)| (OutcomeSequence::from_index(i, n), *k))
            .collect();
        Self::new(template, schedule, counts)
    }

    pub fn template(&self) -> ChainTemplate {
        self.template
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn counts(&self) -> &BTreeMap<OutcomeSequence, u64> {
        &self.counts
    }

    pub fn dense_counts(&self) -> Vec<u64> {
        let mut dense = vec![0; 1 << self.schedule.n_seq()];
        for (seq, k) in &self.counts {
            dense[seq.index()] += k;
        }
        dense
    }

    /// The same runs truncated to their first `k` measurements.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        let schedule = self.schedule.prefix(k)?;
        let mut counts = BTreeMap::new();
        for (seq, n) in &self.counts {
            *counts.entry(seq.prefix(k)).or_insert(0) += n;
        }
        Self::new(self.template, schedule, counts)
    }
}

/// `p_gamma = <psi| M_N^gamma |psi>` for the last site.
pub fn outcome_probability(state: &PureState, outcome: Outcome) -> f64 {
    let amps = state.amplitudes().as_slice();
    let (up, down) = split_probabilities(amps);
    match outcome {
        Outcome::Up => up,
        Outcome::Down => down,
    }
}

// Site N is bit 0 of the basis index.
fn split_probabilities(amps: &[C64]) -> (f64, f64) {
    let mut up = 0.0;
    let mut down = 0.0;
    for (i, a) in amps.iter().enumerate() {
        if i & 1 == 1 {
            up += a.norm_sqr();
        } else {
            down += a.norm_sqr();
        }
    }
    (up.clamp(0.0, 1.0), down.clamp(0.0, 1.0))
}

fn project(amps: &[C64], outcome: Outcome, scale: f64) -> Vec<C64> {
    let keep = usize::from(outcome.is_up());
    amps.iter()
        .enumerate()
        .map(|(i, a)| if i & 1 == keep { a * scale } else { C64::new(0.0, 0.0) })
        .collect()
}

/// `M_N^gamma |psi> / sqrt(p_gamma)`.
pub fn collapse(state: &PureState, outcome: Outcome) -> Result<PureState> {
    let p = outcome_probability(state, outcome);
    if p <= COLLAPSE_THRESHOLD {
        return Err(Error::ZeroProbability { probability: p });
    }
    let amps = project(state.amplitudes().as_slice(), outcome, 1.0 / Float::sqrt(p));
    Ok(PureState::from_raw(state.n_sites(), DVector::from_vec(amps)))
}

/// A chain with a known field, prepared to run one schedule many times.
///
/// Holds the spectral decomposition and one propagator per interval, so
/// repeated runs and probability evaluations cost only matrix-vector products.
#[derive(Debug, Clone)]
pub struct Probe {
    spec: ChainSpec,
    schedule: Schedule,
    decomposition: SpectralDecomposition,
    propagators: Vec<Propagator>,
}

impl Probe {
    pub fn new(spec: ChainSpec, schedule: Schedule) -> Result<Self> {
        let decomposition = diagonalize(&build_hamiltonian(&spec))?;
        let propagators = schedule
            .taus()
            .iter()
            .map(|&t| decomposition.propagator(t))
            .collect::<Result<_>>()?;
        Ok(Self {
            spec,
            schedule,
            decomposition,
            propagators,
        })
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    /// One sampled sequence from a fresh ferromagnetic state.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<OutcomeSequence> {
        self.run_recording(rng).map(|(seq, _)| seq)
    }

    /// Like [`Probe::run`], also returning the post-collapse state after each
    /// measurement.
    pub fn run_recording<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(OutcomeSequence, Vec<PureState>)> {
        let mut state = PureState::ferromagnetic(self.spec.n_sites());
        let mut outcomes = Vec::with_capacity(self.schedule.n_seq());
        let mut states = Vec::with_capacity(self.schedule.n_seq());
        for u in &self.propagators {
            let evolved = u.apply(&state)?;
            let p_up = outcome_probability(&evolved, Outcome::Up);
            let outcome = Outcome::from_bit(rng.random::<f64>() < p_up);
            state = collapse(&evolved, outcome)?;
            outcomes.push(outcome);
            states.push(state.clone());
        }
        Ok((OutcomeSequence(outcomes), states))
    }

    /// `prod_i p_{gamma_i}^{(i)}` along the branch selected by `seq`.
    pub fn sequence_probability(&self, seq: &OutcomeSequence) -> Result<f64> {
        if seq.len() != self.schedule.n_seq() {
            return Err(Error::SequenceLength {
                expected: self.schedule.n_seq(),
                found: seq.len(),
            });
        }
        let mut state = PureState::ferromagnetic(self.spec.n_sites());
        let mut prob = 1.0;
        for (u, &outcome) in self.propagators.iter().zip(seq.outcomes()) {
            let evolved = u.apply(&state)?;
            let p = outcome_probability(&evolved, outcome);
            if p <= COLLAPSE_THRESHOLD {
                return Ok(0.0);
            }
            prob *= p;
            state = collapse(&evolved, outcome)?;
        }
        Ok(prob)
    }

    /// Probabilities of all `2^n_seq` sequences, laid out by
    /// [`OutcomeSequence::index`].
    ///
    /// Walks the branching tree once, sharing every evolved prefix between
    /// the two branches below it.
    pub fn distribution(&self) -> Vec<f64> {
        let n = self.schedule.n_seq();
        let mut out = vec![0.0; 1 << n];
        let psi0 = PureState::ferromagnetic(self.spec.n_sites()).into_amplitudes();
        self.descend(0, psi0.as_slice(), None, 1.0, 0, &mut out);
        out
    }

    fn descend(
        &self,
        depth: usize,
        psi: &[C64],
        last_bit: Option<usize>,
        prob: f64,
        index: usize,
        out: &mut [f64],
    ) {
        let u = &self.propagators[depth];
        let mut evolved = zeros(psi.len());
        match last_bit {
            Some(bit) => u.apply_half_into(psi, 1, bit, &mut evolved),
            None => u.apply_into(psi, &mut evolved),
        }
        let (p_up, p_down) = split_probabilities(&evolved);
        for (outcome, p) in [(Outcome::Up, p_up), (Outcome::Down, p_down)] {
            if p <= COLLAPSE_THRESHOLD {
                continue;
            }
            let child_index = (index << 1) | usize::from(outcome.is_up());
            if depth + 1 == self.propagators.len() {
                out[child_index] = prob * p;
            } else {
                let child = project(&evolved, outcome, 1.0 / Float::sqrt(p));
                self.descend(
                    depth + 1,
                    &child,
                    Some(usize::from(outcome.is_up())),
                    prob * p,
                    child_index,
                    out,
                );
            }
        }
    }

    /// Magnetization of sites 1 and `N` along one sampled sequence, sampled
    /// every `dt` during each free evolution.
    ///
    /// Each measurement contributes two points at the same time: the value just
    /// before the measurement, then the collapsed value tagged with the outcome.
    pub fn measured_trace<R: Rng + ?Sized>(
        &self,
        dt: f64,
        rng: &mut R,
    ) -> Result<(Vec<TracePoint>, OutcomeSequence)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidSchedule("trace step must be positive"));
        }
        let n = self.spec.n_sites();
        let mut state = PureState::ferromagnetic(n);
        let mut points = Vec::new();
        let mut outcomes = Vec::new();
        let mut start = 0.0;
        points.push(TracePoint::of(&state, 0.0, None)?);
        for &tau in self.schedule.taus() {
            let steps = Float::ceil(tau / dt) as usize;
            for s in 1..=steps {
                let t = Float::min(s as f64 * dt, tau);
                let at = evolve(&state, &self.decomposition, t)?;
                points.push(TracePoint::of(&at, start + t, None)?);
            }
            let evolved = evolve(&state, &self.decomposition, tau)?;
            let p_up = outcome_probability(&evolved, Outcome::Up);
            let outcome = Outcome::from_bit(rng.random::<f64>() < p_up);
            state = collapse(&evolved, outcome)?;
            start += tau;
            points.push(TracePoint::of(&state, start, Some(outcome))?);
            outcomes.push(outcome);
        }
        Ok((points, OutcomeSequence(outcomes)))
    }
}

/// Magnetization of the first and last sites at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub time: f64,
    pub first: f64,
    pub last: f64,
    /// Set on the point recorded right after a collapse.
    pub event: Option<Outcome>,
}

impl TracePoint {
    fn of(state: &PureState, time: f64, event: Option<Outcome>) -> Result<Self> {
        Ok(Self {
            time,
            first: magnetization(state, 1)?,
            last: magnetization(state, state.n_sites())?,
            event,
        })
    }
}

/// Magnetization of sites 1 and `N` under free evolution from the all-down state.
pub fn free_trace(spec: &ChainSpec, times: &[f64]) -> Result<Vec<TracePoint>> {
    let decomposition = diagonalize(&build_hamiltonian(spec))?;
    let psi0 = PureState::ferromagnetic(spec.n_sites());
    times
        .iter()
        .map(|&t| TracePoint::of(&evolve(&psi0, &decomposition, t)?, t, None))
        .collect()
}

pub fn run_sequence<R: Rng + ?Sized>(
    spec: &ChainSpec,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<OutcomeSequence> {
    Probe::new(*spec, schedule.clone())?.run(rng)
}

pub fn sequence_probability(
    field: f64,
    template: &ChainTemplate,
    schedule: &Schedule,
    seq: &OutcomeSequence,
) -> Result<f64> {
    Probe::new(template.with_field(field), schedule.clone())?.sequence_probability(seq)
}

/// Exact probabilities of every sequence; see [`Probe::distribution`].
pub fn sequence_distribution(spec: &ChainSpec, schedule: &Schedule) -> Result<Vec<f64>> {
    Ok(Probe::new(*spec, schedule.clone())?.distribution())
}

/// `samples` independent runs of the protocol, each from a fresh probe.
pub fn generate_dataset<R: Rng + ?Sized>(
    spec: &ChainSpec,
    schedule: &Schedule,
    samples: u64,
    rng: &mut R,
) -> Result<Dataset> {
    if samples == 0 {
        return Err(Error::EmptyDataset);
    }
    let probe = Probe::new(*spec, schedule.clone())?;
    let mut counts = BTreeMap::new();
    for _ in 0..samples {
        *counts.entry(probe.run(rng)?).or_insert(0) += 1;
    }
    Dataset::new(spec.template(), schedule.clone(), counts)
}

/// Draws a dataset directly from an exact sequence distribution.
///
/// Equal in law to [`generate_dataset`] when `distribution` comes from
/// [`Probe::distribution`] for the same chain and schedule, but costs
/// `O(2^n_seq)` instead of `O(samples)` evolutions.
pub fn sample_dataset<R: Rng + ?Sized>(
    template: ChainTemplate,
    schedule: &Schedule,
    distribution: &[f64],
    samples: u64,
    rng: &mut R,
) -> Result<Dataset> {
    if samples == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = schedule.n_seq();
    if distribution.len() != 1 << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: distribution.len(),
        });
    }
    let total: f64 = distribution.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE || distribution.iter().any(|p| *p < 0.0) {
        return Err(Error::InvalidSchedule("sequence distribution is not normalized"));
    }
    let mut dense = vec![0u64; distribution.len()];
    let mut remaining = samples;
    let mut mass = total;
    let last = distribution.iter().rposition(|p| *p > 0.0).unwrap_or(0);
    for (j, &p) in distribution.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if j == last {
            dense[j] = remaining;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        // q is in [0, 1] so construction cannot fail.
        let k = Binomial::new(remaining, q)
            .map(|b| b.sample(rng))
            .unwrap_or(0);
        dense[j] = k;
        remaining -= k;
        mass -= p;
    }
    Dataset::from_dense(template, schedule.clone(), &dense)
}
