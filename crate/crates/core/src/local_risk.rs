//! Local risk estimation: a Nadaraya-Watson average of per-point training
//! losses under a Gaussian kernel, with the bandwidth picked from a grid by
//! leave-one-out cross-validation.

use std::fmt;
use std::str::FromStr;

use crate::classifier::{squared_distance, zero_one_loss, ClassifierModel};
use crate::dataset::{Dataset, IndexPartition};
use crate::error::{Error, Result};

/// A radial kernel evaluated on a squared distance and a bandwidth.
pub trait Kernel {
    fn weight(&self, squared_distance: f64, bandwidth: f64) -> f64;
}

impl<F> Kernel for F
where
    F: Fn(f64, f64) -> f64,
{
    fn weight(&self, squared_distance: f64, bandwidth: f64) -> f64 {
        self(squared_distance, bandwidth)
    }
}

/// `exp(-||x - x'||^2 / h)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianKernel;

impl Kernel for GaussianKernel {
    #[inline]
    fn weight(&self, squared_distance: f64, bandwidth: f64) -> f64 {
        (-squared_distance / bandwidth).exp()
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}

pub fn gaussian_kernel(x: &[f64], x2: &[f64], h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x2.len(),
        });
    }
    Ok(GaussianKernel.weight(squared_distance(x, x2), h))
}

/// Kernel-weighted mean of `losses`. Falls back to the plain mean when every
/// weight underflows to zero. The result is clamped to the loss range so
/// rounding cannot push it outside the convex hull.
fn weighted_mean<K: Kernel>(kernel: &K, pairs: impl Iterator<Item = (f64, f64)>, h: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut plain = 0.0;
    let mut count = 0usize;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (sq, loss) in pairs {
        let w = kernel.weight(sq, h);
        num += w * loss;
        den += w;
        plain += loss;
        count += 1;
        lo = lo.min(loss);
        hi = hi.max(loss);
    }
    let estimate = if den > 0.0 {
        num / den
    } else {
        plain / count as f64
    };
    estimate.clamp(lo, hi)
}

/// Nadaraya-Watson estimate of the local risk at `x` from the losses observed
/// at the `labeled` rows of `data` (`losses[k]` belongs to `labeled[k]`).
pub fn nw_estimate(
    x: &[f64],
    data: &Dataset,
    labeled: &[usize],
    losses: &[f64],
    h: f64,
) -> Result<f64> {
    nw_estimate_with(&GaussianKernel, x, data, labeled, losses, h)
}

pub fn nw_estimate_with<K: Kernel>(
    kernel: &K,
    x: &[f64],
    data: &Dataset,
    labeled: &[usize],
    losses: &[f64],
    h: f64,
) -> Result<f64> {
    check_bandwidth(h)?;
    if labeled.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    if labeled.len() != losses.len() {
        return Err(Error::InvalidDataset(format!(
            "{} labeled points but {} losses",
            labeled.len(),
            losses.len()
        )));
    }
    if x.len() != data.n_features() {
        return Err(Error::DimensionMismatch {
            expected: data.n_features(),
            got: x.len(),
        });
    }
    let pairs = labeled
        .iter()
        .zip(losses)
        .map(|(&i, &loss)| (squared_distance(x, data.row(i)), loss));
    Ok(weighted_mean(kernel, pairs, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    /// `l(Y_i, g(X_i))` with `g` fitted on all of L.
    #[default]
    Resubstitution,
    /// `l(Y_i, g_{-i}(X_i))`, where `g_{-i}` drops point i from its
    /// neighbor pool. k-NN only.
    LeaveOneOut,
}

impl LossMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LossMode::Resubstitution => "resubstitution",
            LossMode::LeaveOneOut => "leave_one_out",
        }
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "resubstitution" => Ok(LossMode::Resubstitution),
            "leave_one_out" => Ok(LossMode::LeaveOneOut),
            other => Err(format!(
                "unknown loss mode `{other}` (expected resubstitution or leave_one_out)"
            )),
        }
    }
}

/// Per-point training losses of `model` over `labeled`, in the order given.
pub fn loss_vector(
    model: &ClassifierModel,
    data: &Dataset,
    labeled: &[usize],
    mode: LossMode,
) -> Result<Vec<u8>> {
    labeled
        .iter()
        .map(|&i| {
            let yhat = match mode {
                LossMode::Resubstitution => model.predict(data.row(i))?,
                LossMode::LeaveOneOut => {
                    let position = model.training_indices().binary_search(&i).map_err(|_| {
                        Error::InvalidDataset(format!(
                            "index {i} is not in the model's training set"
                        ))
                    })?;
                    model.predict_leave_one_out(position)?
                }
            };
            Ok(zero_one_loss(data.label(i), yhat))
        })
        .collect()
}

/// Ascending, strictly positive bandwidth candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthGrid(Vec<f64>);

impl BandwidthGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidGrid(format!(
                "{v} is not a positive bandwidth"
            )));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "values must be strictly increasing".into(),
            ));
        }
        Ok(Self(values))
    }

    /// `size` log-spaced values from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidGrid("grid size must be at least 1".into()));
        }
        if size == 1 {
            return Self::new(vec![lo]);
        }
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < lo < hi, got lo={lo}, hi={hi}"
            )));
        }
        let ratio = (hi / lo).ln();
        let mut values: Vec<f64> = (0..size)
            .map(|i| lo * (ratio * i as f64 / (size - 1) as f64).exp())
            .collect();
        values[0] = lo;
        values[size - 1] = hi;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn contains(&self, h: f64) -> bool {
        self.0.contains(&h)
    }
}

/// Data-scaled grid: `size` log-spaced multiples of the median pairwise
/// squared distance of L, from `min_factor` to `max_factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub min_factor: f64,
    pub max_factor: f64,
    pub size: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            min_factor: 1e-2,
            max_factor: 1e2,
            size: 16,
        }
    }
}

impl GridSpec {
    pub fn resolve(&self, scale: f64) -> Result<BandwidthGrid> {
        BandwidthGrid::log_spaced(self.min_factor * scale, self.max_factor * scale, self.size)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskConfig {
    pub grid: GridSpec,
    pub loss_mode: LossMode,
}

/// Symmetric table of squared distances between the points of L.
struct PairTable {
    n: usize,
    sq: Vec<f64>,
}

impl PairTable {
    fn new(data: &Dataset, labeled: &[usize]) -> Self {
        let n = labeled.len();
        let mut sq = vec![0.0; n * n];
        for a in 0..n {
            for b in a + 1..n {
                let v = squared_distance(data.row(labeled[a]), data.row(labeled[b]));
                sq[a * n + b] = v;
                sq[b * n + a] = v;
            }
        }
        Self { n, sq }
    }

    fn row(&self, a: usize) -> &[f64] {
        &self.sq[a * self.n..(a + 1) * self.n]
    }

    /// Median squared distance over distinct pairs; falls back to the mean
    /// when the median is zero, and to 1 when every pair coincides.
    fn scale(&self) -> f64 {
        let mut pairs: Vec<f64> = (0..self.n)
            .flat_map(|a| (a + 1..self.n).map(move |b| (a, b)))
            .map(|(a, b)| self.sq[a * self.n + b])
            .collect();
        if pairs.is_empty() {
            return 1.0;
        }
        let mean = pairs.iter().sum::<f64>() / pairs.len() as f64;
        let m = pairs.len();
        pairs.sort_by(f64::total_cmp);
        let median = if m % 2 == 1 {
            pairs[m / 2]
        } else {
            0.5 * (pairs[m / 2 - 1] + pairs[m / 2])
        };
        if median > 0.0 {
            median
        } else if mean > 0.0 {
            mean
        } else {
            1.0
        }
    }

    /// `E(h)` for every grid value, held-out estimates using `L \ {j}`.
    fn loocv_errors<K: Kernel>(
        &self,
        kernel: &K,
        losses: &[f64],
        grid: &BandwidthGrid,
    ) -> Vec<f64> {
        grid.values()
            .iter()
            .map(|&h| {
                let total: f64 = (0..self.n)
                    .map(|j| {
                        let pairs = self
                            .row(j)
                            .iter()
                            .zip(losses)
                            .enumerate()
                            .filter(|&(k, _)| k != j)
                            .map(|(_, (&sq, &loss))| (sq, loss));
                        let held_out = weighted_mean(kernel, pairs, h);
                        (losses[j] - held_out).powi(2)
                    })
                    .sum();
                total / self.n as f64
            })
            .collect()
    }
}

fn argmin_first(errors: &[f64]) -> usize {
    let mut best = 0;
    for (i, &e) in errors.iter().enumerate().skip(1) {
        if e < errors[best] {
            best = i;
        }
    }
    best
}

/// Cross-validation error `E(h)` for each grid value.
pub fn loocv_errors(
    data: &Dataset,
    labeled: &[usize],
    losses: &[f64],
    grid: &BandwidthGrid,
) -> Result<Vec<f64>> {
    if labeled.len() < 2 {
        return Err(Error::TooFewLabeled {
            needed: 2,
            have: labeled.len(),
        });
    }
    if labeled.len() != losses.len() {
        return Err(Error::InvalidDataset(format!(
            "{} labeled points but {} losses",
            labeled.len(),
            losses.len()
        )));
    }
    Ok(PairTable::new(data, labeled).loocv_errors(&GaussianKernel, losses, grid))
}

/// The grid value minimizing `E(h)`; ties go to the smallest bandwidth.
pub fn loocv_bandwidth(
    data: &Dataset,
    labeled: &[usize],
    losses: &[f64],
    grid: &BandwidthGrid,
) -> Result<f64> {
    let errors = loocv_errors(data, labeled, losses, grid)?;
    Ok(grid.values()[argmin_first(&errors)])
}

/// Estimated local risk at every unlabeled point.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskField {
    pool: Vec<usize>,
    values: Vec<f64>,
    bandwidth: f64,
    labeled: Vec<usize>,
    losses: Vec<u8>,
}

impl RiskField {
    /// A field with explicit values (`values[k]` belongs to `pool[k]`).
    pub fn new(pool: Vec<usize>, values: Vec<f64>, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        if pool.len() != values.len() {
            return Err(Error::InvalidDataset(format!(
                "{} pool indices but {} risk values",
                pool.len(),
                values.len()
            )));
        }
        if let Some(position) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidRisk {
                position,
                value: values[position],
            });
        }
        Ok(Self {
            pool,
            values,
            bandwidth,
            labeled: Vec::new(),
            losses: Vec::new(),
        })
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.pool
            .iter()
            .position(|&i| i == index)
            .map(|k| self.values[k])
    }

    /// `(index in L, loss)` pairs used to build the field.
    pub fn loss_vector(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.labeled
            .iter()
            .copied()
            .zip(self.losses.iter().copied())
    }

    /// Risk values aligned with `pool`, in the order of `pool`.
    pub fn values_for(&self, pool: &[usize]) -> Result<Vec<f64>> {
        if pool == self.pool.as_slice() {
            return Ok(self.values.clone());
        }
        let lookup: std::collections::HashMap<usize, f64> = self
            .pool
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .collect();
        pool.iter()
            .map(|i| lookup.get(i).copied().ok_or(Error::RiskFieldMismatch(*i)))
            .collect()
    }
}

/// Risk field over U using an explicit bandwidth grid.
pub fn risk_field(
    model: &ClassifierModel,
    partition: &IndexPartition,
    data: &Dataset,
    grid: &BandwidthGrid,
    mode: LossMode,
) -> Result<RiskField> {
    build_field(model, partition, data, |_| Ok(grid.clone()), mode)
}

/// Risk field over U with the grid scaled to the current labeled set.
pub fn estimate_risk_field(
    model: &ClassifierModel,
    partition: &IndexPartition,
    data: &Dataset,
    config: &RiskConfig,
) -> Result<RiskField> {
    build_field(
        model,
        partition,
        data,
        |table| config.grid.resolve(table.scale()),
        config.loss_mode,
    )
}

fn build_field(
    model: &ClassifierModel,
    partition: &IndexPartition,
    data: &Dataset,
    grid_for: impl FnOnce(&PairTable) -> Result<BandwidthGrid>,
    mode: LossMode,
) -> Result<RiskField> {
    let labeled = partition.labeled();
    if labeled.len() < 2 {
        return Err(Error::TooFewLabeled {
            needed: 2,
            have: labeled.len(),
        });
    }
    let losses = loss_vector(model, data, labeled, mode)?;
    let real_losses: Vec<f64> = losses.iter().map(|&l| f64::from(l)).collect();

    let table = PairTable::new(data, labeled);
    let grid = grid_for(&table)?;
    let errors = table.loocv_errors(&GaussianKernel, &real_losses, &grid);
    let bandwidth = grid.values()[argmin_first(&errors)];

    let pool = partition.unlabeled().to_vec();
    let values = pool
        .iter()
        .map(|&u| {
            let x = data.row(u);
            let pairs = labeled
                .iter()
                .zip(&real_losses)
                .map(|(&i, &loss)| (squared_distance(x, data.row(i)), loss));
            weighted_mean(&GaussianKernel, pairs, bandwidth)
        })
        .collect();

    Ok(RiskField {
        pool,
        values,
        bandwidth,
        labeled: labeled.to_vec(),
        losses,
    })
}
