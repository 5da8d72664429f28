//! Query strategies: passive (uniform), uncertainty sampling, local-risk
//! batch argmax, and conditional Poisson sampling with inclusion
//! probabilities proportional to the estimated local risk.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::classifier::ClassifierModel;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::local_risk::RiskField;

/// Bernoulli passes attempted before falling back to weighted sampling
/// without replacement.
pub const MAX_REJECTION_PASSES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Passive,
    Uncertainty,
    LocalRiskBatch,
    Survey,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Passive,
        Strategy::Uncertainty,
        Strategy::LocalRiskBatch,
        Strategy::Survey,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Passive => "passive",
            Strategy::Uncertainty => "uncertainty",
            Strategy::LocalRiskBatch => "local_risk_batch",
            Strategy::Survey => "survey",
        }
    }

    /// Whether the strategy consumes a [`RiskField`].
    pub fn needs_risk_field(self) -> bool {
        matches!(self, Strategy::LocalRiskBatch | Strategy::Survey)
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Strategy::as_str).join(", ")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown strategy `{s}` (valid strategies: {})",
                    Strategy::valid_names()
                )
            })
    }
}

fn check_batch(k: usize, pool: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::EmptyBatch);
    }
    if k > pool {
        return Err(Error::BatchTooLarge { batch: k, pool });
    }
    Ok(())
}

/// Uniform random K-subset of the pool, without replacement.
pub fn select_passive<R: Rng + ?Sized>(
    pool: &[usize],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_batch(k, pool.len())?;
    Ok(index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|pos| pool[pos])
        .collect())
}

/// The K pool points whose posterior is closest to 1/2. Equal margins are
/// ordered uniformly at random.
pub fn select_uncertainty<R: Rng + ?Sized>(
    pool: &[usize],
    k: usize,
    model: &ClassifierModel,
    data: &Dataset,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_batch(k, pool.len())?;
    let mut scored = pool
        .iter()
        .map(|&i| Ok((i, (model.posterior(data.row(i))? - 0.5).abs())))
        .collect::<Result<Vec<_>>>()?;
    scored.shuffle(rng);
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(scored.into_iter().take(k).map(|(i, _)| i).collect())
}

/// Greedy batch: K times, take a uniformly random element of the argmax of
/// `risk + lambda * variance` over what is left of the pool.
///
/// `variance` maps a dataset index to its variance term and is required
/// whenever `lambda > 0`.
pub fn select_local_risk_batch<R: Rng + ?Sized>(
    pool: &[usize],
    k: usize,
    field: &RiskField,
    lambda: f64,
    variance: Option<&dyn Fn(usize) -> f64>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_batch(k, pool.len())?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidLambda(lambda));
    }
    let risks = field.values_for(pool)?;
    let mut remaining: Vec<(usize, f64)> = match (lambda > 0.0, variance) {
        (false, _) => pool.iter().copied().zip(risks).collect(),
        (true, Some(v)) => pool
            .iter()
            .zip(risks)
            .map(|(&i, r)| (i, r + lambda * v(i)))
            .collect(),
        (true, None) => return Err(Error::MissingVarianceHook(lambda)),
    };

    let mut chosen = Vec::with_capacity(k);
    let mut ties = Vec::new();
    for _ in 0..k {
        let best = remaining
            .iter()
            .map(|&(_, s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        ties.clear();
        ties.extend(
            remaining
                .iter()
                .enumerate()
                .filter(|(_, &(_, s))| s == best)
                .map(|(pos, _)| pos),
        );
        let pick = ties[rng.gen_range(0..ties.len())];
        chosen.push(remaining.swap_remove(pick).0);
    }
    Ok(chosen)
}

/// Capped inclusion probabilities `pi_i = K' R_i / sum_j R_j`, where items
/// whose value would exceed 1 are included outright and `K'` shrinks by
/// their count.
///
/// Positions refer to the order of the risk vector given to
/// [`inclusion_probabilities`].
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionProbabilities {
    /// `pi_i` for items still subject to the Bernoulli draw; 0 for
    /// auto-included items.
    pub probs: Vec<f64>,
    /// Positions included with certainty.
    pub auto_included: Vec<usize>,
    /// Slots that must be filled uniformly from the residual pool because
    /// its total risk is zero. The entries of `probs` are then all 0.
    pub uniform_slots: usize,
}

impl InclusionProbabilities {
    /// Number of slots filled by the random part of the design.
    pub fn residual_size(&self, k: usize) -> usize {
        k - self.auto_included.len()
    }

    pub fn is_auto_included(&self, position: usize) -> bool {
        self.auto_included.contains(&position)
    }

    /// Marginal probability that `position` ends up in the batch under the
    /// whole design (certain items, then the Bernoulli or uniform part).
    pub fn marginal(&self, position: usize) -> f64 {
        if self.is_auto_included(position) {
            1.0
        } else if self.uniform_slots > 0 {
            let residual = self.probs.len() - self.auto_included.len();
            self.uniform_slots as f64 / residual as f64
        } else {
            self.probs[position]
        }
    }

    /// `sum(probs) + |auto_included| + uniform_slots`, which equals K.
    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + (self.auto_included.len() + self.uniform_slots) as f64
    }
}

pub fn inclusion_probabilities(risks: &[f64], k: usize) -> Result<InclusionProbabilities> {
    check_batch(k, risks.len())?;
    if let Some(position) = risks.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::InvalidRisk {
            position,
            value: risks[position],
        });
    }

    let mut probs = vec![0.0; risks.len()];
    let mut auto_included = Vec::new();
    let mut active: Vec<usize> = (0..risks.len()).collect();
    let mut slots = k;
    let mut uniform_slots = 0;

    loop {
        let total: f64 = active.iter().map(|&i| risks[i]).sum();
        if total == 0.0 {
            uniform_slots = slots;
            break;
        }
        let scale = slots as f64 / total;
        let over: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| scale * risks[i] > 1.0)
            .collect();
        if over.is_empty() {
            for &i in &active {
                probs[i] = (scale * risks[i]).min(1.0);
            }
            break;
        }
        // fewer than `slots` items can exceed 1 since the pi sum to `slots`
        slots -= over.len();
        active.retain(|i| !over.contains(i));
        auto_included.extend(over);
    }
    auto_included.sort_unstable();

    Ok(InclusionProbabilities {
        probs,
        auto_included,
        uniform_slots,
    })
}

/// Conditional Poisson draw: independent Bernoulli(`probs[i]`) passes,
/// redrawn until exactly `size` items come up. Returns positions.
pub fn conditional_poisson<R: Rng + ?Sized>(
    probs: &[f64],
    size: usize,
    max_passes: usize,
    rng: &mut R,
) -> Vec<usize> {
    if size == 0 {
        return Vec::new();
    }
    let positive: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    if positive.len() <= size {
        return positive;
    }

    let mut drawn = Vec::with_capacity(size);
    for _ in 0..max_passes {
        drawn.clear();
        for (i, &p) in probs.iter().enumerate() {
            if rng.gen::<f64>() < p {
                drawn.push(i);
            }
        }
        if drawn.len() == size {
            return drawn;
        }
    }

    log::warn!(
        "conditional Poisson draw of {size} from {} items did not hit the target in {max_passes} passes; \
         using weighted sampling without replacement",
        probs.len()
    );
    index::sample_weighted(rng, probs.len(), |i| probs[i], size)
        .expect("at least `size` items have positive weight")
        .into_iter()
        .collect()
}

/// Inclusion probabilities of the conditional Poisson design: Bernoulli
/// (`probs[i]`) draws conditioned on exactly `size` successes. `None` when
/// that event is impossible.
pub fn conditional_poisson_marginals(probs: &[f64], size: usize) -> Option<Vec<f64>> {
    let forced = probs.iter().filter(|&&p| p >= 1.0).count();
    let free: Vec<usize> = (0..probs.len())
        .filter(|&i| probs[i] > 0.0 && probs[i] < 1.0)
        .collect();
    if forced > size || forced + free.len() < size {
        return None;
    }
    let mut out: Vec<f64> = probs
        .iter()
        .map(|&p| if p >= 1.0 { 1.0 } else { 0.0 })
        .collect();
    let n = size - forced;
    if n == free.len() {
        for &i in &free {
            out[i] = 1.0;
        }
    } else if n > 0 {
        let odds: Vec<f64> = free.iter().map(|&i| probs[i] / (1.0 - probs[i])).collect();
        for (&i, m) in free.iter().zip(odds_marginals(&odds, n)) {
            out[i] = m;
        }
    }
    Some(out)
}

/// Elementary symmetric polynomials of `odds` up to degree `n`, one row per
/// prefix, each row scaled to max 1 with its log scale alongside.
fn prefix_esp<'a>(odds: impl Iterator<Item = &'a f64>, n: usize) -> Vec<(Vec<f64>, f64)> {
    let mut row = vec![0.0; n + 1];
    row[0] = 1.0;
    let mut rows = vec![(row.clone(), 0.0)];
    let mut scale = 0.0;
    for &w in odds {
        scale += esp_push(&mut row, w);
        rows.push((row.clone(), scale));
    }
    rows
}

/// Last row of [`prefix_esp`] only.
fn esp<'a>(odds: impl Iterator<Item = &'a f64>, n: usize) -> (Vec<f64>, f64) {
    let mut row = vec![0.0; n + 1];
    row[0] = 1.0;
    let scale = odds.map(|&w| esp_push(&mut row, w)).sum();
    (row, scale)
}

/// Multiplies the polynomial `row` by `(1 + w t)`, rescales it to max 1 and
/// returns the log of the factor removed.
fn esp_push(row: &mut [f64], w: f64) -> f64 {
    for k in (1..row.len()).rev() {
        row[k] += w * row[k - 1];
    }
    let top = row.iter().copied().fold(0.0, f64::max);
    row.iter_mut().for_each(|v| *v /= top);
    top.ln()
}

/// Conditional Poisson inclusion probabilities for strictly positive,
/// finite odds and `0 < n < odds.len()`.
fn odds_marginals(odds: &[f64], n: usize) -> Vec<f64> {
    let m = odds.len();
    let pre = prefix_esp(odds.iter(), n);
    let mut suf = prefix_esp(odds.iter().rev(), n);
    suf.reverse();
    let (full, full_scale) = &pre[m];
    let log_total = full[n].ln() + full_scale;
    (0..m)
        .map(|i| {
            let (a, sa) = &pre[i];
            let (b, sb) = &suf[i + 1];
            let without: f64 = (0..n).map(|j| a[j] * b[n - 1 - j]).sum();
            if without == 0.0 {
                return 0.0;
            }
            (odds[i].ln() + sa + sb + without.ln() - log_total)
                .exp()
                .min(1.0)
        })
        .collect()
}

/// Free items up to which Newton steps use the exact Jacobian.
const EXACT_JACOBIAN_MAX: usize = 16;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Largest deviation from `goal` and the marginals at `log_odds`.
fn calibration_error(log_odds: &[f64], goal: &[f64], n: usize) -> (f64, Vec<f64>) {
    let odds: Vec<f64> = log_odds.iter().map(|l| l.exp()).collect();
    let marg = odds_marginals(&odds, n);
    let worst = marg
        .iter()
        .zip(goal)
        .map(|(m, t)| (m - t).abs())
        .fold(0.0, f64::max);
    (worst, marg)
}

/// Newton direction on the log-odds. The Jacobian is
/// `d m_i / d l_j = pi_ij - m_i m_j` (`m_i (1 - m_i)` on the diagonal); it
/// is singular along the all-ones direction, so the last coordinate is held
/// fixed.
fn newton_direction(log_odds: &[f64], marg: &[f64], goal: &[f64], n: usize) -> Option<Vec<f64>> {
    let f = log_odds.len();
    if f < 2 {
        return None;
    }
    let odds: Vec<f64> = log_odds.iter().map(|l| l.exp()).collect();
    let (full, full_scale) = esp(odds.iter(), n);
    let log_total = full[n].ln() + full_scale;
    let dim = f - 1;
    let mut jac = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        jac[(i, i)] = marg[i] * (1.0 - marg[i]);
        for j in i + 1..dim {
            let joint = if n < 2 {
                0.0
            } else {
                let rest = odds
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, w)| w);
                let (row, scale) = esp(rest, n - 2);
                if row[n - 2] == 0.0 {
                    0.0
                } else {
                    (log_odds[i] + log_odds[j] + row[n - 2].ln() + scale - log_total).exp()
                }
            };
            let v = joint - marg[i] * marg[j];
            jac[(i, j)] = v;
            jac[(j, i)] = v;
        }
    }
    let rhs = nalgebra::DVector::from_iterator(dim, (0..dim).map(|i| goal[i] - marg[i]));
    let step = jac.lu().solve(&rhs)?;
    let mut dir: Vec<f64> = step.iter().copied().collect();
    dir.push(0.0);
    dir.iter().all(|d| d.is_finite()).then_some(dir)
}

/// Log-odds for which the conditional Poisson design of size `n` has
/// marginals `goal` (each strictly inside (0, 1), summing to `n`).
fn calibrate_log_odds(goal: &[f64], n: usize) -> Vec<f64> {
    let mut log_odds: Vec<f64> = goal.iter().map(|&t| logit(t)).collect();
    let (mut err, mut marg) = calibration_error(&log_odds, goal, n);
    for _ in 0..200 {
        if err < 1e-12 {
            break;
        }
        let exact = if goal.len() <= EXACT_JACOBIAN_MAX {
            newton_direction(&log_odds, &marg, goal, n)
        } else {
            None
        };
        // without the exact Jacobian: its diagonal, i.e. a logit correction
        let dir = exact.unwrap_or_else(|| {
            goal.iter()
                .zip(&marg)
                .map(|(&t, &m)| logit(t) - logit(m.clamp(1e-300, 1.0 - 1e-16)))
                .collect()
        });
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-3 {
            let cand: Vec<f64> = log_odds
                .iter()
                .zip(&dir)
                .map(|(l, d)| l + step * d)
                .collect();
            let (e, m) = calibration_error(&cand, goal, n);
            if e < err {
                (log_odds, err, marg) = (cand, e, m);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // multiplicative odds correction, slow but steady
            for (l, (&t, &m)) in log_odds.iter_mut().zip(goal.iter().zip(&marg)) {
                *l += t.ln() - m.max(1e-300).ln();
            }
            (err, marg) = calibration_error(&log_odds, goal, n);
        }
        let centre = log_odds.iter().sum::<f64>() / log_odds.len() as f64;
        log_odds.iter_mut().for_each(|l| *l -= centre);
    }
    log_odds
}

/// Bernoulli parameters whose conditional Poisson design of `size` items has
/// inclusion probabilities `targets` (which should sum to `size`).
///
/// Plain Bernoulli(`targets`) draws conditioned on the batch size do not
/// keep the targets as marginals; the odds are solved for by Newton's
/// method, then all are rescaled so the expected pass size is
/// `size`, which leaves the conditional design unchanged.
pub fn working_probabilities(targets: &[f64], size: usize) -> Vec<f64> {
    let mut out: Vec<f64> = targets.iter().map(|&t| t.clamp(0.0, 1.0)).collect();
    let free: Vec<usize> = (0..out.len())
        .filter(|&i| out[i] > 0.0 && out[i] < 1.0)
        .collect();
    let forced = out.iter().filter(|&&p| p >= 1.0).count();
    let Some(n) = size.checked_sub(forced) else {
        return out;
    };
    if n == 0 || n >= free.len() {
        return out;
    }

    let goal: Vec<f64> = free.iter().map(|&i| out[i]).collect();
    let log_odds = calibrate_log_odds(&goal, n);

    // common shift c with sum sigmoid(l + c) = n
    let expected = |c: f64| -> f64 {
        log_odds
            .iter()
            .map(|&l| 1.0 / (1.0 + (-(l + c)).exp()))
            .sum()
    };
    let (mut lo, mut hi) = (-800.0, 800.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < n as f64 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    for (j, &i) in free.iter().enumerate() {
        out[i] = 1.0 / (1.0 + (-(log_odds[j] + c)).exp());
    }
    out
}

/// Survey-scheme batch: certain items first, then a conditional Poisson
/// draw over the rest whose inclusion probabilities are the `pi_i` (uniform
/// when the rest carries no risk). Always returns exactly K distinct pool
/// indices.
pub fn select_survey<R: Rng + ?Sized>(
    pool: &[usize],
    k: usize,
    field: &RiskField,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_batch(k, pool.len())?;
    let risks = field.values_for(pool)?;
    select_survey_from_risks(pool, &risks, k, rng)
}

/// [`select_survey`] over an explicit risk vector aligned with `pool`.
pub fn select_survey_from_risks<R: Rng + ?Sized>(
    pool: &[usize],
    risks: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if risks.len() != pool.len() {
        return Err(Error::InvalidDataset(format!(
            "{} pool indices but {} risk values",
            pool.len(),
            risks.len()
        )));
    }
    let design = inclusion_probabilities(risks, k)?;
    let mut chosen: Vec<usize> = design.auto_included.iter().map(|&p| pool[p]).collect();

    let residual: Vec<usize> = (0..pool.len())
        .filter(|p| !design.is_auto_included(*p))
        .collect();
    if design.uniform_slots > 0 {
        let residual_pool: Vec<usize> = residual.iter().map(|&p| pool[p]).collect();
        chosen.extend(select_passive(&residual_pool, design.uniform_slots, rng)?);
    } else {
        let targets: Vec<f64> = residual.iter().map(|&p| design.probs[p]).collect();
        let size = design.residual_size(k);
        let probs = working_probabilities(&targets, size);
        chosen.extend(
            conditional_poisson(&probs, size, MAX_REJECTION_PASSES, rng)
                .into_iter()
                .map(|r| pool[residual[r]]),
        );
    }
    debug_assert_eq!(chosen.len(), k);
    Ok(chosen)
}
