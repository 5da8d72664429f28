//! The simulated active-learning loop and its aggregation into learning
//! curves over seeded, paired repetitions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::{empirical_risk, fit, ClassifierModel, ClassifierSpec};
use crate::dataset::{make_partition, test_size, Dataset, IndexPartition};
use crate::error::{Error, Result};
use crate::local_risk::{estimate_risk_field, RiskConfig, RiskField};
use crate::selection::{
    select_local_risk_batch, select_passive, select_survey, select_uncertainty, Strategy,
};

/// Supplies the variance term added to the local risk by the batch-argmax
/// strategy when `lambda > 0`. No estimator ships with the crate.
pub trait VarianceEstimator: Send + Sync {
    fn variance(
        &self,
        data: &Dataset,
        partition: &IndexPartition,
        field: &RiskField,
        index: usize,
    ) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub classifier: ClassifierSpec,
    pub strategies: Vec<Strategy>,
    pub warmup_size: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub repetitions: usize,
    pub base_seed: u64,
    pub test_fraction: f64,
    pub risk: RiskConfig,
    pub lambda: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            classifier: ClassifierSpec::default(),
            strategies: Strategy::ALL.to_vec(),
            warmup_size: 50,
            batch_size: 20,
            rounds: 10,
            repetitions: 100,
            base_seed: 0,
            test_fraction: 0.3,
            risk: RiskConfig::default(),
            lambda: 0.0,
        }
    }
}

impl ExperimentConfig {
    /// Checks the protocol parameters against a dataset of `n` rows.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.repetitions == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.strategies.is_empty() {
            return bad("strategy list is empty".into());
        }
        let mut seen = self.strategies.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return bad("strategy list contains duplicates".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidTestFraction(self.test_fraction));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidLambda(self.lambda));
        }
        let available = n - test_size(n, self.test_fraction);
        if self.warmup_size + 1 > available {
            return Err(Error::WarmupTooLarge {
                warmup: self.warmup_size,
                available,
            });
        }
        let pool = available - self.warmup_size;
        if self.rounds * self.batch_size > pool {
            return bad(format!(
                "rounds * batch_size = {} exceeds the unlabeled pool of {pool}",
                self.rounds * self.batch_size
            ));
        }
        Ok(())
    }

    /// Seed of the `rep`-th repetition (1-based).
    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.base_seed.wrapping_add(rep as u64)
    }
}

/// Seeds for one trial: the partition stream is shared across strategies
/// of a repetition, the selection stream is strategy-specific.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub partition: u64,
    pub selection: u64,
    pub stream: u64,
}

impl TrialSeeds {
    pub fn for_repetition(rep_seed: u64, strategy: Strategy) -> Self {
        let stream = 1 + Strategy::ALL
            .iter()
            .position(|&s| s == strategy)
            .expect("strategy is listed") as u64;
        Self {
            partition: rep_seed,
            selection: rep_seed,
            stream,
        }
    }

    fn selection_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.selection);
        rng.set_stream(self.stream);
        rng
    }
}

/// Labels revealed on request; the ground truth stored in the dataset plays
/// the expert.
pub struct SimulatedOracle<'a> {
    data: &'a Dataset,
}

impl<'a> SimulatedOracle<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        Self { data }
    }

    pub fn reveal(&self, index: usize) -> u8 {
        self.data.label(index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPoint {
    pub round: usize,
    pub labels_used: usize,
    pub test_risk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub queried: Vec<usize>,
    pub revealed: Vec<u8>,
    /// Bandwidth chosen by cross-validation, for risk-based strategies.
    pub bandwidth: Option<f64>,
    /// True when the strategy fell back to passive selection because fewer
    /// than two labels were available.
    pub cold_start: bool,
    /// Partition after the batch was labeled.
    pub partition: IndexPartition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub strategy: Strategy,
    pub rep: usize,
    pub points: Vec<TrialPoint>,
    pub rounds: Vec<RoundRecord>,
    pub initial_partition: IndexPartition,
    /// The pool ran out before all rounds completed.
    pub truncated: bool,
}

/// One repetition of one strategy. `rep` is only carried into the result.
pub fn run_trial(
    data: &Dataset,
    config: &ExperimentConfig,
    strategy: Strategy,
    rep: usize,
) -> Result<TrialResult> {
    let seeds = TrialSeeds::for_repetition(config.rep_seed(rep), strategy);
    run_trial_seeded(data, config, strategy, rep, seeds, None)
}

pub fn run_trial_seeded(
    data: &Dataset,
    config: &ExperimentConfig,
    strategy: Strategy,
    rep: usize,
    seeds: TrialSeeds,
    variance: Option<&dyn VarianceEstimator>,
) -> Result<TrialResult> {
    let n = data.n_rows();
    let k = config.batch_size;
    if k == 0 {
        return Err(Error::EmptyBatch);
    }
    let oracle = SimulatedOracle::new(data);
    let initial_partition = make_partition(
        data,
        config.warmup_size,
        config.test_fraction,
        seeds.partition,
    )?;
    let mut partition = initial_partition.clone();
    let mut rng = seeds.selection_rng();
    let mut points = Vec::with_capacity(config.rounds + 1);
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut truncated = false;

    for round in 0..=config.rounds {
        let model = if partition.labeled().is_empty() {
            // no labels yet: an empty vote, which the tie rule sends to 1
            ClassifierModel::constant(config.classifier.kind, data.n_features(), 1)
        } else {
            fit(&config.classifier, data, partition.labeled())?
        };
        points.push(TrialPoint {
            round,
            labels_used: partition.labeled().len(),
            test_risk: empirical_risk(&model, data, partition.test())?,
        });
        if round == config.rounds {
            break;
        }

        let pool = partition.unlabeled();
        if pool.len() < k {
            truncated = true;
            break;
        }

        let cold_start = partition.labeled().len() < 2 && strategy != Strategy::Passive;
        let mut bandwidth = None;
        let batch = if cold_start {
            select_passive(pool, k, &mut rng)?
        } else {
            match strategy {
                Strategy::Passive => select_passive(pool, k, &mut rng)?,
                Strategy::Uncertainty => select_uncertainty(pool, k, &model, data, &mut rng)?,
                Strategy::LocalRiskBatch => {
                    let field = estimate_risk_field(&model, &partition, data, &config.risk)?;
                    bandwidth = Some(field.bandwidth());
                    let hook = variance.map(|v| {
                        let (p, f) = (&partition, &field);
                        move |i: usize| v.variance(data, p, f, i)
                    });
                    select_local_risk_batch(
                        pool,
                        k,
                        &field,
                        config.lambda,
                        hook.as_ref().map(|h| h as &dyn Fn(usize) -> f64),
                        &mut rng,
                    )?
                }
                Strategy::Survey => {
                    let field = estimate_risk_field(&model, &partition, data, &config.risk)?;
                    bandwidth = Some(field.bandwidth());
                    select_survey(pool, k, &field, &mut rng)?
                }
            }
        };

        let revealed = batch.iter().map(|&i| oracle.reveal(i)).collect();
        partition = partition.advance(&batch)?;
        partition.validate(n)?;
        rounds.push(RoundRecord {
            round,
            queried: batch,
            revealed,
            bandwidth,
            cold_start,
            partition: partition.clone(),
        });
    }

    Ok(TrialResult {
        strategy,
        rep,
        points,
        rounds,
        initial_partition,
        truncated,
    })
}

/// Sample standard deviation (n - 1 denominator) over `sqrt(n)`; 0 for a
/// single value.
pub fn sem(values: &[f64]) -> Result<f64> {
    match values.len() {
        0 => Err(Error::EmptySample),
        1 => Ok(0.0),
        n => {
            let nf = n as f64;
            let mean = values.iter().sum::<f64>() / nf;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            Ok((var / nf).sqrt())
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub labels_used: usize,
    pub mean: f64,
    pub sem: f64,
    pub n_reps: usize,
}

/// Mean test risk per label count for one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub strategy: Strategy,
    pub points: Vec<CurvePoint>,
}

/// Per-repetition `risk(strategy) - risk(passive)`, averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceCurve {
    pub strategy: Strategy,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn at(&self, labels_used: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.labels_used == labels_used)
    }
}

impl DifferenceCurve {
    pub fn at(&self, labels_used: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.labels_used == labels_used)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Ordered by strategy (config order), then repetition.
    pub trials: Vec<TrialResult>,
    pub curves: Vec<LearningCurve>,
    /// Empty unless passive is among the strategies; passive itself is
    /// omitted.
    pub differences: Vec<DifferenceCurve>,
}

impl ExperimentResult {
    pub fn curve(&self, strategy: Strategy) -> Option<&LearningCurve> {
        self.curves.iter().find(|c| c.strategy == strategy)
    }

    pub fn difference(&self, strategy: Strategy) -> Option<&DifferenceCurve> {
        self.differences.iter().find(|c| c.strategy == strategy)
    }
}

/// Runs every strategy for `config.repetitions` paired repetitions on a
/// pool of `workers` threads (0 picks the rayon default). Output does not
/// depend on `workers`.
pub fn run_experiment(
    data: &Dataset,
    config: &ExperimentConfig,
    workers: usize,
) -> Result<ExperimentResult> {
    run_experiment_with(data, config, workers, None)
}

pub fn run_experiment_with(
    data: &Dataset,
    config: &ExperimentConfig,
    workers: usize,
    variance: Option<&dyn VarianceEstimator>,
) -> Result<ExperimentResult> {
    config.validate(data.n_rows())?;
    if config.lambda > 0.0 && variance.is_none() {
        return Err(Error::MissingVarianceHook(config.lambda));
    }

    let jobs: Vec<(Strategy, usize)> = config
        .strategies
        .iter()
        .flat_map(|&s| (1..=config.repetitions).map(move |rep| (s, rep)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let trials: Vec<TrialResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(strategy, rep)| {
                let seeds = TrialSeeds::for_repetition(config.rep_seed(rep), strategy);
                run_trial_seeded(data, config, strategy, rep, seeds, variance)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let curves = config
        .strategies
        .iter()
        .map(|&s| aggregate_curve(s, trials.iter().filter(|t| t.strategy == s)))
        .collect::<Result<Vec<_>>>()?;

    let mut differences = Vec::new();
    if config.strategies.contains(&Strategy::Passive) {
        let passive: Vec<&TrialResult> = trials
            .iter()
            .filter(|t| t.strategy == Strategy::Passive)
            .collect();
        for &s in config
            .strategies
            .iter()
            .filter(|&&s| s != Strategy::Passive)
        {
            let other: Vec<&TrialResult> = trials.iter().filter(|t| t.strategy == s).collect();
            differences.push(difference_curve(s, &other, &passive)?);
        }
    }

    Ok(ExperimentResult {
        trials,
        curves,
        differences,
    })
}

fn aggregate_curve<'a>(
    strategy: Strategy,
    trials: impl Iterator<Item = &'a TrialResult>,
) -> Result<LearningCurve> {
    let trials: Vec<&TrialResult> = trials.collect();
    let longest = trials.iter().map(|t| t.points.len()).max().unwrap_or(0);
    let points = (0..longest)
        .map(|r| {
            let values: Vec<f64> = trials
                .iter()
                .filter_map(|t| t.points.get(r).map(|p| p.test_risk))
                .collect();
            let labels_used = trials
                .iter()
                .find_map(|t| t.points.get(r).map(|p| p.labels_used))
                .expect("some trial reaches this round");
            Ok(CurvePoint {
                labels_used,
                mean: mean(&values),
                sem: sem(&values)?,
                n_reps: values.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LearningCurve { strategy, points })
}

/// Pairs trials by repetition number and averages the per-repetition
/// difference `risk(trials) - risk(baseline)`.
pub fn difference_curve(
    strategy: Strategy,
    trials: &[&TrialResult],
    baseline: &[&TrialResult],
) -> Result<DifferenceCurve> {
    let longest = trials.iter().map(|t| t.points.len()).max().unwrap_or(0);
    let mut points = Vec::new();
    for r in 0..longest {
        let mut diffs = Vec::new();
        let mut labels_used = None;
        for t in trials {
            let Some(p) = t.points.get(r) else { continue };
            let Some(b) = baseline
                .iter()
                .find(|b| b.rep == t.rep)
                .and_then(|b| b.points.get(r))
            else {
                continue;
            };
            labels_used = Some(p.labels_used);
            diffs.push(p.test_risk - b.test_risk);
        }
        if let Some(labels_used) = labels_used {
            points.push(CurvePoint {
                labels_used,
                mean: mean(&diffs),
                sem: sem(&diffs)?,
                n_reps: diffs.len(),
            });
        }
    }
    Ok(DifferenceCurve { strategy, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{standardize, wbc};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            warmup_size: 10,
            batch_size: 5,
            rounds: 3,
            repetitions: 3,
            ..ExperimentConfig::default()
        }
    }

    fn blobs() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|i| {
                let t = i as f64;
                let c = if i % 2 == 0 { -1.0 } else { 1.0 };
                vec![c + (t * 0.37).sin(), (t * 1.3).cos() * 0.8]
            })
            .collect();
        let labels = (0..80).map(|i| (i % 2) as u8).collect();
        Dataset::new(rows, labels, vec!["a".into(), "b".into()], "blobs").unwrap()
    }

    #[test]
    fn sem_cases() {
        assert_eq!(sem(&[0.3, 0.3, 0.3]).unwrap(), 0.0);
        assert!((sem(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sem(&[4.2]).unwrap(), 0.0);
        assert!(matches!(sem(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn zero_rounds_gives_warmup_point_only() {
        let d = blobs();
        let cfg = ExperimentConfig {
            rounds: 0,
            ..small_config()
        };
        let t = run_trial(&d, &cfg, Strategy::Survey, 1).unwrap();
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.points[0].labels_used, 10);
        assert!(t.rounds.is_empty());
    }

    #[test]
    fn trials_are_deterministic() {
        let d = blobs();
        let cfg = small_config();
        for s in Strategy::ALL {
            assert_eq!(
                run_trial(&d, &cfg, s, 2).unwrap(),
                run_trial(&d, &cfg, s, 2).unwrap()
            );
        }
    }

    #[test]
    fn pool_exhaustion_truncates() {
        let d = blobs();
        let cfg = ExperimentConfig {
            warmup_size: 40,
            batch_size: 5,
            rounds: 10,
            ..small_config()
        };
        // 80 rows, 24 test, 40 warm-up -> 16 in the pool, room for 3 batches
        let t = run_trial(&d, &cfg, Strategy::Passive, 1).unwrap();
        assert!(t.truncated);
        assert_eq!(t.points.len(), 4);
        assert!(cfg.validate(80).is_err());
    }

    #[test]
    fn cold_start_falls_back_to_passive() {
        let d = blobs();
        let cfg = ExperimentConfig {
            warmup_size: 0,
            batch_size: 1,
            rounds: 4,
            ..small_config()
        };
        let t = run_trial(&d, &cfg, Strategy::LocalRiskBatch, 1).unwrap();
        let cold: Vec<bool> = t.rounds.iter().map(|r| r.cold_start).collect();
        assert_eq!(cold, vec![true, true, false, false]);
        assert_eq!(t.points[0].labels_used, 0);
        assert!(t.rounds[2].bandwidth.is_some());
    }

    #[test]
    fn whole_pool_budget_reaches_full_data_risk() {
        let d = blobs();
        let cfg = ExperimentConfig {
            warmup_size: 6,
            batch_size: 10,
            rounds: 5,
            ..small_config()
        };
        // pool = 80 - 24 - 6 = 50 = 5 * 10
        let p = make_partition(&d, 6, cfg.test_fraction, cfg.rep_seed(1)).unwrap();
        let mut everything = p.labeled().to_vec();
        everything.extend(p.unlabeled());
        let full = fit(&cfg.classifier, &d, &everything).unwrap();
        let want = empirical_risk(&full, &d, p.test()).unwrap();
        for s in Strategy::ALL {
            let t = run_trial(&d, &cfg, s, 1).unwrap();
            assert_eq!(t.points.last().unwrap().test_risk, want, "{s}");
        }
    }

    #[test]
    fn single_rep_has_zero_sem_and_self_difference_is_zero() {
        let d = blobs();
        let cfg = ExperimentConfig {
            repetitions: 1,
            strategies: vec![Strategy::Passive, Strategy::Survey],
            ..small_config()
        };
        let res = run_experiment(&d, &cfg, 2).unwrap();
        for c in &res.curves {
            assert!(c.points.iter().all(|p| p.sem == 0.0 && p.n_reps == 1));
        }
        let passives: Vec<&TrialResult> = res
            .trials
            .iter()
            .filter(|t| t.strategy == Strategy::Passive)
            .collect();
        let self_diff = difference_curve(Strategy::Passive, &passives, &passives).unwrap();
        assert!(self_diff
            .points
            .iter()
            .all(|p| p.mean == 0.0 && p.sem == 0.0));
    }

    #[test]
    fn knn_on_wbc_trial_runs() {
        let d = standardize(&wbc());
        let cfg = ExperimentConfig {
            rounds: 2,
            ..ExperimentConfig::default()
        };
        let t = run_trial(&d, &cfg, Strategy::Survey, 1).unwrap();
        assert_eq!(
            t.points.iter().map(|p| p.labels_used).collect::<Vec<_>>(),
            vec![50, 70, 90]
        );
    }

    #[test]
    fn lambda_without_estimator_is_rejected() {
        let d = blobs();
        let cfg = ExperimentConfig {
            lambda: 0.5,
            ..small_config()
        };
        assert!(matches!(
            run_experiment(&d, &cfg, 1),
            Err(Error::MissingVarianceHook(_))
        ));
    }

    struct FavorFirst;

    impl VarianceEstimator for FavorFirst {
        fn variance(&self, _: &Dataset, p: &IndexPartition, _: &RiskField, index: usize) -> f64 {
            if index == p.unlabeled()[0] {
                100.0
            } else {
                0.0
            }
        }
    }

    #[test]
    fn variance_hook_is_consulted() {
        let d = blobs();
        let cfg = ExperimentConfig {
            lambda: 1.0,
            batch_size: 1,
            strategies: vec![Strategy::LocalRiskBatch],
            ..small_config()
        };
        let seeds = TrialSeeds::for_repetition(cfg.rep_seed(1), Strategy::LocalRiskBatch);
        let t = run_trial_seeded(
            &d,
            &cfg,
            Strategy::LocalRiskBatch,
            1,
            seeds,
            Some(&FavorFirst),
        )
        .unwrap();
        let mut before = t.initial_partition.clone();
        for r in &t.rounds {
            assert_eq!(r.queried, vec![before.unlabeled()[0]]);
            before = r.partition.clone();
        }
        assert!(run_experiment_with(&d, &cfg, 1, Some(&FavorFirst)).is_ok());
    }
}
