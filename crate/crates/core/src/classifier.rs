//! k-NN and L2-regularized logistic regression behind a single fitted-model
//! type, plus the 0/1 loss and the empirical test risk.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierKind {
    Knn,
    Logistic,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Logistic => "logistic",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "knn" => Ok(ClassifierKind::Knn),
            "logistic" => Ok(ClassifierKind::Logistic),
            other => Err(format!(
                "unknown classifier `{other}` (expected knn or logistic)"
            )),
        }
    }
}

/// Hyperparameters for [`fit`]. Only the fields relevant to `kind` are read.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    /// Neighbor count for k-NN.
    pub k: usize,
    /// Ridge penalty on the logistic weights (the intercept is not penalized).
    pub l2: f64,
    pub max_iter: usize,
    /// Gradient-norm stopping tolerance for the logistic fit.
    pub tol: f64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Knn,
            k: 5,
            l2: 1e-4,
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

impl ClassifierSpec {
    pub fn knn(k: usize) -> Self {
        Self {
            kind: ClassifierKind::Knn,
            k,
            ..Self::default()
        }
    }

    pub fn logistic() -> Self {
        Self {
            kind: ClassifierKind::Logistic,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
struct KnnParams {
    k: usize,
    points: Vec<f64>,
    labels: Vec<u8>,
}

#[derive(Debug, Clone)]
struct LogisticParams {
    weights: Vec<f64>,
    intercept: f64,
    iterations: usize,
    converged: bool,
}

#[derive(Debug, Clone)]
enum Params {
    Knn(KnnParams),
    Logistic(LogisticParams),
    Constant(u8),
}

/// A fitted classifier `g: R^d -> {0, 1}` with a posterior score in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    kind: ClassifierKind,
    dim: usize,
    params: Params,
    training_indices: Vec<usize>,
}

/// Fits a classifier on the rows of `data` listed in `labeled`.
///
/// k-NN keeps the labeled points verbatim, ordered by dataset index. A
/// logistic fit on a single-class set returns the constant majority
/// classifier; check [`ClassifierModel::is_degenerate`].
pub fn fit(spec: &ClassifierSpec, data: &Dataset, labeled: &[usize]) -> Result<ClassifierModel> {
    if labeled.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    let mut training_indices = labeled.to_vec();
    training_indices.sort_unstable();
    let dim = data.n_features();

    let params = match spec.kind {
        ClassifierKind::Knn => {
            if spec.k == 0 {
                return Err(Error::InvalidConfig(
                    "classifier.k must be at least 1".into(),
                ));
            }
            let mut points = Vec::with_capacity(training_indices.len() * dim);
            for &i in &training_indices {
                points.extend_from_slice(data.row(i));
            }
            let labels = training_indices.iter().map(|&i| data.label(i)).collect();
            Params::Knn(KnnParams {
                k: spec.k,
                points,
                labels,
            })
        }
        ClassifierKind::Logistic => {
            let ones = training_indices
                .iter()
                .filter(|&&i| data.label(i) == 1)
                .count();
            if ones == 0 || ones == training_indices.len() {
                Params::Constant(u8::from(ones > 0))
            } else {
                let problem = LogisticProblem::new(data, &training_indices, spec.l2);
                Params::Logistic(problem.solve(spec.max_iter, spec.tol))
            }
        }
    };

    Ok(ClassifierModel {
        kind: spec.kind,
        dim,
        params,
        training_indices,
    })
}

impl ClassifierModel {
    /// A model that ignores its input. Used before any label is available.
    pub fn constant(kind: ClassifierKind, dim: usize, label: u8) -> Self {
        Self {
            kind,
            dim,
            params: Params::Constant(label.min(1)),
            training_indices: Vec::new(),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dataset indices the model was fitted on, ascending.
    pub fn training_indices(&self) -> &[usize] {
        &self.training_indices
    }

    /// True when the model collapsed to a constant prediction.
    pub fn is_degenerate(&self) -> bool {
        matches!(self.params, Params::Constant(_))
    }

    /// Logistic weights and intercept, if this is a non-degenerate logistic fit.
    pub fn logistic_coefficients(&self) -> Option<(&[f64], f64)> {
        match &self.params {
            Params::Logistic(p) => Some((&p.weights, p.intercept)),
            _ => None,
        }
    }

    /// Whether the logistic optimizer reached its tolerance.
    pub fn converged(&self) -> bool {
        match &self.params {
            Params::Logistic(p) => p.converged,
            _ => true,
        }
    }

    pub fn iterations(&self) -> usize {
        match &self.params {
            Params::Logistic(p) => p.iterations,
            _ => 0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        self.check_dim(x)?;
        Ok(match &self.params {
            Params::Knn(p) => {
                let (ones, count) = p.votes(x, None);
                vote_label(ones, count)
            }
            Params::Logistic(p) => u8::from(p.score(x) >= 0.5),
            Params::Constant(y) => *y,
        })
    }

    pub fn posterior(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match &self.params {
            Params::Knn(p) => {
                let (ones, count) = p.votes(x, None);
                ones as f64 / count as f64
            }
            Params::Logistic(p) => p.score(x),
            Params::Constant(y) => f64::from(*y),
        })
    }

    /// Prediction for the `position`-th training point with that point removed
    /// from the neighbor pool. Only defined for k-NN.
    pub fn predict_leave_one_out(&self, position: usize) -> Result<u8> {
        match &self.params {
            Params::Knn(p) => {
                if p.labels.len() < 2 {
                    return Err(Error::TooFewLabeled {
                        needed: 2,
                        have: p.labels.len(),
                    });
                }
                let x = &p.points[position * self.dim..(position + 1) * self.dim];
                let (ones, count) = p.votes(x, Some(position));
                Ok(vote_label(ones, count))
            }
            _ => Err(Error::LeaveOneOutUnsupported),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Vote ties go to class 1.
fn vote_label(ones: usize, count: usize) -> u8 {
    u8::from(2 * ones >= count)
}

impl KnnParams {
    /// Counts (label-1 votes, total votes) among the k nearest training points.
    /// Equal distances are resolved toward the lower training position.
    fn votes(&self, x: &[f64], exclude: Option<usize>) -> (usize, usize) {
        let dim = x.len();
        let mut dists: Vec<(f64, usize)> = self
            .labels
            .iter()
            .enumerate()
            .filter(|&(pos, _)| Some(pos) != exclude)
            .map(|(pos, _)| {
                let row = &self.points[pos * dim..(pos + 1) * dim];
                (squared_distance(x, row), pos)
            })
            .collect();
        let k = self.k.min(dists.len());
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dists.truncate(k);
        }
        let ones = dists
            .iter()
            .filter(|&&(_, pos)| self.labels[pos] == 1)
            .count();
        (ones, k)
    }
}

impl LogisticParams {
    fn score(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.intercept)
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean logistic loss plus `l2/2 * ||w||^2` over a labeled subset.
///
/// Parameters are packed as `[w_1, .., w_d, b]`.
pub struct LogisticProblem<'a> {
    data: &'a Dataset,
    indices: &'a [usize],
    l2: f64,
}

impl<'a> LogisticProblem<'a> {
    pub fn new(data: &'a Dataset, indices: &'a [usize], l2: f64) -> Self {
        Self { data, indices, l2 }
    }

    pub fn n_params(&self) -> usize {
        self.data.n_features() + 1
    }

    fn margin(&self, params: &[f64], i: usize) -> f64 {
        let d = self.data.n_features();
        dot(&params[..d], self.data.row(i)) + params[d]
    }

    pub fn objective(&self, params: &[f64]) -> f64 {
        let d = self.data.n_features();
        let n = self.indices.len() as f64;
        let loss: f64 = self
            .indices
            .iter()
            .map(|&i| {
                let z = self.margin(params, i);
                softplus(z) - f64::from(self.data.label(i)) * z
            })
            .sum();
        let penalty: f64 = params[..d].iter().map(|w| w * w).sum();
        loss / n + 0.5 * self.l2 * penalty
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let d = self.data.n_features();
        let n = self.indices.len() as f64;
        let mut grad = vec![0.0; d + 1];
        for &i in self.indices {
            let residual = sigmoid(self.margin(params, i)) - f64::from(self.data.label(i));
            for (g, x) in grad[..d].iter_mut().zip(self.data.row(i)) {
                *g += residual * x;
            }
            grad[d] += residual;
        }
        for g in &mut grad {
            *g /= n;
        }
        for (g, w) in grad[..d].iter_mut().zip(&params[..d]) {
            *g += self.l2 * w;
        }
        grad
    }

    fn hessian(&self, params: &[f64]) -> DMatrix<f64> {
        let d = self.data.n_features();
        let n = self.indices.len() as f64;
        let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
        let mut xt = vec![0.0; d + 1];
        for &i in self.indices {
            let p = sigmoid(self.margin(params, i));
            let s = p * (1.0 - p);
            xt[..d].copy_from_slice(self.data.row(i));
            xt[d] = 1.0;
            for a in 0..=d {
                let sa = s * xt[a];
                for b in a..=d {
                    h[(a, b)] += sa * xt[b];
                }
            }
        }
        for a in 0..=d {
            for b in a..=d {
                let v = h[(a, b)] / n + if a == b && a < d { self.l2 } else { 0.0 };
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        h
    }

    /// Damped Newton iterations with Armijo backtracking; falls back to a
    /// plain gradient step when the Hessian is not numerically positive
    /// definite.
    fn solve(&self, max_iter: usize, tol: f64) -> LogisticParams {
        let d = self.data.n_features();
        let mut params = vec![0.0; d + 1];
        let mut value = self.objective(&params);
        let mut iterations = 0;
        let mut converged = false;

        while iterations < max_iter {
            let grad = self.gradient(&params);
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm <= tol {
                converged = true;
                break;
            }
            iterations += 1;

            let g = DVector::from_vec(grad.clone());
            let mut direction = match self.hessian(&params).cholesky() {
                Some(chol) => -chol.solve(&g),
                None => -g.clone(),
            };
            let mut slope = direction.dot(&g);
            // not a descent direction, or NaN
            if slope.is_nan() || slope >= 0.0 {
                direction = -g.clone();
                slope = -g.norm_squared();
            }

            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-16 {
                let trial: Vec<f64> = params
                    .iter()
                    .zip(direction.iter())
                    .map(|(p, dp)| p + step * dp)
                    .collect();
                let trial_value = self.objective(&trial);
                if trial_value <= value + 1e-4 * step * slope {
                    params = trial;
                    value = trial_value;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // no further decrease is representable
                converged = gnorm <= tol.sqrt();
                break;
            }
        }

        let intercept = params.pop().expect("intercept slot");
        LogisticParams {
            weights: params,
            intercept,
            iterations,
            converged,
        }
    }
}

pub fn zero_one_loss(y: u8, yhat: u8) -> u8 {
    u8::from(y != yhat)
}

/// Average 0/1 loss of `model` over the rows listed in `test`.
pub fn empirical_risk(model: &ClassifierModel, data: &Dataset, test: &[usize]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut errors = 0usize;
    for &i in test {
        errors += usize::from(zero_one_loss(data.label(i), model.predict(data.row(i))?));
    }
    Ok(errors as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_d(xs: &[f64], ys: &[u8]) -> Dataset {
        Dataset::new(
            xs.iter().map(|&x| vec![x]).collect(),
            ys.to_vec(),
            vec!["x".into()],
            "1d",
        )
        .unwrap()
    }

    fn all(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn one_nn_splits_at_midpoint() {
        let d = one_d(&[0.0, 10.0, 99.0], &[0, 1, 1]);
        let m = fit(&ClassifierSpec::knn(1), &d, &[0, 1]).unwrap();
        assert_eq!(m.predict(&[5.1]).unwrap(), 1);
        assert_eq!(m.predict(&[4.9]).unwrap(), 0);
        assert_eq!(m.predict(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn even_k_vote_tie_predicts_one() {
        let d = one_d(&[0.0, 1.0, 5.0], &[0, 1, 0]);
        let m = fit(&ClassifierSpec::knn(2), &d, &[0, 1]).unwrap();
        assert_eq!(m.posterior(&[0.4]).unwrap(), 0.5);
        assert_eq!(m.predict(&[0.4]).unwrap(), 1);
    }

    #[test]
    fn knn_distance_ties_prefer_lower_index() {
        // query at 1.0 is equidistant from 0.0 (label 0) and 2.0 (label 1)
        let d = one_d(&[2.0, 0.0, 7.0], &[1, 0, 0]);
        let m = fit(&ClassifierSpec::knn(1), &d, &[1, 0]).unwrap();
        assert_eq!(m.predict(&[1.0]).unwrap(), 1);
    }

    #[test]
    fn knn_matches_brute_force_neighbor_listing() {
        let xs = [0.0, 1.0, 1.5, 4.0, 6.0];
        let ys = [1, 0, 1, 0, 0];
        let d = one_d(&xs, &ys);
        let m3 = fit(&ClassifierSpec::knn(3), &d, &all(5)).unwrap();
        let m5 = fit(&ClassifierSpec::knn(5), &d, &all(5)).unwrap();
        for q in [-1.0, 0.8, 2.0, 3.0, 5.5, 10.0] {
            let mut listing: Vec<(f64, usize)> = xs
                .iter()
                .enumerate()
                .map(|(i, x)| ((q - x) * (q - x), i))
                .collect();
            listing.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ones3 = listing[..3].iter().filter(|(_, i)| ys[*i] == 1).count();
            assert_eq!(m3.predict(&[q]).unwrap(), u8::from(ones3 >= 2));
            assert_eq!(m3.posterior(&[q]).unwrap(), ones3 as f64 / 3.0);
            assert_eq!(m5.posterior(&[q]).unwrap(), 0.4);
        }
    }

    #[test]
    fn knn_posterior_vote_fraction() {
        let d = one_d(&[0.0, 0.1, 0.2, 0.3, 0.4, 9.0], &[1, 1, 1, 0, 0, 0]);
        let m = fit(&ClassifierSpec::knn(5), &d, &all(6)).unwrap();
        assert!((m.posterior(&[0.2]).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn logistic_separable_case() {
        let d = one_d(&[-1.0, -1.0, 1.0, 1.0], &[0, 0, 1, 1]);
        let m = fit(&ClassifierSpec::logistic(), &d, &all(4)).unwrap();
        assert!(m.converged());
        assert_eq!(m.predict(&[-1.0]).unwrap(), 0);
        assert_eq!(m.predict(&[1.0]).unwrap(), 1);
        let (w, b) = m.logistic_coefficients().unwrap();
        assert!(w[0] > 0.0 && b.abs() < 1e-6);
    }

    #[test]
    fn logistic_zero_margin_scores_half() {
        assert_eq!(sigmoid(0.0), 0.5);
        let p = LogisticParams {
            weights: vec![0.0, 0.0],
            intercept: 0.0,
            iterations: 0,
            converged: true,
        };
        assert_eq!(p.score(&[3.0, -2.0]), 0.5);
        let m = ClassifierModel {
            kind: ClassifierKind::Logistic,
            dim: 2,
            params: Params::Logistic(p),
            training_indices: vec![],
        };
        assert_eq!(m.predict(&[3.0, -2.0]).unwrap(), 1);
    }

    #[test]
    fn logistic_single_class_collapses_to_constant() {
        let d = one_d(&[0.0, 1.0, 2.0], &[1, 1, 0]);
        let m = fit(&ClassifierSpec::logistic(), &d, &[0, 1]).unwrap();
        assert!(m.is_degenerate());
        assert_eq!(m.predict(&[-50.0]).unwrap(), 1);
        assert_eq!(m.posterior(&[-50.0]).unwrap(), 1.0);
    }

    #[test]
    fn fit_and_predict_errors() {
        let d = one_d(&[0.0, 1.0, 2.0], &[1, 1, 0]);
        assert!(matches!(
            fit(&ClassifierSpec::knn(1), &d, &[]),
            Err(Error::EmptyLabeledSet)
        ));
        let m = fit(&ClassifierSpec::knn(1), &d, &[0]).unwrap();
        assert!(matches!(
            m.predict(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(m.posterior(&[]).is_err());
    }

    #[test]
    fn zero_one_loss_table() {
        assert_eq!(zero_one_loss(0, 0), 0);
        assert_eq!(zero_one_loss(0, 1), 1);
        assert_eq!(zero_one_loss(1, 0), 1);
        assert_eq!(zero_one_loss(1, 1), 0);
    }

    #[test]
    fn empirical_risk_cases() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<u8> = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let d = one_d(&xs, &ys);
        let constant = ClassifierModel::constant(ClassifierKind::Knn, 1, 1);
        assert_eq!(empirical_risk(&constant, &d, &all(20)).unwrap(), 0.5);

        let perfect = fit(&ClassifierSpec::knn(1), &d, &all(20)).unwrap();
        assert_eq!(empirical_risk(&perfect, &d, &all(20)).unwrap(), 0.0);

        // 7 mistakes out of 20: flip seven labels in the training copy
        let flipped: Vec<u8> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| if i < 7 { 1 - y } else { y })
            .collect();
        let dtrain = one_d(&xs, &flipped);
        let m = fit(&ClassifierSpec::knn(1), &dtrain, &all(20)).unwrap();
        let direct = (0..20)
            .filter(|&i| m.predict(&[xs[i]]).unwrap() != ys[i])
            .count() as f64
            / 20.0;
        assert_eq!(direct, 0.35);
        assert_eq!(empirical_risk(&m, &d, &all(20)).unwrap(), 0.35);
        assert!(matches!(
            empirical_risk(&m, &d, &[]),
            Err(Error::EmptyTestSet)
        ));
    }

    #[test]
    fn leave_one_out_prediction() {
        let d = one_d(&[0.0, 1.0, 3.0], &[0, 1, 1]);
        let m = fit(&ClassifierSpec::knn(1), &d, &[0, 1]).unwrap();
        assert_eq!(m.predict_leave_one_out(0).unwrap(), 1);
        assert_eq!(m.predict_leave_one_out(1).unwrap(), 0);
        let lr = fit(&ClassifierSpec::logistic(), &d, &[0, 1, 2]).unwrap();
        assert!(matches!(
            lr.predict_leave_one_out(0),
            Err(Error::LeaveOneOutUnsupported)
        ));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows = (0..12)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let labels = (0..12).map(|i| (i % 3 == 0) as u8).collect();
        let d = Dataset::new(rows, labels, vec!["a".into(), "b".into(), "c".into()], "g").unwrap();
        let idx = all(12);
        let problem = LogisticProblem::new(&d, &idx, 0.3);
        let params: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grad = problem.gradient(&params);
        for j in 0..4 {
            let h = 1e-6;
            let mut up = params.clone();
            let mut down = params.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (problem.objective(&up) - problem.objective(&down)) / (2.0 * h);
            assert!((fd - grad[j]).abs() <= 1e-7 * grad[j].abs().max(1.0));
        }
    }

    #[test]
    fn logistic_fit_reaches_stationary_point() {
        let d = crate::dataset::standardize(&crate::dataset::wbc());
        let idx: Vec<usize> = (0..120).collect();
        let m = fit(&ClassifierSpec::logistic(), &d, &idx).unwrap();
        assert!(m.converged(), "took {} iterations", m.iterations());
        let (w, b) = m.logistic_coefficients().unwrap();
        let mut params = w.to_vec();
        params.push(b);
        let g = LogisticProblem::new(&d, &idx, 1e-4).gradient(&params);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-6);
    }

    proptest! {
        #[test]
        fn predict_agrees_with_posterior(
            xs in proptest::collection::vec(-5.0f64..5.0, 6..20),
            k in 1usize..6,
            q in -6.0f64..6.0,
            logistic in any::<bool>(),
        ) {
            let ys: Vec<u8> = xs.iter().map(|&x| u8::from((x * 7.3).sin() > 0.0)).collect();
            prop_assume!(ys.contains(&0) && ys.contains(&1));
            let d = one_d(&xs, &ys);
            let spec = if logistic { ClassifierSpec::logistic() } else { ClassifierSpec::knn(k) };
            let m = fit(&spec, &d, &all(xs.len())).unwrap();
            let p = m.posterior(&[q]).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert_eq!(m.predict(&[q]).unwrap() == 1, p >= 0.5);
        }

        #[test]
        fn one_nn_resubstitution_is_exact(
            xs in proptest::collection::btree_set(-1000i32..1000, 3..25),
        ) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let ys: Vec<u8> = (0..xs.len()).map(|i| (i % 2) as u8).collect();
            let d = one_d(&xs, &ys);
            let m = fit(&ClassifierSpec::knn(1), &d, &all(xs.len())).unwrap();
            prop_assert_eq!(empirical_risk(&m, &d, &all(xs.len())).unwrap(), 0.0);
        }

        #[test]
        fn empirical_risk_ignores_test_order(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let xs: Vec<f64> = (0..15).map(|i| f64::from(i) * 0.7).collect();
            let ys: Vec<u8> = (0..15).map(|i| u8::from(i % 3 == 1)).collect();
            let d = one_d(&xs, &ys);
            let m = fit(&ClassifierSpec::knn(3), &d, &[0, 2, 4, 6, 8]).unwrap();
            let mut test: Vec<usize> = (0..15).collect();
            let base = empirical_risk(&m, &d, &test).unwrap();
            test.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(empirical_risk(&m, &d, &test).unwrap(), base);
        }
    }
}
