//! Built-in numerical checks against hand-computed values and Monte Carlo
//! frequencies. All randomness is seeded, so the report is reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::local_risk::{loocv_errors, nw_estimate_with, BandwidthGrid, GaussianKernel, Kernel};
use crate::selection::{inclusion_probabilities, select_passive, select_survey_from_risks};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn close(name: &'static str, got: f64, want: f64, tol: f64) -> Self {
        Self {
            name,
            passed: (got - want).abs() <= tol,
            detail: format!("got {got:.12}, want {want:.12} (tol {tol:e})"),
        }
    }

    fn boolean(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

/// Runs every check with the Gaussian kernel.
pub fn run() -> Vec<CheckResult> {
    run_with_kernel(&GaussianKernel)
}

/// Runs every check, evaluating the kernel-regression cases with `kernel`.
pub fn run_with_kernel<K: Kernel>(kernel: &K) -> Vec<CheckResult> {
    let mut out = Vec::new();

    let line = Dataset::new(
        vec![vec![0.0], vec![1.0], vec![5.0]],
        vec![0, 1, 0],
        vec!["x".into()],
        "selftest",
    )
    .expect("valid fixture");

    out.push(CheckResult::close(
        "kernel_unit_distance",
        kernel.weight(1.0, 1.0),
        (-1.0f64).exp(),
        1e-12,
    ));
    out.push(
        match nw_estimate_with(kernel, &[0.0], &line, &[0, 1], &[1.0, 0.0], 1.0) {
            Ok(v) => CheckResult::close("nw_two_point", v, 1.0 / (1.0 + (-1.0f64).exp()), 1e-12),
            Err(e) => CheckResult::boolean("nw_two_point", false, e.to_string()),
        },
    );
    out.push(
        match nw_estimate_with(kernel, &[3.0], &line, &[2], &[1.0], 0.5) {
            Ok(v) => CheckResult::close("nw_single_point", v, 1.0, 1e-12),
            Err(e) => CheckResult::boolean("nw_single_point", false, e.to_string()),
        },
    );

    let xs = [0.0, 0.5, 2.0, 2.3];
    let losses = [1.0, 0.0, 1.0, 1.0];
    let four = Dataset::new(
        xs.iter().map(|&x| vec![x]).collect(),
        vec![0, 0, 1, 1],
        vec!["x".into()],
        "selftest",
    )
    .expect("valid fixture");
    let grid = BandwidthGrid::new(vec![0.5, 1.0, 2.0]).expect("valid grid");
    let errors = loocv_errors(&four, &[0, 1, 2, 3], &losses, &grid).unwrap_or_default();
    let worst = grid
        .values()
        .iter()
        .zip(&errors)
        .map(|(&h, &e)| {
            let mut direct = 0.0;
            for j in 0..4 {
                let (num, den) = (0..4).filter(|&k| k != j).fold((0.0, 0.0), |(n, d), k| {
                    let w = (-(xs[j] - xs[k]).powi(2) / h).exp();
                    (n + w * losses[k], d + w)
                });
                direct += (losses[j] - num / den).powi(2);
            }
            (e - direct / 4.0).abs()
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::boolean(
        "loocv_hand_set",
        errors.len() == 3 && worst <= 1e-12,
        format!("max |E(h) - direct| = {worst:e}"),
    ));

    let ip = inclusion_probabilities(&[0.4, 0.4, 0.2], 2).expect("valid risks");
    let dev = ip
        .probs
        .iter()
        .zip([0.8, 0.8, 0.4])
        .map(|(p, w)| (p - w).abs())
        .fold(0.0, f64::max);
    out.push(CheckResult::boolean(
        "inclusion_no_capping",
        ip.auto_included.is_empty() && dev <= 1e-12,
        format!("pi = {:?}", ip.probs),
    ));

    let ip = inclusion_probabilities(&[0.9, 0.05, 0.05], 2).expect("valid risks");
    out.push(CheckResult::boolean(
        "inclusion_one_capping_pass",
        ip.auto_included == [0]
            && (ip.probs[1] - 0.5).abs() <= 1e-12
            && (ip.probs[2] - 0.5).abs() <= 1e-12,
        format!("auto = {:?}, pi = {:?}", ip.auto_included, ip.probs),
    ));

    let ip = inclusion_probabilities(&[0.0, 0.0, 0.0], 2).expect("valid risks");
    out.push(CheckResult::boolean(
        "inclusion_zero_risk_fallback",
        ip.uniform_slots == 2 && ip.probs.iter().all(|&p| p == 0.0),
        format!("uniform slots = {}", ip.uniform_slots),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let pool = [0usize, 1, 2];
    let mut counts = [0usize; 3];
    let draws = 10_000;
    let mut sizes_ok = true;
    for _ in 0..draws {
        match select_survey_from_risks(&pool, &[0.9, 0.05, 0.05], 2, &mut rng) {
            Ok(batch) => {
                sizes_ok &= batch.len() == 2;
                for i in batch {
                    counts[i] += 1;
                }
            }
            Err(_) => sizes_ok = false,
        }
    }
    let f: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    out.push(CheckResult::boolean(
        "survey_monte_carlo",
        sizes_ok && f[0] == 1.0 && (f[1] - 0.5).abs() <= 0.02 && (f[2] - 0.5).abs() <= 0.02,
        format!("frequencies = [{:.4}, {:.4}, {:.4}]", f[0], f[1], f[2]),
    ));

    let pool = [0usize, 1, 2, 3];
    let mut counts = [0usize; 4];
    let draws = 40_000;
    for _ in 0..draws {
        if let Ok(batch) = select_passive(&pool, 1, &mut rng) {
            counts[batch[0]] += 1;
        }
    }
    let worst = counts
        .iter()
        .map(|&c| (c as f64 / draws as f64 - 0.25).abs())
        .fold(0.0, f64::max);
    out.push(CheckResult::boolean(
        "passive_monte_carlo",
        worst <= 0.01,
        format!("max |freq - 0.25| = {worst:.4}"),
    ));

    out
}
