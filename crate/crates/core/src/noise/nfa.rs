//! A-contrario scoring: the number of false alarms of a hypothesis with
//! `q` inliers, evaluated in log space.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::StereoCalibration;
use crate::{Error, Result};

/// Errors below this are clamped before taking logs.
pub const MIN_ERROR: f64 = 1e-12;

/// Table of `ln k!` for `k ≤ n`.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 1..=n {
            acc += (k as f64).ln();
            table.push(acc);
        }
        Self { table }
    }

    pub fn len(&self) -> usize {
        self.table.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.table[k]
    }

    /// `ln C(n, k)`; requires `k ≤ n ≤ self.len()`.
    pub fn ln_binomial(&self, n: usize, k: usize) -> f64 {
        self.table[n] - self.table[k] - self.table[n - k]
    }
}

/// Outcome of minimizing the NFA over the inlier count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NfaResult {
    /// Number of inliers `q*`.
    pub inliers: usize,
    pub log_nfa: f64,
    /// `q*`-th smallest error, the adaptive inlier threshold.
    pub threshold: f64,
}

fn log_nfa_term(table: &LogFactorials, e_q: f64, q: usize, n: usize, ns: usize, dim: usize, log_alpha0: f64) -> f64 {
    let k = (q - ns) as f64;
    ((n - ns) as f64).ln() + table.ln_binomial(n, q) + table.ln_binomial(q, ns) + k * (dim as f64 * e_q.max(MIN_ERROR).ln() + log_alpha0)
}

fn check_counts(q: usize, n: usize, ns: usize, available: usize) -> Result<()> {
    if q <= ns || q > n {
        return Err(Error::InvalidInlierCount { q, ns, n });
    }
    if available < n {
        return Err(Error::DimensionMismatch { expected: n, got: available });
    }
    Ok(())
}

/// Log-NFA of the hypothesis whose inliers are the `q` smallest errors.
///
/// `sorted_errors` holds error norms in ascending order.
pub fn nfa(sorted_errors: &[f64], q: usize, n: usize, ns: usize, dim: usize, alpha0: f64) -> Result<f64> {
    check_counts(q, n, ns, sorted_errors.len())?;
    let table = LogFactorials::new(n);
    Ok(log_nfa_term(&table, sorted_errors[q - 1], q, n, ns, dim, alpha0.ln()))
}

/// Smallest log-NFA over `q ∈ (Ns, N]`, with `N = sorted_errors.len()`.
///
/// `table` must cover `N`. Ties keep the smallest `q`.
pub fn min_log_nfa(table: &LogFactorials, sorted_errors: &[f64], ns: usize, dim: usize, alpha0: f64) -> Result<NfaResult> {
    let n = sorted_errors.len();
    if n <= ns {
        return Err(Error::InsufficientCorrespondences { got: n, need: ns + 1 });
    }
    if table.len() < n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: table.len(),
        });
    }
    let log_alpha0 = alpha0.ln();
    let mut best = NfaResult {
        inliers: 0,
        log_nfa: f64::INFINITY,
        threshold: 0.0,
    };
    for q in ns + 1..=n {
        let e_q = sorted_errors[q - 1];
        let value = log_nfa_term(table, e_q, q, n, ns, dim, log_alpha0);
        if value < best.log_nfa {
            best = NfaResult {
                inliers: q,
                log_nfa: value,
                threshold: e_q,
            };
        }
    }
    Ok(best)
}

/// [`min_log_nfa`], rejecting the result when `NFA > epsilon`.
pub fn best_nfa(sorted_errors: &[f64], ns: usize, dim: usize, alpha0: f64, epsilon: f64) -> Result<NfaResult> {
    let table = LogFactorials::new(sorted_errors.len());
    let best = min_log_nfa(&table, sorted_errors, ns, dim, alpha0)?;
    let log_epsilon = epsilon.ln();
    if best.log_nfa > log_epsilon {
        return Err(Error::NoValidModel {
            log_nfa: best.log_nfa,
            log_epsilon,
        });
    }
    Ok(best)
}

/// Probability that a background correspondence lands within one pixel:
/// unit-ball volume over the measurement domain.
pub fn alpha0_stereo(calib: &StereoCalibration) -> f64 {
    4.0 * PI / (3.0 * calib.domain_volume())
}
