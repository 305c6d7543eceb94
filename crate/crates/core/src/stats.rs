//! Statistical law-equivalence harness.
//!
//! Centered Gauss–Markov bridges are pinned down by their one- and
//! two-dimensional marginals, i.e. by means and the covariance kernel — the
//! coefficient-uniqueness result behind this module. So equivalence is
//! decided on moments analytically and, on sampled ensembles, by two-sample
//! Kolmogorov–Smirnov tests per time plus a permutation check of the
//! covariance-matrix gap.

use serde::Serialize;

use crate::analytic::{BridgeLaw, BridgeSpec};
use crate::coeffs::TimeGrid;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::simulate::sample_exact;

/// Most KS grid times the suite will test (Bonferroni denominator).
const MAX_KS_TIMES: usize = 32;
/// Family-wise level of the sampled comparisons.
const MC_LEVEL: f64 = 0.01;
/// Permutation replicates for the covariance gap; observed > all 99 nulls
/// rejects at exactly the 0.01 level under exchangeability.
const PERMUTATIONS: usize = 99;
/// Paths used for the covariance permutation null (per side).
const PERMUTATION_PATH_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Equivalent,
    Distinct,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct KsPoint<S> {
    pub t: S,
    pub d: S,
    pub p: S,
    pub reject: bool,
}

/// Outcome of an equivalence run; serializes with stable field names.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct EquivalenceReport<S> {
    pub verdict: Verdict,
    pub grid: Vec<S>,
    /// Largest absolute mean gap over grid times.
    pub max_mean_gap: S,
    /// Largest relative variance gap over grid times.
    pub max_var_gap_rel: S,
    /// Largest relative covariance gap over grid pairs (s, t).
    pub max_cov_gap_rel: S,
    /// Per-time KS outcomes (empty for the analytic comparison).
    pub ks: Vec<KsPoint<S>>,
    /// Whether any Bonferroni-corrected KS test rejected.
    pub ks_family_reject: Option<bool>,
    /// Frobenius norm of the covariance-matrix gap (sampled comparison).
    pub frobenius_gap: Option<S>,
    /// Largest gap seen across the permutation null replicates.
    pub frobenius_null_max: Option<S>,
    /// Tolerance the verdict bands were derived from.
    pub tol: S,
}

fn rel_gap<S: Scalar>(x: S, y: S) -> S {
    let scale = x.abs().max(y.abs());
    if scale == S::zero() {
        return S::zero();
    }
    (x - y).abs() / scale
}

fn capped_times<S: Scalar>(grid: &TimeGrid<S>) -> Vec<S> {
    let pts = grid.points();
    if pts.len() <= MAX_KS_TIMES {
        return pts.to_vec();
    }
    // Even subsample keeping the last point.
    (0..MAX_KS_TIMES)
        .map(|i| pts[(i * (pts.len() - 1)) / (MAX_KS_TIMES - 1)])
        .collect()
}

/// Compare two bridge laws through their exact moments on the grid.
///
/// Distinct if any gap exceeds `tol`, Equivalent if all gaps stay below
/// `tol/10`, Inconclusive in between. Mean gaps are absolute; variance and
/// covariance gaps are relative.
pub fn analytic_equivalence<S: Scalar>(
    a: &BridgeSpec<S>,
    b: &BridgeSpec<S>,
    grid: &TimeGrid<S>,
    tol: S,
) -> Result<EquivalenceReport<S>> {
    if a.horizon() != b.horizon() {
        return Err(Error::HorizonMismatch {
            a: a.horizon().to_f64_lossy(),
            b: b.horizon().to_f64_lossy(),
        });
    }
    let law_a = BridgeLaw::new(a)?;
    let law_b = BridgeLaw::new(b)?;
    let times = capped_times(grid);

    let mut max_mean = S::zero();
    let mut max_var = S::zero();
    let mut max_cov = S::zero();
    for (i, &t) in times.iter().enumerate() {
        max_mean = max_mean.max((law_a.mean(t)? - law_b.mean(t)?).abs());
        max_var = max_var.max(rel_gap(law_a.variance(t)?, law_b.variance(t)?));
        for &s in &times[..=i] {
            max_cov = max_cov.max(rel_gap(law_a.covariance(s, t)?, law_b.covariance(s, t)?));
        }
    }

    let worst = max_mean.max(max_var).max(max_cov);
    let verdict = if worst > tol {
        Verdict::Distinct
    } else if worst < tol / S::of(10.0) {
        Verdict::Equivalent
    } else {
        Verdict::Inconclusive
    };
    Ok(EquivalenceReport {
        verdict,
        grid: times,
        max_mean_gap: max_mean,
        max_var_gap_rel: max_var,
        max_cov_gap_rel: max_cov,
        ks: Vec::new(),
        ks_family_reject: None,
        frobenius_gap: None,
        frobenius_null_max: None,
        tol,
    })
}

/// Column-major snapshot of an ensemble at the test times.
fn snapshot<S: Scalar>(
    spec: &BridgeSpec<S>,
    times: &[S],
    horizon: S,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<S>>> {
    // Keep grids legal whose own endpoint guard was tighter than the
    // default (the caller's last time is already validated).
    let gap = horizon - *times.last().unwrap();
    let eps = TimeGrid::default_eps_end(horizon).min(gap * S::of(0.5));
    let grid = TimeGrid::new(times.to_vec(), horizon, eps)?;
    let ens = sample_exact(spec, &grid, n_paths, seed)?;
    Ok((0..times.len()).map(|j| ens.at_time_index(j)).collect())
}

fn covariance_matrix<S: Scalar>(cols: &[Vec<S>], rows: &[usize]) -> Vec<S> {
    let m = cols.len();
    let n = S::from_usize(rows.len()).unwrap();
    let means: Vec<S> = cols
        .iter()
        .map(|c| rows.iter().map(|&r| c[r]).fold(S::zero(), |a, x| a + x) / n)
        .collect();
    let mut out = vec![S::zero(); m * m];
    for i in 0..m {
        for j in i..m {
            let mut acc = S::zero();
            for &r in rows {
                acc += (cols[i][r] - means[i]) * (cols[j][r] - means[j]);
            }
            let v = acc / n;
            out[i * m + j] = v;
            out[j * m + i] = v;
        }
    }
    out
}

fn frobenius_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(S::zero(), |acc, d| acc + d)
        .sqrt()
}

/// Empirical counterpart of [`analytic_equivalence`]: sample both specs and
/// compare marginals by KS tests (Bonferroni at level 0.01) and the
/// covariance matrices by a permutation test of the Frobenius gap.
///
/// The two sides draw from internally derived, distinct seed lanes, so a
/// spec compared against itself still sees independent ensembles.
pub fn mc_equivalence<S: Scalar>(
    a: &BridgeSpec<S>,
    b: &BridgeSpec<S>,
    grid: &TimeGrid<S>,
    n_paths: usize,
    seed: u64,
) -> Result<EquivalenceReport<S>> {
    if a.horizon() != b.horizon() {
        return Err(Error::HorizonMismatch {
            a: a.horizon().to_f64_lossy(),
            b: b.horizon().to_f64_lossy(),
        });
    }
    if n_paths < 10_000 {
        return Err(Error::InvalidSpec(format!(
            "mc_equivalence needs at least 10^4 paths, got {n_paths}"
        )));
    }
    let times = capped_times(grid);
    let horizon = a.horizon();
    let cols_a = snapshot(a, &times, horizon, n_paths, seed ^ 0x6161_6161_6161_6161)?;
    let cols_b = snapshot(b, &times, horizon, n_paths, seed ^ 0x6262_6262_6262_6262)?;

    // Per-time KS with Bonferroni correction.
    let level = S::of(MC_LEVEL) / S::from_usize(times.len()).unwrap();
    let mut ks = Vec::with_capacity(times.len());
    let mut family_reject = false;
    for (j, &t) in times.iter().enumerate() {
        let (d, p) = ks_statistic(&cols_a[j], &cols_b[j])?;
        let reject = p < level;
        family_reject |= reject;
        ks.push(KsPoint { t, d, p, reject });
    }

    // Moment gaps on the sampled ensembles, for the report.
    let n = S::from_usize(n_paths).unwrap();
    let mut max_mean = S::zero();
    let mut max_var = S::zero();
    for j in 0..times.len() {
        let ma = cols_a[j].iter().fold(S::zero(), |a, &x| a + x) / n;
        let mb = cols_b[j].iter().fold(S::zero(), |a, &x| a + x) / n;
        let va = cols_a[j]
            .iter()
            .fold(S::zero(), |a, &x| a + (x - ma) * (x - ma))
            / n;
        let vb = cols_b[j]
            .iter()
            .fold(S::zero(), |a, &x| a + (x - mb) * (x - mb))
            / n;
        max_mean = max_mean.max((ma - mb).abs());
        max_var = max_var.max(rel_gap(va, vb));
    }

    // Permutation test of the covariance gap on a capped path subset.
    let used = n_paths.min(PERMUTATION_PATH_CAP);
    let rows_a: Vec<usize> = (0..used).collect();
    let cov_a = covariance_matrix(&cols_a, &rows_a);
    let cov_b = covariance_matrix(&cols_b, &rows_a);
    let observed = frobenius_distance(&cov_a, &cov_b);

    // Pool the two subsets and re-split at random.
    let pooled: Vec<Vec<S>> = (0..times.len())
        .map(|j| {
            let mut c = Vec::with_capacity(2 * used);
            c.extend_from_slice(&cols_a[j][..used]);
            c.extend_from_slice(&cols_b[j][..used]);
            c
        })
        .collect();
    let mut cov_rel = S::zero();
    let mut null_max = S::zero();
    let mut rng = RngStream::new(seed ^ 0x7065_726d_7574_6521, 0);
    let mut index: Vec<usize> = (0..2 * used).collect();
    for _ in 0..PERMUTATIONS {
        // Fisher-Yates on the pooled path indices.
        for i in (1..index.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            index.swap(i, j);
        }
        let first = &index[..used];
        let second = &index[used..];
        let c1 = covariance_matrix(&pooled, first);
        let c2 = covariance_matrix(&pooled, second);
        null_max = null_max.max(frobenius_distance(&c1, &c2));
    }
    let frob_reject = observed > null_max;
    for (x, y) in cov_a.iter().zip(&cov_b) {
        cov_rel = cov_rel.max(rel_gap(*x, *y));
    }

    let verdict = if family_reject || frob_reject {
        Verdict::Distinct
    } else {
        Verdict::Equivalent
    };
    Ok(EquivalenceReport {
        verdict,
        grid: times,
        max_mean_gap: max_mean,
        max_var_gap_rel: max_var,
        max_cov_gap_rel: cov_rel,
        ks,
        ks_family_reject: Some(family_reject),
        frobenius_gap: Some(observed),
        frobenius_null_max: Some(null_max),
        tol: S::of(MC_LEVEL),
    })
}

/// Two-sample Kolmogorov–Smirnov statistic and its asymptotic p-value.
///
/// D is the sup-distance of the empirical CDFs; the p-value is the
/// Kolmogorov tail sum 2 Σ (-1)^{j-1} e^{-2 j² λ²} with the finite-sample
/// λ-correction of the effective sample size.
pub fn ks_statistic<S: Scalar>(sample_a: &[S], sample_b: &[S]) -> Result<(S, S)> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = sample_a.to_vec();
    let mut ys = sample_b.to_vec();
    xs.sort_unstable_by(|p, q| p.partial_cmp(q).expect("samples must not contain NaN"));
    ys.sort_unstable_by(|p, q| p.partial_cmp(q).expect("samples must not contain NaN"));

    let (n, m) = (xs.len(), ys.len());
    let inv_n = S::one() / S::from_usize(n).unwrap();
    let inv_m = S::one() / S::from_usize(m).unwrap();
    let (mut i, mut j) = (0usize, 0usize);
    let (mut fa, mut fb) = (S::zero(), S::zero());
    let mut d = S::zero();
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            // Absorb ties within a sample in one jump.
            while i < n && xs[i] == x {
                i += 1;
            }
            fa = S::from_usize(i).unwrap() * inv_n;
        }
        if y <= x {
            while j < m && ys[j] == y {
                j += 1;
            }
            fb = S::from_usize(j).unwrap() * inv_m;
        }
        d = d.max((fa - fb).abs());
    }
    let p = ks_p_value(d, n, m);
    Ok((d, p))
}

fn ks_p_value<S: Scalar>(d: S, n: usize, m: usize) -> S {
    let ne = (n as f64) * (m as f64) / ((n + m) as f64);
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d.to_f64_lossy();
    let mut sum = 0.0f64;
    let mut sign = 1.0f64;
    let mut converged = false;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term <= 1e-12 * sum.abs().max(1e-300) {
            converged = true;
            break;
        }
        sign = -sign;
    }
    if !converged {
        // The tail series only stalls as λ → 0, where the p-value is 1.
        return S::one();
    }
    S::of((2.0 * sum).clamp(0.0, 1.0))
}
