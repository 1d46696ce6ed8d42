//! The finiteness locus and the invariant completion.
//!
//! On points where the diagonal tower stalls, the full tower converges and
//! its limit is the smallest pullback-invariant majorant of the seed. All
//! limit claims here are finite-depth estimates carrying a certified tail
//! bound: the diagonal tail is certified by a geometric-decay window, and
//! off-diagonal tails follow by the Cauchy–Schwarz control of increments.

use crate::error::{Error, Result};
use crate::kernel::{diagonal, tower_value, GramMatrix, PsdReport, TowerCache};
use crate::system::KernelSystem;
use crate::tol;
use crate::tree::{class_walk, level_mass_from_classes, EdgeWeighting};
use num_complex::Complex64;
use serde::Serialize;
use std::cell::RefCell;
use std::collections::HashMap;

/// Membership verdict for the finiteness locus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum XfinVerdict {
    In,
    Out,
    Inconclusive,
}

impl std::fmt::Display for XfinVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            XfinVerdict::In => write!(f, "in"),
            XfinVerdict::Out => write!(f, "out"),
            XfinVerdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Result of probing one point.
///
/// For an `In` verdict, `u_hat` is an empirical upper bound for the
/// diagonal limit, obtained from the observed geometric decay of the
/// increments; it is a certificate relative to that observed rate, not a
/// proof.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeReport {
    pub verdict: XfinVerdict,
    pub n_used: usize,
    /// Diagonal value at `n_used`.
    pub u_n: f64,
    /// Certified upper bound for the diagonal limit (`In` only).
    pub u_hat: Option<f64>,
    /// `u_hat - u_n` (`In` only).
    pub tail: Option<f64>,
    /// Worst increment ratio over the certificate window (`In` only).
    pub ratio: Option<f64>,
}

/// Probe parameters.
#[derive(Debug, Clone, Copy)]
pub struct CompletionParams {
    pub n_max: usize,
    pub stall_tol: f64,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            n_max: 64,
            stall_tol: tol::PROBE_STALL_REL,
        }
    }
}

/// Walks the diagonal tower at one point and classifies it.
///
/// `In` needs the last increments below `stall_tol · max(1, u_n)` and a
/// geometric-decay certificate over the trailing window; `Out` is a
/// divergence-threshold crossing; anything else is `Inconclusive`.
pub fn xfin_probe<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    n_max: usize,
    stall_tol: f64,
) -> Result<ProbeReport> {
    if n_max < 2 {
        return Err(Error::Invalid("probe needs n_max >= 2".into()));
    }
    let window = tol::PROBE_WINDOW;
    let mut u = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let value = diagonal(sys, cache, n, s)?;
        if !value.is_finite() || value > tol::DIAGONAL_DIVERGENCE {
            return Ok(ProbeReport {
                verdict: XfinVerdict::Out,
                n_used: n,
                u_n: value,
                u_hat: None,
                tail: None,
                ratio: None,
            });
        }
        u.push(value);
        if n < window + 1 {
            continue;
        }
        let d: Vec<f64> = (n - window..n).map(|j| u[j + 1] - u[j]).collect();
        let stalled = d
            .last()
            .map_or(false, |&last| last <= stall_tol * u[n].max(1.0));
        if !stalled {
            continue;
        }
        // Worst observed decay ratio across the window; increments that
        // vanish give ratio 0, growth after a zero gives no certificate.
        let mut ratio = 0.0f64;
        let mut certified = true;
        for pair in d.windows(2) {
            let (prev, next) = (pair[0], pair[1]);
            if next == 0.0 {
                continue;
            }
            if prev == 0.0 {
                certified = false;
                break;
            }
            ratio = ratio.max(next / prev);
        }
        if !certified || ratio > tol::GEOMETRIC_RATIO_CAP {
            continue;
        }
        let d_last = *d.last().unwrap();
        let tail = d_last * ratio / (1.0 - ratio);
        return Ok(ProbeReport {
            verdict: XfinVerdict::In,
            n_used: n,
            u_n: u[n],
            u_hat: Some(u[n] + tail),
            tail: Some(tail),
            ratio: Some(ratio),
        });
    }
    Ok(ProbeReport {
        verdict: XfinVerdict::Inconclusive,
        n_used: n_max,
        u_n: *u.last().unwrap(),
        u_hat: None,
        tail: None,
        ratio: None,
    })
}

/// A finite-depth estimate of the completed kernel at a pair of points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompletionEstimate {
    pub n_used: usize,
    pub re: f64,
    pub im: f64,
    /// Certified bound on the distance to the limit.
    pub tail_bound: f64,
    pub converged: bool,
}

impl CompletionEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Memoizing estimator of the completed kernel over one system.
///
/// Probes and tower values are cached per point key, so deep enumerations
/// (boundary prefixes, weighted sums) stay linear in reachable points.
pub struct Completion<'a, S: KernelSystem> {
    sys: &'a S,
    params: CompletionParams,
    cache: RefCell<TowerCache<S::Key>>,
    probes: RefCell<HashMap<S::Key, ProbeReport>>,
}

impl<'a, S: KernelSystem> Completion<'a, S> {
    pub fn new(sys: &'a S, params: CompletionParams) -> Self {
        Completion {
            sys,
            params,
            cache: RefCell::new(TowerCache::new()),
            probes: RefCell::new(HashMap::new()),
        }
    }

    pub fn sys(&self) -> &'a S {
        self.sys
    }

    pub fn params(&self) -> CompletionParams {
        self.params
    }

    /// Runs (or recalls) the finiteness probe at a point.
    pub fn probe(&self, x: &S::Point) -> Result<ProbeReport> {
        let key = self.sys.key(x);
        if let Some(report) = self.probes.borrow().get(&key) {
            return Ok(*report);
        }
        let report = {
            let mut cache = self.cache.borrow_mut();
            xfin_probe(self.sys, &mut cache, x, self.params.n_max, self.params.stall_tol)?
        };
        self.probes.borrow_mut().insert(key, report);
        Ok(report)
    }

    /// The probe, required to land inside the finiteness locus.
    pub fn require_in(&self, x: &S::Point) -> Result<ProbeReport> {
        let report = self.probe(x)?;
        if report.verdict != XfinVerdict::In {
            return Err(Error::NotInFinitenessLocus {
                verdict: report.verdict.to_string(),
            });
        }
        Ok(report)
    }

    /// Estimate of the completed kernel with its certified tail bound.
    pub fn estimate(&self, s: &S::Point, t: &S::Point) -> Result<CompletionEstimate> {
        let ps = self.require_in(s)?;
        let pt = self.require_in(t)?;
        let n = ps.n_used.max(pt.n_used);
        let mut cache = self.cache.borrow_mut();
        let value = tower_value(self.sys, &mut cache, n, s, t)?;
        let tail_s = (ps.u_hat.unwrap() - diagonal(self.sys, &mut cache, n, s)?).max(0.0);
        let tail_t = (pt.u_hat.unwrap() - diagonal(self.sys, &mut cache, n, t)?).max(0.0);
        let tail_bound = (tail_s * tail_t).sqrt();
        Ok(CompletionEstimate {
            n_used: n,
            re: value.re,
            im: value.im,
            tail_bound,
            converged: true,
        })
    }

    /// Point value of the estimate.
    pub fn value(&self, s: &S::Point, t: &S::Point) -> Result<Complex64> {
        Ok(self.estimate(s, t)?.value())
    }

    /// Diagonal estimate and its certified upper bound.
    pub fn diagonal_bounds(&self, x: &S::Point) -> Result<(f64, f64)> {
        let p = self.require_in(x)?;
        Ok((p.u_n, p.u_hat.unwrap()))
    }

    /// Borrow the underlying tower cache for auxiliary computations.
    pub fn with_cache<R>(&self, f: impl FnOnce(&mut TowerCache<S::Key>) -> R) -> R {
        f(&mut self.cache.borrow_mut())
    }
}

/// Per-pair entry of an invariance check.
#[derive(Debug, Clone, Serialize)]
pub struct InvariancePair {
    pub residual: f64,
    /// Sum of the tail budgets of every estimate entering the identity.
    pub tail_budget: f64,
}

/// Invariance residuals `|LK̂ - K̂|` over a sample.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub max_residual: f64,
    pub max_tail_budget: f64,
    pub pairs: Vec<InvariancePair>,
    /// True when every residual is within its tail budget plus rounding.
    pub passed: bool,
}

/// Checks `LK̂_∞ = K̂_∞` pairwise on a sample of certified points.
pub fn invariance_residual<S: KernelSystem>(
    est: &Completion<'_, S>,
    sample: &[S::Point],
) -> Result<InvarianceReport> {
    let sys = est.sys();
    let mut pairs = Vec::new();
    let mut max_residual = 0.0f64;
    let mut max_tail = 0.0f64;
    for s in sample {
        for t in sample {
            let base = est.estimate(s, t)?;
            let mut pulled = Complex64::new(0.0, 0.0);
            let mut tail_budget = base.tail_bound;
            for i in 0..sys.branch_count() {
                let term = est.estimate(&sys.branch(i, s), &sys.branch(i, t))?;
                pulled += term.value();
                tail_budget += term.tail_bound;
            }
            let residual = (pulled - base.value()).norm();
            max_residual = max_residual.max(residual);
            max_tail = max_tail.max(tail_budget);
            pairs.push(InvariancePair {
                residual,
                tail_budget,
            });
        }
    }
    let passed = pairs
        .iter()
        .all(|p| p.residual <= p.tail_budget + 1e-12);
    Ok(InvarianceReport {
        max_residual,
        max_tail_budget: max_tail,
        pairs,
        passed,
    })
}

/// Outcome of comparing a candidate invariant majorant against the tower.
#[derive(Debug, Clone, Serialize)]
pub struct MinimalityReport {
    pub passed: bool,
    pub levels_checked: usize,
    /// Worst `λ_min` of `Gram(J) - Gram(K_n)` across levels.
    pub min_lambda: f64,
    /// First level at which the Loewner comparison failed, if any.
    pub failed_level: Option<usize>,
}

/// Checks `Gram(J) ≥ Gram(K_n)` for `n ≤ levels` on a sample, after
/// verifying the candidate's own claims (`J ≥ K` and `LJ = J`) there.
///
/// A candidate failing its preconditions is rejected as such; a Loewner
/// failure afterwards falsifies the candidate's claimed properties.
pub fn minimality_check<S, J>(
    est: &Completion<'_, S>,
    candidate: J,
    sample: &[S::Point],
    levels: usize,
) -> Result<MinimalityReport>
where
    S: KernelSystem,
    J: Fn(&S::Point, &S::Point) -> Result<Complex64>,
{
    if sample.is_empty() {
        return Err(Error::Invalid("empty sample".into()));
    }
    let sys = est.sys();
    for x in sample {
        est.require_in(x)?;
    }

    let gram_j = GramMatrix::from_evaluator(sys, sample, |s, t| candidate(s, t))?;
    let gram_seed = GramMatrix::from_evaluator(sys, sample, |s, t| Ok(sys.seed(s, t)))?;
    let majorizes_seed = gram_j.loewner_geq(&gram_seed, tol::PSD_REL)?;
    if !majorizes_seed.is_psd {
        return Err(Error::CandidatePrecondition {
            reason: format!(
                "candidate does not dominate the seed on the sample (λ_min = {:.3e})",
                majorizes_seed.lambda_min
            ),
        });
    }
    for s in sample {
        for t in sample {
            let direct = candidate(s, t)?;
            let mut pulled = Complex64::new(0.0, 0.0);
            for i in 0..sys.branch_count() {
                pulled += candidate(&sys.branch(i, s), &sys.branch(i, t))?;
            }
            let residual = (pulled - direct).norm();
            if residual > 1e-9 * direct.norm().max(1.0) {
                return Err(Error::CandidatePrecondition {
                    reason: format!("candidate is not invariant on the sample (|LJ - J| = {residual:.3e})"),
                });
            }
        }
    }

    let mut min_lambda = f64::INFINITY;
    let mut failed_level = None;
    for n in 0..=levels {
        let gram_n = est.with_cache(|cache| {
            GramMatrix::from_evaluator(sys, sample, |s, t| tower_value(sys, cache, n, s, t))
        })?;
        let cmp: PsdReport = gram_j.loewner_geq(&gram_n, tol::PSD_REL)?;
        min_lambda = min_lambda.min(cmp.lambda_min);
        if !cmp.is_psd && failed_level.is_none() {
            failed_level = Some(n);
        }
    }
    Ok(MinimalityReport {
        passed: failed_level.is_none(),
        levels_checked: levels,
        min_lambda,
        failed_level,
    })
}

/// Hölder exponent for the level-mass criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QExponent {
    Finite(f64),
    Infinity,
}

impl QExponent {
    pub fn parse(text: &str) -> Result<Self> {
        if text.eq_ignore_ascii_case("inf") || text.eq_ignore_ascii_case("infinity") {
            return Ok(QExponent::Infinity);
        }
        let q: f64 = text
            .parse()
            .map_err(|_| Error::Config(format!("not a Hölder exponent: {text:?}")))?;
        if q <= 1.0 {
            return Err(Error::Config("Hölder exponent must exceed 1".into()));
        }
        Ok(QExponent::Finite(q))
    }
}

/// Verdict of the level-mass sufficient condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelMassVerdict {
    InFinitenessLocus,
    NoCertificate,
}

/// Levelwise increment masses, their Hölder majorants, and the resulting
/// diagonal bound when the majorant series is summable.
#[derive(Debug, Clone, Serialize)]
pub struct LevelMassReport {
    pub delta: Vec<f64>,
    pub holder_bound: Vec<f64>,
    pub verdict: LevelMassVerdict,
    /// `u_0 + Σ A_k` (partial sum plus certified geometric tail).
    pub u_bound: Option<f64>,
    /// Worst relative mismatch between the level mass and the alternating
    /// diagonal difference it must equal.
    pub telescoping_residual: f64,
}

/// Computes `Δ_k(s)` per level by the class walk, cross-checks the level
/// identity, and applies the Hölder majorant test with exponent `q`.
pub fn levelmass_criterion<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    k_max: usize,
    q: QExponent,
) -> Result<LevelMassReport> {
    let classes = class_walk(sys, s, k_max)?;
    let weighting = EdgeWeighting::new(sys);
    let m = sys.branch_count() as f64;
    let mut delta = Vec::with_capacity(k_max + 1);
    let mut holder = Vec::with_capacity(k_max + 1);
    let mut telescoping_residual = 0.0f64;
    for k in 0..=k_max {
        let mass = level_mass_from_classes(sys, cache, &classes[k], k)?;
        let hi = diagonal(sys, cache, 2 * k + 1, s)?;
        let lo = diagonal(sys, cache, 2 * k, s)?;
        telescoping_residual =
            telescoping_residual.max((mass - (hi - lo)).abs() / hi.abs().max(1.0));
        delta.push(mass);
        let bound = match q {
            QExponent::Infinity => {
                let mut max_a = 0.0f64;
                for (point, count) in classes[k].values() {
                    if *count > 0.0 {
                        max_a = max_a.max(weighting.increment_at(cache, point, k)?);
                    }
                }
                m.powi(k as i32) * max_a
            }
            QExponent::Finite(q) => {
                let mut sum_q = 0.0f64;
                for (point, count) in classes[k].values() {
                    let a = weighting.increment_at(cache, point, k)?;
                    sum_q += count * a.powf(q);
                }
                m.powf(k as f64 * (1.0 - 1.0 / q)) * sum_q.powf(1.0 / q)
            }
        };
        holder.push(bound);
    }

    // Certify summability of the majorants by the same geometric window
    // used for diagonal probes.
    let window = tol::PROBE_WINDOW.min(holder.len().saturating_sub(1));
    let partial: f64 = holder.iter().sum();
    let mut verdict = LevelMassVerdict::NoCertificate;
    let mut u_bound = None;
    if partial.is_finite() && partial <= tol::SERIES_DIVERGENCE && holder.len() > window {
        let tail_window = &holder[holder.len() - 1 - window..];
        let mut ratio = 0.0f64;
        let mut certified = true;
        for pair in tail_window.windows(2) {
            let (prev, next) = (pair[0], pair[1]);
            if next == 0.0 {
                continue;
            }
            if prev == 0.0 {
                certified = false;
                break;
            }
            ratio = ratio.max(next / prev);
        }
        if certified && ratio <= tol::GEOMETRIC_RATIO_CAP {
            let last = *holder.last().unwrap();
            let tail = last * ratio / (1.0 - ratio);
            let u0 = diagonal(sys, cache, 0, s)?;
            verdict = LevelMassVerdict::InFinitenessLocus;
            u_bound = Some(u0 + partial + tail);
        }
    }
    Ok(LevelMassReport {
        delta,
        holder_bound: holder,
        verdict,
        u_bound,
        telescoping_residual,
    })
}
