//! The boundary of the word tree: random infinite words, the sampled
//! martingale `M_n(s,t;ω) = mⁿ K̂_∞(φ_{ω|n}s, φ_{ω|n}t)`, its second-moment
//! functional, shift cocycles, diagonal boundary factors, and the
//! normalized boundary kernel.
//!
//! Exact enumeration over prefixes is the oracle for every statistical
//! claim; Monte Carlo sampling is only for scales where enumeration is
//! infeasible. Limits are approximated at the deepest certified level and
//! always reported together with a Cauchy diagnostic.

use crate::completion::Completion;
use crate::error::{Error, Result};
use crate::extended::ExtendedNonneg;
use crate::system::{words_of_length, KernelSystem, Word};
use crate::tol;
use crate::tree::class_walk;
use num_complex::Complex64;
use serde::Serialize;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A lazily materialized infinite word with i.i.d. uniform letters.
///
/// Letters are a pure function of `(seed, position)` (a counter-based
/// generator), so prefixes are stable under extension, paths are
/// reproducible from their seed, and per-path seeds can be derived and
/// merged across workers.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPath {
    seed: u64,
    m: usize,
}

impl BoundaryPath {
    pub fn new(seed: u64, m: usize) -> Self {
        BoundaryPath { seed, m }
    }

    /// Derives the path for one sample index from a master seed.
    pub fn derived(master: u64, index: u64, m: usize) -> Self {
        BoundaryPath {
            seed: splitmix64(master ^ index.wrapping_mul(GOLDEN)),
            m,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The letter at position `n` (0-based).
    pub fn letter(&self, n: usize) -> u8 {
        (splitmix64(self.seed ^ (n as u64 + 1)) % self.m as u64) as u8
    }

    /// The prefix `ω|n` as a word.
    pub fn prefix(&self, n: usize) -> Word {
        let letters: Vec<u8> = (0..n).map(|i| self.letter(i)).collect();
        Word::from_letters(&letters, self.m).expect("letters are reduced mod m")
    }
}

/// `M̂_n(s,t;w) = mⁿ K̂_∞(φ_w s, φ_w t)` along an explicit prefix.
pub fn martingale_value<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    t: &S::Point,
    prefix: &Word,
) -> Result<Complex64> {
    let sys = est.sys();
    let scale = (sys.branch_count() as f64).powi(prefix.len() as i32);
    let value = est.value(&sys.apply_word(prefix, s), &sys.apply_word(prefix, t))?;
    Ok(value * Complex64::new(scale, 0.0))
}

/// Residual of the one-step conditional-expectation identity at a node.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepCheck {
    pub residual: f64,
    /// Estimator tail budget scaled to the level (`mⁿ · Σ tails`).
    pub tail_allowance: f64,
}

/// Checks `(1/m) Σ_i M̂_{n+1}(s,t; w·i) = M̂_n(s,t; w)` at the node `w`.
pub fn martingale_step_check<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    t: &S::Point,
    w: &Word,
) -> Result<StepCheck> {
    let sys = est.sys();
    let m = sys.branch_count();
    let scale = (m as f64).powi(w.len() as i32);
    let ps = sys.apply_word(w, s);
    let pt = sys.apply_word(w, t);
    let base = est.estimate(&ps, &pt)?;
    let mut avg = Complex64::new(0.0, 0.0);
    let mut tails = base.tail_bound;
    for i in 0..m {
        let child = est.estimate(&sys.branch(i, &ps), &sys.branch(i, &pt))?;
        avg += child.value();
        tails += child.tail_bound;
    }
    // (1/m)·Σ_i m^{n+1}·K̂(φ_i ·) − m^n·K̂ = m^n (Σ_i K̂(φ_i ·) − K̂).
    let residual = scale * (avg - base.value()).norm();
    Ok(StepCheck {
        residual,
        tail_allowance: scale * tails,
    })
}

/// Exact mean `E[M̂_n(s,t;·)]` by full prefix enumeration.
pub fn martingale_mean_enumerated<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    t: &S::Point,
    n: usize,
) -> Result<Complex64> {
    let sys = est.sys();
    let m = sys.branch_count();
    if m.checked_pow(n as u32).map_or(true, |c| c > tol::ENUMERATION_BUDGET) {
        return Err(Error::BudgetExceeded {
            budget: tol::ENUMERATION_BUDGET,
            depth: n,
        });
    }
    let weight = (m as f64).powi(-(n as i32));
    let mut acc = Complex64::new(0.0, 0.0);
    for w in words_of_length(n, m) {
        acc += martingale_value(est, s, t, &w)? * Complex64::new(weight, 0.0);
    }
    Ok(acc)
}

/// Levelwise second-moment data for the diagonal martingale.
#[derive(Debug, Clone, Serialize)]
pub struct BReport {
    /// `mⁿ Σ_w û_∞(φ_w s)²` per level (point estimates).
    pub levels: Vec<f64>,
    /// Same sums with the certified diagonal upper bounds.
    pub levels_hat: Vec<f64>,
    /// Supremum of the point estimates over the inspected levels.
    pub sup: f64,
    /// Supremum of the certified bounds.
    pub sup_hat: f64,
    /// Whether the certified levels are non-expanding across the trailing
    /// window (the empirical second-moment certificate).
    pub certified: bool,
}

/// Levelwise square sums `mⁿ Σ_{w∈W_n} u_∞(φ_w s)²` via the class walk,
/// with the diagonal estimates carrying their certified upper bounds.
pub fn b_functional<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    n_max: usize,
) -> Result<BReport> {
    est.require_in(s)?;
    let sys = est.sys();
    let m = sys.branch_count() as f64;
    let classes = class_walk(sys, s, n_max)?;
    let mut levels = Vec::with_capacity(n_max + 1);
    let mut levels_hat = Vec::with_capacity(n_max + 1);
    for (n, level) in classes.iter().enumerate() {
        let mut total = 0.0;
        let mut total_hat = 0.0;
        for (point, count) in level.values() {
            let (u, u_hat) = est.diagonal_bounds(point)?;
            total += count * u * u;
            total_hat += count * u_hat * u_hat;
        }
        levels.push(m.powi(n as i32) * total);
        levels_hat.push(m.powi(n as i32) * total_hat);
    }
    let sup = levels.iter().copied().fold(0.0, f64::max);
    let sup_hat = levels_hat.iter().copied().fold(0.0, f64::max);
    let window = tol::PROBE_WINDOW.min(levels_hat.len().saturating_sub(1));
    let certified = window == 0
        || levels_hat[levels_hat.len() - 1 - window..]
            .windows(2)
            .all(|pair| pair[1] <= pair[0] * (1.0 + 1e-9) + 1e-300);
    Ok(BReport {
        levels,
        levels_hat,
        sup,
        sup_hat,
        certified,
    })
}

/// Exact `E[|M̂_n(s,s;·)|²]` by enumeration; the oracle behind the
/// second-moment reading of the levelwise square sums.
pub fn diagonal_second_moment_enumerated<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    n: usize,
) -> Result<f64> {
    let sys = est.sys();
    let m = sys.branch_count();
    if m.checked_pow(n as u32).map_or(true, |c| c > tol::ENUMERATION_BUDGET) {
        return Err(Error::BudgetExceeded {
            budget: tol::ENUMERATION_BUDGET,
            depth: n,
        });
    }
    let weight = (m as f64).powi(-(n as i32));
    let mut acc = 0.0;
    for w in words_of_length(n, m) {
        acc += weight * martingale_value(est, s, s, &w)?.norm_sqr();
    }
    Ok(acc)
}

/// Level comparability of the diagonal along the tree.
#[derive(Debug, Clone, Serialize)]
pub struct GammaLevel {
    pub n: usize,
    pub min_u: f64,
    pub max_u: f64,
    pub gamma: ExtendedNonneg,
}

/// `Γ_n = max_w u_∞(φ_w s) / min_w u_∞(φ_w s)` per level; a zero minimum
/// reports `∞`.
pub fn gamma_comparability<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    n_max: usize,
) -> Result<Vec<GammaLevel>> {
    est.require_in(s)?;
    let classes = class_walk(est.sys(), s, n_max)?;
    let mut out = Vec::with_capacity(n_max + 1);
    for (n, level) in classes.iter().enumerate() {
        let mut min_u = f64::INFINITY;
        let mut max_u = 0.0f64;
        for (point, _) in level.values() {
            let (u, _) = est.diagonal_bounds(point)?;
            min_u = min_u.min(u);
            max_u = max_u.max(u);
        }
        let gamma = if min_u == 0.0 {
            ExtendedNonneg::INFINITY
        } else {
            ExtendedNonneg::new(max_u / min_u)
        };
        out.push(GammaLevel {
            n,
            min_u,
            max_u,
            gamma,
        });
    }
    Ok(out)
}

/// One sampled trajectory `M̂_0, …, M̂_N`.
#[derive(Debug, Clone, Serialize)]
pub struct MartingaleSample {
    pub path_seed: u64,
    pub values: Vec<(f64, f64)>,
}

impl MartingaleSample {
    pub fn value(&self, n: usize) -> Complex64 {
        Complex64::new(self.values[n].0, self.values[n].1)
    }

    pub fn last(&self) -> Complex64 {
        self.value(self.values.len() - 1)
    }
}

/// Monte-Carlo summary of the boundary limit at one pair of points.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub paths: usize,
    pub depth: usize,
    /// `K̂_∞(s,t)` the empirical mean must recover.
    pub expected_mean: (f64, f64),
    pub empirical_mean: (f64, f64),
    /// Standard error of the empirical mean (per real dimension, pooled).
    pub standard_error: f64,
    /// `E|M̂_N|²` over the sample.
    pub empirical_second_moment: f64,
    /// `B̂(s)^{1/2} B̂(t)^{1/2}` from the certified level sums.
    pub second_moment_bound: f64,
    /// Max over paths of `|M̂_{n+1} − M̂_n|` in the trailing window.
    pub cauchy_diagnostic: f64,
}

/// Samples boundary trajectories and compares their statistics against the
/// exact quantities. Requires the second-moment certificate at both
/// points.
pub fn simulate_boundary<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    t: &S::Point,
    depth: usize,
    paths: usize,
    seed: u64,
) -> Result<(Vec<MartingaleSample>, SimulationReport)> {
    if depth == 0 || paths == 0 {
        return Err(Error::Invalid("simulation needs depth >= 1 and paths >= 1".into()));
    }
    let b_levels = depth.min(12);
    let bs = b_functional(est, s, b_levels)?;
    let bt = b_functional(est, t, b_levels)?;
    if !bs.certified || !bt.certified {
        return Err(Error::NotCertified {
            reason: "levelwise square sums of the diagonal are still growing; raise the probe \
                     depth or pick points with finite second-moment functional"
                .into(),
        });
    }
    let sys = est.sys();
    let m = sys.branch_count();
    let expected = est.value(s, t)?;

    let mut samples = Vec::with_capacity(paths);
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second = 0.0;
    let mut scatter = 0.0;
    let mut cauchy = 0.0f64;
    let window = tol::PROBE_WINDOW.min(depth);
    for index in 0..paths {
        let path = BoundaryPath::derived(seed, index as u64, m);
        let mut values = Vec::with_capacity(depth + 1);
        let mut ps = s.clone();
        let mut pt = t.clone();
        let mut scale = 1.0;
        for n in 0..=depth {
            if n > 0 {
                let letter = path.letter(n - 1) as usize;
                ps = sys.branch(letter, &ps);
                pt = sys.branch(letter, &pt);
                scale *= m as f64;
            }
            let v = est.value(&ps, &pt)? * Complex64::new(scale, 0.0);
            values.push((v.re, v.im));
        }
        let sample = MartingaleSample {
            path_seed: path.seed(),
            values,
        };
        let last = sample.last();
        mean += last;
        second += last.norm_sqr();
        scatter += (last - expected).norm_sqr();
        for n in depth - window..depth {
            cauchy = cauchy.max((sample.value(n + 1) - sample.value(n)).norm());
        }
        samples.push(sample);
    }
    let n = paths as f64;
    mean /= Complex64::new(n, 0.0);
    second /= n;
    let standard_error = (scatter / n).sqrt() / n.sqrt();
    let report = SimulationReport {
        paths,
        depth,
        expected_mean: (expected.re, expected.im),
        empirical_mean: (mean.re, mean.im),
        standard_error,
        empirical_second_moment: second,
        second_moment_bound: (bs.sup_hat * bt.sup_hat).sqrt(),
        cauchy_diagnostic: cauchy,
    };
    Ok((samples, report))
}

/// Square-function data: increment energies against the variance identity.
#[derive(Debug, Clone, Serialize)]
pub struct SquareFunctionReport {
    /// `E|D_n|²` for `n < n_exact`, computed exactly.
    pub increment_energy: Vec<f64>,
    pub partial_sum: f64,
    /// `E|M̂_N|²` at `N = n_exact`.
    pub second_moment: f64,
    /// `|Σ E|D_n|² − (E|M̂_N|² − |M̂_0|²)|`.
    pub identity_residual: f64,
    /// `B̂(s)^{1/2}B̂(t)^{1/2} − |K̂_∞(s,t)|²`.
    pub upper_bound: f64,
    pub within_bound: bool,
}

/// Exact increment energies by the pairwise class walk:
/// `E|D_n|² = m^{-(n+1)} Σ_{w∈W_{n+1}} |M̂_{n+1}(w) − M̂_n(w|n)|²`,
/// checked against the orthogonality telescoping
/// `Σ_{n<N} E|D_n|² = E|M̂_N|² − |M̂_0|²`.
pub fn square_function_exact<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    t: &S::Point,
    n_exact: usize,
) -> Result<SquareFunctionReport> {
    let sys = est.sys();
    let m = sys.branch_count() as f64;
    let classes = crate::tree::pair_class_walk(sys, s, t, n_exact)?;
    let mut increment_energy = Vec::with_capacity(n_exact);
    for n in 0..n_exact {
        let mut acc = 0.0;
        let parent_scale = m.powi(n as i32);
        for ((a, b), count) in classes[n].values() {
            let parent = est.value(a, b)? * Complex64::new(parent_scale, 0.0);
            for i in 0..sys.branch_count() {
                let child = est.value(&sys.branch(i, a), &sys.branch(i, b))?
                    * Complex64::new(parent_scale * m, 0.0);
                acc += count * (child - parent).norm_sqr();
            }
        }
        increment_energy.push(acc / m.powi(n as i32 + 1));
    }
    let mut second = 0.0;
    for ((a, b), count) in classes[n_exact].values() {
        let v = est.value(a, b)? * Complex64::new(m.powi(n_exact as i32), 0.0);
        second += count * v.norm_sqr();
    }
    second /= m.powi(n_exact as i32);
    let base = est.value(s, t)?.norm_sqr();
    let partial: f64 = increment_energy.iter().sum();
    let identity_residual = (partial - (second - base)).abs();

    let b_levels = n_exact.max(4).min(12);
    let bs = b_functional(est, s, b_levels)?;
    let bt = b_functional(est, t, b_levels)?;
    let upper_bound = (bs.sup_hat * bt.sup_hat).sqrt() - base;
    let scale = second.max(1.0);
    Ok(SquareFunctionReport {
        increment_energy,
        partial_sum: partial,
        second_moment: second,
        identity_residual,
        upper_bound,
        within_bound: partial <= upper_bound + 1e-10 * scale,
    })
}

/// Monte-Carlo estimate of the total increment energy from sampled paths.
pub fn square_function_monte_carlo(samples: &[MartingaleSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for sample in samples {
        for n in 0..sample.values.len() - 1 {
            total += (sample.value(n + 1) - sample.value(n)).norm_sqr();
        }
    }
    total / samples.len() as f64
}

/// Residuals of the exact finite-depth cocycles.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CocycleCheck {
    /// `|M̂_{n+1}(s,t; i·ω) − m·M̂_n(φ_i s, φ_i t; ω)|`.
    pub prefix_residual: f64,
    /// Same with `i = ω_1` and the shifted tail.
    pub shift_residual: f64,
    /// Diagonal (boundary-factor) version of the shift identity at `s`.
    pub h_residual: f64,
    pub tail_allowance: f64,
}

/// Checks the prefix cocycle, its shift form, and the diagonal factor
/// relation at depth `n` along an explicit boundary prefix `ω` (length
/// ≥ n+1).
pub fn cocycle_check<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    t: &S::Point,
    n: usize,
    i: u8,
    omega: &Word,
) -> Result<CocycleCheck> {
    let sys = est.sys();
    let m = sys.branch_count();
    if (i as usize) >= m {
        return Err(Error::Invalid(format!("letter {i} outside alphabet of size {m}")));
    }
    if omega.len() < n + 1 {
        return Err(Error::Invalid(format!(
            "need a prefix of length at least {}, got {}",
            n + 1,
            omega.len()
        )));
    }
    let m_c = Complex64::new(m as f64, 0.0);

    // Prefix form at the explicit letter `i`.
    let omega_n = omega.prefix(n);
    let mut i_omega = Word::root().child(i);
    i_omega = i_omega.concat(&omega_n);
    let lhs = martingale_value(est, s, t, &i_omega)?;
    let rhs = martingale_value(est, &sys.branch(i as usize, s), &sys.branch(i as usize, t), &omega_n)?;
    let prefix_residual = (lhs - m_c * rhs).norm();

    // Shift form with the prefix's own first letter.
    let first = omega.letters()[0] as usize;
    let shifted = Word::from_letters(&omega.letters()[1..=n], m).expect("validated letters");
    let lhs_shift = martingale_value(est, s, t, &omega.prefix(n + 1))?;
    let rhs_shift =
        martingale_value(est, &sys.branch(first, s), &sys.branch(first, t), &shifted)?;
    let shift_residual = (lhs_shift - m_c * rhs_shift).norm();

    // Diagonal boundary factor along the same shift.
    let lhs_h = martingale_value(est, s, s, &omega.prefix(n + 1))?;
    let rhs_h = martingale_value(est, &sys.branch(first, s), &sys.branch(first, s), &shifted)?;
    let h_residual = (lhs_h - m_c * rhs_h).norm();

    let scale = (m as f64).powi(n as i32 + 1);
    let tail = est.estimate(s, t)?.tail_bound;
    Ok(CocycleCheck {
        prefix_residual,
        shift_residual,
        h_residual,
        tail_allowance: scale * 2.0 * tail + 1e-12,
    })
}

/// Per-path domination and normalization data on a point configuration.
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub path_seed: u64,
    pub depth: usize,
    /// `λ_min` of the sampled boundary Gram matrix.
    pub gram_lambda_min: f64,
    /// Max over pairs of `|M̂|² − h(s)h(t)` (should not exceed rounding).
    pub domination_excess: f64,
    /// Normalized boundary kernel on the configuration (zero where a
    /// diagonal factor vanishes).
    pub normalized: Vec<Vec<(f64, f64)>>,
    /// Max modulus of the normalized kernel.
    pub max_abs_normalized: f64,
    pub passed: bool,
}

/// Evaluates the boundary Gram matrix along one path at depth `n`, checks
/// pointwise domination by the diagonal factors and PSD-ness, and returns
/// the normalized kernel with the zero-denominator convention.
pub fn domination_and_normalize<S: KernelSystem>(
    est: &Completion<'_, S>,
    points: &[S::Point],
    path: &BoundaryPath,
    n: usize,
    rel_tol: f64,
) -> Result<DominationReport> {
    if points.is_empty() {
        return Err(Error::Invalid("empty point configuration".into()));
    }
    let prefix = path.prefix(n);
    let r = points.len();
    let mut values = vec![vec![Complex64::new(0.0, 0.0); r]; r];
    for a in 0..r {
        for b in 0..r {
            values[a][b] = martingale_value(est, &points[a], &points[b], &prefix)?;
        }
    }
    let h: Vec<f64> = (0..r).map(|a| values[a][a].re.max(0.0)).collect();
    let scale = h.iter().copied().fold(1.0f64, f64::max);

    let mut domination_excess = f64::NEG_INFINITY;
    let mut normalized = vec![vec![(0.0, 0.0); r]; r];
    let mut max_abs = 0.0f64;
    for a in 0..r {
        for b in 0..r {
            let hh = h[a] * h[b];
            domination_excess = domination_excess.max(values[a][b].norm_sqr() - hh);
            let k = if hh > 0.0 {
                values[a][b] / Complex64::new(hh.sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            normalized[a][b] = (k.re, k.im);
            max_abs = max_abs.max(k.norm());
        }
    }

    let keys: Vec<usize> = (0..r).collect();
    let entries = nalgebra::DMatrix::from_fn(r, r, |a, b| {
        // Hermitize rounding noise.
        (values[a][b] + values[b][a].conj()) * Complex64::new(0.5, 0.0)
    });
    let gram = crate::kernel::GramMatrix::new(keys, entries)?;
    let psd = gram.is_psd(rel_tol);

    let passed = psd.is_psd
        && domination_excess <= rel_tol * scale.powi(2).max(1.0)
        && max_abs <= 1.0 + rel_tol;
    Ok(DominationReport {
        path_seed: path.seed(),
        depth: n,
        gram_lambda_min: psd.lambda_min,
        domination_excess,
        normalized,
        max_abs_normalized: max_abs,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::CompletionParams;
    use crate::systems::FixtureE2;

    fn e2() -> FixtureE2 {
        FixtureE2::new()
    }

    fn est(sys: &FixtureE2) -> Completion<'_, FixtureE2> {
        Completion::new(sys, CompletionParams::default())
    }

    #[test]
    fn paths_are_reproducible_and_prefix_stable() {
        let a = BoundaryPath::new(99, 3);
        let b = BoundaryPath::new(99, 3);
        assert_eq!(a.prefix(50).letters(), b.prefix(50).letters());
        assert_eq!(
            a.prefix(10).letters(),
            &a.prefix(50).letters()[..10],
            "prefixes must be stable under extension"
        );
        let c = BoundaryPath::new(100, 3);
        assert_ne!(a.prefix(50).letters(), c.prefix(50).letters());
    }

    #[test]
    fn letters_cover_the_alphabet() {
        for m in 2..=4usize {
            let path = BoundaryPath::new(7, m);
            let mut seen = vec![false; m];
            for n in 0..1_000_000 {
                seen[path.letter(n) as usize] = true;
                if seen.iter().all(|&x| x) {
                    break;
                }
            }
            assert!(seen.iter().all(|&x| x), "m={m}");
        }
    }

    #[test]
    fn constant_martingale_on_e2() {
        let sys = e2();
        let est = est(&sys);
        let path = BoundaryPath::new(1, 2);
        let expect = (0.3f64 * 0.9).sqrt();
        for n in 0..12 {
            let v = martingale_value(&est, &0.3, &0.9, &path.prefix(n)).unwrap();
            assert!((v.re - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn one_step_identity_is_exact() {
        let sys = e2();
        let est = est(&sys);
        for n in 0..6 {
            for w in words_of_length(n, 2) {
                let check = martingale_step_check(&est, &0.25, &1.0, &w).unwrap();
                assert!(check.residual <= check.tail_allowance + 1e-10);
            }
        }
    }

    #[test]
    fn enumerated_mean_recovers_completion() {
        let sys = e2();
        let est = est(&sys);
        for n in 0..=5 {
            let mean = martingale_mean_enumerated(&est, &0.25, &1.0, n).unwrap();
            assert!((mean.re - 0.5).abs() <= 1e-12, "n={n}");
        }
    }

    #[test]
    fn b_functional_is_square_of_diagonal_on_e2() {
        let sys = e2();
        let est = est(&sys);
        let rep = b_functional(&est, &0.5, 8).unwrap();
        for level in &rep.levels {
            assert!((level - 0.25).abs() < 1e-13);
        }
        assert!((rep.sup - 0.25).abs() < 1e-13);
        assert!(rep.certified);
        // Forward bound under one branch: B(φ_k s) ≤ B(s)/m.
        let fwd = b_functional(&est, &0.25, 8).unwrap();
        assert!(fwd.sup <= rep.sup / 2.0 + 1e-13);
    }

    #[test]
    fn b_matches_enumerated_second_moments() {
        let sys = e2();
        let est = est(&sys);
        let rep = b_functional(&est, &0.7, 5).unwrap();
        for n in 0..=5 {
            let exact = diagonal_second_moment_enumerated(&est, &0.7, n).unwrap();
            assert!((rep.levels[n] - exact).abs() <= 1e-12 * exact.max(1.0));
        }
    }

    #[test]
    fn zero_diagonal_gives_zero_b() {
        let sys = e2();
        let est = est(&sys);
        let rep = b_functional(&est, &0.0, 6).unwrap();
        assert_eq!(rep.sup, 0.0);
    }

    #[test]
    fn gamma_is_one_on_e2() {
        let sys = e2();
        let est = est(&sys);
        let levels = gamma_comparability(&est, &0.6, 6).unwrap();
        for level in &levels {
            assert!((level.gamma.finite().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_requires_finiteness() {
        let e1 = crate::systems::FixtureE1::new(2).unwrap();
        let est = Completion::new(&e1, CompletionParams::default());
        assert!(gamma_comparability(&est, &(), 3).is_err());
    }

    #[test]
    fn simulation_is_deterministic_and_exact_on_e2() {
        let sys = e2();
        let est1 = est(&sys);
        let (samples1, report1) = simulate_boundary(&est1, &0.3, &0.9, 10, 64, 42).unwrap();
        let est2 = est(&sys);
        let (samples2, report2) = simulate_boundary(&est2, &0.3, &0.9, 10, 64, 42).unwrap();
        assert_eq!(samples1.len(), samples2.len());
        for (a, b) in samples1.iter().zip(&samples2) {
            assert_eq!(a.path_seed, b.path_seed);
            assert_eq!(a.values, b.values);
        }
        assert_eq!(report1.empirical_mean, report2.empirical_mean);

        let expect = (0.3f64 * 0.9).sqrt();
        assert!((report1.empirical_mean.0 - expect).abs() < 1e-12);
        assert!(report1.cauchy_diagnostic < 1e-12);
        assert!(report1.standard_error < 1e-12);
    }

    #[test]
    fn square_function_vanishes_on_e2() {
        let sys = e2();
        let est = est(&sys);
        let rep = square_function_exact(&est, &0.4, &0.8, 4).unwrap();
        assert!(rep.partial_sum.abs() < 1e-12);
        assert!(rep.identity_residual < 1e-12);
        assert!(rep.within_bound);
        assert!(rep.upper_bound.abs() < 1e-12);
    }

    #[test]
    fn cocycle_residuals_vanish_on_e2() {
        let sys = e2();
        let est = est(&sys);
        let path = BoundaryPath::new(5, 2);
        for n in 0..=10 {
            let omega = path.prefix(n + 1);
            let check = cocycle_check(&est, &0.3, &0.9, n, 1, &omega).unwrap();
            assert!(check.prefix_residual <= 1e-12, "n={n}");
            assert!(check.shift_residual <= 1e-12);
            assert!(check.h_residual <= 1e-12);
        }
    }

    #[test]
    fn domination_is_equality_on_e2() {
        let sys = e2();
        let est = est(&sys);
        let path = BoundaryPath::new(11, 2);
        let rep =
            domination_and_normalize(&est, &[0.2, 0.5, 0.9], &path, 6, tol::PSD_REL).unwrap();
        assert!(rep.passed);
        assert!(rep.domination_excess.abs() <= 1e-12);
        for row in &rep.normalized {
            for &(re, im) in row {
                assert!((re - 1.0).abs() <= 1e-10 && im.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn normalization_zero_convention() {
        let sys = e2();
        let est = est(&sys);
        let path = BoundaryPath::new(3, 2);
        let rep = domination_and_normalize(&est, &[0.0, 0.5], &path, 4, tol::PSD_REL).unwrap();
        assert_eq!(rep.normalized[0][1], (0.0, 0.0));
        assert_eq!(rep.normalized[0][0], (0.0, 0.0));
        assert!((rep.normalized[1][1].0 - 1.0).abs() < 1e-12);
        assert!(rep.passed);
    }

    #[test]
    fn h_mean_matches_diagonal_limit() {
        let sys = e2();
        let completion = est(&sys);
        // Finite-level enumeration.
        for n in 0..=5 {
            let mean = martingale_mean_enumerated(&completion, &0.6, &0.6, n).unwrap();
            assert!((mean.re - 0.6).abs() < 1e-12);
        }
        // Monte Carlo at the deepest level.
        let (samples, _) = simulate_boundary(&completion, &0.6, &0.6, 12, 256, 7).unwrap();
        let mc: f64 = samples.iter().map(|p| p.last().re).sum::<f64>() / samples.len() as f64;
        assert!((mc - 0.6).abs() < 1e-10);
    }
}
