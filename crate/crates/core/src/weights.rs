//! Cylinder weights on the boundary and the weighted kernels they induce.
//!
//! A depth-`r` cylinder weight depends only on the first `r` letters, so
//! every boundary integral collapses to a finite sum over `W_r`: by the
//! martingale property, `∫ f·M_∞ dμ = ∫ f·M_r dμ = Σ_{w∈W_r} f(w)
//! K̂_∞(φ_w s, φ_w t)`. The reduction is cross-checked against exact
//! enumeration of `∫ f·M_n dμ` at depths `r, r+1, r+2` before anything
//! relies on it (see `closed_form_matches_integrals`).

use crate::boundary::b_functional;
use crate::completion::Completion;
use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, PsdReport};
use crate::system::{words_of_length, KernelSystem, Word};
use crate::tol;
use crate::tree::pair_class_walk;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A nonnegative weight on boundary words depending on the first `depth`
/// letters; `depth = 0` is a constant weight.
///
/// Tables are indexed lexicographically, first letter most significant
/// (the index of `w` is [`Word::level_index`]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CylinderWeight {
    depth: usize,
    table: Vec<f64>,
}

impl CylinderWeight {
    pub fn new(m: usize, depth: usize, table: Vec<f64>) -> Result<Self> {
        let expected = m
            .checked_pow(depth as u32)
            .filter(|&c| c <= tol::ENUMERATION_BUDGET)
            .ok_or(Error::BudgetExceeded {
                budget: tol::ENUMERATION_BUDGET,
                depth,
            })?;
        if table.len() != expected {
            return Err(Error::WeightDomain {
                reason: format!(
                    "depth-{depth} table over {m} letters needs {expected} entries, got {}",
                    table.len()
                ),
            });
        }
        if let Some(&bad) = table.iter().find(|&&v| !(v >= 0.0)) {
            return Err(Error::WeightDomain {
                reason: format!("weight entries must be nonnegative, got {bad}"),
            });
        }
        Ok(CylinderWeight { depth, table })
    }

    pub fn constant(value: f64) -> Result<Self> {
        CylinderWeight::new(1, 0, vec![value])
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Value on the cylinder of a word with at least `depth` letters.
    pub fn at(&self, w: &Word, m: usize) -> f64 {
        self.table[w.prefix(self.depth).level_index(m)]
    }

    pub fn max(&self) -> f64 {
        self.table.iter().copied().fold(0.0, f64::max)
    }

    /// The shifted weight `f∘σ`: depth grows by one and
    /// `(f∘σ)(i·w) = f(w)`, i.e. the table is `m` concatenated copies.
    pub fn shift(&self, m: usize) -> Result<Self> {
        let mut table = Vec::with_capacity(self.table.len() * m);
        for _ in 0..m {
            table.extend_from_slice(&self.table);
        }
        CylinderWeight::new(m, self.depth + 1, table)
    }

    /// Reinterprets the weight at a larger depth (each entry repeats over
    /// the appended letters).
    pub fn lift_to(&self, m: usize, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::WeightDomain {
                reason: format!("cannot lift depth {} to {}", self.depth, depth),
            });
        }
        let copies = m.pow((depth - self.depth) as u32);
        let mut table = Vec::with_capacity(self.table.len() * copies);
        for &v in &self.table {
            table.extend(std::iter::repeat(v).take(copies));
        }
        CylinderWeight::new(m, depth, table)
    }

    /// Entrywise comparison after lifting to a common depth.
    pub fn leq(&self, other: &Self, m: usize) -> Result<bool> {
        let depth = self.depth.max(other.depth);
        let a = self.lift_to(m, depth)?;
        let b = other.lift_to(m, depth)?;
        Ok(a.table.iter().zip(&b.table).all(|(x, y)| x <= y))
    }

    /// The shift-supremum `f* = sup_n f∘σⁿ`.
    ///
    /// Almost every boundary word contains every finite word in its tail,
    /// so for a cylinder weight the supremum is a.e. the constant
    /// `max_w f(w)`.
    pub fn shift_supremum(&self) -> Result<Self> {
        CylinderWeight::constant(self.max())
    }
}

fn require_second_moment<S: KernelSystem>(
    est: &Completion<'_, S>,
    x: &S::Point,
) -> Result<()> {
    let report = b_functional(est, x, 8)?;
    if !report.certified {
        return Err(Error::NotCertified {
            reason: "second-moment functional not certified at a weighted-kernel argument".into(),
        });
    }
    Ok(())
}

/// The domain mass `∫ f·h(x;·) dμ = Σ_{w∈W_r} f(w)·u_∞(φ_w x)`, always a
/// finite sum for cylinder weights.
pub fn domain_mass<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &CylinderWeight,
    x: &S::Point,
) -> Result<f64> {
    let sys = est.sys();
    let m = sys.branch_count();
    let mut total = 0.0;
    for w in words_of_length(f.depth(), m) {
        let point = sys.apply_word(&w, x);
        let (u, _) = est.diagonal_bounds(&point)?;
        total += f.at(&w, m) * u;
    }
    Ok(total)
}

/// The weighted boundary kernel
/// `J_f(s,t) = Σ_{w∈W_r} f(w)·K̂_∞(φ_w s, φ_w t)`.
///
/// Both arguments must carry the second-moment certificate; the domain
/// masses are finite automatically for cylinder weights.
pub fn weighted_kernel<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &CylinderWeight,
    s: &S::Point,
    t: &S::Point,
) -> Result<Complex64> {
    require_second_moment(est, s)?;
    require_second_moment(est, t)?;
    weighted_kernel_unchecked(est, f, s, t)
}

fn weighted_kernel_unchecked<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &CylinderWeight,
    s: &S::Point,
    t: &S::Point,
) -> Result<Complex64> {
    let sys = est.sys();
    let m = sys.branch_count();
    let mut total = Complex64::new(0.0, 0.0);
    for w in words_of_length(f.depth(), m) {
        let weight = f.at(&w, m);
        if weight == 0.0 {
            continue;
        }
        let value = est.value(&sys.apply_word(&w, s), &sys.apply_word(&w, t))?;
        total += value * Complex64::new(weight, 0.0);
    }
    Ok(total)
}

/// Exact enumeration of `∫ f·M̂_n dμ = Σ_{v∈W_n} f(v) K̂_∞(φ_v s, φ_v t)`
/// for `n ≥ depth(f)`; the oracle behind the closed form.
pub fn weighted_integral_enumerated<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &CylinderWeight,
    s: &S::Point,
    t: &S::Point,
    n: usize,
) -> Result<Complex64> {
    let sys = est.sys();
    let m = sys.branch_count();
    if n < f.depth() {
        return Err(Error::Invalid(format!(
            "integral depth {n} below the cylinder depth {}",
            f.depth()
        )));
    }
    if m.checked_pow(n as u32).map_or(true, |c| c > tol::ENUMERATION_BUDGET) {
        return Err(Error::BudgetExceeded {
            budget: tol::ENUMERATION_BUDGET,
            depth: n,
        });
    }
    let mut total = Complex64::new(0.0, 0.0);
    for v in words_of_length(n, m) {
        let weight = f.at(&v, m);
        if weight == 0.0 {
            continue;
        }
        let value = est.value(&sys.apply_word(&v, s), &sys.apply_word(&v, t))?;
        total += value * Complex64::new(weight, 0.0);
    }
    Ok(total)
}

/// `(Lⁿ J_f)(s,t) = Σ_{v∈W_n} J_f(φ_v s, φ_v t)`, collapsed over pair
/// classes.
pub fn pullback_weighted<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &CylinderWeight,
    s: &S::Point,
    t: &S::Point,
    n: usize,
) -> Result<Complex64> {
    let sys = est.sys();
    let classes = pair_class_walk(sys, s, t, n)?;
    let mut total = Complex64::new(0.0, 0.0);
    for ((a, b), count) in classes[n].values() {
        total += weighted_kernel_unchecked(est, f, a, b)? * Complex64::new(*count, 0.0);
    }
    Ok(total)
}

/// Max relative residual of the shift identity `(L J_f) = J_{f∘σ}` over a
/// sample.
pub fn shift_identity_check<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &CylinderWeight,
    sample: &[S::Point],
) -> Result<f64> {
    let shifted = f.shift(est.sys().branch_count())?;
    let mut worst = 0.0f64;
    for s in sample {
        for t in sample {
            let lhs = pullback_weighted(est, f, s, t, 1)?;
            let rhs = weighted_kernel(est, &shifted, s, t)?;
            worst = worst.max((lhs - rhs).norm() / rhs.norm().max(1.0));
        }
    }
    Ok(worst)
}

/// Loewner comparison `J_f ≤ J_g` on a sample for `f ≤ g`.
pub fn monotonicity_check<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &CylinderWeight,
    g: &CylinderWeight,
    sample: &[S::Point],
) -> Result<PsdReport> {
    let m = est.sys().branch_count();
    if !f.leq(g, m)? {
        return Err(Error::WeightDomain {
            reason: "monotonicity requires f ≤ g entrywise".into(),
        });
    }
    let gram = GramMatrix::from_evaluator(est.sys(), sample, |s, t| {
        Ok(weighted_kernel_unchecked(est, g, s, t)? - weighted_kernel_unchecked(est, f, s, t)?)
    })?;
    Ok(gram.is_psd(tol::PSD_REL))
}

/// Report of the shift-supremum majorant checks.
#[derive(Debug, Clone, Serialize)]
pub struct StarMajorantReport {
    /// `max_w f(w)`; the shift-supremum weight is this constant.
    pub f_star: f64,
    /// `λ_min` of `Gram(J_{f*} − Lⁿ J_f)` for each `n ≤ n_max`.
    pub orbit_lambda_min: Vec<f64>,
    /// `λ_min` of `Gram(J_{f*} − L J_{f*})`.
    pub superharmonic_lambda_min: f64,
    pub passed: bool,
}

/// Checks `Lⁿ J_f ≤ J_{f*}` for `n ≤ n_max` and `L J_{f*} ≤ J_{f*}` as
/// Gram inequalities on a sample.
pub fn star_weight_majorant<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &CylinderWeight,
    n_max: usize,
    sample: &[S::Point],
) -> Result<StarMajorantReport> {
    let sys = est.sys();
    let star = f.shift_supremum()?;
    let gram_star = GramMatrix::from_evaluator(sys, sample, |s, t| {
        weighted_kernel_unchecked(est, &star, s, t)
    })?;

    let mut orbit_lambda_min = Vec::with_capacity(n_max + 1);
    let mut passed = true;
    for n in 0..=n_max {
        let gram_orbit = GramMatrix::from_evaluator(sys, sample, |s, t| {
            pullback_weighted(est, f, s, t, n)
        })?;
        let cmp = gram_star.loewner_geq(&gram_orbit, tol::PSD_REL)?;
        passed &= cmp.is_psd;
        orbit_lambda_min.push(cmp.lambda_min);
    }

    let gram_pulled_star = GramMatrix::from_evaluator(sys, sample, |s, t| {
        pullback_weighted(est, &star, s, t, 1)
    })?;
    let superharmonic = gram_star.loewner_geq(&gram_pulled_star, tol::PSD_REL)?;
    passed &= superharmonic.is_psd;

    Ok(StarMajorantReport {
        f_star: star.max(),
        orbit_lambda_min,
        superharmonic_lambda_min: superharmonic.lambda_min,
        passed,
    })
}
