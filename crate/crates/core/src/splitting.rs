//! Gram-level verification of the splitting structure of the completed
//! kernel: levelwise invariance, word operators on spans of kernel
//! sections, and the Parseval identity.
//!
//! The Hilbert space itself is never materialized; every identity is
//! evaluated through Gram matrices of the completed kernel on finite
//! supports.

use crate::completion::Completion;
use crate::error::{Error, Result};
use crate::system::{words_of_length, KernelSystem, Word};
use crate::tol;
use crate::tree::pair_class_walk;
use indexmap::IndexMap;
use num_complex::Complex64;

/// A finite combination of kernel sections `f = Σ_α c_α k_{s_α}`.
#[derive(Debug, Clone)]
pub struct SectionVector<P> {
    support: Vec<P>,
    coefficients: Vec<Complex64>,
}

impl<P: Clone> SectionVector<P> {
    pub fn new(support: Vec<P>, coefficients: Vec<Complex64>) -> Result<Self> {
        if support.len() != coefficients.len() {
            return Err(Error::Invalid(format!(
                "{} support points but {} coefficients",
                support.len(),
                coefficients.len()
            )));
        }
        Ok(SectionVector {
            support,
            coefficients,
        })
    }

    /// The single section `k_s`.
    pub fn section(point: P) -> Self {
        SectionVector {
            support: vec![point],
            coefficients: vec![Complex64::new(1.0, 0.0)],
        }
    }

    pub fn support(&self) -> &[P] {
        &self.support
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Formal sum (concatenated supports; no key-merging needed for norm
    /// computations).
    pub fn add(&self, other: &Self) -> Self {
        let mut support = self.support.clone();
        support.extend_from_slice(&other.support);
        let mut coefficients = self.coefficients.clone();
        coefficients.extend_from_slice(&other.coefficients);
        SectionVector {
            support,
            coefficients,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        SectionVector {
            support: self.support.clone(),
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Pointwise evaluation `f(x) = Σ_α c_α K̂_∞(x, s_α)`.
pub fn section_eval<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &SectionVector<S::Point>,
    x: &S::Point,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (point, c) in f.support.iter().zip(&f.coefficients) {
        acc += c * est.value(x, point)?;
    }
    Ok(acc)
}

/// Inner product `⟨f, g⟩ = Σ_{α,β} conj(d_β) c_α K̂_∞(t_β, s_α)`.
pub fn section_inner<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &SectionVector<S::Point>,
    g: &SectionVector<S::Point>,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, d) in g.support.iter().zip(&g.coefficients) {
        for (s, c) in f.support.iter().zip(&f.coefficients) {
            acc += d.conj() * c * est.value(t, s)?;
        }
    }
    Ok(acc)
}

/// Squared norm `c* G c`; tiny negative rounding is clipped.
pub fn section_norm_sq<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &SectionVector<S::Point>,
) -> Result<f64> {
    let value = section_inner(est, f, f)?;
    if value.re < -1e-10 * value.re.abs().max(1.0) {
        return Err(Error::NotPsd {
            lambda_min: value.re,
        });
    }
    Ok(value.re.max(0.0))
}

/// The word operator on sections: `S_w (Σ c_α k_{s_α}) = Σ c_α k_{φ_w s_α}`.
pub fn word_operator_apply<S: KernelSystem>(
    sys: &S,
    w: &Word,
    f: &SectionVector<S::Point>,
) -> SectionVector<S::Point> {
    SectionVector {
        support: f.support.iter().map(|p| sys.apply_word(w, p)).collect(),
        coefficients: f.coefficients.clone(),
    }
}

/// Relative residual of levelwise invariance
/// `Σ_{w∈W_n} K̂_∞(φ_w s, φ_w t) = K̂_∞(s, t)`, collapsed over pair classes.
pub fn level_invariance_residual<S: KernelSystem>(
    est: &Completion<'_, S>,
    s: &S::Point,
    t: &S::Point,
    n: usize,
) -> Result<f64> {
    let base = est.estimate(s, t)?;
    let classes = pair_class_walk(est.sys(), s, t, n)?;
    let mut pulled = Complex64::new(0.0, 0.0);
    for ((a, b), count) in classes[n].values() {
        pulled += est.value(a, b)? * Complex64::new(*count, 0.0);
    }
    Ok((pulled - base.value()).norm() / base.value().norm().max(1.0))
}

/// `(V* (f_1, …, f_m))(s) = Σ_i f_i(φ_i s)`.
pub fn vstar_apply<S: KernelSystem>(
    est: &Completion<'_, S>,
    components: &[SectionVector<S::Point>],
    s: &S::Point,
) -> Result<Complex64> {
    let sys = est.sys();
    if components.len() != sys.branch_count() {
        return Err(Error::Invalid(format!(
            "expected {} components, got {}",
            sys.branch_count(),
            components.len()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, f) in components.iter().enumerate() {
        acc += section_eval(est, f, &sys.branch(i, s))?;
    }
    Ok(acc)
}

/// Relative residual of the Parseval identity
/// `Σ_{w∈W_n} ‖S_w f‖² = ‖f‖²`, with words collapsed by the keys of the
/// pushed support tuple.
pub fn parseval_residual<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &SectionVector<S::Point>,
    n: usize,
) -> Result<f64> {
    let sys = est.sys();
    let norm = section_norm_sq(est, f)?;

    type Tuples<S> = IndexMap<
        Vec<<S as KernelSystem>::Key>,
        (Vec<<S as KernelSystem>::Point>, f64),
    >;
    let mut classes: Tuples<S> = IndexMap::new();
    classes.insert(
        f.support.iter().map(|p| sys.key(p)).collect(),
        (f.support.to_vec(), 1.0),
    );
    for depth in 1..=n {
        let mut next: Tuples<S> = IndexMap::new();
        for (points, count) in classes.values() {
            for i in 0..sys.branch_count() {
                let pushed: Vec<S::Point> = points.iter().map(|p| sys.branch(i, p)).collect();
                let key: Vec<S::Key> = pushed.iter().map(|p| sys.key(p)).collect();
                let entry = next.entry(key).or_insert_with(|| (pushed.clone(), 0.0));
                entry.1 += count;
            }
        }
        if next.len() > tol::ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded {
                budget: tol::ENUMERATION_BUDGET,
                depth,
            });
        }
        classes = next;
    }

    let mut total = 0.0;
    for (points, count) in classes.values() {
        let pushed = SectionVector {
            support: points.clone(),
            coefficients: f.coefficients.clone(),
        };
        total += count * section_norm_sq(est, &pushed)?;
    }
    Ok((total - norm).abs() / norm.max(1.0))
}

/// Brute-force Parseval sum over explicit words; the enumeration oracle.
pub fn parseval_sum_enumerated<S: KernelSystem>(
    est: &Completion<'_, S>,
    f: &SectionVector<S::Point>,
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
    let mut total = 0.0;
    for w in words_of_length(n, m) {
        total += section_norm_sq(est, &word_operator_apply(sys, &w, f))?;
    }
    Ok(total)
}
