//! Kernel evaluation, the pullback operator, the monotone tower, and the
//! PSD / Loewner-order machinery used by every check in the crate.

use crate::error::{Error, Result};
use crate::system::{words_of_length, KernelSystem};
use crate::tol;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::collections::HashMap;

/// Pullback of an arbitrary kernel evaluator: `(LJ)(s,t) = Σ_i J(φ_i s, φ_i t)`.
///
/// Hermitian in `(s, t)` whenever `J` is; evaluation failures of `J`
/// propagate.
pub fn apply_l<S, J>(sys: &S, kernel: J, s: &S::Point, t: &S::Point) -> Result<Complex64>
where
    S: KernelSystem,
    J: Fn(&S::Point, &S::Point) -> Result<Complex64>,
{
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..sys.branch_count() {
        acc += kernel(&sys.branch(i, s), &sys.branch(i, t))?;
    }
    Ok(acc)
}

/// Memo of diagonal values `u_n(x)` and tower values `K_n(s,t)` keyed by
/// point keys and level.
///
/// The memo is what collapses the `m^n` word tree to (reachable keys) ×
/// depth; the budget guards systems whose keys never collide.
pub struct TowerCache<K> {
    diag: HashMap<(K, u32), f64>,
    pair: HashMap<(K, K, u32), Complex64>,
    budget: usize,
    steps: usize,
}

impl<K: std::hash::Hash + Eq + Clone> Default for TowerCache<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: std::hash::Hash + Eq + Clone> TowerCache<K> {
    pub fn new() -> Self {
        Self::with_budget(tol::ENUMERATION_BUDGET)
    }

    pub fn with_budget(budget: usize) -> Self {
        TowerCache {
            diag: HashMap::new(),
            pair: HashMap::new(),
            budget,
            steps: 0,
        }
    }

    fn charge(&mut self, amount: usize, depth: usize) -> Result<()> {
        self.steps = self.steps.saturating_add(amount);
        if self.steps > self.budget {
            Err(Error::BudgetExceeded {
                budget: self.budget,
                depth,
            })
        } else {
            Ok(())
        }
    }
}

/// Tower value `K_n(s,t) = (LⁿK)(s,t)`, computed by the memoized level
/// recursion `K_{n+1}(s,t) = Σ_i K_n(φ_i s, φ_i t)`; `K_0` is the seed.
pub fn tower_value<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    n: usize,
    s: &S::Point,
    t: &S::Point,
) -> Result<Complex64> {
    let key = (sys.key(s), sys.key(t), n as u32);
    if let Some(&v) = cache.pair.get(&key) {
        return Ok(v);
    }
    let value = if n == 0 {
        sys.seed(s, t)
    } else {
        cache.charge(sys.branch_count(), n)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..sys.branch_count() {
            acc += tower_value(sys, cache, n - 1, &sys.branch(i, s), &sys.branch(i, t))?;
        }
        acc
    };
    cache.pair.insert(key, value);
    Ok(value)
}

/// Diagonal `u_n(s) = K_n(s,s)`, kept as a real recursion
/// `u_{n+1}(x) = Σ_i u_n(φ_i x)`.
///
/// Negative values beyond tolerance signal a non-PSD seed.
pub fn diagonal<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    n: usize,
    s: &S::Point,
) -> Result<f64> {
    let key = (sys.key(s), n as u32);
    if let Some(&v) = cache.diag.get(&key) {
        return Ok(v);
    }
    let value = if n == 0 {
        let v = sys.seed(s, s);
        if v.im.abs() > tol::HERMITIAN_ABS {
            return Err(Error::NotHermitian {
                deviation: v.im.abs(),
                tol: tol::HERMITIAN_ABS,
            });
        }
        if v.re < -tol::HERMITIAN_ABS {
            return Err(Error::NotPsd { lambda_min: v.re });
        }
        v.re.max(0.0)
    } else {
        cache.charge(sys.branch_count(), n)?;
        let mut acc = 0.0;
        for i in 0..sys.branch_count() {
            acc += diagonal(sys, cache, n - 1, &sys.branch(i, s))?;
        }
        acc
    };
    cache.diag.insert(key, value);
    Ok(value)
}

/// Brute-force word sum `Σ_{w∈W_n} K(φ_w s, φ_w t)`; the enumeration oracle
/// for [`tower_value`]. Only for levels within the budget.
pub fn tower_value_enumerated<S: KernelSystem>(
    sys: &S,
    n: usize,
    s: &S::Point,
    t: &S::Point,
) -> Result<Complex64> {
    let m = sys.branch_count();
    let count = m.checked_pow(n as u32).filter(|&c| c <= tol::ENUMERATION_BUDGET);
    let Some(_) = count else {
        return Err(Error::BudgetExceeded {
            budget: tol::ENUMERATION_BUDGET,
            depth: n,
        });
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for w in words_of_length(n, m) {
        acc += sys.seed(&sys.apply_word(&w, s), &sys.apply_word(&w, t));
    }
    Ok(acc)
}

/// Outcome of a PSD check: verdict plus the extremal eigenvalues it used.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PsdReport {
    pub is_psd: bool,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub tol: f64,
}

/// Hermitian matrix of kernel values on an ordered finite point list.
///
/// The key list remembers which points the rows refer to, so Loewner
/// comparisons can reject mismatched samples.
#[derive(Debug, Clone)]
pub struct GramMatrix<K> {
    keys: Vec<K>,
    entries: DMatrix<Complex64>,
}

impl<K: Eq + Clone> GramMatrix<K> {
    /// Validates Hermitian symmetry (entrywise, absolute 1e-12) and wraps.
    pub fn new(keys: Vec<K>, entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != keys.len() || entries.ncols() != keys.len() {
            return Err(Error::Invalid(format!(
                "Gram dimension {}x{} does not match {} points",
                entries.nrows(),
                entries.ncols(),
                keys.len()
            )));
        }
        let mut deviation = 0.0f64;
        for i in 0..entries.nrows() {
            for j in 0..=i {
                let d = (entries[(i, j)] - entries[(j, i)].conj()).norm();
                deviation = deviation.max(d);
            }
        }
        if deviation > tol::HERMITIAN_ABS {
            return Err(Error::NotHermitian {
                deviation,
                tol: tol::HERMITIAN_ABS,
            });
        }
        Ok(GramMatrix { keys, entries })
    }

    /// Gram matrix of a kernel evaluator on a point sample.
    pub fn from_evaluator<S, F>(sys: &S, points: &[S::Point], mut eval: F) -> Result<Self>
    where
        S: KernelSystem<Key = K>,
        F: FnMut(&S::Point, &S::Point) -> Result<Complex64>,
    {
        let n = points.len();
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = eval(&points[i], &points[j])?;
                entries[(i, j)] = v;
                entries[(j, i)] = v.conj();
            }
        }
        // Hermitize the diagonal: evaluators may carry rounding-level
        // imaginary parts there.
        for i in 0..n {
            let d = entries[(i, i)];
            if d.im.abs() > tol::HERMITIAN_ABS {
                return Err(Error::NotHermitian {
                    deviation: d.im.abs(),
                    tol: tol::HERMITIAN_ABS,
                });
            }
            entries[(i, i)] = Complex64::new(d.re, 0.0);
        }
        GramMatrix::new(points.iter().map(|p| sys.key(p)).collect(), entries)
    }

    pub fn dim(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[K] {
        &self.keys
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Real eigenvalues of the Hermitian matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.keys.is_empty() {
            return Vec::new();
        }
        let eig = SymmetricEigen::new(self.entries.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    /// PSD verdict with scale-aware slack:
    /// `λ_min ≥ -tol · max(1, λ_max)`.
    pub fn is_psd(&self, rel_tol: f64) -> PsdReport {
        let vals = self.eigenvalues();
        let lambda_min = vals.first().copied().unwrap_or(0.0);
        let lambda_max = vals.last().copied().unwrap_or(0.0);
        PsdReport {
            is_psd: lambda_min >= -rel_tol * lambda_max.max(1.0),
            lambda_min,
            lambda_max,
            tol: rel_tol,
        }
    }

    /// Entrywise difference `self - other`; rejects mismatched point lists.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.keys != other.keys {
            return Err(Error::PointMismatch);
        }
        GramMatrix::new(self.keys.clone(), &self.entries - &other.entries)
    }

    /// Loewner comparison `self ≥ other`, i.e. PSD of the difference.
    pub fn loewner_geq(&self, other: &Self, rel_tol: f64) -> Result<PsdReport> {
        Ok(self.difference(other)?.is_psd(rel_tol))
    }
}

/// Report of the sampled subinvariance check `LK - K ⪰ 0`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SubinvarianceReport {
    pub passed: bool,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub tol: f64,
    pub sample_size: usize,
}

/// Builds the Gram matrix of `LK - K` on a sample and reports its PSD
/// status. A necessary-condition check on the sample, not a global proof.
pub fn verify_subinvariance<S: KernelSystem>(
    sys: &S,
    sample: &[S::Point],
    rel_tol: f64,
) -> Result<SubinvarianceReport> {
    if sample.is_empty() {
        return Err(Error::Invalid("empty sample".into()));
    }
    let gram = GramMatrix::from_evaluator(sys, sample, |s, t| {
        let lk = apply_l(sys, |a, b| Ok(sys.seed(a, b)), s, t)?;
        Ok(lk - sys.seed(s, t))
    })?;
    let report = gram.is_psd(rel_tol);
    Ok(SubinvarianceReport {
        passed: report.is_psd,
        lambda_min: report.lambda_min,
        lambda_max: report.lambda_max,
        tol: rel_tol,
        sample_size: sample.len(),
    })
}
