//! The canonical conductance network on the word tree: diagonal increments,
//! edge conductances, cutset masses, and the level telescoping identity.
//!
//! Level sums are never computed by materializing `W_k`; reachable points
//! are walked per level with path multiplicities (multiplicities are exact
//! in `f64` up to `2^53` and lose at most ~1e-16 relative beyond, which the
//! divergence verdicts tolerate).

use crate::error::{Error, Result};
use crate::kernel::{diagonal, TowerCache};
use crate::system::{words_of_length, KernelSystem, Word};
use crate::tol;
use indexmap::IndexMap;
use std::cell::Cell;

/// One level of the reachability walk: point classes with multiplicities.
///
/// Insertion-ordered so that sums over classes are reproducible run to run.
pub type LevelClasses<P, K> = IndexMap<K, (P, f64)>;

/// Walks `levels + 1` levels of the word tree from `start`, collapsing
/// words by point key. Entry `k` maps each reachable key to a
/// representative point and the number of length-`k` words landing on it.
pub fn class_walk<S: KernelSystem>(
    sys: &S,
    start: &S::Point,
    levels: usize,
) -> Result<Vec<LevelClasses<S::Point, S::Key>>> {
    let mut out = Vec::with_capacity(levels + 1);
    let mut current: LevelClasses<S::Point, S::Key> = IndexMap::new();
    current.insert(sys.key(start), (start.clone(), 1.0));
    out.push(current.clone());
    for depth in 1..=levels {
        let mut next: LevelClasses<S::Point, S::Key> = IndexMap::new();
        for (point, count) in current.values() {
            for i in 0..sys.branch_count() {
                let image = sys.branch(i, point);
                let entry = next
                    .entry(sys.key(&image))
                    .or_insert_with(|| (image.clone(), 0.0));
                entry.1 += count;
            }
        }
        if next.len() > tol::ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded {
                budget: tol::ENUMERATION_BUDGET,
                depth,
            });
        }
        current = next;
        out.push(current.clone());
    }
    Ok(out)
}

/// Same walk over pairs `(φ_w s, φ_w t)` driven by a single word.
pub fn pair_class_walk<S: KernelSystem>(
    sys: &S,
    s: &S::Point,
    t: &S::Point,
    levels: usize,
) -> Result<Vec<LevelClasses<(S::Point, S::Point), (S::Key, S::Key)>>> {
    let mut out = Vec::with_capacity(levels + 1);
    let mut current: LevelClasses<(S::Point, S::Point), (S::Key, S::Key)> = IndexMap::new();
    current.insert(
        (sys.key(s), sys.key(t)),
        ((s.clone(), t.clone()), 1.0),
    );
    out.push(current.clone());
    for depth in 1..=levels {
        let mut next: LevelClasses<(S::Point, S::Point), (S::Key, S::Key)> = IndexMap::new();
        for ((a, b), count) in current.values() {
            for i in 0..sys.branch_count() {
                let ia = sys.branch(i, a);
                let ib = sys.branch(i, b);
                let entry = next
                    .entry((sys.key(&ia), sys.key(&ib)))
                    .or_insert_with(|| ((ia.clone(), ib.clone()), 0.0));
                entry.1 += count;
            }
        }
        if next.len() > tol::ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded {
                budget: tol::ENUMERATION_BUDGET,
                depth,
            });
        }
        current = next;
        out.push(current.clone());
    }
    Ok(out)
}

/// Edge weights of the canonical network rooted at a basepoint.
///
/// The node `w` carries the increment `a_s(w) = u_{|w|+1}(φ_w s) -
/// u_{|w|}(φ_w s)`, and each of its `m` outgoing edges the conductance
/// `a_s(w) / m^{|w|+1}`. Increments depend only on (point key, depth), so
/// the weighting works per class. Tiny negative increments (floating
/// cancellation) are clipped to zero and counted.
pub struct EdgeWeighting<'a, S: KernelSystem> {
    sys: &'a S,
    clip_count: Cell<u64>,
}

impl<'a, S: KernelSystem> EdgeWeighting<'a, S> {
    pub fn new(sys: &'a S) -> Self {
        EdgeWeighting {
            sys,
            clip_count: Cell::new(0),
        }
    }

    /// Increment carried by a node at `point` and depth `level`.
    pub fn increment_at(
        &self,
        cache: &mut TowerCache<S::Key>,
        point: &S::Point,
        level: usize,
    ) -> Result<f64> {
        let hi = diagonal(self.sys, cache, level + 1, point)?;
        let lo = diagonal(self.sys, cache, level, point)?;
        let d = hi - lo;
        if d < 0.0 {
            if d < -tol::INCREMENT_CLIP_REL * hi.abs().max(1.0) {
                return Err(Error::BrokenSubinvariance { value: d, level });
            }
            self.clip_count.set(self.clip_count.get() + 1);
            return Ok(0.0);
        }
        Ok(d)
    }

    /// Conductance of the edges leaving a node at `point`, depth `level`.
    pub fn conductance_at(
        &self,
        cache: &mut TowerCache<S::Key>,
        point: &S::Point,
        level: usize,
    ) -> Result<f64> {
        let a = self.increment_at(cache, point, level)?;
        Ok(a / (self.sys.branch_count() as f64).powi(level as i32 + 1))
    }

    /// How many negative increments were clipped to zero so far.
    pub fn clipped(&self) -> u64 {
        self.clip_count.get()
    }
}

/// The increment `a_s(w)` at an explicit word.
pub fn increment<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    w: &Word,
) -> Result<f64> {
    let weighting = EdgeWeighting::new(sys);
    let point = sys.apply_word(w, s);
    weighting.increment_at(cache, &point, w.len())
}

/// Total increment mass of level `k`: `Σ_{w∈W_k} a_s(w)`, via the class
/// walk.
pub fn level_mass<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    k: usize,
) -> Result<f64> {
    let classes = class_walk(sys, s, k)?;
    level_mass_from_classes(sys, cache, &classes[k], k)
}

pub(crate) fn level_mass_from_classes<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    classes: &LevelClasses<S::Point, S::Key>,
    k: usize,
) -> Result<f64> {
    let weighting = EdgeWeighting::new(sys);
    let mut total = 0.0;
    for (point, count) in classes.values() {
        total += count * weighting.increment_at(cache, point, k)?;
    }
    Ok(total)
}

/// Brute-force level mass by enumerating `W_k`; the oracle for
/// [`level_mass`], limited to enumerable levels.
pub fn level_mass_enumerated<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    k: usize,
) -> Result<f64> {
    let m = sys.branch_count();
    if m.checked_pow(k as u32).map_or(true, |c| c > tol::ENUMERATION_BUDGET) {
        return Err(Error::BudgetExceeded {
            budget: tol::ENUMERATION_BUDGET,
            depth: k,
        });
    }
    let mut total = 0.0;
    for w in words_of_length(k, m) {
        total += increment(sys, cache, s, &w)?;
    }
    Ok(total)
}

/// Total conductance of the level-`k` cutset:
/// `C_k(s) = m^{-k} Σ_{w∈W_k} a_s(w)`.
pub fn cutset_conductance<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    k: usize,
) -> Result<f64> {
    let mass = level_mass(sys, cache, s, k)?;
    Ok(mass / (sys.branch_count() as f64).powi(k as i32))
}

/// Relative residual of the level identity
/// `Σ_{w∈W_k} a_s(w) = u_{2k+1}(s) - u_{2k}(s)`.
pub fn telescoping_check<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    k: usize,
) -> Result<f64> {
    let mass = level_mass(sys, cache, s, k)?;
    let hi = diagonal(sys, cache, 2 * k + 1, s)?;
    let lo = diagonal(sys, cache, 2 * k, s)?;
    Ok((mass - (hi - lo)).abs() / hi.abs().max(1.0))
}
