//! Unit flows, flow energy, effective resistance and capacity of the
//! canonical network, the level concentration constant, and the scalar
//! capacity series.
//!
//! The network is a tree, so the infimum of flow energy is attained by
//! nested series-parallel reduction (memoized per point class and depth);
//! an independent Dirichlet solve on the explicit tree is kept as an
//! oracle.

use crate::error::{Error, Result};
use crate::extended::ExtendedNonneg;
use crate::kernel::{diagonal, TowerCache};
use crate::system::{words_of_length, KernelSystem, Word};
use crate::tol;
use crate::tree::{class_walk, EdgeWeighting};
use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// A unit flow to a fixed depth, stored on explicit edges keyed by the
/// child word. Absent edges carry zero flow.
#[derive(Debug, Clone)]
pub struct FlowAssignment {
    m: usize,
    depth: usize,
    theta: IndexMap<Word, f64>,
}

impl FlowAssignment {
    /// Validates nonnegativity, the root normalization `Σ_i θ(∅,i) = 1`,
    /// and conservation at every internal vertex.
    pub fn new(m: usize, depth: usize, theta: IndexMap<Word, f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidFlow {
                reason: "flow depth must be at least 1".into(),
            });
        }
        if m.checked_pow(depth as u32).map_or(true, |c| c > tol::ENUMERATION_BUDGET) {
            return Err(Error::BudgetExceeded {
                budget: tol::ENUMERATION_BUDGET,
                depth,
            });
        }
        for (w, &v) in &theta {
            if w.is_empty() || w.len() > depth || w.letters().iter().any(|&l| (l as usize) >= m) {
                return Err(Error::InvalidFlow {
                    reason: format!("edge key {w} outside the depth-{depth} tree"),
                });
            }
            if !(v >= 0.0) {
                return Err(Error::InvalidFlow {
                    reason: format!("negative flow {v} on edge {w}"),
                });
            }
        }
        let flow = FlowAssignment { m, depth, theta };
        let root_total: f64 = (0..m).map(|i| flow.get(&Word::root().child(i as u8))).sum();
        if (root_total - 1.0).abs() > tol::FLOW_ABS {
            return Err(Error::InvalidFlow {
                reason: format!("root normalization sums to {root_total}, expected 1"),
            });
        }
        for len in 1..depth {
            for w in words_of_length(len, m) {
                let incoming = flow.get(&w);
                let outgoing: f64 = (0..m).map(|i| flow.get(&w.child(i as u8))).sum();
                if (incoming - outgoing).abs() > tol::FLOW_ABS {
                    return Err(Error::InvalidFlow {
                        reason: format!(
                            "conservation fails at {w}: in {incoming}, out {outgoing}"
                        ),
                    });
                }
            }
        }
        Ok(flow)
    }

    /// The uniform splitting flow `θ(w,wi) = m^{-(|w|+1)}`.
    pub fn uniform(m: usize, depth: usize) -> Result<Self> {
        let mut theta = IndexMap::new();
        for len in 1..=depth {
            let v = (m as f64).powi(-(len as i32));
            for w in words_of_length(len, m) {
                theta.insert(w, v);
            }
        }
        FlowAssignment::new(m, depth, theta)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn get(&self, child: &Word) -> f64 {
        self.theta.get(child).copied().unwrap_or(0.0)
    }
}

/// Energy `Σ_e θ(e)²/c(e)` of a unit flow, with zero flow on dead edges
/// contributing nothing and positive flow there an open circuit.
pub fn flow_energy<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    flow: &FlowAssignment,
) -> Result<ExtendedNonneg> {
    if flow.m != sys.branch_count() {
        return Err(Error::InvalidFlow {
            reason: format!(
                "flow has branching {} but the system has {}",
                flow.m,
                sys.branch_count()
            ),
        });
    }
    let weighting = EdgeWeighting::new(sys);
    let mut energy = ExtendedNonneg::ZERO;
    for (child, &theta) in &flow.theta {
        if theta == 0.0 {
            continue;
        }
        let parent = child.parent().expect("validated non-root");
        let point = sys.apply_word(&parent, s);
        let c = weighting.conductance_at(cache, &point, parent.len())?;
        energy = energy + ExtendedNonneg::energy_term(theta, c);
    }
    Ok(energy)
}

/// Per-level entry of a resistance report.
#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub k: usize,
    /// Cutset conductance `C_k(s)`.
    #[serde(rename = "C_k")]
    pub c_k: f64,
    /// Level concentration `(Σa)(Σ1/a)/m^{2k}`, or `"inf"`; absent on
    /// degenerate (zero-mass) levels.
    pub lambda_k: Option<ExtendedNonneg>,
    pub degenerate: bool,
}

/// Effective resistance to a depth together with the series bounds.
#[derive(Debug, Clone, Serialize)]
pub struct ResistanceReport {
    pub depth: usize,
    /// Exact series-parallel effective resistance `R_N(s)`.
    #[serde(rename = "R_N")]
    pub r_n: ExtendedNonneg,
    /// Cutset lower bound `S_N(s)`.
    #[serde(rename = "S_N")]
    pub s_n: ExtendedNonneg,
    /// Max level concentration over `k < N` when every level carries mass.
    #[serde(rename = "lambda")]
    pub lambda_max: Option<ExtendedNonneg>,
    /// `Λ·S_N`, present when the concentration constant is finite.
    pub upper_bound: Option<ExtendedNonneg>,
    #[serde(rename = "cap_N")]
    pub cap_n: ExtendedNonneg,
    pub per_level: Vec<LevelReport>,
}

/// Series resistance of the edge leaving depth `level` at `point`:
/// `m^{level+1} / a`, infinite on zero increments.
fn edge_resistance<S: KernelSystem>(
    sys: &S,
    weighting: &EdgeWeighting<'_, S>,
    cache: &mut TowerCache<S::Key>,
    point: &S::Point,
    level: usize,
) -> Result<ExtendedNonneg> {
    let a = weighting.increment_at(cache, point, level)?;
    if a == 0.0 {
        Ok(ExtendedNonneg::INFINITY)
    } else {
        Ok(ExtendedNonneg::new(
            (sys.branch_count() as f64).powi(level as i32 + 1) / a,
        ))
    }
}

/// Exact `R_N(s)` by bottom-up series-parallel reduction over point
/// classes: with `ρ(·, N) = 0`,
/// `ρ(x, j) = [Σ_i (r_edge(x,j) + ρ(φ_i x, j+1))^{-1}]^{-1}`.
pub fn effective_resistance_value<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    depth: usize,
) -> Result<ExtendedNonneg> {
    if depth == 0 {
        return Err(Error::Invalid("resistance depth must be at least 1".into()));
    }
    let classes = class_walk(sys, s, depth)?;
    let weighting = EdgeWeighting::new(sys);
    // ρ per key at the current level, starting from the shorted boundary.
    let mut rho: IndexMap<S::Key, ExtendedNonneg> = classes[depth]
        .keys()
        .map(|k| (k.clone(), ExtendedNonneg::ZERO))
        .collect();
    for j in (0..depth).rev() {
        let mut next: IndexMap<S::Key, ExtendedNonneg> = IndexMap::new();
        for (key, (point, _)) in &classes[j] {
            let r_edge = edge_resistance(sys, &weighting, cache, point, j)?;
            let mut conductance = ExtendedNonneg::ZERO;
            for i in 0..sys.branch_count() {
                let child = sys.branch(i, point);
                let child_rho = rho
                    .get(&sys.key(&child))
                    .copied()
                    .expect("child class present at next level");
                conductance = conductance + (r_edge + child_rho).recip();
            }
            next.insert(key.clone(), conductance.recip());
        }
        rho = next;
    }
    Ok(rho[&sys.key(s)])
}

/// Partial sum `S_N(s) = Σ_{k<N} m^k / (u_{2k+1}(s) - u_{2k}(s))`, with
/// zero denominators contributing `+∞`.
pub fn series_lower_bound<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    depth: usize,
) -> Result<ExtendedNonneg> {
    let mut total = ExtendedNonneg::ZERO;
    for k in 0..depth {
        total = total + series_term(sys, cache, s, k)?;
    }
    Ok(total)
}

fn series_term<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    k: usize,
) -> Result<ExtendedNonneg> {
    let hi = diagonal(sys, cache, 2 * k + 1, s)?;
    let lo = diagonal(sys, cache, 2 * k, s)?;
    if hi.is_infinite() {
        // The denominator has overflowed f64; the true term is below any
        // representable positive number.
        return Ok(ExtendedNonneg::ZERO);
    }
    let d = hi - lo;
    if d < -tol::INCREMENT_CLIP_REL * hi.abs().max(1.0) {
        return Err(Error::BrokenSubinvariance {
            value: d,
            level: 2 * k,
        });
    }
    if d <= 0.0 {
        return Ok(ExtendedNonneg::INFINITY);
    }
    Ok(ExtendedNonneg::new((sys.branch_count() as f64).powi(k as i32) / d))
}

/// Level concentration data for `k ≤ k_max`.
#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub per_level: Vec<LevelReport>,
    /// Max over non-degenerate levels; `None` when every level is
    /// degenerate.
    pub lambda_max: Option<ExtendedNonneg>,
    /// Whether some level up to `k_max` carries no increment mass.
    pub any_degenerate: bool,
}

/// Computes `(Σ_w a)(Σ_w 1/a)/m^{2k}` per level via the class walk.
pub fn concentration_lambda<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    k_max: usize,
) -> Result<ConcentrationReport> {
    let classes = class_walk(sys, s, k_max)?;
    let weighting = EdgeWeighting::new(sys);
    let m = sys.branch_count() as f64;
    let mut per_level = Vec::with_capacity(k_max + 1);
    let mut lambda_max: Option<ExtendedNonneg> = None;
    let mut any_degenerate = false;
    for (k, level) in classes.iter().enumerate().take(k_max + 1) {
        let mut mass = 0.0;
        let mut inv = ExtendedNonneg::ZERO;
        for (point, count) in level.values() {
            let a = weighting.increment_at(cache, point, k)?;
            mass += count * a;
            inv = inv
                + if a == 0.0 {
                    ExtendedNonneg::INFINITY
                } else {
                    ExtendedNonneg::new(count / a)
                };
        }
        if mass == 0.0 {
            any_degenerate = true;
            per_level.push(LevelReport {
                k,
                c_k: 0.0,
                lambda_k: None,
                degenerate: true,
            });
            continue;
        }
        let lambda = inv.scale(mass / m.powi(2 * k as i32));
        lambda_max = Some(match lambda_max {
            Some(prev) if prev >= lambda => prev,
            _ => lambda,
        });
        per_level.push(LevelReport {
            k,
            c_k: mass / m.powi(k as i32),
            lambda_k: Some(lambda),
            degenerate: false,
        });
    }
    Ok(ConcentrationReport {
        per_level,
        lambda_max,
        any_degenerate,
    })
}

/// Full resistance report: exact `R_N`, the series bound `S_N`, and the
/// concentration sandwich when the constant is finite.
pub fn effective_resistance<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    depth: usize,
) -> Result<ResistanceReport> {
    let r_n = effective_resistance_value(sys, cache, s, depth)?;
    let s_n = series_lower_bound(sys, cache, s, depth)?;
    let concentration = concentration_lambda(sys, cache, s, depth.saturating_sub(1))?;
    let lambda_max = if concentration.any_degenerate {
        None
    } else {
        concentration.lambda_max
    };
    let upper_bound = lambda_max.and_then(|l| l.finite().map(|lf| s_n.scale(lf)));
    Ok(ResistanceReport {
        depth,
        r_n,
        s_n,
        lambda_max,
        upper_bound,
        cap_n: r_n.recip(),
        per_level: concentration.per_level,
    })
}

/// Depth cap of the explicit Dirichlet oracle (dense solve).
pub const ORACLE_VERTEX_CAP: usize = 1 << 12;

/// Independent resistance oracle: solves the Dirichlet problem on the
/// explicit depth-`N` tree with all level-`N` vertices shorted into one
/// terminal, unit potential at the root; `R = 1/(current out of the
/// root)`. Disconnected (zero-conductance) configurations report `∞`.
pub fn resistance_oracle<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    depth: usize,
) -> Result<ExtendedNonneg> {
    if depth == 0 {
        return Err(Error::Invalid("resistance depth must be at least 1".into()));
    }
    let m = sys.branch_count();
    let mut level_offsets = Vec::with_capacity(depth);
    let mut total_words = 0usize;
    for k in 0..depth {
        level_offsets.push(total_words);
        let count = m
            .checked_pow(k as u32)
            .and_then(|c| total_words.checked_add(c).map(|t| (c, t)));
        match count {
            Some((_, t)) if t <= ORACLE_VERTEX_CAP => total_words = t,
            _ => {
                return Err(Error::BudgetExceeded {
                    budget: ORACLE_VERTEX_CAP,
                    depth,
                })
            }
        }
    }
    let terminal = total_words;

    // Points and edge conductances in level order.
    let weighting = EdgeWeighting::new(sys);
    let mut points: Vec<S::Point> = vec![s.clone()];
    let mut conductance: Vec<Vec<f64>> = Vec::with_capacity(total_words);
    {
        let mut level_points = vec![s.clone()];
        for k in 0..depth {
            let mut next = Vec::with_capacity(level_points.len() * m);
            for point in &level_points {
                let c = weighting.conductance_at(cache, point, k)?;
                conductance.push(vec![c; m]);
                for i in 0..m {
                    next.push(sys.branch(i, point));
                }
            }
            if k + 1 < depth {
                points.extend(next.iter().cloned());
            }
            level_points = next;
        }
    }
    let _ = points;

    let child_id = |vertex: usize, k: usize, i: usize| -> usize {
        if k + 1 == depth {
            terminal
        } else {
            let index_in_level = vertex - level_offsets[k];
            level_offsets[k + 1] + index_in_level * m + i
        }
    };
    let level_of = |vertex: usize| -> usize {
        (0..depth)
            .rev()
            .find(|&k| vertex >= level_offsets[k])
            .expect("vertex level")
    };

    // Vertices reachable from the root through positive conductances.
    let mut active = vec![false; total_words + 1];
    active[0] = true;
    let mut queue = vec![0usize];
    while let Some(v) = queue.pop() {
        let k = level_of(v);
        for i in 0..m {
            if conductance[v][i] > 0.0 {
                let c = child_id(v, k, i);
                if !active[c] {
                    active[c] = true;
                    if c != terminal {
                        queue.push(c);
                    }
                }
            }
        }
    }
    if !active[terminal] {
        return Ok(ExtendedNonneg::INFINITY);
    }

    // Unknown potentials: active vertices other than root and terminal.
    let mut unknown_index = vec![usize::MAX; total_words + 1];
    let mut n_unknown = 0usize;
    for v in 1..total_words {
        if active[v] {
            unknown_index[v] = n_unknown;
            n_unknown += 1;
        }
    }

    let mut a = DMatrix::<f64>::zeros(n_unknown, n_unknown);
    let mut rhs = DVector::<f64>::zeros(n_unknown);
    let add_edge = |u: usize, v: usize, c: f64, a: &mut DMatrix<f64>, rhs: &mut DVector<f64>| {
        // u, v are vertex ids; root potential 1, terminal potential 0.
        for (x, y) in [(u, v), (v, u)] {
            if x == 0 || x == terminal {
                continue;
            }
            let xi = unknown_index[x];
            a[(xi, xi)] += c;
            if y == 0 {
                rhs[xi] += c;
            } else if y != terminal {
                a[(xi, unknown_index[y])] -= c;
            }
        }
    };
    for v in 0..total_words {
        if !active[v] {
            continue;
        }
        let k = level_of(v);
        for i in 0..m {
            let c = conductance[v][i];
            if c > 0.0 {
                add_edge(v, child_id(v, k, i), c, &mut a, &mut rhs);
            }
        }
    }

    let potentials = if n_unknown == 0 {
        DVector::zeros(0)
    } else {
        a.lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Invalid("singular grounded Laplacian".into()))?
    };

    let mut current = 0.0;
    for i in 0..m {
        let c = conductance[0][i];
        if c > 0.0 {
            let child = child_id(0, 0, i);
            let v_child = if child == terminal {
                0.0
            } else {
                potentials[unknown_index[child]]
            };
            current += c * (1.0 - v_child);
        }
    }
    if current <= 0.0 {
        return Ok(ExtendedNonneg::INFINITY);
    }
    Ok(ExtendedNonneg::new(1.0 / current))
}

/// Verdict of the capacity series probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityVerdict {
    PositiveCapacity,
    ZeroCapacity,
    Inconclusive,
}

/// Capacity series report.
#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub verdict: CapacityVerdict,
    /// Partial sum at the last level inspected.
    #[serde(rename = "S_N")]
    pub s_n: ExtendedNonneg,
    /// Levels actually consumed.
    pub n_used: usize,
    /// Relative Cauchy tail over the last window at stop time; absent when
    /// the sum left the finite range first.
    pub tail: Option<f64>,
    /// Max concentration constant over the sampled low levels.
    #[serde(rename = "lambda")]
    pub lambda_max: Option<ExtendedNonneg>,
    pub any_degenerate_level: bool,
    /// `[S, Λ·S]` when both are finite.
    pub r_infinity_bounds: Option<(f64, f64)>,
}

/// Levels of the class walk used for the concentration sample inside
/// [`capacity_series`]; kept low because the constant needs increments at
/// depth `k` only, while the series itself probes `2k+1`.
pub const CAPACITY_LAMBDA_DEPTH: usize = 8;

/// Walks partial sums `S_N` until they stabilize (Cauchy tail below
/// [`tol::SERIES_CAUCHY_TAIL`] with a finite concentration constant →
/// positive capacity), diverge (a zero denominator or
/// `S_N >` [`tol::SERIES_DIVERGENCE`] → zero capacity), or the level
/// budget runs out (inconclusive).
pub fn capacity_series<S: KernelSystem>(
    sys: &S,
    cache: &mut TowerCache<S::Key>,
    s: &S::Point,
    max_levels: usize,
) -> Result<CapacityReport> {
    if max_levels == 0 {
        return Err(Error::Invalid("capacity series needs at least 1 level".into()));
    }
    let concentration =
        concentration_lambda(sys, cache, s, CAPACITY_LAMBDA_DEPTH.min(max_levels.saturating_sub(1)))?;
    let lambda_ok = !concentration.any_degenerate
        && concentration
            .lambda_max
            .map_or(false, |l| !l.is_infinite());

    let window = tol::PROBE_WINDOW;
    let mut partials: Vec<f64> = Vec::new();
    let mut total = ExtendedNonneg::ZERO;
    for k in 0..max_levels {
        let term = series_term(sys, cache, s, k)?;
        total = total + term;
        if total.is_infinite() {
            return Ok(CapacityReport {
                verdict: CapacityVerdict::ZeroCapacity,
                s_n: total,
                n_used: k + 1,
                tail: None,
                lambda_max: concentration.lambda_max,
                any_degenerate_level: concentration.any_degenerate,
                r_infinity_bounds: None,
            });
        }
        let value = total.finite().expect("finite partial sum");
        if value > tol::SERIES_DIVERGENCE {
            return Ok(CapacityReport {
                verdict: CapacityVerdict::ZeroCapacity,
                s_n: total,
                n_used: k + 1,
                tail: None,
                lambda_max: concentration.lambda_max,
                any_degenerate_level: concentration.any_degenerate,
                r_infinity_bounds: None,
            });
        }
        partials.push(value);
        if partials.len() > window {
            let tail = (value - partials[partials.len() - 1 - window]) / value.max(1.0);
            if tail < tol::SERIES_CAUCHY_TAIL {
                let verdict = if lambda_ok {
                    CapacityVerdict::PositiveCapacity
                } else {
                    CapacityVerdict::Inconclusive
                };
                let bounds = concentration
                    .lambda_max
                    .and_then(|l| l.finite())
                    .filter(|_| lambda_ok)
                    .map(|l| (value, l * value));
                return Ok(CapacityReport {
                    verdict,
                    s_n: total,
                    n_used: k + 1,
                    tail: Some(tail),
                    lambda_max: concentration.lambda_max,
                    any_degenerate_level: concentration.any_degenerate,
                    r_infinity_bounds: bounds,
                });
            }
        }
    }
    let tail = if partials.len() > window {
        let last = *partials.last().unwrap();
        Some((last - partials[partials.len() - 1 - window]) / last.max(1.0))
    } else {
        None
    };
    Ok(CapacityReport {
        verdict: CapacityVerdict::Inconclusive,
        s_n: total,
        n_used: max_levels,
        tail,
        lambda_max: concentration.lambda_max,
        any_degenerate_level: concentration.any_degenerate,
        r_infinity_bounds: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{collapsing_eigen_system, eigen_seed, random_maps, FixtureE1, FixtureE2};

    #[test]
    fn e1_resistance_matches_closed_form() {
        let sys = FixtureE1::new(2).unwrap();
        let mut cache = TowerCache::new();
        for depth in 1..=20 {
            let r = effective_resistance_value(&sys, &mut cache, &(), depth)
                .unwrap()
                .finite()
                .unwrap();
            let expect = 2.0 * (1.0 - 0.5f64.powi(depth as i32));
            assert!(
                (r - expect).abs() <= 1e-12 * expect,
                "depth {depth}: {r} vs {expect}"
            );
        }
    }

    #[test]
    fn e1_m3_series_limit() {
        // S(s) = m/(m-1)^2 for the one-point system.
        let sys = FixtureE1::new(3).unwrap();
        let mut cache = TowerCache::new();
        let report = capacity_series(&sys, &mut cache, &(), 60).unwrap();
        assert_eq!(report.verdict, CapacityVerdict::PositiveCapacity);
        let (lo, hi) = report.r_infinity_bounds.unwrap();
        assert!((lo - 0.75).abs() < 1e-9, "{lo}");
        assert!((hi - 0.75).abs() < 1e-9, "{hi}");
    }

    #[test]
    fn e2_resistance_is_infinite() {
        let sys = FixtureE2::new();
        let mut cache = TowerCache::new();
        for depth in 1..=4 {
            assert!(effective_resistance_value(&sys, &mut cache, &0.5, depth)
                .unwrap()
                .is_infinite());
        }
        assert!(resistance_oracle(&sys, &mut cache, &0.5, 2)
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn oracle_matches_closed_form_on_e1() {
        let sys = FixtureE1::new(2).unwrap();
        let mut cache = TowerCache::new();
        let r = resistance_oracle(&sys, &mut cache, &(), 3)
            .unwrap()
            .finite()
            .unwrap();
        assert!((r - 1.75).abs() < 1e-12);
    }

    #[test]
    fn oracle_handles_single_resistor() {
        // m = 1 chain: only the first edge conducts.
        use crate::systems::FiniteSystem;
        use nalgebra::DMatrix;
        use num_complex::Complex64;
        let kernel = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]));
        let sys = FiniteSystem::new(2, vec![vec![1, 1]], kernel).unwrap();
        let mut cache = TowerCache::new();
        // a(∅) = u_1(0) - u_0(0) = 1, c = 1/m = 1, so R_1 = 1.
        let r = resistance_oracle(&sys, &mut cache, &0usize, 1)
            .unwrap()
            .finite()
            .unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let recursion = effective_resistance_value(&sys, &mut cache, &0usize, 1)
            .unwrap()
            .finite()
            .unwrap();
        assert!((recursion - 1.0).abs() < 1e-12);
        // Deeper trees hit the dead tail.
        assert!(resistance_oracle(&sys, &mut cache, &0usize, 2)
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn recursion_agrees_with_oracle_on_random_systems() {
        for seed in 0..20u64 {
            let p = 2 + (seed as usize % 3);
            let maps = random_maps(p, 2, 500 + seed);
            let Ok(out) = eigen_seed(&maps, p, 400, 1e-11) else {
                continue;
            };
            let sys = &out.system;
            let mut cache = TowerCache::new();
            for depth in [1, 3, 6] {
                let fast = effective_resistance_value(sys, &mut cache, &0usize, depth).unwrap();
                let slow = resistance_oracle(sys, &mut cache, &0usize, depth).unwrap();
                match (fast.finite(), slow.finite()) {
                    (Some(a), Some(b)) => assert!(
                        (a - b).abs() <= 1e-9 * b.max(1.0),
                        "seed {seed} depth {depth}: {a} vs {b}"
                    ),
                    (None, None) => {}
                    other => panic!("seed {seed} depth {depth}: disagree {other:?}"),
                }
            }
        }
    }

    #[test]
    fn uniform_flow_energy_matches_levelwise_inverse_mass() {
        let maps = random_maps(4, 2, 42);
        let out = eigen_seed(&maps, 4, 300, 1e-12).unwrap();
        let sys = &out.system;
        let mut cache = TowerCache::new();
        let s = 1usize;
        let depth = 5;
        let flow = FlowAssignment::uniform(2, depth).unwrap();
        let energy = flow_energy(sys, &mut cache, &s, &flow).unwrap();
        let weighting = EdgeWeighting::new(sys);
        let mut expect = 0.0;
        for k in 0..depth {
            let mut level = 0.0;
            for w in words_of_length(k, 2) {
                let point = sys.apply_word(&w, &s);
                level += 1.0 / weighting.increment_at(&mut cache, &point, k).unwrap();
            }
            expect += level / 2f64.powi(k as i32);
        }
        let got = energy.finite().unwrap();
        assert!((got - expect).abs() <= 1e-10 * expect.max(1.0));
    }

    #[test]
    fn e1_unit_uniform_flow_energy() {
        let sys = FixtureE1::new(2).unwrap();
        let mut cache = TowerCache::new();
        let flow = FlowAssignment::uniform(2, 1).unwrap();
        let e = flow_energy(&sys, &mut cache, &(), &flow).unwrap();
        assert_eq!(e.finite().unwrap(), 1.0);
    }

    #[test]
    fn e2_positive_flow_is_open_circuit() {
        let sys = FixtureE2::new();
        let mut cache = TowerCache::new();
        let flow = FlowAssignment::uniform(2, 1).unwrap();
        assert!(flow_energy(&sys, &mut cache, &0.4, &flow).unwrap().is_infinite());
    }

    #[test]
    fn flow_validation_rejects_bad_flows() {
        assert!(matches!(
            FlowAssignment::uniform(2, 0),
            Err(Error::InvalidFlow { .. })
        ));
        let mut theta = IndexMap::new();
        theta.insert(Word::from_letters(&[0], 2).unwrap(), 0.7);
        assert!(matches!(
            FlowAssignment::new(2, 1, theta),
            Err(Error::InvalidFlow { .. })
        ));
        let mut theta = IndexMap::new();
        theta.insert(Word::from_letters(&[0], 2).unwrap(), 0.5);
        theta.insert(Word::from_letters(&[1], 2).unwrap(), 0.5);
        theta.insert(Word::from_letters(&[0, 0], 2).unwrap(), 0.1);
        assert!(matches!(
            FlowAssignment::new(2, 2, theta),
            Err(Error::InvalidFlow { .. })
        ));
    }

    #[test]
    fn lambda_is_one_on_e1_and_degenerate_on_e2() {
        let e1 = FixtureE1::new(2).unwrap();
        let mut cache = TowerCache::new();
        let rep = concentration_lambda(&e1, &mut cache, &(), 5).unwrap();
        for level in &rep.per_level {
            let l = level.lambda_k.unwrap().finite().unwrap();
            assert!((l - 1.0).abs() < 1e-12);
        }
        let e2 = FixtureE2::new();
        let mut cache = TowerCache::new();
        let rep = concentration_lambda(&e2, &mut cache, &0.7, 5).unwrap();
        assert!(rep.any_degenerate);
        assert!(rep.per_level.iter().all(|l| l.degenerate));
    }

    #[test]
    fn lambda_matches_enumeration() {
        let maps = random_maps(4, 2, 77);
        let out = eigen_seed(&maps, 4, 300, 1e-11).unwrap();
        let sys = &out.system;
        let mut cache = TowerCache::new();
        let rep = concentration_lambda(sys, &mut cache, &2usize, 4).unwrap();
        let weighting = EdgeWeighting::new(sys);
        for k in 0..=4usize {
            let mut mass = 0.0;
            let mut inv = 0.0;
            for w in words_of_length(k, 2) {
                let point = sys.apply_word(&w, &2usize);
                let a = weighting.increment_at(&mut cache, &point, k).unwrap();
                mass += a;
                inv += 1.0 / a;
            }
            let expect = mass * inv / 4f64.powi(k as i32);
            let got = rep.per_level[k].lambda_k.unwrap().finite().unwrap();
            assert!((got - expect).abs() <= 1e-10 * expect.max(1.0));
        }
    }

    #[test]
    fn sandwich_bounds_hold() {
        let maps = random_maps(4, 2, 42);
        let out = eigen_seed(&maps, 4, 300, 1e-11).unwrap();
        let sys = &out.system;
        let mut cache = TowerCache::new();
        for depth in 1..=6 {
            let rep = effective_resistance(sys, &mut cache, &0usize, depth).unwrap();
            let r = rep.r_n.finite().unwrap();
            let s = rep.s_n.finite().unwrap();
            let upper = rep.upper_bound.unwrap().finite().unwrap();
            assert!(s <= r * (1.0 + 1e-9), "S {s} vs R {r}");
            assert!(r <= upper * (1.0 + 1e-9), "R {r} vs ΛS {upper}");
        }
    }

    #[test]
    fn monotone_in_depth() {
        let maps = random_maps(3, 2, 11);
        let out = eigen_seed(&maps, 3, 300, 1e-11).unwrap();
        let mut cache = TowerCache::new();
        let mut last = 0.0;
        for depth in 1..=6 {
            let r = effective_resistance_value(&out.system, &mut cache, &0usize, depth)
                .unwrap()
                .finite()
                .unwrap();
            assert!(r >= last - 1e-12);
            last = r;
        }
    }

    #[test]
    fn capacity_verdicts_on_fixtures() {
        let e1 = FixtureE1::new(2).unwrap();
        let mut cache = TowerCache::new();
        let rep = capacity_series(&e1, &mut cache, &(), 80).unwrap();
        assert_eq!(rep.verdict, CapacityVerdict::PositiveCapacity);
        let (lo, hi) = rep.r_infinity_bounds.unwrap();
        assert!((lo - 2.0).abs() < 1e-9 && (hi - 2.0).abs() < 1e-9);

        let e2 = FixtureE2::new();
        let mut cache = TowerCache::new();
        let rep = capacity_series(&e2, &mut cache, &0.3, 10).unwrap();
        assert_eq!(rep.verdict, CapacityVerdict::ZeroCapacity);
        assert!(rep.s_n.is_infinite());
        assert_eq!(rep.n_used, 1);
    }

    #[test]
    fn capacity_verdicts_straddle_the_growth_boundary() {
        // Generic seed: ρ² > m, convergent geometric tail.
        let maps = random_maps(4, 2, 42);
        let out = eigen_seed(&maps, 4, 300, 1e-11).unwrap();
        assert!(out.rho * out.rho > 2.05);
        let mut cache = TowerCache::new();
        let rep = capacity_series(&out.system, &mut cache, &0usize, 200).unwrap();
        assert_eq!(rep.verdict, CapacityVerdict::PositiveCapacity);

        // Sub-cone seed with ρ = 1 < √2: constant tower, zero denominators.
        let out = collapsing_eigen_system(4, 1, 2, 3).unwrap();
        let mut cache = TowerCache::new();
        let rep = capacity_series(&out.system, &mut cache, &1usize, 200).unwrap();
        assert_eq!(rep.verdict, CapacityVerdict::ZeroCapacity);

        // Sub-cone seed with ρ = 2, m = 5: divergent geometric growth.
        let out = collapsing_eigen_system(5, 2, 5, 9).unwrap();
        let mut cache = TowerCache::new();
        let rep = capacity_series(&out.system, &mut cache, &1usize, 200).unwrap();
        assert_eq!(rep.verdict, CapacityVerdict::ZeroCapacity);
    }
}
