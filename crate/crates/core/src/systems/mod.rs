//! Shipped systems: analytic fixtures, finite systems on index sets, the
//! subinvariant eigen-seed generator, and the JSON configuration loader.

mod config;
mod finite;

pub use config::{load_system, FixtureConfig, LoadedSystem, SystemConfig};
pub use finite::{
    collapsing_eigen_system, eigen_seed, eigen_seed_from, pullback_matrix, random_maps,
    EigenSeed, FiniteSystem,
};

use crate::error::{Error, Result};
use crate::system::KernelSystem;
use num_complex::Complex64;

/// Single point, `m` branches fixed at it, seed `K ≡ 1`.
///
/// Every quantity downstream is closed-form: `u_n = m^n`, all level-`k`
/// increments equal `m^k (m-1)`, the level concentration constant is 1,
/// and for `m = 2` the depth-`N` resistance is `2(1 - 2^{-N})`.
#[derive(Debug, Clone)]
pub struct FixtureE1 {
    m: usize,
}

impl FixtureE1 {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Config(format!("fixture E1 needs m >= 2, got {m}")));
        }
        Ok(FixtureE1 { m })
    }

    /// The unique point.
    pub fn point(&self) {}
}

impl KernelSystem for FixtureE1 {
    type Point = ();
    type Key = ();

    fn branch_count(&self) -> usize {
        self.m
    }

    fn branch(&self, _i: usize, _x: &()) {}

    fn seed(&self, _s: &(), _t: &()) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn key(&self, _x: &()) {}
}

/// `X = [0,1]`, two identical halving branches, seed `K(s,t) = √(st)`.
///
/// The seed is exactly invariant (`LK = K`), so the tower is constant:
/// `u_n(s) = s`, the completion equals the seed, every diagonal increment
/// vanishes, and the boundary martingale is the constant `√(st)`.
#[derive(Debug, Clone, Default)]
pub struct FixtureE2;

impl FixtureE2 {
    pub fn new() -> Self {
        FixtureE2
    }
}

impl KernelSystem for FixtureE2 {
    type Point = f64;
    type Key = u64;

    fn branch_count(&self) -> usize {
        2
    }

    fn branch(&self, _i: usize, x: &f64) -> f64 {
        x / 2.0
    }

    fn seed(&self, s: &f64, t: &f64) -> Complex64 {
        Complex64::new((s * t).sqrt(), 0.0)
    }

    fn key(&self, x: &f64) -> u64 {
        x.to_bits()
    }
}

/// Point of a runtime-selected system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnyPoint {
    Index(usize),
    Coord(f64),
}

impl AnyPoint {
    pub fn as_f64(&self) -> f64 {
        match *self {
            AnyPoint::Index(i) => i as f64,
            AnyPoint::Coord(x) => x,
        }
    }
}

impl std::fmt::Display for AnyPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            AnyPoint::Index(i) => write!(f, "{i}"),
            AnyPoint::Coord(x) => write!(f, "{x}"),
        }
    }
}

/// Memoization key of a runtime-selected system point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnyKey {
    Index(usize),
    Bits(u64),
}

/// A system selected at runtime (CLI configs dispatch through this).
#[derive(Debug, Clone)]
pub enum AnySystem {
    E1(FixtureE1),
    E2(FixtureE2),
    Finite(FiniteSystem),
}

impl AnySystem {
    pub fn is_finite(&self) -> bool {
        matches!(self, AnySystem::Finite(_))
    }

    pub fn describe(&self) -> String {
        match self {
            AnySystem::E1(s) => format!("fixture E1 (m={})", s.m),
            AnySystem::E2(_) => "fixture E2".into(),
            AnySystem::Finite(f) => format!("finite system (p={}, m={})", f.p(), f.branch_count()),
        }
    }

    /// Parses a CLI point argument in the system's own universe.
    pub fn parse_point(&self, text: &str) -> Result<AnyPoint> {
        match self {
            AnySystem::E1(_) => Ok(AnyPoint::Index(0)),
            AnySystem::E2(_) => {
                let x: f64 = text
                    .parse()
                    .map_err(|_| Error::Config(format!("not a real point: {text:?}")))?;
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::Config(format!("point {x} outside [0,1]")));
                }
                Ok(AnyPoint::Coord(x))
            }
            AnySystem::Finite(f) => {
                let i: usize = text
                    .parse()
                    .map_err(|_| Error::Config(format!("not a point index: {text:?}")))?;
                if i >= f.p() {
                    return Err(Error::Config(format!(
                        "point index {i} out of range 0..{}",
                        f.p()
                    )));
                }
                Ok(AnyPoint::Index(i))
            }
        }
    }
}

impl KernelSystem for AnySystem {
    type Point = AnyPoint;
    type Key = AnyKey;

    fn branch_count(&self) -> usize {
        match self {
            AnySystem::E1(s) => s.branch_count(),
            AnySystem::E2(s) => s.branch_count(),
            AnySystem::Finite(s) => s.branch_count(),
        }
    }

    fn branch(&self, i: usize, x: &AnyPoint) -> AnyPoint {
        match (self, x) {
            (AnySystem::E1(_), _) => AnyPoint::Index(0),
            (AnySystem::E2(s), AnyPoint::Coord(c)) => AnyPoint::Coord(s.branch(i, c)),
            (AnySystem::Finite(f), AnyPoint::Index(p)) => AnyPoint::Index(f.branch(i, p)),
            _ => panic!("point does not belong to this system"),
        }
    }

    fn seed(&self, s: &AnyPoint, t: &AnyPoint) -> Complex64 {
        match (self, s, t) {
            (AnySystem::E1(sys), _, _) => sys.seed(&(), &()),
            (AnySystem::E2(sys), AnyPoint::Coord(a), AnyPoint::Coord(b)) => sys.seed(a, b),
            (AnySystem::Finite(sys), AnyPoint::Index(a), AnyPoint::Index(b)) => sys.seed(a, b),
            _ => panic!("point does not belong to this system"),
        }
    }

    fn key(&self, x: &AnyPoint) -> AnyKey {
        match (self, x) {
            (AnySystem::E1(_), _) => AnyKey::Index(0),
            (AnySystem::E2(_), AnyPoint::Coord(c)) => AnyKey::Bits(c.to_bits()),
            (AnySystem::Finite(_), AnyPoint::Index(p)) => AnyKey::Index(*p),
            _ => panic!("point does not belong to this system"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn fixture_evaluators_match_their_formulas() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let e1 = FixtureE1::new(3).unwrap();
        let e2 = FixtureE2::new();
        for _ in 0..1000 {
            let s: f64 = rng.gen();
            let t: f64 = rng.gen();
            let v = e2.seed(&s, &t);
            let expect = (s * t).sqrt();
            assert!((v.re - expect).abs() <= 1e-12 * expect.max(1.0));
            assert_eq!(v.im, 0.0);
            assert_eq!(e2.branch(0, &s), s / 2.0);
            assert_eq!(e2.branch(1, &s), s / 2.0);
            assert_eq!(e1.seed(&(), &()), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn e1_requires_at_least_two_branches() {
        assert!(FixtureE1::new(1).is_err());
        assert!(FixtureE1::new(2).is_ok());
    }

    #[test]
    fn e2_keys_collapse_by_depth() {
        let e2 = FixtureE2::new();
        let s = 0.7;
        let a = e2.branch(0, &e2.branch(1, &s));
        let b = e2.branch(1, &e2.branch(0, &s));
        assert_eq!(e2.key(&a), e2.key(&b));
    }
}
