//! Bell scenarios and the Collins–Gisin coordinate system.
//!
//! A [`Correlation`] stores the minimal nonsignaling parametrization
//!
//! ```text
//! [P(a|x)]  a = 1..n_o-1, x = 1..n_s      (Alice marginals, x-major)
//! [P(b|y)]  b = 1..n_o-1, y = 1..n_s      (Bob marginals, y-major)
//! [P(a,b|x,y)]  lexicographic in (x, y, a, b)
//! ```
//!
//! All public indices are 1-based. The omitted outcome `n_o` is recovered by
//! normalization and the nonsignaling conditions in [`Correlation::to_full`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tolerance on the nonsignaling residual accepted by [`Correlation::from_full`].
pub const SIGNALING_TOL: f64 = 1e-9;

/// Tolerance on per-setting normalization of a [`FullDistribution`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A symmetric bipartite Bell scenario `(n_s, n_o)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BellScenario {
    n_settings: usize,
    n_outcomes: usize,
}

impl BellScenario {
    pub fn new(n_settings: usize, n_outcomes: usize) -> Result<Self> {
        if n_settings < 1 || n_outcomes < 2 {
            return Err(Error::InvalidScenario {
                n_settings,
                n_outcomes,
            });
        }
        Ok(Self {
            n_settings,
            n_outcomes,
        })
    }

    #[inline]
    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    #[inline]
    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    /// Dimension `d = (n_o-1)^2 n_s^2 + 2 n_s (n_o-1)` of the nonsignaling subspace.
    pub fn cg_dim(&self) -> usize {
        let (s, o) = (self.n_settings, self.n_outcomes - 1);
        o * o * s * s + 2 * s * o
    }

    /// Number of entries `P(a,b|x,y)` of a full table.
    pub fn full_dim(&self) -> usize {
        let (s, o) = (self.n_settings, self.n_outcomes);
        s * s * o * o
    }

    fn reduced(&self) -> usize {
        self.n_outcomes - 1
    }

    /// Index of `P(a|x)` in CG coordinates (`a < n_o`).
    pub fn alice_index(&self, a: usize, x: usize) -> usize {
        debug_assert!((1..self.n_outcomes).contains(&a) && (1..=self.n_settings).contains(&x));
        (x - 1) * self.reduced() + (a - 1)
    }

    /// Index of `P(b|y)` in CG coordinates (`b < n_o`).
    pub fn bob_index(&self, b: usize, y: usize) -> usize {
        debug_assert!((1..self.n_outcomes).contains(&b) && (1..=self.n_settings).contains(&y));
        self.n_settings * self.reduced() + (y - 1) * self.reduced() + (b - 1)
    }

    /// Index of `P(a,b|x,y)` in CG coordinates (`a, b < n_o`).
    pub fn joint_index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let o = self.reduced();
        let s = self.n_settings;
        debug_assert!(a >= 1 && a <= o && b >= 1 && b <= o);
        2 * s * o + (((x - 1) * s + (y - 1)) * o + (a - 1)) * o + (b - 1)
    }

    /// Human-readable label of every CG coordinate, in storage order.
    pub fn cg_labels(&self) -> Vec<String> {
        let (s, o) = (self.n_settings, self.reduced());
        let mut out = Vec::with_capacity(self.cg_dim());
        for x in 1..=s {
            for a in 1..=o {
                out.push(format!("PA({a}|{x})"));
            }
        }
        for y in 1..=s {
            for b in 1..=o {
                out.push(format!("PB({b}|{y})"));
            }
        }
        for x in 1..=s {
            for y in 1..=s {
                for a in 1..=o {
                    for b in 1..=o {
                        out.push(format!("PAB({a},{b}|{x},{y})"));
                    }
                }
            }
        }
        out
    }

    /// The uniform distribution `P_w(a,b|x,y) = 1/n_o^2`.
    pub fn white_noise(&self) -> Correlation {
        let o = self.n_outcomes as f64;
        let marg = self.n_settings * self.reduced();
        let coords = (0..self.cg_dim())
            .map(|i| if i < 2 * marg { 1.0 / o } else { 1.0 / (o * o) })
            .collect();
        Correlation {
            scenario: *self,
            coords,
        }
    }

    /// Distance from any local deterministic point to white noise, `n_s sqrt(1 - 1/n_o^2)`.
    pub fn dist_local_vertex_to_noise(&self) -> f64 {
        let o = self.n_outcomes as f64;
        self.n_settings as f64 * (1.0 - 1.0 / (o * o)).sqrt()
    }

    /// Distance from the nonlocal extreme point family `P^k` of a `(2, n_o)`
    /// scenario to white noise, `2 sqrt(1/k - 1/n_o^2)`.
    pub fn dist_ns_vertex_to_noise(&self, k: usize) -> Result<f64> {
        self.check_ns_family(k)?;
        let o = self.n_outcomes as f64;
        Ok(2.0 * (1.0 / k as f64 - 1.0 / (o * o)).sqrt())
    }

    fn check_ns_family(&self, k: usize) -> Result<()> {
        if self.n_settings != 2 {
            return Err(Error::Domain(format!(
                "nonlocal vertex family needs n_s = 2, got {}",
                self.n_settings
            )));
        }
        if k < 2 || k > self.n_outcomes {
            return Err(Error::Domain(format!(
                "k = {k} outside 2..={}",
                self.n_outcomes
            )));
        }
        Ok(())
    }

    /// Local deterministic point given response functions (1-based outcomes,
    /// indexed by 0-based setting).
    pub fn deterministic(&self, alice: &[usize], bob: &[usize]) -> Result<Correlation> {
        let s = self.n_settings;
        if alice.len() != s || bob.len() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                got: alice.len().min(bob.len()),
            });
        }
        if alice
            .iter()
            .chain(bob)
            .any(|&o| o < 1 || o > self.n_outcomes)
        {
            return Err(Error::Domain("outcome label out of range".into()));
        }
        let mut table = vec![0.0; self.full_dim()];
        for x in 1..=s {
            for y in 1..=s {
                table[self.full_offset(alice[x - 1], bob[y - 1], x, y)] = 1.0;
            }
        }
        FullDistribution::new(*self, table)?.to_correlation()
    }

    /// Nonlocal extreme point `P^k(a,b|x,y) = [ (b-a) mod k = xy ] / k` of a
    /// `(2, n_o)` scenario, with 0-based labels inside the bracket and all
    /// outcomes `>= k` carrying zero weight.
    pub fn ns_extreme_point(&self, k: usize) -> Result<FullDistribution> {
        self.check_ns_family(k)?;
        let mut table = vec![0.0; self.full_dim()];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..k {
                    for b in 0..k {
                        if (b + k - a) % k == x * y {
                            table[self.full_offset(a + 1, b + 1, x + 1, y + 1)] = 1.0 / k as f64;
                        }
                    }
                }
            }
        }
        FullDistribution::new(*self, table)
    }

    /// The Popescu–Rohrlich box of the `(2,2)` scenario.
    pub fn pr_box(&self) -> Result<Correlation> {
        if self.n_settings != 2 || self.n_outcomes != 2 {
            return Err(Error::Domain("the PR box lives in the (2,2) scenario".into()));
        }
        self.ns_extreme_point(2)?.to_correlation()
    }

    #[inline]
    fn full_offset(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let (s, o) = (self.n_settings, self.n_outcomes);
        (((x - 1) * s + (y - 1)) * o + (a - 1)) * o + (b - 1)
    }
}

impl fmt::Display for BellScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.n_settings, self.n_outcomes)
    }
}

impl FromStr for BellScenario {
    type Err = Error;

    /// Accepts `"3,4"` or `"(3,4)"`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut it = t.split(',').map(|p| p.trim().parse::<usize>());
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(ns)), Some(Ok(no)), None) => Self::new(ns, no),
            _ => Err(Error::ScenarioSyntax(s.to_string())),
        }
    }
}

/// A point of the nonsignaling subspace in CG coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    scenario: BellScenario,
    coords: Vec<f64>,
}

impl Correlation {
    pub fn new(scenario: BellScenario, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != scenario.cg_dim() {
            return Err(Error::DimensionMismatch {
                expected: scenario.cg_dim(),
                got: coords.len(),
            });
        }
        Ok(Self { scenario, coords })
    }

    pub fn scenario(&self) -> BellScenario {
        self.scenario
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// `v * self + (1 - v) * white_noise`.
    pub fn mix_with_noise(&self, v: f64) -> Correlation {
        let w = self.scenario.white_noise();
        let coords = self
            .coords
            .iter()
            .zip(w.coords())
            .map(|(c, w)| v * c + (1.0 - v) * w)
            .collect();
        Correlation {
            scenario: self.scenario,
            coords,
        }
    }

    /// Reconstructs the full table, filling omitted outcomes from the marginals.
    pub fn to_full(&self) -> FullDistribution {
        let sc = self.scenario;
        let (s, o) = (sc.n_settings, sc.n_outcomes);
        let c = &self.coords;
        let mut table = vec![0.0; sc.full_dim()];
        for x in 1..=s {
            for y in 1..=s {
                let mut last_last = 1.0;
                for a in 1..o {
                    last_last -= c[sc.alice_index(a, x)];
                }
                for b in 1..o {
                    last_last -= c[sc.bob_index(b, y)];
                }
                for a in 1..o {
                    let mut last_b = c[sc.alice_index(a, x)];
                    for b in 1..o {
                        let j = c[sc.joint_index(a, b, x, y)];
                        table[sc.full_offset(a, b, x, y)] = j;
                        last_b -= j;
                        last_last += j;
                    }
                    table[sc.full_offset(a, o, x, y)] = last_b;
                }
                for b in 1..o {
                    let mut last_a = c[sc.bob_index(b, y)];
                    for a in 1..o {
                        last_a -= c[sc.joint_index(a, b, x, y)];
                    }
                    table[sc.full_offset(o, b, x, y)] = last_a;
                }
                table[sc.full_offset(o, o, x, y)] = last_last;
            }
        }
        FullDistribution { scenario: sc, table }
    }

    /// Euclidean distance between full tables.
    pub fn full_distance(&self, other: &Correlation) -> f64 {
        self.to_full().distance(&other.to_full())
    }
}

/// A full conditional distribution `P(a,b|x,y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDistribution {
    scenario: BellScenario,
    table: Vec<f64>,
}

impl FullDistribution {
    /// Table layout is lexicographic in `(x, y, a, b)`, 1-based labels mapped to 0-based offsets.
    pub fn new(scenario: BellScenario, table: Vec<f64>) -> Result<Self> {
        if table.len() != scenario.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: scenario.full_dim(),
                got: table.len(),
            });
        }
        let o2 = scenario.n_outcomes * scenario.n_outcomes;
        for (k, chunk) in table.chunks(o2).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotNormalized {
                    x: k / scenario.n_settings + 1,
                    y: k % scenario.n_settings + 1,
                    sum,
                });
            }
        }
        Ok(Self { scenario, table })
    }

    pub fn scenario(&self) -> BellScenario {
        self.scenario
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// `P(a,b|x,y)` with 1-based labels.
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.table[self.scenario.full_offset(a, b, x, y)]
    }

    /// Largest violation of the nonsignaling conditions.
    pub fn signaling_residual(&self) -> f64 {
        let sc = self.scenario;
        let (s, o) = (sc.n_settings, sc.n_outcomes);
        let mut worst: f64 = 0.0;
        for x in 1..=s {
            for a in 1..=o {
                let m0: f64 = (1..=o).map(|b| self.get(a, b, x, 1)).sum();
                for y in 2..=s {
                    let m: f64 = (1..=o).map(|b| self.get(a, b, x, y)).sum();
                    worst = worst.max((m - m0).abs());
                }
            }
        }
        for y in 1..=s {
            for b in 1..=o {
                let m0: f64 = (1..=o).map(|a| self.get(a, b, 1, y)).sum();
                for x in 2..=s {
                    let m: f64 = (1..=o).map(|a| self.get(a, b, x, y)).sum();
                    worst = worst.max((m - m0).abs());
                }
            }
        }
        worst
    }

    /// Projects onto CG coordinates; fails when the table signals.
    pub fn to_correlation(&self) -> Result<Correlation> {
        let residual = self.signaling_residual();
        if residual > SIGNALING_TOL {
            return Err(Error::SignalingInput { residual });
        }
        let sc = self.scenario;
        let (s, o) = (sc.n_settings, sc.n_outcomes);
        let mut coords = vec![0.0; sc.cg_dim()];
        for x in 1..=s {
            for a in 1..o {
                coords[sc.alice_index(a, x)] = (1..=o).map(|b| self.get(a, b, x, 1)).sum();
            }
        }
        for y in 1..=s {
            for b in 1..o {
                coords[sc.bob_index(b, y)] = (1..=o).map(|a| self.get(a, b, 1, y)).sum();
            }
        }
        for x in 1..=s {
            for y in 1..=s {
                for a in 1..o {
                    for b in 1..o {
                        coords[sc.joint_index(a, b, x, y)] = self.get(a, b, x, y);
                    }
                }
            }
        }
        Ok(Correlation {
            scenario: sc,
            coords,
        })
    }

    /// Euclidean distance over all `P(a,b|x,y)` entries.
    pub fn distance(&self, other: &FullDistribution) -> f64 {
        self.table
            .iter()
            .zip(&other.table)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest entry; negative for points outside the nonsignaling polytope.
    pub fn min_entry(&self) -> f64 {
        self.table.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
