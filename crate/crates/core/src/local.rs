//! The Bell-local polytope: deterministic vertices and the visibility LP.
//!
//! The visibility program
//!
//! ```text
//! maximize v  s.t.  Σ_λ q_λ D_λ = v c + (1 - v) w,  Σ q_λ = 1,  q >= 0,  0 <= v <= v_cap
//! ```
//!
//! is solved through its dual, which has `cg_dim + 2` variables and one row
//! per vertex:
//!
//! ```text
//! minimize w·y + y0 + v_cap t  s.t.  D_λ·y + y0 >= 0 for all λ,  (w - c)·y + t >= 1,  t >= 0.
//! ```
//!
//! The weights `q_λ` are the multipliers of the vertex rows. For large vertex
//! sets the rows are generated lazily: a restricted problem over a random
//! subset is solved, and the most violated vertex rows found by exact
//! best-response pricing are added until none remain.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scenario::{BellScenario, Correlation};
use crate::solver::{self, AffineRow, ConicProgram, SolveStatus, SolverSettings};
use crate::{Error, Result, VISIBILITY_CAP};

/// Default cap on the number of vertices.
pub const DEFAULT_VERTEX_CAP: usize = 2_000_000;

/// The deterministic strategies of a scenario. Vertex `λ` is the pair of
/// response functions `(λ / n_o^n_s, λ mod n_o^n_s)`, each read as base-`n_o`
/// digits indexed by setting; vertices are decoded on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexTable {
    scenario: BellScenario,
    per_party: usize,
}

/// Enumerates all `n_o^(2 n_s)` deterministic strategies (default cap).
pub fn enumerate_vertices(s: &BellScenario) -> Result<VertexTable> {
    enumerate_vertices_with_cap(s, DEFAULT_VERTEX_CAP)
}

pub fn enumerate_vertices_with_cap(s: &BellScenario, cap: usize) -> Result<VertexTable> {
    let per_party = (s.n_outcomes() as u128).pow(s.n_settings() as u32);
    let count = per_party * per_party;
    if count > cap as u128 {
        return Err(Error::TooManyVertices { count, cap });
    }
    Ok(VertexTable {
        scenario: *s,
        per_party: per_party as usize,
    })
}

impl VertexTable {
    pub fn scenario(&self) -> BellScenario {
        self.scenario
    }

    pub fn len(&self) -> usize {
        self.per_party * self.per_party
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn responses(&self, mut k: usize) -> Vec<usize> {
        let o = self.scenario.n_outcomes();
        (0..self.scenario.n_settings())
            .map(|_| {
                let d = k % o;
                k /= o;
                d + 1
            })
            .collect()
    }

    fn encode(&self, outcomes: &[usize]) -> usize {
        let o = self.scenario.n_outcomes();
        outcomes.iter().rev().fold(0, |acc, &a| acc * o + (a - 1))
    }

    /// Response functions `(f_A, f_B)` of vertex `lambda`, 1-based outcomes
    /// indexed by 0-based setting.
    pub fn strategies(&self, lambda: usize) -> (Vec<usize>, Vec<usize>) {
        assert!(lambda < self.len(), "vertex index out of range");
        (
            self.responses(lambda / self.per_party),
            self.responses(lambda % self.per_party),
        )
    }

    pub fn index_of(&self, alice: &[usize], bob: &[usize]) -> usize {
        self.encode(alice) * self.per_party + self.encode(bob)
    }

    /// Nonzero CG coordinates of vertex `lambda` (all equal to 1).
    pub fn support(&self, lambda: usize) -> Vec<usize> {
        let s = &self.scenario;
        let o = s.n_outcomes();
        let (fa, fb) = self.strategies(lambda);
        let mut out = Vec::new();
        for (x, &a) in fa.iter().enumerate() {
            if a < o {
                out.push(s.alice_index(a, x + 1));
            }
        }
        for (y, &b) in fb.iter().enumerate() {
            if b < o {
                out.push(s.bob_index(b, y + 1));
            }
        }
        for (x, &a) in fa.iter().enumerate() {
            for (y, &b) in fb.iter().enumerate() {
                if a < o && b < o {
                    out.push(s.joint_index(a, b, x + 1, y + 1));
                }
            }
        }
        out
    }

    /// CG coordinates of vertex `lambda`.
    pub fn vertex(&self, lambda: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.scenario.cg_dim()];
        for i in self.support(lambda) {
            v[i] = 1.0;
        }
        v
    }

    /// The vertex minimizing `D_λ·y`, with its value. Alice's strategies are
    /// enumerated; Bob's best response is chosen setting by setting.
    pub fn best_response(&self, y: &[f64]) -> (usize, f64) {
        self.all_best_responses(y)
            .into_iter()
            .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
    }

    /// For every Alice strategy, Bob's best response and the value `D_λ·y`.
    fn all_best_responses(&self, y: &[f64]) -> Vec<(usize, f64)> {
        let s = &self.scenario;
        let (ns, o) = (s.n_settings(), s.n_outcomes());
        let mut out = Vec::with_capacity(self.per_party);
        let mut fb = vec![o; ns];
        for ia in 0..self.per_party {
            let fa = self.responses(ia);
            let mut val: f64 = fa
                .iter()
                .enumerate()
                .filter(|(_, &a)| a < o)
                .map(|(x, &a)| y[s.alice_index(a, x + 1)])
                .sum();
            for yy in 1..=ns {
                let (mut bv, mut bb) = (0.0, o);
                for b in 1..o {
                    let mut v = y[s.bob_index(b, yy)];
                    for (x, &a) in fa.iter().enumerate() {
                        if a < o {
                            v += y[s.joint_index(a, b, x + 1, yy)];
                        }
                    }
                    if v < bv {
                        bv = v;
                        bb = b;
                    }
                }
                fb[yy - 1] = bb;
                val += bv;
            }
            out.push((ia * self.per_party + self.encode(&fb), val));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct LocalSettings {
    /// Vertex counts above this switch to column generation.
    pub column_generation_threshold: usize,
    /// Size of the random starting subset for column generation.
    pub initial_columns: usize,
    /// Vertices added per pricing round at most.
    pub columns_per_round: usize,
    pub max_rounds: usize,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for LocalSettings {
    fn default() -> Self {
        Self {
            column_generation_threshold: 65_536,
            initial_columns: 10_000,
            columns_per_round: 200,
            max_rounds: 200,
            seed: 0x5eed,
            solver: SolverSettings::default(),
        }
    }
}

/// Result of the local visibility program.
#[derive(Debug, Clone)]
pub struct LocalVisibility {
    pub v_star: f64,
    pub status: SolveStatus,
    /// Vertices with weight above `1e-9`, as `(λ, q_λ)`.
    pub weights: Vec<(usize, f64)>,
    /// Vertex rows in the final restricted problem.
    pub columns_used: usize,
    pub rounds: usize,
}

/// Visibility of `c` with respect to the local polytope, default settings.
pub fn visibility_to_local(c: &Correlation, vt: &VertexTable) -> Result<LocalVisibility> {
    visibility_to_local_with(c, vt, &LocalSettings::default())
}

fn restricted_program(c: &Correlation, vt: &VertexTable, columns: &[usize]) -> ConicProgram {
    let s = vt.scenario;
    let d = s.cg_dim();
    let w = s.white_noise();
    let mut p = ConicProgram::new(d + 2);
    for i in 0..d {
        p.objective[i] = -w.coords()[i];
    }
    p.objective[d] = -1.0;
    p.objective[d + 1] = -VISIBILITY_CAP;
    for &lambda in columns {
        let mut coeffs: Vec<(usize, f64)> = vt.support(lambda).into_iter().map(|i| (i, 1.0)).collect();
        coeffs.push((d, 1.0));
        p.nonneg_rows.push(AffineRow::new(0.0, coeffs));
    }
    let mut coeffs: Vec<(usize, f64)> = (0..d)
        .map(|i| (i, w.coords()[i] - c.coords()[i]))
        .filter(|&(_, v)| v != 0.0)
        .collect();
    coeffs.push((d + 1, 1.0));
    p.nonneg_rows.push(AffineRow::new(-1.0, coeffs));
    p.nonneg_rows.push(AffineRow::new(0.0, vec![(d + 1, 1.0)]));
    p
}

pub fn visibility_to_local_with(c: &Correlation, vt: &VertexTable, cfg: &LocalSettings) -> Result<LocalVisibility> {
    let s = vt.scenario;
    if c.scenario() != s {
        return Err(Error::ScenarioMismatch {
            left: c.scenario().to_string(),
            right: s.to_string(),
        });
    }
    let d = s.cg_dim();
    let n = vt.len();
    let generate = n > cfg.column_generation_threshold;
    let mut columns: Vec<usize> = if generate {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut v: BTreeSet<usize> = index::sample(&mut rng, n, cfg.initial_columns.min(n)).into_iter().collect();
        // Constant responses average to white noise, keeping the restricted problem feasible.
        let o = s.n_outcomes();
        for a in 1..=o {
            for b in 1..=o {
                v.insert(vt.index_of(&vec![a; s.n_settings()], &vec![b; s.n_settings()]));
            }
        }
        v.into_iter().collect()
    } else {
        (0..n).collect()
    };
    let mut rounds = 0;
    loop {
        rounds += 1;
        let p = restricted_program(c, vt, &columns);
        let rep = solver::solve_with(&p, &cfg.solver)?;
        let done = |status| {
            let weights = columns
                .iter()
                .zip(&rep.nonneg_duals)
                .filter(|(_, &q)| q > 1e-9)
                .map(|(&l, &q)| (l, q))
                .collect();
            Ok(LocalVisibility {
                v_star: -rep.objective_value,
                status,
                weights,
                columns_used: columns.len(),
                rounds,
            })
        };
        if rep.status != SolveStatus::Optimal || !generate {
            return done(rep.status);
        }
        let y = &rep.x[..d];
        let y0 = rep.x[d];
        let tol = 1e-9 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let present: BTreeSet<usize> = columns.iter().copied().collect();
        let mut violated: Vec<(usize, f64)> = vt
            .all_best_responses(y)
            .into_iter()
            .filter(|&(l, v)| v + y0 < -tol && !present.contains(&l))
            .collect();
        if violated.is_empty() {
            return done(SolveStatus::Optimal);
        }
        if rounds >= cfg.max_rounds {
            return done(SolveStatus::IterLimit);
        }
        violated.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        columns.extend(violated.iter().take(cfg.columns_per_round).map(|&(l, _)| l));
        columns.sort_unstable();
    }
}
