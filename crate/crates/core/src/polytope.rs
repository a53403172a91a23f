//! H-representation of the nonsignaling polytope and a coordinate Gibbs
//! sampler for uniform points of a bounded polytope.

use rand::distributions::{Distribution, Open01};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scenario::BellScenario;
use crate::solver::{self, AffineRow, ConicProgram, SolveStatus};
use crate::{Error, Result};

/// Name of the generator driving every chain, for run manifests.
pub const GENERATOR_NAME: &str = "ChaCha8Rng (rand_chacha 0.3), seeded from u64";

/// Intervals narrower than this are reported as degenerate.
pub const MIN_INTERVAL: f64 = 1e-14;

/// `{x : a·x <= b for every row}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeH {
    dim: usize,
    rows: Vec<(Vec<f64>, f64)>,
}

impl PolytopeH {
    pub fn new(dim: usize, rows: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if let Some((a, _)) = rows.iter().find(|(a, _)| a.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.len(),
            });
        }
        Ok(Self { dim, rows })
    }

    /// `[0,1]^dim`.
    pub fn hypercube(dim: usize) -> Self {
        let mut rows = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut lo = vec![0.0; dim];
            lo[i] = -1.0;
            rows.push((lo, 0.0));
            let mut hi = vec![0.0; dim];
            hi[i] = 1.0;
            rows.push((hi, 1.0));
        }
        Self { dim, rows }
    }

    /// `{x >= 0, Σ x <= 1}`.
    pub fn simplex(dim: usize) -> Self {
        let mut rows = Vec::with_capacity(dim + 1);
        for i in 0..dim {
            let mut a = vec![0.0; dim];
            a[i] = -1.0;
            rows.push((a, 0.0));
        }
        rows.push((vec![1.0; dim], 1.0));
        Self { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// `b - a·x` for every row.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(a, b)| b - a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>())
            .collect()
    }

    pub fn strictly_contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.slacks(x).iter().all(|&s| s > 0.0)
    }
}

/// Affine expression of the full-table entry `P(a,b|x,y)` in CG coordinates.
/// Outcome `n_o` stands for the omitted outcome.
pub fn full_entry_expr(s: &BellScenario, a: usize, b: usize, x: usize, y: usize) -> (f64, Vec<(usize, f64)>) {
    let o = s.n_outcomes();
    match (a < o, b < o) {
        (true, true) => (0.0, vec![(s.joint_index(a, b, x, y), 1.0)]),
        (true, false) => {
            let mut c = vec![(s.alice_index(a, x), 1.0)];
            c.extend((1..o).map(|b2| (s.joint_index(a, b2, x, y), -1.0)));
            (0.0, c)
        }
        (false, true) => {
            let mut c = vec![(s.bob_index(b, y), 1.0)];
            c.extend((1..o).map(|a2| (s.joint_index(a2, b, x, y), -1.0)));
            (0.0, c)
        }
        (false, false) => {
            let mut c: Vec<(usize, f64)> = (1..o).map(|a2| (s.alice_index(a2, x), -1.0)).collect();
            c.extend((1..o).map(|b2| (s.bob_index(b2, y), -1.0)));
            for a2 in 1..o {
                for b2 in 1..o {
                    c.push((s.joint_index(a2, b2, x, y), 1.0));
                }
            }
            (1.0, c)
        }
    }
}

/// Affine expression of the marginal `P(a|x)` (party 0) or `P(b|y)` (party 1).
pub fn marginal_expr(s: &BellScenario, party: usize, outcome: usize, setting: usize) -> (f64, Vec<(usize, f64)>) {
    let o = s.n_outcomes();
    let idx = |k: usize| {
        if party == 0 {
            s.alice_index(k, setting)
        } else {
            s.bob_index(k, setting)
        }
    };
    if outcome < o {
        (0.0, vec![(idx(outcome), 1.0)])
    } else {
        (1.0, (1..o).map(|k| (idx(k), -1.0)).collect())
    }
}

/// The nonsignaling polytope in CG coordinates: one row per probability of
/// the full table being nonnegative, plus one per marginal. Rows come in
/// three groups: CG coordinates themselves, omitted-outcome marginals, then
/// joints involving an omitted outcome.
pub fn ns_polytope(s: &BellScenario) -> PolytopeH {
    let d = s.cg_dim();
    let (ns, o) = (s.n_settings(), s.n_outcomes());
    let mut exprs = Vec::new();
    // Coordinates.
    for i in 0..d {
        exprs.push((0.0, vec![(i, 1.0)]));
    }
    // Omitted marginals.
    for party in 0..2 {
        for x in 1..=ns {
            exprs.push(marginal_expr(s, party, o, x));
        }
    }
    // Joints with at least one omitted outcome.
    for x in 1..=ns {
        for y in 1..=ns {
            for a in 1..=o {
                for b in 1..=o {
                    if a == o || b == o {
                        exprs.push(full_entry_expr(s, a, b, x, y));
                    }
                }
            }
        }
    }
    let rows = exprs
        .into_iter()
        .map(|(c, coeffs)| {
            // c + coeffs·x >= 0  <=>  -coeffs·x <= c
            let mut a = vec![0.0; d];
            for (i, v) in coeffs {
                a[i] -= v;
            }
            (a, c)
        })
        .collect();
    PolytopeH { dim: d, rows }
}

/// Center and radius of the largest ball inside `p`.
pub fn chebyshev_center(p: &PolytopeH) -> Result<(Vec<f64>, f64)> {
    let d = p.dim;
    let mut prog = ConicProgram::new(d + 1);
    prog.objective[d] = 1.0;
    for (a, b) in &p.rows {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut coeffs: Vec<(usize, f64)> = a
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, -v))
            .collect();
        coeffs.push((d, -norm));
        prog.nonneg_rows.push(AffineRow::new(*b, coeffs));
    }
    let rep = solver::solve(&prog)?;
    match rep.status {
        SolveStatus::Optimal => {}
        SolveStatus::Unbounded => return Err(Error::Domain("polytope is unbounded".into())),
        _ => return Err(Error::Infeasible),
    }
    let r = rep.x[d];
    let x = rep.x[..d].to_vec();
    if !(r > 1e-12) || !p.strictly_contains(&x) {
        return Err(Error::Infeasible);
    }
    Ok((x, r))
}

/// State of one Gibbs chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub rng_seed: u64,
    pub steps_taken: u64,
    rng: ChaCha8Rng,
}

impl ChainState {
    pub fn new(x: Vec<f64>, rng_seed: u64) -> Self {
        Self {
            x,
            rng_seed,
            steps_taken: 0,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }
}

/// Feasible interval of coordinate `coord` through `x`.
pub fn feasible_interval(p: &PolytopeH, x: &[f64], coord: usize) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (a, b) in &p.rows {
        let ak = a[coord];
        if ak == 0.0 {
            continue;
        }
        let rest: f64 = a
            .iter()
            .zip(x)
            .enumerate()
            .filter(|(i, _)| *i != coord)
            .map(|(_, (p, q))| p * q)
            .sum();
        let t = (b - rest) / ak;
        if ak > 0.0 {
            hi = hi.min(t);
        } else {
            lo = lo.max(t);
        }
    }
    (lo, hi)
}

/// Redraws coordinate `coord` uniformly from its feasible interval.
pub fn gibbs_step(p: &PolytopeH, st: &mut ChainState, coord: usize) -> Result<()> {
    let (lo, hi) = feasible_interval(p, &st.x, coord);
    let width = hi - lo;
    if !(width >= MIN_INTERVAL) || !width.is_finite() {
        return Err(Error::DegenerateInterval { coord, width });
    }
    let u: f64 = Open01.sample(&mut st.rng);
    st.x[coord] = lo + u * width;
    st.steps_taken += 1;
    Ok(())
}

/// One pass over all coordinates in a fresh random order.
fn sweep(p: &PolytopeH, st: &mut ChainState, order: &mut [usize]) -> Result<()> {
    const MAX_RESHUFFLES: usize = 100;
    let mut reshuffles = 0;
    order.shuffle(&mut st.rng);
    let mut k = 0;
    while k < order.len() {
        match gibbs_step(p, st, order[k]) {
            Ok(()) => k += 1,
            Err(e @ Error::DegenerateInterval { .. }) => {
                reshuffles += 1;
                if reshuffles > MAX_RESHUFFLES {
                    return Err(e);
                }
                order.shuffle(&mut st.rng);
                k = 0;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Sweeps discarded before the first recorded point.
    pub burn_in: usize,
    /// Sweeps between recorded points.
    pub thinning: usize,
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            burn_in: 1000,
            thinning: 5,
        }
    }
}

/// `n` points of a Gibbs chain started at the Chebyshev center of `p`.
pub fn sample_uniform(p: &PolytopeH, n: usize, cfg: &SamplerConfig) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    if cfg.thinning == 0 {
        return Err(Error::Domain("thinning must be at least 1".into()));
    }
    let (x0, _) = chebyshev_center(p)?;
    let mut st = ChainState::new(x0, cfg.seed);
    let mut order: Vec<usize> = (0..p.dim).collect();
    for _ in 0..cfg.burn_in {
        sweep(p, &mut st, &mut order)?;
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        for _ in 0..cfg.thinning {
            sweep(p, &mut st, &mut order)?;
        }
        out.push(st.x.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ns_row_counts_match_enumeration() {
        for (ns, no) in [(1, 2), (2, 2), (2, 3), (3, 2), (3, 4), (4, 3)] {
            let s = BellScenario::new(ns, no).unwrap();
            let p = ns_polytope(&s);
            // Independent count: every full-table entry plus every marginal.
            let mut count = 0;
            for _x in 1..=ns {
                for _y in 1..=ns {
                    count += no * no;
                }
            }
            count += 2 * ns * no;
            assert_eq!(p.n_rows(), count);
            assert_eq!(p.n_rows(), ns * ns * no * no + 2 * ns * no);
            assert_eq!(p.dim(), s.cg_dim());
        }
        let s = BellScenario::new(2, 2).unwrap();
        assert_eq!(ns_polytope(&s).n_rows(), 24);
        let s = BellScenario::new(2, 3).unwrap();
        assert_eq!(ns_polytope(&s).n_rows(), 48);
    }

    #[test]
    fn rows_agree_with_full_table() {
        let s = BellScenario::new(2, 3).unwrap();
        let p = ns_polytope(&s);
        let pt = s.white_noise().mix_with_noise(0.3);
        let full = pt.to_full();
        let mut sl = p.slacks(pt.coords());
        sl.sort_by(f64::total_cmp);
        // Slack multiset is the full table plus all marginals.
        let mut marg = Vec::new();
        for party in 0..2 {
            for x in 1..=2 {
                for a in 1..=3 {
                    let (c, co) = marginal_expr(&s, party, a, x);
                    marg.push(c + co.iter().map(|&(i, v)| v * pt.coords()[i]).sum::<f64>());
                }
            }
        }
        let mut expected: Vec<f64> = full.table().to_vec();
        expected.extend(marg);
        expected.sort_by(f64::total_cmp);
        assert_eq!(sl.len(), expected.len());
        for (a, b) in sl.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise_is_interior() {
        for (ns, no) in [(2, 2), (2, 3), (3, 4)] {
            let s = BellScenario::new(ns, no).unwrap();
            let p = ns_polytope(&s);
            let m = 1.0 / (no * no) as f64;
            assert!(p.slacks(s.white_noise().coords()).iter().all(|&v| v >= m - 1e-12));
        }
    }

    #[test]
    fn chebyshev_hypercube() {
        let (c, r) = chebyshev_center(&PolytopeH::hypercube(3)).unwrap();
        assert!((r - 0.5).abs() < 1e-7);
        assert!(c.iter().all(|v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn chebyshev_simplex() {
        // Equidistant from x=0, y=0 and x+y=1: r = 1/(2+√2).
        let (c, r) = chebyshev_center(&PolytopeH::simplex(2)).unwrap();
        let want = 1.0 / (2.0 + 2f64.sqrt());
        assert!((r - want).abs() < 1e-7);
        assert!((c[0] - want).abs() < 1e-6 && (c[1] - want).abs() < 1e-6);
    }

    #[test]
    fn chebyshev_ns_interior() {
        let s = BellScenario::new(2, 2).unwrap();
        let p = ns_polytope(&s);
        let (c, _) = chebyshev_center(&p).unwrap();
        assert!(p.slacks(&c).iter().all(|&v| v > 0.0));
    }

    #[test]
    fn chebyshev_rejects_empty() {
        let p = PolytopeH::new(1, vec![(vec![1.0], 0.0), (vec![-1.0], -1.0)]).unwrap();
        assert!(chebyshev_center(&p).is_err());
    }

    #[test]
    fn simplex_step_interval() {
        let p = PolytopeH::simplex(2);
        let (lo, hi) = feasible_interval(&p, &[0.2, 0.3], 0);
        assert!(lo.abs() < 1e-15 && (hi - 0.7).abs() < 1e-15);
    }

    #[test]
    fn step_changes_only_one_coordinate() {
        let p = PolytopeH::hypercube(2);
        let mut st = ChainState::new(vec![0.3, 0.7], 1);
        gibbs_step(&p, &mut st, 0).unwrap();
        assert_eq!(st.x[1], 0.7);
        assert!(st.x[0] > 0.0 && st.x[0] < 1.0);
        assert_eq!(st.steps_taken, 1);
    }

    #[test]
    fn degenerate_interval_is_reported() {
        let p = PolytopeH::new(1, vec![(vec![1.0], 0.5), (vec![-1.0], -0.5)]).unwrap();
        let mut st = ChainState::new(vec![0.5], 1);
        assert!(matches!(gibbs_step(&p, &mut st, 0), Err(Error::DegenerateInterval { coord: 0, .. })));
    }

    #[test]
    fn ns_steps_stay_feasible() {
        let s = BellScenario::new(2, 2).unwrap();
        let p = ns_polytope(&s);
        let mut st = ChainState::new(s.white_noise().into_coords(), 11);
        let mut coord_rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let k = rand::Rng::gen_range(&mut coord_rng, 0..p.dim());
            gibbs_step(&p, &mut st, k).unwrap();
            assert!(p.strictly_contains(&st.x));
        }
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(sample_uniform(&PolytopeH::hypercube(2), 0, &SamplerConfig::default()).is_err());
    }
}
