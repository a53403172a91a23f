use super::*;
use crate::scenario::BellScenario;

fn min_eig(m: &DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn two_by_two() -> ConicProgram {
    let mut p = ConicProgram::new(1);
    p.objective[0] = 1.0;
    let mut b = PsdBlock::new(2);
    b.add_constant(0, 0, 1.0);
    b.add_constant(1, 1, 1.0);
    b.add_term(0, 0, 1, 1.0);
    p.psd_blocks.push(b);
    p
}

/// Visibility LP over the 16 deterministic points of (2,2): variables are
/// `v` then one weight per vertex.
fn pr_lp() -> ConicProgram {
    let s = BellScenario::new(2, 2).unwrap();
    let pr = s.pr_box().unwrap();
    let w = s.white_noise();
    let mut verts = Vec::new();
    for a1 in 1..=2 {
        for a2 in 1..=2 {
            for b1 in 1..=2 {
                for b2 in 1..=2 {
                    verts.push(s.deterministic(&[a1, a2], &[b1, b2]).unwrap());
                }
            }
        }
    }
    let n = 1 + verts.len();
    let mut p = ConicProgram::new(n);
    p.objective[0] = 1.0;
    for k in 0..s.cg_dim() {
        // Σ q D - v (c - w) - w = 0
        let mut coeffs: Vec<(usize, f64)> = verts
            .iter()
            .enumerate()
            .map(|(l, d)| (1 + l, d.coords()[k]))
            .collect();
        coeffs.push((0, -(pr.coords()[k] - w.coords()[k])));
        p.eq_rows.push(AffineRow::new(-w.coords()[k], coeffs));
    }
    p.eq_rows
        .push(AffineRow::new(-1.0, (1..n).map(|l| (l, 1.0)).collect()));
    for l in 1..n {
        p.nonneg_rows.push(AffineRow::new(0.0, vec![(l, 1.0)]));
    }
    p.nonneg_rows.push(AffineRow::new(10.0, vec![(0, -1.0)]));
    p
}

/// Level-1 NPA moment matrix of (2,2) around the PR box. Variables: `v`, then
/// the two unconstrained same-party moments.
fn pr_npa1() -> ConicProgram {
    let s = BellScenario::new(2, 2).unwrap();
    let pr = s.pr_box().unwrap();
    let w = s.white_noise();
    let mut p = ConicProgram::new(3);
    p.objective[0] = 1.0;
    let mut b = PsdBlock::new(5);
    b.add_constant(0, 0, 1.0);
    // Rows: 1, A1, A2, B1, B2.
    let data = |b: &mut PsdBlock, i: usize, j: usize, k: usize| {
        b.add_constant(i, j, w.coords()[k]);
        b.add_term(0, i, j, pr.coords()[k] - w.coords()[k]);
    };
    for x in 1..=2 {
        let k = s.alice_index(1, x);
        data(&mut b, 0, x, k);
        data(&mut b, x, x, k);
        let k = s.bob_index(1, x);
        data(&mut b, 0, 2 + x, k);
        data(&mut b, 2 + x, 2 + x, k);
    }
    for x in 1..=2 {
        for y in 1..=2 {
            data(&mut b, x, 2 + y, s.joint_index(1, 1, x, y));
        }
    }
    b.add_term(1, 1, 2, 1.0);
    b.add_term(2, 3, 4, 1.0);
    p.psd_blocks.push(b);
    p.nonneg_rows.push(AffineRow::new(10.0, vec![(0, -1.0)]));
    p
}

#[test]
fn two_by_two_psd_bound() {
    let r = solve(&two_by_two()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective_value - 1.0).abs() < 1e-7, "{}", r.objective_value);
    assert!(r.duality_gap <= 1e-8);
    assert!(r.max_primal_residual <= 1e-8);
}

#[test]
fn pr_box_lp_visibility() {
    let r = solve(&pr_lp()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective_value - 0.5).abs() < 1e-7, "{}", r.objective_value);
    assert!(r.x[1..].iter().all(|&q| q > -1e-8));
}

#[test]
fn pr_box_npa1_tsirelson() {
    let r = solve(&pr_npa1()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective_value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
}

#[test]
fn weak_duality_and_certificates() {
    for p in [two_by_two(), pr_lp(), pr_npa1()] {
        let r = solve(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.objective_value <= r.dual_objective + 1e-7);
        for b in &p.psd_blocks {
            let m = b.evaluate(&r.x);
            assert!(min_eig(&m) >= -1e-8 * (1.0 + m.norm()));
        }
        for row in &p.nonneg_rows {
            assert!(row.eval(&r.x) >= -1e-8);
        }
        for row in &p.eq_rows {
            assert!(row.eval(&r.x).abs() <= 1e-7);
        }
        for (z, _) in r.block_duals.iter().zip(&p.psd_blocks) {
            assert!(min_eig(z) >= -1e-7);
        }
        assert!(r.nonneg_duals.iter().all(|&y| y >= -1e-9));
    }
}

#[test]
fn equality_scaling_is_harmless() {
    let p = pr_lp();
    let mut q = p.clone();
    q.eq_rows = q.eq_rows.iter().map(|r| r.scaled(1e3)).collect();
    let a = solve(&p).unwrap().objective_value;
    let b = solve(&q).unwrap().objective_value;
    assert!((a - b).abs() < 1e-6);
}

#[test]
fn detects_infeasibility() {
    // x >= 1 and x <= 0.
    let mut p = ConicProgram::new(1);
    p.objective[0] = 1.0;
    p.nonneg_rows.push(AffineRow::new(-1.0, vec![(0, 1.0)]));
    p.nonneg_rows.push(AffineRow::new(0.0, vec![(0, -1.0)]));
    assert_eq!(solve(&p).unwrap().status, SolveStatus::Infeasible);

    // [[x, 1], [1, -x]] PSD has no solution.
    let mut p = ConicProgram::new(1);
    let mut b = PsdBlock::new(2);
    b.add_term(0, 0, 0, 1.0);
    b.add_term(0, 1, 1, -1.0);
    b.add_constant(0, 1, 1.0);
    p.psd_blocks.push(b);
    assert_eq!(solve(&p).unwrap().status, SolveStatus::Infeasible);

    // Inconsistent equalities are caught before iterating.
    let mut p = ConicProgram::new(1);
    p.eq_rows.push(AffineRow::new(-1.0, vec![(0, 1.0)]));
    p.eq_rows.push(AffineRow::new(-2.0, vec![(0, 1.0)]));
    assert_eq!(solve(&p).unwrap().status, SolveStatus::Infeasible);
}

#[test]
fn detects_unboundedness() {
    let mut p = ConicProgram::new(1);
    p.objective[0] = 1.0;
    p.nonneg_rows.push(AffineRow::new(0.0, vec![(0, 1.0)]));
    assert_eq!(solve(&p).unwrap().status, SolveStatus::Unbounded);

    let mut p = ConicProgram::new(2);
    p.objective[1] = 1.0;
    p.nonneg_rows.push(AffineRow::new(0.0, vec![(0, 1.0)]));
    assert_eq!(solve(&p).unwrap().status, SolveStatus::Unbounded);
}

#[test]
fn deterministic_output() {
    let p = pr_npa1();
    let a = solve(&p).unwrap();
    let b = solve(&p).unwrap();
    assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.x, b.x);
}

#[test]
fn size_cap_is_enforced() {
    let mut p = ConicProgram::new(1);
    p.psd_blocks.push(PsdBlock::new(401));
    assert!(matches!(solve(&p), Err(crate::Error::ProblemTooLarge { total: 401, cap: 400 })));
}

#[test]
fn malformed_program_is_rejected() {
    let mut p = ConicProgram::new(1);
    p.nonneg_rows.push(AffineRow::new(0.0, vec![(3, 1.0)]));
    assert!(matches!(solve(&p), Err(crate::Error::Domain(_))));
}

#[test]
fn exchange_round_trip() {
    for p in [two_by_two(), pr_lp(), pr_npa1()] {
        let text = write_program(&p);
        assert_eq!(read_program(&text).unwrap(), p);
    }
    assert!(matches!(read_program("nope"), Err(crate::Error::Exchange { line: 1, .. })));
    assert!(read_program("conic-program 1\nvars 1\nterm 0 0 0 1\n").is_err());
}
