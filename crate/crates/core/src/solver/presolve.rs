//! Reduction of a [`ConicProgram`] to the internal equality-free form.
//!
//! Equality rows are brought to reduced row echelon form, pivoting first on
//! the sparsest columns, so each pivot variable becomes a sparse affine
//! function of the remaining free variables. Rows and blocks are rewritten in
//! the free variables, empty ones are checked and dropped, nonneg rows and
//! blocks are scaled to unit ∞-norm, and unused variables are removed.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use super::ipm::{Block, IpmOutput, Problem};
use super::{ConicProgram, SolveReport, SolveStatus};

const PIVOT_TOL: f64 = 1e-11;
const CONSISTENCY_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-15;

/// Original variable `i` equals `offset[i] + Σ coef · ξ[j]`.
struct VarMap {
    offset: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
}

pub(crate) struct Reduced {
    pub problem: Problem,
    map: VarMap,
    obj_offset: f64,
    /// Original nonneg row -> (reduced row, scale applied).
    lin_map: Vec<Option<(usize, f64)>>,
    /// Original block -> (reduced block, scale applied).
    block_map: Vec<Option<(usize, f64)>>,
}

fn merge(coeffs: impl IntoIterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut m: BTreeMap<usize, f64> = BTreeMap::new();
    for (j, c) in coeffs {
        *m.entry(j).or_insert(0.0) += c;
    }
    m.into_iter().filter(|&(_, c)| c.abs() > DROP_TOL).collect()
}

fn max_abs(coeffs: &[(usize, f64)]) -> f64 {
    coeffs.iter().fold(0.0, |m, &(_, c)| m.max(c.abs()))
}

/// Solves the equality system, returning the variable map and the number of free variables.
fn eliminate(p: &ConicProgram) -> Result<(VarMap, usize), SolveStatus> {
    let n = p.n_vars;
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for r in &p.eq_rows {
        let coeffs = merge(r.coeffs.iter().copied());
        let s = max_abs(&coeffs);
        if s == 0.0 {
            if r.constant.abs() > CONSISTENCY_TOL {
                return Err(SolveStatus::Infeasible);
            }
            continue;
        }
        // a·x = -constant, scaled.
        rows.push((coeffs.iter().map(|&(j, c)| (j, c / s)).collect(), -r.constant / s));
    }

    // Columns involved, sparsest first; ties by index.
    let mut nnz = vec![0usize; n];
    for (row, _) in &rows {
        for &(j, _) in row {
            nnz[j] += 1;
        }
    }
    let mut involved: Vec<usize> = (0..n).filter(|&j| nnz[j] > 0).collect();
    involved.sort_by_key(|&j| (nnz[j], j));
    let col_pos: BTreeMap<usize, usize> = involved.iter().enumerate().map(|(k, &j)| (j, k)).collect();

    let m = rows.len();
    let k = involved.len();
    let mut a = DMatrix::<f64>::zeros(m, k);
    let mut rhs = vec![0.0; m];
    for (r, (row, b)) in rows.iter().enumerate() {
        for &(j, c) in row {
            a[(r, col_pos[&j])] = c;
        }
        rhs[r] = *b;
    }

    // Gauss-Jordan with partial pivoting.
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut next_row = 0;
    for col in 0..k {
        if next_row == m {
            break;
        }
        let (best, val) = (next_row..m)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((next_row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= PIVOT_TOL {
            continue;
        }
        a.swap_rows(best, next_row);
        rhs.swap(best, next_row);
        let pv = a[(next_row, col)];
        for c in 0..k {
            a[(next_row, c)] /= pv;
        }
        rhs[next_row] /= pv;
        for r in 0..m {
            if r == next_row {
                continue;
            }
            let f = a[(r, col)];
            if f == 0.0 {
                continue;
            }
            for c in 0..k {
                let v = a[(next_row, c)];
                if v != 0.0 {
                    a[(r, c)] -= f * v;
                }
            }
            rhs[r] -= f * rhs[next_row];
        }
        pivots.push((next_row, col));
        next_row += 1;
    }
    for r in next_row..m {
        if rhs[r].abs() > CONSISTENCY_TOL {
            return Err(SolveStatus::Infeasible);
        }
    }

    let mut is_pivot = vec![false; n];
    for &(_, col) in &pivots {
        is_pivot[involved[col]] = true;
    }
    let mut free_index = vec![usize::MAX; n];
    let mut n_free = 0;
    for j in 0..n {
        if !is_pivot[j] {
            free_index[j] = n_free;
            n_free += 1;
        }
    }
    let mut offset = vec![0.0; n];
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for j in 0..n {
        if !is_pivot[j] {
            cols[j] = vec![(free_index[j], 1.0)];
        }
    }
    for &(r, col) in &pivots {
        let var = involved[col];
        offset[var] = rhs[r];
        cols[var] = (0..k)
            .filter(|&c| c != col && a[(r, c)].abs() > DROP_TOL)
            .filter_map(|c| {
                let j = involved[c];
                (!is_pivot[j]).then(|| (free_index[j], -a[(r, c)]))
            })
            .collect();
    }
    Ok((VarMap { offset, cols }, n_free))
}

pub(crate) fn presolve(p: &ConicProgram) -> Result<Reduced, SolveStatus> {
    let (map, n_free) = eliminate(p)?;

    // Nonneg rows in free variables.
    let mut lin: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut lin_map = Vec::with_capacity(p.nonneg_rows.len());
    for r in &p.nonneg_rows {
        let mut constant = r.constant;
        let mut terms = Vec::new();
        for &(i, c) in &r.coeffs {
            constant += c * map.offset[i];
            terms.extend(map.cols[i].iter().map(|&(j, m)| (j, c * m)));
        }
        let coeffs = merge(terms);
        let s = max_abs(&coeffs);
        if s == 0.0 {
            if constant < -CONSISTENCY_TOL {
                return Err(SolveStatus::Infeasible);
            }
            lin_map.push(None);
            continue;
        }
        lin_map.push(Some((lin.len(), 1.0 / s)));
        lin.push((coeffs.iter().map(|&(j, c)| (j, c / s)).collect(), constant / s));
    }

    // PSD blocks in free variables.
    let mut blocks: Vec<(usize, DMatrix<f64>, BTreeMap<(usize, usize, usize), f64>)> = Vec::new();
    let mut block_map = Vec::with_capacity(p.psd_blocks.len());
    for b in &p.psd_blocks {
        let mut h = DMatrix::zeros(b.size, b.size);
        let put = |h: &mut DMatrix<f64>, i: usize, j: usize, v: f64| {
            h[(i, j)] += v;
            if i != j {
                h[(j, i)] += v;
            }
        };
        for &(i, j, v) in &b.constant {
            put(&mut h, i, j, v);
        }
        let mut terms: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for &(var, i, j, c) in &b.terms {
            put(&mut h, i, j, c * map.offset[var]);
            for &(xi, m) in &map.cols[var] {
                *terms.entry((xi, i, j)).or_insert(0.0) += c * m;
            }
        }
        terms.retain(|_, v| v.abs() > DROP_TOL);
        if b.size == 0 {
            block_map.push(None);
            continue;
        }
        if terms.is_empty() {
            let emin = SymmetricEigen::new(h.clone())
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if emin < -CONSISTENCY_TOL * (1.0 + h.norm()) {
                return Err(SolveStatus::Infeasible);
            }
            block_map.push(None);
            continue;
        }
        let s = terms.values().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in terms.values_mut() {
            *v /= s;
        }
        h /= s;
        block_map.push(Some((blocks.len(), 1.0 / s)));
        blocks.push((b.size, h, terms));
    }

    // Objective in free variables.
    let mut obj = vec![0.0; n_free];
    let mut obj_offset = 0.0;
    for (i, &o) in p.objective.iter().enumerate() {
        if o == 0.0 {
            continue;
        }
        obj_offset += o * map.offset[i];
        for &(j, m) in &map.cols[i] {
            obj[j] += o * m;
        }
    }

    // Compact away unused free variables.
    let mut used = vec![false; n_free];
    for (row, _) in &lin {
        for &(j, _) in row {
            used[j] = true;
        }
    }
    for (_, _, terms) in &blocks {
        for &(j, _, _) in terms.keys() {
            used[j] = true;
        }
    }
    let mut new_index = vec![usize::MAX; n_free];
    let mut n = 0;
    for j in 0..n_free {
        if used[j] {
            new_index[j] = n;
            n += 1;
        } else if obj[j].abs() > 1e-12 {
            return Err(SolveStatus::Unbounded);
        }
    }
    let map = VarMap {
        offset: map.offset,
        cols: map
            .cols
            .into_iter()
            .map(|c| c.into_iter().filter(|&(j, _)| used[j]).map(|(j, m)| (new_index[j], m)).collect())
            .collect(),
    };

    let problem = Problem {
        n,
        c: (0..n_free).filter(|&j| used[j]).map(|j| -obj[j]).collect(),
        lin_h: lin.iter().map(|(_, h)| *h).collect(),
        lin_a: lin
            .into_iter()
            .map(|(row, _)| row.into_iter().map(|(j, c)| (new_index[j], c)).collect())
            .collect(),
        blocks: blocks
            .into_iter()
            .map(|(size, h, terms)| {
                let mut cols = vec![Vec::new(); n];
                for ((j, a, b), v) in terms {
                    cols[new_index[j]].push((a, b, v));
                }
                let active = (0..n).filter(|&j| !cols[j].is_empty()).collect();
                Block { size, h, cols, active }
            })
            .collect(),
    };
    Ok(Reduced {
        problem,
        map,
        obj_offset,
        lin_map,
        block_map,
    })
}

impl Reduced {
    pub(crate) fn recover(&self, p: &ConicProgram, out: IpmOutput) -> SolveReport {
        let x: Vec<f64> = (0..p.n_vars)
            .map(|i| self.map.offset[i] + self.map.cols[i].iter().map(|&(j, m)| m * out.x[j]).sum::<f64>())
            .collect();
        let objective_value = p.objective.iter().zip(&x).map(|(o, v)| o * v).sum::<f64>();
        let dual_objective = self.obj_offset - out.dcost;
        let nonneg_duals = self
            .lin_map
            .iter()
            .map(|m| m.map_or(0.0, |(r, k)| out.z.lin[r] * k))
            .collect();
        let block_duals = p
            .psd_blocks
            .iter()
            .zip(&self.block_map)
            .map(|(b, m)| match m {
                Some((r, k)) => &out.z.mats[*r] * *k,
                None => DMatrix::zeros(b.size, b.size),
            })
            .collect();
        SolveReport {
            status: out.status,
            objective_value,
            dual_objective,
            duality_gap: (objective_value - dual_objective).abs() / objective_value.abs().max(1.0),
            max_primal_residual: out.pres,
            iterations: out.iterations,
            x,
            nonneg_duals,
            block_duals,
        }
    }
}
