//! Linear-objective programs over a nonnegative orthant and PSD blocks.
//!
//! Every membership test reduces to
//!
//! ```text
//! maximize    objective · x
//! subject to  F0_k + sum_i x_i F_ik  ⪰ 0        for every PSD block k
//!             a0_r + a_r · x          >= 0       for every nonneg row r
//!             e0_q + e_q · x          =  0       for every equality row q
//! ```
//!
//! [`solve`] presolves (fixes pinned variables, eliminates remaining
//! equalities through a null-space basis, rescales rows) and then runs a
//! primal-dual interior point method on a homogeneous self-dual embedding
//! with Nesterov–Todd scaling and Mehrotra predictor-corrector steps.

mod exchange;
mod ipm;
mod presolve;

use nalgebra::DMatrix;

pub use exchange::{read_program, write_program};

/// An affine functional `constant + Σ coeff · x[var]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineRow {
    pub constant: f64,
    pub coeffs: Vec<(usize, f64)>,
}

impl AffineRow {
    pub fn new(constant: f64, coeffs: Vec<(usize, f64)>) -> Self {
        Self { constant, coeffs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            constant: self.constant * k,
            coeffs: self.coeffs.iter().map(|&(i, c)| (i, c * k)).collect(),
        }
    }
}

/// A symmetric affine matrix map `F0 + Σ x_i F_i` of size `size × size`.
///
/// Entries are stored once per unordered pair `(i, j)` with `i <= j`; the
/// mirrored entry is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub size: usize,
    pub constant: Vec<(usize, usize, f64)>,
    /// `(var, i, j, coeff)`.
    pub terms: Vec<(usize, usize, usize, f64)>,
}

impl PsdBlock {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            constant: Vec::new(),
            terms: Vec::new(),
        }
    }

    pub fn add_constant(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.constant.push((i, j, value));
    }

    pub fn add_term(&mut self, var: usize, i: usize, j: usize, coeff: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.terms.push((var, i, j, coeff));
    }

    /// Dense matrix at the point `x`.
    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        let mut put = |i: usize, j: usize, v: f64| {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        };
        for &(i, j, v) in &self.constant {
            put(i, j, v);
        }
        for &(k, i, j, c) in &self.terms {
            put(i, j, c * x[k]);
        }
        m
    }
}

/// A conic program in the form documented at module level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub psd_blocks: Vec<PsdBlock>,
    pub nonneg_rows: Vec<AffineRow>,
    pub eq_rows: Vec<AffineRow>,
}

impl ConicProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            psd_blocks: Vec::new(),
            nonneg_rows: Vec::new(),
            eq_rows: Vec::new(),
        }
    }

    pub fn total_psd_dim(&self) -> usize {
        self.psd_blocks.iter().map(|b| b.size).sum()
    }

    /// Returns an error message for the first reference to an undeclared variable.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.objective.len() != self.n_vars {
            return Err(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.n_vars
            ));
        }
        let n = self.n_vars;
        for (k, b) in self.psd_blocks.iter().enumerate() {
            for &(i, j, _) in &b.constant {
                if i >= b.size || j >= b.size {
                    return Err(format!("block {k}: constant entry ({i},{j}) out of range"));
                }
            }
            for &(v, i, j, _) in &b.terms {
                if v >= n || i >= b.size || j >= b.size {
                    return Err(format!("block {k}: term (var {v}, {i}, {j}) out of range"));
                }
            }
        }
        for row in self.nonneg_rows.iter().chain(&self.eq_rows) {
            if let Some(&(v, _)) = row.coeffs.iter().find(|&&(v, _)| v >= n) {
                return Err(format!("row references undeclared variable {v}"));
            }
        }
        Ok(())
    }
}

/// Outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterLimit => "iter_limit",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Primal objective `objective · x` at the returned point.
    pub objective_value: f64,
    /// Dual bound on the maximum.
    pub dual_objective: f64,
    /// `|primal - dual| / max(1, |primal|)`.
    pub duality_gap: f64,
    /// Cone residual relative to `max(1, ‖constant terms‖)`.
    pub max_primal_residual: f64,
    pub iterations: usize,
    pub x: Vec<f64>,
    /// Multipliers of the nonneg rows, in input order.
    pub nonneg_duals: Vec<f64>,
    /// Multipliers of the PSD blocks, in input order.
    pub block_duals: Vec<DMatrix<f64>>,
}

impl SolveReport {
    fn failed(status: SolveStatus, p: &ConicProgram) -> Self {
        Self {
            status,
            objective_value: f64::NAN,
            dual_objective: f64::NAN,
            duality_gap: f64::NAN,
            max_primal_residual: f64::NAN,
            iterations: 0,
            x: vec![f64::NAN; p.n_vars],
            nonneg_duals: vec![f64::NAN; p.nonneg_rows.len()],
            block_duals: p
                .psd_blocks
                .iter()
                .map(|b| DMatrix::from_element(b.size, b.size, f64::NAN))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Relative primal and dual residual tolerance.
    pub feas_tol: f64,
    /// Relative duality gap tolerance.
    pub gap_tol: f64,
    /// Tolerance on infeasibility certificates.
    pub infeas_tol: f64,
    /// When the iteration stalls, the best iterate is accepted as optimal if
    /// its residuals and gap are within this tolerance.
    pub near_tol: f64,
    pub step_fraction: f64,
    pub max_psd_dim: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            infeas_tol: 1e-8,
            near_tol: 1e-6,
            step_fraction: 0.99,
            max_psd_dim: 400,
        }
    }
}

/// Solves with default settings.
pub fn solve(p: &ConicProgram) -> crate::Result<SolveReport> {
    solve_with(p, &SolverSettings::default())
}

/// Solves `p`. Numerical trouble is reported through [`SolveReport::status`];
/// only malformed input and the size cap produce an `Err`.
pub fn solve_with(p: &ConicProgram, settings: &SolverSettings) -> crate::Result<SolveReport> {
    if let Err(msg) = p.validate() {
        return Err(crate::Error::Domain(msg));
    }
    let total = p.total_psd_dim();
    if total > settings.max_psd_dim {
        return Err(crate::Error::ProblemTooLarge {
            total,
            cap: settings.max_psd_dim,
        });
    }
    let reduced = match presolve::presolve(p) {
        Ok(r) => r,
        Err(status) => return Ok(SolveReport::failed(status, p)),
    };
    let out = ipm::run(&reduced.problem, settings);
    Ok(reduced.recover(p, out))
}

#[cfg(test)]
mod tests;
