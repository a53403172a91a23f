//! Homogeneous self-dual interior point method.
//!
//! Internal form: minimize `c·x` subject to `s = h - G x ∈ K`, with
//! `K = R^p_+ × S^{n_1}_+ × ...`. The affine maps are stored as
//! `h + A x` (so `G = -A`). The embedding
//!
//! ```text
//! G^T z + c τ          = 0
//! G x + s - h τ        = 0
//! κ + c^T x + h^T z    = 0,     (s, z) ∈ K × K,  τ, κ >= 0
//! ```
//!
//! is followed with Nesterov–Todd scaling: `W z = W^{-T} s = λ`. For the
//! nonnegative part `W = diag(sqrt(s/z))`; for a PSD block `W u = rᵀ u r`
//! with `rᵀ Z r = r⁻¹ S r⁻ᵀ = diag(λ)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::{SolveStatus, SolverSettings};

const KKT_REFINEMENT: usize = 2;

pub(crate) struct Block {
    pub size: usize,
    pub h: DMatrix<f64>,
    /// Per variable: `(i, j, coeff)` with `i <= j`.
    pub cols: Vec<Vec<(usize, usize, f64)>>,
    /// Variables with at least one entry in this block.
    pub active: Vec<usize>,
}

pub(crate) struct Problem {
    pub n: usize,
    pub c: Vec<f64>,
    pub lin_h: Vec<f64>,
    pub lin_a: Vec<Vec<(usize, f64)>>,
    pub blocks: Vec<Block>,
}

pub(crate) struct IpmOutput {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub z: Cv,
    pub dcost: f64,
    pub pres: f64,
    pub iterations: usize,
}

/// A point of the product cone.
#[derive(Clone, Debug)]
pub(crate) struct Cv {
    pub lin: Vec<f64>,
    pub mats: Vec<DMatrix<f64>>,
}

impl Cv {
    fn zeros_like(p: &Problem) -> Self {
        Cv {
            lin: vec![0.0; p.lin_h.len()],
            mats: p.blocks.iter().map(|b| DMatrix::zeros(b.size, b.size)).collect(),
        }
    }

    fn identity(p: &Problem) -> Self {
        Cv {
            lin: vec![1.0; p.lin_h.len()],
            mats: p.blocks.iter().map(|b| DMatrix::identity(b.size, b.size)).collect(),
        }
    }

    fn dot(&self, o: &Cv) -> f64 {
        let l: f64 = self.lin.iter().zip(&o.lin).map(|(a, b)| a * b).sum();
        let m: f64 = self.mats.iter().zip(&o.mats).map(|(a, b)| a.dot(b)).sum();
        l + m
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += k * o`.
    fn axpy(&mut self, k: f64, o: &Cv) {
        for (a, b) in self.lin.iter_mut().zip(&o.lin) {
            *a += k * b;
        }
        for (a, b) in self.mats.iter_mut().zip(&o.mats) {
            *a += b * k;
        }
    }

    fn scale(&mut self, k: f64) {
        self.lin.iter_mut().for_each(|a| *a *= k);
        self.mats.iter_mut().for_each(|a| *a *= k);
    }

    fn sub(&self, o: &Cv) -> Cv {
        let mut r = self.clone();
        r.axpy(-1.0, o);
        r
    }

    /// Jordan product: elementwise on the orthant, `(UV + VU)/2` on blocks.
    fn jordan(&self, o: &Cv) -> Cv {
        Cv {
            lin: self.lin.iter().zip(&o.lin).map(|(a, b)| a * b).collect(),
            mats: self
                .mats
                .iter()
                .zip(&o.mats)
                .map(|(a, b)| {
                    let ab = a * b;
                    (&ab + ab.transpose()) * 0.5
                })
                .collect(),
        }
    }

    /// Smallest eigenvalue across the product cone.
    fn min_eig(&self) -> f64 {
        let mut m = self.lin.iter().copied().fold(f64::INFINITY, f64::min);
        for a in &self.mats {
            if a.nrows() > 0 {
                let e = SymmetricEigen::new(a.clone()).eigenvalues;
                m = m.min(e.iter().copied().fold(f64::INFINITY, f64::min));
            }
        }
        m
    }

    fn is_finite(&self) -> bool {
        self.lin.iter().all(|v| v.is_finite()) && self.mats.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dotv(a, a).sqrt()
}

/// `G x = -(A x)`.
fn g_apply(p: &Problem, x: &[f64]) -> Cv {
    let lin = p
        .lin_a
        .iter()
        .map(|row| -row.iter().map(|&(j, a)| a * x[j]).sum::<f64>())
        .collect();
    let mats = p
        .blocks
        .iter()
        .map(|b| {
            let mut m = DMatrix::zeros(b.size, b.size);
            for &v in &b.active {
                let xv = x[v];
                if xv == 0.0 {
                    continue;
                }
                for &(i, j, f) in &b.cols[v] {
                    m[(i, j)] -= f * xv;
                    if i != j {
                        m[(j, i)] -= f * xv;
                    }
                }
            }
            m
        })
        .collect();
    Cv { lin, mats }
}

/// `Gᵀ z`.
fn gt_apply(p: &Problem, z: &Cv) -> Vec<f64> {
    let mut out = vec![0.0; p.n];
    for (row, &zr) in p.lin_a.iter().zip(&z.lin) {
        for &(j, a) in row {
            out[j] -= a * zr;
        }
    }
    for (b, zm) in p.blocks.iter().zip(&z.mats) {
        for &v in &b.active {
            let mut acc = 0.0;
            for &(i, j, f) in &b.cols[v] {
                acc += if i == j { f * zm[(i, i)] } else { 2.0 * f * zm[(i, j)] };
            }
            out[v] -= acc;
        }
    }
    out
}

fn h_cone(p: &Problem) -> Cv {
    Cv {
        lin: p.lin_h.clone(),
        mats: p.blocks.iter().map(|b| b.h.clone()).collect(),
    }
}

struct BlockScaling {
    r: DMatrix<f64>,
    lam: DVector<f64>,
    q: DMatrix<f64>,
}

struct Scaling {
    d: Vec<f64>,
    lam_lin: Vec<f64>,
    blocks: Vec<BlockScaling>,
}

impl Scaling {
    fn compute(s: &Cv, z: &Cv) -> Option<Scaling> {
        let mut d = Vec::with_capacity(s.lin.len());
        let mut lam_lin = Vec::with_capacity(s.lin.len());
        for (&si, &zi) in s.lin.iter().zip(&z.lin) {
            if !(si > 0.0 && zi > 0.0) {
                return None;
            }
            d.push((si / zi).sqrt());
            lam_lin.push((si * zi).sqrt());
        }
        let mut blocks = Vec::with_capacity(s.mats.len());
        for (sm, zm) in s.mats.iter().zip(&z.mats) {
            let n = sm.nrows();
            let ls = Cholesky::new(sm.clone())?.l();
            let lz = Cholesky::new(zm.clone())?.l();
            let svd = (lz.transpose() * &ls).svd(true, true);
            let u = svd.u?;
            let v = svd.v_t?.transpose();
            let lam = svd.singular_values;
            if lam.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                return None;
            }
            let inv_sqrt = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l.sqrt()));
            let r = &ls * &v * &inv_sqrt;
            let rti = &lz * &u * &inv_sqrt;
            let q = &rti * rti.transpose();
            debug_assert_eq!(r.nrows(), n);
            blocks.push(BlockScaling { r, lam, q });
        }
        Some(Scaling { d, lam_lin, blocks })
    }

    /// `W u`.
    fn w(&self, u: &Cv) -> Cv {
        Cv {
            lin: u.lin.iter().zip(&self.d).map(|(a, d)| a * d).collect(),
            mats: u
                .mats
                .iter()
                .zip(&self.blocks)
                .map(|(m, b)| b.r.transpose() * m * &b.r)
                .collect(),
        }
    }

    /// `Wᵀ u`.
    fn wt(&self, u: &Cv) -> Cv {
        Cv {
            lin: u.lin.iter().zip(&self.d).map(|(a, d)| a * d).collect(),
            mats: u
                .mats
                .iter()
                .zip(&self.blocks)
                .map(|(m, b)| &b.r * m * b.r.transpose())
                .collect(),
        }
    }

    /// `(WᵀW)⁻¹ u`.
    fn h_inv(&self, u: &Cv) -> Cv {
        Cv {
            lin: u.lin.iter().zip(&self.d).map(|(a, d)| a / (d * d)).collect(),
            mats: u
                .mats
                .iter()
                .zip(&self.blocks)
                .map(|(m, b)| &b.q * m * &b.q)
                .collect(),
        }
    }

    fn lambda(&self) -> Cv {
        Cv {
            lin: self.lam_lin.clone(),
            mats: self.blocks.iter().map(|b| DMatrix::from_diagonal(&b.lam)).collect(),
        }
    }

    /// Solves `λ ∘ t = d` for `t`.
    fn lam_div(&self, dd: &Cv) -> Cv {
        Cv {
            lin: dd.lin.iter().zip(&self.lam_lin).map(|(a, l)| a / l).collect(),
            mats: dd
                .mats
                .iter()
                .zip(&self.blocks)
                .map(|(m, b)| {
                    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| 2.0 * m[(i, j)] / (b.lam[i] + b.lam[j]))
                })
                .collect(),
        }
    }

    /// Largest `α` keeping `λ + α δ` in the cone (scaled coordinates).
    fn max_step(&self, delta: &Cv) -> f64 {
        let mut alpha = f64::INFINITY;
        for (l, dl) in self.lam_lin.iter().zip(&delta.lin) {
            if *dl < 0.0 {
                alpha = alpha.min(-l / dl);
            }
        }
        for (b, dm) in self.blocks.iter().zip(&delta.mats) {
            let n = dm.nrows();
            if n == 0 {
                continue;
            }
            let m = DMatrix::from_fn(n, n, |i, j| dm[(i, j)] / (b.lam[i] * b.lam[j]).sqrt());
            let m = (&m + m.transpose()) * 0.5;
            let emin = SymmetricEigen::new(m)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if emin < 0.0 {
                alpha = alpha.min(-1.0 / emin);
            }
        }
        alpha
    }
}

/// Normal matrix `Gᵀ H⁻¹ G` for orthant weights `lin_w = 1/d²` and block factors `Q`.
fn form_normal(p: &Problem, lin_w: &[f64], qs: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = p.n;
    let mut m = DMatrix::zeros(n, n);
    for (row, &w) in p.lin_a.iter().zip(lin_w) {
        for &(i, ai) in row {
            for &(j, aj) in row {
                m[(i, j)] += w * ai * aj;
            }
        }
    }
    for (b, q) in p.blocks.iter().zip(qs) {
        // tr(F_i Q F_j Q) = 2 Σ f̃ g̃ (Q_ac Q_bd + Q_ad Q_bc), f̃ = f/2 on the diagonal.
        let scaled: Vec<Vec<(usize, usize, f64)>> = b
            .active
            .iter()
            .map(|&v| {
                b.cols[v]
                    .iter()
                    .map(|&(i, j, f)| (i, j, if i == j { 0.5 * f } else { f }))
                    .collect()
            })
            .collect();
        for (ii, &vi) in b.active.iter().enumerate() {
            for (jj, &vj) in b.active.iter().enumerate().skip(ii) {
                let mut acc = 0.0;
                for &(a, bb, f) in &scaled[ii] {
                    for &(c, d, g) in &scaled[jj] {
                        acc += f * g * (q[(a, c)] * q[(bb, d)] + q[(a, d)] * q[(bb, c)]);
                    }
                }
                acc *= 2.0;
                m[(vi, vj)] += acc;
                if vi != vj {
                    m[(vj, vi)] += acc;
                }
            }
        }
    }
    m
}

fn factor(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(1e-300, f64::max);
    let mut reg = 0.0;
    for _ in 0..8 {
        if let Some(ch) = Cholesky::new(m.clone()) {
            return Some(ch);
        }
        let next = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for i in 0..n {
            m[(i, i)] += next - reg;
        }
        reg = next;
    }
    None
}

struct Kkt<'a> {
    p: &'a Problem,
    chol: Cholesky<f64, Dyn>,
    hinv: Box<dyn Fn(&Cv) -> Cv + 'a>,
    h: Box<dyn Fn(&Cv) -> Cv + 'a>,
}

impl Kkt<'_> {
    fn solve_once(&self, px: &[f64], qz: &Cv) -> (Vec<f64>, Cv) {
        let hq = (self.hinv)(qz);
        let gt = gt_apply(self.p, &hq);
        let rhs = DVector::from_iterator(px.len(), px.iter().zip(&gt).map(|(a, b)| a + b));
        let u = self.chol.solve(&rhs);
        let u: Vec<f64> = u.iter().copied().collect();
        let gu = g_apply(self.p, &u);
        let w = (self.hinv)(&gu.sub(qz));
        (u, w)
    }

    /// Solves `[0 Gᵀ; G -H] [u; w] = [px; qz]` with iterative refinement.
    fn solve(&self, px: &[f64], qz: &Cv) -> (Vec<f64>, Cv) {
        let (mut u, mut w) = self.solve_once(px, qz);
        for _ in 0..KKT_REFINEMENT {
            let gtw = gt_apply(self.p, &w);
            let r1: Vec<f64> = px.iter().zip(&gtw).map(|(a, b)| a - b).collect();
            let mut r2 = qz.sub(&g_apply(self.p, &u));
            r2.axpy(1.0, &(self.h)(&w));
            let (du, dw) = self.solve_once(&r1, &r2);
            for (a, b) in u.iter_mut().zip(&du) {
                *a += b;
            }
            w.axpy(1.0, &dw);
        }
        (u, w)
    }
}

struct Direction {
    dx: Vec<f64>,
    dz: Cv,
    ds: Cv,
    dtau: f64,
    dkap: f64,
    /// `W⁻ᵀ Δs` and `W Δz`.
    ds_scaled: Cv,
    dz_scaled: Cv,
}

struct Snapshot {
    score: f64,
    x: Vec<f64>,
    z: Cv,
    tau: f64,
    dcost: f64,
    pres: f64,
}

pub(crate) fn run(p: &Problem, st: &SolverSettings) -> IpmOutput {
    let nu = p.lin_h.len() + p.blocks.iter().map(|b| b.size).sum::<usize>();
    let h = h_cone(p);
    let hnorm = h.norm().max(1.0);
    let cnorm = norm2(&p.c).max(1.0);

    // Starting point: least-norm s and z under unit scaling, pushed into the interior.
    let ident_q: Vec<DMatrix<f64>> = p.blocks.iter().map(|b| DMatrix::identity(b.size, b.size)).collect();
    let ident_refs: Vec<&DMatrix<f64>> = ident_q.iter().collect();
    let ones = vec![1.0; p.lin_h.len()];
    let Some(chol0) = factor(form_normal(p, &ones, &ident_refs)) else {
        return failure(p, SolveStatus::NumericalFailure, 0);
    };
    let kkt0 = Kkt {
        p,
        chol: chol0,
        hinv: Box::new(|u: &Cv| u.clone()),
        h: Box::new(|u: &Cv| u.clone()),
    };
    let zero_x = vec![0.0; p.n];
    let (x0, w0) = kkt0.solve(&zero_x, &h);
    let mut x = x0;
    let mut s = w0;
    s.scale(-1.0);
    let neg_c: Vec<f64> = p.c.iter().map(|v| -v).collect();
    let (_, mut z) = kkt0.solve(&neg_c, &Cv::zeros_like(p));
    let e = Cv::identity(p);
    for v in [&mut s, &mut z] {
        let m = v.min_eig();
        if m <= 1e-8 * v.norm().max(1.0) {
            v.axpy(1.0 - m, &e);
        }
    }
    let mut tau = 1.0;
    let mut kap = 1.0;

    let mut best: Option<Snapshot> = None;
    // On a stall, fall back to the best iterate seen.
    let stalled = |best: Option<Snapshot>, status: SolveStatus, iter: usize| match best {
        Some(b) => {
            let status = if b.score <= st.near_tol { SolveStatus::Optimal } else { status };
            finish(b.x, b.z, b.tau, b.dcost, b.pres, status, iter)
        }
        None => failure(p, status, iter),
    };
    for iter in 0..=st.max_iter {
        let gx = g_apply(p, &x);
        let mut rz = gx.clone();
        rz.axpy(1.0, &s);
        rz.axpy(-tau, &h);
        let gtz = gt_apply(p, &z);
        let rx: Vec<f64> = gtz.iter().zip(&p.c).map(|(g, c)| g + c * tau).collect();
        let cx = dotv(&p.c, &x);
        let hz = h.dot(&z);
        let rt = kap + cx + hz;
        let sz = s.dot(&z);
        let mu = (sz + tau * kap) / (nu as f64 + 1.0);

        let pres = rz.norm() / tau / hnorm;
        let dres = norm2(&rx) / tau / cnorm;
        let pcost = cx / tau;
        let dcost = -hz / tau;
        let gap = sz / (tau * tau);
        let rel_gap = gap.max((pcost - dcost).abs()) / pcost.abs().max(1.0);
        if !(pres.is_finite() && dres.is_finite() && rel_gap.is_finite()) {
            return stalled(best, SolveStatus::NumericalFailure, iter);
        }
        let score = pres.max(dres).max(rel_gap);
        if best.as_ref().map_or(true, |b| score < b.score) {
            best = Some(Snapshot {
                score,
                x: x.clone(),
                z: z.clone(),
                tau,
                dcost,
                pres,
            });
        }
        if pres <= st.feas_tol && dres <= st.feas_tol && rel_gap <= st.gap_tol {
            return finish(x, z, tau, dcost, pres, SolveStatus::Optimal, iter);
        }
        if tau < kap {
            if hz < 0.0 && norm2(&gtz) / -hz <= st.infeas_tol * cnorm {
                return finish(x, z, tau, dcost, pres, SolveStatus::Infeasible, iter);
            }
            let mut gxs = gx.clone();
            gxs.axpy(1.0, &s);
            if cx < 0.0 && gxs.norm() / -cx <= st.infeas_tol * hnorm {
                return finish(x, z, tau, dcost, pres, SolveStatus::Unbounded, iter);
            }
        }
        if iter == st.max_iter {
            break;
        }

        let Some(sc) = Scaling::compute(&s, &z) else {
            return stalled(best, SolveStatus::NumericalFailure, iter);
        };
        let lin_w: Vec<f64> = sc.d.iter().map(|d| 1.0 / (d * d)).collect();
        let qs: Vec<&DMatrix<f64>> = sc.blocks.iter().map(|b| &b.q).collect();
        let Some(chol) = factor(form_normal(p, &lin_w, &qs)) else {
            return stalled(best, SolveStatus::NumericalFailure, iter);
        };
        let kkt = Kkt {
            p,
            chol,
            hinv: Box::new(|u: &Cv| sc.h_inv(u)),
            h: Box::new(|u: &Cv| sc.wt(&sc.w(u))),
        };
        let (x1, z1) = kkt.solve(&neg_c, &h);
        let denom = dotv(&p.c, &x1) + h.dot(&z1) - kap / tau;

        let lam = sc.lambda();
        let lam_sq = lam.jordan(&lam);

        let direction = |ex: &[f64], ez: &Cv, et: f64, dsr: &Cv, dk: f64| -> Direction {
            let t = sc.lam_div(dsr);
            let q = ez.sub(&sc.wt(&t));
            let (x2, z2) = kkt.solve(ex, &q);
            let dtau = (et - dotv(&p.c, &x2) - h.dot(&z2) - dk / tau) / denom;
            let dx: Vec<f64> = x2.iter().zip(&x1).map(|(a, b)| a + dtau * b).collect();
            let mut dz = z2;
            dz.axpy(dtau, &z1);
            let dz_scaled = sc.w(&dz);
            let ds_scaled = t.sub(&dz_scaled);
            let ds = sc.wt(&ds_scaled);
            let dkap = (dk - kap * dtau) / tau;
            Direction {
                dx,
                dz,
                ds,
                dtau,
                dkap,
                ds_scaled,
                dz_scaled,
            }
        };
        let step_len = |d: &Direction| -> f64 {
            let mut a = sc.max_step(&d.ds_scaled).min(sc.max_step(&d.dz_scaled));
            if d.dtau < 0.0 {
                a = a.min(-tau / d.dtau);
            }
            if d.dkap < 0.0 {
                a = a.min(-kap / d.dkap);
            }
            a
        };

        // Predictor.
        let ex: Vec<f64> = rx.iter().map(|v| -v).collect();
        let mut ez = rz.clone();
        ez.scale(-1.0);
        let mut ds_aff = lam_sq.clone();
        ds_aff.scale(-1.0);
        let aff = direction(&ex, &ez, -rt, &ds_aff, -tau * kap);
        let alpha_aff = step_len(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let k = 1.0 - sigma;
        let ex: Vec<f64> = rx.iter().map(|v| -k * v).collect();
        let mut ez = rz;
        ez.scale(-k);
        let mut dsr = lam_sq;
        dsr.scale(-1.0);
        dsr.axpy(-1.0, &aff.ds_scaled.jordan(&aff.dz_scaled));
        dsr.axpy(sigma * mu, &e);
        let dk = -tau * kap - aff.dtau * aff.dkap + sigma * mu;
        let dir = direction(&ex, &ez, -k * rt, &dsr, dk);
        let alpha = (st.step_fraction * step_len(&dir)).min(1.0);

        if !(alpha > 1e-12) || !dir.dz.is_finite() || !dir.ds.is_finite() {
            return stalled(best, SolveStatus::NumericalFailure, iter);
        }
        for (xi, di) in x.iter_mut().zip(&dir.dx) {
            *xi += alpha * di;
        }
        s.axpy(alpha, &dir.ds);
        z.axpy(alpha, &dir.dz);
        tau += alpha * dir.dtau;
        kap += alpha * dir.dkap;
        // Symmetrize against drift.
        for m in s.mats.iter_mut().chain(z.mats.iter_mut()) {
            let t = m.transpose();
            *m += t;
            *m *= 0.5;
        }
    }
    stalled(best, SolveStatus::IterLimit, st.max_iter)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    x: Vec<f64>,
    mut z: Cv,
    tau: f64,

    dcost: f64,
    pres: f64,
    status: SolveStatus,
    iterations: usize,
) -> IpmOutput {
    // Certificates are returned unnormalized; optimal points are divided by τ.
    let k = if status == SolveStatus::Infeasible || status == SolveStatus::Unbounded {
        1.0
    } else {
        1.0 / tau
    };
    z.scale(k);
    IpmOutput {
        status,
        x: x.into_iter().map(|v| v * k).collect(),
        z,
        dcost,
        pres,
        iterations,
    }
}

fn failure(p: &Problem, status: SolveStatus, iterations: usize) -> IpmOutput {
    IpmOutput {
        status,
        x: vec![f64::NAN; p.n],
        z: Cv::zeros_like(p),
        dcost: f64::NAN,
        pres: f64::NAN,
        iterations,
    }
}
