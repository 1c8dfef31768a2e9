//! Dense semidefinite programming over complex Hermitian PSD blocks and
//! nonnegative scalars.
//!
//! Problems are stated as maximization of a linear objective subject to
//! linear equality/inequality constraints. Hermitian data is realified via
//! [`embed_hermitian`], Ruiz-equilibrated, and handed to a homogeneous
//! self-dual interior-point engine; solutions come back on the complex side
//! with dual multipliers and a certified duality gap.
//!
//! Dual sign convention for a maximization problem: the returned multiplier
//! `y_l` is nonnegative for `Le` rows, nonpositive for `Ge` rows and free for
//! `Eq` rows, with dual slack `Z_i = sum_l y_l A_{l,i} - C_i >= 0` per block
//! and dual objective `sum_l y_l b_l` upper-bounding the primal.

mod embed;
mod ipm;

pub use embed::{derealify, embed_hermitian, hermitian_defect};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::SdpError;
use ipm::{ConeLayout, ConeVec, IpmOptions, RawStatus, StandardSdp};

/// Direction of one linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSense {
    Eq,
    Le,
    Ge,
}

/// One linear constraint: sum of block inner products plus a scalar linear
/// form, compared against `rhs`.
#[derive(Debug, Clone)]
pub struct SdpConstraint {
    /// One Hermitian coefficient matrix per PSD block (zero matrices where a
    /// block does not appear).
    pub block_coeffs: Vec<DMatrix<Complex64>>,
    /// One real coefficient per nonnegative scalar variable.
    pub scalar_coeffs: Vec<f64>,
    pub rhs: f64,
    pub sense: ConstraintSense,
}

/// Maximization of a linear objective over PSD blocks and nonnegative
/// scalars under linear constraints.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub scalar_count: usize,
    pub objective_blocks: Vec<DMatrix<Complex64>>,
    pub objective_scalars: Vec<f64>,
    pub constraints: Vec<SdpConstraint>,
}

/// Solver tolerances; `gap_tol` is relative to the objective scale.
#[derive(Debug, Clone)]
pub struct SdpTolerances {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SdpTolerances {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Certificate accompanying non-optimal outcomes.
#[derive(Debug, Clone)]
pub enum SdpCertificate {
    /// Farkas ray in the dual multipliers: aggregating the constraints with
    /// these weights is inconsistent with the cone constraints.
    PrimalInfeasible { duals: Vec<f64> },
    /// Feasible direction with positive objective growth.
    Unbounded {
        blocks: Vec<DMatrix<Complex64>>,
        scalars: Vec<f64>,
    },
}

/// Primal-dual answer for an [`SdpProblem`].
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub blocks: Vec<DMatrix<Complex64>>,
    pub scalars: Vec<f64>,
    /// One multiplier per constraint; see the module docs for signs.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// dual objective - primal objective (nonnegative up to roundoff).
    pub duality_gap: f64,
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
    pub iterations: usize,
    pub certificate: Option<SdpCertificate>,
    /// 1-norm condition estimate of the final Schur complement.
    pub schur_cond: f64,
    pub diagnostics: String,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.objective_blocks.len() != self.block_dims.len() {
            return Err(SdpError::InvalidProblem(
                "objective block count mismatch".into(),
            ));
        }
        if self.objective_scalars.len() != self.scalar_count {
            return Err(SdpError::InvalidProblem(
                "objective scalar count mismatch".into(),
            ));
        }
        let check_mat = |m: &DMatrix<Complex64>, dim: usize| -> Result<(), SdpError> {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(SdpError::InvalidProblem(format!(
                    "coefficient matrix is {}x{}, block dimension is {dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let defect = hermitian_defect(m);
            if defect > 1e-12 * m.norm().max(1.0) {
                return Err(SdpError::NotHermitian(defect));
            }
            Ok(())
        };
        for (m, &d) in self.objective_blocks.iter().zip(&self.block_dims) {
            check_mat(m, d)?;
        }
        for con in &self.constraints {
            if con.block_coeffs.len() != self.block_dims.len()
                || con.scalar_coeffs.len() != self.scalar_count
            {
                return Err(SdpError::InvalidProblem(
                    "constraint coefficient count mismatch".into(),
                ));
            }
            for (m, &d) in con.block_coeffs.iter().zip(&self.block_dims) {
                check_mat(m, d)?;
            }
            if !con.rhs.is_finite() {
                return Err(SdpError::InvalidProblem("non-finite rhs".into()));
            }
        }
        Ok(())
    }

    fn n_ineq(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.sense != ConstraintSense::Eq)
            .count()
    }
}

/// Equilibration scales carried from the standard form back to the original.
struct Scales {
    row: Vec<f64>,
    block: Vec<f64>,
    nn: Vec<f64>,
    s_b: f64,
    s_c: f64,
}

/// Per-variable magnitude estimates from a scout solve. Matrix-entry
/// equilibration alone cannot see how large the *solution* is; scaling
/// variables to unit magnitude keeps the homogeneous embedding's tau near
/// one, which is what bounds the attainable relative gap in f64.
struct ColHints {
    blocks: Vec<f64>,
    nn: Vec<f64>,
}

fn build_standard(
    problem: &SdpProblem,
    hints: Option<&ColHints>,
) -> Result<(StandardSdp, Scales), SdpError> {
    let layout = ConeLayout {
        mat_dims: problem.block_dims.iter().map(|&d| 2 * d).collect(),
        nn: problem.scalar_count + problem.n_ineq(),
    };
    // internal form minimizes, with GE rows negated into LE and slacks added
    let mut c = ConeVec::zeros(&layout);
    for (i, ob) in problem.objective_blocks.iter().enumerate() {
        c.mats[i] = embed_hermitian(ob)? * -0.5;
    }
    for (j, &v) in problem.objective_scalars.iter().enumerate() {
        c.nn[j] = -v;
    }
    let mut rows = Vec::with_capacity(problem.constraints.len());
    let mut b = DVector::<f64>::zeros(problem.constraints.len());
    let mut slack_idx = problem.scalar_count;
    for (l, con) in problem.constraints.iter().enumerate() {
        let flip = if con.sense == ConstraintSense::Ge {
            -1.0
        } else {
            1.0
        };
        let mut row = ConeVec::zeros(&layout);
        for (i, mat) in con.block_coeffs.iter().enumerate() {
            row.mats[i] = embed_hermitian(mat)? * (0.5 * flip);
        }
        for (j, &v) in con.scalar_coeffs.iter().enumerate() {
            row.nn[j] = v * flip;
        }
        if con.sense != ConstraintSense::Eq {
            row.nn[slack_idx] = 1.0;
            slack_idx += 1;
        }
        b[l] = con.rhs * flip;
        rows.push(row);
    }
    let mut std = StandardSdp { layout, rows, b, c };

    // Ruiz equilibration over rows and cone coordinates (one scalar per PSD
    // block to preserve the cone), then a final norm scaling of b and c.
    let n_blocks = std.layout.mat_dims.len();
    let n_nn = std.layout.nn;
    let mut scales = Scales {
        row: vec![1.0; std.rows.len()],
        block: vec![1.0; n_blocks],
        nn: vec![1.0; n_nn],
        s_b: 1.0,
        s_c: 1.0,
    };
    if let Some(h) = hints {
        for i in 0..n_blocks {
            let s = h.blocks[i];
            for row in &mut std.rows {
                row.mats[i] *= s;
            }
            std.c.mats[i] *= s;
            scales.block[i] *= s;
        }
        for j in 0..n_nn {
            let s = h.nn[j];
            for row in &mut std.rows {
                row.nn[j] *= s;
            }
            std.c.nn[j] *= s;
            scales.nn[j] *= s;
        }
    }
    // With solution hints the column scales are fixed by the hints; only the
    // rows get equilibrated (a column pass would undo the hint scaling).
    let col_passes = if hints.is_some() { 0 } else { 4 };
    for pass in 0..4 {
        for (l, row) in std.rows.iter_mut().enumerate() {
            let mut norm: f64 = 0.0;
            for m in &row.mats {
                norm = norm.max(m.amax());
            }
            norm = norm.max(row.nn.amax());
            if norm > 0.0 && norm.is_finite() {
                let s = 1.0 / norm.sqrt();
                row.scale(s);
                std.b[l] *= s;
                scales.row[l] *= s;
            }
        }
        if pass >= col_passes {
            continue;
        }
        for i in 0..n_blocks {
            let mut norm: f64 = std.c.mats[i].amax();
            for row in &std.rows {
                norm = norm.max(row.mats[i].amax());
            }
            if norm > 0.0 && norm.is_finite() {
                let s = 1.0 / norm.sqrt();
                for row in &mut std.rows {
                    row.mats[i] *= s;
                }
                std.c.mats[i] *= s;
                scales.block[i] *= s;
            }
        }
        for j in 0..n_nn {
            let mut norm: f64 = std.c.nn[j].abs();
            for row in &std.rows {
                norm = norm.max(row.nn[j].abs());
            }
            if norm > 0.0 && norm.is_finite() {
                let s = 1.0 / norm.sqrt();
                for row in &mut std.rows {
                    row.nn[j] *= s;
                }
                std.c.nn[j] *= s;
                scales.nn[j] *= s;
            }
        }
    }
    scales.s_b = std.b.amax().max(1e-12);
    std.b /= scales.s_b;
    let mut c_norm: f64 = std.c.nn.amax();
    for m in &std.c.mats {
        c_norm = c_norm.max(m.amax());
    }
    scales.s_c = c_norm.max(1e-12);
    std.c.scale(1.0 / scales.s_c);
    Ok((std, scales))
}

/// Solve a maximization SDP.
///
/// Runs the interior-point engine twice when needed: a scout pass on the
/// entry-equilibrated problem, then (if tolerances were not met) a second
/// pass with columns rescaled by the scout's solution magnitudes.
pub fn solve(problem: &SdpProblem, tol: &SdpTolerances) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let opts = IpmOptions {
        gap_tol: tol.gap_tol,
        feas_tol: tol.feas_tol,
        max_iter: tol.max_iter,
    };
    let merit = |o: &ipm::IpmResult| o.primal_residual.max(o.dual_residual).max(o.rel_gap);
    let mut current = ipm_on(problem, None, &opts)?;
    for _ in 0..3 {
        match current.0.status {
            RawStatus::Optimal | RawStatus::PrimalInfeasible | RawStatus::DualInfeasible => break,
            RawStatus::Failed(_) => {}
        }
        let hints = hints_from_scout(problem, &current.0, &current.1);
        let next = ipm_on(problem, Some(&hints), &opts)?;
        let improved = !matches!(next.0.status, RawStatus::Failed(_))
            || merit(&next.0) < merit(&current.0);
        if improved {
            current = next;
        } else {
            break;
        }
    }
    assemble_solution(problem, current.0, current.1)
}

fn ipm_on(
    problem: &SdpProblem,
    hints: Option<&ColHints>,
    opts: &IpmOptions,
) -> Result<(ipm::IpmResult, Scales), SdpError> {
    let (std, scales) = build_standard(problem, hints)?;
    Ok((ipm::ipm_solve(&std, opts), scales))
}

/// Per-variable magnitudes of a scout solution, mapped back to the original
/// problem scale and clamped to a sane dynamic range.
fn hints_from_scout(
    problem: &SdpProblem,
    out: &ipm::IpmResult,
    scales: &Scales,
) -> ColHints {
    let mut blocks = Vec::with_capacity(problem.block_dims.len());
    for (i, m) in out.x.mats.iter().enumerate() {
        let dim = m.nrows().max(1) as f64;
        let mean_diag = m.diagonal().iter().sum::<f64>() / dim;
        blocks.push(mean_diag.abs() * scales.s_b * scales.block[i]);
    }
    let mut nn = Vec::with_capacity(out.x.nn.len());
    for (j, &v) in out.x.nn.iter().enumerate() {
        nn.push(v.abs() * scales.s_b * scales.nn[j]);
    }
    let max_est = blocks
        .iter()
        .chain(nn.iter())
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let floor = 1e-8 * max_est;
    ColHints {
        blocks: blocks.iter().map(|&v| v.max(floor)).collect(),
        nn: nn.iter().map(|&v| v.max(floor)).collect(),
    }
}

fn assemble_solution(
    problem: &SdpProblem,
    outcome: ipm::IpmResult,
    scales: Scales,
) -> Result<SdpSolution, SdpError> {
    // unscale: x = s_b * D x~, y = s_c * E y~ (then flip GE rows back)
    let unscale_primal = |x: &ConeVec| -> (Vec<DMatrix<Complex64>>, Vec<f64>) {
        let blocks = x
            .mats
            .iter()
            .enumerate()
            .map(|(i, m)| derealify(&(m * (scales.s_b * scales.block[i]))))
            .collect();
        let scalars = (0..problem.scalar_count)
            .map(|j| x.nn[j] * scales.s_b * scales.nn[j])
            .collect();
        (blocks, scalars)
    };
    let unscale_duals = |y: &DVector<f64>| -> Vec<f64> {
        problem
            .constraints
            .iter()
            .enumerate()
            .map(|(l, con)| {
                let v = y[l] * scales.s_c * scales.row[l];
                match con.sense {
                    ConstraintSense::Ge => v,
                    _ => -v,
                }
            })
            .collect()
    };

    let (status, certificate, blocks, scalars, duals) = match outcome.status {
        RawStatus::Optimal => {
            let (blocks, scalars) = unscale_primal(&outcome.x);
            let duals = unscale_duals(&outcome.y);
            (SdpStatus::Optimal, None, blocks, scalars, duals)
        }
        RawStatus::PrimalInfeasible => {
            let duals = unscale_duals(&outcome.y);
            (
                SdpStatus::Infeasible,
                Some(SdpCertificate::PrimalInfeasible {
                    duals: duals.clone(),
                }),
                vec![],
                vec![],
                duals,
            )
        }
        RawStatus::DualInfeasible => {
            let (blocks, scalars) = unscale_primal(&outcome.x);
            (
                SdpStatus::Unbounded,
                Some(SdpCertificate::Unbounded {
                    blocks: blocks.clone(),
                    scalars: scalars.clone(),
                }),
                blocks,
                scalars,
                vec![],
            )
        }
        RawStatus::Failed(_) => {
            let (blocks, scalars) = unscale_primal(&outcome.x);
            let duals = unscale_duals(&outcome.y);
            (SdpStatus::NumericalFailure, None, blocks, scalars, duals)
        }
    };

    let mut solution = SdpSolution {
        status,
        blocks,
        scalars,
        duals,
        objective: 0.0,
        dual_objective: 0.0,
        duality_gap: outcome.rel_gap,
        max_primal_residual: outcome.primal_residual,
        max_dual_residual: outcome.dual_residual,
        iterations: outcome.iterations,
        certificate,
        schur_cond: outcome.schur_cond,
        diagnostics: match &outcome.status {
            RawStatus::Failed(msg) => msg.clone(),
            _ => String::new(),
        },
    };
    if solution.status == SdpStatus::Optimal {
        let report = check_certificate(problem, &solution);
        solution.objective = report.objective;
        solution.dual_objective = report.dual_objective;
        solution.duality_gap = report.duality_gap;
        solution.max_primal_residual = report.max_constraint_violation;
        solution.max_dual_residual = (-report.min_eig_dual_slack).max(0.0);
    }
    Ok(solution)
}

/// Health check of one constraint at the returned solution.
#[derive(Debug, Clone)]
pub struct ConstraintCheck {
    pub value: f64,
    pub rhs: f64,
    pub sense: ConstraintSense,
    /// Amount by which the constraint is violated (0 when satisfied).
    pub violation: f64,
    pub dual: f64,
    /// Magnitude of a wrong-signed multiplier (0 when the sign is right).
    pub sign_violation: f64,
    /// |dual * slack| for inequality rows.
    pub complementarity: f64,
}

/// Everything recomputed from scratch at a claimed-optimal solution; never
/// trusts solver-internal state.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub max_constraint_violation: f64,
    /// Most negative eigenvalue over primal blocks (and scalar values).
    pub min_eig_primal: f64,
    /// Most negative eigenvalue over dual slacks Z_i = sum y A - C and the
    /// scalar dual slacks.
    pub min_eig_dual_slack: f64,
    /// Max of |<X_i, Z_i>|, |u_j z_j| and per-constraint |dual * slack|.
    pub max_complementarity: f64,
    pub max_sign_violation: f64,
    pub constraints: Vec<ConstraintCheck>,
}

fn herm_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a.adjoint() * b).trace().re
}

/// Recompute feasibility, duality gap, complementarity and multiplier signs
/// for a solution of `problem`.
pub fn check_certificate(problem: &SdpProblem, solution: &SdpSolution) -> CertificateReport {
    let mut objective = 0.0;
    for (c, x) in problem.objective_blocks.iter().zip(&solution.blocks) {
        objective += herm_inner(c, x);
    }
    for (c, u) in problem.objective_scalars.iter().zip(&solution.scalars) {
        objective += c * u;
    }
    let dual_objective: f64 = problem
        .constraints
        .iter()
        .zip(&solution.duals)
        .map(|(con, y)| con.rhs * y)
        .collect::<Vec<_>>()
        .iter()
        .sum();

    let mut max_violation: f64 = 0.0;
    let mut max_sign: f64 = 0.0;
    let mut max_comp: f64 = 0.0;
    let mut checks = Vec::with_capacity(problem.constraints.len());
    for (con, &dual) in problem.constraints.iter().zip(&solution.duals) {
        let mut value = 0.0;
        for (a, x) in con.block_coeffs.iter().zip(&solution.blocks) {
            value += herm_inner(a, x);
        }
        for (a, u) in con.scalar_coeffs.iter().zip(&solution.scalars) {
            value += a * u;
        }
        let (violation, sign_violation, comp) = match con.sense {
            ConstraintSense::Eq => ((value - con.rhs).abs(), 0.0, 0.0),
            ConstraintSense::Le => (
                (value - con.rhs).max(0.0),
                (-dual).max(0.0),
                (dual * (con.rhs - value)).abs(),
            ),
            ConstraintSense::Ge => (
                (con.rhs - value).max(0.0),
                dual.max(0.0),
                (dual * (value - con.rhs)).abs(),
            ),
        };
        max_violation = max_violation.max(violation);
        max_sign = max_sign.max(sign_violation);
        max_comp = max_comp.max(comp);
        checks.push(ConstraintCheck {
            value,
            rhs: con.rhs,
            sense: con.sense,
            violation,
            dual,
            sign_violation,
            complementarity: comp,
        });
    }

    let mut min_eig_primal = f64::INFINITY;
    let mut min_eig_dual = f64::INFINITY;
    for (i, x) in solution.blocks.iter().enumerate() {
        let ev = x.clone().symmetric_eigen().eigenvalues;
        min_eig_primal = min_eig_primal.min(ev.iter().cloned().fold(f64::INFINITY, f64::min));
        // Z_i = sum_l y_l A_{l,i} - C_i
        let mut zi = problem.objective_blocks[i].clone() * Complex64::new(-1.0, 0.0);
        for (con, &y) in problem.constraints.iter().zip(&solution.duals) {
            zi += &con.block_coeffs[i] * Complex64::new(y, 0.0);
        }
        let evz = zi.clone().symmetric_eigen().eigenvalues;
        min_eig_dual = min_eig_dual.min(evz.iter().cloned().fold(f64::INFINITY, f64::min));
        max_comp = max_comp.max(herm_inner(x, &zi).abs());
    }
    for (j, &u) in solution.scalars.iter().enumerate() {
        min_eig_primal = min_eig_primal.min(u);
        let mut zj = -problem.objective_scalars[j];
        for (con, &y) in problem.constraints.iter().zip(&solution.duals) {
            zj += con.scalar_coeffs[j] * y;
        }
        min_eig_dual = min_eig_dual.min(zj);
        max_comp = max_comp.max((u * zj).abs());
    }
    if solution.blocks.is_empty() && solution.scalars.is_empty() {
        min_eig_primal = 0.0;
        min_eig_dual = 0.0;
    }

    CertificateReport {
        objective,
        dual_objective,
        duality_gap: dual_objective - objective,
        max_constraint_violation: max_violation,
        min_eig_primal,
        min_eig_dual_slack: min_eig_dual,
        max_complementarity: max_comp,
        max_sign_violation: max_sign,
        constraints: checks,
    }
}

/// Plain-text sparse dump of a problem for cross-checking against external
/// solvers. Matrix entries are emitted one per line as
/// `<block> <row> <col> <re> <im>` within `obj`/`coef` records; scalar terms
/// use block index `s<j>`.
pub fn dump_problem(problem: &SdpProblem) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let dims: Vec<String> = problem.block_dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "blocks {}", dims.join(" "));
    let _ = writeln!(out, "scalars {}", problem.scalar_count);
    let emit_mat = |out: &mut String, tag: &str, i: usize, m: &DMatrix<Complex64>| {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v.norm() > 0.0 {
                    let _ = writeln!(out, "{tag} {i} {r} {c} {:.17e} {:.17e}", v.re, v.im);
                }
            }
        }
    };
    for (i, m) in problem.objective_blocks.iter().enumerate() {
        emit_mat(&mut out, "obj", i, m);
    }
    for (j, &v) in problem.objective_scalars.iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(out, "obj s{j} {:.17e}", v);
        }
    }
    for (l, con) in problem.constraints.iter().enumerate() {
        let sense = match con.sense {
            ConstraintSense::Eq => "EQ",
            ConstraintSense::Le => "LE",
            ConstraintSense::Ge => "GE",
        };
        let _ = writeln!(out, "con {l} {sense} {:.17e}", con.rhs);
        for (i, m) in con.block_coeffs.iter().enumerate() {
            emit_mat(&mut out, &format!("coef {l}"), i, m);
        }
        for (j, &v) in con.scalar_coeffs.iter().enumerate() {
            if v != 0.0 {
                let _ = writeln!(out, "coef {l} s{j} {:.17e}", v);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
