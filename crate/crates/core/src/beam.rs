//! Artificial-noise beamforming design.
//!
//! For a fixed eavesdropper SINR cap gamma, the inner problem maximizes the
//! user SINR over the information covariance W, the AN covariance V and the
//! Charnes-Cooper scaling t, subject to per-location eavesdropper caps, the
//! power budget and the sensing-accuracy constraint. The outer design sweeps
//! gamma, maximizing the secrecy rate log2((1 + f(gamma)) / (1 + gamma)).
//! Optima are certified (dual positivity, KKT slacks) and the information
//! covariance is projected to rank one against the null space of the dual
//! matrix, moving residual rank into the AN covariance at no loss.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::steering_tx;
use crate::error::BeamError;
use crate::eval::{kkt_report, KktReport};
use crate::pcrb::{pcrb_closed_form, q_bar, QbarMatrix};
use crate::scenario::ScenarioConfig;
use crate::sdp::{
    solve, ConstraintSense, SdpConstraint, SdpProblem, SdpSolution, SdpStatus, SdpTolerances,
};

/// Multipliers of the inner problem in the signs of its Lagrangian: beta_k
/// for the eavesdropper caps, lambda for the normalization equality, rho for
/// the power budget, psi for the sensing constraint.
#[derive(Debug, Clone)]
pub struct InnerDuals {
    pub beta_k: Vec<f64>,
    pub lambda: f64,
    pub rho: f64,
    pub psi: f64,
}

/// Outcome of one inner solve at a fixed gamma.
#[derive(Debug, Clone)]
pub struct InnerSolveResult {
    pub gamma: f64,
    pub w_mat: DMatrix<Complex64>,
    pub v_mat: DMatrix<Complex64>,
    pub t: f64,
    /// Optimal user SINR f(gamma) = tr(H W*).
    pub f_gamma: f64,
    pub duals: InnerDuals,
    pub status: SdpStatus,
    pub sensing_vacuous: bool,
    /// Dual positivity required by the rank-one recovery: lambda and rho
    /// strictly positive whenever f(gamma) > 0.
    pub lemma1_ok: bool,
    pub duality_gap: f64,
    pub solver_iterations: usize,
}

/// Assembled inner problem plus the vacuous-sensing flag.
#[derive(Debug, Clone)]
pub struct AssembledInner {
    pub problem: SdpProblem,
    pub sensing_vacuous: bool,
}

fn identity_c(n: usize) -> DMatrix<Complex64> {
    DMatrix::identity(n, n)
}

fn outer(v: &DVector<Complex64>) -> DMatrix<Complex64> {
    v * v.adjoint()
}

fn herm_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a.adjoint() * b).trace().re
}

fn eve_outers(sc: &ScenarioConfig) -> Vec<DMatrix<Complex64>> {
    sc.prior
        .angles_rad()
        .iter()
        .map(|&t| outer(&steering_tx(t, &sc.array)))
        .collect()
}

/// Build the inner SDP for a given gamma. Constraint order: K eavesdropper
/// caps, the normalization equality, the power budget, the sensing bound.
pub fn assemble_inner(
    gamma: f64,
    sc: &ScenarioConfig,
    qbar: &QbarMatrix,
) -> Result<AssembledInner, BeamError> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(BeamError::InvalidInput(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let n = sc.array.n_tx();
    let h_outer = outer(sc.channels.user_channel());
    let a_outers = eve_outers(sc);
    let c_e = sc.channels.eve_noise_eff();
    let sigma2 = sc.channels.noise_user_w();
    let p = sc.channels.power_budget_w();
    let s_gamma = sc.sensing_rhs();
    let zero = DMatrix::<Complex64>::zeros(n, n);

    let mut constraints = Vec::with_capacity(a_outers.len() + 3);
    for ak in &a_outers {
        constraints.push(SdpConstraint {
            block_coeffs: vec![ak.clone(), ak * Complex64::new(-gamma, 0.0)],
            scalar_coeffs: vec![-gamma * c_e],
            rhs: 0.0,
            sense: ConstraintSense::Le,
        });
    }
    constraints.push(SdpConstraint {
        block_coeffs: vec![zero.clone(), h_outer.clone()],
        scalar_coeffs: vec![sigma2],
        rhs: 1.0,
        sense: ConstraintSense::Eq,
    });
    constraints.push(SdpConstraint {
        block_coeffs: vec![identity_c(n), identity_c(n)],
        scalar_coeffs: vec![-p],
        rhs: 0.0,
        sense: ConstraintSense::Le,
    });
    constraints.push(SdpConstraint {
        block_coeffs: vec![qbar.matrix.clone(), qbar.matrix.clone()],
        scalar_coeffs: vec![-s_gamma],
        rhs: 0.0,
        sense: ConstraintSense::Ge,
    });

    Ok(AssembledInner {
        problem: SdpProblem {
            block_dims: vec![n, n],
            scalar_count: 1,
            objective_blocks: vec![h_outer, zero],
            objective_scalars: vec![0.0],
            constraints,
        },
        sensing_vacuous: sc.sensing_vacuous(),
    })
}

/// Default tolerances for the inner solves of the design pipeline. The gap
/// tolerance is slightly looser than the solver default: a handful of
/// near-degenerate gammas bottom out around 1e-8 in double precision, and
/// solution quality is certified downstream by the KKT reports rather than
/// by the solver's own gap measure.
pub fn inner_tolerances() -> SdpTolerances {
    SdpTolerances {
        gap_tol: 3e-8,
        feas_tol: 1e-8,
        max_iter: 300,
    }
}

fn inner_from_solution(
    gamma: f64,
    sc: &ScenarioConfig,
    sensing_vacuous: bool,
    sol: SdpSolution,
) -> InnerSolveResult {
    let n = sc.array.n_tx();
    let k = sc.prior.len();
    let (w_mat, v_mat, t) = if sol.status == SdpStatus::Optimal {
        (
            sol.blocks[0].clone(),
            sol.blocks[1].clone(),
            sol.scalars[0],
        )
    } else {
        (
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            0.0,
        )
    };
    let f_gamma = if sol.status == SdpStatus::Optimal {
        sol.objective
    } else {
        0.0
    };
    let duals = if sol.duals.len() == k + 3 {
        InnerDuals {
            beta_k: sol.duals[0..k].to_vec(),
            lambda: sol.duals[k],
            rho: sol.duals[k + 1],
            psi: -sol.duals[k + 2],
        }
    } else {
        InnerDuals {
            beta_k: vec![0.0; k],
            lambda: 0.0,
            rho: 0.0,
            psi: 0.0,
        }
    };
    let lemma1_ok = sol.status != SdpStatus::Optimal
        || f_gamma <= 0.0
        || (duals.lambda > 1e-10 && duals.rho > 1e-10);
    InnerSolveResult {
        gamma,
        w_mat,
        v_mat,
        t,
        f_gamma,
        duals,
        status: sol.status,
        sensing_vacuous,
        lemma1_ok,
        duality_gap: sol.duality_gap,
        solver_iterations: sol.iterations,
    }
}

/// Solve the inner problem at a given gamma with explicit tolerances and a
/// precomputed sensing matrix.
pub fn solve_inner_with(
    gamma: f64,
    sc: &ScenarioConfig,
    qbar: &QbarMatrix,
    tol: &SdpTolerances,
) -> Result<InnerSolveResult, BeamError> {
    let assembled = assemble_inner(gamma, sc, qbar)?;
    let sol = solve(&assembled.problem, tol)?;
    let result = inner_from_solution(gamma, sc, assembled.sensing_vacuous, sol);
    if result.status == SdpStatus::Optimal {
        if result.t < 1e-12 {
            return Err(BeamError::CertificateFailure(format!(
                "scaling variable collapsed: t = {:.3e}",
                result.t
            )));
        }
    }
    Ok(result)
}

/// Solve the inner problem at a given gamma with the pipeline tolerances.
pub fn solve_inner(gamma: f64, sc: &ScenarioConfig) -> Result<InnerSolveResult, BeamError> {
    let qbar = q_bar(&sc.prior, &sc.array);
    solve_inner_with(gamma, sc, &qbar, &inner_tolerances())
}

/// Numeric health of the rank-one reconstruction: objective preservation and
/// re-feasibility of every constraint.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    /// Dimension of the null space of the dual matrix used for projection.
    pub null_dim: usize,
    /// Second-to-first eigenvalue ratio of the projected W.
    pub w_rank_ratio: f64,
    /// Relative drift of tr(H W) through the projection.
    pub objective_drift: f64,
    /// Residual of the normalization equality at the reconstructed point.
    pub normalization_residual: f64,
    /// Worst relative violation of the eavesdropper caps.
    pub worst_eve_violation: f64,
    /// Relative drift of tr(W) + tr(V) (exactly preserved in exact
    /// arithmetic).
    pub trace_drift: f64,
    /// Relative violation of the power budget.
    pub power_violation: f64,
    /// Relative violation of the sensing bound.
    pub sensing_violation: f64,
    /// Most negative eigenvalue of the reconstructed W and V, relative to
    /// their largest.
    pub min_eig_w: f64,
    pub min_eig_v: f64,
}

/// Reconstructed rank-one solution.
#[derive(Debug, Clone)]
pub struct RankOneReconstruction {
    pub w_bar: DMatrix<Complex64>,
    pub v_bar: DMatrix<Complex64>,
    pub t_bar: f64,
    pub report: ReconstructionReport,
}

const RANK_EPS: f64 = 1e-9;
const CERT_TOL: f64 = 1e-7;

/// Project the optimal W onto the orthogonal complement of the null space of
/// the dual matrix D = -lambda H - sum beta_k A_k + psi Qbar - rho I, moving
/// the removed part into V. Verifies rank-one-ness, objective preservation
/// and re-feasibility; fails with a certificate report otherwise.
pub fn reconstruct_rank_one(
    result: &InnerSolveResult,
    sc: &ScenarioConfig,
) -> Result<RankOneReconstruction, BeamError> {
    if result.status != SdpStatus::Optimal {
        return Err(BeamError::InvalidInput(
            "reconstruction requires an OPTIMAL inner result".into(),
        ));
    }
    let n = sc.array.n_tx();
    let qbar = q_bar(&sc.prior, &sc.array);
    let h_outer = outer(sc.channels.user_channel());
    let a_outers = eve_outers(sc);

    let mut d = h_outer.clone() * Complex64::new(-result.duals.lambda, 0.0);
    for (ak, &bk) in a_outers.iter().zip(&result.duals.beta_k) {
        d += ak * Complex64::new(-bk, 0.0);
    }
    d += &qbar.matrix * Complex64::new(result.duals.psi, 0.0);
    d -= identity_c(n) * Complex64::new(result.duals.rho, 0.0);

    let eig = d.symmetric_eigen();
    let max_abs = eig
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let null_cols: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() <= RANK_EPS * max_abs)
        .collect();
    let null_dim = null_cols.len();

    // P = I - Z Z^H, then W_bar = P W P and V_bar absorbs the difference.
    let mut proj = identity_c(n);
    for &i in &null_cols {
        let zi = eig.eigenvectors.column(i);
        let zi = DVector::from_column_slice(zi.as_slice());
        proj -= outer(&zi);
    }
    let w_bar = &proj * &result.w_mat * &proj;
    let w_bar = (&w_bar + w_bar.adjoint()) * Complex64::new(0.5, 0.0);
    let v_bar = &result.v_mat + (&result.w_mat - &w_bar);
    let v_bar = (&v_bar + v_bar.adjoint()) * Complex64::new(0.5, 0.0);
    // the solver returns the analytic center of the AN optimal face; walk to
    // a vertex so the AN covariance honors the rank bound, preserving every
    // constraint functional
    let mut functionals: Vec<&DMatrix<Complex64>> = vec![&h_outer];
    let eye = identity_c(n);
    functionals.push(&eye);
    functionals.push(&qbar.matrix);
    for ak in &a_outers {
        functionals.push(ak);
    }
    let v_bar = reduce_rank_preserving(&v_bar, &functionals, sc.prior.len().min(n));
    let t_bar = result.t;

    // certificate checks
    let obj_before = herm_inner(&h_outer, &result.w_mat);
    let obj_after = herm_inner(&h_outer, &w_bar);
    let obj_scale = obj_before.abs().max(1e-300);
    let objective_drift = (obj_after - obj_before).abs() / obj_scale;

    let ew = w_bar.clone().symmetric_eigen().eigenvalues;
    let mut evs: Vec<f64> = ew.iter().cloned().collect();
    evs.sort_by(|a, b| b.total_cmp(a));
    let w_rank_ratio = if evs[0] > 0.0 {
        evs.get(1).map_or(0.0, |l| l.abs() / evs[0])
    } else {
        1.0
    };
    let min_eig_w = evs.last().cloned().unwrap_or(0.0) / evs[0].abs().max(1e-300);

    let evv = v_bar.clone().symmetric_eigen().eigenvalues;
    let v_max = evv.iter().cloned().fold(0.0f64, f64::max);
    // normalize by the joint solution scale: a vanishing V may carry
    // noise-level negative eigenvalues that are meaningless next to W
    let solution_scale = v_max.max(evs[0].abs()).max(1e-300);
    let min_eig_v = evv.iter().cloned().fold(f64::INFINITY, f64::min) / solution_scale;

    let sigma2 = sc.channels.noise_user_w();
    let normalization_residual = (herm_inner(&h_outer, &v_bar) + t_bar * sigma2 - 1.0).abs();

    let c_e = sc.channels.eve_noise_eff();
    let mut worst_eve_violation = 0.0f64;
    for ak in &a_outers {
        let lhs = herm_inner(ak, &w_bar);
        let rhs = result.gamma * (herm_inner(ak, &v_bar) + t_bar * c_e);
        let scale = rhs.abs().max(lhs.abs()).max(1e-300);
        worst_eve_violation = worst_eve_violation.max((lhs - rhs).max(0.0) / scale);
    }

    let tr_before = result.w_mat.trace().re + result.v_mat.trace().re;
    let tr_after = w_bar.trace().re + v_bar.trace().re;
    let trace_drift = (tr_after - tr_before).abs() / tr_before.abs().max(1e-300);
    let p = sc.channels.power_budget_w();
    let power_violation = (tr_after - t_bar * p).max(0.0) / (t_bar * p).max(1e-300);

    let sense_lhs = herm_inner(&qbar.matrix, &(&w_bar + &v_bar));
    let sense_rhs = t_bar * sc.sensing_rhs();
    let sensing_violation =
        (sense_rhs - sense_lhs).max(0.0) / sense_rhs.abs().max(sense_lhs.abs()).max(1e-300);

    let report = ReconstructionReport {
        null_dim,
        w_rank_ratio,
        objective_drift,
        normalization_residual,
        worst_eve_violation,
        trace_drift,
        power_violation,
        sensing_violation,
        min_eig_w,
        min_eig_v,
    };

    let ok = w_rank_ratio <= CERT_TOL
        && objective_drift <= CERT_TOL
        && normalization_residual <= CERT_TOL
        && worst_eve_violation <= CERT_TOL
        && trace_drift <= 1e-10
        && power_violation <= CERT_TOL
        && sensing_violation <= CERT_TOL
        && min_eig_w >= -CERT_TOL
        && min_eig_v >= -CERT_TOL;
    if !ok {
        return Err(BeamError::CertificateFailure(format!("{report:?}")));
    }
    Ok(RankOneReconstruction {
        w_bar,
        v_bar,
        t_bar,
        report,
    })
}

/// Reduce the rank of a PSD matrix while preserving the values of a set of
/// Hermitian functionals tr(F_i X), by moving along null directions of the
/// functionals inside the current range until an eigenvalue hits zero
/// (Pataki-style reduction). An interior-point solver returns the analytic
/// center of the optimal face, which can have much higher rank than the
/// face's vertices; every quantity downstream only sees the functionals, so
/// walking to a vertex is free.
fn reduce_rank_preserving(
    x: &DMatrix<Complex64>,
    functionals: &[&DMatrix<Complex64>],
    max_rank: usize,
) -> DMatrix<Complex64> {
    let n = x.nrows();
    let m = functionals.len();
    let mut current = x.clone();
    for _ in 0..n {
        let eig = current.clone().symmetric_eigen();
        let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        if max_ev <= 0.0 {
            return current;
        }
        // the walk happens inside the positive eigenspace; everything else
        // (including tiny negative noise dimensions, which can carry real
        // functional mass) rides along untouched
        let keep: Vec<usize> = (0..n)
            .filter(|&i| eig.eigenvalues[i] > 1e-14 * max_ev)
            .collect();
        let tail: Vec<usize> = (0..n)
            .filter(|&i| {
                eig.eigenvalues[i] <= 1e-14 * max_ev
                    && eig.eigenvalues[i].abs() > 1e-30 * max_ev
            })
            .collect();
        let r = keep.len();
        if r <= max_rank {
            return current;
        }
        if r * r <= m {
            // no guaranteed null direction below the Pataki bound
            return current;
        }
        // basis of the current range and the functionals expressed in it
        let mut u = DMatrix::<Complex64>::zeros(n, r);
        for (col, &i) in keep.iter().enumerate() {
            u.set_column(col, &eig.eigenvectors.column(i));
        }
        let lam: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i]).collect();
        // constraint matrix over the r^2 real parameters of a Hermitian delta
        let mut con = DMatrix::<f64>::zeros(m, r * r);
        for (fi, f) in functionals.iter().enumerate() {
            let fu = u.adjoint() * *f * &u; // r x r Hermitian
            let mut col = 0;
            for i in 0..r {
                for j in i..r {
                    if i == j {
                        con[(fi, col)] = fu[(i, i)].re;
                        col += 1;
                    } else {
                        // tr(F U D U^H) contributes 2 Re(fu_ij) a + 2 Im(fu_ij) b
                        // for D_ij = a + ib
                        con[(fi, col)] = 2.0 * fu[(i, j)].re;
                        con[(fi, col + 1)] = 2.0 * fu[(i, j)].im;
                        col += 2;
                    }
                }
            }
        }
        // a null vector of the constraint map gives the direction; the Gram
        // matrix is small (r^2 <= 64) and exposes the full null space
        let gram = con.transpose() * &con;
        let geig = gram.symmetric_eigen();
        let g_max = geig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let mut min_idx = 0;
        for i in 0..geig.eigenvalues.len() {
            if geig.eigenvalues[i] < geig.eigenvalues[min_idx] {
                min_idx = i;
            }
        }
        if geig.eigenvalues[min_idx] > 1e-16 * g_max.max(1e-300) {
            return current;
        }
        let null_vec = geig.eigenvectors.column(min_idx).clone_owned();
        let mut delta = DMatrix::<Complex64>::zeros(r, r);
        let mut col = 0;
        for i in 0..r {
            for j in i..r {
                if i == j {
                    delta[(i, i)] = Complex64::new(null_vec[col], 0.0);
                    col += 1;
                } else {
                    let v = Complex64::new(null_vec[col], null_vec[col + 1]);
                    delta[(i, j)] = v;
                    delta[(j, i)] = v.conj();
                    col += 2;
                }
            }
        }
        // step to the cone boundary in the metric of the current spectrum
        let mut scaled = delta.clone();
        for i in 0..r {
            for j in 0..r {
                scaled[(i, j)] /= Complex64::new((lam[i] * lam[j]).sqrt(), 0.0);
            }
        }
        let sev = scaled.symmetric_eigen().eigenvalues;
        let s_min = sev.iter().cloned().fold(f64::INFINITY, f64::min);
        let s_max = sev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let t = if s_min < -1e-14 {
            1.0 / (-s_min)
        } else if s_max > 1e-14 {
            -1.0 / s_max
        } else {
            return current;
        };
        let mut core = DMatrix::<Complex64>::zeros(r, r);
        for i in 0..r {
            core[(i, i)] = Complex64::new(lam[i], 0.0);
        }
        core += delta * Complex64::new(t, 0.0);
        let mut next = &u * core * u.adjoint();
        for &i in &tail {
            let ui = DVector::from_column_slice(eig.eigenvectors.column(i).as_slice());
            next += outer(&ui) * Complex64::new(eig.eigenvalues[i], 0.0);
        }
        current = (&next + next.adjoint()) * Complex64::new(0.5, 0.0);
    }
    current
}

/// Fix the global phase so the largest-magnitude entry is real positive.
fn fix_phase(v: &mut DVector<Complex64>) {
    let mut idx = 0;
    let mut best = 0.0;
    for (i, c) in v.iter().enumerate() {
        if c.norm() > best {
            best = c.norm();
            idx = i;
        }
    }
    if best > 0.0 {
        let phase = v[idx] / Complex64::new(best, 0.0);
        let rot = phase.conj();
        for c in v.iter_mut() {
            *c *= rot;
        }
    }
}

/// Recover beam vectors from the reconstructed covariances: the principal
/// eigenvector of W/t carries the information beam, the eigenvectors of V/t
/// above a relative threshold become AN beams (at most `beam_cap`).
pub fn extract_beams(
    w_bar: &DMatrix<Complex64>,
    v_bar: &DMatrix<Complex64>,
    t_bar: f64,
    beam_cap: usize,
) -> (DVector<Complex64>, Vec<DVector<Complex64>>) {
    let w_scaled = w_bar / Complex64::new(t_bar, 0.0);
    let eig = w_scaled.symmetric_eigen();
    let mut best = 0;
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let lam = eig.eigenvalues[best].max(0.0);
    let mut w = DVector::from_column_slice(eig.eigenvectors.column(best).as_slice())
        * Complex64::new(lam.sqrt(), 0.0);
    fix_phase(&mut w);

    let v_scaled = v_bar / Complex64::new(t_bar, 0.0);
    let eig = v_scaled.symmetric_eigen();
    let v_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vs = Vec::new();
    for &i in &order {
        if vs.len() >= beam_cap {
            break;
        }
        let lam = eig.eigenvalues[i];
        if lam > RANK_EPS * v_max && lam > 0.0 {
            let mut v = DVector::from_column_slice(eig.eigenvectors.column(i).as_slice())
                * Complex64::new(lam.sqrt(), 0.0);
            fix_phase(&mut v);
            vs.push(v);
        }
    }
    (w, vs)
}

/// Feasibility of the sensing constraint at the power budget: compares the
/// best achievable tr(R Qbar) = P lambda_max(Qbar) against the requirement.
#[derive(Debug, Clone, Copy)]
pub struct FeasibilityProbe {
    pub feasible: bool,
    pub max_lhs: f64,
    pub required_rhs: f64,
}

pub fn feasibility_probe(sc: &ScenarioConfig) -> FeasibilityProbe {
    let qbar = q_bar(&sc.prior, &sc.array);
    let lam_max = qbar
        .matrix
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let max_lhs = sc.channels.power_budget_w() * lam_max;
    let required_rhs = sc.sensing_rhs();
    FeasibilityProbe {
        feasible: sc.sensing_vacuous() || max_lhs >= required_rhs,
        max_lhs,
        required_rhs,
    }
}

/// Certificates attached to a finished design.
#[derive(Debug, Clone)]
pub struct SolutionCertificates {
    pub reconstruction: ReconstructionReport,
    pub kkt: KktReport,
}

/// Flags describing how a solution was obtained.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolutionFlags {
    pub sensing_vacuous: bool,
    /// False for benchmark schemes that cannot meet the sensing threshold.
    pub infeasible: bool,
    /// Set when the no-AN benchmark fell back to the dominant eigenvector of
    /// a non-rank-one relaxation optimum.
    pub rank_one_fallback: bool,
}

/// A finished beamforming design: the information beam, the AN beams and the
/// attached quality metrics.
#[derive(Debug, Clone)]
pub struct BeamformingSolution {
    pub w: DVector<Complex64>,
    pub an_beams: Vec<DVector<Complex64>>,
    pub gamma_star: f64,
    /// Worst-case secrecy rate in bits/s/Hz (clamped at zero).
    pub secrecy_rate: f64,
    /// Closed-form PCRB upper bound at the worst-case reflection amplitude.
    pub pcrb_value: f64,
    pub power_used: f64,
    pub certificates: Option<SolutionCertificates>,
    pub flags: SolutionFlags,
}

/// Outer-search configuration. The defaults follow the design used
/// throughout: a 64-point log grid from `gamma_min` to the eavesdropper's
/// interference-free SINR bound, then golden-section refinement.
#[derive(Debug, Clone)]
pub struct GammaSearchConfig {
    pub gamma_min: Option<f64>,
    pub gamma_max: Option<f64>,
    pub grid_points: usize,
    pub golden_iterations: usize,
    pub tolerances: SdpTolerances,
    pub parallel: bool,
}

impl Default for GammaSearchConfig {
    fn default() -> Self {
        Self {
            gamma_min: None,
            gamma_max: None,
            grid_points: 64,
            golden_iterations: 20,
            tolerances: inner_tolerances(),
            parallel: true,
        }
    }
}

/// Default upper end of the gamma grid: the eavesdropper SINR with all power
/// beamed straight at it and no AN.
pub fn gamma_upper_bound(sc: &ScenarioConfig) -> f64 {
    sc.channels.power_budget_w() * sc.array.n_tx() as f64 / sc.channels.eve_noise_eff()
}

/// Grid of gamma values used by the sweep: log-spaced, inclusive.
pub fn gamma_grid(sc: &ScenarioConfig, cfg: &GammaSearchConfig) -> Vec<f64> {
    let lo = cfg.gamma_min.unwrap_or(1e-4);
    let hi = cfg.gamma_max.unwrap_or_else(|| gamma_upper_bound(sc));
    let n = cfg.grid_points.max(2);
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        })
        .collect()
}

fn secrecy_of(f_gamma: f64, gamma: f64) -> f64 {
    ((1.0 + f_gamma) / (1.0 + gamma)).log2()
}

struct SweepPoint {
    gamma: f64,
    result: Option<InnerSolveResult>,
}

fn eval_grid(
    grid: &[f64],
    sc: &ScenarioConfig,
    qbar: &QbarMatrix,
    cfg: &GammaSearchConfig,
) -> Vec<SweepPoint> {
    let eval = |&gamma: &f64| SweepPoint {
        gamma,
        result: solve_inner_with(gamma, sc, qbar, &cfg.tolerances).ok(),
    };
    if cfg.parallel {
        grid.par_iter().map(eval).collect()
    } else {
        grid.iter().map(eval).collect()
    }
}

fn point_rate(p: &SweepPoint) -> f64 {
    match &p.result {
        Some(r) if r.status == SdpStatus::Optimal => secrecy_of(r.f_gamma, p.gamma),
        _ => f64::NEG_INFINITY,
    }
}

/// One-dimensional search over gamma: coarse log grid plus golden-section
/// refinement around the grid argmax. Returns the best certified design.
pub fn search_gamma(
    sc: &ScenarioConfig,
    cfg: &GammaSearchConfig,
) -> Result<BeamformingSolution, BeamError> {
    let qbar = q_bar(&sc.prior, &sc.array);
    let probe = feasibility_probe(sc);
    if !probe.feasible {
        return Err(BeamError::Infeasible(format!(
            "sensing threshold unreachable: need {:.3} but P lambda_max(Q) = {:.3}",
            probe.required_rhs, probe.max_lhs
        )));
    }
    let grid = gamma_grid(sc, cfg);
    let points = eval_grid(&grid, sc, &qbar, cfg);
    let best_idx = (0..points.len())
        .max_by(|&a, &b| point_rate(&points[a]).total_cmp(&point_rate(&points[b])))
        .expect("nonempty grid");
    if point_rate(&points[best_idx]) == f64::NEG_INFINITY {
        return Err(BeamError::Infeasible(
            "every gamma grid point was infeasible".into(),
        ));
    }

    let mut best = points[best_idx]
        .result
        .clone()
        .expect("best point has a result");
    let mut best_rate = point_rate(&points[best_idx]);

    // golden-section refinement on log-gamma between the argmax neighbours
    let lo = if best_idx > 0 {
        points[best_idx - 1].gamma
    } else {
        points[best_idx].gamma
    };
    let hi = if best_idx + 1 < points.len() {
        points[best_idx + 1].gamma
    } else {
        points[best_idx].gamma
    };
    if hi > lo {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo.ln(), hi.ln());
        let eval_at = |lg: f64| -> (f64, Option<InnerSolveResult>) {
            match solve_inner_with(lg.exp(), sc, &qbar, &cfg.tolerances) {
                Ok(r) if r.status == SdpStatus::Optimal => {
                    (secrecy_of(r.f_gamma, lg.exp()), Some(r))
                }
                _ => (f64::NEG_INFINITY, None),
            }
        };
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut rc) = eval_at(c);
        let (mut fd, mut rd) = eval_at(d);
        for _ in 0..cfg.golden_iterations {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                rd = rc.take();
                c = b - inv_phi * (b - a);
                let (f, r) = eval_at(c);
                fc = f;
                rc = r;
            } else {
                a = c;
                c = d;
                fc = fd;
                rc = rd.take();
                d = a + inv_phi * (b - a);
                let (f, r) = eval_at(d);
                fd = f;
                rd = r;
            }
        }
        for (f, r) in [(fc, rc), (fd, rd)] {
            if f > best_rate {
                if let Some(r) = r {
                    best_rate = f;
                    best = r;
                }
            }
        }
    }

    finalize_solution(best, best_rate, sc, &qbar)
}

fn finalize_solution(
    inner: InnerSolveResult,
    rate: f64,
    sc: &ScenarioConfig,
    qbar: &QbarMatrix,
) -> Result<BeamformingSolution, BeamError> {
    if !inner.lemma1_ok {
        log::warn!(
            "dual positivity violated at gamma = {:.4e}: lambda = {:.3e}, rho = {:.3e}",
            inner.gamma,
            inner.duals.lambda,
            inner.duals.rho
        );
    }
    // retry once with tighter tolerances if the certificates fail
    let recon = match reconstruct_rank_one(&inner, sc) {
        Ok(r) => r,
        Err(BeamError::CertificateFailure(first_msg)) => {
            let tight = SdpTolerances {
                gap_tol: 1e-10,
                feas_tol: 1e-10,
                max_iter: 400,
            };
            let retried = solve_inner_with(inner.gamma, sc, qbar, &tight)?;
            if retried.status != SdpStatus::Optimal {
                return Err(BeamError::CertificateFailure(first_msg));
            }
            reconstruct_rank_one(&retried, sc)?
        }
        Err(e) => return Err(e),
    };
    let cap = sc.prior.len().min(sc.array.n_tx());
    let (w, an_beams) = extract_beams(&recon.w_bar, &recon.v_bar, recon.t_bar, cap);
    let power_used = w.norm_squared() + an_beams.iter().map(|v| v.norm_squared()).sum::<f64>();
    let pcrb_value = pcrb_closed_form(
        &w,
        &an_beams,
        sc.channels.beta_min_abs(),
        &qbar.matrix,
        &sc.prior,
        &sc.channels,
    );
    let kkt = kkt_report(&inner, sc);
    Ok(BeamformingSolution {
        w,
        an_beams,
        gamma_star: inner.gamma,
        secrecy_rate: rate.max(0.0),
        pcrb_value,
        power_used,
        certificates: Some(SolutionCertificates {
            reconstruction: recon.report,
            kkt,
        }),
        flags: SolutionFlags {
            sensing_vacuous: inner.sensing_vacuous,
            infeasible: false,
            rank_one_fallback: false,
        },
    })
}

/// Maximum ratio transmission toward the user, no AN, no optimization; the
/// sensing threshold is only checked, never enforced.
pub fn benchmark_mrt(sc: &ScenarioConfig) -> BeamformingSolution {
    let h = sc.channels.user_channel();
    let p = sc.channels.power_budget_w();
    let mut w = h * Complex64::new((p / h.norm_squared()).sqrt(), 0.0);
    fix_phase(&mut w);
    let qbar = q_bar(&sc.prior, &sc.array);
    let pcrb_value = pcrb_closed_form(
        &w,
        &[],
        sc.channels.beta_min_abs(),
        &qbar.matrix,
        &sc.prior,
        &sc.channels,
    );
    let report = crate::eval::secrecy_report(&w, &[], sc);
    BeamformingSolution {
        power_used: w.norm_squared(),
        w,
        an_beams: vec![],
        gamma_star: f64::NAN,
        secrecy_rate: report.worst_case_rate,
        pcrb_value,
        certificates: None,
        flags: SolutionFlags {
            sensing_vacuous: sc.sensing_vacuous(),
            infeasible: pcrb_value > sc.sensing_threshold + 1e-12,
            rank_one_fallback: false,
        },
    }
}

/// Build the inner problem without the AN covariance block.
fn assemble_inner_no_an(
    gamma: f64,
    sc: &ScenarioConfig,
    qbar: &QbarMatrix,
) -> Result<SdpProblem, BeamError> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(BeamError::InvalidInput(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let n = sc.array.n_tx();
    let h_outer = outer(sc.channels.user_channel());
    let a_outers = eve_outers(sc);
    let c_e = sc.channels.eve_noise_eff();
    let mut constraints = Vec::with_capacity(a_outers.len() + 3);
    for ak in &a_outers {
        constraints.push(SdpConstraint {
            block_coeffs: vec![ak.clone()],
            scalar_coeffs: vec![-gamma * c_e],
            rhs: 0.0,
            sense: ConstraintSense::Le,
        });
    }
    constraints.push(SdpConstraint {
        block_coeffs: vec![DMatrix::zeros(n, n)],
        scalar_coeffs: vec![sc.channels.noise_user_w()],
        rhs: 1.0,
        sense: ConstraintSense::Eq,
    });
    constraints.push(SdpConstraint {
        block_coeffs: vec![identity_c(n)],
        scalar_coeffs: vec![-sc.channels.power_budget_w()],
        rhs: 0.0,
        sense: ConstraintSense::Le,
    });
    constraints.push(SdpConstraint {
        block_coeffs: vec![qbar.matrix.clone()],
        scalar_coeffs: vec![-sc.sensing_rhs()],
        rhs: 0.0,
        sense: ConstraintSense::Ge,
    });
    Ok(SdpProblem {
        block_dims: vec![n],
        scalar_count: 1,
        objective_blocks: vec![h_outer],
        objective_scalars: vec![0.0],
        constraints,
    })
}

/// Beamforming without AN: the same gamma search with the V block removed.
/// When the relaxation optimum is not rank one (there is no AN covariance to
/// absorb excess rank), the dominant eigenvector is used and flagged.
pub fn benchmark_no_an(
    sc: &ScenarioConfig,
    cfg: &GammaSearchConfig,
) -> Result<BeamformingSolution, BeamError> {
    let qbar = q_bar(&sc.prior, &sc.array);
    let grid = gamma_grid(sc, cfg);
    let eval = |&gamma: &f64| -> Option<(f64, f64, DMatrix<Complex64>, f64)> {
        let problem = assemble_inner_no_an(gamma, sc, &qbar).ok()?;
        let sol = solve(&problem, &cfg.tolerances).ok()?;
        if sol.status != SdpStatus::Optimal {
            return None;
        }
        let t = sol.scalars[0];
        if t < 1e-12 {
            return None;
        }
        Some((
            secrecy_of(sol.objective, gamma),
            gamma,
            sol.blocks[0].clone(),
            t,
        ))
    };
    let evals: Vec<_> = if cfg.parallel {
        grid.par_iter().map(eval).collect()
    } else {
        grid.iter().map(eval).collect()
    };
    let best = evals
        .into_iter()
        .flatten()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| {
            BeamError::Infeasible("no-AN benchmark: every gamma was infeasible".into())
        })?;
    let (rate, gamma, w_mat, t) = best;
    let w_scaled = &w_mat / Complex64::new(t, 0.0);
    let eig = w_scaled.symmetric_eigen();
    let mut evs: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    evs.sort_by(|a, b| b.total_cmp(a));
    let rank_one = evs[0] > 0.0 && evs.get(1).map_or(0.0, |l| l.abs()) <= 1e-7 * evs[0];
    let (w, _) = extract_beams(&w_mat, &DMatrix::zeros(w_mat.nrows(), w_mat.ncols()), t, 0);
    let pcrb_value = pcrb_closed_form(
        &w,
        &[],
        sc.channels.beta_min_abs(),
        &qbar.matrix,
        &sc.prior,
        &sc.channels,
    );
    Ok(BeamformingSolution {
        power_used: w.norm_squared(),
        w,
        an_beams: vec![],
        gamma_star: gamma,
        secrecy_rate: rate.max(0.0),
        pcrb_value,
        certificates: None,
        flags: SolutionFlags {
            sensing_vacuous: sc.sensing_vacuous(),
            infeasible: false,
            rank_one_fallback: !rank_one,
        },
    })
}

#[cfg(test)]
pub(crate) mod tests;
