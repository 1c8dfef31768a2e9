//! Homogeneous self-dual interior-point engine for small dense conic
//! programs over products of real PSD blocks and a nonnegative orthant.
//!
//! Standard form: minimize c.x subject to A x = b, x in K. The engine embeds
//! the problem in the Ye-Todd-Mizuno self-dual model with scaling variables
//! (tau, kappa) and a homogenizing variable theta that absorbs the initial
//! infeasibility:
//!
//!     A x - b tau + rb theta          = 0
//!     -A^T y + c tau - rc theta - z   = 0
//!     b^T y - c^T x + zeta theta - kappa = 0
//!     -rb^T y + rc^T x - zeta tau     = -(nu + 1)
//!
//! with rb, rc, zeta fixed by the unit initial point, which is exactly
//! feasible. Newton steps preserve the linear rows exactly and, by
//! skew-symmetry, satisfy <dx, dz> + dtau dkappa = 0, so the complementarity
//! gap contracts by exactly (1 - alpha (1 - sigma)) per step: the embedding
//! cannot drift toward the trivial ray. Search directions use Nesterov-Todd
//! scaling with a Mehrotra predictor-corrector; each Newton solve reduces to
//! a dense Schur complement of constraint-count size plus a 2x2 system in
//! (dtau, dtheta).

use nalgebra::{Cholesky, DMatrix, DVector};

/// Cone layout: dimensions of the PSD blocks plus the nonnegative count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ConeLayout {
    pub mat_dims: Vec<usize>,
    pub nn: usize,
}

impl ConeLayout {
    /// Barrier degree: sum of block orders plus the orthant dimension.
    fn degree(&self) -> f64 {
        (self.mat_dims.iter().sum::<usize>() + self.nn) as f64
    }
}

/// Element of the cone space: one symmetric matrix per PSD block plus a
/// nonnegative-orthant vector.
#[derive(Debug, Clone)]
pub(crate) struct ConeVec {
    pub mats: Vec<DMatrix<f64>>,
    pub nn: DVector<f64>,
}

impl ConeVec {
    pub fn zeros(layout: &ConeLayout) -> Self {
        Self {
            mats: layout
                .mat_dims
                .iter()
                .map(|&d| DMatrix::zeros(d, d))
                .collect(),
            nn: DVector::zeros(layout.nn),
        }
    }

    pub fn identity(layout: &ConeLayout) -> Self {
        Self {
            mats: layout
                .mat_dims
                .iter()
                .map(|&d| DMatrix::identity(d, d))
                .collect(),
            nn: DVector::from_element(layout.nn, 1.0),
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let mut acc = self.nn.dot(&other.nn);
        for (a, b) in self.mats.iter().zip(&other.mats) {
            acc += a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
        }
        acc
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.mats.iter_mut().zip(&other.mats) {
            *a += b * alpha;
        }
        self.nn.axpy(alpha, &other.nn, 1.0);
    }

    pub fn scale(&mut self, alpha: f64) {
        for m in &mut self.mats {
            *m *= alpha;
        }
        self.nn *= alpha;
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Conic program in engine form.
#[derive(Debug, Clone)]
pub(crate) struct StandardSdp {
    pub layout: ConeLayout,
    /// One cone-space coefficient vector per equality row.
    pub rows: Vec<ConeVec>,
    pub b: DVector<f64>,
    pub c: ConeVec,
}

impl StandardSdp {
    fn apply_a(&self, x: &ConeVec) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.dot(x)))
    }

    fn apply_at(&self, y: &DVector<f64>) -> ConeVec {
        let mut out = ConeVec::zeros(&self.layout);
        for (l, row) in self.rows.iter().enumerate() {
            out.axpy(y[l], row);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum RawStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Failed(String),
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub status: RawStatus,
    /// Scaled primal point x/tau (certificate ray when infeasible/unbounded).
    pub x: ConeVec,
    /// Scaled dual point y/tau (certificate ray when infeasible).
    pub y: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_gap: f64,
    /// 1-norm condition estimate of the last Schur complement.
    pub schur_cond: f64,
}

struct Scaling {
    /// Per PSD block: r with r^{-1} X r^{-T} = r^T Z r = diag(lambda).
    r: Vec<DMatrix<f64>>,
    rti: Vec<DMatrix<f64>>,
    /// Scaled-point spectra per block.
    lam: Vec<DVector<f64>>,
    /// r r^T per block (the squared scaling applied as a congruence).
    r2: Vec<DMatrix<f64>>,
    /// Orthant scaling w = sqrt(x/z) and lambda = sqrt(x z).
    w_nn: DVector<f64>,
    lam_nn: DVector<f64>,
}

impl Scaling {
    fn compute(x: &ConeVec, z: &ConeVec) -> Option<Self> {
        let mut r = Vec::with_capacity(x.mats.len());
        let mut rti = Vec::with_capacity(x.mats.len());
        let mut lam = Vec::with_capacity(x.mats.len());
        let mut r2 = Vec::with_capacity(x.mats.len());
        for (xm, zm) in x.mats.iter().zip(&z.mats) {
            let lx = Cholesky::new(xm.clone())?.l();
            let lz = Cholesky::new(zm.clone())?.l();
            let svd = (lz.transpose() * &lx).svd(true, true);
            let u = svd.u.as_ref()?;
            let vt = svd.v_t.as_ref()?;
            let sing = svd.singular_values.clone();
            for s in sing.iter() {
                if *s <= 0.0 {
                    return None;
                }
            }
            let inv_sqrt = DMatrix::from_diagonal(&sing.map(|s| 1.0 / s.sqrt()));
            let rb = &lx * vt.transpose() * &inv_sqrt;
            let rtib = &lz * u * &inv_sqrt;
            r2.push(&rb * rb.transpose());
            r.push(rb);
            rti.push(rtib);
            lam.push(sing);
        }
        let mut w_nn = DVector::zeros(x.nn.len());
        let mut lam_nn = DVector::zeros(x.nn.len());
        for i in 0..x.nn.len() {
            if x.nn[i] <= 0.0 || z.nn[i] <= 0.0 {
                return None;
            }
            w_nn[i] = (x.nn[i] / z.nn[i]).sqrt();
            lam_nn[i] = (x.nn[i] * z.nn[i]).sqrt();
        }
        Some(Self {
            r,
            rti,
            lam,
            r2,
            w_nn,
            lam_nn,
        })
    }

    /// G = W^T W: congruence by r r^T on blocks, w^2 on the orthant.
    fn apply_g(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            mats: v
                .mats
                .iter()
                .zip(&self.r2)
                .map(|(m, r2)| r2 * m * r2)
                .collect(),
            nn: DVector::from_iterator(
                v.nn.len(),
                v.nn.iter().zip(self.w_nn.iter()).map(|(&a, &w)| a * w * w),
            ),
        }
    }

    /// W^T: scaled space -> x space.
    fn apply_wt(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            mats: v
                .mats
                .iter()
                .zip(&self.r)
                .map(|(m, r)| r * m * r.transpose())
                .collect(),
            nn: DVector::from_iterator(
                v.nn.len(),
                v.nn.iter().zip(self.w_nn.iter()).map(|(&a, &w)| a * w),
            ),
        }
    }

    /// W^{-T}: x space -> scaled space.
    fn apply_w_inv_t(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            mats: v
                .mats
                .iter()
                .zip(&self.rti)
                .map(|(m, rti)| rti.transpose() * m * rti)
                .collect(),
            nn: DVector::from_iterator(
                v.nn.len(),
                v.nn.iter().zip(self.w_nn.iter()).map(|(&a, &w)| a / w),
            ),
        }
    }

    /// W: z space -> scaled space.
    fn apply_w(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            mats: v
                .mats
                .iter()
                .zip(&self.r)
                .map(|(m, r)| r.transpose() * m * r)
                .collect(),
            nn: DVector::from_iterator(
                v.nn.len(),
                v.nn.iter().zip(self.w_nn.iter()).map(|(&a, &w)| a * w),
            ),
        }
    }

    /// W^{-1}: scaled space -> z space.
    #[allow(dead_code)]
    fn apply_w_inv(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            mats: v
                .mats
                .iter()
                .zip(&self.rti)
                .map(|(m, rti)| rti * m * rti.transpose())
                .collect(),
            nn: DVector::from_iterator(
                v.nn.len(),
                v.nn.iter().zip(self.w_nn.iter()).map(|(&a, &w)| a / w),
            ),
        }
    }

    /// Solve lambda o M = R in scaled space (Lyapunov diagonal solve per
    /// block, elementwise on the orthant).
    fn lambda_solve(&self, rhs: &ConeVec) -> ConeVec {
        let mats = rhs
            .mats
            .iter()
            .zip(&self.lam)
            .map(|(m, lam)| {
                let n = m.nrows();
                let mut out = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] = 2.0 * m[(i, j)] / (lam[i] + lam[j]);
                    }
                }
                out
            })
            .collect();
        let nn = DVector::from_iterator(
            rhs.nn.len(),
            rhs.nn.iter().zip(self.lam_nn.iter()).map(|(&v, &l)| v / l),
        );
        ConeVec { mats, nn }
    }

    /// sigma*mu*e - lambda o lambda - weight * (dxh o dzh), expressed in
    /// scaled space, for the centrality right-hand side. The Mehrotra
    /// correction is weighted by the square of the step the predictor could
    /// actually take; the full correction is only valid near unit steps.
    fn centrality_rhs(
        &self,
        sigma_mu: f64,
        gamma: Option<(&ConeVec, &ConeVec, f64)>,
    ) -> ConeVec {
        let mut mats = Vec::with_capacity(self.lam.len());
        for (bi, lam) in self.lam.iter().enumerate() {
            let n = lam.len();
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = sigma_mu - lam[i] * lam[i];
            }
            if let Some((dx, dz, w)) = gamma {
                let prod = &dx.mats[bi] * &dz.mats[bi];
                let sym = (&prod + prod.transpose()) * (0.5 * w);
                m -= sym;
            }
            mats.push(m);
        }
        let mut nn = DVector::from_iterator(
            self.lam_nn.len(),
            self.lam_nn.iter().map(|&l| sigma_mu - l * l),
        );
        if let Some((dx, dz, w)) = gamma {
            for i in 0..nn.len() {
                nn[i] -= w * dx.nn[i] * dz.nn[i];
            }
        }
        ConeVec { mats, nn }
    }

    /// Largest step alpha with lambda + alpha * d (scaled direction) staying
    /// in the cone; infinity when unconstrained. The spectrum is floored
    /// relative to its largest entry: near-zero scaled eigenvalues would
    /// otherwise turn direction noise into spurious boundary estimates (the
    /// commit-time cone check still protects against real overshoot).
    fn max_step(&self, d: &ConeVec) -> f64 {
        let mut alpha = f64::INFINITY;
        for (bi, dm) in d.mats.iter().enumerate() {
            let lam = &self.lam[bi];
            let n = lam.len();
            let lam_floor =
                lam.iter().cloned().fold(0.0f64, f64::max) * 1e-13 + 1e-300;
            let mut h = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let li = lam[i].max(lam_floor);
                    let lj = lam[j].max(lam_floor);
                    h[(i, j)] = dm[(i, j)] / (li * lj).sqrt();
                }
            }
            let min_ev = h
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min_ev < 0.0 {
                alpha = alpha.min(-1.0 / min_ev);
            }
        }
        for i in 0..d.nn.len() {
            if d.nn[i] < 0.0 {
                alpha = alpha.min(-self.lam_nn[i] / d.nn[i]);
            }
        }
        alpha
    }
}

struct Direction {
    dx: ConeVec,
    dy: DVector<f64>,
    dz: ConeVec,
    dtau: f64,
    dtheta: f64,
    dkappa: f64,
    /// Scaled directions, reused for step lengths and the corrector.
    dxh: ConeVec,
    dzh: ConeVec,
}

fn estimate_cond_1norm(s: &DMatrix<f64>) -> f64 {
    let norm1 = (0..s.ncols())
        .map(|j| s.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    match Cholesky::new(s.clone()) {
        Some(ch) => {
            let inv = ch.inverse();
            let inv_norm1 = (0..inv.ncols())
                .map(|j| inv.column(j).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0f64, f64::max);
            norm1 * inv_norm1
        }
        None => f64::INFINITY,
    }
}

pub(crate) struct IpmOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

pub(crate) fn ipm_solve(prob: &StandardSdp, opts: &IpmOptions) -> IpmResult {
    let layout = &prob.layout;
    let nu = layout.degree() + 1.0;
    let m = prob.rows.len();

    let mut x = ConeVec::identity(layout);
    let mut z = ConeVec::identity(layout);
    let mut y = DVector::<f64>::zeros(m);
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;
    let mut theta = 1.0f64;

    // embedding data from the unit initial point
    let mut rb: DVector<f64> = &prob.b - prob.apply_a(&x); // b tau0 - A x0
    let mut rc = prob.c.clone(); // c tau0 - A^T y0 - z0
    rc.axpy(-1.0, &z);
    let mut zeta = prob.c.dot(&x) - prob.b.dot(&y) + 1.0;
    let mut restarts = 0usize;

    let b_scale = 1.0 + prob.b.norm();
    let c_scale = 1.0 + prob.c.norm();

    let mut best: Option<(f64, IpmResult)> = None;
    let mut last_cond = 1.0;
    let mut stall_count = 0usize;
    let mut merit_history: Vec<f64> = Vec::new();

    for iter in 0..opts.max_iter {
        let gap = x.dot(&z);
        // measured complementarity carries cancellation noise of this order;
        // mu targets and growth checks must not chase values below it
        let comp_noise = 1e-15 * (x.norm() * z.norm() + tau * kappa);
        let mu = ((gap + tau * kappa) / nu).max(comp_noise / nu);

        // scaled-by-tau optimality measures, recomputed from scratch;
        // residuals are relative to the magnitude of the terms they balance
        let pobj = prob.c.dot(&x) / tau;
        let dobj = prob.b.dot(&y) / tau;
        let ax = prob.apply_a(&x);
        let pres = (&ax - &prob.b * tau).norm() / tau / b_scale.max(ax.norm() / tau);
        let aty = prob.apply_at(&y);
        let mut dres_vec = prob.c.clone();
        dres_vec.scale(tau);
        dres_vec.axpy(-1.0, &aty);
        dres_vec.axpy(-1.0, &z);
        let dres = dres_vec.norm()
            / tau
            / c_scale.max((aty.norm() + z.norm()) / tau);
        let denom = 1.0 + pobj.abs() + dobj.abs();
        // complementarity gap and primal-dual objective gap; they differ by
        // residual-times-multiplier terms, so both must close
        let rel_gap = ((gap / (tau * tau)) / denom).max((pobj - dobj).abs() / denom);

        if std::env::var_os("ISAC_IPM_TRACE").is_some() {
            eprintln!(
                "it {iter:3} mu {mu:9.2e} tau {tau:9.2e} kappa {kappa:9.2e} theta {theta:9.2e} pres {pres:9.2e} dres {dres:9.2e} gap {rel_gap:9.2e} pobj {pobj:12.5e} dobj {dobj:12.5e}"
            );
        }

        let make_result = |status: RawStatus, x: &ConeVec, y: &DVector<f64>| {
            let mut xs = x.clone();
            xs.scale(1.0 / tau);
            IpmResult {
                status,
                x: xs,
                y: y.clone() / tau,
                iterations: iter,
                primal_residual: pres,
                dual_residual: dres,
                rel_gap,
                schur_cond: last_cond,
            }
        };

        if pres <= opts.feas_tol && dres <= opts.feas_tol && rel_gap <= opts.gap_tol {
            return make_result(RawStatus::Optimal, &x, &y);
        }

        // track best iterate in case we stall before reaching tolerance
        let merit = pres.max(dres).max(rel_gap);
        merit_history.push(merit);
        let best_merit = best.as_ref().map_or(f64::INFINITY, |(bm, _)| *bm);
        // endgame stagnation or post-convergence divergence: stop and report
        // the best iterate rather than burning the iteration budget
        if merit_history.len() > 24 {
            let old = merit_history[merit_history.len() - 25];
            if old < 1e-2 && merit > 0.9 * old {
                break;
            }
        }
        if best_merit < 1e-2 && merit > 50.0 * best_merit {
            break;
        }
        if best.as_ref().map_or(true, |(bm, _)| merit < *bm) {
            best = Some((
                merit,
                make_result(
                    RawStatus::Failed(format!(
                        "tolerances not met: pres {pres:.2e} dres {dres:.2e} gap {rel_gap:.2e}"
                    )),
                    &x,
                    &y,
                ),
            ));
        }

        // Infeasibility certificates; only trustworthy when kappa dominates
        // tau (the embedding is converging to a ray, not a solution).
        let ray_regime = kappa > 0.9 * (tau + kappa);
        let bty = prob.b.dot(&y);
        if ray_regime && bty > 0.0 {
            // Farkas ray: -A^T y - z ~ 0 with b^T y > 0
            let mut dual_ray_res = prob.apply_at(&y);
            dual_ray_res.axpy(1.0, &z);
            if dual_ray_res.norm() <= opts.feas_tol * c_scale * bty {
                let mut yc = y.clone();
                yc /= bty;
                return IpmResult {
                    status: RawStatus::PrimalInfeasible,
                    x: ConeVec::zeros(layout),
                    y: yc,
                    iterations: iter,
                    primal_residual: pres,
                    dual_residual: dres,
                    rel_gap,
                    schur_cond: last_cond,
                };
            }
        }
        let ctx = prob.c.dot(&x);
        if ray_regime && ctx < 0.0 {
            let ax = prob.apply_a(&x);
            if ax.norm() <= opts.feas_tol * b_scale * (-ctx) {
                let mut xc = x.clone();
                xc.scale(1.0 / (-ctx));
                return IpmResult {
                    status: RawStatus::DualInfeasible,
                    x: xc,
                    y: DVector::zeros(m),
                    iterations: iter,
                    primal_residual: pres,
                    dual_residual: dres,
                    rel_gap,
                    schur_cond: last_cond,
                };
            }
        }

        let scaling = match Scaling::compute(&x, &z) {
            Some(s) => s,
            None => break,
        };
        let ctx_newton = match NewtonSolver::new(prob, &scaling, &rb, &rc, zeta) {
            Some(v) => v,
            None => break,
        };
        last_cond = ctx_newton.cond;

        // predictor
        let cent_aff = scaling.lambda_solve(&scaling.centrality_rhs(0.0, None));
        let aff = ctx_newton.solve(&cent_aff, -tau * kappa, tau, kappa);
        let mut alpha_aff = scaling.max_step(&aff.dxh).min(scaling.max_step(&aff.dzh));
        if aff.dtau < 0.0 {
            alpha_aff = alpha_aff.min(-tau / aff.dtau);
        }
        if aff.dkappa < 0.0 {
            alpha_aff = alpha_aff.min(-kappa / aff.dkappa);
        }
        let alpha_aff = alpha_aff.min(1.0);
        // exact gap contraction: mu_aff = (1 - alpha_aff (1 - 0)) mu
        let sigma = (1.0 - alpha_aff).powi(3).clamp(1e-12, 1.0);

        // combined step with Mehrotra correction
        let corr_w = alpha_aff * alpha_aff;
        let cent = scaling.lambda_solve(&scaling.centrality_rhs(
            sigma * mu,
            Some((&aff.dxh, &aff.dzh, corr_w)),
        ));
        let r_tk = sigma * mu - tau * kappa - corr_w * aff.dtau * aff.dkappa;
        let dir = ctx_newton.solve(&cent, r_tk, tau, kappa);

        if std::env::var_os("ISAC_IPM_VERIFY").is_some() {
            let quad = dir.dx.dot(&dir.dz) + dir.dtau * dir.dkappa;
            let r1 = (prob.apply_a(&dir.dx) - &prob.b * dir.dtau + &rb * dir.dtheta).norm();
            let mut r2 = prob.c.clone();
            r2.scale(dir.dtau);
            r2.axpy(-1.0, &prob.apply_at(&dir.dy));
            r2.axpy(-dir.dtheta, &rc);
            r2.axpy(-1.0, &dir.dz);
            let r3 = (prob.b.dot(&dir.dy) - prob.c.dot(&dir.dx) + zeta * dir.dtheta
                - dir.dkappa)
                .abs();
            let r4 = (-rb.dot(&dir.dy) + rc.dot(&dir.dx) - zeta * dir.dtau).abs();
            eprintln!(
                "   newton: quad {quad:9.2e} r1 {r1:9.2e} r2 {:9.2e} r3 {r3:9.2e} r4 {r4:9.2e}",
                r2.norm()
            );
        }

        let mut alpha = scaling.max_step(&dir.dxh).min(scaling.max_step(&dir.dzh));
        if dir.dtau < 0.0 {
            alpha = alpha.min(-tau / dir.dtau);
        }
        if dir.dkappa < 0.0 {
            alpha = alpha.min(-kappa / dir.dkappa);
        }
        let mut alpha = (0.99 * alpha).min(0.99);
        // The scaled-space boundary estimate degrades when the NT spectrum is
        // extreme; verify cone membership at the candidate point and back
        // off until the step genuinely stays interior.
        let mut committed = false;
        for _ in 0..30 {
            let mut xn = x.clone();
            xn.axpy(alpha, &dir.dx);
            let mut zn = z.clone();
            zn.axpy(alpha, &dir.dz);
            let tn = tau + alpha * dir.dtau;
            let kn = kappa + alpha * dir.dkappa;
            let mut yn = y.clone();
            yn.axpy(alpha, &dir.dy, 1.0);
            let gap_new = xn.dot(&zn) + tn * kn;
            let interior = tn > 0.0
                && kn > 0.0
                && gap_new > -comp_noise
                && gap_new <= (gap + tau * kappa) * 1.01 + comp_noise
                && xn.nn.iter().all(|&v| v > 0.0)
                && zn.nn.iter().all(|&v| v > 0.0)
                && xn
                    .mats
                    .iter()
                    .all(|m| Cholesky::new(m.clone()).is_some())
                && zn
                    .mats
                    .iter()
                    .all(|m| Cholesky::new(m.clone()).is_some());
            // a sound Newton direction preserves the linear rows for any
            // step; reject directions that degrade feasibility (they come
            // from an ill-conditioned Schur or 2x2 solve)
            let rows_ok = interior && {
                let axn = prob.apply_a(&xn);
                let pres_n =
                    (&axn - &prob.b * tn).norm() / tn / b_scale.max(axn.norm() / tn);
                let atyn = prob.apply_at(&yn);
                let mut dr = prob.c.clone();
                dr.scale(tn);
                dr.axpy(-1.0, &atyn);
                dr.axpy(-1.0, &zn);
                let dres_n =
                    dr.norm() / tn / c_scale.max((atyn.norm() + zn.norm()) / tn);
                pres_n <= 3.0 * pres + 0.01 * opts.feas_tol
                    && dres_n <= 3.0 * dres + 0.01 * opts.feas_tol
            };
            if interior && rows_ok {
                x = xn;
                z = zn;
                tau = tn;
                kappa = kn;
                y = yn;
                theta += alpha * dir.dtheta;
                committed = true;
                break;
            }
            alpha *= 0.5;
        }
        if std::env::var_os("ISAC_IPM_TRACE").is_some() {
            eprintln!(
                "   alpha_aff {alpha_aff:9.2e} sigma {sigma:9.2e} alpha {alpha:9.2e} committed {committed} cond {:9.2e}",
                ctx_newton.cond
            );
        }
        if !committed || alpha < 1e-7 {
            stall_count += 1;
            if stall_count >= 3 {
                break;
            }
        } else {
            stall_count = 0;
        }

        // Recentering restart: the embedding is re-anchored at the current
        // point when tau drifts from unity. The relative optimality measures
        // are invariant, but theta resets to one with much smaller rb/rc, so
        // the absolute floor on mu no longer caps the attainable relative
        // accuracy.
        if (tau < 0.2 || tau > 5.0 || theta.abs() < 1e-4) && restarts < 60 {
            restarts += 1;
            let inv = 1.0 / tau;
            x.scale(inv);
            y *= inv;
            z.scale(inv);
            kappa *= inv;
            tau = 1.0;
            theta = 1.0;
            rb = &prob.b - prob.apply_a(&x);
            rc = prob.c.clone();
            rc.axpy(-1.0, &prob.apply_at(&y));
            rc.axpy(-1.0, &z);
            zeta = prob.c.dot(&x) - prob.b.dot(&y) + kappa;
        }
    }

    match best {
        Some((_, r)) => r,
        None => IpmResult {
            status: RawStatus::Failed("no iterate produced".into()),
            x: ConeVec::zeros(layout),
            y: DVector::zeros(m),
            iterations: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            rel_gap: f64::INFINITY,
            schur_cond: last_cond,
        },
    }
}

/// Newton-system factorizations for one iteration of the embedding.
struct NewtonSolver<'a> {
    prob: &'a StandardSdp,
    scaling: &'a Scaling,
    schur: Cholesky<f64, nalgebra::Dyn>,
    s_mat: DMatrix<f64>,
    g_rows: Vec<ConeVec>,
    g_c: ConeVec,
    g_rc: ConeVec,
    p1: DVector<f64>,
    p2: DVector<f64>,
    b_minus_agc: DVector<f64>,
    agrc_minus_rb: DVector<f64>,
    ctgc: f64,
    ct_g_rc: f64,
    rct_g_rc: f64,
    rb_row: &'a DVector<f64>,
    rc: &'a ConeVec,
    zeta: f64,
    cond: f64,
}

impl<'a> NewtonSolver<'a> {
    fn new(
        prob: &'a StandardSdp,
        scaling: &'a Scaling,
        rb: &'a DVector<f64>,
        rc: &'a ConeVec,
        zeta: f64,
    ) -> Option<Self> {
        let m = prob.rows.len();
        let g_rows: Vec<ConeVec> = prob.rows.iter().map(|r| scaling.apply_g(r)).collect();
        let mut s = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = prob.rows[i].dot(&g_rows[j]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        let cond = estimate_cond_1norm(&s);
        let schur = Cholesky::new(s.clone())?;
        let refine = |rhs: &DVector<f64>| -> DVector<f64> {
            let mut sol = schur.solve(rhs);
            // one pass of iterative refinement: the Schur system inherits the
            // NT scaling's condition number, which costs digits near the end
            for _ in 0..2 {
                let resid = rhs - &s * &sol;
                sol += schur.solve(&resid);
            }
            sol
        };
        let g_c = scaling.apply_g(&prob.c);
        let g_rc = scaling.apply_g(rc);
        let agc = prob.apply_a(&g_c);
        let agrc = prob.apply_a(&g_rc);
        let p1 = refine(&(&agc + &prob.b));
        let p2 = refine(&(&agrc + rb));
        let ctgc = prob.c.dot(&g_c);
        let ct_g_rc = prob.c.dot(&g_rc);
        let rct_g_rc = rc.dot(&g_rc);
        Some(Self {
            prob,
            scaling,
            schur,
            g_rows,
            g_c,
            g_rc,
            p1,
            p2,
            s_mat: s,
            b_minus_agc: &prob.b - &agc,
            agrc_minus_rb: &agrc - rb,
            ctgc,
            ct_g_rc,
            rct_g_rc,
            rb_row: rb,
            rc,
            zeta,
            cond,
        })
    }

    /// Newton direction with full-system iterative refinement: the raw
    /// solve loses digits when the NT scaling is extreme, so the residual of
    /// the complete system is re-solved against the same factorizations.
    fn solve(&self, centrality: &ConeVec, r_tk: f64, tau: f64, kappa: f64) -> Direction {
        let zero_f1 = DVector::zeros(self.prob.rows.len());
        let mut d = self.solve_once(&zero_f1, 0.0, centrality, r_tk, tau, kappa);
        for _ in 0..2 {
            // rows R2/R3 are exact by construction; measure R1, R4 and the
            // soft centrality equations
            let mut r1 = self.prob.apply_a(&d.dx) - &self.prob.b * d.dtau;
            r1.axpy(d.dtheta, self.rb_row, 1.0);
            let r4 = -self.rb_row.dot(&d.dy) + self.rc.dot(&d.dx) - self.zeta * d.dtau;
            let mut cent_res = centrality.clone();
            cent_res.axpy(-1.0, &d.dxh);
            cent_res.axpy(-1.0, &d.dzh);
            let rtk_res = r_tk - kappa * d.dtau - tau * d.dkappa;
            let worst = r1
                .amax()
                .max(r4.abs())
                .max(cent_res.norm())
                .max(rtk_res.abs());
            if !worst.is_finite() || worst < 1e-13 * (1.0 + centrality.norm()) {
                break;
            }
            let corr = self.solve_once(&(-r1), -r4, &cent_res, rtk_res, tau, kappa);
            d.dx.axpy(1.0, &corr.dx);
            d.dy += &corr.dy;
            d.dz.axpy(1.0, &corr.dz);
            d.dtau += corr.dtau;
            d.dtheta += corr.dtheta;
            d.dkappa += corr.dkappa;
            d.dxh.axpy(1.0, &corr.dxh);
            d.dzh.axpy(1.0, &corr.dzh);
        }
        d
    }

    fn solve_once(
        &self,
        f1: &DVector<f64>,
        f4: f64,
        centrality: &ConeVec,
        r_tk: f64,
        tau: f64,
        kappa: f64,
    ) -> Direction {
        let sc = self.scaling;
        let u = sc.apply_wt(centrality);
        let a_u = self.prob.apply_a(&u);
        let rhs_q = f1 - &a_u;
        let mut q = self.schur.solve(&rhs_q);
        for _ in 0..2 {
            let resid = &rhs_q - &self.s_mat * &q;
            q += self.schur.solve(&resid);
        }

        let ctu = self.prob.c.dot(&u);
        let rctu = self.rc.dot(&u);
        let a11 = self.b_minus_agc.dot(&self.p1) + self.ctgc + kappa / tau;
        let a12 = -self.b_minus_agc.dot(&self.p2) + self.zeta - self.ct_g_rc;
        let rhs1 = r_tk / tau + ctu - self.b_minus_agc.dot(&q);
        let a21 = self.agrc_minus_rb.dot(&self.p1) - self.ct_g_rc - self.zeta;
        let a22 = -self.agrc_minus_rb.dot(&self.p2) + self.rct_g_rc;
        let rhs2 = f4 - rctu - self.agrc_minus_rb.dot(&q);
        let det = a11 * a22 - a12 * a21;
        let (dtau, dtheta) = if det != 0.0 && det.is_finite() {
            (
                (rhs1 * a22 - a12 * rhs2) / det,
                (a11 * rhs2 - rhs1 * a21) / det,
            )
        } else {
            (0.0, 0.0)
        };

        let dy = &q + &self.p1 * dtau - &self.p2 * dtheta;
        let mut dx = u;
        dx.axpy(-dtau, &self.g_c);
        dx.axpy(dtheta, &self.g_rc);
        for (l, g_row) in self.g_rows.iter().enumerate() {
            dx.axpy(dy[l], g_row);
        }
        // back-substitute dz and dkappa from the linear rows rather than the
        // scaled centrality equation: this keeps dual feasibility exact even
        // when the NT scaling is extreme near convergence
        let mut dz = self.prob.c.clone();
        dz.scale(dtau);
        dz.axpy(-1.0, &self.prob.apply_at(&dy));
        dz.axpy(-dtheta, self.rc);
        let dkappa = self.prob.b.dot(&dy) - self.prob.c.dot(&dx) + self.zeta * dtheta;
        let dxh = sc.apply_w_inv_t(&dx);
        let dzh = sc.apply_w(&dz);
        Direction {
            dx,
            dy,
            dz,
            dtau,
            dtheta,
            dkappa,
            dxh,
            dzh,
        }
    }
}
