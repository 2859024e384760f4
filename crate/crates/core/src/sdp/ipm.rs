//! Infeasible primal-dual interior-point method for real block SDPs with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector.
//!
//! Primal: minimize <C, X> subject to <A_i, X> = b_i, X ⪰ 0, where X is a
//! list of symmetric blocks plus one nonnegative-orthant block.
//! Dual: maximize bᵀy subject to C − Σ y_i A_i = Z ⪰ 0.

use nalgebra::{DMatrix, DVector};

type Mat = DMatrix<f64>;
type Vector = DVector<f64>;

/// A symmetric coefficient on one block.
#[derive(Debug, Clone)]
pub(crate) enum SymCoeff {
    Dense(Mat),
    /// Full symmetric listing: both (r, c) and (c, r) appear when r ≠ c.
    Sparse(Vec<(usize, usize, f64)>),
}

impl SymCoeff {
    fn inner(&self, x: &Mat) -> f64 {
        match self {
            SymCoeff::Dense(a) => a.dot(x),
            SymCoeff::Sparse(e) => e.iter().map(|&(r, c, v)| v * x[(r, c)]).sum(),
        }
    }

    fn add_scaled_to(&self, target: &mut Mat, s: f64) {
        match self {
            SymCoeff::Dense(a) => *target += a * s,
            SymCoeff::Sparse(e) => {
                for &(r, c, v) in e {
                    target[(r, c)] += s * v;
                }
            }
        }
    }

    /// W A W.
    fn congruence(&self, w: &Mat) -> Mat {
        match self {
            SymCoeff::Dense(a) => w * a * w,
            SymCoeff::Sparse(e) => {
                let n = w.nrows();
                let mut out = Mat::zeros(n, n);
                for &(r, c, v) in e {
                    // v · W[:, r] W[c, :]
                    for j in 0..n {
                        let s = v * w[(c, j)];
                        if s != 0.0 {
                            for i in 0..n {
                                out[(i, j)] += w[(i, r)] * s;
                            }
                        }
                    }
                }
                out
            }
        }
    }

    pub(crate) fn norm_sq(&self) -> f64 {
        match self {
            SymCoeff::Dense(a) => a.norm_squared(),
            SymCoeff::Sparse(e) => e.iter().map(|&(_, _, v)| v * v).sum(),
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        match self {
            SymCoeff::Dense(a) => *a *= s,
            SymCoeff::Sparse(e) => e.iter_mut().for_each(|t| t.2 *= s),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Row {
    pub sdp: Vec<(usize, SymCoeff)>,
    pub lp: Vec<(usize, f64)>,
}

impl Row {
    pub(crate) fn norm_sq(&self) -> f64 {
        self.sdp.iter().map(|(_, c)| c.norm_sq()).sum::<f64>() + self.lp.iter().map(|&(_, v)| v * v).sum::<f64>()
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.sdp.iter_mut().for_each(|(_, c)| c.scale(s));
        self.lp.iter_mut().for_each(|t| t.1 *= s);
    }

    pub(crate) fn eval(&self, x: &[Mat], xl: &Vector) -> f64 {
        self.sdp.iter().map(|(b, c)| c.inner(&x[*b])).sum::<f64>() + self.lp.iter().map(|&(l, v)| v * xl[l]).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RealSdp {
    pub sdp_sizes: Vec<usize>,
    pub lp_size: usize,
    pub c_sdp: Vec<Mat>,
    pub c_lp: Vector,
    pub rows: Vec<Row>,
    pub b: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Converged,
    MaxIterations,
    Stalled,
    Diverged,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub x: Vec<Mat>,
    pub xl: Vector,
    pub status: IpmStatus,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub rel_gap: f64,
    /// Largest entry of the dual residual `C − A^T y − Z`.
    pub dual_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: usize,
}

struct Scaling {
    l: Mat,
    r: Mat,
    g: Mat,
    g_inv: Mat,
    w: Mat,
    lambda: Vec<f64>,
}

fn nt_scaling(x: &Mat, z: &Mat) -> Option<Scaling> {
    let l = x.clone().cholesky()?.l();
    let r = z.clone().cholesky()?.l();
    let s = r.transpose() * &l;
    let svd = s.svd(true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let lambda: Vec<f64> = svd.singular_values.iter().copied().collect();
    if lambda.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return None;
    }
    let n = x.nrows();
    let mut g = &l * &v;
    let mut g_inv = u.transpose() * r.transpose();
    for (k, lam) in lambda.iter().enumerate().take(n) {
        let s = lam.sqrt();
        g.column_mut(k).unscale_mut(s);
        g_inv.row_mut(k).unscale_mut(s);
    }
    let w = &g * g.transpose();
    Some(Scaling {
        l,
        r,
        g,
        g_inv,
        w,
        lambda,
    })
}

/// Largest α ≤ ∞ with F Fᵀ + α D ⪰ 0, given the Cholesky factor F.
fn max_step_sdp(f: &Mat, d: &Mat) -> Option<f64> {
    let m1 = f.solve_lower_triangular(d)?;
    let k = f.solve_lower_triangular(&m1.transpose())?;
    let k = (&k + k.transpose()) * 0.5;
    let min = k.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    Some(if min < 0.0 { -1.0 / min } else { f64::INFINITY })
}

fn max_step_lp(x: &Vector, d: &Vector) -> f64 {
    let mut a = f64::INFINITY;
    for (xi, di) in x.iter().zip(d.iter()) {
        if *di < 0.0 {
            a = a.min(-xi / di);
        }
    }
    a
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(m: Mat) -> Option<Factor> {
        if let Some(c) = m.clone().cholesky() {
            return Some(Factor::Chol(c));
        }
        let n = m.nrows();
        let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = m;
        for i in 0..n {
            reg[(i, i)] += 1e-13 * scale;
        }
        if let Some(c) = reg.clone().cholesky() {
            return Some(Factor::Chol(c));
        }
        let lu = reg.lu();
        if lu.is_invertible() {
            Some(Factor::Lu(lu))
        } else {
            None
        }
    }

    fn solve(&self, b: &Vector) -> Option<Vector> {
        let x = match self {
            Factor::Chol(c) => c.solve(b),
            Factor::Lu(l) => l.solve(b)?,
        };
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

struct Direction {
    dx: Vec<Mat>,
    dxl: Vector,
    dy: Vector,
    dz: Vec<Mat>,
    dzl: Vector,
}

struct Solver<'a> {
    p: &'a RealSdp,
    settings: IpmSettings,
}

impl<'a> Solver<'a> {
    fn op_a(&self, x: &[Mat], xl: &Vector) -> Vector {
        Vector::from_iterator(self.p.rows.len(), self.p.rows.iter().map(|r| r.eval(x, xl)))
    }

    /// Σ y_i A_i.
    fn op_at(&self, y: &Vector) -> (Vec<Mat>, Vector) {
        let mut s: Vec<Mat> = self.p.sdp_sizes.iter().map(|&n| Mat::zeros(n, n)).collect();
        let mut sl = Vector::zeros(self.p.lp_size);
        for (row, &yi) in self.p.rows.iter().zip(y.iter()) {
            for (b, c) in &row.sdp {
                c.add_scaled_to(&mut s[*b], yi);
            }
            for &(l, v) in &row.lp {
                sl[l] += yi * v;
            }
        }
        (s, sl)
    }

    fn schur(&self, sc: &[Scaling], xl: &Vector, zl: &Vector) -> Mat {
        let m = self.p.rows.len();
        let mut mm = Mat::zeros(m, m);
        for j in 0..m {
            let pj: Vec<(usize, Mat)> = self.p.rows[j]
                .sdp
                .iter()
                .map(|(b, c)| (*b, c.congruence(&sc[*b].w)))
                .collect();
            for i in j..m {
                let mut acc = 0.0;
                for (bi, ci) in &self.p.rows[i].sdp {
                    for (bj, pjb) in &pj {
                        if bi == bj {
                            acc += ci.inner(pjb);
                        }
                    }
                }
                for &(li, vi) in &self.p.rows[i].lp {
                    for &(lj, vj) in &self.p.rows[j].lp {
                        if li == lj {
                            acc += vi * vj * xl[li] / zl[li];
                        }
                    }
                }
                mm[(i, j)] = acc;
                mm[(j, i)] = acc;
            }
        }
        mm
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        factor: &Factor,
        sc: &[Scaling],
        xl: &Vector,
        zl: &Vector,
        rp: &Vector,
        rd: &[Mat],
        rdl: &Vector,
        rc: &[Mat],
        rcl: &Vector,
    ) -> Option<Direction> {
        let ratio = xl.component_div(zl);
        let t: Vec<Mat> = rc.iter().zip(rd).zip(sc).map(|((c, d), s)| c - &s.w * d * &s.w).collect();
        let tl = rcl - ratio.component_mul(rdl);
        let rhs = rp - self.op_a(&t, &tl);
        let dy = factor.solve(&rhs)?;
        let (aty, atyl) = self.op_at(&dy);
        let dz: Vec<Mat> = rd.iter().zip(&aty).map(|(d, a)| d - a).collect();
        let dzl = rdl - atyl;
        let dx: Vec<Mat> = rc
            .iter()
            .zip(&dz)
            .zip(sc)
            .map(|((c, dzb), s)| {
                let v = c - &s.w * dzb * &s.w;
                (&v + v.transpose()) * 0.5
            })
            .collect();
        let dxl = rcl - ratio.component_mul(&dzl);
        Some(Direction { dx, dxl, dy, dz, dzl })
    }

    fn step_lengths(&self, sc: &[Scaling], xl: &Vector, zl: &Vector, d: &Direction) -> Option<(f64, f64)> {
        let mut ap = max_step_lp(xl, &d.dxl);
        let mut ad = max_step_lp(zl, &d.dzl);
        for (b, s) in sc.iter().enumerate() {
            ap = ap.min(max_step_sdp(&s.l, &d.dx[b])?);
            ad = ad.min(max_step_sdp(&s.r, &d.dz[b])?);
        }
        Some((ap, ad))
    }

    fn run(&self) -> IpmResult {
        let p = self.p;
        let nu = (p.sdp_sizes.iter().sum::<usize>() + p.lp_size).max(1) as f64;
        let bmax = p.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mu0 = 1.0 + bmax;
        let mut x: Vec<Mat> = p.sdp_sizes.iter().map(|&n| Mat::identity(n, n) * mu0).collect();
        let mut z = x.clone();
        let mut xl = Vector::from_element(p.lp_size, mu0);
        let mut zl = xl.clone();
        let mut y = Vector::zeros(p.rows.len());
        let mut stalls = 0;

        let finish = |x: Vec<Mat>, xl: Vector, status, it, pobj, dobj, gap, dinf| IpmResult {
            x,
            xl,
            status,
            iterations: it,
            primal_objective: pobj,
            dual_objective: dobj,
            rel_gap: gap,
            dual_residual: dinf,
        };

        let mut iter = 0;
        loop {
            let ax = self.op_a(&x, &xl);
            let rp = &p.b - ax;
            let (aty, atyl) = self.op_at(&y);
            let rd: Vec<Mat> = p.c_sdp.iter().zip(&aty).zip(&z).map(|((c, a), zb)| c - a - zb).collect();
            let rdl = &p.c_lp - atyl - &zl;
            let xz: f64 = x.iter().zip(&z).map(|(a, b)| a.dot(b)).sum::<f64>() + xl.dot(&zl);
            let mu = xz / nu;
            let pobj: f64 = p.c_sdp.iter().zip(&x).map(|(c, xb)| c.dot(xb)).sum::<f64>() + p.c_lp.dot(&xl);
            let dobj = p.b.dot(&y);
            let pinf = rp.amax();
            let dinf = rd.iter().map(|m| m.amax()).fold(rdl.amax(), f64::max);
            let gap = (pobj - dobj).abs().max(xz) / (1.0 + pobj.abs());

            if !(pinf.is_finite() && dinf.is_finite() && gap.is_finite()) {
                return finish(x, xl, IpmStatus::NumericalFailure, iter, pobj, dobj, gap, dinf);
            }
            if pinf <= self.settings.feas_tol && dinf <= self.settings.feas_tol && gap <= self.settings.gap_tol {
                return finish(x, xl, IpmStatus::Converged, iter, pobj, dobj, gap, dinf);
            }
            let xnorm = x.iter().map(|m| m.trace()).sum::<f64>() + xl.sum();
            if y.amax() > 1e10 || xnorm > 1e12 {
                return finish(x, xl, IpmStatus::Diverged, iter, pobj, dobj, gap, dinf);
            }
            if iter >= self.settings.max_iterations {
                return finish(x, xl, IpmStatus::MaxIterations, iter, pobj, dobj, gap, dinf);
            }
            iter += 1;

            let Some(sc) = x.iter().zip(&z).map(|(a, b)| nt_scaling(a, b)).collect::<Option<Vec<_>>>() else {
                return finish(x, xl, IpmStatus::NumericalFailure, iter, pobj, dobj, gap, dinf);
            };
            let Some(factor) = Factor::new(self.schur(&sc, &xl, &zl)) else {
                return finish(x, xl, IpmStatus::NumericalFailure, iter, pobj, dobj, gap, dinf);
            };

            // Predictor.
            let rc: Vec<Mat> = x.iter().map(|m| -m).collect();
            let rcl = -&xl;
            let Some(aff) = self.direction(&factor, &sc, &xl, &zl, &rp, &rd, &rdl, &rc, &rcl) else {
                return finish(x, xl, IpmStatus::NumericalFailure, iter, pobj, dobj, gap, dinf);
            };
            let Some((ap, ad)) = self.step_lengths(&sc, &xl, &zl, &aff) else {
                return finish(x, xl, IpmStatus::NumericalFailure, iter, pobj, dobj, gap, dinf);
            };
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mut xz_aff = 0.0;
            for b in 0..x.len() {
                let xa = &x[b] + &aff.dx[b] * ap;
                let za = &z[b] + &aff.dz[b] * ad;
                xz_aff += xa.dot(&za);
            }
            xz_aff += (&xl + &aff.dxl * ap).dot(&(&zl + &aff.dzl * ad));
            let mu_aff = (xz_aff / nu).max(0.0);
            let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).clamp(0.0, 1.0) } else { 0.0 };
            let target = sigma * mu;

            // Corrector.
            let mut rc = Vec::with_capacity(x.len());
            for (b, s) in sc.iter().enumerate() {
                let dxt = &s.g_inv * &aff.dx[b] * s.g_inv.transpose();
                let dzt = s.g.transpose() * &aff.dz[b] * &s.g;
                let q = &dxt * &dzt + &dzt * &dxt;
                let n = q.nrows();
                let d = Mat::from_fn(n, n, |i, j| {
                    let diag = if i == j { 2.0 * (target - s.lambda[i] * s.lambda[i]) } else { 0.0 };
                    (diag - q[(i, j)]) / (s.lambda[i] + s.lambda[j])
                });
                rc.push(&s.g * d * s.g.transpose());
            }
            let rcl = Vector::from_fn(p.lp_size, |l, _| {
                (target - xl[l] * zl[l] - aff.dxl[l] * aff.dzl[l]) / zl[l]
            });
            let Some(dir) = self.direction(&factor, &sc, &xl, &zl, &rp, &rd, &rdl, &rc, &rcl) else {
                return finish(x, xl, IpmStatus::NumericalFailure, iter, pobj, dobj, gap, dinf);
            };
            let Some((ap_max, ad_max)) = self.step_lengths(&sc, &xl, &zl, &dir) else {
                return finish(x, xl, IpmStatus::NumericalFailure, iter, pobj, dobj, gap, dinf);
            };
            let gamma = 0.9 + 0.08 * ap.min(ad);
            let ap = (gamma * ap_max).min(1.0);
            let ad = (gamma * ad_max).min(1.0);

            for b in 0..x.len() {
                x[b] += &dir.dx[b] * ap;
                z[b] += &dir.dz[b] * ad;
                let xs = (&x[b] + x[b].transpose()) * 0.5;
                let zs = (&z[b] + z[b].transpose()) * 0.5;
                x[b] = xs;
                z[b] = zs;
            }
            xl += &dir.dxl * ap;
            zl += &dir.dzl * ad;
            y += &dir.dy * ad;

            if ap < 1e-10 && ad < 1e-10 {
                stalls += 1;
                if stalls >= 3 {
                    return finish(x, xl, IpmStatus::Stalled, iter, pobj, dobj, gap, dinf);
                }
            } else {
                stalls = 0;
            }
        }
    }
}

pub(crate) fn run(problem: &RealSdp, settings: IpmSettings) -> IpmResult {
    Solver { p: problem, settings }.run()
}
