//! Small dense semidefinite programs over complex Hermitian blocks.
//!
//! A problem has Hermitian PSD blocks and nonnegative-orthant blocks. Each
//! constraint reads `Σ_b Re tr(A_b X_b) rel r` with `rel ∈ {≥, ≤, =}`.
//! Complex blocks are solved through the real embedding
//! `[[Re X, −Im X], [Im X, Re X]]`, inequalities receive slack variables and
//! every row is scaled to unit coefficient norm before the interior-point
//! iterations start.
//!
//! Infeasibility is decided by a phase-I problem that maximizes the smallest
//! inequality slack `s` (equalities held exactly, `s` capped at 1 in
//! normalized units). The program is declared feasible iff `s* ≥ −feas_tol`.

mod ipm;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, max_asymmetry, CMat, C64};
use ipm::{IpmSettings, IpmStatus, RealSdp, Row, SymCoeff};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    /// `n × n` Hermitian PSD variable.
    Hermitian(usize),
    /// `n` nonnegative reals.
    Nonnegative(usize),
}

impl BlockKind {
    pub fn size(&self) -> usize {
        match *self {
            BlockKind::Hermitian(n) | BlockKind::Nonnegative(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coeff {
    /// Full Hermitian matrix (Hermitian blocks only).
    Dense(CMat),
    /// Upper-triangle entries `(r, c, v)` with `r ≤ c`; the lower triangle
    /// is implied by conjugate symmetry. Duplicates add up.
    Sparse(Vec<(usize, usize, C64)>),
    /// One weight per entry (nonnegative blocks only).
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub block: usize,
    pub coeff: Coeff,
}

impl Term {
    pub fn dense(block: usize, a: CMat) -> Self {
        Term {
            block,
            coeff: Coeff::Dense(a),
        }
    }

    pub fn sparse(block: usize, entries: Vec<(usize, usize, C64)>) -> Self {
        Term {
            block,
            coeff: Coeff::Sparse(entries),
        }
    }

    pub fn diagonal(block: usize, w: Vec<f64>) -> Self {
        Term {
            block,
            coeff: Coeff::Diagonal(w),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Geq,
    Leq,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<Term>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
    Feasibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<BlockKind>,
    /// Objective `Σ Re tr(C_b X_b)`; ignored in feasibility mode.
    pub objective: Vec<Term>,
    pub constraints: Vec<Constraint>,
    pub sense: Sense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: usize,
    /// Largest admissible Hermitian block size.
    pub max_dimension: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas_tol: 1e-7,
            gap_tol: 1e-7,
            max_iterations: 200,
            max_dimension: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// One matrix per block; nonnegative blocks are returned as real
    /// diagonal matrices.
    pub blocks: Vec<CMat>,
    pub status: SdpStatus,
    /// Primal objective in the caller's sense and scaling. For feasibility
    /// problems this is the phase-I slack.
    pub objective: f64,
    /// Dual objective in the caller's sense and scaling (a lower bound for
    /// minimization at optimality).
    pub dual_objective: f64,
    /// Largest constraint violation, each row scaled to unit coefficient norm.
    pub primal_violation: f64,
    /// Relative duality gap `max(|p − d|, <X, Z>) / (1 + |p|)` on scaled data.
    pub gap: f64,
    /// Largest dual residual entry on the scaled real data.
    pub dual_residual: f64,
    pub iterations: usize,
    /// Phase-I optimum `s*` when phase I was run.
    pub phase1_slack: Option<f64>,
}

impl SdpSolution {
    /// Entries of a nonnegative block.
    pub fn nonnegative_values(&self, block: usize) -> Vec<f64> {
        let m = &self.blocks[block];
        (0..m.nrows()).map(|i| m[(i, i)].re).collect()
    }
}

/// `[[Re H, −Im H], [Im H, Re H]]`.
pub fn hermitian_real_embedding(h: &CMat) -> Result<DMatrix<f64>> {
    if h.nrows() != h.ncols() {
        return Err(Error::MalformedSdp("embedding requires a square matrix".into()));
    }
    let asym = max_asymmetry(h);
    if asym > 1e-12 * frobenius(h).max(1.0) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(embed_unchecked(h))
}

fn embed_unchecked(h: &CMat) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = h[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn extract(y: &DMatrix<f64>) -> CMat {
    let n = y.nrows() / 2;
    CMat::from_fn(n, n, |r, c| {
        C64::new(
            0.5 * (y[(r, c)] + y[(r + n, c + n)]),
            0.5 * (y[(r + n, c)] - y[(r, c + n)]),
        )
    })
}

enum Slot {
    Sdp(usize, usize),
    Lp(usize, usize),
}

struct Layout {
    slots: Vec<Slot>,
    sdp_sizes: Vec<usize>,
    lp_user: usize,
}

fn layout(blocks: &[BlockKind]) -> Layout {
    let mut slots = Vec::with_capacity(blocks.len());
    let mut sdp_sizes = Vec::new();
    let mut lp = 0;
    for b in blocks {
        match *b {
            BlockKind::Hermitian(n) => {
                slots.push(Slot::Sdp(sdp_sizes.len(), n));
                sdp_sizes.push(2 * n);
            }
            BlockKind::Nonnegative(n) => {
                slots.push(Slot::Lp(lp, n));
                lp += n;
            }
        }
    }
    Layout {
        slots,
        sdp_sizes,
        lp_user: lp,
    }
}

fn validate(problem: &SdpProblem, tol: &Tolerances) -> Result<()> {
    for b in &problem.blocks {
        if let BlockKind::Hermitian(n) = *b {
            if n > tol.max_dimension {
                return Err(Error::DimensionCap {
                    size: n,
                    cap: tol.max_dimension,
                });
            }
        }
        if b.size() == 0 {
            return Err(Error::MalformedSdp("empty block".into()));
        }
    }
    let check_term = |t: &Term| -> Result<()> {
        let kind = problem
            .blocks
            .get(t.block)
            .ok_or_else(|| Error::MalformedSdp(format!("term references missing block {}", t.block)))?;
        match (&t.coeff, kind) {
            (Coeff::Dense(a), BlockKind::Hermitian(n)) => {
                if a.nrows() != *n || a.ncols() != *n {
                    return Err(Error::MalformedSdp(format!("coefficient shape does not match block {}", t.block)));
                }
                if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::MalformedSdp("non-finite coefficient".into()));
                }
                let asym = max_asymmetry(a);
                if asym > 1e-12 * frobenius(a).max(1.0) {
                    return Err(Error::NotHermitian { asymmetry: asym });
                }
            }
            (Coeff::Sparse(e), BlockKind::Hermitian(n)) => {
                for &(r, c, v) in e {
                    if r > c || c >= *n {
                        return Err(Error::MalformedSdp(format!("sparse entry ({r}, {c}) invalid for block {}", t.block)));
                    }
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(Error::MalformedSdp("non-finite coefficient".into()));
                    }
                    if r == c && v.im.abs() > 1e-12 * v.norm().max(1.0) {
                        return Err(Error::NotHermitian { asymmetry: 2.0 * v.im.abs() });
                    }
                }
            }
            (Coeff::Diagonal(w), BlockKind::Nonnegative(n)) => {
                if w.len() != *n || w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::MalformedSdp(format!("diagonal coefficient invalid for block {}", t.block)));
                }
            }
            _ => {
                return Err(Error::MalformedSdp(format!(
                    "coefficient kind does not match block {}",
                    t.block
                )))
            }
        }
        Ok(())
    };
    for t in &problem.objective {
        check_term(t)?;
    }
    for c in &problem.constraints {
        if !c.rhs.is_finite() {
            return Err(Error::MalformedSdp("non-finite right-hand side".into()));
        }
        for t in &c.terms {
            check_term(t)?;
        }
    }
    Ok(())
}

/// Real symmetric coefficient `emb(A)/2` for a complex term.
fn real_coeff(coeff: &Coeff, n: usize) -> SymCoeff {
    match coeff {
        Coeff::Dense(a) => {
            let h = crate::linalg::hermitian_part(a);
            SymCoeff::Dense(embed_unchecked(&h) * 0.5)
        }
        Coeff::Sparse(entries) => {
            let mut out = Vec::with_capacity(entries.len() * 8);
            for &(r, c, v) in entries {
                let (re, im) = (0.5 * v.re, 0.5 * v.im);
                if r == c {
                    out.push((r, r, re));
                    out.push((r + n, r + n, re));
                } else {
                    out.push((r, c, re));
                    out.push((c, r, re));
                    out.push((r + n, c + n, re));
                    out.push((c + n, r + n, re));
                    out.push((r, c + n, -im));
                    out.push((c + n, r, -im));
                    out.push((c, r + n, im));
                    out.push((r + n, c, im));
                }
            }
            out.retain(|t| t.2 != 0.0);
            SymCoeff::Sparse(out)
        }
        Coeff::Diagonal(_) => unreachable!("validated"),
    }
}

fn real_row(terms: &[Term], lay: &Layout) -> Row {
    let mut row = Row::default();
    for t in terms {
        match lay.slots[t.block] {
            Slot::Sdp(idx, n) => row.sdp.push((idx, real_coeff(&t.coeff, n))),
            Slot::Lp(off, _) => {
                if let Coeff::Diagonal(w) = &t.coeff {
                    row.lp.extend(w.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, &v)| (off + k, v)));
                }
            }
        }
    }
    row
}

/// Normalized real form of a problem.
struct Prepared {
    lay: Layout,
    real: RealSdp,
    /// Slack coefficient per kept row: −1 for ≥, +1 for ≤, 0 for =.
    slack_sign: Vec<f64>,
    /// Objective scale (real objective = scaled objective × obj_scale).
    obj_scale: f64,
    /// Some(violation) when a zero row is violated.
    zero_row_violation: Option<f64>,
}

fn prepare(problem: &SdpProblem, with_objective: bool) -> Prepared {
    let lay = layout(&problem.blocks);
    let mut rows = Vec::new();
    let mut b = Vec::new();
    let mut signs = Vec::new();
    let mut zero_row_violation: Option<f64> = None;
    for c in &problem.constraints {
        let mut row = real_row(&c.terms, &lay);
        let norm = row.norm_sq().sqrt();
        if norm == 0.0 {
            let v = match c.relation {
                Relation::Geq => c.rhs.max(0.0),
                Relation::Leq => (-c.rhs).max(0.0),
                Relation::Eq => c.rhs.abs(),
            };
            if v > 0.0 {
                zero_row_violation = Some(zero_row_violation.unwrap_or(0.0).max(v));
            }
            continue;
        }
        row.scale(1.0 / norm);
        rows.push(row);
        b.push(c.rhs / norm);
        signs.push(match c.relation {
            Relation::Geq => -1.0,
            Relation::Leq => 1.0,
            Relation::Eq => 0.0,
        });
    }
    // Slack variables follow the user LP entries.
    let mut lp = lay.lp_user;
    for (row, &s) in rows.iter_mut().zip(&signs) {
        if s != 0.0 {
            row.lp.push((lp, s));
            lp += 1;
        }
    }
    let mut c_sdp: Vec<DMatrix<f64>> = lay.sdp_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    let mut c_lp = DVector::zeros(lp);
    let mut obj_scale = 1.0;
    if with_objective {
        let sign = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let obj = real_row(&problem.objective, &lay);
        let norm = obj.norm_sq().sqrt();
        if norm > 0.0 {
            obj_scale = norm;
            for (blk, coeff) in &obj.sdp {
                let mut m = DMatrix::zeros(c_sdp[*blk].nrows(), c_sdp[*blk].ncols());
                match coeff {
                    SymCoeff::Dense(a) => m += a,
                    SymCoeff::Sparse(e) => e.iter().for_each(|&(r, c, v)| m[(r, c)] += v),
                }
                c_sdp[*blk] += m * (sign / norm);
            }
            for &(l, v) in &obj.lp {
                c_lp[l] += sign * v / norm;
            }
        }
    }
    Prepared {
        real: RealSdp {
            sdp_sizes: lay.sdp_sizes.clone(),
            lp_size: lp,
            c_sdp,
            c_lp,
            rows,
            b: DVector::from_vec(b),
        },
        lay,
        slack_sign: signs,
        obj_scale,
        zero_row_violation,
    }
}

fn settings(tol: &Tolerances) -> IpmSettings {
    IpmSettings {
        feas_tol: tol.feas_tol,
        gap_tol: tol.gap_tol,
        max_iterations: tol.max_iterations,
    }
}

fn to_blocks(problem: &SdpProblem, lay: &Layout, x: &[DMatrix<f64>], xl: &DVector<f64>) -> Vec<CMat> {
    problem
        .blocks
        .iter()
        .zip(&lay.slots)
        .map(|(_, slot)| match *slot {
            Slot::Sdp(idx, _) => {
                let m = extract(&x[idx]);
                crate::linalg::hermitian_part(&m)
            }
            Slot::Lp(off, n) => {
                CMat::from_diagonal(&DVector::from_fn(n, |k, _| C64::new(xl[off + k].max(0.0), 0.0)))
            }
        })
        .collect()
}

fn term_value(t: &Term, x: &CMat) -> f64 {
    match &t.coeff {
        Coeff::Dense(a) => crate::linalg::re_trace_product(a, x),
        Coeff::Sparse(e) => e
            .iter()
            .map(|&(r, c, v)| if r == c { v.re * x[(r, r)].re } else { 2.0 * (v * x[(c, r)]).re })
            .sum(),
        Coeff::Diagonal(w) => w.iter().enumerate().map(|(k, &v)| v * x[(k, k)].re).sum(),
    }
}

/// `Σ_b Re tr(A_b X_b)` for a list of terms.
pub fn evaluate_terms(terms: &[Term], blocks: &[CMat]) -> f64 {
    terms.iter().map(|t| term_value(t, &blocks[t.block])).sum()
}

/// Largest constraint violation of `blocks`, each row scaled to unit
/// coefficient norm. Zero rows count with their raw violation.
pub fn primal_violation(problem: &SdpProblem, blocks: &[CMat]) -> f64 {
    let lay = layout(&problem.blocks);
    let mut worst = 0.0f64;
    for c in &problem.constraints {
        let norm = real_row(&c.terms, &lay).norm_sq().sqrt();
        let lhs = evaluate_terms(&c.terms, blocks);
        let v = match c.relation {
            Relation::Geq => (c.rhs - lhs).max(0.0),
            Relation::Leq => (lhs - c.rhs).max(0.0),
            Relation::Eq => (lhs - c.rhs).abs(),
        };
        worst = worst.max(if norm > 0.0 { v / norm } else { v });
    }
    worst
}

/// Phase I: maximize `s` with every inequality row holding with slack `s`
/// (rows normalized, `s ≤ 1`) and equalities exact.
fn phase_one(problem: &SdpProblem, prep: &Prepared, tol: &Tolerances) -> (ipm::IpmResult, f64) {
    const CAP: f64 = 1.0;
    let mut real = prep.real.clone();
    let u = real.lp_size;
    real.lp_size += 1;
    real.c_sdp.iter_mut().for_each(|m| m.fill(0.0));
    real.c_lp = DVector::zeros(real.lp_size);
    real.c_lp[u] = 1.0;
    for (k, row) in real.rows.iter_mut().enumerate() {
        let s = prep.slack_sign[k];
        if s != 0.0 {
            row.lp.push((u, -s));
            real.b[k] += -s * CAP;
        }
    }
    let _ = problem;
    let r = ipm::run(&real, settings(tol));
    let slack = CAP - r.xl[u];
    (r, slack)
}

/// Minimizes the largest violation `u` of any row (equalities as two-sided
/// bounds); used when phase I cannot settle contradictory equalities.
fn stage_a(prep: &Prepared, tol: &Tolerances) -> ipm::IpmResult {
    let mut real = prep.real.clone();
    let u = real.lp_size;
    let mut lp = u + 1;
    let mut extra_rows = Vec::new();
    let mut extra_b = Vec::new();
    for (k, row) in real.rows.iter_mut().enumerate() {
        let s = prep.slack_sign[k];
        if s != 0.0 {
            row.lp.push((u, -s));
        } else {
            // a + u − p = b  and  a − u + q = b.
            let mut twin = row.clone();
            row.lp.push((u, 1.0));
            row.lp.push((lp, -1.0));
            twin.lp.push((u, -1.0));
            twin.lp.push((lp + 1, 1.0));
            lp += 2;
            extra_rows.push(twin);
            extra_b.push(real.b[k]);
        }
    }
    real.rows.extend(extra_rows);
    let mut b: Vec<f64> = real.b.iter().copied().collect();
    b.extend(extra_b);
    real.b = DVector::from_vec(b);
    real.lp_size = lp;
    real.c_sdp.iter_mut().for_each(|m| m.fill(0.0));
    real.c_lp = DVector::zeros(lp);
    real.c_lp[u] = 1.0;
    ipm::run(&real, settings(tol))
}

fn empty_blocks(problem: &SdpProblem) -> Vec<CMat> {
    problem.blocks.iter().map(|b| CMat::zeros(b.size(), b.size())).collect()
}

/// Phase-I feasibility check.
pub fn feasibility(problem: &SdpProblem, tol: &Tolerances) -> Result<SdpSolution> {
    validate(problem, tol)?;
    let prep = prepare(problem, false);
    Ok(feasibility_prepared(problem, &prep, tol))
}

fn feasibility_prepared(problem: &SdpProblem, prep: &Prepared, tol: &Tolerances) -> SdpSolution {
    if let Some(v) = prep.zero_row_violation {
        if v > tol.feas_tol {
            return SdpSolution {
                blocks: empty_blocks(problem),
                status: SdpStatus::Infeasible,
                objective: -v,
                dual_objective: -v,
                primal_violation: v,
                gap: 0.0,
                dual_residual: 0.0,
                iterations: 0,
                phase1_slack: Some(-v),
            };
        }
    }
    let (r, slack) = phase_one(problem, prep, tol);
    let blocks = to_blocks(problem, &prep.lay, &r.x, &r.xl);
    let violation = primal_violation(problem, &blocks);
    let mut iterations = r.iterations;
    let status = if r.status == IpmStatus::Converged {
        if slack >= -tol.feas_tol {
            SdpStatus::Optimal
        } else {
            SdpStatus::Infeasible
        }
    } else if violation <= tol.feas_tol {
        SdpStatus::Optimal
    } else {
        let a = stage_a(prep, tol);
        iterations += a.iterations;
        let u = a.primal_objective;
        if a.status == IpmStatus::Converged && u > 10.0 * tol.feas_tol {
            SdpStatus::Infeasible
        } else if r.status == IpmStatus::MaxIterations {
            SdpStatus::MaxIterations
        } else {
            SdpStatus::NumericalFailure
        }
    };
    log::trace!("phase I: status {:?}, s* = {slack:.3e}, iterations {iterations}", r.status);
    SdpSolution {
        blocks,
        status,
        objective: slack,
        dual_objective: slack,
        primal_violation: violation,
        gap: r.rel_gap,
        dual_residual: r.dual_residual,
        iterations,
        phase1_slack: Some(slack),
    }
}

/// Solves the problem in its declared sense. Non-convergence triggers a
/// phase-I check that distinguishes infeasibility from numerical trouble.
pub fn solve(problem: &SdpProblem, tol: &Tolerances) -> Result<SdpSolution> {
    validate(problem, tol)?;
    if problem.sense == Sense::Feasibility {
        let prep = prepare(problem, false);
        return Ok(feasibility_prepared(problem, &prep, tol));
    }
    let prep = prepare(problem, true);
    if let Some(v) = prep.zero_row_violation {
        if v > tol.feas_tol {
            return Ok(feasibility_prepared(problem, &prep, tol));
        }
    }
    let r = ipm::run(&prep.real, settings(tol));
    let blocks = to_blocks(problem, &prep.lay, &r.x, &r.xl);
    let objective = evaluate_terms(&problem.objective, &blocks);
    let sign = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let dual_objective = sign * r.dual_objective * prep.obj_scale;
    let violation = primal_violation(problem, &blocks);
    if r.status == IpmStatus::Converged {
        return Ok(SdpSolution {
            blocks,
            status: SdpStatus::Optimal,
            objective,
            dual_objective,
            primal_violation: violation,
            gap: r.rel_gap,
            dual_residual: r.dual_residual,
            iterations: r.iterations,
            phase1_slack: None,
        });
    }
    let f = feasibility_prepared(problem, &prep, tol);
    let status = match (f.status, r.status) {
        (SdpStatus::Infeasible, _) => SdpStatus::Infeasible,
        (_, IpmStatus::MaxIterations) => SdpStatus::MaxIterations,
        _ => SdpStatus::NumericalFailure,
    };
    log::debug!(
        "SDP not solved to tolerance: ipm {:?}, phase-I {:?}, violation {violation:.2e}",
        r.status,
        f.status
    );
    Ok(SdpSolution {
        blocks,
        status,
        objective,
        dual_objective,
        primal_violation: violation,
        gap: r.rel_gap,
        dual_residual: r.dual_residual,
        iterations: r.iterations + f.iterations,
        phase1_slack: f.phase1_slack,
    })
}

impl SdpProblem {
    /// Writes the problem in a plain sparse-triplet text format:
    ///
    /// ```text
    /// sdp-triplets 1
    /// sense minimize|maximize|feasibility
    /// blocks <count>
    /// block <b> hermitian|nonnegative <n>
    /// objective <terms>
    /// <b> <r> <c> <re> <im>              one line per upper-triangle entry
    /// constraint <k> ge|le|eq <rhs> <entries>
    /// <b> <r> <c> <re> <im>
    /// ```
    ///
    /// Indices are zero-based; entries with `r < c` stand for the pair
    /// `(r, c)`, `(c, r)` with conjugate values. Nonnegative-block weights use
    /// `r = c`.
    pub fn to_triplets(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
            Sense::Feasibility => "feasibility",
        };
        let _ = writeln!(out, "sdp-triplets 1");
        let _ = writeln!(out, "sense {sense}");
        let _ = writeln!(out, "blocks {}", self.blocks.len());
        for (b, kind) in self.blocks.iter().enumerate() {
            match kind {
                BlockKind::Hermitian(n) => writeln!(out, "block {b} hermitian {n}"),
                BlockKind::Nonnegative(n) => writeln!(out, "block {b} nonnegative {n}"),
            }
            .ok();
        }
        let entries = |terms: &[Term]| -> Vec<(usize, usize, usize, C64)> {
            let mut v = Vec::new();
            for t in terms {
                match &t.coeff {
                    Coeff::Dense(a) => {
                        for r in 0..a.nrows() {
                            for c in r..a.ncols() {
                                if a[(r, c)] != C64::new(0.0, 0.0) {
                                    v.push((t.block, r, c, a[(r, c)]));
                                }
                            }
                        }
                    }
                    Coeff::Sparse(e) => v.extend(e.iter().map(|&(r, c, z)| (t.block, r, c, z))),
                    Coeff::Diagonal(w) => v.extend(
                        w.iter()
                            .enumerate()
                            .filter(|(_, x)| **x != 0.0)
                            .map(|(k, &x)| (t.block, k, k, C64::new(x, 0.0))),
                    ),
                }
            }
            v
        };
        let obj = entries(&self.objective);
        let _ = writeln!(out, "objective {}", obj.len());
        for (b, r, c, z) in obj {
            let _ = writeln!(out, "{b} {r} {c} {:e} {:e}", z.re, z.im);
        }
        for (k, con) in self.constraints.iter().enumerate() {
            let rel = match con.relation {
                Relation::Geq => "ge",
                Relation::Leq => "le",
                Relation::Eq => "eq",
            };
            let e = entries(&con.terms);
            let _ = writeln!(out, "constraint {k} {rel} {:e} {}", con.rhs, e.len());
            for (b, r, c, z) in e {
                let _ = writeln!(out, "{b} {r} {c} {:e} {:e}", z.re, z.im);
            }
        }
        out
    }
}
