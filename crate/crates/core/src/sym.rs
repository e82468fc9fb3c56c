//! Symmetry-reduced solver for entanglement-fidelity distortion.
//!
//! Once `ρ_R = V diag(p) V^H` is diagonalized, the distortion becomes
//! `I - |φ_p⟩⟨φ_p|` with `φ_p = Σ √p_i |ii⟩` in the basis `V ⊗ conj(V)`, and
//! with diagonal `Λ_R`, `σ_B` every iterate lives in the space of operators
//! that act as an arbitrary `n × n` block on `span{|ii⟩}` (the *core*) and
//! are diagonal on the `n(n-1)` remaining vectors `|ij⟩, i ≠ j` (the *tail*).
//! Exponentials, logarithms and partial traces of such operators cost
//! `O(n³)`, against `O(n⁶)` for the dense `n² × n²` kernels.

use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::{self, eigh, CMatrix, HermitianMatrix, LOG_FLOOR};
use crate::problem::{self, trace_x_log_x, DensityMatrix, Distortion, ProblemInstance};
use crate::solver::{
    self, DualState, IterateRecord, JointState, SolverConfig, SolverPath, SolverResult,
    SolverStatus, WarmStart,
};

/// Off-structure mass accepted by [`sym_extract`].
pub const EXTRACT_TOL: f64 = 1e-10;
/// Entrywise tolerance for accepting an explicit distortion matrix as the
/// entanglement-fidelity distortion of the source.
pub const STRUCTURE_TOL: f64 = 1e-8;
const DIAGONAL_INPUT_TOL: f64 = 1e-14;

/// Element of the reduced operator space.
#[derive(Clone, Debug, PartialEq)]
pub struct SymOperator {
    n: usize,
    core: CMatrix,
    tail: Vec<f64>,
}

/// Position of `|i⟩⊗|j⟩`, `i ≠ j`, in the row-major tail layout.
pub fn tail_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j < i { j } else { j - 1 }
}

impl SymOperator {
    pub fn new(core: CMatrix, tail: Vec<f64>) -> Result<Self> {
        let core = HermitianMatrix::new(core)?.into_matrix();
        let n = core.nrows();
        if tail.len() != n * (n - 1) {
            return Err(Error::DimensionMismatch {
                expected: n * (n - 1),
                found: tail.len(),
            });
        }
        Ok(Self { n, core, tail })
    }

    fn from_parts(core: CMatrix, tail: Vec<f64>) -> Self {
        let n = core.nrows();
        Self { n, core, tail }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts(CMatrix::identity(n, n), vec![1.0; n * (n - 1)])
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_parts(CMatrix::zeros(n, n), vec![0.0; n * (n - 1)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn core(&self) -> &CMatrix {
        &self.core
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    pub fn tail_at(&self, i: usize, j: usize) -> f64 {
        self.tail[tail_index(self.n, i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.core.trace().re + self.tail.iter().sum::<f64>()
    }

    /// `Re Tr(self · other)`.
    pub fn trace_product(&self, other: &SymOperator) -> f64 {
        hermitian::trace_product(&self.core, &other.core)
            + self
                .tail
                .iter()
                .zip(&other.tail)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn add(&self, other: &SymOperator) -> SymOperator {
        Self::from_parts(
            &self.core + &other.core,
            self.tail
                .iter()
                .zip(&other.tail)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &SymOperator) -> SymOperator {
        Self::from_parts(
            &self.core - &other.core,
            self.tail
                .iter()
                .zip(&other.tail)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> SymOperator {
        Self::from_parts(
            &self.core * Complex64::new(factor, 0.0),
            self.tail.iter().map(|t| t * factor).collect(),
        )
    }

    /// Operator product; the result is Hermitian only when the factors
    /// commute on the core, so it is returned as a raw dense-equivalent.
    pub fn mul(&self, other: &SymOperator) -> SymOperator {
        Self::from_parts(
            &self.core * &other.core,
            self.tail
                .iter()
                .zip(&other.tail)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Entrywise one-norm of the embedded operator.
    pub fn entrywise_one_norm(&self) -> f64 {
        hermitian::entrywise_one_norm(&self.core) + self.tail.iter().map(|t| t.abs()).sum::<f64>()
    }

    /// Dense `n² × n²` matrix of the same operator.
    pub fn embed(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                out[(i * n + i, j * n + j)] = self.core[(i, j)];
                if i != j {
                    let d = i * n + j;
                    out[(d, d)] = Complex64::new(self.tail_at(i, j), 0.0);
                }
            }
        }
        out
    }

    /// `(Tr_2, Tr_1)` diagonals; both partial traces of a reduced operator
    /// are diagonal.
    #[allow(clippy::needless_range_loop)]
    pub fn partial_traces(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut tr2: Vec<f64> = (0..n).map(|i| self.core[(i, i)].re).collect();
        let mut tr1 = tr2.clone();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let t = self.tail_at(i, j);
                    tr2[i] += t;
                    tr1[j] += t;
                }
            }
        }
        (tr2, tr1)
    }
}

/// `sym_embed` as a Hermitian matrix.
pub fn sym_embed(s: &SymOperator) -> HermitianMatrix {
    HermitianMatrix::symmetrized(s.embed())
}

/// Reads a dense `n² × n²` matrix back into reduced form.
pub fn sym_extract(m: &HermitianMatrix, n: usize) -> Result<SymOperator> {
    if m.dim() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: m.dim(),
        });
    }
    let a = m.as_matrix();
    let mut core = CMatrix::zeros(n, n);
    let mut tail = vec![0.0; n * (n - 1)];
    let mut mass = 0.0;
    for col in 0..n * n {
        let (cj, ck) = (col / n, col % n);
        for row in 0..n * n {
            let (ri, rk) = (row / n, row % n);
            let z = a[(row, col)];
            if ri == rk && cj == ck {
                core[(ri, cj)] = z;
            } else if row == col {
                tail[tail_index(n, ri, rk)] = z.re;
                mass += z.im.abs();
            } else {
                mass += z.norm();
            }
        }
    }
    if mass > EXTRACT_TOL {
        return Err(Error::StructureViolation { mass });
    }
    Ok(SymOperator::from_parts(core, tail))
}

/// A reduced exponential with the spectrum of its exponent.
#[derive(Clone, Debug)]
pub struct SymGibbs {
    pub op: SymOperator,
    pub exponent_eigenvalues: Vec<f64>,
}

impl SymGibbs {
    fn x_log_x(&self) -> f64 {
        self.exponent_eigenvalues
            .iter()
            .map(|&mu| {
                let e = mu.exp();
                if e > 0.0 {
                    e * mu
                } else {
                    0.0
                }
            })
            .sum()
    }
}

fn sym_exp_spectrum(s: &SymOperator) -> Result<SymGibbs> {
    let spec = eigh(&HermitianMatrix::symmetrized(s.core.clone()))?;
    let core = hermitian::exp_from_spectrum(&spec)?.into_matrix();
    let max_tail = s.tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_tail > hermitian::EXP_MAX_EIGENVALUE {
        return Err(Error::ExpOverflow {
            max_eigenvalue: max_tail,
        });
    }
    let tail = s.tail.iter().map(|t| t.exp()).collect();
    let mut exponent_eigenvalues = spec.eigenvalues;
    exponent_eigenvalues.extend_from_slice(&s.tail);
    Ok(SymGibbs {
        op: SymOperator::from_parts(core, tail),
        exponent_eigenvalues,
    })
}

pub fn sym_exp(s: &SymOperator) -> Result<SymOperator> {
    Ok(sym_exp_spectrum(s)?.op)
}

pub fn sym_log(s: &SymOperator) -> Result<SymOperator> {
    let core = hermitian::mat_log(&HermitianMatrix::symmetrized(s.core.clone()))?.into_matrix();
    let mut tail = Vec::with_capacity(s.tail.len());
    for &t in &s.tail {
        if t < -hermitian::LOG_NEGATIVE_TOL {
            return Err(Error::LogDomain { min_eigenvalue: t });
        }
        tail.push(t.max(LOG_FLOOR).ln());
    }
    Ok(SymOperator::from_parts(core, tail))
}

pub fn sym_partial_traces(s: &SymOperator) -> (Vec<f64>, Vec<f64>) {
    s.partial_traces()
}

/// Vector of diagonal entries (probabilities or multiplier diagonals).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalState {
    pub entries: Vec<f64>,
}

impl DiagonalState {
    pub fn is_density(&self) -> bool {
        self.entries.iter().all(|&p| p >= -1e-12)
            && (self.entries.iter().sum::<f64>() - 1.0).abs() <= 1e-10
    }
}

/// `ρ_R = basis · diag(p) · basis^H` with `p` descending. Diagonal inputs get
/// a permutation basis.
pub fn diagonalize_input(rho_r: &DensityMatrix) -> Result<(DiagonalState, CMatrix)> {
    let n = rho_r.dim();
    let h = rho_r.as_hermitian();
    let (p, vectors): (Vec<f64>, CMatrix) = if h.off_diagonal_mass() <= DIAGONAL_INPUT_TOL {
        let d = h.diagonal();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
        let basis = CMatrix::from_fn(n, n, |r, c| {
            if r == order[c] {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        (order.iter().map(|&i| d[i]).collect(), basis)
    } else {
        let s = eigh(h)?;
        let basis = CMatrix::from_fn(n, n, |r, c| s.eigenvectors[(r, n - 1 - c)]);
        ((0..n).map(|c| s.eigenvalues[n - 1 - c]).collect(), basis)
    };
    Ok((DiagonalState { entries: p }, vectors))
}

/// Reduced joint state together with the basis that diagonalizes `ρ_R`.
#[derive(Clone, Debug)]
pub struct ReducedJoint {
    pub op: SymOperator,
    pub basis: CMatrix,
}

impl ReducedJoint {
    /// `(V ⊗ conj V) embed(op) (V ⊗ conj V)^H` in the original basis.
    pub fn to_dense(&self) -> HermitianMatrix {
        let w = hermitian::kron(&self.basis, &self.basis.map(|z| z.conj()));
        HermitianMatrix::symmetrized(&w * self.op.embed() * w.adjoint())
    }
}

/// Reduced form of `I - |φ_p⟩⟨φ_p|`.
pub fn reduced_distortion(p: &[f64]) -> SymOperator {
    let n = p.len();
    let root: Vec<f64> = p.iter().map(|x| x.max(0.0).sqrt()).collect();
    let core = CMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        Complex64::new(delta - root[i] * root[j], 0.0)
    });
    SymOperator::from_parts(core, vec![1.0; n * (n - 1)])
}

/// `β_{k+1} = β_k + log((G(β_k) + D) / D)`, the exact root of `G` for an
/// idempotent distortion.
pub fn sym_beta_update(beta_k: f64, g_at_beta_k: f64, d: f64) -> Result<f64> {
    let argument = (g_at_beta_k + d) / d;
    if !(d > 0.0) || !(argument > 0.0) || !argument.is_finite() {
        return Err(Error::BetaLogDomain { argument });
    }
    Ok(beta_k + argument.ln())
}

/// Whether an explicit distortion matrix is the entanglement-fidelity
/// distortion of `rho_r`, entrywise within [`STRUCTURE_TOL`].
pub fn is_entanglement_fidelity(instance: &ProblemInstance) -> Result<bool> {
    match instance.distortion() {
        Distortion::EntanglementFidelity => Ok(true),
        Distortion::Matrix(delta) => {
            if instance.m() != instance.n() {
                return Ok(false);
            }
            let reference = problem::entanglement_fidelity_distortion(instance.rho_r())?;
            let worst = (delta.as_matrix() - reference.as_matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            Ok(worst <= STRUCTURE_TOL)
        }
    }
}

/// Reduced iterate context.
struct Reduced<'a> {
    p: &'a [f64],
    root: Vec<f64>,
}

impl Reduced<'_> {
    /// `I ⊗ log σ + Λ ⊗ I - βΔ - I` in reduced coordinates.
    fn exponent(&self, log_s: &[f64], lambda: &[f64], beta: f64) -> SymOperator {
        let n = self.p.len();
        let core = CMatrix::from_fn(n, n, |i, j| {
            let v = if i == j {
                log_s[i] + lambda[i] - 1.0 - beta * (1.0 - self.p[i])
            } else {
                beta * self.root[i] * self.root[j]
            };
            Complex64::new(v, 0.0)
        });
        let mut tail = vec![0.0; n * (n - 1)];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    tail[tail_index(n, i, j)] = log_s[j] + lambda[i] - 1.0 - beta;
                }
            }
        }
        SymOperator::from_parts(core, tail)
    }

    fn gibbs(&self, log_s: &[f64], lambda: &[f64], beta: f64) -> Result<SymGibbs> {
        if beta.is_finite() {
            return sym_exp_spectrum(&self.exponent(log_s, lambda, beta));
        }
        // β = ∞: compress onto ker Δ = span{φ_p}, so ρ = e^y |φ_p⟩⟨φ_p|.
        let n = self.p.len();
        let y: f64 = (0..n)
            .map(|i| self.p[i] * (log_s[i] + lambda[i] - 1.0))
            .sum();
        let scale = y.exp();
        let core = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(scale * self.root[i] * self.root[j], 0.0)
        });
        Ok(SymGibbs {
            op: SymOperator::from_parts(core, vec![0.0; n * (n - 1)]),
            exponent_eigenvalues: vec![y],
        })
    }

    /// `Tr(Δ X) = Tr X - ⟨φ_p|X|φ_p⟩`.
    fn distortion_of(&self, x: &SymOperator) -> f64 {
        let n = self.p.len();
        let mut fidelity = 0.0;
        for i in 0..n {
            for j in 0..n {
                fidelity += self.root[i] * self.root[j] * x.core[(i, j)].re;
            }
        }
        x.trace() - fidelity
    }
}

/// `‖V diag(v) V^H‖₁` (entrywise); `V` is `basis` or its conjugate.
fn rotated_diag_norm(basis: &CMatrix, v: &[f64]) -> f64 {
    hermitian::entrywise_one_norm(rotate_diag(basis, v).as_matrix())
}

fn rotate_diag(basis: &CMatrix, v: &[f64]) -> HermitianMatrix {
    let mut scaled = basis.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(v[j], 0.0);
    }
    HermitianMatrix::symmetrized(scaled * basis.adjoint())
}

/// Rotates a dense `n × n` operator into the diagonalizing basis and reads
/// off its diagonal.
fn diagonal_in_basis(m: &HermitianMatrix, basis: &CMatrix) -> Vec<f64> {
    let rotated = basis.adjoint() * m.as_matrix() * basis;
    (0..basis.ncols()).map(|i| rotated[(i, i)].re).collect()
}

/// Symmetric-path solve. Instances whose distortion is not the
/// entanglement-fidelity distortion of the source fall back to the dense
/// path and are tagged [`SolverPath::DenseFallback`].
pub fn solve_sym(instance: &ProblemInstance, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_sym_with(instance, cfg, None)
}

pub fn solve_sym_with(
    instance: &ProblemInstance,
    cfg: &SolverConfig,
    warm: Option<&WarmStart>,
) -> Result<SolverResult> {
    cfg.validate()?;
    if !is_entanglement_fidelity(instance)? {
        let mut r = solver::solve_with(instance, cfg, warm)?;
        r.path = SolverPath::DenseFallback;
        return Ok(r);
    }
    let start = Instant::now();
    let n = instance.n();
    let d = instance.d();
    let alpha = cfg.effective_alpha(instance.rho_r())?;
    let (p_state, basis) = diagonalize_input(instance.rho_r())?;
    let p = p_state.entries.as_slice();
    let conj_basis = basis.map(|z| z.conj());
    let ctx = Reduced {
        p,
        root: p.iter().map(|x| x.max(0.0).sqrt()).collect(),
    };

    // λ_min(Δ_B) = 1 - p_max² for this distortion.
    let lambda_min = 1.0 - p[0] * p[0];
    if lambda_min <= d {
        return Ok(rate_zero_sym(p, basis, &conj_basis, alpha));
    }
    let kernel_mode = d == 0.0;

    let (mut s, mut e) = match warm {
        Some(w) if w.sigma_b.dim() == n && w.dual.exp_neg_lambda().dim() == n => (
            diagonal_in_basis(w.sigma_b.as_hermitian(), &conj_basis),
            diagonal_in_basis(w.dual.exp_neg_lambda(), &basis),
        ),
        _ => (vec![1.0 / n as f64; n], vec![1.0; n]),
    };
    let s_sum: f64 = s.iter().sum();
    s.iter_mut().for_each(|x| *x = x.max(0.0) / s_sum);
    e.iter_mut().for_each(|x| *x = x.max(f64::MIN_POSITIVE));
    let mut beta = if kernel_mode {
        f64::INFINITY
    } else {
        warm.map(|w| w.dual.beta)
            .filter(|b| b.is_finite())
            .unwrap_or(1.0)
    };

    let ln_floor = |x: f64| x.max(LOG_FLOOR).ln();
    let mut log_s: Vec<f64> = s.iter().map(|&x| ln_floor(x)).collect();
    let mut lambda: Vec<f64> = e.iter().map(|&x| -ln_floor(x)).collect();
    let mut target = ctx.gibbs(&log_s, &lambda, beta)?;
    let source_term = trace_x_log_x(p);
    let nf = n as f64;

    let mut trace = Vec::new();
    let mut rho = None;
    let mut final_e_opt = f64::INFINITY;
    let mut status = SolverStatus::MaxIterReached;
    let mut iterations = 0;

    for k in 1..=cfg.max_iter {
        iterations = k;
        let outcome = (|| -> Result<(SymGibbs, f64)> {
            let (k0, _) = target.op.partial_traces();
            for i in 0..n {
                e[i] *= (k0[i] + alpha) / (p[i] + alpha);
            }
            lambda = e.iter().map(|&x| -ln_floor(x)).collect();

            let rho_k = ctx.gibbs(&log_s, &lambda, beta)?;
            let (tr2, tr1) = rho_k.op.partial_traces();
            let total: f64 = tr1.iter().sum();
            if !(1e-12..=1e12).contains(&total) {
                return Err(Error::DegenerateState { trace: total });
            }
            s = tr1.iter().map(|&x| x / total).collect();
            log_s = s.iter().map(|&x| ln_floor(x)).collect();

            if !kernel_mode {
                let a = ctx.gibbs(&log_s, &lambda, beta)?;
                let g = ctx.distortion_of(&a.op) - d;
                beta = sym_beta_update(beta, g, d)?.max(0.0);
            }
            target = ctx.gibbs(&log_s, &lambda, beta)?;

            let t1 = (ctx.distortion_of(&rho_k.op) - d).abs();
            let dr: Vec<f64> = tr2.iter().zip(p).map(|(a, b)| a - b).collect();
            let ds: Vec<f64> = tr1.iter().zip(&s).map(|(a, b)| a - b).collect();
            let t2 = rotated_diag_norm(&basis, &dr) / (nf * nf);
            let t3 = rotated_diag_norm(&conj_basis, &ds) / (nf * nf);
            let t4 = rho_k.op.sub(&target.op).entrywise_one_norm() / (nf * nf * nf * nf);
            let e_opt = t1 + t2 + t3 + t4;

            if cfg.record_trace {
                let cross: f64 = tr1.iter().zip(&log_s).map(|(a, b)| a * b).sum();
                trace.push(IterateRecord {
                    k,
                    e_opt,
                    rate: rho_k.x_log_x() - cross - source_term,
                    beta,
                    wall_time: start.elapsed().as_secs_f64(),
                });
            }
            Ok((rho_k, e_opt))
        })();
        let (rho_k, e_opt) = outcome.map_err(|err| err.at(k))?;
        rho = Some(rho_k);
        final_e_opt = e_opt;
        if e_opt <= cfg.tol {
            status = SolverStatus::Converged;
            break;
        }
    }

    let rho = rho.expect("max_iter >= 1");
    let (_, tr1) = rho.op.partial_traces();
    let cross: f64 = tr1.iter().zip(&log_s).map(|(a, b)| a * b).sum();
    let rate = rho.x_log_x() - cross - source_term;

    let sigma_b = DensityMatrix::new_unchecked(rotate_diag(&conj_basis, &s));
    let exp_neg_lambda = rotate_diag(&basis, &e);
    Ok(SolverResult {
        rate,
        rho_rb: JointState::Reduced(ReducedJoint { op: rho.op, basis }),
        sigma_b,
        dual: DualState::new_unchecked(beta, exp_neg_lambda),
        iterations,
        final_e_opt,
        trace,
        status,
        path: SolverPath::Symmetric,
        alpha,
    })
}

fn rate_zero_sym(p: &[f64], basis: CMatrix, conj_basis: &CMatrix, alpha: f64) -> SolverResult {
    let n = p.len();
    // ρ_R ⊗ |0⟩⟨0| in the reduced basis, |0⟩ the top eigenvector of ρ_R.
    let mut op = SymOperator::zeros(n);
    op.core[(0, 0)] = Complex64::new(p[0], 0.0);
    for (i, &pi) in p.iter().enumerate().skip(1) {
        op.tail[tail_index(n, i, 0)] = pi;
    }
    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    SolverResult {
        rate: 0.0,
        rho_rb: JointState::Reduced(ReducedJoint {
            op,
            basis: basis.clone(),
        }),
        sigma_b: DensityMatrix::new_unchecked(rotate_diag(conj_basis, &e0)),
        dual: DualState::new_unchecked(0.0, HermitianMatrix::identity(n)),
        iterations: 0,
        final_e_opt: 0.0,
        trace: Vec::new(),
        status: SolverStatus::RateZeroShortcut,
        path: SolverPath::Symmetric,
        alpha,
    }
}
