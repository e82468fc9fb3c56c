//! Dense alternating minimization.
//!
//! Each outer iteration performs, in order:
//!
//! 1. the multiplicative update of `exp(-Λ_R)` that drives `Tr_2(ρ_RB)`
//!    towards `ρ_R`,
//! 2. `ρ_RB = exp(I ⊗ log σ_B - βΔ + Λ_R ⊗ I - I)`,
//! 3. `σ_B = Tr_1(ρ_RB)` (normalized),
//! 4. a safeguarded Newton solve of the monotone scalar equation `G(β) = 0`.
//!
//! `D = 0` is handled as the `β → ∞` limit: the exponential is compressed
//! onto the kernel of Δ and the β step is skipped.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{
    self, eigh, exp_from_spectrum, inv_sqrt_psd, partial_trace_first, CMatrix, HermitianMatrix,
};
use crate::problem::{
    self, delta_b, objective_rate, residual_terms, trace_x_log_x, DensityMatrix, PrimalState,
    ProblemInstance,
};
use crate::sym::ReducedJoint;

/// Distortion eigenvalues with `|λ| ≤ KERNEL_TOL · λ_max` are treated as 0.
pub const KERNEL_TOL: f64 = 1e-12;
/// `ρ_R` condition number above which `alpha = 0` is raised automatically.
pub const AUTO_ALPHA_CONDITION: f64 = 1e12;
pub const AUTO_ALPHA: f64 = 1e-12;
/// Growth of `e_opt` over its best value at which a dense run is stopped.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
const MAX_BRACKET_DOUBLINGS: usize = 200;
const SIGMA_TRACE_RANGE: (f64, f64) = (1e-12, 1e12);

/// Multipliers `(β, Λ_R)`, with `Λ_R` stored as `exp(-Λ_R)`.
#[derive(Clone, Debug)]
pub struct DualState {
    pub beta: f64,
    exp_neg_lambda: HermitianMatrix,
}

impl DualState {
    pub fn new(beta: f64, exp_neg_lambda: HermitianMatrix) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "beta must be >= 0, got {beta}"
            )));
        }
        let lo = hermitian::min_eigenvalue(&exp_neg_lambda)?;
        if !(lo > 0.0) {
            return Err(Error::InvalidInput(format!(
                "exp(-Lambda_R) must be positive definite, min eigenvalue {lo:e}"
            )));
        }
        Ok(Self {
            beta,
            exp_neg_lambda,
        })
    }

    pub(crate) fn new_unchecked(beta: f64, exp_neg_lambda: HermitianMatrix) -> Self {
        Self {
            beta,
            exp_neg_lambda,
        }
    }

    /// `β = 1`, `Λ_R = 0`.
    pub fn initial(n: usize) -> Self {
        Self::new_unchecked(1.0, HermitianMatrix::identity(n))
    }

    pub fn from_lambda(beta: f64, lambda_r: &HermitianMatrix) -> Result<Self> {
        let neg = lambda_r.scale(-1.0);
        Self::new(beta, hermitian::mat_exp(&neg)?)
    }

    pub fn exp_neg_lambda(&self) -> &HermitianMatrix {
        &self.exp_neg_lambda
    }

    /// `Λ_R = -log(exp(-Λ_R))`.
    pub fn lambda_r(&self) -> Result<HermitianMatrix> {
        Ok(hermitian::mat_log(&self.exp_neg_lambda)?.scale(-1.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stopping threshold on `e_opt`.
    pub tol: f64,
    /// Regularization of the `Λ_R` update; 0 is raised to [`AUTO_ALPHA`] when
    /// `ρ_R` is ill-conditioned.
    pub alpha: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-10,
            alpha: 0.0,
            newton_tol: 1e-12,
            newton_max: 50,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0) || !(self.newton_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be > 0".into()));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig("alpha must be finite and >= 0".into()));
        }
        if self.newton_max == 0 {
            return Err(Error::InvalidConfig("newton_max must be >= 1".into()));
        }
        Ok(())
    }

    /// The regularization actually used for `instance`.
    pub fn effective_alpha(&self, rho_r: &DensityMatrix) -> Result<f64> {
        if self.alpha > 0.0 {
            return Ok(self.alpha);
        }
        let s = eigh(rho_r.as_hermitian())?;
        let cond = if s.min() > 0.0 {
            s.max() / s.min()
        } else {
            f64::INFINITY
        };
        Ok(if cond > AUTO_ALPHA_CONDITION {
            AUTO_ALPHA
        } else {
            0.0
        })
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub e_opt: f64,
    pub rate: f64,
    pub beta: f64,
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolverStatus {
    Converged,
    MaxIterReached,
    RateZeroShortcut,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "Converged",
            SolverStatus::MaxIterReached => "MaxIterReached",
            SolverStatus::RateZeroShortcut => "RateZeroShortcut",
        }
    }
}

/// Which code path produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolverPath {
    Dense,
    Symmetric,
    /// The symmetric path was requested but the instance failed the
    /// structure check.
    DenseFallback,
}

impl SolverPath {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverPath::Dense => "Dense",
            SolverPath::Symmetric => "Symmetric",
            SolverPath::DenseFallback => "DenseFallback",
        }
    }
}

/// Joint operator of a result, kept in reduced form when the symmetric path
/// produced it so that large instances never materialize `n² × n²` matrices.
#[derive(Clone, Debug)]
pub enum JointState {
    Dense(HermitianMatrix),
    Reduced(ReducedJoint),
}

impl JointState {
    pub fn to_dense(&self) -> HermitianMatrix {
        match self {
            JointState::Dense(m) => m.clone(),
            JointState::Reduced(r) => r.to_dense(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    /// `R(D)` in nats.
    pub rate: f64,
    pub rho_rb: JointState,
    pub sigma_b: DensityMatrix,
    pub dual: DualState,
    pub iterations: usize,
    pub final_e_opt: f64,
    pub trace: Vec<IterateRecord>,
    pub status: SolverStatus,
    pub path: SolverPath,
    pub alpha: f64,
}

impl SolverResult {
    pub fn primal(&self) -> PrimalState {
        PrimalState {
            rho_rb: self.rho_rb.to_dense(),
            sigma_b: self.sigma_b.clone(),
        }
    }

    pub fn warm_start(&self) -> Option<WarmStart> {
        if self.status == SolverStatus::RateZeroShortcut || !self.dual.beta.is_finite() {
            return None;
        }
        Some(WarmStart {
            dual: self.dual.clone(),
            sigma_b: self.sigma_b.clone(),
        })
    }
}

/// Starting point carried between neighbouring sweep points.
#[derive(Clone, Debug)]
pub struct WarmStart {
    pub dual: DualState,
    pub sigma_b: DensityMatrix,
}

/// Spectral data of Δ reused by every β solve.
#[derive(Clone, Debug)]
pub struct DistortionSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    /// Orthonormal basis of `ker Δ` (columns).
    pub kernel: CMatrix,
}

impl DistortionSpectrum {
    pub fn new(delta: &HermitianMatrix) -> Result<Self> {
        let s = eigh(delta)?;
        let cut = KERNEL_TOL * s.max().abs().max(1.0);
        let eigenvalues: Vec<f64> = s
            .eigenvalues
            .iter()
            .map(|&l| if l.abs() <= cut { 0.0 } else { l })
            .collect();
        let kernel_cols: Vec<usize> = (0..eigenvalues.len())
            .filter(|&i| eigenvalues[i] == 0.0)
            .collect();
        let dim = eigenvalues.len();
        let kernel = CMatrix::from_fn(dim, kernel_cols.len(), |r, c| {
            s.eigenvectors[(r, kernel_cols[c])]
        });
        Ok(Self {
            eigenvalues,
            eigenvectors: s.eigenvectors,
            kernel,
        })
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(0.0, f64::max)
    }
}

/// `I_n ⊗ log σ_B + Λ_R ⊗ I_m - β Δ - I_{nm}`; `beta = None` drops the Δ term.
fn joint_exponent(
    log_sigma: &HermitianMatrix,
    lambda_r: &HermitianMatrix,
    beta: Option<f64>,
    delta: &HermitianMatrix,
) -> HermitianMatrix {
    let n = lambda_r.dim();
    let m = log_sigma.dim();
    let ls = log_sigma.as_matrix();
    let lr = lambda_r.as_matrix();
    let mut x = match beta {
        Some(b) => delta.as_matrix() * num_complex::Complex64::new(-b, 0.0),
        None => CMatrix::zeros(n * m, n * m),
    };
    for i in 0..n {
        for j in 0..n {
            let lij = lr[(i, j)];
            for k in 0..m {
                x[(i * m + k, j * m + k)] += lij;
            }
        }
        for k in 0..m {
            for l in 0..m {
                x[(i * m + k, i * m + l)] += ls[(k, l)];
            }
        }
    }
    for d in 0..n * m {
        x[(d, d)] -= 1.0;
    }
    HermitianMatrix::symmetrized(x)
}

/// A matrix exponential together with the spectrum of its exponent, so that
/// `Tr(ρ log ρ) = Σ e^μ μ` comes for free.
struct GibbsOperator {
    matrix: HermitianMatrix,
    exponent_eigenvalues: Vec<f64>,
}

impl GibbsOperator {
    fn from_exponent(x: &HermitianMatrix) -> Result<Self> {
        let s = eigh(x)?;
        Ok(Self {
            matrix: exp_from_spectrum(&s)?,
            exponent_eigenvalues: s.eigenvalues,
        })
    }

    /// `V exp(V^H X V) V^H` for an isometry `V`.
    fn compressed(x: &HermitianMatrix, kernel: &CMatrix) -> Result<Self> {
        let y = HermitianMatrix::symmetrized(kernel.adjoint() * x.as_matrix() * kernel);
        let s = eigh(&y)?;
        let small = exp_from_spectrum(&s)?;
        let matrix = HermitianMatrix::symmetrized(kernel * small.as_matrix() * kernel.adjoint());
        Ok(Self {
            matrix,
            exponent_eigenvalues: s.eigenvalues,
        })
    }

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

fn gibbs(
    log_sigma: &HermitianMatrix,
    lambda_r: &HermitianMatrix,
    beta: f64,
    delta: &HermitianMatrix,
    spectrum: Option<&DistortionSpectrum>,
) -> Result<GibbsOperator> {
    if beta.is_finite() {
        GibbsOperator::from_exponent(&joint_exponent(log_sigma, lambda_r, Some(beta), delta))
    } else {
        let owned;
        let spec = match spectrum {
            Some(s) => s,
            None => {
                owned = DistortionSpectrum::new(delta)?;
                &owned
            }
        };
        if spec.kernel.ncols() == 0 {
            return Err(Error::Infeasible { d: 0.0 });
        }
        GibbsOperator::compressed(
            &joint_exponent(log_sigma, lambda_r, None, delta),
            &spec.kernel,
        )
    }
}

/// `exp(Δ' - I)` with `Δ' = -βΔ + Λ_R ⊗ I + I ⊗ log σ_B`; infinite β selects
/// the kernel-compressed limit.
pub fn gibbs_target(
    log_sigma: &HermitianMatrix,
    lambda_r: &HermitianMatrix,
    beta: f64,
    instance: &ProblemInstance,
) -> Result<HermitianMatrix> {
    Ok(gibbs(log_sigma, lambda_r, beta, instance.delta()?, None)?.matrix)
}

/// `ρ_RB = exp(I_n ⊗ log σ_B - βΔ + Λ_R ⊗ I_m - I_{mn})`.
pub fn assemble_rho_rb(
    sigma_b: &DensityMatrix,
    dual: &DualState,
    instance: &ProblemInstance,
) -> Result<HermitianMatrix> {
    let log_sigma = hermitian::mat_log(sigma_b.as_hermitian())?;
    gibbs_target(&log_sigma, &dual.lambda_r()?, dual.beta, instance)
}

/// One multiplicative step on `E = exp(-Λ_R)`:
/// `E ← E^{1/2} (ρ_R + α)^{-1/2} (K₀ + α) (ρ_R + α)^{-1/2} E^{1/2}`.
pub fn lambda_step(
    sqrt_e: &HermitianMatrix,
    rho_inv_sqrt: &HermitianMatrix,
    k0: &HermitianMatrix,
    alpha: f64,
) -> HermitianMatrix {
    let inner = rho_inv_sqrt.as_matrix() * k0.shift(alpha).as_matrix() * rho_inv_sqrt.as_matrix();
    HermitianMatrix::symmetrized(sqrt_e.as_matrix() * inner * sqrt_e.as_matrix())
}

/// `Λ_R` update with `K₀ = Tr_2(ρ_RB(σ_B, β, Λ_R))`.
pub fn update_lambda_r(
    dual: &DualState,
    sigma_b: &DensityMatrix,
    beta: f64,
    instance: &ProblemInstance,
    alpha: f64,
) -> Result<DualState> {
    let current = DualState::new_unchecked(beta, dual.exp_neg_lambda.clone());
    let rho = assemble_rho_rb(sigma_b, &current, instance)?;
    let k0 = rho.partial_trace_second(instance.n(), instance.m())?;
    let rho_inv_sqrt = inv_sqrt_psd(instance.rho_r().as_hermitian(), alpha)?;
    let sqrt_e = hermitian::sqrt_psd(&dual.exp_neg_lambda)?;
    Ok(DualState::new_unchecked(
        dual.beta,
        lambda_step(&sqrt_e, &rho_inv_sqrt, &k0, alpha),
    ))
}

/// `σ_B = Tr_1(ρ_RB) / Tr(ρ_RB)`.
pub fn update_sigma_b(rho_rb: &HermitianMatrix, n: usize, m: usize) -> Result<DensityMatrix> {
    let tr1 = partial_trace_first(rho_rb.as_matrix(), n, m)?;
    normalize_marginal(HermitianMatrix::symmetrized(tr1))
}

fn normalize_marginal(tr1: HermitianMatrix) -> Result<DensityMatrix> {
    let t = tr1.trace();
    if !(t >= SIGMA_TRACE_RANGE.0 && t <= SIGMA_TRACE_RANGE.1) {
        return Err(Error::DegenerateState { trace: t });
    }
    Ok(DensityMatrix::new_unchecked(tr1.scale(1.0 / t)))
}

/// `G(β) = Tr(A e^{β_k Δ} e^{-βΔ} Δ) - D` in the eigenbasis of Δ, where it
/// reduces to `Σ_i w_i λ_i e^{(β_k - β) λ_i} - D` with `w_i = u_i^H A u_i`.
#[derive(Clone, Debug)]
pub struct GFunction {
    pub beta_k: f64,
    pub d: f64,
    weights: Vec<f64>,
    lambdas: Vec<f64>,
}

impl GFunction {
    pub fn new(
        beta_k: f64,
        a_cache: &HermitianMatrix,
        spectrum: &DistortionSpectrum,
        d: f64,
    ) -> Self {
        let u = &spectrum.eigenvectors;
        let au = a_cache.as_matrix() * u;
        let weights = (0..u.ncols())
            .map(|c| u.column(c).dotc(&au.column(c)).re.max(0.0))
            .collect();
        Self {
            beta_k,
            d,
            weights,
            lambdas: spectrum.eigenvalues.clone(),
        }
    }

    fn exp_factor(&self, beta: f64, lambda: f64) -> Result<f64> {
        let exponent = (self.beta_k - beta) * lambda;
        if exponent > hermitian::EXP_MAX_EIGENVALUE {
            return Err(Error::GOverflow { exponent });
        }
        Ok(exponent.exp())
    }

    pub fn value(&self, beta: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&w, &l) in self.weights.iter().zip(&self.lambdas) {
            if l != 0.0 && w != 0.0 {
                acc += w * l * self.exp_factor(beta, l)?;
            }
        }
        Ok(acc - self.d)
    }

    /// `G'(β) = -Tr(A Δ e^{(β_k - β)Δ} Δ) ≤ 0`.
    pub fn derivative(&self, beta: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&w, &l) in self.weights.iter().zip(&self.lambdas) {
            if l != 0.0 && w != 0.0 {
                acc += w * l * l * self.exp_factor(beta, l)?;
            }
        }
        Ok(-acc)
    }
}

/// Convenience form of [`GFunction::value`] that decomposes Δ on the spot.
pub fn g_of_beta(
    beta: f64,
    beta_k: f64,
    a_cache: &HermitianMatrix,
    instance: &ProblemInstance,
) -> Result<f64> {
    let spectrum = DistortionSpectrum::new(instance.delta()?)?;
    GFunction::new(beta_k, a_cache, &spectrum, instance.d()).value(beta)
}

/// Root of the nonincreasing `G` on `β ≥ 0` by Newton's method, safeguarded
/// by a bisection bracket.
pub fn solve_beta(g: &GFunction, cfg: &SolverConfig) -> Result<f64> {
    let g0 = g.value(0.0)?;
    if g0 <= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = g.beta_k.max(1.0);
    let mut g_hi = g.value(hi)?;
    let mut doublings = 0;
    while g_hi > 0.0 {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(Error::NoRoot { doublings });
        }
        lo = hi;
        hi *= 2.0;
        g_hi = g.value(hi)?;
        doublings += 1;
    }
    if g_hi.abs() <= cfg.newton_tol {
        return Ok(hi);
    }

    let mut x = if g.beta_k > lo && g.beta_k < hi {
        g.beta_k
    } else {
        0.5 * (lo + hi)
    };
    let mut best = (f64::INFINITY, x);
    for _ in 0..cfg.newton_max + MAX_BRACKET_DOUBLINGS {
        let gx = g.value(x)?;
        if gx.abs() < best.0 {
            best = (gx.abs(), x);
        }
        if gx.abs() <= cfg.newton_tol {
            return Ok(x);
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
        let dg = g.derivative(x)?;
        let newton = if dg < 0.0 { x - gx / dg } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(best.1)
}

/// Lowest-residual iterate of a dense run that has not converged.
struct Snapshot {
    e_opt: f64,
    rho: HermitianMatrix,
    sigma: DensityMatrix,
    beta: f64,
    e: HermitianMatrix,
}

/// Entry point for the dense path.
///
/// The multiplicative `Λ_R` update can amplify rounding errors that break
/// the commutation of `Λ_R` with `ρ_R` when the spectrum of `ρ_R` is widely
/// spread. After stagnating near its floor the residual then grows
/// geometrically. A run whose residual exceeds [`DIVERGENCE_FACTOR`] times
/// its best value stops early, and any run that ends without converging
/// reports its lowest-residual iterate.
pub fn solve(instance: &ProblemInstance, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_with(instance, cfg, None)
}

pub fn solve_with(
    instance: &ProblemInstance,
    cfg: &SolverConfig,
    warm: Option<&WarmStart>,
) -> Result<SolverResult> {
    cfg.validate()?;
    let (n, m) = (instance.n(), instance.m());
    let start = Instant::now();
    let alpha = cfg.effective_alpha(instance.rho_r())?;

    let db = delta_b(instance)?;
    if hermitian::min_eigenvalue(&db)? <= instance.d() {
        return rate_zero_result(instance, &db, alpha);
    }

    let delta = instance.delta()?;
    let spectrum = DistortionSpectrum::new(delta)?;
    let kernel_mode = instance.d() == 0.0;
    if kernel_mode && spectrum.kernel.ncols() == 0 {
        return Err(Error::Infeasible { d: 0.0 });
    }

    let rho_inv_sqrt = inv_sqrt_psd(instance.rho_r().as_hermitian(), alpha)?;
    let source_entropy_term = trace_x_log_x(&eigh(instance.rho_r().as_hermitian())?.eigenvalues);

    let (mut sigma, mut e) = match warm {
        Some(w) if w.sigma_b.dim() == m && w.dual.exp_neg_lambda.dim() == n => {
            (w.sigma_b.clone(), w.dual.exp_neg_lambda.clone())
        }
        _ => (
            DensityMatrix::maximally_mixed(m),
            HermitianMatrix::identity(n),
        ),
    };
    let mut beta = if kernel_mode {
        f64::INFINITY
    } else {
        warm.map(|w| w.dual.beta)
            .filter(|b| b.is_finite())
            .unwrap_or(1.0)
    };

    let mut e_spec = eigh(&e)?;
    let mut lambda = e_spec.map(|l| -l.max(hermitian::LOG_FLOOR).ln());
    let mut log_sigma = hermitian::mat_log(sigma.as_hermitian())?;
    let mut target = gibbs(&log_sigma, &lambda, beta, delta, Some(&spectrum))?;

    let mut trace = Vec::new();
    let mut rho = None;
    let mut final_e_opt = f64::INFINITY;
    let mut status = SolverStatus::MaxIterReached;
    let mut iterations = 0;
    let mut best: Option<Snapshot> = None;

    for k in 1..=cfg.max_iter {
        iterations = k;
        let outcome = (|| -> Result<(GibbsOperator, f64)> {
            let k0 = target.matrix.partial_trace_second(n, m)?;
            let sqrt_e = e_spec.map(|l| l.max(0.0).sqrt());
            e = lambda_step(&sqrt_e, &rho_inv_sqrt, &k0, alpha);
            e_spec = eigh(&e)?;
            lambda = e_spec.map(|l| -l.max(hermitian::LOG_FLOOR).ln());

            let rho_k = gibbs(&log_sigma, &lambda, beta, delta, Some(&spectrum))?;

            let tr1 = rho_k.matrix.partial_trace_first(n, m)?;
            sigma = normalize_marginal(tr1.clone())?;
            log_sigma = hermitian::mat_log(sigma.as_hermitian())?;

            if !kernel_mode {
                let a = gibbs(&log_sigma, &lambda, beta, delta, Some(&spectrum))?;
                let g = GFunction::new(beta, &a.matrix, &spectrum, instance.d());
                beta = solve_beta(&g, cfg)?;
            }

            target = gibbs(&log_sigma, &lambda, beta, delta, Some(&spectrum))?;
            let terms = residual_terms(
                rho_k.matrix.as_matrix(),
                sigma.as_matrix(),
                target.matrix.as_matrix(),
                instance,
            )?;
            let rate = rho_k.x_log_x()
                - hermitian::trace_product(tr1.as_matrix(), log_sigma.as_matrix())
                - source_entropy_term;
            let e_opt = terms.total();
            if cfg.record_trace {
                trace.push(IterateRecord {
                    k,
                    e_opt,
                    rate,
                    beta,
                    wall_time: start.elapsed().as_secs_f64(),
                });
            }
            Ok((rho_k, e_opt))
        })();
        let (rho_k, e_opt) = outcome.map_err(|err| err.at(k))?;
        if e_opt <= cfg.tol {
            rho = Some(rho_k.matrix);
            final_e_opt = e_opt;
            status = SolverStatus::Converged;
            break;
        }
        match &best {
            Some(b) if e_opt > DIVERGENCE_FACTOR * b.e_opt => break,
            Some(b) if e_opt >= b.e_opt => {}
            _ => {
                best = Some(Snapshot {
                    e_opt,
                    rho: rho_k.matrix.clone(),
                    sigma: sigma.clone(),
                    beta,
                    e: e.clone(),
                });
            }
        }
        rho = Some(rho_k.matrix);
        final_e_opt = e_opt;
    }
    if status != SolverStatus::Converged {
        if let Some(b) = best.filter(|b| b.e_opt < final_e_opt) {
            rho = Some(b.rho);
            sigma = b.sigma;
            beta = b.beta;
            e = b.e;
            final_e_opt = b.e_opt;
        }
    }

    let rho = rho.expect("max_iter >= 1");
    let primal = PrimalState {
        rho_rb: rho,
        sigma_b: sigma,
    };
    let rate = objective_rate(&primal, instance)?;
    Ok(SolverResult {
        rate,
        rho_rb: JointState::Dense(primal.rho_rb),
        sigma_b: primal.sigma_b,
        dual: DualState::new_unchecked(beta, e),
        iterations,
        final_e_opt,
        trace,
        status,
        path: SolverPath::Dense,
        alpha,
    })
}

/// Product state `ρ_R ⊗ |v⟩⟨v|` with `v` a minimizing eigenvector of `Δ_B`;
/// it has zero rate and distortion `λ_min(Δ_B) ≤ D`.
fn rate_zero_result(
    instance: &ProblemInstance,
    db: &HermitianMatrix,
    alpha: f64,
) -> Result<SolverResult> {
    let s = eigh(db)?;
    let v = s.eigenvectors.column(0).into_owned();
    let sigma = DensityMatrix::new_unchecked(HermitianMatrix::symmetrized(&v * v.adjoint()));
    let rho_rb = instance.rho_r().as_hermitian().kron(sigma.as_hermitian());
    Ok(SolverResult {
        rate: 0.0,
        rho_rb: JointState::Dense(rho_rb),
        sigma_b: sigma,
        dual: DualState::new_unchecked(0.0, HermitianMatrix::identity(instance.n())),
        iterations: 0,
        final_e_opt: 0.0,
        trace: Vec::new(),
        status: SolverStatus::RateZeroShortcut,
        path: SolverPath::Dense,
        alpha,
    })
}

/// Analytic `G'(β)` by direct dense evaluation of
/// `-Tr(A e^{β_k Δ} e^{-βΔ} Δ²)`, independent of the eigenbasis shortcut.
/// The two exponentials commute and are merged into `e^{(β_k - β)Δ}`;
/// forming them separately overflows or cancels once `β_k ‖Δ‖` is large.
pub fn g_prime_dense(
    beta: f64,
    beta_k: f64,
    a_cache: &HermitianMatrix,
    delta: &HermitianMatrix,
) -> Result<f64> {
    let shifted = hermitian::mat_exp(&delta.scale(beta_k - beta))?;
    let d2 = delta.as_matrix() * delta.as_matrix();
    let prod = a_cache.as_matrix() * shifted.as_matrix() * d2;
    Ok(-prod.trace().re)
}

/// `S(ρ_RB ‖ ρ_R ⊗ σ_B)` for a dense primal state.
pub fn relative_entropy_form(p: &PrimalState, instance: &ProblemInstance) -> Result<f64> {
    let product = instance
        .rho_r()
        .as_hermitian()
        .kron(p.sigma_b.as_hermitian());
    problem::quantum_relative_entropy(&p.rho_rb, &product)
}

/// Per-iteration spectral data exposed for property tests: the `A` matrix
/// used by the β solve after a given number of dense iterations.
pub fn a_cache_after(
    instance: &ProblemInstance,
    iterations: usize,
) -> Result<(HermitianMatrix, f64)> {
    let cfg = SolverConfig {
        max_iter: iterations.max(1),
        tol: f64::MIN_POSITIVE,
        ..SolverConfig::default()
    };
    let r = solve(instance, &cfg)?;
    let log_sigma = hermitian::mat_log(r.sigma_b.as_hermitian())?;
    let lambda = r.dual.lambda_r()?;
    let delta = instance.delta()?;
    let a = gibbs(&log_sigma, &lambda, r.dual.beta, delta, None)?;
    Ok((a.matrix, r.dual.beta))
}
