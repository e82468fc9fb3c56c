//! Problem instances: source state, distortion observable, threshold, and the
//! scalar quantities (zero-rate test, objective, optimality residual) defined
//! on them.

use std::sync::OnceLock;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hermitian::{
    self, eigh, entrywise_one_norm, min_eigenvalue, partial_trace_first, partial_trace_second,
    CMatrix, HermitianMatrix, LOG_NEGATIVE_TOL,
};
use crate::solver::{gibbs_target, DualState};

pub const DENSITY_TOL: f64 = 1e-10;
const SUPPORT_TOL: f64 = 1e-8;

/// PSD Hermitian matrix with unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    inner: HermitianMatrix,
}

impl DensityMatrix {
    pub fn new(inner: HermitianMatrix) -> Result<Self> {
        let tr = inner.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::NotDensity(format!("trace {tr} differs from 1")));
        }
        let lo = min_eigenvalue(&inner)?;
        if lo < -DENSITY_TOL {
            return Err(Error::NotDensity(format!(
                "min eigenvalue {lo:e} is negative"
            )));
        }
        Ok(Self { inner })
    }

    pub(crate) fn new_unchecked(inner: HermitianMatrix) -> Self {
        Self { inner }
    }

    /// Maximally mixed state `I/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            inner: HermitianMatrix::identity(n).scale(1.0 / n as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.inner
    }

    pub fn as_matrix(&self) -> &CMatrix {
        self.inner.as_matrix()
    }

    /// von Neumann entropy in nats.
    pub fn entropy(&self) -> Result<f64> {
        Ok(-trace_x_log_x(&eigh(&self.inner)?.eigenvalues))
    }
}

/// `Σ λ ln λ` over the strictly positive entries.
pub fn trace_x_log_x(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l * l.ln())
        .sum()
}

pub fn uniform_input(n: usize) -> DensityMatrix {
    DensityMatrix::maximally_mixed(n)
}

/// `XX^H / Tr(XX^H)` with `X` filled row-major, real part then imaginary part
/// of each entry drawn from a standard normal seeded by `seed`.
pub fn hilbert_schmidt_random(n: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        entries.push(Complex64::new(re, im));
    }
    let x = CMatrix::from_row_slice(n, n, &entries);
    let gram = HermitianMatrix::symmetrized(&x * x.adjoint());
    let tr = gram.trace();
    DensityMatrix::new_unchecked(gram.scale(1.0 / tr))
}

/// Canonical purification `(√ρ ⊗ I) Σ_i |i⟩⊗|i⟩`; entry `(i, k)` is `√ρ[i][k]`.
pub fn canonical_purification(rho_r: &DensityMatrix) -> Result<DVector<Complex64>> {
    let root = hermitian::sqrt_psd(rho_r.as_hermitian())?;
    let n = rho_r.dim();
    Ok(DVector::from_fn(n * n, |idx, _| root.get(idx / n, idx % n)))
}

/// `Δ = I - |φ⟩⟨φ|` for the canonical purification `φ` of `rho_r`.
pub fn entanglement_fidelity_distortion(rho_r: &DensityMatrix) -> Result<HermitianMatrix> {
    let phi = canonical_purification(rho_r)?;
    let dim = phi.len();
    let mut delta = CMatrix::identity(dim, dim);
    delta -= &phi * phi.adjoint();
    Ok(HermitianMatrix::symmetrized(delta))
}

/// Distortion observable of an instance.
#[derive(Clone, Debug)]
pub enum Distortion {
    /// Entanglement-fidelity distortion of the source, kept implicit so the
    /// symmetric path never has to form the `n² × n²` matrix.
    EntanglementFidelity,
    Matrix(HermitianMatrix),
}

#[derive(Debug)]
pub struct ProblemInstance {
    rho_r: DensityMatrix,
    distortion: Distortion,
    d: f64,
    n: usize,
    m: usize,
    dense_delta: OnceLock<HermitianMatrix>,
    purification: OnceLock<DVector<Complex64>>,
}

impl Clone for ProblemInstance {
    fn clone(&self) -> Self {
        Self {
            rho_r: self.rho_r.clone(),
            distortion: self.distortion.clone(),
            d: self.d,
            n: self.n,
            m: self.m,
            dense_delta: self.dense_delta.clone(),
            purification: self.purification.clone(),
        }
    }
}

impl ProblemInstance {
    /// Instance with entanglement-fidelity distortion (`m = n`).
    pub fn entanglement_fidelity(rho_r: DensityMatrix, d: f64) -> Result<Self> {
        check_threshold(d)?;
        let n = rho_r.dim();
        Ok(Self {
            rho_r,
            distortion: Distortion::EntanglementFidelity,
            d,
            n,
            m: n,
            dense_delta: OnceLock::new(),
            purification: OnceLock::new(),
        })
    }

    /// Instance with an explicit `(n·m) × (n·m)` PSD distortion matrix.
    pub fn with_distortion(
        rho_r: DensityMatrix,
        delta: HermitianMatrix,
        m: usize,
        d: f64,
    ) -> Result<Self> {
        check_threshold(d)?;
        let n = rho_r.dim();
        if m == 0 || delta.dim() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                found: delta.dim(),
            });
        }
        let lo = min_eigenvalue(&delta)?;
        if lo < -LOG_NEGATIVE_TOL {
            return Err(Error::DistortionNotPsd { min_eigenvalue: lo });
        }
        Ok(Self {
            rho_r,
            distortion: Distortion::Matrix(delta),
            d,
            n,
            m,
            dense_delta: OnceLock::new(),
            purification: OnceLock::new(),
        })
    }

    /// Same source and distortion with a different threshold; caches are kept.
    pub fn with_threshold(&self, d: f64) -> Result<Self> {
        check_threshold(d)?;
        let mut out = self.clone();
        out.d = d;
        Ok(out)
    }

    pub fn rho_r(&self) -> &DensityMatrix {
        &self.rho_r
    }

    pub fn distortion(&self) -> &Distortion {
        &self.distortion
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn joint_dim(&self) -> usize {
        self.n * self.m
    }

    pub fn is_entanglement_fidelity(&self) -> bool {
        matches!(self.distortion, Distortion::EntanglementFidelity)
    }

    pub(crate) fn purification(&self) -> Result<&DVector<Complex64>> {
        if let Some(phi) = self.purification.get() {
            return Ok(phi);
        }
        let phi = canonical_purification(&self.rho_r)?;
        Ok(self.purification.get_or_init(|| phi))
    }

    /// Dense distortion matrix (built and cached on first use for the
    /// implicit entanglement-fidelity form).
    pub fn delta(&self) -> Result<&HermitianMatrix> {
        match &self.distortion {
            Distortion::Matrix(m) => Ok(m),
            Distortion::EntanglementFidelity => {
                if let Some(d) = self.dense_delta.get() {
                    return Ok(d);
                }
                let dense = entanglement_fidelity_distortion(&self.rho_r)?;
                Ok(self.dense_delta.get_or_init(|| dense))
            }
        }
    }

    /// `Re Tr(Δ ρ)`.
    pub fn distortion_of(&self, rho_rb: &CMatrix) -> Result<f64> {
        match &self.distortion {
            Distortion::Matrix(delta) => Ok(hermitian::trace_product(delta.as_matrix(), rho_rb)),
            Distortion::EntanglementFidelity => {
                let phi = self.purification()?;
                let fidelity = phi.dotc(&(rho_rb * phi)).re;
                Ok(rho_rb.trace().re - fidelity)
            }
        }
    }
}

fn check_threshold(d: f64) -> Result<()> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::InvalidInput(format!(
            "distortion threshold must be finite and >= 0, got {d}"
        )));
    }
    Ok(())
}

/// `Δ_B = Tr_1(Δ (ρ_R ⊗ I_m))`.
pub fn delta_b(instance: &ProblemInstance) -> Result<HermitianMatrix> {
    let (n, m) = (instance.n, instance.m);
    match &instance.distortion {
        Distortion::Matrix(delta) => {
            let lifted = hermitian::kron(instance.rho_r.as_matrix(), &CMatrix::identity(m, m));
            let prod = delta.as_matrix() * lifted;
            let tr1 = partial_trace_first(&prod, n, m)?;
            Ok(HermitianMatrix::symmetrized(tr1))
        }
        // Tr_1(|φ⟩⟨φ|(ρ ⊗ I)) = conj(ρ²)
        Distortion::EntanglementFidelity => {
            let rho = instance.rho_r.as_matrix();
            let sq = rho * rho;
            let mut out = CMatrix::identity(n, n);
            out -= sq.map(|z| z.conj());
            Ok(HermitianMatrix::symmetrized(out))
        }
    }
}

/// `λ_min(Δ_B)`.
pub fn min_distortion_eigenvalue(instance: &ProblemInstance) -> Result<f64> {
    min_eigenvalue(&delta_b(instance)?)
}

/// `R(D) = 0` exactly when `λ_min(Δ_B) ≤ D`.
pub fn is_rate_zero(instance: &ProblemInstance) -> Result<bool> {
    Ok(min_distortion_eigenvalue(instance)? <= instance.d)
}

/// `S(ρ‖σ) = Tr ρ log ρ - Tr ρ log σ` in nats.
///
/// Returns `+∞` when ρ carries weight `≥ 1e-8` outside the support of σ.
pub fn quantum_relative_entropy(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let rho_spec = eigh(rho)?;
    let sigma_spec = eigh(sigma)?;
    let scale = sigma_spec.max().abs().max(f64::MIN_POSITIVE);
    let kernel_cut = 1e-14 * scale;
    let u = &sigma_spec.eigenvectors;
    let mut outside = 0.0;
    let mut cross = 0.0;
    for (k, &l) in sigma_spec.eigenvalues.iter().enumerate() {
        let v = u.column(k);
        let weight = v.dotc(&(rho.as_matrix() * v)).re;
        if l <= kernel_cut {
            outside += weight;
        } else {
            cross += weight * l.ln();
        }
    }
    if outside >= SUPPORT_TOL {
        return Ok(f64::INFINITY);
    }
    Ok(trace_x_log_x(&rho_spec.eigenvalues) - cross)
}

/// Primal iterate: joint operator and output state.
#[derive(Clone, Debug)]
pub struct PrimalState {
    pub rho_rb: HermitianMatrix,
    pub sigma_b: DensityMatrix,
}

/// `Tr(ρ_RB log ρ_RB) - Tr(Tr_1(ρ_RB) log σ_B) - Tr(ρ_R log ρ_R)`.
pub fn objective_rate(p: &PrimalState, instance: &ProblemInstance) -> Result<f64> {
    let (n, m) = (instance.n, instance.m);
    let joint = trace_x_log_x(&eigh(&p.rho_rb)?.eigenvalues);
    let tr1 = partial_trace_first(p.rho_rb.as_matrix(), n, m)?;
    let log_sigma = hermitian::mat_log(p.sigma_b.as_hermitian())?;
    let cross = hermitian::trace_product(&tr1, log_sigma.as_matrix());
    let source = trace_x_log_x(&eigh(instance.rho_r.as_hermitian())?.eigenvalues);
    Ok(joint - cross - source)
}

/// The four terms of the optimality residual.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResidualTerms {
    pub distortion: f64,
    pub marginal_r: f64,
    pub marginal_b: f64,
    pub stationarity: f64,
}

impl ResidualTerms {
    pub fn total(&self) -> f64 {
        self.distortion + self.marginal_r + self.marginal_b + self.stationarity
    }
}

/// Residual of the optimality conditions against a precomputed Gibbs-form
/// target `exp(Δ' - I)`.
pub(crate) fn residual_terms(
    rho_rb: &CMatrix,
    sigma_b: &CMatrix,
    target: &CMatrix,
    instance: &ProblemInstance,
) -> Result<ResidualTerms> {
    let (n, m) = (instance.n, instance.m);
    let nf = n as f64;
    let mf = m as f64;
    let distortion = (instance.distortion_of(rho_rb)? - instance.d).abs();
    let tr2 = partial_trace_second(rho_rb, n, m)?;
    let marginal_r = entrywise_one_norm(&(tr2 - instance.rho_r.as_matrix())) / (nf * nf);
    let tr1 = partial_trace_first(rho_rb, n, m)?;
    let marginal_b = entrywise_one_norm(&(tr1 - sigma_b)) / (mf * mf);
    let stationarity = entrywise_one_norm(&(rho_rb - target)) / (nf * nf * mf * mf);
    Ok(ResidualTerms {
        distortion,
        marginal_r,
        marginal_b,
        stationarity,
    })
}

/// `e_opt` with `Δ' = -βΔ + Λ_R ⊗ I_m + I_n ⊗ log σ_B`. An infinite β means
/// the `D = 0` limit, where the target is the exponential compressed onto the
/// kernel of Δ.
pub fn residual_e_opt(
    p: &PrimalState,
    dual: &DualState,
    instance: &ProblemInstance,
) -> Result<f64> {
    Ok(residual_breakdown(p, dual, instance)?.total())
}

/// The individual terms summed by [`residual_e_opt`].
pub fn residual_breakdown(
    p: &PrimalState,
    dual: &DualState,
    instance: &ProblemInstance,
) -> Result<ResidualTerms> {
    let log_sigma = hermitian::mat_log(p.sigma_b.as_hermitian())?;
    let target = gibbs_target(&log_sigma, &dual.lambda_r()?, dual.beta, instance)?;
    residual_terms(
        p.rho_rb.as_matrix(),
        p.sigma_b.as_matrix(),
        target.as_matrix(),
        instance,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn uniform_and_random_inputs() {
        let u = uniform_input(2);
        assert_eq!(u.as_hermitian().diagonal(), vec![0.5, 0.5]);
        let a = hilbert_schmidt_random(3, 42);
        let b = hilbert_schmidt_random(3, 42);
        assert_eq!(a, b);
        assert_ne!(a, hilbert_schmidt_random(3, 43));
        let big = hilbert_schmidt_random(50, 9);
        assert!((big.as_hermitian().trace() - 1.0).abs() < 1e-12);
        assert!(eigh(big.as_hermitian()).unwrap().min() >= 0.0);
        DensityMatrix::new(big.as_hermitian().clone()).unwrap();
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(HermitianMatrix::identity(2)).is_err());
        assert!(DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[1.5, -0.5])).is_err());
        assert!(DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[0.25, 0.75])).is_ok());
    }

    #[test]
    fn entanglement_fidelity_pure_source_is_zero() {
        let d = entanglement_fidelity_distortion(&uniform_input(1)).unwrap();
        assert_eq!(d.dim(), 1);
        assert!(d.get(0, 0).norm() < 1e-15);
    }

    #[test]
    fn entanglement_fidelity_is_idempotent() {
        for seed in 0..3 {
            let rho = hilbert_schmidt_random(3, seed);
            let d = entanglement_fidelity_distortion(&rho).unwrap();
            let sq = d.as_matrix() * d.as_matrix();
            assert!(max_abs_diff(&sq, d.as_matrix()) < 1e-12);
        }
    }

    #[test]
    fn delta_b_closed_form_matches_dense() {
        for n in [2, 3, 4] {
            let inst = ProblemInstance::entanglement_fidelity(uniform_input(n), 0.1).unwrap();
            let db = delta_b(&inst).unwrap();
            let expected = 1.0 - 1.0 / (n * n) as f64;
            assert!(
                max_abs_diff(
                    db.as_matrix(),
                    &(CMatrix::identity(n, n) * Complex64::new(expected, 0.0))
                ) < 1e-14
            );
        }
        let rho = hilbert_schmidt_random(3, 5);
        let implicit = ProblemInstance::entanglement_fidelity(rho.clone(), 0.1).unwrap();
        let dense = entanglement_fidelity_distortion(&rho).unwrap();
        let explicit = ProblemInstance::with_distortion(rho, dense, 3, 0.1).unwrap();
        assert!(
            max_abs_diff(
                delta_b(&implicit).unwrap().as_matrix(),
                delta_b(&explicit).unwrap().as_matrix()
            ) < 1e-12
        );
    }

    #[test]
    fn delta_b_identity_and_product() {
        let rho = hilbert_schmidt_random(3, 8);
        let inst =
            ProblemInstance::with_distortion(rho.clone(), HermitianMatrix::identity(6), 2, 0.1)
                .unwrap();
        assert!(
            max_abs_diff(
                delta_b(&inst).unwrap().as_matrix(),
                &CMatrix::identity(2, 2)
            ) < 1e-14
        );

        let a = HermitianMatrix::from_real_diagonal(&[0.2, 1.0, 0.5]);
        let mut bm = CMatrix::identity(2, 2);
        bm[(0, 1)] = Complex64::new(0.1, 0.3);
        bm[(1, 0)] = Complex64::new(0.1, -0.3);
        let b = HermitianMatrix::new(bm).unwrap();
        let inst = ProblemInstance::with_distortion(rho.clone(), a.kron(&b), 2, 0.1).unwrap();
        let expected = b.scale(a.trace_product(rho.as_hermitian()));
        assert!(max_abs_diff(delta_b(&inst).unwrap().as_matrix(), expected.as_matrix()) < 1e-12);
    }

    #[test]
    fn zero_rate_threshold() {
        let inst = ProblemInstance::entanglement_fidelity(uniform_input(2), 0.8).unwrap();
        assert!(is_rate_zero(&inst).unwrap());
        assert!(!is_rate_zero(&inst.with_threshold(0.5).unwrap()).unwrap());
        let inst = ProblemInstance::with_distortion(
            uniform_input(2),
            HermitianMatrix::identity(4),
            2,
            0.0,
        )
        .unwrap();
        assert!(!is_rate_zero(&inst).unwrap());
    }

    #[test]
    fn relative_entropy_examples() {
        let rho = hilbert_schmidt_random(3, 1);
        assert!(
            quantum_relative_entropy(rho.as_hermitian(), rho.as_hermitian())
                .unwrap()
                .abs()
                < 1e-12
        );
        let s = quantum_relative_entropy(
            &HermitianMatrix::from_real_diagonal(&[1.0, 0.0]),
            &HermitianMatrix::from_real_diagonal(&[0.5, 0.5]),
        )
        .unwrap();
        assert!((s - 2.0_f64.ln()).abs() < 1e-14);
        let inf = quantum_relative_entropy(
            &HermitianMatrix::from_real_diagonal(&[0.5, 0.5]),
            &HermitianMatrix::from_real_diagonal(&[1.0, 0.0]),
        )
        .unwrap();
        assert!(inf.is_infinite());
    }

    #[test]
    fn relative_entropy_matches_kl_on_diagonals() {
        let p: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
        let q: [f64; 4] = [0.25, 0.25, 0.4, 0.1];
        let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
        let s = quantum_relative_entropy(
            &HermitianMatrix::from_real_diagonal(&p),
            &HermitianMatrix::from_real_diagonal(&q),
        )
        .unwrap();
        assert!((s - kl).abs() < 1e-12);
    }

    #[test]
    fn objective_vanishes_on_product_states() {
        let rho = hilbert_schmidt_random(2, 3);
        let sigma = hilbert_schmidt_random(3, 4);
        let inst =
            ProblemInstance::with_distortion(rho.clone(), HermitianMatrix::identity(6), 3, 0.5)
                .unwrap();
        let p = PrimalState {
            rho_rb: rho.as_hermitian().kron(sigma.as_hermitian()),
            sigma_b: sigma,
        };
        assert!(objective_rate(&p, &inst).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(ProblemInstance::entanglement_fidelity(uniform_input(2), -0.1).is_err());
        assert!(ProblemInstance::with_distortion(
            uniform_input(2),
            HermitianMatrix::identity(3),
            2,
            0.1
        )
        .is_err());
        assert!(matches!(
            ProblemInstance::with_distortion(
                uniform_input(1),
                HermitianMatrix::from_real_diagonal(&[-1.0]),
                1,
                0.1
            ),
            Err(Error::DistortionNotPsd { .. })
        ));
    }
}
