//! Independent ground truth for tests: the closed-form uniform curve, a
//! brute-force minimizer for the Gibbs stationarity problem, classical
//! Blahut–Arimoto, and a finite-difference check on `G'`.
//!
//! None of these call into the solver modules, apart from
//! [`finite_difference_g_prime`] which compares against the solver's
//! analytic derivative by design.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{self, eigh, CMatrix, HermitianMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PointSource {
    Analytic,
    Solver,
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateDistortionPoint {
    pub d: f64,
    pub rate: f64,
    pub source: PointSource,
}

fn shannon_entropy(probs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    // (probability, multiplicity)
    probs
        .into_iter()
        .filter(|&(p, _)| p > 0.0)
        .map(|(p, k)| -k * p * p.ln())
        .sum()
}

/// `R(D)` for the maximally mixed source under entanglement-fidelity
/// distortion, in nats.
pub fn analytic_uniform_rd(n: usize, d: f64) -> f64 {
    let n2 = (n * n) as f64;
    if d >= 1.0 - 1.0 / n2 {
        return 0.0;
    }
    let h = shannon_entropy([(1.0 - d, 1.0), (d / (n2 - 1.0), n2 - 1.0)]);
    (n2.ln() - h).max(0.0)
}

/// Multiplier of the uniform curve, `-dR/dD`.
pub fn analytic_uniform_beta(n: usize, d: f64) -> f64 {
    let n2 = (n * n) as f64;
    if d >= 1.0 - 1.0 / n2 {
        return 0.0;
    }
    ((n2 - 1.0) * (1.0 - d) / d).ln()
}

pub fn analytic_point(n: usize, d: f64) -> RateDistortionPoint {
    RateDistortionPoint {
        d,
        rate: analytic_uniform_rd(n, d),
        source: PointSource::Analytic,
    }
}

pub const LEMMA1_STARTS: usize = 20;
pub const LEMMA1_STEP: f64 = 1e-2;
pub const LEMMA1_MAX_ITER: usize = 100_000;
const LEMMA1_SEED: u64 = 0x1e33a;
const LEMMA1_STALL: f64 = 1e-15;

fn lemma1_objective(eigenvalues: &[f64], rho: &CMatrix, delta: &CMatrix) -> f64 {
    let entropy_term: f64 = eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l * l.ln())
        .sum();
    entropy_term - hermitian::trace_product(rho, delta)
}

/// Minimizer of `Tr(ρ log ρ) - Tr(ρ Δ̃)` over positive semi-definite `ρ`, by
/// projected gradient descent from random starts. Intended for `dim ≤ 3`.
///
/// Each step starts at [`LEMMA1_STEP`] and is halved until the objective does
/// not increase, since the curvature of `ρ log ρ` is unbounded near the
/// boundary. A start stops once no step size improves the objective or an
/// update moves no entry by more than `1e-15`.
pub fn lemma1_bruteforce(delta_tilde: &HermitianMatrix) -> HermitianMatrix {
    let dim = delta_tilde.dim();
    let delta = delta_tilde.as_matrix();
    let identity = CMatrix::identity(dim, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(LEMMA1_SEED);
    let mut best: Option<(f64, CMatrix)> = None;

    for _ in 0..LEMMA1_STARTS {
        let x = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let mut rho = HermitianMatrix::symmetrized(&x * x.adjoint());
        let Ok(mut spec) = eigh(&rho) else { continue };
        let mut f = lemma1_objective(&spec.eigenvalues, rho.as_matrix(), delta);
        'descent: for _ in 0..LEMMA1_MAX_ITER {
            let log_rho = spec.map(|l| l.max(hermitian::LOG_FLOOR).ln());
            let grad = log_rho.as_matrix() + &identity - delta;
            let mut step = LEMMA1_STEP;
            loop {
                if step < 1e-30 {
                    break 'descent;
                }
                let stepped = HermitianMatrix::symmetrized(
                    rho.as_matrix() - &grad * Complex64::new(step, 0.0),
                );
                let Ok(mut next_spec) = eigh(&stepped) else {
                    break 'descent;
                };
                next_spec
                    .eigenvalues
                    .iter_mut()
                    .for_each(|l| *l = l.max(0.0));
                let next = next_spec.reweight(&next_spec.eigenvalues);
                let f_next = lemma1_objective(&next_spec.eigenvalues, next.as_matrix(), delta);
                if f_next <= f {
                    let moved = (next.as_matrix() - rho.as_matrix())
                        .iter()
                        .map(|z| z.norm())
                        .fold(0.0, f64::max);
                    rho = next;
                    spec = next_spec;
                    f = f_next;
                    if moved <= LEMMA1_STALL {
                        break 'descent;
                    }
                    break;
                }
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, rho.into_matrix()));
        }
    }
    let (_, rho) = best.expect("at least one start succeeds");
    HermitianMatrix::symmetrized(rho)
}

pub const BA_TOL: f64 = 1e-10;
const BA_MAX_ITER: usize = 200_000;
const BA_INNER_TOL: f64 = 1e-15;
const SLOPE_BISECTIONS: usize = 400;

/// Blahut–Arimoto at fixed slope `s`: returns `(rate, distortion)`.
/// `s = ∞` restricts each row to its minimal-distortion outputs.
pub fn blahut_arimoto_slope(p: &[f64], d: &[Vec<f64>], s: f64) -> (f64, f64) {
    let n = p.len();
    let m = d[0].len();
    let row_min: Vec<f64> = d
        .iter()
        .map(|r| r.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect();
    // Shifting each row by its minimum leaves the conditional unchanged.
    let kernel: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let gap = d[i][j] - row_min[i];
                    if s.is_infinite() {
                        if gap <= 1e-15 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        (-s * gap).exp()
                    }
                })
                .collect()
        })
        .collect();

    let mut q = vec![1.0 / m as f64; m];
    let mut cond = vec![vec![0.0; m]; n];
    for _ in 0..BA_MAX_ITER {
        for i in 0..n {
            let z: f64 = (0..m).map(|j| q[j] * kernel[i][j]).sum();
            for j in 0..m {
                cond[i][j] = if z > 0.0 {
                    q[j] * kernel[i][j] / z
                } else {
                    0.0
                };
            }
        }
        let next: Vec<f64> = (0..m)
            .map(|j| (0..n).map(|i| p[i] * cond[i][j]).sum())
            .collect();
        let change = next
            .iter()
            .zip(&q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if change <= BA_INNER_TOL {
            break;
        }
    }
    let mut rate = 0.0;
    let mut distortion = 0.0;
    for i in 0..n {
        for j in 0..m {
            let w = p[i] * cond[i][j];
            if w > 0.0 {
                rate += w * (cond[i][j] / q[j]).ln();
                distortion += w * d[i][j];
            }
        }
    }
    (rate.max(0.0), distortion)
}

/// Classical `R(D)` in nats: Blahut–Arimoto with bisection on the slope
/// until the achieved distortion is within [`BA_TOL`] of `D`. The leftover
/// offset is removed to first order using `dR/dD = -s`.
pub fn classical_ba_fixed_distortion(p: &[f64], d: &[Vec<f64>], target: f64) -> Result<f64> {
    if p.is_empty() || d.len() != p.len() || d.iter().any(|r| r.len() != d[0].len() || r.is_empty())
    {
        return Err(Error::InvalidInput(
            "distortion matrix shape does not match source".into(),
        ));
    }
    let m = d[0].len();
    let d_max = (0..m)
        .map(|j| p.iter().zip(d).map(|(pi, r)| pi * r[j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    if target >= d_max {
        return Ok(0.0);
    }
    let d_min: f64 = p
        .iter()
        .zip(d)
        .map(|(pi, r)| pi * r.iter().cloned().fold(f64::INFINITY, f64::min))
        .sum();
    if target < d_min - BA_TOL {
        return Err(Error::Infeasible { d: target });
    }
    let (r_inf, d_inf) = blahut_arimoto_slope(p, d, f64::INFINITY);
    if (d_inf - target).abs() <= BA_TOL {
        return Ok(r_inf);
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while blahut_arimoto_slope(p, d, hi).1 > target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::NoRoot { doublings });
        }
    }
    for _ in 0..SLOPE_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let (rate, dist) = blahut_arimoto_slope(p, d, mid);
        if (dist - target).abs() <= BA_TOL {
            return Ok((rate - mid * (target - dist)).max(0.0));
        }
        if dist > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            return Ok((rate - mid * (target - dist)).max(0.0));
        }
    }
    Err(Error::NoRoot { doublings })
}

/// Data needed to evaluate `G` away from the solver: the cached `A`, the
/// distortion and the previous multiplier.
#[derive(Clone, Debug)]
pub struct GContext {
    pub beta_k: f64,
    pub a_cache: HermitianMatrix,
    pub delta: HermitianMatrix,
    pub d: f64,
}

impl GContext {
    /// `Tr(A e^{(β_k - β)Δ} Δ) - D`, with `Δ e^{(β_k - β)Δ}` formed as one
    /// matrix function of `Δ` so that `ker Δ` contributes exactly zero.
    pub fn value(&self, beta: f64) -> Result<f64> {
        let c = self.beta_k - beta;
        let weighted = hermitian::eigh(&self.delta)?.map(|l| l * (c * l).exp());
        Ok(hermitian::trace_product(self.a_cache.as_matrix(), weighted.as_matrix()) - self.d)
    }
}

/// `(analytic, numeric)` derivative of `G` at `beta`. The numeric value is
/// a Richardson-extrapolated central difference with base step
/// `1e-2 / max(1, ‖Δ‖)`, accurate to `O(h⁴)`.
pub fn finite_difference_g_prime(beta: f64, ctx: &GContext) -> Result<(f64, f64)> {
    let analytic = crate::solver::g_prime_dense(beta, ctx.beta_k, &ctx.a_cache, &ctx.delta)?;
    let spread = hermitian::eigh(&ctx.delta)?;
    let h = 1e-2 / spread.max().abs().max(spread.min().abs()).max(1.0);
    let central =
        |h: f64| -> Result<f64> { Ok((ctx.value(beta + h)? - ctx.value(beta - h)?) / (2.0 * h)) };
    let numeric = (4.0 * central(0.5 * h)? - central(h)?) / 3.0;
    Ok((analytic, numeric))
}
