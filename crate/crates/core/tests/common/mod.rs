#![allow(dead_code)]

use nalgebra::DVector;
use num_complex::Complex64;
use qrd_core::hermitian::{CMatrix, HermitianMatrix};
use qrd_core::problem::DensityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn random_complex(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let x = random_complex(n, n, rng);
    HermitianMatrix::new((&x + x.adjoint()) * c(0.5)).unwrap()
}

/// Haar-like unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    g.qr().q()
}

pub fn hermitian_with_spectrum(eigenvalues: &[f64], rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let n = eigenvalues.len();
    let u = random_unitary(n, rng);
    let d = CMatrix::from_diagonal(&DVector::from_iterator(
        n,
        eigenvalues.iter().map(|&l| c(l)),
    ));
    let m = &u * d * u.adjoint();
    HermitianMatrix::new((&m + m.adjoint()) * c(0.5)).unwrap()
}

pub fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let x = random_complex(n, n, rng);
    let g = &x * x.adjoint();
    let tr = g.trace().re;
    let g = (&g + g.adjoint()) * c(0.5 / tr);
    DensityMatrix::new(HermitianMatrix::new(g).unwrap()).unwrap()
}

pub fn random_probability(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// `Tr_1` by explicit index loops, `C[(i,k),(i,l)]` summed over `i`.
pub fn naive_tr1(cm: &CMatrix, n: usize, m: usize) -> CMatrix {
    let mut out = CMatrix::zeros(m, m);
    for k in 0..m {
        for l in 0..m {
            for i in 0..n {
                out[(k, l)] += cm[(i * m + k, i * m + l)];
            }
        }
    }
    out
}

/// `Tr_2` by explicit index loops, `C[(i,k),(j,k)]` summed over `k`.
pub fn naive_tr2(cm: &CMatrix, n: usize, m: usize) -> CMatrix {
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                out[(i, j)] += cm[(i * m + k, j * m + k)];
            }
        }
    }
    out
}

/// `A ⊗ B` by explicit index loops.
pub fn naive_kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (p, q) = (a.nrows(), b.nrows());
    CMatrix::from_fn(p * q, p * q, |r, s| a[(r / q, s / q)] * b[(r % q, s % q)])
}

pub fn one_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
