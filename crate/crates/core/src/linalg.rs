//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_error(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut e: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            e = e.max((m[(i, j)] - m[(j, i)].conj()).norm_sqr());
        }
    }
    e.sqrt()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Full Hermitian eigendecomposition, eigenvalues ascending, eigenvectors as columns.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    // symmetrize to kill round-off asymmetry before the solver sees it
    let h = (m + m.adjoint()) * c(0.5);
    let se = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// exp(-i H t) for Hermitian H.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    let (vals, vecs) = eigh(h);
    spectral_propagator(&vals, &vecs, t)
}

pub fn spectral_propagator(vals: &[f64], vecs: &CMat, t: f64) -> CMat {
    let mut scaled = vecs.clone();
    for (k, &e) in vals.iter().enumerate() {
        let ph = (-I * e * t).exp();
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= ph;
        }
    }
    &scaled * vecs.adjoint()
}

/// exp(A) for anti-Hermitian A (unitary result), via the Hermitian matrix iA.
pub fn expm_antihermitian(a: &CMat) -> CMat {
    let h = a * I;
    // exp(A) = exp(-i (iA)) with t = 1
    expm_hermitian(&h, 1.0)
}

/// Function of a Hermitian matrix applied through its spectrum.
pub fn herm_apply(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let mut scaled = vecs.clone();
    for (k, &e) in vals.iter().enumerate() {
        let s = f(e);
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

pub fn trace(m: &CMat) -> C64 {
    m.trace()
}

/// Von Neumann entropy (natural log) of a density matrix.
pub fn entropy(rho: &CMat) -> f64 {
    let (vals, _) = eigh(rho);
    vals.iter().filter(|&&p| p > 1e-15).map(|&p| -p * p.ln()).sum()
}

pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}
