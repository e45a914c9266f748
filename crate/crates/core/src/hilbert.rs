//! Truncated Hilbert spaces, elementary operators and state containers.
//!
//! Basis ordering: the first subsystem is the most significant tensor factor.
//! Qubit basis index 0 is |g>, index 1 is |e>.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, I};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-8;
pub const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    Qubit,
    Mode { nmax: usize },
}

impl Subsystem {
    pub fn dim(&self) -> usize {
        match self {
            Subsystem::Qubit => 2,
            Subsystem::Mode { nmax } => nmax + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemLayout {
    subsystems: Vec<Subsystem>,
    total_dim: usize,
}

impl SystemLayout {
    pub fn new(subsystems: Vec<Subsystem>) -> Result<Self> {
        if subsystems.is_empty() {
            return Err(Error::LayoutMismatch("empty layout".into()));
        }
        for s in &subsystems {
            if let Subsystem::Mode { nmax } = s {
                if *nmax < 1 {
                    return Err(Error::InvalidTruncation(*nmax));
                }
            }
        }
        let total_dim = subsystems.iter().map(Subsystem::dim).product();
        Ok(Self { subsystems, total_dim })
    }

    /// `n_qubits` qubits followed by one mode per entry of `nmax`.
    pub fn qubits_and_modes(n_qubits: usize, nmax: &[usize]) -> Result<Self> {
        let mut s = vec![Subsystem::Qubit; n_qubits];
        s.extend(nmax.iter().map(|&n| Subsystem::Mode { nmax: n }));
        Self::new(s)
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(Subsystem::dim).collect()
    }

    pub fn qubit_indices(&self) -> Vec<usize> {
        (0..self.subsystems.len())
            .filter(|&i| self.subsystems[i] == Subsystem::Qubit)
            .collect()
    }

    pub fn mode_indices(&self) -> Vec<usize> {
        (0..self.subsystems.len())
            .filter(|&i| matches!(self.subsystems[i], Subsystem::Mode { .. }))
            .collect()
    }

    fn check_qubit(&self, i: usize) -> Result<()> {
        match self.subsystems.get(i) {
            Some(Subsystem::Qubit) => Ok(()),
            _ => Err(Error::InvalidSubsystem { index: i, expected: "qubit" }),
        }
    }

    fn check_mode(&self, i: usize) -> Result<usize> {
        match self.subsystems.get(i) {
            Some(Subsystem::Mode { nmax }) => Ok(*nmax),
            _ => Err(Error::InvalidSubsystem { index: i, expected: "bosonic mode" }),
        }
    }

    /// Embed a local operator acting on subsystem `index`.
    pub fn embed(&self, index: usize, local: &CMat) -> CMat {
        let dims = self.dims();
        assert_eq!(local.nrows(), dims[index]);
        let left: usize = dims[..index].iter().product();
        let right: usize = dims[index + 1..].iter().product();
        let d = dims[index];
        let mut out = CMat::zeros(self.total_dim, self.total_dim);
        for l in 0..left {
            for i in 0..d {
                for j in 0..d {
                    let v = local[(i, j)];
                    if v == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for r in 0..right {
                        out[((l * d + i) * right + r, (l * d + j) * right + r)] = v;
                    }
                }
            }
        }
        out
    }

    /// Flat basis index of a product state given per-subsystem levels.
    pub fn basis_index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.subsystems.len() {
            return Err(Error::LayoutMismatch(format!(
                "expected {} levels, got {}",
                self.subsystems.len(),
                levels.len()
            )));
        }
        let mut idx = 0;
        for (s, &l) in self.subsystems.iter().zip(levels) {
            if l >= s.dim() {
                return Err(Error::InvalidState(format!("level {l} outside subsystem of dim {}", s.dim())));
            }
            idx = idx * s.dim() + l;
        }
        Ok(idx)
    }

    /// Per-subsystem levels of a flat basis index.
    pub fn levels(&self, mut idx: usize) -> Vec<usize> {
        let dims = self.dims();
        let mut out = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            out[k] = idx % dims[k];
            idx /= dims[k];
        }
        out
    }
}

/// Dense operator over a layout.
#[derive(Clone, Debug)]
pub struct COperator {
    pub layout: SystemLayout,
    pub matrix: CMat,
    pub hermitian: bool,
}

impl COperator {
    pub fn new(layout: &SystemLayout, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != layout.total_dim() || matrix.ncols() != layout.total_dim() {
            return Err(Error::LayoutMismatch(format!(
                "matrix is {}x{}, layout dim {}",
                matrix.nrows(),
                matrix.ncols(),
                layout.total_dim()
            )));
        }
        Ok(Self { layout: layout.clone(), matrix, hermitian: false })
    }

    /// Wrap a matrix that must be Hermitian; fails otherwise.
    pub fn hermitian(layout: &SystemLayout, matrix: CMat) -> Result<Self> {
        let mut op = Self::new(layout, matrix)?;
        let err = linalg::hermiticity_error(&op.matrix);
        if err > HERMITIAN_TOL {
            return Err(Error::NotHermitian(err));
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn dagger(&self) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.adjoint(), hermitian: self.hermitian }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let err = linalg::hermiticity_error(&self.matrix);
        if err > HERMITIAN_TOL {
            Err(Error::NotHermitian(err))
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

pub fn local_destroy(nmax: usize) -> CMat {
    let mut m = CMat::zeros(nmax + 1, nmax + 1);
    for n in 1..=nmax {
        m[(n - 1, n)] = c((n as f64).sqrt());
    }
    m
}

pub fn local_pauli(axis: Axis) -> CMat {
    let z = c(0.0);
    let o = c(1.0);
    // basis (g, e); sigma_+ = |e><g|
    match axis {
        Axis::Plus => CMat::from_row_slice(2, 2, &[z, z, o, z]),
        Axis::Minus => CMat::from_row_slice(2, 2, &[z, o, z, z]),
        Axis::X => CMat::from_row_slice(2, 2, &[z, o, o, z]),
        // sigma_y = i(sigma_- - sigma_+)
        Axis::Y => CMat::from_row_slice(2, 2, &[z, I, -I, z]),
        Axis::Z => CMat::from_row_slice(2, 2, &[-o, z, z, o]),
    }
}

pub fn make_destroy(layout: &SystemLayout, mode: usize) -> Result<COperator> {
    let nmax = layout.check_mode(mode)?;
    COperator::new(layout, layout.embed(mode, &local_destroy(nmax)))
}

pub fn make_create(layout: &SystemLayout, mode: usize) -> Result<COperator> {
    Ok(make_destroy(layout, mode)?.dagger())
}

pub fn make_number(layout: &SystemLayout, mode: usize) -> Result<COperator> {
    let nmax = layout.check_mode(mode)?;
    let n = CMat::from_diagonal(&CVec::from_iterator(nmax + 1, (0..=nmax).map(|k| c(k as f64))));
    COperator::hermitian(layout, layout.embed(mode, &n))
}

pub fn make_pauli(layout: &SystemLayout, qubit: usize, axis: Axis) -> Result<COperator> {
    layout.check_qubit(qubit)?;
    let m = layout.embed(qubit, &local_pauli(axis));
    let mut op = COperator::new(layout, m)?;
    op.hermitian = matches!(axis, Axis::X | Axis::Y | Axis::Z);
    Ok(op)
}

/// P = sigma_z exp(i pi a^dag a) for one qubit and one mode.
pub fn parity_operator(layout: &SystemLayout, qubit: usize, mode: usize) -> Result<COperator> {
    layout.check_qubit(qubit)?;
    layout.check_mode(mode)?;
    parity_over(layout, &[qubit], &[mode])
}

/// Product of sigma_z over all qubits and exp(i pi n) over all modes.
pub fn total_parity(layout: &SystemLayout) -> COperator {
    parity_over(layout, &layout.qubit_indices(), &layout.mode_indices()).expect("indices from layout")
}

fn parity_over(layout: &SystemLayout, qubits: &[usize], modes: &[usize]) -> Result<COperator> {
    let d = layout.total_dim();
    let mut diag = CVec::from_element(d, c(1.0));
    for k in 0..d {
        let lv = layout.levels(k);
        let mut s = 1.0;
        for &q in qubits {
            if lv[q] == 0 {
                s = -s;
            }
        }
        for &m in modes {
            if lv[m] % 2 == 1 {
                s = -s;
            }
        }
        diag[k] = c(s);
    }
    COperator::hermitian(layout, CMat::from_diagonal(&diag))
}

/// Ket or density matrix over a layout.
#[derive(Clone, Debug)]
pub enum QuantumState {
    Ket { layout: SystemLayout, psi: CVec },
    Density { layout: SystemLayout, rho: CMat },
}

impl QuantumState {
    pub fn ket(layout: &SystemLayout, psi: CVec) -> Result<Self> {
        if psi.len() != layout.total_dim() {
            return Err(Error::LayoutMismatch("ket length".into()));
        }
        let n = psi.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("ket norm {n}")));
        }
        Ok(QuantumState::Ket { layout: layout.clone(), psi })
    }

    pub fn density(layout: &SystemLayout, rho: CMat) -> Result<Self> {
        if rho.nrows() != layout.total_dim() {
            return Err(Error::LayoutMismatch("density dimension".into()));
        }
        let tr = rho.trace();
        if (tr - c(1.0)).norm() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let herr = linalg::hermiticity_error(&rho);
        if herr > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("density not Hermitian ({herr:e})")));
        }
        let (vals, _) = linalg::eigh(&rho);
        if vals[0] < -1e-9 {
            return Err(Error::InvalidState(format!("negative eigenvalue {}", vals[0])));
        }
        Ok(QuantumState::Density { layout: layout.clone(), rho })
    }

    /// Product basis ket from per-subsystem levels.
    pub fn basis(layout: &SystemLayout, levels: &[usize]) -> Result<Self> {
        let idx = layout.basis_index(levels)?;
        Ok(QuantumState::Ket { layout: layout.clone(), psi: basis_vector(layout.total_dim(), idx) })
    }

    pub fn layout(&self) -> &SystemLayout {
        match self {
            QuantumState::Ket { layout, .. } | QuantumState::Density { layout, .. } => layout,
        }
    }

    pub fn to_density(&self) -> CMat {
        match self {
            QuantumState::Ket { psi, .. } => linalg::outer(psi, psi),
            QuantumState::Density { rho, .. } => rho.clone(),
        }
    }
}

pub fn basis_vector(dim: usize, idx: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[idx] = c(1.0);
    v
}

pub fn expectation(state: &QuantumState, op: &COperator) -> Result<C64> {
    if state.layout() != &op.layout {
        return Err(Error::LayoutMismatch("state and operator layouts differ".into()));
    }
    let mut v = match state {
        QuantumState::Ket { psi, .. } => psi.dotc(&(&op.matrix * psi)),
        QuantumState::Density { rho, .. } => (rho * &op.matrix).trace(),
    };
    if op.hermitian {
        v.im = 0.0;
    }
    Ok(v)
}

/// Displacement operator D(beta) = exp(beta a^dag - beta* a) on one mode.
pub fn displacement(layout: &SystemLayout, mode: usize, beta: C64) -> Result<COperator> {
    let a = make_destroy(layout, mode)?.matrix;
    let gen = a.adjoint() * beta - &a * beta.conj();
    COperator::new(layout, linalg::expm_antihermitian(&gen))
}

/// Reduced density matrix on the subsystems in `keep` (ascending order).
pub fn partial_trace(layout: &SystemLayout, rho: &CMat, keep: &[usize]) -> CMat {
    let dims = layout.dims();
    let kd: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let dk: usize = kd.iter().product();
    let mut out = CMat::zeros(dk, dk);
    let d = layout.total_dim();
    let sub_index = |lv: &[usize]| keep.iter().fold(0usize, |acc, &k| acc * dims[k] + lv[k]);
    let env_key = |lv: &[usize]| {
        (0..dims.len())
            .filter(|k| !keep.contains(k))
            .fold(0usize, |acc, k| acc * dims[k] + lv[k])
    };
    let levels: Vec<Vec<usize>> = (0..d).map(|i| layout.levels(i)).collect();
    let keys: Vec<(usize, usize)> = levels.iter().map(|lv| (sub_index(lv), env_key(lv))).collect();
    for i in 0..d {
        for j in 0..d {
            if keys[i].1 == keys[j].1 {
                out[(keys[i].0, keys[j].0)] += rho[(i, j)];
            }
        }
    }
    out
}

/// Same as `partial_trace` for a pure state.
pub fn partial_trace_ket(layout: &SystemLayout, psi: &CVec, keep: &[usize]) -> CMat {
    partial_trace(layout, &linalg::outer(psi, psi), keep)
}

/// Doubles `nmax` and reports the largest relative change of the observables.
pub fn convergence_check(nmax: usize, f: impl Fn(usize) -> Result<Vec<f64>>) -> Result<f64> {
    let a = f(nmax)?;
    let b = f(2 * nmax)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-300))
        .fold(0.0, f64::max))
}
