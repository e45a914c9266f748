//! Eigendecomposition with parity labels, regime classification, ground-state
//! properties, transitions and ancilla Lamb shifts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{partial_trace_ket, total_parity, Axis, COperator, SystemLayout};
use crate::linalg::{self, c, CMat, CVec};
use crate::models::{build_static, ModelSpec, Ops, Sign};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ParityLabel {
    #[serde(rename = "+1")]
    Even,
    #[serde(rename = "-1")]
    Odd,
    #[serde(rename = "mixed")]
    Mixed,
}

impl ParityLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParityLabel::Even => "+1",
            ParityLabel::Odd => "-1",
            ParityLabel::Mixed => "mixed",
        }
    }
    fn rank(&self) -> u8 {
        match self {
            ParityLabel::Even => 0,
            ParityLabel::Odd => 1,
            ParityLabel::Mixed => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub layout: SystemLayout,
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: CMat,
    pub parity: Vec<ParityLabel>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn vector(&self, k: usize) -> CVec {
        self.vectors.column(k).into_owned()
    }
    pub fn ground(&self) -> CVec {
        self.vector(0)
    }
    /// Matrix elements <j|O|k> in the eigenbasis.
    pub fn to_eigenbasis(&self, op: &CMat) -> CMat {
        self.vectors.adjoint() * op * &self.vectors
    }
}

/// Diagonalise a Hermitian operator; parity labels use the product of all qubit
/// sigma_z and all mode parities when that operator commutes with H.
pub fn eigensystem(h: &COperator) -> Result<EigenSystem> {
    h.check_hermitian()?;
    let p = total_parity(&h.layout).matrix;
    let scale = linalg::max_abs(&h.matrix).max(1.0);
    let sym = if linalg::max_abs(&linalg::commutator(&h.matrix, &p)) <= 1e-10 * scale {
        Some(p)
    } else {
        None
    };
    eigensystem_with(h, sym.as_ref())
}

/// Same as `eigensystem` with an explicit (or no) symmetry operator.
pub fn eigensystem_with(h: &COperator, parity: Option<&CMat>) -> Result<EigenSystem> {
    h.check_hermitian()?;
    let (vals, mut vecs) = linalg::eigh(&h.matrix);
    let n = vals.len();
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let number = total_number(&h.layout);

    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut labels = vec![ParityLabel::Mixed; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && vals[end] - vals[end - 1] <= tol {
            end += 1;
        }
        let k = end - start;
        if k > 1 {
            if let Some(p) = parity {
                // resolve the degenerate block into parity eigenvectors
                let block = vecs.columns(start, k).into_owned();
                let pr = block.adjoint() * p * &block;
                let (_, rot) = linalg::eigh(&pr);
                let rotated = &block * rot;
                vecs.columns_mut(start, k).copy_from(&rotated);
            }
        }
        let mut idx: Vec<usize> = (start..end).collect();
        let mut keyed = Vec::with_capacity(k);
        for &i in &idx {
            let v = vecs.column(i);
            let lab = match parity {
                Some(p) => {
                    let pv = v.dotc(&(p * v)).re;
                    if pv >= 1.0 - 1e-6 {
                        ParityLabel::Even
                    } else if pv <= -1.0 + 1e-6 {
                        ParityLabel::Odd
                    } else {
                        ParityLabel::Mixed
                    }
                }
                None => ParityLabel::Mixed,
            };
            let nv = v.dotc(&(&number * v)).re;
            labels[i] = lab;
            keyed.push((i, lab.rank(), nv));
        }
        if k > 1 {
            keyed.sort_by(|a, b| a.1.cmp(&b.1).then(a.2.partial_cmp(&b.2).unwrap()));
            idx = keyed.iter().map(|x| x.0).collect();
        }
        order.extend(idx);
        start = end;
    }
    let mut out_vecs = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        out_vecs.set_column(k, &vecs.column(i));
    }
    Ok(EigenSystem {
        layout: h.layout.clone(),
        values: order.iter().map(|&i| vals[i]).collect(),
        vectors: out_vecs,
        parity: order.iter().map(|&i| labels[i]).collect(),
    })
}

fn total_number(layout: &SystemLayout) -> CMat {
    let o = Ops::new(layout);
    layout
        .mode_indices()
        .iter()
        .fold(CMat::zeros(layout.total_dim(), layout.total_dim()), |acc, &m| acc + o.n(m))
}

/// Build and diagonalise a static model.
pub fn spectrum_of(spec: &ModelSpec, nmax: usize) -> Result<EigenSystem> {
    let l = spec.default_layout(nmax)?;
    eigensystem(&build_static(spec, &l)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    #[serde(rename = "SC/JC")]
    StrongJc,
    #[serde(rename = "perturbative-USC")]
    PerturbativeUsc,
    #[serde(rename = "nonperturbative-USC/DSC")]
    NonperturbativeUsc,
    #[serde(rename = "perturbative-DSC")]
    PerturbativeDsc,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::StrongJc => "SC/JC",
            Regime::PerturbativeUsc => "perturbative-USC",
            Regime::NonperturbativeUsc => "nonperturbative-USC/DSC",
            Regime::PerturbativeDsc => "perturbative-DSC",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    pub ratio: f64,
    pub thresholds: [f64; 3],
}

pub const REGIME_THRESHOLDS: [f64; 3] = [0.1, 0.3, 1.0];

/// Classify g/omega; boundaries resolve upward.
pub fn classify_regime(g: f64, omega: f64) -> Result<RegimeLabel> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput("mode frequency must be positive".into()));
    }
    let ratio = (g / omega).abs();
    let [t1, t2, t3] = REGIME_THRESHOLDS;
    let regime = if ratio < t1 {
        Regime::StrongJc
    } else if ratio < t2 {
        Regime::PerturbativeUsc
    } else if ratio < t3 {
        Regime::NonperturbativeUsc
    } else {
        Regime::PerturbativeDsc
    };
    Ok(RegimeLabel { regime, ratio, thresholds: REGIME_THRESHOLDS })
}

/// Per-level check of how well the Bloch-Siegert form reproduces the Rabi
/// levels: true where |E_BS - E_QRM| <= tol * omega.
pub fn perturbative_level_diagnostic(omega_q: f64, omega: f64, g: f64, nmax: usize, levels: usize, tol: f64) -> Result<Vec<bool>> {
    let full = spectrum_of(&ModelSpec::Qrm { omega_q, omega, g, sign: Sign::Plus }, nmax)?;
    let bs = spectrum_of(&ModelSpec::BlochSiegert { omega_q, omega, g }, nmax)?;
    Ok((0..levels.min(full.len())).map(|k| (full.values[k] - bs.values[k]).abs() <= tol * omega).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroundStateProps {
    pub energy: f64,
    pub photon_number: f64,
    pub quad_sq: f64,
    pub anomalous: f64,
    pub qubit_entropy: f64,
}

/// Properties of the lowest eigenvector for the first mode and first qubit.
pub fn ground_state_props(es: &EigenSystem) -> Result<GroundStateProps> {
    let layout = &es.layout;
    let m = *layout.mode_indices().first().ok_or_else(|| Error::LayoutMismatch("no mode".into()))?;
    let q = *layout.qubit_indices().first().ok_or_else(|| Error::LayoutMismatch("no qubit".into()))?;
    let o = Ops::new(layout);
    let psi = es.ground();
    let ev = |op: &CMat| psi.dotc(&(op * &psi)).re;
    let a = o.a(m);
    let x = o.x(m);
    let rq = partial_trace_ket(layout, &psi, &[q]);
    Ok(GroundStateProps {
        energy: es.values[0],
        photon_number: ev(&o.n(m)),
        quad_sq: ev(&(&x * &x)),
        anomalous: ev(&(&a * &a + a.adjoint() * a.adjoint())),
        qubit_entropy: linalg::entropy(&rq),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub i: usize,
    pub j: usize,
    pub delta: f64,
    pub weight: f64,
}

/// All pairs i < j with |<i|O|j>|^2 above `floor`.
pub fn transition_table(es: &EigenSystem, op: &CMat, floor: f64) -> Vec<Transition> {
    let m = es.to_eigenbasis(op);
    let mut out = Vec::new();
    for i in 0..es.len() {
        for j in i + 1..es.len() {
            let w = m[(i, j)].norm_sqr();
            if w > floor {
                out.push(Transition { i, j, delta: es.values[j] - es.values[i], weight: w });
            }
        }
    }
    out
}

fn ancilla_parts(spec: &ModelSpec) -> Result<(&ModelSpec, f64, f64)> {
    match spec {
        ModelSpec::AncillaProbe { inner, omega_an, g_an, .. } => Ok((inner, *omega_an, *g_an)),
        _ => Err(Error::InvalidInput("Lamb shift needs an ancilla_probe spec".into())),
    }
}

/// Second-order ancilla frequency shift from exact ground-state expectations of
/// the probed system.
pub fn lamb_shift_perturbative(spec: &ModelSpec, nmax: usize) -> Result<f64> {
    let (inner, w_an, g_an) = ancilla_parts(spec)?;
    let (n, omega_q, omega, g, hop) = match *inner {
        ModelSpec::Dicke { n, omega_q, omega, g } => (n, omega_q, omega, g, None),
        ModelSpec::TavisCummings { n, omega_q, omega, g } => (n, omega_q, omega, g, Some(false)),
        ModelSpec::Hopfield { n, omega_q, omega, g, .. } => (n, omega_q, omega, g, Some(true)),
        _ => return Err(Error::InvalidInput("probed system must be dicke, tavis_cummings or hopfield".into())),
    };
    if (w_an - omega).abs() < 1e-12 || (w_an + omega).abs() < 1e-12 {
        return Err(Error::SingularDetuning);
    }
    let layout = inner.default_layout(nmax)?;
    let es = eigensystem(&build_static(inner, &layout)?)?;
    let o = Ops::new(&layout);
    let qs: Vec<usize> = (0..n).collect();
    let x = o.x(n);
    let gs = g / (n as f64).sqrt();
    let v = match hop {
        Some(false) => (o.ad(n) * o.sum_s(&qs, Axis::Minus) + o.a(n) * o.sum_s(&qs, Axis::Plus)) * c(gs),
        _ => {
            let jx = o.sum_s(&qs, Axis::X) * c(0.5);
            let mut v = &x * jx * c(gs);
            if hop == Some(true) {
                v += &x * &x * c(2.0 * g * g / omega_q);
            }
            v
        }
    };
    let psi = es.ground();
    let ev = |op: &CMat| psi.dotc(&(op * &psi)).re;
    let x2 = ev(&(&x * &x));
    let vv = ev(&v);
    let dm = w_an - omega;
    let dp = w_an + omega;
    Ok(g_an * g_an * (1.0 / dm + 1.0 / dp) * x2 + g_an * g_an * (1.0 / (dm * dm) - 1.0 / (dp * dp)) * vv)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactLambShift {
    pub shift: f64,
    /// Index of the level most strongly reached by sigma_x of the ancilla.
    pub level: usize,
    /// |<G_S, e_an | level>|^2; well below 1 signals an avoided crossing.
    pub bare_weight: f64,
}

/// Exact ancilla shift from diagonalising system plus ancilla.
pub fn lamb_shift_exact(spec: &ModelSpec, nmax: usize) -> Result<ExactLambShift> {
    let (inner, w_an, _) = ancilla_parts(spec)?;
    let inner_layout = inner.default_layout(nmax)?;
    let inner_es = eigensystem(&build_static(inner, &inner_layout)?)?;
    let layout = spec.default_layout(nmax)?;
    let es = eigensystem(&build_static(spec, &layout)?)?;
    let an = layout.subsystems().len() - 1;
    let sx = Ops::new(&layout).s(an, Axis::X);
    let g0 = es.ground();
    let reach = es.vectors.adjoint() * (&sx * &g0);
    let mut best = 1;
    for k in 1..es.len() {
        if reach[k].norm_sqr() > reach[best].norm_sqr() {
            best = k;
        }
    }
    let mut e_an = CVec::zeros(2);
    e_an[1] = c(1.0);
    let bare = inner_es.ground().kronecker(&e_an);
    let w = bare.dotc(&es.vector(best)).norm_sqr();
    Ok(ExactLambShift { shift: es.values[best] - es.values[0] - w_an, level: best, bare_weight: w })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DoubletSplitting {
    pub exact: f64,
    pub asymptotic: f64,
}

/// Lowest gap of the protected-qubit Dicke form plus Omega exp(-2 g^2 N / omega^2).
pub fn doublet_splitting(spec: &ModelSpec, nmax: usize) -> Result<DoubletSplitting> {
    let ModelSpec::ProtectedDicke { n, omega_q, omega, g } = *spec else {
        return Err(Error::InvalidInput("doublet splitting needs a protected_dicke spec".into()));
    };
    let es = spectrum_of(spec, nmax)?;
    Ok(DoubletSplitting {
        exact: es.values[1] - es.values[0],
        asymptotic: omega_q * (-2.0 * g * g * n as f64 / (omega * omega)).exp(),
    })
}

/// Least-squares slope of y against x.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qrm(omega_q: f64, omega: f64, g: f64) -> ModelSpec {
        ModelSpec::Qrm { omega_q, omega, g, sign: Sign::Plus }
    }

    #[test]
    fn resonant_decoupled_labels() {
        let es = spectrum_of(&qrm(1.0, 1.0, 0.0), 5).unwrap();
        assert!((es.values[0] + 0.5).abs() < 1e-12);
        assert!((es.values[1] - 0.5).abs() < 1e-12 && (es.values[2] - 0.5).abs() < 1e-12);
        // |e,0> has parity +1, |g,1> has +1 too; ground |g,0> is -1
        assert_eq!(es.parity[0], ParityLabel::Odd);
        assert_eq!(es.parity[1], ParityLabel::Even);
    }

    #[test]
    fn vacuum_rabi_splitting() {
        let es = spectrum_of(&qrm(1.0, 1.0, 0.1), 20).unwrap();
        let split = es.values[2] - es.values[1];
        assert!((split / 0.2 - 1.0).abs() < 0.05, "{split}");
    }

    #[test]
    fn displaced_ladder() {
        let es = spectrum_of(&qrm(0.0, 1.0, 2.0), 80).unwrap();
        for k in 0..6 {
            let want = (k / 2) as f64 - 4.0;
            assert!((es.values[k] - want).abs() < 1e-6, "{k} {}", es.values[k]);
        }
        // degenerate doublets are split into clean parity states, +1 first
        assert_eq!(es.parity[0], ParityLabel::Even);
        assert_eq!(es.parity[1], ParityLabel::Odd);
    }

    #[test]
    fn eigen_invariants() {
        let s = qrm(0.8, 1.0, 0.7);
        let l = s.default_layout(25).unwrap();
        let h = build_static(&s, &l).unwrap();
        let es = eigensystem(&h).unwrap();
        let hn = linalg::max_abs(&h.matrix);
        for k in 0..es.len() {
            let v = es.vector(k);
            let r = (&h.matrix * &v - &v * c(es.values[k])).norm();
            assert!(r <= 1e-8 * hn.max(1.0));
            assert_ne!(es.parity[k], ParityLabel::Mixed);
        }
        let gram = es.vectors.adjoint() * &es.vectors;
        assert!(linalg::max_abs(&(gram - linalg::identity(es.len()))) < 1e-8);
    }

    #[test]
    fn non_hermitian_rejected() {
        let l = SystemLayout::qubits_and_modes(1, &[1]).unwrap();
        let mut m = CMat::zeros(4, 4);
        m[(0, 1)] = c(1.0);
        let op = COperator::new(&l, m).unwrap();
        assert!(matches!(eigensystem(&op), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(0.05, 1.0).unwrap().regime, Regime::StrongJc);
        assert_eq!(classify_regime(0.1, 1.0).unwrap().regime, Regime::PerturbativeUsc);
        assert_eq!(classify_regime(0.12, 1.0).unwrap().regime, Regime::PerturbativeUsc);
        assert_eq!(classify_regime(0.3, 1.0).unwrap().regime, Regime::NonperturbativeUsc);
        assert_eq!(classify_regime(1.34, 1.0).unwrap().regime, Regime::PerturbativeDsc);
        assert!(classify_regime(1.0, 0.0).is_err());
    }

    #[test]
    fn ground_props() {
        let p = ground_state_props(&spectrum_of(&qrm(1.0, 1.0, 0.0), 5).unwrap()).unwrap();
        assert!(p.photon_number.abs() < 1e-12 && p.qubit_entropy.abs() < 1e-9);
        let p = ground_state_props(&spectrum_of(&qrm(0.0, 1.0, 2.0), 80).unwrap()).unwrap();
        assert!((p.photon_number - 4.0).abs() < 1e-6);
        let p = ground_state_props(&spectrum_of(&qrm(1.0, 1.0, 1.0), 40).unwrap()).unwrap();
        assert!(p.photon_number > 0.0 && p.qubit_entropy > 0.1);
        assert!(p.qubit_entropy <= 2f64.ln() + 1e-12);
    }

    #[test]
    fn parity_selection_in_transitions() {
        let s = qrm(1.0, 1.0, 0.3);
        let l = s.default_layout(20).unwrap();
        let es = eigensystem(&build_static(&s, &l).unwrap()).unwrap();
        let x = Ops::new(&l).x(1);
        for t in transition_table(&es, &x, 1e-8) {
            assert_ne!(es.parity[t.i], es.parity[t.j]);
        }
    }

    #[test]
    fn decoupled_transitions_are_single_photon() {
        let s = ModelSpec::Jc { omega_q: 1.0, omega: 1.0, g: 0.0 };
        let l = s.default_layout(6).unwrap();
        let es = eigensystem(&build_static(&s, &l).unwrap()).unwrap();
        let o = Ops::new(&l);
        let nq = o.n(1);
        for t in transition_table(&es, &o.x(1), 1e-8) {
            let ni = es.vector(t.i).dotc(&(&nq * es.vector(t.i))).re;
            let nj = es.vector(t.j).dotc(&(&nq * es.vector(t.j))).re;
            assert!(((ni - nj).abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lamb_shift_vacuum_limit_and_sign() {
        let inner = ModelSpec::Dicke { n: 2, omega_q: 1.0, omega: 1.0, g: 0.0 };
        let mk = |w: f64| ModelSpec::AncillaProbe { inner: Box::new(inner.clone()), omega_an: w, g_an: 0.02, drive_amp: 0.0, drive_freq: 0.0 };
        let s = lamb_shift_perturbative(&mk(3.0), 10).unwrap();
        let want = 0.02f64.powi(2) * 2.0 * 3.0 / (9.0 - 1.0);
        assert!((s - want).abs() < 1e-14);
        assert!(lamb_shift_perturbative(&mk(0.5), 10).unwrap() < 0.0);
        assert!(matches!(lamb_shift_perturbative(&mk(1.0), 10), Err(Error::SingularDetuning)));
    }

    #[test]
    fn doublet_decays_with_coupling() {
        let mk = |g: f64| ModelSpec::ProtectedDicke { n: 1, omega_q: 0.5, omega: 1.0, g };
        let a = doublet_splitting(&mk(1.0), 40).unwrap().exact;
        let b = doublet_splitting(&mk(1.5), 40).unwrap().exact;
        assert!(b < a);
        let z = doublet_splitting(&mk(0.0), 10).unwrap();
        assert!((z.exact - 0.5).abs() < 1e-12);
    }
}
