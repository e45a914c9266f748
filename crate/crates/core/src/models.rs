//! Hamiltonian families, driven forms and parameter mappings.
//!
//! All frequencies are dimensionless (hbar = 1), conventionally in units of the
//! primary mode frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{local_destroy, local_pauli, Axis, COperator, Subsystem, SystemLayout};
use crate::linalg::{c, CMat, C64, I};

/// Sign of the dipole coupling term: `Plus` is +g sigma_x (a + a^dag).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Qrm { omega_q: f64, omega: f64, g: f64, #[serde(default)] sign: Sign },
    Jc { omega_q: f64, omega: f64, g: f64 },
    AcStark { omega_q: f64, omega: f64, g: f64 },
    BlochSiegert { omega_q: f64, omega: f64, g: f64 },
    AnisotropicRabi { omega_q: f64, omega: f64, g: f64, g_cr: f64 },
    Dicke { n: usize, omega_q: f64, omega: f64, g: f64 },
    TavisCummings { n: usize, omega_q: f64, omega: f64, g: f64 },
    Hopfield { n: usize, omega_q: f64, omega: f64, g: f64, #[serde(default = "one")] d: f64 },
    TwoAtomRabi { omega_q: f64, omega: f64, g: f64, theta: f64 },
    JahnTeller { omega_q: f64, omega_c: f64, lambda: f64, theta: f64, phi: f64 },
    HerzbergTeller { omega_q: f64, omega_1: f64, omega_2: f64, g_1: f64, g_2: f64, j: f64 },
    OptomechPair { omega_r: f64, omega_m: f64, g_m: f64, g_r: f64 },
    LongitudinalTwoQubit {
        omega_1: f64,
        omega_2: f64,
        omega: f64,
        g_1: f64,
        g_2: f64,
        #[serde(default = "yes")]
        on_1: bool,
        #[serde(default = "yes")]
        on_2: bool,
    },
    ProtectedDicke { n: usize, omega_q: f64, omega: f64, g: f64 },
    AncillaProbe {
        inner: Box<ModelSpec>,
        omega_an: f64,
        g_an: f64,
        #[serde(default)]
        drive_amp: f64,
        #[serde(default)]
        drive_freq: f64,
    },
    DrivenJc {
        omega_q: f64,
        omega: f64,
        g: f64,
        amp_1: f64,
        freq_1: f64,
        amp_2: f64,
        freq_2: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default)]
        xi: f64,
    },
    DiracEffective { lambda: f64, g: f64, xi: f64 },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Qrm { .. } => "qrm",
            ModelSpec::Jc { .. } => "jc",
            ModelSpec::AcStark { .. } => "ac_stark",
            ModelSpec::BlochSiegert { .. } => "bloch_siegert",
            ModelSpec::AnisotropicRabi { .. } => "anisotropic_rabi",
            ModelSpec::Dicke { .. } => "dicke",
            ModelSpec::TavisCummings { .. } => "tavis_cummings",
            ModelSpec::Hopfield { .. } => "hopfield",
            ModelSpec::TwoAtomRabi { .. } => "two_atom_rabi",
            ModelSpec::JahnTeller { .. } => "jahn_teller",
            ModelSpec::HerzbergTeller { .. } => "herzberg_teller",
            ModelSpec::OptomechPair { .. } => "optomech_pair",
            ModelSpec::LongitudinalTwoQubit { .. } => "longitudinal_two_qubit",
            ModelSpec::ProtectedDicke { .. } => "protected_dicke",
            ModelSpec::AncillaProbe { .. } => "ancilla_probe",
            ModelSpec::DrivenJc { .. } => "driven_jc",
            ModelSpec::DiracEffective { .. } => "dirac_effective",
        }
    }

    /// Check finiteness and basic ranges.
    pub fn validate(&self) -> Result<()> {
        let vals: Vec<f64> = match self {
            ModelSpec::Qrm { omega_q, omega, g, .. }
            | ModelSpec::Jc { omega_q, omega, g }
            | ModelSpec::AcStark { omega_q, omega, g }
            | ModelSpec::BlochSiegert { omega_q, omega, g } => vec![*omega_q, *omega, *g],
            ModelSpec::AnisotropicRabi { omega_q, omega, g, g_cr } => vec![*omega_q, *omega, *g, *g_cr],
            ModelSpec::Dicke { n, omega_q, omega, g }
            | ModelSpec::TavisCummings { n, omega_q, omega, g }
            | ModelSpec::ProtectedDicke { n, omega_q, omega, g } => {
                if *n < 1 {
                    return Err(Error::InvalidInput("N must be >= 1".into()));
                }
                vec![*omega_q, *omega, *g]
            }
            ModelSpec::Hopfield { n, omega_q, omega, g, d } => {
                if *n < 1 {
                    return Err(Error::InvalidInput("N must be >= 1".into()));
                }
                vec![*omega_q, *omega, *g, *d]
            }
            ModelSpec::TwoAtomRabi { omega_q, omega, g, theta } => {
                check_angle(*theta)?;
                vec![*omega_q, *omega, *g]
            }
            ModelSpec::JahnTeller { omega_q, omega_c, lambda, theta, phi } => {
                check_angle(*theta)?;
                check_angle(*phi)?;
                vec![*omega_q, *omega_c, *lambda]
            }
            ModelSpec::HerzbergTeller { omega_q, omega_1, omega_2, g_1, g_2, j } => {
                vec![*omega_q, *omega_1, *omega_2, *g_1, *g_2, *j]
            }
            ModelSpec::OptomechPair { omega_r, omega_m, g_m, g_r } => vec![*omega_r, *omega_m, *g_m, *g_r],
            ModelSpec::LongitudinalTwoQubit { omega_1, omega_2, omega, g_1, g_2, .. } => {
                vec![*omega_1, *omega_2, *omega, *g_1, *g_2]
            }
            ModelSpec::AncillaProbe { inner, omega_an, g_an, drive_amp, drive_freq } => {
                inner.validate()?;
                if matches!(**inner, ModelSpec::AncillaProbe { .. } | ModelSpec::DrivenJc { .. }) {
                    return Err(Error::InvalidInput("ancilla inner system must be static".into()));
                }
                vec![*omega_an, *g_an, *drive_amp, *drive_freq]
            }
            ModelSpec::DrivenJc { omega_q, omega, g, amp_1, freq_1, amp_2, freq_2, phi, xi } => {
                check_angle(*phi)?;
                vec![*omega_q, *omega, *g, *amp_1, *freq_1, *amp_2, *freq_2, *xi]
            }
            ModelSpec::DiracEffective { lambda, g, xi } => vec![*lambda, *g, *xi],
        };
        if vals.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("{}: non-finite parameter", self.name())))
        }
    }

    /// Subsystem pattern required by the variant; `nmax` is applied to every mode.
    pub fn default_layout(&self, nmax: usize) -> Result<SystemLayout> {
        let kinds = self.subsystem_kinds();
        SystemLayout::new(
            kinds
                .into_iter()
                .map(|q| if q { Subsystem::Qubit } else { Subsystem::Mode { nmax } })
                .collect(),
        )
    }

    /// true = qubit, false = mode, in tensor order.
    fn subsystem_kinds(&self) -> Vec<bool> {
        match self {
            ModelSpec::Qrm { .. }
            | ModelSpec::Jc { .. }
            | ModelSpec::AcStark { .. }
            | ModelSpec::BlochSiegert { .. }
            | ModelSpec::AnisotropicRabi { .. }
            | ModelSpec::DrivenJc { .. }
            | ModelSpec::DiracEffective { .. } => vec![true, false],
            ModelSpec::Dicke { n, .. }
            | ModelSpec::TavisCummings { n, .. }
            | ModelSpec::Hopfield { n, .. }
            | ModelSpec::ProtectedDicke { n, .. } => {
                let mut v = vec![true; *n];
                v.push(false);
                v
            }
            ModelSpec::TwoAtomRabi { .. } | ModelSpec::LongitudinalTwoQubit { .. } => vec![true, true, false],
            ModelSpec::JahnTeller { .. } | ModelSpec::HerzbergTeller { .. } => vec![true, false, false],
            ModelSpec::OptomechPair { .. } => vec![false, false, false, false],
            ModelSpec::AncillaProbe { inner, .. } => {
                let mut v = inner.subsystem_kinds();
                v.push(true);
                v
            }
        }
    }

    fn check_layout(&self, layout: &SystemLayout) -> Result<()> {
        let want = self.subsystem_kinds();
        let have: Vec<bool> = layout.subsystems().iter().map(|s| *s == Subsystem::Qubit).collect();
        if want != have {
            return Err(Error::LayoutMismatch(format!(
                "{} needs subsystem pattern {:?} (true = qubit)",
                self.name(),
                want
            )));
        }
        Ok(())
    }

    /// Largest frequency scale appearing in the spec (used for step rules).
    pub fn max_frequency(&self) -> f64 {
        let v: Vec<f64> = match self {
            ModelSpec::DrivenJc { omega_q, omega, g, amp_1, freq_1, amp_2, freq_2, xi, .. } => {
                vec![*omega_q, *omega, *g, *amp_1, *freq_1, *amp_2, *freq_2, *xi]
            }
            ModelSpec::AncillaProbe { inner, omega_an, g_an, drive_amp, drive_freq } => {
                vec![inner.max_frequency(), *omega_an, *g_an, *drive_amp, *drive_freq]
            }
            ModelSpec::Qrm { omega_q, omega, g, .. } => vec![*omega_q, *omega, *g],
            _ => vec![1.0],
        };
        v.into_iter().map(f64::abs).fold(0.0, f64::max)
    }
}

fn check_angle(a: f64) -> Result<()> {
    if (0.0..2.0 * std::f64::consts::PI).contains(&a) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("angle {a} outside [0, 2pi)")))
    }
}

/// Operator toolbox over one layout.
pub(crate) struct Ops<'a> {
    pub layout: &'a SystemLayout,
}

impl<'a> Ops<'a> {
    pub fn new(layout: &'a SystemLayout) -> Self {
        Self { layout }
    }
    pub fn id(&self) -> CMat {
        CMat::identity(self.layout.total_dim(), self.layout.total_dim())
    }
    fn nmax(&self, i: usize) -> usize {
        match self.layout.subsystems()[i] {
            Subsystem::Mode { nmax } => nmax,
            Subsystem::Qubit => panic!("subsystem {i} is a qubit"),
        }
    }
    pub fn a(&self, i: usize) -> CMat {
        self.layout.embed(i, &local_destroy(self.nmax(i)))
    }
    pub fn ad(&self, i: usize) -> CMat {
        self.a(i).adjoint()
    }
    pub fn n(&self, i: usize) -> CMat {
        let a = self.a(i);
        a.adjoint() * a
    }
    pub fn x(&self, i: usize) -> CMat {
        let a = self.a(i);
        a.adjoint() + a
    }
    pub fn s(&self, i: usize, axis: Axis) -> CMat {
        self.layout.embed(i, &local_pauli(axis))
    }
    pub fn sum_s(&self, qubits: &[usize], axis: Axis) -> CMat {
        qubits.iter().fold(CMat::zeros(self.layout.total_dim(), self.layout.total_dim()), |acc, &q| {
            acc + self.s(q, axis)
        })
    }
}

fn r(x: f64) -> C64 {
    c(x)
}

/// Static Hamiltonian of a family. Time-dependent drives are excluded
/// (use `build_driven`); for `AncillaProbe` the ancilla drive term is omitted.
pub fn build_static(spec: &ModelSpec, layout: &SystemLayout) -> Result<COperator> {
    spec.validate()?;
    spec.check_layout(layout)?;
    let h = static_matrix(spec, layout)?;
    COperator::hermitian(layout, h)
}

fn static_matrix(spec: &ModelSpec, layout: &SystemLayout) -> Result<CMat> {
    let o = Ops::new(layout);
    let q0 = 0;
    let m = layout.mode_indices();
    let h = match *spec {
        ModelSpec::Qrm { omega_q, omega, g, sign } => {
            o.s(q0, Axis::Z) * r(omega_q / 2.0) + o.n(1) * r(omega) + o.s(q0, Axis::X) * o.x(1) * r(sign.value() * g)
        }
        ModelSpec::Jc { omega_q, omega, g } => {
            o.s(q0, Axis::Z) * r(omega_q / 2.0)
                + o.n(1) * r(omega)
                + (o.s(q0, Axis::Plus) * o.a(1) + o.s(q0, Axis::Minus) * o.ad(1)) * r(g)
        }
        ModelSpec::AcStark { omega_q, omega, g } => {
            let delta = omega_q - omega;
            if delta == 0.0 {
                return Err(Error::InvalidInput("AC-Stark form needs nonzero detuning".into()));
            }
            let chi = g * g / delta;
            let sz = o.s(q0, Axis::Z);
            &sz * r((omega_q + chi) / 2.0) + (o.id() * r(omega) + &sz * r(chi)) * o.n(1)
        }
        ModelSpec::BlochSiegert { omega_q, omega, g } => {
            let sum = omega + omega_q;
            let wbs = g * g / sum;
            let sz = o.s(q0, Axis::Z);
            let n = o.n(1);
            // g(n) = -g [1 - n wbs/(omega + Omega)]
            let gn = (o.id() - &n * r(wbs / sum)) * r(-g);
            &sz * r((omega_q + wbs) / 2.0) + (o.id() * r(omega) + &sz * r(wbs)) * &n - o.id() * r(wbs / 2.0)
                + &gn * o.s(q0, Axis::Minus) * o.ad(1)
                + o.s(q0, Axis::Plus) * o.a(1) * &gn
        }
        ModelSpec::AnisotropicRabi { omega_q, omega, g, g_cr } => {
            let sp = o.s(q0, Axis::Plus);
            let sm = o.s(q0, Axis::Minus);
            o.s(q0, Axis::Z) * r(omega_q / 2.0)
                + o.n(1) * r(omega)
                + (&sp * o.a(1) + &sm * o.ad(1)) * r(g)
                + (&sp * o.ad(1) + &sm * o.a(1)) * r(g_cr)
        }
        ModelSpec::Dicke { n, omega_q, omega, g } => dicke_like(&o, n, omega_q, omega, g, false),
        ModelSpec::TavisCummings { n, omega_q, omega, g } => dicke_like(&o, n, omega_q, omega, g, true),
        ModelSpec::Hopfield { n, omega_q, omega, g, d } => {
            if omega_q == 0.0 {
                return Err(Error::InvalidInput("Hopfield term needs nonzero qubit frequency".into()));
            }
            let x = o.x(n);
            dicke_like(&o, n, omega_q, omega, g, false) + &x * &x * r(d * g * g / omega_q)
        }
        ModelSpec::TwoAtomRabi { omega_q, omega, g, theta } => {
            let qs = [0, 1];
            let coup = o.sum_s(&qs, Axis::X) * r(theta.cos()) + o.sum_s(&qs, Axis::Z) * r(theta.sin());
            o.sum_s(&qs, Axis::Z) * r(omega_q / 2.0) + o.n(2) * r(omega) + o.x(2) * coup * r(g)
        }
        ModelSpec::JahnTeller { omega_q, omega_c, lambda, theta, phi } => {
            let sp = o.s(q0, Axis::Plus);
            let sm = o.s(q0, Axis::Minus);
            let ca = &sp * (-I * theta).exp() + &sm * (I * theta).exp();
            let cb = &sp * (-I * phi).exp() + &sm * (I * phi).exp();
            (o.n(1) + o.n(2)) * r(omega_c)
                + o.s(q0, Axis::Z) * r(omega_q / 2.0)
                + (o.x(1) * ca + o.x(2) * cb) * r(lambda)
        }
        ModelSpec::HerzbergTeller { omega_q, omega_1, omega_2, g_1, g_2, j } => {
            o.s(q0, Axis::Z) * r(omega_q / 2.0)
                + o.n(1) * r(omega_1)
                + o.n(2) * r(omega_2)
                + (o.x(1) * r(g_1) + o.x(2) * r(g_2)) * o.s(q0, Axis::X)
                + (o.ad(1) * o.a(2) + o.ad(2) * o.a(1)) * r(j)
        }
        ModelSpec::OptomechPair { omega_r, omega_m, g_m, g_r } => {
            let mut h = CMat::zeros(layout.total_dim(), layout.total_dim());
            for (cav, mech) in [(0, 1), (2, 3)] {
                h += o.n(cav) * r(omega_r) + o.n(mech) * r(omega_m) + o.n(cav) * o.x(mech) * r(g_m);
            }
            h + (o.ad(0) * o.a(2) + o.a(0) * o.ad(2)) * r(g_r)
        }
        ModelSpec::LongitudinalTwoQubit { omega_1, omega_2, omega, g_1, g_2, on_1, on_2 } => {
            let x = o.x(2);
            let mut h = o.s(0, Axis::Z) * r(omega_1 / 2.0) + o.s(1, Axis::Z) * r(omega_2 / 2.0) + o.n(2) * r(omega);
            if on_1 {
                h -= o.s(0, Axis::Z) * &x * r(g_1);
            }
            if on_2 {
                h -= o.s(1, Axis::Z) * &x * r(g_2);
            }
            h
        }
        ModelSpec::ProtectedDicke { n, omega_q, omega, g } => {
            let qs: Vec<usize> = (0..n).collect();
            let a = o.a(n);
            let quad = (&a - a.adjoint()) * I;
            o.n(n) * r(omega) + o.sum_s(&qs, Axis::Z) * r(omega_q / 2.0)
                + quad * o.sum_s(&qs, Axis::X) * r(g / (n as f64).sqrt())
        }
        ModelSpec::AncillaProbe { ref inner, omega_an, g_an, .. } => {
            let an = layout.subsystems().len() - 1;
            let inner_layout = SystemLayout::new(layout.subsystems()[..an].to_vec())?;
            let hs = static_matrix(inner, &inner_layout)?;
            let mode = m[0];
            hs.kronecker(&CMat::identity(2, 2))
                + o.s(an, Axis::Z) * r(omega_an / 2.0)
                + o.x(mode) * o.s(an, Axis::X) * r(g_an)
        }
        ModelSpec::DrivenJc { .. } => {
            return Err(Error::InvalidInput("driven_jc is time-dependent; use build_driven".into()))
        }
        ModelSpec::DiracEffective { lambda, g, xi } => {
            let a = o.a(1);
            let x = (a.adjoint() + &a) * r(std::f64::consts::FRAC_1_SQRT_2);
            let p = (&a - a.adjoint()) * (-I * std::f64::consts::FRAC_1_SQRT_2);
            o.s(q0, Axis::Z) * r(lambda / 2.0)
                + o.s(q0, Axis::Y) * p * r(g / std::f64::consts::SQRT_2)
                + x * r(xi * std::f64::consts::SQRT_2)
        }
    };
    Ok(h)
}

fn dicke_like(o: &Ops, n: usize, omega_q: f64, omega: f64, g: f64, rwa: bool) -> CMat {
    let qs: Vec<usize> = (0..n).collect();
    let jz = o.sum_s(&qs, Axis::Z) * r(0.5);
    let jp = o.sum_s(&qs, Axis::Plus);
    let jm = o.sum_s(&qs, Axis::Minus);
    let gs = g / (n as f64).sqrt();
    let coup = if rwa {
        o.a(n) * &jp + o.ad(n) * &jm
    } else {
        o.x(n) * (&jp + &jm)
    };
    o.n(n) * r(omega) + jz * r(omega_q) + coup * r(gs)
}

/// Lab-frame Hamiltonian at time `t` for driven families (`DrivenJc`, `AncillaProbe`).
pub fn build_driven(spec: &ModelSpec, layout: &SystemLayout, t: f64) -> Result<COperator> {
    spec.validate()?;
    spec.check_layout(layout)?;
    let o = Ops::new(layout);
    let h = match *spec {
        ModelSpec::DrivenJc { omega_q, omega, g, amp_1, freq_1, amp_2, freq_2, phi, xi } => {
            let sm = o.s(0, Axis::Minus);
            let a = o.a(1);
            let jc = o.s(0, Axis::Z) * r(omega_q / 2.0) + o.n(1) * r(omega)
                - (o.s(0, Axis::Plus) * &a + &sm * a.adjoint()) * r(g);
            let d1 = &sm * (I * (freq_1 * t + phi)).exp();
            let d2 = &sm * (I * (freq_2 * t + phi)).exp();
            let dc = &a * (I * omega * t).exp();
            jc - (d1.adjoint() + d1) * r(amp_1) - (d2.adjoint() + d2) * r(amp_2) + (dc.adjoint() + dc) * r(xi)
        }
        ModelSpec::AncillaProbe { drive_amp, drive_freq, .. } => {
            let an = layout.subsystems().len() - 1;
            static_matrix(spec, layout)? + o.s(an, Axis::X) * r(drive_amp * (drive_freq * t).cos())
        }
        _ => static_matrix(spec, layout)?,
    };
    COperator::hermitian(layout, h)
}

/// Effective Rabi model emulated by the bichromatically driven JC system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffectiveQrm {
    pub spec: ModelSpec,
    pub g_over_omega: f64,
    /// Set when the effective mode frequency vanishes (omega_1 = omega).
    pub degenerate_mode: bool,
}

pub fn effective_qrm_of_driven(spec: &ModelSpec) -> Result<EffectiveQrm> {
    let ModelSpec::DrivenJc { omega, g, amp_1, freq_1, amp_2, freq_2, .. } = *spec else {
        return Err(Error::InvalidInput("effective QRM mapping needs a driven_jc spec".into()));
    };
    let diff = freq_1 - freq_2;
    let expected = 2.0 * amp_1;
    if (diff - expected).abs() > 1e-9 * freq_1.abs().max(expected.abs()).max(1.0) {
        return Err(Error::ResonanceMismatch { diff, expected });
    }
    let w = omega - freq_1;
    let eff = ModelSpec::Qrm { omega_q: amp_2, omega: w, g: g / 2.0, sign: Sign::Minus };
    Ok(EffectiveQrm {
        spec: eff,
        g_over_omega: if w != 0.0 { g / 2.0 / w } else { f64::INFINITY },
        degenerate_mode: w == 0.0,
    })
}

/// Trapped-atom realisation of the Rabi model (SI inputs).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColdAtomMap {
    /// Dimensionless spec in units of the trap frequency.
    pub spec: ModelSpec,
    pub qubit_freq: f64,
    pub coupling: f64,
    pub g_over_omega: f64,
    pub g_over_omega_q: f64,
}

pub fn cold_atom_map(mass: f64, depth: f64, k0: f64, omega_trap: f64) -> Result<ColdAtomMap> {
    if !(mass > 0.0 && depth > 0.0 && k0 > 0.0 && omega_trap > 0.0) {
        return Err(Error::InvalidInput("cold-atom parameters must be positive".into()));
    }
    let hbar = crate::circuit::HBAR;
    let omega_q = depth / (2.0 * hbar);
    let g = 2.0 * k0 * (hbar * omega_trap / (2.0 * mass)).sqrt();
    Ok(ColdAtomMap {
        spec: ModelSpec::Qrm { omega_q: omega_q / omega_trap, omega: 1.0, g: g / omega_trap, sign: Sign::Plus },
        qubit_freq: omega_q,
        coupling: g,
        g_over_omega: g / omega_trap,
        g_over_omega_q: g / omega_q,
    })
}

/// One Jaynes-Cummings step `mode_detuning a^dag a + qubit_detuning sigma_z + g (a^dag sigma_- + a sigma_+)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JcStep {
    pub mode_detuning: f64,
    pub qubit_detuning: f64,
    pub g: f64,
}

impl JcStep {
    pub fn matrix(&self, layout: &SystemLayout) -> CMat {
        let o = Ops::new(layout);
        o.n(1) * r(self.mode_detuning)
            + o.s(0, Axis::Z) * r(self.qubit_detuning)
            + (o.ad(1) * o.s(0, Axis::Minus) + o.a(1) * o.s(0, Axis::Plus)) * r(self.g)
    }
}

/// Rotating (step 1) plus pulse-conjugated counter-rotating (step 2) decomposition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DigitalSplit {
    pub step1: JcStep,
    /// JC form realised in hardware; conjugation by exp(-i pi sigma_x / 2) gives the anti-JC part.
    pub step2: JcStep,
    pub pulse: &'static str,
    /// Physical resonator and qubit frequencies in the lab, given the rotating-frame frequency.
    pub resonator_freq: f64,
    pub qubit_freq_1: f64,
    pub qubit_freq_2: f64,
}

pub fn digital_split(spec: &ModelSpec, omega_rot: f64) -> Result<DigitalSplit> {
    let ModelSpec::Qrm { omega_q, omega, g, sign } = *spec else {
        return Err(Error::InvalidInput("digital split needs a qrm spec".into()));
    };
    let gs = sign.value() * g;
    // qubit frequencies of the two steps: omega_q^1 - omega_q^2 = Omega
    let wq1 = omega_q / 2.0;
    let wq2 = -omega_q / 2.0;
    let step1 = JcStep { mode_detuning: omega / 2.0, qubit_detuning: wq1 / 2.0, g: gs };
    let step2 = JcStep { mode_detuning: omega / 2.0, qubit_detuning: wq2 / 2.0, g: gs };
    Ok(DigitalSplit {
        step1,
        step2,
        pulse: "exp(-i pi sigma_x / 2) before and after step 2",
        resonator_freq: omega_rot + step1.mode_detuning,
        qubit_freq_1: omega_rot + 2.0 * step1.qubit_detuning,
        qubit_freq_2: omega_rot + 2.0 * step2.qubit_detuning,
    })
}

/// exp(-i pi sigma_x / 2) on the qubit of a one-qubit, one-mode layout.
pub fn pi_pulse_x(layout: &SystemLayout) -> CMat {
    // exp(-i pi/2 sigma_x) = -i sigma_x
    Ops::new(layout).s(0, Axis::X) * (-I)
}

/// Anti-JC matrix obtained from a JC step by the pi-pulse sandwich.
pub fn conjugated_step(step: &JcStep, layout: &SystemLayout) -> CMat {
    let p = pi_pulse_x(layout);
    &p * step.matrix(layout) * p.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, hermiticity_error, max_abs};

    fn qrm(omega_q: f64, omega: f64, g: f64) -> ModelSpec {
        ModelSpec::Qrm { omega_q, omega, g, sign: Sign::Plus }
    }

    #[test]
    fn decoupled_qrm_spectrum() {
        let s = qrm(1.0, 1.0, 0.0);
        let l = s.default_layout(6).unwrap();
        let (e, _) = eigh(&build_static(&s, &l).unwrap().matrix);
        let want = [-0.5, 0.5, 0.5, 1.5, 1.5];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn displaced_oscillator_ground() {
        let s = qrm(0.0, 1.0, 2.0);
        let l = s.default_layout(60).unwrap();
        let (e, _) = eigh(&build_static(&s, &l).unwrap().matrix);
        assert!((e[0] + 4.0).abs() < 1e-8, "{}", e[0]);
    }

    #[test]
    fn anisotropic_reduces_to_qrm() {
        let l = SystemLayout::qubits_and_modes(1, &[8]).unwrap();
        let a = build_static(&ModelSpec::AnisotropicRabi { omega_q: 0.7, omega: 1.0, g: 0.3, g_cr: 0.3 }, &l).unwrap();
        let b = build_static(&qrm(0.7, 1.0, 0.3), &l).unwrap();
        assert!(max_abs(&(a.matrix - b.matrix)) < 1e-15);
    }

    #[test]
    fn layout_mismatch_and_bad_truncation() {
        let l = SystemLayout::qubits_and_modes(2, &[3]).unwrap();
        assert!(matches!(build_static(&qrm(1.0, 1.0, 0.1), &l), Err(Error::LayoutMismatch(_))));
        assert!(matches!(qrm(1.0, 1.0, 0.1).default_layout(0), Err(Error::InvalidTruncation(0))));
    }

    #[test]
    fn every_family_is_hermitian() {
        let inner = ModelSpec::Dicke { n: 2, omega_q: 1.0, omega: 1.0, g: 0.3 };
        let specs = vec![
            qrm(1.0, 1.0, 0.3),
            ModelSpec::Jc { omega_q: 1.0, omega: 1.0, g: 0.1 },
            ModelSpec::AcStark { omega_q: 1.5, omega: 1.0, g: 0.1 },
            ModelSpec::BlochSiegert { omega_q: 1.0, omega: 1.0, g: 0.1 },
            ModelSpec::AnisotropicRabi { omega_q: 1.0, omega: 1.0, g: 0.1, g_cr: 0.4 },
            inner.clone(),
            ModelSpec::TavisCummings { n: 2, omega_q: 1.0, omega: 1.0, g: 0.3 },
            ModelSpec::Hopfield { n: 2, omega_q: 1.0, omega: 1.0, g: 0.3, d: 1.0 },
            ModelSpec::TwoAtomRabi { omega_q: 1.0, omega: 2.0, g: 0.1, theta: 0.6 },
            ModelSpec::JahnTeller { omega_q: 1.0, omega_c: 1.0, lambda: 0.2, theta: 0.3, phi: 1.2 },
            ModelSpec::HerzbergTeller { omega_q: 1.0, omega_1: 1.0, omega_2: 1.1, g_1: 0.2, g_2: 0.1, j: 0.05 },
            ModelSpec::OptomechPair { omega_r: 5.0, omega_m: 1.0, g_m: 0.5, g_r: 0.01 },
            ModelSpec::LongitudinalTwoQubit { omega_1: 1.0, omega_2: 1.2, omega: 1.0, g_1: 0.1, g_2: 0.1, on_1: true, on_2: true },
            ModelSpec::ProtectedDicke { n: 2, omega_q: 0.5, omega: 1.0, g: 1.0 },
            ModelSpec::AncillaProbe { inner: Box::new(inner), omega_an: 3.0, g_an: 0.02, drive_amp: 0.0, drive_freq: 0.0 },
            ModelSpec::DiracEffective { lambda: 0.3, g: 1.0, xi: 0.1 },
        ];
        for s in specs {
            let l = s.default_layout(3).unwrap();
            let h = build_static(&s, &l).unwrap();
            assert!(hermiticity_error(&h.matrix) < 1e-12, "{}", s.name());
        }
    }

    #[test]
    fn driven_reduces_to_jc_without_drives() {
        let s = ModelSpec::DrivenJc { omega_q: 1.0, omega: 1.0, g: 0.1, amp_1: 0.0, freq_1: 0.9, amp_2: 0.0, freq_2: 0.5, phi: 0.0, xi: 0.0 };
        let l = s.default_layout(4).unwrap();
        let h0 = build_driven(&s, &l, 0.0).unwrap().matrix;
        let h1 = build_driven(&s, &l, 3.7).unwrap().matrix;
        assert!(max_abs(&(&h0 - &h1)) < 1e-15);
        // HamilDiag-style sign: -g JC coupling; spectrum equals +g JC
        let jc = build_static(&ModelSpec::Jc { omega_q: 1.0, omega: 1.0, g: 0.1 }, &l).unwrap().matrix;
        let (a, _) = eigh(&h0);
        let (b, _) = eigh(&jc);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn driven_periodicity() {
        let s = ModelSpec::DrivenJc { omega_q: 1.0, omega: 1.0, g: 0.1, amp_1: 0.2, freq_1: 2.0, amp_2: 0.1, freq_2: 1.0, phi: 0.3, xi: 0.0 };
        let l = s.default_layout(3).unwrap();
        let t = 2.0 * std::f64::consts::PI / 2.0 * 2.0;
        let h0 = build_driven(&s, &l, 0.0).unwrap().matrix;
        let h1 = build_driven(&s, &l, t).unwrap().matrix;
        assert!(max_abs(&(h0 - h1)) < 1e-12);
    }

    #[test]
    fn effective_mapping() {
        let s = ModelSpec::DrivenJc { omega_q: 9.9, omega: 10.0, g: 0.1, amp_1: 0.5, freq_1: 9.9, amp_2: 0.05, freq_2: 8.9, phi: 0.0, xi: 0.0 };
        let e = effective_qrm_of_driven(&s).unwrap();
        let ModelSpec::Qrm { omega_q, omega, g, .. } = e.spec else { panic!() };
        assert!((omega_q - 0.05).abs() < 1e-12 && (omega - 0.1).abs() < 1e-12 && (g - 0.05).abs() < 1e-12);
        assert!((e.g_over_omega - 0.5).abs() < 1e-9);
        let bad = ModelSpec::DrivenJc { omega_q: 9.9, omega: 10.0, g: 0.1, amp_1: 0.5, freq_1: 9.9, amp_2: 0.05, freq_2: 9.0, phi: 0.0, xi: 0.0 };
        assert!(matches!(effective_qrm_of_driven(&bad), Err(Error::ResonanceMismatch { .. })));
        let deg = ModelSpec::DrivenJc { omega_q: 10.0, omega: 10.0, g: 0.1, amp_1: 0.5, freq_1: 10.0, amp_2: 0.05, freq_2: 9.0, phi: 0.0, xi: 0.0 };
        assert!(effective_qrm_of_driven(&deg).unwrap().degenerate_mode);
    }

    #[test]
    fn cold_atom_scaling() {
        let m = 1.44e-25;
        let a = cold_atom_map(m, 1e-30, 8e6, 2.0 * std::f64::consts::PI * 1e3).unwrap();
        let b = cold_atom_map(m, 1e-30, 8e6, 4.0 * 2.0 * std::f64::consts::PI * 1e3).unwrap();
        assert!((b.coupling / a.coupling - 2.0).abs() < 1e-12);
        assert!(a.g_over_omega > 1.0);
    }

    #[test]
    fn digital_split_identities() {
        let s = qrm(1.0, 2.0, 0.8);
        let d = digital_split(&s, 5.0).unwrap();
        assert_eq!(d.step1.mode_detuning, 1.0);
        assert_eq!(d.step2.mode_detuning, 1.0);
        assert!((2.0 * (d.step1.qubit_detuning - d.step2.qubit_detuning) - 1.0).abs() < 1e-15);
        let l = s.default_layout(5).unwrap();
        let h1 = d.step1.matrix(&l);
        let h2 = conjugated_step(&d.step2, &l);
        let target = build_static(&s, &l).unwrap().matrix;
        assert!(max_abs(&(h1 + h2 - target)) < 1e-12);
    }

    #[test]
    fn pulse_conjugation_gives_anti_jc() {
        let l = SystemLayout::qubits_and_modes(1, &[4]).unwrap();
        let step = JcStep { mode_detuning: 0.3, qubit_detuning: 0.2, g: 0.1 };
        let o = Ops::new(&l);
        let anti = o.n(1) * r(0.3) - o.s(0, Axis::Z) * r(0.2) + (o.ad(1) * o.s(0, Axis::Plus) + o.a(1) * o.s(0, Axis::Minus)) * r(0.1);
        assert!(max_abs(&(conjugated_step(&step, &l) - anti)) < 1e-14);
    }

    #[test]
    fn json_roundtrip() {
        let s = ModelSpec::Hopfield { n: 3, omega_q: 1.0, omega: 1.0, g: 0.2, d: 1.0 };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&j).unwrap(), s);
        let q: ModelSpec = serde_json::from_str(r#"{"model":"qrm","omega_q":1,"omega":1,"g":0.1}"#).unwrap();
        assert_eq!(q, qrm(1.0, 1.0, 0.1));
    }
}
