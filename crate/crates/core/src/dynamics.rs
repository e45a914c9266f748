//! Closed-system evolution, digital and analog simulation checks, and protocols.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{basis_vector, partial_trace_ket, Axis, COperator, Subsystem, SystemLayout};
use crate::linalg::{self, c, CMat, CVec, C64, I};
use crate::models::{build_driven, build_static, digital_split, effective_qrm_of_driven, DigitalSplit, ModelSpec, Ops};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        if !(t1 > t0) || n_steps < 1 {
            return Err(Error::InvalidInput(format!("bad time grid [{t0}, {t1}] with {n_steps} steps")));
        }
        Ok(Self { t0, t1, n_steps })
    }
    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.t0 + k as f64 * self.dt()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub times: Vec<f64>,
    pub states: Vec<CVec>,
    pub norm_drift: f64,
    /// Largest population found in the top two Fock levels of any mode.
    pub top_fock_population: f64,
}

impl PropagationResult {
    pub fn last(&self) -> &CVec {
        self.states.last().expect("non-empty propagation")
    }

    /// Fails with `TruncationLeak` when the top Fock levels carried more than `tol`.
    pub fn check_truncation(&self, tol: f64) -> Result<()> {
        if self.top_fock_population > tol {
            Err(Error::TruncationLeak { population: self.top_fock_population })
        } else {
            Ok(())
        }
    }
}

/// Population in the two highest Fock states of any mode.
pub fn top_fock_population(layout: &SystemLayout, psi: &CVec) -> f64 {
    let mut worst: f64 = 0.0;
    for m in layout.mode_indices() {
        let Subsystem::Mode { nmax } = layout.subsystems()[m] else { continue };
        let mut p = 0.0;
        for k in 0..psi.len() {
            if layout.levels(k)[m] + 1 >= nmax {
                p += psi[k].norm_sqr();
            }
        }
        worst = worst.max(p);
    }
    worst
}

fn check_ket(layout: &SystemLayout, psi: &CVec) -> Result<()> {
    if psi.len() != layout.total_dim() {
        return Err(Error::LayoutMismatch("initial state dimension".into()));
    }
    if (psi.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("initial state norm {}", psi.norm())));
    }
    Ok(())
}

fn record(layout: &SystemLayout, times: Vec<f64>, states: Vec<CVec>) -> PropagationResult {
    let norm_drift = states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
    let top = states.iter().map(|s| top_fock_population(layout, s)).fold(0.0, f64::max);
    PropagationResult { times, states, norm_drift, top_fock_population: top }
}

/// psi(t) = exp(-iHt) psi0 on every grid point, through the spectral decomposition.
pub fn propagate_static(h: &COperator, psi0: &CVec, grid: &TimeGrid) -> Result<PropagationResult> {
    h.check_hermitian()?;
    check_ket(&h.layout, psi0)?;
    let (vals, vecs) = linalg::eigh(&h.matrix);
    let coeffs = vecs.adjoint() * psi0;
    let times = grid.times();
    let states = times
        .iter()
        .map(|&t| {
            let mut v = coeffs.clone();
            for (k, &e) in vals.iter().enumerate() {
                v[k] *= (-I * e * (t - grid.t0)).exp();
            }
            &vecs * v
        })
        .collect();
    Ok(record(&h.layout, times, states))
}

/// Midpoint-exponential stepping of a time-dependent Hamiltonian.
/// `omega_max` is the largest frequency of the problem; dt must not exceed (2 pi / omega_max) / 50.
pub fn propagate_timedep(
    layout: &SystemLayout,
    builder: impl Fn(f64) -> Result<CMat>,
    psi0: &CVec,
    grid: &TimeGrid,
    omega_max: f64,
) -> Result<PropagationResult> {
    check_ket(layout, psi0)?;
    let dt = grid.dt();
    if omega_max > 0.0 {
        let max = 2.0 * PI / omega_max / 50.0;
        if dt > max * (1.0 + 1e-12) {
            return Err(Error::StepTooCoarse { dt, max });
        }
    }
    let times = grid.times();
    let mut states = Vec::with_capacity(times.len());
    let mut psi = psi0.clone();
    states.push(psi.clone());
    for k in 0..grid.n_steps {
        let h = builder(grid.t0 + (k as f64 + 0.5) * dt)?;
        psi = linalg::expm_hermitian(&h, dt) * psi;
        states.push(psi.clone());
    }
    Ok(record(layout, times, states))
}

/// |<psi0|psi(t)>| for a static model (modulus, not squared).
pub fn revival_probability(spec: &ModelSpec, psi0: Option<&CVec>, grid: &TimeGrid, nmax: usize) -> Result<Vec<f64>> {
    let layout = spec.default_layout(nmax)?;
    let h = build_static(spec, &layout)?;
    let start = match psi0 {
        Some(p) => p.clone(),
        None => basis_vector(layout.total_dim(), 0),
    };
    let res = propagate_static(&h, &start, grid)?;
    Ok(res.states.iter().map(|s| start.dotc(s).norm()).collect())
}

/// Local maxima of a sampled series (interior points only).
pub fn local_maxima(series: &[f64]) -> Vec<(usize, f64)> {
    (1..series.len().saturating_sub(1))
        .filter(|&k| series[k] > series[k - 1] && series[k] >= series[k + 1])
        .map(|k| (k, series[k]))
        .collect()
}

/// Photon-number distribution of one mode.
pub fn photon_statistics(layout: &SystemLayout, psi: &CVec, mode: usize) -> Result<Vec<f64>> {
    let Some(Subsystem::Mode { nmax }) = layout.subsystems().get(mode).copied() else {
        return Err(Error::InvalidSubsystem { index: mode, expected: "bosonic mode" });
    };
    let mut p = vec![0.0; nmax + 1];
    for k in 0..psi.len() {
        p[layout.levels(k)[mode]] += psi[k].norm_sqr();
    }
    Ok(p)
}

/// Effective period and fidelity trace of the analog driven-JC simulation.
#[derive(Clone, Debug, Serialize)]
pub struct AnalogComparison {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub min_fidelity: f64,
    pub effective: crate::models::EffectiveQrm,
}

/// Propagate the lab-frame driven JC system and compare, in the doubly rotated
/// frame, with the effective Rabi model started from the same state.
pub fn analog_compare(spec: &ModelSpec, psi0: &CVec, duration: f64, nmax: usize, samples: usize) -> Result<AnalogComparison> {
    let eff = effective_qrm_of_driven(spec)?;
    let ModelSpec::DrivenJc { freq_1, amp_1, phi, .. } = *spec else { unreachable!() };
    let layout = spec.default_layout(nmax)?;
    let o = Ops::new(&layout);
    let wmax = spec.max_frequency();
    let dt_max = 2.0 * PI / wmax / 50.0;
    let samples = samples.max(1);
    let mut per = ((duration / samples as f64) / dt_max).ceil() as usize;
    per = per.max(1);
    let grid = TimeGrid::new(0.0, duration, per * samples)?;
    let res = propagate_timedep(&layout, |t| Ok(build_driven(spec, &layout, t)?.matrix), psi0, &grid, wmax)?;
    let heff = build_static(&eff.spec, &layout)?;
    let (ev, evec) = linalg::eigh(&heff.matrix);
    let rot1 = o.n(1) + o.s(0, Axis::Z) * c(0.5);
    let sm = o.s(0, Axis::Minus);
    let h0 = (&sm * (I * phi).exp() + sm.adjoint() * (-I * phi).exp()) * c(-amp_1);
    let mut times = Vec::new();
    let mut fid = Vec::new();
    for s in 0..=samples {
        let k = s * per;
        let t = res.times[k];
        let lab = &res.states[k];
        // psi_L1 = exp(i omega_1 t (n + sz/2)) psi_lab ; psi_I = exp(i H0 t) psi_L1
        let l1 = linalg::expm_hermitian(&rot1, -freq_1 * t) * lab;
        let pi_ = linalg::expm_hermitian(&h0, -t) * l1;
        let pe = linalg::spectral_propagator(&ev, &evec, t) * psi0;
        times.push(t);
        fid.push(pe.dotc(&pi_).norm_sqr());
    }
    let min_fidelity = fid.iter().cloned().fold(1.0, f64::min);
    Ok(AnalogComparison { times, fidelity: fid, min_fidelity, effective: eff })
}

/// Digital sequence: per step exp(-i H1 dt), pulse, exp(-i H2~ dt), pulse.
#[derive(Clone, Debug, Serialize)]
pub struct TrotterPlan {
    pub total_time: f64,
    pub steps: usize,
    pub split: DigitalSplit,
}

impl TrotterPlan {
    pub fn new(spec: &ModelSpec, total_time: f64, steps: usize) -> Result<Self> {
        if steps < 1 || !(total_time > 0.0) {
            return Err(Error::InvalidInput("trotter plan needs n >= 1 and T > 0".into()));
        }
        Ok(Self { total_time, steps, split: digital_split(spec, 0.0)? })
    }
    pub fn dt(&self) -> f64 {
        self.total_time / self.steps as f64
    }
}

#[derive(Clone, Debug)]
pub struct TrotterResult {
    pub state: CVec,
    pub exact: CVec,
    pub fidelity: f64,
}

pub fn trotter_evolve(plan: &TrotterPlan, target: &ModelSpec, psi0: &CVec, nmax: usize) -> Result<TrotterResult> {
    let layout = target.default_layout(nmax)?;
    check_ket(&layout, psi0)?;
    let dt = plan.dt();
    let u1 = linalg::expm_hermitian(&plan.split.step1.matrix(&layout), dt);
    let u2 = linalg::expm_hermitian(&plan.split.step2.matrix(&layout), dt);
    let p = crate::models::pi_pulse_x(&layout);
    let step = &p * u2 * p.adjoint() * u1;
    let mut psi = psi0.clone();
    for _ in 0..plan.steps {
        psi = &step * psi;
    }
    let h = build_static(target, &layout)?;
    let exact = linalg::expm_hermitian(&h.matrix, plan.total_time) * psi0;
    let fidelity = exact.dotc(&psi).norm_sqr();
    Ok(TrotterResult { state: psi, exact, fidelity })
}

#[derive(Clone, Debug, Serialize)]
pub struct GhzResult {
    /// Fidelity to (|g..g> + e^{-i pi (N+1)/2} |e..e>)/sqrt 2, the state the
    /// interaction-picture Hamiltonian produces.
    pub fidelity: f64,
    /// Fidelity to the same form with the conjugate phase e^{+i pi (N+1)/2}.
    pub fidelity_conjugate_phase: f64,
    pub prep_time: f64,
    /// omega^2 / (16 g^2); the protocol assumes it is an integer.
    pub n_ratio: f64,
    pub commensurate: bool,
    pub cavity_vacuum_population: f64,
    #[serde(skip)]
    pub state: CVec,
}

/// GHZ preparation under g sum_i (a^dag e^{i w t} + a e^{-i w t}) sigma_x^i from |g...g, 0>,
/// evaluated at `time` (defaults to pi omega / (8 g^2)).
pub fn ghz_protocol(n: usize, g: f64, omega: f64, time: Option<f64>, nmax: usize) -> Result<GhzResult> {
    if n < 1 || !(g > 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidInput("GHZ protocol needs N >= 1, g > 0, omega > 0".into()));
    }
    let n_ratio = omega * omega / (16.0 * g * g);
    let commensurate = (n_ratio - n_ratio.round()).abs() < 1e-9 && n_ratio.round() >= 1.0;
    let prep_time = PI * omega / (8.0 * g * g);
    let t_end = time.unwrap_or(prep_time);
    let layout = SystemLayout::qubits_and_modes(n, &[nmax])?;
    let o = Ops::new(&layout);
    let qs: Vec<usize> = (0..n).collect();
    let sx = o.sum_s(&qs, Axis::X);
    let a = o.a(n);
    let ad = a.adjoint();
    let dt_max = 2.0 * PI / omega / 50.0;
    let steps = (t_end / dt_max).ceil() as usize;
    let grid = TimeGrid::new(0.0, t_end, steps.max(1))?;
    let psi0 = basis_vector(layout.total_dim(), 0);
    let builder = |t: f64| Ok((&ad * (I * omega * t).exp() + &a * (-I * omega * t).exp()) * &sx * c(g));
    let res = propagate_timedep(&layout, builder, &psi0, &grid, omega)?;
    let psi = res.last().clone();
    let rho_q = partial_trace_ket(&layout, &psi, &qs);
    let dq = 1usize << n;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let overlap = |sign: f64| {
        let mut ghz = CVec::zeros(dq);
        ghz[0] = c(s);
        ghz[dq - 1] = (I * sign * PI * (n as f64 + 1.0) / 2.0).exp() * s;
        ghz.dotc(&(&rho_q * &ghz)).re
    };
    // the exchange generated by H_I is exp(+i (g^2/omega) t (sum sigma_x)^2)
    let fidelity = overlap(-1.0);
    let fidelity_conjugate_phase = overlap(1.0);
    let vac = photon_statistics(&layout, &psi, n)?[0];
    Ok(GhzResult { fidelity, fidelity_conjugate_phase, prep_time, n_ratio, commensurate, cavity_vacuum_population: vac, state: psi })
}

#[derive(Clone, Debug, Serialize)]
pub struct CphaseResult {
    /// Diagonal phases theta_ab of the two-qubit gate (a, b in {g, e}).
    pub phases: [f64; 4],
    /// exp(i phi sz sz) coefficient phi extracted from the phases.
    pub zz_phase: f64,
    /// 4 (g1 g2 / omega^2) sin(omega t1).
    pub predicted_zz_phase: f64,
    pub min_purity: f64,
    pub cphase_fidelity: f64,
    pub total_time: f64,
}

/// Four equal segments of length t1 with the longitudinal couplings switched on
/// one at a time: qubit 1, qubit 2, qubit 1, qubit 2. At omega t1 = pi/2 (or 3pi/2)
/// the conditional cavity displacements close a loop and leave a pure
/// sigma_z sigma_z phase.
pub fn cphase_sequence(spec: &ModelSpec, t1: f64, nmax: usize) -> Result<CphaseResult> {
    let ModelSpec::LongitudinalTwoQubit { omega_1, omega_2, omega, g_1, g_2, .. } = *spec else {
        return Err(Error::InvalidInput("cphase needs a longitudinal_two_qubit spec".into()));
    };
    let schedule = [(true, false), (false, true), (true, false), (false, true)];
    let layout = spec.default_layout(nmax)?;
    let mut u = linalg::identity(layout.total_dim());
    for (on_1, on_2) in schedule {
        let seg = ModelSpec::LongitudinalTwoQubit { omega_1, omega_2, omega, g_1, g_2, on_1, on_2 };
        u = linalg::expm_hermitian(&build_static(&seg, &layout)?.matrix, t1) * u;
    }
    // remove the bare qubit precession so the reported phases are interaction-only
    let o = Ops::new(&layout);
    let free = o.s(0, Axis::Z) * c(omega_1 / 2.0) + o.s(1, Axis::Z) * c(omega_2 / 2.0);
    u = linalg::expm_hermitian(&free, -4.0 * t1) * u;

    let mut phases = [0.0; 4];
    let mut amps = [0.0; 4];
    let mut min_purity: f64 = 1.0;
    for (k, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let idx = layout.basis_index(&[a, b, 0])?;
        let out = u.column(idx).into_owned();
        let amp = out[idx];
        phases[k] = amp.arg();
        amps[k] = amp.norm();
    }
    // purity of the qubit pair for the |++> input
    let mut plus = CVec::zeros(layout.total_dim());
    for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        plus[layout.basis_index(&[a, b, 0])?] = c(0.5);
    }
    let fin = &u * plus;
    let rq = partial_trace_ket(&layout, &fin, &[0, 1]);
    min_purity = min_purity.min((&rq * &rq).trace().re);
    if min_purity < 1.0 - 1e-6 {
        return Err(Error::LoopNotClosed { purity: min_purity });
    }
    let cross = wrap(phases[0] - phases[1] - phases[2] + phases[3]);
    let zz_phase = cross / 4.0;
    let predicted = 4.0 * g_1 * g_2 / (omega * omega) * (omega * t1).sin();
    // fidelity to exp(i pi/4 sz sz) up to local Z rotations: only the cross phase matters
    let delta = wrap(cross - PI);
    let signs = [1.0, -1.0, -1.0, 1.0];
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..4 {
        acc += (I * delta / 4.0 * signs[k]).exp() * amps[k];
    }
    Ok(CphaseResult {
        phases,
        zz_phase,
        predicted_zz_phase: predicted,
        min_purity,
        cphase_fidelity: acc.norm_sqr() / 16.0,
        total_time: 4.0 * t1,
    })
}

fn wrap(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y < -PI {
        y += 2.0 * PI;
    }
    y
}

#[derive(Clone, Debug, Serialize)]
pub struct NoonResult {
    pub fidelity: f64,
    /// |amplitude|^2 on |N,0> and |0,N> of the two mechanical modes.
    pub weight_n0: f64,
    pub weight_0n: f64,
    pub hop_time: f64,
    pub effective_hopping: f64,
}

/// Ideal-pulse NOON protocol on two optomechanical cells [cav1, mech1, cav2, mech2]
/// with single-photon cavities. `mixing_angle` is the effective photon-hopping
/// angle; pi/4 gives the balanced NOON state.
pub fn noon_protocol(spec: &ModelSpec, n_target: usize, mixing_angle: f64, nmax_mech: usize) -> Result<NoonResult> {
    let ModelSpec::OptomechPair { omega_m, g_m, g_r, .. } = *spec else {
        return Err(Error::InvalidInput("noon protocol needs an optomech_pair spec".into()));
    };
    if n_target < 1 || n_target > nmax_mech {
        return Err(Error::InvalidInput(format!("N = {n_target} outside mechanical truncation {nmax_mech}")));
    }
    let layout = SystemLayout::new(vec![
        Subsystem::Mode { nmax: 1 },
        Subsystem::Mode { nmax: nmax_mech },
        Subsystem::Mode { nmax: 1 },
        Subsystem::Mode { nmax: nmax_mech },
    ])?;
    // one cell: cavity (2 levels) x mechanics
    let cell = SystemLayout::new(vec![Subsystem::Mode { nmax: 1 }, Subsystem::Mode { nmax: nmax_mech }])?;
    let beta = g_m / omega_m;
    let disp = crate::hilbert::displacement(&cell, 1, C64::new(-beta, 0.0))?.matrix;
    let dressed_one = &disp * basis_vector(cell.total_dim(), cell.basis_index(&[1, 0])?);
    let ground = basis_vector(cell.total_dim(), cell.basis_index(&[0, 0])?);
    let fock_n = basis_vector(cell.total_dim(), cell.basis_index(&[0, n_target])?);
    let excite = pi_rotation(&ground, &dressed_one);
    let convert = pi_rotation(&dressed_one, &fock_n);
    let idc = linalg::identity(cell.total_dim());

    let psi0 = basis_vector(layout.total_dim(), 0);
    let psi1 = linalg::kron(&excite, &idc) * psi0;
    let g_eff = g_r * (-beta * beta).exp();
    let hop_time = mixing_angle / g_eff;
    let h = build_static(spec, &layout)?;
    let psi2 = linalg::expm_hermitian(&h.matrix, hop_time) * psi1;
    let psi3 = linalg::kron(&convert, &convert) * psi2;

    let i_n0 = layout.basis_index(&[0, n_target, 0, 0])?;
    let i_0n = layout.basis_index(&[0, 0, 0, n_target])?;
    let a = psi3[i_n0];
    let b = psi3[i_0n];
    let target_a = mixing_angle.cos();
    let target_b = -I * mixing_angle.sin();
    // overlap with cos|N,0> - i sin|0,N>, up to a global phase
    let ov = a * target_a + b * target_b.conj();
    Ok(NoonResult {
        fidelity: ov.norm_sqr(),
        weight_n0: a.norm_sqr(),
        weight_0n: b.norm_sqr(),
        hop_time,
        effective_hopping: g_eff,
    })
}

/// Ideal pi rotation exp(-i pi/2 (|u><v| + |v><u|)) for orthonormal u, v.
fn pi_rotation(u: &CVec, v: &CVec) -> CMat {
    let d = u.len();
    let pu = linalg::outer(u, u);
    let pv = linalg::outer(v, v);
    let x = linalg::outer(u, v) + linalg::outer(v, u);
    linalg::identity(d) - pu - pv - x * I
}

#[derive(Clone, Debug, Serialize)]
pub struct DiracTrajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

/// Quadrature trajectories of the Dirac-like effective model from the wavepacket
/// D((x0 + i p0)/sqrt 2)|0> times a spinor.
pub fn dirac_observables(spec: &ModelSpec, x0: f64, p0: f64, spinor: [C64; 2], grid: &TimeGrid, nmax: usize) -> Result<DiracTrajectory> {
    if !matches!(spec, ModelSpec::DiracEffective { .. }) {
        return Err(Error::InvalidInput("dirac observables need a dirac_effective spec".into()));
    }
    let layout = spec.default_layout(nmax)?;
    let o = Ops::new(&layout);
    let alpha = C64::new(x0, p0) * std::f64::consts::FRAC_1_SQRT_2;
    let mode = SystemLayout::new(vec![Subsystem::Mode { nmax }])?;
    let coh = crate::hilbert::displacement(&mode, 0, alpha)?.matrix * basis_vector(nmax + 1, 0);
    let norm = (spinor[0].norm_sqr() + spinor[1].norm_sqr()).sqrt();
    let sp = CVec::from_vec(vec![spinor[0] / norm, spinor[1] / norm]);
    let psi0 = sp.kronecker(&coh);
    let h = build_static(spec, &layout)?;
    let res = propagate_static(&h, &psi0, grid)?;
    let a = o.a(1);
    let x = (a.adjoint() + &a) * c(std::f64::consts::FRAC_1_SQRT_2);
    let p = (&a - a.adjoint()) * (-I * std::f64::consts::FRAC_1_SQRT_2);
    Ok(DiracTrajectory {
        times: res.times.clone(),
        x: res.states.iter().map(|s| s.dotc(&(&x * s)).re).collect(),
        p: res.states.iter().map(|s| s.dotc(&(&p * s)).re).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Sign;

    fn qrm(omega_q: f64, omega: f64, g: f64) -> ModelSpec {
        ModelSpec::Qrm { omega_q, omega, g, sign: Sign::Plus }
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let l = SystemLayout::qubits_and_modes(1, &[3]).unwrap();
        let h = COperator::hermitian(&l, CMat::zeros(8, 8)).unwrap();
        let psi = basis_vector(8, 5);
        let r = propagate_static(&h, &psi, &TimeGrid::new(0.0, 3.0, 5).unwrap()).unwrap();
        assert!(r.states.iter().all(|s| (s - &psi).norm() < 1e-14));
    }

    #[test]
    fn jc_vacuum_rabi_oscillation() {
        let s = ModelSpec::Jc { omega_q: 1.0, omega: 1.0, g: 0.05 };
        let l = s.default_layout(3).unwrap();
        let h = build_static(&s, &l).unwrap();
        let e0 = l.basis_index(&[1, 0]).unwrap();
        let psi = basis_vector(l.total_dim(), e0);
        let r = propagate_static(&h, &psi, &TimeGrid::new(0.0, 40.0, 40).unwrap()).unwrap();
        for (t, st) in r.times.iter().zip(&r.states) {
            assert!((st[e0].norm_sqr() - (0.05 * t).cos().powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn timedep_matches_static_for_constant_h() {
        let s = qrm(1.0, 1.0, 0.4);
        let l = s.default_layout(12).unwrap();
        let h = build_static(&s, &l).unwrap();
        let psi = basis_vector(l.total_dim(), l.basis_index(&[1, 0]).unwrap());
        let grid = TimeGrid::new(0.0, 2.0, 200).unwrap();
        let a = propagate_static(&h, &psi, &grid).unwrap();
        let b = propagate_timedep(&l, |_| Ok(h.matrix.clone()), &psi, &grid, 1.4).unwrap();
        assert!((a.last() - b.last()).norm() < 1e-8);
        let coarse = TimeGrid::new(0.0, 2.0, 2).unwrap();
        assert!(matches!(propagate_timedep(&l, |_| Ok(h.matrix.clone()), &psi, &coarse, 1.4), Err(Error::StepTooCoarse { .. })));
    }

    #[test]
    fn driven_without_drives_is_jc() {
        let s = ModelSpec::DrivenJc { omega_q: 1.0, omega: 1.0, g: 0.1, amp_1: 0.0, freq_1: 0.5, amp_2: 0.0, freq_2: 0.2, phi: 0.0, xi: 0.0 };
        let l = s.default_layout(3).unwrap();
        let e0 = l.basis_index(&[1, 0]).unwrap();
        let psi = basis_vector(l.total_dim(), e0);
        let grid = TimeGrid::new(0.0, 10.0, 1000).unwrap();
        let r = propagate_timedep(&l, |t| Ok(build_driven(&s, &l, t)?.matrix), &psi, &grid, 1.0).unwrap();
        assert!((r.last()[e0].norm_sqr() - (0.1f64 * 10.0).cos().powi(2)).abs() < 1e-8);
    }

    #[test]
    fn dsc_periodic_revival() {
        let grid = TimeGrid::new(0.0, 3.0 * 2.0 * PI, 3).unwrap();
        let p = revival_probability(&qrm(0.0, 1.0, 2.0), None, &grid, 80).unwrap();
        for v in &p[1..] {
            assert!((v - 1.0).abs() < 1e-6, "{v}");
        }
        let g0 = revival_probability(&qrm(1.0, 1.0, 0.0), None, &TimeGrid::new(0.0, 5.0, 7).unwrap(), 4).unwrap();
        assert!(g0.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn displaced_frame_photon_number() {
        // <n>(t) = (g/w)^2 |1 - e^{-iwt}|^2 = 16 at t = pi
        let s = qrm(0.0, 1.0, 2.0);
        let l = s.default_layout(80).unwrap();
        let h = build_static(&s, &l).unwrap();
        let r = propagate_static(&h, &basis_vector(l.total_dim(), 0), &TimeGrid::new(0.0, PI, 1).unwrap()).unwrap();
        let dist = photon_statistics(&l, r.last(), 1).unwrap();
        let mean: f64 = dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((mean - 16.0).abs() < 1e-4, "{mean}");
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trotter_commuting_parts() {
        let s = qrm(1.0, 1.0, 0.0);
        let plan = TrotterPlan::new(&s, 2.0 * PI, 1).unwrap();
        let l = s.default_layout(6).unwrap();
        let psi = basis_vector(l.total_dim(), l.basis_index(&[1, 2]).unwrap());
        let r = trotter_evolve(&plan, &s, &psi, 6).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trotter_converges() {
        let s = qrm(1.0, 1.0, 0.8);
        let l = s.default_layout(30).unwrap();
        let psi = basis_vector(l.total_dim(), l.basis_index(&[1, 0]).unwrap());
        let f4 = trotter_evolve(&TrotterPlan::new(&s, 2.0 * PI, 4).unwrap(), &s, &psi, 30).unwrap().fidelity;
        let f64_ = trotter_evolve(&TrotterPlan::new(&s, 2.0 * PI, 64).unwrap(), &s, &psi, 30).unwrap().fidelity;
        assert!(f64_ > f4);
    }

    #[test]
    fn ghz_two_qubits() {
        let r = ghz_protocol(2, 1.0 / 8.0, 1.0, None, 12).unwrap();
        assert!(r.commensurate);
        assert!(r.fidelity >= 0.999, "{}", r.fidelity);
        assert!(r.fidelity_conjugate_phase < 1e-3);
        let half = ghz_protocol(2, 1.0 / 8.0, 1.0, Some(r.prep_time / 2.0), 12).unwrap();
        assert!(half.fidelity < 0.9);
        let odd = ghz_protocol(2, 0.13, 1.0, None, 12).unwrap();
        assert!(!odd.commensurate);
    }

    #[test]
    fn ghz_single_qubit_stays_ground() {
        // a single qubit only picks up a global phase: |g> survives, overlap with
        // the two-component form is 1/2
        let r = ghz_protocol(1, 1.0 / 8.0, 1.0, None, 12).unwrap();
        assert!((r.fidelity - 0.5).abs() < 1e-3, "{}", r.fidelity);
    }

    fn longitudinal(g: f64) -> ModelSpec {
        ModelSpec::LongitudinalTwoQubit { omega_1: 1.3, omega_2: 1.7, omega: 1.0, g_1: g, g_2: g, on_1: true, on_2: true }
    }

    #[test]
    fn cphase_phase_matches_formula() {
        let g = (PI / 16.0).sqrt();
        let r = cphase_sequence(&longitudinal(g), PI / 2.0, 40).unwrap();
        assert!((r.zz_phase - PI / 4.0).abs() < 1e-6, "{}", r.zz_phase);
        assert!((r.predicted_zz_phase - PI / 4.0).abs() < 1e-12);
        assert!(r.cphase_fidelity > 0.99);
        let flipped = cphase_sequence(&longitudinal(g), 3.0 * PI / 2.0, 40).unwrap();
        assert!((flipped.zz_phase + PI / 4.0).abs() < 1e-6, "{}", flipped.zz_phase);
    }

    #[test]
    fn cphase_uncoupled_is_local() {
        let s = ModelSpec::LongitudinalTwoQubit { omega_1: 1.0, omega_2: 1.0, omega: 1.0, g_1: 0.3, g_2: 0.0, on_1: true, on_2: true };
        let r = cphase_sequence(&s, PI / 2.0, 30).unwrap();
        assert!(r.zz_phase.abs() < 1e-9);
    }

    #[test]
    fn cphase_open_loop_detected() {
        assert!(matches!(cphase_sequence(&longitudinal(0.3), 1.0, 30), Err(Error::LoopNotClosed { .. })));
    }

    fn optomech() -> ModelSpec {
        ModelSpec::OptomechPair { omega_r: 5.0, omega_m: 1.0, g_m: 1.0, g_r: 0.01 }
    }

    #[test]
    fn noon_single_excitation_and_full_transfer() {
        let r = noon_protocol(&optomech(), 1, PI / 4.0, 10).unwrap();
        assert!(r.fidelity > 0.99, "{}", r.fidelity);
        let full = noon_protocol(&optomech(), 1, PI / 2.0, 10).unwrap();
        assert!(full.weight_n0 < 1e-2 && full.weight_0n > 0.98, "{:?}", full);
        assert!(noon_protocol(&optomech(), 11, PI / 4.0, 10).is_err());
    }

    #[test]
    fn dirac_massless_straight_line() {
        let s = ModelSpec::DiracEffective { lambda: 0.0, g: 1.0, xi: 0.0 };
        // +1 eigenvector of sigma_y = i(sigma_- - sigma_+) in the (g, e) basis
        let sq = std::f64::consts::FRAC_1_SQRT_2;
        let spinor = [c(sq), -I * sq];
        let grid = TimeGrid::new(0.0, 3.0, 30).unwrap();
        let tr = dirac_observables(&s, 0.0, 0.0, spinor, &grid, 40).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.x) {
            assert!((x - t / 2f64.sqrt()).abs() < 1e-8, "{t} {x}");
        }
        let still = dirac_observables(&ModelSpec::DiracEffective { lambda: 0.5, g: 0.0, xi: 0.0 }, 1.0, 0.5, spinor, &grid, 30).unwrap();
        assert!(still.x.iter().all(|x| (x - 1.0).abs() < 1e-9));
        assert!(still.p.iter().all(|p| (p - 0.5).abs() < 1e-9));
    }
}
