//! Lindblad dynamics: the standard lab-frame form and the dressed-state form whose
//! jump operators connect exact eigenstates. Zero temperature throughout.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::TimeGrid;
use crate::error::{Error, Result};
use crate::hilbert::{Axis, COperator, SystemLayout};
use crate::linalg::{self, c, CMat, C64, I};
use crate::models::Ops;
use crate::spectra::EigenSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralShape {
    Flat,
    /// Linear in frequency, normalised to 1 at the reference frequency.
    Ohmic,
}

impl SpectralShape {
    /// Relative noise density at frequency w (T = 0: nothing for w <= 0).
    pub fn eval(self, w: f64, omega_ref: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self {
            SpectralShape::Flat => 1.0,
            SpectralShape::Ohmic => w / omega_ref,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladSpec {
    pub kappa: f64,
    pub gamma: f64,
    pub gamma_phi: f64,
    #[serde(default = "ohmic")]
    pub kappa_shape: SpectralShape,
    #[serde(default = "flat")]
    pub gamma_shape: SpectralShape,
    #[serde(default = "ohmic")]
    pub gamma_phi_shape: SpectralShape,
    /// Frequency at which the ohmic shapes equal the base rate.
    #[serde(default = "one")]
    pub omega_ref: f64,
}

fn ohmic() -> SpectralShape {
    SpectralShape::Ohmic
}
fn flat() -> SpectralShape {
    SpectralShape::Flat
}
fn one() -> f64 {
    1.0
}

impl LindbladSpec {
    pub fn new(kappa: f64, gamma: f64, gamma_phi: f64, omega_ref: f64) -> Result<Self> {
        let s = Self {
            kappa,
            gamma,
            gamma_phi,
            kappa_shape: SpectralShape::Ohmic,
            gamma_shape: SpectralShape::Flat,
            gamma_phi_shape: SpectralShape::Ohmic,
            omega_ref,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_shapes(mut self, kappa: SpectralShape, gamma: SpectralShape, gamma_phi: SpectralShape) -> Self {
        self.kappa_shape = kappa;
        self.gamma_shape = gamma;
        self.gamma_phi_shape = gamma_phi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("gamma", self.gamma), ("gamma_phi", self.gamma_phi)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be a non-negative rate, got {v}")));
            }
        }
        if !(self.omega_ref > 0.0) {
            return Err(Error::InvalidInput("omega_ref must be positive".into()));
        }
        Ok(())
    }

    pub fn kappa_at(&self, w: f64) -> f64 {
        self.kappa * self.kappa_shape.eval(w, self.omega_ref)
    }
    pub fn gamma_at(&self, w: f64) -> f64 {
        self.gamma * self.gamma_shape.eval(w, self.omega_ref)
    }
    /// Dephasing density; at w = 0 a flat bath gives the base rate and an ohmic one nothing.
    pub fn gamma_phi_at(&self, w: f64) -> f64 {
        if w == 0.0 {
            return match self.gamma_phi_shape {
                SpectralShape::Flat => self.gamma_phi,
                SpectralShape::Ohmic => 0.0,
            };
        }
        self.gamma_phi * self.gamma_phi_shape.eval(w, self.omega_ref)
    }
}

/// Lindblad dissipator D[O]rho = (2 O rho O^dag - rho O^dag O - O^dag O rho) / 2.
pub fn dissipator(o: &CMat, rho: &CMat) -> CMat {
    let od = o.adjoint();
    let odo = &od * o;
    o * rho * &od - (rho * &odo + &odo * rho) * c(0.5)
}

fn check_density(dim: usize, rho: &CMat) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::LayoutMismatch(format!("density is {}x{}, expected {dim}", rho.nrows(), rho.ncols())));
    }
    let tr = rho.trace();
    if (tr - c(1.0)).norm() > 1e-8 {
        return Err(Error::InvalidState(format!("trace {tr}")));
    }
    let herr = linalg::hermiticity_error(rho);
    if herr > 1e-8 {
        return Err(Error::InvalidState(format!("density not Hermitian ({herr:e})")));
    }
    Ok(())
}

/// Cavity and qubit operators the baths couple to: first mode, sum over all qubits.
struct BathOps {
    a: CMat,
    x: CMat,
    sm: CMat,
    sz: CMat,
    sx: CMat,
}

fn bath_ops(layout: &SystemLayout) -> Result<BathOps> {
    let qs = layout.qubit_indices();
    let ms = layout.mode_indices();
    if qs.is_empty() || ms.is_empty() {
        return Err(Error::LayoutMismatch("open-system baths need at least one qubit and one mode".into()));
    }
    let o = Ops::new(layout);
    Ok(BathOps {
        a: o.a(ms[0]),
        x: o.x(ms[0]),
        sm: o.sum_s(&qs, Axis::Minus),
        sz: o.sum_s(&qs, Axis::Z),
        sx: o.sum_s(&qs, Axis::X),
    })
}

/// -i[H, rho] + kappa D[a] rho + gamma D[sigma-] rho + (gamma_phi / 2) D[sigma_z] rho, base rates only.
pub fn standard_lindblad_rhs(rho: &CMat, h: &COperator, spec: &LindbladSpec) -> Result<CMat> {
    spec.validate()?;
    check_density(h.dim(), rho)?;
    let b = bath_ops(&h.layout)?;
    Ok(standard_rhs_unchecked(rho, &h.matrix, &b, spec))
}

fn standard_rhs_unchecked(rho: &CMat, h: &CMat, b: &BathOps, spec: &LindbladSpec) -> CMat {
    let mut out = (h * rho - rho * h) * (-I);
    if spec.kappa > 0.0 {
        out += dissipator(&b.a, rho) * c(spec.kappa);
    }
    if spec.gamma > 0.0 {
        out += dissipator(&b.sm, rho) * c(spec.gamma);
    }
    if spec.gamma_phi > 0.0 {
        out += dissipator(&b.sz, rho) * c(spec.gamma_phi / 2.0);
    }
    out
}

/// Transition rates between eigenstates. Matrix entry (j, k) is the rate of the jump
/// |j><k|, nonzero only for k above j.
#[derive(Clone, Debug)]
pub struct DressedRates {
    pub energies: Vec<f64>,
    pub phi: Vec<f64>,
    pub gamma_phi: DMatrix<f64>,
    pub gamma_kappa: DMatrix<f64>,
    pub gamma_gamma: DMatrix<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub j: usize,
    pub k: usize,
    pub delta: f64,
    pub gamma_kappa: f64,
    pub gamma_gamma: f64,
    pub gamma_phi: f64,
}

impl DressedRates {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Total rate of the jump |j><k|.
    pub fn jump(&self, j: usize, k: usize) -> f64 {
        self.gamma_phi[(j, k)] + self.gamma_kappa[(j, k)] + self.gamma_gamma[(j, k)]
    }

    /// Largest rate or transition frequency; sets the stable step size.
    pub fn max_scale(&self) -> f64 {
        let d = self.dim();
        let mut m: f64 = 0.0;
        for j in 0..d {
            m = m.max(self.phi[j] * self.phi[j]);
            for k in 0..d {
                m = m.max((self.energies[k] - self.energies[j]).abs()).max(self.jump(j, k));
            }
        }
        m
    }

    pub fn table(&self, floor: f64) -> Vec<RateRow> {
        let d = self.dim();
        let mut rows = Vec::new();
        for j in 0..d {
            for k in 0..d {
                if self.jump(j, k) > floor {
                    rows.push(RateRow {
                        j,
                        k,
                        delta: self.energies[k] - self.energies[j],
                        gamma_kappa: self.gamma_kappa[(j, k)],
                        gamma_gamma: self.gamma_gamma[(j, k)],
                        gamma_phi: self.gamma_phi[(j, k)],
                    });
                }
            }
        }
        rows
    }

    /// Keep the lowest `levels` eigenstates.
    pub fn truncated(&self, levels: usize) -> Self {
        let l = levels.min(self.dim());
        DressedRates {
            energies: self.energies[..l].to_vec(),
            phi: self.phi[..l].to_vec(),
            gamma_phi: self.gamma_phi.view((0, 0), (l, l)).into_owned(),
            gamma_kappa: self.gamma_kappa.view((0, 0), (l, l)).into_owned(),
            gamma_gamma: self.gamma_gamma.view((0, 0), (l, l)).into_owned(),
        }
    }
}

/// Rates from matrix elements of the bath operators between eigenstates,
/// weighted by the noise density at the transition frequency.
pub fn dressed_rates(es: &EigenSystem, spec: &LindbladSpec) -> Result<DressedRates> {
    spec.validate()?;
    let b = bath_ops(&es.layout)?;
    let x = es.to_eigenbasis(&b.x);
    let sx = es.to_eigenbasis(&b.sx);
    let sz = es.to_eigenbasis(&b.sz);
    let d = es.len();
    let e = &es.values;
    let phi0 = (spec.gamma_phi_at(0.0) / 2.0).sqrt();
    let phi = (0..d).map(|j| phi0 * sz[(j, j)].re).collect();
    let mut gp = DMatrix::zeros(d, d);
    let mut gk = DMatrix::zeros(d, d);
    let mut gg = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            if j == k {
                continue;
            }
            let delta = e[k] - e[j];
            gp[(j, k)] = spec.gamma_phi_at(delta) / 2.0 * sz[(j, k)].norm_sqr();
            gk[(j, k)] = spec.kappa_at(delta) * x[(j, k)].norm_sqr();
            gg[(j, k)] = spec.gamma_at(delta) * sx[(j, k)].norm_sqr();
        }
    }
    Ok(DressedRates { energies: e.clone(), phi, gamma_phi: gp, gamma_kappa: gk, gamma_gamma: gg })
}

/// Dissipative part of the dressed generator, rho in the eigenbasis.
pub fn dressed_dissipator(rho: &CMat, rates: &DressedRates) -> CMat {
    dressed_terms(rho, rates, false)
}

fn dressed_terms(rho: &CMat, rates: &DressedRates, coherent: bool) -> CMat {
    let d = rates.dim();
    let e = &rates.energies;
    let total = &rates.gamma_phi + &rates.gamma_kappa + &rates.gamma_gamma;
    // outgoing rate of each level: column sums
    let out: Vec<f64> = total.column_iter().map(|col| col.sum()).collect();
    let mut res = rho.clone();
    // column-major: entry (j, k) sits at k * d + j
    for (k, col) in res.as_mut_slice().chunks_mut(d).enumerate() {
        for (j, v) in col.iter_mut().enumerate() {
            let dp = rates.phi[j] - rates.phi[k];
            let w = if coherent { e[j] - e[k] } else { 0.0 };
            *v *= C64::new(-(out[j] + out[k]) / 2.0 - dp * dp / 2.0, -w);
        }
    }
    for k in 0..d {
        let p = rho[(k, k)];
        for (j, r) in total.column(k).iter().enumerate() {
            if *r != 0.0 {
                res[(j, j)] += p * *r;
            }
        }
    }
    res
}

/// Full dressed generator: diagonal Hamiltonian plus the dressed dissipators.
pub fn dressed_lindblad_rhs(rho: &CMat, es: &EigenSystem, rates: &DressedRates) -> Result<CMat> {
    if rates.dim() != es.len() {
        return Err(Error::LayoutMismatch("rates and eigensystem differ in dimension".into()));
    }
    check_density(es.len(), rho)?;
    Ok(dressed_rhs_unchecked(rho, rates))
}

fn dressed_rhs_unchecked(rho: &CMat, rates: &DressedRates) -> CMat {
    dressed_terms(rho, rates, true)
}

/// Column-stacked superoperator of a linear map on d x d matrices.
pub fn superoperator(dim: usize, map: impl Fn(&CMat) -> CMat) -> CMat {
    let n = dim * dim;
    let mut l = CMat::zeros(n, n);
    let mut e = CMat::zeros(dim, dim);
    for col in 0..n {
        let (r, cc) = (col % dim, col / dim);
        e[(r, cc)] = c(1.0);
        let img = map(&e);
        e[(r, cc)] = c(0.0);
        for (i, z) in img.iter().enumerate() {
            l[(i, col)] = *z;
        }
    }
    l
}

pub fn standard_generator(h: &COperator, spec: &LindbladSpec) -> Result<CMat> {
    spec.validate()?;
    let b = bath_ops(&h.layout)?;
    Ok(superoperator(h.dim(), |r| standard_rhs_unchecked(r, &h.matrix, &b, spec)))
}

pub fn dressed_generator(rates: &DressedRates) -> CMat {
    superoperator(rates.dim(), |r| dressed_rhs_unchecked(r, rates))
}

/// Null vector of the vectorised generator via SVD.
pub fn steady_state(generator: &CMat) -> Result<CMat> {
    let n = generator.nrows();
    let dim = (n as f64).sqrt().round() as usize;
    if dim * dim != n || generator.ncols() != n {
        return Err(Error::InvalidInput("generator is not a square superoperator".into()));
    }
    let svd = generator.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numeric("SVD did not return right vectors".into()))?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let second = if n > 1 { svd.singular_values[idx[1]] } else { f64::INFINITY };
    if second <= 1e-10 {
        return Err(Error::NonUniqueSteadyState { sigma: second });
    }
    let row = vt.row(idx[0]);
    let mut rho = CMat::from_fn(dim, dim, |r, cc| row[cc * dim + r].conj());
    let tr = rho.trace();
    if tr.norm() < 1e-14 {
        return Err(Error::Numeric("steady-state null vector is traceless".into()));
    }
    rho /= tr;
    let rho = (&rho + rho.adjoint()) * c(0.5);
    let v = CMat::from_column_slice(n, 1, rho.as_slice());
    let resid = linalg::max_abs(&(generator * v));
    if resid > 1e-9 {
        return Err(Error::Numeric(format!("steady-state residual {resid:e}")));
    }
    Ok(rho)
}

/// Fixed-step RK4 of a density matrix. `max_scale` is the largest rate or frequency in the
/// generator; the step must not exceed 1 / (20 max_scale). `observe` sees every grid point.
pub fn evolve_rk4(
    rho0: &CMat,
    grid: &TimeGrid,
    max_scale: f64,
    rhs: impl Fn(f64, &CMat) -> CMat,
    mut observe: impl FnMut(f64, &CMat),
) -> Result<CMat> {
    let dt = grid.dt();
    if max_scale > 0.0 {
        let max = 1.0 / (20.0 * max_scale);
        if dt > max * (1.0 + 1e-12) {
            return Err(Error::StepTooCoarse { dt, max });
        }
    }
    let mut rho = rho0.clone();
    let mut tmp = rho0.clone();
    observe(grid.t0, &rho);
    let h = c(dt);
    for s in 0..grid.n_steps {
        let t = grid.t0 + s as f64 * dt;
        let k1 = rhs(t, &rho);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, &k1, h * 0.5);
        let k2 = rhs(t + dt / 2.0, &tmp);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, &k2, h * 0.5);
        let k3 = rhs(t + dt / 2.0, &tmp);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, &k3, h);
        let k4 = rhs(t + dt, &tmp);
        add_scaled(&mut rho, &k1, h / 6.0);
        add_scaled(&mut rho, &k2, h / 3.0);
        add_scaled(&mut rho, &k3, h / 3.0);
        add_scaled(&mut rho, &k4, h / 6.0);
        observe(t + dt, &rho);
    }
    Ok(rho)
}

fn add_scaled(dst: &mut CMat, src: &CMat, s: C64) {
    dst.zip_apply(src, |a, b| *a += b * s);
}

/// Smallest step count on [0, duration] that satisfies the RK4 step rule.
pub fn rk4_grid(duration: f64, max_scale: f64) -> Result<TimeGrid> {
    let n = ((duration * 20.0 * max_scale).ceil() as usize).max(1);
    TimeGrid::new(0.0, duration, n)
}

/// Trace distance (1/2) ||a - b||_1 of two Hermitian matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    let (vals, _) = linalg::eigh(&(a - b));
    vals.iter().map(|v| v.abs()).sum::<f64>() / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputChannelParams {
    pub eps_c: f64,
    pub eps_0: f64,
    pub v: f64,
    /// Scale of the resonator momentum operator.
    #[serde(default = "one")]
    pub p0: f64,
}

impl Default for OutputChannelParams {
    fn default() -> Self {
        Self { eps_c: 1.0, eps_0: 1.0, v: 1.0, p0: 1.0 }
    }
}

impl OutputChannelParams {
    /// eps_c^2 / (8 pi^2 eps_0 v) in units with hbar = 1.
    pub fn prefactor(&self) -> f64 {
        self.eps_c * self.eps_c / (8.0 * PI * PI * self.eps_0 * self.v)
    }
    fn validate(&self) -> Result<()> {
        if !(self.eps_c > 0.0 && self.eps_0 > 0.0 && self.v > 0.0 && self.p0 > 0.0) {
            return Err(Error::InvalidInput("output channel parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Positive-frequency output operator built from downward eigenstate transitions.
#[derive(Clone, Debug)]
pub struct EmissionOperator {
    /// Matrix in the eigenbasis (strictly upper triangular).
    pub eigen: CMat,
    /// Same operator in the product basis.
    pub lab: COperator,
    pub prefactor: f64,
    vectors: CMat,
}

impl EmissionOperator {
    /// Output photon flux for rho given in the eigenbasis.
    pub fn flux_eigen(&self, rho: &CMat) -> f64 {
        let m = &self.eigen;
        (m.adjoint() * m * rho).trace().re * self.prefactor
    }

    /// Output photon flux for rho given in the product basis.
    pub fn flux(&self, rho: &CMat) -> f64 {
        let r = self.vectors.adjoint() * rho * &self.vectors;
        self.flux_eigen(&r)
    }
}

pub fn output_emission_operator(es: &EigenSystem, params: &OutputChannelParams) -> Result<EmissionOperator> {
    params.validate()?;
    let b = bath_ops(&es.layout)?;
    // P = -i P0 (a - a^dag)
    let p = (&b.a - b.a.adjoint()) * (-I * params.p0);
    let pe = es.to_eigenbasis(&p);
    let d = es.len();
    let mut m = CMat::zeros(d, d);
    for j in 0..d {
        for k in (j + 1)..d {
            m[(j, k)] = -I * (es.values[k] - es.values[j]) * pe[(j, k)];
        }
    }
    let lab = COperator::new(&es.layout, &es.vectors * &m * es.vectors.adjoint())?;
    Ok(EmissionOperator { eigen: m, lab, prefactor: params.prefactor(), vectors: es.vectors.clone() })
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulatedEmission {
    pub times: Vec<f64>,
    pub flux: Vec<f64>,
    pub mean_flux: f64,
    /// Flux of the undriven steady state (the dressed ground state, zero at T = 0).
    pub baseline: f64,
}

/// Coupling modulated as g0 + dg sin(w_mod t). Rates and the emission operator are
/// frozen at g0; the Hamiltonian follows g(t). Works in the lowest `levels`
/// eigenstates of the g0 system, starting from its ground state.
pub fn modulated_coupling_evolution(
    es: &EigenSystem,
    dg: f64,
    omega_mod: f64,
    grid: &TimeGrid,
    spec: &LindbladSpec,
    levels: usize,
) -> Result<ModulatedEmission> {
    let b = bath_ops(&es.layout)?;
    let l = levels.clamp(1, es.len());
    let rates = dressed_rates(es, spec)?.truncated(l);
    let emission = output_emission_operator(es, &OutputChannelParams::default())?;
    let m = emission.eigen.view((0, 0), (l, l)).into_owned();
    let v = es.to_eigenbasis(&(&b.sx * &b.x)).view((0, 0), (l, l)).into_owned();
    let e0 = CMat::from_diagonal(&nalgebra::DVector::from_iterator(l, rates.energies.iter().map(|&e| c(e))));

    if omega_mod > 0.0 {
        let max = 2.0 * PI / omega_mod / 50.0;
        if grid.dt() > max * (1.0 + 1e-12) {
            return Err(Error::StepTooCoarse { dt: grid.dt(), max });
        }
    }
    let scale = rates.max_scale() + dg.abs() * linalg::max_abs(&v);
    let mdm = m.adjoint() * &m;
    let mut times = Vec::with_capacity(grid.n_steps + 1);
    let mut flux = Vec::with_capacity(grid.n_steps + 1);
    let mut rho0 = CMat::zeros(l, l);
    rho0[(0, 0)] = c(1.0);
    let rhs = |t: f64, r: &CMat| {
        let h = &e0 + &v * c(dg * (omega_mod * t).sin());
        (&h * r - r * &h) * (-I) + dressed_dissipator(r, &rates)
    };
    evolve_rk4(&rho0, grid, scale, rhs, |t, r| {
        times.push(t);
        flux.push((&mdm * r).trace().re * emission.prefactor);
    })?;
    let mean_flux = flux.iter().sum::<f64>() / flux.len() as f64;
    Ok(ModulatedEmission { times, flux, mean_flux, baseline: 0.0 })
}

/// Expectation of an operator given in the product basis for rho in the eigenbasis.
pub fn expectation_eigen(es: &EigenSystem, op: &CMat, rho: &CMat) -> C64 {
    (es.to_eigenbasis(op) * rho).trace()
}
