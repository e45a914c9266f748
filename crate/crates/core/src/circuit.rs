//! Coupling-strength calculators for superconducting, magnonic and molecular
//! platforms, the U figure of merit, and recomputation of tabulated experiments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054571817e-34;
pub const PLANCK: f64 = 6.62607015e-34;
pub const E_CHARGE: f64 = 1.602176634e-19;
pub const MU_0: f64 = 1.25663706212e-6;
pub const EPS_0: f64 = 8.8541878128e-12;
pub const K_B: f64 = 1.380649e-23;
pub const ALPHA: f64 = 7.2973525693e-3;
pub const Z_VAC: f64 = 376.730313668;
pub const PHI_0: f64 = PLANCK / (2.0 * E_CHARGE);
/// Electron gyromagnetic ratio in rad/s/T (2 pi x 28 GHz/T).
pub const GAMMA_E: f64 = 2.0 * PI * 28e9;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
    }
}

/// Ground-state r.m.s. voltage sqrt(hbar w / 2C).
pub fn vrms_from_capacitance(omega_r: f64, c_r: f64) -> Result<f64> {
    positive("omega_r", omega_r)?;
    positive("C_r", c_r)?;
    Ok((HBAR * omega_r / (2.0 * c_r)).sqrt())
}

/// w sqrt(hbar Z / 2).
pub fn vrms_from_impedance(omega_r: f64, z: f64) -> Result<f64> {
    positive("omega_r", omega_r)?;
    positive("Z", z)?;
    Ok(omega_r * (HBAR * z / 2.0).sqrt())
}

/// Ground-state r.m.s. current sqrt(hbar w / 2L).
pub fn irms_from_inductance(omega_r: f64, l_r: f64) -> Result<f64> {
    positive("omega_r", omega_r)?;
    positive("L_r", l_r)?;
    Ok((HBAR * omega_r / (2.0 * l_r)).sqrt())
}

/// w sqrt(hbar / 2Z).
pub fn irms_from_impedance(omega_r: f64, z: f64) -> Result<f64> {
    positive("omega_r", omega_r)?;
    positive("Z", z)?;
    Ok(omega_r * (HBAR / (2.0 * z)).sqrt())
}

/// Reduced coupling plus validity notes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingEstimate {
    pub g_over_omega: f64,
    /// Coupling above the resonator frequency.
    pub dsc_reachable: bool,
    pub warnings: Vec<String>,
}

impl CouplingEstimate {
    fn new(g_over_omega: f64, warnings: Vec<String>) -> Self {
        Self { g_over_omega, dsc_reachable: g_over_omega > 1.0, warnings }
    }
}

/// Transmon capacitively coupled to a resonator of impedance Z.
pub fn transmon_capacitive(e_j: f64, e_c: f64, z: f64, c_g: f64, c_q: f64) -> Result<CouplingEstimate> {
    for (n, v) in [("E_J", e_j), ("E_C", e_c), ("Z", z), ("C_g", c_g), ("C_q", c_q)] {
        positive(n, v)?;
    }
    let r = (2.0 * PI.powi(3)).sqrt().recip()
        * (e_j / (8.0 * e_c)).powf(0.25)
        * (z / Z_VAC).sqrt()
        * (c_g / (c_g + c_q))
        * ALPHA.sqrt();
    let mut w = Vec::new();
    if e_j / e_c < 20.0 {
        w.push(format!("E_J/E_C = {:.3} is below the transmon regime (>= 20)", e_j / e_c));
    }
    Ok(CouplingEstimate::new(r, w))
}

/// Lumped-circuit bound C_g / sqrt(C_r (C_q + C_g) + C_g (C_g + C_q)), always below 1.
pub fn capacitive_bound(c_g: f64, c_q: f64, c_r: f64) -> Result<f64> {
    for (n, v) in [("C_g", c_g), ("C_q", c_q), ("C_r", c_r)] {
        positive(n, v)?;
    }
    Ok(c_g / (c_r * (c_q + c_g) + c_g * (c_g + c_q)).sqrt())
}

/// Cooper-pair box, impedance form.
pub fn cpb_capacitive_impedance(z: f64, c_g: f64, c_j: f64) -> Result<CouplingEstimate> {
    positive("Z", z)?;
    positive("C_g", c_g)?;
    positive("C_J", c_j)?;
    let r = (8.0 * PI).sqrt().recip() * (z / Z_VAC).sqrt() * (c_g / (c_g + c_j)) * ALPHA.sqrt();
    Ok(CouplingEstimate::new(r, Vec::new()))
}

/// Cooper-pair box, lumped-circuit form. Zero coupling capacitance gives zero.
pub fn cpb_capacitive_circuit(c_g: f64, c_q: f64, c_r: f64, e_c: f64, e_j: f64) -> Result<CouplingEstimate> {
    for (n, v) in [("C_q", c_q), ("C_r", c_r), ("E_C", e_c), ("E_J", e_j)] {
        positive(n, v)?;
    }
    if !(c_g >= 0.0) {
        return Err(Error::InvalidInput("C_g must be non-negative".into()));
    }
    let r = 2.0 * c_g / (c_r * (c_q + c_g) + c_g * (c_g + c_q)).sqrt() * (e_c / e_j).sqrt();
    let mut w = Vec::new();
    if e_c < 10.0 * e_j {
        w.push(format!("E_C/E_J = {:.3}; the charge regime needs E_C >> E_J", e_c / e_j));
    }
    Ok(CouplingEstimate::new(r, w))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GalvanicCoupling {
    /// Flux qubit sharing a linear inductance; phase matrix element typically ~1e-2.
    LinearInductor { phi01: f64, z: f64 },
    /// Flux qubit sharing one of its junctions; phase matrix element ~1.
    SharedJunction { phi01: f64, z: f64 },
    /// Charge qubit embedded in an LC resonator.
    ChargeEmbedded { c_r: f64, c_q: f64, l_r: f64, q01: f64 },
    /// Transmon galvanically attached to a transmission-line resonator.
    TransmonResonator { e_c: f64, e_j: f64, l_r: f64, z: f64 },
}

/// Reduced coupling for a galvanic configuration. Energies in joules, circuit elements in SI.
pub fn coupling_galvanic(kind: &GalvanicCoupling) -> Result<CouplingEstimate> {
    match *kind {
        GalvanicCoupling::LinearInductor { phi01, z } | GalvanicCoupling::SharedJunction { phi01, z } => {
            positive("Z", z)?;
            let r = (Z_VAC / (PI * z)).sqrt() / 8.0 / ALPHA.sqrt() * phi01.abs();
            Ok(CouplingEstimate::new(r, Vec::new()))
        }
        GalvanicCoupling::ChargeEmbedded { c_r, c_q, l_r, q01 } => {
            for (n, v) in [("C_r", c_r), ("C_q", c_q), ("L_r", l_r)] {
                positive(n, v)?;
            }
            let c_p = 1.0 / (1.0 / c_r + 1.0 / c_q);
            let z_p = (l_r / c_p).sqrt();
            let r = c_r / (c_q + c_r) * q01.abs() * (2.0 * PI * z_p / Z_VAC).sqrt() * ALPHA.sqrt();
            Ok(CouplingEstimate::new(r, Vec::new()))
        }
        GalvanicCoupling::TransmonResonator { e_c, e_j, l_r, z } => {
            for (n, v) in [("E_C", e_c), ("E_J", e_j), ("L_r", l_r), ("Z", z)] {
                positive(n, v)?;
            }
            let e_l = inductive_energy(l_r)?;
            let r = (8.0 * PI).sqrt().recip()
                * (e_c / (8.0 * (e_j + e_l))).powf(0.25)
                * (Z_VAC / z).sqrt()
                / ALPHA.sqrt();
            let mut w = Vec::new();
            if e_j / e_c < 20.0 {
                w.push(format!("E_J/E_C = {:.3} is below the transmon regime", e_j / e_c));
            }
            Ok(CouplingEstimate::new(r, w))
        }
    }
}

/// Renormalised frequency and impedance of an LC resonator loaded by a qubit capacitance.
pub fn loaded_resonator(c_r: f64, c_q: f64, l_r: f64) -> Result<(f64, f64)> {
    for (n, v) in [("C_r", c_r), ("C_q", c_q), ("L_r", l_r)] {
        positive(n, v)?;
    }
    let c_p = 1.0 / (1.0 / c_r + 1.0 / c_q);
    Ok(((l_r * c_p).sqrt().recip(), (l_r / c_p).sqrt()))
}

/// (Phi_0 / 2 pi)^2 / L.
pub fn inductive_energy(l: f64) -> Result<f64> {
    positive("L", l)?;
    Ok((PHI_0 / (2.0 * PI)).powi(2) / l)
}

/// Transverse and longitudinal galvanic couplings (rad/s) from phase matrix elements.
pub fn galvanic_xz(omega_r: f64, l_r: f64, phi01: f64, phi00: f64, phi11: f64) -> Result<(f64, f64)> {
    let i = irms_from_inductance(omega_r, l_r)?;
    let flux = PHI_0 / (2.0 * PI);
    Ok((i * flux * phi01 / HBAR, i * 0.5 * flux * (phi11 - phi00) / HBAR))
}

/// Mutual-inductance coupling L I_p I_rms / hbar in rad/s.
pub fn mutual_inductance_coupling(l: f64, i_p: f64, omega_r: f64, z: f64) -> Result<f64> {
    positive("L", l)?;
    positive("I_p", i_p)?;
    Ok(l * i_p * irms_from_impedance(omega_r, z)? / HBAR)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Inductances {
    pub geometric: f64,
    pub kinetic: f64,
    pub josephson: f64,
}

/// Geometric inductance of a wire of length l, width w, thickness t.
pub fn geometric_inductance(l: f64, w: f64, t: f64) -> Result<f64> {
    for (n, v) in [("l", l), ("w", w), ("t", t)] {
        positive(n, v)?;
    }
    Ok(MU_0 * l / (2.0 * PI) * ((2.0 * l / (w + t)).ln() + 0.5))
}

/// Dirty-limit kinetic inductance from the London depth.
pub fn kinetic_inductance(lambda_l: f64, l: f64, w: f64, t: f64) -> Result<f64> {
    for (n, v) in [("lambda_L", lambda_l), ("l", l), ("w", w), ("t", t)] {
        positive(n, v)?;
    }
    Ok(MU_0 * lambda_l * lambda_l * l / (w * t))
}

/// Kinetic inductance 0.14 hbar R_n / (k_B T_c).
pub fn kinetic_inductance_rn(r_n: f64, t_c: f64) -> Result<f64> {
    positive("R_n", r_n)?;
    positive("T_c", t_c)?;
    Ok(0.14 * HBAR * r_n / (K_B * t_c))
}

pub fn josephson_inductance(i_c: f64) -> Result<f64> {
    positive("I_C", i_c)?;
    Ok(PHI_0 / (2.0 * PI * i_c))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireGeometry {
    pub l: f64,
    pub w: f64,
    pub t: f64,
    pub lambda_l: f64,
    pub i_c: f64,
}

pub fn inductances(g: &WireGeometry) -> Result<Inductances> {
    Ok(Inductances {
        geometric: geometric_inductance(g.l, g.w, g.t)?,
        kinetic: kinetic_inductance(g.lambda_l, g.l, g.w, g.t)?,
        josephson: josephson_inductance(g.i_c)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnonParams {
    pub eta: f64,
    pub omega_c: f64,
    pub v_c: f64,
    pub n_spins: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeParams {
    pub d0: f64,
    pub n: f64,
    pub omega_c: f64,
    pub v_c: f64,
}

/// Single-emitter and collective couplings in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CollectiveCoupling {
    pub single: f64,
    pub collective: f64,
    pub g_over_omega: f64,
}

pub fn coupling_magnon(p: &MagnonParams) -> Result<CollectiveCoupling> {
    positive("omega_c", p.omega_c)?;
    positive("V_c", p.v_c)?;
    positive("N", p.n_spins)?;
    if !(p.eta > 0.0 && p.eta <= 1.0) {
        return Err(Error::InvalidInput(format!("overlap factor must lie in (0, 1], got {}", p.eta)));
    }
    let b_rms = (HBAR * p.omega_c * MU_0 / (2.0 * p.v_c)).sqrt();
    let g0 = p.eta * GAMMA_E * b_rms;
    let g = g0 * p.n_spins.sqrt();
    Ok(CollectiveCoupling { single: g0, collective: g, g_over_omega: g / p.omega_c })
}

pub fn coupling_molecule(p: &MoleculeParams) -> Result<CollectiveCoupling> {
    positive("d0", p.d0)?;
    positive("N", p.n)?;
    positive("omega_c", p.omega_c)?;
    positive("V_c", p.v_c)?;
    let e_rms = (HBAR * p.omega_c / (2.0 * EPS_0 * p.v_c)).sqrt();
    let g0 = p.d0 * e_rms / HBAR;
    let g = g0 * p.n.sqrt();
    Ok(CollectiveCoupling { single: g0, collective: g, g_over_omega: g / p.omega_c })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UConvention {
    /// Cooperativity 4 g^2 / (kappa gamma).
    C4,
    /// Cooperativity g^2 / (kappa gamma).
    C1,
}

impl UConvention {
    fn factor(self) -> f64 {
        match self {
            UConvention::C4 => 4.0,
            UConvention::C1 => 1.0,
        }
    }
}

/// U = sqrt(C g / w).
pub fn figure_of_merit_u(g: f64, omega: f64, kappa: f64, gamma: f64, conv: UConvention) -> Result<f64> {
    positive("kappa", kappa)?;
    positive("gamma", gamma)?;
    positive("omega", omega)?;
    let coop = conv.factor() * g * g / (kappa * gamma);
    Ok((coop * g / omega).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Qualifier {
    Exact,
    Below,
    Above,
    Approx,
}

/// A table cell, with any printed qualifier kept aside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub value: f64,
    pub qualifier: Qualifier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreqUnit {
    MHz,
    GHz,
    #[serde(rename = "meV")]
    MeV,
}

impl FreqUnit {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "MHz" => Some(FreqUnit::MHz),
            "GHz" => Some(FreqUnit::GHz),
            "meV" => Some(FreqUnit::MeV),
            _ => None,
        }
    }

    /// Angular frequency in rad/s of a value printed in this unit (f/2pi for MHz/GHz, hbar w for meV).
    pub fn to_angular(self, v: f64) -> f64 {
        match self {
            FreqUnit::MHz => 2.0 * PI * 1e6 * v,
            FreqUnit::GHz => 2.0 * PI * 1e9 * v,
            FreqUnit::MeV => v * 1e-3 * E_CHARGE / HBAR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub reference: String,
    pub platform: String,
    pub gamma: Option<Cell>,
    pub kappa: Option<Cell>,
    pub g: Cell,
    pub omega0: Cell,
    pub unit: FreqUnit,
    pub printed_g_over_omega_pct: Option<Cell>,
    pub printed_u: Option<Cell>,
    pub notes: String,
}

pub const TABLE_HEADER: [&str; 10] =
    ["ref", "platform", "gamma", "kappa", "g", "omega0", "unit", "printed_g_over_omega_pct", "printed_U", "notes"];

pub const BUNDLED_TABLE_1: &str = include_str!("../data/table1.csv");
pub const BUNDLED_TABLE_2: &str = include_str!("../data/table2.csv");

fn parse_cell(s: &str, line: usize, col: &str) -> Result<Option<Cell>> {
    let s = s.trim();
    if s.is_empty() || s == "-" {
        return Ok(None);
    }
    let (qualifier, rest) = match s.chars().next() {
        Some('<') => (Qualifier::Below, &s[1..]),
        Some('>') => (Qualifier::Above, &s[1..]),
        Some('~') => (Qualifier::Approx, &s[1..]),
        _ => (Qualifier::Exact, s),
    };
    let value: f64 = rest
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("column {col}: cannot read number from '{s}'") })?;
    if value < 0.0 {
        return Err(Error::Parse { line, msg: format!("column {col}: negative value {value}") });
    }
    Ok(Some(Cell { value, qualifier }))
}

/// Read records from CSV text with the fixed header.
pub fn ingest_table(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != TABLE_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("expected header {}", TABLE_HEADER.join(",")) });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let need = |v: Option<Cell>, col: &str| v.ok_or_else(|| Error::Parse { line, msg: format!("column {col} is required") });
        let unit = FreqUnit::parse(rec[6].trim())
            .ok_or_else(|| Error::Parse { line, msg: format!("unknown unit '{}'", &rec[6]) })?;
        out.push(ExperimentRecord {
            reference: rec[0].trim().to_string(),
            platform: rec[1].trim().to_string(),
            gamma: parse_cell(&rec[2], line, "gamma")?,
            kappa: parse_cell(&rec[3], line, "kappa")?,
            g: need(parse_cell(&rec[4], line, "g")?, "g")?,
            omega0: need(parse_cell(&rec[5], line, "omega0")?, "omega0")?,
            unit,
            printed_g_over_omega_pct: parse_cell(&rec[7], line, "printed_g_over_omega_pct")?,
            printed_u: parse_cell(&rec[8], line, "printed_U")?,
            notes: rec[9].trim().to_string(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RowReport {
    pub reference: String,
    pub g_over_omega_pct: f64,
    pub printed_g_over_omega_pct: Option<f64>,
    /// Absolute difference in percentage points.
    pub g_over_omega_abs_dev: Option<f64>,
    pub g_over_omega_rel_dev: Option<f64>,
    pub u_c1: Option<f64>,
    pub u_c4: Option<f64>,
    pub printed_u: Option<f64>,
    /// Relative deviation from the printed U under the table's convention.
    pub u_rel_dev: Option<f64>,
    /// Convention whose U lies closest to the printed value.
    pub u_best_convention: Option<UConvention>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableReport {
    pub convention: UConvention,
    pub rows: Vec<RowReport>,
    /// Rows whose printed U is closer to each convention.
    pub rows_matching_c1: usize,
    pub rows_matching_c4: usize,
    pub convention_note: String,
}

/// Relative deviation above which a row is flagged.
pub const FLAG_THRESHOLD: f64 = 0.05;

/// Recompute g/w and U under both conventions, comparing U to the printed one under `convention`.
pub fn recompute_and_report(records: &[ExperimentRecord], convention: UConvention) -> Result<TableReport> {
    let mut rows = Vec::with_capacity(records.len());
    let (mut n1, mut n4) = (0, 0);
    for r in records {
        let g = r.unit.to_angular(r.g.value);
        let w = r.unit.to_angular(r.omega0.value);
        positive("omega0", w)?;
        let ratio = g / w;
        let pct = 100.0 * ratio;
        let printed_pct = r.printed_g_over_omega_pct.map(|c| c.value);
        let abs_dev = printed_pct.map(|p| (pct - p).abs());
        let rel_dev = printed_pct.map(|p| (pct - p).abs() / p);
        let rates = match (r.kappa, r.gamma) {
            (Some(k), Some(gm)) if k.value > 0.0 && gm.value > 0.0 => Some((r.unit.to_angular(k.value), r.unit.to_angular(gm.value))),
            _ => None,
        };
        let u_c1 = rates.map(|(k, gm)| figure_of_merit_u(g, w, k, gm, UConvention::C1)).transpose()?;
        let u_c4 = rates.map(|(k, gm)| figure_of_merit_u(g, w, k, gm, UConvention::C4)).transpose()?;
        let printed_u = r.printed_u.map(|c| c.value);
        let mut flags = Vec::new();
        let mut u_rel_dev = None;
        let mut best = None;
        if let (Some(pu), Some(a), Some(b)) = (printed_u, u_c1, u_c4) {
            let d1 = (a - pu).abs() / pu;
            let d4 = (b - pu).abs() / pu;
            best = Some(if d1 <= d4 { UConvention::C1 } else { UConvention::C4 });
            if d1 <= d4 {
                n1 += 1;
            } else {
                n4 += 1;
            }
            let d = match convention {
                UConvention::C1 => d1,
                UConvention::C4 => d4,
            };
            u_rel_dev = Some(d);
            if d > FLAG_THRESHOLD {
                flags.push(format!("U deviates by {:.1}% under {:?}", 100.0 * d, convention));
            }
            if best != Some(convention) {
                flags.push("printed U follows the other cooperativity convention".into());
            }
        }
        if let Some(d) = rel_dev {
            if d > FLAG_THRESHOLD {
                flags.push(format!("g/omega deviates by {:.1}% (relative)", 100.0 * d));
            }
        }
        let inexact = [r.gamma, r.kappa, r.printed_u].iter().flatten().any(|c| c.qualifier != Qualifier::Exact);
        if inexact {
            flags.push("bound or approximate printed value".into());
        }
        rows.push(RowReport {
            reference: r.reference.clone(),
            g_over_omega_pct: pct,
            printed_g_over_omega_pct: printed_pct,
            g_over_omega_abs_dev: abs_dev,
            g_over_omega_rel_dev: rel_dev,
            u_c1,
            u_c4,
            printed_u,
            u_rel_dev,
            u_best_convention: best,
            flags,
        });
    }
    let convention_note = format!(
        "U compared under {:?}; printed values closer to C = g^2/(kappa gamma) in {} rows and to C = 4 g^2/(kappa gamma) in {} rows",
        convention, n1, n4
    );
    Ok(TableReport { convention, rows, rows_matching_c1: n1, rows_matching_c4: n4, convention_note })
}
