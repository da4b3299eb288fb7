//! Scenario configs, built-in scenarios and the verification pipeline (f64).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{
    validate_commuting_sectors, virasoro_weight, Coupling, DriveEnvelope, DriveShape, EffectiveCoupling, RealProfile,
    RootData, SectorSignature, Sigma, DEFAULT_TRUNCATION,
};
use crate::error::{Error, Result};
use crate::generator::{chain_evolve, chain_evolve_hw, disentangle, invert_series, GeneratorParams};
use crate::krylov::{complexity_series, ComplexitySeries, MultiSectorWavefunction, SectorState};
use crate::linalg::CMatrix;
use crate::qsl::{qsl_series, saturation_scan, QSLReport, SaturationSummary};
use crate::reference::{build_rep, direct_evolve, direct_evolve_lab, evolve_hermitian, matrix_identity_defect};
use crate::scalar::c;
use crate::weinorman::{closed_form_rotating, dragged_complexity};

pub const DEFAULT_POINTS: usize = 2001;
/// Times per scenario at which the fictitious chain is compared with φ_n(t).
pub const CHAIN_SAMPLES: usize = 20;

fn default_points() -> usize {
    DEFAULT_POINTS
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirasoroSpec {
    pub h: f64,
    pub c: f64,
    pub k: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSpec {
    pub sigma: i64,
    #[serde(default)]
    pub lowest_weight: Option<f64>,
    #[serde(default)]
    pub dim: Option<usize>,
    /// Alternative to `lowest_weight` for σ = −1: λ = h/k + c(k²−1)/(24k).
    #[serde(default)]
    pub virasoro: Option<VirasoroSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Zero,
    Constant { value: f64 },
    Sech { amplitude: f64, width: f64 },
    Cosine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    QuenchFrequency { omega0: f64, omega1: f64, tau: f64 },
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveSpec {
    ConstantPhase { amplitude: ProfileSpec, phase: f64 },
    SechPulse { omega0: f64, width: f64 },
    Quench { omega0: f64, omega1: f64, tau: f64 },
    RotatingField {
        theta0: f64,
        omega: f64,
        #[serde(default = "one")]
        h: f64,
    },
    DraggedCosine { x0: f64, omega: f64, m: f64 },
    /// Complex samples as [re, im] pairs.
    Tabulated { times: Vec<f64>, values: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootSpec {
    pub cartan_matrix: Vec<Vec<i64>>,
    pub selected_roots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_end: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub integration: f64,
    pub chain_integration: f64,
    pub unitarity: f64,
    pub normalization: f64,
    pub complexity_sum: f64,
    pub qsl_identity: f64,
    pub gap_floor: f64,
    pub saturation: f64,
    pub chain: f64,
    pub round_trip: f64,
    pub matrix_identity: f64,
    pub oracle: f64,
    pub oracle_dt: f64,
    pub closed_form: f64,
    pub frozen: f64,
    pub long_time: f64,
    pub poisson: f64,
    pub joint: f64,
    pub additive: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            integration: 1e-12,
            chain_integration: 1e-12,
            unitarity: 1e-9,
            normalization: 1e-9,
            complexity_sum: 1e-10,
            qsl_identity: 1e-8,
            gap_floor: 1e-9,
            saturation: 1e-6,
            chain: 1e-8,
            round_trip: 1e-10,
            matrix_identity: 1e-9,
            oracle: 1e-6,
            oracle_dt: 1e-3,
            closed_form: 1e-8,
            frozen: 1e-10,
            long_time: 1e-6,
            poisson: 1e-12,
            joint: 1e-8,
            additive: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Wavefunction,
    Probabilities,
    Complexity,
    Qsl,
    Generator,
    OracleCheck,
}

fn all_outputs() -> Vec<OutputKind> {
    vec![
        OutputKind::Wavefunction,
        OutputKind::Probabilities,
        OutputKind::Complexity,
        OutputKind::Qsl,
        OutputKind::Generator,
        OutputKind::OracleCheck,
    ]
}

/// Optional closed-form reference checked by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClosedFormSpec {
    /// K(t) = (ω₁²−ω₀²)²/(8ω₀²ω₁²)·sin²ω₁t before τ, frozen afterwards.
    Quench { omega0: f64, omega1: f64, tau: f64 },
    /// z(t) of the tilted rotating field with unit strength.
    Rotating { theta0: f64, omega: f64 },
    /// K(t) of the dragged oscillator plus Poisson mean = variance.
    Dragged { x0: f64, omega: f64, m: f64 },
    /// K at the last grid time.
    LongTimeComplexity { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<SectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cartan_row: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sectors: Option<Vec<SectorSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drives: Option<Vec<DriveSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roots: Option<RootSpec>,
    #[serde(default)]
    pub cartan_drives: Vec<ProfileSpec>,
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "all_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedFormSpec>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl From<&ProfileSpec> for RealProfile<f64> {
    fn from(p: &ProfileSpec) -> Self {
        match p.clone() {
            ProfileSpec::Zero => RealProfile::Zero,
            ProfileSpec::Constant { value } => RealProfile::Constant { value },
            ProfileSpec::Sech { amplitude, width } => RealProfile::Sech { amplitude, width },
            ProfileSpec::Cosine { amplitude, frequency, phase } => RealProfile::Cosine { amplitude, frequency, phase },
            ProfileSpec::QuenchFrequency { omega0, omega1, tau } => RealProfile::QuenchFrequency { omega0, omega1, tau },
            ProfileSpec::Tabulated { times, values } => RealProfile::Tabulated { times, values },
        }
    }
}

impl From<&DriveSpec> for DriveShape<f64> {
    fn from(d: &DriveSpec) -> Self {
        match d.clone() {
            DriveSpec::ConstantPhase { amplitude, phase } => DriveShape::ConstantPhase {
                amplitude: (&amplitude).into(),
                phase,
            },
            DriveSpec::SechPulse { omega0, width } => DriveShape::SechPulse { omega0, width },
            DriveSpec::Quench { omega0, omega1, tau } => DriveShape::Quench { omega0, omega1, tau },
            DriveSpec::RotatingField { theta0, omega, h } => DriveShape::RotatingField { theta0, omega, h },
            DriveSpec::DraggedCosine { x0, omega, m } => DriveShape::DraggedCosine { x0, omega, m },
            DriveSpec::Tabulated { times, values } => DriveShape::Tabulated {
                times,
                values: values.iter().map(|v| c(v[0], v[1])).collect(),
            },
        }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn build_sector(spec: &SectorSpec) -> Result<SectorSignature<f64>> {
    let sigma = Sigma::from_int(spec.sigma)?;
    let dim = spec.dim.unwrap_or(DEFAULT_TRUNCATION);
    match (&spec.virasoro, spec.lowest_weight) {
        (Some(_), Some(_)) => Err(Error::Config("give either lowest_weight or virasoro, not both".into())),
        (Some(v), None) => {
            if sigma != Sigma::NonCompact {
                return Err(Error::Config("virasoro sectors have sigma = -1".into()));
            }
            virasoro_weight(v.h, v.c, v.k, dim)
        }
        (None, lw) => {
            if sigma != Sigma::Heisenberg && lw.is_none() {
                return Err(Error::Config("lowest_weight is required for sigma = +1 or -1".into()));
            }
            SectorSignature::new(sigma, lw.unwrap_or(0.0), dim)
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub sectors: Vec<SectorSignature<f64>>,
    pub couplings: Vec<EffectiveCoupling<f64>>,
    pub roots: Option<RootData>,
    pub grid: Vec<f64>,
}

impl Scenario {
    /// Validates a config; every failure is an `Error::Config`.
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        Self::build(config).map_err(config_err)
    }

    fn build(config: ScenarioConfig) -> Result<Self> {
        if config.name.is_empty() || config.name.contains(['/', '\\']) {
            return Err(Error::Config("name must be nonempty and contain no path separators".into()));
        }
        let g = &config.grid;
        if !(g.t_end > 0.0 && g.t_end.is_finite()) || g.n_points < 2 {
            return Err(Error::Config("grid needs t_end > 0 and n_points >= 2".into()));
        }
        let grid: Vec<f64> = (0..g.n_points)
            .map(|k| g.t_end * k as f64 / (g.n_points - 1) as f64)
            .collect();
        let cartan: Vec<RealProfile<f64>> = config.cartan_drives.iter().map(Into::into).collect();
        let single = config.sector.is_some() || config.drive.is_some() || config.cartan_row.is_some();
        let multi = config.sectors.is_some() || config.drives.is_some();
        let (sectors, couplings, roots) = match (single, multi) {
            (true, false) => {
                let (Some(s), Some(d)) = (&config.sector, &config.drive) else {
                    return Err(Error::Config("single-sector scenarios need sector and drive".into()));
                };
                let sector = build_sector(s)?;
                let row = match (&config.cartan_row, &config.roots) {
                    (Some(_), Some(_)) => return Err(Error::Config("give cartan_row or roots, not both".into())),
                    (Some(r), None) => r.clone(),
                    (None, Some(rs)) => {
                        if rs.selected_roots.len() != 1 {
                            return Err(Error::Config("a single sector selects exactly one root".into()));
                        }
                        let rd = RootData::new(rs.cartan_matrix.clone(), rs.selected_roots.clone(), vec![sector.sigma])?;
                        rd.cartan_row(rs.selected_roots[0])
                    }
                    (None, None) => Vec::new(),
                };
                let env = DriveEnvelope {
                    coupling: d.into(),
                    cartan_drives: cartan.clone(),
                };
                (vec![sector], vec![EffectiveCoupling::new(env, row)?], None)
            }
            (false, true) => {
                let (Some(ss), Some(ds), Some(rs)) = (&config.sectors, &config.drives, &config.roots) else {
                    return Err(Error::Config("multi-sector scenarios need sectors, drives and roots".into()));
                };
                if ss.len() != ds.len() || ss.len() != rs.selected_roots.len() || ss.is_empty() {
                    return Err(Error::Config("sectors, drives and selected_roots must have equal nonzero length".into()));
                }
                let sectors = ss.iter().map(build_sector).collect::<Result<Vec<_>>>()?;
                let rd = RootData::new(
                    rs.cartan_matrix.clone(),
                    rs.selected_roots.clone(),
                    sectors.iter().map(|s| s.sigma).collect(),
                )?;
                let check = validate_commuting_sectors(&rd);
                if !check.commuting {
                    return Err(Error::Config(format!(
                        "selected roots do not commute: {:?}",
                        check.offending
                    )));
                }
                if cartan.len() != rd.rank() {
                    return Err(Error::Config(format!(
                        "{} Cartan drives for rank {}",
                        cartan.len(),
                        rd.rank()
                    )));
                }
                let couplings = ds
                    .iter()
                    .zip(&rs.selected_roots)
                    .map(|(d, r)| {
                        let env = DriveEnvelope {
                            coupling: d.into(),
                            cartan_drives: cartan.clone(),
                        };
                        EffectiveCoupling::new(env, rd.cartan_row(*r))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (sectors, couplings, Some(rd))
            }
            _ => {
                return Err(Error::Config(
                    "use either sector/drive/cartan_row or sectors/drives/roots".into(),
                ))
            }
        };
        Ok(Scenario {
            config,
            sectors,
            couplings,
            roots,
            grid,
        })
    }

    pub fn enabled(&self, kind: OutputKind) -> bool {
        self.config.outputs.contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SectorRun {
    pub sector: SectorSignature<f64>,
    pub series: ComplexitySeries<f64>,
    pub qsl: Vec<QSLReport<f64>>,
    pub saturation: SaturationSummary,
    pub generator: Option<Vec<GeneratorParams<f64>>>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub grid: Vec<f64>,
    pub sectors: Vec<SectorRun>,
    pub checks: Vec<Check>,
    pub oracle_deviation: Option<f64>,
    pub outputs: Vec<OutputKind>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn total_complexity(&self, i: usize) -> f64 {
        self.sectors.iter().map(|s| s.series.wavefunctions[i].complexity).sum()
    }

    pub fn max_tail(&self) -> f64 {
        self.sectors
            .iter()
            .filter(|s| s.sector.sigma != Sigma::Compact)
            .map(|s| s.series.max_tail())
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> Value {
        let last = self.grid.len() - 1;
        let sat: Vec<Value> = self
            .sectors
            .iter()
            .map(|s| {
                json!({
                    "persistent": s.saturation.persistent,
                    "saturated_points": s.saturation.saturated_points,
                    "accidental_points": s.saturation.accidental_points,
                    "accidental_compact_points": s.saturation.accidental_compact_points,
                    "unsaturated_points": s.saturation.labels.len()
                        - s.saturation.saturated_points
                        - s.saturation.accidental_compact_points,
                })
            })
            .collect();
        json!({
            "name": self.name,
            "passed": self.passed(),
            "t_end": self.grid[last],
            "n_points": self.grid.len(),
            "k_final": self.total_complexity(last),
            "saturation": if sat.len() == 1 { sat[0].clone() } else { Value::Array(sat) },
            "max_oracle_deviation": self.oracle_deviation,
            "max_truncation_tail": self.max_tail(),
            "checks": self.checks,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Overrides the integration tolerance.
    pub tol: Option<f64>,
    pub oracle: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tol: None, oracle: true }
    }
}

fn sample_indices(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    let mut v: Vec<usize> = (0..k).map(|i| ((i * (n - 1)) as f64 / (k - 1) as f64).round() as usize).collect();
    v.dedup();
    v
}

/// Probabilities of the first `keep` levels along the grid from direct evolution.
fn oracle_probabilities(
    sector: &SectorSignature<f64>,
    gamma: &EffectiveCoupling<f64>,
    grid: &[f64],
    dt: f64,
) -> Result<Vec<Vec<f64>>> {
    // Non-compact and Heisenberg chains run on twice the analysis dimension.
    let big = match sector.sigma {
        Sigma::Compact => *sector,
        _ => SectorSignature::new(sector.sigma, sector.lowest_weight, 2 * sector.dim)?,
    };
    let rep = build_rep(&big)?;
    let out = if gamma.is_piecewise_constant() {
        direct_evolve_lab(&rep, gamma, grid, 1.0 / dt)?
    } else {
        direct_evolve(&rep, gamma, grid, 1.0 / dt)?
    };
    Ok(out
        .into_iter()
        .map(|psi| psi[..sector.dim].iter().map(|x| x.norm_sqr()).collect())
        .collect())
}

fn sector_checks(
    tag: &str,
    scen: &Scenario,
    run: &SectorRun,
    tol: &Tolerances,
    chain_tol: f64,
    checks: &mut Vec<Check>,
) -> Result<()> {
    let sector = &run.sector;
    let wfs = &run.series.wavefunctions;
    let name = |s: &str| format!("{tag}{s}");
    if sector.sigma != Sigma::Heisenberg {
        let u = run
            .series
            .states
            .iter()
            .map(|s| match s {
                SectorState::Ladder(w) => w.unitarity_defect(sector.sigma),
                SectorState::Heisenberg(_) => 0.0,
            })
            .fold(0.0, f64::max);
        checks.push(Check::at_most(name("unitarity"), u, tol.unitarity));
    }
    let norm = wfs.iter().map(|w| (w.total_probability() - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most(name("normalization"), norm, tol.normalization));
    let ksum = wfs.iter().map(|w| (w.complexity - w.complexity_from_sum()).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most(name("complexity_sum"), ksum, tol.complexity_sum));

    if scen.enabled(OutputKind::Qsl) {
        let ident = run.qsl.iter().map(|r| (r.gap - r.covariance * r.covariance).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most(name("qsl_gap_identity"), ident, tol.qsl_identity));
        let neg = run.qsl.iter().map(|r| -r.gap).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::at_most(name("qsl_gap_nonnegative"), neg, tol.gap_floor));
    }

    if scen.enabled(OutputKind::Generator) {
        let idx = sample_indices(scen.grid.len(), CHAIN_SAMPLES);
        let mut chain_dev: f64 = 0.0;
        match sector.sigma {
            Sigma::Heisenberg => {
                for &i in &idx {
                    let SectorState::Heisenberg(d) = &run.series.states[i] else { unreachable!() };
                    let ch = chain_evolve_hw(d, sector.dim, &[0.0, 1.0], chain_tol)?;
                    for (p, f) in ch[1].psi.iter().zip(&wfs[i].amplitudes) {
                        chain_dev = chain_dev.max((p - f).norm());
                    }
                }
            }
            _ => {
                let params = run.generator.as_ref().expect("generator computed");
                let mut rt: f64 = 0.0;
                let mut mi: f64 = 0.0;
                for (p, s) in params.iter().zip(&run.series.states) {
                    let SectorState::Ladder(w) = s else { unreachable!() };
                    let back = disentangle(p, sector.sigma)?;
                    rt = rt.max((back.a - w.a).norm()).max((back.b - w.b).norm());
                    if let Some(d) = matrix_identity_defect(sector.sigma, p, w) {
                        mi = mi.max(d);
                    }
                }
                checks.push(Check::at_most(name("generator_round_trip"), rt, tol.round_trip));
                checks.push(Check::at_most(name("matrix_identity"), mi, tol.matrix_identity));
                for &i in &idx {
                    let ch = chain_evolve(sector, &params[i], &[0.0, 1.0], chain_tol)?;
                    for (p, f) in ch[1].psi.iter().zip(&wfs[i].amplitudes) {
                        chain_dev = chain_dev.max((p - f).norm());
                    }
                }
            }
        }
        checks.push(Check::at_most(name("chain_equivalence"), chain_dev, tol.chain));
    }
    Ok(())
}

fn closed_form_checks(scen: &Scenario, report: &RunReport, tol: &Tolerances, checks: &mut Vec<Check>) -> Result<()> {
    let Some(spec) = &scen.config.closed_form else {
        return Ok(());
    };
    let run = &report.sectors[0];
    let wfs = &run.series.wavefunctions;
    match *spec {
        ClosedFormSpec::Quench { omega0, omega1, tau } => {
            let amp = (omega1 * omega1 - omega0 * omega0).powi(2) / (8.0 * omega0 * omega0 * omega1 * omega1);
            let before = wfs
                .iter()
                .filter(|w| w.t < tau)
                .map(|w| (w.complexity - amp * (omega1 * w.t).sin().powi(2)).abs())
                .fold(0.0, f64::max);
            checks.push(Check::at_most("closed_form_complexity", before, tol.closed_form));
            // Frozen against the value reached at τ on the integrated trajectory.
            let frozen = wfs
                .iter()
                .filter(|w| w.t >= tau)
                .map(|w| w.complexity)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(k), hi.max(k)));
            let spread = if frozen.0.is_finite() { frozen.1 - frozen.0 } else { 0.0 };
            checks.push(Check::at_most("frozen_after_quench", spread, tol.frozen));
        }
        ClosedFormSpec::Rotating { theta0, omega } => {
            let mut dev: f64 = 0.0;
            for s in &run.series.states {
                if let SectorState::Ladder(w) = s {
                    let cf = closed_form_rotating(theta0, omega, w.t);
                    dev = dev.max((w.z - cf.z).norm());
                }
            }
            checks.push(Check::at_most("closed_form_z", dev, tol.closed_form));
        }
        ClosedFormSpec::Dragged { x0, omega, m } => {
            let k = wfs
                .iter()
                .map(|w| (w.complexity - dragged_complexity(x0, omega, m, w.t)).abs())
                .fold(0.0, f64::max);
            checks.push(Check::at_most("closed_form_complexity", k, tol.closed_form));
            let p = wfs
                .iter()
                .map(|w| {
                    let mean = w.complexity_from_sum();
                    let var: f64 = w
                        .probabilities
                        .iter()
                        .enumerate()
                        .map(|(n, p)| (n as f64 - mean).powi(2) * p)
                        .sum();
                    (mean - var).abs()
                })
                .fold(0.0, f64::max);
            checks.push(Check::at_most("poisson_mean_variance", p, tol.poisson));
        }
        ClosedFormSpec::LongTimeComplexity { value } => {
            let k = report.total_complexity(report.grid.len() - 1);
            checks.push(Check::at_most("long_time_complexity", (k - value).abs(), tol.long_time));
        }
    }
    Ok(())
}

fn multi_sector_checks(
    scen: &Scenario,
    report: &RunReport,
    tol: &Tolerances,
    oracle: bool,
    integration: f64,
    checks: &mut Vec<Check>,
) -> Result<()> {
    let n = report.sectors.len();
    let mut additive: f64 = 0.0;
    let points: Vec<MultiSectorWavefunction<f64>> = (0..report.grid.len())
        .map(|i| MultiSectorWavefunction::from_sectors(report.sectors.iter().map(|s| s.series.wavefunctions[i].clone()).collect()))
        .collect();
    let dims: Vec<usize> = scen.sectors.iter().map(|s| s.dim).collect();
    for p in &points {
        let joint = p.joint_amplitudes()?;
        let mut k = 0.0;
        for (flat, a) in joint.iter().enumerate() {
            let mut rest = flat;
            let mut level_sum = 0usize;
            for d in dims.iter().rev() {
                level_sum += rest % d;
                rest /= d;
            }
            k += level_sum as f64 * a.norm_sqr();
        }
        additive = additive.max((k - p.total_complexity).abs());
    }
    checks.push(Check::at_most("additive_complexity", additive, tol.additive));

    if oracle {
        let reps = scen.sectors.iter().map(build_rep).collect::<Result<Vec<_>>>()?;
        let total: usize = dims.iter().product();
        let embed = |k: usize, m: &CMatrix<f64>| {
            let mut acc = CMatrix::identity(1);
            for (j, d) in dims.iter().enumerate() {
                acc = if j == k { acc.kron(m) } else { acc.kron(&CMatrix::identity(*d)) };
            }
            acc
        };
        let lp: Vec<CMatrix<f64>> = (0..n).map(|k| embed(k, &reps[k].lp)).collect();
        let couplings = &scen.couplings;
        let h = |t: f64| -> Result<CMatrix<f64>> {
            let mut acc = CMatrix::zeros(total);
            for k in 0..n {
                let g = couplings[k].gamma(t)?;
                let term = lp[k].scale(g);
                acc = &(&acc + &term) + &term.adjoint();
            }
            Ok(acc)
        };
        let mut psi0 = vec![c(0.0, 0.0); total];
        psi0[0] = c(1.0, 0.0);
        let bps: Vec<f64> = couplings.iter().flat_map(|g| g.breakpoints()).collect();
        let out = evolve_hermitian(h, &psi0, &report.grid, &bps, integration * 1e-2)?;
        let mut dev: f64 = 0.0;
        for (psi, p) in out.iter().zip(&points) {
            for (x, a) in psi.iter().zip(p.joint_amplitudes()?) {
                dev = dev.max((x.norm_sqr() - a.norm_sqr()).abs());
            }
        }
        checks.push(Check::at_most("joint_probability_oracle", dev, tol.joint));
    }
    Ok(())
}

/// Runs the full pipeline. Numerical failures surface as errors; failed
/// verifications are recorded in the report's checks.
pub fn run(scen: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    let tol = scen.config.tolerances;
    let integration = opts.tol.unwrap_or(tol.integration);
    let chain_tol = tol.chain_integration.min(integration);
    let mut sectors = Vec::with_capacity(scen.sectors.len());
    let mut checks = Vec::new();
    let multi = scen.sectors.len() > 1;
    for (k, (sector, gamma)) in scen.sectors.iter().zip(&scen.couplings).enumerate() {
        let wrap = |e: Error| if multi { e.in_sector(k) } else { e };
        let series = complexity_series(sector, gamma, &scen.grid, integration).map_err(wrap)?;
        let qsl = qsl_series(&series, gamma).map_err(wrap)?;
        let saturation = saturation_scan(&qsl, tol.saturation);
        let generator = if sector.sigma != Sigma::Heisenberg && scen.enabled(OutputKind::Generator) {
            let wn: Vec<_> = series
                .states
                .iter()
                .map(|s| match s {
                    SectorState::Ladder(w) => *w,
                    SectorState::Heisenberg(_) => unreachable!(),
                })
                .collect();
            Some(invert_series(&wn, sector.sigma).map_err(wrap)?)
        } else {
            None
        };
        let run = SectorRun {
            sector: *sector,
            series,
            qsl,
            saturation,
            generator,
        };
        let tag = if multi { format!("sector{k}_") } else { String::new() };
        sector_checks(&tag, scen, &run, &tol, chain_tol, &mut checks).map_err(wrap)?;
        sectors.push(run);
    }

    let mut oracle_deviation = None;
    if opts.oracle && scen.enabled(OutputKind::OracleCheck) {
        let mut dev: f64 = 0.0;
        for (k, (run, gamma)) in sectors.iter().zip(&scen.couplings).enumerate() {
            let probs = oracle_probabilities(&run.sector, gamma, &scen.grid, tol.oracle_dt)
                .map_err(|e| if multi { e.in_sector(k) } else { e })?;
            for (p, w) in probs.iter().zip(&run.series.wavefunctions) {
                for (x, y) in p.iter().zip(&w.probabilities) {
                    dev = dev.max((x - y).abs());
                }
            }
        }
        checks.push(Check::at_most("oracle_probabilities", dev, tol.oracle));
        oracle_deviation = Some(dev);
    }

    let mut report = RunReport {
        name: scen.config.name.clone(),
        grid: scen.grid.clone(),
        sectors,
        checks,
        oracle_deviation,
        outputs: scen.config.outputs.clone(),
    };
    let mut extra = Vec::new();
    closed_form_checks(scen, &report, &tol, &mut extra)?;
    if multi {
        multi_sector_checks(
            scen,
            &report,
            &tol,
            opts.oracle && scen.enabled(OutputKind::OracleCheck),
            integration,
            &mut extra,
        )?;
    }
    if scen.enabled(OutputKind::Qsl) && scen.config.closed_form.is_none() && !multi {
        // Constant-phase drives must saturate at every point.
        if let DriveSpec::ConstantPhase { .. } = scen.config.drive.as_ref().expect("single sector") {
            if scen.couplings[0].cartan_row.iter().all(|w| *w == 0.0) {
                extra.push(Check::flag("persistent_saturation", report.sectors[0].saturation.persistent));
            }
        }
    }
    report.checks.extend(extra);
    Ok(report)
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_line(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let mut first = true;
    for f in fields {
        if !first {
            out.push(',');
        }
        out.push_str(&f);
        first = false;
    }
    out.push('\n');
}

/// Series table for one sector.
pub fn series_csv(run: &SectorRun) -> String {
    let mut out = String::new();
    let dim = run.sector.dim;
    let state_cols: Vec<String> = match run.sector.sigma {
        Sigma::Heisenberg => vec!["re_alpha".into(), "im_alpha".into(), "phi".into(), "zero".into()],
        _ => vec!["re_z".into(), "im_z".into(), "re_eta".into(), "im_eta".into()],
    };
    let mut head = vec!["t".to_string()];
    head.extend(state_cols);
    head.extend(["K", "dK", "dK_dt", "bound", "gap"].map(String::from));
    head.extend((0..dim).map(|n| format!("P_{n}")));
    csv_line(&mut out, head);
    for ((s, w), q) in run.series.states.iter().zip(&run.series.wavefunctions).zip(&run.qsl) {
        let mut row = vec![fmt(s.t())];
        match s {
            SectorState::Ladder(x) => row.extend([x.z.re, x.z.im, x.eta.re, x.eta.im].map(fmt)),
            SectorState::Heisenberg(d) => row.extend([d.alpha.re, d.alpha.im, d.phi, 0.0].map(fmt)),
        }
        row.extend([w.complexity, w.complexity_std, q.dk_dt, q.bound, q.gap].map(fmt));
        row.extend(w.probabilities.iter().map(|p| fmt(*p)));
        csv_line(&mut out, row);
    }
    out
}

pub fn generator_csv(params: &[GeneratorParams<f64>]) -> String {
    let mut out = String::new();
    csv_line(
        &mut out,
        ["t", "theta0", "re_theta_plus", "im_theta_plus", "re_chi", "im_chi", "branch_index", "center_winding"]
            .map(String::from),
    );
    for p in params {
        let mut row: Vec<String> = [p.t, p.theta0, p.theta_plus.re, p.theta_plus.im, p.chi.re, p.chi.im]
            .map(fmt)
            .to_vec();
        row.push(p.branch_index.to_string());
        row.push(p.center_winding.to_string());
        csv_line(&mut out, row);
    }
    out
}

pub fn wavefunction_csv(run: &SectorRun) -> String {
    let mut out = String::new();
    let mut head = vec!["t".to_string()];
    for n in 0..run.sector.dim {
        head.push(format!("re_phi_{n}"));
        head.push(format!("im_phi_{n}"));
    }
    csv_line(&mut out, head);
    for w in &run.series.wavefunctions {
        let mut row = vec![fmt(w.t)];
        for a in &w.amplitudes {
            row.push(fmt(a.re));
            row.push(fmt(a.im));
        }
        csv_line(&mut out, row);
    }
    out
}

/// Total complexity with one column per sector.
pub fn totals_csv(report: &RunReport) -> String {
    let mut out = String::new();
    let mut head = vec!["t".to_string(), "K_total".to_string()];
    head.extend((0..report.sectors.len()).map(|k| format!("K_{k}")));
    csv_line(&mut out, head);
    for (i, t) in report.grid.iter().enumerate() {
        let mut row = vec![fmt(*t), fmt(report.total_complexity(i))];
        row.extend(report.sectors.iter().map(|s| fmt(s.series.wavefunctions[i].complexity)));
        csv_line(&mut out, row);
    }
    out
}

/// Writes the CSV/JSON artifacts and returns their paths.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |e: std::io::Error| Error::Config(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut files = Vec::new();
    let mut put = |file: String, body: String| -> Result<()> {
        let path = dir.join(file);
        fs::write(&path, body).map_err(io)?;
        files.push(path);
        Ok(())
    };
    let name = &report.name;
    let multi = report.sectors.len() > 1;
    if multi {
        put(format!("{name}_series.csv"), totals_csv(report))?;
    }
    for (k, s) in report.sectors.iter().enumerate() {
        let stem = if multi { format!("{name}_sector{k}") } else { name.clone() };
        put(format!("{stem}_series.csv"), series_csv(s))?;
        if let Some(g) = &s.generator {
            put(format!("{stem}_generator.csv"), generator_csv(g))?;
        }
        if report.outputs.contains(&OutputKind::Wavefunction) {
            put(format!("{stem}_wavefunction.csv"), wavefunction_csv(s))?;
        }
    }
    let mut summary = serde_json::to_string_pretty(&report.summary()).expect("summary serializes");
    summary.push('\n');
    put(format!("{name}_summary.json"), summary)?;
    Ok(files)
}

const BUILTINS: [(&str, &str); 6] = [
    ("su4_sech", "spin-1 sector of su(4) under a sech pulse with cancelling Cartan phases"),
    ("ho_quench", "harmonic-oscillator frequency quench in the kappa = 1/4 su(1,1) sector"),
    ("virasoro_sector", "su(1,1) sector of a Virasoro primary (h = 1/2, c = 1, k = 2)"),
    ("rotating_spin", "spin-1 in a tilted field rotating about z"),
    ("dragged_oscillator", "oscillator dragged by x0 cos(wt): Heisenberg-Weyl displacement"),
    ("so7_two_sector", "two commuting spin-1 sectors on the B3 simple roots 1 and 3"),
];

pub fn builtin_names() -> Vec<(&'static str, &'static str)> {
    BUILTINS.to_vec()
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    let v = match name {
        "su4_sech" => json!({
            "name": "su4_sech",
            "sector": {"sigma": 1, "lowest_weight": -1.0},
            "drive": {"tag": "sech_pulse", "omega0": 1.0, "width": 1.0},
            "cartan_drives": [
                {"tag": "cosine", "amplitude": 0.5, "frequency": 1.3},
                {"tag": "cosine", "amplitude": 1.0, "frequency": 1.3},
                {"tag": "cosine", "amplitude": 0.5, "frequency": 1.3}
            ],
            "cartan_row": [2.0, -1.0, 0.0],
            "grid": {"t_end": 20.0},
            "closed_form": {"tag": "long_time_complexity", "value": 2.0}
        }),
        "ho_quench" => json!({
            "name": "ho_quench",
            "sector": {"sigma": -1, "lowest_weight": 0.25, "dim": 128},
            "drive": {"tag": "quench", "omega0": 0.6, "omega1": 2.0, "tau": 10.0},
            "cartan_drives": [{"tag": "quench_frequency", "omega0": 0.6, "omega1": 2.0, "tau": 10.0}],
            "cartan_row": [2.0],
            "grid": {"t_end": 15.0},
            "closed_form": {"tag": "quench", "omega0": 0.6, "omega1": 2.0, "tau": 10.0}
        }),
        "virasoro_sector" => json!({
            "name": "virasoro_sector",
            "sector": {"sigma": -1, "virasoro": {"h": 0.5, "c": 1.0, "k": 2}, "dim": 128},
            "drive": {"tag": "sech_pulse", "omega0": 1.0, "width": 1.0},
            "cartan_drives": [{"tag": "constant", "value": 0.4}],
            "cartan_row": [2.0],
            "grid": {"t_end": 10.0}
        }),
        "rotating_spin" => json!({
            "name": "rotating_spin",
            "sector": {"sigma": 1, "lowest_weight": -1.0},
            "drive": {"tag": "rotating_field", "theta0": std::f64::consts::FRAC_PI_2, "omega": 1.0, "h": 1.0},
            "cartan_drives": [{"tag": "constant", "value": std::f64::consts::FRAC_PI_2.cos()}],
            "cartan_row": [1.0],
            "grid": {"t_end": 20.0},
            "closed_form": {"tag": "rotating", "theta0": std::f64::consts::FRAC_PI_2, "omega": 1.0}
        }),
        "dragged_oscillator" => json!({
            "name": "dragged_oscillator",
            "sector": {"sigma": 0, "dim": 64},
            "drive": {"tag": "dragged_cosine", "x0": 0.5, "omega": 2.0, "m": 1.0},
            "cartan_drives": [{"tag": "constant", "value": 2.0}],
            "cartan_row": [1.0],
            "grid": {"t_end": 8.0},
            "closed_form": {"tag": "dragged", "x0": 0.5, "omega": 2.0, "m": 1.0}
        }),
        "so7_two_sector" => json!({
            "name": "so7_two_sector",
            "sectors": [
                {"sigma": 1, "lowest_weight": -1.0},
                {"sigma": 1, "lowest_weight": -1.0}
            ],
            "drives": [
                {"tag": "sech_pulse", "omega0": 1.0, "width": 1.0},
                {"tag": "sech_pulse", "omega0": 0.7, "width": 1.5}
            ],
            "roots": {"cartan_matrix": [[2, -1, 0], [-1, 2, -2], [0, -1, 2]], "selected_roots": [1, 3]},
            "cartan_drives": [
                {"tag": "constant", "value": 0.3},
                {"tag": "constant", "value": 0.1},
                {"tag": "constant", "value": 0.2}
            ],
            "grid": {"t_end": 10.0}
        }),
        _ => return None,
    };
    Some(serde_json::from_value(v).expect("built-in scenarios parse"))
}

/// Resolves a built-in name or a path to a JSON config.
pub fn resolve(target: &str) -> Result<ScenarioConfig> {
    if let Some(cfg) = builtin(target) {
        return Ok(cfg);
    }
    let path = Path::new(target);
    if path.extension().is_some_and(|e| e == "json") || path.exists() {
        return ScenarioConfig::from_path(path);
    }
    let mut names = String::new();
    for (n, _) in BUILTINS {
        let _ = write!(names, " {n}");
    }
    Err(Error::Config(format!("unknown scenario '{target}'; built-ins:{names}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_validate() {
        assert_eq!(builtin_names().len(), 6);
        for (n, _) in builtin_names() {
            let cfg = builtin(n).unwrap();
            assert_eq!(cfg.name, n);
            let s = Scenario::new(cfg).unwrap();
            assert_eq!(s.grid.len(), DEFAULT_POINTS);
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = builtin("so7_two_sector").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = r#"{"name":"x","sector":{"sigma":SIG,"lowest_weight":-1},"drive":{"tag":"sech_pulse","omega0":1,"width":1},"grid":{"t_end":1}EXTRA}"#;
        let bad = [
            base.replace("SIG", "3").replace("EXTRA", ""),
            base.replace("SIG", "1").replace("EXTRA", r#","typo":1"#),
            base.replace("SIG", "1").replace("EXTRA", r#","grid2":{}"#),
            base.replace("SIG", "-1").replace("EXTRA", ""),
            base.replace("SIG", "1").replace("\"width\":1", "\"width\":1,\"extra\":2").replace("EXTRA", ""),
        ];
        for text in bad {
            let r = ScenarioConfig::from_json(&text).and_then(Scenario::new);
            assert!(matches!(r, Err(Error::Config(_))), "{text}");
        }
        let ok = base.replace("SIG", "1").replace("EXTRA", "");
        assert!(ScenarioConfig::from_json(&ok).and_then(Scenario::new).is_ok());
    }

    #[test]
    fn non_commuting_roots_are_rejected() {
        let mut cfg = builtin("so7_two_sector").unwrap();
        cfg.roots.as_mut().unwrap().selected_roots = vec![1, 2];
        assert!(matches!(Scenario::new(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn sample_indices_cover_the_grid() {
        let v = sample_indices(2001, 20);
        assert_eq!((v.len(), v[0], v[19]), (20, 0, 2000));
        assert_eq!(sample_indices(5, 20), vec![0, 1, 2, 3, 4]);
    }
}
