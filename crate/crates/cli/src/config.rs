use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use liegate_core::closedforms::{DrivenConstB, KanaiCaldirola};
use liegate_core::suite::SuiteConfig;
use liegate_core::{CoefficientSet1D, FieldProfile2D, KernelVariant, Path, TimeProfile};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Lp,
    Gho,
    Iontrap,
    Kanai,
    Cp2d,
    Bsin,
    Efield,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::Lp => "lp",
            System::Gho => "gho",
            System::Iontrap => "iontrap",
            System::Kanai => "kanai",
            System::Cp2d => "cp2d",
            System::Bsin => "bsin",
            System::Efield => "efield",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathArg {
    Path1,
    Path2,
}

impl From<PathArg> for Path {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Path1 => Path::Path1,
            PathArg::Path2 => Path::Path2,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IonTrap {
    pub m: f64,
    #[serde(rename = "K")]
    pub stiffness: f64,
    pub k: f64,
    pub omega: f64,
}

impl Default for IonTrap {
    fn default() -> Self {
        Self { m: 1.0, stiffness: 1.0, k: 0.3, omega: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Kanai {
    pub m: f64,
    pub tau: f64,
    pub omega0: f64,
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    pub omega1: f64,
}

impl Default for Kanai {
    fn default() -> Self {
        Self { m: 1.0, tau: 1.0, omega0: 0.25, f0: 0.2, f1: 0.1, omega1: 1.0 }
    }
}

impl Kanai {
    pub fn closed(&self) -> KanaiCaldirola<f64> {
        KanaiCaldirola {
            m: self.m,
            tau: self.tau,
            omega0: self.omega0,
            f0: self.f0,
            f1: self.f1,
            omega1: self.omega1,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bsin {
    pub m: f64,
    #[serde(rename = "B0")]
    pub b0: f64,
    pub omega: f64,
    pub charge: f64,
}

impl Default for Bsin {
    fn default() -> Self {
        Self { m: 1.0, b0: 2.0, omega: 1.5, charge: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Efield {
    pub m: f64,
    pub charge: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "E0x")]
    pub e0x: f64,
    #[serde(rename = "E0y")]
    pub e0y: f64,
    #[serde(rename = "E1x")]
    pub e1x: f64,
    #[serde(rename = "E1y")]
    pub e1y: f64,
    pub omega: f64,
    pub zeta: f64,
}

impl Default for Efield {
    fn default() -> Self {
        let p = liegate_core::suite::efield_params();
        Self {
            m: p.m,
            charge: p.charge,
            b: p.b,
            k: p.k,
            e0x: p.e0x,
            e0y: p.e0y,
            e1x: p.e1x,
            e1y: p.e1y,
            omega: p.omega,
            zeta: p.zeta,
        }
    }
}

impl Efield {
    pub fn closed(&self) -> DrivenConstB<f64> {
        DrivenConstB {
            m: self.m,
            charge: self.charge,
            b: self.b,
            k: self.k,
            e0x: self.e0x,
            e0y: self.e0y,
            e1x: self.e1x,
            e1y: self.e1y,
            omega: self.omega,
            zeta: self.zeta,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

/// Everything a run can be configured with; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<System>,
    pub path: Option<Path>,
    pub t_end: Option<f64>,
    pub tol: Option<f64>,
    /// Output rows on `[0, t_end]`.
    pub samples: Option<usize>,
    pub hbar: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub coeffs: Option<CoefficientSet1D<f64>>,
    pub field: Option<FieldProfile2D<f64>>,
    pub iontrap: Option<IonTrap>,
    pub kanai: Option<Kanai>,
    pub bsin: Option<Bsin>,
    pub efield: Option<Efield>,
    pub variant: Option<KernelVariant>,
    pub grid: Option<GridSpec>,
    pub apply: Option<String>,
    pub suite: Option<SuiteConfig>,
    pub criteria: Option<Vec<u32>>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            let msg = e.to_string();
            let field = field_from_serde(&msg).unwrap_or_else(|| "config".into());
            CliError::config(field, msg)
        })
    }
}

/// Pulls the offending key out of a serde message such as "unknown field `foo`".
fn field_from_serde(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

/// The dynamics a command works on.
#[derive(Debug, Clone)]
pub enum Problem {
    OneD { set: CoefficientSet1D<f64>, closed: Closed1D },
    TwoD { field: FieldProfile2D<f64>, closed: Closed2D },
}

#[derive(Debug, Clone, Copy)]
pub enum Closed1D {
    None,
    IonTrap(IonTrap),
    Kanai(KanaiCaldirola<f64>),
}

#[derive(Debug, Clone, Copy)]
pub enum Closed2D {
    None,
    Bsin(Bsin),
    Efield(DrivenConstB<f64>),
}

fn positive(v: f64, field: &str) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(field, format!("must be a positive finite number, got {v}")))
    }
}

fn finite(v: f64, field: &str) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(field, format!("must be finite, got {v}")))
    }
}

/// Fully resolved settings after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub system: System,
    pub path: Path,
    pub t_end: f64,
    pub tol: f64,
    pub samples: usize,
    pub problem: Problem,
}

pub const DEFAULT_T_END: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_SAMPLES: usize = 101;

impl RunConfig {
    pub fn resolve(&self, system: Option<System>, path: Option<PathArg>, t_end: Option<f64>, tol: Option<f64>) -> Result<Resolved, CliError> {
        let system = system
            .or(self.system)
            .ok_or_else(|| CliError::config("system", "no system given (use --system or the `system` key)"))?;
        let path = path.map(Path::from).or(self.path).unwrap_or(Path::Path1);
        let t_end = t_end.or(self.t_end).unwrap_or(DEFAULT_T_END);
        positive(t_end, "t_end")?;
        let tol = tol.or(self.tol).unwrap_or(DEFAULT_TOL);
        positive(tol, "tol")?;
        if tol >= 0.1 {
            return Err(CliError::config("tol", format!("must be below 0.1, got {tol}")));
        }
        let samples = self.samples.unwrap_or(DEFAULT_SAMPLES);
        if samples < 2 {
            return Err(CliError::config("samples", format!("need at least 2 samples, got {samples}")));
        }
        if let Some(h) = self.hbar {
            positive(h, "hbar")?;
        }
        let problem = self.problem(system)?;
        Ok(Resolved { system, path, t_end, tol, samples, problem })
    }

    fn one_d(&self, mut set: CoefficientSet1D<f64>, closed: Closed1D) -> Problem {
        if let Some(h) = self.hbar {
            set.hbar = h;
        }
        Problem::OneD { set, closed }
    }

    fn two_d(&self, mut field: FieldProfile2D<f64>, closed: Closed2D) -> Problem {
        if let Some(h) = self.hbar {
            field.hbar = h;
        }
        Problem::TwoD { field, closed }
    }

    fn problem(&self, system: System) -> Result<Problem, CliError> {
        Ok(match system {
            System::Lp => {
                let set = self
                    .coeffs
                    .clone()
                    .unwrap_or_else(|| CoefficientSet1D::linear_potential(1.0, TimeProfile::constant(1.0)));
                for (name, p) in [("coeffs.b", &set.b), ("coeffs.c", &set.c)] {
                    if p.as_constant() != Some(0.0) {
                        return Err(CliError::config(name, "the linear-potential system needs b ≡ 0 and c ≡ 0"));
                    }
                }
                self.one_d(set, Closed1D::None)
            }
            System::Gho => {
                let set = self.coeffs.clone().unwrap_or_else(|| CoefficientSet1D::harmonic(1.0, 1.0));
                self.one_d(set, Closed1D::None)
            }
            System::Iontrap => {
                let p = self.iontrap.unwrap_or_default();
                positive(p.m, "iontrap.m")?;
                positive(p.omega, "iontrap.omega")?;
                finite(p.stiffness, "iontrap.K")?;
                finite(p.k, "iontrap.k")?;
                self.one_d(CoefficientSet1D::ion_trap(p.m, p.stiffness, p.k, p.omega), Closed1D::IonTrap(p))
            }
            System::Kanai => {
                let p = self.kanai.unwrap_or_default();
                positive(p.m, "kanai.m")?;
                positive(p.tau, "kanai.tau")?;
                positive(p.omega0, "kanai.omega0")?;
                finite(p.f0, "kanai.F0")?;
                finite(p.f1, "kanai.F1")?;
                finite(p.omega1, "kanai.omega1")?;
                let set = CoefficientSet1D::kanai_caldirola(p.m, p.tau, p.omega0, p.f0, p.f1, p.omega1);
                self.one_d(set, Closed1D::Kanai(p.closed()))
            }
            System::Cp2d => {
                let field = self
                    .field
                    .clone()
                    .ok_or_else(|| CliError::config("field", "system cp2d needs a `field` section"))?;
                self.two_d(field, Closed2D::None)
            }
            System::Bsin => {
                let p = self.bsin.unwrap_or_default();
                positive(p.m, "bsin.m")?;
                positive(p.omega, "bsin.omega")?;
                finite(p.b0, "bsin.B0")?;
                finite(p.charge, "bsin.charge")?;
                self.two_d(FieldProfile2D::sinusoidal_b(p.m, p.b0, p.omega, p.charge), Closed2D::Bsin(p))
            }
            System::Efield => {
                let p = self.efield.unwrap_or_default();
                positive(p.m, "efield.m")?;
                for (v, name) in [
                    (p.charge, "efield.charge"),
                    (p.b, "efield.B"),
                    (p.k, "efield.K"),
                    (p.e0x, "efield.E0x"),
                    (p.e0y, "efield.E0y"),
                    (p.e1x, "efield.E1x"),
                    (p.e1y, "efield.E1y"),
                    (p.omega, "efield.omega"),
                    (p.zeta, "efield.zeta"),
                ] {
                    finite(v, name)?;
                }
                let field = FieldProfile2D::driven_e(p.m, p.charge, p.b, p.k, p.e0x, p.e0y, p.e1x, p.e1y, p.omega, p.zeta);
                self.two_d(field, Closed2D::Efield(p.closed()))
            }
        })
    }

    pub fn grid(&self, dof: usize) -> Result<GridSpec, CliError> {
        let g = self.grid.unwrap_or(if dof == 1 {
            GridSpec { n: 1024, x_min: -20.0, x_max: 20.0 }
        } else {
            GridSpec { n: 64, x_min: -8.0, x_max: 8.0 }
        });
        if g.n < 2 {
            return Err(CliError::config("grid.n", format!("need at least 2 points, got {}", g.n)));
        }
        finite(g.x_min, "grid.x_min")?;
        finite(g.x_max, "grid.x_max")?;
        if g.x_max <= g.x_min {
            return Err(CliError::config("grid.x_max", "must exceed grid.x_min"));
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let e = serde_json::from_str::<RunConfig>(r#"{"t_end": 1.0, "tend": 2.0}"#).unwrap_err();
        assert_eq!(field_from_serde(&e.to_string()).as_deref(), Some("tend"));
        assert!(serde_json::from_str::<RunConfig>(r#"{"kanai": {"tau": 1.0, "mass": 2.0}}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let c: RunConfig = serde_json::from_str(r#"{"system": "gho", "t_end": 3.0, "path": "path2"}"#).unwrap();
        let r = c.resolve(None, None, Some(0.5), None).unwrap();
        assert_eq!((r.system, r.path, r.t_end, r.tol), (System::Gho, Path::Path2, 0.5, DEFAULT_TOL));
        let r = c.resolve(Some(System::Kanai), Some(PathArg::Path1), None, None).unwrap();
        assert_eq!((r.system, r.path, r.t_end), (System::Kanai, Path::Path1, 3.0));
    }

    #[test]
    fn bad_values_name_their_field() {
        let c = RunConfig::default();
        let e = c.resolve(Some(System::Gho), None, Some(-1.0), None).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("t_end"));
        let c: RunConfig = serde_json::from_str(r#"{"iontrap": {"m": 0.0}}"#).unwrap();
        let e = c.resolve(Some(System::Iontrap), None, None, None).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("iontrap.m"));
    }
}
