//! Invariant and oracle suite shared by `liegate verify` and the acceptance tests.
//!
//! Every criterion returns a [`CriterionReport`]; failures of the underlying
//! computations are recorded as failed checks rather than propagated, so a
//! report is always produced.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, TAU};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closedforms::{
    bfield_sin_params, efield_const_b_params, ion_trap_params, kanai_caldirola_kernel,
    kanai_caldirola_params, mathieu_c_tol, DrivenConstB, GammaForm, KanaiCaldirola,
};
use crate::coeffs::{CoefficientSet1D, FieldProfile2D, TimeProfile};
use crate::error::Result;
use crate::greens::{kernel_apply, kernel_build, kernel_build_2d, GaussianKernel, KernelVariant, WaveGrid};
use crate::linalg::Mat;
use crate::maps::{assemble, assemble_2d_through, assemble_through, check_symplectic, SymplecticMap};
use crate::oracle::{
    classical_flow, classical_flow_2d, fidelity, fundamental_matrix, fundamental_matrix_2d,
    split_step_evolve, ClassicalState,
};
use crate::paramflow::{solve_2d, solve_path, solve_path1, Path};
use crate::quadops::{compare_with_reference, Algebra};

pub const SYMPLECTIC_TOL: f64 = 1e-9;
pub const PATH_EQUIV_TOL: f64 = 1e-6;
pub const ORACLE_MAP_TOL: f64 = 1e-7;
pub const CLASSICAL_TOL: f64 = 1e-7;
pub const CLOSED_FORM_TOL: f64 = 1e-6;
pub const REALITY_TOL: f64 = 1e-12;
pub const INFIDELITY_TOL: f64 = 1e-5;
pub const MEHLER_TOL: f64 = 1e-9;
pub const UNITARITY_TOL: f64 = 1e-6;
pub const MATHIEU_HALVING_TOL: f64 = 1e-10;
pub const MATHIEU_VALUE_TOL: f64 = 1e-12;

const TIME_SAMPLES: usize = 100;
const MAP_CORRUPTION: f64 = 1e-6;
const MOVED_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Random coefficient sets for the symplectic, oracle and classical checks.
    pub n_random: usize,
    /// Random sets also used for path equivalence.
    pub n_equivalence: usize,
    pub tol: f64,
    /// Grid points for the 1D wavefunction checks.
    pub grid_points: usize,
    pub split_steps: usize,
    /// Grid points per axis for 2D unitarity.
    pub grid_points_2d: usize,
    /// Detector sanity hook: perturb every assembled map.
    #[serde(skip)]
    pub corrupt_maps: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            n_random: 20,
            n_equivalence: 5,
            tol: 1e-12,
            grid_points: 1024,
            split_steps: 4096,
            grid_points_2d: 64,
            corrupt_maps: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub limit: f64,
    /// `value ≥ limit` is required instead of `value ≤ limit`.
    pub at_least: bool,
    pub passed: bool,
}

impl Check {
    pub fn at_most(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { label: label.into(), value, limit, at_least: false, passed: value <= limit }
    }

    pub fn at_least(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { label: label.into(), value, limit, at_least: true, passed: value >= limit }
    }

    fn severity(&self) -> f64 {
        if !self.passed {
            return f64::INFINITY;
        }
        if self.at_least || self.limit <= 0.0 {
            0.0
        } else {
            self.value / self.limit
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub total: usize,
    pub failed: usize,
    /// Closest call among the checks (largest `value/limit`, or the first failure).
    pub worst: Option<Check>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl CriterionReport {
    /// One-line human summary.
    pub fn summary(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let worst = match &self.worst {
            Some(c) => format!(
                "; worst {} = {:.3e} ({} {:.1e})",
                c.label,
                c.value,
                if c.at_least { "≥" } else { "≤" },
                c.limit
            ),
            None => String::new(),
        };
        format!(
            "criterion {} [{}] {}: {}/{} checks passed{}",
            self.id,
            self.name,
            verdict,
            self.total - self.failed,
            self.total,
            worst
        )
    }
}

struct Collector {
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Collector {
    fn new() -> Self {
        Self { checks: Vec::new(), notes: Vec::new() }
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Runs `f`; an error becomes a failed check labelled `label`.
    fn attempt(&mut self, label: &str, f: impl FnOnce(&mut Self) -> Result<()>) {
        if let Err(e) = f(self) {
            self.notes.push(format!("{label}: {e}"));
            self.checks.push(Check::at_most(format!("{label}: error"), f64::NAN, 0.0));
        }
    }

    fn finish(self, id: u32, name: &str) -> CriterionReport {
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let worst = self
            .checks
            .iter()
            .max_by(|a, b| a.severity().total_cmp(&b.severity()))
            .cloned();
        CriterionReport {
            id,
            name: name.to_string(),
            passed: failed == 0 && !self.checks.is_empty(),
            total: self.checks.len(),
            failed,
            worst,
            checks: self.checks,
            notes: self.notes,
        }
    }
}

pub const CRITERIA: [(u32, &str); 9] = [
    (1, "structure constants"),
    (2, "symplectic invariants"),
    (3, "path equivalence"),
    (4, "oracle map equivalence"),
    (5, "classical identification"),
    (6, "closed-form cross-checks"),
    (7, "wavefunction fidelity"),
    (8, "kernel sanity"),
    (9, "Mathieu self-consistency"),
];

pub fn run_criterion(id: u32, cfg: &SuiteConfig) -> Option<CriterionReport> {
    let name = CRITERIA.iter().find(|c| c.0 == id)?.1;
    let mut c = Collector::new();
    match id {
        1 => structure_constants(&mut c),
        2 => symplectic(&mut c, cfg),
        3 => path_equivalence(&mut c, cfg),
        4 => oracle_maps(&mut c, cfg),
        5 => classical(&mut c, cfg),
        6 => closed_forms(&mut c, cfg),
        7 => wavefunctions(&mut c, cfg),
        8 => kernels(&mut c, cfg),
        9 => mathieu(&mut c),
        _ => return None,
    }
    Some(c.finish(id, name))
}

pub fn run_all(cfg: &SuiteConfig) -> Vec<CriterionReport> {
    CRITERIA.iter().filter_map(|&(id, _)| run_criterion(id, cfg)).collect()
}

/// Smooth random coefficient set with `a, c > 0`.
pub fn random_coefficients(rng: &mut ChaCha8Rng) -> CoefficientSet1D<f64> {
    let mut positive = |lo: f64, hi: f64| {
        let base = rng.gen_range(lo..hi);
        let eps = rng.gen_range(0.0..0.5);
        TimeProfile::sinusoid(base * eps, rng.gen_range(0.5..3.0), rng.gen_range(0.0..TAU), base)
    };
    let a = positive(0.5, 2.0);
    let c = positive(0.2, 2.0);
    let mut wave = |amp: f64, off: f64| {
        TimeProfile::sinusoid(
            rng.gen_range(-amp..amp),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.0..TAU),
            rng.gen_range(-off..off),
        )
    };
    let mut set = CoefficientSet1D::with_a(a);
    set.b = wave(0.3, 0.2);
    set.c = c;
    set.d = wave(1.0, 0.5);
    set.e = wave(1.0, 0.5);
    set.g = wave(1.0, 0.5);
    set
}

pub fn random_sets(seed: u64, n: usize) -> Vec<CoefficientSet1D<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_coefficients(&mut rng)).collect()
}

const RANDOM_T_END: f64 = 2.0;

pub fn ion_trap_preset() -> CoefficientSet1D<f64> {
    CoefficientSet1D::ion_trap(1.0, 1.0, 0.3, 5.0)
}

pub fn kanai_overdamped() -> KanaiCaldirola<f64> {
    KanaiCaldirola { m: 1.0, tau: 1.0, omega0: 0.25, f0: 0.2, f1: 0.1, omega1: 1.0 }
}

pub fn kanai_underdamped() -> KanaiCaldirola<f64> {
    KanaiCaldirola { m: 1.0, tau: 1.0, omega0: 1.0, f0: 0.2, f1: 0.1, omega1: 1.0 }
}

pub fn kanai_set(p: &KanaiCaldirola<f64>) -> CoefficientSet1D<f64> {
    CoefficientSet1D::kanai_caldirola(p.m, p.tau, p.omega0, p.f0, p.f1, p.omega1)
}

pub fn bsin_preset() -> FieldProfile2D<f64> {
    FieldProfile2D::sinusoidal_b(1.0, 2.0, 1.5, 1.0)
}

pub fn efield_params() -> DrivenConstB<f64> {
    DrivenConstB {
        m: 1.0,
        charge: 1.0,
        b: 2.0,
        k: 0.5,
        e0x: 0.3,
        e0y: -0.1,
        e1x: 0.25,
        e1y: 0.2,
        omega: 1.3,
        zeta: FRAC_PI_2,
    }
}

pub fn efield_preset() -> FieldProfile2D<f64> {
    let p = efield_params();
    FieldProfile2D::driven_e(p.m, p.charge, p.b, p.k, p.e0x, p.e0y, p.e1x, p.e1y, p.omega, p.zeta)
}

struct System1D {
    name: &'static str,
    set: CoefficientSet1D<f64>,
    t_end: f64,
    paths: &'static [Path],
}

const BOTH: &[Path] = &[Path::Path1, Path::Path2];

fn preset_systems() -> Vec<System1D> {
    vec![
        System1D {
            name: "lp",
            set: CoefficientSet1D::linear_potential(1.0, TimeProfile::constant(1.0)),
            t_end: 2.0,
            paths: &[Path::Path1],
        },
        System1D { name: "sho", set: CoefficientSet1D::harmonic(1.0, 1.0), t_end: 2.0, paths: BOTH },
        System1D { name: "iontrap", set: ion_trap_preset(), t_end: 2.0, paths: BOTH },
        System1D { name: "kanai", set: kanai_set(&kanai_overdamped()), t_end: 2.0, paths: BOTH },
        System1D {
            name: "kanai-underdamped",
            set: kanai_set(&kanai_underdamped()),
            t_end: 2.0,
            paths: BOTH,
        },
    ]
}

fn all_1d_systems(cfg: &SuiteConfig) -> Vec<System1D> {
    let mut v = preset_systems();
    for (i, set) in random_sets(cfg.seed, cfg.n_random).into_iter().enumerate() {
        v.push(System1D {
            name: RANDOM_NAMES[i % RANDOM_NAMES.len()],
            set,
            t_end: RANDOM_T_END,
            paths: BOTH,
        });
    }
    v
}

const RANDOM_NAMES: [&str; 20] = [
    "random-00", "random-01", "random-02", "random-03", "random-04", "random-05", "random-06",
    "random-07", "random-08", "random-09", "random-10", "random-11", "random-12", "random-13",
    "random-14", "random-15", "random-16", "random-17", "random-18", "random-19",
];

/// `B = B₀ sin ωt` vanishes at `t = 0`, so only the first path applies.
fn system_2d() -> Vec<(&'static str, FieldProfile2D<f64>, f64, &'static [Path])> {
    vec![("bsin", bsin_preset(), 2.0, &[Path::Path1]), ("efield", efield_preset(), 2.0, BOTH)]
}

fn path_name(p: Path) -> &'static str {
    match p {
        Path::Path1 => "path1",
        Path::Path2 => "path2",
    }
}

/// `n` samples spread over `[0, t_hi]`, both ends included.
fn sample_times(t_hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_hi * k as f64 / (n - 1) as f64).collect()
}

fn corrupt(map: &mut SymplecticMap<f64>, cfg: &SuiteConfig) {
    if cfg.corrupt_maps {
        map.m[(0, 0)] += MAP_CORRUPTION;
    }
}

/// `‖a − b‖∞ / ‖b‖∞`, falling back to the absolute difference when `b ≡ 0`.
pub fn relative_sup(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    let bad = a.iter().chain(b).any(|v| !v.is_finite());
    if bad {
        f64::NAN
    } else if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn structure_constants(c: &mut Collector) {
    for alg in Algebra::all() {
        c.attempt(alg.name(), |c| {
            let r = compare_with_reference(alg)?;
            let n = alg.size();
            for i in 1..=n {
                for j in (i + 1)..=n {
                    let bad = r.mismatches.iter().filter(|m| m.0 == i && m.1 == j).count();
                    c.push(Check::at_most(
                        format!("{} [λ{i}, λ{j}] mismatching constants", alg.name()),
                        bad as f64,
                        0.0,
                    ));
                }
            }
            c.push(Check::at_least(
                format!("{} pair commutators checked", alg.name()),
                r.pairs_checked as f64,
                (n * (n - 1) / 2) as f64,
            ));
            for m in r.mismatches.iter().take(10) {
                c.notes.push(format!(
                    "{}: c({},{},{}) computed {} listed {}",
                    alg.name(),
                    m.0,
                    m.1,
                    m.2,
                    m.3,
                    m.4
                ));
            }
            Ok(())
        });
    }
}

fn symplectic_residuals<'a>(
    maps: impl Iterator<Item = Result<SymplecticMap<f64>>> + 'a,
    cfg: &SuiteConfig,
) -> Result<(f64, f64)> {
    let (mut det, mut form) = (0.0f64, 0.0f64);
    for m in maps {
        let mut m = m?;
        corrupt(&mut m, cfg);
        let (d, f) = check_symplectic(&m);
        det = det.max(if d.is_nan() { f64::INFINITY } else { d });
        form = form.max(if f.is_nan() { f64::INFINITY } else { f });
    }
    Ok((det, form))
}

fn symplectic(c: &mut Collector, cfg: &SuiteConfig) {
    for sys in all_1d_systems(cfg) {
        for &path in sys.paths {
            let label = format!("{} {}", sys.name, path_name(path));
            c.attempt(&label, |c| {
                let traj = solve_path(&sys.set, sys.t_end, cfg.tol, path)?;
                let maps = sample_times(sys.t_end, TIME_SAMPLES)
                    .into_iter()
                    .map(|t| assemble_through(&traj, t));
                let (d, f) = symplectic_residuals(maps, cfg)?;
                c.push(Check::at_most(format!("{label} |det M − 1|"), d, SYMPLECTIC_TOL));
                c.push(Check::at_most(format!("{label} ‖MᵀJM − J‖∞"), f, SYMPLECTIC_TOL));
                Ok(())
            });
        }
    }
    for (name, field, t_end, paths) in system_2d() {
        for &path in paths {
            let label = format!("{name} {}", path_name(path));
            c.attempt(&label, |c| {
                let traj = solve_2d(&field, t_end, cfg.tol, path)?;
                let maps = sample_times(t_end, TIME_SAMPLES)
                    .into_iter()
                    .map(|t| assemble_2d_through(&traj, t));
                let (d, f) = symplectic_residuals(maps, cfg)?;
                c.push(Check::at_most(format!("{label} |det M − 1|"), d, SYMPLECTIC_TOL));
                c.push(Check::at_most(format!("{label} ‖MᵀJM − J‖∞"), f, SYMPLECTIC_TOL));
                Ok(())
            });
        }
    }
}

fn map_distance(a: &SymplecticMap<f64>, b: &SymplecticMap<f64>) -> f64 {
    let m = a.m.sub(&b.m).max_abs();
    let s = a.shift.iter().zip(&b.shift).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d = m.max(s);
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

/// Upper end of the sampled common window: just short of the first caustic, or `t_end`.
fn window_end(valid_to: f64, t_end: f64) -> f64 {
    if valid_to <= t_end {
        0.99 * valid_to
    } else {
        t_end
    }
}

fn path_equivalence(c: &mut Collector, cfg: &SuiteConfig) {
    let mut systems = vec![
        ("sho", CoefficientSet1D::harmonic(1.0, 1.0), 2.0),
        ("iontrap", ion_trap_preset(), 2.0),
    ];
    for (i, set) in random_sets(cfg.seed, cfg.n_equivalence).into_iter().enumerate() {
        systems.push((RANDOM_NAMES[i % RANDOM_NAMES.len()], set, RANDOM_T_END));
    }
    for (name, set, t_end) in systems {
        c.attempt(name, |c| {
            let p1 = solve_path1(&set, t_end, cfg.tol)?;
            let p2 = solve_path(&set, t_end, cfg.tol, Path::Path2)?;
            let hi = window_end(p1.valid_to.min(p2.valid_to), t_end);
            let mut worst = 0.0f64;
            for t in sample_times(hi, TIME_SAMPLES) {
                let mut a = assemble(&p1, t)?;
                corrupt(&mut a, cfg);
                let b = assemble(&p2, t)?;
                worst = worst.max(map_distance(&a, &b));
            }
            c.push(Check::at_most(
                format!("{name} max |M₁ − M₂| on [0, {hi:.4}]"),
                worst,
                PATH_EQUIV_TOL,
            ));
            Ok(())
        });
    }
}

fn oracle_maps(c: &mut Collector, cfg: &SuiteConfig) {
    for sys in all_1d_systems(cfg) {
        c.attempt(sys.name, |c| {
            let phi = fundamental_matrix(&sys.set, sys.t_end, cfg.tol)?;
            for &path in sys.paths {
                let traj = solve_path(&sys.set, sys.t_end, cfg.tol, path)?;
                let mut worst = 0.0f64;
                for t in sample_times(sys.t_end, TIME_SAMPLES) {
                    let mut m = assemble_through(&traj, t)?;
                    corrupt(&mut m, cfg);
                    worst = worst.max(mat_distance(&m.m, &phi.at(t)?.phi));
                }
                c.push(Check::at_most(
                    format!("{} {} max |M − Φ|", sys.name, path_name(path)),
                    worst,
                    ORACLE_MAP_TOL,
                ));
            }
            Ok(())
        });
    }
    for (name, field, t_end, paths) in system_2d() {
        c.attempt(name, |c| {
            let phi = fundamental_matrix_2d(&field, t_end, cfg.tol)?;
            for &path in paths {
                let traj = solve_2d(&field, t_end, cfg.tol, path)?;
                let mut worst = 0.0f64;
                for t in sample_times(t_end, TIME_SAMPLES) {
                    let mut m = assemble_2d_through(&traj, t)?;
                    corrupt(&mut m, cfg);
                    worst = worst.max(mat_distance(&m.m, &phi.at(t)?.phi));
                }
                c.push(Check::at_most(
                    format!("{name} {} max |M − Φ|", path_name(path)),
                    worst,
                    ORACLE_MAP_TOL,
                ));
            }
            Ok(())
        });
    }
}

fn mat_distance(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let d = a.sub(b).max_abs();
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

fn classical(c: &mut Collector, cfg: &SuiteConfig) {
    let mut systems = vec![
        ("lp", CoefficientSet1D::linear_potential(1.0, TimeProfile::constant(1.0)), 2.0),
        ("iontrap", ion_trap_preset(), 2.0),
        ("kanai", kanai_set(&kanai_overdamped()), 2.0),
    ];
    for (i, set) in random_sets(cfg.seed, cfg.n_random).into_iter().enumerate() {
        systems.push((RANDOM_NAMES[i % RANDOM_NAMES.len()], set, RANDOM_T_END));
    }
    for (name, set, t_end) in systems {
        c.attempt(name, |c| {
            let traj = solve_path1(&set, t_end, cfg.tol)?;
            let flow = classical_flow(&set, &ClassicalState { t: 0.0, z: vec![0.0; 2] }, t_end, cfg.tol)?;
            let mut worst = 0.0f64;
            for t in sample_times(t_end, TIME_SAMPLES) {
                let s = traj.sample(t)?;
                let z = flow.at(t)?.z;
                worst = worst.max((s.lam - z[0]).abs()).max((-s.pi - z[1]).abs());
            }
            c.push(Check::at_most(format!("{name} max |(λ, −Π) − z|"), worst, CLASSICAL_TOL));
            Ok(())
        });
    }
    for (name, field, t_end, paths) in system_2d() {
        c.attempt(name, |c| {
            let traj = solve_2d(&field, t_end, cfg.tol, paths[0])?;
            let flow = classical_flow_2d(&field, &ClassicalState { t: 0.0, z: vec![0.0; 4] }, t_end, cfg.tol)?;
            let mut worst = 0.0f64;
            for t in sample_times(t_end, TIME_SAMPLES) {
                let s = traj.sample(t)?;
                let z = flow.at(t)?.z;
                for (a, b) in [s.lam_x, s.lam_y, -s.pi_x, -s.pi_y].iter().zip(&z) {
                    worst = worst.max((a - b).abs());
                }
            }
            c.push(Check::at_most(format!("{name} max |(λ, −Π) − z|"), worst, CLASSICAL_TOL));
            Ok(())
        });
    }
}

/// Sample times strictly inside `(0, t_hi]`.
fn interior_times(t_hi: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| t_hi * k as f64 / n as f64).collect()
}

fn push_relative(c: &mut Collector, label: &str, names: &[&str], closed: &[Vec<f64>], numeric: &[Vec<f64>]) {
    for (i, name) in names.iter().enumerate() {
        c.push(Check::at_most(
            format!("{label} {name}"),
            relative_sup(&closed[i], &numeric[i]),
            CLOSED_FORM_TOL,
        ));
    }
}

fn closed_forms(c: &mut Collector, cfg: &SuiteConfig) {
    const N: usize = 50;
    c.attempt("iontrap", |c| {
        let traj = solve_path1(&ion_trap_preset(), 2.0, cfg.tol)?;
        let (mut cl, mut nu) = (vec![vec![]; 3], vec![vec![]; 3]);
        for t in interior_times(window_end(traj.valid_to, 2.0), N) {
            let (a, p, b) = ion_trap_params(1.0, 1.0, 0.3, 5.0, t)?;
            let s = traj.sample(t)?;
            for (i, (x, y)) in [(a, s.alpha), (p, s.phi), (b, s.beta)].into_iter().enumerate() {
                cl[i].push(x);
                nu[i].push(y);
            }
        }
        push_relative(c, "iontrap", &["α", "φ", "β"], &cl, &nu);
        Ok(())
    });
    c.attempt("bsin", |c| {
        let field = bsin_preset();
        let traj = solve_2d(&field, 2.0, cfg.tol, Path::Path1)?;
        let (mut cl, mut nu) = (vec![vec![]; 4], vec![vec![]; 4]);
        for t in interior_times(window_end(traj.valid_to(), 2.0), N) {
            let (a, p, b, th) = bfield_sin_params(1.0, 2.0, 1.5, 1.0, t)?;
            let s = traj.radial.sample(t)?;
            let theta = traj.sample(t)?.theta;
            for (i, (x, y)) in [(a, s.alpha), (p, s.phi), (b, s.beta), (th, theta)].into_iter().enumerate() {
                cl[i].push(x);
                nu[i].push(y);
            }
        }
        push_relative(c, "bsin", &["α", "φ", "β", "θ"], &cl, &nu);
        Ok(())
    });
    let stiff = KanaiCaldirola { omega0: 2.0, ..kanai_underdamped() };
    for (name, p) in [("kanai", kanai_overdamped()), ("kanai-underdamped", kanai_underdamped()), ("kanai-stiff", stiff)] {
        c.attempt(name, |c| {
            let traj = solve_path1(&kanai_set(&p), 2.0, cfg.tol)?;
            let hi = window_end(traj.valid_to.min(p.caustic_time()?), 2.0);
            let (mut cl, mut nu) = (vec![vec![]; 7], vec![vec![]; 7]);
            for t in interior_times(hi, N) {
                let k = kanai_caldirola_params(&p, t)?;
                let s = traj.sample(t)?;
                let pairs = [
                    (k.alpha, s.alpha),
                    (k.phi, s.phi),
                    (k.beta, s.beta),
                    (k.gamma, s.gamma),
                    (k.lam, s.lam),
                    (k.pi, s.pi),
                    (k.s, s.s),
                ];
                for (i, (x, y)) in pairs.into_iter().enumerate() {
                    cl[i].push(x);
                    nu[i].push(y);
                }
            }
            push_relative(c, name, &["α", "φ", "β", "γ", "λ", "Π", "S"], &cl, &nu);
            if !p.overdamped() {
                let (imag, real_dev) = kanai_continuation(&p, &interior_times(hi, N))?;
                c.push(Check::at_most(format!("{name} max |Im| of continued closed forms"), imag, REALITY_TOL));
                c.push(Check::at_most(
                    format!("{name} continued vs real branch"),
                    real_dev,
                    REALITY_TOL,
                ));
            }
            Ok(())
        });
    }
    c.attempt("efield", |c| {
        let p = efield_params();
        let traj = solve_2d(&efield_preset(), 2.0, cfg.tol, Path::Path2)?;
        let names = ["λx", "λy", "Πx", "Πy", "θ", "ϕ", "Δ"];
        let (mut cl, mut printed, mut nu) = (vec![vec![]; 7], vec![vec![]; 4], vec![vec![]; 7]);
        for t in interior_times(window_end(traj.valid_to(), 2.0), N) {
            let v = efield_const_b_params(&p, t, GammaForm::Corrected)?;
            let w = efield_const_b_params(&p, t, GammaForm::AsPrinted)?;
            let s = traj.sample(t)?;
            let r = traj.radial.sample(t)?;
            let pairs = [
                (v.lam_x, s.lam_x),
                (v.lam_y, s.lam_y),
                (v.pi_x, s.pi_x),
                (v.pi_y, s.pi_y),
                (v.theta, s.theta),
                (v.phi, r.phi),
                (v.delta, traj.radial.delta),
            ];
            for (i, (x, y)) in pairs.into_iter().enumerate() {
                cl[i].push(x);
                nu[i].push(y);
            }
            for (i, x) in [w.lam_x, w.lam_y, w.pi_x, w.pi_y].into_iter().enumerate() {
                printed[i].push(x);
            }
        }
        push_relative(c, "efield", &names, &cl, &nu);
        let dev = (0..4).map(|i| relative_sup(&printed[i], &nu[i])).fold(0.0, f64::max);
        if dev > CLOSED_FORM_TOL {
            c.notes.push(format!(
                "erratum: the as-printed Γ⁴ = 16ω⁴ + Γ₋⁴ − 8ω²(Ω + ω_c)² gives translation parameters \
                 off by {dev:.3e} (relative) from the equations of motion; the checks use \
                 Γ⁴ = 16ω⁴ + Γ₋⁴ − 8ω²(Ω² + ω_c²), which matches them"
            ));
        }
        Ok(())
    });
}

/// Evaluates the over-damped formulas at imaginary `Ω` and returns
/// `(max |Im|, max relative deviation of Re from the real branch)`.
fn kanai_continuation(p: &KanaiCaldirola<f64>, times: &[f64]) -> Result<(f64, f64)> {
    type C = Complex<f64>;
    let one = C::new(1.0, 0.0);
    let (m, tau, w0, w1) = (p.m, p.tau, p.omega0, p.omega1);
    let om = C::new(1.0 - 4.0 * tau * tau * w0 * w0, 0.0).sqrt() / (2.0 * tau);
    let (mut imag, mut dev) = (0.0f64, 0.0f64);
    for &t in times {
        let ch = (om * t).cosh();
        let s = (om * t).sinh() / om;
        let alpha = (one - 4.0 * tau * tau * om * om) * s / (2.0 * tau * (s + 2.0 * tau * ch));
        let phi = (ch + s / (2.0 * tau)).ln();
        let beta = 2.0 * tau * s / (s + 2.0 * tau * ch);
        let (w0s, w1s) = (w0 * w0, w1 * w1);
        let d = tau * tau * (w1s - w0s) * (w1s - w0s) + w1s;
        let em = (-t / (2.0 * tau)).exp();
        let ep = (t / (2.0 * tau)).exp();
        let (cw, sw) = ((w1 * t).cos(), (w1 * t).sin());
        let lam = p.f0 / (m * w0s) * (one - em * ch - em / (2.0 * tau) * s)
            + p.f1 / (m * d)
                * (tau * w1 * em * ch
                    + w1 / 2.0 * (1.0 + 2.0 * tau * tau * w1s - 2.0 * tau * tau * w0s) * em * s
                    - tau * w1 * cw
                    + tau * tau * (w0s - w1s) * sw);
        let pi = -p.f0 * ep * s
            + p.f1 / d
                * (tau * tau * w1 * (w0s - w1s) * ep * (ch - ep * cw)
                    + tau * w1 / 2.0 * (w0s + w1s) * ep * s
                    - tau * w1s * (t / tau).exp() * sw);
        let (ra, rp, rb, _) = p.alpha_phi_beta(t)?;
        let (rl, rpi) = p.lambda_pi(t)?;
        for (z, r) in [(alpha, ra), (phi, rp), (beta, rb), (lam, rl), (pi, rpi)] {
            imag = imag.max(z.im.abs());
            dev = dev.max((z.re - r).abs() / r.abs().max(1.0));
        }
    }
    Ok((imag, dev))
}

/// Coherent state used by the wavefunction checks.
pub fn suite_wavepacket(n: usize, hbar: f64) -> Result<WaveGrid<f64>> {
    WaveGrid::gaussian(n, -20.0, 20.0, 1.0, 1.0, 0.5, hbar)
}

struct KernelCase {
    name: &'static str,
    set: CoefficientSet1D<f64>,
    t: f64,
    variants: &'static [KernelVariant],
    kanai: Option<KanaiCaldirola<f64>>,
}

fn kernel_cases() -> Vec<KernelCase> {
    use KernelVariant::*;
    vec![
        KernelCase {
            name: "lp",
            set: CoefficientSet1D::linear_potential(1.0, TimeProfile::constant(1.0)),
            t: 2.0,
            variants: &[LP, Path1, Generic],
            kanai: None,
        },
        KernelCase {
            name: "sho",
            set: CoefficientSet1D::harmonic(1.0, 1.0),
            t: 1.0,
            variants: &[Path1, Path2, Generic],
            kanai: None,
        },
        KernelCase { name: "iontrap", set: ion_trap_preset(), t: 1.0, variants: &[Path1, Path2, Generic], kanai: None },
        KernelCase {
            name: "kanai",
            set: kanai_set(&kanai_overdamped()),
            t: 1.0,
            variants: &[Path1, Path2],
            kanai: Some(kanai_overdamped()),
        },
        KernelCase {
            name: "kanai-underdamped",
            set: kanai_set(&kanai_underdamped()),
            t: 1.0,
            variants: &[Path1, Path2],
            kanai: Some(kanai_underdamped()),
        },
    ]
}

fn variant_name(v: KernelVariant) -> &'static str {
    match v {
        KernelVariant::Generic => "generic",
        KernelVariant::LP => "lp",
        KernelVariant::Path1 => "path1",
        KernelVariant::Path2 => "path2",
        KernelVariant::TwoDPath1 => "2d_path1",
        KernelVariant::TwoDPath2 => "2d_path2",
    }
}

fn case_kernels(case: &KernelCase, cfg: &SuiteConfig) -> Result<Vec<(String, GaussianKernel<f64>)>> {
    let mut out = Vec::new();
    for &v in case.variants {
        let path = if v == KernelVariant::Path2 { Path::Path2 } else { Path::Path1 };
        let traj = solve_path(&case.set, case.t, cfg.tol, path)?;
        out.push((variant_name(v).to_string(), kernel_build(&traj, case.t, v)?));
    }
    if let Some(p) = &case.kanai {
        out.push(("closed-form".to_string(), kanai_caldirola_kernel(p, case.t, case.set.hbar)?));
    }
    Ok(out)
}

fn infidelity(a: &WaveGrid<f64>, b: &WaveGrid<f64>) -> Result<f64> {
    Ok(1.0 - fidelity(a, b)?)
}

fn wavefunctions(c: &mut Collector, cfg: &SuiteConfig) {
    for case in kernel_cases() {
        c.attempt(case.name, |c| {
            let psi0 = suite_wavepacket(cfg.grid_points, case.set.hbar)?;
            let reference = split_step_evolve(&case.set, &psi0, case.t, cfg.split_steps)?;
            c.push(Check::at_least(
                format!("{} 1 − F(ψ₀, ψ(t)) (state moved)", case.name),
                infidelity(&psi0, &reference)?,
                MOVED_MIN,
            ));
            for (label, k) in case_kernels(&case, cfg)? {
                let psi = kernel_apply(&k, &psi0)?;
                c.push(Check::at_most(
                    format!("{} {label} 1 − F", case.name),
                    infidelity(&psi, &reference)?,
                    INFIDELITY_TOL,
                ));
            }
            Ok(())
        });
    }
}

/// Mehler kernel of `p²/2m + ½mω²x²`.
pub fn mehler(m: f64, omega: f64, hbar: f64, t: f64, x: f64, xp: f64) -> Complex<f64> {
    let s = (omega * t).sin();
    let pref = (Complex::new(m * omega, 0.0) / Complex::new(0.0, TAU * hbar * s)).sqrt();
    pref * Complex::new(
        0.0,
        m * omega / (2.0 * hbar * s) * ((x * x + xp * xp) * (omega * t).cos() - 2.0 * x * xp),
    )
    .exp()
}

fn kernels(c: &mut Collector, cfg: &SuiteConfig) {
    for (m, omega, t) in [(1.0, 1.0, FRAC_PI_4), (1.0, 1.0, 1.0), (2.0, 1.5, 0.6)] {
        let label = format!("mehler m={m} ω={omega} t={t:.4}");
        c.attempt(&label, |c| {
            let set = CoefficientSet1D::harmonic(m, omega);
            for v in [KernelVariant::Path1, KernelVariant::Path2, KernelVariant::Generic] {
                let path = if v == KernelVariant::Path2 { Path::Path2 } else { Path::Path1 };
                let traj = solve_path(&set, t, cfg.tol, path)?;
                let k = kernel_build(&traj, t, v)?;
                let mut worst = 0.0f64;
                for i in -2..=2 {
                    for j in -2..=2 {
                        let (x, xp) = (i as f64, j as f64 * 0.75);
                        let d = (k.eval(&[x], &[xp]) - mehler(m, omega, set.hbar, t, x, xp)).norm();
                        worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
                    }
                }
                c.push(Check::at_most(format!("{label} {}", variant_name(v)), worst, MEHLER_TOL));
            }
            Ok(())
        });
    }
    for case in kernel_cases() {
        c.attempt(case.name, |c| {
            let psi0 = suite_wavepacket(cfg.grid_points, case.set.hbar)?;
            for (label, k) in case_kernels(&case, cfg)? {
                let out = kernel_apply(&k, &psi0)?;
                let res = (out.norm() - psi0.norm()).abs() / psi0.norm();
                c.push(Check::at_most(format!("{} {label} unitarity", case.name), res, UNITARITY_TOL));
            }
            Ok(())
        });
    }
    for (name, field, _, paths) in system_2d() {
        let t = 1.0;
        c.attempt(name, |c| {
            let n = cfg.grid_points_2d;
            let psi0 = WaveGrid::gaussian_2d(n, -8.0, 8.0, 1.0, [0.5, -0.3], [0.2, 0.1], field.hbar)?;
            for &path in paths {
                let v = if path == Path::Path1 { KernelVariant::TwoDPath1 } else { KernelVariant::TwoDPath2 };
                let traj = solve_2d(&field, t, cfg.tol, path)?;
                let k = kernel_build_2d(&traj, t, v)?;
                let out = kernel_apply(&k, &psi0)?;
                let res = (out.norm() - psi0.norm()).abs() / psi0.norm();
                c.push(Check::at_most(format!("{name} {} unitarity", variant_name(v)), res, UNITARITY_TOL));
            }
            Ok(())
        });
    }
    for case in kernel_cases() {
        c.attempt(case.name, |c| {
            let variant = if case.name == "lp" { KernelVariant::LP } else { KernelVariant::Path1 };
            let t1 = 0.5 * case.t;
            let psi0 = suite_wavepacket(cfg.grid_points, case.set.hbar)?;
            let first = solve_path1(&case.set, t1, cfg.tol)?;
            let later = solve_path1(&case.set.shifted(t1), case.t - t1, cfg.tol)?;
            let whole = solve_path1(&case.set, case.t, cfg.tol)?;
            let mid = kernel_apply(&kernel_build(&first, t1, variant)?, &psi0)?;
            let composed = kernel_apply(&kernel_build(&later, case.t - t1, variant)?, &mid)?;
            let direct = kernel_apply(&kernel_build(&whole, case.t, variant)?, &psi0)?;
            c.push(Check::at_most(
                format!("{} semigroup split at t={t1:.3} 1 − F", case.name),
                infidelity(&composed, &direct)?,
                INFIDELITY_TOL,
            ));
            Ok(())
        });
    }
}

fn mathieu(c: &mut Collector) {
    let mut worst = 0.0f64;
    for a in [-1.0, 0.5, 3.0] {
        for q in [-1.0, 0.2, 1.5] {
            for z in [0.3, 1.0, 2.5] {
                let coarse = mathieu_c_tol::<f64>(a, q, z, 1e-12).c;
                let fine = mathieu_c_tol::<f64>(a, q, z, 5e-13).c;
                let d = (coarse - fine).abs();
                worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
            }
        }
    }
    c.push(Check::at_most("tolerance halving max |ΔC| on 3×3×3 lattice", worst, MATHIEU_HALVING_TOL));
    let v = mathieu_c_tol(1.0, 0.0, FRAC_PI_3, 1e-13).c;
    c.push(Check::at_most("|C(1, 0, π/3) − 1/2|", (v - 0.5).abs(), MATHIEU_VALUE_TOL));
}

/// Names of the preset parameter sets, for reports.
pub fn describe(cfg: &SuiteConfig) -> Vec<String> {
    let mut v: Vec<String> = preset_systems().iter().map(|s| s.name.to_string()).collect();
    v.extend(system_2d().iter().map(|s| s.0.to_string()));
    v.push(format!("{} random sets from seed {}", cfg.n_random, cfg.seed));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_sets_are_deterministic_and_positive() {
        let a = random_sets(7, 3);
        let b = random_sets(7, 3);
        assert_eq!(a, b);
        for s in &a {
            assert!(s.a.sampled_min(0.0, 2.0, 200).unwrap() > 0.0);
            assert!(s.c.sampled_min(0.0, 2.0, 200).unwrap() > 0.0);
        }
        assert_ne!(random_sets(8, 1), random_sets(7, 1));
    }

    #[test]
    fn relative_sup_norm() {
        assert_eq!(relative_sup(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((relative_sup(&[1.1, 2.0], &[1.0, 2.0]) - 0.05).abs() < 1e-12);
        assert_eq!(relative_sup(&[0.1], &[0.0]), 0.1);
        assert!(relative_sup(&[f64::NAN], &[0.0]).is_nan());
    }

    #[test]
    fn nan_checks_fail() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
        assert!(!Check::at_least("x", f64::NAN, 1.0).passed);
    }

    #[test]
    fn fast_criteria_pass() {
        let cfg = SuiteConfig::default();
        for id in [1, 9] {
            let r = run_criterion(id, &cfg).unwrap();
            assert!(r.passed, "{}", r.summary());
        }
        assert!(run_criterion(10, &cfg).is_none());
    }

    #[test]
    fn corruption_is_detected() {
        let cfg = SuiteConfig { n_random: 1, corrupt_maps: true, ..SuiteConfig::default() };
        assert!(!run_criterion(2, &cfg).unwrap().passed);
    }
}
