use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde_json::{json, Value};

use liegate_core::closedforms::{bfield_sin_params, efield_const_b_params, ion_trap_params, kanai_caldirola_params, GammaForm};
use liegate_core::greens::{kernel_apply, kernel_build, kernel_build_2d};
use liegate_core::maps::{assemble_2d_through, assemble_through, write_maps_csv};
use liegate_core::paramflow::{solve_2d, solve_path};
use liegate_core::suite::{run_criterion, CRITERIA};
use liegate_core::quadops::structure_constants;
use liegate_core::{Algebra, Complex, GaussianKernel, KernelVariant, ParamSample, Path, WaveGrid};

use crate::config::{Closed1D, Closed2D, Problem, Resolved, RunConfig, System};
use crate::output::{create, finite, fmt17, to_json, write_json};
use crate::{AlgebraArg, CliError, KernelArgs, RunArgs, StructureArgs, VerifyArgs, EXIT_VERIFY};

fn load(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn out_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = flag.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::config("out", format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn linspace(t_end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

fn value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn path_name(p: Path) -> &'static str {
    match p {
        Path::Path1 => "path1",
        Path::Path2 => "path2",
    }
}

/// Critical damping has no closed form; reject it before solving anything.
fn precheck(res: &Resolved) -> Result<(), CliError> {
    if let Problem::OneD { closed: Closed1D::Kanai(p), .. } = &res.problem {
        p.big_omega()?;
    }
    Ok(())
}

/// Closed-form values at `t`, or the reason they are unavailable.
fn closed_form_at(problem: &Problem, t: f64) -> Value {
    let r: liegate_core::Result<Value> = match problem {
        Problem::OneD { closed: Closed1D::None, .. } | Problem::TwoD { closed: Closed2D::None, .. } => {
            return Value::Null
        }
        Problem::OneD { closed: Closed1D::IonTrap(p), .. } => ion_trap_params(p.m, p.stiffness, p.k, p.omega, t)
            .map(|(alpha, phi, beta)| json!({ "t": t, "alpha": alpha, "phi": phi, "beta": beta })),
        Problem::OneD { closed: Closed1D::Kanai(p), .. } => kanai_caldirola_params(p, t).map(|s| value(&s)),
        Problem::TwoD { closed: Closed2D::Bsin(p), .. } => bfield_sin_params(p.m, p.b0, p.omega, p.charge, t)
            .map(|(alpha, phi, beta, theta)| json!({ "t": t, "alpha": alpha, "phi": phi, "beta": beta, "theta": theta })),
        Problem::TwoD { closed: Closed2D::Efield(p), .. } => efield_const_b_params(p, t, GammaForm::Corrected)
            .and_then(|v| Ok(json!({ "t": t, "values": value(&v), "constants": value(&p.constants(GammaForm::Corrected)?) }))),
    };
    r.unwrap_or_else(|e| json!({ "error": e.to_string() }))
}

const PARAM_COLUMNS: [&str; 10] = ["t", "S", "lam", "Pi", "gamma", "alpha", "phi", "beta", "u", "udot"];

fn sample_row(s: &ParamSample<f64>) -> Vec<String> {
    [s.t, s.s, s.lam, s.pi, s.gamma, s.alpha, s.phi, s.beta, s.u, s.udot]
        .iter()
        .map(|v| fmt17(*v))
        .collect()
}

pub fn params(args: &RunArgs) -> Result<u8, CliError> {
    let cfg = load(&args.config)?;
    let res = cfg.resolve(args.system, args.path, args.t_end, args.tol)?;
    let dir = out_dir(&args.out, &cfg)?;
    precheck(&res)?;
    let times = linspace(res.t_end, res.samples);
    let summary = match &res.problem {
        Problem::OneD { set, .. } => {
            let traj = solve_path(set, res.t_end, res.tol, res.path)?;
            let mut w = csv::Writer::from_writer(create(&dir.join("params.csv"))?);
            let mut header: Vec<&str> = PARAM_COLUMNS.to_vec();
            if res.path == Path::Path2 {
                header.push("vphi");
            }
            w.write_record(&header).map_err(csv_err)?;
            let mut maps = Vec::with_capacity(times.len());
            for &t in &times {
                let s = traj.sample(t)?;
                let mut row = sample_row(&s);
                if res.path == Path::Path2 {
                    row.push(fmt17(s.vphi));
                }
                w.write_record(&row).map_err(csv_err)?;
                maps.push(assemble_through(&traj, t)?);
            }
            w.flush()?;
            write_maps_csv(create(&dir.join("maps.csv"))?, &maps)?;
            let last = traj.sample(res.t_end)?;
            json!({
                "system": res.system.name(),
                "path": path_name(res.path),
                "t_end": res.t_end,
                "tol": res.tol,
                "hbar": set.hbar,
                "samples": res.samples,
                "delta": traj.delta,
                "valid_to": finite(traj.valid_to),
                "reduced": traj.reduced,
                "final": value(&last),
                "closed_form": closed_form_at(&res.problem, res.t_end),
            })
        }
        Problem::TwoD { field, .. } => {
            let traj = solve_2d(field, res.t_end, res.tol, res.path)?;
            let mut w = csv::Writer::from_writer(create(&dir.join("params.csv"))?);
            let mut header = vec!["t", "S", "theta", "lam_x", "lam_y", "Pi_x", "Pi_y"];
            header.extend(["gamma", "alpha", "phi", "beta", "u", "udot"]);
            w.write_record(&header).map_err(csv_err)?;
            let mut maps = Vec::with_capacity(times.len());
            for &t in &times {
                let s = traj.sample(t)?;
                let r = traj.radial.sample(t)?;
                let row: Vec<String> = [
                    t, s.s, s.theta, s.lam_x, s.lam_y, s.pi_x, s.pi_y, r.gamma, r.alpha, r.phi, r.beta, r.u, r.udot,
                ]
                .iter()
                .map(|v| fmt17(*v))
                .collect();
                w.write_record(&row).map_err(csv_err)?;
                maps.push(assemble_2d_through(&traj, t)?);
            }
            w.flush()?;
            write_maps_csv(create(&dir.join("maps.csv"))?, &maps)?;
            json!({
                "system": res.system.name(),
                "path": path_name(res.path),
                "t_end": res.t_end,
                "tol": res.tol,
                "hbar": field.hbar,
                "samples": res.samples,
                "delta": traj.radial.delta,
                "valid_to": finite(traj.valid_to()),
                "reduced": traj.radial.reduced,
                "final": value(&traj.sample(res.t_end)?),
                "final_radial": value(&traj.radial.sample(res.t_end)?),
                "closed_form": closed_form_at(&res.problem, res.t_end),
            })
        }
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(0)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::from(liegate_core::Error::from(e))
}

fn default_variant(system: System, path: Path, dof: usize) -> KernelVariant {
    match (system, path, dof) {
        (System::Lp, ..) => KernelVariant::LP,
        (_, Path::Path1, 1) => KernelVariant::Path1,
        (_, Path::Path2, 1) => KernelVariant::Path2,
        (_, Path::Path1, _) => KernelVariant::TwoDPath1,
        (_, Path::Path2, _) => KernelVariant::TwoDPath2,
    }
}

fn complex(z: Complex) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn complex_list(v: &[Complex]) -> Value {
    Value::Array(v.iter().map(|z| complex(*z)).collect())
}

fn kernel_json(k: &GaussianKernel<f64>, system: System) -> Value {
    json!({
        "system": system.name(),
        "variant": value(&k.variant),
        "dof": k.dof,
        "t": k.t,
        "hbar": k.hbar,
        "valid_to": finite(k.valid.1),
        "form": "prefactor * exp(i*(x^T Q x + x'^T Q' x' + x^T C x' + l.x + l'.x' + s))",
        "prefactor": complex(k.prefactor),
        "Q": complex_list(&k.quad_xx),
        "Q_prime": complex_list(&k.quad_xpxp),
        "C": complex_list(&k.quad_xxp),
        "l": complex_list(&k.lin_x),
        "l_prime": complex_list(&k.lin_xp),
        "s": complex(k.scal),
    })
}

pub fn kernel(args: &KernelArgs) -> Result<u8, CliError> {
    let a = &args.run;
    let cfg = load(&a.config)?;
    let res = cfg.resolve(a.system, a.path, a.t_end, a.tol)?;
    let dir = out_dir(&a.out, &cfg)?;
    let apply = args.apply.clone().or_else(|| cfg.apply.clone());
    precheck(&res)?;
    let (k, hbar) = match &res.problem {
        Problem::OneD { set, .. } => {
            let variant = cfg.variant.unwrap_or_else(|| default_variant(res.system, res.path, 1));
            let path = match variant {
                KernelVariant::Path2 => Path::Path2,
                KernelVariant::Generic => res.path,
                _ => Path::Path1,
            };
            let traj = solve_path(set, res.t_end, res.tol, path)?;
            (kernel_build(&traj, res.t_end, variant)?, set.hbar)
        }
        Problem::TwoD { field, .. } => {
            let variant = cfg.variant.unwrap_or_else(|| default_variant(res.system, res.path, 2));
            let path = match variant {
                KernelVariant::TwoDPath2 => Path::Path2,
                KernelVariant::TwoDPath1 => Path::Path1,
                _ => res.path,
            };
            let traj = solve_2d(field, res.t_end, res.tol, path)?;
            (kernel_build_2d(&traj, res.t_end, variant)?, field.hbar)
        }
    };
    let mut doc = kernel_json(&k, res.system);
    if let Some(spec) = apply {
        let psi0 = initial_state(&spec, &cfg, k.dof, hbar)?;
        let psi = kernel_apply(&k, &psi0)?;
        write_wave(&dir.join("psi_out.csv"), &psi)?;
        doc["apply"] = json!({
            "spec": spec,
            "n": psi0.n,
            "norm_in": psi0.norm(),
            "norm_out": psi.norm(),
        });
    }
    write_json(&dir.join("kernel.json"), &doc)?;
    Ok(0)
}

fn initial_state(spec: &str, cfg: &RunConfig, dof: usize, hbar: f64) -> Result<WaveGrid<f64>, CliError> {
    let Some(rest) = spec.strip_prefix("gaussian") else {
        let path = FsPath::new(spec);
        let file = fs::File::open(path)
            .map_err(|e| CliError::config("apply", format!("cannot open {}: {e}", path.display())))?;
        if dof != 1 {
            return Err(CliError::config("apply", "file input is supported for 1D kernels only"));
        }
        let reader = std::io::BufReader::new(file);
        let grid = if path.extension().is_some_and(|e| e == "bin") {
            WaveGrid::read_bin(reader, hbar)
        } else {
            WaveGrid::read_csv(reader, hbar)
        };
        return grid.map_err(|e| CliError::config("apply", e.to_string()));
    };
    let (mut sigma, mut x0, mut p0, mut y0, mut py) = (1.0, 0.0, 0.0, 0.0, 0.0);
    let params = match rest.strip_prefix(':') {
        Some(p) => p,
        None if rest.is_empty() => "",
        None => return Err(CliError::config("apply", format!("unrecognized state spec {spec:?}"))),
    };
    for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
        let (key, val) = kv
            .split_once('=')
            .ok_or_else(|| CliError::config("apply", format!("expected key=value, got {kv:?}")))?;
        let v: f64 = val
            .trim()
            .parse()
            .map_err(|_| CliError::config("apply", format!("bad number in {kv:?}")))?;
        match key.trim() {
            "sigma" => sigma = v,
            "x0" => x0 = v,
            "p0" | "px" => p0 = v,
            "y0" => y0 = v,
            "py" => py = v,
            other => return Err(CliError::config("apply", format!("unknown Gaussian parameter {other:?}"))),
        }
    }
    let g = cfg.grid(dof)?;
    let grid = if dof == 1 {
        WaveGrid::gaussian(g.n, g.x_min, g.x_max, sigma, x0, p0, hbar)
    } else {
        WaveGrid::gaussian_2d(g.n, g.x_min, g.x_max, sigma, [x0, y0], [p0, py], hbar)
    };
    grid.map_err(|e| CliError::config("apply", e.to_string()))
}

fn write_wave(path: &FsPath, psi: &WaveGrid<f64>) -> Result<(), CliError> {
    if psi.dof == 1 {
        psi.write_csv(create(path)?)?;
        return Ok(());
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["x", "y", "re", "im"]).map_err(csv_err)?;
    let xs = psi.coords();
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in xs.iter().enumerate() {
            let a = psi.amps[i * psi.n + j];
            w.write_record([fmt17(*x), fmt17(*y), fmt17(a.re), fmt17(a.im)])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Result<u8, CliError> {
    let cfg = load(&args.config)?;
    let dir = out_dir(&args.out, &cfg)?;
    let mut suite = cfg.suite.clone().unwrap_or_default();
    if let Some(seed) = args.seed.or(cfg.seed) {
        suite.seed = seed;
    }
    suite.corrupt_maps = args.inject_corruption;
    for (v, name) in [(suite.n_random, "suite.n_random"), (suite.grid_points, "suite.grid_points")] {
        if v == 0 {
            return Err(CliError::config(name, "must be positive"));
        }
    }
    if suite.grid_points_2d < 2 {
        return Err(CliError::config("suite.grid_points_2d", "need at least 2 points"));
    }
    if !(suite.tol > 0.0 && suite.tol < 0.1) {
        return Err(CliError::config("suite.tol", format!("must lie in (0, 0.1), got {}", suite.tol)));
    }
    let ids: Vec<u32> = match &cfg.criteria {
        Some(ids) => {
            for id in ids {
                if !CRITERIA.iter().any(|c| c.0 == *id) {
                    return Err(CliError::config("criteria", format!("no criterion {id}")));
                }
            }
            ids.clone()
        }
        None => CRITERIA.iter().map(|c| c.0).collect(),
    };
    let mut reports = Vec::new();
    for id in ids {
        let r = run_criterion(id, &suite).expect("criterion ids were validated");
        println!("{}", r.summary());
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed);
    let structure_checks_passed = reports
        .iter()
        .filter(|r| r.id == 1)
        .flat_map(|r| r.checks.iter())
        .filter(|c| c.passed && !c.at_least)
        .count();
    let doc = json!({
        "passed": passed,
        "seed": suite.seed,
        "suite": value(&suite),
        "structure_constant_checks_passed": structure_checks_passed,
        "criteria": value(&reports),
    });
    let text = to_json(&doc);
    fs::write(dir.join("report.json"), text)?;
    println!("{}", if passed { "all criteria passed" } else { "verification FAILED" });
    Ok(if passed { 0 } else { EXIT_VERIFY })
}

pub fn structure(args: &StructureArgs) -> Result<u8, CliError> {
    let dir = out_dir(&args.out, &RunConfig::default())?;
    let algebras: Vec<Algebra> = match args.algebra {
        None => Algebra::all().to_vec(),
        Some(AlgebraArg::Lp) => vec![Algebra::LP],
        Some(AlgebraArg::Gho) => vec![Algebra::GHO],
        Some(AlgebraArg::Cp) => vec![Algebra::CP],
    };
    for alg in algebras {
        let table = structure_constants(alg)?;
        let mut w = csv::Writer::from_writer(create(&dir.join(format!("structure_{}.csv", alg.name())))?);
        w.write_record(["i", "j", "k", "num", "den"]).map_err(csv_err)?;
        for (i, j, k, c) in &table.entries {
            w.write_record([i.to_string(), j.to_string(), k.to_string(), c.numer().to_string(), c.denom().to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        println!("{}: {} nonzero constants over {} pairs", alg.name(), table.entries.len(), table.pairs_checked);
    }
    Ok(0)
}
