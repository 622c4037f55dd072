//! Independent reference solvers: Hamilton's equations, the fundamental
//! matrix of the linearized flow, and a split-step grid propagator.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::coeffs::{CoefficientSet1D, FieldProfile2D};
use crate::error::{Error, Result};
use crate::greens::WaveGrid;
use crate::linalg::Mat;
use crate::ode::{integrate, DenseSolution, Options};
use crate::scalar::{lit, Real};

/// Phase-space point, positions then momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalState<T = f64> {
    pub t: T,
    pub z: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct ClassicalFlow<T> {
    sol: DenseSolution<T>,
}

impl<T: Real> ClassicalFlow<T> {
    pub fn at(&self, t: T) -> Result<ClassicalState<T>> {
        let z = self
            .sol
            .eval(t)
            .ok_or_else(|| Error::Domain(format!("t = {t} outside the integrated interval")))?;
        Ok(ClassicalState { t, z })
    }

    /// States at the accepted integrator steps.
    pub fn states(&self) -> Vec<ClassicalState<T>> {
        self.sol
            .times()
            .iter()
            .zip(self.sol.states())
            .map(|(t, z)| ClassicalState { t: *t, z: z.clone() })
            .collect()
    }
}

/// `2D` coefficients at `t`: `(1/m, k = eB/2m, c = K + e²B²/4m, eE_x, eE_y)`.
fn field_values<T: Real>(f: &FieldProfile2D<T>, t: T) -> Result<[T; 5]> {
    let m = f.mass.eval(t)?;
    let b = f.b_field.eval(t)?;
    let e = f.charge;
    let k = e * b / (lit::<T>(2.0) * m);
    let c = f.stiffness.eval(t)? + e * e * b * b / (lit::<T>(4.0) * m);
    Ok([T::one() / m, k, c, e * f.ex.eval(t)?, e * f.ey.eval(t)?])
}

fn check_start<T: Real>(z0: &ClassicalState<T>, dim: usize) -> Result<()> {
    if z0.z.len() != dim {
        return Err(Error::Domain(format!(
            "initial state has {} entries, expected {dim}",
            z0.z.len()
        )));
    }
    if z0.z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    Ok(())
}

/// Hamilton's equations `ẋ = ap + bx + d`, `ṗ = −(cx + bp + e)`.
pub fn classical_flow<T: Real>(
    coeffs: &CoefficientSet1D<T>,
    z0: &ClassicalState<T>,
    t_end: T,
    tol: T,
) -> Result<ClassicalFlow<T>> {
    check_start(z0, 2)?;
    let sol = integrate(
        |t, z, dz| {
            let k = coeffs.eval(t)?;
            dz[0] = k.a * z[1] + k.b * z[0] + k.d;
            dz[1] = -(k.c * z[0] + k.b * z[1] + k.e);
            Ok(())
        },
        z0.t,
        &z0.z,
        t_end,
        &Options::with_tol(tol),
    )?;
    Ok(ClassicalFlow { sol })
}

/// Charged particle: `H = |p|²/2m + ½c|x|² + k(x p_y − y p_x) + e E·x`.
pub fn classical_flow_2d<T: Real>(
    field: &FieldProfile2D<T>,
    z0: &ClassicalState<T>,
    t_end: T,
    tol: T,
) -> Result<ClassicalFlow<T>> {
    check_start(z0, 4)?;
    let sol = integrate(
        |t, z, dz| {
            let [inv_m, k, c, fx, fy] = field_values(field, t)?;
            dz[0] = inv_m * z[2] - k * z[1];
            dz[1] = inv_m * z[3] + k * z[0];
            dz[2] = -c * z[0] - k * z[3] - fx;
            dz[3] = -c * z[1] + k * z[2] - fy;
            Ok(())
        },
        z0.t,
        &z0.z,
        t_end,
        &Options::with_tol(tol),
    )?;
    Ok(ClassicalFlow { sol })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix<T = f64> {
    pub t: T,
    pub phi: Mat<T>,
}

#[derive(Debug, Clone)]
pub struct FundamentalFlow<T> {
    sol: DenseSolution<T>,
    dim: usize,
}

impl<T: Real> FundamentalFlow<T> {
    pub fn at(&self, t: T) -> Result<FundamentalMatrix<T>> {
        let v = self
            .sol
            .eval(t)
            .ok_or_else(|| Error::Domain(format!("t = {t} outside the integrated interval")))?;
        Ok(FundamentalMatrix {
            t,
            phi: Mat::from_rows(self.dim, v),
        })
    }
}

fn fundamental<T: Real, F>(dim: usize, t_end: T, tol: T, mut gen: F) -> Result<FundamentalFlow<T>>
where
    F: FnMut(T) -> Result<Mat<T>>,
{
    let y0 = Mat::<T>::identity(dim).as_slice().to_vec();
    let sol = integrate(
        |t, y, dy| {
            let a = gen(t)?;
            for i in 0..dim {
                for j in 0..dim {
                    let mut acc = T::zero();
                    for k in 0..dim {
                        acc = acc + a[(i, k)] * y[k * dim + j];
                    }
                    dy[i * dim + j] = acc;
                }
            }
            Ok(())
        },
        T::zero(),
        &y0,
        t_end,
        &Options::with_tol(tol),
    )?;
    Ok(FundamentalFlow { sol, dim })
}

/// `Φ̇ = AΦ`, `A = [[b, a], [−c, −b]]`, `Φ(0) = I`.
pub fn fundamental_matrix<T: Real>(coeffs: &CoefficientSet1D<T>, t_end: T, tol: T) -> Result<FundamentalFlow<T>> {
    coeffs.validate(t_end)?;
    fundamental(2, t_end, tol, |t| {
        let k = coeffs.eval(t)?;
        Ok(Mat::from_rows(2, vec![k.b, k.a, -k.c, -k.b]))
    })
}

/// 4×4 analogue in the ordering `(x, y, p_x, p_y)`.
pub fn fundamental_matrix_2d<T: Real>(field: &FieldProfile2D<T>, t_end: T, tol: T) -> Result<FundamentalFlow<T>> {
    field.validate(t_end)?;
    fundamental(4, t_end, tol, |t| {
        let [inv_m, k, c, ..] = field_values(field, t)?;
        let z = T::zero();
        Ok(Mat::from_rows(
            4,
            vec![
                z, -k, inv_m, z, //
                k, z, z, inv_m, //
                -c, z, z, -k, //
                z, -c, k, z,
            ],
        ))
    })
}

/// Strang splitting with midpoint-sampled coefficients; requires `b ≡ 0`.
///
/// Per step: `e^{−iV dt/2ħ} · F⁻¹ e^{−iT dt/ħ} F · e^{−iV dt/2ħ}` with
/// `V = ½cx² + ex + g` and `T = ½ap² + dp`.
pub fn split_step_evolve<T: Real>(
    coeffs: &CoefficientSet1D<T>,
    psi0: &WaveGrid<T>,
    t_end: T,
    n_steps: usize,
) -> Result<WaveGrid<T>> {
    if psi0.dof != 1 {
        return Err(Error::Domain(
            "split-step oracle is one-dimensional; propagate 2D states per axis in the rotating frame".into(),
        ));
    }
    if n_steps == 0 {
        return Ok(psi0.clone());
    }
    coeffs.validate(t_end)?;
    let b_max = coeffs
        .b
        .as_constant()
        .map(|v| v.abs())
        .unwrap_or_else(|| T::infinity());
    if b_max != T::zero() {
        return Err(Error::Domain(
            "split-step oracle does not support b ≠ 0 (xp + px term); use the fundamental-matrix oracle".into(),
        ));
    }
    let n = psi0.n;
    let hbar = psi0.hbar;
    let dt = t_end / T::from_usize(n_steps).unwrap();
    let xs = psi0.coords();
    let len = psi0.dx * T::from_usize(n).unwrap();
    let ps: Vec<T> = (0..n)
        .map(|m| {
            let mm = if m < n.div_ceil(2) { m as f64 } else { m as f64 - n as f64 };
            hbar * T::TAU() * lit::<T>(mm) / len
        })
        .collect();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let inv_n = T::one() / T::from_usize(n).unwrap();
    let half = lit::<T>(0.5);
    let mut psi = psi0.amps.clone();
    for step in 0..n_steps {
        let tm = dt * (T::from_usize(step).unwrap() + half);
        let k = coeffs.eval(tm)?;
        let vphase = |x: T| {
            let v = half * k.c * x * x + k.e * x + k.g;
            Complex::new(T::zero(), -v * dt * half / hbar).exp()
        };
        for (a, &x) in psi.iter_mut().zip(&xs) {
            *a = *a * vphase(x);
        }
        fwd.process(&mut psi);
        for (a, &p) in psi.iter_mut().zip(&ps) {
            let tk = half * k.a * p * p + k.d * p;
            *a = *a * Complex::new(T::zero(), -tk * dt / hbar).exp() * inv_n;
        }
        inv.process(&mut psi);
        for (a, &x) in psi.iter_mut().zip(&xs) {
            *a = *a * vphase(x);
        }
    }
    WaveGrid::new(1, n, psi0.x_min, psi0.dx, psi, hbar)
}

/// `|⟨ψ₁|ψ₂⟩| / (‖ψ₁‖‖ψ₂‖)`.
pub fn fidelity<T: Real>(psi1: &WaveGrid<T>, psi2: &WaveGrid<T>) -> Result<T> {
    let ov = psi1.inner(psi2)?;
    Ok(ov.norm() / (psi1.norm() * psi2.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::TimeProfile;
    use crate::maps::{assemble_2d, assemble_path1, evolve_gaussian_moments};
    use crate::paramflow::{solve_2d, solve_path1, Path};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

    fn start(z: &[f64]) -> ClassicalState<f64> {
        ClassicalState { t: 0.0, z: z.to_vec() }
    }

    #[test]
    fn flows() {
        let free = classical_flow(&CoefficientSet1D::<f64>::free_particle(1.0), &start(&[0.0, 1.0]), 2.0, 1e-12)
            .unwrap();
        let z = free.at(2.0).unwrap().z;
        assert!((z[0] - 2.0).abs() < 1e-12 && (z[1] - 1.0).abs() < 1e-12);
        let sho = classical_flow(&CoefficientSet1D::<f64>::harmonic(1.0, 1.0), &start(&[1.0, 0.0]), 2.0, 1e-12)
            .unwrap();
        let z = sho.at(FRAC_PI_2).unwrap().z;
        assert!(z[0].abs() < 1e-10 && (z[1] + 1.0).abs() < 1e-10);
        let lp = CoefficientSet1D::<f64>::linear_potential(1.0, TimeProfile::constant(1.0));
        let z = classical_flow(&lp, &start(&[0.0, 0.0]), 2.0, 1e-12).unwrap().at(2.0).unwrap().z;
        let s = solve_path1(&lp, 2.0, 1e-12).unwrap().sample(2.0).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-10 && (z[1] - 2.0).abs() < 1e-10);
        assert!((z[0] - s.lam).abs() < 1e-10 && (z[1] + s.pi).abs() < 1e-10);
    }

    #[test]
    fn fundamental_matrices() {
        let f = fundamental_matrix(&CoefficientSet1D::<f64>::free_particle(1.0), 2.0, 1e-12).unwrap();
        let m = f.at(1.5).unwrap().phi;
        assert!(m.sub(&Mat::from_rows(2, vec![1.0, 1.5, 0.0, 1.0])).max_abs() < 1e-12);
        let f = fundamental_matrix(&CoefficientSet1D::<f64>::harmonic(1.0, 1.0), 1.0, 1e-12).unwrap();
        let m = f.at(FRAC_PI_4).unwrap().phi;
        let r = 0.5f64.sqrt();
        assert!(m.sub(&Mat::from_rows(2, vec![r, r, -r, r])).max_abs() < 1e-10);
        let set = CoefficientSet1D::<f64>::ion_trap(1.0, 1.0, 0.3, 5.0);
        let m = fundamental_matrix(&set, 0.5, 1e-12).unwrap().at(0.5).unwrap().phi;
        assert!((m.det() - 1.0).abs() < 1e-9);
        let a = assemble_path1(&solve_path1(&set, 0.5, 1e-12).unwrap(), 0.5).unwrap();
        assert!(a.m.sub(&m).max_abs() < 1e-9);
    }

    #[test]
    fn fundamental_2d_matches_map() {
        let f = FieldProfile2D::<f64>::driven_e(1.0, 1.0, 2.0, 0.5, 0.3, 0.0, 0.0, 0.2, 1.3, FRAC_PI_2);
        let phi = fundamental_matrix_2d(&f, 1.0, 1e-12).unwrap().at(1.0).unwrap().phi;
        let traj = solve_2d(&f, 1.0, 1e-12, Path::Path2).unwrap();
        let m = assemble_2d(&traj, 1.0).unwrap();
        assert!(m.m.sub(&phi).max_abs() < 1e-9);
        let z = classical_flow_2d(&f, &start(&[0.0; 4]), 1.0, 1e-12).unwrap().at(1.0).unwrap().z;
        for (a, b) in z.iter().zip(&m.shift) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn split_step_basics() {
        let psi = WaveGrid::<f64>::gaussian(256, -10.0, 10.0, 1.0, 0.5, 0.0, 1.0).unwrap();
        let sho = CoefficientSet1D::<f64>::harmonic(1.0, 1.0);
        assert_eq!(split_step_evolve(&sho, &psi, 1.0, 0).unwrap(), psi);
        let mut bad = sho.clone();
        bad.b = TimeProfile::constant(0.1);
        assert!(split_step_evolve(&bad, &psi, 1.0, 10).is_err());
        let out = split_step_evolve(&sho, &psi, TAU, 4096).unwrap();
        assert!(fidelity(&out, &psi).unwrap() >= 1.0 - 1e-6);
    }

    #[test]
    fn split_step_free_spreading() {
        let psi = WaveGrid::<f64>::gaussian(1024, -20.0, 20.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let free = CoefficientSet1D::<f64>::free_particle(1.0);
        let out = split_step_evolve(&free, &psi, 2.0, 100).unwrap();
        let (_, cov) = out.moments().unwrap();
        let (_, cov0) = psi.moments().unwrap();
        let map = assemble_path1(&solve_path1(&free, 2.0, 1e-12).unwrap(), 2.0).unwrap();
        let (_, cov_map) = evolve_gaussian_moments(&map, &[0.0, 0.0], &cov0).unwrap();
        assert!(cov.sub(&cov_map).max_abs() < 1e-5);
    }

    #[test]
    fn fidelity_properties() {
        let psi = WaveGrid::<f64>::gaussian(512, -15.0, 15.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-14);
        let mut ipsi = psi.clone();
        ipsi.amps.iter_mut().for_each(|a| *a = *a * Complex::i());
        assert!((fidelity(&psi, &ipsi).unwrap() - 1.0).abs() < 1e-14);
        // First Hermite mode: x·ψ₀.
        let mut h1 = psi.clone();
        for (a, x) in h1.amps.iter_mut().zip(psi.coords()) {
            *a = *a * x;
        }
        assert!(fidelity(&psi, &h1).unwrap() <= 1e-10);
        let other = WaveGrid::<f64>::gaussian(256, -15.0, 15.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!(fidelity(&psi, &other).is_err());
    }
}
