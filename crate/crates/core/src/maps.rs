//! Heisenberg-picture symplectic maps assembled from parameter trajectories.
//!
//! Ordering is `(x, p)` in 1D and `(x, y, p_x, p_y)` in 2D, so that
//! `z_H(t) = M z + shift` with `shift = (λ, −Π)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::paramflow::{LinearData, ParamTrajectory, ParamTrajectory2D, Path};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMap<T: Real = f64> {
    pub t: T,
    pub m: Mat<T>,
    pub shift: Vec<T>,
}

impl<T: Real> SymplecticMap<T> {
    pub fn identity(dof: usize) -> Self {
        Self {
            t: T::zero(),
            m: Mat::identity(2 * dof),
            shift: vec![T::zero(); 2 * dof],
        }
    }

    pub fn dof(&self) -> usize {
        self.m.dim() / 2
    }

    /// Applies the map to a phase-space point.
    pub fn apply(&self, z: &[T]) -> Vec<T> {
        self.m
            .mul_vec(z)
            .into_iter()
            .zip(&self.shift)
            .map(|(a, b)| a + *b)
            .collect()
    }

    /// The 1D block `G = [[G_qq, G_qp], [G_pq, G_pp]]` (for 2D, the radial block).
    pub fn g_block(&self) -> [T; 4] {
        let n = self.dof();
        [self.m[(0, 0)], self.m[(0, n)], self.m[(n, 0)], self.m[(n, n)]]
    }
}

fn check_window<T: Real>(t: T, valid_to: T) -> Result<()> {
    if t > valid_to {
        return Err(Error::Caustic {
            t: t.to_f64_lossy(),
            valid_to: valid_to.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `M` from the linear data, finite through caustics.
fn linear_block<T: Real>(traj: &ParamTrajectory<T>, t: T) -> Result<Mat<T>> {
    if t == T::zero() {
        return Ok(Mat::identity(2));
    }
    Ok(match traj.linear_data(t)? {
        LinearData::Path1 { u, w, v, vw, big_b } => {
            let eb = big_b.exp();
            Mat::from_rows(2, vec![eb * u, eb * v, eb * w, eb * vw])
        }
        LinearData::Path2 { gamma, phi, n } => {
            let d = traj.delta;
            let (s, c) = phi.sin_cos();
            let (eg, emg) = (gamma.exp(), (-gamma).exp());
            let p = Mat::from_rows(2, vec![eg * c, eg * s / d, -emg * d * s, emg * c]);
            &p * &Mat::from_rows(2, n.to_vec())
        }
    })
}

fn translation_shift<T: Real>(traj: &ParamTrajectory<T>, t: T) -> Result<Vec<T>> {
    let s = traj.sample(t)?;
    Ok(vec![s.lam, -s.pi])
}

fn assemble_checked<T: Real>(
    traj: &ParamTrajectory<T>,
    t: T,
    path: Path,
    enforce_window: bool,
) -> Result<SymplecticMap<T>> {
    if traj.path != path {
        return Err(Error::Domain(format!(
            "trajectory was solved with {:?}, not {:?}",
            traj.path, path
        )));
    }
    if enforce_window {
        check_window(t, traj.valid_to)?;
    }
    Ok(SymplecticMap {
        t,
        m: linear_block(traj, t)?,
        shift: translation_shift(traj, t)?,
    })
}

/// First-path map; errors beyond the first caustic.
pub fn assemble_path1<T: Real>(traj: &ParamTrajectory<T>, t: T) -> Result<SymplecticMap<T>> {
    assemble_checked(traj, t, Path::Path1, true)
}

/// Second-path map; errors beyond the first caustic.
pub fn assemble_path2<T: Real>(traj: &ParamTrajectory<T>, t: T) -> Result<SymplecticMap<T>> {
    assemble_checked(traj, t, Path::Path2, true)
}

/// Map for whichever path the trajectory used, restricted to the validity window.
pub fn assemble<T: Real>(traj: &ParamTrajectory<T>, t: T) -> Result<SymplecticMap<T>> {
    assemble_checked(traj, t, traj.path, true)
}

/// Map at any solved `t`, including past caustics.
pub fn assemble_through<T: Real>(traj: &ParamTrajectory<T>, t: T) -> Result<SymplecticMap<T>> {
    assemble_checked(traj, t, traj.path, false)
}

/// `[[G_qq, G_qp], [G_pq, G_pp]]` from first-path parameters, as printed.
pub fn path1_entries<T: Real>(gamma: T, phi: T, alpha: T, beta: T, delta: T) -> [T; 4] {
    let epg = (phi + gamma).exp();
    let epmg = (phi - gamma).exp();
    [
        epg,
        beta * epg / delta,
        -alpha * delta * epmg,
        (-phi - gamma).exp() - alpha * beta * epmg,
    ]
}

/// `[[G_qq, G_qp], [G_pq, G_pp]]` from second-path parameters, as printed.
pub fn path2_entries<T: Real>(gamma: T, phi: T, alpha: T, vphi: T, beta: T, delta: T) -> [T; 4] {
    let (s, c) = phi.sin_cos();
    let (ev, emv) = (vphi.exp(), (-vphi).exp());
    let (eg, emg) = (gamma.exp(), (-gamma).exp());
    [
        (c - alpha * s) * eg * ev,
        ((beta * c - alpha * beta * s) * ev + s * emv) * eg / delta,
        -(alpha * c + s) * delta * ev * emg,
        -((beta * s + alpha * beta * c) * ev - c * emv) * emg,
    ]
}

/// Rotation `R(θ) = [[cos θ, −sin θ], [sin θ, cos θ]]`.
pub fn rotation<T: Real>(theta: T) -> Mat<T> {
    let (s, c) = theta.sin_cos();
    Mat::from_rows(2, vec![c, -s, s, c])
}

fn assemble_2d_checked<T: Real>(
    traj: &ParamTrajectory2D<T>,
    t: T,
    enforce_window: bool,
) -> Result<SymplecticMap<T>> {
    if enforce_window {
        check_window(t, traj.valid_to())?;
    }
    let g = linear_block(&traj.radial, t)?;
    let s = traj.sample(t)?;
    let m = if t == T::zero() {
        Mat::identity(4)
    } else {
        g.kron(&rotation(s.theta))
    };
    Ok(SymplecticMap {
        t,
        m,
        shift: vec![s.lam_x, s.lam_y, -s.pi_x, -s.pi_y],
    })
}

/// 4×4 map with blocks `G_ij·R(θ)`; errors beyond the radial caustic.
pub fn assemble_2d<T: Real>(traj: &ParamTrajectory2D<T>, t: T) -> Result<SymplecticMap<T>> {
    assemble_2d_checked(traj, t, true)
}

pub fn assemble_2d_through<T: Real>(traj: &ParamTrajectory2D<T>, t: T) -> Result<SymplecticMap<T>> {
    assemble_2d_checked(traj, t, false)
}

/// `(|det M − 1|, ‖MᵀJM − J‖∞)`.
pub fn check_symplectic<T: Real>(map: &SymplecticMap<T>) -> (T, T) {
    let n = map.m.dim();
    let j = Mat::symplectic_j(n);
    let mtjm = &(&map.m.transpose() * &j) * &map.m;
    ((map.m.det() - T::one()).abs(), mtjm.sub(&j).max_abs())
}

/// Ehrenfest transport: `mean' = M mean + shift`, `cov' = M cov Mᵀ`.
pub fn evolve_gaussian_moments<T: Real>(
    map: &SymplecticMap<T>,
    mean: &[T],
    cov: &Mat<T>,
) -> Result<(Vec<T>, Mat<T>)> {
    let n = map.m.dim();
    if mean.len() != n || cov.dim() != n {
        return Err(Error::Domain(format!(
            "moments of dimension {} / {} do not match a {n}-dimensional map",
            mean.len(),
            cov.dim()
        )));
    }
    let scale = cov.max_abs().max(T::min_positive_value());
    if cov.sub(&cov.transpose()).max_abs() > scale * T::epsilon() * T::from_f64(16.0).unwrap() {
        return Err(Error::Domain("covariance matrix is not symmetric".into()));
    }
    let cov2 = &(&map.m * cov) * &map.m.transpose();
    Ok((map.apply(mean), cov2))
}

/// CSV: `t`, `M` row-major, shift, `det_res`, `form_res`.
pub fn write_maps_csv<W: Write>(out: W, maps: &[SymplecticMap<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = maps.first() else {
        return Ok(());
    };
    let n = first.m.dim();
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("M{i}{j}"));
        }
    }
    for i in 0..n {
        header.push(format!("shift{i}"));
    }
    header.push("det_res".into());
    header.push("form_res".into());
    w.write_record(&header)?;
    for m in maps {
        let (d, f) = check_symplectic(m);
        let mut row = vec![fmt17(m.t)];
        row.extend(m.m.as_slice().iter().map(|v| fmt17(*v)));
        row.extend(m.shift.iter().map(|v| fmt17(*v)));
        row.push(fmt17(d));
        row.push(fmt17(f));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// 17 significant digits, round-trip exact for `f64`.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientSet1D;
    use crate::paramflow::{solve_path1, solve_path2};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn free_particle_map() {
        let traj = solve_path1(&CoefficientSet1D::<f64>::free_particle(1.0), 2.0, 1e-12).unwrap();
        let m = assemble_path1(&traj, 1.5).unwrap();
        let g = m.g_block();
        assert!((g[0] - 1.0).abs() < 1e-14 && (g[1] - 1.5).abs() < 1e-12);
        assert!(g[2].abs() < 1e-14 && (g[3] - 1.0).abs() < 1e-14);
        assert_eq!(m.shift, vec![0.0, 0.0]);
    }

    #[test]
    fn sho_maps_both_paths() {
        let set = CoefficientSet1D::<f64>::harmonic(1.0, 1.0);
        let r = 0.5f64.sqrt();
        let m1 = assemble_path1(&solve_path1(&set, 1.0, 1e-12).unwrap(), FRAC_PI_4).unwrap();
        let m2 = assemble_path2(&solve_path2(&set, 1.0, 1e-12).unwrap(), FRAC_PI_4).unwrap();
        for m in [m1, m2] {
            let g = m.g_block();
            let expect = [r, r, -r, r];
            for k in 0..4 {
                assert!((g[k] - expect[k]).abs() < 1e-10, "{g:?}");
            }
        }
    }

    #[test]
    fn identity_at_zero() {
        let set = CoefficientSet1D::<f64>::ion_trap(1.0, 1.0, 0.3, 5.0);
        let m = assemble_path2(&solve_path2(&set, 1.0, 1e-10).unwrap(), 0.0).unwrap();
        assert_eq!(m, SymplecticMap::<f64>::identity(1));
        let m = assemble_path1(&solve_path1(&set, 1.0, 1e-10).unwrap(), 0.0).unwrap();
        assert_eq!(m, SymplecticMap::<f64>::identity(1));
    }

    #[test]
    fn caustic_refused() {
        let traj = solve_path1(&CoefficientSet1D::<f64>::harmonic(1.0, 1.0), 3.0, 1e-10).unwrap();
        assert!(matches!(assemble_path1(&traj, 2.0), Err(Error::Caustic { .. })));
        let m = assemble_through(&traj, 2.0).unwrap();
        assert!((m.g_block()[0] - 2.0f64.cos()).abs() < 1e-8);
        assert!(assemble_path2(&traj, 1.0).is_err());
    }

    #[test]
    fn printed_formulas_agree_with_linear_form() {
        let set = CoefficientSet1D::<f64>::kanai_caldirola(1.0, 1.0, 0.25, 0.0, 0.0, 0.0);
        let traj = solve_path1(&set, 1.0, 1e-12).unwrap();
        let s = traj.sample(1.0).unwrap();
        let g = path1_entries(s.gamma, s.phi, s.alpha, s.beta, traj.delta);
        let m = assemble_path1(&traj, 1.0).unwrap().g_block();
        for k in 0..4 {
            assert!((g[k] - m[k]).abs() < 1e-12);
        }
        assert!((g[0] - 0.9772).abs() < 1e-4);
    }

    #[test]
    fn symplectic_detector() {
        let mut m = SymplecticMap::<f64>::identity(1);
        assert_eq!(check_symplectic(&m), (0.0, 0.0));
        m.m[(0, 1)] += 0.1;
        m.m[(1, 1)] += 0.1;
        assert!(check_symplectic(&m).1 > 1e-3);
    }

    #[test]
    fn moments() {
        let traj = solve_path1(&CoefficientSet1D::<f64>::free_particle(1.0), 1.0, 1e-12).unwrap();
        let map = assemble_path1(&traj, 1.0).unwrap();
        let (mean, _) = evolve_gaussian_moments(&map, &[0.0, 1.0], &Mat::<f64>::identity(2)).unwrap();
        assert!((mean[0] - 1.0).abs() < 1e-12 && (mean[1] - 1.0).abs() < 1e-12);
        let bad = Mat::<f64>::from_rows(2, vec![1.0, 0.5, 0.0, 1.0]);
        assert!(evolve_gaussian_moments(&map, &[0.0, 0.0], &bad).is_err());

        let sho = solve_path1(&CoefficientSet1D::<f64>::harmonic(1.0, 1.0), 2.0, 1e-12).unwrap();
        let m = assemble_through(&sho, std::f64::consts::FRAC_PI_2).unwrap();
        let (_, cov) = evolve_gaussian_moments(&m, &[0.0, 0.0], &Mat::<f64>::identity(2)).unwrap();
        assert!(cov.sub(&Mat::<f64>::identity(2)).max_abs() < 1e-9);
    }
}
