//! Transformation-parameter ODEs for both factorization paths and the 2D system.
//!
//! Path 1 integrates the linearized Riccati equation in first-order form
//! `u̇ = a w`, `ẇ = −c u − 2b w` together with a second solution `(v, v̇/a)`,
//! the translation parameters and `B = ∫b`. Then
//! `α = −u̇/u`, `φ = B + ln u − γ`, `β = Δ v/u`.
//!
//! Path 2 integrates the Arnold phase `φ = ∫√(ac)` and the 2×2 fundamental
//! matrix `N` of the residual generator left after the Arnold step,
//! `Ṅ = q[[cos2φ, sin2φ/Δ],[Δ sin2φ, −cos2φ]] N` with `q = b − γ̇`.
//! Then `e^ϕ = N₁₁`, `β = Δ N₁₂/N₁₁`, `α = −N₂₁/(Δ N₁₁)`.

use serde::{Deserialize, Serialize};

use crate::coeffs::{reduce_2d, CoeffValues, CoefficientSet1D, FieldProfile2D, TimeProfile};
use crate::error::{Error, Result};
use crate::ode::{integrate, DenseSolution, Options};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Path {
    Path1,
    Path2,
}

/// Transformation parameters at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamSample<T = f64> {
    pub t: T,
    #[serde(rename = "S")]
    pub s: T,
    pub lam: T,
    #[serde(rename = "Pi")]
    pub pi: T,
    pub gamma: T,
    pub alpha: T,
    pub phi: T,
    pub vphi: T,
    pub beta: T,
    pub u: T,
    pub udot: T,
}

/// Raw linear-algebra data behind a sample, used to assemble maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearData<T> {
    /// `M = e^B [[u, v], [w, vw]]`.
    Path1 { u: T, w: T, v: T, vw: T, big_b: T },
    /// `M = diag(e^γ, e^{−γ}) · Arnold(φ) · N`.
    Path2 { gamma: T, phi: T, n: [T; 4] },
}

/// Solved parameter trajectory of one path.
#[derive(Debug, Clone)]
pub struct ParamTrajectory<T: Real = f64> {
    pub path: Path,
    pub delta: T,
    pub t_end: T,
    /// First caustic, `+∞` if none in `[0, t_end]`.
    pub valid_to: T,
    /// Accepted integrator steps.
    pub t_grid: Vec<T>,
    pub samples: Vec<ParamSample<T>>,
    /// Path 2 only: the `b − γ̇ ≡ 0` shortcut was taken.
    pub reduced: bool,
    a0: T,
    c0: T,
    coeffs: CoefficientSet1D<T>,
    sol: DenseSolution<T>,
}

const P1_U: usize = 3;
const P1_W: usize = 4;
const P1_V: usize = 5;
const P1_VW: usize = 6;
const P1_B: usize = 7;

const P2_PHI: usize = 3;
const P2_N: usize = 4;

fn translation_rhs<T: Real>(k: &CoeffValues<T>, y: &[T], dy: &mut [T]) {
    let (lam, pi) = (y[0], y[1]);
    let half: T = lit(0.5);
    let lam_dot = k.b * lam - k.a * pi + k.d;
    dy[0] = lam_dot;
    dy[1] = k.c * lam - k.b * pi + k.e;
    dy[2] = k.g + half * k.a * pi * pi + half * k.c * lam * lam - k.b * lam * pi - k.d * pi
        + k.e * lam
        + lam_dot * pi;
}

fn check_positive<T: Real>(p: &TimeProfile<T>, t_end: T, what: &str) -> Result<()> {
    let m = p.sampled_min(T::zero(), t_end, 2000)?;
    if m <= T::zero() {
        return Err(Error::Precondition(format!(
            "{what} must be positive on [0, {t_end}] (minimum sampled value {m})"
        )));
    }
    Ok(())
}

/// Translation parameters `(S, λ, Π)` on `[0, t_end]`.
#[derive(Debug, Clone)]
pub struct Translation<T> {
    sol: DenseSolution<T>,
}

impl<T: Real> Translation<T> {
    /// `(S, λ, Π)` at `t`.
    pub fn at(&self, t: T) -> Result<(T, T, T)> {
        let y = self
            .sol
            .eval(t)
            .ok_or_else(|| Error::Domain(format!("t = {t} outside the solved interval")))?;
        Ok((y[2], y[0], y[1]))
    }

    pub fn times(&self) -> &[T] {
        self.sol.times()
    }
}

/// Integrates `λ̇ = bλ − aΠ + d`, `Π̇ = cλ − bΠ + e` and `Ṡ = L` from zero.
pub fn solve_linear_translation<T: Real>(
    coeffs: &CoefficientSet1D<T>,
    t_end: T,
    tol: T,
) -> Result<Translation<T>> {
    coeffs.validate(t_end)?;
    let sol = integrate(
        |t, y, dy| {
            let k = coeffs.eval(t)?;
            translation_rhs(&k, y, dy);
            Ok(())
        },
        T::zero(),
        &[T::zero(); 3],
        t_end,
        &Options::with_tol(tol),
    )?;
    Ok(Translation { sol })
}

/// First factorization path.
pub fn solve_path1<T: Real>(
    coeffs: &CoefficientSet1D<T>,
    t_end: T,
    tol: T,
) -> Result<ParamTrajectory<T>> {
    coeffs.validate(t_end)?;
    check_positive(&coeffs.a, t_end, "a(t)")?;
    let a0 = coeffs.a.eval(T::zero())?;
    let two: T = lit(2.0);
    let mut y0 = vec![T::zero(); 8];
    y0[P1_U] = T::one();
    y0[P1_VW] = T::one();
    let sol = integrate(
        |t, y, dy| {
            let k = coeffs.eval(t)?;
            translation_rhs(&k, y, dy);
            dy[P1_U] = k.a * y[P1_W];
            dy[P1_W] = -k.c * y[P1_U] - two * k.b * y[P1_W];
            dy[P1_V] = k.a * y[P1_VW];
            dy[P1_VW] = -k.c * y[P1_V] - two * k.b * y[P1_VW];
            dy[P1_B] = k.b;
            Ok(())
        },
        T::zero(),
        &y0,
        t_end,
        &Options::with_tol(tol),
    )?;
    let valid_to = sol
        .first_root(|_, y| y[P1_U], lit(1e-13))
        .unwrap_or(T::infinity());
    let mut traj = ParamTrajectory {
        path: Path::Path1,
        delta: T::one() / a0,
        t_end,
        valid_to,
        t_grid: sol.times().to_vec(),
        samples: Vec::new(),
        reduced: false,
        a0,
        c0: coeffs.c.eval(T::zero())?,
        coeffs: coeffs.clone(),
        sol,
    };
    traj.samples = traj
        .t_grid
        .iter()
        .map(|&t| traj.sample(t))
        .collect::<Result<_>>()?;
    Ok(traj)
}

/// `γ̇ = ¼(ȧ/a − ċ/c)` and `q = b − γ̇`.
fn path2_drive<T: Real>(coeffs: &CoefficientSet1D<T>, t: T, k: &CoeffValues<T>) -> Result<(T, T)> {
    let ad = coeffs.a.derivative(t)?;
    let cd = coeffs.c.derivative(t)?;
    let gamma_dot = lit::<T>(0.25) * (ad / k.a - cd / k.c);
    Ok((gamma_dot, k.b - gamma_dot))
}

/// `γ = ½ ln(Δ√(a/c))` written so that it is exactly zero at `t = 0`.
fn path2_gamma<T: Real>(a0: T, c0: T, k: &CoeffValues<T>) -> T {
    lit::<T>(0.25) * ((k.a * c0) / (a0 * k.c)).ln()
}

/// Second factorization path.
pub fn solve_path2<T: Real>(
    coeffs: &CoefficientSet1D<T>,
    t_end: T,
    tol: T,
) -> Result<ParamTrajectory<T>> {
    coeffs.validate(t_end)?;
    check_positive(&coeffs.a, t_end, "a(t)")?;
    if coeffs.c.sampled_min(T::zero(), t_end, 2000)? <= T::zero() {
        return Err(Error::Precondition(
            "c(t) must be positive on the whole interval for path 2; use path 1".into(),
        ));
    }
    let k0 = coeffs.eval(T::zero())?;
    let delta = (k0.c / k0.a).sqrt();

    // Zero-drive detection on a fine grid.
    let n_check = 4096;
    let mut reduced = true;
    for i in 0..=n_check {
        let t = t_end * T::from_usize(i).unwrap() / T::from_usize(n_check).unwrap();
        let k = coeffs.eval(t)?;
        let (gd, q) = path2_drive(coeffs, t, &k)?;
        if q.abs() >= lit::<T>(1e-12) * (T::one() + k.b.abs() + gd.abs()) {
            reduced = false;
            break;
        }
    }

    let two: T = lit(2.0);
    let mut y0 = vec![T::zero(); 8];
    y0[P2_N] = T::one();
    y0[P2_N + 3] = T::one();
    let sol = integrate(
        |t, y, dy| {
            let k = coeffs.eval(t)?;
            translation_rhs(&k, y, dy);
            dy[P2_PHI] = (k.a * k.c).sqrt();
            if reduced {
                for v in dy[P2_N..P2_N + 4].iter_mut() {
                    *v = T::zero();
                }
                return Ok(());
            }
            let (_, q) = path2_drive(coeffs, t, &k)?;
            let (s2, c2) = (two * y[P2_PHI]).sin_cos();
            let g = [q * c2, q * s2 / delta, q * delta * s2, -q * c2];
            let n = &y[P2_N..P2_N + 4];
            dy[P2_N] = g[0] * n[0] + g[1] * n[2];
            dy[P2_N + 1] = g[0] * n[1] + g[1] * n[3];
            dy[P2_N + 2] = g[2] * n[0] + g[3] * n[2];
            dy[P2_N + 3] = g[2] * n[1] + g[3] * n[3];
            Ok(())
        },
        T::zero(),
        &y0,
        t_end,
        &Options::with_tol(tol),
    )?;
    let pi = T::PI();
    let arnold = sol.first_root(|_, y| pi - y[P2_PHI], lit(1e-13));
    let pivot = sol.first_root(|_, y| y[P2_N], lit(1e-13));
    let valid_to = match (arnold, pivot) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => T::infinity(),
    };
    let mut traj = ParamTrajectory {
        path: Path::Path2,
        delta,
        t_end,
        valid_to,
        t_grid: sol.times().to_vec(),
        samples: Vec::new(),
        reduced,
        a0: k0.a,
        c0: k0.c,
        coeffs: coeffs.clone(),
        sol,
    };
    traj.samples = traj
        .t_grid
        .iter()
        .map(|&t| traj.sample(t))
        .collect::<Result<_>>()?;
    Ok(traj)
}

/// Dispatches on `path`.
pub fn solve_path<T: Real>(
    coeffs: &CoefficientSet1D<T>,
    t_end: T,
    tol: T,
    path: Path,
) -> Result<ParamTrajectory<T>> {
    match path {
        Path::Path1 => solve_path1(coeffs, t_end, tol),
        Path::Path2 => solve_path2(coeffs, t_end, tol),
    }
}

/// First caustic of a solved trajectory.
pub fn caustic_window<T: Real>(traj: &ParamTrajectory<T>) -> T {
    traj.valid_to
}

impl<T: Real> ParamTrajectory<T> {
    pub fn coeffs(&self) -> &CoefficientSet1D<T> {
        &self.coeffs
    }

    pub fn hbar(&self) -> T {
        self.coeffs.hbar
    }

    fn state(&self, t: T) -> Result<Vec<T>> {
        self.sol.eval(t).ok_or_else(|| {
            Error::Domain(format!(
                "t = {t} outside the solved interval [0, {}]",
                self.t_end
            ))
        })
    }

    /// Is `t` strictly before the first caustic?
    pub fn within_window(&self, t: T) -> bool {
        t < self.valid_to
    }

    /// Parameters at any `t` in `[0, t_end]` (dense output).
    ///
    /// `alpha`, `phi`, `vphi` and `beta` are NaN at or beyond `valid_to`.
    pub fn sample(&self, t: T) -> Result<ParamSample<T>> {
        let y = self.state(t)?;
        let k = self.coeffs.eval(t)?;
        let nan = T::nan();
        let half: T = lit(0.5);
        let inside = self.within_window(t);
        let (s, lam, pi) = (y[2], y[0], y[1]);
        Ok(match self.path {
            Path::Path1 => {
                let gamma = half * (k.a / self.a0).ln();
                let (u, udot) = (y[P1_U], k.a * y[P1_W]);
                let (alpha, phi, beta) = if inside {
                    (
                        -udot / u,
                        y[P1_B] + u.ln() - gamma,
                        self.delta * y[P1_V] / u,
                    )
                } else {
                    (nan, nan, nan)
                };
                ParamSample {
                    t,
                    s,
                    lam,
                    pi,
                    gamma,
                    alpha,
                    phi,
                    vphi: T::zero(),
                    beta,
                    u,
                    udot,
                }
            }
            Path::Path2 => {
                let gamma = path2_gamma(self.a0, self.c0, &k);
                let n = &y[P2_N..P2_N + 4];
                let (alpha, vphi, beta) = if inside {
                    (
                        -n[2] / (self.delta * n[0]),
                        n[0].ln(),
                        self.delta * n[1] / n[0],
                    )
                } else {
                    (nan, nan, nan)
                };
                ParamSample {
                    t,
                    s,
                    lam,
                    pi,
                    gamma,
                    alpha,
                    phi: y[P2_PHI],
                    vphi,
                    beta,
                    u: n[0],
                    udot: n[2] / self.delta,
                }
            }
        })
    }

    /// Linear-map data at `t`, finite past caustics.
    pub fn linear_data(&self, t: T) -> Result<LinearData<T>> {
        let y = self.state(t)?;
        Ok(match self.path {
            Path::Path1 => LinearData::Path1 {
                u: y[P1_U],
                w: y[P1_W],
                v: y[P1_V],
                vw: y[P1_VW],
                big_b: y[P1_B],
            },
            Path::Path2 => {
                let k = self.coeffs.eval(t)?;
                LinearData::Path2 {
                    gamma: path2_gamma(self.a0, self.c0, &k),
                    phi: y[P2_PHI],
                    n: [y[P2_N], y[P2_N + 1], y[P2_N + 2], y[P2_N + 3]],
                }
            }
        })
    }

    /// Samples on `n + 1` uniformly spaced times over `[0, t_end]`.
    pub fn resample(&self, n: usize) -> Result<Vec<ParamSample<T>>> {
        (0..=n)
            .map(|i| {
                let t = self.t_end * T::from_usize(i).unwrap() / T::from_usize(n.max(1)).unwrap();
                self.sample(t)
            })
            .collect()
    }
}

/// Rotation angle and translation parameters of the 2D system at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample2D<T = f64> {
    pub t: T,
    pub theta: T,
    pub lam_x: T,
    pub lam_y: T,
    #[serde(rename = "Pi_x")]
    pub pi_x: T,
    #[serde(rename = "Pi_y")]
    pub pi_y: T,
    #[serde(rename = "S")]
    pub s: T,
}

/// Solved 2D charged-particle trajectory.
#[derive(Debug, Clone)]
pub struct ParamTrajectory2D<T: Real = f64> {
    /// Shared by x and y after the rotation.
    pub radial: ParamTrajectory<T>,
    pub t_grid: Vec<T>,
    pub samples: Vec<Sample2D<T>>,
    field: FieldProfile2D<T>,
    sol: DenseSolution<T>,
}

impl<T: Real> ParamTrajectory2D<T> {
    pub fn field(&self) -> &FieldProfile2D<T> {
        &self.field
    }

    pub fn valid_to(&self) -> T {
        self.radial.valid_to
    }

    pub fn t_end(&self) -> T {
        self.radial.t_end
    }

    pub fn sample(&self, t: T) -> Result<Sample2D<T>> {
        let y = self.sol.eval(t).ok_or_else(|| {
            Error::Domain(format!("t = {t} outside the solved interval"))
        })?;
        Ok(Sample2D {
            t,
            lam_x: y[0],
            lam_y: y[1],
            pi_x: y[2],
            pi_y: y[3],
            s: y[4],
            theta: y[5],
        })
    }
}

/// 2D charged particle: translation parameters, `θ = ∫eB/2m`, radial parameters by `path`.
pub fn solve_2d<T: Real>(
    profile: &FieldProfile2D<T>,
    t_end: T,
    tol: T,
    path: Path,
) -> Result<ParamTrajectory2D<T>> {
    profile.validate(t_end)?;
    let (radial_set, theta_rate) = reduce_2d(profile);
    let radial = solve_path(&radial_set, t_end, tol, path)?;
    let half: T = lit(0.5);
    let e = profile.charge;
    let sol = integrate(
        |t, y, dy| {
            let m = profile.mass.eval(t)?;
            let b = profile.b_field.eval(t)?;
            let c = radial_set.c.eval(t)?;
            let ex = profile.ex.eval(t)?;
            let ey = profile.ey.eval(t)?;
            let k = e * b / (m + m);
            let (lx, ly, px, py) = (y[0], y[1], y[2], y[3]);
            let lxd = -px / m - k * ly;
            let lyd = -py / m + k * lx;
            dy[0] = lxd;
            dy[1] = lyd;
            dy[2] = c * lx - k * py + e * ex;
            dy[3] = c * ly + k * px + e * ey;
            dy[4] = half * (px * px + py * py) / m
                + half * c * (lx * lx + ly * ly)
                + k * (ly * px - lx * py)
                + e * (ex * lx + ey * ly)
                + lxd * px
                + lyd * py;
            dy[5] = theta_rate.eval(t)?;
            Ok(())
        },
        T::zero(),
        &[T::zero(); 6],
        t_end,
        &Options::with_tol(tol),
    )?;
    let mut traj = ParamTrajectory2D {
        radial,
        t_grid: sol.times().to_vec(),
        samples: Vec::new(),
        field: profile.clone(),
        sol,
    };
    traj.samples = traj
        .t_grid
        .iter()
        .map(|&t| traj.sample(t))
        .collect::<Result<_>>()?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn linear_potential_values() {
        let set = CoefficientSet1D::<f64>::linear_potential(1.0, TimeProfile::<f64>::constant(1.0));
        let tr = solve_linear_translation(&set, 2.0, 1e-12).unwrap();
        let (_, lam, pi) = tr.at(2.0).unwrap();
        assert!((pi + 2.0).abs() < 1e-12);
        assert!((lam - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_drive_no_translation() {
        let set = CoefficientSet1D::<f64>::harmonic(1.0, 1.3);
        let tr = solve_linear_translation(&set, 2.0, 1e-10).unwrap();
        assert_eq!(tr.at(1.7).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn free_particle_path1() {
        let traj = solve_path1(&CoefficientSet1D::<f64>::free_particle(1.0), 3.0, 1e-12).unwrap();
        let s = traj.sample(2.5).unwrap();
        assert_eq!((s.gamma, s.alpha, s.phi), (0.0, 0.0, 0.0));
        assert!((s.beta - 2.5).abs() < 1e-12);
        assert!(traj.valid_to.is_infinite());
    }

    #[test]
    fn sho_path1() {
        let traj = solve_path1(&CoefficientSet1D::<f64>::harmonic(1.0, 1.0), 3.0, 1e-10).unwrap();
        let s = traj.sample(FRAC_PI_4).unwrap();
        assert!((s.alpha - 1.0).abs() < 1e-9);
        assert!((s.phi - (0.5f64.sqrt()).ln()).abs() < 1e-9);
        assert!((s.beta - 1.0).abs() < 1e-9);
        assert!((traj.valid_to - FRAC_PI_2).abs() < 1e-9);
        let after = traj.sample(2.0).unwrap();
        assert!(after.alpha.is_nan() && after.beta.is_nan());
        assert!((after.u - 2.0f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn sho_path2_shortcut() {
        let traj = solve_path2(&CoefficientSet1D::<f64>::harmonic(1.0, 1.0), 2.0, 1e-10).unwrap();
        assert!(traj.reduced);
        assert_eq!(traj.delta, 1.0);
        let s = traj.sample(1.3).unwrap();
        assert!((s.phi - 1.3).abs() < 1e-9);
        assert_eq!((s.alpha, s.vphi, s.beta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn path2_rejects_nonpositive_c() {
        let set = CoefficientSet1D::<f64>::free_particle(1.0);
        assert!(matches!(solve_path2(&set, 1.0, 1e-8), Err(Error::Precondition(_))));
    }

    #[test]
    fn path2_caustic_at_pi() {
        let traj = solve_path2(&CoefficientSet1D::<f64>::harmonic(1.0, 2.0), 3.0, 1e-12).unwrap();
        assert!((traj.valid_to - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn path1_rejects_nonpositive_a() {
        let set = CoefficientSet1D::<f64>::with_a(TimeProfile::<f64>::sinusoid(1.0, 1.0, 0.0, 0.0));
        assert!(solve_path1(&set, 1.0, 1e-8).is_err());
    }

    #[test]
    fn f32_path1() {
        let set = CoefficientSet1D::<f32>::harmonic(1.0, 1.0);
        let traj = solve_path1(&set, 1.0, 1e-6).unwrap();
        let s = traj.sample(std::f32::consts::FRAC_PI_4).unwrap();
        assert!((s.beta - 1.0).abs() < 1e-4);
    }

    #[test]
    fn two_d_zero_field_is_trivial() {
        let mut f = FieldProfile2D::<f64>::new(1.0);
        f.b_field = TimeProfile::<f64>::constant(1.5);
        f.stiffness = TimeProfile::<f64>::constant(0.5);
        let tr = solve_2d(&f, 2.0, 1e-10, Path::Path1).unwrap();
        let s = tr.sample(1.5).unwrap();
        assert_eq!((s.lam_x, s.lam_y, s.pi_x, s.pi_y, s.s), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!((s.theta - 0.75 * 1.5).abs() < 1e-10);
    }

    #[test]
    fn two_d_sinusoidal_theta() {
        let (m, b0, w, e) = (1.2, 2.0, 1.7, 0.9);
        let f = FieldProfile2D::<f64>::sinusoidal_b(m, b0, w, e);
        let tr = solve_2d(&f, 2.0, 1e-12, Path::Path1).unwrap();
        let wc = e * b0 / m;
        for t in [0.3, 1.1, 2.0] {
            let th = tr.sample(t).unwrap().theta;
            assert!((th - wc / w * (w * t / 2.0f64).sin().powi(2)).abs() < 1e-10);
        }
    }
}
