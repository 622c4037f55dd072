//! Gaussian propagator kernels and their action on gridded wavefunctions.
//!
//! A kernel is stored as
//! `G(x, x′) = P · exp{i[xᵀQ x + x′ᵀQ′ x′ + xᵀC x′ + l·x + l′·x′ + s]}`
//! with `P` the prefactor. All builders work in the centred form
//! `a|x−λ|² + b|x′|² + c (x−λ)ᵀR(θ)x′ − Π·(x−λ)/ħ − S/ħ`
//! and expand it.
//!
//! Prefactors carry the factor `i` under the square root (principal branch,
//! continuous from `t → 0⁺`), e.g. `1/√(2πiħβ)` for the linear potential.

use std::io::{Read, Write};

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::maps::{assemble_through, fmt17, rotation, SymplecticMap};
use crate::paramflow::{ParamSample, ParamTrajectory, ParamTrajectory2D, Path, Sample2D};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelVariant {
    #[serde(rename = "generic")]
    Generic,
    #[serde(rename = "lp")]
    LP,
    #[serde(rename = "path1")]
    Path1,
    #[serde(rename = "path2")]
    Path2,
    #[serde(rename = "2d_path1")]
    TwoDPath1,
    #[serde(rename = "2d_path2")]
    TwoDPath2,
}

impl KernelVariant {
    pub fn is_2d(self) -> bool {
        matches!(self, Self::TwoDPath1 | Self::TwoDPath2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel<T: Real = f64> {
    pub dof: usize,
    pub t: T,
    pub hbar: T,
    pub variant: KernelVariant,
    pub prefactor: Complex<T>,
    /// `dof × dof` row-major blocks.
    pub quad_xx: Vec<Complex<T>>,
    pub quad_xpxp: Vec<Complex<T>>,
    pub quad_xxp: Vec<Complex<T>>,
    pub lin_x: Vec<Complex<T>>,
    pub lin_xp: Vec<Complex<T>>,
    pub scal: Complex<T>,
    /// Open window `(0, t_caustic)` in which the kernel is defined.
    pub valid: (T, T),
}

/// Coefficients of the centred exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centered<T> {
    pub prefactor: Complex<T>,
    /// `|x − λ|²`
    pub a: T,
    /// `|x′|²`
    pub b: T,
    /// `(x − λ)ᵀ R x′`
    pub c: T,
}

fn cplx<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `(2πiħ g)^{−1/2}` on the principal branch.
fn free_prefactor<T: Real>(g: T, hbar: T) -> Complex<T> {
    let z = Complex::new(T::zero(), T::TAU() * hbar * g);
    z.sqrt().inv()
}

impl<T: Real> GaussianKernel<T> {
    /// Expands a centred kernel; `rot` is `dof × dof`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_centered(
        variant: KernelVariant,
        t: T,
        valid_to: T,
        hbar: T,
        cen: Centered<T>,
        rot: &Mat<T>,
        lam: &[T],
        pi: &[T],
        s: T,
    ) -> Result<Self> {
        let dof = lam.len();
        let eye = Mat::<T>::identity(dof);
        let two = lit::<T>(2.0);
        let block = |m: &Mat<T>, k: T| m.as_slice().iter().map(|v| cplx(*v * k)).collect();
        let rt_lam = rot.transpose().mul_vec(lam);
        let lam2 = lam.iter().fold(T::zero(), |acc, l| acc + *l * *l);
        let pi_lam = lam.iter().zip(pi).fold(T::zero(), |acc, (l, p)| acc + *l * *p);
        let k = Self {
            dof,
            t,
            hbar,
            variant,
            prefactor: cen.prefactor,
            quad_xx: block(&eye, cen.a),
            quad_xpxp: block(&eye, cen.b),
            quad_xxp: block(rot, cen.c),
            lin_x: (0..dof)
                .map(|i| cplx(-two * cen.a * lam[i] - pi[i] / hbar))
                .collect(),
            lin_xp: rt_lam.iter().map(|v| cplx(-cen.c * *v)).collect(),
            scal: cplx(cen.a * lam2 + pi_lam / hbar - s / hbar),
            valid: (T::zero(), valid_to),
        };
        k.validate()?;
        Ok(k)
    }

    /// Kernel of a map of the form `G ⊗ R(θ)` with shift `(λ, −Π)` and phase `S`.
    pub fn from_map(map: &SymplecticMap<T>, s: T, theta: T, hbar: T, valid_to: T) -> Result<Self> {
        let dof = map.dof();
        // Row 0 of `g·R(θ)` is `g·(cos θ, −sin θ)`.
        let (sn, cs) = theta.sin_cos();
        let unrot = |r: usize, c: usize| {
            if dof == 1 {
                map.m[(r, c)]
            } else {
                map.m[(r, c)] * cs - map.m[(r, c + 1)] * sn
            }
        };
        let (g_qq, g_qp, g_pp) = (unrot(0, 0), unrot(0, dof), unrot(dof, dof));
        let two = lit::<T>(2.0);
        let pref = free_prefactor(g_qp, hbar);
        let cen = Centered {
            prefactor: if dof == 1 { pref } else { pref * pref },
            a: g_pp / (two * hbar * g_qp),
            b: g_qq / (two * hbar * g_qp),
            c: -T::one() / (hbar * g_qp),
        };
        let rot = if dof == 1 { Mat::identity(1) } else { rotation(theta) };
        let lam = map.shift[..dof].to_vec();
        let pi: Vec<T> = map.shift[dof..].iter().map(|v| -*v).collect();
        Self::from_centered(KernelVariant::Generic, map.t, valid_to, hbar, cen, &rot, &lam, &pi, s)
    }

    /// Rejects kernels that are not delta-convergent Gaussians.
    pub fn validate(&self) -> Result<()> {
        let all = self
            .quad_xx
            .iter()
            .chain(&self.quad_xpxp)
            .chain(&self.quad_xxp)
            .chain(&self.lin_x)
            .chain(&self.lin_xp)
            .chain([&self.scal, &self.prefactor]);
        if all.clone().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel coefficients are not finite at t = {}",
                self.t
            )));
        }
        let n = self.dof;
        let real = self
            .quad_xx
            .iter()
            .chain(&self.quad_xpxp)
            .chain(&self.quad_xxp)
            .all(|z| z.im == T::zero());
        if real {
            if self.quad_xxp.iter().all(|z| z.re == T::zero()) {
                return Err(Error::Domain("kernel has a vanishing cross block".into()));
            }
            return Ok(());
        }
        // Imaginary part of the full (x, x′) form must be positive definite.
        let d = 2 * n;
        let mut im = Mat::<T>::zeros(d);
        let half = lit::<T>(0.5);
        for i in 0..n {
            for j in 0..n {
                im[(i, j)] = self.quad_xx[i * n + j].im;
                im[(n + i, n + j)] = self.quad_xpxp[i * n + j].im;
                im[(i, n + j)] = half * self.quad_xxp[i * n + j].im;
                im[(n + j, i)] = half * self.quad_xxp[i * n + j].im;
            }
        }
        for k in 1..=d {
            let mut minor = Mat::<T>::zeros(k);
            for i in 0..k {
                for j in 0..k {
                    minor[(i, j)] = im[(i, j)];
                }
            }
            if minor.det() <= T::zero() {
                return Err(Error::Domain(
                    "imaginary part of the kernel exponent is not positive definite".into(),
                ));
            }
        }
        Ok(())
    }

    /// The bracket in `exp{i[…]}`.
    pub fn exponent(&self, x: &[T], xp: &[T]) -> Complex<T> {
        let n = self.dof;
        let mut z = self.scal;
        for i in 0..n {
            z = z + self.lin_x[i] * x[i] + self.lin_xp[i] * xp[i];
            for j in 0..n {
                z = z
                    + self.quad_xx[i * n + j] * (x[i] * x[j])
                    + self.quad_xpxp[i * n + j] * (xp[i] * xp[j])
                    + self.quad_xxp[i * n + j] * (x[i] * xp[j]);
            }
        }
        z
    }

    pub fn eval(&self, x: &[T], xp: &[T]) -> Complex<T> {
        self.prefactor * (Complex::<T>::i() * self.exponent(x, xp)).exp()
    }

    /// Largest entrywise deviation over all coefficient blocks, prefactor included.
    pub fn max_coeff_diff(&self, other: &Self) -> T {
        let pairs = [
            (&self.quad_xx, &other.quad_xx),
            (&self.quad_xpxp, &other.quad_xpxp),
            (&self.quad_xxp, &other.quad_xxp),
            (&self.lin_x, &other.lin_x),
            (&self.lin_xp, &other.lin_xp),
        ];
        let mut m = (self.scal - other.scal)
            .norm()
            .max((self.prefactor - other.prefactor).norm());
        for (a, b) in pairs {
            if a.len() != b.len() {
                return T::infinity();
            }
            for (u, v) in a.iter().zip(b) {
                m = m.max((*u - *v).norm());
            }
        }
        m
    }
}

/// Second-path kernel functions.
///
/// `w_printed` is the closed form as usually quoted; the propagator needs
/// `w = w_printed · e^{2(ϕ−γ)}`. `l` diverges when `β = 0` while `βl` stays
/// finite, so `u` is evaluated as `Δ²(α − cot φ)/(4ħ²βl)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondPathFunctions<T> {
    pub u: T,
    pub w: T,
    pub w_printed: T,
    pub q: T,
    pub l: T,
    pub beta_l: T,
    pub prefactor: Complex<T>,
}

pub fn second_path_functions<T: Real>(s: &ParamSample<T>, delta: T, hbar: T) -> SecondPathFunctions<T> {
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let (sin, cos) = s.phi.sin_cos();
    let cot = cos / sin;
    let e2v = (-two * s.vphi).exp();
    let beta_l = delta * (s.beta * (s.alpha - cot) - e2v) / (two * hbar);
    let u = delta * delta * (s.alpha - cot) / (four * hbar * hbar * beta_l);
    let w_printed = delta * e2v / (two * hbar * sin)
        * (cos + delta * s.beta / (two * hbar * beta_l * sin));
    let w = w_printed * (two * (s.vphi - s.gamma)).exp();
    let q = delta * delta * (-(s.vphi + s.gamma)).exp() / (two * hbar * hbar * beta_l * sin);
    let arg = Complex::new(T::zero(), -four * T::PI() * hbar * hbar * beta_l * sin);
    let prefactor = (cplx(delta * delta) / arg).sqrt() * (-(s.vphi + s.gamma) / two).exp();
    SecondPathFunctions {
        u,
        w,
        w_printed,
        q,
        l: beta_l / s.beta,
        beta_l,
        prefactor,
    }
}

fn first_path_centered<T: Real>(s: &ParamSample<T>, delta: T, hbar: T) -> Centered<T> {
    let two = lit::<T>(2.0);
    let root = (cplx(delta) / Complex::new(T::zero(), T::TAU() * hbar * s.beta)).sqrt();
    Centered {
        prefactor: root * (-(s.phi + s.gamma) / two).exp(),
        a: delta * (-two * s.gamma).exp() * ((-two * s.phi).exp() / s.beta - s.alpha) / (two * hbar),
        b: delta / (two * hbar * s.beta),
        c: -delta * (-s.phi - s.gamma).exp() / (hbar * s.beta),
    }
}

fn second_path_centered<T: Real>(s: &ParamSample<T>, delta: T, hbar: T) -> Centered<T> {
    let f = second_path_functions(s, delta, hbar);
    Centered {
        prefactor: f.prefactor,
        a: f.w,
        b: f.u,
        c: f.q,
    }
}

fn lp_centered<T: Real>(s: &ParamSample<T>, delta: T, hbar: T) -> Centered<T> {
    let two = lit::<T>(2.0);
    let g = s.beta * (s.phi + s.gamma).exp() / delta;
    Centered {
        prefactor: free_prefactor(g, hbar),
        a: T::one() / (two * hbar * g),
        b: T::one() / (two * hbar * g),
        c: -T::one() / (hbar * g),
    }
}

fn check_time<T: Real>(t: T, t_end: T, valid_to: T) -> Result<()> {
    if !(t > T::zero()) {
        return Err(Error::Domain(format!(
            "kernel requested at t = {t}; at t = 0 the propagator is a delta distribution"
        )));
    }
    if t >= valid_to {
        return Err(Error::Caustic {
            t: t.to_f64_lossy(),
            valid_to: valid_to.to_f64_lossy(),
        });
    }
    if t > t_end {
        return Err(Error::Domain(format!(
            "kernel requested at t = {t} beyond the solved interval [0, {t_end}]"
        )));
    }
    Ok(())
}

/// Guards against a focal point (`G_qp = 0`) inside the parameter window.
fn check_focal<T: Real>(traj: &ParamTrajectory<T>, t: T) -> Result<()> {
    for &tg in traj.t_grid.iter().filter(|&&tg| tg > T::zero() && tg < t).chain([&t]) {
        if assemble_through(traj, tg)?.g_block()[1] <= T::zero() {
            return Err(Error::Caustic {
                t: t.to_f64_lossy(),
                valid_to: tg.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

fn variant_path(variant: KernelVariant) -> Option<Path> {
    match variant {
        KernelVariant::LP | KernelVariant::Path1 | KernelVariant::TwoDPath1 => Some(Path::Path1),
        KernelVariant::Path2 | KernelVariant::TwoDPath2 => Some(Path::Path2),
        KernelVariant::Generic => None,
    }
}

fn check_variant<T: Real>(traj: &ParamTrajectory<T>, variant: KernelVariant) -> Result<()> {
    if let Some(p) = variant_path(variant) {
        if p != traj.path {
            return Err(Error::Domain(format!(
                "kernel variant {variant:?} needs a {p:?} trajectory, got {:?}",
                traj.path
            )));
        }
    }
    if variant == KernelVariant::LP {
        let c = traj.coeffs();
        let zero = |p: &crate::coeffs::TimeProfile<T>| p.as_constant() == Some(T::zero());
        if !zero(&c.b) || !zero(&c.c) {
            return Err(Error::Domain(
                "the linear-potential kernel needs b ≡ 0 and c ≡ 0".into(),
            ));
        }
    }
    Ok(())
}

/// 1D kernel at `t` from a solved trajectory.
pub fn kernel_build<T: Real>(
    traj: &ParamTrajectory<T>,
    t: T,
    variant: KernelVariant,
) -> Result<GaussianKernel<T>> {
    if variant.is_2d() {
        return Err(Error::Domain(format!("{variant:?} needs a 2D trajectory")));
    }
    check_variant(traj, variant)?;
    check_time(t, traj.t_end, traj.valid_to)?;
    check_focal(traj, t)?;
    let hbar = traj.hbar();
    let s = traj.sample(t)?;
    let cen = match variant {
        KernelVariant::LP => lp_centered(&s, traj.delta, hbar),
        KernelVariant::Path1 => first_path_centered(&s, traj.delta, hbar),
        KernelVariant::Path2 => second_path_centered(&s, traj.delta, hbar),
        KernelVariant::Generic => {
            let map = assemble_through(traj, t)?;
            return GaussianKernel::from_map(&map, s.s, T::zero(), hbar, traj.valid_to);
        }
        _ => unreachable!(),
    };
    GaussianKernel::from_centered(
        variant,
        t,
        traj.valid_to,
        hbar,
        cen,
        &Mat::identity(1),
        &[s.lam],
        &[s.pi],
        s.s,
    )
}

/// 2D kernel: radial functions in their 1D positions, squared prefactor, rotation `R(θ)`.
pub fn kernel_build_2d<T: Real>(
    traj: &ParamTrajectory2D<T>,
    t: T,
    variant: KernelVariant,
) -> Result<GaussianKernel<T>> {
    let radial = &traj.radial;
    let hbar = radial.hbar();
    check_time(t, traj.t_end(), traj.valid_to())?;
    let s2: Sample2D<T> = traj.sample(t)?;
    if variant == KernelVariant::Generic {
        check_focal(radial, t)?;
        let map = crate::maps::assemble_2d(traj, t)?;
        return GaussianKernel::from_map(&map, s2.s, s2.theta, hbar, traj.valid_to());
    }
    if !variant.is_2d() {
        return Err(Error::Domain(format!("{variant:?} is a 1D kernel variant")));
    }
    check_variant(radial, variant)?;
    check_focal(radial, t)?;
    let s = radial.sample(t)?;
    let mut cen = if variant == KernelVariant::TwoDPath1 {
        first_path_centered(&s, radial.delta, hbar)
    } else {
        second_path_centered(&s, radial.delta, hbar)
    };
    cen.prefactor = cen.prefactor * cen.prefactor;
    GaussianKernel::from_centered(
        variant,
        t,
        traj.valid_to(),
        hbar,
        cen,
        &rotation(s2.theta),
        &[s2.lam_x, s2.lam_y],
        &[s2.pi_x, s2.pi_y],
        s2.s,
    )
}

/// Wavefunction sampled on a uniform grid, `n` points per axis.
///
/// In 2D `amps[i·n + j] = ψ(x_i, y_j)` with the same axis for `x` and `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveGrid<T: Real = f64> {
    pub dof: usize,
    pub n: usize,
    pub x_min: T,
    pub dx: T,
    pub amps: Vec<Complex<T>>,
    pub hbar: T,
}

impl<T: Real> WaveGrid<T> {
    pub fn new(dof: usize, n: usize, x_min: T, dx: T, amps: Vec<Complex<T>>, hbar: T) -> Result<Self> {
        if !(dof == 1 || dof == 2) || n < 2 || amps.len() != n.pow(dof as u32) {
            return Err(Error::Domain(format!(
                "grid with dof {dof}, n {n} cannot hold {} amplitudes",
                amps.len()
            )));
        }
        if !(dx > T::zero()) || !x_min.is_finite() {
            return Err(Error::Domain(format!("invalid grid geometry x_min = {x_min}, dx = {dx}")));
        }
        Ok(Self { dof, n, x_min, dx, amps, hbar })
    }

    /// Coherent Gaussian `∝ exp(−(x−x₀)²/4σ² + ip₀x/ħ)` on `[x_min, x_max)`, normalized.
    pub fn gaussian(n: usize, x_min: T, x_max: T, sigma: T, x0: T, p0: T, hbar: T) -> Result<Self> {
        Self::gaussian_nd(1, n, x_min, x_max, sigma, &[x0], &[p0], hbar)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn gaussian_2d(
        n: usize,
        x_min: T,
        x_max: T,
        sigma: T,
        x0: [T; 2],
        p0: [T; 2],
        hbar: T,
    ) -> Result<Self> {
        Self::gaussian_nd(2, n, x_min, x_max, sigma, &x0, &p0, hbar)
    }

    #[allow(clippy::too_many_arguments)]
    fn gaussian_nd(
        dof: usize,
        n: usize,
        x_min: T,
        x_max: T,
        sigma: T,
        x0: &[T],
        p0: &[T],
        hbar: T,
    ) -> Result<Self> {
        if !(sigma > T::zero()) || !(x_max > x_min) || n < 2 {
            return Err(Error::Domain(format!(
                "invalid Gaussian grid: n = {n}, [{x_min}, {x_max}), σ = {sigma}"
            )));
        }
        let dx = (x_max - x_min) / T::from_usize(n).unwrap();
        let xs: Vec<T> = (0..n).map(|i| x_min + dx * T::from_usize(i).unwrap()).collect();
        let four = lit::<T>(4.0);
        let f = |x: T, c: T, p: T| {
            let d = x - c;
            Complex::new(-d * d / (four * sigma * sigma), p * x / hbar).exp()
        };
        let amps = if dof == 1 {
            xs.iter().map(|&x| f(x, x0[0], p0[0])).collect()
        } else {
            let mut v = Vec::with_capacity(n * n);
            for &x in &xs {
                for &y in &xs {
                    v.push(f(x, x0[0], p0[0]) * f(y, x0[1], p0[1]));
                }
            }
            v
        };
        let mut g = Self::new(dof, n, x_min, dx, amps, hbar)?;
        g.normalize()?;
        Ok(g)
    }

    pub fn coords(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| self.x_min + self.dx * T::from_usize(i).unwrap())
            .collect()
    }

    /// Trapezoid weights along one axis.
    pub fn weights(&self) -> Vec<T> {
        let half = lit::<T>(0.5);
        (0..self.n)
            .map(|i| if i == 0 || i + 1 == self.n { half * self.dx } else { self.dx })
            .collect()
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.dof == other.dof && self.n == other.n && self.x_min == other.x_min && self.dx == other.dx
    }

    /// `⟨self|other⟩` by the trapezoid rule.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        if !self.same_grid(other) {
            return Err(Error::Domain("wavefunctions live on different grids".into()));
        }
        let w = self.weights();
        let n = self.n;
        let mut acc = Complex::new(T::zero(), T::zero());
        for (k, (a, b)) in self.amps.iter().zip(&other.amps).enumerate() {
            let wk = if self.dof == 1 { w[k] } else { w[k / n] * w[k % n] };
            acc = acc + a.conj() * b * wk;
        }
        Ok(acc)
    }

    pub fn norm_sq(&self) -> T {
        self.inner(self).map(|z| z.re).unwrap_or(T::nan())
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let nrm = self.norm();
        if !(nrm > T::zero()) || !nrm.is_finite() {
            return Err(Error::Domain(format!("cannot normalize a state of norm {nrm}")));
        }
        for a in &mut self.amps {
            *a = *a / nrm;
        }
        Ok(())
    }

    /// `ψ′` by spectral differentiation on the periodic extension.
    fn spectral_derivative(&self) -> Vec<Complex<T>> {
        let n = self.n;
        let mut planner = FftPlanner::<T>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut buf = self.amps.clone();
        fwd.process(&mut buf);
        let len = self.dx * T::from_usize(n).unwrap();
        let scale = T::one() / T::from_usize(n).unwrap();
        for (m, v) in buf.iter_mut().enumerate() {
            let k = if n % 2 == 0 && m == n / 2 {
                T::zero()
            } else if m <= n / 2 {
                T::TAU() * T::from_usize(m).unwrap() / len
            } else {
                -T::TAU() * T::from_usize(n - m).unwrap() / len
            };
            *v = *v * Complex::new(T::zero(), k * scale);
        }
        inv.process(&mut buf);
        buf
    }

    /// Mean `(⟨x⟩, ⟨p⟩)` and symmetrized covariance of a 1D state.
    pub fn moments(&self) -> Result<([T; 2], Mat<T>)> {
        if self.dof != 1 {
            return Err(Error::Domain("grid moments are implemented for dof = 1".into()));
        }
        let nrm = self.norm_sq();
        let xs = self.coords();
        let w = self.weights();
        let d = self.spectral_derivative();
        let h = self.hbar;
        let (mut mx, mut mp, mut xx, mut pp, mut xp) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for j in 0..self.n {
            let psi = self.amps[j];
            let rho = psi.norm_sqr() * w[j];
            // p ψ = −iħ ψ′
            let ppsi = Complex::new(T::zero(), -h) * d[j];
            let pc = (psi.conj() * ppsi).re * w[j];
            mx = mx + xs[j] * rho;
            xx = xx + xs[j] * xs[j] * rho;
            mp = mp + pc;
            pp = pp + ppsi.norm_sqr() * w[j];
            xp = xp + xs[j] * pc;
        }
        let (mx, mp, xx, pp, xp) = (mx / nrm, mp / nrm, xx / nrm, pp / nrm, xp / nrm);
        let cov = Mat::from_rows(
            2,
            vec![xx - mx * mx, xp - mx * mp, xp - mx * mp, pp - mp * mp],
        );
        Ok(([mx, mp], cov))
    }
}

impl WaveGrid<f64> {
    /// CSV with columns `x, re, im` (1D only).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.require_1d()?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "re", "im"])?;
        for (x, a) in self.coords().into_iter().zip(&self.amps) {
            w.write_record([fmt17(x), fmt17(a.re), fmt17(a.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, hbar: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut xs = Vec::new();
        let mut amps = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Io(format!("expected 3 columns, found {}", rec.len())));
            }
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("bad number {:?}: {e}", &rec[i])))
            };
            xs.push(num(0)?);
            amps.push(Complex::new(num(1)?, num(2)?));
        }
        if xs.len() < 2 {
            return Err(Error::Io("wavefunction CSV needs at least two rows".into()));
        }
        let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (i, x) in xs.iter().enumerate() {
            if (x - (xs[0] + dx * i as f64)).abs() > 1e-9 * (1.0 + x.abs()) {
                return Err(Error::Io(format!("grid is not uniform at row {}", i + 1)));
            }
        }
        Self::new(1, xs.len(), xs[0], dx, amps, hbar)
    }

    /// Little-endian `n, x_min, dx` as `f64`, then interleaved `re, im`.
    pub fn write_bin<W: Write>(&self, mut out: W) -> Result<()> {
        self.require_1d()?;
        out.write_all(&(self.n as f64).to_le_bytes())?;
        out.write_all(&self.x_min.to_le_bytes())?;
        out.write_all(&self.dx.to_le_bytes())?;
        for a in &self.amps {
            out.write_all(&a.re.to_le_bytes())?;
            out.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_bin<R: Read>(mut input: R, hbar: f64) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let vals: Vec<f64> = bytes
            .chunks(8)
            .map(|c| {
                <[u8; 8]>::try_from(c)
                    .map(f64::from_le_bytes)
                    .map_err(|_| Error::Io("binary wavefunction length is not a multiple of 8".into()))
            })
            .collect::<Result<_>>()?;
        if vals.len() < 3 || vals[0].fract() != 0.0 || vals[0] < 2.0 {
            return Err(Error::Io("binary wavefunction header is malformed".into()));
        }
        let n = vals[0] as usize;
        if vals.len() != 3 + 2 * n {
            return Err(Error::Io(format!(
                "binary wavefunction declares {n} points but holds {}",
                (vals.len() - 3) / 2
            )));
        }
        let amps = vals[3..].chunks(2).map(|c| Complex::new(c[0], c[1])).collect();
        Self::new(1, n, vals[1], vals[2], amps, hbar)
    }

    fn require_1d(&self) -> Result<()> {
        if self.dof != 1 {
            return Err(Error::Domain("file formats are defined for dof = 1 grids".into()));
        }
        Ok(())
    }
}

/// Whether the integrand oscillation is resolved by the grid on the support of `psi0`.
fn resolved<T: Real>(k: &GaussianKernel<T>, psi0: &WaveGrid<T>) -> bool {
    let peak = psi0.amps.iter().fold(T::zero(), |m, a| m.max(a.norm()));
    let thresh = peak * lit::<T>(1e-10);
    let xs = psi0.coords();
    let supp: Vec<T> = xs
        .iter()
        .zip(&psi0.amps)
        .filter(|(_, a)| a.norm() > thresh)
        .map(|(x, _)| *x)
        .collect();
    let (Some(lo), Some(hi)) = (supp.first(), supp.last()) else {
        return true;
    };
    let xmax = xs[0].abs().max(xs[xs.len() - 1].abs());
    let two = lit::<T>(2.0);
    let g = two * k.quad_xpxp[0].norm() * lo.abs().max(hi.abs())
        + k.quad_xxp[0].norm() * xmax
        + k.lin_xp[0].norm();
    g * psi0.dx < T::PI()
}

/// Applies the kernel by trapezoid quadrature, rows in parallel.
///
/// When the kernel oscillates faster than the grid can resolve (e.g. very
/// short times) the grid state is read as its band-limited interpolant and
/// integrated against the kernel exactly, plane wave by plane wave.
pub fn kernel_apply<T: Real>(kernel: &GaussianKernel<T>, psi0: &WaveGrid<T>) -> Result<WaveGrid<T>> {
    if kernel.dof != psi0.dof {
        return Err(Error::Domain(format!(
            "kernel has dof {} but the grid has dof {}",
            kernel.dof, psi0.dof
        )));
    }
    let amps = if kernel.dof == 1 {
        if !resolved(kernel, psi0) && kernel.quad_xpxp[0].norm() > T::zero() {
            apply_spectral(kernel, psi0)
        } else {
            apply_1d(kernel, psi0)
        }
    } else {
        apply_2d(kernel, psi0)
    };
    WaveGrid::new(psi0.dof, psi0.n, psi0.x_min, psi0.dx, amps, psi0.hbar)
}

fn apply_1d<T: Real>(k: &GaussianKernel<T>, psi0: &WaveGrid<T>) -> Vec<Complex<T>> {
    let xs = psi0.coords();
    let w = psi0.weights();
    let i = Complex::<T>::i();
    let src: Vec<Complex<T>> = (0..psi0.n)
        .map(|j| {
            let x = xs[j];
            psi0.amps[j] * (i * (k.quad_xpxp[0] * (x * x) + k.lin_xp[0] * x)).exp() * w[j]
        })
        .collect();
    xs.par_iter()
        .map(|&x| {
            let outer = k.prefactor * (i * (k.quad_xx[0] * (x * x) + k.lin_x[0] * x + k.scal)).exp();
            let c = k.quad_xxp[0] * x;
            let mut acc = Complex::new(T::zero(), T::zero());
            for (xp, s) in xs.iter().zip(&src) {
                acc = acc + *s * (i * c * *xp).exp();
            }
            outer * acc
        })
        .collect()
}

fn apply_spectral<T: Real>(k: &GaussianKernel<T>, psi0: &WaveGrid<T>) -> Vec<Complex<T>> {
    let n = psi0.n;
    let mut planner = FftPlanner::<T>::new();
    let mut coef = psi0.amps.clone();
    planner.plan_fft_forward(n).process(&mut coef);
    let len = psi0.dx * T::from_usize(n).unwrap();
    let inv_n = T::one() / T::from_usize(n).unwrap();
    let i = Complex::<T>::i();
    let ks: Vec<(T, Complex<T>)> = coef
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let mm = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            let kk = T::TAU() * lit::<T>(mm) / len;
            // Undo the x_min origin of the DFT basis.
            (kk, *c * inv_n * (-i * kk * psi0.x_min).exp())
        })
        .collect();
    let b = k.quad_xpxp[0];
    let four = lit::<T>(4.0);
    let gauss = (Complex::new(T::zero(), T::PI()) / b).sqrt();
    psi0.coords()
        .par_iter()
        .map(|&x| {
            let outer = k.prefactor
                * gauss
                * (i * (k.quad_xx[0] * (x * x) + k.lin_x[0] * x + k.scal)).exp();
            let lin = k.quad_xxp[0] * x + k.lin_xp[0];
            let mut acc = Complex::new(T::zero(), T::zero());
            for (kk, c) in &ks {
                let beta = lin + *kk;
                acc = acc + *c * (-i * beta * beta / (b * four)).exp();
            }
            outer * acc
        })
        .collect()
}

fn apply_2d<T: Real>(k: &GaussianKernel<T>, psi0: &WaveGrid<T>) -> Vec<Complex<T>> {
    let n = psi0.n;
    let xs = psi0.coords();
    let w = psi0.weights();
    let i = Complex::<T>::i();
    let mut src = Vec::with_capacity(n * n);
    for a in 0..n {
        for bb in 0..n {
            let xp = [xs[a], xs[bb]];
            let mut z = Complex::new(T::zero(), T::zero());
            for r in 0..2 {
                z = z + k.lin_xp[r] * xp[r];
                for c in 0..2 {
                    z = z + k.quad_xpxp[r * 2 + c] * (xp[r] * xp[c]);
                }
            }
            src.push(psi0.amps[a * n + bb] * (i * z).exp() * (w[a] * w[bb]));
        }
    }
    let q = &k.quad_xxp;
    (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let x = [xs[idx / n], xs[idx % n]];
            let mut z = k.scal;
            for r in 0..2 {
                z = z + k.lin_x[r] * x[r];
                for c in 0..2 {
                    z = z + k.quad_xx[r * 2 + c] * (x[r] * x[c]);
                }
            }
            // xᵀQx′ = v·x′ with v = Qᵀx, separable over the two axes.
            let v0 = q[0] * x[0] + q[2] * x[1];
            let v1 = q[1] * x[0] + q[3] * x[1];
            let ey: Vec<Complex<T>> = xs.iter().map(|&y| (i * v1 * y).exp()).collect();
            let mut acc = Complex::new(T::zero(), T::zero());
            for a in 0..n {
                let mut row = Complex::new(T::zero(), T::zero());
                for bb in 0..n {
                    row = row + src[a * n + bb] * ey[bb];
                }
                acc = acc + row * (i * v0 * xs[a]).exp();
            }
            k.prefactor * (i * z).exp() * acc
        })
        .collect()
}

/// `|‖Gψ‖ − ‖ψ‖| / ‖ψ‖`.
pub fn kernel_unitarity_residual<T: Real>(kernel: &GaussianKernel<T>, grid: &WaveGrid<T>) -> Result<T> {
    let out = kernel_apply(kernel, grid)?;
    let n0 = grid.norm();
    Ok((out.norm() - n0).abs() / n0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{CoefficientSet1D, TimeProfile};
    use crate::paramflow::{solve_path1, solve_path2};
    use std::f64::consts::FRAC_PI_4;

    fn mehler(t: f64, x: f64, xp: f64) -> Complex<f64> {
        let s = t.sin();
        let pref = Complex::new(0.0, std::f64::consts::TAU * s).sqrt().inv();
        pref * Complex::new(0.0, ((x * x + xp * xp) * t.cos() - 2.0 * x * xp) / (2.0 * s)).exp()
    }

    #[test]
    fn free_kernel() {
        let traj = solve_path1(&CoefficientSet1D::<f64>::free_particle(1.0), 1.0, 1e-12).unwrap();
        for v in [KernelVariant::LP, KernelVariant::Path1, KernelVariant::Generic] {
            let k = kernel_build(&traj, 1.0, v).unwrap();
            assert!((k.prefactor.norm() - 1.0 / std::f64::consts::TAU.sqrt()).abs() < 1e-12);
            let z = k.exponent(&[0.7], &[-0.2]);
            assert!((z - Complex::new(0.81 / 2.0, 0.0)).norm() < 1e-12, "{v:?} {z}");
        }
    }

    #[test]
    fn mehler_both_paths() {
        let set = CoefficientSet1D::<f64>::harmonic(1.0, 1.0);
        let t1 = solve_path1(&set, 1.0, 1e-12).unwrap();
        let t2 = solve_path2(&set, 1.0, 1e-12).unwrap();
        let ks = [
            kernel_build(&t1, FRAC_PI_4, KernelVariant::Path1).unwrap(),
            kernel_build(&t2, FRAC_PI_4, KernelVariant::Path2).unwrap(),
            kernel_build(&t2, FRAC_PI_4, KernelVariant::Generic).unwrap(),
        ];
        for k in &ks {
            for (x, xp) in [(0.0, 0.0), (0.3, -1.1), (1.5, 0.4)] {
                assert!((k.eval(&[x], &[xp]) - mehler(FRAC_PI_4, x, xp)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn path_variants_match_generic() {
        let mut set = CoefficientSet1D::<f64>::with_a(TimeProfile::<f64>::sinusoid(0.3, 1.3, 0.2, 1.0));
        set.b = TimeProfile::<f64>::sinusoid(0.1, 0.7, 0.0, 0.0);
        set.c = TimeProfile::<f64>::sinusoid(0.2, 2.1, 0.5, 0.9);
        set.d = TimeProfile::<f64>::sinusoid(0.2, 1.0, 0.0, 0.1);
        set.e = TimeProfile::<f64>::sinusoid(0.3, 0.5, 1.0, -0.2);
        set.g = TimeProfile::<f64>::constant(0.1);
        let t = 0.9;
        for path in [Path::Path1, Path::Path2] {
            let traj = crate::paramflow::solve_path(&set, 1.0, 1e-12, path).unwrap();
            let v = if path == Path::Path1 { KernelVariant::Path1 } else { KernelVariant::Path2 };
            let a = kernel_build(&traj, t, v).unwrap();
            let b = kernel_build(&traj, t, KernelVariant::Generic).unwrap();
            assert!(a.max_coeff_diff(&b) < 1e-9, "{path:?}: {a:?}\n{b:?}");
        }
    }

    #[test]
    fn second_path_w_correction() {
        let set = CoefficientSet1D::<f64>::ion_trap(1.0, 1.0, 0.3, 5.0);
        let traj = solve_path2(&set, 0.5, 1e-12).unwrap();
        let s = traj.sample(0.5).unwrap();
        let f = second_path_functions(&s, traj.delta, 1.0);
        assert!((f.w - f.w_printed).abs() > 1e-3);
        assert!((f.w - f.w_printed * (2.0 * (s.vphi - s.gamma)).exp()).abs() < 1e-14);
    }

    #[test]
    fn time_errors() {
        let traj = solve_path1(&CoefficientSet1D::<f64>::harmonic(1.0, 1.0), 3.0, 1e-10).unwrap();
        assert!(matches!(kernel_build(&traj, 0.0, KernelVariant::Path1), Err(Error::Domain(_))));
        assert!(matches!(kernel_build(&traj, 2.0, KernelVariant::Path1), Err(Error::Caustic { .. })));
        assert!(kernel_build(&traj, 1.0, KernelVariant::LP).is_err());
        assert!(kernel_build(&traj, 1.0, KernelVariant::Path2).is_err());
    }

    #[test]
    fn apply_free_and_delta_limit() {
        let psi = WaveGrid::<f64>::gaussian(512, -20.0, 20.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let traj = solve_path1(&CoefficientSet1D::<f64>::free_particle(1.0), 2.0, 1e-12).unwrap();
        let out = kernel_apply(&kernel_build(&traj, 2.0, KernelVariant::LP).unwrap(), &psi).unwrap();
        let (mean, cov) = out.moments().unwrap();
        assert!((mean[0] - 2.0).abs() < 1e-8 && (mean[1] - 1.0).abs() < 1e-8);
        // σ²(1 + (ħt/2mσ²)²) = 2
        assert!((cov[(0, 0)] - 2.0).abs() < 1e-8);

        let k = kernel_build(&traj, 1e-6, KernelVariant::LP).unwrap();
        let out = kernel_apply(&k, &psi).unwrap();
        let f = out.inner(&psi).unwrap().norm() / (out.norm() * psi.norm());
        assert!(f >= 1.0 - 1e-6, "{f}");
    }

    #[test]
    fn unitarity_and_detector() {
        let psi = WaveGrid::<f64>::gaussian(512, -20.0, 20.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let traj = solve_path1(&CoefficientSet1D::<f64>::harmonic(1.0, 1.0), 1.2, 1e-12).unwrap();
        let mut k = kernel_build(&traj, 1.2, KernelVariant::Path1).unwrap();
        assert!(kernel_unitarity_residual(&k, &psi).unwrap() < 1e-6);
        let mut lit_pref = k.clone();
        lit_pref.prefactor = Complex::new(k.prefactor.norm(), 0.0);
        assert!(kernel_unitarity_residual(&lit_pref, &psi).unwrap() < 1e-6);
        k.prefactor = k.prefactor * 1.1;
        assert!((kernel_unitarity_residual(&k, &psi).unwrap() - 0.1).abs() < 1e-6);
    }

    #[test]
    fn wavegrid_io_roundtrip() {
        let psi = WaveGrid::<f64>::gaussian(64, -5.0, 5.0, 0.7, 0.2, -0.4, 1.0).unwrap();
        let mut buf = Vec::new();
        psi.write_bin(&mut buf).unwrap();
        assert_eq!(WaveGrid::<f64>::read_bin(&buf[..], 1.0).unwrap(), psi);
        let mut buf = Vec::new();
        psi.write_csv(&mut buf).unwrap();
        let back = WaveGrid::<f64>::read_csv(&buf[..], 1.0).unwrap();
        assert_eq!(back.amps, psi.amps);
        assert!((back.dx - psi.dx).abs() < 1e-15);
        assert!(WaveGrid::<f64>::read_bin(&buf[..5], 1.0).is_err());
    }

    #[test]
    fn complex_quadratic_form_checked() {
        let traj = solve_path1(&CoefficientSet1D::<f64>::free_particle(1.0), 1.0, 1e-12).unwrap();
        let mut k = kernel_build(&traj, 1.0, KernelVariant::Path1).unwrap();
        k.quad_xx[0].im = -1.0;
        assert!(k.validate().is_err());
        k.quad_xx[0].im = 1.0;
        k.quad_xpxp[0].im = 1.0;
        assert!(k.validate().is_ok());
    }
}
