//! Analytic parameter solutions for the worked examples and the Mathieu
//! cosine function they need.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens::{Centered, GaussianKernel, KernelVariant};
use crate::linalg::Mat;
use crate::ode::{integrate, Options};
use crate::paramflow::ParamSample;
use crate::scalar::{lit, Real};

/// `C(a, q, z)` and `C′(a, q, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MathieuEval<T = f64> {
    pub a: T,
    pub q: T,
    pub z: T,
    pub c: T,
    pub cp: T,
}

/// Mathieu cosine from `y″ + (a − 2q cos 2z)y = 0`, `y(0) = 1`, `y′(0) = 0`.
pub fn mathieu_c<T: Real>(a: T, q: T, z: T) -> MathieuEval<T> {
    mathieu_c_tol(a, q, z, lit(1e-12))
}

pub fn mathieu_c_tol<T: Real>(a: T, q: T, z: T, tol: T) -> MathieuEval<T> {
    if z == T::zero() {
        return MathieuEval { a, q, z, c: T::one(), cp: T::zero() };
    }
    let two = lit::<T>(2.0);
    let sol = integrate(
        |s, y, dy| {
            dy[0] = y[1];
            dy[1] = -(a - two * q * (two * s).cos()) * y[0];
            Ok(())
        },
        T::zero(),
        &[T::one(), T::zero()],
        z.abs(),
        &Options::with_tol(tol),
    )
    .expect("Mathieu equation has smooth bounded coefficients");
    let y = sol.last();
    // C is even, C′ odd.
    let cp = if z < T::zero() { -y[1] } else { y[1] };
    MathieuEval { a, q, z, c: y[0], cp }
}

/// `(C, C′, ∫₀ᶻ dz′/C²)`, or a caustic error (in units of `z/z_rate`) if `C` vanishes first.
fn mathieu_with_integral<T: Real>(a: T, q: T, z: T, z_rate: T, tol: T) -> Result<(T, T, T)> {
    if z == T::zero() {
        return Ok((T::one(), T::zero(), T::zero()));
    }
    let two = lit::<T>(2.0);
    let mut hit = None;
    let sol = integrate(
        |s, y, dy| {
            dy[0] = y[1];
            dy[1] = -(a - two * q * (two * s).cos()) * y[0];
            dy[2] = T::one() / (y[0] * y[0]);
            Ok(())
        },
        T::zero(),
        &[T::one(), T::zero(), T::zero()],
        z,
        &Options::with_tol(tol),
    );
    let sol = match sol {
        Ok(s) => Some(s),
        Err(Error::Integration { t_last, .. }) => {
            hit = Some(T::from_f64(t_last).unwrap_or(z));
            None
        }
        Err(e) => return Err(e),
    };
    if let Some(sol) = &sol {
        if let Some(root) = sol.first_root(|_, y| y[0], lit(1e-13)) {
            hit = Some(root);
        }
        if hit.is_none() {
            let y = sol.last();
            return Ok((y[0], y[1], y[2]));
        }
    }
    let root = hit.unwrap_or(z);
    Err(Error::Caustic {
        t: (z / z_rate).to_f64_lossy(),
        valid_to: (root / z_rate).to_f64_lossy(),
    })
}

/// `(α, φ, β)` for the ion trap `a = 1/m`, `c = K + k cos ωt`.
pub fn ion_trap_params<T: Real>(m: T, k_stat: T, k_osc: T, omega: T, t: T) -> Result<(T, T, T)> {
    let w2 = m * omega * omega;
    let four = lit::<T>(4.0);
    let half_w = omega / lit(2.0);
    let (c, cp, int) =
        mathieu_with_integral(four * k_stat / w2, -lit::<T>(2.0) * k_osc / w2, half_w * t, half_w, lit(1e-12))?;
    Ok((-half_w * cp / c, c.ln(), int / half_w))
}

/// `(α, φ, β, θ)` for `B = B₀ sin ωt` with `ω_c = eB₀/m`.
pub fn bfield_sin_params<T: Real>(m: T, b0: T, omega: T, charge: T, t: T) -> Result<(T, T, T, T)> {
    let wc = charge * b0 / m;
    let r = wc * wc / (omega * omega);
    let (c, cp, int) = mathieu_with_integral(r / lit(8.0), r / lit(16.0), omega * t, omega, lit(1e-12))?;
    let s = (omega * t / lit(2.0)).sin();
    Ok((-omega * cp / c, c.ln(), int / omega, wc / omega * s * s))
}

/// Kanai–Caldirola oscillator with drive `F₀ + F₁ sin ω₁t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KanaiCaldirola<T = f64> {
    pub m: T,
    pub tau: T,
    pub omega0: T,
    pub f0: T,
    pub f1: T,
    pub omega1: T,
}

/// Regime-dependent pieces: `ch = cosh Ωt | cos Ωt`, `s = sinh(Ωt)/Ω | sin(Ωt)/Ω`.
struct KcRegime<T> {
    ch: T,
    s: T,
}

impl<T: Real> KanaiCaldirola<T> {
    /// `Ω = √|1 − 4τ²ω₀²| / 2τ`; errors at critical damping.
    pub fn big_omega(&self) -> Result<T> {
        let four = lit::<T>(4.0);
        let gap = T::one() - four * self.tau * self.tau * self.omega0 * self.omega0;
        if gap.abs() <= lit::<T>(1e-12) {
            return Err(Error::Domain(
                "critical damping excluded: 4τ²ω₀² = 1 makes the closed forms degenerate".into(),
            ));
        }
        Ok(gap.abs().sqrt() / (lit::<T>(2.0) * self.tau))
    }

    pub fn overdamped(&self) -> bool {
        lit::<T>(4.0) * self.tau * self.tau * self.omega0 * self.omega0 < T::one()
    }

    /// First zero of `e^{φ+γ}`: `(π − atan 2τΩ)/Ω` when under-damped, never otherwise.
    pub fn caustic_time(&self) -> Result<T> {
        let om = self.big_omega()?;
        Ok(if self.overdamped() {
            T::infinity()
        } else {
            (T::PI() - (lit::<T>(2.0) * self.tau * om).atan()) / om
        })
    }

    fn check_window(&self, t: T) -> Result<()> {
        let tc = self.caustic_time()?;
        if t >= tc {
            return Err(Error::Caustic {
                t: t.to_f64_lossy(),
                valid_to: tc.to_f64_lossy(),
            });
        }
        Ok(())
    }

    fn regime(&self, t: T) -> Result<KcRegime<T>> {
        let om = self.big_omega()?;
        let x = om * t;
        Ok(if self.overdamped() {
            KcRegime { ch: x.cosh(), s: x.sinh() / om }
        } else {
            KcRegime { ch: x.cos(), s: x.sin() / om }
        })
    }

    /// `(α, φ, β, γ)`, with `Δ = m`.
    pub fn alpha_phi_beta(&self, t: T) -> Result<(T, T, T, T)> {
        let r = self.regime(t)?;
        let two = lit::<T>(2.0);
        let tau = self.tau;
        self.check_window(t)?;
        let u = r.ch + r.s / (two * tau);
        // 1 − 4τ²(±Ω²) = 4τ²ω₀² in both regimes.
        let alpha = two * tau * self.omega0 * self.omega0 * r.s / (r.s + two * tau * r.ch);
        let phi = u.ln();
        let beta = two * tau * r.s / (r.s + two * tau * r.ch);
        Ok((alpha, phi, beta, -t / (two * tau)))
    }

    /// `(λ, Π)` of the driven oscillator.
    pub fn lambda_pi(&self, t: T) -> Result<(T, T)> {
        let r = self.regime(t)?;
        let (m, tau, w0, w1) = (self.m, self.tau, self.omega0, self.omega1);
        let two = lit::<T>(2.0);
        let w0s = w0 * w0;
        let w1s = w1 * w1;
        let d = tau * tau * (w1s - w0s) * (w1s - w0s) + w1s;
        let em = (-t / (two * tau)).exp();
        let ep = (t / (two * tau)).exp();
        let (cw, sw) = ((w1 * t).cos(), (w1 * t).sin());
        let lam = self.f0 / (m * w0s) * (T::one() - em * r.ch - em / (two * tau) * r.s)
            + self.f1 / (m * d)
                * (tau * w1 * em * r.ch
                    + w1 / two * (T::one() + two * tau * tau * w1s - two * tau * tau * w0s) * em * r.s
                    - tau * w1 * cw
                    + tau * tau * (w0s - w1s) * sw);
        let pi = -self.f0 * ep * r.s
            + self.f1 / d
                * (tau * tau * w1 * (w0s - w1s) * ep * (r.ch - ep * cw)
                    + tau * w1 / two * (w0s + w1s) * ep * r.s
                    - tau * w1s * (t / tau).exp() * sw);
        Ok((lam, pi))
    }

    /// `Ṡ = ½cλ² + eλ − ½aΠ²` with `a = e^{−t/τ}/m`, `c = mω₀²e^{t/τ}`.
    fn s_rate(&self, t: T) -> Result<T> {
        let (lam, pi) = self.lambda_pi(t)?;
        let half = lit::<T>(0.5);
        let g = (t / self.tau).exp();
        let a = T::one() / (g * self.m);
        let c = self.m * self.omega0 * self.omega0 * g;
        let e = -g * (self.f0 + self.f1 * (self.omega1 * t).sin());
        Ok(half * c * lam * lam + e * lam - half * a * pi * pi)
    }

    /// `S(t)` by adaptive quadrature of the closed-form rate.
    pub fn action(&self, t: T, tol: T) -> Result<T> {
        if t == T::zero() {
            return Ok(T::zero());
        }
        self.big_omega()?;
        let sol = integrate(
            |s, _, dy| {
                dy[0] = self.s_rate(s)?;
                Ok(())
            },
            T::zero(),
            &[T::zero()],
            t,
            &Options::with_tol(tol),
        )?;
        Ok(sol.last()[0])
    }
}

/// Full first-path sample from the closed forms.
pub fn kanai_caldirola_params<T: Real>(p: &KanaiCaldirola<T>, t: T) -> Result<ParamSample<T>> {
    let (alpha, phi, beta, gamma) = p.alpha_phi_beta(t)?;
    let (lam, pi) = p.lambda_pi(t)?;
    let u = (phi + gamma).exp();
    Ok(ParamSample {
        t,
        s: p.action(t, lit(1e-12))?,
        lam,
        pi,
        gamma,
        alpha,
        phi,
        vphi: T::zero(),
        beta,
        u,
        udot: -alpha * u,
    })
}

/// Propagator written directly from the damped-oscillator closed forms.
pub fn kanai_caldirola_kernel<T: Real>(p: &KanaiCaldirola<T>, t: T, hbar: T) -> Result<GaussianKernel<T>> {
    if !(t > T::zero()) {
        return Err(Error::Domain("kernel at t = 0 is a delta distribution".into()));
    }
    p.check_window(t)?;
    let r = p.regime(t)?;
    let (two, four) = (lit::<T>(2.0), lit::<T>(4.0));
    let (m, tau) = (p.m, p.tau);
    let coth = r.ch / r.s;
    let cen = Centered {
        prefactor: (Complex::new(m, T::zero()) / Complex::new(T::zero(), T::TAU() * hbar * r.s)).sqrt()
            * (t / (four * tau)).exp(),
        a: -m / (four * hbar * tau) * (t / tau).exp() * (T::one() - two * tau * coth),
        b: m / (four * hbar * tau) * (T::one() + two * tau * coth),
        c: -m * (t / (two * tau)).exp() / (hbar * r.s),
    };
    let (lam, pi) = p.lambda_pi(t)?;
    let s = p.action(t, lit(1e-12))?;
    GaussianKernel::from_centered(
        KernelVariant::Generic,
        t,
        p.caustic_time()?,
        hbar,
        cen,
        &Mat::identity(1),
        &[lam],
        &[pi],
        s,
    )
}

/// Which `Γ⁴` to use in the constant-B driven closed forms.
///
/// `AsPrinted` is `16ω⁴ + Γ₋⁴ − 8ω²(Ω + ω_c)²`; `Corrected` is
/// `16ω⁴ + Γ₋⁴ − 8ω²(Ω² + ω_c²)`, the value the equations of motion require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum GammaForm {
    AsPrinted,
    #[default]
    Corrected,
}

/// Constant `B`, trap `K`, `E_x = E0x + E1x sin ωt`, `E_y = E0y + E1y sin(ωt + ζ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrivenConstB<T = f64> {
    pub m: T,
    pub charge: T,
    pub b: T,
    pub k: T,
    pub e0x: T,
    pub e0y: T,
    pub e1x: T,
    pub e1y: T,
    pub omega: T,
    pub zeta: T,
}

/// Derived constants: `ω_c = eB/m`, `Ω² = 4K/m + ω_c²`, `Γ₋² = Ω² − ω_c²`, `Γ₊² = Ω² + ω_c²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrivenConstants<T = f64> {
    pub omega_c: T,
    pub big_omega: T,
    pub gamma_minus2: T,
    pub gamma_plus2: T,
    pub gamma4: T,
}

impl<T: Real> DrivenConstB<T> {
    pub fn constants(&self, form: GammaForm) -> Result<DrivenConstants<T>> {
        let wc = self.charge * self.b / self.m;
        let om2 = lit::<T>(4.0) * self.k / self.m + wc * wc;
        if !(om2 > T::zero()) {
            return Err(Error::Domain(format!("Ω² = 4K/m + ω_c² = {om2} must be positive")));
        }
        let om = om2.sqrt();
        let gm2 = om2 - wc * wc;
        let gp2 = om2 + wc * wc;
        let w2 = self.omega * self.omega;
        let sixteen = lit::<T>(16.0);
        let eight = lit::<T>(8.0);
        let g4 = match form {
            GammaForm::AsPrinted => sixteen * w2 * w2 + gm2 * gm2 - eight * w2 * (om + wc) * (om + wc),
            GammaForm::Corrected => sixteen * w2 * w2 + gm2 * gm2 - eight * w2 * gp2,
        };
        let eps = lit::<T>(1e-12);
        if gm2.abs() <= eps * om2 {
            return Err(Error::Domain(
                "Γ₋² = Ω² − ω_c² vanishes (K = 0): static field terms are secular".into(),
            ));
        }
        let scale = sixteen * w2 * w2 + gm2 * gm2 + eight * w2 * gp2;
        if g4.abs() <= eps * scale {
            return Err(Error::Domain(format!(
                "resonant drive: Γ⁴ = 16ω⁴ + Γ₋⁴ − 8ω²Γ₊² vanishes at ω = {}",
                self.omega
            )));
        }
        Ok(DrivenConstants {
            omega_c: wc,
            big_omega: om,
            gamma_minus2: gm2,
            gamma_plus2: gp2,
            gamma4: g4,
        })
    }

    fn amplitude(&self, s: Source) -> T {
        match s {
            Source::E0x => self.e0x,
            Source::E0y => self.e0y,
            Source::E1x => self.e1x,
            Source::E1y => self.e1y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Component {
    LamX,
    LamY,
    PiX,
    PiY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Source {
    E0x,
    E0y,
    E1x,
    E1y,
}

/// Time dependence of an addend; `So = sin(Ωt/2)`, `Cc = cos(ω_c t/2)` and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Factor {
    One,
    SinWt,
    CosWt,
    SoSc,
    CoCc,
    CoSc,
    SoCc,
}

/// Values an addend's coefficient may depend on.
pub struct TermCtx<T> {
    pub m: T,
    pub e: T,
    pub w: T,
    pub wc: T,
    pub om: T,
    pub gm2: T,
    pub gp2: T,
    pub g4: T,
    pub sz: T,
    pub cz: T,
}

pub struct TermSpec<T> {
    pub component: Component,
    pub source: Source,
    pub factor: Factor,
    pub coef: fn(&TermCtx<T>) -> T,
}

fn term<T>(component: Component, source: Source, factor: Factor, coef: fn(&TermCtx<T>) -> T) -> TermSpec<T> {
    TermSpec { component, source, factor, coef }
}

/// Every addend of the four long `λ`/`Π` expressions, coefficient per unit source amplitude.
pub fn driven_term_table<T: Real>() -> Vec<TermSpec<T>> {
    use Component::*;
    use Factor::*;
    use Source::*;
    vec![
        term(LamX, E0x, One, |c| lit::<T>(-4.0) * c.e / (c.gm2 * c.m)),
        term(LamX, E0x, SoSc, |c| lit::<T>(4.0) * c.e * c.wc / (c.gm2 * c.om * c.m)),
        term(LamX, E0x, CoCc, |c| lit::<T>(4.0) * c.e / (c.gm2 * c.m)),
        term(LamX, E0y, CoSc, |c| lit::<T>(-4.0) * c.e / (c.gm2 * c.m)),
        term(LamX, E0y, SoCc, |c| lit::<T>(4.0) * c.e * c.wc / (c.gm2 * c.om * c.m)),
        term(LamX, E1x, SinWt, |c| lit::<T>(-4.0) * c.gm2 * c.e / (c.g4 * c.m)),
        term(LamX, E1x, SinWt, |c| lit::<T>(16.0) * c.e * c.w * c.w / (c.g4 * c.m)),
        term(LamX, E1x, CoSc, |c| lit::<T>(-16.0) * c.e * c.w * c.wc / (c.g4 * c.m)),
        term(LamX, E1x, SoCc, |c| lit::<T>(-32.0) * c.e * c.w * c.w * c.w / (c.g4 * c.om * c.m)),
        term(LamX, E1x, SoCc, |c| lit::<T>(8.0) * c.gp2 * c.e * c.w / (c.g4 * c.om * c.m)),
        term(LamX, E1y, SinWt, |c| lit::<T>(-16.0) * c.e * c.sz * c.w * c.wc / (c.g4 * c.m)),
        term(LamX, E1y, CosWt, |c| lit::<T>(16.0) * c.cz * c.e * c.w * c.wc / (c.g4 * c.m)),
        term(LamX, E1y, SoSc, |c| lit::<T>(-8.0) * c.om * c.cz * c.e * c.w / (c.g4 * c.m)),
        term(LamX, E1y, SoSc, |c| lit::<T>(32.0) * c.cz * c.e * c.w * c.w * c.w / (c.g4 * c.om * c.m)),
        term(LamX, E1y, SoSc, |c| lit::<T>(-8.0) * c.cz * c.e * c.w * c.wc * c.wc / (c.g4 * c.om * c.m)),
        term(LamX, E1y, CoCc, |c| lit::<T>(-16.0) * c.cz * c.e * c.w * c.wc / (c.g4 * c.m)),
        term(LamX, E1y, CoSc, |c| lit::<T>(-4.0) * c.gm2 * c.e * c.sz / (c.g4 * c.m)),
        term(LamX, E1y, CoSc, |c| lit::<T>(16.0) * c.e * c.sz * c.w * c.w / (c.g4 * c.m)),
        term(LamX, E1y, SoCc, |c| lit::<T>(4.0) * c.gm2 * c.e * c.sz * c.wc / (c.g4 * c.om * c.m)),
        term(LamX, E1y, SoCc, |c| lit::<T>(16.0) * c.e * c.sz * c.wc * c.w * c.w / (c.g4 * c.om * c.m)),
        term(LamY, E0x, CoSc, |c| lit::<T>(4.0) * c.e / (c.gm2 * c.m)),
        term(LamY, E0x, SoCc, |c| lit::<T>(-4.0) * c.e * c.wc / (c.gm2 * c.om * c.m)),
        term(LamY, E0y, One, |c| lit::<T>(-4.0) * c.e / (c.gm2 * c.m)),
        term(LamY, E0y, SoSc, |c| lit::<T>(4.0) * c.e * c.wc / (c.gm2 * c.om * c.m)),
        term(LamY, E0y, CoCc, |c| lit::<T>(4.0) * c.e / (c.gm2 * c.m)),
        term(LamY, E1x, CosWt, |c| lit::<T>(-16.0) * c.e * c.w * c.wc / (c.g4 * c.m)),
        term(LamY, E1x, SoSc, |c| lit::<T>(-32.0) * c.e * c.w * c.w * c.w / (c.g4 * c.om * c.m)),
        term(LamY, E1x, SoSc, |c| lit::<T>(8.0) * c.gp2 * c.e * c.w / (c.g4 * c.om * c.m)),
        term(LamY, E1x, CoCc, |c| lit::<T>(16.0) * c.e * c.w * c.wc / (c.g4 * c.m)),
        term(LamY, E1y, SinWt, |c| lit::<T>(-4.0) * c.gm2 * c.cz * c.e / (c.g4 * c.m)),
        term(LamY, E1y, SinWt, |c| lit::<T>(16.0) * c.cz * c.e * c.w * c.w / (c.g4 * c.m)),
        term(LamY, E1y, CosWt, |c| lit::<T>(-4.0) * c.gm2 * c.e * c.sz / (c.g4 * c.m)),
        term(LamY, E1y, CosWt, |c| lit::<T>(16.0) * c.e * c.sz * c.w * c.w / (c.g4 * c.m)),
        term(LamY, E1y, SoSc, |c| lit::<T>(4.0) * c.gm2 * c.e * c.sz * c.wc / (c.g4 * c.om * c.m)),
        term(LamY, E1y, SoSc, |c| lit::<T>(16.0) * c.e * c.sz * c.wc * c.w * c.w / (c.g4 * c.om * c.m)),
        term(LamY, E1y, CoCc, |c| lit::<T>(-16.0) * c.e * c.sz * c.w * c.w / (c.g4 * c.m)),
        term(LamY, E1y, CoCc, |c| lit::<T>(4.0) * c.gm2 * c.e * c.sz / (c.g4 * c.m)),
        term(LamY, E1y, CoSc, |c| lit::<T>(-16.0) * c.cz * c.e * c.w * c.wc / (c.g4 * c.m)),
        term(LamY, E1y, SoCc, |c| lit::<T>(-32.0) * c.cz * c.e * c.w * c.w * c.w / (c.g4 * c.om * c.m)),
        term(LamY, E1y, SoCc, |c| lit::<T>(8.0) * c.om * c.cz * c.e * c.w / (c.g4 * c.m)),
        term(LamY, E1y, SoCc, |c| lit::<T>(8.0) * c.cz * c.e * c.w * c.wc * c.wc / (c.g4 * c.om * c.m)),
        term(PiX, E0x, CoSc, |c| lit::<T>(-2.0) * c.e * c.wc / (c.gm2)),
        term(PiX, E0x, SoCc, |c| lit::<T>(2.0) * c.om * c.e / (c.gm2)),
        term(PiX, E0y, One, |c| lit::<T>(2.0) * c.e * c.wc / (c.gm2)),
        term(PiX, E0y, SoSc, |c| lit::<T>(-2.0) * c.om * c.e / (c.gm2)),
        term(PiX, E0y, CoCc, |c| lit::<T>(-2.0) * c.e * c.wc / (c.gm2)),
        term(PiX, E1x, CosWt, |c| lit::<T>(-16.0) * c.e * c.w * c.w * c.w / (c.g4)),
        term(PiX, E1x, CosWt, |c| lit::<T>(4.0) * c.gp2 * c.e * c.w / (c.g4)),
        term(PiX, E1x, SoSc, |c| lit::<T>(-8.0) * c.om * c.e * c.w * c.wc / (c.g4)),
        term(PiX, E1x, CoCc, |c| lit::<T>(16.0) * c.e * c.w * c.w * c.w / (c.g4)),
        term(PiX, E1x, CoCc, |c| lit::<T>(-4.0) * c.gp2 * c.e * c.w / (c.g4)),
        term(PiX, E1y, SinWt, |c| lit::<T>(2.0) * c.gm2 * c.cz * c.e * c.wc / (c.g4)),
        term(PiX, E1y, SinWt, |c| lit::<T>(8.0) * c.cz * c.e * c.wc * c.w * c.w / (c.g4)),
        term(PiX, E1y, CosWt, |c| lit::<T>(2.0) * c.gm2 * c.e * c.sz * c.wc / (c.g4)),
        term(PiX, E1y, CosWt, |c| lit::<T>(8.0) * c.e * c.sz * c.wc * c.w * c.w / (c.g4)),
        term(PiX, E1y, SoSc, |c| lit::<T>(-2.0) * c.gm2 * c.om * c.e * c.sz / (c.g4)),
        term(PiX, E1y, SoSc, |c| lit::<T>(8.0) * c.om * c.e * c.sz * c.w * c.w / (c.g4)),
        term(PiX, E1y, CoCc, |c| lit::<T>(-8.0) * c.e * c.sz * c.wc * c.w * c.w / (c.g4)),
        term(PiX, E1y, CoCc, |c| lit::<T>(-2.0) * c.gm2 * c.e * c.sz * c.wc / (c.g4)),
        term(PiX, E1y, CoSc, |c| lit::<T>(-16.0) * c.cz * c.e * c.w * c.w * c.w / (c.g4)),
        term(PiX, E1y, CoSc, |c| lit::<T>(4.0) * c.cz * c.e * c.w * c.om * c.om / (c.g4)),
        term(PiX, E1y, CoSc, |c| lit::<T>(4.0) * c.cz * c.e * c.w * c.wc * c.wc / (c.g4)),
        term(PiX, E1y, SoCc, |c| lit::<T>(-8.0) * c.om * c.cz * c.e * c.w * c.wc / (c.g4)),
        term(PiY, E0x, One, |c| lit::<T>(-2.0) * c.e * c.wc / (c.gm2)),
        term(PiY, E0x, SoSc, |c| lit::<T>(2.0) * c.om * c.e / (c.gm2)),
        term(PiY, E0x, CoCc, |c| lit::<T>(2.0) * c.e * c.wc / (c.gm2)),
        term(PiY, E0y, CoSc, |c| lit::<T>(-2.0) * c.e * c.wc / (c.gm2)),
        term(PiY, E0y, SoCc, |c| lit::<T>(2.0) * c.om * c.e / (c.gm2)),
        term(PiY, E1x, SinWt, |c| lit::<T>(-8.0) * c.e * c.wc * c.w * c.w / (c.g4)),
        term(PiY, E1x, SinWt, |c| lit::<T>(-2.0) * c.gm2 * c.e * c.wc / (c.g4)),
        term(PiY, E1x, CoSc, |c| lit::<T>(16.0) * c.e * c.w * c.w * c.w / (c.g4)),
        term(PiY, E1x, CoSc, |c| lit::<T>(-4.0) * c.gp2 * c.e * c.w / (c.g4)),
        term(PiY, E1x, SoCc, |c| lit::<T>(8.0) * c.om * c.e * c.w * c.wc / (c.g4)),
        term(PiY, E1y, SinWt, |c| lit::<T>(16.0) * c.e * c.sz * c.w * c.w * c.w / (c.g4)),
        term(PiY, E1y, SinWt, |c| lit::<T>(-4.0) * c.e * c.sz * c.w * c.om * c.om / (c.g4)),
        term(PiY, E1y, SinWt, |c| lit::<T>(-4.0) * c.e * c.sz * c.w * c.wc * c.wc / (c.g4)),
        term(PiY, E1y, CosWt, |c| lit::<T>(-16.0) * c.cz * c.e * c.w * c.w * c.w / (c.g4)),
        term(PiY, E1y, CosWt, |c| lit::<T>(4.0) * c.gp2 * c.cz * c.e * c.w / (c.g4)),
        term(PiY, E1y, SoSc, |c| lit::<T>(-8.0) * c.om * c.cz * c.e * c.w * c.wc / (c.g4)),
        term(PiY, E1y, CoCc, |c| lit::<T>(16.0) * c.cz * c.e * c.w * c.w * c.w / (c.g4)),
        term(PiY, E1y, CoCc, |c| lit::<T>(-4.0) * c.cz * c.e * c.w * c.om * c.om / (c.g4)),
        term(PiY, E1y, CoCc, |c| lit::<T>(-4.0) * c.cz * c.e * c.w * c.wc * c.wc / (c.g4)),
        term(PiY, E1y, CoSc, |c| lit::<T>(-8.0) * c.e * c.sz * c.wc * c.w * c.w / (c.g4)),
        term(PiY, E1y, CoSc, |c| lit::<T>(-2.0) * c.gm2 * c.e * c.sz * c.wc / (c.g4)),
        term(PiY, E1y, SoCc, |c| lit::<T>(-8.0) * c.om * c.e * c.sz * c.w * c.w / (c.g4)),
        term(PiY, E1y, SoCc, |c| lit::<T>(2.0) * c.gm2 * c.om * c.e * c.sz / (c.g4)),
    ]
}

/// One evaluated addend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrivenTerm<T = f64> {
    pub component: Component,
    pub source: Source,
    pub factor: Factor,
    pub value: T,
}

pub fn driven_terms<T: Real>(p: &DrivenConstB<T>, t: T, form: GammaForm) -> Result<Vec<DrivenTerm<T>>> {
    let k = p.constants(form)?;
    let (sz, cz) = p.zeta.sin_cos();
    let ctx = TermCtx {
        m: p.m,
        e: p.charge,
        w: p.omega,
        wc: k.omega_c,
        om: k.big_omega,
        gm2: k.gamma_minus2,
        gp2: k.gamma_plus2,
        g4: k.gamma4,
        sz,
        cz,
    };
    let half = lit::<T>(0.5);
    let (so, co) = (half * k.big_omega * t).sin_cos();
    let (sc, cc) = (half * k.omega_c * t).sin_cos();
    let (swt, cwt) = (p.omega * t).sin_cos();
    Ok(driven_term_table::<T>()
        .into_iter()
        .map(|spec| {
            let f = match spec.factor {
                Factor::One => T::one(),
                Factor::SinWt => swt,
                Factor::CosWt => cwt,
                Factor::SoSc => so * sc,
                Factor::CoCc => co * cc,
                Factor::CoSc => co * sc,
                Factor::SoCc => so * cc,
            };
            DrivenTerm {
                component: spec.component,
                source: spec.source,
                factor: spec.factor,
                value: p.amplitude(spec.source) * (spec.coef)(&ctx) * f,
            }
        })
        .collect())
}

/// Closed-form values at `t`; the radial part has `γ = α = ϕ = β = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrivenValues<T = f64> {
    pub lam_x: T,
    pub lam_y: T,
    pub pi_x: T,
    pub pi_y: T,
    pub theta: T,
    pub phi: T,
    pub delta: T,
}

pub fn efield_const_b_params<T: Real>(p: &DrivenConstB<T>, t: T, form: GammaForm) -> Result<DrivenValues<T>> {
    let k = p.constants(form)?;
    let mut v = [T::zero(); 4];
    for term in driven_terms(p, t, form)? {
        let i = term.component as usize;
        v[i] = v[i] + term.value;
    }
    let half = lit::<T>(0.5);
    Ok(DrivenValues {
        lam_x: v[0],
        lam_y: v[1],
        pi_x: v[2],
        pi_y: v[3],
        theta: half * k.omega_c * t,
        phi: half * k.big_omega * t,
        delta: half * p.m * k.big_omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{CoefficientSet1D, FieldProfile2D};
    use crate::greens::kernel_build;
    use crate::paramflow::{solve_2d, solve_path1, Path};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    #[test]
    fn mathieu_basics() {
        assert!((mathieu_c::<f64>(1.0, 0.0, FRAC_PI_3).c - 0.5).abs() < 1e-12);
        let z = mathieu_c::<f64>(2.0, 0.5, 0.0);
        assert_eq!((z.c, z.cp), (1.0, 0.0));
        let a = mathieu_c::<f64>(2.0, 0.5, 1.0);
        let b = mathieu_c_tol::<f64>(2.0, 0.5, 1.0, 5e-13);
        assert!((a.c - b.c).abs() < 1e-10 && (a.cp - b.cp).abs() < 1e-10);
        let m = mathieu_c::<f64>(2.0, 0.5, -1.0);
        assert_eq!((m.c, m.cp), (a.c, -a.cp));
    }

    #[test]
    fn ion_trap_reductions() {
        assert_eq!(ion_trap_params::<f64>(1.0, 1.0, 0.3, 5.0, 0.0).unwrap(), (0.0, 0.0, 0.0));
        let (w0, t) = (1.3, 0.5);
        let (alpha, phi, beta) = ion_trap_params::<f64>(1.0, w0 * w0, 0.0, 5.0, t).unwrap();
        assert!((alpha - w0 * (w0 * t).tan()).abs() < 1e-9);
        assert!((phi - (w0 * t).cos().ln()).abs() < 1e-10);
        assert!((beta - (w0 * t).tan() / w0).abs() < 1e-9);
        assert!(matches!(
            ion_trap_params::<f64>(1.0, 1.0, 0.0, 5.0, 2.0),
            Err(Error::Caustic { .. })
        ));
    }

    #[test]
    fn ion_trap_vs_paramflow() {
        let traj = solve_path1(&CoefficientSet1D::<f64>::ion_trap(1.0, 1.0, 0.3, 5.0), 0.4, 1e-12).unwrap();
        let s = traj.sample(0.4).unwrap();
        let (alpha, phi, beta) = ion_trap_params::<f64>(1.0, 1.0, 0.3, 5.0, 0.4).unwrap();
        assert!((alpha - s.alpha).abs() < 1e-8);
        assert!((phi - s.phi).abs() < 1e-8);
        assert!((beta - s.beta).abs() < 1e-8);
    }

    #[test]
    fn bsin() {
        let (alpha, phi, beta, theta) = bfield_sin_params::<f64>(1.0, 0.0, 1.0, 1.0, 0.7).unwrap();
        assert_eq!((alpha, phi, theta), (0.0, 0.0, 0.0));
        assert!((beta - 0.7).abs() < 1e-12);
        let (.., theta) = bfield_sin_params::<f64>(1.0, 2.0, 1.5, 1.0, PI / 1.5).unwrap();
        assert!((theta - 2.0 / 1.5).abs() < 1e-14);
        let f = FieldProfile2D::<f64>::sinusoidal_b(1.0, 2.0, 1.5, 1.0);
        let traj = solve_2d(&f, 1.0, 1e-12, Path::Path1).unwrap();
        let s = traj.radial.sample(1.0).unwrap();
        let (alpha, phi, beta, theta) = bfield_sin_params::<f64>(1.0, 2.0, 1.5, 1.0, 1.0).unwrap();
        assert!((alpha - s.alpha).abs() < 1e-8 && (phi - s.phi).abs() < 1e-8);
        assert!((beta - s.beta).abs() < 1e-8);
        assert!((theta - traj.sample(1.0).unwrap().theta).abs() < 1e-8);
    }

    fn kc(omega0: f64, f0: f64, f1: f64) -> KanaiCaldirola {
        KanaiCaldirola { m: 1.0, tau: 1.0, omega0, f0, f1, omega1: 1.0 }
    }

    #[test]
    fn kanai_caldirola_values() {
        let s = kanai_caldirola_params(&kc(0.25, 0.0, 0.0), 1.0).unwrap();
        assert_eq!((s.lam, s.pi, s.s), (0.0, 0.0, 0.0));
        assert!((s.beta - 0.640_314_545_381_655_3).abs() < 1e-12);
        assert!((s.beta - 0.6404).abs() < 1e-4);
        assert!(((s.phi + s.gamma).exp() - 0.9772).abs() < 1e-4);
        assert_eq!(s.gamma, -0.5);
        assert!(matches!(
            kanai_caldirola_params(&kc(2.0, 0.3, 0.2), 1.0),
            Err(Error::Caustic { .. })
        ));
        let tc = kc(2.0, 0.0, 0.0).caustic_time().unwrap();
        let (_, phi, ..) = kc(2.0, 0.0, 0.0).alpha_phi_beta(tc * (1.0 - 1e-9)).unwrap();
        assert!(phi < -15.0);
        let u = kanai_caldirola_params(&kc(2.0, 0.3, 0.2), 0.5).unwrap();
        for v in [u.alpha, u.phi, u.beta, u.lam, u.pi, u.s] {
            assert!(v.is_finite());
        }
        assert!(matches!(
            kanai_caldirola_params(&kc(0.5, 0.0, 0.0), 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn kanai_caldirola_branches_meet() {
        let a = kanai_caldirola_params(&kc(0.5 - 1e-3, 0.2, 0.1), 1.0).unwrap();
        let b = kanai_caldirola_params(&kc(0.5 + 1e-3, 0.2, 0.1), 1.0).unwrap();
        for (x, y) in [(a.alpha, b.alpha), (a.phi, b.phi), (a.beta, b.beta), (a.lam, b.lam), (a.pi, b.pi)] {
            assert!((x - y).abs() < 1e-2);
        }
    }

    #[test]
    fn kanai_caldirola_vs_paramflow() {
        for omega0 in [0.25, 2.0] {
            let p = kc(omega0, 0.2, 0.1);
            let set = CoefficientSet1D::<f64>::kanai_caldirola(1.0, 1.0, omega0, 0.2, 0.1, 1.0);
            let traj = solve_path1(&set, 1.0, 1e-12).unwrap();
            let t = 0.7f64.min(0.8 * traj.valid_to);
            let n = traj.sample(t).unwrap();
            let c = kanai_caldirola_params(&p, t).unwrap();
            for (x, y) in [(c.alpha, n.alpha), (c.phi, n.phi), (c.beta, n.beta), (c.lam, n.lam), (c.pi, n.pi), (c.s, n.s)] {
                assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()), "{omega0}: {x} vs {y}");
            }
            let kk = kanai_caldirola_kernel(&p, t, 1.0).unwrap();
            let kn = kernel_build(&traj, t, crate::greens::KernelVariant::Path1).unwrap();
            assert!(kk.max_coeff_diff(&kn) < 1e-8);
        }
    }

    fn driven(e0x: f64, e0y: f64, e1x: f64, e1y: f64, zeta: f64) -> DrivenConstB {
        DrivenConstB { m: 1.0, charge: 1.0, b: 2.0, k: 0.5, e0x, e0y, e1x, e1y, omega: 1.3, zeta }
    }

    fn ode_reference(p: &DrivenConstB, t: f64) -> [f64; 4] {
        let f = FieldProfile2D::<f64>::driven_e(p.m, p.charge, p.b, p.k, p.e0x, p.e0y, p.e1x, p.e1y, p.omega, p.zeta);
        let s = solve_2d(&f, t, 1e-12, Path::Path2).unwrap().sample(t).unwrap();
        [s.lam_x, s.lam_y, s.pi_x, s.pi_y]
    }

    fn closed(p: &DrivenConstB, t: f64, form: GammaForm) -> [f64; 4] {
        let v = efield_const_b_params(p, t, form).unwrap();
        [v.lam_x, v.lam_y, v.pi_x, v.pi_y]
    }

    #[test]
    fn driven_per_source() {
        let cases = [
            driven(0.3, 0.0, 0.0, 0.0, 0.0),
            driven(0.0, 0.3, 0.0, 0.0, 0.0),
            driven(0.0, 0.0, 0.3, 0.0, 0.0),
            driven(0.0, 0.0, 0.0, 0.2, 0.0),
            driven(0.0, 0.0, 0.0, 0.2, FRAC_PI_2),
            driven(0.3, 0.0, 0.0, 0.2, FRAC_PI_2),
        ];
        for p in cases {
            let r = ode_reference(&p, 2.0);
            let c = closed(&p, 2.0, GammaForm::Corrected);
            for i in 0..4 {
                assert!((r[i] - c[i]).abs() < 1e-6, "{p:?} component {i}: {} vs {}", c[i], r[i]);
            }
        }
    }

    #[test]
    fn printed_gamma_fails_only_for_drive() {
        let stat = driven(0.3, 0.2, 0.0, 0.0, 0.0);
        assert_eq!(closed(&stat, 2.0, GammaForm::AsPrinted), closed(&stat, 2.0, GammaForm::Corrected));
        let p = driven(0.3, 0.0, 0.0, 0.2, FRAC_PI_2);
        let r = ode_reference(&p, 2.0);
        let c = closed(&p, 2.0, GammaForm::AsPrinted);
        assert!((0..4).any(|i| (r[i] - c[i]).abs() > 1e-3));
    }

    #[test]
    fn driven_zero_cases() {
        let v = efield_const_b_params(&driven(0.0, 0.0, 0.0, 0.0, 0.0), 2.0, GammaForm::Corrected).unwrap();
        assert_eq!([v.lam_x, v.lam_y, v.pi_x, v.pi_y], [0.0; 4]);
        let v = efield_const_b_params(&driven(0.3, -0.4, 0.25, 0.2, 0.7), 0.0, GammaForm::Corrected).unwrap();
        for x in [v.lam_x, v.lam_y, v.pi_x, v.pi_y] {
            assert!(x.abs() < 1e-14);
        }
        let d = driven(0.3, 0.0, 0.0, 0.0, 0.0).constants(GammaForm::Corrected).unwrap();
        assert!((d.gamma_minus2 - (d.big_omega.powi(2) - d.omega_c.powi(2))).abs() < 1e-14);
    }

    #[test]
    fn every_addend_is_linear_in_its_source() {
        let base = driven(0.3, -0.4, 0.25, 0.2, 0.7);
        let mut doubled = base;
        doubled.e0x *= 2.0;
        doubled.e0y *= 2.0;
        doubled.e1x *= 2.0;
        doubled.e1y *= 2.0;
        let a = driven_terms(&base, 1.1, GammaForm::Corrected).unwrap();
        let b = driven_terms(&doubled, 1.1, GammaForm::Corrected).unwrap();
        assert_eq!(a.len(), driven_term_table::<f64>().len());
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x.value - y.value).abs() < 1e-15);
            let mut only = driven(0.0, 0.0, 0.0, 0.0, 0.7);
            match x.source {
                Source::E0x => only.e0x = 0.3,
                Source::E0y => only.e0y = -0.4,
                Source::E1x => only.e1x = 0.25,
                Source::E1y => only.e1y = 0.2,
            }
            let single = driven_terms(&only, 1.1, GammaForm::Corrected).unwrap();
            let same = single
                .iter()
                .find(|s| (s.component, s.source, s.factor) == (x.component, x.source, x.factor) && s.value == x.value);
            assert!(same.is_some());
        }
    }

    #[test]
    fn resonance_rejected() {
        let mut p = driven(0.0, 0.0, 0.1, 0.0, 0.0);
        p.k = 0.0;
        assert!(matches!(p.constants(GammaForm::Corrected), Err(Error::Domain(_))));
        // Γ⁴ = (4ω² − Γ₊²)² − 4Ω²ω_c² vanishes at 2ω = Ω ± ω_c.
        let mut p = driven(0.0, 0.0, 0.1, 0.0, 0.0);
        let k = p.constants(GammaForm::Corrected).unwrap();
        p.omega = 0.5 * (k.big_omega + k.omega_c);
        assert!(matches!(p.constants(GammaForm::Corrected), Err(Error::Domain(_))));
    }
}
