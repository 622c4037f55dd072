//! Time-dependent Hamiltonian coefficients.
//!
//! JSON form of a profile (field `kind` selects the variant):
//!
//! ```json
//! {"kind": "constant", "value": 3.0}
//! {"kind": "sinusoid", "amplitude": 1.0, "omega": 2.0, "phase": 0.0, "offset": 0.0}
//! {"kind": "exponential", "prefactor": 1.0, "rate": -0.5}
//! {"kind": "tabulated", "knots": [[0.0, 0.0], [1.0, 1.0], [2.0, 8.0]]}
//! {"kind": "sum", "terms": [ ... ]}
//! {"kind": "product", "factors": [ ... ]}
//! {"kind": "reciprocal", "of": { ... }}
//! {"kind": "shifted", "by": 0.5, "inner": { ... }}
//! ```
//!
//! A sinusoid evaluates to `amplitude·sin(omega·t + phase) + offset`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Natural cubic spline through strictly increasing knots. Never extrapolates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Knots<T>", into = "Knots<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct CubicSpline<T> {
    ts: Vec<T>,
    ys: Vec<T>,
    /// Second derivatives at the knots; not-a-knot ends once there are 4 knots.
    m: Vec<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knots<T> {
    pub knots: Vec<(T, T)>,
}

impl<T: Real> TryFrom<Knots<T>> for CubicSpline<T> {
    type Error = Error;
    fn try_from(k: Knots<T>) -> Result<Self> {
        CubicSpline::new(k.knots)
    }
}

impl<T: Real> From<CubicSpline<T>> for Knots<T> {
    fn from(s: CubicSpline<T>) -> Self {
        Knots {
            knots: s.ts.into_iter().zip(s.ys).collect(),
        }
    }
}


impl<T: Real> CubicSpline<T> {
    pub fn new(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Domain("tabulated profile needs at least 2 knots".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Domain(
                "tabulated knots must be strictly increasing in t".into(),
            ));
        }
        let (ts, ys): (Vec<T>, Vec<T>) = knots.into_iter().unzip();
        let n = ts.len();
        let mut m = vec![T::zero(); n];
        if n > 2 {
            // Interior second derivatives by the Thomas algorithm; not-a-knot ends from 4 knots on.
            let k = n - 2;
            let h: Vec<T> = ts.windows(2).map(|w| w[1] - w[0]).collect();
            let mut lower = vec![T::zero(); k];
            let mut diag = vec![T::zero(); k];
            let mut upper = vec![T::zero(); k];
            let mut rhs = vec![T::zero(); k];
            let two: T = lit(2.0);
            let six: T = lit(6.0);
            for i in 1..n - 1 {
                let (h0, h1) = (h[i - 1], h[i]);
                lower[i - 1] = h0;
                diag[i - 1] = two * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = six * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            let not_a_knot = n >= 4;
            if not_a_knot {
                let (h0, h1) = (h[0], h[1]);
                diag[0] = (h0 + h1) * (h0 + two * h1) / h1;
                upper[0] = (h1 * h1 - h0 * h0) / h1;
                let (ha, hb) = (h[n - 3], h[n - 2]);
                lower[k - 1] = (ha * ha - hb * hb) / ha;
                diag[k - 1] = (ha + hb) * (two * ha + hb) / ha;
            }
            for i in 1..k {
                let w = lower[i] / diag[i - 1];
                diag[i] = diag[i] - w * upper[i - 1];
                rhs[i] = rhs[i] - w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
            if not_a_knot {
                let (h0, h1) = (h[0], h[1]);
                m[0] = ((h0 + h1) * m[1] - h0 * m[2]) / h1;
                let (ha, hb) = (h[n - 3], h[n - 2]);
                m[n - 1] = ((ha + hb) * m[n - 2] - hb * m[n - 3]) / ha;
            }
        }
        Ok(Self { ts, ys, m })
    }

    pub fn domain(&self) -> (T, T) {
        (self.ts[0], *self.ts.last().unwrap())
    }

    fn locate(&self, t: T) -> Result<(usize, T, T)> {
        let (lo, hi) = self.domain();
        let slack = (hi - lo) * lit(1e-12);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::Domain(format!(
                "t = {t} outside tabulated range [{lo}, {hi}]"
            )));
        }
        let t = t.max(lo).min(hi);
        let i = self.ts.partition_point(|&s| s <= t).clamp(1, self.ts.len() - 1) - 1;
        let h = self.ts[i + 1] - self.ts[i];
        Ok((i, h, t))
    }

    pub fn eval(&self, t: T) -> Result<T> {
        let (i, h, t) = self.locate(t)?;
        let a = (self.ts[i + 1] - t) / h;
        let b = (t - self.ts[i]) / h;
        let six: T = lit(6.0);
        Ok(a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / six)
    }

    pub fn derivative(&self, t: T) -> Result<T> {
        let (i, h, t) = self.locate(t)?;
        let a = (self.ts[i + 1] - t) / h;
        let b = (t - self.ts[i]) / h;
        let three: T = lit(3.0);
        let six: T = lit(6.0);
        Ok((self.ys[i + 1] - self.ys[i]) / h
            - (three * a * a - T::one()) * h * self.m[i] / six
            + (three * b * b - T::one()) * h * self.m[i + 1] / six)
    }
}

/// Scalar function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub enum TimeProfile<T = f64> {
    Constant {
        value: T,
    },
    Sinusoid {
        amplitude: T,
        omega: T,
        #[serde(default)]
        phase: T,
        #[serde(default)]
        offset: T,
    },
    Exponential {
        prefactor: T,
        rate: T,
    },
    Tabulated(CubicSpline<T>),
    Sum {
        terms: Vec<TimeProfile<T>>,
    },
    Product {
        factors: Vec<TimeProfile<T>>,
    },
    Reciprocal {
        of: Box<TimeProfile<T>>,
    },
    /// `inner(t + by)`.
    Shifted {
        by: T,
        inner: Box<TimeProfile<T>>,
    },
}

impl<T: Real> Default for TimeProfile<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> TimeProfile<T> {
    pub fn constant(value: T) -> Self {
        Self::Constant { value }
    }

    pub fn zero() -> Self {
        Self::constant(T::zero())
    }

    pub fn sinusoid(amplitude: T, omega: T, phase: T, offset: T) -> Self {
        Self::Sinusoid {
            amplitude,
            omega,
            phase,
            offset,
        }
    }

    pub fn exponential(prefactor: T, rate: T) -> Self {
        Self::Exponential { prefactor, rate }
    }

    pub fn tabulated(knots: Vec<(T, T)>) -> Result<Self> {
        Ok(Self::Tabulated(CubicSpline::new(knots)?))
    }

    /// Sum with constant folding.
    pub fn sum(terms: Vec<TimeProfile<T>>) -> Self {
        let mut c = T::zero();
        let mut rest = Vec::new();
        for t in terms {
            match t {
                Self::Constant { value } => c = c + value,
                other => rest.push(other),
            }
        }
        if rest.is_empty() {
            return Self::constant(c);
        }
        if c != T::zero() {
            rest.push(Self::constant(c));
        }
        if rest.len() == 1 {
            rest.pop().unwrap()
        } else {
            Self::Sum { terms: rest }
        }
    }

    /// Product with constant folding.
    pub fn product(factors: Vec<TimeProfile<T>>) -> Self {
        let mut c = T::one();
        let mut rest = Vec::new();
        for f in factors {
            match f {
                Self::Constant { value } => c = c * value,
                other => rest.push(other),
            }
        }
        if rest.is_empty() || c == T::zero() {
            return Self::constant(c);
        }
        if c != T::one() {
            rest.insert(0, Self::constant(c));
        }
        if rest.len() == 1 {
            rest.pop().unwrap()
        } else {
            Self::Product { factors: rest }
        }
    }

    pub fn reciprocal(of: TimeProfile<T>) -> Self {
        match of {
            Self::Constant { value } => Self::constant(T::one() / value),
            Self::Exponential { prefactor, rate } => Self::exponential(T::one() / prefactor, -rate),
            other => Self::Reciprocal { of: Box::new(other) },
        }
    }

    pub fn scaled(self, k: T) -> Self {
        Self::product(vec![Self::constant(k), self])
    }

    /// `self(t + by)` as a profile in the new time variable.
    pub fn shifted(&self, by: T) -> Self {
        match self {
            Self::Constant { .. } => self.clone(),
            Self::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => Self::sinusoid(*amplitude, *omega, *phase + *omega * by, *offset),
            Self::Exponential { prefactor, rate } => {
                Self::exponential(*prefactor * (*rate * by).exp(), *rate)
            }
            Self::Sum { terms } => Self::Sum {
                terms: terms.iter().map(|p| p.shifted(by)).collect(),
            },
            Self::Product { factors } => Self::Product {
                factors: factors.iter().map(|p| p.shifted(by)).collect(),
            },
            Self::Reciprocal { of } => Self::Reciprocal {
                of: Box::new(of.shifted(by)),
            },
            Self::Shifted { by: b0, inner } => Self::Shifted {
                by: *b0 + by,
                inner: inner.clone(),
            },
            Self::Tabulated(_) => Self::Shifted {
                by,
                inner: Box::new(self.clone()),
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }

    /// Constant value if the profile is a constant.
    pub fn as_constant(&self) -> Option<T> {
        match self {
            Self::Constant { value } => Some(*value),
            _ => None,
        }
    }

    pub fn eval(&self, t: T) -> Result<T> {
        Ok(match self {
            Self::Constant { value } => *value,
            Self::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => *amplitude * (*omega * t + *phase).sin() + *offset,
            Self::Exponential { prefactor, rate } => *prefactor * (*rate * t).exp(),
            Self::Tabulated(s) => s.eval(t)?,
            Self::Sum { terms } => {
                let mut acc = T::zero();
                for p in terms {
                    acc = acc + p.eval(t)?;
                }
                acc
            }
            Self::Product { factors } => {
                let mut acc = T::one();
                for p in factors {
                    acc = acc * p.eval(t)?;
                }
                acc
            }
            Self::Reciprocal { of } => {
                let v = of.eval(t)?;
                if v == T::zero() {
                    return Err(Error::Domain(format!("reciprocal of zero at t = {t}")));
                }
                T::one() / v
            }
            Self::Shifted { by, inner } => inner.eval(t + *by)?,
        })
    }

    pub fn derivative(&self, t: T) -> Result<T> {
        Ok(match self {
            Self::Constant { .. } => T::zero(),
            Self::Sinusoid {
                amplitude,
                omega,
                phase,
                ..
            } => *amplitude * *omega * (*omega * t + *phase).cos(),
            Self::Exponential { prefactor, rate } => *prefactor * *rate * (*rate * t).exp(),
            Self::Tabulated(s) => s.derivative(t)?,
            Self::Sum { terms } => {
                let mut acc = T::zero();
                for p in terms {
                    acc = acc + p.derivative(t)?;
                }
                acc
            }
            Self::Product { factors } => {
                let vals: Vec<T> = factors.iter().map(|p| p.eval(t)).collect::<Result<_>>()?;
                let mut acc = T::zero();
                for (i, p) in factors.iter().enumerate() {
                    let mut term = p.derivative(t)?;
                    for (j, v) in vals.iter().enumerate() {
                        if i != j {
                            term = term * *v;
                        }
                    }
                    acc = acc + term;
                }
                acc
            }
            Self::Reciprocal { of } => {
                let v = of.eval(t)?;
                -of.derivative(t)? / (v * v)
            }
            Self::Shifted { by, inner } => inner.derivative(t + *by)?,
        })
    }

    /// Time interval on which evaluation is defined (`None` = everywhere).
    pub fn domain(&self) -> Option<(T, T)> {
        let meet = |acc: Option<(T, T)>, d: Option<(T, T)>| match (acc, d) {
            (None, d) => d,
            (a, None) => a,
            (Some((a0, a1)), Some((b0, b1))) => Some((a0.max(b0), a1.min(b1))),
        };
        match self {
            Self::Tabulated(s) => Some(s.domain()),
            Self::Sum { terms } => terms.iter().fold(None, |acc, p| meet(acc, p.domain())),
            Self::Product { factors } => factors.iter().fold(None, |acc, p| meet(acc, p.domain())),
            Self::Reciprocal { of } => of.domain(),
            Self::Shifted { by, inner } => inner.domain().map(|(a, b)| (a - *by, b - *by)),
            _ => None,
        }
    }

    /// Errors unless `[t0, t1]` lies inside the profile's domain.
    pub fn check_domain(&self, t0: T, t1: T, name: &str) -> Result<()> {
        if let Some((lo, hi)) = self.domain() {
            let slack = (hi - lo).abs() * lit(1e-12);
            if t0 < lo - slack || t1 > hi + slack {
                return Err(Error::Domain(format!(
                    "profile {name} is defined on [{lo}, {hi}] but [{t0}, {t1}] was requested"
                )));
            }
        }
        Ok(())
    }

    /// Minimum over a uniform grid of `n + 1` points on `[t0, t1]`.
    pub fn sampled_min(&self, t0: T, t1: T, n: usize) -> Result<T> {
        let mut m = T::infinity();
        for i in 0..=n {
            let t = t0 + (t1 - t0) * T::from_usize(i).unwrap() / T::from_usize(n).unwrap();
            m = m.min(self.eval(t)?);
        }
        Ok(m)
    }
}

/// Coefficient values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffValues<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
    pub g: T,
}

/// `H = ½a p² + ½b(xp+px) + ½c x² + d p + e x + g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct CoefficientSet1D<T = f64> {
    pub a: TimeProfile<T>,
    #[serde(default)]
    pub b: TimeProfile<T>,
    #[serde(default)]
    pub c: TimeProfile<T>,
    #[serde(default)]
    pub d: TimeProfile<T>,
    #[serde(default)]
    pub e: TimeProfile<T>,
    #[serde(default)]
    pub g: TimeProfile<T>,
    #[serde(default = "one")]
    pub hbar: T,
}

fn one<T: Real>() -> T {
    T::one()
}

impl<T: Real> CoefficientSet1D<T> {
    /// Only `a` set; every other coefficient zero, ħ = 1.
    pub fn with_a(a: TimeProfile<T>) -> Self {
        Self {
            a,
            b: TimeProfile::zero(),
            c: TimeProfile::zero(),
            d: TimeProfile::zero(),
            e: TimeProfile::zero(),
            g: TimeProfile::zero(),
            hbar: T::one(),
        }
    }

    pub fn free_particle(m: T) -> Self {
        Self::with_a(TimeProfile::constant(T::one() / m))
    }

    /// `p²/2m + ½mω²x²`.
    pub fn harmonic(m: T, omega: T) -> Self {
        let mut s = Self::free_particle(m);
        s.c = TimeProfile::constant(m * omega * omega);
        s
    }

    /// `p²/2m − f x`.
    pub fn linear_potential(m: T, f: TimeProfile<T>) -> Self {
        let mut s = Self::free_particle(m);
        s.e = f.scaled(-T::one());
        s
    }

    /// `p²/2m + ½(K + k cos ωt)x²`.
    pub fn ion_trap(m: T, stiffness: T, k: T, omega: T) -> Self {
        let mut s = Self::free_particle(m);
        s.c = TimeProfile::sinusoid(k, omega, T::FRAC_PI_2(), stiffness);
        s
    }

    /// Kanai–Caldirola forced oscillator:
    /// `a = e^{−t/τ}/m`, `c = mω₀²e^{t/τ}`, `e = −e^{t/τ}(F₀ + F₁ sin ω₁t)`.
    pub fn kanai_caldirola(m: T, tau: T, omega0: T, f0: T, f1: T, omega1: T) -> Self {
        let mut s = Self::with_a(TimeProfile::exponential(T::one() / m, -T::one() / tau));
        s.c = TimeProfile::exponential(m * omega0 * omega0, T::one() / tau);
        s.e = TimeProfile::product(vec![
            TimeProfile::exponential(-T::one(), T::one() / tau),
            TimeProfile::sinusoid(f1, omega1, T::zero(), f0),
        ]);
        s
    }

    pub fn with_hbar(mut self, hbar: T) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn eval(&self, t: T) -> Result<CoeffValues<T>> {
        Ok(CoeffValues {
            a: self.a.eval(t)?,
            b: self.b.eval(t)?,
            c: self.c.eval(t)?,
            d: self.d.eval(t)?,
            e: self.e.eval(t)?,
            g: self.g.eval(t)?,
        })
    }

    pub fn profiles(&self) -> [(&'static str, &TimeProfile<T>); 6] {
        [
            ("a", &self.a),
            ("b", &self.b),
            ("c", &self.c),
            ("d", &self.d),
            ("e", &self.e),
            ("g", &self.g),
        ]
    }

    /// Domain of every profile must contain `[0, t_end]`; ħ must be positive.
    pub fn validate(&self, t_end: T) -> Result<()> {
        if !(self.hbar > T::zero()) {
            return Err(Error::Domain("hbar must be positive".into()));
        }
        if !(t_end > T::zero()) || !t_end.is_finite() {
            return Err(Error::Domain(format!("t_end must be positive, got {t_end}")));
        }
        for (name, p) in self.profiles() {
            p.check_domain(T::zero(), t_end, name)?;
        }
        Ok(())
    }

    /// The coefficient set seen from time `t1` on.
    pub fn shifted(&self, t1: T) -> Self {
        Self {
            a: self.a.shifted(t1),
            b: self.b.shifted(t1),
            c: self.c.shifted(t1),
            d: self.d.shifted(t1),
            e: self.e.shifted(t1),
            g: self.g.shifted(t1),
            hbar: self.hbar,
        }
    }
}

/// 2D charged particle: `(p − eA)²/2m + ½K r² + e E·r` in the symmetric gauge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct FieldProfile2D<T = f64> {
    #[serde(rename = "m")]
    pub mass: TimeProfile<T>,
    #[serde(rename = "B", default)]
    pub b_field: TimeProfile<T>,
    #[serde(rename = "K", default)]
    pub stiffness: TimeProfile<T>,
    #[serde(rename = "Ex", default)]
    pub ex: TimeProfile<T>,
    #[serde(rename = "Ey", default)]
    pub ey: TimeProfile<T>,
    #[serde(default = "one")]
    pub charge: T,
    #[serde(default = "one")]
    pub hbar: T,
}

impl<T: Real> FieldProfile2D<T> {
    pub fn new(mass: T) -> Self {
        Self {
            mass: TimeProfile::constant(mass),
            b_field: TimeProfile::zero(),
            stiffness: TimeProfile::zero(),
            ex: TimeProfile::zero(),
            ey: TimeProfile::zero(),
            charge: T::one(),
            hbar: T::one(),
        }
    }

    /// `B = B₀ sin ωt`, no trap, no electric field.
    pub fn sinusoidal_b(m: T, b0: T, omega: T, charge: T) -> Self {
        let mut f = Self::new(m);
        f.b_field = TimeProfile::sinusoid(b0, omega, T::zero(), T::zero());
        f.charge = charge;
        f
    }

    /// Constant `B` and `K`, `E_x = E0x + E1x sin ωt`, `E_y = E0y + E1y sin(ωt + ζ)`.
    #[allow(clippy::too_many_arguments)]
    pub fn driven_e(
        m: T,
        charge: T,
        b: T,
        k: T,
        e0x: T,
        e0y: T,
        e1x: T,
        e1y: T,
        omega: T,
        zeta: T,
    ) -> Self {
        let mut f = Self::new(m);
        f.charge = charge;
        f.b_field = TimeProfile::constant(b);
        f.stiffness = TimeProfile::constant(k);
        f.ex = TimeProfile::sinusoid(e1x, omega, T::zero(), e0x);
        f.ey = TimeProfile::sinusoid(e1y, omega, zeta, e0y);
        f
    }

    pub fn profiles(&self) -> [(&'static str, &TimeProfile<T>); 5] {
        [
            ("m", &self.mass),
            ("B", &self.b_field),
            ("K", &self.stiffness),
            ("Ex", &self.ex),
            ("Ey", &self.ey),
        ]
    }

    pub fn validate(&self, t_end: T) -> Result<()> {
        if !(self.hbar > T::zero()) {
            return Err(Error::Domain("hbar must be positive".into()));
        }
        if !(t_end > T::zero()) || !t_end.is_finite() {
            return Err(Error::Domain(format!("t_end must be positive, got {t_end}")));
        }
        for (name, p) in self.profiles() {
            p.check_domain(T::zero(), t_end, name)?;
        }
        if self.mass.sampled_min(T::zero(), t_end, 1000)? <= T::zero() {
            return Err(Error::Precondition("mass must be positive".into()));
        }
        Ok(())
    }

    pub fn shifted(&self, t1: T) -> Self {
        Self {
            mass: self.mass.shifted(t1),
            b_field: self.b_field.shifted(t1),
            stiffness: self.stiffness.shifted(t1),
            ex: self.ex.shifted(t1),
            ey: self.ey.shifted(t1),
            charge: self.charge,
            hbar: self.hbar,
        }
    }

    /// `eB/2m` as a profile.
    pub fn theta_rate(&self) -> TimeProfile<T> {
        TimeProfile::product(vec![
            TimeProfile::constant(self.charge * lit(0.5)),
            self.b_field.clone(),
            TimeProfile::reciprocal(self.mass.clone()),
        ])
    }
}

/// Radial oscillator shared by x and y after the rotation, plus `θ̇ = eB/2m`.
///
/// `a = 1/m`, `b = 0`, `c = K + e²B²/(4m)`, `d = e = g = 0`.
pub fn reduce_2d<T: Real>(profile: &FieldProfile2D<T>) -> (CoefficientSet1D<T>, TimeProfile<T>) {
    let inv_m = TimeProfile::reciprocal(profile.mass.clone());
    let e = profile.charge;
    let magnetic = TimeProfile::product(vec![
        TimeProfile::constant(e * e * lit(0.25)),
        profile.b_field.clone(),
        profile.b_field.clone(),
        inv_m.clone(),
    ]);
    let mut set = CoefficientSet1D::with_a(inv_m);
    set.c = TimeProfile::sum(vec![profile.stiffness.clone(), magnetic]);
    set.hbar = profile.hbar;
    (set, profile.theta_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_sinusoid() {
        assert_eq!(TimeProfile::<f64>::constant(3.0).eval(7.0).unwrap(), 3.0);
        let s = TimeProfile::<f64>::sinusoid(1.0, 2.0, 0.0, 0.0);
        assert!((s.eval(std::f64::consts::FRAC_PI_4).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tabulated_cube() {
        let p = TimeProfile::<f64>::tabulated(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 8.0), (3.0, 27.0)])
            .unwrap();
        assert!((p.eval(1.5).unwrap() - 3.375).abs() < 1e-12);
        assert_eq!(p.eval(2.0).unwrap(), 8.0);
        assert!(matches!(p.eval(3.5), Err(Error::Domain(_))));
        assert!(p.eval(-0.1).is_err());
    }

    #[test]
    fn tabulated_rejects_unsorted() {
        assert!(TimeProfile::<f64>::tabulated(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(TimeProfile::<f64>::tabulated(vec![(1.0, 0.0), (0.5, 1.0)]).is_err());
    }

    #[test]
    fn spline_derivative_matches_difference() {
        let knots: Vec<(f64, f64)> = (0..=20).map(|i| {
            let t = i as f64 * 0.25;
            (t, t.sin())
        }).collect();
        let p = TimeProfile::<f64>::tabulated(knots).unwrap();
        let h = 1e-6;
        let fd = (p.eval(2.1 + h).unwrap() - p.eval(2.1 - h).unwrap()) / (2.0 * h);
        assert!((p.derivative(2.1).unwrap() - fd).abs() < 1e-6);
        assert!((p.derivative(2.1).unwrap() - 2.1f64.cos()).abs() < 1e-2);
    }

    #[test]
    fn shifting_is_consistent() {
        let set = CoefficientSet1D::<f64>::kanai_caldirola(1.3, 1.0, 0.25, 0.7, 0.4, 1.1);
        let sh = set.shifted(0.8);
        for t in [0.0, 0.3, 1.7] {
            let x = set.eval(t + 0.8).unwrap();
            let y = sh.eval(t).unwrap();
            assert!((x.a - y.a).abs() < 1e-14 && (x.c - y.c).abs() < 1e-12);
            assert!((x.e - y.e).abs() < 1e-12);
        }
    }

    #[test]
    fn product_derivative() {
        let p = TimeProfile::<f64>::product(vec![
            TimeProfile::<f64>::exponential(2.0, 0.5),
            TimeProfile::<f64>::sinusoid(1.0, 3.0, 0.2, 0.1),
        ]);
        let h = 1e-6;
        let fd = (p.eval(0.7 + h).unwrap() - p.eval(0.7 - h).unwrap()) / (2.0 * h);
        assert!((p.derivative(0.7).unwrap() - fd).abs() < 1e-7);
    }

    #[test]
    fn reduce_no_field() {
        let mut f = FieldProfile2D::<f64>::new(2.0);
        f.stiffness = TimeProfile::<f64>::constant(0.7);
        let (set, rate) = reduce_2d(&f);
        assert_eq!(set.c.eval(1.0).unwrap(), 0.7);
        assert_eq!(rate.eval(1.0).unwrap(), 0.0);
        assert_eq!(set.a.eval(0.0).unwrap(), 0.5);
    }

    #[test]
    fn reduce_constant_b() {
        let mut f = FieldProfile2D::<f64>::new(2.0);
        f.b_field = TimeProfile::<f64>::constant(3.0);
        f.charge = 1.5;
        let (set, rate) = reduce_2d(&f);
        let wc = 1.5 * 3.0 / 2.0;
        assert!((set.c.eval(0.4).unwrap() - 1.5f64.powi(2) * 9.0 / 8.0).abs() < 1e-14);
        assert!((rate.eval(0.4).unwrap() - wc / 2.0).abs() < 1e-14);
        assert_eq!(set.b.eval(0.4).unwrap(), 0.0);
    }

    #[test]
    fn reduce_sinusoidal_b_uses_b0_squared() {
        let f = FieldProfile2D::<f64>::sinusoidal_b(1.5, 2.0, 0.7, 1.2);
        let (set, _) = reduce_2d(&f);
        let t = 0.9;
        let expect = 1.2f64.powi(2) * 4.0 * (0.7 * t as f64).sin().powi(2) / (4.0 * 1.5);
        assert!((set.c.eval(t).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let js = r#"{"a":{"kind":"constant","value":1.0},
                     "c":{"kind":"tabulated","knots":[[0,1],[1,2],[2,2.5]]}}"#;
        let set: CoefficientSet1D = serde_json::from_str(js).unwrap();
        assert_eq!(set.hbar, 1.0);
        let back = serde_json::to_string(&set).unwrap();
        let again: CoefficientSet1D = serde_json::from_str(&back).unwrap();
        assert_eq!(set, again);
        let bad = r#"{"a":{"kind":"constant","value":1.0,"extra":2}}"#;
        assert!(serde_json::from_str::<CoefficientSet1D>(bad).is_err());
        let bad2 = r#"{"a":{"kind":"constant","value":1.0},"zz":1}"#;
        assert!(serde_json::from_str::<CoefficientSet1D>(bad2).is_err());
    }
}
