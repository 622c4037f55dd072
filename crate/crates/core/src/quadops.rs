//! Exact algebra of operators at most quadratic in the canonical variables.
//!
//! An observable is stored as `s·1 + Σ lᵢ zᵢ + ½ Σᵢⱼ Qᵢⱼ sym(zᵢ zⱼ)` with
//! `sym(zᵢ zⱼ) = (zᵢ zⱼ + zⱼ zᵢ)/2` and `z = (x, p)` or `(x, y, p_x, p_y)`.
//! `Q` is the symmetric Hessian, so `x̂p̂ + p̂x̂` has `Q_xp = Q_px = 2` and
//! `x̂²` has `Q_xx = 2`.
//!
//! For such operators `[A, B] = iħ·C` holds exactly, with `C` the Poisson
//! bracket of the classical symbols.

use num_rational::Rational64;
use num_traits::{Num, Zero};
use std::fmt::{self, Debug};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Coefficient field of an observable. Exact for `Rational64`, approximate for floats.
pub trait Coeff: Num + Neg<Output = Self> + Clone + PartialEq + Debug {}

impl<T: Num + Neg<Output = T> + Clone + PartialEq + Debug> Coeff for T {}

#[derive(Clone, PartialEq)]
pub struct QuadraticObservable<T = Rational64> {
    dof: usize,
    /// Row-major `2dof × 2dof`, always symmetric.
    quad: Vec<T>,
    lin: Vec<T>,
    scal: T,
}

impl<T: Coeff> QuadraticObservable<T> {
    pub fn zero(dof: usize) -> Self {
        assert!(dof == 1 || dof == 2, "dof must be 1 or 2");
        let n = 2 * dof;
        Self {
            dof,
            quad: vec![T::zero(); n * n],
            lin: vec![T::zero(); n],
            scal: T::zero(),
        }
    }

    pub fn identity(dof: usize) -> Self {
        let mut o = Self::zero(dof);
        o.scal = T::one();
        o
    }

    /// The canonical variable `z_i`.
    pub fn coordinate(dof: usize, i: usize) -> Self {
        let mut o = Self::zero(dof);
        o.lin[i] = T::one();
        o
    }

    /// The symmetrized product `sym(z_i z_j)`.
    pub fn sym(dof: usize, i: usize, j: usize) -> Self {
        let mut o = Self::zero(dof);
        let n = o.dim();
        if i == j {
            o.quad[i * n + i] = T::one() + T::one();
        } else {
            o.quad[i * n + j] = T::one();
            o.quad[j * n + i] = T::one();
        }
        o
    }

    /// Builds an observable from parts; `quad` is symmetrized by averaging.
    pub fn from_parts(dof: usize, quad: Vec<T>, lin: Vec<T>, scal: T) -> Result<Self> {
        let n = 2 * dof;
        if !(dof == 1 || dof == 2) || quad.len() != n * n || lin.len() != n {
            return Err(Error::Domain(format!(
                "observable parts do not match dof {dof}"
            )));
        }
        let two = T::one() + T::one();
        let mut q = quad.clone();
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] = (quad[i * n + j].clone() + quad[j * n + i].clone()) / two.clone();
            }
        }
        Ok(Self { dof, quad: q, lin, scal })
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn dim(&self) -> usize {
        2 * self.dof
    }

    pub fn quad(&self, i: usize, j: usize) -> &T {
        &self.quad[i * self.dim() + j]
    }

    pub fn quad_matrix(&self) -> &[T] {
        &self.quad
    }

    pub fn lin(&self) -> &[T] {
        &self.lin
    }

    pub fn scal(&self) -> &T {
        &self.scal
    }

    pub fn is_zero(&self) -> bool {
        self.scal.is_zero()
            && self.lin.iter().all(Zero::is_zero)
            && self.quad.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, k: &T) -> Self {
        Self {
            dof: self.dof,
            quad: self.quad.iter().map(|q| q.clone() * k.clone()).collect(),
            lin: self.lin.iter().map(|l| l.clone() * k.clone()).collect(),
            scal: self.scal.clone() * k.clone(),
        }
    }

    /// Independent coefficients: scalar, linear, then the upper triangle of `Q`.
    pub fn to_vector(&self) -> Vec<T> {
        let n = self.dim();
        let mut v = Vec::with_capacity(1 + n + n * (n + 1) / 2);
        v.push(self.scal.clone());
        v.extend(self.lin.iter().cloned());
        for i in 0..n {
            for j in i..n {
                v.push(self.quad[i * n + j].clone());
            }
        }
        v
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.dof, other.dof, "dof mismatch");
        Self {
            dof: self.dof,
            quad: self
                .quad
                .iter()
                .zip(&other.quad)
                .map(|(a, b)| f(a.clone(), b.clone()))
                .collect(),
            lin: self
                .lin
                .iter()
                .zip(&other.lin)
                .map(|(a, b)| f(a.clone(), b.clone()))
                .collect(),
            scal: f(self.scal.clone(), other.scal.clone()),
        }
    }
}

impl<T: Coeff> Add for &QuadraticObservable<T> {
    type Output = QuadraticObservable<T>;
    fn add(self, rhs: Self) -> Self::Output {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<T: Coeff> Sub for &QuadraticObservable<T> {
    type Output = QuadraticObservable<T>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<T: Coeff> Add for QuadraticObservable<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl<T: Coeff> Sub for QuadraticObservable<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

impl<T: Coeff> Neg for QuadraticObservable<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(&-T::one())
    }
}

impl<T: Coeff> Mul<T> for QuadraticObservable<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        self.scale(&k)
    }
}

impl<T: Coeff> fmt::Debug for QuadraticObservable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadraticObservable")
            .field("dof", &self.dof)
            .field("scal", &self.scal)
            .field("lin", &self.lin)
            .field("quad", &self.quad)
            .finish()
    }
}

/// `J` entry for the ordering (positions, momenta).
fn j_entry<T: Coeff>(n: usize, i: usize, j: usize) -> T {
    let h = n / 2;
    if i < h && j == i + h {
        T::one()
    } else if i >= h && j + h == i {
        -T::one()
    } else {
        T::zero()
    }
}

/// `C` such that `[A, B] = iħ·C`.
pub fn commutator<T: Coeff>(
    a: &QuadraticObservable<T>,
    b: &QuadraticObservable<T>,
) -> Result<QuadraticObservable<T>> {
    if a.dof != b.dof {
        return Err(Error::Domain(format!(
            "commutator of observables with dof {} and {}",
            a.dof, b.dof
        )));
    }
    let n = a.dim();
    let h = a.dof;
    // J·v moves momenta up and negated positions down.
    let jv = |v: &[T]| -> Vec<T> {
        (0..n)
            .map(|i| {
                if i < h {
                    v[i + h].clone()
                } else {
                    -v[i - h].clone()
                }
            })
            .collect()
    };
    let matvec = |m: &[T], v: &[T]| -> Vec<T> {
        (0..n)
            .map(|i| {
                (0..n).fold(T::zero(), |acc, k| acc + m[i * n + k].clone() * v[k].clone())
            })
            .collect()
    };
    let mut out = QuadraticObservable::zero(a.dof);

    let jlb = jv(&b.lin);
    out.scal = (0..n).fold(T::zero(), |acc, i| acc + a.lin[i].clone() * jlb[i].clone());

    let jla = jv(&a.lin);
    let qa_jlb = matvec(&a.quad, &jlb);
    let qb_jla = matvec(&b.quad, &jla);
    out.lin = qa_jlb
        .into_iter()
        .zip(qb_jla)
        .map(|(x, y)| x - y)
        .collect();

    // Q_A J Q_B − Q_B J Q_A
    let prod = |x: &[T], y: &[T]| -> Vec<T> {
        let mut r = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let mut xj = T::zero();
                for l in 0..n {
                    let jl: T = j_entry(n, l, k);
                    if !jl.is_zero() {
                        xj = xj + x[i * n + l].clone() * jl;
                    }
                }
                if xj.is_zero() {
                    continue;
                }
                for j in 0..n {
                    r[i * n + j] = r[i * n + j].clone() + xj.clone() * y[k * n + j].clone();
                }
            }
        }
        r
    };
    let ab = prod(&a.quad, &b.quad);
    let ba = prod(&b.quad, &a.quad);
    out.quad = ab.into_iter().zip(ba).map(|(x, y)| x - y).collect();
    Ok(out)
}

/// The three dynamical algebras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algebra {
    /// Linear potential: {1, x, p, p²}.
    LP,
    /// General quadratic 1D Hamiltonian: {1, x, p, x², p², xp+px}.
    GHO,
    /// 2D charged particle, 15 generators.
    CP,
}

impl Algebra {
    pub fn size(self) -> usize {
        match self {
            Algebra::LP => 4,
            Algebra::GHO => 6,
            Algebra::CP => 15,
        }
    }

    pub fn dof(self) -> usize {
        match self {
            Algebra::CP => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algebra::LP => "LP",
            Algebra::GHO => "GHO",
            Algebra::CP => "CP",
        }
    }

    pub fn all() -> [Algebra; 3] {
        [Algebra::LP, Algebra::GHO, Algebra::CP]
    }
}

/// Generator `λ_index` (1-based, paper numbering).
pub fn generator<T: Coeff>(algebra: Algebra, index: usize) -> Result<QuadraticObservable<T>> {
    if index == 0 || index > algebra.size() {
        return Err(Error::Domain(format!(
            "generator index {index} out of range: algebra {} has {} generators",
            algebra.name(),
            algebra.size()
        )));
    }
    type Q<T> = QuadraticObservable<T>;
    let two = T::one() + T::one();
    let g = match algebra {
        Algebra::LP => match index {
            1 => Q::identity(1),
            2 => Q::coordinate(1, 0),
            3 => Q::coordinate(1, 1),
            _ => Q::sym(1, 1, 1),
        },
        Algebra::GHO => match index {
            1 => Q::identity(1),
            2 => Q::coordinate(1, 0),
            3 => Q::coordinate(1, 1),
            4 => Q::sym(1, 0, 0),
            5 => Q::sym(1, 1, 1),
            _ => Q::sym(1, 0, 1).scale(&two),
        },
        Algebra::CP => {
            let (x, y, px, py) = (0, 1, 2, 3);
            match index {
                1 => Q::identity(2),
                2 => Q::coordinate(2, x),
                3 => Q::coordinate(2, px),
                4 => Q::sym(2, x, x),
                5 => Q::sym(2, px, px),
                6 => Q::sym(2, x, px).scale(&two),
                7 => Q::coordinate(2, y),
                8 => Q::coordinate(2, py),
                9 => Q::sym(2, y, y),
                10 => Q::sym(2, py, py),
                11 => Q::sym(2, y, py).scale(&two),
                12 => Q::sym(2, x, py) - Q::sym(2, y, px),
                13 => Q::sym(2, x, py) + Q::sym(2, y, px),
                14 => Q::sym(2, x, y),
                _ => Q::sym(2, px, py),
            }
        }
    };
    Ok(g)
}

pub fn generators<T: Coeff>(algebra: Algebra) -> Vec<QuadraticObservable<T>> {
    (1..=algebra.size())
        .map(|i| generator(algebra, i).expect("index in range"))
        .collect()
}

/// Solves `Σ_k c_k basis_k = target` exactly; `None` if the target is outside the span.
pub fn solve_in_span<T: Coeff>(basis: &[Vec<T>], target: &[T]) -> Option<Vec<T>> {
    let rows = target.len();
    let cols = basis.len();
    // Augmented matrix [B | target], rows = coefficient slots.
    let mut m: Vec<Vec<T>> = (0..rows)
        .map(|r| {
            let mut row: Vec<T> = basis.iter().map(|b| b[r].clone()).collect();
            row.push(target[r].clone());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let piv = m[r][c].clone();
        for k in c..=cols {
            m[r][k] = m[r][k].clone() / piv.clone();
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for k in c..=cols {
                    m[i][k] = m[i][k].clone() - f.clone() * m[r][k].clone();
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    if m[r..].iter().any(|row| !row[cols].is_zero()) {
        return None;
    }
    let mut x = vec![T::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = m[i][cols].clone();
    }
    Some(x)
}

/// Sparse table of `c_ijk` with `[λ_i, λ_j] = iħ Σ_k c_ijk λ_k` (1-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTable<T = Rational64> {
    pub algebra: Algebra,
    pub n: usize,
    /// Nonzero entries with `i < j`, sorted by `(i, j, k)`.
    pub entries: Vec<(usize, usize, usize, T)>,
    /// Number of generator pairs whose commutator was resolved.
    pub pairs_checked: usize,
}

impl<T: Coeff> StructureTable<T> {
    /// `c_ijk` for any ordering of `i, j`, zero when absent.
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        let (a, b, sign) = if i <= j { (i, j, T::one()) } else { (j, i, -T::one()) };
        self.entries
            .iter()
            .find(|e| e.0 == a && e.1 == b && e.2 == k)
            .map(|e| e.3.clone() * sign)
            .unwrap_or_else(T::zero)
    }
}

pub fn structure_constants(algebra: Algebra) -> Result<StructureTable<Rational64>> {
    structure_constants_in::<Rational64>(algebra)
}

/// Structure constants over any coefficient field.
pub fn structure_constants_in<T: Coeff>(algebra: Algebra) -> Result<StructureTable<T>> {
    let gens: Vec<QuadraticObservable<T>> = generators(algebra);
    let basis: Vec<Vec<T>> = gens.iter().map(|g| g.to_vector()).collect();
    let n = gens.len();
    let mut entries = Vec::new();
    let mut pairs = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let c = commutator(&gens[i], &gens[j])?;
            let coeffs = solve_in_span(&basis, &c.to_vector()).ok_or_else(|| {
                Error::Internal(format!(
                    "[λ{}, λ{}] is not in the span of the {} algebra",
                    i + 1,
                    j + 1,
                    algebra.name()
                ))
            })?;
            pairs += 1;
            for (k, ck) in coeffs.into_iter().enumerate() {
                if !ck.is_zero() {
                    entries.push((i + 1, j + 1, k + 1, ck));
                }
            }
        }
    }
    Ok(StructureTable {
        algebra,
        n,
        entries,
        pairs_checked: pairs,
    })
}

/// The constants listed in the appendix tables, as `(i, j, k, num, den)`.
pub fn reference_constants(algebra: Algebra) -> &'static [(usize, usize, usize, i64, i64)] {
    match algebra {
        Algebra::LP => &[(2, 3, 1, 1, 1), (2, 4, 3, 2, 1)],
        Algebra::GHO => &[
            (2, 3, 1, 1, 1),
            (2, 5, 3, 2, 1),
            (2, 6, 2, 2, 1),
            (3, 4, 2, -2, 1),
            (3, 6, 3, -2, 1),
            (4, 5, 6, 2, 1),
            (4, 6, 4, 4, 1),
            (5, 6, 5, -4, 1),
        ],
        Algebra::CP => CP_REFERENCE,
    }
}

const CP_REFERENCE: &[(usize, usize, usize, i64, i64)] = &[
    (2, 3, 1, 1, 1),
    (2, 5, 3, 2, 1),
    (2, 6, 2, 2, 1),
    (3, 4, 2, -2, 1),
    (3, 6, 3, -2, 1),
    (4, 5, 6, 2, 1),
    (4, 6, 4, 4, 1),
    (5, 6, 5, -4, 1),
    (7, 8, 1, 1, 1),
    (7, 10, 8, 2, 1),
    (7, 11, 7, 2, 1),
    (8, 9, 7, -2, 1),
    (8, 11, 8, -2, 1),
    (9, 10, 11, 2, 1),
    (9, 11, 9, 4, 1),
    (10, 11, 10, -4, 1),
    (2, 12, 7, -1, 1),
    (2, 13, 7, 1, 1),
    (2, 15, 8, 1, 1),
    (3, 12, 8, -1, 1),
    (3, 13, 8, -1, 1),
    (3, 14, 7, -1, 1),
    (4, 12, 14, -2, 1),
    (4, 13, 14, 2, 1),
    (4, 15, 12, 1, 1),
    (4, 15, 13, 1, 1),
    (5, 12, 15, -2, 1),
    (5, 13, 15, -2, 1),
    (5, 14, 12, 1, 1),
    (5, 14, 13, -1, 1),
    (6, 12, 13, -2, 1),
    (6, 13, 12, -2, 1),
    (6, 14, 14, -2, 1),
    (6, 15, 15, 2, 1),
    (7, 12, 2, 1, 1),
    (7, 13, 2, 1, 1),
    (7, 15, 3, 1, 1),
    (8, 12, 3, 1, 1),
    (8, 13, 3, -1, 1),
    (8, 14, 2, -1, 1),
    (9, 12, 14, 2, 1),
    (9, 13, 14, 2, 1),
    (9, 15, 12, -1, 1),
    (9, 15, 13, 1, 1),
    (10, 12, 15, 2, 1),
    (10, 13, 15, -2, 1),
    (10, 14, 12, -1, 1),
    (10, 14, 13, -1, 1),
    (11, 12, 13, 2, 1),
    (11, 13, 12, 2, 1),
    (11, 14, 14, -2, 1),
    (11, 15, 15, 2, 1),
    (12, 13, 6, -1, 1),
    (12, 13, 11, 1, 1),
    (12, 14, 4, -1, 1),
    (12, 14, 9, 1, 1),
    (12, 15, 5, -1, 1),
    (12, 15, 10, 1, 1),
    (13, 14, 4, -1, 1),
    (13, 14, 9, -1, 1),
    (13, 15, 5, 1, 1),
    (13, 15, 10, 1, 1),
    (14, 15, 6, 1, 2),
    (14, 15, 11, 1, 2),
];

/// Outcome of comparing computed constants with the reference list.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceComparison {
    pub algebra: Algebra,
    pub pairs_checked: usize,
    pub listed: usize,
    /// `(i, j, k, computed, listed)` for every disagreeing triple.
    pub mismatches: Vec<(usize, usize, usize, Rational64, Rational64)>,
}

impl ReferenceComparison {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Checks every triple: listed ones must match exactly, unlisted ones must vanish.
pub fn compare_with_reference(algebra: Algebra) -> Result<ReferenceComparison> {
    let table = structure_constants(algebra)?;
    let reference = reference_constants(algebra);
    let listed = |i: usize, j: usize, k: usize| -> Rational64 {
        reference
            .iter()
            .find(|r| r.0 == i && r.1 == j && r.2 == k)
            .map(|r| Rational64::new(r.3, r.4))
            .unwrap_or_else(Rational64::zero)
    };
    let n = algebra.size();
    let mut mismatches = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            for k in 1..=n {
                let c = table.get(i, j, k);
                let r = listed(i, j, k);
                if c != r {
                    mismatches.push((i, j, k, c, r));
                }
            }
        }
    }
    Ok(ReferenceComparison {
        algebra,
        pairs_checked: table.pairs_checked,
        listed: reference.len(),
        mismatches,
    })
}
