//! Homogeneous forms in `x0..x3` over an exact coefficient ring.
//!
//! Everything geometric in this crate reduces to a handful of kernel
//! operations implemented here: Jacobian determinants, substitution of
//! map components into forms, restriction to a plane, divisibility by a
//! linear form, extraction of rational linear factors (degree <= 4) and
//! the rank of a quadratic form.
//!
//! Invariants:
//! - every stored exponent vector sums to the form's degree,
//! - no zero coefficients are stored.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::arith::{rat, rat_gcd, CoeffPoly, Rat};

/// Coefficient ring interface shared by [`Rat`] and [`CoeffPoly`].
pub trait Coeff: Clone + PartialEq + std::fmt::Debug {
    fn czero() -> Self;
    fn cone() -> Self;
    fn is_czero(&self) -> bool;
    fn cadd(&self, o: &Self) -> Self;
    fn csub(&self, o: &Self) -> Self;
    fn cmul(&self, o: &Self) -> Self;
    fn cneg(&self) -> Self;
    fn from_rat(r: &Rat) -> Self;
    /// Exact division in the ring, `None` if not divisible.
    fn cdiv(&self, o: &Self) -> Option<Self>;
}

impl Coeff for Rat {
    fn czero() -> Self {
        num_traits::Zero::zero()
    }
    fn cone() -> Self {
        num_traits::One::one()
    }
    fn is_czero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn cadd(&self, o: &Self) -> Self {
        self + o
    }
    fn csub(&self, o: &Self) -> Self {
        self - o
    }
    fn cmul(&self, o: &Self) -> Self {
        self * o
    }
    fn cneg(&self) -> Self {
        -self.clone()
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn cdiv(&self, o: &Self) -> Option<Self> {
        if num_traits::Zero::is_zero(o) {
            None
        } else {
            Some(self / o)
        }
    }
}

impl Coeff for CoeffPoly {
    fn czero() -> Self {
        CoeffPoly::zero()
    }
    fn cone() -> Self {
        CoeffPoly::one()
    }
    fn is_czero(&self) -> bool {
        CoeffPoly::is_zero(self)
    }
    fn cadd(&self, o: &Self) -> Self {
        CoeffPoly::add(self, o)
    }
    fn csub(&self, o: &Self) -> Self {
        CoeffPoly::sub(self, o)
    }
    fn cmul(&self, o: &Self) -> Self {
        CoeffPoly::mul(self, o)
    }
    fn cneg(&self) -> Self {
        CoeffPoly::neg(self)
    }
    fn from_rat(r: &Rat) -> Self {
        CoeffPoly::from_rat(r)
    }
    fn cdiv(&self, o: &Self) -> Option<Self> {
        CoeffPoly::exact_div(self, o)
    }
}

/// Exponent vector for one monomial in `x0..x3`.
pub type XExp = [u8; 4];

fn xexp_deg(e: &XExp) -> u32 {
    e.iter().map(|&k| k as u32).sum()
}

fn xexp_mul(a: &XExp, b: &XExp) -> XExp {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn xexp_try_div(a: &XExp, b: &XExp) -> Option<XExp> {
    let mut out = [0u8; 4];
    for i in 0..4 {
        if a[i] < b[i] {
            return None;
        }
        out[i] = a[i] - b[i];
    }
    Some(out)
}

/// Sparse homogeneous form in `x0..x3`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HForm<C> {
    degree: u32,
    terms: BTreeMap<XExp, C>,
}

impl<C: Coeff> HForm<C> {
    pub fn zero(degree: u32) -> Self {
        HForm {
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&XExp, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, e: &XExp) -> C {
        self.terms.get(e).cloned().unwrap_or_else(C::czero)
    }

    pub fn from_terms(degree: u32, it: impl IntoIterator<Item = (XExp, C)>) -> Self {
        let mut f = Self::zero(degree);
        for (e, c) in it {
            f.insert_add(e, c);
        }
        f
    }

    pub fn monomial(e: XExp, c: C) -> Self {
        Self::from_terms(xexp_deg(&e), [(e, c)])
    }

    /// The coordinate form `x_i`.
    pub fn var(i: usize) -> Self {
        let mut e = [0u8; 4];
        e[i] = 1;
        Self::monomial(e, C::cone())
    }

    /// Linear form `a0 x0 + a1 x1 + a2 x2 + a3 x3`.
    pub fn linear(a: &[C; 4]) -> Self {
        let mut f = Self::zero(1);
        for (i, c) in a.iter().enumerate() {
            let mut e = [0u8; 4];
            e[i] = 1;
            f.insert_add(e, c.clone());
        }
        f
    }

    /// Coefficient 4-vector of a linear form.
    pub fn linear_coeffs(&self) -> [C; 4] {
        assert_eq!(self.degree, 1);
        let mut out = [C::czero(), C::czero(), C::czero(), C::czero()];
        for (e, c) in &self.terms {
            let i = e.iter().position(|&k| k == 1).unwrap();
            out[i] = c.clone();
        }
        out
    }

    fn insert_add(&mut self, e: XExp, c: C) {
        debug_assert_eq!(xexp_deg(&e), self.degree, "inhomogeneous term");
        if c.is_czero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().cadd(&c);
                if s.is_czero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.degree, o.degree);
        let mut f = self.clone();
        for (e, c) in &o.terms {
            f.insert_add(*e, c.clone());
        }
        f
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!(self.degree, o.degree);
        let mut f = self.clone();
        for (e, c) in &o.terms {
            f.insert_add(*e, c.cneg());
        }
        f
    }

    pub fn neg(&self) -> Self {
        HForm {
            degree: self.degree,
            terms: self.terms.iter().map(|(e, c)| (*e, c.cneg())).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut f = Self::zero(self.degree + o.degree);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                f.insert_add(xexp_mul(ea, eb), ca.cmul(cb));
            }
        }
        f
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_czero() {
            return Self::zero(self.degree);
        }
        HForm {
            degree: self.degree,
            terms: self.terms.iter().map(|(e, k)| (*e, k.cmul(c))).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::monomial([0, 0, 0, 0], C::cone());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Partial derivative with respect to `x_j`.
    pub fn partial(&self, j: usize) -> Self {
        let mut f = Self::zero(self.degree.saturating_sub(1));
        for (e, c) in &self.terms {
            if e[j] == 0 {
                continue;
            }
            let mut e2 = *e;
            e2[j] -= 1;
            f.insert_add(e2, c.cmul(&C::from_rat(&rat(e[j] as i64))));
        }
        f
    }

    /// Exact substitution `f(phi_0, .., phi_3)` of equal-degree map
    /// components into the form.
    pub fn compose(&self, phi: &[Self; 4]) -> Self {
        let d = phi[0].degree;
        assert!(phi.iter().all(|p| p.degree == d));
        let maxe = self
            .terms
            .keys()
            .map(|e| e.iter().copied().max().unwrap_or(0))
            .max()
            .unwrap_or(0);
        // cache phi_i^0..maxe
        let mut pows: Vec<Vec<Self>> = Vec::with_capacity(4);
        for p in phi {
            let mut v = vec![Self::monomial([0, 0, 0, 0], C::cone())];
            for k in 1..=maxe {
                v.push(v[(k - 1) as usize].mul(p));
            }
            pows.push(v);
        }
        let mut out = Self::zero(self.degree * d);
        for (e, c) in &self.terms {
            let mut term = Self::monomial([0, 0, 0, 0], c.clone());
            for i in 0..4 {
                if e[i] > 0 {
                    term = term.mul(&pows[i][e[i] as usize]);
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Applies a linear substitution `x -> rows . x`, where `rows[j]` is
    /// the linear form replacing `x_j`.
    pub fn substitute_linear(&self, rows: &[Self; 4]) -> Self {
        self.compose(rows)
    }

    /// Fraction-free restriction to the plane `h = 0`: solves `h` for
    /// its pivot variable (largest index with nonzero coefficient) and
    /// substitutes, scaling the remaining variables by the pivot
    /// coefficient. The result equals `h_p^deg * (f restricted)` and
    /// never mentions the pivot variable.
    pub fn restrict_scaled(&self, h: &[C; 4]) -> (Self, usize) {
        let p = (0..4)
            .rev()
            .find(|&i| !h[i].is_czero())
            .expect("restrict: zero plane");
        let hp = &h[p];
        // x_p -> -(sum_{i != p} h_i x_i), x_j -> h_p x_j
        let mut minus = Self::zero(1);
        for i in 0..4 {
            if i == p {
                continue;
            }
            let mut e = [0u8; 4];
            e[i] = 1;
            minus.insert_add(e, h[i].cneg());
        }
        let mut out = Self::zero(self.degree);
        for (e, c) in &self.terms {
            let others: u32 = (0..4).filter(|&i| i != p).map(|i| e[i] as u32).sum();
            let mut scale = C::cone();
            for _ in 0..others {
                scale = scale.cmul(hp);
            }
            let mut term = Self::monomial([0, 0, 0, 0], c.cmul(&scale));
            for i in 0..4 {
                if i == p || e[i] == 0 {
                    continue;
                }
                let mut xe = [0u8; 4];
                xe[i] = e[i];
                term = term.mul(&Self::monomial(xe, C::cone()));
            }
            if e[p] > 0 {
                term = term.mul(&minus.pow(e[p] as u32));
            }
            out = out.add(&term);
        }
        (out, p)
    }

    /// `Some(q)` with `h * q = f` exactly, when the linear form `h`
    /// divides `f`; `None` otherwise.
    pub fn divides_linear(&self, h: &[C; 4]) -> Option<Self> {
        let (r, _) = self.restrict_scaled(h);
        if !r.is_zero() {
            return None;
        }
        self.exact_div(&Self::linear(h))
    }

    /// Exact division of homogeneous forms; `None` when not divisible
    /// (including coefficient-level divisibility failures).
    pub fn exact_div(&self, d: &Self) -> Option<Self> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero(self.degree.saturating_sub(d.degree)));
        }
        if self.degree < d.degree {
            return None;
        }
        let (de, dc) = d.terms.iter().next_back().unwrap();
        let mut rem = self.clone();
        let mut quot = Self::zero(self.degree - d.degree);
        while let Some((re, rc)) = rem.terms.iter().next_back() {
            let qe = xexp_try_div(re, de)?;
            let qc = rc.cdiv(dc)?;
            let qterm = Self::monomial(qe, qc.clone());
            quot.insert_add(qe, qc);
            rem = rem.sub(&qterm.mul(d));
        }
        Some(quot)
    }

    /// True iff the tuples define the same projective map wherever both
    /// are defined: all six minors `a_i b_j - a_j b_i` vanish.
    pub fn cross_minors_zero(a: &[Self; 4], b: &[Self; 4]) -> bool {
        Self::first_nonzero_minor(a, b).is_none()
    }

    /// First `(i, j)` with `a_i b_j - a_j b_i != 0`, as evidence.
    pub fn first_nonzero_minor(a: &[Self; 4], b: &[Self; 4]) -> Option<(usize, usize, Self)> {
        for i in 0..4 {
            for j in (i + 1)..4 {
                let m = a[i].mul(&b[j]).sub(&a[j].mul(&b[i]));
                if !m.is_zero() {
                    return Some((i, j, m));
                }
            }
        }
        None
    }

    /// Lifts into another coefficient ring.
    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> HForm<D> {
        HForm {
            degree: self.degree,
            terms: self.terms.iter().map(|(e, c)| (*e, f(c))).collect(),
        }
    }
}

/// Determinant of a square matrix of forms, by Laplace expansion.
pub fn det_forms<C: Coeff>(m: &[Vec<HForm<C>>]) -> HForm<C> {
    let n = m.len();
    let deg: u32 = (0..n).map(|i| m[i][i].degree()).sum();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = HForm::zero(deg);
    for (j, entry) in m[0].iter().enumerate() {
        if entry.is_zero() {
            continue;
        }
        let minor: Vec<Vec<HForm<C>>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, f)| f.clone())
                    .collect()
            })
            .collect();
        let sub = det_forms(&minor);
        let term = entry.mul(&sub);
        acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

/// Jacobian determinant of four equal-degree components: the exact
/// determinant of the partial-derivative matrix, degree `4(d-1)`.
/// The zero form is a legal output and signals non-dominance.
pub fn jacobian_det<C: Coeff>(phi: &[HForm<C>; 4]) -> HForm<C> {
    let m: Vec<Vec<HForm<C>>> = (0..4)
        .map(|i| (0..4).map(|j| phi[i].partial(j)).collect())
        .collect();
    det_forms(&m)
}

// ---------------------------------------------------------------------
// Rational-coefficient specifics
// ---------------------------------------------------------------------

impl HForm<Rat> {
    /// Restriction to the plane `h = 0` with the pivot division carried
    /// out (exact over the rationals).
    pub fn restrict_to_plane(&self, h: &[Rat; 4]) -> (Self, usize) {
        let (scaled, p) = self.restrict_scaled(h);
        let mut inv = Rat::one();
        for _ in 0..self.degree {
            inv *= &h[p];
        }
        (scaled.scale(&inv.recip()), p)
    }

    /// Evaluates at an integer point.
    pub fn eval_point(&self, pt: &Point) -> Rat {
        let mut acc = Rat::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for i in 0..4 {
                for _ in 0..e[i] {
                    term *= Rat::from_integer(pt.0[i].clone());
                }
            }
            acc += term;
        }
        acc
    }

    /// Positive rational content together with the sign of the leading
    /// coefficient, and the primitive integer part.
    pub fn as_primitive(&self) -> (Rat, Self) {
        if self.is_zero() {
            return (Rat::one(), self.clone());
        }
        let mut g = Rat::zero();
        for c in self.terms.values() {
            g = rat_gcd(&g, c);
        }
        if self.terms.iter().next_back().unwrap().1.is_negative() {
            g = -g;
        }
        let inv = g.recip();
        (g.clone(), self.scale(&inv))
    }

    /// Symmetric Gram matrix of a quadratic form, `q(x) = x^T M x`.
    pub fn gram(&self) -> [[Rat; 4]; 4] {
        assert_eq!(self.degree, 2);
        let mut m: [[Rat; 4]; 4] = Default::default();
        for (e, c) in &self.terms {
            let vars: Vec<usize> = (0..4).filter(|&i| e[i] > 0).collect();
            match vars.len() {
                1 => m[vars[0]][vars[0]] = c.clone(),
                2 => {
                    let h = c / rat(2);
                    m[vars[0]][vars[1]] = h.clone();
                    m[vars[1]][vars[0]] = h;
                }
                _ => unreachable!(),
            }
        }
        m
    }

    /// Rank of the Gram matrix over the rationals (equals the rank over
    /// the complexes). Variables absent from the form contribute zero
    /// rows, so ternary conics on a plane can be passed directly.
    pub fn quad_rank(&self) -> usize {
        let g = self.gram();
        let rows: Vec<Vec<Rat>> = g.iter().map(|r| r.to_vec()).collect();
        mat_rank(rows)
    }

    /// Gradient evaluated at a point.
    pub fn gradient_at(&self, pt: &Point) -> [Rat; 4] {
        let mut out: [Rat; 4] = Default::default();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.partial(i).eval_point(pt);
        }
        out
    }

    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut s = String::new();
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let mut mono = String::new();
            for (i, &k) in e.iter().enumerate() {
                if k == 1 {
                    mono.push_str(&format!("x{i}"));
                } else if k > 1 {
                    mono.push_str(&format!("x{i}^{k}"));
                }
                if k > 0 {
                    mono.push(' ');
                }
            }
            let mono = mono.trim_end().replace(' ', "*");
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    s.push('-');
                }
                first = false;
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            if mono.is_empty() {
                s.push_str(&mag.to_string());
            } else if mag.is_one() {
                s.push_str(&mono);
            } else {
                s.push_str(&format!("{mag}*{mono}"));
            }
        }
        s
    }
}

impl fmt::Display for HForm<Rat> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

// ---------------------------------------------------------------------
// Exact linear algebra over the rationals
// ---------------------------------------------------------------------

/// Row-reduces in place, returning the rank.
pub fn mat_rank(mut rows: Vec<Vec<Rat>>) -> usize {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0;
    for col in 0..ncols {
        if let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) {
            rows.swap(rank, p);
            let inv = rows[rank][col].clone().recip();
            for c in col..ncols {
                rows[rank][c] = &rows[rank][c] * &inv;
            }
            for r in 0..rows.len() {
                if r != rank && !rows[r][col].is_zero() {
                    let f = rows[r][col].clone();
                    for c in col..ncols {
                        let v = &rows[rank][c] * &f;
                        rows[r][c] = &rows[r][c] - &v;
                    }
                }
            }
            rank += 1;
        }
    }
    rank
}

/// Basis of the right kernel of the matrix.
pub fn mat_kernel(rows: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut rank = 0;
    for col in 0..ncols {
        if let Some(p) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) {
            m.swap(rank, p);
            let inv = m[rank][col].clone().recip();
            for c in 0..ncols {
                m[rank][c] = &m[rank][c] * &inv;
            }
            for r in 0..m.len() {
                if r != rank && !m[r][col].is_zero() {
                    let f = m[r][col].clone();
                    for c in 0..ncols {
                        let v = &m[rank][c] * &f;
                        m[r][c] = &m[r][c] - &v;
                    }
                }
            }
            pivots.push((rank, col));
            rank += 1;
        }
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivot_cols.contains(c)) {
        let mut v = vec![Rat::zero(); ncols];
        v[free] = Rat::one();
        for &(r, c) in &pivots {
            v[c] = -m[r][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Solves `M x = b`; `None` when inconsistent. Free variables are set
/// to zero.
pub fn mat_solve(rows: &[Vec<Rat>], b: &[Rat]) -> Option<Vec<Rat>> {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut m: Vec<Vec<Rat>> = rows
        .iter()
        .zip(b)
        .map(|(r, bi)| {
            let mut row = r.clone();
            row.push(bi.clone());
            row
        })
        .collect();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut rank = 0;
    for col in 0..ncols {
        if let Some(p) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) {
            m.swap(rank, p);
            let inv = m[rank][col].clone().recip();
            for c in 0..=ncols {
                m[rank][c] = &m[rank][c] * &inv;
            }
            for r in 0..m.len() {
                if r != rank && !m[r][col].is_zero() {
                    let f = m[r][col].clone();
                    for c in 0..=ncols {
                        let v = &m[rank][c] * &f;
                        m[r][c] = &m[r][c] - &v;
                    }
                }
            }
            pivots.push((rank, col));
            rank += 1;
        }
    }
    // consistency
    for r in m.iter().skip(rank) {
        if !r[ncols].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rat::zero(); ncols];
    for &(r, c) in &pivots {
        x[c] = m[r][ncols].clone();
    }
    Some(x)
}

// ---------------------------------------------------------------------
// Points and linear maps
// ---------------------------------------------------------------------

/// Projective point stored as a primitive integer 4-vector: content 1,
/// first nonzero entry positive.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Point(pub [BigInt; 4]);

impl Point {
    pub fn from_rats(v: &[Rat; 4]) -> Self {
        let mut lcm = BigInt::one();
        for r in v.iter() {
            lcm = lcm.lcm(r.denom());
        }
        let mut ints: [BigInt; 4] = Default::default();
        for (i, r) in v.iter().enumerate() {
            ints[i] = r.numer() * (&lcm / r.denom());
        }
        Self::from_ints(ints)
    }

    pub fn from_ints(mut v: [BigInt; 4]) -> Self {
        let mut g = BigInt::zero();
        for x in v.iter() {
            g = g.gcd(x);
        }
        if !g.is_zero() {
            if let Some(first) = v.iter().find(|x| !x.is_zero()) {
                if first.is_negative() {
                    g = -g;
                }
            }
            for x in v.iter_mut() {
                *x = &*x / &g;
            }
        }
        Point(v)
    }

    pub fn from_i64(v: [i64; 4]) -> Self {
        Self::from_ints([
            BigInt::from(v[0]),
            BigInt::from(v[1]),
            BigInt::from(v[2]),
            BigInt::from(v[3]),
        ])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }

    pub fn to_rats(&self) -> [Rat; 4] {
        let mut out: [Rat; 4] = Default::default();
        for (i, x) in self.0.iter().enumerate() {
            out[i] = Rat::from_integer(x.clone());
        }
        out
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}, {}, {}]",
            self.0[0], self.0[1], self.0[2], self.0[3]
        )
    }
}

/// Invertible (when used as a coordinate change) linear map `x -> M x`.
#[derive(Clone, PartialEq, Debug)]
pub struct LinMap(pub [[Rat; 4]; 4]);

impl LinMap {
    pub fn identity() -> Self {
        let mut m: [[Rat; 4]; 4] = Default::default();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Rat::one();
        }
        LinMap(m)
    }

    pub fn from_i64(m: [[i64; 4]; 4]) -> Self {
        let mut out: [[Rat; 4]; 4] = Default::default();
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = rat(m[i][j]);
            }
        }
        LinMap(out)
    }

    pub fn det(&self) -> Rat {
        // Laplace along the first row; 4x4 only.
        fn det_n(m: &[Vec<Rat>]) -> Rat {
            let n = m.len();
            if n == 1 {
                return m[0][0].clone();
            }
            let mut acc = Rat::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Rat>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, v)| v.clone())
                            .collect()
                    })
                    .collect();
                let s = det_n(&minor) * &m[0][j];
                if j % 2 == 0 {
                    acc += s;
                } else {
                    acc -= s;
                }
            }
            acc
        }
        let rows: Vec<Vec<Rat>> = self.0.iter().map(|r| r.to_vec()).collect();
        det_n(&rows)
    }

    pub fn inverse(&self) -> Option<Self> {
        let mut out: [[Rat; 4]; 4] = Default::default();
        for col in 0..4 {
            let rows: Vec<Vec<Rat>> = self.0.iter().map(|r| r.to_vec()).collect();
            let mut b = vec![Rat::zero(); 4];
            b[col] = Rat::one();
            let x = mat_solve(&rows, &b)?;
            // verify (mat_solve zero-fills free vars on singular input)
            for r in 0..4 {
                let mut acc = Rat::zero();
                for c in 0..4 {
                    acc += &self.0[r][c] * &x[c];
                }
                if acc != b[r] {
                    return None;
                }
            }
            for r in 0..4 {
                out[r][col] = x[r].clone();
            }
        }
        Some(LinMap(out))
    }

    pub fn apply_point(&self, p: &Point) -> Point {
        let pr = p.to_rats();
        let mut out: [Rat; 4] = Default::default();
        for i in 0..4 {
            for j in 0..4 {
                out[i] += &self.0[i][j] * &pr[j];
            }
        }
        Point::from_rats(&out)
    }

    /// The four linear forms `(Mx)_i`.
    pub fn rows_as_forms(&self) -> [HForm<Rat>; 4] {
        [
            HForm::linear(&self.0[0]),
            HForm::linear(&self.0[1]),
            HForm::linear(&self.0[2]),
            HForm::linear(&self.0[3]),
        ]
    }

    pub fn compose(&self, o: &Self) -> Self {
        let mut m: [[Rat; 4]; 4] = Default::default();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    m[i][j] += &self.0[i][k] * &o.0[k][j];
                }
            }
        }
        LinMap(m)
    }
}

// ---------------------------------------------------------------------
// Rational linear-factor extraction
// ---------------------------------------------------------------------

/// Result of [`extract_linear_factors`]:
/// `unit * prod factor_i^mult_i * residual = input`, exactly.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub unit: Rat,
    pub factors: Vec<(HForm<Rat>, u32)>,
    pub residual: HForm<Rat>,
}

impl Factorization {
    /// Reassembles the product (used by tests).
    pub fn reassemble(&self) -> HForm<Rat> {
        let mut acc = self.residual.scale(&self.unit);
        for (f, m) in &self.factors {
            acc = acc.mul(&f.pow(*m));
        }
        acc
    }

    /// Factors with multiplicity at least `m`.
    pub fn factors_with_mult_ge(&self, m: u32) -> Vec<&HForm<Rat>> {
        self.factors
            .iter()
            .filter(|(_, k)| *k >= m)
            .map(|(f, _)| f)
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FactorError {
    #[error("linear-factor extraction is only supported up to degree 4 (got {0})")]
    DegreeTooHigh(u32),
    #[error("cannot factor the zero form")]
    ZeroForm,
}

/// A probe line given by two integer points.
type ProbeLine = ([i64; 4], [i64; 4]);

const DEFAULT_PROBES: [ProbeLine; 3] = [
    ([1, 0, 0, 0], [0, 1, 0, 0]),
    ([0, 0, 1, 0], [0, 0, 0, 1]),
    ([1, 0, 0, 1], [0, 1, 1, 0]),
];

fn probe_round(round: u64) -> [ProbeLine; 3] {
    if round == 0 {
        return DEFAULT_PROBES;
    }
    // deterministic fallback lines, small coordinates, pairwise skew
    let mut state = 0x9E3779B97F4A7C15u64.wrapping_mul(round + 1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state % 11) as i64 - 5
    };
    loop {
        let mut pts = [[0i64; 4]; 6];
        for p in pts.iter_mut() {
            for c in p.iter_mut() {
                *c = next();
            }
        }
        let lines = [(pts[0], pts[1]), (pts[2], pts[3]), (pts[4], pts[5])];
        // two lines are skew iff their four spanning points span all of P^3
        let skew = |a: &ProbeLine, b: &ProbeLine| {
            let m = LinMap::from_i64([a.0, a.1, b.0, b.1]);
            !m.det().is_zero()
        };
        let line_ok = |l: &ProbeLine| {
            let rows = vec![l.0.map(rat).to_vec(), l.1.map(rat).to_vec()];
            mat_rank(rows) == 2
        };
        if line_ok(&lines[0])
            && line_ok(&lines[1])
            && line_ok(&lines[2])
            && skew(&lines[0], &lines[1])
            && skew(&lines[0], &lines[2])
            && skew(&lines[1], &lines[2])
        {
            return lines;
        }
    }
}

/// Restriction of `f` to the line `a*P + b*Q` as a dense binary form:
/// coefficient of `a^k b^(d-k)` at index `k`.
fn restrict_to_line(f: &HForm<Rat>, line: &ProbeLine) -> Vec<Rat> {
    let d = f.degree() as usize;
    let mut coeffs = vec![Rat::zero(); d + 1];
    // substitute x_i = a p_i + b q_i and expand
    for (e, c) in f.terms() {
        // product over variables of (a p_i + b q_i)^{e_i}
        let mut poly = vec![Rat::zero(); d + 1];
        poly[0] = c.clone();
        let mut cur_deg = 0usize;
        for i in 0..4 {
            for _ in 0..e[i] {
                let mut nxt = vec![Rat::zero(); d + 1];
                for (k, v) in poly.iter().enumerate().take(cur_deg + 1) {
                    if v.is_zero() {
                        continue;
                    }
                    // * (a p_i)
                    nxt[k + 1] += v * rat(line.0[i]);
                    // * (b q_i)
                    nxt[k] += v * rat(line.1[i]);
                }
                poly = nxt;
                cur_deg += 1;
            }
        }
        for (k, v) in poly.into_iter().enumerate() {
            coeffs[k] += v;
        }
    }
    coeffs
}

/// All positive divisors of `n` (must be nonzero), by trial division.
fn divisors(n: &BigInt) -> Vec<BigInt> {
    let mut n = n.abs();
    let mut primes: Vec<(BigInt, u32)> = Vec::new();
    let mut d = BigInt::from(2);
    let limit = BigInt::from(1_000_000u64);
    while &d * &d <= n && d <= limit {
        let mut k = 0;
        while (&n % &d).is_zero() {
            n = &n / &d;
            k += 1;
        }
        if k > 0 {
            primes.push((d.clone(), k));
        }
        d += 1;
    }
    if !n.is_one() {
        primes.push((n, 1));
    }
    let mut divs = vec![BigInt::one()];
    for (p, k) in primes {
        let mut next = Vec::new();
        for dv in &divs {
            let mut acc = dv.clone();
            for _ in 0..=k {
                next.push(acc.clone());
                acc = &acc * &p;
            }
        }
        divs = next;
    }
    divs.sort();
    divs.dedup();
    divs
}

/// Rational roots `[a : b]` of a dense binary form (index = power of `a`),
/// as primitive integer pairs.
fn binary_form_roots(coeffs: &[Rat]) -> Vec<(BigInt, BigInt)> {
    let d = coeffs.len() - 1;
    // clear to primitive integers
    let mut lcm = BigInt::one();
    for c in coeffs {
        lcm = lcm.lcm(c.denom());
    }
    let ints: Vec<BigInt> = coeffs.iter().map(|c| c.numer() * (&lcm / c.denom())).collect();
    let mut roots: Vec<(BigInt, BigInt)> = Vec::new();
    // root at [1 : 0] iff the a^d coefficient vanishes
    if ints[d].is_zero() {
        roots.push((BigInt::one(), BigInt::zero()));
    }
    // strip powers of a: roots [0 : 1]
    let low = ints.iter().position(|c| !num_traits::Zero::is_zero(c));
    let low = match low {
        None => return roots, // identically zero: handled by caller
        Some(k) => k,
    };
    if low > 0 {
        roots.push((BigInt::zero(), BigInt::one()));
    }
    let poly: Vec<BigInt> = ints[low..].to_vec(); // poly in z = a/b
    let deg = poly.len() - 1;
    if deg == 0 {
        return roots;
    }
    let trail = &poly[0];
    let lead = &poly[deg];
    for num in divisors(trail) {
        for den in divisors(lead) {
            for sign in [1i64, -1] {
                let a = &num * BigInt::from(sign);
                let b = den.clone();
                if a.gcd(&b) != BigInt::one() && !(a.is_zero()) {
                    continue;
                }
                // evaluate sum poly[k] a^k b^{deg-k}
                let mut acc = BigInt::zero();
                for (k, c) in poly.iter().enumerate() {
                    let mut term = c.clone();
                    for _ in 0..k {
                        term *= &a;
                    }
                    for _ in 0..(deg - k) {
                        term *= &b;
                    }
                    acc += term;
                }
                if num_traits::Zero::is_zero(&acc) {
                    let pair = (a, b);
                    if !roots.contains(&pair) {
                        roots.push(pair);
                    }
                }
            }
        }
    }
    roots
}

/// Extracts all rational linear factors of a nonzero form of degree <= 4
/// with exact multiplicities. The residual has no rational linear
/// factor. Probing uses fixed pairwise-skew lines with a deterministic
/// seeded fallback when a candidate plane contains a probe line.
pub fn extract_linear_factors(f: &HForm<Rat>) -> Result<Factorization, FactorError> {
    if f.is_zero() {
        return Err(FactorError::ZeroForm);
    }
    if f.degree() > 4 {
        return Err(FactorError::DegreeTooHigh(f.degree()));
    }

    let mut factors: Vec<(HForm<Rat>, u32)> = Vec::new();
    let mut rem = f.clone();

    // collect candidate planes over a few probe rounds; re-probe when a
    // restriction vanishes identically (a factor plane contains the line)
    'outer: for round in 0..8u64 {
        if rem.degree() == 0 {
            break;
        }
        let lines = probe_round(round);
        let mut root_sets: Vec<Vec<(BigInt, BigInt)>> = Vec::new();
        for line in &lines {
            let coeffs = restrict_to_line(&rem, line);
            if coeffs.iter().all(|c| c.is_czero()) {
                continue 'outer; // probe line inside the zero set: fresh probes
            }
            root_sets.push(binary_form_roots(&coeffs));
        }
        let mut candidates: Vec<[Rat; 4]> = Vec::new();
        for r1 in &root_sets[0] {
            for r2 in &root_sets[1] {
                for r3 in &root_sets[2] {
                    let pts = [
                        point_on_line(&lines[0], r1),
                        point_on_line(&lines[1], r2),
                        point_on_line(&lines[2], r3),
                    ];
                    let rows: Vec<Vec<Rat>> = pts.iter().map(|p| p.to_vec()).collect();
                    let ker = mat_kernel(&rows);
                    if ker.len() != 1 {
                        continue; // collinear intersection points; other rounds recover
                    }
                    let h: [Rat; 4] = [
                        ker[0][0].clone(),
                        ker[0][1].clone(),
                        ker[0][2].clone(),
                        ker[0][3].clone(),
                    ];
                    candidates.push(h);
                }
            }
        }
        for h in candidates {
            let hform = HForm::linear(&h);
            let (_, hprim) = hform.as_primitive();
            if factors.iter().any(|(g, _)| *g == hprim) {
                continue;
            }
            let hc = hprim.linear_coeffs();
            let mut mult = 0u32;
            while let Some(q) = rem.divides_linear(&hc) {
                rem = q;
                mult += 1;
            }
            if mult > 0 {
                factors.push((hprim, mult));
            }
        }
        if round >= 2 && rem.degree() <= 1 {
            break;
        }
        if round >= 2 {
            // two independent probe rounds beyond the defaults are enough
            break;
        }
    }

    // a leftover linear remainder is itself a factor
    if rem.degree() == 1 && !rem.is_zero() {
        let (_, hprim) = rem.as_primitive();
        let hc = hprim.linear_coeffs();
        let q = rem.divides_linear(&hc).expect("linear self-division");
        rem = q;
        factors.push((hprim, 1));
    }
    // merge duplicate factors picked up across rounds
    factors.sort_by(|a, b| a.0.terms.iter().next().cmp(&b.0.terms.iter().next()));
    let mut merged: Vec<(HForm<Rat>, u32)> = Vec::new();
    for (g, m) in factors {
        if let Some(last) = merged.iter_mut().find(|(h, _)| *h == g) {
            last.1 += m;
        } else {
            merged.push((g, m));
        }
    }

    let (unit, residual) = rem.as_primitive();
    Ok(Factorization {
        unit,
        factors: merged,
        residual,
    })
}

fn point_on_line(line: &ProbeLine, r: &(BigInt, BigInt)) -> [Rat; 4] {
    let mut out: [Rat; 4] = Default::default();
    for i in 0..4 {
        out[i] = Rat::from_integer(&r.0 * BigInt::from(line.0[i]))
            + Rat::from_integer(&r.1 * BigInt::from(line.1[i]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::ratq;

    fn f(terms: &[(i64, XExp)]) -> HForm<Rat> {
        HForm::from_terms(
            xexp_deg(&terms[0].1),
            terms.iter().map(|&(c, e)| (e, rat(c))),
        )
    }

    fn gen_o() -> [HForm<Rat>; 4] {
        [
            f(&[(1, [1, 0, 0, 1])]),
            f(&[(1, [0, 1, 0, 1])]),
            f(&[(1, [0, 0, 1, 1])]),
            f(&[(1, [2, 0, 0, 0]), (-1, [0, 1, 1, 0])]),
        ]
    }

    #[test]
    fn jacobian_of_gen_o() {
        // -2 x3^2 (x0^2 - x1 x2)
        let j = jacobian_det(&gen_o());
        let expect = f(&[(1, [0, 0, 0, 2])]).mul(&f(&[(1, [2, 0, 0, 0]), (-1, [0, 1, 1, 0])]));
        assert_eq!(j, expect.scale(&rat(-2)));
    }

    #[test]
    fn jacobian_of_tang_parallel() {
        // [x0x3, x1x3 - x2^2, x2x3, x3^2] -> 2 x3^4
        let phi = [
            f(&[(1, [1, 0, 0, 1])]),
            f(&[(1, [0, 1, 0, 1]), (-1, [0, 0, 2, 0])]),
            f(&[(1, [0, 0, 1, 1])]),
            f(&[(1, [0, 0, 0, 2])]),
        ];
        assert_eq!(jacobian_det(&phi), f(&[(2, [0, 0, 0, 4])]));
    }

    #[test]
    fn jacobian_of_identity() {
        let id = [
            HForm::var(0),
            HForm::var(1),
            HForm::var(2),
            HForm::var(3),
        ];
        assert_eq!(jacobian_det(&id), HForm::monomial([0, 0, 0, 0], rat(1)));
    }

    #[test]
    fn restriction_examples() {
        let x3 = [rat(0), rat(0), rat(0), rat(1)];
        let q = f(&[(1, [2, 0, 0, 0]), (-1, [0, 1, 1, 0])]);
        let (r, piv) = q.restrict_to_plane(&x3);
        assert_eq!(piv, 3);
        assert_eq!(r, q);
        let (r2, _) = f(&[(1, [1, 0, 0, 1])]).restrict_to_plane(&x3);
        assert!(r2.is_zero());
        // x0x2 + x3^2 on x2 + x3 = 0 -> x0x2 + x2^2
        let h = [rat(0), rat(0), rat(1), rat(1)];
        let g = f(&[(1, [1, 0, 1, 0]), (1, [0, 0, 0, 2])]);
        let (r3, piv3) = g.restrict_to_plane(&h);
        assert_eq!(piv3, 3);
        assert_eq!(r3, f(&[(1, [1, 0, 1, 0]), (1, [0, 0, 2, 0])]));
    }

    #[test]
    fn divides_linear_examples() {
        let x3 = [rat(0), rat(0), rat(0), rat(1)];
        let g = f(&[(1, [1, 0, 0, 1]), (1, [0, 0, 0, 2])]); // x3(x0 + x3)
        assert_eq!(
            g.divides_linear(&x3).unwrap(),
            f(&[(1, [1, 0, 0, 0]), (1, [0, 0, 0, 1])])
        );
        let q = f(&[(1, [2, 0, 0, 0]), (-1, [0, 1, 1, 0])]);
        assert!(q.divides_linear(&x3).is_none());
        // (x0 + 2x1)^2 x2 / (x0 + 2x1)
        let l = f(&[(1, [1, 0, 0, 0]), (2, [0, 1, 0, 0])]);
        let p = l.mul(&l).mul(&HForm::var(2));
        let h = [rat(1), rat(2), rat(0), rat(0)];
        assert_eq!(p.divides_linear(&h).unwrap(), l.mul(&HForm::var(2)));
    }

    #[test]
    fn factor_tang_o_jacobian() {
        // 2 x3^3 (x2 + x3) -> [(x3,3), (x2+x3,1)], unit 2
        let x3 = HForm::var(3);
        let l = f(&[(1, [0, 0, 1, 0]), (1, [0, 0, 0, 1])]);
        let input = x3.pow(3).mul(&l).scale(&rat(2));
        let fz = extract_linear_factors(&input).unwrap();
        assert_eq!(fz.unit, rat(2));
        assert_eq!(fz.residual, HForm::monomial([0, 0, 0, 0], rat(1)));
        let mut mults: Vec<(String, u32)> =
            fz.factors.iter().map(|(g, m)| (g.render(), *m)).collect();
        mults.sort();
        assert_eq!(mults, vec![("x2 + x3".to_string(), 1), ("x3".to_string(), 3)]);
        assert_eq!(fz.reassemble(), input);
    }

    #[test]
    fn factor_gen_x_jacobian() {
        // -2 x3^2 x1 x2
        let input = f(&[(-2, [0, 1, 1, 2])]);
        let fz = extract_linear_factors(&input).unwrap();
        assert_eq!(fz.unit, rat(-2));
        let mut got: Vec<(String, u32)> =
            fz.factors.iter().map(|(g, m)| (g.render(), *m)).collect();
        got.sort();
        assert_eq!(
            got,
            vec![
                ("x1".to_string(), 1),
                ("x2".to_string(), 1),
                ("x3".to_string(), 2)
            ]
        );
    }

    #[test]
    fn factor_derived_product() {
        // (x0+x1)^2 (x1 - 2x3) x2
        let a = f(&[(1, [1, 0, 0, 0]), (1, [0, 1, 0, 0])]);
        let b = f(&[(1, [0, 1, 0, 0]), (-2, [0, 0, 0, 1])]);
        let input = a.pow(2).mul(&b).mul(&HForm::var(2));
        let fz = extract_linear_factors(&input).unwrap();
        assert_eq!(fz.unit, rat(1));
        assert_eq!(fz.residual, HForm::monomial([0, 0, 0, 0], rat(1)));
        let mut got: Vec<(String, u32)> =
            fz.factors.iter().map(|(g, m)| (g.render(), *m)).collect();
        got.sort();
        assert_eq!(
            got,
            vec![
                ("x0 + x1".to_string(), 2),
                ("x1 - 2*x3".to_string(), 1),
                ("x2".to_string(), 1)
            ]
        );
        assert_eq!(fz.reassemble(), input);
    }

    #[test]
    fn factor_irreducible_residual() {
        // x3^2 (x0^2 - x1 x2): conic residual survives
        let q = f(&[(1, [2, 0, 0, 0]), (-1, [0, 1, 1, 0])]);
        let input = HForm::var(3).pow(2).mul(&q);
        let fz = extract_linear_factors(&input).unwrap();
        assert_eq!(fz.factors.len(), 1);
        assert_eq!(fz.factors[0].1, 2);
        assert_eq!(fz.residual, q);
    }

    #[test]
    fn quad_rank_examples() {
        assert_eq!(f(&[(1, [2, 0, 0, 0]), (-1, [0, 1, 1, 0])]).quad_rank(), 3);
        assert_eq!(f(&[(1, [0, 1, 1, 0])]).quad_rank(), 2);
        assert_eq!(f(&[(1, [0, 0, 2, 0])]).quad_rank(), 1);
    }

    #[test]
    fn compose_examples() {
        let phi = gen_o();
        let x3 = HForm::var(3);
        assert_eq!(x3.compose(&phi), phi[3]);
        let id = [
            HForm::var(0),
            HForm::var(1),
            HForm::var(2),
            HForm::var(3),
        ];
        let any = f(&[(3, [1, 0, 0, 1]), (1, [0, 2, 0, 0])]);
        assert_eq!(any.compose(&id), any);
        // (x0 + x3) o [x0x3, x1x3, x2x3, x2^2] = x0x3 + x2^2
        let psi = [
            f(&[(1, [1, 0, 0, 1])]),
            f(&[(1, [0, 1, 0, 1])]),
            f(&[(1, [0, 0, 1, 1])]),
            f(&[(1, [0, 0, 2, 0])]),
        ];
        let l = f(&[(1, [1, 0, 0, 0]), (1, [0, 0, 0, 1])]);
        assert_eq!(l.compose(&psi), f(&[(1, [1, 0, 0, 1]), (1, [0, 0, 2, 0])]));
    }

    #[test]
    fn cross_minors() {
        let id = [
            HForm::var(0),
            HForm::var(1),
            HForm::var(2),
            HForm::var(3),
        ];
        let doubled = [
            HForm::var(0).scale(&rat(2)),
            HForm::var(1).scale(&rat(2)),
            HForm::var(2).scale(&rat(2)),
            HForm::var(3).scale(&rat(2)),
        ];
        assert!(HForm::cross_minors_zero(&id, &doubled));
        let swapped = [
            HForm::var(1),
            HForm::var(0),
            HForm::var(2),
            HForm::var(3),
        ];
        assert!(!HForm::cross_minors_zero(&id, &swapped));
    }

    #[test]
    fn linmap_inverse_and_det() {
        let m = LinMap::from_i64([[1, 2, 0, 0], [0, 1, 0, 0], [3, 0, 1, 5], [0, 0, 0, 1]]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.compose(&inv), LinMap::identity());
        assert_eq!(m.det(), rat(1));
        let sing = LinMap::from_i64([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]);
        assert!(sing.inverse().is_none());
    }

    #[test]
    fn point_normalization() {
        let p = Point::from_rats(&[ratq(-2, 3), rat(0), ratq(4, 3), rat(0)]);
        assert_eq!(p, Point::from_i64([-1, 0, 2, 0]));
        // first nonzero entry positive
        assert_eq!(Point::from_i64([-2, 0, 4, 0]), Point::from_i64([1, 0, -2, 0]));
    }
}
