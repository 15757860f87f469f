//! Exact scalar arithmetic: big rationals and the coefficient ring
//! `Q[t, s][u_1, .., u_k, v_1, .., v_k]`.
//!
//! Each generator pair `(u_i, v_i)` stands for the exponentials
//! `e^{r_i t}` and `e^{r_i s}` of one rate `r_i`. The generators are
//! manipulated as plain polynomial variables; the only extra law is the
//! substitution rule `t -> t+s`, which rewrites `u_i -> u_i * v_i`
//! (see [`CoeffPoly::substitute_time_shift`]).
//!
//! Invariants:
//! - no zero coefficient is ever stored,
//! - exponents are nonnegative (negative exponentials are cleared at
//!   construction time by [`Laurent`]),
//! - exponent vectors are stored trailing-zero trimmed, so equal
//!   monomials compare equal regardless of how many generators a value
//!   has seen.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Exact rational scalar. Zero is `0/1`, the denominator is positive and
/// the fraction is reduced (all enforced by `num-rational`).
pub type Rat = num_rational::BigRational;

/// Shorthand for a small integer rational.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Shorthand for `n/d`.
pub fn ratq(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// `sqrt` of a rational if it is a perfect square (nonnegative).
pub fn rat_sqrt(r: &Rat) -> Option<Rat> {
    if r.is_negative() {
        return None;
    }
    let ns = r.numer().sqrt();
    let ds = r.denom().sqrt();
    if &ns * &ns == *r.numer() && &ds * &ds == *r.denom() {
        Some(Rat::new(ns, ds))
    } else {
        None
    }
}

/// gcd of two nonnegative rationals: `gcd(a/b, c/d) = gcd(a,c)/lcm(b,d)`.
pub fn rat_gcd(a: &Rat, b: &Rat) -> Rat {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    Rat::new(a.numer().gcd(b.numer()), a.denom().lcm(b.denom()))
}

/// Declares one exponential generator: a display label and the rate it
/// carries. The `t`-slot and `s`-slot copies share one `GenDef`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenDef {
    pub label: String,
    pub rate: Rat,
}

/// Symbol universe of a coefficient ring: the list of exponential
/// generators. `t` and `s` are always present implicitly.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Universe {
    pub gens: Vec<GenDef>,
}

impl Universe {
    pub fn new(gens: Vec<GenDef>) -> Self {
        Universe { gens }
    }

    /// Symbol names in slot order: `t, s, u_0, v_0, u_1, v_1, ..`.
    pub fn symbol_names(&self) -> Vec<String> {
        let mut out = vec!["t".to_string(), "s".to_string()];
        for g in &self.gens {
            out.push(format!("exp({}*t)", g.label));
            out.push(format!("exp({}*s)", g.label));
        }
        out
    }
}

// Slot layout inside exponent vectors.
const SLOT_T: usize = 0;
const SLOT_S: usize = 1;
const fn slot_u(i: usize) -> usize {
    2 + 2 * i
}
const fn slot_v(i: usize) -> usize {
    3 + 2 * i
}

/// Monomial exponent vector over `(t, s, u_0, v_0, ..)`, trailing zeros
/// trimmed. Ordered graded-lexicographically so that the `BTreeMap` in
/// [`CoeffPoly`] iterates in canonical order.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Expo(Vec<u16>);

impl Expo {
    pub fn new(mut v: Vec<u16>) -> Self {
        while v.last() == Some(&0) {
            v.pop();
        }
        Expo(v)
    }

    pub fn unit() -> Self {
        Expo(Vec::new())
    }

    pub fn get(&self, slot: usize) -> u16 {
        self.0.get(slot).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn slots(&self) -> &[u16] {
        &self.0
    }

    fn mul(&self, o: &Expo) -> Expo {
        let n = self.0.len().max(o.0.len());
        let mut v = vec![0u16; n];
        for (i, e) in v.iter_mut().enumerate() {
            *e = self.get(i) + o.get(i);
        }
        Expo::new(v)
    }

    /// Componentwise difference, `None` if any slot would go negative.
    fn try_div(&self, o: &Expo) -> Option<Expo> {
        let n = self.0.len().max(o.0.len());
        let mut v = vec![0u16; n];
        for (i, e) in v.iter_mut().enumerate() {
            let (a, b) = (self.get(i), o.get(i));
            if a < b {
                return None;
            }
            *e = a - b;
        }
        Some(Expo::new(v))
    }
}

impl Ord for Expo {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.total().cmp(&other.total()).then_with(|| {
            let n = self.0.len().max(other.0.len());
            for i in 0..n {
                match self.get(i).cmp(&other.get(i)) {
                    std::cmp::Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            std::cmp::Ordering::Equal
        })
    }
}

impl PartialOrd for Expo {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ArithError {
    #[error("time shift: polynomial already mentions the second time symbol")]
    AlreadyMentionsS,
    #[error("evaluation: missing assignment for slot {0}")]
    MissingAssignment(usize),
}

/// Sparse exact polynomial in `t, s` and the exponential generators.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct CoeffPoly {
    terms: BTreeMap<Expo, Rat>,
}

impl CoeffPoly {
    pub fn zero() -> Self {
        CoeffPoly {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::from_rat(&Rat::one())
    }

    pub fn from_rat(r: &Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(Expo::unit(), r.clone());
        }
        CoeffPoly { terms }
    }

    pub fn monomial(e: Expo, c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(e, c);
        }
        CoeffPoly { terms }
    }

    pub fn var_t() -> Self {
        Self::monomial(Expo::new(vec![1]), Rat::one())
    }

    pub fn var_s() -> Self {
        Self::monomial(Expo::new(vec![0, 1]), Rat::one())
    }

    /// `t^k`.
    pub fn t_pow(k: u16) -> Self {
        Self::monomial(Expo::new(vec![k]), Rat::one())
    }

    /// t-slot generator `u_i^k`.
    pub fn gen_t_pow(i: usize, k: u16) -> Self {
        let mut v = vec![0u16; slot_u(i) + 1];
        v[slot_u(i)] = k;
        Self::monomial(Expo::new(v), Rat::one())
    }

    /// s-slot generator `v_i^k`.
    pub fn gen_s_pow(i: usize, k: u16) -> Self {
        let mut v = vec![0u16; slot_v(i) + 1];
        v[slot_v(i)] = k;
        Self::monomial(Expo::new(v), Rat::one())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Expo, &Rat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(c)` when the polynomial is the constant `c` (including 0).
    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => {
                let (e, c) = self.terms.iter().next().unwrap();
                if e.total() == 0 {
                    Some(c.clone())
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    fn insert_add(terms: &mut BTreeMap<Expo, Rat>, e: Expo, c: Rat) {
        if c.is_zero() {
            return;
        }
        match terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (e, c) in &o.terms {
            Self::insert_add(&mut terms, e.clone(), c.clone());
        }
        CoeffPoly { terms }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (e, c) in &o.terms {
            Self::insert_add(&mut terms, e.clone(), -c.clone());
        }
        CoeffPoly { terms }
    }

    pub fn neg(&self) -> Self {
        CoeffPoly {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut terms = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                Self::insert_add(&mut terms, ea.mul(eb), ca * cb);
            }
        }
        CoeffPoly { terms }
    }

    pub fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        CoeffPoly {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * r)).collect(),
        }
    }

    pub fn pow(&self, k: u16) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// True if any monomial involves `s` or an s-slot generator.
    pub fn mentions_s(&self) -> bool {
        self.terms.keys().any(|e| {
            e.get(SLOT_S) > 0 || e.slots().iter().enumerate().any(|(i, &x)| i >= 3 && i % 2 == 1 && x > 0)
        })
    }

    /// Rewrites a value expressed at time `t+s` into the `(t,s)` universe:
    /// `t -> t+s` (binomially) and `u_i -> u_i * v_i`.
    pub fn substitute_time_shift(&self) -> Result<Self, ArithError> {
        if self.mentions_s() {
            return Err(ArithError::AlreadyMentionsS);
        }
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            let a = e.get(SLOT_T) as u32;
            // binomial expansion of (t+s)^a
            let mut binom = BigInt::one();
            for k in 0..=a {
                if k > 0 {
                    binom = &binom * BigInt::from(a - k + 1) / BigInt::from(k);
                }
                let mut v = e.slots().to_vec();
                while v.len() < 2 {
                    v.push(0);
                }
                v[SLOT_T] = k as u16;
                v[SLOT_S] = (a - k) as u16;
                // duplicate every t-slot generator exponent into the s slot
                let width = v.len();
                let gens = if width > 2 { (width - 2).div_ceil(2) } else { 0 };
                for i in 0..gens {
                    let eu = if slot_u(i) < width { v[slot_u(i)] } else { 0 };
                    if eu > 0 {
                        while v.len() <= slot_v(i) {
                            v.push(0);
                        }
                        v[slot_v(i)] = eu;
                    }
                }
                Self::insert_add(
                    &mut terms,
                    Expo::new(v),
                    c * Rat::from_integer(binom.clone()),
                );
            }
        }
        Ok(CoeffPoly { terms })
    }

    /// Swaps the two time slots: `t <-> s`, `u_i <-> v_i`. Used to build
    /// the `phi_s` copy of a flow from its `phi_t` components.
    pub fn swap_t_s(&self) -> Self {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            let width = e.slots().len().max(2);
            let gens = if width > 2 { (width - 2).div_ceil(2) } else { 0 };
            let mut v = vec![0u16; 2 + 2 * gens];
            v[SLOT_T] = e.get(SLOT_S);
            v[SLOT_S] = e.get(SLOT_T);
            for i in 0..gens {
                v[slot_u(i)] = e.get(slot_v(i));
                v[slot_v(i)] = e.get(slot_u(i));
            }
            Self::insert_add(&mut terms, Expo::new(v), c.clone());
        }
        CoeffPoly { terms }
    }

    /// `t -> -t`, generators inverted. Returns a Laurent intermediate;
    /// the caller clears negative exponents across a whole tuple.
    pub fn negate_time(&self) -> Laurent {
        let mut terms: BTreeMap<Vec<i64>, Rat> = BTreeMap::new();
        for (e, c) in &self.terms {
            let width = e.slots().len().max(2);
            let mut v: Vec<i64> = (0..width).map(|i| e.get(i) as i64).collect();
            let sign = if v[SLOT_T] % 2 == 1 { -Rat::one() } else { Rat::one() };
            for (i, x) in v.iter_mut().enumerate() {
                if i >= 2 && i % 2 == 0 {
                    *x = -*x;
                }
            }
            let cc = c * &sign;
            *terms.entry(v).or_insert_with(Rat::zero) += cc;
        }
        terms.retain(|_, c| !c.is_zero());
        Laurent { terms }
    }

    /// Substitutes rational values: `t`, `s`, then the generator values
    /// in slot order (`u_i` from `gt`, `v_i` from `gs`).
    pub fn eval_rat(&self, t: &Rat, s: &Rat, gt: &[Rat], gs: &[Rat]) -> Rat {
        let mut acc = Rat::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            term *= pow_rat(t, e.get(SLOT_T));
            term *= pow_rat(s, e.get(SLOT_S));
            for (i, g) in gt.iter().enumerate() {
                term *= pow_rat(g, e.get(slot_u(i)));
            }
            for (i, g) in gs.iter().enumerate() {
                term *= pow_rat(g, e.get(slot_v(i)));
            }
            acc += term;
        }
        acc
    }

    /// Float evaluation; same slot conventions as [`Self::eval_rat`].
    pub fn eval_f64(&self, t: f64, s: f64, gt: &[f64], gs: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut term = c.to_f64().unwrap_or(f64::NAN);
            term *= t.powi(e.get(SLOT_T) as i32);
            term *= s.powi(e.get(SLOT_S) as i32);
            for (i, g) in gt.iter().enumerate() {
                term *= g.powi(e.get(slot_u(i)) as i32);
            }
            for (i, g) in gs.iter().enumerate() {
                term *= g.powi(e.get(slot_v(i)) as i32);
            }
            acc += term;
        }
        acc
    }

    /// Complex evaluation for non-real scalar assignments.
    pub fn eval_c64(
        &self,
        t: num_complex::Complex64,
        s: num_complex::Complex64,
        gt: &[num_complex::Complex64],
        gs: &[num_complex::Complex64],
    ) -> num_complex::Complex64 {
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut term = num_complex::Complex64::new(c.to_f64().unwrap_or(f64::NAN), 0.0);
            term *= t.powi(e.get(SLOT_T) as i32);
            term *= s.powi(e.get(SLOT_S) as i32);
            for (i, g) in gt.iter().enumerate() {
                term *= g.powi(e.get(slot_u(i)) as i32);
            }
            for (i, g) in gs.iter().enumerate() {
                term *= g.powi(e.get(slot_v(i)) as i32);
            }
            acc += term;
        }
        acc
    }

    fn leading(&self) -> Option<(&Expo, &Rat)> {
        self.terms.iter().next_back()
    }

    /// Exact division; `None` when `self` is not a polynomial multiple
    /// of `d`.
    pub fn exact_div(&self, d: &Self) -> Option<Self> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let (dl_e, dl_c) = d.leading().unwrap();
        let (dl_e, dl_c) = (dl_e.clone(), dl_c.clone());
        let mut rem = self.clone();
        let mut quot = BTreeMap::new();
        while let Some((re, rc)) = rem.leading() {
            let qe = re.try_div(&dl_e)?;
            let qc = rc / &dl_c;
            Self::insert_add(&mut quot, qe.clone(), qc.clone());
            let qterm = CoeffPoly::monomial(qe, qc);
            rem = rem.sub(&qterm.mul(d));
        }
        Some(CoeffPoly { terms: quot })
    }

    /// Polynomial square root, for perfect squares only.
    pub fn poly_sqrt(&self) -> Option<Self> {
        if self.is_zero() {
            return Some(Self::zero());
        }
        let (le, lc) = self.leading().unwrap();
        let sc = rat_sqrt(lc)?;
        let mut half = vec![0u16; le.slots().len()];
        for (i, h) in half.iter_mut().enumerate() {
            let e = le.get(i);
            if e % 2 != 0 {
                return None;
            }
            *h = e / 2;
        }
        let mut root = CoeffPoly::monomial(Expo::new(half), sc);
        let mut rem = self.sub(&root.mul(&root));
        while !rem.is_zero() {
            let (re, rc) = rem.leading().unwrap();
            let (le2, lc2) = root.leading().unwrap();
            let qe = re.try_div(le2)?;
            let qc = rc / (lc2 * rat(2));
            let term = CoeffPoly::monomial(qe.clone(), qc);
            if term.leading().map(|(e, _)| e >= le2).unwrap_or(false) {
                return None;
            }
            root = root.add(&term);
            rem = self.sub(&root.mul(&root));
        }
        Some(root)
    }

    /// Positive rational content (gcd of coefficients).
    pub fn content(&self) -> Rat {
        let mut g = Rat::zero();
        for c in self.terms.values() {
            g = rat_gcd(&g, c);
        }
        g
    }

    /// `(unit, primitive)` with `unit * primitive = self`, primitive
    /// having content 1 and positive leading coefficient.
    pub fn as_primitive(&self) -> (Rat, Self) {
        if self.is_zero() {
            return (Rat::one(), Self::zero());
        }
        let mut u = self.content();
        if self.leading().unwrap().1.is_negative() {
            u = -u;
        }
        let inv = u.recip();
        (u.clone(), self.scale(&inv))
    }

    /// Renders against a universe's symbol names.
    pub fn display<'a>(&'a self, uni: &'a Universe) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, uni }
    }
}

fn pow_rat(b: &Rat, e: u16) -> Rat {
    let mut acc = Rat::one();
    for _ in 0..e {
        acc *= b;
    }
    acc
}

/// Laurent intermediate produced by [`CoeffPoly::negate_time`]; exponents
/// may be negative until the owning tuple is cleared.
pub struct Laurent {
    terms: BTreeMap<Vec<i64>, Rat>,
}

impl Laurent {
    /// Slot-wise minimum exponent over all terms (0 for empty slots).
    pub fn min_exponents(&self, width: usize) -> Vec<i64> {
        let mut m = vec![0i64; width];
        for e in self.terms.keys() {
            for (i, slot) in m.iter_mut().enumerate() {
                let v = e.get(i).copied().unwrap_or(0);
                if v < *slot {
                    *slot = v;
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.terms.keys().map(|e| e.len()).max().unwrap_or(0)
    }

    /// Multiplies by `prod_i x_i^{-shift_i}` (shift entries must be
    /// nonpositive) and returns the cleared polynomial.
    pub fn shifted(&self, shift: &[i64]) -> CoeffPoly {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            let width = e.len().max(shift.len());
            let mut v = vec![0u16; width];
            for (i, x) in v.iter_mut().enumerate() {
                let raw = e.get(i).copied().unwrap_or(0) - shift.get(i).copied().unwrap_or(0);
                assert!(raw >= 0, "laurent clearing left a negative exponent");
                *x = raw as u16;
            }
            CoeffPoly::insert_add(&mut terms, Expo::new(v), c.clone());
        }
        CoeffPoly { terms }
    }
}

pub struct PolyDisplay<'a> {
    poly: &'a CoeffPoly,
    uni: &'a Universe,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        let names = self.uni.symbol_names();
        let mut first = true;
        // highest monomial first reads closer to the usual notation
        for (e, c) in self.poly.terms.iter().rev() {
            let mut parts: Vec<String> = Vec::new();
            for (i, name) in names.iter().enumerate() {
                let k = e.get(i);
                if k == 1 {
                    parts.push(name.clone());
                } else if k > 1 {
                    parts.push(format!("{name}^{k}"));
                }
            }
            let mono = parts.join("*");
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{mag}*{mono}")?;
            }
        }
        Ok(())
    }
}

/// JSON form of a [`CoeffPoly`]: symbol-universe header plus
/// `[num, den, exponent-vector]` triples. Numerator and denominator are
/// decimal strings so the round-trip is bit exact at any size.
#[derive(Serialize, Deserialize)]
pub struct PolyJson {
    pub symbols: Vec<String>,
    pub terms: Vec<(String, String, Vec<u16>)>,
}

impl PolyJson {
    pub fn encode(p: &CoeffPoly, uni: &Universe) -> Self {
        PolyJson {
            symbols: uni.symbol_names(),
            terms: p
                .terms()
                .map(|(e, c)| {
                    (
                        c.numer().to_string(),
                        c.denom().to_string(),
                        e.slots().to_vec(),
                    )
                })
                .collect(),
        }
    }

    pub fn decode(&self) -> Option<CoeffPoly> {
        let mut acc = CoeffPoly::zero();
        for (n, d, e) in &self.terms {
            let num: BigInt = n.parse().ok()?;
            let den: BigInt = d.parse().ok()?;
            if den.is_zero() {
                return None;
            }
            acc = acc.add(&CoeffPoly::monomial(Expo::new(e.clone()), Rat::new(num, den)));
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> CoeffPoly {
        CoeffPoly::gen_t_pow(0, 1)
    }
    fn v() -> CoeffPoly {
        CoeffPoly::gen_s_pow(0, 1)
    }
    fn w() -> CoeffPoly {
        CoeffPoly::gen_t_pow(1, 1)
    }

    #[test]
    fn t_times_t() {
        let t = CoeffPoly::var_t();
        assert_eq!(t.mul(&t), CoeffPoly::t_pow(2));
    }

    #[test]
    fn difference_of_squares() {
        let one = CoeffPoly::one();
        let lhs = u().sub(&one).mul(&u().add(&one));
        let rhs = u().mul(&u()).sub(&one);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn mixed_generator_product() {
        // (e^{at} - e^{dt}) * e^{as} = uv - wv, expanded term by term
        let lhs = u().sub(&w()).mul(&v());
        let rhs = u().mul(&v()).sub(&w().mul(&v()));
        assert_eq!(lhs, rhs);
        assert_eq!(lhs.num_terms(), 2);
    }

    #[test]
    fn shift_binomial() {
        let t2 = CoeffPoly::t_pow(2);
        let shifted = t2.substitute_time_shift().unwrap();
        let expect = CoeffPoly::t_pow(2)
            .add(&CoeffPoly::var_t().mul(&CoeffPoly::var_s()).scale(&rat(2)))
            .add(&CoeffPoly::var_s().mul(&CoeffPoly::var_s()));
        assert_eq!(shifted, expect);
    }

    #[test]
    fn shift_generator_splits() {
        assert_eq!(u().substitute_time_shift().unwrap(), u().mul(&v()));
    }

    #[test]
    fn shift_additive_time() {
        // a(t) = t with B = 0: t -> t + s
        let t = CoeffPoly::var_t();
        assert_eq!(
            t.substitute_time_shift().unwrap(),
            CoeffPoly::var_t().add(&CoeffPoly::var_s())
        );
    }

    #[test]
    fn shift_rejects_s() {
        assert!(CoeffPoly::var_s().substitute_time_shift().is_err());
    }

    #[test]
    fn eval_examples() {
        let p = CoeffPoly::t_pow(2).add(&CoeffPoly::one());
        assert_eq!(p.eval_rat(&rat(2), &rat(0), &[], &[]), rat(5));
        let q = u().sub(&CoeffPoly::one());
        assert_eq!(q.eval_rat(&rat(0), &rat(0), &[rat(1)], &[rat(1)]), rat(0));
        let r = u().mul(&v()).sub(&CoeffPoly::one());
        assert_eq!(r.eval_rat(&rat(0), &rat(0), &[rat(2)], &[rat(3)]), rat(5));
    }

    #[test]
    fn exact_division() {
        let p = u().add(&CoeffPoly::var_t());
        let q = u().sub(&v());
        let prod = p.mul(&q);
        assert_eq!(prod.exact_div(&q).unwrap(), p);
        assert!(p.exact_div(&q).is_none());
    }

    #[test]
    fn poly_sqrt_roundtrip() {
        let p = u().add(&CoeffPoly::var_t().scale(&rat(3)));
        let sq = p.mul(&p);
        assert_eq!(sq.poly_sqrt().unwrap(), p);
        assert!(sq.add(&CoeffPoly::one()).poly_sqrt().is_none());
    }

    #[test]
    fn negate_time_clears() {
        // u^{-1}(t -> -t applied to u) shifted by the tuple minimum
        let p = u().add(&CoeffPoly::var_t());
        let l = p.negate_time();
        let width = l.width();
        let m = l.min_exponents(width);
        let cleared = l.shifted(&m);
        // -t*u + 1 after clearing by u^{-1}
        let expect = CoeffPoly::one().sub(&CoeffPoly::var_t().mul(&u()));
        assert_eq!(cleared, expect);
    }

    #[test]
    fn swap_slots() {
        let p = u().mul(&CoeffPoly::var_t());
        assert_eq!(p.swap_t_s(), v().mul(&CoeffPoly::var_s()));
        assert_eq!(p.swap_t_s().swap_t_s(), p);
    }

    #[test]
    fn json_roundtrip_bit_exact() {
        let uni = Universe::new(vec![GenDef {
            label: "alpha".into(),
            rate: rat(1),
        }]);
        let p = u()
            .mul(&CoeffPoly::var_t())
            .scale(&Rat::new(BigInt::from(123456789012345678i64), BigInt::from(7)))
            .add(&CoeffPoly::one());
        let js = serde_json::to_string(&PolyJson::encode(&p, &uni)).unwrap();
        let back: PolyJson = serde_json::from_str(&js).unwrap();
        assert_eq!(back.decode().unwrap(), p);
    }

    #[test]
    fn content_and_primitive() {
        let p = CoeffPoly::var_t().scale(&ratq(4, 6)).add(&CoeffPoly::one().scale(&ratq(2, 3)));
        let (unit, prim) = p.as_primitive();
        assert_eq!(prim.scale(&unit), p);
        assert_eq!(prim.content(), Rat::one());
    }
}
