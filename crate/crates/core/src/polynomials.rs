//! Exact sparse polynomials over the integers and the overlap-obstruction
//! families built from them.
//!
//! For distinct positive integers the family member
//!
//! ```text
//! f_{h|g}(X) = (Σ_h X^{3p^h})² · Σ_g X^{2p^g} · Σ_g X^{4p^g}
//!            − (Σ_g X^{3p^g})² · Σ_h X^{2p^h} · Σ_h X^{4p^h}
//! ```
//!
//! vanishes at `x ∈ (0, 1)` exactly when the normalized vectors
//! `(x^{p^h})`, `(x^{2p^h})` have the same overlap as their `g` counterparts.
//! The two-index pair polynomial `f_{ij|kl}` puts `k, l` in the cubed factor
//! of the first product, so `poly_f_pair(p, i, j, k, l)` equals the general
//! member with `h = {k, l}` and `g = {i, j}`.
//!
//! Real roots are isolated with Sturm sequences over exact dyadic rationals.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest degree accepted by [`real_roots`].
pub const MAX_ROOT_DEGREE: u64 = 10_000;

/// Default isolation width for [`real_roots`].
pub const DEFAULT_ROOT_TOL: f64 = 1e-9;

/// Roots closer than this are merged by [`excluded_values`].
pub const MERGE_TOL: f64 = 1e-9;

/// Integer-coefficient polynomial stored as exponent → coefficient.
/// Zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparsePoly {
    terms: BTreeMap<BigUint, BigInt>,
}

impl SparsePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(exponent: BigUint, coefficient: BigInt) -> Self {
        let mut p = Self::zero();
        p.add_term(exponent, coefficient);
        p
    }

    /// Sums the given terms, merging repeated exponents.
    pub fn from_terms<I: IntoIterator<Item = (BigUint, BigInt)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    /// `X^{e_1} + X^{e_2} + …`
    pub fn sum_of_powers<I: IntoIterator<Item = BigUint>>(exponents: I) -> Self {
        Self::from_terms(exponents.into_iter().map(|e| (e, BigInt::one())))
    }

    fn add_term(&mut self, exponent: BigUint, coefficient: BigInt) {
        if coefficient.is_zero() {
            return;
        }
        match self.terms.entry(exponent) {
            Entry::Vacant(v) => {
                v.insert(coefficient);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coefficient;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending exponent order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&BigUint, &BigInt)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, exponent: &BigUint) -> BigInt {
        self.terms.get(exponent).cloned().unwrap_or_default()
    }

    pub fn degree(&self) -> Option<&BigUint> {
        self.terms.keys().next_back()
    }

    pub fn min_exponent(&self) -> Option<&BigUint> {
        self.terms.keys().next()
    }

    pub fn support(&self) -> Vec<BigUint> {
        self.terms.keys().cloned().collect()
    }

    /// Sum of absolute coefficient values.
    pub fn coefficient_mass(&self) -> BigInt {
        self.terms.values().map(|c| c.abs()).sum()
    }

    /// Evaluation in double precision.
    pub fn eval_f64(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let c = c.to_f64().unwrap_or(f64::NAN);
                let e = e.to_f64().unwrap_or(f64::INFINITY);
                c * x.powf(e)
            })
            .sum()
    }
}

impl Add for &SparsePoly {
    type Output = SparsePoly;
    fn add(self, rhs: &SparsePoly) -> SparsePoly {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Neg for &SparsePoly {
    type Output = SparsePoly;
    fn neg(self) -> SparsePoly {
        SparsePoly {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

impl Sub for &SparsePoly {
    type Output = SparsePoly;
    fn sub(self, rhs: &SparsePoly) -> SparsePoly {
        self + &(-rhs)
    }
}

impl Mul for &SparsePoly {
    type Output = SparsePoly;
    fn mul(self, rhs: &SparsePoly) -> SparsePoly {
        let mut acc: BTreeMap<BigUint, BigInt> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                *acc.entry(e1 + e2).or_insert_with(BigInt::zero) += c1 * c2;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        SparsePoly { terms: acc }
    }
}

impl fmt::Display for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let unit = mag.is_one();
            match (e.is_zero(), unit) {
                (true, _) => write!(f, "{mag}")?,
                (false, true) => write!(f, "X^{e}")?,
                (false, false) => write!(f, "{mag} X^{e}")?,
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    e: String,
    c: String,
}

/// `[{"e": "64", "c": "-1"}, …]`, ascending exponents, decimal strings.
impl Serialize for SparsePoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<TermJson> = self
            .terms
            .iter()
            .map(|(e, c)| TermJson {
                e: e.to_string(),
                c: c.to_string(),
            })
            .collect();
        terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparsePoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = Vec::<TermJson>::deserialize(d)?;
        let mut terms = Vec::with_capacity(raw.len());
        for t in raw {
            let e: BigUint = t.e.parse().map_err(|_| D::Error::custom(format!("bad exponent {:?}", t.e)))?;
            let c: BigInt = t.c.parse().map_err(|_| D::Error::custom(format!("bad coefficient {:?}", t.c)))?;
            terms.push((e, c));
        }
        Ok(SparsePoly::from_terms(terms))
    }
}

/// The index lists `h_1…h_s | g_1…g_s` and base `p` of a family member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexLists {
    h: Vec<u32>,
    g: Vec<u32>,
    p: u32,
}

impl IndexLists {
    pub fn new(h: Vec<u32>, g: Vec<u32>, p: u32) -> Result<Self> {
        if h.is_empty() || h.len() != g.len() {
            return Err(Error::InvalidArgument(format!(
                "index lists must be nonempty and of equal length, got {} and {}",
                h.len(),
                g.len()
            )));
        }
        if p < 2 {
            return Err(Error::InvalidArgument(format!("p must be at least 2, got {p}")));
        }
        let all: BTreeSet<u32> = h.iter().chain(&g).copied().collect();
        if all.len() != 2 * h.len() {
            return Err(Error::InvalidArgument("indices must be pairwise distinct".into()));
        }
        if all.contains(&0) {
            return Err(Error::InvalidArgument("indices must be positive".into()));
        }
        Ok(Self { h, g, p })
    }

    pub fn h(&self) -> &[u32] {
        &self.h
    }

    pub fn g(&self) -> &[u32] {
        &self.g
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn s(&self) -> usize {
        self.h.len()
    }

    /// The same lists with `h` and `g` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            h: self.g.clone(),
            g: self.h.clone(),
            p: self.p,
        }
    }

    fn power(&self, index: u32) -> BigUint {
        BigUint::from(self.p).pow(index)
    }

    /// `Σ_{idx} X^{m · p^idx}`
    fn power_sum(&self, indices: &[u32], m: u32) -> SparsePoly {
        SparsePoly::sum_of_powers(indices.iter().map(|&i| self.power(i) * m))
    }
}

fn family_products(lists: &IndexLists) -> (SparsePoly, SparsePoly) {
    let (h, g) = (lists.h(), lists.g());
    let cube_h = lists.power_sum(h, 3);
    let cube_g = lists.power_sum(g, 3);
    let first = &(&(&cube_h * &cube_h) * &lists.power_sum(g, 2)) * &lists.power_sum(g, 4);
    let second = &(&(&cube_g * &cube_g) * &lists.power_sum(h, 2)) * &lists.power_sum(h, 4);
    (first, second)
}

/// The family member for arbitrary valid lists, without the `s ≥ 2, p ≥ 7`
/// restrictions of [`poly_f_general`].
pub fn family_poly(lists: &IndexLists) -> SparsePoly {
    let (first, second) = family_products(lists);
    &first - &second
}

/// `(X^{3p^k}+X^{3p^l})²(X^{2p^i}+X^{2p^j})(X^{4p^i}+X^{4p^j})
///  − (X^{3p^i}+X^{3p^j})²(X^{2p^k}+X^{2p^l})(X^{4p^k}+X^{4p^l})`
pub fn poly_f_pair(p: u32, i: u32, j: u32, k: u32, l: u32) -> Result<SparsePoly> {
    let lists = IndexLists::new(vec![k, l], vec![i, j], p)?;
    Ok(family_poly(&lists))
}

/// The general family member; requires `s ≥ 2` and `p ≥ 7`.
pub fn poly_f_general(lists: &IndexLists) -> Result<SparsePoly> {
    if lists.s() < 2 {
        return Err(Error::InvalidArgument(format!("need s >= 2, got {}", lists.s())));
    }
    if lists.p() < 7 {
        return Err(Error::InvalidArgument(format!("need p >= 7, got {}", lists.p())));
    }
    Ok(family_poly(lists))
}

/// Exponent multiplicities of one product before any cancellation.
fn expansion_exponents(cubed: &[u32], linear: &[u32], lists: &IndexLists) -> BTreeMap<BigUint, u64> {
    let mut out = BTreeMap::new();
    for &i in cubed {
        for &j in cubed {
            for &k in linear {
                for &l in linear {
                    let e = lists.power(i) * 3u32 + lists.power(j) * 3u32 + lists.power(k) * 2u32 + lists.power(l) * 4u32;
                    *out.entry(e).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

/// Structure of the expansion behind the non-vanishing argument.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CancellationReport {
    pub s: usize,
    pub nonzero: bool,
    /// Every `X^{6p^{h_i} + 6p^{g_k}}` has coefficient zero.
    pub diagonal_cancelled: bool,
    /// Number of distinct exponents present in both expanded products.
    pub shared_exponents: usize,
}

pub fn cancellation_report(lists: &IndexLists) -> CancellationReport {
    let first = expansion_exponents(lists.h(), lists.g(), lists);
    let second_raw = {
        // second product: (Σ_g X^{3p^g})² Σ_h X^{2p^h} Σ_h X^{4p^h}
        expansion_exponents(lists.g(), lists.h(), lists)
    };
    let shared = first.keys().filter(|e| second_raw.contains_key(*e)).count();
    let poly = family_poly(lists);
    let diagonal_cancelled = lists.h().iter().all(|&h| {
        lists.g().iter().all(|&g| {
            let e = lists.power(h) * 6u32 + lists.power(g) * 6u32;
            poly.coefficient(&e).is_zero()
        })
    });
    CancellationReport {
        s: lists.s(),
        nonzero: !poly.is_zero(),
        diagonal_cancelled,
        shared_exponents: shared,
    }
}

// ---------------------------------------------------------------------------
// exact evaluation

/// Exact sign of `poly(x)`: −1, 0 or +1.
///
/// Panics if `x ∉ {−1, 0, 1}` and an exponent gap exceeds `u32::MAX`; such a
/// power has no representable value.
pub fn eval_sign(poly: &SparsePoly, x: &BigRational) -> i8 {
    if poly.is_zero() {
        return 0;
    }
    if x.is_zero() {
        let c0 = poly.coefficient(&BigUint::zero());
        return sign_of(&c0);
    }
    if x.abs().is_one() {
        let negative = x.is_negative();
        let total: BigInt = poly
            .terms()
            .map(|(e, c)| if negative && e.is_odd() { -c } else { c.clone() })
            .sum();
        return sign_of(&total);
    }
    let a = x.numer();
    let b = x.denom();
    let mut iter = poly.terms().rev();
    let (top, c_top) = iter.next().expect("nonzero");
    let mut acc = c_top.clone();
    let mut prev = top.clone();
    let mut b_pow = BigInt::one();
    for (e, c) in iter {
        let gap = gap_u32(&prev, e);
        acc = acc * Pow::pow(a, gap) + {
            b_pow *= Pow::pow(b, gap);
            c * &b_pow
        };
        prev = e.clone();
    }
    // remaining factor a^{min exponent}
    let mut s = sign_of(&acc);
    if a.is_negative() && prev.is_odd() {
        s = -s;
    }
    s
}

fn gap_u32(hi: &BigUint, lo: &BigUint) -> u32 {
    (hi - lo)
        .to_u32()
        .expect("exponent gap too large for exact evaluation away from 0 and ±1")
}

fn sign_of(v: &BigInt) -> i8 {
    match v.sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

// ---------------------------------------------------------------------------
// dense integer polynomials (ascending coefficients) for root isolation

mod dense {
    use super::*;

    pub type Poly = Vec<BigInt>;

    pub fn trim(p: &mut Poly) {
        while p.last().is_some_and(Zero::is_zero) {
            p.pop();
        }
    }

    pub fn degree(p: &Poly) -> usize {
        p.len().saturating_sub(1)
    }

    pub fn derivative(p: &Poly) -> Poly {
        let mut d: Poly = p.iter().enumerate().skip(1).map(|(i, c)| c * BigInt::from(i)).collect();
        trim(&mut d);
        d
    }

    pub fn content(p: &Poly) -> BigInt {
        p.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Divides by the (positive) content; signs are preserved.
    pub fn primitive(mut p: Poly) -> Poly {
        let c = content(&p);
        if !c.is_zero() && !c.is_one() {
            for x in &mut p {
                *x = &*x / &c;
            }
        }
        p
    }

    /// Remainder of `|lc(b)|^{δ+1} · a` by `b`; a positive multiple of the
    /// true remainder.
    pub fn prem_positive(a: &Poly, b: &Poly) -> Poly {
        let mut r = a.clone();
        let db = degree(b);
        let lc = b.last().expect("nonzero divisor").clone();
        let lc_abs = lc.abs();
        let lc_sign = lc.signum();
        while !r.is_empty() && degree(&r) >= db {
            let lead = r.last().unwrap().clone();
            let shift = degree(&r) - db;
            for x in r.iter_mut() {
                *x *= &lc_abs;
            }
            let factor = &lead * &lc_sign;
            for (i, c) in b.iter().enumerate() {
                r[i + shift] -= &factor * c;
            }
            trim(&mut r);
            r = primitive(r);
        }
        r
    }

    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        let (mut a, mut b) = (primitive(a.clone()), primitive(b.clone()));
        if degree(&a) < degree(&b) {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_empty() {
            let r = primitive(prem_positive(&a, &b));
            a = b;
            b = r;
        }
        let mut g = primitive(a);
        if g.last().is_some_and(|c| c.is_negative()) {
            for x in &mut g {
                *x = -&*x;
            }
        }
        g
    }

    /// Exact quotient `a / b` over the integers; `b` must divide `a`.
    pub fn div_exact(a: &Poly, b: &Poly) -> Poly {
        let db = degree(b);
        let lc = b.last().expect("nonzero divisor");
        let mut r = a.clone();
        let mut q = vec![BigInt::zero(); degree(a) + 1 - db];
        while !r.is_empty() && degree(&r) >= db {
            let shift = degree(&r) - db;
            let (coef, rem) = r.last().unwrap().div_rem(lc);
            assert!(rem.is_zero(), "inexact polynomial division");
            for (i, c) in b.iter().enumerate() {
                r[i + shift] -= &coef * c;
            }
            q[shift] = coef;
            trim(&mut r);
        }
        assert!(r.is_empty(), "inexact polynomial division");
        q
    }

    /// Divides by `(X − root)` for `root = ±1` by synthetic division.
    pub fn deflate_unit(p: &Poly, root: i64) -> Poly {
        let n = degree(p);
        let mut q = vec![BigInt::zero(); n];
        let mut carry = BigInt::zero();
        for i in (1..=n).rev() {
            carry = &p[i] + carry * root;
            q[i - 1] = carry.clone();
        }
        q
    }

    pub fn value_at_int(p: &Poly, x: i64) -> BigInt {
        p.iter().rev().fold(BigInt::zero(), |acc, c| acc * x + c)
    }

    /// Sign of `p(num / 2^k)` (times the positive factor `2^{k·deg}`).
    pub fn sign_at(p: &Poly, num: &BigInt, k: u64) -> i8 {
        let n = degree(p);
        let mut acc = BigInt::zero();
        for (i, c) in p.iter().enumerate().rev() {
            acc = acc * num + (c << (k as usize * (n - i)));
        }
        sign_of(&acc)
    }
}

/// A real root together with an exact isolating interval.
#[derive(Clone, Debug, PartialEq)]
pub struct RealRoot {
    pub value: f64,
    pub lower: BigRational,
    pub upper: BigRational,
}

impl RealRoot {
    fn exact(num: BigInt, k: u64) -> Self {
        let r = dyadic(&num, k);
        Self {
            value: dyadic_f64(&num, k),
            lower: r.clone(),
            upper: r,
        }
    }

    pub fn width(&self) -> BigRational {
        &self.upper - &self.lower
    }
}

/// `{"value": 0.824…, "lower": "n/d", "upper": "n/d"}`
impl Serialize for RealRoot {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("RealRoot", 3)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("lower", &self.lower.to_string())?;
        st.serialize_field("upper", &self.upper.to_string())?;
        st.end()
    }
}

fn dyadic(num: &BigInt, k: u64) -> BigRational {
    BigRational::new(num.clone(), BigInt::one() << k as usize)
}

fn dyadic_f64(num: &BigInt, k: u64) -> f64 {
    num.to_f64().unwrap_or(f64::NAN) * 2f64.powi(-(k as i32))
}

struct SturmChain {
    seq: Vec<dense::Poly>,
}

impl SturmChain {
    fn new(p: &dense::Poly) -> Self {
        let mut seq = vec![p.clone(), dense::primitive(dense::derivative(p))];
        loop {
            let n = seq.len();
            if dense::degree(&seq[n - 1]) == 0 {
                break;
            }
            let r = dense::prem_positive(&seq[n - 2], &seq[n - 1]);
            if r.is_empty() {
                break;
            }
            seq.push(r.into_iter().map(|c| -c).collect());
        }
        Self { seq }
    }

    fn variations(&self, num: &BigInt, k: u64) -> usize {
        let mut last = 0i8;
        let mut count = 0;
        for p in &self.seq {
            let s = dense::sign_at(p, num, k);
            if s != 0 {
                if last != 0 && s != last {
                    count += 1;
                }
                last = s;
            }
        }
        count
    }
}

/// All distinct real roots of `poly`, ascending, each inside an exact
/// rational interval of width below `tol`. Roots at 0 and ±1 are found by
/// exact division and reported with zero-width intervals.
pub fn real_roots(poly: &SparsePoly, tol: f64) -> Result<Vec<RealRoot>> {
    if poly.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let degree = poly.degree().expect("nonzero");
    if degree > &BigUint::from(MAX_ROOT_DEGREE) {
        return Err(Error::InvalidArgument(format!(
            "degree {degree} exceeds the root-isolation guard {MAX_ROOT_DEGREE}"
        )));
    }
    let shift = poly.min_exponent().expect("nonzero").to_usize().expect("guarded");
    let deg = degree.to_usize().expect("guarded") - shift;
    let mut dense_poly: dense::Poly = vec![BigInt::zero(); deg + 1];
    for (e, c) in poly.terms() {
        dense_poly[e.to_usize().expect("guarded") - shift] = c.clone();
    }

    let mut roots = Vec::new();
    if shift > 0 {
        roots.push(RealRoot::exact(BigInt::zero(), 0));
    }
    for unit in [1i64, -1] {
        let mut found = false;
        while dense::degree(&dense_poly) > 0 && dense::value_at_int(&dense_poly, unit).is_zero() {
            dense_poly = dense::deflate_unit(&dense_poly, unit);
            found = true;
        }
        if found {
            roots.push(RealRoot::exact(BigInt::from(unit), 0));
        }
    }

    if dense::degree(&dense_poly) > 0 {
        let g = dense::gcd(&dense_poly, &dense::derivative(&dense_poly));
        let squarefree = if dense::degree(&g) > 0 {
            dense::primitive(dense::div_exact(&dense_poly, &g))
        } else {
            dense::primitive(dense_poly)
        };
        isolate(&squarefree, tol, &mut roots);
    }
    roots.sort_by(|a, b| a.lower.cmp(&b.lower));
    Ok(roots)
}

fn isolate(p: &dense::Poly, tol: f64, out: &mut Vec<RealRoot>) {
    if dense::degree(p) == 0 {
        return;
    }
    let chain = SturmChain::new(p);
    // Cauchy bound 1 + max|a_i / a_n|, rounded up to an integer
    let lc = p.last().unwrap().abs();
    let max_ratio = p[..p.len() - 1]
        .iter()
        .map(|c| Integer::div_ceil(&c.abs(), &lc))
        .max()
        .unwrap_or_default();
    let bound: BigInt = max_ratio + 1;
    let mut stack = vec![(-bound.clone(), bound, 0u64)];
    while let Some((a, b, k)) = stack.pop() {
        let count = chain.variations(&a, k) - chain.variations(&b, k);
        match count {
            0 => {}
            1 => out.push(refine(p, a, b, k, tol)),
            _ => {
                let (a2, b2, k2) = (&a * 2, &b * 2, k + 1);
                let mid = &a + &b;
                if dense::sign_at(p, &mid, k2) != 0 {
                    stack.push((a2, mid.clone(), k2));
                    stack.push((mid, b2, k2));
                    continue;
                }
                out.push(RealRoot::exact(mid.clone(), k2));
                // step off the rational root until it is isolated on its own
                let mut j = 1u64;
                loop {
                    let scale = BigInt::one() << j as usize;
                    let lo = &mid * &scale - 1;
                    let hi = &mid * &scale + 1;
                    let kk = k2 + j;
                    if dense::sign_at(p, &lo, kk) != 0
                        && dense::sign_at(p, &hi, kk) != 0
                        && chain.variations(&lo, kk) - chain.variations(&hi, kk) == 1
                    {
                        let s = BigInt::one() << (j + 1) as usize;
                        stack.push((&a * &s, lo, kk));
                        stack.push((hi, &b * &s, kk));
                        break;
                    }
                    j += 1;
                }
            }
        }
    }
}

/// Bisects an interval holding exactly one simple root, with nonzero signs
/// of opposite parity at both ends, down to width below `tol`.
fn refine(p: &dense::Poly, mut a: BigInt, mut b: BigInt, mut k: u64, tol: f64) -> RealRoot {
    let mut sa = dense::sign_at(p, &a, k);
    loop {
        let width = dyadic_f64(&(&b - &a), k);
        if width < tol {
            return RealRoot {
                value: 0.5 * (dyadic_f64(&a, k) + dyadic_f64(&b, k)),
                lower: dyadic(&a, k),
                upper: dyadic(&b, k),
            };
        }
        let mid = &a + &b;
        a *= 2;
        b *= 2;
        k += 1;
        let sm = dense::sign_at(p, &mid, k);
        if sm == 0 {
            return RealRoot::exact(mid, k);
        }
        if sm == sa {
            a = mid;
            sa = sm;
        } else {
            b = mid;
        }
    }
}

/// Pair polynomials `f_{12|34}`, `f_{13|24}`, `f_{14|23}` at base `p`.
pub fn pair_family(p: u32) -> Result<Vec<(String, SparsePoly)>> {
    [(1, 2, 3, 4), (1, 3, 2, 4), (1, 4, 2, 3)]
        .into_iter()
        .map(|(i, j, k, l)| Ok((format!("f_{{{i}{j}|{k}{l}}}^({p})"), poly_f_pair(p, i, j, k, l)?)))
        .collect()
}

/// Sorted union of the real roots of the three pair polynomials, merged at
/// [`MERGE_TOL`].
pub fn excluded_values(p: u32) -> Result<Vec<f64>> {
    let mut all = Vec::new();
    for (_, poly) in pair_family(p)? {
        all.extend(real_roots(&poly, 1e-12)?.into_iter().map(|r| r.value));
    }
    all.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::new();
    for v in all {
        if merged.last().is_none_or(|&m| (v - m).abs() > MERGE_TOL) {
            merged.push(v);
        }
    }
    Ok(merged)
}

// ---------------------------------------------------------------------------
// floating-point overlap conditions

/// Difference of normalized overlaps `R(h) − R(g)`, where
/// `R(list) = (Σ x^{3p^e})² / (Σ x^{2p^e} · Σ x^{4p^e})`.
///
/// Its sign equals the sign of `family_poly(lists)` at `x`. `value` may
/// underflow to zero for large exponents; `sign` is computed in the log
/// domain and stays reliable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionGap {
    pub value: f64,
    pub sign: i8,
}

pub fn condition_gap(x: f64, lists: &IndexLists) -> Result<ConditionGap> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidArgument(format!("x must lie in (0, 1), got {x}")));
    }
    let ln_dh = log_overlap_deficit(x, lists.p(), lists.h());
    let ln_dg = log_overlap_deficit(x, lists.p(), lists.g());
    // R = 1 − D, so R(h) − R(g) = D(g) − D(h)
    let sign = match ln_dg.partial_cmp(&ln_dh) {
        Some(std::cmp::Ordering::Greater) => 1,
        Some(std::cmp::Ordering::Less) => -1,
        _ => 0,
    };
    Ok(ConditionGap {
        value: ln_dg.exp() - ln_dh.exp(),
        sign,
    })
}

/// `ln(1 − R(list))`, using
/// `Σt² Σt⁴ − (Σt³)² = Σ_{i<j} t_i² t_j² (t_i − t_j)²` with `t = x^{p^e − p^{e_min}}`.
fn log_overlap_deficit(x: f64, p: u32, indices: &[u32]) -> f64 {
    let ln_x = x.ln();
    let powers: Vec<f64> = indices.iter().map(|&e| (p as f64).powi(e as i32)).collect();
    let min = powers.iter().copied().fold(f64::INFINITY, f64::min);
    let lt: Vec<f64> = powers.iter().map(|&e| (e - min) * ln_x).collect();
    let mut num_terms = Vec::new();
    for i in 0..lt.len() {
        for j in i + 1..lt.len() {
            let (hi, lo) = if lt[i] >= lt[j] { (lt[i], lt[j]) } else { (lt[j], lt[i]) };
            let ln_diff = hi + (-(lo - hi).exp()).ln_1p();
            num_terms.push(2.0 * lt[i] + 2.0 * lt[j] + 2.0 * ln_diff);
        }
    }
    let two: Vec<f64> = lt.iter().map(|t| 2.0 * t).collect();
    let four: Vec<f64> = lt.iter().map(|t| 4.0 * t).collect();
    log_sum_exp(&num_terms) - log_sum_exp(&two) - log_sum_exp(&four)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Whether a single unitary (up to phases) can carry `N(u) → N(u2)` and
/// `N(v) → N(v2)`: the two overlaps must agree in modulus.
pub fn relatable(u: &[f64], v: &[f64], u2: &[f64], v2: &[f64], tol: f64) -> Result<bool> {
    let n = u.len();
    if [v.len(), u2.len(), v2.len()].iter().any(|&m| m != n) {
        return Err(Error::InvalidArgument("vectors must share one length".into()));
    }
    let overlap = |a: &[f64], b: &[f64]| -> Result<f64> {
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs() / (na * nb))
    };
    Ok((overlap(u, v)? - overlap(u2, v2)?).abs() <= tol)
}
