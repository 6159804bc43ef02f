//! Exact polynomial machinery over arbitrary-precision rationals: arithmetic,
//! Sturm-sequence root counting, root isolation, Wronskians of polynomial
//! bases (fraction-free Bareiss elimination), and classification of extended
//! complete Chebyshev systems.
//!
//! Everything here is exact except the final float refinement of isolated
//! roots; the root-count claims feeding the acceptance gate never touch
//! floating point.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::str::FromStr;

/// Dense univariate polynomial with `BigRational` coefficients, ascending
/// degree. The zero polynomial has an empty coefficient list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatPoly {
    coeffs: Vec<BigRational>,
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational value of an f64 (every finite f64 is a dyadic rational).
pub fn rational_from_f64(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite float")
}

impl RatPoly {
    pub fn zero() -> Self {
        RatPoly { coeffs: Vec::new() }
    }

    pub fn from_rationals(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        RatPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::from_rationals(coeffs.iter().map(|&c| big(c)).collect())
    }

    /// Exact conversion: each f64 becomes the dyadic rational it represents.
    pub fn from_f64(coeffs: &[f64]) -> Self {
        Self::from_rationals(coeffs.iter().map(|&c| rational_from_f64(c)).collect())
    }

    pub fn monomial(degree: usize, coeff: BigRational) -> Self {
        let mut coeffs = vec![BigRational::zero(); degree + 1];
        coeffs[degree] = coeff;
        Self::from_rationals(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or None for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn leading(&self) -> Option<&BigRational> {
        self.coeffs.last()
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(self.coeff(k) + other.coeff(k));
        }
        Self::from_rationals(out)
    }

    pub fn sub(&self, other: &RatPoly) -> RatPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RatPoly {
        RatPoly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn scale(&self, factor: &BigRational) -> RatPoly {
        if factor.is_zero() {
            return RatPoly::zero();
        }
        RatPoly {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn mul(&self, other: &RatPoly) -> RatPoly {
        if self.is_zero() || other.is_zero() {
            return RatPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::from_rationals(out)
    }

    pub fn derivative(&self) -> RatPoly {
        if self.coeffs.len() <= 1 {
            return RatPoly::zero();
        }
        Self::from_rationals(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * big(k as i64))
                .collect(),
        )
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + rational_to_f64(c);
        }
        acc
    }

    /// Euclidean division: `self = q * divisor + r` with `deg r < deg divisor`.
    pub fn div_rem(&self, divisor: &RatPoly) -> (RatPoly, RatPoly) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let dlead = divisor.leading().unwrap().clone();
        let ddeg = divisor.degree().unwrap();
        let mut rem = self.coeffs.clone();
        let mut quo = vec![
            BigRational::zero();
            self.coeffs.len().saturating_sub(divisor.coeffs.len()) + 1
        ];
        while rem.len() > ddeg && !rem.is_empty() {
            let rdeg = rem.len() - 1;
            if rdeg < ddeg {
                break;
            }
            let factor = rem.last().unwrap() / &dlead;
            if factor.is_zero() {
                rem.pop();
                continue;
            }
            let shift = rdeg - ddeg;
            quo[shift] = factor.clone();
            for (k, dc) in divisor.coeffs.iter().enumerate() {
                let idx = shift + k;
                let v = &rem[idx] - dc * &factor;
                rem[idx] = v;
            }
            while rem.last().is_some_and(|c| c.is_zero()) {
                rem.pop();
            }
        }
        (Self::from_rationals(quo), Self::from_rationals(rem))
    }

    /// Monic gcd via Euclidean remainders.
    pub fn gcd(&self, other: &RatPoly) -> RatPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            let lead = a.leading().unwrap().clone();
            a.scale(&(BigRational::one() / lead))
        }
    }

    /// `self / gcd(self, self')`: same distinct roots, all simple.
    pub fn squarefree_part(&self) -> RatPoly {
        if self.is_zero() || self.degree() == Some(0) {
            return self.clone();
        }
        let g = self.gcd(&self.derivative());
        if g.degree() == Some(0) {
            return self.clone();
        }
        let (q, r) = self.div_rem(&g);
        debug_assert!(r.is_zero());
        q
    }

    /// Cauchy bound: all real roots lie in (-B, B).
    fn root_bound(&self) -> BigRational {
        let lead = match self.leading() {
            Some(l) => l,
            None => return BigRational::one(),
        };
        let mut m = BigRational::zero();
        for c in &self.coeffs[..self.coeffs.len() - 1] {
            let q = (c / lead).abs();
            if q > m {
                m = q;
            }
        }
        m + BigRational::one()
    }
}

fn rational_to_f64(v: &BigRational) -> f64 {
    // num's to_f64 via i128 truncation fails for huge entries; do it by parts.
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or_else(|| {
        let n = v.numer().to_f64().unwrap_or(f64::NAN);
        let d = v.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

impl fmt::Display for RatPoly {
    /// Text format used by the CLI: `c0 + c1*x + c2*x^2 + ...` with rational
    /// coefficients `p/q`; zero terms are skipped ("0" for the zero
    /// polynomial).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*x")?,
                _ => write!(f, "{c}*x^{k}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for RatPoly {
    type Err = Error;

    fn from_str(s: &str) -> Result<RatPoly> {
        let s = s.trim();
        if s == "0" || s.is_empty() {
            return Ok(RatPoly::zero());
        }
        let mut coeffs: Vec<(usize, BigRational)> = Vec::new();
        for tok in s.split('+') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            let (coeff_str, power) = match tok.split_once("*x") {
                Some((c, rest)) => {
                    let p = if rest.is_empty() {
                        1
                    } else {
                        rest.strip_prefix('^')
                            .ok_or_else(|| Error::InvalidInput(format!("bad term `{tok}`")))?
                            .parse::<usize>()
                            .map_err(|e| Error::InvalidInput(format!("bad power in `{tok}`: {e}")))?
                    };
                    (c.trim(), p)
                }
                None => match tok.strip_prefix('x').or_else(|| tok.strip_prefix("-x")) {
                    Some(rest) => {
                        let p = if rest.is_empty() {
                            1
                        } else {
                            rest.strip_prefix('^')
                                .ok_or_else(|| Error::InvalidInput(format!("bad term `{tok}`")))?
                                .parse::<usize>()
                                .map_err(|e| {
                                    Error::InvalidInput(format!("bad power in `{tok}`: {e}"))
                                })?
                        };
                        (if tok.starts_with('-') { "-1" } else { "1" }, p)
                    }
                    None => (tok, 0),
                },
            };
            let coeff = BigRational::from_str(coeff_str)
                .map_err(|e| Error::InvalidInput(format!("bad coefficient `{coeff_str}`: {e}")))?;
            coeffs.push((power, coeff));
        }
        let deg = coeffs.iter().map(|(p, _)| *p).max().unwrap_or(0);
        let mut dense = vec![BigRational::zero(); deg + 1];
        for (p, c) in coeffs {
            dense[p] += c;
        }
        Ok(RatPoly::from_rationals(dense))
    }
}

/// Interval endpoint for root counting.
#[derive(Debug, Clone)]
pub enum Bound {
    NegInf,
    Finite(BigRational),
    PosInf,
}

impl Bound {
    pub fn finite_f64(v: f64) -> Bound {
        Bound::Finite(rational_from_f64(v))
    }
}

/// Sign of a chain element at a bound; 0 is skipped by the caller.
fn sign_at(p: &RatPoly, at: &Bound) -> i8 {
    if p.is_zero() {
        return 0;
    }
    match at {
        Bound::Finite(x) => {
            let v = p.eval(x);
            if v.is_zero() {
                0
            } else if v.is_positive() {
                1
            } else {
                -1
            }
        }
        Bound::PosInf => {
            if p.leading().unwrap().is_positive() {
                1
            } else {
                -1
            }
        }
        Bound::NegInf => {
            let lead_pos = p.leading().unwrap().is_positive();
            let even = p.degree().unwrap() % 2 == 0;
            if lead_pos == even {
                1
            } else {
                -1
            }
        }
    }
}

fn sturm_chain(p: &RatPoly) -> Vec<RatPoly> {
    let mut chain = vec![p.clone(), p.derivative()];
    loop {
        let n = chain.len();
        if chain[n - 1].is_zero() {
            chain.pop();
            return chain;
        }
        let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
        if r.is_zero() {
            return chain;
        }
        chain.push(r.neg());
    }
}

/// Sign variations of the chain at a bound, skipping exact zeros. With the
/// skip convention this equals the variation count just right of the bound,
/// so `variations(a) - variations(b)` counts distinct roots in `(a, b]`.
fn variations(chain: &[RatPoly], at: &Bound) -> usize {
    let mut count = 0;
    let mut prev: i8 = 0;
    for p in chain {
        let s = sign_at(p, at);
        if s == 0 {
            continue;
        }
        if prev != 0 && s != prev {
            count += 1;
        }
        prev = s;
    }
    count
}

/// Exact number of distinct real roots of p in the half-open interval (a, b].
pub fn sturm_count(p: &RatPoly, a: &Bound, b: &Bound) -> Result<usize> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let q = p.squarefree_part();
    if q.degree() == Some(0) {
        return Ok(0);
    }
    let chain = sturm_chain(&q);
    let va = variations(&chain, a);
    let vb = variations(&chain, b);
    Ok(va.saturating_sub(vb))
}

/// Distinct real roots in the open interval (a, b).
pub fn sturm_count_open(p: &RatPoly, a: &Bound, b: &Bound) -> Result<usize> {
    let mut n = sturm_count(p, a, b)?;
    if let Bound::Finite(x) = b {
        if p.eval(x).is_zero() {
            n -= 1;
        }
    }
    Ok(n)
}

/// A certified isolating interval `(low, high]` containing exactly one
/// distinct real root, refined to width <= 1e-12, with a float approximation.
#[derive(Debug, Clone)]
pub struct IsolatedRoot {
    pub low: BigRational,
    pub high: BigRational,
    pub value: f64,
}

/// Isolates every distinct real root of p inside (a, b) (infinite bounds
/// allowed), pairwise-disjoint intervals certified by Sturm counts, refined
/// by rational bisection to width <= 1e-12.
pub fn isolate_roots(p: &RatPoly, a: &Bound, b: &Bound) -> Result<Vec<IsolatedRoot>> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let q = p.squarefree_part();
    if q.degree() == Some(0) {
        return Ok(Vec::new());
    }
    let bound = q.root_bound();
    let lo = match a {
        Bound::NegInf => -bound.clone(),
        Bound::Finite(x) => x.clone(),
        Bound::PosInf => return Ok(Vec::new()),
    };
    let hi = match b {
        Bound::PosInf => bound.clone().max(lo.clone() + BigRational::one()),
        Bound::Finite(x) => x.clone(),
        Bound::NegInf => return Ok(Vec::new()),
    };
    if hi <= lo {
        return Ok(Vec::new());
    }
    let chain = sturm_chain(&q);
    let count_in = |l: &BigRational, h: &BigRational| -> usize {
        variations(&chain, &Bound::Finite(l.clone()))
            .saturating_sub(variations(&chain, &Bound::Finite(h.clone())))
    };
    // exclude a right-endpoint root: shrink hi until q(hi) != 0 (open interval)
    let open_count = {
        let mut n = count_in(&lo, &hi);
        if q.eval(&hi).is_zero() {
            n -= 1;
        }
        n
    };
    let mut work = vec![(lo, hi.clone())];
    let mut found: Vec<(BigRational, BigRational)> = Vec::new();
    let two = big(2);
    while let Some((l, h)) = work.pop() {
        let mut n = count_in(&l, &h);
        if q.eval(&h).is_zero() && h == hi {
            n -= 1; // right-open at the outer boundary
        }
        if n == 0 {
            continue;
        }
        if n == 1 {
            found.push((l, h));
            continue;
        }
        let mid = (&l + &h) / &two;
        work.push((l, mid.clone()));
        work.push((mid, h));
    }
    debug_assert_eq!(found.len(), open_count);
    // refine each isolating interval to width <= 1e-12
    let width_limit = BigRational::new(BigInt::from(1), BigInt::from(10u64.pow(12)));
    let mut out = Vec::with_capacity(found.len());
    for (mut l, mut h) in found {
        while &h - &l > width_limit {
            let mid = (&l + &h) / &two;
            if count_in(&l, &mid) == 1 {
                h = mid;
            } else {
                l = mid;
            }
        }
        let value = rational_to_f64(&((&l + &h) / &two));
        out.push(IsolatedRoot {
            low: l,
            high: h,
            value,
        });
    }
    out.sort_by(|x, y| x.low.cmp(&y.low));
    Ok(out)
}

/// Classification outcome for an ordered polynomial basis on an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EctClass {
    /// Every leading-principal Wronskian is nonvanishing on the open interval:
    /// spans have at most n isolated zeros (n+1 basis elements).
    Ect,
    /// W_0..W_{n-1} nonvanishing, W_n with exactly one simple zero: the zero
    /// bound rises to n+1.
    EctAccuracy1,
    Neither,
}

#[derive(Debug, Clone)]
pub struct EctVerdict {
    pub classification: EctClass,
    /// Number of distinct roots of W_k in the open interval, k = 0..n.
    pub wronskian_root_data: Vec<usize>,
}

/// Wronskian `W_k = det(u_i^{(m)})_{m,i=0..k}` of the first k+1 basis
/// elements, computed exactly by fraction-free Bareiss elimination over the
/// rational polynomial ring.
pub fn wronskian(basis: &[RatPoly], k: usize) -> RatPoly {
    assert!(k < basis.len(), "wronskian index out of range");
    let n = k + 1;
    let mut mat: Vec<Vec<RatPoly>> = Vec::with_capacity(n);
    let mut row: Vec<RatPoly> = basis[..n].to_vec();
    mat.push(row.clone());
    for _ in 1..n {
        row = row.iter().map(RatPoly::derivative).collect();
        mat.push(row.clone());
    }
    bareiss_det(mat)
}

fn bareiss_det(mut m: Vec<Vec<RatPoly>>) -> RatPoly {
    let n = m.len();
    if n == 0 {
        return RatPoly::from_i64(&[1]);
    }
    let mut sign = 1i64;
    let mut prev = RatPoly::from_i64(&[1]);
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let swap = (k + 1..n).find(|&i| !m[i][k].is_zero());
            match swap {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return RatPoly::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = m[k][k].mul(&m[i][j]).sub(&m[i][k].mul(&m[k][j]));
                let (q, r) = num.div_rem(&prev);
                debug_assert!(r.is_zero(), "Bareiss division must be exact");
                m[i][j] = q;
            }
            m[i][k] = RatPoly::zero();
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if sign < 0 {
        det.neg()
    } else {
        det
    }
}

/// Classifies the ordered basis on the open interval (a, b) via exact
/// Wronskian root counts.
pub fn ect_classify(basis: &[RatPoly], a: &BigRational, b: &BigRational) -> Result<EctVerdict> {
    if basis.is_empty() {
        return Err(Error::InvalidInput("empty basis".into()));
    }
    if a >= b {
        return Err(Error::InvalidInput("need a < b".into()));
    }
    let n = basis.len() - 1;
    let mut counts = Vec::with_capacity(basis.len());
    let mut wronskians = Vec::with_capacity(basis.len());
    for k in 0..=n {
        let w = wronskian(basis, k);
        if w.is_zero() {
            // identically-zero Wronskian: degenerate family
            return Ok(EctVerdict {
                classification: EctClass::Neither,
                wronskian_root_data: counts,
            });
        }
        counts.push(sturm_count_open(
            &w,
            &Bound::Finite(a.clone()),
            &Bound::Finite(b.clone()),
        )?);
        wronskians.push(w);
    }
    let head_clear = counts[..n].iter().all(|&c| c == 0);
    let classification = if head_clear && counts[n] == 0 {
        EctClass::Ect
    } else if head_clear && counts[n] == 1 {
        // simple <=> not a root of W_n' <=> gcd(W_n, W_n') has no root there
        let g = wronskians[n].gcd(&wronskians[n].derivative());
        let multiple = if g.degree().unwrap_or(0) == 0 {
            0
        } else {
            sturm_count_open(&g, &Bound::Finite(a.clone()), &Bound::Finite(b.clone()))?
        };
        if multiple == 0 {
            EctClass::EctAccuracy1
        } else {
            EctClass::Neither
        }
    } else {
        EctClass::Neither
    };
    Ok(EctVerdict {
        classification,
        wronskian_root_data: counts,
    })
}
