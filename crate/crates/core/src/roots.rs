//! Exact real-root machinery for univariate rational polynomials.
//!
//! The central question asked of every vertex polynomial `g` is: where does
//! `g` first become negative on `(0, inf)`? The answer is either
//! immediately (lowest nonzero coefficient negative), never, or at a real
//! algebraic number isolated by Sturm-sequence bisection.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::{common_denominator, qi, simplest_between, Q};

/// Coefficients low to high, no trailing zeros.
pub type Poly = Vec<Q>;

pub fn trim(mut p: Poly) -> Poly {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

pub fn eval(p: &[Q], x: &Q) -> Q {
    p.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
}

pub fn derivative(p: &[Q]) -> Poly {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(d, c)| c * qi(d as i64))
        .collect()
}

/// Remainder of `a` divided by `b` (`b` nonzero).
pub fn rem(a: &[Q], b: &[Q]) -> Poly {
    let mut r = trim(a.to_vec());
    let lead = b.last().expect("nonzero divisor");
    while r.len() >= b.len() && !r.is_empty() {
        let shift = r.len() - b.len();
        let factor = r.last().unwrap() / lead;
        for (i, c) in b.iter().enumerate() {
            r[shift + i] -= &factor * c;
        }
        r.pop();
        r = trim(r);
    }
    r
}

/// Exact quotient `a / b`; panics when `b` does not divide `a`.
pub fn div_exact(a: &[Q], b: &[Q]) -> Poly {
    let mut r = trim(a.to_vec());
    let lead = b.last().expect("nonzero divisor").clone();
    if r.len() < b.len() {
        assert!(r.is_empty(), "inexact division");
        return Vec::new();
    }
    let mut quot = vec![Q::zero(); r.len() - b.len() + 1];
    while r.len() >= b.len() && !r.is_empty() {
        let shift = r.len() - b.len();
        let factor = r.last().unwrap() / &lead;
        for (i, c) in b.iter().enumerate() {
            r[shift + i] -= &factor * c;
        }
        quot[shift] = factor;
        r.pop();
        r = trim(r);
    }
    assert!(r.is_empty(), "inexact division");
    trim(quot)
}

fn monic(p: Poly) -> Poly {
    match p.last() {
        Some(lead) => {
            let lead = lead.clone();
            p.into_iter().map(|c| c / &lead).collect()
        }
        None => p,
    }
}

pub fn gcd(a: &[Q], b: &[Q]) -> Poly {
    let (mut x, mut y) = (trim(a.to_vec()), trim(b.to_vec()));
    while !y.is_empty() {
        let r = rem(&x, &y);
        x = y;
        y = r;
    }
    monic(x)
}

/// `p / gcd(p, p')`: same roots, all simple.
pub fn squarefree(p: &[Q]) -> Poly {
    let p = trim(p.to_vec());
    if p.len() <= 2 {
        return p;
    }
    let g = gcd(&p, &derivative(&p));
    if g.len() <= 1 {
        p
    } else {
        div_exact(&p, &g)
    }
}

/// Integer multiple with coprime coefficients and the same sign.
pub fn primitive_integer(p: &[Q]) -> Vec<BigInt> {
    let den = common_denominator(p.iter());
    let ints: Vec<BigInt> = p
        .iter()
        .map(|c| (c * Q::from_integer(den.clone())).to_integer())
        .collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() || g.is_one() {
        ints
    } else {
        ints.into_iter().map(|x| x / &g).collect()
    }
}

fn sign(x: &Q) -> i8 {
    match x.cmp(&Q::zero()) {
        Ordering::Less => -1,
        Ordering::Equal => 0,
        Ordering::Greater => 1,
    }
}

/// Sturm chain of a squarefree polynomial.
#[derive(Debug, Clone)]
pub struct Sturm {
    chain: Vec<Poly>,
}

impl Sturm {
    pub fn new(p: &[Q]) -> Self {
        let p = trim(p.to_vec());
        let mut chain = vec![p.clone()];
        let d = derivative(&p);
        if !d.is_empty() {
            chain.push(d);
            loop {
                let n = chain.len();
                let r = rem(&chain[n - 2], &chain[n - 1]);
                if r.is_empty() {
                    break;
                }
                chain.push(r.into_iter().map(|c| -c).collect());
            }
        }
        Self { chain }
    }

    fn variations(&self, x: &Q) -> usize {
        let mut count = 0;
        let mut last = 0i8;
        for p in &self.chain {
            let s = sign(&eval(p, x));
            if s != 0 {
                if last != 0 && s != last {
                    count += 1;
                }
                last = s;
            }
        }
        count
    }

    /// Distinct roots in `(a, b]`.
    pub fn count(&self, a: &Q, b: &Q) -> usize {
        self.variations(a).saturating_sub(self.variations(b))
    }
}

/// Cauchy bound: all real roots lie in `(-B, B)`.
pub fn root_bound(p: &[Q]) -> Q {
    let lead = p.last().expect("nonzero").abs();
    let m = p[..p.len() - 1]
        .iter()
        .map(|c| c.abs() / &lead)
        .max()
        .unwrap_or_else(Q::zero);
    m + Q::one()
}

/// A real root of a squarefree polynomial `h`, either known exactly or
/// bracketed by `lo < root < hi` with `h(lo), h(hi) != 0`.
///
/// `after` is a point past the root such that the analysed polynomial is
/// negative on `(root, after]`.
#[derive(Debug, Clone)]
pub struct AlgRoot {
    h: Poly,
    lo: Q,
    hi: Q,
    exact: Option<Q>,
    after: Q,
}

impl AlgRoot {
    pub fn lo(&self) -> &Q {
        &self.lo
    }

    pub fn hi(&self) -> &Q {
        &self.hi
    }

    pub fn exact(&self) -> Option<&Q> {
        self.exact.as_ref()
    }

    pub fn after(&self) -> &Q {
        &self.after
    }

    pub fn width(&self) -> Q {
        &self.hi - &self.lo
    }

    pub fn defining_poly(&self) -> &[Q] {
        &self.h
    }

    /// Halves the bracket. Returns false once exact.
    pub fn bisect(&mut self) -> bool {
        if self.exact.is_some() {
            return false;
        }
        let mid = (&self.lo + &self.hi) / qi(2);
        let at_mid = eval(&self.h, &mid);
        if at_mid.is_zero() {
            self.lo = mid.clone();
            self.hi = mid.clone();
            self.exact = Some(mid);
            return false;
        }
        if sign(&at_mid) == sign(&eval(&self.h, &self.lo)) {
            self.lo = mid;
        } else {
            self.hi = mid;
        }
        true
    }

    pub fn refine_to(&mut self, tol: &Q) {
        while self.width() > *tol && self.bisect() {}
    }

    /// Decides rationality: a rational root `p/q` of the primitive integer
    /// form has `q | lead`, so once the bracket is narrower than `1/lead^2`
    /// the simplest rational inside is the only candidate.
    pub fn identify_rational(&mut self) -> Option<Q> {
        if let Some(r) = &self.exact {
            return Some(r.clone());
        }
        let ints = primitive_integer(&self.h);
        let lead = ints.last().expect("nonzero").abs();
        let bound = Q::new(BigInt::one(), &lead * &lead * BigInt::from(2));
        self.refine_to(&bound);
        if let Some(r) = &self.exact {
            return Some(r.clone());
        }
        let cand = simplest_between(&self.lo, &self.hi);
        if *cand.denom() <= lead && eval(&self.h, &cand).is_zero() {
            self.lo = cand.clone();
            self.hi = cand.clone();
            self.exact = Some(cand.clone());
            return Some(cand);
        }
        None
    }

    /// Moves `after` toward the root while keeping it valid.
    pub fn tighten_after(&mut self, tol: &Q) {
        let root_hi = self.exact.clone().unwrap_or_else(|| self.hi.clone());
        if self.exact.is_none() {
            self.refine_to(tol);
            self.after = self.hi.clone();
            return;
        }
        while &self.after - &root_hi > *tol {
            self.after = (&self.after + &root_hi) / qi(2);
        }
    }

    /// Strict comparison with a rational; refines until decided. Never
    /// returns `Equal` unless the root is exactly `r`.
    pub fn cmp_rational(&mut self, r: &Q) -> Ordering {
        loop {
            if let Some(x) = &self.exact {
                return x.cmp(r);
            }
            if self.hi <= *r && eval(&self.h, r) != Q::zero() || self.hi < *r {
                return Ordering::Less;
            }
            if self.lo >= *r && eval(&self.h, r) != Q::zero() || self.lo > *r {
                return Ordering::Greater;
            }
            if !self.bisect() {
                continue;
            }
        }
    }
}

/// Where a polynomial first turns negative on `(0, inf)`.
#[derive(Debug, Clone)]
pub enum Crossing {
    /// Negative on `(0, eps)`: lowest nonzero coefficient is negative.
    Immediate { degree: usize, coeff: Q },
    /// Never negative on `[0, inf)`.
    Never,
    At(AlgRoot),
}

/// First point past which `g` becomes negative. `g(0) < 0` counts as
/// immediate.
pub fn first_negative_crossing(g: &[Q]) -> Crossing {
    let g = trim(g.to_vec());
    let Some((k, c)) = g.iter().enumerate().find(|(_, c)| !c.is_zero()) else {
        return Crossing::Never;
    };
    if c.is_negative() {
        return Crossing::Immediate { degree: k, coeff: c.clone() };
    }
    let reduced: Poly = g[k..].to_vec();
    if reduced.iter().all(|c| !c.is_negative()) {
        return Crossing::Never;
    }
    let h = squarefree(&reduced);
    let sturm = Sturm::new(&h);
    let bound = root_bound(&h);
    let zero = Q::zero();
    let mut stack = vec![(zero.clone(), bound.clone())];
    // Depth-first, left half first, so roots come out in ascending order.
    while let Some((a, b)) = stack.pop() {
        let count = sturm.count(&a, &b);
        if count == 0 {
            continue;
        }
        let h_a = eval(&h, &a);
        if count == 1 && !h_a.is_zero() {
            let h_b = eval(&h, &b);
            let (exact, lo, hi) = if h_b.is_zero() {
                (Some(b.clone()), b.clone(), b.clone())
            } else {
                (None, a.clone(), b.clone())
            };
            match sign_after(&reduced, exact.as_ref(), &hi) {
                s if s < 0 => {
                    let after = match &exact {
                        Some(r) => root_free_point(&sturm, r, &bound),
                        None => hi.clone(),
                    };
                    return Crossing::At(AlgRoot { h, lo, hi, exact, after });
                }
                _ => continue,
            }
        }
        let mid = (&a + &b) / qi(2);
        stack.push((mid.clone(), b));
        stack.push((a, mid));
    }
    Crossing::Never
}

/// Sign of `p` just to the right of a root.
fn sign_after(p: &[Q], exact: Option<&Q>, hi: &Q) -> i8 {
    match exact {
        None => sign(&eval(p, hi)),
        Some(r) => {
            let mut d = p.to_vec();
            loop {
                let v = eval(&d, r);
                if !v.is_zero() {
                    return sign(&v);
                }
                d = derivative(&d);
                if d.is_empty() {
                    return 0;
                }
            }
        }
    }
}

/// A point `x > r` with no root of the chain's polynomial in `(r, x]`.
fn root_free_point(sturm: &Sturm, r: &Q, bound: &Q) -> Q {
    let mut step = bound - r;
    if !step.is_positive() {
        step = Q::one();
    }
    loop {
        let x = r + &step;
        if sturm.count(r, &x) == 0 {
            return x;
        }
        step /= qi(2);
    }
}

/// Minimum over a set of crossings.
#[derive(Debug, Clone)]
pub enum MinValue {
    Exact(Q),
    Interval { lo: Q, hi: Q },
}

#[derive(Debug, Clone)]
pub struct MinCrossing {
    pub value: MinValue,
    /// Index (into the caller's list) of a minimizer.
    pub argmin: usize,
    /// A point past the minimum where the minimizer is negative.
    pub witness_point: Q,
}

/// Minimum of finitely many crossing roots, exact when it is rational and
/// otherwise a bracket of width at most `tol`.
pub fn min_crossing(roots: Vec<(usize, AlgRoot)>, tol: &Q) -> Option<MinCrossing> {
    let mut cands = roots;
    if cands.is_empty() {
        return None;
    }
    // Prune anything that cannot be below the best upper bound.
    let best_hi = cands.iter().map(|(_, r)| r.hi.clone()).min().unwrap();
    cands.retain(|(_, r)| r.lo < best_hi || (r.exact.is_some() && r.lo == best_hi));

    for (_, r) in cands.iter_mut() {
        r.identify_rational();
    }
    let best_exact = cands
        .iter()
        .filter_map(|(i, r)| r.exact.clone().map(|x| (x, *i)))
        .min();
    if let Some((rmin, _)) = &best_exact {
        let rmin = rmin.clone();
        cands.retain_mut(|(_, r)| r.exact.is_some() || r.cmp_rational(&rmin) == Ordering::Less);
        cands.retain(|(_, r)| r.exact.as_ref().is_none_or(|x| *x == rmin));
    }
    let irrational: Vec<usize> = (0..cands.len()).filter(|&k| cands[k].1.exact.is_none()).collect();
    if irrational.is_empty() {
        let (idx, root) = cands
            .iter_mut()
            .min_by(|a, b| a.0.cmp(&b.0))
            .expect("nonempty");
        root.tighten_after(tol);
        return Some(MinCrossing {
            value: MinValue::Exact(root.exact.clone().unwrap()),
            argmin: *idx,
            witness_point: root.after.clone(),
        });
    }
    let mut irr: Vec<(usize, AlgRoot)> = cands.into_iter().filter(|(_, r)| r.exact.is_none()).collect();
    for (_, r) in irr.iter_mut() {
        r.refine_to(tol);
        r.after = r.hi.clone();
    }
    let lo = irr.iter().map(|(_, r)| r.lo.clone()).min().unwrap();
    let (idx, root) = irr
        .iter()
        .min_by(|a, b| a.1.hi.cmp(&b.1.hi).then(a.0.cmp(&b.0)))
        .unwrap();
    Some(MinCrossing {
        value: MinValue::Interval { lo, hi: root.hi.clone() },
        argmin: *idx,
        witness_point: root.after.clone(),
    })
}
