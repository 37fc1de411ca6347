//! Sparse multilinear polynomials over tagged variables `xi^stage_{k+offset}`
//! and their restrictions to hypercube vertices.
//!
//! A term is a subset of the variable list, stored as a bit mask over
//! positions in [`MultilinearPoly::vars`]. Restricting a polynomial to the
//! vertex of `[0, delta]^n` whose coordinates in `S` equal `delta` gives the
//! univariate polynomial `g_S(delta) = sum_{T subset S} c_T delta^|T|`.
//! All `2^n` restrictions are produced with a subset-sum (zeta) transform,
//! one layer per degree, in blocks of low bits so memory stays bounded.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::AddAssign;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{common_denominator, Q};

/// Default cap on the number of variables for exhaustive vertex enumeration.
pub const DEFAULT_VAR_LIMIT: usize = 28;

/// Number of low bits handled per zeta block.
const BLOCK_BITS: usize = 14;

/// Variable `xi^{stage}_{k+offset}`. Orders by stage, then offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarTag {
    pub stage: usize,
    pub offset: i32,
}

impl VarTag {
    pub fn new(stage: usize, offset: i32) -> Self {
        Self { stage, offset }
    }

    pub fn shifted(self, by: i32) -> Self {
        Self { stage: self.stage, offset: self.offset + by }
    }

    pub fn reflected(self) -> Self {
        Self { stage: self.stage, offset: -self.offset }
    }
}

impl fmt::Display for VarTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ξ[{},{}]", self.stage, self.offset)
    }
}

/// Subset of variable positions, bit `p` set when `vars[p]` is present.
pub type SubsetCode = u64;

/// Bit-string rendering of a subset over `n` variables, position 0 first.
pub fn subset_bits(code: SubsetCode, n: usize) -> String {
    (0..n).map(|p| if code >> p & 1 == 1 { '1' } else { '0' }).collect()
}

/// Dense univariate polynomial, `coeffs[d]` multiplies `delta^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct UniPoly {
    coeffs: Vec<Q>,
}

impl UniPoly {
    pub fn new(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn coeff(&self, d: usize) -> Q {
        self.coeffs.get(d).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.coeffs.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
    }

    /// Lowest-degree nonzero coefficient together with its degree.
    pub fn lowest_term(&self) -> Option<(usize, &Q)> {
        self.coeffs.iter().enumerate().find(|(_, c)| !c.is_zero())
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (d, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match d {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})·δ")?,
                _ => write!(f, "({c})·δ^{d}")?,
            }
        }
        Ok(())
    }
}

/// Multilinear polynomial with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultilinearPoly {
    vars: Vec<VarTag>,
    terms: BTreeMap<SubsetCode, Q>,
}

impl MultilinearPoly {
    /// Zero coefficients are dropped.
    pub fn new(vars: Vec<VarTag>, terms: BTreeMap<SubsetCode, Q>) -> Result<Self> {
        if vars.len() > 63 {
            return Err(Error::Capacity { vars: vars.len(), limit: 63 });
        }
        let full: SubsetCode = (1u64 << vars.len()) - 1;
        if let Some(code) = terms.keys().find(|&&c| c & !full != 0) {
            return Err(Error::InvalidInput(format!(
                "term code {code:#b} references missing variables"
            )));
        }
        let terms = terms.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Ok(Self { vars, terms })
    }

    /// Builds from terms given as variable lists.
    pub fn from_tag_terms<'a>(
        vars: Vec<VarTag>,
        terms: impl IntoIterator<Item = (&'a [VarTag], Q)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<SubsetCode, Q> = BTreeMap::new();
        for (tags, c) in terms {
            let mut code = 0;
            for t in tags {
                let p = vars
                    .iter()
                    .position(|v| v == t)
                    .ok_or(Error::MissingVariable(*t))?;
                if code >> p & 1 == 1 {
                    return Err(Error::InvalidInput(format!("{t} repeated in a term")));
                }
                code |= 1 << p;
            }
            *map.entry(code).or_insert_with(Q::zero) += c;
        }
        Self::new(vars, map)
    }

    pub fn vars(&self) -> &[VarTag] {
        &self.vars
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> &BTreeMap<SubsetCode, Q> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> Q {
        self.terms.get(&0).cloned().unwrap_or_else(Q::zero)
    }

    pub fn position(&self, tag: VarTag) -> Option<usize> {
        self.vars.iter().position(|&v| v == tag)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|c| c.count_ones() as usize).max().unwrap_or(0)
    }

    /// Evaluates at a point given in variable order.
    pub fn eval(&self, point: &[Q]) -> Result<Q> {
        if point.len() < self.vars.len() {
            return Err(Error::MissingVariable(self.vars[point.len()]));
        }
        Ok(self
            .terms
            .iter()
            .map(|(&code, c)| {
                let mut v = c.clone();
                for (p, x) in point.iter().enumerate().take(self.vars.len()) {
                    if code >> p & 1 == 1 {
                        v *= x;
                    }
                }
                v
            })
            .sum())
    }

    /// Evaluates at a point given by tag. Every variable must be assigned.
    pub fn eval_tags(&self, point: &BTreeMap<VarTag, Q>) -> Result<Q> {
        let values = self
            .vars
            .iter()
            .map(|t| point.get(t).cloned().ok_or(Error::MissingVariable(*t)))
            .collect::<Result<Vec<_>>>()?;
        self.eval(&values)
    }

    /// Value at the vertex with coordinates `delta` on `subset`, 0 elsewhere.
    pub fn eval_vertex(&self, subset: SubsetCode, delta: &Q) -> Q {
        self.vertex_restriction(subset).eval(delta)
    }

    /// `g_S(delta) = sum_{T subset S} c_T delta^|T|`.
    pub fn vertex_restriction(&self, subset: SubsetCode) -> UniPoly {
        let mut coeffs = vec![Q::zero(); self.max_degree() + 1];
        for (&code, c) in &self.terms {
            if code & !subset == 0 {
                coeffs[code.count_ones() as usize] += c;
            }
        }
        UniPoly::new(coeffs)
    }

    /// Same polynomial over a different (super)set of variables.
    pub fn with_vars(&self, vars: &[VarTag]) -> Result<Self> {
        let map: Vec<usize> = self
            .vars
            .iter()
            .map(|t| vars.iter().position(|v| v == t).ok_or(Error::MissingVariable(*t)))
            .collect::<Result<_>>()?;
        let terms = self
            .terms
            .iter()
            .map(|(&code, c)| {
                let mut out = 0;
                for (p, &q) in map.iter().enumerate() {
                    if code >> p & 1 == 1 {
                        out |= 1 << q;
                    }
                }
                (out, c.clone())
            })
            .collect();
        Self::new(vars.to_vec(), terms)
    }

    /// Terms as `(variables, coefficient)` pairs.
    pub fn tag_terms(&self) -> impl Iterator<Item = (Vec<VarTag>, &Q)> + '_ {
        self.terms.iter().map(|(&code, c)| {
            let tags = (0..self.vars.len())
                .filter(|p| code >> p & 1 == 1)
                .map(|p| self.vars[p])
                .collect();
            (tags, c)
        })
    }

    /// Common denominator `L > 0` and the integer terms `(code, L * c_T)`.
    pub fn integer_terms(&self) -> (BigInt, Vec<(SubsetCode, BigInt)>) {
        let den = common_denominator(self.terms.values());
        let terms = self
            .terms
            .iter()
            .map(|(&code, c)| {
                let scaled = c * Q::from_integer(den.clone());
                debug_assert!(scaled.is_integer());
                (code, scaled.to_integer())
            })
            .collect();
        (den, terms)
    }

    /// Prints in the stable text format, optionally with `x_1..x_n` labels.
    pub fn render(&self, relabel: bool) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let name = |p: usize| {
            if relabel {
                format!("x_{}", p + 1)
            } else {
                self.vars[p].to_string()
            }
        };
        self.terms
            .iter()
            .map(|(&code, c)| {
                let mut s = format!("({c})");
                for p in (0..self.vars.len()).filter(|p| code >> p & 1 == 1) {
                    s.push('·');
                    s.push_str(&name(p));
                }
                s
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// Collects all `2^n` vertex restrictions in ascending subset order.
    pub fn all_vertex_restrictions(&self, limit: usize) -> Result<Vec<(SubsetCode, UniPoly)>> {
        let (den, terms) = self.integer_terms();
        let enumerator = VertexEnumerator::new(self.num_vars(), &terms, limit)?;
        let den = Q::from_integer(den);
        let mut out = Vec::with_capacity(1 << self.num_vars());
        for high in 0..enumerator.block_count() {
            enumerator.visit_block_big(high, |code, coeffs| {
                let c = coeffs
                    .iter()
                    .map(|x| Q::from_integer(x.clone()) / &den)
                    .collect();
                out.push((code, UniPoly::new(c)));
            });
        }
        Ok(out)
    }
}

impl fmt::Display for MultilinearPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(false))
    }
}

/// Ring elements usable in the vertex zeta transform.
pub trait ZetaCoeff: Clone + Zero + for<'a> AddAssign<&'a Self> + Send + Sync {}
impl<T: Clone + Zero + for<'a> AddAssign<&'a T> + Send + Sync> ZetaCoeff for T {}

/// Enumerates integer-scaled vertex restrictions of one polynomial, block by
/// block. Block `h` covers the subset codes whose bits above the block width
/// equal `h`; within a block codes are visited in ascending order.
pub struct VertexEnumerator {
    n: usize,
    low_bits: usize,
    max_degree: usize,
    terms: Vec<(SubsetCode, BigInt)>,
    small: Option<Vec<(SubsetCode, i128)>>,
}

impl VertexEnumerator {
    pub fn new(n: usize, terms: &[(SubsetCode, BigInt)], limit: usize) -> Result<Self> {
        if n > limit.min(62) {
            return Err(Error::Capacity { vars: n, limit: limit.min(62) });
        }
        let max_degree = terms.iter().map(|(c, _)| c.count_ones() as usize).max().unwrap_or(0);
        // Any vertex value is a partial sum of |c_T|, so i128 is exact when
        // the total stays well inside its range.
        let total: BigInt = terms.iter().map(|(_, c)| c.abs()).sum();
        let small = (total.bits() < 120).then(|| {
            terms
                .iter()
                .map(|(code, c)| (*code, c.to_i128().expect("checked bound")))
                .collect()
        });
        Ok(Self {
            n,
            low_bits: n.min(BLOCK_BITS),
            max_degree,
            terms: terms.to_vec(),
            small,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn block_count(&self) -> u64 {
        1u64 << (self.n - self.low_bits)
    }

    /// Whether the machine-integer fast path applies.
    pub fn is_small(&self) -> bool {
        self.small.is_some()
    }

    pub fn small_terms(&self) -> Option<&[(SubsetCode, i128)]> {
        self.small.as_deref()
    }

    pub fn big_terms(&self) -> &[(SubsetCode, BigInt)] {
        &self.terms
    }

    /// Visits the vertices of block `high` with BigInt coefficients
    /// (`coeffs[d]` multiplies `delta^d`, length `max_degree + 1`).
    pub fn visit_block_big(&self, high: u64, visit: impl FnMut(SubsetCode, &[BigInt])) {
        self.visit_block(&self.terms, high, visit)
    }

    /// Generic block visitor over a caller-chosen coefficient ring.
    pub fn visit_block<T: ZetaCoeff>(
        &self,
        terms: &[(SubsetCode, T)],
        high: u64,
        mut visit: impl FnMut(SubsetCode, &[T]),
    ) {
        let width = 1usize << self.low_bits;
        let low_mask: SubsetCode = (width as SubsetCode) - 1;
        let mut layers: Vec<Vec<T>> = vec![vec![T::zero(); width]; self.max_degree + 1];
        for (code, c) in terms {
            if (code >> self.low_bits) & !high == 0 {
                let d = code.count_ones() as usize;
                layers[d][(code & low_mask) as usize] += c;
            }
        }
        for layer in layers.iter_mut() {
            zeta_subset_sums(layer);
        }
        let mut buf: Vec<T> = vec![T::zero(); self.max_degree + 1];
        let base = high << self.low_bits;
        for low in 0..width {
            for (d, layer) in layers.iter().enumerate() {
                buf[d] = layer[low].clone();
            }
            visit(base | low as SubsetCode, &buf);
        }
    }
}

/// In-place subset sums: `xs[S] <- sum_{T subset S} xs[T]`.
pub fn zeta_subset_sums<T: ZetaCoeff>(xs: &mut [T]) {
    let n = xs.len();
    assert!(n.is_power_of_two());
    let mut step = 1;
    while step < n {
        for block in xs.chunks_exact_mut(2 * step) {
            let (lo, hi) = block.split_at_mut(step);
            for (z, o) in lo.iter().zip(hi.iter_mut()) {
                *o += z;
            }
        }
        step *= 2;
    }
}

/// Exact value at a vertex given as a 0/1 pattern scaled by `delta`, computed
/// by direct substitution. Intended as an independent check.
pub fn naive_vertex_value(p: &MultilinearPoly, subset: SubsetCode, delta: &Q) -> Q {
    let point: Vec<Q> = (0..p.num_vars())
        .map(|i| if subset >> i & 1 == 1 { delta.clone() } else { Q::zero() })
        .collect();
    p.eval(&point).expect("full point")
}

/// Multiplies by `scale`.
pub fn scale(p: &MultilinearPoly, scale: &Q) -> MultilinearPoly {
    let terms = p.terms.iter().map(|(&k, c)| (k, c * scale)).collect();
    MultilinearPoly::new(p.vars.clone(), terms).expect("same vars")
}

/// Sum of polynomials sharing a variable list.
pub fn sum<'a>(polys: impl IntoIterator<Item = &'a MultilinearPoly>) -> Option<MultilinearPoly> {
    let mut iter = polys.into_iter();
    let first = iter.next()?;
    let mut terms = first.terms.clone();
    for p in iter {
        assert_eq!(p.vars, first.vars, "sum requires identical variable lists");
        for (&k, c) in &p.terms {
            *terms.entry(k).or_insert_with(Q::zero) += c;
        }
    }
    Some(MultilinearPoly::new(first.vars.clone(), terms).expect("same vars"))
}

/// True when the polynomial is the constant one.
pub fn is_one(p: &MultilinearPoly) -> bool {
    p.terms.len() == 1 && p.terms.get(&0).is_some_and(|c| c.is_one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use proptest::prelude::*;

    fn erk22_p1() -> MultilinearPoly {
        // P_1 at alpha = 1 over (xi^1_{k-1}, xi^1_k, xi^2_k) = (y, z, v):
        // z/2 + v/2 - y v/2 - z v/2.
        let vars = vec![VarTag::new(1, -1), VarTag::new(1, 0), VarTag::new(2, 0)];
        let mut t = BTreeMap::new();
        t.insert(0b010, q(1, 2));
        t.insert(0b100, q(1, 2));
        t.insert(0b101, q(-1, 2));
        t.insert(0b110, q(-1, 2));
        MultilinearPoly::new(vars, t).unwrap()
    }

    #[test]
    fn eval_examples() {
        let p = erk22_p1();
        assert_eq!(p.eval(&[qi(0), qi(0), qi(1)]).unwrap(), q(1, 2));
        assert_eq!(p.eval(&[qi(0), qi(0), qi(0)]).unwrap(), p.constant_term());
        assert!(matches!(p.eval(&[qi(0)]), Err(Error::MissingVariable(_))));
        let mut by_tag = BTreeMap::new();
        by_tag.insert(VarTag::new(1, -1), qi(1));
        assert!(p.eval_tags(&by_tag).is_err());
    }

    #[test]
    fn vertex_restriction_examples() {
        let p = erk22_p1();
        assert_eq!(p.vertex_restriction(0b111), UniPoly::new(vec![qi(0), qi(1), qi(-1)]));
        assert!(p.vertex_restriction(0).is_zero());
        let all = p.all_vertex_restrictions(DEFAULT_VAR_LIMIT).unwrap();
        assert_eq!(all.len(), 8);
        for (code, g) in &all {
            assert_eq!(*g, p.vertex_restriction(*code));
        }
    }

    #[test]
    fn single_term_restrictions() {
        let vars = vec![VarTag::new(1, 0), VarTag::new(2, 0)];
        let mut t = BTreeMap::new();
        t.insert(0b01, q(3, 7));
        let p = MultilinearPoly::new(vars, t).unwrap();
        for (code, g) in p.all_vertex_restrictions(10).unwrap() {
            if code & 1 == 1 {
                assert_eq!(g, UniPoly::new(vec![qi(0), q(3, 7)]));
            } else {
                assert!(g.is_zero());
            }
        }
    }

    #[test]
    fn capacity_error() {
        let vars: Vec<VarTag> = (0..5).map(|i| VarTag::new(1, -i)).collect();
        let p = MultilinearPoly::new(vars, BTreeMap::new()).unwrap();
        assert!(matches!(
            p.all_vertex_restrictions(4),
            Err(Error::Capacity { vars: 5, limit: 4 })
        ));
    }

    #[test]
    fn render_format() {
        let p = erk22_p1();
        assert_eq!(
            p.render(true),
            "(1/2)·x_2 + (1/2)·x_3 + (-1/2)·x_1·x_3 + (-1/2)·x_2·x_3"
        );
        assert!(p.render(false).starts_with("(1/2)·ξ[1,0]"));
    }

    #[test]
    fn blocks_cover_large_inputs() {
        // 16 variables forces two low-bit blocks.
        let vars: Vec<VarTag> = (0..16).map(|i| VarTag::new(1 + i / 4, -(i as i32 % 4))).collect();
        let mut t = BTreeMap::new();
        t.insert(0, qi(1));
        t.insert(1 << 15 | 1, q(-2, 3));
        t.insert(1 << 14 | 1 << 3, q(5, 2));
        let p = MultilinearPoly::new(vars, t).unwrap();
        let all = p.all_vertex_restrictions(DEFAULT_VAR_LIMIT).unwrap();
        assert_eq!(all.len(), 1 << 16);
        for (i, (code, g)) in all.iter().enumerate() {
            assert_eq!(*code, i as u64);
            if code.count_ones() % 5 == 0 || code >> 14 != 0 {
                assert_eq!(*g, p.vertex_restriction(*code));
            }
        }
    }

    fn arb_poly(max_vars: usize) -> impl Strategy<Value = MultilinearPoly> {
        (1..=max_vars).prop_flat_map(|n| {
            let full = (1u64 << n) - 1;
            proptest::collection::btree_map(0..=full, (-20i64..=20, 1i64..=9), 0..12).prop_map(
                move |m| {
                    let vars = (0..n).map(|i| VarTag::new(i / 3 + 1, -(i as i32 % 3))).collect();
                    let terms = m.into_iter().map(|(k, (a, b))| (k, q(a, b))).collect();
                    MultilinearPoly::new(vars, terms).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn zeta_matches_naive_substitution(p in arb_poly(10), dn in 1i64..7, dd in 1i64..5) {
            let delta = q(dn, dd);
            for (code, g) in p.all_vertex_restrictions(DEFAULT_VAR_LIMIT).unwrap() {
                prop_assert_eq!(g.eval(&delta), naive_vertex_value(&p, code, &delta));
            }
        }

        #[test]
        fn vertices_bound_the_box(p in arb_poly(6), seed in any::<u64>(), dn in 1i64..5) {
            use rand::{Rng, SeedableRng};
            let delta = q(dn, 2);
            let vmin = p
                .all_vertex_restrictions(DEFAULT_VAR_LIMIT)
                .unwrap()
                .iter()
                .map(|(_, g)| g.eval(&delta))
                .min()
                .unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..300 {
                let point: Vec<Q> = (0..p.num_vars())
                    .map(|_| &delta * q(rng.gen_range(0..=64), 64))
                    .collect();
                prop_assert!(p.eval(&point).unwrap() >= vmin);
            }
        }
    }
}
