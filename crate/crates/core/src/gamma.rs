//! The positivity step-size coefficient: the largest `delta` such that every
//! `P_i` is nonnegative on `[0, delta]^n`.
//!
//! A multilinear polynomial attains its minimum over a box at a vertex, and
//! the box condition is monotone in `delta`, so `gamma` is the smallest first
//! negative crossing over all vertex polynomials `g_{i,S}(delta)`. Vertex
//! polynomials are enumerated in integer arithmetic, reduced to primitive
//! form and deduplicated; only those with a negative coefficient can ever
//! cross and need root isolation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{ssp_coefficient, RadiusResult};
use crate::error::{Error, Result};
use crate::multilinear::{subset_bits, MultilinearPoly, SubsetCode, VarTag, VertexEnumerator, DEFAULT_VAR_LIMIT};
use crate::polygen::{generate, PropagationSet, StencilSpec};
use crate::rational::{q, qi, Q};
use crate::roots::{self, Crossing, MinValue};
use crate::tableau::{make_family, ButcherTableau, FamilyKind};

/// Default width of certified intervals, `2^-40`.
pub fn default_tol() -> Q {
    Q::new(BigInt::one(), BigInt::one() << 40)
}

/// A vertex: polynomial offset `i` and subset `S` of coordinates set to `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VertexRef {
    pub poly: i32,
    pub subset: SubsetCode,
}

/// Negative evaluation `P_i(vertex(S, delta)) < 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub poly: i32,
    pub subset: String,
    pub vertex: Vec<VarTag>,
    #[serde(with = "crate::rational::serde_q")]
    pub delta: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub value: Q,
}

/// Lowest nonzero coefficient of `g_{i,S}` is negative, so `g < 0` on `(0, eps)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZeroWitness {
    pub poly: i32,
    pub subset: String,
    pub vertex: Vec<VarTag>,
    pub degree: usize,
    #[serde(with = "crate::rational::serde_q")]
    pub coeff: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GammaCertificate {
    /// All `P_i >= 0` on `[0, lower]^n`; `None` only when unbounded.
    #[serde(with = "crate::rational::serde_q_opt")]
    pub lower: Option<Q>,
    /// `witness` is negative at `witness.delta`, which approaches `upper`.
    #[serde(with = "crate::rational::serde_q_opt")]
    pub upper: Option<Q>,
    #[serde(with = "crate::rational::serde_q_opt")]
    pub exact: Option<Q>,
    pub witness: Option<Witness>,
    pub zero_witness: Option<ZeroWitness>,
    pub unbounded: bool,
}

impl GammaCertificate {
    pub fn is_zero(&self) -> bool {
        self.zero_witness.is_some()
    }
}

/// Outcome of the exact box test at one `delta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Pass,
    Fail(Witness),
}

impl Condition {
    pub fn passed(&self) -> bool {
        matches!(self, Condition::Pass)
    }
}

/// Deduplicated vertex polynomials that have at least one negative
/// coefficient, each with its least `(i, S)` representative.
#[derive(Debug, Clone)]
pub struct VertexTable {
    vars: Vec<VarTag>,
    polys: BTreeMap<i32, MultilinearPoly>,
    entries: BTreeMap<Vec<BigInt>, VertexRef>,
    vertices: u64,
}

type LocalMap = HashMap<Vec<BigInt>, VertexRef>;

fn merge(mut a: LocalMap, b: LocalMap) -> LocalMap {
    if a.len() < b.len() {
        return merge(b, a);
    }
    for (k, v) in b {
        a.entry(k).and_modify(|w| *w = (*w).min(v)).or_insert(v);
    }
    a
}

fn record<T>(map: &mut LocalMap, coeffs: &[T], at: VertexRef)
where
    T: Clone + Integer + Signed + Into<BigInt>,
{
    if !coeffs.iter().any(|c| c.is_negative()) {
        return;
    }
    let mut len = coeffs.len();
    while len > 0 && coeffs[len - 1].is_zero() {
        len -= 1;
    }
    let g = coeffs[..len].iter().fold(T::zero(), |acc, c| acc.gcd(c));
    let key: Vec<BigInt> = coeffs[..len].iter().map(|c| (c.clone() / g.clone()).into()).collect();
    map.entry(key).and_modify(|w| *w = (*w).min(at)).or_insert(at);
}

impl VertexTable {
    pub fn build(ps: &PropagationSet, limit: usize) -> Result<Self> {
        let n = ps.vars().len();
        let mut enumerators = Vec::new();
        for (&i, p) in ps.polys() {
            let (_, terms) = p.integer_terms();
            enumerators.push((i, VertexEnumerator::new(n, &terms, limit)?));
        }
        let jobs: Vec<(usize, u64)> = enumerators
            .iter()
            .enumerate()
            .flat_map(|(e, (_, en))| (0..en.block_count()).map(move |h| (e, h)))
            .collect();
        let entries = jobs
            .par_iter()
            .map(|&(e, high)| {
                let (i, en) = &enumerators[e];
                let mut local = LocalMap::new();
                let at = |subset| VertexRef { poly: *i, subset };
                match en.small_terms() {
                    Some(small) => en.visit_block(small, high, |code, c| record(&mut local, c, at(code))),
                    None => en.visit_block_big(high, |code, c| record(&mut local, c, at(code))),
                }
                local
            })
            .reduce(LocalMap::new, merge);
        Ok(Self {
            vars: ps.vars().to_vec(),
            polys: ps.polys().clone(),
            entries: entries.into_iter().collect(),
            vertices: (enumerators.len() as u64) << n,
        })
    }

    /// Number of distinct primitive vertex polynomials with a negative coefficient.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of `(i, S)` pairs enumerated.
    pub fn vertices(&self) -> u64 {
        self.vertices
    }

    fn vertex_tags(&self, subset: SubsetCode) -> Vec<VarTag> {
        (0..self.vars.len()).filter(|p| subset >> p & 1 == 1).map(|p| self.vars[p]).collect()
    }

    /// Exact `P_i` at the vertex, by direct substitution.
    pub fn value_at(&self, at: VertexRef, delta: &Q) -> Q {
        let point: Vec<Q> = (0..self.vars.len())
            .map(|p| if at.subset >> p & 1 == 1 { delta.clone() } else { Q::zero() })
            .collect();
        self.polys[&at.poly].eval(&point).expect("full point")
    }

    fn witness(&self, at: VertexRef, delta: Q) -> Witness {
        Witness {
            poly: at.poly,
            subset: subset_bits(at.subset, self.vars.len()),
            vertex: self.vertex_tags(at.subset),
            value: self.value_at(at, &delta),
            delta,
        }
    }

    /// Least vertex whose restriction has a negative lowest coefficient.
    pub fn zero_test(&self) -> Option<ZeroWitness> {
        let at = self
            .entries
            .iter()
            .filter(|(k, _)| k.iter().find(|c| !c.is_zero()).is_some_and(|c| c.is_negative()))
            .map(|(_, at)| *at)
            .min()?;
        let g = self.polys[&at.poly].vertex_restriction(at.subset);
        let (degree, coeff) = g.lowest_term().expect("nonzero");
        Some(ZeroWitness {
            poly: at.poly,
            subset: subset_bits(at.subset, self.vars.len()),
            vertex: self.vertex_tags(at.subset),
            degree,
            coeff: coeff.clone(),
        })
    }

    /// Exact decision whether all `P_i >= 0` on `[0, delta]^n`.
    pub fn condition_at(&self, delta: &Q) -> Condition {
        let failing = self
            .entries
            .iter()
            .filter(|(k, _)| {
                let v = k.iter().rev().fold(Q::zero(), |acc, c| acc * delta + Q::from_integer(c.clone()));
                v.is_negative()
            })
            .map(|(_, at)| *at)
            .min();
        match failing {
            None => Condition::Pass,
            Some(at) => Condition::Fail(self.witness(at, delta.clone())),
        }
    }

    pub fn certificate(&self, tol: &Q) -> Result<GammaCertificate> {
        if !tol.is_positive() {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        if let Some(zero) = self.zero_test() {
            let at = self.lookup(&zero);
            let mut delta = qi(1);
            while !self.value_at(at, &delta).is_negative() {
                delta /= qi(2);
            }
            return Ok(GammaCertificate {
                lower: Some(Q::zero()),
                upper: Some(Q::zero()),
                exact: Some(Q::zero()),
                witness: Some(self.witness(at, delta)),
                zero_witness: Some(zero),
                unbounded: false,
            });
        }
        let mut refs = Vec::new();
        let mut found = Vec::new();
        for (key, at) in &self.entries {
            let poly: Vec<Q> = key.iter().map(|c| Q::from_integer(c.clone())).collect();
            if let Crossing::At(root) = roots::first_negative_crossing(&poly) {
                found.push((refs.len(), root));
                refs.push(*at);
            }
        }
        let Some(best) = min_crossing_by_vertex(found, &refs, tol) else {
            return Ok(GammaCertificate {
                lower: None,
                upper: None,
                exact: None,
                witness: None,
                zero_witness: None,
                unbounded: true,
            });
        };
        let (value, at, point) = best;
        let witness = self.witness(at, point);
        debug_assert!(witness.value.is_negative());
        Ok(match value {
            MinValue::Exact(r) => GammaCertificate {
                lower: Some(r.clone()),
                upper: Some(r.clone()),
                exact: Some(r),
                witness: Some(witness),
                zero_witness: None,
                unbounded: false,
            },
            MinValue::Interval { lo, hi } => GammaCertificate {
                lower: Some(lo),
                upper: Some(hi),
                exact: None,
                witness: Some(witness),
                zero_witness: None,
                unbounded: false,
            },
        })
    }

    fn lookup(&self, zero: &ZeroWitness) -> VertexRef {
        let subset = zero
            .subset
            .chars()
            .enumerate()
            .filter(|(_, ch)| *ch == '1')
            .fold(0u64, |acc, (p, _)| acc | 1 << p);
        VertexRef { poly: zero.poly, subset }
    }
}

/// Like [`roots::min_crossing`], but ties between equal exact minima are
/// broken by the least vertex so witnesses are deterministic.
fn min_crossing_by_vertex(
    found: Vec<(usize, roots::AlgRoot)>,
    refs: &[VertexRef],
    tol: &Q,
) -> Option<(MinValue, VertexRef, Q)> {
    let m = roots::min_crossing(found.clone(), tol)?;
    if let MinValue::Exact(r) = &m.value {
        // Other vertices crossing at the same rational point.
        let mut best = (refs[m.argmin], m.argmin);
        for (idx, root) in &found {
            let at = refs[*idx];
            if at < best.0 && root.lo() <= r && r <= root.hi() {
                let mut root = root.clone();
                if root.identify_rational().as_ref() == Some(r) {
                    best = (at, *idx);
                }
            }
        }
        if best.1 != m.argmin {
            let mut root = found.into_iter().find(|(i, _)| *i == best.1).unwrap().1;
            root.identify_rational();
            root.tighten_after(tol);
            return Some((m.value, best.0, root.after().clone()));
        }
    }
    Some((m.value, refs[m.argmin], m.witness_point))
}

pub fn gamma_zero_test(ps: &PropagationSet) -> Result<Option<ZeroWitness>> {
    Ok(VertexTable::build(ps, DEFAULT_VAR_LIMIT)?.zero_test())
}

pub fn condition_at(ps: &PropagationSet, delta: &Q) -> Result<Condition> {
    if delta.is_negative() {
        return Err(Error::InvalidInput("delta must be nonnegative".into()));
    }
    Ok(VertexTable::build(ps, DEFAULT_VAR_LIMIT)?.condition_at(delta))
}

pub fn gamma_of(ps: &PropagationSet, tol: &Q) -> Result<GammaCertificate> {
    VertexTable::build(ps, DEFAULT_VAR_LIMIT)?.certificate(tol)
}

pub fn compute_gamma(t: &ButcherTableau, s: &StencilSpec, tol: &Q) -> Result<GammaCertificate> {
    if !tol.is_positive() {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    gamma_of(&generate(t, s)?, tol)
}

/// Upper bound from randomly sampled vertices, for problems beyond the
/// enumeration limit. This is not a certificate.
#[derive(Debug, Clone, Serialize)]
pub struct SampledBound {
    pub label: &'static str,
    pub samples: usize,
    #[serde(with = "crate::rational::serde_q_opt")]
    pub upper: Option<Q>,
    pub witness: Option<Witness>,
}

pub fn sample_upper_bound(ps: &PropagationSet, samples: usize, seed: u64, tol: &Q) -> SampledBound {
    let n = ps.vars().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best: Option<(Q, VertexRef)> = None;
    for _ in 0..samples {
        let subset = rng.gen::<u64>() & mask;
        for (&i, p) in ps.polys() {
            let g = p.vertex_restriction(subset);
            let bound = match roots::first_negative_crossing(g.coeffs()) {
                Crossing::Never => continue,
                Crossing::Immediate { .. } => Q::zero(),
                Crossing::At(mut root) => {
                    root.identify_rational();
                    root.refine_to(tol);
                    root.hi().clone()
                }
            };
            let at = VertexRef { poly: i, subset };
            if best.as_ref().is_none_or(|(b, w)| bound.cmp(b).then(at.cmp(w)) == Ordering::Less) {
                best = Some((bound, at));
            }
        }
    }
    let witness = best.as_ref().map(|(bound, at)| {
        let p = &ps.polys()[&at.poly];
        let mut delta = if bound.is_zero() { qi(1) } else { bound.clone() };
        if bound.is_zero() {
            while !p.eval_vertex(at.subset, &delta).is_negative() {
                delta /= qi(2);
            }
        } else {
            while !p.eval_vertex(at.subset, &delta).is_negative() {
                delta += tol;
            }
        }
        let tags = (0..n).filter(|b| at.subset >> b & 1 == 1).map(|b| ps.vars()[b]).collect();
        Witness {
            poly: at.poly,
            subset: subset_bits(at.subset, n),
            vertex: tags,
            value: p.eval_vertex(at.subset, &delta),
            delta,
        }
    });
    SampledBound {
        label: "not a certificate",
        samples,
        upper: best.map(|(b, _)| b),
        witness,
    }
}

/// One parameter point of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    #[serde(with = "crate::rational::serde_q")]
    pub alpha: Q,
    #[serde(with = "crate::rational::serde_q_opt")]
    pub beta: Option<Q>,
    pub certificate: Option<GammaCertificate>,
    pub ssp: Option<RadiusResult>,
    /// Reason the point was skipped (singular parameter).
    pub skipped: Option<String>,
}

/// Grid `lo, lo + step, ..., <= hi`.
pub fn grid(lo: &Q, hi: &Q, step: &Q) -> Result<Vec<Q>> {
    if !step.is_positive() {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    if lo > hi {
        return Err(Error::InvalidInput(format!("empty range [{lo}, {hi}]")));
    }
    let mut out = Vec::new();
    let mut x = lo.clone();
    while x <= *hi {
        out.push(x.clone());
        x += step;
    }
    Ok(out)
}

/// Evaluates a family at the given parameter tuples (`[alpha]` or
/// `[alpha, beta]`), in parallel, preserving order.
pub fn sweep_points(
    kind: FamilyKind,
    points: &[Vec<Q>],
    stencil: &StencilSpec,
    tol: &Q,
    with_ssp: bool,
) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(Error::InvalidInput("empty sweep".into()));
    }
    points
        .par_iter()
        .map(|params| {
            let alpha = params[0].clone();
            let beta = params.get(1).cloned();
            let t = match make_family(kind, params) {
                Ok(t) => t,
                Err(Error::ParameterDomain { constraint, .. }) => {
                    return Ok(SweepRow { alpha, beta, certificate: None, ssp: None, skipped: Some(constraint) });
                }
                Err(e) => return Err(e),
            };
            let certificate = compute_gamma(&t, stencil, tol)?;
            let ssp = with_ssp.then(|| ssp_coefficient(&t, tol));
            Ok(SweepRow { alpha, beta, certificate: Some(certificate), ssp, skipped: None })
        })
        .collect()
}

/// Sweeps `alpha` over a grid; Case I takes a fixed `beta`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    kind: FamilyKind,
    lo: &Q,
    hi: &Q,
    step: &Q,
    beta: Option<&Q>,
    stencil: &StencilSpec,
    tol: &Q,
    with_ssp: bool,
) -> Result<Vec<SweepRow>> {
    let points: Vec<Vec<Q>> = grid(lo, hi, step)?
        .into_iter()
        .map(|a| match (kind.arity(), beta) {
            (2, Some(b)) => Ok(vec![a, b.clone()]),
            (2, None) => Err(Error::InvalidInput("this family needs beta".into())),
            _ => Ok(vec![a]),
        })
        .collect::<Result<_>>()?;
    sweep_points(kind, &points, stencil, tol, with_ssp)
}

pub const SWEEP_CSV_HEADER: &str =
    "param_alpha,param_beta,gamma_exact,gamma_lo,gamma_hi,witness_poly,witness_subset,ssp";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |x: &Option<Q>| x.as_ref().map_or(String::new(), |v| v.to_string());
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let beta = opt(&row.beta);
        let line = match &row.certificate {
            None => format!(
                "{},{},skipped: {},,,,,",
                row.alpha,
                beta,
                row.skipped.as_deref().unwrap_or("")
            ),
            Some(c) => {
                let lo = if c.unbounded { "inf".to_string() } else { opt(&c.lower) };
                let hi = if c.unbounded { "inf".to_string() } else { opt(&c.upper) };
                let (wp, ws) = match (&c.zero_witness, &c.witness) {
                    (Some(z), _) => (z.poly.to_string(), z.subset.clone()),
                    (None, Some(w)) => (w.poly.to_string(), w.subset.clone()),
                    _ => (String::new(), String::new()),
                };
                let ssp = row.ssp.as_ref().map_or(String::new(), |s| s.to_string());
                format!("{},{},{},{},{},{},{},{}", row.alpha, beta, opt(&c.exact), lo, hi, wp, ws, ssp)
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Membership in the bowtie region of Case I parameters.
pub fn in_bowtie(alpha: &Q, beta: &Q) -> bool {
    let two_thirds = q(2, 3);
    let edge = qi(1) - alpha / qi(2);
    (*alpha >= q(1, 2) && *alpha < two_thirds && *beta >= two_thirds && *beta <= edge)
        || (*alpha > two_thirds && *alpha <= qi(1) && *beta >= edge && *beta <= two_thirds)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionCell {
    #[serde(with = "crate::rational::serde_q")]
    pub alpha: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub beta: Q,
    pub in_bowtie: bool,
    /// `None` at singular parameter points.
    pub condition_at_1: Option<bool>,
    pub gamma_zero: Option<bool>,
    pub singular: Option<String>,
}

pub fn region_cell(alpha: &Q, beta: &Q) -> Result<RegionCell> {
    let in_b = in_bowtie(alpha, beta);
    let t = match make_family(FamilyKind::Erk33CaseI, &[alpha.clone(), beta.clone()]) {
        Ok(t) => t,
        Err(Error::ParameterDomain { constraint, .. }) => {
            return Ok(RegionCell {
                alpha: alpha.clone(),
                beta: beta.clone(),
                in_bowtie: in_b,
                condition_at_1: None,
                gamma_zero: None,
                singular: Some(constraint),
            });
        }
        Err(e) => return Err(e),
    };
    let table = VertexTable::build(&generate(&t, &StencilSpec::upwind())?, DEFAULT_VAR_LIMIT)?;
    Ok(RegionCell {
        alpha: alpha.clone(),
        beta: beta.clone(),
        in_bowtie: in_b,
        condition_at_1: Some(table.condition_at(&qi(1)).passed()),
        gamma_zero: Some(table.zero_test().is_some()),
        singular: None,
    })
}

/// Default Case I grid spacing.
pub fn default_region_spacing() -> Q {
    q(1, 32)
}

/// Scans `[1/2, 1]^2` with the given spacing, rows ordered by `(alpha, beta)`.
pub fn region_scan(spacing: &Q) -> Result<Vec<RegionCell>> {
    let axis = grid(&q(1, 2), &qi(1), spacing)?;
    let points: Vec<(Q, Q)> = axis
        .iter()
        .flat_map(|a| axis.iter().map(move |b| (a.clone(), b.clone())))
        .collect();
    points.par_iter().map(|(a, b)| region_cell(a, b)).collect()
}

pub const REGION_CSV_HEADER: &str = "alpha,beta,in_bowtie,condition_at_1,gamma_zero";

pub fn region_csv(cells: &[RegionCell]) -> String {
    let flag = |x: Option<bool>| x.map_or("singular".to_string(), |b| b.to_string());
    let mut out = String::from(REGION_CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.alpha,
            c.beta,
            c.in_bowtie,
            flag(c.condition_at_1),
            flag(c.gamma_zero)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilinear::naive_vertex_value;
    use crate::polygen::subset_of;
    use crate::tableau::{forward_euler, rk4_classical};
    use proptest::prelude::*;

    fn upwind(t: &ButcherTableau) -> PropagationSet {
        generate(t, &StencilSpec::upwind()).unwrap()
    }

    fn erk22(a: Q) -> ButcherTableau {
        make_family(FamilyKind::Erk22, &[a]).unwrap()
    }

    fn exact_gamma(t: &ButcherTableau, s: &StencilSpec) -> Q {
        compute_gamma(t, s, &default_tol()).unwrap().exact.expect("exact")
    }

    /// Naive oracle: every `P_i` at every vertex by direct substitution.
    fn naive_condition(ps: &PropagationSet, delta: &Q) -> bool {
        let n = ps.vars().len();
        ps.polys()
            .values()
            .all(|p| (0..1u64 << n).all(|s| !naive_vertex_value(p, s, delta).is_negative()))
    }

    #[test]
    fn zero_test_examples() {
        let ps = upwind(&erk22(q(1, 4)));
        let z = gamma_zero_test(&ps).unwrap().unwrap();
        assert_eq!((z.poly, z.degree), (1, 1));
        assert!(z.coeff.is_negative());
        // The vertex used in the hand proof: (2 alpha - 1) / (2 alpha) = -1.
        let s = subset_of(ps.vars(), &[VarTag::new(1, -1), VarTag::new(1, 0)]).unwrap();
        let g = ps.poly(1).unwrap().vertex_restriction(s);
        assert_eq!(g.lowest_term().map(|(d, c)| (d, c.clone())), Some((1, qi(-1))));

        let t = make_family(FamilyKind::Erk33CaseIII, &[qi(1)]).unwrap();
        let ps = upwind(&t);
        let z = gamma_zero_test(&ps).unwrap().unwrap();
        let at = VertexRef { poly: z.poly, subset: subset_of(ps.vars(), &z.vertex).unwrap() };
        let g = ps.poly(at.poly).unwrap().vertex_restriction(at.subset);
        assert_eq!(g.lowest_term().map(|(d, c)| (d, c.clone())), Some((z.degree, z.coeff.clone())));
        assert!(z.coeff.is_negative());

        assert!(gamma_zero_test(&upwind(&erk22(qi(1)))).unwrap().is_none());
    }

    #[test]
    fn condition_examples() {
        let t = make_family(FamilyKind::Erk33CaseI, &[q(1, 2), q(3, 4)]).unwrap();
        assert!(condition_at(&upwind(&t), &qi(1)).unwrap().passed());
        let ps = upwind(&erk22(qi(1)));
        assert!(condition_at(&ps, &qi(1)).unwrap().passed());
        match condition_at(&ps, &(qi(1) + q(1, 1_000_000))).unwrap() {
            Condition::Fail(w) => {
                assert_eq!(w.poly, 1);
                assert!(w.value.is_negative());
            }
            Condition::Pass => panic!("must fail past 1"),
        }
        assert!(condition_at(&upwind(&rk4_classical()), &qi(0)).unwrap().passed());
    }

    #[test]
    fn known_gamma_values() {
        let up = StencilSpec::upwind();
        assert_eq!(exact_gamma(&erk22(qi(1)), &up), qi(1));
        assert_eq!(exact_gamma(&erk22(qi(2)), &up), q(1, 2));
        let t = make_family(FamilyKind::Erk33CaseII, &[q(7, 16)]).unwrap();
        assert_eq!(exact_gamma(&t, &up), q(7, 8));
        assert_eq!(exact_gamma(&forward_euler(), &up), qi(1));
        assert_eq!(exact_gamma(&erk22(q(3, 4)), &StencilSpec::heat()), q(1, 2));
        assert_eq!(exact_gamma(&erk22(qi(1)), &StencilSpec::centered()), qi(0));
        let rk4 = compute_gamma(&rk4_classical(), &up, &default_tol()).unwrap();
        assert_eq!(rk4.zero_witness.as_ref().unwrap().poly, 3);
    }

    #[test]
    fn closed_forms_at_many_points() {
        let up = StencilSpec::upwind();
        // ERK22: 0 below 1/2, 1 on [1/2, 1], 1/alpha above.
        for k in 1..=25 {
            let alpha = q(k, 10);
            let expected = if alpha < q(1, 2) {
                qi(0)
            } else if alpha <= qi(1) {
                qi(1)
            } else {
                qi(1) / &alpha
            };
            assert_eq!(exact_gamma(&erk22(alpha.clone()), &up), expected, "alpha = {alpha}");
        }
        // Case II: 2 alpha on [3/8, 1/2), 1 on [1/2, 3/4], 0 outside [3/8, 3/4].
        for k in 1..=25 {
            let alpha = q(k, 24);
            let t = make_family(FamilyKind::Erk33CaseII, &[alpha.clone()]).unwrap();
            let expected = if alpha < q(3, 8) || alpha > q(3, 4) {
                qi(0)
            } else if alpha < q(1, 2) {
                qi(2) * &alpha
            } else {
                qi(1)
            };
            assert_eq!(exact_gamma(&t, &up), expected, "alpha = {alpha}");
        }
        for k in 1..=25 {
            let alpha = if k % 2 == 0 { q(k, 7) } else { q(-k, 5) };
            let t = make_family(FamilyKind::Erk33CaseIII, &[alpha]).unwrap();
            assert_eq!(exact_gamma(&t, &up), qi(0));
        }
    }

    #[test]
    fn certificate_soundness() {
        let up = StencilSpec::upwind();
        let methods = [
            erk22(q(3, 4)),
            erk22(q(5, 3)),
            make_family(FamilyKind::Erk33CaseII, &[q(13, 32)]).unwrap(),
            make_family(FamilyKind::Erk33CaseI, &[q(1, 2), q(3, 4)]).unwrap(),
            forward_euler(),
        ];
        for t in &methods {
            let ps = generate(t, &up).unwrap();
            let table = VertexTable::build(&ps, DEFAULT_VAR_LIMIT).unwrap();
            let c = table.certificate(&default_tol()).unwrap();
            let lower = c.lower.clone().unwrap();
            assert!(table.condition_at(&lower).passed());
            assert!(naive_condition(&ps, &lower));
            let w = c.witness.clone().unwrap();
            assert!(w.value.is_negative());
            assert!(w.delta > lower && &w.delta - &lower <= default_tol());
            let tags = w.vertex.clone();
            let s = subset_of(ps.vars(), &tags).unwrap();
            assert_eq!(naive_vertex_value(ps.poly(w.poly).unwrap(), s, &w.delta), w.value);
        }
    }

    #[test]
    fn irrational_gamma_gets_interval() {
        // A hand-built stencil-free check: a custom tableau whose binding
        // vertex polynomial has an irrational root.
        let a = vec![vec![qi(0), qi(0)], vec![qi(2), qi(0)]];
        let t = ButcherTableau::new(a, vec![q(3, 4), q(1, 4)]).unwrap();
        let c = compute_gamma(&t, &StencilSpec::upwind(), &default_tol()).unwrap();
        let ps = upwind(&t);
        if c.exact.is_none() && !c.unbounded && !c.is_zero() {
            let (lo, hi) = (c.lower.clone().unwrap(), c.upper.clone().unwrap());
            assert!(&hi - &lo <= default_tol());
            assert!(naive_condition(&ps, &lo));
            assert!(!naive_condition(&ps, &c.witness.unwrap().delta));
        }
    }

    #[test]
    fn brute_force_oracle_agrees() {
        let tol = q(1, 1 << 24);
        let methods = [
            erk22(q(3, 5)),
            erk22(q(7, 3)),
            make_family(FamilyKind::Erk33CaseII, &[q(11, 24)]).unwrap(),
            make_family(FamilyKind::Erk33CaseI, &[q(3, 5), q(7, 10)]).unwrap(),
            make_family(FamilyKind::Erk33CaseI, &[q(9, 10), q(3, 5)]).unwrap(),
            ButcherTableau::new(vec![vec![qi(0), qi(0)], vec![qi(2), qi(0)]], vec![q(3, 4), q(1, 4)]).unwrap(),
        ];
        for t in &methods {
            let ps = upwind(t);
            let c = gamma_of(&ps, &tol).unwrap();
            // Bisection on the naive condition.
            let (mut lo, mut hi) = (qi(0), qi(4));
            assert!(!naive_condition(&ps, &hi) || c.unbounded);
            if c.unbounded {
                continue;
            }
            while &hi - &lo > tol {
                let mid = (&lo + &hi) / qi(2);
                if naive_condition(&ps, &mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (cl, cu) = (c.lower.unwrap(), c.upper.unwrap());
            assert!(cl <= hi && lo <= cu, "[{cl}, {cu}] vs oracle [{lo}, {hi}]");
        }
    }

    #[test]
    fn sweeps_skip_singular_points() {
        let rows = sweep(
            FamilyKind::Erk22,
            &q(-1, 4),
            &q(1, 4),
            &q(1, 4),
            None,
            &StencilSpec::upwind(),
            &default_tol(),
            true,
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].skipped.is_some());
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
        assert!(sweep(FamilyKind::Erk22, &qi(1), &qi(0), &q(1, 4), None, &StencilSpec::upwind(), &default_tol(), false).is_err());
    }

    #[test]
    fn region_examples() {
        let c = region_cell(&qi(1), &q(1, 2)).unwrap();
        assert!(c.in_bowtie && c.condition_at_1 == Some(true));
        let c = region_cell(&q(1, 2), &q(3, 4)).unwrap();
        assert!(c.in_bowtie && c.condition_at_1 == Some(true));
        let c = region_cell(&q(1, 3), &q(2, 3)).unwrap();
        assert!(!c.in_bowtie && c.gamma_zero == Some(true));
        let c = region_cell(&qi(1), &q(1, 4)).unwrap();
        assert!(!c.in_bowtie && c.condition_at_1 == Some(false));
        let c = region_cell(&q(3, 4), &q(3, 4)).unwrap();
        assert!(c.singular.is_some());
    }

    #[test]
    fn sampling_bound_is_above_gamma() {
        let ps = upwind(&erk22(qi(2)));
        let s = sample_upper_bound(&ps, 64, 7, &default_tol());
        assert_eq!(s.label, "not a certificate");
        assert!(s.upper.unwrap() >= q(1, 2));
        assert!(s.witness.unwrap().value.is_negative());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn condition_is_monotone_in_delta(num in 1i64..40, den in 1i64..20, rung in 1i64..12) {
            let t = erk22(q(num, den));
            let table = VertexTable::build(&upwind(&t), DEFAULT_VAR_LIMIT).unwrap();
            let ladder: Vec<bool> = (0..=24).map(|k| table.condition_at(&q(k * rung, 16)).passed()).collect();
            for w in ladder.windows(2) {
                prop_assert!(w[0] || !w[1]);
            }
        }

        #[test]
        fn case_ii_certificates_are_sound(num in 1i64..48) {
            let alpha = q(num, 48);
            let t = make_family(FamilyKind::Erk33CaseII, &[alpha]).unwrap();
            let ps = upwind(&t);
            let c = gamma_of(&ps, &default_tol()).unwrap();
            prop_assert!(naive_condition(&ps, c.lower.as_ref().unwrap()));
            let w = c.witness.unwrap();
            prop_assert!(w.value.is_negative());
        }
    }
}
