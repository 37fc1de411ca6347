//! Propagation polynomials: `u^{n+1}_k = sum_i P_i(xi) u^n_{k-i}`.
//!
//! The stage recursion is carried out symbolically on a translation-invariant
//! lattice. Every stage is an operator `offset d -> polynomial`, acting as
//! `y_k = sum_d poly_d(xi) u_{k-d}`, with variables tagged relative to `k`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multilinear::{self, MultilinearPoly, SubsetCode, VarTag};
use crate::rational::{q, qi, Q};
use crate::tableau::ButcherTableau;

/// Hard cap imposed by the 64-bit subset codes.
pub const MAX_VARS: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StencilKind {
    Upwind,
    Centered,
    Heat,
    Custom,
}

/// Spatial operator `sum_j c_j u_{k-j}`; an entry `(j, c_j)` means the term
/// `c_j u_{k-j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilSpec {
    kind: StencilKind,
    coeffs: BTreeMap<i32, Q>,
    dx_power: u32,
}

impl StencilSpec {
    /// `u_{k-1} - u_k`.
    pub fn upwind() -> Self {
        Self::builtin(StencilKind::Upwind, &[(1, qi(1)), (0, qi(-1))], 1)
    }

    /// `(u_{k-1} - u_{k+1}) / 2`.
    pub fn centered() -> Self {
        Self::builtin(StencilKind::Centered, &[(1, q(1, 2)), (-1, q(-1, 2))], 1)
    }

    /// `u_{k-1} - 2 u_k + u_{k+1}`, scaled by `1/dx^2`.
    pub fn heat() -> Self {
        Self::builtin(StencilKind::Heat, &[(1, qi(1)), (0, qi(-2)), (-1, qi(1))], 2)
    }

    pub fn custom(coeffs: BTreeMap<i32, Q>, dx_power: u32) -> Result<Self> {
        let coeffs: BTreeMap<i32, Q> = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("empty stencil".into()));
        }
        Ok(Self { kind: StencilKind::Custom, coeffs, dx_power })
    }

    fn builtin(kind: StencilKind, entries: &[(i32, Q)], dx_power: u32) -> Self {
        Self {
            kind,
            coeffs: entries.iter().cloned().collect(),
            dx_power,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "upwind" => Ok(Self::upwind()),
            "centered" => Ok(Self::centered()),
            "heat" => Ok(Self::heat()),
            other => Err(Error::InvalidInput(format!("unknown stencil {other:?}"))),
        }
    }

    pub fn kind(&self) -> StencilKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            StencilKind::Upwind => "upwind",
            StencilKind::Centered => "centered",
            StencilKind::Heat => "heat",
            StencilKind::Custom => "custom",
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<i32, Q> {
        &self.coeffs
    }

    /// Power of `dx` in `xi = dt q / dx^p`.
    pub fn dx_power(&self) -> u32 {
        self.dx_power
    }

    /// `sum_j c_j = 0`.
    pub fn is_consistent(&self) -> bool {
        self.coeffs.values().sum::<Q>().is_zero()
    }

    pub fn is_skew_symmetric(&self) -> bool {
        self.coeffs.iter().all(|(j, c)| {
            let mirror = self.coeffs.get(&-j).cloned().unwrap_or_else(Q::zero);
            *c == -mirror
        })
    }

    /// `max |j|`.
    pub fn radius(&self) -> i32 {
        self.coeffs.keys().map(|j| j.abs()).max().unwrap_or(0)
    }
}

/// Polynomial in tag form while the variable universe is still open.
type TagTerms = BTreeMap<Vec<VarTag>, Q>;
/// Lattice operator: `u`-offset to coefficient polynomial.
type Operator = BTreeMap<i32, TagTerms>;

fn identity_op() -> Operator {
    let mut terms = TagTerms::new();
    terms.insert(Vec::new(), Q::one());
    let mut op = Operator::new();
    op.insert(0, terms);
    op
}

fn add_term(target: &mut TagTerms, tags: Vec<VarTag>, c: Q) {
    use std::collections::btree_map::Entry;
    match target.entry(tags) {
        Entry::Vacant(e) => {
            e.insert(c);
        }
        Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if e.get().is_zero() {
                e.remove();
            }
        }
    }
}

fn with_var(tags: &[VarTag], shift: i32, var: Option<VarTag>) -> Vec<VarTag> {
    let mut out: Vec<VarTag> = tags.iter().map(|t| t.shifted(shift)).collect();
    if let Some(v) = var {
        assert!(!out.contains(&v), "propagation produced a non-multilinear term");
        let pos = out.partition_point(|t| *t < v);
        out.insert(pos, v);
    }
    out
}

/// `target += coef * xi^stage_k * (D src)_k`.
fn add_xi_times_d(target: &mut Operator, src: &Operator, coef: &Q, stage: usize, d: &StencilSpec) {
    let var = VarTag::new(stage, 0);
    for (off, c) in d.coeffs() {
        let scale = coef * c;
        for (dd, terms) in src {
            let slot = target.entry(dd + off).or_default();
            for (tags, v) in terms {
                add_term(slot, with_var(tags, -off, Some(var)), &scale * v);
            }
        }
    }
}

/// `target += coef * (D (xi^stage src))_k`: multiply first, then shift.
fn add_d_of_xi(target: &mut Operator, src: &Operator, coef: &Q, stage: usize, d: &StencilSpec) {
    let var = VarTag::new(stage, 0);
    for (off, c) in d.coeffs() {
        let scale = coef * c;
        for (dd, terms) in src {
            let slot = target.entry(dd + off).or_default();
            for (tags, v) in terms {
                let mut with = with_var(tags, 0, Some(var));
                for t in with.iter_mut() {
                    *t = t.shifted(-off);
                }
                add_term(slot, with, &scale * v);
            }
        }
    }
}

/// Every variable the recursion can reach for an `m`-stage method, in
/// canonical order. Zero tableau entries do not shrink the universe.
pub fn variable_universe(stages: usize, stencil: &StencilSpec) -> Vec<VarTag> {
    let shifts: BTreeSet<i32> = stencil.coeffs().keys().map(|j| -j).collect();
    let mut vars = Vec::new();
    for stage in 1..=stages {
        let mut reach: BTreeSet<i32> = BTreeSet::from([0]);
        let mut all = reach.clone();
        for _ in 0..(stages - stage) {
            reach = reach
                .iter()
                .flat_map(|r| shifts.iter().map(move |s| r + s))
                .collect();
            all.extend(reach.iter().copied());
        }
        vars.extend(all.into_iter().map(|s| VarTag::new(stage, s)));
    }
    vars
}

/// The polynomials `P_i` of one method on one stencil.
#[derive(Debug, Clone)]
pub struct PropagationSet {
    tableau: ButcherTableau,
    stencil: StencilSpec,
    vars: Vec<VarTag>,
    polys: BTreeMap<i32, MultilinearPoly>,
    warnings: Vec<String>,
}

impl PropagationSet {
    fn from_operator(t: &ButcherTableau, s: &StencilSpec, op: Operator) -> Result<Self> {
        let vars = variable_universe(t.stages(), s);
        if vars.len() > MAX_VARS {
            return Err(Error::Capacity { vars: vars.len(), limit: MAX_VARS });
        }
        let m = t.stages() as i32;
        let lo = m * s.coeffs().keys().next().copied().unwrap_or(0).min(0);
        let hi = m * s.coeffs().keys().last().copied().unwrap_or(0).max(0);
        let mut polys = BTreeMap::new();
        for i in lo..=hi {
            let terms = op.get(&i).cloned().unwrap_or_default();
            let p = MultilinearPoly::from_tag_terms(
                vars.clone(),
                terms.iter().map(|(k, v)| (k.as_slice(), v.clone())),
            )?;
            polys.insert(i, p);
        }
        let mut warnings = Vec::new();
        if !s.is_consistent() {
            warnings.push(format!(
                "stencil coefficients sum to {}; sum of P_i = 1 is not expected",
                s.coeffs().values().sum::<Q>()
            ));
        }
        Ok(Self { tableau: t.clone(), stencil: s.clone(), vars, polys, warnings })
    }

    pub fn tableau(&self) -> &ButcherTableau {
        &self.tableau
    }

    pub fn stencil(&self) -> &StencilSpec {
        &self.stencil
    }

    pub fn vars(&self) -> &[VarTag] {
        &self.vars
    }

    pub fn polys(&self) -> &BTreeMap<i32, MultilinearPoly> {
        &self.polys
    }

    pub fn poly(&self, i: i32) -> Option<&MultilinearPoly> {
        self.polys.get(&i)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `sum_i P_i == 1` exactly.
    pub fn sums_to_one(&self) -> bool {
        multilinear::sum(self.polys.values()).is_some_and(|p| multilinear::is_one(&p))
    }

    /// Evaluates `sum_i P_i(xi) u_{k-i}` given `u_{k-i}` per offset.
    pub fn apply(&self, point: &[Q], u_at: impl Fn(i32) -> Q) -> Result<Q> {
        let mut total = Q::zero();
        for (&i, p) in &self.polys {
            total += p.eval(point)? * u_at(i);
        }
        Ok(total)
    }

    /// Identical polynomials and variable lists.
    pub fn same_polys(&self, other: &PropagationSet) -> bool {
        let nonzero = |ps: &PropagationSet| -> BTreeMap<i32, MultilinearPoly> {
            ps.polys.iter().filter(|(_, p)| !p.is_zero()).map(|(k, p)| (*k, p.clone())).collect()
        };
        self.vars == other.vars && nonzero(self) == nonzero(other)
    }
}

impl fmt::Display for PropagationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in &self.polys {
            writeln!(f, "P_{i} = {p}")?;
        }
        Ok(())
    }
}

/// Stage-by-stage symbolic propagation of the Runge-Kutta recursion.
pub fn generate(t: &ButcherTableau, s: &StencilSpec) -> Result<PropagationSet> {
    check_size(t, s)?;
    let m = t.stages();
    let mut stages: Vec<Operator> = Vec::with_capacity(m);
    for i in 0..m {
        let mut op = identity_op();
        for (j, stage_op) in stages.iter().enumerate() {
            let a = t.a(i, j);
            if !a.is_zero() {
                add_xi_times_d(&mut op, stage_op, a, j + 1, s);
            }
        }
        stages.push(op);
    }
    let mut out = identity_op();
    for (j, stage_op) in stages.iter().enumerate() {
        let b = &t.b()[j];
        if !b.is_zero() {
            add_xi_times_d(&mut out, stage_op, b, j + 1, s);
        }
    }
    PropagationSet::from_operator(t, s, out)
}

/// Closed form `I + (b^T ⊗ I) Q sum_i ((A ⊗ D) Q)^i (e ⊗ D)`, evaluated as a
/// truncated Neumann series. Independent of [`generate`].
pub fn generate_alt(t: &ButcherTableau, s: &StencilSpec) -> Result<PropagationSet> {
    check_size(t, s)?;
    let m = t.stages();
    let mut d_op = Operator::new();
    for (off, c) in s.coeffs() {
        let mut terms = TagTerms::new();
        terms.insert(Vec::new(), c.clone());
        d_op.insert(*off, terms);
    }
    let mut power: Vec<Operator> = vec![d_op; m];
    let mut series: Vec<Operator> = power.clone();
    for _ in 1..m {
        let mut next: Vec<Operator> = vec![Operator::new(); m];
        for (i, slot) in next.iter_mut().enumerate() {
            for (j, src) in power.iter().enumerate().take(i) {
                let a = t.a(i, j);
                if !a.is_zero() {
                    add_d_of_xi(slot, src, a, j + 1, s);
                }
            }
        }
        for (acc, add) in series.iter_mut().zip(&next) {
            for (off, terms) in add {
                let slot = acc.entry(*off).or_default();
                for (tags, v) in terms {
                    add_term(slot, tags.clone(), v.clone());
                }
            }
        }
        power = next;
    }
    let mut out = identity_op();
    for (j, op) in series.iter().enumerate() {
        let b = &t.b()[j];
        if b.is_zero() {
            continue;
        }
        let var = VarTag::new(j + 1, 0);
        for (off, terms) in op {
            let slot = out.entry(*off).or_default();
            for (tags, v) in terms {
                add_term(slot, with_var(tags, 0, Some(var)), b * v);
            }
        }
    }
    PropagationSet::from_operator(t, s, out)
}

fn check_size(t: &ButcherTableau, s: &StencilSpec) -> Result<()> {
    let n = variable_universe(t.stages(), s).len();
    if n > MAX_VARS {
        return Err(Error::Capacity { vars: n, limit: MAX_VARS });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryRow {
    pub offset: i32,
    pub parity: Parity,
    pub holds: bool,
}

/// Checks `P_j(xi) = (-1)^j P_{-j}(xi_hat)` with `xi_hat^l_{k+i} = xi^l_{k-i}`.
pub fn symmetry_report(ps: &PropagationSet) -> Result<Vec<SymmetryRow>> {
    if !ps.stencil.is_skew_symmetric() {
        return Err(Error::Precondition(format!(
            "stencil {} is not skew-symmetric",
            ps.stencil.name()
        )));
    }
    let as_tags = |p: &MultilinearPoly, reflect: bool, sign: &Q| -> BTreeMap<Vec<VarTag>, Q> {
        p.tag_terms()
            .map(|(tags, c)| {
                let mut tags: Vec<VarTag> = if reflect {
                    tags.iter().map(|t| t.reflected()).collect()
                } else {
                    tags
                };
                tags.sort();
                (tags, c * sign)
            })
            .collect()
    };
    let zero = MultilinearPoly::new(ps.vars.clone(), BTreeMap::new())?;
    let mut rows = Vec::new();
    for (&j, p) in ps.polys.iter().filter(|(j, _)| **j >= 0) {
        let mirror = ps.polys.get(&-j).unwrap_or(&zero);
        let parity = if j % 2 == 0 { Parity::Even } else { Parity::Odd };
        let sign = if parity == Parity::Even { Q::one() } else { -Q::one() };
        let holds = as_tags(p, false, &Q::one()) == as_tags(mirror, true, &sign);
        rows.push(SymmetryRow { offset: j, parity, holds });
    }
    Ok(rows)
}

/// Position of each canonical variable, for callers building points.
pub fn subset_of(vars: &[VarTag], tags: &[VarTag]) -> Result<SubsetCode> {
    let mut code = 0;
    for t in tags {
        let p = vars.iter().position(|v| v == t).ok_or(Error::MissingVariable(*t))?;
        code |= 1 << p;
    }
    Ok(code)
}

/// True when some coefficient of some `P_i` is negative. Cheap structural
/// hint, not a positivity test.
pub fn has_negative_coefficient(ps: &PropagationSet) -> bool {
    ps.polys.values().any(|p| p.terms().values().any(|c| c.is_negative()))
}
