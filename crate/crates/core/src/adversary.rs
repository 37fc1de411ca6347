//! Executable counterexamples: concrete grids, initial data and scripted
//! `q` schedules on which a method produces a negative value after one step.

use std::collections::{BTreeMap, VecDeque};

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::molsim::{erk_step, QProvider, ScriptEntry, SemiDiscreteProblem};
use crate::multilinear::VarTag;
use crate::polygen::{generate, StencilSpec};
use crate::rational::{q, qi, Q};
use crate::tableau::{rk4_classical, ButcherTableau, Coefficient};

pub use crate::molsim::ScriptedQ;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Locus {
    /// 1-based cell index.
    pub index: usize,
    #[serde(with = "crate::rational::serde_q")]
    pub value: Q,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub construction: String,
    pub stencil: String,
    pub n: usize,
    #[serde(with = "crate::rational::serde_q")]
    pub dx: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub dt: Q,
    #[serde(with = "crate::rational::serde_q_vec")]
    pub initial: Vec<Q>,
    pub schedule: Vec<ScriptEntry>,
    #[serde(serialize_with = "serialize_rows")]
    pub stages: Vec<Vec<Q>>,
    #[serde(with = "crate::rational::serde_q_vec")]
    pub u1: Vec<Q>,
    pub negative_locus: Option<Locus>,
    /// The targeted value is exactly zero.
    pub boundary: bool,
    pub notes: Vec<String>,
    #[serde(skip)]
    script: ScriptedQ,
    #[serde(skip)]
    stencil_spec: Option<StencilSpec>,
}

fn serialize_rows<S: serde::Serializer>(rows: &[Vec<Q>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(rows.len()))?;
    for row in rows {
        let strings: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        seq.serialize_element(&strings)?;
    }
    seq.end()
}

impl CounterexampleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn script(&self) -> &ScriptedQ {
        &self.script
    }

    /// The problem this report describes, for replay through the simulator.
    pub fn problem(&self) -> Result<SemiDiscreteProblem> {
        let stencil = self.stencil_spec.clone().unwrap_or_else(StencilSpec::upwind);
        SemiDiscreteProblem::new(
            self.dx.clone(),
            stencil,
            QProvider::Scripted { script: self.script.clone(), bound: Some(self.script.max_value()) },
            self.initial.clone(),
        )
    }

    /// Re-runs one step and returns `u^1`.
    pub fn replay(&self, t: &ButcherTableau) -> Result<Vec<Q>> {
        let p = self.problem()?;
        let report = crate::molsim::run::<Q>(&p, t, &crate::molsim::RunOptions::fixed(self.dt.clone(), 1))?;
        Ok(report.final_state)
    }
}

fn first_negative(u: &[Q]) -> Option<Locus> {
    u.iter()
        .enumerate()
        .find(|(_, v)| v.is_negative())
        .map(|(k, v)| Locus { index: k + 1, value: v.clone() })
}

fn wrap1(k: i64, n: usize) -> usize {
    (k - 1).rem_euclid(n as i64) as usize + 1
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    construction: &str,
    t: &ButcherTableau,
    stencil: &StencilSpec,
    dx: Q,
    dt: Q,
    initial: Vec<Q>,
    script: ScriptedQ,
    notes: Vec<String>,
) -> Result<CounterexampleReport> {
    let p = SemiDiscreteProblem::new(
        dx.clone(),
        stencil.clone(),
        QProvider::Scripted { script: script.clone(), bound: None },
        initial.clone(),
    )?;
    let trace = erk_step(&p, t, &dt, &Q::zero(), &initial)?;
    Ok(CounterexampleReport {
        construction: construction.to_string(),
        stencil: stencil.name().to_string(),
        n: initial.len(),
        dx,
        dt,
        negative_locus: first_negative(&trace.next),
        boundary: false,
        schedule: script.entries(),
        stages: trace.stages,
        u1: trace.next,
        initial,
        notes,
        script,
        stencil_spec: Some(stencil.clone()),
    })
}

/// One step with `dx = dt = 1`, unit data at `target - i` and `q` equal to
/// the assignment `xi` at each stage time, so that `u^1_target = P_i(xi)`.
pub fn first_step_counterexample(
    t: &ButcherTableau,
    stencil: &StencilSpec,
    i: i32,
    assignment: &BTreeMap<VarTag, Q>,
) -> Result<CounterexampleReport> {
    let ps = generate(t, stencil)?;
    let poly = ps
        .poly(i)
        .ok_or_else(|| Error::InvalidInput(format!("no propagation polynomial P_{i}")))?;
    if let Some((tag, _)) = assignment.iter().find(|(_, v)| v.is_negative()) {
        return Err(Error::InvalidInput(format!("negative xi for {tag}")));
    }
    let point: Vec<Q> = ps.vars().iter().map(|v| assignment.get(v).cloned().unwrap_or_else(Q::zero)).collect();
    let expected = poly.eval(&point)?;

    // Cells k+s for the variables and k-i for the data must not alias.
    let offsets: Vec<i32> = ps.vars().iter().map(|v| v.offset).collect();
    let var_span = offsets.iter().max().unwrap_or(&0) - offsets.iter().min().unwrap_or(&0) + 1;
    let keys: Vec<i32> = ps.polys().keys().copied().collect();
    let poly_span = keys.last().unwrap() - keys.first().unwrap() + 1;
    let n = var_span.max(poly_span).max(1) as usize;
    let target = n as i64;

    // Only variables P_i depends on constrain the script; stages sharing a
    // time must agree on those.
    let used = poly.terms().keys().fold(0u64, |acc, code| acc | code);
    let mut cells: BTreeMap<(usize, Q), (VarTag, Q)> = BTreeMap::new();
    for (pos, tag) in ps.vars().iter().enumerate() {
        if used >> pos & 1 == 0 {
            continue;
        }
        let value = point[pos].clone();
        let key = (wrap1(target + tag.offset as i64, n), t.c()[tag.stage - 1].clone());
        match cells.get(&key) {
            Some((other, v)) if *v != value => {
                return Err(Error::Precondition(format!(
                    "the method is confluent: {other} and {tag} share a stage time but need different values"
                )));
            }
            Some(_) => {}
            None => {
                cells.insert(key, (*tag, value));
            }
        }
    }
    let mut script = ScriptedQ::new();
    for ((cell, time), (_, value)) in cells {
        if !value.is_zero() {
            script.set(cell, time, value)?;
        }
    }
    let mut initial = vec![Q::zero(); n];
    initial[wrap1(target - i as i64, n) - 1] = qi(1);
    let mut report = simulate(
        "first_step",
        t,
        stencil,
        qi(1),
        qi(1),
        initial,
        script,
        vec![format!("u^1_{target} = P_{i}(xi) = {expected}")],
    )?;
    let got = &report.u1[n - 1];
    if *got != expected {
        return Err(Error::Precondition(format!(
            "simulation gives {got} but P_{i}(xi) = {expected}"
        )));
    }
    report.boundary = expected.is_zero();
    report.negative_locus = expected
        .is_negative()
        .then(|| Locus { index: n, value: expected.clone() });
    Ok(report)
}

/// Assignment putting `delta` on the listed variables and 0 elsewhere.
pub fn vertex_assignment(vertex: &[VarTag], delta: &Q) -> BTreeMap<VarTag, Q> {
    vertex.iter().map(|v| (*v, delta.clone())).collect()
}

/// Shortest chain `from -> ... -> m+1` along nonzero coefficients, stage `l'`
/// following `l` when `a_{l' l} != 0` (row `m+1` is `b`).
fn shortest_chain(t: &ButcherTableau, from: usize) -> Option<Vec<usize>> {
    let m = t.stages();
    let coeff = |row: usize, col: usize| if row == m { &t.b()[col] } else { t.a(row, col) };
    let mut prev = vec![usize::MAX; m + 1];
    let mut queue = VecDeque::from([from]);
    prev[from] = from;
    while let Some(l) = queue.pop_front() {
        if l == m {
            let mut path = vec![m];
            let mut cur = m;
            while cur != from {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for next in l + 1..=m {
            if prev[next] == usize::MAX && !coeff(next, l).is_zero() {
                prev[next] = l;
                queue.push_back(next);
            }
        }
    }
    None
}

/// Negative first-step value for a non-confluent, DJ-irreducible method
/// with a negative entry in `A` or `b`.
pub fn negative_entry_counterexample(t: &ButcherTableau) -> Result<CounterexampleReport> {
    let Some(first) = t.has_negative_entry() else {
        return Err(Error::Precondition("all entries of A and b are nonnegative".into()));
    };
    if !t.is_dj_irreducible() {
        return Err(Error::Precondition("the method is DJ-reducible".into()));
    }
    let m = t.stages();
    // 0-based row (m for b) and column of the first negative coefficient.
    let (row, col) = match first {
        Coefficient::A { i, j } => (i - 1, j - 1),
        Coefficient::B { j } => (m, j - 1),
    };
    let c = t.c();
    let stencil = StencilSpec::upwind();
    let p = 2usize;
    let unit = |n: usize| {
        let mut v = vec![Q::zero(); n];
        v[p - 2] = qi(1);
        v
    };
    let mut base = ScriptedQ::new();
    base.set(p, c[col].clone(), qi(1))?;

    if row == m {
        let n = 3;
        let note = format!("b_{} = {} < 0 acts directly on u^1_{p}", col + 1, t.b()[col]);
        return confluent_guard(t, simulate("negative_entry_case_1", t, &stencil, qi(1), qi(1), unit(n), base, vec![note])?);
    }
    let note0 = format!("y^{}_{p} = a_{}{} = {} < 0", row + 1, row + 1, col + 1, t.a(row, col));
    if !t.b()[row].is_zero() {
        let n = 4;
        let mut script = base.clone();
        script.set(p + 1, c[row].clone(), qi(1))?;
        let note = format!("b_{} moves the negative stage value into u^1_{}", row + 1, p + 1);
        let report = simulate("negative_entry_case_2", t, &stencil, qi(1), qi(1), unit(n), script, vec![note0, note])?;
        return confluent_guard(t, report);
    }
    let chain = shortest_chain(t, row)
        .ok_or_else(|| Error::Precondition(format!("stage {} never reaches the output", row + 1)))?;
    let hops = chain.len() - 1;
    let n = p + hops + 3;
    // Each hop scripts q = 1 at the time of the source stage, either in the
    // cell holding the negative value or in its right neighbour; the
    // combination is chosen by exact simulation.
    let scales = [qi(1), q(1, 2), qi(2), q(1, 8), qi(8)];
    for scale in &scales {
        for mask in 0u32..(1 << hops) {
            let mut script = base.clone();
            let mut cell = p;
            for (h, &src) in chain[..hops].iter().enumerate() {
                if mask >> h & 1 == 0 {
                    cell += 1;
                }
                let value = if h == 0 { qi(1) } else { scale.clone() };
                script.set(cell, c[src].clone(), value)?;
            }
            let chain_text: Vec<String> = chain.iter().map(|s| (s + 1).to_string()).collect();
            let notes = vec![
                note0.clone(),
                format!("chain of stages {} (m+1 denotes u^1)", chain_text.join(" -> ")),
            ];
            let report = simulate("negative_entry_case_3", t, &stencil, qi(1), qi(1), unit(n), script, notes)?;
            if report.negative_locus.is_some() {
                return Ok(report);
            }
        }
    }
    if t.is_confluent() {
        return Err(Error::Precondition("the method is confluent and no scripted chain separates its stages".into()));
    }
    Err(Error::Precondition("no scripted chain produced a negative value".into()))
}

/// Stage times shared by a confluent method may merge scripted entries; the
/// construction stands only if the simulation still goes negative.
fn confluent_guard(t: &ButcherTableau, report: CounterexampleReport) -> Result<CounterexampleReport> {
    if report.negative_locus.is_none() {
        let reason = if t.is_confluent() { "the method is confluent and the scripted stages merge" } else { "the scripted step stayed nonnegative" };
        return Err(Error::Precondition(reason.into()));
    }
    Ok(report)
}

/// The classical RK4 construction with `dt / dx = eps`:
/// `u^1 = (1, eps/6, (2 eps^2 - eps^3)/12, -eps^4/24)`.
pub fn rk4_counterexample(eps: &Q) -> Result<CounterexampleReport> {
    if !eps.is_positive() {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let t = rk4_classical();
    let mut script = ScriptedQ::new();
    script.set(2, Q::zero(), qi(1))?;
    script.set(3, eps / qi(2), qi(1))?;
    script.set(4, eps.clone(), qi(1))?;
    let initial = vec![qi(1), qi(0), qi(0), qi(0)];
    let report = simulate(
        "rk4_classical",
        &t,
        &StencilSpec::upwind(),
        qi(1),
        eps.clone(),
        initial,
        script,
        vec!["P_3 at xi^1_{k-2} = xi^2_{k-1} = xi^3_{k-1} = xi^4_k = eps".into()],
    )?;
    let e2 = eps * eps;
    let expected = vec![
        qi(1),
        eps / qi(6),
        (qi(2) * &e2 - &e2 * eps) / qi(12),
        -(&e2 * &e2) / qi(24),
    ];
    if report.u1 != expected {
        return Err(Error::Precondition(format!("unexpected trajectory {:?}", report.u1)));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::{compute_gamma, default_tol};
    use crate::tableau::{make_family, FamilyKind};

    #[test]
    fn erk22_first_step() {
        let t = make_family(FamilyKind::Erk22, &[qi(1)]).unwrap();
        let eps = q(1, 10);
        let a: BTreeMap<VarTag, Q> = [
            (VarTag::new(1, -1), qi(1)),
            (VarTag::new(1, 0), qi(1) + &eps),
            (VarTag::new(2, 0), qi(1) + &eps),
        ]
        .into_iter()
        .collect();
        let r = first_step_counterexample(&t, &StencilSpec::upwind(), 1, &a).unwrap();
        assert_eq!(r.negative_locus.as_ref().unwrap().value, q(-11, 200));
        assert_eq!(r.n, 3);
        assert_eq!(r.replay(&t).unwrap(), r.u1);
    }

    #[test]
    fn case_iii_first_step() {
        let t = make_family(FamilyKind::Erk33CaseIII, &[qi(1)]).unwrap();
        // (x, y, z, u, v, w) = (0, 1, 0, 0, 0, 1): y = xi^1_{k-1}, w = xi^3_k.
        let a = vertex_assignment(&[VarTag::new(1, -1), VarTag::new(3, 0)], &qi(1));
        let r = first_step_counterexample(&t, &StencilSpec::upwind(), 2, &a).unwrap();
        assert_eq!(r.negative_locus.unwrap().value, q(-1, 4));
    }

    #[test]
    fn boundary_witness_is_flagged() {
        let t = make_family(FamilyKind::Erk22, &[qi(1)]).unwrap();
        let r = first_step_counterexample(&t, &StencilSpec::upwind(), 1, &BTreeMap::new()).unwrap();
        assert!(r.boundary && r.negative_locus.is_none());
    }

    #[test]
    fn confluent_methods_are_rejected() {
        // Stages 2 and 3 share c = 1/2 but the assignment separates them.
        let a: BTreeMap<VarTag, Q> = [
            (VarTag::new(1, -2), qi(1)),
            (VarTag::new(2, -1), qi(1)),
            (VarTag::new(3, -1), qi(0)),
            (VarTag::new(4, 0), qi(1)),
        ]
        .into_iter()
        .collect();
        let err = first_step_counterexample(&rk4_classical(), &StencilSpec::upwind(), 3, &a);
        assert!(matches!(err, Err(Error::Precondition(_))));
        let a = vertex_assignment(&[VarTag::new(1, -2), VarTag::new(2, -1), VarTag::new(3, -1), VarTag::new(4, 0)], &qi(1));
        let r = first_step_counterexample(&rk4_classical(), &StencilSpec::upwind(), 3, &a).unwrap();
        assert_eq!(r.negative_locus.unwrap().value, q(-1, 24));
        assert!(matches!(negative_entry_counterexample(&rk4_classical()), Err(Error::Precondition(_))));
    }

    #[test]
    fn negative_entry_cases() {
        let t = make_family(FamilyKind::Erk33CaseIII, &[qi(1)]).unwrap();
        let r = negative_entry_counterexample(&t).unwrap();
        assert_eq!(r.construction, "negative_entry_case_2");
        assert!(r.stages[2][1].is_negative());
        assert!(r.negative_locus.is_some());

        let t = make_family(FamilyKind::Erk22, &[q(1, 4)]).unwrap();
        let r = negative_entry_counterexample(&t).unwrap();
        assert_eq!(r.construction, "negative_entry_case_1");
        assert_eq!(r.negative_locus.unwrap().value, qi(-1));
    }

    #[test]
    fn chain_case() {
        // a_21 < 0 and b_2 = 0; stage 2 reaches u^1 through stage 3.
        let a = vec![
            vec![qi(0), qi(0), qi(0)],
            vec![q(-1, 2), qi(0), qi(0)],
            vec![qi(1), qi(1), qi(0)],
        ];
        let t = ButcherTableau::new(a, vec![q(1, 2), qi(0), q(1, 2)]).unwrap();
        assert!(!t.is_confluent() && t.is_dj_irreducible());
        let r = negative_entry_counterexample(&t).unwrap();
        assert_eq!(r.construction, "negative_entry_case_3");
        assert!(r.negative_locus.is_some());
        assert_eq!(r.replay(&t).unwrap(), r.u1);
    }

    #[test]
    fn rk4_trajectories() {
        let r = rk4_counterexample(&qi(1)).unwrap();
        assert_eq!(r.u1, vec![qi(1), q(1, 6), q(1, 12), q(-1, 24)]);
        assert_eq!(r.negative_locus.as_ref().unwrap().index, 4);
        let r = rk4_counterexample(&q(1, 2)).unwrap();
        assert_eq!(r.u1[3], q(-1, 384));
        let r = rk4_counterexample(&qi(2)).unwrap();
        assert_eq!((r.u1[2].clone(), r.u1[3].clone()), (qi(0), q(-2, 3)));
        assert_eq!(r.replay(&rk4_classical()).unwrap(), r.u1);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["u1"][3], "-2/3");
    }

    #[test]
    fn certificate_witness_becomes_counterexample() {
        let t = make_family(FamilyKind::Erk22, &[qi(2)]).unwrap();
        let c = compute_gamma(&t, &StencilSpec::upwind(), &default_tol()).unwrap();
        let w = c.witness.unwrap();
        let r = first_step_counterexample(&t, &StencilSpec::upwind(), w.poly, &vertex_assignment(&w.vertex, &w.delta))
            .unwrap();
        assert_eq!(r.negative_locus.unwrap().value, w.value);
    }
}
