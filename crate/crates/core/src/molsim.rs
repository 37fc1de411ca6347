//! Direct method-of-lines simulation of
//! `u_k' = q_k(u, t) * (sum_j c_j u_{k-j}) / dx^p` on a periodic grid,
//! stepped with an explicit Runge-Kutta method in exact rational or
//! floating-point arithmetic.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polygen::StencilSpec;
use crate::rational::{q, qi, Q};
use crate::tableau::ButcherTableau;

/// Arithmetic used by the simulator.
pub trait Scalar:
    Clone + PartialOrd + Num + Signed + fmt::Display + fmt::Debug + Send + Sync + 'static
{
    fn from_q(x: &Q) -> Self;
    fn to_f64(&self) -> f64;
    /// Bits needed to store the value (0 for fixed-size types).
    fn size_bits(&self) -> u64 {
        0
    }
    /// Full-precision text.
    fn render(&self) -> String {
        self.to_string()
    }
}

impl Scalar for f64 {
    fn from_q(x: &Q) -> Self {
        ToPrimitive::to_f64(x).unwrap_or(f64::NAN)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

impl Scalar for Q {
    fn from_q(x: &Q) -> Self {
        x.clone()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn size_bits(&self) -> u64 {
        self.numer().bits() + self.denom().bits()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimiterKind {
    Minmod,
    Koren,
    Mc,
    Custom,
}

/// `psi(theta) = max(0, min_j(s_j theta + c_j))` with the declared bound
/// `mu` on `psi(theta) / theta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Limiter {
    kind: LimiterKind,
    pieces: Vec<(Q, Q)>,
    mu: Q,
    ratio_at_zero: Q,
}

impl Limiter {
    pub fn minmod() -> Self {
        Self::build(LimiterKind::Minmod, vec![(qi(0), qi(1)), (qi(1), qi(0))], qi(1))
    }

    pub fn koren() -> Self {
        Self::build(
            LimiterKind::Koren,
            vec![(qi(0), qi(1)), (q(1, 6), q(1, 3)), (qi(1), qi(0))],
            qi(1),
        )
    }

    pub fn mc() -> Self {
        Self::build(LimiterKind::Mc, vec![(qi(2), qi(0)), (q(1, 2), q(1, 2)), (qi(0), qi(2))], qi(2))
    }

    /// Custom limiter from `(slope, intercept)` pieces; `psi(0)` must be 0.
    pub fn custom(pieces: Vec<(Q, Q)>, mu: Q) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidInput("limiter needs at least one piece".into()));
        }
        let l = Self::build(LimiterKind::Custom, pieces, mu);
        if !l.psi_value(&Q::zero()).is_zero() {
            return Err(Error::InvalidInput("limiter must vanish at theta = 0".into()));
        }
        Ok(l)
    }

    fn build(kind: LimiterKind, pieces: Vec<(Q, Q)>, mu: Q) -> Self {
        // Slope of the active piece just right of 0.
        let ratio_at_zero = if pieces.iter().any(|(_, c)| c.is_negative()) {
            Q::zero()
        } else {
            pieces
                .iter()
                .filter(|(_, c)| c.is_zero())
                .map(|(s, _)| s.clone())
                .min()
                .unwrap_or_else(Q::zero)
                .max(Q::zero())
        };
        Self { kind, pieces, mu, ratio_at_zero }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "minmod" => Ok(Self::minmod()),
            "koren" => Ok(Self::koren()),
            "mc" => Ok(Self::mc()),
            other => Err(Error::InvalidInput(format!("unknown limiter '{other}'"))),
        }
    }

    pub fn kind(&self) -> LimiterKind {
        self.kind
    }

    pub fn mu(&self) -> &Q {
        &self.mu
    }

    pub fn ratio_at_zero(&self) -> &Q {
        &self.ratio_at_zero
    }

    fn psi_value<T: Scalar>(&self, theta: &T) -> T {
        let inner = self
            .pieces
            .iter()
            .map(|(s, c)| T::from_q(s) * theta.clone() + T::from_q(c))
            .reduce(|a, b| if b < a { b } else { a })
            .expect("nonempty");
        if inner < T::zero() {
            T::zero()
        } else {
            inner
        }
    }

    /// `(psi(theta), psi(theta) / theta)`, the ratio taken as its limit at 0.
    pub fn psi<T: Scalar>(&self, theta: &T) -> (T, T) {
        let value = self.psi_value(theta);
        let ratio = if theta.is_zero() {
            T::from_q(&self.ratio_at_zero)
        } else {
            value.clone() / theta.clone()
        };
        (value, ratio)
    }

    /// Largest value of `psi`; `None` when unbounded.
    pub fn sup_psi(&self) -> Option<Q> {
        if self.pieces.iter().all(|(s, _)| s.is_positive()) {
            return None;
        }
        let mut points = vec![Q::zero()];
        for (i, (s1, c1)) in self.pieces.iter().enumerate() {
            for (s2, c2) in &self.pieces[i + 1..] {
                if s1 != s2 {
                    points.push((c2 - c1) / (s1 - s2));
                }
            }
        }
        // The inner minimum is concave, so a breakpoint attains the sup.
        points.iter().map(|t| self.psi_value(t)).max()
    }
}

/// Piecewise constant speed `a(t)` given as `(start time, value)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Speed {
    pieces: Vec<(Q, Q)>,
}

impl Speed {
    pub fn constant(a: Q) -> Self {
        Self { pieces: vec![(Q::zero(), a)] }
    }

    pub fn piecewise(mut pieces: Vec<(Q, Q)>) -> Result<Self> {
        if pieces.is_empty() || pieces.iter().any(|(_, a)| a.is_negative()) {
            return Err(Error::InvalidInput("speed must be nonempty and nonnegative".into()));
        }
        pieces.sort_by(|x, y| x.0.cmp(&y.0));
        Ok(Self { pieces })
    }

    pub fn at(&self, t: &Q) -> Q {
        self.pieces
            .iter()
            .take_while(|(s, _)| s <= t)
            .last()
            .unwrap_or(&self.pieces[0])
            .1
            .clone()
    }

    pub fn sup(&self) -> Q {
        self.pieces.iter().map(|(_, a)| a.clone()).max().unwrap()
    }
}

/// `q` values scripted per (1-based cell, exact time); unlisted keys give 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedQ {
    table: BTreeMap<(usize, Q), Q>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScriptEntry {
    pub cell: usize,
    #[serde(with = "crate::rational::serde_q")]
    pub time: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub value: Q,
}

impl ScriptedQ {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, cell: usize, time: Q, value: Q) -> Result<()> {
        if value.is_negative() {
            return Err(Error::InvalidInput(format!("scripted q must be nonnegative, got {value}")));
        }
        if value.is_zero() {
            self.table.remove(&(cell, time));
        } else {
            self.table.insert((cell, time), value);
        }
        Ok(())
    }

    pub fn get(&self, cell: usize, time: &Q) -> Q {
        self.table.get(&(cell, time.clone())).cloned().unwrap_or_else(Q::zero)
    }

    pub fn max_value(&self) -> Q {
        self.table.values().cloned().max().unwrap_or_else(Q::zero)
    }

    pub fn entries(&self) -> Vec<ScriptEntry> {
        self.table
            .iter()
            .map(|((cell, time), value)| ScriptEntry { cell: *cell, time: time.clone(), value: value.clone() })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum QProvider {
    Advection { speed: Speed, limiter: Limiter },
    /// Flux `f(u) = sum_j flux[j] u^j` with `f' >= 0` on the data range.
    ConservationLaw { flux: Vec<Q>, limiter: Limiter, fprime_bound: Option<Q> },
    Scripted { script: ScriptedQ, bound: Option<Q> },
    Constant(Q),
    /// Diffusivity per cell (0-based).
    Heat(Vec<Q>),
}

#[derive(Debug, Clone)]
pub struct SemiDiscreteProblem {
    pub n: usize,
    pub dx: Q,
    pub stencil: StencilSpec,
    pub q: QProvider,
    pub initial: Vec<Q>,
}

impl SemiDiscreteProblem {
    pub fn new(dx: Q, stencil: StencilSpec, q: QProvider, initial: Vec<Q>) -> Result<Self> {
        if initial.is_empty() {
            return Err(Error::InvalidInput("empty grid".into()));
        }
        if !dx.is_positive() {
            return Err(Error::InvalidInput("dx must be positive".into()));
        }
        if let QProvider::Heat(k) = &q {
            if k.len() != initial.len() || k.iter().any(|x| x.is_negative()) {
                return Err(Error::InvalidInput("need one nonnegative diffusivity per cell".into()));
            }
        }
        Ok(Self { n: initial.len(), dx, stencil, q, initial })
    }

    fn dx_power(&self) -> Q {
        (0..self.stencil.dx_power()).fold(Q::one(), |acc, _| acc * &self.dx)
    }
}

fn wrap(k: isize, n: usize) -> usize {
    k.rem_euclid(n as isize) as usize
}

/// The factor `1 - psi(theta_{k-1}) + psi(theta_k) / theta_k` with
/// `theta_k = (u_k - u_{k-1}) / (u_{k+1} - u_k)`. Zero denominators are
/// handled in flux form: a vanishing `u_{k+1} - u_k` drops the ratio term and
/// a vanishing `u_k - u_{k-1}` drops the `psi(theta_{k-1})` term.
fn limiter_factor<T: Scalar>(u: &[T], k: usize, limiter: &Limiter) -> T {
    let n = u.len();
    let at = |d: isize| u[wrap(k as isize + d, n)].clone();
    let d_minus = at(0) - at(-1);
    let d_plus = at(1) - at(0);
    let right = if d_plus.is_zero() {
        T::zero()
    } else {
        limiter.psi(&(d_minus.clone() / d_plus)).1
    };
    let left = if d_minus.is_zero() {
        T::zero()
    } else {
        limiter.psi(&((at(-1) - at(-2)) / d_minus)).0
    };
    T::one() - left + right
}

/// Limited interface value `u_{k+1/2} = u_k + psi(theta_k) (u_{k+1} - u_k)`.
fn half_value<T: Scalar>(u: &[T], k: usize, limiter: &Limiter) -> T {
    let n = u.len();
    let (um, u0, up) = (u[wrap(k as isize - 1, n)].clone(), u[k].clone(), u[(k + 1) % n].clone());
    let d_plus = up - u0.clone();
    if d_plus.is_zero() {
        return u0;
    }
    let theta = (u0.clone() - um) / d_plus.clone();
    u0 + limiter.psi(&theta).0 * d_plus
}

/// `(f(x) - f(y)) / (x - y)` for polynomial `f`, without dividing.
fn divided_difference<T: Scalar>(f: &[Q], x: &T, y: &T) -> T {
    let mut total = T::zero();
    for (j, c) in f.iter().enumerate().skip(1) {
        let mut s = T::zero();
        let mut xp = T::one();
        for i in 0..j {
            let mut yp = T::one();
            for _ in 0..(j - 1 - i) {
                yp = yp * y.clone();
            }
            s = s + xp.clone() * yp;
            xp = xp * x.clone();
        }
        total = total + T::from_q(c) * s;
    }
    total
}

fn derivative(f: &[Q]) -> Vec<Q> {
    f.iter().enumerate().skip(1).map(|(j, c)| c * qi(j as i64)).collect()
}

fn check_q<T: Scalar>(values: Vec<T>) -> Result<Vec<T>> {
    if let Some((index, v)) = values.iter().enumerate().find(|(_, v)| v.is_negative()) {
        return Err(Error::LimiterContract { index: index + 1, value: v.render() });
    }
    Ok(values)
}

pub fn q_advection<T: Scalar>(u: &[T], a: &Q, limiter: &Limiter) -> Result<Vec<T>> {
    let a = T::from_q(a);
    check_q((0..u.len()).map(|k| a.clone() * limiter_factor(u, k, limiter)).collect())
}

pub fn q_conservation<T: Scalar>(u: &[T], flux: &[Q], limiter: &Limiter) -> Result<Vec<T>> {
    let n = u.len();
    let half: Vec<T> = (0..n).map(|k| half_value(u, k, limiter)).collect();
    check_q(
        (0..n)
            .map(|k| {
                let dd = divided_difference(flux, &half[wrap(k as isize - 1, n)], &half[k]);
                dd * limiter_factor(u, k, limiter)
            })
            .collect(),
    )
}

/// `q_k(y, time)` for every cell.
pub fn q_values<T: Scalar>(p: &SemiDiscreteProblem, y: &[T], time: &Q) -> Result<Vec<T>> {
    match &p.q {
        QProvider::Advection { speed, limiter } => q_advection(y, &speed.at(time), limiter),
        QProvider::ConservationLaw { flux, limiter, .. } => q_conservation(y, flux, limiter),
        QProvider::Scripted { script, .. } => Ok((1..=p.n).map(|k| T::from_q(&script.get(k, time))).collect()),
        QProvider::Constant(c) => check_q(vec![T::from_q(c); p.n]),
        QProvider::Heat(kappa) => Ok(kappa.iter().map(T::from_q).collect()),
    }
}

/// Stage values, the `xi` used by each stage, and the new state.
#[derive(Debug, Clone)]
pub struct StepTrace<T> {
    pub stages: Vec<Vec<T>>,
    pub xi: Vec<Vec<T>>,
    pub next: Vec<T>,
}

fn apply_stencil<T: Scalar>(s: &StencilSpec, y: &[T], k: usize) -> T {
    let n = y.len();
    s.coeffs()
        .iter()
        .map(|(&j, c)| T::from_q(c) * y[wrap(k as isize - j as isize, n)].clone())
        .fold(T::zero(), |a, b| a + b)
}

pub fn erk_step<T: Scalar>(
    p: &SemiDiscreteProblem,
    t: &ButcherTableau,
    dt: &Q,
    time: &Q,
    u: &[T],
) -> Result<StepTrace<T>> {
    if !dt.is_positive() {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    if u.len() != p.n {
        return Err(Error::InvalidInput(format!("state has {} cells, grid has {}", u.len(), p.n)));
    }
    let m = t.stages();
    let scale = T::from_q(&(dt / p.dx_power()));
    let mut stages: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut xi: Vec<Vec<T>> = Vec::with_capacity(m);
    // increments[j][k] = xi^j_k * (D y^j)_k
    let mut increments: Vec<Vec<T>> = Vec::with_capacity(m);
    let combine = |weights: &[Q], increments: &[Vec<T>]| -> Vec<T> {
        (0..p.n)
            .map(|k| {
                let mut v = u[k].clone();
                for (w, inc) in weights.iter().zip(increments) {
                    if !w.is_zero() {
                        v = v + T::from_q(w) * inc[k].clone();
                    }
                }
                v
            })
            .collect()
    };
    for i in 0..m {
        let y = combine(&t.a_matrix()[i][..i], &increments);
        let stage_time = time + &t.c()[i] * dt;
        let qs = q_values(p, &y, &stage_time)?;
        let x: Vec<T> = qs.into_iter().map(|v| scale.clone() * v).collect();
        increments.push((0..p.n).map(|k| x[k].clone() * apply_stencil(&p.stencil, &y, k)).collect());
        xi.push(x);
        stages.push(y);
    }
    let next = combine(t.b(), &increments);
    Ok(StepTrace { stages, xi, next })
}

/// Supremum of `f'` over `[lo, hi]` when `f'` has degree at most 2.
fn sup_on_interval(fp: &[Q], lo: &Q, hi: &Q) -> Option<Q> {
    let fp = crate::roots::trim(fp.to_vec());
    if fp.len() > 3 {
        return None;
    }
    let mut points = vec![lo.clone(), hi.clone()];
    if fp.len() == 3 {
        let vertex = -&fp[1] / (qi(2) * &fp[2]);
        if &vertex > lo && &vertex < hi {
            points.push(vertex);
        }
    }
    points.iter().map(|x| crate::roots::eval(&fp, x)).max()
}

/// Forward-Euler threshold `tau0` for the problem, evaluated on state `u`
/// where the bound depends on the data.
pub fn tau0_at(p: &SemiDiscreteProblem, u: &[Q]) -> Result<Q> {
    let positive = |bound: Q, what: &str| -> Result<Q> {
        if bound.is_positive() {
            Ok(bound)
        } else {
            Err(Error::InvalidInput(format!("{what} must be positive to bound the step")))
        }
    };
    let dxp = p.dx_power();
    match &p.q {
        QProvider::Advection { speed, limiter } => {
            let sup = positive(speed.sup(), "sup a")?;
            Ok(&p.dx / ((limiter.mu() + qi(1)) * sup))
        }
        QProvider::ConservationLaw { flux, limiter, fprime_bound } => {
            let sup = match fprime_bound {
                Some(b) => b.clone(),
                None => {
                    let lo = u.iter().min().cloned().unwrap_or_else(Q::zero);
                    let hi = u.iter().max().cloned().unwrap_or_else(Q::zero);
                    sup_on_interval(&derivative(flux), &lo, &hi).ok_or_else(|| {
                        Error::InvalidInput("flux degree above 3 needs an explicit f' bound".into())
                    })?
                }
            };
            let sup = positive(sup, "sup f'")?;
            Ok(&p.dx / ((limiter.mu() + qi(1)) * sup))
        }
        QProvider::Scripted { bound, .. } => match bound {
            Some(b) => Ok(dxp / positive(b.clone(), "q bound")?),
            None => Err(Error::InvalidInput("scripted q needs an explicit bound for tau0".into())),
        },
        QProvider::Constant(c) => Ok(dxp / positive(c.clone(), "q")?),
        QProvider::Heat(kappa) => {
            let sup = kappa.iter().max().cloned().unwrap_or_else(Q::zero);
            Ok(dxp / positive(sup, "sup kappa")?)
        }
    }
}

/// `tau0` using the initial data.
pub fn tau0(p: &SemiDiscreteProblem) -> Result<Q> {
    tau0_at(p, &p.initial)
}

/// `gamma * tau0`; refuses when `gamma = 0`.
pub fn max_step(gamma: &Q, p: &SemiDiscreteProblem) -> Result<Q> {
    if !gamma.is_positive() {
        return Err(Error::NoPositiveStep);
    }
    Ok(gamma * tau0(p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Negative,
    BelowMin,
    AboveMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation<T> {
    pub step: usize,
    /// 1-based cell index.
    pub index: usize,
    pub value: T,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats<T> {
    pub step: usize,
    pub min: T,
    pub max: T,
    pub tv: T,
}

#[derive(Debug, Clone)]
pub enum StepRule {
    Fixed(Q),
    /// `dt = factor * tau0(u^n)`, re-evaluated every step.
    Recompute(Q),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub steps: usize,
    pub rule: StepRule,
    pub stop_on_violation: bool,
    /// Warn when rational values exceed this many bits.
    pub size_warning_bits: u64,
}

impl RunOptions {
    pub fn fixed(dt: Q, steps: usize) -> Self {
        Self { steps, rule: StepRule::Fixed(dt), stop_on_violation: false, size_warning_bits: 1 << 14 }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport<T> {
    pub stats: Vec<StepStats<T>>,
    pub first_violation: Option<Violation<T>>,
    pub final_state: Vec<T>,
    pub steps_taken: usize,
    pub warnings: Vec<String>,
}

fn stats<T: Scalar>(step: usize, u: &[T]) -> StepStats<T> {
    let mut min = u[0].clone();
    let mut max = u[0].clone();
    let mut tv = T::zero();
    for k in 0..u.len() {
        if u[k] < min {
            min = u[k].clone();
        }
        if u[k] > max {
            max = u[k].clone();
        }
        tv = tv + (u[k].clone() - u[wrap(k as isize - 1, u.len())].clone()).abs();
    }
    StepStats { step, min, max, tv }
}

fn find_violation<T: Scalar>(step: usize, u: &[T], lo: &T, hi: &T) -> Option<Violation<T>> {
    let zero = T::zero();
    let checks: [(ViolationKind, &dyn Fn(&T) -> bool); 3] = [
        (ViolationKind::Negative, &|v: &T| *v < zero),
        (ViolationKind::BelowMin, &|v: &T| v < lo),
        (ViolationKind::AboveMax, &|v: &T| v > hi),
    ];
    for (kind, bad) in checks {
        if let Some((k, v)) = u.iter().enumerate().find(|(_, v)| bad(v)) {
            return Some(Violation { step, index: k + 1, value: v.clone(), kind });
        }
    }
    None
}

pub fn run<T: Scalar>(p: &SemiDiscreteProblem, t: &ButcherTableau, options: &RunOptions) -> Result<RunReport<T>> {
    if options.steps == 0 {
        return Err(Error::InvalidInput("steps must be at least 1".into()));
    }
    let mut u: Vec<T> = p.initial.iter().map(T::from_q).collect();
    let lo = T::from_q(p.initial.iter().min().unwrap());
    let hi = T::from_q(p.initial.iter().max().unwrap());
    let mut time = Q::zero();
    let mut report = RunReport {
        stats: vec![stats(0, &u)],
        first_violation: None,
        final_state: Vec::new(),
        steps_taken: 0,
        warnings: Vec::new(),
    };
    for step in 1..=options.steps {
        let dt = match &options.rule {
            StepRule::Fixed(dt) => dt.clone(),
            StepRule::Recompute(factor) => {
                let exact: Vec<Q> = u
                    .iter()
                    .map(|v| Q::from_float(v.to_f64()).unwrap_or_else(Q::zero))
                    .collect();
                factor * tau0_at(p, &exact)?
            }
        };
        u = erk_step(p, t, &dt, &time, &u)?.next;
        time += &dt;
        report.steps_taken = step;
        report.stats.push(stats(step, &u));
        if report.warnings.is_empty() && u.iter().any(|v| v.size_bits() > options.size_warning_bits) {
            report.warnings.push(format!(
                "rational values exceed {} bits at step {step}; consider float mode",
                options.size_warning_bits
            ));
        }
        if report.first_violation.is_none() {
            report.first_violation = find_violation(step, &u, &lo, &hi);
            if report.first_violation.is_some() && options.stop_on_violation {
                break;
            }
        }
    }
    report.final_state = u;
    Ok(report)
}

impl<T: Scalar> RunReport<T> {
    /// One JSON object per step followed by a summary record.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.stats {
            let line = serde_json::json!({
                "step": s.step,
                "min": s.min.render(),
                "max": s.max.render(),
                "tv": s.tv.render(),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        let violation = self.first_violation.as_ref().map(|v| {
            serde_json::json!({
                "step": v.step,
                "index": v.index,
                "value": v.value.render(),
                "kind": v.kind,
            })
        });
        let summary = serde_json::json!({
            "final": true,
            "steps_taken": self.steps_taken,
            "first_violation": violation,
            "final_state": self.final_state.iter().map(|v| v.render()).collect::<Vec<_>>(),
            "warnings": self.warnings,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygen::generate;
    use crate::tableau::{forward_euler, make_family, FamilyKind};

    #[test]
    fn limiter_values() {
        assert_eq!(Limiter::minmod().psi(&q(1, 2)), (q(1, 2), qi(1)));
        assert_eq!(Limiter::koren().psi(&qi(2)), (q(2, 3), q(1, 3)));
        assert_eq!(Limiter::mc().psi(&qi(-1)), (qi(0), qi(0)));
        assert_eq!(*Limiter::minmod().ratio_at_zero(), qi(1));
        assert_eq!(*Limiter::koren().ratio_at_zero(), qi(1));
        assert_eq!(*Limiter::mc().ratio_at_zero(), qi(2));
        assert_eq!(Limiter::minmod().sup_psi(), Some(qi(1)));
        assert_eq!(Limiter::mc().sup_psi(), Some(qi(2)));
        let (v, r) = Limiter::koren().psi(&0.5f64);
        assert!((v - 0.4166666666666667).abs() < 1e-15 && (r - 2.0 * v).abs() < 1e-15);
    }

    #[test]
    fn advection_q_examples() {
        let a = q(3, 2);
        let flat = vec![qi(2); 5];
        for l in [Limiter::minmod(), Limiter::koren(), Limiter::mc()] {
            assert!(q_advection(&flat, &a, &l).unwrap().iter().all(|x| *x == a));
        }
        let bump = vec![qi(0), qi(1), qi(0), qi(0), qi(0)];
        assert_eq!(q_advection(&bump, &qi(1), &Limiter::minmod()).unwrap()[1], qi(1));
    }

    #[test]
    fn mc_can_break_the_contract() {
        // theta_{k-1} = 3 gives psi = 2 while theta_k < 0 gives ratio 0.
        let u = vec![qi(0), qi(3), qi(4), qi(0), qi(0), qi(0)];
        let err = q_advection(&u, &qi(1), &Limiter::mc()).unwrap_err();
        assert!(matches!(err, Error::LimiterContract { .. }));
        assert!(q_advection(&u, &qi(1), &Limiter::minmod()).is_ok());
    }

    #[test]
    fn advection_q_is_bounded() {
        let data: Vec<Q> = [0, 3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5].iter().map(|&x| qi(x)).collect();
        for l in [Limiter::minmod(), Limiter::koren()] {
            let bound = qi(2) * qi(2);
            for v in q_advection(&data, &qi(2), &l).unwrap() {
                assert!(!v.is_negative() && v <= bound);
            }
        }
    }

    #[test]
    fn forward_euler_shift() {
        let p = SemiDiscreteProblem::new(
            qi(1),
            StencilSpec::upwind(),
            QProvider::Constant(qi(1)),
            vec![qi(0), qi(1), qi(0), qi(0)],
        )
        .unwrap();
        let tr = erk_step(&p, &forward_euler(), &qi(1), &qi(0), &p.initial).unwrap();
        assert_eq!(tr.next, vec![qi(0), qi(0), qi(1), qi(0)]);
    }

    #[test]
    fn erk22_constant_q_matches_polynomials() {
        let t = make_family(FamilyKind::Erk22, &[qi(1)]).unwrap();
        let init: Vec<Q> = (0..7).map(|k| qi(k * k % 5)).collect();
        let p = SemiDiscreteProblem::new(qi(1), StencilSpec::upwind(), QProvider::Constant(qi(1)), init.clone()).unwrap();
        let next = erk_step(&p, &t, &qi(1), &qi(0), &init).unwrap().next;
        let ps = generate(&t, &StencilSpec::upwind()).unwrap();
        let ones = vec![qi(1); ps.vars().len()];
        for k in 0..7 {
            let expected = ps.apply(&ones, |i| init[wrap(k as isize - i as isize, 7)].clone()).unwrap();
            assert_eq!(next[k], expected);
        }
        // (P_0, P_1, P_2) = (1/2, 0, 1/2) at xi = 1.
        assert_eq!(ps.poly(0).unwrap().eval(&ones).unwrap(), q(1, 2));
        assert_eq!(ps.poly(1).unwrap().eval(&ones).unwrap(), qi(0));
    }

    #[test]
    fn tau0_examples() {
        let init = vec![qi(0), qi(1), qi(0)];
        let adv = SemiDiscreteProblem::new(
            q(1, 100),
            StencilSpec::upwind(),
            QProvider::Advection { speed: Speed::constant(qi(1)), limiter: Limiter::minmod() },
            init.clone(),
        )
        .unwrap();
        assert_eq!(tau0(&adv).unwrap(), q(1, 200));
        let burgers = SemiDiscreteProblem::new(
            q(1, 10),
            StencilSpec::upwind(),
            QProvider::ConservationLaw { flux: vec![qi(0), qi(0), q(1, 2)], limiter: Limiter::mc(), fprime_bound: None },
            init.clone(),
        )
        .unwrap();
        assert_eq!(tau0(&burgers).unwrap(), q(1, 30));
        assert!(matches!(max_step(&qi(0), &adv), Err(Error::NoPositiveStep)));
        let scripted = SemiDiscreteProblem::new(
            qi(1),
            StencilSpec::upwind(),
            QProvider::Scripted { script: ScriptedQ::new(), bound: None },
            init,
        )
        .unwrap();
        assert!(tau0(&scripted).is_err());
    }

    #[test]
    fn divided_difference_matches_quotient() {
        let f = vec![qi(1), qi(-2), q(1, 2), qi(3)];
        let (x, y) = (q(3, 7), q(-5, 4));
        let dd: Q = divided_difference(&f, &x, &y);
        let ev = |z: &Q| crate::roots::eval(&f, z);
        assert_eq!(dd, (ev(&x) - ev(&y)) / (&x - &y));
    }

    #[test]
    fn tv_is_non_increasing_for_minmod_euler() {
        let init: Vec<Q> = [0, 2, 7, 3, 3, 9, 1, 0, 4, 6].iter().map(|&x| q(x, 9)).collect();
        let p = SemiDiscreteProblem::new(
            q(1, 10),
            StencilSpec::upwind(),
            QProvider::Advection { speed: Speed::constant(qi(1)), limiter: Limiter::minmod() },
            init,
        )
        .unwrap();
        let dt = tau0(&p).unwrap();
        let r: RunReport<f64> = run(&p, &forward_euler(), &RunOptions::fixed(dt, 200)).unwrap();
        for w in r.stats.windows(2) {
            assert!(w[1].tv <= w[0].tv + 1e-12);
        }
        assert!(r.first_violation.is_none());
    }
}
