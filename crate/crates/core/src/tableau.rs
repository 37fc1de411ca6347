//! Explicit Runge-Kutta methods with exact rational coefficients.

use std::collections::VecDeque;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{parse_q, q, qi, Q};

/// Coefficients `(A, b, c)` of an explicit Runge-Kutta method.
///
/// `A` is strictly lower triangular and `c` is always the row sums of `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ButcherTableau {
    a: Vec<Vec<Q>>,
    b: Vec<Q>,
    c: Vec<Q>,
}

/// Position of a tableau coefficient. Stages are 1-based as in the usual
/// notation, `A[i][j]` means `a_{ij}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Coefficient {
    A { i: usize, j: usize },
    B { j: usize },
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::A { i, j } => write!(f, "A[{i}][{j}]"),
            Coefficient::B { j } => write!(f, "b[{j}]"),
        }
    }
}

impl ButcherTableau {
    pub fn new(a: Vec<Vec<Q>>, b: Vec<Q>) -> Result<Self> {
        let m = b.len();
        if m == 0 {
            return Err(Error::InvalidTableau("no stages".into()));
        }
        if a.len() != m || a.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidTableau(format!("A must be {m}x{m}")));
        }
        for (i, row) in a.iter().enumerate() {
            if row[i..].iter().any(|x| !x.is_zero()) {
                return Err(Error::InvalidTableau(format!(
                    "row {} of A is not strictly lower triangular",
                    i + 1
                )));
            }
        }
        let c = a.iter().map(|row| row.iter().sum()).collect();
        Ok(Self { a, b, c })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// `a_{ij}` with 0-based indices.
    pub fn a(&self, i: usize, j: usize) -> &Q {
        &self.a[i][j]
    }

    pub fn a_matrix(&self) -> &[Vec<Q>] {
        &self.a
    }

    pub fn b(&self) -> &[Q] {
        &self.b
    }

    pub fn c(&self) -> &[Q] {
        &self.c
    }

    /// Existence of two stages with the same abscissa.
    pub fn is_confluent(&self) -> bool {
        let m = self.stages();
        (0..m).any(|i| (i + 1..m).any(|j| self.c[i] == self.c[j]))
    }

    /// First negative coefficient, scanning `A` row-major and then `b`.
    pub fn has_negative_entry(&self) -> Option<Coefficient> {
        for (i, row) in self.a.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if x.is_negative() {
                    return Some(Coefficient::A { i: i + 1, j: j + 1 });
                }
            }
        }
        self.b
            .iter()
            .position(|x| x.is_negative())
            .map(|j| Coefficient::B { j: j + 1 })
    }

    /// Every stage reaches the output through a chain of nonzero
    /// coefficients `a_{i1,i} a_{i2,i1} ... b_{ir}`.
    pub fn is_dj_irreducible(&self) -> bool {
        let m = self.stages();
        // Walk backwards from the output node (index m).
        let mut useful = vec![false; m];
        let mut queue: VecDeque<usize> = (0..m).filter(|&j| !self.b[j].is_zero()).collect();
        for &j in &queue {
            useful[j] = true;
        }
        while let Some(i) = queue.pop_front() {
            for j in 0..i {
                if !useful[j] && !self.a[i][j].is_zero() {
                    useful[j] = true;
                    queue.push_back(j);
                }
            }
        }
        useful.into_iter().all(|u| u)
    }

    /// Residuals of the classical order conditions up to order `p <= 4`.
    pub fn check_order(&self, p: usize) -> Result<OrderReport> {
        if !(1..=4).contains(&p) {
            return Err(Error::InvalidInput(format!("order {p} outside 1..=4")));
        }
        let b = &self.b;
        let c = &self.c;
        let ac = self.mat_vec(c);
        let c2: Vec<Q> = c.iter().map(|x| x * x).collect();
        let dot = |u: &[Q], v: &[Q]| -> Q { u.iter().zip(v).map(|(x, y)| x * y).sum() };
        let mut conditions = vec![OrderCondition::new("sum b = 1", b.iter().sum(), qi(1))];
        if p >= 2 {
            conditions.push(OrderCondition::new("b.c = 1/2", dot(b, c), q(1, 2)));
        }
        if p >= 3 {
            conditions.push(OrderCondition::new("b.c^2 = 1/3", dot(b, &c2), q(1, 3)));
            conditions.push(OrderCondition::new("b.Ac = 1/6", dot(b, &ac), q(1, 6)));
        }
        if p >= 4 {
            let c3: Vec<Q> = c.iter().map(|x| x * x * x).collect();
            let cac: Vec<Q> = c.iter().zip(&ac).map(|(x, y)| x * y).collect();
            let ac2 = self.mat_vec(&c2);
            let aac = self.mat_vec(&ac);
            conditions.push(OrderCondition::new("b.c^3 = 1/4", dot(b, &c3), q(1, 4)));
            conditions.push(OrderCondition::new("b.(c*Ac) = 1/8", dot(b, &cac), q(1, 8)));
            conditions.push(OrderCondition::new("b.Ac^2 = 1/12", dot(b, &ac2), q(1, 12)));
            conditions.push(OrderCondition::new("b.AAc = 1/24", dot(b, &aac), q(1, 24)));
        }
        Ok(OrderReport { order: p, conditions })
    }

    pub(crate) fn mat_vec(&self, v: &[Q]) -> Vec<Q> {
        self.a
            .iter()
            .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
            .collect()
    }

    pub fn to_file(&self) -> TableauFile {
        TableauFile {
            m: self.stages(),
            a: self
                .a
                .iter()
                .map(|row| row.iter().map(|x| x.to_string()).collect())
                .collect(),
            b: self.b.iter().map(|x| x.to_string()).collect(),
        }
    }

    pub fn from_file(file: &TableauFile) -> Result<Self> {
        if file.b.len() != file.m {
            return Err(Error::InvalidTableau(format!(
                "m = {} but b has {} entries",
                file.m,
                file.b.len()
            )));
        }
        let a = file
            .a
            .iter()
            .map(|row| row.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let b = file.b.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>()?;
        Self::new(a, b)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("tableau serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }
}

/// On-disk tableau: `{"m": 2, "A": [["0","0"],["1","0"]], "b": ["1/2","1/2"]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableauFile {
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
    pub b: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OrderCondition {
    pub name: &'static str,
    pub value: Q,
    pub target: Q,
    pub residual: Q,
}

impl OrderCondition {
    fn new(name: &'static str, value: Q, target: Q) -> Self {
        let residual = &value - &target;
        Self { name, value, target, residual }
    }
}

#[derive(Debug, Clone)]
pub struct OrderReport {
    pub order: usize,
    pub conditions: Vec<OrderCondition>,
}

impl OrderReport {
    pub fn satisfied(&self) -> bool {
        self.conditions.iter().all(|c| c.residual.is_zero())
    }
}

/// Parametric families of low-order explicit methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Two-stage second order, parameter `alpha = a21`.
    Erk22,
    /// Generic three-stage third order, parameters `(alpha, beta) = (c2, c3)`.
    Erk33CaseI,
    Erk33CaseII,
    Erk33CaseIII,
}

impl FamilyKind {
    pub fn arity(self) -> usize {
        match self {
            FamilyKind::Erk33CaseI => 2,
            _ => 1,
        }
    }

    pub fn nominal_order(self) -> usize {
        match self {
            FamilyKind::Erk22 => 2,
            _ => 3,
        }
    }

    pub fn shorthand(self) -> &'static str {
        match self {
            FamilyKind::Erk22 => "erk22",
            FamilyKind::Erk33CaseI => "erk33c1",
            FamilyKind::Erk33CaseII => "erk33c2",
            FamilyKind::Erk33CaseIII => "erk33c3",
        }
    }

    pub fn from_shorthand(s: &str) -> Option<Self> {
        match s {
            "erk22" => Some(FamilyKind::Erk22),
            "erk33c1" => Some(FamilyKind::Erk33CaseI),
            "erk33c2" => Some(FamilyKind::Erk33CaseII),
            "erk33c3" => Some(FamilyKind::Erk33CaseIII),
            _ => None,
        }
    }

    /// Checks the parameter domain without building the tableau.
    pub fn validate(self, params: &[Q]) -> Result<()> {
        let err = |constraint: &str| Error::ParameterDomain {
            family: self.shorthand().into(),
            constraint: constraint.into(),
        };
        if params.len() != self.arity() {
            return Err(err(&format!("expected {} parameter(s)", self.arity())));
        }
        let alpha = &params[0];
        if alpha.is_zero() {
            return Err(err("alpha != 0"));
        }
        if self == FamilyKind::Erk33CaseI {
            let beta = &params[1];
            if beta.is_zero() {
                return Err(err("beta != 0"));
            }
            if *alpha == q(2, 3) {
                return Err(err("alpha != 2/3"));
            }
            if alpha == beta {
                return Err(err("alpha != beta"));
            }
        }
        Ok(())
    }
}

/// Builds the tableau of a family member.
pub fn make_family(kind: FamilyKind, params: &[Q]) -> Result<ButcherTableau> {
    kind.validate(params)?;
    let zero = Q::zero;
    let one = Q::one();
    let alpha = params[0].clone();
    let (a, b) = match kind {
        FamilyKind::Erk22 => {
            let b2 = (qi(2) * &alpha).recip();
            (
                vec![vec![zero(), zero()], vec![alpha, zero()]],
                vec![&one - &b2, b2],
            )
        }
        FamilyKind::Erk33CaseI => {
            let beta = params[1].clone();
            let a32 = (&alpha - &beta) * &beta / (&alpha * (qi(3) * &alpha - qi(2)));
            let a31 = &beta - &a32;
            let six = qi(6);
            let b1 = (&six * &alpha * &beta - qi(3) * &alpha - qi(3) * &beta + qi(2))
                / (&six * &alpha * &beta);
            let b2 = (qi(2) - qi(3) * &beta) / (&six * &alpha * (&alpha - &beta));
            let b3 = (qi(3) * &alpha - qi(2)) / (&six * &beta * (&alpha - &beta));
            (
                vec![
                    vec![zero(), zero(), zero()],
                    vec![alpha, zero(), zero()],
                    vec![a31, a32, zero()],
                ],
                vec![b1, b2, b3],
            )
        }
        FamilyKind::Erk33CaseII => {
            let quarter_inv = (qi(4) * &alpha).recip();
            (
                vec![
                    vec![zero(), zero(), zero()],
                    vec![q(2, 3), zero(), zero()],
                    vec![q(2, 3) - &quarter_inv, quarter_inv, zero()],
                ],
                vec![q(1, 4), q(3, 4) - &alpha, alpha],
            )
        }
        FamilyKind::Erk33CaseIII => {
            let quarter_inv = (qi(4) * &alpha).recip();
            (
                vec![
                    vec![zero(), zero(), zero()],
                    vec![q(2, 3), zero(), zero()],
                    vec![-&quarter_inv, quarter_inv, zero()],
                ],
                vec![q(1, 4) - &alpha, q(3, 4), alpha],
            )
        }
    };
    ButcherTableau::new(a, b)
}

/// The classical four-stage fourth-order method.
pub fn rk4_classical() -> ButcherTableau {
    let z = Q::zero;
    ButcherTableau::new(
        vec![
            vec![z(), z(), z(), z()],
            vec![q(1, 2), z(), z(), z()],
            vec![z(), q(1, 2), z(), z()],
            vec![z(), z(), qi(1), z()],
        ],
        vec![q(1, 6), q(1, 3), q(1, 3), q(1, 6)],
    )
    .expect("rk4 tableau is valid")
}

pub fn forward_euler() -> ButcherTableau {
    ButcherTableau::new(vec![vec![Q::zero()]], vec![Q::one()]).expect("valid")
}

/// Parses a method shorthand: `erk22:1`, `erk33c1:1/2,3/4`, `erk33c2:9/16`,
/// `erk33c3:1`, `rk4`, `fe`.
pub fn parse_method(spec: &str) -> Result<ButcherTableau> {
    let spec = spec.trim();
    match spec {
        "rk4" => return Ok(rk4_classical()),
        "fe" => return Ok(forward_euler()),
        _ => {}
    }
    let (name, args) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("unknown method {spec:?}")))?;
    let kind = FamilyKind::from_shorthand(name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown family {name:?}")))?;
    let params = args.split(',').map(parse_q).collect::<Result<Vec<_>>>()?;
    make_family(kind, &params)
}

impl fmt::Display for ButcherTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (ci, row) in self.c.iter().zip(&self.a) {
            write!(f, "{ci:>6} |")?;
            for x in row {
                write!(f, " {x:>6}")?;
            }
            writeln!(f)?;
        }
        write!(f, "{:>6} |", "")?;
        for x in &self.b {
            write!(f, " {x:>6}")?;
        }
        Ok(())
    }
}
