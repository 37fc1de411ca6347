//! Classical upper bounds: the stability polynomial, its threshold factor
//! `R(phi)` and the SSP coefficient of a tableau.
//!
//! Both radii are the first point where some polynomial in `r` turns
//! negative. For `R(phi)` those are the Taylor coefficients of `phi(z - r)`;
//! for the SSP coefficient they are the entries of `K (I + rK)^{-1}` and
//! `(I + rK)^{-1} 1`, which are polynomials because `K` is nilpotent. The
//! feasible set is an interval in both cases, so the first crossing is the
//! radius and the root machinery makes it exact whenever it is rational.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::rational::{qi, Q};
use crate::roots::{self, Crossing, MinValue};
use crate::tableau::ButcherTableau;

/// `phi(z) = sum_k coeffs[k] z^k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityPolynomial {
    #[serde(with = "crate::rational::serde_q_vec")]
    coeffs: Vec<Q>,
}

impl StabilityPolynomial {
    pub fn new(coeffs: Vec<Q>) -> Self {
        Self { coeffs: roots::trim(coeffs) }
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, z: &Q) -> Q {
        roots::eval(&self.coeffs, z)
    }

    /// Coefficients of `phi(z - r)` as polynomials in `r`:
    /// `c_k(r) = sum_{j >= k} phi_j binom(j, k) (-r)^(j-k)`.
    pub fn shifted_coefficients(&self) -> Vec<Vec<Q>> {
        let n = self.coeffs.len();
        (0..n)
            .map(|k| {
                let mut poly = vec![Q::zero(); n - k];
                let mut binom = Q::one();
                for j in k..n {
                    if j > k {
                        binom = binom * qi(j as i64) / qi((j - k) as i64);
                    }
                    let sign = if (j - k) % 2 == 0 { Q::one() } else { -Q::one() };
                    poly[j - k] = &self.coeffs[j] * &binom * sign;
                }
                roots::trim(poly)
            })
            .collect()
    }
}

impl fmt::Display for StabilityPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| match k {
                0 => format!("{c}"),
                1 => format!("({c})·z"),
                _ => format!("({c})·z^{k}"),
            })
            .collect();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

/// `phi_0 = 1`, `phi_k = b^T A^(k-1) e`.
pub fn stability_polynomial(t: &ButcherTableau) -> StabilityPolynomial {
    let m = t.stages();
    let mut coeffs = vec![Q::one()];
    let mut v = vec![Q::one(); m];
    for _ in 0..m {
        coeffs.push(t.b().iter().zip(&v).map(|(b, x)| b * x).sum());
        v = t.mat_vec(&v);
    }
    StabilityPolynomial::new(coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusKind {
    RPhi,
    Ssp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RadiusValue {
    Exact {
        #[serde(with = "crate::rational::serde_q")]
        value: Q,
    },
    Interval {
        #[serde(with = "crate::rational::serde_q")]
        lo: Q,
        #[serde(with = "crate::rational::serde_q")]
        hi: Q,
    },
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RadiusResult {
    pub kind: RadiusKind,
    pub value: RadiusValue,
}

impl RadiusResult {
    pub fn exact(&self) -> Option<&Q> {
        match &self.value {
            RadiusValue::Exact { value } => Some(value),
            _ => None,
        }
    }

    /// Certified lower end; `None` when infinite.
    pub fn lo(&self) -> Option<&Q> {
        match &self.value {
            RadiusValue::Exact { value } => Some(value),
            RadiusValue::Interval { lo, .. } => Some(lo),
            RadiusValue::Infinite => None,
        }
    }

    /// Certified upper end; `None` when infinite.
    pub fn hi(&self) -> Option<&Q> {
        match &self.value {
            RadiusValue::Exact { value } => Some(value),
            RadiusValue::Interval { hi, .. } => Some(hi),
            RadiusValue::Infinite => None,
        }
    }
}

impl fmt::Display for RadiusResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            RadiusValue::Exact { value } => write!(f, "{value}"),
            RadiusValue::Interval { lo, hi } => write!(f, "[{lo}, {hi}]"),
            RadiusValue::Infinite => f.write_str("inf"),
        }
    }
}

fn first_crossing(kind: RadiusKind, polys: &[Vec<Q>], tol: &Q) -> RadiusResult {
    let mut found = Vec::new();
    for (idx, p) in polys.iter().enumerate() {
        match roots::first_negative_crossing(p) {
            Crossing::Immediate { .. } => {
                return RadiusResult { kind, value: RadiusValue::Exact { value: Q::zero() } };
            }
            Crossing::Never => {}
            Crossing::At(root) => found.push((idx, root)),
        }
    }
    let value = match roots::min_crossing(found, tol) {
        None => RadiusValue::Infinite,
        Some(m) => match m.value {
            MinValue::Exact(value) => RadiusValue::Exact { value },
            MinValue::Interval { lo, hi } => RadiusValue::Interval { lo, hi },
        },
    };
    RadiusResult { kind, value }
}

pub fn radius_abs_monotonicity(phi: &StabilityPolynomial, tol: &Q) -> RadiusResult {
    first_crossing(RadiusKind::RPhi, &phi.shifted_coefficients(), tol)
}

/// The `(m+1) x (m+1)` strictly lower triangular matrix `[[A, 0], [b^T, 0]]`.
fn compound(t: &ButcherTableau) -> Vec<Vec<Q>> {
    let m = t.stages();
    let mut k = vec![vec![Q::zero(); m + 1]; m + 1];
    for (i, row) in k.iter_mut().enumerate().take(m) {
        for (j, x) in row.iter_mut().enumerate().take(m) {
            *x = t.a(i, j).clone();
        }
    }
    for j in 0..m {
        k[m][j] = t.b()[j].clone();
    }
    k
}

fn mat_mul(x: &[Vec<Q>], y: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = x.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|l| &x[i][l] * &y[l][j]).sum())
                .collect()
        })
        .collect()
}

/// Polynomial entries (in `r`) of `K (I + rK)^{-1}` followed by those of
/// `(I + rK)^{-1} 1`.
fn ssp_polynomials(t: &ButcherTableau) -> Vec<Vec<Q>> {
    let k = compound(t);
    let n = k.len();
    // powers[j] = K^j; (I + rK)^{-1} = sum_j (-r)^j K^j.
    let mut powers = vec![(0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect::<Vec<Q>>())
        .collect::<Vec<_>>()];
    for _ in 1..=n {
        let next = mat_mul(powers.last().unwrap(), &k);
        powers.push(next);
    }
    let sign = |j: usize| if j % 2 == 0 { Q::one() } else { -Q::one() };
    let mut polys = Vec::new();
    for i in 0..n {
        for l in 0..n {
            // K (I + rK)^{-1} = sum_j (-r)^j K^(j+1)
            let p: Vec<Q> = (0..n).map(|j| &powers[j + 1][i][l] * sign(j)).collect();
            polys.push(roots::trim(p));
        }
    }
    for i in 0..n {
        let p: Vec<Q> = (0..n)
            .map(|j| powers[j][i].iter().sum::<Q>() * sign(j))
            .collect();
        polys.push(roots::trim(p));
    }
    polys
}

pub fn ssp_coefficient(t: &ButcherTableau, tol: &Q) -> RadiusResult {
    first_crossing(RadiusKind::Ssp, &ssp_polynomials(t), tol)
}

/// Direct absolute-monotonicity test at a single `r >= 0`, solving
/// `(I + rK) X = K` and `(I + rK) y = 1` by forward substitution.
pub fn ssp_feasible(t: &ButcherTableau, r: &Q) -> bool {
    let k = compound(t);
    let n = k.len();
    // Unit lower triangular solve of (I + rK) x = rhs.
    let solve = |rhs: &[Q]| -> Vec<Q> {
        let mut x: Vec<Q> = Vec::with_capacity(n);
        for i in 0..n {
            let s: Q = (0..i).map(|j| &k[i][j] * &x[j]).sum();
            x.push(&rhs[i] - r * s);
        }
        x
    };
    let ones = vec![Q::one(); n];
    if solve(&ones).iter().any(|v| v.is_negative()) {
        return false;
    }
    (0..n).all(|col| {
        let rhs: Vec<Q> = (0..n).map(|i| k[i][col].clone()).collect();
        solve(&rhs).iter().all(|v| !v.is_negative())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::tableau::{forward_euler, make_family, rk4_classical, FamilyKind};

    fn tol() -> Q {
        q(1, 1 << 40)
    }

    #[test]
    fn stability_polynomials() {
        let erk22 = make_family(FamilyKind::Erk22, &[q(3, 7)]).unwrap();
        assert_eq!(stability_polynomial(&erk22).coeffs(), &[qi(1), qi(1), q(1, 2)]);
        assert_eq!(
            stability_polynomial(&rk4_classical()).coeffs(),
            &[qi(1), qi(1), q(1, 2), q(1, 6), q(1, 24)]
        );
        assert_eq!(stability_polynomial(&forward_euler()).coeffs(), &[qi(1), qi(1)]);
    }

    #[test]
    fn threshold_factors() {
        for coeffs in [
            vec![qi(1), qi(1)],
            vec![qi(1), qi(1), q(1, 2)],
            vec![qi(1), qi(1), q(1, 2), q(1, 6)],
            vec![qi(1), qi(1), q(1, 2), q(1, 6), q(1, 24)],
        ] {
            let r = radius_abs_monotonicity(&StabilityPolynomial::new(coeffs), &tol());
            assert_eq!(r.exact(), Some(&qi(1)));
        }
        // 1 + z + z^2/4: binding coefficient 1 - r/2 gives 2.
        let r = radius_abs_monotonicity(&StabilityPolynomial::new(vec![qi(1), qi(1), q(1, 4)]), &tol());
        assert_eq!(r.exact(), Some(&qi(2)));
    }

    #[test]
    fn erk22_ssp() {
        for (alpha, c) in [(q(3, 4), q(2, 3)), (qi(1), qi(1)), (qi(2), q(1, 2)), (q(1, 4), qi(0))] {
            let t = make_family(FamilyKind::Erk22, &[alpha]).unwrap();
            assert_eq!(ssp_coefficient(&t, &tol()).exact(), Some(&c));
        }
    }

    #[test]
    fn other_ssp_values() {
        let t = make_family(FamilyKind::Erk33CaseII, &[q(9, 16)]).unwrap();
        assert_eq!(ssp_coefficient(&t, &tol()).exact(), Some(&q(3, 4)));
        let t = make_family(FamilyKind::Erk33CaseIII, &[qi(1)]).unwrap();
        assert_eq!(ssp_coefficient(&t, &tol()).exact(), Some(&qi(0)));
        assert_eq!(ssp_coefficient(&forward_euler(), &tol()).exact(), Some(&qi(1)));
        assert_eq!(ssp_coefficient(&rk4_classical(), &tol()).exact(), Some(&qi(0)));
    }

    #[test]
    fn feasibility_ladder_is_monotone() {
        let tables = [
            make_family(FamilyKind::Erk22, &[q(3, 4)]).unwrap(),
            make_family(FamilyKind::Erk33CaseII, &[q(5, 8)]).unwrap(),
            make_family(FamilyKind::Erk33CaseI, &[q(1, 2), q(3, 4)]).unwrap(),
        ];
        for t in &tables {
            let c = ssp_coefficient(t, &tol());
            let c = c.exact().unwrap().clone();
            let ladder: Vec<bool> = (0..=40).map(|k| ssp_feasible(t, &q(k, 16))).collect();
            for w in ladder.windows(2) {
                assert!(w[0] || !w[1], "feasible set is not an interval");
            }
            assert!(ssp_feasible(t, &c));
            assert!(!ssp_feasible(t, &(&c + q(1, 1 << 20))));
        }
    }
}
