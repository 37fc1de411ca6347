//! Published values recomputed and compared exactly.

use anyhow::{bail, Result};
use serde::Serialize;

use rkpos::adversary::rk4_counterexample;
use rkpos::bounds::ssp_coefficient;
use rkpos::gamma::{compute_gamma, default_tol, region_cell, region_scan, default_region_spacing, GammaCertificate};
use rkpos::polygen::StencilSpec;
use rkpos::rational::{parse_q, Q};
use rkpos::tableau::{make_family, rk4_classical, FamilyKind};

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub got: String,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.expected == self.got
    }
}

fn check(name: impl Into<String>, expected: impl ToString, got: impl ToString) -> Check {
    Check { name: name.into(), expected: expected.to_string(), got: got.to_string() }
}

fn r(s: &str) -> Q {
    parse_q(s).expect("embedded rational")
}

fn gamma_text(c: &GammaCertificate) -> String {
    match (&c.exact, &c.lower, &c.upper) {
        _ if c.unbounded => "inf".into(),
        (Some(x), _, _) => x.to_string(),
        (None, Some(lo), Some(hi)) => format!("[{lo},{hi}]"),
        _ => "?".into(),
    }
}

fn gamma(kind: FamilyKind, params: &[Q], stencil: &StencilSpec) -> Result<String> {
    let t = make_family(kind, params)?;
    Ok(gamma_text(&compute_gamma(&t, stencil, &default_tol())?))
}

pub fn run(id: &str) -> Result<Vec<Check>> {
    let up = StencilSpec::upwind();
    let mut out = Vec::new();
    match id {
        // Two-stage second-order family, gamma as a function of alpha.
        "erk22-table" => {
            let table = [("1/4", "0"), ("1/2", "1"), ("3/4", "1"), ("1", "1"), ("3/2", "2/3"), ("2", "1/2")];
            for (a, g) in table {
                out.push(check(format!("gamma erk22({a})"), g, gamma(FamilyKind::Erk22, &[r(a)], &up)?));
            }
        }
        // Case II: gamma curve samples and the SSP peak.
        "caseII-figure" => {
            let table = [
                ("5/16", "0"),
                ("3/8", "3/4"),
                ("7/16", "7/8"),
                ("1/2", "1"),
                ("5/8", "1"),
                ("3/4", "1"),
                ("1", "0"),
            ];
            for (a, g) in table {
                out.push(check(format!("gamma erk33c2({a})"), g, gamma(FamilyKind::Erk33CaseII, &[r(a)], &up)?));
            }
            let t = make_family(FamilyKind::Erk33CaseII, &[r("9/16")])?;
            let c = ssp_coefficient(&t, &default_tol());
            let got = c.exact().map(|x| x.to_string()).unwrap_or_else(|| c.to_string());
            out.push(check("ssp erk33c2(9/16)", "3/4", got));
        }
        // Case I: positivity at delta = 1 on the bowtie, gamma = 0 outside.
        "caseI-region" => {
            for (a, b) in [("1", "1/2"), ("1/2", "3/4")] {
                let cell = region_cell(&r(a), &r(b))?;
                out.push(check(format!("condition(1) erk33c1({a},{b})"), "true", fmt_flag(cell.condition_at_1)));
            }
            let cell = region_cell(&r("1/3"), &r("2/3"))?;
            out.push(check("gamma_zero erk33c1(1/3,2/3)", "true", fmt_flag(cell.gamma_zero)));
            let cells = region_scan(&default_region_spacing())?;
            let bowtie: Vec<_> = cells.iter().filter(|c| c.in_bowtie).collect();
            let failing = bowtie.iter().filter(|c| c.condition_at_1 != Some(true)).count();
            out.push(check(format!("bowtie grid points failing condition(1) of {}", bowtie.len()), 0, failing));
        }
        // Classical RK4: negative value for every step ratio.
        "rk4-negative" => {
            let report = rk4_counterexample(&r("1"))?;
            out.push(check("rk4 u1_4 at eps=1", "-1/24", &report.u1[3]));
            let c = compute_gamma(&rk4_classical(), &up, &default_tol())?;
            out.push(check("gamma rk4", "0", gamma_text(&c)));
        }
        // Heat equation with the two-stage family.
        "heat-table" => {
            let heat = StencilSpec::heat();
            for a in ["1/2", "3/4", "1"] {
                out.push(check(format!("gamma heat erk22({a})"), "1/2", gamma(FamilyKind::Erk22, &[r(a)], &heat)?));
            }
        }
        other => bail!("unknown table {other:?}"),
    }
    Ok(out)
}

fn fmt_flag(x: Option<bool>) -> String {
    x.map_or("singular".into(), |b| b.to_string())
}

pub fn to_csv(checks: &[Check]) -> String {
    let mut out = String::from("check,expected,got,status\n");
    for c in checks {
        let status = if c.ok() { "ok" } else { "mismatch" };
        out.push_str(&format!("\"{}\",{},{},{status}\n", c.name, c.expected, c.got));
    }
    out
}
