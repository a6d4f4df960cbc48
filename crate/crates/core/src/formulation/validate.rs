use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::problem::{Family, MiqpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Inequality,
    Equality,
    Bound,
    Integrality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub family: Family,
    pub label: String,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FamilySummary {
    pub violated: usize,
    pub worst: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
    pub families: BTreeMap<Family, FamilySummary>,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn in_family(&self, family: Family) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.family == family)
    }

    fn push(&mut self, v: Violation) {
        let s = self.families.entry(v.family).or_default();
        s.violated += 1;
        s.worst = s.worst.max(v.amount);
        self.violations.push(v);
    }
}

/// Lists every row, bound and integrality requirement `x` violates by more than `tol`.
pub fn validate_assignment(problem: &MiqpProblem, x: &[f64], tol: f64) -> Result<ViolationReport> {
    if x.len() != problem.num_vars {
        return Err(Error::Contract(format!(
            "assignment has {} entries, problem has {} variables",
            x.len(),
            problem.num_vars
        )));
    }
    let family_of = |j: usize| problem.layout.as_ref().map_or(Family::Generic, |l| l.family(j));
    let mut report = ViolationReport::default();
    for row in &problem.inequalities {
        let excess = row.activity(x) - row.rhs;
        if excess > tol {
            report.push(Violation {
                kind: ViolationKind::Inequality,
                family: row.tag.family,
                label: row.tag.to_string(),
                amount: excess,
            });
        }
    }
    for row in &problem.equalities {
        let excess = (row.activity(x) - row.rhs).abs();
        if excess > tol {
            report.push(Violation {
                kind: ViolationKind::Equality,
                family: row.tag.family,
                label: row.tag.to_string(),
                amount: excess,
            });
        }
    }
    for j in 0..problem.num_vars {
        let excess = (problem.lower[j] - x[j]).max(x[j] - problem.upper[j]);
        if excess > tol || x[j].is_nan() {
            report.push(Violation {
                kind: ViolationKind::Bound,
                family: family_of(j),
                label: problem.var_name(j),
                amount: if x[j].is_nan() { f64::INFINITY } else { excess },
            });
        }
    }
    for &j in &problem.binaries {
        let dist = x[j].abs().min((x[j] - 1.0).abs());
        if dist > tol {
            report.push(Violation {
                kind: ViolationKind::Integrality,
                family: family_of(j),
                label: problem.var_name(j),
                amount: dist,
            });
        }
    }
    Ok(report)
}
