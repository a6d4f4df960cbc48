//! Canonical mixed-integer quadratic program.
//!
//! ```text
//! minimize    1/2 x' Q x + c' x + k
//! subject to  A_in x <= b_in,  A_eq x = b_eq,  l <= x <= u,
//!             x_j in {0, 1} for j in binaries
//! ```

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::formulation::VariableLayout;

/// Constraint family a row belongs to, used for violation summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Geometric,
    Reachability,
    Region,
    Trig,
    Trim,
    Generic,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Geometric => "geometric",
            Family::Reachability => "reachability",
            Family::Region => "region",
            Family::Trig => "trig",
            Family::Trim => "trim",
            Family::Generic => "generic",
        };
        f.write_str(name)
    }
}

/// Compact row label: `kind[index,sub]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowTag {
    pub family: Family,
    pub kind: &'static str,
    pub index: usize,
    pub sub: usize,
}

impl RowTag {
    pub const fn new(family: Family, kind: &'static str, index: usize, sub: usize) -> Self {
        Self { family, kind, index, sub }
    }

    pub const fn generic(index: usize) -> Self {
        Self::new(Family::Generic, "row", index, 0)
    }
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},{}]", self.kind, self.index, self.sub)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub tag: RowTag,
}

impl SparseRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiqpProblem {
    pub num_vars: usize,
    /// Upper triangle (`i <= j`) of the symmetric matrix `Q`.
    pub quad: BTreeMap<(usize, usize), f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub inequalities: Vec<SparseRow>,
    pub equalities: Vec<SparseRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Sorted indices of binary variables.
    pub binaries: Vec<usize>,
    pub layout: Option<VariableLayout>,
}

impl MiqpProblem {
    /// An unconstrained problem over `n` free continuous variables.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            quad: BTreeMap::new(),
            linear: vec![0.0; num_vars],
            constant: 0.0,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            binaries: Vec::new(),
            layout: None,
        }
    }

    /// Adds `w * x_i * x_j` to the objective (`w * x_i^2` when `i == j`).
    pub fn add_product(&mut self, i: usize, j: usize, w: f64) {
        if w == 0.0 {
            return;
        }
        let (key, value) = if i == j { ((i, i), 2.0 * w) } else { ((i.min(j), i.max(j)), w) };
        *self.quad.entry(key).or_insert(0.0) += value;
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, tag: RowTag) {
        self.inequalities.push(SparseRow { coeffs: merge_terms(coeffs), rhs, tag });
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, tag: RowTag) {
        self.equalities.push(SparseRow { coeffs: merge_terms(coeffs), rhs, tag });
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn mark_binary(&mut self, j: usize) {
        self.set_bounds(j, 0.0, 1.0);
        if let Err(pos) = self.binaries.binary_search(&j) {
            self.binaries.insert(pos, j);
        }
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.binaries.binary_search(&j).is_ok()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let quad: f64 = self
            .quad
            .iter()
            .map(|(&(i, j), &q)| if i == j { 0.5 * q * x[i] * x[i] } else { q * x[i] * x[j] })
            .sum();
        let lin: f64 = self.linear.iter().zip(x).map(|(c, v)| c * v).sum();
        quad + lin + self.constant
    }

    /// Gradient `Q x + c`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.linear.clone();
        for (&(i, j), &q) in &self.quad {
            g[i] += q * x[j];
            if i != j {
                g[j] += q * x[i];
            }
        }
        g
    }

    pub fn continuous_count(&self) -> usize {
        self.num_vars - self.binaries.len()
    }

    /// Smallest eigenvalue of `Q`, restricted to the variables it touches
    /// (all other rows and columns are zero). Returns 0 for an empty `Q`.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut touched: Vec<usize> = self.quad.keys().flat_map(|&(i, j)| [i, j]).collect();
        touched.sort_unstable();
        touched.dedup();
        if touched.is_empty() {
            return 0.0;
        }
        let pos: BTreeMap<usize, usize> = touched.iter().enumerate().map(|(p, &j)| (j, p)).collect();
        let k = touched.len();
        let mut m = DMatrix::<f64>::zeros(k, k);
        for (&(i, j), &q) in &self.quad {
            let (a, b) = (pos[&i], pos[&j]);
            m[(a, b)] += q;
            if a != b {
                m[(b, a)] += q;
            }
        }
        let min = m.symmetric_eigenvalues().min();
        // Untouched variables contribute zero eigenvalues.
        if k < self.num_vars { min.min(0.0) } else { min }
    }

    /// Checks structural invariants: binary bounds, row indices, and sizes.
    pub fn check_structure(&self) -> Result<(), String> {
        let n = self.num_vars;
        if self.linear.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err("vector lengths disagree with num_vars".into());
        }
        for &j in &self.binaries {
            if j >= n {
                return Err(format!("binary index {j} out of range"));
            }
            if self.lower[j] != 0.0 || self.upper[j] != 1.0 {
                return Err(format!("binary {j} does not have bounds [0, 1]"));
            }
        }
        for row in self.inequalities.iter().chain(&self.equalities) {
            if let Some(&(j, _)) = row.coeffs.iter().find(|&&(j, _)| j >= n) {
                return Err(format!("row {} references variable {j} >= {n}", row.tag));
            }
        }
        if let Some((&(i, j), _)) = self.quad.iter().find(|(&(i, j), _)| i > j || j >= n) {
            return Err(format!("quadratic entry ({i}, {j}) is malformed"));
        }
        Ok(())
    }

    pub fn var_name(&self, j: usize) -> String {
        match &self.layout {
            Some(layout) => layout.name(j),
            None => format!("x{j}"),
        }
    }
}

/// Merges duplicate indices and drops zero coefficients; output sorted by index.
pub fn merge_terms(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (j, a) in coeffs {
        match out.last_mut() {
            Some((k, b)) if *k == j => *b += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}
