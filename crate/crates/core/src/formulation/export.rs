//! Writer for the CPLEX LP text format (quadratic objective, linear rows,
//! bounds, binaries), readable by most MIP solvers.

use std::fmt::Write;

use crate::problem::{MiqpProblem, SparseRow};

const TERMS_PER_LINE: usize = 6;

pub fn write_lp(problem: &MiqpProblem) -> String {
    let mut out = String::new();
    let name = |j: usize| problem.var_name(j);
    writeln!(out, "\\ footstep MIQP: {} variables, {} binaries", problem.num_vars, problem.binaries.len()).unwrap();
    writeln!(out, "Minimize").unwrap();
    let mut terms: Vec<String> = problem
        .linear
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(j, &c)| format!("{} {}", signed(c), name(j)))
        .collect();
    if problem.constant != 0.0 {
        terms.push(format!("{} Constant", signed(problem.constant)));
    }
    let quad: Vec<String> = problem
        .quad
        .iter()
        .filter(|(_, &q)| q != 0.0)
        .map(|(&(i, j), &q)| {
            if i == j {
                format!("{} {} ^ 2", signed(q), name(i))
            } else {
                format!("{} {} * {}", signed(2.0 * q), name(i), name(j))
            }
        })
        .collect();
    write!(out, " obj:").unwrap();
    write_wrapped(&mut out, &terms);
    if !quad.is_empty() {
        write!(out, "\n + [").unwrap();
        write_wrapped(&mut out, &quad);
        write!(out, " ] / 2").unwrap();
    }
    if terms.is_empty() && quad.is_empty() {
        write!(out, " 0 {}", name(0)).unwrap();
    }
    writeln!(out).unwrap();

    writeln!(out, "Subject To").unwrap();
    let mut write_row = |row: &SparseRow, sense: &str, idx: usize| {
        let label = format!("{}_{}_{}_{}", row.tag.kind, row.tag.index, row.tag.sub, idx);
        let terms: Vec<String> = row.coeffs.iter().map(|&(j, a)| format!("{} {}", signed(a), name(j))).collect();
        write!(out, " {label}:").unwrap();
        if terms.is_empty() {
            write!(out, " 0 {}", name(0)).unwrap();
        }
        write_wrapped(&mut out, &terms);
        writeln!(out, " {sense} {}", row.rhs).unwrap();
    };
    for (idx, row) in problem.equalities.iter().enumerate() {
        write_row(row, "=", idx);
    }
    for (idx, row) in problem.inequalities.iter().enumerate() {
        write_row(row, "<=", idx);
    }

    writeln!(out, "Bounds").unwrap();
    if problem.constant != 0.0 {
        writeln!(out, " Constant = 1").unwrap();
    }
    for j in 0..problem.num_vars {
        if problem.is_binary(j) {
            continue;
        }
        let (lo, hi) = (problem.lower[j], problem.upper[j]);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => writeln!(out, " {lo} <= {} <= {hi}", name(j)).unwrap(),
            (true, false) => writeln!(out, " {} >= {lo}", name(j)).unwrap(),
            (false, true) => writeln!(out, " -inf <= {} <= {hi}", name(j)).unwrap(),
            (false, false) => writeln!(out, " {} free", name(j)).unwrap(),
        }
    }
    if !problem.binaries.is_empty() {
        writeln!(out, "Binaries").unwrap();
        for chunk in problem.binaries.chunks(8) {
            let names: Vec<String> = chunk.iter().map(|&j| name(j)).collect();
            writeln!(out, " {}", names.join(" ")).unwrap();
        }
    }
    writeln!(out, "End").unwrap();
    out
}

fn signed(v: f64) -> String {
    if v < 0.0 {
        format!("- {}", -v)
    } else {
        format!("+ {v}")
    }
}

fn write_wrapped(out: &mut String, terms: &[String]) {
    for (k, t) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        out.push(' ');
        out.push_str(t);
    }
}
