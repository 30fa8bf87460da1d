//! A small exact linear-programming solver.
//!
//! Dense two-phase primal simplex over exact rationals with Bland's rule,
//! which cannot cycle. Problem sizes here are tiny (configuration polytopes
//! over active trees of at most a few hundred nodes), so a dense tableau is
//! the right tool; the constraint matrices are leaf-ancestor incidence
//! matrices of laminar families, which keeps every tableau entry small.

use thiserror::Error;

use crate::num::{q, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct LpRow {
    /// Sparse structural coefficients `(variable, coefficient)`.
    pub coeffs: Vec<(usize, Q)>,
    pub cmp: Cmp,
    pub rhs: Q,
}

/// Minimize `objective . x` subject to the rows, with `x >= 0`.
#[derive(Clone, Debug, Default)]
pub struct Lp {
    pub num_vars: usize,
    pub objective: Vec<Q>,
    pub rows: Vec<LpRow>,
}

impl Lp {
    pub fn new(num_vars: usize) -> Self {
        Lp {
            num_vars,
            objective: vec![q(0); num_vars],
            rows: Vec::new(),
        }
    }

    pub fn set_objective(&mut self, var: usize, coeff: Q) {
        self.objective[var] = coeff;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, Q)>, cmp: Cmp, rhs: Q) {
        self.rows.push(LpRow { coeffs, cmp, rhs });
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub values: Vec<Q>,
    pub objective: Q,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
}

struct Tableau {
    /// rows[i][j] for j in 0..width, last column is the rhs.
    rows: Vec<Vec<Q>>,
    /// Objective row (reduced costs, negated objective value in last slot).
    cost: Vec<Q>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let pivot_value = self.rows[row][col];
        for x in self.rows[row].iter_mut() {
            *x /= pivot_value;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != q(0) {
                for (x, p) in r.iter_mut().zip(pivot_row.iter()) {
                    *x -= factor * *p;
                }
            }
        }
        let factor = self.cost[col];
        if factor != q(0) {
            for (x, p) in self.cost.iter_mut().zip(pivot_row.iter()) {
                *x -= factor * *p;
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: entering column is the lowest-index one with a negative
    /// reduced cost; leaving row is the min-ratio row, ties broken by the
    /// lowest basic variable index.
    fn simplex(&mut self, eligible: usize) -> Result<(), LpError> {
        loop {
            let mut entering = None;
            for j in 0..eligible {
                if self.cost[j] < q(0) {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, Q)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][col];
                if *a > q(0) {
                    let ratio = self.rows[i][self.width - 1] / *a;
                    let better = match &leaving {
                        None => true,
                        Some((li, lr)) => {
                            ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
    }
}

/// Solve with the two-phase simplex method.
pub fn solve(lp: &Lp) -> Result<LpSolution, LpError> {
    let n = lp.num_vars;
    let m = lp.rows.len();

    // Column layout: structural | slack/surplus | artificial | rhs.
    let mut num_slack = 0;
    for row in &lp.rows {
        if row.cmp != Cmp::Eq {
            num_slack += 1;
        }
    }
    let slack_base = n;
    let art_base = n + num_slack;
    let width = art_base + m + 1;

    let mut t = Tableau {
        rows: vec![vec![q(0); width]; m],
        cost: vec![q(0); width],
        basis: vec![0; m],
        width,
    };

    let mut slack_idx = 0;
    for (i, row) in lp.rows.iter().enumerate() {
        let flip = row.rhs < q(0);
        let sign = if flip { q(-1) } else { q(1) };
        for (var, c) in &row.coeffs {
            t.rows[i][*var] += sign * *c;
        }
        t.rows[i][width - 1] = sign * row.rhs;
        let cmp = match (row.cmp, flip) {
            (Cmp::Eq, _) => Cmp::Eq,
            (Cmp::Le, false) | (Cmp::Ge, true) => Cmp::Le,
            (Cmp::Ge, false) | (Cmp::Le, true) => Cmp::Ge,
        };
        match cmp {
            Cmp::Le => {
                t.rows[i][slack_base + slack_idx] = q(1);
                t.basis[i] = slack_base + slack_idx;
                slack_idx += 1;
            }
            Cmp::Ge => {
                t.rows[i][slack_base + slack_idx] = q(-1);
                slack_idx += 1;
                t.rows[i][art_base + i] = q(1);
                t.basis[i] = art_base + i;
            }
            Cmp::Eq => {
                t.rows[i][art_base + i] = q(1);
                t.basis[i] = art_base + i;
            }
        }
    }

    // Phase 1: minimize the sum of artificial variables.
    let mut need_phase1 = false;
    for (i, row) in t.rows.iter().enumerate() {
        if t.basis[i] >= art_base {
            need_phase1 = true;
            for (j, x) in row.iter().enumerate() {
                t.cost[j] -= *x;
            }
        }
    }
    if need_phase1 {
        t.simplex(art_base)?;
        let phase1_value = -t.cost[width - 1];
        if phase1_value != q(0) {
            return Err(LpError::Infeasible);
        }
        // Pivot lingering zero-valued artificials out of the basis.
        for i in 0..m {
            if t.basis[i] >= art_base {
                let col = (0..art_base).find(|j| t.rows[i][*j] != q(0));
                if let Some(j) = col {
                    t.pivot(i, j); // a redundant all-zero row is harmless
                }
            }
        }
    }

    // Phase 2: install the real objective, priced out over the basis.
    t.cost = vec![q(0); width];
    for (j, c) in lp.objective.iter().enumerate() {
        t.cost[j] = *c;
    }
    for i in 0..m {
        let b = t.basis[i];
        if b < art_base {
            let factor = t.cost[b];
            if factor != q(0) {
                let row = t.rows[i].clone();
                for (x, p) in t.cost.iter_mut().zip(row.iter()) {
                    *x -= factor * *p;
                }
            }
        }
    }
    t.simplex(art_base)?;

    let mut values = vec![q(0); n];
    for (i, b) in t.basis.iter().enumerate() {
        if *b < n {
            values[*b] = t.rows[i][width - 1];
        }
    }
    let mut objective = q(0);
    for (v, c) in values.iter().zip(lp.objective.iter()) {
        objective += *v * *c;
    }
    Ok(LpSolution { values, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::frac;

    #[test]
    fn simple_minimization() {
        // min x + y  s.t.  x + y >= 2, x <= 5
        let mut lp = Lp::new(2);
        lp.set_objective(0, q(1));
        lp.set_objective(1, q(1));
        lp.add_row(vec![(0, q(1)), (1, q(1))], Cmp::Ge, q(2));
        lp.add_row(vec![(0, q(1))], Cmp::Le, q(5));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.objective, q(2));
    }

    #[test]
    fn equality_and_fractional_optimum() {
        // min 2x + 3y  s.t.  x + y = 1, x - y <= 1/3
        let mut lp = Lp::new(2);
        lp.set_objective(0, q(2));
        lp.set_objective(1, q(3));
        lp.add_row(vec![(0, q(1)), (1, q(1))], Cmp::Eq, q(1));
        lp.add_row(vec![(0, q(1)), (1, q(-1))], Cmp::Le, frac(1, 3));
        let sol = solve(&lp).unwrap();
        // Optimum at x = 2/3, y = 1/3.
        assert_eq!(sol.values, vec![frac(2, 3), frac(1, 3)]);
        assert_eq!(sol.objective, frac(7, 3));
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = Lp::new(1);
        lp.set_objective(0, q(1));
        lp.add_row(vec![(0, q(1))], Cmp::Ge, q(3));
        lp.add_row(vec![(0, q(1))], Cmp::Le, q(1));
        assert_eq!(solve(&lp), Err(LpError::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = Lp::new(1);
        lp.set_objective(0, q(-1));
        lp.add_row(vec![(0, q(1))], Cmp::Ge, q(0));
        assert_eq!(solve(&lp), Err(LpError::Unbounded));
    }

    #[test]
    fn negative_rhs_normalized() {
        // min x  s.t.  -x <= -2  (i.e. x >= 2)
        let mut lp = Lp::new(1);
        lp.set_objective(0, q(1));
        lp.add_row(vec![(0, q(-1))], Cmp::Le, q(-2));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.objective, q(2));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Multiple redundant constraints meeting at the optimum.
        let mut lp = Lp::new(3);
        lp.set_objective(0, q(1));
        lp.set_objective(1, q(1));
        lp.set_objective(2, q(1));
        lp.add_row(vec![(0, q(1)), (1, q(1)), (2, q(1))], Cmp::Eq, q(1));
        lp.add_row(vec![(0, q(1)), (1, q(1))], Cmp::Ge, q(1));
        lp.add_row(vec![(0, q(1))], Cmp::Ge, q(0));
        lp.add_row(vec![(1, q(1))], Cmp::Ge, q(0));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.objective, q(1));
        assert_eq!(sol.values[2], q(0));
    }

    /// Cross-check random LPs against exhaustive vertex enumeration.
    #[test]
    fn matches_vertex_enumeration_on_random_problems() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(2..4usize);
            let m = rng.gen_range(1..4usize);
            let mut lp = Lp::new(n);
            for j in 0..n {
                lp.set_objective(j, q(rng.gen_range(-3..4)));
            }
            // Box to keep it bounded.
            for j in 0..n {
                lp.add_row(vec![(j, q(1))], Cmp::Le, q(3));
            }
            for _ in 0..m {
                let coeffs: Vec<(usize, Q)> =
                    (0..n).map(|j| (j, q(rng.gen_range(-2..3)))).collect();
                lp.add_row(coeffs, Cmp::Le, q(rng.gen_range(0..5)));
            }
            let sol = solve(&lp).unwrap();
            // Brute force over a fine grid of candidate points (the data is
            // integral with small coefficients, so optima land on a coarse
            // lattice; a 1/2-step grid over the box suffices to match).
            let mut best: Option<Q> = None;
            let steps = 7; // 0, 1/2, ..., 3
            let mut idx = vec![0usize; n];
            loop {
                let point: Vec<Q> = idx.iter().map(|i| frac(*i as i64, 2)).collect();
                let feasible = lp.rows.iter().all(|row| {
                    let lhs: Q = row
                        .coeffs
                        .iter()
                        .map(|(j, c)| *c * point[*j])
                        .fold(q(0), |a, b| a + b);
                    match row.cmp {
                        Cmp::Le => lhs <= row.rhs,
                        Cmp::Ge => lhs >= row.rhs,
                        Cmp::Eq => lhs == row.rhs,
                    }
                });
                if feasible {
                    let obj: Q = point
                        .iter()
                        .zip(lp.objective.iter())
                        .map(|(x, c)| *x * *c)
                        .fold(q(0), |a, b| a + b);
                    if best.as_ref().is_none_or(|b| obj < *b) {
                        best = Some(obj);
                    }
                }
                let mut k = 0;
                loop {
                    if k == n {
                        break;
                    }
                    idx[k] += 1;
                    if idx[k] < steps {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == n {
                    break;
                }
            }
            if let Some(best) = best {
                assert!(sol.objective <= best, "simplex worse than grid");
            }
        }
    }
}
