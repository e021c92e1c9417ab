//! Dense two-phase tableau simplex for small equality-form programs
//! `min c·x  s.t.  A x = b, x ≥ 0`.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

/// Largest tableau (rows × columns) the solver will allocate.
pub const TABLEAU_CAP: usize = 40_000_000;

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    n_vars: usize,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
    cost: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram { n_vars, rows: Vec::new(), cost: vec![0.0; n_vars] }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Adds `Σ coeff·x_var = rhs`; repeated variables are summed.
    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push((terms, rhs));
    }

    pub fn set_cost(&mut self, cost: Vec<f64>) {
        assert_eq!(cost.len(), self.n_vars);
        self.cost = cost;
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let m = self.rows.len();
        let n = self.n_vars;
        let width = n + m + 1;
        let size = m.saturating_mul(width);
        if size > TABLEAU_CAP {
            return Err(Error::DimensionCap { size, cap: TABLEAU_CAP });
        }
        let rhs = n + m;
        let mut t = Tableau { width, data: vec![0.0; size], basis: (n..n + m).collect() };
        for (r, (terms, b)) in self.rows.iter().enumerate() {
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            for &(j, a) in terms {
                assert!(j < n, "variable {j} out of range");
                t.data[r * width + j] += sign * a;
            }
            t.data[r * width + n + r] = 1.0;
            t.data[r * width + rhs] = sign * b;
        }
        let cap = 50 * (n + m) + 10_000;
        let mut iterations = 0;

        // Phase 1: minimise the sum of artificials.
        let mut obj = vec![0.0; width];
        for r in 0..m {
            for j in 0..n {
                obj[j] -= t.at(r, j);
            }
            obj[rhs] -= t.at(r, rhs);
        }
        iterations += t.optimize(&mut obj, n, cap)?;
        if -obj[rhs] > FEAS_TOL * (1.0 + self.rows.iter().map(|r| r.1.abs()).sum::<f64>()) {
            return Err(Error::Infeasible);
        }
        // Drive artificials out of the basis; rows where that fails are redundant.
        let mut live: Vec<bool> = vec![true; m];
        for r in 0..m {
            if t.basis[r] >= n {
                match (0..n).find(|&j| t.at(r, j).abs() > 1e-9) {
                    Some(j) => t.pivot(r, j, &mut obj),
                    None => live[r] = false,
                }
            }
        }

        // Phase 2 on the structural columns.
        let mut obj = vec![0.0; width];
        obj[..n].copy_from_slice(&self.cost);
        for r in (0..m).filter(|&r| live[r]) {
            let cb = self.cost[t.basis[r]];
            if cb != 0.0 {
                for j in 0..width {
                    obj[j] -= cb * t.at(r, j);
                }
            }
        }
        for r in (0..m).filter(|&r| !live[r]) {
            t.basis[r] = usize::MAX;
        }
        iterations += t.optimize(&mut obj, n, cap)?;

        let mut x = vec![0.0; n];
        for r in 0..m {
            if t.basis[r] < n {
                x[t.basis[r]] = t.at(r, rhs).max(0.0);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        Ok(LpSolution { x, objective, iterations })
    }
}

struct Tableau {
    width: usize,
    data: Vec<f64>,
    /// Basic column of each row; `usize::MAX` marks a dropped redundant row.
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, j: usize) -> f64 {
        self.data[r * self.width + j]
    }

    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, pr: usize, pc: usize, obj: &mut [f64]) {
        let w = self.width;
        let p = self.at(pr, pc);
        let prow: Vec<f64> = self.data[pr * w..(pr + 1) * w].iter().map(|v| v / p).collect();
        self.data[pr * w..(pr + 1) * w].copy_from_slice(&prow);
        for r in 0..self.rows() {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f != 0.0 {
                let row = &mut self.data[r * w..(r + 1) * w];
                for (a, b) in row.iter_mut().zip(&prow) {
                    *a -= f * b;
                }
                row[pc] = 0.0;
            }
        }
        let f = obj[pc];
        if f != 0.0 {
            for (a, b) in obj.iter_mut().zip(&prow) {
                *a -= f * b;
            }
            obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Runs simplex pivots over columns `0..allowed` until no reduced cost is
    /// negative. Dantzig's rule, switching to Bland's after degenerate stalls.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize, cap: usize) -> Result<usize> {
        let rhs = self.width - 1;
        let mut iterations = 0;
        let mut stall = 0usize;
        loop {
            let bland = stall > 50;
            let mut entering = None;
            let mut best = -PIVOT_EPS;
            for (j, &d) in obj.iter().enumerate().take(allowed) {
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = entering else { return Ok(iterations) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows() {
                if self.basis[r] == usize::MAX {
                    continue;
                }
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.at(r, rhs).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-14
                                || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, ratio)) = leave else {
                return Err(Error::invalid("linear program is unbounded"));
            };
            stall = if ratio <= 1e-14 { stall + 1 } else { 0 };
            self.pivot(pr, pc, obj);
            iterations += 1;
            if iterations > cap {
                return Err(Error::SolverIterationCap(cap));
            }
        }
    }
}
