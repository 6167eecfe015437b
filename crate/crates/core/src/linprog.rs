//! Dense bounded-variable primal simplex.
//!
//! Solves `maximize c^T x` subject to `A x <= b` and `lo <= x <= hi`, where
//! bounds may be infinite. Variables are shifted or reflected so that every
//! working variable is `0 <= y <= u`, free variables are split in two, each
//! row gets a slack, and rows with a negative right-hand side get an
//! artificial variable for phase one. Entering and leaving variables follow
//! Bland's rule, which rules out cycling on degenerate vertices.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    /// A program with objective `c` (maximized) and box `lower <= x <= upper`.
    pub fn new(objective: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        if n == 0 {
            return Err(Error::InvalidLp("at least one variable is required".into()));
        }
        if lower.len() != n || upper.len() != n {
            return Err(Error::InvalidLp(format!(
                "{n} variables but {} lower and {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidLp("objective must be finite".into()));
        }
        for j in 0..n {
            let (lo, hi) = (lower[j], upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(Error::InvalidLp(format!("bad bounds [{lo}, {hi}] on x{j}")));
            }
        }
        Ok(Self {
            objective,
            lower,
            upper,
            rows: Vec::new(),
            rhs: Vec::new(),
        })
    }

    /// Adds the row `coeffs^T x <= rhs`.
    pub fn add_row(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<()> {
        if coeffs.len() != self.objective.len() {
            return Err(Error::InvalidLp(format!(
                "row has {} coefficients for {} variables",
                coeffs.len(),
                self.objective.len()
            )));
        }
        if !rhs.is_finite() || coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidLp("rows must be finite".into()));
        }
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest violation of any row or bound at `x` (zero when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| dot(a, x) - b);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .flat_map(|(v, (lo, hi))| [lo - v, v - hi]);
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point; empty unless the status is optimal.
    pub x: Vec<f64>,
    /// `c^T x` at the optimum, `-inf` when infeasible and `+inf` when unbounded.
    pub objective: f64,
    /// Row multipliers `pi >= 0` certifying optimality; empty unless optimal.
    pub duals: Vec<f64>,
    /// Largest violation of primal feasibility, dual feasibility or
    /// complementary slackness for `(x, duals)`; zero unless optimal.
    pub kkt_residual: f64,
}

/// How an original variable is expressed through working variables.
#[derive(Debug, Clone, Copy)]
enum Map {
    /// `x = offset + y`
    Shift { offset: f64, y: usize },
    /// `x = offset - y`
    Reflect { offset: f64, y: usize },
    /// `x = y_pos - y_neg`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    /// `B^{-1} A` for all columns, row-major `m x cols`.
    t: Vec<f64>,
    cols: usize,
    m: usize,
    basis: Vec<usize>,
    value: Vec<f64>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    enterable: Vec<bool>,
    iterations: usize,
    limit: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.cols + c]
    }

    fn is_basic(&self) -> Vec<bool> {
        let mut b = vec![false; self.cols];
        for &j in &self.basis {
            b[j] = true;
        }
        b
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * self.at(r, j);
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.cols;
        let p = self.at(r, c);
        for j in 0..cols {
            self.t[r * cols + j] /= p;
        }
        for k in 0..self.m {
            if k == r {
                continue;
            }
            let f = self.at(k, c);
            if f != 0.0 {
                for j in 0..cols {
                    self.t[k * cols + j] -= f * self.t[r * cols + j];
                }
                self.t[k * cols + c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Runs primal simplex iterations maximizing `cost` from the current basis.
    fn optimize(&mut self, cost: &[f64]) -> Result<Outcome> {
        let scale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        loop {
            if self.iterations >= self.limit {
                return Err(Error::LpIterationLimit(self.iterations));
            }
            let d = self.reduced_costs(cost);
            let basic = self.is_basic();
            let entering = (0..self.cols).find(|&j| {
                !basic[j]
                    && self.enterable[j]
                    && if self.at_upper[j] {
                        d[j] < -COST_TOL * scale
                    } else {
                        d[j] > COST_TOL * scale && self.upper[j] > 0.0
                    }
            });
            let Some(j) = entering else {
                return Ok(Outcome::Optimal);
            };
            self.iterations += 1;
            let sigma = if self.at_upper[j] { -1.0 } else { 1.0 };

            // Ratio test; ties go to the lowest basic variable index.
            let mut best: Option<(f64, usize, bool)> = None;
            for r in 0..self.m {
                let a = sigma * self.at(r, j);
                let bj = self.basis[r];
                let (limit, to_upper) = if a > PIVOT_TOL {
                    (self.value[r].max(0.0) / a, false)
                } else if a < -PIVOT_TOL && self.upper[bj].is_finite() {
                    ((self.upper[bj] - self.value[r]).max(0.0) / -a, true)
                } else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((t, br, _)) => limit < t || (limit == t && bj < self.basis[br]),
                };
                if better {
                    best = Some((limit, r, to_upper));
                }
            }
            let flip = self.upper[j];
            let theta = best.map_or(f64::INFINITY, |b| b.0);
            if flip <= theta {
                if !flip.is_finite() {
                    return Ok(Outcome::Unbounded);
                }
                for r in 0..self.m {
                    self.value[r] -= sigma * flip * self.at(r, j);
                }
                self.at_upper[j] = !self.at_upper[j];
                continue;
            }
            let (theta, r, to_upper) = best.expect("finite ratio has a row");
            for k in 0..self.m {
                self.value[k] -= sigma * theta * self.at(k, j);
            }
            let entering_value = if self.at_upper[j] {
                self.upper[j] - theta
            } else {
                theta
            };
            let leaving = self.basis[r];
            self.at_upper[leaving] = to_upper;
            self.at_upper[j] = false;
            self.pivot(r, j);
            self.value[r] = entering_value;
        }
    }

    /// Value of every working variable.
    fn solution(&self) -> Vec<f64> {
        let mut y: Vec<f64> = (0..self.cols)
            .map(|j| if self.at_upper[j] { self.upper[j] } else { 0.0 })
            .collect();
        for (r, &bj) in self.basis.iter().enumerate() {
            y[bj] = self.value[r];
        }
        y
    }
}

/// Solves `lp`. Infeasible and unbounded programs are reported through the
/// status; an error is returned only for exceeding the iteration budget.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.variables();
    let m = lp.row_count();

    let mut maps = Vec::with_capacity(n);
    let mut ycount = 0;
    let mut y_upper = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo.is_finite() {
            maps.push(Map::Shift { offset: lo, y: ycount });
            y_upper.push(hi - lo);
            ycount += 1;
        } else if hi.is_finite() {
            maps.push(Map::Reflect { offset: hi, y: ycount });
            y_upper.push(f64::INFINITY);
            ycount += 1;
        } else {
            maps.push(Map::Split {
                pos: ycount,
                neg: ycount + 1,
            });
            y_upper.extend([f64::INFINITY, f64::INFINITY]);
            ycount += 2;
        }
    }

    // Rows in working variables: A' y <= b'.
    let mut a_rows = vec![vec![0.0; ycount]; m];
    let mut b_rows = lp.rhs.clone();
    let mut cost = vec![0.0; ycount];
    for (j, map) in maps.iter().enumerate() {
        match *map {
            Map::Shift { offset, y } => {
                cost[y] = lp.objective[j];
                for i in 0..m {
                    a_rows[i][y] = lp.rows[i][j];
                    b_rows[i] -= lp.rows[i][j] * offset;
                }
            }
            Map::Reflect { offset, y } => {
                cost[y] = -lp.objective[j];
                for i in 0..m {
                    a_rows[i][y] = -lp.rows[i][j];
                    b_rows[i] -= lp.rows[i][j] * offset;
                }
            }
            Map::Split { pos, neg } => {
                cost[pos] = lp.objective[j];
                cost[neg] = -lp.objective[j];
                for i in 0..m {
                    a_rows[i][pos] = lp.rows[i][j];
                    a_rows[i][neg] = -lp.rows[i][j];
                }
            }
        }
    }

    let negated: Vec<bool> = b_rows.iter().map(|&b| b < 0.0).collect();
    let art_count = negated.iter().filter(|&&x| x).count();
    let slack0 = ycount;
    let art0 = ycount + m;
    let cols = ycount + m + art_count;

    let mut t = vec![0.0; m * cols];
    let mut basis = Vec::with_capacity(m);
    let mut value = Vec::with_capacity(m);
    let mut next_art = art0;
    for i in 0..m {
        let sign = if negated[i] { -1.0 } else { 1.0 };
        for j in 0..ycount {
            t[i * cols + j] = sign * a_rows[i][j];
        }
        t[i * cols + slack0 + i] = sign;
        if negated[i] {
            t[i * cols + next_art] = 1.0;
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(slack0 + i);
        }
        value.push(sign * b_rows[i]);
    }
    let mut upper = y_upper;
    upper.extend(std::iter::repeat_n(f64::INFINITY, m + art_count));

    let mut tab = Tableau {
        t,
        cols,
        m,
        basis,
        value,
        upper,
        at_upper: vec![false; cols],
        enterable: vec![true; cols],
        iterations: 0,
        limit: 200 * (cols + m) + 1000,
    };

    if art_count > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(art0) {
            *c = -1.0;
        }
        tab.optimize(&phase1)?;
        let infeas: f64 = tab
            .basis
            .iter()
            .zip(&tab.value)
            .filter(|(&bj, _)| bj >= art0)
            .map(|(_, v)| v.max(0.0))
            .sum();
        let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > FEAS_TOL * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NEG_INFINITY,
                duals: Vec::new(),
                kkt_residual: 0.0,
            });
        }
        for j in art0..cols {
            tab.upper[j] = 0.0;
            tab.enterable[j] = false;
        }
        for (r, &bj) in tab.basis.iter().enumerate() {
            if bj >= art0 {
                tab.value[r] = 0.0;
            }
        }
    }

    let mut full_cost = cost;
    full_cost.resize(cols, 0.0);
    if let Outcome::Unbounded = tab.optimize(&full_cost)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::INFINITY,
            duals: Vec::new(),
            kkt_residual: 0.0,
        });
    }

    let y = tab.solution();
    let x: Vec<f64> = maps
        .iter()
        .zip(lp.lower.iter().zip(&lp.upper))
        .map(|(map, (&lo, &hi))| {
            let v = match *map {
                Map::Shift { offset, y: i } => offset + y[i],
                Map::Reflect { offset, y: i } => offset - y[i],
                Map::Split { pos, neg } => y[pos] - y[neg],
            };
            v.clamp(lo, hi)
        })
        .collect();

    let duals: Vec<f64> = (0..m)
        .map(|i| {
            // The slack column is sign * e_i in a row scaled by sign, so the
            // two signs cancel.
            tab.basis
                .iter()
                .enumerate()
                .map(|(r, &bj)| full_cost[bj] * tab.at(r, slack0 + i))
                .sum()
        })
        .collect();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.value(&x),
        kkt_residual: kkt_residual(lp, &x, &duals),
        x,
        duals,
    })
}

/// Largest violation of the optimality conditions of `lp` at `(x, duals)`.
pub fn kkt_residual(lp: &LinearProgram, x: &[f64], duals: &[f64]) -> f64 {
    let mut res = lp.violation(x);
    for (i, &pi) in duals.iter().enumerate() {
        res = res.max(-pi);
        let slack = lp.rhs[i] - dot(&lp.rows[i], x);
        res = res.max((pi * slack).abs());
    }
    for j in 0..lp.variables() {
        let r = lp.objective[j]
            - duals
                .iter()
                .zip(&lp.rows)
                .map(|(pi, a)| pi * a[j])
                .sum::<f64>();
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let tol = FEAS_TOL * (1.0 + x[j].abs());
        let at_lo = (x[j] - lo).abs() <= tol;
        let at_hi = (hi - x[j]).abs() <= tol;
        let dual_violation = match (at_lo, at_hi) {
            (true, true) => 0.0,
            (true, false) => r.max(0.0),
            (false, true) => (-r).max(0.0),
            (false, false) => r.abs(),
        };
        res = res.max(dual_violation);
    }
    res
}
