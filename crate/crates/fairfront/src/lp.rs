//! Dense linear programming core shared by the master problem, the exact
//! oracle, and the cut-search subproblems.
//!
//! The solver is a two-phase primal simplex on a dense tableau. General
//! variable bounds are reduced to the nonnegative standard form up front:
//! variables with a finite lower bound are shifted, variables bounded only
//! from above are mirrored, free variables are split, and finite upper
//! bounds become explicit constraint rows. Pivot selection is Dantzig's
//! rule with smallest-index tie-breaking, falling back to Bland's rule
//! permanently once a long run of degenerate pivots is observed; both
//! rules are deterministic, so identical inputs produce bit-identical
//! solutions.
//!
//! Tolerances: primal feasibility 1e-8, reduced-cost optimality 1e-9,
//! pivot magnitude 1e-10. The pivot budget is `50 * (vars + rows)`;
//! exceeding it reports a solver failure distinct from infeasibility.

use thiserror::Error;

/// Primal feasibility tolerance on constraint and bound residuals.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Reduced-cost tolerance for declaring a basis optimal.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Entries below this magnitude are never used as pivots.
const PIVOT_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK_LIMIT: usize = 300;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// One row `coeffs . x  (<=|=|>=)  rhs` of a [`LinearProgram`].
#[derive(Clone, Debug)]
pub struct ConstraintRow {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Dense LP description: objective, constraint rows, per-variable bounds
/// (`f64::NEG_INFINITY` / `f64::INFINITY` allowed).
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<ConstraintRow>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Program with the given objective and all variables in `[0, +inf)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            rows: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.rows.push(ConstraintRow {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.bounds[var] = (lo, hi);
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::Dimension {
                got: self.bounds.len(),
                expected: n,
            });
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::RowLength {
                    row: i,
                    got: row.coeffs.len(),
                    expected: n,
                });
            }
            if !row.rhs.is_finite() {
                return Err(LpError::BadRow { row: i });
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            let bad = lo.is_nan() || hi.is_nan() || lo > hi;
            if bad || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::BadBounds { var: j, lo, hi });
            }
        }
        Ok(())
    }

    /// Plain-text dump, one constraint per line. Debugging aid only, not a
    /// stable interchange format.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = writeln!(out, "{} {:?}", sense, self.objective);
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:?} {} {}",
                row.coeffs,
                row.relation.symbol(),
                row.rhs
            );
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            let _ = writeln!(out, "x{} in [{}, {}]", j, lo, hi);
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver result. `objective` and `point` are meaningful only when the
/// status is [`LpStatus::Optimal`]; the objective is recomputed by dotting
/// the returned point with the objective vector.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub point: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("constraint row {row} has {got} coefficients, expected {expected}")]
    RowLength {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("constraint row {row} has a non-finite right-hand side")]
    BadRow { row: usize },
    #[error("variable {var} has empty or invalid bounds [{lo}, {hi}]")]
    BadBounds { var: usize, lo: f64, hi: f64 },
    #[error("dimension mismatch: got {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("simplex exceeded the pivot budget of {budget} iterations")]
    SolverFailure { budget: usize },
    #[error("solution failed the feasibility check (residual {residual:.3e})")]
    NumericalBreakdown { residual: f64 },
}

/// How an original variable maps into standard-form columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = lo + u`, `u >= 0`.
    Shift { col: usize, lo: f64 },
    /// `x = hi - u`, `u >= 0`.
    Mirror { col: usize, hi: f64 },
    /// `x = u_pos - u_neg`.
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    ncols: usize,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    objective: Vec<f64>,
    recover: Vec<VarMap>,
}

/// Substitute bounds away so every standard-form variable is nonnegative.
/// Finite upper bounds become explicit `u <= hi - lo` rows.
fn to_standard_form(lp: &LinearProgram) -> StandardForm {
    let n = lp.num_vars();
    let mut recover = Vec::with_capacity(n);
    let mut ncols = 0usize;
    for &(lo, hi) in &lp.bounds {
        let map = if lo.is_finite() {
            VarMap::Shift { col: ncols, lo }
        } else if hi.is_finite() {
            VarMap::Mirror { col: ncols, hi }
        } else {
            let pos = ncols;
            ncols += 1;
            VarMap::Split { pos, neg: ncols }
        };
        ncols += 1;
        recover.push(map);
    }

    let min_sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut objective = vec![0.0; ncols];
    for (j, map) in recover.iter().enumerate() {
        let c = min_sign * lp.objective[j];
        match *map {
            VarMap::Shift { col, .. } => objective[col] += c,
            VarMap::Mirror { col, .. } => objective[col] -= c,
            VarMap::Split { pos, neg } => {
                objective[pos] += c;
                objective[neg] -= c;
            }
        }
    }

    let substitute = |coeffs: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; ncols];
        let mut b = rhs;
        for (j, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match recover[j] {
                VarMap::Shift { col, lo } => {
                    out[col] += a;
                    b -= a * lo;
                }
                VarMap::Mirror { col, hi } => {
                    out[col] -= a;
                    b -= a * hi;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] += a;
                    out[neg] -= a;
                }
            }
        }
        (out, b)
    };

    let mut rows = Vec::with_capacity(lp.rows.len());
    for row in &lp.rows {
        let (coeffs, rhs) = substitute(&row.coeffs, row.rhs);
        rows.push((coeffs, row.relation, rhs));
    }
    // Upper-bound rows for doubly bounded variables.
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if lo.is_finite() && hi.is_finite() {
            if let VarMap::Shift { col, .. } = recover[j] {
                let mut coeffs = vec![0.0; ncols];
                coeffs[col] = 1.0;
                rows.push((coeffs, Relation::Le, hi - lo));
            }
        }
    }

    StandardForm {
        ncols,
        rows,
        objective,
        recover,
    }
}

/// Dense simplex tableau. Column layout: structural columns, then one
/// slack per inequality row, then artificials; the rightmost column is
/// the rhs. `basis[i]` is the column basic in row `i`.
struct Tableau {
    m: usize,
    width: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
    n_real: usize,
    iterations: usize,
    budget: usize,
    bland: bool,
    degenerate_streak: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.cells[i * self.width..(i + 1) * self.width]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(row, col);
        for v in self.row_mut(row) {
            *v *= inv;
        }
        self.cells[row * w + col] = 1.0;
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let factor = self.at(i, col);
            if factor == 0.0 {
                continue;
            }
            for j in 0..w {
                self.cells[i * w + j] -= factor * self.cells[row * w + j];
            }
            self.cells[i * w + col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Run the simplex loop with the given reduced-cost row (updated in
    /// place) until optimal, unbounded, or out of budget. `allowed[j]`
    /// masks columns that may enter.
    fn run(&mut self, obj: &mut [f64], allowed: &[bool]) -> Result<RunOutcome, LpError> {
        loop {
            // Entering column.
            let mut enter: Option<usize> = None;
            if self.bland {
                for j in 0..self.width - 1 {
                    if allowed[j] && obj[j] < -OPTIMALITY_TOL {
                        enter = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = -OPTIMALITY_TOL;
                for j in 0..self.width - 1 {
                    if allowed[j] && obj[j] < best {
                        best = obj[j];
                        enter = Some(j);
                    }
                }
            }
            let Some(col) = enter else {
                return Ok(RunOutcome::Optimal);
            };

            // Ratio test; ties go to the smallest basis variable index,
            // which together with Bland's entering rule prevents cycling.
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.at(i, col);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some(r) => {
                            ratio < best_ratio - 1e-12
                                || (ratio < best_ratio + 1e-12 && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(row) = leave else {
                return Ok(RunOutcome::Unbounded);
            };

            if best_ratio < 1e-12 {
                self.degenerate_streak += 1;
                if self.degenerate_streak > DEGENERATE_STREAK_LIMIT {
                    self.bland = true;
                }
            } else {
                self.degenerate_streak = 0;
            }

            self.iterations += 1;
            if self.iterations > self.budget {
                return Err(LpError::SolverFailure {
                    budget: self.budget,
                });
            }

            // Pivot, updating the objective row the same way.
            let w = self.width;
            let inv = 1.0 / self.at(row, col);
            for v in self.row_mut(row) {
                *v *= inv;
            }
            self.cells[row * w + col] = 1.0;
            let factor = obj[col];
            if factor != 0.0 {
                let pivot_row = &self.cells[row * w..(row + 1) * w];
                for (o, &cell) in obj.iter_mut().zip(pivot_row) {
                    *o -= factor * cell;
                }
                obj[col] = 0.0;
            }
            for i in 0..self.m {
                if i == row {
                    continue;
                }
                let factor = self.at(i, col);
                if factor == 0.0 {
                    continue;
                }
                for j in 0..w {
                    self.cells[i * w + j] -= factor * self.cells[row * w + j];
                }
                self.cells[i * w + col] = 0.0;
            }
            self.basis[row] = col;
        }
    }
}

enum RunOutcome {
    Optimal,
    Unbounded,
}

/// Solve the program with a deterministic two-phase dense simplex.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let sf = to_standard_form(lp);
    let m = sf.rows.len();
    let n_slack = sf
        .rows
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Eq)
        .count();
    let n_struct = sf.ncols + n_slack;
    // One artificial per row is an upper bound; unused ones are dropped.
    let width = n_struct + m + 1;
    let budget = 50 * (width + m);

    let mut cells = vec![0.0; m * width];
    let mut basis = vec![usize::MAX; m];
    let mut n_artificial = 0usize;

    let mut slack_idx = 0usize;
    for (i, (coeffs, rel, rhs)) in sf.rows.iter().enumerate() {
        let row = &mut cells[i * width..(i + 1) * width];
        row[..sf.ncols].copy_from_slice(coeffs);
        let mut slack_col = None;
        match rel {
            Relation::Le => {
                row[sf.ncols + slack_idx] = 1.0;
                slack_col = Some(sf.ncols + slack_idx);
                slack_idx += 1;
            }
            Relation::Ge => {
                row[sf.ncols + slack_idx] = -1.0;
                slack_col = Some(sf.ncols + slack_idx);
                slack_idx += 1;
            }
            Relation::Eq => {}
        }
        row[width - 1] = *rhs;
        if row[width - 1] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        // Seed the basis with the slack when it survived normalization
        // with coefficient +1; otherwise install an artificial.
        match slack_col {
            Some(c) if row[c] > 0.5 => basis[i] = c,
            _ => {
                let c = n_struct + n_artificial;
                row[c] = 1.0;
                basis[i] = c;
                n_artificial += 1;
            }
        }
    }

    let mut tab = Tableau {
        m,
        width,
        cells,
        basis,
        n_real: n_struct,
        iterations: 0,
        budget,
        bland: false,
        degenerate_streak: 0,
    };

    let mut allowed = vec![true; width - 1];
    allowed[n_struct + n_artificial..].fill(false);

    // Phase 1: minimize the sum of artificials.
    if n_artificial > 0 {
        let mut obj = vec![0.0; width];
        for i in 0..m {
            if tab.basis[i] >= n_struct {
                let row = &tab.cells[i * width..(i + 1) * width];
                for (o, &cell) in obj.iter_mut().zip(row) {
                    *o -= cell;
                }
            }
        }
        obj[n_struct..n_struct + n_artificial].fill(0.0);
        match tab.run(&mut obj, &allowed)? {
            RunOutcome::Unbounded => {
                // Phase 1 is bounded below by zero; reaching here means the
                // numerics collapsed.
                return Err(LpError::NumericalBreakdown {
                    residual: f64::INFINITY,
                });
            }
            RunOutcome::Optimal => {}
        }
        let infeasibility = -obj[width - 1];
        if infeasibility > FEASIBILITY_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                point: Vec::new(),
                iterations: tab.iterations,
            });
        }
        // Drive leftover artificials out of the basis; rows that cannot
        // pivot are redundant and are blanked out.
        for i in 0..m {
            if tab.basis[i] >= n_struct {
                let mut pivot_col = None;
                for j in 0..n_struct {
                    if tab.at(i, j).abs() > 1e-7 {
                        pivot_col = Some(j);
                        break;
                    }
                }
                match pivot_col {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        let w = tab.width;
                        let basis_col = tab.basis[i];
                        for v in tab.row_mut(i) {
                            *v = 0.0;
                        }
                        // Keep the basic artificial at value zero so the
                        // row stays inert for phase 2.
                        tab.cells[i * w + basis_col] = 1.0;
                    }
                }
            }
        }
    }

    // Lock artificials out of phase 2.
    allowed[n_struct..].fill(false);
    tab.bland = false;
    tab.degenerate_streak = 0;

    // Phase 2 objective: price out the basic columns.
    let mut obj = vec![0.0; width];
    obj[..sf.ncols].copy_from_slice(&sf.objective);
    for i in 0..m {
        let b = tab.basis[i];
        if b < n_struct {
            let c = obj[b];
            if c != 0.0 {
                let row = &tab.cells[i * width..(i + 1) * width];
                for (o, &cell) in obj.iter_mut().zip(row) {
                    *o -= c * cell;
                }
                obj[b] = 0.0;
            }
        }
    }

    match tab.run(&mut obj, &allowed)? {
        RunOutcome::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                objective: f64::NAN,
                point: Vec::new(),
                iterations: tab.iterations,
            });
        }
        RunOutcome::Optimal => {}
    }

    // Read the standard-form solution and map it back.
    let mut std_point = vec![0.0; tab.n_real.max(sf.ncols)];
    for i in 0..m {
        let b = tab.basis[i];
        if b < std_point.len() {
            std_point[b] = tab.rhs(i);
        }
    }
    let mut point = vec![0.0; lp.num_vars()];
    for (j, map) in sf.recover.iter().enumerate() {
        point[j] = match *map {
            VarMap::Shift { col, lo } => lo + std_point[col],
            VarMap::Mirror { col, hi } => hi - std_point[col],
            VarMap::Split { pos, neg } => std_point[pos] - std_point[neg],
        };
    }

    let (feasible, residual) = check_feasible(lp, &point, FEASIBILITY_TOL)?;
    if !feasible {
        return Err(LpError::NumericalBreakdown { residual });
    }

    let objective = point.iter().zip(&lp.objective).map(|(x, c)| x * c).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        point,
        iterations: tab.iterations,
    })
}

/// Report whether `point` satisfies every constraint and bound within
/// `tol`, together with the worst signed residual (positive = violated).
pub fn check_feasible(lp: &LinearProgram, point: &[f64], tol: f64) -> Result<(bool, f64), LpError> {
    if point.len() != lp.num_vars() {
        return Err(LpError::Dimension {
            got: point.len(),
            expected: lp.num_vars(),
        });
    }
    let mut worst = f64::NEG_INFINITY;
    for row in &lp.rows {
        let lhs: f64 = row.coeffs.iter().zip(point).map(|(a, x)| a * x).sum();
        let r = match row.relation {
            Relation::Le => lhs - row.rhs,
            Relation::Ge => row.rhs - lhs,
            Relation::Eq => (lhs - row.rhs).abs(),
        };
        worst = worst.max(r);
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if lo.is_finite() {
            worst = worst.max(lo - point[j]);
        }
        if hi.is_finite() {
            worst = worst.max(point[j] - hi);
        }
    }
    if worst == f64::NEG_INFINITY {
        worst = 0.0;
    }
    Ok((worst <= tol, worst))
}
