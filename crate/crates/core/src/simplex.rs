//! Dense phase-1 simplex for `A x = b, x ≥ 0` with `b ≥ 0`.
//!
//! Artificial columns are implicit: once an artificial variable leaves the basis
//! it never re-enters, so only the structural part of the tableau is stored.

const PIVOT_EPS: f64 = 1e-11;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Basic {
    Artificial,
    Column(usize),
}

pub(crate) struct Feasibility {
    rows: usize,
    cols: usize,
    /// Row-major `rows × (cols + 1)`; the last column is the right-hand side.
    tableau: Vec<f64>,
}

impl Feasibility {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            tableau: vec![0.0; rows * (cols + 1)],
        }
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        self.tableau[row * (self.cols + 1) + col] = value;
    }

    pub(crate) fn set_rhs(&mut self, row: usize, value: f64) {
        debug_assert!(value >= 0.0);
        self.tableau[row * (self.cols + 1) + self.cols] = value;
    }

    /// Minimizes the total artificial mass and returns the structural part of the
    /// final basic solution. If the system is feasible the result solves it.
    pub(crate) fn solve(mut self) -> Vec<f64> {
        let width = self.cols + 1;
        let mut basis = vec![Basic::Artificial; self.rows];

        // reduced costs of the phase-1 objective, last entry is -objective
        let mut cost = vec![0.0; width];
        for r in 0..self.rows {
            for (c, v) in cost.iter_mut().zip(&self.tableau[r * width..(r + 1) * width]) {
                *c -= v;
            }
        }

        let max_iterations = 50 * (self.rows + self.cols) + 1000;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iterations {
            // Dantzig's rule, falling back to Bland's rule on long degenerate runs
            let entering = if degenerate_run < 64 {
                cost[..self.cols]
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c < -PIVOT_EPS)
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(j, _)| j)
            } else {
                cost[..self.cols].iter().position(|&c| c < -PIVOT_EPS)
            };
            let Some(e) = entering else { break };

            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.tableau[r * width + e];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.tableau[r * width + self.cols] / a;
                let better = match leaving {
                    None => true,
                    Some((best_r, best)) => {
                        ratio < best - 1e-15
                            || (ratio <= best + 1e-15
                                && basis[r] == Basic::Artificial
                                && basis[best_r] != Basic::Artificial)
                    }
                };
                if better {
                    leaving = Some((r, ratio));
                }
            }
            let Some((p, ratio)) = leaving else { break };
            degenerate_run = if ratio.abs() < 1e-15 { degenerate_run + 1 } else { 0 };

            self.pivot(p, e, &mut cost);
            basis[p] = Basic::Column(e);
        }

        let mut x = vec![0.0; self.cols];
        for (r, b) in basis.iter().enumerate() {
            if let Basic::Column(k) = *b {
                x[k] = self.tableau[r * width + self.cols].max(0.0);
            }
        }
        x
    }

    fn pivot(&mut self, p: usize, e: usize, cost: &mut [f64]) {
        let width = self.cols + 1;
        let pivot = self.tableau[p * width + e];
        let pivot_row: Vec<f64> = self.tableau[p * width..(p + 1) * width]
            .iter()
            .map(|v| v / pivot)
            .collect();
        self.tableau[p * width..(p + 1) * width].copy_from_slice(&pivot_row);
        for r in 0..self.rows {
            if r == p {
                continue;
            }
            let factor = self.tableau[r * width + e];
            if factor == 0.0 {
                continue;
            }
            for (t, v) in self.tableau[r * width..(r + 1) * width]
                .iter_mut()
                .zip(&pivot_row)
            {
                *t -= factor * v;
            }
            self.tableau[r * width + e] = 0.0;
        }
        let factor = cost[e];
        for (c, v) in cost.iter_mut().zip(&pivot_row) {
            *c -= factor * v;
        }
        cost[e] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(a: &[&[f64]], b: &[f64]) -> Feasibility {
        let mut lp = Feasibility::new(a.len(), a[0].len());
        for (r, row) in a.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                lp.set(r, c, v);
            }
            lp.set_rhs(r, b[r]);
        }
        lp
    }

    fn residual(a: &[&[f64]], b: &[f64], x: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(row, bi)| (row.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn solves_feasible_system() {
        let a: &[&[f64]] = &[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]];
        let b = [0.7, 0.5];
        let x = system(a, &b).solve();
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!(residual(a, &b, &x) < 1e-12);
    }

    #[test]
    fn redundant_rows_are_fine() {
        let a: &[&[f64]] = &[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 0.0]];
        let b = [1.0, 1.0, 0.25];
        let x = system(a, &b).solve();
        assert!(residual(a, &b, &x) < 1e-12);
    }

    #[test]
    fn infeasible_system_leaves_residual() {
        // x0 = 1 and x0 = 0.5 cannot both hold
        let a: &[&[f64]] = &[&[1.0], &[1.0]];
        let b = [1.0, 0.5];
        let x = system(a, &b).solve();
        assert!(residual(a, &b, &x) >= 0.25);
    }
}
