//! Pairwise coordinate ascent on the SVM dual problem.
//!
//! Maximizes `W(a) = sum a_i - 1/2 sum a_i a_j y_i y_j K(x_i, x_j)` subject
//! to `0 <= a_i <= C` and `sum a_i y_i = 0` by repeatedly picking a pair of
//! multipliers and solving their two-variable subproblem in closed form.
//! Examples violating the KKT conditions by more than the tolerance are
//! paired first with the multiplier of largest error gap among the free
//! ones, then with free multipliers from a seeded random start, then with
//! any multiplier, so the random stream fully determines the optimization
//! path.
//!
//! The full Gram matrix is precomputed; memory is quadratic in the training
//! set size, which is fine at the dataset sizes this crate targets.

use super::{KernelSpec, SvmError, TrainConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) struct Solution {
    pub alphas: Vec<f64>,
    pub bias: f64,
}

pub(crate) fn solve(
    rows: &[Vec<f64>],
    labels: &[f64],
    kernel: &KernelSpec,
    cfg: &TrainConfig,
) -> Result<Solution, SvmError> {
    let n = rows.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = kernel.eval(&rows[i], &rows[j]);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let mut solver = Solver {
        labels,
        gram,
        n,
        c: cfg.c,
        tol: cfg.tol,
        step_eps: (cfg.tol * 1e-2).max(1e-12),
        alphas: vec![0.0; n],
        u: vec![0.0; n],
        bias: 0.0,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    solver.run(cfg.max_passes);
    Ok(Solution {
        alphas: solver.alphas,
        bias: solver.bias,
    })
}

struct Solver<'a> {
    labels: &'a [f64],
    gram: Vec<f64>,
    n: usize,
    c: f64,
    tol: f64,
    step_eps: f64,
    alphas: Vec<f64>,
    /// `u_i = sum_j a_j y_j K_ij`, the decision value without bias.
    u: Vec<f64>,
    bias: f64,
    rng: ChaCha8Rng,
}

impl Solver<'_> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    fn error(&self, i: usize) -> f64 {
        self.u[i] + self.bias - self.labels[i]
    }

    fn is_free(&self, i: usize) -> bool {
        let a = self.alphas[i];
        a > 0.0 && a < self.c
    }

    /// Alternate full passes over every multiplier with refinement sweeps
    /// over the free ones. A full pass without progress means no example
    /// violates the KKT conditions within tol. `max_passes` caps the full
    /// passes; the total sweep count gets a generous hard cap as a safety
    /// valve against near-duplicate points with vanishing curvature.
    fn run(&mut self, max_passes: usize) {
        let mut examine_all = true;
        let mut full_passes = 0usize;
        let mut total_sweeps = 0usize;
        let hard_cap = max_passes.saturating_mul(100);
        while total_sweeps < hard_cap {
            let mut changed = 0usize;
            for i in 0..self.n {
                if examine_all || self.is_free(i) {
                    changed += usize::from(self.examine(i));
                }
            }
            total_sweeps += 1;
            if examine_all {
                full_passes += 1;
                if changed == 0 || full_passes >= max_passes {
                    break;
                }
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
    }

    fn examine(&mut self, i2: usize) -> bool {
        let alph2 = self.alphas[i2];
        let y2 = self.labels[i2];
        let e2 = self.error(i2);
        let r2 = e2 * y2;
        let violates = (r2 < -self.tol && alph2 < self.c) || (r2 > self.tol && alph2 > 0.0);
        if !violates {
            return false;
        }

        // largest error gap among free multipliers
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.n {
            if i != i2 && self.is_free(i) {
                let gap = (self.error(i) - e2).abs();
                if best.is_none_or(|(_, g)| gap > g) {
                    best = Some((i, gap));
                }
            }
        }
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }

        // free multipliers from a random start
        let start = self.rng.gen_range(0..self.n);
        for off in 0..self.n {
            let i1 = (start + off) % self.n;
            if self.is_free(i1) && self.take_step(i1, i2) {
                return true;
            }
        }

        // everything else
        let start = self.rng.gen_range(0..self.n);
        for off in 0..self.n {
            let i1 = (start + off) % self.n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (alph1, alph2) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.labels[i1], self.labels[i2]);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;

        let (low, high) = if s < 0.0 {
            let d = alph2 - alph1;
            (d.max(0.0), (self.c + d).min(self.c))
        } else {
            let sum = alph1 + alph2;
            ((sum - self.c).max(0.0), sum.min(self.c))
        };
        if low >= high {
            return false;
        }

        let k11 = self.k(i1, i1);
        let k12 = self.k(i1, i2);
        let k22 = self.k(i2, i2);
        // curvature along the constraint line; >= 0 for PSD kernels
        let eta = k11 + k22 - 2.0 * k12;

        let mut a2 = if eta > 1e-12 {
            (alph2 + y2 * (e1 - e2) / eta).clamp(low, high)
        } else {
            // flat direction (coincident points): objective is linear in a2
            let slope = y2 * (e1 - e2);
            if slope > 0.0 {
                high
            } else if slope < 0.0 {
                low
            } else {
                return false;
            }
        };
        // snap values that landed within rounding of a bound
        let snap = 1e-10 * self.c;
        if a2 - low < snap {
            a2 = low;
        } else if high - a2 < snap {
            a2 = high;
        }
        if (a2 - alph2).abs() < self.step_eps * (a2 + alph2 + self.step_eps) {
            return false;
        }

        let mut a1 = alph1 + s * (alph2 - a2);
        if a1 < snap {
            a1 = 0.0;
        } else if a1 > self.c - snap {
            a1 = self.c;
        }

        let d1 = y1 * (a1 - alph1);
        let d2 = y2 * (a2 - alph2);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        self.bias = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };

        for k in 0..self.n {
            self.u[k] += d1 * self.k(i1, k) + d2 * self.k(i2, k);
        }
        self.alphas[i1] = a1;
        self.alphas[i2] = a2;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dual objective `sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij`.
    fn dual_objective(
        alphas: &[f64],
        rows: &[Vec<f64>],
        labels: &[f64],
        kernel: &KernelSpec,
    ) -> f64 {
        let mut obj: f64 = alphas.iter().sum();
        for (i, &ai) in alphas.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (j, &aj) in alphas.iter().enumerate() {
                if aj == 0.0 {
                    continue;
                }
                obj -= 0.5 * ai * aj * labels[i] * labels[j] * kernel.eval(&rows[i], &rows[j]);
            }
        }
        obj
    }

    #[test]
    fn two_point_problem_has_known_optimum() {
        // x = -1 (y=-1), x = +1 (y=+1), linear kernel: optimum at
        // a1 = a2 = 1/2 with dual objective 1/2.
        let rows = vec![vec![-1.0], vec![1.0]];
        let labels = vec![-1.0, 1.0];
        let cfg = TrainConfig {
            c: 10.0,
            tol: 1e-8,
            max_passes: 100,
            seed: 0,
        };
        let sol = solve(&rows, &labels, &KernelSpec::Linear, &cfg).unwrap();
        assert!((sol.alphas[0] - 0.5).abs() < 1e-6, "a1 = {}", sol.alphas[0]);
        assert!((sol.alphas[1] - 0.5).abs() < 1e-6, "a2 = {}", sol.alphas[1]);
        assert!(sol.bias.abs() < 1e-6, "bias = {}", sol.bias);
        let obj = dual_objective(&sol.alphas, &rows, &labels, &KernelSpec::Linear);
        assert!((obj - 0.5).abs() < 1e-6, "objective = {obj}");
    }

    #[test]
    fn equality_constraint_is_preserved() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let labels: Vec<f64> = rows
            .iter()
            .map(|r| if r[0] + r[1] > 0.0 { 1.0 } else { -1.0 })
            .collect();
        let cfg = TrainConfig::default();
        let sol = solve(&rows, &labels, &KernelSpec::Rbf { gamma: 0.5 }, &cfg).unwrap();
        let balance: f64 = sol.alphas.iter().zip(&labels).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-9, "sum a_i y_i = {balance}");
        for &a in &sol.alphas {
            assert!((0.0..=cfg.c + 1e-12).contains(&a), "alpha {a} outside box");
        }
    }
}
