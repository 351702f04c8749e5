//! Exact brute-force maximizer of the SVM dual for tiny problems.
//!
//! The optimum of the box- and equality-constrained quadratic program has
//! every multiplier at 0, at C, or free; for n points that is 3^n active-set
//! assignments. Each assignment pins the bounded multipliers and determines
//! the free ones (plus the bias multiplier) by a linear system from the
//! stationarity conditions `y_i f(x_i) = 1`. Enumerating all assignments
//! and keeping the best feasible candidate yields the exact optimum, up to
//! linear-solve rounding.

use nlosid_core::svm::KernelSpec;

/// Gaussian elimination with partial pivoting; `None` for singular systems.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (entry, pv) in a[row][col..n].iter_mut().zip(&pivot_row[col..n]) {
                *entry -= factor * pv;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn dual_objective(alphas: &[f64], labels: &[f64], gram: &[Vec<f64>]) -> f64 {
    let mut obj: f64 = alphas.iter().sum();
    for i in 0..alphas.len() {
        for j in 0..alphas.len() {
            obj -= 0.5 * alphas[i] * alphas[j] * labels[i] * labels[j] * gram[i][j];
        }
    }
    obj
}

/// Maximum of the dual objective over the feasible set, by exhaustive
/// active-set enumeration. Intended for n <= 6.
pub fn brute_force_dual_optimum(
    rows: &[Vec<f64>],
    labels: &[f64],
    c: f64,
    kernel: &KernelSpec,
) -> f64 {
    let n = rows.len();
    assert!(n <= 8, "enumeration is exponential; keep the set tiny");
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| kernel.eval(&rows[i], &rows[j])).collect())
        .collect();

    let box_tol = 1e-7 * c;
    let mut best = f64::NEG_INFINITY;
    let assignments = 3usize.pow(n as u32);
    for code in 0..assignments {
        // digit per point: 0 -> alpha = 0, 1 -> alpha = C, 2 -> free
        let mut digits = Vec::with_capacity(n);
        let mut rest = code;
        for _ in 0..n {
            digits.push(rest % 3);
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| digits[i] == 2).collect();
        let mut alphas: Vec<f64> = digits
            .iter()
            .map(|&d| if d == 1 { c } else { 0.0 })
            .collect();

        if free.is_empty() {
            let balance: f64 = alphas.iter().zip(labels).map(|(a, y)| a * y).sum();
            if balance.abs() <= box_tol {
                best = best.max(dual_objective(&alphas, labels, &gram));
            }
            continue;
        }

        // unknowns: free alphas then the bias.
        // stationarity rows: sum_j y_j K_ij a_j + b = y_i  (i free)
        // constraint row:    sum_j y_j a_j = 0
        let m = free.len() + 1;
        let mut a = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for (r, &i) in free.iter().enumerate() {
            for (ccol, &j) in free.iter().enumerate() {
                a[r][ccol] = labels[j] * gram[i][j];
            }
            a[r][free.len()] = 1.0;
            let fixed: f64 = (0..n)
                .filter(|j| digits[*j] != 2)
                .map(|j| alphas[j] * labels[j] * gram[i][j])
                .sum();
            rhs[r] = labels[i] - fixed;
        }
        for (ccol, &j) in free.iter().enumerate() {
            a[free.len()][ccol] = labels[j];
        }
        let fixed_balance: f64 = (0..n)
            .filter(|j| digits[*j] != 2)
            .map(|j| alphas[j] * labels[j])
            .sum();
        rhs[free.len()] = -fixed_balance;

        let Some(solution) = solve_linear(a, rhs) else {
            continue;
        };
        let mut feasible = true;
        for (ccol, &j) in free.iter().enumerate() {
            let alpha = solution[ccol];
            if !(-box_tol..=c + box_tol).contains(&alpha) {
                feasible = false;
                break;
            }
            alphas[j] = alpha.clamp(0.0, c);
        }
        if feasible {
            best = best.max(dual_objective(&alphas, labels, &gram));
        }
    }
    assert!(
        best.is_finite(),
        "no feasible candidate found; the all-zero assignment is always feasible"
    );
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_optimum_is_half() {
        let rows = vec![vec![-1.0], vec![1.0]];
        let labels = vec![-1.0, 1.0];
        let best = brute_force_dual_optimum(&rows, &labels, 10.0, &KernelSpec::Linear);
        assert!((best - 0.5).abs() < 1e-10, "best {best}");
    }
}
