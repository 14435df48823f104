//! Central finite-difference checks of analytic gradients.

use super::Parameters;

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor so entries with tiny gradients are judged on absolute
/// error instead of exploding the relative one.
const REL_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(tensor, entry)` of the worst relative error.
    pub worst: (usize, usize),
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Compares `analytic` against `(f(p + h) - f(p - h)) / 2h` for every entry.
/// Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn gradcheck<P, F>(params: &P, analytic: &P, mut f: F) -> GradCheckReport
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    let grads = analytic.tensors();
    let mut probe = params.clone();
    let shape: alloc::vec::Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (k, &len) in shape.iter().enumerate() {
        for i in 0..len {
            let orig = probe.tensors()[k][i];
            probe.tensors_mut()[k][i] = orig + FD_STEP;
            let up = f(&probe);
            probe.tensors_mut()[k][i] = orig - FD_STEP;
            let down = f(&probe);
            probe.tensors_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = grads[k][i];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(REL_FLOOR);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (k, i);
            }
            report.max_abs_error = report.max_abs_error.max(abs);
            report.checked += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    /// `0.5 ||X w - y||² / n` and its gradient `Xᵀ(Xw - y) / n`.
    fn least_squares(x: &Matrix, y: &Matrix, w: &Matrix) -> (f64, Matrix) {
        let r = x.matmul(w).unwrap().sub(y).unwrap();
        let n = x.rows() as f64;
        let loss = 0.5 * r.data().iter().map(|v| v * v).sum::<f64>() / n;
        let mut g = x.t_matmul(&r).unwrap();
        g.scale(1.0 / n);
        (loss, g)
    }

    fn toy() -> (Matrix, Matrix, Matrix) {
        let x = Matrix::from_fn(10, 3, |i, j| ((i * 13 + j * j * 7 + 1) % 11) as f64 * 0.3 - 1.5);
        let y = Matrix::from_fn(10, 1, |i, _| i as f64 * 0.1);
        let w = Matrix::from_fn(3, 1, |i, _| 0.3 - i as f64 * 0.2);
        (x, y, w)
    }

    #[test]
    fn least_squares_gradient_is_exact() {
        let (x, y, w) = toy();
        let (_, g) = least_squares(&x, &y, &w);
        let r = gradcheck(&w, &g, |p| least_squares(&x, &y, p).0);
        assert!(r.max_rel_error < 1e-7, "{r:?}");
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        let (x, y, w) = toy();
        let (_, mut g) = least_squares(&x, &y, &w);
        g.data_mut()[1] += 0.1;
        let r = gradcheck(&w, &g, |p| least_squares(&x, &y, p).0);
        assert!(!r.passes(1e-5));
        assert_eq!(r.worst, (0, 1));
    }
}
