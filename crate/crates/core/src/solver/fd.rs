//! Central finite-difference Jacobian, used to check analytic Jacobians.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdMethod {
    /// One central difference with step h.
    Central,
    /// Ridders' extrapolation: central differences at steps shrinking from h
    /// by 1.4, extrapolated in a Neville tableau, keeping for each row the
    /// entry with the smallest error estimate.
    Ridders,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdOptions {
    /// Smallest perturbation per component.
    pub floor: Vec<f64>,
    /// Initial step relative to |y_j|.
    pub rel_step: f64,
    pub method: FdMethod,
}

impl FdOptions {
    /// Ridders' method from a 10% step. Forcing rows that sum many large,
    /// cancelling terms lose too many digits to round-off at a √ε step.
    pub fn new(floor: Vec<f64>) -> Self {
        Self {
            floor,
            rel_step: 0.1,
            method: FdMethod::Ridders,
        }
    }

    /// Single central difference with step √ε·|y_j|.
    pub fn central(floor: Vec<f64>) -> Self {
        Self {
            floor,
            rel_step: f64::EPSILON.sqrt(),
            method: FdMethod::Central,
        }
    }
}

const RIDDERS_SHRINK: f64 = 1.4;
const RIDDERS_TABLE: usize = 10;
const RIDDERS_SAFE: f64 = 2.0;

/// Dense `∂f/∂y` indexed `[row][col]`, with initial step
/// `max(rel_step·|y_j|, floor_j)`.
pub fn finite_difference_jacobian<F>(mut f: F, y: &[f64], opts: &FdOptions) -> Vec<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y.len();
    let mut out = vec![vec![0.0; n]; n];
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    let mut central = |j: usize, h: f64, col: &mut [f64]| {
        yp[j] = y[j] + h;
        fp.iter_mut().for_each(|v| *v = 0.0);
        f(&yp, &mut fp);
        yp[j] = y[j] - h;
        fm.iter_mut().for_each(|v| *v = 0.0);
        f(&yp, &mut fm);
        yp[j] = y[j];
        for i in 0..n {
            col[i] = (fp[i] - fm[i]) / (2.0 * h);
        }
    };
    let mut col = vec![0.0; n];
    for j in 0..n {
        let h0 = (opts.rel_step * y[j].abs()).max(opts.floor[j]);
        match opts.method {
            FdMethod::Central => {
                central(j, h0, &mut col);
                for i in 0..n {
                    out[i][j] = col[i];
                }
            }
            FdMethod::Ridders => {
                // tableau[k][i]: column k of the current tableau row, for output row i.
                let mut prev = vec![vec![0.0; n]; RIDDERS_TABLE];
                let mut cur = vec![vec![0.0; n]; RIDDERS_TABLE];
                let mut err = vec![f64::INFINITY; n];
                let mut done = vec![false; n];
                let mut h = h0;
                central(j, h, &mut prev[0]);
                for i in 0..n {
                    out[i][j] = prev[0][i];
                }
                let c2 = RIDDERS_SHRINK * RIDDERS_SHRINK;
                for m in 1..RIDDERS_TABLE {
                    h /= RIDDERS_SHRINK;
                    central(j, h, &mut cur[0]);
                    let mut fac = c2;
                    for k in 1..=m {
                        for i in 0..n {
                            cur[k][i] = (cur[k - 1][i] * fac - prev[k - 1][i]) / (fac - 1.0);
                        }
                        fac *= c2;
                        for i in 0..n {
                            if done[i] {
                                continue;
                            }
                            let e = (cur[k][i] - cur[k - 1][i])
                                .abs()
                                .max((cur[k][i] - prev[k - 1][i]).abs());
                            if e <= err[i] {
                                err[i] = e;
                                out[i][j] = cur[k][i];
                            }
                        }
                    }
                    // Higher order got worse by a significant factor: stop that row.
                    for i in 0..n {
                        if (cur[m][i] - prev[m - 1][i]).abs() >= RIDDERS_SAFE * err[i] {
                            done[i] = true;
                        }
                    }
                    std::mem::swap(&mut prev, &mut cur);
                    if done.iter().all(|&d| d) {
                        break;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let a = [[1.0, 2.0], [-3.0, 0.5]];
        let f = |y: &[f64], out: &mut [f64]| {
            for i in 0..2 {
                out[i] = a[i][0] * y[0] + a[i][1] * y[1];
            }
        };
        let j = finite_difference_jacobian(f, &[0.3, 4.0], &FdOptions::new(vec![1e-3; 2]));
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[i][k] - a[i][k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_at_origin() {
        let f = |y: &[f64], out: &mut [f64]| out[0] = y[0] * y[0];
        let j = finite_difference_jacobian(f, &[0.0], &FdOptions::new(vec![1e-6]));
        assert!(j[0][0].abs() < 1e-15);
    }
}
