//! Euler backward iterative scheme: a fixed-step reference integrator that
//! splits the forcing into production and first-order loss,
//! `y' = P(y) − L(y)·y`, and solves each implicit step by fixed-point iteration
//! `y⁺ = (y + Δt·P(y⁺)) / (1 + Δt·L(y⁺))`.

/// A system exposing its forcing as production and loss-rate vectors.
pub trait ProductionLoss {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fill `p` (production, units of y per s) and `l` (loss rate, s⁻¹).
    fn production_loss(&mut self, y: &[f64], p: &mut [f64], l: &mut [f64]) -> Result<(), String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EbiOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub abs_tol: Vec<f64>,
}

impl EbiOptions {
    pub fn new(rel_tol: f64, abs_tol: Vec<f64>) -> Self {
        Self {
            max_iters: 200,
            rel_tol,
            abs_tol,
        }
    }
}

/// Integrate from 0 to `t_end` with steps of at most `dt`.
pub fn ebi_reference_solve<S: ProductionLoss>(
    sys: &mut S,
    y0: &[f64],
    dt: f64,
    t_end: f64,
    opts: &EbiOptions,
) -> Result<Vec<f64>, String> {
    if !(dt > 0.0) {
        return Err(format!("time step must be > 0, got {dt}"));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut p = vec![0.0; n];
    let mut l = vec![0.0; n];
    let mut t = 0.0;
    while t < t_end {
        let h = dt.min(t_end - t);
        let mut guess = y.clone();
        let mut converged = false;
        for _ in 0..opts.max_iters {
            p.iter_mut().for_each(|v| *v = 0.0);
            l.iter_mut().for_each(|v| *v = 0.0);
            sys.production_loss(&guess, &mut p, &mut l)?;
            let mut worst = 0.0f64;
            for i in 0..n {
                let next = (y[i] + h * p[i]) / (1.0 + h * l[i]);
                let tol = opts.rel_tol * next.abs() + opts.abs_tol[i];
                worst = worst.max((next - guess[i]).abs() / tol);
                guess[i] = next;
            }
            if worst <= 1.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(format!("fixed-point iteration did not converge at t = {t}"));
        }
        y = guess;
        t += h;
    }
    Ok(y)
}
