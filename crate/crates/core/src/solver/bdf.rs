//! Variable-order, variable-step backward differentiation formulas (orders 1–5)
//! in Nordsieck-like difference form with a modified Newton iteration.

// Index loops mirror the difference-table recurrences.
#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use thiserror::Error;

use super::lu::SymbolicLu;
use super::{rms_norm, OdeSystem};
use crate::sparse::{CscMatrix, SparsityBuilder, SparsityPattern};

const MAX_ORDER: usize = 5;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
/// Steps after which the Jacobian is re-evaluated even if Newton converges.
const JACOBIAN_AGE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonNegPolicy {
    /// Leave negative values alone.
    Allow,
    /// Clamp negative outputs to zero on return.
    Clamp,
    /// Retry steps that produce values below `−abs_tol` with a smaller step.
    Reject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    /// Per-component absolute tolerance; must have the system's length.
    pub abs_tol: Vec<f64>,
    pub max_steps: usize,
    pub max_order: usize,
    pub newton_max_iters: usize,
    pub nonneg_policy: NonNegPolicy,
    pub initial_step: Option<f64>,
    pub max_step: f64,
}

impl SolverOptions {
    pub fn new(rel_tol: f64, abs_tol: Vec<f64>) -> Self {
        Self {
            rel_tol,
            abs_tol,
            max_steps: 100_000,
            max_order: MAX_ORDER,
            newton_max_iters: 4,
            nonneg_policy: NonNegPolicy::Clamp,
            initial_step: None,
            max_step: f64::INFINITY,
        }
    }

    pub fn with_uniform_abs_tol(rel_tol: f64, abs_tol: f64, n: usize) -> Self {
        Self::new(rel_tol, vec![abs_tol; n])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub steps: usize,
    /// Accepted steps taken at each order (index 1–5).
    pub order_counts: [usize; MAX_ORDER + 1],
    pub newton_iterations: usize,
    pub rhs_evaluations: usize,
    pub jacobian_evaluations: usize,
    pub lu_factorizations: usize,
    pub error_test_failures: usize,
    pub newton_failures: usize,
    pub nonneg_rejections: usize,
    pub final_order: usize,
    pub last_step: f64,
}

impl SolveStats {
    pub fn accumulate(&mut self, other: &SolveStats) {
        self.steps += other.steps;
        for (a, b) in self.order_counts.iter_mut().zip(other.order_counts) {
            *a += b;
        }
        self.newton_iterations += other.newton_iterations;
        self.rhs_evaluations += other.rhs_evaluations;
        self.jacobian_evaluations += other.jacobian_evaluations;
        self.lu_factorizations += other.lu_factorizations;
        self.error_test_failures += other.error_test_failures;
        self.newton_failures += other.newton_failures;
        self.nonneg_rejections += other.nonneg_rejections;
        self.final_order = other.final_order;
        self.last_step = other.last_step;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverErrorKind {
    InvalidOptions(String),
    MaxSteps(usize),
    StepTooSmall { t: f64, h: f64 },
    NonFinite(String),
    System(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("integration failed at t = {t}: {kind:?}")]
pub struct SolverError {
    pub kind: SolverErrorKind,
    pub t: f64,
    /// Last accepted state.
    pub y: Vec<f64>,
    pub stats: SolveStats,
}

struct Coefficients {
    gamma: [f64; MAX_ORDER + 1],
    error_const: [f64; MAX_ORDER + 2],
}

impl Coefficients {
    fn new() -> Self {
        let mut gamma = [0.0; MAX_ORDER + 1];
        for k in 1..=MAX_ORDER {
            gamma[k] = gamma[k - 1] + 1.0 / k as f64;
        }
        let mut error_const = [0.0; MAX_ORDER + 2];
        for (k, e) in error_const.iter_mut().enumerate() {
            *e = 1.0 / (k + 1) as f64;
        }
        Self { gamma, error_const }
    }
}

/// Step-ratio transform of the difference array.
fn compute_r(order: usize, factor: f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; order + 1]; order + 1];
    for j in 0..=order {
        m[0][j] = 1.0;
    }
    for i in 1..=order {
        for j in 1..=order {
            m[i][j] = (i as f64 - 1.0 - factor * j as f64) / i as f64;
        }
    }
    // cumulative product down each column
    for i in 1..=order {
        for j in 0..=order {
            m[i][j] *= m[i - 1][j];
        }
    }
    m
}

fn change_d(d: &mut [Vec<f64>], order: usize, factor: f64) {
    let r = compute_r(order, factor);
    let u = compute_r(order, 1.0);
    let k = order + 1;
    let mut ru = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            ru[i][j] = (0..k).map(|l| r[i][l] * u[l][j]).sum();
        }
    }
    let n = d[0].len();
    let old: Vec<Vec<f64>> = d[..k].to_vec();
    for i in 0..k {
        let row = &mut d[i];
        row.iter_mut().for_each(|v| *v = 0.0);
        for (j, oj) in old.iter().enumerate() {
            let w = ru[j][i];
            if w != 0.0 {
                for c in 0..n {
                    row[c] += w * oj[c];
                }
            }
        }
    }
}

/// Iteration matrix `I − c·J` assembled on a fixed pattern.
struct IterationMatrix {
    m: CscMatrix,
    diag: Vec<usize>,
    from_j: Vec<usize>,
    symbolic: SymbolicLu,
}

impl IterationMatrix {
    fn new(j_pattern: &Arc<SparsityPattern>) -> Result<Self, String> {
        let n = j_pattern.nrows();
        let mut b = SparsityBuilder::square(n);
        for (r, c, _) in j_pattern.iter() {
            b.register(r, c);
        }
        for i in 0..n {
            b.register(i, i);
        }
        let p = b.freeze();
        let diag = (0..n).map(|i| p.slot(i, i).unwrap()).collect();
        let from_j = j_pattern
            .iter()
            .map(|(r, c, _)| p.slot(r, c).unwrap())
            .collect();
        let symbolic = SymbolicLu::analyze(p.clone()).map_err(|e| e.to_string())?;
        Ok(Self {
            m: CscMatrix::zeros(p),
            diag,
            from_j,
            symbolic,
        })
    }

    fn factor(&mut self, j: &CscMatrix, c: f64) -> Option<super::LuFactors> {
        self.m.clear();
        for &s in &self.diag {
            self.m.add_at(s, 1.0);
        }
        for (&s, v) in self.from_j.iter().zip(j.values()) {
            self.m.add_at(s, -c * v);
        }
        self.symbolic.factor(&self.m).ok()
    }
}

struct Integrator<'a, S: OdeSystem> {
    sys: &'a mut S,
    opts: &'a SolverOptions,
    stats: SolveStats,
    f: Vec<f64>,
}

impl<S: OdeSystem> Integrator<'_, S> {
    fn rhs(&mut self, y: &[f64]) -> Result<Vec<f64>, SolverErrorKind> {
        self.stats.rhs_evaluations += 1;
        self.f.iter_mut().for_each(|v| *v = 0.0);
        self.sys
            .rhs(y, &mut self.f)
            .map_err(SolverErrorKind::System)?;
        Ok(self.f.clone())
    }
}

/// Integrate `y' = f(y)` from `0` to `t_end`.
// The error carries the last accepted state for recovery, so it is large.
#[allow(clippy::result_large_err)]
pub fn integrate<S: OdeSystem>(
    sys: &mut S,
    y0: &[f64],
    t_end: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats), SolverError> {
    let n = sys.len();
    let fail = |kind, t, y: &[f64], stats: &SolveStats| SolverError {
        kind,
        t,
        y: y.to_vec(),
        stats: stats.clone(),
    };
    if opts.abs_tol.len() != n
        || !(opts.rel_tol > 0.0)
        || opts.abs_tol.iter().any(|a| !(*a > 0.0))
        || !(1..=MAX_ORDER).contains(&opts.max_order)
        || opts.newton_max_iters == 0
        || !(t_end >= 0.0)
    {
        return Err(fail(
            SolverErrorKind::InvalidOptions(
                "tolerances must be > 0, max_order in 1..=5, t_end ≥ 0".into(),
            ),
            0.0,
            y0,
            &SolveStats::default(),
        ));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(fail(
            SolverErrorKind::NonFinite("initial state".into()),
            0.0,
            y0,
            &SolveStats::default(),
        ));
    }
    let mut it = Integrator {
        sys,
        opts,
        stats: SolveStats::default(),
        f: vec![0.0; n],
    };
    if t_end == 0.0 || n == 0 {
        return Ok((finish(y0.to_vec(), opts), it.stats));
    }
    let coeffs = Coefficients::new();
    let rtol = opts.rel_tol;
    let mask = it.sys.inert_mask();
    let atol: Vec<f64> = (0..n)
        .map(|i| {
            if mask.get(i) == Some(&true) {
                f64::INFINITY
            } else {
                opts.abs_tol[i]
            }
        })
        .collect();
    let atol = &atol;
    let newton_tol = (10.0 * f64::EPSILON / rtol).max(0.03f64.min(rtol.sqrt()));

    let f0 = it.rhs(y0).map_err(|k| fail(k, 0.0, y0, &it.stats))?;
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(fail(
            SolverErrorKind::NonFinite("f(y0)".into()),
            0.0,
            y0,
            &it.stats,
        ));
    }
    let mut h_abs = match opts.initial_step {
        Some(h) => h.min(t_end),
        None => select_initial_step(&mut it, y0, &f0, atol, t_end)
            .map_err(|k| fail(k, 0.0, y0, &it.stats))?,
    }
    .min(opts.max_step);

    let pattern = it.sys.jacobian_pattern();
    let mut iter_mat = IterationMatrix::new(&pattern)
        .map_err(|e| fail(SolverErrorKind::System(e), 0.0, y0, &it.stats))?;
    let mut jac = CscMatrix::zeros(pattern);
    it.stats.jacobian_evaluations += 1;
    it.sys
        .jacobian(y0, &mut jac)
        .map_err(|e| fail(SolverErrorKind::System(e), 0.0, y0, &it.stats))?;
    let mut jac_age = 0usize;

    let mut d: Vec<Vec<f64>> = vec![vec![0.0; n]; MAX_ORDER + 3];
    d[0].copy_from_slice(y0);
    for i in 0..n {
        d[1][i] = f0[i] * h_abs;
    }
    let mut t = 0.0f64;
    let mut y = y0.to_vec();
    let mut order = 1usize;
    let mut n_equal_steps = 0usize;
    let mut lu: Option<super::LuFactors> = None;
    let mut lu_c = f64::NAN;

    while t < t_end {
        if it.stats.steps >= opts.max_steps {
            return Err(fail(
                SolverErrorKind::MaxSteps(opts.max_steps),
                t,
                &y,
                &it.stats,
            ));
        }
        let min_step = 10.0 * (next_up(t) - t);
        if h_abs > opts.max_step {
            change_d(&mut d, order, opts.max_step / h_abs);
            h_abs = opts.max_step;
            n_equal_steps = 0;
        } else if h_abs < min_step {
            change_d(&mut d, order, min_step / h_abs);
            h_abs = min_step;
            n_equal_steps = 0;
        }
        let mut current_jac = false;
        if jac_age >= JACOBIAN_AGE_LIMIT {
            it.stats.jacobian_evaluations += 1;
            jac.clear();
            it.sys
                .jacobian(&y, &mut jac)
                .map_err(|e| fail(SolverErrorKind::System(e), t, &y, &it.stats))?;
            jac_age = 0;
            current_jac = true;
            lu = None;
        }

        let (t_new, y_new, dvec, error_norm, safety, scale) = loop {
            if h_abs < min_step {
                return Err(fail(
                    SolverErrorKind::StepTooSmall { t, h: h_abs },
                    t,
                    &y,
                    &it.stats,
                ));
            }
            let mut h = h_abs;
            let mut t_new = t + h;
            if t_new > t_end {
                t_new = t_end;
                change_d(&mut d, order, (t_new - t) / h_abs);
                n_equal_steps = 0;
                lu = None;
            }
            h = t_new - t;
            h_abs = h;

            let mut y_predict = vec![0.0; n];
            for row in d.iter().take(order + 1) {
                for (p, v) in y_predict.iter_mut().zip(row) {
                    *p += v;
                }
            }
            let scale: Vec<f64> = (0..n)
                .map(|i| atol[i] + rtol * y_predict[i].abs())
                .collect();
            let alpha = coeffs.gamma[order];
            let mut psi = vec![0.0; n];
            for k in 1..=order {
                let g = coeffs.gamma[k] / alpha;
                for (p, v) in psi.iter_mut().zip(&d[k]) {
                    *p += g * v;
                }
            }
            let c = h / alpha;

            let mut newton = None;
            loop {
                if lu.is_none() || lu_c != c {
                    it.stats.lu_factorizations += 1;
                    lu = iter_mat.factor(&jac, c);
                    lu_c = c;
                }
                let result = match &lu {
                    Some(f) => {
                        solve_bdf_system(&mut it, &y_predict, c, &psi, f, &scale, newton_tol)
                            .map_err(|k| fail(k, t, &y, &it.stats))?
                    }
                    None => None,
                };
                match result {
                    Some(r) => {
                        newton = Some(r);
                        break;
                    }
                    None if current_jac => break,
                    None => {
                        it.stats.jacobian_evaluations += 1;
                        jac.clear();
                        it.sys
                            .jacobian(&y_predict, &mut jac)
                            .map_err(|e| fail(SolverErrorKind::System(e), t, &y, &it.stats))?;
                        jac_age = 0;
                        current_jac = true;
                        lu = None;
                    }
                }
            }
            let Some((n_iter, y_new, dvec)) = newton else {
                it.stats.newton_failures += 1;
                h_abs *= 0.5;
                change_d(&mut d, order, 0.5);
                n_equal_steps = 0;
                lu = None;
                continue;
            };
            let nmax = opts.newton_max_iters as f64;
            let safety = 0.9 * (2.0 * nmax + 1.0) / (2.0 * nmax + n_iter as f64);
            let scale: Vec<f64> = (0..n).map(|i| atol[i] + rtol * y_new[i].abs()).collect();
            let err: Vec<f64> = dvec.iter().map(|v| coeffs.error_const[order] * v).collect();
            let error_norm = rms_norm(&err, &scale);
            if error_norm > 1.0 {
                it.stats.error_test_failures += 1;
                let factor = MIN_FACTOR.max(safety * error_norm.powf(-1.0 / (order as f64 + 1.0)));
                h_abs *= factor;
                change_d(&mut d, order, factor);
                n_equal_steps = 0;
                lu = None;
                continue;
            }
            if opts.nonneg_policy == NonNegPolicy::Reject
                && y_new.iter().zip(atol).any(|(v, a)| *v < -a)
            {
                it.stats.nonneg_rejections += 1;
                h_abs *= 0.5;
                change_d(&mut d, order, 0.5);
                n_equal_steps = 0;
                lu = None;
                continue;
            }
            break (t_new, y_new, dvec, error_norm, safety, scale);
        };

        it.stats.steps += 1;
        it.stats.order_counts[order] += 1;
        it.stats.last_step = h_abs;
        jac_age += 1;
        n_equal_steps += 1;
        t = t_new;
        y = y_new;

        for i in 0..n {
            d[order + 2][i] = dvec[i] - d[order + 1][i];
            d[order + 1][i] = dvec[i];
        }
        for k in (0..=order).rev() {
            let (lo, hi) = d.split_at_mut(k + 1);
            for (a, b) in lo[k].iter_mut().zip(&hi[0]) {
                *a += b;
            }
        }

        if n_equal_steps < order + 1 {
            continue;
        }
        let error_m_norm = if order > 1 {
            let e: Vec<f64> = d[order]
                .iter()
                .map(|v| coeffs.error_const[order - 1] * v)
                .collect();
            rms_norm(&e, &scale)
        } else {
            f64::INFINITY
        };
        let error_p_norm = if order < opts.max_order {
            let e: Vec<f64> = d[order + 2]
                .iter()
                .map(|v| coeffs.error_const[order + 1] * v)
                .collect();
            rms_norm(&e, &scale)
        } else {
            f64::INFINITY
        };
        let norms = [error_m_norm, error_norm, error_p_norm];
        let mut best = 1usize;
        let mut best_factor = f64::NEG_INFINITY;
        for (k, en) in norms.iter().enumerate() {
            let f = en.powf(-1.0 / (order + k) as f64);
            if f > best_factor {
                best_factor = f;
                best = k;
            }
        }
        order = order + best - 1;
        let factor = MAX_FACTOR.min(safety * best_factor);
        h_abs *= factor;
        change_d(&mut d, order, factor);
        n_equal_steps = 0;
        lu = None;
    }
    it.stats.final_order = order;
    Ok((finish(y, opts), it.stats))
}

fn finish(mut y: Vec<f64>, opts: &SolverOptions) -> Vec<f64> {
    if opts.nonneg_policy != NonNegPolicy::Allow {
        for v in y.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    y
}

fn next_up(t: f64) -> f64 {
    if t == 0.0 {
        f64::from_bits(1)
    } else {
        f64::from_bits(t.to_bits() + 1)
    }
}

/// Newton iteration for the implicit BDF stage. `Ok(None)` means no convergence.
#[allow(clippy::type_complexity)]
fn solve_bdf_system<S: OdeSystem>(
    it: &mut Integrator<'_, S>,
    y_predict: &[f64],
    c: f64,
    psi: &[f64],
    lu: &super::LuFactors,
    scale: &[f64],
    tol: f64,
) -> Result<Option<(usize, Vec<f64>, Vec<f64>)>, SolverErrorKind> {
    let n = y_predict.len();
    let maxiter = it.opts.newton_max_iters;
    let mut d = vec![0.0; n];
    let mut y = y_predict.to_vec();
    let mut dy_norm_old: Option<f64> = None;
    for k in 0..maxiter {
        let f = it.rhs(&y)?;
        it.stats.newton_iterations += 1;
        if f.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        let b: Vec<f64> = (0..n).map(|i| c * f[i] - psi[i] - d[i]).collect();
        let dy = lu.solve(&b);
        let dy_norm = rms_norm(&dy, scale);
        let rate = dy_norm_old.map(|old| dy_norm / old);
        if let Some(r) = rate {
            if r >= 1.0 || r.powi((maxiter - k) as i32) / (1.0 - r) * dy_norm > tol {
                return Ok(None);
            }
        }
        for i in 0..n {
            y[i] += dy[i];
            d[i] += dy[i];
        }
        if dy_norm == 0.0 || rate.is_some_and(|r| r / (1.0 - r) * dy_norm < tol) {
            return Ok(Some((k + 1, y, d)));
        }
        dy_norm_old = Some(dy_norm);
    }
    Ok(None)
}

fn select_initial_step<S: OdeSystem>(
    it: &mut Integrator<'_, S>,
    y0: &[f64],
    f0: &[f64],
    atol: &[f64],
    interval: f64,
) -> Result<f64, SolverErrorKind> {
    if f0.iter().all(|v| *v == 0.0) {
        // autonomous system at rest stays at rest
        return Ok(interval);
    }
    let rtol = it.opts.rel_tol;
    let scale: Vec<f64> = y0
        .iter()
        .zip(atol)
        .map(|(y, a)| a + y.abs() * rtol)
        .collect();
    let d0 = rms_norm(y0, &scale);
    let d1 = rms_norm(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(interval);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let f1 = it.rhs(&y1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_norm(&diff, &scale) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.5)
    };
    Ok((100.0 * h0).min(h1).min(interval))
}
