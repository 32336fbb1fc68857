//! Fixed-step integrator: stage fixed-point iteration, Fourier-coefficient
//! extraction, endpoint update and dense output.
//!
//! Each sweep computes `Y <- 1 (x) y0 + h A f(Y)`, either with the dense
//! Butcher matrix or as `idct(X dct(f(Y)))` on the fast path. At convergence
//! the coefficients `gamma = P^T f(Y) / k` define the collocation polynomial
//! `u(ch) = y0 + h sum_j (int_0^c P_j) gamma_j`, and `y1 = u(h)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{eval_p_all, integral_p_all, integral_p_at_one};
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::tableau::ButcherTableau;
use crate::transform::{TransformMode, TransformPlan};

/// How the Butcher matrix is applied during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ButcherPath {
    /// Dense `k x k` product with `A`.
    Dense,
    /// `idct(X dct(.))`; square tableaus only.
    #[default]
    Fast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub s: usize,
    pub k: usize,
    pub h: f64,
    /// Relative increment tolerance of the stage iteration.
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub path: ButcherPath,
    /// Keep every step's coefficients in the trajectory for dense output.
    pub dense_output: bool,
}

impl SolverConfig {
    /// Square CCM(s) configuration with default tolerances and the fast path.
    pub fn new(s: usize, h: f64) -> Self {
        SolverConfig {
            s,
            k: s,
            h,
            fp_tol: 1e-14,
            fp_max_iter: 100,
            path: ButcherPath::Fast,
            dense_output: true,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        if k != self.s {
            self.path = ButcherPath::Dense;
        }
        self
    }

    pub fn with_path(mut self, path: ButcherPath) -> Self {
        self.path = path;
        self
    }

    pub fn with_fp_tol(mut self, tol: f64) -> Self {
        self.fp_tol = tol;
        self
    }

    pub fn with_fp_max_iter(mut self, n: usize) -> Self {
        self.fp_max_iter = n;
        self
    }

    pub fn with_dense_output(mut self, keep: bool) -> Self {
        self.dense_output = keep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::ZeroStages);
        }
        if self.k < self.s {
            return Err(Error::TooFewNodes { s: self.s, k: self.k });
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "timestep must be positive, got {}",
                self.h
            )));
        }
        if !(self.fp_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "fp_tol must be positive, got {}",
                self.fp_tol
            )));
        }
        if self.fp_max_iter == 0 {
            return Err(Error::InvalidConfig("fp_max_iter must be at least 1".into()));
        }
        if self.path == ButcherPath::Fast && self.k != self.s {
            return Err(Error::InvalidConfig("the fast path requires k = s".into()));
        }
        Ok(())
    }
}

/// One accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    /// `y1 - y0` as accumulated before rounding into `y1`.
    pub increment: Vec<f64>,
    /// `s x m` approximate Fourier coefficients, row `j` is `gamma_j`.
    pub gamma_hat: DMatrix<f64>,
    pub iterations: usize,
    /// Max-norm of the last stage increment.
    pub defect: f64,
    pub h: f64,
}

impl StepResult {
    /// Collocation polynomial `u(ch)` for `c` in `[0, 1]`.
    pub fn dense_eval(&self, c: f64) -> Result<Vec<f64>> {
        check_unit(c)?;
        let s = self.gamma_hat.nrows();
        let mut ints = vec![0.0; s];
        integral_p_all(c, &mut ints);
        Ok(self.combine(&self.y0, self.h, &ints))
    }

    /// Derivative `u'(ch) = sum_j P_j(c) gamma_j`.
    pub fn derivative_eval(&self, c: f64) -> Result<Vec<f64>> {
        check_unit(c)?;
        let s = self.gamma_hat.nrows();
        let mut p = vec![0.0; s];
        eval_p_all(c, &mut p);
        Ok(self.combine(&vec![0.0; self.y0.len()], 1.0, &p))
    }

    fn combine(&self, base: &[f64], scale: f64, coeffs: &[f64]) -> Vec<f64> {
        let mut out = base.to_vec();
        for (j, &w) in coeffs.iter().enumerate() {
            for (d, o) in out.iter_mut().enumerate() {
                *o += scale * w * self.gamma_hat[(j, d)];
            }
        }
        out
    }

    /// Max-norm of the `|gamma_j|` row, one value per coefficient.
    pub fn coefficient_norms(&self) -> Vec<f64> {
        self.gamma_hat
            .row_iter()
            .map(|r| r.iter().fold(0.0f64, |a, v| a.max(v.abs())))
            .collect()
    }
}

/// Free-function form of [`StepResult::dense_eval`].
pub fn dense_eval(r: &StepResult, c: f64) -> Result<Vec<f64>> {
    r.dense_eval(c)
}

fn check_unit(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::Domain {
            value: c,
            domain: "[0, 1]",
        })
    }
}

/// Uniform-step solution.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `states[n]` is the state at `times[n]`; `states[0]` is the initial value.
    pub states: Vec<Vec<f64>>,
    /// Per-step results, empty when dense output is disabled.
    pub steps: Vec<StepResult>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Dense output at time `t` inside the integration span.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (first, last) = match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) if !self.steps.is_empty() => (a, b),
            _ => return Err(Error::InvalidConfig("trajectory has no dense output".into())),
        };
        if !(first..=last).contains(&t) {
            return Err(Error::Domain {
                value: t,
                domain: "integration span",
            });
        }
        let idx = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            n => (n - 1).min(self.steps.len() - 1),
        };
        let step = &self.steps[idx];
        let c = ((t - self.times[idx]) / step.h).clamp(0.0, 1.0);
        step.dense_eval(c)
    }
}

/// A configured method: tableau, transform plan and stepping loop.
#[derive(Debug, Clone)]
pub struct Integrator {
    cfg: SolverConfig,
    tableau: Arc<ButcherTableau>,
    plan: Option<TransformPlan>,
    /// `int_0^1 P_j` for `j < s`.
    end_weights: Vec<f64>,
}

impl Integrator {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let tableau = Arc::new(ButcherTableau::new(cfg.s, cfg.k)?);
        Self::with_tableau(cfg, tableau)
    }

    /// Reuses an existing tableau, which must match `cfg.s` and `cfg.k`.
    pub fn with_tableau(cfg: SolverConfig, tableau: Arc<ButcherTableau>) -> Result<Self> {
        cfg.validate()?;
        if tableau.s != cfg.s || tableau.k != cfg.k {
            return Err(Error::InvalidConfig(format!(
                "tableau (s={}, k={}) does not match configuration (s={}, k={})",
                tableau.s, tableau.k, cfg.s, cfg.k
            )));
        }
        let plan = match cfg.path {
            ButcherPath::Fast => Some(TransformPlan::new(cfg.s, TransformMode::Fast)?),
            ButcherPath::Dense => None,
        };
        let end_weights = (0..cfg.s).map(integral_p_at_one).collect();
        Ok(Integrator {
            cfg,
            tableau,
            plan,
            end_weights,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn tableau(&self) -> &ButcherTableau {
        &self.tableau
    }

    /// Advances `y0` by one step of size `cfg.h`.
    pub fn step(&mut self, problem: &Problem, y0: &[f64]) -> Result<StepResult> {
        let m = problem.dim;
        if y0.len() != m {
            return Err(Error::ShapeMismatch {
                expected: format!("state of dimension {m}"),
                got: format!("dimension {}", y0.len()),
            });
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        let (s, k, h) = (self.cfg.s, self.cfg.k, self.cfg.h);
        let base = DMatrix::from_fn(k, m, |_, d| y0[d]);
        let mut stages = base.clone();
        let mut forces = DMatrix::zeros(k, m);
        let mut ybuf = vec![0.0; m];
        let mut fbuf = vec![0.0; m];
        // dct_forward(f(Y)) on the fast path; reused for the coefficients.
        let mut spectrum: Option<DMatrix<f64>> = None;

        let mut prev_inc = f64::INFINITY;
        let mut growth = 0usize;
        let mut converged = None;
        let mut defect = f64::NAN;
        for sweep in 1..=self.cfg.fp_max_iter {
            for i in 0..k {
                for d in 0..m {
                    ybuf[d] = stages[(i, d)];
                }
                problem.rhs(&ybuf, &mut fbuf)?;
                for d in 0..m {
                    forces[(i, d)] = fbuf[d];
                }
            }
            let applied = match self.plan.as_mut() {
                Some(plan) => {
                    let z = plan.dct_forward(&forces)?;
                    let xz = self.tableau.x.apply(&z)?;
                    spectrum = Some(z);
                    plan.dct_inverse(&xz)?
                }
                None => &self.tableau.a * &forces,
            };
            let next = &base + applied * h;
            let inc = (&next - &stages).abs().max();
            let scale = next.abs().max();
            stages = next;
            defect = inc;
            if !inc.is_finite() {
                return Err(Error::FixedPointDiverged {
                    iterations: sweep,
                    defect: inc,
                });
            }
            if inc <= self.cfg.fp_tol * (1.0 + scale) {
                converged = Some(sweep);
                break;
            }
            growth = if inc > 10.0 * prev_inc { growth + 1 } else { 0 };
            if growth >= 3 {
                return Err(Error::FixedPointDiverged {
                    iterations: sweep,
                    defect: inc,
                });
            }
            prev_inc = inc;
        }
        let iterations = converged.ok_or(Error::FixedPointDiverged {
            iterations: self.cfg.fp_max_iter,
            defect,
        })?;

        // gamma = P^T f(Y) / k, with f evaluated at the stages that produced
        // the final sweep, so that Y = u(c h) holds exactly.
        let gamma_hat = match spectrum {
            Some(z) => z / (s as f64).sqrt(),
            None => self.tableau.p.tr_mul(&forces) / k as f64,
        };
        let mut increment = vec![0.0; m];
        for (j, &w) in self.end_weights.iter().enumerate() {
            if w != 0.0 {
                for (d, v) in increment.iter_mut().enumerate() {
                    *v += w * gamma_hat[(j, d)];
                }
            }
        }
        increment.iter_mut().for_each(|v| *v *= h);
        let y1 = y0.iter().zip(&increment).map(|(a, b)| a + b).collect();
        Ok(StepResult {
            y0: y0.to_vec(),
            y1,
            increment,
            gamma_hat,
            iterations,
            defect,
            h,
        })
    }

    /// `round(t_end / h)` uniform steps from `y0`.
    pub fn integrate(&mut self, problem: &Problem, y0: &[f64], t_end: f64) -> Result<Trajectory> {
        let h = self.cfg.h;
        if !(t_end > 0.0) {
            return Err(Error::InvalidConfig(format!("t_end must be positive, got {t_end}")));
        }
        let n = (t_end / h).round();
        if !(1.0..=1e7).contains(&n) {
            return Err(Error::InvalidConfig(format!(
                "t_end / h = {} is outside 1..1e7",
                t_end / h
            )));
        }
        if (n * h - t_end).abs() > 1e-9 * t_end {
            return Err(Error::InvalidConfig(format!(
                "t_end = {t_end} is not a whole number of steps of size {h}"
            )));
        }
        let n = n as usize;
        let mut traj = Trajectory {
            times: Vec::with_capacity(n + 1),
            states: Vec::with_capacity(n + 1),
            steps: Vec::with_capacity(if self.cfg.dense_output { n } else { 0 }),
        };
        traj.times.push(0.0);
        traj.states.push(y0.to_vec());
        let mut carry = vec![0.0; y0.len()];
        for index in 0..n {
            let current = traj.states.last().expect("non-empty");
            let r = self.step(problem, current).map_err(|e| Error::StepFailed {
                index,
                source: Box::new(e),
            })?;
            let mut next = current.clone();
            compensated_add(&mut next, &mut carry, &r.increment);
            traj.times.push((index + 1) as f64 * h);
            traj.states.push(next);
            if self.cfg.dense_output {
                traj.steps.push(r);
            }
        }
        Ok(traj)
    }
}

/// Compensated summation `y += increment`, carrying the rounding error of each
/// update in `carry` so it is folded into the next one.
pub fn compensated_add(y: &mut [f64], carry: &mut [f64], increment: &[f64]) {
    for ((v, c), &d) in y.iter_mut().zip(carry.iter_mut()).zip(increment) {
        let inc = d + *c;
        let next = *v + inc;
        *c = inc - (next - *v);
        *v = next;
    }
}
