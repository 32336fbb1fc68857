//! Registry of test problems.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Complex;

use crate::error::{Error, Result};

/// Autonomous vector field `out = f(y)`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Scalar function of the state (Hamiltonian, first integral).
pub type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Exact solution `(t, y0) -> y(t)`.
pub type Reference = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// An autonomous initial-value problem `y' = f(y)` with optional structure.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    /// Registry spec that rebuilds this problem through [`by_name`].
    pub spec: String,
    pub dim: usize,
    rhs: VectorField,
    hamiltonian: Option<ScalarMap>,
    invariants: Vec<(String, ScalarMap)>,
    reference: Option<Reference>,
    /// Period of the default trajectory, when it is periodic.
    pub period: Option<f64>,
    /// Default initial state.
    pub y0: Vec<f64>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("hamiltonian", &self.hamiltonian.is_some())
            .field(
                "invariants",
                &self.invariants.iter().map(|(n, _)| n).collect::<Vec<_>>(),
            )
            .field("reference", &self.reference.is_some())
            .field("period", &self.period)
            .field("y0", &self.y0)
            .finish()
    }
}

impl Problem {
    pub fn new(name: impl Into<String>, y0: Vec<f64>, rhs: VectorField) -> Self {
        let name = name.into();
        Problem {
            spec: name.clone(),
            name,
            dim: y0.len(),
            rhs,
            hamiltonian: None,
            invariants: Vec::new(),
            reference: None,
            period: None,
            y0,
        }
    }

    pub fn with_spec(mut self, spec: impl Into<String>) -> Self {
        self.spec = spec.into();
        self
    }

    pub fn with_hamiltonian(mut self, h: ScalarMap) -> Self {
        self.hamiltonian = Some(h);
        self
    }

    pub fn with_invariant(mut self, name: impl Into<String>, f: ScalarMap) -> Self {
        self.invariants.push((name.into(), f));
        self
    }

    pub fn with_reference(mut self, r: Reference) -> Self {
        self.reference = Some(r);
        self
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }

    /// Evaluates `f(y)` into `out`, rejecting non-finite output.
    pub fn rhs(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(y.len(), self.dim);
        (self.rhs)(y, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteState)
        }
    }

    pub fn rhs_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.rhs(y, &mut out)?;
        Ok(out)
    }

    pub fn has_hamiltonian(&self) -> bool {
        self.hamiltonian.is_some()
    }

    pub fn hamiltonian(&self, y: &[f64]) -> Option<f64> {
        self.hamiltonian.as_ref().map(|h| h(y))
    }

    pub fn invariants(&self) -> impl Iterator<Item = (&str, &ScalarMap)> {
        self.invariants.iter().map(|(n, f)| (n.as_str(), f))
    }

    pub fn invariant(&self, name: &str, y: &[f64]) -> Option<f64> {
        self.invariants.iter().find(|(n, _)| n == name).map(|(_, f)| f(y))
    }

    /// Exact state at time `t` from `y0`: the closed-form reference when there
    /// is one, otherwise `y0` itself at whole multiples of the period.
    pub fn exact(&self, t: f64, y0: &[f64]) -> Option<Vec<f64>> {
        if let Some(r) = &self.reference {
            return Some(r(t, y0));
        }
        let period = self.period?;
        let cycles = t / period;
        ((cycles - cycles.round()).abs() <= 1e-12 * cycles.abs().max(1.0)).then(|| y0.to_vec())
    }
}

/// Two-body Kepler problem, state `(q1, q2, p1, p2)`.
///
/// The default start `(0.4, 0, 0, 2)` lies on an orbit of eccentricity 0.6
/// and period `2 pi`.
pub fn kepler() -> Problem {
    let rhs: VectorField = Arc::new(|y, out| {
        let (q1, q2) = (y[0], y[1]);
        let r2 = q1 * q1 + q2 * q2;
        let r3 = r2 * r2.sqrt();
        out[0] = y[2];
        out[1] = y[3];
        out[2] = -q1 / r3;
        out[3] = -q2 / r3;
    });
    Problem::new("kepler", vec![0.4, 0.0, 0.0, 2.0], rhs)
        .with_hamiltonian(Arc::new(|y| {
            0.5 * (y[2] * y[2] + y[3] * y[3]) - 1.0 / (y[0] * y[0] + y[1] * y[1]).sqrt()
        }))
        .with_invariant("angular_momentum", Arc::new(|y| y[0] * y[3] - y[1] * y[2]))
        .with_period(2.0 * PI)
}

/// Dahlquist test equation `y' = lambda y`. A real `lambda` gives a scalar
/// problem; otherwise the state is `(Re y, Im y)`.
pub fn linear_test(lambda: Complex<f64>) -> Problem {
    let (a, b) = (lambda.re, lambda.im);
    let period = (a == 0.0 && b != 0.0).then(|| 2.0 * PI / b.abs());
    let problem = if b == 0.0 {
        Problem::new("linear", vec![1.0], Arc::new(move |y, out| out[0] = a * y[0]))
            .with_reference(Arc::new(move |t, y0| vec![(a * t).exp() * y0[0]]))
    } else {
        Problem::new(
            "linear",
            vec![1.0, 0.0],
            Arc::new(move |y, out| {
                out[0] = a * y[0] - b * y[1];
                out[1] = b * y[0] + a * y[1];
            }),
        )
        .with_reference(Arc::new(move |t, y0| {
            let z = (lambda * t).exp() * Complex::new(y0[0], y0[1]);
            vec![z.re, z.im]
        }))
    };
    let problem = problem.with_spec(format!("linear:{a:?},{b:?}"));
    match period {
        Some(p) => problem.with_period(p),
        None => problem,
    }
}

/// Harmonic oscillator `q' = p, p' = -omega^2 q`.
pub fn harmonic_oscillator(omega: f64) -> Result<Problem> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidConfig(format!("omega must be positive, got {omega}")));
    }
    let w2 = omega * omega;
    Ok(Problem::new(
        "harmonic",
        vec![1.0, 0.0],
        Arc::new(move |y, out| {
            out[0] = y[1];
            out[1] = -w2 * y[0];
        }),
    )
    .with_hamiltonian(Arc::new(move |y| 0.5 * (y[1] * y[1] + w2 * y[0] * y[0])))
    .with_reference(Arc::new(move |t, y0| {
        let (c, s) = ((omega * t).cos(), (omega * t).sin());
        vec![y0[0] * c + y0[1] / omega * s, -y0[0] * omega * s + y0[1] * c]
    }))
    .with_period(2.0 * PI / omega)
    .with_spec(format!("harmonic:{omega:?}")))
}

/// Names accepted by [`by_name`].
pub const REGISTRY: [&str; 3] = ["kepler", "linear", "harmonic"];

/// Looks up a registered problem.
///
/// `name` is a registry name with optional parameters after a colon:
/// `kepler`, `linear` (`lambda = -1`), `linear:RE` or `linear:RE,IM`,
/// `harmonic` (`omega = 1`) or `harmonic:OMEGA`.
pub fn by_name(name: &str) -> Result<Problem> {
    let (base, params) = match name.split_once(':') {
        Some((b, p)) => (b, Some(p)),
        None => (name, None),
    };
    let numbers = |p: &str| -> Result<Vec<f64>> {
        p.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad problem parameter `{v}` in `{name}`")))
            })
            .collect()
    };
    match (base, params) {
        ("kepler", None) => Ok(kepler()),
        ("linear", None) => Ok(linear_test(Complex::new(-1.0, 0.0))),
        ("linear", Some(p)) => match numbers(p)?.as_slice() {
            [re] => Ok(linear_test(Complex::new(*re, 0.0))),
            [re, im] => Ok(linear_test(Complex::new(*re, *im))),
            _ => Err(Error::InvalidConfig(format!("`{name}`: expected linear:RE[,IM]"))),
        },
        ("harmonic", None) => harmonic_oscillator(1.0),
        ("harmonic", Some(p)) => match numbers(p)?.as_slice() {
            [omega] => harmonic_oscillator(*omega),
            _ => Err(Error::InvalidConfig(format!("`{name}`: expected harmonic:OMEGA"))),
        },
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}
