//! Shifted and scaled Chebyshev polynomials of the first kind on `[0, 1]`.
//!
//! `P_0 = 1` and `P_j(c) = sqrt(2) T_j(2c - 1)` for `j >= 1`. With the weight
//! `1 / (pi sqrt(c (1 - c)))` the family is orthonormal, and at the `s` cosine
//! nodes returned by [`nodes`] it is also discretely orthonormal for degrees
//! below `s` under the equal quadrature weights `1/s`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// The `s` Gauss-Chebyshev abscissae on `[0, 1]` together with their angles.
///
/// `c[i] = (1 + cos theta[i]) / 2` with `theta[i] = (2i + 1) pi / (2s)` (zero
/// based), so the abscissae are strictly decreasing. Every node carries the
/// quadrature weight `1/s`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub s: usize,
    pub theta: Vec<f64>,
    pub c: Vec<f64>,
}

impl NodeSet {
    /// Equal quadrature weight shared by every node.
    pub fn weight(&self) -> f64 {
        1.0 / self.s as f64
    }

    pub fn len(&self) -> usize {
        self.s
    }

    pub fn is_empty(&self) -> bool {
        self.s == 0
    }
}

/// Builds the `s` cosine nodes.
pub fn nodes(s: usize) -> Result<NodeSet> {
    if s == 0 {
        return Err(Error::ZeroStages);
    }
    let theta: Vec<f64> = (0..s).map(|i| (2 * i + 1) as f64 * PI / (2 * s) as f64).collect();
    let mut c: Vec<f64> = theta.iter().map(|t| 0.5 * (1.0 + t.cos())).collect();
    // cos is not exactly antisymmetric about pi/2 in floating point; mirror the
    // upper half so that c[i] + c[s-1-i] == 1 holds to the last bit.
    for i in 0..s / 2 {
        c[s - 1 - i] = 1.0 - c[i];
    }
    if s % 2 == 1 {
        c[s / 2] = 0.5;
    }
    Ok(NodeSet { s, theta, c })
}

/// Evaluates `P_j(c)` through the three-term recurrence in `x = 2c - 1`.
pub fn eval_p(j: usize, c: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&c), "c = {c} outside [0, 1]");
    if j == 0 {
        return 1.0;
    }
    let x = 2.0 * c - 1.0;
    let (mut t_prev, mut t) = (1.0, x);
    for _ in 1..j {
        let next = 2.0 * x * t - t_prev;
        t_prev = t;
        t = next;
    }
    SQRT_2 * t
}

/// Fills `out[j] = P_j(c)` for `j = 0..out.len()`.
pub fn eval_p_all(c: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = 1.0;
    if n == 1 {
        return;
    }
    let x = 2.0 * c - 1.0;
    let (mut t_prev, mut t) = (1.0, x);
    out[1] = SQRT_2 * x;
    for slot in out.iter_mut().skip(2) {
        let next = 2.0 * x * t - t_prev;
        t_prev = t;
        t = next;
        *slot = SQRT_2 * t;
    }
}

/// `int_0^c P_j(x) dx`, expressed through `P_{j-1}`, `P_{j+1}` and `P_0`.
pub fn integral_p(j: usize, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    match j {
        0 => 0.5 * (eval_p(1, c) / SQRT_2 + 1.0),
        1 => 0.125 * (eval_p(2, c) - SQRT_2),
        _ => {
            let jf = j as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            0.25 * (eval_p(j + 1, c) / (jf + 1.0)
                - eval_p(j - 1, c) / (jf - 1.0)
                - sign * 2.0 * SQRT_2 / (jf * jf - 1.0))
        }
    }
}

/// Fills `out[j] = int_0^c P_j` for `j = 0..out.len()`, sharing one recurrence.
pub fn integral_p_all(c: f64, out: &mut [f64]) {
    if c == 0.0 {
        out.fill(0.0);
        return;
    }
    let n = out.len();
    let mut p = vec![0.0; n + 2];
    eval_p_all(c, &mut p);
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = match j {
            0 => 0.5 * (p[1] / SQRT_2 + 1.0),
            1 => 0.125 * (p[2] - SQRT_2),
            _ => {
                let jf = j as f64;
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                0.25 * (p[j + 1] / (jf + 1.0) - p[j - 1] / (jf - 1.0) - sign * 2.0 * SQRT_2 / (jf * jf - 1.0))
            }
        };
    }
}

/// `int_0^1 P_j(x) dx` in closed form.
pub fn integral_p_at_one(j: usize) -> f64 {
    if j == 0 {
        1.0
    } else if j % 2 == 1 {
        0.0
    } else {
        let jf = j as f64;
        SQRT_2 / (1.0 - jf * jf)
    }
}
