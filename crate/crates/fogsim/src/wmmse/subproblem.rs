//! Interior-point solver for the per-subchannel power subproblem.
//!
//! Variables are transmit amplitudes `q` (so powers are `q^2`). The
//! objective is a separable convex quadratic `sum_j A_j q_j^2 - b_j q_j`;
//! constraints are the box `0 <= q_j <= s_j` and one Lorentz-cone QoS
//! constraint per protected UE,
//!
//! ```text
//! c_i q_i^2 >= sum_{k != i} a_{i,k} q_k^2 + d_i,    q_i >= 0,
//! ```
//!
//! solved with the standard log-barrier `-ln(c q_i^2 - sum a q^2 - d)`
//! (self-concordant on the cone) and damped Newton centering.
//!
//! A strictly feasible start comes from the minimal-power fixed point
//! `q_i^2 = (sum a q^2 + d) / c_i`, which is componentwise minimal among
//! feasible points; if it violates a box bound the problem is infeasible.

use nalgebra::{DMatrix, DVector};

/// One QoS cone: `own_coeff * q[own]^2 >= sum coeffs[k] q[k]^2 + noise`.
#[derive(Debug, Clone)]
pub struct Cone {
    pub own: usize,
    /// Interference coefficients; `coeffs[own]` must be zero.
    pub coeffs: Vec<f64>,
    pub noise: f64,
    pub own_coeff: f64,
}

/// `min sum_j quad_j q_j^2 - lin_j q_j` over the box and the cones.
#[derive(Debug, Clone)]
pub struct QpSocProblem {
    pub quad: Vec<f64>,
    pub lin: Vec<f64>,
    pub upper: Vec<f64>,
    pub cones: Vec<Cone>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    /// The QoS cones and the power box admit no common point.
    Infeasible,
    Numeric(String),
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub q: Vec<f64>,
    pub objective: f64,
    /// Relative stationarity residual of the KKT system at the returned
    /// point (duals recovered from the barrier).
    pub kkt_residual: f64,
}

impl QpSocProblem {
    fn dim(&self) -> usize {
        self.quad.len()
    }

    pub fn objective(&self, q: &[f64]) -> f64 {
        q.iter()
            .enumerate()
            .map(|(j, &x)| self.quad[j] * x * x - self.lin[j] * x)
            .sum()
    }

    /// Cone slack `c q_own^2 - sum a q^2 - d` (feasible when positive).
    fn cone_slack(&self, cone: &Cone, q: &[f64]) -> f64 {
        let mut lhs = cone.noise;
        for (k, &a) in cone.coeffs.iter().enumerate() {
            if k != cone.own {
                lhs += a * q[k] * q[k];
            }
        }
        cone.own_coeff * q[cone.own] * q[cone.own] - lhs
    }

    pub fn is_feasible(&self, q: &[f64], tol: f64) -> bool {
        q.iter()
            .zip(&self.upper)
            .all(|(&x, &s)| x >= -tol && x <= s + tol)
            && self.cones.iter().all(|c| self.cone_slack(c, q) >= -tol)
    }
}

/// Minimal-power fixed point for the cone owners; non-owners parked at a
/// sliver of their box so their interference is accounted for.
fn phase1(p: &QpSocProblem) -> Result<Vec<f64>, SolveError> {
    let n = p.dim();
    let mut owned = vec![false; n];
    for c in &p.cones {
        if c.own_coeff <= 0.0 {
            return Err(SolveError::Infeasible);
        }
        if owned[c.own] {
            return Err(SolveError::Numeric("duplicate cone owner".into()));
        }
        owned[c.own] = true;
    }
    let mut q2: Vec<f64> = (0..n)
        .map(|j| {
            if owned[j] {
                0.0
            } else {
                let eps = 1e-6 * p.upper[j];
                eps * eps
            }
        })
        .collect();

    let box2: Vec<f64> = p.upper.iter().map(|s| s * s).collect();
    for _ in 0..20_000 {
        let mut delta = 0.0f64;
        for c in &p.cones {
            let mut need = c.noise;
            for (k, &a) in c.coeffs.iter().enumerate() {
                if k != c.own {
                    need += a * q2[k];
                }
            }
            let new = need / c.own_coeff;
            delta = delta.max((new - q2[c.own]).abs() / new.max(1e-300));
            q2[c.own] = new;
            if new > box2[c.own] * (1.0 + 1e-9) {
                // Monotone iteration already exceeds the cap: the minimal
                // feasible point does too.
                return Err(SolveError::Infeasible);
            }
        }
        if delta < 1e-13 {
            let q_min: Vec<f64> = q2.iter().map(|&x| x.sqrt()).collect();
            // Scale up slightly: uniform scaling strictly increases every
            // cone slack, giving the barrier a strict interior point.
            let mut scale = 1.05f64;
            for (j, &q) in q_min.iter().enumerate() {
                if owned[j] && q > 0.0 {
                    scale = scale.min(p.upper[j] * (1.0 - 1e-9) / q);
                }
            }
            if scale <= 1.0 + 1e-12 {
                return Err(SolveError::Infeasible);
            }
            let start: Vec<f64> = q_min
                .iter()
                .enumerate()
                .map(|(j, &q)| {
                    if owned[j] {
                        (q * scale).max(1e-9 * p.upper[j])
                    } else {
                        1e-6 * p.upper[j]
                    }
                })
                .collect();
            if !p.is_feasible(&start, 0.0) {
                return Err(SolveError::Infeasible);
            }
            return Ok(start);
        }
    }
    Err(SolveError::Infeasible)
}

struct Barrier<'a> {
    p: &'a QpSocProblem,
    /// Objective normalization so `t` stays in a sane range.
    scale: f64,
}

impl<'a> Barrier<'a> {
    fn new(p: &'a QpSocProblem) -> Self {
        let mut scale = 1e-12f64;
        for j in 0..p.dim() {
            let s = p.upper[j];
            scale = scale.max(p.quad[j] * s * s).max(p.lin[j].abs() * s);
        }
        Self { p, scale }
    }

    fn constraint_count(&self) -> usize {
        2 * self.p.dim() + self.p.cones.len()
    }

    /// `t * F(q)/scale + phi(q)`, or None when outside the domain.
    fn value(&self, t: f64, q: &[f64]) -> Option<f64> {
        let mut v = t * self.p.objective(q) / self.scale;
        for (j, &x) in q.iter().enumerate() {
            let hi = self.p.upper[j] - x;
            if x <= 0.0 || hi <= 0.0 {
                return None;
            }
            v -= x.ln() + hi.ln();
        }
        for c in &self.p.cones {
            let slack = self.p.cone_slack(c, q);
            if slack <= 0.0 {
                return None;
            }
            v -= slack.ln();
        }
        Some(v)
    }

    fn grad_hess(&self, t: f64, q: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.p.dim();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            g[j] = t * (2.0 * self.p.quad[j] * q[j] - self.p.lin[j]) / self.scale;
            h[(j, j)] = t * 2.0 * self.p.quad[j] / self.scale;
            // Box barrier.
            let hi = self.p.upper[j] - q[j];
            g[j] += -1.0 / q[j] + 1.0 / hi;
            h[(j, j)] += 1.0 / (q[j] * q[j]) + 1.0 / (hi * hi);
        }
        for c in &self.p.cones {
            let slack = self.p.cone_slack(c, q);
            // f = -slack; barrier -ln(slack). grad f_j: 2a_j q_j, own: -2c q.
            let mut df = DVector::zeros(n);
            for (k, &a) in c.coeffs.iter().enumerate() {
                if k != c.own {
                    df[k] = 2.0 * a * q[k];
                }
            }
            df[c.own] = -2.0 * c.own_coeff * q[c.own];
            // -ln(slack): grad = df/slack, hess = df df^T / slack^2 + d2f/slack.
            for j in 0..n {
                g[j] += df[j] / slack;
            }
            let outer = &df * df.transpose() / (slack * slack);
            h += outer;
            for (k, &a) in c.coeffs.iter().enumerate() {
                if k != c.own {
                    h[(k, k)] += 2.0 * a / slack;
                }
            }
            h[(c.own, c.own)] += -2.0 * c.own_coeff / slack;
        }
        (g, h)
    }

    /// Damped Newton to the analytic center of `t F + phi`.
    fn center(&self, t: f64, q: &mut Vec<f64>) -> Result<(), SolveError> {
        for _ in 0..80 {
            let (g, mut h) = self.grad_hess(t, q);
            let mut step = None;
            for ridge in 0..6 {
                if let Some(chol) = h.clone().cholesky() {
                    step = Some(chol.solve(&(-&g)));
                    break;
                }
                let bump = 10f64.powi(ridge - 8) * h.diagonal().amax().max(1e-30);
                for j in 0..self.p.dim() {
                    h[(j, j)] += bump;
                }
            }
            let Some(dir) = step else {
                return Err(SolveError::Numeric("barrier Hessian factorization failed".into()));
            };
            let decrement = -g.dot(&dir);
            if decrement <= 1e-12 {
                return Ok(());
            }
            let cur = self
                .value(t, q)
                .ok_or_else(|| SolveError::Numeric("barrier iterate left the domain".into()))?;
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand: Vec<f64> = q.iter().zip(dir.iter()).map(|(&x, &d)| x + alpha * d).collect();
                if let Some(v) = self.value(t, &cand) {
                    if v <= cur - 0.25 * alpha * decrement {
                        *q = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                return Ok(()); // numerically converged
            }
        }
        Ok(())
    }
}

/// Solve the subproblem to a relative KKT residual around 1e-8.
pub fn solve(p: &QpSocProblem) -> Result<Solution, SolveError> {
    let n = p.dim();
    if n == 0 {
        return Ok(Solution {
            q: vec![],
            objective: 0.0,
            kkt_residual: 0.0,
        });
    }
    if p.lin.len() != n || p.upper.len() != n {
        return Err(SolveError::Numeric("dimension mismatch".into()));
    }
    if p.upper.iter().any(|&s| s <= 0.0) || p.quad.iter().any(|&a| a < 0.0) {
        return Err(SolveError::Numeric("bad bounds or negative curvature".into()));
    }

    let mut q = phase1(p)?;
    let barrier = Barrier::new(p);
    let m = barrier.constraint_count() as f64;
    let mut t = 1.0;
    for _ in 0..48 {
        barrier.center(t, &mut q)?;
        if m / t < 1e-11 {
            break;
        }
        t *= 12.0;
    }

    // Recover duals and the stationarity residual.
    let mut resid = DVector::zeros(n);
    let mut grad_norm = 1e-30f64;
    for j in 0..n {
        let df = (2.0 * p.quad[j] * q[j] - p.lin[j]) / barrier.scale;
        grad_norm = grad_norm.max(df.abs());
        resid[j] = df - 1.0 / (t * q[j]) + 1.0 / (t * (p.upper[j] - q[j]));
    }
    for c in &p.cones {
        let slack = p.cone_slack(c, &q);
        let lambda = 1.0 / (t * slack);
        for (k, &a) in c.coeffs.iter().enumerate() {
            if k != c.own {
                resid[k] += lambda * 2.0 * a * q[k];
            }
        }
        resid[c.own] += lambda * (-2.0 * c.own_coeff * q[c.own]);
    }
    let kkt = resid.amax() / grad_norm.max(1.0);

    Ok(Solution {
        objective: p.objective(&q),
        q,
        kkt_residual: kkt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unconstrained_quadratic_hits_vertex() {
        // min q^2 - 4q on [0, 10]: optimum q = 2.
        let p = QpSocProblem {
            quad: vec![1.0],
            lin: vec![4.0],
            upper: vec![10.0],
            cones: vec![],
        };
        let s = solve(&p).unwrap();
        assert_relative_eq!(s.q[0], 2.0, max_relative = 1e-6);
        assert!(s.kkt_residual < 1e-6);
    }

    #[test]
    fn increasing_objective_drives_to_zero() {
        // Realistic V0-scale curvature exercises the normalization.
        let p = QpSocProblem {
            quad: vec![2.5e12],
            lin: vec![0.0],
            upper: vec![1.0],
            cones: vec![],
        };
        let s = solve(&p).unwrap();
        assert!(s.q[0] < 1e-3, "q = {}", s.q[0]);
    }

    #[test]
    fn single_cone_sits_on_threshold() {
        // min q^2 s.t. 4 q^2 >= 0.5  ->  q = sqrt(1/8).
        let p = QpSocProblem {
            quad: vec![1.0],
            lin: vec![0.0],
            upper: vec![5.0],
            cones: vec![Cone {
                own: 0,
                coeffs: vec![0.0],
                noise: 0.5,
                own_coeff: 4.0,
            }],
        };
        let s = solve(&p).unwrap();
        assert_relative_eq!(s.q[0], (0.125f64).sqrt(), max_relative = 1e-5);
    }

    #[test]
    fn infeasible_cone_is_reported() {
        // Needs q^2 >= 9 but the box stops at 2.
        let p = QpSocProblem {
            quad: vec![1.0],
            lin: vec![0.0],
            upper: vec![2.0],
            cones: vec![Cone {
                own: 0,
                coeffs: vec![0.0],
                noise: 9.0,
                own_coeff: 1.0,
            }],
        };
        assert_eq!(solve(&p).unwrap_err(), SolveError::Infeasible);
    }

    #[test]
    fn mutually_hostile_cones_are_infeasible() {
        // Each needs to dominate the other by 4x: impossible.
        let cone = |own: usize, other: usize| Cone {
            own,
            coeffs: {
                let mut c = vec![0.0, 0.0];
                c[other] = 4.0;
                c
            },
            noise: 0.1,
            own_coeff: 1.0,
        };
        let p = QpSocProblem {
            quad: vec![1.0, 1.0],
            lin: vec![0.0, 0.0],
            upper: vec![100.0, 100.0],
            cones: vec![cone(0, 1), cone(1, 0)],
        };
        assert_eq!(solve(&p).unwrap_err(), SolveError::Infeasible);
    }

    // Rejection-sampling oracle on a coupled 3-dimensional instance.
    #[test]
    fn beats_random_feasible_points() {
        use rand::Rng;
        let p = QpSocProblem {
            quad: vec![2.0, 3.0, 1.5],
            lin: vec![1.0, 0.0, 2.0],
            upper: vec![2.0, 2.0, 2.0],
            cones: vec![
                Cone {
                    own: 0,
                    coeffs: vec![0.0, 0.3, 0.2],
                    noise: 0.2,
                    own_coeff: 5.0,
                },
                Cone {
                    own: 1,
                    coeffs: vec![0.4, 0.0, 0.1],
                    noise: 0.3,
                    own_coeff: 6.0,
                },
            ],
        };
        let s = solve(&p).unwrap();
        assert!(p.is_feasible(&s.q, 1e-9));
        let mut rng = crate::rng::stream_rng(5, crate::rng::Stream::Policy, 0);
        let mut checked = 0;
        while checked < 10_000 {
            let cand: Vec<f64> = (0..3).map(|j| rng.random::<f64>() * p.upper[j]).collect();
            if p.is_feasible(&cand, 0.0) {
                checked += 1;
                assert!(
                    p.objective(&cand) >= s.objective - 1e-6 * s.objective.abs().max(1.0),
                    "random point beat the solver: {:?}",
                    cand
                );
            }
        }
    }
}
