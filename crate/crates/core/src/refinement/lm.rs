//! Levenberg–Marquardt over a camera block and independent 3D point blocks,
//! eliminating the points with the Schur complement.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::{Error, Result};

pub(crate) const INITIAL_DAMPING: f64 = 1e-4;
pub(crate) const MAX_DAMPING: f64 = 1e16;
pub(crate) const RELATIVE_TOLERANCE: f64 = 1e-9;
pub(crate) const GRADIENT_TOLERANCE: f64 = 1e-9;
pub(crate) const MAX_ITERATIONS: usize = 100;

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative cost decrease fell below tolerance.
    SmallDecrease,
    /// Gradient ∞-norm fell below tolerance.
    SmallGradient,
    MaxIterations,
    /// No damping produced a step that lowers the cost.
    Stalled,
    /// The damped normal equations could not be solved.
    RankDeficient,
}

/// Linearization of one whitened residual `u`: cost `w ρ(‖u‖²)` with
/// `scale = w ρ′(‖u‖²)`.
pub(crate) struct Term {
    pub point: Option<usize>,
    pub scale: f64,
    pub u: DVector<f64>,
    pub camera: DMatrix<f64>,
    pub structure: Option<DMatrix<f64>>,
}

pub(crate) trait Problem {
    type State: Clone;

    fn camera_dim(&self) -> usize;
    fn point_count(&self) -> usize;
    /// Total cost; non-finite when the state is infeasible.
    fn cost(&self, state: &Self::State) -> f64;
    fn linearize(&self, state: &Self::State, terms: &mut Vec<Term>) -> Result<()>;
    /// Gradient of any cost part that is not a sum of terms.
    fn extra_gradient(&self, _state: &Self::State, _g: &mut DVector<f64>) {}
    fn retract(&self, state: &Self::State, camera: &DVector<f64>, points: &[Vector3<f64>]) -> Result<Self::State>;
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome<S> {
    pub state: S,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub gradient_norm: f64,
}

struct Normal {
    hcc: DMatrix<f64>,
    gc: DVector<f64>,
    hpp: Vec<Matrix3<f64>>,
    hcp: Vec<DMatrix<f64>>,
    gp: Vec<Vector3<f64>>,
}

impl Normal {
    fn build<P: Problem>(problem: &P, state: &P::State, terms: &mut Vec<Term>) -> Result<Self> {
        let nc = problem.camera_dim();
        let np = problem.point_count();
        let mut n = Normal {
            hcc: DMatrix::zeros(nc, nc),
            gc: DVector::zeros(nc),
            hpp: alloc::vec![Matrix3::zeros(); np],
            hcp: alloc::vec![DMatrix::zeros(nc, 3); np],
            gp: alloc::vec![Vector3::zeros(); np],
        };
        terms.clear();
        problem.linearize(state, terms)?;
        for t in terms.iter() {
            // Gradient and Gauss–Newton Hessian of Σ w ρ(‖u‖²).
            let s2 = 2.0 * t.scale;
            if s2 == 0.0 {
                continue;
            }
            if nc > 0 {
                n.hcc.gemm_tr(s2, &t.camera, &t.camera, 1.0);
                n.gc.gemv_tr(s2, &t.camera, &t.u, 1.0);
            }
            if let (Some(i), Some(jp)) = (t.point, t.structure.as_ref()) {
                let jtj = jp.transpose() * jp;
                n.hpp[i] += Matrix3::from_iterator(jtj.iter().copied()) * s2;
                let jtu = jp.transpose() * &t.u;
                n.gp[i] += Vector3::from_iterator(jtu.iter().copied()) * s2;
                if nc > 0 {
                    n.hcp[i].gemm_tr(s2, &t.camera, jp, 1.0);
                }
            }
        }
        problem.extra_gradient(state, &mut n.gc);
        Ok(n)
    }

    fn gradient_norm(&self) -> f64 {
        let c = self.gc.amax();
        self.gp.iter().fold(c, |m, g| m.max(g.amax()))
    }

    /// Solves the damped system `(H + λ diag H) δ = −g`.
    fn solve(&self, lambda: f64) -> Option<(DVector<f64>, Vec<Vector3<f64>>)> {
        let nc = self.gc.len();
        let damp = |h: f64| h + lambda * h.max(1e-12);
        let mut s = self.hcc.clone();
        for i in 0..nc {
            s[(i, i)] = damp(s[(i, i)]);
        }
        let mut rhs = -&self.gc;
        let mut inv_blocks = Vec::with_capacity(self.hpp.len());
        for (i, h) in self.hpp.iter().enumerate() {
            let mut d = *h;
            for k in 0..3 {
                d[(k, k)] = damp(d[(k, k)]);
            }
            let inv = d.try_inverse()?;
            if nc > 0 {
                let w = &self.hcp[i] * inv;
                s -= &w * self.hcp[i].transpose();
                rhs += &w * self.gp[i];
            }
            inv_blocks.push(inv);
        }
        let dc = if nc > 0 {
            let sym = (&s + s.transpose()) * 0.5;
            sym.cholesky()?.solve(&rhs)
        } else {
            DVector::zeros(0)
        };
        if dc.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let dp = inv_blocks
            .iter()
            .enumerate()
            .map(|(i, inv)| {
                let coupling = if nc > 0 {
                    let c = self.hcp[i].transpose() * &dc;
                    Vector3::new(c[0], c[1], c[2])
                } else {
                    Vector3::zeros()
                };
                -(inv * (self.gp[i] + coupling))
            })
            .collect();
        Some((dc, dp))
    }
}

pub(crate) fn minimize<P: Problem>(problem: &P, initial: P::State) -> Result<Outcome<P::State>> {
    let mut state = initial;
    let mut cost = problem.cost(&state);
    if !cost.is_finite() {
        return Err(Error::NonFiniteCost);
    }
    let initial_cost = cost;
    let mut lambda = INITIAL_DAMPING;
    let mut iterations = 0;
    let mut terms = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut gradient_norm = f64::INFINITY;
    'outer: while iterations < MAX_ITERATIONS {
        let normal = Normal::build(problem, &state, &mut terms)?;
        gradient_norm = normal.gradient_norm();
        if gradient_norm < GRADIENT_TOLERANCE {
            termination = Termination::SmallGradient;
            break;
        }
        loop {
            if lambda > MAX_DAMPING {
                termination = Termination::Stalled;
                break 'outer;
            }
            let Some((dc, dp)) = normal.solve(lambda) else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    termination = Termination::RankDeficient;
                    break 'outer;
                }
                continue;
            };
            let trial_cost = match problem.retract(&state, &dc, &dp) {
                Ok(trial) => {
                    let c = problem.cost(&trial);
                    if c.is_finite() && c <= cost {
                        Some((trial, c))
                    } else {
                        None
                    }
                }
                Err(_) => None,
            };
            match trial_cost {
                Some((trial, c)) => {
                    // Negligible improvements end the run without moving.
                    if (cost - c) <= RELATIVE_TOLERANCE * cost.abs() {
                        termination = Termination::SmallDecrease;
                        break 'outer;
                    }
                    state = trial;
                    cost = c;
                    iterations += 1;
                    lambda = (lambda / 10.0).max(1e-15);
                    break;
                }
                None => lambda *= 10.0,
            }
        }
    }
    Ok(Outcome {
        state,
        initial_cost,
        final_cost: cost,
        iterations,
        termination,
        gradient_norm,
    })
}
