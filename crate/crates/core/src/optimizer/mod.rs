//! Per-cycle hand trajectory optimization.
//!
//! [`CycleSpec`] describes one catch-and-throw cycle, [`assemble_cycle`] turns
//! it into a quadratic program with nonlinear inequalities and [`solve`]
//! minimizes it. [`plan_cycle`] chains the three.

mod cycle;
mod evaluate;
mod problem;
mod solver;

use serde::Serialize;
use thiserror::Error;

pub use cycle::{
    slerp, ConstraintId, ConstraintSet, ConstraintWindows, CycleConfig, CycleEnd, CycleInputs, CycleSpec,
    HandNormalSchedule, Incoming, IncomingBall, Ramp,
};
pub use evaluate::{evaluate_constraints, Residual, ResidualReport};
pub use problem::{assemble_cycle, tangent_basis, AffineMap3, CycleProblem, Inequality, InequalityKind};
pub use solver::{solve, NullSpace, SolveReport, SolverOptions};

use crate::trajectory::{JerkTrajectory, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("post-takeoff window ending at {release_end:.4} s overlaps pre-touchdown window starting at {approach_start:.4} s")]
    WindowOverlap { release_end: f64, approach_start: f64 },
    #[error("infeasible cycle: {0}")]
    InfeasibleSpec(String),
}

/// Optimized cycle together with its solver report.
#[derive(Debug, Clone)]
pub struct PlannedCycle {
    pub trajectory: JerkTrajectory,
    pub report: SolveReport,
}

/// Assembles and solves one cycle. The trajectory starts at `spec.t0`.
pub fn plan_cycle(
    spec: &CycleSpec,
    warm_start: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<PlannedCycle, OptimError> {
    let problem = assemble_cycle(spec)?;
    let (z, report) = solve(&problem, warm_start, options)?;
    Ok(PlannedCycle { trajectory: trajectory_from(&problem, &z), report })
}

pub fn trajectory_from(problem: &CycleProblem, z: &[f64]) -> JerkTrajectory {
    let mut tr = JerkTrajectory::new(problem.t0, problem.dt, problem.initial, vec![Vec3::zeros(); problem.n_steps]);
    tr.set_flat_jerks(z);
    tr
}

#[derive(Serialize)]
struct TrajectoryRecord {
    t: f64,
    p: [f64; 3],
    v: [f64; 3],
    a: [f64; 3],
    j: [f64; 3],
    n_hat: [f64; 3],
}

/// One JSON object per grid point with position, derivatives and hand normal.
pub fn trajectory_jsonl(traj: &JerkTrajectory, normals: &HandNormalSchedule) -> String {
    let arr = |v: Vec3| [v.x, v.y, v.z];
    let mut out = String::new();
    for (k, s) in traj.step_states().into_iter().enumerate() {
        let tau = k as f64 * traj.dt;
        let j = traj.jerks.get(k).or(traj.jerks.last()).copied().unwrap_or_else(Vec3::zeros);
        let rec = TrajectoryRecord {
            t: traj.t0 + tau,
            p: arr(s.position),
            v: arr(s.velocity),
            a: arr(s.acceleration),
            j: arr(j),
            n_hat: arr(normals.at(tau)),
        };
        out.push_str(&serde_json::to_string(&rec).expect("plain numbers serialize"));
        out.push('\n');
    }
    out
}
