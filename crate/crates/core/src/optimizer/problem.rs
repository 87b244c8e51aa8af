//! Assembly of one cycle into a quadratic program with nonlinear inequalities.
//!
//! Decision vector: flat jerks `z = [j0x, j0y, j0z, j1x, ...]`. Every constrained
//! quantity is an affine 3-vector of `z`, so equalities become rows of `A z = b`
//! and each inequality keeps its affine map plus a scalar kind.

use nalgebra::{DMatrix, DVector, Matrix3};

use super::cycle::{ConstraintId, CycleEnd, CycleSpec};
use super::OptimError;
use crate::trajectory::{initial_contribution, jerk_coefficients, Derivative, KinematicState, Vec3};

// Norm floor for the non-smooth inequality forms.
const NORM_FLOOR: f64 = 1e-9;

/// `u(z) = base + sum_k row[k] * j_k`, the same row on each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap3 {
    pub base: Vec3,
    pub row: Vec<f64>,
}

impl AffineMap3 {
    pub fn new(derivative: Derivative, initial: &KinematicState, tau: f64, dt: f64, n: usize) -> Self {
        Self { base: initial_contribution(derivative, initial, tau), row: jerk_coefficients(derivative, tau, dt, n) }
    }

    pub fn eval(&self, z: &[f64]) -> Vec3 {
        let mut u = self.base;
        for (k, c) in self.row.iter().enumerate() {
            if *c != 0.0 {
                u += Vec3::new(z[3 * k], z[3 * k + 1], z[3 * k + 2]) * *c;
            }
        }
        u
    }

    pub fn shifted(mut self, offset: Vec3) -> Self {
        self.base += offset;
        self
    }

    pub fn negated(mut self) -> Self {
        self.base = -self.base;
        self.row.iter_mut().for_each(|c| *c = -*c);
        self
    }

    /// Dense `3 x 3n` Jacobian `du/dz`.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let n = self.row.len();
        let mut j = DMatrix::zeros(3, 3 * n);
        for (k, c) in self.row.iter().enumerate() {
            for a in 0..3 {
                j[(a, 3 * k + a)] = *c;
            }
        }
        j
    }
}

/// Scalar inequality `g(u) <= 0` on an affine 3-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InequalityKind {
    /// `bound - |u|`.
    MinDistance { bound: f64 },
    /// `u_z - bound`.
    MaxVertical { bound: f64 },
    /// `|u_xy| - bound`.
    MaxPlanar { bound: f64 },
    /// `direction . u - bound`.
    MaxAlong { direction: Vec3, bound: f64 },
    /// `n . u + sin(alpha) |u| + margin`, with `u` the net non-gravity acceleration negated.
    RollOut { normal: Vec3, sin_alpha: f64, margin: f64 },
}

impl InequalityKind {
    pub fn value(&self, u: &Vec3) -> f64 {
        match *self {
            InequalityKind::MinDistance { bound } => bound - u.norm(),
            InequalityKind::MaxVertical { bound } => u.z - bound,
            InequalityKind::MaxPlanar { bound } => u.xy().norm() - bound,
            InequalityKind::MaxAlong { direction, bound } => direction.dot(u) - bound,
            InequalityKind::RollOut { normal, sin_alpha, margin } => normal.dot(u) + sin_alpha * u.norm() + margin,
        }
    }

    pub fn gradient(&self, u: &Vec3) -> Vec3 {
        match *self {
            InequalityKind::MinDistance { .. } => -u / u.norm().max(NORM_FLOOR),
            InequalityKind::MaxVertical { .. } => Vec3::z(),
            InequalityKind::MaxAlong { direction, .. } => direction,
            InequalityKind::MaxPlanar { .. } => {
                let r = u.xy().norm().max(NORM_FLOOR);
                Vec3::new(u.x / r, u.y / r, 0.0)
            }
            InequalityKind::RollOut { normal, sin_alpha, .. } => normal + u * (sin_alpha / u.norm().max(NORM_FLOOR)),
        }
    }

    /// Positive semidefinite part of the Hessian in `u` (zero for concave kinds).
    pub fn convex_curvature(&self, u: &Vec3) -> Matrix3<f64> {
        match *self {
            InequalityKind::MinDistance { .. }
            | InequalityKind::MaxVertical { .. }
            | InequalityKind::MaxAlong { .. } => Matrix3::zeros(),
            InequalityKind::MaxPlanar { .. } => {
                let r = u.xy().norm().max(NORM_FLOOR);
                let (x, y) = (u.x / r, u.y / r);
                Matrix3::new(1.0 - x * x, -x * y, 0.0, -x * y, 1.0 - y * y, 0.0, 0.0, 0.0, 0.0) / r
            }
            InequalityKind::RollOut { sin_alpha, .. } => {
                let r = u.norm().max(NORM_FLOOR);
                let h = u / r;
                (Matrix3::identity() - h * h.transpose()) * (sin_alpha / r)
            }
        }
    }

    /// Natural size of the quantity, used to balance penalties.
    pub fn scale(&self) -> f64 {
        match self {
            InequalityKind::RollOut { .. } => 1.0,
            _ => 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub id: ConstraintId,
    pub step: usize,
    pub map: AffineMap3,
    pub kind: InequalityKind,
}

impl Inequality {
    pub fn value(&self, z: &[f64]) -> f64 {
        self.kind.value(&self.map.eval(z))
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let gu = self.kind.gradient(&self.map.eval(z));
        self.map.row.iter().flat_map(|c| [gu.x * c, gu.y * c, gu.z * c]).collect()
    }
}

/// A single cycle as `min 1/2 z'Hz + c'z + f0` s.t. `A z = b`, `g_i(z) <= 0`.
#[derive(Debug, Clone)]
pub struct CycleProblem {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub initial: KinematicState,
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub eq_tags: Vec<(ConstraintId, usize)>,
    pub inequalities: Vec<Inequality>,
}

impl CycleProblem {
    pub fn n_vars(&self) -> usize {
        3 * self.n_steps
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        0.5 * z.dot(&(&self.hessian * &z)) + self.linear.dot(&z) + self.constant
    }

    pub fn objective_gradient(&self, z: &[f64]) -> Vec<f64> {
        let z = DVector::from_column_slice(z);
        (&self.hessian * &z + &self.linear).as_slice().to_vec()
    }

    pub fn equality_residual(&self, z: &[f64]) -> DVector<f64> {
        &self.eq_matrix * DVector::from_column_slice(z) - &self.eq_rhs
    }

    pub fn inequality_values(&self, z: &[f64]) -> Vec<f64> {
        self.inequalities.iter().map(|c| c.value(z)).collect()
    }
}

/// Two unit vectors spanning the plane orthogonal to `n`.
pub fn tangent_basis(n: &Vec3) -> [Vec3; 2] {
    let n = n.normalize();
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = n.cross(&helper).normalize();
    [e1, n.cross(&e1)]
}

struct EqualityRows {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    tags: Vec<(ConstraintId, usize)>,
}

impl EqualityRows {
    /// Adds `dir . u(z) = target`.
    fn push(&mut self, id: ConstraintId, step: usize, map: &AffineMap3, dir: Vec3, target: f64) {
        let row = map.row.iter().flat_map(|c| [c * dir.x, c * dir.y, c * dir.z]).collect();
        self.rows.push(row);
        self.rhs.push(target - dir.dot(&map.base));
        self.tags.push((id, step));
    }

    fn push_vector(&mut self, id: ConstraintId, step: usize, map: &AffineMap3, target: Vec3) {
        for (a, axis) in [Vec3::x(), Vec3::y(), Vec3::z()].into_iter().enumerate() {
            self.push(id, step, map, axis, target[a]);
        }
    }
}

/// Builds the quadratic program for a cycle.
pub fn assemble_cycle(spec: &CycleSpec) -> Result<CycleProblem, OptimError> {
    let n = spec.n_steps;
    let dt = spec.dt();
    let init = &spec.start;
    let g = spec.gravity;
    let map = |d: Derivative, tau: f64| AffineMap3::new(d, init, tau, dt, n);

    // sum_{k=1..n} |a_k|^2 dt, a_k = a0 + dt * sum_{m<k} j_m
    let mut hessian = DMatrix::zeros(3 * n, 3 * n);
    let mut linear = DVector::zeros(3 * n);
    let dt3 = dt * dt * dt;
    for m in 0..n {
        for l in 0..n {
            let v = 2.0 * dt3 * (n - m.max(l)) as f64;
            for a in 0..3 {
                hessian[(3 * m + a, 3 * l + a)] = v;
            }
        }
        for a in 0..3 {
            linear[3 * m + a] = 2.0 * dt * dt * init.acceleration[a] * (n - m) as f64;
        }
    }
    let constant = dt * n as f64 * init.acceleration.norm_squared();

    let mut eq = EqualityRows { rows: Vec::new(), rhs: Vec::new(), tags: Vec::new() };
    if let Some(ball) = spec.incoming_ball() {
        eq.push_vector(
            ConstraintId::CatchPosition,
            0,
            &map(Derivative::Position, ball.touchdown_time),
            ball.touchdown_position,
        );
    }
    let t_end = spec.duration;
    match spec.end {
        CycleEnd::Throw { position, velocity } => {
            eq.push_vector(ConstraintId::ThrowPosition, n, &map(Derivative::Position, t_end), position);
            eq.push_vector(ConstraintId::ThrowVelocity, n, &map(Derivative::Velocity, t_end), velocity);
            eq.push_vector(ConstraintId::ThrowAcceleration, n, &map(Derivative::Acceleration, t_end), g);
        }
        CycleEnd::Rest { position } => {
            eq.push_vector(ConstraintId::ThrowPosition, n, &map(Derivative::Position, t_end), position);
            eq.push_vector(ConstraintId::ThrowVelocity, n, &map(Derivative::Velocity, t_end), Vec3::zeros());
            eq.push_vector(ConstraintId::ThrowAcceleration, n, &map(Derivative::Acceleration, t_end), Vec3::zeros());
        }
    }
    for k in spec.active_steps(ConstraintId::PostTakeoff) {
        let tau = spec.step_time(k);
        let acc = map(Derivative::Acceleration, tau);
        for e in tangent_basis(&spec.normals.at(tau)) {
            eq.push(ConstraintId::PostTakeoff, k, &acc, e, e.dot(&g));
        }
    }
    if let Some(ball) = spec.incoming_ball() {
        for k in spec.active_steps(ConstraintId::PreTouchdown) {
            let tau = spec.step_time(k);
            let vel = map(Derivative::Velocity, tau);
            if spec.exact_pre_touchdown {
                let (_, vb) = ball.state_at(tau, &g);
                for e in tangent_basis(&spec.normals.at(tau)) {
                    eq.push(ConstraintId::PreTouchdown, k, &vel, e, e.dot(&vb));
                }
            } else {
                for e in tangent_basis(&ball.touchdown_velocity) {
                    eq.push(ConstraintId::PreTouchdown, k, &vel, e, 0.0);
                }
            }
        }
    }

    let m = eq.rows.len();
    if m >= 3 * n {
        return Err(OptimError::InfeasibleSpec(format!("{m} equalities for {} variables", 3 * n)));
    }
    let eq_matrix = DMatrix::from_fn(m, 3 * n, |i, j| eq.rows[i][j]);
    let eq_rhs = DVector::from_vec(eq.rhs);

    let mut inequalities = Vec::new();
    let eps = spec.margin;
    if let Some(ball) = spec.incoming_ball() {
        for k in spec.active_steps(ConstraintId::PrematureContact) {
            let tau = spec.step_time(k);
            let (pb, _) = ball.state_at(tau, &g);
            let kind = InequalityKind::MinDistance { bound: spec.windows.premature.at(tau) + eps };
            let rel = map(Derivative::Position, tau).shifted(-pb);
            if spec.premature_probe_depth > 0.0 {
                let probe = rel.clone().shifted(-spec.normals.at(tau) * spec.premature_probe_depth);
                inequalities.push(Inequality { id: ConstraintId::PrematureContact, step: k, map: probe, kind });
            }
            inequalities.push(Inequality { id: ConstraintId::PrematureContact, step: k, map: rel, kind });
        }
        for k in spec.active_steps(ConstraintId::CatchClosure) {
            let tau = spec.step_time(k);
            let (_, vb) = ball.state_at(tau, &g);
            inequalities.push(Inequality {
                id: ConstraintId::CatchClosure,
                step: k,
                map: map(Derivative::Velocity, tau).shifted(-vb),
                kind: InequalityKind::MaxAlong {
                    direction: -spec.normals.at(tau),
                    bound: -spec.catch_closing_speed - eps,
                },
            });
        }
        for k in spec.active_steps(ConstraintId::VerticalDisplacement) {
            let tau = spec.step_time(k);
            let (pb, _) = ball.state_at(tau, &g);
            let rel = map(Derivative::Position, tau).shifted(-pb);
            inequalities.push(Inequality {
                id: ConstraintId::VerticalDisplacement,
                step: k,
                map: rel.clone(),
                kind: InequalityKind::MaxVertical { bound: spec.windows.vertical.at(tau) - eps },
            });
            inequalities.push(Inequality {
                id: ConstraintId::HorizontalDisplacement,
                step: k,
                map: rel,
                kind: InequalityKind::MaxPlanar { bound: spec.windows.horizontal.at(tau) - eps },
            });
        }
    }
    if let Some(v0) = spec.released {
        for k in spec.active_steps(ConstraintId::ReleaseClearance) {
            let tau = spec.step_time(k);
            let pb = spec.start.position + v0 * tau + g * (0.5 * tau * tau);
            inequalities.push(Inequality {
                id: ConstraintId::ReleaseClearance,
                step: k,
                map: map(Derivative::Position, tau).shifted(-pb),
                kind: InequalityKind::MaxAlong {
                    direction: spec.normals.at(tau),
                    bound: -spec.release_clearance - eps,
                },
            });
        }
    }
    let sin_alpha = spec.slope_angle.sin();
    for k in spec.active_steps(ConstraintId::RollOut) {
        let tau = spec.step_time(k);
        inequalities.push(Inequality {
            id: ConstraintId::RollOut,
            step: k,
            map: map(Derivative::Acceleration, tau).negated().shifted(g),
            kind: InequalityKind::RollOut { normal: spec.normals.at(tau), sin_alpha, margin: eps },
        });
    }

    Ok(CycleProblem {
        t0: spec.t0,
        dt,
        n_steps: n,
        initial: *init,
        hessian,
        linear,
        constant,
        eq_matrix,
        eq_rhs,
        eq_tags: eq.tags,
        inequalities,
    })
}
