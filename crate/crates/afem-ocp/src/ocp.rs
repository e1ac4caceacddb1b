//! Discrete optimal control solver on a fixed mesh.
//!
//! The control is never given its own finite element basis: it is represented
//! pointwise through the discrete adjoint by the projection formula
//! `u_h(x) = clamp(-p_h(x)/alpha, a, b)`. The coupled optimality system
//!
//! ```text
//! a(y_h, v) = (f + u_h, v)          state
//! a(w, p_h) = (y_h - y_d, w)        adjoint
//! (alpha u_h + p_h, v - u_h) >= 0   for all admissible v
//! ```
//!
//! is solved by a damped fixed-point iteration on the control with automatic
//! step halving whenever the reduced objective would increase.

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{
    assemble_load_elementwise, assemble_stiffness, basis_gradients, evaluate_vertex_field,
    integrate, Coefficients, P1Space, QuadratureRule,
};
use crate::linalg::{cg_solve_from, LinalgError, SparseMatrix};
use crate::mesh::Mesh;

pub type ScalarField = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GradientField = Box<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// Closed-form solutions for error reporting, when known.
pub struct ExactSolution {
    pub y: ScalarField,
    pub grad_y: GradientField,
    pub p: ScalarField,
    pub grad_p: GradientField,
    pub u: ScalarField,
}

/// Data of the tracking-type control problem
/// `min 1/2 ||y - y_d||^2 + alpha/2 ||u||^2` subject to `L y = f + u`,
/// `y = 0` on the boundary and `a <= u <= b`.
pub struct OcpProblem {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub y_d: ScalarField,
    pub f_extra: Option<ScalarField>,
    pub coeff: Coefficients,
    pub exact: Option<ExactSolution>,
}

impl OcpProblem {
    pub fn control_rule(&self) -> ControlRule {
        ControlRule { alpha: self.alpha, lower: self.lower, upper: self.upper }
    }
}

/// Orthogonal projection of `-p/alpha` onto the admissible interval.
pub fn project_control(p_value: f64, alpha: f64, lower: f64, upper: f64) -> f64 {
    (-p_value / alpha).clamp(lower, upper)
}

/// The pointwise control law induced by an adjoint value.
#[derive(Debug, Clone, Copy)]
pub struct ControlRule {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ControlRule {
    pub fn eval(&self, p_value: f64) -> f64 {
        project_control(p_value, self.alpha, self.lower, self.upper)
    }
}

/// Options of the outer fixed-point iteration and the inner CG solves.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Outer stop: `||u_{m+1} - u_m|| <= tol * max(1, ||u_m||)`.
    pub tol: f64,
    pub max_outer: usize,
    /// Initial damping factor in (0, 1]; halved when the objective increases.
    pub damping: f64,
    pub lin_tol: f64,
    pub lin_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_outer: 200, damping: 1.0, lin_tol: 1e-10, lin_max_iter: 50_000 }
    }
}

#[derive(Debug, Error)]
pub enum OcpError {
    #[error("outer iteration did not converge in {iterations} steps (last step size {last_delta:.3e})")]
    OuterNonConvergence { iterations: usize, last_delta: f64, history: Vec<f64> },
    #[error("{context} CG solve failed: {iterations} iterations, relative residual {rel_residual:.3e}")]
    LinearSolve { context: &'static str, iterations: usize, rel_residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Scalar field sampled at the quadrature points of every element.
/// This is how control iterates are stored: the projected control has kinks
/// inside elements and is not a P1 function.
#[derive(Debug, Clone)]
pub struct QpField {
    pub values: Vec<f64>,
    pub stride: usize,
}

impl QpField {
    pub fn from_fn(
        mesh: &Mesh,
        rule: &QuadratureRule,
        g: impl Fn(usize, &[f64; 3], f64, f64) -> f64 + Sync,
    ) -> QpField {
        let stride = rule.points.len();
        let values: Vec<f64> = (0..mesh.n_elements())
            .into_par_iter()
            .flat_map_iter(|t| {
                let mut row = Vec::with_capacity(stride);
                for bary in &rule.points {
                    let [x, y] = crate::fem::physical_point(mesh, t, bary);
                    row.push(g(t, bary, x, y));
                }
                row
            })
            .collect();
        QpField { values, stride }
    }

    pub fn constant(mesh: &Mesh, rule: &QuadratureRule, value: f64) -> QpField {
        QpField { values: vec![value; mesh.n_elements() * rule.points.len()], stride: rule.points.len() }
    }

    pub fn at(&self, t: usize, q: usize) -> f64 {
        self.values[t * self.stride + q]
    }

    /// `(1 - omega) * self + omega * other`.
    pub fn mix(&self, other: &QpField, omega: f64) -> QpField {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - omega) * a + omega * b)
            .collect();
        QpField { values, stride: self.stride }
    }

    pub fn axpy(&self, eps: f64, dir: &QpField) -> QpField {
        let values = self.values.iter().zip(&dir.values).map(|(a, d)| a + eps * d).collect();
        QpField { values, stride: self.stride }
    }
}

/// `sqrt(∫ (a - b)^2)` for two fields sampled on the same rule.
pub fn qp_l2_distance(mesh: &Mesh, rule: &QuadratureRule, a: &QpField, b: &QpField) -> f64 {
    qp_weighted_sum(mesh, rule, |t, q| (a.at(t, q) - b.at(t, q)).powi(2)).max(0.0).sqrt()
}

pub fn qp_l2_norm(mesh: &Mesh, rule: &QuadratureRule, a: &QpField) -> f64 {
    qp_weighted_sum(mesh, rule, |t, q| a.at(t, q).powi(2)).max(0.0).sqrt()
}

/// `∫ a * b` for two fields sampled on the same rule.
pub fn qp_inner_product(mesh: &Mesh, rule: &QuadratureRule, a: &QpField, b: &QpField) -> f64 {
    qp_weighted_sum(mesh, rule, |t, q| a.at(t, q) * b.at(t, q))
}

fn qp_weighted_sum(mesh: &Mesh, rule: &QuadratureRule, g: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
    let per_element: Vec<f64> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let (_, area) = basis_gradients(mesh, t);
            rule.weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * area * g(t, q))
                .sum::<f64>()
        })
        .collect();
    per_element.iter().sum()
}

/// Sample `clamp(-p/alpha)` at the quadrature points.
pub fn compose_control(
    mesh: &Mesh,
    rule: &QuadratureRule,
    p_vertex: &[f64],
    ctrl: ControlRule,
) -> QpField {
    QpField::from_fn(mesh, rule, |t, bary, _, _| {
        let (p, _) = evaluate_vertex_field(mesh, p_vertex, t, bary);
        ctrl.eval(p)
    })
}

/// Solution of the discrete problem. The control is not stored as a
/// coefficient vector: evaluate it through [`OcpSolution::control_at`] or
/// [`OcpSolution::control_field`], which apply the projection formula to the
/// returned adjoint.
pub struct OcpSolution {
    /// State DOF vector.
    pub y_h: Vec<f64>,
    /// Adjoint DOF vector.
    pub p_h: Vec<f64>,
    /// State values per vertex (zero on the boundary).
    pub y_vertex: Vec<f64>,
    /// Adjoint values per vertex.
    pub p_vertex: Vec<f64>,
    pub control: ControlRule,
    /// `||clamp(-p_h/alpha) - u_final||` after convergence.
    pub kkt_residual: f64,
    pub outer_iterations: usize,
    /// Reduced objective along accepted outer iterations.
    pub j_history: Vec<f64>,
    /// Final damping factor in effect.
    pub omega: f64,
}

impl OcpSolution {
    pub fn control_at(&self, mesh: &Mesh, t: usize, bary: &[f64; 3]) -> f64 {
        let (p, _) = evaluate_vertex_field(mesh, &self.p_vertex, t, bary);
        self.control.eval(p)
    }

    pub fn control_field(&self, mesh: &Mesh, rule: &QuadratureRule) -> QpField {
        compose_control(mesh, rule, &self.p_vertex, self.control)
    }

    pub fn j_value(&self) -> f64 {
        *self.j_history.last().unwrap_or(&f64::NAN)
    }
}

struct Workspace<'s, 'm> {
    space: &'s P1Space<'m>,
    stiffness: SparseMatrix,
    rule: QuadratureRule,
    f_load: Vec<f64>,
    opts: SolverOptions,
}

impl<'s, 'm> Workspace<'s, 'm> {
    fn new(space: &'s P1Space<'m>, prob: &OcpProblem, opts: SolverOptions) -> Workspace<'s, 'm> {
        let rule = QuadratureRule::degree5();
        let stiffness = assemble_stiffness(space, &prob.coeff);
        let f_load = match &prob.f_extra {
            Some(f) => assemble_load_elementwise(space, |_, _, x, y| f(x, y), &rule),
            None => vec![0.0; space.n_dofs],
        };
        Workspace { space, stiffness, rule, f_load, opts }
    }

    fn solve(&self, rhs: &[f64], x0: &[f64], context: &'static str) -> Result<Vec<f64>, OcpError> {
        let (x, rep) = cg_solve_from(&self.stiffness, rhs, x0, self.opts.lin_tol, self.opts.lin_max_iter)?;
        if !rep.converged {
            return Err(OcpError::LinearSolve {
                context,
                iterations: rep.iterations,
                rel_residual: rep.rel_residual,
            });
        }
        Ok(x)
    }

    /// State solve `a(y, v) = (f + u, v)`.
    fn state(&self, u: &QpField, y0: &[f64]) -> Result<Vec<f64>, OcpError> {
        let mut rhs = self.load_from_qp(u);
        for (r, f) in rhs.iter_mut().zip(&self.f_load) {
            *r += f;
        }
        self.solve(&rhs, y0, "state")
    }

    /// Adjoint solve `a(w, p) = (y - y_d, w)`. The coefficient matrix is
    /// symmetric, so the same operator is reused.
    fn adjoint(&self, y_vertex: &[f64], prob: &OcpProblem, p0: &[f64]) -> Result<Vec<f64>, OcpError> {
        let mesh = self.space.mesh;
        let rhs = assemble_load_elementwise(
            self.space,
            |t, bary, x, y| {
                let (yh, _) = evaluate_vertex_field(mesh, y_vertex, t, bary);
                yh - (prob.y_d)(x, y)
            },
            &self.rule,
        );
        self.solve(&rhs, p0, "adjoint")
    }

    fn load_from_qp(&self, u: &QpField) -> Vec<f64> {
        let mesh = self.space.mesh;
        let stride = u.stride;
        let locals: Vec<[f64; 3]> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|t| {
                let (_, area) = basis_gradients(mesh, t);
                let mut l = [0.0; 3];
                for (q, bary) in self.rule.points.iter().enumerate() {
                    let w = self.rule.weights[q] * area * u.values[t * stride + q];
                    for i in 0..3 {
                        l[i] += w * bary[i];
                    }
                }
                l
            })
            .collect();
        let mut out = vec![0.0; self.space.n_dofs];
        for (t, l) in locals.iter().enumerate() {
            let vs = mesh.elements[t].v;
            for i in 0..3 {
                if let Some(d) = self.space.dof_of_vertex[vs[i]] {
                    out[d] += l[i];
                }
            }
        }
        out
    }

    fn objective(&self, prob: &OcpProblem, y_vertex: &[f64], u: &QpField) -> f64 {
        let mesh = self.space.mesh;
        let misfit = integrate(mesh, &self.rule, |t, bary, x, y| {
            let (yh, _) = evaluate_vertex_field(mesh, y_vertex, t, bary);
            (yh - (prob.y_d)(x, y)).powi(2)
        });
        let control_sq = qp_l2_norm(mesh, &self.rule, u).powi(2);
        0.5 * misfit + 0.5 * prob.alpha * control_sq
    }
}

/// Solve the discrete control problem on a fixed mesh, starting from a zero
/// adjoint guess.
pub fn solve_ocp(space: &P1Space, prob: &OcpProblem, opts: SolverOptions) -> Result<OcpSolution, OcpError> {
    solve_ocp_warm(space, prob, opts, None)
}

/// As [`solve_ocp`], optionally seeded with per-vertex adjoint values taken
/// from a previous (coarser) mesh.
pub fn solve_ocp_warm(
    space: &P1Space,
    prob: &OcpProblem,
    opts: SolverOptions,
    warm_p_vertex: Option<&[f64]>,
) -> Result<OcpSolution, OcpError> {
    let mesh = space.mesh;
    let ws = Workspace::new(space, prob, opts);
    let ctrl = prob.control_rule();

    let mut p_dofs = match warm_p_vertex {
        Some(pv) => space.restrict_to_dofs(pv),
        None => vec![0.0; space.n_dofs],
    };
    let p_vertex0 = space.scatter_to_vertices(&p_dofs);
    let mut u = compose_control(mesh, &ws.rule, &p_vertex0, ctrl);

    let mut y_dofs = ws.state(&u, &vec![0.0; space.n_dofs])?;
    let mut y_vertex = space.scatter_to_vertices(&y_dofs);
    let mut j = ws.objective(prob, &y_vertex, &u);
    let mut j_history = vec![j];

    let mut omega = opts.damping.clamp(1e-6, 1.0);
    let mut history = Vec::new();

    for m in 1..=opts.max_outer {
        p_dofs = ws.adjoint(&y_vertex, prob, &p_dofs)?;
        let p_vertex = space.scatter_to_vertices(&p_dofs);
        let ustar = compose_control(mesh, &ws.rule, &p_vertex, ctrl);

        // Damped update; halve on objective increase.
        let (u_next, y_next_dofs, j_next) = loop {
            let u_cand = u.mix(&ustar, omega);
            let y_cand = ws.state(&u_cand, &y_dofs)?;
            let y_cand_vertex = space.scatter_to_vertices(&y_cand);
            let j_cand = ws.objective(prob, &y_cand_vertex, &u_cand);
            if j_cand <= j * (1.0 + 1e-12) + 1e-300 || omega <= 1e-6 {
                break (u_cand, y_cand, j_cand);
            }
            omega *= 0.5;
        };

        let delta = qp_l2_distance(mesh, &ws.rule, &u_next, &u);
        let u_norm = qp_l2_norm(mesh, &ws.rule, &u);
        u = u_next;
        y_dofs = y_next_dofs;
        y_vertex = space.scatter_to_vertices(&y_dofs);
        j = j_next;
        j_history.push(j);
        history.push(delta);

        if delta <= opts.tol * u_norm.max(1.0) {
            let p_final = ws.adjoint(&y_vertex, prob, &p_dofs)?;
            let p_final_vertex = space.scatter_to_vertices(&p_final);
            let composed = compose_control(mesh, &ws.rule, &p_final_vertex, ctrl);
            let kkt_residual = qp_l2_distance(mesh, &ws.rule, &composed, &u);
            return Ok(OcpSolution {
                y_h: y_dofs,
                p_h: p_final,
                y_vertex,
                p_vertex: p_final_vertex,
                control: ctrl,
                kkt_residual,
                outer_iterations: m,
                j_history,
                omega,
            });
        }
    }

    Err(OcpError::OuterNonConvergence {
        iterations: opts.max_outer,
        last_delta: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Reduced objective `J(S_h u, u)` for an arbitrary admissible control given
/// at quadrature points; realized by one state solve.
pub fn reduced_functional(
    space: &P1Space,
    prob: &OcpProblem,
    u: &QpField,
    opts: SolverOptions,
) -> Result<f64, OcpError> {
    let ws = Workspace::new(space, prob, opts);
    let y = ws.state(u, &vec![0.0; space.n_dofs])?;
    let y_vertex = space.scatter_to_vertices(&y);
    Ok(ws.objective(prob, &y_vertex, u))
}

/// Minimum over quadrature points and bound choices `v ∈ {a, b}` of the
/// pointwise variational inequality integrand `(alpha u + p)(v - u)`.
/// Nonnegative up to roundoff when the control is the projected adjoint.
pub fn vi_residual_min(mesh: &Mesh, prob: &OcpProblem, sol: &OcpSolution, rule: &QuadratureRule) -> f64 {
    let per_element: Vec<f64> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let mut min = f64::INFINITY;
            for bary in &rule.points {
                let (p, _) = evaluate_vertex_field(mesh, &sol.p_vertex, t, bary);
                let u = sol.control.eval(p);
                let r = prob.alpha * u + p;
                min = min.min(r * (prob.lower - u)).min(r * (prob.upper - u));
            }
            min
        })
        .collect();
    per_element.into_iter().fold(f64::INFINITY, f64::min)
}

/// Compare the reduced gradient `alpha u + p` with central finite differences
/// of the reduced objective along `n_dirs` random directions. Returns the
/// largest relative error. The reduced objective is quadratic, so the central
/// difference carries no truncation term and `eps` only balances roundoff.
pub fn reduced_gradient_fd_check(
    space: &P1Space,
    prob: &OcpProblem,
    sol: &OcpSolution,
    opts: SolverOptions,
    n_dirs: usize,
    eps: f64,
    seed: u64,
) -> Result<f64, OcpError> {
    use rand::prelude::*;
    let mesh = space.mesh;
    let rule = QuadratureRule::degree5();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let u = sol.control_field(mesh, &rule);
    let tight = SolverOptions { lin_tol: opts.lin_tol.min(1e-11), ..opts };

    let mut worst: f64 = 0.0;
    for _ in 0..n_dirs {
        let dir = QpField {
            values: (0..u.values.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            stride: u.stride,
        };
        let j_plus = reduced_functional(space, prob, &u.axpy(eps, &dir), tight)?;
        let j_minus = reduced_functional(space, prob, &u.axpy(-eps, &dir), tight)?;
        let fd = (j_plus - j_minus) / (2.0 * eps);

        let gradient = QpField::from_fn(mesh, &rule, |t, bary, _, _| {
            let (p, _) = evaluate_vertex_field(mesh, &sol.p_vertex, t, bary);
            prob.alpha * sol.control.eval(p) + p
        });
        let ip = qp_inner_product(mesh, &rule, &gradient, &dir);
        let rel = (fd - ip).abs() / fd.abs().max(ip.abs()).max(1e-14);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DomainSpec;

    fn refined_square2(levels: usize) -> Mesh {
        let mut m = Mesh::initial(DomainSpec::Square2);
        for _ in 0..levels {
            let all: Vec<usize> = (0..m.n_elements()).collect();
            m = m.refine(&all, 1).0;
        }
        m
    }

    fn unconstrained_problem() -> OcpProblem {
        OcpProblem {
            alpha: 1.0,
            lower: -1e6,
            upper: 1e6,
            y_d: Box::new(|x, y| (x + 0.3) * (y - 0.2)),
            f_extra: None,
            coeff: Coefficients::laplace(),
            exact: None,
        }
    }

    #[test]
    fn projection_formula_examples() {
        assert!((project_control(-0.05, 0.1, -0.3, 1.0) - 0.5).abs() < 1e-15);
        // Large positive adjoint clamps at the lower bound.
        assert_eq!(project_control(50.0, 0.1, -0.3, 1.0), -0.3);
        // p = -alpha*b lands exactly on the upper bound.
        assert_eq!(project_control(-0.1 * 1.0, 0.1, -0.3, 1.0), 1.0);
    }

    #[test]
    fn zero_data_has_zero_solution() {
        let mesh = refined_square2(2);
        let space = P1Space::new(&mesh);
        let prob = OcpProblem {
            alpha: 0.5,
            lower: -1.0,
            upper: 1.0,
            y_d: Box::new(|_, _| 0.0),
            f_extra: None,
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let sol = solve_ocp(&space, &prob, SolverOptions::default()).unwrap();
        assert!(sol.y_h.iter().all(|&v| v.abs() < 1e-12));
        assert!(sol.p_h.iter().all(|&v| v.abs() < 1e-12));
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn inactive_bounds_match_monolithic_kkt_oracle() {
        let mesh = refined_square2(3);
        let space = P1Space::new(&mesh);
        let n = space.n_dofs;
        assert!(n > 10);
        let prob = unconstrained_problem();
        let opts = SolverOptions { lin_tol: 1e-13, ..Default::default() };
        let sol = solve_ocp(&space, &prob, opts).unwrap();

        // Dense 2n x 2n saddle system: [A, M/alpha; -M, A] [y; p] = [0; -b_yd]
        // with exact mass and the same degree-5 load for y_d.
        let a = assemble_stiffness(&space, &prob.coeff);
        let mass = assemble_stiffness(&space, &Coefficients { a: [[0.0; 2]; 2], c: 1.0 });
        let rule = QuadratureRule::degree5();
        let b_yd = assemble_load_elementwise(&space, |_, _, x, y| (prob.y_d)(x, y), &rule);

        let mut dense = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                dense[(i, j)] = a.get(i, j);
                dense[(i, n + j)] = mass.get(i, j) / prob.alpha;
                dense[(n + i, j)] = -mass.get(i, j);
                dense[(n + i, n + j)] = a.get(i, j);
            }
        }
        let mut rhs = nalgebra::DVector::<f64>::zeros(2 * n);
        for i in 0..n {
            rhs[n + i] = -b_yd[i];
        }
        let z = dense.lu().solve(&rhs).expect("monolithic KKT solve");
        for i in 0..n {
            assert!((sol.y_h[i] - z[i]).abs() < 1e-8, "y mismatch at {i}");
            assert!((sol.p_h[i] - z[n + i]).abs() < 1e-8, "p mismatch at {i}");
        }
    }

    #[test]
    fn objective_history_is_non_increasing() {
        let mesh = refined_square2(3);
        let space = P1Space::new(&mesh);
        let prob = OcpProblem {
            alpha: 1e-2,
            lower: -2.0,
            upper: 2.0,
            y_d: Box::new(|x, y| if x > 0.0 { 1.0 } else { -1.0 } * (1.0 + y)),
            f_extra: None,
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let opts = SolverOptions { damping: 0.5, max_outer: 500, tol: 1e-9, ..Default::default() };
        let sol = solve_ocp(&space, &prob, opts).unwrap();
        for w in sol.j_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "objective increased: {:?}", sol.j_history);
        }
        assert!(vi_residual_min(&mesh, &prob, &sol, &QuadratureRule::degree5()) >= -1e-10);
    }

    #[test]
    fn reduced_functional_trivial_values() {
        let mesh = Mesh::initial(DomainSpec::UnitSquare);
        let mesh = mesh.refine(&[0, 1], 1).0;
        let space = P1Space::new(&mesh);
        let rule = QuadratureRule::degree5();
        let zero = QpField::constant(&mesh, &rule, 0.0);

        let prob0 = OcpProblem {
            alpha: 1.0,
            lower: -1.0,
            upper: 1.0,
            y_d: Box::new(|_, _| 0.0),
            f_extra: None,
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let j0 = reduced_functional(&space, &prob0, &zero, SolverOptions::default()).unwrap();
        assert!(j0.abs() < 1e-14);

        let prob1 = OcpProblem { y_d: Box::new(|_, _| 1.0), ..prob0 };
        let j1 = reduced_functional(&space, &prob1, &zero, SolverOptions::default()).unwrap();
        assert!((j1 - 0.5).abs() < 1e-12, "J = {j1}");
    }

    #[test]
    fn reduced_gradient_matches_central_differences() {
        let mesh = refined_square2(2);
        let space = P1Space::new(&mesh);
        let prob = OcpProblem {
            alpha: 0.2,
            lower: -0.4,
            upper: 0.4,
            y_d: Box::new(|x, y| x * x - y),
            f_extra: None,
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let opts = SolverOptions { lin_tol: 1e-13, ..Default::default() };
        let sol = solve_ocp(&space, &prob, opts).unwrap();
        // eps = 1e-5 with matching O(eps)-level tolerance.
        let worst = reduced_gradient_fd_check(&space, &prob, &sol, opts, 3, 1e-5, 42).unwrap();
        assert!(worst <= 1e-4, "relative gradient error {worst}");
    }

    #[test]
    fn non_convergence_is_reported_as_error() {
        let mesh = refined_square2(2);
        let space = P1Space::new(&mesh);
        // alpha small enough that two undamped iterations cannot converge.
        let prob = OcpProblem {
            alpha: 1e-4,
            lower: -50.0,
            upper: 50.0,
            y_d: Box::new(|_, _| 5.0),
            f_extra: None,
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let opts = SolverOptions { max_outer: 2, tol: 1e-12, ..Default::default() };
        match solve_ocp(&space, &prob, opts) {
            Err(OcpError::OuterNonConvergence { iterations, history, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 2);
            }
            other => panic!("expected non-convergence, got {:?}", other.is_ok()),
        }
    }
}
