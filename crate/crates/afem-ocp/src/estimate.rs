//! Residual a posteriori error indicators for the state and adjoint
//! approximations, data oscillation, and Dörfler marking.
//!
//! For P1 elements with constant diffusion the elementwise operator part of
//! the residual vanishes, so the element residuals reduce to
//! `r_y = f + u_h - c y_h` and `r_p = y_h - y_d - c p_h`, with the flux jumps
//! `[A grad y_h] . n` across interior edges carrying the gradient error.

use rayon::prelude::*;

use crate::fem::{evaluate_vertex_field, P1Space, QuadratureRule};
use crate::ocp::{OcpProblem, OcpSolution};

/// Per-element squared indicators and oscillations.
#[derive(Debug, Clone)]
pub struct Indicators {
    pub eta_y_sq: Vec<f64>,
    pub eta_p_sq: Vec<f64>,
    /// Elementwise sum `eta_y_sq + eta_p_sq`; the marking quantity.
    pub eta_sq: Vec<f64>,
    pub osc_y_sq: Vec<f64>,
    pub osc_p_sq: Vec<f64>,
}

impl Indicators {
    pub fn eta_y_total(&self) -> f64 {
        self.eta_y_sq.iter().sum::<f64>().max(0.0).sqrt()
    }

    pub fn eta_p_total(&self) -> f64 {
        self.eta_p_sq.iter().sum::<f64>().max(0.0).sqrt()
    }

    pub fn eta_total(&self) -> f64 {
        self.eta_sq.iter().sum::<f64>().max(0.0).sqrt()
    }

    pub fn osc_total(&self) -> f64 {
        (self.osc_y_sq.iter().sum::<f64>() + self.osc_p_sq.iter().sum::<f64>()).max(0.0).sqrt()
    }

    /// Largest elementwise ratio `osc^2 / eta^2`; at most one when the
    /// indicator dominates oscillation everywhere.
    pub fn oscillation_dominated(&self) -> bool {
        self.eta_sq
            .iter()
            .zip(self.osc_y_sq.iter().zip(&self.osc_p_sq))
            .all(|(&eta, (&oy, &op))| oy + op <= eta)
    }
}

/// Two-point Gauss positions along an edge, exact for the constant jumps of
/// P1 fields but written out so higher-order fluxes would still integrate.
const EDGE_GAUSS: [f64; 2] = [0.2113248654051871, 0.7886751345948129];

struct ElementResiduals {
    res_y_sq: f64, // |T| * mean of r_y^2
    res_p_sq: f64,
    var_y: f64, // |T| * variance of r_y, floored at zero
    var_p: f64,
}

fn residual_moments(
    space: &P1Space,
    prob: &OcpProblem,
    sol: &OcpSolution,
    rule: &QuadratureRule,
    t: usize,
) -> ElementResiduals {
    let mesh = space.mesh;
    let (_, area) = crate::fem::basis_gradients(mesh, t);
    let c = prob.coeff.c;
    let mut mean_y = 0.0;
    let mut mean_sq_y = 0.0;
    let mut mean_p = 0.0;
    let mut mean_sq_p = 0.0;
    for (q, bary) in rule.points.iter().enumerate() {
        let w = rule.weights[q];
        let [x, y] = crate::fem::physical_point(mesh, t, bary);
        let (yh, _) = evaluate_vertex_field(mesh, &sol.y_vertex, t, bary);
        let (ph, _) = evaluate_vertex_field(mesh, &sol.p_vertex, t, bary);
        let uh = sol.control.eval(ph);
        let f = prob.f_extra.as_ref().map_or(0.0, |f| f(x, y));
        let r_y = f + uh - c * yh;
        let r_p = yh - (prob.y_d)(x, y) - c * ph;
        mean_y += w * r_y;
        mean_sq_y += w * r_y * r_y;
        mean_p += w * r_p;
        mean_sq_p += w * r_p * r_p;
    }
    // variance = mean of squares minus squared mean; the subtraction keeps
    // the elementwise bound osc^2 <= eta^2 exact in floating point.
    ElementResiduals {
        res_y_sq: area * mean_sq_y,
        res_p_sq: area * mean_sq_p,
        var_y: area * (mean_sq_y - mean_y * mean_y).max(0.0),
        var_p: area * (mean_sq_p - mean_p * mean_p).max(0.0),
    }
}

/// Local error indicators
/// `eta^2(T) = h_T^2 ||r_T||^2 + sum over interior edges of h_E ||j_E||^2`
/// for the state and adjoint equations, plus the matching data oscillations.
pub fn compute_indicators(space: &P1Space, prob: &OcpProblem, sol: &OcpSolution) -> Indicators {
    let mesh = space.mesh;
    let n = mesh.n_elements();
    let rule = QuadratureRule::degree5();
    let centroid = [1.0 / 3.0; 3];

    // Constant per-element gradients of y_h and p_h.
    let grads: Vec<([f64; 2], [f64; 2])> = (0..n)
        .into_par_iter()
        .map(|t| {
            let (_, gy) = evaluate_vertex_field(mesh, &sol.y_vertex, t, &centroid);
            let (_, gp) = evaluate_vertex_field(mesh, &sol.p_vertex, t, &centroid);
            (gy, gp)
        })
        .collect();

    let a = prob.coeff.a;
    let apply = |m: [[f64; 2]; 2], g: [f64; 2]| [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]];
    let a_t = [[a[0][0], a[1][0]], [a[0][1], a[1][1]]];

    let rows: Vec<(f64, f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|t| {
            let g = mesh.element_geometry(t);
            let h_sq = g.h_t * g.h_t;
            let res = residual_moments(space, prob, sol, &rule, t);

            let mut jump_y = 0.0;
            let mut jump_p = 0.0;
            for k in 0..3 {
                let Some(nb) = mesh.neighbor_across(t, k) else { continue };
                let h_e = g.edge_lengths[k];
                let n_k = g.normals[k];
                let fy_own = apply(a, grads[t].0);
                let fy_nb = apply(a, grads[nb].0);
                let fp_own = apply(a_t, grads[t].1);
                let fp_nb = apply(a_t, grads[nb].1);
                let jy = (fy_own[0] - fy_nb[0]) * n_k[0] + (fy_own[1] - fy_nb[1]) * n_k[1];
                let jp = (fp_own[0] - fp_nb[0]) * n_k[0] + (fp_own[1] - fp_nb[1]) * n_k[1];
                // 2-point Gauss along the edge; the integrand is constant here.
                let mut int_y = 0.0;
                let mut int_p = 0.0;
                for _s in EDGE_GAUSS {
                    int_y += 0.5 * h_e * jy * jy;
                    int_p += 0.5 * h_e * jp * jp;
                }
                jump_y += h_e * int_y;
                jump_p += h_e * int_p;
            }

            (
                h_sq * res.res_y_sq + jump_y,
                h_sq * res.res_p_sq + jump_p,
                h_sq * res.var_y,
                h_sq * res.var_p,
            )
        })
        .collect();

    let mut out = Indicators {
        eta_y_sq: Vec::with_capacity(n),
        eta_p_sq: Vec::with_capacity(n),
        eta_sq: Vec::with_capacity(n),
        osc_y_sq: Vec::with_capacity(n),
        osc_p_sq: Vec::with_capacity(n),
    };
    for (ey, ep, oy, op) in rows {
        out.eta_y_sq.push(ey);
        out.eta_p_sq.push(ep);
        out.eta_sq.push(ey + ep);
        out.osc_y_sq.push(oy);
        out.osc_p_sq.push(op);
    }
    out
}

/// Data oscillation `osc^2(g, T) = h_T^2 ||g - mean_T(g)||^2_{0,T}` of the
/// state and adjoint residuals.
pub fn compute_oscillation(space: &P1Space, prob: &OcpProblem, sol: &OcpSolution) -> (Vec<f64>, Vec<f64>) {
    let mesh = space.mesh;
    let rule = QuadratureRule::degree5();
    let rows: Vec<(f64, f64)> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let g = mesh.element_geometry(t);
            let h_sq = g.h_t * g.h_t;
            let res = residual_moments(space, prob, sol, &rule, t);
            (h_sq * res.var_y, h_sq * res.var_p)
        })
        .collect();
    rows.into_iter().unzip()
}

/// Result of Dörfler marking.
#[derive(Debug, Clone)]
pub struct MarkOutcome {
    /// Element indices, ascending.
    pub marked: Vec<usize>,
    /// Set when every indicator was zero: nothing left to resolve.
    pub converged: bool,
}

/// Greedy-minimal bulk marking: the shortest descending-value prefix whose
/// squared indicators sum to at least `theta` times the total. Ties are
/// broken by ascending element index.
pub fn dorfler_mark(eta_sq: &[f64], theta: f64) -> MarkOutcome {
    assert!(theta > 0.0 && theta < 1.0, "marking parameter must lie in (0,1), got {theta}");
    let total: f64 = eta_sq.iter().sum();
    if !(total > 0.0) {
        return MarkOutcome { marked: Vec::new(), converged: true };
    }
    let mut order: Vec<usize> = (0..eta_sq.len()).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    let target = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for &i in &order {
        acc += eta_sq[i];
        marked.push(i);
        if acc >= target {
            break;
        }
    }
    marked.sort_unstable();
    MarkOutcome { marked, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Coefficients;
    use crate::mesh::{DomainSpec, Mesh};
    use crate::ocp::ControlRule;

    fn dummy_solution(space: &P1Space, y_vertex: Vec<f64>, p_vertex: Vec<f64>, ctrl: ControlRule) -> OcpSolution {
        OcpSolution {
            y_h: space.restrict_to_dofs(&y_vertex),
            p_h: space.restrict_to_dofs(&p_vertex),
            y_vertex,
            p_vertex,
            control: ctrl,
            kkt_residual: 0.0,
            outer_iterations: 0,
            j_history: vec![],
            omega: 1.0,
        }
    }

    fn zero_control() -> ControlRule {
        ControlRule { alpha: 1.0, lower: 0.0, upper: 0.0 }
    }

    #[test]
    fn linear_field_has_no_jumps() {
        let mesh = Mesh::initial(DomainSpec::Square2);
        let mesh = mesh.refine(&[0, 2, 4], 1).0;
        let space = P1Space::new(&mesh);
        let lin = |x: f64, y: f64| 1.5 * x - 0.5 * y;
        let y_vertex: Vec<f64> = mesh.vertices.iter().map(|v| lin(v.x, v.y)).collect();
        let p_vertex = vec![0.0; mesh.n_vertices()];
        let sol = dummy_solution(&space, y_vertex, p_vertex, zero_control());
        let prob = OcpProblem {
            alpha: 1.0,
            lower: 0.0,
            upper: 0.0,
            y_d: Box::new(move |x, y| lin(x, y)),
            f_extra: None,
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let ind = compute_indicators(&space, &prob, &sol);
        // r_y = u = 0 and the gradient is globally constant, so eta_y vanishes.
        for &e in &ind.eta_y_sq {
            assert!(e <= 1e-12, "eta_y_sq entry {e}");
        }
        // r_p = y_h - y_d is zero only up to interpolation on element
        // interiors; the jump part of eta_p still vanishes. No assertion.
    }

    #[test]
    fn single_interior_edge_jump_matches_hand_computation() {
        let mesh = Mesh::initial(DomainSpec::UnitSquare);
        let space = P1Space::new(&mesh);
        // y = x - y on element (0,1,2), zero on element (0,2,3):
        // gradient jump across the diagonal is sqrt(2), h_E = sqrt(2),
        // so each element receives h_E^2 * j^2 = 4.
        let y_vertex = vec![0.0, 1.0, 0.0, 0.0];
        let p_vertex = vec![0.0; 4];
        let sol = dummy_solution(&space, y_vertex, p_vertex, zero_control());
        let prob = OcpProblem {
            alpha: 1.0,
            lower: 0.0,
            upper: 0.0,
            y_d: Box::new(|_, _| 0.0),
            f_extra: None,
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let ind = compute_indicators(&space, &prob, &sol);
        assert!((ind.eta_y_sq[0] - 4.0).abs() < 1e-12, "got {}", ind.eta_y_sq[0]);
        assert!((ind.eta_y_sq[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn oscillation_of_constant_residual_vanishes() {
        let mesh = Mesh::initial(DomainSpec::UnitSquare);
        let space = P1Space::new(&mesh);
        let sol = dummy_solution(&space, vec![0.0; 4], vec![0.0; 4], zero_control());
        let prob = OcpProblem {
            alpha: 1.0,
            lower: 0.0,
            upper: 0.0,
            y_d: Box::new(|_, _| 3.25),
            f_extra: Some(Box::new(|_, _| -1.5)),
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let (osc_y, osc_p) = compute_oscillation(&space, &prob, &sol);
        for v in osc_y.iter().chain(&osc_p) {
            assert!(*v <= 1e-14, "oscillation of constant data: {v}");
        }
    }

    #[test]
    fn oscillation_of_linear_residual_matches_analytic_variance() {
        // Reference triangle, r_y = x: osc^2 = h^2 (\int x^2 - |T| xbar^2)
        // with h = sqrt(2), |T| = 1/2, xbar = 1/3 gives 2 * (1/12 - 1/18) = 1/18.
        let vs = vec![
            crate::mesh::Vertex { x: 0.0, y: 0.0, on_boundary: true, boundary_curve_id: None },
            crate::mesh::Vertex { x: 1.0, y: 0.0, on_boundary: true, boundary_curve_id: None },
            crate::mesh::Vertex { x: 0.0, y: 1.0, on_boundary: true, boundary_curve_id: None },
        ];
        let els = vec![crate::mesh::Element { v: [0, 1, 2], refinement_edge: 0, generation: 0 }];
        let mesh = Mesh::from_raw(vs, els).unwrap();
        let space = P1Space::new(&mesh);
        let sol = dummy_solution(&space, vec![0.0; 3], vec![0.0; 3], zero_control());
        let prob = OcpProblem {
            alpha: 1.0,
            lower: 0.0,
            upper: 0.0,
            y_d: Box::new(|_, _| 0.0),
            f_extra: Some(Box::new(|x, _| x)),
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let (osc_y, _) = compute_oscillation(&space, &prob, &sol);
        assert!((osc_y[0] - 1.0 / 18.0).abs() < 1e-14, "got {}", osc_y[0]);
    }

    #[test]
    fn oscillation_never_exceeds_indicator() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mesh = Mesh::initial(DomainSpec::SlitSquare);
        let (mesh, _) = mesh.refine(&[0, 1, 2, 3, 4, 5], 1);
        let space = P1Space::new(&mesh);
        let y_vertex: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p_vertex: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = dummy_solution(&space, y_vertex, p_vertex, ControlRule { alpha: 0.3, lower: -2.0, upper: 2.0 });
        let prob = OcpProblem {
            alpha: 0.3,
            lower: -2.0,
            upper: 2.0,
            y_d: Box::new(|x, y| (3.0 * x).sin() * y),
            f_extra: Some(Box::new(|x, y| x * x - y)),
            coeff: Coefficients::laplace(),
            exact: None,
        };
        let ind = compute_indicators(&space, &prob, &sol);
        assert!(ind.oscillation_dominated());
        for t in 0..mesh.n_elements() {
            assert!(ind.osc_y_sq[t] <= ind.eta_y_sq[t]);
            assert!(ind.osc_p_sq[t] <= ind.eta_p_sq[t]);
        }
    }

    #[test]
    fn dorfler_marks_the_two_largest_of_four() {
        let out = dorfler_mark(&[4.0, 3.0, 2.0, 1.0], 0.5);
        assert_eq!(out.marked, vec![0, 1]);
        assert!(!out.converged);
    }

    #[test]
    fn dorfler_near_one_marks_everything() {
        let out = dorfler_mark(&[4.0, 3.0, 2.0, 1.0], 0.999_999);
        assert_eq!(out.marked, vec![0, 1, 2, 3]);
    }

    #[test]
    fn dorfler_zero_indicators_signal_convergence() {
        let out = dorfler_mark(&[0.0, 0.0, 0.0], 0.4);
        assert!(out.marked.is_empty());
        assert!(out.converged);
    }

    #[test]
    fn dorfler_ties_break_by_ascending_index() {
        let out = dorfler_mark(&[2.0, 2.0, 2.0, 2.0], 0.5);
        assert_eq!(out.marked, vec![0, 1]);
    }

    #[test]
    fn dorfler_greedy_prefix_is_minimal_against_brute_force() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.gen_range(1..=12);
            let eta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0f64)).collect();
            let theta = rng.gen_range(0.05..0.95);
            let total: f64 = eta.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let out = dorfler_mark(&eta, theta);
            let sum: f64 = out.marked.iter().map(|&i| eta[i]).sum();
            assert!(sum >= theta * total, "marked set misses the bulk target");

            // Dropping the smallest marked indicator must violate the target
            // (the greedy prefix is minimal).
            let smallest = out
                .marked
                .iter()
                .copied()
                .min_by(|&a, &b| eta[a].total_cmp(&eta[b]))
                .unwrap();
            if out.marked.len() > 1 {
                let reduced: f64 = sum - eta[smallest];
                assert!(reduced < theta * total);
            }

            // Brute force: no subset with fewer elements reaches the target.
            let mut best = usize::MAX;
            for mask in 0u32..(1 << n) {
                let cnt = mask.count_ones() as usize;
                if cnt >= best {
                    continue;
                }
                let s: f64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| eta[i]).sum();
                if s >= theta * total {
                    best = cnt;
                }
            }
            assert_eq!(out.marked.len(), best, "greedy cardinality is not minimal");
        }
    }
}
