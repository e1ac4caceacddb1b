//! P1 Lagrange finite elements on triangles: degree-of-freedom maps with
//! homogeneous Dirichlet elimination, triangle quadrature, stiffness and load
//! assembly, pointwise evaluation and error norms.

use rayon::prelude::*;

use crate::linalg::SparseMatrix;
use crate::mesh::Mesh;

/// Constant coefficients of the bilinear form
/// `a(y, v) = ∫ (A ∇y) · ∇v + c y v` with `A` symmetric positive definite
/// and `c >= 0`.
#[derive(Debug, Clone, Copy)]
pub struct Coefficients {
    pub a: [[f64; 2]; 2],
    pub c: f64,
}

impl Coefficients {
    /// The Laplace operator: A = I, c = 0.
    pub fn laplace() -> Coefficients {
        Coefficients { a: [[1.0, 0.0], [0.0, 1.0]], c: 0.0 }
    }

    pub fn validate(&self) -> bool {
        let sym = (self.a[0][1] - self.a[1][0]).abs() <= 1e-14;
        let trace = self.a[0][0] + self.a[1][1];
        let det = self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0];
        sym && trace > 0.0 && det > 0.0 && self.c >= 0.0
    }

    fn apply(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * g[0] + self.a[0][1] * g[1],
            self.a[1][0] * g[0] + self.a[1][1] * g[1],
        ]
    }
}

/// Quadrature rule on the reference triangle in barycentric coordinates.
/// Weights are normalized to sum to one, so an integral over an element `T`
/// is `|T| * Σ w_q f(x_q)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

impl QuadratureRule {
    /// Midpoint of the triangle; exact for linears.
    pub fn degree1() -> QuadratureRule {
        QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    /// Three-point rule, exact for quadratics.
    pub fn degree2() -> QuadratureRule {
        let a = 2.0 / 3.0;
        let b = 1.0 / 6.0;
        QuadratureRule {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Seven-point rule, exact for quintics.
    pub fn degree5() -> QuadratureRule {
        let s15 = 15.0f64.sqrt();
        let g1 = (6.0 - s15) / 21.0;
        let g2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let mut points = vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
        let mut weights = vec![9.0 / 40.0];
        for (g, w) in [(g1, w1), (g2, w2)] {
            let a = 1.0 - 2.0 * g;
            points.push([a, g, g]);
            points.push([g, a, g]);
            points.push([g, g, a]);
            weights.extend_from_slice(&[w, w, w]);
        }
        QuadratureRule { points, weights, degree: 5 }
    }
}

/// Vertex-based P1 space over a mesh. Vertices on the Dirichlet boundary are
/// constrained to zero and carry no degree of freedom.
pub struct P1Space<'m> {
    pub mesh: &'m Mesh,
    pub dof_of_vertex: Vec<Option<usize>>,
    pub free_vertices: Vec<usize>,
    pub n_dofs: usize,
}

impl<'m> P1Space<'m> {
    pub fn new(mesh: &'m Mesh) -> P1Space<'m> {
        let mut dof_of_vertex = vec![None; mesh.n_vertices()];
        let mut free_vertices = Vec::new();
        for (v, vert) in mesh.vertices.iter().enumerate() {
            if !vert.on_boundary {
                dof_of_vertex[v] = Some(free_vertices.len());
                free_vertices.push(v);
            }
        }
        let n_dofs = free_vertices.len();
        P1Space { mesh, dof_of_vertex, free_vertices, n_dofs }
    }

    /// Expand a free-DOF vector to per-vertex values (zero on the boundary).
    pub fn scatter_to_vertices(&self, dofs: &[f64]) -> Vec<f64> {
        assert_eq!(dofs.len(), self.n_dofs);
        let mut out = vec![0.0; self.mesh.n_vertices()];
        for (d, &v) in self.free_vertices.iter().enumerate() {
            out[v] = dofs[d];
        }
        out
    }

    /// Keep only the free-DOF entries of a per-vertex vector.
    pub fn restrict_to_dofs(&self, vertex_values: &[f64]) -> Vec<f64> {
        self.free_vertices.iter().map(|&v| vertex_values[v]).collect()
    }
}

/// Constant gradients of the three barycentric basis functions and the area.
pub fn basis_gradients(mesh: &Mesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let e = &mesh.elements[t];
    let p: Vec<[f64; 2]> = e.v.iter().map(|&v| mesh.vertex_coords(v)).collect();
    let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut grads = [[0.0; 2]; 3];
    for i in 0..3 {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        grads[i] = [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a];
    }
    (grads, 0.5 * two_a)
}

/// Physical coordinates of a barycentric point in element `t`.
pub fn physical_point(mesh: &Mesh, t: usize, bary: &[f64; 3]) -> [f64; 2] {
    let e = &mesh.elements[t];
    let mut x = 0.0;
    let mut y = 0.0;
    for (i, &v) in e.v.iter().enumerate() {
        let p = mesh.vertex_coords(v);
        x += bary[i] * p[0];
        y += bary[i] * p[1];
    }
    [x, y]
}

/// Local stiffness contribution of one element.
pub fn element_stiffness(mesh: &Mesh, t: usize, coeff: &Coefficients, rule: &QuadratureRule) -> [[f64; 3]; 3] {
    let (grads, area) = basis_gradients(mesh, t);
    let mut k = [[0.0; 3]; 3];
    for (q, bary) in rule.points.iter().enumerate() {
        let w = rule.weights[q] * area;
        for i in 0..3 {
            let agi = coeff.apply(grads[i]);
            for j in 0..3 {
                let diffusion = agi[0] * grads[j][0] + agi[1] * grads[j][1];
                k[i][j] += w * (diffusion + coeff.c * bary[i] * bary[j]);
            }
        }
    }
    k
}

/// Stiffness matrix of `a(.,.)` restricted to the free DOFs; SPD.
pub fn assemble_stiffness(space: &P1Space, coeff: &Coefficients) -> SparseMatrix {
    let mesh = space.mesh;
    let rule = QuadratureRule::degree2();
    let locals: Vec<[[f64; 3]; 3]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| element_stiffness(mesh, t, coeff, &rule))
        .collect();

    let mut triplets = Vec::new();
    for (t, k) in locals.iter().enumerate() {
        let vs = mesh.elements[t].v;
        for i in 0..3 {
            let Some(di) = space.dof_of_vertex[vs[i]] else { continue };
            for j in 0..3 {
                let Some(dj) = space.dof_of_vertex[vs[j]] else { continue };
                triplets.push((di, dj, k[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(space.n_dofs, &triplets)
}

/// Stiffness matrix over all vertices, without boundary elimination.
/// Useful for diagnostics: interior rows annihilate constants.
pub fn assemble_stiffness_vertexwise(mesh: &Mesh, coeff: &Coefficients) -> SparseMatrix {
    let rule = QuadratureRule::degree2();
    let mut triplets = Vec::new();
    for t in 0..mesh.n_elements() {
        let k = element_stiffness(mesh, t, coeff, &rule);
        let vs = mesh.elements[t].v;
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((vs[i], vs[j], k[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.n_vertices(), &triplets)
}

/// Load vector `(f, φ_i)` over free DOFs for a pointwise source.
pub fn assemble_load(
    space: &P1Space,
    f: impl Fn(f64, f64) -> f64 + Sync,
    rule: &QuadratureRule,
) -> Vec<f64> {
    assemble_load_elementwise(space, |_, _, x, y| f(x, y), rule)
}

/// Load vector for integrands that need element context, e.g. compositions
/// of discrete fields evaluated at quadrature points.
pub fn assemble_load_elementwise(
    space: &P1Space,
    g: impl Fn(usize, &[f64; 3], f64, f64) -> f64 + Sync,
    rule: &QuadratureRule,
) -> Vec<f64> {
    let mesh = space.mesh;
    let locals: Vec<[f64; 3]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let (_, area) = basis_gradients(mesh, t);
            let mut l = [0.0; 3];
            for (q, bary) in rule.points.iter().enumerate() {
                let [x, y] = physical_point(mesh, t, bary);
                let w = rule.weights[q] * area * g(t, bary, x, y);
                for i in 0..3 {
                    l[i] += w * bary[i];
                }
            }
            l
        })
        .collect();

    let mut out = vec![0.0; space.n_dofs];
    for (t, l) in locals.iter().enumerate() {
        let vs = mesh.elements[t].v;
        for i in 0..3 {
            if let Some(d) = space.dof_of_vertex[vs[i]] {
                out[d] += l[i];
            }
        }
    }
    out
}

/// Load vector over all vertices (no boundary elimination).
pub fn assemble_load_vertexwise(
    mesh: &Mesh,
    f: impl Fn(f64, f64) -> f64 + Sync,
    rule: &QuadratureRule,
) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_elements() {
        let (_, area) = basis_gradients(mesh, t);
        let vs = mesh.elements[t].v;
        for (q, bary) in rule.points.iter().enumerate() {
            let [x, y] = physical_point(mesh, t, bary);
            let w = rule.weights[q] * area * f(x, y);
            for i in 0..3 {
                out[vs[i]] += w * bary[i];
            }
        }
    }
    out
}

/// Value and (constant per element) gradient of a P1 function given by a
/// free-DOF vector, at a barycentric point of element `t`.
pub fn evaluate_p1(space: &P1Space, dofs: &[f64], t: usize, bary: &[f64; 3]) -> (f64, [f64; 2]) {
    let mesh = space.mesh;
    let e = &mesh.elements[t];
    let (grads, _) = basis_gradients(mesh, t);
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    for i in 0..3 {
        let c = space.dof_of_vertex[e.v[i]].map_or(0.0, |d| dofs[d]);
        value += c * bary[i];
        grad[0] += c * grads[i][0];
        grad[1] += c * grads[i][1];
    }
    (value, grad)
}

/// As [`evaluate_p1`] but from per-vertex values.
pub fn evaluate_vertex_field(mesh: &Mesh, values: &[f64], t: usize, bary: &[f64; 3]) -> (f64, [f64; 2]) {
    let e = &mesh.elements[t];
    let (grads, _) = basis_gradients(mesh, t);
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    for i in 0..3 {
        let c = values[e.v[i]];
        value += c * bary[i];
        grad[0] += c * grads[i][0];
        grad[1] += c * grads[i][1];
    }
    (value, grad)
}

/// Quadrature integral of `g(element, bary, x, y)` over the whole mesh.
/// Element contributions are accumulated in element order, so the result is
/// independent of the worker count.
pub fn integrate(
    mesh: &Mesh,
    rule: &QuadratureRule,
    g: impl Fn(usize, &[f64; 3], f64, f64) -> f64 + Sync,
) -> f64 {
    let per_element: Vec<f64> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let (_, area) = basis_gradients(mesh, t);
            let mut acc = 0.0;
            for (q, bary) in rule.points.iter().enumerate() {
                let [x, y] = physical_point(mesh, t, bary);
                acc += rule.weights[q] * area * g(t, bary, x, y);
            }
            acc
        })
        .collect();
    per_element.iter().sum()
}

/// `sqrt(∫ g^2)` by quadrature.
pub fn l2_norm(
    mesh: &Mesh,
    rule: &QuadratureRule,
    g: impl Fn(usize, &[f64; 3], f64, f64) -> f64 + Sync,
) -> f64 {
    integrate(mesh, rule, |t, b, x, y| g(t, b, x, y).powi(2)).max(0.0).sqrt()
}

/// Energy norm `sqrt(a(e, e))` of the difference between an exact field and
/// a P1 vertex field.
pub fn energy_error_vertex_field(
    mesh: &Mesh,
    values: &[f64],
    exact: &(impl Fn(f64, f64) -> f64 + Sync),
    exact_grad: &(impl Fn(f64, f64) -> [f64; 2] + Sync),
    coeff: &Coefficients,
    rule: &QuadratureRule,
) -> f64 {
    integrate(mesh, rule, |t, bary, x, y| {
        let (vh, gh) = evaluate_vertex_field(mesh, values, t, bary);
        let ev = exact(x, y) - vh;
        let g_exact = exact_grad(x, y);
        let eg = [g_exact[0] - gh[0], g_exact[1] - gh[1]];
        let aeg = coeff.apply(eg);
        aeg[0] * eg[0] + aeg[1] * eg[1] + coeff.c * ev * ev
    })
    .max(0.0)
    .sqrt()
}

/// Energy norm error of a free-DOF solution against an exact solution.
pub fn energy_norm_error(
    space: &P1Space,
    dofs: &[f64],
    exact: &(impl Fn(f64, f64) -> f64 + Sync),
    exact_grad: &(impl Fn(f64, f64) -> [f64; 2] + Sync),
    coeff: &Coefficients,
    rule: &QuadratureRule,
) -> f64 {
    let values = space.scatter_to_vertices(dofs);
    energy_error_vertex_field(space.mesh, &values, exact, exact_grad, coeff, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{DomainSpec, Element, Vertex};

    fn single_reference_triangle() -> Mesh {
        let vs = vec![
            Vertex { x: 0.0, y: 0.0, on_boundary: false, boundary_curve_id: None },
            Vertex { x: 1.0, y: 0.0, on_boundary: false, boundary_curve_id: None },
            Vertex { x: 0.0, y: 1.0, on_boundary: false, boundary_curve_id: None },
        ];
        let els = vec![Element { v: [0, 1, 2], refinement_edge: 0, generation: 0 }];
        Mesh::from_raw(vs, els).unwrap()
    }

    #[test]
    fn reference_element_stiffness_matrix() {
        let mesh = single_reference_triangle();
        let k = element_stiffness(&mesh, 0, &Coefficients::laplace(), &QuadratureRule::degree2());
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - want[i][j]).abs() < 1e-14, "K[{i}][{j}] = {}", k[i][j]);
            }
        }
    }

    #[test]
    fn reference_element_mass_matrix() {
        let mesh = single_reference_triangle();
        // Reaction-only limit: A = 0 is outside the SPD contract but isolates
        // the mass term.
        let coeff = Coefficients { a: [[0.0, 0.0], [0.0, 0.0]], c: 1.0 };
        let k = element_stiffness(&mesh, 0, &coeff, &QuadratureRule::degree2());
        let area = 0.5;
        for i in 0..3 {
            for j in 0..3 {
                let want = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((k[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interior_rows_of_vertexwise_stiffness_sum_to_zero() {
        let mut mesh = Mesh::initial(DomainSpec::UnitSquare);
        for _ in 0..4 {
            let all: Vec<usize> = (0..mesh.n_elements()).collect();
            mesh = mesh.refine(&all, 1).0;
        }
        let a = assemble_stiffness_vertexwise(&mesh, &Coefficients::laplace());
        let ones = vec![1.0; mesh.n_vertices()];
        let row_sums = a.spmv(&ones).unwrap();
        let mut checked = 0;
        for (v, vert) in mesh.vertices.iter().enumerate() {
            if !vert.on_boundary {
                assert!(row_sums[v].abs() < 1e-13, "row {v} sums to {}", row_sums[v]);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn zero_source_gives_zero_load() {
        let mesh = Mesh::initial(DomainSpec::Square2);
        let space = P1Space::new(&mesh);
        let l = assemble_load(&space, |_, _| 0.0, &QuadratureRule::degree5());
        assert!(l.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_source_load_is_third_of_adjacent_area() {
        let mesh = Mesh::initial(DomainSpec::UnitSquare);
        let l = assemble_load_vertexwise(&mesh, |_, _| 1.0, &QuadratureRule::degree2());
        // Vertex 0 and 2 touch both triangles, vertices 1 and 3 one each.
        let areas = [1.0, 0.5, 1.0, 0.5];
        for v in 0..4 {
            assert!((l[v] - areas[v] / 3.0).abs() < 1e-14, "l[{v}] = {}", l[v]);
        }
    }

    #[test]
    fn linear_source_moment_is_exact() {
        let mesh = single_reference_triangle();
        let l = assemble_load_vertexwise(&mesh, |x, _| x, &QuadratureRule::degree2());
        // ∫ x λ_i over the reference triangle with x-coords (0, 1, 0):
        // entries A/6 * x_i + A/12 * sum of the others.
        let area: f64 = 0.5;
        let xs = [0.0, 1.0, 0.0];
        for i in 0..3 {
            let others: f64 = (0..3).filter(|&j| j != i).map(|j| xs[j]).sum();
            let want = area / 6.0 * xs[i] + area / 12.0 * others;
            assert!((l[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn p1_evaluation_reproduces_nodal_and_linear_data() {
        let mesh = Mesh::initial(DomainSpec::Square2);
        let f = |x: f64, y: f64| 3.0 * x - 2.0 * y + 1.0;
        let values: Vec<f64> = mesh.vertices.iter().map(|v| f(v.x, v.y)).collect();
        // Nodal reproduction at corners of element 0.
        let (v0, _) = evaluate_vertex_field(&mesh, &values, 0, &[1.0, 0.0, 0.0]);
        assert!((v0 - values[mesh.elements[0].v[0]]).abs() < 1e-14);
        // Linear data is reproduced exactly everywhere, with exact gradient.
        for t in 0..mesh.n_elements() {
            let bary = [0.25, 0.35, 0.4];
            let [x, y] = physical_point(&mesh, t, &bary);
            let (v, g) = evaluate_vertex_field(&mesh, &values, t, &bary);
            assert!((v - f(x, y)).abs() < 1e-13);
            assert!((g[0] - 3.0).abs() < 1e-13 && (g[1] + 2.0).abs() < 1e-13);
        }
        // The gradient of a constant field vanishes.
        let ones = vec![1.0; mesh.n_vertices()];
        let (_, g) = evaluate_vertex_field(&mesh, &ones, 3, &[0.3, 0.3, 0.4]);
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
    }

    #[test]
    fn patch_test_linear_field_has_zero_energy_error() {
        let mut mesh = Mesh::initial(DomainSpec::SlitSquare);
        mesh = mesh.refine(&[0, 1, 2], 1).0;
        let f = |x: f64, y: f64| 2.0 * x - 3.0 * y + 0.5;
        let grad = |_: f64, _: f64| [2.0, -3.0];
        let values: Vec<f64> = mesh.vertices.iter().map(|v| f(v.x, v.y)).collect();
        let err = energy_error_vertex_field(
            &mesh,
            &values,
            &f,
            &grad,
            &Coefficients::laplace(),
            &QuadratureRule::degree5(),
        );
        assert!(err <= 1e-12, "patch test energy error {err}");
    }

    #[test]
    fn zero_against_zero_is_zero_error() {
        let mesh = Mesh::initial(DomainSpec::UnitSquare);
        let space = P1Space::new(&mesh);
        let err = energy_norm_error(
            &space,
            &vec![0.0; space.n_dofs],
            &|_, _| 0.0,
            &|_, _| [0.0, 0.0],
            &Coefficients::laplace(),
            &QuadratureRule::degree2(),
        );
        assert_eq!(err, 0.0);
    }

    #[test]
    fn interpolation_energy_error_halves_per_two_bisection_rounds() {
        use std::f64::consts::PI;
        let f = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let grad = move |x: f64, y: f64| {
            [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()]
        };
        let coeff = Coefficients::laplace();
        let rule = QuadratureRule::degree5();
        let mut mesh = Mesh::initial(DomainSpec::UnitSquare);
        // Two warmup rounds; the 8-element mesh is still pre-asymptotic.
        for _ in 0..2 {
            let all: Vec<usize> = (0..mesh.n_elements()).collect();
            mesh = mesh.refine(&all, 1).0;
        }
        let mut errors = Vec::new();
        for _ in 0..4 {
            for _ in 0..2 {
                let all: Vec<usize> = (0..mesh.n_elements()).collect();
                mesh = mesh.refine(&all, 1).0;
            }
            let values: Vec<f64> = mesh.vertices.iter().map(|v| f(v.x, v.y)).collect();
            errors.push(energy_error_vertex_field(&mesh, &values, &f, &grad, &coeff, &rule));
        }
        for w in errors.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - 0.5).abs() < 0.05, "ratios {errors:?}");
        }
    }

    /// Exact integral of a monomial x^a y^b over a triangle, by expanding the
    /// coordinates in barycentric powers and using
    /// ∫ λ0^i λ1^j λ2^k dT = 2|T| i! j! k! / (i+j+k+2)!.
    fn monomial_integral_oracle(p: &[[f64; 2]; 3], a: u32, b: u32) -> f64 {
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
        }
        fn multinomial(n: u32, parts: [u32; 3]) -> f64 {
            fact(n) / (fact(parts[0]) * fact(parts[1]) * fact(parts[2]))
        }
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let mut total = 0.0;
        for i in 0..=a {
            for j in 0..=(a - i) {
                let k = a - i - j;
                let cx = multinomial(a, [i, j, k])
                    * p[0][0].powi(i as i32)
                    * p[1][0].powi(j as i32)
                    * p[2][0].powi(k as i32);
                for l in 0..=b {
                    for m in 0..=(b - l) {
                        let n = b - l - m;
                        let cy = multinomial(b, [l, m, n])
                            * p[0][1].powi(l as i32)
                            * p[1][1].powi(m as i32)
                            * p[2][1].powi(n as i32);
                        let e = [i + l, j + m, k + n];
                        let lam = 2.0 * area * fact(e[0]) * fact(e[1]) * fact(e[2])
                            / fact(e[0] + e[1] + e[2] + 2);
                        total += cx * cy * lam;
                    }
                }
            }
        }
        total
    }

    #[test]
    fn quadrature_rules_are_exact_to_their_degree() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for rule in [QuadratureRule::degree1(), QuadratureRule::degree2(), QuadratureRule::degree5()] {
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for _ in 0..5 {
                let mut p = [
                    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    [rng.gen_range(1.0..2.0), rng.gen_range(-1.0..1.0)],
                    [rng.gen_range(-1.0..1.0), rng.gen_range(1.0..2.0)],
                ];
                let signed = |p: &[[f64; 2]; 3]| {
                    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
                };
                if signed(&p) < 0.0 {
                    p.swap(1, 2);
                }
                let area = signed(&p);
                if area < 0.05 {
                    continue; // skip near-degenerate draws
                }
                for a in 0..=rule.degree {
                    for b in 0..=(rule.degree - a) {
                        let by_rule: f64 = rule
                            .points
                            .iter()
                            .zip(&rule.weights)
                            .map(|(bary, w)| {
                                let x = bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0];
                                let y = bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1];
                                w * area * x.powi(a as i32) * y.powi(b as i32)
                            })
                            .sum();
                        let want = monomial_integral_oracle(&p, a, b);
                        assert!(
                            (by_rule - want).abs() <= 1e-13 * want.abs().max(1.0),
                            "degree {} rule on x^{a} y^{b}: {by_rule} vs {want}",
                            rule.degree
                        );
                    }
                }
            }
        }
    }
}
