//! The adaptive loop: solve, estimate, mark, refine, with per-iteration
//! bookkeeping, log-log slope fitting and an empirical contraction scan of
//! the quasi-error.

use thiserror::Error;

use crate::estimate::{compute_indicators, dorfler_mark, Indicators};
use crate::fem::{energy_error_vertex_field, l2_norm, P1Space, QuadratureRule};
use crate::mesh::{prolong_vertex_values, DomainSpec, Mesh};
use crate::ocp::{solve_ocp_warm, vi_residual_min, OcpError, OcpProblem, OcpSolution, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementMode {
    /// Dörfler marking with the configured bulk fraction.
    Adaptive,
    /// Mark every element each iteration.
    Uniform,
}

/// Loop termination: at least one bound must be finite.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub max_iters: Option<usize>,
    pub max_dofs: Option<usize>,
    pub eta_tol: Option<f64>,
}

impl StopRule {
    pub fn new(max_iters: Option<usize>, max_dofs: Option<usize>, eta_tol: Option<f64>) -> StopRule {
        assert!(
            max_iters.is_some() || max_dofs.is_some() || eta_tol.is_some(),
            "at least one stopping bound must be set"
        );
        StopRule { max_iters, max_dofs, eta_tol }
    }

    /// Desk-scale default used by the test suite.
    pub fn default_ci() -> StopRule {
        StopRule { max_iters: Some(100), max_dofs: Some(30_000), eta_tol: None }
    }

    fn stops(&self, iter: usize, n_dofs: usize, eta_total: f64) -> bool {
        self.max_iters.map_or(false, |m| iter >= m)
            || self.max_dofs.map_or(false, |m| n_dofs >= m)
            || self.eta_tol.map_or(false, |t| eta_total <= t)
    }
}

/// One row of the per-iteration ledger.
#[derive(Debug, Clone)]
pub struct AdaptRecord {
    pub iter: usize,
    pub n_elements: usize,
    pub n_dofs: usize,
    pub eta_y: f64,
    pub eta_p: f64,
    pub eta_total: f64,
    pub osc_total: f64,
    pub marked_count: usize,
    pub refined_count: usize,
    /// Energy errors against the exact solution, when one is known.
    pub energy_err_y: Option<f64>,
    pub energy_err_p: Option<f64>,
    pub energy_err_total: Option<f64>,
    pub l2_err_u: Option<f64>,
}

impl AdaptRecord {
    /// Squared energy error plus `gamma` times the squared estimator.
    pub fn quasi_error(&self, gamma: f64) -> Option<f64> {
        let err = self.energy_err_total?;
        Some(err * err + gamma * self.eta_total * self.eta_total)
    }
}

/// Diagnostics kept alongside each record for post-hoc audits.
#[derive(Debug, Clone)]
pub struct IterationStats {
    pub conforming: bool,
    pub osc_dominated: bool,
    pub marked_eta_sq: f64,
    pub total_eta_sq: f64,
    pub vi_min: f64,
    pub outer_iterations: usize,
    pub kkt_residual: f64,
    pub max_aspect: f64,
    /// Per-element squared indicators, retained only on small meshes so
    /// brute-force marking audits stay cheap.
    pub eta_sq_small: Option<Vec<f64>>,
}

pub struct RunOutput {
    pub records: Vec<AdaptRecord>,
    pub stats: Vec<IterationStats>,
    pub final_mesh: Mesh,
    pub final_solution: OcpSolution,
    pub initial_elements: usize,
    pub total_marked: usize,
    /// Measured constant of `#T_n - #T_0 <= C * sum of marked counts`.
    pub cardinality_constant: Option<f64>,
}

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("solver failed at adaptive iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        records: Vec<AdaptRecord>,
        #[source]
        source: OcpError,
    },
}

/// Everything an observer gets to see after each SOLVE/ESTIMATE stage.
pub struct IterationView<'a> {
    pub iter: usize,
    pub mesh: &'a Mesh,
    pub indicators: &'a Indicators,
    pub solution: &'a OcpSolution,
}

pub fn run_adaptive(
    prob: &OcpProblem,
    domain: DomainSpec,
    theta: f64,
    stop: StopRule,
    mode: RefinementMode,
    opts: SolverOptions,
) -> Result<RunOutput, AdaptError> {
    run_adaptive_observed(prob, domain, theta, stop, mode, opts, |_| {})
}

/// Run the loop, handing each iteration to `observer` (e.g. for VTK dumps).
pub fn run_adaptive_observed(
    prob: &OcpProblem,
    domain: DomainSpec,
    theta: f64,
    stop: StopRule,
    mode: RefinementMode,
    opts: SolverOptions,
    mut observer: impl FnMut(IterationView),
) -> Result<RunOutput, AdaptError> {
    let error_rule = QuadratureRule::degree5();
    let mut mesh = Mesh::initial(domain);
    let initial_elements = mesh.n_elements();
    let mut warm_p: Option<Vec<f64>> = None;

    let mut records: Vec<AdaptRecord> = Vec::new();
    let mut stats: Vec<IterationStats> = Vec::new();
    let mut total_marked = 0usize;

    let mut iter = 0usize;
    loop {
        // SOLVE and ESTIMATE inside a scope so the space's borrow of the mesh
        // ends before REFINE replaces it.
        let (sol, ind, n_dofs) = {
            let space = P1Space::new(&mesh);
            let sol = match solve_ocp_warm(&space, prob, opts, warm_p.as_deref()) {
                Ok(s) => s,
                Err(source) => {
                    return Err(AdaptError::Solver { iteration: iter, records, source })
                }
            };
            let ind = compute_indicators(&space, prob, &sol);
            let n = space.n_dofs;
            (sol, ind, n)
        };

        observer(IterationView { iter, mesh: &mesh, indicators: &ind, solution: &sol });

        let eta_total = ind.eta_total();
        let (err_y, err_p, err_total, err_u) = match &prob.exact {
            Some(ex) => {
                let ey = energy_error_vertex_field(&mesh, &sol.y_vertex, &ex.y, &ex.grad_y, &prob.coeff, &error_rule);
                let ep = energy_error_vertex_field(&mesh, &sol.p_vertex, &ex.p, &ex.grad_p, &prob.coeff, &error_rule);
                let eu = l2_norm(&mesh, &error_rule, |t, bary, x, y| {
                    (ex.u)(x, y) - sol.control_at(&mesh, t, bary)
                });
                (Some(ey), Some(ep), Some((ey * ey + ep * ep).sqrt()), Some(eu))
            }
            None => (None, None, None, None),
        };

        let audit = mesh.audit();
        let stopping = stop.stops(iter, n_dofs, eta_total);

        let outcome = if stopping {
            None
        } else {
            match mode {
                RefinementMode::Adaptive => {
                    let out = dorfler_mark(&ind.eta_sq, theta);
                    if out.converged {
                        None
                    } else {
                        Some(out.marked)
                    }
                }
                RefinementMode::Uniform => Some((0..mesh.n_elements()).collect()),
            }
        };

        let marked_eta_sq: f64 = outcome
            .as_deref()
            .map(|m| m.iter().map(|&t| ind.eta_sq[t]).sum())
            .unwrap_or(0.0);

        stats.push(IterationStats {
            conforming: audit.conforming,
            osc_dominated: ind.oscillation_dominated(),
            marked_eta_sq,
            total_eta_sq: eta_total * eta_total,
            vi_min: vi_residual_min(&mesh, prob, &sol, &error_rule),
            outer_iterations: sol.outer_iterations,
            kkt_residual: sol.kkt_residual,
            max_aspect: audit.max_aspect,
            eta_sq_small: (mesh.n_elements() <= 64).then(|| ind.eta_sq.clone()),
        });

        let mut record = AdaptRecord {
            iter,
            n_elements: mesh.n_elements(),
            n_dofs,
            eta_y: ind.eta_y_total(),
            eta_p: ind.eta_p_total(),
            eta_total,
            osc_total: ind.osc_total(),
            marked_count: 0,
            refined_count: 0,
            energy_err_y: err_y,
            energy_err_p: err_p,
            energy_err_total: err_total,
            l2_err_u: err_u,
        };

        match outcome {
            None => {
                records.push(record);
                let cardinality_constant = if total_marked > 0 {
                    Some((mesh.n_elements() - initial_elements) as f64 / total_marked as f64)
                } else {
                    None
                };
                return Ok(RunOutput {
                    records,
                    stats,
                    final_mesh: mesh,
                    final_solution: sol,
                    initial_elements,
                    total_marked,
                    cardinality_constant,
                });
            }
            Some(marked) => {
                let (next, refined) = mesh.refine(&marked, 1);
                record.marked_count = marked.len();
                record.refined_count = refined.len();
                total_marked += marked.len();
                records.push(record);
                warm_p = Some(prolong_vertex_values(&sol.p_vertex, &next));
                mesh = next;
                iter += 1;
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum SlopeError {
    #[error("need at least two points in the window, got {0}")]
    TooFewPoints(usize),
    #[error("slope fit requires positive values (log-log): x={x}, y={y}")]
    NonPositive { x: f64, y: f64 },
}

/// Least-squares slope of `log y` against `log x` over the last `window`
/// points.
pub fn fit_slope(xs: &[f64], ys: &[f64], window: usize) -> Result<f64, SlopeError> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let take = window.min(n);
    if take < 2 {
        return Err(SlopeError::TooFewPoints(take));
    }
    let xs = &xs[n - take..];
    let ys = &ys[n - take..];
    let mut pts = Vec::with_capacity(take);
    for (&x, &y) in xs.iter().zip(ys) {
        if x <= 0.0 || y <= 0.0 {
            return Err(SlopeError::NonPositive { x, y });
        }
        pts.push((x.ln(), y.ln()));
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Ok((m * sxy - sx * sy) / (m * sxx - sx * sx))
}

/// Slope of a record field against the DOF count over the last `window`
/// records. Records with missing or nonpositive values are rejected.
pub fn fit_slope_records(
    records: &[AdaptRecord],
    y_of: impl Fn(&AdaptRecord) -> Option<f64>,
    window: usize,
) -> Result<f64, SlopeError> {
    let n = records.len();
    let take = window.min(n);
    if take < 2 {
        return Err(SlopeError::TooFewPoints(take));
    }
    let mut xs = Vec::with_capacity(take);
    let mut ys = Vec::with_capacity(take);
    for r in &records[n - take..] {
        let y = y_of(r).unwrap_or(-1.0);
        xs.push(r.n_dofs as f64);
        ys.push(y);
    }
    fit_slope(&xs, &ys, take)
}

/// Contraction behaviour of the quasi-error for one scaling factor.
#[derive(Debug, Clone)]
pub struct GammaScanRow {
    pub gamma: f64,
    /// Consecutive quasi-error ratios, one per refinement step.
    pub ratios: Vec<f64>,
    /// Number of contracting steps (ratio < 1).
    pub contracting: usize,
    /// Largest ratio after the first `skip` steps.
    pub max_tail_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ContractionScan {
    pub rows: Vec<GammaScanRow>,
    /// Index into `rows` of the factor with the most contracting steps,
    /// ties broken by the smaller tail ratio.
    pub best: usize,
    /// Steps excluded from the tail statistic.
    pub skip: usize,
}

/// Evaluate quasi-error ratios for each factor in `gamma_grid`; requires
/// records with exact-solution errors.
pub fn scan_contraction(
    records: &[AdaptRecord],
    gamma_grid: &[f64],
    skip: usize,
) -> Option<ContractionScan> {
    if records.len() < 2 || gamma_grid.is_empty() {
        return None;
    }
    let mut rows = Vec::with_capacity(gamma_grid.len());
    for &gamma in gamma_grid {
        let qe: Option<Vec<f64>> = records.iter().map(|r| r.quasi_error(gamma)).collect();
        let qe = qe?;
        let ratios: Vec<f64> = qe.windows(2).map(|w| w[1] / w[0]).collect();
        let contracting = ratios.iter().filter(|&&r| r < 1.0).count();
        let max_tail_ratio = ratios
            .iter()
            .skip(skip)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        rows.push(GammaScanRow { gamma, ratios, contracting, max_tail_ratio });
    }
    let best = (0..rows.len())
        .max_by(|&a, &b| {
            rows[a]
                .contracting
                .cmp(&rows[b].contracting)
                .then(rows[b].max_tail_ratio.total_cmp(&rows[a].max_tail_ratio))
        })
        .unwrap();
    Some(ContractionScan { rows, best, skip })
}

/// Log-spaced grid, endpoints included.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (count - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Coefficients;

    fn smoke_problem() -> OcpProblem {
        OcpProblem {
            alpha: 1.0,
            lower: -0.5,
            upper: 0.5,
            y_d: Box::new(|_, _| 1.0),
            f_extra: None,
            coeff: Coefficients::laplace(),
            exact: None,
        }
    }

    #[test]
    fn zero_iteration_budget_yields_single_record() {
        let prob = smoke_problem();
        let stop = StopRule::new(Some(0), None, None);
        let out = run_adaptive(
            &prob,
            DomainSpec::UnitSquare,
            0.4,
            stop,
            RefinementMode::Adaptive,
            SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].marked_count, 0);
        assert_eq!(out.records[0].refined_count, 0);
        assert_eq!(out.final_mesh.n_elements(), 2);
    }

    #[test]
    fn adaptive_run_satisfies_dorfler_property_each_iteration() {
        let prob = smoke_problem();
        let theta = 0.5;
        let stop = StopRule::new(Some(6), None, None);
        let out = run_adaptive(
            &prob,
            DomainSpec::Square2,
            theta,
            stop,
            RefinementMode::Adaptive,
            SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(out.records.len(), 7);
        for (k, s) in out.stats.iter().enumerate() {
            assert!(s.conforming, "iteration {k} nonconforming");
            assert!(s.osc_dominated);
            if out.records[k].marked_count > 0 {
                assert!(
                    s.marked_eta_sq >= theta * s.total_eta_sq - 1e-12 * s.total_eta_sq,
                    "bulk property violated at iteration {k}"
                );
            }
        }
        // DOF counts are monotone.
        for w in out.records.windows(2) {
            assert!(w[1].n_dofs >= w[0].n_dofs);
        }
        assert!(out.cardinality_constant.unwrap() > 0.0);
    }

    #[test]
    fn uniform_mode_marks_every_element() {
        let prob = smoke_problem();
        let stop = StopRule::new(Some(3), None, None);
        let out = run_adaptive(
            &prob,
            DomainSpec::UnitSquare,
            0.4,
            stop,
            RefinementMode::Uniform,
            SolverOptions::default(),
        )
        .unwrap();
        for r in &out.records[..out.records.len() - 1] {
            assert_eq!(r.marked_count, r.n_elements);
        }
    }

    #[test]
    fn slope_of_exact_power_laws() {
        let xs: Vec<f64> = (1..=8).map(|k| (10 * k) as f64).collect();
        let inv_sqrt: Vec<f64> = xs.iter().map(|x| x.powf(-0.5)).collect();
        let inv: Vec<f64> = xs.iter().map(|x| 3.7 * x.powf(-1.0)).collect();
        assert!((fit_slope(&xs, &inv_sqrt, 8).unwrap() + 0.5).abs() < 1e-12);
        assert!((fit_slope(&xs, &inv, 8).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_recovers_noisy_synthetic_decay() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let exponent = rng.gen_range(-1.2..-0.3);
            let xs: Vec<f64> = (1..=12).map(|k| 50.0 * 1.6f64.powi(k)).collect();
            let ys: Vec<f64> = xs
                .iter()
                .map(|x| 2.0 * x.powf(exponent) * (1.0 + rng.gen_range(-0.02..0.02)))
                .collect();
            let slope = fit_slope(&xs, &ys, 12).unwrap();
            assert!((slope - exponent).abs() < 0.05, "slope {slope} vs exponent {exponent}");
        }
    }

    #[test]
    fn slope_rejects_nonpositive_values() {
        assert!(matches!(
            fit_slope(&[1.0, 2.0], &[1.0, 0.0], 2),
            Err(SlopeError::NonPositive { .. })
        ));
        assert!(matches!(fit_slope(&[1.0], &[1.0], 1), Err(SlopeError::TooFewPoints(1))));
    }

    fn synthetic_records(err_factor: f64, eta_factor: f64, n: usize) -> Vec<AdaptRecord> {
        (0..n)
            .map(|k| {
                let err = err_factor.powi(k as i32);
                let eta = 3.0 * eta_factor.powi(k as i32);
                AdaptRecord {
                    iter: k,
                    n_elements: 10 * (k + 1),
                    n_dofs: 5 * (k + 1),
                    eta_y: eta / 2.0,
                    eta_p: eta / 2.0,
                    eta_total: eta,
                    osc_total: 0.1 * eta,
                    marked_count: 3,
                    refined_count: 4,
                    energy_err_y: Some(err / 2.0),
                    energy_err_p: Some(err / 2.0),
                    energy_err_total: Some(err),
                    l2_err_u: Some(err * err),
                }
            })
            .collect()
    }

    #[test]
    fn geometric_records_have_constant_contraction_ratio_for_all_gamma() {
        let records = synthetic_records(0.5, 0.5, 8);
        let scan = scan_contraction(&records, &log_spaced(1e-3, 10.0, 9), 2).unwrap();
        for row in &scan.rows {
            for &r in &row.ratios {
                assert!((r - 0.25).abs() < 1e-12, "gamma {} ratio {r}", row.gamma);
            }
            assert_eq!(row.contracting, 7);
        }
    }

    #[test]
    fn gamma_zero_gives_pure_energy_ratios() {
        let records = synthetic_records(0.6, 0.9, 5);
        let scan = scan_contraction(&records, &[0.0_f64.max(1e-300), 1.0], 0).unwrap();
        for &r in &scan.rows[0].ratios {
            assert!((r - 0.36).abs() < 1e-9);
        }
    }

    #[test]
    fn quasi_error_combines_error_and_estimator() {
        let records = synthetic_records(0.5, 0.5, 2);
        let qe = records[0].quasi_error(2.0).unwrap();
        assert!((qe - (1.0 + 2.0 * 9.0)).abs() < 1e-12);
    }
}
