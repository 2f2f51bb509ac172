use crate::modelfile::FamilyDecl;
use cpmle_core::{FitResult, ModelSpec, WaldInterval};
use serde::Serialize;

/// Echo of the resolved run configuration, carried by every report for
/// audit; field order is the stable JSON key order.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfigEcho {
    pub command: String,
    pub data: Option<String>,
    pub model: Option<String>,
    pub scenario: Option<String>,
    pub k: usize,
    pub seed: u64,
    pub level: Option<f64>,
    pub psi_grid: Option<Vec<Vec<f64>>>,
    pub replications: Option<usize>,
    pub suite: Option<String>,
    pub probes: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentReport {
    pub segment: usize,
    pub family: FamilyDecl,
    pub rows: [usize; 2],
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalReport {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub loglik_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub boundary_active: Vec<String>,
    pub neighbor_min_gap: Option<f64>,
    pub neighbors_distinct: bool,
    pub n_starts: usize,
    pub extra_local_maxima: usize,
    pub info_condition: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub config: RunConfigEcho,
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    pub change_points: Vec<usize>,
    pub lambda_hat: Vec<f64>,
    pub psi: Vec<f64>,
    /// Assembled covariance matrix when the common block is a packed
    /// Cholesky factor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_covariance: Option<Vec<Vec<f64>>>,
    pub segments: Vec<SegmentReport>,
    pub loglik: f64,
    pub std_errors: Vec<f64>,
    pub intervals: Vec<IntervalReport>,
    pub info_matrix: Vec<Vec<f64>>,
    pub diagnostics: DiagnosticsReport,
}

pub fn fit_report(
    config: RunConfigEcho,
    spec: &ModelSpec,
    decls: &[FamilyDecl],
    n: usize,
    fit: &FitResult,
    intervals: &[WaldInterval],
) -> FitReport {
    let psi_covariance = match spec.common() {
        cpmle_core::CommonParam::CholCovariance(p) => {
            let l = cpmle_core::unpack_chol(&fit.params.psi, p);
            let cov = &l * l.transpose();
            Some(
                (0..p)
                    .map(|a| (0..p).map(|b| cov[(a, b)]).collect())
                    .collect(),
            )
        }
        _ => None,
    };
    let info = fit.info.full();
    let info_matrix = (0..info.nrows())
        .map(|a| (0..info.ncols()).map(|b| info[(a, b)]).collect())
        .collect();
    let segments = (0..spec.n_segments())
        .map(|j| {
            let r = fit.change_points.segment_range(j);
            SegmentReport {
                segment: j + 1,
                family: decls[j].clone(),
                rows: [r.start + 1, r.end],
                theta: fit.params.thetas[j].clone(),
            }
        })
        .collect();
    FitReport {
        config,
        n,
        dim: spec.obs_dim(),
        k: spec.k(),
        change_points: fit.change_points.boundaries().to_vec(),
        lambda_hat: fit.change_points.fractions(),
        psi: fit.params.psi.clone(),
        psi_covariance,
        segments,
        loglik: fit.loglik,
        std_errors: fit.std_errors.clone(),
        intervals: intervals
            .iter()
            .map(|iv| IntervalReport {
                label: iv.label.clone(),
                estimate: iv.estimate,
                std_error: iv.std_error,
                lower: iv.lower,
                upper: iv.upper,
            })
            .collect(),
        info_matrix,
        diagnostics: DiagnosticsReport {
            loglik_trace: fit.diagnostics.loglik_trace.clone(),
            outer_iterations: fit.diagnostics.outer_iterations,
            converged: fit.diagnostics.converged,
            boundary_active: fit.diagnostics.boundary_active.clone(),
            neighbor_min_gap: fit.diagnostics.neighbor_min_gap,
            neighbors_distinct: fit.diagnostics.neighbors_distinct,
            n_starts: fit.diagnostics.n_starts,
            extra_local_maxima: fit.diagnostics.extra_local_maxima,
            info_condition: fit.diagnostics.info_condition,
        },
    }
}

pub fn print_fit_table(report: &FitReport) {
    println!("n = {}, dim = {}, k = {}", report.n, report.dim, report.k);
    println!("change points: {:?}", report.change_points);
    println!("fractions:     {:?}", report.lambda_hat);
    println!("log-likelihood: {:.6}", report.loglik);
    if !report.psi.is_empty() {
        println!("common parameter: {:?}", report.psi);
    }
    if let Some(cov) = &report.psi_covariance {
        println!("common covariance:");
        for row in cov {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.4}")).collect();
            println!("  [{}]", cells.join(", "));
        }
    }
    println!("{:<10} {:>12} {:>26}", "segment", "rows", "theta");
    for seg in &report.segments {
        println!(
            "{:<10} {:>5}..{:<5} {:>26}",
            seg.segment,
            seg.rows[0],
            seg.rows[1],
            format!("{:?}", seg.theta)
        );
    }
    println!(
        "{:<12} {:>12} {:>12} {:>12} {:>12}",
        "coordinate", "estimate", "std err", "lower", "upper"
    );
    for iv in &report.intervals {
        println!(
            "{:<12} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            iv.label, iv.estimate, iv.std_error, iv.lower, iv.upper
        );
    }
    if !report.diagnostics.boundary_active.is_empty() {
        println!(
            "note: estimates at the box boundary: {:?}",
            report.diagnostics.boundary_active
        );
    }
    if !report.diagnostics.neighbors_distinct {
        println!(
            "note: adjacent same-family segments nearly coincide (min gap {:?})",
            report.diagnostics.neighbor_min_gap
        );
    }
}

/// Wrapper putting the resolved run configuration next to any report
/// payload, so every emitted JSON file is self-describing.
#[derive(Debug, Clone, Serialize)]
pub struct Enveloped<T: Serialize> {
    pub config: RunConfigEcho,
    pub report: T,
}

/// One pass/fail row of a verification or simulation table.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

pub fn print_check_table(rows: &[CheckRow]) {
    for row in rows {
        println!(
            "[{}] {} — {}",
            if row.pass { "PASS" } else { "FAIL" },
            row.check,
            row.detail
        );
    }
}
