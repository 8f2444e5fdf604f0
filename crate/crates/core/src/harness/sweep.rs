//! Sweeps over a potential family: functionals, path certificates and flow
//! checks per row, then the lower-envelope fit of `F ≥ A·J - B`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::{VerificationConstants, SCHEMA_VERSION};
use super::families::{generate, FamilyKind, FamilySpec};
use crate::error::{Error, Result};
use crate::flow::{
    holder_quotient, lemma3_diagnostic, lemma4_check, lemma5_check, smooth_path_state, FlowOptions,
};
use crate::functionals::compute_f;
use crate::path::{
    chebyshev_t_grid, ding_identity_check, lemma1_check, path_normalization_check, step1_certificate,
    step2_certificate, trace_path, PathConfig, PathTrace, SolverOptions,
};
use crate::sphere::{MetricState, PotentialField, SphereGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub grid: usize,
    pub t_points: usize,
    /// Path parameters at which the flow smoother is run; each is snapped
    /// to the nearest traced state below 1.
    pub flow_samples: Vec<f64>,
    pub flow: FlowOptions,
    pub solver: SolverOptions,
    /// Trace paths and run flows for even rows. Off means functionals only.
    pub certificates: bool,
    pub max_error_fraction: f64,
    pub holder_pairs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid: 128,
            t_points: 65,
            flow_samples: vec![0.5, 0.75, 0.9, 0.97, 0.99],
            flow: FlowOptions::default(),
            solver: SolverOptions::default(),
            certificates: true,
            max_error_fraction: 0.1,
            holder_pairs: 1000,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_points < 2 {
            return Err(Error::Config("t-grid needs at least 2 points".into()));
        }
        if self.flow_samples.iter().any(|&t| !(0.0..1.0).contains(&t)) {
            return Err(Error::Config("flow samples must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.max_error_fraction) {
            return Err(Error::Config("max_error_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One row of a sweep. Fields after `tail` are empty when certificates are
/// off or the row failed before reaching them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepRow {
    pub id: usize,
    pub family: String,
    /// Target `J` or, for the dilation family, the dilation factor.
    pub parameter: Option<f64>,
    pub error: Option<String>,
    pub j: Option<f64>,
    pub i: Option<f64>,
    pub f: Option<f64>,
    pub osc: Option<f64>,
    pub sandwich_defect: Option<f64>,
    /// Size of the two highest Legendre coefficients.
    pub tail: Option<f64>,
    pub path_residual: Option<f64>,
    pub t0: Option<f64>,
    pub ding_residual: Option<f64>,
    pub min_monotonicity: Option<f64>,
    pub min_normalization_margin: Option<f64>,
    pub sign_changes: Option<bool>,
    pub min_lemma1_margin: Option<f64>,
    pub stepping_stone_margin: Option<f64>,
    pub mt_margin: Option<f64>,
    pub c1_row: Option<f64>,
    pub c2_row: Option<f64>,
    pub k_max: Option<f64>,
    pub step2_min_margin: Option<f64>,
    pub j_bound: Option<f64>,
    /// `max_s ‖u̇_s‖ / (e^s‖h₀‖)` over the flow samples.
    pub hdot_ratio: Option<f64>,
    /// `‖u₁‖ / (3‖h₀‖)` maximized over the flow samples.
    pub u1_ratio: Option<f64>,
    pub min_margin_u: Option<f64>,
    pub min_margin_a: Option<f64>,
    pub lemma5_ratio: Option<f64>,
    pub min_gradient_margin: Option<f64>,
    pub equivalence_violations: Option<usize>,
    pub holder_slope: Option<f64>,
}

pub const ROW_COLUMNS: &[&str] = &[
    "id", "family", "parameter", "error", "j", "i", "f", "osc", "sandwich_defect", "tail",
    "path_residual", "t0", "ding_residual", "min_monotonicity", "min_normalization_margin",
    "sign_changes", "min_lemma1_margin", "stepping_stone_margin", "mt_margin", "c1_row", "c2_row",
    "k_max", "step2_min_margin", "j_bound", "hdot_ratio", "u1_ratio", "min_margin_u",
    "min_margin_a", "lemma5_ratio", "min_gradient_margin", "equivalence_violations",
    "holder_slope",
];

pub const SAMPLE_COLUMNS: &[&str] = &[
    "row", "t", "h0_sup", "steps", "hdot_ratio", "u1_ratio", "min_margin_b", "min_margin_c",
    "margin_u", "margin_a", "ma3_residual", "lemma5_ratio", "gradient_margin",
    "equivalence_violated", "h1_sup", "h1_holder", "lemma3_proxy",
];

/// Header first, so empty tables still carry their columns.
fn write_records<W: Write, T: Serialize>(writer: W, columns: &[&str], records: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(columns)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Flow diagnostics at one sampled path state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub row: usize,
    pub t: f64,
    pub h0_sup: f64,
    pub steps: usize,
    pub hdot_ratio: f64,
    pub u1_ratio: f64,
    pub min_margin_b: f64,
    pub min_margin_c: f64,
    pub margin_u: f64,
    pub margin_a: f64,
    pub ma3_residual: f64,
    pub lemma5_ratio: f64,
    pub gradient_margin: f64,
    pub equivalence_violated: bool,
    /// Sup norm and Hölder quotient of the smoothed Ricci potential.
    pub h1_sup: f64,
    pub h1_holder: f64,
    pub lemma3_proxy: f64,
}

/// Lower envelope `F ≥ A·J - B` with `B ≤ B_max` and `A` maximal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// `None` when no row has `J > 0`, so `A` is unconstrained.
    pub a: Option<f64>,
    pub b: f64,
    /// Rows on the envelope line.
    pub tight_rows: Vec<usize>,
    /// Tight rows plus the `B` cap when it binds.
    pub active_constraints: usize,
    pub min_slack: f64,
}

/// Dilation-family summary: `F` stays at zero while `J` grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobiusSummary {
    /// `(a, J, F, F/J)`
    pub points: Vec<(f64, f64, f64, f64)>,
    pub max_abs_f: f64,
    pub max_j: f64,
    /// `F/J` nonincreasing along increasing `a`.
    pub ratio_decays: bool,
    /// `max|F| < 10⁻⁶` while `max J > 5`.
    pub no_positive_a: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub family: FamilySpec,
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub samples: Vec<FlowSample>,
    pub fit: Option<EnvelopeFit>,
    pub mobius: Option<MobiusSummary>,
    pub error_count: usize,
    pub flags: Vec<(String, bool)>,
}

impl SweepReport {
    pub fn error_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.error_count as f64 / self.rows.len() as f64
        }
    }

    pub fn failed(&self) -> bool {
        self.error_fraction() > self.config.max_error_fraction
    }

    pub fn ensure_ok(&self) -> Result<()> {
        if self.failed() {
            Err(Error::SweepFailed { failed: self.error_count, total: self.rows.len() })
        } else {
            Ok(())
        }
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.flags.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// `(J, F)` of the rows that produced both.
    pub fn points(&self) -> Vec<(usize, f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| Some((r.id, r.j?, r.f?)))
            .collect()
    }

    pub fn write_rows_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_records(writer, ROW_COLUMNS, &self.rows)
    }

    pub fn write_samples_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_records(writer, SAMPLE_COLUMNS, &self.samples)
    }

    /// `rows.csv`, `flow_samples.csv` and `report.json` under `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_rows_csv(std::fs::File::create(dir.join("rows.csv"))?)?;
        self.write_samples_csv(std::fs::File::create(dir.join("flow_samples.csv"))?)?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(dir.join("report.json"), json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Maximizes `A` subject to `F_k ≥ A·J_k - B`, `B ≤ b_max`. Raising `B`
/// only loosens the constraints, so `B = b_max` and `A` is the smallest
/// ratio `(F_k + b_max) / J_k` over rows with `J_k > 0`.
pub fn fit_envelope(points: &[(usize, f64, f64)], b_max: f64) -> Result<EnvelopeFit> {
    if let Some(&(id, _, f)) = points.iter().find(|&&(_, j, f)| j <= 0.0 && f < -b_max) {
        return Err(Error::Config(format!(
            "row {id} has F = {f} below -B_max with J = 0; no envelope exists"
        )));
    }
    let a = points
        .iter()
        .filter(|&&(_, j, _)| j > 0.0)
        .map(|&(_, j, f)| (f + b_max) / j)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))));
    let slack = |j: f64, f: f64| f - (a.unwrap_or(0.0) * j - b_max);
    let min_slack = points.iter().map(|&(_, j, f)| slack(j, f)).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + b_max);
    let tight_rows: Vec<usize> = match a {
        Some(_) => points
            .iter()
            .filter(|&&(_, j, f)| j > 0.0 && slack(j, f) <= tol * (1.0 + f.abs()))
            .map(|&(id, _, _)| id)
            .collect(),
        None => Vec::new(),
    };
    let active_constraints = tight_rows.len() + usize::from(a.is_some());
    Ok(EnvelopeFit { a, b: b_max, tight_rows, active_constraints, min_slack })
}

pub fn mobius_summary(rows: &[SweepRow]) -> MobiusSummary {
    let mut points: Vec<(f64, f64, f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let (a, j, f) = (r.parameter?, r.j?, r.f?);
            Some((a, j, f, if j > 0.0 { f / j } else { 0.0 }))
        })
        .collect();
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    let max_abs_f = points.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
    let max_j = points.iter().map(|p| p.1).fold(0.0, f64::max);
    // compare magnitudes: the ratios hover at rounding level around zero
    let ratio_decays = points
        .windows(2)
        .filter(|w| w[0].1 > 0.0)
        .all(|w| w[1].3.abs() <= w[0].3.abs() + 1e-9);
    MobiusSummary {
        points,
        max_abs_f,
        max_j,
        ratio_decays,
        no_positive_a: max_abs_f < 1e-6 && max_j > 5.0,
    }
}

fn min_opt(acc: Option<f64>, v: f64) -> Option<f64> {
    Some(acc.map_or(v, |a| a.min(v)))
}

fn max_opt(acc: Option<f64>, v: f64) -> Option<f64> {
    Some(acc.map_or(v, |a| a.max(v)))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn tail(phi: &PotentialField) -> f64 {
    let c = phi.coeffs();
    c.iter().rev().take(2).map(|v| v.abs()).sum()
}

/// Index of the traced state nearest to `t` among those with `t < 1`.
fn nearest_state(trace: &PathTrace, t: f64) -> Option<usize> {
    trace
        .states
        .iter()
        .enumerate()
        .filter(|(_, s)| s.t < 1.0)
        .min_by(|a, b| (a.1.t - t).abs().total_cmp(&(b.1.t - t).abs()))
        .map(|(k, _)| k)
}

/// Flow diagnostics at the path state `k`.
pub fn flow_sample(
    row: usize,
    phi: &PotentialField,
    trace: &PathTrace,
    k: usize,
    grid: &SphereGrid,
    config: &SweepConfig,
    constants: &VerificationConstants,
) -> Result<FlowSample> {
    let state = &trace.states[k];
    let (smoothed, flow) = smooth_path_state(phi, state, trace.phi1(), grid, &config.flow)?;
    let lemma4 = lemma4_check(&flow, grid)?;
    let h0 = flow.h0.sup_norm();
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let hdot_ratio = lemma4.iter().map(|r| ratio(r.hdot_sup, r.bound_a)).fold(0.0, f64::max);
    let lemma5 = lemma5_check(&flow, state.t, constants.holder_p, constants.equivalence, grid)?;
    let end = flow.s.len() - 1;
    let rho_end = flow.volume_ratio(end, grid);
    let h1_holder = holder_quotient(
        &smoothed.h_smoothed,
        &rho_end,
        constants.holder_kappa,
        grid,
        config.holder_pairs,
    )?;
    let lemma3 = lemma3_diagnostic(&smoothed, constants.holder_kappa, grid)?;
    Ok(FlowSample {
        row,
        t: state.t,
        h0_sup: h0,
        steps: flow.s.len() - 1,
        hdot_ratio,
        u1_ratio: ratio(smoothed.u_t.sup_norm(), 3.0 * h0),
        min_margin_b: lemma4.iter().map(|r| r.margin_b()).fold(f64::INFINITY, f64::min),
        min_margin_c: lemma4.iter().map(|r| r.margin_c).fold(f64::INFINITY, f64::min),
        margin_u: smoothed.margin_u(),
        margin_a: smoothed.margin_a(),
        ma3_residual: smoothed.ma3_residual,
        lemma5_ratio: lemma5.ratio,
        gradient_margin: lemma5.gradient_margin(),
        equivalence_violated: lemma5.equivalence_violated,
        h1_sup: smoothed.h_smoothed.sup_norm(),
        h1_holder,
        lemma3_proxy: lemma3.proxy,
    })
}

fn path_certificates(
    row: &mut SweepRow,
    samples: &mut Vec<FlowSample>,
    phi: &PotentialField,
    grid: &SphereGrid,
    config: &SweepConfig,
    constants: &VerificationConstants,
) -> Result<()> {
    let mut path_config = PathConfig::new(chebyshev_t_grid(config.t_points), constants.holder()?);
    path_config.solver = config.solver;
    let trace = trace_path(phi, grid, &path_config)?;
    row.path_residual = Some(trace.max_residual());
    row.t0 = trace.t0;
    row.min_monotonicity = Some(trace.min_monotonicity_increment());
    row.ding_residual = Some(ding_identity_check(&trace, grid)?.residual);

    let norm = path_normalization_check(&trace, grid)?;
    row.min_normalization_margin = Some(norm.iter().map(|r| r.h_margin()).fold(f64::INFINITY, f64::min));
    row.sign_changes = Some(norm.iter().all(|r| r.changes_sign(1e-12)));
    row.min_lemma1_margin = lemma1_check(&trace, trace.t0)
        .iter()
        .map(|r| r.margin())
        .fold(None, min_opt);

    let step1 = step1_certificate(&trace, grid, constants.c1, constants.c2)?;
    row.stepping_stone_margin = Some(step1.margin_stepping_stone);
    row.mt_margin = Some(step1.mt_margin);
    row.c1_row = Some(step1.c1_row);
    row.c2_row = Some(step1.c2_row);
    let step2 = step2_certificate(
        &trace,
        grid,
        constants.k_bound,
        constants.a_gamma(),
        constants.b_gamma(),
        constants.gamma(),
    )?;
    row.k_max = Some(step2.k_max);
    row.step2_min_margin = Some(step2.min_margin);
    row.j_bound = Some(step2.j_bound);

    let mut picked: Vec<usize> = config
        .flow_samples
        .iter()
        .filter_map(|&t| nearest_state(&trace, t))
        .collect();
    picked.dedup();
    let mut slope_points = Vec::new();
    for k in picked {
        let s = flow_sample(row.id, phi, &trace, k, grid, config, constants)?;
        row.hdot_ratio = max_opt(row.hdot_ratio, s.hdot_ratio);
        row.u1_ratio = max_opt(row.u1_ratio, s.u1_ratio);
        row.min_margin_u = min_opt(row.min_margin_u, s.margin_u);
        row.min_margin_a = min_opt(row.min_margin_a, s.margin_a);
        row.lemma5_ratio = max_opt(row.lemma5_ratio, s.lemma5_ratio);
        row.min_gradient_margin = min_opt(row.min_gradient_margin, s.gradient_margin);
        *row.equivalence_violations.get_or_insert(0) += usize::from(s.equivalence_violated);
        slope_points.push((1.0 - s.t, s.h1_holder));
        samples.push(s);
    }
    row.holder_slope = log_log_slope(&slope_points);
    Ok(())
}

/// Everything a sweep reports about one potential.
pub fn evaluate_row(
    id: usize,
    kind: FamilyKind,
    parameter: Option<f64>,
    phi: Result<PotentialField>,
    grid: &SphereGrid,
    config: &SweepConfig,
    constants: &VerificationConstants,
) -> (SweepRow, Vec<FlowSample>) {
    let mut row = SweepRow { id, family: kind.to_string(), parameter, ..Default::default() };
    let mut samples = Vec::new();
    let result = phi.and_then(|phi| {
        let report = compute_f(&phi, &MetricState::round(grid), grid)?;
        row.j = Some(report.j);
        row.i = Some(report.i);
        row.f = Some(report.f);
        row.osc = Some(report.osc);
        row.sandwich_defect = Some(report.sandwich_defect());
        row.tail = Some(tail(&phi));
        if config.certificates && kind == FamilyKind::EvenLegendre {
            path_certificates(&mut row, &mut samples, &phi, grid, config, constants)?;
        }
        Ok(())
    });
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    (row, samples)
}

fn row_parameter(spec: &FamilySpec, row: usize) -> Option<f64> {
    match spec.kind {
        FamilyKind::Mobius => Some(spec.amplitudes[row % spec.amplitudes.len()]),
        _ => spec.target_for(row),
    }
}

/// Runs every row of `spec`; rows are independent and run on the rayon
/// pool. Row errors are recorded, not raised; see [`SweepReport::ensure_ok`].
pub fn run_sweep(
    spec: &FamilySpec,
    config: &SweepConfig,
    constants: &VerificationConstants,
) -> Result<SweepReport> {
    config.validate()?;
    let grid = SphereGrid::new(config.grid)?;
    run_on_potentials(spec, generate(spec, &grid)?, &grid, config, constants)
}

/// Like [`run_sweep`] with the potentials supplied by the caller.
pub fn run_on_potentials(
    spec: &FamilySpec,
    potentials: Vec<Result<PotentialField>>,
    grid: &SphereGrid,
    config: &SweepConfig,
    constants: &VerificationConstants,
) -> Result<SweepReport> {
    let results: Vec<(SweepRow, Vec<FlowSample>)> = potentials
        .into_par_iter()
        .enumerate()
        .map(|(id, phi)| evaluate_row(id, spec.kind, row_parameter(spec, id), phi, grid, config, constants))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut samples = Vec::new();
    for (row, s) in results {
        rows.push(row);
        samples.extend(s);
    }
    let error_count = rows.iter().filter(|r| r.error.is_some()).count();
    let mut report = SweepReport {
        schema_version: SCHEMA_VERSION,
        family: spec.clone(),
        config: config.clone(),
        rows,
        samples,
        fit: None,
        mobius: None,
        error_count,
        flags: Vec::new(),
    };
    if spec.kind == FamilyKind::Mobius {
        report.mobius = Some(mobius_summary(&report.rows));
    } else {
        report.fit = Some(fit_envelope(&report.points(), constants.b_max)?);
    }
    report.flags = sweep_flags(&report);
    Ok(report)
}

fn all_rows(report: &SweepReport, check: impl Fn(&SweepRow) -> Option<bool>) -> bool {
    report.rows.iter().filter_map(check).all(|ok| ok)
}

/// Pass flags for the properties a single sweep can decide.
pub fn sweep_flags(report: &SweepReport) -> Vec<(String, bool)> {
    let mut flags = vec![
        ("error_budget".to_string(), !report.failed()),
        (
            "onofri_floor".to_string(),
            all_rows(report, |r| r.f.map(|f| f >= -1e-6)),
        ),
        (
            "sandwich".to_string(),
            all_rows(report, |r| r.sandwich_defect.map(|d| d <= 1e-12)),
        ),
    ];
    if report.family.kind == FamilyKind::EvenLegendre && report.config.certificates {
        flags.extend([
            (
                "ding_identity".to_string(),
                all_rows(report, |r| Some(r.ding_residual? <= 1e-5 * r.f?.max(1.0))),
            ),
            (
                "monotonicity".to_string(),
                all_rows(report, |r| r.min_monotonicity.map(|m| m >= -1e-8)),
            ),
            (
                "path_normalization".to_string(),
                all_rows(report, |r| Some(r.sign_changes? && r.min_normalization_margin? >= -1e-8)),
            ),
            (
                "flow_estimates".to_string(),
                all_rows(report, |r| Some(r.hdot_ratio? <= 1.0 + 1e-4 && r.u1_ratio? <= 1.0 + 1e-4)),
            ),
            (
                "lemma1".to_string(),
                all_rows(report, |r| r.min_lemma1_margin.map(|m| m >= 0.0)),
            ),
        ]);
    }
    if let Some(fit) = &report.fit {
        flags.push((
            "envelope".to_string(),
            fit.a.is_none_or(|a| a >= 0.05) && fit.b <= 10.0 && fit.min_slack >= -1e-12,
        ));
    }
    if let Some(m) = &report.mobius {
        flags.push(("no_positive_a".to_string(), m.no_positive_a && m.ratio_decays));
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SweepConfig {
        SweepConfig {
            grid: 32,
            t_points: 17,
            flow_samples: vec![0.9],
            flow: FlowOptions { tol: 1e-6, ..FlowOptions::default() },
            holder_pairs: 200,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn zero_potential_row() {
        let spec = FamilySpec {
            amplitudes: vec![0.0],
            target_j: None,
            ..FamilySpec::even_legendre(1, 1, (1.0, 1.0))
        };
        let report = run_sweep(&spec, &small_config(), &VerificationConstants::frozen()).unwrap();
        let row = &report.rows[0];
        assert!(row.error.is_none(), "{:?}", row.error);
        assert_eq!(row.j, Some(0.0));
        assert!(row.f.unwrap().abs() < 1e-14);
        let fit = report.fit.as_ref().unwrap();
        assert_eq!(fit.a, None);
        assert!(report.flags.iter().all(|(_, ok)| *ok), "{:?}", report.flags);
    }

    #[test]
    fn csv_headers_match_serialized_fields() {
        let header = |bytes: Vec<u8>| String::from_utf8(bytes).unwrap().lines().next().unwrap().to_string();
        let mut buf = Vec::new();
        let mut w = csv::Writer::from_writer(&mut buf);
        w.serialize(SweepRow::default()).unwrap();
        drop(w);
        assert_eq!(header(buf), ROW_COLUMNS.join(","));
        let sample = FlowSample {
            row: 0, t: 0.0, h0_sup: 0.0, steps: 0, hdot_ratio: 0.0, u1_ratio: 0.0,
            min_margin_b: 0.0, min_margin_c: 0.0, margin_u: 0.0, margin_a: 0.0,
            ma3_residual: 0.0, lemma5_ratio: 0.0, gradient_margin: 0.0,
            equivalence_violated: false, h1_sup: 0.0, h1_holder: 0.0, lemma3_proxy: 0.0,
        };
        let mut buf = Vec::new();
        let mut w = csv::Writer::from_writer(&mut buf);
        w.serialize(sample).unwrap();
        drop(w);
        assert_eq!(header(buf), SAMPLE_COLUMNS.join(","));
    }

    #[test]
    fn envelope_closed_form() {
        let pts = [(0, 1.0, 0.5), (1, 2.0, 0.5), (2, 4.0, 3.0)];
        let fit = fit_envelope(&pts, 1.0).unwrap();
        // ratios (F+1)/J = 1.5, 0.75, 1.0
        assert_eq!(fit.a, Some(0.75));
        assert_eq!(fit.tight_rows, vec![1]);
        assert_eq!(fit.active_constraints, 2);
        assert!(fit.min_slack.abs() < 1e-15);
    }

    #[test]
    fn envelope_without_energy_is_unconstrained() {
        let fit = fit_envelope(&[(0, 0.0, 0.0)], 10.0).unwrap();
        assert_eq!(fit.a, None);
        assert!(fit_envelope(&[(0, 0.0, -11.0)], 10.0).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.01, 0.001].iter().map(|&x: &f64| (x, 3.0 * x.powf(0.4))).collect();
        assert!((log_log_slope(&pts).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(log_log_slope(&[(1.0, 1.0)]), None);
    }

    #[test]
    fn small_even_sweep_runs() {
        let spec = FamilySpec::even_legendre(3, 3, (0.01, 0.05));
        let report = run_sweep(&spec, &small_config(), &VerificationConstants::frozen()).unwrap();
        assert_eq!(report.error_count, 0, "{:?}", report.rows);
        assert_eq!(report.samples.len(), 3);
        let fit = report.fit.clone().unwrap();
        let a = fit.a.unwrap();
        for (_, j, f) in report.points() {
            assert!(f - (a * j - fit.b) >= -1e-12);
        }
    }

    #[test]
    fn mobius_rows_skip_certificates() {
        let spec = FamilySpec::mobius(vec![1.0, 2.0, 4.0]);
        let report = run_sweep(&spec, &small_config(), &VerificationConstants::frozen()).unwrap();
        let m = report.mobius.as_ref().unwrap();
        assert_eq!(m.points.len(), 3);
        assert!(m.max_abs_f < 1e-8);
        assert!(report.rows.iter().all(|r| r.path_residual.is_none()));
    }
}
