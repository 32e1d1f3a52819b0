//! The study report written to `report.json`.

use mplab_core::extrapolate::richardson;
use serde::Serialize;

use crate::io::AtomJson;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    /// SHA-256 of the config file bytes; empty for runs without a config.
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(config_sha256: String) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantRow {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl InvariantRow {
    /// Passes when `value <= limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        InvariantRow {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        InvariantRow {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            limit: 1.0,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RawValue {
    pub n: usize,
    pub h: f64,
    pub value: f64,
}

/// `a(h) = a0 + c h^beta` fitted over the ladder, with the raw values kept.
#[derive(Debug, Clone, Serialize)]
pub struct Extrapolated {
    pub quantity: String,
    pub a0: f64,
    pub error_estimate: f64,
    pub beta: f64,
    pub c: f64,
    pub residual: f64,
    pub raw: Vec<RawValue>,
}

impl Extrapolated {
    /// `None` with fewer than three grids.
    pub fn fit(quantity: impl Into<String>, raw: Vec<RawValue>) -> Option<Self> {
        let hs: Vec<f64> = raw.iter().map(|r| r.h).collect();
        let vs: Vec<f64> = raw.iter().map(|r| r.value).collect();
        let fit = richardson(&hs, &vs).ok()?;
        Some(Extrapolated {
            quantity: quantity.into(),
            a0: fit.a0,
            error_estimate: fit.error_estimate(),
            beta: fit.beta,
            c: fit.c,
            residual: fit.residual,
            raw,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub newton_iters: usize,
    pub fallback_sweeps: usize,
    pub final_residual: f64,
    pub tol_abs: f64,
    pub l1: f64,
    pub linf: f64,
    pub w1q: f64,
    pub f_l1: f64,
    pub green_residual: f64,
    pub apriori_lhs: f64,
    pub apriori_rhs: f64,
    pub apriori_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionSummary {
    pub scheme: &'static str,
    pub converged: bool,
    pub levels: usize,
    pub tol_seq: f64,
    pub final_increment: f64,
    pub u_star_l1: f64,
    pub atoms: Vec<AtomJson>,
    pub density_mass: f64,
    pub extracted_tv: f64,
    pub data_tv: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionSummary {
    pub converged: bool,
    pub atoms: Vec<AtomJson>,
    pub density_mass: f64,
    pub projected_tv: f64,
    pub data_tv: f64,
    pub tol_seq_tv: f64,
    pub tv_project_vs_variant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: f64,
    pub converged: bool,
    pub l1: f64,
    pub w1q: f64,
    pub f_l1: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub n: usize,
    pub h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reductions: Vec<ReductionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRow>,
}

impl GridSummary {
    pub fn new(n: usize, h: f64) -> Self {
        GridSummary {
            n,
            h,
            solve: None,
            reductions: Vec::new(),
            projection: None,
            sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub n: usize,
    pub relative_l1_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralRow {
    pub n: usize,
    pub h: f64,
    pub i_h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilitySummary {
    pub integrals: Vec<IntegralRow>,
    pub relative_increments: Vec<f64>,
    pub growth_exponent: f64,
    pub verdict: &'static str,
    pub cauchy_tol: f64,
    pub divergence_threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub command: &'static str,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub f: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub grids: Vec<GridSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extrapolations: Vec<Extrapolated>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub two_scheme_gaps: Vec<GapRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<AdmissibilitySummary>,
    pub invariants: Vec<InvariantRow>,
    pub converged: bool,
    pub invariants_passed: bool,
}

impl StudyReport {
    pub fn new(command: &'static str, provenance: Provenance, f: String) -> Self {
        StudyReport {
            command,
            provenance,
            f,
            grids: Vec::new(),
            extrapolations: Vec::new(),
            two_scheme_gaps: Vec::new(),
            admissibility: None,
            invariants: Vec::new(),
            converged: true,
            invariants_passed: true,
        }
    }

    pub fn finalize(&mut self) {
        self.invariants_passed = self.invariants.iter().all(|r| r.passed);
    }

    pub fn exit_code(&self) -> i32 {
        if self.converged && self.invariants_passed {
            0
        } else {
            1
        }
    }

    /// Plain-text summary for the terminal.
    pub fn summary(&self) -> String {
        let mut s = format!("{}: converged={} invariants_passed={}\n", self.command, self.converged, self.invariants_passed);
        for e in &self.extrapolations {
            let raw: Vec<String> = e.raw.iter().map(|r| format!("{:.6}", r.value)).collect();
            s += &format!(
                "  {}: {} -> {:.6} ± {:.2e} (beta {:.3})\n",
                e.quantity,
                raw.join(" "),
                e.a0,
                e.error_estimate,
                e.beta
            );
        }
        for g in &self.two_scheme_gaps {
            s += &format!("  two-scheme L1 gap n={}: {:.3}%\n", g.n, 100.0 * g.relative_l1_gap);
        }
        if let Some(a) = &self.admissibility {
            s += &format!("  admissibility: {} (growth exponent {:.3})\n", a.verdict, a.growth_exponent);
        }
        for r in &self.invariants {
            s += &format!(
                "  {} {}: {:.3e} (limit {:.3e}) {}\n",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.value,
                r.limit,
                r.detail
            );
        }
        s
    }
}
