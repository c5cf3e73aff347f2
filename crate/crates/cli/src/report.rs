//! Run reports: the JSON document every command can emit, its plain-text
//! rendering, and CSV export.

use std::fmt::Write as _;

use lie_spectrum::spectrum::{Diagnostics, ProductReport, SpectralPoint};
use lie_spectrum::{Character, TolerancePolicy, VerifySummary, C64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPayload {
    pub label: Option<String>,
    pub ambient_dim: usize,
    pub algebra_dim: usize,
    pub candidates_tested: Vec<Character>,
    pub points: Vec<SpectralPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberPayload {
    pub character: Character,
    pub member: bool,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Spectrum(SpectrumPayload),
    Member(MemberPayload),
    Product(ProductReport),
    Verify(VerifySummary),
}

/// Everything except `wall_time_s` is a function of the inputs and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub wall_time_s: f64,
    pub command: Vec<String>,
    pub policy: TolerancePolicy,
    pub inputs: Vec<InputDigest>,
    pub result: Payload,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// Whether the report records a failed property check.
    pub fn check_failed(&self) -> bool {
        match &self.result {
            Payload::Spectrum(_) | Payload::Member(_) => false,
            Payload::Product(p) => !p.passed,
            Payload::Verify(v) => v.failed > 0,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# wall_time_s {:.3}", self.wall_time_s);
        let _ = writeln!(out, "# command {}", self.command.join(" "));
        let p = &self.policy;
        let _ = writeln!(
            out,
            "# policy rank {:e} singularity {:e} match {:e} cap {}",
            p.rank_tol_rel, p.singularity_tol, p.match_tol, p.size_cap
        );
        for input in &self.inputs {
            let _ = writeln!(out, "# input {} sha256 {}", input.path, input.sha256);
        }
        match &self.result {
            Payload::Spectrum(s) => {
                let _ = writeln!(
                    out,
                    "spectrum of a {}-dimensional algebra on C^{}: {} point(s) from {} candidate(s)",
                    s.algebra_dim,
                    s.ambient_dim,
                    s.points.len(),
                    s.candidates_tested.len()
                );
                for point in &s.points {
                    let _ = writeln!(out, "{}", point_line(&point.character, Some(&point.diagnostics)));
                }
            }
            Payload::Member(m) => {
                let _ = writeln!(out, "member {}", m.member);
                let _ = writeln!(out, "{}", point_line(&m.character, Some(&m.diagnostics)));
            }
            Payload::Product(r) => {
                for (name, set) in [("first", &r.first), ("second", &r.second), ("product", &r.product)] {
                    let _ = writeln!(out, "{name}: {} point(s)", set.len());
                    for f in set {
                        let _ = writeln!(out, "{}", point_line(f, None));
                    }
                }
                let m = &r.matching;
                let _ = writeln!(
                    out,
                    "product theorem {}: max matching distance {:e}, unmatched {} / {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    m.max_distance,
                    m.unmatched_left,
                    m.unmatched_right
                );
            }
            Payload::Verify(v) => {
                let _ = writeln!(
                    out,
                    "verify seed {} trials {} dmax {} nmax {}: {} passed, {} failed, {} products skipped",
                    v.seed, v.trials, v.dmax, v.nmax, v.passed, v.failed, v.products_skipped
                );
                let _ = writeln!(out, "worst nilpotency ratio {:e}", v.worst_nilpotency_ratio);
                let _ = writeln!(
                    out,
                    "exactness samples {} disagreements {}",
                    v.exactness_samples, v.exactness_disagreements
                );
                let _ = writeln!(out, "worst projection distance {:e}", v.worst_projection_distance);
                let _ = writeln!(out, "worst flip distance {:e}", v.worst_flip_distance);
                let _ = writeln!(out, "worst inclusion distance {:e}", v.worst_inclusion_distance);
                let _ = writeln!(out, "worst product distance {:e}", v.worst_product_distance);
                for f in &v.failures {
                    let _ = writeln!(
                        out,
                        "failed trial {}: {}",
                        f.trial,
                        f.error.as_deref().unwrap_or("property check failed")
                    );
                    let _ = writeln!(out, "{}", f.algebra.to_json());
                    let _ = writeln!(out, "{}", f.partner.to_json());
                }
            }
        }
        out
    }

    /// One row per character: spectral points, the product spectrum, or the
    /// tested character. Verify reports carry none.
    pub fn to_csv(&self) -> Result<String, String> {
        let rows: Vec<(&Character, Option<&Diagnostics>)> = match &self.result {
            Payload::Spectrum(s) => s.points.iter().map(|p| (&p.character, Some(&p.diagnostics))).collect(),
            Payload::Member(m) => vec![(&m.character, Some(&m.diagnostics))],
            Payload::Product(r) => r.product.iter().map(|f| (f, None)).collect(),
            Payload::Verify(_) => return Err("verify reports contain no characters to export".into()),
        };
        let n = rows.first().map(|(f, _)| f.len()).unwrap_or(0);
        let with_diag = rows.iter().any(|(_, d)| d.is_some());
        let mut header: Vec<String> = (1..=n).flat_map(|k| [format!("f{k}_re"), format!("f{k}_im")]).collect();
        if with_diag {
            header.extend(["homology".to_string(), "t_min_sv".to_string()]);
        }
        let mut out = header.join(",");
        out.push('\n');
        for (f, diag) in rows {
            let mut cells: Vec<String> = f
                .values
                .iter()
                .flat_map(|z| [z.re.to_string(), z.im.to_string()])
                .collect();
            if let Some(d) = diag {
                let dims: Vec<String> = d.homology_dims.iter().map(|h| h.to_string()).collect();
                cells.push(dims.join(";"));
                cells.push(d.t_min_sv.to_string());
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Twelve significant digits; JSON keeps the full value.
fn number_text(v: f64) -> String {
    let s = format!("{:.12e}", v);
    let rounded: f64 = s.parse().unwrap_or(v);
    if rounded == 0.0 {
        "0".to_string()
    } else {
        rounded.to_string()
    }
}

/// Parts below `1e-12 * scale` print as zero.
fn complex_text(z: &C64, scale: f64) -> String {
    let tiny = |v: f64| v.abs() <= 1e-12 * scale;
    let re = if tiny(z.re) { 0.0 } else { z.re };
    let im = if tiny(z.im) { 0.0 } else { z.im };
    if im < 0.0 {
        format!("{}-{}i", number_text(re), number_text(-im))
    } else {
        format!("{}+{}i", number_text(re), number_text(im))
    }
}

fn point_line(f: &Character, diag: Option<&Diagnostics>) -> String {
    let scale = f.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let coeffs: Vec<String> = f.values.iter().map(|z| complex_text(z, scale)).collect();
    let mut line = format!("[{}]", coeffs.join(", "));
    if let Some(d) = diag {
        let _ = write!(line, "  homology {:?}  t_min_sv {:e}", d.homology_dims, d.t_min_sv);
    }
    line
}
