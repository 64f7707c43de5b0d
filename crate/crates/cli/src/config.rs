//! Run configuration: a TOML file with one section per pipeline.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use grating_core::green::QuadratureRule;
use grating_core::perturbed::Incident;
use grating_core::profile::{LocalPerturbation, PeriodicProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave: Option<WaveSection>,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub green: GreenSection,
    #[serde(default)]
    pub perturbed: PerturbedSection,
    #[serde(default)]
    pub inverse: InverseSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// "flat", "echelle", "sine:A", "resonator[:w,l,W,D]" or "polyline:x,y;...".
    pub spec: String,
    /// "none", "echelle-defect", "echelle-fill", "notch:w,d", "bump:w,h",
    /// "identity:a,b,n" or "arc:a,b;x,y;...".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSection {
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub target_size: f64,
    /// Truncation height; the profile default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub n_periods: usize,
    pub pml_width: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            target_size: 0.2,
            h: None,
            n_periods: 7,
            pml_width: 2.0 * PI,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtn_order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    /// "sqrt" (square-root mapped at the cut-offs), "graded" or "gauss".
    pub kind: String,
    /// Sub-panels per unit α ("sqrt"), refinement levels ("graded") or panels ("gauss").
    pub panels: f64,
    pub points: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self {
            kind: "sqrt".into(),
            panels: 30.0,
            points: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub grid_size: usize,
    pub dip_factor: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            grid_size: 128,
            dip_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenSection {
    /// Number of random point pairs for the symmetry check.
    pub pairs: usize,
    /// Lateral range of the sampled points.
    pub x_range: [f64; 2],
    /// Lateral samples x₁ = source + 2πm for |m| ≤ lateral_periods.
    pub lateral_periods: i64,
}

impl Default for GreenSection {
    fn default() -> Self {
        Self {
            pairs: 5,
            x_range: [0.0, 2.0 * PI],
            lateral_periods: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbedSection {
    /// Second geometry; when present the command compares the two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<String>,
    /// Near-field record height; defaults to 1.5 × the largest height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_height: Option<f64>,
    /// Further plane-wave incidence angles at wave.k for a comparison.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angles: Vec<f64>,
    pub samples: usize,
}

impl Default for PerturbedSection {
    fn default() -> Self {
        Self {
            compare: None,
            record_height: None,
            angles: Vec::new(),
            samples: 65,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseSection {
    /// "eig-count", "counterexample" or "uniqueness".
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

impl Default for InverseSection {
    fn default() -> Self {
        Self {
            task: "eig-count".into(),
            h: None,
            k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub criteria: Vec<u32>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            criteria: (1..=14).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// A configuration or input problem (exit status 2).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, as 16 hex digits.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_toml().as_bytes());
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Seed derived from the config hash.
    pub fn hash_seed(&self) -> u64 {
        let d = Sha256::digest(self.to_toml().as_bytes());
        u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
    }

    pub fn profile(&self) -> Result<PeriodicProfile, ConfigError> {
        PeriodicProfile::parse(&self.profile.spec)
            .map_err(|e| ConfigError(format!("[profile] spec: {e}")))
    }

    pub fn perturbation(
        &self,
        profile: &PeriodicProfile,
    ) -> Result<Option<LocalPerturbation>, ConfigError> {
        match &self.profile.perturbation {
            None => Ok(None),
            Some(s) => LocalPerturbation::parse(s, profile)
                .map_err(|e| ConfigError(format!("[profile] perturbation: {e}"))),
        }
    }

    pub fn wave(&self) -> Result<&WaveSection, ConfigError> {
        let w = self
            .wave
            .as_ref()
            .ok_or_else(|| ConfigError("missing [wave] section".into()))?;
        if !(w.k > 0.0 && w.k.is_finite()) {
            return Err(ConfigError(format!(
                "[wave] k must be positive, got {}",
                w.k
            )));
        }
        Ok(w)
    }

    pub fn incident(&self) -> Result<Incident, ConfigError> {
        let w = self.wave()?;
        match (w.theta, w.source) {
            (Some(theta), None) => Ok(Incident::PlaneWave { k: w.k, theta }),
            (None, Some(y)) => Ok(Incident::PointSource { k: w.k, y }),
            _ => Err(ConfigError(
                "[wave] needs exactly one of theta or source".into(),
            )),
        }
    }

    /// Mesh height: the explicit value or the profile default.
    pub fn height(&self, profile: &PeriodicProfile) -> f64 {
        self.mesh.h.unwrap_or_else(|| profile.default_height())
    }

    pub fn validate_mesh(&self) -> Result<(), ConfigError> {
        let m = &self.mesh;
        if !(m.target_size > 0.0 && m.target_size.is_finite()) {
            return Err(ConfigError("[mesh] target_size must be positive".into()));
        }
        if m.n_periods < 3 || m.n_periods.is_multiple_of(2) {
            return Err(ConfigError(
                "[mesh] n_periods must be odd and at least 3".into(),
            ));
        }
        if !(m.pml_width > 0.0) {
            return Err(ConfigError("[mesh] pml_width must be positive".into()));
        }
        Ok(())
    }

    pub fn rule(&self, k: f64) -> Result<QuadratureRule, ConfigError> {
        let q = &self.quadrature;
        if q.points == 0 || !(q.panels > 0.0) {
            return Err(ConfigError(
                "[quadrature] panels and points must be positive".into(),
            ));
        }
        match q.kind.as_str() {
            "sqrt" => Ok(QuadratureRule::sqrt_mapped(k, q.panels, q.points)),
            "graded" => Ok(QuadratureRule::graded(k, q.panels as usize, q.points)),
            "gauss" => Ok(QuadratureRule::gauss(q.panels as usize, q.points)),
            other => Err(ConfigError(format!("[quadrature] unknown kind {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse("[profile]\nspec = \"flat\"\n").unwrap();
        assert_eq!(c.mesh, MeshSection::default());
        assert_eq!(c.verify.criteria.len(), 14);
        assert!(c.wave().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[profile]\nspec = \"flat\"\ncolour = 3\n").is_err());
        assert!(RunConfig::parse("[profile\n").is_err());
    }

    #[test]
    fn incident_needs_one_kind() {
        let c = RunConfig::parse(
            "[profile]\nspec = \"flat\"\n[wave]\nk = 2.0\ntheta = 0.1\nsource = [1.0, 2.0]\n",
        )
        .unwrap();
        assert!(c.incident().is_err());
        let c =
            RunConfig::parse("[profile]\nspec = \"flat\"\n[wave]\nk = 2.0\nsource = [1.0, 2.0]\n")
                .unwrap();
        assert!(matches!(
            c.incident().unwrap(),
            Incident::PointSource { .. }
        ));
    }

    #[test]
    fn hash_is_stable_under_formatting() {
        let a =
            RunConfig::parse("[profile]\nspec = \"flat\"\n[wave]\nk = 2.0\ntheta = 0.0\n").unwrap();
        let b =
            RunConfig::parse("[wave]\ntheta = 0.0\nk = 2.0\n\n[profile]\nspec = 'flat'\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
