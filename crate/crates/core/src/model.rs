//! Chemical model and the closed-form level-selection mathematics.
//!
//! The relative error of the mean rebinding time on a mesh of width `h` is
//! `W(h) = (k_a / D) G(h, sigma)`, where `sigma` and `D` are the summed
//! reaction radii and diffusion constants of the reacting pair. `G` vanishes
//! at the critical width `h* = (2/3) pi C3 sigma`; below `h*` the lattice model
//! cannot reproduce microscopic binding kinetics. Each species is assigned the
//! coarsest level on which all of its bimolecular channels satisfy `W <= epsilon`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::mesh::{Boundary, MeshHierarchy, MAX_LEVEL};

/// Mesh constant of the 2D rebinding-error formula.
pub const C2: f64 = 0.1951;
/// Mesh constant of the 3D rebinding-error formula.
pub const C3: f64 = 1.5164;

/// Relative slack below `h*` that is still accepted as "at `h*`".
///
/// Widths `h` in `[h* (1 - tol), h*)` are treated as `h*` itself (`G` clamped
/// to zero). Power-of-two meshes only approximate `h*`, and the standard
/// setups put the finest mesh a fraction of a percent below it.
pub const HSTAR_TOLERANCE: f64 = 0.02;

pub const DEFAULT_EPSILON: f64 = 0.025;
pub const DEFAULT_TRANSFER_C: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Two,
    Three,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("sub-h* resolution: h = {h} is below the critical width h* = {h_star}")]
    SubCriticalResolution { h: f64, h_star: f64 },
    #[error("channel {0} is not bimolecular")]
    NotBimolecular(usize),
    #[error("unknown species '{0}'")]
    UnknownSpecies(String),
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ModelDiagnostic>),
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

/// `G(h, sigma)` exactly as the piecewise formula prescribes (no clamping).
pub fn g_factor(h: f64, sigma: f64, dim: Dimension) -> Result<f64, ModelError> {
    positive("h", h)?;
    positive("sigma", sigma)?;
    Ok(match dim {
        Dimension::Three => 1.0 / (4.0 * PI * sigma) - C3 / (6.0 * h),
        Dimension::Two => {
            (1.0 / (2.0 * PI)) * (h / (sigma * PI.sqrt())).ln() - 0.25 * (3.0 / (2.0 * PI) + C2)
        }
    })
}

/// Critical voxel width `(2/3) pi C3 sigma`, the root of the 3D `G`.
pub fn h_star(sigma: f64) -> Result<f64, ModelError> {
    positive("sigma", sigma)?;
    Ok(2.0 / 3.0 * PI * C3 * sigma)
}

/// 3D `G` restricted to its validity range, clamped to zero inside the tolerance band.
fn resolved_g(h: f64, sigma: f64) -> Result<f64, ModelError> {
    let hs = h_star(sigma)?;
    positive("h", h)?;
    if h < hs * (1.0 - HSTAR_TOLERANCE) {
        return Err(ModelError::SubCriticalResolution { h, h_star: hs });
    }
    Ok(g_factor(h, sigma, Dimension::Three)?.max(0.0))
}

/// Relative error `W(h) = (k_a/D) G(h, sigma)` of the mean rebinding time.
pub fn relative_rebind_error(k_a: f64, d: f64, h: f64, sigma: f64) -> Result<f64, ModelError> {
    positive("k_a", k_a)?;
    positive("D", d)?;
    Ok(k_a / d * resolved_g(h, sigma)?)
}

/// Mesoscopic per-pair association rate in a voxel of width `h`.
///
/// Chosen so that `k_meso h^3 = k_a / (1 + W(h))`, which turns the tolerance
/// condition `k_a / (1 + eps) < k_meso h^3` into `W(h) < eps`.
pub fn meso_rate(k_a: f64, d: f64, sigma: f64, h: f64) -> Result<f64, ModelError> {
    let w = relative_rebind_error(k_a, d, h, sigma)?;
    Ok(k_a / (h * h * h * (1.0 + w)))
}

/// Result of level selection for one bimolecular channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelChoice {
    pub level: u8,
    /// No level met the tolerance; `level` is the finest available.
    pub unsatisfied: bool,
}

/// Coarsest level of `hierarchy` on which `W(h) <= epsilon`.
pub fn required_level(
    k_a: f64,
    d_pair: f64,
    sigma_pair: f64,
    hierarchy: &MeshHierarchy,
    epsilon: f64,
) -> LevelChoice {
    if k_a <= 0.0 {
        return LevelChoice { level: 0, unsatisfied: false };
    }
    for level in hierarchy.levels() {
        // Sub-h* levels (and bad parameters) never count as satisfying.
        if let Ok(w) = relative_rebind_error(k_a, d_pair, hierarchy.h(level), sigma_pair) {
            if w <= epsilon {
                return LevelChoice { level, unsatisfied: false };
            }
        }
    }
    LevelChoice { level: hierarchy.lmax(), unsatisfied: true }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    /// Diffusion coefficient.
    pub d: f64,
    /// Reaction radius; pair radii add.
    pub radius: f64,
    pub initial_count: u64,
    /// Forces the target level, bypassing automatic assignment.
    pub override_level: Option<u8>,
    /// Filled in by [`Model::assign_target_levels`].
    pub target_level: Option<u8>,
}

impl Species {
    pub fn new(name: impl Into<String>, d: f64, radius: f64) -> Self {
        Species {
            name: name.into(),
            d,
            radius,
            initial_count: 0,
            override_level: None,
            target_level: None,
        }
    }

    pub fn count(mut self, n: u64) -> Self {
        self.initial_count = n;
        self
    }

    pub fn level(mut self, level: u8) -> Self {
        self.override_level = Some(level);
        self
    }
}

/// A reaction channel of order 0, 1 or 2.
///
/// Units of `k`: molecules per time over the whole domain (order 0), per time
/// (order 1), microscopic association rate in volume per time (order 2).
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionChannel {
    pub k: f64,
    pub reactants: Vec<String>,
    pub products: Vec<String>,
}

impl ReactionChannel {
    pub fn new(k: f64, reactants: &[&str], products: &[&str]) -> Self {
        ReactionChannel {
            k,
            reactants: reactants.iter().map(|s| s.to_string()).collect(),
            products: products.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.reactants.len()
    }
}

impl fmt::Display for ReactionChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |v: &[String]| if v.is_empty() { "0".to_string() } else { v.join(" + ") };
        write!(f, "{} -> {}", side(&self.reactants), side(&self.products))
    }
}

/// Where in a [`Model`] a diagnostic applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelLocation {
    Domain,
    Species(usize),
    Channel(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDiagnostic {
    pub location: ModelLocation,
    pub message: String,
}

impl fmt::Display for ModelDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            ModelLocation::Domain => write!(f, "domain: {}", self.message),
            ModelLocation::Species(i) => write!(f, "species #{i}: {}", self.message),
            ModelLocation::Channel(i) => write!(f, "reaction #{i}: {}", self.message),
        }
    }
}

/// Warning raised when no level meets the tolerance for a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelWarning {
    pub channel: usize,
    pub level: u8,
    /// `W` at the chosen level.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub species: Vec<Species>,
    pub channels: Vec<ReactionChannel>,
    /// Edge length of the cubic domain.
    pub side: f64,
    /// Finest level index; the hierarchy has `lmax + 1` levels.
    pub lmax: u8,
    pub epsilon: f64,
    /// Transfer constant `C`; `f64::INFINITY` disables transfers.
    pub transfer_c: f64,
    pub boundary: Boundary,
}

impl Model {
    pub fn new(side: f64, lmax: u8) -> Self {
        Model {
            species: Vec::new(),
            channels: Vec::new(),
            side,
            lmax,
            epsilon: DEFAULT_EPSILON,
            transfer_c: DEFAULT_TRANSFER_C,
            boundary: Boundary::Reflecting,
        }
    }

    pub fn with_species(mut self, s: Species) -> Self {
        self.species.push(s);
        self
    }

    pub fn with_reaction(mut self, c: ReactionChannel) -> Self {
        self.channels.push(c);
        self
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(3)
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn hierarchy(&self) -> Result<MeshHierarchy, ModelError> {
        MeshHierarchy::new(self.side, self.lmax, self.boundary).map_err(|e| {
            ModelError::Invalid(vec![ModelDiagnostic {
                location: ModelLocation::Domain,
                message: e.to_string(),
            }])
        })
    }

    /// Summed diffusion constant and reaction radius of a bimolecular channel.
    pub fn pair_parameters(&self, channel: usize) -> Result<(f64, f64), ModelError> {
        let c = &self.channels[channel];
        if c.order() != 2 {
            return Err(ModelError::NotBimolecular(channel));
        }
        let mut d = 0.0;
        let mut sigma = 0.0;
        for name in &c.reactants {
            let s = self
                .species_index(name)
                .map(|i| &self.species[i])
                .ok_or_else(|| ModelError::UnknownSpecies(name.clone()))?;
            d += s.d;
            sigma += s.radius;
        }
        Ok((d, sigma))
    }

    /// Level selection for one bimolecular channel.
    pub fn required_level(&self, channel: usize) -> Result<LevelChoice, ModelError> {
        let (d, sigma) = self.pair_parameters(channel)?;
        let hier = self.hierarchy()?;
        Ok(required_level(self.channels[channel].k, d, sigma, &hier, self.epsilon))
    }

    /// Sets every species' target level: the finest level required by any
    /// bimolecular channel it reacts in, level 0 otherwise, or its override.
    pub fn assign_target_levels(&mut self) -> Result<Vec<LevelWarning>, ModelError> {
        let hier = self.hierarchy()?;
        let mut levels = vec![0u8; self.species.len()];
        let mut warnings = Vec::new();
        for (ci, c) in self.channels.iter().enumerate() {
            if c.order() != 2 {
                continue;
            }
            let choice = self.required_level(ci)?;
            if choice.unsatisfied {
                let (d, sigma) = self.pair_parameters(ci)?;
                let error = relative_rebind_error(c.k, d, hier.h(choice.level), sigma)
                    .unwrap_or(f64::INFINITY);
                warnings.push(LevelWarning { channel: ci, level: choice.level, error });
            }
            for r in &c.reactants {
                let i = self
                    .species_index(r)
                    .ok_or_else(|| ModelError::UnknownSpecies(r.clone()))?;
                levels[i] = levels[i].max(choice.level);
            }
        }
        for (s, level) in self.species.iter_mut().zip(levels) {
            s.target_level = Some(s.override_level.unwrap_or(level));
        }
        Ok(warnings)
    }

    /// Structural checks; every problem found is reported.
    pub fn validate(&self) -> Result<(), Vec<ModelDiagnostic>> {
        let mut out = Vec::new();
        let mut err = |location, message: String| out.push(ModelDiagnostic { location, message });

        if !(self.side > 0.0 && self.side.is_finite()) {
            err(ModelLocation::Domain, format!("zero-volume or invalid domain: side = {}", self.side));
        }
        if !(self.epsilon > 0.0) {
            err(ModelLocation::Domain, format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.transfer_c > 0.0) {
            err(ModelLocation::Domain, format!("transfer_c must be positive, got {}", self.transfer_c));
        }
        if self.lmax > MAX_LEVEL {
            err(ModelLocation::Domain, format!("levels = {} exceeds the maximum {MAX_LEVEL}", self.lmax));
        }

        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, s) in self.species.iter().enumerate() {
            let loc = ModelLocation::Species(i);
            if !is_identifier(&s.name) {
                err(loc, format!("invalid species name '{}'", s.name));
            }
            if let Some(prev) = seen.insert(s.name.as_str(), i) {
                err(loc, format!("duplicate species '{}' (first defined as species #{prev})", s.name));
            }
            if !(s.d > 0.0 && s.d.is_finite()) {
                err(loc, format!("diffusion constant of '{}' must be positive, got {}", s.name, s.d));
            }
            if !(s.radius >= 0.0 && s.radius.is_finite()) {
                err(loc, format!("reaction radius of '{}' must be non-negative, got {}", s.name, s.radius));
            }
            if let Some(l) = s.override_level {
                if l > self.lmax {
                    err(loc, format!("level {l} of '{}' exceeds the finest level {}", s.name, self.lmax));
                }
            }
        }

        let h_fine = self.side / (1u64 << self.lmax.min(MAX_LEVEL)) as f64;
        for (ci, c) in self.channels.iter().enumerate() {
            let loc = ModelLocation::Channel(ci);
            if !(c.k >= 0.0 && c.k.is_finite()) {
                err(loc, format!("rate constant must be non-negative, got {}", c.k));
            }
            if c.order() > 2 {
                err(loc, format!("at most two reactants allowed, got {}", c.order()));
            }
            let mut resolved = true;
            for name in c.reactants.iter().chain(&c.products) {
                if !seen.contains_key(name.as_str()) {
                    err(loc, format!("unknown species '{name}'"));
                    resolved = false;
                }
            }
            if resolved && c.order() == 2 && c.k > 0.0 {
                let (_, sigma) = self.pair_parameters(ci).expect("resolved");
                if !(sigma > 0.0) {
                    err(loc, format!("bimolecular pair {c} has zero total reaction radius"));
                } else {
                    let hs = h_star(sigma).expect("positive sigma");
                    if h_fine < hs * (1.0 - HSTAR_TOLERANCE) && self.side > 0.0 {
                        err(
                            loc,
                            format!(
                                "hierarchy too deep: finest width {h_fine} is below h* = {hs} for {c}"
                            ),
                        );
                    }
                }
            }
        }

        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SIGMA: f64 = 0.00492;

    fn hier(lmax: u8) -> MeshHierarchy {
        MeshHierarchy::new(1.0, lmax, Boundary::Reflecting).unwrap()
    }

    #[test]
    fn g_vanishes_at_h_star() {
        let hs = 2.0 / 3.0 * PI * C3 * SIGMA;
        assert_abs_diff_eq!(g_factor(hs, SIGMA, Dimension::Three).unwrap(), 0.0, epsilon = 1e-9);
        // 1/64 is the finest mesh of the rebinding setup.
        let g = g_factor(1.0 / 64.0, SIGMA, Dimension::Three).unwrap();
        assert!(g.abs() < 0.01 / (4.0 * PI * SIGMA), "G = {g}");
    }

    #[test]
    fn g_direct_evaluation() {
        let g = g_factor(1.0 / 8.0, SIGMA, Dimension::Three).unwrap();
        assert_abs_diff_eq!(g, 16.1744 - 1.5164 / 0.75, epsilon = 1e-3);
        assert_abs_diff_eq!(g, 14.152, epsilon = 1e-3);
    }

    #[test]
    fn g_two_dimensional_branch() {
        // h = sigma sqrt(pi) zeroes the logarithm.
        let g = g_factor(PI.sqrt(), 1.0, Dimension::Two).unwrap();
        assert_abs_diff_eq!(g, -0.25 * (3.0 / (2.0 * PI) + 0.1951), epsilon = 1e-12);
        let g = g_factor(10.0 * PI.sqrt(), 1.0, Dimension::Two).unwrap();
        assert_abs_diff_eq!(g, 10f64.ln() / (2.0 * PI) - 0.25 * (3.0 / (2.0 * PI) + 0.1951), epsilon = 1e-12);
    }

    #[test]
    fn g_rejects_bad_arguments() {
        assert!(g_factor(0.0, 1.0, Dimension::Three).is_err());
        assert!(g_factor(1.0, -1.0, Dimension::Two).is_err());
        assert!(h_star(0.0).is_err());
    }

    #[test]
    fn h_star_values() {
        assert_abs_diff_eq!(h_star(SIGMA).unwrap(), 0.015626, epsilon = 1e-6);
        assert_abs_diff_eq!(h_star(1.0).unwrap(), 3.176, epsilon = 1e-3);
        assert_abs_diff_eq!(h_star(2.0 * SIGMA).unwrap(), 2.0 * h_star(SIGMA).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn rebind_error_values() {
        assert_abs_diff_eq!(relative_rebind_error(1.0, 1.0, 1.0 / 32.0, SIGMA).unwrap(), 8.087, epsilon = 0.01);
        let hs = h_star(SIGMA).unwrap();
        assert_abs_diff_eq!(relative_rebind_error(1.0, 1.0, hs, SIGMA).unwrap(), 0.0, epsilon = 1e-9);
        let w1 = relative_rebind_error(1.0, 1.0, 0.1, SIGMA).unwrap();
        let w2 = relative_rebind_error(2.0, 1.0, 0.1, SIGMA).unwrap();
        assert_abs_diff_eq!(w2, 2.0 * w1, epsilon = 1e-12);
        assert!(matches!(
            relative_rebind_error(1.0, 1.0, hs / 2.0, SIGMA),
            Err(ModelError::SubCriticalResolution { .. })
        ));
    }

    #[test]
    fn meso_rate_values() {
        let k = meso_rate(1.0, 1.0, SIGMA, 1.0 / 64.0).unwrap();
        assert!((k / 262_144.0 - 1.0).abs() < 0.01, "k = {k}");
        assert_abs_diff_eq!(meso_rate(1.0, 1.0, SIGMA, 1.0).unwrap(), 0.0591, epsilon = 1e-3);
        assert!(meso_rate(1.0, 1.0, SIGMA, 0.001).is_err());
    }

    #[test]
    fn required_level_examples() {
        let h = hier(6);
        let c = required_level(1.0, 2.0, 0.005, &h, 0.025);
        assert_eq!(c.level, 6);
        // W(1/64) with sigma = 0.005 sits inside the h* tolerance band: clamped to 0.
        assert!(!c.unsatisfied);
        assert_eq!(required_level(1.0, 2.0, SIGMA, &h, 0.025).level, 6);
        assert_eq!(required_level(0.0, 2.0, SIGMA, &h, 0.025).level, 0);
        assert_eq!(required_level(1e-12, 2.0, SIGMA, &h, 0.025).level, 0);
        assert_eq!(required_level(1.0, 2.0, SIGMA, &h, f64::INFINITY).level, 0);
        // Only five levels: nothing reaches h*.
        let c = required_level(1.0, 2.0, SIGMA, &hier(4), 0.025);
        assert_eq!(c, LevelChoice { level: 4, unsatisfied: true });
    }

    fn chain_model() -> Model {
        Model::new(1.0, 6)
            .with_species(Species::new("S1", 1.0, 0.0025).count(100))
            .with_species(Species::new("S11", 1.0, 0.0025))
            .with_species(Species::new("S12", 1.0, 0.0025))
            .with_species(Species::new("S2", 1.0, 0.0025))
            .with_reaction(ReactionChannel::new(1.0, &["S1"], &["S11", "S12"]))
            .with_reaction(ReactionChannel::new(1.0, &["S11", "S12"], &["S2"]))
    }

    #[test]
    fn chain_target_levels() {
        let mut m = chain_model();
        m.validate().unwrap();
        let warnings = m.assign_target_levels().unwrap();
        assert!(warnings.is_empty());
        let levels: Vec<_> = m.species.iter().map(|s| s.target_level.unwrap()).collect();
        assert_eq!(levels, vec![0, 6, 6, 0]);
    }

    #[test]
    fn no_bimolecular_channels_means_level_zero() {
        let mut m = Model::new(1.0, 6)
            .with_species(Species::new("A", 1.0, 0.0))
            .with_species(Species::new("B", 1.0, 0.0))
            .with_reaction(ReactionChannel::new(1.0, &["A"], &["B"]));
        m.assign_target_levels().unwrap();
        assert!(m.species.iter().all(|s| s.target_level == Some(0)));
    }

    #[test]
    fn override_wins() {
        let mut m = chain_model();
        for s in &mut m.species {
            s.override_level = Some(6);
        }
        m.assign_target_levels().unwrap();
        assert!(m.species.iter().all(|s| s.target_level == Some(6)));
    }

    #[test]
    fn unsatisfiable_tolerance_warns() {
        let mut m = chain_model();
        m.lmax = 3;
        let w = m.assign_target_levels().unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].level, 3);
        assert!(w[0].error > 0.025);
    }

    #[test]
    fn validate_examples() {
        assert!(chain_model().validate().is_ok());

        let m = chain_model().with_reaction(ReactionChannel::new(1.0, &["X"], &["S1"]));
        let diags = m.validate().unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("'X'")), "{diags:?}");

        let m = Model::new(1.0, 10)
            .with_species(Species::new("A", 1.0, 0.00246))
            .with_species(Species::new("B", 1.0, 0.00246))
            .with_reaction(ReactionChannel::new(1.0, &["A", "B"], &["A"]));
        let diags = m.validate().unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("hierarchy too deep")), "{diags:?}");

        let mut m = chain_model();
        m.side = 0.0;
        assert!(m.validate().is_err());

        let m = chain_model().with_reaction(ReactionChannel::new(-1.0, &["S2"], &[]));
        assert!(m.validate().is_err());

        let m = chain_model().with_species(Species::new("S1", 1.0, 0.0));
        assert!(m.validate().unwrap_err()[0].message.contains("duplicate"));
    }

    #[test]
    fn g_root_randomised() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1_000_000 {
            let sigma = 10f64.powf(rng.random_range(-6.0..0.0));
            let g = g_factor(h_star(sigma).unwrap(), sigma, Dimension::Three).unwrap();
            // Relative to the size of either term of G.
            assert!((g * 4.0 * PI * sigma).abs() < 1e-12, "sigma = {sigma}, G = {g}");
        }
    }

    proptest! {
        #[test]
        fn meso_rate_bounded_by_ka(k_a in 1e-3f64..1e3, d in 1e-2f64..1e2, sigma in 1e-4f64..1e-1, f in 1.0f64..1e3) {
            let hs = h_star(sigma).unwrap();
            let h = hs * f;
            let k = meso_rate(k_a, d, sigma, h).unwrap();
            prop_assert!(k > 0.0);
            prop_assert!(k * h.powi(3) <= k_a * (1.0 + 1e-12));
            if f > 1.0 + 1e-9 {
                prop_assert!(k * h.powi(3) < k_a);
            }
        }

        #[test]
        fn meso_rate_volume_product_nonincreasing(k_a in 1e-3f64..1e3, d in 1e-2f64..1e2, sigma in 1e-4f64..1e-1, f in 1.0f64..1e3, g in 1.0f64..10.0) {
            let h1 = h_star(sigma).unwrap() * f;
            let h2 = h1 * g;
            let a = meso_rate(k_a, d, sigma, h1).unwrap() * h1.powi(3);
            let b = meso_rate(k_a, d, sigma, h2).unwrap() * h2.powi(3);
            prop_assert!(b <= a * (1.0 + 1e-12));
        }

        #[test]
        fn required_level_monotone_in_tolerance(k_a in 1e-3f64..1e2, eps in 1e-4f64..10.0, extra in 0.0f64..10.0) {
            let h = hier(6);
            let a = required_level(k_a, 2.0, SIGMA, &h, eps);
            let b = required_level(k_a, 2.0, SIGMA, &h, eps + extra);
            prop_assert!(b.level <= a.level);
            if !a.unsatisfied {
                // The tolerance inequality k_a/(1+eps) < k_meso h^3 holds at the chosen level.
                let hl = h.h(a.level);
                let k = meso_rate(k_a, 2.0, SIGMA, hl).unwrap();
                prop_assert!(k_a / (1.0 + eps) <= k * hl.powi(3) * (1.0 + 1e-12));
            }
        }
    }
}
