//! Rate tables precomputed from a model with assigned target levels.

use crate::mesh::MeshHierarchy;
use crate::model::{meso_rate, Model};

use super::EngineError;

#[derive(Debug, Clone)]
pub(crate) struct SpeciesKinetics {
    pub target: u8,
    /// Coarsest level a molecule of this species can ever occupy.
    pub min_level: u8,
    /// Per-neighbour jump rate `D / h^2` on each level.
    pub jump_rate: Vec<f64>,
    /// Residence time `C h^2 / (6 D)` on each level before promotion.
    pub transfer_time: Vec<f64>,
    /// Total first-order rate and the cumulative split over channels.
    pub uni_total: f64,
    pub uni: Vec<(f64, u32)>,
    /// Reactive partner species and the bimolecular channels linking them.
    pub partners: Vec<(u32, Vec<u32>)>,
    /// Residents must be indexed for partner lookups.
    pub indexed: bool,
    /// Subtree counters are needed (some partner can sit on a coarser level).
    pub track_subtree: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct ChannelKinetics {
    pub k: f64,
    pub products: Vec<u32>,
    /// Product target levels, aligned with `products`.
    pub product_levels: Vec<u8>,
    /// Per-pair mesoscopic rate on each level (bimolecular only).
    pub pair_rate: Vec<f64>,
}

/// A validated model turned into the lookup tables the event loop needs.
#[derive(Debug, Clone)]
pub struct Kinetics {
    pub(crate) model: Model,
    pub(crate) hierarchy: MeshHierarchy,
    pub(crate) species: Vec<SpeciesKinetics>,
    pub(crate) channels: Vec<ChannelKinetics>,
    pub(crate) sources: Vec<u32>,
}

impl Kinetics {
    /// Prepares `model` for simulation. Target levels are assigned
    /// automatically if the model does not carry them yet.
    pub fn new(model: &Model) -> Result<Kinetics, EngineError> {
        model.validate().map_err(EngineError::InvalidModel)?;
        let mut model = model.clone();
        if model.species.iter().any(|s| s.target_level.is_none()) {
            model.assign_target_levels()?;
        }
        let hierarchy = model.hierarchy()?;
        let idx = |name: &str| model.species_index(name).expect("validated") as u32;
        let nlev = model.lmax as usize + 1;

        let mut species: Vec<SpeciesKinetics> = model
            .species
            .iter()
            .map(|s| {
                let target = s.target_level.expect("assigned").min(model.lmax);
                let hs = |l: usize| hierarchy.h(l as u8);
                SpeciesKinetics {
                    target,
                    min_level: if model.transfer_c.is_finite() { 0 } else { target },
                    jump_rate: (0..nlev).map(|l| s.d / (hs(l) * hs(l))).collect(),
                    transfer_time: (0..nlev)
                        .map(|l| model.transfer_c * hs(l) * hs(l) / (6.0 * s.d))
                        .collect(),
                    uni_total: 0.0,
                    uni: Vec::new(),
                    partners: Vec::new(),
                    indexed: false,
                    track_subtree: false,
                }
            })
            .collect();

        let mut channels = Vec::with_capacity(model.channels.len());
        let mut sources = Vec::new();
        for (ci, c) in model.channels.iter().enumerate() {
            let reactants: Vec<u32> = c.reactants.iter().map(|r| idx(r)).collect();
            let products: Vec<u32> = c.products.iter().map(|p| idx(p)).collect();
            let product_levels = products.iter().map(|&p| species[p as usize].target).collect();
            let mut pair_rate = Vec::new();
            match reactants.len() {
                0 => {
                    if c.k > 0.0 {
                        sources.push(ci as u32);
                    }
                }
                1 => {
                    if c.k > 0.0 {
                        let s = &mut species[reactants[0] as usize];
                        s.uni_total += c.k;
                        let cum = s.uni_total;
                        s.uni.push((cum, ci as u32));
                    }
                }
                _ => {
                    if c.k > 0.0 {
                        let (d, sigma) = model.pair_parameters(ci)?;
                        for l in hierarchy.levels() {
                            // Levels below h* cannot host this pair; validation keeps
                            // them out of the hierarchy up to the tolerance band.
                            pair_rate.push(meso_rate(c.k, d, sigma, hierarchy.h(l)).unwrap_or(f64::NAN));
                        }
                        let (a, b) = (reactants[0], reactants[1]);
                        add_partner(&mut species[a as usize], b, ci as u32);
                        if a != b {
                            add_partner(&mut species[b as usize], a, ci as u32);
                        }
                    }
                }
            }
            channels.push(ChannelKinetics { k: c.k, products, product_levels, pair_rate });
        }

        let lo: Vec<u8> = species.iter().map(|s| s.min_level).collect();
        for s in &mut species {
            s.indexed = !s.partners.is_empty();
        }
        // Species p needs subtree counts when a partner q can be coarser than p.
        for p in 0..species.len() {
            let max_p = species[p].target;
            let track = species[p].partners.iter().any(|&(q, _)| lo[q as usize] < max_p);
            species[p].track_subtree = track;
        }

        Ok(Kinetics { model, hierarchy, species, channels, sources })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn hierarchy(&self) -> &MeshHierarchy {
        &self.hierarchy
    }

    /// Target level assigned to species `s`.
    pub fn target_level(&self, s: usize) -> u8 {
        self.species[s].target
    }

    /// Mesoscopic pair rate of bimolecular channel `c` on `level`.
    pub fn pair_rate(&self, c: usize, level: u8) -> Option<f64> {
        self.channels[c].pair_rate.get(level as usize).copied()
    }
}

fn add_partner(s: &mut SpeciesKinetics, partner: u32, channel: u32) {
    match s.partners.iter_mut().find(|(p, _)| *p == partner) {
        Some((_, chans)) => chans.push(channel),
        None => s.partners.push((partner, vec![channel])),
    }
}
