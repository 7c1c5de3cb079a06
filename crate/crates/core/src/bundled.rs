//! Model files shipped with the crate.

use crate::model::Model;
use crate::modelio::parse_model;

/// Reversible binding `S1 + S2 <-> S3`, pair radius 0.00492, pair diffusion 2.
pub const FIRST_SYSTEM: &str = include_str!("../models/first_system.rdm");
/// `S1 -> S11 + S12 -> S2`.
pub const REBIND_ONE: &str = include_str!("../models/rebind_one.rdm");
/// Two dissociation/rebinding stages, ending in `S3`.
pub const REBIND_DOUBLE: &str = include_str!("../models/rebind_double.rdm");
/// MAPK phosphorylation cycle, all species on the finest level.
pub const MAPK: &str = include_str!("../models/mapk.rdm");

/// `(name, source)` for every bundled file.
pub const ALL: [(&str, &str); 4] = [
    ("first_system", FIRST_SYSTEM),
    ("rebind_one", REBIND_ONE),
    ("rebind_double", REBIND_DOUBLE),
    ("mapk", MAPK),
];

/// Parses a bundled model by name.
pub fn load(name: &str) -> Option<Model> {
    let (_, src) = ALL.iter().find(|(n, _)| *n == name)?;
    Some(parse_model(src).expect("bundled models are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelio::serialize_model;

    #[test]
    fn all_bundled_models_parse_and_round_trip() {
        for (name, src) in ALL {
            let m = parse_model(src).unwrap_or_else(|d| panic!("{name}: {d:?}"));
            assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m, "{name}");
        }
        assert!(load("nope").is_none());
    }

    #[test]
    fn rebind_one_levels() {
        let mut m = load("rebind_one").unwrap();
        m.assign_target_levels().unwrap();
        let lv: Vec<_> = m.species.iter().map(|s| (s.name.as_str(), s.target_level.unwrap())).collect();
        assert_eq!(lv, vec![("S1", 0), ("S11", 6), ("S12", 6), ("S2", 0)]);
    }

    #[test]
    fn mapk_everything_on_finest_level() {
        let mut m = load("mapk").unwrap();
        m.assign_target_levels().unwrap();
        assert!(m.species.iter().all(|s| s.target_level == Some(6)));
        assert_eq!(m.channels.len(), 14);
        assert!(m.channels.iter().any(|c| c.k == 693147.18));
    }

    #[test]
    fn first_system_pair_parameters() {
        let m = load("first_system").unwrap();
        let (d, sigma) = m.pair_parameters(0).unwrap();
        assert_eq!(d, 2.0);
        assert!((sigma - 0.00492).abs() < 1e-15);
    }
}
