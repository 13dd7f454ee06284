//! Layouts shipped with the crate, one data file per farm.

use super::{FarmLayout, TurbineSpec};
use crate::error::{Error, Result};

const LAYOUTS: &[(&str, &str)] = &[
    ("Ablaincourt", include_str!("../../data/layouts/Ablaincourt.txt")),
    ("Turb16_TCRWP", include_str!("../../data/layouts/Turb16_TCRWP.txt")),
    ("Turb6_Row2", include_str!("../../data/layouts/Turb6_Row2.txt")),
    ("Turb16_Row5", include_str!("../../data/layouts/Turb16_Row5.txt")),
    ("Turb32_Row5", include_str!("../../data/layouts/Turb32_Row5.txt")),
    ("Turb1_Row1", include_str!("../../data/layouts/Turb1_Row1.txt")),
    ("Turb2_Row1", include_str!("../../data/layouts/Turb2_Row1.txt")),
    ("Turb3_Row1", include_str!("../../data/layouts/Turb3_Row1.txt")),
    ("Turb4_Row1", include_str!("../../data/layouts/Turb4_Row1.txt")),
    ("Turb5_Row1", include_str!("../../data/layouts/Turb5_Row1.txt")),
    ("Turb6_Row1", include_str!("../../data/layouts/Turb6_Row1.txt")),
    ("Turb7_Row1", include_str!("../../data/layouts/Turb7_Row1.txt")),
    ("Turb8_Row1", include_str!("../../data/layouts/Turb8_Row1.txt")),
    ("Turb9_Row1", include_str!("../../data/layouts/Turb9_Row1.txt")),
    ("Turb10_Row1", include_str!("../../data/layouts/Turb10_Row1.txt")),
    ("Turb11_Row1", include_str!("../../data/layouts/Turb11_Row1.txt")),
    ("Turb12_Row1", include_str!("../../data/layouts/Turb12_Row1.txt")),
    ("Ormonde", include_str!("../../data/layouts/Ormonde.txt")),
    ("WMR", include_str!("../../data/layouts/WMR.txt")),
    ("HornsRev1", include_str!("../../data/layouts/HornsRev1.txt")),
    ("HornsRev2", include_str!("../../data/layouts/HornsRev2.txt")),
];

/// Spacing of the procedurally generated single-row layouts, in rotor diameters.
const ROW_SPACING_D: f64 = 4.0;

/// Names of every registered layout.
pub fn layout_names() -> impl Iterator<Item = &'static str> {
    LAYOUTS.iter().map(|(name, _)| *name)
}

pub fn registered_layout(name: &str) -> Result<FarmLayout> {
    let (_, text) = LAYOUTS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownLayout(name.to_string()))?;
    FarmLayout::parse(text)
}

/// A row of `n` turbines along +x spaced four diameters apart, facing a westerly wind.
///
/// # Panics
///
/// If `n` is 0.
pub fn row_layout(n: usize) -> FarmLayout {
    assert!(n > 0, "a row needs at least one turbine");
    let spec = TurbineSpec::default();
    let spacing = ROW_SPACING_D * spec.rotor_diameter_m;
    let positions = (0..n).map(|i| (i as f64 * spacing, 0.0)).collect();
    FarmLayout::new(format!("Turb{n}_Row1"), positions, spec).expect("row layouts are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_counts_match_the_registry_table() {
        let expected = [
            ("Ablaincourt", 7),
            ("Turb16_TCRWP", 16),
            ("Turb6_Row2", 6),
            ("Turb16_Row5", 16),
            ("Turb32_Row5", 32),
            ("Ormonde", 30),
            ("WMR", 35),
            ("HornsRev1", 80),
            ("HornsRev2", 91),
        ];
        for (name, m) in expected {
            let layout = registered_layout(name).unwrap();
            assert_eq!(layout.len(), m, "{name}");
            assert_eq!(layout.name, name);
        }
        for n in 1..=12 {
            let shipped = registered_layout(&format!("Turb{n}_Row1")).unwrap();
            assert_eq!(shipped.positions, row_layout(n).positions);
        }
    }

    #[test]
    fn unknown_layout_is_an_error() {
        assert!(matches!(registered_layout("Turb13_Row1"), Err(Error::UnknownLayout(_))));
    }
}
