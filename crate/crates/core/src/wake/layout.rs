use std::fmt::Write as _;
use std::path::Path;

use super::{normalize_deg, TurbineSpec};
use crate::error::{Error, Result};

/// Turbine positions plus the metadata an environment needs to run them.
///
/// The text format is one header line of `key=value` tokens followed by one
/// `x_m y_m` line per turbine:
///
/// ```text
/// name=Turb3_Row1 diameter=126 prevailing_dir=270
/// 0 0
/// 504 0
/// 1008 0
/// ```
///
/// `name` and `diameter` are required. `prevailing_dir`, `hub_height`,
/// `load_scale_static` and `load_scale_dynamic` are optional. Lines starting
/// with `#` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmLayout {
    pub name: String,
    pub positions: Vec<(f64, f64)>,
    pub turbine: TurbineSpec,
    /// Dominant wind direction at the site, degrees (meteorological).
    pub prevailing_dir: f64,
    /// Downscaling constant for the static load proxy.
    pub load_scale_static: Option<f64>,
    /// Downscaling constant for the dynamic blade-moment penalty.
    pub load_scale_dynamic: Option<f64>,
}

impl FarmLayout {
    pub fn new(name: impl Into<String>, positions: Vec<(f64, f64)>, turbine: TurbineSpec) -> Result<Self> {
        let layout = Self {
            name: name.into(),
            positions,
            turbine,
            prevailing_dir: 270.0,
            load_scale_static: None,
            load_scale_dynamic: None,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.turbine.validate()?;
        if self.positions.is_empty() {
            return Err(Error::contract(format!("layout `{}` has no turbines", self.name)));
        }
        let d = self.turbine.rotor_diameter_m;
        for (i, a) in self.positions.iter().enumerate() {
            if !(a.0.is_finite() && a.1.is_finite()) {
                return Err(Error::domain(format!("turbine {i} has a non-finite position")));
            }
            for (j, b) in self.positions.iter().enumerate().skip(i + 1) {
                let dist = (a.0 - b.0).hypot(a.1 - b.1);
                if dist < d * (1.0 - 1e-9) {
                    return Err(Error::contract(format!(
                        "turbines {i} and {j} are {dist:.1} m apart, less than one rotor diameter"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Euclidean hub distance between two turbines.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        (a.0 - b.0).hypot(a.1 - b.1)
    }

    /// Positions expressed in the wind-aligned frame for direction `phi_deg`.
    pub fn wind_coordinates(&self, phi_deg: f64) -> Vec<(f64, f64)> {
        let frame = WindFrame::new(phi_deg);
        self.positions.iter().map(|&p| frame.project(p)).collect()
    }

    /// Turbine indices sorted by downstream coordinate, ties broken by index.
    pub fn downstream_order(&self, phi_deg: f64) -> Vec<usize> {
        let coords = self.wind_coordinates(phi_deg);
        let mut order: Vec<usize> = (0..self.len()).collect();
        // sort_by is stable, so equal projections keep index order
        order.sort_by(|&a, &b| coords[a].0.partial_cmp(&coords[b].0).unwrap_or(std::cmp::Ordering::Equal));
        order
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (header_line, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty layout file".into() })?;

        let mut name = None;
        let mut turbine = TurbineSpec::default();
        let mut have_diameter = false;
        let mut prevailing_dir = 270.0;
        let mut load_scale_static = None;
        let mut load_scale_dynamic = None;
        for token in header.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| Error::Parse {
                line: header_line,
                msg: format!("expected key=value, got `{token}`"),
            })?;
            let number = || -> Result<f64> {
                value.parse::<f64>().map_err(|e| Error::Parse { line: header_line, msg: format!("{key}: {e}") })
            };
            match key {
                "name" => name = Some(value.to_string()),
                "diameter" => {
                    turbine.rotor_diameter_m = number()?;
                    have_diameter = true;
                }
                "hub_height" => turbine.hub_height_m = number()?,
                "prevailing_dir" => prevailing_dir = normalize_deg(number()?),
                "load_scale_static" => load_scale_static = Some(number()?),
                "load_scale_dynamic" => load_scale_dynamic = Some(number()?),
                other => {
                    return Err(Error::Parse { line: header_line, msg: format!("unknown header key `{other}`") })
                }
            }
        }
        let name = name.ok_or(Error::Parse { line: header_line, msg: "missing name=".into() })?;
        if !have_diameter {
            return Err(Error::Parse { line: header_line, msg: "missing diameter=".into() });
        }

        let mut positions = Vec::new();
        for (line, row) in lines {
            let mut cols = row.split_whitespace();
            let mut coord = || -> Result<f64> {
                cols.next()
                    .ok_or(Error::Parse { line, msg: "expected `x_m y_m`".into() })?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line, msg: e.to_string() })
            };
            let x = coord()?;
            let y = coord()?;
            if cols.next().is_some() {
                return Err(Error::Parse { line, msg: "trailing columns".into() });
            }
            positions.push((x, y));
        }

        let layout =
            Self { name, positions, turbine, prevailing_dir, load_scale_static, load_scale_dynamic };
        layout.validate()?;
        Ok(layout)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "name={} diameter={} prevailing_dir={}",
            self.name, self.turbine.rotor_diameter_m, self.prevailing_dir
        );
        if self.turbine.hub_height_m != TurbineSpec::default().hub_height_m {
            let _ = write!(out, " hub_height={}", self.turbine.hub_height_m);
        }
        if let Some(c) = self.load_scale_static {
            let _ = write!(out, " load_scale_static={c:e}");
        }
        if let Some(c) = self.load_scale_dynamic {
            let _ = write!(out, " load_scale_dynamic={c:e}");
        }
        out.push('\n');
        for (x, y) in &self.positions {
            let _ = writeln!(out, "{x} {y}");
        }
        out
    }
}

/// Orthonormal basis aligned with the incoming wind.
///
/// `x` points downwind, `y` is `x` rotated 90° counter-clockwise. For a
/// westerly wind (270°) the frame coincides with the site frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindFrame {
    pub downwind: (f64, f64),
    pub crosswind: (f64, f64),
}

impl WindFrame {
    pub fn new(phi_deg: f64) -> Self {
        let (s, c) = phi_deg.to_radians().sin_cos();
        Self { downwind: (-s, -c), crosswind: (c, -s) }
    }

    pub fn project(&self, p: (f64, f64)) -> (f64, f64) {
        (p.0 * self.downwind.0 + p.1 * self.downwind.1, p.0 * self.crosswind.0 + p.1 * self.crosswind.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROW: &str = "name=Turb3_Row1 diameter=126 prevailing_dir=270\n0 0\n504 0\n1008 0\n";

    #[test]
    fn parses_header_and_rows() {
        let l = FarmLayout::parse(ROW).unwrap();
        assert_eq!(l.name, "Turb3_Row1");
        assert_eq!(l.len(), 3);
        assert_eq!(l.positions[1], (504.0, 0.0));
        assert_eq!(l.prevailing_dir, 270.0);
        assert_eq!(FarmLayout::parse(&l.to_text()).unwrap(), l);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(FarmLayout::parse("").is_err());
        assert!(FarmLayout::parse("name=a\n0 0\n").is_err());
        assert!(FarmLayout::parse("diameter=126\n0 0\n").is_err());
        assert!(FarmLayout::parse("name=a diameter=126\n0\n").is_err());
        assert!(FarmLayout::parse("name=a diameter=126 colour=red\n0 0\n").is_err());
        // two rotors closer than one diameter
        assert!(FarmLayout::parse("name=a diameter=126\n0 0\n100 0\n").is_err());
        assert!(FarmLayout::parse("name=a diameter=126\n").is_err());
    }

    #[test]
    fn westerly_frame_is_identity() {
        let f = WindFrame::new(270.0);
        let (x, y) = f.project((3.0, 4.0));
        assert!((x - 3.0).abs() < 1e-12 && (y - 4.0).abs() < 1e-12);
        // northerly wind blows towards -y
        let f = WindFrame::new(0.0);
        let (x, _) = f.project((0.0, -10.0));
        assert!((x - 10.0).abs() < 1e-12);
    }

    #[test]
    fn order_is_stable_for_ties() {
        let l = FarmLayout::parse(ROW).unwrap();
        assert_eq!(l.downstream_order(270.0), vec![0, 1, 2]);
        assert_eq!(l.downstream_order(90.0), vec![2, 1, 0]);
        assert_eq!(l.downstream_order(0.0), vec![0, 1, 2]);
    }
}
