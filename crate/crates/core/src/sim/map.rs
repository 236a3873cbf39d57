use serde::{Deserialize, Serialize};

use super::geometry::{Segment, Vec2};
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    pub segments: Vec<Segment>,
}

/// Square arena `[-h, h]^2` with enclosed regions drawn as line segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub half_extent: f64,
    #[serde(default)]
    pub zones: Vec<Zone>,
}

fn seg(a: [f64; 2], b: [f64; 2]) -> Segment {
    Segment::new(a.into(), b.into())
}

impl Default for MapSpec {
    fn default() -> Self {
        Self::reference()
    }
}

impl MapSpec {
    /// The 3 m x 3 m arena with its four taped regions.
    pub fn reference() -> Self {
        let zones = vec![
            Zone {
                name: "zone_left_down".into(),
                segments: vec![
                    seg([0.0, 0.0], [-1.0, 0.0]),
                    seg([-1.0, 0.0], [-1.0, -1.0]),
                    seg([-1.0, -1.0], [0.0, -1.0]),
                    seg([0.0, -1.0], [0.0, -0.75]),
                    seg([0.0, -0.75], [-0.57, -0.75]),
                    seg([-0.57, -0.75], [-0.57, -0.3]),
                    seg([-0.57, -0.3], [0.0, -0.3]),
                    seg([0.0, -0.3], [0.0, 0.0]),
                ],
            },
            Zone {
                name: "zone_left_up".into(),
                segments: vec![
                    seg([0.0, 0.4], [0.0, 1.0]),
                    seg([0.0, 1.0], [-1.0, 1.0]),
                    seg([-1.0, 1.0], [-1.0, 0.4]),
                    seg([-1.0, 0.4], [0.0, 0.4]),
                ],
            },
            Zone {
                name: "zone_right_up".into(),
                segments: vec![
                    seg([0.5, 0.0], [1.0, 0.0]),
                    seg([1.0, 0.0], [1.0, 1.0]),
                    seg([1.0, 1.0], [0.5, 1.0]),
                    seg([0.5, 1.0], [0.5, 0.0]),
                ],
            },
            Zone {
                name: "zone_right_down".into(),
                segments: vec![
                    seg([0.5, -1.0], [0.5, -0.5]),
                    seg([0.5, -0.5], [1.0, -0.5]),
                    seg([1.0, -0.5], [1.0, -1.0]),
                    seg([1.0, -1.0], [0.5, -1.0]),
                ],
            },
        ];
        Self { half_extent: 1.5, zones }
    }

    pub fn empty(half_extent: f64) -> Self {
        Self { half_extent, zones: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.half_extent > 0.0) {
            return Err(SimError::Config("map half-extent must be positive".into()));
        }
        for zone in &self.zones {
            for (i, s) in zone.segments.iter().enumerate() {
                if !(s.length() > 0.0) {
                    return Err(SimError::Config(format!("{} segment {i} has zero length", zone.name)));
                }
                if !self.contains(s.a) || !self.contains(s.b) {
                    return Err(SimError::Config(format!(
                        "{} segment {i} leaves the boundary square",
                        zone.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Closed containment in the boundary square.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x.abs() <= self.half_extent && p.y.abs() <= self.half_extent
    }

    pub fn zone_segments(&self) -> impl Iterator<Item = &Segment> {
        self.zones.iter().flat_map(|z| z.segments.iter())
    }

    pub fn boundary_segments(&self) -> [Segment; 4] {
        let h = self.half_extent;
        [
            seg([h, -h], [h, h]),
            seg([h, h], [-h, h]),
            seg([-h, h], [-h, -h]),
            seg([-h, -h], [h, -h]),
        ]
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let map: MapSpec = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        map.validate()?;
        Ok(map)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("map serialises")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SimError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
