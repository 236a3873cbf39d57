use super::geometry::{ray_segment_param, Vec2};
use super::map::MapSpec;
use super::SimError;

/// Casts `rays` equally spaced rays starting at `heading` and returns the
/// nearest world-frame hit of each against zone segments and the boundary.
/// A ray leaving outward from a point on the boundary reports that point.
pub fn lidar_scan(position: Vec2, heading: f64, map: &MapSpec, rays: usize) -> Result<Vec<Vec2>, SimError> {
    if !map.contains(position) {
        return Err(SimError::Domain(format!(
            "lidar origin ({}, {}) lies outside the map",
            position.x, position.y
        )));
    }
    let boundary = map.boundary_segments();
    let h = map.half_extent;
    let step = 2.0 * std::f64::consts::PI / rays as f64;
    (0..rays)
        .map(|k| {
            let dir = Vec2::from_angle(heading + k as f64 * step);
            map.zone_segments()
                .chain(boundary.iter())
                .filter_map(|s| ray_segment_param(position, dir, s))
                .min_by(|a, b| a.total_cmp(b))
                .map(|t| position + dir * t)
                .map(|p| Vec2::new(p.x.clamp(-h, h), p.y.clamp(-h, h)))
                .unwrap_or(position)
        })
        .map(Ok)
        .collect()
}

pub fn flatten(points: &[Vec2]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::geometry::Segment;
    use crate::sim::map::Zone;

    #[test]
    fn empty_map_hits_boundary() {
        let map = MapSpec::empty(1.5);
        let pts = lidar_scan(Vec2::new(0.0, 0.0), 0.0, &map, 20).unwrap();
        assert_eq!(pts.len(), 20);
        assert_eq!(pts[0], Vec2::new(1.5, 0.0));
        for p in &pts {
            assert!((p.x.abs() - 1.5).abs() < 1e-12 || (p.y.abs() - 1.5).abs() < 1e-12);
        }
        assert_eq!(flatten(&pts).len(), 40);
    }

    #[test]
    fn zone_segment_blocks_first_ray() {
        let mut map = MapSpec::empty(1.5);
        map.zones.push(Zone {
            name: "wall".into(),
            segments: vec![Segment::new(Vec2::new(0.5, -0.2), Vec2::new(0.5, 0.2))],
        });
        let pts = lidar_scan(Vec2::new(0.0, 0.0), 0.0, &map, 20).unwrap();
        assert_eq!(pts[0], Vec2::new(0.5, 0.0));
    }

    #[test]
    fn origin_outside_map_is_rejected() {
        let map = MapSpec::reference();
        assert!(lidar_scan(Vec2::new(1.6, 0.0), 0.0, &map, 20).is_err());
    }
}
