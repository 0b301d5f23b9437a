use crate::geometry::{OrientedRect, Segment};

use super::vehicle::{VehicleParams, VehicleState};

/// Everything the ego can hit or see: static wall segments and traffic bodies.
#[derive(Debug, Clone, Default)]
pub struct ObstacleSet {
    pub segments: Vec<Segment>,
    pub rects: Vec<OrientedRect>,
}

impl ObstacleSet {
    pub fn new(segments: Vec<Segment>, rects: Vec<OrientedRect>) -> Self {
        Self { segments, rects }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.rects.is_empty()
    }

    /// All obstacle boundaries as segments (rectangles contribute 4 edges).
    pub fn boundary_segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.segments
            .iter()
            .copied()
            .chain(self.rects.iter().flat_map(|r| r.edges()))
    }
}

/// True iff the ego body rectangle touches or overlaps any obstacle.
pub fn check_collision(state: &VehicleState, params: &VehicleParams, obstacles: &ObstacleSet) -> bool {
    let body = state.body(params);
    obstacles.segments.iter().any(|s| body.intersects_segment(s))
        || obstacles.rects.iter().any(|r| body.intersects_rect(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    #[test]
    fn empty_set_never_collides() {
        let s = VehicleState::default();
        assert!(!check_collision(&s, &VehicleParams::default(), &ObstacleSet::default()));
    }

    #[test]
    fn wall_through_body_center() {
        let params = VehicleParams::default();
        let s = VehicleState::at(Vec2::new(10.0, 5.0), 0.7);
        let c = s.body(&params).center;
        let wall = Segment::new(c + Vec2::new(-20.0, 3.0), c + Vec2::new(20.0, -3.0));
        assert!(check_collision(&s, &params, &ObstacleSet::new(vec![wall], vec![])));
    }

    #[test]
    fn traffic_rect_overlap() {
        let params = VehicleParams::default();
        let s = VehicleState::default();
        let near = OrientedRect {
            center: Vec2::new(4.5, 0.0),
            heading: 1.2,
            half_length: 2.0,
            half_width: 0.9,
        };
        let far = OrientedRect {
            center: Vec2::new(20.0, 0.0),
            ..near
        };
        assert!(check_collision(&s, &params, &ObstacleSet::new(vec![], vec![near])));
        assert!(!check_collision(&s, &params, &ObstacleSet::new(vec![], vec![far])));
    }
}
