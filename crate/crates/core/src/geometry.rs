//! Planar shapes and signed distances between effector geometries and the
//! circular pushed object.
//!
//! Supported pairs: circle effector vs circle object and rectangle effector
//! vs circle object. The object is always a circle, so every query reduces
//! to a point-to-shape distance minus the object radius. A distance of zero
//! counts as contact.

use nalgebra::{Rotation2, Vector2};

/// Circular geometry for an effector or the pushed object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleGeom {
    pub radius: f64,
}

impl CircleGeom {
    /// Panics if `radius` is not strictly positive.
    pub fn new(radius: f64) -> Self {
        assert!(radius > 0.0, "circle radius must be positive, got {radius}");
        Self { radius }
    }
}

/// Axis-aligned rectangle in its local frame, described by half-extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectGeom {
    pub half_extents: (f64, f64),
}

impl RectGeom {
    /// Panics unless both half-extents are strictly positive.
    pub fn new(hx: f64, hy: f64) -> Self {
        assert!(
            hx > 0.0 && hy > 0.0,
            "rectangle half-extents must be positive, got ({hx}, {hy})"
        );
        Self { half_extents: (hx, hy) }
    }
}

/// Effector geometry: a ball fingertip or a rectangular hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectorShape {
    Circle(CircleGeom),
    Rect(RectGeom),
}

impl EffectorShape {
    pub fn circle(radius: f64) -> Self {
        Self::Circle(CircleGeom::new(radius))
    }

    pub fn rect(hx: f64, hy: f64) -> Self {
        Self::Rect(RectGeom::new(hx, hy))
    }

    /// Number of commanded degrees of freedom: circles carry (x, y),
    /// rectangles add yaw.
    pub fn dof(&self) -> usize {
        match self {
            Self::Circle(_) => 2,
            Self::Rect(_) => 3,
        }
    }

    /// Radius of the smallest origin-centered disk containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Self::Circle(c) => c.radius,
            Self::Rect(r) => r.half_extents.0.hypot(r.half_extents.1),
        }
    }
}

/// Commanded pose of one effector. Yaw is meaningful for rectangles only and
/// is kept normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectorPose {
    pub position: Vector2<f64>,
    pub yaw: f64,
}

impl EffectorPose {
    pub fn new(position: Vector2<f64>, yaw: f64) -> Self {
        Self { position, yaw: normalize_angle(yaw) }
    }

    pub fn at(x: f64, y: f64) -> Self {
        Self::new(Vector2::new(x, y), 0.0)
    }
}

/// Wrap an angle to (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let r = (PI - a).rem_euclid(2.0 * PI);
    PI - r
}

/// Result of a distance query between one effector and the object.
#[derive(Debug, Clone, Copy)]
pub struct ContactInfo {
    /// Shortest signed distance; negative means overlap, zero counts as contact.
    pub signed_distance: f64,
    /// Unit vector along which the object separates from the effector. Points
    /// from the effector surface toward the object center; for an object
    /// center inside a rectangle it is the outward normal of the nearest face.
    pub normal: Vector2<f64>,
    /// Closest point on the effector boundary to the object center.
    pub witness_point: Vector2<f64>,
}

impl ContactInfo {
    /// Object center position at which the pair would exactly touch, reached
    /// by the minimal Euclidean displacement from the queried center.
    pub fn resolved_center(&self, obj_radius: f64) -> Vector2<f64> {
        self.witness_point + self.normal * obj_radius
    }
}

/// Shortest signed distance between an effector at `pose` and a circular
/// object of radius `obj_radius` centered at `obj_center`.
pub fn signed_distance(
    shape: &EffectorShape,
    pose: &EffectorPose,
    obj_center: &Vector2<f64>,
    obj_radius: f64,
) -> ContactInfo {
    match shape {
        EffectorShape::Circle(c) => circle_distance(c, pose, obj_center, obj_radius),
        EffectorShape::Rect(r) => rect_distance(r, pose, obj_center, obj_radius),
    }
}

fn circle_distance(
    geom: &CircleGeom,
    pose: &EffectorPose,
    obj_center: &Vector2<f64>,
    obj_radius: f64,
) -> ContactInfo {
    let delta = obj_center - pose.position;
    let dist = delta.norm();
    // Coincident centers leave the direction undefined; fix it along +x.
    let normal = if dist > 1e-12 { delta / dist } else { Vector2::new(1.0, 0.0) };
    ContactInfo {
        signed_distance: dist - geom.radius - obj_radius,
        normal,
        witness_point: pose.position + normal * geom.radius,
    }
}

fn rect_distance(
    geom: &RectGeom,
    pose: &EffectorPose,
    obj_center: &Vector2<f64>,
    obj_radius: f64,
) -> ContactInfo {
    let (hx, hy) = geom.half_extents;
    let rot = Rotation2::new(pose.yaw);
    let local = rot.inverse() * (obj_center - pose.position);
    let clamped = Vector2::new(local.x.clamp(-hx, hx), local.y.clamp(-hy, hy));
    let diff = local - clamped;
    let dist = diff.norm();

    let (signed, normal_local, witness_local) = if dist > 1e-12 {
        // Center outside the rectangle: nearest boundary point is the clamp.
        (dist - obj_radius, diff / dist, clamped)
    } else {
        // Center inside (or exactly on the boundary): escape through the
        // nearest face, ties broken in the fixed order +x, +y, -x, -y.
        let faces = [
            (hx - local.x, Vector2::new(1.0, 0.0), Vector2::new(hx, local.y)),
            (hy - local.y, Vector2::new(0.0, 1.0), Vector2::new(local.x, hy)),
            (local.x + hx, Vector2::new(-1.0, 0.0), Vector2::new(-hx, local.y)),
            (local.y + hy, Vector2::new(0.0, -1.0), Vector2::new(local.x, -hy)),
        ];
        let mut best = &faces[0];
        for f in &faces[1..] {
            if f.0 < best.0 {
                best = f;
            }
        }
        (-(best.0 + obj_radius), best.1, best.2)
    };

    ContactInfo {
        signed_distance: signed,
        normal: rot * normal_local,
        witness_point: pose.position + rot * witness_local,
    }
}

/// Orthonormal contact frame: the normal paired with its +90 degree rotation,
/// so (normal, tangent) is right-handed.
pub fn contact_frame(info: &ContactInfo) -> (Vector2<f64>, Vector2<f64>) {
    let n = info.normal;
    (n, Vector2::new(-n.y, n.x))
}

/// Signed distance between two effectors, used for collision penalties.
/// Exact for circle pairs; rectangles are approximated by their bounding
/// disks, which is conservative.
pub fn effector_pair_distance(
    a: &EffectorShape,
    pa: &EffectorPose,
    b: &EffectorShape,
    pb: &EffectorPose,
) -> f64 {
    match (a, b) {
        (EffectorShape::Circle(ca), EffectorShape::Circle(cb)) => {
            (pa.position - pb.position).norm() - ca.radius - cb.radius
        }
        _ => (pa.position - pb.position).norm() - a.bounding_radius() - b.bounding_radius(),
    }
}
