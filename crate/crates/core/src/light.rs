//! Light-direction math.
//!
//! A light angle is the polar direction from a shadow toward the object that
//! casts it, measured with `atan2` in image coordinates (y grows downward, no
//! axis flipping) and kept in the principal range `(-pi, pi]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::PairedAssociation;
use crate::geometry::BBox;
use crate::mask::{rasterize_convex_polygon, Mask, MaskError};

#[derive(Debug, Error, PartialEq)]
pub enum LightError {
    #[error("angle {0} is not a finite number")]
    NonFiniteAngle(f64),

    #[error("angle {0} outside the principal range (-pi, pi]")]
    OutOfRange(f64),

    #[error("shadow and object centroids coincide; direction is undefined")]
    CoincidentPoints,

    #[error("cannot aggregate an empty set of directions")]
    NoDirections,

    #[error("directions cancel out; circular mean is undefined")]
    ZeroResultant,

    #[error("object height and length scale must be positive and finite, got height {height}, scale {scale}")]
    NonPositiveExtent { height: f64, scale: f64 },

    #[error("object footprint has zero width or height")]
    DegenerateFootprint,
}

/// Maps any finite angle into `(-pi, pi]`. Values already in range are
/// returned bit-identically; `-pi` maps to `pi`.
pub fn normalize_angle(theta: f64) -> Result<f64, LightError> {
    if !theta.is_finite() {
        return Err(LightError::NonFiniteAngle(theta));
    }
    if theta > -std::f64::consts::PI && theta <= std::f64::consts::PI {
        return Ok(theta);
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = (theta + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    Ok(if wrapped <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        wrapped
    })
}

/// Polar angle in the principal range `(-pi, pi]`.
///
/// Serialized as a plain number (radians); out-of-range values are rejected
/// on deserialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LightAngle(f64);

impl TryFrom<f64> for LightAngle {
    type Error = LightError;

    fn try_from(theta: f64) -> Result<Self, LightError> {
        LightAngle::new(theta)
    }
}

impl From<LightAngle> for f64 {
    fn from(a: LightAngle) -> f64 {
        a.0
    }
}

impl LightAngle {
    /// Accepts only angles already in `(-pi, pi]`.
    pub fn new(theta: f64) -> Result<Self, LightError> {
        if !theta.is_finite() {
            return Err(LightError::NonFiniteAngle(theta));
        }
        if theta <= -std::f64::consts::PI || theta > std::f64::consts::PI {
            return Err(LightError::OutOfRange(theta));
        }
        Ok(LightAngle(theta))
    }

    /// Wraps any finite angle into the principal range first.
    pub fn normalized(theta: f64) -> Result<Self, LightError> {
        Ok(LightAngle(normalize_angle(theta)?))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

/// Direction from the shadow centroid toward the object centroid:
/// `atan2(y_o - y_s, x_o - x_s)`, in `(-pi, pi]`.
pub fn ground_truth_angle(
    shadow_centroid: (f64, f64),
    object_centroid: (f64, f64),
) -> Result<LightAngle, LightError> {
    let dx = object_centroid.0 - shadow_centroid.0;
    let dy = object_centroid.1 - shadow_centroid.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(LightError::CoincidentPoints);
    }
    // atan2 returns [-pi, pi]; normalization folds the -pi edge to +pi.
    LightAngle::normalized(dy.atan2(dx))
}

/// Difference `a - b` folded into `(-pi, pi]`.
pub fn wrap_delta(delta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = (delta + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if wrapped <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        wrapped
    }
}

/// Smooth-L1 penalty between predicted and reference angles (radians).
///
/// With `d = theta_p - theta_g` (folded into `(-pi, pi]` when `wrap` is on,
/// raw otherwise): `0.5 * d^2` for `|d| < 1`, else `|d| - 0.5`. The raw mode
/// reproduces the penalty exactly as usually written; the wrapped mode keeps
/// it honest across the `+-pi` seam, where equivalent angles would otherwise
/// be charged almost a full turn.
pub fn light_loss(theta_p: f64, theta_g: f64, wrap: bool) -> f64 {
    let mut d = theta_p - theta_g;
    if wrap {
        d = wrap_delta(d);
    }
    let a = d.abs();
    if a < 1.0 {
        0.5 * d * d
    } else {
        a - 0.5
    }
}

/// Direction from the shadow box center toward the object box center.
pub fn estimate_pair_direction(pair: &PairedAssociation) -> Result<LightAngle, LightError> {
    ground_truth_angle(pair.shadow.bbox.center(), pair.object.bbox.center())
}

/// Circular mean of per-pair direction estimates, weighted by combined score.
///
/// Pairs whose box centers coincide carry no direction and are skipped; if
/// every pair is skipped the list counts as empty.
pub fn estimate_image_direction(pairs: &[PairedAssociation]) -> Result<LightAngle, LightError> {
    let mut sum_cos = 0.0;
    let mut sum_sin = 0.0;
    let mut any = false;
    for pair in pairs {
        let angle = match estimate_pair_direction(pair) {
            Ok(a) => a.radians(),
            Err(LightError::CoincidentPoints) => continue,
            Err(e) => return Err(e),
        };
        any = true;
        sum_cos += pair.combined_score * angle.cos();
        sum_sin += pair.combined_score * angle.sin();
    }
    if !any {
        return Err(LightError::NoDirections);
    }
    if sum_cos.hypot(sum_sin) < 1e-12 {
        return Err(LightError::ZeroResultant);
    }
    LightAngle::normalized(sum_sin.atan2(sum_cos))
}

/// Projects a cast shadow for an object footprint: a parallelogram extruded
/// from the footprint's base edge away from the light (direction `theta + pi`)
/// with length `object_height * length_scale`, rasterized and clipped to the
/// image.
///
/// The base edge is the footprint side facing the extrusion direction along
/// its dominant axis, which keeps the parallelogram non-degenerate for every
/// angle.
pub fn project_shadow(
    footprint: &BBox,
    object_height: f64,
    light: LightAngle,
    length_scale: f64,
    image_width: u32,
    image_height: u32,
) -> Result<Mask, MaskError> {
    let quad = shadow_quad(footprint, object_height, light, length_scale)
        .map_err(|_| MaskError::DegeneratePolygon)?;
    rasterize_convex_polygon(&quad, image_width, image_height)
}

/// The corner points of the projected shadow parallelogram, before
/// rasterization. Exposed so scene generation can reason about extents.
pub fn shadow_quad(
    footprint: &BBox,
    object_height: f64,
    light: LightAngle,
    length_scale: f64,
) -> Result<[(f64, f64); 4], LightError> {
    if !(object_height > 0.0 && object_height.is_finite())
        || !(length_scale > 0.0 && length_scale.is_finite())
    {
        return Err(LightError::NonPositiveExtent {
            height: object_height,
            scale: length_scale,
        });
    }
    if footprint.width() == 0.0 || footprint.height() == 0.0 {
        return Err(LightError::DegenerateFootprint);
    }
    let theta = light.radians();
    // Shadow direction: opposite the shadow-to-object direction.
    let dx = -theta.cos();
    let dy = -theta.sin();
    let length = object_height * length_scale;

    // Base edge on the side the shadow leaves from, picked along the dominant
    // axis of the extrusion so edge and direction are never parallel.
    let (p1, p2) = if dx.abs() >= dy.abs() {
        let x = if dx < 0.0 {
            footprint.x_min()
        } else {
            footprint.x_max()
        };
        ((x, footprint.y_min()), (x, footprint.y_max()))
    } else {
        let y = if dy < 0.0 {
            footprint.y_min()
        } else {
            footprint.y_max()
        };
        ((footprint.x_min(), y), (footprint.x_max(), y))
    };
    Ok([
        p1,
        p2,
        (p2.0 + dx * length, p2.1 + dy * length),
        (p1.0 + dx * length, p1.1 + dy * length),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AssociationDetection, InstanceDetection, InstanceKind};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn ground_truth_angle_axes() {
        assert_eq!(
            ground_truth_angle((0.0, 0.0), (1.0, 0.0))
                .unwrap()
                .radians(),
            0.0
        );
        assert_eq!(
            ground_truth_angle((0.0, 0.0), (0.0, 1.0))
                .unwrap()
                .radians(),
            PI / 2.0
        );
        // The -x direction lands on the principal-range boundary: +pi, not -pi.
        assert_eq!(
            ground_truth_angle((0.0, 0.0), (-1.0, 0.0))
                .unwrap()
                .radians(),
            PI
        );
    }

    #[test]
    fn coincident_centroids_error() {
        assert_eq!(
            ground_truth_angle((2.0, 3.0), (2.0, 3.0)),
            Err(LightError::CoincidentPoints)
        );
    }

    #[test]
    fn loss_branch_values_are_exact() {
        assert_eq!(light_loss(0.0, 0.0, false), 0.0);
        assert_eq!(light_loss(0.5, 0.0, false), 0.125);
        assert_eq!(light_loss(2.0, 0.0, false), 1.5);
    }

    #[test]
    fn loss_is_continuous_at_the_branch_point() {
        assert_eq!(light_loss(1.0, 0.0, false), 0.5);
        let below = light_loss(1.0 - 1e-9, 0.0, false);
        let above = light_loss(1.0 + 1e-9, 0.0, false);
        assert!((below - 0.5).abs() < 1e-8);
        assert!((above - 0.5).abs() < 1e-8);
    }

    #[test]
    fn wrapped_loss_across_the_seam() {
        // Raw difference -6 folds to 2*pi - 6 = 0.28318..., safely in the
        // quadratic branch: loss = 0.5 * d^2 = 0.0401 (to 4 decimals).
        let loss = light_loss(-3.0, 3.0, true);
        let d = 2.0 * PI - 6.0;
        assert!((loss - 0.5 * d * d).abs() < 1e-12);
        assert!((loss - 0.0401).abs() < 1e-4);
        // Literal mode charges the full raw difference.
        assert_eq!(light_loss(-3.0, 3.0, false), 5.5);
    }

    #[test]
    fn wrapped_loss_invariant_under_full_turns() {
        let cases = [(0.3, -0.9), (3.0, -3.0), (1.0, 1.0), (-2.5, 2.5)];
        for (p, g) in cases {
            let base = light_loss(p, g, true);
            for k in [-2.0, -1.0, 1.0, 2.0] {
                let shifted = light_loss(p + k * 2.0 * PI, g, true);
                assert!((base - shifted).abs() < 1e-12, "p={p} g={g} k={k}");
                let shifted_g = light_loss(p, g + k * 2.0 * PI, true);
                assert!((base - shifted_g).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn angle_constructor_enforces_range() {
        assert!(LightAngle::new(PI).is_ok());
        assert!(LightAngle::new(-PI).is_err());
        assert!(LightAngle::new(4.0).is_err());
        assert!(LightAngle::new(f64::NAN).is_err());
        assert_eq!(LightAngle::normalized(-PI).unwrap().radians(), PI);
        // In-range values pass through untouched.
        let theta = 0.123456789;
        assert_eq!(LightAngle::normalized(theta).unwrap().radians(), theta);
    }

    #[test]
    fn angle_serde_validates() {
        let a: LightAngle = serde_json::from_str("1.5").unwrap();
        assert_eq!(a.radians(), 1.5);
        assert!(serde_json::from_str::<LightAngle>("7.0").is_err());
    }

    fn pair_with_centers(shadow: (f64, f64), object: (f64, f64), score: f64) -> PairedAssociation {
        let half = 0.5;
        let mk_box =
            |c: (f64, f64)| BBox::new(c.0 - half, c.1 - half, c.0 + half, c.1 + half).unwrap();
        let instance = |kind, c: (f64, f64)| InstanceDetection {
            image_id: 1,
            kind,
            score,
            bbox: mk_box(c),
            mask: None,
        };
        let shadow_inst = instance(InstanceKind::Shadow, shadow);
        let object_inst = instance(InstanceKind::Object, object);
        let assoc_box = shadow_inst.bbox.merge(&object_inst.bbox);
        let light_angle = ground_truth_angle(shadow, object).unwrap();
        PairedAssociation {
            image_id: 1,
            shadow: shadow_inst,
            object: object_inst,
            association: AssociationDetection {
                image_id: 1,
                score,
                bbox: assoc_box,
                light_angle,
            },
            shadow_index: 0,
            object_index: 0,
            association_index: 0,
            combined_mask: None,
            combined_score: score,
            light_angle,
            match_iou: 1.0,
        }
    }

    #[test]
    fn pair_direction_uses_box_centers() {
        let pair = pair_with_centers((0.0, 0.0), (3.0, 3.0), 1.0);
        assert!((estimate_pair_direction(&pair).unwrap().radians() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn image_direction_aggregates() {
        let single = [pair_with_centers((0.0, 0.0), (2.0, 0.0), 0.7)];
        assert_eq!(estimate_image_direction(&single).unwrap().radians(), 0.0);

        let equal = [
            pair_with_centers((0.0, 0.0), (0.0, 2.0), 0.5),
            pair_with_centers((5.0, 5.0), (5.0, 9.0), 0.5),
        ];
        assert!((estimate_image_direction(&equal).unwrap().radians() - PI / 2.0).abs() < 1e-12);

        // Perpendicular directions with equal weights average to the bisector.
        let mixed = [
            pair_with_centers((0.0, 0.0), (2.0, 0.0), 0.5),
            pair_with_centers((5.0, 5.0), (5.0, 7.0), 0.5),
        ];
        assert!((estimate_image_direction(&mixed).unwrap().radians() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn image_direction_error_cases() {
        assert_eq!(estimate_image_direction(&[]), Err(LightError::NoDirections));
        let opposed = [
            pair_with_centers((0.0, 0.0), (2.0, 0.0), 0.5),
            pair_with_centers((9.0, 0.0), (7.0, 0.0), 0.5),
        ];
        assert_eq!(
            estimate_image_direction(&opposed),
            Err(LightError::ZeroResultant)
        );
    }

    #[test]
    fn shadow_extrudes_away_from_the_light() {
        // Light angle 0 means the object sits east of its shadow, so the
        // shadow must extend westward from the footprint's left edge.
        let footprint = BBox::new(30.0, 10.0, 40.0, 20.0).unwrap();
        let light = LightAngle::new(0.0).unwrap();
        let mask = project_shadow(&footprint, 10.0, light, 1.5, 64, 64).unwrap();
        let bbox = mask.bbox().unwrap();
        assert!(bbox.x_max() <= footprint.x_min() + 1.0);
        assert!((bbox.x_min() - (footprint.x_min() - 15.0)).abs() <= 1.0);
    }

    #[test]
    fn shadow_rejects_degenerate_inputs() {
        let footprint = BBox::new(30.0, 10.0, 40.0, 20.0).unwrap();
        let light = LightAngle::new(0.0).unwrap();
        assert!(shadow_quad(&footprint, 10.0, light, 0.0).is_err());
        assert!(shadow_quad(&footprint, 0.0, light, 1.0).is_err());
        let flat = BBox::new(30.0, 10.0, 40.0, 10.0).unwrap();
        assert!(shadow_quad(&flat, 10.0, light, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn ground_truth_angle_stays_in_principal_range(
            sx in -50.0..50.0, sy in -50.0..50.0, ox in -50.0..50.0, oy in -50.0..50.0
        ) {
            prop_assume!(sx != ox || sy != oy);
            let theta = ground_truth_angle((sx, sy), (ox, oy)).unwrap().radians();
            prop_assert!(theta > -PI && theta <= PI);
        }

        #[test]
        fn loss_nonnegative_and_zero_only_at_equality(
            p in -PI..PI, g in -PI..PI
        ) {
            let loss = light_loss(p, g, true);
            prop_assert!(loss >= 0.0);
            prop_assert_eq!(loss == 0.0, p == g);
        }

        #[test]
        fn normalized_angles_are_canonical(theta in -30.0..30.0) {
            let n = normalize_angle(theta).unwrap();
            prop_assert!(n > -PI && n <= PI);
            // The normalized angle differs from the input by a whole number
            // of turns.
            let turns = (theta - n) / (2.0 * PI);
            prop_assert!((turns - turns.round()).abs() < 1e-9);
        }

        #[test]
        fn shadow_projection_points_opposite_theta(theta in -PI * 0.999..PI) {
            let footprint = BBox::new(100.0, 100.0, 124.0, 124.0).unwrap();
            let light = LightAngle::new(theta).unwrap();
            let mask = project_shadow(&footprint, 24.0, light, 1.0, 256, 256).unwrap();
            prop_assert!(!mask.is_empty());
            let (cx, cy) = mask.centroid().unwrap();
            let (fx, fy) = footprint.center();
            // The shadow centroid must sit in the half-plane opposite theta.
            let dot = (cx - fx) * theta.cos() + (cy - fy) * theta.sin();
            prop_assert!(dot < 0.0);
        }
    }
}
