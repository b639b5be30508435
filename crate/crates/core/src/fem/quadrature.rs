use crate::flowfield::Point2;

use super::mesh::signed_area;

/// Degree-5 seven-point rule: barycentric points and weights (sum to one).
const RULE: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059_715_871_789_770, 0.470_142_064_105_115, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.059_715_871_789_770, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.470_142_064_105_115, 0.059_715_871_789_770], 0.132_394_152_788_506),
    ([0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.797_426_985_353_087, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.101_286_507_323_456, 0.797_426_985_353_087], 0.125_939_180_544_827),
];

/// `∫_T f` with the seven-point rule, exact for polynomials of degree five.
pub fn integrate_triangle(verts: [Point2; 3], f: impl Fn(Point2) -> f64) -> f64 {
    let area = signed_area(verts[0], verts[1], verts[2]).abs();
    RULE.iter()
        .map(|(l, w)| {
            let p = Point2::new(
                l[0] * verts[0].x + l[1] * verts[1].x + l[2] * verts[2].x,
                l[0] * verts[0].y + l[1] * verts[1].y + l[2] * verts[2].y,
            );
            w * f(p)
        })
        .sum::<f64>()
        * area
}
