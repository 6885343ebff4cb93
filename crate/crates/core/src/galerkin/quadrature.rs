use crate::meshkit::Point;

/// Element integration rules. The point rules are symmetric, in
/// barycentric coordinates with weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriangleRule {
    /// One point, exact for degree 1.
    Centroid,
    /// Seven points, exact for degree 5.
    Degree5,
    /// Closed-form integrals of the cosine modes, so element integrals are
    /// additive under refinement. Other integrands use [`TriangleRule::Degree5`].
    #[default]
    Exact,
}

impl TriangleRule {
    pub fn points(self) -> Vec<([f64; 3], f64)> {
        match self {
            TriangleRule::Centroid => vec![([1.0 / 3.0; 3], 1.0)],
            TriangleRule::Degree5 | TriangleRule::Exact => {
                let s15 = 15f64.sqrt();
                let a1 = (6.0 - s15) / 21.0;
                let a2 = (6.0 + s15) / 21.0;
                let w1 = (155.0 - s15) / 1200.0;
                let w2 = (155.0 + s15) / 1200.0;
                let mut pts = vec![([1.0 / 3.0; 3], 9.0 / 40.0)];
                for (a, w) in [(a1, w1), (a2, w2)] {
                    let b = 1.0 - 2.0 * a;
                    pts.push(([b, a, a], w));
                    pts.push(([a, b, a], w));
                    pts.push(([a, a, b], w));
                }
                pts
            }
        }
    }

    /// `∫_T g dx` for the triangle with the given corners and area.
    pub fn integrate(self, corners: [Point; 3], area: f64, g: impl Fn(Point) -> f64) -> f64 {
        let sum: f64 = self
            .points()
            .iter()
            .map(|(l, w)| w * g(map_to(corners, *l)))
            .sum();
        area * sum
    }
}

pub fn map_to(corners: [Point; 3], l: [f64; 3]) -> Point {
    [
        l[0] * corners[0][0] + l[1] * corners[1][0] + l[2] * corners[2][0],
        l[0] * corners[0][1] + l[1] * corners[1][1] + l[2] * corners[2][1],
    ]
}
