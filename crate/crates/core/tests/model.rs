mod common;

use common::duffy_integrate;
use sgfem::model::CosineModes;

#[test]
fn closed_form_triangle_integrals_match_gauss() {
    let modes = CosineModes { amplitude: 1.0, sigma: 0.0 };
    let triangles = [
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        [[0.0, -1.0], [1.0, 0.0], [0.0, 0.0]],
        [[0.1, 0.2], [0.1003, 0.2], [0.1, 0.2004]],
        [[-0.3, 0.7], [0.45, 0.1], [0.2, 0.9]],
        [[0.25, 0.0], [0.5, 0.25], [0.25, 0.25]],
    ];
    for corners in triangles {
        for m in [1, 2, 3, 4, 5, 7, 12, 20, 40, 100] {
            let exact = modes.triangle_integral(m, corners);
            let quad = duffy_integrate(corners, 80, |x| modes.eval(m, x));
            assert!((exact - quad).abs() < 1e-13, "m = {m}: {exact} vs {quad}");
        }
    }
}

#[test]
fn closed_form_is_additive_under_bisection() {
    let modes = CosineModes { amplitude: 0.547, sigma: 2.0 };
    let (a, b, c) = ([0.0, -1.0], [1.0, 0.0], [0.0, 0.0]);
    let mid = [0.5, -0.5];
    for m in 1..60 {
        let whole = modes.triangle_integral(m, [a, b, c]);
        let halves = modes.triangle_integral(m, [c, a, mid]) + modes.triangle_integral(m, [b, c, mid]);
        assert!((whole - halves).abs() < 1e-15);
    }
}
