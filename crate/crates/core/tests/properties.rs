//! Property tests of the closed-form layer: parameter round trips, locus
//! orderings, exact identities and boundedness of the flow.

use approx::assert_relative_eq;
use proptest::prelude::*;

use facdyn::dynamics::{integrate, IntegratorConfig};
use facdyn::smooth::{field, in_rotation_region, rotation_determinant};
use facdyn::{OriginalParams, SmoothParams, State};

fn generic_original() -> impl Strategy<Value = OriginalParams> {
    // alpha large enough relative to eps that the discriminant is positive
    // over the sampled D range.
    (
        2.0f64..50.0,
        0.0f64..0.5,
        0.1f64..1.0,
        0.1f64..2.0,
        0.1f64..1.0,
        0.0f64..2.0,
    )
        .prop_filter_map("generic regime", |(ratio, d, eps, eps_s, mu, delta)| {
            let alpha = ratio * eps / (1.0 - d).powi(2) * 4.0 * 1.2;
            let p = OriginalParams::new(alpha, d, eps, eps_s, mu, delta).ok()?;
            (p.discriminant() > 1e-6 && p.to_smooth().is_ok()).then_some(p)
        })
}

fn generic_smooth() -> impl Strategy<Value = SmoothParams> {
    (0.1f64..2.0, 0.1f64..3.0, 0.01f64..0.99, 0.01f64..20.0).prop_filter_map(
        "valid params",
        |(x0, gap, frac, f)| {
            let x1 = x0 + gap;
            let xe = x0 + frac * gap;
            SmoothParams::new(x0, x1, xe, f).ok()
        },
    )
}

proptest! {
    /// Round trip: the rescaled rates recovered from (x0, x1, xe, F) match
    /// the direct rescaling of the original rates to 1e-12 relative.
    #[test]
    fn round_trip_original_to_smooth(p in generic_original()) {
        let direct = p.rescale();
        let via = p.to_smooth().unwrap().rescaled();
        prop_assert!((via.a - direct.a).abs() <= 1e-12 * direct.a.abs());
        prop_assert!((via.b - direct.b).abs() <= 1e-12 * direct.b.abs());
        prop_assert!((via.g - direct.g).abs() <= 1e-12 * direct.g.abs().max(1e-300));
    }

    /// Mean ordering x0 < x_c < x_geo < x_H < x1, strict for x0 < x1.
    #[test]
    fn locus_ordering(p in generic_smooth()) {
        let l = p.loci();
        prop_assert!(p.x0() < l.x_c);
        prop_assert!(l.x_c < l.x_geo);
        prop_assert!(l.x_geo < l.x_h);
        prop_assert!(l.x_h < p.x1());
    }

    /// The hyperbolicity ratio equals one exactly at the harmonic mean.
    #[test]
    fn hyperbolicity_ratio_unity_at_collapse_abscissa(p in generic_smooth()) {
        let q = SmoothParams::new(p.x0(), p.x1(), p.loci().x_c, p.f()).unwrap();
        let r = q.hyperbolicity_ratio().unwrap();
        prop_assert!((r - 1.0).abs() < 1e-12, "f_lambda(x_c) = {r}");
    }

    /// The three habitat ratios sum to one to machine precision.
    #[test]
    fn habitat_ratios_sum_to_one(p in generic_smooth()) {
        let r = p.habitat_ratios();
        let sum = r.r_c + r.r_o + r.r_s;
        prop_assert!((sum - 1.0).abs() < 1e-12, "sum = {sum}");
        prop_assert!(r.r_s == 0.5);
    }

    /// The first Lyapunov constant is negative for every generic parameter
    /// set (the Hopf bifurcation is always supercritical).
    #[test]
    fn lyapunov_constant_negative(p in generic_smooth()) {
        prop_assert!(p.hopf_constants().l1 < 0.0);
    }

    /// The focus-node boundary vanishes at the Hopf abscissa and diverges
    /// toward both ends of the interval.
    #[test]
    fn focus_node_curve_shape(p in generic_smooth()) {
        let l = p.loci();
        prop_assert!(l.f_fn(l.x_h).abs() < 1e-14);
        let eps = 1e-9 * (p.x1() - p.x0());
        prop_assert!(l.f_fn(p.x0() + eps) > 1e6);
        prop_assert!(l.f_fn(p.x1() - eps) > 1e6);
    }

    /// The rotated-field determinant is positive wherever it is defined.
    #[test]
    fn rotation_determinant_positive(
        p in generic_smooth(),
        xf in 0.01f64..1.5,
        yf in 0.0f64..2.0,
    ) {
        let x = xf * p.x1() * 1.2;
        let y = yf;
        let s = State { x, y };
        if in_rotation_region(&p, &s) {
            prop_assert!(rotation_determinant(&p, &s) > 0.0);
        }
    }
}

/// Monotonicity of the hyperbolicity ratio over a fine grid.
#[test]
fn hyperbolicity_ratio_monotone_grid() {
    let base = SmoothParams::new(1.0, 3.0, 2.0, 1.0).unwrap();
    let mut prev = 0.0;
    for i in 1..1000 {
        let xe = 1.0 + 2.0 * i as f64 / 1000.0;
        let p = base.with_xe(xe).unwrap();
        let r = p.hyperbolicity_ratio().unwrap();
        assert!(r > prev, "not increasing at xe = {xe}");
        prev = r;
    }
}

/// Ratio identity over random generic draws, as a plain seeded loop.
#[test]
fn habitat_ratio_sum_thousand_draws() {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(2024);
    for _ in 0..1000 {
        let x0: f64 = rng.gen_range(0.05..2.0);
        let x1 = x0 + rng.gen_range(1e-4..4.0);
        let xe = rng.gen_range(x0 * 1.0001..x1 * 0.9999);
        let Ok(p) = SmoothParams::new(x0, x1, xe, 1.0) else {
            continue;
        };
        let r = p.habitat_ratios();
        assert!(
            (r.r_c + r.r_o + r.r_s - 1.0).abs() < 1e-12,
            "sum off at x0={x0}, x1={x1}"
        );
    }
}

/// Dissipativity: integrated trajectories never exceed the absorbing-set
/// bound max(w(0), C/(F xe)) + 1e-6, with w = x + y/F and C the maximum of
/// the comparison polynomial over [0, max(x(0), x1)].
#[test]
fn trajectories_respect_absorbing_bound() {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(7);
    let cfg = IntegratorConfig {
        t_max: 60.0,
        ..Default::default()
    };
    let mut tested = 0;
    while tested < 50 {
        let x0: f64 = rng.gen_range(0.2..1.5);
        let x1 = x0 + rng.gen_range(0.3..2.5);
        let xe = rng.gen_range(x0 * 1.001..x1 * 0.999);
        let f = rng.gen_range(0.2..4.0);
        let Ok(p) = SmoothParams::new(x0, x1, xe, f) else {
            continue;
        };
        let s0 = State {
            x: rng.gen_range(0.0..2.0 * x1),
            y: rng.gen_range(0.0..2.0 * x1),
        };
        tested += 1;

        // C = max over [0, Mx] of phi(x) = -x^3/(x0 x1) + (x0+x1)x^2/(x0 x1)
        // - x + F xe x, via the critical points of the cubic.
        let q = x0 * x1;
        let phi = |x: f64| -x * x * x / q + (x0 + x1) * x * x / q - x + f * xe * x;
        let mx = s0.x.max(x1);
        let mut c = phi(0.0).max(phi(mx));
        let a2 = -3.0 / q;
        let a1 = 2.0 * (x0 + x1) / q;
        let a0 = f * xe - 1.0;
        let disc = a1 * a1 - 4.0 * a2 * a0;
        if disc > 0.0 {
            for root in [
                (-a1 + disc.sqrt()) / (2.0 * a2),
                (-a1 - disc.sqrt()) / (2.0 * a2),
            ] {
                if root > 0.0 && root < mx {
                    c = c.max(phi(root));
                }
            }
        }
        let bound = (s0.x + s0.y / f).max(c / (f * xe)) + 1e-6;

        let traj = integrate(&p, s0, &cfg).unwrap();
        for (t, s) in traj.times.iter().zip(traj.states.iter()) {
            let w = s.x + s.y / f;
            assert!(
                w <= bound,
                "w({t}) = {w} > {bound} at params ({x0}, {x1}, {xe}, {f})"
            );
        }
    }
}

/// The integrated field keeps the coordinate axes invariant and positivity
/// holds along interior trajectories.
#[test]
fn positivity_preserved() {
    let p = SmoothParams::new(1.0, 3.0, 1.9, 1.0).unwrap();
    let cfg = IntegratorConfig {
        t_max: 40.0,
        ..Default::default()
    };
    let traj = integrate(&p, State { x: 1.5, y: 0.3 }, &cfg).unwrap();
    for s in &traj.states {
        assert!(s.x > 0.0 && s.y > 0.0);
    }
}

/// Residual of the vector field at every reported equilibrium.
#[test]
fn equilibrium_residuals() {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(31);
    for _ in 0..200 {
        let x0: f64 = rng.gen_range(0.1..2.0);
        let x1 = x0 + rng.gen_range(0.1..3.0);
        let xe = rng.gen_range(x0 * 1.001..x1 * 0.999);
        let f = rng.gen_range(0.01..10.0);
        let Ok(p) = SmoothParams::new(x0, x1, xe, f) else {
            continue;
        };
        for rep in facdyn::smooth::equilibria(&p).reports {
            let (dx, dy) = field(&p, &rep.point);
            assert!(dx.hypot(dy) < 1e-12);
        }
    }
}

/// F_FN boundary: classification flips from node to focus as F crosses the
/// curve (boundary itself counted as node).
#[test]
fn focus_node_boundary_side() {
    let p = SmoothParams::new(1.0, 3.0, 2.5, 1.0).unwrap();
    let f_fn = p.loci().f_fn(2.5);
    assert_relative_eq!(f_fn, 5.0 / 18.0, max_relative = 1e-13);
    let node = SmoothParams::new(1.0, 3.0, 2.5, f_fn).unwrap();
    let focus = SmoothParams::new(1.0, 3.0, 2.5, f_fn * 1.0001).unwrap();
    use facdyn::smooth::{equilibria, EquilibriumKind};
    assert_eq!(
        equilibria(&node).reports[3].kind,
        EquilibriumKind::StableNode
    );
    assert_eq!(
        equilibria(&focus).reports[3].kind,
        EquilibriumKind::StableFocus
    );
}
