//! Global structure of the solved bifurcation objects: uniqueness of the
//! gap's sign change and the connectedness of the region bands.

use facdyn::bifurcation::{classify_region_with, heteroclinic_xe, SaddlePair, SmoothRegion};
use facdyn::dynamics::{section_gap, IntegratorConfig};

#[test]
fn gap_has_single_sign_change() {
    // Graph property: one sign change of the section gap over a fine xe scan
    // at fixed F.
    let pair = SaddlePair::new(1.0, 3.0).unwrap();
    let cfg = IntegratorConfig::default();
    let f = 1.0;
    let lo = pair.x_collapse() + 1e-4;
    let hi = pair.x_hopf() - 1e-4;
    let mut changes = 0;
    let mut prev: Option<f64> = None;
    for i in 0..200 {
        let xe = lo + (hi - lo) * i as f64 / 199.0;
        let g = section_gap(&pair.params(xe, f).unwrap(), &cfg).unwrap().gap;
        if let Some(p) = prev {
            if p.signum() != g.signum() {
                changes += 1;
            }
        }
        prev = Some(g);
    }
    assert_eq!(changes, 1, "expected exactly one sign change");
}

#[test]
fn region_grid_bands_are_connected() {
    // 100 x 50 (xe, F) grid: a single connected collapse band left of a
    // single connected oscillation band. Per F row the labels must be a
    // contiguous run of Omega4 then Omega2 (up to the
    // heteroclinic/tolerance cell), and consecutive rows' runs overlap.
    let pair = SaddlePair::new(1.0, 3.0).unwrap();
    let cfg = IntegratorConfig::default();
    let n_xe = 100;
    let n_f = 50;
    let xe_lo = pair.x_collapse() + 1e-3;
    let xe_hi = pair.x_hopf() - 1e-3;
    let mut prev_runs: Option<((usize, usize), (usize, usize))> = None;
    for j in 0..n_f {
        let f = 0.2 + 4.8 * j as f64 / (n_f - 1) as f64;
        let xe_h = heteroclinic_xe(&pair, f, &cfg).unwrap().xe;
        let mut labels = Vec::with_capacity(n_xe);
        for i in 0..n_xe {
            let xe = xe_lo + (xe_hi - xe_lo) * i as f64 / (n_xe - 1) as f64;
            let p = pair.params(xe, f).unwrap();
            let label = classify_region_with(&p, &cfg, &pair, Some(xe_h)).unwrap();
            labels.push(label.region);
        }
        let first = |r: SmoothRegion| labels.iter().position(|&l| l == r);
        let last = |r: SmoothRegion| labels.iter().rposition(|&l| l == r);
        let (c0, c1) = (
            first(SmoothRegion::Omega4Collapse).expect("collapse cells"),
            last(SmoothRegion::Omega4Collapse).unwrap(),
        );
        let (o0, o1) = (
            first(SmoothRegion::Omega2Oscillation).expect("oscillation cells"),
            last(SmoothRegion::Omega2Oscillation).unwrap(),
        );
        // Contiguous runs, collapse strictly left of oscillation.
        assert_eq!(
            labels[c0..=c1]
                .iter()
                .filter(|&&l| l == SmoothRegion::Omega4Collapse)
                .count(),
            c1 - c0 + 1,
            "collapse run has holes at F = {f}"
        );
        assert_eq!(
            labels[o0..=o1]
                .iter()
                .filter(|&&l| l == SmoothRegion::Omega2Oscillation)
                .count(),
            o1 - o0 + 1,
            "oscillation run has holes at F = {f}"
        );
        assert!(c1 < o0, "bands out of order at F = {f}");
        if let Some(((pc0, pc1), (po0, po1))) = prev_runs {
            assert!(
                c0 <= pc1 && pc0 <= c1,
                "collapse band disconnected at F = {f}"
            );
            assert!(
                o0 <= po1 && po0 <= o1,
                "oscillation band disconnected at F = {f}"
            );
        }
        prev_runs = Some(((c0, c1), (o0, o1)));
    }
}

#[test]
fn heteroclinic_solver_on_other_saddle_pairs() {
    // Anchors cross-validated by direct simulation (collapse just below the
    // solved abscissa, persistence just above) on two further pairs.
    let cfg = IntegratorConfig::default();
    let a = heteroclinic_xe(&SaddlePair::new(0.5, 2.5).unwrap(), 1.0, &cfg).unwrap();
    assert!((a.xe - 1.392_879).abs() < 5e-4, "xe_h = {}", a.xe);
    let b = heteroclinic_xe(&SaddlePair::new(0.8, 1.6).unwrap(), 2.0, &cfg).unwrap();
    assert!((b.xe - 1.171_390).abs() < 5e-4, "xe_h = {}", b.xe);
}

#[test]
fn bracket_signs_at_extreme_f() {
    // The gap brackets stay valid to the ends of the acceptance F range.
    let pair = SaddlePair::new(1.0, 3.0).unwrap();
    for f in [0.05, 50.0] {
        let cfg = IntegratorConfig {
            t_max: 1000.0f64.max(10.0 / f),
            record: false,
            ..Default::default()
        };
        let lo = pair.x_collapse() + 1e-4;
        let hi = pair.x_hopf() - 1e-4;
        let g_lo = section_gap(&pair.params(lo, f).unwrap(), &cfg).unwrap().gap;
        let g_hi = section_gap(&pair.params(hi, f).unwrap(), &cfg).unwrap().gap;
        assert!(g_lo > 0.0 && g_hi < 0.0, "F = {f}: ({g_lo}, {g_hi})");
    }
}
