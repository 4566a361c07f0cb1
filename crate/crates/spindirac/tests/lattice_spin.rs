use spindirac::lattice_spin::{
    affine_shift, dual_basis, enumerate_shifted_dual, enumerate_shifted_dual_capped, validate_moduli, LatticeBasis,
    TorusGeometry,
};
use spindirac::Error;

const CHARACTERS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Every `ξ = (n₁ + c₁)γ₁* + (n₂ + c₂)γ₂*` with `|ξ| ≤ r` from a generous box.
fn box_scan(a: f64, b: f64, chi: (u8, u8), r: f64) -> Vec<(f64, f64)> {
    let n = (3.0 * (r + 1.0) * (1.0 + b + 1.0 / b)).ceil() as i64;
    let mut out = Vec::new();
    for n1 in -n..=n {
        for n2 in -n..=n {
            let s1 = n1 as f64 + 0.5 * chi.0 as f64;
            let s2 = n2 as f64 + 0.5 * chi.1 as f64;
            let (u, v) = (s1, (s2 - a * s1) / b);
            if u.hypot(v) <= r {
                out.push((u, v));
            }
        }
    }
    out
}

#[test]
fn enumeration_matches_box_scan() {
    for &(a, b) in &[(0.0, 1.0), (0.5, 0.866_025_403_784_438_6), (-0.37, 2.3), (0.21, 0.4), (0.0, 7.0)] {
        for chi in CHARACTERS {
            let g = TorusGeometry::from_parts(a, b, chi.0, chi.1).unwrap();
            for r in [0.0, 0.55, 1.0, 2.7, 6.0] {
                let got = enumerate_shifted_dual(&g, r).unwrap();
                let mut want = box_scan(a, b, chi, r);
                assert_eq!(got.len(), want.len(), "a={a} b={b} chi={chi:?} r={r}");
                let mut have: Vec<(f64, f64)> = got.iter().map(|p| (p.xi.u, p.xi.v)).collect();
                let key = |p: &(f64, f64)| ((p.0 * 1e9).round() as i64, (p.1 * 1e9).round() as i64);
                have.sort_by_key(key);
                want.sort_by_key(key);
                for (h, w) in have.iter().zip(&want) {
                    assert!((h.0 - w.0).abs() < 1e-12 && (h.1 - w.1).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn enumeration_is_sorted_by_norm() {
    let g = TorusGeometry::from_parts(0.13, 1.1, 1, 0).unwrap();
    let pts = enumerate_shifted_dual(&g, 5.0).unwrap();
    for w in pts.windows(2) {
        assert!(w[0].xi.norm() <= w[1].xi.norm() + 1e-12);
    }
}

#[test]
fn dual_pairing_is_kronecker() {
    for &(a, b) in &[(0.0, 2.0), (0.5, 3f64.sqrt() / 2.0), (-0.4, 0.3)] {
        let l = LatticeBasis::new(a, b).unwrap();
        let (d1, d2) = dual_basis(&l).unwrap();
        let [g1, g2] = l.generators();
        assert!((d1.pair(g1[0], g1[1]) - 1.0).abs() < 1e-12);
        assert!(d1.pair(g2[0], g2[1]).abs() < 1e-12);
        assert!(d2.pair(g1[0], g1[1]).abs() < 1e-12);
        assert!((d2.pair(g2[0], g2[1]) - 1.0).abs() < 1e-12);
    }
    let l = LatticeBasis::new(0.5, 3f64.sqrt() / 2.0).unwrap();
    let (d1, d2) = dual_basis(&l).unwrap();
    assert!((d1.u - 1.0).abs() < 1e-12 && (d1.v + 1.0 / 3f64.sqrt()).abs() < 1e-12);
    assert!(d2.u.abs() < 1e-12 && (d2.v - 2.0 / 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn shifted_points_satisfy_congruence() {
    for chi in CHARACTERS {
        let g = TorusGeometry::from_parts(-0.3, 1.7, chi.0, chi.1).unwrap();
        let eta = affine_shift(&g);
        let [g1, g2] = g.lattice().generators();
        for (gen, c) in [(g1, chi.0), (g2, chi.1)] {
            let x = eta.pair(gen[0], gen[1]) - 0.5 * c as f64;
            assert!((x - x.round()).abs() < 1e-10);
        }
        for p in enumerate_shifted_dual(&g, 4.0).unwrap() {
            for (gen, c) in [(g1, chi.0), (g2, chi.1)] {
                let x = p.xi.pair(gen[0], gen[1]) + 0.5 * c as f64;
                assert!((x - x.round()).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn moduli_domains() {
    let check = |a, b, c1, c2| validate_moduli(&TorusGeometry::from_parts(a, b, c1, c2).unwrap());
    assert!(check(0.0, 7.0, 0, 0).valid);
    assert!(check(0.5, 3f64.sqrt() / 2.0, 0, 0).valid);
    let bad = check(0.0, 0.5, 0, 0);
    assert!(!bad.valid && bad.diagnostic.contains("a² + b²"));
    assert!(check(0.0, 1.0, 0, 1).valid);
    assert!(check(0.0, 0.3, 0, 1).valid);
    assert!(!check(0.45, 0.1, 0, 1).valid);
    assert!(!check(0.0, 1.0, 1, 1).valid);
    assert!(!check(0.7, 2.0, 0, 0).valid);
}

#[test]
fn enumeration_cap_is_enforced() {
    let g = TorusGeometry::from_parts(0.0, 1.0, 0, 0).unwrap();
    assert!(matches!(enumerate_shifted_dual_capped(&g, 100.0, 1000), Err(Error::RadiusTooLarge { .. })));
    assert!(matches!(LatticeBasis::new(0.0, 0.0), Err(Error::DegenerateLattice { .. })));
}
