use std::sync::Arc;

use euler_poisson::dynamics::{vector_field_full, vector_field_reduced};
use euler_poisson::equilibria::{equilibrium_residual, shear_state, ShearFlowSpec};
use euler_poisson::frames::{rotation_frame, signature, FrameBuilder, FrameSet};
use euler_poisson::io::{diagnostics_csv, parse_diagnostics_csv};
use euler_poisson::observables::{
    energy, energy_reduced, grad_energy, grad_energy_reduced, grad_helicity, helicity, helicity_reduced, DiagnosticsRecord,
};
use euler_poisson::state::{ReducedState, VorticityState, DIVERGENCE_RTOL};
use euler_poisson::structures::{a_block, assemble_global, j_block, jproj_block, project, Structure};
use euler_poisson::verify::{check_antisymmetry, kernel_residual, left_kernel_residual, right_kernel_residual, BlockFn};
use euler_poisson::{Anisotropy, CMat3, CVec2, CVec3, Complex64, IVec3, ModeSet, RVec3, Truncation};
use proptest::prelude::*;

fn modes(n: u32) -> Arc<ModeSet> {
    Arc::new(ModeSet::build(Truncation::new(n).unwrap(), Anisotropy::ISOTROPIC))
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn real_vec() -> impl Strategy<Value = RVec3> {
    prop::array::uniform3(-3.0..3.0f64).prop_filter("nonzero", |a| a.iter().any(|x| x.abs() > 1e-3)).prop_map(RVec3::from)
}

fn complex_vec() -> impl Strategy<Value = CVec3> {
    prop::array::uniform6(-1.0..1.0f64).prop_map(|a| CVec3::new(c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5])))
}

fn lattice_index(n: i32) -> impl Strategy<Value = IVec3> {
    prop::array::uniform3(-n..=n).prop_filter("nonzero", |a| a.iter().any(|&x| x != 0)).prop_map(IVec3)
}

/// Entrywise `w (k×j)ᵀ + s (v·w) [k]×` without matrix helpers.
fn explicit_block(j: &RVec3, k: &RVec3, w: &CVec3, v: &RVec3, s: f64) -> CMat3 {
    let kxj = [k[1] * j[2] - k[2] * j[1], k[2] * j[0] - k[0] * j[2], k[0] * j[1] - k[1] * j[0]];
    let vw = w[0] * v[0] + w[1] * v[1] + w[2] * v[2];
    let cross = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    CMat3::from_fn(|a, b| w[a] * kxj[b] + vw * (s * cross[a][b]))
}

fn rel(a: &CMat3, b: &CMat3) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn full_values(s: &VorticityState) -> Vec<CVec3> {
    (0..s.modes().len()).map(|i| s.get(i)).collect()
}

/// `Σ_k g_k · F_k` over the whole lattice.
fn pairing(g: &[CVec3], f: &VorticityState) -> Complex64 {
    g.iter().enumerate().map(|(i, gi)| gi.dot(&f.get(i))).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn blocks_match_explicit_formulas(j in real_vec(), k in real_vec(), w in complex_vec()) {
        prop_assert!(rel(&j_block(&j, &k, &w), &explicit_block(&j, &k, &w, &j, 1.0)) < 1e-15);
        prop_assert!(rel(&a_block(&j, &k, &w), &explicit_block(&j, &k, &w, &k, -1.0)) < 1e-15);
        let m = j + k;
        prop_assume!(m.norm() > 1e-3);
        let pw = project(&m, &w);
        prop_assert!(rel(&jproj_block(&j, &k, &w), &j_block(&j, &k, &pw)) < 1e-15);
        let along = m.map(Complex64::from).dot(&pw).norm();
        prop_assert!(along <= 1e-14 * m.norm() * w.norm());
    }

    #[test]
    fn block_identities_for_real_wavevectors(j in real_vec(), k in real_vec(), w in complex_vec()) {
        for block in [j_block as BlockFn, jproj_block] {
            prop_assert!(check_antisymmetry(block, &j, &k, &w) < 1e-14);
            prop_assert!(right_kernel_residual(block, &j, &k, &w) < 1e-14);
            prop_assert!(left_kernel_residual(block, &j, &k, &w) < 1e-14);
        }
    }

    #[test]
    fn frames_are_rotations(j in real_vec(), n in real_vec()) {
        for n in [RVec3::x(), n] {
            let f = rotation_frame(&j, &n).unwrap();
            prop_assert!((f.r.transpose() * f.r - euler_poisson::RMat3::identity()).norm() < 1e-14);
            prop_assert!((f.r.determinant() - 1.0).abs() < 1e-14);
            prop_assert!((f.r * j - RVec3::x() * j.norm()).norm() < 1e-14 * j.norm());
        }
    }

    #[test]
    fn opposite_frames_differ_by_signature(a in lattice_index(2), n in real_vec()) {
        let m = modes(2);
        for builder in [FrameBuilder::ex(), FrameBuilder::new(n).unwrap()] {
            let frames = FrameSet::new(&m, builder);
            let (p, q) = (frames.frame_of(a).unwrap(), frames.frame_of(-a).unwrap());
            prop_assert!((q.r - signature() * p.r).norm() < 1e-14);
        }
    }

    #[test]
    fn global_tensors_are_antisymmetric(seed in any::<u64>()) {
        let m = modes(1);
        let frames = FrameSet::new(&m, FrameBuilder::ex());
        let raw = VorticityState::random_raw(m.clone(), seed, 1.0).unwrap();
        let divfree = VorticityState::random_divfree(m.clone(), seed, 1.0).unwrap();
        for (s, which) in [(&raw, Structure::Simple), (&raw, Structure::Projected), (&divfree, Structure::Reduced)] {
            let t = assemble_global(s, which, &frames).unwrap();
            prop_assert!(t.antisymmetry_defect() <= 1e-14 * t.norm().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projected_field_conserves_energy_helicity_and_divergence(seed in any::<u64>(), n in 1u32..=2) {
        let m = modes(n);
        let s = VorticityState::random_divfree(m.clone(), seed, 1.0).unwrap();
        let f = vector_field_full(&s, Structure::Projected).unwrap();
        let scale = grad_energy(&s).flatten().norm() * f.half_values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(pairing(&grad_energy(&s).0, &f).norm() <= 1e-13 * scale * m.len() as f64);
        let hscale = grad_helicity(&s).flatten().norm() * f.half_values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(pairing(&grad_helicity(&s).0, &f).norm() <= 1e-13 * hscale * m.len() as f64);
        let raw = VorticityState::random_raw(m.clone(), seed, 1.0).unwrap();
        let fr = vector_field_full(&raw, Structure::Projected).unwrap();
        let fmax = fr.amp_max().max(1.0);
        for (i, md) in m.modes().iter().enumerate() {
            let div = md.wavevector.map(Complex64::from).dot(&fr.get(i)).norm();
            prop_assert!(div <= 1e-14 * md.norm * fmax);
        }
    }

    #[test]
    fn casimir_gradients_lie_in_the_kernel(seed in any::<u64>()) {
        let m = modes(1);
        let frames = FrameSet::new(&m, FrameBuilder::ex());
        let raw = VorticityState::random_raw(m.clone(), seed, 1.0).unwrap();
        let t = assemble_global(&raw, Structure::Projected, &frames).unwrap();
        prop_assert!(kernel_residual(&t, &grad_helicity(&raw).flatten()).unwrap() <= 1e-13);
        for (i, md) in m.modes().iter().enumerate() {
            let mut v = vec![CVec3::zeros(); m.len()];
            v[i] = md.wavevector.map(Complex64::from);
            let flat = euler_poisson::observables::CotangentField(v).flatten();
            prop_assert!(kernel_residual(&t, &flat).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn reduced_coordinates_are_consistent(seed in any::<u64>(), n in real_vec()) {
        let m = modes(2);
        for builder in [FrameBuilder::ex(), FrameBuilder::new(n).unwrap()] {
            let frames = FrameSet::new(&m, builder);
            let s = VorticityState::random_divfree(m.clone(), seed, 1.0).unwrap();
            let r = s.to_reduced(&frames, DIVERGENCE_RTOL).unwrap();
            prop_assert!(r.to_full(&frames).max_deviation(&s) <= 1e-15 * s.amp_max().max(1.0) * 4.0);
            prop_assert!((energy_reduced(&r) - energy(&s)).abs() <= 1e-13 * energy(&s));
            let h = helicity(&s).unwrap();
            prop_assert!((helicity_reduced(&r) - h).abs() <= 1e-13 * energy(&s).max(h.abs()));
            let f = vector_field_full(&s, Structure::Projected).unwrap();
            let fr = vector_field_reduced(&r, &frames).unwrap();
            prop_assert!(fr.to_full(&frames).max_deviation(&f) <= 1e-13 * f.amp_max().max(1.0));
        }
    }

    #[test]
    fn shear_flows_are_equilibria(
        p in lattice_index(2),
        v in real_vec(),
        c1 in (-1.0..1.0f64, -1.0..1.0f64),
        c2 in (-1.0..1.0f64, -1.0..1.0f64),
    ) {
        fn gcd(a: i32, b: i32) -> i32 { if b == 0 { a.abs() } else { gcd(b, a % b) } }
        prop_assume!(gcd(gcd(p.0[0], p.0[1]), p.0[2]) == 1);
        let m = modes(2);
        let frames = FrameSet::new(&m, FrameBuilder::ex());
        let pv = m.wavevector_of(p).unwrap();
        let g = pv.cross(&v);
        prop_assume!(g.norm() > 1e-3);
        let mut profile = vec![serde_json::json!({"n": 1, "re": c1.0, "im": c1.1})];
        if m.contains(p.scale(2)) {
            profile.push(serde_json::json!({"n": 2, "re": c2.0, "im": c2.1}));
        }
        let spec: ShearFlowSpec = serde_json::from_value(serde_json::json!({"p": p, "G": [g.x, g.y, g.z], "profile": profile})).unwrap();
        let s = shear_state(&spec, m.clone()).unwrap();
        for which in [Structure::Direct, Structure::Simple, Structure::Projected, Structure::Reduced] {
            prop_assert!(equilibrium_residual(&s, which, &frames).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn reduced_energy_gradient_matches_differences(seed in any::<u64>()) {
        let m = modes(1);
        let frames = FrameSet::new(&m, FrameBuilder::ex());
        let s = VorticityState::random_divfree(m.clone(), seed, 1.0).unwrap();
        let r = s.to_reduced(&frames, DIVERGENCE_RTOL).unwrap();
        let mut w: Vec<CVec2> = (0..m.len()).map(|i| r.get(i)).collect();
        // ½ Σ ω̃_{-j}ᵀ S̃ ω̃_j / |j|² with every mode independent
        let formal = |w: &[CVec2]| -> Complex64 {
            m.modes().iter().enumerate().map(|(i, md)| {
                let p = w[md.partner];
                (-p[0] * w[i][0] + p[1] * w[i][1]) / md.norm_sq
            }).sum::<Complex64>() * 0.5
        };
        let g = grad_energy_reduced(&r);
        let gmax = g.0.iter().flat_map(|v| v.iter()).map(|x| x.norm()).fold(0.0, f64::max);
        let h = 1e-5;
        for i in 0..m.len() {
            for comp in 0..2 {
                let orig = w[i][comp];
                w[i][comp] = orig + h;
                let up = formal(&w);
                w[i][comp] = orig - h;
                let down = formal(&w);
                w[i][comp] = orig;
                prop_assert!(((up - down) / (2.0 * h) - g.0[i][comp]).norm() <= 1e-6 * gmax);
            }
        }
    }
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(rows in prop::collection::vec(prop::array::uniform5(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL), 0..20)) {
        let recs: Vec<DiagnosticsRecord> = rows
            .iter()
            .map(|r| DiagnosticsRecord { t: r[0], energy: r[1], helicity: r[2], div_max: r[3], amp_max: r[4] })
            .collect();
        let back = parse_diagnostics_csv(&diagnostics_csv(&recs)).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in back.iter().zip(&recs) {
            prop_assert_eq!(
                [a.t, a.energy, a.helicity, a.div_max, a.amp_max].map(f64::to_bits),
                [b.t, b.energy, b.helicity, b.div_max, b.amp_max].map(f64::to_bits)
            );
        }
    }

    #[test]
    fn snapshot_round_trip_is_exact(seed in any::<u64>(), t in -1e3..1e3f64) {
        let m = modes(1);
        let mut s = VorticityState::random_raw(m.clone(), seed, 1.0).unwrap();
        s.time = t;
        let text = serde_json::to_string(&s.to_snapshot()).unwrap();
        let back = VorticityState::from_snapshot(m, &serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(back.time.to_bits(), t.to_bits());
        let same = full_values(&back).iter().zip(full_values(&s)).all(|(a, b)| {
            a.iter().zip(b.iter()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
        });
        prop_assert!(same);
    }
}

#[test]
fn zero_reduced_state_has_zero_field() {
    let m = modes(1);
    let frames = FrameSet::new(&m, FrameBuilder::ex());
    let f = vector_field_reduced(&ReducedState::zeros(m), &frames).unwrap();
    assert_eq!(f.amp_max(), 0.0);
}
