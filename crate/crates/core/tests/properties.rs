use proptest::prelude::*;

use tubeness::components::{count_pvs, filter_by_length, label_components_3d};
use tubeness::hessian::{eigen_symmetric_3x3, SymMat3};
use tubeness::ologit::OrderedLogit;
use tubeness::stats::spearman;
use tubeness::vesselness::{
    threshold_response, vesselness_from_eigenvalues, vesselness_over_scales, FilterParams, Polarity,
};
use tubeness::volume::{load_volume, reslice_isotropic, reslice_mask, save_volume, VolumeFormat};
use tubeness::{Axis, EigenTriple3D, Grid, Mask3D, Volume};

fn sample() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-50.0f64..50.0, n),
            prop::collection::vec(-50.0f64..50.0, n),
        )
    })
}

fn model() -> impl Strategy<Value = OrderedLogit<f64>> {
    (0.01f64..5.0, -20.0f64..20.0, prop::collection::vec(0.01f64..15.0, 1..5)).prop_map(|(b, m0, inc)| {
        let mut mu = vec![m0];
        for d in inc {
            mu.push(mu.last().unwrap() + d);
        }
        OrderedLogit::new(b, mu, "test").unwrap()
    })
}

fn small_volume() -> impl Strategy<Value = Volume<f64>> {
    prop::collection::vec(-1000.0f64..1000.0, 7 * 6 * 5)
        .prop_map(|d| Volume::new(Grid::unit([7, 6, 5]).unwrap(), d).unwrap())
}

fn random_mask(dims: [usize; 3]) -> impl Strategy<Value = Mask3D> {
    let n = dims[0] * dims[1] * dims[2];
    prop::collection::vec(prop::bool::weighted(0.3), n)
        .prop_map(move |b| Mask3D::new(Grid::unit(dims).unwrap(), b.into_iter().map(u8::from).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn spearman_ignores_monotone_transforms((x, y) in sample()) {
        prop_assume!(spearman(&x, &y).is_ok());
        let r = spearman(&x, &y).unwrap().rho;
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v + 3.0 * v).collect();
        let exp_y: Vec<f64> = y.iter().map(|v| (v / 10.0).exp()).collect();
        prop_assert_eq!(spearman(&cubed, &exp_y).unwrap().rho, r);
        prop_assert_eq!(spearman(&y, &x).unwrap().rho, r);
        prop_assert!(r.abs() <= 1.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((spearman(&neg, &y).unwrap().rho + r).abs() < 1e-12);
    }

    #[test]
    fn spearman_ignores_joint_permutation((x, y) in sample(), seed in any::<u64>()) {
        prop_assume!(spearman(&x, &y).is_ok());
        let mut idx: Vec<usize> = (0..x.len()).collect();
        let mut s = seed | 1;
        for i in (1..idx.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            idx.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let px: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let py: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let a = spearman(&x, &y).unwrap().rho;
        let b = spearman(&px, &py).unwrap().rho;
        prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn class_probabilities_are_distributions(m in model(), x in -100.0f64..100.0) {
        let p = m.class_probabilities(x);
        prop_assert_eq!(p.len(), m.classes());
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cumulative_probability_falls_with_count(m in model(), x in -20.0f64..20.0, dx in 0.01f64..10.0) {
        let cdf = |x: f64| {
            let p = m.class_probabilities(x);
            p.iter().scan(0.0, |s, v| { *s += v; Some(*s) }).collect::<Vec<_>>()
        };
        let (a, b) = (cdf(x), cdf(x + dx));
        for j in 0..m.classes() - 1 {
            prop_assert!(b[j] <= a[j] + 1e-15, "class {}: {} > {}", j, b[j], a[j]);
        }
    }

    #[test]
    fn log_likelihood_is_sum_of_log_probabilities(
        m in model(),
        obs in prop::collection::vec((0.0f64..40.0, 0usize..6), 1..40),
    ) {
        let obs: Vec<(f64, usize)> = obs.into_iter().map(|(x, c)| (x, c % m.classes())).collect();
        // Telescoped differences lose relative precision deep in a tail, so
        // the per-observation check only covers non-negligible probabilities.
        let mut sum = 0.0;
        for &(x, c) in &obs {
            let direct = m.class_probability(c, x);
            let telescoped = m.class_probabilities(x)[c];
            prop_assert!((direct - telescoped).abs() <= 1e-14);
            if telescoped > 1e-6 {
                prop_assert!((direct.ln() - telescoped.ln()).abs() <= 1e-9);
            }
            sum += direct.max(1e-300).ln();
        }
        let got = m.log_likelihood(&obs).unwrap();
        prop_assert!((got - sum).abs() <= 1e-12 * (1.0 + sum.abs()), "{} vs {}", got, sum);
    }

    #[test]
    fn model_text_round_trips(m in model()) {
        let back = OrderedLogit::<f64>::from_text(&m.to_text(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn eigenvalues_match_trace_and_determinant(
        v in prop::array::uniform6(-1e3f64..1e3),
    ) {
        let h = SymMat3::new(v[0], v[1], v[2], v[3], v[4], v[5]);
        let e = eigen_symmetric_3x3(&h);
        let [a, b, c] = e.as_array();
        prop_assert!(a.abs() <= b.abs() && b.abs() <= c.abs());
        let scale = h.norm().max(1e-300);
        prop_assert!((a + b + c - h.trace()).abs() <= 1e-9 * scale);
        prop_assert!((a * b * c - h.determinant()).abs() <= 1e-9 * scale.powi(3));
    }

    #[test]
    fn vesselness_is_bounded(
        e in prop::array::uniform3(-1e4f64..1e4),
        alpha in 0.05f64..2.0,
        beta in 0.05f64..2.0,
        c in 1.0f64..2000.0,
        dark in any::<bool>(),
    ) {
        let pol = if dark { Polarity::Dark } else { Polarity::Bright };
        let v = vesselness_from_eigenvalues(&EigenTriple3D::from_unordered(e), alpha, beta, c, pol);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn raw_round_trip_is_exact_for_f32_values(vol in small_volume()) {
        let vol = vol.map(|v| v as f32 as f64).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.raw");
        save_volume(&vol, &p).unwrap();
        let back = load_volume(&p, VolumeFormat::from_path(&p)).unwrap();
        prop_assert_eq!(back.data(), vol.data());
        prop_assert_eq!(back.dims(), vol.dims());
    }

    #[test]
    fn reslicing_keeps_masks_binary(m in random_mask([6, 5, 4]), target in 0.4f64..2.5) {
        let r = reslice_mask(&m, target).unwrap();
        prop_assert!(r.data().iter().all(|&b| b <= 1));
    }

    #[test]
    fn reslicing_onto_the_same_grid_is_identity(vol in small_volume()) {
        let r = reslice_isotropic(&vol, 1.0).unwrap();
        for (a, b) in r.data().iter().zip(vol.data()) {
            prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
    }

    #[test]
    fn labelling_is_idempotent(m in random_mask([8, 7, 6])) {
        let cs = label_components_3d(&m);
        let again = label_components_3d(&cs.to_mask());
        prop_assert_eq!(again.labels(), cs.labels());
        prop_assert_eq!(cs.voxel_count(), m.count());
        let all = filter_by_length(&cs, 0.0, f64::INFINITY);
        prop_assert_eq!(all.labels(), cs.labels());
    }

    #[test]
    fn slice_fragments_lie_in_one_component(m in random_mask([8, 7, 6])) {
        let cs = label_components_3d(&m);
        let roi = Mask3D::full(*m.grid());
        let c = count_pvs(&cs, &roi, Axis::Z).unwrap();
        prop_assert_eq!(c.total_volume_mm3, m.count() as f64);
        let z = c.selected_slice;
        let crossing: std::collections::BTreeSet<u32> = (0..8)
            .flat_map(|x| (0..7).map(move |y| (x, y)))
            .map(|(x, y)| cs.labels()[m.grid().index(x, y, z)])
            .filter(|&l| l != 0)
            .collect();
        prop_assert!(c.slice_count >= crossing.len());
        let in_slice = crossing.iter().map(|&l| cs.components()[l as usize - 1].slice_counts[z]).sum::<usize>();
        prop_assert_eq!(in_slice, (0..8).flat_map(|x| (0..7).map(move |y| (x, y))).filter(|&(x, y)| m.get(x, y, z)).count());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn polarity_duality_and_threshold_monotonicity(vol in small_volume(), t in 0.0f64..0.5, dt in 0.0f64..0.5) {
        let p = FilterParams { c: 200.0, ..Default::default() };
        let bright = vesselness_over_scales(&vol, &[0.8, 1.2], &p).unwrap();
        let neg = vol.map(|v| -v).unwrap();
        let dark = vesselness_over_scales(&neg, &[0.8, 1.2], &FilterParams { polarity: Polarity::Dark, ..p.clone() }).unwrap();
        for (a, b) in bright.data().iter().zip(dark.data()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let swapped = vesselness_over_scales(&vol, &[1.2, 0.8], &p).unwrap();
        prop_assert_eq!(swapped.data(), bright.data());
        let roi = Mask3D::full(*vol.grid());
        let lo = threshold_response(&bright, &roi, t).unwrap();
        let hi = threshold_response(&bright, &roi, t + dt).unwrap();
        prop_assert!(hi.data().iter().zip(lo.data()).all(|(&h, &l)| h <= l));
    }
}
