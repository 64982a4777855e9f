//! The depth-gated layout: only depth separates labelled and unlabelled regions.

use effseg::phantom::{generate_depth_gated_dataset, generate_depth_gated_sample, PhantomSpec};
use effseg::Image;
use effseg::Mask;

fn region_stats(img: &Image, mask: &Mask) -> (f64, f64, usize) {
    let v: Vec<f64> = img
        .data()
        .iter()
        .zip(mask.data())
        .filter(|(_, &m)| m == 1)
        .map(|(&x, _)| x as f64)
        .collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var, v.len())
}

#[test]
fn targets_lie_below_the_gate_and_decoys_above() {
    let spec = PhantomSpec::depth_gated();
    let gate = spec.gate();
    for seed in 0..100 {
        let (s, decoy) = generate_depth_gated_sample(&spec, seed).unwrap();
        let (r0, _, _, _) = s.mask.bounding_box().unwrap();
        assert!(r0 >= gate + spec.gate_margin, "seed {seed}: target starts at row {r0}");
        let (d0, _, dh, _) = decoy.bounding_box().unwrap();
        assert!(d0 + dh <= gate - spec.gate_margin, "seed {seed}: decoy ends at row {}", d0 + dh);
        assert!(d0 >= spec.edge_margin);
        assert!(s.mask.bounding_box().map(|b| b.0 + b.2).unwrap() <= spec.rows - spec.edge_margin);
        // same shape, different place
        assert_eq!(s.mask.area(), decoy.area(), "seed {seed}");
    }
}

#[test]
fn decoy_and_target_share_texture_statistics() {
    let spec = PhantomSpec::depth_gated();
    let (mut tm, mut tv, mut dm, mut dv) = (0.0, 0.0, 0.0, 0.0);
    let n = 100;
    for seed in 0..n {
        let (s, decoy) = generate_depth_gated_sample(&spec, seed).unwrap();
        let t = region_stats(&s.image, &s.mask);
        let d = region_stats(&s.image, &decoy);
        assert_eq!(t.2, d.2);
        tm += t.0;
        tv += t.1;
        dm += d.0;
        dv += d.1;
    }
    let rel = |a: f64, b: f64| (a - b).abs() / a.max(b);
    assert!(rel(tm, dm) <= 0.05, "means {} vs {}", tm / n as f64, dm / n as f64);
    assert!(rel(tv, dv) <= 0.05, "variances {} vs {}", tv / n as f64, dv / n as f64);
}

#[test]
fn dataset_requires_the_gated_spec() {
    assert!(generate_depth_gated_dataset(4, &PhantomSpec::preset_a(), 0).is_err());
    let data = generate_depth_gated_dataset(4, &PhantomSpec::depth_gated(), 0).unwrap();
    assert_eq!(data.len(), 4);
    assert_eq!(data[2], generate_depth_gated_sample(&PhantomSpec::depth_gated(), 2).unwrap().0);
}
