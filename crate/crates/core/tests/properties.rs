//! Property tests checking each algorithm against a naive, independent
//! re-derivation.

use num_rational::Ratio;
use proptest::prelude::*;

use tubeforge_core::augment::{composite_frame, AugmentSpec};
use tubeforge_core::cluster::{cluster_volume, ClusterConfig, TemporalLinking};
use tubeforge_core::container::{chunked, fnv1a64, npy};
use tubeforge_core::geometry::{iou, union_box};
use tubeforge_core::metrics::{metrics_of, ConfusionMatrix};
use tubeforge_core::tube::{resize_bilinear, ResizeSpec};
use tubeforge_core::volume::{label_volume, segment_volumes, RemainderMode, VideoVolume, VolumeSpan};
use tubeforge_core::{BoundingBox, Detection, GrayImage, Label, RgbImage};

fn arb_box(limit: i32) -> impl Strategy<Value = BoundingBox> {
    (0..limit, 0..limit, 1..limit, 1..limit).prop_map(move |(x, y, w, h)| {
        BoundingBox::new(x, y, (x + w).min(limit + 1), (y + h).min(limit + 1)).unwrap()
    })
}

fn lattice_iou(a: &BoundingBox, b: &BoundingBox) -> (u64, u64) {
    let (mut inter, mut union) = (0, 0);
    for y in 0..80 {
        for x in 0..80 {
            let ina = x >= a.x1() && x < a.x2() && y >= a.y1() && y < a.y2();
            let inb = x >= b.x1() && x < b.x2() && y >= b.y1() && y < b.y2();
            inter += u64::from(ina && inb);
            union += u64::from(ina || inb);
        }
    }
    (inter, union)
}

proptest! {
    #[test]
    fn iou_matches_lattice_count(a in arb_box(63), b in arb_box(63)) {
        let (inter, union) = lattice_iou(&a, &b);
        prop_assert_eq!(iou(&a, &b), inter as f64 / union as f64);
        prop_assert_eq!(iou(&a, &b), iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&iou(&a, &b)));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn union_box_laws(a in arb_box(63), b in arb_box(63), c in arb_box(63)) {
        let u = union_box(&a, &b);
        prop_assert!(u.area() >= a.area().max(b.area()));
        prop_assert!(u.contains(&a) && u.contains(&b));
        prop_assert_eq!(u, union_box(&b, &a));
        prop_assert_eq!(union_box(&u, &c), union_box(&a, &union_box(&b, &c)));
    }

    #[test]
    fn segmentation_partitions_prefix(frames in 0usize..2000, n in 1usize..300) {
        let spans = segment_volumes(frames, n, RemainderMode::Drop).unwrap();
        prop_assert_eq!(spans.len(), frames / n);
        let mut covered = vec![0u8; frames];
        for s in &spans {
            prop_assert_eq!(s.start_frame, s.volume_index * n);
            for c in &mut covered[s.start_frame..s.start_frame + s.frame_span] {
                *c += 1;
            }
        }
        let prefix = n * (frames / n);
        prop_assert!(covered[..prefix].iter().all(|&c| c == 1));
        prop_assert!(covered[prefix..].iter().all(|&c| c == 0));
    }

    #[test]
    fn label_volume_is_monotone(n in 1usize..300, fight in 0usize..300, extra in 0usize..50) {
        let fight = fight.min(n);
        let more = (fight + extra).min(n);
        let mk = |k: usize| (0..n).map(|i| if i < k { Label::Fight } else { Label::NonFight }).collect::<Vec<_>>();
        let before = label_volume(&mk(fight));
        let after = label_volume(&mk(more));
        if before.value == Label::Fight {
            prop_assert_eq!(after.value, Label::Fight);
        }
        prop_assert_eq!(before.value == Label::Fight, 10 * fight > 7 * n);
    }
}

/// Pairwise relabeling: whenever an edge joins two different labels, every
/// node carrying one label is rewritten to the other, until nothing changes.
fn oracle_partition(
    nodes: &[(usize, BoundingBox)],
    threshold: f64,
    linking: TemporalLinking,
) -> Vec<(Vec<usize>, [i32; 4])> {
    let mut comp: Vec<usize> = (0..nodes.len()).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..nodes.len() {
            for j in 0..nodes.len() {
                if i == j || comp[i] == comp[j] {
                    continue;
                }
                let (fi, bi) = nodes[i];
                let (fj, bj) = nodes[j];
                let eligible = match linking {
                    TemporalLinking::AnyFrame => true,
                    TemporalLinking::AdjacentFrame => fi.abs_diff(fj) <= 1,
                    TemporalLinking::SameFrameOnly => fi == fj,
                };
                if eligible && iou(&bi, &bj) >= threshold {
                    let (from, to) = (comp[j], comp[i]);
                    comp.iter_mut().filter(|c| **c == from).for_each(|c| *c = to);
                    changed = true;
                }
            }
        }
    }
    let mut out: Vec<(Vec<usize>, [i32; 4])> = Vec::new();
    let mut labels: Vec<usize> = comp.clone();
    labels.sort_unstable();
    labels.dedup();
    for l in labels {
        let members: Vec<usize> = (0..nodes.len()).filter(|&i| comp[i] == l).collect();
        let bx = [
            members.iter().map(|&i| nodes[i].1.x1()).min().unwrap(),
            members.iter().map(|&i| nodes[i].1.y1()).min().unwrap(),
            members.iter().map(|&i| nodes[i].1.x2()).max().unwrap(),
            members.iter().map(|&i| nodes[i].1.y2()).max().unwrap(),
        ];
        out.push((members, bx));
    }
    out.sort();
    out
}

fn arb_linking() -> impl Strategy<Value = TemporalLinking> {
    prop_oneof![
        Just(TemporalLinking::AnyFrame),
        Just(TemporalLinking::AdjacentFrame),
        Just(TemporalLinking::SameFrameOnly),
    ]
}

fn build_volume(frames: usize, dets: &[(usize, BoundingBox)]) -> (VideoVolume, Vec<(usize, BoundingBox)>) {
    let mut per_frame = vec![Vec::new(); frames];
    for &(f, b) in dets {
        per_frame[f % frames].push(Detection { bbox: b, score: 0.5, class_id: 0, frame_index: f % frames });
    }
    // node order matches cluster_volume's flattening: by frame, then ordinal
    let nodes = per_frame.iter().flatten().map(|d| (d.frame_index, d.bbox)).collect();
    let volume = VideoVolume {
        span: VolumeSpan { volume_index: 0, start_frame: 0, frame_span: frames, source_frames: frames },
        labels: vec![Label::NonFight; frames],
        detections: per_frame,
    };
    (volume, nodes)
}

fn node_index(volume: &VideoVolume) -> std::collections::HashMap<(usize, usize), usize> {
    let mut map = std::collections::HashMap::new();
    let mut k = 0;
    for (f, frame) in volume.detections.iter().enumerate() {
        for o in 0..frame.len() {
            map.insert((f, o), k);
            k += 1;
        }
    }
    map
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn clustering_matches_pairwise_oracle(
        dets in prop::collection::vec((0usize..8, arb_box(63)), 0..30),
        threshold in 0.0f64..0.6,
        linking in arb_linking(),
    ) {
        let (volume, nodes) = build_volume(8, &dets);
        let cfg = ClusterConfig::new(threshold, linking, 1).unwrap();
        let clusters = cluster_volume(&volume, &cfg);
        let index = node_index(&volume);
        let mut got: Vec<(Vec<usize>, [i32; 4])> = clusters
            .iter()
            .map(|c| {
                let mut m: Vec<usize> = c.members.iter().map(|r| index[&(r.frame_index, r.ordinal)]).collect();
                m.sort_unstable();
                (m, c.best_box.to_array())
            })
            .collect();
        got.sort();
        prop_assert_eq!(got, oracle_partition(&nodes, threshold, linking));
        let total: usize = clusters.iter().map(|c| c.members.len()).sum();
        prop_assert_eq!(total, nodes.len());
        for c in &clusters {
            for r in &c.members {
                let b = volume.detections[r.frame_index][r.ordinal].bbox;
                prop_assert!(c.best_box.contains(&b));
            }
        }
    }

    #[test]
    fn raising_threshold_refines(
        dets in prop::collection::vec((0usize..4, arb_box(63)), 0..30),
        t1 in 0.0f64..0.5,
        dt in 0.0f64..0.5,
    ) {
        let (volume, _) = build_volume(4, &dets);
        let coarse = cluster_volume(&volume, &ClusterConfig::new(t1, TemporalLinking::AnyFrame, 1).unwrap());
        let fine = cluster_volume(&volume, &ClusterConfig::new(t1 + dt, TemporalLinking::AnyFrame, 1).unwrap());
        prop_assert!(fine.len() >= coarse.len());
        for f in &fine {
            let home = coarse.iter().find(|c| c.members.contains(&f.members[0])).unwrap();
            prop_assert!(f.members.iter().all(|m| home.members.contains(m)));
        }
    }
}

fn arb_image(max: usize) -> impl Strategy<Value = RgbImage> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h * 3)
            .prop_map(move |data| RgbImage::from_raw(w, h, data).unwrap())
    })
}

/// Direct evaluation of the half-pixel sampling formula for one output pixel.
fn naive_sample(img: &RgbImage, out_w: usize, out_h: usize, dx: usize, dy: usize, c: usize) -> f64 {
    let sx = (dx as f64 + 0.5) * img.width() as f64 / out_w as f64 - 0.5;
    let sy = (dy as f64 + 0.5) * img.height() as f64 / out_h as f64 - 0.5;
    let x0 = sx.floor();
    let y0 = sy.floor();
    let (ax, ay) = (sx - x0, sy - y0);
    let px = |x: f64, y: f64| {
        let xi = x.max(0.0).min(img.width() as f64 - 1.0) as usize;
        let yi = y.max(0.0).min(img.height() as f64 - 1.0) as usize;
        img.pixel(xi, yi)[c] as f64
    };
    px(x0, y0) * (1.0 - ax) * (1.0 - ay)
        + px(x0 + 1.0, y0) * ax * (1.0 - ay)
        + px(x0, y0 + 1.0) * (1.0 - ax) * ay
        + px(x0 + 1.0, y0 + 1.0) * ax * ay
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn resize_matches_naive_formula(img in arb_image(32), ow in 1usize..40, oh in 1usize..40) {
        let out = resize_bilinear(&img, &ResizeSpec::new(ow, oh).unwrap()).unwrap();
        for c in 0..3 {
            let lo = img.as_bytes().iter().skip(c).step_by(3).min().copied().unwrap();
            let hi = img.as_bytes().iter().skip(c).step_by(3).max().copied().unwrap();
            for y in 0..oh {
                for x in 0..ow {
                    let got = out.pixel(x, y)[c];
                    let want = naive_sample(&img, ow, oh, x, y, c).round();
                    prop_assert!((f64::from(got) - want).abs() <= 1.0);
                    prop_assert!(got >= lo && got <= hi);
                }
            }
        }
    }

    #[test]
    fn resize_preserves_constants(w in 1usize..300, h in 1usize..300, rgb in any::<[u8; 3]>()) {
        let out = resize_bilinear(&RgbImage::filled(w, h, rgb), &ResizeSpec::default()).unwrap();
        prop_assert_eq!(out, RgbImage::filled(224, 224, rgb));
    }

    #[test]
    fn hard_composite_partitions_pixels(
        (fg, bg, mask) in (1usize..24, 1usize..24).prop_flat_map(|(w, h)| (
            prop::collection::vec(any::<u8>(), w * h * 3).prop_map(move |d| RgbImage::from_raw(w, h, d).unwrap()),
            prop::collection::vec(any::<u8>(), w * h * 3).prop_map(move |d| RgbImage::from_raw(w, h, d).unwrap()),
            prop::collection::vec(any::<u8>(), w * h).prop_map(move |d| GrayImage::from_raw(w, h, d).unwrap()),
        )),
        threshold in any::<u8>(),
    ) {
        let spec = AugmentSpec { binarize_threshold: threshold, feather_radius: 0 };
        let out = composite_frame(&fg, &mask, &bg, &spec).unwrap();
        for y in 0..fg.height() {
            for x in 0..fg.width() {
                let want = if mask.get(x, y) >= threshold { fg.pixel(x, y) } else { bg.pixel(x, y) };
                prop_assert_eq!(out.pixel(x, y), want);
            }
        }
        let feathered = AugmentSpec { binarize_threshold: threshold, feather_radius: 2 };
        prop_assert_eq!(composite_frame(&fg, &mask, &fg, &feathered).unwrap(), fg.clone());
    }

    #[test]
    fn containers_round_trip(
        (shape, data) in (1usize..8, 1usize..16, 1usize..16).prop_flat_map(|(n, h, w)| {
            let shape = vec![n, h, w, 3];
            prop::collection::vec(any::<u8>(), n * h * w * 3).prop_map(move |d| (shape.clone(), d))
        }),
        chunk in 1usize..10,
    ) {
        let file = npy::encode(&shape, &data).unwrap();
        let (s, p) = npy::decode(&file).unwrap();
        prop_assert_eq!((&s, p), (&shape, &data[..]));
        prop_assert_eq!(npy::decode_header(&file).unwrap().data_offset % 64, 0);
        let file = chunked::encode(&shape, &data, chunk).unwrap();
        let (layout, p) = chunked::decode(&file).unwrap();
        prop_assert_eq!(&layout.shape, &shape);
        prop_assert_eq!(fnv1a64(&p), fnv1a64(&data));
    }
}

fn exact(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| {
        let r = Ratio::new(u128::from(num), u128::from(den));
        // correctly rounded numerator/denominator via the reduced fraction
        *r.numer() as f64 / *r.denom() as f64
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn metrics_match_rationals(tp in 0u64..1_000_000, fp in 0u64..1_000_000, tn in 0u64..1_000_000, fn_ in 0u64..1_000_000) {
        let cm = ConfusionMatrix { tp, fp, tn, fn_ };
        let m = metrics_of(&cm);
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        };
        prop_assert!(close(m.accuracy, exact(tp + tn, tp + fp + tn + fn_)));
        prop_assert!(close(m.precision, exact(tp, tp + fp)));
        prop_assert!(close(m.sensitivity, exact(tp, tp + fn_)));
        prop_assert!(close(m.specificity, exact(tn, tn + fp)));
    }

    #[test]
    fn swapping_columns_exchanges_fp_and_fn(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let lab = |b: bool| if b { Label::Fight } else { Label::NonFight };
        let flip = |l: Label| if l == Label::Fight { Label::NonFight } else { Label::Fight };
        let cm = tubeforge_core::metrics::confusion(pairs.iter().map(|&(p, t)| (lab(p), lab(t)))).unwrap();
        let swapped = tubeforge_core::metrics::confusion(pairs.iter().map(|&(p, t)| (lab(t), lab(p)))).unwrap();
        prop_assert_eq!((swapped.tp, swapped.tn, swapped.fp, swapped.fn_), (cm.tp, cm.tn, cm.fn_, cm.fp));
        let relabeled = tubeforge_core::metrics::confusion(pairs.iter().map(|&(p, t)| (flip(lab(p)), flip(lab(t))))).unwrap();
        prop_assert_eq!(metrics_of(&relabeled).accuracy, metrics_of(&cm).accuracy);
    }
}
