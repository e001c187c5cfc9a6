//! The dataset's whole point is that labels are functions of motion, so
//! these tests recompute motion statistics from the encoded streams and
//! check each class's accumulated fields carry its generating signature.

use gopnet_codec::{accumulate_stream, AccumulatedFields};
use gopnet_train::dataset::{synth_stream, DatasetConfig};

fn small_cfg() -> DatasetConfig {
    DatasetConfig {
        videos_per_class: 5,
        ..DatasetConfig::default()
    }
}

fn fields_for(class: usize, index: usize) -> (DatasetConfig, Vec<AccumulatedFields>) {
    let cfg = small_cfg();
    let stream = synth_stream(&cfg, class, index).unwrap();
    let accum = accumulate_stream(&stream).unwrap();
    (cfg, accum)
}

/// Mean accumulated (dy, dx) over every pixel of P-frame `p` of GOP 0.
fn mean_mv(fields: &AccumulatedFields, p: usize) -> (f64, f64) {
    let mvs = &fields.mv[p];
    let n = mvs.len() as f64;
    let (mut sy, mut sx) = (0.0, 0.0);
    for &[dy, dx] in mvs {
        sy += dy as f64;
        sx += dx as f64;
    }
    (sy / n, sx / n)
}

/// Mean |residual| over every pixel/channel of P-frame `p` of GOP 0.
fn residual_energy(fields: &AccumulatedFields, p: usize) -> f64 {
    let res = &fields.res[p];
    res.iter().map(|&v| (v as f64).abs()).sum::<f64>() / res.len() as f64
}

#[test]
fn rightward_translation_has_exact_interior_motion_vectors() {
    let (cfg, accum) = fields_for(0, 0);
    let fields = &accum[0];
    let w = cfg.width;
    // First P-frame: per-step shift is (0, +2). Away from the wrap seam at
    // the left border, every macroblock must match exactly.
    for y in 0..cfg.height {
        for x in 16..w {
            assert_eq!(fields.mv[0][y * w + x], [0, 2], "pixel ({y},{x})");
        }
    }
}

#[test]
fn translation_classes_accumulate_along_their_axis_and_direction() {
    let (_, accum) = fields_for(0, 1);
    let last = accum[0].len() - 1;
    let (dy, dx) = mean_mv(&accum[0], last);
    assert!(dx > 8.0, "rightward class mean dx {dx}");
    assert!(dy.abs() < 2.0, "rightward class mean dy {dy}");

    let (_, accum) = fields_for(1, 1);
    let (dy, dx) = mean_mv(&accum[0], last);
    assert!(dy > 8.0, "downward class mean dy {dy}");
    assert!(dx.abs() < 2.0, "downward class mean dx {dx}");

    let (_, accum) = fields_for(3, 1);
    let (dy, dx) = mean_mv(&accum[0], last);
    assert!(dy < -8.0, "upward class mean dy {dy}");
    assert!(dx.abs() < 2.0, "upward class mean dx {dx}");
}

#[test]
fn oscillation_moves_vertically_but_stays_bounded() {
    // Class 2 sweeps along y: early P-frames show real vertical motion, yet
    // unlike the vertical translations the accumulation never outruns the
    // oscillation amplitude.
    let (_, osc) = fields_for(2, 0);
    let (dy0, dx0) = mean_mv(&osc[0], 0);
    assert!(dy0.abs() > 0.5, "oscillation first-step mean dy {dy0}");
    assert!(dx0.abs() < 0.3, "oscillation first-step mean dx {dx0}");
    for p in 0..osc[0].len() {
        let (dy, _) = mean_mv(&osc[0], p);
        assert!(dy.abs() <= 3.5, "oscillation accumulated dy {dy} at p {p}");
    }
}

#[test]
fn static_pair_separates_only_through_motion_sign() {
    // Classes 1 and 3 share an appearance family; their accumulated vertical
    // motion has the same magnitude and opposite sign, which is exactly the
    // statistic a horizontal flip cannot disturb.
    let (_, down) = fields_for(1, 2);
    let (_, up) = fields_for(3, 2);
    let p = 3;
    let (dy_down, _) = mean_mv(&down[0], p);
    let (dy_up, _) = mean_mv(&up[0], p);
    assert!(dy_down > 4.0, "downward accumulated dy {dy_down}");
    assert!(dy_up < -4.0, "upward accumulated dy {dy_up}");
    let ratio = dy_down / -dy_up;
    assert!((0.66..1.5).contains(&ratio), "magnitude ratio {ratio}");
}

#[test]
fn pure_translation_has_zero_interior_residual() {
    let (cfg, accum) = fields_for(0, 0);
    let fields = &accum[0];
    let (h, w) = (cfg.height, cfg.width);
    // First P-frame, interior region (clear of the wrap seam): prediction
    // is exact, so the residual is exactly zero.
    for c in 0..3 {
        for y in 0..h {
            for x in 16..w {
                assert_eq!(fields.res[0][(c * h + y) * w + x], 0, "({c},{y},{x})");
            }
        }
    }
}

#[test]
fn zoom_class_needs_residual_correction_everywhere() {
    // Block translation can't model a zoom, so its very first P-frame
    // already leans on residuals much harder than any shifting class
    // (whose first-frame residuals are confined to the wrap seam).
    let (_, zooming) = fields_for(4, 3);
    let e_zoom = residual_energy(&zooming[0], 0);
    for class in 0..4 {
        let (_, other) = fields_for(class, 3);
        let e_other = residual_energy(&other[0], 0);
        assert!(
            e_zoom > 2.5 * e_other.max(0.1),
            "zoom residual energy {e_zoom} vs class {class} energy {e_other}"
        );
    }
}
