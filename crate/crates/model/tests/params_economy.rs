//! Parameter-count guarantees: the multi-scale block must be cheaper than a
//! plain bottleneck of the same width, and the default model must stay in
//! the desk-scale regime (~1e5 parameters).

use gopnet_model::{
    Bottleneck, BottleneckConfig, Modality, ModelConfig, MsbConfig, MultiScaleBlock,
    TwoStreamModel,
};

fn msb_at(width: usize) -> MultiScaleBlock {
    MultiScaleBlock::new(
        MsbConfig {
            in_channels: width,
            mid_channels: width / 4,
            out_channels: width,
            with_dm: true,
            fixed_temporal_kernel: false,
            literal_cascade: false,
        },
        "m",
    )
    .unwrap()
}

fn bottleneck_at(width: usize) -> Bottleneck {
    Bottleneck::new(
        BottleneckConfig {
            in_channels: width,
            mid_channels: width / 4,
            out_channels: width,
            with_dm: false,
        },
        "b",
    )
    .unwrap()
}

#[test]
fn multi_scale_block_is_cheaper_than_bottleneck_at_every_width() {
    for width in [32, 64, 128] {
        let msb = msb_at(width).param_count();
        let bn = bottleneck_at(width).param_count();
        assert!(
            msb < bn,
            "width {width}: multi-scale {msb} should undercut bottleneck {bn}"
        );
    }
}

#[test]
fn block_costs_are_pinned() {
    // Closed-form counts; a change here means the architecture changed.
    assert_eq!(msb_at(32).param_count(), 822);
    assert_eq!(bottleneck_at(32).param_count(), 2288);
    assert_eq!(msb_at(128).param_count(), 12456);
    assert_eq!(bottleneck_at(128).param_count(), 36032);
}

#[test]
fn default_model_is_desk_scale() {
    let model: TwoStreamModel = TwoStreamModel::build(ModelConfig::default(), 0).unwrap();
    let n = model.param_count();
    assert_eq!(n, 116_980);
    assert!((50_000..500_000).contains(&n), "got {n}");
    assert_eq!(n, model.params.param_count());
}

#[test]
fn single_stream_variants_are_smaller_than_the_full_model() {
    let full: TwoStreamModel = TwoStreamModel::build(ModelConfig::default(), 0).unwrap();
    for modality in [Modality::RgbOnly, Modality::MvrOnly] {
        let cfg = ModelConfig {
            modality,
            use_smc: false,
            use_cma: false,
            ..ModelConfig::default()
        };
        let one: TwoStreamModel = TwoStreamModel::build(cfg, 0).unwrap();
        assert!(one.param_count() < full.param_count());
    }
}
