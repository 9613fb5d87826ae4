//! Runs every example end to end.

macro_rules! examples {
    ($($name:ident => $path:literal),* $(,)?) => {
        $(
            #[path = $path]
            mod $name;

            #[test]
            fn $name() {
                $name::run().unwrap();
            }
        )*
    };
}

examples!(
    feature_format => "../examples/feature_format.rs",
    pooling => "../examples/pooling.rs",
    vlad => "../examples/vlad.rs",
    domain_vocabulary => "../examples/domain_vocabulary.rs",
    pca_whitening => "../examples/pca_whitening.rs",
    domain_scatter => "../examples/domain_scatter.rs",
    retrieval => "../examples/retrieval.rs",
    cluster_maps => "../examples/cluster_maps.rs",
    aggregation_comparison => "../examples/aggregation_comparison.rs",
    vocabulary_study => "../examples/vocabulary_study.rs",
    cls_passthrough => "../examples/cls_passthrough.rs",
);
