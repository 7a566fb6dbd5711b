//! Lagged climate joins, design matrices and elastic-net feature selection.

mod design;
mod elastic_net;
mod lag;

pub use design::{
    build_features, is_continuous, rol_index_change, ColumnScaling, FeatureMatrix, FeatureSpec, Standardization,
    Standardize, BENCHMARK_COLUMNS, EXTENDED_EXTRA_COLUMNS,
};
pub use elastic_net::{
    elastic_net, elastic_net_cv, elastic_net_select, select_features, soft_threshold, ElasticNetCv, ElasticNetFit,
    ElasticNetGrid, Selection,
};
pub use lag::{lag_join, lagged_correlations, LagCorrelation, LagCorrelationTable};
