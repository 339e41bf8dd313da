//! Loaded graphs (directed graphs with positive edge weights), their
//! first-return series and recurrence classes, equilibrium Markov measures of
//! finite graphs, and nested sequences of finite subgraphs of infinite
//! linear and petal graphs.

pub mod cli;
pub mod cycle_series;
pub mod equilibrium;
pub mod error;
pub mod families;
pub mod formats;
pub mod graph;
pub mod numeric;
pub mod sequences;

pub use cycle_series::{
    classify_family, classify_finite, enumerate_simple_cycles, eval_series, radius_estimate,
    return_series, simple_cycle_sum, solve_unit_root, Classification, EvalOrder, FirstReturn,
    RecurrenceClass, ReturnSeries,
};
pub use equilibrium::{cylinder_measure, kac_residual, parry_measure, perron_data, EquilibriumMeasure, PerronData};
pub use error::{Error, Result};
pub use families::{
    chain_family, family_eval, jumpy_family, max_vertex_profile, petal_family, realize_finite,
    FamilyDescriptor, PetalRule,
};
pub use graph::{subgraph_generated_by, CyclePath, Edge, LoadedGraph, VertexId};
pub use numeric::CertifiedValue;
pub use sequences::{
    a_of_n, build_gn, build_gnm, irregular_search, mix_sequences, polynomial_decomposition,
    regular_scan, run_irregular_search, structural_gap_check, verdict, SequenceReport,
    SubgraphSpec, Verdict,
};
