//! Explicit ReLU/binary-unit networks that approximate multiplication, division
//! and unrolled WMMSE iterations with certified error bounds.

mod arith;
mod graph;
mod serialize;
mod wmmse_net;

pub use arith::{
    build_div_net, build_mul_net, div_error_bound, div_net_counts, leading_exponent, mul_error_bound, mul_net_counts,
    ArithNet, BitExpansionSpec, Bits, Domain,
};
pub use graph::{GraphBuilder, GraphCounts, Lin, Unit, UnitGraph, UnitKind};
pub use serialize::{load_graph, read_graph, save_graph, write_graph, FORMAT_VERSION};
pub use wmmse_net::{
    bit_count_estimate, build_wmmse_net, plan_bits, wmmse_error_amplifier, wmmse_net_counts, AdmissibleSet, NetInit,
    WmmseNet, WmmseNetConfig, GATE_SLACK,
};
