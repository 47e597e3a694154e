// SPDX-License-Identifier: Apache-2.0

pub mod analysis;
pub mod attack;
pub mod campaign;
pub mod compile;
pub mod netlist;
pub mod plan;
pub mod planner;
pub mod sim;

/// Simulation block with 64 patterns per word.
pub type PatternBlock64 = sim::PatternBlock<u64>;
