// SPDX-License-Identifier: Apache-2.0

pub mod attacks;
pub mod fixtures;
pub mod gdsii;
pub mod geom;
pub mod layout;
pub mod lefdef;
pub mod metrics;
pub mod netlist;
