//! Matched panels, their bipartite graph and connectivity diagnostics.

pub mod bipartite;
pub mod components;
pub mod panel;
pub mod projection;
pub mod spectrum;

pub use bipartite::{build_graph, BipartiteGraph, Edge};
pub use components::{connected_components, largest_component, panel_components, Components};
pub use panel::{MatchedPanel, Observation};
pub use projection::{normalized_projected_laplacian, projected_laplacian};
pub use spectrum::{connectivity_report, laplacian_matrix, ConnectivityReport, MoverSummary};
