//! Complex polynomials: interpolation, roots, partial fractions.

mod interp;
mod partial;
mod polynomial;
mod roots;

pub use interp::{circle_nodes, det_poly, poly_from_circle, poly_from_samples, taylor_on_circle, NODE_RADIUS};
pub(crate) use partial::pole_clusters;
pub(crate) use roots::roots_from_values;
pub use partial::{expand, partial_fractions, PartialFractionExpansion, PoleTerm};
pub use polynomial::{Polynomial, DROP_TOL};
pub use roots::{find_roots, Location, Root, RootSet, CIRCLE_TOL, CLUSTER_TOL};
