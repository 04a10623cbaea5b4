//! Closed-form and quadrature solutions of the continuum equations.

mod line;
mod plane;

pub use line::{absorption_split, boundary_point_image_density, gaussian_1d, image_solution_1d, AbsorptionSplit, ImageSolution1d};
pub use plane::{
    boundary_weights, composite_solution_2d, edge_solutions, gaussian_2d, BoundaryWeights, CompositeSolution2d,
    EdgeSolution, QuadraticForm, DEFAULT_SOURCE_NODES, DEFAULT_TIME_NODES,
};
