pub mod diffusion;
pub mod geometry;
pub mod metrics;
pub mod perception;
pub mod raster;
pub mod scene;
pub mod scenegraph;
