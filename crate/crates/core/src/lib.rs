pub mod config;
pub mod curvature_compare;
pub mod error;
pub mod exp_log_maps;
pub mod jacobi_gronwall;
pub mod linalg;
pub mod mollify_check;
pub mod ode;
pub mod pipeline;
pub mod quadrature;
pub mod radial_models;
pub mod sampler;
