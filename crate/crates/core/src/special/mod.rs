//! Scalar numerical kernels shared by the samplers and the variational engine.

pub mod lambda;
pub mod normal;
pub mod quadrature;
pub mod quartic;

pub use lambda::{factor_expectation, lambda_moments, log_kernel_integral, LambdaFactorParams, LambdaMoments};
pub use normal::{
    log_normal_positive_mass, normal_positive_mass, trunc_normal_mean, trunc_normal_second_central, Side,
};
pub use quartic::quartic_mode;
