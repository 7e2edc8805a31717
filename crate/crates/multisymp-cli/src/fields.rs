//! Named test fields for the lift/residual/deform commands, per example
//! shape.

use multisymp::grassmann::ProblemShape;

use crate::config::ConfigError;

type FieldFn = Box<dyn Fn(&[f64]) -> Vec<f64>>;

/// Resolves a field name for the given shape. `default` picks a smooth
/// generic field for full-Dedecker examples and a solution field for the
/// dDW ones.
pub fn resolve(name: &str, shape: ProblemShape) -> Result<FieldFn, ConfigError> {
    let unknown = |name: &str| ConfigError {
        message: format!(
            "unknown field '{name}' for shape ({}, {})",
            shape.n, shape.k
        ),
    };
    match (shape.n, shape.k) {
        (2, 2) => match name {
            "default" | "smooth" => Ok(Box::new(|x| {
                vec![x[0].sin() * x[1].cos(), x[0] * x[1] + 0.3 * x[1] * x[1]]
            })),
            "linear" => Ok(Box::new(|x| vec![x[0], x[1]])),
            "harmonic_pair" => Ok(Box::new(|x| {
                vec![x[0] * x[1], x[0] * x[0] - x[1] * x[1]]
            })),
            "parabola" => Ok(Box::new(|x| vec![x[0] * x[0], 0.0])),
            other => Err(unknown(other)),
        },
        (2, 1) => match name {
            "default" | "harmonic" => Ok(Box::new(|x| vec![x[0] * x[1]])),
            "saddle" => Ok(Box::new(|x| vec![x[0] * x[0] - x[1] * x[1]])),
            "parabola" => Ok(Box::new(|x| vec![x[0] * x[0]])),
            other => Err(unknown(other)),
        },
        (1, k) => match name {
            "default" | "oscillator" => Ok(Box::new(move |x| vec![x[0].cos(); k])),
            "quadratic" => Ok(Box::new(move |x| vec![x[0] * x[0]; k])),
            "line" => Ok(Box::new(move |x| vec![0.5 + 2.0 * x[0]; k])),
            other => Err(unknown(other)),
        },
        _ => Err(unknown(name)),
    }
}
