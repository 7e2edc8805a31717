//! The README's library example, kept compiling.

use multisymp::grassmann::VelocityMatrix;
use multisymp::lagrangian::LagrangianDensity;
use multisymp::legendre::{dedecker_transform, hamiltonian_eval};

#[test]
fn readme_example_runs() {
    let density = LagrangianDensity::Dirichlet { b: 0.5 };
    let shape = multisymp::lagrangian::Density::shape(&density);
    let v = VelocityMatrix::from_entries(shape, vec![0.3, -1.0, 0.2, 0.8]);
    let (x, y) = ([0.0, 0.0], [0.0, 0.0]);

    let (point, report) = dedecker_transform(&density, &x, &y, &v, &[2.0]).unwrap();
    assert!(report.solvable);

    let value = hamiltonian_eval(&density, &x, &y, &point.p, None).unwrap();
    assert!((value.velocity.get(1, 2) - (-1.0)).abs() < 1e-9);
    assert!(value.value.is_finite());
}
