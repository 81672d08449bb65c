//! Built-in example models.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::model::{CksvarModel, MonetaryModelSpec};

/// Three-variable, one-lag model whose two regimes are each stable while
/// switching between them is explosive. `Sigma = I`.
pub fn example3() -> CksvarModel {
    let phi_plus = DVector::from_vec(vec![-1.37, 0.79, 0.76]);
    let phi_x = DMatrix::from_row_slice(3, 2, &[-1.00, 0.36, 0.39, -1.33, 0.71, 0.03]);
    CksvarModel::canonical_form(
        vec![phi_plus],
        vec![DVector::zeros(3)],
        vec![phi_x],
        DVector::zeros(3),
        DMatrix::identity(3, 3),
    )
    .expect("valid preset")
}

/// `(chi, theta, psi)` and the published JSR bound, with `(mu, gamma) = (0.5, 1.5)`.
pub const TABLE1: [([f64; 3], f64); 9] = [
    ([0.2, -0.5, 0.1], 0.145),
    ([0.2, -0.5, 0.5], 0.5),
    ([0.2, -0.5, 0.9], 0.9),
    ([0.7, -1.0, 0.1], 0.4),
    ([0.7, -1.0, 0.5], 0.5),
    ([0.7, -1.0, 0.9], 0.9),
    ([0.99, -0.5, 0.1], 0.72),
    ([0.99, -0.5, 0.5], 0.72),
    ([0.99, -0.5, 0.9], 0.9),
];

/// `(phi1+, phi1-, phi2+, phi2-)` and the published (JSR, CJSR, RJSR) bounds.
pub const TABLE2: [([f64; 4], [f64; 3]); 5] = [
    ([0.6, 0.2, 0.3, 0.1], [0.925, 0.925, 0.925]),
    ([0.6, 0.3, 0.4, 0.1], [1.000, 1.000, 1.000]),
    ([0.7, 0.2, -0.1, 0.0], [0.700, 0.500, 0.500]),
    ([1.2, 0.6, -1.2, -0.6], [1.245, 1.118, 1.095]),
    ([1.0, 0.5, -0.97, -0.5], [1.105, 1.001, 0.985]),
];

pub fn monetary(chi: f64, theta: f64, psi: f64) -> Result<CksvarModel> {
    MonetaryModelSpec::with_defaults(chi, theta, psi).build()
}

/// Univariate two-lag model with unit shock variance and no intercept.
pub fn univariate_two_lag(params: [f64; 4]) -> CksvarModel {
    let [a1, b1, a2, b2] = params;
    CksvarModel::univariate(&[a1, a2], &[b1, b2], 0.0, 1.0).expect("valid preset")
}
