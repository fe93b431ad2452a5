//! Fixed benchmark environments used by the verification suite.

use crate::offspring::{EnvironmentModel, OffspringLaw};

/// Uniform mixture of law A `{1: .5, 2: .5}` and law B `{2: .6, 3: .4}`: the general case.
pub fn m1() -> EnvironmentModel {
    EnvironmentModel::new(
        vec![
            OffspringLaw::new(&[(1, 0.5), (2, 0.5)]).expect("valid law"),
            OffspringLaw::new(&[(2, 0.6), (3, 0.4)]).expect("valid law"),
        ],
        vec![0.5, 0.5],
    )
    .expect("valid environment")
}

/// Uniform mixture of "exactly one child" and "exactly two children": `W_n ≡ 1`,
/// and `ln(Z_{n0+n}/Z_{n0}) = K ln 2` with `K ~ Binomial(n, 1/2)`.
pub fn m2() -> EnvironmentModel {
    EnvironmentModel::new(
        vec![
            OffspringLaw::point_mass(1).expect("valid law"),
            OffspringLaw::point_mass(2).expect("valid law"),
        ],
        vec![0.5, 0.5],
    )
    .expect("valid environment")
}

/// Constant environment with law `{1: .25, 2: .5, 3: .25}`. `X` is constant here, so
/// this model only exercises the simulator and the enumeration oracle.
pub fn m3() -> EnvironmentModel {
    EnvironmentModel::constant(
        OffspringLaw::new(&[(1, 0.25), (2, 0.5), (3, 0.25)]).expect("valid law"),
    )
    .expect("valid environment")
}

pub fn by_name(name: &str) -> Option<EnvironmentModel> {
    match name.to_ascii_lowercase().as_str() {
        "m1" => Some(m1()),
        "m2" => Some(m2()),
        "m3" => Some(m3()),
        _ => None,
    }
}
