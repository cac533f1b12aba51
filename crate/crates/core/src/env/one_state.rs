use crate::momdp::TabularMOMDP;

pub const ONE_STATE_GAMMA: f64 = 0.9;

/// One state, three self-looping actions with rewards `[3,0]`, `[0,3]`,
/// `[1,1]`. Max-min optimum mixes the first two actions equally.
pub fn one_state_env() -> TabularMOMDP {
    one_state_env_with_gamma(ONE_STATE_GAMMA)
}

pub fn one_state_env_with_gamma(gamma: f64) -> TabularMOMDP {
    TabularMOMDP::new(1, 3, 2, gamma, vec![1.0, 1.0, 1.0], vec![3.0, 0.0, 0.0, 3.0, 1.0, 1.0], vec![1.0]).expect("static shapes")
}
