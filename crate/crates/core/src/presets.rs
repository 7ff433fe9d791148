//! The delay settings of the numerical experiments, and a generator of
//! random configurations from the same families.

use rand::Rng;

use crate::delay::{DelayDistribution, DelayModel, SystemConfig};
use crate::error::Result;

/// `Y = C + Exp(gamma)`, `X ~ Uniform[0, C]`.
pub fn shifted_exp_uniform_ack(c: f64, gamma: f64, inv_fmax: f64) -> Result<SystemConfig> {
    SystemConfig::new(
        DelayModel::shifted_exponential(c, gamma)?,
        DelayModel::uniform(0.0, c)?,
        inv_fmax,
    )
}

/// `Y = C + Exp(gamma)`, `X = C / 2`.
pub fn shifted_exp_constant_ack(c: f64, gamma: f64, inv_fmax: f64) -> Result<SystemConfig> {
    SystemConfig::new(
        DelayModel::shifted_exponential(c, gamma)?,
        DelayModel::constant(0.5 * c)?,
        inv_fmax,
    )
}

/// `Y = 10`, `X ~ Uniform[0, 10]`.
pub fn constant_uniform_ack(inv_fmax: f64) -> Result<SystemConfig> {
    SystemConfig::new(DelayModel::constant(10.0)?, DelayModel::uniform(0.0, 10.0)?, inv_fmax)
}

/// Draws a random system from the experiment families.
///
/// `Y` is one of
/// * `C + Exp(gamma)` with `C ~ U[2, 15]`, `gamma ~ U[0.1, 2]`,
/// * `Uniform[lo, lo + w]` with `lo ~ U[2, 15]`, `w ~ U[0, 10]`,
/// * `Constant(c)` with `c ~ U[2, 15]`,
///
/// and `X`, with `m = inf Y`, is one of `Uniform[0, m]`, `Constant(m / 2)`,
/// `Uniform[a, b]` with `0 <= a <= b <= m` drawn uniformly, or
/// `Constant(u m)` with `u ~ U[0, 1]`.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, inv_fmax: f64) -> SystemConfig {
    let y = match rng.random_range(0..3) {
        0 => DelayModel::ShiftedExponential {
            shift: rng.random_range(2.0..15.0),
            rate: rng.random_range(0.1..2.0),
        },
        1 => {
            let lo = rng.random_range(2.0..15.0);
            DelayModel::Uniform {
                lo,
                hi: lo + rng.random_range(0.0..10.0),
            }
        }
        _ => DelayModel::Constant {
            c: rng.random_range(2.0..15.0),
        },
    };
    let m = y.support_bounds().0;
    let x = match rng.random_range(0..4) {
        0 => DelayModel::Uniform { lo: 0.0, hi: m },
        1 => DelayModel::Constant { c: 0.5 * m },
        2 => {
            let (a, b) = (rng.random_range(0.0..m), rng.random_range(0.0..m));
            DelayModel::Uniform {
                lo: a.min(b),
                hi: a.max(b),
            }
        }
        _ => DelayModel::Constant {
            c: rng.random_range(0.0..1.0) * m,
        },
    };
    SystemConfig::new(y, x, inv_fmax).expect("generated families satisfy sup X <= inf Y")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_systems_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let c = random_system(&mut rng, 3.0);
            assert!(c.x.support_bounds().1 <= c.y.support_bounds().0);
            assert_eq!(c.inv_fmax, 3.0);
        }
    }

    #[test]
    fn presets() {
        let c = constant_uniform_ack(0.0).unwrap();
        assert_eq!(c.y, DelayModel::Constant { c: 10.0 });
        let c = shifted_exp_constant_ack(8.0, 2.0, 1.0).unwrap();
        assert_eq!(c.x, DelayModel::Constant { c: 4.0 });
        assert!(shifted_exp_uniform_ack(10.0, 1.0, -1.0).is_err());
    }
}
