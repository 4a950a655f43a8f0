//! Growth families, utilities, closed-form policy coefficients, mass
//! trajectories and steady states.
//!
//! Three saturation laws pair with their utilities: the logistic-type and
//! power laws with CRRA (same curvature `sigma`), the log-type law with log
//! utility. For each pairing both the planner problem and the symmetric
//! game admit affine feedback `c_i = theta <e, x>` on active nodes, with
//! closed-form value coefficients `(A, B)` such that
//! `V(x) = A u(<e, x>) + B`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::float::Float;
use crate::network::ExtractionPattern;

/// Concave aggregate-mass saturation law and (implicitly) its paired
/// utility: CRRA for the first two families, log for the third.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthModel<T> {
    /// `phi(m) = gamma (1 - m^(sigma-1) / capacity)`, `sigma > 1`, CRRA utility.
    Logistic { gamma: T, capacity: T, sigma: T },
    /// `phi(m) = m^(sigma-1) - decay`, `0 < sigma < 1`, CRRA utility.
    Power { sigma: T, decay: T },
    /// `phi(m) = gamma (1 - ln m / log_capacity)`, log utility.
    LogSaturating { gamma: T, log_capacity: T },
}

/// Which optimization regime a policy solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Single welfare-maximizing extractor controlling all active nodes.
    Planner,
    /// Symmetric Markov equilibrium of competing extractors.
    Game,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Planner => write!(out, "planner"),
            Regime::Game => write!(out, "game"),
        }
    }
}

/// Closed-form feedback coefficient and value-function constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyCoefficients<T> {
    pub regime: Regime,
    /// Per-active-node extraction fraction of total mass (1/time).
    pub theta: T,
    /// Value-function slope on `u(<e, x>)`.
    pub a: T,
    /// Value-function intercept.
    pub b: T,
    /// Aggregate extraction rate `f * theta`. For the planner this is
    /// computed in an `f`-free form, so it is bit-identical across `f`.
    pub aggregate: T,
    /// Number of active nodes the policy was solved for.
    pub f: usize,
    /// `theta > 0` plus the regime-specific side conditions.
    pub interior: bool,
    /// `theta < inflow_threshold`; set once a network bound is known.
    pub globally_admissible: Option<bool>,
}

impl<T: Float> PolicyCoefficients<T> {
    /// Record whether the policy stays below the network's inflow bound.
    pub fn with_inflow_threshold(mut self, threshold: T) -> Self {
        self.globally_admissible = Some(self.theta < threshold);
        self
    }

    /// Candidate value `A u(m) + B` at total mass `m`.
    pub fn value_at_mass(&self, growth: &GrowthModel<T>, m: T) -> Result<T> {
        if m <= T::zero() {
            return Err(Error::ZeroTotalMass);
        }
        Ok(self.a * growth.utility(m)? + self.b)
    }
}

/// No-extraction and extracted long-run masses plus the over-extraction gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStates<T> {
    /// Long-run mass with no extraction.
    pub m_bar: T,
    /// Long-run mass under the planner feedback.
    pub m_star: T,
    /// Long-run mass in the decentralized game.
    pub m_hat: T,
    /// Aggregate extraction gap `f theta_hat - f theta_star`.
    pub delta_f: T,
}

impl<T: Float> GrowthModel<T> {
    pub fn logistic(gamma: T, capacity: T, sigma: T) -> Result<Self> {
        require(gamma > T::zero(), "gamma", gamma, "gamma > 0")?;
        require(capacity > T::zero(), "capacity", capacity, "capacity > 0")?;
        require(sigma > T::one(), "sigma", sigma, "sigma > 1")?;
        Ok(Self::Logistic { gamma, capacity, sigma })
    }

    pub fn power(sigma: T, decay: T) -> Result<Self> {
        require(
            sigma > T::zero() && sigma < T::one(),
            "sigma",
            sigma,
            "0 < sigma < 1",
        )?;
        require(decay > T::zero(), "decay", decay, "decay > 0")?;
        Ok(Self::Power { sigma, decay })
    }

    pub fn log_saturating(gamma: T, log_capacity: T) -> Result<Self> {
        require(gamma > T::zero(), "gamma", gamma, "gamma > 0")?;
        require(
            log_capacity != T::zero(),
            "log_capacity",
            log_capacity,
            "log_capacity != 0",
        )?;
        Ok(Self::LogSaturating { gamma, log_capacity })
    }

    /// Per-unit growth rate at total mass `m > 0`.
    pub fn phi(&self, m: T) -> Result<T> {
        if m <= T::zero() {
            return Err(Error::NonpositiveMass { value: m.to_f64() });
        }
        Ok(match *self {
            Self::Logistic { gamma, capacity, sigma } => {
                gamma * (T::one() - m.powf(sigma - T::one()) / capacity)
            }
            Self::Power { sigma, decay } => m.powf(sigma - T::one()) - decay,
            Self::LogSaturating { gamma, log_capacity } => {
                gamma * (T::one() - m.ln() / log_capacity)
            }
        })
    }

    /// The mass at which `phi` equals `rate`; inverts the saturation law.
    pub fn phi_inverse(&self, rate: T) -> Result<T> {
        match *self {
            Self::Logistic { gamma, capacity, sigma } => {
                let arg = capacity * (T::one() - rate / gamma);
                if arg <= T::zero() {
                    return Err(Error::NegativeStockWarning { value: arg.to_f64() });
                }
                Ok(arg.powf((sigma - T::one()).recip()))
            }
            Self::Power { sigma, decay } => {
                let arg = decay + rate;
                if arg <= T::zero() {
                    return Err(Error::NegativeStockWarning { value: arg.to_f64() });
                }
                Ok(arg.powf((sigma - T::one()).recip()))
            }
            Self::LogSaturating { gamma, log_capacity } => {
                Ok((log_capacity * (T::one() - rate / gamma)).exp())
            }
        }
    }

    /// Long-run mass with no extraction: the zero of `phi`.
    pub fn m_bar(&self) -> T {
        self.phi_inverse(T::zero()).expect("phi has a positive zero")
    }

    /// Instantaneous utility of consumption `c > 0`.
    pub fn utility(&self, c: T) -> Result<T> {
        if c <= T::zero() {
            return Err(Error::NonpositiveConsumption { value: c.to_f64() });
        }
        Ok(match *self {
            Self::Logistic { sigma, .. } | Self::Power { sigma, .. } => {
                let om = T::one() - sigma;
                c.powf(om) / om
            }
            Self::LogSaturating { .. } => c.ln(),
        })
    }

    /// Marginal utility `u'(c)`.
    pub fn marginal_utility(&self, c: T) -> Result<T> {
        if c <= T::zero() {
            return Err(Error::NonpositiveConsumption { value: c.to_f64() });
        }
        Ok(match *self {
            Self::Logistic { sigma, .. } | Self::Power { sigma, .. } => c.powf(-sigma),
            Self::LogSaturating { .. } => c.recip(),
        })
    }

    /// Per-agent maximized Hamiltonian term `sup_c {u(c) - c p}` at shadow
    /// price `p > 0`.
    pub fn hamiltonian(&self, p: T) -> Result<T> {
        if p <= T::zero() {
            return Err(Error::NonpositiveConsumption { value: p.to_f64() });
        }
        Ok(match *self {
            Self::Logistic { sigma, .. } | Self::Power { sigma, .. } => {
                // At c* = p^(-1/sigma): u(c*) - c* p = sigma/(1-sigma) p^((sigma-1)/sigma).
                sigma / (T::one() - sigma) * p.powf((sigma - T::one()) / sigma)
            }
            Self::LogSaturating { .. } => -p.ln() - T::one(),
        })
    }

    /// Short family tag for reports.
    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Logistic { .. } => "logistic",
            Self::Power { .. } => "power",
            Self::LogSaturating { .. } => "log",
        }
    }

    /// Utility curvature; 1 for the log family.
    pub fn sigma(&self) -> T {
        match *self {
            Self::Logistic { sigma, .. } | Self::Power { sigma, .. } => sigma,
            Self::LogSaturating { .. } => T::one(),
        }
    }

    /// Whether utility diverges to `-inf` as consumption vanishes
    /// (curvature at or above 1).
    pub fn utility_unbounded_below(&self) -> bool {
        self.sigma() >= T::one()
    }

    /// Total mass at time `t` under constant aggregate extraction rate
    /// `aggregate`, starting from `m0`.
    ///
    /// Solves `m' = m (phi(m) - aggregate)` exactly via the linearizing
    /// substitution (`m^(1-sigma)` for the CRRA families, `ln m` for the
    /// log family). No side conditions are enforced here; the balanced
    /// logistic case `gamma = aggregate` falls back to the linear-drift
    /// solution.
    pub fn mass_at_rate(&self, m0: T, aggregate: T, t: T) -> T {
        match *self {
            Self::Logistic { gamma, capacity, sigma } => {
                let r = gamma - aggregate;
                let mu0 = m0.powf(T::one() - sigma);
                let mu = if r == T::zero() {
                    mu0 + (sigma - T::one()) * gamma / capacity * t
                } else {
                    let mu_inf = gamma / (capacity * r);
                    (-(sigma - T::one()) * r * t).exp() * (mu0 - mu_inf) + mu_inf
                };
                mu.powf((T::one() - sigma).recip())
            }
            Self::Power { sigma, decay } => {
                let q = decay + aggregate;
                let mu0 = m0.powf(T::one() - sigma);
                let mu_inf = q.recip();
                let mu = (-q * (T::one() - sigma) * t).exp() * (mu0 - mu_inf) + mu_inf;
                mu.powf((T::one() - sigma).recip())
            }
            Self::LogSaturating { gamma, log_capacity } => {
                let mu_inf = log_capacity * (T::one() - aggregate / gamma);
                let mu = (-(gamma / log_capacity) * t).exp() * (m0.ln() - mu_inf) + mu_inf;
                mu.exp()
            }
        }
    }
}

fn require<T: Float>(
    ok: bool,
    name: &'static str,
    value: T,
    requirement: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidGrowthParameter {
            name,
            value: value.to_f64(),
            requirement,
        })
    }
}

/// Planner feedback coefficient and value constants for `f` active nodes.
pub fn planner_policy<T: Float>(
    growth: &GrowthModel<T>,
    f: usize,
    rho: T,
) -> Result<PolicyCoefficients<T>> {
    let ff = T::of(f as f64);
    // Aggregate extraction f*theta in an f-free form: the planner's total
    // extraction is independent of how many sites share it.
    let (aggregate, a, b) = match *growth {
        GrowthModel::Logistic { gamma, capacity, sigma } => {
            let aggregate = (rho + gamma * (sigma - T::one())) / sigma;
            let theta = aggregate / ff;
            let a = theta.powf(-sigma);
            (aggregate, a, -gamma * a / (capacity * rho))
        }
        GrowthModel::Power { sigma, decay } => {
            let aggregate = (rho + decay * (T::one() - sigma)) / sigma;
            let theta = aggregate / ff;
            let a = theta.powf(-sigma);
            (aggregate, a, a / rho)
        }
        GrowthModel::LogSaturating { gamma, log_capacity } => {
            let aggregate = rho + gamma / log_capacity;
            let theta = aggregate / ff;
            let a = theta.recip();
            let b = (gamma - aggregate + aggregate * theta.ln()) / (theta * rho);
            (aggregate, a, b)
        }
    };
    let theta = aggregate / ff;
    if theta <= T::zero() {
        return Err(Error::NoninteriorPolicy {
            theta: theta.to_f64(),
            reason: "planner rate must be positive",
        });
    }
    Ok(PolicyCoefficients {
        regime: Regime::Planner,
        theta,
        a,
        b,
        aggregate,
        f,
        interior: true,
        globally_admissible: None,
    })
}

/// Symmetric-equilibrium feedback coefficient and per-player value
/// constants for `f` competing extractors.
pub fn game_policy<T: Float>(
    growth: &GrowthModel<T>,
    f: usize,
    rho: T,
) -> Result<PolicyCoefficients<T>> {
    if f == 1 {
        // A single extractor plays the planner problem; reusing its
        // closed form keeps the two rates bit-identical.
        let planner = planner_policy(growth, 1, rho)?;
        return Ok(PolicyCoefficients {
            regime: Regime::Game,
            ..planner
        });
    }
    let ff = T::of(f as f64);
    let (theta, a, b) = match *growth {
        GrowthModel::Logistic { gamma, capacity, sigma } => {
            let theta = (rho + gamma * (sigma - T::one())) / (T::one() + ff * (sigma - T::one()));
            let a = theta.powf(-sigma);
            (theta, a, -gamma * a / (capacity * rho))
        }
        GrowthModel::Power { sigma, decay } => {
            let denom = T::one() - ff * (T::one() - sigma);
            if denom <= T::zero() {
                return Err(Error::NoninteriorPolicy {
                    theta: f64::INFINITY,
                    reason: "power family requires f < 1/(1 - sigma)",
                });
            }
            let theta = (rho + decay * (T::one() - sigma)) / denom;
            let a = theta.powf(-sigma);
            (theta, a, a / rho)
        }
        GrowthModel::LogSaturating { gamma, log_capacity } => {
            let theta = rho + gamma / log_capacity;
            let a = theta.recip();
            let b = (gamma + theta * theta.ln() - ff * theta) / (theta * rho);
            (theta, a, b)
        }
    };
    if theta <= T::zero() {
        return Err(Error::NoninteriorPolicy {
            theta: theta.to_f64(),
            reason: "equilibrium rate must be positive",
        });
    }
    Ok(PolicyCoefficients {
        regime: Regime::Game,
        theta,
        a,
        b,
        aggregate: ff * theta,
        f,
        interior: true,
        globally_admissible: None,
    })
}

/// Long-run masses for no extraction, the planner and the game, plus the
/// over-extraction gap. The extracted steady states invert `phi` at the
/// aggregate rates so the defining identities `phi(m) = f theta` hold by
/// construction.
pub fn steady_masses<T: Float>(
    growth: &GrowthModel<T>,
    f: usize,
    rho: T,
) -> Result<SteadyStates<T>> {
    let planner = planner_policy(growth, f, rho)?;
    let game = game_policy(growth, f, rho)?;
    Ok(SteadyStates {
        m_bar: growth.m_bar(),
        m_star: growth.phi_inverse(planner.aggregate)?,
        m_hat: growth.phi_inverse(game.aggregate)?,
        delta_f: game.aggregate - planner.aggregate,
    })
}

/// Total mass at time `t` under the closed-loop feedback `theta <e, x>` on
/// `f` nodes, starting from `m0`.
pub fn mass_closed_form<T: Float>(
    growth: &GrowthModel<T>,
    m0: T,
    f: usize,
    theta: T,
    t: T,
) -> Result<T> {
    if m0 <= T::zero() {
        return Err(Error::NonpositiveMass { value: m0.to_f64() });
    }
    let aggregate = T::of(f as f64) * theta;
    match *growth {
        GrowthModel::Logistic { gamma, .. } => {
            if theta > T::zero() && gamma <= aggregate {
                return Err(Error::SideConditionViolated {
                    condition: "logistic family requires gamma > f * theta",
                });
            }
        }
        GrowthModel::Power { sigma, .. } => {
            if T::of(f as f64) * (T::one() - sigma) >= T::one() {
                return Err(Error::SideConditionViolated {
                    condition: "power family requires f (1 - sigma) < 1",
                });
            }
        }
        GrowthModel::LogSaturating { .. } => {}
    }
    if t == T::zero() {
        return Ok(m0);
    }
    Ok(growth.mass_at_rate(m0, aggregate, t))
}

/// Candidate value `A u(<e, x>) + B` for the given regime.
pub fn candidate_value<T: Float>(
    growth: &GrowthModel<T>,
    f: usize,
    rho: T,
    regime: Regime,
    x: &DVector<T>,
) -> Result<T> {
    let pc = match regime {
        Regime::Planner => planner_policy(growth, f, rho)?,
        Regime::Game => game_policy(growth, f, rho)?,
    };
    pc.value_at_mass(growth, x.sum())
}

/// Affine feedback control: `c_i = theta <e, x>` on active nodes, zero on
/// reserves.
pub fn feedback_control<T: Float>(
    pc: &PolicyCoefficients<T>,
    pat: &ExtractionPattern,
    x: &DVector<T>,
) -> DVector<T> {
    let mass = x.sum();
    let mut c = DVector::zeros(x.len());
    for &i in pat.active() {
        c[i] = pc.theta * mass;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub fn s1() -> GrowthModel<f64> {
        GrowthModel::logistic(1.0, 10.0, 2.0).unwrap()
    }
    pub fn s2() -> GrowthModel<f64> {
        GrowthModel::power(0.5, 0.1).unwrap()
    }
    pub fn s3() -> GrowthModel<f64> {
        GrowthModel::log_saturating(1.0, 2.0).unwrap()
    }

    #[test]
    fn saturation_zeroes_at_carrying_capacity() {
        assert_relative_eq!(s1().phi(10.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(s2().phi(100.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(s3().phi(std::f64::consts::E.powi(2)).unwrap(), 0.0, epsilon = 1e-14);
        assert!(matches!(
            s1().phi(0.0).unwrap_err(),
            Error::NonpositiveMass { .. }
        ));
    }

    #[test]
    fn utility_values() {
        assert_relative_eq!(s3().utility(1.0).unwrap(), 0.0);
        assert_relative_eq!(s1().utility(2.0).unwrap(), -0.5);
        assert_relative_eq!(s2().utility(4.0).unwrap(), 4.0);
        assert!(matches!(
            s3().utility(0.0).unwrap_err(),
            Error::NonpositiveConsumption { .. }
        ));
    }

    #[test]
    fn planner_reference_coefficients() {
        let pc = planner_policy(&s1(), 2, 0.05).unwrap();
        assert_relative_eq!(pc.theta, 0.2625, max_relative = 1e-12);
        assert_relative_eq!(pc.a, 14.512471655328797, max_relative = 1e-12);
        assert_relative_eq!(pc.b, -29.024943310657594, max_relative = 1e-12);
        assert!(pc.interior);

        let pc3 = planner_policy(&s3(), 2, 0.05).unwrap();
        assert_relative_eq!(pc3.theta, 0.275, max_relative = 1e-12);
        assert_relative_eq!(pc3.a, 3.6363636363636362, max_relative = 1e-12);
        assert_relative_eq!(pc3.b, -18.9120945253499, max_relative = 1e-12);

        let pc2 = planner_policy(&s2(), 1, 0.05).unwrap();
        assert_relative_eq!(pc2.theta, 0.2, max_relative = 1e-12);
        assert_relative_eq!(pc2.a, 2.23606797749979, max_relative = 1e-12);
        assert_relative_eq!(pc2.b, 44.721359549995796, max_relative = 1e-12);
    }

    #[test]
    fn game_reference_coefficients() {
        let pc = game_policy(&s1(), 2, 0.05).unwrap();
        assert_relative_eq!(pc.theta, 0.35, max_relative = 1e-12);
        assert_relative_eq!(pc.a, 8.163265306122447, max_relative = 1e-12);
        assert_relative_eq!(pc.b, -16.326530612244895, max_relative = 1e-12);

        let pc3 = game_policy(&s3(), 2, 0.05).unwrap();
        assert_relative_eq!(pc3.theta, 0.55, max_relative = 1e-12);
        assert_relative_eq!(pc3.b, -15.593103651476047, max_relative = 1e-12);
    }

    #[test]
    fn single_extractor_game_equals_planner_exactly() {
        for g in [s1(), s2(), s3()] {
            let p = planner_policy(&g, 1, 0.05).unwrap();
            let q = game_policy(&g, 1, 0.05).unwrap();
            assert_eq!(p.theta, q.theta);
            assert_eq!(p.a, q.a);
            assert_eq!(p.b, q.b);
            assert_eq!(q.regime, Regime::Game);
        }
    }

    #[test]
    fn power_family_boundary_is_noninterior() {
        // f (1 - sigma) = 1 exactly at sigma = 0.5, f = 2.
        let err = game_policy(&s2(), 2, 0.05).unwrap_err();
        assert!(matches!(err, Error::NoninteriorPolicy { .. }));
    }

    #[test]
    fn steady_states_reference() {
        let ss = steady_masses(&s1(), 2, 0.05).unwrap();
        assert_relative_eq!(ss.m_bar, 10.0, max_relative = 1e-12);
        assert_relative_eq!(ss.m_star, 4.75, max_relative = 1e-12);
        assert_relative_eq!(ss.m_hat, 3.0, max_relative = 1e-12);
        assert_relative_eq!(ss.delta_f, 0.175, max_relative = 1e-12);
        // Gap equals f (theta_hat - theta_star).
        let p = planner_policy(&s1(), 2, 0.05).unwrap();
        let g = game_policy(&s1(), 2, 0.05).unwrap();
        assert_relative_eq!(ss.delta_f, 2.0 * (g.theta - p.theta), max_relative = 1e-12);

        // Log family: steady states satisfy the defining identities
        // phi(m*) = f theta*, phi(m_hat) = f theta_hat.
        let ss3 = steady_masses(&s3(), 2, 0.05).unwrap();
        assert_relative_eq!(ss3.m_bar, 7.38905609893065, max_relative = 1e-12);
        assert_relative_eq!(ss3.m_star, 2.4596031111569494, max_relative = 1e-12);
        assert_relative_eq!(ss3.m_hat, 0.8187307530779819, max_relative = 1e-12);
        assert_relative_eq!(ss3.delta_f, 0.55, max_relative = 1e-12);
        let p3 = planner_policy(&s3(), 2, 0.05).unwrap();
        let g3 = game_policy(&s3(), 2, 0.05).unwrap();
        assert_relative_eq!(s3().phi(ss3.m_star).unwrap(), p3.aggregate, epsilon = 1e-12);
        assert_relative_eq!(s3().phi(ss3.m_hat).unwrap(), g3.aggregate, epsilon = 1e-12);
    }

    #[test]
    fn single_extractor_steady_states_coincide() {
        for g in [s1(), s2(), s3()] {
            let ss = steady_masses(&g, 1, 0.05).unwrap();
            assert_eq!(ss.m_star, ss.m_hat);
            assert_eq!(ss.delta_f, 0.0);
        }
    }

    #[test]
    fn mass_closed_form_examples() {
        // Initial condition returned exactly.
        assert_eq!(mass_closed_form(&s1(), 1.0, 2, 0.0, 0.0).unwrap(), 1.0);
        // No-extraction logistic path m(t) = 1/(0.9 e^-t + 0.1).
        assert_relative_eq!(
            mass_closed_form(&s1(), 1.0, 2, 0.0, 1.0).unwrap(),
            2.319693166840739,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            mass_closed_form(&s1(), 1.0, 2, 0.0, 60.0).unwrap(),
            10.0,
            max_relative = 1e-10
        );
        // Planner extraction converges to m*.
        assert_relative_eq!(
            mass_closed_form(&s1(), 1.0, 2, 0.2625, 3.0).unwrap(),
            2.4974936507214602,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            mass_closed_form(&s1(), 1.0, 2, 0.2625, 120.0).unwrap(),
            4.75,
            max_relative = 1e-10
        );
    }

    #[test]
    fn mass_closed_form_side_conditions() {
        assert!(matches!(
            mass_closed_form(&s1(), 1.0, 2, 0.6, 1.0).unwrap_err(),
            Error::SideConditionViolated { .. }
        ));
        assert!(matches!(
            mass_closed_form(&s2(), 1.0, 2, 0.1, 1.0).unwrap_err(),
            Error::SideConditionViolated { .. }
        ));
        assert!(matches!(
            mass_closed_form(&s1(), 0.0, 2, 0.0, 1.0).unwrap_err(),
            Error::NonpositiveMass { .. }
        ));
    }

    #[test]
    fn candidate_value_reference_and_permutation_invariance() {
        let x = DVector::from_vec(vec![0.2, 0.5, 0.3]);
        let v = candidate_value(&s1(), 2, 0.05, Regime::Planner, &x).unwrap();
        assert_relative_eq!(v, -43.53741496598639, max_relative = 1e-12);
        let permuted = DVector::from_vec(vec![0.3, 0.2, 0.5]);
        let vp = candidate_value(&s1(), 2, 0.05, Regime::Planner, &permuted).unwrap();
        assert_relative_eq!(v, vp, epsilon = 1e-14);

        // Log utility of unit mass vanishes, leaving the intercept.
        let pc3 = planner_policy(&s3(), 2, 0.05).unwrap();
        let v3 = candidate_value(&s3(), 2, 0.05, Regime::Planner, &x).unwrap();
        assert_relative_eq!(v3, pc3.b, epsilon = 1e-12);

        assert!(matches!(
            candidate_value(&s1(), 2, 0.05, Regime::Planner, &DVector::zeros(3)).unwrap_err(),
            Error::ZeroTotalMass
        ));
    }

    #[test]
    fn feedback_control_examples() {
        let pat = ExtractionPattern::new(3, &[0, 1]).unwrap();
        let pc = planner_policy(&s1(), 2, 0.05).unwrap();
        let zero = feedback_control(&pc, &pat, &DVector::zeros(3));
        assert_eq!(zero, DVector::zeros(3));

        let x = DVector::from_vec(vec![0.4, 0.3, 0.3]);
        let c = feedback_control(&pc, &pat, &x);
        assert_relative_eq!(c[0], 0.2625, max_relative = 1e-12);
        assert_relative_eq!(c[1], 0.2625, max_relative = 1e-12);
        assert_eq!(c[2], 0.0);
        assert_relative_eq!(c.sum(), pc.aggregate * x.sum(), max_relative = 1e-12);
    }

    #[test]
    fn pairing_is_validated() {
        assert!(GrowthModel::logistic(1.0, 10.0, 0.5).is_err());
        assert!(GrowthModel::power(2.0, 0.1).is_err());
        assert!(GrowthModel::power(0.5, -0.1).is_err());
        assert!(GrowthModel::log_saturating(0.0, 2.0).is_err());
    }
}
