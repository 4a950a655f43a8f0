//! Numerical integration of the state system, the closed-loop dynamics and
//! the mass/share decomposition, plus discounted payoff computation.
//!
//! The full state follows `X' = phi(<e,X>) X + (D + Bᵀ) X - c`. Under the
//! affine feedback `c_i = theta <e, X>` on active nodes this is equivalent
//! to the decoupled pair `m' = (phi(m) - f theta) m` (scalar mass) and
//! `Y' = M_theta Y` (linear shares), which gives two independent routes to
//! the same trajectory and a closed-form mass oracle for both.

pub mod rk45;

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::growth::{GrowthModel, PolicyCoefficients, Regime};
use crate::network::{ExtractionPattern, Network};
use crate::spectral::shift_matrix;
use rk45::Rk45;

/// A complete problem instance: network, active set, growth law, discount
/// rate and initial stock.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub network: Network<T>,
    pub pattern: ExtractionPattern,
    pub growth: GrowthModel<T>,
    pub rho: T,
    pub x0: DVector<T>,
}

impl<T: Float> Scenario<T> {
    pub fn new(
        network: Network<T>,
        pattern: ExtractionPattern,
        growth: GrowthModel<T>,
        rho: T,
        x0: DVector<T>,
    ) -> Result<Self> {
        if pattern.n() != network.n() {
            return Err(Error::DimensionMismatch {
                expected: network.n(),
                actual: pattern.n(),
            });
        }
        if x0.len() != network.n() {
            return Err(Error::DimensionMismatch {
                expected: network.n(),
                actual: x0.len(),
            });
        }
        for i in 0..x0.len() {
            if x0[i] < T::zero() {
                return Err(Error::NegativeInitialStock {
                    index: i,
                    value: x0[i].to_f64(),
                });
            }
        }
        if x0.sum() <= T::zero() {
            return Err(Error::ZeroTotalMass);
        }
        Ok(Self {
            network,
            pattern,
            growth,
            rho,
            x0,
        })
    }

    pub fn n(&self) -> usize {
        self.network.n()
    }

    pub fn f(&self) -> usize {
        self.pattern.f()
    }
}

/// Integrator and output-grid settings.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig<T> {
    pub horizon: T,
    pub rel_tol: T,
    pub abs_tol: T,
    /// Step cap; defaults to `horizon / 100`.
    pub max_step: Option<T>,
    /// Slack below zero before a state counts as an orthant violation.
    pub negativity_tol: T,
    /// Number of uniform output intervals (even, for Simpson quadrature).
    pub grid_intervals: usize,
}

impl<T: Float> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            horizon: T::of(100.0),
            rel_tol: T::of(1e-9),
            abs_tol: T::of(1e-12),
            max_step: None,
            negativity_tol: T::of(1e-9),
            grid_intervals: 2048,
        }
    }
}

impl<T: Float> SimConfig<T> {
    pub fn with_horizon(horizon: T) -> Self {
        Self {
            horizon,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon <= T::zero() {
            return Err(Error::HorizonNonpositive {
                value: self.horizon.to_f64(),
            });
        }
        if self.rel_tol <= T::zero() || self.abs_tol <= T::zero() {
            return Err(Error::InvalidSimConfig { name: "tolerances" });
        }
        if self.negativity_tol <= T::zero() {
            return Err(Error::InvalidSimConfig {
                name: "negativity_tol",
            });
        }
        if self.grid_intervals < 2 || self.grid_intervals % 2 != 0 {
            return Err(Error::InvalidSimConfig {
                name: "grid_intervals",
            });
        }
        Ok(())
    }

    fn solver(&self, horizon: T) -> Rk45<T> {
        Rk45 {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step.unwrap_or(horizon / T::of(100.0)),
            ..Default::default()
        }
    }
}

/// Time-stamped closed-loop run: states, masses, shares, controls and
/// running discounted utilities on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<DVector<T>>,
    pub masses: Vec<T>,
    pub shares: Vec<DVector<T>>,
    pub controls: Vec<DVector<T>>,
    /// Cumulative discounted utility per active node, in pattern order.
    pub payoff_partials: Vec<DVector<T>>,
    /// False once any component dips below `-negativity_tol`; integration
    /// continues past the violation for diagnostics when possible.
    pub admissible: bool,
    pub first_violation: Option<T>,
    /// True when the integrator could not continue to the horizon (only
    /// happens on inadmissible runs whose field blows up).
    pub truncated: bool,
}

impl<T: Float> Trajectory<T> {
    pub fn end_time(&self) -> T {
        *self.times.last().expect("nonempty grid")
    }

    pub fn final_state(&self) -> &DVector<T> {
        self.states.last().expect("nonempty grid")
    }

    /// Export as CSV: time, per-node stocks, total mass, shares, controls
    /// and the cumulative discounted payoff, 12 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.states[0].len();
        write!(out, "time")?;
        for i in 1..=n {
            write!(out, ",X_{i}")?;
        }
        write!(out, ",m")?;
        for i in 1..=n {
            write!(out, ",Y_{i}")?;
        }
        for i in 1..=n {
            write!(out, ",c_{i}")?;
        }
        writeln!(out, ",cumulative_discounted_payoff")?;
        for k in 0..self.times.len() {
            write!(out, "{:.11e}", self.times[k].to_f64())?;
            for i in 0..n {
                write!(out, ",{:.11e}", self.states[k][i].to_f64())?;
            }
            write!(out, ",{:.11e}", self.masses[k].to_f64())?;
            for i in 0..n {
                write!(out, ",{:.11e}", self.shares[k][i].to_f64())?;
            }
            for i in 0..n {
                write!(out, ",{:.11e}", self.controls[k][i].to_f64())?;
            }
            writeln!(out, ",{:.11e}", self.payoff_partials[k].sum().to_f64())?;
        }
        Ok(())
    }
}

/// Shares-and-mass run from the decoupled route.
#[derive(Debug, Clone)]
pub struct ShareTrajectory<T> {
    pub times: Vec<T>,
    pub shares: Vec<DVector<T>>,
    pub masses: Vec<T>,
    pub admissible: bool,
    pub first_violation: Option<T>,
}

impl<T: Float> ShareTrajectory<T> {
    /// Reconstruct the full state `X = m Y` at grid index `k`.
    pub fn state_at(&self, k: usize) -> DVector<T> {
        &self.shares[k] * self.masses[k]
    }
}

/// Right-hand side of the state equation for an explicit control vector.
pub fn vector_field<T: Float>(
    sc: &Scenario<T>,
    x: &DVector<T>,
    c: &DVector<T>,
) -> Result<DVector<T>> {
    if c.len() != sc.n() {
        return Err(Error::DimensionMismatch {
            expected: sc.n(),
            actual: c.len(),
        });
    }
    let m = x.sum();
    if m <= T::zero() {
        return Err(Error::ZeroTotalMass);
    }
    let phi = sc.growth.phi(m)?;
    let mut dx = sc.network.net_inflow(x)?;
    dx.axpy(phi, x, T::one());
    dx -= c;
    Ok(dx)
}

/// Integrate the closed loop under the uniform affine feedback
/// `c_i = theta <e, X>` on active nodes.
pub fn integrate_closed_loop<T: Float>(
    sc: &Scenario<T>,
    theta: T,
    cfg: &SimConfig<T>,
) -> Result<Trajectory<T>> {
    let mut rates = DVector::zeros(sc.n());
    for &i in sc.pattern.active() {
        rates[i] = theta;
    }
    integrate_feedback_profile(sc, &rates, cfg)
}

/// Integrate the closed loop under per-node affine feedback
/// `c_i = rates_i <e, X>` (used for unilateral deviations).
pub fn integrate_feedback_profile<T: Float>(
    sc: &Scenario<T>,
    rates: &DVector<T>,
    cfg: &SimConfig<T>,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    if rates.len() != sc.n() {
        return Err(Error::DimensionMismatch {
            expected: sc.n(),
            actual: rates.len(),
        });
    }
    let n = sc.n();
    let op = sc.network.migration_operator().matrix().clone();
    let growth = sc.growth;
    let nan = T::of(f64::NAN);
    let rhs = |_t: T, x: &DVector<T>, dx: &mut DVector<T>| {
        let m = x.sum();
        if !(m > T::zero()) || !finite(m) {
            dx.fill(nan);
            return;
        }
        let phi = growth.phi(m).expect("positive mass");
        dx.gemv(T::one(), &op, x, T::zero());
        for i in 0..n {
            dx[i] += phi * x[i] - m * rates[i];
        }
    };

    let sol = cfg.solver(cfg.horizon).solve(rhs, T::zero(), cfg.horizon, &sc.x0)?;
    let truncated = sol.t_reached < cfg.horizon;
    let t_end = if truncated { sol.t_reached } else { cfg.horizon };

    let grid = uniform_grid(t_end, cfg.grid_intervals);
    let states: Vec<DVector<T>> = grid.iter().map(|&t| sol.sample(t)).collect();
    let masses: Vec<T> = states.iter().map(|x| x.sum()).collect();
    let shares: Vec<DVector<T>> = states
        .iter()
        .zip(&masses)
        .map(|(x, &m)| x / m)
        .collect();
    let controls: Vec<DVector<T>> = masses.iter().map(|&m| rates * m).collect();

    let (admissible, first_violation) = scan_violation(&grid, &states, cfg.negativity_tol);
    if truncated && admissible {
        return Err(Error::StepSizeUnderflow {
            t: sol.t_reached.to_f64(),
        });
    }

    let payoff_partials = running_payoffs(sc, &grid, &controls);

    Ok(Trajectory {
        times: grid,
        states,
        masses,
        shares,
        controls,
        payoff_partials,
        admissible,
        first_violation,
        truncated,
    })
}

/// Integrate the decoupled share dynamics `Y' = M_theta Y` and the scalar
/// mass law `m' = (phi(m) - f theta) m` separately.
pub fn integrate_share_dynamics<T: Float>(
    sc: &Scenario<T>,
    theta: T,
    cfg: &SimConfig<T>,
) -> Result<ShareTrajectory<T>> {
    cfg.validate()?;
    let op = sc.network.migration_operator();
    let m_theta = shift_matrix(&op, &sc.pattern, theta);
    let m0 = sc.x0.sum();
    let y0 = &sc.x0 / m0;

    let share_rhs = |_t: T, y: &DVector<T>, dy: &mut DVector<T>| {
        dy.gemv(T::one(), &m_theta, y, T::zero());
    };
    let share_sol = cfg
        .solver(cfg.horizon)
        .solve(share_rhs, T::zero(), cfg.horizon, &y0)?;

    let growth = sc.growth;
    let aggregate = T::of(sc.f() as f64) * theta;
    let nan = T::of(f64::NAN);
    let mass_rhs = |_t: T, m: &DVector<T>, dm: &mut DVector<T>| {
        if !(m[0] > T::zero()) || !finite(m[0]) {
            dm.fill(nan);
            return;
        }
        let phi = growth.phi(m[0]).expect("positive mass");
        dm[0] = (phi - aggregate) * m[0];
    };
    let mass_sol = cfg.solver(cfg.horizon).solve(
        mass_rhs,
        T::zero(),
        cfg.horizon,
        &DVector::from_element(1, m0),
    )?;

    let t_end = share_sol.t_reached.min(mass_sol.t_reached).min(cfg.horizon);
    let grid = uniform_grid(t_end, cfg.grid_intervals);
    let shares: Vec<DVector<T>> = grid.iter().map(|&t| share_sol.sample(t)).collect();
    let masses: Vec<T> = grid.iter().map(|&t| mass_sol.sample(t)[0]).collect();
    let (admissible, first_violation) = scan_violation(&grid, &shares, cfg.negativity_tol);

    Ok(ShareTrajectory {
        times: grid,
        shares,
        masses,
        admissible,
        first_violation,
    })
}

/// Evaluate the share dynamics by eigen-expansion of `M_theta` when it is
/// diagonalizable with a well-conditioned eigenbasis; returns `None`
/// otherwise so callers can fall back to the ODE route.
pub fn share_expansion<T: Float>(
    sc: &Scenario<T>,
    theta: T,
    times: &[T],
) -> Option<Vec<DVector<T>>> {
    let op = sc.network.migration_operator();
    let m = shift_matrix(&op, &sc.pattern, theta);
    let n = m.nrows();
    let eigs = m.complex_eigenvalues();
    let scale = eigs.iter().fold(T::one(), |acc, l| acc.max(l.modulus()));
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigs[i] - eigs[j]).modulus() <= T::of(1e-8) * scale {
                return None;
            }
        }
    }

    let mc: DMatrix<Complex<T>> = m.map(|v| Complex::new(v, T::zero()));
    let mut basis = DMatrix::<Complex<T>>::zeros(n, n);
    for (k, lambda) in eigs.iter().enumerate() {
        let mut shifted = mc.clone();
        for i in 0..n {
            shifted[(i, i)] -= *lambda;
        }
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        let mut idx = 0;
        for i in 1..svd.singular_values.len() {
            if svd.singular_values[i] < svd.singular_values[idx] {
                idx = i;
            }
        }
        for i in 0..n {
            basis[(i, k)] = v_t[(idx, i)].conjugate();
        }
    }

    let m0 = sc.x0.sum();
    let y0: DVector<Complex<T>> = sc.x0.map(|v| Complex::new(v / m0, T::zero()));
    let coeffs = basis.clone().lu().solve(&y0)?;

    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut y = DVector::<Complex<T>>::zeros(n);
        for k in 0..n {
            let factor = coeffs[k] * (eigs[k] * Complex::new(t, T::zero())).exp();
            for i in 0..n {
                y[i] += factor * basis[(i, k)];
            }
        }
        let imag = y.iter().fold(T::zero(), |acc, v| acc.max(v.im.abs()));
        if imag > T::of(1e-7) {
            return None;
        }
        out.push(y.map(|v| v.re));
    }
    Some(out)
}

/// How the infinite-horizon tail beyond the trajectory is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailCorrection {
    /// Add `e^{-rho T} V(X(T))` with the candidate value function.
    CandidateValue,
    /// Truncate at the horizon.
    None,
}

/// Discounted payoffs along a trajectory.
#[derive(Debug, Clone)]
pub struct Payoff<T> {
    /// One value per active node, in pattern order.
    pub per_node: Vec<T>,
    /// Sum over active nodes.
    pub total: T,
}

/// Quadrature of `e^{-rho t} u(c_i(t))` per active node on the trajectory
/// grid, optionally closed by the candidate-value tail at the end time.
///
/// A vanishing control with curvature `sigma >= 1` makes the utility
/// integral `-inf`; the sentinel propagates to the affected players.
pub fn discounted_payoff<T: Float>(
    traj: &Trajectory<T>,
    sc: &Scenario<T>,
    pc: &PolicyCoefficients<T>,
    tail: TailCorrection,
) -> Result<Payoff<T>> {
    if sc.rho <= T::zero() {
        return Err(Error::NonconvergentTail {
            rho: sc.rho.to_f64(),
        });
    }
    let grid = &traj.times;
    let h = grid[1] - grid[0];
    let mut per_node = Vec::with_capacity(sc.f());
    let t_end = traj.end_time();
    let tail_total = match tail {
        TailCorrection::CandidateValue => {
            let m_end = *traj.masses.last().expect("nonempty grid");
            (-sc.rho * t_end).exp() * pc.value_at_mass(&sc.growth, m_end)?
        }
        TailCorrection::None => T::zero(),
    };
    let tail_per_node = match pc.regime {
        // The planner value aggregates all players; the game value is per
        // player already.
        Regime::Planner => tail_total / T::of(pc.f as f64),
        Regime::Game => tail_total,
    };

    for &i in sc.pattern.active() {
        let vals: Vec<T> = grid
            .iter()
            .zip(&traj.controls)
            .map(|(&t, c)| discounted_utility(&sc.growth, sc.rho, t, c[i]))
            .collect();
        per_node.push(simpson(h, &vals) + tail_per_node);
    }
    let total = per_node.iter().fold(T::zero(), |acc, &v| acc + v);
    Ok(Payoff { per_node, total })
}

/// `e^{-rho t} u(c)` extended by the zero-consumption limit: 0 for
/// curvature below 1, `-inf` otherwise.
fn discounted_utility<T: Float>(growth: &GrowthModel<T>, rho: T, t: T, c: T) -> T {
    if c > T::zero() {
        (-rho * t).exp() * growth.utility(c).expect("positive consumption")
    } else if growth.utility_unbounded_below() {
        T::NEG_INFINITY
    } else {
        T::zero()
    }
}

fn uniform_grid<T: Float>(t_end: T, intervals: usize) -> Vec<T> {
    let n = T::of(intervals as f64);
    (0..=intervals)
        .map(|k| t_end * T::of(k as f64) / n)
        .collect()
}

fn scan_violation<T: Float>(
    grid: &[T],
    states: &[DVector<T>],
    tol: T,
) -> (bool, Option<T>) {
    for (k, x) in states.iter().enumerate() {
        for i in 0..x.len() {
            let violated = x[i] < -tol || !finite(x[i]);
            if violated {
                return (false, Some(grid[k]));
            }
        }
    }
    (true, None)
}

fn running_payoffs<T: Float>(
    sc: &Scenario<T>,
    grid: &[T],
    controls: &[DVector<T>],
) -> Vec<DVector<T>> {
    let f = sc.f();
    let h = if grid.len() > 1 { grid[1] - grid[0] } else { T::zero() };
    let mut out = Vec::with_capacity(grid.len());
    let mut cumulative = DVector::<T>::zeros(f);
    let mut prev_vals = DVector::<T>::zeros(f);
    let mut prev_prev_vals = DVector::<T>::zeros(f);
    for (k, (&t, c)) in grid.iter().zip(controls).enumerate() {
        let mut vals = DVector::zeros(f);
        for (slot, &i) in sc.pattern.active().iter().enumerate() {
            vals[slot] = discounted_utility(&sc.growth, sc.rho, t, c[i]);
        }
        if k > 0 {
            if k % 2 == 0 {
                // Complete Simpson pair; replace the provisional trapezoid
                // contribution of the previous point.
                let h3 = h / T::of(3.0);
                for s in 0..f {
                    cumulative[s] -= h * T::of(0.5) * (prev_prev_vals[s] + prev_vals[s]);
                    cumulative[s] += h3 * (prev_prev_vals[s] + T::of(4.0) * prev_vals[s] + vals[s]);
                }
            } else {
                for s in 0..f {
                    cumulative[s] += h * T::of(0.5) * (prev_vals[s] + vals[s]);
                }
            }
        }
        out.push(cumulative.clone());
        prev_prev_vals = prev_vals;
        prev_vals = vals;
    }
    out
}

/// Composite Simpson rule on a uniform grid with an even number of
/// intervals.
pub fn simpson<T: Float>(h: T, values: &[T]) -> T {
    let n = values.len() - 1;
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even interval count");
    let mut acc = values[0] + values[n];
    for (k, &v) in values.iter().enumerate().skip(1).take(n - 1) {
        acc += if k % 2 == 1 { T::of(4.0) * v } else { T::of(2.0) * v };
    }
    acc * h / T::of(3.0)
}

fn finite<T: Float>(v: T) -> bool {
    v == v && v.abs() < T::INFINITY
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{game_policy, mass_closed_form, planner_policy};
    use crate::network::inflow_threshold;
    use crate::spectral::eigen_decompose;
    use approx::assert_relative_eq;

    fn three_node(scale: f64) -> Network<f64> {
        Network::new(
            DMatrix::from_row_slice(3, 3, &[0.0, 0.3, 0.2, 0.4, 0.0, 0.1, 0.25, 0.35, 0.0])
                * scale,
        )
        .unwrap()
    }

    fn s1_scenario(scale: f64) -> Scenario<f64> {
        Scenario::new(
            three_node(scale),
            ExtractionPattern::new(3, &[0, 1]).unwrap(),
            GrowthModel::logistic(1.0, 10.0, 2.0).unwrap(),
            0.05,
            DVector::from_vec(vec![0.4, 0.3, 0.3]),
        )
        .unwrap()
    }

    #[test]
    fn field_vanishes_at_the_no_extraction_rest_point() {
        let sc = s1_scenario(1.0);
        let sd = eigen_decompose(&sc.network.migration_operator()).unwrap();
        let x = &sd.zeta * sc.growth.m_bar();
        let dx = vector_field(&sc, &x, &DVector::zeros(3)).unwrap();
        assert!(dx.amax() < 1e-9, "residual {}", dx.amax());
    }

    #[test]
    fn field_matches_hand_evaluation_on_two_nodes() {
        let net = Network::fick(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let sc = Scenario::new(
            net,
            ExtractionPattern::new(2, &[0]).unwrap(),
            GrowthModel::logistic(1.0, 10.0, 2.0).unwrap(),
            0.05,
            DVector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        let dx = vector_field(&sc, &sc.x0.clone(), &DVector::zeros(2)).unwrap();
        let phi1 = sc.growth.phi(1.0).unwrap();
        assert_relative_eq!(dx[0], phi1 - 1.0, epsilon = 1e-14);
        assert_relative_eq!(dx[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn field_mass_balance_for_random_controls() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sc = s1_scenario(1.0);
        for _ in 0..20 {
            let x = DVector::from_fn(3, |_, _| rng.random::<f64>() + 0.1);
            let c = DVector::from_fn(3, |_, _| rng.random::<f64>());
            let dx = vector_field(&sc, &x, &c).unwrap();
            let m = x.sum();
            let expect = sc.growth.phi(m).unwrap() * m - c.sum();
            assert_relative_eq!(dx.sum(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn integrated_mass_tracks_closed_form() {
        let sc = s1_scenario(1.0);
        let cfg = SimConfig {
            horizon: 30.0,
            ..Default::default()
        };
        let pc = planner_policy(&sc.growth, 2, sc.rho).unwrap();
        let traj = integrate_closed_loop(&sc, pc.theta, &cfg).unwrap();
        for (k, &t) in traj.times.iter().enumerate() {
            let oracle = mass_closed_form(&sc.growth, 1.0, 2, pc.theta, t).unwrap();
            assert_relative_eq!(traj.masses[k], oracle, max_relative = 1e-7);
        }
    }

    #[test]
    fn doubled_weights_keep_planner_runs_admissible() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let base = s1_scenario(2.0);
        let pc = planner_policy(&base.growth, 2, base.rho).unwrap();
        let threshold = inflow_threshold(&base.network, &base.pattern);
        assert!(pc.theta < threshold);
        let cfg = SimConfig {
            horizon: 20.0,
            ..Default::default()
        };
        for _ in 0..20 {
            let x0 = DVector::from_fn(3, |_, _| rng.random::<f64>() * 2.0);
            let sc = Scenario::new(
                base.network.clone(),
                base.pattern.clone(),
                base.growth,
                base.rho,
                x0,
            )
            .unwrap();
            let traj = integrate_closed_loop(&sc, pc.theta, &cfg).unwrap();
            assert!(traj.admissible, "violation at {:?}", traj.first_violation);
        }
    }

    #[test]
    fn share_route_reconstructs_the_full_state() {
        let sc = s1_scenario(2.0);
        let pc = game_policy(&sc.growth, 2, sc.rho).unwrap();
        let cfg = SimConfig {
            horizon: 25.0,
            ..Default::default()
        };
        let full = integrate_closed_loop(&sc, pc.theta, &cfg).unwrap();
        let decoupled = integrate_share_dynamics(&sc, pc.theta, &cfg).unwrap();
        for k in 0..full.times.len() {
            let rebuilt = decoupled.state_at(k);
            for i in 0..3 {
                assert_relative_eq!(full.states[k][i], rebuilt[i], max_relative = 1e-6);
            }
            assert_relative_eq!(decoupled.shares[k].sum(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn share_fixed_point_stays_fixed() {
        let sc = s1_scenario(2.0);
        let theta = 0.3;
        let op = sc.network.migration_operator();
        let shifted = crate::spectral::shifted_matrix(&op, &sc.pattern, theta).unwrap();
        assert!(shifted.positive);
        let m0 = 1.7;
        let sc_fixed = Scenario::new(
            sc.network.clone(),
            sc.pattern.clone(),
            sc.growth,
            sc.rho,
            &shifted.zeta_theta * m0,
        )
        .unwrap();
        let cfg = SimConfig {
            horizon: 10.0,
            ..Default::default()
        };
        let traj = integrate_share_dynamics(&sc_fixed, theta, &cfg).unwrap();
        for y in &traj.shares {
            for i in 0..3 {
                assert_relative_eq!(y[i], shifted.zeta_theta[i], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn eigen_expansion_agrees_with_ode_route() {
        let sc = s1_scenario(2.0);
        let theta = 0.25;
        let cfg = SimConfig {
            horizon: 12.0,
            ..Default::default()
        };
        let ode = integrate_share_dynamics(&sc, theta, &cfg).unwrap();
        let expansion = share_expansion(&sc, theta, &ode.times).expect("diagonalizable");
        for (y_ode, y_exp) in ode.shares.iter().zip(&expansion) {
            for i in 0..3 {
                assert_relative_eq!(y_ode[i], y_exp[i], epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn payoff_matches_candidate_value_for_planner() {
        let sc = s1_scenario(2.0);
        let pc = planner_policy(&sc.growth, 2, sc.rho).unwrap();
        let cfg = SimConfig {
            horizon: 50.0,
            ..Default::default()
        };
        let traj = integrate_closed_loop(&sc, pc.theta, &cfg).unwrap();
        let payoff = discounted_payoff(&traj, &sc, &pc, TailCorrection::CandidateValue).unwrap();
        let value = pc.value_at_mass(&sc.growth, 1.0).unwrap();
        assert_relative_eq!(payoff.total, value, max_relative = 1e-5);
        // Symmetric feedback: every player earns the same.
        assert_relative_eq!(payoff.per_node[0], payoff.per_node[1], epsilon = 1e-10);
    }

    #[test]
    fn zero_extraction_payoff_is_minus_infinity_for_log_utility() {
        let sc = Scenario::new(
            three_node(1.0),
            ExtractionPattern::new(3, &[0, 1]).unwrap(),
            GrowthModel::log_saturating(1.0, 2.0).unwrap(),
            0.05,
            DVector::from_vec(vec![0.4, 0.3, 0.3]),
        )
        .unwrap();
        let pc = planner_policy(&sc.growth, 2, sc.rho).unwrap();
        let cfg = SimConfig {
            horizon: 5.0,
            ..Default::default()
        };
        let traj = integrate_closed_loop(&sc, 0.0, &cfg).unwrap();
        let payoff = discounted_payoff(&traj, &sc, &pc, TailCorrection::None).unwrap();
        assert_eq!(payoff.total, f64::NEG_INFINITY);
    }

    #[test]
    fn csv_export_shape() {
        let sc = s1_scenario(2.0);
        let cfg = SimConfig {
            horizon: 1.0,
            grid_intervals: 4,
            ..Default::default()
        };
        let traj = integrate_closed_loop(&sc, 0.1, &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time,X_1,X_2,X_3,m,Y_1,Y_2,Y_3,c_1,c_2,c_3,cumulative_discounted_payoff"
        );
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn nonpositive_horizon_is_rejected() {
        let sc = s1_scenario(1.0);
        let cfg = SimConfig {
            horizon: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate_closed_loop(&sc, 0.1, &cfg).unwrap_err(),
            Error::HorizonNonpositive { .. }
        ));
    }
}
