//! Eigen-analysis of the migration operator and of its extraction-shifted
//! versions.
//!
//! For a strongly connected network the operator `D + Bᵀ` has a simple
//! eigenvalue 0 with a strictly positive eigenvector `zeta` (the long-run
//! share direction) while every other eigenvalue has negative real part.
//! Extracting at rate `theta` on the active set `F` replaces the share
//! dynamics matrix by `M_theta = D + Bᵀ - theta E + f theta I`, which keeps
//! 0 as an eigenvalue (left eigenvector `e`), moves its null vector to
//! `zeta_theta`, and shifts every other eigenvalue by exactly `f theta`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::network::{ExtractionPattern, MigrationOperator};

/// Absolute tolerance for identifying the structural zero eigenvalue.
const ZERO_TOL: f64 = 1e-9;
/// Entries of a nominally positive eigenvector may dip this far below zero
/// before positivity is considered lost.
const POSITIVITY_TOL: f64 = 1e-9;
/// Rounding slack on entries that are clamped to zero.
const CLAMP_TOL: f64 = 1e-12;

/// Spectrum of the migration operator and its dominant share vector.
#[derive(Debug, Clone)]
pub struct SpectralData<T> {
    /// Eigenvalues sorted by descending real part (ties by descending
    /// imaginary part; the ordering of exact conjugate pairs is a
    /// convention).
    pub eigenvalues: Vec<Complex<T>>,
    /// Positive dominant vector of `D + Bᵀ`, normalized to sum 1.
    pub zeta: DVector<T>,
    /// Real part of the second eigenvalue.
    pub lambda2_real: T,
    /// `|Re lambda_2|`; governs the convergence rate of spatial shares.
    pub spectral_gap: T,
}

/// Spectrum and null vector of the extraction-shifted operator `M_theta`.
#[derive(Debug, Clone)]
pub struct ShiftedSpectralData<T> {
    pub theta: T,
    /// `M_theta = D + Bᵀ - theta E + f theta I`.
    pub matrix: DMatrix<T>,
    /// Null-space vector, normalized to sum 1 when the sum is nonzero.
    pub zeta_theta: DVector<T>,
    pub eigenvalues: Vec<Complex<T>>,
    /// All off-diagonal entries nonnegative.
    pub metzler: bool,
    /// `zeta_theta` has no genuinely negative entry.
    pub positive: bool,
}

/// Outcome of checking the eigenvalue-shift identity.
#[derive(Debug, Clone)]
pub struct ShiftReport<T> {
    pub theta: T,
    /// Greedy nearest-match deviation between the shifted spectrum and the
    /// unshifted spectrum moved by `f theta`.
    pub max_deviation: T,
    pub tolerance: T,
    pub pass: bool,
}

/// Decompose the migration operator: sorted spectrum, dominant vector,
/// spectral gap.
pub fn eigen_decompose<T: Float>(op: &MigrationOperator<T>) -> Result<SpectralData<T>> {
    let eigenvalues = sorted_eigenvalues(op.matrix());
    let tol = T::of(ZERO_TOL);
    let near_zero = eigenvalues
        .iter()
        .filter(|l| l.re.abs() + l.im.abs() <= tol)
        .count();
    if near_zero == 0 || eigenvalues[0].re.abs() + eigenvalues[0].im.abs() > tol {
        return Err(Error::DominantEigenvalueNotZero {
            real_part: eigenvalues[0].re.to_f64(),
        });
    }
    if near_zero > 1 {
        return Err(Error::NullSpaceDimensionNot1 { count: near_zero });
    }

    let raw = sign_fixed_null_vector(op.matrix());
    if let Some((index, value)) = genuine_negative(&raw, T::of(CLAMP_TOL)) {
        return Err(Error::DominantVectorNotPositive {
            index,
            value: value.to_f64(),
        });
    }
    let zeta = clamp_and_normalize(raw);

    let lambda2_real = eigenvalues[1].re;
    Ok(SpectralData {
        spectral_gap: lambda2_real.abs(),
        eigenvalues,
        zeta,
        lambda2_real,
    })
}

/// The share-dynamics matrix `M_theta` for extraction rate `theta` on `pat`.
pub fn shift_matrix<T: Float>(
    op: &MigrationOperator<T>,
    pat: &ExtractionPattern,
    theta: T,
) -> DMatrix<T> {
    let n = op.n();
    let f_theta = T::of(pat.f() as f64) * theta;
    let mut m = op.matrix().clone();
    for &i in pat.active() {
        for j in 0..n {
            m[(i, j)] -= theta;
        }
    }
    for i in 0..n {
        m[(i, i)] += f_theta;
    }
    m
}

/// Build `M_theta`, its spectrum and null vector, plus the Metzler and
/// positivity flags.
pub fn shifted_matrix<T: Float>(
    op: &MigrationOperator<T>,
    pat: &ExtractionPattern,
    theta: T,
) -> Result<ShiftedSpectralData<T>> {
    let matrix = shift_matrix(op, pat, theta);
    let eigenvalues = sorted_eigenvalues(&matrix);
    let tol = T::of(ZERO_TOL);
    let near_zero = eigenvalues
        .iter()
        .filter(|l| l.re.abs() + l.im.abs() <= tol)
        .count();
    if near_zero != 1 {
        return Err(Error::NullSpaceDimensionNot1 { count: near_zero });
    }

    let raw = sign_fixed_null_vector(&matrix);
    let mut positive = genuine_negative(&raw, T::of(POSITIVITY_TOL)).is_none();
    let sum = raw.sum();
    let zeta_theta = if sum.abs() > T::of(CLAMP_TOL) {
        raw / sum
    } else {
        // Degenerate direction orthogonal to e: keep the unit-norm vector.
        positive = false;
        raw
    };

    let n = matrix.nrows();
    let metzler_tol = T::of(CLAMP_TOL);
    let metzler = (0..n).all(|i| (0..n).all(|j| i == j || matrix[(i, j)] >= -metzler_tol));

    Ok(ShiftedSpectralData {
        theta,
        matrix,
        zeta_theta,
        eigenvalues,
        metzler,
        positive,
    })
}

/// Patience thresholds `(theta1, theta2)` for the shifted share dynamics.
///
/// `theta1 = |Re lambda_2| / f` keeps 0 the dominant eigenvalue of
/// `M_theta`; `theta2` is the supremum of rates below which `zeta_theta`
/// stays positive, located by a geometric bracketing scan and bisection to
/// 1e-8. Returns an infinity sentinel for `theta2` when positivity never
/// fails below the scan cap.
pub fn theta_limits<T: Float>(
    op: &MigrationOperator<T>,
    pat: &ExtractionPattern,
) -> Result<(T, T)> {
    let spectral = eigen_decompose(op)?;
    let f = T::of(pat.f() as f64);
    let theta1 = spectral.spectral_gap / f;

    let threshold = operator_inflow_threshold(op, pat);
    let cap = T::of(10.0) * threshold + T::of(10.0) * theta1;
    let positive_at = |theta: T| -> bool {
        // A degenerate null space counts as loss of positivity: it can only
        // occur where some shifted eigenvalue crosses zero.
        shifted_matrix(op, pat, theta)
            .map(|s| s.positive)
            .unwrap_or(false)
    };

    let mut lo = T::zero();
    let mut hi = cap * T::of(2.0_f64.powi(-20));
    let mut bracketed = false;
    while hi <= cap {
        if !positive_at(hi) {
            bracketed = true;
            break;
        }
        lo = hi;
        hi *= T::of(2.0);
    }
    if !bracketed {
        return Ok((theta1, T::INFINITY));
    }
    let tol = T::of(1e-8);
    while hi - lo > tol {
        let mid = (lo + hi) * T::of(0.5);
        if positive_at(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((theta1, lo))
}

/// Check that the nonzero spectrum of `M_theta` equals the unshifted
/// spectrum moved by `f theta` (the zero eigenvalue stays put).
pub fn verify_spectral_shift<T: Float>(
    op: &MigrationOperator<T>,
    pat: &ExtractionPattern,
    theta: T,
    tolerance: T,
) -> Result<ShiftReport<T>> {
    let base = eigen_decompose(op)?;
    let f_theta = T::of(pat.f() as f64) * theta;

    // Expected spectrum: the structural zero stays put, every other
    // eigenvalue moves by f*theta.
    let mut targets: Vec<Complex<T>> = Vec::with_capacity(base.eigenvalues.len());
    let mut zero_used = false;
    for l in &base.eigenvalues {
        if !zero_used && l.re.abs() + l.im.abs() <= T::of(ZERO_TOL) {
            targets.push(*l);
            zero_used = true;
        } else {
            targets.push(Complex::new(l.re + f_theta, l.im));
        }
    }

    let computed = sorted_eigenvalues(&shift_matrix(op, pat, theta));
    if targets.len() != computed.len() {
        return Err(Error::MatchingFailed {
            expected: targets.len(),
            actual: computed.len(),
        });
    }

    let mut used = vec![false; computed.len()];
    let mut max_deviation = T::zero();
    for t in &targets {
        let mut best: Option<(usize, T)> = None;
        for (k, c) in computed.iter().enumerate() {
            if used[k] {
                continue;
            }
            let d = ((c.re - t.re) * (c.re - t.re) + (c.im - t.im) * (c.im - t.im)).sqrt();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        let (k, d) = best.expect("at least one unused candidate");
        used[k] = true;
        max_deviation = max_deviation.max(d);
    }

    Ok(ShiftReport {
        theta,
        max_deviation,
        tolerance,
        pass: max_deviation <= tolerance,
    })
}

/// Eigenvalues sorted by descending real part, then descending imaginary part.
pub fn sorted_eigenvalues<T: Float>(matrix: &DMatrix<T>) -> Vec<Complex<T>> {
    let mut eigs: Vec<Complex<T>> = matrix.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    eigs
}

/// Unit-norm null vector with the largest-magnitude entry made positive.
fn sign_fixed_null_vector<T: Float>(matrix: &DMatrix<T>) -> DVector<T> {
    let svd = matrix.clone().svd(false, true);
    let v_t = svd.v_t.expect("V^T requested");
    let mut k = 0;
    for i in 1..svd.singular_values.len() {
        if svd.singular_values[i] < svd.singular_values[k] {
            k = i;
        }
    }
    let mut v: DVector<T> = v_t.row(k).transpose();
    let mut dominant = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[dominant].abs() {
            dominant = i;
        }
    }
    if v[dominant] < T::zero() {
        v.neg_mut();
    }
    v
}

fn genuine_negative<T: Float>(v: &DVector<T>, tol: T) -> Option<(usize, T)> {
    (0..v.len())
        .filter(|&i| v[i] < -tol)
        .min_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal))
        .map(|i| (i, v[i]))
}

/// Clamp rounding-level negatives to zero and normalize to sum 1.
fn clamp_and_normalize<T: Float>(mut v: DVector<T>) -> DVector<T> {
    for i in 0..v.len() {
        if v[i] < T::zero() {
            v[i] = T::zero();
        }
    }
    let sum = v.sum();
    v / sum
}

/// `min_{i in F} min_{j != i}` of the inflow into `i`, read off the
/// operator's off-diagonal entries (equal to the weights `b[j][i]`).
fn operator_inflow_threshold<T: Float>(op: &MigrationOperator<T>, pat: &ExtractionPattern) -> T {
    let mut bound = T::INFINITY;
    for &i in pat.active() {
        for j in 0..op.n() {
            if j != i {
                bound = bound.min(op.matrix()[(i, j)]);
            }
        }
    }
    bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{inflow_threshold, Network};
    use approx::assert_relative_eq;

    fn three_node() -> Network<f64> {
        Network::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.3, 0.2, 0.4, 0.0, 0.1, 0.25, 0.35, 0.0],
        ))
        .unwrap()
    }

    fn two_node_fick() -> Network<f64> {
        Network::fick(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap()
    }

    /// Symmetric ring: every node linked to both neighbours with weight w.
    fn ring(n: usize, w: f64) -> Network<f64> {
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            b[(i, (i + 1) % n)] = w;
            b[(i, (i + n - 1) % n)] = w;
        }
        Network::new(b).unwrap()
    }

    #[test]
    fn two_node_spectrum_and_share_vector() {
        let sd = eigen_decompose(&two_node_fick().migration_operator()).unwrap();
        assert_relative_eq!(sd.eigenvalues[0].re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(sd.eigenvalues[1].re, -2.0, epsilon = 1e-12);
        assert_relative_eq!(sd.zeta[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(sd.zeta[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(sd.spectral_gap, 2.0, epsilon = 1e-12);
    }

    /// Roots of the characteristic polynomial of a 3x3 matrix, computed from
    /// the trace, the principal 2-minors and the determinant. Independent of
    /// the Schur-based path under test.
    fn charpoly_roots_3x3(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
        let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let minor = |r0: usize, r1: usize| {
            m[(r0, r0)] * m[(r1, r1)] - m[(r0, r1)] * m[(r1, r0)]
        };
        let s2 = minor(0, 1) + minor(0, 2) + minor(1, 2);
        let det = m.determinant();
        // lambda^3 + a lambda^2 + b lambda + c
        let (a, b, c) = (-tr, s2, -det);
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        let shift = -a / 3.0;
        let disc = q * q / 4.0 + p * p * p / 27.0;
        if disc >= 0.0 {
            let r = -q / 2.0;
            let s = disc.sqrt();
            let u = (r + s).cbrt();
            let v = (r - s).cbrt();
            let real = u + v + shift;
            let re = -(u + v) / 2.0 + shift;
            let im = (u - v) * 3.0_f64.sqrt() / 2.0;
            vec![
                Complex::new(real, 0.0),
                Complex::new(re, im),
                Complex::new(re, -im),
            ]
        } else {
            let rho = (-p * p * p / 27.0).sqrt();
            let phi = (-q / (2.0 * rho)).acos();
            let mag = 2.0 * (-p / 3.0).sqrt();
            (0..3)
                .map(|k| {
                    Complex::new(
                        mag * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() + shift,
                        0.0,
                    )
                })
                .collect()
        }
    }

    #[test]
    fn three_node_spectrum_matches_charpoly_oracle() {
        let op = three_node().migration_operator();
        let sd = eigen_decompose(&op).unwrap();
        assert!(sd.eigenvalues[0].norm() < 1e-9);
        for l in &sd.eigenvalues[1..] {
            assert!(l.re < 0.0);
        }
        assert!(sd.zeta.iter().all(|&z| z > 0.0));
        assert_relative_eq!(sd.zeta.sum(), 1.0, epsilon = 1e-12);

        let mut oracle = charpoly_roots_3x3(op.matrix());
        oracle.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        for (got, want) in sd.eigenvalues.iter().zip(&oracle) {
            assert!((got.re - want.re).abs() < 1e-9, "{got} vs {want}");
            assert!((got.im - want.im).abs().min((got.im + want.im).abs()) < 1e-9);
        }
    }

    #[test]
    fn ring_share_vector_is_uniform() {
        let n = 7;
        let sd = eigen_decompose(&ring(n, 0.8).migration_operator()).unwrap();
        for i in 0..n {
            assert_relative_eq!(sd.zeta[i], 1.0 / n as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn shift_at_zero_reduces_to_unshifted() {
        let op = three_node().migration_operator();
        let pat = ExtractionPattern::new(3, &[0, 1]).unwrap();
        let sd = eigen_decompose(&op).unwrap();
        let sh = shifted_matrix(&op, &pat, 0.0).unwrap();
        assert_eq!(sh.matrix, *op.matrix());
        assert_relative_eq!(sh.zeta_theta, sd.zeta, epsilon = 1e-9);
        assert!(sh.metzler && sh.positive);
    }

    #[test]
    fn shifted_eigenvalues_move_by_f_theta() {
        let op = three_node().migration_operator();
        let pat = ExtractionPattern::new(3, &[0, 1]).unwrap();
        let base = eigen_decompose(&op).unwrap();
        let sh = shifted_matrix(&op, &pat, 0.1).unwrap();
        // Nonzero eigenvalues shifted by f*theta = 0.2.
        for (b, s) in base.eigenvalues[1..].iter().zip(&sh.eigenvalues[1..]) {
            assert_relative_eq!(s.re, b.re + 0.2, epsilon = 1e-9);
            assert_relative_eq!(s.im.abs(), b.im.abs(), epsilon = 1e-9);
        }
    }

    #[test]
    fn metzler_fails_beyond_inflow_threshold() {
        let net = three_node();
        let op = net.migration_operator();
        let pat = ExtractionPattern::new(3, &[0, 1]).unwrap();
        let threshold = inflow_threshold(&net, &pat);
        assert_relative_eq!(threshold, 0.25);

        let below = shifted_matrix(&op, &pat, 0.2).unwrap();
        assert!(below.metzler);
        let above = shifted_matrix(&op, &pat, 0.3).unwrap();
        assert!(!above.metzler);
        // Binding entry is the smallest inflow into node 0: b[2][0] - theta.
        assert_relative_eq!(above.matrix[(0, 2)], 0.25 - 0.3, epsilon = 1e-12);
    }

    #[test]
    fn theta1_for_two_node_single_extractor() {
        let op = two_node_fick().migration_operator();
        let pat = ExtractionPattern::new(2, &[0]).unwrap();
        let (theta1, theta2) = theta_limits(&op, &pat).unwrap();
        assert_relative_eq!(theta1, 2.0, epsilon = 1e-10);
        // zeta_theta = ((1-theta)/(2-theta), 1/(2-theta)) loses positivity at 1.
        assert_relative_eq!(theta2, 1.0, epsilon = 1e-7);
        // Below theta2 the shifted vector is positive.
        for theta in [0.1, 0.5, 0.9, theta2 * 0.999] {
            assert!(shifted_matrix(&op, &pat, theta).unwrap().positive);
        }
    }

    #[test]
    fn fully_extracted_ring_never_loses_positivity() {
        let op = ring(5, 1.0).migration_operator();
        let pat = ExtractionPattern::all(5);
        let (_, theta2) = theta_limits(&op, &pat).unwrap();
        assert_eq!(theta2, f64::INFINITY);
    }

    #[test]
    fn shift_identity_reports() {
        let op = three_node().migration_operator();
        let pat = ExtractionPattern::new(3, &[0, 1]).unwrap();
        let at_zero = verify_spectral_shift(&op, &pat, 0.0, 1e-12).unwrap();
        assert_eq!(at_zero.max_deviation, 0.0);
        let shifted = verify_spectral_shift(&op, &pat, 0.1, 1e-9).unwrap();
        assert!(shifted.pass, "deviation {}", shifted.max_deviation);
    }

    #[test]
    fn shift_identity_on_random_networks_any_theta() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 5;
            let mut b = DMatrix::zeros(n, n);
            for i in 0..n {
                b[(i, (i + 1) % n)] = 0.2 + rng.random::<f64>();
                for j in 0..n {
                    if j != i && rng.random::<f64>() < 0.4 {
                        b[(i, j)] = rng.random::<f64>();
                    }
                }
            }
            let net = Network::new(b).unwrap();
            let pat = ExtractionPattern::new(n, &[0, 2]).unwrap();
            // The identity holds for every theta, admissible or not.
            for theta in [0.05, 0.5, 3.0] {
                let report =
                    verify_spectral_shift(&net.migration_operator(), &pat, theta, 1e-8).unwrap();
                assert!(report.pass, "deviation {}", report.max_deviation);
            }
        }
    }
}
