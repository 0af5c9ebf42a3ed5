//! Polynomial roots and the delta-operator coefficient transform.
//!
//! Coefficients are stored in descending powers: `coeffs[0]` multiplies the
//! highest power. A transfer-function polynomial `c0 + c1 z^-1 + ... + cN z^-N`
//! multiplied through by `z^N` has exactly this layout, so numerator and
//! denominator vectors can be passed in as-is.

use num_complex::Complex64;
use thiserror::Error;

/// Relative residual accepted for a computed root.
pub const ROOT_TOLERANCE: f64 = 1e-8;
/// Largest polynomial order accepted by the root finder.
pub const MAX_DEGREE: usize = 32;

const MAX_ITERATIONS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("empty polynomial")]
    Empty,
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("polynomial order {0} exceeds the supported maximum of {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("invalid delta {0}")]
    InvalidDelta(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
    stripped_leading: usize,
}

impl Polynomial {
    /// Builds a polynomial, stripping leading zero coefficients.
    pub fn new(coeffs: &[f64]) -> Result<Self, PolyError> {
        if coeffs.is_empty() {
            return Err(PolyError::Empty);
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PolyError::NonFinite);
        }
        let lead = coeffs
            .iter()
            .position(|&c| c != 0.0)
            .ok_or(PolyError::ZeroPolynomial)?;
        Ok(Self {
            coeffs: coeffs[lead..].to_vec(),
            stripped_leading: lead,
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Number of leading zeros removed at construction. Nonzero means the
    /// effective order is lower than the vector length suggests.
    pub fn stripped_leading(&self) -> usize {
        self.stripped_leading
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner(&self.coeffs, z).0
    }

    fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Roots of a polynomial with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    pub max_modulus: f64,
}

impl RootSet {
    fn from_roots(roots: Vec<Complex64>) -> Self {
        let max_modulus = roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
        Self { roots, max_modulus }
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

/// All roots of `p`: trailing zeros are peeled off exactly, orders one and two
/// use closed forms, and higher orders go through Aberth–Ehrlich iteration
/// followed by a Newton polish against the original coefficients.
pub fn roots_of(p: &Polynomial) -> Result<RootSet, PolyError> {
    let order = p.order();
    if order > MAX_DEGREE {
        return Err(PolyError::DegreeTooLarge(order));
    }
    let c = p.coeffs();
    let zeros_at_origin = c.iter().rev().take_while(|&&v| v == 0.0).count();
    let reduced = &c[..c.len() - zeros_at_origin];

    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    roots.extend(match reduced.len() - 1 {
        0 => vec![],
        1 => vec![Complex64::new(-reduced[1] / reduced[0], 0.0)],
        2 => quadratic(reduced[0], reduced[1], reduced[2]).to_vec(),
        _ => aberth(reduced),
    });
    Ok(RootSet::from_roots(roots))
}

/// Convenience wrapper building the polynomial first.
pub fn roots_of_coeffs(coeffs: &[f64]) -> Result<RootSet, PolyError> {
    roots_of(&Polynomial::new(coeffs)?)
}

/// Largest root modulus; zero for constants.
pub fn max_root_modulus(p: &Polynomial) -> Result<f64, PolyError> {
    roots_of(p).map(|r| r.max_modulus)
}

/// Rewrites `p(z)` in the delta operator `q = (z - 1) / delta`, i.e. expands
/// `p(1 + delta * q)` and divides by `delta^order`. A root `q` of the result
/// corresponds to the root `z = 1 + delta * q` of `p`.
pub fn delta_transform(p: &Polynomial, delta: f64) -> Result<Polynomial, PolyError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(PolyError::InvalidDelta(delta));
    }
    // Horner composition: acc <- acc * (1 + delta q) + c_i, highest power first.
    let mut acc: Vec<f64> = vec![p.coeffs[0]];
    for &c in &p.coeffs[1..] {
        let mut next = vec![0.0; acc.len() + 1];
        for (i, &a) in acc.iter().enumerate() {
            next[i] += a * delta;
            next[i + 1] += a;
        }
        *next.last_mut().unwrap() += c;
        acc = next;
    }
    let scale = delta.powi(p.order() as i32);
    let coeffs: Vec<f64> = acc.iter().map(|a| a / scale).collect();
    Polynomial::new(&coeffs)
}

/// Maps delta-domain roots back to the z-plane.
pub fn delta_roots_to_z(q_roots: &RootSet, delta: f64) -> RootSet {
    RootSet::from_roots(
        q_roots
            .roots
            .iter()
            .map(|q| Complex64::new(1.0, 0.0) + q * delta)
            .collect(),
    )
}

/// Whether every root satisfies the residual bound relative to `p`.
pub fn residuals_within_tolerance(p: &Polynomial, roots: &RootSet) -> bool {
    let bound = ROOT_TOLERANCE * p.max_abs_coeff();
    roots.roots.iter().all(|&r| {
        // Scale by |r|^order so roots far from the origin are judged relatively.
        let scale = r.norm().max(1.0).powi(p.order() as i32);
        p.eval(r).norm() <= bound * scale
    })
}

fn horner(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(c[0], 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &coef in &c[1..] {
        dp = dp * z + p;
        p = p * z + coef;
    }
    (p, dp)
}

fn quadratic(a: f64, b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        [Complex64::new(q / a, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a);
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn aberth(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let lead = c[0];
    let radius = c[1..]
        .iter()
        .enumerate()
        .map(|(k, &ck)| (ck / lead).abs().powf(1.0 / (k + 1) as f64))
        .fold(0.0, f64::max);
    let centre = -c[1] / (n as f64 * lead);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            Complex64::new(centre, 0.0) + Complex64::from_polar(radius, angle)
        })
        .collect();

    for _ in 0..MAX_ITERATIONS {
        let mut converged = true;
        for k in 0..n {
            let (p, dp) = horner(c, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = if dp.norm() == 0.0 {
                // Perturb off a stationary point.
                Complex64::new(1e-8 * (1.0 + z[k].norm()), 0.0)
            } else {
                p / dp
            };
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[k] -= step;
            if step.norm() > 4.0 * f64::EPSILON * z[k].norm().max(f64::MIN_POSITIVE) {
                converged = false;
            }
        }
        if converged {
            break;
        }
    }

    for root in z.iter_mut() {
        polish(c, root);
    }
    z
}

fn polish(c: &[f64], root: &mut Complex64) {
    let mut best = horner(c, *root).0.norm();
    for _ in 0..3 {
        let (p, dp) = horner(c, *root);
        if dp.norm() == 0.0 || best == 0.0 {
            return;
        }
        let candidate = *root - p / dp;
        let value = horner(c, candidate).0.norm();
        if value.is_nan() || value >= best {
            return;
        }
        *root = candidate;
        best = value;
    }
}
