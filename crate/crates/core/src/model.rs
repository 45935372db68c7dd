//! Hamiltonians of the form `H(x, p) = p²/2 + g(x)` with a potential that is flat outside a
//! compact set, plus sampled checks of the standing smoothness / flatness / convexity
//! assumptions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// A `C³` Hamiltonian `H(x, p) = p²/2 + g(x)` whose potential is constant for `|x| ≥ cutoff`.
///
/// Implementors provide the potential and its first two derivatives in closed form; everything
/// else has a default in terms of those.
pub trait HamiltonianModel<F: Scalar>: Send + Sync {
    fn g(&self, x: F) -> F;
    fn g_prime(&self, x: F) -> F;
    fn g_second(&self, x: F) -> F;

    /// Homogeneity radius: `g' = 0` for `|x| ≥ cutoff`.
    fn cutoff(&self) -> F;

    /// `(g(a) - g(b)) / (a - b)`, and `g'(a)` when `a == b`.
    ///
    /// Override when a cancellation-free form exists; the period quadrature divides by it near
    /// the turning point.
    fn divided_difference(&self, a: F, b: F) -> F {
        if a == b {
            self.g_prime(a)
        } else {
            (self.g(a) - self.g(b)) / (a - b)
        }
    }

    fn hamiltonian(&self, x: F, p: F) -> F {
        p * p / lit(2.0) + self.g(x)
    }

    fn dh_dp(&self, _x: F, p: F) -> F {
        p
    }

    fn dh_dx(&self, x: F, _p: F) -> F {
        self.g_prime(x)
    }

    /// Value of `g` on the flat tails.
    fn plateau(&self) -> F {
        self.g(self.cutoff())
    }

    /// Momentum at `q = 0` of the orbit on the separatrix energy level `H = plateau`.
    fn separatrix_momentum(&self) -> F {
        let gap = self.plateau() - self.g(F::zero());
        if gap > F::zero() {
            (lit::<F>(2.0) * gap).sqrt()
        } else {
            F::zero()
        }
    }
}

/// Evaluates `H(x, p)`, rejecting non-finite arguments.
pub fn eval_h<F: Scalar, M: HamiltonianModel<F> + ?Sized>(model: &M, x: F, p: F) -> Result<F> {
    if !x.is_finite() || !p.is_finite() {
        return Err(Error::Domain(format!("H({x}, {p}) needs finite arguments")));
    }
    Ok(model.hamiltonian(x, p))
}

/// Polynomial well `g(x) = A (1 - (1 - (x/X)²)^m)` on `|x| ≤ X`, `A` outside.
///
/// `A = 1, X = 1, m = 4` is the default example; `m ≥ 4` keeps `g` of class `C³` across `|x| = X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpPotential<F> {
    amplitude: F,
    radius: F,
    exponent: i32,
}

impl<F: Scalar> BumpPotential<F> {
    pub fn new(amplitude: F, radius: F, exponent: i32) -> Result<Self> {
        if !(amplitude > F::zero()) || !amplitude.is_finite() {
            return Err(Error::Domain(format!("amplitude must be positive, got {amplitude}")));
        }
        if !(radius > F::zero()) || !radius.is_finite() {
            return Err(Error::Domain(format!("radius must be positive, got {radius}")));
        }
        if exponent < 4 {
            return Err(Error::Domain(format!(
                "exponent {exponent} < 4 breaks C3 matching at the cutoff"
            )));
        }
        Ok(Self { amplitude, radius, exponent })
    }

    /// `g(x) = 1 - (1 - x²)⁴` on `[-1, 1]`, `1` outside.
    pub fn standard() -> Self {
        Self { amplitude: F::one(), radius: F::one(), exponent: 4 }
    }

    pub fn amplitude(&self) -> F {
        self.amplitude
    }

    pub fn radius(&self) -> F {
        self.radius
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    #[inline]
    fn inside(&self, x: F) -> Option<F> {
        let y = x / self.radius;
        if y.abs() <= F::one() {
            Some(y)
        } else {
            None
        }
    }
}

impl<F: Scalar> Default for BumpPotential<F> {
    fn default() -> Self {
        Self::standard()
    }
}

impl<F: Scalar> HamiltonianModel<F> for BumpPotential<F> {
    fn g(&self, x: F) -> F {
        match self.inside(x) {
            Some(y) => self.amplitude * (F::one() - (F::one() - y * y).powi(self.exponent)),
            None => self.amplitude,
        }
    }

    fn g_prime(&self, x: F) -> F {
        match self.inside(x) {
            Some(y) => {
                let m = lit::<F>(self.exponent as f64);
                let w = F::one() - y * y;
                self.amplitude * m * lit(2.0) * y * w.powi(self.exponent - 1) / self.radius
            }
            None => F::zero(),
        }
    }

    fn g_second(&self, x: F) -> F {
        match self.inside(x) {
            Some(y) => {
                let m = lit::<F>(self.exponent as f64);
                let w = F::one() - y * y;
                let two = lit::<F>(2.0);
                let bracket = w.powi(self.exponent - 1)
                    - two * (m - F::one()) * y * y * w.powi(self.exponent - 2);
                self.amplitude * m * two * bracket / (self.radius * self.radius)
            }
            None => F::zero(),
        }
    }

    fn cutoff(&self) -> F {
        self.radius
    }

    fn divided_difference(&self, a: F, b: F) -> F {
        match (self.inside(a), self.inside(b)) {
            (Some(ya), Some(yb)) if a != b => {
                // u^m - v^m = (u - v) Σ u^k v^(m-1-k) with u - v = (yb² - ya²)
                let u = F::one() - ya * ya;
                let v = F::one() - yb * yb;
                let mut sum = F::zero();
                for k in 0..self.exponent {
                    sum = sum + u.powi(k) * v.powi(self.exponent - 1 - k);
                }
                self.amplitude * (ya + yb) * sum / self.radius
            }
            (_, _) if a == b => self.g_prime(a),
            _ => (self.g(a) - self.g(b)) / (a - b),
        }
    }
}

/// `g ≡ 0`: the homogeneous (Burgers) case where every ray is a straight line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FlatPotential;

impl<F: Scalar> HamiltonianModel<F> for FlatPotential {
    fn g(&self, _x: F) -> F {
        F::zero()
    }
    fn g_prime(&self, _x: F) -> F {
        F::zero()
    }
    fn g_second(&self, _x: F) -> F {
        F::zero()
    }
    fn cutoff(&self) -> F {
        F::one()
    }
}

/// Outcome of [`check_assumptions`]. Never aborts; failed checks are listed in `violations`.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub samples: usize,
    pub flat_tails: bool,
    pub convex_momentum: bool,
    pub derivative_consistency: bool,
    /// Largest deviation of the closed-form derivatives from central differences.
    pub max_fd_error: f64,
    pub violations: Vec<String>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.flat_tails && self.convex_momentum && self.derivative_consistency
    }
}

/// Samples the flat-tail, convexity and derivative-consistency assumptions on `samples`.
pub fn check_assumptions<F, M>(model: &M, samples: &[F]) -> Result<AssumptionReport>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    if samples.is_empty() {
        return Err(Error::Domain("assumption check needs at least one sample".into()));
    }
    let mut violations = Vec::new();
    let eps = F::epsilon();
    let tail_tol = lit::<F>(64.0) * eps;
    let cutoff = model.cutoff();
    let plateau = model.plateau();

    let mut flat_tails = true;
    for &x in samples.iter().filter(|x| x.abs() >= cutoff) {
        let slope = model.g_prime(x);
        let level = (model.g(x) - plateau).abs();
        if slope.abs() > tail_tol || level > tail_tol * (F::one() + plateau.abs()) {
            flat_tails = false;
            violations.push(format!("non-flat tail at x = {x}: g' = {slope}, |g - g(X)| = {level}"));
            break;
        }
    }

    // p ↦ ∂_p H must be strictly increasing, unbounded both ways.
    let mut convex_momentum = true;
    let probe: Vec<F> = (-20..=20).map(|k| lit::<F>(k as f64 * 0.5)).collect();
    'outer: for &x in samples {
        let mut prev = model.dh_dp(x, probe[0]);
        for &p in &probe[1..] {
            let cur = model.dh_dp(x, p);
            if !(cur > prev) {
                convex_momentum = false;
                violations.push(format!("p -> dH/dp not increasing at x = {x}, p = {p}"));
                break 'outer;
            }
            prev = cur;
        }
    }

    // Central differences with a step balancing truncation and rounding.
    let mut derivative_consistency = true;
    let mut max_fd_error = F::zero();
    let h = eps.cbrt();
    let fd_tol = lit::<F>(1e3) * h * h;
    for &x in samples {
        let scale = F::one().max(model.g_second(x).abs());
        let d1 = (model.g(x + h) - model.g(x - h)) / (h + h);
        let d2 = (model.g_prime(x + h) - model.g_prime(x - h)) / (h + h);
        let e1 = (d1 - model.g_prime(x)).abs();
        let e2 = (d2 - model.g_second(x)).abs();
        max_fd_error = max_fd_error.max(e1).max(e2);
        if derivative_consistency && (e1 > fd_tol * scale || e2 > fd_tol * scale * lit(10.0)) {
            derivative_consistency = false;
            violations.push(format!("derivative mismatch at x = {x}: |Δg'| = {e1}, |Δg''| = {e2}"));
        }
    }

    Ok(AssumptionReport {
        samples: samples.len(),
        flat_tails,
        convex_momentum,
        derivative_consistency,
        max_fd_error: max_fd_error.to_f64().unwrap_or(f64::NAN),
        violations,
    })
}
