//! Quantum speed limit diagnostics for the complexity K on coherent-state
//! trajectories: rate, dispersions, covariance and the Schrödinger–Robertson gap.
//!
//! Ladder sectors use the pole-safe pair (A, B) throughout. With
//! X = Re[γ B* A] (equal to |A|² Re[γ z*]):
//!
//! ```text
//! ∂ₜK   = −4σλ Im[γ B* A]
//! ΔH²   = −2σλ |γ|² + 8λ X²
//! cov   = 4λ (|B|² − σ|A|²) X
//! gap   = 4ΔH²ΔK² − (∂ₜK)² = cov²
//! ```

use crate::algebra::{lanczos_b, Coupling, SectorSignature, Sigma};
use crate::error::{Error, Result};
use crate::krylov::{ComplexitySeries, KrylovWavefunction, SectorState};
use crate::scalar::{c, Real, C};
use crate::weinorman::WNState;

/// Default relative tolerance of the saturation labels.
pub const SATURATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Saturation {
    Saturated,
    /// σ = +1 with |z| = 1: the covariance vanishes whatever the drive phase.
    AccidentalCompact,
    Unsaturated,
}

impl Saturation {
    pub fn label(self) -> &'static str {
        match self {
            Saturation::Saturated => "saturated",
            Saturation::AccidentalCompact => "accidental_compact",
            Saturation::Unsaturated => "unsaturated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSLReport<T> {
    pub t: T,
    pub dk_dt: T,
    pub delta_h: T,
    pub delta_k: T,
    /// 2 ΔH ΔK.
    pub bound: T,
    /// bound² − (∂ₜK)².
    pub gap: T,
    /// ⟨{H̃, K̃}⟩.
    pub covariance: T,
    /// Re[γ z*] normalized by 1 + σ|z|² for ladders (Re[γ B* A]); Re[γ β*] with
    /// β = −iα the coherent amplitude for Heisenberg sectors.
    pub phase_lock_residual: T,
    /// (|z|² − σ)/(1 + σ|z|²), the second factor of the covariance; 1 for
    /// Heisenberg sectors.
    pub z_factor: T,
    pub sigma: Sigma,
    pub saturation: Saturation,
}

/// ⟨L₊⟩ on the coherent state, −2σλ B* A / (|A|² + σ|B|²).
pub fn coherent_lplus<T: Real>(sector: &SectorSignature<T>, wn: &WNState<T>) -> C<T> {
    let sigma = sector.sigma_value();
    let norm = wn.a.norm_sqr() + sigma * wn.b.norm_sqr();
    wn.b.conj() * wn.a * (-(sigma + sigma) * sector.lowest_weight / norm)
}

/// ⟨L₊⟩ = Σ φ*_{n+1} φ_n b_{n+1} from the amplitudes.
pub fn lplus_from_amplitudes<T: Real>(kry: &KrylovWavefunction<T>) -> Result<C<T>> {
    let mut acc = c(T::zero(), T::zero());
    for n in 0..kry.amplitudes.len().saturating_sub(1) {
        let b = lanczos_b(&kry.sector, n + 1)?;
        acc += kry.amplitudes[n + 1].conj() * kry.amplitudes[n] * b;
    }
    Ok(acc)
}

fn classify<T: Real>(sigma: Sigma, bound: T, covariance: T, z_factor: T, tol: T) -> Saturation {
    if sigma == Sigma::Compact && z_factor.abs() < tol {
        Saturation::AccidentalCompact
    } else if covariance * covariance <= tol * bound * bound {
        Saturation::Saturated
    } else {
        Saturation::Unsaturated
    }
}

pub fn qsl_point<T: Real>(
    sector: &SectorSignature<T>,
    gamma: C<T>,
    state: &SectorState<T>,
    kry: &KrylovWavefunction<T>,
) -> Result<QSLReport<T>> {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let (t, dk_dt, delta_h, covariance, residual, z_factor) = match (sector.sigma, state) {
        (Sigma::Heisenberg, SectorState::Heisenberg(d)) => {
            let x = (gamma * d.alpha.conj()).im;
            (d.t, two * (gamma * d.alpha.conj()).re, gamma.norm(), -two * x, -x, T::one())
        }
        (Sigma::Compact | Sigma::NonCompact, SectorState::Ladder(wn)) => {
            let sigma = sector.sigma_value();
            let lambda = sector.lowest_weight;
            let (a2, b2) = (wn.a.norm_sqr(), wn.b.norm_sqr());
            let n = a2 + sigma * b2;
            let gba = gamma * wn.b.conj() * wn.a / n;
            let x = gba.re;
            let dk = -four * sigma * lambda * gba.im;
            let dh2 = -(two * sigma * lambda) * gamma.norm_sqr() + T::lit(8.0) * lambda * x * x;
            let zf = (b2 - sigma * a2) / n;
            (wn.t, dk, dh2.max(T::zero()).sqrt(), four * lambda * zf * x, x, zf)
        }
        _ => return Err(Error::Domain("sector and state kinds differ".into())),
    };
    let delta_k = kry.complexity_std;
    let bound = two * delta_h * delta_k;
    Ok(QSLReport {
        t,
        dk_dt,
        delta_h,
        delta_k,
        bound,
        gap: bound * bound - dk_dt * dk_dt,
        covariance,
        phase_lock_residual: residual,
        z_factor,
        sigma: sector.sigma,
        saturation: classify(sector.sigma, bound, covariance, z_factor, T::lit(SATURATION_TOL)),
    })
}

pub fn qsl_series<T: Real, G: Coupling<T> + ?Sized>(series: &ComplexitySeries<T>, gamma: &G) -> Result<Vec<QSLReport<T>>> {
    series
        .states
        .iter()
        .zip(&series.wavefunctions)
        .map(|(s, w)| qsl_point(&series.sector, gamma.gamma(s.t())?, s, w))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationSummary {
    pub labels: Vec<Saturation>,
    pub persistent: bool,
    pub saturated_points: usize,
    pub accidental_compact_points: usize,
    /// Isolated zeros of the covariance: sign changes or tangencies of the
    /// phase-lock residual and, for σ = +1, of |z| − 1.
    pub accidental_points: usize,
}

/// Relative size of a sampled extremum's parabolic vertex still counted as a touch.
pub const TOUCH_TOL: f64 = 1e-4;

/// Zeros of a smooth sampled function: sign changes plus interior extrema whose
/// parabolic vertex reaches zero within `TOUCH_TOL` of the sample range.
fn count_zeros<T: Real>(ts: &[T], f: &[T]) -> usize {
    let scale = f.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return 0;
    }
    let touch = T::lit(TOUCH_TOL) * scale;
    let sign = |v: T| if v > T::zero() { 1 } else if v < T::zero() { -1 } else { 0 };
    let mut count = 0;
    let mut i = 0;
    while i + 1 < f.len() {
        let (s0, s1) = (sign(f[i]), sign(f[i + 1]));
        if s0 != 0 && s1 != 0 && s0 != s1 {
            count += 1;
        } else if i > 0 && s0 != 0 && sign(f[i - 1]) == s0 && s1 == s0 {
            let (a, b) = (f[i - 1].abs(), f[i + 1].abs());
            if f[i].abs() < a && f[i].abs() <= b {
                // Vertex of the parabola through the three samples.
                let (h0, h1) = (ts[i] - ts[i - 1], ts[i + 1] - ts[i]);
                let d0 = (f[i] - f[i - 1]) / h0;
                let d1 = (f[i + 1] - f[i]) / h1;
                let curv = (d1 - d0) / (h0 + h1) * T::lit(2.0);
                let slope = (d0 * h1 + d1 * h0) / (h0 + h1);
                let vertex = if curv != T::zero() { f[i] - slope * slope / (curv + curv) } else { f[i] };
                if sign(vertex) != s0 || vertex.abs() <= touch {
                    count += 1;
                }
            }
        }
        i += 1;
    }
    count
}

pub fn saturation_scan<T: Real>(reports: &[QSLReport<T>], tol: T) -> SaturationSummary {
    let labels: Vec<_> = reports
        .iter()
        .map(|r| classify(r.sigma, r.bound, r.covariance, r.z_factor, tol))
        .collect();
    let count = |s: Saturation| labels.iter().filter(|l| **l == s).count();
    let ts: Vec<T> = reports.iter().map(|r| r.t).collect();
    let residual: Vec<T> = reports.iter().map(|r| r.phase_lock_residual).collect();
    let mut accidental = count_zeros(&ts, &residual);
    if reports.iter().all(|r| r.sigma == Sigma::Compact) {
        let zf: Vec<T> = reports.iter().map(|r| r.z_factor).collect();
        accidental += count_zeros(&ts, &zf);
    }
    let persistent = !labels.is_empty() && labels.iter().all(|l| *l == Saturation::Saturated);
    SaturationSummary {
        persistent,
        saturated_points: count(Saturation::Saturated),
        accidental_compact_points: count(Saturation::AccidentalCompact),
        accidental_points: if persistent { 0 } else { accidental },
        labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TiAlgebra<T> {
    Heisenberg,
    Su2 { j: T },
    Su11 { kappa: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiBenchmark<T> {
    pub k: T,
    pub delta_k: T,
    pub b1: T,
    /// |∂ₜK|.
    pub lhs: T,
    /// 2|α| b₁ ΔK.
    pub rhs: T,
}

/// Constant real coupling γ = α: K, ΔK and both sides of the saturated bound.
pub fn ti_benchmark<T: Real>(algebra: TiAlgebra<T>, alpha: T, t: T) -> TiBenchmark<T> {
    let two = T::lit(2.0);
    let x = alpha * t;
    let (k, var, b1, dk) = match algebra {
        TiAlgebra::Heisenberg => (x * x, x * x, T::one(), two * alpha * alpha * t),
        TiAlgebra::Su2 { j } => {
            let p = x.sin().powi(2);
            let n = two * j;
            (n * p, n * p * (T::one() - p), n.sqrt(), n * alpha * (two * x).sin())
        }
        TiAlgebra::Su11 { kappa } => {
            let s = x.sinh().powi(2);
            let n = two * kappa;
            (n * s, n * s * (T::one() + s), n.sqrt(), n * alpha * (two * x).sinh())
        }
    };
    let delta_k = var.max(T::zero()).sqrt();
    TiBenchmark {
        k,
        delta_k,
        b1,
        lhs: dk.abs(),
        rhs: two * alpha.abs() * b1 * delta_k,
    }
}
