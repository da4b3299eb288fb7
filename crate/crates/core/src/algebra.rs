//! Rank-one sectors, their Lanczos coefficients, drive envelopes with
//! Cartan-phase dressing, and commuting-sector selection from a Cartan matrix.

use crate::error::{Error, Result};
use crate::scalar::{c, Real, C};
use serde::{Deserialize, Serialize};

/// Sector sign: compact su(2), non-compact su(1,1), or Heisenberg–Weyl.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sigma {
    Compact,
    NonCompact,
    Heisenberg,
}

impl Sigma {
    pub fn from_int(s: i64) -> Result<Self> {
        match s {
            1 => Ok(Sigma::Compact),
            -1 => Ok(Sigma::NonCompact),
            0 => Ok(Sigma::Heisenberg),
            other => Err(Error::Domain(format!("sigma must be +1, -1 or 0, got {other}"))),
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Sigma::Compact => 1,
            Sigma::NonCompact => -1,
            Sigma::Heisenberg => 0,
        }
    }

    pub fn value<T: Real>(self) -> T {
        match self {
            Sigma::Compact => T::one(),
            Sigma::NonCompact => -T::one(),
            Sigma::Heisenberg => T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorSignature<T> {
    pub sigma: Sigma,
    pub lowest_weight: T,
    pub dim: usize,
}

pub const DEFAULT_TRUNCATION: usize = 64;

impl<T: Real> SectorSignature<T> {
    /// Validates the pair (σ, λ). For σ = +1 the weight is snapped to the
    /// nearest −j with 2j integral and `dim` is forced to 2j + 1.
    pub fn new(sigma: Sigma, lowest_weight: T, dim: usize) -> Result<Self> {
        if !lowest_weight.is_finite() {
            return Err(Error::Domain("lowest weight must be finite".into()));
        }
        match sigma {
            Sigma::Compact => {
                let two_j = -(lowest_weight + lowest_weight);
                let snapped = two_j.round();
                if (two_j - snapped).abs() > T::lit(2e-9) || snapped < T::zero() {
                    return Err(Error::Domain(format!(
                        "compact sector needs lowest weight -j with 2j a nonnegative integer, got {lowest_weight}"
                    )));
                }
                let two_j_int = snapped.to_usize().expect("small spin");
                Ok(SectorSignature {
                    sigma,
                    lowest_weight: -snapped / T::lit(2.0),
                    dim: two_j_int + 1,
                })
            }
            Sigma::NonCompact => {
                if lowest_weight <= T::zero() {
                    return Err(Error::Domain(format!(
                        "non-compact sector needs lowest weight > 0, got {lowest_weight}"
                    )));
                }
                if dim < 1 {
                    return Err(Error::Domain("dim must be at least 1".into()));
                }
                Ok(SectorSignature {
                    sigma,
                    lowest_weight,
                    dim,
                })
            }
            Sigma::Heisenberg => {
                if dim < 1 {
                    return Err(Error::Domain("dim must be at least 1".into()));
                }
                Ok(SectorSignature {
                    sigma,
                    lowest_weight: T::zero(),
                    dim,
                })
            }
        }
    }

    pub fn spin(j: T) -> Result<Self> {
        Self::new(Sigma::Compact, -j, 0)
    }

    pub fn bosonic(kappa: T, dim: usize) -> Result<Self> {
        Self::new(Sigma::NonCompact, kappa, dim)
    }

    pub fn heisenberg(dim: usize) -> Result<Self> {
        Self::new(Sigma::Heisenberg, T::zero(), dim)
    }

    pub fn sigma_value(&self) -> T {
        self.sigma.value()
    }
}

/// Lanczos coefficient b_n of the sector; b_0 = 0.
pub fn lanczos_b<T: Real>(sector: &SectorSignature<T>, n: usize) -> Result<T> {
    if n == 0 {
        return Ok(T::zero());
    }
    let nf = T::from_usize_lossy(n);
    let radicand = match sector.sigma {
        Sigma::Heisenberg => nf,
        s => {
            -s.value::<T>() * nf * (sector.lowest_weight + sector.lowest_weight + nf - T::one())
        }
    };
    if radicand < T::zero() {
        // Past the top of a compact chain the formula turns negative.
        if sector.sigma == Sigma::Compact && n >= sector.dim {
            return Err(Error::Domain(format!(
                "b_{n} requested beyond the compact chain of dimension {}",
                sector.dim
            )));
        }
        return Err(Error::Domain(format!("negative radicand for b_{n}")));
    }
    Ok(radicand.sqrt())
}

/// b_1..b_{n_max}. For σ = +1 the request may reach n_max = 2j + 1, where b vanishes.
pub fn lanczos_coefficients<T: Real>(sector: &SectorSignature<T>, n_max: usize) -> Result<Vec<T>> {
    if n_max > sector.dim {
        return Err(Error::Domain(format!(
            "n_max = {n_max} exceeds the sector dimension {}",
            sector.dim
        )));
    }
    (1..=n_max).map(|n| lanczos_b(sector, n)).collect()
}

/// Sector carrying the Virasoro wedge generated by L_{-k}, L_0, L_k.
pub fn virasoro_weight<T: Real>(h: T, central_charge: T, k: u32, dim: usize) -> Result<SectorSignature<T>> {
    if k == 0 {
        return Err(Error::Domain("k must be a positive integer".into()));
    }
    if h < T::zero() {
        return Err(Error::Domain("conformal weight must be nonnegative".into()));
    }
    let kf = T::from_u32(k).expect("small k");
    let lambda = h / kf + central_charge * (kf * kf - T::one()) / (T::lit(24.0) * kf);
    if lambda <= T::zero() {
        return Err(Error::Domain(format!("non-unitary sector: lambda_k = {lambda}")));
    }
    SectorSignature::new(Sigma::NonCompact, lambda, dim)
}

/// Real-valued envelope used for amplitudes and Cartan drives.
#[derive(Debug, Clone, PartialEq)]
pub enum RealProfile<T> {
    Zero,
    Constant { value: T },
    Sech { amplitude: T, width: T },
    Cosine { amplitude: T, frequency: T, phase: T },
    /// (ω(t)² + ω₀²)/(2ω₀) with ω = ω₁ on [0, τ) and ω₀ afterwards.
    QuenchFrequency { omega0: T, omega1: T, tau: T },
    Tabulated { times: Vec<T>, values: Vec<T> },
}

fn check_table<T: Real>(times: &[T], len: usize) -> Result<()> {
    if times.len() < 2 || times.len() != len {
        return Err(Error::Domain("table needs at least two samples and matching lengths".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("table times must be strictly increasing".into()));
    }
    Ok(())
}

fn table_segment<T: Real>(times: &[T], t: T) -> Result<(usize, T)> {
    let (lo, hi) = (times[0], times[times.len() - 1]);
    if !(t >= lo && t <= hi) {
        return Err(Error::Domain(format!(
            "t = {t} lies outside the tabulated domain [{lo}, {hi}]"
        )));
    }
    let k = match times.iter().position(|x| *x > t) {
        Some(p) => p - 1,
        None => times.len() - 2,
    };
    Ok((k, (t - times[k]) / (times[k + 1] - times[k])))
}

impl<T: Real> RealProfile<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[T]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            RealProfile::Zero => true,
            RealProfile::Constant { value } => finite(&[*value]),
            RealProfile::Sech { amplitude, width } => finite(&[*amplitude, *width]) && *width > T::zero(),
            RealProfile::Cosine {
                amplitude,
                frequency,
                phase,
            } => finite(&[*amplitude, *frequency, *phase]),
            RealProfile::QuenchFrequency { omega0, omega1, tau } => {
                finite(&[*omega0, *omega1, *tau]) && *omega0 > T::zero() && *omega1 > T::zero() && *tau >= T::zero()
            }
            RealProfile::Tabulated { times, values } => {
                check_table(times, values.len())?;
                finite(times) && finite(values)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid profile parameters: {self:?}")))
        }
    }

    pub fn value(&self, t: T) -> Result<T> {
        Ok(match self {
            RealProfile::Zero => T::zero(),
            RealProfile::Constant { value } => *value,
            RealProfile::Sech { amplitude, width } => *amplitude / (t / *width).cosh(),
            RealProfile::Cosine {
                amplitude,
                frequency,
                phase,
            } => *amplitude * (*frequency * t + *phase).cos(),
            RealProfile::QuenchFrequency { omega0, omega1, tau } => {
                let w = if t < *tau { *omega1 } else { *omega0 };
                (w * w + *omega0 * *omega0) / (*omega0 + *omega0)
            }
            RealProfile::Tabulated { times, values } => {
                let (k, x) = table_segment(times, t)?;
                values[k] + (values[k + 1] - values[k]) * x
            }
        })
    }

    /// ∫₀ᵗ of the profile, in closed form for every tag.
    pub fn integral(&self, t: T) -> Result<T> {
        let two = T::lit(2.0);
        Ok(match self {
            RealProfile::Zero => T::zero(),
            RealProfile::Constant { value } => *value * t,
            RealProfile::Sech { amplitude, width } => {
                *amplitude * two * *width * (t / (two * *width)).tanh().atan()
            }
            RealProfile::Cosine {
                amplitude,
                frequency,
                phase,
            } => {
                if *frequency == T::zero() {
                    *amplitude * phase.cos() * t
                } else {
                    *amplitude * ((*frequency * t + *phase).sin() - phase.sin()) / *frequency
                }
            }
            RealProfile::QuenchFrequency { omega0, omega1, tau } => {
                let g1 = (*omega1 * *omega1 + *omega0 * *omega0) / (two * *omega0);
                if t <= *tau {
                    g1 * t
                } else {
                    g1 * *tau + *omega0 * (t - *tau)
                }
            }
            RealProfile::Tabulated { times, values } => {
                if t < times[0] || t > times[times.len() - 1] || times[0] > T::zero() {
                    return Err(Error::Domain(format!(
                        "integral to t = {t} leaves the tabulated domain"
                    )));
                }
                // Piecewise-linear data integrate exactly by the trapezoid rule.
                let start = self.value(T::zero())?;
                let (k0, _) = table_segment(times, T::zero())?;
                let (k1, _) = table_segment(times, t)?;
                let mut acc = T::zero();
                let mut a = T::zero();
                let mut fa = start;
                for k in k0..=k1 {
                    let b = if k == k1 { t } else { times[k + 1] };
                    let fb = if k == k1 { self.value(t)? } else { values[k + 1] };
                    acc += (b - a) * (fa + fb) / two;
                    a = b;
                    fa = fb;
                }
                acc
            }
        })
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(
            self,
            RealProfile::Zero | RealProfile::Constant { .. } | RealProfile::QuenchFrequency { .. }
        )
    }

    pub fn breakpoints(&self) -> Vec<T> {
        match self {
            RealProfile::QuenchFrequency { tau, .. } => vec![*tau],
            RealProfile::Tabulated { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }
}

/// Ladder coupling f(t) before Cartan dressing.
#[derive(Debug, Clone, PartialEq)]
pub enum DriveShape<T> {
    ConstantPhase { amplitude: RealProfile<T>, phase: T },
    SechPulse { omega0: T, width: T },
    /// Coupling 2f(t) = (ω(t)² − ω₀²)/(2ω₀): nonzero on [0, τ), zero afterwards.
    Quench { omega0: T, omega1: T, tau: T },
    /// (h/2)·sinθ₀·e^{−iΩt}.
    RotatingField { theta0: T, omega: T, h: T },
    /// −√(mω³/2)·x₀·cos ωt.
    DraggedCosine { x0: T, omega: T, m: T },
    Tabulated { times: Vec<T>, values: Vec<C<T>> },
}

impl<T: Real> DriveShape<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[T]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            DriveShape::ConstantPhase { amplitude, phase } => {
                amplitude.validate()?;
                phase.is_finite()
            }
            DriveShape::SechPulse { omega0, width } => finite(&[*omega0, *width]) && *width > T::zero(),
            DriveShape::Quench { omega0, omega1, tau } => {
                finite(&[*omega0, *omega1, *tau]) && *omega0 > T::zero() && *omega1 > T::zero() && *tau >= T::zero()
            }
            DriveShape::RotatingField { theta0, omega, h } => finite(&[*theta0, *omega, *h]),
            DriveShape::DraggedCosine { x0, omega, m } => finite(&[*x0, *omega, *m]) && *m > T::zero(),
            DriveShape::Tabulated { times, values } => {
                check_table(times, values.len())?;
                finite(times) && values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid drive parameters: {self:?}")))
        }
    }

    pub fn value(&self, t: T) -> Result<C<T>> {
        let two = T::lit(2.0);
        Ok(match self {
            DriveShape::ConstantPhase { amplitude, phase } => {
                C::from_polar(T::one(), *phase) * amplitude.value(t)?
            }
            DriveShape::SechPulse { omega0, width } => c(*omega0 / (t / *width).cosh(), T::zero()),
            DriveShape::Quench { omega0, omega1, tau } => {
                let w = if t < *tau { *omega1 } else { *omega0 };
                c((w * w - *omega0 * *omega0) / (two * *omega0), T::zero())
            }
            DriveShape::RotatingField { theta0, omega, h } => {
                C::from_polar(*h / two * theta0.sin(), -*omega * t)
            }
            DriveShape::DraggedCosine { x0, omega, m } => {
                let amp = (*m * omega.powi(3) / two).sqrt() * *x0;
                c(-amp * (*omega * t).cos(), T::zero())
            }
            DriveShape::Tabulated { times, values } => {
                let (k, x) = table_segment(times, t)?;
                values[k] + (values[k + 1] - values[k]) * x
            }
        })
    }

    pub fn is_piecewise_constant(&self) -> bool {
        match self {
            DriveShape::ConstantPhase { amplitude, .. } => amplitude.is_piecewise_constant(),
            DriveShape::Quench { .. } => true,
            DriveShape::RotatingField { omega, h, theta0 } => *omega == T::zero() || *h == T::zero() || theta0.sin() == T::zero(),
            _ => false,
        }
    }

    pub fn breakpoints(&self) -> Vec<T> {
        match self {
            DriveShape::ConstantPhase { amplitude, .. } => amplitude.breakpoints(),
            DriveShape::Quench { tau, .. } => vec![*tau],
            DriveShape::Tabulated { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveEnvelope<T> {
    pub coupling: DriveShape<T>,
    pub cartan_drives: Vec<RealProfile<T>>,
}

impl<T: Real> DriveEnvelope<T> {
    pub fn bare(coupling: DriveShape<T>) -> Self {
        DriveEnvelope {
            coupling,
            cartan_drives: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.coupling.validate()?;
        self.cartan_drives.iter().try_for_each(|g| g.validate())
    }

    pub fn breakpoints(&self) -> Vec<T> {
        let mut b = self.coupling.breakpoints();
        for g in &self.cartan_drives {
            b.extend(g.breakpoints());
        }
        b
    }
}

/// Anything that yields the interaction-picture coupling γ(t).
pub trait Coupling<T: Real> {
    fn gamma(&self, t: T) -> Result<C<T>>;

    /// Times where γ may be discontinuous or kinked.
    fn breakpoints(&self) -> Vec<T> {
        Vec::new()
    }
}

impl<T: Real, F: Fn(T) -> C<T>> Coupling<T> for F {
    fn gamma(&self, t: T) -> Result<C<T>> {
        Ok(self(t))
    }
}

/// γ(t) = exp(i Σ_ℓ α(H_ℓ) ∫₀ᵗ g_ℓ) · f(t).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCoupling<T> {
    pub envelope: DriveEnvelope<T>,
    pub cartan_row: Vec<T>,
}

impl<T: Real> EffectiveCoupling<T> {
    pub fn new(envelope: DriveEnvelope<T>, cartan_row: Vec<T>) -> Result<Self> {
        envelope.validate()?;
        if envelope.cartan_drives.len() != cartan_row.len() {
            return Err(Error::Domain(format!(
                "cartan row has {} weights for {} Cartan drives",
                cartan_row.len(),
                envelope.cartan_drives.len()
            )));
        }
        Ok(EffectiveCoupling {
            envelope,
            cartan_row,
        })
    }

    pub fn bare(coupling: DriveShape<T>) -> Result<Self> {
        Self::new(DriveEnvelope::bare(coupling), Vec::new())
    }

    /// φ_α(t) = Σ_ℓ α(H_ℓ) ∫₀ᵗ g_ℓ.
    pub fn cartan_phase(&self, t: T) -> Result<T> {
        let mut phase = T::zero();
        for (w, g) in self.cartan_row.iter().zip(&self.envelope.cartan_drives) {
            if *w != T::zero() {
                phase += *w * g.integral(t)?;
            }
        }
        Ok(phase)
    }

    /// φ̇_α(t) = Σ_ℓ α(H_ℓ) g_ℓ(t).
    pub fn cartan_rate(&self, t: T) -> Result<T> {
        let mut rate = T::zero();
        for (w, g) in self.cartan_row.iter().zip(&self.envelope.cartan_drives) {
            if *w != T::zero() {
                rate += *w * g.value(t)?;
            }
        }
        Ok(rate)
    }

    /// True when f and every weighted g_ℓ are constant between breakpoints.
    pub fn is_piecewise_constant(&self) -> bool {
        self.envelope.coupling.is_piecewise_constant()
            && self
                .cartan_row
                .iter()
                .zip(&self.envelope.cartan_drives)
                .all(|(w, g)| *w == T::zero() || g.is_piecewise_constant())
    }

    pub fn bare_value(&self, t: T) -> Result<C<T>> {
        self.envelope.coupling.value(t)
    }
}

impl<T: Real> Coupling<T> for EffectiveCoupling<T> {
    fn gamma(&self, t: T) -> Result<C<T>> {
        let f = self.envelope.coupling.value(t)?;
        let g = C::from_polar(T::one(), self.cartan_phase(t)?) * f;
        if g.re.is_finite() && g.im.is_finite() {
            Ok(g)
        } else {
            Err(Error::NonFiniteDrive { t: t.as_f64() })
        }
    }

    fn breakpoints(&self) -> Vec<T> {
        self.envelope.breakpoints()
    }
}

pub fn effective_coupling<T: Real>(envelope: &DriveEnvelope<T>, cartan_row: &[T], t: T) -> Result<C<T>> {
    EffectiveCoupling::new(envelope.clone(), cartan_row.to_vec())?.gamma(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootData {
    pub cartan_matrix: Vec<Vec<i64>>,
    /// 1-based simple-root labels.
    pub selected_roots: Vec<usize>,
    pub sector_signs: Vec<Sigma>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutingCheck {
    pub commuting: bool,
    /// Offending 1-based label pairs with their Cartan entries (A_ik, A_ki).
    pub offending: Vec<(usize, usize, i64, i64)>,
}

impl RootData {
    pub fn new(cartan_matrix: Vec<Vec<i64>>, selected_roots: Vec<usize>, sector_signs: Vec<Sigma>) -> Result<Self> {
        let rd = RootData {
            cartan_matrix,
            selected_roots,
            sector_signs,
        };
        rd.check_well_formed()?;
        if rd.sector_signs.len() != rd.selected_roots.len() {
            return Err(Error::Domain("one sector sign per selected root".into()));
        }
        Ok(rd)
    }

    fn check_well_formed(&self) -> Result<()> {
        let n = self.cartan_matrix.len();
        if n == 0 || self.cartan_matrix.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("Cartan matrix must be square and nonempty".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let a = self.cartan_matrix[i][j];
                if i == j && a != 2 {
                    return Err(Error::Domain(format!("Cartan diagonal entry A_{}{} = {a} != 2", i + 1, j + 1)));
                }
                if i != j && a > 0 {
                    return Err(Error::Domain(format!("Cartan off-diagonal entry A_{}{} = {a} > 0", i + 1, j + 1)));
                }
                if i != j && (a == 0) != (self.cartan_matrix[j][i] == 0) {
                    return Err(Error::Domain(format!("A_{}{} and A_{}{} must vanish together", i + 1, j + 1, j + 1, i + 1)));
                }
            }
        }
        for &r in &self.selected_roots {
            if r == 0 || r > n {
                return Err(Error::Domain(format!("root label {r} outside 1..={n}")));
            }
        }
        let mut seen = self.selected_roots.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.selected_roots.len() {
            return Err(Error::Domain("selected roots must be distinct".into()));
        }
        Ok(())
    }

    /// α_k(H_ℓ) for the 1-based root label `k`: the k-th Cartan-matrix row.
    pub fn cartan_row<T: Real>(&self, root: usize) -> Vec<T> {
        self.cartan_matrix[root - 1]
            .iter()
            .map(|a| T::from_i64(*a).expect("small integer"))
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.cartan_matrix.len()
    }
}

pub fn validate_commuting_sectors(roots: &RootData) -> CommutingCheck {
    let mut offending = Vec::new();
    let sel = &roots.selected_roots;
    for (x, &i) in sel.iter().enumerate() {
        for &k in &sel[x + 1..] {
            let (lo, hi) = (i.min(k), i.max(k));
            let a = roots.cartan_matrix[lo - 1][hi - 1];
            let b = roots.cartan_matrix[hi - 1][lo - 1];
            if a != 0 || b != 0 {
                offending.push((lo, hi, a, b));
            }
        }
    }
    offending.sort_unstable();
    CommutingCheck {
        commuting: offending.is_empty(),
        offending,
    }
}

pub fn cartan_a3() -> Vec<Vec<i64>> {
    vec![vec![2, -1, 0], vec![-1, 2, -1], vec![0, -1, 2]]
}

pub fn cartan_b3() -> Vec<Vec<i64>> {
    vec![vec![2, -1, 0], vec![-1, 2, -2], vec![0, -1, 2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lanczos_examples() {
        let su2 = SectorSignature::<f64>::spin(1.0).unwrap();
        let b = lanczos_coefficients(&su2, 2).unwrap();
        assert!(close(b[0], 2f64.sqrt(), 1e-15) && close(b[1], 2f64.sqrt(), 1e-15));
        assert_eq!(lanczos_coefficients(&su2, 3).unwrap()[2], 0.0);

        let su11 = SectorSignature::<f64>::bosonic(0.25, 64).unwrap();
        let b = lanczos_coefficients(&su11, 2).unwrap();
        assert!(close(b[0], 0.5f64.sqrt(), 1e-15) && close(b[1], 3f64.sqrt(), 1e-15));

        let hw = SectorSignature::<f64>::heisenberg(64).unwrap();
        let b = lanczos_coefficients(&hw, 4).unwrap();
        for (x, want) in b.iter().zip([1.0, 2f64.sqrt(), 3f64.sqrt(), 2.0]) {
            assert!(close(*x, want, 1e-15));
        }
        for s in [su2, su11, hw] {
            assert_eq!(lanczos_b(&s, 0).unwrap(), 0.0);
        }
    }

    #[test]
    fn compact_weight_snaps_and_forces_dim() {
        let s = SectorSignature::<f64>::new(Sigma::Compact, -1.5 + 4e-10, 99).unwrap();
        assert_eq!(s.lowest_weight, -1.5);
        assert_eq!(s.dim, 4);
        assert!(SectorSignature::<f64>::new(Sigma::Compact, -0.7, 3).is_err());
        assert!(SectorSignature::<f64>::new(Sigma::Compact, 0.5, 3).is_err());
        assert!(SectorSignature::<f64>::new(Sigma::NonCompact, 0.0, 3).is_err());
        assert!(Sigma::from_int(3).is_err());
    }

    #[test]
    fn beyond_compact_chain_is_domain_error() {
        let s = SectorSignature::<f64>::spin(1.0).unwrap();
        assert!(lanczos_b(&s, 4).is_err());
        assert!(lanczos_coefficients(&s, 4).is_err());
    }

    #[test]
    fn virasoro_examples() {
        assert!(close(virasoro_weight(0.0, 24.0, 2, 64).unwrap().lowest_weight, 1.5, 1e-15));
        assert!(close(virasoro_weight(1.0, 0.0, 1, 64).unwrap().lowest_weight, 1.0, 1e-15));
        assert!(close(virasoro_weight(0.5, 1.0, 3, 64).unwrap().lowest_weight, 5.0 / 18.0, 1e-15));
        assert!(virasoro_weight(0.0, 0.0, 1, 64).is_err());
        assert!(virasoro_weight(0.0, -1.0, 2, 64).is_err());
    }

    #[test]
    fn cancelling_cartan_phases_leave_bare_coupling() {
        let env = DriveEnvelope {
            coupling: DriveShape::SechPulse { omega0: 1.0, width: 1.0 },
            cartan_drives: vec![
                RealProfile::Cosine { amplitude: 0.4, frequency: 0.7, phase: 0.1 },
                RealProfile::Cosine { amplitude: 0.8, frequency: 0.7, phase: 0.1 },
                RealProfile::Cosine { amplitude: 0.4, frequency: 0.7, phase: 0.1 },
            ],
        };
        for t in [0.0f64, 0.3, 2.5, 7.0] {
            let g = effective_coupling(&env, &[2.0, -1.0, 0.0], t).unwrap();
            assert!((g - c(1.0 / t.cosh(), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn rotating_field_detuning() {
        let (theta0, omega) = (0.9f64, 1.3f64);
        let env = DriveEnvelope {
            coupling: DriveShape::RotatingField { theta0, omega, h: 1.0 },
            cartan_drives: vec![RealProfile::Constant { value: theta0.cos() }],
        };
        let delta = omega - theta0.cos();
        for t in [0.0, 1.0, 4.2] {
            let g = effective_coupling(&env, &[1.0], t).unwrap();
            let want = C::from_polar(theta0.sin() / 2.0, -delta * t);
            assert!((g - want).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_phase_argument_is_fixed() {
        let env = DriveEnvelope::bare(DriveShape::ConstantPhase {
            amplitude: RealProfile::Sech { amplitude: 0.7, width: 2.0 },
            phase: 0.37,
        });
        for t in [0.1f64, 1.0, 5.0] {
            assert!((effective_coupling(&env, &[], t).unwrap().arg() - 0.37f64).abs() < 1e-15);
        }
    }

    #[test]
    fn row_length_must_match() {
        let env = DriveEnvelope::bare(DriveShape::SechPulse { omega0: 1.0, width: 1.0 });
        assert!(effective_coupling(&env, &[1.0], 0.0).is_err());
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn closed_form_integrals_match_quadrature() {
        let profiles = [
            RealProfile::Constant { value: -0.3 },
            RealProfile::Sech { amplitude: 1.2, width: 0.8 },
            RealProfile::Cosine { amplitude: 0.5, frequency: 2.0, phase: 0.3 },
            RealProfile::Cosine { amplitude: 0.5, frequency: 0.0, phase: 0.3 },
        ];
        for p in &profiles {
            for t in [0.5, 3.0] {
                let q = simpson(|s| p.value(s).unwrap(), 0.0, t, 2000);
                assert!(close(p.integral(t).unwrap(), q, 1e-11), "{p:?}");
            }
        }
        let q = RealProfile::QuenchFrequency { omega0: 0.6, omega1: 2.0, tau: 1.0 };
        let g1 = (4.0 + 0.36) / 1.2;
        assert!(close(q.integral(2.5).unwrap(), g1 + 0.6 * 1.5, 1e-14));
        assert!(close(q.value(0.999).unwrap(), g1, 1e-14));
        assert!(close(q.value(1.0).unwrap(), 0.6, 1e-14));
    }

    #[test]
    fn tabulated_profile_is_piecewise_linear_and_bounded() {
        let p = RealProfile::Tabulated { times: vec![0.0, 1.0, 3.0], values: vec![1.0, 3.0, -1.0] };
        p.validate().unwrap();
        assert!(close(p.value(0.5).unwrap(), 2.0, 1e-15));
        assert!(close(p.value(2.0).unwrap(), 1.0, 1e-15));
        assert!(close(p.integral(3.0).unwrap(), 2.0 + 2.0, 1e-15));
        assert!(close(p.integral(2.0).unwrap(), 2.0 + 2.0, 1e-15));
        assert!(p.value(3.5).is_err());
        let bad = RealProfile::Tabulated { times: vec![0.0, 0.0], values: vec![1.0, 1.0] };
        assert!(bad.validate().is_err());
        let d = DriveShape::Tabulated { times: vec![0.0, 2.0], values: vec![c(0.0, 0.0), c(2.0, -2.0)] };
        assert!((d.value(1.0).unwrap() - c(1.0, -1.0)).norm() < 1e-15);
        assert!(d.value(-0.1).is_err());
    }

    #[test]
    fn commuting_sector_examples() {
        let a3 = |roots: Vec<usize>| {
            let n = roots.len();
            RootData::new(cartan_a3(), roots, vec![Sigma::Compact; n]).unwrap()
        };
        assert!(validate_commuting_sectors(&a3(vec![1, 3])).commuting);
        let bad = validate_commuting_sectors(&a3(vec![1, 2]));
        assert!(!bad.commuting);
        assert_eq!(bad.offending, vec![(1, 2, -1, -1)]);
        assert!(validate_commuting_sectors(&a3(vec![2])).commuting);
        let b3 = RootData::new(cartan_b3(), vec![1, 3], vec![Sigma::Compact; 2]).unwrap();
        assert!(validate_commuting_sectors(&b3).commuting);
        assert_eq!(b3.cartan_row::<f64>(3), vec![0.0, -1.0, 2.0]);
        assert!(RootData::new(vec![vec![2, 1], vec![1, 2]], vec![1], vec![Sigma::Compact]).is_err());
        assert!(RootData::new(cartan_a3(), vec![4], vec![Sigma::Compact]).is_err());
    }

    proptest! {
        #[test]
        fn commuting_check_is_order_independent(perm in Just(vec![1usize, 2, 3]).prop_shuffle(), take in 1usize..=3) {
            let roots: Vec<usize> = perm.into_iter().take(take).collect();
            let mut sorted = roots.clone();
            sorted.sort_unstable();
            let n = roots.len();
            let a = validate_commuting_sectors(&RootData::new(cartan_b3(), roots, vec![Sigma::Compact; n]).unwrap());
            let b = validate_commuting_sectors(&RootData::new(cartan_b3(), sorted, vec![Sigma::Compact; n]).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn noncompact_coefficients_are_real_and_positive(kappa in 0.01f64..5.0, n in 1usize..60) {
            let s = SectorSignature::bosonic(kappa, 64).unwrap();
            let b = lanczos_b(&s, n).unwrap();
            prop_assert!(b > 0.0);
            prop_assert!((b * b - n as f64 * (2.0 * kappa + n as f64 - 1.0)).abs() < 1e-9 * b * b);
        }
    }
}
