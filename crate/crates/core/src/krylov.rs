//! Krylov wavefunctions φ_n(t), occupation probabilities and spread complexity
//! for single sectors and commuting products of sectors.

use crate::algebra::{lanczos_b, Coupling, SectorSignature, Sigma};
use crate::error::{Error, Result};
use crate::scalar::{c, Real, C};
use crate::weinorman::{hw_displacement, integrate_wn, HWDisplacement, WNState};

/// Largest admissible weight in the last retained level of a truncated chain.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Joint amplitudes are only materialized for this many sectors or fewer.
pub const MAX_JOINT_SECTORS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovWavefunction<T> {
    pub sector: SectorSignature<T>,
    pub t: T,
    pub amplitudes: Vec<C<T>>,
    pub probabilities: Vec<T>,
    /// Closed-form K.
    pub complexity: T,
    /// Closed-form ΔK.
    pub complexity_std: T,
}

impl<T: Real> KrylovWavefunction<T> {
    pub fn total_probability(&self) -> T {
        self.probabilities.iter().fold(T::zero(), |s, p| s + *p)
    }

    pub fn tail(&self) -> T {
        *self.probabilities.last().expect("dim >= 1")
    }

    /// Σ n P_n.
    pub fn complexity_from_sum(&self) -> T {
        self.probabilities
            .iter()
            .enumerate()
            .fold(T::zero(), |s, (n, p)| s + T::from_usize_lossy(n) * *p)
    }

    /// Σ n² P_n − (Σ n P_n)².
    pub fn variance_from_sum(&self) -> T {
        let k = self.complexity_from_sum();
        let m2 = self.probabilities.iter().enumerate().fold(T::zero(), |s, (n, p)| {
            let nf = T::from_usize_lossy(n);
            s + nf * nf * *p
        });
        m2 - k * k
    }
}

/// ln c_n with c_n = (Π_{m≤n} b_m)/n!, n = 0..dim−1.
pub fn log_coherent_weights<T: Real>(sector: &SectorSignature<T>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(sector.dim);
    let mut acc = T::zero();
    out.push(acc);
    for n in 1..sector.dim {
        acc += lanczos_b(sector, n)?.ln() - T::from_usize_lossy(n).ln();
        out.push(acc);
    }
    Ok(out)
}

fn finish<T: Real>(
    sector: &SectorSignature<T>,
    t: T,
    amplitudes: Vec<C<T>>,
    complexity: T,
    complexity_std: T,
) -> Result<KrylovWavefunction<T>> {
    let probabilities: Vec<T> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let kw = KrylovWavefunction {
        sector: *sector,
        t,
        amplitudes,
        probabilities,
        complexity,
        complexity_std,
    };
    if sector.sigma != Sigma::Compact && kw.tail() > T::lit(TAIL_TOLERANCE) {
        return Err(Error::Truncation {
            t: t.as_f64(),
            tail: kw.tail().as_f64(),
            tolerance: TAIL_TOLERANCE,
        });
    }
    Ok(kw)
}

/// φ_n = e^{λη} zⁿ c_n assembled in log space from the pole-free pair (A, B).
pub fn wavefunction_from_wn<T: Real>(sector: &SectorSignature<T>, wn: &WNState<T>) -> Result<KrylovWavefunction<T>> {
    if sector.sigma == Sigma::Heisenberg {
        return Err(Error::Domain("Heisenberg sectors use hw_wavefunction".into()));
    }
    if sector.sigma == Sigma::NonCompact && !(wn.z.norm() < T::one()) {
        return Err(Error::Domain(format!("|z| >= 1 at t = {} in a non-compact sector", wn.t)));
    }
    let logc = log_coherent_weights(sector)?;
    let lambda = sector.lowest_weight;
    let two_lambda = lambda + lambda;
    let (ln_a, arg_a) = (wn.a.norm().ln(), wn.arg_a());
    let (ln_b, arg_b) = (wn.b.norm().ln(), wn.b.arg());
    let amplitudes = logc
        .iter()
        .enumerate()
        .map(|(n, lc)| {
            let nf = T::from_usize_lossy(n);
            let power = two_lambda + nf;
            let mut log_mag = *lc;
            if power != T::zero() {
                log_mag -= power * ln_a;
            }
            if n > 0 {
                log_mag += nf * ln_b;
            }
            if log_mag == T::neg_infinity() {
                return c(T::zero(), T::zero());
            }
            let phase = -two_lambda * arg_a + nf * (arg_b - arg_a);
            C::from_polar(log_mag.exp(), phase)
        })
        .collect();
    let sigma = sector.sigma_value();
    let (a2, b2) = (wn.a.norm_sqr(), wn.b.norm_sqr());
    let norm = a2 + sigma * b2;
    let k = -(sigma * two_lambda) * b2 / norm;
    let var = -(sigma * two_lambda) * a2 * b2 / (norm * norm);
    finish(sector, wn.t, amplitudes, k, var.max(T::zero()).sqrt())
}

/// φ_n = e^{iΦ − |α|²/2} (−iα)ⁿ / √n!.
pub fn hw_wavefunction<T: Real>(disp: &HWDisplacement<T>, dim: usize) -> Result<KrylovWavefunction<T>> {
    let sector = SectorSignature::heisenberg(dim)?;
    let r2 = disp.alpha.norm_sqr();
    let (ln_r, arg) = (disp.alpha.norm().ln(), disp.alpha.arg() - T::FRAC_PI_2());
    let half = T::lit(0.5);
    let mut log_fact = T::zero();
    let amplitudes = (0..dim)
        .map(|n| {
            let nf = T::from_usize_lossy(n);
            if n > 0 {
                log_fact += nf.ln();
            }
            if n > 0 && r2 == T::zero() {
                return c(T::zero(), T::zero());
            }
            let log_mag = -half * r2 + if n > 0 { nf * ln_r } else { T::zero() } - half * log_fact;
            C::from_polar(log_mag.exp(), disp.phi + nf * arg)
        })
        .collect();
    finish(&sector, disp.t, amplitudes, r2, r2.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectorState<T> {
    Ladder(WNState<T>),
    Heisenberg(HWDisplacement<T>),
}

impl<T: Real> SectorState<T> {
    pub fn t(&self) -> T {
        match self {
            SectorState::Ladder(w) => w.t,
            SectorState::Heisenberg(d) => d.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexitySeries<T> {
    pub sector: SectorSignature<T>,
    pub states: Vec<SectorState<T>>,
    pub wavefunctions: Vec<KrylovWavefunction<T>>,
}

impl<T: Real> ComplexitySeries<T> {
    pub fn max_tail(&self) -> T {
        self.wavefunctions.iter().fold(T::zero(), |m, w| m.max(w.tail()))
    }
}

pub fn complexity_series<T: Real, G: Coupling<T> + ?Sized>(
    sector: &SectorSignature<T>,
    gamma: &G,
    grid: &[T],
    tol: T,
) -> Result<ComplexitySeries<T>> {
    let (states, wavefunctions) = match sector.sigma {
        Sigma::Heisenberg => {
            let disp = hw_displacement(gamma, grid, tol)?;
            let wf = disp
                .iter()
                .map(|d| hw_wavefunction(d, sector.dim))
                .collect::<Result<Vec<_>>>()?;
            (disp.into_iter().map(SectorState::Heisenberg).collect(), wf)
        }
        _ => {
            let wn = integrate_wn(sector, gamma, grid, tol)?;
            let wf = wn
                .iter()
                .map(|w| wavefunction_from_wn(sector, w))
                .collect::<Result<Vec<_>>>()?;
            (wn.into_iter().map(SectorState::Ladder).collect(), wf)
        }
    };
    Ok(ComplexitySeries {
        sector: *sector,
        states,
        wavefunctions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSectorWavefunction<T> {
    pub t: T,
    pub per_sector: Vec<KrylovWavefunction<T>>,
    pub total_complexity: T,
}

impl<T: Real> MultiSectorWavefunction<T> {
    pub fn from_sectors(per_sector: Vec<KrylovWavefunction<T>>) -> Self {
        let t = per_sector.first().map(|w| w.t).unwrap_or_else(T::zero);
        let total_complexity = per_sector.iter().fold(T::zero(), |s, w| s + w.complexity);
        MultiSectorWavefunction {
            t,
            per_sector,
            total_complexity,
        }
    }

    pub fn sectors(&self) -> Vec<SectorSignature<T>> {
        self.per_sector.iter().map(|w| w.sector).collect()
    }

    /// φ_{n₁…n_N} = Π_k φ^{(k)}_{n_k}.
    pub fn joint_amplitude(&self, levels: &[usize]) -> Result<C<T>> {
        if levels.len() != self.per_sector.len() {
            return Err(Error::Domain("one level per sector".into()));
        }
        let mut acc = c(T::one(), T::zero());
        for (w, n) in self.per_sector.iter().zip(levels) {
            acc = acc * *w.amplitudes.get(*n).ok_or_else(|| Error::Domain(format!("level {n} outside the sector")))?;
        }
        Ok(acc)
    }

    pub fn joint_probability(&self, levels: &[usize]) -> Result<T> {
        Ok(self.joint_amplitude(levels)?.norm_sqr())
    }

    /// All joint amplitudes, last sector index fastest.
    pub fn joint_amplitudes(&self) -> Result<Vec<C<T>>> {
        if self.per_sector.len() > MAX_JOINT_SECTORS {
            return Err(Error::Domain(format!(
                "joint amplitudes are materialized for at most {MAX_JOINT_SECTORS} sectors"
            )));
        }
        let mut out = vec![c(T::one(), T::zero())];
        for w in &self.per_sector {
            out = out
                .iter()
                .flat_map(|a| w.amplitudes.iter().map(move |b| *a * *b))
                .collect();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSectorSeries<T> {
    pub series: Vec<ComplexitySeries<T>>,
    pub points: Vec<MultiSectorWavefunction<T>>,
}

/// Runs each commuting sector independently; errors carry the sector index.
pub fn multi_sector<T: Real>(
    sectors: &[SectorSignature<T>],
    couplings: &[&dyn Coupling<T>],
    grid: &[T],
    tol: T,
) -> Result<MultiSectorSeries<T>> {
    if sectors.len() != couplings.len() || sectors.is_empty() {
        return Err(Error::Domain("one coupling per sector, at least one sector".into()));
    }
    let series = sectors
        .iter()
        .zip(couplings)
        .enumerate()
        .map(|(k, (s, g))| complexity_series(s, *g, grid, tol).map_err(|e| e.in_sector(k)))
        .collect::<Result<Vec<_>>>()?;
    let points = (0..grid.len())
        .map(|i| MultiSectorWavefunction::from_sectors(series.iter().map(|s| s.wavefunctions[i].clone()).collect()))
        .collect();
    Ok(MultiSectorSeries { series, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weinorman::closed_form_constant;
    use proptest::prelude::*;

    fn wn_from_z(sigma: Sigma, z: C<f64>) -> WNState<f64> {
        // Pick A real positive with |A|²(1 + σ|z|²) = 1.
        let a = (1.0 / (1.0 + sigma.value::<f64>() * z.norm_sqr())).sqrt();
        WNState::from_entries(0.0, c(a, 0.0), z * a, c(0.0, 0.0), 0.0)
    }

    #[test]
    fn spin_one_at_unit_modulus_is_binomial_half() {
        let s = SectorSignature::<f64>::spin(1.0).unwrap();
        let wf = wavefunction_from_wn(&s, &wn_from_z(Sigma::Compact, c(0.0, -1.0))).unwrap();
        for (p, want) in wf.probabilities.iter().zip([0.25f64, 0.5, 0.25]) {
            assert!((p - want).abs() < 1e-15);
        }
        assert!((wf.complexity - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unevolved_state_sits_on_first_level() {
        for s in [SectorSignature::spin(1.5).unwrap(), SectorSignature::bosonic(0.3, 16).unwrap()] {
            let wf = wavefunction_from_wn(&s, &WNState::identity(0.0)).unwrap();
            assert_eq!(wf.probabilities[0], 1.0);
            assert!(wf.probabilities[1..].iter().all(|p| *p == 0.0));
            assert_eq!(wf.complexity, 0.0);
        }
    }

    #[test]
    fn quarter_weight_complexity_formula() {
        let s = SectorSignature::bosonic(0.25, 128).unwrap();
        let z = C::from_polar(0.6, 0.3);
        let wf = wavefunction_from_wn(&s, &wn_from_z(Sigma::NonCompact, z)).unwrap();
        let want = 0.36 / (2.0 * (1.0 - 0.36));
        assert!((wf.complexity - want).abs() < 1e-14);
        assert!((wf.complexity_from_sum() - want).abs() < 1e-12);
    }

    #[test]
    fn pole_state_puts_all_weight_on_top_level() {
        let s = SectorSignature::<f64>::spin(1.0).unwrap();
        let st = closed_form_constant(Sigma::Compact, 1.0, std::f64::consts::FRAC_PI_2);
        let wf = wavefunction_from_wn(&s, &st).unwrap();
        assert!((wf.probabilities[2] - 1.0).abs() < 1e-12);
        assert!((wf.complexity - 2.0).abs() < 1e-12);
    }

    #[test]
    fn amplitudes_match_direct_power_formula() {
        let s = SectorSignature::spin(2.0).unwrap();
        let st = closed_form_constant(Sigma::Compact, 0.7, 0.9);
        let wf = wavefunction_from_wn(&s, &st).unwrap();
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        for n in 0..5 {
            let direct = (st.eta * -2.0).exp() * st.z.powu(n as u32) * f64::sqrt(binom[n]);
            assert!((wf.amplitudes[n] - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn truncation_tail_is_enforced() {
        let s = SectorSignature::bosonic(0.5, 8).unwrap();
        let r = wavefunction_from_wn(&s, &wn_from_z(Sigma::NonCompact, c(0.9, 0.0)));
        assert!(matches!(r, Err(Error::Truncation { .. })));
        let r = hw_wavefunction(&HWDisplacement { t: 1.0, alpha: c(3.0, 0.0), phi: 0.0 }, 8);
        assert!(matches!(r, Err(Error::Truncation { .. })));
    }

    #[test]
    fn poisson_statistics() {
        let d = HWDisplacement { t: 0.0, alpha: C::from_polar(1.0, 0.4), phi: 0.2 };
        let wf = hw_wavefunction(&d, 40).unwrap();
        let mut fact = 1.0;
        for (n, p) in wf.probabilities.iter().enumerate().take(10) {
            if n > 0 {
                fact *= n as f64;
            }
            assert!((p - (-1.0f64).exp() / fact).abs() < 1e-15);
        }
        assert!((wf.complexity_from_sum() - 1.0).abs() < 1e-12);
        assert!((wf.variance_from_sum() - 1.0).abs() < 1e-12);
        let vac = hw_wavefunction(&HWDisplacement { t: 0.0, alpha: c(0.0, 0.0), phi: 0.0 }, 4).unwrap();
        assert_eq!(vac.probabilities, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn joint_product_and_additivity() {
        let s = SectorSignature::<f64>::spin(1.0).unwrap();
        let a = wavefunction_from_wn(&s, &closed_form_constant(Sigma::Compact, 1.0, 0.4)).unwrap();
        let b = wavefunction_from_wn(&s, &WNState::identity(0.4)).unwrap();
        let m = MultiSectorWavefunction::from_sectors(vec![a.clone(), b]);
        assert!((m.total_complexity - a.complexity).abs() < 1e-15);
        let joint = m.joint_amplitudes().unwrap();
        assert_eq!(joint.len(), 9);
        assert!((joint[3] - a.amplitudes[1]).norm() < 1e-15);
        let many = MultiSectorWavefunction::from_sectors(vec![a.clone(), a.clone(), a.clone(), a]);
        assert!(many.joint_amplitudes().is_err());
        assert!(many.joint_probability(&[0, 1, 2, 0]).is_ok());
    }

    #[test]
    fn sector_errors_are_tagged() {
        let s = SectorSignature::<f64>::spin(1.0).unwrap();
        let tiny = SectorSignature::bosonic(0.5, 2).unwrap();
        let strong = |_t: f64| c(3.0, 0.0);
        let weak = |_t: f64| c(0.0, 0.0);
        let r = multi_sector(&[s, tiny], &[&weak, &strong], &[0.0, 1.0], 1e-10);
        match r {
            Err(Error::Sector { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected tagged error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn closed_forms_match_sums(j2 in 1usize..12, r in 0.0f64..3.0, th in -3.0f64..3.0) {
            let s = SectorSignature::spin(j2 as f64 / 2.0).unwrap();
            let wf = wavefunction_from_wn(&s, &wn_from_z(Sigma::Compact, C::from_polar(r, th))).unwrap();
            prop_assert!((wf.total_probability() - 1.0).abs() < 1e-12);
            prop_assert!((wf.complexity - wf.complexity_from_sum()).abs() < 1e-10);
            prop_assert!((wf.complexity_std.powi(2) - wf.variance_from_sum()).abs() < 1e-10);
        }

        #[test]
        fn compact_reflection_reverses_distribution(j2 in 1usize..10, r in 0.05f64..5.0, th in -3.0f64..3.0) {
            let s = SectorSignature::spin(j2 as f64 / 2.0).unwrap();
            let z = C::from_polar(r, th);
            let p = wavefunction_from_wn(&s, &wn_from_z(Sigma::Compact, z)).unwrap().probabilities;
            let q = wavefunction_from_wn(&s, &wn_from_z(Sigma::Compact, c(1.0, 0.0) / z.conj())).unwrap().probabilities;
            for n in 0..p.len() {
                prop_assert!((p[n] - q[p.len() - 1 - n]).abs() < 1e-12);
            }
        }

        #[test]
        fn noncompact_closed_forms_match_sums(kappa in 0.1f64..2.0, r in 0.0f64..0.6, th in -3.0f64..3.0) {
            let s = SectorSignature::bosonic(kappa, 160).unwrap();
            let wf = wavefunction_from_wn(&s, &wn_from_z(Sigma::NonCompact, C::from_polar(r, th))).unwrap();
            prop_assert!((wf.total_probability() - 1.0).abs() < 1e-9);
            prop_assert!((wf.complexity - wf.complexity_from_sum()).abs() < 1e-10);
            prop_assert!((wf.complexity_std.powi(2) - wf.variance_from_sum()).abs() < 1e-10);
        }
    }
}
