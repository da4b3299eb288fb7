//! Single-exponential generator G = Θ₀L₀ + Θ₊L₊ + Θ₊*L₋ with e^{−iG} equal to the
//! Wei–Norman product, and the constant-coefficient chain in fictitious time s
//! whose s = 1 amplitudes are the physical Krylov amplitudes.
//!
//! For σ = −1 not every evolution is an exponential: when Re A < −1 the 2×2
//! matrix has trace below −2. There e^{−iG} is matched to −M instead, and the
//! sign is carried by the central element e^{2πimL₀}. In a lowest-weight
//! representation that element is the scalar e^{2πimλ}, which the chain absorbs
//! as a constant shift of its diagonal.

use crate::algebra::{lanczos_b, SectorSignature, Sigma};
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::scalar::{c, i_unit, unwrap_angle, Real, C};
use crate::weinorman::{sinc, HWDisplacement, WNState};

/// Unitarity defect above which `invert` renormalizes (A, B) before inverting.
pub const RENORMALIZE_ABOVE: f64 = 1e-8;

const DEGENERATE_SIN: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams<T> {
    pub t: T,
    pub theta0: T,
    pub theta_plus: C<T>,
    /// χ = √(σ|Θ₊|² + Θ₀²/4): real on elliptic branches, imaginary on hyperbolic ones.
    pub chi: C<T>,
    /// k in χ = 2πk ± χ₀.
    pub branch_index: i64,
    /// m in U = e^{2πimL₀} e^{−iG}.
    pub center_winding: i64,
    /// Unitarity defect of the state this was inverted from.
    pub defect: T,
}

impl<T: Real> GeneratorParams<T> {
    pub fn new(theta0: T, theta_plus: C<T>, sigma: Sigma) -> Self {
        let chi2 = sigma.value::<T>() * theta_plus.norm_sqr() + theta0 * theta0 / T::lit(4.0);
        GeneratorParams {
            t: T::zero(),
            theta0,
            theta_plus,
            chi: c(chi2, T::zero()).sqrt(),
            branch_index: 0,
            center_winding: 0,
            defect: T::zero(),
        }
    }

    pub fn chi_defect(&self, sigma: Sigma) -> T {
        let chi2 = sigma.value::<T>() * self.theta_plus.norm_sqr() + self.theta0 * self.theta0 / T::lit(4.0);
        (self.chi * self.chi - c(chi2, T::zero())).norm()
    }

    /// Scalar added to every diagonal entry of the chain: e^{−i·shift} = e^{2πimλ}.
    pub fn central_shift(&self, lambda: T) -> T {
        -T::TAU() * lambda * T::from_i64(self.center_winding).expect("small winding")
    }
}

struct Entries<T> {
    a: C<T>,
    b: C<T>,
    wa: C<T>,
    /// arg A continued along e^{−isG}, s ∈ [0, 1].
    arg_a: T,
}

fn exponential_entries<T: Real>(p: &GeneratorParams<T>) -> Entries<T> {
    let i = i_unit::<T>();
    let sc = sinc(p.chi);
    let half = p.theta0 / T::lit(2.0);
    let a = p.chi.cos() + i * sc * half;
    let b = -i * sc * p.theta_plus;
    let wa = -i * sc * p.theta_plus.conj();
    let principal = a.arg();
    let arg_a = if p.chi.im == T::zero() && p.chi.re != T::zero() {
        // A(s) = cos(sχ) + i(Θ₀/2χ) sin(sχ) keeps its argument within π of ±sχ.
        let r = half / p.chi.re;
        let reference = if r >= T::zero() { p.chi.re } else { -p.chi.re };
        unwrap_angle(reference, principal)
    } else {
        principal
    };
    Entries { a, b, wa, arg_a }
}

/// Wei–Norman data of e^{2πimL₀}e^{−iG}. At a pole of z (A = 0) the returned
/// state has infinite z; `WNState::at_pole` flags it and (A, B) stay exact.
pub fn disentangle<T: Real>(params: &GeneratorParams<T>, sigma: Sigma) -> Result<WNState<T>> {
    if sigma == Sigma::Heisenberg {
        return Err(Error::Domain("disentangle needs sigma = +1 or -1".into()));
    }
    let e = exponential_entries(params);
    let m = params.center_winding;
    let sign = if m.rem_euclid(2) == 0 { T::one() } else { -T::one() };
    let pi_m = T::PI() * T::from_i64(m).expect("small winding");
    // η = η_G + 2πim, so arg A = arg A_G − πm.
    Ok(WNState::from_entries(params.t, e.a * sign, e.b * sign, e.wa * sign, e.arg_a - pi_m))
}

fn nearest_branch<T: Real>(chi: T, prev: T) -> (T, i64) {
    // 2πk + χ closest to the previous value.
    let tau = T::TAU();
    let k = ((prev - chi) / tau).round();
    (chi + k * tau, k.to_i64().unwrap_or(0))
}

fn compact_branch<T: Real>(a: C<T>, b: C<T>, prev: Option<&GeneratorParams<T>>) -> (T, C<T>, C<T>, i64) {
    let i = i_unit::<T>();
    let prev_chi = prev.map(|p| p.chi.re).unwrap_or_else(T::zero);
    let s0 = (a.im * a.im + b.norm_sqr()).sqrt();
    let chi0 = s0.atan2(a.re);
    // Orientation of (Θ₀, Θ₊)/χ is smooth in t even where χ crosses kπ.
    let prev_dir = prev.and_then(|p| {
        (p.chi.im == T::zero() && p.chi.re.abs() > T::lit(1e-12))
            .then(|| (p.theta0 / p.chi.re, p.theta_plus / p.chi.re))
    });
    let sgn = match prev_dir {
        Some((d0, dp)) if s0 >= T::lit(DEGENERATE_SIN) => {
            let dot = d0 * (a.im + a.im) / s0 + (i * b / s0 * dp.conj()).re;
            if dot >= T::zero() {
                T::one()
            } else {
                -T::one()
            }
        }
        _ => T::one(),
    };
    let (chi, k) = nearest_branch(sgn * chi0, prev_chi);
    if s0 >= T::lit(DEGENERATE_SIN) || chi.abs() < T::lit(1e-3) {
        // χ/sin χ, finite through χ → 0.
        let ratio = if s0 > T::zero() { chi / (sgn * s0) } else { T::one() };
        ((ratio + ratio) * a.im, i * b * ratio, c(chi, T::zero()), k)
    } else {
        // χ ≈ kπ, k ≠ 0: every direction gives ±1, keep the previous one.
        let (d0, dp) = prev_dir.unwrap_or((T::lit(2.0), c(T::zero(), T::zero())));
        (d0 * chi, dp * chi, c(chi, T::zero()), k)
    }
}

/// σ = −1: generator of whichever of ±M has Re A ≥ 0, so |χ| ≤ π/2 on elliptic
/// elements and the generator norm stays bounded. The sign is restored by the
/// central winding.
fn noncompact_minimal<T: Real>(a: C<T>, b: C<T>) -> (T, C<T>, C<T>, i64) {
    let i = i_unit::<T>();
    let flip = if a.re < T::zero() { -T::one() } else { T::one() };
    let (a, b) = (a * flip, b * flip);
    let radicand = a.im * a.im - b.norm_sqr();
    if radicand > T::zero() {
        let s0 = radicand.sqrt();
        let chi = s0.atan2(a.re);
        let ratio = chi / s0;
        ((ratio + ratio) * a.im, i * b * ratio, c(chi, T::zero()), 0)
    } else {
        let s1 = (-radicand).sqrt();
        let kappa = s1.asinh();
        let ratio = if s1 > T::zero() { kappa / s1 } else { T::one() };
        ((ratio + ratio) * a.im, i * b * ratio, c(T::zero(), kappa), 0)
    }
}

/// Generator of the Wei–Norman state. For σ = +1, χ is continued from `prev`
/// (or from 0); for σ = −1 the bounded representative is used.
pub fn invert<T: Real>(wn: &WNState<T>, sigma: Sigma, prev: Option<&GeneratorParams<T>>) -> Result<GeneratorParams<T>> {
    let sv = match sigma {
        Sigma::Heisenberg => return Err(Error::Domain("invert needs sigma = +1 or -1".into())),
        s => s.value::<T>(),
    };
    let (mut a, mut b) = (wn.a, wn.b);
    let norm = a.norm_sqr() + sv * b.norm_sqr();
    let defect = (norm - T::one()).abs();
    if defect > T::lit(RENORMALIZE_ABOVE) {
        if !(norm > T::zero()) {
            return Err(Error::Unitarity { t: wn.t.as_f64(), defect: defect.as_f64() });
        }
        let s = norm.sqrt();
        a = a / s;
        b = b / s;
    }

    let (theta0, theta_plus, chi, branch_index) = if sigma == Sigma::Compact {
        compact_branch(a, b, prev)
    } else {
        noncompact_minimal(a, b)
    };

    let mut params = GeneratorParams {
        t: wn.t,
        theta0,
        theta_plus,
        chi,
        branch_index,
        center_winding: 0,
        defect,
    };
    let g = exponential_entries(&params);
    let winding = ((g.arg_a - wn.arg_a()) / T::PI()).round();
    params.center_winding = winding.to_i64().unwrap_or(0);
    Ok(params)
}

/// Inverts a whole trajectory in order, carrying branch continuity.
pub fn invert_series<T: Real>(states: &[WNState<T>], sigma: Sigma) -> Result<Vec<GeneratorParams<T>>> {
    let mut out: Vec<GeneratorParams<T>> = Vec::with_capacity(states.len());
    for st in states {
        let p = invert(st, sigma, out.last())?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FictitiousChain<T> {
    /// a_n.
    pub diag: Vec<T>,
    /// b̃_n indexed by n; entry 0 is unused and zero.
    pub offdiag: Vec<C<T>>,
    pub psi: Vec<C<T>>,
    pub s: T,
}

impl<T: Real> FictitiousChain<T> {
    pub fn norm_sqr(&self) -> T {
        self.psi.iter().fold(T::zero(), |s, x| s + x.norm_sqr())
    }
}

/// Chain coefficients a_n = Θ₀(λ+n) + shift, b̃_n = Θ₊ b_n.
pub fn chain_coefficients<T: Real>(sector: &SectorSignature<T>, params: &GeneratorParams<T>) -> Result<(Vec<T>, Vec<C<T>>)> {
    if sector.sigma == Sigma::Heisenberg {
        return Err(Error::Domain("Heisenberg chains are built from the displacement".into()));
    }
    let lambda = sector.lowest_weight;
    let shift = params.central_shift(lambda);
    let diag = (0..sector.dim)
        .map(|n| params.theta0 * (lambda + T::from_usize_lossy(n)) + shift)
        .collect();
    let offdiag = (0..sector.dim)
        .map(|n| lanczos_b(sector, n).map(|b| params.theta_plus * b))
        .collect::<Result<Vec<_>>>()?;
    Ok((diag, offdiag))
}

/// Heisenberg–Weyl chain: G = −Φ + αa† + α*a, so a_n = −Φ and b̃_n = α√n.
pub fn hw_chain_coefficients<T: Real>(disp: &HWDisplacement<T>, dim: usize) -> (Vec<T>, Vec<C<T>>) {
    let diag = vec![-disp.phi; dim];
    let offdiag = (0..dim)
        .map(|n| disp.alpha * T::from_usize_lossy(n).sqrt())
        .collect();
    (diag, offdiag)
}

/// Integrates i∂ₛψ_n = a_nψ_n + b̃_nψ_{n−1} + b̃*_{n+1}ψ_{n+1} from ψ(0) = e₀.
pub fn evolve_chain<T: Real>(diag: &[T], offdiag: &[C<T>], s_grid: &[T], tol: T) -> Result<Vec<FictitiousChain<T>>> {
    let dim = diag.len();
    if offdiag.len() != dim || dim == 0 {
        return Err(Error::Domain("chain coefficient lengths disagree".into()));
    }
    if s_grid.iter().any(|s| *s < T::zero() || *s > T::one()) {
        return Err(Error::Grid("fictitious time must lie in [0, 1]".into()));
    }
    let zero = c(T::zero(), T::zero());
    let make = |s: T, psi: Vec<C<T>>| FictitiousChain {
        diag: diag.to_vec(),
        offdiag: offdiag.to_vec(),
        psi,
        s,
    };
    if offdiag.iter().all(|b| b.norm() == T::zero()) {
        return Ok(s_grid
            .iter()
            .map(|&s| {
                let mut psi = vec![zero; dim];
                psi[0] = C::from_polar(T::one(), -s * diag[0]);
                make(s, psi)
            })
            .collect());
    }
    let mut y0 = vec![zero; dim];
    y0[0] = c(T::one(), T::zero());
    let mi = -i_unit::<T>();
    let out = integrate(
        |_s, y, dy| {
            for n in 0..dim {
                let mut acc = y[n] * diag[n];
                if n > 0 {
                    acc += offdiag[n] * y[n - 1];
                }
                if n + 1 < dim {
                    acc += offdiag[n + 1].conj() * y[n + 1];
                }
                dy[n] = mi * acc;
            }
            Ok(())
        },
        T::zero(),
        &y0,
        s_grid,
        &[],
        OdeOptions::with_tol(tol),
        |_, _| {},
    )?;
    Ok(s_grid.iter().zip(out).map(|(s, psi)| make(*s, psi)).collect())
}

pub fn chain_evolve<T: Real>(
    sector: &SectorSignature<T>,
    params: &GeneratorParams<T>,
    s_grid: &[T],
    tol: T,
) -> Result<Vec<FictitiousChain<T>>> {
    let (diag, offdiag) = chain_coefficients(sector, params)?;
    evolve_chain(&diag, &offdiag, s_grid, tol)
}

pub fn chain_evolve_hw<T: Real>(disp: &HWDisplacement<T>, dim: usize, s_grid: &[T], tol: T) -> Result<Vec<FictitiousChain<T>>> {
    let (diag, offdiag) = hw_chain_coefficients(disp, dim);
    evolve_chain(&diag, &offdiag, s_grid, tol)
}

/// ψ_n → e^{−in·arg Θ₊}ψ_n, turning every b̃_n into |b̃_n|.
pub fn rephase_gauge<T: Real>(chain: &FictitiousChain<T>) -> FictitiousChain<T> {
    let phase = chain
        .offdiag
        .iter()
        .find(|b| b.norm() > T::zero())
        .map(|b| b.arg())
        .unwrap_or_else(T::zero);
    FictitiousChain {
        diag: chain.diag.clone(),
        offdiag: chain.offdiag.iter().map(|b| c(b.norm(), T::zero())).collect(),
        psi: chain
            .psi
            .iter()
            .enumerate()
            .map(|(n, x)| *x * C::from_polar(T::one(), -phase * T::from_usize_lossy(n)))
            .collect(),
        s: chain.s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::wavefunction_from_wn;
    use crate::weinorman::{closed_form_constant, closed_form_quench, closed_form_rotating};
    use proptest::prelude::*;

    #[test]
    fn disentangle_examples() {
        let r = 0.8f64;
        let st = disentangle(&GeneratorParams::new(0.0, c(r, 0.0), Sigma::Compact), Sigma::Compact).unwrap();
        assert!((st.z - c(0.0, -r.tan())).norm() < 1e-14);
        assert!((st.eta - c(-2.0 * r.cos().ln(), 0.0)).norm() < 1e-14);
        let st = disentangle(&GeneratorParams::new(0.0, c(r, 0.0), Sigma::NonCompact), Sigma::NonCompact).unwrap();
        assert!((st.z - c(0.0, -r.tanh())).norm() < 1e-14);
        let id = disentangle(&GeneratorParams::new(0.0, c(0.0, 0.0), Sigma::Compact), Sigma::Compact).unwrap();
        assert_eq!((id.z, id.eta, id.w), (c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)));
    }

    #[test]
    fn disentangle_flags_pole() {
        let p = GeneratorParams::new(0.0, c(std::f64::consts::FRAC_PI_2, 0.0), Sigma::Compact);
        let st = disentangle(&p, Sigma::Compact).unwrap();
        assert!(st.a.norm() < 1e-15);
        assert!((st.b - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn invert_examples() {
        let p = invert(&WNState::identity(0.0), Sigma::Compact, None).unwrap();
        assert_eq!((p.theta0, p.theta_plus, p.chi), (0.0, c(0.0, 0.0), c(0.0, 0.0)));
        let r = 1.1f64;
        let p = invert(&closed_form_constant(Sigma::Compact, r, 1.0), Sigma::Compact, None).unwrap();
        assert!(p.theta0.abs() < 1e-14);
        assert!((p.theta_plus - c(r, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn branch_continuity_through_pi() {
        // Constant drive: Θ₊ = t grows through χ = π and beyond.
        let mut prev: Option<GeneratorParams<f64>> = None;
        for k in 0..=80 {
            let t = k as f64 * 0.1;
            let st = closed_form_constant(Sigma::Compact, 1.0, t);
            let p = invert(&st, Sigma::Compact, prev.as_ref()).unwrap();
            assert!((p.theta_plus - c(t, 0.0)).norm() < 1e-7, "t={t} got {}", p.theta_plus);
            assert!(p.theta0.abs() < 1e-7);
            prev = Some(p);
        }
        assert_eq!(prev.unwrap().branch_index, 1);
    }

    #[test]
    fn central_winding_covers_negative_trace() {
        // Quench with Re A < −1 on part of the trajectory.
        let lambda = 0.25;
        let sector = SectorSignature::bosonic(lambda, 128).unwrap();
        let mut prev: Option<GeneratorParams<f64>> = None;
        let mut flipped = 0;
        for k in 0..=200 {
            let st = closed_form_quench(0.6, 2.0, 10.0, k as f64 * 0.05);
            let p = invert(&st, Sigma::NonCompact, prev.as_ref()).unwrap();
            if p.center_winding % 2 != 0 {
                flipped += 1;
            }
            let back = disentangle(&p, Sigma::NonCompact).unwrap();
            assert!((back.a - st.a).norm() < 1e-10);
            assert!((back.b - st.b).norm() < 1e-10);
            assert!((back.eta - st.eta).norm() < 1e-9);
            let phys = wavefunction_from_wn(&sector, &st).unwrap();
            let chain = chain_evolve(&sector, &p, &[1.0], 1e-12).unwrap();
            let dev = chain[0].psi.iter().zip(&phys.amplitudes).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            assert!(dev < 1e-8, "t={} dev={dev}", st.t);
            prev = Some(p);
        }
        assert!(flipped > 0);
    }

    #[test]
    fn trivial_chain_is_a_phase() {
        let s = SectorSignature::spin(1.0).unwrap();
        let p = GeneratorParams::new(2.0, c(0.0, 0.0), Sigma::Compact);
        let ch = chain_evolve(&s, &p, &[0.0, 1.0], 1e-12).unwrap();
        assert_eq!(ch[0].psi[0], c(1.0, 0.0));
        assert!((ch[1].psi[0] - C::from_polar(1.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn rotating_spin_chain_matches_physical_amplitudes() {
        let s = SectorSignature::spin(1.0).unwrap();
        let mut prev: Option<GeneratorParams<f64>> = None;
        for k in 0..=40 {
            let st = closed_form_rotating(std::f64::consts::FRAC_PI_2, 1.0, k as f64 * 0.5);
            let p = invert(&st, Sigma::Compact, prev.as_ref()).unwrap();
            assert!(p.chi_defect(Sigma::Compact) < 1e-12);
            let ch = chain_evolve(&s, &p, &[0.0, 0.5, 1.0], 1e-12).unwrap();
            let phys = wavefunction_from_wn(&s, &st).unwrap();
            for (a, b) in ch[2].psi.iter().zip(&phys.amplitudes) {
                assert!((a - b).norm() < 1e-9);
            }
            assert!(ch.iter().all(|x| (x.norm_sqr() - 1.0).abs() < 1e-10));
            prev = Some(p);
        }
    }

    #[test]
    fn rephasing_makes_couplings_real() {
        let s = SectorSignature::<f64>::spin(1.5).unwrap();
        let p = GeneratorParams::new(0.4, C::from_polar(0.7, 1.2), Sigma::Compact);
        let ch = chain_evolve(&s, &p, &[1.0], 1e-12).unwrap().remove(0);
        let r = rephase_gauge(&ch);
        for (n, b) in r.offdiag.iter().enumerate() {
            assert_eq!(b.im, 0.0);
            assert!((b.re - 0.7 * lanczos_b(&s, n).unwrap()).abs() < 1e-15);
        }
        for (x, y) in ch.psi.iter().zip(&r.psi) {
            assert!((x.norm() - y.norm()).abs() < 1e-15);
        }
        let real = chain_evolve(&s, &GeneratorParams::new(0.4, c(0.7, 0.0), Sigma::Compact), &[1.0], 1e-12).unwrap().remove(0);
        assert_eq!(rephase_gauge(&real).psi, real.psi);
    }

    proptest! {
        #[test]
        fn compact_round_trip(t0 in -2.0f64..2.0, r in 0.0f64..0.785, ph in -3.1f64..3.1) {
            let p = GeneratorParams::new(t0, C::from_polar(r, ph), Sigma::Compact);
            let back = invert(&disentangle(&p, Sigma::Compact).unwrap(), Sigma::Compact, None).unwrap();
            prop_assert!((back.theta0 - t0).abs() < 1e-10);
            prop_assert!((back.theta_plus - p.theta_plus).norm() < 1e-10);
        }

        #[test]
        fn noncompact_round_trip(t0 in -1.0f64..1.0, r in 0.0f64..1.0, ph in -3.1f64..3.1) {
            let p = GeneratorParams::new(t0, C::from_polar(r, ph), Sigma::NonCompact);
            let back = invert(&disentangle(&p, Sigma::NonCompact).unwrap(), Sigma::NonCompact, None).unwrap();
            prop_assert!((back.theta0 - t0).abs() < 1e-10);
            prop_assert!((back.theta_plus - p.theta_plus).norm() < 1e-10);
            prop_assert_eq!(back.center_winding, 0);
        }
    }
}
