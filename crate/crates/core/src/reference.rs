//! Brute-force oracles on explicit truncated matrices: ladder representations,
//! time-stepped Schrödinger evolution, Hermitian Lanczos and gauge checks.

use crate::algebra::{lanczos_b, Coupling, EffectiveCoupling, SectorSignature, Sigma};
use crate::error::{Error, Result};
use crate::generator::GeneratorParams;
use crate::krylov::KrylovWavefunction;
use crate::linalg::{vdot, vnorm, CMatrix};
use crate::ode::{integrate, OdeOptions};
use crate::scalar::{c, i_unit, Real, C};
use crate::weinorman::WNState;

/// |A| below which the matrix identity is not evaluated: e^{ηL₀} has entries
/// of size 1/|A| there.
pub const ILL_CONDITIONED_A: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRep<T> {
    pub sector: SectorSignature<T>,
    pub lp: CMatrix<T>,
    pub lm: CMatrix<T>,
    pub l0: CMatrix<T>,
}

/// L₊ with b_{n+1} on the subdiagonal, L₋ = L₊†, L₀ = diag(λ + n) or the number
/// operator for Heisenberg sectors.
pub fn build_rep<T: Real>(sector: &SectorSignature<T>) -> Result<MatrixRep<T>> {
    let d = sector.dim;
    let b = (1..d).map(|n| lanczos_b(sector, n)).collect::<Result<Vec<_>>>()?;
    let zero = c(T::zero(), T::zero());
    let lp = CMatrix::from_fn(d, |i, j| if i == j + 1 { c(b[j], T::zero()) } else { zero });
    let offset = match sector.sigma {
        Sigma::Heisenberg => T::zero(),
        _ => sector.lowest_weight,
    };
    let l0 = CMatrix::diagonal(
        &(0..d)
            .map(|n| c(offset + T::from_usize_lossy(n), T::zero()))
            .collect::<Vec<_>>(),
    );
    Ok(MatrixRep {
        sector: *sector,
        lm: lp.adjoint(),
        lp,
        l0,
    })
}

impl<T: Real> MatrixRep<T> {
    /// Max entry of [L₊, L₋] − 2σL₀ (ladders) or [L₋, L₊] − 1 (Heisenberg) on
    /// the block that does not touch the truncation edge.
    pub fn commutator_defect(&self) -> T {
        let d = self.sector.dim;
        let (lhs, rhs) = match self.sector.sigma {
            Sigma::Heisenberg => (self.lm.commutator(&self.lp), CMatrix::identity(d)),
            s => (
                self.lp.commutator(&self.lm),
                self.l0.scale(c(s.value::<T>() * T::lit(2.0), T::zero())),
            ),
        };
        let diff = &lhs - &rhs;
        let keep = if self.sector.sigma == Sigma::Compact { d } else { d - 1 };
        let mut m = T::zero();
        for i in 0..keep {
            for j in 0..keep {
                m = m.max(diff[(i, j)].norm());
            }
        }
        m
    }

    /// ⟨0|L₋ⁿL₊ⁿ|0⟩ / ⟨0|L₋ⁿ⁻¹L₊ⁿ⁻¹|0⟩ for n = 1..n_max, from repeated matvecs.
    pub fn ladder_norm_ratios(&self, n_max: usize) -> Vec<T> {
        let d = self.sector.dim;
        let mut v = vec![c(T::zero(), T::zero()); d];
        v[0] = c(T::one(), T::zero());
        let mut prev = T::one();
        let mut out = Vec::with_capacity(n_max);
        for _ in 0..n_max.min(d.saturating_sub(1)) {
            v = self.lp.matvec(&v);
            let cur = vdot(&v, &v).re;
            out.push(cur / prev);
            prev = cur;
        }
        out
    }

    /// G = Θ₀L₀ + Θ₊L₊ + Θ₊*L₋ plus the central shift on the diagonal.
    pub fn generator_matrix(&self, params: &GeneratorParams<T>) -> CMatrix<T> {
        let id = CMatrix::identity(self.sector.dim);
        let shift = params.central_shift(self.sector.lowest_weight);
        &(&(&self.l0.scale(c(params.theta0, T::zero())) + &self.lp.scale(params.theta_plus))
            + &self.lm.scale(params.theta_plus.conj()))
            + &id.scale(c(shift, T::zero()))
    }
}

/// Defining 2×2 representation: L₀ = diag(−½, ½), L₊ = [[0,0],[1,0]], L₋ = σ[[0,1],[0,0]].
pub fn defining_rep<T: Real>(sigma: Sigma) -> (CMatrix<T>, CMatrix<T>, CMatrix<T>) {
    let zero = c(T::zero(), T::zero());
    let half = T::lit(0.5);
    let sv = sigma.value::<T>();
    let l0 = CMatrix::diagonal(&[c(-half, T::zero()), c(half, T::zero())]);
    let lp = CMatrix::from_fn(2, |i, j| if (i, j) == (1, 0) { c(T::one(), T::zero()) } else { zero });
    let lm = CMatrix::from_fn(2, |i, j| if (i, j) == (0, 1) { c(sv, T::zero()) } else { zero });
    (l0, lp, lm)
}

/// max |exp(−iG)·e^{2πimL₀} − e^{zL₊}e^{ηL₀}e^{wL₋}| in the defining representation,
/// divided by max(1, ‖e^{zL₊}‖‖e^{ηL₀}‖‖e^{wL₋}‖) so that rounding in the product
/// near a pole of z is not counted. `None` where |A| < `ILL_CONDITIONED_A`.
pub fn matrix_identity_defect<T: Real>(sigma: Sigma, params: &GeneratorParams<T>, wn: &WNState<T>) -> Option<T> {
    if wn.a.norm() < T::lit(ILL_CONDITIONED_A) {
        return None;
    }
    let (l0, lp, lm) = defining_rep::<T>(sigma);
    let i = i_unit::<T>();
    let g = &(&l0.scale(c(params.theta0, T::zero())) + &lp.scale(params.theta_plus)) + &lm.scale(params.theta_plus.conj());
    // e^{2πimL₀} = (−1)^m on the spin-½ weights ∓½.
    let center = if params.center_winding.rem_euclid(2) == 0 { T::one() } else { -T::one() };
    let lhs = g.scale(-i).expm().scale(c(center, T::zero()));
    let one = CMatrix::identity(2);
    let ez = &one + &lp.scale(wn.z);
    let eeta = CMatrix::diagonal(&[(-wn.eta / T::lit(2.0)).exp(), (wn.eta / T::lit(2.0)).exp()]);
    let ew = &one + &lm.scale(wn.w);
    let rhs = &(&ez * &eeta) * &ew;
    let scale = T::one().max(ez.max_abs() * eeta.max_abs() * ew.max_abs());
    Some((&lhs - &rhs).max_abs() / scale)
}

fn midpoint_partition<T: Real>(grid: &[T], breakpoints: &[T], steps_per_unit: T) -> Result<Vec<Vec<T>>> {
    if grid.is_empty() || grid[0] != T::zero() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid("time grid must start at 0 and increase strictly".into()));
    }
    if !(steps_per_unit > T::zero()) {
        return Err(Error::Grid("steps_per_unit must be positive".into()));
    }
    let mut out = Vec::with_capacity(grid.len().saturating_sub(1));
    for w in grid.windows(2) {
        let mut nodes = vec![w[0]];
        nodes.extend(breakpoints.iter().copied().filter(|b| *b > w[0] && *b < w[1]));
        nodes.push(w[1]);
        nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut sub = vec![w[0]];
        for seg in nodes.windows(2) {
            let n = ((seg[1] - seg[0]) * steps_per_unit).ceil().to_usize().unwrap_or(1).max(1);
            let h = (seg[1] - seg[0]) / T::from_usize_lossy(n);
            for k in 1..n {
                sub.push(seg[0] + h * T::from_usize_lossy(k));
            }
            sub.push(seg[1]);
        }
        out.push(sub);
    }
    Ok(out)
}

/// Evolves e₀ under γL₊ + γ*L₋ with midpoint-exponential steps of at most
/// 1/steps_per_unit, never straddling a breakpoint of γ.
///
/// Each step uses e^{iθN}·V e^{−iΔt|γ|Λ} V†·e^{−iθN} with γ = |γ|e^{iθ}, N the level
/// number and VΛV† = L₊ + L₋, so one eigendecomposition serves every step.
pub fn direct_evolve<T: Real, G: Coupling<T> + ?Sized>(
    rep: &MatrixRep<T>,
    gamma: &G,
    grid: &[T],
    steps_per_unit: T,
) -> Result<Vec<Vec<C<T>>>> {
    let d = rep.sector.dim;
    let (lambda, v) = (&rep.lp + &rep.lm).eigh();
    let vh = v.adjoint();
    let mut psi = vec![c(T::zero(), T::zero()); d];
    psi[0] = c(T::one(), T::zero());
    let mut out = vec![psi.clone()];
    let half = T::lit(0.5);
    for sub in midpoint_partition(grid, &gamma.breakpoints(), steps_per_unit)? {
        for w in sub.windows(2) {
            let dt = w[1] - w[0];
            let g = gamma.gamma(w[0] + half * dt)?;
            if !(g.re.is_finite() && g.im.is_finite()) {
                return Err(Error::NonFiniteDrive { t: w[0].as_f64() });
            }
            let (r, theta) = (g.norm(), g.arg());
            if r == T::zero() {
                continue;
            }
            for (n, x) in psi.iter_mut().enumerate() {
                *x = *x * C::from_polar(T::one(), -theta * T::from_usize_lossy(n));
            }
            let mut y = vh.matvec(&psi);
            for (x, l) in y.iter_mut().zip(&lambda) {
                *x = *x * C::from_polar(T::one(), -dt * r * *l);
            }
            psi = v.matvec(&y);
            for (n, x) in psi.iter_mut().enumerate() {
                *x = *x * C::from_polar(T::one(), theta * T::from_usize_lossy(n));
            }
        }
        out.push(psi.clone());
    }
    Ok(out)
}

/// Evolves e₀ under the undressed H = φ̇_α N + fL₊ + f*L₋ with midpoint steps.
/// Level probabilities agree with the interaction picture, where γ = e^{iφ_α}f.
/// The eigendecomposition is reused while f and φ̇_α are unchanged, so piecewise
/// constant drives cost one decomposition per piece.
pub fn direct_evolve_lab<T: Real>(
    rep: &MatrixRep<T>,
    coupling: &EffectiveCoupling<T>,
    grid: &[T],
    steps_per_unit: T,
) -> Result<Vec<Vec<C<T>>>> {
    let d = rep.sector.dim;
    let number = CMatrix::diagonal(&(0..d).map(|n| c(T::from_usize_lossy(n), T::zero())).collect::<Vec<_>>());
    let mut psi = vec![c(T::zero(), T::zero()); d];
    psi[0] = c(T::one(), T::zero());
    let mut out = vec![psi.clone()];
    let mut cache: Option<(C<T>, T, Vec<T>, CMatrix<T>, CMatrix<T>)> = None;
    let half = T::lit(0.5);
    for sub in midpoint_partition(grid, &coupling.breakpoints(), steps_per_unit)? {
        for w in sub.windows(2) {
            let dt = w[1] - w[0];
            let tm = w[0] + half * dt;
            let (f, rate) = (coupling.bare_value(tm)?, coupling.cartan_rate(tm)?);
            let stale = !matches!(&cache, Some((f0, r0, ..)) if *f0 == f && *r0 == rate);
            if stale {
                let h = &(&number.scale(c(rate, T::zero())) + &rep.lp.scale(f)) + &rep.lm.scale(f.conj());
                let (lambda, v) = h.eigh();
                let vh = v.adjoint();
                cache = Some((f, rate, lambda, v, vh));
            }
            let (_, _, lambda, v, vh) = cache.as_ref().expect("filled above");
            let mut y = vh.matvec(&psi);
            for (x, l) in y.iter_mut().zip(lambda) {
                *x = *x * C::from_polar(T::one(), -dt * *l);
            }
            psi = v.matvec(&y);
        }
        out.push(psi.clone());
    }
    Ok(out)
}

/// Adaptive Runge–Kutta evolution of ψ under an arbitrary dense H(t).
pub fn evolve_hermitian<T: Real>(
    hamiltonian: impl Fn(T) -> Result<CMatrix<T>>,
    psi0: &[C<T>],
    grid: &[T],
    breakpoints: &[T],
    tol: T,
) -> Result<Vec<Vec<C<T>>>> {
    let i = i_unit::<T>();
    integrate(
        |t, y, dy| {
            let hy = hamiltonian(t)?.matvec(y);
            for (d, h) in dy.iter_mut().zip(hy) {
                *d = -i * h;
            }
            Ok(())
        },
        grid[0],
        psi0,
        grid,
        breakpoints,
        OdeOptions::with_tol(tol),
        |_, _| {},
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosResult<T> {
    pub a: Vec<T>,
    /// b_1 … b_{d_K − 1}.
    pub b: Vec<T>,
    pub basis: Vec<Vec<C<T>>>,
    pub krylov_dim: usize,
}

/// Hermitian Lanczos with full reorthogonalization; stops when b < 1e−12.
pub fn hermitian_lanczos<T: Real>(h: &CMatrix<T>, v0: &[C<T>], m: usize) -> Result<LanczosResult<T>> {
    if v0.len() != h.dim() || m == 0 || m > h.dim() {
        return Err(Error::Domain("Lanczos needs 1 <= m <= dim and a matching start vector".into()));
    }
    let nrm = vnorm(v0);
    if !(nrm > T::zero()) {
        return Err(Error::Domain("zero start vector".into()));
    }
    let mut basis = vec![v0.iter().map(|x| *x / nrm).collect::<Vec<_>>()];
    let (mut a, mut b) = (Vec::new(), Vec::new());
    loop {
        let k = basis.len() - 1;
        let mut w = h.matvec(&basis[k]);
        a.push(vdot(&basis[k], &w).re);
        for _ in 0..2 {
            for q in &basis {
                let proj = vdot(q, &w);
                for (x, y) in w.iter_mut().zip(q) {
                    *x -= proj * *y;
                }
            }
        }
        if basis.len() == m {
            break;
        }
        let beta = vnorm(&w);
        if beta < T::lit(1e-12) {
            break;
        }
        b.push(beta);
        basis.push(w.into_iter().map(|x| x / beta).collect());
    }
    Ok(LanczosResult {
        krylov_dim: basis.len(),
        a,
        b,
        basis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeReport<T> {
    /// max | |φ̂_n| − |φ_n| |.
    pub max_modulus_deviation: T,
    /// max |P̂_n − P_n|.
    pub max_probability_deviation: T,
}

/// φ̂_n = e^{−inφ_α}φ_n in the naive moving basis.
pub fn naive_amplitudes<T: Real>(kry: &KrylovWavefunction<T>, phi: T) -> Vec<C<T>> {
    kry.amplitudes
        .iter()
        .enumerate()
        .map(|(n, a)| *a * C::from_polar(T::one(), -phi * T::from_usize_lossy(n)))
        .collect()
}

pub fn gauge_check<T: Real>(series: &[KrylovWavefunction<T>], phi: impl Fn(T) -> Result<T>) -> Result<GaugeReport<T>> {
    let mut rep = GaugeReport {
        max_modulus_deviation: T::zero(),
        max_probability_deviation: T::zero(),
    };
    for w in series {
        let hat = naive_amplitudes(w, phi(w.t)?);
        for (h, (a, p)) in hat.iter().zip(w.amplitudes.iter().zip(&w.probabilities)) {
            rep.max_modulus_deviation = rep.max_modulus_deviation.max((h.norm() - a.norm()).abs());
            rep.max_probability_deviation = rep.max_probability_deviation.max((h.norm_sqr() - *p).abs());
        }
    }
    Ok(rep)
}

/// Diagonal of the naive-basis generator at level n from centered differences:
/// (i∂ₜφ̂_n − f b_n φ̂_{n−1} − f* b_{n+1} φ̂_{n+1}) / φ̂_n with f = e^{−iφ_α}γ.
/// `wfs` and `phis` are taken at t − h, t, t + h.
pub fn naive_gauge_diagonal<T: Real>(
    wfs: [&KrylovWavefunction<T>; 3],
    phis: [T; 3],
    gamma: C<T>,
    h: T,
    n: usize,
) -> Result<C<T>> {
    let sector = wfs[1].sector;
    let hat: Vec<Vec<C<T>>> = wfs.iter().zip(phis).map(|(w, p)| naive_amplitudes(w, p)).collect();
    let d = hat[1].len();
    if n >= d {
        return Err(Error::Domain("level outside the chain".into()));
    }
    let f = gamma * C::from_polar(T::one(), -phis[1]);
    let deriv = (hat[2][n] - hat[0][n]) / (h + h);
    let mut rhs = i_unit::<T>() * deriv;
    if n > 0 {
        rhs -= f * lanczos_b(&sector, n)? * hat[1][n - 1];
    }
    if n + 1 < d {
        rhs -= f.conj() * lanczos_b(&sector, n + 1)? * hat[1][n + 1];
    }
    Ok(rhs / hat[1][n])
}
