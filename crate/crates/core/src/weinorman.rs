//! Wei–Norman factorization U = e^{zL₊} e^{ηL₀} e^{wL₋}.
//!
//! Trajectories are integrated in the 2×2 defining representation, where
//! L₀ = diag(−½, ½), L₊ = [[0,0],[1,0]], L₋ = σ[[0,1],[0,0]]. There the
//! evolution matrix is M = [[A, σwA],[B, ·]] with A = e^{−η/2} and B = zA, so the
//! pair (A, B) is finite through the poles of z that occur for σ = +1.

use crate::algebra::{Coupling, SectorSignature, Sigma};
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::scalar::{c, i_unit, unwrap_angle, Real, C};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WNState<T> {
    pub t: T,
    pub z: C<T>,
    /// −2 Log A with the imaginary part continued along the trajectory.
    pub eta: C<T>,
    pub w: C<T>,
    /// A = e^{−η/2}.
    pub a: C<T>,
    /// B = z e^{−η/2}.
    pub b: C<T>,
}

impl<T: Real> WNState<T> {
    pub fn identity(t: T) -> Self {
        let zero = c(T::zero(), T::zero());
        WNState {
            t,
            z: zero,
            eta: zero,
            w: zero,
            a: c(T::one(), T::zero()),
            b: zero,
        }
    }

    /// Builds the state from A, B and wA, continuing arg A from `prev_arg`.
    pub fn from_entries(t: T, a: C<T>, b: C<T>, wa: C<T>, prev_arg: T) -> Self {
        let arg = unwrap_angle(prev_arg, a.arg());
        let two = T::lit(2.0);
        WNState {
            t,
            z: b / a,
            eta: c(-two * a.norm().ln(), -two * arg),
            w: wa / a,
            a,
            b,
        }
    }

    /// Continuous arg A carried by η.
    pub fn arg_a(&self) -> T {
        -self.eta.im / T::lit(2.0)
    }

    pub fn norm_identity(&self, sigma: Sigma) -> T {
        self.a.norm_sqr() + sigma.value::<T>() * self.b.norm_sqr()
    }

    pub fn unitarity_defect(&self, sigma: Sigma) -> T {
        (self.norm_identity(sigma) - T::one()).abs()
    }

    /// True where A = 0 in floating point (z and η are infinite there).
    pub fn at_pole(&self) -> bool {
        self.a.norm() == T::zero()
    }

    pub fn projective(&self, sigma: Sigma, gamma: C<T>) -> ProjectiveState<T> {
        ProjectiveState {
            t: self.t,
            u: self.a,
            u_dot: -i_unit::<T>() * gamma.conj() * self.b * sigma.value::<T>(),
        }
    }
}

/// Linearizing pair (u, u̇) with u = A; z = −u̇/(iσγ*u) where u ≠ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectiveState<T> {
    pub t: T,
    pub u: C<T>,
    pub u_dot: C<T>,
}

impl<T: Real> ProjectiveState<T> {
    pub fn z_with(&self, sigma: Sigma, gamma: C<T>) -> Option<C<T>> {
        let den = i_unit::<T>() * gamma.conj() * self.u * sigma.value::<T>();
        if den.norm() == T::zero() {
            None
        } else {
            Some(-self.u_dot / den)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HWDisplacement<T> {
    pub t: T,
    pub alpha: C<T>,
    pub phi: T,
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    match grid.first() {
        None => return Err(Error::Grid("empty time grid".into())),
        Some(t0) if *t0 != T::zero() => return Err(Error::Grid("time grid must start at 0".into())),
        _ => {}
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Grid("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn ladder_only<T: Real>(sector: &SectorSignature<T>) -> Result<T> {
    match sector.sigma {
        Sigma::Heisenberg => Err(Error::Domain(
            "Wei–Norman ladder integration needs sigma = +1 or -1".into(),
        )),
        s => Ok(s.value()),
    }
}

/// Integrates the defining-representation evolution dM/dt = −iHM with
/// H = [[0, σγ*],[γ, 0]] and reads off (z, η, w) at each grid time.
pub fn integrate_wn<T: Real, G: Coupling<T> + ?Sized>(
    sector: &SectorSignature<T>,
    gamma: &G,
    grid: &[T],
    tol: T,
) -> Result<Vec<WNState<T>>> {
    let sigma = ladder_only(sector)?;
    check_grid(grid)?;
    if !(tol > T::zero()) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let one = c(T::one(), T::zero());
    let zero = c(T::zero(), T::zero());
    let y0 = [one, zero, zero, one];
    let mut states = vec![WNState::identity(grid[0])];
    let mut arg = T::zero();
    let mut next = 1;
    let mut failure: Option<Error> = None;
    integrate(
        |t, y, dy| {
            let g = gamma.gamma(t)?;
            if !(g.re.is_finite() && g.im.is_finite()) {
                return Err(Error::NonFiniteDrive { t: t.as_f64() });
            }
            let mi = -i_unit::<T>();
            let sg = g.conj() * sigma;
            dy[0] = mi * sg * y[2];
            dy[1] = mi * sg * y[3];
            dy[2] = mi * g * y[0];
            dy[3] = mi * g * y[1];
            Ok(())
        },
        T::zero(),
        &y0,
        grid,
        &gamma.breakpoints(),
        OdeOptions::with_tol(tol),
        |t, y| {
            arg = unwrap_angle(arg, y[0].arg());
            if next < grid.len() && t == grid[next] {
                let st = WNState::from_entries(t, y[0], y[2], y[1] * sigma, arg);
                if sector.sigma == Sigma::NonCompact
                    && failure.is_none()
                    && st.z.norm() >= T::one() - T::lit(1e-12)
                {
                    failure = Some(Error::Domain(format!(
                        "|z| reached 1 at t = {t} on a non-compact trajectory"
                    )));
                }
                states.push(st);
                next += 1;
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    debug_assert_eq!(states.len(), grid.len());
    Ok(states)
}

/// Riccati-chart integration of (z, η, w); finite only away from poles of z.
pub fn integrate_riccati<T: Real, G: Coupling<T> + ?Sized>(
    sector: &SectorSignature<T>,
    gamma: &G,
    grid: &[T],
    tol: T,
) -> Result<Vec<(C<T>, C<T>, C<T>)>> {
    let sigma = ladder_only(sector)?;
    check_grid(grid)?;
    let zero = c(T::zero(), T::zero());
    let out = integrate(
        |t, y, dy| {
            let g = gamma.gamma(t)?;
            let i = i_unit::<T>();
            dy[0] = -i * g + i * g.conj() * y[0] * y[0] * sigma;
            dy[1] = i * g.conj() * y[0] * (sigma + sigma);
            dy[2] = -i * g.conj() * y[1].exp();
            Ok(())
        },
        T::zero(),
        &[zero, zero, zero],
        grid,
        &gamma.breakpoints(),
        OdeOptions::with_tol(tol),
        |_, _| {},
    )?;
    Ok(out.into_iter().map(|y| (y[0], y[1], y[2])).collect())
}

/// sin χ / χ with the small-χ series.
pub fn sinc<T: Real>(chi: C<T>) -> C<T> {
    if chi.norm() < T::lit(1e-6) {
        let x2 = chi * chi;
        c(T::one(), T::zero()) - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        chi.sin() / chi
    }
}

/// Closed-form state for γ(t) = g·e^{iνt}: U = e^{iνtL₀} e^{−it(νL₀ + gL₊ + g*L₋)}.
pub fn uniform_rotation<T: Real>(sigma: Sigma, g: C<T>, nu: T, t: T) -> WNState<T> {
    let s = sigma.value::<T>();
    let two = T::lit(2.0);
    let i = i_unit::<T>();
    let half_theta0 = nu * t / two;
    let chi2 = s * g.norm_sqr() * t * t + half_theta0 * half_theta0;
    let chi = c(chi2, T::zero()).sqrt();
    let sc = sinc(chi);
    let a_rot = chi.cos() + i * sc * half_theta0;
    let b_rot = -i * sc * g * t;
    let wa_rot = -i * sc * g.conj() * t;

    // Continuous arg of A' = cos χ + i(νt/2)(sin χ/χ); for real χ it stays
    // within π of ±χ, for imaginary χ Re A' = cosh|χ| > 0.
    let principal = a_rot.arg();
    let arg_rot = if chi2 > T::zero() {
        let reference = if half_theta0 >= T::zero() { chi.re } else { -chi.re };
        unwrap_angle(reference, principal)
    } else {
        principal
    };

    let a = C::from_polar(T::one(), -half_theta0) * a_rot;
    let b = C::from_polar(T::one(), half_theta0) * b_rot;
    WNState {
        t,
        z: b / a,
        eta: c(-two * a_rot.norm().ln(), nu * t - two * arg_rot),
        w: wa_rot / a_rot,
        a,
        b,
    }
}

/// Constant real coupling α: z = −i tan αt (σ = +1) or −i tanh αt (σ = −1).
pub fn closed_form_constant<T: Real>(sigma: Sigma, alpha: T, t: T) -> WNState<T> {
    uniform_rotation(sigma, c(alpha, T::zero()), T::zero(), t)
}

/// Harmonic-oscillator frequency quench ω₀ → ω₁ on [0, τ), back to ω₀ afterwards,
/// in the κ = 1/4 su(1,1) sector. The state freezes for t > τ.
pub fn closed_form_quench<T: Real>(omega0: T, omega1: T, tau: T, t: T) -> WNState<T> {
    let four = T::lit(4.0);
    let f0 = (omega1 * omega1 - omega0 * omega0) / (four * omega0);
    let g0 = (omega1 * omega1 + omega0 * omega0) / (T::lit(2.0) * omega0);
    let mut st = uniform_rotation(
        Sigma::NonCompact,
        c(f0 + f0, T::zero()),
        g0 + g0,
        t.min(tau),
    );
    st.t = t;
    st
}

/// Spin in a field tilted by θ₀ rotating at Ω (unit field strength):
/// γ(t) = (sinθ₀/2) e^{−iδt}, δ = Ω − cosθ₀.
pub fn closed_form_rotating<T: Real>(theta0: T, omega: T, t: T) -> WNState<T> {
    let delta = omega - theta0.cos();
    uniform_rotation(
        Sigma::Compact,
        c(theta0.sin() / T::lit(2.0), T::zero()),
        -delta,
        t,
    )
}

/// α̇ = γ, Φ̇ = Im[γ ᾱ].
pub fn hw_displacement<T: Real, G: Coupling<T> + ?Sized>(
    gamma: &G,
    grid: &[T],
    tol: T,
) -> Result<Vec<HWDisplacement<T>>> {
    check_grid(grid)?;
    let zero = c(T::zero(), T::zero());
    let out = integrate(
        |t, y, dy| {
            let g = gamma.gamma(t)?;
            if !(g.re.is_finite() && g.im.is_finite()) {
                return Err(Error::NonFiniteDrive { t: t.as_f64() });
            }
            dy[0] = g;
            dy[1] = c((g * y[0].conj()).im, T::zero());
            Ok(())
        },
        T::zero(),
        &[zero, zero],
        grid,
        &gamma.breakpoints(),
        OdeOptions::with_tol(tol),
        |_, _| {},
    )?;
    Ok(grid
        .iter()
        .zip(out)
        .map(|(t, y)| HWDisplacement {
            t: *t,
            alpha: y[0],
            phi: y[1].re,
        })
        .collect())
}

/// α(t) for the oscillator dragged by x₀ cos ωt.
pub fn dragged_alpha<T: Real>(x0: T, omega: T, m: T, t: T) -> C<T> {
    let two = T::lit(2.0);
    let amp = (m * omega.powi(3) / two).sqrt() * x0;
    let e = C::from_polar(T::one(), two * omega * t) - c(T::one(), T::zero());
    let frac = e / (i_unit::<T>() * (T::lit(4.0) * omega));
    -(frac + c(t / two, T::zero())) * amp
}

/// K(t) = (mω³x₀²/8)[t² + (t/ω) sin 2ωt + sin²ωt/ω²].
pub fn dragged_complexity<T: Real>(x0: T, omega: T, m: T, t: T) -> T {
    let s = (omega * t).sin();
    m * omega.powi(3) * x0 * x0 / T::lit(8.0)
        * (t * t + t / omega * (T::lit(2.0) * omega * t).sin() + s * s / (omega * omega))
}
