//! Continuous-time LTI plants under sample-and-hold state feedback, their
//! held-input transition matrices, and the quadratic forms used for triggering.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PD_TOL: f64 = 1e-12;

/// `dx/dt = A x + B K x̂` with `x̂` held between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    k: DMatrix<f64>,
}

impl Plant {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, k: DMatrix<f64>) -> Result<Self> {
        let nx = a.nrows();
        if nx == 0 || a.ncols() != nx {
            return Err(Error::InvalidSpec(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != nx {
            return Err(Error::InvalidSpec(format!(
                "B must have {nx} rows, got {}",
                b.nrows()
            )));
        }
        let nu = b.ncols();
        if k.nrows() != nu || k.ncols() != nx {
            return Err(Error::InvalidSpec(format!(
                "K must be {nu}x{nx}, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        for (name, m) in [("A", &a), ("B", &b), ("K", &k)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self { a, b, k })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    /// Closed-loop matrix `A + B K` (continuous feedback, no hold).
    pub fn closed_loop(&self) -> DMatrix<f64> {
        &self.a + &self.b * &self.k
    }
}

/// Discretisation of the plant over one hold interval.
#[derive(Debug, Clone)]
pub struct HoldMatrices {
    /// `e^{A t}`
    pub ad: DMatrix<f64>,
    /// `∫_0^t e^{A s} ds · B`
    pub bd: DMatrix<f64>,
    /// `Ad + Bd K`
    pub m: DMatrix<f64>,
}

/// Computes `e^{At}` and `∫_0^t e^{As} ds B` from the exponential of the
/// augmented matrix `[[A, B], [0, 0]] t`.
pub fn hold_matrices(plant: &Plant, tau: f64) -> Result<HoldMatrices> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidSpec(format!(
            "hold time must be finite and non-negative, got {tau}"
        )));
    }
    let (nx, nu) = (plant.nx(), plant.nu());
    let mut z = DMatrix::zeros(nx + nu, nx + nu);
    z.view_mut((0, 0), (nx, nx)).copy_from(&(plant.a() * tau));
    z.view_mut((0, nx), (nx, nu)).copy_from(&(plant.b() * tau));
    let e = z.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow(format!(
            "exp([[A, B], [0, 0]] * {tau}) is not finite"
        )));
    }
    let ad = e.view((0, 0), (nx, nx)).into_owned();
    let bd = e.view((0, nx), (nx, nu)).into_owned();
    let m = &ad + &bd * plant.k();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow(format!(
            "held-input transition matrix at t = {tau} is not finite"
        )));
    }
    Ok(HoldMatrices { ad, bd, m })
}

/// State transition matrix under the held control input, `M(tau)`.
pub fn hold_transition(plant: &Plant, tau: f64) -> Result<DMatrix<f64>> {
    hold_matrices(plant, tau).map(|h| h.m)
}

/// A symmetric matrix interpreted as the quadratic form `xᵀ N x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    n: DMatrix<f64>,
}

impl QuadForm {
    /// Takes the symmetric part of `n`.
    pub fn new(n: DMatrix<f64>) -> Result<Self> {
        if n.nrows() != n.ncols() {
            return Err(Error::InvalidSpec(format!(
                "quadratic form must be square, got {}x{}",
                n.nrows(),
                n.ncols()
            )));
        }
        Ok(Self { n: symmetrize(&n) })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.n
    }

    pub fn dim(&self) -> usize {
        self.n.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval_form(self.n.as_slice(), x)
    }
}

/// `xᵀ N x` for a column-major square `n` (symmetric, so layout does not matter).
pub(crate) fn eval_form(n: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for (j, xj) in x.iter().enumerate() {
        let col = &n[j * d..(j + 1) * d];
        let mut s = 0.0;
        for (nij, xi) in col.iter().zip(x) {
            s += nij * xi;
        }
        acc += s * xj;
    }
    acc
}

/// Lyapunov data behind a predictive triggering condition.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovData {
    pub p: DMatrix<f64>,
    pub q_lyap: DMatrix<f64>,
    pub rho: f64,
}

/// Quadratic triggering rule checked every `h` time units, with at most
/// `kmax` checks between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerSpec {
    q: DMatrix<f64>,
    h: f64,
    kmax: u32,
    lyapunov: Option<LyapunovData>,
}

impl TriggerSpec {
    /// A user-supplied triggering matrix over `[x; x̂]`.
    pub fn quadratic(q: DMatrix<f64>, h: f64, kmax: u32) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::InvalidSpec(format!("h must be positive, got {h}")));
        }
        if kmax < 1 {
            return Err(Error::InvalidSpec("kmax must be at least 1".into()));
        }
        if q.nrows() != q.ncols() || !q.nrows().is_multiple_of(2) || q.nrows() == 0 {
            return Err(Error::InvalidSpec(format!(
                "Q must be square of even size 2n_x, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("Q has non-finite entries".into()));
        }
        Ok(Self {
            q: symmetrize(&q),
            h,
            kmax,
            lyapunov: None,
        })
    }

    /// Predictive Lyapunov-derivative triggering; see [`build_predictive_lyapunov_q`].
    pub fn predictive_lyapunov(
        plant: &Plant,
        p: DMatrix<f64>,
        q_lyap: DMatrix<f64>,
        rho: f64,
        h: f64,
        kmax: u32,
    ) -> Result<Self> {
        let q = build_predictive_lyapunov_q(plant, &p, &q_lyap, rho, h)?;
        let mut spec = Self::quadratic(q, h, kmax)?;
        spec.lyapunov = Some(LyapunovData {
            p: symmetrize(&p),
            q_lyap: symmetrize(&q_lyap),
            rho,
        });
        Ok(spec)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kmax(&self) -> u32 {
        self.kmax
    }

    pub fn lyapunov(&self) -> Option<&LyapunovData> {
        self.lyapunov.as_ref()
    }

    /// Maximum inter-sample time `h * kmax`.
    pub fn tau_max(&self) -> f64 {
        self.h * f64::from(self.kmax)
    }

    /// `[x; x̂]ᵀ Q [x; x̂] > 0`, the raw triggering inequality.
    pub fn violated(&self, x: &[f64], x_hat: &[f64]) -> bool {
        let w: Vec<f64> = x.iter().chain(x_hat).copied().collect();
        eval_form(self.q.as_slice(), &w) > 0.0
    }

    fn check_plant(&self, plant: &Plant) -> Result<()> {
        if self.q.nrows() != 2 * plant.nx() {
            return Err(Error::InvalidSpec(format!(
                "Q is {}x{} but the plant has n_x = {}",
                self.q.nrows(),
                self.q.ncols(),
                plant.nx()
            )));
        }
        Ok(())
    }
}

/// `N(hk) = [M(hk); I]ᵀ Q [M(hk); I]`: positive exactly when the trigger
/// fires at check `k` for a sample taken at `x`.
pub fn step_trigger_form(plant: &Plant, trig: &TriggerSpec, k: u32) -> Result<QuadForm> {
    trig.check_plant(plant)?;
    if k < 1 || k > trig.kmax() {
        return Err(Error::InvalidSpec(format!(
            "check index {k} outside 1..={}",
            trig.kmax()
        )));
    }
    let m = hold_transition(plant, trig.h() * f64::from(k))?;
    Ok(lift_form(trig.q(), &m))
}

pub(crate) fn lift_form(q: &DMatrix<f64>, m: &DMatrix<f64>) -> QuadForm {
    let nx = m.nrows();
    let mut s = DMatrix::zeros(2 * nx, nx);
    s.view_mut((0, 0), (nx, nx)).copy_from(m);
    s.view_mut((nx, 0), (nx, nx)).fill_with_identity();
    QuadForm {
        n: symmetrize(&(s.transpose() * q * s)),
    }
}

/// Builds `Q` over `[x; x̂]` for the condition
/// `V̇(ζ, x̂) > -ρ ζᵀ Q_lyap ζ`, where `ζ = Ad(h) x + Bd(h) K x̂` is the state
/// predicted one check ahead and `V̇(ζ, x̂) = ζᵀ(AᵀP + PA)ζ + 2 ζᵀ P B K x̂` is
/// the Lyapunov derivative under the held input.
pub fn build_predictive_lyapunov_q(
    plant: &Plant,
    p: &DMatrix<f64>,
    q_lyap: &DMatrix<f64>,
    rho: f64,
    h: f64,
) -> Result<DMatrix<f64>> {
    let nx = plant.nx();
    for (name, m) in [("P", p), ("Q_lyap", q_lyap)] {
        if m.nrows() != nx || m.ncols() != nx {
            return Err(Error::InvalidSpec(format!(
                "{name} must be {nx}x{nx}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !is_positive_definite(m) {
            return Err(Error::InvalidSpec(format!("{name} is not positive definite")));
        }
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidSpec(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidSpec(format!("h must be positive, got {h}")));
    }
    let p = symmetrize(p);
    let q_lyap = symmetrize(q_lyap);
    let hold = hold_matrices(plant, h)?;

    // ζ = Z w and x̂ = E w for w = [x; x̂].
    let mut z = DMatrix::zeros(nx, 2 * nx);
    z.view_mut((0, 0), (nx, nx)).copy_from(&hold.ad);
    z.view_mut((0, nx), (nx, nx))
        .copy_from(&(&hold.bd * plant.k()));
    let mut e = DMatrix::zeros(nx, 2 * nx);
    e.view_mut((0, nx), (nx, nx)).fill_with_identity();

    let a = plant.a();
    let drift = a.transpose() * &p + &p * a + &q_lyap * rho;
    let cross = z.transpose() * &p * plant.b() * plant.k() * &e;
    let q = z.transpose() * drift * &z + &cross + cross.transpose();
    Ok(symmetrize(&q))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.nrows() == m.ncols() && (m - m.transpose()).amax() <= SYMMETRY_TOL * m.amax().max(1.0)
}

fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let eig = symmetrize(m).symmetric_eigenvalues();
    eig.iter().all(|&l| l > PD_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_plant() -> Plant {
        Plant::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 3.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -4.0]),
        )
        .unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let m = hold_transition(&example_plant(), 0.0).unwrap();
        assert!((m - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn static_plant_is_identity() {
        let plant = Plant::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::from_row_slice(1, 2, &[3.0, -7.0]),
        )
        .unwrap();
        let m = hold_transition(&plant, 1.0).unwrap();
        assert!((m - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let err = Plant::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
        );
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
        let err = Plant::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1), DMatrix::zeros(2, 2));
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let plant = Plant::new(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!(matches!(
            hold_transition(&plant, 1e4),
            Err(Error::NumericalOverflow(_))
        ));
    }

    #[test]
    fn zero_trigger_gives_zero_forms() {
        let plant = example_plant();
        let trig = TriggerSpec::quadratic(DMatrix::zeros(4, 4), 0.1, 5).unwrap();
        for k in 1..=5 {
            let n = step_trigger_form(&plant, &trig, k).unwrap();
            assert_eq!(n.matrix().amax(), 0.0);
        }
    }

    #[test]
    fn identity_transition_cancels_block_trigger() {
        let plant = Plant::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
        )
        .unwrap();
        let mut q = DMatrix::identity(4, 4);
        q.view_mut((2, 2), (2, 2)).fill_with_identity();
        q.view_mut((2, 2), (2, 2)).scale_mut(-1.0);
        let trig = TriggerSpec::quadratic(q, 0.3, 3).unwrap();
        let n = step_trigger_form(&plant, &trig, 2).unwrap();
        assert!(n.matrix().amax() < 1e-15);
    }

    #[test]
    fn trigger_ingestion_symmetrizes() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let trig = TriggerSpec::quadratic(q, 0.1, 2).unwrap();
        assert_eq!(trig.q()[(0, 1)], 1.0);
        assert_eq!(trig.q()[(1, 0)], 1.0);
    }

    #[test]
    fn trigger_validation() {
        assert!(TriggerSpec::quadratic(DMatrix::zeros(4, 4), 0.0, 3).is_err());
        assert!(TriggerSpec::quadratic(DMatrix::zeros(4, 4), 0.1, 0).is_err());
        assert!(TriggerSpec::quadratic(DMatrix::zeros(3, 3), 0.1, 2).is_err());
        let plant = example_plant();
        let trig = TriggerSpec::quadratic(DMatrix::zeros(6, 6), 0.1, 2).unwrap();
        assert!(step_trigger_form(&plant, &trig, 1).is_err());
        let trig = TriggerSpec::quadratic(DMatrix::zeros(4, 4), 0.1, 2).unwrap();
        assert!(step_trigger_form(&plant, &trig, 3).is_err());
        assert!(step_trigger_form(&plant, &trig, 0).is_err());
    }

    #[test]
    fn predictive_rejects_indefinite_lyapunov_data() {
        let plant = example_plant();
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let q = DMatrix::identity(2, 2);
        assert!(matches!(
            build_predictive_lyapunov_q(&plant, &p, &q, 0.5, 0.1),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            build_predictive_lyapunov_q(&plant, &q, &p, 0.5, 0.1),
            Err(Error::InvalidSpec(_))
        ));
        assert!(build_predictive_lyapunov_q(&plant, &q, &q, 1.0, 0.1).is_err());
        assert!(build_predictive_lyapunov_q(&plant, &q, &q, 0.0, 0.1).is_err());
    }

    #[test]
    fn static_plant_predictive_form_is_rho_q_lyap_block() {
        // V̇ ≡ 0, so the condition reads 0 > -ρ|ζ|² and fires for every x ≠ 0.
        let plant = Plant::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        )
        .unwrap();
        let i2 = DMatrix::identity(2, 2);
        let q = build_predictive_lyapunov_q(&plant, &i2, &i2, 0.5, 0.37).unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        expected.view_mut((0, 0), (2, 2)).copy_from(&(&i2 * 0.5));
        assert!((q - expected).amax() < 1e-14);
    }
}
