//! Discrete-time LTI systems and their interconnections.
//!
//! A [`StateSpace`] is the quadruple `(A, B, C, D)` together with its sample
//! period. Systems with zero states are allowed; they are pure feedthrough
//! `y = D u`, which is how static controllers are expressed.
//!
//! The two interconnections follow the usual conventions:
//!
//! * [`series_interconnect`] feeds the controller output, plus an exogenous
//!   feedforward `f`, into the plant. Input `[u_c; f]`, state `[x_c; x_p]`.
//! * [`feedback_interconnect`] closes the loop with `u_c = r - y_p`.
//!   Input `[r; f]`, state `[x_c; x_p]`, output `y_p`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, blocks, serde_matrix};

/// Reciprocal condition number below which `1 + Dp·Dc` counts as singular.
pub const WELL_POSED_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    dt: f64,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return dim_err(format!("A must be square, got {}x{}", a.nrows(), a.ncols()));
        }
        if b.nrows() != n {
            return dim_err(format!("B has {} rows, expected {n}", b.nrows()));
        }
        if c.ncols() != n {
            return dim_err(format!("C has {} columns, expected {n}", c.ncols()));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return dim_err(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            ));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("sample period must be positive, got {dt}")));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if !linalg::all_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b, c, d, dt })
    }

    /// A stateless system `y = D u`.
    pub fn static_gain(d: DMatrix<f64>, dt: f64) -> Result<Self> {
        let (ny, nu) = d.shape();
        Self::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, nu),
            DMatrix::zeros(ny, 0),
            d,
            dt,
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Serialize, Deserialize)]
struct RawStateSpace {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    dt: f64,
}

impl Serialize for StateSpace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawStateSpace {
            a: serde_matrix::to_rows(&self.a),
            b: serde_matrix::to_rows(&self.b),
            c: serde_matrix::to_rows(&self.c),
            d: serde_matrix::to_rows(&self.d),
            dt: self.dt,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateSpace {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawStateSpace::deserialize(de)?;
        let conv = |rows: &[Vec<f64>]| serde_matrix::from_rows(rows).map_err(D::Error::custom);
        let (a, mut b, mut c, d) = (conv(&raw.a)?, conv(&raw.b)?, conv(&raw.c)?, conv(&raw.d)?);
        // Zero-row matrices lose their width in nested-array form; recover it from D.
        let n = a.nrows();
        if b.nrows() == 0 {
            b = DMatrix::zeros(n, d.ncols());
        }
        if c.nrows() == 0 || (n == 0 && c.ncols() == 0) {
            c = DMatrix::zeros(d.nrows().max(c.nrows()), n);
        }
        let d = if d.nrows() == 0 {
            DMatrix::zeros(c.nrows(), b.ncols())
        } else {
            d
        };
        StateSpace::new(a, b, c, d, raw.dt).map_err(D::Error::custom)
    }
}

/// Eigenvalues of a square matrix with the spectral radius.
///
/// Ordered by descending modulus, ties broken by ascending phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub spectral_radius: f64,
}

pub fn spectrum(a: &DMatrix<f64>) -> Result<Spectrum> {
    if a.nrows() != a.ncols() {
        return dim_err(format!("spectrum needs a square matrix, got {}x{}", a.nrows(), a.ncols()));
    }
    if !linalg::all_finite(a) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    if a.nrows() == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            spectral_radius: 0.0,
        });
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let mut eigenvalues: Vec<Complex64> = schur.complex_eigenvalues().iter().cloned().collect();
    eigenvalues.sort_by(|x, y| {
        y.norm()
            .total_cmp(&x.norm())
            .then_with(|| x.arg().total_cmp(&y.arg()))
    });
    let spectral_radius = eigenvalues.first().map(|l| l.norm()).unwrap_or(0.0);
    Ok(Spectrum {
        eigenvalues,
        spectral_radius,
    })
}

/// Largest distance between paired eigenvalues of two spectra of equal size.
///
/// Pairs are formed greedily: each eigenvalue of `a`, in order, takes the
/// nearest still-unpaired eigenvalue of `b`.
pub fn eigenvalue_displacement(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return dim_err(format!("spectra have {} and {} eigenvalues", a.len(), b.len()));
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal lengths leave a partner");
        used[j] = true;
        worst = worst.max(d);
    }
    Ok(worst)
}

fn check_dt(x: &StateSpace, y: &StateSpace) -> Result<()> {
    if (x.dt - y.dt).abs() > 1e-12 * x.dt.abs().max(y.dt.abs()) {
        return Err(Error::SamplePeriod(x.dt, y.dt));
    }
    Ok(())
}

/// Controller followed by plant, with feedforward added at the plant input.
pub fn series_interconnect(controller: &StateSpace, plant: &StateSpace) -> Result<StateSpace> {
    if controller.n_outputs() != plant.n_inputs() {
        return dim_err(format!(
            "controller has {} outputs but plant has {} inputs",
            controller.n_outputs(),
            plant.n_inputs()
        ));
    }
    check_dt(controller, plant)?;
    let (ac, bc, cc, dc) = (&controller.a, &controller.b, &controller.c, &controller.d);
    let (ap, bp, cp, dp) = (&plant.a, &plant.b, &plant.c, &plant.d);
    let nc = controller.n_states();
    let np = plant.n_states();
    let nu_p = plant.n_inputs();
    let zero_cp = DMatrix::zeros(nc, np);
    let zero_cf = DMatrix::zeros(nc, nu_p);

    let a = blocks(&[&[ac, &zero_cp], &[&(bp * cc), ap]])?;
    let b = blocks(&[&[bc, &zero_cf], &[&(bp * dc), bp]])?;
    let c = blocks(&[&[&(dp * cc), cp]])?;
    let d = blocks(&[&[&(dp * dc), dp]])?;
    StateSpace::new(a, b, c, d, controller.dt)
}

/// Result of the well-posedness test for a feedback loop.
#[derive(Debug, Clone)]
pub struct WellPosedness {
    pub well_posed: bool,
    /// Reciprocal 2-norm condition number of `Q = 1 + Dp·Dc`.
    pub rcond: f64,
    pub q: DMatrix<f64>,
}

pub fn is_well_posed(controller: &StateSpace, plant: &StateSpace) -> Result<WellPosedness> {
    if controller.n_outputs() != plant.n_inputs() || controller.n_inputs() != plant.n_outputs() {
        return dim_err(format!(
            "feedback loop needs controller {}→{} against plant {}→{}",
            plant.n_outputs(),
            plant.n_inputs(),
            plant.n_inputs(),
            plant.n_outputs()
        ));
    }
    let ny = plant.n_outputs();
    let q = DMatrix::identity(ny, ny) + &plant.d * &controller.d;
    let rcond = linalg::rcond(&q);
    Ok(WellPosedness {
        well_posed: rcond >= WELL_POSED_RCOND,
        rcond,
        q,
    })
}

/// Negative feedback loop `u_c = r - y_p` with feedforward `f` at the plant input.
///
/// The general form with `Q = 1 + Dp·Dc` is computed; for `Dp = 0` it reduces
/// exactly to `A = [[Ac, -Bc Cp], [Bp Cc, Ap - Bp Dc Cp]]`,
/// `B = [[Bc, 0], [Bp Dc, Bp]]`, `C = [0, Cp]`, `D = 0`.
pub fn feedback_interconnect(controller: &StateSpace, plant: &StateSpace) -> Result<StateSpace> {
    let wp = is_well_posed(controller, plant)?;
    if !wp.well_posed {
        return Err(Error::IllPosed { rcond: wp.rcond });
    }
    let series = series_interconnect(controller, plant)?;
    let ny = plant.n_outputs();
    let nu = plant.n_inputs();
    let lu = wp.q.lu();
    let solve = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        if ny == 0 {
            return Ok(m.clone());
        }
        lu.solve(m).ok_or(Error::IllPosed { rcond: wp.rcond })
    };
    let qinv_c = solve(series.c())?;
    let qinv_d = solve(series.d())?;
    // The loop only feeds y_p back into the controller-input block of [u_c; f].
    let mut e = DMatrix::zeros(ny + nu, ny);
    e.view_mut((0, 0), (ny, ny)).fill_with_identity();
    let a = series.a() - series.b() * (&e * &qinv_c);
    let b = series.b() * (DMatrix::identity(ny + nu, ny + nu) - &e * &qinv_d);
    StateSpace::new(a, b, qinv_c, qinv_d, controller.dt)
}

/// States `x_0..x_K` and outputs `y_0..y_{K-1}` of a pure rollout.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

/// Roll out `x_{k+1} = A x_k + B u_k`, `y_k = C x_k + D u_k`.
///
/// Divergence is not an error: entries simply become huge or non-finite.
pub fn simulate(sys: &StateSpace, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Result<Trajectory> {
    if x0.len() != sys.n_states() {
        return dim_err(format!("x0 has length {}, expected {}", x0.len(), sys.n_states()));
    }
    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut x = x0.clone();
    for (k, u) in inputs.iter().enumerate() {
        if u.len() != sys.n_inputs() {
            return dim_err(format!("input {k} has length {}, expected {}", u.len(), sys.n_inputs()));
        }
        outputs.push(&sys.c * &x + &sys.d * u);
        let next = &sys.a * &x + &sys.b * u;
        states.push(std::mem::replace(&mut x, next));
    }
    states.push(x);
    Ok(Trajectory { states, outputs })
}

/// Zero-order-hold discretization via the augmented matrix exponential
/// `exp([[Ac, Bc], [0, 0]] dt) = [[Ad, Bd], [0, I]]`.
pub fn zoh_discretize(
    ac: &DMatrix<f64>,
    bc: &DMatrix<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = ac.nrows();
    if ac.ncols() != n || bc.nrows() != n {
        return dim_err(format!(
            "ZOH needs square Ac and matching Bc, got {}x{} and {}x{}",
            ac.nrows(),
            ac.ncols(),
            bc.nrows(),
            bc.ncols()
        ));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !linalg::all_finite(ac) || !linalg::all_finite(bc) {
        return Err(Error::NonFinite("continuous-time matrices"));
    }
    let m = bc.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(ac * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(bc * dt));
    let e = aug.exp();
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    ))
}
