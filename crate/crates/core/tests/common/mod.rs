#![allow(dead_code)]

use clkoop::closed_loop::ControllerModel;
use clkoop::lifting::{Episode, LiftingConfig};
use clkoop::lti::{spectrum, StateSpace};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

/// Random square matrix rescaled to the given spectral radius.
pub fn with_radius(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> DMatrix<f64> {
    let a = uniform(rng, n, n, 1.0);
    let rho = spectrum(&a).unwrap().spectral_radius;
    if rho == 0.0 {
        a
    } else {
        a * (radius / rho)
    }
}

pub fn random_system(
    rng: &mut ChaCha8Rng,
    n: usize,
    ni: usize,
    no: usize,
    radius: f64,
    feedthrough: bool,
    dt: f64,
) -> StateSpace {
    let a = with_radius(rng, n, radius);
    let b = uniform(rng, n, ni, 1.0);
    let c = uniform(rng, no, n, 1.0);
    let d = if feedthrough { uniform(rng, no, ni, 0.5) } else { DMatrix::zeros(no, ni) };
    StateSpace::new(a, b, c, d, dt).unwrap()
}

/// Step-by-step loop with `u_c = r − y_p` and `u_p = y_c + f`, solving the
/// algebraic loop `(1 + Dc Dp) u_p = Cc x_c + Dc (r − Cp x_p) + f` each step.
/// Returns the plant outputs and the stacked states `[x_c; x_p]`.
pub fn loop_oracle(
    controller: &StateSpace,
    plant: &StateSpace,
    x0: &DVector<f64>,
    r: &[DVector<f64>],
    f: &[DVector<f64>],
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let nc = controller.n_states();
    let mut xc = x0.rows(0, nc).into_owned();
    let mut xp = x0.rows(nc, plant.n_states()).into_owned();
    let nu = plant.n_inputs();
    let q = DMatrix::identity(nu, nu) + controller.d() * plant.d();
    let mut ys = Vec::new();
    let mut xs = vec![x0.clone()];
    for (rk, fk) in r.iter().zip(f) {
        let rhs = controller.c() * &xc + controller.d() * (rk - plant.c() * &xp) + fk;
        let up = q.clone().lu().solve(&rhs).unwrap();
        let yp = plant.c() * &xp + plant.d() * &up;
        let uc = rk - &yp;
        xc = controller.a() * &xc + controller.b() * uc;
        xp = plant.a() * &xp + plant.b() * &up;
        ys.push(yp);
        let mut x = DVector::zeros(nc + xp.len());
        x.rows_mut(0, nc).copy_from(&xc);
        x.rows_mut(nc, xp.len()).copy_from(&xp);
        xs.push(x);
    }
    (ys, xs)
}

pub fn random_signal(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<DVector<f64>> {
    (0..len)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
        .collect()
}

/// Linear plant `x⁺ = A x + B u` (state measured directly) under a linear
/// dynamic controller with `n_r = m` errors and one output.
pub struct LinearLoop {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub controller: ControllerModel,
}

impl LinearLoop {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn u_p(&self) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.m(), self.m() + 1);
        u.view_mut((0, 0), (self.m(), self.m())).copy_from(&self.a);
        u.view_mut((0, self.m()), (self.m(), 1)).copy_from(&self.b);
        u
    }

    pub fn lifting(&self) -> LiftingConfig {
        LiftingConfig {
            state_dim: self.m(),
            monomial_degree: 1,
            n_delays: 0,
            delay_inputs: false,
        }
    }
}

/// Random plant and controller whose closed loop has spectral radius below 0.95.
pub fn linear_loop(rng: &mut ChaCha8Rng, m: usize, nc: usize) -> LinearLoop {
    loop {
        let a = with_radius(rng, m, 0.9);
        let b = uniform(rng, m, 1, 1.0);
        let ctrl = random_system(rng, nc, m, 1, 0.8, true, 0.01);
        let dc = ctrl.d().clone() * 0.3;
        let ctrl = StateSpace::new(ctrl.a().clone(), ctrl.b().clone(), ctrl.c() * 0.3, dc, 0.01).unwrap();
        let plant = StateSpace::new(a.clone(), b.clone(), DMatrix::identity(m, m), DMatrix::zeros(m, 1), 0.01)
            .unwrap();
        let cl = clkoop::lti::feedback_interconnect(&ctrl, &plant).unwrap();
        if spectrum(cl.a()).unwrap().spectral_radius < 0.95 {
            return LinearLoop {
                a,
                b,
                controller: ControllerModel::new(ctrl),
            };
        }
    }
}

/// Closed-loop episodes of a [`LinearLoop`] with random references and
/// feedforward. `process_noise` adds uniform noise to the plant update, which
/// makes least-squares fits inexact.
pub fn linear_episodes(
    rng: &mut ChaCha8Rng,
    lp: &LinearLoop,
    n_eps: usize,
    len: usize,
    process_noise: f64,
) -> Vec<Episode> {
    let m = lp.m();
    let ss = &lp.controller.ss;
    let nc = ss.n_states();
    (0..n_eps)
        .map(|index| {
            let mut x = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let mut xc = DVector::from_fn(nc, |_, _| rng.random_range(-1.0..1.0));
            let mut ep = Episode {
                index,
                dt: 0.01,
                time: (0..len).map(|k| k as f64 * 0.01).collect(),
                plant_states: DMatrix::zeros(m, len),
                plant_input: DMatrix::zeros(1, len),
                references: DMatrix::zeros(m, len),
                feedforward: DMatrix::zeros(1, len),
                controller_states: DMatrix::zeros(nc, len),
            };
            for k in 0..len {
                let r = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
                let f = rng.random_range(-1.0..1.0);
                let e = &r - &x;
                let u = (ss.c() * &xc + ss.d() * &e)[0] + f;
                ep.plant_states.set_column(k, &x);
                ep.plant_input[(0, k)] = u;
                ep.references.set_column(k, &r);
                ep.feedforward[(0, k)] = f;
                ep.controller_states.set_column(k, &xc);
                xc = ss.a() * &xc + ss.b() * &e;
                let w = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0) * process_noise);
                x = &lp.a * &x + &lp.b * u + w;
            }
            ep
        })
        .collect()
}
