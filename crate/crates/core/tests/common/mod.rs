//! Independent reference implementation used by the integration tests.
//!
//! The right-hand side is written out from the rate law directly rather than
//! through the crate's kernels, and integrated with classical fixed-step RK4.

#![allow(dead_code)]

use arcfit::ThermalModel;

pub const K_B: f64 = 1.380649e-23;

/// `(dc_i/dt, dT/dt)` of an adiabatic model, gate included.
pub fn reference_rhs(model: &ThermalModel, c: &[f64], temp: f64) -> (Vec<f64>, f64) {
    let mut dc = Vec::with_capacity(c.len());
    let mut q = 0.0;
    for (s, &ci) in model.stages.iter().zip(c) {
        let ci = ci.clamp(0.0, 1.0);
        let k = s.frequency_factor * (-s.activation_energy / (K_B * temp)).exp();
        let f = ci.powf(s.n) * (1.0 - ci).powf(s.m);
        let conversion = s.m != 0.0;
        let rate = if conversion {
            if ci >= 1.0 {
                0.0
            } else {
                k * f
            }
        } else {
            -k * f
        };
        dc.push(rate);
        let gated = s.gate_temperature.is_some_and(|g| temp < g);
        if !gated {
            q += s.enthalpy * rate.abs();
        }
    }
    (dc, q / model.heat_capacity)
}

/// Fixed-step RK4 from `(c0, t_start)` over `[0, t_end]`, recording `T` at
/// every multiple of `record_every` steps.
pub fn rk4_temperatures(model: &ThermalModel, t_start: f64, t_end: f64, steps: usize, record_every: usize) -> Vec<(f64, f64)> {
    let h = t_end / steps as f64;
    let n = model.stages.len();
    let mut c: Vec<f64> = model.stages.iter().map(|s| s.c0).collect();
    let mut temp = t_start;
    let mut out = vec![(0.0, temp)];
    let add = |c: &[f64], temp: f64, dc: &[f64], dt: f64, s: f64| -> (Vec<f64>, f64) {
        ((0..n).map(|i| c[i] + s * dc[i]).collect(), temp + s * dt)
    };
    for step in 1..=steps {
        let (k1c, k1t) = reference_rhs(model, &c, temp);
        let (c2, t2) = add(&c, temp, &k1c, k1t, 0.5 * h);
        let (k2c, k2t) = reference_rhs(model, &c2, t2);
        let (c3, t3) = add(&c, temp, &k2c, k2t, 0.5 * h);
        let (k3c, k3t) = reference_rhs(model, &c3, t3);
        let (c4, t4) = add(&c, temp, &k3c, k3t, h);
        let (k4c, k4t) = reference_rhs(model, &c4, t4);
        for i in 0..n {
            c[i] += h / 6.0 * (k1c[i] + 2.0 * k2c[i] + 2.0 * k3c[i] + k4c[i]);
        }
        temp += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        if step % record_every == 0 {
            out.push((step as f64 * h, temp));
        }
    }
    out
}
