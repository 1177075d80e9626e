//! Acceptance criteria, one PASS/FAIL line each.
//!
//! `cargo test -p arcfit --test acceptance` runs everything; trailing
//! arguments select criteria by number (`-- 3 5 7`). Lines tagged
//! `[C=50]` repeat a criterion at heat capacity 50 J/K, where the
//! generated record reaches the last stage; they supplement the literal
//! runs and never replace them.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use arcfit::data::{generate_synthetic, ArcDataset, StagingConfig, SyntheticOptions};
use arcfit::fitting::{
    self, brute_force_cost_multiplier, brute_force_parity_particles, FitError, FitResult, StageSearchSpace,
};
use arcfit::integrate::{self, Environment, IntegratorConfig, SimulationResult};
use arcfit::kinetics::{celsius_to_kelvin, ThermalModel, BOLTZMANN};
use arcfit::objective::LossWeighting;
use arcfit::pso::{self, Bounds, PsoConfig};
use arcfit::reference;

const LITERAL_HEAT_CAPACITY: f64 = reference::OPEN_TEST_HEAT_CAPACITY;
const SUPPLEMENTARY_HEAT_CAPACITY: f64 = 50.0;
const T_START_C: f64 = 123.0;
const HORIZON_S: f64 = 5e5;

const RMSE_MAX: f64 = 0.15;
const TR_REL_MAX: f64 = 0.02;
const RECOVERY_BUDGET: Duration = Duration::from_secs(15 * 60);
const ENERGY_REL_MAX: f64 = 1e-3;
const RK4_REFINEMENT: usize = 1000;
const RK4_REL_MAX: f64 = 1e-5;
const RK4_BUDGET: Duration = Duration::from_secs(60);
const SPHERE_TARGET: f64 = 1e-3;
const SPHERE_SEEDS_REQUIRED: usize = 9;
const LINEAR_REL_MAX: f64 = 1e-6;

const LAYERED_PARTICLES: usize = 200;
const ITERATIONS: usize = 50;
const SEEDS: [u64; 3] = [1, 2, 3];
const OVEN_SWEEP_C: [f64; 6] = [140.0, 150.0, 160.0, 170.0, 180.0, 190.0];
const OVEN_UA_W_PER_K: f64 = 0.05;
const OVEN_START_C: f64 = 25.0;

struct Outcome {
    id: String,
    pass: bool,
}

#[derive(Default)]
struct Ledger {
    outcomes: Vec<Outcome>,
}

impl Ledger {
    fn record(&mut self, id: &str, name: &str, pass: bool, detail: impl AsRef<str>) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {}", detail.as_ref());
        self.outcomes.push(Outcome { id: id.to_string(), pass });
    }
}

/// One synthetic record with its generator and the fits run on it.
struct Scenario {
    label: &'static str,
    model: ThermalModel,
    staging: StagingConfig,
    dataset: Result<ArcDataset, String>,
    layered: Vec<(u64, Result<FitResult, FitError>)>,
    brute: Vec<(u64, Result<FitResult, FitError>)>,
}

impl Scenario {
    fn new(label: &'static str, heat_capacity: f64) -> Self {
        let model = reference::open_test_model_with(heat_capacity);
        let dataset = generate_synthetic(&model, celsius_to_kelvin(T_START_C), &SyntheticOptions::default())
            .map_err(|e| e.to_string());
        Self {
            label,
            model,
            staging: reference::open_test_staging(),
            dataset,
            layered: Vec::new(),
            brute: Vec::new(),
        }
    }

    fn heat_capacity(&self) -> f64 {
        self.model.heat_capacity
    }

    fn fit(&self, seed: u64, brute: bool) -> Result<FitResult, FitError> {
        let ds = self
            .dataset
            .as_ref()
            .map_err(|e| FitError::Space(format!("no dataset: {e}")))?;
        let spaces = StageSearchSpace::four_stage();
        let particles = if brute {
            brute_force_parity_particles(spaces.len(), LAYERED_PARTICLES)
        } else {
            LAYERED_PARTICLES
        };
        let cfg = PsoConfig {
            n_particles: particles,
            n_iterations: ITERATIONS,
            seed,
            ..PsoConfig::default()
        };
        let run = if brute { fitting::fit_brute_force } else { fitting::fit_layered };
        run(
            ds,
            &self.staging,
            &spaces,
            &LossWeighting::default(),
            &cfg,
            &IntegratorConfig::default(),
            self.heat_capacity(),
        )
    }

    fn layered(&mut self, seed: u64) -> &Result<FitResult, FitError> {
        if !self.layered.iter().any(|(s, _)| *s == seed) {
            let fit = single_thread(|| self.fit(seed, false));
            self.layered.push((seed, fit));
        }
        &self.layered.iter().find(|(s, _)| *s == seed).unwrap().1
    }

    fn brute(&mut self, seed: u64) -> &Result<FitResult, FitError> {
        if !self.brute.iter().any(|(s, _)| *s == seed) {
            let fit = single_thread(|| self.fit(seed, true));
            self.brute.push((seed, fit));
        }
        &self.brute.iter().find(|(s, _)| *s == seed).unwrap().1
    }

    fn truth_run(&self) -> SimulationResult {
        adiabatic(&self.model, &IntegratorConfig::default()).expect("generator model integrates")
    }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    pool(1).install(f)
}

fn adiabatic(model: &ThermalModel, cfg: &IntegratorConfig) -> Result<SimulationResult, integrate::IntegrationError> {
    integrate::simulate_adiabatic_arc(model, celsius_to_kelvin(T_START_C), HORIZON_S, cfg)
}

fn tracking() -> IntegratorConfig {
    IntegratorConfig {
        track_stage_heat: true,
        ..IntegratorConfig::default()
    }
}

fn sci(xs: &[f64], digits: usize) -> String {
    xs.iter().map(|x| format!("{x:.digits$e}")).collect::<Vec<_>>().join(", ")
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn energy_residual(model: &ThermalModel, sim: &SimulationResult) -> f64 {
    let first = &sim.samples[0];
    let last = sim.final_sample();
    let rise = last.temperature - first.temperature;
    let released: f64 = model
        .stages
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.gate_temperature.is_some() {
                last.stage_heat[i]
            } else {
                s.enthalpy * (last.c[i] - s.c0).abs()
            }
        })
        .sum();
    (rise - released / model.heat_capacity).abs() / rise
}

/// Samples below the gate (before it is first reached) whose last-stage heat is not bitwise zero.
fn gate_violations(gate: f64, temperature: &[f64], last_stage_heat: impl Iterator<Item = f64>) -> usize {
    temperature
        .iter()
        .zip(last_stage_heat)
        .take_while(|(t, _)| **t < gate)
        .filter(|(_, q)| q.to_bits() != 0)
        .count()
}

fn sim_gate_violations(model: &ThermalModel, sim: &SimulationResult) -> usize {
    let last = model.num_stages() - 1;
    let gate = model.staging_temperatures[last];
    gate_violations(gate, &sim.temperatures(), sim.samples.iter().map(|s| s.stage_heat[last]))
}

fn fit_gate_violations(fit: &FitResult) -> Option<usize> {
    let last = fit.model.num_stages() - 1;
    let gate = fit.model.staging_temperatures[last];
    let heat = fit.prediction.stage_heat.as_ref()?;
    Some(gate_violations(gate, &fit.prediction.temperature, heat.iter().map(|q| q[last])))
}

fn describe<T>(r: &Result<T, FitError>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("error: {e}"),
    }
}

fn criterion_1(ledger: &mut Ledger, sc: &mut Scenario, id: &str) {
    let started = Instant::now();
    let truth = sc.truth_run();
    let label = sc.label;
    let ds = sc.dataset.clone();
    let fit = sc.layered(SEEDS[0]);
    let elapsed = started.elapsed();
    let (fit, ds) = match (fit, ds) {
        (Ok(f), Ok(d)) => (f.clone(), d),
        (f, _) => {
            ledger.record(id, "round-trip recovery", false, format!("{label}: layered fit failed, {}", describe(f)));
            return;
        }
    };
    let rmse = fitting::log_rate_rmse(&fit.model, &ds.trimmed_below(celsius_to_kelvin(T_START_C)).unwrap(), &IntegratorConfig::default());
    let predicted = adiabatic(&fit.model, &IntegratorConfig::default()).ok().and_then(|s| s.tr_time);
    let (rmse_ok, rmse_text) = match rmse {
        Ok(r) => (r <= RMSE_MAX, format!("RMSE {r:.4} (max {RMSE_MAX})")),
        Err(e) => (false, format!("RMSE error: {e}")),
    };
    let (tr_ok, tr_text) = match (predicted, truth.tr_time) {
        (Some(p), Some(t)) => {
            let rel = (p - t).abs() / t;
            (rel <= TR_REL_MAX, format!("tr {p:.1} s vs {t:.1} s ({:+.2}%, max ±2%)", 100.0 * (p - t) / t))
        }
        (p, t) => (false, format!("tr missing: fitted {p:?}, generator {t:?}")),
    };
    let time_ok = elapsed <= RECOVERY_BUDGET;
    ledger.record(
        id,
        "round-trip recovery",
        rmse_ok && tr_ok && time_ok,
        format!("{label}: {rmse_text}; {tr_text}; {:.1} s", elapsed.as_secs_f64()),
    );
}

fn criterion_2(ledger: &mut Ledger, sc: &mut Scenario, id: &str) {
    let label = sc.label;
    let mut layered = Vec::new();
    let mut brute = Vec::new();
    for seed in SEEDS {
        match sc.layered(seed) {
            Ok(f) => layered.push(f.final_loss),
            Err(e) => {
                ledger.record(id, "layered beats brute force at parity", false, format!("{label}: layered seed {seed} failed: {e}"));
                return;
            }
        }
        match sc.brute(seed) {
            Ok(f) => brute.push(f.final_loss),
            Err(e) => {
                ledger.record(id, "layered beats brute force at parity", false, format!("{label}: brute seed {seed} failed: {e}"));
                return;
            }
        }
    }
    let (ml, mb) = (median(layered.clone()), median(brute.clone()));
    ledger.record(
        id,
        "layered beats brute force at parity",
        ml < mb,
        format!(
            "{label}: median loss layered {ml:.4e} vs brute {mb:.4e} ({} particles); layered [{}], brute [{}]",
            brute_force_parity_particles(4, LAYERED_PARTICLES),
            sci(&layered, 3),
            sci(&brute, 3)
        ),
    );
}

fn criterion_3(ledger: &mut Ledger) {
    let four = brute_force_parity_particles(4, 1000);
    let single_ok = (1..=64).all(|k| brute_force_parity_particles(1, k) == k);
    let multiplier = brute_force_cost_multiplier(4, 1000, 10000);
    ledger.record(
        "3",
        "cost-parity formula",
        four == 2500 && single_ok && multiplier == 4.0 && brute_force_parity_particles(4, 200) == 500,
        format!("(4,1000) -> {four}; (1,k) -> k for k <= 64: {single_ok}; 10000 brute vs 1000 layered = {multiplier}x"),
    );
}

fn criterion_4(ledger: &mut Ledger, fitted: Option<&ThermalModel>) {
    let mut models = vec![
        ("open 76.16", reference::open_test_model()),
        ("closed 76.16", reference::closed_test_model()),
        ("open 50", reference::open_test_model_with(50.0)),
        ("closed 50", reference::closed_test_model_with(50.0)),
        ("open 30", reference::open_test_model_with(30.0)),
    ];
    if let Some(m) = fitted {
        models.push(("fitted [C=50]", m.clone()));
    }
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, model) in &models {
        match adiabatic(model, &tracking()) {
            Ok(sim) => {
                let r = energy_residual(model, &sim);
                worst = worst.max(r);
                parts.push(format!("{name} {r:.1e}"));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name} error {e}"));
            }
        }
    }
    ledger.record(
        "4",
        "energy conservation",
        ok && worst <= ENERGY_REL_MAX,
        format!("worst {worst:.2e} (max {ENERGY_REL_MAX:.0e}); {}", parts.join(", ")),
    );
}

fn criterion_5(ledger: &mut Ledger) {
    let started = Instant::now();
    let cfg = IntegratorConfig::default();
    let model = reference::open_test_model();
    let t0 = celsius_to_kelvin(T_START_C);
    let t_end_temp = celsius_to_kelvin(180.0);
    let full = adiabatic(&model, &cfg).expect("open model integrates");
    let Some(t_end) = full.tr_time else {
        ledger.record("5", "integrator oracle equivalence", false, "no runaway to 180 °C");
        return;
    };
    let adaptive_steps = full.samples.iter().filter(|s| s.t <= t_end).count() - 1;
    let records = 100;
    let steps = (RK4_REFINEMENT * adaptive_steps).div_ceil(records) * records;
    let times: Vec<f64> = (0..=records).map(|k| t_end * k as f64 / records as f64).collect();
    let sim = integrate::integrate(&model, Environment::Adiabatic, &model.initial_state(t0, 0.0), t_end, &cfg, Some(&times))
        .expect("dense integration");
    let oracle = common::rk4_temperatures(&model, t0, t_end, steps, steps / records);
    let worst = sim
        .samples
        .iter()
        .zip(&oracle)
        .map(|(s, (_, t))| ((s.temperature - t) / t).abs())
        .fold(0.0, f64::max);
    let elapsed = started.elapsed();
    ledger.record(
        "5",
        "integrator oracle equivalence",
        worst <= RK4_REL_MAX && elapsed <= RK4_BUDGET && oracle.len() == sim.samples.len(),
        format!(
            "{adaptive_steps} adaptive steps to {:.2} K, RK4 {steps} steps; worst relative T error {worst:.2e} (max {RK4_REL_MAX:.0e}); {:.2} s",
            t_end_temp,
            elapsed.as_secs_f64()
        ),
    );
}

fn criterion_6(ledger: &mut Ledger, fits: &[(String, &FitResult)]) {
    let cfg = tracking();
    let mut violations = 0;
    let mut checked = Vec::new();
    for (name, model) in [
        ("open 76.16", reference::open_test_model()),
        ("closed 76.16", reference::closed_test_model()),
        ("open 50", reference::open_test_model_with(50.0)),
        ("open 30", reference::open_test_model_with(30.0)),
    ] {
        let sim = adiabatic(&model, &cfg).expect("reference integrates");
        violations += sim_gate_violations(&model, &sim);
        for oven in OVEN_SWEEP_C {
            let sim = integrate::simulate_oven_test(
                &model,
                celsius_to_kelvin(OVEN_START_C),
                celsius_to_kelvin(oven),
                OVEN_UA_W_PER_K,
                HORIZON_S,
                &cfg,
            )
            .expect("oven run integrates");
            violations += sim_gate_violations(&model, &sim);
        }
        checked.push(name.to_string());
    }
    let mut ok = true;
    for (name, fit) in fits {
        match fit_gate_violations(fit) {
            Some(v) => violations += v,
            None => ok = false,
        }
        if let Ok(sim) = adiabatic(&fit.model, &cfg) {
            violations += sim_gate_violations(&fit.model, &sim);
        }
        checked.push(name.clone());
    }
    ledger.record(
        "6",
        "gate exactness",
        ok && violations == 0,
        format!("{violations} nonzero last-stage heat samples below T_3 across {}", checked.join(", ")),
    );
}

fn criterion_7(ledger: &mut Ledger) {
    let bounds = Bounds::new(&[(-5.0, 5.0); 5]).unwrap();
    let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let mut hits = 0;
    let mut monotone = true;
    let mut values = Vec::new();
    for seed in 0..10 {
        let cfg = PsoConfig {
            n_particles: 50,
            n_iterations: 100,
            seed,
            ..PsoConfig::default()
        };
        let out = pso::optimize(&bounds, &cfg, &sphere).unwrap();
        if out.best_value < SPHERE_TARGET {
            hits += 1;
        }
        monotone &= out.history.windows(2).all(|w| w[1] <= w[0]);
        values.push(out.best_value);
    }
    ledger.record(
        "7",
        "PSO sphere benchmark",
        hits >= SPHERE_SEEDS_REQUIRED && monotone,
        format!("{hits}/10 seeds below {SPHERE_TARGET:.0e}, histories non-increasing: {monotone}; best [{}]", sci(&values, 1)),
    );
}

fn criterion_8(ledger: &mut Ledger, model: &ThermalModel, label: &str) {
    let cfg = IntegratorConfig::default();
    let mut runs = Vec::new();
    for oven in OVEN_SWEEP_C {
        match integrate::simulate_oven_test(
            model,
            celsius_to_kelvin(OVEN_START_C),
            celsius_to_kelvin(oven),
            OVEN_UA_W_PER_K,
            HORIZON_S,
            &cfg,
        ) {
            Ok(sim) => runs.push((oven, sim.tr_time, sim.peak_temperature)),
            Err(e) => {
                ledger.record("8", "oven-test trends", false, format!("{label}: oven {oven} °C failed: {e}"));
                return;
            }
        }
    }
    let tr = |r: &(f64, Option<f64>, f64)| r.1.unwrap_or(f64::INFINITY);
    let runaway: Vec<_> = runs.iter().filter(|r| r.1.is_some()).collect();
    let tr_decreasing = runs.windows(2).all(|w| tr(&w[1]) < tr(&w[0]) || w[0].1.is_none() && w[1].1.is_none());
    let peak_ok = runs.windows(2).all(|w| w[1].2 >= w[0].2);
    let quiet = runs.iter().any(|r| r.1.is_none());
    let table: Vec<String> = runs
        .iter()
        .map(|(o, t, p)| match t {
            Some(t) => format!("{o}°C tr {t:.0}s peak {:.1}°C", p - 273.15),
            None => format!("{o}°C no runaway peak {:.1}°C", p - 273.15),
        })
        .collect();
    ledger.record(
        "8",
        "oven-test trends",
        tr_decreasing && peak_ok && quiet && runaway.len() >= 2,
        format!("{label}, UA {OVEN_UA_W_PER_K} W/K: {}", table.join("; ")),
    );
}

fn criterion_9(ledger: &mut Ledger) {
    let cfg = IntegratorConfig::default();
    let open = adiabatic(&reference::open_test_model(), &cfg).unwrap();
    let closed = adiabatic(&reference::closed_test_model(), &cfg).unwrap();
    ledger.record(
        "9",
        "closed-vs-open contrast",
        closed.peak_temperature > open.peak_temperature,
        format!(
            "peak closed {:.2} °C vs open {:.2} °C at {LITERAL_HEAT_CAPACITY} J/K",
            closed.peak_temperature - 273.15,
            open.peak_temperature - 273.15
        ),
    );
}

fn exact_linear_dataset(staging: &StagingConfig, params: &[(f64, f64)], t_max: f64) -> ArcDataset {
    let temps = staging.temperatures();
    let n = staging.num_stages();
    let count = ((t_max - temps[0]) / 0.25).floor() as usize + 1;
    let mut time = Vec::with_capacity(count);
    let mut temperature = Vec::with_capacity(count);
    let mut rate = Vec::with_capacity(count);
    let last_t = temps[0] + 0.25 * (count - 1) as f64;
    for k in 0..count {
        let t = temps[0] + 0.25 * k as f64;
        let stage = (1..=n).rev().find(|&i| t >= staging.lower(i)).unwrap();
        let span = staging.upper(stage).unwrap_or(last_t) - staging.lower(stage);
        let (a, e_a) = params[stage - 1];
        time.push(k as f64);
        temperature.push(t);
        rate.push(a * span * (-e_a / (BOLTZMANN * t)).exp());
    }
    ArcDataset::new("linear", time, temperature).unwrap().with_rate(rate).unwrap()
}

fn criterion_10a(ledger: &mut Ledger) {
    let staging = reference::open_test_staging();
    let params: Vec<(f64, f64)> = reference::open_test_stages()
        .iter()
        .map(|s| (s.frequency_factor, s.activation_energy))
        .collect();
    let ds = exact_linear_dataset(&staging, &params, celsius_to_kelvin(260.0));
    let fit = fitting::fit_linearized(
        &ds,
        &staging,
        LITERAL_HEAT_CAPACITY,
        &[1.0; 4],
        &LossWeighting::default(),
        &IntegratorConfig::default(),
    );
    match fit {
        Ok(fit) => {
            let worst = fit
                .model
                .stages
                .iter()
                .zip(&params)
                .flat_map(|(s, (a, e))| {
                    [
                        ((s.frequency_factor - a) / a).abs(),
                        ((s.activation_energy - e) / e).abs(),
                    ]
                })
                .fold(0.0, f64::max);
            ledger.record(
                "10a",
                "linearized recovery on exact data",
                worst <= LINEAR_REL_MAX,
                format!("worst relative error in A, E_a {worst:.2e} (max {LINEAR_REL_MAX:.0e})"),
            );
        }
        Err(e) => ledger.record("10a", "linearized recovery on exact data", false, format!("error: {e}")),
    }
}

fn criterion_10b(ledger: &mut Ledger, sc: &mut Scenario, id: &str) {
    let label = sc.label;
    let Ok(ds) = sc.dataset.clone() else {
        ledger.record(id, "linearized no better than layered", false, format!("{label}: no dataset"));
        return;
    };
    let linear = fitting::fit_linearized(
        &ds,
        &sc.staging,
        sc.heat_capacity(),
        &[1.0; 4],
        &LossWeighting::default(),
        &IntegratorConfig::default(),
    );
    let layered = sc.layered(SEEDS[0]);
    match (linear, layered) {
        (Ok(lin), Ok(lay)) => ledger.record(
            id,
            "linearized no better than layered",
            lin.final_loss >= lay.final_loss,
            format!("{label}: loss linearized {:.4e} vs layered {:.4e}", lin.final_loss, lay.final_loss),
        ),
        (lin, lay) => ledger.record(
            id,
            "linearized no better than layered",
            false,
            format!("{label}: linearized {}, layered {}", describe(&lin), describe(lay)),
        ),
    }
}

fn same_parameters(a: &FitResult, b: &FitResult) -> bool {
    let bits = |m: &ThermalModel| -> Vec<u64> {
        m.stages
            .iter()
            .flat_map(|s| [s.frequency_factor, s.activation_energy, s.enthalpy, s.m, s.n, s.c0])
            .map(f64::to_bits)
            .collect()
    };
    bits(&a.model) == bits(&b.model) && a.final_loss.to_bits() == b.final_loss.to_bits()
}

fn criterion_11(ledger: &mut Ledger, sc: &mut Scenario, id: &str) {
    let label = sc.label;
    let seed = SEEDS[0];
    let mut parts = Vec::new();
    let mut ok = true;
    for brute in [false, true] {
        let kind = if brute { "brute" } else { "layered" };
        let second = pool(4).install(|| sc.fit(seed, brute));
        let first = if brute { sc.brute(seed) } else { sc.layered(seed) };
        match (first, second) {
            (Ok(a), Ok(b)) => {
                let same = same_parameters(a, &b);
                ok &= same;
                parts.push(format!("{kind} 1 thread vs 4 threads identical: {same}"));
            }
            (a, b) => {
                ok = false;
                parts.push(format!("{kind}: {} / {}", describe(a), describe(&b)));
            }
        }
    }
    ledger.record(id, "determinism across parallelism", ok, format!("{label}: {}", parts.join("; ")));
}

fn main() -> ExitCode {
    let selected: BTreeSet<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wants = |id: &str| selected.is_empty() || selected.contains(id);
    let mut ledger = Ledger::default();

    let mut literal = Scenario::new("C=76.16", LITERAL_HEAT_CAPACITY);
    let mut supplementary = Scenario::new("[C=50]", SUPPLEMENTARY_HEAT_CAPACITY);
    for sc in [&literal, &supplementary] {
        match &sc.dataset {
            Ok(ds) => println!(
                "# dataset {}: {} samples, {:.2}..{:.2} °C",
                sc.label,
                ds.len(),
                ds.min_temperature() - 273.15,
                ds.max_temperature() - 273.15
            ),
            Err(e) => println!("# dataset {}: {e}", sc.label),
        }
    }

    if wants("1") {
        criterion_1(&mut ledger, &mut literal, "1");
        criterion_1(&mut ledger, &mut supplementary, "1s");
    }
    if wants("2") {
        criterion_2(&mut ledger, &mut literal, "2");
        criterion_2(&mut ledger, &mut supplementary, "2s");
    }
    if wants("3") {
        criterion_3(&mut ledger);
    }
    if wants("4") {
        let fitted = supplementary.layered(SEEDS[0]).as_ref().ok().map(|f| f.model.clone());
        criterion_4(&mut ledger, fitted.as_ref());
    }
    if wants("5") {
        criterion_5(&mut ledger);
    }
    if wants("6") {
        supplementary.layered(SEEDS[0]);
        supplementary.brute(SEEDS[0]);
        let fits: Vec<(String, &FitResult)> = supplementary
            .layered
            .iter()
            .map(|(s, f)| (format!("layered seed {s} [C=50]"), f))
            .chain(supplementary.brute.iter().map(|(s, f)| (format!("brute seed {s} [C=50]"), f)))
            .filter_map(|(n, f)| f.as_ref().ok().map(|f| (n, f)))
            .collect();
        criterion_6(&mut ledger, &fits);
    }
    if wants("7") {
        criterion_7(&mut ledger);
    }
    if wants("8") {
        match supplementary.layered(SEEDS[0]) {
            Ok(fit) => {
                let model = fit.model.clone();
                criterion_8(&mut ledger, &model, "layered fit [C=50]");
            }
            Err(e) => ledger.record("8", "oven-test trends", false, format!("no fitted model: {e}")),
        }
    }
    if wants("9") {
        criterion_9(&mut ledger);
    }
    if wants("10") {
        criterion_10a(&mut ledger);
        criterion_10b(&mut ledger, &mut literal, "10b");
        criterion_10b(&mut ledger, &mut supplementary, "10b-s");
    }
    if wants("11") {
        criterion_11(&mut ledger, &mut literal, "11");
        criterion_11(&mut ledger, &mut supplementary, "11s");
    }

    let failed: Vec<&str> = ledger.outcomes.iter().filter(|o| !o.pass).map(|o| o.id.as_str()).collect();
    println!(
        "# {} passed, {} failed{}",
        ledger.outcomes.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(": {}", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
