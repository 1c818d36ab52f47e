//! Cross-checks between independent routes to the same quantity.

use approx::assert_abs_diff_eq;
use stoplab_core::problem::{CovarianceSpec, GainSpec, OperatorSpec, Payoff, TimeFactor};
use stoplab_core::sde::{read_paths_binary, simulate_paths, write_paths_binary, FiniteModel, PathSampler, PathSet, SimConfig};
use stoplab_core::stopping::{
    contact_region, lattice_oracle_1d, stop_on_paths, Exercise, LatticeParams, RuleVariant, DELTA_CONTACT,
};
use stoplab_core::vi::{solve_psor, DomainSpec, PsorParams};

const DRIFT: f64 = -0.5;
const LAMBDA: f64 = 0.09;
const HORIZON: f64 = 1.0;

fn put_gain() -> GainSpec {
    GainSpec::new(
        Payoff::Put {
            direction: vec![1.0],
            strike: 0.0,
            cap: 1.0,
            smoothing: 0.05,
        },
        TimeFactor::Exponential { rate: 0.3 },
        HORIZON,
    )
    .unwrap()
}

fn model(gain: GainSpec) -> FiniteModel {
    let op = OperatorSpec::diagonal(vec![DRIFT]);
    let cov = CovarianceSpec::new(vec![LAMBDA]).unwrap();
    FiniteModel::ou(&op, &cov, 1, gain).unwrap()
}

/// `E[f(m + s Z)]` by composite Simpson on `[-10, 10]` standard deviations.
fn gaussian_expectation(m: f64, s: f64, f: impl Fn(f64) -> f64) -> f64 {
    let cells = 4000;
    let h = 20.0 / cells as f64;
    let mut total = 0.0;
    for i in 0..=cells {
        let z = -10.0 + i as f64 * h;
        let w = if i == 0 || i == cells {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * (-0.5 * z * z).exp() * f(m + s * z);
    }
    total * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

#[test]
fn terminal_lattice_matches_gaussian_integral() {
    let gain = put_gain();
    let m = model(gain.clone());
    let mut p = LatticeParams::from_model(&m, 0.3, 4.0, 0.002, 10).unwrap();
    p.exercise = Exercise::TerminalOnly;
    let v = lattice_oracle_1d(&p, &gain).unwrap();
    let mean = 0.3 * (DRIFT * HORIZON).exp();
    let sd = (LAMBDA * (1.0 - (2.0 * DRIFT * HORIZON).exp()) / (-2.0 * DRIFT)).sqrt();
    let exact = gaussian_expectation(mean, sd, |x| gain.value(HORIZON, &[x]));
    assert_abs_diff_eq!(v.value, exact, epsilon = 2e-4);
}

#[test]
fn obstacle_solver_agrees_with_lattice() {
    let gain = put_gain();
    let m = model(gain.clone());
    let dom = DomainSpec::with_spacing(3.0, &[0.01]).unwrap();
    let field = solve_psor(&m, &dom, &PsorParams::new(200)).unwrap();
    let p = LatticeParams::from_model(&m, 0.0, 4.0, 0.004, 400).unwrap();
    let lat = lattice_oracle_1d(&p, &gain).unwrap();
    for (i, &x) in lat.xs.iter().enumerate() {
        if x.abs() <= 1.0 && (x / 0.25).fract() == 0.0 {
            let pde = field.value0(&[x]).unwrap();
            assert!((pde - lat.v0[i]).abs() < 5e-3, "x = {x}: pde {pde}, lattice {}", lat.v0[i]);
        }
    }
}

#[test]
fn sampler_reproduces_stored_paths() {
    let m = model(put_gain());
    let cfg = SimConfig::new(vec![0.4], 50, 64, 11);
    let bundle = simulate_paths(&m, &cfg).unwrap();
    let sampler = PathSampler::new(m, cfg).unwrap();
    let mut buf = Vec::new();
    for i in [0, 1, 17, 63] {
        sampler.path_into(i, &mut buf).unwrap();
        assert_eq!(buf.as_slice(), bundle.path(i));
    }
}

#[test]
fn path_dump_round_trips() {
    let m = model(put_gain());
    let bundle = simulate_paths(&m, &SimConfig::new(vec![0.1], 20, 8, 5)).unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    write_paths_binary(std::fs::File::create(file.path()).unwrap(), &bundle).unwrap();
    let back = read_paths_binary(std::fs::File::open(file.path()).unwrap()).unwrap();
    assert_eq!(back.states(), bundle.states());
    assert_eq!(back.seed(), 5);
}

#[test]
fn lattice_params_serialize() {
    let m = model(put_gain());
    let p = LatticeParams::from_model(&m, 0.0, 4.0, 0.01, 10).unwrap();
    let text = serde_json::to_string(&p).unwrap();
    let back: LatticeParams = serde_json::from_str(&text).unwrap();
    assert_eq!(back, p);
}

#[test]
fn forced_terminal_rule_matches_euler_law() {
    // the explicit scheme maps x to (1 + a dt) x + √λ ΔW, so X_T is Gaussian
    // with mean x0 c^N and variance λ dt Σ c^{2j}
    let gain = put_gain();
    let m = model(gain.clone());
    let steps = 100;
    let dom = DomainSpec::with_spacing(3.0, &[0.02]).unwrap();
    let field = solve_psor(&m, &dom, &PsorParams::new(steps)).unwrap();
    let rule = contact_region(&field, &gain, DELTA_CONTACT).unwrap();
    let x0 = 0.2;
    let sampler = PathSampler::new(m, SimConfig::new(vec![x0], steps, 20_000, 3)).unwrap();
    let stats = stop_on_paths(&sampler, &rule, &RuleVariant::ForcedTerminal).unwrap();
    let dt = HORIZON / steps as f64;
    let c = 1.0 + DRIFT * dt;
    let mean = x0 * c.powi(steps as i32);
    let var: f64 = (0..steps).map(|j| LAMBDA * dt * c.powi(2 * j as i32)).sum();
    let exact = gaussian_expectation(mean, var.sqrt(), |x| gain.value(HORIZON, &[x]));
    // paths leaving O_R stop early; at R = 3 that has negligible probability
    assert!(stats.exit_fraction < 1e-3);
    let err = (stats.value.mean - exact).abs();
    assert!(err <= 3.0 * stats.value.stderr, "{} vs {exact} (se {})", stats.value.mean, stats.value.stderr);
    assert_abs_diff_eq!(stats.stop_time.mean, HORIZON, epsilon = 1e-3);
}
