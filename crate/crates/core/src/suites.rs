//! Verification suites: seeded batteries of exact checks, each reporting
//! its worst residual against a fixed tolerance.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::agents::exact::policy_gradient_discrepancy;
use crate::agents::{Agent, AgentKind, Batch, Hyperparameters, Losses, Prepared, ReplayRecord};
use crate::algebra::{contains, StateTransformation};
use crate::augment::{lift_to_turn_states, rtmdp, tbmdp, RtmdpConfig};
use crate::envs::{random_augmented_policy, random_finite_mdp, random_policy};
use crate::mdp::{
    compose_rtmrp, compose_tbmrp, enumerate_trajectory_distribution, mrp_equal, FiniteMdp,
    TabularPolicy, DEFAULT_ENUMERATION_BUDGET,
};
use crate::nn::gradcheck::finite_difference_check;
use crate::nn::{Architecture, Matrix, Network, NetworkSpec, PopArt, Tape, Var};
use crate::rng::seeded;
use crate::values::{verify_lemma1, verify_lemma2};
use crate::Result;

pub const SUITES: [&str; 6] = [
    "theorem1",
    "theorem2",
    "lemmas",
    "proposition",
    "gradients",
    "popart",
];

/// Random finite instances per suite.
pub const INSTANCES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub property: String,
    pub instances: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub properties: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }
}

/// Worst residual over a set of instances; a NaN residual counts as failure.
struct Tally {
    property: &'static str,
    tolerance: f64,
    instances: usize,
    max_residual: f64,
    failed: bool,
}

impl Tally {
    fn new(property: &'static str, tolerance: f64) -> Self {
        Self {
            property,
            tolerance,
            instances: 0,
            max_residual: 0.0,
            failed: false,
        }
    }

    fn record(&mut self, residual: f64, ok: bool) {
        self.instances += 1;
        if residual.is_nan() {
            self.max_residual = f64::INFINITY;
        } else {
            self.max_residual = self.max_residual.max(residual);
        }
        self.failed |= !ok || residual.is_nan() || residual > self.tolerance;
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            property: self.property.to_string(),
            instances: self.instances,
            max_residual: self.max_residual,
            tolerance: self.tolerance,
            passed: !self.failed && self.instances > 0,
        }
    }
}

/// `None` for an unknown suite name.
pub fn run_suite(name: &str) -> Option<Result<SuiteReport>> {
    let properties = match name {
        "theorem1" => theorem1(),
        "theorem2" => theorem2(),
        "lemmas" => lemmas(),
        "proposition" => proposition(),
        "gradients" => gradients(),
        "popart" => popart(),
        _ => return None,
    };
    Some(properties.map(|properties| SuiteReport {
        suite: name.to_string(),
        properties,
    }))
}

/// Instance `seed`: an MDP with `|S| ≤ 4`, `|A| ≤ 3`, an augmented policy
/// and a plain policy over it.
pub fn finite_instance(seed: u64) -> (FiniteMdp, TabularPolicy, TabularPolicy) {
    let mut rng = seeded(seed);
    let (ns, na) = (rng.random_range(1..=4), rng.random_range(1..=3));
    (
        random_finite_mdp(seed, ns, na, (-1.0, 1.0)),
        random_augmented_policy(seed + 1_000, ns, na),
        random_policy(seed + 2_000, ns, na),
    )
}

fn theorem1() -> Result<Vec<PropertyResult>> {
    let mut mrp = Tally::new("rtmrp(E, pi) equals tbmrp(rtmdp(E), pi)", 1e-12);
    let mut tv = Tally::new("horizon-4 trajectory total variation", 1e-12);
    for seed in 0..INSTANCES as u64 {
        let (env, pi, _) = finite_instance(seed);
        let real_time = compose_rtmrp(&env, &pi, 0)?;
        let turn_based = compose_tbmrp(
            &rtmdp(&env, &RtmdpConfig::default()),
            &pi.over_augmented_states(),
        )?;
        let cmp = mrp_equal(&real_time, &turn_based, 1e-12, None)?;
        mrp.record(cmp.max_discrepancy, cmp.equal);
        let d1 = enumerate_trajectory_distribution(&real_time, 4, DEFAULT_ENUMERATION_BUDGET)?;
        let d2 = enumerate_trajectory_distribution(&turn_based, 4, DEFAULT_ENUMERATION_BUDGET)?;
        tv.record(d1.total_variation(&d2), true);
    }
    Ok(vec![mrp.finish(), tv.finish()])
}

fn theorem2() -> Result<Vec<PropertyResult>> {
    let mut tally = Tally::new("rtmrp(tbmdp(E), pi) contains tbmrp(E, pi) at n = 2", 1e-12);
    for seed in 0..INSTANCES as u64 {
        let (env, _, pi) = finite_instance(seed);
        let psi = compose_rtmrp(&tbmdp(&env), &lift_to_turn_states(&pi), 0)?;
        let omega = compose_tbmrp(&env, &pi)?;
        let f = StateTransformation::drop_turn_and_action(env.n_states(), env.n_actions());
        let c = contains(&psi, &omega, 2, &f, 1e-12)?;
        tally.record(c.max_discrepancy, c.contained);
    }
    Ok(vec![tally.finish()])
}

fn lemmas() -> Result<Vec<PropertyResult>> {
    let mut l1 = Tally::new("action-value identity over rtmdp(E)", 1e-10);
    let mut l2 = Tally::new("state-value identity over rtmdp(E)", 1e-10);
    for seed in 0..INSTANCES as u64 {
        let (env, pi, _) = finite_instance(seed);
        l1.record(verify_lemma1(&env, &pi, 0.99)?, true);
        l2.record(verify_lemma2(&env, &pi, 0.99)?, true);
    }
    Ok(vec![l1.finish(), l2.finish()])
}

/// Random weighting over augmented states, value table and logits for the
/// policy-gradient comparison.
pub fn proposition_instance(seed: u64) -> (FiniteMdp, Vec<f64>, Vec<f64>, Matrix) {
    let mut rng = seeded(seed);
    let (ns, na) = (rng.random_range(1..=4), rng.random_range(2..=3));
    let env = random_finite_mdp(seed, ns, na, (-1.0, 1.0));
    let nx = ns * na;
    let raw: Vec<f64> = (0..nx).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let v = (0..nx).map(|_| rng.random_range(-5.0..5.0)).collect();
    let logits = Matrix::from_vec(
        nx,
        na,
        (0..nx * na).map(|_| rng.random_range(-2.0..2.0)).collect(),
    );
    (env, weights, v, logits)
}

fn proposition() -> Result<Vec<PropertyResult>> {
    let mut tally = Tally::new("SAC and RTAC policy gradients agree", 1e-6);
    for seed in 0..100 {
        let (env, weights, v, logits) = proposition_instance(seed);
        let alpha = 0.05 + 0.5 * (seed % 7) as f64 / 7.0;
        tally.record(
            policy_gradient_discrepancy(&env, &weights, &v, &logits, alpha, 0.99),
            true,
        );
    }
    Ok(vec![tally.finish()])
}

/// A small agent with random weights, Pop-Art statistics and minibatch.
fn gradient_config(kind: AgentKind, seed: u64) -> Result<(Agent, Prepared)> {
    let mut rng = seeded(seed);
    let da = rng.random_range(1..=2);
    let obs = da + rng.random_range(1..=4);
    let hidden = vec![rng.random_range(3..=8), rng.random_range(3..=8)];
    let hp = Hyperparameters {
        hidden,
        beta: rng.random_range(0.05..0.95),
        entropy_scale: rng.random_range(0.1..2.0),
        ..Hyperparameters::default()
    };
    let mut agent = Agent::new(kind, obs, da, hp, seed)?;
    let mean = rng.random_range(-20.0..20.0);
    let sd: f64 = rng.random_range(0.5..10.0);
    agent.popart = PopArt {
        mean,
        second_moment: mean * mean + sd * sd,
        alpha: 0.05,
    };
    let n = rng.random_range(2..=6);
    let mut u = |k: usize| {
        (0..k)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let records: Vec<ReplayRecord> = (0..n)
        .map(|i| ReplayRecord {
            state: u(obs),
            action: u(da),
            reward: 5.0 * u(1)[0],
            next_state: u(obs),
            terminal: i == n - 1,
        })
        .collect();
    let prep = agent.prepare(Batch::from_records(&records))?;
    Ok((agent, prep))
}

fn gradients() -> Result<Vec<PropertyResult>> {
    type Pick = fn(&Losses) -> Var;
    let picks: [(&str, Pick); 3] = [
        ("policy", |l| l.policy),
        ("value", |l| l.value),
        ("total", |l| l.total),
    ];
    let mut out = Vec::new();
    for kind in AgentKind::ALL {
        for (name, pick) in picks {
            let mut worst = 0.0f64;
            let mut ok = true;
            for seed in 0..INSTANCES as u64 {
                let (agent, prep) = gradient_config(kind, 1_000 * seed + 17)?;
                let frozen = agent.theta.values.clone();
                let eval = |theta: &[f64]| {
                    let mut tape = Tape::new();
                    let l = agent.losses(&mut tape, theta, &frozen, &prep);
                    tape.scalar(pick(&l))
                };
                let mut tape = Tape::new();
                let l = agent.losses(&mut tape, &agent.theta.values, &frozen, &prep);
                let grad = tape.gradient(pick(&l), agent.theta.len())?;
                let report = finite_difference_check(eval, &grad, &agent.theta.values, 1e-5, 1e-4);
                worst = worst.max(report.max_relative_error);
                ok &= report.passed;
            }
            out.push(PropertyResult {
                property: format!("{kind} {name} loss gradient"),
                instances: INSTANCES,
                max_residual: worst,
                tolerance: 1e-4,
                passed: ok,
            });
        }
    }
    Ok(out)
}

fn popart() -> Result<Vec<PropertyResult>> {
    let mut rng = seeded(77);
    let mut preserve = Tally::new("de-normalized outputs preserved by updates", 1e-8);
    for arch in [Architecture::Merged, Architecture::Separate] {
        let net = Network::new(NetworkSpec {
            input_dim: 4,
            action_dim: 2,
            hidden: vec![16, 16],
            architecture: arch,
        });
        let mut theta = net.init(&mut rng);
        let heads = net.value_heads();
        let probes = Matrix::from_vec(
            100,
            4,
            (0..400).map(|_| rng.random_range(-2.0..2.0)).collect(),
        );
        let mut pa = PopArt::default();
        let mut before = net.forward(&theta, &probes, &pa)?.denormalized;
        for t in 0..10_000 {
            // drifting, occasionally jumping synthetic targets
            let level = if t < 5_000 { -50.0 } else { 200.0 };
            let targets: Vec<f64> = (0..8)
                .map(|_| level + 30.0 * rng.random_range(-1.0..1.0))
                .collect();
            pa.update(&targets, &heads, &mut [&mut theta.values]);
            let after = net.forward(&theta, &probes, &pa)?.denormalized;
            let worst = before
                .data
                .iter()
                .zip(&after.data)
                .map(|(b, a)| (b - a).abs())
                .fold(0.0, f64::max);
            preserve.record(worst, true);
            before = after;
        }
    }
    let mut limit = Tally::new(
        "constant target stream reaches mean c and the scale floor",
        1e-6,
    );
    for c in [-3.0, 0.5, 40.0] {
        let mut pa = PopArt::new(0.01);
        for _ in 0..10_000 {
            pa.update(&[c], &[], &mut []);
        }
        let floor_gap = pa.scale() - crate::nn::popart::SCALE_FLOOR;
        limit.record((pa.mean - c).abs().max(floor_gap), true);
    }
    Ok(vec![preserve.finish(), limit.finish()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_none() {
        assert!(run_suite("theorem3").is_none());
    }

    #[test]
    fn fast_suites_pass() {
        for name in ["theorem1", "theorem2", "lemmas", "popart"] {
            let report = run_suite(name).unwrap().unwrap();
            assert!(report.passed(), "{report:?}");
            assert!(report.properties.iter().all(|p| p.instances > 0));
        }
    }
}
