//! Oracle suites behind `spectral-rl verify`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{n_step_return, popart_preserve};
use crate::codec::{decompose, max_representable, reconstruct, CodecConfig};
use crate::env::generate_tabular_mdp;
use crate::nn::gradcheck::{check_split_signal, check_weighted_loss};
use crate::nn::Mlp;
use crate::tabular_rl::{check_equivalence, LearnerParams};
use crate::transforms::{squash, unsquash, RunningStats, SquashConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Codec,
    Prop1,
    Gradients,
    Popart,
    Squash,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}/{}: {}", self.suite, self.name, self.detail)
    }
}

fn check(suite: &'static str, name: &str, passed: bool, detail: String) -> Check {
    Check {
        suite,
        name: name.to_string(),
        passed,
        detail,
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Codec => codec_suite(),
        Suite::Prop1 => prop1_suite(),
        Suite::Gradients => gradient_suite(),
        Suite::Popart => popart_suite(),
        Suite::Squash => squash_suite(),
        Suite::All => [codec_suite(), prop1_suite(), gradient_suite(), popart_suite(), squash_suite()].concat(),
    }
}

/// Discounted per-frequency returns of a reward stream.
pub fn spectral_returns(rewards: &[f64], gamma: f64, codec: &CodecConfig) -> crate::Result<Vec<f64>> {
    let decomposed = rewards.iter().map(|&r| decompose(r, codec)).collect::<crate::Result<Vec<_>>>()?;
    Ok((0..codec.num_components())
        .map(|i| n_step_return(decomposed.iter().map(|v| v[i]), gamma, None))
        .collect())
}

fn codec_suite() -> Vec<Check> {
    const S: &str = "codec";
    let mut out = Vec::new();
    let b2n3 = CodecConfig::new(2.0, 3).expect("valid");
    let b2n20 = CodecConfig::default();
    let cases: [(f64, [f64; 4]); 3] = [
        (6.5, [1.0, 1.0, 0.875, 0.0]),
        (11.0, [1.0, 1.0, 1.0, 0.5]),
        (-10.0, [-1.0, -1.0, -1.0, -0.375]),
    ];
    for (r, want) in cases {
        let got = decompose(r, &b2n20).expect("in range");
        let ok = got.components()[..4] == want && got.components()[4..].iter().all(|&c| c == 0.0);
        out.push(check(S, &format!("decompose({r})"), ok, format!("{:?}", &got.components()[..5])));
    }
    let v = decompose(6.5, &b2n3).expect("in range");
    out.push(check(S, "reconstruct(6.5)", reconstruct(&v, &b2n3) == 6.5, format!("{}", reconstruct(&v, &b2n3))));

    let returns = spectral_returns(&[1.0, 4.0, 11.0, -4.0, -10.0], 0.99, &b2n3).expect("in range");
    let want = [1.039, 0.039, 0.024, 0.130];
    let rounded_ok = returns.iter().zip(want).all(|(g, w)| (g * 1000.0).round() / 1000.0 == w);
    out.push(check(S, "worked example spectral returns", rounded_ok, format!("{returns:.4?}")));
    let sum = reconstruct(&crate::codec::SpectralVector::from_components(returns), &b2n3);
    out.push(check(S, "worked example weighted sum", (sum - 2.254).abs() <= 1e-3, format!("{sum:.5}")));

    for (n, want) in [(0usize, 1.0), (3, 15.0), (20, 2_097_151.0)] {
        let got = max_representable(&CodecConfig::new(2.0, n).expect("valid"));
        out.push(check(S, &format!("max_representable(N={n})"), got == want, format!("{got}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let r: f64 = rng.gen_range(-1e6..=1e6);
        let back = reconstruct(&decompose(r, &b2n20).expect("in range"), &b2n20);
        worst = worst.max((back - r).abs() / r.abs().max(1.0));
    }
    out.push(check(S, "round trip 1e5 draws", worst <= 1e-9, format!("max rel err {worst:.2e}")));
    out
}

fn prop1_suite() -> Vec<Check> {
    let codec = CodecConfig::new(2.0, 3).expect("valid");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..20)
        .map(|k| {
            let states = rng.gen_range(2..=10);
            let actions = rng.gen_range(2..=4);
            let mdp = generate_tabular_mdp(states, actions, 15.0, k).expect("valid sizes");
            let report = check_equivalence(&mdp, 10_000, k, &codec, LearnerParams::default());
            check(
                "prop1",
                &format!("mdp {k} ({states}x{actions})"),
                report.holds(1e-8),
                format!(
                    "max deviation {:.2e}, identical actions {}",
                    report.max_deviation, report.actions_identical
                ),
            )
        })
        .collect()
}

fn gradient_suite() -> Vec<Check> {
    let mut worst = 0.0f64;
    let mut params = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..100u64 {
        let hidden = rng.gen_range(3..=8);
        let sizes = if seed % 2 == 0 {
            vec![2, hidden, 6]
        } else {
            vec![3, hidden, hidden, 4]
        };
        for report in [
            check_weighted_loss(&sizes, 4, seed, 1e-5),
            check_split_signal(&sizes, 4, seed, 1e-5),
        ] {
            worst = worst.max(report.max_relative_error);
            params += report.params_checked;
        }
    }
    vec![check(
        "gradients",
        "finite differences (100 nets)",
        worst <= 1e-4,
        format!("max rel err {worst:.2e} over {params} parameters"),
    )]
}

/// Random stats pair for the preservation oracle.
fn random_stats(rng: &mut ChaCha8Rng) -> RunningStats {
    let mean = rng.gen_range(-100.0..100.0);
    let sigma: f64 = 10f64.powf(rng.gen_range(-2.0..3.0));
    RunningStats::with_moments(mean, mean * mean + sigma * sigma, 1e-3, 1e-4).expect("valid")
}

/// Worst relative change of denormalized outputs after a preserve step.
pub fn popart_preservation_error(seed: u64, inputs: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::new(&[5, 16, 16, 3], false, &mut rng).expect("valid sizes");
    let old = random_stats(&mut rng);
    let batch: Vec<f64> = (0..rng.gen_range(1..64)).map(|_| rng.gen_range(-1e4..1e4)).collect();
    let new = RunningStats::with_moments(old.mean(), old.second_moment(), rng.gen_range(0.01..=1.0), 1e-4)
        .expect("valid")
        .updated(&batch);
    let xs: Vec<Vec<f64>> = (0..inputs).map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let before: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| net.forward(x).expect("shape").iter().map(|&z| old.denormalize(z)).collect())
        .collect();
    popart_preserve(net.final_layer_mut(), &old, &new);
    let mut worst = 0.0f64;
    for (x, b) in xs.iter().zip(&before) {
        for (z, want) in net.forward(x).expect("shape").iter().zip(b) {
            worst = worst.max((new.denormalize(*z) - want).abs() / want.abs().max(1.0));
        }
    }
    worst
}

fn popart_suite() -> Vec<Check> {
    let worst = (0..20).map(|s| popart_preservation_error(s, 100)).fold(0.0, f64::max);
    vec![check(
        "popart",
        "output preservation (20 nets x 100 inputs)",
        worst <= 1e-9,
        format!("max rel change {worst:.2e}"),
    )]
}

fn squash_suite() -> Vec<Check> {
    const S: &str = "squash";
    let cfg = SquashConfig::default();
    let mut out = vec![
        check(S, "h(0)", squash(0.0, &cfg) == 0.0, format!("{}", squash(0.0, &cfg))),
        check(S, "h(3)", (squash(3.0, &cfg) - 1.03).abs() < 1e-12, format!("{}", squash(3.0, &cfg))),
        check(S, "h(-3)", (squash(-3.0, &cfg) + 1.03).abs() < 1e-12, format!("{}", squash(-3.0, &cfg))),
        check(S, "h^-1(1.03)", (unsquash(1.03, &cfg) - 3.0).abs() < 1e-12, format!("{}", unsquash(1.03, &cfg))),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let y: f64 = rng.gen_range(-1e6..=1e6);
        worst = worst.max((squash(unsquash(y, &cfg), &cfg) - y).abs() / y.abs().max(1.0));
    }
    out.push(check(S, "inverse 1e5 draws", worst <= 1e-9, format!("max rel err {worst:.2e}")));
    out
}
