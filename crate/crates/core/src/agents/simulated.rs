//! Random-utility chooser: `U_j = x_j'β + ε_j`, pick the argmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel};
use serde::{Deserialize, Serialize};

use crate::beta::Coefficients;
use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, ChoiceSet, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    /// i.i.d. standard Gumbel errors; choice probabilities are the logit softmax.
    #[default]
    Gumbel,
    /// Deterministic argmax, ties to the lowest index.
    None,
}

impl Noise {
    pub fn as_str(self) -> &'static str {
        match self {
            Noise::Gumbel => "gumbel",
            Noise::None => "none",
        }
    }
}

/// Deterministic part of the utility. The reference level contributes zero.
pub fn utility(profile: &Profile, schema: &AttributeSchema, beta: &[f64]) -> f64 {
    let mut offset = 0;
    let mut u = 0.0;
    for (attr, &lvl) in schema.attributes.iter().zip(&profile.levels) {
        if lvl != attr.reference_level() {
            u += beta[offset + lvl];
        }
        offset += attr.levels.len() - 1;
    }
    u
}

pub fn simulate_choice<R: Rng + ?Sized>(
    set: &ChoiceSet,
    schema: &AttributeSchema,
    beta: &Coefficients,
    noise: Noise,
    rng: &mut R,
) -> Result<usize> {
    if beta.len() != schema.n_parameters() {
        return Err(Error::BetaMismatch(format!(
            "expected {} coefficients, got {}",
            schema.n_parameters(),
            beta.len()
        )));
    }
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
    let mut best = 0;
    let mut best_u = f64::NEG_INFINITY;
    for (j, p) in set.profiles.iter().enumerate() {
        p.validate(schema)?;
        let mut u = utility(p, schema, beta.as_slice());
        if noise == Noise::Gumbel {
            u += gumbel.sample(rng);
        }
        if u > best_u {
            best = j;
            best_u = u;
        }
    }
    Ok(best)
}

/// Each set gets its own ChaCha stream (`seed`, stream = set id), so a
/// resumed run draws exactly what an uninterrupted one would.
#[derive(Debug, Clone)]
pub struct SimulatedAgent {
    beta: Coefficients,
    noise: Noise,
    seed: u64,
}

impl SimulatedAgent {
    pub fn new(beta: Coefficients, noise: Noise, seed: u64) -> Self {
        SimulatedAgent { beta, noise, seed }
    }

    pub fn rng_for(&self, set_id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(set_id);
        rng
    }

    pub fn choose(&self, set: &ChoiceSet, schema: &AttributeSchema) -> Result<usize> {
        simulate_choice(set, schema, &self.beta, self.noise, &mut self.rng_for(set.id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema3() -> AttributeSchema {
        AttributeSchema::from_json_str(
            r#"{"attributes":[{"name":"X","levels":["A","B","C"]},{"name":"Y","levels":["P","Q"]}]}"#,
        )
        .unwrap()
    }

    fn softmax(u: &[f64]) -> Vec<f64> {
        let m = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = u.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    #[test]
    fn utility_uses_dummy_coding() {
        let s = schema3();
        let beta = [1.5, -0.5, 2.0];
        assert_eq!(utility(&Profile { levels: vec![0, 0] }, &s, &beta), 3.5);
        assert_eq!(utility(&Profile { levels: vec![1, 1] }, &s, &beta), -0.5);
        assert_eq!(utility(&Profile { levels: vec![2, 1] }, &s, &beta), 0.0);
    }

    #[test]
    fn deterministic_argmax_breaks_ties_low() {
        let s = schema3();
        let beta = Coefficients::from_vec(&s, vec![1.0, 0.0, 0.0]).unwrap();
        let set = ChoiceSet::new(
            0,
            vec![Profile { levels: vec![1, 0] }, Profile { levels: vec![2, 0] }],
            &s,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(simulate_choice(&set, &s, &beta, Noise::None, &mut rng).unwrap(), 0);
        let set = ChoiceSet::new(
            0,
            vec![Profile { levels: vec![2, 0] }, Profile { levels: vec![0, 0] }],
            &s,
        )
        .unwrap();
        assert_eq!(simulate_choice(&set, &s, &beta, Noise::None, &mut rng).unwrap(), 1);
        let short = Coefficients::from_vec(&schema3(), vec![0.0; 3]).unwrap();
        let other = AttributeSchema::from_json_str(r#"{"attributes":[{"name":"X","levels":["A","B"]}]}"#).unwrap();
        let set1 = ChoiceSet::new(
            0,
            vec![Profile { levels: vec![0] }, Profile { levels: vec![1] }],
            &other,
        )
        .unwrap();
        assert!(matches!(
            simulate_choice(&set1, &other, &short, Noise::None, &mut rng),
            Err(Error::BetaMismatch(_))
        ));
    }

    #[test]
    fn gumbel_argmax_matches_softmax_frequencies() {
        // Closed-form softmax vs 10^5 draws on a fixed three-profile set.
        let s = schema3();
        let beta = Coefficients::from_vec(&s, vec![0.8, -0.4, 0.3]).unwrap();
        let set = ChoiceSet::new(
            0,
            vec![
                Profile { levels: vec![0, 1] },
                Profile { levels: vec![1, 0] },
                Profile { levels: vec![2, 0] },
            ],
            &s,
        )
        .unwrap();
        let u: Vec<f64> = set.profiles.iter().map(|p| utility(p, &s, beta.as_slice())).collect();
        let p = softmax(&u);
        let n = 100_000;
        let mut counts = [0usize; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..n {
            counts[simulate_choice(&set, &s, &beta, Noise::Gumbel, &mut rng).unwrap()] += 1;
        }
        for j in 0..3 {
            let freq = counts[j] as f64 / n as f64;
            let sd = (p[j] * (1.0 - p[j]) / n as f64).sqrt();
            assert!((freq - p[j]).abs() < 3.0 * sd, "j={j} freq={freq} p={}", p[j]);
        }
    }

    #[test]
    fn gumbel_sampling_matches_direct_categorical_sampling() {
        // Same set, two samplers: Gumbel-argmax and inverse-CDF on the softmax.
        let s = schema3();
        let beta = Coefficients::from_vec(&s, vec![-1.0, 0.5, 1.2]).unwrap();
        let set = ChoiceSet::new(
            0,
            vec![
                Profile { levels: vec![0, 0] },
                Profile { levels: vec![1, 1] },
                Profile { levels: vec![2, 0] },
            ],
            &s,
        )
        .unwrap();
        let u: Vec<f64> = set.profiles.iter().map(|p| utility(p, &s, beta.as_slice())).collect();
        let p = softmax(&u);
        let n = 60_000;
        let mut a = [0f64; 3];
        let mut b = [0f64; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..n {
            a[simulate_choice(&set, &s, &beta, Noise::Gumbel, &mut rng).unwrap()] += 1.0;
            let r: f64 = rng.random();
            let j = if r < p[0] {
                0
            } else if r < p[0] + p[1] {
                1
            } else {
                2
            };
            b[j] += 1.0;
        }
        for j in 0..3 {
            let sd = (2.0 * p[j] * (1.0 - p[j]) / n as f64).sqrt();
            assert!(((a[j] - b[j]) / n as f64).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn per_set_streams_are_reproducible() {
        let s = schema3();
        let agent = SimulatedAgent::new(Coefficients::zeros(&s), Noise::Gumbel, 5);
        let set = ChoiceSet::new(
            9,
            vec![Profile { levels: vec![0, 0] }, Profile { levels: vec![1, 1] }],
            &s,
        )
        .unwrap();
        let first: Vec<usize> = (0..20).map(|_| agent.choose(&set, &s).unwrap()).collect();
        assert!(first.iter().all(|&c| c == first[0]));
    }
}
