//! Factors of variation: named knobs a world exposes (geometry, physics,
//! task endpoints), sampled at reset and held fixed for the episode.
//!
//! Every factor draws from its own substream keyed by the factor name, so
//! pinning one factor never shifts what another one samples.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::core::RandomStream;

use super::WorldError;

/// Applied factor values for one episode, keyed by dot-path name.
pub type FactorValues = BTreeMap<String, Vec<f64>>;

#[derive(Clone, Debug)]
pub enum FactorKind {
    /// Axis-aligned box; sampled uniformly per dimension.
    Box { low: Vec<f64>, high: Vec<f64> },
    /// Finite value set; sampled uniformly.
    Discrete { choices: Vec<Vec<f64>> },
    /// Not sampleable; always the default.
    Fixed,
}

#[derive(Clone, Debug)]
pub struct FactorSpec {
    pub key: String,
    pub kind: FactorKind,
    pub default: Vec<f64>,
}

impl FactorSpec {
    pub fn boxed(key: &str, low: Vec<f64>, high: Vec<f64>, default: Vec<f64>) -> Self {
        let spec = Self {
            key: key.to_string(),
            kind: FactorKind::Box { low, high },
            default,
        };
        debug_assert!(spec.admits(&spec.default), "default outside bounds for {key}");
        spec
    }

    pub fn discrete(key: &str, choices: Vec<Vec<f64>>, default: Vec<f64>) -> Self {
        let spec = Self {
            key: key.to_string(),
            kind: FactorKind::Discrete { choices },
            default,
        };
        debug_assert!(spec.admits(&spec.default), "default outside value set for {key}");
        spec
    }

    pub fn fixed(key: &str, value: Vec<f64>) -> Self {
        Self {
            key: key.to_string(),
            kind: FactorKind::Fixed,
            default: value,
        }
    }

    pub fn dim(&self) -> usize {
        self.default.len()
    }

    /// Whether a value is inside the factor's bounds / value set.
    pub fn admits(&self, value: &[f64]) -> bool {
        if value.len() != self.dim() {
            return false;
        }
        match &self.kind {
            FactorKind::Box { low, high } => value
                .iter()
                .zip(low.iter().zip(high))
                .all(|(v, (lo, hi))| v.is_finite() && *v >= *lo && *v <= *hi),
            FactorKind::Discrete { choices } => choices.iter().any(|c| c.as_slice() == value),
            FactorKind::Fixed => value == self.default.as_slice(),
        }
    }

    fn sample(&self, rng: &mut RandomStream) -> Vec<f64> {
        match &self.kind {
            FactorKind::Box { low, high } => low
                .iter()
                .zip(high)
                .map(|(lo, hi)| rng.uniform_in(*lo, *hi))
                .collect(),
            FactorKind::Discrete { choices } => choices[rng.choice(choices.len())].clone(),
            FactorKind::Fixed => self.default.clone(),
        }
    }
}

/// Rejection predicate over a full factor assignment.
#[derive(Clone)]
pub struct Constraint {
    pub name: &'static str,
    /// Keys the predicate reads; if the caller pins them all, the check is
    /// skipped (explicit values win over the sampling-time rule).
    pub keys: Vec<&'static str>,
    pub check: Arc<dyn Fn(&FactorValues) -> bool + Send + Sync>,
}

impl std::fmt::Debug for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Constraint")
            .field("name", &self.name)
            .field("keys", &self.keys)
            .finish()
    }
}

pub const DEFAULT_RETRIES: usize = 100;

#[derive(Clone, Debug)]
pub struct VariationSpace {
    factors: Vec<FactorSpec>,
    constraint: Option<Constraint>,
}

impl VariationSpace {
    pub fn new(factors: Vec<FactorSpec>) -> Self {
        let mut seen = std::collections::BTreeSet::new();
        for f in &factors {
            assert!(seen.insert(f.key.clone()), "duplicate factor key {}", f.key);
        }
        Self {
            factors,
            constraint: None,
        }
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = Some(constraint);
        self
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn constraint(&self) -> Option<&Constraint> {
        self.constraint.as_ref()
    }

    pub fn get(&self, key: &str) -> Option<&FactorSpec> {
        self.factors.iter().find(|f| f.key == key)
    }

    pub fn defaults(&self) -> FactorValues {
        self.factors
            .iter()
            .map(|f| (f.key.clone(), f.default.clone()))
            .collect()
    }
}

/// Which factors to sample at reset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum VariationRequest {
    /// Defaults only.
    #[default]
    None,
    Keys(Vec<String>),
    All,
}

#[derive(Clone, Debug, Default)]
pub struct ResetOptions {
    pub variation: VariationRequest,
    /// Pinned values; take precedence over sampling and defaults.
    pub values: FactorValues,
}

impl ResetOptions {
    pub fn sample_all() -> Self {
        Self {
            variation: VariationRequest::All,
            values: FactorValues::new(),
        }
    }

    pub fn pin(mut self, key: &str, value: Vec<f64>) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn sample_keys(keys: &[&str]) -> Self {
        Self {
            variation: VariationRequest::Keys(keys.iter().map(|k| k.to_string()).collect()),
            values: FactorValues::new(),
        }
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Assemble the factor values for one episode: defaults, overridden by
/// sampled values for the requested keys, overridden by pinned values.
/// The constraint is enforced by resampling (up to [`DEFAULT_RETRIES`]).
pub fn sample_variation(
    space: &VariationSpace,
    rng: &RandomStream,
    options: &ResetOptions,
) -> Result<FactorValues, WorldError> {
    for (key, value) in &options.values {
        let spec = space.get(key).ok_or_else(|| WorldError::UnknownFactor {
            key: key.clone(),
        })?;
        if value.len() != spec.dim() {
            return Err(WorldError::FactorDimMismatch {
                key: key.clone(),
                expected: spec.dim(),
                found: value.len(),
            });
        }
        if !spec.admits(value) {
            return Err(WorldError::ValueOutOfBounds { key: key.clone() });
        }
    }

    let requested: Vec<&FactorSpec> = match &options.variation {
        VariationRequest::None => Vec::new(),
        VariationRequest::All => space.factors().iter().collect(),
        VariationRequest::Keys(keys) => keys
            .iter()
            .map(|key| {
                space.get(key).ok_or_else(|| WorldError::UnknownFactor {
                    key: key.clone(),
                })
            })
            .collect::<Result<_, _>>()?,
    };
    // pins win over sampling
    let sampled: Vec<&FactorSpec> = requested
        .into_iter()
        .filter(|f| !options.values.contains_key(&f.key))
        .collect();

    let mut values = space.defaults();
    for (key, value) in &options.values {
        values.insert(key.clone(), value.clone());
    }

    let constraint = space.constraint().filter(|c| {
        !c.keys.iter().all(|k| options.values.contains_key(*k))
    });

    let attempts = if sampled.is_empty() { 1 } else { DEFAULT_RETRIES };
    for attempt in 0..attempts as u64 {
        for spec in &sampled {
            let mut sub = rng.split(fnv1a(spec.key.as_bytes())).split(attempt);
            values.insert(spec.key.clone(), spec.sample(&mut sub));
        }
        match constraint {
            Some(c) if !(c.check)(&values) => continue,
            _ => return Ok(values),
        }
    }
    Err(WorldError::ConstraintExhausted {
        name: space.constraint().map(|c| c.name).unwrap_or("constraint"),
        retries: attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_rng;

    fn demo_space() -> VariationSpace {
        VariationSpace::new(vec![
            FactorSpec::boxed("agent.start", vec![0.0, 0.0], vec![1.0, 1.0], vec![0.2, 0.5]),
            FactorSpec::boxed("physics.drag", vec![0.0], vec![0.3], vec![0.1]),
            FactorSpec::discrete(
                "layout.seed",
                (0..4).map(|i| vec![i as f64]).collect(),
                vec![0.0],
            ),
            FactorSpec::fixed("physics.dt", vec![0.1]),
        ])
    }

    #[test]
    fn empty_options_yield_defaults() {
        let space = demo_space();
        let rng = make_rng(1);
        let values = sample_variation(&space, &rng, &ResetOptions::default()).unwrap();
        assert_eq!(values, space.defaults());
    }

    #[test]
    fn pins_pass_through_verbatim_including_bound_endpoints() {
        let space = demo_space();
        let rng = make_rng(2);
        let options = ResetOptions::default()
            .pin("agent.start", vec![1.0, 0.0])
            .pin("physics.drag", vec![0.3]);
        let values = sample_variation(&space, &rng, &options).unwrap();
        assert_eq!(values["agent.start"], vec![1.0, 0.0]);
        assert_eq!(values["physics.drag"], vec![0.3]);
    }

    #[test]
    fn bad_pins_are_rejected() {
        let space = demo_space();
        let rng = make_rng(3);
        let unknown = ResetOptions::default().pin("goal.position", vec![0.5, 0.5]);
        assert!(matches!(
            sample_variation(&space, &rng, &unknown),
            Err(WorldError::UnknownFactor { .. })
        ));
        let outside = ResetOptions::default().pin("physics.drag", vec![0.31]);
        assert!(matches!(
            sample_variation(&space, &rng, &outside),
            Err(WorldError::ValueOutOfBounds { .. })
        ));
        let wrong_dim = ResetOptions::default().pin("agent.start", vec![0.5]);
        assert!(matches!(
            sample_variation(&space, &rng, &wrong_dim),
            Err(WorldError::FactorDimMismatch { .. })
        ));
        let not_a_choice = ResetOptions::default().pin("layout.seed", vec![2.5]);
        assert!(matches!(
            sample_variation(&space, &rng, &not_a_choice),
            Err(WorldError::ValueOutOfBounds { .. })
        ));
    }

    #[test]
    fn unknown_requested_key_is_rejected() {
        let space = demo_space();
        let rng = make_rng(4);
        let options = ResetOptions {
            variation: VariationRequest::Keys(vec!["no.such".into()]),
            values: FactorValues::new(),
        };
        assert!(matches!(
            sample_variation(&space, &rng, &options),
            Err(WorldError::UnknownFactor { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_within_bounds() {
        let space = demo_space();
        let rng = make_rng(5);
        let a = sample_variation(&space, &rng, &ResetOptions::sample_all()).unwrap();
        let b = sample_variation(&space, &rng, &ResetOptions::sample_all()).unwrap();
        assert_eq!(a, b);
        for seed in 0..1000u64 {
            let rng = make_rng(seed);
            let values = sample_variation(&space, &rng, &ResetOptions::sample_all()).unwrap();
            for spec in space.factors() {
                assert!(spec.admits(&values[&spec.key]), "{} got {:?}", spec.key, values[&spec.key]);
            }
        }
    }

    #[test]
    fn pinning_one_factor_does_not_shift_anothers_draw() {
        let space = demo_space();
        let rng = make_rng(6);
        let free = sample_variation(&space, &rng, &ResetOptions::sample_all()).unwrap();
        let pinned = sample_variation(
            &space,
            &rng,
            &ResetOptions {
                variation: VariationRequest::All,
                values: FactorValues::new(),
            }
            .pin("agent.start", vec![0.9, 0.9]),
        )
        .unwrap();
        assert_eq!(free["physics.drag"], pinned["physics.drag"]);
        assert_eq!(free["layout.seed"], pinned["layout.seed"]);
        assert_eq!(pinned["agent.start"], vec![0.9, 0.9]);
    }

    #[test]
    fn fixed_factors_stay_at_their_value_even_when_requested() {
        let space = demo_space();
        let rng = make_rng(7);
        let options = ResetOptions::sample_keys(&["physics.dt"]);
        let values = sample_variation(&space, &rng, &options).unwrap();
        assert_eq!(values["physics.dt"], vec![0.1]);
    }

    #[test]
    fn constraints_are_enforced_by_resampling() {
        let space = demo_space().with_constraint(Constraint {
            name: "start in the left half",
            keys: vec!["agent.start"],
            check: Arc::new(|v: &FactorValues| v["agent.start"][0] < 0.5),
        });
        for seed in 0..10_000u64 {
            let rng = make_rng(seed);
            let values = sample_variation(&space, &rng, &ResetOptions::sample_all()).unwrap();
            assert!(values["agent.start"][0] < 0.5);
        }
    }

    #[test]
    fn impossible_constraints_error_with_the_constraint_name() {
        let space = demo_space().with_constraint(Constraint {
            name: "never satisfiable",
            keys: vec!["agent.start"],
            check: Arc::new(|_| false),
        });
        let rng = make_rng(8);
        match sample_variation(&space, &rng, &ResetOptions::sample_all()) {
            Err(WorldError::ConstraintExhausted { name, retries }) => {
                assert_eq!(name, "never satisfiable");
                assert_eq!(retries, DEFAULT_RETRIES);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn fully_pinned_constraint_keys_skip_the_check() {
        let space = demo_space().with_constraint(Constraint {
            name: "start in the left half",
            keys: vec!["agent.start"],
            check: Arc::new(|v: &FactorValues| v["agent.start"][0] < 0.5),
        });
        let rng = make_rng(9);
        // the pin violates the rule, but pinning every involved key wins
        let options = ResetOptions::default().pin("agent.start", vec![0.9, 0.9]);
        let values = sample_variation(&space, &rng, &options).unwrap();
        assert_eq!(values["agent.start"], vec![0.9, 0.9]);
    }

    #[test]
    fn discrete_factors_sample_every_choice() {
        let space = demo_space();
        let mut counts = [0usize; 4];
        for seed in 0..400u64 {
            let rng = make_rng(seed);
            let values =
                sample_variation(&space, &rng, &ResetOptions::sample_keys(&["layout.seed"])).unwrap();
            counts[values["layout.seed"][0] as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c > 50), "counts {counts:?}");
    }
}
