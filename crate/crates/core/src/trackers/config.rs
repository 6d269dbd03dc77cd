use super::{
    CountMinSketch, CountMinTracker, DsacTracker, ExactCounter, LossyCounting, MintTracker,
    MitigationPolicy, NullTracker, ParaTracker, PrideTracker, ReservoirMode, ReservoirTracker,
    SpaceSavingTracker, StickySampling, Tracker, TrackerError,
};
use crate::ini::{ConfigError, Section};
use crate::rng::derive_seed;
use crate::sim::ThresholdRule;
use crate::timing::{BankGeometry, TimingParams};

/// Everything a tracker needs to size itself for an experiment point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildContext {
    pub timing: TimingParams,
    pub geometry: BankGeometry,
    pub rh_th: u64,
    pub rule: ThresholdRule,
    pub mitigations_per_ref: usize,
}

impl BuildContext {
    pub fn new(timing: TimingParams, rh_th: u64) -> Self {
        Self {
            timing,
            geometry: BankGeometry::default(),
            rh_th,
            rule: ThresholdRule::Quarter,
            mitigations_per_ref: 1,
        }
    }

    /// The eps*N target T.
    pub fn target_threshold(&self) -> u64 {
        self.rule.threshold(self.rh_th)
    }

    /// `ceil(N / T)`: the table size giving eps*N = T.
    pub fn default_capacity(&self) -> usize {
        self.timing
            .max_stream_len()
            .div_ceil(self.target_threshold())
            .max(1) as usize
    }

    pub fn default_epsilon(&self) -> f64 {
        let n = self.timing.max_stream_len().max(1) as f64;
        (self.target_threshold() as f64 / n).min(0.49)
    }
}

/// Post-mitigation policy as written in a config; `graphene` without a
/// threshold takes T from the build context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicySpec {
    Fixed(MitigationPolicy),
    GrapheneDefault,
}

impl PolicySpec {
    pub fn parse(text: &str) -> Option<Self> {
        let policy = match text {
            "reset_zero" => MitigationPolicy::ResetZero,
            "decrement_to_min" => MitigationPolicy::DecrementToMin,
            "keep" => MitigationPolicy::Keep,
            "invalidate" => MitigationPolicy::Invalidate,
            "reset_to_one" => MitigationPolicy::ResetToOne,
            "graphene" => return Some(Self::GrapheneDefault),
            other => {
                let t = other.strip_prefix("graphene:")?.trim().parse().ok()?;
                MitigationPolicy::GrapheneMultiple(t)
            }
        };
        Some(Self::Fixed(policy))
    }

    pub fn resolve(self, ctx: &BuildContext) -> MitigationPolicy {
        match self {
            Self::Fixed(p) => p,
            Self::GrapheneDefault => MitigationPolicy::GrapheneMultiple(ctx.target_threshold()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackerKind {
    Null,
    SpaceSaving {
        capacity: Option<usize>,
        policy: PolicySpec,
    },
    Dsac {
        capacity: Option<usize>,
        invalidate: bool,
        stochastic: bool,
        reset_to_one: bool,
        fallback: PolicySpec,
    },
    CountMin {
        width: usize,
        depth: usize,
        threshold: Option<u64>,
    },
    Lossy {
        epsilon: Option<f64>,
    },
    Sticky {
        epsilon: Option<f64>,
        delta: f64,
    },
    Reservoir {
        k: Option<usize>,
        mode: ReservoirMode,
    },
    Mint {
        k: Option<usize>,
        max_slots: Option<usize>,
    },
    Pride {
        capacity: usize,
        p: f64,
    },
    Para {
        p: f64,
    },
    Exact {
        threshold: Option<u64>,
    },
}

/// A named tracker configuration. Unset sizes default from the build
/// context; an unset seed is derived from the run seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerSpec {
    pub label: String,
    pub kind: TrackerKind,
    pub seed: Option<u64>,
}

fn policy_key(section: &Section, default: PolicySpec) -> Result<PolicySpec, ConfigError> {
    match section.get("policy") {
        None => Ok(default),
        Some(e) => PolicySpec::parse(&e.value).ok_or_else(|| {
            section.field_error(
                "policy",
                format!(
                    "unknown policy {:?} (reset_zero, decrement_to_min, keep, graphene[:T], invalidate, reset_to_one)",
                    e.value
                ),
            )
        }),
    }
}

impl TrackerSpec {
    pub fn new(label: impl Into<String>, kind: TrackerKind) -> Self {
        Self {
            label: label.into(),
            kind,
            seed: None,
        }
    }

    pub fn from_section(label: &str, section: &Section) -> Result<Self, ConfigError> {
        let kind_name: String = section.require("kind")?;
        let (kind, keys): (TrackerKind, &[&str]) = match kind_name.as_str() {
            "null" => (TrackerKind::Null, &[]),
            "space_saving" => (
                TrackerKind::SpaceSaving {
                    capacity: section.parse("capacity")?,
                    policy: policy_key(
                        section,
                        PolicySpec::Fixed(MitigationPolicy::DecrementToMin),
                    )?,
                },
                &["capacity", "policy"],
            ),
            "dsac" => (
                TrackerKind::Dsac {
                    capacity: section.parse("capacity")?,
                    invalidate: section.flag("invalidate")?.unwrap_or(false),
                    stochastic: section.flag("stochastic")?.unwrap_or(false),
                    reset_to_one: section.flag("reset_to_one")?.unwrap_or(false),
                    fallback: policy_key(
                        section,
                        PolicySpec::Fixed(MitigationPolicy::DecrementToMin),
                    )?,
                },
                &["capacity", "invalidate", "stochastic", "reset_to_one", "policy"],
            ),
            "count_min" => (
                TrackerKind::CountMin {
                    width: section.require("width")?,
                    depth: section.require("depth")?,
                    threshold: section.parse("threshold")?,
                },
                &["width", "depth", "threshold"],
            ),
            "lossy_counting" => (
                TrackerKind::Lossy {
                    epsilon: section.parse("epsilon")?,
                },
                &["epsilon"],
            ),
            "sticky_sampling" => (
                TrackerKind::Sticky {
                    epsilon: section.parse("epsilon")?,
                    delta: section.parse("delta")?.unwrap_or(0.1),
                },
                &["epsilon", "delta"],
            ),
            "reservoir" => {
                let mode = match section.get("mode").map(|e| e.value.as_str()) {
                    None | Some("per_ref") => ReservoirMode::PerRef,
                    Some("whole_window") => ReservoirMode::WholeWindow,
                    Some(other) => {
                        return Err(section.field_error(
                            "mode",
                            format!("unknown mode {other:?} (per_ref, whole_window)"),
                        ))
                    }
                };
                (
                    TrackerKind::Reservoir {
                        k: section.parse("k")?,
                        mode,
                    },
                    &["k", "mode"],
                )
            }
            "mint" => (
                TrackerKind::Mint {
                    k: section.parse("k")?,
                    max_slots: section.parse("max_slots")?,
                },
                &["k", "max_slots"],
            ),
            "pride" => (
                TrackerKind::Pride {
                    capacity: section.parse("capacity")?.unwrap_or(4),
                    p: section.require("p")?,
                },
                &["capacity", "p"],
            ),
            "para" => (
                TrackerKind::Para {
                    p: section.require("p")?,
                },
                &["p"],
            ),
            "exact" | "prac" => (
                TrackerKind::Exact {
                    threshold: section.parse("threshold")?,
                },
                &["threshold"],
            ),
            other => {
                return Err(section.field_error("kind", format!("unknown tracker kind {other:?}")))
            }
        };
        let mut allowed = vec!["kind", "seed"];
        allowed.extend_from_slice(keys);
        section.check_keys(&allowed)?;
        Ok(Self {
            label: label.to_string(),
            kind,
            seed: section.parse("seed")?,
        })
    }

    /// Instantiates the tracker; `run_seed` keys every random component
    /// unless the spec pins its own seed.
    pub fn build(&self, ctx: &BuildContext, run_seed: u64) -> Result<Box<dyn Tracker>, TrackerError> {
        let seed = self.seed.unwrap_or_else(|| derive_seed(run_seed, &[0x7472_6163_6b65_72]));
        let slots = ctx.mitigations_per_ref.max(1);
        Ok(match &self.kind {
            TrackerKind::Null => Box::new(NullTracker),
            TrackerKind::SpaceSaving { capacity, policy } => Box::new(SpaceSavingTracker::new(
                capacity.unwrap_or_else(|| ctx.default_capacity()),
                policy.resolve(ctx),
            )?),
            TrackerKind::Dsac {
                capacity,
                invalidate,
                stochastic,
                reset_to_one,
                fallback,
            } => Box::new(
                DsacTracker::new(
                    capacity.unwrap_or_else(|| ctx.default_capacity()),
                    *invalidate,
                    *stochastic,
                    fallback.resolve(ctx),
                    seed,
                )?
                .with_reset_to_one(*reset_to_one),
            ),
            TrackerKind::CountMin {
                width,
                depth,
                threshold,
            } => Box::new(CountMinTracker::new(
                CountMinSketch::new(*width, *depth, seed)?,
                threshold.unwrap_or_else(|| ctx.target_threshold()),
            )),
            TrackerKind::Lossy { epsilon } => Box::new(LossyCounting::new(
                epsilon.unwrap_or_else(|| ctx.default_epsilon()),
            )?),
            TrackerKind::Sticky { epsilon, delta } => Box::new(StickySampling::new(
                epsilon.unwrap_or_else(|| ctx.default_epsilon()),
                *delta,
                seed,
            )?),
            TrackerKind::Reservoir { k, mode } => {
                Box::new(ReservoirTracker::new(k.unwrap_or(slots), *mode, seed)?)
            }
            TrackerKind::Mint { k, max_slots } => Box::new(MintTracker::new(
                k.unwrap_or(slots),
                max_slots.unwrap_or(ctx.timing.max_acts_per_trefi() as usize),
                seed,
            )?),
            TrackerKind::Pride { capacity, p } => Box::new(PrideTracker::new(*capacity, *p, seed)?),
            TrackerKind::Para { p } => Box::new(ParaTracker::new(*p, seed)?),
            TrackerKind::Exact { threshold } => Box::new(ExactCounter::new(
                ctx.geometry.rows_per_bank() as usize,
                threshold.unwrap_or_else(|| ThresholdRule::Half.threshold(ctx.rh_th)),
            )?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ini::Document;

    fn spec(text: &str) -> Result<TrackerSpec, ConfigError> {
        let doc: Document = text.parse().unwrap();
        let (label, section) = doc.labelled("tracker").next().unwrap();
        TrackerSpec::from_section(label, section)
    }

    #[test]
    fn default_capacity_matches_quarter_rule() {
        let ctx = BuildContext::new(TimingParams::default(), 4800);
        assert_eq!(ctx.target_threshold(), 1200);
        assert_eq!(ctx.default_capacity(), 506);
    }

    #[test]
    fn parses_and_builds_every_kind() {
        let ctx = BuildContext::new(TimingParams::default(), 4800);
        for body in [
            "kind = null",
            "kind = space_saving\ncapacity = 16\npolicy = graphene",
            "kind = dsac\ncapacity = 16\ninvalidate = true",
            "kind = count_min\nwidth = 2048\ndepth = 4",
            "kind = lossy_counting",
            "kind = sticky_sampling\nepsilon = 0.01\ndelta = 0.1",
            "kind = reservoir\nmode = whole_window",
            "kind = mint\nk = 1",
            "kind = pride\np = 0.1",
            "kind = para\np = 0.001",
            "kind = prac",
        ] {
            let s = spec(&format!("[tracker.t]\n{body}\n")).unwrap();
            s.build(&ctx, 1).unwrap();
        }
    }

    #[test]
    fn graphene_default_takes_target() {
        let ctx = BuildContext::new(TimingParams::default(), 4800);
        assert_eq!(
            PolicySpec::GrapheneDefault.resolve(&ctx),
            MitigationPolicy::GrapheneMultiple(1200)
        );
        assert_eq!(
            PolicySpec::parse("graphene:500"),
            Some(PolicySpec::Fixed(MitigationPolicy::GrapheneMultiple(500)))
        );
    }

    #[test]
    fn diagnostics_point_at_field() {
        let err = spec("[tracker.t]\nkind = space_saving\npolicy = bogus\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert_eq!(err.field.as_deref(), Some("policy"));
        let err = spec("[tracker.t]\nkind = mint\nwidth = 3\n").unwrap_err();
        assert_eq!(err.field.as_deref(), Some("width"));
        let err = spec("[tracker.t]\nkind = warp\n").unwrap_err();
        assert_eq!(err.field.as_deref(), Some("kind"));
    }

    #[test]
    fn unsound_policy_rejected_at_build() {
        let s = spec("[tracker.t]\nkind = space_saving\npolicy = reset_zero\n").unwrap();
        let ctx = BuildContext::new(TimingParams::default(), 4800);
        assert!(matches!(
            s.build(&ctx, 0),
            Err(TrackerError::UnsoundPolicy { .. })
        ));
    }
}
