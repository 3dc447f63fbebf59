use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ForkStep, RebaseStep, SimScript, TagStep, TagTarget, UpstreamStep};

const HOUR: i64 = 3600;
const DAY: i64 = 86_400;

/// Shape of the scripts produced by [`random_script`].
#[derive(Clone, Debug, PartialEq)]
pub struct RandomScriptParams {
    pub upstream_steps: (usize, usize),
    pub commits_per_step: (usize, usize),
    pub rebases: (usize, usize),
    pub patch_probability: f64,
    pub tag_probability: f64,
}

impl Default for RandomScriptParams {
    fn default() -> Self {
        Self {
            upstream_steps: (5, 12),
            commits_per_step: (1, 4),
            rebases: (1, 3),
            patch_probability: 0.6,
            tag_probability: 0.7,
        }
    }
}

/// A valid script drawn from `seed`, without skew or event loss.
///
/// The fork pushes its own commits before its first rebase, so every rebase
/// rewrites at least one commit, and at least one patch lands upstream after
/// the fork point.
pub fn random_script(seed: u64, params: &RandomScriptParams) -> SimScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = params.commits_per_step;
    let n_up = rng.random_range(params.upstream_steps.0.max(3)..=params.upstream_steps.1.max(3));

    let mut upstream = Vec::with_capacity(n_up);
    let mut t = 1_300_000_000 + rng.random_range(0..100_000_000);
    for i in 0..n_up {
        let commits = rng.random_range(lo.max(1)..=hi.max(1));
        t += rng.random_range(HOUR..30 * DAY) + commits as i64;
        let patch = rng
            .random_bool(params.patch_probability)
            .then(|| format!("PATCH-{i}"));
        upstream.push(UpstreamStep {
            at: t,
            commits,
            patch,
        });
    }

    let fork_point = rng.random_range(0..=(n_up / 3).min(n_up - 2));
    if upstream[fork_point + 1..].iter().all(|s| s.patch.is_none()) {
        upstream[fork_point + 1].patch = Some(format!("PATCH-{}", fork_point + 1));
    }

    let available = n_up - 1 - fork_point;
    let n_rebases = rng
        .random_range(params.rebases.0.max(1)..=params.rebases.1.max(1))
        .min(available);
    let mut bases: Vec<usize> = sample(&mut rng, available, n_rebases)
        .into_iter()
        .map(|k| fork_point + 1 + k)
        .collect();
    bases.sort_unstable();

    let mut fork_schedule = Vec::new();
    let mut rebase_schedule = Vec::new();
    let mut fork_tags = Vec::new();
    let mut last = upstream[fork_point].at;
    let push = |rng: &mut ChaCha8Rng, last: &mut i64, out: &mut Vec<ForkStep>| {
        let commits = rng.random_range(1..=5);
        let at = *last + rng.random_range(60..3 * DAY) + commits as i64;
        out.push(ForkStep { at, commits });
        *last = at;
    };
    push(&mut rng, &mut last, &mut fork_schedule);
    for base in bases {
        if rng.random_bool(0.5) {
            push(&mut rng, &mut last, &mut fork_schedule);
        }
        let at = last.max(upstream[base].at) + rng.random_range(60..20 * DAY);
        rebase_schedule.push(RebaseStep { at, base });
        last = at;
        if rng.random_bool(params.tag_probability) {
            fork_tags.push(at + rng.random_range(0..60 * DAY));
        }
    }
    if rng.random_bool(0.5) {
        push(&mut rng, &mut last, &mut fork_schedule);
    }

    let mut tags: Vec<(i64, TagTarget)> = fork_tags
        .into_iter()
        .map(|t| (t, TagTarget::Fork))
        .collect();
    for step in &upstream {
        if rng.random_bool(0.3) {
            tags.push((step.at + rng.random_range(1..2 * DAY), TagTarget::Upstream));
        }
    }
    tags.sort();
    tags.dedup_by_key(|(t, _)| *t);
    let (mut fork_n, mut up_n) = (0, 0);
    let tag_schedule = tags
        .into_iter()
        .map(|(at, repo)| {
            let label = match repo {
                TagTarget::Fork => {
                    fork_n += 1;
                    format!("fork-v{fork_n}")
                }
                TagTarget::Upstream => {
                    up_n += 1;
                    format!("v0.{up_n}")
                }
            };
            TagStep { at, label, repo }
        })
        .collect();

    let mut script = SimScript::new(seed, upstream, fork_point);
    script.fork_schedule = fork_schedule;
    script.rebase_schedule = rebase_schedule;
    script.tag_schedule = tag_schedule;
    script
}
