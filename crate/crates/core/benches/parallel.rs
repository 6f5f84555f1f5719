use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use advdrive::harness::{run_episode, DrivePolicy, EnvParams, EpisodeSetup, Participant};
use advdrive::par::{self, Parallelism};
use advdrive::sim::{MapId, Role};

// A batch of independent scripted episodes, the same shape of work as a testing run.
fn episodes(c: &mut Criterion) {
    let env = EnvParams::default();
    let participants = vec![Participant::new("scripted", Role::Ac, DrivePolicy::Scripted)];
    let setup = EpisodeSetup {
        map: MapId::Env1,
        participants: &participants,
        scripted: 2,
        max_steps: 200,
        env: &env,
        meta: vec![],
    };
    let mut group = c.benchmark_group("episodes");
    group.sample_size(10);
    for mode in [Parallelism::Sequential, Parallelism::Parallel] {
        group.bench_with_input(BenchmarkId::new(format!("{mode:?}"), 8), &mode, |b, &mode| {
            par::set_parallelism(mode);
            b.iter(|| {
                par::map_range(8, |k| run_episode(&setup, k as u64, k as u64, false).unwrap().steps)
            });
        });
    }
    par::set_parallelism(Parallelism::Parallel);
    group.finish();
}

criterion_group!(benches, episodes);
criterion_main!(benches);
