use advdrive::env::EpisodeLog;
use advdrive::harness::*;
use advdrive::metrics::{metrics_from_file, Normalize};
use advdrive::nn::*;
use advdrive::par::{self, Parallelism};
use advdrive::sim::{MapId, Role};

fn scripted_run(dir: &std::path::Path) -> Vec<Vec<u8>> {
    let spec = ScenarioSpec {
        kind: 1,
        map: MapId::Env1,
        participants: vec![
            Participant::new("a", Role::Ac, DrivePolicy::Scripted),
            Participant::new("b", Role::Ac, DrivePolicy::Scripted),
        ],
        scripted: 2,
        seeds: (0..4).collect(),
        steps: 150,
        env: EnvParams::default(),
    };
    let run = run_testing(&spec, dir).unwrap();
    run.files.iter().map(|f| std::fs::read(f).unwrap()).collect()
}

#[test]
fn sequential_and_parallel_runs_write_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    par::set_parallelism(Parallelism::Sequential);
    let seq = scripted_run(&dir.path().join("seq"));
    par::set_parallelism(Parallelism::Parallel);
    let parallel = scripted_run(&dir.path().join("par"));
    assert_eq!(seq.len(), 4);
    assert_eq!(seq, parallel);
}

#[test]
fn episode_logs_round_trip_and_feed_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let files = scripted_run(dir.path());
    for bytes in &files {
        let text = String::from_utf8(bytes.clone()).unwrap();
        let log = EpisodeLog::parse(&text).unwrap();
        assert_eq!(log.to_text(), text);
    }
    let m = metrics_from_file(&dir.path().join("episode_000000.csv"), Normalize::Executed).unwrap();
    assert_eq!(m.len(), 2, "traffic cars are not scored");
    for e in &m {
        assert!((0.0..=1.0).contains(&e.cc) && (0.0..=1.0).contains(&e.co) && (0.0..=1.0).contains(&e.os));
    }
}

#[test]
fn checkpoints_round_trip_and_reject_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let net = Network::new(NetworkSpec::flat(6, vec![5], HeadSpec::PolicyValue { actions: 9 }, Activation::Relu)).unwrap();
    let params = net.init(11);
    let path = dir.path().join("p.ckpt");
    save_checkpoint(&path, "AC-PPO", &params).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.tag, "AC-PPO");
    assert_eq!(back.params, params);

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_checkpoint(&path).is_err());
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    std::fs::write(&path, &bad).unwrap();
    assert!(load_checkpoint(&path).is_err());
}

#[test]
fn config_files_parse_and_report_bad_lines() {
    let c = Config::parse("# comment\ntrain.iterations = 3\n\nalgo.tag = TD3\n").unwrap();
    assert_eq!(c.get_usize("train.iterations").unwrap(), 3);
    assert_eq!(c.get("algo.tag"), "TD3");
    let e = Config::parse("train.iterations = 3\nbogus.key = 1\n").unwrap_err();
    assert!(e.to_string().contains("bogus.key"), "{e}");
}
