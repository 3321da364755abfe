use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
seed = 5
net.timesteps = 2
net.base_channels = 8
net.stage_layout = [1, 1, 1, 1, 1, 1]
schedule.iterations = 2
data.synthetic_count = 4
data.synthetic_size = 32
data.holdout_count = 2
data.patch = 16
data.batch = 2
run.checkpoint_every = 1
";

fn uiesnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uiesnn")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn train_tiny(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.join("run");
    let o = uiesnn(&["train", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn train_writes_artifacts_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = train_tiny(dir.path());
    for f in ["manifest.json", "train_log.csv", "checkpoint.uies"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let log = fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let again = dir.path().join("again");
    let o = uiesnn(&["replay", "--manifest", p(&out.join("manifest.json")), "--out", p(&again)]);
    assert_eq!(code(&o), 0);
    assert_eq!(log, fs::read_to_string(again.join("train_log.csv")).unwrap());
}

#[test]
fn eval_energy_and_spikemap_on_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_tiny(dir.path());
    let ckpt = run.join("checkpoint.uies");
    let data = dir.path().join("pairs");
    assert_eq!(code(&uiesnn(&["synth", "--out", p(&data), "--count", "3", "--size", "24"])), 0);
    let first = fs::read_dir(data.join("input")).unwrap().next().unwrap().unwrap().path();
    fs::copy(&first, data.join("input").join("orphan.png")).unwrap();

    let before: Vec<Vec<u8>> = fs::read_dir(data.join("input")).unwrap().map(|e| fs::read(e.unwrap().path()).unwrap()).collect();
    let ev = dir.path().join("eval");
    let o = uiesnn(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(&ev), "--dump"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(ev.join("eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(fs::read_dir(ev.join("restored")).unwrap().count(), 3);
    let after: Vec<Vec<u8>> = fs::read_dir(data.join("input")).unwrap().map(|e| fs::read(e.unwrap().path()).unwrap()).collect();
    assert_eq!(before, after);
    assert!(stdout(&o).contains("warnings: 1"), "{}", stdout(&o));

    let o = uiesnn(&["energy", "--checkpoint", p(&ckpt), "--td-sweep", "--out", p(&ev)]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let sweep: Vec<&str> = text.lines().filter(|l| l.contains(" mJ") && l.contains('x') && l.contains(':') && !l.starts_with("total")).collect();
    assert_eq!(sweep.len(), 4, "{text}");
    assert!(ev.join("energy.csv").exists());

    let maps = dir.path().join("maps");
    let img = first;
    let o = uiesnn(&["spikemap", "--checkpoint", p(&ckpt), "--data", p(&img), "--out", p(&maps)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = uiesnn(&["spikemap", "--checkpoint", p(&ckpt), "--data", p(&img), "--out", p(&maps), "--block", "99"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("valid indices"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&uiesnn(&["frobnicate"])), 2);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "net.timesteps = 2\nnet.colour = 3\n").unwrap();
    let o = uiesnn(&["train", "--config", p(&bad)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("net.colour") && err.contains(":2"), "{err}");

    let odd = dir.path().join("odd.toml");
    fs::write(&odd, "data.patch = 30\n").unwrap();
    assert_eq!(code(&uiesnn(&["train", "--config", p(&odd)])), 2);

    let missing = dir.path().join("nope.uies");
    assert_eq!(code(&uiesnn(&["eval", "--checkpoint", p(&missing), "--data", p(dir.path())])), 3);
    let garbage = dir.path().join("garbage.uies");
    fs::write(&garbage, b"not a checkpoint").unwrap();
    assert_eq!(code(&uiesnn(&["energy", "--checkpoint", p(&garbage)])), 3);
}
