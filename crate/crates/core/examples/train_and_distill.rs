//! End to end on a tiny dataset: train an RGB teacher, distill a thermal
//! student through the frozen decoder, and score both on a held-out subject.
//!
//! At this size the losses fall but the keypoints are still coarse. Useful
//! accuracy needs the default dataset and `thermopose train-teacher`.

use thermopose::cli::{cmd_gen_data, distill_on, distill_samples, load_teacher, train_teacher_on, RunConfig, TrainConfig, TrainRun};
use thermopose::synthtug::{read_dataset, MotionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;
    let mut cfg = RunConfig { seed: 1, ..RunConfig::default() };
    cfg.synth.subjects = 3;
    cfg.synth.trials = 2;
    cfg.synth.motion = MotionConfig { duration_s: 4.0, fps: 4 };
    let quick = TrainConfig { max_epochs: 8, batch_size: 4, frame_stride: 1, ..TrainConfig::default() };
    cfg.teacher_train = quick;
    cfg.student_train = quick;

    cfg.out = root.path().join("data");
    cmd_gen_data(&cfg, false)?;
    cfg.dataset = cfg.out.clone();
    let dataset = read_dataset(&cfg.dataset)?;

    let tdir = root.path().join("teacher");
    std::fs::create_dir_all(&tdir)?;
    let teacher = train_teacher_on(&cfg, &dataset, &tdir, None)?;
    report("teacher", &teacher);

    let frozen = load_teacher(&teacher.checkpoint, &cfg)?;
    let samples = distill_samples(&cfg, &dataset, &frozen)?;
    let sdir = root.path().join("student");
    std::fs::create_dir_all(&sdir)?;
    let student = distill_on(&cfg, &dataset, &frozen, &samples, &sdir, None)?;
    report(&format!("student (β = {})", cfg.beta), &student);
    println!("decoder unchanged: {}", student.model.param_digest("decoder") == frozen.param_digest("decoder"));
    Ok(())
}

fn report(label: &str, run: &TrainRun) {
    let logs = &run.outcome.logs;
    let (first, last) = (&logs[0].train, &logs[logs.len() - 1].train);
    println!(
        "{label}: {} samples, train loss {:.4} -> {:.4}, mean OKS {:.3}, AP50 {:.3}",
        run.train_samples, first.total, last.total, run.metrics.mean_oks, run.metrics.ap50
    );
}
