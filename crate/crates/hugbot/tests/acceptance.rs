//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hug_core::behave::{default_policy, invert_row, policy_row, GestureSet, PolicyRow, PUBLISHED_PROBABILITIES};
use hug_core::detect::Detector;
use hug_core::featurize::{compute_baseline, extract, extract_channels, feature_name, segment, windows_at, FEATURE_COUNT};
use hug_core::forest::{ConfusionMatrix, ForestModel};
use hug_core::height::{estimate_height, shoulder_angles, HeightAverager, HeightCalib, HeightObservation};
use hug_core::hugfsm::{
    make_gesture, modal_squeeze, CommandPhase, EventPayload, GestureCommand, GestureKinematics, JointId,
    ReleaseCause, SessionState, StateName, JOINT_COUNT,
};
use hug_core::{EngineParams, GestureClass};
use hugbot::config::Config;
use hugbot::pipeline::{train_corpus, Evaluation};
use hugbot::recording::StoredRecording;
use hugbot::sim::{generate_corpus, SignalModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use support::session::{scripted_policy, Harness, DT};
use GestureClass::*;

type Check = Result<String, String>;
type Criterion = Box<dyn FnOnce(&mut Option<Trained>) -> Check>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < limit, || format!("{what} took {elapsed:.2?}, limit {limit:.0?}"))
}

fn cli(args: &[&str]) -> Result<String, String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("hugbot").chain(args.iter().copied());
    let code = hugbot::cli::main_with(argv, &mut out, &mut err);
    ensure(code == 0, || format!("hugbot {args:?} exited {code}: {}", String::from_utf8_lossy(&err).trim()))?;
    Ok(String::from_utf8(out).unwrap())
}

fn row_line(name: &str, row: &[f64; 4], decimals: usize) -> String {
    format!("{:<8} {:>7.d$} {:>7.d$} {:>7.d$} {:>7.d$}", name, row[0], row[1], row[2], row[3], d = decimals)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let out = cli(&["--seed", "42", "decide", "--default", "--draws", "100000"])?;
    let elapsed = start.elapsed();
    let lines: Vec<&str> = out.lines().collect();
    for g in GestureClass::ALL {
        let want = row_line(g.name(), &PUBLISHED_PROBABILITIES[g.index()], 2);
        ensure(lines.get(2 + g.index()) == Some(&want.as_str()), || format!("expected row `{want}` in\n{out}"))?;
    }
    let sampled = lines.iter().position(|l| l.starts_with("sampled frequencies")).ok_or("no sampled table")?;
    let mut worst = 0.0f64;
    for g in GestureClass::ALL {
        let line = lines[sampled + 2 + g.index()];
        let freq: Vec<f64> = line.split_whitespace().skip(1).map(|v| v.parse().unwrap()).collect();
        for (f, p) in freq.iter().zip(PUBLISHED_PROBABILITIES[g.index()]) {
            worst = worst.max((f - p).abs());
        }
    }
    ensure(worst <= 0.005, || format!("Monte-Carlo deviation {worst:.4}"))?;
    within(elapsed, Duration::from_secs(5), "decide")?;
    Ok(format!("published rows exact, max Monte-Carlo deviation {worst:.4} (100k draws), {elapsed:.2?}"))
}

fn distribution(r: [f64; 4]) -> Result<[f64; 4], String> {
    match policy_row(&r, 5.0, 3.0, GestureSet::ALL).map_err(|e| e.to_string())? {
        PolicyRow::Distribution(p) => Ok(p),
        PolicyRow::Degenerate => Err(format!("row {r:?} is degenerate")),
    }
}

fn criterion_2() -> Check {
    let total = 4.096 + 1.0 + 0.125 + 8.0;
    let examples = [
        ([5.0, 5.0, 5.0, 7.0], [0.0, 0.0, 0.0, 1.0]),
        ([7.0, 7.0, 5.0, 5.0], [0.5, 0.5, 0.0, 0.0]),
        ([6.6, 6.0, 5.5, 7.0], [4.096 / total, 1.0 / total, 0.125 / total, 8.0 / total]),
    ];
    for (r, want) in examples {
        let p = distribution(r)?;
        ensure(p.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-9), || format!("{r:?} gave {p:?}, want {want:?}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let mut p = [0.0; 4];
        let forced = rng.random_range(0..4);
        for (i, v) in p.iter_mut().enumerate() {
            if i == forced || rng.random_bool(0.6) {
                *v = rng.random_range(1e-3..1.0);
            }
        }
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        let (eta, m) = (rng.random_range(0.0..8.0), rng.random_range(0.5..6.0));
        let top = (0..4).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        let r = invert_row(&p, eta, m, (GestureClass::ALL[top], eta + rng.random_range(0.1..2.0)))
            .map_err(|e| e.to_string())?;
        let PolicyRow::Distribution(q) = policy_row(&r, eta, m, GestureSet::ALL).map_err(|e| e.to_string())? else {
            return Err(format!("inverted row {r:?} is degenerate"));
        };
        ensure(p.iter().zip(q).all(|(a, b)| (a - b).abs() <= 1e-9), || format!("{p:?} -> {r:?} -> {q:?}"))?;
    }

    let mut clamped = 0;
    for _ in 0..20_000 {
        let r: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..10.0));
        let (eta, m) = (rng.random_range(0.0..10.0), rng.random_range(0.1..20.0));
        match policy_row(&r, eta, m, GestureSet::ALL).map_err(|e| e.to_string())? {
            PolicyRow::Distribution(p) => {
                ensure((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9, || format!("{r:?} sums to {}", p.iter().sum::<f64>()))?;
                ensure((0..4).all(|i| r[i] > eta || p[i] == 0.0), || format!("sub-neutral entry sampled in {r:?}"))?;
                clamped += usize::from(r.iter().any(|&v| v <= eta));
            }
            PolicyRow::Degenerate => ensure(r.iter().all(|&v| v <= eta), || format!("{r:?} wrongly degenerate"))?,
        }
    }
    Ok(format!("3 worked examples to 1e-9, 1000 inversion round trips, {clamped} clamped rows sum to 1"))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..1000 {
        let p = support::oracle::random_channel(&mut rng, 50);
        let m = support::oracle::random_channel(&mut rng, 50);
        let fv = extract_channels(&p, &m);
        for i in 0..FEATURE_COUNT {
            let want = support::oracle::feature(&p, &m, i);
            ensure(support::oracle::close(fv.values[i], want, 1e-9), || {
                format!("window {trial}, feature {:?}: {} vs oracle {want}", feature_name(i), fv.values[i])
            })?;
        }
    }
    let params = EngineParams::default();
    let mut windows = 0;
    for _ in 0..200 {
        let rec = support::oracle::random_annotated(&mut rng);
        for w in segment(&rec, &params).map_err(|e| e.to_string())? {
            let raw = &rec.samples[w.start_index..w.start_index + params.window_w];
            let want = support::oracle::counted_label(raw, &rec.annotations, params.window_w);
            ensure(w.label == Some(want), || format!("window at {}: {:?} vs counted {want:?}", w.start_index, w.label))?;
            windows += 1;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30), "oracles")?;
    Ok(format!("1000 windows x 80 features, {windows} labeled windows over 200 recordings, {elapsed:.2?}"))
}

struct Trained {
    corpus: Vec<StoredRecording>,
    model: ForestModel,
}

fn criterion_4(trained: &mut Option<Trained>) -> Check {
    let start = Instant::now();
    let corpus = generate_corpus(32, 16, &SignalModel::default(), 42);
    let mut forest = Config::default().forest;
    forest.seed = 42;
    let t = train_corpus(&corpus, &EngineParams::default(), &forest).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    // Held out: everything not trained on (validation and test parts).
    let mut cm = ConfusionMatrix::default();
    for e in [&t.validation, &t.test] {
        for i in 0..4 {
            for j in 0..4 {
                cm.counts[i][j] += e.confusion.counts[i][j];
            }
        }
    }
    let held = Evaluation::of(cm);
    let best = held.best_class();
    let recall: Vec<String> =
        GestureClass::ALL.iter().map(|g| format!("{}={:.3}", g.name(), held.recall[g.name()].unwrap_or(0.0))).collect();
    *trained = Some(Trained { corpus, model: t.model });
    ensure(held.accuracy >= 0.85, || format!("held-out accuracy {:.3}", held.accuracy))?;
    ensure(best == Some(Squeeze), || format!("best class {best:?}, recall {}", recall.join(" ")))?;
    within(elapsed, Duration::from_secs(300), "generate and train")?;
    Ok(format!(
        "held-out accuracy {:.3} over {} windows (test alone {:.3}), recall {}, {elapsed:.2?}",
        held.accuracy,
        held.windows,
        t.test.accuracy,
        recall.join(" ")
    ))
}

fn criterion_5(trained: &Option<Trained>) -> Check {
    let t = trained.as_ref().ok_or("no model from criterion 4")?;
    let params = EngineParams::default();
    let first = params.baseline_len + params.window_w - 1;
    let mut detector = Detector::new(&t.model, &params);
    let (mut detections, mut worst, mut total, mut pushes) = (0, Duration::ZERO, Duration::ZERO, 0u32);
    for r in t.corpus.iter().step_by(t.corpus.len() / 50).take(50) {
        let hug = r.recording.hug_samples();
        let baseline = compute_baseline(hug, params.baseline_len).map_err(|e| e.to_string())?;
        let batch = windows_at(hug, &baseline, params.baseline_len, params.stride_rt, params.window_w);
        detector.reset();
        detector.hug_started();
        let mut online = Vec::new();
        for (i, s) in hug.iter().enumerate() {
            let clock = Instant::now();
            let d = detector.push(*s).map_err(|e| e.to_string())?;
            let dt = clock.elapsed();
            worst = worst.max(dt);
            total += dt;
            pushes += 1;
            if let Some(d) = d {
                let on_cadence = i >= first && (i - first) % params.stride_rt == 0;
                ensure(on_cadence, || format!("{}: detection at sample {i}", r.id))?;
                online.push((d, detector.last_features().unwrap().clone()));
            }
        }
        ensure(online.len() == batch.len(), || format!("{}: {} online vs {} batch", r.id, online.len(), batch.len()))?;
        ensure(online.len() == 1 + (hug.len() - first - 1) / params.stride_rt, || format!("{}: wrong count", r.id))?;
        for ((d, fv), w) in online.iter().zip(&batch) {
            let want = extract(w);
            let p = t.model.predict(&want).map_err(|e| e.to_string())?;
            let bits_equal = fv.values.iter().zip(&want.values).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(bits_equal && d.window_start == w.start_index, || format!("{}: window {} differs", r.id, w.start_index))?;
            ensure(d.label == p.class && d.probabilities == p.probabilities, || format!("{}: label differs", r.id))?;
        }
        detections += online.len();
    }
    let limit = Duration::from_secs_f64(1.0 / params.sample_rate);
    ensure(worst < limit, || format!("slowest push {worst:.2?}, limit {limit:.2?}"))?;
    Ok(format!(
        "{detections} detections bit-equal to batch windows, first at sample {}, mean push {:.1?}, slowest {worst:.2?}",
        first + 1,
        total / pushes
    ))
}

fn net_zero(commands: &[GestureCommand]) -> bool {
    JointId::ALL.iter().all(|&j| commands.iter().map(|c| c.net_delta(j)).sum::<f64>().abs() < 1e-12)
}

/// Runs a scenario twice; it must pass, replay identically and finish within a second.
fn scenario(name: &str, f: fn() -> Result<Harness, String>) -> Result<(), String> {
    let start = Instant::now();
    let a = f().map_err(|e| format!("({name}) {e}"))?;
    within(start.elapsed(), Duration::from_secs(1), name)?;
    let b = f().map_err(|e| format!("({name}) {e}"))?;
    ensure(a.s.log() == b.s.log(), || format!("({name}) log differs between runs"))
}

fn proactive(h: &Harness) -> usize {
    h.count(|p| matches!(p, EventPayload::ProactiveFired { .. }))
}

fn criterion_6() -> Check {
    scenario("a", || {
        let mut h = Harness::embraced(default_policy());
        for _ in 0..6 {
            h.detect(Hold);
        }
        ensure(proactive(&h) == 0, || "6 holds fired a proactive gesture".into())?;
        h.detect(Hold);
        ensure(proactive(&h) == 1, || "7 holds did not fire".into())?;
        Ok(h)
    })?;
    scenario("b", || {
        let mut h = Harness::embraced(scripted_policy([Hold, Rub, Rub, Squeeze], [Hold, Rub, Rub, Rub]));
        h.detect(Pat).ok_or("pat got no response")?;
        let deadline = h.t + EngineParams::default().deaf_window;
        let mut muted = 0;
        while h.t + 10.0 * DT < deadline {
            ensure(h.detect(GestureClass::ALL[muted % 4]).is_none(), || "command inside the deaf window".into())?;
            muted += 1;
        }
        h.wait(deadline - h.t);
        h.detect(Pat).ok_or("no response after the deaf window")?;
        Ok(h)
    })?;
    scenario("c", || {
        let mut h = Harness::embraced(scripted_policy([Hold, Rub, Pat, Squeeze], [Hold, Rub, Pat, Rub]));
        let on = h.detect(Squeeze).ok_or("no squeeze")?;
        ensure(on.phase == CommandPhase::SqueezeOn, || format!("{:?}", on.phase))?;
        for _ in 0..14 {
            ensure(h.detect(Squeeze).is_none(), || "squeeze detection issued a command".into())?;
        }
        ensure(h.s.state().name() == StateName::SqueezeState, || "left the squeeze state".into())?;
        let layered = h.detect(Rub).ok_or("no layered response")?;
        ensure(layered.kind == Rub && h.s.state().name() == StateName::SqueezeState, || "layered rub".into())?;
        h.wait(2.5);
        let off = h.detect(Hold).ok_or("hold did not end the squeeze")?;
        ensure(off.phase == CommandPhase::SqueezeOff && h.s.state() == SessionState::Embrace, || "exit".into())?;
        Ok(h)
    })?;
    scenario("d", || {
        let spike = |tau: f64| {
            let mut t = [0.0; JOINT_COUNT];
            t[2] = tau;
            t
        };
        let mut h = Harness::embraced(default_policy());
        h.tick(spike(25.0));
        ensure(h.s.state() == SessionState::Releasing, || "25 Nm in Embrace did not release".into())?;
        let mut h = Harness::embraced(scripted_policy([Hold, Rub, Rub, Squeeze], [Hold, Rub, Rub, Rub]));
        h.detect(Rub).ok_or("no rub response")?;
        h.tick(spike(25.0));
        ensure(h.s.state().name() == StateName::RespondingDiscrete, || "25 Nm released during a gesture".into())?;
        h.tick(spike(45.0));
        ensure(h.s.state() == SessionState::Releasing, || "45 Nm did not release during a gesture".into())?;
        let torque = h.s.log().iter().any(|e| {
            matches!(e.payload, EventPayload::ReleaseTrigger { cause: ReleaseCause::Torque { .. }, deferred: false })
        });
        ensure(torque, || "no torque release logged".into())?;
        Ok(h)
    })?;
    scenario("e", || {
        let mut h = Harness::embraced(scripted_policy([Hold, Squeeze, Pat, Rub], [Hold, Rub, Pat, Rub]));
        h.detect(Rub).ok_or("no timed squeeze")?;
        let SessionState::TimedSqueeze { deadline, .. } = h.s.state() else {
            return Err(format!("expected a timed squeeze, got {:?}", h.s.state()));
        };
        let mut t = [0.0; JOINT_COUNT];
        t[1] = 60.0;
        h.tick(t);
        h.s.on_pressure_release(h.t);
        ensure(h.s.state().name() == StateName::TimedSqueeze, || "released inside a timed squeeze".into())?;
        while h.t + DT < deadline {
            h.tick([0.0; JOINT_COUNT]);
        }
        h.tick([0.0; JOINT_COUNT]);
        ensure(h.s.state() == SessionState::Releasing, || "deferred release never happened".into())?;
        Ok(h)
    })?;
    scenario("f", || {
        let k = GestureKinematics::default();
        for g in [Rub, Pat, Squeeze] {
            let c = make_gesture(g, &k, 2.0).map_err(|e| e.to_string())?;
            ensure(net_zero(&[c]), || format!("{g} is not angle-neutral"))?;
        }
        ensure(net_zero(&[modal_squeeze(true, &k, 1.0), modal_squeeze(false, &k, 1.0)]), || "squeeze pair".into())?;
        // Every command a long random session issues adds up to no motion.
        let mut h = Harness::embraced(default_policy());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut issued = Vec::new();
        for _ in 0..400 {
            let g = if rng.random_bool(0.5) { Hold } else { GestureClass::ALL[rng.random_range(0..4)] };
            issued.extend(h.detect(g));
        }
        while h.s.state().name() == StateName::SqueezeState {
            issued.extend(h.detect(Hold));
        }
        ensure(issued.len() > 20, || format!("only {} commands issued", issued.len()))?;
        ensure(net_zero(&issued), || "session commands leave the arms displaced".into())?;
        Ok(h)
    })?;
    Ok("scenarios (a)-(f) pass, replay identically, each under 1 s".into())
}

fn criterion_7() -> Check {
    let c = HeightCalib::default();
    let h1 = estimate_height(&HeightObservation { distance_d: 2.0, bbox_height_b: 400.0 }, &c).map_err(|e| e.to_string())?;
    ensure((h1 - 1.8542).abs() < 1e-4 && (h1 - (2.0 * 400.0 / 651.55 - 0.5518 * 2.0 + 1.73)).abs() < 1e-6, || {
        format!("D=2, b=400 gave {h1}")
    })?;
    for d in [0.5, 1.0, 2.0, 3.7] {
        let h = estimate_height(&HeightObservation { distance_d: d, bbox_height_b: c.alpha * c.focal_f }, &c)
            .map_err(|e| e.to_string())?;
        ensure((h - 1.73).abs() < 1e-6, || format!("cancellation at D={d} gave {h}"))?;
    }
    let lo = shoulder_angles(c.h_min, &c);
    let mid = shoulder_angles((c.h_min + c.h_max) / 2.0, &c);
    let hi = shoulder_angles(c.h_max, &c);
    ensure(lo.left == c.theta_min && lo.right == c.theta_min + c.right_offset && !lo.clamped, || "lower endpoint".into())?;
    ensure(hi.left == c.theta_max && !hi.clamped, || "upper endpoint".into())?;
    ensure((mid.left - (c.theta_min + c.theta_max) / 2.0).abs() < 1e-12, || format!("midpoint {}", mid.left))?;
    // With a representable midpoint the interpolation is exact.
    let dyadic = HeightCalib { h_min: 1.5, h_max: 2.0, ..c };
    let a = shoulder_angles(1.75, &dyadic);
    ensure(a.left == (c.theta_min + c.theta_max) / 2.0 && !a.clamped, || format!("dyadic midpoint {}", a.left))?;
    for h in [2.1, 2.5, 1.0, 0.3] {
        let a = shoulder_angles(h, &c);
        let edge = if h > c.h_max { hi } else { lo };
        ensure(a.clamped && a.left == edge.left && a.right == edge.right, || format!("clamp at {h}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let obs = HeightObservation { distance_d: rng.random_range(0.5..5.0), bbox_height_b: rng.random_range(0.0..900.0) };
        let single = estimate_height(&obs, &c).map_err(|e| e.to_string())?;
        let mut avg = HeightAverager::new(c);
        for k in 0..12 {
            let out = avg.push(&obs).map_err(|e| e.to_string())?;
            ensure(out == (k >= 4).then_some(single), || format!("constant stream {single} gave {out:?} at {k}"))?;
        }
    }
    Ok(format!("D=2 b=400 -> {h1:.6} m, cancellation 1.730000 m, angle endpoints and clamp exact, averaging idempotent"))
}

fn criterion_8(trained: &Option<Trained>) -> Check {
    let t = trained.as_ref().ok_or("no model from criterion 4")?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = dir.path().join("model.json");
    hugbot::model::save(&t.model, &model).map_err(|e| e.to_string())?;
    let script = dir.path().join("user.script");
    fs::write(
        &script,
        "seed = 8\nheight = 1.68\ntorso = 0.95\ngesture = rub, 5, 3, 1\ngesture = squeeze, 10, 4, 1.1\n\
         gesture = pat, 16, 2, 0.9\nrelease_at = 22\n",
    )
    .map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for run in 0..2 {
        let log = dir.path().join(format!("log{run}.jsonl"));
        let args = ["simulate", "--script", script.to_str().unwrap(), "--model", model.to_str().unwrap(), "--log"];
        cli(&[&args[..], &[log.to_str().unwrap()]].concat())?;
        let bytes = fs::read(&log).map_err(|e| e.to_string())?;
        ensure(!bytes.is_empty(), || "empty session log".into())?;
        digests.push((Sha256::digest(&bytes), bytes.iter().filter(|&&b| b == b'\n').count()));
    }
    ensure(digests[0].0 == digests[1].0, || "session logs differ".into())?;
    let hex: String = digests[0].0.iter().take(8).map(|b| format!("{b:02x}")).collect();
    Ok(format!("two runs, {} events each, sha256 {hex}...", digests[0].1))
}

fn main() {
    let mut trained = None;
    let mut failed = 0;
    let criteria: Vec<(u32, Criterion)> = vec![
        (1, Box::new(|_| criterion_1())),
        (2, Box::new(|_| criterion_2())),
        (3, Box::new(|_| criterion_3())),
        (4, Box::new(criterion_4)),
        (5, Box::new(|t| criterion_5(t))),
        (6, Box::new(|_| criterion_6())),
        (7, Box::new(|_| criterion_7())),
        (8, Box::new(|t| criterion_8(t))),
    ];
    for (n, f) in criteria {
        let result = panic::catch_unwind(AssertUnwindSafe(|| f(&mut trained)))
            .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>().map(String::as_str).or(e.downcast_ref::<&str>().copied()))));
        match result {
            Ok(detail) => println!("criterion {n}: PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL  {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
