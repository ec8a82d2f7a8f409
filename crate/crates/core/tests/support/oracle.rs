use hug_core::featurize::feature_name;
use hug_core::{GestureClass, GestureInterval, HugRecording, SensorSample};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Straightforward per-feature reference computed by name.
pub fn feature(pressure: &[f64], mic: &[f64], index: usize) -> f64 {
    let (stream, stat) = feature_name(index).unwrap();
    let d = |x: &[f64]| -> Vec<f64> { (1..x.len()).map(|i| x[i] - x[i - 1]).collect() };
    let x: Vec<f64> = match stream {
        "pressure" => pressure.to_vec(),
        "mic" => mic.to_vec(),
        "pressure_d1" => d(pressure),
        "mic_d1" => d(mic),
        "pressure_d2" => d(&d(pressure)),
        "mic_d2" => d(&d(mic)),
        other => panic!("unknown stream {other}"),
    };
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = x.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = |q: usize| sorted[q * (x.len() - 1) / 4];
    let v = match stat {
        "sum" => x.iter().sum(),
        "min" => sorted[0],
        "max" => sorted[x.len() - 1],
        "mean" => mean,
        "median" => sorted[(x.len() - 1) / 2],
        "std" => var.sqrt(),
        "var" => var,
        "peaks" => (1..x.len() - 1).filter(|&i| x[i] > x[i - 1] && x[i] > x[i + 1]).count() as f64,
        "iqr" => rank(3) - rank(1),
        "auc" => (1..x.len()).map(|i| (x[i] + x[i - 1]) / 2.0).sum(),
        "rms" => (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
        "mean_abs" => x.iter().map(|v| v.abs()).sum::<f64>() / n,
        "range" => sorted[x.len() - 1] - sorted[0],
        "skewness" if var > 0.0 => x.iter().map(|v| ((v - mean) / var.sqrt()).powi(3)).sum::<f64>() / n,
        "kurtosis" if var > 0.0 => x.iter().map(|v| ((v - mean) / var.sqrt()).powi(4)).sum::<f64>() / n - 3.0,
        "skewness" | "kurtosis" => 0.0,
        "zero_crossings" => (1..x.len()).filter(|&i| x[i] * x[i - 1] < 0.0).count() as f64,
        "energy" => x.iter().map(|v| v * v).sum(),
        "first" => x[0],
        "last" => x[x.len() - 1],
        "above_baseline" => x.iter().filter(|&&v| v > 0.0).count() as f64,
        other => panic!("unknown stat {other}"),
    };
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

pub fn random_channel(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    match rng.random_range(0..4) {
        // Smooth with noise.
        0 => {
            let f = rng.random_range(0.5..5.0);
            (0..n).map(|i| 30.0 * (i as f64 * f / 45.0).sin() + rng.random_range(-2.0..2.0)).collect()
        }
        // Quantized, with ties.
        1 => (0..n).map(|_| rng.random_range(-5..6) as f64).collect(),
        // Plateau step.
        2 => {
            let at = rng.random_range(0..n);
            (0..n).map(|i| if i < at { 0.0 } else { 30.0 }).collect()
        }
        _ => (0..n).map(|_| rng.random_range(-1e3..1e3)).collect(),
    }
}

pub fn recording(pressure: &[f64], mic: &[f64], annotations: Vec<GestureInterval>) -> HugRecording {
    let samples: Vec<SensorSample> =
        pressure.iter().zip(mic).enumerate().map(|(i, (&p, &m))| SensorSample::new(i as f64 / 45.0, p, m)).collect();
    let hug_end = samples.last().unwrap().t;
    HugRecording { samples, annotations, hug_start: 0.0, hug_end, participant_id: "P01".into() }
}

/// A flat recording of `50..400` samples with random non-overlapping annotations.
pub fn random_annotated(rng: &mut ChaCha8Rng) -> HugRecording {
    let n = rng.random_range(50..400);
    let mut annotations = Vec::new();
    let mut t = rng.random_range(0.0..1.0);
    let end = n as f64 / 45.0;
    while t < end {
        let len = rng.random_range(0.1..2.0);
        let label = GestureClass::ALL[rng.random_range(0..4)];
        if label != GestureClass::Hold {
            annotations.push(GestureInterval::new(label, t, (t + len).min(end)));
        }
        t += len + rng.random_range(0.0..1.0);
    }
    recording(&vec![0.0; n], &vec![0.0; n], annotations)
}

/// Label of a window by counting covered samples per interval, one by one.
pub fn counted_label(raw: &[SensorSample], annotations: &[GestureInterval], window_w: usize) -> GestureClass {
    let mut best: Option<(usize, GestureClass)> = None;
    for a in annotations {
        let mut count = 0;
        for s in raw {
            if s.t >= a.t_start && s.t < a.t_end {
                count += 1;
            }
        }
        if count > 0 && best.is_none_or(|(c, _)| count > c) {
            best = Some((count, a.label));
        }
    }
    match best {
        Some((c, g)) if c * 4 >= 3 * window_w => g,
        _ => GestureClass::Hold,
    }
}
