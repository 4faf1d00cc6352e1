use proptest::prelude::*;
use sgda_core::signal::{
    db_scale, decibel_spectra, fft_magnitude, normalize, segment, NormalizationMode, RawSignal, Segment,
    SegmentConfig, Spectrum, Stage,
};

#[test]
fn segment_count_exhaustive_small() {
    for n in 1..=64usize {
        let signal = RawSignal::single_channel((0..n).map(|i| i as f64).collect(), 8.0, "ramp").unwrap();
        for l in 1..=n {
            for step in 1..=l {
                let cfg = SegmentConfig {
                    segment_len_samples: l,
                    step_samples: step,
                };
                let mut starts = Vec::new();
                let mut s = 0;
                while s + l <= n {
                    starts.push(s);
                    s += step;
                }
                assert_eq!(cfg.segment_count(n), (n - l) / step + 1);
                let segs = segment(&signal, &cfg).unwrap();
                assert_eq!(segs.len(), starts.len(), "N={n} L={l} step={step}");
                for (seg, &start) in segs.iter().zip(&starts) {
                    assert_eq!(seg.data[0][0], start as f64);
                    assert_eq!(seg.len(), l);
                }
            }
        }
    }
}

fn db_spectra(count: usize, bins: usize) -> impl Strategy<Value = Vec<Spectrum>> {
    prop::collection::vec(prop::collection::vec(prop::collection::vec(-120.0..80.0f64, bins), 2), count).prop_map(
        move |specs| {
            specs
                .into_iter()
                .map(|channels| {
                    Spectrum::new(channels, (0..bins).map(|k| k as f64).collect(), Stage::Decibel).unwrap()
                })
                .collect()
        },
    )
}

fn mode() -> impl Strategy<Value = NormalizationMode> {
    prop_oneof![
        Just(NormalizationMode::PerSegmentChannel),
        Just(NormalizationMode::GlobalPerChannel)
    ]
}

proptest! {
    #[test]
    fn normalized_values_in_unit_interval(specs in db_spectra(4, 17), mode in mode()) {
        let out = normalize(&specs, mode).unwrap();
        for s in &out.spectra {
            prop_assert_eq!(s.stage, Stage::Normalized);
            for c in &s.channels {
                for &v in c {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn db_is_strictly_monotone(mags in prop::collection::vec(0.0..1e4f64, 2..64)) {
        let bins = mags.len();
        let spec = Spectrum::new(vec![mags.clone()], (0..bins).map(|k| k as f64).collect(), Stage::Magnitude).unwrap();
        let db = db_scale(&spec, 1e-12).unwrap();
        for i in 0..bins {
            for j in 0..bins {
                if mags[i] < mags[j] {
                    prop_assert!(db.channels[0][i] < db.channels[0][j]);
                }
            }
        }
    }

    #[test]
    fn one_sided_spectrum_satisfies_parseval(x in prop::collection::vec(-10.0..10.0f64, 2..96)) {
        let n = x.len();
        let seg = Segment { data: vec![x.clone()], index: 0, parent: "p".into(), sampling_rate_hz: 100.0 };
        let spec = fft_magnitude(&seg).unwrap();
        let mags = &spec.channels[0];
        prop_assert_eq!(mags.len(), n / 2 + 1);
        let mut energy = 0.0;
        for (k, m) in mags.iter().enumerate() {
            let mirrored = k != 0 && !(n % 2 == 0 && k == n / 2);
            energy += if mirrored { 2.0 } else { 1.0 } * m * m;
        }
        let time: f64 = x.iter().map(|v| v * v).sum::<f64>() * n as f64;
        prop_assert!((energy - time).abs() <= 1e-9 * time.max(1.0));
        for (k, f) in spec.freq_axis_hz.iter().enumerate() {
            prop_assert!((f - k as f64 * 100.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn pipeline_is_deterministic(x in prop::collection::vec(-1.0..1.0f64, 64..200), mode in mode()) {
        let signal = RawSignal::single_channel(x, 32.0, "s").unwrap();
        let cfg = SegmentConfig { segment_len_samples: 32, step_samples: 16 };
        let a = normalize(&decibel_spectra(&signal, &cfg, 1e-12).unwrap(), mode).unwrap();
        let b = normalize(&decibel_spectra(&signal, &cfg, 1e-12).unwrap(), mode).unwrap();
        prop_assert_eq!(a.spectra, b.spectra);
    }
}
