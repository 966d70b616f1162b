//! Property tests of the public building blocks against closed-form oracles.

use proptest::prelude::*;

use imdd_e2e::autodiff::Complex64;
use imdd_e2e::channel::{
    beta2_from_d, lowpass_brickwall, propagate_fiber, propagate_padded, OpticalField, SnrTable,
};
use imdd_e2e::eval::pam::{hamming, hexacode_codebook, hexacode_decode, hexacode_encode};
use imdd_e2e::eval::rates::{wilson_interval, Z95};
use imdd_e2e::transceiver::{count_bit_errors, gray_bits, message_from_gray_bits, Message};

const FS: f64 = 336e9;

fn field(re: &[f64], im: &[f64]) -> OpticalField {
    OpticalField {
        samples: re
            .iter()
            .zip(im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect(),
        sample_rate: FS,
    }
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn gray_labels_roundtrip_and_neighbors_differ_in_one_bit(k in 1u32..=8, raw in any::<u32>()) {
        let messages = 1usize << k;
        let m = raw as usize % messages + 1;
        let msg = Message::new(m, messages).unwrap();
        let bits = gray_bits(msg, messages);
        prop_assert_eq!(bits.len(), k as usize);
        prop_assert_eq!(message_from_gray_bits(&bits), msg);
        if m < messages {
            let next = Message::new(m + 1, messages).unwrap();
            prop_assert_eq!(hamming(&bits, &gray_bits(next, messages)), 1);
        }
    }

    #[test]
    fn bit_errors_are_label_hamming_distance(k in 1u32..=8, a in any::<u32>(), b in any::<u32>()) {
        let messages = 1usize << k;
        let ma = Message::new(a as usize % messages + 1, messages).unwrap();
        let mb = Message::new(b as usize % messages + 1, messages).unwrap();
        let expected = hamming(&gray_bits(ma, messages), &gray_bits(mb, messages));
        prop_assert_eq!(count_bit_errors(ma, mb, messages) as usize, expected);
    }

    #[test]
    fn hexacode_corrects_any_single_symbol_error(info in prop::array::uniform3(0u8..4), pos in 0usize..6, delta in 1u8..4) {
        let mut word = hexacode_encode(info);
        word[pos] ^= delta;
        prop_assert_eq!(hexacode_decode(&word), info);
    }

    #[test]
    fn dispersion_conserves_energy(re in prop::collection::vec(-1.0f64..1.0, 8..96), z_km in 0.0f64..100.0) {
        let im = vec![0.0; re.len()];
        let f = field(&re, &im);
        let out = propagate_padded(&f, z_km * 1e3, beta2_from_d(17.0, 1550e-9), 5);
        let (e0, e1) = (f.energy(), out.energy());
        prop_assert!((e1 - e0).abs() <= 1e-10 * e0.max(1e-300));
    }

    #[test]
    fn dispersion_composes(re in prop::collection::vec(-1.0f64..1.0, 8..64), im in prop::collection::vec(-1.0f64..1.0, 64), a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let f = field(&re, &im[..re.len()]);
        let beta2 = beta2_from_d(17.0, 1550e-9);
        let two = propagate_padded(&propagate_padded(&f, a * 1e3, beta2, 5), b * 1e3, beta2, 1);
        let one = propagate_padded(&f, (a + b) * 1e3, beta2, 5);
        prop_assert!(max_diff(&two.samples, &one.samples) < 1e-10);
        let short = propagate_fiber(&f, (a + b) * 1e3, beta2, 5);
        prop_assert_eq!(short.samples.len(), re.len());
        prop_assert!(max_diff(&short.samples, &one.samples[..re.len()]) < 1e-12);
    }

    #[test]
    fn lowpass_is_idempotent(x in prop::collection::vec(-1.0f64..1.0, 16..256)) {
        let once = lowpass_brickwall(&x, 32e9, FS);
        let twice = lowpass_brickwall(&once, 32e9, FS);
        let err = once.iter().zip(&twice).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1u64..1_000_000, frac in 0.0f64..=1.0) {
        let errors = ((trials as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(errors, trials, Z95);
        let p = errors as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12);
        prop_assert!(p - 1e-12 <= hi && hi <= 1.0);
    }

    #[test]
    fn snr_table_interpolates_linearly_in_db(d in 20.0f64..40.0) {
        let t = SnrTable::measured();
        let expected = 19.41 + (6.83 - 19.41) * (d - 20.0) / 20.0;
        prop_assert!((t.at(d) - expected).abs() < 1e-12);
    }
}

#[test]
fn hexacode_minimum_distance_is_four() {
    let book = hexacode_codebook();
    assert_eq!(book.len(), 64);
    let mut min = usize::MAX;
    for (i, a) in book.iter().enumerate() {
        for b in &book[i + 1..] {
            min = min.min(hamming(a, b));
        }
    }
    assert_eq!(min, 4);
}

#[test]
fn snr_table_clamps_outside_anchors() {
    let t = SnrTable::measured();
    assert_eq!(t.at(0.0), 19.41);
    assert_eq!(t.at(20.0), 19.41);
    assert_eq!(t.at(60.0), 5.6);
    assert_eq!(t.at(200.0), 3.73);
    assert!(SnrTable::new(vec![(40.0, 1.0), (20.0, 2.0)]).is_err());
}
