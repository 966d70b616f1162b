//! Row-wise unitary DFT helpers shared by the tape and the non-differentiable
//! signal routines.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANS: RefCell<Plans> = RefCell::new(Plans::default());
    static REAL_PLANS: RefCell<RealPlans> = RefCell::new(RealPlans::default());
}

#[derive(Default)]
struct RealPlans {
    planner: RealFftPlanner<f64>,
    cache: HashMap<usize, (Arc<dyn RealToComplex<f64>>, Arc<dyn ComplexToReal<f64>>)>,
}

struct Plans {
    planner: FftPlanner<f64>,
    cache: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

impl Default for Plans {
    fn default() -> Self {
        Self {
            planner: FftPlanner::new(),
            cache: HashMap::new(),
        }
    }
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        let mut p = p.borrow_mut();
        if let Some(f) = p.cache.get(&(len, inverse)) {
            return f.clone();
        }
        let f = if inverse {
            p.planner.plan_fft_inverse(len)
        } else {
            p.planner.plan_fft_forward(len)
        };
        p.cache.insert((len, inverse), f.clone());
        f
    })
}

/// In-place unitary transform of every length-`cols` row of `data`.
///
/// Forward uses `exp(-j 2π k t / L)`, both directions scale by `1/√L`, so
/// the pair is mutually inverse and each is the adjoint of the other.
pub fn unitary_rows(data: &mut [Complex64], cols: usize, inverse: bool) {
    if cols == 0 || data.is_empty() {
        return;
    }
    debug_assert_eq!(data.len() % cols, 0);
    let fft = plan(cols, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    let scale = 1.0 / (cols as f64).sqrt();
    data.iter_mut().for_each(|x| *x *= scale);
}

pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = x.to_vec();
    unitary_rows(&mut out, x.len(), false);
    out
}

pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = x.to_vec();
    unitary_rows(&mut out, x.len(), true);
    out
}

/// Applies a real spectral `mask` of `cols / 2 + 1` bins (DC up to Nyquist)
/// to every length-`cols` row of `data`, in place.
///
/// The mask acts on negative frequencies by symmetry, so the result stays
/// real and the map is self-adjoint.
pub fn filter_real_rows(data: &mut [f64], cols: usize, mask: &[f64]) {
    if cols == 0 || data.is_empty() {
        return;
    }
    debug_assert_eq!(data.len() % cols, 0);
    debug_assert_eq!(mask.len(), cols / 2 + 1);
    let (fwd, inv) = REAL_PLANS.with(|p| {
        let mut p = p.borrow_mut();
        let RealPlans { planner, cache } = &mut *p;
        cache
            .entry(cols)
            .or_insert_with(|| {
                (
                    planner.plan_fft_forward(cols),
                    planner.plan_fft_inverse(cols),
                )
            })
            .clone()
    });
    let mut spec = fwd.make_output_vec();
    let mut fwd_scratch = fwd.make_scratch_vec();
    let mut inv_scratch = inv.make_scratch_vec();
    let mut buf = vec![0.0; cols];
    let scale = 1.0 / cols as f64;
    for row in data.chunks_mut(cols) {
        buf.copy_from_slice(row);
        fwd.process_with_scratch(&mut buf, &mut spec, &mut fwd_scratch)
            .expect("buffer sizes match the plan");
        for (c, &m) in spec.iter_mut().zip(mask) {
            *c *= m * scale;
        }
        // DC and (even length) Nyquist bins of a real signal are real
        spec[0].im = 0.0;
        if cols.is_multiple_of(2) {
            spec[cols / 2].im = 0.0;
        }
        inv.process_with_scratch(&mut spec, row, &mut inv_scratch)
            .expect("buffer sizes match the plan");
    }
}
