use rand::seq::SliceRandom;

use super::tape::{Parameter, Tape, Var};
use crate::error::Result;
use crate::rng::SimRng;

/// Magnitude below which a gradient coordinate is compared in absolute
/// rather than relative terms. Central differences of an O(1) loss carry
/// round-off of about `ε·|L|/h ≈ 5e-11` at `h = 1e-5`; below this floor that
/// noise, not the gradient, would set the relative error.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter name, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
    /// Coordinates passed over because a step of `±h` crosses a ReLU or
    /// clipping kink, where finite differences are meaningless.
    pub coords_skipped: usize,
}

/// `|a - b| / max(|a|, |b|, REL_ERROR_FLOOR)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares reverse-mode gradients with central differences of step `h`.
///
/// `build` must record a deterministic scalar loss for the given parameter
/// values (noise frozen). Coordinates are visited in random order until
/// `max_coords` smooth ones have been compared or all were visited.
pub fn grad_check<F>(
    params: &[Parameter],
    mut build: F,
    h: f64,
    max_coords: usize,
    rng: &mut SimRng,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &[Parameter]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = build(&mut tape, params)?;
    let grads = tape.backward(loss)?;

    let base = tape.kink_pattern();

    let mut coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, param)| (0..param.value.len()).map(move |i| (p, i)))
        .collect();
    coords.shuffle(rng);

    let mut work = params.to_vec();
    let mut eval = |work: &[Parameter]| -> Result<(f64, bool)> {
        let mut tape = Tape::new();
        let loss = build(&mut tape, work)?;
        Ok((tape.value(loss).item(), tape.kink_pattern() == base))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coords_checked: 0,
        coords_skipped: 0,
    };
    for (p, i) in coords {
        if report.coords_checked == max_coords {
            break;
        }
        let original = work[p].value.re()[i];
        work[p].value.re_mut()[i] = original + h;
        let (up, up_smooth) = eval(&work)?;
        work[p].value.re_mut()[i] = original - h;
        let (down, down_smooth) = eval(&work)?;
        work[p].value.re_mut()[i] = original;
        if !(up_smooth && down_smooth) {
            report.coords_skipped += 1;
            continue;
        }
        report.coords_checked += 1;

        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.get(&params[p].name).map_or(0.0, |g| g.re()[i]);
        let err = relative_error(analytic, numeric);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((params[p].name.clone(), i));
        }
    }
    Ok(report)
}
