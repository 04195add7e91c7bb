//! Central finite-difference verification of tape gradients.

use crate::autodiff::params::ParamStore;
use crate::autodiff::tape::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub n_checked: usize,
    pub passed: bool,
}

/// Compares every analytic gradient entry of `loss_fn` against a central
/// difference with the given `step`. The relative error of one entry is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(loss_fn: F, params: &ParamStore, step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    if step.is_nan() || step <= 0.0 {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let eval = |p: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, p)?;
        Ok(tape.value(loss).item())
    };

    let mut base = params.values_only();
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, &base)?;
    let v0 = tape.value(loss).item();
    if eval(&base)?.to_bits() != v0.to_bits() {
        return Err(Error::invalid("loss function is not deterministic"));
    }
    tape.backward(loss)?;
    tape.accumulate_into(&mut base)?;

    let names: Vec<String> = base.names().map(str::to_string).collect();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        n_checked: 0,
        passed: true,
    };
    for name in names {
        let analytic = base.grad(&name).expect("registered").clone();
        for k in 0..analytic.len() {
            let mut probe = base.values_only();
            let orig = probe.value(&name).expect("present").data()[k];
            probe.value_mut(&name).expect("present").data_mut()[k] = orig + step;
            let up = eval(&probe)?;
            probe.value_mut(&name).expect("present").data_mut()[k] = orig - step;
            let down = eval(&probe)?;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic.data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.n_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((name.clone(), k));
            }
        }
    }
    report.passed = report.max_rel_err <= tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::tensor::Tensor;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert(
            "w",
            Tensor::from_vec(2, 2, vec![0.3, -1.2, 2.0, 0.7]).unwrap(),
        );
        s
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let r = grad_check(
            |t, p| {
                let _ = t.param(p, "w")?;
                t.constant(Tensor::scalar(4.0))
            },
            &store(),
            1e-5,
            1e-7,
        )
        .unwrap();
        assert_eq!(r.max_rel_err, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn half_squared_norm() {
        let r = grad_check(
            |t, p| {
                let w = t.param(p, "w")?;
                let sq = t.mul(w, w)?;
                let s = t.sum(sq)?;
                t.scale(s, 0.5)
            },
            &store(),
            1e-5,
            1e-7,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn nondeterminism_detected() {
        use std::cell::Cell;
        let calls = Cell::new(0.0);
        let r = grad_check(
            |t, p| {
                let _ = t.param(p, "w")?;
                calls.set(calls.get() + 1.0);
                t.constant(Tensor::scalar(calls.get()))
            },
            &store(),
            1e-5,
            1e-6,
        );
        assert!(r.is_err());
    }
}
