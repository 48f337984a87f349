use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub checked: usize,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `|a - n| / max(|a|, |n|)` over the checked coordinates.
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    /// Worst per-tensor relative error (diagnostic).
    pub max_rel_err: f64,
    /// `|a - n| / max(|a|, |n|)` over every checked coordinate at once.
    pub rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            writeln!(f, "{:<32} n={:<5} |a|={:.3e} rel={:.2e}", e.name, e.checked, e.analytic_norm, e.rel_err)?;
        }
        write!(
            f,
            "rel err {:.3e}, worst tensor {:.3e} (tol {:.1e}) {}",
            self.rel_err,
            self.max_rel_err,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

/// Compare reverse-mode gradients of `loss` against central differences with
/// step `h`. At most `max_coords` coordinates are perturbed in total, spread
/// evenly across parameters. Norms below `1e-7` on both sides count as agreement.
pub fn gradient_check<F>(store: &mut ParamStore, loss: F, h: f32, tolerance: f64, max_coords: usize) -> GradCheckReport
where
    F: Fn(&mut Tape<'_>) -> Var,
{
    let analytic = {
        let mut tape = Tape::wide(store);
        let l = loss(&mut tape);
        tape.backward(l).expect("loss is a finite scalar")
    };
    let eval = |store: &ParamStore| -> f64 {
        let mut tape = Tape::wide(store);
        let l = loss(&mut tape);
        tape.scalar(l)
    };
    let total = store.num_scalars().max(1);
    let mut entries = Vec::new();
    let (mut g_diff, mut g_an, mut g_nn) = (0.0f64, 0.0f64, 0.0f64);
    for id in store.ids().collect::<Vec<ParamId>>() {
        let n = store.get(id).len();
        let budget = ((max_coords as f64 * n as f64 / total as f64).ceil() as usize).clamp(1, n.max(1));
        let stride = (n / budget).max(1);
        let (mut diff, mut an, mut nn, mut checked) = (0.0f64, 0.0f64, 0.0f64, 0usize);
        for j in (0..n).step_by(stride).take(budget) {
            let orig = store.get(id).data[j];
            store.get_mut(id).data[j] = orig + h;
            let up = eval(store);
            store.get_mut(id).data[j] = orig - h;
            let down = eval(store);
            store.get_mut(id).data[j] = orig;
            let num = (up - down) / (2.0 * h as f64);
            let a = analytic.get(id).data[j] as f64;
            diff += (a - num).powi(2);
            an += a * a;
            nn += num * num;
            checked += 1;
        }
        g_diff += diff;
        g_an += an;
        g_nn += nn;
        let (an, nn) = (an.sqrt(), nn.sqrt());
        let scale = an.max(nn);
        let rel_err = if scale < 1e-7 { 0.0 } else { diff.sqrt() / scale };
        entries.push(GradCheckEntry {
            name: store.param(id).name.clone(),
            checked,
            analytic_norm: an,
            numeric_norm: nn,
            rel_err,
        });
    }
    let max_rel_err = entries.iter().map(|e| e.rel_err).fold(0.0, f64::max);
    let scale = g_an.max(g_nn).sqrt();
    let rel_err = if scale < 1e-7 { 0.0 } else { g_diff.sqrt() / scale };
    GradCheckReport { entries, max_rel_err, rel_err, tolerance, passed: rel_err < tolerance }
}
