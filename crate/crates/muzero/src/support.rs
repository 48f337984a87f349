/// Integer atoms `-max..=max` for categorical value and reward heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Support {
    pub max: i32,
}

impl Support {
    pub fn new(max: i32) -> Support {
        assert!(max > 0, "support must be positive");
        Support { max }
    }

    pub fn atoms(&self) -> usize {
        (2 * self.max + 1) as usize
    }

    pub fn atom_value(&self, index: usize) -> i32 {
        index as i32 - self.max
    }

    /// Two-hot projection onto the neighbouring atoms, clamping to the range.
    pub fn two_hot(&self, x: f32) -> Vec<f32> {
        let mut out = vec![0.0; self.atoms()];
        self.two_hot_into(x, &mut out);
        out
    }

    pub fn two_hot_into(&self, x: f32, out: &mut [f32]) {
        assert_eq!(out.len(), self.atoms());
        out.iter_mut().for_each(|v| *v = 0.0);
        let x = if x.is_nan() { 0.0 } else { (x as f64).clamp(-self.max as f64, self.max as f64) };
        let lo = x.floor();
        let frac = x - lo;
        let i = (lo as i32 + self.max) as usize;
        if frac == 0.0 {
            out[i] = 1.0;
        } else {
            out[i] = (1.0 - frac) as f32;
            out[i + 1] = frac as f32;
        }
    }

    /// Expected atom value of a distribution.
    pub fn expectation(&self, probs: &[f32]) -> f32 {
        assert_eq!(probs.len(), self.atoms());
        probs.iter().enumerate().map(|(i, &p)| p as f64 * self.atom_value(i) as f64).sum::<f64>() as f32
    }

    /// Expected value of `softmax(logits)`.
    pub fn decode_logits(&self, logits: &[f32]) -> f32 {
        self.expectation(&softmax(logits))
    }
}

pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = logits.iter().map(|&z| ((z - max) as f64).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| (e / z) as f32).collect()
}

/// Softmax over the entries where `mask` is true; zero elsewhere.
pub fn masked_softmax(logits: &[f32], mask: &[bool]) -> Vec<f32> {
    assert_eq!(logits.len(), mask.len());
    let max = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(&z, _)| z).fold(f32::NEG_INFINITY, f32::max);
    if !max.is_finite() {
        return vec![0.0; logits.len()];
    }
    let exps: Vec<f64> =
        logits.iter().zip(mask).map(|(&z, &m)| if m { ((z - max) as f64).exp() } else { 0.0 }).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| (e / z) as f32).collect()
}
