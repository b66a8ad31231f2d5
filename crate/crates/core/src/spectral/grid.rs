/// Normalized radial frequency `d` of every bin of a centered
/// `(F, H, W)` spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    d2: Vec<f64>,
}

/// Normalized coordinate `2 f / N` of centered index `j`.
pub(crate) fn axis_coord(j: usize, n: usize) -> f64 {
    2.0 * (j as f64 - (n / 2) as f64) / n as f64
}

impl FreqGrid {
    pub fn new(frames: usize, height: usize, width: usize) -> Self {
        let ut: Vec<f64> = (0..frames).map(|j| axis_coord(j, frames)).collect();
        let uh: Vec<f64> = (0..height).map(|j| axis_coord(j, height)).collect();
        let uw: Vec<f64> = (0..width).map(|j| axis_coord(j, width)).collect();
        let mut d2 = Vec::with_capacity(frames * height * width);
        for t in &ut {
            for h in &uh {
                for w in &uw {
                    d2.push(t * t + h * h + w * w);
                }
            }
        }
        FreqGrid {
            frames,
            height,
            width,
            d2,
        }
    }

    pub fn len(&self) -> usize {
        self.d2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d2.is_empty()
    }

    /// Squared distance per bin, `(f, h, w)` row-major.
    pub fn d2(&self) -> &[f64] {
        &self.d2
    }

    pub fn d(&self, bin: usize) -> f64 {
        self.d2[bin].sqrt()
    }

    /// Centered index of the bin holding frequency `-f` for the bin at `i`.
    pub fn mirror(&self, bin: usize) -> usize {
        let (f, rest) = (bin / (self.height * self.width), bin % (self.height * self.width));
        let (h, w) = (rest / self.width, rest % self.width);
        let m = |j: usize, n: usize| {
            let c = n / 2;
            // centered j <-> freq j - c; -freq maps to 2c - j (mod n)
            (2 * c + n - j) % n
        };
        (m(f, self.frames) * self.height + m(h, self.height)) * self.width + m(w, self.width)
    }
}
