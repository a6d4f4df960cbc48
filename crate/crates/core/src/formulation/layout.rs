use crate::problem::Family;

/// Index map of the footstep MIQP. All accessors take 0-based step,
/// configuration, region and segment indices; variable names use 1-based ones.
///
/// Order: footstep coordinates, yaw, sine, cosine, region binaries,
/// sine-segment binaries, cosine-segment binaries, trim binaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub n_steps: usize,
    pub n_legs: usize,
    pub n_regions: usize,
    pub n_segments: usize,
    f_start: usize,
    theta_start: usize,
    sin_start: usize,
    cos_start: usize,
    region_start: usize,
    sin_seg_start: usize,
    cos_seg_start: usize,
    trim_start: usize,
    total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Footstep coordinate (step, axis).
    Foot(usize, usize),
    Theta(usize),
    Sin(usize),
    Cos(usize),
    Region(usize, usize),
    SinSegment(usize, usize),
    CosSegment(usize, usize),
    Trim(usize),
}

impl VariableLayout {
    pub fn new(n_steps: usize, n_legs: usize, n_regions: usize, n_segments: usize) -> Self {
        assert!(n_legs > 0 && n_steps % n_legs == 0, "steps must fill whole configurations");
        let n_configs = n_steps / n_legs;
        let f_start = 0;
        let theta_start = f_start + 3 * n_steps;
        let sin_start = theta_start + n_configs;
        let cos_start = sin_start + n_configs;
        let region_start = cos_start + n_configs;
        let sin_seg_start = region_start + n_steps * n_regions;
        let cos_seg_start = sin_seg_start + n_configs * n_segments;
        let trim_start = cos_seg_start + n_configs * n_segments;
        let total = trim_start + n_steps;
        Self {
            n_steps,
            n_legs,
            n_regions,
            n_segments,
            f_start,
            theta_start,
            sin_start,
            cos_start,
            region_start,
            sin_seg_start,
            cos_seg_start,
            trim_start,
            total,
        }
    }

    pub fn n_configs(&self) -> usize {
        self.n_steps / self.n_legs
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn foot(&self, step: usize, axis: usize) -> usize {
        debug_assert!(step < self.n_steps && axis < 3);
        self.f_start + 3 * step + axis
    }

    pub fn theta(&self, config: usize) -> usize {
        self.theta_start + config
    }

    pub fn sin(&self, config: usize) -> usize {
        self.sin_start + config
    }

    pub fn cos(&self, config: usize) -> usize {
        self.cos_start + config
    }

    pub fn region(&self, step: usize, region: usize) -> usize {
        debug_assert!(region < self.n_regions);
        self.region_start + step * self.n_regions + region
    }

    pub fn sin_segment(&self, config: usize, segment: usize) -> usize {
        self.sin_seg_start + config * self.n_segments + segment
    }

    pub fn cos_segment(&self, config: usize, segment: usize) -> usize {
        self.cos_seg_start + config * self.n_segments + segment
    }

    pub fn trim(&self, step: usize) -> usize {
        self.trim_start + step
    }

    pub fn config_of_step(&self, step: usize) -> usize {
        step / self.n_legs
    }

    /// Closed-form binary count `N N_r + 2 (N / n_legs) N_s + N`.
    pub fn binary_count(&self) -> usize {
        self.n_steps * self.n_regions + 2 * self.n_configs() * self.n_segments + self.n_steps
    }

    /// Closed-form continuous count `3 N + 3 (N / n_legs)`.
    pub fn continuous_count(&self) -> usize {
        3 * self.n_steps + 3 * self.n_configs()
    }

    pub fn binaries(&self) -> std::ops::Range<usize> {
        self.region_start..self.total
    }

    pub fn kind(&self, j: usize) -> VarKind {
        assert!(j < self.total, "variable {j} out of range");
        let (nr, ns) = (self.n_regions.max(1), self.n_segments.max(1));
        if j < self.theta_start {
            let k = j - self.f_start;
            VarKind::Foot(k / 3, k % 3)
        } else if j < self.sin_start {
            VarKind::Theta(j - self.theta_start)
        } else if j < self.cos_start {
            VarKind::Sin(j - self.sin_start)
        } else if j < self.region_start {
            VarKind::Cos(j - self.cos_start)
        } else if j < self.sin_seg_start {
            let k = j - self.region_start;
            VarKind::Region(k / nr, k % nr)
        } else if j < self.cos_seg_start {
            let k = j - self.sin_seg_start;
            VarKind::SinSegment(k / ns, k % ns)
        } else if j < self.trim_start {
            let k = j - self.cos_seg_start;
            VarKind::CosSegment(k / ns, k % ns)
        } else {
            VarKind::Trim(j - self.trim_start)
        }
    }

    pub fn family(&self, j: usize) -> Family {
        match self.kind(j) {
            VarKind::Foot(..) => Family::Geometric,
            VarKind::Theta(_) | VarKind::Sin(_) | VarKind::Cos(_) => Family::Trig,
            VarKind::SinSegment(..) | VarKind::CosSegment(..) => Family::Trig,
            VarKind::Region(..) => Family::Region,
            VarKind::Trim(_) => Family::Trim,
        }
    }

    pub fn name(&self, j: usize) -> String {
        match self.kind(j) {
            VarKind::Foot(i, axis) => format!("f{}_{}", ["x", "y", "z"][axis], i + 1),
            VarKind::Theta(c) => format!("theta_{}", c + 1),
            VarKind::Sin(c) => format!("s_{}", c + 1),
            VarKind::Cos(c) => format!("c_{}", c + 1),
            VarKind::Region(i, r) => format!("H_{}_{}", i + 1, r + 1),
            VarKind::SinSegment(c, k) => format!("S_{}_{}", c + 1, k + 1),
            VarKind::CosSegment(c, k) => format!("C_{}_{}", c + 1, k + 1),
            VarKind::Trim(i) => format!("t_{}", i + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_contiguous_and_disjoint() {
        let l = VariableLayout::new(12, 6, 13, 8);
        let mut seen = vec![false; l.total()];
        let mut mark = |j: usize| {
            assert!(!seen[j], "index {j} assigned twice");
            seen[j] = true;
        };
        for i in 0..12 {
            for a in 0..3 {
                mark(l.foot(i, a));
            }
            for r in 0..13 {
                mark(l.region(i, r));
            }
            mark(l.trim(i));
        }
        for c in 0..2 {
            mark(l.theta(c));
            mark(l.sin(c));
            mark(l.cos(c));
            for k in 0..8 {
                mark(l.sin_segment(c, k));
                mark(l.cos_segment(c, k));
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(l.binary_count(), 200);
        assert_eq!(l.continuous_count(), 42);
        assert_eq!(l.binaries().len(), 200);
    }

    #[test]
    fn kinds_round_trip() {
        let l = VariableLayout::new(8, 4, 3, 5);
        assert_eq!(l.kind(l.region(5, 2)), VarKind::Region(5, 2));
        assert_eq!(l.kind(l.cos_segment(1, 4)), VarKind::CosSegment(1, 4));
        assert_eq!(l.kind(l.foot(7, 2)), VarKind::Foot(7, 2));
        assert_eq!(l.name(l.trim(0)), "t_1");
        assert_eq!(l.name(l.foot(2, 1)), "fy_3");
    }
}
