/// Step-size multiplier policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    Constant,
    /// Halve the step whenever the observed loss has not improved for
    /// `patience` consecutive observations.
    PlateauHalving { patience: usize },
}

/// Tracks the best loss seen and halves a multiplier on plateaus.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauHalving {
    patience: usize,
    best: f64,
    since_best: usize,
    scale: f64,
}

impl PlateauHalving {
    pub fn new(patience: usize) -> Self {
        Self { patience: patience.max(1), best: f64::INFINITY, since_best: 0, scale: 1.0 }
    }

    /// Records a loss and returns the current multiplier.
    pub fn observe(&mut self, loss: f64) -> f64 {
        if loss < self.best {
            self.best = loss;
            self.since_best = 0;
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                self.scale *= 0.5;
                self.since_best = 0;
            }
        }
        self.scale
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl StepSchedule {
    pub fn tracker(self) -> Option<PlateauHalving> {
        match self {
            StepSchedule::Constant => None,
            StepSchedule::PlateauHalving { patience } => Some(PlateauHalving::new(patience)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves_after_patience() {
        let mut p = PlateauHalving::new(3);
        assert_eq!(p.observe(1.0), 1.0);
        assert_eq!(p.observe(1.0), 1.0);
        assert_eq!(p.observe(2.0), 1.0);
        assert_eq!(p.observe(1.5), 0.5);
        assert_eq!(p.observe(0.5), 0.5);
    }
}
