use crate::error::{Error, Result};

/// Time levels 0 = t₀ < t₁ < … < t_N = T.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        match times.first() {
            None => return Err(Error::Validation("time grid is empty".into())),
            Some(&t0) if t0 != 0.0 => {
                return Err(Error::Validation(format!(
                    "time grid must start at 0, got {t0}"
                )))
            }
            _ => {}
        }
        for (n, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Validation(format!(
                    "time grid is not strictly increasing at level {}",
                    n + 1
                )));
            }
        }
        Ok(TimeGrid { times })
    }

    /// N equal steps on [0, T]. N = 0 requires T = 0.
    pub fn uniform(final_time: f64, n_steps: usize) -> Result<Self> {
        if !(final_time >= 0.0) || !final_time.is_finite() {
            return Err(Error::Validation(format!(
                "final time must be non-negative, got {final_time}"
            )));
        }
        if n_steps == 0 {
            if final_time != 0.0 {
                return Err(Error::Validation(
                    "zero steps require a zero final time".into(),
                ));
            }
            return Ok(TimeGrid { times: vec![0.0] });
        }
        if final_time == 0.0 {
            return Err(Error::Validation(
                "positive step count requires a positive final time".into(),
            ));
        }
        let mut times: Vec<f64> = (0..=n_steps)
            .map(|n| final_time * n as f64 / n_steps as f64)
            .collect();
        times[n_steps] = final_time;
        TimeGrid::new(times)
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, n: usize) -> f64 {
        self.times[n]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// δt_{n+½} = t_{n+1} − t_n
    pub fn step(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    pub fn max_step(&self) -> f64 {
        (0..self.n_steps())
            .map(|n| self.step(n))
            .fold(0.0, f64::max)
    }
}
