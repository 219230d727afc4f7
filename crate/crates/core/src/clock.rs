/// Source of elapsed wall time, in seconds since some fixed origin.
pub trait Clock {
    fn elapsed_secs(&self) -> f64;
}

/// A clock that never advances. Time limits never trigger under it.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_secs(&self) -> f64 {
        0.0
    }
}

impl<C: Clock + ?Sized> Clock for &C {
    fn elapsed_secs(&self) -> f64 {
        (**self).elapsed_secs()
    }
}
