use std::fmt;
use std::sync::Arc;

/// A shareable real function of one real variable.
#[derive(Clone)]
pub struct ScalarFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ScalarFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(value: f64) -> Self {
        Self::new(move |_| value)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}
