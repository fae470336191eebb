//! Cached FFT plans. Planners are kept per thread so concurrent callers never
//! contend on a lock.

use std::cell::RefCell;
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

thread_local! {
    static REAL_PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
    static COMPLEX_PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_real(len: usize) -> Arc<dyn RealToComplex<f64>> {
    REAL_PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse_real(len: usize) -> Arc<dyn ComplexToReal<f64>> {
    REAL_PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

pub(crate) fn forward_complex(len: usize) -> Arc<dyn Fft<f64>> {
    COMPLEX_PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse_complex(len: usize) -> Arc<dyn Fft<f64>> {
    COMPLEX_PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}
