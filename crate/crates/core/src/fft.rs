//! Thin wrappers around a thread-local `rustfft` planner.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::{Cell, RefCell};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static LINE_EVALS: Cell<usize> = const { Cell::new(0) };
}

/// In-place forward transform, `X[k] = sum x[n] e^{-j 2 pi k n / len}`.
pub(crate) fn forward(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place unnormalized inverse transform, `x[n] = sum X[k] e^{+j 2 pi k n / len}`.
pub(crate) fn inverse(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

pub(crate) fn bump_line_counter() {
    LINE_EVALS.with(|c| c.set(c.get() + 1));
}

/// Number of AF line evaluations performed on the calling thread so far.
pub fn line_evaluations() -> usize {
    LINE_EVALS.with(|c| c.get())
}

/// Reset the calling thread's line-evaluation counter.
pub fn reset_line_evaluations() {
    LINE_EVALS.with(|c| c.set(0));
}
