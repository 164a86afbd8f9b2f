//! Polak–Ribière nonlinear conjugate gradient with a strong Wolfe line search.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub max_iterations: usize,
    /// Stop once the gradient's Euclidean norm falls below this.
    pub gradient_tolerance: f64,
    /// Armijo constant `c1`.
    pub sufficient_decrease: f64,
    /// Strong Wolfe curvature constant `c2`.
    pub curvature: f64,
    /// Objective evaluations allowed in one line search.
    pub max_line_search_evals: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-5,
            sufficient_decrease: 1e-4,
            curvature: 0.9,
            max_line_search_evals: 25,
        }
    }
}

impl CgOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.max_line_search_evals == 0 {
            return Err(Error::config("iteration and evaluation limits must be positive"));
        }
        if self.gradient_tolerance.is_nan() || self.gradient_tolerance <= 0.0 {
            return Err(Error::config("gradient tolerance must be positive"));
        }
        let (c1, c2) = (self.sufficient_decrease, self.curvature);
        if !(0.0 < c1 && c1 < c2 && c2 < 1.0) {
            return Err(Error::config(format!(
                "line search constants need 0 < c1 < c2 < 1, got c1={c1}, c2={c2}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    /// Gradient norm dropped below the tolerance.
    Converged,
    MaxIterations,
    /// No acceptable step along the steepest-descent direction; the iterate
    /// is as good as the line search can make it.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgReport {
    pub x: Vec<f64>,
    pub cost: f64,
    pub gradient_norm: f64,
    /// Cost at the start and after every accepted iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: CgStatus,
}

/// A point on the search line: step length, cost, directional derivative
/// and full gradient.
#[derive(Debug, Clone)]
struct LinePoint {
    alpha: f64,
    f: f64,
    df: f64,
    g: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of the cubic matching values and slopes at two points
/// (`None` when the cubic has no interior minimum).
fn cubic_min(a: (f64, f64, f64), b: (f64, f64, f64)) -> Option<f64> {
    let (a0, f0, d0) = a;
    let (a1, f1, d1) = b;
    if a0 == a1 {
        return None;
    }
    let t1 = d0 + d1 - 3.0 * (f0 - f1) / (a0 - a1);
    let disc = t1 * t1 - d0 * d1;
    if disc < 0.0 {
        return None;
    }
    let t2 = (a1 - a0).signum() * disc.sqrt();
    let denom = d1 - d0 + 2.0 * t2;
    if denom == 0.0 {
        return None;
    }
    let m = a1 - (a1 - a0) * (d1 + t2 - t1) / denom;
    m.is_finite().then_some(m)
}

struct Search<'a, F> {
    objective: F,
    x: &'a [f64],
    dir: &'a [f64],
    trial: Vec<f64>,
    f0: f64,
    df0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
    evaluations: usize,
    iteration: usize,
}

impl<F> Search<'_, F>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    fn at(&mut self, alpha: f64) -> Result<LinePoint> {
        for ((t, x), d) in self.trial.iter_mut().zip(self.x).zip(self.dir) {
            *t = x + alpha * d;
        }
        let mut g = vec![0.0; self.x.len()];
        let f = evaluate(&mut self.objective, &self.trial, &mut g, self.iteration)?;
        self.evaluations += 1;
        self.budget -= 1;
        Ok(LinePoint {
            alpha,
            f,
            df: dot(&g, self.dir),
            g,
        })
    }

    /// Sufficient decrease. Near a minimum the cost difference drowns in
    /// rounding, so the slope form `φ'(α) ≤ (2c1 − 1)·φ'(0)` (equivalent on a
    /// quadratic) is also accepted as long as the cost did not go up.
    fn armijo(&self, p: &LinePoint) -> bool {
        p.f <= self.f0 + self.c1 * p.alpha * self.df0
            || (p.f <= self.f0 && p.df <= (2.0 * self.c1 - 1.0) * self.df0)
    }

    fn curvature(&self, p: &LinePoint) -> bool {
        p.df.abs() <= -self.c2 * self.df0
    }

    fn origin(&self) -> (f64, f64, f64) {
        (0.0, self.f0, self.df0)
    }

    fn run(&mut self, alpha0: f64) -> Result<Option<LinePoint>> {
        let mut prev: Option<LinePoint> = None;
        let mut alpha = alpha0;
        let mut first = true;
        while self.budget > 0 {
            let cur = self.at(alpha)?;
            let prev_f = prev.as_ref().map_or(self.f0, |p| p.f);
            if !self.armijo(&cur) || (!first && cur.f >= prev_f) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return if first { self.refine(cur).map(Some) } else { Ok(Some(cur)) };
            }
            if cur.df >= 0.0 {
                return self.zoom(Some(cur), prev.unwrap_or_else(|| self.origin_point()));
            }
            let from = prev.as_ref().map_or(self.origin(), |p| (p.alpha, p.f, p.df));
            let next = cubic_min(from, (cur.alpha, cur.f, cur.df))
                .filter(|&m| m > cur.alpha)
                .unwrap_or(3.0 * cur.alpha);
            alpha = next.clamp(1.1 * cur.alpha, 3.0 * cur.alpha);
            prev = Some(cur);
            first = false;
        }
        Ok(prev)
    }

    fn origin_point(&self) -> LinePoint {
        LinePoint {
            alpha: 0.0,
            f: self.f0,
            df: self.df0,
            g: Vec::new(),
        }
    }

    /// One cubic step from the first acceptable trial. On a quadratic this
    /// lands on the exact line minimum, which keeps the directions conjugate.
    fn refine(&mut self, cur: LinePoint) -> Result<LinePoint> {
        if cur.df.abs() <= 0.1 * -self.df0 || self.budget == 0 {
            return Ok(cur);
        }
        let Some(m) = cubic_min(self.origin(), (cur.alpha, cur.f, cur.df)) else {
            return Ok(cur);
        };
        if !(m > 0.0 && m < 3.0 * cur.alpha) || ((m - cur.alpha) / cur.alpha).abs() < 1e-3 {
            return Ok(cur);
        }
        let cand = self.at(m)?;
        if cand.f < cur.f && self.armijo(&cand) && self.curvature(&cand) {
            Ok(cand)
        } else {
            Ok(cur)
        }
    }

    /// `lo` satisfies the Armijo condition with the lower cost; the
    /// minimizer lies between `lo` and `hi`.
    fn zoom(&mut self, lo: Option<LinePoint>, hi: LinePoint) -> Result<Option<LinePoint>> {
        let mut lo = lo.unwrap_or_else(|| self.origin_point());
        let mut hi = hi;
        while self.budget > 0 {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= f64::EPSILON * b.max(1e-300) {
                break;
            }
            let guard = 0.1 * width;
            let alpha = cubic_min((lo.alpha, lo.f, lo.df), (hi.alpha, hi.f, hi.df))
                .filter(|&m| m > a + guard && m < b - guard)
                .unwrap_or(0.5 * (a + b));
            let cur = self.at(alpha)?;
            // On a cost tie (rounding level) the slope sign decides.
            let worse = cur.f > lo.f || (cur.f == lo.f && cur.df >= 0.0);
            if !self.armijo(&cur) || worse {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Ok(Some(cur));
                }
                if cur.df * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        // Budget exhausted: fall back to the best sufficient-decrease point.
        Ok((lo.alpha > 0.0).then_some(lo))
    }
}

fn evaluate<F>(objective: &mut F, x: &[f64], g: &mut [f64], iteration: usize) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let f = objective(x, g)?;
    if !f.is_finite() {
        return Err(Error::Numerical(format!(
            "objective returned cost {f} at CG iteration {iteration}"
        )));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "gradient component {i} is {} at CG iteration {iteration}",
            g[i]
        )));
    }
    Ok(f)
}

/// Minimizes `objective`, which writes the gradient into its second
/// argument and returns the cost.
///
/// Search directions follow Polak–Ribière with the `β ≥ 0` restart; a
/// direction that is not a descent direction is replaced by the negative
/// gradient. Every accepted step satisfies the Armijo condition, so the
/// recorded cost sequence never increases.
pub fn minimize_cg<F>(mut objective: F, initial: &[f64], options: &CgOptions) -> Result<CgReport>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    options.validate()?;
    let n = initial.len();
    let mut x = initial.to_vec();
    let mut g = vec![0.0; n];
    let mut f = evaluate(&mut objective, &x, &mut g, 0)?;
    let mut evaluations = 1;
    let mut trace = vec![f];
    let mut gg = dot(&g, &g);
    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut steepest = true;
    let mut last_step: Option<(f64, f64)> = None;
    let mut iterations = 0;

    let status = loop {
        if gg.sqrt() < options.gradient_tolerance {
            break CgStatus::Converged;
        }
        if iterations >= options.max_iterations {
            break CgStatus::MaxIterations;
        }
        let mut df0 = dot(&g, &dir);
        if df0 >= 0.0 {
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            df0 = -gg;
            steepest = true;
        }
        let alpha0 = last_step
            .map(|(alpha, df)| alpha * df / df0)
            .filter(|a| a.is_finite() && *a > 0.0)
            .unwrap_or_else(|| 1.0 / gg.sqrt());

        let mut search = Search {
            objective: &mut objective,
            x: &x,
            dir: &dir,
            trial: vec![0.0; n],
            f0: f,
            df0,
            c1: options.sufficient_decrease,
            c2: options.curvature,
            budget: options.max_line_search_evals,
            evaluations: 0,
            iteration: iterations,
        };
        let found = search.run(alpha0)?;
        evaluations += search.evaluations;

        let Some(p) = found.filter(|p| p.f <= f) else {
            if steepest {
                break CgStatus::LineSearchStalled;
            }
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            steepest = true;
            last_step = None;
            continue;
        };

        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi += p.alpha * di;
        }
        let beta = (dot(&p.g, &p.g) - dot(&p.g, &g)) / gg;
        let beta = if beta.is_finite() { beta.max(0.0) } else { 0.0 };
        for (d, gi) in dir.iter_mut().zip(&p.g) {
            *d = -gi + beta * *d;
        }
        steepest = beta == 0.0;
        last_step = Some((p.alpha, df0));
        g = p.g;
        gg = dot(&g, &g);
        f = p.f;
        trace.push(f);
        iterations += 1;
    };

    Ok(CgReport {
        x,
        cost: f,
        gradient_norm: gg.sqrt(),
        trace,
        iterations,
        evaluations,
        status,
    })
}
