//! Convex outer envelopes of `sin`, `cos`, `x²` and bilinear products.
//!
//! Each function adds rows linking an argument expression `x` (and `y`) to a
//! result expression `z` so that every point of the true graph over the given
//! box stays feasible. Quadratic rows are emitted as rotated cones.

use std::f64::consts::FRAC_PI_2;

use crate::conic::{ConicProgram, LinExpr};

use super::RelaxError;

fn check(what: &'static str, lo: f64, hi: f64, trig: bool) -> Result<(), RelaxError> {
    let ok = lo.is_finite() && hi.is_finite() && lo <= hi && (!trig || (lo > -FRAC_PI_2 && hi < FRAC_PI_2));
    if ok {
        Ok(())
    } else {
        Err(RelaxError::InvalidInterval { what, lo, hi })
    }
}

/// Tangent lines at `±x_M/2`; a degenerate interval pins `z = sin(lo)`.
pub fn envelope_sin(program: &mut ConicProgram, x: &LinExpr, z: &LinExpr, lo: f64, hi: f64) -> Result<(), RelaxError> {
    check("sin envelope", lo, hi, true)?;
    if lo == hi {
        program.add_eq(z.clone(), lo.sin(), "env_sin");
        return Ok(());
    }
    let half = lo.abs().max(hi.abs()) / 2.0;
    let (c, s) = (half.cos(), half.sin());
    // z − c·x ≤ s − c·half  and  z − c·x ≥ c·half − s
    let lhs = z.clone().add_expr(x, -c);
    program.add_le(lhs.clone(), s - c * half, "env_sin");
    program.add_ge(lhs, c * half - s, "env_sin");
    Ok(())
}

/// Quadratic cap `z ≤ 1 − k·x²` and the chord through the endpoints.
pub fn envelope_cos(program: &mut ConicProgram, x: &LinExpr, z: &LinExpr, lo: f64, hi: f64) -> Result<(), RelaxError> {
    check("cos envelope", lo, hi, true)?;
    let xm = lo.abs().max(hi.abs());
    let k = if xm < 1e-6 { 0.5 } else { (1.0 - xm.cos()) / (xm * xm) };
    // k·x² ≤ (1 − z)·1
    program.add_rotated(LinExpr::constant(1.0).add_expr(z, -1.0), LinExpr::constant(1.0), vec![x.scaled(k.sqrt())]);
    let slope = if lo == hi { -lo.sin() } else { (lo.cos() - hi.cos()) / (lo - hi) };
    // z ≥ slope·(x − lo) + cos(lo)
    program.add_ge(z.clone().add_expr(x, -slope), lo.cos() - slope * lo, "env_cos");
    Ok(())
}

/// Chord `z ≤ (x_L + x_U)x − x_L x_U` and `z ≥ x²`.
pub fn envelope_sq(program: &mut ConicProgram, x: &LinExpr, z: &LinExpr, lo: f64, hi: f64) -> Result<(), RelaxError> {
    check("square envelope", lo, hi, false)?;
    program.add_le(z.clone().add_expr(x, -(lo + hi)), -lo * hi, "env_sq");
    program.add_rotated(z.clone(), LinExpr::constant(1.0), vec![x.clone()]);
    Ok(())
}

/// The four McCormick rows of `z = x·y` over `[x_L, x_U] × [y_L, y_U]`.
pub fn envelope_mccormick(
    program: &mut ConicProgram,
    x: &LinExpr,
    y: &LinExpr,
    z: &LinExpr,
    (xl, xu): (f64, f64),
    (yl, yu): (f64, f64),
) -> Result<(), RelaxError> {
    check("McCormick x range", xl, xu, false)?;
    check("McCormick y range", yl, yu, false)?;
    // z − a·y − b·x compared against −a·b for the corner (a, b).
    let corner = |a: f64, b: f64| z.clone().add_expr(y, -a).add_expr(x, -b);
    program.add_ge(corner(xl, yl), -xl * yl, "env_mc");
    program.add_ge(corner(xu, yu), -xu * yu, "env_mc");
    program.add_le(corner(xl, yu), -xl * yu, "env_mc");
    program.add_le(corner(xu, yl), -xu * yl, "env_mc");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::VarId;
    use std::f64::consts::PI;

    fn unary(emit: impl Fn(&mut ConicProgram, &LinExpr, &LinExpr) -> Result<(), RelaxError>) -> ConicProgram {
        let mut p = ConicProgram::new();
        let x = p.free_var("x");
        let z = p.free_var("z");
        emit(&mut p, &x.into(), &z.into()).unwrap();
        p
    }

    fn feasible(p: &ConicProgram, x: &[f64]) -> bool {
        p.max_violation(x) <= 1e-9
    }

    #[test]
    fn sin_contains_origin() {
        let p = unary(|p, x, z| envelope_sin(p, x, z, -PI / 3.0, PI / 3.0));
        assert!(feasible(&p, &[0.0, 0.0]));
        assert_eq!(p.count_rows("env_sin"), 2);
    }

    #[test]
    fn cos_cap_at_zero() {
        let p = unary(|p, x, z| envelope_cos(p, x, z, -PI / 3.0, PI / 3.0));
        assert!(feasible(&p, &[0.0, 1.0]));
        assert!(!feasible(&p, &[0.0, 1.05]));
    }

    #[test]
    fn mccormick_unit_box() {
        let mut p = ConicProgram::new();
        let v: Vec<VarId> = (0..3).map(|i| p.free_var(format!("v{i}"))).collect();
        envelope_mccormick(&mut p, &v[0].into(), &v[1].into(), &v[2].into(), (0.0, 1.0), (0.0, 1.0)).unwrap();
        assert!(!feasible(&p, &[1.0, 1.0, 0.0]));
        assert!(feasible(&p, &[1.0, 1.0, 1.0]));
    }

    #[test]
    fn square_boundaries() {
        let p = unary(|p, x, z| envelope_sq(p, x, z, 0.0, 2.0));
        assert!(feasible(&p, &[1.0, 1.0]));
        assert!(feasible(&p, &[1.0, 2.0]));
        assert!(!feasible(&p, &[1.0, 0.99]));
        assert!(!feasible(&p, &[1.0, 2.01]));
    }

    #[test]
    fn degenerate_trig_intervals() {
        let p = unary(|p, x, z| envelope_sin(p, x, z, 0.0, 0.0));
        assert!(feasible(&p, &[0.0, 0.0]));
        assert!(!feasible(&p, &[0.0, 1e-6]));
        let p = unary(|p, x, z| envelope_cos(p, x, z, 0.0, 0.0));
        assert!(feasible(&p, &[0.0, 1.0]));
        assert!(!feasible(&p, &[0.0, 1.0 - 1e-6]));
    }

    #[test]
    fn rejects_bad_intervals() {
        let mut p = ConicProgram::new();
        let x: LinExpr = p.free_var("x").into();
        let z: LinExpr = p.free_var("z").into();
        assert!(envelope_sin(&mut p, &x, &z, 0.2, 0.1).is_err());
        assert!(envelope_cos(&mut p, &x, &z, -2.0, 0.1).is_err());
        assert!(envelope_sin(&mut p, &x, &z, 0.0, FRAC_PI_2).is_err());
        assert!(envelope_sq(&mut p, &x, &z, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn graphs_are_contained() {
        let intervals = [(-1.5, 1.5), (-0.3, 1.2), (0.1, 0.4), (-1.4, -0.9), (-1e-4, 2e-4)];
        for &(lo, hi) in &intervals {
            let ps = unary(|p, x, z| envelope_sin(p, x, z, lo, hi));
            let pc = unary(|p, x, z| envelope_cos(p, x, z, lo, hi));
            let pq = unary(|p, x, z| envelope_sq(p, x, z, lo, hi));
            for i in 0..=200 {
                let x = lo + (hi - lo) * i as f64 / 200.0;
                assert!(feasible(&ps, &[x, x.sin()]), "sin {x} on [{lo},{hi}]");
                assert!(feasible(&pc, &[x, x.cos()]), "cos {x} on [{lo},{hi}]");
                assert!(feasible(&pq, &[x, x * x]), "sq {x} on [{lo},{hi}]");
            }
        }
    }
}
