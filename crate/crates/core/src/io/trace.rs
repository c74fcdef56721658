//! CSV export of search traces.

use crate::search::SearchTrace;

/// Renders a trace as CSV with the columns
/// `iteration,phase,x,y,sigma,rho,accepted`. Undefined objectives appear as
/// `nan`.
pub fn trace_to_csv(trace: &SearchTrace) -> String {
    let mut out = String::from("iteration,phase,x,y,sigma,rho,accepted\n");
    for step in &trace.steps {
        let rho = if step.rho.is_nan() {
            "nan".to_string()
        } else {
            step.rho.to_string()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            step.iteration,
            step.phase,
            step.params.shift_x,
            step.params.shift_y,
            step.params.sigma,
            rho,
            step.accepted
        ));
    }
    out
}
