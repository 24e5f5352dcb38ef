use minlp_select::model::{generate_instance, GeneratorSpec};
use minlp_select::nlp::{solve_relaxation, NlpOptions};
use minlp_select::solvers::{cuts_at_point, oa_subproblem};
use minlp_select::lp::{solve_milp, LinearProgram, MilpLimits};

fn main() {
    let i = 4usize;
    let p = generate_instance(&GeneratorSpec {
        n_binary: 1 + (i % 5),
        n_integer: i % 2,
        n_continuous: 1 + (i % 4),
        n_constraints: 2 + (i % 5),
        seed: 9004,
        ..GeneratorSpec::default()
    })
    .unwrap();
    println!("vars {} cons {}", p.n_vars(), p.constraints.len());
    let lower: Vec<f64> = p.variables.iter().map(|v| v.effective_lower().unwrap_or(f64::NEG_INFINITY)).collect();
    let upper: Vec<f64> = p.variables.iter().map(|v| v.effective_upper().unwrap_or(f64::INFINITY)).collect();
    let relax = solve_relaxation(&p, &lower, &upper, None, &NlpOptions::default()).unwrap();
    println!("relax {:?} {} {:?}", relax.status, relax.objective, relax.point);
    let mut cuts = cuts_at_point(&p, &relax.point).unwrap();
    let y0: Vec<i64> = p.discrete_indices().iter().map(|&j| relax.point[j].round() as i64).collect();
    let sub = oa_subproblem(&p, &y0).unwrap();
    println!("sub {:?} {}", sub.status, sub.objective);
    let more = cuts_at_point(&p, &sub.point).unwrap();
    cuts.objective_cuts.extend(more.objective_cuts);
    cuts.constraint_cuts.extend(more.constraint_cuts);

    // mimic master_program
    let n = p.n_vars();
    let mut lo = lower.clone(); lo.push(f64::NEG_INFINITY);
    let mut hi = upper.clone(); hi.push(f64::INFINITY);
    let mut integrality: Vec<bool> = p.variables.iter().map(|v| v.domain.is_discrete()).collect();
    integrality.push(false);
    let mut objective = vec![0.0; n]; objective.push(1.0);
    let rows: Vec<(Vec<f64>, f64)> = cuts.objective_cuts.iter().chain(&cuts.constraint_cuts).map(|c| (c.coefficients.clone(), c.rhs)).collect();
    for c in &cuts.objective_cuts { println!("OBJ cut {:?} <= {}", c.coefficients, c.rhs); }
    for c in &cuts.constraint_cuts { println!("CON cut {:?} <= {}", c.coefficients, c.rhs); }
    println!("lo {:?}", lo); println!("hi {:?}", hi); println!("int {:?}", integrality);
    let master = LinearProgram { objective, rows, lower: lo, upper: hi, integrality };
    let t = std::time::Instant::now();
    let sol = solve_milp(&master, &MilpLimits { max_nodes: 3000, time_limit: None }).unwrap();
    println!("master {:?} obj {} nodes {} ({:.2}s)", sol.status, sol.objective, sol.node_count, t.elapsed().as_secs_f64());
}
