//! One function per subcommand, each producing the text of its output file.

use rcl::circular::{self, CircularProblem, CircularSolution};
use rcl::fem2d::{build_mesh, Scatterer, SolveOptions};
use rcl::rect::{self, RectProblem, RowStatus};
use rcl::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::{BoxArgs, CircularArgs, FarfieldArgs, LshapeArgs, RectArgs, RunConfig, ThicknessArgs};

/// Why a run stopped.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical { stage: String, message: String },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical { .. } => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical { stage, message } => write!(f, "numerical failure in {stage}: {message}"),
        }
    }
}

fn numerical(stage: impl Into<String>) -> impl FnOnce(Error) -> Failure {
    let stage = stage.into();
    move |e| Failure::Numerical { stage, message: e.to_string() }
}

/// Input errors from the library are configuration errors; everything else is numerical.
fn classify(stage: impl Into<String>) -> impl FnOnce(Error) -> Failure {
    let stage = stage.into();
    move |e| match e {
        Error::Domain(_) | Error::Geometry(_) | Error::Capacity { .. } => Failure::Config(e.to_string()),
        other => Failure::Numerical { stage, message: other.to_string() },
    }
}

/// Files written by a run: the main output and any extra JSON side files.
///
/// A sweep can finish with some rows failed; the table is still written and
/// `failure` carries the first one.
pub struct Output {
    pub main: String,
    pub side: Vec<(std::path::PathBuf, String)>,
    pub failure: Option<Failure>,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const FEM_NOTES: &str = "Q_N quadrilateral elements with Gauss-Lobatto nodes; Dirichlet data by nodal interpolation";

fn sci(x: f64) -> String {
    format!("{x:.4e}")
}

fn csv_header(config: &RunConfig, notes: Option<&str>) -> Result<String, Failure> {
    let cfg = serde_json::to_string(config).map_err(|e| Failure::Config(e.to_string()))?;
    let mut s = format!("# rcl {VERSION}\n# config: {cfg}\n");
    if let Some(n) = notes {
        s.push_str(&format!("# notes: {n}\n"));
    }
    Ok(s)
}

fn csv_body(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is UTF-8")
}

fn json_document(config: &RunConfig, body: serde_json::Value) -> Result<String, Failure> {
    let mut doc = json!({ "version": VERSION, "config": config });
    if let (Some(d), serde_json::Value::Object(b)) = (doc.as_object_mut(), body) {
        d.extend(b);
    }
    serde_json::to_string_pretty(&doc).map(|s| s + "\n").map_err(|e| Failure::Config(e.to_string()))
}

pub fn run(config: &RunConfig) -> Result<Output, Failure> {
    match config {
        RunConfig::Circular(a) => circular_cmd(config, a),
        RunConfig::Thickness(a) => thickness_cmd(config, a),
        RunConfig::Farfield(a) => farfield_cmd(config, a),
        RunConfig::Rect(a) => rect_cmd(config, a),
        RunConfig::Lshape(a) => lshape_cmd(config, a),
    }
}

fn solve_disk(problem: &CircularProblem, modes: Option<usize>) -> Result<CircularSolution, Failure> {
    match modes {
        None => circular::solve(problem).map_err(classify(format!("circular solve (k = {})", problem.k))),
        Some(m) => {
            let mesh = problem.mesh().map_err(classify("radial mesh"))?;
            let data = circular::plane_wave_data(problem.k, problem.r_inner, m).map_err(classify("boundary data"))?;
            circular::solve_with_data(problem, &mesh, m, &data).map_err(numerical(format!("circular solve (k = {})", problem.k)))
        }
    }
}

fn check_samples(samples: usize, thetas: &[f64]) -> Result<(), Failure> {
    if samples < 2 {
        return Err(Failure::Config(format!("--samples must be at least 2, got {samples}")));
    }
    if thetas.is_empty() {
        return Err(Failure::Config("--theta needs at least one angle".into()));
    }
    Ok(())
}

fn circular_cmd(config: &RunConfig, a: &CircularArgs) -> Result<Output, Failure> {
    let n2 = if a.n2.0.is_empty() { a.n1.0.clone() } else { a.n2.0.clone() };
    if n2.len() != a.n1.0.len() {
        return Err(Failure::Config(format!("--N2 has {} entries but --N1 has {}", n2.len(), a.n1.0.len())));
    }
    check_samples(a.common.samples, &a.common.theta.0)?;
    let problems: Vec<CircularProblem> = a
        .k
        .0
        .iter()
        .flat_map(|&k| {
            a.n1.0.iter().zip(&n2).map(move |(&n1, &n2)| CircularProblem {
                k,
                r_inner: a.disk.r_inner,
                a: a.disk.a,
                b: a.b,
                eps: a.eps,
                eps1: a.eps1,
                degrees: [n1, n2],
            })
        })
        .collect();
    for p in &problems {
        p.validate().and_then(|_| p.mesh().map(|_| ())).map_err(|e| Failure::Config(e.to_string()))?;
    }
    let mut rows = Vec::new();
    for p in &problems {
        let sol = solve_disk(p, a.disk.modes)?;
        let rep = circular::error_report(&sol, &a.common.theta.0, a.common.samples).map_err(numerical("error report"))?;
        for s in &rep.slices {
            let mut row = vec![p.k.to_string(), p.degrees[0].to_string(), p.degrees[1].to_string(), rep.modes.to_string(), s.theta.to_string()];
            row.extend(s.as_array().iter().map(|&e| sci(e)));
            rows.push(row);
        }
    }
    let header = ["k", "N1", "N2", "M", "theta", "e_u_re", "e_u_im", "e_v_re", "e_v_im"];
    Ok(Output { main: csv_header(config, None)? + &csv_body(&header, rows), side: vec![], failure: None })
}

fn thickness_cmd(config: &RunConfig, a: &ThicknessArgs) -> Result<Output, Failure> {
    check_samples(a.common.samples, &a.common.theta.0)?;
    let base = |k: f64, d: f64| CircularProblem {
        k,
        r_inner: a.disk.r_inner,
        a: a.disk.a,
        b: a.disk.a + d,
        eps: a.eps,
        eps1: a.eps1,
        degrees: [a.n1, a.n2],
    };
    for &k in &a.k.0 {
        for &d in &a.d.0 {
            base(k, d).validate().map_err(|e| Failure::Config(format!("d = {d}: {e}")))?;
        }
    }
    let mut rows = Vec::new();
    for &k in &a.k.0 {
        for &d in &a.d.0 {
            let p = base(k, d);
            let sol = solve_disk(&p, a.disk.modes)?;
            let tau0 = p.map().map_err(classify("layer map"))?.tau0;
            let rep = circular::error_report(&sol, &a.common.theta.0, a.common.samples).map_err(numerical("error report"))?;
            for s in &rep.slices {
                let mut row = vec![k.to_string(), d.to_string(), sci(tau0), s.theta.to_string()];
                row.extend(s.as_array().iter().map(|&e| sci(e)));
                rows.push(row);
            }
        }
    }
    let header = ["k", "d", "tau0", "theta", "e_u_re", "e_u_im", "e_v_re", "e_v_im"];
    Ok(Output { main: csv_header(config, None)? + &csv_body(&header, rows), side: vec![], failure: None })
}

fn farfield_cmd(config: &RunConfig, a: &FarfieldArgs) -> Result<Output, Failure> {
    let p = CircularProblem {
        k: a.k,
        r_inner: a.disk.r_inner,
        a: a.disk.a,
        b: a.b,
        eps: a.eps,
        eps1: a.eps1,
        degrees: [a.n1, a.n2],
    };
    p.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let lo = a.rho_min.unwrap_or(p.a);
    let top = p.map().map_err(classify("layer map"))?.tau(p.b);
    if !(lo >= p.a && a.rho_max > lo && a.rho_max <= top) {
        return Err(Failure::Config(format!("need a <= rho-min < rho-max <= tau(b) = {top:e}, got [{lo}, {}]", a.rho_max)));
    }
    if a.samples < 2 {
        return Err(Failure::Config(format!("--samples must be at least 2, got {}", a.samples)));
    }
    let sol = solve_disk(&p, a.disk.modes)?;
    let exact = circular::ExactSeries::plane_wave(p.k, p.r_inner, sol.m).map_err(numerical("exact series"))?;
    let n = a.samples;
    let mut curve = Curve::default();
    for i in 0..n {
        let rho = lo + (a.rho_max - lo) * i as f64 / (n - 1) as f64;
        let got = sol.far_field(rho, a.theta).map_err(numerical("far-field recovery"))?;
        let want = exact.field(rho, a.theta).map_err(numerical("exact series"))?;
        curve.rho.push(rho);
        curve.u_re.push(got.re);
        curve.u_im.push(got.im);
        curve.exact_re.push(want.re);
        curve.exact_im.push(want.im);
    }
    let report = circular::far_field_report(&sol, a.theta, lo, a.rho_max, n).map_err(numerical("far-field report"))?;
    let body = json!({
        "modes": sol.m,
        "theta": a.theta,
        "sup_error": report.sup_error,
        "decay_exponent": report.decay_exponent,
        "curve": curve,
    });
    Ok(Output { main: json_document(config, body)?, side: vec![], failure: None })
}

#[derive(Default, Serialize)]
struct Curve {
    rho: Vec<f64>,
    u_re: Vec<f64>,
    u_im: Vec<f64>,
    exact_re: Vec<f64>,
    exact_im: Vec<f64>,
}

fn box_problem(k: f64, degree: usize, m: usize, scatterer: Scatterer, source: [f64; 2], g: &BoxArgs) -> RectProblem {
    RectProblem {
        k,
        l1: g.l1,
        l2: g.l2,
        d1: g.d1,
        d2: g.d2,
        eps: g.eps,
        scatterer,
        source,
        m,
        layer_cells: g.layer_cells,
        degree,
    }
}

fn validate_box(p: &RectProblem) -> Result<(), Failure> {
    p.validate().map_err(|e| Failure::Config(e.to_string()))?;
    p.map().map_err(|e| Failure::Config(e.to_string()))?;
    build_mesh(&p.mesh_params()).map_err(|e| Failure::Config(format!("mesh {}: {e}", p.m)))?;
    Ok(())
}

fn rect_cmd(config: &RunConfig, a: &RectArgs) -> Result<Output, Failure> {
    let scatterer = Scatterer::Square { width: a.width };
    let base = box_problem(a.k, a.degree, 0, scatterer, [0.0, 0.0], &a.geometry);
    for &m in &a.mesh.0 {
        validate_box(&RectProblem { m, ..base })?;
    }
    if base.degree == 0 {
        return Err(Failure::Config("--N must be at least 1".into()));
    }
    let opts = SolveOptions { memory_limit: a.geometry.memory_limit, ..Default::default() };
    let report = rect::convergence_study(&base, &a.mesh.0, &opts);
    let opt = |o: Option<[f64; 4]>, i: usize| o.map(|v| format!("{:.4}", v[i])).unwrap_or_default();
    let mut rows = Vec::new();
    let mut failed = None;
    for r in &report.rows {
        let e = r.errors;
        let mut row = vec![r.m.to_string(), r.dofs.to_string()];
        for i in 0..4 {
            row.push(e.map(|v| sci(v[i])).unwrap_or_default());
            row.push(opt(r.orders, i));
        }
        row.push(match &r.status {
            RowStatus::Solved => "ok".to_string(),
            RowStatus::SkippedMemory { .. } => "skipped: memory".to_string(),
            RowStatus::Failed(msg) => {
                failed.get_or_insert((r.m, msg.clone()));
                format!("failed: {msg}")
            }
        });
        rows.push(row);
    }
    let header = [
        "m", "dofs", "e_u_re", "order_u_re", "e_u_im", "order_u_im", "e_v_re", "order_v_re", "e_v_im", "order_v_im", "status",
    ];
    let main = csv_header(config, Some(FEM_NOTES))? + &csv_body(&header, rows);
    let mut side = vec![];
    if let (Some(path), Some(&m), None) = (&a.field, a.mesh.0.first(), &failed) {
        let sol = rect::solve_problem(&RectProblem { m, ..base }, &opts).map_err(numerical(format!("finite element solve (m = {m})")))?;
        let body = json!({
            "notes": FEM_NOTES,
            "m": m,
            "field": rcl::fem2d::field_export(&sol.space, &sol.values),
        });
        side.push((path.clone(), json_document(config, body)?));
    }
    let failure = failed.map(|(m, message)| Failure::Numerical { stage: format!("finite element solve (m = {m})"), message });
    Ok(Output { main, side, failure })
}

fn lshape_cmd(config: &RunConfig, a: &LshapeArgs) -> Result<Output, Failure> {
    let source = match a.source.0.as_slice() {
        &[x, y] => [x, y],
        other => return Err(Failure::Config(format!("--source needs two coordinates, got {}", other.len()))),
    };
    let scatterer = Scatterer::LShape { width: a.width, notch: a.notch };
    let p = box_problem(a.k, a.degree, a.mesh, scatterer, source, &a.geometry);
    validate_box(&p)?;
    let opts = SolveOptions { memory_limit: a.geometry.memory_limit, ..Default::default() };
    let res = rect::lshape_demo(&p, &opts).map_err(numerical(format!("finite element solve (m = {})", a.mesh)))?;
    let body = json!({
        "notes": format!(
            "{FEM_NOTES}; obstacle is the square of side {} centred at the origin minus its upper-right {}x{} corner",
            a.width, a.notch, a.notch
        ),
        "errors": res.errors,
        "residual": res.residual,
        "outer_max": res.outer_max,
        "axis_violations": res.axis_violations,
        "field": res.field,
    });
    Ok(Output { main: json_document(config, body)?, side: vec![], failure: None })
}
