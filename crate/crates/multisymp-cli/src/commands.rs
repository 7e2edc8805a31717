//! The nine subcommands, each mapping onto the library operations and
//! emitting deterministic CSV/JSON/SVG.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use multisymp::grassmann::{
    annihilator, pseudofiber_generator_22, tangent_basis_full, tangent_basis_omega, ProblemShape,
    VelocityMatrix,
};
use multisymp::hamilton::{
    deform_along_pseudofiber, hamilton_residual, integrate_mechanics, legendre_lift,
    order_estimate, ClosedFormHamiltonian, DiscreteCurve, Grid, GridField, HamiltonError,
    Hamiltonian,
};
use multisymp::lagrangian::{Density, LagrangianDensity};
use multisymp::legendre::{
    hamiltonian_eval, LegendreError, MomentumLayout, SubmanifoldChoice,
};
use multisymp::linalg;
use multisymp::observables::{
    bracket, generalized_pseudofiber_directions, is_regular, pataplectic_invariance_check,
    ObservableFunction, ObservablesError, RegularityCondition,
};

use crate::config::{OutputFormat, RunConfig};
use crate::fields;
use crate::output::{cell, emit, fmt_float, svg_heatmap, svg_polyline, CsvWriter};

/// Command failures carry the process exit code: 2 usage, 3 numeric
/// threshold, 4 degenerate point.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Degenerate(m) => m,
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Usage(e.message)
    }
}

impl From<HamiltonError> for CliError {
    fn from(e: HamiltonError) -> Self {
        match &e {
            HamiltonError::DegenerateNode { .. }
            | HamiltonError::NonFiniteState { .. }
            | HamiltonError::Legendre(
                LegendreError::DegeneratePoint { .. } | LegendreError::OutsideCorrespondence { .. },
            ) => CliError::Degenerate(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<LegendreError> for CliError {
    fn from(e: LegendreError) -> Self {
        match &e {
            LegendreError::DegeneratePoint { .. } | LegendreError::OutsideCorrespondence { .. } => {
                CliError::Degenerate(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ObservablesError> for CliError {
    fn from(e: ObservablesError) -> Self {
        match &e {
            ObservablesError::Hamilton(inner) => {
                CliError::from(HamiltonError::Mismatch(inner.to_string()))
            }
            ObservablesError::XiOutsidePseudofiber { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

struct Example {
    density: LagrangianDensity,
    hamiltonian: ClosedFormHamiltonian,
    /// Singular loci of the correspondence in the higher `r` coordinate.
    singular: Vec<f64>,
}

fn resolve_example(config: &RunConfig) -> Result<Example, CliError> {
    let density = LagrangianDensity::by_name(&config.example, &config.params)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (hamiltonian, singular) = match &density {
        LagrangianDensity::Trivial => (ClosedFormHamiltonian::Trivial, vec![0.0]),
        LagrangianDensity::Dirichlet { b } => (
            ClosedFormHamiltonian::Dirichlet { b: *b },
            vec![b - 1.0, b + 1.0],
        ),
        LagrangianDensity::Maxwell2D => (ClosedFormHamiltonian::Maxwell2D, vec![0.0, -2.0]),
        LagrangianDensity::Mechanics { potential } => (
            ClosedFormHamiltonian::Mechanics {
                potential: potential.clone(),
            },
            Vec::new(),
        ),
        LagrangianDensity::ScalarField { n } => {
            (ClosedFormHamiltonian::ScalarField { n: *n }, Vec::new())
        }
    };
    Ok(Example {
        density,
        hamiltonian,
        singular,
    })
}

fn rng_for(config: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed)
}

const SINGULAR_MARGIN: f64 = 0.1;

fn resolve_observable(name: &str, example: &Example) -> Result<ObservableFunction, CliError> {
    let shape = example.density.shape();
    let layout = MomentumLayout::new(shape);
    let coord = |axis: usize| -> Result<ObservableFunction, CliError> {
        if axis == 0 || axis > shape.total_dim() {
            return Err(CliError::Usage(format!(
                "coordinate axis {axis} outside 1..={}",
                shape.total_dim()
            )));
        }
        Ok(ObservableFunction::coordinate(axis))
    };
    match name {
        "x1x2" => {
            if shape.n < 2 {
                return Err(CliError::Usage("x1x2 needs n >= 2".into()));
            }
            Ok(ObservableFunction::coordinates(&[1, 2]))
        }
        "e" => {
            let pos = layout.volume_position();
            Ok(ObservableFunction::new(1, move |_q, p| vec![p[pos].clone()]))
        }
        "h" => {
            let ham = example.hamiltonian.clone();
            Ok(ObservableFunction::new(1, move |q, p| {
                vec![ham.eval_scalar(q, p)]
            }))
        }
        other => {
            let (prefix, idx) = other.split_at(1);
            let index: usize = idx
                .parse()
                .map_err(|_| CliError::Usage(format!("unknown observable '{other}'")))?;
            match prefix {
                "x" => {
                    if index > shape.n {
                        return Err(CliError::Usage(format!("x{index} exceeds n = {}", shape.n)));
                    }
                    coord(index)
                }
                "y" => {
                    if index > shape.k {
                        return Err(CliError::Usage(format!("y{index} exceeds k = {}", shape.k)));
                    }
                    coord(shape.n + index)
                }
                _ => Err(CliError::Usage(format!("unknown observable '{other}'"))),
            }
        }
    }
}

/// Samples a dense momentum vector; the flag marks draws inside the
/// singular margin (those rows are reported but not compared).
fn sample_phase_point(
    shape: ProblemShape,
    singular: &[f64],
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>, bool) {
    let layout = MomentumLayout::new(shape);
    let q: Vec<f64> = (0..shape.total_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut p: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut near_singular = false;
    for pos in layout.higher_positions() {
        let r: f64 = rng.gen_range(-3.0..3.0);
        if singular.iter().any(|s| (r - s).abs() < SINGULAR_MARGIN) {
            near_singular = true;
        }
        p[pos] = r;
    }
    (q, p, near_singular)
}

pub fn cmd_derive(config: &RunConfig) -> Result<(), CliError> {
    let example = resolve_example(config)?;
    let shape = example.density.shape();
    let layout = MomentumLayout::new(shape);
    let mut rng = rng_for(config);

    let mut header: Vec<String> = vec!["index".into()];
    header.extend((1..=shape.total_dim()).map(|a| format!("q{a}")));
    header.extend(layout.indices().iter().map(|mi| format!("p{mi}")));
    header.extend(["derived_H", "closed_form_H", "abs_error", "flag"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = CsvWriter::new(&header_refs);

    let mut rows_json = Vec::new();
    let mut max_error = 0.0f64;
    for index in 0..config.points {
        let (q, p, near_singular) = sample_phase_point(shape, &example.singular, &mut rng);
        let mut cells: Vec<String> = vec![index.to_string()];
        cells.extend(q.iter().map(|&v| cell(v)));
        cells.extend(p.iter().map(|&v| cell(v)));
        if near_singular {
            cells.extend(["".into(), "".into(), "".into(), "singular".into()]);
            rows_json.push(json!({ "index": index, "flag": "singular" }));
            csv.row(&cells);
            continue;
        }
        let element = layout.element(&p);
        let derived = hamiltonian_eval(&example.density, &q[..shape.n], &q[shape.n..], &element, None)
            .map_err(CliError::from)?;
        let oracle = example.hamiltonian.eval(&q, &p).map_err(CliError::from)?;
        let error = (derived.value - oracle).abs();
        max_error = max_error.max(error / oracle.abs().max(1.0));
        cells.extend([
            cell(derived.value),
            cell(oracle),
            cell(error),
            "ok".into(),
        ]);
        csv.row(&cells);
        rows_json.push(json!({
            "index": index,
            "derived_H": derived.value,
            "closed_form_H": oracle,
            "abs_error": error,
            "flag": "ok",
        }));
    }

    match config.format {
        OutputFormat::Json => emit(
            config.output.as_deref(),
            &serde_json::to_string_pretty(&json!({
                "example": example.density.name(),
                "points": config.points,
                "max_relative_error": max_error,
                "rows": rows_json,
            }))
            .unwrap(),
        )?,
        _ => emit(config.output.as_deref(), &csv.finish())?,
    }

    if max_error > 1e-9 {
        return Err(CliError::Numeric(format!(
            "oracle deviation {max_error:.3e} exceeds 1e-9"
        )));
    }
    Ok(())
}

fn build_curve(config: &RunConfig, example: &Example) -> Result<DiscreteCurve, CliError> {
    let shape = example.density.shape();
    let layout = MomentumLayout::new(shape);
    let (lo, hi) = if shape.n == 1 {
        (config.t_span.0, config.t_span.1)
    } else {
        (config.box_lo, config.box_hi)
    };
    let grid = Grid::uniform_box(shape.n, lo, hi, config.nodes);
    let field = fields::resolve(&config.field, shape)?;
    let u = GridField::from_fn(grid.clone(), shape.k, |x| field(x));
    let higher = if config.choice == SubmanifoldChoice::Full {
        let n_higher = layout.higher_positions().len();
        let value = config.higher;
        Some(GridField::from_fn(grid.clone(), n_higher, move |_| {
            vec![value; n_higher]
        }))
    } else {
        None
    };
    Ok(legendre_lift(
        &example.density,
        &grid,
        &u,
        config.choice,
        higher.as_ref(),
        config.level,
    )?)
}

pub fn cmd_lift(config: &RunConfig) -> Result<(), CliError> {
    let example = resolve_example(config)?;
    let shape = example.density.shape();
    let layout = MomentumLayout::new(shape);
    let curve = build_curve(config, &example)?;

    let header_json = json!({
        "example": example.density.name(),
        "shape": { "n": shape.n, "k": shape.k },
        "choice": curve.choice,
        "spacing": curve.grid.spacing,
        "npts": curve.grid.npts,
        "level": curve.level,
    });

    match config.format {
        OutputFormat::Json => {
            let nodes: Vec<serde_json::Value> = curve
                .grid
                .nodes()
                .map(|multi| {
                    let coords = curve.grid.coords(&multi);
                    let u: Vec<f64> = (0..shape.k).map(|i| curve.u.get(&multi, i)).collect();
                    let p: Vec<f64> = (0..layout.len()).map(|c| curve.p.get(&multi, c)).collect();
                    json!({ "node": multi, "x": coords, "u": u, "p": p })
                })
                .collect();
            emit(
                config.output.as_deref(),
                &serde_json::to_string_pretty(&json!({ "header": header_json, "nodes": nodes }))
                    .unwrap(),
            )?;
        }
        _ => {
            let mut header: Vec<String> = (1..=shape.n).map(|a| format!("x{a}")).collect();
            header.extend((1..=shape.k).map(|i| format!("u{i}")));
            header.extend(layout.indices().iter().map(|mi| format!("p{mi}")));
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let mut csv = CsvWriter::new(&header_refs);
            for multi in curve.grid.nodes() {
                let mut cells: Vec<String> =
                    curve.grid.coords(&multi).iter().map(|&v| cell(v)).collect();
                cells.extend((0..shape.k).map(|i| cell(curve.u.get(&multi, i))));
                cells.extend((0..layout.len()).map(|c| cell(curve.p.get(&multi, c))));
                csv.row(&cells);
            }
            let body = format!("# {}\n{}", header_json, csv.finish());
            emit(config.output.as_deref(), &body)?;
        }
    }
    Ok(())
}

pub fn cmd_residual(config: &RunConfig) -> Result<(), CliError> {
    let example = resolve_example(config)?;
    let coarse_curve = build_curve(config, &example)?;
    let fine_config = RunConfig {
        nodes: config.nodes * 2 - 1,
        ..config.clone()
    };
    let fine_curve = build_curve(&fine_config, &example)?;
    let coarse = hamilton_residual(&coarse_curve, &example.hamiltonian)?;
    let fine = hamilton_residual(&fine_curve, &example.hamiltonian)?;
    let order = order_estimate(coarse.max_norm, fine.max_norm);

    let summary = json!({
        "example": example.density.name(),
        "field": config.field,
        "grids": [config.nodes, fine_config.nodes],
        "max": fine.max_norm,
        "mean": fine.mean_norm,
        "coarse_max": coarse.max_norm,
        "order_estimate": order,
    });

    match config.format {
        OutputFormat::Json => emit(
            config.output.as_deref(),
            &serde_json::to_string_pretty(&summary).unwrap(),
        )?,
        OutputFormat::Csv => {
            let mut csv = CsvWriter::new(&["node", "coords", "residual"]);
            for multi in fine_curve.grid.nodes() {
                let idx = fine_curve.grid.flat(&multi);
                let coords = fine_curve
                    .grid
                    .coords(&multi)
                    .iter()
                    .map(|&v| fmt_float(v))
                    .collect::<Vec<_>>()
                    .join(";");
                csv.row(&[idx.to_string(), coords, cell(fine.per_node[idx])]);
            }
            let body = format!("# {}\n{}", summary, csv.finish());
            emit(config.output.as_deref(), &body)?;
        }
        OutputFormat::Svg => {
            let shape = example.density.shape();
            let svg = if shape.n == 2 {
                svg_heatmap(
                    &fine.per_node,
                    (fine_curve.grid.npts[0], fine_curve.grid.npts[1]),
                    "Hamilton residual",
                )
            } else {
                svg_polyline(&fine.per_node, "Hamilton residual")
            };
            emit(config.output.as_deref(), &svg)?;
        }
    }
    Ok(())
}

pub fn cmd_integrate(config: &RunConfig) -> Result<(), CliError> {
    let example = resolve_example(config)?;
    let shape = example.density.shape();
    if shape.n != 1 {
        return Err(CliError::Usage(format!(
            "integrate needs a mechanics example (n = 1), got n = {}",
            shape.n
        )));
    }
    if config.y0.len() != shape.k || config.p0.len() != shape.k {
        return Err(CliError::Usage(format!(
            "y0 and p0 must carry k = {} components",
            shape.k
        )));
    }
    let curve = integrate_mechanics(
        &example.hamiltonian,
        &config.y0,
        &config.p0,
        config.t_span,
        config.dt,
        config.level,
    )?;

    let layout = MomentumLayout::new(shape);
    let mut drift_max = 0.0f64;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for multi in curve.grid.nodes() {
        let (q, p) = curve.state_at(&multi);
        let value = example.hamiltonian.eval(&q, &p)?;
        drift_max = drift_max.max((value - config.level).abs());
        let mut cells = vec![cell(q[0])];
        cells.extend((1..=shape.k).map(|i| cell(q[i])));
        cells.extend(p.iter().map(|&v| cell(v)));
        cells.push(cell(value));
        rows.push(cells);
    }

    match config.format {
        OutputFormat::Json => emit(
            config.output.as_deref(),
            &serde_json::to_string_pretty(&json!({
                "example": example.density.name(),
                "dt": config.dt,
                "t_span": [config.t_span.0, config.t_span.1],
                "level": config.level,
                "energy_drift_max": drift_max,
                "nodes": curve.grid.npts[0],
            }))
            .unwrap(),
        )?,
        _ => {
            let mut header: Vec<String> = vec!["t".into()];
            header.extend((1..=shape.k).map(|i| format!("y{i}")));
            header.extend(layout.indices().iter().map(|mi| format!("p{mi}")));
            header.push("H".into());
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let mut csv = CsvWriter::new(&header_refs);
            for row in rows {
                csv.row(&row);
            }
            emit(config.output.as_deref(), &csv.finish())?;
        }
    }
    Ok(())
}

/// Builds the deformation field for the configured `pi_mode`.
fn deformation_field(
    config: &RunConfig,
    curve: &DiscreteCurve,
) -> Result<GridField, CliError> {
    let shape = curve.shape;
    let layout = MomentumLayout::new(shape);
    let mut pi = GridField::zeros(curve.grid.clone(), layout.len());
    match config.pi_mode.as_str() {
        "level_shift" => {
            let delta = config.level_prime - config.level;
            for multi in curve.grid.nodes() {
                pi.set(&multi, layout.volume_position(), delta);
            }
        }
        "generator" | "corrupt" => {
            if (shape.n, shape.k) != (2, 2) {
                return Err(CliError::Usage(
                    "generator deformations are defined for the n = k = 2 examples".into(),
                ));
            }
            for multi in curve.grid.nodes() {
                let x = curve.grid.coords(&multi);
                let scale = config.pi_scale * x[0].cos();
                let v = curve.velocity_at(&multi);
                let dense = layout.dense(&pseudofiber_generator_22(&v).scaled(scale));
                for (c, &value) in dense.iter().enumerate() {
                    pi.set(&multi, c, value);
                }
                if config.pi_mode == "corrupt" {
                    // push along a mixed momentum axis: not a pseudofiber
                    // direction, the deform call must reject it
                    let (pos, _) = layout.mixed_position(1, 1);
                    let cur = pi.get(&multi, pos);
                    pi.set(&multi, pos, cur + 0.5);
                }
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown pi_mode '{other}' (generator | level_shift | corrupt)"
            )))
        }
    }
    Ok(pi)
}

pub fn cmd_deform(config: &RunConfig) -> Result<(), CliError> {
    let example = resolve_example(config)?;
    let curve = build_curve(config, &example)?;
    let base = hamilton_residual(&curve, &example.hamiltonian)?;
    let pi = deformation_field(config, &curve)?;
    let deformed = deform_along_pseudofiber(&curve, &pi)?;
    let after = hamilton_residual(&deformed, &example.hamiltonian)?;
    let base_unchanged = deformed.u == curve.u;
    let ratio = after.max_norm / base.max_norm.max(f64::MIN_POSITIVE);

    let report = json!({
        "example": example.density.name(),
        "pi_mode": config.pi_mode,
        "base_residual": base.max_norm,
        "deformed_residual": after.max_norm,
        "ratio": ratio,
        "base_projection_unchanged": base_unchanged,
    });
    emit(
        config.output.as_deref(),
        &serde_json::to_string_pretty(&report).unwrap(),
    )?;
    if !base_unchanged {
        return Err(CliError::Numeric("base projection changed".into()));
    }
    if config.pi_mode != "level_shift" && ratio > 2.0 {
        return Err(CliError::Numeric(format!(
            "residual ratio {ratio:.3} exceeds 2"
        )));
    }
    Ok(())
}

pub fn cmd_invariance(config: &RunConfig) -> Result<(), CliError> {
    let example = resolve_example(config)?;
    let shape = example.density.shape();
    if (shape.n, shape.k) != (2, 2) || config.choice != SubmanifoldChoice::Full {
        return Err(CliError::Usage(
            "invariance checks run on the full-Dedecker n = k = 2 examples".into(),
        ));
    }
    let layout = MomentumLayout::new(shape);
    let curve = build_curve(config, &example)?;
    let base = hamilton_residual(&curve, &example.hamiltonian)?;

    // (a) deformation by a smooth multiple of the pseudofiber generator
    let deform_config = RunConfig {
        pi_mode: "generator".into(),
        ..config.clone()
    };
    let pi = deformation_field(&deform_config, &curve)?;
    let deformed = deform_along_pseudofiber(&curve, &pi)?;
    let deformed_residual = hamilton_residual(&deformed, &example.hamiltonian)?;
    let deform_ok = deformed_residual.max_norm <= 2.0 * base.max_norm && deformed.u == curve.u;

    // (b) level shift into M^{h'}
    let shift = config.level_prime - config.level;
    let mut pi_level = GridField::zeros(curve.grid.clone(), layout.len());
    for multi in curve.grid.nodes() {
        pi_level.set(&multi, layout.volume_position(), shift);
    }
    let shifted = deform_along_pseudofiber(&curve, &pi_level)?;
    let mut level_deviation = 0.0f64;
    for multi in shifted.grid.nodes() {
        let (q, p) = shifted.state_at(&multi);
        let value = example.hamiltonian.eval(&q, &p)?;
        level_deviation = level_deviation.max((value - config.level_prime).abs());
    }
    let level_ok = level_deviation <= 1e-9;

    // (c) pataplectic invariance along the generator section
    let mut xi = GridField::zeros(curve.grid.clone(), layout.len());
    for multi in curve.grid.nodes() {
        let v = curve.velocity_at(&multi);
        let dense = layout.dense(&pseudofiber_generator_22(&v));
        for (c, &value) in dense.iter().enumerate() {
            xi.set(&multi, c, value);
        }
    }
    let pataplectic = pataplectic_invariance_check(&example.hamiltonian, &curve, &xi)?;

    let passed = deform_ok && level_ok && pataplectic.passed;
    let report = json!({
        "example": example.density.name(),
        "deformation": {
            "base_residual": base.max_norm,
            "deformed_residual": deformed_residual.max_norm,
            "passed": deform_ok,
        },
        "level_shift": {
            "target": config.level_prime,
            "max_deviation": level_deviation,
            "passed": level_ok,
        },
        "pataplectic": {
            "max_dh_along_xi": pataplectic.max_dh_along_xi,
            "fitted_slope": pataplectic.fitted_slope,
            "slope_budget": pataplectic.slope_budget,
            "passed": pataplectic.passed,
        },
        "passed": passed,
    });
    emit(
        config.output.as_deref(),
        &serde_json::to_string_pretty(&report).unwrap(),
    )?;
    if !passed {
        return Err(CliError::Numeric("invariance checks failed".into()));
    }
    Ok(())
}

pub fn cmd_bracket(config: &RunConfig) -> Result<(), CliError> {
    let example = resolve_example(config)?;
    let shape = example.density.shape();
    let layout = MomentumLayout::new(shape);
    let f = resolve_observable(&config.observable, &example)?;
    if f.components() != 1 {
        return Err(CliError::Usage("bracket needs a scalar observable".into()));
    }
    let mut rng = rng_for(config);
    let mut csv = CsvWriter::new(&["sample", "alpha", "mu", "value"]);
    let mut rows = Vec::new();
    for sample in 0..config.points.min(50) {
        let (q, p, near_singular) = sample_phase_point(shape, &example.singular, &mut rng);
        if near_singular {
            continue;
        }
        for pos in 0..layout.len() {
            let alpha = layout.multi_index(pos).clone();
            for mu in 1..=shape.n {
                let value = bracket(&example.hamiltonian, &f, &alpha, mu, &q, &p)?;
                csv.row(&[
                    sample.to_string(),
                    alpha.to_string(),
                    mu.to_string(),
                    cell(value),
                ]);
                rows.push(json!({
                    "sample": sample,
                    "alpha": alpha.to_string(),
                    "mu": mu,
                    "value": value,
                }));
            }
        }
    }
    match config.format {
        OutputFormat::Json => emit(
            config.output.as_deref(),
            &serde_json::to_string_pretty(&json!({
                "example": example.density.name(),
                "observable": config.observable,
                "rows": rows,
            }))
            .unwrap(),
        )?,
        _ => emit(config.output.as_deref(), &csv.finish())?,
    }
    Ok(())
}

fn regularity_samples(
    example: &Example,
    points: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let shape = example.density.shape();
    let layout = MomentumLayout::new(shape);
    (0..points)
        .map(|idx| {
            let (q, mut p, _) = sample_phase_point(shape, &example.singular, rng);
            for pos in layout.higher_positions() {
                // resample near-singular draws: regularity needs gradients
                while example
                    .singular
                    .iter()
                    .any(|s| (p[pos] - s).abs() < SINGULAR_MARGIN)
                {
                    p[pos] = rng.gen_range(-3.0..3.0);
                }
            }
            if idx % 4 == 0 {
                for (i, mu) in VelocityMatrix::index_pairs(shape) {
                    let (pos, _) = layout.mixed_position(i, mu);
                    p[pos] = 0.0;
                }
            }
            (q, p)
        })
        .collect()
}

pub fn cmd_regular(config: &RunConfig) -> Result<(), CliError> {
    let example = resolve_example(config)?;
    let f = resolve_observable(&config.observable, &example)?;
    let mut rng = rng_for(config);
    let samples = regularity_samples(&example, config.points.min(100), &mut rng);
    let report = is_regular(&example.hamiltonian, &f, &samples)?;
    let failing = report.failing_condition.map(|c| match c {
        RegularityCondition::Factorization => "factorization",
        RegularityCondition::Bracket => "bracket",
    });
    let body = json!({
        "example": example.density.name(),
        "observable": config.observable,
        "components": f.components(),
        "samples": samples.len(),
        "regular": report.regular,
        "failing_condition": failing,
        "failing_sample": report.failing_sample,
        "max_factorization_residual": report.max_factorization_residual,
        // infinities mark conditions that never got evaluated
        "min_base_rank_sigma": report.min_base_rank_sigma.is_finite().then_some(report.min_base_rank_sigma),
        "min_bracket_magnitude": report.min_bracket_magnitude.is_finite().then_some(report.min_bracket_magnitude),
    });
    emit(
        config.output.as_deref(),
        &serde_json::to_string_pretty(&body).unwrap(),
    )?;
    Ok(())
}

pub fn cmd_pseudofiber(config: &RunConfig) -> Result<(), CliError> {
    let example = resolve_example(config)?;
    let shape = example.density.shape();
    let layout = MomentumLayout::new(shape);
    let mut rng = rng_for(config);

    // linear-algebra side: annihilator dimensions at sampled velocities
    let mut dims_ok = true;
    let mut generator_residual_max = 0.0f64;
    let samples = config.points.clamp(1, 50);
    for _ in 0..samples {
        let v = VelocityMatrix::from_fn(shape, |_, _| rng.gen_range(-2.0..2.0));
        let enlarged = annihilator(&tangent_basis_omega(&v).map_err(HamiltonError::from)?)
            .map_err(HamiltonError::from)?;
        let level = annihilator(&tangent_basis_full(&v).map_err(HamiltonError::from)?)
            .map_err(HamiltonError::from)?;
        dims_ok &= enlarged.len() == shape.lambda_dim() - shape.n * shape.k;
        dims_ok &= level.len() == shape.lambda_dim() - shape.n * shape.k - 1;
        if (shape.n, shape.k) == (2, 2) {
            let cols = multisymp::exterior::multi_indices(4, 2);
            let gen_vec: Vec<f64> = {
                let g = pseudofiber_generator_22(&v);
                cols.iter().map(|mi| g.coefficient(mi)).collect()
            };
            let dense: Vec<Vec<f64>> = level
                .iter()
                .map(|d| cols.iter().map(|mi| d.coefficient(mi)).collect())
                .collect();
            generator_residual_max =
                generator_residual_max.max(linalg::projection_residual(&gen_vec, &dense));
        }
    }

    // Ω-sampling side at adapted points, compared against (T_z D^n)^⊥
    let mut angle_max: Option<f64> = None;
    let mut vertical_ok = true;
    if !example.singular.is_empty() {
        let mut worst = 0.0f64;
        for _ in 0..config.points.clamp(1, 10) {
            let q: Vec<f64> = (0..shape.total_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut p = vec![0.0; layout.len()];
            p[layout.volume_position()] = rng.gen_range(-1.0..1.0);
            for pos in layout.higher_positions() {
                p[pos] = loop {
                    let r: f64 = rng.gen_range(-3.0..3.0);
                    if example.singular.iter().all(|s| (r - s).abs() >= SINGULAR_MARGIN) {
                        break r;
                    }
                };
            }
            let dirs =
                generalized_pseudofiber_directions(&example.hamiltonian, &q, &p, &mut rng)?;
            vertical_ok &= dirs.max_dq_component(shape.total_dim()) <= 1e-10;
            let solved = hamiltonian_eval(
                &example.density,
                &q[..shape.n],
                &q[shape.n..],
                &layout.element(&p),
                None,
            )?;
            let ann = annihilator(&tangent_basis_full(&solved.velocity).map_err(HamiltonError::from)?)
                .map_err(HamiltonError::from)?;
            let expected: Vec<Vec<f64>> = ann.iter().map(|d| layout.dense(d)).collect();
            let got = dirs.vertical_parts(shape.total_dim());
            match linalg::principal_angles(&got, &expected) {
                Some(angles) => {
                    let max = angles.iter().fold(0.0f64, |m, &a| m.max(a));
                    worst = worst.max(max);
                }
                None => vertical_ok = false,
            }
        }
        angle_max = Some(worst);
    }

    let report = json!({
        "example": example.density.name(),
        "shape": { "n": shape.n, "k": shape.k },
        "enlarged_dim": shape.lambda_dim() - shape.n * shape.k,
        "level_dim": shape.lambda_dim() - shape.n * shape.k - 1,
        "dimension_checks": dims_ok,
        "generator_projection_residual": generator_residual_max,
        "omega_sampling_max_principal_angle": angle_max,
        "directions_vertical": vertical_ok,
    });
    emit(
        config.output.as_deref(),
        &serde_json::to_string_pretty(&report).unwrap(),
    )?;
    if !dims_ok || !vertical_ok || generator_residual_max > 1e-10 {
        return Err(CliError::Numeric("pseudofiber geometry checks failed".into()));
    }
    if let Some(angle) = angle_max {
        if angle > 1e-8 {
            return Err(CliError::Numeric(format!(
                "principal angle {angle:.3e} exceeds 1e-8"
            )));
        }
    }
    Ok(())
}

