use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use swdgp::bench::{self, BenchConfig, SyntheticSpec, EXACT_LIMIT};
use swdgp::gridgp::grid_fit_with;
use swdgp::latent::residual_diagnostic_with;
use swdgp::{
    auto_length_scale, exact_fit, exact_fit_banded, exact_predict, grid_predict, grid_predict_fft, latent_fit,
    latent_predict, BandOrder, GridAxis, GridSpec, KernelParams, PredictiveResult, TransformPath,
};

use crate::args::{BenchArgs, FitGridArgs, FitLatentArgs, Format, GenerateArgs, GridMethod, KernelArgs, OutputArgs};
use crate::data::{self, Row};
use crate::error::CliError;

/// Fraction of the admissible maximum used by `--auto-length-scale`.
const AUTO_FRACTION: f64 = 0.75;
/// Relative distance from a grid node, in units of the spacing, still
/// counted as on the grid.
const GRID_TOLERANCE: f64 = 1e-9;

fn band_value(band: BandOrder) -> usize {
    band.width()
}

fn length_scale(kernel: &KernelArgs, axis: &GridAxis) -> Result<(f64, bool), CliError> {
    match kernel.length.length_scale {
        Some(l) if l > 0.0 && l.is_finite() => Ok((l, false)),
        Some(l) => Err(CliError::Usage(format!("--length-scale must be positive, got {l}"))),
        None => Ok((auto_length_scale(kernel.band, axis, AUTO_FRACTION), true)),
    }
}

fn kernel_params(kernel: &KernelArgs, length_scale: f64, noise_std: f64) -> Result<KernelParams, CliError> {
    if !(kernel.signal_std > 0.0) {
        return Err(CliError::Usage(format!(
            "--signal-std must be positive, got {}",
            kernel.signal_std
        )));
    }
    if !(noise_std >= 0.0) {
        return Err(CliError::Usage(format!(
            "--noise-std must be non-negative, got {noise_std}"
        )));
    }
    Ok(KernelParams::isotropic(
        kernel.signal_std.powi(2),
        length_scale,
        noise_std.powi(2),
    )?)
}

fn test_inputs(io: &OutputArgs, axis: &GridAxis, length_scale: f64) -> Vec<f64> {
    let (lo, hi) = if axis.count() == 1 {
        (axis.origin() - 3.0 * length_scale, axis.origin() + 3.0 * length_scale)
    } else {
        (axis.origin(), axis.end())
    };
    data::linspace(io.test_lo.unwrap_or(lo), io.test_hi.unwrap_or(hi), io.test_points)
}

fn write_predictions(io: &OutputArgs, config: &Value, test: &[f64], pred: &PredictiveResult) -> Result<(), CliError> {
    if pred.clamped > 0 {
        eprintln!(
            "warning: {} negative predictive variances clamped to zero",
            pred.clamped
        );
    }
    let out = data::open_output(io.output.as_deref())?;
    match io.format {
        Format::Csv => data::write_predictions_csv(out, config, test, pred)?,
        Format::Json => data::write_predictions_json(out, config, test, pred)?,
    }
    Ok(())
}

fn axis_json(axis: &GridAxis) -> Value {
    json!({ "origin": axis.origin(), "spacing": axis.spacing(), "count": axis.count() })
}

fn data_range(rows: &[Row]) -> Option<(f64, f64)> {
    let lo = rows.iter().map(|r| r.x).reduce(f64::min)?;
    let hi = rows.iter().map(|r| r.x).reduce(f64::max)?;
    Some((lo, hi))
}

/// Orders the rows by grid node, rejecting rows off the grid and nodes
/// observed twice.
fn targets_on_grid(rows: &[Row], axis: &GridAxis) -> Result<Vec<f64>, CliError> {
    let mut targets = vec![None; axis.count()];
    for (i, row) in rows.iter().enumerate() {
        let u = axis.index_coordinate(row.x);
        let j = u.round();
        let offset = (u - j).abs();
        if !(j >= 0.0 && (j as usize) < axis.count()) || offset > GRID_TOLERANCE {
            return Err(CliError::Usage(format!(
                "data row {} (line {}): x = {} is not on the grid origin {} spacing {} count {} \
                 (offset {:.3e} spacings from node {})",
                i + 1,
                row.line,
                row.x,
                axis.origin(),
                axis.spacing(),
                axis.count(),
                offset,
                j
            )));
        }
        let slot = &mut targets[j as usize];
        if slot.is_some() {
            return Err(CliError::Usage(format!(
                "data row {} (line {}): grid node {} (x = {}) appears twice",
                i + 1,
                row.line,
                j as usize,
                axis.point(j as usize)
            )));
        }
        *slot = Some(row.y);
    }
    Ok(targets.into_iter().map(|t| t.expect("every node filled")).collect())
}

pub fn fit_grid(args: &FitGridArgs) -> Result<(), CliError> {
    let rows = data::read_xy(&args.io.input)?;
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{}: no data rows", args.io.input.display())));
    }
    let m = rows.len();
    if let Some(expected) = args.grid_size {
        if expected != m {
            return Err(CliError::Usage(format!(
                "--grid-size {expected} but the input has {m} rows; fit-grid needs one row per grid point"
            )));
        }
    }
    let (min_x, max_x) = data_range(&rows).expect("non-empty");
    let lo = args.grid.grid_lo.unwrap_or(min_x);
    let axis = if m == 1 {
        GridAxis::new(lo, args.spacing.unwrap_or(1.0), 1)?
    } else {
        if args.spacing.is_some() {
            return Err(CliError::Usage("--spacing only applies to single-point grids".into()));
        }
        GridAxis::spanning(lo, args.grid.grid_hi.unwrap_or(max_x), m)?
    };
    let targets = targets_on_grid(&rows, &axis)?;
    let (l, auto) = length_scale(&args.kernel, &axis)?;
    let params = kernel_params(&args.kernel, l, args.noise_std)?;
    let grid = GridSpec::new(vec![axis])?;
    let test = test_inputs(&args.io, &axis, l);
    let points: Vec<Vec<f64>> = test.iter().map(|&x| vec![x]).collect();

    let band = args.kernel.band;
    let pred = match args.method {
        GridMethod::Direct => grid_predict(
            &grid_fit_with(&grid, &targets, &params, band, TransformPath::Direct)?,
            &points,
        )?,
        GridMethod::Fft => grid_predict_fft(
            &grid_fit_with(&grid, &targets, &params, band, TransformPath::Fast)?,
            &test,
        )?,
        GridMethod::ExactBanded => exact_predict(&exact_fit_banded(&grid, &targets, &params, band)?, &points)?,
        GridMethod::Exact => {
            if m > EXACT_LIMIT {
                return Err(CliError::Usage(format!(
                    "exact GP refused for {m} points: dense inversion is limited to {EXACT_LIMIT}"
                )));
            }
            let inputs: Vec<Vec<f64>> = grid.axis(0).points().into_iter().map(|x| vec![x]).collect();
            exact_predict(&exact_fit(&inputs, &targets, &params)?, &points)?
        }
    };

    let config = json!({
        "command": "fit-grid",
        "input": args.io.input,
        "method": clap::ValueEnum::to_possible_value(&args.method).map(|v| v.get_name().to_string()),
        "band": band_value(band),
        "grid": axis_json(&axis),
        "signal_std": args.kernel.signal_std,
        "noise_std": args.noise_std,
        "length_scale": l,
        "length_scale_ratio": l / axis.spacing(),
        "auto_length_scale": auto,
        "test_points": test.len(),
    });
    write_predictions(&args.io, &config, &test, &pred)
}

fn sidecar_path(args: &FitLatentArgs) -> Option<PathBuf> {
    args.sidecar.clone().or_else(|| {
        data::file_output(args.io.output.as_deref()).map(|p| {
            let mut s = p.into_os_string();
            s.push(".latent.json");
            PathBuf::from(s)
        })
    })
}

pub fn fit_latent(args: &FitLatentArgs) -> Result<(), CliError> {
    if !(args.noise_std > 0.0) {
        return Err(CliError::Usage(format!(
            "fit-latent refuses --noise-std {}: the latent projection weights each point by 1/sigma_N^2, \
             so the noise must be positive",
            args.noise_std
        )));
    }
    let rows = data::read_xy(&args.io.input)?;
    if rows.is_empty() {
        eprintln!(
            "warning: {} has no data rows; predictions are the prior",
            args.io.input.display()
        );
    }
    let (min_x, max_x) = data_range(&rows).unwrap_or((0.0, 1.0));
    let axis = GridAxis::spanning(
        args.grid.grid_lo.unwrap_or(min_x),
        args.grid.grid_hi.unwrap_or(max_x),
        args.grid_size,
    )?;
    let (l, auto) = length_scale(&args.kernel, &axis)?;
    let params = kernel_params(&args.kernel, l, args.noise_std)?;
    let grid = GridSpec::new(vec![axis])?;
    let xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.y).collect();
    let model = latent_fit(&xs, &ys, &grid, &params, args.kernel.band, args.order)?;
    if model.lambda_clamped() > 0 {
        eprintln!(
            "warning: {} per-point noise terms clamped at the kernel residual floor",
            model.lambda_clamped()
        );
    }
    let test = test_inputs(&args.io, &axis, l);
    let pred = latent_predict(&model, &test);
    let diagnostic = residual_diagnostic_with(&model, args.validity_threshold);
    if !diagnostic.valid {
        eprintln!(
            "warning: residual diagnostic ratios {:.3} / {:.3} exceed {}; the pair approximation may be poor",
            diagnostic.diagonal_ratio, diagnostic.off_diagonal_ratio, diagnostic.threshold
        );
    }

    let config = json!({
        "command": "fit-latent",
        "input": args.io.input,
        "band": band_value(args.kernel.band),
        "order": match args.order { swdgp::PerturbationOrder::First => 1, swdgp::PerturbationOrder::Second => 2 },
        "grid": axis_json(&axis),
        "signal_std": args.kernel.signal_std,
        "noise_std": args.noise_std,
        "length_scale": l,
        "length_scale_ratio": l / axis.spacing(),
        "auto_length_scale": auto,
        "n_data": rows.len(),
        "test_points": test.len(),
    });
    write_predictions(&args.io, &config, &test, &pred)?;

    if let Some(path) = sidecar_path(args) {
        let doc = json!({
            "config": config,
            "grid": axis.points(),
            "g": model.projected_means(),
            "weights": model.weights(),
            "chi": model.chi_spectrum(),
            "pairs": model.pairs(),
            "diagnostic": diagnostic,
            "lambda_clamped": model.lambda_clamped(),
        });
        write_json_file(&path, &doc)?;
    }
    Ok(())
}

fn write_json_file(path: &Path, doc: &Value) -> Result<(), CliError> {
    let mut out = data::open_output(Some(path))?;
    serde_json::to_writer_pretty(&mut out, doc).map_err(std::io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn bench_config(args: &BenchArgs) -> Result<BenchConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: invalid benchmark config: {e}", path.display())))?
        }
        None => BenchConfig::default(),
    };
    if let Some(f) = args.function {
        config.function = f;
    }
    let methods: Vec<_> = args.methods.iter().chain(&args.method).copied().collect();
    if !methods.is_empty() {
        config.methods = methods;
    }
    if !args.sizes.is_empty() {
        config.sizes = args.sizes.clone();
    }
    if !args.seeds.is_empty() {
        config.seeds = args.seeds.clone();
    }
    if let Some(m) = args.grid_size {
        config.grid_size = m;
    }
    if let Some(l) = args.length.length_scale {
        config.length_scale = Some(l);
    }
    if args.length.auto_length_scale {
        config.length_scale = None;
    }
    if let Some(s) = args.noise_std {
        config.noise_std = s;
    }
    if let Some(s) = args.signal_std {
        config.signal_variance = s * s;
    }
    if let Some(o) = args.order {
        config.order = o;
    }
    if let Some(t) = args.test_points {
        config.test_points = t;
    }
    if let Some(r) = args.repetitions {
        config.repetitions = r;
    }
    config.deterministic |= args.deterministic;
    config.validate()?;
    Ok(config)
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let config = bench_config(args)?;
    let reports = bench::run_benchmark(&config)?;
    let out = data::open_output(args.output.as_deref())?;
    match args.format {
        Format::Csv => bench::write_csv(out, &config, &reports)?,
        Format::Json => bench::write_json(out, &config, &reports)?,
    }
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        design: args.design(),
        ..SyntheticSpec::new(args.function, args.noise_std, args.n, args.seed)
    };
    let set = bench::generate(&spec)?;
    let mut out = data::open_output(args.output.as_deref())?;
    writeln!(
        out,
        "# config={}",
        serde_json::to_string(&spec).map_err(std::io::Error::from)?
    )?;
    writeln!(out, "x,y")?;
    for (x, y) in set.inputs.iter().zip(&set.targets) {
        writeln!(out, "{},{}", data::float(*x), data::float(*y))?;
    }
    out.flush()?;
    Ok(())
}
