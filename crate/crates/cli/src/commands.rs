use rayon::prelude::*;
use serde_json::{json, Map, Value};
use tmb_core::charfun::return_map;
use tmb_core::eigfun::{adjoint_eigenfunction, eigenfunction, evaluate, steady_state, EigenSolution};
use tmb_core::params::{time_constant, validate};
use tmb_core::sensitivity::full_report;
use tmb_core::sim::{decay_rate, init, run as sim_run, CellProfile, Initial, SimConfig, SimState};
use tmb_core::spectrum::{
    collocation_spectrum, dominant_eigenvalue, dominant_eigenvalue_bracketed, dominant_real, imaginary_vanishing_k,
    limit_asymptote, limit_spectrum, real_root_scan,
};
use tmb_core::{ModelParams, ValidatedParams, C64};

use crate::output::{complex, num, profile_rows, OutDir, PROFILE_HEADER};
use crate::{thread_pool, Cli, CliError, Command, Loaded, Preset, Range, PARAM_NAMES};

/// Tolerance for matching eigenvalues between two collocation resolutions.
const COLLOCATION_MATCH: f64 = 1e-3;
/// Sign-change scan points for real roots in `spectrum`.
const ROOT_SCAN_POINTS: usize = 2000;

pub fn dispatch(cli: &Cli, loaded: &Loaded) -> Result<(), CliError> {
    let mut out = OutDir::create(&cli.out)?;
    let tolerances = match cli.command {
        Command::Analyze => analyze(cli, loaded, &mut out)?,
        Command::Spectrum => spectrum(cli, loaded, &mut out)?,
        Command::Simulate => simulate(cli, loaded, &mut out)?,
        Command::Sensitivity => sensitivity(cli, loaded, &mut out)?,
        Command::Limit => limit(cli, loaded, &mut out)?,
        Command::Steady => steady(cli, loaded, &mut out)?,
        Command::DeltaScan => delta_scan(cli, loaded, &mut out)?,
    };
    let outputs: Vec<String> = out.written().to_vec();
    let manifest = json!({
        "command": cli.command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "params_path": cli.params,
        "params_source": loaded.source,
        "params": loaded.params,
        "physical": loaded.physical,
        "output_dir": cli.out,
        "flags": cli,
        "tolerances": tolerances,
        "outputs": outputs,
    });
    out.json("manifest.json", &manifest)
}

fn coefficients(sol: &EigenSolution) -> Value {
    let list: Vec<Value> = sol
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| json!({ "zone": i / 2 + 1, "j": i % 2 + 1, "re": c.re, "im": c.im }))
        .collect();
    json!({ "coefficients": list, "residual": sol.residual })
}

fn time_constant_entry(cli: &Cli, loaded: &Loaded, lambda0: f64) -> Result<Value, CliError> {
    match (loaded.u_s(cli), loaded.l_ref(cli)) {
        (Some(u_s), Some(l_ref)) => Ok(json!({
            "minutes": time_constant(lambda0, u_s, l_ref)?,
            "u_s": u_s,
            "L_ref": l_ref,
        })),
        _ => Ok(Value::Null),
    }
}

fn analyze(cli: &Cli, loaded: &Loaded, out: &mut OutDir) -> Result<Value, CliError> {
    let vp = validate(loaded.params)?;
    let n = cli.grid.unwrap_or(101);
    let mut summary = Map::new();
    let fd = !cli.no_fd && vp.strict_ports();
    if vp.limit_case() {
        let zero = C64::from(0.0);
        let direct = eigenfunction(zero, vp.params())?;
        let adjoint = adjoint_eigenfunction(zero, vp.params())?;
        summary.insert("regime".into(), json!("equal-velocities"));
        summary.insert("lambda0".into(), json!(0.0));
        summary.insert("direct".into(), coefficients(&direct));
        summary.insert("adjoint".into(), coefficients(&adjoint));
        summary.insert("sensitivities".into(), Value::Null);
        summary.insert(
            "note".into(),
            json!("equal velocities: lambda0 = 0 exactly; sensitivities need strict port inequalities and were skipped"),
        );
        out.csv("direct_profile.csv", &PROFILE_HEADER, profile_rows(&evaluate(&direct, n)?))?;
        out.csv("adjoint_profile.csv", &PROFILE_HEADER, profile_rows(&evaluate(&adjoint, n)?))?;
    } else {
        let dom = dominant_eigenvalue_bracketed(&vp, cli.tol)?;
        let l = C64::from(dom.lambda);
        let direct = eigenfunction(l, vp.params())?;
        let adjoint = adjoint_eigenfunction(l, vp.params())?;
        let report = full_report(&vp, cli.tol, fd)?;
        summary.insert("regime".into(), json!("strict-ports"));
        summary.insert("lambda0".into(), json!(dom.lambda));
        summary.insert(
            "bracket".into(),
            json!({ "scan_lo": dom.scan_lo, "scan_hi": dom.scan_hi, "residual": dom.root.residual }),
        );
        summary.insert("direct".into(), coefficients(&direct));
        summary.insert("adjoint".into(), coefficients(&adjoint));
        summary.insert("sensitivities".into(), sensitivity_json(&report.derivatives(), report.fd_check));
        summary.insert("time_constant".into(), time_constant_entry(cli, loaded, dom.lambda)?);
        out.csv("direct_profile.csv", &PROFILE_HEADER, profile_rows(&evaluate(&direct, n)?))?;
        out.csv("adjoint_profile.csv", &PROFILE_HEADER, profile_rows(&evaluate(&adjoint, n)?))?;
    }
    out.json("summary.json", &summary)?;
    Ok(json!({ "root_tol": cli.tol, "samples_per_zone": n, "fd_check": fd }))
}

fn sensitivity_json(d: &[C64; 6], fd: Option<[f64; 6]>) -> Value {
    let mut m = Map::new();
    for (i, name) in PARAM_NAMES.iter().enumerate() {
        let mut entry = Map::new();
        entry.insert("value".into(), complex(d[i]));
        if let Some(e) = fd {
            entry.insert("fd_rel_err".into(), json!(e[i]));
        }
        m.insert(name.to_string(), Value::Object(entry));
    }
    Value::Object(m)
}

fn sorted(mut eigs: Vec<C64>) -> Vec<C64> {
    eigs.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    eigs
}

fn spectrum(cli: &Cli, loaded: &Loaded, out: &mut OutDir) -> Result<Value, CliError> {
    let vp = validate(loaded.params)?;
    let n = cli.grid.unwrap_or(30);
    let n2 = n * 3 / 2;
    let range = cli.range.unwrap_or(Range { lo: -40.0, hi: 0.0 });
    let (lo, hi) = rayon::join(
        || collocation_spectrum(vp.params(), n),
        || collocation_spectrum(vp.params(), n2),
    );
    let (lo, hi) = (sorted(lo?), sorted(hi?));
    let rows = lo
        .iter()
        .map(|z| {
            let stable = hi.iter().any(|w| (z - w).norm() <= COLLOCATION_MATCH);
            vec![num(z.re), num(z.im), u8::from(stable).to_string()]
        })
        .collect::<Vec<_>>();
    out.csv("spectrum.csv", &["re", "im", "stable"], rows)?;
    let roots = real_root_scan(vp.params(), range.lo, range.hi, ROOT_SCAN_POINTS)?;
    out.csv(
        "real_roots.csv",
        &["lambda", "residual", "bracket_lo", "bracket_hi"],
        roots
            .iter()
            .map(|r| vec![num(r.lambda), num(r.residual), num(r.bracket_lo), num(r.bracket_hi)]),
    )?;
    let lambda0 = if vp.strict_ports() {
        json!(dominant_eigenvalue(&vp, cli.tol)?)
    } else {
        json!(0.0)
    };
    out.json(
        "summary.json",
        &json!({
            "N": n,
            "N2": n2,
            "dominant_real_N": dominant_real(&lo, COLLOCATION_MATCH),
            "dominant_real_N2": dominant_real(&hi, COLLOCATION_MATCH),
            "lambda0": lambda0,
            "real_roots": roots.len(),
        }),
    )?;
    Ok(json!({
        "root_tol": cli.tol,
        "collocation_match": COLLOCATION_MATCH,
        "root_scan_points": ROOT_SCAN_POINTS,
        "range": range,
    }))
}

fn snapshot_rows(state: &SimState) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(4 * state.nx());
    for z in 0..4 {
        for j in 0..state.nx() {
            rows.push(vec![
                num(state.t),
                (z + 1).to_string(),
                j.to_string(),
                num(state.x(z + 1, j)),
                num(state.c[z][j]),
                num(state.q[z][j]),
            ]);
        }
    }
    rows
}

fn max_cell_error(state: &SimState, reference: &CellProfile) -> f64 {
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for z in 0..4 {
        for j in 0..state.nx() {
            err = err
                .max((state.c[z][j] - reference.c[z][j]).abs())
                .max((state.q[z][j] - reference.q[z][j]).abs());
            scale = scale.max(reference.c[z][j].abs()).max(reference.q[z][j].abs());
        }
    }
    err / scale
}

fn simulate(cli: &Cli, loaded: &Loaded, out: &mut OutDir) -> Result<Value, CliError> {
    let vp = validate(loaded.params)?;
    let params = vp.params();
    let t_final = cli.t_final.unwrap_or(60.0);
    let mut cfg = SimConfig::new(params, t_final).with_f0(params.f0);
    if let Some(nx) = cli.nx {
        cfg = cfg.with_nx(nx);
    }
    if let Some(p) = cli.p {
        cfg = cfg.with_p(p);
    }
    if let Some(n) = cli.record_every {
        cfg = cfg.with_record_every(n);
    }
    let initial = match cli.preset {
        Preset::Equilibrium => Initial::Equilibrium,
        Preset::Zero => Initial::Zero,
        Preset::Dominant => Initial::Dominant,
    };
    let state = init(&cfg, &vp, initial)?;
    let profile = if vp.strict_ports() && cfg.f0 == 0.0 {
        Some(CellProfile::dominant(&vp, cfg.nx)?)
    } else {
        None
    };

    let mut pending: Vec<f64> = cli.snapshots.clone();
    pending.sort_by(f64::total_cmp);
    pending.dedup();
    let mut snaps: Vec<Vec<String>> = Vec::new();
    let eps = 1e-9 * cfg.dt();
    pending.retain(|&t| {
        if t <= state.t + eps {
            snaps.extend(snapshot_rows(&state));
            false
        } else {
            true
        }
    });
    let result = sim_run(state, &cfg, params, profile.as_ref(), |s| {
        while pending.first().is_some_and(|&t| s.t >= t - eps) {
            pending.remove(0);
            snaps.extend(snapshot_rows(s));
        }
    })?;
    snaps.extend(snapshot_rows(&result.state));

    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    out.csv(
        "diagnostics.csv",
        &["t", "energy", "mass", "sup_norm", "profile_rms"],
        result
            .rows
            .iter()
            .map(|r| vec![num(r.t), num(r.energy), num(r.mass), num(r.sup_norm), opt(r.profile_rms)]),
    )?;
    out.csv("snapshots.csv", &["t", "zone", "cell", "x", "c", "q"], snaps)?;

    let window = cli.window.unwrap_or(Range {
        lo: t_final / 3.0,
        hi: t_final,
    });
    let mut summary = Map::new();
    summary.insert("steps".into(), json!(result.state.step));
    summary.insert("t_final".into(), json!(result.state.t));
    summary.insert("dt".into(), json!(cfg.dt()));
    summary.insert("dx".into(), json!(cfg.dx()));
    summary.insert("rows".into(), json!(result.rows.len()));
    if cfg.f0 == 0.0 && vp.strict_ports() {
        let lambda0 = dominant_eigenvalue(&vp, cli.tol)?;
        summary.insert("lambda0".into(), json!(lambda0));
        match decay_rate(&result.rows, window.lo, window.hi) {
            Ok(rate) => {
                summary.insert("decay_rate".into(), json!(rate));
                summary.insert("decay_rate_rel_err".into(), json!((rate - lambda0).abs() / lambda0.abs()));
            }
            Err(e @ tmb_core::Error::InsufficientSamples { .. }) => {
                summary.insert("decay_rate".into(), Value::Null);
                summary.insert("note".into(), json!(e.to_string()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if cfg.f0 != 0.0 && vp.strict_ports() {
        let ss = CellProfile::sample(&steady_state(&vp)?, cfg.nx);
        summary.insert("steady_state_max_rel_err".into(), json!(max_cell_error(&result.state, &ss)));
    }
    out.json("summary.json", &summary)?;
    Ok(json!({
        "root_tol": cli.tol,
        "config": cfg,
        "preset": cli.preset,
        "fit_window": window,
    }))
}

fn with_param(mut p: ModelParams, which: usize, value: f64) -> ModelParams {
    match which {
        0..=3 => p.v[which] = value,
        4 => p.r = value,
        _ => p.p = value,
    }
    p
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn sweep_point(params: ModelParams, tol: f64) -> Result<(f64, [C64; 6]), tmb_core::Error> {
    let vp: ValidatedParams = validate(params)?;
    let r = full_report(&vp, tol, false)?;
    Ok((r.lambda.re, r.derivatives()))
}

fn sensitivity(cli: &Cli, loaded: &Loaded, out: &mut OutDir) -> Result<Value, CliError> {
    let fd = !cli.no_fd;
    match cli.sweep {
        None => {
            let vp = validate(loaded.params)?;
            let report = full_report(&vp, cli.tol, fd)?;
            let d = report.derivatives();
            out.json(
                "sensitivity.json",
                &json!({
                    "lambda0": report.lambda.re,
                    "denominator": complex(report.denominator),
                    "derivatives": sensitivity_json(&d, report.fd_check),
                }),
            )?;
            out.csv(
                "sensitivity.csv",
                &["param", "re", "im", "fd_rel_err"],
                (0..6).map(|i| {
                    vec![
                        PARAM_NAMES[i].to_string(),
                        num(d[i].re),
                        num(d[i].im),
                        report.fd_check.map(|e| num(e[i])).unwrap_or_default(),
                    ]
                }),
            )?;
            Ok(json!({ "root_tol": cli.tol, "fd_check": fd }))
        }
        Some(sw) => {
            let values = linspace(sw.lo, sw.hi, sw.n);
            let pool = thread_pool()?;
            let results: Vec<_> = pool.install(|| {
                values
                    .par_iter()
                    .map(|&x| sweep_point(with_param(loaded.params, sw.which, x), cli.tol))
                    .collect()
            });
            let mut header = vec![PARAM_NAMES[sw.which].to_string(), "lambda0".into()];
            header.extend(PARAM_NAMES.iter().map(|p| format!("d_{p}")));
            header.push("status".into());
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = values.iter().zip(&results).map(|(&x, r)| match r {
                Ok((l, d)) => {
                    let mut row = vec![num(x), num(*l)];
                    row.extend(d.iter().map(|z| num(z.re)));
                    row.push("ok".into());
                    row
                }
                Err(e) => {
                    let mut row = vec![num(x)];
                    row.extend(std::iter::repeat_n(num(f64::NAN), 7));
                    row.push(e.to_string());
                    row
                }
            });
            out.csv("sweep.csv", &header, rows)?;
            Ok(json!({ "root_tol": cli.tol, "fd_check": false, "sweep": sw }))
        }
    }
}

fn limit(cli: &Cli, loaded: &Loaded, out: &mut OutDir) -> Result<Value, CliError> {
    let vp = validate(loaded.params)?;
    let k_max = cli.grid.unwrap_or(20);
    let table = limit_spectrum(&vp, k_max)?;
    let mut rows = Vec::with_capacity(table.len());
    for s in &table {
        let (ap, am) = if s.k == 0 {
            (C64::new(f64::NAN, f64::NAN), C64::new(f64::NAN, f64::NAN))
        } else {
            limit_asymptote(&vp, s.k)?
        };
        rows.push(vec![
            s.k.to_string(),
            num(s.lambda_plus.re),
            num(s.lambda_plus.im),
            num(s.lambda_minus.re),
            num(s.lambda_minus.im),
            num(s.x),
            num(s.y),
            num(s.u),
            num(s.v),
            num(ap.re),
            num(ap.im),
            num(am.re),
            num(am.im),
        ]);
    }
    out.csv(
        "limit_spectrum.csv",
        &[
            "k", "plus_re", "plus_im", "minus_re", "minus_im", "X", "Y", "U", "V", "asym_plus_re", "asym_plus_im",
            "asym_minus_re", "asym_minus_im",
        ],
        rows,
    )?;
    let p = vp.params();
    let k_star = imaginary_vanishing_k(&vp)?;
    out.json(
        "summary.json",
        &json!({
            "v": p.v[0],
            "lambda0_plus": 0.0,
            "lambda0_minus": -p.r * (1.0 + p.p * p.p),
            "k_max": k_max,
            "k_star": k_star,
            "k_star_integer": k_star.map(|k| (k - k.round()).abs() < 1e-9),
        }),
    )?;
    Ok(json!({ "k_max": k_max }))
}

fn steady(cli: &Cli, loaded: &Loaded, out: &mut OutDir) -> Result<Value, CliError> {
    let vp = validate(loaded.params)?;
    let n = cli.grid.unwrap_or(101);
    let ss = steady_state(&vp)?;
    let samples = evaluate(&ss, n)?;
    let min_c = samples.c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let min_q = samples.q.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    out.csv("steady_profile.csv", &PROFILE_HEADER, profile_rows(&samples))?;
    let mut summary = coefficients(&ss);
    summary["f0"] = json!(vp.params().f0);
    summary["min_c"] = json!(min_c);
    summary["min_q"] = json!(min_q);
    out.json("summary.json", &summary)?;
    Ok(json!({ "samples_per_zone": n }))
}

fn delta_scan(cli: &Cli, loaded: &Loaded, out: &mut OutDir) -> Result<Value, CliError> {
    let vp = validate(loaded.params)?;
    let range = cli.range.unwrap_or(Range { lo: -60.0, hi: 10.0 });
    let n = cli.grid.unwrap_or(1001);
    if n == 0 {
        return Err(CliError::Usage("--grid must be at least 1".into()));
    }
    let lambdas = linspace(range.lo, range.hi, n);
    let pool = thread_pool()?;
    let evals: Vec<_> = pool.install(|| {
        lambdas
            .par_iter()
            .map(|&l| return_map(C64::from(l), vp.params()))
            .collect()
    });
    let mut rows = Vec::with_capacity(n);
    for (l, e) in lambdas.iter().zip(evals) {
        let e = e?;
        let d = e.delta.re;
        rows.push(vec![
            num(*l),
            num(d),
            num(e.delta_sign()),
            num(e.log_abs_delta()),
            num(std::f64::consts::FRAC_2_PI * d.atan()),
        ]);
    }
    out.csv("delta_scan.csv", &["lambda", "delta", "sign", "log_abs_delta", "atan_delta"], rows)?;
    Ok(json!({ "range": range, "grid": n }))
}
