//! One function per subcommand. Each returns an [`Outcome`]; writing it out is
//! left to the caller.

use lattice_pdo::adjointness::{
    build_block, deficiency_probe, duality_check, ellipticity_of_pq_plus_i, riesz_consistency,
    symmetry_defect, AdjointMode, Restriction, Sign,
};
use lattice_pdo::calculus::{
    adjoint_symbol, asymptotic_sum, compose_symbols, remainder_order_probe,
};
use lattice_pdo::lattice::{LatticeFunction, MultiIndex};
use lattice_pdo::parametrix::{build_parametrix, elliptic_regularity_experiment, ParametrixConfig};
use lattice_pdo::quantization::{
    apply, finite_section, interior_indices, max_abs, operator_norm_estimate, section_product,
    spectral_norm, submatrix, window_indices, FiniteSectionOperator,
};
use lattice_pdo::regression::{self, Check};
use lattice_pdo::symbol::{check_ellipticity, estimate_seminorm};
use lattice_pdo::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{f, Outcome, Table};
use crate::CliError;

type Run = Result<Outcome, CliError>;

fn random_function(cfg: &ExperimentConfig) -> Result<LatticeFunction, CliError> {
    let lat = cfg.lattice()?.interior();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(LatticeFunction::from_fn(lat, |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }))
}

pub fn symbol_check(cfg: &ExperimentConfig) -> Run {
    let a = cfg.build_symbol()?;
    let grid = cfg.torus()?;
    let mut out = Outcome::default();
    let mut table = Table::new(
        "seminorms",
        &["alpha", "beta", "constant", "growth", "accepted"],
    );
    let mut reports = Vec::new();
    let idx = MultiIndex::all_below_order(cfg.dim, 3);
    for alpha in &idx {
        for beta in &idx {
            let r = estimate_seminorm(&a, alpha, beta, cfg.radius, &grid)?;
            table.push(vec![
                format!("{:?}", alpha.0),
                format!("{:?}", beta.0),
                f(r.constant),
                f(r.growth),
                r.accepted.to_string(),
            ]);
            out.verdicts.push(Check::at_most(
                format!("growth slope for α = {:?}, β = {:?}", alpha.0, beta.0),
                r.growth,
                r.slack,
            ));
            reports.push(r);
        }
    }
    let cert = check_ellipticity(
        &a,
        cfg.ellipticity.radius,
        cfg.radius,
        &grid,
        cfg.ellipticity.c_min,
    )?;
    let ell = Check::at_least("ellipticity constant", cert.constant, cfg.ellipticity.c_min);
    if cfg.ellipticity.required {
        out.verdicts.push(ell);
    } else {
        out.exploratory.push(ell);
    }
    out.tables.push(table);
    out.results =
        json!({ "symbol": a.label, "order": a.order, "seminorms": reports, "ellipticity": cert });
    Ok(out)
}

pub fn quantize(cfg: &ExperimentConfig) -> Run {
    let a = cfg.build_symbol()?;
    let grid = cfg.torus()?;
    let lat = cfg.lattice()?;
    let (s1, s2) = (cfg.sobolev.s1, cfg.sobolev.s2);
    let p = finite_section(&a, &lat, &grid, s1, s2)?;
    let u = random_function(cfg)?;
    let via_section = p.apply_to(&u)?;
    let via_apply = apply(&a, &u, &grid)?;
    let gap = via_section
        .values
        .iter()
        .zip(&via_apply.values)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let mut out = Outcome::default();
    out.verdicts.push(Check::at_most(
        "section vs applier",
        gap,
        cfg.tolerances.exact,
    ));
    let mut diag_gap = None;
    if a.is_x_independent() {
        let n = p.len();
        let mut g: f64 = 0.0;
        for i in 0..n {
            let k = p.lattice.point(i);
            let want = a.eval(&k, &vec![0.0; cfg.dim])?;
            for j in 0..n {
                let w = if i == j {
                    want
                } else {
                    Complex64::new(0.0, 0.0)
                };
                g = g.max((p.matrix[(i, j)] - w).norm());
            }
        }
        out.verdicts.push(Check::at_most(
            "x-independent section vs diag(a(k))",
            g,
            cfg.tolerances.exact,
        ));
        diag_gap = Some(g);
    }
    let norm = operator_norm_estimate(&p);
    let mut t = Table::new("section", &["row", "col", "re", "im"]);
    for i in 0..p.len() {
        for j in 0..p.len() {
            let v = p.matrix[(i, j)];
            if v != Complex64::new(0.0, 0.0) {
                t.push(vec![i.to_string(), j.to_string(), f(v.re), f(v.im)]);
            }
        }
    }
    out.tables.push(t);
    out.results = json!({
        "symbol": a.label,
        "size": p.len(),
        "operator_norm": norm,
        "section_vs_apply": gap,
        "diagonal_gap": diag_gap,
    });
    Ok(out)
}

pub fn compose(cfg: &ExperimentConfig) -> Run {
    let a = cfg.build_symbol()?;
    let b = cfg.build_second()?;
    let grid = cfg.torus()?;
    let lat = cfg.lattice()?.interior();
    let margin = (cfg.radius / 4).max(1);
    let exact = section_product(&a, &b, &lat, &grid, margin)?;
    let op = FiniteSectionOperator::new(lat, exact, 0.0, 0.0)?.with_margin(margin);
    let mut t = Table::new(
        "exponents",
        &["n_terms", "claimed", "fitted", "max_residual"],
    );
    let mut fitted = Vec::new();
    let mut last = None;
    for n in 1..=cfg.expansion.n_terms {
        let e = compose_symbols(&a, &b, n)?;
        let r = remainder_order_probe(&op, &e, &grid, &[e.claimed_remainder_order])?;
        t.push(vec![
            n.to_string(),
            f(r.claimed_order),
            r.fitted_exponent.map_or("".into(), f),
            f(r.max_residual),
        ]);
        fitted.push((n, r.fitted_exponent));
        last = Some(r);
    }
    let mut out = Outcome::default();
    for w in fitted.windows(2) {
        if let (Some(x), Some(y)) = (w[0].1, w[1].1) {
            out.verdicts.push(Check::at_most(
                format!("|drop − 1| from {} to {} terms", w[0].0, w[1].0),
                ((x - y) - 1.0).abs(),
                cfg.tolerances.order_drop,
            ));
        } else {
            out.notes.push(format!(
                "residual vanishes on the fit window at {} or {} terms; no exponent",
                w[0].0, w[1].0
            ));
        }
    }
    let last = last.expect("n_terms ≥ 1");
    let mut shells = Table::new("shells", &["shell", "residual", "reference"]);
    for s in &last.shells {
        shells.push(vec![s.shell.to_string(), f(s.residual), f(s.reference)]);
    }
    out.tables.push(t);
    out.tables.push(shells);
    out.results = json!({ "left": a.label, "right": b.label, "margin": margin, "final": last });
    Ok(out)
}

pub fn adjoint(cfg: &ExperimentConfig) -> Run {
    let a = cfg.build_symbol()?;
    let grid = cfg.torus()?;
    let lat = cfg.lattice()?;
    let p = finite_section(&a, &lat, &grid, 0.0, 0.0)?;
    let floor = cfg.expansion.window * cfg.radius as f64;
    let idx = window_indices(&p.lattice, p.margin, floor);
    let oracle = p.matrix.adjoint();
    let mut t = Table::new("residuals", &["n_terms", "claimed_order", "residual"]);
    let mut res = Vec::new();
    for n in 1..=cfg.expansion.n_terms {
        let e = adjoint_symbol(&a, n)?;
        let q = finite_section(&e.symbol, &lat, &grid, 0.0, 0.0)?;
        let r = spectral_norm(&submatrix(&(q.matrix - &oracle), &idx, &idx));
        t.push(vec![n.to_string(), f(e.claimed_remainder_order), f(r)]);
        res.push(r);
    }
    let mut out = Outcome::default();
    for (i, w) in res.windows(2).enumerate() {
        if w[1] > cfg.tolerances.exact {
            out.verdicts.push(Check::at_most(
                format!("residual ratio {} → {} terms", i + 1, i + 2),
                w[1] / w[0],
                1.0 + cfg.tolerances.monotone,
            ));
        }
    }
    if a.is_x_independent() {
        out.verdicts.push(Check::at_most(
            "x-independent residual",
            res.iter().copied().fold(0.0, f64::max),
            cfg.tolerances.exact,
        ));
    }
    out.tables.push(t);
    out.results = json!({ "symbol": a.label, "window_floor": floor, "residuals": res });
    Ok(out)
}

pub fn asym_sum(cfg: &ExperimentConfig) -> Run {
    let syms = cfg.build_asym()?;
    let grid = cfg.torus()?;
    let s = asymptotic_sum(&syms, &cfg.asym.radii, &grid, cfg.radius)?;
    let mut out = Outcome::default();
    let mut t = Table::new("terms", &["term", "order", "radius", "contribution"]);
    for (j, sym) in syms.iter().enumerate() {
        t.push(vec![
            j.to_string(),
            f(sym.order),
            f(s.radii[j]),
            f(s.contributions[j]),
        ]);
        if j > 0 {
            out.verdicts.push(Check::at_most(
                format!("term {j} contribution relative to 2^-{j} × first"),
                s.contributions[j] / (s.contributions[0] * 0.5f64.powi(j as i32)),
                1.0,
            ));
        }
    }
    let z = MultiIndex::zero(cfg.dim);
    let r = estimate_seminorm(&s.symbol, &z, &z, cfg.radius, &grid)?;
    out.verdicts.push(Check::at_most(
        "growth of the sum at the leading order",
        r.growth,
        r.slack,
    ));
    out.tables.push(t);
    out.results = json!({ "radii": s.radii, "contributions": s.contributions, "seminorm": r });
    Ok(out)
}

pub fn parametrix(cfg: &ExperimentConfig) -> Run {
    let p = cfg.build_symbol()?;
    let mut pc = ParametrixConfig::new(cfg.lattice()?.interior(), cfg.torus()?);
    pc.steps = cfg.parametrix.steps;
    pc.radius = cfg.parametrix.radius;
    pc.eps = cfg.parametrix.eps;
    pc.orders = cfg.parametrix.orders.clone();
    pc.c_min = cfg.ellipticity.c_min;
    let r = build_parametrix(&p, &pc)?;
    let mut out = Outcome::default();
    for row in r.final_rows() {
        out.verdicts.push(Check::at_most(
            format!("‖QP − I‖ H⁰→H^{}", row.t),
            row.qp,
            cfg.tolerances.parametrix,
        ));
        out.exploratory.push(Check::at_most(
            format!("‖PQ − I‖ H⁰→H^{}", row.t),
            row.pq,
            cfg.tolerances.parametrix,
        ));
    }
    for &t in &pc.orders {
        let by_step: Vec<f64> = r
            .residuals
            .iter()
            .filter(|x| x.t == t)
            .map(|x| x.qp)
            .collect();
        let rise = by_step
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0])
            .fold(0.0, f64::max);
        out.verdicts.push(Check::at_most(
            format!("relative rise over steps at t = {t}"),
            rise,
            0.0,
        ));
    }
    let mut t = Table::new("residuals", &["step", "t", "qp", "pq"]);
    for x in &r.residuals {
        t.push(vec![x.step.to_string(), f(x.t), f(x.qp), f(x.pq)]);
    }
    out.tables.push(t);
    out.results = json!({
        "symbol": p.label,
        "eps": r.eps,
        "certificate": r.certificate,
        "residuals": r.residuals,
    });
    Ok(out)
}

pub fn regularity(cfg: &ExperimentConfig) -> Run {
    let a = cfg.build_symbol()?;
    let top = *cfg.scan.last().expect("scan is non-empty");
    let lat = lattice_pdo::lattice::LatticeBox::new(cfg.dim, top, 0)?;
    let f0 = LatticeFunction::delta(lat, &vec![0; cfg.dim])?;
    let r = elliptic_regularity_experiment(&a, &f0, cfg.sobolev.s2, &cfg.scan, &cfg.torus()?)?;
    let mut out = Outcome::default();
    if r.any_singular() {
        out.notes.push("some finite sections are singular".into());
    }
    out.verdicts.push(Check::at_most(
        "relative change of ‖u‖_{H^{s+m}} over the last two radii",
        r.plateau_change().unwrap_or(f64::INFINITY),
        cfg.tolerances.plateau,
    ));
    let mut t = Table::new("norms", &["N", "singular", "norm", "contrast"]);
    for row in &r.rows {
        t.push(vec![
            row.radius.to_string(),
            row.singular.to_string(),
            f(row.norm),
            f(row.contrast),
        ]);
    }
    out.tables.push(t);
    out.results = serde_json::to_value(&r).map_err(lattice_pdo::Error::from)?;
    Ok(out)
}

pub fn adjointness(cfg: &ExperimentConfig) -> Run {
    let a = cfg.build_symbol()?;
    let grid = cfg.torus()?;
    let (s1, s2) = (cfg.sobolev.s1, cfg.sobolev.s2);
    let mode = match cfg.expansion.mode.as_str() {
        "expansion" => AdjointMode::Expansion {
            n_terms: cfg.expansion.n_terms,
        },
        _ => AdjointMode::ExactWeighted,
    };
    let hypothesis = a.order > s1 - s2;
    let mut out = Outcome::default();
    if !hypothesis {
        out.notes.push(format!(
            "hypothesis m > s1 - s2 not met (m = {}, s1 = {s1}, s2 = {s2}); block results are exploratory",
            a.order
        ));
    }
    let probe = deficiency_probe(
        &a,
        s1,
        s2,
        mode,
        &cfg.scan,
        &grid,
        &[Sign::Plus, Sign::Minus],
    )?;
    let lat = cfg.lattice()?;
    let block = build_block(&a, s1, s2, &lat, &grid, mode)?;
    let floor = cfg.expansion.window * cfg.radius as f64;
    let window_defect = symmetry_defect(&block, Restriction::Window { floor });
    let pq = ellipticity_of_pq_plus_i(
        &a,
        s1,
        s2,
        a.order,
        cfg.expansion.n_terms,
        cfg.ellipticity.radius,
        cfg.radius,
        &grid,
        cfg.ellipticity.c_min,
    )?;
    let riesz = riesz_consistency(&a, s1, s2, &lat, &grid, cfg.expansion.n_terms, floor)?;
    let gated = vec![
        Check::at_least(
            "σ_min(𝒯 ± i) over the scan",
            probe.min_sigma(),
            cfg.tolerances.sigma_min,
        ),
        Check::at_least(
            "PQ + I ellipticity constant",
            pq.certificate.constant,
            cfg.ellipticity.c_min,
        ),
        Check::at_most(
            "exact-weighted Riesz gap",
            riesz.exact_gap,
            cfg.tolerances.exact,
        ),
    ];
    if hypothesis {
        out.verdicts.extend(gated);
    } else {
        out.exploratory.extend(gated);
    }
    out.exploratory.push(Check::at_most(
        "symmetry defect on the window",
        window_defect,
        cfg.tolerances.exact.max(riesz.expansion_budget),
    ));

    let mut dual = Table::new(
        "duality",
        &["u", "s", "norm", "attained_error", "max_violation"],
    );
    let mut viol = f64::NEG_INFINITY;
    let mut att: f64 = 0.0;
    let mut dual_reports = Vec::new();
    for (i, u) in regression::function_corpus(cfg.radius, cfg.seed)
        .iter()
        .enumerate()
    {
        for s in [s1, s2, -s1, -s2] {
            let r = duality_check(u, s, cfg.trials, cfg.seed.wrapping_add(i as u64));
            dual.push(vec![
                i.to_string(),
                f(s),
                f(r.norm),
                f(r.attained_error),
                f(r.max_violation),
            ]);
            viol = viol.max(r.max_violation);
            att = att.max(r.attained_error);
            dual_reports.push(r);
        }
    }
    out.verdicts.push(Check::at_most(
        "Cauchy–Schwarz violation",
        viol,
        cfg.tolerances.duality_violation,
    ));
    out.verdicts.push(Check::at_most(
        "maximizer error",
        att,
        cfg.tolerances.duality_attained,
    ));

    let mut t = Table::new("deficiency", &["N", "sign", "sigma_min", "defect"]);
    for r in &probe.rows {
        let sign = match r.sign {
            Sign::Plus => "+",
            Sign::Minus => "-",
        };
        t.push(vec![
            r.radius.to_string(),
            sign.into(),
            f(r.sigma_min),
            f(r.defect),
        ]);
    }
    out.tables.push(t);
    out.tables.push(dual);
    let interior = interior_indices(&block.p.lattice, block.p.margin).len();
    out.results = json!({
        "symbol": a.label,
        "hypothesis_met": hypothesis,
        "deficiency": probe,
        "window_floor": floor,
        "window_defect": window_defect,
        "interior_points": interior,
        "q_max_entry": max_abs(&block.q.matrix),
        "pq_plus_i": pq,
        "riesz": riesz,
        "duality": dual_reports,
    });
    Ok(out)
}

pub fn corpus(cfg: &ExperimentConfig) -> Run {
    let verdicts = regression::run_all(cfg.seed)?;
    let mut out = Outcome::default();
    let mut t = Table::new(
        "checks",
        &[
            "id",
            "criterion",
            "check",
            "measured",
            "tolerance",
            "passed",
        ],
    );
    for v in &verdicts {
        for c in &v.checks {
            t.push(vec![
                v.id.to_string(),
                v.name.clone(),
                c.what.clone(),
                f(c.measured),
                f(c.tolerance),
                c.passed.to_string(),
            ]);
            out.verdicts.push(Check {
                what: format!("{}. {}: {}", v.id, v.name, c.what),
                ..c.clone()
            });
        }
        out.notes.push(v.line());
    }
    out.tables.push(t);
    out.results = serde_json::to_value(&verdicts).map_err(lattice_pdo::Error::from)?;
    Ok(out)
}
