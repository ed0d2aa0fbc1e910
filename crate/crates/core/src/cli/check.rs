//! Runtime invariant battery behind `okpz check`. Every item re-derives its
//! expectation from scratch at small sizes; failures name the invariant.

use crate::coupling::{
    cpk_from_propagators, cpk_product, doeblin_coupled_chains, q_identity_defect,
    relaxation_bounds, tv_profile, Cpk, CouplingConfig,
};
use crate::domain::{
    make_noise_slice, quotient, quotient_field, BoundaryParams, GridSpec, InitialMeasure,
    MollifierSpec, NoiseGen, NoisePlan, SpatialField,
};
use crate::experiments::tilt_support_experiment;
use crate::coupling::omega_event_check;
use crate::kernel::{eigensystem, kernel_eval, kernel_mass, kernel_mc, path_rng};
use crate::metrics::{d_x, d_x_bar, d_y, MetricConfig};
use crate::polymer::tilt_expectation;
use crate::solver::{propagator, solve, DiscreteGenerator, DriftField};

type Check = std::result::Result<(), String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn neumann16() -> (BoundaryParams, GridSpec, DiscreteGenerator) {
    let p = BoundaryParams::neumann();
    let g = GridSpec::new(16, 1e-3, 8.0, &p).unwrap();
    let gen = DiscreteGenerator::new(&p, &g).unwrap();
    (p, g, gen)
}

pub fn run_battery(quick: bool) -> Vec<(&'static str, Check)> {
    let mut out: Vec<(&'static str, Check)> = Vec::new();

    out.push(("noise-determinism", {
        let (_, g, _) = neumann16();
        let plan = NoisePlan::white(33);
        let a = make_noise_slice(&plan, 5, &g).unwrap();
        let b = make_noise_slice(&plan, 5, &g).unwrap();
        ensure(a == b, "identical keys gave different slices")
    }));

    out.push(("mollifier-contraction", {
        let spec = MollifierSpec::Fejer { bandwidth: 16 };
        spec.check_contraction(16).map_err(|e| e.to_string()).and({
            let (_, g, _) = neumann16();
            let gen = NoiseGen::new(
                &NoisePlan {
                    seed: 1,
                    mollifier: Some(spec),
                },
                &g,
            )
            .unwrap();
            ensure(gen.sigma2() < 1.0, "mollified variance not below white")
        })
    }));

    out.push(("quotient-scale-invariance", {
        let (_, g, _) = neumann16();
        let f = SpatialField::from_fn(g, |x| 1.0 + x * x);
        let q1 = quotient(&InitialMeasure::density(f.clone()).unwrap(), &g).unwrap();
        let q7 = quotient(&InitialMeasure::density(f.scaled(7.0)).unwrap(), &g).unwrap();
        ensure(q1 == q7, "quotient not scale invariant")
    }));

    out.push(("grid-dt-guard", {
        let p = BoundaryParams::new(3.0, -2.0).unwrap();
        ensure(
            GridSpec::new(16, 1e-2, 1.0, &p).is_err(),
            "coarse dt accepted",
        )
    }));

    out.push(("eigensystem-diagnostics", {
        let mut res = Ok(());
        for (a, b) in [(0.0, 0.0), (1.0, 1.0), (-1.0, 2.0)] {
            let sys = match eigensystem(&BoundaryParams::new(a, b).unwrap(), 12) {
                Ok(s) => s,
                Err(e) => {
                    res = Err(format!("eigensystem failed at ({a},{b}): {e}"));
                    break;
                }
            };
            let rep = sys.validate();
            if !(rep.strictly_increasing
                && rep.max_interior_residual < 1e-8
                && rep.max_boundary_residual < 1e-6
                && rep.max_orthonormality_defect < 1e-8)
            {
                res = Err(format!(
                    "diagnostics out of tolerance at ({a},{b}): {rep:?}"
                ));
                break;
            }
        }
        res
    }));

    out.push(("kernel-neumann-mass", {
        let sys = eigensystem(&BoundaryParams::neumann(), 8).unwrap();
        let mass = kernel_mass(&sys, 0.2, 0.37).unwrap();
        ensure((mass - 1.0).abs() < 1e-8, format!("mass {mass}"))
    }));

    out.push(("kernel-symmetry", {
        let sys = eigensystem(&BoundaryParams::new(-1.0, 2.0).unwrap(), 12).unwrap();
        ensure(
            kernel_eval(&sys, 0.3, 0.2, 0.9).unwrap() == kernel_eval(&sys, 0.3, 0.9, 0.2).unwrap(),
            "kernel not symmetric",
        )
    }));

    out.push(("solver-linearity", {
        let (_, g, gen) = neumann16();
        let plan = NoisePlan::white(2);
        let mu = InitialMeasure::dirac(0.25).unwrap();
        let nu = InitialMeasure::uniform(g);
        let mix = InitialMeasure::new(vec![(0.25, 2.0)], Some(SpatialField::uniform(g).scaled(0.5)))
            .unwrap();
        let zm = solve(&gen, &mu, 0.0, 0.1, Some(&plan), None).unwrap();
        let zn = solve(&gen, &nu, 0.0, 0.1, Some(&plan), None).unwrap();
        let zc = solve(&gen, &mix, 0.0, 0.1, Some(&plan), None).unwrap();
        let scale = zc.max();
        let worst = (0..g.n_nodes())
            .map(|j| (zc.values[j] - 2.0 * zm.values[j] - 0.5 * zn.values[j]).abs())
            .fold(0.0_f64, f64::max);
        ensure(worst < 1e-12 * scale, format!("linearity defect {worst}"))
    }));

    out.push(("solver-positivity", {
        let (_, g, gen) = neumann16();
        let n_seeds = if quick { 20 } else { 100 };
        let mut ok = true;
        for s in 0..n_seeds {
            let plan = NoisePlan::white(crate::domain::derive_seed(7, s));
            let z = solve(&gen, &InitialMeasure::uniform(g), 0.0, 0.25, Some(&plan), None).unwrap();
            ok &= z.is_positive();
        }
        ensure(ok, "positivity violated")
    }));

    out.push(("propagator-convolution", {
        let (_, _, gen) = neumann16();
        let plan = NoisePlan::white(4);
        let full = propagator(&gen, 0.0, 0.2, Some(&plan)).unwrap();
        let a = propagator(&gen, 0.0, 0.1, Some(&plan)).unwrap();
        let b = propagator(&gen, 0.1, 0.2, Some(&plan)).unwrap();
        let comp = a.compose(&b).unwrap();
        let n = gen.grid.n_nodes();
        let scale = full.max_entry().max(1.0);
        let worst = (0..n * n)
            .map(|k| (full.entry(k / n, k % n) - comp.entry(k / n, k % n)).abs())
            .fold(0.0_f64, f64::max);
        ensure(
            worst < 1e-12 * scale && full.min_entry() > 0.0,
            format!("convolution defect {worst}, min {}", full.min_entry()),
        )
    }));

    out.push(("cpk-algebra", {
        let (_, g, _) = neumann16();
        let mut rng = path_rng(12, 0);
        let (a, b, c) = (
            Cpk::random(g, &mut rng),
            Cpk::random(g, &mut rng),
            Cpk::random(g, &mut rng),
        );
        let left = cpk_product(&cpk_product(&a, &b).unwrap(), &c).unwrap();
        let right = cpk_product(&a, &cpk_product(&b, &c).unwrap()).unwrap();
        let n = g.n_nodes();
        let worst = (0..n * n)
            .map(|k| (left.entry(k / n, k % n) - right.entry(k / n, k % n)).abs())
            .fold(0.0_f64, f64::max);
        let w = g.node_weights();
        let sums_ok = (0..n).all(|i| {
            let s: f64 = left.row(i).iter().zip(&w).map(|(&v, &wv)| v * wv).sum();
            (s - 1.0).abs() < 1e-10
        });
        ensure(
            worst < 1e-12 && sums_ok,
            format!("associativity defect {worst}"),
        )
    }));

    out.push(("relaxation-bound", {
        let (_, g, _) = neumann16();
        let mut ok = true;
        let n_seq = if quick { 5 } else { 20 };
        for s in 0..n_seq {
            let mut rng = path_rng(100, s);
            let cpks: Vec<Cpk> = (0..8).map(|_| Cpk::random(g, &mut rng)).collect();
            let profile = tv_profile(&cpks).unwrap();
            for delta in [0.01, 0.03, 0.06, 0.1] {
                let bounds = relaxation_bounds(&cpks, delta);
                ok &= profile.iter().zip(&bounds).all(|(p, b)| p <= b);
            }
        }
        ensure(ok, "relaxation bound violated")
    }));

    out.push(("coupled-chain-merge", {
        let (_, g, _) = neumann16();
        let cpks = vec![Cpk::uniform(g); 2];
        let cfg = CouplingConfig::new(1.0 - 1e-9).unwrap();
        let mut rng = path_rng(3, 0);
        let chains = doeblin_coupled_chains(&cpks, 0, g.m, &cfg, &mut rng).unwrap();
        ensure(
            chains.meet_step == Some(1),
            format!("meet step {:?}", chains.meet_step),
        )
    }));

    out.push(("metric-axioms", {
        let (_, g, _) = neumann16();
        let mut rng = path_rng(8, 0);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            SpatialField::new(
                (0..g.n_nodes())
                    .map(|_| 0.05 + rand::Rng::gen::<f64>(rng))
                    .collect(),
                g,
            )
            .unwrap()
        };
        let (f, h, k) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        let cfg = MetricConfig::new(0.4).unwrap();
        let (qf, qh, qk) = (
            quotient_field(&f).unwrap(),
            quotient_field(&h).unwrap(),
            quotient_field(&k).unwrap(),
        );
        let tri_x = d_x(&qf, &qk).unwrap() <= d_x(&qf, &qh).unwrap() + d_x(&qh, &qk).unwrap() + 1e-10;
        let sym = d_x_bar(&f, &h).unwrap() == d_x_bar(&h, &f).unwrap()
            && d_y(&f, &h, &cfg).unwrap() == d_y(&h, &f, &cfg).unwrap()
            && d_x(&qf, &qh).unwrap() == d_x(&qh, &qf).unwrap();
        let cell_tv: f64 = qf
            .probs()
            .iter()
            .zip(qh.probs())
            .map(|(x, y)| (x - y).abs())
            .sum();
        let dominated =
            d_x(&qf, &qh).unwrap() <= cell_tv + 1e-12 && cell_tv <= d_x_bar(&f, &h).unwrap() + 1e-12;
        ensure(tri_x && sym && dominated, "metric axiom violated")
    }));

    out.push(("dy-quotients-constants", {
        let (_, g, _) = neumann16();
        let cfg = MetricConfig::new(0.3).unwrap();
        let f = SpatialField::from_fn(g, |x| 1.0 + x);
        let d = d_y(&f, &f.scaled(4.2), &cfg).unwrap();
        ensure(d < 1e-12, format!("d_y of scaled copy = {d}"))
    }));

    out.push(("polymer-tilt-exactness", {
        let (_, g, gen) = neumann16();
        let plan = NoisePlan::white(6);
        let f = SpatialField::uniform(g);
        let h = DriftField::constant(0.8);
        let t = tilt_expectation(&gen, Some(&plan), &f, 0.5, 4, &h, 200, 11).unwrap();
        let expect = (0.8f64 * 0.5).exp();
        ensure(
            (t.v_mc - expect).abs() < 1e-12
                && t.stderr < 1e-14
                && (t.v_exact - expect).abs() < 1e-10,
            format!("tilt {} vs {expect}", t.v_mc),
        )
    }));

    out.push(("q-product-identity", {
        let (_, g, gen) = neumann16();
        let plan = NoisePlan::white(14);
        let props: Vec<_> = (0..3)
            .map(|i| propagator(&gen, i as f64, (i + 1) as f64, Some(&plan)).unwrap())
            .collect();
        let f = SpatialField::from_fn(g, |x| 1.0 + 0.3 * x);
        let chain = cpk_from_propagators(&props, &f).unwrap();
        let mut full = props[0].clone();
        for p in &props[1..] {
            full = full.compose(p).unwrap();
        }
        let defect = q_identity_defect(&chain, &full, &f).unwrap();
        ensure(defect < 1e-10, format!("identity defect {defect}"))
    }));

    if !quick {
        out.push(("kernel-cross-oracle", {
            let params = BoundaryParams::new(1.0, 1.0).unwrap();
            let sys = eigensystem(&params, 24).unwrap();
            let eig = kernel_eval(&sys, 0.25, 0.5, 0.5).unwrap();
            let mc = kernel_mc(&params, 0.25, 0.5, 0.5, 20_000, 64, 505).unwrap();
            ensure(
                (mc.estimate - eig).abs() < 4.0 * mc.stderr,
                format!("MC {} +- {} vs eigen {eig}", mc.estimate, mc.stderr),
            )
        }));

        out.push(("omega-event-band", {
            let (_, _, gen) = neumann16();
            let props: Vec<_> = (0..3)
                .map(|i| propagator(&gen, i as f64, (i + 1) as f64, None).unwrap())
                .collect();
            let min = props
                .iter()
                .map(|p| p.min_entry())
                .fold(f64::INFINITY, f64::min);
            let stats = omega_event_check(&props, 0.9 * min, 3, 17).unwrap();
            let flagged_ok = stats.doeblin_count == stats.flags.len() && stats.delta_cubed_ok;
            let vacuous = omega_event_check(&props, 2.0 * props[0].max_entry(), 2, 17).unwrap();
            ensure(
                flagged_ok && vacuous.doeblin_count == 0 && vacuous.delta_cubed_ok,
                format!("omega events: {stats:?}"),
            )
        }));

        out.push(("support-probe-trivial", {
            let (_, g, gen) = neumann16();
            let constant = SpatialField::new(vec![0.5; g.n_nodes()], g).unwrap();
            let rows = tilt_support_experiment(&gen, &constant, &[2, 4], 2, 5).unwrap();
            ensure(
                rows.iter().all(|r| r.mean_dx < 1e-10),
                "constant profile should quotient away",
            )
        }));
    }

    out
}
