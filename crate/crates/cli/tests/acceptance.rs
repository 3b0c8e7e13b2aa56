//! End-to-end acceptance suite. Each test prints one verdict line straight
//! to stderr (bypassing capture) so the log shows every criterion.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command as Process;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use snswitch::integrator::{Forcing, InitialCondition, Models, SimConfig, Simulator};
use snswitch::nonlinearity::{b_form, b_mollified_apply, mollifier_multiplier, MollifierTable};
use snswitch::spectral::{build_modes, SpectralField};
use snswitch::stats::order_fit;
use snswitch_cli::{run, Command, Config, RunOptions};

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("acceptance {id:>2} {name:<28} {}  {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn run_report(cmd: Command, cfg: Config, file: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run(cmd, cfg, RunOptions::default(), dir.path()).unwrap();
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(file)).unwrap()).unwrap();
    assert_eq!(json["pass"].as_bool(), Some(manifest.pass));
    json
}

fn flag(v: &Value, key: &str) -> bool {
    v[key].as_bool().unwrap_or(false)
}

#[test]
fn a01_trilinear_identities() {
    let modes = build_modes(2).unwrap();
    let table = MollifierTable::new(&modes, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = SpectralField::random(&modes, &mut rng, 1.0);
        let v = SpectralField::random(&modes, &mut rng, 1.0);
        let w = SpectralField::random(&modes, &mut rng, 1.0);
        let vv = b_form(&u, &v, &v).unwrap().abs() / (u.v_norm() * v.v_norm().powi(2));
        let skew = (b_form(&u, &v, &w).unwrap() + b_form(&u, &w, &v).unwrap()).abs() / (u.v_norm() * v.v_norm() * w.v_norm());
        let moll = b_mollified_apply(&table, &u).h_inner(&u).unwrap().abs() / u.v_norm().powi(3);
        worst = worst.max(vv).max(skew).max(moll);
    }
    let pass = worst <= 1e-12;
    verdict(1, "algebraic identities", pass, &format!("max relative defect {worst:.2e}"));
    assert!(pass);
}

#[test]
fn a02_mollifier_properties() {
    let levels = [0.4, 0.2, 0.1, 0.05];
    let modes = build_modes(3).unwrap();
    let mut bounded = true;
    for &eps in &levels {
        for &k in modes.waves() {
            bounded &= mollifier_multiplier(eps, k).unwrap().abs() <= 1.0;
        }
    }
    let tables: Vec<MollifierTable> = levels.iter().map(|&e| MollifierTable::new(&modes, e).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut contractive, mut monotone) = (true, true);
    for _ in 0..20 {
        let u = SpectralField::random(&modes, &mut rng, 1.0);
        let gaps: Vec<f64> = tables
            .iter()
            .map(|t| {
                let ku = t.apply(&u);
                contractive &= ku.h_norm() <= u.h_norm();
                ku.sub(&u).unwrap().h_norm()
            })
            .collect();
        monotone &= gaps.windows(2).all(|g| g[1] < g[0]);
    }
    let pass = bounded && contractive && monotone;
    verdict(
        2,
        "mollifier properties",
        pass,
        &format!("bounded {bounded}, contractive {contractive}, monotone {monotone}"),
    );
    assert!(pass);
}

#[test]
fn a03_stokes_exactness() {
    let run_decay = |dt: f64| {
        let cfg = SimConfig {
            k_max: 1,
            dt,
            forcing: Forcing::Zero,
            initial: InitialCondition::Mode { entry: 0, amplitude: 1.0 },
            ..SimConfig::default()
        };
        let modes = build_modes(1).unwrap();
        let sim = Simulator::new(cfg, Models::silent(&modes, 2)).unwrap();
        sim.run_path(0).unwrap()
    };
    let rec = run_decay(1e-3);
    let lambda = 1.0; // |k|² of the first entry
    let mut product_gap: f64 = 0.0;
    for s in &rec.samples {
        let steps = (s.t / 1e-3).round();
        let exact = (-steps * (lambda * 1e-3f64).ln_1p()).exp();
        product_gap = product_gap.max((s.coeffs[0].re - exact).abs());
    }
    let last = rec.final_state.u.coeffs()[0].re;
    let target = (-lambda).exp();
    let rel = (last - target).abs() / target;
    let rel_ok = rel <= 2.0 * lambda * 1e-3 * 1.0;

    let dts = [1e-3, 5e-4, 2.5e-4];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| (run_decay(dt).final_state.u.coeffs()[0].re - target).abs())
        .collect();
    let order = order_fit(&dts, &errs);
    let pass = product_gap <= 1e-12 && rel_ok && order >= 0.9;
    verdict(
        3,
        "Stokes exactness",
        pass,
        &format!("resolvent gap {product_gap:.1e}, rel. error {rel:.2e}, order {order:.3}"),
    );
    assert!(pass);
}

#[test]
fn a04_markov_chain() {
    let two = run_report(Command::ChainTest, Config::default(), "chain_test.json");
    let stationary_ok = (two["stationary"][0].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12;

    // A three-state chain gives the transition chi-square real degrees of
    // freedom; only the simulator agreement tests are its business.
    let mut cfg = Config::default();
    cfg.chain.generator = vec![vec![-1.5, 1.0, 0.5], vec![0.5, -1.0, 0.5], vec![2.0, 1.0, -3.0]];
    cfg.noise.amplitudes = vec![1.0, 0.5, 0.8];
    cfg.jumps.gains = vec![0.3, 0.5, 0.4];
    cfg.martingale.phi_weights = vec![1.0, 0.5, 0.8];
    let three = run_report(Command::ChainTest, cfg, "chain_test.json");

    let pass = flag(&two, "pass") && stationary_ok && flag(&three, "agreement_pass");
    verdict(
        4,
        "Markov chain",
        pass,
        &format!(
            "two-state {}, three-state KS/chi-square {}",
            flag(&two, "pass"),
            flag(&three, "agreement_pass")
        ),
    );
    assert!(pass);
}

#[test]
fn a05_hypothesis_audit() {
    let r = run_report(Command::AuditHypotheses, Config::default(), "audit_hypotheses.json");
    let pass = flag(&r, "pass") && r["samples"].as_u64() == Some(10_000) && r["slack"].as_f64() == Some(0.05);
    let worst = ["diffusion_growth", "diffusion_lipschitz", "jump_growth", "jump_lipschitz"]
        .iter()
        .map(|k| r[k]["empirical"].as_f64().unwrap() / r[k]["closed_form"].as_f64().unwrap())
        .fold(0.0, f64::max);
    verdict(5, "hypothesis audit", pass, &format!("max empirical/closed-form {worst:.4}"));
    assert!(pass);
}

#[test]
fn a06_moment_bounds() {
    let r = run_report(Command::Moments, Config::default(), "moments.json");
    let pass = flag(&r, "pass") && r["blow_ups"].as_u64() == Some(0) && r["paths"].as_u64() == Some(1000);
    let detail = format!(
        "E sup|u|^2 + nu E int |u|_V^2 upper {:.3} vs C2 {:.3e}",
        r["energy_sup"]["estimate"]["mean"].as_f64().unwrap() + 3.0 * r["energy_sup"]["estimate"]["se"].as_f64().unwrap(),
        r["energy_sup"]["bound"].as_f64().unwrap()
    );
    verdict(6, "a priori moment bounds", pass, &detail);
    assert!(pass);
}

#[test]
fn a07_energy_equality() {
    let r = run_report(Command::Energy, Config::default(), "energy.json");
    let pass = flag(&r, "mean_pass") && flag(&r, "order_pass") && flag(&r, "pass");
    let detail = format!(
        "z {:.3}, noise-off order {:.3}",
        r["z"].as_f64().unwrap(),
        r["noise_off_order"].as_f64().unwrap()
    );
    verdict(7, "energy equality", pass, &detail);
    assert!(pass);
}

#[test]
fn a08_martingale_problem() {
    let r = run_report(Command::MartingaleTest, Config::default(), "martingale_test.json");
    let pass = flag(&r, "test_pass") && flag(&r, "control_detects") && r["paths"].as_u64() == Some(10_000);
    let detail = format!(
        "max |z| {:.3}, nu-doubled control max |z| {:.2}",
        r["max_abs_z"].as_f64().unwrap(),
        r["control_max_abs_z"].as_f64().unwrap()
    );
    verdict(8, "martingale test", pass, &detail);
    assert!(pass);
}

#[test]
fn a09_continuity_in_initial_data() {
    let r = run_report(Command::Continuity, Config::default(), "continuity.json");
    let pass = flag(&r, "ratios_pass") && flag(&r, "monotone_pass");
    let ratios: Vec<String> = r["noise_off"]["ratios"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| format!("{:.3}", x.as_f64().unwrap()))
        .collect();
    verdict(
        9,
        "uniqueness mechanism",
        pass,
        &format!(
            "noise-off ratios [{}], noisy monotone {}",
            ratios.join(", "),
            flag(&r, "monotone_pass")
        ),
    );
    assert!(pass);
}

#[test]
fn a10_eps_limit_and_refinement() {
    let eps = run_report(Command::EpsStudy, Config::default(), "eps_study.json");
    let refine = run_report(Command::Refine, Config::default(), "refine.json");
    let pairs = eps["study"]["rows"].as_array().unwrap().len();
    let pass = flag(&eps, "pass") && pairs >= 3 && flag(&refine, "order_pass") && flag(&refine, "increments_pass");
    let detail = format!(
        "D(eps) decreasing over {pairs} pairs {}, dt order {:.3}, increment proxy decreasing {}",
        flag(&eps, "pass"),
        refine["dt_order"].as_f64().unwrap(),
        flag(&refine, "increments_pass")
    );
    verdict(10, "eps limit and refinement", pass, &detail);
    assert!(pass);
}

/// Every file of a run directory, with the manifest's wall-clock removed.
fn machine_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let mut bytes = fs::read(&path).unwrap();
        if name == "manifest.json" {
            let mut v: Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("wall_clock");
            bytes = v.to_string().into_bytes();
        }
        out.insert(name, bytes);
    }
    out
}

#[test]
fn a11_determinism() {
    let runs: [(&str, &str); 9] = [
        ("simulate", "4"),
        ("moments", "100"),
        ("energy", "20"),
        ("martingale-test", "1000"),
        ("continuity", "20"),
        ("eps-study", "20"),
        ("refine", "20"),
        ("chain-test", "200"),
        ("audit-hypotheses", "1000"),
    ];
    let root = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for (cmd, paths) in runs {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let dir = root.path().join(format!("{cmd}-{threads}"));
            let status = Process::new(env!("CARGO_BIN_EXE_snswitch"))
                .args([
                    cmd,
                    "--paths",
                    paths,
                    "--threads",
                    threads,
                    "--seed",
                    "99",
                    "--emit-events",
                    "--out",
                ])
                .arg(&dir)
                .status()
                .unwrap();
            assert!(status.code().is_some_and(|c| c <= 1), "{cmd} crashed");
            outputs.push(machine_outputs(&dir));
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            mismatched.push(cmd);
        }
    }
    let pass = mismatched.is_empty();
    verdict(
        11,
        "determinism",
        pass,
        &format!("9 subcommands rerun with 1 and 3 threads, mismatches {mismatched:?}"),
    );
    assert!(pass);
}
