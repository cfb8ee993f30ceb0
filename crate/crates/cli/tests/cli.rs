use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use btc_cli::config::{CommandKind, Source, SweepMethod};
use btc_cli::{parse_config, Category};

fn argv(s: &str) -> Vec<String> {
    std::iter::once("btc".to_string())
        .chain(s.split_whitespace().map(String::from))
        .collect()
}

fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn btc(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btc"))
        .current_dir(dir)
        .args(args.split_whitespace())
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn flags_build_the_run_config() {
    let cfg = parse_config(
        argv("--omega 2 --gamma 1 --nbeta 1 --nspins 40 lindblad"),
        &[],
    )
    .unwrap();
    assert_eq!(cfg.command, CommandKind::Lindblad);
    assert_eq!(cfg.params.n_spins, 40);
    assert_eq!(cfg.params.omega_rabi / cfg.params.gamma, 2.0);
    assert_eq!(cfg.params.n_beta, 1.0);
    assert_eq!(cfg.source_of("omega"), Some(&Source::Flag("omega".into())));
    assert_eq!(cfg.source_of("dt"), Some(&Source::Default));
}

#[test]
fn flag_beats_env_beats_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.conf");
    fs::write(
        &file,
        "# sweep setup\ncommand = steady\nnspins = 10  # small\nomega = 0.5\njobs = 3\n",
    )
    .unwrap();
    let path = file.to_str().unwrap();

    let cfg = parse_config(argv(&format!("--config {path} --nspins 20")), &[]).unwrap();
    assert_eq!(cfg.params.n_spins, 20);
    assert_eq!(cfg.command, CommandKind::Steady);
    assert_eq!(cfg.params.omega_rabi, 0.5);
    assert_eq!(
        cfg.source_of("omega"),
        Some(&Source::File {
            path: file.clone(),
            line: 4
        })
    );

    let e = env(&[("BTC_NSPINS", "30"), ("BTC_OMEGA", "1.5")]);
    let cfg = parse_config(argv(&format!("--config {path}")), &e).unwrap();
    assert_eq!(cfg.params.n_spins, 30);
    assert_eq!(cfg.params.omega_rabi, 1.5);
    assert_eq!(cfg.sweep.jobs, 3);

    let cfg = parse_config(argv(&format!("--config {path} --nspins 20")), &e).unwrap();
    assert_eq!(cfg.params.n_spins, 20);

    // the config file can also come from the environment
    let e = env(&[("BTC_CONFIG", path)]);
    let cfg = parse_config(argv("--method lindblad"), &e).unwrap();
    assert_eq!(cfg.params.n_spins, 10);
    assert_eq!(cfg.sweep.method, SweepMethod::Lindblad);
}

#[test]
fn negative_occupation_names_the_constraint() {
    let err = parse_config(argv("--nbeta -1 lindblad"), &[]).unwrap_err();
    assert_eq!(err.category, Category::Config);
    assert!(err.message.contains("n_β ≥ 0"), "{}", err.message);
    assert!(err.message.contains("--nbeta"), "{}", err.message);

    let dir = tempfile::tempdir().unwrap();
    let out = btc(dir.path(), "--nbeta -1 lindblad");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("n_β ≥ 0"));
}

#[test]
fn unknown_keys_are_rejected_with_their_location() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("typo.conf");
    fs::write(&file, "command = meanfield\n\nnspin = 10\n").unwrap();
    let err = parse_config(argv(&format!("--config {}", file.display())), &[]).unwrap_err();
    assert!(err.message.contains("typo.conf:3"), "{}", err.message);
    assert!(err.message.contains("nspin"), "{}", err.message);

    let err = parse_config(argv("meanfield"), &env(&[("BTC_OMEGAA", "1")])).unwrap_err();
    assert!(err.message.contains("BTC_OMEGAA"), "{}", err.message);

    let err = parse_config(argv("meanfield --omegaa 1"), &[]).unwrap_err();
    assert_eq!(err.category, Category::Config);

    fs::write(&file, "command meanfield\n").unwrap();
    let err = parse_config(argv(&format!("--config {}", file.display())), &[]).unwrap_err();
    assert!(err.message.contains("typo.conf:1"), "{}", err.message);
}

#[test]
fn unparsable_and_missing_values() {
    let err = parse_config(argv("--omega two meanfield"), &[]).unwrap_err();
    assert!(
        err.message.contains("omega") && err.message.contains("--omega"),
        "{}",
        err.message
    );

    let err = parse_config(argv("--nspins 10"), &[]).unwrap_err();
    assert!(
        err.message.contains("missing required field `command`"),
        "{}",
        err.message
    );

    let err = parse_config(argv("warp-drive"), &[]).unwrap_err();
    assert!(
        err.message.contains("command-line argument"),
        "{}",
        err.message
    );

    let err = parse_config(argv("--dt 0 meanfield"), &[]).unwrap_err();
    assert!(err.message.contains("dt > 0"), "{}", err.message);

    let err = parse_config(argv("--omegas 1:0:0.1 sweep-power"), &[]).unwrap_err();
    assert!(err.message.contains("omegas"), "{}", err.message);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, args) in [
        ("meanfield.csv", "meanfield --t-max 5 --omega 2"),
        ("fluct.csv", "fluct --t-max 5 --omega 2"),
        ("thermo.csv", "lindblad --nspins 6 --t-max 1"),
    ] {
        let a = btc(dir.path(), &format!("{args} --output a"));
        let b = btc(dir.path(), &format!("{args} --output b"));
        assert!(a.status.success(), "{}", stderr(&a));
        assert!(b.status.success(), "{}", stderr(&b));
        let fa = fs::read(dir.path().join("a").join(name)).unwrap();
        let fb = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(fa, fb, "{name}");
        fs::remove_dir_all(dir.path().join("a")).unwrap();
        fs::remove_dir_all(dir.path().join("b")).unwrap();
    }
}

#[test]
fn sweep_order_does_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let args = "sweep-power --omegas 0.5:1.5:0.25 --t-max 60";
    assert!(btc(dir.path(), &format!("{args} --jobs 1 --output serial"))
        .status
        .success());
    assert!(
        btc(dir.path(), &format!("{args} --jobs 3 --output parallel"))
            .status
            .success()
    );
    let serial = fs::read_to_string(dir.path().join("serial/sweep.csv")).unwrap();
    let parallel = fs::read_to_string(dir.path().join("parallel/sweep.csv")).unwrap();
    assert_eq!(serial, parallel);
    let omegas: Vec<f64> = serial
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(omegas, vec![0.5, 0.75, 1.0, 1.25, 1.5]);
}

#[test]
fn manifest_echoes_the_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = btc(dir.path(), "meanfield --t-max 1 --omega 0.5 --output run");
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = fs::read_to_string(dir.path().join("run/manifest")).unwrap();
    assert!(manifest.contains("command = meanfield  # command-line argument"));
    assert!(manifest.contains("omega = 0.5  # flag --omega"));
    assert!(manifest.contains("dt = 0.001  # default"));
    assert!(manifest.contains("version = 0.1.0"));
    assert!(manifest.contains("wall_time_s = "));
    assert!(manifest.contains("outputs = meanfield.csv,thermo.csv"));
    let header = fs::read_to_string(dir.path().join("run/meanfield.csv")).unwrap();
    assert!(header.starts_with("t,mx,my,mz,c\n"));
}

#[test]
fn existing_outputs_need_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let args = "meanfield --t-max 1 --output run";
    assert!(btc(dir.path(), args).status.success());
    let again = btc(dir.path(), args);
    assert_eq!(again.status.code(), Some(5));
    assert!(stderr(&again).contains("--overwrite"));
    assert!(btc(dir.path(), &format!("{args} --overwrite"))
        .status
        .success());
}

#[test]
fn failure_categories_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // a coarse step breaks |m|² conservation and aborts the integrator
    let abort = btc(dir.path(), "meanfield --dt 0.5 --t-max 50 --output a");
    assert_eq!(abort.status.code(), Some(3), "{}", stderr(&abort));
    assert!(stderr(&abort).contains("integrator abort"));

    let zero_t = btc(dir.path(), "ep-dist --nspins 3 --nbeta 0 --output b");
    assert_eq!(zero_t.status.code(), Some(4), "{}", stderr(&zero_t));

    let help = btc(dir.path(), "--help");
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("--nbeta"));
}

#[test]
fn sweep_power_shows_the_cusp() {
    let dir = tempfile::tempdir().unwrap();
    let out = btc(
        dir.path(),
        "sweep-power --omegas 0.8:1.2:0.1 --t-max 200 --output s",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: Vec<(f64, f64)> = fs::read_to_string(dir.path().join("s/sweep.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    // Ω²/2 below the transition
    for &(om, w) in &rows[..2] {
        assert!((w - om * om / 2.0).abs() < 1e-6);
    }
    let left = (rows[2].1 - rows[1].1) / 0.1;
    let right = (rows[3].1 - rows[2].1) / 0.1;
    assert!(left > 0.0 && right < 0.0, "{left} {right}");
}

#[test]
fn ep_dist_summary_satisfies_the_integral_theorem() {
    let dir = tempfile::tempdir().unwrap();
    let out = btc(dir.path(), "ep-dist --nspins 4 --omega 2 --output ep");
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("ep/ep_summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((v["integral_ft"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!(v["max_crooks_residual"].as_f64().unwrap() < 1e-6);
    assert!(v["negativity"].as_f64().is_some());
    let csv = fs::read_to_string(dir.path().join("ep/ep_forward.csv")).unwrap();
    assert!(csv.starts_with("sigma,weight\n"));
    let total: f64 = csv
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-8);
}

#[test]
fn collision_check_is_first_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = btc(
        dir.path(),
        "collision-check --nspins 2 --t-max 0.5 --deltas 4e-3,2e-3 --output c",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("c/convergence.csv")).unwrap();
    let d: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let ratio = d[0] / d[1];
    assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    let traj = fs::read_to_string(dir.path().join("c/collision.csv")).unwrap();
    assert!(traj
        .starts_with("k,t,trace_distance_to_lindblad,heat_cumulative,heat_lindblad_cumulative\n"));
    // finest δt: 0.5 / 2e-3 collisions plus the initial row
    assert_eq!(traj.lines().count(), 1 + 251);
}
