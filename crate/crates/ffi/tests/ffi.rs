use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use nalgebra::DMatrix;

use social_inverse::forward::{run_simulation, RecordOptions};
use social_inverse::graph::generate_erdos_renyi;
use social_inverse::inverse::{run_inverse, InverseConfig, RunOptions};
use social_inverse::models::LikelihoodModel;
use social_inverse_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(si_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn graph_handle_matches_the_library() {
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { si_graph_erdos_renyi(8, 0.4, 21, &mut g) },
        SiStatus::Ok
    );
    let n = unsafe { si_graph_n_agents(g) };
    let mut w = vec![0.0; n * n];
    assert_eq!(
        unsafe { si_graph_weights(g, w.as_mut_ptr(), w.len()) },
        SiStatus::Ok
    );
    let direct = generate_erdos_renyi(8, 0.4, 21).unwrap();
    assert_eq!(DMatrix::from_row_slice(n, n, &w), *direct.weights());

    let mut u = vec![0.0; n];
    assert_eq!(
        unsafe { si_graph_perron_vector(g, 1e-13, u.as_mut_ptr(), n) },
        SiStatus::Ok
    );
    assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let mut short = vec![0.0; n - 1];
    assert_eq!(
        unsafe { si_graph_perron_vector(g, 1e-13, short.as_mut_ptr(), short.len()) },
        SiStatus::BufferSize
    );
    assert!(last_error().contains("are needed"));
    unsafe { si_graph_free(g) };
}

#[test]
fn null_handles_and_invalid_input_are_reported() {
    let mut out = 0usize;
    assert_eq!(
        unsafe { si_graph_most_central(ptr::null(), &mut out) },
        SiStatus::NullPointer
    );
    assert!(last_error().contains("graph"));

    let w = [0.5, 0.5, 0.4, 0.6];
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { si_graph_from_weights(2, w.as_ptr(), 4, &mut g) },
        SiStatus::Config
    );
    assert!(g.is_null());

    let mut m = ptr::null_mut();
    let bad = CString::new("{\"shared\": 3}").unwrap();
    assert_eq!(
        unsafe { si_models_from_json(bad.as_ptr(), &mut m) },
        SiStatus::Data
    );

    let mut est = ptr::null_mut();
    assert_eq!(
        unsafe { si_inverse_new(3, 2, 1e-3, 1.5, 10, 0.0, 0, &mut est) },
        SiStatus::Config
    );
    unsafe {
        si_graph_free(ptr::null_mut());
        si_inverse_free(ptr::null_mut());
    }
}

#[test]
fn streaming_through_the_abi_matches_run_inverse() {
    let (n, h, iterations, seed) = (6usize, 3usize, 800usize, 4u64);
    let pmfs = [0.7, 0.15, 0.15, 0.15, 0.7, 0.15, 0.15, 0.15, 0.7];
    let truths = [0usize, 0, 0, 0, 0, 1];
    let json = CString::new(
        r#"{"shared": {"family": "categorical", "pmfs": [[0.7,0.15,0.15],[0.15,0.7,0.15],[0.15,0.15,0.7]]}, "n_agents": 6}"#,
    )
    .unwrap();

    let (mut g, mut m, mut m2, mut sim, mut est) = (
        ptr::null_mut(),
        ptr::null_mut(),
        ptr::null_mut(),
        ptr::null_mut(),
        ptr::null_mut(),
    );
    unsafe {
        assert_eq!(si_graph_erdos_renyi(n, 0.5, 3, &mut g), SiStatus::Ok);
        assert_eq!(
            si_models_categorical(n, h, 3, pmfs.as_ptr(), 9, &mut m),
            SiStatus::Ok
        );
        assert_eq!(si_models_from_json(json.as_ptr(), &mut m2), SiStatus::Ok);
        assert_eq!(si_models_n_hypotheses(m2), 3);
        assert_eq!(
            si_simulation_new(g, m, truths.as_ptr(), n, 0.1, seed, &mut sim),
            SiStatus::Ok
        );
        assert_eq!(
            si_inverse_new(n, h, 0.01, 0.1, 30, 0.0, 0, &mut est),
            SiStatus::Ok
        );
    }
    let mut public = vec![0.0; n * h];
    let mut lambda = vec![0.0; n * (h - 1)];
    let mut updated = false;
    let mut change = 0.0;
    for i in 0..iterations {
        unsafe {
            assert_eq!(
                si_simulation_step(
                    sim,
                    public.as_mut_ptr(),
                    public.len(),
                    lambda.as_mut_ptr(),
                    lambda.len()
                ),
                SiStatus::Ok
            );
            assert_eq!(
                si_inverse_push_public(
                    est,
                    public.as_ptr(),
                    public.len(),
                    &mut updated,
                    &mut change
                ),
                SiStatus::Ok
            );
        }
        assert_eq!(updated, i >= 31);
        assert_eq!(change.is_nan(), !updated);
    }
    assert_eq!(unsafe { si_simulation_iteration(sim) }, iterations);

    let mut a_est = vec![0.0; n * n];
    let mut l_est = vec![0.0; n * (h - 1)];
    unsafe {
        assert_eq!(
            si_inverse_a_est(est, a_est.as_mut_ptr(), a_est.len()),
            SiStatus::Ok
        );
        assert_eq!(
            si_inverse_l_est(est, l_est.as_mut_ptr(), l_est.len()),
            SiStatus::Ok
        );
    }

    // Same pipeline through the library directly.
    let a = generate_erdos_renyi(n, 0.5, 3).unwrap();
    let models: Vec<_> = (0..n)
        .map(|k| {
            LikelihoodModel::categorical(
                k,
                vec![
                    pmfs[0..3].to_vec(),
                    pmfs[3..6].to_vec(),
                    pmfs[6..9].to_vec(),
                ],
            )
            .unwrap()
        })
        .collect();
    let trace = run_simulation(
        &a,
        &models,
        &truths,
        0.1,
        iterations,
        seed,
        RecordOptions::default(),
    )
    .unwrap();
    let cfg = InverseConfig {
        step_mu: 0.01,
        delta: 0.1,
        batch_m: 30,
        tol: 0.0,
        ..InverseConfig::default()
    };
    let outcome = run_inverse(
        trace.public_beliefs().unwrap(),
        &cfg,
        &RunOptions::default(),
    )
    .unwrap();
    let scale = outcome.a_est.amax().max(1.0);
    assert!((DMatrix::from_row_slice(n, n, &a_est) - &outcome.a_est).amax() <= 1e-9 * scale);
    assert!((DMatrix::from_row_slice(n, h - 1, &l_est) - &outcome.l_est).amax() <= 1e-9 * scale);

    let mut mask = vec![0u8; n * h];
    let mut flags = vec![0u8; n];
    let reference = [0usize];
    unsafe {
        assert_eq!(
            si_inverse_hypotheses(
                est,
                reference.as_ptr(),
                1,
                mask.as_mut_ptr(),
                mask.len(),
                flags.as_mut_ptr(),
                n
            ),
            SiStatus::Ok
        );
    }
    for k in 0..n {
        let set: Vec<usize> = (0..h).filter(|&j| mask[k * h + j] == 1).collect();
        assert_eq!(set, outcome.hypotheses.sets[k]);
    }

    let mut bound = 0.0;
    unsafe {
        assert_eq!(
            si_error_bound(m, 0, 0, 1, 200, 2.0, &mut bound),
            SiStatus::Ok
        );
        assert!(bound > 0.0);
        assert_eq!(
            si_error_bound(m, 0, 0, 0, 200, 2.0, &mut bound),
            SiStatus::Config
        );
        si_inverse_free(est);
        si_simulation_free(sim);
        si_models_free(m);
        si_models_free(m2);
        si_graph_free(g);
    }
}

/// Builds the static library, then compiles and runs `smoke.c` against it and the
/// generated header.
#[test]
fn c_program_links_against_the_static_library() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // <target>/<profile>/deps/<test binary>
    let target_dir = std::env::current_exe()
        .unwrap()
        .ancestors()
        .nth(3)
        .unwrap()
        .to_path_buf();
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let build = Command::new(cargo)
        .args([
            "build",
            "--quiet",
            "-p",
            "social-inverse-ffi",
            "--lib",
            "--target-dir",
        ])
        .arg(&target_dir)
        .status()
        .expect("cargo runs");
    assert!(build.success());
    let lib = target_dir.join("debug").join("libsocial_inverse_ffi.a");
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("si_smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg(crate_dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "exit {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("agents=6 updates=479"));
}
