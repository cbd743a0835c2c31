use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use satrelay_ffi::*;

const CONFIG: &str = "\
[scenario]
episode_slots = 4
[reward]
mu_bps = 4.0e5
sigma_bps = 1.0e5
";

fn last_error() -> String {
    let p = sr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn env_from(dir: &Path, text: &str) -> (SrStatus, *mut SrEnv) {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut env = ptr::null_mut();
    let s = unsafe { sr_env_new_from_file(c.as_ptr(), &mut env) };
    (s, env)
}

#[test]
fn capacity_matches_closed_form() {
    let mut c = 0.0;
    let s = unsafe { sr_link_capacity(1000.0, 1e9, 2.0, 1e6, &mut c) };
    assert_eq!(s, SrStatus::Ok);
    assert!((c - 1e6 * (1.0f64 + 1e3).log2()).abs() < 1e-6);

    assert_eq!(
        unsafe { sr_link_capacity(0.0, 1e9, 2.0, 1e6, &mut c) },
        SrStatus::InvalidArgument
    );
    assert!(last_error().contains("zero"));
    assert_eq!(
        unsafe { sr_link_capacity(1.0, 1e9, 2.0, -1.0, &mut c) },
        SrStatus::InvalidConfig
    );
    assert_eq!(
        unsafe { sr_link_capacity(1.0, 1e9, 2.0, 1.0, ptr::null_mut()) },
        SrStatus::NullPointer
    );
}

#[test]
fn episode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (s, env) = env_from(dir.path(), CONFIG);
    assert_eq!(s, SrStatus::Ok, "{}", last_error());
    let (mut dim, mut count) = (0usize, 0usize);
    unsafe {
        assert_eq!(sr_env_observation_dim(env, &mut dim), SrStatus::Ok);
        assert_eq!(sr_env_action_count(env, &mut count), SrStatus::Ok);
    }
    assert_eq!((dim, count), (16, 50));

    let mut obs = vec![0.0; dim];
    let (mut reward, mut done, mut rate) = (0.0, false, 0.0);
    unsafe {
        assert_eq!(sr_env_reset(env, obs.as_mut_ptr(), dim), SrStatus::Ok);
        for k in 0..4 {
            let s = sr_env_step(
                env,
                12,
                obs.as_mut_ptr(),
                dim,
                &mut reward,
                &mut done,
                &mut rate,
            );
            assert_eq!(s, SrStatus::Ok);
            assert!(reward > 0.0 && reward < 1.0);
            assert!(rate > 0.0);
            assert_eq!(done, k == 3);
        }
        let s = sr_env_step(
            env,
            12,
            obs.as_mut_ptr(),
            dim,
            &mut reward,
            &mut done,
            ptr::null_mut(),
        );
        assert_eq!(s, SrStatus::EpisodeFinished);

        assert_eq!(sr_env_reset(env, obs.as_mut_ptr(), dim), SrStatus::Ok);
        let s = sr_env_step(
            env,
            count,
            obs.as_mut_ptr(),
            dim,
            &mut reward,
            &mut done,
            ptr::null_mut(),
        );
        assert_eq!(s, SrStatus::OutOfRange);
        let s = sr_env_step(
            env,
            0,
            obs.as_mut_ptr(),
            dim - 1,
            &mut reward,
            &mut done,
            ptr::null_mut(),
        );
        assert_eq!(s, SrStatus::DimensionMismatch);
        sr_env_free(env);
        sr_env_free(ptr::null_mut());
    }
}

#[test]
fn bad_config_reports_field() {
    let dir = tempfile::tempdir().unwrap();
    let (s, env) = env_from(dir.path(), "[kinematics]\naccel_levels = 1\n");
    assert_eq!(s, SrStatus::InvalidConfig);
    assert!(env.is_null());
    assert!(last_error().contains("accel_levels"));

    let missing = CString::new("/nonexistent/satrelay.toml").unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(
        unsafe { sr_env_new_from_file(missing.as_ptr(), &mut env) },
        SrStatus::Io
    );
    assert!(last_error().contains("/nonexistent/satrelay.toml"));
}

#[test]
fn policy_acts_greedily() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    let params =
        satrelay::neural::MlpParams::from_layers(&[2, 3], &[(vec![0.0; 6], vec![0.1, 0.9, 0.9])])
            .unwrap();
    params.save(&path).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut policy = ptr::null_mut();
    unsafe {
        assert_eq!(sr_policy_load(c.as_ptr(), &mut policy), SrStatus::Ok);
        let mut a = 99usize;
        assert_eq!(
            sr_policy_act(policy, [0.5, 0.5].as_ptr(), 2, &mut a),
            SrStatus::Ok
        );
        assert_eq!(a, 1);
        assert_eq!(
            sr_policy_act(policy, [0.5].as_ptr(), 1, &mut a),
            SrStatus::DimensionMismatch
        );
        sr_policy_free(policy);
    }

    std::fs::write(&path, "{\"format_version\":1").unwrap();
    let mut policy = ptr::null_mut();
    assert_eq!(
        unsafe { sr_policy_load(c.as_ptr(), &mut policy) },
        SrStatus::Checkpoint
    );
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(sr_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/satrelay.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ double c; return sr_link_capacity(1.0, 1.0, 2.0, 1.0, &c) == SR_STATUS_OK ? 0 : 1; }}\n",
            header.display()
        ),
    )
    .unwrap();
    let status = match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => return,
    };
    assert!(status.success());
}
