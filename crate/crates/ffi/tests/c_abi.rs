use std::ffi::CStr;
use std::ptr;

use qrd_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qrd_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn uniform_solve_round_trip() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(qrd_instance_new_uniform(2, 0.375, &mut inst), QrdStatus::Ok);
        let (mut n, mut m) = (0, 0);
        assert_eq!(qrd_instance_dims(inst, &mut n, &mut m), QrdStatus::Ok);
        assert_eq!((n, m), (2, 2));

        let mut cfg = qrd_config_default();
        cfg.tol = 1e-12;
        for path in [QrdPath::Dense, QrdPath::Symmetric] {
            let mut res = ptr::null_mut();
            assert_eq!(qrd_solve(inst, &cfg, path, &mut res), QrdStatus::Ok);
            let rate = qrd_result_rate(res);
            assert!((rate - qrd_analytic_uniform_rd(2, 0.375)).abs() < 1e-9);
            assert!((qrd_result_beta(res) - 5.0_f64.ln()).abs() < 1e-8);
            assert!(qrd_result_final_e_opt(res) <= 1e-12);
            assert!(qrd_result_iterations(res) > 0);
            let mut status = QrdSolveStatus::MaxIterReached;
            assert_eq!(qrd_result_status(res, &mut status), QrdStatus::Ok);
            assert_eq!(status, QrdSolveStatus::Converged);
            let mut got = QrdPath::DenseFallback;
            assert_eq!(qrd_result_path(res, &mut got), QrdStatus::Ok);
            assert_eq!(got, path);

            let mut re = [0.0; 4];
            let mut im = [0.0; 4];
            assert_eq!(
                qrd_result_sigma_b(res, re.as_mut_ptr(), im.as_mut_ptr(), 4),
                QrdStatus::Ok
            );
            assert!((re[0] + re[3] - 1.0).abs() < 1e-12);
            let mut big_re = [0.0; 16];
            let mut big_im = [0.0; 16];
            assert_eq!(
                qrd_result_rho_rb(res, big_re.as_mut_ptr(), big_im.as_mut_ptr(), 16),
                QrdStatus::Ok
            );
            let trace: f64 = (0..4).map(|i| big_re[i * 4 + i]).sum();
            assert!((trace - 1.0).abs() < 1e-9);
            assert_eq!(
                qrd_result_rho_rb(res, big_re.as_mut_ptr(), big_im.as_mut_ptr(), 15),
                QrdStatus::BufferTooSmall
            );
            assert_eq!(
                qrd_result_exp_neg_lambda(res, re.as_mut_ptr(), im.as_mut_ptr(), 4),
                QrdStatus::Ok
            );
            qrd_result_free(res);
        }
        qrd_instance_free(inst);
    }
}

#[test]
fn rate_zero_and_default_config() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(
            qrd_instance_new_random(3, 9, 0.99, &mut inst),
            QrdStatus::Ok
        );
        let mut res = ptr::null_mut();
        assert_eq!(
            qrd_solve(inst, ptr::null(), QrdPath::Symmetric, &mut res),
            QrdStatus::Ok
        );
        let mut status = QrdSolveStatus::Converged;
        qrd_result_status(res, &mut status);
        assert_eq!(status, QrdSolveStatus::RateZeroShortcut);
        assert_eq!(qrd_result_rate(res), 0.0);
        qrd_result_free(res);
        qrd_instance_free(inst);
    }
}

#[test]
fn explicit_matrices_and_errors() {
    unsafe {
        let rho_re = [0.7, 0.1, 0.1, 0.3];
        let rho_im = [0.0, 0.05, -0.05, 0.0];
        let mut inst = ptr::null_mut();
        assert_eq!(
            qrd_instance_new(
                2,
                rho_re.as_ptr(),
                rho_im.as_ptr(),
                0,
                ptr::null(),
                ptr::null(),
                0.2,
                &mut inst
            ),
            QrdStatus::Ok
        );
        let mut res = ptr::null_mut();
        assert_eq!(
            qrd_solve(inst, ptr::null(), QrdPath::Dense, &mut res),
            QrdStatus::Ok
        );
        assert!(qrd_result_rate(res) > 0.0);
        qrd_result_free(res);
        qrd_instance_free(inst);

        // Diagonal source with a Hamming-type diagonal distortion.
        let p = [0.5, 0.0, 0.0, 0.5];
        let mut delta = [0.0; 16];
        for (k, &v) in [0.0, 1.0, 1.0, 0.0].iter().enumerate() {
            delta[k * 4 + k] = v;
        }
        assert_eq!(
            qrd_instance_new(
                2,
                p.as_ptr(),
                ptr::null(),
                2,
                delta.as_ptr(),
                ptr::null(),
                0.11,
                &mut inst
            ),
            QrdStatus::Ok
        );
        qrd_instance_free(inst);

        let not_hermitian = [0.5, 0.3, 0.0, 0.5];
        assert_eq!(
            qrd_instance_new(
                2,
                not_hermitian.as_ptr(),
                ptr::null(),
                0,
                ptr::null(),
                ptr::null(),
                0.2,
                &mut inst
            ),
            QrdStatus::NotHermitian
        );
        assert!(last_error().contains("Hermitian"));
        let bad_trace = [0.5, 0.0, 0.0, 0.6];
        assert_eq!(
            qrd_instance_new(
                2,
                bad_trace.as_ptr(),
                ptr::null(),
                0,
                ptr::null(),
                ptr::null(),
                0.2,
                &mut inst
            ),
            QrdStatus::NotDensity
        );
        assert_eq!(
            qrd_instance_new_uniform(0, 0.2, &mut inst),
            QrdStatus::InvalidArgument
        );
        assert_eq!(
            qrd_instance_new_uniform(2, 0.2, ptr::null_mut()),
            QrdStatus::NullPointer
        );
        assert_eq!(
            qrd_solve(ptr::null(), ptr::null(), QrdPath::Dense, &mut res),
            QrdStatus::NullPointer
        );
        assert!(qrd_result_rate(ptr::null()).is_nan());
        qrd_instance_free(ptr::null_mut());
        qrd_result_free(ptr::null_mut());

        assert_eq!(qrd_instance_new_uniform(2, 0.3, &mut inst), QrdStatus::Ok);
        let mut cfg = qrd_config_default();
        cfg.tol = -1.0;
        assert_eq!(
            qrd_solve(inst, &cfg, QrdPath::Dense, &mut res),
            QrdStatus::InvalidArgument
        );
        qrd_instance_free(inst);
    }
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(qrd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qrd.h")).unwrap();
    for symbol in [
        "qrd_instance_new_uniform",
        "qrd_instance_new",
        "qrd_solve",
        "qrd_result_rate",
        "qrd_result_free",
        "qrd_last_error_message",
        "QRD_STATUS_NOT_DENSITY",
        "typedef struct QrdInstance QrdInstance",
    ] {
        assert!(header.contains(symbol), "{symbol}");
    }
}
