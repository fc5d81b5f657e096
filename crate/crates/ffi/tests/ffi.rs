use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use featurelab_ffi::*;

fn parse(text: &str) -> *mut FlModel {
    let c = CString::new(text).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fl_model_parse(c.as_ptr(), ptr::null(), &mut m) }, FlStatus::Ok);
    m
}

fn last_error() -> String {
    let p = fl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn stable_beta_predictive_through_the_abi() {
    let m = parse("stable-beta:alpha=2,c=1,sigma=0.5");
    let counts = [3usize];
    let (mut rate, mut probs) = (0.0, [0.0; 1]);
    let st = unsafe { fl_predictive(m, 10, counts.as_ptr(), 1, f64::NAN, &mut rate, probs.as_mut_ptr()) };
    assert_eq!(st, FlStatus::Ok);
    assert!((probs[0] - 2.5 / 11.0).abs() < 1e-12);
    assert!(rate > 0.0);
    let mut kind = FlModelKind::Species;
    assert_eq!(unsafe { fl_model_kind(m, &mut kind) }, FlStatus::Ok);
    assert_eq!(kind, FlModelKind::Crm);
    unsafe { fl_model_free(m) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("stable-beta:alpha=-1,c=1,sigma=0.5").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fl_model_parse(bad.as_ptr(), ptr::null(), &mut m) }, FlStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { fl_model_parse(ptr::null(), ptr::null(), &mut m) }, FlStatus::NullPointer);

    let species = parse("dirichlet:theta=1");
    let mut post = ptr::null_mut();
    let st = unsafe { fl_psi_posterior(species, 1, ptr::null(), 0, &mut post) };
    assert_eq!(st, FlStatus::WrongModelKind);

    let blocks = [2usize, 1];
    let (mut p_new, mut p_old) = (0.0, [0.0; 2]);
    let st = unsafe { fl_species_predictive(species, blocks.as_ptr(), 2, &mut p_new, p_old.as_mut_ptr()) };
    assert_eq!(st, FlStatus::Ok);
    assert!((p_new - 0.25).abs() < 1e-15);
    assert!((p_old[0] - 0.5).abs() < 1e-15);
    unsafe { fl_model_free(species) };
    // freeing null is a no-op
    unsafe { fl_model_free(ptr::null_mut()) };
}

#[test]
fn posterior_round_trip() {
    let m = parse("stable:C=1,sigma=0.5@exponential:rate=1");
    let counts = [3usize, 1];
    let mut post = ptr::null_mut();
    assert_eq!(unsafe { fl_psi_posterior(m, 5, counts.as_ptr(), 2, &mut post) }, FlStatus::Ok);
    let mut len = 0;
    assert_eq!(unsafe { fl_posterior_len(post, &mut len) }, FlStatus::Ok);
    let (mut a, mut cdf) = (vec![0.0; len], vec![0.0; len]);
    let st = unsafe { fl_posterior_values(post, len, a.as_mut_ptr(), ptr::null_mut(), cdf.as_mut_ptr()) };
    assert_eq!(st, FlStatus::Ok);
    assert!(a.windows(2).all(|w| w[0] < w[1]));
    assert!((cdf[len - 1] - 1.0).abs() < 1e-12);
    let st = unsafe { fl_posterior_values(post, len - 1, a.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, FlStatus::BufferTooSmall);

    let mut rng = ptr::null_mut();
    assert_eq!(unsafe { fl_rng_new(3, &mut rng) }, FlStatus::Ok);
    let mut draw = 0.0;
    assert_eq!(unsafe { fl_posterior_sample(post, rng, &mut draw) }, FlStatus::Ok);
    assert!(draw > a[0] && draw < a[len - 1]);

    let mut pmf = [0.0; 6];
    let (mut tail, mut means) = (0.0, [0.0; 2]);
    let st = unsafe { fl_marginal_predictive(m, 5, counts.as_ptr(), 2, 5, pmf.as_mut_ptr(), &mut tail, means.as_mut_ptr()) };
    assert_eq!(st, FlStatus::Ok);
    assert!((pmf.iter().sum::<f64>() + tail - 1.0).abs() < 1e-9);
    unsafe {
        fl_rng_free(rng);
        fl_posterior_free(post);
        fl_model_free(m);
    }
}

fn sample_jsonl(model: &str, seed: u64, n: usize) -> String {
    let m = parse(model);
    let mut rng = ptr::null_mut();
    let mut z = ptr::null_mut();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(fl_rng_new(seed, &mut rng), FlStatus::Ok);
        assert_eq!(fl_sample(m, rng, n, &mut z), FlStatus::Ok);
        assert_eq!(fl_allocation_to_jsonl(z, &mut s), FlStatus::Ok);
        let out = CStr::from_ptr(s).to_string_lossy().into_owned();
        fl_string_free(s);
        fl_allocation_free(z);
        fl_rng_free(rng);
        fl_model_free(m);
        out
    }
}

#[test]
fn sampling_is_seeded_and_log_prob_is_finite() {
    let a = sample_jsonl("stable-beta:alpha=2,c=1,sigma=0.5", 11, 8);
    assert_eq!(a, sample_jsonl("stable-beta:alpha=2,c=1,sigma=0.5", 11, 8));
    assert_eq!(a.lines().count(), 8);

    let m = parse("stable-beta:alpha=2,c=1,sigma=0.5");
    let text = CString::new(a).unwrap();
    let mut z = ptr::null_mut();
    let mut lp = 0.0;
    let (mut n, mut k) = (0, 0);
    unsafe {
        assert_eq!(fl_allocation_parse(text.as_ptr(), &mut z), FlStatus::Ok);
        assert_eq!(fl_allocation_log_prob(m, z, &mut lp), FlStatus::Ok);
        assert_eq!(fl_allocation_shape(z, &mut n, &mut k), FlStatus::Ok);
        let mut counts = vec![0usize; k];
        assert_eq!(fl_allocation_counts(z, counts.as_mut_ptr(), k), FlStatus::Ok);
        assert!(counts.iter().all(|&c| c >= 1 && c <= n));
        fl_allocation_free(z);
        fl_model_free(m);
    }
    assert_eq!(n, 8);
    assert!(lp.is_finite() && lp < 0.0);

    let species = sample_jsonl("pitman-yor:sigma=0.5,theta=1", 2, 6);
    assert!(species.lines().all(|l| l.matches(',').count() == 0 && l != "[]"));
    let sp = parse("pitman-yor:sigma=0.5,theta=1");
    let labels = [0usize, 0, 1];
    let mut eppf = 0.0;
    assert_eq!(unsafe { fl_eppf_log_prob(sp, labels.as_ptr(), 3, &mut eppf) }, FlStatus::Ok);
    // (1-σ)·θ·(θ+σ) / ((θ+1)(θ+2)) at σ = 1/2, θ = 1
    assert!((eppf - (0.5f64 * 1.5 / 6.0).ln()).abs() < 1e-14);
    unsafe { fl_model_free(sp) };
}

#[test]
fn header_is_valid_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/featurelab.h");
    assert!(header.is_file(), "header missing");
    let Ok(cc) = which_cc() else { return };
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"featurelab.h\"\n\
         int main(void) {\n\
           FlModel *m = 0;\n\
           FlStatus st = fl_model_parse(\"dirichlet:theta=1\", 0, &m);\n\
           if (st != FL_STATUS_OK) return 1;\n\
           fl_model_free(m);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
