// Temporary profiling harness; run with --ignored.
mod common;

use std::time::Instant;

#[test]
#[ignore]
fn profile_smo_on_mutag() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default()).try_init();
    let ds = mpgk::io::load_tu_dataset(std::path::Path::new("../../data/MUTAG"), "MUTAG").unwrap();
    let labels = ds.class_labels().unwrap().to_vec();
    let params = mpgk::KernelParams {
        base_kernel: "delta".into(),
        variant: "RR".into(),
        iterations: 4,
        ..Default::default()
    };
    let grams = mpgk::compute_grams(&ds, &params).unwrap();
    let train: Vec<usize> = (0..170).collect();
    for (t, gram) in grams.iter().enumerate() {
        let mut k = ndarray::Array2::zeros((170, 170));
        for (a, &i) in train.iter().enumerate() {
            for (b, &j) in train.iter().enumerate() {
                k[[a, b]] = gram.value(i, j);
            }
        }
        let y: Vec<f64> = train.iter().map(|&i| if labels[i] == 1 { 1.0 } else { -1.0 }).collect();
        let diag_mean: f64 = (0..170).map(|i| k[[i, i]]).sum::<f64>() / 170.0;
        let mut warm: Option<mpgk::SvmModel> = None;
        for c in [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3] {
            let start = Instant::now();
            let model = mpgk::svm::svm_train_warm(&k.view(), &y, c, warm.as_ref()).unwrap();
            println!(
                "t={} c={:.0e} diag_mean={:.3e} svs={} time={:.1}ms",
                t + 1,
                c,
                diag_mean,
                model.support_indices.len(),
                start.elapsed().as_secs_f64() * 1e3
            );
            warm = Some(model);
        }
    }
}
