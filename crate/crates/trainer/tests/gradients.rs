//! Analytic gradients against central finite differences, in double
//! precision.

use lexphase_core::rng::stream_rng;
use lexphase_trainer::{Model, ModelConfig, Workspace};
use rand::Rng;

const EPS: f64 = 1e-4;
/// Gradients smaller than this are compared in absolute terms.
const DENOM_FLOOR: f64 = 1e-6;

fn loss(model: &Model<f64>, ws: &mut Workspace<f64>, x: &[u32], y: &[u32]) -> f64 {
    model.forward(ws, x, Some(y)).unwrap()
}

#[test]
fn desk_model_matches_finite_differences() {
    let start = std::time::Instant::now();
    let cfg = ModelConfig::desk(65);
    let mut model: Model<f64> = Model::<f32>::new(&cfg, 11).unwrap().cast();
    let (b, t) = (2, 16);
    let mut rng = stream_rng(1, "test/gradcheck", 0);
    let x: Vec<u32> = (0..b * t).map(|_| rng.random_range(0..65)).collect();
    let y: Vec<u32> = (0..b * t).map(|_| rng.random_range(0..65)).collect();
    let mut ws = Workspace::new(&cfg, b, t);
    loss(&model, &mut ws, &x, &y);
    let mut grads = vec![0.0; model.n_params()];
    model.backward(&ws, &mut grads);

    // Positions >= t never see gradient, so sample wpe rows the batch uses.
    let wpe = model.layout().range(lexphase_trainer::Tensor::Wpe);
    let mut worst = (0.0f64, 0usize);
    let mut checked = 0;
    while checked < 200 {
        let i = rng.random_range(0..model.n_params());
        if wpe.contains(&i) && (i - wpe.start) / cfg.embed_dim >= t {
            continue;
        }
        let orig = model.params[i];
        model.params[i] = orig + EPS;
        let up = loss(&model, &mut ws, &x, &y);
        model.params[i] = orig - EPS;
        let down = loss(&model, &mut ws, &x, &y);
        model.params[i] = orig;
        let numeric = (up - down) / (2.0 * EPS);
        let err = (grads[i] - numeric).abs() / grads[i].abs().max(numeric.abs()).max(DENOM_FLOOR);
        if err > worst.0 {
            worst = (err, i);
        }
        checked += 1;
    }
    let tensor = model.layout().locate(worst.1);
    assert!(
        worst.0 < 1e-3,
        "max relative error {} at {} ({})",
        worst.0,
        worst.1,
        tensor.name()
    );
    assert!(start.elapsed().as_secs() < 60);
}
