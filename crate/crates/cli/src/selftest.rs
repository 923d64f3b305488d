use qst_core::cnn::{backward, forward, loss_mse, CnnParams, GridEncoding, Mode, Tensor};
use qst_core::rng::{tag, SeededRng};
use qst_core::state::{bell_phi_plus, random_state};
use qst_core::stokes::stokes_reconstruct;
use qst_core::tau::{
    density_from_tau, pack_tau16, tau_from_density, tau_from_minors, unpack_tau16,
};
use qst_core::tomography::{measure, projector_grid};
use qst_core::{fidelity, DensityMatrix, Error, StateKind, Tau16};

struct Check {
    name: &'static str,
    worst: f64,
    limit: f64,
}

fn states(seed: u64, stream: &str, n: usize) -> Vec<DensityMatrix> {
    let mut rng = SeededRng::derived(seed, tag(stream), 0, 0);
    (0..n)
        .map(|_| random_state(&mut rng, StateKind::Mixed))
        .collect()
}

fn stokes_inversion(seed: u64) -> Result<f64, Error> {
    let grid = projector_grid();
    let mut worst: f64 = 0.0;
    for rho in states(seed, "selftest-stokes", 200) {
        let rec = stokes_reconstruct(&measure(&rho, &grid)?);
        worst = worst.max(rec.max_abs_diff(rho.matrix()));
    }
    Ok(worst)
}

fn tau_round_trip(seed: u64) -> Result<f64, Error> {
    let mut worst: f64 = 0.0;
    for rho in states(seed, "selftest-tau", 200) {
        let tau = tau_from_density(&rho)?;
        let back = density_from_tau(&tau)?;
        worst = worst.max(1.0 - fidelity(&back, &rho)?);
        worst = worst.max(tau_from_minors(&rho)?.matrix().max_abs_diff(tau.matrix()));
    }
    Ok(worst)
}

fn physicality(seed: u64) -> Result<f64, Error> {
    let mut rng = SeededRng::derived(seed, tag("selftest-physical"), 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let mut v = [0.0; 16];
        v.iter_mut().for_each(|x| *x = rng.standard_normal());
        let rho = density_from_tau(&unpack_tau16(&Tau16(v)))?;
        let m = rho.matrix();
        let neg = -rho.min_eigenvalue()?;
        worst = worst
            .max(m.hermitian_defect())
            .max((m.trace().re - 1.0).abs())
            .max(neg);
    }
    Ok(worst)
}

fn fidelity_identities(seed: u64) -> Result<f64, Error> {
    let a = states(seed, "selftest-fid-a", 200);
    let b = states(seed, "selftest-fid-b", 200);
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(&b) {
        worst = worst
            .max((fidelity(x, x)? - 1.0).abs())
            .max((fidelity(x, y)? - fidelity(y, x)?).abs());
    }
    Ok(worst)
}

fn measurement_sanity() -> Result<f64, Error> {
    let grid = projector_grid();
    let mixed = measure(&DensityMatrix::maximally_mixed(), &grid)?;
    let mut worst = mixed
        .values()
        .iter()
        .map(|v| (v - 0.25).abs())
        .fold(0.0, f64::max);
    let bell = measure(&DensityMatrix::from_pure(&bell_phi_plus()), &grid)?;
    worst = worst
        .max((bell.get(0, 0) - 0.5).abs())
        .max(bell.get(0, 1).abs());
    Ok(worst)
}

fn gradient_check(seed: u64) -> Result<f64, Error> {
    let mut params = CnnParams::initialize(GridEncoding::ZeroPadded, seed);
    let rho = &states(seed, "selftest-grad", 1)[0];
    let grid = measure(rho, &projector_grid())?;
    let target = pack_tau16(&tau_from_density(rho)?);
    let (_, acts) = forward(&params, &grid, Mode::Eval)?;
    let grads = backward(&params, &acts, &target)?;
    let loss = |p: &CnnParams| -> Result<f64, Error> {
        Ok(loss_mse(&forward(p, &grid, Mode::Eval)?.0, &target))
    };
    let mut rng = SeededRng::derived(seed, tag("selftest-coords"), 0, 0);
    let mut worst: f64 = 0.0;
    for t in Tensor::ALL {
        let range = params.layout().range(t);
        for _ in 0..4 {
            let i = range.start + rng.below(range.len());
            let h = 1e-6;
            let w = params.values()[i];
            params.values_mut()[i] = w + h;
            let up = loss(&params)?;
            params.values_mut()[i] = w - h;
            let down = loss(&params)?;
            params.values_mut()[i] = w;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.values()[i];
            let scale = numeric.abs().max(analytic.abs()).max(1e-8);
            worst = worst.max((numeric - analytic).abs() / scale);
        }
    }
    Ok(worst)
}

pub fn run(seed: u64) -> Result<(), Error> {
    let checks = [
        (
            "stokes inversion, max |rho' - rho|",
            stokes_inversion(seed)?,
            1e-10,
        ),
        (
            "tau round trip, 1 - F and minor agreement",
            tau_round_trip(seed)?,
            1e-8,
        ),
        ("physical output of random tau", physicality(seed)?, 1e-10),
        (
            "fidelity self and symmetry",
            fidelity_identities(seed)?,
            1e-9,
        ),
        (
            "measurement of I/4 and Bell state",
            measurement_sanity()?,
            1e-12,
        ),
        (
            "network gradient, relative error",
            gradient_check(seed)?,
            1e-4,
        ),
    ]
    .map(|(name, worst, limit)| Check { name, worst, limit });
    let mut failed = 0;
    for c in &checks {
        let ok = c.worst < c.limit;
        failed += usize::from(!ok);
        println!(
            "{} {:<45} worst {:.3e} (limit {:.0e})",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.limit
        );
    }
    if failed > 0 {
        return Err(Error::Consistency(format!(
            "{failed} self-test check(s) failed"
        )));
    }
    Ok(())
}
