//! Temporary protocol explorer. Deleted before release.

use grav2d::{
    assemble_sensitivity, chi_squared, forward_map, invert, noise_sigmas, rectangular_body_model,
    relative_error, support_count, Bounds, InversionConfig, ParamMethod, StabilizerKind,
    StationSet, SurveyGrid,
};

const SEEDS: [u64; 10] = [11, 22, 33, 44, 55, 66, 77, 88, 99, 110];

#[test]
#[ignore]
fn body_sweep() {
    let grid = SurveyGrid::new(50, 10, 10.0, 0.0, 0.0).unwrap();
    let stations = StationSet::at_cell_centers(&grid, 0.0).unwrap();
    let g = assemble_sensitivity(&grid, &stations).unwrap();

    for (bx0, bx1, bz0, bz1) in [
        (220.0, 270.0, 10.0, 30.0),
        (230.0, 260.0, 20.0, 50.0),
        (150.0, 350.0, 20.0, 40.0),
        (200.0, 300.0, 20.0, 50.0),
        (200.0, 280.0, 20.0, 40.0),
    ] {
        let m_true = rectangular_body_model(&grid, bx0, bx1, bz0, bz1, 1.0).unwrap();
        let n_body = m_true.iter().filter(|&&v| v > 0.0).count();
        let d_exact = forward_map(&g, &m_true).unwrap();
        println!(
            "== body x[{bx0},{bx1}] z[{bz0},{bz1}] cells {n_body} peak {:.3}",
            d_exact.values().max()
        );
        let sigmas = noise_sigmas(&d_exact, 0.03, 0.001).unwrap();

        let mut both_pass = 0;
        let mut gcv_alpha_gt_lcurve = 0;
        let mut ms_support_lt_smooth = 0;
        for &seed in &SEEDS {
            let d_obs = grav2d::add_noise(&d_exact, sigmas.as_vector(), seed).unwrap();
            let chi2 = chi_squared(d_obs.values(), d_exact.values(), sigmas.as_vector()).unwrap();

            let run = |method: ParamMethod, stab: StabilizerKind| {
                let mut config = InversionConfig::new(Bounds::new(0.0, 1.0).unwrap());
                config.param_method = method;
                config.stabilizer = stab;
                invert(&g, &d_obs, sigmas.as_vector(), &config).unwrap()
            };
            let lc = run(ParamMethod::LCurve, StabilizerKind::MinimumSupport);
            let gc = run(ParamMethod::Gcv, StabilizerKind::MinimumSupport);
            let sm = run(ParamMethod::LCurve, StabilizerKind::Smoothness);

            let report = |tag: &str, r: &grav2d::InversionResult<f64>, band: (f64, f64)| {
                let rel = relative_error(&m_true, &r.model).unwrap();
                let fid = r.records.last().unwrap().fidelity;
                let ok = rel <= 0.55
                    && (10.0..=75.0).contains(&fid)
                    && fid <= 1.2 * chi2
                    && r.final_alpha >= band.0
                    && r.final_alpha <= band.1;
                println!(
                    "  seed {seed:3} {tag}: K {:2} aK {:8.3} rel {:.3} fid {:8.2} chi2 {:5.1} \
                     supp {:3} {}",
                    r.records.len(),
                    r.final_alpha,
                    rel,
                    fid,
                    chi2,
                    support_count(&r.model),
                    if ok { "PASS" } else { "fail" }
                );
                ok
            };
            let lc_ok = report("lc", &lc, (0.062, 6.2));
            let gc_ok = report("gc", &gc, (0.741, 74.1));
            if lc_ok && gc_ok {
                both_pass += 1;
            }
            if gc.final_alpha > lc.final_alpha {
                gcv_alpha_gt_lcurve += 1;
            }
            if support_count(&lc.model) < support_count(&sm.model) {
                ms_support_lt_smooth += 1;
            }
        }
        println!(
            "  => both-methods pass {both_pass}/10; gcv alpha > lcurve {gcv_alpha_gt_lcurve}/10; \
             MS support < smooth {ms_support_lt_smooth}/10"
        );
    }
}
