use mefm_core::fit::{detrend, fit_mefm};
use mefm_core::rank::{select_ranks, DEFAULT_XI_SCALE};

use crate::io::{csv_string, read_series, write_atomic};
use crate::{CliError, FitArgs};

pub fn run(args: &FitArgs) -> Result<(), CliError> {
    let ranks = match (args.kr, args.kc, args.auto_rank) {
        (Some(kr), Some(kc), false) => (Some(kr), Some(kc)),
        (None, None, true) => (None, None),
        _ => return Err(CliError::usage("pass both --kr and --kc, or --auto-rank")),
    };
    let series = read_series(&args.input)?;
    super::ensure_out_dir(&args.out)?;

    let ranks = match ranks {
        (Some(kr), Some(kc)) => (Some(kr), Some(kc)),
        _ => {
            let sel = select_ranks(&detrend(&series), DEFAULT_XI_SCALE)?;
            if sel.scale_warning {
                eprintln!(
                    "warning: median frame norm {:.3e} is far from the sqrt(pq) scale the \
                     rank perturbation is calibrated for; consider rescaling the data",
                    sel.median_frame_norm
                );
            }
            (Some(sel.k_row), Some(sel.k_col))
        }
    };
    let fit = fit_mefm(&series, ranks.0, ranks.1)?;
    if fit.degenerate {
        eprintln!("warning: centered series carries no factor signal; loadings are arbitrary");
    }

    let mu_rows = fit
        .effects
        .mu
        .iter()
        .enumerate()
        .map(|(t, v)| vec![(t + 1).to_string(), v.to_string()]);
    write_atomic(
        &args.out.join("mu.csv"),
        csv_string("t,mu", mu_rows).as_bytes(),
    )?;

    let alpha_rows = fit.effects.alpha.iter().enumerate().flat_map(|(t, a)| {
        a.iter()
            .enumerate()
            .map(move |(i, v)| vec![(t + 1).to_string(), (i + 1).to_string(), v.to_string()])
            .collect::<Vec<_>>()
    });
    write_atomic(
        &args.out.join("alpha.csv"),
        csv_string("t,i,value", alpha_rows).as_bytes(),
    )?;

    let beta_rows = fit.effects.beta.iter().enumerate().flat_map(|(t, b)| {
        b.iter()
            .enumerate()
            .map(move |(j, v)| vec![(t + 1).to_string(), (j + 1).to_string(), v.to_string()])
            .collect::<Vec<_>>()
    });
    write_atomic(
        &args.out.join("beta.csv"),
        csv_string("t,j,value", beta_rows).as_bytes(),
    )?;

    for (name, loadings) in [
        ("loadings_r.csv", &fit.q_row),
        ("loadings_c.csv", &fit.q_col),
    ] {
        let rows = (0..loadings.nrows()).flat_map(|i| {
            (0..loadings.ncols())
                .map(move |k| {
                    vec![
                        (i + 1).to_string(),
                        (k + 1).to_string(),
                        loadings[(i, k)].to_string(),
                    ]
                })
                .collect::<Vec<_>>()
        });
        write_atomic(
            &args.out.join(name),
            csv_string("index,factor,value", rows).as_bytes(),
        )?;
    }

    let eig_rows = fit
        .d_row
        .iter()
        .enumerate()
        .map(|(k, v)| vec!["row".into(), (k + 1).to_string(), v.to_string()])
        .chain(
            fit.d_col
                .iter()
                .enumerate()
                .map(|(k, v)| vec!["column".into(), (k + 1).to_string(), v.to_string()]),
        );
    write_atomic(
        &args.out.join("eigvals.csv"),
        csv_string("side,rank,value", eig_rows).as_bytes(),
    )?;

    let resid_rows = fit
        .residuals
        .iter()
        .enumerate()
        .map(|(t, e)| vec![(t + 1).to_string(), e.norm_squared().to_string()]);
    write_atomic(
        &args.out.join("residual_summary.csv"),
        csv_string("t,frobenius_sq", resid_rows).as_bytes(),
    )?;

    println!("fit: ranks (kr, kc) = ({}, {})", fit.k_row, fit.k_col);
    Ok(())
}
