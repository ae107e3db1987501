from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger as _logger
from pydantic import ValidationError
from scipy.optimize import linear_sum_assignment

from sojunction.config import (
    COMMANDS,
    CompareConfig,
    EvolveConfig,
    PhaseDiagramConfig,
    SpectrumConfig,
    SteadyStateConfig,
    SweepZbarConfig,
    ThresholdConfig,
    load_config,
)
from sojunction.junction._fockspace import enumerate_basis
from sojunction.junction._observables import series
from sojunction.junction.meanfield import evolve_meanfield
from sojunction.junction.model import build_many_body
from sojunction.junction.qcc import (
    breakdown_detector,
    run_comparison,
    synchronization_metrics,
)
from sojunction.junction.qdyn import (
    coherent_state,
    evolve_quantum,
    evolve_with_fallback,
    observable_series,
    steady_state_projection,
    time_averaged_z,
)
from sojunction.junction.spectra import (
    breaking_threshold,
    eigendecompose,
    single_particle_phase_diagram,
)
from sojunction.utils.error import (
    CapacityError,
    ConfigError,
    JunctionError,
    PropertyViolation,
    ThresholdBracketError,
    UnsupportedModes,
)
from sojunction.utils.output import (
    meanfield_frame,
    records_frame,
    write_csv,
    write_json,
)

logger = _logger.bind(name=__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CONFIG_ERRORS = (
    CapacityError,
    ConfigError,
    PropertyViolation,
    UnsupportedModes,
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=Path,
        default=None,
        help="TOML experiment file.",
    )
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config entry, e.g. --set model.g=5 (repeatable).",
    )
    common.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="Worker processes for grid sweeps (-1 for all cores).",
    )
    common.add_argument(
        "--out",
        type=Path,
        default=Path("."),
        help="Directory for the output files.",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument(
        "-v", "--verbose", action="store_true", help="Log debug messages."
    )
    verbosity.add_argument(
        "-q", "--quiet", action="store_true", help="Log warnings only."
    )

    parser = argparse.ArgumentParser(
        prog="so-junction",
        description=(
            "Quantum and mean-field dynamics of a lossy spin-orbit-coupled "
            "bosonic junction."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "Complex spectrum of the lossy and PT-shifted model.",
        "threshold": "PT-breaking threshold over gamma, g and N grids.",
        "phase-diagram": "Single-particle max Im(eps) over gamma and beta.",
        "evolve": "Quantum and/or mean-field trajectories.",
        "compare": "Quantum vs mean-field comparison with a JSON report.",
        "sweep-zbar": "Time-averaged imbalance over g and N grids.",
        "steady-state": "Full and steady-state-projected observables.",
    }
    for name in COMMANDS:
        sub = commands.add_parser(name, parents=[common], help=helps[name])
        if name == "evolve":
            sub.add_argument(
                "--side",
                choices=["quantum", "meanfield", "both"],
                default=None,
                help="Which dynamics to run (overrides the config).",
            )
    return parser


def configure_logging(verbose: bool, quiet: bool) -> None:
    level = "DEBUG" if verbose else "WARNING" if quiet else "INFO"
    _logger.remove()
    _logger.add(sys.stderr, level=level)


def cmd_spectrum(config: SpectrumConfig, out: Path, jobs: int) -> int:
    params = config.model
    basis = enumerate_basis(
        params.n_particles, params.n_modes, max_dimension=config.max_dimension
    )
    lossy = build_many_body(params, basis)
    shifted = build_many_body(params, basis, pt_shift=True)
    spectrum = eigendecompose(
        lossy, degeneracy_rel_tol=config.degeneracy_rel_tol
    )
    pt_values = eigendecompose(
        shifted, degeneracy_rel_tol=config.degeneracy_rel_tol
    ).eigenvalues

    # match each shifted eigenvalue to its lossy partner row by row
    expected = spectrum.eigenvalues + 0.5j * params.loss * params.n_particles
    cost = np.abs(expected[:, None] - pt_values[None, :])
    _, columns = linear_sum_assignment(cost)
    pt_values = pt_values[columns]

    group = np.empty(len(spectrum), dtype=int)
    for label, members in enumerate(spectrum.degeneracy_groups):
        group[list(members)] = label
    frame = pd.DataFrame(
        {
            "index": np.arange(len(spectrum)),
            "re_E": spectrum.eigenvalues.real,
            "im_E": spectrum.eigenvalues.imag,
            "re_Ept": pt_values.real,
            "im_Ept": pt_values.imag,
            "group": group,
        }
    )
    write_csv(frame, out / "spectrum.csv", config)
    if config.dump_matrix:
        path = lossy.dump(out / "hamiltonian.coo")
        logger.info(f"wrote {path}")
    return EXIT_OK


def _threshold_point(
    config: ThresholdConfig, gamma: float, g: float, n: int
) -> dict:
    params = config.model.replace(soc=gamma, interaction=g, n_particles=n)
    basis = enumerate_basis(
        n, params.n_modes, max_dimension=config.max_dimension
    )
    row = {"gamma": gamma, "g": g, "N": n}
    try:
        result = breaking_threshold(
            params, basis, config.beta_max, config.tol, config.imag_tol
        )
    except ThresholdBracketError as exc:
        logger.warning(str(exc))
        return row | {
            "beta_c": np.nan,
            "broken_at_min": False,
            "lo": config.beta_max,
            "hi": np.nan,
            "bracketed": False,
        }
    return row | {
        "beta_c": result.beta_c,
        "broken_at_min": result.broken_at_min,
        "lo": result.bracket[0],
        "hi": result.bracket[1],
        "bracketed": True,
    }


def cmd_threshold(config: ThresholdConfig, out: Path, jobs: int) -> int:
    grid = config.grid()
    logger.info(f"threshold sweep over {len(grid)} points")
    rows = Parallel(n_jobs=jobs)(
        delayed(_threshold_point)(config, *point) for point in grid
    )
    frame = pd.DataFrame(rows)
    write_csv(frame, out / "threshold.csv", config)
    missed = int((~frame["bracketed"]).sum())
    if missed:
        logger.error(
            f"{missed} of {len(frame)} points have beta_c > "
            f"beta_max={config.beta_max:g}"
        )
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_phase_diagram(config: PhaseDiagramConfig, out: Path, jobs: int) -> int:
    gammas = config.gammas.values()
    betas = config.betas.values()
    rows = Parallel(n_jobs=jobs)(
        delayed(single_particle_phase_diagram)(
            [gamma], betas, config.model.raman, config.model.hopping
        )
        for gamma in gammas
    )
    diagram = np.vstack(rows)
    frame = pd.DataFrame(
        {
            "gamma": np.repeat(gammas, betas.size),
            "beta": np.tile(betas, gammas.size),
            "max_im_eps": diagram.reshape(-1),
        }
    )
    write_csv(frame, out / "phase_diagram.csv", config)
    return EXIT_OK


def cmd_evolve(config: EvolveConfig, out: Path, jobs: int) -> int:
    params = config.model
    times = config.time.values()
    x0 = config.initial.amplitudes()
    if config.side in ("quantum", "both"):
        basis = enumerate_basis(
            params.n_particles,
            params.n_modes,
            max_dimension=config.max_dimension,
        )
        hamiltonian = build_many_body(params, basis)
        states = evolve_with_fallback(
            hamiltonian, coherent_state(x0, basis), times, config.method
        )
        frame = records_frame(
            observable_series(states, basis), params.n_particles
        )
        write_csv(frame, out / "quantum_trajectory.csv", config)
    if config.side in ("meanfield", "both"):
        trajectory = evolve_meanfield(x0, params, times, config.form)
        write_csv(
            meanfield_frame(trajectory),
            out / "meanfield_trajectory.csv",
            config,
        )
    return EXIT_OK


def cmd_compare(config: CompareConfig, out: Path, jobs: int) -> int:
    run = run_comparison(
        config.model,
        config.initial.amplitudes(),
        config.time.values(),
        method=config.method,
        form=config.form,
        max_dimension=config.max_dimension,
    )
    frame = pd.DataFrame(
        {
            "t": run.times,
            "z_q": series(run.quantum, "z"),
            "z_mf": series(run.meanfield, "z"),
            "i_q": series(run.quantum, "i_spin"),
            "i_mf": series(run.meanfield, "i_spin"),
            "iu_q": series(run.quantum, "i_up"),
            "id_q": series(run.quantum, "i_down"),
            "iu_mf": series(run.meanfield, "i_up"),
            "id_mf": series(run.meanfield, "i_down"),
            "eps_n": run.deviations.eps_n,
        }
    )
    write_csv(frame, out / "comparison.csv", config)

    breakdown = breakdown_detector(
        run,
        config.window,
        oscillating_variance=config.oscillating_variance,
        settled_variance=config.settled_variance,
    )
    sync = {
        side: asdict(
            synchronization_metrics(
                records,
                config.window,
                ratio_band=config.ratio_band,
                min_overlap=config.min_overlap,
            )
        )
        for side, records in (
            ("quantum", run.quantum),
            ("meanfield", run.meanfield),
        )
    }
    report = {
        "max_eps_n": float(run.deviations.eps_n.max()),
        "max_z_deviation": float(run.deviations.z.max()),
        "max_i_deviation": float(run.deviations.i_spin.max()),
        "breakdown": asdict(breakdown),
        "synchronization": sync,
    }
    write_json(report, out / "comparison.json", config)
    return EXIT_OK


def _zbar_point(config: SweepZbarConfig, g: float, n: int) -> dict:
    params = config.model.replace(interaction=g, n_particles=n)
    basis = enumerate_basis(
        n, params.n_modes, max_dimension=config.max_dimension
    )
    hamiltonian = build_many_body(params, basis)
    psi0 = coherent_state(config.initial.amplitudes(), basis)
    average = time_averaged_z(
        hamiltonian,
        psi0,
        config.horizon,
        config.burn_in,
        samples=config.samples,
        method=config.method,
    )
    return {
        "g": g,
        "N": n,
        "zbar": average.zbar,
        "zbar_half": average.half_window,
        "converged": average.converged,
    }


def cmd_sweep_zbar(config: SweepZbarConfig, out: Path, jobs: int) -> int:
    grid = [
        (g, n) for g in config.interactions for n in config.particle_numbers
    ]
    logger.info(f"time-average sweep over {len(grid)} points")
    rows = Parallel(n_jobs=jobs)(
        delayed(_zbar_point)(config, g, n) for g, n in grid
    )
    write_csv(pd.DataFrame(rows), out / "zbar.csv", config)
    return EXIT_OK


def cmd_steady_state(config: SteadyStateConfig, out: Path, jobs: int) -> int:
    params = config.model
    basis = enumerate_basis(
        params.n_particles, params.n_modes, max_dimension=config.max_dimension
    )
    hamiltonian = build_many_body(params, basis)
    spectrum = eigendecompose(
        hamiltonian, degeneracy_rel_tol=config.degeneracy_rel_tol
    )
    psi0 = coherent_state(config.initial.amplitudes(), basis)
    times = config.time.values()

    records = observable_series(
        evolve_quantum(hamiltonian, psi0, times, spectrum=spectrum), basis
    )
    projection = steady_state_projection(
        spectrum,
        psi0,
        times,
        basis,
        hamiltonian=hamiltonian,
        imag_tol=config.imag_tol,
    )
    frame = pd.DataFrame(
        {
            "t": times,
            "z": series(records, "z"),
            "z_s": projection.z_s,
            "i_spin": series(records, "i_spin"),
            "i_s": projection.i_s,
        }
    )
    write_csv(frame, out / "steady_state.csv", config)
    members = projection.member_indices
    write_json(
        {
            "members": members,
            "re_E": spectrum.eigenvalues[members].real,
            "im_E": spectrum.eigenvalues[members].imag,
            "degeneracy_tol": spectrum.degeneracy_tol,
        },
        out / "steady_state.json",
        config,
    )
    return EXIT_OK


HANDLERS: dict[str, Callable[..., int]] = {
    "spectrum": cmd_spectrum,
    "threshold": cmd_threshold,
    "phase-diagram": cmd_phase_diagram,
    "evolve": cmd_evolve,
    "compare": cmd_compare,
    "sweep-zbar": cmd_sweep_zbar,
    "steady-state": cmd_steady_state,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    overrides = list(args.overrides)
    if getattr(args, "side", None):
        overrides.append(f'side="{args.side}"')
    try:
        config = load_config(args.command, args.config, overrides)
    except (ValidationError, ConfigError) as exc:
        logger.error(f"invalid configuration: {exc}")
        return EXIT_CONFIG

    logger.info(f"{args.command}: {config.model!r}")
    try:
        return HANDLERS[args.command](config, args.out, args.jobs)
    except (ValidationError, *CONFIG_ERRORS) as exc:
        logger.error(str(exc))
        return EXIT_CONFIG
    except JunctionError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
