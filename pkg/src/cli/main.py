"""
Command-line interface
Subcommands simulate, sweep, bifurcate, surface and validate
"""
import argparse
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from ..config.settings import (
    DEFAULT_OUTPUT_DIR,
    DEFAULT_PROBES,
    EXIT_OK,
    EXIT_VALIDATION_FAILURE,
    EXIT_BLOWUP,
    EXIT_CONFIG_ERROR,
    THRESHOLD_TOLERANCE,
    THRESHOLD_RATIO,
    THRESHOLD_BASELINE_FRACTION,
)
from ..chain.model import ChainConfig, PotentialKind, ProfileVariant, SchemeKind, sites_array
from ..chain.stepper import run
from ..chain.errors import BandGapError, ChainConfigError, SimulationError
from ..analysis import experiments
from ..analysis.validation import print_report, run_battery
from .config_file import CONFIG_KEYS, RunManifest, build_config, coerce_value, dump_config, read_config
from .writers import write_csv, write_sidecar, write_svg

logger = logging.getLogger(__name__)


class ConfigArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the config-error status"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG_ERROR, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------

def parse_grid(text: str) -> List[float]:
    """
    Parse a grid spec

    Args:
        text: 'start:stop:step' (stop included) or a comma list

    Returns:
        list of floats rounded to 12 decimals
    """
    text = text.strip()
    try:
        if ':' in text:
            start, stop, step = (float(v) for v in text.split(':'))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(np.floor((stop - start) / step + 0.5)) + 1
            return [round(start + i * step, 12) for i in range(count)]
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid spec {text!r}") from None


def parse_family(text: str) -> Tuple[str, List[float]]:
    """
    'KEY=v1,v2,...' -> (key, values)

    KEY is a chain flag name, m for real masses, mi for imaginary masses, or
    level for a gap edge at 1 + level / 40
    """
    key, sep, values = text.partition('=')
    key = key.strip().replace('-', '_')
    if not sep or key not in set(CONFIG_KEYS) | {'m', 'mi', 'level'}:
        raise argparse.ArgumentTypeError(f"invalid family spec {text!r}")
    return key, parse_grid(values)


def _chain_options(parser: argparse.ArgumentParser):
    """Flags mirroring the config keys; None means 'not given' so file values survive"""
    chain = parser.add_argument_group('chain')
    chain.add_argument('--config', type=Path, help='INI config file')
    chain.add_argument('--n', type=int, help='total sites N')
    chain.add_argument('--n0', type=int, help='physical sites N0')
    chain.add_argument('--coupling', type=float, help='coupling c')
    chain.add_argument('--beta', type=float, help='internal damping')
    chain.add_argument('--gamma', type=float, help='external damping')
    chain.add_argument('--mass-squared', type=float, help='m^2 (negative for imaginary mass)')
    chain.add_argument('--kappa', type=float, help='absorbing strength')
    chain.add_argument('--sigma', type=float, help='absorbing width')
    chain.add_argument('--profile', choices=[p.value for p in ProfileVariant])
    chain.add_argument('--dt', type=float, help='time step')
    chain.add_argument('--t-final', type=float, help='final time T')
    chain.add_argument('--ramp-time', type=float, help='amplitude ramp duration')
    chain.add_argument('--amplitude', type=float, help='driving amplitude A')
    chain.add_argument('--frequency', type=float, help='driving frequency Omega')
    chain.add_argument('--potential', choices=[p.value for p in PotentialKind])
    chain.add_argument('--scheme', choices=[s.value for s in SchemeKind])

    output = parser.add_argument_group('output')
    output.add_argument('--probes', type=parse_grid, help='probe sites, e.g. 20,40,60')
    output.add_argument('--workers', type=int, help='worker processes')
    output.add_argument('--seedless', action='store_true', help=argparse.SUPPRESS)
    output.add_argument('--out', type=Path, default=Path(DEFAULT_OUTPUT_DIR), help='output directory')
    output.add_argument('--svg', action='store_true', help='also write SVG line plots')
    output.add_argument('--dump-config', action='store_true', help='print the resolved config and exit')
    output.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])


def _search_options(parser: argparse.ArgumentParser):
    search = parser.add_argument_group('threshold search')
    search.add_argument('--a-lo', type=float, help='lower bracket (default 0.25 A_s)')
    search.add_argument('--a-hi', type=float, help='upper bracket (default 2 A_s)')
    search.add_argument('--tol', type=float, default=THRESHOLD_TOLERANCE)
    search.add_argument('--ratio', type=float, default=THRESHOLD_RATIO)
    search.add_argument('--baseline-fraction', type=float, default=THRESHOLD_BASELINE_FRACTION)


def build_parser() -> argparse.ArgumentParser:
    parser = ConfigArgumentParser(
        prog='supratransmission',
        description='Energy-consistent simulation of damped, boundary-driven nonlinear chains',
    )
    sub = parser.add_subparsers(dest='command', required=True, parser_class=ConfigArgumentParser)

    simulate = sub.add_parser('simulate', help='single run: probe trajectories and energy series')
    _chain_options(simulate)
    simulate.add_argument('--compare', choices=[s.value for s in SchemeKind],
                          help='second scheme; adds a per-step deviation column')

    sweep = sub.add_parser('sweep', help='final energy versus driving amplitude')
    _chain_options(sweep)
    sweep.add_argument('--amplitudes', type=parse_grid, required=True)
    sweep.add_argument('--family', type=parse_family, help='KEY=v1,v2,... one sweep per value')
    sweep.add_argument('--no-band-edge-extension', action='store_true')

    bifurcate = sub.add_parser('bifurcate', help='threshold amplitude versus frequency')
    _chain_options(bifurcate)
    _search_options(bifurcate)
    bifurcate.add_argument('--frequencies', type=parse_grid, required=True)
    bifurcate.add_argument('--family', type=parse_family, help='KEY=v1,v2,... one diagram per value')
    bifurcate.add_argument('--no-band-edge-extension', action='store_true')

    surface = sub.add_parser('surface', help='final energy over a frequency x amplitude grid')
    _chain_options(surface)
    surface.add_argument('--frequencies', type=parse_grid, required=True)
    surface.add_argument('--amplitudes', type=parse_grid, required=True)
    surface.add_argument('--no-band-edge-extension', action='store_true')

    validate = sub.add_parser('validate', help='run the validation battery')
    _chain_options(validate)
    validate.add_argument('--quick', action='store_true', help='identity and stability checks only')

    return parser


# ----------------------------------------------------------------------
# Resolution
# ----------------------------------------------------------------------

_FLAG_KEYS = ('n', 'n0', 'coupling', 'beta', 'gamma', 'mass_squared', 'kappa', 'sigma', 'profile',
              'dt', 't_final', 'ramp_time', 'amplitude', 'frequency', 'potential', 'scheme')


def resolve(args: argparse.Namespace, skip: Sequence[str] = ()) -> Tuple[ChainConfig, Dict[str, Any]]:
    """Defaults < config file < flags; returns the chain config and the [run] settings"""
    settings: Dict[str, Any] = read_config(args.config) if args.config else {}
    for key in _FLAG_KEYS:
        value = getattr(args, key)
        if value is not None and key not in skip:
            settings[key] = coerce_value(key, value)
    if args.probes is not None:
        settings['probes'] = coerce_value('probes', args.probes)
    if args.workers is not None:
        settings['workers'] = int(args.workers)

    cfg = build_config(settings)
    run_settings = {
        'probes': settings.get('probes', list(DEFAULT_PROBES)),
        'workers': settings.get('workers', 1),
    }
    if run_settings['workers'] < 1:
        raise ChainConfigError('workers', f"must be at least 1, got {run_settings['workers']}")
    return cfg, run_settings


class OutputSession:
    """Collects written files and emits the manifest sidecar"""

    def __init__(self, out_dir: Path, manifest: RunManifest, workers: int):
        self.out_dir = Path(out_dir)
        self.manifest = manifest
        self.workers = workers
        self.started = datetime.now().astimezone()
        self.files: List[str] = []

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = write_csv(frame, self.out_dir / name, self.manifest)
        self.files.append(name)
        return path

    def svg(self, name: str, *args, **kwargs) -> Path:
        path = write_svg(self.out_dir / name, *args, **kwargs)
        self.files.append(name)
        return path

    def close(self):
        record = self.manifest.sidecar(self.started, datetime.now().astimezone(), self.workers, self.files)
        write_sidecar(self.out_dir / 'manifest.json', record)
        for name in self.files:
            print(f"📄 {self.out_dir / name}")


def _family_members(cfg: ChainConfig, family) -> List[Tuple[str, ChainConfig]]:
    if family is None:
        return [("", cfg)]
    key, values = family
    if key in ('m', 'mi'):
        return experiments.mass_family(cfg, values, imaginary=(key == 'mi'))
    if key == 'level':
        return experiments.mass_level_family(cfg, values)
    members = []
    for value in values:
        members.append((f"{key}={value:g}", build_config({key: value}, base=cfg)))
    return members


def _suffix(label: str) -> str:
    return f"_{label.replace('=', '_')}" if label else ""


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    cfg, run_settings = resolve(args)
    probes = sites_array(run_settings['probes'], cfg)
    if probes.size == 0:
        raise ChainConfigError('probes', "at least one probe site is required")
    if args.dump_config:
        print(dump_config(cfg, run_settings))
        return EXIT_OK

    manifest = RunManifest.build('simulate', cfg, probes=probes.tolist(), compare=args.compare)
    session = OutputSession(args.out, manifest, 1)

    result = run(cfg, probes=probes)
    trajectory = result.trajectory_frame()
    if args.compare:
        other = run(cfg.with_updates(scheme=SchemeKind(args.compare)), probes=probes, record_energy=False)
        trajectory['deviation'] = np.max(np.abs(result.trajectory - other.trajectory), axis=1)
    session.csv('trajectory.csv', trajectory)

    energy = result.energy[
        ['t', 'E_total', 'E_physical', 'flux_in', 'E_injected', 'identity_residual']]
    session.csv('energy.csv', energy)

    if args.svg:
        session.svg('trajectory.svg', result.times,
                    {f"u_{p}": result.probe(int(p)) for p in probes}, 't', 'u', 'Probe trajectories')
        session.svg('energy.svg', energy['t'], {'E_physical': energy['E_physical'], 'E_total': energy['E_total']},
                    't', 'E', 'Energy')
    session.close()
    print(f"✅ E_physical(T) = {result.E_physical:.6g}, E_injected(T) = {result.E_injected:.6g}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg, run_settings = resolve(args)
    if args.dump_config:
        print(dump_config(cfg, run_settings))
        return EXIT_OK

    manifest = RunManifest.build('sweep', cfg, amplitudes=args.amplitudes, family=args.family,
                                 band_edge_extension=not args.no_band_edge_extension)
    session = OutputSession(args.out, manifest, run_settings['workers'])
    curves = {}
    for label, member in _family_members(cfg, args.family):
        result = experiments.amplitude_sweep(member, args.amplitudes, run_settings['workers'],
                                             extend_band_edge=not args.no_band_edge_extension)
        frame = result.to_frame()
        session.csv(f"sweep{_suffix(label)}.csv", frame)
        curves[label or 'E_physical'] = frame['E_physical']
        failed = int((frame['flag'] != "").sum())
        if failed:
            print(f"⚠️ {failed} failed cells{' for ' + label if label else ''}")
    if args.svg:
        session.svg('sweep.svg', args.amplitudes, curves, 'A', 'E_physical(T)', 'Energy vs amplitude', logy=True)
    session.close()
    return EXIT_OK


def cmd_bifurcate(args: argparse.Namespace) -> int:
    cfg, run_settings = resolve(args)
    if args.dump_config:
        print(dump_config(cfg, run_settings))
        return EXIT_OK

    search = experiments.ThresholdSearch(a_lo=args.a_lo, a_hi=args.a_hi, tolerance=args.tol,
                                         ratio=args.ratio, baseline_fraction=args.baseline_fraction)
    manifest = RunManifest.build('bifurcate', cfg, frequencies=args.frequencies, family=args.family,
                                 search=search.to_dict(), band_edge_extension=not args.no_band_edge_extension)
    session = OutputSession(args.out, manifest, run_settings['workers'])
    curves = {}
    reference = None
    for label, member in _family_members(cfg, args.family):
        diagram = experiments.bifurcation_diagram(member, args.frequencies, search, run_settings['workers'],
                                                  extend_band_edge=not args.no_band_edge_extension)
        frame = diagram.to_frame()
        session.csv(f"bifurcation{_suffix(label)}.csv", frame)
        curves[label or 'A_thr'] = frame['A_thr']
        reference = frame['A_s_reference']
        flagged = int((frame['flag'] != "").sum())
        if flagged:
            print(f"⚠️ {flagged} flagged frequencies{' for ' + label if label else ''}")
    if args.svg:
        curves['A_s'] = reference
        session.svg('bifurcation.svg', args.frequencies, curves, 'Omega', 'A', 'Threshold amplitude')
    session.close()
    return EXIT_OK


def cmd_surface(args: argparse.Namespace) -> int:
    cfg, run_settings = resolve(args)
    if args.dump_config:
        print(dump_config(cfg, run_settings))
        return EXIT_OK

    manifest = RunManifest.build('surface', cfg, frequencies=args.frequencies, amplitudes=args.amplitudes,
                                 band_edge_extension=not args.no_band_edge_extension)
    session = OutputSession(args.out, manifest, run_settings['workers'])
    result = experiments.energy_surface(cfg, args.frequencies, args.amplitudes, run_settings['workers'],
                                        extend_band_edge=not args.no_band_edge_extension)
    session.csv('surface.csv', result.to_frame())
    if args.svg:
        grid = result.energy_grid()
        session.svg('surface.svg', args.amplitudes,
                    {f"Omega={f:g}": grid[i] for i, f in enumerate(result.frequencies)},
                    'A', 'E_physical(T)', 'Energy surface slices', logy=True)
    session.close()
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    # --dt sets the step of the stability case; the battery picks its own steps elsewhere
    cfg, run_settings = resolve(args, skip=('dt',))
    if args.dump_config:
        print(dump_config(cfg, run_settings))
        return EXIT_OK
    unstable_dt = args.dt if args.dt is not None else 0.3
    results = run_battery(cfg, quick=args.quick, unstable_dt=unstable_dt)
    return EXIT_OK if print_report(results) else EXIT_VALIDATION_FAILURE


COMMANDS = {
    'simulate': cmd_simulate,
    'sweep': cmd_sweep,
    'bifurcate': cmd_bifurcate,
    'surface': cmd_surface,
    'validate': cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes"""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    if args.seedless:
        print("❌ --seedless: the simulations are deterministic; the flag is reserved", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        return COMMANDS[args.command](args)
    except (ChainConfigError, BandGapError) as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SimulationError as e:
        print(f"❌ Simulation failed: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    except OSError as e:
        print(f"❌ I/O error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == '__main__':
    sys.exit(main())
