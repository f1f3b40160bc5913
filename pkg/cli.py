#!/usr/bin/env python3
"""
reqcsim - command-line front end.

Subcommands run one experiment each and write a CSV table. Settings come
from defaults, then an optional ``--config`` file of ``key = value`` lines,
then command-line flags, later sources winning.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, replace
from typing import Any, Callable, Generic, Sequence, TypeVar

from dotenv import dotenv_values

from app_logger import cli_logger as logger
from checks import gate_check_suite, selftest_suite
from config import DEFAULT_COUPLING, DEFAULT_JOBS, DEFAULT_SEED, IDEAL_COUPLING
from display import (
    CHECK_HEADER, PARITY_HEADER, ROBUSTNESS_HEADER, SWEEP_HEADER, YIELD_HEADER,
    print_checks, print_header, print_summary, render_csv, write_csv,
)
from experiments import (
    DEFAULT_OMEGAS, CrystalModel, EnsembleSpec, SweepGrid, Topology, Variant,
    frange, run_cat_experiment, sweep_cps_fidelity, sweep_pulse_robustness,
    yield_scaling,
)
from hilbert import SimulationError

# =============================================================================
# TYPE DEFINITIONS
# =============================================================================

T = TypeVar('T')

COMMANDS = ('fidelity-sweep', 'gate-check', 'cat-parity', 'yield', 'selftest', 'pulse-robustness')
CSV_COMMANDS = ('fidelity-sweep', 'cat-parity', 'yield', 'pulse-robustness')

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_USAGE = 2
EXIT_SIMULATION = 3


@dataclass(frozen=True)
class Result(Generic[T]):
    """Result type for explicit error handling."""
    success: bool
    data: T | None = None
    error: str | None = None
    # well-formed value outside its allowed range
    out_of_range: bool = False

    @classmethod
    def ok(cls, data: T) -> Result[T]:
        return cls(success=True, data=data)

    @classmethod
    def err(cls, error: str, out_of_range: bool = False) -> Result[T]:
        return cls(success=False, error=error, out_of_range=out_of_range)


@dataclass(frozen=True)
class RunConfig:
    command: str
    output: str | None = None
    seed: int = DEFAULT_SEED
    jobs: int = DEFAULT_JOBS
    # fidelity-sweep / pulse-robustness / gate-check
    variant: str = Variant.SYMMETRIZED_BB1.value
    coupling: float = DEFAULT_COUPLING
    deltas: str = '-0.05:0.05:0.0025'
    omegas: str = 'auto'
    theta: float = math.pi
    # cat-parity
    n: int = 4
    phis: str = '0:3.2:0.1'
    delta_halfwidth: float = 0.0
    omega_halfwidth: float = 0.0
    coupling_min: float = IDEAL_COUPLING
    coupling_max: float = IDEAL_COUPLING
    instances: int = 1
    # yield
    n_values: str = '2,3'
    seeds: int = 10
    ion_count: int = 20000
    box_side: float = 1.0
    dipole_constant: float = 1.0
    channel_count: int = 3
    channel_probability: float = 0.05
    threshold: float = 4.0e4
    topology: str = Topology.STAR.value
    angular: bool = False


# =============================================================================
# CUSTOM EXCEPTIONS
# =============================================================================

class ConfigError(SimulationError):
    """Unknown key, malformed value or missing required setting."""
    pass


class ParameterRangeError(SimulationError):
    """Well-formed setting outside its physical range."""
    pass


# =============================================================================
# VALIDATION HELPERS
# =============================================================================

def validate_int(value: str, field_name: str, minimum: int | None = None) -> Result[int]:
    value = value.strip()
    try:
        num = int(value)
    except ValueError:
        return Result.err(f"{field_name} must be an integer, got '{value}'")
    if minimum is not None and num < minimum:
        return Result.err(f"{field_name} must be at least {minimum}, got {num}", out_of_range=True)
    return Result.ok(num)


def validate_float(value: str, field_name: str, positive: bool = False) -> Result[float]:
    value = value.strip()
    try:
        num = float(value)
    except ValueError:
        return Result.err(f"{field_name} must be a number, got '{value}'")
    if not math.isfinite(num):
        return Result.err(f"{field_name} must be finite")
    if num < 0 or (positive and num == 0):
        return Result.err(
            f"{field_name} must be {'positive' if positive else 'non-negative'}, got {num}", out_of_range=True,
        )
    return Result.ok(num)


def validate_bool(value: str, field_name: str) -> Result[bool]:
    lowered = value.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return Result.ok(True)
    if lowered in ('0', 'false', 'no', 'off'):
        return Result.ok(False)
    return Result.err(f"{field_name} must be true or false, got '{value}'")


def validate_choice(value: str, field_name: str, choices: Sequence[str]) -> Result[str]:
    value = value.strip()
    if value not in choices:
        return Result.err(f"{field_name} must be one of {', '.join(choices)}, got '{value}'")
    return Result.ok(value)


def parse_values(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive) or a comma list."""
    text = text.strip()
    if ':' in text:
        parts = [float(p) for p in text.split(':')]
        if len(parts) != 3:
            raise ValueError(f"range needs start:stop:step, got '{text}'")
        return frange(*parts)
    values = tuple(float(p) for p in text.split(',') if p.strip())
    if not values:
        raise ValueError("empty value list")
    return values


def validate_values(value: str, field_name: str, allow_auto: bool = False) -> Result[str]:
    value = value.strip()
    if allow_auto and value == 'auto':
        return Result.ok(value)
    try:
        values = parse_values(value)
    except (ValueError, SimulationError) as e:
        return Result.err(f"{field_name}: {e}")
    if not all(math.isfinite(v) for v in values):
        return Result.err(f"{field_name} must be finite")
    return Result.ok(value)


def validate_int_list(value: str, field_name: str) -> Result[str]:
    try:
        values = [int(p) for p in value.split(',') if p.strip()]
    except ValueError:
        return Result.err(f"{field_name} must be a comma list of integers, got '{value}'")
    if len(values) < 2:
        return Result.err(f"{field_name} needs at least two sizes, got '{value}'")
    if min(values) < 2:
        return Result.err(f"{field_name} sizes must each be >= 2, got '{value}'", out_of_range=True)
    return Result.ok(value.strip())


def validate_output(value: str, field_name: str) -> Result[str | None]:
    value = value.strip()
    return Result.ok(value or None)


Validator = Callable[[str, str], Result[Any]]

VALIDATORS: dict[str, Validator] = {
    'output': validate_output,
    'seed': lambda v, f: validate_int(v, f, 0),
    'jobs': lambda v, f: validate_int(v, f, 1),
    'variant': lambda v, f: validate_choice(v, f, [x.value for x in Variant]),
    'coupling': validate_float,
    'deltas': validate_values,
    'omegas': lambda v, f: validate_values(v, f, allow_auto=True),
    'theta': lambda v, f: validate_float(v, f, positive=True),
    'n': lambda v, f: validate_int(v, f, 2),
    'phis': validate_values,
    'delta_halfwidth': validate_float,
    'omega_halfwidth': validate_float,
    'coupling_min': lambda v, f: validate_float(v, f, positive=True),
    'coupling_max': lambda v, f: validate_float(v, f, positive=True),
    'instances': lambda v, f: validate_int(v, f, 1),
    'n_values': validate_int_list,
    'seeds': lambda v, f: validate_int(v, f, 1),
    'ion_count': lambda v, f: validate_int(v, f, 1),
    'box_side': lambda v, f: validate_float(v, f, positive=True),
    'dipole_constant': lambda v, f: validate_float(v, f, positive=True),
    'channel_count': lambda v, f: validate_int(v, f, 2),
    'channel_probability': validate_float,
    'threshold': lambda v, f: validate_float(v, f, positive=True),
    'topology': lambda v, f: validate_choice(v, f, [x.value for x in Topology]),
    'angular': validate_bool,
}

DEFAULTS = RunConfig(command='selftest')


# =============================================================================
# ARGUMENT PARSING
# =============================================================================

FLAG_HELP = {
    'output': "CSV output path, '-' for stdout",
    'seed': 'master seed (env REQCSIM_SEED)',
    'jobs': 'parallel work items (env REQCSIM_JOBS)',
    'variant': 'CPS variant: simple, symmetrized or symmetrized_bb1',
    'coupling': 'dipole coupling g in units of the Rabi frequency',
    'deltas': 'detuning grid, start:stop:step or comma list',
    'omegas': "Rabi ratio grid; 'auto' picks the variant's default window",
    'theta': 'pulse area for the robustness comparison',
    'n': 'qubits in the cat register (bus included)',
    'phis': 'twist angles, start:stop:step or comma list',
    'delta_halfwidth': 'ensemble detuning half-width',
    'omega_halfwidth': 'ensemble relative Rabi half-width',
    'coupling_min': 'ensemble coupling lower bound (log-uniform)',
    'coupling_max': 'ensemble coupling upper bound (log-uniform)',
    'instances': 'ensemble size',
    'n_values': 'register sizes, comma list',
    'seeds': 'Monte Carlo crystals (seeds seed .. seed+seeds-1)',
    'ion_count': 'ions per crystal',
    'box_side': 'crystal box side',
    'dipole_constant': 'C in g = C / r^3',
    'channel_count': 'number of channels',
    'channel_probability': 'probability of an ion belonging to each channel',
    'threshold': 'coupling threshold g_t',
    'topology': 'instance topology: star or cluster',
    'angular': 'include the |1 - 3 cos^2| angular factor',
}

COMMAND_SETTINGS = {
    'fidelity-sweep': ('variant', 'coupling', 'deltas', 'omegas'),
    'pulse-robustness': ('theta', 'deltas', 'omegas'),
    'gate-check': ('coupling',),
    'selftest': (),
    'cat-parity': ('n', 'phis', 'delta_halfwidth', 'omega_halfwidth', 'coupling_min', 'coupling_max', 'instances'),
    'yield': (
        'n_values', 'seeds', 'ion_count', 'box_side', 'dipole_constant', 'channel_count',
        'channel_probability', 'threshold', 'topology', 'angular',
    ),
}

COMMAND_HELP = {
    'fidelity-sweep': 'worst-case CPS fidelity over detuning and Rabi ratio',
    'pulse-robustness': 'plain pulse versus BB1 on a single ion',
    'gate-check': 'reference equivalence and truth-table checks',
    'selftest': 'fidelity machinery cross-checks',
    'cat-parity': 'cat-state parity oscillation on a star register',
    'yield': 'instance yield of a randomly doped crystal',
}


def _flag(name: str) -> str:
    return '--' + name.replace('_', '-')


def _add_setting(parser: argparse.ArgumentParser, name: str) -> None:
    default = getattr(DEFAULTS, name)
    flags = [_flag(name)]
    if name == 'coupling':
        flags.append('--g')
    if name == 'output':
        flags.insert(0, '-o')
    parser.add_argument(
        *flags, dest=name, default=argparse.SUPPRESS, metavar=name.upper(),
        help=f"{FLAG_HELP[name]} (default: {render_value(default) or 'none'})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='reqcsim',
        description='Pulse-level simulator for rare-earth ion quantum computing',
    )
    subparsers = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')
    for command in COMMANDS:
        sub = subparsers.add_parser(
            command, help=COMMAND_HELP[command], description=COMMAND_HELP[command], allow_abbrev=False,
        )
        sub.add_argument('--config', default=argparse.SUPPRESS, metavar='FILE',
                         help='key = value settings file (default: none)')
        for name in command_settings(command):
            _add_setting(sub, name)
    return parser


def command_settings(command: str) -> tuple[str, ...]:
    return ('output', 'seed', 'jobs', *COMMAND_SETTINGS[command])


def read_config_file(path: str, command: str | None = None) -> dict[str, str]:
    """``key = value`` settings; with ``command``, only keys that command reads."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"config file not found: {path}")
    allowed = command_settings(command) if command else tuple(VALIDATORS)
    raw = dotenv_values(path)
    values: dict[str, str] = {}
    for key, value in raw.items():
        name = key.strip().lower().replace('-', '_')
        if name not in VALIDATORS:
            raise ConfigError(f"unknown config key '{key}' in {path}", user_message=f"unknown config key '{key}'")
        if name not in allowed:
            raise ConfigError(
                f"config key '{key}' in {path} does not apply to '{command}'",
                user_message=f"config key '{key}' does not apply to '{command}'",
            )
        values[name] = '' if value is None else value
    return values


def parse_config(argv: Sequence[str] | None = None, config_file: str | None = None) -> RunConfig:
    """Defaults, then the config file, then flags."""
    args = vars(build_parser().parse_args(argv))
    command = args.pop('command')
    path = args.pop('config', None) or config_file

    raw = read_config_file(path, command) if path else {}
    raw.update({k: str(v) for k, v in args.items()})

    values: dict[str, Any] = {}
    for name, text in raw.items():
        result = VALIDATORS[name](text, name)
        if not result.success:
            message = f"invalid value for '{name}': {result.error}"
            if result.out_of_range:
                raise ParameterRangeError(message, user_message=result.error)
            raise ConfigError(message, user_message=result.error)
        values[name] = result.data

    config = replace(DEFAULTS, command=command, **values)
    if command in CSV_COMMANDS and not config.output:
        raise ConfigError(f"'{command}' needs an output path", user_message="missing required setting 'output'")
    logger.debug("config parsed", command=command, sources='file+flags' if path else 'flags')
    return config


def render_value(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return repr(value) if isinstance(value, float) else str(value)


def render_config(config: RunConfig) -> str:
    """Settings file text that parses back to ``config`` for its command."""
    lines = [f"# reqcsim {config.command}"]
    lines += [f"{name} = {render_value(getattr(config, name))}" for name in command_settings(config.command)]
    return '\n'.join(lines) + '\n'


# =============================================================================
# COMMANDS
# =============================================================================

def _omegas(config: RunConfig) -> tuple[float, ...] | None:
    if config.omegas == 'auto':
        return None
    return parse_values(config.omegas)


def _emit(config: RunConfig, header: Sequence[str], rows: list[Sequence[Any]]) -> None:
    if config.output == '-':
        sys.stdout.write(render_csv(header, rows))
    elif config.output:
        write_csv(config.output, header, rows)


def cmd_fidelity_sweep(config: RunConfig) -> int:
    variant = Variant(config.variant)
    default = SweepGrid.default(variant, config.coupling)
    grid = SweepGrid(
        parse_values(config.deltas),
        _omegas(config) or default.omega_values,
        config.coupling,
        variant,
    )
    rows = sweep_cps_fidelity(grid, config.jobs)
    _emit(config, SWEEP_HEADER, [(r.delta, r.omega, r.fidelity) for r in rows])
    if config.output != '-':
        print_summary(
            'fidelity sweep',
            points=len(rows),
            above_0_999=sum(r.fidelity >= 0.999 for r in rows),
            worst=min(r.fidelity for r in rows),
        )
    return EXIT_OK


def cmd_pulse_robustness(config: RunConfig) -> int:
    omegas = _omegas(config) or DEFAULT_OMEGAS
    rows = sweep_pulse_robustness(config.theta, parse_values(config.deltas), omegas, config.jobs)
    _emit(config, ROBUSTNESS_HEADER, [(r.delta, r.omega, r.distance_plain, r.distance_bb1) for r in rows])
    return EXIT_OK


def cmd_cat_parity(config: RunConfig) -> int:
    ensemble = EnsembleSpec(
        config.delta_halfwidth,
        config.omega_halfwidth,
        (config.coupling_min, config.coupling_max),
        config.instances,
        config.seed,
    )
    rows = run_cat_experiment(config.n, parse_values(config.phis), ensemble, config.jobs)
    _emit(config, PARITY_HEADER, [(r.phi, r.mean_excited, r.parity) for r in rows])
    return EXIT_OK


def cmd_yield(config: RunConfig) -> int:
    model = CrystalModel(
        box_side=config.box_side,
        ion_count=config.ion_count,
        dipole_constant=config.dipole_constant,
        channel_count=config.channel_count,
        channel_probability=config.channel_probability,
        threshold=config.threshold,
        qubits=2,
        topology=Topology(config.topology),
        angular=config.angular,
    )
    n_values = [int(p) for p in config.n_values.split(',') if p.strip()]
    seeds = range(config.seed, config.seed + config.seeds)
    result = yield_scaling(model, n_values, seeds, config.jobs)
    rows = [
        (n, mean, math.log(mean) if mean > 0 else -math.inf, result.estimated_p, result.fitted_slope)
        for n, mean in zip(result.n_values, result.mean_counts)
    ]
    _emit(config, YIELD_HEADER, rows)
    if config.output != '-':
        print_summary(
            'yield scaling',
            estimated_p=result.estimated_p,
            log_p=result.log_p,
            fitted_slope=result.fitted_slope if result.fitted_slope is not None else 'degenerate',
        )
    return EXIT_OK


def _report_checks(config: RunConfig, title: str, results: list) -> int:
    if config.output != '-':
        print_header(title)
        print_checks(results)
    _emit(config, CHECK_HEADER, [(r.check, r.value, r.threshold, r.passed) for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECKS_FAILED


def cmd_gate_check(config: RunConfig) -> int:
    return _report_checks(config, 'GATE CHECK', gate_check_suite(config.coupling))


def cmd_selftest(config: RunConfig) -> int:
    return _report_checks(config, 'SELF TEST', selftest_suite(config.seed))


DISPATCH: dict[str, Callable[[RunConfig], int]] = {
    'fidelity-sweep': cmd_fidelity_sweep,
    'pulse-robustness': cmd_pulse_robustness,
    'cat-parity': cmd_cat_parity,
    'yield': cmd_yield,
    'gate-check': cmd_gate_check,
    'selftest': cmd_selftest,
}


def run(config: RunConfig) -> int:
    """Dispatch one command; map failures to exit codes."""
    logger.info("run started", command=config.command, seed=config.seed, jobs=config.jobs)
    try:
        code = DISPATCH[config.command](config)
    except OSError as e:
        logger.error("i/o failure", command=config.command, error=str(e))
        print(f"❌ I/O error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"❌ {e.user_message}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as e:
        print(f"❌ {e.user_message}", file=sys.stderr)
        return EXIT_SIMULATION
    logger.info("run completed", command=config.command, exit_code=code)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except ConfigError as e:
        print(f"reqcsim: error: {e.user_message}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as e:
        print(f"reqcsim: error: {e.user_message}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as e:
        print(f"reqcsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == '__main__':
    sys.exit(main())
