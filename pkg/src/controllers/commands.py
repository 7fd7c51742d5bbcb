"""
Subcommand handlers. Each handler composes library calls and returns rows (or
a JSON payload) plus header metadata; ``ExperimentHarness.run`` formats the
result and maps failures to exit codes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence, TextIO

import numpy as np

from config import Config
from src.exceptions import NonSpanningError, NumericalContractError, PtychoError, ValidationError
from src.forms.experiment_forms import ExperimentConfig, parse_config
from src.numerics.banded import BandSpec, covering_from_descriptor
from src.numerics.conditioning import adversarial_direction, block_spectrum, spanning_check
from src.numerics.experiments import (
    condition_sweep,
    magnitude_comparison,
    random_signal,
    selftest,
    snr_sweep,
    tau_sweep,
)
from src.numerics.inversion import invert_benchmark, invert_with_diagnostics, plan_inverse
from src.numerics.masks import family_from_descriptor
from src.numerics.operator import NoiseSpec, add_noise, forward
from src.numerics.recovery import RecoveryConfig, aligned_error, recover, signum
from src.utils.storage import read_measurements, write_rows, write_text, render_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONTRACT = 2


@dataclass
class CommandResult:
    """Rows for CSV/JSON tables, or ``payload`` for a single JSON document."""

    rows: List[Dict[str, Any]] = field(default_factory=list)
    payload: Any = None
    meta: Dict[str, Any] = field(default_factory=dict)
    failed: bool = False


def _recovery_config(cfg: ExperimentConfig, spec: BandSpec) -> RecoveryConfig:
    covering = covering_from_descriptor(spec, cfg.covering) if cfg.covering else None
    return RecoveryConfig(covering=covering)


def cond_command(cfg: ExperimentConfig, threads: int) -> CommandResult:
    single = cfg.command == 'cond'
    points = [cfg.single_point()] if single else cfg.grid()
    return CommandResult(rows=condition_sweep(points, cfg.mask_descriptors(), threads, strict=single))


def span_check_command(cfg: ExperimentConfig, threads: int) -> CommandResult:
    d, delta, s = cfg.single_point()
    rows = []
    for mask in cfg.mask_descriptors():
        report = spanning_check(family_from_descriptor(mask, d, delta, s), s)
        rows.append({
            'd': d, 'delta': delta, 's': s, 'mask': mask,
            'spanning': report.spanning, 'witness': report.witness, 'kappa': report.kappa,
        })
    return CommandResult(rows=rows)


def invert_command(cfg: ExperimentConfig, threads: int) -> CommandResult:
    d, delta, s = cfg.single_point()
    family = family_from_descriptor(cfg.mask_descriptors()[0], d, delta, s)
    y = read_measurements(cfg.input)
    plan = plan_inverse(family, s)
    result = invert_with_diagnostics(plan, y)
    payload = result.estimate.to_dict()
    return CommandResult(payload=payload, meta={'mode': plan.mode, 'asymmetry': result.asymmetry})


def bench_invert_command(cfg: ExperimentConfig, threads: int) -> CommandResult:
    if len(cfg.delta_list) != 1:
        raise ValidationError(f"bench-invert takes a single --delta, got {cfg.delta_list}")
    result = invert_benchmark(cfg.delta_list[0], cfg.sizes, repeats=cfg.repeats)
    if not 0.9 <= result.exponent <= 1.35:
        logger.warning("fitted time exponent %.3f is outside [0.9, 1.35] on this machine", result.exponent)
    return CommandResult(rows=result.rows, meta={'exponent': result.exponent, 'exponent_dlogd': result.exponent_dlogd})


def recover_command(cfg: ExperimentConfig, threads: int) -> CommandResult:
    d, delta, s = cfg.single_point()
    family = family_from_descriptor(cfg.mask_descriptors()[0], d, delta, s)
    plan = plan_inverse(family, s)
    x0 = random_signal(d, np.random.Generator(np.random.Philox(cfg.seed)))
    clean = forward(family, x0, s)
    direction = adversarial_direction(block_spectrum(family, s, method='svd')) if cfg.noise_model == 'adversarial' else None
    y = add_noise(clean, NoiseSpec(cfg.snr, cfg.noise_seed, cfg.noise_model), clean, direction)
    report = recover(y, family, s, _recovery_config(cfg, plan.spec), plan, x0)
    if cfg.fmt == 'json':
        return CommandResult(payload=report.to_dict())
    scale = float(np.linalg.norm(x0))
    return CommandResult(rows=[{
        'd': d, 'delta': delta, 's': s, 'mask': family.kind, 'snr': cfg.snr,
        'aligned_rel_error': report.relative_error,
        'mag_error': float(np.linalg.norm(report.magnitudes - np.abs(x0))) / scale,
        'phase_error': aligned_error(report.phases, signum(x0)) / math.sqrt(d),
        'degenerate': report.degenerate,
    }])


def snr_sweep_command(cfg: ExperimentConfig, threads: int) -> CommandResult:
    d, delta, s = cfg.single_point()
    family = family_from_descriptor(cfg.mask_descriptors()[0], d, delta, s)
    config = _recovery_config(cfg, BandSpec(d, delta, s))
    result = snr_sweep(family, s, cfg.snrs, cfg.trials, cfg.seed, config, threads)
    return CommandResult(rows=result.rows, meta={'slope': result.slope})


def mag_compare_command(cfg: ExperimentConfig, threads: int) -> CommandResult:
    d, delta, s = cfg.single_point()
    return CommandResult(rows=magnitude_comparison(d, delta, s, cfg.snrs, cfg.trials, cfg.seed))


def tau_sweep_command(cfg: ExperimentConfig, threads: int) -> CommandResult:
    return CommandResult(rows=tau_sweep(cfg.grid(), threads))


def selftest_command(cfg: ExperimentConfig, threads: int) -> CommandResult:
    results = selftest(threads)
    return CommandResult(rows=[r.to_dict() for r in results], failed=not all(r.passed for r in results))


HANDLERS: Dict[str, Callable[[ExperimentConfig, int], CommandResult]] = {
    'cond': cond_command,
    'cond-sweep': cond_command,
    'span-check': span_check_command,
    'invert': invert_command,
    'bench-invert': bench_invert_command,
    'recover': recover_command,
    'snr-sweep': snr_sweep_command,
    'mag-compare': mag_compare_command,
    'tau-sweep': tau_sweep_command,
    'selftest': selftest_command,
}


class ExperimentHarness:
    """Encapsulates one configured CLI: parses argv, dispatches, writes artifacts, returns an exit code."""

    def __init__(self, config_class: type[Config] = Config):
        self.config = config_class

    def header(self, cfg: ExperimentConfig, meta: Dict[str, Any]) -> Dict[str, Any]:
        return {'version': self.config.VERSION, 'config': cfg.to_dict(), **meta}

    def execute(self, cfg: ExperimentConfig, stream: TextIO | None = None) -> int:
        threads = cfg.threads or self.config.PTYCHO_THREADS
        logger.info("running %s with %d worker(s)", cfg.command, threads)
        result = HANDLERS[cfg.command](cfg, threads)
        header = self.header(cfg, result.meta)
        if result.payload is not None:
            write_text(render_json(result.payload, header), cfg.output, stream)
        else:
            write_rows(result.rows, cfg.output, cfg.fmt, header, stream)
        if result.failed:
            raise NumericalContractError(f"{cfg.command}: at least one check failed")
        return EXIT_OK

    def run(self, argv: Sequence[str], stream: TextIO | None = None) -> int:
        try:
            return self.execute(parse_config(argv), stream)
        except NumericalContractError as e:
            logger.error("%s", e)
            return EXIT_CONTRACT
        except NonSpanningError as e:
            logger.error("%s (witness frequency %s)", e, e.witness)
            return EXIT_VALIDATION
        except PtychoError as e:
            logger.error("%s", e)
            return EXIT_VALIDATION
        except OSError as e:
            logger.error("cannot write output: %s", e)
            return EXIT_VALIDATION
