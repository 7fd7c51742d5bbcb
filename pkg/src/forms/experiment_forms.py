"""
Command-line forms. Each option is a ``Field`` declared with its coercion and
validators, and each subcommand is a form class composed from field groups.
"""
from __future__ import annotations

import argparse
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Sequence, Tuple

from src.exceptions import ValidationError
from src.numerics.experiments import GridPoint, parameter_grid

MASK_KINDS = ('exp', 'flat', 'const', 'rand', 'file')
FORMATS = ('csv', 'json')
NOISE_MODELS = ('gaussian', 'adversarial')
DEFAULT_SNRS = '1e2,1e3,1e4,1e5,1e6'
DEFAULT_BENCH_SIZES = '1024,2048,4096,8192,16384'


class FormParser(argparse.ArgumentParser):
    """ArgumentParser that reports bad input as ValidationError instead of exiting."""

    def error(self, message: str):
        raise ValidationError(message)


@dataclass(frozen=True)
class Validator:
    """A check on a coerced value and the message shown when it fails."""

    check: Callable[[Any], bool]
    message: str

    def __call__(self, name: str, value: Any) -> None:
        if not self.check(value):
            raise ValidationError(self.message.format(name=name, value=value))


def NotEmpty(message: str = '{name} is empty') -> Validator:
    return Validator(lambda v: len(v) > 0, message)


def AtLeast(low: int, message: str) -> Validator:
    return Validator(lambda v: v >= low, message)


def EachAtLeast(low: int, message: str) -> Validator:
    return Validator(lambda v: all(item >= low for item in v), message)


def _int_list(text: str) -> List[int]:
    return [int(item) for item in text.split(',') if item.strip()]


def _float_list(text: str) -> List[float]:
    return [float(item) for item in text.split(',') if item.strip()]


def _positive_or_inf(value: float) -> bool:
    return not math.isnan(value) and value > 0


def _mask_kind(descriptor: str) -> str:
    return descriptor.partition(':')[0].strip().lower()


def _covering_ok(text: str) -> bool:
    if text in ('partition', 'singleton'):
        return True
    return text.startswith('m=') and text[2:].isdigit() and int(text[2:]) >= 1


@dataclass(frozen=True)
class Field:
    """One option: flags, raw default, coercion from text and the validators run on the result."""

    flags: Tuple[str, ...]
    default: str | None = None
    coerce: Callable[[str], Any] = str
    message: str = '{name} got an invalid value {value!r}'
    validators: Tuple[Validator, ...] = ()
    choices: Tuple[str, ...] | None = None
    required: bool = False
    help: str | None = None

    @property
    def label(self) -> str:
        return self.flags[0]

    def with_default(self, default: str) -> 'Field':
        return replace(self, default=default)

    def clean(self, raw: str | None) -> Any:
        """Coerce and validate raw text; ``None`` means the option was not given and has no default."""
        if raw is None:
            return None
        try:
            value = self.coerce(raw)
        except ValueError as e:
            raise ValidationError(self.message.format(name=self.label, value=raw)) from e
        for validator in self.validators:
            validator(self.label, value)
        return value

    def add_to(self, parser: argparse.ArgumentParser, dest: str) -> None:
        parser.add_argument(*self.flags, dest=dest, default=self.default, choices=self.choices,
                            required=self.required, help=self.help)


def IntListField(flag: str, default: str, help: str | None = None) -> Field:
    return Field(
        (flag,), default, _int_list,
        message='{name} must be a comma-separated list of integers, got {value!r}',
        validators=(NotEmpty(), EachAtLeast(1, '{name} entries must be positive, got {value}')),
        help=help,
    )


def CountField(flag: str, default: str, help: str | None = None) -> Field:
    return Field(
        (flag,), default, int,
        message='{name} must be an integer, got {value!r}',
        validators=(AtLeast(1, '{name} must be positive, got {value}'),),
        help=help,
    )


def SeedField(flag: str, help: str | None = None) -> Field:
    return Field(
        (flag,), '0', int,
        message='{name} must be an integer, got {value!r}',
        validators=(AtLeast(0, '{name} must be non-negative, got {value}'),),
        help=help,
    )


def SnrListField(default: str) -> Field:
    return Field(
        ('--snr-list',), default, _float_list,
        message='SNR list must be comma-separated numbers, got {value!r}',
        validators=(
            NotEmpty('SNR list is empty'),
            Validator(lambda v: all(_positive_or_inf(x) for x in v), 'SNRs must be positive numbers or inf, got {value}'),
        ),
    )


class OutputForm:
    fmt = Field(('--format',), 'csv', choices=FORMATS)
    output = Field(('--output',), help='output path (default: stdout)')
    threads = CountField('--threads', None, help='worker pool size (overrides PTYCHO_THREADS)')


class PointForm:
    d_list = IntListField('--d', '32')
    delta_list = IntListField('--delta', '8')
    s_list = IntListField('--s', '1')


class GridForm:
    d_list = IntListField('--d-list', '16,32,64')
    delta_list = IntListField('--delta-list', '4')
    s_list = IntListField('--s-list', '1')


class MaskForm:
    mask = Field(
        ('--mask',), 'flat', str.strip,
        validators=(
            Validator(lambda v: _mask_kind(v) in MASK_KINDS,
                      'unknown mask kind in {value!r}; use one of ' + ', '.join(MASK_KINDS)),
            Validator(lambda v: _mask_kind(v) != 'file' or bool(v.partition(':')[2].strip()),
                      "mask descriptor 'file:' needs a path, e.g. file:masks.json"),
        ),
        help='exp[:a=..] | flat[:a=..] | const | rand[:D=..] | file:PATH',
    )
    seeds = Field(
        ('--seeds',), '0', _int_list,
        message='{name} must be a comma-separated list of integers, got {value!r}',
        validators=(NotEmpty(), EachAtLeast(0, '{name} needs non-negative integers, got {value}')),
        help='seeds for random families',
    )


class NoiseForm:
    snr = Field(
        ('--snr',), 'inf', float,
        message='SNR must be a positive number or inf, got {value!r}',
        validators=(Validator(_positive_or_inf, 'SNR must be a positive number or inf, got {value}'),),
    )
    noise_seed = SeedField('--noise-seed')
    noise_model = Field(('--noise-model',), 'gaussian', choices=NOISE_MODELS)


class CoveringForm:
    covering = Field(
        ('--covering',), None, lambda t: t.strip().lower(),
        validators=(Validator(_covering_ok, 'covering must be m=<int>, partition or singleton, got {value!r}'),),
        help='m=<int> | partition | singleton',
    )


class CondForm(PointForm, MaskForm, OutputForm):
    pass


class CondSweepForm(GridForm, MaskForm, OutputForm):
    pass


class InvertForm(CondForm):
    input = Field(('--input',), required=True, help='measurement CSV or JSON')


class BenchInvertForm(OutputForm):
    delta_list = IntListField('--delta', '8')
    sizes = IntListField('--sizes', DEFAULT_BENCH_SIZES)
    repeats = CountField('--repeats', '5')


class RecoverForm(PointForm, MaskForm, NoiseForm, CoveringForm, OutputForm):
    d_list = PointForm.d_list.with_default('24')
    delta_list = PointForm.delta_list.with_default('4')
    s_list = PointForm.s_list.with_default('2')
    mask = MaskForm.mask.with_default('rand')
    seed = SeedField('--seed', help='seed of the random test signal')


class SnrSweepForm(PointForm, MaskForm, CoveringForm, OutputForm):
    d_list = PointForm.d_list.with_default('24')
    delta_list = PointForm.delta_list.with_default('6')
    s_list = PointForm.s_list.with_default('3')
    mask = MaskForm.mask.with_default('rand')
    snrs = SnrListField(DEFAULT_SNRS)
    trials = CountField('--trials', '32')
    seed = SeedField('--seed')


class MagCompareForm(PointForm, OutputForm):
    d_list = PointForm.d_list.with_default('24')
    delta_list = PointForm.delta_list.with_default('6')
    s_list = PointForm.s_list.with_default('3')
    snrs = SnrListField('1e1,1e2,1e3,1e4')
    trials = CountField('--trials', '10')
    seed = SeedField('--seed')


class TauSweepForm(GridForm, OutputForm):
    pass


COMMAND_FORMS: Dict[str, type] = {
    'cond': CondForm,
    'cond-sweep': CondSweepForm,
    'span-check': CondForm,
    'invert': InvertForm,
    'bench-invert': BenchInvertForm,
    'recover': RecoverForm,
    'snr-sweep': SnrSweepForm,
    'mag-compare': MagCompareForm,
    'tau-sweep': TauSweepForm,
    'selftest': OutputForm,
}
COMMANDS = tuple(COMMAND_FORMS)


def form_fields(form: type) -> Dict[str, Field]:
    """Fields of a form class by config attribute; subclasses override inherited fields in place."""
    fields: Dict[str, Field] = {}
    for klass in reversed(form.__mro__):
        for name, value in vars(klass).items():
            if isinstance(value, Field):
                fields[name] = value
    return fields


@dataclass
class ExperimentConfig:
    """A fully validated CLI invocation."""

    command: str
    d_list: List[int] = field(default_factory=lambda: [32])
    delta_list: List[int] = field(default_factory=lambda: [8])
    s_list: List[int] = field(default_factory=lambda: [1])
    mask: str = 'flat'
    seeds: List[int] = field(default_factory=lambda: [0])
    snrs: List[float] = field(default_factory=lambda: _float_list(DEFAULT_SNRS))
    snr: float = math.inf
    noise_seed: int = 0
    noise_model: str = 'gaussian'
    covering: str | None = None
    trials: int = 32
    seed: int = 0
    sizes: List[int] = field(default_factory=lambda: _int_list(DEFAULT_BENCH_SIZES))
    repeats: int = 5
    input: str | None = None
    output: str | None = None
    fmt: str = 'csv'
    threads: int | None = None

    def grid(self) -> List[GridPoint]:
        return parameter_grid(self.d_list, self.delta_list, self.s_list)

    def single_point(self) -> GridPoint:
        points = self.grid()
        if len(self.d_list) * len(self.delta_list) * len(self.s_list) != 1 or not points:
            raise ValidationError(
                f"{self.command} needs one valid (d, delta, s), got d={self.d_list}, "
                f"delta={self.delta_list}, s={self.s_list}"
            )
        return points[0]

    def mask_descriptors(self) -> List[str]:
        """Random families expand into one descriptor per seed."""
        if self.mask.lower().startswith('rand') and 'seed=' not in self.mask.lower():
            sep = ',' if ':' in self.mask else ':'
            return [f'{self.mask}{sep}seed={seed}' for seed in self.seeds]
        return [self.mask]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def build_parser() -> FormParser:
    parser = FormParser(prog='ptycho', description='Phase retrieval from local ptychographic measurements.')
    sub = parser.add_subparsers(dest='command', required=True)
    for command, form in COMMAND_FORMS.items():
        p = sub.add_parser(command)
        for name, option in form_fields(form).items():
            option.add_to(p, name)
    return parser


def parse_config(argv: Sequence[str]) -> ExperimentConfig:
    """Parse and validate argv into an ExperimentConfig; every failure is a ValidationError."""
    ns = vars(build_parser().parse_args(list(argv)))
    command = ns.pop('command')
    values = {name: option.clean(ns[name]) for name, option in form_fields(COMMAND_FORMS[command]).items()}
    return ExperimentConfig(command=command, **{k: v for k, v in values.items() if v is not None})
