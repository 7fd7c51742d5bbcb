"""
Unit tests for command-line forms: field coercion and validators, and parsing
into ExperimentConfig.
"""
import math

import pytest

from src.exceptions import ValidationError
from src.forms.experiment_forms import (
    COMMAND_FORMS,
    CoveringForm,
    GridForm,
    MaskForm,
    NoiseForm,
    PointForm,
    RecoverForm,
    SnrSweepForm,
    form_fields,
    parse_config,
)


def test_int_list_field():
    """Test comma lists, blanks and rejection of non-positive or non-integer entries."""
    assert PointForm.d_list.clean('16, 32,,64') == [16, 32, 64]
    for bad in ('', '4,x', '0,4', '-1'):
        with pytest.raises(ValidationError):
            PointForm.d_list.clean(bad)


def test_int_list_messages_name_the_option():
    """Test that each failure message names the option and the offending value."""
    with pytest.raises(ValidationError, match='--delta-list entries must be positive'):
        GridForm.delta_list.clean('4,0')
    with pytest.raises(ValidationError, match="--d must be a comma-separated list of integers, got '4;x'"):
        PointForm.d_list.clean('4;x')


def test_seeds_field():
    """Test that zero is a valid seed and negatives are not."""
    assert MaskForm.seeds.clean('0,1,2') == [0, 1, 2]
    with pytest.raises(ValidationError):
        MaskForm.seeds.clean('-3')
    with pytest.raises(ValidationError):
        NoiseForm.noise_seed.clean('-1')


def test_snr_fields():
    """Test positive reals and inf, and rejection of zero, negatives and nan."""
    assert NoiseForm.snr.clean('1e3') == 1000.0
    assert math.isinf(NoiseForm.snr.clean('inf'))
    for bad in ('0', '-5', 'nan', 'loud'):
        with pytest.raises(ValidationError):
            NoiseForm.snr.clean(bad)
    assert SnrSweepForm.snrs.clean('1e2,inf') == [100.0, math.inf]
    for bad in ('', '1e2,0', '1e2,x'):
        with pytest.raises(ValidationError):
            SnrSweepForm.snrs.clean(bad)


def test_mask_field():
    """Test the known kinds and the path requirement of file descriptors."""
    assert MaskForm.mask.clean(' flat:a=7 ') == 'flat:a=7'
    with pytest.raises(ValidationError):
        MaskForm.mask.clean('gauss')
    with pytest.raises(ValidationError):
        MaskForm.mask.clean('file:')


def test_covering_field():
    """Test m=<int>, partition and singleton, case-insensitively."""
    assert CoveringForm.covering.clean('M=3') == 'm=3'
    assert CoveringForm.covering.clean('partition') == 'partition'
    for bad in ('m=0', 'm=', 'blocks', 'm=-1'):
        with pytest.raises(ValidationError):
            CoveringForm.covering.clean(bad)


def test_unset_option_is_none():
    """Test that an option without a default cleans to None and keeps the config default."""
    assert CoveringForm.covering.clean(None) is None
    assert parse_config(['recover']).covering is None


def test_form_overrides_keep_inherited_fields():
    """Test that a subcommand form overrides defaults without dropping fields."""
    fields = form_fields(RecoverForm)
    assert fields['d_list'].default == '24'
    assert PointForm.d_list.default == '32'
    assert {'mask', 'seeds', 'snr', 'noise_seed', 'noise_model', 'covering', 'seed', 'fmt', 'threads'} <= set(fields)


def test_every_command_has_output_options():
    """Test that every subcommand accepts --format, --output and --threads."""
    for form in COMMAND_FORMS.values():
        assert {'fmt', 'output', 'threads'} <= set(form_fields(form))


def test_cond_defaults():
    """Test the defaults of the cond command."""
    cfg = parse_config(['cond'])
    assert cfg.single_point() == (32, 8, 1)
    assert cfg.mask == 'flat' and cfg.fmt == 'csv' and cfg.output is None


def test_cond_sweep_grid_skips_invalid_points():
    """Test that cond-sweep expands the grid and drops points violating the preconditions."""
    cfg = parse_config(['cond-sweep', '--d-list', '12,13', '--delta-list', '4', '--s-list', '1,2'])
    assert cfg.grid() == [(12, 4, 1), (12, 4, 2), (13, 4, 1)]


def test_single_point_requires_one_combination():
    """Test that commands needing one (d, delta, s) refuse lists and invalid points."""
    with pytest.raises(ValidationError):
        parse_config(['cond', '--d', '12,16']).single_point()
    with pytest.raises(ValidationError):
        parse_config(['cond', '--d', '13', '--delta', '4', '--s', '2']).single_point()


def test_random_mask_expands_per_seed():
    """Test that rand without an explicit seed becomes one descriptor per seed."""
    cfg = parse_config(['span-check', '--mask', 'rand:D=30', '--seeds', '1,2'])
    assert cfg.mask_descriptors() == ['rand:D=30,seed=1', 'rand:D=30,seed=2']
    assert parse_config(['span-check', '--mask', 'rand', '--seeds', '4']).mask_descriptors() == ['rand:seed=4']
    assert parse_config(['span-check', '--mask', 'rand:seed=9']).mask_descriptors() == ['rand:seed=9']


def test_recover_options():
    """Test noise, covering and seed options of recover."""
    cfg = parse_config(['recover', '--snr', '1e4', '--noise-model', 'adversarial', '--covering', 'partition',
                        '--seed', '3', '--format', 'json'])
    assert cfg.snr == 1e4 and cfg.noise_model == 'adversarial'
    assert cfg.covering == 'partition' and cfg.seed == 3 and cfg.fmt == 'json'
    assert cfg.single_point() == (24, 4, 2)


def test_invert_requires_input():
    """Test that invert without --input is refused."""
    with pytest.raises(ValidationError):
        parse_config(['invert'])
    assert parse_config(['invert', '--input', 'y.csv']).input == 'y.csv'


@pytest.mark.parametrize('argv', [
    [],
    ['unknown'],
    ['cond', '--format', 'xml'],
    ['snr-sweep', '--trials', '0'],
    ['bench-invert', '--repeats', '0'],
    ['cond', '--threads', '0'],
    ['recover', '--noise-model', 'poisson'],
    ['recover', '--seed', '-2'],
    ['snr-sweep', '--trials', 'many'],
    ['tau-sweep', '--d-list', 'many'],
])
def test_malformed_arguments(argv):
    """Test that malformed invocations raise ValidationError instead of exiting."""
    with pytest.raises(ValidationError):
        parse_config(argv)


def test_config_record_is_plain_data():
    """Test that the resolved config serializes to builtin types."""
    record = parse_config(['snr-sweep', '--snr-list', '1e2,1e3', '--threads', '2']).to_dict()
    assert record['command'] == 'snr-sweep'
    assert record['snrs'] == [100.0, 1000.0]
    assert record['threads'] == 2
