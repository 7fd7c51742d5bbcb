"""
Pytest configuration file.
This file is automatically discovered by pytest and sets up the test environment.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to Python path so imports work
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))


@pytest.fixture
def rng():
    """Seeded generator so every test draws the same data."""
    return np.random.default_rng(20240611)
