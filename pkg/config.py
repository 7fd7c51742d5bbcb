import os


class Config:
    # Worker pool for sweeps (CLI --threads overrides)
    PTYCHO_THREADS = int(os.environ.get('PTYCHO_THREADS') or os.cpu_count() or 1)
    PTYCHO_LOG_LEVEL = os.environ.get('PTYCHO_LOG_LEVEL', 'INFO').upper()

    # Dense assembly (circ, circ_block, assemble_dense_A) refuses dimensions above this
    DENSE_SIZE_LIMIT = int(os.environ.get('PTYCHO_DENSE_LIMIT', '4096'))

    # A frequency block is rank deficient iff sigma_min <= RANK_TOL * sigma_max(all blocks)
    RANK_TOL = float(os.environ.get('PTYCHO_RANK_TOL', '1e-10'))

    # Eigen-solver switches
    EIG_DENSE_LIMIT = int(os.environ.get('PTYCHO_EIG_DENSE_LIMIT', '2048'))
    BLOCK_DENSE_LIMIT = int(os.environ.get('PTYCHO_BLOCK_DENSE_LIMIT', '512'))
    POWER_TOL = 1e-12
    POWER_MAX_ITER_FACTOR = 50  # cap = factor * d
    DEGENERACY_GAP = 1e-10

    # Artifact output
    CSV_DIGITS = int(os.environ.get('PTYCHO_CSV_DIGITS', '17'))
    VERSION = '0.3.0'
