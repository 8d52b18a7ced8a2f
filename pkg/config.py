"""
Configuration settings for the LISA DRAM simulator
"""

from pathlib import Path

# Project paths
PROJECT_ROOT = Path(__file__).parent
CONFIGS_DIR = PROJECT_ROOT / "configs"
LOGS_DIR = PROJECT_ROOT / "logs"
REPORTS_DIR = PROJECT_ROOT / "reports"

DEFAULT_CONFIG_FILE = CONFIGS_DIR / "ddr3_1600.ini"

# DRAM organisation (one channel, one rank, 8 banks of 16 subarrays)
DEFAULT_GEOMETRY = {
    'channels': 1,
    'ranks_per_channel': 1,
    'banks_per_rank': 8,
    'subarrays_per_bank': 16,
    'rows_per_subarray': 512,
    'columns_per_row': 128,
    'cacheline_bytes': 64,
    'row_bytes': 8192,
}

# DDR3-1600 11-11-11, all values in ns
DDR3_1600_TIMING = {
    'tCK': 1.25,
    'tRCD': 13.75,
    'tRAS': 35.0,
    'tRP': 13.75,
    'tCL': 13.75,
    'tWR': 15.0,
    'tRTP': 7.5,
    'tCCD': 5.0,
    'tBL': 5.0,
    'tRRD': 6.25,
    'tFAW': 30.0,
    'tRBM': 8.0,
    'tRP_linked': 5.0,
    't_commit': 56.75,
    'rbm_row_transfer_ns': 16.384,
}

# Linked precharge reference point: 5 ns against a 13 ns precharge
LIP_REFERENCE_PRECHARGE_NS = 13.0
LIP_REFERENCE_LINKED_NS = 5.0
LIP_SPEEDUP = LIP_REFERENCE_PRECHARGE_NS / LIP_REFERENCE_LINKED_NS

# Per-command energies in microjoules and the standby power (mW) of each bank
# a copy holds, fitted by src/utils/fit_energy.py
DEFAULT_ENERGY = {
    'e_act': 0.01841,
    'e_pre': 0.021491,
    'e_rd': 0.007703,
    'e_wr': 0.007703,
    'e_io_per_line': 0.015989,
    'e_rbm_per_hop': 0.005582,
    'p_bank_hold_mw': 20.166074,
}

# Address bit fields, most- to least-significant
DEFAULT_MAPPING_ORDER = ['row', 'rank', 'bank', 'channel', 'column', 'offset']

# Copy latency (ns) and energy (uJ) for an 8 KB row copy
COPY_COST_REFERENCE = [
    ('MemcpyChannel', 0, 1366.25, 6.2),
    ('RowCloneInterSA', 0, 1363.75, 4.33),
    ('RowClonePSMBank', 0, 701.25, 2.08),
    ('RowCloneIntraSA', 0, 83.75, 0.06),
    ('LisaRisc', 1, 148.5, 0.09),
    ('LisaRisc', 7, 196.5, 0.12),
    ('LisaRisc', 15, 260.5, 0.17),
]

DDR4_2400_CHANNEL_GBPS = 19.2

# In-DRAM cache configuration
VILLA_CONFIG = {
    'epoch_length': 100_000,
    'counters_per_bank': 1024,
    'counter_bits': 8,
    'hot_set_size': 16,
    'benefit_bits': 8,
    'fast_subarrays': [0],
    'fast_timing_scale': 0.55,
    'fill_mechanism': 'LisaRisc',
}

# Memory controller configuration
CONTROLLER_CONFIG = {
    'queue_capacity': 32,
    'page_policy': 'open',
    'command_trace': '',
}

# Synthetic workload generator defaults
WORKLOAD_CONFIG = {
    'seed': 1,
    'cores': 4,
    'copy_fraction': 0.05,
    'footprint_mb': 8,
    'length': 20_000,
    'write_fraction': 0.2,
    'hot_fraction': 0.8,
    'hot_rows': 12,
    'mean_bubbles': 10,
}

# Feature combinations run by `simulate --sweep`
FEATURE_SWEEP = [
    ('baseline', []),
    ('risc', ['risc']),
    ('risc+villa', ['risc', 'villa']),
    ('risc+villa+lip', ['risc', 'villa', 'lip']),
]

# Logging configuration
LOGGING_CONFIG = {
    'level': 'INFO',
    'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    'file': LOGS_DIR / 'lisa_sim.log'
}
