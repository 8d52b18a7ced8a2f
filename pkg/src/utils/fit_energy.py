"""
Fit per-command energies to the reference copy energies.

Builds the command-count matrix from the copy macros of one-row reference
copies, adds the bank-nanoseconds each copy holds, solves the matrix against
the reference energies with least squares and prints the fitted parameters
and the residual of every cell.

    python -m src.utils.fit_energy [--config configs/ddr3_1600.ini]
"""

import argparse
import logging
from dataclasses import fields
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from config import COPY_COST_REFERENCE
from src.dram.copy_engine import (
    ENERGY_COUNT_KEYS,
    CopyMechanism,
    bank_hold_ns,
    command_counts,
    copy_energy_uj,
    reference_job,
)
from src.dram.dram_model import DramConfig, EnergyParams
from src.settings import load_config

logger = logging.getLogger(__name__)

HOLD_KEY = 'bank_ns'


def count_matrix(cfg: DramConfig) -> pd.DataFrame:
    """One row per reference cell, one column per energy term"""
    rows = []
    for mechanism, hops, _, _ in COPY_COST_REFERENCE:
        job = reference_job(CopyMechanism(mechanism), cfg, hops)
        counts = command_counts(job, cfg)
        rows.append({
            'mechanism': mechanism,
            'hops': hops,
            **{k: counts[k] for k in ENERGY_COUNT_KEYS},
            HOLD_KEY: bank_hold_ns(job, cfg),
        })
    return pd.DataFrame(rows)


def fit_energy(cfg: Optional[DramConfig] = None) -> Tuple[EnergyParams, pd.DataFrame]:
    """Least-squares EnergyParams and a residual table"""
    cfg = cfg or DramConfig()
    matrix = count_matrix(cfg)
    counts = matrix[ENERGY_COUNT_KEYS]
    # RD and WR share one unknown: every reference copy issues them in pairs.
    # Hold power is in mW, so bank-ns scale by 1e-6 to land in uJ.
    a = np.column_stack([
        counts['ACT'],
        counts['PRE'],
        counts['RD'] + counts['WR'],
        counts['IO'],
        counts['RBM'],
        matrix[HOLD_KEY] * 1e-6,
    ]).astype(float)
    target = np.array([energy for _, _, _, energy in COPY_COST_REFERENCE], dtype=float)

    solution, _, _, _ = np.linalg.lstsq(a, target, rcond=None)
    solution = np.clip(solution, 0.0, None)
    e_act, e_pre, e_col, e_io, e_rbm, p_hold = (round(float(v), 6) for v in solution)
    params = EnergyParams(
        e_act=e_act,
        e_pre=e_pre,
        e_rd=e_col,
        e_wr=e_col,
        e_io_per_line=e_io,
        e_rbm_per_hop=e_rbm,
        p_bank_hold_mw=p_hold,
    )

    fitted = np.array([
        copy_energy_uj(reference_job(CopyMechanism(mechanism), cfg, hops), params, cfg)
        for mechanism, hops, _, _ in COPY_COST_REFERENCE
    ])
    residuals = matrix[['mechanism', 'hops']].copy()
    residuals['reference_uJ'] = target
    residuals['fitted_uJ'] = fitted.round(4)
    residuals['residual_uJ'] = (fitted - target).round(4)
    return params, residuals


def main(argv=None):
    parser = argparse.ArgumentParser(description='Fit per-command DRAM energies')
    parser.add_argument('--config', type=Path)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)

    cfg = load_config(args.config).dram
    params, residuals = fit_energy(cfg)
    print('[energy]')
    for f in fields(params):
        print(f"{f.name} = {getattr(params, f.name)}")
    print()
    print(residuals.to_string(index=False))
    logger.info(f"Largest residual {residuals['residual_uJ'].abs().max():.4f} uJ")


if __name__ == "__main__":
    main()
