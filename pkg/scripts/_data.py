"""Shared loader for the experiment scripts: user files, or a synthetic dataset."""

from __future__ import annotations

import argparse

from tbrank.graph import filter_min_degree, load_interactions, load_metadata, merge_duplicates
from tbrank.harness import load_ground_truth
from tbrank.synth import SynthConfig, generate_synthetic


def add_data_args(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--in", dest="inp", help="ratings CSV (default: synthetic data)")
    ap.add_argument("--metadata", help="item,release_date CSV")
    ap.add_argument("--truth", help="item_id[,award_year] CSV")
    ap.add_argument("--min-user", type=int, default=0)
    ap.add_argument("--min-item", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0, help="synthetic dataset seed")


def load(args):
    """Returns (interactions, metadata, truth, label)."""
    if args.inp is None:
        data = generate_synthetic(SynthConfig(seed=args.seed))
        return data.interactions, data.metadata, data.truth, f"synthetic-seed{args.seed}"
    inter = merge_duplicates(load_interactions(args.inp).interactions)
    inter = filter_min_degree(inter, args.min_user, args.min_item)
    metadata = load_metadata(args.metadata) if args.metadata else None
    truth = load_ground_truth(args.truth) if args.truth else None
    return inter, metadata, truth, args.inp
