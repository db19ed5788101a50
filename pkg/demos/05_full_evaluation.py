#!/usr/bin/env python3
"""Walkthrough: the full desk-scale evaluation pipeline in one process.

Generates a synthetic corpus with planted targets, runs the 118-config
sweep, grades every (query, config, result) pair with five deterministic
mock graders, computes consensus with escalation, and renders the report.

Writes everything under ./demo_store (safe to delete).
"""

import json
import shutil
import time
from pathlib import Path

from convmem.config import PipelineConfig
from convmem import pipeline

store = Path("demo_store")
if store.exists():
    shutil.rmtree(store)

cfg = PipelineConfig(store_dir=str(store))
t0 = time.time()
print("synth:    ", pipeline.step_synth(cfg, n_exchanges=300, n_queries=24, seed=0))
print("ingest:   ", pipeline.step_ingest(cfg))
print("distill:  ", pipeline.step_distill(cfg))
print("index:    ", pipeline.step_index(cfg))
print("sweep:    ", pipeline.step_sweep(cfg, "evaluated"))
print("grade:    ", pipeline.step_grade(cfg))
print("consensus:", pipeline.step_consensus(cfg))
print("report:   ", pipeline.step_report(cfg))
print(f"\ntotal: {time.time() - t0:.1f} s")

report = json.loads((store / "report" / "report.json").read_text())
print("\nheadline rows:")
for row in report["metrics"][:5]:
    print(f"  {row['config_id']:45s} MRR={row['mrr']:.3f} "
          f"mean_grade={row['mean_grade']:.3f}")
print(f"\nBonferroni alpha: {report['comparisons']['bonferroni_alpha']}")
print(f"Fleiss kappa:     {report['agreement']['fleiss_kappa']:.3f} "
      f"({report['agreement']['fleiss_interpretation']})")
planted = report.get("planted_target_p_at_1", {})
best = planted.get("full_text:exact:passthrough", {})
print(f"planted exact-term P@1 (full_text/exact): {best.get('exact_term')}")
print(f"\nrendered report: {store / 'report' / 'report.txt'}")
