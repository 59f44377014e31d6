"""
Scenario trace generator.

Writes a ten-day training trace and a held-out day for each synthetic
scenario (event-spike ≈ stadium area, diurnal ≈ nightlife area,
flat ≈ residential area), using the same seeds the CLI uses when no trace
file is configured.
Run via: python seed_data.py [output_dir]
"""
import sys
from pathlib import Path

from app.engine.demand import SCENARIOS, STEPS_PER_DAY
from app.services.orchestrator_service import HELD_OUT_SEED_OFFSET
from app.services.trace_service import save_trace, synth_trace

TRAIN_DAYS = 10
SEED = 0


def write_scenarios(output_dir: Path | str = "data/traces", seed: int = SEED) -> list[Path]:
    """Write `<kind>_train.csv` and `<kind>_test.csv` for every scenario kind."""
    output_dir = Path(output_dir)
    written = []
    for kind in SCENARIOS:
        train = synth_trace(kind, TRAIN_DAYS * STEPS_PER_DAY, seed)
        test = synth_trace(kind, STEPS_PER_DAY, seed + HELD_OUT_SEED_OFFSET)
        written.append(save_trace(train, output_dir / f"{kind}_train.csv"))
        written.append(save_trace(test, output_dir / f"{kind}_test.csv"))
    return written


if __name__ == "__main__":
    for path in write_scenarios(*sys.argv[1:2]):
        print(path)
