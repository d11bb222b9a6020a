"""Replay of a finished run from its checkpoints and time series."""
import json
from pathlib import Path

from rest_framework.exceptions import ValidationError

from lagrangian.checkpoints import load_checkpoints
from transport.coupling import coupling_Q

from .osgood import osgood_diagnostic
from .runner import CHECKPOINT_DIR, CSV_NAME, REPORT_NAME, read_rows

REPLAY_NAME = "replay.json"


def replayed_series(run_dir: Path) -> dict:
    """Report metadata with the rows rebuilt from the stored clouds."""
    report = json.loads((run_dir / REPORT_NAME).read_text())
    rows = [{"t": cloud.time, "q": coupling_Q(cloud)} for cloud in load_checkpoints(run_dir / CHECKPOINT_DIR)]
    return {"eps": report["eps"], "t_final": report["t_final"], "ledger": report["ledger"], "rows": rows}


def replay_run(run_dir, refined_dir=None) -> dict:
    run_dir = Path(run_dir)
    series = replayed_series(run_dir)
    logged = read_rows(run_dir / CSV_NAME)
    if len(logged) != len(series["rows"]):
        raise ValidationError(
            {"checkpoints": f"{len(logged)} logged rows but {len(series['rows'])} checkpoints in {run_dir}"}
        )
    gap = max((abs(a["q"] - b["q"]) for a, b in zip(logged, series["rows"])), default=0.0)
    refined = replayed_series(Path(refined_dir)) if refined_dir else None
    result = {
        "run_dir": str(run_dir),
        "rows": series["rows"],
        "max_q_gap": gap,
        "osgood": osgood_diagnostic(series, refined).to_dict(),
    }
    (run_dir / REPLAY_NAME).write_text(json.dumps(result, indent=2, sort_keys=True))
    return result
