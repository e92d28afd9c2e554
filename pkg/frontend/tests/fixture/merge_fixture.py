"""Merge the fixture records with an exported verdict file and print the
resulting report row as JSON for the frontend round-trip test to check.

argv: fixture_dir export_json_path
"""

import json
import sys
from pathlib import Path

from latentprobe.records import read_records
from latentprobe.report import Verdict, merge_verdicts
from latentprobe.store import ImageStore


def main() -> int:
    fixture = Path(sys.argv[1])
    export = json.loads(Path(sys.argv[2]).read_text())
    meta = json.loads((fixture / "meta.json").read_text())
    records = read_records(fixture / "records.jsonl")
    verdicts = [Verdict.from_dict(v) for v in export["verdicts"]]
    logs = {("toy", "Truncation-Only", "Adaptive"):
            (records, meta["seeds_consumed"])}
    row = merge_verdicts(logs, verdicts, quota=meta["quota"],
                         load_pixels=ImageStore(fixture / "images").load_pixels,
                         ).rows[0]
    print(json.dumps({
        "seeds": row.seeds,
        "validated": row.validated,
        "val_rate": row.val_rate,
        "fault_validated": row.fault_validated,
        "fault_rate": row.fault_rate,
        "efficiency": row.efficiency,
        "diversity": row.diversity,
        "flags": sorted(row.flags),
    }))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
