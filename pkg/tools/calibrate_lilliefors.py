"""Regenerate the shipped Lilliefors critical-value table."""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tplots.normality import calibrate  # noqa: E402

if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "tplots" / "data" / "lilliefors.json"
    table = calibrate()
    out.write_text(json.dumps(table, indent=1) + "\n")
    print(f"wrote {out}")
