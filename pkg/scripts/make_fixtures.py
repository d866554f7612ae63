"""Write every built-in scenario to fixtures/<name>.json."""
from pathlib import Path

from fannet.library import FIXTURES
from fannet.scenario import dump_scenario

out = Path(__file__).resolve().parent.parent / "fixtures"
out.mkdir(exist_ok=True)
for name, build in FIXTURES.items():
    dump_scenario(build(), out / f"{name}.json")
    print(f"wrote {out / name}.json")
