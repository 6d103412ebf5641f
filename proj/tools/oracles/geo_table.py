"""Build data/geo.csv from the KB regions and data/zones.csv.

Region k (in KB order) owns 10.k.0.0/16 and, as a second range, a
documentation block 198.18.k.0/24. Offsets are those of the region's
first zone.
"""
import csv
import json
import sys
from pathlib import Path

root = Path(__file__).resolve().parents[2]
kb = json.loads((root / "data/kb.json").read_text())
zones = {}
with open(root / "data/zones.csv") as f:
    for row in csv.reader(f):
        if row and row[0] != "zone":
            zones[row[0]] = row[1]

out = sys.stdout if len(sys.argv) < 2 else open(sys.argv[1], "w")
out.write("prefix,region,offsets\n")
for k, (region, info) in enumerate(kb["regions"].items(), start=1):
    offsets = zones[info["zones"][0]]
    out.write(f"10.{k}.0.0/16,{region},{offsets}\n")
    out.write(f"198.18.{k}.0/24,{region},{offsets}\n")
