"""Build data/zones.csv: IANA zone -> UTC offsets (minutes) observed during 2023.

Each row is `zone,offsets` with offsets `;`-joined in ascending order.
Zones whose 2023 offsets are not a standard/DST pair (more than two
offsets, or a gap other than 30 or 60 minutes) are skipped and listed on
stderr; the matcher only needs clean standard/DST sets.
"""
import datetime as dt
import sys
import zoneinfo

YEAR = 2023


def offsets(zone):
    tz = zoneinfo.ZoneInfo(zone)
    seen = set()
    t = dt.datetime(YEAR, 1, 1, tzinfo=dt.timezone.utc)
    end = dt.datetime(YEAR + 1, 1, 1, tzinfo=dt.timezone.utc)
    while t < end:
        seen.add(int(t.astimezone(tz).utcoffset().total_seconds() // 60))
        t += dt.timedelta(hours=6)
    return sorted(seen)


def main(out):
    rows, skipped = [], []
    for zone in sorted(zoneinfo.available_timezones()):
        if zone.startswith(("Etc/", "SystemV/", "US/", "posixrules")) and zone not in ("Etc/UTC",):
            continue
        offs = offsets(zone)
        ok = len(offs) == 1 or (len(offs) == 2 and offs[1] - offs[0] in (30, 60))
        if not ok or any(o < -720 or o > 840 for o in offs):
            skipped.append((zone, offs))
            continue
        rows.append((zone, offs))
    with open(out, "w") as f:
        f.write("zone,offsets\n")
        for zone, offs in rows:
            f.write(f"{zone},{';'.join(str(o) for o in offs)}\n")
    print(f"{len(rows)} zones written, {len(skipped)} skipped", file=sys.stderr)
    for zone, offs in skipped:
        print(f"  skipped {zone} {offs}", file=sys.stderr)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/zones.csv")
