#!/usr/bin/env python3
"""Convert a published drive-cycle table into the `time_s,speed_kmh` CSV used by cabin-ac.

Accepts a local path or an http(s) URL. Input is any whitespace, tab or
comma separated table whose rows are `<seconds> <speed>`; lines that do not
start with a number (titles, headers) are skipped. Speeds are taken as mph
unless --kmh or --ms is given. Gaps in the time column are filled by linear
interpolation so the output has a 1 s spacing starting at 0.

    scripts/convert_cycle.py uddscol.txt -o data/cycles/udds.csv
"""

import argparse
import csv
import re
import sys
import urllib.request

MPH_TO_KMH = 1.609344
MS_TO_KMH = 3.6


def read_text(src):
    if re.match(r"^https?://", src):
        with urllib.request.urlopen(src, timeout=30) as r:
            return r.read().decode("utf-8", errors="replace")
    with open(src, encoding="utf-8", errors="replace") as f:
        return f.read()


def parse_rows(text):
    rows = []
    for line in text.splitlines():
        parts = [p for p in re.split(r"[\s,;]+", line.strip()) if p]
        if len(parts) < 2:
            continue
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            continue
        rows.append((t, v))
    if not rows:
        sys.exit("no numeric rows found")
    return rows


def resample(rows):
    rows.sort()
    t0 = rows[0][0]
    rows = [(t - t0, v) for t, v in rows]
    out = []
    j = 0
    for s in range(int(rows[-1][0]) + 1):
        while j + 1 < len(rows) and rows[j + 1][0] <= s:
            j += 1
        t_a, v_a = rows[j]
        if t_a == s or j + 1 == len(rows):
            out.append(v_a)
        else:
            t_b, v_b = rows[j + 1]
            out.append(v_a + (v_b - v_a) * (s - t_a) / (t_b - t_a))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", help="file path or URL")
    ap.add_argument("-o", "--out", help="output CSV (stdout when omitted)")
    unit = ap.add_mutually_exclusive_group()
    unit.add_argument("--kmh", action="store_true", help="speeds are already km/h")
    unit.add_argument("--ms", action="store_true", help="speeds are m/s")
    args = ap.parse_args()

    factor = 1.0 if args.kmh else MS_TO_KMH if args.ms else MPH_TO_KMH
    speeds = resample(parse_rows(read_text(args.source)))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["time_s", "speed_kmh"])
    for t, v in enumerate(speeds):
        w.writerow([t, round(max(v, 0.0) * factor, 4)])
    if args.out:
        out.close()


if __name__ == "__main__":
    main()
