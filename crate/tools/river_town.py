#!/usr/bin/env python3
"""Generates the bundled river and town map.

A main river crosses the map west to east. Tributaries branch off towards
outlying communities. A riverside town sits on the north bank with a
footpath grid, connected to a smaller village by a jungle trail. Short
docks (tagged `both`) join the town waterfront to the river.

Usage: python3 tools/river_town.py > crates/core/assets/river_town.map
"""

import math
import sys

# town grid
TOWN_COLS = 9
TOWN_ROWS = 6
TOWN_BLOCK = 40.0
TOWN_ORIGIN = (-160.0, 40.0)

# village at the end of the trail
VILLAGE_COLS = 4
VILLAGE_ROWS = 3
VILLAGE_BLOCK = 30.0
TRAIL = [(260.0, 330.0), (400.0, 380.0), (520.0, 470.0)]

RIVER_WEST = -3000.0
RIVER_EAST = 3000.0
RIVER_STEP = 150.0

TRIBUTARIES = [
    # (junction x on the main river, heading in degrees, segment lengths)
    (-450.0, 140.0, [250, 300, 300, 350, 300]),
    (-1800.0, 250.0, [300, 350, 300, 300]),
    (1500.0, 70.0, [250, 300, 350, 300, 300]),
    (2400.0, 290.0, [300, 300, 250]),
]

DOCK_COLUMNS = [1, 4, 7]


def fmt(p):
    return f"{p[0]:g},{p[1]:g}"


def river_y(x):
    # gentle meander
    return 25.0 * math.sin(x / 700.0) - 20.0


def main():
    lines = []
    out = lines.append

    out("# Synthetic riverside town scenario. Coordinates in meters.")
    out("# Regenerate with tools/river_town.py.")
    out("")
    out("# main river, west to east")
    xs = []
    x = RIVER_WEST
    while x <= RIVER_EAST + 1e-9:
        xs.append(x)
        x += RIVER_STEP
    ox, oy = TOWN_ORIGIN
    dock_xs = [ox + c * TOWN_BLOCK for c in DOCK_COLUMNS]
    junctions = [t[0] for t in TRIBUTARIES]
    xs = sorted(set(xs) | set(dock_xs) | set(junctions))
    river = [(x, round(river_y(x), 2)) for x in xs]
    out("LINE:water " + " ".join(fmt(p) for p in river))

    out("")
    out("# tributaries")
    for jx, heading, segs in TRIBUTARIES:
        p = (jx, round(river_y(jx), 2))
        pts = [p]
        h = heading
        for i, s in enumerate(segs):
            h += 12.0 if i % 2 == 0 else -15.0
            p = (round(p[0] + s * math.cos(math.radians(h)), 2), round(p[1] + s * math.sin(math.radians(h)), 2))
            pts.append(p)
        out("LINE:water " + " ".join(fmt(q) for q in pts))

    out("")
    out("# town footpaths")
    for r in range(TOWN_ROWS):
        y = oy + r * TOWN_BLOCK
        out("LINE:land " + " ".join(fmt((ox + c * TOWN_BLOCK, y)) for c in range(TOWN_COLS)))
    for c in range(TOWN_COLS):
        x = ox + c * TOWN_BLOCK
        out("LINE:land " + " ".join(fmt((x, oy + r * TOWN_BLOCK)) for r in range(TOWN_ROWS)))

    out("")
    out("# trail to the village")
    corner = (ox + (TOWN_COLS - 1) * TOWN_BLOCK, oy + (TOWN_ROWS - 1) * TOWN_BLOCK)
    out("LINE:land " + " ".join(fmt(p) for p in [corner] + TRAIL))

    out("")
    out("# village paths")
    vx, vy = TRAIL[-1]
    for r in range(VILLAGE_ROWS):
        y = vy + r * VILLAGE_BLOCK
        out("LINE:land " + " ".join(fmt((vx + c * VILLAGE_BLOCK, y)) for c in range(VILLAGE_COLS)))
    for c in range(VILLAGE_COLS):
        x = vx + c * VILLAGE_BLOCK
        out("LINE:land " + " ".join(fmt((x, vy + r * VILLAGE_BLOCK)) for r in range(VILLAGE_ROWS)))

    out("")
    out("# docks")
    for dx in dock_xs:
        out(f"LINE:both {fmt((dx, oy))} {fmt((dx, round(river_y(dx), 2)))}")

    sys.stdout.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
