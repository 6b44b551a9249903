#!/usr/bin/env python3
"""Generate the demo oval: two straights joined by two constant-radius turns.

Writes a centerline file (s,x,y) and a racing-line file (s,x,y,w) whose
lateral offset swings to the inside at each turn apex. The analytic
centerline length is 2*L + 2*pi*R.
"""
import argparse
import math


def centerline(straight, radius, spacing):
    total = 2.0 * straight + 2.0 * math.pi * radius
    n = int(round(total / spacing))
    ds = total / n
    arc = math.pi * radius
    pts = []
    for i in range(n):
        s = i * ds
        if s < straight:
            x, y, phi = s, 0.0, 0.0
        elif s < straight + arc:
            a = (s - straight) / radius
            x, y, phi = straight + radius * math.sin(a), radius - radius * math.cos(a), a
        elif s < 2 * straight + arc:
            d = s - straight - arc
            x, y, phi = straight - d, 2 * radius, math.pi
        else:
            a = (s - 2 * straight - arc) / radius
            x, y, phi = -radius * math.sin(a), radius + radius * math.cos(a), math.pi + a
        pts.append((s, x, y, phi))
    return total, pts


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--straight", type=float, default=800.0)
    ap.add_argument("--radius", type=float, default=400.0)
    ap.add_argument("--spacing", type=float, default=1.0)
    ap.add_argument("--half-width", type=float, default=7.5)
    ap.add_argument("--swing", type=float, default=4.0)
    ap.add_argument("--out-dir", default="data")
    args = ap.parse_args()

    total, pts = centerline(args.straight, args.radius, args.spacing)
    with open(f"{args.out_dir}/oval_centerline.csv", "w") as f:
        f.write("s,x,y\n")
        for s, x, y, _ in pts:
            f.write(f"{s:.6f},{x:.6f},{y:.6f}\n")

    apex = args.straight + 0.5 * math.pi * args.radius
    line = []
    for s, x, y, phi in pts:
        off = args.swing * math.cos(4.0 * math.pi * (s - apex) / total)
        line.append((x - off * math.sin(phi), y + off * math.cos(phi), args.half_width - abs(off)))
    s = 0.0
    with open(f"{args.out_dir}/oval_racing_line.csv", "w") as f:
        f.write("s,x,y,w\n")
        for i, (x, y, w) in enumerate(line):
            if i > 0:
                s += math.hypot(x - line[i - 1][0], y - line[i - 1][1])
            f.write(f"{s:.6f},{x:.6f},{y:.6f},{w:.6f}\n")
    print(f"analytic centerline length {total:.6f} m, {len(pts)} points")


if __name__ == "__main__":
    main()
