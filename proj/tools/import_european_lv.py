#!/usr/bin/env python3
"""Regenerate data/european_lv/ from the pandapower copy of the IEEE European LV
test feeder.

pandapower ships the feeder as a serialized network; this script writes it back
out in the delimited-text layout of the published dataset (LineCodes.csv,
Lines.csv, Loads.csv, Buscoords.csv) plus a Source.csv describing the Thevenin
source at the LV head. Loads are written with the published 1 kW / 0.95 PF base
rating; phase connections come from the serialized per-phase powers.

usage: import_european_lv.py IEEE_European_LV_Off_Peak_1.json OUT_DIR
"""
import io
import json
import sys
from pathlib import Path

import pandas as pd


def frame(obj, key):
    v = obj[key]
    return pd.read_json(io.StringIO(v["_object"]), orient=v.get("orient", "split"))


def num(x, digits=6):
    return f"{float(x):.{digits}g}"


def main(src, out):
    net = json.load(open(src))["_object"]
    bus = frame(net, "bus")
    line = frame(net, "line")
    loads = frame(net, "asymmetric_load")
    trafo = frame(net, "trafo")
    std = net["std_types"]["line"]

    name = {i: str(n) for i, n in zip(bus.index, bus["name"])}
    lv_head = name[int(trafo["lv_bus"].iloc[0])]
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    used = sorted(set(line["std_type"]))
    with open(out / "LineCodes.csv", "w", newline="\n") as f:
        f.write("Name,nphases,R1,X1,R0,X0,C1,C0,Units\n")
        for code in used:
            s = std[code]
            f.write(",".join([code, "3", num(s["r_ohm_per_km"]), num(s["x_ohm_per_km"]),
                              num(s["r0_ohm_per_km"]), num(s["x0_ohm_per_km"]),
                              num(s.get("c_nf_per_km", 0)), num(s.get("c0_nf_per_km", 0)),
                              "km"]) + "\n")

    with open(out / "Lines.csv", "w", newline="\n") as f:
        f.write("Name,Bus1,Bus2,Phases,Length,Units,LineCode\n")
        for _, r in line.iterrows():
            length_m = round(float(r["length_km"]) * 1000.0, 6)
            f.write(f"{r['name']},{name[r['from_bus']]},{name[r['to_bus']]},ABC,"
                    f"{length_m:g},m,{r['std_type']}\n")

    with open(out / "Loads.csv", "w", newline="\n") as f:
        f.write("Name,numPhases,Bus,phases,kV,Model,Connection,kW,PF,Yearly\n")
        for i, r in loads.iterrows():
            p = {"A": r["p_a_mw"], "B": r["p_b_mw"], "C": r["p_c_mw"]}
            phase = max(p, key=p.get)
            f.write(f"{r['name']},1,{name[r['bus']]},{phase},0.23,1,wye,1,0.95,Shape_{i + 1}\n")

    with open(out / "Buscoords.csv", "w", newline="\n") as f:
        f.write("Busname,x,y\n")
        for i, r in bus.iterrows():
            if name[i].upper() == "SOURCEBUS":
                continue
            x, y = json.loads(r["geo"])["coordinates"]
            f.write(f"{name[i]},{x:.3f},{y:.3f}\n")

    with open(out / "Source.csv", "w", newline="\n") as f:
        f.write("Bus,BasekV,pu_a,pu_b,pu_c,Angle_a,Angle_b,Angle_c,R1,X1,R0,X0\n")
        f.write(f"{lv_head},0.416,1.05,1.05,1.05,0,-120,120,0,0,0,0\n")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
